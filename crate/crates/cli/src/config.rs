//! Declarative run configuration: TOML schema, key overrides and resolution
//! into core problem types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xover_core::fixtures::{self, misspecification_rhos};
use xover_core::simulation::TwoStageConfig;
use xover_core::{
    build_correlation, default_rho_tables, CorrelationSpec, DesignProblem, Family, Matrix, OptimizerConfig, RhoTable,
    Scenario, Sequence, StructureId,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Schema violation, tagged with the dotted path of the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

/// θ₁, θ₂ and the named structures crossed by `misspec-table`.
pub type MisspecInputs = (Vec<f64>, Vec<f64>, Vec<(String, CorrelationSpec<f64>)>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Optimize,
    Efficiency,
    MisspecTable,
    Simulate,
    DumpMatrices,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Efficiency => "efficiency",
            Command::MisspecTable => "misspec-table",
            Command::Simulate => "simulate",
            Command::DumpMatrices => "dump-matrices",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    /// Overrides both the optimizer and the simulation seed when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misspec: Option<MisspecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either a named fixture, explicit fields, or a fixture with some fields
/// replaced. `structure` names one of the six default correlation settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequences: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_correlation: Option<CorrelationConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorrelationConfig {
    Independence,
    CompoundSymmetric {
        rho: f64,
    },
    Ar1 {
        rho: f64,
    },
    Banded1 {
        rho: f64,
    },
    SeqBanded {
        pairs: BTreeMap<String, f64>,
    },
    SeqAr1Symmetric {
        pairs: BTreeMap<String, f64>,
    },
    SeqAr1 {
        pairs: BTreeMap<String, f64>,
    },
    Custom {
        matrices: BTreeMap<String, Vec<Vec<f64>>>,
    },
    /// One of the six named settings, e.g. `"Corr(3)"`.
    Structure {
        id: String,
    },
}

/// The assumed problem for `efficiency`: anything omitted is taken from the
/// true problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisspecConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<Vec<f64>>,
    /// Structure ids to cross; all six when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structures: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_total: usize,
    pub pilot_fraction: f64,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub timestamp: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            timestamp: true,
        }
    }
}

fn yes() -> bool {
    true
}

/// Parses a `value` written on the command line as TOML, falling back to a
/// bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `path = value` inside a TOML tree, creating tables as needed.
pub fn apply_override(root: &mut toml::Table, path: &str, raw: &str) -> ConfigResult<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(path, "empty key segment in override"));
    }
    let mut table = root;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(parts[..=i].join("."), "cannot override inside a non-table value"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw));
    Ok(())
}

/// Splits `key=value` override syntax.
pub fn split_override(arg: &str) -> ConfigResult<(&str, &str)> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| ConfigError::new(arg, "override must look like key.path=value"))
}

pub fn parse_table(text: &str) -> ConfigResult<toml::Table> {
    toml::from_str(text).map_err(|e| ConfigError::new("<root>", e.message().to_string()))
}

pub fn read_table(path: &Path) -> ConfigResult<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text)
}

/// Deserializes a TOML tree, reporting the dotted path of the first bad key.
pub fn from_table(table: toml::Table) -> ConfigResult<RunConfig> {
    let value = toml::Value::Table(table);
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<root>".to_string() } else { path };
        ConfigError::new(path, e.into_inner().to_string())
    })?;
    cfg.check()?;
    Ok(cfg)
}

#[cfg(test)]
pub fn parse_config(text: &str) -> ConfigResult<RunConfig> {
    from_table(parse_table(text)?)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks that the blocks needed by the chosen command are present and
    /// that the problem resolves.
    pub fn check(&self) -> ConfigResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if let Some(opt) = &self.optimizer {
            opt.validate()
                .map_err(|e| ConfigError::new("optimizer", e.to_string()))?;
        }
        let problem = self.problem()?;
        match self.command {
            Command::Efficiency => {
                if self.efficiency.is_none() {
                    return Err(ConfigError::new(
                        "efficiency",
                        "block required for the efficiency command",
                    ));
                }
                self.assumed_problem(&problem)?;
            }
            Command::MisspecTable => {
                self.misspec_inputs()?;
            }
            Command::Simulate => {
                let sim = self
                    .simulation
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("simulation", "block required for the simulate command"))?;
                if !(sim.pilot_fraction > 0.0 && sim.pilot_fraction <= 1.0) {
                    return Err(ConfigError::new("simulation.pilot_fraction", "must be in (0, 1]"));
                }
                if sim.replications == 0 {
                    return Err(ConfigError::new("simulation.replications", "must be positive"));
                }
            }
            Command::DumpMatrices => {
                if self.output.dir.is_none() {
                    return Err(ConfigError::new(
                        "output.dir",
                        "dump-matrices needs an output directory",
                    ));
                }
            }
            Command::Optimize => {}
        }
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let mut cfg = self.optimizer.clone().unwrap_or_default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }

    fn fixture(&self) -> ConfigResult<Option<(&'static fixtures::FixtureSpec, usize)>> {
        match &self.problem.fixture {
            None => Ok(None),
            Some(name) => fixtures::resolve(name)
                .map(Some)
                .map_err(|_| ConfigError::new("problem.fixture", format!("unknown fixture '{name}'"))),
        }
    }

    pub fn problem(&self) -> ConfigResult<DesignProblem<f64>> {
        let pc = &self.problem;
        let fx = self.fixture()?;
        let t =
            pc.t.or(fx.map(|(f, _)| f.t))
                .ok_or_else(|| ConfigError::new("problem.t", "missing (give t or a fixture)"))?;
        let p =
            pc.p.or(fx.map(|(f, _)| f.p))
                .ok_or_else(|| ConfigError::new("problem.p", "missing (give p or a fixture)"))?;
        if !(2..=xover_core::design::MAX_TREATMENTS).contains(&t) {
            return Err(ConfigError::new("problem.t", format!("t = {t} is outside 2..=26")));
        }
        if p < 2 {
            return Err(ConfigError::new("problem.p", "at least two periods are required"));
        }
        let sequences = match (&pc.sequences, fx) {
            (Some(list), _) => parse_sequence_list(list, p, t, "problem.sequences")?,
            (None, Some((f, _))) if f.t == t && f.p == p => f.sequence_list(),
            _ => {
                return Err(ConfigError::new(
                    "problem.sequences",
                    "missing (give sequences or a matching fixture)",
                ))
            }
        };
        let family = pc
            .family
            .or(fx.map(|(f, _)| f.family))
            .ok_or_else(|| ConfigError::new("problem.family", "missing (give family or a fixture)"))?;
        let theta = match (&pc.theta, fx) {
            (Some(v), _) => v.clone(),
            (None, Some((f, i))) => f.thetas()[i].clone(),
            (None, None) => return Err(ConfigError::new("problem.theta", "missing (give theta or a fixture)")),
        };
        check_theta(&theta, p, t, "problem.theta")?;
        let correlation = self.working_correlation(t)?;
        let true_correlation = pc
            .true_correlation
            .as_ref()
            .map(|c| resolve_correlation(c, t, "problem.true_correlation"))
            .transpose()?;
        // every sequence must be coverable by the correlation tables
        for (spec, key) in std::iter::once((&correlation, "problem.correlation"))
            .chain(true_correlation.as_ref().map(|c| (c, "problem.true_correlation")))
        {
            for seq in &sequences {
                build_correlation(spec, seq, p).map_err(|e| ConfigError::new(key, e.to_string()))?;
            }
        }
        DesignProblem::new(t, p, sequences, family, correlation, theta)
            .and_then(|prob| prob.with_true_correlation(true_correlation))
            .map_err(|e| ConfigError::new("problem", e.to_string()))
    }

    fn working_correlation(&self, t: usize) -> ConfigResult<CorrelationSpec<f64>> {
        match (&self.problem.correlation, &self.problem.structure) {
            (Some(_), Some(_)) => Err(ConfigError::new(
                "problem.structure",
                "give either structure or correlation, not both",
            )),
            (Some(c), None) => resolve_correlation(c, t, "problem.correlation"),
            (None, Some(id)) => structure_spec(id, t, "problem.structure"),
            (None, None) => Ok(CorrelationSpec::Independence),
        }
    }

    pub fn assumed_problem(&self, truth: &DesignProblem<f64>) -> ConfigResult<DesignProblem<f64>> {
        let eff = self.efficiency.clone().unwrap_or_default();
        let mut assumed = truth.clone();
        if let Some(theta) = &eff.theta {
            check_theta(theta, truth.periods(), truth.treatments(), "efficiency.theta")?;
            assumed = assumed
                .with_theta(theta.clone())
                .map_err(|e| ConfigError::new("efficiency.theta", e.to_string()))?;
        }
        if let Some(c) = &eff.correlation {
            let spec = resolve_correlation(c, truth.treatments(), "efficiency.correlation")?;
            assumed = assumed
                .with_correlation(spec)
                .map_err(|e| ConfigError::new("efficiency.correlation", e.to_string()))?;
        }
        Ok(assumed)
    }

    pub fn misspec_inputs(&self) -> ConfigResult<MisspecInputs> {
        let base = self.problem()?;
        let ms = self.misspec.clone().unwrap_or_default();
        let fx = self.fixture()?;
        let pick = |given: &Option<Vec<f64>>, i: usize, key: &str| -> ConfigResult<Vec<f64>> {
            let theta = match (given, fx) {
                (Some(v), _) => v.clone(),
                (None, Some((f, _))) => f.thetas()[i].clone(),
                (None, None) => return Err(ConfigError::new(key, "missing (give it or use a fixture)")),
            };
            check_theta(&theta, base.periods(), base.treatments(), key)?;
            Ok(theta)
        };
        let theta1 = pick(&ms.theta1, 0, "misspec.theta1")?;
        let theta2 = pick(&ms.theta2, 1, "misspec.theta2")?;
        let rhos = if base.treatments() == 2 {
            default_rho_tables::<f64>(Scenario::TwoTreatment)
        } else {
            misspecification_rhos::<f64>()
        };
        let structures = match &ms.structures {
            None => rhos.all().into_iter().map(|(id, s)| (id.to_string(), s)).collect(),
            Some(names) => names
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let id: StructureId = n.parse().map_err(|_| {
                        ConfigError::new(format!("misspec.structures[{i}]"), format!("unknown structure '{n}'"))
                    })?;
                    Ok((id.to_string(), rhos.structure(id)))
                })
                .collect::<ConfigResult<Vec<_>>>()?,
        };
        if structures.len() < 2 {
            return Err(ConfigError::new("misspec.structures", "need at least two structures"));
        }
        Ok((theta1, theta2, structures))
    }

    pub fn two_stage_config(&self) -> ConfigResult<TwoStageConfig> {
        let prob = self.problem()?;
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| ConfigError::new("simulation", "block required for the simulate command"))?;
        let seed = self.seed.or(sim.seed).unwrap_or(1);
        Ok(TwoStageConfig {
            sequences: prob.sequences().to_vec(),
            periods: prob.periods(),
            treatments: prob.treatments(),
            family: prob.family(),
            theta_true: prob.theta().to_vec(),
            correlation: prob.correlation().clone(),
            n_total: sim.n_total,
            pilot_fraction: sim.pilot_fraction,
            replications: sim.replications,
            seed,
            optimizer: self.optimizer_config(),
        })
    }
}

fn check_theta(theta: &[f64], p: usize, t: usize, key: &str) -> ConfigResult<()> {
    let m = xover_core::parameter_count(p, t);
    if theta.len() != m {
        return Err(ConfigError::new(
            key,
            format!(
                "expected {m} entries (p + 2t - 2 with p = {p}, t = {t}), found {}",
                theta.len()
            ),
        ));
    }
    if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
        return Err(ConfigError::new(format!("{key}[{i}]"), "value is not finite"));
    }
    Ok(())
}

fn parse_sequence_list(list: &[String], p: usize, t: usize, key: &str) -> ConfigResult<Vec<Sequence>> {
    let seqs = list
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let seq = Sequence::parse(s, t).map_err(|e| ConfigError::new(format!("{key}[{i}]"), e.to_string()))?;
            if seq.len() != p {
                return Err(ConfigError::new(
                    format!("{key}[{i}]"),
                    format!("'{s}' has {} periods, expected {p}", seq.len()),
                ));
            }
            Ok(seq)
        })
        .collect::<ConfigResult<Vec<_>>>()?;
    if seqs.is_empty() {
        return Err(ConfigError::new(key, "at least one sequence is required"));
    }
    Ok(seqs)
}

fn structure_spec(id: &str, t: usize, key: &str) -> ConfigResult<CorrelationSpec<f64>> {
    let sid: StructureId = id
        .parse()
        .map_err(|_| ConfigError::new(key, format!("unknown structure '{id}'")))?;
    let scenario = if t == 2 {
        Scenario::TwoTreatment
    } else {
        Scenario::LatinSquare4
    };
    Ok(default_rho_tables::<f64>(scenario).structure(sid))
}

fn rho_table(pairs: &BTreeMap<String, f64>, key: &str) -> ConfigResult<RhoTable<f64>> {
    pairs.iter().try_fold(RhoTable::new(), |table, (pair, &rho)| {
        table
            .with(pair, rho)
            .map_err(|e| ConfigError::new(format!("{key}.pairs.{pair}"), e.to_string()))
    })
}

pub fn resolve_correlation(c: &CorrelationConfig, t: usize, key: &str) -> ConfigResult<CorrelationSpec<f64>> {
    let spec = match c {
        CorrelationConfig::Independence => CorrelationSpec::Independence,
        CorrelationConfig::CompoundSymmetric { rho } => CorrelationSpec::CompoundSymmetric(*rho),
        CorrelationConfig::Ar1 { rho } => CorrelationSpec::Ar1(*rho),
        CorrelationConfig::Banded1 { rho } => CorrelationSpec::Banded1(*rho),
        CorrelationConfig::SeqBanded { pairs } => CorrelationSpec::SeqBanded(rho_table(pairs, key)?),
        CorrelationConfig::SeqAr1Symmetric { pairs } => CorrelationSpec::SeqAr1Symmetric(rho_table(pairs, key)?),
        CorrelationConfig::SeqAr1 { pairs } => CorrelationSpec::SeqAr1(rho_table(pairs, key)?),
        CorrelationConfig::Custom { matrices } => {
            let mut map = BTreeMap::new();
            for (label, rows) in matrices {
                let seq = Sequence::parse(label, t)
                    .map_err(|e| ConfigError::new(format!("{key}.matrices.{label}"), e.to_string()))?;
                let m = Matrix::from_rows(rows)
                    .map_err(|e| ConfigError::new(format!("{key}.matrices.{label}"), e.to_string()))?;
                map.insert(seq, m);
            }
            CorrelationSpec::Custom(map)
        }
        CorrelationConfig::Structure { id } => return structure_spec(id, t, &format!("{key}.id")),
    };
    spec.validate().map_err(|e| ConfigError::new(key, e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
command = "optimize"

[problem]
fixture = "ab-ba-theta1"
structure = "Corr(1)"
"#;

    #[test]
    fn minimal_config_resolves() {
        let cfg = parse_config(MINIMAL).unwrap();
        let prob = cfg.problem().unwrap();
        assert_eq!(prob.sequences().len(), 2);
        assert_eq!(prob.theta(), &[0.5, -1.0, 4.0, -2.0]);
    }

    #[test]
    fn wrong_theta_length_names_the_key() {
        let mut table = parse_table(MINIMAL).unwrap();
        apply_override(&mut table, "problem.theta", "[0.1, 0.2]").unwrap();
        let err = from_table(table).unwrap_err();
        assert_eq!(err.path, "problem.theta");
    }

    #[test]
    fn unknown_key_is_located() {
        let text = format!("{MINIMAL}\n[optimizer]\nrestart = 3\n");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.path, "optimizer.restart");
        assert!(err.message.contains("restart"));
    }

    #[test]
    fn type_errors_carry_the_path() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = \"one\"");
        assert_eq!(parse_config(&text).unwrap_err().path, "schema_version");
    }

    #[test]
    fn override_values_are_typed() {
        let mut table = parse_table(MINIMAL).unwrap();
        apply_override(&mut table, "optimizer.restarts", "3").unwrap();
        apply_override(&mut table, "problem.structure", "Corr(4)").unwrap();
        let cfg = from_table(table).unwrap();
        assert_eq!(cfg.optimizer.unwrap().restarts, 3);
        assert_eq!(cfg.problem.structure.as_deref(), Some("Corr(4)"));
    }

    #[test]
    fn explicit_correlation_tables_parse() {
        let text = r#"
schema_version = 1
command = "optimize"
[problem]
t = 2
p = 2
sequences = ["AB", "BA"]
family = "binary"
theta = [0.5, -1.0, 4.0, -2.0]
[problem.correlation]
kind = "seq-ar1"
pairs = { AB = 0.4, BA = 0.3 }
"#;
        let cfg = parse_config(text).unwrap();
        let prob = cfg.problem().unwrap();
        assert!(matches!(prob.correlation(), CorrelationSpec::SeqAr1(_)));
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn command_blocks_are_required() {
        let text = MINIMAL.replace("\"optimize\"", "\"simulate\"");
        assert_eq!(parse_config(&text).unwrap_err().path, "simulation");
        let text = MINIMAL.replace("\"optimize\"", "\"dump-matrices\"");
        assert_eq!(parse_config(&text).unwrap_err().path, "output.dir");
    }
}
