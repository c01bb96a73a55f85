//! Correlated response simulation, GEE fitting and the two-stage
//! pilot-then-optimize trial comparison. Double precision only.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::correlation::{build_correlation, CorrelationKind, CorrelationSpec, RhoTable};
use crate::design::{build_design_matrix, parameter_count, Design, ParamVector, Sequence};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::linalg::{cholesky, Matrix};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::problem::DesignProblem;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subject {
    pub id: usize,
    pub sequence: Sequence,
    pub responses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialDataset {
    pub periods: usize,
    pub treatments: usize,
    pub subjects: Vec<Subject>,
}

impl TrialDataset {
    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// Appends another dataset, renumbering its subjects.
    pub fn extend(&mut self, other: TrialDataset) {
        let offset = self.subjects.len();
        self.subjects.extend(other.subjects.into_iter().map(|mut s| {
            s.id += offset;
            s
        }));
    }

    /// Subjects grouped by sequence, in first-seen order.
    fn grouped(&self) -> Vec<(Sequence, Vec<&[f64]>)> {
        let mut groups: Vec<(Sequence, Vec<&[f64]>)> = Vec::new();
        for s in &self.subjects {
            match groups.iter_mut().find(|(q, _)| q == &s.sequence) {
                Some((_, v)) => v.push(&s.responses),
                None => groups.push((s.sequence.clone(), vec![&s.responses])),
            }
        }
        groups
    }
}

fn poisson_quantile(mu: f64, u: f64) -> f64 {
    let mut k = 0u32;
    let mut pmf = (-mu).exp();
    let mut cdf = pmf;
    while cdf < u && k < 100_000 {
        k += 1;
        pmf *= mu / f64::from(k);
        cdf += pmf;
        if pmf == 0.0 && cdf < u {
            break;
        }
    }
    f64::from(k)
}

/// Draws correlated responses through a Gaussian copula: a latent normal
/// vector with the sequence's correlation matrix is mapped to uniforms and
/// then to the marginal distribution of each period.
pub fn simulate_responses(
    counts: &[(Sequence, usize)],
    theta: &ParamVector<f64>,
    corr: &CorrelationSpec<f64>,
    family: Family,
    seed: u64,
) -> Result<TrialDataset> {
    let p = theta.periods();
    let t = theta.treatments();
    let theta = theta.to_vec();
    let normal = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subjects = Vec::new();
    for (seq, n) in counts {
        let x = build_design_matrix::<f64>(seq, p, t)?;
        let mu = x
            .mat_vec(&theta)
            .into_iter()
            .map(|e| family.mean(e))
            .collect::<Result<Vec<_>>>()?;
        let c = build_correlation(corr, seq, p)?;
        let l = cholesky(c.matrix()).ok_or_else(|| Error::NotPositiveDefinite {
            sequence: seq.label(),
            min_eigenvalue: 0.0,
        })?;
        for _ in 0..*n {
            let e: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z = l.mat_vec(&e);
            let responses = z
                .iter()
                .zip(&mu)
                .map(|(&zi, &m)| {
                    let u = normal.cdf(zi);
                    match family {
                        Family::Binary => f64::from(u8::from(u < m)),
                        Family::Poisson => poisson_quantile(m, u),
                    }
                })
                .collect();
            subjects.push(Subject {
                id: subjects.len(),
                sequence: seq.clone(),
                responses,
            });
        }
    }
    Ok(TrialDataset {
        periods: p,
        treatments: t,
        subjects,
    })
}

#[derive(Clone, Debug)]
pub struct GeeFit {
    pub theta_hat: ParamVector<f64>,
    /// Estimated working correlation.
    pub correlation: CorrelationSpec<f64>,
    /// Pearson dispersion estimate.
    pub phi_hat: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl GeeFit {
    /// Scalar correlation estimate, or the mean over pairs for tables.
    pub fn rho_summary(&self) -> f64 {
        match &self.correlation {
            CorrelationSpec::CompoundSymmetric(r) | CorrelationSpec::Ar1(r) | CorrelationSpec::Banded1(r) => *r,
            CorrelationSpec::SeqBanded(t) | CorrelationSpec::SeqAr1Symmetric(t) | CorrelationSpec::SeqAr1(t) => {
                t.iter().map(|(_, r)| r).sum::<f64>() / t.len().max(1) as f64
            }
            _ => 0.0,
        }
    }
}

pub const FIT_MAX_ITERS: usize = 50;
const FIT_TOL: f64 = 1e-6;
const RHO_LIMIT: f64 = 0.98;

struct GroupState {
    x: Matrix<f64>,
    mu: Vec<f64>,
    var: Vec<f64>,
}

fn group_states(
    groups: &[(Sequence, Vec<&[f64]>)],
    family: Family,
    p: usize,
    t: usize,
    theta: &[f64],
) -> Result<Vec<GroupState>> {
    groups
        .iter()
        .map(|(seq, _)| {
            let x = build_design_matrix::<f64>(seq, p, t)?;
            let eta = x.mat_vec(theta);
            let mu = eta.iter().map(|&e| family.mean(e)).collect::<Result<Vec<_>>>()?;
            let var = eta
                .iter()
                .map(|&e| family.guarded_variance(e))
                .collect::<Result<Vec<_>>>()?;
            Ok(GroupState { x, mu, var })
        })
        .collect()
}

/// Moment estimate of the correlation from Pearson residuals.
fn estimate_correlation(
    kind: CorrelationKind,
    groups: &[(Sequence, Vec<&[f64]>)],
    states: &[GroupState],
    p: usize,
    m: usize,
) -> Result<(CorrelationSpec<f64>, f64)> {
    let mut resid: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut ss = 0.0;
    let mut nobs = 0usize;
    for (gi, ((_, ys), st)) in groups.iter().zip(states).enumerate() {
        for y in ys {
            let r: Vec<f64> = (0..p).map(|i| (y[i] - st.mu[i]) / st.var[i].sqrt()).collect();
            ss += r.iter().map(|v| v * v).sum::<f64>();
            nobs += p;
            resid.push((gi, r));
        }
    }
    let phi = ss / (nobs.saturating_sub(m).max(1)) as f64;
    let avg = |pairs: &mut dyn Iterator<Item = f64>| {
        let (s, n) = pairs.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64 / phi
        }
    };
    let clamp = |r: f64| r.clamp(-RHO_LIMIT, RHO_LIMIT);
    let lag1 = || resid.iter().flat_map(|(_, r)| (0..p - 1).map(move |i| r[i] * r[i + 1]));
    let spec = match kind {
        CorrelationKind::Independence => CorrelationSpec::Independence,
        CorrelationKind::CompoundSymmetric => {
            let mut it = resid
                .iter()
                .flat_map(|(_, r)| (0..p).flat_map(move |i| ((i + 1)..p).map(move |j| r[i] * r[j])));
            let lower = -1.0 / (p as f64 - 1.0) + 0.02;
            CorrelationSpec::CompoundSymmetric(avg(&mut it).clamp(lower, RHO_LIMIT))
        }
        CorrelationKind::Ar1 => CorrelationSpec::Ar1(clamp(avg(&mut lag1()))),
        CorrelationKind::Banded1 => CorrelationSpec::Banded1(clamp(avg(&mut lag1()))),
        CorrelationKind::SeqBanded | CorrelationKind::SeqAr1 | CorrelationKind::SeqAr1Symmetric => {
            let symmetric = kind == CorrelationKind::SeqAr1Symmetric;
            let mut sums: std::collections::BTreeMap<(usize, usize), (f64, usize)> = Default::default();
            for (gi, r) in &resid {
                let seq = &groups[*gi].0;
                for i in 0..p - 1 {
                    let (a, b) = (seq.at(i), seq.at(i + 1));
                    let key = if symmetric { (a.min(b), a.max(b)) } else { (a, b) };
                    let e = sums.entry(key).or_insert((0.0, 0));
                    e.0 += r[i] * r[i + 1];
                    e.1 += 1;
                }
            }
            // pairs seen only at longer lags still need a value
            for (gi, _) in &resid {
                let seq = &groups[*gi].0;
                for i in 0..p {
                    for j in (i + 1)..p {
                        let (a, b) = (seq.at(i), seq.at(j));
                        let key = if symmetric { (a.min(b), a.max(b)) } else { (a, b) };
                        sums.entry(key).or_insert((0.0, 0));
                    }
                }
            }
            let mut table = RhoTable::new();
            for (&(a, b), &(s, n)) in &sums {
                let r = if n == 0 { 0.0 } else { clamp(s / n as f64 / phi) };
                table.insert(a, b, r)?;
                if symmetric && a != b {
                    table.insert(b, a, r)?;
                }
            }
            match kind {
                CorrelationKind::SeqBanded => CorrelationSpec::SeqBanded(table),
                CorrelationKind::SeqAr1 => CorrelationSpec::SeqAr1(table),
                _ => CorrelationSpec::SeqAr1Symmetric(table),
            }
        }
        CorrelationKind::Custom => {
            return Err(Error::InvalidArgument("custom correlations cannot be estimated".into()))
        }
    };
    Ok((make_pd(spec, groups, p)?, phi))
}

/// Shrinks an estimated correlation toward zero until every sequence's
/// matrix is positive definite.
fn make_pd(spec: CorrelationSpec<f64>, groups: &[(Sequence, Vec<&[f64]>)], p: usize) -> Result<CorrelationSpec<f64>> {
    let mut spec = spec;
    for _ in 0..200 {
        let ok = groups.iter().all(|(s, _)| build_correlation(&spec, s, p).is_ok());
        if ok {
            return Ok(spec);
        }
        spec = shrink(&spec, 0.95)?;
    }
    Ok(CorrelationSpec::Independence)
}

fn shrink(spec: &CorrelationSpec<f64>, f: f64) -> Result<CorrelationSpec<f64>> {
    let scale = |t: &RhoTable<f64>| -> Result<RhoTable<f64>> {
        let mut out = RhoTable::new();
        for ((a, b), r) in t.iter() {
            out.insert(a, b, r * f)?;
        }
        Ok(out)
    };
    Ok(match spec {
        CorrelationSpec::CompoundSymmetric(r) => CorrelationSpec::CompoundSymmetric(r * f),
        CorrelationSpec::Ar1(r) => CorrelationSpec::Ar1(r * f),
        CorrelationSpec::Banded1(r) => CorrelationSpec::Banded1(r * f),
        CorrelationSpec::SeqBanded(t) => CorrelationSpec::SeqBanded(scale(t)?),
        CorrelationSpec::SeqAr1(t) => CorrelationSpec::SeqAr1(scale(t)?),
        CorrelationSpec::SeqAr1Symmetric(t) => CorrelationSpec::SeqAr1Symmetric(scale(t)?),
        other => other.clone(),
    })
}

/// One Fisher-scoring step under a fixed working correlation. Returns the
/// update `Δθ`.
fn scoring_step(
    groups: &[(Sequence, Vec<&[f64]>)],
    states: &[GroupState],
    corr: &CorrelationSpec<f64>,
    p: usize,
    m: usize,
) -> Result<Vec<f64>> {
    let mut info = Matrix::zeros(m, m);
    let mut score = vec![0.0; m];
    for ((seq, ys), st) in groups.iter().zip(states) {
        let c = build_correlation(corr, seq, p)?.into_matrix();
        let sd: Vec<f64> = st.var.iter().map(|v| v.sqrt()).collect();
        let w = Matrix::from_fn(p, p, |i, j| sd[i] * c[(i, j)] * sd[j]);
        let w_inv = w
            .inverse()
            .map_err(|_| Error::SingularWorkingCovariance { sequence: seq.label() })?;
        let dmu = Matrix::from_fn(p, m, |i, j| st.var[i] * st.x[(i, j)]);
        let wd = w_inv.matmul(&dmu);
        info.add_scaled(ys.len() as f64, &dmu.tr_matmul(&wd));
        let mut rsum = vec![0.0; p];
        for y in ys {
            for i in 0..p {
                rsum[i] += y[i] - st.mu[i];
            }
        }
        for (s, v) in score.iter_mut().zip(wd.tr_mat_vec(&rsum)) {
            *s += v;
        }
    }
    let lu = info.lu().map_err(|_| Error::RankDeficientDesign {
        rank: info.rank(),
        columns: m,
    })?;
    Ok(lu.solve(&score))
}

/// Fits the marginal model by GEE with the given working structure, and
/// re-estimates the correlation at every iteration.
pub fn fit_gee(data: &TrialDataset, family: Family, kind: CorrelationKind, p: usize, t: usize) -> Result<GeeFit> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if data.periods != p {
        return Err(Error::DimensionMismatch {
            what: "periods".into(),
            expected: p,
            found: data.periods,
        });
    }
    let m = parameter_count(p, t);
    let groups = data.grouped();
    let mut gram = Matrix::zeros(m, m);
    for (seq, ys) in &groups {
        let x = build_design_matrix::<f64>(seq, p, t)?;
        gram.add_scaled(ys.len() as f64, &x.tr_matmul(&x));
    }
    let rank = gram.rank();
    if rank < m || data.len() * p < m {
        return Err(Error::RankDeficientDesign { rank, columns: m });
    }

    let mut theta = vec![0.0; m];
    let mut corr = CorrelationSpec::Independence;
    let mut phi = 1.0;
    for it in 1..=FIT_MAX_ITERS {
        let states = group_states(&groups, family, p, t, &theta)?;
        if it > 1 && kind != CorrelationKind::Independence {
            let (c, ph) = estimate_correlation(kind, &groups, &states, p, m)?;
            corr = c;
            phi = ph;
        }
        let delta = scoring_step(&groups, &states, &corr, p, m)?;
        let step = delta.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if !step.is_finite() {
            return Err(Error::FitDidNotConverge { iterations: it });
        }
        for (th, d) in theta.iter_mut().zip(&delta) {
            *th += d;
        }
        if step < FIT_TOL && it > 1 {
            if kind == CorrelationKind::Independence {
                let states = group_states(&groups, family, p, t, &theta)?;
                phi = estimate_correlation(CorrelationKind::Independence, &groups, &states, p, m)?.1;
            }
            return Ok(GeeFit {
                theta_hat: ParamVector::from_slice(&theta, p, t)?,
                correlation: corr,
                phi_hat: phi,
                converged: true,
                iterations: it,
            });
        }
    }
    Err(Error::FitDidNotConverge {
        iterations: FIT_MAX_ITERS,
    })
}

/// Rounds `n · w` to integers summing to `n`, giving leftover units to the
/// largest fractional parts (earlier sequences first on ties).
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Clone, Debug)]
pub struct TwoStageConfig {
    pub sequences: Vec<Sequence>,
    pub periods: usize,
    pub treatments: usize,
    pub family: Family,
    pub theta_true: Vec<f64>,
    /// Generating correlation; its kind is also the working structure.
    pub correlation: CorrelationSpec<f64>,
    pub n_total: usize,
    pub pilot_fraction: f64,
    pub replications: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub mse_uniform: Option<f64>,
    pub mse_optimal: Option<f64>,
    pub pilot_converged: bool,
    /// Stage-two optimization failed and uniform allocation was used.
    pub stage2_fallback: bool,
    pub stage2_weights: Vec<f64>,
    pub stage2_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub sequences: Vec<Sequence>,
    pub family: Family,
    pub theta_true: Vec<f64>,
    pub correlation: String,
    pub n_total: usize,
    pub pilot_fraction: f64,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoStageReport {
    pub mse_uniform: f64,
    pub mse_optimal: f64,
    pub excluded_uniform: usize,
    pub excluded_optimal: usize,
    pub stage2_fallbacks: usize,
    pub seed: u64,
    pub config: ConfigEcho,
    pub records: Vec<ReplicationRecord>,
}

impl TwoStageReport {
    pub fn ratio(&self) -> f64 {
        self.mse_uniform / self.mse_optimal
    }

    pub fn records_csv(&self) -> String {
        let mut out =
            String::from("replication,mse_uniform,mse_optimal,pilot_converged,stage2_fallback,stage2_counts\n");
        let fmt = |v: Option<f64>| v.map_or(String::from("NA"), |x| format!("{x:.6}"));
        for r in &self.records {
            let counts: Vec<String> = r.stage2_counts.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.replication,
                fmt(r.mse_uniform),
                fmt(r.mse_optimal),
                r.pilot_converged,
                r.stage2_fallback,
                counts.join(";")
            ));
        }
        out
    }
}

fn mse(theta_hat: &[f64], theta: &[f64]) -> f64 {
    theta_hat.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / theta.len() as f64
}

fn counts_for(seqs: &[Sequence], counts: &[usize]) -> Vec<(Sequence, usize)> {
    seqs.iter().cloned().zip(counts.iter().copied()).collect()
}

fn run_replication(cfg: &TwoStageConfig, rep: usize) -> Result<ReplicationRecord> {
    let (p, t) = (cfg.periods, cfg.treatments);
    let k = cfg.sequences.len();
    let kind = cfg.correlation.kind();
    let truth = ParamVector::from_slice(&cfg.theta_true, p, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let uniform = vec![1.0 / k as f64; k];

    // comparator: everything uniform
    let all_counts = largest_remainder(&uniform, cfg.n_total);
    let data_u = simulate_responses(
        &counts_for(&cfg.sequences, &all_counts),
        &truth,
        &cfg.correlation,
        cfg.family,
        rng.next_u64(),
    )?;
    let mse_uniform = fit_gee(&data_u, cfg.family, kind, p, t)
        .ok()
        .map(|f| mse(&f.theta_hat.to_vec(), &cfg.theta_true));

    let n_pilot = ((cfg.pilot_fraction * cfg.n_total as f64).round() as usize).min(cfg.n_total);
    let pilot_counts = largest_remainder(&uniform, n_pilot);
    let mut pooled = simulate_responses(
        &counts_for(&cfg.sequences, &pilot_counts),
        &truth,
        &cfg.correlation,
        cfg.family,
        rng.next_u64(),
    )?;
    let stage2_seed = rng.next_u64();
    let pilot_fit = fit_gee(&pooled, cfg.family, kind, p, t);
    let pilot_converged = pilot_fit.is_ok();
    let n_stage2 = cfg.n_total - n_pilot;

    let mut stage2_fallback = false;
    let mut stage2_weights = uniform.clone();
    if n_stage2 > 0 {
        let optimized = pilot_fit.ok().and_then(|fit| {
            let problem = DesignProblem::new(
                t,
                p,
                cfg.sequences.clone(),
                cfg.family,
                fit.correlation,
                fit.theta_hat.to_vec(),
            )
            .ok()?;
            optimize(&problem, &cfg.optimizer).ok()
        });
        match optimized {
            Some(r) => stage2_weights = r.design.weights().to_vec(),
            None => stage2_fallback = true,
        }
    }
    let stage2_counts = largest_remainder(&stage2_weights, n_stage2);
    if n_stage2 > 0 {
        let data2 = simulate_responses(
            &counts_for(&cfg.sequences, &stage2_counts),
            &truth,
            &cfg.correlation,
            cfg.family,
            stage2_seed,
        )?;
        pooled.extend(data2);
    }
    let mse_optimal = fit_gee(&pooled, cfg.family, kind, p, t)
        .ok()
        .map(|f| mse(&f.theta_hat.to_vec(), &cfg.theta_true));

    Ok(ReplicationRecord {
        replication: rep,
        mse_uniform,
        mse_optimal,
        pilot_converged,
        stage2_fallback,
        stage2_weights,
        stage2_counts,
    })
}

/// Uniform allocation against pilot-then-optimized allocation, averaged
/// over replications. Replications whose final fit fails are left out of
/// the corresponding average and counted.
pub fn two_stage_run(cfg: &TwoStageConfig) -> Result<TwoStageReport> {
    if !(cfg.pilot_fraction > 0.0 && cfg.pilot_fraction <= 1.0) {
        return Err(Error::InvalidArgument("pilot_fraction must be in (0, 1]".into()));
    }
    if cfg.n_total < 4 * cfg.sequences.len() {
        return Err(Error::InvalidArgument(
            "n_total must be at least four subjects per sequence".into(),
        ));
    }
    if cfg.replications == 0 {
        return Err(Error::InvalidArgument("replications must be at least 1".into()));
    }
    cfg.optimizer.validate()?;
    // validates the layout before spending time on replications
    DesignProblem::new(
        cfg.treatments,
        cfg.periods,
        cfg.sequences.clone(),
        cfg.family,
        cfg.correlation.clone(),
        cfg.theta_true.clone(),
    )?;
    let records = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep))
        .collect::<Result<Vec<_>>>()?;
    let average = |pick: fn(&ReplicationRecord) -> Option<f64>| {
        let vals: Vec<f64> = records.iter().filter_map(pick).collect();
        let mean = if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        (mean, records.len() - vals.len())
    };
    let (mse_uniform, excluded_uniform) = average(|r| r.mse_uniform);
    let (mse_optimal, excluded_optimal) = average(|r| r.mse_optimal);
    Ok(TwoStageReport {
        mse_uniform,
        mse_optimal,
        excluded_uniform,
        excluded_optimal,
        stage2_fallbacks: records.iter().filter(|r| r.stage2_fallback).count(),
        seed: cfg.seed,
        config: ConfigEcho {
            sequences: cfg.sequences.clone(),
            family: cfg.family,
            theta_true: cfg.theta_true.clone(),
            correlation: format!("{:?}", cfg.correlation),
            n_total: cfg.n_total,
            pilot_fraction: cfg.pilot_fraction,
            replications: cfg.replications,
        },
        records,
    })
}

/// Convenience wrapper for a fixed design rather than raw counts.
pub fn simulate_design(
    design: &Design<f64>,
    n: usize,
    theta: &ParamVector<f64>,
    corr: &CorrelationSpec<f64>,
    family: Family,
    seed: u64,
) -> Result<TrialDataset> {
    let counts = largest_remainder(design.weights(), n);
    simulate_responses(&counts_for(design.sequences(), &counts), theta, corr, family, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn poisson_quantiles() {
        // P(X = 0) = e^{-1} ≈ 0.3679 for mean 1
        assert_eq!(poisson_quantile(1.0, 0.3), 0.0);
        assert_eq!(poisson_quantile(1.0, 0.5), 1.0);
        assert_eq!(poisson_quantile(1.0, 0.95), 3.0);
    }

    #[test]
    fn remainder_examples() {
        assert_eq!(largest_remainder(&[0.25; 4], 30), vec![8, 8, 7, 7]);
        assert_eq!(
            largest_remainder(&[0.172, 0.248, 0.222, 0.358], 70),
            vec![12, 17, 16, 25]
        );
        assert_eq!(largest_remainder(&[1.0, 0.0], 5), vec![5, 0]);
    }

    proptest! {
        #[test]
        fn remainder_conserves_total(raw in proptest::collection::vec(0.0f64..1.0, 1..10), n in 0usize..500) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let c = largest_remainder(&w, n);
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            for (ci, wi) in c.iter().zip(&w) {
                prop_assert!((*ci as f64 - wi * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
