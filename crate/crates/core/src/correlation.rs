//! Working correlation structures, fixed and sequence dependent.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::design::{Sequence, MAX_TREATMENTS};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::scalar::Real;

/// Smallest eigenvalue accepted for a correlation matrix.
pub const PD_THRESHOLD: f64 = 1e-10;

/// Correlations indexed by an ordered treatment pair (1-based).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RhoTable<T> {
    entries: BTreeMap<(usize, usize), T>,
}

impl<T: Real> RhoTable<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, a: usize, b: usize, rho: T) -> Result<()> {
        check_rho(rho, &pair_label(a, b))?;
        self.entries.insert((a, b), rho);
        Ok(())
    }

    pub fn with(mut self, pair: &str, rho: T) -> Result<Self> {
        let (a, b) = parse_pair(pair)?;
        self.insert(a, b, rho)?;
        Ok(self)
    }

    /// Builds a table from `("AB", 0.2)`-style entries.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, T)]) -> Result<Self> {
        let mut table = Self::new();
        for (label, rho) in pairs {
            let (a, b) = parse_pair(label.as_ref())?;
            table.insert(a, b, *rho)?;
        }
        Ok(table)
    }

    pub fn get(&self, a: usize, b: usize) -> Option<T> {
        self.entries.get(&(a, b)).copied()
    }

    fn lookup_ordered(&self, a: usize, b: usize) -> Result<T> {
        self.get(a, b)
            .ok_or_else(|| Error::MissingPairCorrelation { pair: pair_label(a, b) })
    }

    fn lookup_unordered(&self, a: usize, b: usize) -> Result<T> {
        self.get(a, b)
            .or_else(|| self.get(b, a))
            .ok_or_else(|| Error::MissingPairCorrelation { pair: pair_label(a, b) })
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every pair stored in both orders agrees.
    pub fn is_symmetric(&self) -> bool {
        self.entries
            .iter()
            .all(|(&(a, b), &v)| self.get(b, a).is_none_or(|w| w == v))
    }

    /// Copy with every missing reverse pair filled in.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for (&(a, b), &v) in &self.entries {
            out.entries.entry((b, a)).or_insert(v);
        }
        out
    }
}

fn check_rho<T: Real>(rho: T, what: &str) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::NonFiniteInput(format!("correlation {what}")));
    }
    if rho <= -T::one() || rho >= T::one() {
        return Err(Error::InvalidCorrelation(format!("{what} = {rho} is outside (-1, 1)")));
    }
    Ok(())
}

fn parse_pair(label: &str) -> Result<(usize, usize)> {
    let seq = Sequence::parse(label, MAX_TREATMENTS)?;
    if seq.len() != 2 {
        return Err(Error::InvalidCorrelation(format!(
            "pair key '{label}' must have exactly two letters"
        )));
    }
    Ok((seq.at(0), seq.at(1)))
}

fn pair_label(a: usize, b: usize) -> String {
    Sequence::new(vec![a, b], MAX_TREATMENTS)
        .map(|s| s.label())
        .unwrap_or_else(|_| format!("({a},{b})"))
}

/// Structure family, without parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CorrelationKind {
    Independence,
    CompoundSymmetric,
    Ar1,
    Banded1,
    SeqBanded,
    SeqAr1Symmetric,
    SeqAr1,
    Custom,
}

impl CorrelationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Independence => "independence",
            Self::CompoundSymmetric => "compound_symmetric",
            Self::Ar1 => "ar1",
            Self::Banded1 => "banded1",
            Self::SeqBanded => "seq_banded",
            Self::SeqAr1Symmetric => "seq_ar1_symmetric",
            Self::SeqAr1 => "seq_ar1",
            Self::Custom => "custom",
        }
    }

    pub fn is_sequence_dependent(self) -> bool {
        matches!(self, Self::SeqBanded | Self::SeqAr1Symmetric | Self::SeqAr1)
    }
}

impl FromStr for CorrelationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "independence" | "identity" => Self::Independence,
            "compound_symmetric" | "cs" | "exchangeable" => Self::CompoundSymmetric,
            "ar1" => Self::Ar1,
            "banded1" | "banded" => Self::Banded1,
            "seq_banded" => Self::SeqBanded,
            "seq_ar1_symmetric" => Self::SeqAr1Symmetric,
            "seq_ar1" => Self::SeqAr1,
            "custom" => Self::Custom,
            _ => return Err(Error::InvalidArgument(format!("unknown correlation kind '{s}'"))),
        })
    }
}

/// A working correlation specification.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrelationSpec<T> {
    Independence,
    CompoundSymmetric(T),
    Ar1(T),
    Banded1(T),
    SeqBanded(RhoTable<T>),
    SeqAr1Symmetric(RhoTable<T>),
    SeqAr1(RhoTable<T>),
    Custom(BTreeMap<Sequence, Matrix<T>>),
}

impl<T: Real> CorrelationSpec<T> {
    pub fn kind(&self) -> CorrelationKind {
        match self {
            Self::Independence => CorrelationKind::Independence,
            Self::CompoundSymmetric(_) => CorrelationKind::CompoundSymmetric,
            Self::Ar1(_) => CorrelationKind::Ar1,
            Self::Banded1(_) => CorrelationKind::Banded1,
            Self::SeqBanded(_) => CorrelationKind::SeqBanded,
            Self::SeqAr1Symmetric(_) => CorrelationKind::SeqAr1Symmetric,
            Self::SeqAr1(_) => CorrelationKind::SeqAr1,
            Self::Custom(_) => CorrelationKind::Custom,
        }
    }

    /// Checks parameter ranges and the symmetry and unit-diagonal
    /// requirements on tables and custom matrices.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Independence => Ok(()),
            Self::CompoundSymmetric(r) | Self::Ar1(r) | Self::Banded1(r) => check_rho(*r, "rho"),
            Self::SeqBanded(tab) | Self::SeqAr1(tab) => {
                tab.iter().try_for_each(|((a, b), r)| check_rho(r, &pair_label(a, b)))
            }
            Self::SeqAr1Symmetric(tab) => {
                tab.iter().try_for_each(|((a, b), r)| check_rho(r, &pair_label(a, b)))?;
                if !tab.is_symmetric() {
                    return Err(Error::InvalidCorrelation(
                        "symmetric sequence AR(1) table has unequal reversed pairs".into(),
                    ));
                }
                Ok(())
            }
            Self::Custom(map) => {
                for (seq, c) in map {
                    if !c.is_square() || c.rows() != seq.len() {
                        return Err(Error::DimensionMismatch {
                            what: format!("custom correlation for {seq}"),
                            expected: seq.len(),
                            found: c.rows(),
                        });
                    }
                    if c.max_abs_diff(&c.transpose()) > T::lit(1e-12) {
                        return Err(Error::InvalidCorrelation(format!(
                            "custom matrix for {seq} is not symmetric"
                        )));
                    }
                    if c.diag().iter().any(|&d| (d - T::one()).abs() > T::lit(1e-12)) {
                        return Err(Error::InvalidCorrelation(format!(
                            "custom matrix for {seq} does not have a unit diagonal"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Validated correlation matrix: symmetric, unit diagonal, positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix<T>(Matrix<T>);

impl<T: Real> CorrelationMatrix<T> {
    pub fn new(m: Matrix<T>, label: &str) -> Result<Self> {
        let m = m.symmetrize();
        let eig = symmetric_eigenvalues(&m);
        let min = eig.first().copied().unwrap_or(T::zero());
        if !(min > T::lit(PD_THRESHOLD)) {
            return Err(Error::NotPositiveDefinite {
                sequence: label.to_string(),
                min_eigenvalue: min.to_f64_lossy(),
            });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }
}

pub fn build_correlation<T: Real>(spec: &CorrelationSpec<T>, seq: &Sequence, p: usize) -> Result<CorrelationMatrix<T>> {
    if seq.len() != p {
        return Err(Error::DimensionMismatch {
            what: format!("sequence {seq}"),
            expected: p,
            found: seq.len(),
        });
    }
    let lag = |i: usize, j: usize| i.abs_diff(j);
    let m = match spec {
        CorrelationSpec::Independence => Matrix::identity(p),
        CorrelationSpec::CompoundSymmetric(r) => {
            check_rho(*r, "rho")?;
            Matrix::from_fn(p, p, |i, j| if i == j { T::one() } else { *r })
        }
        CorrelationSpec::Ar1(r) => {
            check_rho(*r, "rho")?;
            Matrix::from_fn(p, p, |i, j| r.powi(lag(i, j) as i32))
        }
        CorrelationSpec::Banded1(r) => {
            check_rho(*r, "rho")?;
            Matrix::from_fn(p, p, |i, j| match lag(i, j) {
                0 => T::one(),
                1 => *r,
                _ => T::zero(),
            })
        }
        CorrelationSpec::SeqBanded(tab) => {
            let mut m = Matrix::identity(p);
            for i in 0..p.saturating_sub(1) {
                let r = tab.lookup_ordered(seq.at(i), seq.at(i + 1))?;
                m[(i, i + 1)] = r;
                m[(i + 1, i)] = r;
            }
            m
        }
        CorrelationSpec::SeqAr1Symmetric(tab) | CorrelationSpec::SeqAr1(tab) => {
            let symmetric = matches!(spec, CorrelationSpec::SeqAr1Symmetric(_));
            let mut m = Matrix::identity(p);
            for i in 0..p {
                for j in (i + 1)..p {
                    let (a, b) = (seq.at(i), seq.at(j));
                    let r = if symmetric {
                        tab.lookup_unordered(a, b)?
                    } else {
                        tab.lookup_ordered(a, b)?
                    };
                    let v = r.powi((j - i) as i32);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        }
        CorrelationSpec::Custom(map) => {
            let c = map
                .get(seq)
                .ok_or_else(|| Error::InvalidCorrelation(format!("no custom matrix for sequence {seq}")))?;
            if c.rows() != p || c.cols() != p {
                return Err(Error::DimensionMismatch {
                    what: format!("custom correlation for {seq}"),
                    expected: p,
                    found: c.rows(),
                });
            }
            c.clone()
        }
    };
    if let CorrelationSpec::SeqAr1Symmetric(_) | CorrelationSpec::Custom(_) = spec {
        spec.validate()?;
    }
    CorrelationMatrix::new(m, &seq.label())
}

/// The six named structures used throughout the examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StructureId {
    Corr1,
    Corr2,
    Corr3,
    Corr4,
    Corr5,
    Corr6,
}

impl StructureId {
    pub const ALL: [StructureId; 6] = [
        Self::Corr1,
        Self::Corr2,
        Self::Corr3,
        Self::Corr4,
        Self::Corr5,
        Self::Corr6,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(k: usize) -> Option<Self> {
        Self::ALL.get(k.checked_sub(1)?).copied()
    }
}

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Corr({})", self.number())
    }
}

impl FromStr for StructureId {
    type Err = Error;
    /// Accepts `Corr(3)`, `corr3` or `3`.
    fn from_str(s: &str) -> Result<Self> {
        let digits: String = s
            .to_ascii_lowercase()
            .trim()
            .trim_start_matches("corr")
            .trim_matches(|c| c == '(' || c == ')')
            .to_string();
        digits
            .parse::<usize>()
            .ok()
            .and_then(Self::from_number)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown structure '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    TwoTreatment,
    LatinSquare4,
}

/// Parameter values for the six named structures.
#[derive(Clone, Debug, PartialEq)]
pub struct DefaultRhos<T> {
    pub compound_symmetric: T,
    pub ar1: T,
    pub banded1: T,
    pub seq_banded: RhoTable<T>,
    pub seq_ar1_symmetric: RhoTable<T>,
    pub seq_ar1: RhoTable<T>,
}

impl<T: Real> DefaultRhos<T> {
    pub fn structure(&self, id: StructureId) -> CorrelationSpec<T> {
        match id {
            StructureId::Corr1 => CorrelationSpec::CompoundSymmetric(self.compound_symmetric),
            StructureId::Corr2 => CorrelationSpec::Ar1(self.ar1),
            StructureId::Corr3 => CorrelationSpec::Banded1(self.banded1),
            StructureId::Corr4 => CorrelationSpec::SeqBanded(self.seq_banded.clone()),
            StructureId::Corr5 => CorrelationSpec::SeqAr1Symmetric(self.seq_ar1_symmetric.clone()),
            StructureId::Corr6 => CorrelationSpec::SeqAr1(self.seq_ar1.clone()),
        }
    }

    pub fn all(&self) -> Vec<(StructureId, CorrelationSpec<T>)> {
        StructureId::ALL.iter().map(|&id| (id, self.structure(id))).collect()
    }
}

pub fn default_rho_tables<T: Real>(scenario: Scenario) -> DefaultRhos<T> {
    let r = T::lit;
    let table = |pairs: &[(&str, f64)]| {
        let pairs: Vec<(&str, T)> = pairs.iter().map(|&(k, v)| (k, r(v))).collect();
        RhoTable::from_pairs(&pairs).expect("built-in table is valid")
    };
    match scenario {
        Scenario::TwoTreatment => DefaultRhos {
            compound_symmetric: r(0.1),
            ar1: r(0.1),
            banded1: r(0.1),
            seq_banded: table(&[("AB", 0.2), ("BA", 0.5), ("AA", 0.1), ("BB", 0.3)]),
            seq_ar1_symmetric: table(&[("AB", 0.4), ("BA", 0.4), ("AA", 0.1), ("BB", 0.1)]),
            seq_ar1: table(&[("AB", 0.4), ("BA", 0.3), ("AA", 0.1), ("BB", 0.1)]),
        },
        Scenario::LatinSquare4 => {
            let letters = ['A', 'B', 'C', 'D'];
            let by_first = [0.4, 0.3, 0.2, 0.1];
            let mut first = Vec::new();
            let mut sym = Vec::new();
            for (i, &a) in letters.iter().enumerate() {
                for (j, &b) in letters.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let key = format!("{a}{b}");
                    first.push((key.clone(), by_first[i]));
                    // pair value is set by its earlier letter in A, B, C, D order
                    sym.push((key, by_first[i.min(j)]));
                }
            }
            let to_table = |v: &[(String, f64)]| {
                let pairs: Vec<(&str, T)> = v.iter().map(|(k, x)| (k.as_str(), r(*x))).collect();
                RhoTable::from_pairs(&pairs).expect("built-in table is valid")
            };
            DefaultRhos {
                compound_symmetric: r(0.3),
                ar1: r(0.2),
                banded1: r(0.1),
                seq_banded: to_table(&first),
                seq_ar1_symmetric: to_table(&sym),
                seq_ar1: to_table(&first),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> Sequence {
        Sequence::parse(s, 4).unwrap()
    }

    fn built(spec: &CorrelationSpec<f64>, s: &str) -> Matrix<f64> {
        build_correlation(spec, &seq(s), s.len()).unwrap().into_matrix()
    }

    #[test]
    fn fixed_structures() {
        assert_eq!(
            built(&CorrelationSpec::CompoundSymmetric(0.0), "ABCD"),
            Matrix::identity(4)
        );
        let cs = built(&CorrelationSpec::CompoundSymmetric(0.2), "ABCD");
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(cs[(i, j)], if i == j { 1.0 } else { 0.2 });
            }
        }
        let ar = built(&CorrelationSpec::Ar1(0.5), "ABCD");
        assert_eq!(ar[(0, 3)], 0.125);
        let band = built(&CorrelationSpec::Banded1(0.3), "ABCD");
        assert_eq!(band[(1, 2)], 0.3);
        assert_eq!(band[(0, 2)], 0.0);
    }

    #[test]
    fn sequence_dependent_cells() {
        let tab = RhoTable::from_pairs(&[("AB", 0.4), ("BB", 0.15), ("BA", 0.3), ("AA", 0.1)]).unwrap();
        let c = built(&CorrelationSpec::SeqAr1(tab.clone()), "ABB");
        assert_eq!(c[(0, 1)], 0.4);
        assert!((c[(0, 2)] - 0.16).abs() < 1e-15);
        assert_eq!(c[(1, 2)], 0.15);

        let c = built(&CorrelationSpec::SeqBanded(tab), "AABB");
        assert_eq!((c[(0, 1)], c[(1, 2)], c[(2, 3)]), (0.1, 0.4, 0.15));
        assert_eq!(c[(0, 2)], 0.0);
    }

    #[test]
    fn missing_pair_is_reported() {
        let tab = RhoTable::from_pairs(&[("AB", 0.4)]).unwrap();
        let err = build_correlation(&CorrelationSpec::SeqAr1(tab), &seq("BA"), 2).unwrap_err();
        assert_eq!(err, Error::MissingPairCorrelation { pair: "BA".into() });
    }

    #[test]
    fn symmetric_lookup_canonicalizes() {
        let tab = RhoTable::from_pairs(&[("AB", 0.4)]).unwrap();
        let c = built(&CorrelationSpec::SeqAr1Symmetric(tab), "BA");
        assert_eq!(c[(0, 1)], 0.4);
        let bad = RhoTable::from_pairs(&[("AB", 0.4), ("BA", 0.3)]).unwrap();
        assert!(build_correlation(&CorrelationSpec::SeqAr1Symmetric(bad), &seq("AB"), 2).is_err());
    }

    #[test]
    fn non_pd_is_rejected() {
        // banded with rho near 0.7 on four periods has a negative eigenvalue
        let err = build_correlation(&CorrelationSpec::Banded1(0.7), &seq("ABCD"), 4).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        let cs = build_correlation(&CorrelationSpec::CompoundSymmetric(-0.5), &seq("ABCD"), 4);
        assert!(matches!(cs, Err(Error::NotPositiveDefinite { .. })));
        assert!(RhoTable::<f64>::new().with("AB", 1.0).is_err());
    }

    #[test]
    fn custom_matrices() {
        let m = Matrix::from_rows(&[vec![1.0, 0.25], vec![0.25, 1.0]]).unwrap();
        let mut map = BTreeMap::new();
        map.insert(seq("AB"), m.clone());
        let spec = CorrelationSpec::Custom(map);
        assert_eq!(built(&spec, "AB"), m);
        assert!(build_correlation(&spec, &seq("BA"), 2).is_err());
        let mut bad = BTreeMap::new();
        bad.insert(seq("AB"), Matrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap());
        assert!(build_correlation(&CorrelationSpec::Custom(bad), &seq("AB"), 2).is_err());
    }

    #[test]
    fn default_tables() {
        let two = default_rho_tables::<f64>(Scenario::TwoTreatment);
        assert_eq!(two.compound_symmetric, 0.1);
        let t4 = &two.seq_banded;
        assert_eq!(
            (t4.get(1, 2), t4.get(2, 1), t4.get(1, 1), t4.get(2, 2)),
            (Some(0.2), Some(0.5), Some(0.1), Some(0.3))
        );
        assert_eq!(two.seq_ar1_symmetric.get(1, 2), Some(0.4));
        assert_eq!(two.seq_ar1_symmetric.get(2, 1), Some(0.4));
        assert_eq!(two.seq_ar1.get(2, 1), Some(0.3));

        let ls = default_rho_tables::<f64>(Scenario::LatinSquare4);
        assert_eq!((ls.compound_symmetric, ls.ar1, ls.banded1), (0.3, 0.2, 0.1));
        let s5 = &ls.seq_ar1_symmetric;
        assert_eq!(
            (s5.get(1, 2), s5.get(2, 1), s5.get(2, 3), s5.get(4, 2), s5.get(3, 4)),
            (Some(0.4), Some(0.4), Some(0.3), Some(0.3), Some(0.2))
        );
        assert!(s5.is_symmetric());
        assert_eq!(ls.seq_ar1.get(4, 1), Some(0.1));
        assert_eq!(ls.seq_banded.get(3, 1), Some(0.2));
    }

    #[test]
    fn structure_names() {
        assert_eq!("Corr(5)".parse::<StructureId>().unwrap(), StructureId::Corr5);
        assert_eq!("corr2".parse::<StructureId>().unwrap(), StructureId::Corr2);
        assert_eq!(StructureId::Corr3.to_string(), "Corr(3)");
        assert!("corr7".parse::<StructureId>().is_err());
    }

    #[test]
    fn every_default_matrix_is_valid() {
        for (scenario, t) in [(Scenario::TwoTreatment, 2), (Scenario::LatinSquare4, 4)] {
            let rhos = default_rho_tables::<f64>(scenario);
            let seqs: Vec<Sequence> = if t == 2 {
                ["AB", "BA", "AA", "BB", "ABB", "BAA", "AABB", "ABBA", "BAAB", "ABAB"]
                    .iter()
                    .map(|s| seq(s))
                    .collect()
            } else {
                crate::design::enumerate_permutation_sequences(4)
            };
            for (_, spec) in rhos.all() {
                for s in &seqs {
                    let c = build_correlation(&spec, s, s.len()).unwrap().into_matrix();
                    assert_eq!(c.max_abs_diff(&c.transpose()), 0.0);
                    assert!(c.diag().iter().all(|&d| d == 1.0));
                }
            }
        }
    }

    fn arb_two_treatment_seq() -> impl Strategy<Value = Sequence> {
        proptest::collection::vec(1usize..=2, 2..6).prop_map(|v| Sequence::new(v, 2).unwrap())
    }

    proptest! {
        #[test]
        fn single_treatment_seq_ar1_equals_ar1(r in -0.9f64..0.9, p in 2usize..6) {
            let s = Sequence::new(vec![1; p], 2).unwrap();
            let tab = RhoTable::new().with("AA", r).unwrap();
            let a = build_correlation(&CorrelationSpec::SeqAr1(tab), &s, p).unwrap();
            let b = build_correlation(&CorrelationSpec::Ar1(r), &s, p).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn symmetric_table_variants_agree(
            s in arb_two_treatment_seq(),
            ab in -0.3f64..0.6, aa in -0.3f64..0.6, bb in -0.3f64..0.6,
        ) {
            let tab = RhoTable::from_pairs(&[("AB", ab), ("BA", ab), ("AA", aa), ("BB", bb)]).unwrap();
            let p = s.len();
            let a = build_correlation(&CorrelationSpec::SeqAr1Symmetric(tab.clone()), &s, p);
            let b = build_correlation(&CorrelationSpec::SeqAr1(tab), &s, p);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one variant failed"),
            }
        }

        #[test]
        fn ar1_band_equals_banded(r in -0.5f64..0.5, p in 2usize..6) {
            let s = Sequence::new(vec![1; p], 2).unwrap();
            let ar = build_correlation(&CorrelationSpec::Ar1(r), &s, p).unwrap().into_matrix();
            let band = build_correlation(&CorrelationSpec::Banded1(r), &s, p).unwrap().into_matrix();
            for i in 0..p {
                for j in 0..p {
                    if i.abs_diff(j) <= 1 {
                        prop_assert_eq!(ar[(i, j)], band[(i, j)]);
                    }
                }
            }
        }

        #[test]
        fn built_matrices_are_valid(s in arb_two_treatment_seq(), r in -0.2f64..0.9) {
            let p = s.len();
            for spec in [CorrelationSpec::CompoundSymmetric(r), CorrelationSpec::Ar1(r)] {
                let c = build_correlation(&spec, &s, p).unwrap().into_matrix();
                prop_assert_eq!(c.max_abs_diff(&c.transpose()), 0.0);
                prop_assert!(c.diag().iter().all(|&d| d == 1.0));
                prop_assert!(symmetric_eigenvalues(&c)[0] > PD_THRESHOLD);
            }
        }
    }
}
