//! Treatment sequences, baseline-constrained design matrices and designs.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Largest supported treatment count (one uppercase letter per treatment).
pub const MAX_TREATMENTS: usize = 26;

/// A subject's treatment order. Treatments are stored 1-based, so `A = 1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<usize>);

impl Sequence {
    pub fn new(treatments: Vec<usize>, t: usize) -> Result<Self> {
        if treatments.is_empty() {
            return Err(Error::InvalidArgument("empty treatment sequence".into()));
        }
        if let Some(&bad) = treatments.iter().find(|&&s| s == 0 || s > t) {
            return Err(Error::UnknownTreatmentLabel {
                label: index_to_label(bad),
                t,
            });
        }
        Ok(Self(treatments))
    }

    pub fn parse(text: &str, t: usize) -> Result<Self> {
        let t = t.min(MAX_TREATMENTS);
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidArgument("empty treatment sequence".into()));
        }
        let mut out = Vec::with_capacity(trimmed.len());
        for c in trimmed.chars() {
            let idx = label_to_index(c).filter(|&i| i <= t);
            match idx {
                Some(i) => out.push(i),
                None => return Err(Error::UnknownTreatmentLabel { label: c, t }),
            }
        }
        Ok(Self(out))
    }

    pub fn treatments(&self) -> &[usize] {
        &self.0
    }

    /// Number of periods.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Treatment given in period `i` (0-based period index).
    pub fn at(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|&s| index_to_label(s)).collect()
    }

    /// Applies a treatment relabeling, where `map[s - 1]` is the new label of `s`.
    pub fn relabel(&self, map: &[usize]) -> Self {
        Self(self.0.iter().map(|&s| map[s - 1]).collect())
    }

    pub fn max_treatment(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

fn label_to_index(c: char) -> Option<usize> {
    c.is_ascii_uppercase().then(|| (c as u8 - b'A') as usize + 1)
}

fn index_to_label(s: usize) -> char {
    if (1..=MAX_TREATMENTS).contains(&s) {
        (b'A' + (s - 1) as u8) as char
    } else {
        '?'
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence({})", self.label())
    }
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Sequence::parse(&text, MAX_TREATMENTS).map_err(serde::de::Error::custom)
    }
}

pub fn parse_sequence(text: &str, t: usize) -> Result<Sequence> {
    Sequence::parse(text, t)
}

/// Parses a list of sequence labels, rejecting duplicates.
pub fn parse_sequences<S: AsRef<str>>(labels: &[S], t: usize) -> Result<Vec<Sequence>> {
    let seqs = labels
        .iter()
        .map(|l| Sequence::parse(l.as_ref(), t))
        .collect::<Result<Vec<_>>>()?;
    check_distinct(&seqs)?;
    Ok(seqs)
}

pub(crate) fn check_distinct(seqs: &[Sequence]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for s in seqs {
        if !seen.insert(s) {
            return Err(Error::DuplicateSequence(s.label()));
        }
    }
    Ok(())
}

/// All `t!` orderings of the treatments, in lexicographic label order.
pub fn enumerate_permutation_sequences(t: usize) -> Vec<Sequence> {
    let mut current: Vec<usize> = (1..=t).collect();
    let mut out = vec![Sequence(current.clone())];
    // next lexicographic permutation
    while let Some(i) = (1..current.len()).rev().find(|&i| current[i - 1] < current[i]) {
        let pivot = i - 1;
        let j = (0..current.len()).rev().find(|&j| current[j] > current[pivot]).unwrap();
        current.swap(pivot, j);
        current[i..].reverse();
        out.push(Sequence(current.clone()));
    }
    out
}

/// Number of model parameters, `p + 2t - 2`.
pub fn parameter_count(p: usize, t: usize) -> usize {
    p + 2 * t - 2
}

/// Column range of the direct treatment effects within θ.
pub fn tau_range(p: usize, t: usize) -> std::ops::Range<usize> {
    p..p + t - 1
}

/// Column range of the carryover effects within θ.
pub fn carryover_range(p: usize, t: usize) -> std::ops::Range<usize> {
    p + t - 1..p + 2 * t - 2
}

/// Constrained design matrix `[1, P, T, F]` for one sequence.
///
/// Treatment 1 and period 1 are baselines. Row 1 of the carryover block is
/// zero since nothing precedes the first period.
pub fn build_design_matrix<T: Real>(seq: &Sequence, p: usize, t: usize) -> Result<Matrix<T>> {
    check_sequence(seq, p, t)?;
    let m = parameter_count(p, t);
    let tau0 = p;
    let carry0 = p + t - 1;
    let mut x = Matrix::zeros(p, m);
    for i in 0..p {
        x[(i, 0)] = T::one();
        if i >= 1 {
            x[(i, i)] = T::one();
        }
        let s = seq.at(i);
        if s >= 2 {
            x[(i, tau0 + s - 2)] = T::one();
        }
        if i >= 1 {
            let prev = seq.at(i - 1);
            if prev >= 2 {
                x[(i, carry0 + prev - 2)] = T::one();
            }
        }
    }
    Ok(x)
}

/// Unconstrained indicator matrix with `1 + p + 2t` columns: intercept,
/// every period, every direct treatment, every carryover. Rank deficient;
/// only meant for inspection.
pub fn build_full_indicator_matrix<T: Real>(seq: &Sequence, p: usize, t: usize) -> Result<Matrix<T>> {
    check_sequence(seq, p, t)?;
    let mut x = Matrix::zeros(p, 1 + p + 2 * t);
    for i in 0..p {
        x[(i, 0)] = T::one();
        x[(i, 1 + i)] = T::one();
        x[(i, 1 + p + seq.at(i) - 1)] = T::one();
        if i >= 1 {
            x[(i, 1 + p + t + seq.at(i - 1) - 1)] = T::one();
        }
    }
    Ok(x)
}

fn check_sequence(seq: &Sequence, p: usize, t: usize) -> Result<()> {
    if seq.len() != p {
        return Err(Error::DimensionMismatch {
            what: format!("sequence {seq}"),
            expected: p,
            found: seq.len(),
        });
    }
    if seq.max_treatment() > t {
        return Err(Error::UnknownTreatmentLabel {
            label: index_to_label(seq.max_treatment()),
            t,
        });
    }
    Ok(())
}

/// `(t-1) x m` matrix extracting τ from θ.
pub fn tau_selector<T: Real>(p: usize, t: usize) -> Matrix<T> {
    let mut h = Matrix::zeros(t - 1, parameter_count(p, t));
    for (r, c) in tau_range(p, t).enumerate() {
        h[(r, c)] = T::one();
    }
    h
}

/// Structured view of θ = (λ, β₂..β_p, τ₂..τ_t, ρ₂..ρ_t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<T> {
    pub lambda: T,
    pub beta: Vec<T>,
    pub tau: Vec<T>,
    pub carryover: Vec<T>,
}

impl<T: Real> ParamVector<T> {
    pub fn from_slice(theta: &[T], p: usize, t: usize) -> Result<Self> {
        let m = parameter_count(p, t);
        if theta.len() != m {
            return Err(Error::DimensionMismatch {
                what: "theta".into(),
                expected: m,
                found: theta.len(),
            });
        }
        Ok(Self {
            lambda: theta[0],
            beta: theta[1..p].to_vec(),
            tau: theta[tau_range(p, t)].to_vec(),
            carryover: theta[carryover_range(p, t)].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(1 + self.beta.len() + self.tau.len() + self.carryover.len());
        v.push(self.lambda);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.tau);
        v.extend_from_slice(&self.carryover);
        v
    }

    pub fn periods(&self) -> usize {
        self.beta.len() + 1
    }

    pub fn treatments(&self) -> usize {
        self.tau.len() + 1
    }
}

/// Approximate design: weights on an ordered list of sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct Design<T> {
    sequences: Vec<Sequence>,
    weights: Vec<T>,
}

impl<T: Real> Design<T> {
    pub fn new(sequences: Vec<Sequence>, weights: Vec<T>) -> Result<Self> {
        if sequences.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "design weights".into(),
                expected: sequences.len(),
                found: weights.len(),
            });
        }
        check_distinct(&sequences)?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteInput("design weights".into()));
        }
        if weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidDesign("negative weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidDesign(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { sequences, weights })
    }

    pub fn uniform(sequences: Vec<Sequence>) -> Result<Self> {
        let k = sequences.len();
        if k == 0 {
            return Err(Error::InvalidDesign("no sequences".into()));
        }
        let w = T::one() / T::from_usize(k).unwrap();
        Self::new(sequences, vec![w; k])
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight_of(&self, seq: &Sequence) -> Option<T> {
        self.sequences.iter().position(|s| s == seq).map(|i| self.weights[i])
    }

    pub fn weight_of_label(&self, label: &str) -> Option<T> {
        self.sequences
            .iter()
            .position(|s| s.label() == label)
            .map(|i| self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sequence, T)> {
        self.sequences.iter().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Removes zero-weight sequences.
    pub fn support(&self) -> Self {
        let (s, w): (Vec<_>, Vec<_>) = self
            .iter()
            .filter(|(_, w)| *w > T::zero())
            .map(|(s, w)| (s.clone(), w))
            .unzip();
        Self {
            sequences: s,
            weights: w,
        }
    }
}

impl<T: Real + Serialize> Serialize for Design<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.len()))?;
        for (sq, w) in self.iter() {
            seq.serialize_element(&(sq, w))?;
        }
        seq.end()
    }
}
