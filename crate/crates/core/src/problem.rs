use crate::correlation::CorrelationSpec;
use crate::design::{check_distinct, parameter_count, Sequence};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::scalar::Real;

/// Everything needed to evaluate a design: treatments, periods, candidate
/// sequences, response family, working correlation and nominal θ.
///
/// When a true correlation is attached, variances use the sandwich form with
/// the working correlation inside `U` and the true one inside the meat.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignProblem<T> {
    t: usize,
    p: usize,
    sequences: Vec<Sequence>,
    family: Family,
    correlation: CorrelationSpec<T>,
    true_correlation: Option<CorrelationSpec<T>>,
    theta: Vec<T>,
}

impl<T: Real> DesignProblem<T> {
    pub fn new(
        t: usize,
        p: usize,
        sequences: Vec<Sequence>,
        family: Family,
        correlation: CorrelationSpec<T>,
        theta: Vec<T>,
    ) -> Result<Self> {
        if !(2..=crate::design::MAX_TREATMENTS).contains(&t) {
            return Err(Error::InvalidArgument(format!("treatment count {t} must be in 2..=26")));
        }
        if p < 2 {
            return Err(Error::InvalidArgument(format!("period count {p} must be at least 2")));
        }
        if sequences.is_empty() {
            return Err(Error::InvalidArgument("no candidate sequences".into()));
        }
        for s in &sequences {
            if s.len() != p {
                return Err(Error::DimensionMismatch {
                    what: format!("sequence {s}"),
                    expected: p,
                    found: s.len(),
                });
            }
            if s.max_treatment() > t {
                return Err(Error::UnknownTreatmentLabel {
                    label: s
                        .label()
                        .chars()
                        .find(|&c| (c as usize - 'A' as usize) >= t)
                        .unwrap_or('?'),
                    t,
                });
            }
        }
        check_distinct(&sequences)?;
        let problem = Self {
            t,
            p,
            sequences,
            family,
            correlation,
            true_correlation: None,
            theta: Vec::new(),
        };
        problem.correlation.validate()?;
        problem.with_theta(theta)
    }

    pub fn with_theta(&self, theta: Vec<T>) -> Result<Self> {
        let m = parameter_count(self.p, self.t);
        if theta.len() != m {
            return Err(Error::DimensionMismatch {
                what: "theta".into(),
                expected: m,
                found: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("theta".into()));
        }
        Ok(Self { theta, ..self.clone() })
    }

    pub fn with_correlation(&self, correlation: CorrelationSpec<T>) -> Result<Self> {
        correlation.validate()?;
        Ok(Self {
            correlation,
            ..self.clone()
        })
    }

    pub fn with_true_correlation(&self, truth: Option<CorrelationSpec<T>>) -> Result<Self> {
        if let Some(c) = &truth {
            c.validate()?;
        }
        Ok(Self {
            true_correlation: truth,
            ..self.clone()
        })
    }

    pub fn with_sequences(&self, sequences: Vec<Sequence>) -> Result<Self> {
        let mut out = Self::new(
            self.t,
            self.p,
            sequences,
            self.family,
            self.correlation.clone(),
            self.theta.clone(),
        )?;
        out.true_correlation = self.true_correlation.clone();
        Ok(out)
    }

    pub fn treatments(&self) -> usize {
        self.t
    }

    pub fn periods(&self) -> usize {
        self.p
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(self.p, self.t)
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn correlation(&self) -> &CorrelationSpec<T> {
        &self.correlation
    }

    pub fn true_correlation(&self) -> Option<&CorrelationSpec<T>> {
        self.true_correlation.as_ref()
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    /// True when both problems share Ω, p, t and family.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.t == other.t && self.p == other.p && self.sequences == other.sequences && self.family == other.family
    }
}
