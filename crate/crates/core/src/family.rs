//! Response families with canonical links.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Bernoulli responses, logit link.
    Binary,
    /// Count responses, log link.
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Binary => "binary",
            Family::Poisson => "poisson",
        }
    }

    /// Inverse link.
    pub fn mean<T: Real>(self, eta: T) -> Result<T> {
        if !eta.is_finite() {
            return Err(Error::NonFiniteInput("linear predictor".into()));
        }
        Ok(match self {
            Family::Binary => logistic(eta),
            Family::Poisson => eta.exp(),
        })
    }

    pub fn variance<T: Real>(self, mu: T) -> Result<T> {
        let ok = match self {
            Family::Binary => mu > T::zero() && mu < T::one(),
            Family::Poisson => mu > T::zero() && mu.is_finite(),
        };
        if !ok {
            return Err(Error::DomainError {
                family: self.name().into(),
                mu: mu.to_f64_lossy(),
            });
        }
        Ok(match self {
            Family::Binary => mu * (T::one() - mu),
            Family::Poisson => mu,
        })
    }

    /// `dμ/dη`, computed directly from η.
    pub fn mean_derivative<T: Real>(self, eta: T) -> Result<T> {
        if !eta.is_finite() {
            return Err(Error::NonFiniteInput("linear predictor".into()));
        }
        Ok(match self {
            Family::Binary => {
                let e = (-eta.abs()).exp();
                e / ((T::one() + e) * (T::one() + e))
            }
            Family::Poisson => eta.exp(),
        })
    }

    /// Variance at η with binary means kept away from 0 and 1.
    pub fn guarded_variance<T: Real>(self, eta: T) -> Result<T> {
        let mu = self.mean(eta)?;
        let mu = match self {
            Family::Binary => {
                let eps = T::lit(1e-12).max(T::epsilon());
                mu.max(eps).min(T::one() - eps)
            }
            Family::Poisson => mu,
        };
        self.variance(mu)
    }
}

fn logistic<T: Real>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

pub fn mean<T: Real>(family: Family, eta: T) -> Result<T> {
    family.mean(eta)
}

pub fn variance_fn<T: Real>(family: Family, mu: T) -> Result<T> {
    family.variance(mu)
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "binomial" | "bernoulli" => Ok(Family::Binary),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}
