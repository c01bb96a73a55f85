//! Built-in example problems: named candidate sets with two nominal θ
//! vectors each.
//!
//! Names take the form `<key>-theta1` / `<key>-theta2`, for example
//! `ab-ba-theta1` or `latin-square-theta2`.

use crate::correlation::{default_rho_tables, CorrelationSpec, DefaultRhos, Scenario, StructureId};
use crate::design::{enumerate_permutation_sequences, parse_sequences, Sequence};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::problem::DesignProblem;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct FixtureSpec {
    pub key: &'static str,
    /// Empty means every ordering of the treatments.
    pub sequences: &'static [&'static str],
    pub p: usize,
    pub t: usize,
    pub family: Family,
}

pub const CATALOG: &[FixtureSpec] = &[
    FixtureSpec {
        key: "ab-ba",
        sequences: &["AB", "BA"],
        p: 2,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "ab-ba-aa-bb",
        sequences: &["AB", "BA", "AA", "BB"],
        p: 2,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "abb-baa",
        sequences: &["ABB", "BAA"],
        p: 3,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "aba-bab",
        sequences: &["ABA", "BAB"],
        p: 3,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "aab-bba",
        sequences: &["AAB", "BBA"],
        p: 3,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "abb-baa-aaa-bbb",
        sequences: &["ABB", "BAA", "AAA", "BBB"],
        p: 3,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "abb-baa-aab-bba",
        sequences: &["ABB", "BAA", "AAB", "BBA"],
        p: 3,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "aabb-bbaa",
        sequences: &["AABB", "BBAA"],
        p: 4,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "abba-baab",
        sequences: &["ABBA", "BAAB"],
        p: 4,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "abab-baba",
        sequences: &["ABAB", "BABA"],
        p: 4,
        t: 2,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "poisson-ab-ba",
        sequences: &["AB", "BA"],
        p: 2,
        t: 2,
        family: Family::Poisson,
    },
    FixtureSpec {
        key: "latin-square",
        sequences: &["ABCD", "BDAC", "CADB", "DCBA"],
        p: 4,
        t: 4,
        family: Family::Binary,
    },
    FixtureSpec {
        key: "all-orders-4",
        sequences: &[],
        p: 4,
        t: 4,
        family: Family::Binary,
    },
];

impl FixtureSpec {
    pub fn scenario(&self) -> Scenario {
        if self.t == 2 {
            Scenario::TwoTreatment
        } else {
            Scenario::LatinSquare4
        }
    }

    pub fn sequence_list(&self) -> Vec<Sequence> {
        if self.sequences.is_empty() {
            enumerate_permutation_sequences(self.t)
        } else {
            parse_sequences(self.sequences, self.t).expect("catalog sequences are valid")
        }
    }

    /// The two nominal parameter vectors.
    pub fn thetas(&self) -> [Vec<f64>; 2] {
        match (self.family, self.t, self.p) {
            (Family::Poisson, _, _) => [vec![0.2, 0.34, -1.60, -1.65], vec![-0.223, -0.875, 0.405, -0.105]],
            (Family::Binary, 4, _) => [
                vec![-2.0, 0.25, 0.0, 0.75, 1.0, 5.0, -1.5, -3.5, 2.75, 0.75],
                vec![0.5, 0.06, -0.53, -0.6, -0.35, 0.025, -0.23, 0.73, 0.23, 0.30],
            ],
            (Family::Binary, _, 2) => [vec![0.5, -1.0, 4.0, -2.0], vec![0.5, 0.06, -0.35, 0.73]],
            (Family::Binary, _, 3) => [vec![0.5, -1.0, 2.0, 4.0, -2.0], vec![0.5, 0.06, -0.53, -0.35, 0.73]],
            (Family::Binary, _, _) => [
                vec![0.5, -1.0, 2.0, -1.5, 4.0, -2.0],
                vec![0.5, 0.06, -0.53, -0.6, -0.35, 0.73],
            ],
        }
    }

    pub fn problem<T: Real>(&self, theta_index: usize, correlation: CorrelationSpec<T>) -> Result<DesignProblem<T>> {
        let theta = self
            .thetas()
            .get(theta_index)
            .ok_or_else(|| Error::InvalidArgument(format!("theta index {theta_index} out of range")))?
            .iter()
            .map(|&v| T::lit(v))
            .collect();
        DesignProblem::new(self.t, self.p, self.sequence_list(), self.family, correlation, theta)
    }
}

pub fn lookup(key: &str) -> Option<&'static FixtureSpec> {
    CATALOG.iter().find(|f| f.key == key)
}

pub fn fixture_names() -> Vec<String> {
    CATALOG
        .iter()
        .flat_map(|f| [format!("{}-theta1", f.key), format!("{}-theta2", f.key)])
        .collect()
}

/// Splits `"<key>-thetaN"` into the catalog entry and the 0-based θ index.
pub fn resolve(name: &str) -> Result<(&'static FixtureSpec, usize)> {
    let unknown = || Error::InvalidArgument(format!("unknown fixture '{name}'"));
    let (key, suffix) = name.rsplit_once('-').ok_or_else(unknown)?;
    let index = match suffix {
        "theta1" => 0,
        "theta2" => 1,
        _ => return Err(unknown()),
    };
    Ok((lookup(key).ok_or_else(unknown)?, index))
}

/// Named fixture with one of the six default structures.
pub fn fixture<T: Real>(name: &str, structure: StructureId) -> Result<DesignProblem<T>> {
    let (spec, index) = resolve(name)?;
    let corr = default_rho_tables::<T>(spec.scenario()).structure(structure);
    spec.problem(index, corr)
}

/// Structures used for the four-treatment misspecification study, where the
/// three fixed structures all use ρ = 0.1.
pub fn misspecification_rhos<T: Real>() -> DefaultRhos<T> {
    let mut rhos = default_rho_tables::<T>(Scenario::LatinSquare4);
    rhos.compound_symmetric = T::lit(0.1);
    rhos.ar1 = T::lit(0.1);
    rhos.banded1 = T::lit(0.1);
    rhos
}

pub fn misspecification_structures<T: Real>() -> Vec<(String, CorrelationSpec<T>)> {
    misspecification_rhos::<T>()
        .all()
        .into_iter()
        .map(|(id, spec)| (id.to_string(), spec))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_builds() {
        for name in fixture_names() {
            for id in StructureId::ALL {
                let p = fixture::<f64>(&name, id).unwrap();
                assert_eq!(p.theta().len(), p.parameter_count(), "{name}");
            }
        }
    }

    #[test]
    fn resolves_names() {
        let (spec, idx) = resolve("latin-square-theta2").unwrap();
        assert_eq!((spec.key, idx), ("latin-square", 1));
        assert!(resolve("latin-square-theta3").is_err());
        assert!(resolve("nothing-theta1").is_err());
        assert_eq!(lookup("all-orders-4").unwrap().sequence_list().len(), 24);
    }
}
