//! D-optimal weights on the probability simplex.
//!
//! Minimizes `ln det Var(τ̂)` with a spectral projected gradient method
//! (Barzilai-Borwein steps, nonmonotone Armijo line search, exact Euclidean
//! projection onto the simplex), run from several starts in parallel.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationSpec;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::gee::{assemble, GeeAssembly};
use crate::problem::DesignProblem;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative change in the objective treated as stationary.
    pub tol_obj: f64,
    /// Sup-norm of the projected gradient step treated as stationary.
    pub tol_weight: f64,
    /// Weights below this are set to zero before renormalizing.
    pub zero_clip: f64,
    /// Tolerance of the first-order optimality check on the returned design,
    /// relative to the mean gradient.
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 2000,
            tol_obj: 1e-10,
            tol_weight: 1e-8,
            zero_clip: 1e-6,
            kkt_tol: 1e-4,
            seed: 20_240_601,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "restarts and max_iters must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("tol_obj", self.tol_obj),
            ("tol_weight", self.tol_weight),
            ("zero_clip", self.zero_clip),
            ("kkt_tol", self.kkt_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult<T> {
    pub design: Design<T>,
    /// `det Var(τ̂)` at one subject.
    pub objective_value: T,
    pub log_objective: T,
    pub converged: bool,
    pub iterations: usize,
    /// Max minus min objective value over the restarts that finished.
    pub restart_spread: T,
    pub restart_objectives: Vec<T>,
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut shift = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let candidate = (cumsum - T::one()) / T::from_usize(j + 1).unwrap();
        if u - candidate > T::zero() {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x - shift).max(T::zero())).collect()
}

struct RestartOutcome<T> {
    weights: Vec<T>,
    log_obj: T,
    iterations: usize,
    stationary: bool,
}

fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn spg<T: Real>(a: &GeeAssembly<T>, start: Vec<T>, cfg: &OptimizerConfig) -> Result<RestartOutcome<T>> {
    const MEMORY: usize = 10;
    let gamma = T::lit(1e-4);
    let lam_min = T::lit(1e-12);
    let lam_max = T::lit(1e12);
    let tol_w = T::lit(cfg.tol_weight);
    let tol_f = T::lit(cfg.tol_obj);

    let mut x = project_to_simplex(&start);
    let (mut f, mut g) = a.log_objective_with_gradient(&x)?;
    let step = |x: &[T], g: &[T], lam: T| -> Vec<T> {
        let trial: Vec<T> = x.iter().zip(g).map(|(&xi, &gi)| xi - lam * gi).collect();
        project_to_simplex(&trial)
            .into_iter()
            .zip(x)
            .map(|(p, &xi)| p - xi)
            .collect::<Vec<T>>()
    };
    let pg0 = sup_norm(&step(&x, &g, T::one()));
    let mut lam = if pg0 > T::zero() {
        (T::one() / pg0).max(lam_min).min(lam_max)
    } else {
        T::one()
    };
    let mut history: VecDeque<T> = VecDeque::from([f]);
    let mut stationary = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if sup_norm(&step(&x, &g, T::one())) <= tol_w {
            stationary = true;
            break;
        }
        iterations += 1;
        let d = step(&x, &g, lam);
        let slope = dot(&g, &d);
        let f_ref = history.iter().copied().fold(T::neg_infinity(), T::max);
        let mut alpha = T::one();
        let accepted = loop {
            let xn: Vec<T> = x
                .iter()
                .zip(&d)
                .map(|(&xi, &di)| (xi + alpha * di).max(T::zero()))
                .collect();
            match a.log_objective_with_gradient(&xn) {
                Ok((fn_, gn)) if fn_.is_finite() && fn_ <= f_ref + gamma * alpha * slope => {
                    break Some((xn, fn_, gn));
                }
                Ok((fn_, _)) if fn_.is_finite() => {
                    // safeguarded quadratic backtrack
                    let denom = T::lit(2.0) * (fn_ - f - alpha * slope);
                    let q = if denom > T::zero() {
                        -slope * alpha * alpha / denom
                    } else {
                        alpha * T::lit(0.5)
                    };
                    alpha = q.max(alpha * T::lit(0.1)).min(alpha * T::lit(0.5));
                }
                _ => alpha = alpha * T::lit(0.5),
            }
            if alpha < T::lit(1e-20) {
                break None;
            }
        };
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sty = dot(&s, &y);
        lam = if sty > T::zero() {
            (dot(&s, &s) / sty).max(lam_min).min(lam_max)
        } else {
            lam_max
        };
        let small_change = (f - fn_).abs() <= tol_f * f.abs().max(T::one()) && sup_norm(&s) <= tol_w;
        x = xn;
        f = fn_;
        g = gn;
        history.push_back(f);
        if history.len() > MEMORY {
            history.pop_front();
        }
        if small_change {
            stationary = true;
            break;
        }
    }
    Ok(RestartOutcome {
        weights: x,
        log_obj: f,
        iterations,
        stationary,
    })
}

/// Clips tiny weights and renormalizes so the sum is one.
fn clip_weights<T: Real>(w: &[T], zero_clip: T) -> Vec<T> {
    let kept: Vec<T> = w.iter().map(|&x| if x < zero_clip { T::zero() } else { x }).collect();
    let total: T = kept.iter().copied().sum();
    let mut out: Vec<T> = kept.iter().map(|&x| x / total).collect();
    // push rounding residue onto the largest weight so the sum is exactly one
    let residue = T::one() - out.iter().copied().sum::<T>();
    if let Some((imax, _)) = out
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
    {
        out[imax] = out[imax] + residue;
    }
    out
}

/// First-order conditions on the simplex: gradient constant on the support
/// and no smaller off it.
pub fn kkt_satisfied<T: Real>(weights: &[T], grad: &[T], tol: T) -> bool {
    let mean = dot(weights, grad);
    let tol = tol * mean.abs().max(T::one());
    weights.iter().zip(grad).all(|(&w, &g)| {
        if w > T::zero() {
            (g - mean).abs() <= tol
        } else {
            g - mean >= -tol
        }
    })
}

fn start_point<T: Real>(k: usize, restart: usize, seed: u64) -> Vec<T> {
    let uniform = T::one() / T::from_usize(k).unwrap();
    if restart == 0 {
        return vec![uniform; k];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    // Dirichlet(1) via normalized exponentials
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = draws.iter().sum();
    let half = T::lit(0.5);
    draws
        .iter()
        .map(|&e| half * uniform + half * T::lit(e / total))
        .collect()
}

pub fn optimize<T: Real>(problem: &DesignProblem<T>, cfg: &OptimizerConfig) -> Result<OptimizationResult<T>> {
    let assembly = assemble(problem)?;
    optimize_assembly(&assembly, cfg)
}

pub fn optimize_assembly<T: Real>(a: &GeeAssembly<T>, cfg: &OptimizerConfig) -> Result<OptimizationResult<T>> {
    cfg.validate()?;
    let k = a.len();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two candidate sequences".into()));
    }
    let outcomes: Vec<Result<RestartOutcome<T>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| spg(a, start_point(k, r, cfg.seed), cfg))
        .collect();
    let mut best: Option<(usize, RestartOutcome<T>)> = None;
    let mut restart_objectives = Vec::new();
    let mut first_err = None;
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(o) => {
                restart_objectives.push(o.log_obj.exp());
                if best.as_ref().is_none_or(|(_, b)| o.log_obj < b.log_obj) {
                    best = Some((r, o));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((_, best)) = best else {
        return Err(first_err.expect("no restart produced an outcome"));
    };
    let spread = restart_objectives.iter().copied().fold(T::neg_infinity(), T::max)
        - restart_objectives.iter().copied().fold(T::infinity(), T::min);

    let weights = clip_weights(&best.weights, T::lit(cfg.zero_clip));
    let (log_obj, grad) = a.log_objective_with_gradient(&weights)?;
    let kkt = kkt_satisfied(&weights, &grad, T::lit(cfg.kkt_tol));
    if !kkt && !best.stationary {
        return Err(Error::DidNotConverge {
            iterations: best.iterations,
            detail: "best restart is neither stationary nor first-order optimal".into(),
        });
    }
    Ok(OptimizationResult {
        design: Design::new(a.sequences(), weights)?,
        objective_value: log_obj.exp(),
        log_objective: log_obj,
        converged: kkt,
        iterations: best.iterations,
        restart_spread: spread,
        restart_objectives,
    })
}

/// Exhaustive scan of the weight on the first of two sequences.
pub fn grid_oracle_2seq<T: Real>(problem: &DesignProblem<T>, step: T) -> Result<Design<T>> {
    if problem.sequences().len() != 2 {
        return Err(Error::InvalidArgument("grid oracle needs exactly two sequences".into()));
    }
    if !(step > T::zero() && step <= T::lit(1e-3)) {
        return Err(Error::InvalidArgument("grid step must be in (0, 1e-3]".into()));
    }
    let a = assemble(problem)?;
    let n = (T::one() / step).round().to_usize().unwrap_or(1000).max(1);
    let nf = T::from_usize(n).unwrap();
    let mut best: Option<(T, T)> = None;
    for i in 0..=n {
        let w = T::from_usize(i).unwrap() / nf;
        if let Ok(f) = a.log_objective(&[w, T::one() - w]) {
            if best.is_none_or(|(bf, _)| f < bf) {
                best = Some((f, w));
            }
        }
    }
    let (_, w) = best.ok_or(Error::SingularInformation {
        condition: f64::INFINITY,
    })?;
    Design::new(problem.sequences().to_vec(), vec![w, T::one() - w])
}

fn check_compatible<T: Real>(a: &DesignProblem<T>, b: &DesignProblem<T>) -> Result<()> {
    if !a.same_layout(b) {
        return Err(Error::IncompatibleProblems(
            "problems differ in sequences, periods, treatments or family".into(),
        ));
    }
    Ok(())
}

fn tau_dim<T: Real>(problem: &DesignProblem<T>) -> T {
    T::from_usize(problem.treatments() - 1).unwrap()
}

/// Relative loss `(f_t^{-1/k} - f_c^{-1/k}) / f_t^{-1/k}` where both
/// criteria are evaluated at `design` and `k = t - 1`.
pub fn sensitivity<T: Real>(
    problem_true: &DesignProblem<T>,
    problem_assumed: &DesignProblem<T>,
    design: &Design<T>,
) -> Result<T> {
    check_compatible(problem_true, problem_assumed)?;
    if problem_true.correlation() != problem_assumed.correlation() {
        return Err(Error::IncompatibleProblems(
            "problems use different correlations".into(),
        ));
    }
    let k = tau_dim(problem_true);
    let at = assemble(problem_true)?;
    let ac = assemble(problem_assumed)?;
    let lt = at.log_objective(&at.weights_for(design)?)?;
    let lc = ac.log_objective(&ac.weights_for(design)?)?;
    let et = (-lt / k).exp();
    let ec = (-lc / k).exp();
    Ok((et - ec) / et)
}

/// Efficiency of the design that is optimal under `problem_assumed`,
/// measured by the criterion of `problem_true` against that criterion's own
/// optimum: `[f_true(ξ*) / f_true(ξ)]^{1/k}`, in `(0, 1]`.
pub fn relative_d_efficiency<T: Real>(
    problem_true: &DesignProblem<T>,
    problem_assumed: &DesignProblem<T>,
    cfg: &OptimizerConfig,
) -> Result<T> {
    check_compatible(problem_true, problem_assumed)?;
    let at = assemble(problem_true)?;
    let best = optimize_assembly(&at, cfg)?;
    let assumed = optimize(problem_assumed, cfg)?;
    efficiency_of(&at, &best, &assumed.design)
}

fn efficiency_of<T: Real>(at: &GeeAssembly<T>, best: &OptimizationResult<T>, design: &Design<T>) -> Result<T> {
    let k = T::from_usize(at.treatments() - 1).unwrap();
    let l_design = at.log_objective(&at.weights_for(design)?)?;
    Ok(((best.log_objective - l_design) / k).exp())
}

#[derive(Clone, Debug)]
pub struct MisspecRow<T> {
    pub true_name: String,
    pub working_name: String,
    /// Optimal weights under the sandwich criterion, per θ.
    pub weights: [Vec<T>; 2],
    /// Efficiency of the design that ignores the misspecification, per θ.
    pub efficiency: [T; 2],
}

#[derive(Clone, Debug)]
pub struct MisspecTable<T> {
    pub sequences: Vec<String>,
    pub rows: Vec<MisspecRow<T>>,
}

impl<T: Real> MisspecTable<T> {
    pub fn row(&self, true_name: &str, working_name: &str) -> Option<&MisspecRow<T>> {
        self.rows
            .iter()
            .find(|r| r.true_name == true_name && r.working_name == working_name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true,working");
        for th in ["theta1", "theta2"] {
            for s in &self.sequences {
                out.push_str(&format!(",{th}_{s}"));
            }
        }
        out.push_str(",efficiency_theta1,efficiency_theta2\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.true_name, r.working_name));
            for w in r.weights.iter().flatten() {
                out.push_str(&format!(",{:.6}", w.to_f64_lossy()));
            }
            for e in &r.efficiency {
                out.push_str(&format!(",{:.6}", e.to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }
}

/// Optimal designs when the working correlation differs from the truth.
///
/// For every ordered pair of distinct structures, the design is optimized
/// under the sandwich variance (working inside `U`, truth inside the meat),
/// and the design that trusts the working structure is scored against it.
pub fn misspec_table<T: Real>(
    base: &DesignProblem<T>,
    theta1: &[T],
    theta2: &[T],
    structures: &[(String, CorrelationSpec<T>)],
    cfg: &OptimizerConfig,
) -> Result<MisspecTable<T>> {
    let pairs: Vec<(usize, usize)> = (0..structures.len())
        .flat_map(|i| (0..structures.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(ti, wi)| {
            let (true_name, truth) = &structures[ti];
            let (working_name, working) = &structures[wi];
            let mut weights: [Vec<T>; 2] = [Vec::new(), Vec::new()];
            let mut efficiency = [T::zero(); 2];
            for (slot, theta) in [theta1, theta2].into_iter().enumerate() {
                let assumed = base.with_theta(theta.to_vec())?.with_correlation(working.clone())?;
                let robust = assumed.with_true_correlation(Some(truth.clone()))?;
                let at = assemble(&robust)?;
                let best = optimize_assembly(&at, cfg)?;
                let naive = optimize(&assumed, cfg)?;
                efficiency[slot] = efficiency_of(&at, &best, &naive.design)?;
                weights[slot] = best.design.weights().to_vec();
            }
            Ok(MisspecRow {
                true_name: true_name.clone(),
                working_name: working_name.clone(),
                weights,
                efficiency,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MisspecTable {
        sequences: base.sequences().iter().map(|s| s.label()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.4f64, 0.4, 0.4]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn clipping_sums_to_one() {
        let w = clip_weights(&[0.3, 5e-7, 0.7 - 5e-7], 1e-6);
        assert_eq!(w[1], 0.0);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn start_points_are_interior_and_reproducible() {
        let a: Vec<f64> = start_point(5, 3, 7);
        let b: Vec<f64> = start_point(5, 3, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|&w| w >= 0.1));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, start_point::<f64>(5, 4, 7));
        assert_eq!(start_point::<f64>(4, 0, 7), vec![0.25; 4]);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            tol_obj: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_nearest(v in proptest::collection::vec(-3.0f64..3.0, 1..12)) {
            let p = project_to_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // optimality: <v - p, q - p> <= 0 for simplex vertices q
            for j in 0..v.len() {
                let mut inner = 0.0;
                for i in 0..v.len() {
                    let q = if i == j { 1.0 } else { 0.0 };
                    inner += (v[i] - p[i]) * (q - p[i]);
                }
                prop_assert!(inner <= 1e-10);
            }
        }
    }
}
