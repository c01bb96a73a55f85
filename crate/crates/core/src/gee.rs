//! Per-sequence GEE quantities, the information matrix `U`, sandwich
//! variance and the D-criterion on the direct treatment effects.

use crate::correlation::{build_correlation, CorrelationSpec};
use crate::design::{build_design_matrix, parameter_count, tau_range, Design, Sequence};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::problem::DesignProblem;
use crate::scalar::Real;

/// Cached quantities for one candidate sequence.
#[derive(Clone, Debug)]
pub struct SequenceBlock<T> {
    pub sequence: Sequence,
    pub x: Matrix<T>,
    pub eta: Vec<T>,
    pub mu: Vec<T>,
    /// Diagonal of `D`.
    pub variance: Vec<T>,
    pub correlation: Matrix<T>,
    pub w_inv: Matrix<T>,
    /// `∂μ/∂θ`, one row per period.
    pub dmu: Matrix<T>,
    /// `dmuᵀ W⁻¹ dmu`
    pub info: Matrix<T>,
    /// `dmuᵀ W⁻¹ Cov W⁻¹ dmu` with `Cov` built from the true correlation.
    pub meat: Option<Matrix<T>>,
}

impl<T: Real> SequenceBlock<T> {
    pub fn working_covariance(&self) -> Matrix<T> {
        scaled_covariance(&self.variance, &self.correlation)
    }
}

/// `D^{1/2} C D^{1/2}`
fn scaled_covariance<T: Real>(variance: &[T], c: &Matrix<T>) -> Matrix<T> {
    let sd: Vec<T> = variance.iter().map(|v| v.sqrt()).collect();
    Matrix::from_fn(c.rows(), c.cols(), |i, j| sd[i] * c[(i, j)] * sd[j])
}

#[derive(Clone, Debug)]
pub struct GeeAssembly<T> {
    p: usize,
    t: usize,
    family: Family,
    blocks: Vec<SequenceBlock<T>>,
    sandwich: bool,
}

#[derive(Clone, Debug)]
pub struct VarianceReport<T> {
    pub var_theta: Matrix<T>,
    pub var_tau: Matrix<T>,
    pub det_tau: T,
    pub log_det_tau: T,
    pub used_sandwich: bool,
}

/// Model means `μ = g⁻¹(Xθ)` for one sequence.
pub fn mean_vector<T: Real>(family: Family, seq: &Sequence, p: usize, t: usize, theta: &[T]) -> Result<Vec<T>> {
    let x = build_design_matrix::<T>(seq, p, t)?;
    check_theta(theta, p, t)?;
    x.mat_vec(theta).into_iter().map(|e| family.mean(e)).collect()
}

fn check_theta<T>(theta: &[T], p: usize, t: usize) -> Result<()> {
    let m = parameter_count(p, t);
    if theta.len() != m {
        return Err(Error::DimensionMismatch {
            what: "theta".into(),
            expected: m,
            found: theta.len(),
        });
    }
    Ok(())
}

pub fn assemble<T: Real>(problem: &DesignProblem<T>) -> Result<GeeAssembly<T>> {
    GeeAssembly::build(
        problem.sequences(),
        problem.periods(),
        problem.treatments(),
        problem.family(),
        problem.correlation(),
        problem.true_correlation(),
        problem.theta(),
    )
}

impl<T: Real> GeeAssembly<T> {
    pub fn build(
        sequences: &[Sequence],
        p: usize,
        t: usize,
        family: Family,
        working: &CorrelationSpec<T>,
        truth: Option<&CorrelationSpec<T>>,
        theta: &[T],
    ) -> Result<Self> {
        check_theta(theta, p, t)?;
        let blocks = sequences
            .iter()
            .map(|seq| build_block(seq, p, t, family, working, truth, theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            t,
            family,
            blocks,
            sandwich: truth.is_some(),
        })
    }

    pub fn blocks(&self) -> &[SequenceBlock<T>] {
        &self.blocks
    }

    pub fn periods(&self) -> usize {
        self.p
    }

    pub fn treatments(&self) -> usize {
        self.t
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(self.p, self.t)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn uses_sandwich(&self) -> bool {
        self.sandwich
    }

    pub fn sequences(&self) -> Vec<Sequence> {
        self.blocks.iter().map(|b| b.sequence.clone()).collect()
    }

    /// Reorders a design's weights to match this assembly. Sequences absent
    /// from the design get weight zero.
    pub fn weights_for(&self, design: &Design<T>) -> Result<Vec<T>> {
        for s in design.sequences() {
            if !self.blocks.iter().any(|b| &b.sequence == s) {
                return Err(Error::InvalidDesign(format!(
                    "sequence {s} is not a candidate of this problem"
                )));
            }
        }
        Ok(self
            .blocks
            .iter()
            .map(|b| design.weight_of(&b.sequence).unwrap_or(T::zero()))
            .collect())
    }

    fn check_weights(&self, weights: &[T]) -> Result<()> {
        if weights.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                what: "design weights".into(),
                expected: self.blocks.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteInput("design weights".into()));
        }
        Ok(())
    }

    fn weighted_sum(&self, weights: &[T], n: T, pick: impl Fn(&SequenceBlock<T>) -> &Matrix<T>) -> Matrix<T> {
        let m = self.parameter_count();
        let mut acc = Matrix::zeros(m, m);
        for (b, &w) in self.blocks.iter().zip(weights) {
            if w != T::zero() {
                acc.add_scaled(n * w, pick(b));
            }
        }
        acc
    }

    /// `U = Σ n w_ω dmu_ωᵀ W_ω⁻¹ dmu_ω`
    pub fn info_matrix(&self, weights: &[T], n: T) -> Result<Matrix<T>> {
        self.check_weights(weights)?;
        Ok(self.weighted_sum(weights, n, |b| &b.info))
    }

    /// Meat of the sandwich. Uses the stored true correlation, or `U` itself
    /// when none was given.
    pub fn meat_matrix(&self, weights: &[T], n: T) -> Result<Matrix<T>> {
        self.check_weights(weights)?;
        Ok(self.weighted_sum(weights, n, |b| b.meat.as_ref().unwrap_or(&b.info)))
    }

    fn meat_under(&self, weights: &[T], n: T, truth: &CorrelationSpec<T>) -> Result<Matrix<T>> {
        let m = self.parameter_count();
        let mut acc = Matrix::zeros(m, m);
        for (b, &w) in self.blocks.iter().zip(weights) {
            if w == T::zero() {
                continue;
            }
            let meat = meat_block(b, truth, self.p)?;
            acc.add_scaled(n * w, &meat);
        }
        Ok(acc)
    }

    /// Variance of θ̂ and τ̂ for `n` subjects. With `true_corr` the sandwich
    /// `U⁻¹ V U⁻¹` is used, otherwise `U⁻¹`.
    pub fn variance_report(
        &self,
        weights: &[T],
        n: T,
        true_corr: Option<&CorrelationSpec<T>>,
    ) -> Result<VarianceReport<T>> {
        let u = self.info_matrix(weights, n)?;
        let a = invert_information(&u)?;
        let var_theta = match true_corr {
            Some(truth) => {
                let v = self.meat_under(weights, n, truth)?;
                a.matmul(&v).matmul(&a).symmetrize()
            }
            None => a,
        };
        let taus = tau_range(self.p, self.t);
        let var_tau = var_theta.submatrix(taus.clone(), taus);
        let (log_det_tau, det_tau) = log_det_pd(&var_tau)?;
        Ok(VarianceReport {
            var_theta,
            var_tau,
            det_tau,
            log_det_tau,
            used_sandwich: true_corr.is_some(),
        })
    }

    /// The criterion's variance of θ̂ at `n = 1`: sandwich when the assembly
    /// carries a true correlation, model based otherwise.
    fn criterion_variance(&self, weights: &[T]) -> Result<(Matrix<T>, Matrix<T>)> {
        let u = self.info_matrix(weights, T::one())?;
        let a = invert_information(&u)?;
        let s = if self.sandwich {
            let v = self.meat_matrix(weights, T::one())?;
            a.matmul(&v).matmul(&a).symmetrize()
        } else {
            a.clone()
        };
        Ok((a, s))
    }

    /// `det Var(τ̂)` at one subject.
    pub fn objective(&self, weights: &[T]) -> Result<T> {
        Ok(self.log_objective(weights)?.exp())
    }

    pub fn objective_for(&self, design: &Design<T>) -> Result<T> {
        self.objective(&self.weights_for(design)?)
    }

    pub fn log_objective(&self, weights: &[T]) -> Result<T> {
        let (_, s) = self.criterion_variance(weights)?;
        let taus = tau_range(self.p, self.t);
        Ok(log_det_pd(&s.submatrix(taus.clone(), taus))?.0)
    }

    /// `ln det Var(τ̂)` and its gradient in the weights.
    pub fn log_objective_with_gradient(&self, weights: &[T]) -> Result<(T, Vec<T>)> {
        let (a, s) = self.criterion_variance(weights)?;
        let m = self.parameter_count();
        let taus = tau_range(self.p, self.t);
        let q = s.submatrix(taus.clone(), taus.clone());
        let (log_det, _) = log_det_pd(&q)?;
        let q_inv = q.inverse().map_err(|_| singular(&q))?;
        // G = Hᵀ Q⁻¹ H
        let mut g = Matrix::zeros(m, m);
        for (i, r) in taus.clone().enumerate() {
            for (j, c) in taus.clone().enumerate() {
                g[(r, c)] = q_inv[(i, j)];
            }
        }
        let ag = a.matmul(&g);
        let aga = ag.matmul(&a);
        let grad = if self.sandwich {
            let sga = s.matmul(&g).matmul(&a);
            self.blocks
                .iter()
                .map(|b| {
                    let meat = b.meat.as_ref().unwrap_or(&b.info);
                    aga.trace_of_product(meat) - T::lit(2.0) * sga.trace_of_product(&b.info)
                })
                .collect()
        } else {
            self.blocks.iter().map(|b| -aga.trace_of_product(&b.info)).collect()
        };
        Ok((log_det, grad))
    }
}

fn build_block<T: Real>(
    seq: &Sequence,
    p: usize,
    t: usize,
    family: Family,
    working: &CorrelationSpec<T>,
    truth: Option<&CorrelationSpec<T>>,
    theta: &[T],
) -> Result<SequenceBlock<T>> {
    let x = build_design_matrix::<T>(seq, p, t)?;
    let eta = x.mat_vec(theta);
    let mu = eta.iter().map(|&e| family.mean(e)).collect::<Result<Vec<_>>>()?;
    let variance = eta
        .iter()
        .map(|&e| family.guarded_variance(e))
        .collect::<Result<Vec<_>>>()?;
    let correlation = build_correlation(working, seq, p)?.into_matrix();
    let w = scaled_covariance(&variance, &correlation);
    let w_inv = w
        .inverse()
        .map_err(|_| Error::SingularWorkingCovariance { sequence: seq.label() })?;
    if !w_inv.is_finite() {
        return Err(Error::SingularWorkingCovariance { sequence: seq.label() });
    }
    let dmu = Matrix::from_fn(p, x.cols(), |i, j| variance[i] * x[(i, j)]);
    let info = dmu.tr_matmul(&w_inv.matmul(&dmu)).symmetrize();
    let mut block = SequenceBlock {
        sequence: seq.clone(),
        x,
        eta,
        mu,
        variance,
        correlation,
        w_inv,
        dmu,
        info,
        meat: None,
    };
    if let Some(truth) = truth {
        block.meat = Some(meat_block(&block, truth, p)?);
    }
    Ok(block)
}

fn meat_block<T: Real>(b: &SequenceBlock<T>, truth: &CorrelationSpec<T>, p: usize) -> Result<Matrix<T>> {
    let c_true = build_correlation(truth, &b.sequence, p)?.into_matrix();
    let cov = scaled_covariance(&b.variance, &c_true);
    let left = b.w_inv.matmul(&b.dmu);
    Ok(left.tr_matmul(&cov.matmul(&left)).symmetrize())
}

fn singular<T: Real>(m: &Matrix<T>) -> Error {
    Error::SingularInformation {
        condition: condition_number(m).to_f64_lossy(),
    }
}

/// Spectral condition number of a symmetric matrix; infinite when the
/// smallest eigenvalue is not positive.
pub fn condition_number<T: Real>(m: &Matrix<T>) -> T {
    let eig = symmetric_eigenvalues(m);
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if lo <= T::zero() {
        T::infinity()
    } else {
        hi / lo
    }
}

fn invert_information<T: Real>(u: &Matrix<T>) -> Result<Matrix<T>> {
    if !u.is_finite() {
        return Err(Error::NonFiniteInput("information matrix".into()));
    }
    let cond = condition_number(u);
    if !(cond <= T::max_condition()) {
        return Err(Error::SingularInformation {
            condition: cond.to_f64_lossy(),
        });
    }
    let inv = u.inverse().map_err(|_| singular(u))?;
    Ok(inv.symmetrize())
}

/// `(ln det, det)` of a matrix that must be positive definite.
fn log_det_pd<T: Real>(m: &Matrix<T>) -> Result<(T, T)> {
    let lu = m.lu().map_err(|_| singular(m))?;
    let (log_abs, sign) = lu.log_abs_determinant();
    if sign <= T::zero() || !log_abs.is_finite() {
        return Err(singular(m));
    }
    Ok((log_abs, log_abs.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::parse_sequences;
    use approx::assert_relative_eq;

    fn two_period(theta: Vec<f64>, rho: f64) -> DesignProblem<f64> {
        DesignProblem::new(
            2,
            2,
            parse_sequences(&["AB", "BA"], 2).unwrap(),
            Family::Binary,
            CorrelationSpec::CompoundSymmetric(rho),
            theta,
        )
        .unwrap()
    }

    #[test]
    fn null_theta_blocks() {
        let a = assemble(&two_period(vec![0.0; 4], 0.0)).unwrap();
        for b in a.blocks() {
            assert_eq!(b.variance, vec![0.25, 0.25]);
            assert!(b.w_inv.max_abs_diff(&Matrix::identity(2).scale(4.0)) < 1e-14);
        }
    }

    #[test]
    fn poisson_means() {
        let prob = DesignProblem::new(
            2,
            2,
            parse_sequences(&["AB"], 2).unwrap(),
            Family::Poisson,
            CorrelationSpec::CompoundSymmetric(0.1),
            vec![0.2, 0.34, -1.60, -1.65],
        )
        .unwrap();
        let a = assemble(&prob).unwrap();
        let mu = &a.blocks()[0].mu;
        assert_relative_eq!(mu[0], 1.2214, epsilon = 1e-4);
        assert_relative_eq!(mu[1], 0.3465, epsilon = 1e-4);
    }

    #[test]
    fn w_inverse_is_inverse() {
        let a = assemble(&two_period(vec![0.5, 0.06, -0.35, 0.73], 0.4)).unwrap();
        for b in a.blocks() {
            let eye = b.w_inv.matmul(&b.working_covariance());
            assert!(eye.max_abs_diff(&Matrix::identity(2)) < 1e-8);
        }
    }

    #[test]
    fn single_sequence_is_singular() {
        let a = assemble(&two_period(vec![0.5, 0.06, -0.35, 0.73], 0.1)).unwrap();
        let u = a.info_matrix(&[1.0, 0.0], 1.0).unwrap();
        assert!(u.max_abs_diff(&a.blocks()[0].info) < 1e-15);
        assert!(matches!(
            a.objective(&[1.0, 0.0]),
            Err(Error::SingularInformation { .. })
        ));
    }

    #[test]
    fn scales_with_subject_count() {
        let a = assemble(&two_period(vec![0.5, -1.0, 4.0, -2.0], 0.1)).unwrap();
        let w = [0.3, 0.7];
        let u1 = a.info_matrix(&w, 1.0).unwrap();
        let u2 = a.info_matrix(&w, 2.0).unwrap();
        assert!(u2.max_abs_diff(&u1.scale(2.0)) < 1e-14);
        let r1 = a.variance_report(&w, 1.0, None).unwrap();
        let r5 = a.variance_report(&w, 5.0, None).unwrap();
        assert_relative_eq!(r5.det_tau, r1.det_tau / 5.0, max_relative = 1e-10);
    }

    #[test]
    fn condition_threshold_in_single_precision() {
        assert!(f32::max_condition() < 1e6);
        assert_eq!(f64::max_condition(), 1e12);
    }
}
