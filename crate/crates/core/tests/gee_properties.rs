// the hand-written oracles index like the textbook formulas
#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xover_core::fixtures::{fixture, fixture_names, misspecification_structures, CATALOG};
use xover_core::*;

fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r / s).collect()
}

fn all_problems() -> Vec<(String, DesignProblem<f64>)> {
    let mut out = Vec::new();
    for name in fixture_names() {
        for id in StructureId::ALL {
            out.push((format!("{name}/{id}"), fixture::<f64>(&name, id).unwrap()));
        }
    }
    out
}

/// Textbook Gauss-Jordan inverse with partial pivoting, kept separate from
/// the library's LU path.
fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| aug[x][c].abs().partial_cmp(&aug[y][c].abs()).unwrap())
            .unwrap();
        aug.swap(c, piv);
        let d = aug[c][c];
        for v in aug[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = aug[r][c];
                for j in 0..2 * n {
                    aug[r][j] -= f * aug[c][j];
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

#[test]
fn information_matches_naive_summation() {
    let prob = fixture::<f64>("ab-ba-theta2", StructureId::Corr1).unwrap();
    let a = assemble(&prob).unwrap();
    let w = [0.5, 0.5];
    let u = a.info_matrix(&w, 1.0).unwrap();
    // rebuild every block from scratch: D, C, W = D^{1/2} C D^{1/2}, G = D X
    let theta = prob.theta();
    let mut naive = vec![vec![0.0; 4]; 4];
    for (k, seq) in prob.sequences().iter().enumerate() {
        let x = build_design_matrix::<f64>(seq, 2, 2).unwrap();
        let mut d = [0.0; 2];
        for i in 0..2 {
            let eta: f64 = (0..4).map(|j| x[(i, j)] * theta[j]).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            d[i] = mu * (1.0 - mu);
        }
        let c = [[1.0, 0.1], [0.1, 1.0]];
        let wm: Vec<Vec<f64>> = (0..2)
            .map(|i| (0..2).map(|j| d[i].sqrt() * c[i][j] * d[j].sqrt()).collect())
            .collect();
        let wi = gauss_jordan_inverse(&wm);
        for r in 0..4 {
            for s in 0..4 {
                let mut acc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        acc += d[i] * x[(i, r)] * wi[i][j] * d[j] * x[(j, s)];
                    }
                }
                naive[r][s] += w[k] * acc;
            }
        }
    }
    for r in 0..4 {
        for s in 0..4 {
            assert!((u[(r, s)] - naive[r][s]).abs() < 1e-14, "U[{r},{s}]");
        }
    }
    // τ variance from an independent inversion of the 4x4 U
    let inv = gauss_jordan_inverse(&u.to_rows());
    let rep = a.variance_report(&w, 1.0, None).unwrap();
    assert_eq!(rep.var_tau.rows(), 1);
    assert!((rep.var_tau[(0, 0)] - inv[2][2]).abs() < 1e-10 * inv[2][2].abs());
}

#[test]
fn sandwich_collapses_when_truth_equals_working() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, prob) in all_problems() {
        let a = assemble(&prob).unwrap();
        for _ in 0..3 {
            let w = random_weights(&mut rng, a.len());
            let model = a.variance_report(&w, 1.0, None).unwrap();
            let sandwich = a.variance_report(&w, 1.0, Some(prob.correlation())).unwrap();
            let diff = sandwich.var_theta.max_abs_diff(&model.var_theta);
            assert!(diff < 1e-8, "{name}: {diff:e}");
            assert!(sandwich.used_sandwich && !model.used_sandwich);
        }
    }
}

#[test]
fn zero_weight_equals_deleting_the_sequence() {
    let prob = fixture::<f64>("abb-baa-aaa-bbb-theta1", StructureId::Corr4).unwrap();
    let a = assemble(&prob).unwrap();
    let full = a.variance_report(&[0.3, 0.5, 0.2, 0.0], 1.0, None).unwrap();
    let reduced_prob = prob.with_sequences(prob.sequences()[..3].to_vec()).unwrap();
    let reduced = assemble(&reduced_prob)
        .unwrap()
        .variance_report(&[0.3, 0.5, 0.2], 1.0, None)
        .unwrap();
    assert_eq!(full.var_theta, reduced.var_theta);
    assert_eq!(full.det_tau, reduced.det_tau);
}

#[test]
fn objective_ignores_sequence_order() {
    let prob = fixture::<f64>("latin-square-theta1", StructureId::Corr6).unwrap();
    let a = assemble(&prob).unwrap();
    let w = [0.1, 0.2, 0.3, 0.4];
    let f = a.objective(&w).unwrap();
    let mut seqs = prob.sequences().to_vec();
    seqs.reverse();
    let b = assemble(&prob.with_sequences(seqs).unwrap()).unwrap();
    let g = b.objective(&[0.4, 0.3, 0.2, 0.1]).unwrap();
    assert!((f - g).abs() < 1e-12 * f);
    let design = Design::new(prob.sequences().to_vec(), w.to_vec()).unwrap();
    assert!((b.objective_for(&design).unwrap() - f).abs() < 1e-12 * f);
}

#[test]
fn duplicated_sequence_only_total_weight_matters() {
    let prob = fixture::<f64>("ab-ba-theta1", StructureId::Corr1).unwrap();
    let seqs = vec![
        prob.sequences()[0].clone(),
        prob.sequences()[0].clone(),
        prob.sequences()[1].clone(),
    ];
    let a = GeeAssembly::build(&seqs, 2, 2, Family::Binary, prob.correlation(), None, prob.theta()).unwrap();
    let f1 = a.objective(&[0.1, 0.2, 0.7]).unwrap();
    let f2 = a.objective(&[0.3, 0.0, 0.7]).unwrap();
    assert!((f1 - f2).abs() < 1e-12 * f1);
}

#[test]
fn determinant_scales_with_subjects() {
    for name in ["ab-ba-theta1", "latin-square-theta2"] {
        let prob = fixture::<f64>(name, StructureId::Corr2).unwrap();
        let a = assemble(&prob).unwrap();
        let w = vec![1.0 / a.len() as f64; a.len()];
        let k = (prob.treatments() - 1) as i32;
        let d1 = a.variance_report(&w, 1.0, None).unwrap().det_tau;
        let d50 = a.variance_report(&w, 50.0, None).unwrap().det_tau;
        assert!((d50 - d1 * 50f64.powi(-k)).abs() < 1e-10 * d50);
        assert!((a.objective(&w).unwrap() - d1).abs() < 1e-12 * d1);
    }
}

#[test]
fn adding_mass_never_increases_the_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in ["ab-ba-aa-bb-theta1", "abb-baa-aab-bba-theta2", "latin-square-theta1"] {
        let prob = fixture::<f64>(name, StructureId::Corr1).unwrap();
        let a = assemble(&prob).unwrap();
        for _ in 0..20 {
            let w = random_weights(&mut rng, a.len());
            let mut more = w.clone();
            let j = rng.random_range(0..a.len());
            more[j] += rng.random_range(0.01..0.5);
            let before = a.variance_report(&w, 1.0, None).unwrap().det_tau;
            let after = a.variance_report(&more, 1.0, None).unwrap().det_tau;
            assert!(after <= before * (1.0 + 1e-12), "{name}");
        }
    }
}

#[test]
fn working_covariance_inverse_round_trip() {
    for (name, prob) in all_problems() {
        let a = assemble(&prob).unwrap();
        for b in a.blocks() {
            let eye = b.w_inv.matmul(&b.working_covariance());
            assert!(
                eye.max_abs_diff(&Matrix::identity(prob.periods())) < 1e-8,
                "{name} {}",
                b.sequence
            );
            for i in 0..prob.periods() {
                for j in 0..prob.parameter_count() {
                    assert_eq!(b.dmu[(i, j)], b.variance[i] * b.x[(i, j)]);
                }
            }
        }
    }
}

#[test]
fn mean_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in CATALOG {
        let prob = spec.problem::<f64>(0, CorrelationSpec::Independence).unwrap();
        let (p, t, m) = (prob.periods(), prob.treatments(), prob.parameter_count());
        for _ in 0..10 {
            let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.5..1.5)).collect();
            let a = assemble(&prob.with_theta(theta.clone()).unwrap()).unwrap();
            for b in a.blocks() {
                for j in 0..m {
                    let h = 1e-6;
                    let mut up = theta.clone();
                    let mut dn = theta.clone();
                    up[j] += h;
                    dn[j] -= h;
                    let mu_up = mean_vector(prob.family(), &b.sequence, p, t, &up).unwrap();
                    let mu_dn = mean_vector(prob.family(), &b.sequence, p, t, &dn).unwrap();
                    for i in 0..p {
                        let fd = (mu_up[i] - mu_dn[i]) / (2.0 * h);
                        let an = b.dmu[(i, j)];
                        let err = (fd - an).abs() / an.abs().max(1e-3);
                        assert!(err < 1e-5, "{} {} ({i},{j}): {an} vs {fd}", spec.key, b.sequence);
                    }
                }
            }
        }
    }
}

fn check_gradient(a: &GeeAssembly<f64>, w: &[f64], label: &str) {
    let (_, g) = a.log_objective_with_gradient(w).unwrap();
    for j in 0..w.len() {
        let h = 1e-6;
        let mut up = w.to_vec();
        let mut dn = w.to_vec();
        up[j] += h;
        dn[j] -= h;
        let fd = (a.log_objective(&up).unwrap() - a.log_objective(&dn).unwrap()) / (2.0 * h);
        let err = (fd - g[j]).abs() / g[j].abs().max(1e-2);
        assert!(err < 1e-5, "{label} component {j}: analytic {} vs fd {fd}", g[j]);
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (name, prob) in all_problems() {
        let a = assemble(&prob).unwrap();
        let rounds = if a.len() > 4 { 2 } else { 10 };
        for _ in 0..rounds {
            let w = random_weights(&mut rng, a.len());
            check_gradient(&a, &w, &name);
        }
    }
}

#[test]
fn sandwich_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = fixture::<f64>("latin-square-theta1", StructureId::Corr1).unwrap();
    let structures = misspecification_structures::<f64>();
    for (tn, truth) in &structures {
        for (wn, working) in &structures {
            if tn == wn {
                continue;
            }
            let prob = base
                .with_correlation(working.clone())
                .unwrap()
                .with_true_correlation(Some(truth.clone()))
                .unwrap();
            let a = assemble(&prob).unwrap();
            assert!(a.uses_sandwich());
            for _ in 0..2 {
                let w = random_weights(&mut rng, a.len());
                check_gradient(&a, &w, &format!("{tn}/{wn}"));
            }
        }
    }
}

#[test]
fn relabeling_two_treatments_preserves_means() {
    // swapping A and B maps λ → λ+τ, β_i → β_i+ρ (i ≥ 2), τ → −τ, ρ → −ρ
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for spec in CATALOG.iter().filter(|s| s.t == 2) {
        let p = spec.p;
        for _ in 0..5 {
            let theta: Vec<f64> = (0..p + 2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (tau, rho) = (theta[p], theta[p + 1]);
            let mut swapped = theta.clone();
            swapped[0] += tau;
            for b in swapped.iter_mut().take(p).skip(1) {
                *b += rho;
            }
            swapped[p] = -tau;
            swapped[p + 1] = -rho;
            for s in spec.sequence_list() {
                let relabeled = s.relabel(&[2, 1]);
                let a = mean_vector(spec.family, &s, p, 2, &theta).unwrap();
                let b = mean_vector(spec.family, &relabeled, p, 2, &swapped).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn single_precision_tracks_double() {
    let p64 = fixture::<f64>("latin-square-theta2", StructureId::Corr2).unwrap();
    let p32 = fixture::<f32>("latin-square-theta2", StructureId::Corr2).unwrap();
    let f64v = assemble(&p64).unwrap().log_objective(&[0.25; 4]).unwrap();
    let f32v = assemble(&p32).unwrap().log_objective(&[0.25f32; 4]).unwrap();
    assert!((f64v - f64::from(f32v)).abs() < 1e-3 * f64v.abs().max(1.0));
}

#[test]
fn inverse_working_covariance_is_diagonally_dominant() {
    // Latin square, second θ, compound symmetry ρ = 0.2: W⁻¹ is diagonally
    // dominant with positive diagonal and negative off-diagonal entries
    let prob = fixture::<f64>("latin-square-theta2", StructureId::Corr1)
        .unwrap()
        .with_correlation(CorrelationSpec::CompoundSymmetric(0.2))
        .unwrap();
    let a = assemble(&prob).unwrap();
    for b in a.blocks() {
        for i in 0..4 {
            let off: f64 = (0..4).filter(|&j| j != i).map(|j| b.w_inv[(i, j)].abs()).sum();
            assert!(b.w_inv[(i, i)] > off);
            assert!(b.w_inv[(i, i)] > 4.0 && b.w_inv[(i, i)] < 6.5);
            for j in (0..4).filter(|&j| j != i) {
                assert!(b.w_inv[(i, j)] < 0.0);
            }
        }
    }
}
