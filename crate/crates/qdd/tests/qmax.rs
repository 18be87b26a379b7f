mod common;

use proptest::prelude::*;
use qdd::grid::Mesh;
use qdd::qmax::{self, QmaxError, SolveOptions};
use std::f64::consts::PI;

/// `Σ_k exp(−ħ²·4sin²(πk/N)·N²)` summed over `k = 0..N`.
fn partition_oracle(hbar: f64, n: usize) -> f64 {
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let s = (PI * k as f64 / nf).sin();
            (-hbar * hbar * 4.0 * s * s * nf * nf).exp()
        })
        .sum()
}

#[test]
fn partition_function_matches_closed_form() {
    for (hbar, n) in [(0.1, 8), (0.05, 64), (1.0, 5), (0.5, 32)] {
        let mesh = Mesh::new(n).unwrap();
        let z = qmax::partition_function(hbar, &mesh);
        assert!((z - partition_oracle(hbar, n)).abs() < 1e-12 * z);
    }
}

#[test]
fn uniform_density_has_constant_potential() {
    // exp(ħ²Δ + c) with c = −log Z has diagonal Z·e^c/N = δ.
    for (hbar, n) in [(0.1, 16), (0.3, 7)] {
        let mesh = Mesh::new(n).unwrap();
        let state = qmax::solve_potential(&vec![1.0; n], hbar, &mesh, &SolveOptions::default()).unwrap();
        let c = -partition_oracle(hbar, n).ln();
        for a in &state.potential {
            assert!((a - c).abs() < 1e-11, "{a} vs {c}");
        }
        // the uniform state is the entropy minimiser: ℍ = −log Z
        assert!((state.entropy - c).abs() < 1e-11);
    }
}

#[test]
fn quantum_exponential_matches_extended_precision() {
    let mesh = Mesh::new(12).unwrap();
    let a: Vec<f64> = (0..12).map(|j| (0.7 * j as f64).sin() - 0.3).collect();
    let (n, m) = qmax::quantum_exponential(&a, 0.2, &mesh).unwrap();
    let oracle = common::maxwellian_matrix_dd(&a, 0.2, &mesh);
    assert!((&m - &oracle).amax() < 1e-14);
    for j in 0..12 {
        assert!((n[j] * mesh.delta() - oracle[(j, j)]).abs() < 1e-14);
    }
}

#[test]
fn log_mean_closed_forms() {
    assert!((qmax::log_mean_exp(1.0, 0.0) - 1.718_281_828_459_045_2).abs() < 1e-15);
    // (e^{-3} − e^{-40})/37
    assert!((qmax::log_mean_exp(-40.0, -3.0) - 0.001_345_596_442_374_701).abs() < 1e-18);
    assert_eq!(qmax::log_mean_exp(2.0, 2.0), 2f64.exp());
}

#[test]
fn nu_coefficients_read_the_off_diagonals() {
    let mesh = Mesh::new(4).unwrap();
    let m = nalgebra::DMatrix::from_fn(4, 4, |i, j| (1 + i + 10 * j) as f64);
    let (plus, minus) = qmax::nu_coefficients(&m, &mesh);
    // ν⁺_k = M_{k,k+1}/δ, ν⁻_k = M_{k,k−1}/δ
    assert_eq!(plus, vec![44.0, 88.0, 132.0, 16.0]);
    assert_eq!(minus, vec![124.0, 8.0, 52.0, 96.0]);
}

#[test]
fn rejects_bad_input() {
    let mesh = Mesh::new(4).unwrap();
    let opts = SolveOptions::default();
    assert!(matches!(
        qmax::solve_potential(&[1.0, 0.0, 1.0, 2.0], 0.1, &mesh, &opts),
        Err(QmaxError::NonPositiveDensity { index: 1, .. })
    ));
    assert!(matches!(
        qmax::solve_potential(&[1.0; 3], 0.1, &mesh, &opts),
        Err(QmaxError::Dimension { expected: 4, got: 3 })
    ));
}

#[test]
fn warm_start_saves_iterations() {
    let mesh = Mesh::new(16).unwrap();
    let n: Vec<f64> = (0..16).map(|j| 1.0 + 0.4 * (2.0 * PI * j as f64 / 16.0).cos()).collect();
    let cold = qmax::solve_potential(&n, 0.1, &mesh, &SolveOptions::default()).unwrap();
    let opts = SolveOptions {
        warm_start: Some(cold.potential.clone()),
        ..SolveOptions::default()
    };
    let warm = qmax::solve_potential(&n, 0.1, &mesh, &opts).unwrap();
    assert!(warm.iterations <= 1);
    assert!(cold.iterations > warm.iterations);
}

#[test]
fn free_energy_of_a_maxwellian_is_its_entropy() {
    let mesh = Mesh::new(10).unwrap();
    let n: Vec<f64> = (0..10).map(|j| 0.5 + (j % 3) as f64).collect();
    let mass: f64 = n.iter().sum::<f64>() * mesh.delta();
    let n: Vec<f64> = n.iter().map(|v| v / mass).collect();
    let s = qmax::solve_potential(&n, 0.2, &mesh, &SolveOptions::default()).unwrap();
    let f = qmax::free_energy(&s.matrix, 0.2, &mesh).unwrap();
    assert!((f - s.entropy).abs() < 1e-10);
}

fn density(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..3.0, n)
}

fn case() -> impl Strategy<Value = (usize, Vec<f64>, f64)> {
    (2usize..24).prop_flat_map(|n| (Just(n), density(n), prop::sample::select(vec![0.05, 0.1, 0.5, 1.0])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solved_states_satisfy_the_bounds((n, raw, hbar) in case()) {
        let mesh = Mesh::new(n).unwrap();
        let mass: f64 = raw.iter().sum::<f64>() * mesh.delta();
        let dens: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let s = qmax::solve_potential(&dens, hbar, &mesh, &SolveOptions::default()).unwrap();
        let (back, _) = qmax::quantum_exponential(&s.potential, hbar, &mesh).unwrap();
        for (a, b) in back.iter().zip(&dens) {
            prop_assert!((a - b).abs() < 1e-9 * b);
        }
        prop_assert!(s.entropy >= qmax::entropy_floor(hbar) - 1e-12);
        let nu_mass: f64 = s.nu_plus.iter().sum::<f64>() * mesh.delta();
        prop_assert!(nu_mass <= 1.0 + 1e-12);
        prop_assert!(s.nu_plus.iter().all(|v| *v > 0.0));
        let log_z = qmax::partition_function(hbar, &mesh).ln();
        let amax = s.potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let amin = s.potential.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(amin <= -log_z + 1e-10);
        prop_assert!(amax >= -log_z - 1e-10);
    }

    #[test]
    fn dual_jacobian_matches_central_differences((n, raw, hbar) in case()) {
        let mesh = Mesh::new(n).unwrap();
        let a: Vec<f64> = raw.iter().map(|v| v.ln()).collect();
        let jac = qmax::dual_jacobian(&a, hbar, &mesh).unwrap();
        // entry roundoff grows with ħ²‖Δ‖, so the step balances it against h²
        let h = 1e-4;
        let mut fd = nalgebra::DMatrix::zeros(n, n);
        for j in 0..n {
            let mut up = a.clone();
            let mut dn = a.clone();
            up[j] += h;
            dn[j] -= h;
            let (nu, _) = qmax::quantum_exponential(&up, hbar, &mesh).unwrap();
            let (nd, _) = qmax::quantum_exponential(&dn, hbar, &mesh).unwrap();
            for i in 0..n {
                fd[(i, j)] = (nu[i] - nd[i]) * mesh.delta() / (2.0 * h);
            }
        }
        prop_assert!((&jac - &fd).norm() <= 1e-6 * jac.norm());
    }

    #[test]
    fn jacobian_is_symmetric_positive_definite((n, raw, hbar) in case()) {
        let mesh = Mesh::new(n).unwrap();
        let a: Vec<f64> = raw.iter().map(|v| v.ln()).collect();
        let jac = qmax::dual_jacobian(&a, hbar, &mesh).unwrap();
        prop_assert!((&jac - jac.transpose()).amax() < 1e-14 * jac.amax());
        prop_assert!(jac.clone().cholesky().is_some());
    }
}
