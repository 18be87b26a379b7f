use proptest::prelude::*;
use qdd::grid::Mesh;
use qdd::kernels::quadrature::GaussJacobi;
use qdd::kernels::{self, AuxiliaryOptions, HeatKernelParams, KernelError};
use statrs::function::beta::beta;

/// `θ₃(πz, e^{−4π²ħ²t})`, 20 digits.
const THETA: [(f64, f64, f64, f64); 6] = [
    (1.0, 1.0, 0.0, 1.000_000_000_000_000_014_3),
    (0.1, 1.0, 0.3, 0.297_339_221_626_016_999_34),
    (0.1, 0.01, 0.0, 28.209_479_177_387_812_488),
    (0.1, 0.01, 0.05, 0.054_457_105_758_817_746_505),
    (0.5, 0.2, 0.45, 0.736_377_771_233_686_749_5),
    (0.1, 1e-4, 0.01, 3.917_716_632_754_345_005_5e-9),
];

#[test]
fn heat_kernel_matches_theta_values() {
    for (hbar, t, z, expect) in THETA {
        let p = HeatKernelParams::new(hbar);
        let k = kernels::heat_kernel(t, z, &p).unwrap();
        assert!((k - expect).abs() < 1e-14 * expect.max(1.0), "ħ={hbar} t={t} z={z}: {k}");
        // periodic and even
        assert!((kernels::heat_kernel(t, z + 3.0, &p).unwrap() - k).abs() < 1e-13 * expect.max(1.0));
        assert!((kernels::heat_kernel(t, -z, &p).unwrap() - k).abs() < 1e-13 * expect.max(1.0));
    }
}

#[test]
fn heat_kernel_has_unit_mass() {
    let rule = GaussJacobi::legendre(80);
    for (hbar, t) in [(1.0, 0.01), (0.1, 1.0), (0.3, 0.5)] {
        let p = HeatKernelParams::new(hbar);
        let mass = rule.integrate_unit(|x| kernels::heat_kernel(t, x, &p).unwrap());
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
    }
}

#[test]
fn non_positive_times_are_rejected() {
    let p = HeatKernelParams::new(0.1);
    assert!(matches!(kernels::heat_kernel(-1.0, 0.0, &p), Err(KernelError::NonPositiveTime(_))));
    let mesh = Mesh::new(4).unwrap();
    assert!(kernels::discrete_duhamel_check(&[0.0; 4], &mesh, &p, 0.0, &GaussJacobi::legendre(4)).is_err());
    assert!(kernels::kernel_error_report(&[8, 16], &[1.5], &p).is_err());
}

#[test]
fn discrete_kernel_is_a_column_of_the_heat_matrix() {
    let mesh = Mesh::new(10).unwrap();
    let (hbar, t) = (0.07, 0.6);
    let p = HeatKernelParams::new(hbar);
    let heat = (mesh.laplacian_matrix() * (hbar * hbar * t)).exp() / mesh.delta();
    for j in 0..10 {
        let k = kernels::discrete_heat_kernel(t, j, &mesh, &p);
        assert!((k - heat[(j, 0)]).abs() < 1e-12, "{j}: {k} vs {}", heat[(j, 0)]);
    }
}

#[test]
fn gauss_jacobi_is_exact_on_polynomials() {
    // ∫ (1−x)^{1/2} (1+x)^{−3/10} x⁵ dx over [−1, 1]
    let g = GaussJacobi::new(3, 0.5, -0.3);
    let q: f64 = g.nodes.iter().zip(&g.weights).map(|(x, w)| w * x.powi(5)).sum();
    assert!((q - -0.470_819_353_628_706_599_57).abs() < 1e-14, "{q}");
}

#[test]
fn memory_integral_without_damping_is_a_beta_function() {
    let rule = GaussJacobi::new(16, -0.5, -0.25);
    for t in [1e-4f64, 0.3, 1.0] {
        let expect = t.powf(0.25) * beta(0.5, 0.75);
        assert!((kernels::memory_integral(t, 0.0, &rule) - expect).abs() < 1e-13);
    }
    assert!(kernels::memory_integral(1.0, 5.0, &rule) < beta(0.5, 0.75));
}

#[test]
fn contraction_weight_grows_with_the_potential() {
    let p = HeatKernelParams::new(0.5);
    assert_eq!(kernels::contraction_weight(0.0, &p).unwrap(), 0.0);
    let w: Vec<f64> = [0.1, 1.0, 10.0].iter().map(|c| kernels::contraction_weight(*c, &p).unwrap()).collect();
    assert!(w[0] <= w[1] && w[1] <= w[2] && w[2] > 0.0);
    assert!(kernels::contraction_weight(f64::NAN, &p).is_err());
}

#[test]
fn discrete_duhamel_identity_holds() {
    let mesh = Mesh::new(12).unwrap();
    let a: Vec<f64> = mesh.sites().iter().map(|&x| kernels::cosine_potential(x)).collect();
    let p = HeatKernelParams::new(0.1);
    let res = kernels::discrete_duhamel_check(&a, &mesh, &p, 1.0, &GaussJacobi::legendre(16)).unwrap();
    assert!(res < 1e-6, "{res}");
    assert!(kernels::solution_kernel_residual(&a, &mesh, &p, 0.5, 1e-4).unwrap() < 1e-5);
}

#[test]
fn constant_potential_scales_the_heat_kernel() {
    // with A ≡ c the solution kernel is e^{ct}𝔎^t, so G¹ = (e^c − 1)𝔎¹
    let c = 0.3;
    let p = HeatKernelParams::new(0.2);
    let dens = kernels::continuum_quantum_exponential(|_| c, 16, &p, &AuxiliaryOptions::default()).unwrap();
    let table = &dens.table;
    for &(x, y) in &[(0.0, 0.0), (0.1, 0.35), (0.8, 0.2)] {
        let expect = c.exp_m1() * kernels::heat_kernel(1.0, x - y, &p).unwrap();
        assert!((table.evaluate(table.last(), x, y) - expect).abs() < 1e-9);
    }
    let k0 = kernels::heat_kernel(1.0, 0.0, &p).unwrap();
    assert!((dens.eval(0.42) - c.exp() * k0).abs() < 1e-9);
    assert!(table.symmetry_defect() < 1e-10);
}

#[test]
fn auxiliary_solver_rejects_odd_working_grids() {
    let p = HeatKernelParams::new(0.2);
    assert!(kernels::solve_auxiliary_kernel(|_| 0.0, 7, &p, &AuxiliaryOptions::default()).is_err());
    assert!(kernels::solve_auxiliary_kernel(|_| f64::NAN, 8, &p, &AuxiliaryOptions::default()).is_err());
}

proptest! {
    #[test]
    fn fitted_order_recovers_power_laws(c in 0.01f64..100.0, order in 0.5f64..4.0) {
        let d: [f64; 4] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let e: Vec<f64> = d.iter().map(|x| c * x.powf(order)).collect();
        prop_assert!((kernels::fitted_order(&d, &e) - order).abs() < 1e-10);
    }

    #[test]
    fn discrete_kernel_has_unit_mass(n in 2usize..40, t in 0.001f64..2.0) {
        let mesh = Mesh::new(n).unwrap();
        let p = HeatKernelParams::new(0.3);
        let mass: f64 = (0..n).map(|j| kernels::discrete_heat_kernel(t, j, &mesh, &p)).sum::<f64>() * mesh.delta();
        prop_assert!((mass - 1.0).abs() < 1e-12);
    }
}
