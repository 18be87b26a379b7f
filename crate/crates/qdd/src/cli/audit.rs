//! Randomised property suites. Each check reports its worst violation and
//! passes when that stays within the tolerance.

use crate::grid::{self, Mesh};
use crate::liouville;
use crate::nlqdd;
use crate::qmax::{self, MaxwellianState, SolveOptions};
use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type CMatrix = DMatrix<Complex<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl CheckResult {
    /// Passes when `worst ≤ tolerance`.
    pub fn at_most(name: &str, worst: f64, tolerance: f64, trials: usize) -> Self {
        Self {
            name: name.into(),
            passed: worst <= tolerance,
            worst,
            tolerance,
            trials,
        }
    }

    /// Passes when `worst > tolerance`; used for negative controls.
    pub fn exceeds(name: &str, worst: f64, tolerance: f64, trials: usize) -> Self {
        Self {
            name: name.into(),
            passed: worst > tolerance,
            worst,
            tolerance,
            trials,
        }
    }
}

fn mesh(n: usize) -> Mesh {
    Mesh::new(n).expect("audit sizes are validated to be at least 2")
}

/// Trigonometric potential `c + Σ_{k≤3} (a_k cos + b_k sin)(2πkx)·amp/k` at the sites.
pub fn random_smooth_potential(rng: &mut ChaCha8Rng, mesh: &Mesh, amp: f64) -> Vec<f64> {
    let c = rng.gen_range(-1.0..1.0);
    let coef: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    mesh.sites()
        .iter()
        .map(|&x| {
            c + coef
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let k = (i + 1) as f64;
                    amp / k * (a * (2.0 * PI * k * x).cos() + b * (2.0 * PI * k * x).sin())
                })
                .sum::<f64>()
        })
        .collect()
}

fn normalise(raw: Vec<f64>, mesh: &Mesh) -> Vec<f64> {
    let mass = mesh.delta() * raw.iter().sum::<f64>();
    raw.iter().map(|v| v / mass).collect()
}

/// `exp` of a random trigonometric potential, normalised to unit mass.
pub fn random_smooth_density(rng: &mut ChaCha8Rng, mesh: &Mesh) -> Vec<f64> {
    normalise(random_smooth_potential(rng, mesh, 0.8).iter().map(|v| v.exp()).collect(), mesh)
}

/// Unit-mass positive density; alternates smooth and site-wise rough draws.
pub fn random_density(rng: &mut ChaCha8Rng, mesh: &Mesh) -> Vec<f64> {
    if rng.gen_bool(0.5) {
        random_smooth_density(rng, mesh)
    } else {
        normalise((0..mesh.n_cells()).map(|_| rng.gen_range(0.2..2.0)).collect(), mesh)
    }
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    });
    (&g + g.adjoint()) * Complex::new(0.5, 0.0)
}

/// `GG*/tr(GG*)`, occasionally of reduced rank.
pub fn random_density_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let rank = if n > 1 && rng.gen_bool(0.2) { rng.gen_range(1..n) } else { n };
    let g = CMatrix::from_fn(n, rank, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let r = &g * g.adjoint();
    let tr = r.trace().re;
    r * Complex::new(1.0 / tr, 0.0)
}

fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let sym = (m + m.adjoint()) * Complex::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| Complex::new(f(*l), 0.0)),
    );
    &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b).trace().re
}

fn solve(n: &[f64], hbar: f64, mesh: &Mesh) -> Option<MaxwellianState> {
    qmax::solve_potential(n, hbar, mesh, &SolveOptions::default()).ok()
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// `quantum_exponential` followed by `solve_potential` on random smooth potentials.
/// Returns the sup error on `A` and the largest Newton count.
pub fn round_trip(
    rng: &mut ChaCha8Rng,
    trials: usize,
    sizes: &[usize],
    hbar: f64,
) -> (CheckResult, CheckResult) {
    let mut worst: f64 = 0.0;
    let mut iters = 0usize;
    let mut count = 0;
    for &n in sizes {
        let m = mesh(n);
        for _ in 0..trials {
            let a = random_smooth_potential(rng, &m, 1.0);
            let (dens, _) = match qmax::quantum_exponential(&a, hbar, &m) {
                Ok(v) => v,
                Err(_) => {
                    worst = f64::INFINITY;
                    continue;
                }
            };
            count += 1;
            match solve(&dens, hbar, &m) {
                Some(s) => {
                    let e = s.potential.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    worst = worst.max(e);
                    iters = iters.max(s.iterations);
                }
                None => worst = f64::INFINITY,
            }
        }
    }
    (
        CheckResult::at_most("round_trip_sup_error", worst, 1e-9, count),
        CheckResult::at_most("round_trip_newton_iterations", iters as f64, 30.0, count),
    )
}

/// Relative Frobenius error of `dual_jacobian` against central differences.
pub fn jacobian_fd(rng: &mut ChaCha8Rng, trials: usize, n: usize, hbar: f64) -> CheckResult {
    let m = mesh(n);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a = random_smooth_potential(rng, &m, 1.0);
        let Ok(jac) = qmax::dual_jacobian(&a, hbar, &m) else {
            worst = f64::INFINITY;
            continue;
        };
        let mut fd = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[j] += h;
            am[j] -= h;
            let dp = qmax::quantum_exponential(&ap, hbar, &m).expect("finite potential").1;
            let dm = qmax::quantum_exponential(&am, hbar, &m).expect("finite potential").1;
            for i in 0..n {
                fd[(i, j)] = (dp[(i, i)] - dm[(i, i)]) / (2.0 * h);
            }
        }
        worst = worst.max((&jac - &fd).norm() / jac.norm());
    }
    CheckResult::at_most("jacobian_finite_difference", worst, 1e-6, trials)
}

/// Solved states on random unit-mass densities, shared by the Maxwellian bound checks.
pub fn random_states(
    rng: &mut ChaCha8Rng,
    trials: usize,
    sizes: &[usize],
    hbars: &[f64],
) -> Vec<MaxwellianState> {
    (0..trials)
        .filter_map(|_| {
            let m = mesh(*pick(rng, sizes));
            let hbar = *pick(rng, hbars);
            let n = random_density(rng, &m);
            solve(&n, hbar, &m)
        })
        .collect()
}

pub fn constraint_satisfaction(states: &[MaxwellianState]) -> CheckResult {
    let worst = states
        .iter()
        .map(|s| {
            let d = s.mesh.delta();
            let scale = s.density.iter().fold(0.0_f64, |a, v| a.max(d * v));
            let res = (0..s.density.len())
                .map(|j| (s.matrix[(j, j)] - d * s.density[j]).abs())
                .fold(0.0, f64::max);
            res / scale
        })
        .fold(0.0, f64::max);
    CheckResult::at_most("constraint_satisfaction", worst, 1e-11, states.len())
}

/// Perturbs one diagonal entry of each Maxwellian; the constraint check must notice.
pub fn negative_control(states: &[MaxwellianState]) -> CheckResult {
    let corrupted: Vec<MaxwellianState> = states
        .iter()
        .map(|s| {
            let mut c = s.clone();
            c.matrix[(0, 0)] *= 1.0 + 1e-6;
            c
        })
        .collect();
    let detected = constraint_satisfaction(&corrupted);
    let least = corrupted
        .iter()
        .map(|c| constraint_satisfaction(std::slice::from_ref(c)).worst)
        .fold(f64::INFINITY, f64::min);
    CheckResult::exceeds("negative_control_detected", least, detected.tolerance, states.len())
}

pub fn entropy_floor(states: &[MaxwellianState]) -> CheckResult {
    let worst = states
        .iter()
        .map(|s| qmax::entropy_floor(s.hbar) - s.entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    CheckResult::at_most("entropy_floor", worst, 1e-12, states.len())
}

/// `min A ≤ −log Z ≤ max A` and `max A ≤ 2(ħ/δ)²`.
pub fn potential_bounds(states: &[MaxwellianState]) -> (CheckResult, CheckResult) {
    let mut updown = f64::NEG_INFINITY;
    let mut below = f64::NEG_INFINITY;
    for s in states {
        let log_z = qmax::partition_function(s.hbar, &s.mesh).ln();
        let lo = s.potential.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        updown = updown.max((lo + log_z).max(-log_z - hi));
        let d = s.mesh.delta();
        below = below.max(hi - 2.0 * (s.hbar / d).powi(2));
    }
    (
        CheckResult::at_most("potential_brackets_log_partition", updown, 1e-10, states.len()),
        CheckResult::at_most("potential_upper_bound", below, 1e-10, states.len()),
    )
}

/// `δΣν± ≤ 1` and `min ν± > 0`.
pub fn nu_bounds(states: &[MaxwellianState]) -> (CheckResult, CheckResult) {
    let mut sum = f64::NEG_INFINITY;
    let mut neg = f64::NEG_INFINITY;
    for s in states {
        let d = s.mesh.delta();
        for nu in [&s.nu_plus, &s.nu_minus] {
            sum = sum.max(d * nu.iter().sum::<f64>() - 1.0);
            neg = neg.max(-nu.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    (
        CheckResult::at_most("nu_mass_bound", sum, 1e-12, states.len()),
        CheckResult {
            passed: neg < 0.0,
            ..CheckResult::at_most("nu_positive", neg, 0.0, states.len())
        },
    )
}

/// `ν⁻(ξ+δ) = ν⁺(ξ)` and `ℍ(n) = free_energy(M)`.
pub fn maxwellian_identities(states: &[MaxwellianState]) -> (CheckResult, CheckResult) {
    let mut sym: f64 = 0.0;
    let mut ent: f64 = 0.0;
    for s in states {
        let m = &s.mesh;
        for k in 0..m.n_cells() {
            sym = sym.max((s.nu_minus[m.next(k)] - s.nu_plus[k]).abs());
        }
        match qmax::free_energy(&s.matrix, s.hbar, m) {
            Ok(f) => ent = ent.max((f - s.entropy).abs()),
            Err(_) => ent = f64::INFINITY,
        }
    }
    (
        CheckResult::at_most("nu_shift_symmetry", sym, 1e-12, states.len()),
        CheckResult::at_most("entropy_equals_free_energy", ent, 1e-9, states.len()),
    )
}

/// `−tr(Δ_δM) ≤ (2/ħ²)(ℍ − ℍ̱_{ħ²/2})`, once from the matrix and once from orbitals.
pub fn h1_by_entropy(states: &[MaxwellianState]) -> (CheckResult, CheckResult) {
    let mut by_trace = f64::NEG_INFINITY;
    let mut by_orbitals = f64::NEG_INFINITY;
    for s in states {
        let m = &s.mesh;
        let rhs = 2.0 / (s.hbar * s.hbar) * (s.entropy - qmax::entropy_floor_half(s.hbar));
        let tol = 1e-10 * rhs.abs().max(1.0);
        by_trace = by_trace.max(-qmax::trace_laplacian(&s.matrix, m) - rhs - tol);
        let (rho, phi) = s.orbitals();
        let lhs: f64 = rho
            .iter()
            .zip(&phi)
            .map(|(r, p)| {
                let dp = grid::forward_difference(p, m);
                r * m.delta() * dp.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        by_orbitals = by_orbitals.max(lhs - rhs - tol);
    }
    (
        CheckResult::at_most("h1_trace_by_entropy", by_trace, 0.0, states.len()),
        CheckResult::at_most("orbital_h1_by_entropy", by_orbitals, 0.0, states.len()),
    )
}

/// Lower bound for the free energy of arbitrary density matrices.
pub fn free_energy_floor(rng: &mut ChaCha8Rng, trials: usize, sizes: &[usize], hbars: &[f64]) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n = *pick(rng, sizes);
        let hbar = *pick(rng, hbars);
        let r = random_density_matrix(rng, n);
        match qmax::free_energy(&r, hbar, &mesh(n)) {
            Ok(f) => worst = worst.max(qmax::entropy_floor(hbar) - f),
            Err(_) => worst = f64::INFINITY,
        }
    }
    CheckResult::at_most("free_energy_floor", worst, 1e-12, trials)
}

/// `tr((S−R)(log S − log R)) ≥ tr((R−S)²)` on density matrices.
pub fn klein(rng: &mut ChaCha8Rng, trials: usize, max_n: usize) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n = rng.gen_range(2..=max_n);
        let r = random_density_matrix(rng, n);
        let s = random_density_matrix(rng, n);
        // Keep both strictly positive so the logarithms are finite.
        let mix = |m: &CMatrix| {
            m * Complex::new(0.999, 0.0) + CMatrix::identity(n, n) * Complex::new(0.001 / n as f64, 0.0)
        };
        let (r, s) = (mix(&r), mix(&s));
        let diff = &s - &r;
        let logs = hermitian_function(&s, f64::ln) - hermitian_function(&r, f64::ln);
        worst = worst.max(trace_product(&diff, &diff) - trace_product(&diff, &logs));
    }
    CheckResult::at_most("klein_inequality", worst, 1e-12, trials)
}

/// `tr((e^{A'} − e^A)(A' − A)) ≥ 0` on Hermitian pairs.
pub fn exp_monotone_trace(rng: &mut ChaCha8Rng, trials: usize, max_n: usize) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n = rng.gen_range(2..=max_n);
        let a = random_hermitian(rng, n, 2.0);
        let b = random_hermitian(rng, n, 2.0);
        let e = hermitian_function(&b, f64::exp) - hermitian_function(&a, f64::exp);
        worst = worst.max(-trace_product(&e, &(&b - &a)));
    }
    CheckResult::at_most("exp_pairing_nonnegative", worst, 1e-12, trials)
}

/// `A ⪯ A' ⇒ tr e^A ≤ tr e^{A'}`.
pub fn trace_monotone(rng: &mut ChaCha8Rng, trials: usize, max_n: usize) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n = rng.gen_range(2..=max_n);
        let a = random_hermitian(rng, n, 2.0);
        let p = CMatrix::from_fn(n, n, |_, _| Complex::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        let b = &a + &p * p.adjoint();
        let ta = hermitian_function(&a, f64::exp).trace().re;
        let tb = hermitian_function(&b, f64::exp).trace().re;
        worst = worst.max((ta - tb) / tb);
    }
    CheckResult::at_most("trace_exp_monotone", worst, 1e-12, trials)
}

/// `δΣ(n[A] − n[A'])(A − A') ≥ 0`.
pub fn monotone_map(rng: &mut ChaCha8Rng, trials: usize, sizes: &[usize], hbar: f64) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let m = mesh(*pick(rng, sizes));
        let a = random_smooth_potential(rng, &m, 1.0);
        let b = random_smooth_potential(rng, &m, 1.0);
        let na = qmax::quantum_exponential(&a, hbar, &m).expect("finite potential").0;
        let nb = qmax::quantum_exponential(&b, hbar, &m).expect("finite potential").0;
        let pairing: f64 = m.delta()
            * (0..a.len()).map(|j| (na[j] - nb[j]) * (a[j] - b[j])).sum::<f64>();
        worst = worst.max(-pairing);
    }
    CheckResult::at_most("quantum_exponential_monotone", worst, 1e-12, trials)
}

/// `nlqdd_rhs` against the double-commutator diagonal of the Maxwellian.
pub fn oracle_equivalence(rng: &mut ChaCha8Rng, trials: usize, sizes: &[usize], hbar: f64) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let m = mesh(*pick(rng, sizes));
        let n = random_density(rng, &m);
        match nlqdd::nlqdd_rhs(&n, hbar, &m, None) {
            Ok((rate, state)) => {
                let oracle = liouville::double_commutator_diag(&state.matrix, hbar, &m);
                let e = rate.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(e);
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    CheckResult::at_most("nlqdd_matches_double_commutator", worst, 1e-10, trials)
}

/// `ω_k ≥ 16k²` for `|k| ≤ N/2`, every `N` from 2 to `max_n`.
pub fn spectrum_lower_bound(max_n: usize) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for n in 2..=max_n {
        let m = mesh(n);
        for k in 0..=(n as i64 / 2) {
            let bound = 16.0 * (k * k) as f64;
            worst = worst.max((bound - grid::omega(&m, k)) / bound.max(1.0));
            count += 1;
        }
    }
    CheckResult::at_most("laplacian_eigenvalue_lower_bound", worst, 1e-12, count)
}

/// `Σ_k e^{−αω_k} ≤ 1 + (√π/4)α^{−1/2}`.
pub fn exponential_sum_bound(sizes: &[usize], alphas: &[f64]) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for &n in sizes {
        let m = mesh(n);
        for &a in alphas {
            let bound = 1.0 + PI.sqrt() / 4.0 / a.sqrt();
            worst = worst.max(grid::exponential_sum(&m, a) - bound);
        }
    }
    CheckResult::at_most("exponential_sum_bound", worst, 1e-12, sizes.len() * alphas.len())
}

/// `δΣ(D⁺f)g + δΣ f D⁻g = 0`.
pub fn summation_by_parts(rng: &mut ChaCha8Rng, trials: usize, sizes: &[usize]) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let m = mesh(*pick(rng, sizes));
        let f: Vec<f64> = (0..m.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..m.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let df = grid::forward_difference(&f, &m);
        let dg = grid::backward_difference(&g, &m);
        let s: f64 = m.delta()
            * (0..f.len()).map(|j| df[j] * g[j] + f[j] * dg[j]).sum::<f64>();
        worst = worst.max(s.abs());
    }
    CheckResult::at_most("summation_by_parts", worst, 1e-12, trials)
}

/// `max|ψ| ≤ 1 + ‖D⁺ψ‖_p` when `‖ψ‖_p = 1`, `p ∈ {1, 2}`.
pub fn h1_linf(rng: &mut ChaCha8Rng, trials: usize, sizes: &[usize]) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..trials {
        let m = mesh(*pick(rng, sizes));
        let p = if i % 2 == 0 { 1.0 } else { 2.0 };
        let raw: Vec<f64> = if rng.gen_bool(0.5) {
            random_smooth_potential(rng, &m, 1.0)
        } else {
            (0..m.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let norm = grid::lp_norm(&raw, p, &m).expect("p ≥ 1");
        if norm == 0.0 {
            continue;
        }
        let psi: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let sup = psi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let grad = grid::lp_norm(&grid::forward_difference(&psi, &m), p, &m).expect("p ≥ 1");
        worst = worst.max(sup - 1.0 - grad);
    }
    CheckResult::at_most("h1_controls_sup", worst, 1e-12, trials)
}

/// `‖∂_x√n‖²_{L²}` by the midpoint rule with `points` nodes.
pub fn continuum_fisher(n: impl Fn(f64) -> f64, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    let eps = 1e-6;
    (0..points)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            let ds = ((n(x + eps)).sqrt() - (n(x - eps)).sqrt()) / (2.0 * eps);
            ds * ds * h
        })
        .sum()
}

/// Discrete Fisher information of cell averages against eight times the continuum one.
pub fn fisher_bound(rng: &mut ChaCha8Rng, trials: usize, sizes: &[usize]) -> CheckResult {
    let mut families: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(super::presets::cosine_bump),
        Box::new(super::presets::gaussian_mixture),
    ];
    for _ in 0..trials {
        let a: Vec<(f64, f64)> = (0..4)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        families.push(Box::new(move |x: f64| {
            let s: f64 = a
                .iter()
                .enumerate()
                .map(|(i, (c, d))| {
                    let k = (i + 1) as f64;
                    (c * (2.0 * PI * k * x).cos() + d * (2.0 * PI * k * x).sin()) / k
                })
                .sum();
            s.exp()
        }));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for f in &families {
        let rhs = 8.0 * continuum_fisher(f, 20_000);
        for &n in sizes {
            let m = mesh(n);
            let avg = grid::cell_average(f, &m).expect("finite profile");
            let lhs = grid::fisher_discrete(&avg, &m).expect("positive profile");
            worst = worst.max(lhs - rhs);
            count += 1;
        }
    }
    CheckResult::at_most("fisher_factor_eight", worst, 1e-12, count)
}

/// Hölder-1/10 seminorm against `2^{6/5}‖f'‖^{4/5}‖F‖^{1/5}` on zero-mean trigonometric polynomials.
pub fn holder_interpolation(rng: &mut ChaCha8Rng, trials: usize) -> CheckResult {
    const GRID: usize = 512;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let degree = rng.gen_range(1..=8);
        let coef: Vec<(f64, f64)> = (0..degree)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let samples: Vec<f64> = (0..GRID)
            .map(|j| {
                let x = j as f64 / GRID as f64;
                coef.iter()
                    .enumerate()
                    .map(|(i, (a, b))| {
                        let w = 2.0 * PI * (i + 1) as f64;
                        a * (w * x).cos() + b * (w * x).sin()
                    })
                    .sum()
            })
            .collect();
        let (mut d2, mut p2) = (0.0, 0.0);
        for (i, (a, b)) in coef.iter().enumerate() {
            let w = 2.0 * PI * (i + 1) as f64;
            d2 += w * w * (a * a + b * b) / 2.0;
            p2 += (a * a + b * b) / (2.0 * w * w);
        }
        let rhs = 2f64.powf(1.2) * d2.sqrt().powf(0.8) * p2.sqrt().powf(0.2);
        worst = worst.max(grid::holder_seminorm(&samples, 0.1) - rhs);
    }
    CheckResult::at_most("holder_interpolation", worst, 0.0, trials)
}

/// Every suite at the given sizes; `trials` scales the random draws.
pub fn run_audit(seed: u64, sizes: &[usize], trials: usize) -> Vec<CheckResult> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hbars = [0.05, 0.1, 0.5];
    let small: Vec<usize> = sizes.iter().copied().filter(|&n| n <= 8).collect();
    let small = if small.is_empty() { vec![2, 4, 8] } else { small };
    let max_small = *small.iter().max().expect("non-empty");

    let mut out = Vec::new();
    let states = random_states(&mut rng, trials, sizes, &hbars);
    out.push(CheckResult::at_most(
        "solver_failures",
        (trials - states.len()) as f64,
        0.0,
        trials,
    ));
    out.push(constraint_satisfaction(&states));
    out.push(negative_control(&states));
    out.push(entropy_floor(&states));
    let (a, b) = potential_bounds(&states);
    out.extend([a, b]);
    let (a, b) = nu_bounds(&states);
    out.extend([a, b]);
    let (a, b) = maxwellian_identities(&states);
    out.extend([a, b]);
    let (a, b) = h1_by_entropy(&states);
    out.extend([a, b]);
    let (a, b) = round_trip(&mut rng, trials.div_ceil(10), sizes, 0.1);
    out.extend([a, b]);
    out.push(jacobian_fd(&mut rng, trials.div_ceil(20), max_small, 0.1));
    out.push(free_energy_floor(&mut rng, trials, sizes, &hbars));
    out.push(klein(&mut rng, 5 * trials, max_small.max(2)));
    out.push(exp_monotone_trace(&mut rng, 5 * trials, max_small.max(2)));
    out.push(trace_monotone(&mut rng, trials, max_small.max(2)));
    out.push(monotone_map(&mut rng, trials, sizes, 0.1));
    out.push(oracle_equivalence(&mut rng, trials.div_ceil(4), sizes, 0.1));
    out.push(spectrum_lower_bound(1024));
    let alphas: Vec<f64> = (0..=16).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect();
    let lt_sizes: Vec<usize> = (1..=10).map(|p| 1usize << p).chain([3, 5, 7, 33, 101]).collect();
    out.push(exponential_sum_bound(&lt_sizes, &alphas));
    out.push(summation_by_parts(&mut rng, trials, sizes));
    out.push(h1_linf(&mut rng, trials, sizes));
    out.push(fisher_bound(&mut rng, trials.div_ceil(20), &[8, 16, 32, 64, 128]));
    out.push(holder_interpolation(&mut rng, trials.div_ceil(10)));
    out
}
