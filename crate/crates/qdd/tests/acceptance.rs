//! Acceptance suite: one line per criterion, nonzero exit on any failure.

mod common;

use qdd::cli::audit::{self, CheckResult};
use qdd::cli::commands::{cauchy_difference, refinement_run};
use qdd::cli::presets::cosine_bump;
use qdd::grid::{self, Mesh};
use qdd::kernels::{self, AuxiliaryOptions, HeatKernelParams};
use qdd::liouville::{self, Form, LiouvilleControls, LiouvilleParams};
use qdd::nlqdd::{self, NlqddControls};
use qdd::qmax;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn from_checks(checks: &[CheckResult]) -> Self {
        let detail = checks
            .iter()
            .map(|c| format!("{} worst {:.3e} (tol {:.1e}, {} trials)", c.name, c.worst, c.tolerance, c.trials))
            .collect::<Vec<_>>()
            .join("; ");
        Self {
            passed: checks.iter().all(|c| c.passed),
            detail,
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self {
            passed: false,
            detail: detail.into(),
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const HBARS: [f64; 3] = [0.05, 0.1, 0.5];
const STATE_SIZES: [usize; 6] = [2, 3, 4, 8, 16, 32];
const STATE_SEED: u64 = 303;

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn round_trip() -> Outcome {
    let mut checks = Vec::new();
    for (i, n) in [8, 32, 128].into_iter().enumerate() {
        let (err, iters) = audit::round_trip(&mut rng(100 + i as u64), 20, &[n], 0.1);
        checks.push(CheckResult { name: format!("N={n} sup_error"), ..err });
        checks.push(CheckResult { name: format!("N={n} newton"), ..iters });
    }
    Outcome::from_checks(&checks)
}

fn jacobian() -> Outcome {
    Outcome::from_checks(&[audit::jacobian_fd(&mut rng(200), 10, 8, 0.1)])
}

fn solved_states() -> Vec<qmax::MaxwellianState> {
    audit::random_states(&mut rng(STATE_SEED), 500, &STATE_SIZES, &HBARS)
}

fn entropy_floor() -> Outcome {
    let states = solved_states();
    let solved = CheckResult::at_most("unsolved", (500 - states.len()) as f64, 0.0, 500);
    Outcome::from_checks(&[solved, audit::entropy_floor(&states)])
}

fn potential_bounds() -> Outcome {
    let (a, b) = audit::potential_bounds(&solved_states());
    Outcome::from_checks(&[a, b])
}

fn nu_bounds() -> Outcome {
    let (a, b) = audit::nu_bounds(&solved_states());
    Outcome::from_checks(&[a, b])
}

fn matrix_inequalities() -> Outcome {
    let mut r = rng(600);
    Outcome::from_checks(&[
        audit::klein(&mut r, 1000, 8),
        audit::exp_monotone_trace(&mut r, 1000, 8),
        audit::monotone_map(&mut r, 200, &[2, 3, 4, 8, 16], 0.1),
    ])
}

/// The double commutator differences amplify entry errors of `M` by `δ⁻⁵`, so
/// the oracle side uses `M` rebuilt in double-double arithmetic. Smooth draws
/// are held to the absolute bound; rough site-wise draws, whose rates reach
/// `10⁴⁻⁵` at `N = 32`, to a relative one.
fn oracle() -> Outcome {
    let mut r = rng(700);
    let sizes = [2, 3, 4, 8, 16, 32];
    let hbar = 0.1;
    let (mut abs_smooth, mut rel_rough): (f64, f64) = (0.0, 0.0);
    for trial in 0..100 {
        let mesh = Mesh::new(sizes[r.gen_range(0..sizes.len())]).unwrap();
        let smooth = trial % 2 == 0;
        let n = if smooth {
            audit::random_smooth_density(&mut r, &mesh)
        } else {
            audit::random_density(&mut r, &mesh)
        };
        let (rate, state) = match nlqdd::nlqdd_rhs(&n, hbar, &mesh, None) {
            Ok(v) => v,
            Err(e) => return Outcome::fail(e.to_string()),
        };
        let m = common::maxwellian_matrix_dd(&state.potential, hbar, &mesh);
        let oracle = liouville::double_commutator_diag(&m, hbar, &mesh);
        let e = rate.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if smooth {
            abs_smooth = abs_smooth.max(e);
        } else {
            let scale = rate.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            rel_rough = rel_rough.max(e / scale);
        }
    }
    Outcome::from_checks(&[
        CheckResult::at_most("smooth_sup_error", abs_smooth, 1e-10, 50),
        CheckResult::at_most("mixed_relative_sup_error", rel_rough, 1e-13, 50),
    ])
}

fn conservation() -> Outcome {
    let hbar = 0.1;
    let mesh = Mesh::new(32).unwrap();
    let n0 = grid::cell_average(cosine_bump, &mesh).unwrap();
    let rec = match nlqdd::integrate_nlqdd(&n0, hbar, &mesh, 0.5, &NlqddControls::default()) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let mass = rec.mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    let min_n = rec.min_n.iter().copied().fold(f64::INFINITY, f64::min);
    let rise = rec.entropy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let budget = rec.entropy[0] + std::f64::consts::PI.sqrt() / (4.0 * hbar) + 1e-6;
    let spent = *rec.dissipation_integral.last().unwrap();
    Outcome::from_checks(&[
        CheckResult::at_most("mass_drift", mass, 1e-9, rec.len()),
        CheckResult::exceeds("min_density", min_n, 0.0, rec.len()),
        CheckResult::at_most("entropy_rise_per_step", rise, 1e-10, rec.len()),
        CheckResult::at_most("dissipation_minus_budget", spent - budget, 0.0, 1),
    ])
}

fn liouville_structure() -> Outcome {
    let (hbar, eps) = (0.1, 0.5);
    let mesh = Mesh::new(8).unwrap();
    let n0 = grid::cell_average(cosine_bump, &mesh).unwrap();
    let r0 = liouville::mixed_state(&n0, 0.5, &mesh);
    let params = LiouvilleParams::new(hbar, eps, mesh).unwrap();
    let traj = match liouville::integrate_liouville(&r0, &params, Form::Rescaled, 0.2, &LiouvilleControls::default()) {
        Ok(t) => t,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let d = &traj.diagnostics;
    let l0 = d[0].min_eigenvalue;
    let steps = d.len();
    let trace = d.iter().map(|s| s.trace_error).fold(0.0, f64::max);
    let herm = d.iter().map(|s| s.hermiticity_error).fold(0.0, f64::max);
    let deficit = traj
        .times
        .iter()
        .zip(d)
        .map(|(t, s)| (-2.0 * t / (eps * eps)).exp() * l0 - s.min_eigenvalue)
        .fold(f64::NEG_INFINITY, f64::max);
    let rise = d
        .windows(2)
        .map(|w| w[1].free_energy - w[0].free_energy)
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome::from_checks(&[
        CheckResult::at_most("trace_error", trace, 1e-10, steps),
        CheckResult::at_most("hermiticity_error", herm, 1e-10, steps),
        CheckResult::exceeds("initial_min_eigenvalue", l0, 0.0, 1),
        CheckResult::at_most("eigenvalue_bound_deficit", deficit, 1e-8, steps),
        CheckResult::at_most("free_energy_rise", rise, 1e-10, steps),
    ])
}

fn diffusive_limit() -> Outcome {
    let hbar = 0.1;
    let mesh = Mesh::new(16).unwrap();
    let n0 = grid::cell_average(cosine_bump, &mesh).unwrap();
    let grid_t: Vec<f64> = (0..=10).map(|i| 0.025 * i as f64).collect();
    let ctl = NlqddControls {
        tol: 1e-10,
        checkpoints: grid_t.clone(),
        ..NlqddControls::default()
    };
    let rec = match nlqdd::integrate_nlqdd(&n0, hbar, &mesh, 0.25, &ctl) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let reference: Vec<Vec<f64>> = grid_t.iter().map(|&t| rec.density_at(t).unwrap().to_vec()).collect();
    let r0 = liouville::mixed_state(&n0, 0.5, &mesh);
    let eps = [0.4, 0.2, 0.1];
    let ctl = LiouvilleControls {
        output_times: grid_t.clone(),
        ..LiouvilleControls::default()
    };
    let mut sups = Vec::new();
    for res in liouville::diffusive_limit_gap(&eps, &r0, &grid_t, hbar, &mesh, &reference, &ctl) {
        match res {
            Ok(g) => sups.push(g.sup_gap),
            Err(e) => return Outcome::fail(e.to_string()),
        }
    }
    Outcome {
        passed: strictly_decreasing(&sups),
        detail: format!("sup-gaps {} for epsilon {eps:?}", list(&sups)),
    }
}

fn kernel_approximation() -> Outcome {
    let ns = [8, 16, 32, 64, 128];
    let report = match kernels::kernel_error_report(&ns, &[1.0], &HeatKernelParams::new(0.1)) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let pw: Vec<f64> = report.rows.iter().map(|r| r.pointwise).collect();
    let av: Vec<f64> = report.rows.iter().map(|r| r.averaged).collect();
    let o = &report.orders[0];
    Outcome {
        passed: strictly_decreasing(&pw) && strictly_decreasing(&av) && o.pointwise >= 0.25 && o.averaged >= 0.25,
        detail: format!(
            "pointwise {} order {:.2}; averaged {} order {:.2}",
            list(&pw),
            o.pointwise,
            list(&av),
            o.averaged
        ),
    }
}

fn static_convergence() -> Outcome {
    let params = HeatKernelParams::new(1.0);
    let continuum =
        match kernels::continuum_quantum_exponential(kernels::cosine_potential, 64, &params, &AuxiliaryOptions::default()) {
            Ok(c) => c,
            Err(e) => return Outcome::fail(e.to_string()),
        };
    let rows = match kernels::static_convergence(kernels::cosine_potential, &[8, 16, 32, 64], &continuum, &params) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let errs: Vec<f64> = rows.iter().map(|r| r.density_error).collect();
    Outcome {
        passed: strictly_decreasing(&errs),
        detail: format!("density errors {} for N = 8, 16, 32, 64", list(&errs)),
    }
}

fn continuum_limit() -> Outcome {
    let hbar = 0.1;
    let t_final = 0.2;
    let probes: Vec<f64> = (0..=20).map(|i| 0.01 * i as f64).collect();
    let runs: Vec<_> = [16, 32, 64]
        .par_iter()
        .map(|&n| refinement_run(cosine_bump, n, hbar, t_final, &probes, 1e-8))
        .collect();
    let runs: Vec<_> = match runs.into_iter().collect::<Result<Vec<_>, _>>() {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let cauchy: Vec<f64> = runs
        .windows(2)
        .map(|w| cauchy_difference(&w[0].record, &w[1].record, &probes))
        .collect();
    let h1: Vec<f64> = runs.iter().map(|r| r.h1_max).collect();
    let spread = h1.iter().copied().fold(0.0, f64::max) / h1.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = 8.0 * hbar * hbar * audit::continuum_fisher(cosine_bump, 20_000);
    let entropy_excess = runs.iter().map(|r| r.initial_entropy - bound).fold(f64::NEG_INFINITY, f64::max);
    let decreasing = strictly_decreasing(&cauchy);
    let checks = [
        CheckResult::at_most("h1_spread", spread, 1.5, h1.len()),
        CheckResult::at_most("initial_entropy_excess", entropy_excess, 0.0, runs.len()),
    ];
    let inner = Outcome::from_checks(&checks);
    Outcome {
        passed: decreasing && inner.passed,
        detail: format!("cauchy {}; h1 {}; {}", list(&cauchy), list(&h1), inner.detail),
    }
}

fn spectrum_bounds() -> Outcome {
    let alphas: Vec<f64> = (0..=16).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect();
    let sizes: Vec<usize> = (1..=10).map(|p| 1usize << p).chain([3, 5, 7, 33, 101]).collect();
    let mut checks = vec![
        audit::spectrum_lower_bound(1024),
        audit::exponential_sum_bound(&sizes, &alphas),
    ];
    let nyquist = (1..=10)
        .map(|p| {
            let mesh = Mesh::new(1 << (p + 1)).unwrap();
            let k = (mesh.n_cells() / 2) as i64;
            (grid::omega(&mesh, k) - 16.0 * (k * k) as f64).abs() / grid::omega(&mesh, k)
        })
        .fold(0.0, f64::max);
    checks.push(CheckResult::at_most("nyquist_equality", nyquist, 1e-12, 10));
    Outcome::from_checks(&checks)
}

fn fisher_suite() -> Outcome {
    let mut r = rng(1500);
    Outcome::from_checks(&[
        audit::fisher_bound(&mut r, 10, &[8, 16, 32, 64, 128]),
        audit::h1_linf(&mut r, 200, &[2, 3, 4, 8, 16, 32]),
        audit::holder_interpolation(&mut r, 20),
    ])
}

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 15] = [
    ("maxwellian round trip", round_trip),
    ("jacobian vs finite differences", jacobian),
    ("entropy floor", entropy_floor),
    ("potential bounds", potential_bounds),
    ("nu bounds", nu_bounds),
    ("matrix inequalities", matrix_inequalities),
    ("oracle equivalence", oracle),
    ("conservation and dissipation", conservation),
    ("liouville structure", liouville_structure),
    ("diffusive limit", diffusive_limit),
    ("kernel approximation", kernel_approximation),
    ("static convergence", static_convergence),
    ("dynamic continuum limit", continuum_limit),
    ("spectrum bounds", spectrum_bounds),
    ("fisher and interpolation", fisher_suite),
];

fn main() {
    let results: Vec<(Outcome, f64)> = CRITERIA
        .par_iter()
        .map(|(_, f)| {
            let start = Instant::now();
            let out = f();
            (out, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut failed = 0;
    for (i, ((name, _), (out, secs))) in CRITERIA.iter().zip(&results).enumerate() {
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name} [{secs:.1}s]: {}", i + 1, out.detail);
        if !out.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
