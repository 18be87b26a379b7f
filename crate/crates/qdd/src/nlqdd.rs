//! The discrete nlQDD system `ṅ = D⁻(ν⁺D⁺A)`, `n = n_δ[A]`.
//!
//! Each right-hand side evaluation solves a Maxwellian. Two integrators are
//! provided. `Rosenbrock23` is linearly implicit and uses the exact Jacobian of
//! the flow. The linearised flow has eigenvalues up to about `ħ²ω_max²/2`, so it
//! is the default. `DormandPrince45` is explicit and practical on coarse meshes only.

use crate::grid::{self, Mesh};
use crate::ode::{self, OdeState};
use crate::qmax::{self, MaxwellianState, QmaxError, SolveOptions};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NlqddError {
    #[error("Maxwellian solve failed at t = {t}: {source}")]
    Solver {
        t: f64,
        source: QmaxError,
        density: Vec<f64>,
    },
    #[error("step size {h:e} fell below dt_min at t = {t} (last error ratio {error_ratio:e}, stiffness estimate {stiffness:e})")]
    StepUnderflow {
        t: f64,
        h: f64,
        error_ratio: f64,
        stiffness: f64,
    },
    #[error("density dropped below the positivity floor at t = {t}, site {site}")]
    PositivityLoss { t: f64, site: usize },
    #[error("invalid controls: {0}")]
    InvalidControls(String),
}

/// `ṅ = D⁻(ν⁺D⁺A)` together with the solved Maxwellian.
pub fn nlqdd_rhs(
    n: &[f64],
    hbar: f64,
    mesh: &Mesh,
    warm_start: Option<&[f64]>,
) -> Result<(Vec<f64>, MaxwellianState), NlqddError> {
    let opts = SolveOptions {
        warm_start: warm_start.map(<[f64]>::to_vec),
        ..SolveOptions::default()
    };
    let state = qmax::solve_potential(n, hbar, mesh, &opts).map_err(|source| NlqddError::Solver {
        t: f64::NAN,
        source,
        density: n.to_vec(),
    })?;
    Ok((rate_of(&state), state))
}

fn flux_of(state: &MaxwellianState) -> Vec<f64> {
    let da = grid::forward_difference(&state.potential, &state.mesh);
    state.nu_plus.iter().zip(&da).map(|(nu, d)| nu * d).collect()
}

fn rate_of(state: &MaxwellianState) -> Vec<f64> {
    grid::backward_difference(&flux_of(state), &state.mesh)
}

/// Flux `ν⁺D⁺A` at every site.
pub fn flux(state: &MaxwellianState) -> Vec<f64> {
    flux_of(state)
}

/// `δΣ ν⁺(D⁺A)²`.
pub fn dissipation(state: &MaxwellianState) -> f64 {
    let da = grid::forward_difference(&state.potential, &state.mesh);
    state.mesh.delta()
        * state
            .nu_plus
            .iter()
            .zip(&da)
            .map(|(nu, d)| nu * d * d)
            .sum::<f64>()
}

/// Jacobian of `n ↦ ṅ` at a solved state.
pub fn flow_jacobian(state: &MaxwellianState) -> DMatrix<f64> {
    let mesh = &state.mesh;
    let n = mesh.n_cells();
    let d = mesh.delta();
    let jinv = inverse_spd(&state.jacobian());
    let k = qmax::offdiagonal_jacobian(&state.spectral);
    let da = grid::forward_difference(&state.potential, mesh);
    // B = diag(D⁺A)·K + δ·diag(ν⁺)·D⁺
    let mut b = k;
    for r in 0..n {
        b.row_mut(r).scale_mut(da[r]);
        b[(r, mesh.next(r))] += state.nu_plus[r];
        b[(r, r)] -= state.nu_plus[r];
    }
    // D⁻ B
    let mut db = DMatrix::zeros(n, n);
    for r in 0..n {
        let p = mesh.prev(r);
        for c in 0..n {
            db[(r, c)] = (b[(r, c)] - b[(p, c)]) / d;
        }
    }
    db * jinv
}

fn inverse_spd(j: &DMatrix<f64>) -> DMatrix<f64> {
    match j.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => j
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::identity(j.nrows(), j.ncols())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rosenbrock23,
    DormandPrince45,
}

#[derive(Debug, Clone)]
pub struct NlqddControls {
    pub tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub entropy_guard: bool,
    pub positivity_floor: f64,
    pub scheme: Scheme,
    /// Times the integrator must land on exactly.
    pub checkpoints: Vec<f64>,
    pub max_steps: usize,
}

impl Default for NlqddControls {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            dt_init: 1e-5,
            dt_min: 1e-14,
            dt_max: f64::INFINITY,
            entropy_guard: true,
            positivity_floor: 1e-14,
            scheme: Scheme::Rosenbrock23,
            checkpoints: Vec::new(),
            max_steps: 1_000_000,
        }
    }
}

impl NlqddControls {
    fn validate(&self) -> Result<(), NlqddError> {
        if !(self.tol > 0.0) {
            return Err(NlqddError::InvalidControls(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(NlqddError::InvalidControls(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        Ok(())
    }
}

/// Growth tolerance of the entropy guard.
pub const ENTROPY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub mesh: Mesh,
    pub hbar: f64,
    pub times: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub potentials: Vec<Vec<f64>>,
    pub nu_plus: Vec<Vec<f64>>,
    pub entropy: Vec<f64>,
    /// Instantaneous dissipation `δΣν⁺(D⁺A)²`.
    pub dissipation: Vec<f64>,
    /// Trapezoid integral of the dissipation from 0 to each record.
    pub dissipation_integral: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_n: Vec<f64>,
    pub h1_norm: Vec<f64>,
    pub newton_iters: Vec<usize>,
    pub rejected_steps: usize,
}

impl TrajectoryRecord {
    fn new(mesh: Mesh, hbar: f64) -> Self {
        Self {
            mesh,
            hbar,
            times: Vec::new(),
            densities: Vec::new(),
            potentials: Vec::new(),
            nu_plus: Vec::new(),
            entropy: Vec::new(),
            dissipation: Vec::new(),
            dissipation_integral: Vec::new(),
            mass: Vec::new(),
            min_n: Vec::new(),
            h1_norm: Vec::new(),
            newton_iters: Vec::new(),
            rejected_steps: 0,
        }
    }

    fn push(&mut self, t: f64, state: &MaxwellianState) {
        let mesh = &self.mesh;
        let n = &state.density;
        let diss = dissipation(state);
        let acc = match (self.times.last(), self.dissipation.last(), self.dissipation_integral.last()) {
            (Some(&t0), Some(&d0), Some(&i0)) => i0 + 0.5 * (t - t0) * (d0 + diss),
            _ => 0.0,
        };
        let dn = grid::forward_difference(n, mesh);
        self.times.push(t);
        self.densities.push(n.clone());
        self.potentials.push(state.potential.clone());
        self.nu_plus.push(state.nu_plus.clone());
        self.entropy.push(state.entropy);
        self.dissipation.push(diss);
        self.dissipation_integral.push(acc);
        self.mass.push(mesh.delta() * n.iter().sum::<f64>());
        self.min_n.push(n.iter().copied().fold(f64::INFINITY, f64::min));
        self.h1_norm.push(grid::lp_norm(&dn, 2.0, mesh).expect("p = 2 is valid"));
        self.newton_iters.push(state.iterations);
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    pub fn density_at(&self, t: f64) -> Option<&[f64]> {
        self.index_of(t).map(|i| self.densities[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `‖D⁺n(t)‖_{L²_δ}` along the trajectory.
pub fn uniform_h1_ledger(traj: &TrajectoryRecord) -> Vec<f64> {
    traj.h1_norm.clone()
}

/// Right-hand side of the `H¹` estimate: `4 + (8/ħ²)(ℍ − ℍ̱_{ħ²/2})`.
pub fn h1_bound(entropy: f64, hbar: f64) -> f64 {
    4.0 + 8.0 / (hbar * hbar) * (entropy - qmax::entropy_floor_half(hbar))
}

struct Point {
    n: Vec<f64>,
    ndot: Vec<f64>,
    state: MaxwellianState,
}

fn eval_at(n: Vec<f64>, hbar: f64, mesh: &Mesh, warm: &[f64], t: f64) -> Result<Point, NlqddError> {
    let (ndot, state) = nlqdd_rhs(&n, hbar, mesh, Some(warm)).map_err(|e| match e {
        NlqddError::Solver { source, density, .. } => NlqddError::Solver { t, source, density },
        other => other,
    })?;
    Ok(Point { n, ndot, state })
}

enum Attempt {
    Accepted(Point, f64),
    Rejected(f64),
}

/// Stage states with a non-positive entry cannot be solved; they count as a
/// rejection, not an error.
fn positive(n: &[f64]) -> bool {
    n.iter().all(|v| *v > 0.0)
}

const ROS_D: f64 = 0.292_893_218_813_452_5; // 1/(2+√2)
const ROS_E32: f64 = 7.414_213_562_373_095; // 6+√2

fn rosenbrock_attempt(
    cur: &Point,
    jac: &DMatrix<f64>,
    jinv_delta: &DMatrix<f64>,
    h: f64,
    hbar: f64,
    mesh: &Mesh,
    tol: f64,
    t: f64,
) -> Result<Attempt, NlqddError> {
    let n = cur.n.len();
    let w = DMatrix::identity(n, n) - jac * (h * ROS_D);
    let lu = w.lu();
    let solve = |v: &Vec<f64>| -> Option<Vec<f64>> {
        lu.solve(&DVector::from_column_slice(v)).map(|x| x.iter().copied().collect())
    };
    // Linear predictor for the potential keeps Newton at one or two steps.
    let predict = |y: &Vec<f64>| -> Vec<f64> {
        let dn = DVector::from_iterator(n, y.iter().zip(&cur.n).map(|(a, b)| a - b));
        let da = jinv_delta * dn;
        cur.state.potential.iter().zip(da.iter()).map(|(a, d)| a + d).collect()
    };
    let f0 = &cur.ndot;
    let Some(k1) = solve(f0) else { return Ok(Attempt::Rejected(f64::INFINITY)) };
    let mut y1 = cur.n.clone();
    y1.axpy(0.5 * h, &k1);
    if !positive(&y1) {
        return Ok(Attempt::Rejected(f64::INFINITY));
    }
    let Ok(p1) = eval_at(y1.clone(), hbar, mesh, &predict(&y1), t) else {
        return Ok(Attempt::Rejected(f64::INFINITY));
    };
    let f1 = &p1.ndot;
    let mut rhs2 = f1.clone();
    rhs2.axpy(-1.0, &k1);
    let Some(mut k2) = solve(&rhs2) else { return Ok(Attempt::Rejected(f64::INFINITY)) };
    k2.axpy(1.0, &k1);
    let mut ynew = cur.n.clone();
    ynew.axpy(h, &k2);
    if !positive(&ynew) {
        return Ok(Attempt::Rejected(f64::INFINITY));
    }
    let Ok(p2) = eval_at(ynew.clone(), hbar, mesh, &predict(&ynew), t + h) else {
        return Ok(Attempt::Rejected(f64::INFINITY));
    };
    let f2 = &p2.ndot;
    let mut rhs3 = f2.clone();
    for i in 0..n {
        rhs3[i] -= ROS_E32 * (k2[i] - f1[i]) + 2.0 * (k1[i] - f0[i]);
    }
    let Some(k3) = solve(&rhs3) else { return Ok(Attempt::Rejected(f64::INFINITY)) };
    let err: Vec<f64> = (0..n).map(|i| h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i])).collect();
    let ratio = Vec::error_ratio(&err, &cur.n, &ynew, tol);
    if ratio <= 1.0 {
        Ok(Attempt::Accepted(p2, ratio))
    } else {
        Ok(Attempt::Rejected(ratio))
    }
}

fn dormand_prince_attempt(
    cur: &Point,
    h: f64,
    hbar: f64,
    mesh: &Mesh,
    tol: f64,
    t: f64,
) -> Result<Attempt, NlqddError> {
    let warm = cur.state.potential.clone();
    let step = ode::dormand_prince(&cur.n, &cur.ndot, h, |y: &Vec<f64>| {
        if !positive(y) {
            return Err(());
        }
        let p = eval_at(y.clone(), hbar, mesh, &warm, t).map_err(|_| ())?;
        Ok((p.ndot.clone(), p))
    });
    match step {
        Err(()) => Ok(Attempt::Rejected(f64::INFINITY)),
        Ok(s) => {
            let ratio = Vec::error_ratio(&s.error, &cur.n, &s.y, tol);
            if ratio <= 1.0 {
                Ok(Attempt::Accepted(s.extra_end, ratio))
            } else {
                Ok(Attempt::Rejected(ratio))
            }
        }
    }
}

pub fn integrate_nlqdd(
    n0: &[f64],
    hbar: f64,
    mesh: &Mesh,
    t_final: f64,
    controls: &NlqddControls,
) -> Result<TrajectoryRecord, NlqddError> {
    controls.validate()?;
    mesh.check_len(n0.len())
        .map_err(|e| NlqddError::InvalidControls(e.to_string()))?;
    let mut cur = {
        let (ndot, state) = nlqdd_rhs(n0, hbar, mesh, None).map_err(|e| match e {
            NlqddError::Solver { source, density, .. } => NlqddError::Solver { t: 0.0, source, density },
            other => other,
        })?;
        Point { n: n0.to_vec(), ndot, state }
    };
    let mut rec = TrajectoryRecord::new(*mesh, hbar);
    rec.push(0.0, &cur.state);

    let mut stops: Vec<f64> = controls
        .checkpoints
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < t_final)
        .collect();
    stops.push(t_final);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let order = match controls.scheme {
        Scheme::Rosenbrock23 => 3.0,
        Scheme::DormandPrince45 => 5.0,
    };
    let mut t = 0.0;
    let mut h = controls.dt_init;
    let mut steps = 0usize;
    let mut last_ratio = 0.0;
    for &stop in &stops {
        while t < stop {
            let (jac, jinv_delta) = match controls.scheme {
                Scheme::Rosenbrock23 => {
                    let jinv = inverse_spd(&cur.state.jacobian()) * mesh.delta();
                    (flow_jacobian(&cur.state), jinv)
                }
                Scheme::DormandPrince45 => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
            };
            loop {
                steps += 1;
                if steps > controls.max_steps {
                    return Err(NlqddError::StepUnderflow {
                        t,
                        h,
                        error_ratio: last_ratio,
                        stiffness: stiffness_estimate(&cur.state),
                    });
                }
                let hh = h.min(controls.dt_max).min(stop - t);
                let last = hh >= stop - t;
                let attempt = match controls.scheme {
                    Scheme::Rosenbrock23 => rosenbrock_attempt(
                        &cur, &jac, &jinv_delta, hh, hbar, mesh, controls.tol, t,
                    )?,
                    Scheme::DormandPrince45 => {
                        dormand_prince_attempt(&cur, hh, hbar, mesh, controls.tol, t)?
                    }
                };
                let verdict = match attempt {
                    Attempt::Accepted(p, ratio) => {
                        let floor_ok = p.n.iter().all(|v| *v > controls.positivity_floor);
                        let guard_ok = !controls.entropy_guard
                            || p.state.entropy <= cur.state.entropy + ENTROPY_SLACK;
                        if floor_ok && guard_ok {
                            Ok((p, ratio))
                        } else {
                            Err(if floor_ok { 1.0 } else { f64::INFINITY })
                        }
                    }
                    Attempt::Rejected(ratio) => Err(ratio),
                };
                match verdict {
                    Ok((p, ratio)) => {
                        t = if last { stop } else { t + hh };
                        last_ratio = ratio;
                        h = ode::next_step(hh, ratio, order).max(controls.dt_min);
                        cur = p;
                        rec.push(t, &cur.state);
                        break;
                    }
                    Err(ratio) => {
                        rec.rejected_steps += 1;
                        last_ratio = ratio;
                        h = if ratio.is_finite() {
                            ode::next_step(hh, ratio, order).min(0.5 * hh)
                        } else {
                            0.5 * hh
                        };
                        if h < controls.dt_min {
                            if !ratio.is_finite() {
                                let site = cur
                                    .n
                                    .iter()
                                    .enumerate()
                                    .min_by(|a, b| a.1.total_cmp(b.1))
                                    .map_or(0, |(i, _)| i);
                                return Err(NlqddError::PositivityLoss { t, site });
                            }
                            return Err(NlqddError::StepUnderflow {
                                t,
                                h,
                                error_ratio: ratio,
                                stiffness: stiffness_estimate(&cur.state),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rec)
}

/// Rough spectral radius of the linearised flow, `ν̄·ω_max·(1 + ħ²ω_max/2)`.
pub fn stiffness_estimate(state: &MaxwellianState) -> f64 {
    let d = state.mesh.delta();
    let omega_max = 4.0 / (d * d);
    let nu = state.nu_plus.iter().copied().fold(0.0, f64::max);
    nu * omega_max * (1.0 + 0.5 * state.hbar * state.hbar * omega_max)
}
