//! Discrete collisional quantum Liouville equation with BGK relaxation toward
//! the quantum Maxwellian of the current diagonal.
//!
//! Original form: `iħṘ = [−(ħ²/2)Δ_δ, R] + (i/τ)(M_δ[R] − R)`.
//! Rescaled form (`τ = ε/ħ`, time `t → 2t/ε`): `εṘ = iħ[Δ_δ, R] + (2/ε)(M_δ[R] − R)`.

use crate::grid::Mesh;
use crate::ode::{self, OdeState};
use crate::qmax::{self, MaxwellianState, QmaxError, SolveOptions};
use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

pub type CMatrix = DMatrix<Complex<f64>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LiouvilleError {
    #[error("Maxwellian projection failed: {0}")]
    Projection(#[from] QmaxError),
    #[error("state lost positivity at t = {t}: min eigenvalue {min_eigenvalue:e}")]
    PositivityLoss { t: f64, min_eigenvalue: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Original,
    Rescaled,
}

#[derive(Debug, Clone, Copy)]
pub struct LiouvilleParams {
    pub hbar: f64,
    /// Diffusive scale; the relaxation time is `τ = ε/ħ`.
    pub epsilon: f64,
    pub mesh: Mesh,
}

impl LiouvilleParams {
    pub fn new(hbar: f64, epsilon: f64, mesh: Mesh) -> Result<Self, LiouvilleError> {
        if !(hbar > 0.0) || !(epsilon > 0.0) {
            return Err(LiouvilleError::InvalidParameters(format!(
                "need hbar > 0 and epsilon > 0, got {hbar}, {epsilon}"
            )));
        }
        Ok(Self { hbar, epsilon, mesh })
    }

    pub fn tau(&self) -> f64 {
        self.epsilon / self.hbar
    }

    /// Coefficients `(c_H, c_C)` with `Ṙ = i·c_H[Δ_δ, R] + c_C(M − R)`.
    fn coefficients(&self, form: Form) -> (f64, f64) {
        match form {
            Form::Original => (0.5 * self.hbar, 1.0 / (self.hbar * self.tau())),
            Form::Rescaled => (
                self.hbar / self.epsilon,
                2.0 / (self.epsilon * self.epsilon),
            ),
        }
    }
}

/// `[Δ_δ, R]` by the three-point stencil.
pub fn laplacian_commutator(r: &CMatrix, mesh: &Mesh) -> CMatrix {
    let n = mesh.n_cells();
    let s = 1.0 / (mesh.delta() * mesh.delta());
    CMatrix::from_fn(n, n, |i, j| {
        (r[(mesh.next(i), j)] + r[(mesh.prev(i), j)] - r[(i, mesh.next(j))] - r[(i, mesh.prev(j))])
            * s
    })
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex::new(v, 0.0))
}

/// Maxwellian sharing the diagonal of `R`.
pub fn maxwellian_projection(
    r: &CMatrix,
    hbar: f64,
    mesh: &Mesh,
    warm_start: Option<&[f64]>,
) -> Result<MaxwellianState, LiouvilleError> {
    let n = qmax::density_of(r, mesh)?;
    let opts = SolveOptions {
        warm_start: warm_start.map(<[f64]>::to_vec),
        ..SolveOptions::default()
    };
    Ok(qmax::solve_potential(&n, hbar, mesh, &opts)?)
}

/// Returns `Ṙ` and the Maxwellian used in the collision term.
pub fn liouville_rhs(
    r: &CMatrix,
    params: &LiouvilleParams,
    form: Form,
    warm_start: Option<&[f64]>,
) -> Result<(CMatrix, MaxwellianState), LiouvilleError> {
    let m = maxwellian_projection(r, params.hbar, &params.mesh, warm_start)?;
    let (ch, cc) = params.coefficients(form);
    let mut rdot = laplacian_commutator(r, &params.mesh) * Complex::new(0.0, ch);
    rdot += (to_complex(&m.matrix) - r) * Complex::new(cc, 0.0);
    Ok((rdot, m))
}

/// Diagonal of `−(ħ²/2)[Δ_δ,[Δ_δ,R]]`, divided by `δ`.
pub fn double_commutator_diag(r: &DMatrix<f64>, hbar: f64, mesh: &Mesh) -> Vec<f64> {
    let n = mesh.n_cells();
    let s = 1.0 / (mesh.delta() * mesh.delta());
    let c = |i: usize, j: usize| {
        (r[(mesh.next(i), j)] + r[(mesh.prev(i), j)] - r[(i, mesh.next(j))] - r[(i, mesh.prev(j))])
            * s
    };
    (0..n)
        .map(|k| {
            let (kp, km) = (mesh.next(k), mesh.prev(k));
            let dd = (c(kp, k) + c(km, k) - c(k, kp) - c(k, km)) * s;
            -0.5 * hbar * hbar * dd / mesh.delta()
        })
        .collect()
}

/// Global equilibrium `Z⁻¹exp(ħ²Δ_δ)`.
pub fn equilibrium_state(hbar: f64, mesh: &Mesh) -> Result<CMatrix, LiouvilleError> {
    let zero = vec![0.0; mesh.n_cells()];
    let (_, m) = qmax::quantum_exponential(&zero, hbar, mesh)?;
    let tr = m.trace();
    Ok(to_complex(&(m / tr)))
}

/// `δ[(1−θ)√n√nᵀ + θ·diag n]`: a positive definite state with diagonal `δn`
/// that is far from its Maxwellian when `θ < 1`.
pub fn mixed_state(n: &[f64], theta: f64, mesh: &Mesh) -> CMatrix {
    let d = mesh.delta();
    let k = n.len();
    CMatrix::from_fn(k, k, |i, j| {
        let coh = (1.0 - theta) * (n[i] * n[j]).sqrt();
        let v = if i == j { coh + theta * n[i] } else { coh };
        Complex::new(d * v, 0.0)
    })
}

/// Eigenvalues above `−SEMIDEFINITE_TOL` count as non-negative.
pub const SEMIDEFINITE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    /// Classical RK4 with `dt ≤ cfl·(2/collision rate)` (equal to `cfl·ε²`
    /// in the rescaled form) and `dt ≤ 1/(Hamiltonian rate)`.
    Fixed { cfl: f64 },
    /// Dormand–Prince 5(4) with the given local tolerance.
    Adaptive { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct LiouvilleControls {
    pub stepping: Stepping,
    /// Times the integrator must land on exactly.
    pub output_times: Vec<f64>,
    pub max_steps: usize,
}

impl Default for LiouvilleControls {
    fn default() -> Self {
        Self {
            stepping: Stepping::Fixed { cfl: 0.1 },
            output_times: Vec::new(),
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub free_energy: f64,
    /// `‖(M_δ[R] − R)/ε‖_F`.
    pub collision_norm: f64,
    /// Rate in the free-energy estimate: `2‖(M−R)/ε‖²_F` (rescaled) or
    /// `‖M−R‖²_F/ε` (original).
    pub dissipation_rate: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct LiouvilleTrajectory {
    pub params: LiouvilleParams,
    pub form: Form,
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Trapezoid integral of the dissipation rate up to each record.
    pub dissipation_integral: Vec<f64>,
}

impl LiouvilleTrajectory {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    pub fn final_state(&self) -> &CMatrix {
        self.states.last().expect("trajectory is never empty")
    }
}

struct Point {
    r: CMatrix,
    rdot: CMatrix,
    maxwellian: MaxwellianState,
}

fn evaluate(
    r: CMatrix,
    params: &LiouvilleParams,
    form: Form,
    warm: Option<&[f64]>,
) -> Result<Point, LiouvilleError> {
    let (rdot, maxwellian) = liouville_rhs(&r, params, form, warm)?;
    Ok(Point { r, rdot, maxwellian })
}

fn diagnose(p: &Point, params: &LiouvilleParams, form: Form) -> Result<StepDiagnostics, LiouvilleError> {
    let ev = qmax::hermitian_eigenvalues(&p.r)?;
    let diff = to_complex(&p.maxwellian.matrix) - &p.r;
    let fro2 = diff.norm_squared();
    let eps = params.epsilon;
    let dissipation_rate = match form {
        Form::Rescaled => 2.0 * fro2 / (eps * eps),
        Form::Original => fro2 / (params.hbar * params.tau()),
    };
    Ok(StepDiagnostics {
        trace_error: (p.r.trace().re - 1.0).abs(),
        hermiticity_error: qmax::hermiticity_defect(&p.r),
        min_eigenvalue: ev[0],
        free_energy: qmax::free_energy(&p.r, params.hbar, &params.mesh)?,
        collision_norm: fro2.sqrt() / eps,
        dissipation_rate,
        newton_iters: p.maxwellian.iterations,
    })
}

/// Re-Hermitize and renormalize the trace.
fn project(r: &mut CMatrix) {
    let h = (&*r + r.adjoint()) * Complex::new(0.5, 0.0);
    let tr = h.trace().re;
    *r = h * Complex::new(1.0 / tr, 0.0);
}

pub fn integrate_liouville(
    r0: &CMatrix,
    params: &LiouvilleParams,
    form: Form,
    t_final: f64,
    controls: &LiouvilleControls,
) -> Result<LiouvilleTrajectory, LiouvilleError> {
    if !(t_final >= 0.0) {
        return Err(LiouvilleError::InvalidParameters(format!(
            "t_final must be non-negative, got {t_final}"
        )));
    }
    let mut r = r0.clone();
    project(&mut r);
    let mut cur = evaluate(r, params, form, None)?;
    let d0 = diagnose(&cur, params, form)?;
    if d0.min_eigenvalue < -SEMIDEFINITE_TOL {
        return Err(LiouvilleError::PositivityLoss {
            t: 0.0,
            min_eigenvalue: d0.min_eigenvalue,
        });
    }
    let mut traj = LiouvilleTrajectory {
        params: *params,
        form,
        times: vec![0.0],
        states: vec![cur.r.clone()],
        diagnostics: vec![d0],
        dissipation_integral: vec![0.0],
    };

    let mut stops: Vec<f64> = controls
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < t_final)
        .collect();
    stops.push(t_final);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let (ch, cc) = params.coefficients(form);
    let n = params.mesh.n_cells();
    let omega_max = 4.0 / (params.mesh.delta() * params.mesh.delta());
    let hamiltonian_rate = ch * omega_max;
    let mut t = 0.0;
    let mut h_adapt = match controls.stepping {
        Stepping::Fixed { .. } => 0.0,
        Stepping::Adaptive { .. } => 0.1 / (cc + hamiltonian_rate),
    };
    let mut steps = 0;

    for &stop in &stops {
        while t < stop {
            steps += 1;
            if steps > controls.max_steps {
                return Err(LiouvilleError::StepUnderflow { t, h: stop - t });
            }
            let warm = cur.maxwellian.potential.clone();
            let rhs = |y: &CMatrix| -> Result<CMatrix, LiouvilleError> {
                Ok(liouville_rhs(y, params, form, Some(&warm))?.0)
            };
            let (h, mut next) = match controls.stepping {
                Stepping::Fixed { cfl } => {
                    let dt_max = (cfl * 2.0 / cc).min(0.5 / hamiltonian_rate.max(1e-300));
                    let remaining = stop - t;
                    let h = remaining / (remaining / dt_max).ceil().max(1.0);
                    (h, ode::rk4(&cur.r, &cur.rdot, h, rhs)?)
                }
                Stepping::Adaptive { tol } => {
                    let mut h = h_adapt.min(stop - t);
                    loop {
                        if h < 1e-14 * (1.0 + t) {
                            return Err(LiouvilleError::StepUnderflow { t, h });
                        }
                        let attempt = ode::dormand_prince(&cur.r, &cur.rdot, h, |y: &CMatrix| {
                            rhs(y).map(|k| (k, ()))
                        });
                        match attempt {
                            Ok(step) => {
                                let ratio = CMatrix::error_ratio(&step.error, &cur.r, &step.y, tol);
                                if ratio <= 1.0 {
                                    h_adapt = ode::next_step(h, ratio, 5.0);
                                    break (h, step.y);
                                }
                                h = ode::next_step(h, ratio, 5.0).min(0.9 * h);
                            }
                            Err(_) => h *= 0.5,
                        }
                    }
                }
            };
            let t_new = if stop - (t + h) <= 1e-13 * stop.max(1.0) { stop } else { t + h };
            project(&mut next);
            let point = evaluate(next, params, form, Some(&warm))?;
            let diag = diagnose(&point, params, form)?;
            if diag.min_eigenvalue < -SEMIDEFINITE_TOL {
                return Err(LiouvilleError::PositivityLoss {
                    t: t_new,
                    min_eigenvalue: diag.min_eigenvalue,
                });
            }
            let prev_rate = traj.diagnostics.last().map_or(0.0, |d| d.dissipation_rate);
            let acc = traj.dissipation_integral.last().copied().unwrap_or(0.0)
                + 0.5 * (t_new - t) * (prev_rate + diag.dissipation_rate);
            t = t_new;
            traj.times.push(t);
            traj.states.push(point.r.clone());
            traj.diagnostics.push(diag);
            traj.dissipation_integral.push(acc);
            cur = point;
        }
    }
    debug_assert_eq!(traj.states[0].nrows(), n);
    Ok(traj)
}

/// One row of the diffusive-limit comparison.
#[derive(Debug, Clone)]
pub struct GapSeries {
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `diag R^ε(t)/δ` at each grid time.
    pub diagonal: Vec<Vec<f64>>,
    /// Sup-norm gap to the reference at each grid time.
    pub gaps: Vec<f64>,
    pub sup_gap: f64,
}

/// Integrates the rescaled equation for every `ε` and compares diagonals with
/// the nlQDD reference densities given at `t_grid`.
pub fn diffusive_limit_gap(
    eps_list: &[f64],
    r0: &CMatrix,
    t_grid: &[f64],
    hbar: f64,
    mesh: &Mesh,
    reference: &[Vec<f64>],
    controls: &LiouvilleControls,
) -> Vec<Result<GapSeries, LiouvilleError>> {
    let t_final = t_grid.iter().copied().fold(0.0, f64::max);
    eps_list
        .par_iter()
        .map(|&eps| {
            let params = LiouvilleParams::new(hbar, eps, *mesh)?;
            let ctl = LiouvilleControls {
                output_times: t_grid.to_vec(),
                ..controls.clone()
            };
            let traj = integrate_liouville(r0, &params, Form::Rescaled, t_final, &ctl)?;
            let mut diagonal = Vec::with_capacity(t_grid.len());
            let mut gaps = Vec::with_capacity(t_grid.len());
            for (t, nref) in t_grid.iter().zip(reference) {
                let i = traj.index_of(*t).ok_or_else(|| {
                    LiouvilleError::InvalidParameters(format!("grid time {t} not reached"))
                })?;
                let n = qmax::density_of(&traj.states[i], mesh)?;
                let g = n
                    .iter()
                    .zip(nref)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                diagonal.push(n);
                gaps.push(g);
            }
            let sup_gap = gaps.iter().copied().fold(0.0, f64::max);
            Ok(GapSeries {
                epsilon: eps,
                times: t_grid.to_vec(),
                diagonal,
                gaps,
                sup_gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutator_stencil_matches_dense_product() {
        let mesh = Mesh::new(5).unwrap();
        let r = CMatrix::from_fn(5, 5, |i, j| Complex::new((i * 7 + j) as f64, (i as f64) - (j as f64)));
        let l = to_complex(&mesh.laplacian_matrix());
        let dense = &l * &r - &r * &l;
        assert!((laplacian_commutator(&r, &mesh) - dense).norm() < 1e-9);
    }

    #[test]
    fn mixed_state_has_requested_diagonal() {
        let mesh = Mesh::new(4).unwrap();
        let n = [0.5, 1.5, 1.0, 1.0];
        let r = mixed_state(&n, 0.3, &mesh);
        for j in 0..4 {
            assert!((r[(j, j)].re - 0.25 * n[j]).abs() < 1e-15);
        }
        assert!((r.trace().re - 1.0).abs() < 1e-15);
    }
}
