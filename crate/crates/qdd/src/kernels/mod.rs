//! Periodic heat kernels on the continuum and on the mesh, and the comparisons
//! between the continuum quantum exponential and its discrete counterpart.

mod auxiliary;
pub mod quadrature;

pub use auxiliary::{
    continuum_quantum_exponential, solve_auxiliary_kernel, AuxiliaryKernelTable, AuxiliaryOptions,
    ContinuumDensity, STALL_LIMIT, STALL_RATIO,
};

use crate::grid::{self, Mesh};
use crate::qmax::{self, QmaxError, SpectralData};
use nalgebra::{DMatrix, DVector};
use quadrature::GaussJacobi;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("kernel time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("no contraction weight on the search grid certifies C_A = {c_a}")]
    GridExhausted { c_a: f64 },
    #[error("Picard iteration is not contracting: ratio {ratio} after {iterations} sweeps (gamma = {gamma})")]
    NonContraction {
        ratio: f64,
        gamma: f64,
        iterations: usize,
    },
    #[error("Picard iteration stopped at delta {delta:e} after {iterations} sweeps")]
    NotConverged { delta: f64, iterations: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Maxwellian(#[from] QmaxError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelParams {
    pub hbar: f64,
    /// Series terms below this are dropped.
    pub tol: f64,
    /// Image sum for `ħ²t` below this, Fourier sum above.
    pub crossover: f64,
}

impl HeatKernelParams {
    pub fn new(hbar: f64) -> Self {
        Self {
            hbar,
            tol: 1e-16,
            crossover: 1.0 / (4.0 * PI),
        }
    }
}

/// `(4πħ²t)^{−1/2} Σ_m exp(−(z−m)²/(4ħ²t))`.
pub fn heat_kernel_images(t: f64, z: f64, params: &HeatKernelParams) -> f64 {
    let s = params.hbar * params.hbar * t;
    let r = z - z.round();
    let mut sum = (-(r * r) / (4.0 * s)).exp();
    for m in 1.. {
        let m = m as f64;
        let a = (-((r - m) * (r - m)) / (4.0 * s)).exp();
        let b = (-((r + m) * (r + m)) / (4.0 * s)).exp();
        sum += a + b;
        if a.max(b) < params.tol {
            break;
        }
    }
    sum / (4.0 * PI * s).sqrt()
}

/// `1 + 2Σ_{k≥1} exp(−(2πk)²ħ²t) cos(2πkz)`.
pub fn heat_kernel_fourier(t: f64, z: f64, params: &HeatKernelParams) -> f64 {
    let s = params.hbar * params.hbar * t;
    let mut sum = 1.0;
    for k in 1.. {
        let kf = k as f64;
        let e = (-(2.0 * PI * kf).powi(2) * s).exp();
        if e < params.tol {
            break;
        }
        sum += 2.0 * e * (2.0 * PI * kf * z).cos();
    }
    sum
}

pub fn heat_kernel(t: f64, z: f64, params: &HeatKernelParams) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    if params.hbar * params.hbar * t < params.crossover {
        Ok(heat_kernel_images(t, z, params))
    } else {
        Ok(heat_kernel_fourier(t, z, params))
    }
}

/// `𝔎_δ^t(ζ) = Σ_k e^{−ω_k ħ² t} cos(2πkζ)` over the frequency window.
pub fn discrete_heat_kernel(t: f64, zeta: usize, mesh: &Mesh, params: &HeatKernelParams) -> f64 {
    let s = params.hbar * params.hbar * t;
    let x = mesh.site(mesh.wrap(zeta as isize));
    mesh.frequencies()
        .iter()
        .map(|&k| (-grid::omega(mesh, k) * s).exp() * (2.0 * PI * k as f64 * x).cos())
        .sum()
}

/// Measured `C_ħ = max_{t∈(0,1]} t^{1/2}·𝔎^t(0)`.
pub fn kernel_sup_constant(params: &HeatKernelParams) -> f64 {
    log_times(1e-8, 1.0, 200)
        .into_iter()
        .map(|t| t.sqrt() * heat_kernel_images(t, 0.0, params))
        .fold(0.0, f64::max)
}

fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Number of certification times and quadrature nodes.
pub const CERTIFY_POINTS: usize = 64;

/// `∫_0^t (t−s)^{−1/2} s^{−1/4} e^{−γ(t−s)} ds` by Gauss–Jacobi in `σ = s/t`.
pub fn memory_integral(t: f64, gamma: f64, rule: &GaussJacobi) -> f64 {
    t.powf(0.25) * rule.integrate_unit(|s| (-gamma * t * (1.0 - s)).exp())
}

/// Times at which the contraction inequality is certified.
pub fn certification_times() -> Vec<f64> {
    log_times(1e-6, 1.0, CERTIFY_POINTS)
}

/// Least `γ` on a logarithmic grid with `C_A·C_ħ·∫… ≤ 1/2` at every certification time.
pub fn contraction_weight(c_a: f64, params: &HeatKernelParams) -> Result<f64, KernelError> {
    if !(c_a >= 0.0) || !c_a.is_finite() {
        return Err(KernelError::InvalidInput(format!("C_A must be finite and non-negative, got {c_a}")));
    }
    if c_a == 0.0 {
        return Ok(0.0);
    }
    let c_h = kernel_sup_constant(params);
    let rule = GaussJacobi::new(CERTIFY_POINTS, -0.5, -0.25);
    let times = certification_times();
    let certified = |gamma: f64| {
        times
            .iter()
            .all(|&t| c_a * c_h * memory_integral(t, gamma, &rule) <= 0.5)
    };
    std::iter::once(0.0)
        .chain(log_times(1e-3, 1e9, 481))
        .find(|&g| certified(g))
        .ok_or(KernelError::GridExhausted { c_a })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelErrorRow {
    pub n: usize,
    pub t: f64,
    /// `max_ξ |𝔎^t(ξ) − 𝔎_δ^t(ξ)|`.
    pub pointwise: f64,
    /// `max_ζ |⨍_{I_ζ} 𝔎^t − 𝔎_δ^t(ζ)|`.
    pub averaged: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedOrder {
    pub t: f64,
    pub pointwise: f64,
    pub averaged: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelErrorReport {
    pub rows: Vec<KernelErrorRow>,
    pub orders: Vec<FittedOrder>,
}

/// Least-squares slope of `log err` against `log δ`.
pub fn fitted_order(deltas: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn kernel_error_report(
    ns: &[usize],
    times: &[f64],
    params: &HeatKernelParams,
) -> Result<KernelErrorReport, KernelError> {
    let mut rows = Vec::new();
    for &t in times {
        if !(t > 0.0 && t <= 1.0) {
            return Err(KernelError::NonPositiveTime(t));
        }
        for &n in ns {
            let mesh = Mesh::new(n).map_err(|e| KernelError::InvalidInput(e.to_string()))?;
            let discrete: Vec<f64> = (0..n).map(|j| discrete_heat_kernel(t, j, &mesh, params)).collect();
            let continuum: Vec<f64> = mesh
                .sites()
                .iter()
                .map(|&x| heat_kernel(t, x, params))
                .collect::<Result<_, _>>()?;
            let averages = grid::cell_average(
                |x| heat_kernel(t, x, params).unwrap_or(f64::NAN),
                &mesh,
            )
            .map_err(|e| KernelError::InvalidInput(e.to_string()))?;
            let sup = |a: &[f64]| a.iter().zip(&discrete).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rows.push(KernelErrorRow {
                n,
                t,
                pointwise: sup(&continuum),
                averaged: sup(&averages),
            });
        }
    }
    let orders = times
        .iter()
        .map(|&t| {
            let sel: Vec<&KernelErrorRow> = rows.iter().filter(|r| r.t == t).collect();
            let deltas: Vec<f64> = sel.iter().map(|r| 1.0 / r.n as f64).collect();
            let pw: Vec<f64> = sel.iter().map(|r| r.pointwise).collect();
            let av: Vec<f64> = sel.iter().map(|r| r.averaged).collect();
            FittedOrder {
                t,
                pointwise: fitted_order(&deltas, &pw),
                averaged: fitted_order(&deltas, &av),
            }
        })
        .collect();
    Ok(KernelErrorReport { rows, orders })
}

/// `exp(τ(ħ²Δ_δ + A))` as a function of `τ`, from one eigendecomposition.
struct Propagator {
    spec: SpectralData,
}

impl Propagator {
    fn new(a: &[f64], hbar: f64, mesh: &Mesh) -> Result<Self, KernelError> {
        Ok(Self {
            spec: SpectralData::of(&qmax::schrodinger_operator(a, hbar, mesh))?,
        })
    }

    fn at(&self, tau: f64) -> DMatrix<f64> {
        self.spec.apply(|l| (tau * l).exp())
    }
}

/// `N·exp(tħ²Δ_δ + tA)`, the kernel `H^t_{A,δ}` at mesh sites.
pub fn discrete_solution_kernel(
    a: &[f64],
    mesh: &Mesh,
    params: &HeatKernelParams,
    t: f64,
) -> Result<DMatrix<f64>, KernelError> {
    mesh.check_len(a.len()).map_err(|e| KernelError::InvalidInput(e.to_string()))?;
    Ok(Propagator::new(a, params.hbar, mesh)?.at(t) / mesh.delta())
}

/// Discrete auxiliary kernel `G^t_{A,δ} = H^t_{A,δ} − 𝔎^t_δ` at mesh sites.
pub fn discrete_auxiliary_kernel(
    a: &[f64],
    mesh: &Mesh,
    params: &HeatKernelParams,
    t: f64,
) -> Result<DMatrix<f64>, KernelError> {
    let zero = vec![0.0; mesh.n_cells()];
    Ok(discrete_solution_kernel(a, mesh, params, t)? - discrete_solution_kernel(&zero, mesh, params, t)?)
}

/// Sup residual of the discrete variation-of-constants identity for `G_{A,δ}^t`.
/// After `s = tσ` the time integral is taken with `rule`; the integrand is
/// divided by the rule's weight `(1−σ)^α σ^β`. The discrete kernels are bounded,
/// so Legendre (`α = β = 0`) converges geometrically while the
/// `α = β = −1/2` weights converge like `n^{−2}`.
pub fn discrete_duhamel_check(
    a: &[f64],
    mesh: &Mesh,
    params: &HeatKernelParams,
    t: f64,
    rule: &GaussJacobi,
) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    mesh.check_len(a.len()).map_err(|e| KernelError::InvalidInput(e.to_string()))?;
    let d = mesh.delta();
    let zero = vec![0.0; a.len()];
    let heat = Propagator::new(&zero, params.hbar, mesh)?;
    let full = Propagator::new(a, params.hbar, mesh)?;
    let lhs = (full.at(t) - heat.at(t)) / d;
    let (sig, w) = rule.unit_interval();
    let diag_a = DMatrix::from_diagonal(&DVector::from_column_slice(a));
    let mut rhs = DMatrix::zeros(a.len(), a.len());
    for (s, w) in sig.iter().zip(&w) {
        let unweight = (1.0 - s).powf(-rule.alpha) * s.powf(-rule.beta);
        rhs += heat.at(t * (1.0 - s)) * &diag_a * full.at(t * s) * (w * t * unweight);
    }
    Ok((lhs - rhs / d).amax())
}

/// Centred-difference residual of `∂_t H = (ħ²Δ_δ + A)H` at time `t`.
pub fn solution_kernel_residual(
    a: &[f64],
    mesh: &Mesh,
    params: &HeatKernelParams,
    t: f64,
    dt: f64,
) -> Result<f64, KernelError> {
    let prop = Propagator::new(a, params.hbar, mesh)?;
    let op = qmax::schrodinger_operator(a, params.hbar, mesh);
    let deriv = (prop.at(t + dt) - prop.at(t - dt)) / (2.0 * dt);
    Ok((deriv - op * prop.at(t)).amax() / mesh.delta())
}

/// `A(x) = cos(2πx)`, the reference potential for static comparisons.
pub fn cosine_potential(x: f64) -> f64 {
    (2.0 * PI * x).cos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticRow {
    pub n: usize,
    /// `max_ξ |n_δ[A_δ](ξ) − n[A](ξ)|`.
    pub density_error: f64,
    /// `max_{ξ,η} |G¹_A − G¹_{A_δ,δ}|` at mesh sites.
    pub kernel_error: f64,
}

/// Compares the discrete Maxwellian density and auxiliary kernel for the
/// cell-averaged potential against the continuum ones.
pub fn static_convergence<F>(
    a: F,
    ns: &[usize],
    continuum: &ContinuumDensity,
    params: &HeatKernelParams,
) -> Result<Vec<StaticRow>, KernelError>
where
    F: Fn(f64) -> f64,
{
    let table = &continuum.table;
    let last = table.last();
    ns.iter()
        .map(|&n| {
            let mesh = Mesh::new(n).map_err(|e| KernelError::InvalidInput(e.to_string()))?;
            let a_delta =
                grid::cell_average(&a, &mesh).map_err(|e| KernelError::InvalidInput(e.to_string()))?;
            let (density, _) = qmax::quantum_exponential(&a_delta, params.hbar, &mesh)?;
            let sites = mesh.sites();
            let density_error = sites
                .iter()
                .zip(&density)
                .map(|(&x, v)| (continuum.eval(x) - v).abs())
                .fold(0.0, f64::max);
            let g_delta = discrete_auxiliary_kernel(&a_delta, &mesh, params, 1.0)?;
            let mut kernel_error: f64 = 0.0;
            for (i, &x) in sites.iter().enumerate() {
                for (j, &y) in sites.iter().enumerate() {
                    kernel_error = kernel_error.max((table.evaluate(last, x, y) - g_delta[(i, j)]).abs());
                }
            }
            Ok(StaticRow {
                n,
                density_error,
                kernel_error,
            })
        })
        .collect()
}
