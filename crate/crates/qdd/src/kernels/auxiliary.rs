//! Auxiliary kernel `G_A` by Picard iteration of the Duhamel operator.
//!
//! `G^t(x,y)` is held as a Fourier matrix `Ĝ^t_{kl}` with
//! `G^t(x,y) = Σ Ĝ^t_{kl} e^{2πi(kx−ly)}`, modes `|k| < P/2`. In this basis the
//! heat semigroup is diagonal and multiplication by `A` is the Toeplitz matrix
//! `T_{kl} = Â_{k−l}`, so one Picard sweep reads
//!
//! `Ĝ^t = ∫_0^1 t·e^{−a t(1−σ)} ∘ [T (Ĝ^{tσ} + diag e^{−a tσ})] dσ`, `a_k = (2πkħ)²`.
//!
//! Time is discretised on Chebyshev–Lobatto levels in `[0, 1]` and `Ĝ^{tσ}` is
//! read off by barycentric interpolation.

use super::{contraction_weight, heat_kernel_images, HeatKernelParams, KernelError};
use super::quadrature::GaussJacobi;
use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;

type C = Complex<f64>;

#[derive(Debug, Clone)]
pub struct AuxiliaryOptions {
    /// Weighted sup-norm stopping tolerance.
    pub tol: f64,
    /// Chebyshev–Lobatto time levels, including `t = 0`.
    pub time_levels: usize,
    /// Gauss–Legendre nodes in `σ`.
    pub sigma_nodes: usize,
    pub max_iter: usize,
}

impl Default for AuxiliaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            time_levels: 65,
            sigma_nodes: 64,
            max_iter: 200,
        }
    }
}

/// Ratio above which an iteration counts as non-contracting.
pub const STALL_RATIO: f64 = 0.9;
/// Consecutive stalled iterations tolerated.
pub const STALL_LIMIT: usize = 5;

#[derive(Debug, Clone)]
pub struct AuxiliaryKernelTable {
    pub p: usize,
    pub hbar: f64,
    pub modes: Vec<i64>,
    /// Working grid `x_j = j/P`.
    pub grid: Vec<f64>,
    pub samples: Vec<f64>,
    /// `t_0 = 0 < t_1 < … < t_last = 1`.
    pub times: Vec<f64>,
    pub coefficients: Vec<DMatrix<C>>,
    /// `values[i][(j, k)] = G^{t_i}(x_j, x_k)`.
    pub values: Vec<DMatrix<f64>>,
    pub c_a: f64,
    pub gamma: f64,
    pub tol: f64,
    /// `sup_t e^{−γt} max|ΔG^t|` per sweep.
    pub history: Vec<f64>,
    /// Unweighted `sup_t max|ΔG^t|` per sweep.
    pub history_unweighted: Vec<f64>,
    /// `sup` of `|G|` over the stored table.
    pub bound: f64,
}

impl AuxiliaryKernelTable {
    pub fn last(&self) -> usize {
        self.times.len() - 1
    }

    /// Bilinear interpolation of `G^{t_i}` between grid nodes.
    pub fn interpolate(&self, level: usize, x: f64, y: f64) -> f64 {
        let v = &self.values[level];
        let p = self.p as f64;
        let (fx, fy) = (x.rem_euclid(1.0) * p, y.rem_euclid(1.0) * p);
        let (i0, j0) = (fx.floor() as usize % self.p, fy.floor() as usize % self.p);
        let (i1, j1) = ((i0 + 1) % self.p, (j0 + 1) % self.p);
        let (u, w) = (fx - fx.floor(), fy - fy.floor());
        (1.0 - u) * (1.0 - w) * v[(i0, j0)]
            + u * (1.0 - w) * v[(i1, j0)]
            + (1.0 - u) * w * v[(i0, j1)]
            + u * w * v[(i1, j1)]
    }

    /// Trigonometric evaluation of `G^{t_i}(x, y)` from the stored coefficients.
    pub fn evaluate(&self, level: usize, x: f64, y: f64) -> f64 {
        let g = &self.coefficients[level];
        let ex: Vec<C> = self.modes.iter().map(|&k| C::from_polar(1.0, 2.0 * PI * k as f64 * x)).collect();
        let ey: Vec<C> = self.modes.iter().map(|&l| C::from_polar(1.0, -2.0 * PI * l as f64 * y)).collect();
        let mut s = C::new(0.0, 0.0);
        for (a, ek) in ex.iter().enumerate() {
            let mut row = C::new(0.0, 0.0);
            for (b, el) in ey.iter().enumerate() {
                row += g[(a, b)] * el;
            }
            s += ek * row;
        }
        s.re
    }

    /// `max |G¹(x,y) − G¹(y,x)|` over the grid.
    pub fn symmetry_defect(&self) -> f64 {
        let v = &self.values[self.last()];
        (v - v.transpose()).amax()
    }

    /// Ratios of successive weighted deltas while the newer one is above `tol`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.history
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > self.tol)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Chebyshev–Lobatto points on `[0, 1]` with their barycentric weights.
fn lobatto_levels(m: usize) -> (Vec<f64>, Vec<f64>) {
    let last = (m - 1) as f64;
    let t = (0..m).map(|i| 0.5 * (1.0 - (PI * i as f64 / last).cos())).collect();
    let w = (0..m)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            if i == 0 || i == m - 1 { 0.5 * s } else { s }
        })
        .collect();
    (t, w)
}

fn cardinals(nodes: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
    if let Some(i) = nodes.iter().position(|&t| t == x) {
        let mut c = vec![0.0; nodes.len()];
        c[i] = 1.0;
        return c;
    }
    let terms: Vec<f64> = nodes.iter().zip(weights).map(|(t, w)| w / (x - t)).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|v| v / total).collect()
}

/// `∫_0^1 t e^{−x(1−σ)} e^{−yσ} dσ` with `x = a_k t`, `y = a_l t`.
fn exp_divided_difference(x: f64, y: f64) -> f64 {
    let lo = x.min(y);
    let gap = (x - y).abs();
    if gap < 1e-8 {
        (-lo).exp() * (1.0 - 0.5 * gap)
    } else {
        (-lo).exp() * (-(-gap).exp_m1()) / gap
    }
}

fn fourier_coefficients<F: Fn(f64) -> f64>(samples_of: &F, p: usize, max_shift: i64) -> Vec<C> {
    let l = 8 * p;
    let vals: Vec<f64> = (0..l).map(|j| samples_of(j as f64 / l as f64)).collect();
    (-max_shift..=max_shift)
        .map(|j| {
            let s: C = vals
                .iter()
                .enumerate()
                .map(|(m, v)| C::from_polar(*v, -2.0 * PI * j as f64 * m as f64 / l as f64))
                .sum();
            s / l as f64
        })
        .collect()
}

fn l1_norm<F: Fn(f64) -> f64>(a: &F, p: usize) -> f64 {
    let l = 8 * p;
    (0..l).map(|j| a(j as f64 / l as f64).abs()).sum::<f64>() / l as f64
}

pub fn solve_auxiliary_kernel<F>(
    a: F,
    p: usize,
    params: &HeatKernelParams,
    options: &AuxiliaryOptions,
) -> Result<AuxiliaryKernelTable, KernelError>
where
    F: Fn(f64) -> f64,
{
    if p < 4 || !p.is_multiple_of(2) {
        return Err(KernelError::InvalidInput(format!("P must be even and at least 4, got {p}")));
    }
    if options.time_levels < 3 || options.sigma_nodes < 2 {
        return Err(KernelError::InvalidInput("too few time levels or σ nodes".into()));
    }
    let hbar = params.hbar;
    let half = (p / 2) as i64 - 1;
    let modes: Vec<i64> = (-half..=half).collect();
    let m = modes.len();
    let grid: Vec<f64> = (0..p).map(|j| j as f64 / p as f64).collect();
    let samples: Vec<f64> = grid.iter().map(|&x| a(x)).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::InvalidInput("potential sampler returned a non-finite value".into()));
    }
    let c_a = l1_norm(&a, p);
    let gamma = contraction_weight(c_a, params)?;

    let ahat = fourier_coefficients(&a, p, 2 * half);
    let toeplitz = DMatrix::from_fn(m, m, |r, c| ahat[(modes[r] - modes[c] + 2 * half) as usize]);
    let rates: Vec<f64> = modes.iter().map(|&k| (2.0 * PI * k as f64 * hbar).powi(2)).collect();

    let (times, bary) = lobatto_levels(options.time_levels);
    let nt = times.len();
    let (sig, wsig) = GaussJacobi::legendre(options.sigma_nodes).unit_interval();

    // Source term, exact in σ.
    let source: Vec<DMatrix<C>> = times
        .iter()
        .map(|&t| {
            DMatrix::from_fn(m, m, |r, c| {
                toeplitz[(r, c)] * (t * exp_divided_difference(rates[r] * t, rates[c] * t))
            })
        })
        .collect();
    // transfer[i][j][k] = Σ_q t_i w_q e^{−a_k t_i(1−σ_q)} ℓ_j(t_i σ_q)
    let transfer: Vec<Vec<Vec<f64>>> = times
        .iter()
        .map(|&t| {
            let mut d = vec![vec![0.0; m]; nt];
            if t == 0.0 {
                return d;
            }
            for (s, w) in sig.iter().zip(&wsig) {
                let card = cardinals(&times, &bary, t * s);
                for (k, rate) in rates.iter().enumerate() {
                    let e = t * w * (-rate * t * (1.0 - s)).exp();
                    for j in 0..nt {
                        d[j][k] += e * card[j];
                    }
                }
            }
            d
        })
        .collect();

    let synth = DMatrix::from_fn(p, m, |j, k| C::from_polar(1.0, 2.0 * PI * modes[k] as f64 * grid[j]));
    let synth_adj = synth.adjoint();
    let to_grid = |g: &DMatrix<C>| -> DMatrix<f64> { (&synth * g * &synth_adj).map(|z| z.re) };

    let mut coeffs = vec![DMatrix::<C>::zeros(m, m); nt];
    let mut values = vec![DMatrix::<f64>::zeros(p, p); nt];
    let mut history = Vec::new();
    let mut history_unweighted = Vec::new();
    let mut stalled = 0usize;
    loop {
        let products: Vec<DMatrix<C>> = coeffs.iter().map(|g| &toeplitz * g).collect();
        let mut next = Vec::with_capacity(nt);
        for i in 0..nt {
            let mut g = source[i].clone();
            for (j, prod) in products.iter().enumerate() {
                let d = &transfer[i][j];
                if d.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for r in 0..m {
                    let f = d[r];
                    for c in 0..m {
                        g[(r, c)] += prod[(r, c)] * f;
                    }
                }
            }
            next.push(g);
        }
        let new_values: Vec<DMatrix<f64>> = next.iter().map(&to_grid).collect();
        let mut weighted: f64 = 0.0;
        let mut plain: f64 = 0.0;
        for i in 0..nt {
            let diff = (&new_values[i] - &values[i]).amax();
            weighted = weighted.max((-gamma * times[i]).exp() * diff);
            plain = plain.max(diff);
        }
        if let Some(&prev) = history.last() {
            if prev > 0.0 && weighted > options.tol && weighted / prev > STALL_RATIO {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(weighted);
        history_unweighted.push(plain);
        coeffs = next;
        values = new_values;
        if stalled >= STALL_LIMIT {
            return Err(KernelError::NonContraction {
                ratio: weighted / history[history.len() - 2],
                gamma,
                iterations: history.len(),
            });
        }
        // The weighted delta hides late times once γ is large, so stop on the
        // plain delta, which dominates it.
        if plain <= options.tol {
            break;
        }
        if history.len() >= options.max_iter {
            return Err(KernelError::NotConverged {
                delta: plain,
                iterations: history.len(),
            });
        }
    }
    let bound = values.iter().map(DMatrix::amax).fold(0.0, f64::max);
    Ok(AuxiliaryKernelTable {
        p,
        hbar,
        modes,
        grid,
        samples,
        times,
        coefficients: coeffs,
        values,
        c_a,
        gamma,
        tol: options.tol,
        history,
        history_unweighted,
        bound,
    })
}

/// Evaluator for the continuum density `n[A](x) = G¹_A(x,x) + 𝔎¹(0)`.
#[derive(Debug, Clone)]
pub struct ContinuumDensity {
    pub table: AuxiliaryKernelTable,
    pub kernel_at_zero: f64,
}

impl ContinuumDensity {
    pub fn eval(&self, x: f64) -> f64 {
        self.table.evaluate(self.table.last(), x, x) + self.kernel_at_zero
    }
}

pub fn continuum_quantum_exponential<F>(
    a: F,
    p: usize,
    params: &HeatKernelParams,
    options: &AuxiliaryOptions,
) -> Result<ContinuumDensity, KernelError>
where
    F: Fn(f64) -> f64,
{
    let table = solve_auxiliary_kernel(a, p, params, options)?;
    Ok(ContinuumDensity {
        table,
        kernel_at_zero: heat_kernel_images(1.0, 0.0, params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinals_reproduce_polynomials() {
        let (t, w) = lobatto_levels(9);
        let x = 0.37;
        let c = cardinals(&t, &w, x);
        let p = |s: f64| 1.0 - 2.0 * s + 3.0 * s.powi(5);
        let interp: f64 = c.iter().zip(&t).map(|(c, s)| c * p(*s)).sum();
        assert!((interp - p(x)).abs() < 1e-13);
    }

    #[test]
    fn divided_difference_matches_quadrature() {
        let g = GaussJacobi::legendre(40);
        let (x, y) = (3.0, 0.5);
        let q = g.integrate_unit(|s| (-x * (1.0 - s)).exp() * (-y * s).exp());
        assert!((q - exp_divided_difference(x, y)).abs() < 1e-14);
        assert!((exp_divided_difference(2.0, 2.0) - (-2f64).exp()).abs() < 1e-15);
    }
}
