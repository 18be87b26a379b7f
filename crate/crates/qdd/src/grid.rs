//! Uniform periodic mesh on the unit torus and the calculus that lives on it.
//!
//! Sites are stored with index `j = 0..N`, where site `j` sits at `jδ`. Index 0
//! therefore stands for the site `ξ = 1 ≡ 0`. All index arithmetic is cyclic.

use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;
use std::ops::{Mul, Sub};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("a mesh needs at least two cells, got {0}")]
    TooFewCells(usize),
    #[error("field has {got} entries but the mesh has {expected} sites")]
    LengthMismatch { expected: usize, got: usize },
    #[error("norm exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),
    #[error("sampler returned a non-finite value at x = {x}")]
    SamplerFailure { x: f64 },
    #[error("entry {index} is not strictly positive: {value}")]
    NonPositive { index: usize, value: f64 },
}

/// Torus `δ(Z/NZ)` with `δ = 1/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    n: usize,
    delta: f64,
}

impl Mesh {
    pub fn new(n_cells: usize) -> Result<Self, GridError> {
        if n_cells < 2 {
            return Err(GridError::TooFewCells(n_cells));
        }
        Ok(Self {
            n: n_cells,
            delta: 1.0 / n_cells as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Position of site `j` in `[0, 1)`.
    pub fn site(&self, j: usize) -> f64 {
        (j % self.n) as f64 * self.delta
    }

    pub fn sites(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.site(j)).collect()
    }

    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n as isize) as usize
    }

    pub fn next(&self, j: usize) -> usize {
        (j + 1) % self.n
    }

    pub fn prev(&self, j: usize) -> usize {
        (j + self.n - 1) % self.n
    }

    pub fn check_len(&self, len: usize) -> Result<(), GridError> {
        if len == self.n {
            Ok(())
        } else {
            Err(GridError::LengthMismatch {
                expected: self.n,
                got: len,
            })
        }
    }

    /// Dense matrix of `Δ_δ`. For `N = 2` both neighbours coincide and the
    /// off-diagonal entry doubles.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let s = 1.0 / (self.delta * self.delta);
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            l[(j, j)] -= 2.0 * s;
            l[(j, self.next(j))] += s;
            l[(j, self.prev(j))] += s;
        }
        l
    }

    /// The centred window of `N` consecutive frequencies: `-(N/2-1)..=N/2` for
    /// even `N`, `-(N-1)/2..=(N-1)/2` for odd `N`.
    pub fn frequencies(&self) -> Vec<i64> {
        let n = self.n as i64;
        let lo = if n % 2 == 0 { -(n / 2 - 1) } else { -(n - 1) / 2 };
        (lo..lo + n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// `D⁺f` or `D⁻f` with cyclic wraparound.
pub fn difference<T>(f: &[T], mesh: &Mesh, direction: Direction) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
{
    let inv = 1.0 / mesh.delta();
    (0..f.len())
        .map(|j| match direction {
            Direction::Forward => (f[mesh.next(j)] - f[j]) * inv,
            Direction::Backward => (f[j] - f[mesh.prev(j)]) * inv,
        })
        .collect()
}

pub fn forward_difference(f: &[f64], mesh: &Mesh) -> Vec<f64> {
    difference(f, mesh, Direction::Forward)
}

pub fn backward_difference(f: &[f64], mesh: &Mesh) -> Vec<f64> {
    difference(f, mesh, Direction::Backward)
}

/// `Δ_δ f = (f(x+δ) + f(x−δ) − 2f(x))/δ²`.
pub fn apply_laplacian<T>(f: &[T], mesh: &Mesh) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let s = 1.0 / (mesh.delta() * mesh.delta());
    (0..f.len())
        .map(|j| (f[mesh.next(j)] + f[mesh.prev(j)] - f[j] - f[j]) * s)
        .collect()
}

/// `ω_k = 2(1 − cos 2πkδ)/δ²`, evaluated as `4 sin²(πkδ)/δ²`.
pub fn omega(mesh: &Mesh, k: i64) -> f64 {
    let d = mesh.delta();
    let s = (PI * k as f64 * d).sin();
    4.0 * s * s / (d * d)
}

#[derive(Debug, Clone)]
pub struct Mode {
    pub k: i64,
    pub omega: f64,
    /// `[w_k]_j = e^{2πikδj}`, unit norm in `L²_δ`.
    pub vector: Vec<Complex<f64>>,
}

pub fn laplacian_spectrum(mesh: &Mesh) -> Vec<Mode> {
    laplacian_spectrum_in(mesh, &mesh.frequencies())
}

/// Spectrum over an arbitrary list of frequencies. Any `N` consecutive
/// integers give the same operator.
pub fn laplacian_spectrum_in(mesh: &Mesh, window: &[i64]) -> Vec<Mode> {
    let d = mesh.delta();
    window
        .iter()
        .map(|&k| {
            let vector = (0..mesh.n_cells())
                .map(|j| Complex::from_polar(1.0, 2.0 * PI * k as f64 * d * j as f64))
                .collect();
            Mode {
                k,
                omega: omega(mesh, k),
                vector,
            }
        })
        .collect()
}

/// `Σ_k e^{−αω_k}` over the centred window. With `α = ħ²` this is `Z_{ħ²,δ}`.
pub fn exponential_sum(mesh: &Mesh, alpha: f64) -> f64 {
    mesh.frequencies()
        .iter()
        .map(|&k| (-alpha * omega(mesh, k)).exp())
        .sum()
}

/// Scaled norm `(δΣ|f|^p)^{1/p}`; `p = f64::INFINITY` gives the maximum.
pub fn lp_norm(f: &[f64], p: f64, mesh: &Mesh) -> Result<f64, GridError> {
    if p.is_nan() || p < 1.0 {
        return Err(GridError::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(f.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let s: f64 = f.iter().map(|v| v.abs().powf(p)).sum();
    Ok((mesh.delta() * s).powf(1.0 / p))
}

/// Subintervals per cell in [`cell_average`].
pub const CELL_SUBINTERVALS: usize = 32;

/// Interval means over `I_ξ = (ξ − δ/2, ξ + δ/2)` by composite Simpson with
/// [`CELL_SUBINTERVALS`] subintervals. Arguments are reduced into `[0, 1)`
/// before sampling.
pub fn cell_average<F>(g: F, mesh: &Mesh) -> Result<Vec<f64>, GridError>
where
    F: Fn(f64) -> f64,
{
    let d = mesh.delta();
    let m = CELL_SUBINTERVALS;
    let h = d / m as f64;
    let mut out = Vec::with_capacity(mesh.n_cells());
    for j in 0..mesh.n_cells() {
        let a = mesh.site(j) - 0.5 * d;
        let mut acc = 0.0;
        for i in 0..=m {
            let x = (a + i as f64 * h).rem_euclid(1.0);
            let v = g(x);
            if !v.is_finite() {
                return Err(GridError::SamplerFailure { x });
            }
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * v;
        }
        out.push(acc * h / 3.0 / d);
    }
    Ok(out)
}

/// Hat function `Λ_δ^ζ(x)` centred at site `zeta`.
pub fn hat(mesh: &Mesh, zeta: usize, x: f64) -> f64 {
    let d = mesh.delta();
    let u = (x - mesh.site(zeta) + 0.5).rem_euclid(1.0) - 0.5;
    // For N = 2 the support covers the whole circle exactly once.
    (1.0 - u.abs() / d).max(0.0)
}

fn bump_profile(u: f64) -> f64 {
    if !(0.0..3.0).contains(&u) {
        0.0
    } else if u < 1.0 {
        0.5 * u * u
    } else if u < 2.0 {
        let v = u - 1.0;
        0.5 + v - v * v
    } else {
        let w = 3.0 - u;
        0.5 * w * w
    }
}

fn bump_profile_slope(u: f64) -> f64 {
    if !(0.0..3.0).contains(&u) {
        0.0
    } else if u < 1.0 {
        u
    } else if u < 2.0 {
        1.0 - 2.0 * (u - 1.0)
    } else {
        u - 3.0
    }
}

/// Bump `Φ_δ^ζ(x) = δ⁻¹∫_{ζ−δ}^x (Λ^ζ − Λ^{ζ+δ})`, supported on `(ζ−δ, ζ+2δ)`.
/// On very coarse meshes the support wraps onto itself and the periodic images add.
pub fn bump(mesh: &Mesh, zeta: usize, x: f64) -> f64 {
    let n = mesh.n_cells() as f64;
    let u = (x - mesh.site(zeta) + mesh.delta()).rem_euclid(1.0) * n;
    let mut v = 0.0;
    let mut shift = 0.0;
    while u + shift < 3.0 {
        v += bump_profile(u + shift);
        shift += n;
    }
    v
}

pub fn bump_derivative(mesh: &Mesh, zeta: usize, x: f64) -> f64 {
    let n = mesh.n_cells() as f64;
    let u = (x - mesh.site(zeta) + mesh.delta()).rem_euclid(1.0) * n;
    let mut v = 0.0;
    let mut shift = 0.0;
    while u + shift < 3.0 {
        v += bump_profile_slope(u + shift) * n;
        shift += n;
    }
    v
}

/// Locates `x` in cell `[jδ, (j+1)δ)` and returns `(j, θ)` with `θ ∈ [0, 1)`.
fn locate(mesh: &Mesh, x: f64) -> (usize, f64) {
    let s = x.rem_euclid(1.0) * mesh.n_cells() as f64;
    let j = (s.floor() as usize).min(mesh.n_cells() - 1);
    (j, (s - j as f64).clamp(0.0, 1.0))
}

/// Piecewise linear interpolant `n̂(x) = Σ n(ζ)Λ^ζ(x)`.
#[derive(Debug, Clone)]
pub struct HatInterpolant {
    mesh: Mesh,
    values: Vec<f64>,
}

impl HatInterpolant {
    pub fn eval(&self, x: f64) -> f64 {
        let (j, t) = locate(&self.mesh, x);
        (1.0 - t) * self.values[j] + t * self.values[self.mesh.next(j)]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (j, _) = locate(&self.mesh, x);
        (self.values[self.mesh.next(j)] - self.values[j]) / self.mesh.delta()
    }
}

/// Piecewise quadratic interpolant `F(x) = Σ flux(ζ)Φ^ζ(x)`.
#[derive(Debug, Clone)]
pub struct FluxInterpolant {
    mesh: Mesh,
    values: Vec<f64>,
}

impl FluxInterpolant {
    pub fn eval(&self, x: f64) -> f64 {
        let m = &self.mesh;
        let (j, t) = locate(m, x);
        self.values[m.next(j)] * 0.5 * t * t
            + self.values[j] * (0.5 + t - t * t)
            + self.values[m.prev(j)] * 0.5 * (1.0 - t) * (1.0 - t)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let m = &self.mesh;
        let (j, t) = locate(m, x);
        (self.values[m.next(j)] * t + self.values[j] * (1.0 - 2.0 * t)
            - self.values[m.prev(j)] * (1.0 - t))
            / m.delta()
    }
}

pub fn hat_and_flux_interpolants(
    n: &[f64],
    flux: &[f64],
    mesh: &Mesh,
) -> Result<(HatInterpolant, FluxInterpolant), GridError> {
    mesh.check_len(n.len())?;
    mesh.check_len(flux.len())?;
    Ok((
        HatInterpolant {
            mesh: *mesh,
            values: n.to_vec(),
        },
        FluxInterpolant {
            mesh: *mesh,
            values: flux.to_vec(),
        },
    ))
}

/// Discrete Fisher information `δΣ(D⁺√n)²`.
pub fn fisher_discrete(n: &[f64], mesh: &Mesh) -> Result<f64, GridError> {
    mesh.check_len(n.len())?;
    if let Some((index, &value)) = n.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(GridError::NonPositive { index, value });
    }
    let r: Vec<f64> = n.iter().map(|v| v.sqrt()).collect();
    let dr = forward_difference(&r, mesh);
    Ok(mesh.delta() * dr.iter().map(|v| v * v).sum::<f64>())
}

/// Hölder seminorm `sup |f(x)−f(y)|/|x−y|^α` over samples on a uniform grid of
/// the torus, with periodic distance.
pub fn holder_seminorm(samples: &[f64], alpha: f64) -> f64 {
    let m = samples.len();
    let mut best = 0.0_f64;
    for i in 0..m {
        for j in i + 1..m {
            let gap = (j - i).min(m - (j - i)) as f64 / m as f64;
            let q = (samples[i] - samples[j]).abs() / gap.powf(alpha);
            best = best.max(q);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_rejects_single_cell() {
        assert_eq!(Mesh::new(1), Err(GridError::TooFewCells(1)));
    }

    #[test]
    fn nyquist_window_matches_both_parities() {
        assert_eq!(Mesh::new(4).unwrap().frequencies(), vec![-1, 0, 1, 2]);
        assert_eq!(Mesh::new(5).unwrap().frequencies(), vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn laplacian_matrix_on_two_cells() {
        let l = Mesh::new(2).unwrap().laplacian_matrix();
        assert_eq!(l[(0, 0)], -8.0);
        assert_eq!(l[(0, 1)], 8.0);
    }

    #[test]
    fn bump_pieces_join_continuously() {
        for u in [1.0, 2.0] {
            let e = 1e-12;
            assert!((bump_profile(u - e) - bump_profile(u + e)).abs() < 1e-11);
        }
        assert_eq!(bump_profile(1.5), 0.75);
    }

    #[test]
    fn locate_wraps_negative_positions() {
        let m = Mesh::new(4).unwrap();
        let (j, t) = locate(&m, -0.125);
        assert_eq!(j, 3);
        assert!((t - 0.5).abs() < 1e-14);
    }
}
