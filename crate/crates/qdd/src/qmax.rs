//! Discrete quantum Maxwellians `M = exp(ħ²Δ_δ + diag A)`.
//!
//! The inverse problem `diag M = δn` is solved by damped Newton on the convex
//! dual `Φ(A) = tr exp(ħ²Δ_δ + A) − Σ δn_j A_j`. Its Hessian is the
//! Daleckii–Krein derivative of the diagonal, assembled from log-mean weights.

use crate::grid::{self, Mesh};
use nalgebra::{ComplexField, DMatrix, DVector};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QmaxError {
    #[error("eigensolver did not converge (n = {n}, max |entry| = {max_entry:e}, finite = {finite})")]
    Eigensolver {
        n: usize,
        max_entry: f64,
        finite: bool,
    },
    #[error("density entry {index} is not strictly positive: {value}")]
    NonPositiveDensity { index: usize, value: f64 },
    #[error("Newton solve stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("line search failed at iteration {iteration} with residual {residual:e}")]
    LineSearch { iteration: usize, residual: f64 },
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix has a negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn of(m: &DMatrix<f64>) -> Result<Self, QmaxError> {
        let n = m.nrows();
        let finite = m.iter().all(|v| v.is_finite());
        let fail = || QmaxError::Eigensolver {
            n,
            max_entry: m.amax(),
            finite,
        };
        if !finite {
            return Err(fail());
        }
        let eig = m
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or_else(fail)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (c, &k) in order.iter().enumerate() {
            eigenvectors.set_column(c, &eig.eigenvectors.column(k));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// `V f(Λ) Vᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (c, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(c).scale_mut(s);
        }
        scaled * v.transpose()
    }
}

/// `ħ²Δ_δ + diag A`.
pub fn schrodinger_operator(a: &[f64], hbar: f64, mesh: &Mesh) -> DMatrix<f64> {
    let mut h = mesh.laplacian_matrix() * (hbar * hbar);
    for (j, v) in a.iter().enumerate() {
        h[(j, j)] += v;
    }
    h
}

/// `Z_{ħ²,δ} = Σ_k e^{−ħ²ω_k}`.
pub fn partition_function(hbar: f64, mesh: &Mesh) -> f64 {
    grid::exponential_sum(mesh, hbar * hbar)
}

/// Lower entropy bound `ℍ̱_{ħ²} = −√π/(4ħ)`.
pub fn entropy_floor(hbar: f64) -> f64 {
    -PI.sqrt() / (4.0 * hbar)
}

/// The same bound with `ħ²` replaced by `ħ²/2`.
pub fn entropy_floor_half(hbar: f64) -> f64 {
    entropy_floor(hbar / 2.0_f64.sqrt())
}

/// Returns `(n, M)` with `M = exp(ħ²Δ_δ + A)` and `n_j = M_jj/δ`.
pub fn quantum_exponential(
    a: &[f64],
    hbar: f64,
    mesh: &Mesh,
) -> Result<(Vec<f64>, DMatrix<f64>), QmaxError> {
    check_len(mesh, a.len())?;
    let spec = SpectralData::of(&schrodinger_operator(a, hbar, mesh))?;
    let m = spec.apply(f64::exp);
    let n = m.diagonal().iter().map(|v| v / mesh.delta()).collect();
    Ok((n, m))
}

/// Logarithmic mean of `e^a` and `e^b`, i.e. the divided difference of `exp`.
pub fn log_mean_exp(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() < 1e-8 {
        (0.5 * (a + b)).exp() * (1.0 + d * d / 24.0)
    } else {
        let (hi, gap) = if d > 0.0 { (a, d) } else { (b, -d) };
        hi.exp() * (-(-gap).exp_m1()) / gap
    }
}

/// Log-mean weights `Λ(e^{λ_k}, e^{λ_l})`.
fn log_mean_table(lam: &DVector<f64>) -> DMatrix<f64> {
    let n = lam.len();
    DMatrix::from_fn(n, n, |k, l| log_mean_exp(lam[k], lam[l]))
}

/// Assembles `Σ_{p≤q} c_pq · x_pq y_pqᵀ` where `x_pq = v_p∘v_q` and the
/// columns of `y` are produced by `right`.
fn pair_product(
    spec: &SpectralData,
    right: impl Fn(usize, usize, usize) -> f64,
) -> DMatrix<f64> {
    let v = &spec.eigenvectors;
    let n = v.nrows();
    let lm = log_mean_table(&spec.eigenvalues);
    let pairs = n * (n + 1) / 2;
    let mut left = DMatrix::zeros(n, pairs);
    let mut rt = DMatrix::zeros(pairs, n);
    let mut c = 0;
    for p in 0..n {
        for q in p..n {
            let w = if p == q { lm[(p, q)] } else { 2.0 * lm[(p, q)] };
            for j in 0..n {
                left[(j, c)] = right(j, p, q) * w;
                rt[(c, j)] = v[(j, p)] * v[(j, q)];
            }
            c += 1;
        }
    }
    left * rt
}

/// Hessian of the dual, `∂(diag M)_j/∂A_m`, from the spectral data of `ħ²Δ_δ + A`.
pub fn jacobian_from_spectrum(spec: &SpectralData) -> DMatrix<f64> {
    let v = &spec.eigenvectors;
    let j = pair_product(spec, |j, p, q| v[(j, p)] * v[(j, q)]);
    symmetrize(j)
}

/// `∂M_{k,k+1}/∂A_m`, the sensitivity of the upper off-diagonal.
pub fn offdiagonal_jacobian(spec: &SpectralData) -> DMatrix<f64> {
    let v = &spec.eigenvectors;
    let n = v.nrows();
    pair_product(spec, |k, p, q| {
        let k1 = (k + 1) % n;
        0.5 * (v[(k, p)] * v[(k1, q)] + v[(k, q)] * v[(k1, p)])
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn dual_jacobian(a: &[f64], hbar: f64, mesh: &Mesh) -> Result<DMatrix<f64>, QmaxError> {
    check_len(mesh, a.len())?;
    let spec = SpectralData::of(&schrodinger_operator(a, hbar, mesh))?;
    Ok(jacobian_from_spectrum(&spec))
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Residual target on `‖diag M − δn‖_∞`; `None` means `1e-11·‖δn‖_∞`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 100,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxwellianState {
    pub mesh: Mesh,
    pub hbar: f64,
    pub potential: Vec<f64>,
    pub density: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub nu_plus: Vec<f64>,
    pub nu_minus: Vec<f64>,
    pub spectral: SpectralData,
    pub entropy: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl MaxwellianState {
    /// Occupation numbers `ρ_k = e^{λ_k}` and orbitals `φ_k = δ^{-1/2} v_k`.
    pub fn orbitals(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let s = 1.0 / self.mesh.delta().sqrt();
        let rho = self.spectral.eigenvalues.iter().map(|l| l.exp()).collect();
        let phi = self
            .spectral
            .eigenvectors
            .column_iter()
            .map(|c| c.iter().map(|v| v * s).collect())
            .collect();
        (rho, phi)
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        jacobian_from_spectrum(&self.spectral)
    }
}

fn check_len(mesh: &Mesh, got: usize) -> Result<(), QmaxError> {
    if got == mesh.n_cells() {
        Ok(())
    } else {
        Err(QmaxError::Dimension {
            expected: mesh.n_cells(),
            got,
        })
    }
}

struct Trial {
    a: DVector<f64>,
    spec: SpectralData,
    diag: DVector<f64>,
    dual: f64,
    residual: f64,
}

fn evaluate(
    a: DVector<f64>,
    lap: &DMatrix<f64>,
    target: &DVector<f64>,
) -> Result<Trial, QmaxError> {
    let mut h = lap.clone();
    for j in 0..a.len() {
        h[(j, j)] += a[j];
    }
    let spec = SpectralData::of(&h)?;
    let v = &spec.eigenvectors;
    let e: Vec<f64> = spec.eigenvalues.iter().map(|l| l.exp()).collect();
    let n = a.len();
    let diag = DVector::from_fn(n, |j, _| (0..n).map(|k| v[(j, k)] * v[(j, k)] * e[k]).sum());
    let dual = e.iter().sum::<f64>() - target.dot(&a);
    let residual = (&diag - target).amax();
    Ok(Trial {
        a,
        spec,
        diag,
        dual,
        residual,
    })
}

/// Roundoff level of the dual: eigenvalues carry absolute errors of order `ε‖H‖`.
fn dual_noise(t: &Trial, lap_norm: f64) -> f64 {
    let h = lap_norm + t.a.amax();
    let mass: f64 = t.spec.eigenvalues.iter().map(|l| l.exp()).sum();
    64.0 * f64::EPSILON * (h * mass + t.dual.abs() + 1.0)
}

/// Finds `A` with `diag exp(ħ²Δ_δ + A) = δn`.
pub fn solve_potential(
    n: &[f64],
    hbar: f64,
    mesh: &Mesh,
    opts: &SolveOptions,
) -> Result<MaxwellianState, QmaxError> {
    check_len(mesh, n.len())?;
    if let Some((index, &value)) = n.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(QmaxError::NonPositiveDensity { index, value });
    }
    let d = mesh.delta();
    let target = DVector::from_iterator(n.len(), n.iter().map(|v| v * d));
    let tol = opts.tol.unwrap_or(1e-11 * target.amax());
    let lap = mesh.laplacian_matrix() * (hbar * hbar);
    let h_norm = 4.0 * hbar * hbar / (d * d);

    let a0 = match &opts.warm_start {
        Some(w) if w.len() == n.len() && w.iter().all(|v| v.is_finite()) => {
            DVector::from_column_slice(w)
        }
        _ => target.map(f64::ln),
    };
    let mut cur = evaluate(a0, &lap, &target)?;
    let mut iterations = 0;
    while cur.residual > tol {
        if iterations >= opts.max_iter {
            return Err(QmaxError::NotConverged {
                iterations,
                residual: cur.residual,
            });
        }
        iterations += 1;
        let grad = &cur.diag - &target;
        let jac = jacobian_from_spectrum(&cur.spec);
        let step = match jac.clone().cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => jac
                .lu()
                .solve(&(-&grad))
                .unwrap_or_else(|| -grad.clone()),
        };
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = evaluate(&cur.a + &step * alpha, &lap, &target);
            if let Ok(t) = trial {
                let armijo = t.dual <= cur.dual + 1e-4 * alpha * slope;
                // Near the optimum the dual decrease drops below roundoff;
                // a smaller residual then decides.
                let flat = (t.dual - cur.dual).abs() <= dual_noise(&cur, h_norm) && t.residual < cur.residual;
                if t.dual.is_finite() && (armijo || flat) {
                    break Some(t);
                }
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some(t) => cur = t,
            None => {
                return Err(QmaxError::LineSearch {
                    iteration: iterations,
                    residual: cur.residual,
                })
            }
        }
    }
    Ok(assemble(cur, n.to_vec(), hbar, mesh, iterations))
}

fn assemble(t: Trial, density: Vec<f64>, hbar: f64, mesh: &Mesh, iterations: usize) -> MaxwellianState {
    let matrix = t.spec.apply(f64::exp);
    let (nu_plus, nu_minus) = nu_coefficients(&matrix, mesh);
    let potential: Vec<f64> = t.a.iter().copied().collect();
    let entropy = mesh.delta()
        * density
            .iter()
            .zip(&potential)
            .map(|(n, a)| n * a)
            .sum::<f64>();
    MaxwellianState {
        mesh: *mesh,
        hbar,
        potential,
        density,
        matrix,
        nu_plus,
        nu_minus,
        spectral: t.spec,
        entropy,
        iterations,
        residual: t.residual,
    }
}

/// `ℍ(n) = δΣ nA`.
pub fn entropy(state: &MaxwellianState) -> f64 {
    state.entropy
}

/// `ν⁺(kδ) = M_{k,k+1}/δ`, `ν⁻(kδ) = M_{k,k−1}/δ`.
pub fn nu_coefficients(m: &DMatrix<f64>, mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
    let d = mesh.delta();
    let n = mesh.n_cells();
    let plus = (0..n).map(|k| m[(k, mesh.next(k))] / d).collect();
    let minus = (0..n).map(|k| m[(k, mesh.prev(k))] / d).collect();
    (plus, minus)
}

/// `n(jδ) = R_jj/δ`.
pub fn density_of<T: ComplexField<RealField = f64>>(
    r: &DMatrix<T>,
    mesh: &Mesh,
) -> Result<Vec<f64>, QmaxError> {
    check_len(mesh, r.nrows())?;
    let n: Vec<f64> = (0..r.nrows())
        .map(|j| r[(j, j)].clone().real() / mesh.delta())
        .collect();
    if let Some((index, &value)) = n.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(QmaxError::NonPositiveDensity { index, value });
    }
    Ok(n)
}

/// Frobenius norm of `R − R*`.
pub fn hermiticity_defect<T: ComplexField<RealField = f64>>(r: &DMatrix<T>) -> f64 {
    (r - r.adjoint()).norm()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<T: ComplexField<RealField = f64>>(
    r: &DMatrix<T>,
) -> Result<Vec<f64>, QmaxError> {
    let defect = hermiticity_defect(r);
    if defect > 1e-10 * r.norm().max(1.0) {
        return Err(QmaxError::NotHermitian { defect });
    }
    let n = r.nrows();
    let sym = (r + r.adjoint()) * T::from_real(0.5);
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(QmaxError::Eigensolver {
            n,
            max_entry: r.iter().map(|v| v.clone().modulus()).fold(0.0, f64::max),
            finite: true,
        })?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `tr(Δ_δ R)`, real part.
pub fn trace_laplacian<T: ComplexField<RealField = f64>>(r: &DMatrix<T>, mesh: &Mesh) -> f64 {
    let s = 1.0 / (mesh.delta() * mesh.delta());
    let n = mesh.n_cells();
    (0..n)
        .map(|j| {
            (r[(mesh.next(j), j)].clone().real() + r[(mesh.prev(j), j)].clone().real()
                - 2.0 * r[(j, j)].clone().real())
                * s
        })
        .sum()
}

/// `tr(R log R) − ħ² tr(Δ_δ R)` with `0·log 0 = 0`.
pub fn free_energy<T: ComplexField<RealField = f64>>(
    r: &DMatrix<T>,
    hbar: f64,
    mesh: &Mesh,
) -> Result<f64, QmaxError> {
    check_len(mesh, r.nrows())?;
    let ev = hermitian_eigenvalues(r)?;
    let mut s = 0.0;
    for &l in &ev {
        if l < -1e-12 {
            return Err(QmaxError::NotPositive(l));
        }
        if l > 0.0 {
            s += l * l.ln();
        }
    }
    Ok(s - hbar * hbar * trace_laplacian(r, mesh))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_mean_branches_agree_at_the_switch() {
        let a = 0.3;
        let d: f64 = 1e-8;
        let series = (a + 0.5 * d).exp() * (1.0 + d * d / 24.0);
        let direct = (a + d).exp() * (-(-d).exp_m1()) / d;
        assert!((series - direct).abs() < 1e-15);
        // slope e^a/2 across the switch, no jump
        let jump = log_mean_exp(a + 1.01e-8, a) - log_mean_exp(a + 0.99e-8, a);
        assert!((jump - 0.5 * a.exp() * 0.02e-8).abs() < 1e-15);
        assert!((log_mean_exp(a, a) - a.exp()).abs() < 1e-15);
    }

    #[test]
    fn log_mean_is_symmetric_and_large_gap_safe() {
        assert_eq!(log_mean_exp(-700.0, 1.0), log_mean_exp(1.0, -700.0));
        let v = log_mean_exp(2.0, -3.0);
        assert!((v - (2f64.exp() - (-3f64).exp()) / 5.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_data_sorts_ascending() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let s = SpectralData::of(&m).unwrap();
        assert_eq!(s.eigenvalues[0], -1.0);
        assert_eq!(s.eigenvectors[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn nonfinite_matrix_is_reported() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(
            SpectralData::of(&m),
            Err(QmaxError::Eigensolver { finite: false, .. })
        ));
    }
}
