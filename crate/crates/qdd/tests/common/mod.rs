//! Test-side oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qdd::grid::Mesh;
use twofloat::TwoFloat;

type Dd = DMatrix<TwoFloat>;

fn dd_mul(a: &Dd, b: &Dd) -> Dd {
    let n = a.nrows();
    Dd::from_fn(n, n, |i, j| {
        let mut s = TwoFloat::from(0.0);
        for k in 0..n {
            s += a[(i, k)] * b[(k, j)];
        }
        s
    })
}

/// `exp(ħ²Δ_δ + diag a)` by scaling and squaring a Taylor series in
/// double-double arithmetic, rounded to `f64`.
pub fn maxwellian_matrix_dd(a: &[f64], hbar: f64, mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.n_cells();
    let h = TwoFloat::from(hbar);
    let c = h * h * TwoFloat::from((n * n) as f64);
    let mut m = Dd::from_element(n, n, TwoFloat::from(0.0));
    for j in 0..n {
        m[(j, j)] = TwoFloat::from(a[j]) - c * 2.0;
        m[(j, mesh.next(j))] += c;
        m[(j, mesh.prev(j))] += c;
    }
    let norm = (0..n)
        .map(|i| (0..n).map(|j| f64::from(m[(i, j)]).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = (norm / 0.5).log2().ceil().max(0.0) as i32;
    let scale = TwoFloat::from(2f64.powi(-squarings));
    let x = m.map(|v| v * scale);
    let eye = Dd::from_fn(n, n, |i, j| TwoFloat::from(if i == j { 1.0 } else { 0.0 }));
    // Horner form of Σ_{k≤24} X^k/k!.
    let mut p = eye.clone();
    for k in (1..=24).rev() {
        let inv = TwoFloat::from(1.0) / TwoFloat::from(k as f64);
        p = &eye + dd_mul(&x, &p).map(|v| v * inv);
    }
    for _ in 0..squarings {
        p = dd_mul(&p, &p);
    }
    p.map(f64::from)
}
