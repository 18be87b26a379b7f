//! Explicit Runge–Kutta building blocks shared by the Liouville and nlQDD
//! integrators: the Dormand–Prince 5(4) tableau, classical RK4, and a minimal
//! vector-space trait so both real fields and complex matrices can be stepped.

use nalgebra::{Complex, DMatrix};

pub trait OdeState: Clone {
    /// `self += a·x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scaled(&self, a: f64) -> Self;
    /// `max_i |e_i| / (atol + rtol·max(|y_i|, |z_i|))`.
    fn error_ratio(e: &Self, y: &Self, z: &Self, tol: f64) -> f64;
}

impl OdeState for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }

    fn scaled(&self, a: f64) -> Self {
        self.iter().map(|v| a * v).collect()
    }

    fn error_ratio(e: &Self, y: &Self, z: &Self, tol: f64) -> f64 {
        e.iter()
            .zip(y.iter().zip(z))
            .map(|(e, (y, z))| e.abs() / (tol * (1.0 + y.abs().max(z.abs()))))
            .fold(0.0, f64::max)
    }
}

impl OdeState for DMatrix<Complex<f64>> {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * Complex::new(a, 0.0);
    }

    fn scaled(&self, a: f64) -> Self {
        self * Complex::new(a, 0.0)
    }

    fn error_ratio(e: &Self, y: &Self, z: &Self, tol: f64) -> f64 {
        let scale = y.norm().max(z.norm());
        e.norm() / (tol * (1.0 + scale))
    }
}

#[cfg(test)]
pub(crate) const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

pub(crate) const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

#[cfg(test)]
/// Fifth-order weights (equal to the last row of `DP_A`, first-same-as-last).
pub(crate) const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Difference between fifth- and fourth-order weights.
pub(crate) const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Result of one Dormand–Prince attempt.
pub(crate) struct DpStep<S, X> {
    pub y: S,
    /// Whatever the RHS returned at the new point.
    pub extra_end: X,
    pub error: S,
}

/// One Dormand–Prince step from `y` with derivative `k1`. Any RHS failure
/// aborts the attempt.
pub(crate) fn dormand_prince<S, X, E, F>(y: &S, k1: &S, h: f64, mut f: F) -> Result<DpStep<S, X>, E>
where
    S: OdeState,
    F: FnMut(&S) -> Result<(S, X), E>,
{
    let mut ks: Vec<S> = Vec::with_capacity(7);
    ks.push(k1.clone());
    let mut extra = None;
    for i in 1..7 {
        let mut stage = y.clone();
        for (j, k) in ks.iter().enumerate() {
            let a = DP_A[i][j];
            if a != 0.0 {
                stage.axpy(h * a, k);
            }
        }
        if i == 6 {
            // Row 6 equals the fifth-order solution.
            let (k, x) = f(&stage)?;
            ks.push(k);
            extra = Some((stage, x));
        } else {
            let (k, _) = f(&stage)?;
            ks.push(k);
        }
    }
    let (ynew, x) = extra.expect("seven stages evaluated");
    let mut err = ks[0].scaled(h * DP_E[0]);
    for (i, k) in ks.iter().enumerate().skip(1) {
        if DP_E[i] != 0.0 {
            err.axpy(h * DP_E[i], k);
        }
    }
    Ok(DpStep {
        y: ynew,
        extra_end: x,
        error: err,
    })
}

/// Classical fourth-order Runge–Kutta step; returns the new state only.
pub(crate) fn rk4<S, E, F>(y: &S, k1: &S, h: f64, mut f: F) -> Result<S, E>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S, E>,
{
    let mut y2 = y.clone();
    y2.axpy(0.5 * h, k1);
    let k2 = f(&y2)?;
    let mut y3 = y.clone();
    y3.axpy(0.5 * h, &k2);
    let k3 = f(&y3)?;
    let mut y4 = y.clone();
    y4.axpy(h, &k3);
    let k4 = f(&y4)?;
    let mut out = y.clone();
    out.axpy(h / 6.0, k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    Ok(out)
}

/// Standard step-size update with safety factor 0.9 and growth in `[0.2, 5]`.
pub(crate) fn next_step(h: f64, ratio: f64, order: f64) -> f64 {
    let factor = if ratio <= 0.0 {
        5.0
    } else {
        (0.9 * ratio.powf(-1.0 / order)).clamp(0.2, 5.0)
    };
    h * factor
}
