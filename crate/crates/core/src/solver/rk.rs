//! Dormand-Prince 5(4) with FSAL and a PI step-size controller, on a
//! two-component state.

use crate::error::Result;
use crate::numeric::two_sum;

pub(crate) type State = [f64; 2];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// 5th-order weights (same as the last row of `A`).
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Result of one trial step.
pub(crate) struct Trial {
    /// Increment `y_new - y` (before compensated accumulation).
    pub delta: State,
    /// Right-hand side at the new point (first stage of the next step).
    pub k_last: State,
    /// Scaled RMS error estimate; `<= 1` means accept.
    pub err: f64,
}

pub(crate) fn trial_step<F>(rhs: &mut F, x: f64, y: State, k1: State, h: f64, rtol: f64, atol: f64) -> Result<Trial>
where
    F: FnMut(f64, State) -> Result<State>,
{
    let mut k = [[0.0; 2]; 7];
    k[0] = k1;
    for s in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                ys[0] += h * a * kj[0];
                ys[1] += h * a * kj[1];
            }
        }
        k[s] = rhs(x + C[s] * h, ys)?;
    }
    let mut delta = [0.0; 2];
    let mut errv = [0.0; 2];
    for i in 0..2 {
        let mut d = 0.0;
        let mut e = 0.0;
        for s in 0..7 {
            d += B[s] * k[s][i];
            e += E[s] * k[s][i];
        }
        delta[i] = h * d;
        errv[i] = h * e;
    }
    let mut sum = 0.0;
    for i in 0..2 {
        let sc = atol + rtol * y[i].abs().max((y[i] + delta[i]).abs());
        sum += (errv[i] / sc).powi(2);
    }
    Ok(Trial { delta, k_last: k[6], err: (sum / 2.0).sqrt() })
}

/// PI controller (Hairer-Wanner constants for order 5).
pub(crate) struct Controller {
    prev_err: f64,
}

impl Controller {
    const SAFETY: f64 = 0.9;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;
    const MIN_FACTOR: f64 = 0.2;
    const MAX_FACTOR: f64 = 5.0;

    pub fn new() -> Self {
        Controller { prev_err: 1e-4 }
    }

    /// Step-size factor after an accepted step.
    pub fn accept(&mut self, err: f64) -> f64 {
        let err = err.max(1e-10);
        let fac = Self::SAFETY * err.powf(-Self::ALPHA) * self.prev_err.powf(Self::BETA);
        self.prev_err = err;
        fac.clamp(Self::MIN_FACTOR, Self::MAX_FACTOR)
    }

    /// Step-size factor after a rejected step.
    pub fn reject(&self, err: f64) -> f64 {
        if !err.is_finite() {
            return 0.25;
        }
        (Self::SAFETY * err.powf(-Self::ALPHA)).clamp(Self::MIN_FACTOR, 1.0)
    }
}

/// A state with an optional running compensation term.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Accumulator {
    pub value: State,
    carry: State,
    compensated: bool,
}

impl Accumulator {
    pub fn new(value: State, compensated: bool) -> Self {
        Accumulator { value, carry: [0.0; 2], compensated }
    }

    pub fn add(&self, delta: State) -> Self {
        if !self.compensated {
            return Accumulator { value: [self.value[0] + delta[0], self.value[1] + delta[1]], ..*self };
        }
        let mut out = *self;
        for i in 0..2 {
            let (s, e) = two_sum(self.value[i], delta[i] + self.carry[i]);
            out.value[i] = s;
            out.carry[i] = e;
        }
        out
    }
}
