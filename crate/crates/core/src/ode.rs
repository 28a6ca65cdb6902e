//! Adaptive Dormand–Prince 5(4) integrator for small explicit ODE systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("step budget of {steps} exhausted at t={t}")]
    TooManySteps { steps: usize, t: f64 },
    #[error("non-finite state at t={t}")]
    NonFinite { t: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct Rk45 {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Rk45 {
    fn default() -> Self {
        Rk45 { atol: 1e-12, rtol: 1e-12, h_init: 1e-3, h_max: 1.0, max_steps: 2_000_000 }
    }
}

/// Why [`Rk45::integrate`] returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    Stopped,
}

#[derive(Clone, Debug)]
pub struct OdeOutcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    pub termination: Termination,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Rk45 {
    /// Integrates `y' = f(t, y)` from `t0` to `t_end`.
    ///
    /// `on_step` sees every accepted step and may return `true` to stop early.
    pub fn integrate<F, S>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        mut on_step: S,
    ) -> Result<OdeOutcome, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        S: FnMut(f64, &[f64]) -> bool,
    {
        let n = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut h = self.h_init.min(t_end - t0);
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut steps = 0;
        f(t, &y, &mut k[0]);
        if on_step(t, &y) {
            return Ok(OdeOutcome { t, y, steps, termination: Termination::Stopped });
        }
        while t < t_end {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps { steps, t });
            }
            h = h.min(t_end - t).min(self.h_max);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t });
            }
            let stage = |tmp: &mut [f64], y: &[f64], k: &[Vec<f64>], coeffs: &[f64]| {
                for i in 0..y.len() {
                    let mut acc = 0.0;
                    for (kj, c) in k.iter().zip(coeffs) {
                        acc += c * kj[i];
                    }
                    tmp[i] = y[i] + h * acc;
                }
            };
            stage(&mut tmp, &y, &k[..1], &[A21]);
            f(t + C2 * h, &tmp, &mut k[1]);
            stage(&mut tmp, &y, &k[..2], &[A31, A32]);
            f(t + C3 * h, &tmp, &mut k[2]);
            stage(&mut tmp, &y, &k[..3], &[A41, A42, A43]);
            f(t + C4 * h, &tmp, &mut k[3]);
            stage(&mut tmp, &y, &k[..4], &[A51, A52, A53, A54]);
            f(t + C5 * h, &tmp, &mut k[4]);
            stage(&mut tmp, &y, &k[..5], &[A61, A62, A63, A64, A65]);
            f(t + h, &tmp, &mut k[5]);
            stage(&mut y_new, &y, &k[..6], &[B1, 0.0, B3, B4, B5, B6]);
            f(t + h, &y_new, &mut k[6]);

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                        + E7 * k[6][i]);
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() {
                return Err(OdeError::NonFinite { t });
            }
            if err <= 1.0 {
                t += h;
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                steps += 1;
                if y.iter().any(|x| !x.is_finite()) {
                    return Err(OdeError::NonFinite { t });
                }
                if on_step(t, &y) {
                    return Ok(OdeOutcome { t, y, steps, termination: Termination::Stopped });
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        }
        Ok(OdeOutcome { t, y, steps, termination: Termination::ReachedEnd })
    }
}
