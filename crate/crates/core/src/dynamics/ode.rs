//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Step-size control settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest accepted step.
    pub h_max: f64,
    /// Abort after this many attempted steps within one `advance` call.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
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
// Difference between the fifth- and embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator state. The step size carries over between `advance` calls so
/// that sampling a trajectory does not restart the controller.
#[derive(Clone, Debug)]
pub struct Dopri5 {
    opts: OdeOptions,
    h: Option<f64>,
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(dim: usize, opts: OdeOptions) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Dopri5 {
            opts,
            h: None,
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
            evaluations: 0,
            accepted: 0,
            rejected: 0,
        }
    }

    fn stage(&mut self, y: &[Complex64], coeffs: &[(usize, f64)], h: f64) {
        for (i, t) in self.tmp.iter_mut().enumerate() {
            let mut acc = y[i];
            for &(s, a) in coeffs {
                acc += self.k[s][i] * (a * h);
            }
            *t = acc;
        }
    }

    /// Integrates `dy/dt = f(t, y)` from `*t` to `t_end`, updating `y` and `t`.
    pub fn advance<F>(&mut self, f: &mut F, t: &mut f64, y: &mut [Complex64], t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let span = t_end - *t;
        if span <= 0.0 {
            return Ok(());
        }
        let n = y.len();
        f(*t, y, &mut self.k[0]);
        self.evaluations += 1;
        let mut h = self.h.unwrap_or_else(|| initial_step(y, &self.k[0], span, &self.opts));
        let mut steps = 0usize;
        while *t < t_end {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::Integration(format!("step limit exceeded at t = {}", *t)));
            }
            h = h.min(self.opts.h_max);
            let last = *t + h >= t_end;
            let hh = if last { t_end - *t } else { h };
            if hh <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration(format!("step size underflow at t = {}", *t)));
            }
            let t0 = *t;
            self.stage(y, &[(0, A21)], hh);
            f(t0 + C2 * hh, &self.tmp, &mut self.k[1]);
            self.stage(y, &[(0, A31), (1, A32)], hh);
            f(t0 + C3 * hh, &self.tmp, &mut self.k[2]);
            self.stage(y, &[(0, A41), (1, A42), (2, A43)], hh);
            f(t0 + C4 * hh, &self.tmp, &mut self.k[3]);
            self.stage(y, &[(0, A51), (1, A52), (2, A53), (3, A54)], hh);
            f(t0 + C5 * hh, &self.tmp, &mut self.k[4]);
            self.stage(y, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], hh);
            f(t0 + hh, &self.tmp, &mut self.k[5]);
            for i in 0..n {
                self.y_new[i] = y[i]
                    + (self.k[0][i] * B1
                        + self.k[2][i] * B3
                        + self.k[3][i] * B4
                        + self.k[4][i] * B5
                        + self.k[5][i] * B6)
                        * hh;
            }
            f(t0 + hh, &self.y_new, &mut self.k[6]);
            self.evaluations += 6;
            let mut err = 0.0;
            for i in 0..n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * hh;
                let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(self.y_new[i].norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite error estimate at t = {t0}")));
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                y.copy_from_slice(&self.y_new);
                *t = if last { t_end } else { t0 + hh };
                self.k.swap(0, 6);
                self.accepted += 1;
                // Keep the controller's proposal rather than the truncated final step.
                if !last || hh >= h {
                    h = hh * fac;
                }
            } else {
                self.rejected += 1;
                h = hh * fac.min(1.0);
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

fn initial_step(y: &[Complex64], dy: &[Complex64], span: f64, opts: &OdeOptions) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * a.norm();
        d0 += (a.norm() / sc).powi(2);
        d1 += (b.norm() / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).min(opts.h_max)
}
