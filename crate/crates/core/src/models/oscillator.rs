//! Damped harmonic oscillator `y'' + 2c y' + w0^2 y = 0`, `y(0) = 3`,
//! `y'(0) = 0`.

use serde::{Deserialize, Serialize};

pub const Y0: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub c: f64,
    pub omega0: f64,
}

impl OscillatorParams {
    pub fn new(c: f64, omega0: f64) -> Self {
        Self { c, omega0 }
    }

    /// Closed-form displacement at `t`.
    pub fn value(&self, t: f64) -> f64 {
        let c = self.c;
        let w0 = self.omega0;
        let decay = (-c * t).exp();
        if c < w0 {
            let w = (w0 * w0 - c * c).sqrt();
            decay * Y0 * ((w * t).cos() + c * (w * t).sin() / w)
        } else if c > w0 {
            let s = (c * c - w0 * w0).sqrt();
            decay * Y0 * ((s * t).cosh() + c * (s * t).sinh() / s)
        } else {
            Y0 * (1.0 + c * t) * decay
        }
    }

    /// First-order system `(y, y')` for numerical integration.
    pub fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -2.0 * self.c * y[1] - self.omega0 * self.omega0 * y[0];
    }
}

pub fn oscillator_solution(p: &OscillatorParams, times: &[f64]) -> Vec<f64> {
    times.iter().map(|&t| p.value(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn critical_example() {
        let p = OscillatorParams::new(1.0, 1.0);
        assert!((p.value(1.0) - 6.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert!((p.value(1.0) - 2.2073).abs() < 1e-4);
    }

    #[test]
    fn branches_are_continuous_at_critical() {
        let t = 2.3;
        let crit = OscillatorParams::new(0.7, 0.7).value(t);
        let under = OscillatorParams::new(0.7 - 1e-7, 0.7).value(t);
        let over = OscillatorParams::new(0.7 + 1e-7, 0.7).value(t);
        assert!((crit - under).abs() < 1e-5);
        assert!((crit - over).abs() < 1e-5);
    }

    /// Residual of the ODE by central differences.
    fn ode_residual(p: &OscillatorParams, t: f64) -> f64 {
        let h = 1e-4;
        let y = p.value(t);
        let yp = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
        let ypp = (p.value(t + h) - 2.0 * y + p.value(t - h)) / (h * h);
        ypp + 2.0 * p.c * yp + p.omega0 * p.omega0 * y
    }

    proptest! {
        #[test]
        fn initial_conditions(c in 0.1f64..1.0, w in 0.5f64..1.0) {
            let p = OscillatorParams::new(c, w);
            prop_assert!((p.value(0.0) - 3.0).abs() < 1e-15);
            let h = 1e-6;
            prop_assert!(((p.value(h) - p.value(0.0)) / h).abs() < 1e-4);
        }

        #[test]
        fn satisfies_the_ode(c in 0.1f64..1.0, w in 0.5f64..1.0, t in 0.5f64..6.0) {
            let p = OscillatorParams::new(c, w);
            prop_assert!(ode_residual(&p, t).abs() < 1e-4);
        }

        #[test]
        fn decays_within_envelope(c in 0.1f64..1.0, w in 0.5f64..1.0) {
            // |y(t)| <= 3 (1 + c / w_d) e^{-c t} for the under-damped branch and
            // 3 (1 + c t) e^{-(c - s) t} otherwise
            let p = OscillatorParams::new(c, w);
            let t = 50.0;
            let bound = if c < w {
                let wd = (w * w - c * c).sqrt();
                3.0 * (1.0 + (c / wd).min(c * t)) * (-c * t).exp()
            } else {
                let s = (c * c - w * w).sqrt();
                3.0 * (1.0 + c * t) * (-(c - s) * t).exp()
            };
            prop_assert!(p.value(t).abs() <= bound + 1e-15);
            prop_assert!(p.value(t).abs() < 3.0 * 0.1);
        }
    }
}
