//! Two-species glycolysis oscillator with a Hopf bifurcation in `b`.
//!
//! With `x0 = b`, `y0 = b / (a + b^2)` the shifted system reads
//!
//! ```text
//! x' = -(x + x0) + a (y + y0) + (x + x0)^2 (y + y0)
//! y' =  b        - a (y + y0) - (x + x0)^2 (y + y0)
//! ```
//!
//! and has its equilibrium at the origin.

use serde::{Deserialize, Serialize};

use super::rk45::{rk45_integrate, Rk45Options};
use crate::{Error, Result};

pub const X0: f64 = 1.0;
pub const Y0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelkovParams {
    pub a: f64,
    pub b: f64,
}

impl SelkovParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn rhs(&self, _t: f64, s: &[f64], ds: &mut [f64]) {
        let (a, b) = (self.a, self.b);
        let xs = s[0] + b;
        let ys = s[1] + b / (a + b * b);
        let flux = xs * xs * ys;
        ds[0] = -xs + a * ys + flux;
        ds[1] = b - a * ys - flux;
    }

    /// Hopf locus `(b_1(a), b_2(a))`; the equilibrium is unstable for
    /// `b_1 < b < b_2`.
    pub fn hopf_locus(a: f64) -> Result<(f64, f64)> {
        let disc = 1.0 - 8.0 * a;
        if !(a > 0.0 && disc >= 0.0) {
            return Err(Error::validation(format!("Hopf locus needs 0 < a <= 1/8, got {a}")));
        }
        let r = disc.sqrt();
        Ok((((1.0 - r - 2.0 * a) / 2.0).sqrt(), ((1.0 + r - 2.0 * a) / 2.0).sqrt()))
    }
}

/// Integrator settings used for ensemble generation.
pub fn default_options() -> Rk45Options {
    Rk45Options {
        rtol: 1e-6,
        atol: 1e-9,
        ..Rk45Options::default()
    }
}

/// `x(t)` at `times` from `x(0) = y(0) = 1`.
pub fn selkov_series(p: &SelkovParams, times: &[f64], opts: &Rk45Options) -> Result<Vec<f64>> {
    let (a, b) = (p.a, p.b);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::validation(format!("kinetic parameters must be positive, got a={a}, b={b}")));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if t_end <= 0.0 {
        return Ok(vec![X0; times.len()]);
    }
    let out = rk45_integrate(|t, s, ds| p.rhs(t, s, ds), &[X0, Y0], (0.0, t_end), times, opts)?;
    Ok(out.column(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_an_equilibrium() {
        let p = SelkovParams::new(0.08, 0.6);
        let mut d = [0.0; 2];
        p.rhs(0.0, &[0.0, 0.0], &mut d);
        assert!(d[0].abs() < 1e-14 && d[1].abs() < 1e-14);
    }

    #[test]
    fn locus_values() {
        let (b1, b2) = SelkovParams::hopf_locus(0.1).unwrap();
        let r = 0.2f64.sqrt();
        assert!((b1 - ((0.8 - r) / 2.0).sqrt()).abs() < 1e-15);
        assert!((b1 - 0.4200).abs() < 1e-4, "{b1}");
        assert!((b2 - 0.7897).abs() < 1e-4, "{b2}");
        assert!(SelkovParams::hopf_locus(0.2).is_err());
    }

    #[test]
    fn trace_of_jacobian_changes_sign_on_locus() {
        // linearization at the origin: trace = -1 + 2 x0 y0 - a - x0^2
        let a = 0.1;
        let trace = |b: f64| {
            let y0 = b / (a + b * b);
            -1.0 + 2.0 * b * y0 - a - b * b
        };
        let (b1, b2) = SelkovParams::hopf_locus(a).unwrap();
        assert!(trace(b1).abs() < 1e-12);
        assert!(trace(b2).abs() < 1e-12);
        assert!(trace(0.5 * (b1 + b2)) > 0.0);
        assert!(trace(0.3) < 0.0 && trace(1.0) < 0.0);
    }

    #[test]
    fn starts_at_initial_condition_and_is_deterministic() {
        let p = SelkovParams::new(0.05, 0.7);
        let times: Vec<f64> = (0..=65).map(|i| i as f64 * 0.1).collect();
        let x = selkov_series(&p, &times, &default_options()).unwrap();
        assert_eq!(x[0], 1.0);
        let again = selkov_series(&p, &times, &default_options()).unwrap();
        assert!(x.iter().zip(&again).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    fn late_amplitude(a: f64, b: f64) -> f64 {
        let times: Vec<f64> = (0..=500).map(|i| 50.0 + i as f64 * 0.1).collect();
        let x = selkov_series(&SelkovParams::new(a, b), &times, &default_options()).unwrap();
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    #[test]
    fn periodic_orbit_only_between_locus_branches() {
        let a = 0.08;
        let (b1, b2) = SelkovParams::hopf_locus(a).unwrap();
        let inside = late_amplitude(a, 0.5 * (b1 + b2));
        assert!(inside > 0.1, "amplitude {inside}");
        for b in [0.5 * b1, b2 + 0.4] {
            let outside = late_amplitude(a, b);
            assert!(outside < 1e-2, "b = {b}: amplitude {outside}");
        }
    }
}
