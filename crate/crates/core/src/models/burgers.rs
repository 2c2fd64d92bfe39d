//! Inviscid Burgers' equation `q_t + (q^2 / 2)_x = 0` on a ramp initial
//! condition, solved by first-order Godunov finite volumes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const RAMP_CENTRE: f64 = 3.25;
pub const CFL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersSetup {
    /// Ramp half-width.
    pub a: f64,
    pub f_left: f64,
    pub f_right: f64,
    pub length: f64,
    pub cells: usize,
    pub probe_x: f64,
}

impl BurgersSetup {
    pub fn new(a: f64, probe_x: f64) -> Self {
        Self {
            a,
            f_left: 1.5,
            f_right: 1.0,
            length: 10.0,
            cells: 500,
            probe_x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_left > self.f_right && self.f_right > 0.0) {
            return Err(Error::validation("need f_left > f_right > 0"));
        }
        if !(self.a > 0.0 && RAMP_CENTRE + self.a <= self.length && RAMP_CENTRE - self.a >= 0.0) {
            return Err(Error::validation(format!("ramp half-width {} leaves the domain", self.a)));
        }
        if !(0.0..self.length).contains(&self.probe_x) || self.cells < 2 {
            return Err(Error::validation(format!("probe {} outside the domain", self.probe_x)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Index of the cell containing `probe_x`.
    pub fn probe_cell(&self) -> usize {
        ((self.probe_x / self.dx()).floor() as usize).min(self.cells - 1)
    }

    pub fn initial_value(&self, x: f64) -> f64 {
        let (fl, fr) = (self.f_left, self.f_right);
        if x <= RAMP_CENTRE - self.a {
            fl
        } else if x <= RAMP_CENTRE + self.a {
            0.5 * ((fl + fr) - (fl - fr) * (x - RAMP_CENTRE) / self.a)
        } else {
            fr
        }
    }

    /// Time at which the ramp steepens into a shock.
    pub fn shock_time(&self) -> f64 {
        2.0 * self.a / (self.f_left - self.f_right)
    }

    pub fn shock_speed(&self) -> f64 {
        0.5 * (self.f_left + self.f_right)
    }
}

#[inline]
fn flux(q: f64) -> f64 {
    0.5 * q * q
}

/// Flux of the exact Riemann solution at the interface.
#[inline]
pub fn godunov_flux(left: f64, right: f64) -> f64 {
    if left >= right {
        let s = 0.5 * (left + right);
        if s >= 0.0 {
            flux(left)
        } else {
            flux(right)
        }
    } else if left >= 0.0 {
        flux(left)
    } else if right <= 0.0 {
        flux(right)
    } else {
        0.0
    }
}

/// Finite-volume state marched in time.
#[derive(Debug, Clone)]
pub struct BurgersSolver {
    pub setup: BurgersSetup,
    pub t: f64,
    pub q: Vec<f64>,
    fluxes: Vec<f64>,
}

impl BurgersSolver {
    /// Cell values sampled at cell centres.
    pub fn new(setup: BurgersSetup) -> Result<Self> {
        setup.validate()?;
        let dx = setup.dx();
        let q = (0..setup.cells)
            .map(|i| setup.initial_value((i as f64 + 0.5) * dx))
            .collect();
        Ok(Self {
            setup,
            t: 0.0,
            q,
            fluxes: vec![0.0; setup.cells + 1],
        })
    }

    pub fn stable_dt(&self) -> f64 {
        let smax = self.q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if smax > 0.0 {
            CFL * self.setup.dx() / smax
        } else {
            f64::INFINITY
        }
    }

    /// One step of size at most `dt_max`; returns the step taken and the
    /// net boundary inflow `dt * (F_0 - F_N)`.
    pub fn step(&mut self, dt_max: f64) -> (f64, f64) {
        let dt = self.stable_dt().min(dt_max);
        let n = self.q.len();
        // zero-order extrapolation at both ends
        self.fluxes[0] = godunov_flux(self.q[0], self.q[0]);
        for i in 1..n {
            self.fluxes[i] = godunov_flux(self.q[i - 1], self.q[i]);
        }
        self.fluxes[n] = godunov_flux(self.q[n - 1], self.q[n - 1]);
        let r = dt / self.setup.dx();
        for i in 0..n {
            self.q[i] -= r * (self.fluxes[i + 1] - self.fluxes[i]);
        }
        self.t += dt;
        (dt, dt * (self.fluxes[0] - self.fluxes[n]))
    }

    pub fn total_mass(&self) -> f64 {
        self.q.iter().sum::<f64>() * self.setup.dx()
    }
}

/// Probe-cell values at `output_times`, linearly interpolated between steps.
pub fn burgers_series(setup: &BurgersSetup, output_times: &[f64]) -> Result<Vec<f64>> {
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times.iter().any(|&t| t < 0.0) {
        return Err(Error::validation("output times must be sorted and non-negative"));
    }
    let mut solver = BurgersSolver::new(*setup)?;
    let probe = setup.probe_cell();
    let mut out = Vec::with_capacity(output_times.len());
    let mut prev_t = 0.0;
    let mut prev_q = solver.q[probe];
    let t_end = output_times.last().copied().unwrap_or(0.0);
    let mut next = 0;
    while next < output_times.len() && output_times[next] <= 0.0 {
        out.push(prev_q);
        next += 1;
    }
    while next < output_times.len() {
        solver.step(t_end - solver.t);
        let (t, q) = (solver.t, solver.q[probe]);
        while next < output_times.len() && (output_times[next] <= t || solver.t >= t_end) {
            let w = if t > prev_t { (output_times[next] - prev_t) / (t - prev_t) } else { 1.0 };
            out.push(prev_q + w.clamp(0.0, 1.0) * (q - prev_q));
            next += 1;
        }
        prev_t = t;
        prev_q = q;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::linspace;

    #[test]
    fn initial_condition_shape() {
        let s = BurgersSetup::new(1.0, 6.5);
        assert_eq!(s.initial_value(1.0), 1.5);
        assert_eq!(s.initial_value(3.25), 1.25);
        assert_eq!(s.initial_value(5.0), 1.0);
        assert_eq!(s.probe_cell(), 325);
        assert_eq!(BurgersSetup::new(1.0, 9.5).probe_cell(), 475);
    }

    #[test]
    fn shock_formation_time() {
        let s = BurgersSetup::new(1.25, 9.5);
        assert!((s.shock_time() - 5.0).abs() < 1e-15);
        assert_eq!(s.shock_speed(), 1.25);
    }

    #[test]
    fn riemann_flux_cases() {
        assert_eq!(godunov_flux(1.5, 1.0), flux(1.5));
        assert_eq!(godunov_flux(-1.0, -2.0), flux(-2.0));
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
        assert_eq!(godunov_flux(1.0, 2.0), flux(1.0));
        assert_eq!(godunov_flux(1.0, -1.0), flux(1.0));
    }

    #[test]
    fn conservation_before_waves_reach_boundaries() {
        let mut s = BurgersSolver::new(BurgersSetup::new(1.5, 6.5)).unwrap();
        while s.t < 2.0 {
            let before = s.total_mass();
            let (_, inflow) = s.step(2.0 - s.t);
            assert!((s.total_mass() - before - inflow).abs() < 1e-10);
        }
    }

    #[test]
    fn solution_stays_monotone() {
        let mut s = BurgersSolver::new(BurgersSetup::new(0.8, 6.5)).unwrap();
        while s.t < 10.0 {
            s.step(10.0 - s.t);
            assert!(s.q.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            assert!(s.q.iter().all(|&v| (1.0 - 1e-12..=1.5 + 1e-12).contains(&v)));
        }
    }

    /// First output time at which the probe value rises above the mean state.
    fn arrival(a: f64, x: f64, times: &[f64]) -> f64 {
        let s = BurgersSetup::new(a, x);
        let q = burgers_series(&s, times).unwrap();
        let mid = 0.5 * (s.f_left + s.f_right);
        times[q.iter().position(|&v| v > mid).unwrap()]
    }

    #[test]
    fn shock_arrives_at_mean_speed() {
        let times = linspace(0.0, 10.0, 1000);
        let dt_out = times[1];
        let dx = 0.02;
        for a in [0.75, 1.0] {
            let s = BurgersSetup::new(a, 9.5);
            let centre = (s.probe_cell() as f64 + 0.5) * dx;
            let form_x = RAMP_CENTRE + a + s.f_right * s.shock_time();
            let expected = s.shock_time() + (centre - form_x) / s.shock_speed();
            let got = arrival(a, 9.5, &times);
            assert!((got - expected).abs() <= dx / s.shock_speed() + dt_out, "a={a}: {got} vs {expected}");
        }
        let t1 = arrival(0.75, 8.0, &times);
        let t2 = arrival(0.75, 9.5, &times);
        let speed = 1.5 / (t2 - t1);
        assert!((speed - 1.25).abs() < 0.05, "speed {speed}");
    }

    #[test]
    fn series_starts_at_initial_value() {
        let times = linspace(0.0, 10.0, 1000);
        let s = BurgersSetup::new(2.0, 6.5);
        let q = burgers_series(&s, &times).unwrap();
        assert_eq!(q.len(), 1000);
        assert_eq!(q[0], s.initial_value(6.51));
        assert!((q[999] - 1.5).abs() < 1e-6);
    }
}
