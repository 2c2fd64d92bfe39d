//! Dormand-Prince 5(4) integrator with PI step control and a fourth-order
//! dense output.

use ndarray::Array2;

use crate::{Error, Result};

const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];

const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];

const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];

/// Difference between the fifth- and fourth-order weights (7 stages, FSAL).
const E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];

/// Dense output: `y(t + theta h) = y + h sum_k K_k sum_j P[k][j] theta^(j+1)`.
const P: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub first_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Self {
            rtol: 1e-3,
            atol: 1e-6,
            max_step: f64::INFINITY,
            first_step: None,
            max_steps: 10_000_000,
        }
    }
}

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    (v.iter().zip(scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn initial_step<F>(rhs: &F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, opts: &Rk45Options) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|y| opts.atol + y.abs() * opts.rtol).collect();
    let d0 = rms_norm(y0, &scale);
    let d1 = rms_norm(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * dir * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h0 * dir, &y1, &mut f1);
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = rms_norm(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(opts.max_step)
}

/// Integrates `y' = rhs(t, y)` from `t_span.0` and returns the state at every
/// entry of `output_times` (rows), which must be sorted and inside the span.
pub fn rk45_integrate<F>(
    rhs: F,
    y_init: &[f64],
    t_span: (f64, f64),
    output_times: &[f64],
    opts: &Rk45Options,
) -> Result<Array2<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::validation("rtol and atol must be > 0"));
    }
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::validation(format!("empty time span [{t0}, {t_end}]")));
    }
    if output_times.windows(2).any(|w| w[1] < w[0])
        || output_times.iter().any(|&t| t < t0 || t > t_end)
    {
        return Err(Error::validation("output times must be sorted and inside the span"));
    }
    let n = y_init.len();
    let mut out = Array2::zeros((output_times.len(), n));
    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] == t0 {
        out.row_mut(next_out).assign(&ndarray::ArrayView1::from(y_init));
        next_out += 1;
    }

    let mut t = t0;
    let mut y = y_init.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    rhs(t, &y, &mut k[0]);
    let mut h = match opts.first_step {
        Some(h) => h,
        None => initial_step(&rhs, t, &y, &k[0], 1.0, opts),
    };
    let mut fac_old: f64 = 1e-4;
    let mut rejected = false;
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut steps = 0;

    while t < t_end && next_out < output_times.len() {
        if steps >= opts.max_steps {
            return Err(Error::validation(format!(
                "integrator exceeded {} steps",
                opts.max_steps
            )));
        }
        h = h.min(opts.max_step);
        let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
        if h < min_step {
            return Err(Error::StepSizeUnderflow { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for s in 1..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            rhs(t + C[s] * h, &stage, &mut k[s]);
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (s, ks) in k.iter().enumerate().take(6) {
                acc += B[s] * ks[i];
            }
            y_new[i] = y[i] + h * acc;
        }
        let t_new = if last { t_end } else { t + h };
        rhs(t_new, &y_new, &mut k[6]);
        let mut err = vec![0.0; n];
        let mut scale = vec![0.0; n];
        for i in 0..n {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            err[i] = h * e;
            scale[i] = opts.atol + y[i].abs().max(y_new[i].abs()) * opts.rtol;
        }
        let err_norm = rms_norm(&err, &scale);
        if !err_norm.is_finite() {
            return Err(Error::NonFinite(format!("integrator state at t = {t}")));
        }

        if err_norm <= 1.0 {
            steps += 1;
            while next_out < output_times.len() && output_times[next_out] <= t_new {
                let theta = (output_times[next_out] - t) / h;
                let mut row = out.row_mut(next_out);
                for i in 0..n {
                    let mut acc = 0.0;
                    for (s, ks) in k.iter().enumerate() {
                        let p = &P[s];
                        let poly = theta * (p[0] + theta * (p[1] + theta * (p[2] + theta * p[3])));
                        acc += ks[i] * poly;
                    }
                    row[i] = y[i] + h * acc;
                }
                next_out += 1;
            }
            let fac11 = err_norm.powf(EXPO);
            let mut fac = fac11 / fac_old.powf(BETA) / SAFETY;
            fac = fac.clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            let mut h_new = h / fac;
            if rejected {
                h_new = h_new.min(h);
            }
            fac_old = err_norm.max(1e-4);
            rejected = false;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            h = h_new;
        } else {
            let fac11 = err_norm.powf(EXPO);
            h /= (fac11 / SAFETY).min(1.0 / MIN_FACTOR);
            rejected = true;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::oscillator::OscillatorParams;

    #[test]
    fn dense_output_weights_reproduce_step_end() {
        for s in 0..7 {
            let at_one: f64 = P[s].iter().sum();
            let b = if s < 6 { B[s] } else { 0.0 };
            assert!((at_one - b).abs() < 1e-12, "stage {s}: {at_one} vs {b}");
        }
        let b_sum: f64 = B.iter().sum();
        assert!((b_sum - 1.0).abs() < 1e-15);
        let e_sum: f64 = E.iter().sum();
        assert!(e_sum.abs() < 1e-15);
        for (s, row) in A.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - C[s]).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let opts = Rk45Options {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let y = rk45_integrate(|_, y, dy| dy[0] = -y[0], &[1.0], (0.0, 5.0), &times, &opts).unwrap();
        for (i, &t) in times.iter().enumerate() {
            assert!((y[[i, 0]] - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_field_is_constant() {
        let times = [0.0, 0.3, 2.0, 7.5];
        let y = rk45_integrate(
            |_, _, dy| dy.iter_mut().for_each(|d| *d = 0.0),
            &[1.5, -2.0],
            (0.0, 7.5),
            &times,
            &Rk45Options::default(),
        )
        .unwrap();
        for row in y.outer_iter() {
            assert_eq!(row.to_vec(), vec![1.5, -2.0]);
        }
    }

    fn oscillator_error(rtol: f64) -> f64 {
        let p = OscillatorParams::new(0.5, 0.75);
        let times = [1.0, 3.0, 6.0];
        let opts = Rk45Options {
            rtol,
            atol: rtol * 1e-2,
            ..Default::default()
        };
        let y = rk45_integrate(|t, y, dy| p.rhs(t, y, dy), &[3.0, 0.0], (0.0, 6.0), &times, &opts).unwrap();
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| (y[[i, 0]] - p.value(t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn oscillator_matches_closed_form() {
        assert!(oscillator_error(1e-8) < 1e-6);
    }

    #[test]
    fn tighter_tolerance_does_not_hurt() {
        let mut prev = f64::INFINITY;
        let mut rtol = 1e-3;
        while rtol > 1e-9 {
            let e = oscillator_error(rtol);
            assert!(e <= prev, "rtol {rtol}: {e} vs {prev}");
            prev = e;
            rtol /= 2.0;
        }
    }

    #[test]
    fn output_time_outside_span_rejected() {
        let r = rk45_integrate(|_, y, dy| dy[0] = y[0], &[1.0], (0.0, 1.0), &[2.0], &Rk45Options::default());
        assert!(r.is_err());
    }

    #[test]
    fn finite_time_blow_up_is_reported() {
        // y' = y^2, y(0) = 1 explodes at t = 1
        let r = rk45_integrate(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], (0.0, 2.0), &[2.0], &Rk45Options::default());
        assert!(r.is_err());
    }
}
