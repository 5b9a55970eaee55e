//! Embedded Runge-Kutta 5(4) stepper with dense output and
//! proportional-integral step control. Internal engine for the flow
//! integrators; all tolerances and schedules arrive from the caller.

use nalgebra::DVector;

use crate::integrate::Termination;

// Dormand-Prince nodes and stage coefficients.
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

// Fifth-order weights (b2 = b7 = 0; the last stage is first-same-as-last).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Error weights b - bhat.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense-output weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

pub(crate) struct SolveParams<'a> {
    pub t0: f64,
    /// Strictly increasing, all beyond t0; the last entry is the horizon.
    pub out_times: &'a [f64],
    pub rel: f64,
    pub abs: f64,
    pub max_steps: u64,
}

pub(crate) struct RawTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub termination: Termination,
    pub n_accepted: u64,
    pub n_rejected: u64,
}

// Hairer's starting step: match the scale of the field against the scale of
// the state, then refine with a second derivative probe.
fn initial_step<F>(
    field: &mut F,
    t0: f64,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    t_end: f64,
    rel: f64,
    abs: f64,
) -> f64
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let n = y0.len() as f64;
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..y0.len() {
        let sk = abs + rel * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    dnf /= n;
    dny /= n;
    let mut h0 = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h0 = h0.min(t_end - t0);
    let y1 = y0 + f0 * h0;
    let f1 = field(t0 + h0, &y1);
    let mut der2 = 0.0;
    for i in 0..y0.len() {
        let sk = abs + rel * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    der2 = (der2 / n).sqrt() / h0;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t0)
}

/// Integrates y' = field(t, y) from t0, emitting dense-output samples at the
/// scheduled times. The stop predicate is checked at every accepted step
/// endpoint; a hit appends that endpoint and terminates.
pub(crate) fn solve<F, S>(
    mut field: F,
    y0: &DVector<f64>,
    params: &SolveParams,
    mut stop: S,
) -> RawTrajectory
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
    S: FnMut(&DVector<f64>) -> Option<Termination>,
{
    let t_end = *params.out_times.last().expect("schedule is never empty");
    let (rel, abs) = (params.rel, params.abs);
    let mut traj = RawTrajectory {
        times: vec![params.t0],
        states: vec![y0.clone()],
        steps: vec![0.0],
        errors: vec![0.0],
        termination: Termination::Horizon,
        n_accepted: 0,
        n_rejected: 0,
    };

    let mut t = params.t0;
    let mut y = y0.clone();
    let mut k1 = field(t, &y);
    let mut h = initial_step(&mut field, t, &y, &k1, t_end, rel, abs);
    let mut err_prev: f64 = 1e-4;
    let mut out_idx = 0;

    // skip any scheduled times at or before the start
    while out_idx < params.out_times.len() && params.out_times[out_idx] <= t {
        out_idx += 1;
    }

    while t < t_end {
        if traj.n_accepted + traj.n_rejected >= params.max_steps {
            traj.termination = Termination::StepFailure;
            push_final(&mut traj, t, &y, h);
            return traj;
        }
        let last = h >= t_end - t;
        if last {
            h = t_end - t;
        }

        let k2 = field(t + C2 * h, &(&y + &k1 * (A21 * h)));
        let k3 = field(t + C3 * h, &(&y + (&k1 * A31 + &k2 * A32) * h));
        let k4 = field(t + C4 * h, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
        let k5 = field(
            t + C5 * h,
            &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h),
        );
        let k6 = field(
            t + h,
            &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
        );
        let y_next = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = field(t + h, &y_next);

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let mut err = 0.0;
        for i in 0..y.len() {
            let sk = abs + rel * y[i].abs().max(y_next[i].abs());
            err += (err_vec[i] / sk).powi(2);
        }
        err = (err / y.len().max(1) as f64).sqrt();

        if !err.is_finite() {
            // field blew up inside the step; treat as a hard rejection
            traj.n_rejected += 1;
            h *= 0.1;
            if h < min_step(t) {
                traj.termination = Termination::StepFailure;
                push_final(&mut traj, t, &y, h);
                return traj;
            }
            continue;
        }

        if err <= 1.0 {
            traj.n_accepted += 1;
            let t_new = if last { t_end } else { t + h };

            if out_idx < params.out_times.len() && params.out_times[out_idx] <= t_new {
                // dense-output coefficients for this step
                let ydiff = &y_next - &y;
                let r1 = y.clone();
                let r3 = &k1 * h - &ydiff;
                let r4 = &ydiff - &k7 * h - &r3;
                let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
                while out_idx < params.out_times.len() && params.out_times[out_idx] <= t_new {
                    let t_out = params.out_times[out_idx];
                    let theta = ((t_out - t) / h).clamp(0.0, 1.0);
                    let state = &r1
                        + (&ydiff + (&r3 + (&r4 + &r5 * (1.0 - theta)) * theta) * (1.0 - theta))
                            * theta;
                    traj.times.push(t_out);
                    traj.states.push(state);
                    traj.steps.push(h);
                    traj.errors.push(err);
                    out_idx += 1;
                }
            }

            if let Some(reason) = stop(&y_next) {
                traj.termination = reason;
                push_sample_if_new(&mut traj, t_new, &y_next, h, err);
                return traj;
            }

            let factor = (0.9 * err.max(1e-10).powf(-0.14) * err_prev.powf(0.08)).clamp(0.2, 5.0);
            err_prev = err.max(1e-10);
            t = t_new;
            y = y_next;
            k1 = k7;
            h *= factor;
        } else {
            traj.n_rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.1);
            if h < min_step(t) {
                traj.termination = Termination::StepFailure;
                push_final(&mut traj, t, &y, h);
                return traj;
            }
        }
    }
    traj
}

fn min_step(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

fn push_final(traj: &mut RawTrajectory, t: f64, y: &DVector<f64>, h: f64) {
    push_sample_if_new(traj, t, y, h, f64::NAN);
}

fn push_sample_if_new(traj: &mut RawTrajectory, t: f64, y: &DVector<f64>, h: f64, err: f64) {
    if let Some(&last) = traj.times.last()
        && t <= last + 1e-12 * last.abs().max(1e-300)
    {
        return;
    }
    traj.times.push(t);
    traj.states.push(y.clone());
    traj.steps.push(h);
    traj.errors.push(err);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params<'a>(out: &'a [f64], rel: f64, abs: f64) -> SolveParams<'a> {
        SolveParams {
            t0: 0.0,
            out_times: out,
            rel,
            abs,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let out = [0.25, 0.5, 1.0];
        let traj = solve(
            |_, y: &DVector<f64>| -y,
            &DVector::from_row_slice(&[1.0]),
            &params(&out, 1e-10, 1e-13),
            |_| None,
        );
        assert!(matches!(traj.termination, Termination::Horizon));
        let last = traj.states.last().unwrap();
        assert!((last[0] - (-1.0f64).exp()).abs() < 1e-10);
        // dense sample in the middle
        let mid = &traj.states[traj.times.iter().position(|t| *t == 0.5).unwrap()];
        assert!((mid[0] - (-0.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn cubic_decay_over_long_horizon() {
        // y' = -4y^3 has closed form (y0^-2 + 8t)^(-1/2)
        let out: Vec<f64> = (0..=8).map(|k| 10f64.powi(k - 4)).collect();
        let traj = solve(
            |_, y: &DVector<f64>| {
                DVector::from_row_slice(&[-4.0 * y[0] * y[0] * y[0]])
            },
            &DVector::from_row_slice(&[0.3]),
            &params(&out, 1e-10, 1e-13),
            |_| None,
        );
        for (t, s) in traj.times.iter().zip(&traj.states).skip(1) {
            let exact = (0.3f64.powi(-2) + 8.0 * t).powf(-0.5);
            assert!(
                (s[0] - exact).abs() <= 1e-9 * exact,
                "t={t}: {} vs {exact}",
                s[0]
            );
        }
        assert!((traj.states.last().unwrap()[0] - 3.5353e-3).abs() < 1e-6);
    }

    #[test]
    fn constant_field_stays_put() {
        let out = [1.0, 2.0, 3.0];
        let y0 = DVector::from_row_slice(&[2.5, -1.0]);
        let traj = solve(
            |_, y: &DVector<f64>| DVector::zeros(y.len()),
            &y0,
            &params(&out, 1e-10, 1e-13),
            |_| None,
        );
        for s in &traj.states {
            assert_eq!(s, &y0);
        }
    }

    #[test]
    fn stop_predicate_truncates() {
        let out = [1.0, 10.0, 100.0];
        let traj = solve(
            |_, y: &DVector<f64>| -y,
            &DVector::from_row_slice(&[1.0]),
            &params(&out, 1e-8, 1e-12),
            |y| (y[0] < 0.05).then_some(Termination::Floor),
        );
        assert!(matches!(traj.termination, Termination::Floor));
        assert!(traj.states.last().unwrap()[0] < 0.05);
        let t_last = *traj.times.last().unwrap();
        assert!(t_last < 100.0);
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn blowup_reports_step_failure() {
        let out = [0.5, 1.0];
        // y' = y^2 from 2: blows up at t = 0.5
        let traj = solve(
            |_, y: &DVector<f64>| DVector::from_row_slice(&[y[0] * y[0]]),
            &DVector::from_row_slice(&[2.0]),
            &params(&out, 1e-10, 1e-13),
            |_| None,
        );
        assert!(matches!(traj.termination, Termination::StepFailure));
        assert!(*traj.times.last().unwrap() < 0.5);
    }
}
