//! Adaptive Dormand–Prince 5(4) integration for small fixed-size systems.
//!
//! Integration runs segment by segment between caller-supplied knots, so the
//! right-hand side may be discontinuous across knots. The right-hand side is
//! told which segment it is being evaluated in; at the closing edge of a
//! segment it must use that segment's one-sided limit.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-10,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
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
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y′ = f(segment, t, y) from `knots[0]` to the last knot and
/// returns the state at each time in `outputs`.
///
/// `knots` must be strictly increasing and `outputs` nondecreasing within
/// `[knots[0], knots.last()]`. An output placed exactly on a knot gets the
/// state arriving at that knot.
pub fn integrate<const D: usize, F>(
    mut f: F,
    y0: [f64; D],
    knots: &[f64],
    outputs: &[f64],
    tol: Tolerance,
) -> Result<Vec<[f64; D]>>
where
    F: FnMut(usize, f64, &[f64; D]) -> [f64; D],
{
    if knots.len() < 2 || knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Integration {
            t_ns: knots.first().copied().unwrap_or(f64::NAN),
            reason: "segment knots must be strictly increasing".into(),
        });
    }
    let (t_start, t_end) = (knots[0], knots[knots.len() - 1]);
    if outputs.windows(2).any(|w| w[1] < w[0])
        || outputs.iter().any(|&t| t < t_start || t > t_end)
    {
        return Err(Error::Integration {
            t_ns: t_start,
            reason: "output times must be nondecreasing and inside the span".into(),
        });
    }

    let mut result = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    let mut y = y0;
    let mut h_prop = f64::NAN;
    while next_out < outputs.len() && outputs[next_out] == t_start {
        result.push(y);
        next_out += 1;
    }
    for (seg, w) in knots.windows(2).enumerate() {
        if next_out == outputs.len() {
            break;
        }
        let (lo, hi) = (w[0], w[1]);
        let mut t = lo;
        if !h_prop.is_finite() {
            h_prop = (hi - lo).min(1.0);
        }
        while t < hi {
            let stop = if next_out < outputs.len() && outputs[next_out] < hi {
                outputs[next_out]
            } else {
                hi
            };
            let mut h = h_prop.min(stop - t);
            let mut clipped = h < h_prop;
            loop {
                if h <= 1e-13 * t.abs().max(1.0) {
                    return Err(Error::Integration {
                        t_ns: t,
                        reason: format!("step size underflow (h = {h:e})"),
                    });
                }
                let t_new = if t + h >= stop { stop } else { t + h };
                let (y_new, err) = dp_step(&mut f, seg, t, t_new - t, &y, tol);
                if err <= 1.0 {
                    let grow = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // a step shortened to land on a stop says nothing about the step size
                    if !clipped {
                        h_prop = h * grow;
                    }
                    t = t_new;
                    y = y_new;
                    break;
                }
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                h_prop = h;
                clipped = false;
            }
            while next_out < outputs.len() && outputs[next_out] <= t && t == stop {
                result.push(y);
                next_out += 1;
            }
        }
    }
    Ok(result)
}

fn dp_step<const D: usize, F>(
    f: &mut F,
    seg: usize,
    t: f64,
    h: f64,
    y: &[f64; D],
    tol: Tolerance,
) -> ([f64; D], f64)
where
    F: FnMut(usize, f64, &[f64; D]) -> [f64; D],
{
    let mut k = [[0.0; D]; 7];
    k[0] = f(seg, t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (i, yi) in ys.iter_mut().enumerate() {
            *yi += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
        }
        // the last two stages sit at the closing edge
        let ts = if C[s] == 1.0 { t + h } else { t + C[s] * h };
        k[s] = f(seg, ts, &ys);
    }
    let mut y_new = *y;
    let mut err_sq = 0.0;
    for i in 0..D {
        y_new[i] += h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>();
        let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        let scale = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
        err_sq += (e / scale).powi(2);
    }
    (y_new, (err_sq / D as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let outs: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let ys = integrate(|_, _, y| [-0.7 * y[0]], [1.0], &[0.0, 10.0], &outs, Tolerance::default())
            .unwrap();
        for (t, y) in outs.iter().zip(&ys) {
            assert!((y[0] - (-0.7 * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let w = 2.0;
        let outs = [0.0, 1.0, 25.0, 50.0];
        let ys = integrate(
            |_, _, y| [y[1], -w * w * y[0]],
            [1.0, 0.0],
            &[0.0, 50.0],
            &outs,
            Tolerance::default(),
        )
        .unwrap();
        for (t, y) in outs.iter().zip(&ys) {
            assert!((y[0] - (w * t).cos()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn discontinuous_forcing_is_exact_at_knots() {
        // y' = 1 on [0,1), 0 on [1,2): y(2) = 1 exactly
        let ys = integrate(
            |seg, _, _| [if seg == 0 { 1.0 } else { 0.0 }],
            [0.0],
            &[0.0, 1.0, 2.0],
            &[1.0, 1.5, 2.0],
            Tolerance::default(),
        )
        .unwrap();
        for y in ys {
            assert!((y[0] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn repeated_outputs_and_start_output() {
        let ys = integrate(|_, _, _| [1.0], [0.0], &[0.0, 3.0], &[0.0, 0.0, 2.0, 2.0], Tolerance::default())
            .unwrap();
        assert_eq!(ys.len(), 4);
        assert_eq!(ys[0][0], 0.0);
        assert!((ys[3][0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn stiff_blowup_reports_underflow() {
        let r = integrate(|_, _, y| [y[0] * y[0]], [1.0], &[0.0, 2.0], &[2.0], Tolerance::default());
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn rejects_bad_outputs() {
        let r = integrate(|_, _, _| [0.0], [0.0], &[0.0, 1.0], &[2.0], Tolerance::default());
        assert!(r.is_err());
    }
}
