//! Adaptive Gauss-Kronrod (G7/K15) integration on finite intervals.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge on [{a}, {b}]: error estimate {estimate:e} after {intervals} subintervals")]
    NonConvergence {
        a: f64,
        b: f64,
        estimate: f64,
        intervals: usize,
    },
    #[error("non-finite integrand value at t = {0}")]
    NonFinite(f64),
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |t: f64| {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite(t))
        }
    };

    let fc = eval(centre)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = eval(centre - dx)? + eval(centre + dx)?;
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Integrates `f` over `[a, b]`, bisecting the interval with the largest
/// error estimate until the summed estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<QuadResult, QuadratureError> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (v, e) = kronrod15(&f, a, b)?;
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            return Ok(QuadResult {
                value,
                error,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(QuadratureError::NonConvergence {
                a,
                b,
                estimate: error,
                intervals: pieces.len(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid)?;
        let (v2, e2) = kronrod15(&f, mid, hi)?;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Integrates over `[a, b]` split at the given interior breakpoints, which
/// lets piecewise integrands (square drives) converge without chasing jumps.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult, QuadratureError> {
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&t| t > a && t < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let share = QuadOptions {
        abs_tol: opts.abs_tol / (edges.len() - 1).max(1) as f64,
        ..opts
    };
    let mut total = QuadResult {
        value: 0.0,
        error: 0.0,
        intervals: 0,
    };
    for w in edges.windows(2) {
        let r = integrate(&f, w[0], w[1], share)?;
        total.value += r.value;
        total.error += r.error;
        total.intervals += r.intervals;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(
            |x| x.powi(5) - 3.0 * x * x,
            -1.0,
            2.0,
            QuadOptions::default(),
        )
        .unwrap();
        // x^6/6 - x^3 evaluated from -1 to 2
        let exact = (64.0 / 6.0 - 8.0) - (1.0 / 6.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn full_sine_periods_vanish() {
        let r = integrate(|t| (2.0 * PI * t).sin(), 0.3, 7.3, QuadOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-9);
    }

    #[test]
    fn gaussian_normalisation() {
        let s = 0.7;
        let f = |x: f64| (-x * x / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let r = integrate(f, -12.0, 12.0, QuadOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_with_breakpoint() {
        let f = |x: f64| if x < 0.25 { 1.0 } else { 0.0 };
        let r = integrate_piecewise(f, 0.0, 1.0, &[0.25], QuadOptions::default()).unwrap();
        assert!((r.value - 0.25).abs() < 1e-14);
    }

    #[test]
    fn singular_integrand_reports_error() {
        let opts = QuadOptions {
            max_intervals: 20,
            ..QuadOptions::default()
        };
        let err = integrate(|x: f64| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, opts);
        assert!(err.is_err());
    }

    #[test]
    fn nan_is_rejected() {
        let err = integrate(|_| f64::NAN, 0.0, 1.0, QuadOptions::default()).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite(_)));
    }
}
