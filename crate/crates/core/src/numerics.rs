//! Small generic numerical kernels: bracketed root search, adaptive
//! Gauss–Kronrod quadrature and an embedded Runge–Kutta integrator.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("quadrature did not converge (estimated error {estimate:e})")]
    QuadratureNonConvergence { estimate: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },
}

/// Bisection on a sign change of `f` inside `[lo, hi]`.
///
/// Runs until the bracket collapses to adjacent floats or `f` hits zero.
pub fn bisect<T: Real>(mut f: impl FnMut(T) -> T, lo: T, hi: T) -> Result<T, NumericsError> {
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(NumericsError::NotBracketed {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            f_lo: f_lo.as_f64(),
            f_hi: f_hi.as_f64(),
        });
    }
    let two = T::lit(2.0);
    for _ in 0..400 {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / two)
}

/// Grows `hi` geometrically until `f` changes sign relative to `f(lo)`.
pub fn expand_bracket<T: Real>(mut f: impl FnMut(T) -> T, lo: T, mut hi: T, max_doublings: usize) -> Option<T> {
    let s = f(lo).signum();
    for _ in 0..max_doublings {
        let v = f(hi);
        if v.signum() != s || v == T::zero() {
            return Some(hi);
        }
        hi = hi * T::lit(2.0);
    }
    None
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<T: Real>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut kronrod = fc * T::lit(GK_WEIGHTS_K[7]);
    let mut gauss = fc * T::lit(GK_WEIGHTS_G[3]);
    for i in 0..7 {
        let x = h * T::lit(GK_NODES[i]);
        let pair = f(c - x) + f(c + x);
        kronrod = kronrod + pair * T::lit(GK_WEIGHTS_K[i]);
        if i % 2 == 1 {
            gauss = gauss + pair * T::lit(GK_WEIGHTS_G[i / 2]);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive 15-point Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<T, NumericsError> {
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.2);
        let err: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = (lo + hi) * T::lit(0.5);
        let (vl, el) = gk15(&mut f, lo, mid);
        let (vr, er) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, vl, el));
        intervals.push((mid, hi, vr, er));
    }
    let err: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
    Err(NumericsError::QuadratureNonConvergence { estimate: err.as_f64() })
}

/// Tolerances and limits for [`dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub initial_step: T,
    pub min_step: T,
    pub max_step: T,
}

/// Outcome of an accepted integration run.
#[derive(Debug, Clone)]
pub struct OdeRun<T, const D: usize> {
    pub samples: Vec<(T, [T; D])>,
    pub accepted: usize,
    pub rejected: usize,
}

/// Dormand–Prince 5(4) with step rejection on non-admissible states.
///
/// `admissible` is evaluated on each candidate state; a `false` result
/// rejects the step and halves it. `stop` is checked after every accepted
/// step and ends the run early when it returns `true`.
pub fn dopri5<T: Real, const D: usize>(
    mut rhs: impl FnMut(T, &[T; D]) -> [T; D],
    t0: T,
    y0: [T; D],
    t_end: T,
    opts: OdeOptions<T>,
    mut admissible: impl FnMut(&[T; D]) -> bool,
    mut stop: impl FnMut(T, &[T; D]) -> bool,
) -> Result<OdeRun<T, D>, NumericsError> {
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
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

    let mut t = t0;
    let mut y = y0;
    let mut h = opts.initial_step.min(t_end - t0);
    let mut run = OdeRun { samples: vec![(t, y)], accepted: 0, rejected: 0 };
    let safety = T::lit(0.9);
    let fifth = T::lit(0.2);

    while t < t_end {
        if h < opts.min_step {
            return Err(NumericsError::StepUnderflow { t: t.as_f64(), h: h.as_f64() });
        }
        let h_step = h.min(t_end - t);
        let mut k = [[T::zero(); D]; 7];
        k[0] = rhs(t, &y);
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = T::zero();
                for j in 0..s {
                    acc = acc + T::lit(A[s][j]) * k[j][i];
                }
                *yi = *yi + h_step * acc;
            }
            k[s] = rhs(t + T::lit(C[s]) * h_step, &ys);
        }
        let mut y5 = y;
        let mut err = T::zero();
        for i in 0..D {
            let mut d5 = T::zero();
            let mut d4 = T::zero();
            for s in 0..7 {
                d5 = d5 + T::lit(B5[s]) * k[s][i];
                d4 = d4 + T::lit(B4[s]) * k[s][i];
            }
            y5[i] = y[i] + h_step * d5;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            let e = h_step * (d5 - d4) / scale;
            err = err.max(e.abs());
        }
        if y5.iter().any(|v| !v.is_finite()) || !err.is_finite() {
            run.rejected += 1;
            h = h_step * T::lit(0.25);
            if h < opts.min_step {
                return Err(NumericsError::NonFinite { t: t.as_f64() });
            }
            continue;
        }
        if err <= T::one() && admissible(&y5) {
            t = t + h_step;
            y = y5;
            run.accepted += 1;
            run.samples.push((t, y));
            if stop(t, &y) {
                break;
            }
            let grow = if err == T::zero() { T::lit(5.0) } else { (safety * err.powf(-fifth)).min(T::lit(5.0)) };
            h = (h_step * grow).min(opts.max_step);
        } else {
            run.rejected += 1;
            let shrink = if err > T::one() { (safety * err.powf(-fifth)).max(T::lit(0.1)) } else { T::lit(0.5) };
            h = h_step * shrink;
        }
    }
    Ok(run)
}
