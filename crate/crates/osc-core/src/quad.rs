//! Adaptive Simpson quadrature for the few integrals without closed forms.

use crate::error::{OscError, Result};

/// Integral estimate with an error bound from the adaptive subdivision.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
}

const MAX_DEPTH: u32 = 60;
const NODE_BUDGET: u64 = 1_000_000;
const PROBE_PANELS: usize = 16;

/// Adaptive Simpson on [a, b] with a relative tolerance.
///
/// Integrands must be finite on the open interval; endpoint singularities
/// are the caller's job to substitute away. Non-finite samples abort with
/// `QuadratureFailed` rather than silently poisoning the sum.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(OscError::QuadratureFailed {
            a,
            b,
            detail: "bad integration bounds".into(),
        });
    }
    // Magnitude probe over a fixed composite grid. Summing |panel| values
    // keeps the scale honest when the integral itself nearly cancels or the
    // three coarse samples land on zeros of the integrand.
    let h = (b - a) / PROBE_PANELS as f64;
    let mut fs = [0.0; 2 * PROBE_PANELS + 1];
    for (i, slot) in fs.iter_mut().enumerate() {
        let x = if i == 2 * PROBE_PANELS {
            b
        } else {
            a + 0.5 * h * i as f64
        };
        *slot = eval(&f, x, a, b)?;
    }
    let mut mag = 0.0;
    for p in 0..PROBE_PANELS {
        mag += simpson(0.0, h, fs[2 * p], fs[2 * p + 1], fs[2 * p + 2]).abs();
    }
    let (fa, fm, fb) = (fs[0], fs[PROBE_PANELS], fs[2 * PROBE_PANELS]);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = mag.max(whole.abs()).max(1e-300);
    let abs_floor = rel_tol * scale * 1e-3;
    let mut err_acc = 0.0;
    let mut budget = NODE_BUDGET;
    let value = adapt(
        &f, a, b, fa, fm, fb, whole, rel_tol * scale, abs_floor, MAX_DEPTH, &mut err_acc,
        &mut budget,
    )?;
    Ok(Quadrature {
        value,
        abs_err: err_acc,
    })
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64, a: f64, b: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OscError::QuadratureFailed {
            a,
            b,
            detail: format!("integrand is {v} at x = {x}"),
        })
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    abs_floor: f64,
    depth: u32,
    err_acc: &mut f64,
    budget: &mut u64,
) -> Result<f64> {
    if *budget == 0 {
        return Err(OscError::QuadratureFailed {
            a,
            b,
            detail: "subdivision budget exhausted".into(),
        });
    }
    *budget -= 1;
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(f, lm, a, b)?;
    let frm = eval(f, rm, a, b)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Standard Simpson refinement: error of the refined estimate ~ delta/15.
    if depth == 0 || delta.abs() <= 15.0 * tol.max(abs_floor) {
        if depth == 0 && delta.abs() > 15.0 * tol.max(abs_floor) {
            return Err(OscError::QuadratureFailed {
                a,
                b,
                detail: format!("max subdivision depth hit, residual {delta:e}"),
            });
        }
        *err_acc += delta.abs() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    let lv = adapt(
        f, a, m, fa, flm, fm, left, 0.5 * tol, abs_floor, depth - 1, err_acc, budget,
    )?;
    let rv = adapt(
        f, m, b, fm, frm, fb, right, 0.5 * tol, abs_floor, depth - 1, err_acc, budget,
    )?;
    Ok(lv + rv)
}
