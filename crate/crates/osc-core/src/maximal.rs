//! Hardy-Littlewood maximal operator restricted to an interval: at x the
//! supremum of averages of |w| over subintervals of the ambient interval
//! containing x.
//!
//! On a grid the two-sided supremum collapses to one-sided scans: the
//! average over (x_j, x_k) containing x_i is a convex combination of the
//! averages over (x_j, x_i) and (x_i, x_k), so the maximum over all
//! containing pairs equals the larger of the two one-sided maxima. That
//! makes the grid value exact in O(m) per node instead of O(m^2), with no
//! shape assumptions on w. A literal O(m^2)-per-node reference is kept
//! public so tests can pin the reduction.
//!
//! When the grid stops short of an ambient endpoint (log grids next to a
//! singularity), ambient intervals reaching the endpoint itself are folded
//! in with exact tail integrals; for a decreasing weight these are the
//! maximizers, so skipping them would bias every node down.

use crate::domain::{Grid, Interval, NumericConfig};
use crate::error::{OscError, Result};
use crate::functions::{monotone_crossing, FuncExpr, FuncNode, GridFunction, Interp, MonotoneTag};
use crate::oscillation::sampled_abs_dev;
use crate::search::default_grid;

/// Maximal function of |w| evaluated at every grid node, returned as a
/// piecewise-linear sample (the maximal function of an integrable weight is
/// continuous away from jumps of w).
pub fn maximal_on_grid(
    w: &FuncExpr,
    grid: &Grid,
    i0: Interval,
    cfg: &NumericConfig,
) -> Result<GridFunction> {
    let values = maximal_values(w, grid, i0, cfg)?;
    GridFunction::new(grid.clone(), values, Interp::PiecewiseLinear)
}

fn maximal_values(
    w: &FuncExpr,
    grid: &Grid,
    i0: Interval,
    cfg: &NumericConfig,
) -> Result<Vec<f64>> {
    w.check_subinterval(&i0)?;
    check_grid_inside(grid, &i0)?;
    let zc = zero_crossing(w, &i0)?;
    let nodes = &grid.nodes;
    let n = nodes.len();

    let mut p = Vec::with_capacity(n);
    p.push(0.0);
    for k in 0..n - 1 {
        let q = abs_integral(w, nodes[k], nodes[k + 1], zc, cfg.quad_rel_tol)?;
        p.push(p[k] + q);
    }
    let tail_left = if nodes[0] > i0.lo {
        abs_integral(w, i0.lo, nodes[0], zc, cfg.quad_rel_tol)?
    } else {
        0.0
    };
    let tail_right = if nodes[n - 1] < i0.hi {
        abs_integral(w, nodes[n - 1], i0.hi, zc, cfg.quad_rel_tol)?
    } else {
        0.0
    };

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        for j in 0..i {
            best = best.max((p[i] - p[j]) / (nodes[i] - nodes[j]));
        }
        if nodes[0] > i0.lo {
            best = best.max((tail_left + p[i]) / (nodes[i] - i0.lo));
        }
        for k in i + 1..n {
            best = best.max((p[k] - p[i]) / (nodes[k] - nodes[i]));
        }
        if nodes[n - 1] < i0.hi {
            best = best.max((p[n - 1] - p[i] + tail_right) / (i0.hi - nodes[i]));
        }
        if !best.is_finite() {
            return Err(OscError::Unsupported(format!(
                "maximal function is not finite at x = {}",
                nodes[i]
            )));
        }
        out.push(best);
    }
    Ok(out)
}

/// Maximal function at a single interior point: the default search grid is
/// built for w, the point inserted as a node, and the grid value returned.
pub fn maximal_at_point(w: &FuncExpr, i0: Interval, x: f64, cfg: &NumericConfig) -> Result<f64> {
    if !(x > i0.lo && x < i0.hi) {
        return Err(OscError::OutsideDomain {
            x,
            lo: i0.lo,
            hi: i0.hi,
        });
    }
    let base = default_grid(w, &i0, cfg)?;
    let mut nodes = base.nodes.clone();
    if let Err(pos) = nodes.binary_search_by(|a| a.total_cmp(&x)) {
        nodes.insert(pos, x);
    }
    let grid = Grid::new(nodes, base.cluster_end)?;
    let mg = maximal_on_grid(w, &grid, i0, cfg)?;
    Ok(mg.value_at(x))
}

/// Literal reference: for every node, scan all containing pairs (x_j, x_k)
/// with j <= i <= k, plus pairs reaching the ambient endpoints, integrating
/// each interval independently. Quadratic per node; for tests only.
pub fn maximal_reference(
    w: &FuncExpr,
    grid: &Grid,
    i0: Interval,
    cfg: &NumericConfig,
) -> Result<Vec<f64>> {
    w.check_subinterval(&i0)?;
    check_grid_inside(grid, &i0)?;
    let zc = zero_crossing(w, &i0)?;
    let nodes = &grid.nodes;
    let n = nodes.len();
    let mut lefts = Vec::with_capacity(n + 1);
    if nodes[0] > i0.lo {
        lefts.push(i0.lo);
    }
    lefts.extend_from_slice(nodes);
    let mut rights = nodes.to_vec();
    if nodes[n - 1] < i0.hi {
        rights.push(i0.hi);
    }

    let mut out = Vec::with_capacity(n);
    for (i, &x) in nodes.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for &u in lefts.iter().filter(|&&u| u <= x) {
            for &v in rights.iter().filter(|&&v| v >= x) {
                if v <= u {
                    continue;
                }
                let q = abs_integral(w, u, v, zc, cfg.quad_rel_tol)?;
                best = best.max(q / (v - u));
            }
        }
        if !best.is_finite() {
            return Err(OscError::Unsupported(format!(
                "maximal function is not finite at x = {}",
                nodes[i]
            )));
        }
        out.push(best);
    }
    Ok(out)
}

fn check_grid_inside(grid: &Grid, i0: &Interval) -> Result<()> {
    if grid.first() < i0.lo || grid.last() > i0.hi {
        return Err(OscError::InvalidArgument(format!(
            "grid [{}, {}] leaves the ambient interval ({}, {})",
            grid.first(),
            grid.last(),
            i0.lo,
            i0.hi
        )));
    }
    Ok(())
}

/// Where |w| needs a sign split, if anywhere. Sampled inputs are integrated
/// with an exact cell walk and need none; monotone inputs cross zero at
/// most once; anything else must be nonnegative outright.
fn zero_crossing(w: &FuncExpr, i0: &Interval) -> Result<Option<f64>> {
    if matches!(w.node, FuncNode::Sampled(_)) {
        return Ok(None);
    }
    if w.monotone_tag != MonotoneTag::None {
        return Ok(monotone_crossing(w, 0.0));
    }
    if w.infimum(i0)?.value >= 0.0 {
        return Ok(None);
    }
    Err(OscError::Unsupported(
        "maximal operator needs monotone, sampled, or nonnegative input".into(),
    ))
}

/// Integral of |w| over (u, v), splitting at the single sign change when
/// one exists.
fn abs_integral(w: &FuncExpr, u: f64, v: f64, zc: Option<f64>, rel_tol: f64) -> Result<f64> {
    if let FuncNode::Sampled(g) = &w.node {
        return Ok(sampled_abs_dev(g, u, v, 0.0));
    }
    match zc {
        Some(c) if c > u && c < v => {
            let a = w
                .integrate_with_tol(&Interval { lo: u, hi: c }, rel_tol)?
                .value;
            let b = w
                .integrate_with_tol(&Interval { lo: c, hi: v }, rel_tol)?
                .value;
            Ok(a.abs() + b.abs())
        }
        _ => Ok(w
            .integrate_with_tol(&Interval { lo: u, hi: v }, rel_tol)?
            .value
            .abs()),
    }
}
