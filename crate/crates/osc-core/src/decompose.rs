//! Constructive decomposition of an A1 weight, w = b * (Mg)^epsilon with
//! g = w^{1+eta}, epsilon = 1/(1+eta), and b trapped in (0, 1]; and the
//! derived decomposition f = alpha * log(Mg) + B of a BLO function, whose
//! alpha + sup|B| certifies an upper bound on the decomposition norm.
//!
//! The factor b is defined nodewise by division, so the reconstruction
//! residual measures plumbing consistency rather than theorem truth; the
//! substantive claims are the bounds on b, which depend on the maximal
//! operator and the A1 constant being right.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::domain::{Grid, Interval, NumericConfig};
use crate::error::{OscError, Result};
use crate::functions::{FuncExpr, GridFunction, Interp};
use crate::maximal::maximal_on_grid;
use crate::oscillation::blo_seminorm;
use crate::parse::to_expr_string;
use crate::search::default_grid;
use crate::weights::{a1_membership, pow_weight, reverse_holder_search};

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub eta: f64,
    /// 1/(1+eta).
    pub epsilon: f64,
    /// Bounded factor at the grid nodes; values in (a_lower, 1].
    pub b: GridFunction,
    /// The function under the maximal operator: w^{1+eta}.
    pub g: FuncExpr,
    /// Guaranteed lower bound 1/(2e * source_a1) on b.
    pub a_lower: f64,
    /// A1 constant of the source weight used for a_lower.
    pub source_a1: f64,
    /// Ambient interval of the construction (the maximal operator sees it).
    pub interval: Interval,
    /// Max relative reconstruction error over the nodes, set at build time.
    pub residual: f64,
}

impl Serialize for Decomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Decomposition", 9)?;
        st.serialize_field("eta", &self.eta)?;
        st.serialize_field("epsilon", &self.epsilon)?;
        st.serialize_field("nodes", &self.b.grid.nodes)?;
        st.serialize_field("b", &self.b.values)?;
        st.serialize_field("g", &to_expr_string(&self.g))?;
        st.serialize_field("a_lower", &self.a_lower)?;
        st.serialize_field("source_a1", &self.source_a1)?;
        st.serialize_field("interval", &self.interval)?;
        st.serialize_field("residual", &self.residual)?;
        st.end()
    }
}

#[derive(Clone, Debug)]
pub struct BloDecomposition {
    /// Coefficient of log(Mg); mu * epsilon.
    pub alpha: f64,
    /// mu * log(b) at the grid nodes.
    pub b_bounded: GridFunction,
    /// The function under the maximal operator.
    pub g: FuncExpr,
    /// alpha + sup|b_bounded|: a certified upper bound on the
    /// decomposition norm of f.
    pub norm_bound: f64,
    /// The exponential scale that made e^{f/mu} an A1 weight.
    pub mu: f64,
}

impl Serialize for BloDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BloDecomposition", 6)?;
        st.serialize_field("alpha", &self.alpha)?;
        st.serialize_field("nodes", &self.b_bounded.grid.nodes)?;
        st.serialize_field("b_bounded", &self.b_bounded.values)?;
        st.serialize_field("g", &to_expr_string(&self.g))?;
        st.serialize_field("norm_bound", &self.norm_bound)?;
        st.serialize_field("mu", &self.mu)?;
        st.end()
    }
}

/// Upper tolerance on b: values above 1 by more than this abort the build.
const B_UPPER_TOL: f64 = 1e-9;

pub fn coifman_rochberg(
    w: &FuncExpr,
    i0: Interval,
    eta: f64,
    cfg: &NumericConfig,
) -> Result<Decomposition> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(OscError::InvalidArgument(format!(
            "eta = {eta} outside (0, 1)"
        )));
    }
    let (member, report) = a1_membership(w, i0, cfg.a1_cap, cfg)?;
    if !member {
        return Err(OscError::InvalidArgument(format!(
            "weight fails A1 membership on the interval (estimate {}, stable: {})",
            report.constant, report.stable
        )));
    }
    let source_a1 = report.constant;
    let epsilon = 1.0 / (1.0 + eta);
    let a_lower = 1.0 / (2.0 * std::f64::consts::E * source_a1);

    let g = pow_weight(w, 1.0 + eta)?;
    let grid = default_grid(&g, &i0, cfg)?;
    let mg = maximal_on_grid(&g, &grid, i0, cfg)?;

    let mut b_vals = Vec::with_capacity(grid.len());
    let mut residual = 0.0f64;
    for (&x, &m) in grid.nodes.iter().zip(mg.values.iter()) {
        let wx = w.value(x)?;
        if !(wx > 0.0) {
            return Err(OscError::FactorOutOfBounds {
                detail: format!("weight vanishes at node x = {x}"),
            });
        }
        let denom = m.powf(epsilon);
        let b = wx / denom;
        if !(b > 0.0) || b > 1.0 + B_UPPER_TOL {
            return Err(OscError::FactorOutOfBounds {
                detail: format!(
                    "b = {b} at x = {x} leaves (0, 1]; eta too large or membership unstable"
                ),
            });
        }
        residual = residual.max((wx - b * denom).abs() / wx);
        b_vals.push(b);
    }
    let b = GridFunction::new(grid, b_vals, Interp::PiecewiseLinear)?;
    Ok(Decomposition {
        eta,
        epsilon,
        b,
        g,
        a_lower,
        source_a1,
        interval: i0,
        residual,
    })
}

/// Max over the given grid's nodes of |w - b (Mg)^epsilon| / w, with the
/// maximal operator recomputed from d.g on that grid.
pub fn verify_decomposition(d: &Decomposition, w: &FuncExpr, grid: &Grid) -> Result<f64> {
    let cfg = NumericConfig::default();
    let mg = maximal_on_grid(&d.g, grid, d.interval, &cfg)?;
    let mut worst = 0.0f64;
    for (&x, &m) in grid.nodes.iter().zip(mg.values.iter()) {
        let wx = w.value(x)?;
        if !(wx > 0.0) {
            return Err(OscError::InvalidArgument(format!(
                "weight vanishes at node x = {x}"
            )));
        }
        let recon = d.b.value_at(x) * m.powf(d.epsilon);
        worst = worst.max((wx - recon).abs() / wx);
    }
    Ok(worst)
}

/// Decompose a BLO function as alpha log(Mg) + B by exponentiating into a
/// weight: pick mu with e^{f/mu} in A1 (the Step-1 recipe mu = 4 blo / c2,
/// doubled on failure), run the weight decomposition, and pull it back.
pub fn blo_upper_decomposition(
    f: &FuncExpr,
    i0: Interval,
    cfg: &NumericConfig,
) -> Result<BloDecomposition> {
    let blo = blo_seminorm(f, i0, cfg)?;
    if !blo.value.is_finite() {
        return Err(OscError::InvalidArgument(
            "lower-oscillation seminorm is not finite; no decomposition exists".into(),
        ));
    }
    // 4 blo / c2 with c2 = 1/(2e); bounded functions (blo near 0) still
    // need a positive scale
    let mut mu = (4.0 * blo.value / cfg.jn_c2).max(1e-3);
    let mut last_err: Option<OscError> = None;
    for _ in 0..20 {
        match try_decompose_at(f, i0, mu, cfg) {
            Ok(d) => return Ok(d),
            Err(e) => last_err = Some(e),
        }
        mu *= 2.0;
    }
    Err(OscError::NoMembership {
        largest_mu: mu / 2.0,
    })
    .map_err(|e| match last_err {
        // surface the inner failure when it was not a plain membership miss
        Some(OscError::InvalidArgument(_)) | None => e,
        Some(other) => other,
    })
}

fn try_decompose_at(
    f: &FuncExpr,
    i0: Interval,
    mu: f64,
    cfg: &NumericConfig,
) -> Result<BloDecomposition> {
    let w = FuncExpr::exp_scale(f.clone(), mu)?;
    let (eta, _c_eta) = reverse_holder_search(&w, i0, cfg)?;
    let d = coifman_rochberg(&w, i0, eta, cfg)?;
    let alpha = mu * d.epsilon;
    let vals: Vec<f64> = d.b.values.iter().map(|&b| mu * b.ln()).collect();
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_bounded = GridFunction::new(d.b.grid.clone(), vals, Interp::PiecewiseLinear)?;
    Ok(BloDecomposition {
        alpha,
        b_bounded,
        g: d.g,
        norm_bound: alpha + sup,
        mu,
    })
}
