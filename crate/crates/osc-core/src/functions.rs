//! Symbolic function catalog: evaluation, exact and adaptive integration,
//! infima, truncation, and pointwise algebra.
//!
//! Conventions: catalog members that blow up at a domain endpoint evaluate to
//! +/-infinity there, and integrals that genuinely diverge come back as
//! +/-infinity rather than an error, so weight searches can treat them as
//! over-cap. Step functions are right-continuous; `value_left_limit` gives
//! the other one-sided value at a breakpoint.

use crate::domain::{Grid, Interval};
use crate::error::{OscError, Result};
use crate::quad::{self, Quadrature};
use crate::special;

use std::sync::OnceLock;

/// Monotonicity in the weak sense: `Decreasing` means nonincreasing.
/// Constants carry `Decreasing` so they stay on exact endpoint paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonotoneTag {
    Decreasing,
    Increasing,
    None,
}

/// How a [`GridFunction`] interpolates between nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    /// Value of the node to the left holds on each half-open cell.
    PiecewiseConstantLeft,
    PiecewiseLinear,
}

/// Breakpoint sequence for the integer step function: value n on
/// [a_{n+1}, a_n), 0 at and above a_1, deepest listed level all the way to 0.
#[derive(Clone, Debug, PartialEq)]
pub enum JumpSpec {
    /// a_n = e^{-e^n}. Entries below f64 range are dropped; no representable
    /// x lies under them, so evaluation is unaffected and the lost integral
    /// mass is below f64 resolution of any result.
    GeomDouble,
    /// Explicit strictly decreasing breakpoints inside (0, 1).
    Explicit(Vec<f64>),
}

static GEOM_BREAKPOINTS: OnceLock<Vec<f64>> = OnceLock::new();

impl JumpSpec {
    /// Breakpoints a_1 > a_2 > ... > a_M > 0.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            JumpSpec::GeomDouble => GEOM_BREAKPOINTS.get_or_init(|| {
                let mut out = Vec::new();
                for n in 1u32..64 {
                    let a = (-((n as f64).exp())).exp();
                    if a <= 0.0 {
                        break;
                    }
                    out.push(a);
                }
                out
            }),
            JumpSpec::Explicit(b) => b,
        }
    }

    /// Step value at x, right-continuous: the number of breakpoints above x.
    pub fn level_at(&self, x: f64) -> usize {
        self.breakpoints().iter().take_while(|&&b| b > x).count()
    }

    /// Step value just left of x.
    pub fn level_left(&self, x: f64) -> usize {
        self.breakpoints().iter().take_while(|&&b| b >= x).count()
    }

    /// Exact integral over (u, v) of the step itself (`weight = None`) or of
    /// e^{step/s} (`weight = Some(s)`), by walking the covered pieces.
    /// Each term is an exact product, so no cancellation across scales.
    fn piece_integral(&self, u: f64, v: f64, weight: Option<f64>) -> f64 {
        let b = self.breakpoints();
        let mut total = 0.0;
        let mut x = u;
        let mut m = self.level_at(u);
        while x < v {
            let end = if m == 0 { v } else { b[m - 1].min(v) };
            if end > x {
                let w = match weight {
                    None => m as f64,
                    Some(s) => ((m as f64) / s).exp(),
                };
                total += w * (end - x);
                x = end;
            }
            if m == 0 {
                break;
            }
            m -= 1;
        }
        total
    }
}

/// Function known by its values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub interp: Interp,
    /// prefix[k] = integral from node 0 to node k under `interp`.
    pub prefix: Option<Vec<f64>>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, interp: Interp) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return Err(OscError::InvalidArgument(format!(
                "grid has {} nodes but {} values supplied",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(OscError::InvalidArgument(format!(
                "grid function value {bad} is not finite"
            )));
        }
        Ok(GridFunction {
            grid,
            values,
            interp,
            prefix: None,
        })
    }

    /// Largest cell index i with node[i] <= x, clamped to a real cell.
    fn cell_of(&self, x: f64) -> usize {
        let nodes = &self.grid.nodes;
        match nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(nodes.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(nodes.len() - 2),
        }
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let x = x.clamp(self.grid.first(), self.grid.last());
        let i = self.cell_of(x);
        match self.interp {
            Interp::PiecewiseConstantLeft => {
                if x >= self.grid.last() {
                    *self.values.last().unwrap()
                } else {
                    self.values[i]
                }
            }
            Interp::PiecewiseLinear => {
                let (a, b) = (self.grid.nodes[i], self.grid.nodes[i + 1]);
                let t = if b > a { (x - a) / (b - a) } else { 0.0 };
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
        }
    }

    /// One-sided value from the left; differs from `value_at` only at
    /// piecewise-constant cell boundaries.
    pub fn left_limit_at(&self, x: f64) -> f64 {
        if self.interp == Interp::PiecewiseLinear {
            return self.value_at(x);
        }
        let nodes = &self.grid.nodes;
        match nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap()) {
            Ok(i) if i >= 1 => self.values[i - 1],
            _ => self.value_at(x),
        }
    }

    /// Exact integral over (u, v) clamped to the grid span.
    pub fn integral_on(&self, u: f64, v: f64) -> f64 {
        let u = u.max(self.grid.first());
        let v = v.min(self.grid.last());
        if v <= u {
            return 0.0;
        }
        let mut total = 0.0;
        for i in self.cell_of(u)..self.grid.len() - 1 {
            let (a, b) = (self.grid.nodes[i], self.grid.nodes[i + 1]);
            if a >= v {
                break;
            }
            let lo = a.max(u);
            let hi = b.min(v);
            if hi <= lo {
                continue;
            }
            total += match self.interp {
                Interp::PiecewiseConstantLeft => self.values[i] * (hi - lo),
                Interp::PiecewiseLinear => {
                    0.5 * (self.value_at(lo) + self.value_at(hi)) * (hi - lo)
                }
            };
        }
        total
    }

    /// Exact integral of e^{f/s} over (u, v).
    pub fn exp_integral_on(&self, u: f64, v: f64, s: f64) -> f64 {
        let u = u.max(self.grid.first());
        let v = v.min(self.grid.last());
        if v <= u {
            return 0.0;
        }
        let mut total = 0.0;
        for i in self.cell_of(u)..self.grid.len() - 1 {
            let (a, b) = (self.grid.nodes[i], self.grid.nodes[i + 1]);
            if a >= v {
                break;
            }
            let lo = a.max(u);
            let hi = b.min(v);
            if hi <= lo {
                continue;
            }
            total += match self.interp {
                Interp::PiecewiseConstantLeft => safe_exp_mul(self.values[i] / s, hi - lo),
                Interp::PiecewiseLinear => {
                    let (ylo, yhi) = (self.value_at(lo), self.value_at(hi));
                    if ((yhi - ylo) / s).abs() < 1e-12 {
                        safe_exp_mul(0.5 * (ylo + yhi) / s, hi - lo)
                    } else {
                        let slope = (yhi - ylo) / (hi - lo);
                        (s / slope) * ((yhi / s).exp() - (ylo / s).exp())
                    }
                }
            };
        }
        total
    }

    /// Exact integral of clamp(f, -k, k) over (u, v).
    pub fn clamped_integral_on(&self, u: f64, v: f64, k: f64) -> f64 {
        let u = u.max(self.grid.first());
        let v = v.min(self.grid.last());
        if v <= u {
            return 0.0;
        }
        let mut total = 0.0;
        for i in self.cell_of(u)..self.grid.len() - 1 {
            let (a, b) = (self.grid.nodes[i], self.grid.nodes[i + 1]);
            if a >= v {
                break;
            }
            let lo = a.max(u);
            let hi = b.min(v);
            if hi <= lo {
                continue;
            }
            total += match self.interp {
                Interp::PiecewiseConstantLeft => self.values[i].clamp(-k, k) * (hi - lo),
                Interp::PiecewiseLinear => {
                    clamped_line_integral(lo, hi, self.value_at(lo), self.value_at(hi), k)
                }
            };
        }
        total
    }

    /// Essential minimum over (u, v): point values at cell boundaries do not
    /// count for piecewise-constant data.
    pub fn ess_min_on(&self, u: f64, v: f64) -> f64 {
        let u = u.max(self.grid.first());
        let v = v.min(self.grid.last());
        let mut m = f64::INFINITY;
        match self.interp {
            Interp::PiecewiseConstantLeft => {
                for i in self.cell_of(u)..self.grid.len() - 1 {
                    let (a, b) = (self.grid.nodes[i], self.grid.nodes[i + 1]);
                    if a >= v {
                        break;
                    }
                    if b.min(v) > a.max(u) {
                        m = m.min(self.values[i]);
                    }
                }
            }
            Interp::PiecewiseLinear => {
                m = self.value_at(u).min(self.value_at(v));
                for (i, &x) in self.grid.nodes.iter().enumerate() {
                    if x > u && x < v {
                        m = m.min(self.values[i]);
                    }
                }
            }
        }
        m
    }

    /// Fill `prefix` with exact cumulative cell integrals.
    pub fn with_prefix(mut self) -> GridFunction {
        let mut prefix = Vec::with_capacity(self.grid.len());
        prefix.push(0.0);
        for i in 1..self.grid.len() {
            let cell = self.integral_on(self.grid.nodes[i - 1], self.grid.nodes[i]);
            prefix.push(prefix[i - 1] + cell);
        }
        self.prefix = Some(prefix);
        self
    }
}

/// Integral over [t1, t2] of clamp(line through (t1,y1),(t2,y2), -k, k).
/// Within each sub-segment the clamped function is affine, so the trapezoid
/// of clamped endpoint values is exact.
fn clamped_line_integral(t1: f64, t2: f64, y1: f64, y2: f64, k: f64) -> f64 {
    if t2 <= t1 {
        return 0.0;
    }
    if y1 == y2 {
        return (t2 - t1) * y1.clamp(-k, k);
    }
    let slope = (y2 - y1) / (t2 - t1);
    let mut ts = vec![t1, t2];
    for level in [k, -k] {
        let t = t1 + (level - y1) / slope;
        if t > t1 && t < t2 {
            ts.push(t);
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let y_at = |t: f64| (y1 + slope * (t - t1)).clamp(-k, k);
    let mut total = 0.0;
    for w in ts.windows(2) {
        total += 0.5 * (y_at(w[0]) + y_at(w[1])) * (w[1] - w[0]);
    }
    total
}

/// e^a * len without producing NaN from inf * 0.
fn safe_exp_mul(a: f64, len: f64) -> f64 {
    if len <= 0.0 {
        0.0
    } else {
        a.exp() * len
    }
}

/// i * e^a computed through logs so huge factors overflow to infinity
/// instead of poisoning the sum.
fn mul_by_exp(i: f64, a: f64) -> f64 {
    if i == 0.0 {
        return 0.0;
    }
    if i.is_infinite() {
        return i;
    }
    let l = a + i.abs().ln();
    if l > 709.0 {
        f64::INFINITY * i.signum()
    } else {
        i.signum() * l.exp()
    }
}

/// Upper incomplete gamma Γ(r+1, t) for integer r via the upward recursion
/// Γ(j+1, t) = t^j e^{-t} + j Γ(j, t); all terms positive, forward stable.
pub(crate) fn gamma_upper_int(r: u32, t: f64) -> f64 {
    let mut acc = (-t).exp();
    if r == 0 {
        return acc;
    }
    let lnt = t.ln();
    for j in 1..=r {
        let term = if t == 0.0 { 0.0 } else { (j as f64 * lnt - t).exp() };
        acc = term + j as f64 * acc;
    }
    acc
}

fn gamma_upper_robust(a: f64, x: f64) -> f64 {
    if a <= 170.0 {
        special::gamma_upper(a, x)
    } else {
        let l = special::ln_gamma_upper(a, x);
        if l > 709.0 {
            f64::INFINITY
        } else {
            l.exp()
        }
    }
}

/// ∫_u^v (-log t)^{a-1} dt = Γ(a, -log v) - Γ(a, -log u), robust to
/// magnitudes beyond f64 via the log-space form.
fn gamma_diff(a: f64, u: f64, v: f64) -> f64 {
    let sv = -v.ln();
    let hi_term = gamma_upper_robust(a, sv);
    if u <= 0.0 {
        return hi_term;
    }
    if hi_term.is_infinite() {
        return f64::INFINITY;
    }
    hi_term - gamma_upper_robust(a, -u.ln())
}

/// ∫_u^v x^{-p} dx with divergence at 0 reported as infinity.
fn power_rule(p: f64, u: f64, v: f64) -> f64 {
    if p == 1.0 {
        return if u <= 0.0 { f64::INFINITY } else { (v / u).ln() };
    }
    let q = 1.0 - p;
    let vq = v.powf(q);
    let uq = if u <= 0.0 {
        if q > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        u.powf(q)
    };
    (vq - uq) / q
}

fn neglog_prefix(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (1.0 - x.ln())
    }
}

fn logneglog_prefix(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let t = -x.ln();
    x * t.ln() + special::e1(t)
}

/// Minimum or supremum value together with whether it came from an exact
/// path or a sampled search.
#[derive(Clone, Copy, Debug)]
pub struct Extremum {
    pub value: f64,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub enum FuncNode {
    Const(f64),
    /// x ↦ -log x on (0, 1].
    NegLog,
    /// x ↦ log(-log x) on (0, 1).
    LogNegLog,
    /// x ↦ (-log x)^r, integer r ≥ 1.
    NegLogPow(u32),
    JumpEta(JumpSpec),
    /// Pointwise clamp of the inner function to [-k, k].
    Truncate(Box<FuncExpr>, f64),
    Sum(Box<FuncExpr>, Box<FuncExpr>),
    /// Positive multiplier; negative scaling goes through Negate so sign
    /// flips stay explicit.
    Scale(Box<FuncExpr>, f64),
    Negate(Box<FuncExpr>),
    /// x ↦ e^{inner(x)/mu}, mu > 0.
    ExpScale(Box<FuncExpr>, f64),
    Sampled(GridFunction),
}

#[derive(Clone, Debug)]
pub struct FuncExpr {
    pub node: FuncNode,
    pub domain: Interval,
    pub monotone_tag: MonotoneTag,
    pub has_exact_antiderivative: bool,
}

fn check_unit_domain(i: &Interval, name: &str, open_right: bool) -> Result<()> {
    let hi_ok = if open_right { i.hi < 1.0 } else { i.hi <= 1.0 };
    if i.lo < 0.0 || !hi_ok {
        return Err(OscError::InvalidArgument(format!(
            "{name} needs a domain inside (0, 1{}), got ({}, {})",
            if open_right { "" } else { "]" },
            i.lo,
            i.hi
        )));
    }
    Ok(())
}

impl FuncExpr {
    pub fn constant(c: f64, domain: Interval) -> Result<FuncExpr> {
        if !c.is_finite() {
            return Err(OscError::InvalidArgument(format!("constant {c} not finite")));
        }
        Ok(Self::finish(FuncNode::Const(c), domain))
    }

    pub fn neg_log(domain: Interval) -> Result<FuncExpr> {
        check_unit_domain(&domain, "neglog", false)?;
        Ok(Self::finish(FuncNode::NegLog, domain))
    }

    pub fn log_neg_log(domain: Interval) -> Result<FuncExpr> {
        check_unit_domain(&domain, "logneglog", true)?;
        Ok(Self::finish(FuncNode::LogNegLog, domain))
    }

    pub fn neg_log_pow(r: u32, domain: Interval) -> Result<FuncExpr> {
        if r == 0 || r > 120 {
            return Err(OscError::InvalidArgument(format!(
                "neglogpow exponent {r} outside 1..=120"
            )));
        }
        check_unit_domain(&domain, "neglogpow", false)?;
        Ok(Self::finish(FuncNode::NegLogPow(r), domain))
    }

    pub fn jump_eta(spec: JumpSpec, domain: Interval) -> Result<FuncExpr> {
        check_unit_domain(&domain, "jumpeta", false)?;
        if let JumpSpec::Explicit(b) = &spec {
            if b.is_empty() {
                return Err(OscError::InvalidArgument(
                    "jumpeta needs at least one breakpoint".into(),
                ));
            }
            for w in b.windows(2) {
                if !(w[1] < w[0]) {
                    return Err(OscError::InvalidArgument(
                        "jumpeta breakpoints must be strictly decreasing".into(),
                    ));
                }
            }
            if b[0] >= 1.0 || *b.last().unwrap() <= 0.0 || b.iter().any(|x| !x.is_finite()) {
                return Err(OscError::InvalidArgument(
                    "jumpeta breakpoints must lie inside (0, 1)".into(),
                ));
            }
        }
        Ok(Self::finish(FuncNode::JumpEta(spec), domain))
    }

    pub fn truncate(f: FuncExpr, k: f64) -> Result<FuncExpr> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(OscError::InvalidArgument(format!(
                "truncation level {k} must be a finite nonnegative number"
            )));
        }
        let domain = f.domain;
        Ok(Self::finish(FuncNode::Truncate(Box::new(f), k), domain))
    }

    pub fn sum(a: FuncExpr, b: FuncExpr) -> Result<FuncExpr> {
        if a.domain != b.domain {
            return Err(OscError::InvalidArgument(format!(
                "sum needs matching domains, got ({}, {}) and ({}, {})",
                a.domain.lo, a.domain.hi, b.domain.lo, b.domain.hi
            )));
        }
        let domain = a.domain;
        Ok(Self::finish(FuncNode::Sum(Box::new(a), Box::new(b)), domain))
    }

    /// Multiply by c. Negative c is routed through Negate so the positive
    /// multiplier stays separate from the sign flip; c = 0 yields the zero
    /// constant.
    pub fn scale(f: FuncExpr, c: f64) -> Result<FuncExpr> {
        if !c.is_finite() {
            return Err(OscError::InvalidArgument(format!("scale factor {c} not finite")));
        }
        if c == 0.0 {
            return Self::constant(0.0, f.domain);
        }
        if c < 0.0 {
            return Ok(Self::negate(Self::scale(f, -c)?));
        }
        let domain = f.domain;
        Ok(Self::finish(FuncNode::Scale(Box::new(f), c), domain))
    }

    pub fn negate(f: FuncExpr) -> FuncExpr {
        let domain = f.domain;
        Self::finish(FuncNode::Negate(Box::new(f)), domain)
    }

    pub fn exp_scale(f: FuncExpr, mu: f64) -> Result<FuncExpr> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(OscError::InvalidArgument(format!(
                "exp scale mu = {mu} must be positive and finite"
            )));
        }
        let domain = f.domain;
        Ok(Self::finish(FuncNode::ExpScale(Box::new(f), mu), domain))
    }

    pub fn sampled(g: GridFunction) -> FuncExpr {
        let domain = g.grid.span();
        Self::finish(FuncNode::Sampled(g), domain)
    }

    fn finish(node: FuncNode, domain: Interval) -> FuncExpr {
        let mut f = FuncExpr {
            monotone_tag: derive_tag(&node),
            has_exact_antiderivative: derive_exact(&node),
            node,
            domain,
        };
        if f.monotone_tag != MonotoneTag::None && !f.tag_consistent(f.monotone_tag) {
            f.monotone_tag = MonotoneTag::None;
        }
        f
    }

    /// Override the monotonicity tag after verifying it by sampling.
    pub fn with_monotone_tag(mut self, tag: MonotoneTag) -> Result<FuncExpr> {
        if tag != MonotoneTag::None && !self.tag_consistent(tag) {
            return Err(OscError::InvalidArgument(
                "claimed monotonicity contradicted by samples".into(),
            ));
        }
        self.monotone_tag = tag;
        Ok(self)
    }

    fn tag_consistent(&self, tag: MonotoneTag) -> bool {
        const N: usize = 33;
        let (lo, hi) = (self.domain.lo, self.domain.hi);
        let mut prev = f64::NAN;
        for j in 0..=N {
            let x = lo + (j as f64 + 0.5) / (N as f64 + 1.0) * (hi - lo);
            let v = self.eval_raw(x);
            if v.is_nan() {
                return false;
            }
            if j > 0 && prev.is_finite() && v.is_finite() {
                let tol = 1e-9 * (1.0 + prev.abs() + v.abs());
                match tag {
                    MonotoneTag::Decreasing if v > prev + tol => return false,
                    MonotoneTag::Increasing if v < prev - tol => return false,
                    _ => {}
                }
            }
            prev = v;
        }
        true
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node {
            FuncNode::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True when the function is piecewise constant, so grids should carry
    /// it with left-closed cells rather than linear interpolation.
    pub fn is_step(&self) -> bool {
        match &self.node {
            FuncNode::JumpEta(_) => true,
            FuncNode::Sampled(g) => g.interp == Interp::PiecewiseConstantLeft,
            FuncNode::Truncate(f, _)
            | FuncNode::Scale(f, _)
            | FuncNode::Negate(f)
            | FuncNode::ExpScale(f, _) => f.is_step(),
            FuncNode::Sum(a, b) => {
                (a.is_step() || a.as_const().is_some())
                    && (b.is_step() || b.as_const().is_some())
                    && (a.is_step() || b.is_step())
            }
            _ => false,
        }
    }

    pub(crate) fn check_subinterval(&self, i: &Interval) -> Result<()> {
        let tol = 1e-12 * (self.domain.length() + i.length());
        if i.lo < self.domain.lo - tol || i.hi > self.domain.hi + tol {
            let x = if i.lo < self.domain.lo - tol { i.lo } else { i.hi };
            return Err(OscError::OutsideDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok(())
    }

    /// Pointwise value; infinite at singular endpoints.
    pub(crate) fn eval_raw(&self, x: f64) -> f64 {
        match &self.node {
            FuncNode::Const(c) => *c,
            FuncNode::NegLog => -x.ln(),
            FuncNode::LogNegLog => (-x.ln()).ln(),
            FuncNode::NegLogPow(r) => (-x.ln()).powi(*r as i32),
            FuncNode::JumpEta(s) => s.level_at(x) as f64,
            FuncNode::Truncate(f, k) => f.eval_raw(x).clamp(-*k, *k),
            FuncNode::Sum(a, b) => a.eval_raw(x) + b.eval_raw(x),
            FuncNode::Scale(f, c) => c * f.eval_raw(x),
            FuncNode::Negate(f) => -f.eval_raw(x),
            FuncNode::ExpScale(f, mu) => (f.eval_raw(x) / mu).exp(),
            FuncNode::Sampled(g) => g.value_at(x),
        }
    }

    pub(crate) fn left_limit_raw(&self, x: f64) -> f64 {
        match &self.node {
            FuncNode::JumpEta(s) => s.level_left(x) as f64,
            FuncNode::Truncate(f, k) => f.left_limit_raw(x).clamp(-*k, *k),
            FuncNode::Sum(a, b) => a.left_limit_raw(x) + b.left_limit_raw(x),
            FuncNode::Scale(f, c) => c * f.left_limit_raw(x),
            FuncNode::Negate(f) => -f.left_limit_raw(x),
            FuncNode::ExpScale(f, mu) => (f.left_limit_raw(x) / mu).exp(),
            FuncNode::Sampled(g) => g.left_limit_at(x),
            _ => self.eval_raw(x),
        }
    }

    pub(crate) fn right_limit_raw(&self, x: f64) -> f64 {
        // all representations here are right-continuous
        self.eval_raw(x)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        if x < self.domain.lo || x > self.domain.hi {
            return Err(OscError::OutsideDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        let v = self.eval_raw(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OscError::OutsideDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            })
        }
    }

    pub fn value_left_limit(&self, x: f64) -> Result<f64> {
        if x <= self.domain.lo || x > self.domain.hi {
            return Err(OscError::OutsideDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok(self.left_limit_raw(x))
    }

    pub fn value_right_limit(&self, x: f64) -> Result<f64> {
        if x < self.domain.lo || x >= self.domain.hi {
            return Err(OscError::OutsideDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok(self.right_limit_raw(x))
    }

    /// Breakpoints of the function strictly inside `i`, sorted ascending.
    pub fn breakpoints_in(&self, i: &Interval) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(i, &mut out);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    fn collect_breakpoints(&self, i: &Interval, out: &mut Vec<f64>) {
        match &self.node {
            FuncNode::JumpEta(s) => {
                out.extend(s.breakpoints().iter().copied().filter(|&b| b > i.lo && b < i.hi));
            }
            FuncNode::Sampled(g) => {
                out.extend(g.grid.nodes.iter().copied().filter(|&n| n > i.lo && n < i.hi));
            }
            FuncNode::Truncate(f, k) => {
                f.collect_breakpoints(i, out);
                for level in [*k, -*k] {
                    if let Some(c) = monotone_crossing(f, level) {
                        if c > i.lo && c < i.hi {
                            out.push(c);
                        }
                    }
                }
            }
            FuncNode::Sum(a, b) => {
                a.collect_breakpoints(i, out);
                b.collect_breakpoints(i, out);
            }
            FuncNode::Scale(f, _) | FuncNode::Negate(f) | FuncNode::ExpScale(f, _) => {
                f.collect_breakpoints(i, out)
            }
            _ => {}
        }
    }

    pub fn integrate(&self, i: &Interval) -> Result<f64> {
        Ok(self.integrate_with_tol(i, 1e-9)?.value)
    }

    pub fn integrate_with_tol(&self, i: &Interval, rel_tol: f64) -> Result<Quadrature> {
        self.check_subinterval(i)?;
        let u = i.lo.max(self.domain.lo);
        let v = i.hi.min(self.domain.hi);
        if v <= u {
            return Ok(Quadrature {
                value: 0.0,
                abs_err: 0.0,
            });
        }
        if let Some(val) = self.exact_integral(u, v) {
            if !val.is_nan() {
                return Ok(Quadrature {
                    value: val,
                    abs_err: val.abs() * 1e-15,
                });
            }
        }
        self.integrate_numeric(u, v, rel_tol)
    }

    pub fn average(&self, i: &Interval) -> Result<f64> {
        Ok(self.integrate(i)? / i.length())
    }

    /// Closed-form integral over (u, v) when one exists.
    pub(crate) fn exact_integral(&self, u: f64, v: f64) -> Option<f64> {
        match &self.node {
            FuncNode::Const(c) => Some(c * (v - u)),
            FuncNode::NegLog => Some(neglog_prefix(v) - neglog_prefix(u)),
            FuncNode::NegLogPow(r) => {
                let p = |x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else {
                        gamma_upper_int(*r, -x.ln())
                    }
                };
                Some(p(v) - p(u))
            }
            FuncNode::LogNegLog => Some(logneglog_prefix(v) - logneglog_prefix(u)),
            FuncNode::JumpEta(s) => Some(s.piece_integral(u, v, None)),
            FuncNode::Truncate(f, k) => match &f.node {
                FuncNode::Sampled(g) => Some(g.clamped_integral_on(u, v, *k)),
                _ if f.monotone_tag != MonotoneTag::None => {
                    truncate_split_integral(f, *k, u, v)
                }
                _ => None,
            },
            FuncNode::Sum(a, b) => Some(a.exact_integral(u, v)? + b.exact_integral(u, v)?),
            FuncNode::Scale(f, c) => Some(c * f.exact_integral(u, v)?),
            FuncNode::Negate(f) => Some(-f.exact_integral(u, v)?),
            FuncNode::ExpScale(f, mu) => exp_integral_exact(f, *mu, u, v),
            FuncNode::Sampled(g) => Some(g.integral_on(u, v)),
        }
    }

    fn integrate_numeric(&self, u: f64, v: f64, rel_tol: f64) -> Result<Quadrature> {
        if u <= 0.0 {
            return self.integrate_numeric_log_substituted(v, rel_tol);
        }
        let bp = self.breakpoints_in(&Interval { lo: u, hi: v });
        let mut ts = Vec::with_capacity(bp.len() + 2);
        ts.push(u);
        ts.extend(bp);
        ts.push(v);
        let mut total = 0.0;
        let mut err = 0.0;
        for w in ts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let q = quad::integrate(|x| self.eval_raw(x), w[0], w[1], rel_tol)?;
            total += q.value;
            err += q.abs_err;
        }
        Ok(Quadrature {
            value: total,
            abs_err: err,
        })
    }

    /// Integral from 0 to v via x = e^{-t}: the singular endpoint becomes a
    /// decaying tail in t, integrated in chunks until the tail estimate is
    /// below tolerance. A tail that keeps growing means divergence; that is
    /// reported as an infinite value rather than an error.
    fn integrate_numeric_log_substituted(&self, v: f64, rel_tol: f64) -> Result<Quadrature> {
        let g = |t: f64| {
            let x = (-t).exp();
            self.eval_raw(x) * x
        };
        let t_v = -v.ln();
        let bp = self.breakpoints_in(&Interval { lo: 0.0, hi: v });
        let mut t_end = (t_v + 20.0).max(40.0);
        for &b in &bp {
            if b > 0.0 {
                t_end = t_end.max(-b.ln() + 5.0);
            }
        }
        t_end = t_end.min(600.0);

        let mut cuts: Vec<f64> = vec![t_v, t_end];
        for &b in &bp {
            let tb = -b.ln();
            if tb > t_v && tb < t_end {
                cuts.push(tb);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut total = 0.0;
        let mut err = 0.0;
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let q = quad::integrate(g, w[0], w[1], rel_tol)?;
            total += q.value;
            err += q.abs_err;
        }

        let mut t0 = t_end;
        loop {
            let g_end = g(t0);
            let g_prev = g(t0 - 1.0);
            if !g_end.is_finite() || !g_prev.is_finite() {
                return Ok(Quadrature {
                    value: f64::INFINITY,
                    abs_err: f64::INFINITY,
                });
            }
            if g_end == 0.0 && g_prev == 0.0 {
                break;
            }
            let ratio = g_end.abs() / g_prev.abs().max(1e-300);
            if ratio < 1.0 {
                let tail = g_end.abs() / (-ratio.ln()).max(1e-3);
                if tail <= (rel_tol * total.abs()).max(1e-300) || t0 >= 600.0 {
                    err += tail;
                    break;
                }
            } else if t0 >= 600.0 {
                // integrand not decaying at the cutoff: divergent in f64 terms
                let sign = if g_end > 0.0 { 1.0 } else { -1.0 };
                return Ok(Quadrature {
                    value: sign * f64::INFINITY,
                    abs_err: f64::INFINITY,
                });
            }
            let next = (t0 + 40.0).min(600.0);
            let q = quad::integrate(g, t0, next, rel_tol)?;
            total += q.value;
            err += q.abs_err;
            t0 = next;
        }
        Ok(Quadrature {
            value: total,
            abs_err: err,
        })
    }

    /// Essential infimum over `i`; exact for monotone-tagged functions and
    /// sampled data, otherwise a dense scan with one golden-section
    /// refinement and `exact: false`.
    pub fn infimum(&self, i: &Interval) -> Result<Extremum> {
        self.check_subinterval(i)?;
        match self.monotone_tag {
            MonotoneTag::Decreasing => Ok(Extremum {
                value: self.left_limit_raw(i.hi),
                exact: true,
            }),
            MonotoneTag::Increasing => Ok(Extremum {
                value: self.right_limit_raw(i.lo),
                exact: true,
            }),
            MonotoneTag::None => {
                if let FuncNode::Sampled(g) = &self.node {
                    return Ok(Extremum {
                        value: g.ess_min_on(i.lo, i.hi),
                        exact: true,
                    });
                }
                Ok(self.scan_extremum(i, false))
            }
        }
    }

    /// Essential supremum over `i`; may be infinite near singular endpoints.
    pub fn supremum(&self, i: &Interval) -> Result<Extremum> {
        self.check_subinterval(i)?;
        match self.monotone_tag {
            MonotoneTag::Decreasing => Ok(Extremum {
                value: self.right_limit_raw(i.lo),
                exact: true,
            }),
            MonotoneTag::Increasing => Ok(Extremum {
                value: self.left_limit_raw(i.hi),
                exact: true,
            }),
            MonotoneTag::None => {
                if let FuncNode::Sampled(g) = &self.node {
                    let mut m = f64::NEG_INFINITY;
                    match g.interp {
                        Interp::PiecewiseConstantLeft => {
                            for j in g.cell_of(i.lo)..g.grid.len() - 1 {
                                let (a, b) = (g.grid.nodes[j], g.grid.nodes[j + 1]);
                                if a >= i.hi {
                                    break;
                                }
                                if b.min(i.hi) > a.max(i.lo) {
                                    m = m.max(g.values[j]);
                                }
                            }
                        }
                        Interp::PiecewiseLinear => {
                            m = g.value_at(i.lo).max(g.value_at(i.hi));
                            for (j, &x) in g.grid.nodes.iter().enumerate() {
                                if x > i.lo && x < i.hi {
                                    m = m.max(g.values[j]);
                                }
                            }
                        }
                    }
                    return Ok(Extremum { value: m, exact: true });
                }
                Ok(self.scan_extremum(i, true))
            }
        }
    }

    fn scan_extremum(&self, i: &Interval, want_max: bool) -> Extremum {
        const N: usize = 257;
        let sign = if want_max { -1.0 } else { 1.0 };
        let h = |x: f64| sign * self.eval_raw(x);
        let mut best = f64::INFINITY;
        let mut best_j = 1;
        for j in 1..=N {
            let x = i.lo + j as f64 / (N as f64 + 1.0) * i.length();
            let v = h(x);
            if v < best {
                best = v;
                best_j = j;
            }
        }
        // one golden-section pass between the argmin's neighbors
        let mut a = i.lo + (best_j as f64 - 1.0) / (N as f64 + 1.0) * i.length();
        let mut b = i.lo + (best_j as f64 + 1.0) / (N as f64 + 1.0) * i.length();
        let inv_phi = 0.618_033_988_749_894_9;
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let mut f1 = h(x1);
        let mut f2 = h(x2);
        for _ in 0..60 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = h(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = h(x2);
            }
        }
        best = best.min(f1).min(f2);
        Extremum {
            value: sign * best,
            exact: false,
        }
    }

    /// Same function on a subinterval of its domain.
    pub fn restrict(&self, i: Interval) -> Result<FuncExpr> {
        self.check_subinterval(&i)?;
        let node = match &self.node {
            FuncNode::Truncate(f, k) => FuncNode::Truncate(Box::new(f.restrict(i)?), *k),
            FuncNode::Sum(a, b) => {
                FuncNode::Sum(Box::new(a.restrict(i)?), Box::new(b.restrict(i)?))
            }
            FuncNode::Scale(f, c) => FuncNode::Scale(Box::new(f.restrict(i)?), *c),
            FuncNode::Negate(f) => FuncNode::Negate(Box::new(f.restrict(i)?)),
            FuncNode::ExpScale(f, mu) => FuncNode::ExpScale(Box::new(f.restrict(i)?), *mu),
            other => other.clone(),
        };
        Ok(FuncExpr {
            node,
            domain: i,
            monotone_tag: self.monotone_tag,
            has_exact_antiderivative: self.has_exact_antiderivative,
        })
    }
}

fn derive_tag(node: &FuncNode) -> MonotoneTag {
    match node {
        FuncNode::Const(_)
        | FuncNode::NegLog
        | FuncNode::LogNegLog
        | FuncNode::NegLogPow(_)
        | FuncNode::JumpEta(_) => MonotoneTag::Decreasing,
        FuncNode::Truncate(f, _) | FuncNode::Scale(f, _) | FuncNode::ExpScale(f, _) => {
            f.monotone_tag
        }
        FuncNode::Negate(f) => match f.monotone_tag {
            MonotoneTag::Decreasing => MonotoneTag::Increasing,
            MonotoneTag::Increasing => MonotoneTag::Decreasing,
            MonotoneTag::None => MonotoneTag::None,
        },
        FuncNode::Sum(a, b) => {
            if a.as_const().is_some() {
                b.monotone_tag
            } else if b.as_const().is_some() {
                a.monotone_tag
            } else if a.monotone_tag == b.monotone_tag {
                a.monotone_tag
            } else {
                MonotoneTag::None
            }
        }
        FuncNode::Sampled(g) => {
            let v = &g.values;
            if v.windows(2).all(|w| w[1] <= w[0]) {
                MonotoneTag::Decreasing
            } else if v.windows(2).all(|w| w[1] >= w[0]) {
                MonotoneTag::Increasing
            } else {
                MonotoneTag::None
            }
        }
    }
}

fn derive_exact(node: &FuncNode) -> bool {
    match node {
        FuncNode::Const(_)
        | FuncNode::NegLog
        | FuncNode::LogNegLog
        | FuncNode::NegLogPow(_)
        | FuncNode::JumpEta(_)
        | FuncNode::Sampled(_) => true,
        FuncNode::Truncate(f, _) => {
            f.has_exact_antiderivative
                && (f.monotone_tag != MonotoneTag::None
                    || matches!(f.node, FuncNode::Sampled(_)))
        }
        FuncNode::Sum(a, b) => a.has_exact_antiderivative && b.has_exact_antiderivative,
        FuncNode::Scale(f, _) | FuncNode::Negate(f) => f.has_exact_antiderivative,
        FuncNode::ExpScale(f, _) => exp_supported(f),
    }
}

fn exp_supported(f: &FuncExpr) -> bool {
    match &f.node {
        FuncNode::Const(_)
        | FuncNode::NegLog
        | FuncNode::LogNegLog
        | FuncNode::JumpEta(_)
        | FuncNode::Sampled(_) => true,
        FuncNode::Scale(g, _) | FuncNode::Negate(g) => exp_supported(g),
        FuncNode::Sum(a, b) => {
            (a.as_const().is_some() && exp_supported(b))
                || (b.as_const().is_some() && exp_supported(a))
        }
        FuncNode::Truncate(g, _) => g.monotone_tag != MonotoneTag::None && exp_supported(g),
        FuncNode::NegLogPow(_) | FuncNode::ExpScale(..) => false,
    }
}

/// Exact ∫_u^v e^{f/s} when the inner function admits one. The sign of s may
/// be negative here: Negate recursions flip it.
fn exp_integral_exact(f: &FuncExpr, s: f64, u: f64, v: f64) -> Option<f64> {
    match &f.node {
        FuncNode::Const(c) => Some(safe_exp_mul(c / s, v - u)),
        FuncNode::NegLog => Some(power_rule(1.0 / s, u, v)),
        FuncNode::LogNegLog => {
            let rho = 1.0 / s;
            if rho <= -1.0 {
                None
            } else {
                Some(gamma_diff(rho + 1.0, u, v))
            }
        }
        FuncNode::NegLogPow(_) => {
            if s > 0.0 && u <= 0.0 {
                Some(f64::INFINITY)
            } else {
                None
            }
        }
        FuncNode::JumpEta(spec) => Some(spec.piece_integral(u, v, Some(s))),
        FuncNode::Scale(g, c) => exp_integral_exact(g, s / c, u, v),
        FuncNode::Negate(g) => exp_integral_exact(g, -s, u, v),
        FuncNode::Sum(a, b) => {
            if let Some(c) = a.as_const() {
                exp_integral_exact(b, s, u, v).map(|i| mul_by_exp(i, c / s))
            } else if let Some(c) = b.as_const() {
                exp_integral_exact(a, s, u, v).map(|i| mul_by_exp(i, c / s))
            } else {
                None
            }
        }
        FuncNode::Truncate(g, k) => {
            if g.monotone_tag == MonotoneTag::None {
                return None;
            }
            let c_top = monotone_crossing(g, *k)?;
            let c_bot = monotone_crossing(g, -*k)?;
            match g.monotone_tag {
                MonotoneTag::Decreasing => {
                    let s1 = safe_exp_mul(*k / s, (c_top.min(v) - u).max(0.0));
                    let (mid_lo, mid_hi) = (c_top.max(u), c_bot.min(v));
                    let s2 = if mid_hi > mid_lo {
                        exp_integral_exact(g, s, mid_lo, mid_hi)?
                    } else {
                        0.0
                    };
                    let s3 = safe_exp_mul(-*k / s, (v - c_bot.max(u)).max(0.0));
                    Some(s1 + s2 + s3)
                }
                MonotoneTag::Increasing => {
                    let s1 = safe_exp_mul(-*k / s, (c_bot.min(v) - u).max(0.0));
                    let (mid_lo, mid_hi) = (c_bot.max(u), c_top.min(v));
                    let s2 = if mid_hi > mid_lo {
                        exp_integral_exact(g, s, mid_lo, mid_hi)?
                    } else {
                        0.0
                    };
                    let s3 = safe_exp_mul(*k / s, (v - c_top.max(u)).max(0.0));
                    Some(s1 + s2 + s3)
                }
                MonotoneTag::None => unreachable!(),
            }
        }
        FuncNode::Sampled(g) => Some(g.exp_integral_on(u, v, s)),
        FuncNode::ExpScale(..) => None,
    }
}

fn truncate_split_integral(f: &FuncExpr, k: f64, u: f64, v: f64) -> Option<f64> {
    let c_top = monotone_crossing(f, k)?;
    let c_bot = monotone_crossing(f, -k)?;
    match f.monotone_tag {
        MonotoneTag::Decreasing => {
            // f >= k left of c_top, f >= -k left of c_bot, c_top <= c_bot
            let s1 = k * (c_top.min(v) - u).max(0.0);
            let (mid_lo, mid_hi) = (c_top.max(u), c_bot.min(v));
            let s2 = if mid_hi > mid_lo {
                f.exact_integral(mid_lo, mid_hi)?
            } else {
                0.0
            };
            let s3 = -k * (v - c_bot.max(u)).max(0.0);
            Some(s1 + s2 + s3)
        }
        MonotoneTag::Increasing => {
            let s1 = -k * (c_bot.min(v) - u).max(0.0);
            let (mid_lo, mid_hi) = (c_bot.max(u), c_top.min(v));
            let s2 = if mid_hi > mid_lo {
                f.exact_integral(mid_lo, mid_hi)?
            } else {
                0.0
            };
            let s3 = k * (v - c_top.max(u)).max(0.0);
            Some(s1 + s2 + s3)
        }
        MonotoneTag::None => None,
    }
}

/// Location where a monotone function crosses level y, i.e. the boundary of
/// {x: f(x) >= y} within the domain. For decreasing f the set sits left of
/// the returned point, for increasing f right of it. Closed forms cover the
/// catalog; anything else monotone falls back to bisection, exact to ~1 ulp.
pub fn monotone_crossing(f: &FuncExpr, y: f64) -> Option<f64> {
    if f.monotone_tag == MonotoneTag::None {
        return None;
    }
    let (lo, hi) = (f.domain.lo, f.domain.hi);
    let decreasing = f.monotone_tag == MonotoneTag::Decreasing;
    // degenerate full / empty sets first, via one-sided endpoint limits
    let at_lo = f.right_limit_raw(lo);
    let at_hi = f.left_limit_raw(hi);
    if decreasing {
        if at_hi >= y {
            return Some(hi);
        }
        if at_lo < y {
            return Some(lo);
        }
    } else {
        if at_lo >= y {
            return Some(lo);
        }
        if at_hi < y {
            return Some(hi);
        }
    }
    if let Some(x) = crossing_closed_form(f, y) {
        return Some(x.clamp(lo, hi));
    }
    // bisection on the monotone predicate f(x) >= y
    let (mut a, mut b) = (lo, hi);
    for _ in 0..120 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let hit = f.eval_raw(m) >= y;
        if hit == decreasing {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn crossing_closed_form(f: &FuncExpr, y: f64) -> Option<f64> {
    match &f.node {
        FuncNode::NegLog => Some((-y).exp()),
        FuncNode::NegLogPow(r) => {
            if y <= 0.0 {
                None // handled by the degenerate checks
            } else {
                Some((-(y.powf(1.0 / *r as f64))).exp())
            }
        }
        FuncNode::LogNegLog => Some((-(y.exp())).exp()),
        FuncNode::JumpEta(spec) => {
            if y <= 0.0 {
                return None;
            }
            let m = y.ceil() as usize;
            let b = spec.breakpoints();
            Some(if m <= b.len() { b[m - 1] } else { 0.0 })
        }
        FuncNode::Scale(g, c) => crossing_closed_form(g, y / c),
        FuncNode::Negate(g) => crossing_closed_form(g, -y),
        FuncNode::Sum(a, b) => {
            if let Some(c) = a.as_const() {
                crossing_closed_form(b, y - c)
            } else if let Some(c) = b.as_const() {
                crossing_closed_form(a, y - c)
            } else {
                None
            }
        }
        FuncNode::Truncate(g, k) => {
            if y > -*k && y <= *k {
                crossing_closed_form(g, y)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// For decreasing f: sup{x: f(x) >= y}, so the upper level set is
/// (domain.lo, returned point).
pub fn upper_level_set_end(f: &FuncExpr, y: f64) -> Option<f64> {
    if f.monotone_tag != MonotoneTag::Decreasing {
        return None;
    }
    monotone_crossing(f, y)
}

/// Measure of {x in domain: f(x) >= y}; exact for monotone-tagged functions
/// and piecewise-constant samples, including negated samples.
pub fn upper_level_set_measure(f: &FuncExpr, y: f64) -> Option<f64> {
    match f.monotone_tag {
        MonotoneTag::Decreasing => monotone_crossing(f, y).map(|c| c - f.domain.lo),
        MonotoneTag::Increasing => monotone_crossing(f, y).map(|c| f.domain.hi - c),
        MonotoneTag::None => match &f.node {
            FuncNode::Sampled(g) if g.interp == Interp::PiecewiseConstantLeft => {
                Some(pc_upper_measure(g, &f.domain, y, false))
            }
            FuncNode::Negate(inner) => match &inner.node {
                FuncNode::Sampled(g) if g.interp == Interp::PiecewiseConstantLeft => {
                    Some(pc_upper_measure(g, &f.domain, y, true))
                }
                _ => None,
            },
            _ => None,
        },
    }
}

/// Total length of the cells of a piecewise-constant sample, clipped to dom,
/// whose value (negated when asked) is at least y.
fn pc_upper_measure(g: &GridFunction, dom: &Interval, y: f64, negated: bool) -> f64 {
    let mut total = 0.0;
    for j in g.cell_of(dom.lo)..g.grid.len() - 1 {
        let (a, b) = (g.grid.nodes[j], g.grid.nodes[j + 1]);
        if a >= dom.hi {
            break;
        }
        let lo = a.max(dom.lo);
        let hi = b.min(dom.hi);
        let v = if negated { -g.values[j] } else { g.values[j] };
        if hi > lo && v >= y {
            total += hi - lo;
        }
    }
    total
}

/// f - T_k f on the subinterval where it is nonzero, or None when the
/// truncation already captures all of f. Requires f bounded below by -k
/// (the residual would otherwise have a second piece of opposite sign).
pub fn truncation_residual(f: &FuncExpr, k: f64) -> Result<Option<FuncExpr>> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(OscError::InvalidArgument(format!(
            "truncation level {k} must be a finite nonnegative number"
        )));
    }
    let inf = f.infimum(&f.domain)?;
    if inf.value < -k - 1e-12 * (1.0 + k) {
        return Err(OscError::Unsupported(
            "truncation residual with values below -k".into(),
        ));
    }
    let sub = match f.monotone_tag {
        MonotoneTag::Decreasing => {
            let xk = monotone_crossing(f, k).unwrap();
            if xk <= f.domain.lo {
                return Ok(None);
            }
            Interval {
                lo: f.domain.lo,
                hi: xk,
            }
        }
        MonotoneTag::Increasing => {
            let xk = monotone_crossing(f, k).unwrap();
            if xk >= f.domain.hi {
                return Ok(None);
            }
            Interval {
                lo: xk,
                hi: f.domain.hi,
            }
        }
        MonotoneTag::None => {
            return Err(OscError::Unsupported(
                "truncation residual needs a monotone function".into(),
            ))
        }
    };
    if sub.length() <= 0.0 {
        return Ok(None);
    }
    let g = f.restrict(sub)?;
    let c = FuncExpr::constant(-k, sub)?;
    Ok(Some(FuncExpr::sum(g, c)?))
}

/// Values of f at the grid nodes together with exact-where-possible prefix
/// integrals anchored at the first node.
pub fn sample(f: &FuncExpr, grid: &Grid) -> Result<GridFunction> {
    f.check_subinterval(&grid.span())?;
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid.nodes {
        let v = f.eval_raw(x);
        if !v.is_finite() {
            return Err(OscError::InvalidArgument(format!(
                "cannot sample: function not finite at node x = {x}"
            )));
        }
        values.push(v);
    }
    let interp = if f.is_step() {
        Interp::PiecewiseConstantLeft
    } else {
        Interp::PiecewiseLinear
    };
    let mut prefix = Vec::with_capacity(grid.len());
    prefix.push(0.0);
    for i in 1..grid.len() {
        let cell = Interval {
            lo: grid.nodes[i - 1],
            hi: grid.nodes[i],
        };
        prefix.push(prefix[i - 1] + f.integrate(&cell)?);
    }
    Ok(GridFunction {
        grid: grid.clone(),
        values,
        interp,
        prefix: Some(prefix),
    })
}
