//! Distance to L-infinity: sigma(f) = inf { mu > 0 : e^{f/mu} is an A1
//! weight }, bracketed by bisection over membership probes. Catalog shapes
//! whose membership threshold is known in closed form answer from a table;
//! everything else goes through the operational grid test, which can flag
//! divergence (cap + instability) but cannot certify it, so every probe
//! records which route produced it.

use serde::Serialize;

use crate::decompose::blo_upper_decomposition;
use crate::domain::{Interval, NumericConfig};
use crate::error::{OscError, Result};
use crate::functions::{FuncExpr, FuncNode};
use crate::oscillation::blo_seminorm;
use crate::weights::a1_membership;

/// Upper endpoint at or below this means f sits in the closure of
/// L-infinity for practical purposes.
pub const CLOSURE_THRESHOLD: f64 = 1e-2;

#[derive(Clone, Debug, Serialize)]
pub struct SigmaProbe {
    pub mu: f64,
    pub member: bool,
    /// A1 estimate from the grid search; absent when the closed-form
    /// catalog answered.
    pub estimate: Option<f64>,
    /// "oracle" or "grid".
    pub mode: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaBracket {
    /// Largest probed mu known infeasible (0 when none failed).
    pub lower: f64,
    /// Smallest probed mu known feasible.
    pub upper: f64,
    pub cap_used: f64,
    pub evaluations: Vec<SigmaProbe>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistReport {
    pub sigma_bracket: SigmaBracket,
    /// Certified upper bound on the decomposition norm of f.
    pub norm_bound: f64,
    /// True iff sigma_bracket.upper <= the closure threshold.
    pub closure_flag: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalExponent {
    pub mu_star: f64,
    /// The average bound holds for every mu > 0; mu_star is 0 then.
    pub all_feasible: bool,
}

pub fn sigma(f: &FuncExpr, i0: Interval, cfg: &NumericConfig) -> Result<SigmaBracket> {
    let blo = blo_seminorm(f, i0, cfg)?;
    if !blo.value.is_finite() {
        return Err(OscError::InvalidArgument(
            "lower-oscillation seminorm is not finite; sigma is undefined".into(),
        ));
    }
    let mut evals = Vec::new();
    let initial = (2.0 * blo.value / cfg.jn_c2).max(1e-3);

    let mut upper = initial;
    let mut feasible = probe(f, i0, upper, cfg, &mut evals)?;
    let mut doublings = 0;
    while !feasible {
        if doublings == 20 {
            return Err(OscError::NoMembership { largest_mu: upper });
        }
        doublings += 1;
        upper = initial * f64::powi(2.0, doublings);
        feasible = probe(f, i0, upper, cfg, &mut evals)?;
    }

    let mut lower = 0.0f64;
    while upper - lower > (1e-2 * upper).max(1e-3) {
        let mid = 0.5 * (lower + upper);
        if probe(f, i0, mid, cfg, &mut evals)? {
            upper = mid;
        } else {
            lower = mid;
        }
    }
    Ok(SigmaBracket {
        lower,
        upper,
        cap_used: cfg.a1_cap,
        evaluations: evals,
    })
}

pub fn dist_report(f: &FuncExpr, i0: Interval, cfg: &NumericConfig) -> Result<DistReport> {
    let sigma_bracket = sigma(f, i0, cfg)?;
    let dec = blo_upper_decomposition(f, i0, cfg)?;
    let closure_flag = sigma_bracket.upper <= CLOSURE_THRESHOLD;
    Ok(DistReport {
        sigma_bracket,
        norm_bound: dec.norm_bound,
        closure_flag,
    })
}

fn probe(
    f: &FuncExpr,
    i0: Interval,
    mu: f64,
    cfg: &NumericConfig,
    evals: &mut Vec<SigmaProbe>,
) -> Result<bool> {
    if let Some(member) = oracle_membership(f, i0, mu, false) {
        evals.push(SigmaProbe {
            mu,
            member,
            estimate: None,
            mode: "oracle",
        });
        return Ok(member);
    }
    let w = FuncExpr::exp_scale(f.clone(), mu)?;
    let (member, report) = a1_membership(&w, i0, cfg.a1_cap, cfg)?;
    evals.push(SigmaProbe {
        mu,
        member,
        estimate: Some(report.constant),
        mode: "grid",
    });
    Ok(member)
}

/// Closed-form membership of e^{f/mu} in A1 over i0 for catalog shapes;
/// None defers to the grid test. `negated` is the parity of enclosing
/// Negate nodes. Catalog singularities all sit at x = 0, so a probe
/// interval with positive left endpoint sees a bounded function.
fn oracle_membership(f: &FuncExpr, i0: Interval, mu: f64, negated: bool) -> Option<bool> {
    let away_from_zero = i0.lo.max(f.domain.lo) > 0.0;
    match &f.node {
        FuncNode::Const(_)
        | FuncNode::Sampled(_)
        | FuncNode::Truncate(..)
        | FuncNode::JumpEta(_) => Some(true),
        // e^{-log x / mu} = x^{-1/mu}, integrable at 0 iff mu > 1; the
        // negated form x^{1/mu} has essential infimum 0 near the origin
        FuncNode::NegLog | FuncNode::NegLogPow(1) => Some(if away_from_zero {
            true
        } else if negated {
            false
        } else {
            mu > 1.0
        }),
        // e^{(-log x)^r / mu} outgrows every power of x at the origin
        FuncNode::NegLogPow(_) => Some(away_from_zero),
        // (-log x)^{1/mu} is in A1 for every exponent; the reciprocal
        // vanishes at the origin
        FuncNode::LogNegLog => Some(away_from_zero || !negated),
        // the constructor keeps scale factors positive
        FuncNode::Scale(g, c) => oracle_membership(g, i0, mu / c, negated),
        FuncNode::Negate(g) => oracle_membership(g, i0, mu, !negated),
        // a bounded summand rescales the weight by a bounded factor and
        // cannot change membership
        FuncNode::Sum(a, b) => {
            if is_bounded(b, i0) {
                oracle_membership(a, i0, mu, negated)
            } else if is_bounded(a, i0) {
                oracle_membership(b, i0, mu, negated)
            } else {
                None
            }
        }
        FuncNode::ExpScale(..) => None,
    }
}

fn is_bounded(f: &FuncExpr, i0: Interval) -> bool {
    match &f.node {
        FuncNode::Const(_)
        | FuncNode::Sampled(_)
        | FuncNode::Truncate(..)
        | FuncNode::JumpEta(_) => true,
        FuncNode::NegLog | FuncNode::LogNegLog | FuncNode::NegLogPow(_) => {
            i0.lo.max(f.domain.lo) > 0.0
        }
        FuncNode::Scale(g, _) | FuncNode::Negate(g) => is_bounded(g, i0),
        FuncNode::Sum(a, b) => is_bounded(a, i0) && is_bounded(b, i0),
        FuncNode::ExpScale(g, _) => is_bounded(g, i0),
    }
}

/// Smallest mu with the averaged exponential bound: the infimum of mu > 0
/// such that the average of e^{h/mu} over i stays at or below c_bound. The
/// map lambda -> average of e^{lambda h} is strictly increasing for
/// nonconstant h, so the root in lambda = 1/mu is found by bisection.
pub fn exp_critical_exponent(
    h: &FuncExpr,
    i: Interval,
    c_bound: f64,
) -> Result<CriticalExponent> {
    if !(c_bound > 1.0) {
        return Err(OscError::InvalidArgument(format!(
            "average bound {c_bound} must exceed 1"
        )));
    }
    let lo = h.infimum(&i)?.value;
    let hi = h.supremum(&i)?.value;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(OscError::InvalidArgument(
            "critical exponent needs a bounded function".into(),
        ));
    }
    let span = hi.abs().max(lo.abs());
    if hi - lo <= 1e-13 * span.max(1.0) {
        // constant h: the average is e^{h/mu} exactly
        let c = 0.5 * (hi + lo);
        return Ok(if c > 1e-13 * span.max(1.0) {
            CriticalExponent {
                mu_star: c / c_bound.ln(),
                all_feasible: false,
            }
        } else {
            CriticalExponent {
                mu_star: 0.0,
                all_feasible: true,
            }
        });
    }
    if hi <= 0.0 {
        // e^{lambda h} <= 1 < c_bound for every lambda
        return Ok(CriticalExponent {
            mu_star: 0.0,
            all_feasible: true,
        });
    }

    let avg = |lambda: f64| -> Result<f64> {
        FuncExpr::exp_scale(h.clone(), 1.0 / lambda)?.average(&i)
    };
    // exp overflows past ~709; feasibility at this cap means c_bound is
    // astronomically far away
    let lambda_cap = 690.0 / hi;
    let mut lambda_hi = 1.0f64.min(lambda_cap);
    while avg(lambda_hi)? <= c_bound {
        if lambda_hi >= lambda_cap {
            return Err(OscError::InvalidArgument(format!(
                "bound {c_bound} stays feasible up to the overflow limit"
            )));
        }
        lambda_hi = (lambda_hi * 2.0).min(lambda_cap);
    }
    let mut lambda_lo = 0.0f64;
    // avg is increasing and continuous; avg(0) = 1 < c_bound
    while lambda_hi - lambda_lo > 1e-12 * lambda_hi {
        let mid = 0.5 * (lambda_lo + lambda_hi);
        if avg(mid)? <= c_bound {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
        }
    }
    Ok(CriticalExponent {
        mu_star: 1.0 / lambda_hi,
        all_feasible: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_interval, ClusterEnd, Grid};
    use crate::functions::{GridFunction, Interp};

    const E: f64 = std::f64::consts::E;

    fn cfg() -> NumericConfig {
        NumericConfig {
            grid_size: 64,
            refine_levels: 2,
            ..NumericConfig::default()
        }
    }

    fn steps(nodes: &[f64], values: &[f64]) -> FuncExpr {
        let grid = Grid::new(nodes.to_vec(), ClusterEnd::None).unwrap();
        let mut v = values.to_vec();
        v.push(*values.last().unwrap());
        FuncExpr::sampled(GridFunction::new(grid, v, Interp::PiecewiseConstantLeft).unwrap())
    }

    #[test]
    fn bounded_functions_have_tiny_sigma() {
        let c = cfg();
        let i = make_interval(0.0, 1.0).unwrap();
        let f = FuncExpr::constant(5.0, i).unwrap();
        let s = sigma(&f, i, &c).unwrap();
        assert_eq!(s.lower, 0.0);
        assert!(s.upper <= 1e-3, "upper {}", s.upper);
        assert!(s.evaluations.iter().all(|p| p.mode == "oracle"));

        let r = dist_report(&f, i, &c).unwrap();
        assert!(r.closure_flag);
        assert!(r.norm_bound.is_finite());
    }

    #[test]
    fn neg_log_threshold_sits_at_one() {
        let c = cfg();
        let i = make_interval(0.0, 1.0).unwrap();
        let f = FuncExpr::neg_log(i).unwrap();
        let s = sigma(&f, i, &c).unwrap();
        assert!(s.lower <= 1.0 && 1.0 <= s.upper, "[{}, {}]", s.lower, s.upper);
        assert!(s.upper - s.lower <= 0.011 * s.upper.max(1.0));

        // homogeneity: scaling f scales the threshold
        let g = FuncExpr::scale(FuncExpr::neg_log(i).unwrap(), 2.0).unwrap();
        let s2 = sigma(&g, i, &c).unwrap();
        assert!(s2.lower <= 2.0 * s.upper + 1e-9);
        assert!(2.0 * s.lower <= s2.upper + 1e-9);

        // away from the singularity the restriction is bounded
        let j = make_interval(0.25, 1.0).unwrap();
        let s3 = sigma(&f, j, &c).unwrap();
        assert!(s3.upper <= 1e-3);
    }

    #[test]
    fn log_neg_log_lies_in_the_closure() {
        let c = cfg();
        let i = make_interval(0.0, 1.0 / E).unwrap();
        let f = FuncExpr::log_neg_log(i).unwrap();
        let r = dist_report(&f, i, &c).unwrap();
        assert!(r.sigma_bracket.upper <= CLOSURE_THRESHOLD);
        assert!(r.closure_flag);
        assert!(r.sigma_bracket.evaluations.iter().all(|p| p.mode == "oracle"));
        let ratio = r.norm_bound
            / crate::oscillation::blo_seminorm(&f, i, &c).unwrap().value;
        assert!((1.0 / 64.0..=64.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn off_catalog_sums_go_through_the_grid() {
        let c = cfg();
        let i = make_interval(0.0, 1.0 / E).unwrap();
        let f = FuncExpr::sum(
            FuncExpr::neg_log(i).unwrap(),
            FuncExpr::log_neg_log(i).unwrap(),
        )
        .unwrap();
        let s = sigma(&f, i, &c).unwrap();
        assert!(s.evaluations.iter().all(|p| p.mode == "grid"));
        assert!(s.evaluations.iter().any(|p| p.estimate.is_some()));
        // x^{-1/mu} (-log x)^{1/mu}: the power factor sets the threshold
        assert!(s.upper > 0.5 && s.upper < 4.0, "upper {}", s.upper);

        // norm-attaining form: feasible at the bracket's upper endpoint
        let w = FuncExpr::exp_scale(f, s.upper).unwrap();
        let (member, _) = a1_membership(&w, i, c.a1_cap, &c).unwrap();
        assert!(member);
    }

    #[test]
    fn divergent_powers_exhaust_the_doubling_budget() {
        let c = cfg();
        let i = make_interval(0.0, 1.0 / E).unwrap();
        let f = FuncExpr::neg_log_pow(2, i).unwrap();
        match sigma(&f, i, &c) {
            Err(OscError::NoMembership { largest_mu }) => assert!(largest_mu > 0.0),
            other => panic!("expected NoMembership, got {other:?}"),
        }
    }

    #[test]
    fn critical_exponent_closed_forms() {
        let i = make_interval(0.0, 1.0).unwrap();

        // constant cases
        let one = FuncExpr::constant(1.0, i).unwrap();
        let r = exp_critical_exponent(&one, i, E).unwrap();
        assert!(!r.all_feasible);
        assert!((r.mu_star - 1.0).abs() < 1e-12, "mu* {}", r.mu_star);

        let zero = FuncExpr::constant(0.0, i).unwrap();
        assert!(exp_critical_exponent(&zero, i, 2.0).unwrap().all_feasible);
        let neg = FuncExpr::constant(-3.0, i).unwrap();
        assert!(exp_critical_exponent(&neg, i, 2.0).unwrap().all_feasible);

        // left-half indicator against C = 2: (e^lambda + 1)/2 = 2 at
        // lambda = log 3
        let h = steps(&[0.0, 0.5, 1.0], &[1.0, 0.0]);
        let r = exp_critical_exponent(&h, i, 2.0).unwrap();
        let expected = 1.0 / 3.0f64.ln();
        assert!((r.mu_star - expected).abs() < 1e-6, "mu* {}", r.mu_star);

        // attainment: feasible at mu*, infeasible just below
        let at = FuncExpr::exp_scale(h.clone(), r.mu_star).unwrap();
        assert!(at.average(&i).unwrap() <= 2.0 + 1e-9);
        let below = FuncExpr::exp_scale(h, r.mu_star * (1.0 - 1e-4)).unwrap();
        assert!(below.average(&i).unwrap() > 2.0);

        let c_err = FuncExpr::constant(1.0, i).unwrap();
        assert!(exp_critical_exponent(&c_err, i, 1.0).is_err());
    }
}
