//! Property-based invariants: the grid engine against the rational step
//! oracle, structural theorems for monotone inputs, and the empirical
//! stand-ins for constants the theory leaves abstract (exponential level-set
//! decay, the decomposition norm-bound window).

mod common;

use proptest::prelude::*;

use osc_core::approx::truncation_sweep;
use osc_core::decompose::blo_upper_decomposition;
use osc_core::exact::{step_a1_sup, step_lower_oscillation_sup, step_mean_oscillation_sup};
use osc_core::maximal::{maximal_on_grid, maximal_reference};
use osc_core::oscillation::{
    blo_seminorm, bmo_seminorm, jn_decay_fit, vanishing_profile, OscKind,
};
use osc_core::search::{left_anchored_sup, sup_search, SearchKind};
use osc_core::weights::a1_constant;
use osc_core::{
    make_interval, ClusterEnd, FuncExpr, Grid, GridFunction, Interp, Interval, JumpSpec,
    NumericConfig,
};

use common::{as_expr, light_cfg};

fn unit() -> Interval {
    make_interval(0.0, 1.0).unwrap()
}

fn unit_e() -> Interval {
    make_interval(0.0, (-1.0f64).exp()).unwrap()
}

/// Step functions with dyadic breakpoints k/1024 and values j/32, so prefix
/// sums are exact in both f64 and rational arithmetic.
fn dyadic_step(signed: bool) -> impl Strategy<Value = GridFunction> {
    let low = if signed { -64i32 } else { 1i32 };
    prop::collection::btree_set(1u32..1024, 1..=9)
        .prop_flat_map(move |cuts| {
            let cells = cuts.len() + 1;
            (Just(cuts), prop::collection::vec(low..=64i32, cells))
        })
        .prop_map(|(cuts, raw)| {
            let mut nodes = vec![0.0];
            nodes.extend(cuts.iter().map(|&k| k as f64 / 1024.0));
            nodes.push(1.0);
            let mut values: Vec<f64> = raw.iter().map(|&j| j as f64 / 32.0).collect();
            values.push(*values.last().unwrap());
            let grid = Grid::new(nodes, ClusterEnd::None).unwrap();
            GridFunction::new(grid, values, Interp::PiecewiseConstantLeft).unwrap()
        })
}

/// Nonincreasing positive steps on a coarser cut lattice, wide enough that
/// every piece holds several search-grid nodes.
fn coarse_decreasing_step() -> impl Strategy<Value = GridFunction> {
    prop::collection::btree_set(1u32..64, 1..=6)
        .prop_flat_map(|cuts| {
            let cells = cuts.len() + 1;
            (Just(cuts), prop::collection::vec(1i32..=64, cells))
        })
        .prop_map(|(cuts, mut raw)| {
            raw.sort_unstable_by(|a, b| b.cmp(a));
            let mut nodes = vec![0.0];
            nodes.extend(cuts.iter().map(|&k| k as f64 / 64.0));
            nodes.push(1.0);
            let mut values: Vec<f64> = raw.iter().map(|&j| j as f64 / 32.0).collect();
            values.push(*values.last().unwrap());
            let grid = Grid::new(nodes, ClusterEnd::None).unwrap();
            GridFunction::new(grid, values, Interp::PiecewiseConstantLeft).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    /// Dual-route check: the f64 engine and the exact rational reference
    /// implement the same suprema independently.
    #[test]
    fn seminorms_agree_with_the_rational_oracle(g in dyadic_step(true)) {
        let cfg = light_cfg();
        let i0 = unit();
        let f = as_expr(&g);
        let bmo = bmo_seminorm(&f, i0, &cfg).unwrap().value;
        let blo = blo_seminorm(&f, i0, &cfg).unwrap().value;
        let bmo_oracle = step_mean_oscillation_sup(&g).unwrap();
        let blo_oracle = step_lower_oscillation_sup(&g).unwrap();
        prop_assert!(
            (bmo - bmo_oracle).abs() <= 1e-9 * (1.0 + bmo_oracle.abs()),
            "mean oscillation {bmo} vs oracle {bmo_oracle}"
        );
        prop_assert!(
            (blo - blo_oracle).abs() <= 1e-9 * (1.0 + blo_oracle.abs()),
            "lower oscillation {blo} vs oracle {blo_oracle}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn a1_estimates_agree_with_the_rational_oracle(g in dyadic_step(false)) {
        let cfg = light_cfg();
        let f = as_expr(&g);
        let a1 = a1_constant(&f, unit(), &cfg).unwrap().constant;
        let oracle = step_a1_sup(&g).unwrap();
        prop_assert!(
            (a1 - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()),
            "A1 estimate {a1} vs oracle {oracle}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// For nonincreasing inputs, widening an interval to the left raises the
    /// average without touching the right-end infimum, so the unrestricted
    /// supremum is attained on left-anchored intervals. The two sides go
    /// through different engine paths (closed-form enumeration vs anchored
    /// grid scan).
    #[test]
    fn monotone_suprema_live_at_the_left_end(g in coarse_decreasing_step()) {
        let cfg = NumericConfig {
            grid_size: 256,
            refine_levels: 2,
            ..NumericConfig::default()
        };
        let i0 = unit();
        let f = as_expr(&g);
        for kind in [SearchKind::LowerOsc, SearchKind::A1Ratio] {
            let full = sup_search(&f, i0, kind, &cfg).unwrap().value;
            let anchored = left_anchored_sup(&f, i0, kind, &cfg).unwrap().value;
            prop_assert!(
                (full - anchored).abs() <= 1e-7 * (1.0 + full.abs()),
                "{kind:?}: full supremum {full} vs left-anchored {anchored}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn maximal_fast_scan_agrees_with_the_literal_reference(g in dyadic_step(true)) {
        let cfg = light_cfg();
        let i0 = unit();
        let w = as_expr(&g);
        let mut nodes: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        for &b in &g.grid.nodes {
            if !nodes.contains(&b) {
                nodes.push(b);
            }
        }
        nodes.sort_by(f64::total_cmp);
        let grid = Grid::new(nodes, ClusterEnd::None).unwrap();
        let fast = maximal_on_grid(&w, &grid, i0, &cfg).unwrap();
        let slow = maximal_reference(&w, &grid, i0, &cfg).unwrap();
        for (i, (a, b)) in fast.values.iter().zip(&slow).enumerate() {
            prop_assert!(
                (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                "node {i}: fast {a} vs reference {b}"
            );
        }
    }
}

/// Level-set measures of the unbounded catalog members decay exponentially:
/// the least-squares fit of ln d(lambda) is a line with negative slope and
/// tight fit. This is the observable stand-in for the sharp distribution
/// constants, which no finite experiment can pin down.
#[test]
fn level_set_decay_is_exponential_on_catalog_members() {
    let ie = unit_e();
    let members: [(&str, FuncExpr, f64); 4] = [
        ("neg-log", FuncExpr::neg_log(ie).unwrap(), 1.0),
        ("log-neg-log", FuncExpr::log_neg_log(ie).unwrap(), 0.3),
        ("neg-log-sq", FuncExpr::neg_log_pow(2, ie).unwrap(), 2.0),
        ("neg-log-cube", FuncExpr::neg_log_pow(3, ie).unwrap(), 5.0),
    ];
    for (name, f, scale) in members {
        let lambdas: Vec<f64> = (0..12)
            .map(|j| scale * (0.1 + 1.4 * j as f64 / 11.0))
            .collect();
        let fit = jn_decay_fit(&f, ie, &lambdas).unwrap();
        assert!(fit.slope < 0.0, "{name}: slope {}", fit.slope);
        assert!(
            fit.r_squared >= 0.95,
            "{name}: fit quality {} below 0.95",
            fit.r_squared
        );
    }
}

/// A positive decreasing function with vanishing lower oscillation is
/// approximable by its truncations. Checked on the catalog's decreasing
/// members with vanishing profiles: the profile and the truncation residual
/// both go to zero.
#[test]
fn decreasing_vanishing_members_are_truncation_limits() {
    let cfg = NumericConfig::default();
    let ie = unit_e();
    let f = FuncExpr::log_neg_log(ie).unwrap();

    // length caps e^{-s}: the restricted supremum decays like 1/s
    let ladder: Vec<f64> = [2.0f64, 4.0, 6.0, 8.0].iter().map(|s| (-s).exp()).collect();
    let profile = vanishing_profile(&f, ie, OscKind::Blo, &ladder, &cfg).unwrap();
    for (row, s) in profile.iter().zip([2.0, 4.0, 6.0, 8.0]) {
        assert!(
            row.1 <= 1.2 / s,
            "cap e^-{s}: restricted supremum {} misses the 1/s decay",
            row.1
        );
    }
    for pair in profile.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1 + 1e-9,
            "profile must not grow as the cap shrinks: {profile:?}"
        );
    }
    assert!(
        profile[3].1 <= 0.5 * profile[0].1,
        "profile failed to halve across the ladder: {profile:?}"
    );

    let ks = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let sweep = truncation_sweep(&f, ie, &ks, &cfg).unwrap();
    let last = sweep.rows.last().unwrap().measured;
    assert!(
        last <= 4e-3,
        "truncation residual {last} at level 6 is not vanishing"
    );

    let c = FuncExpr::constant(2.0, ie).unwrap();
    let cprofile = vanishing_profile(&c, ie, OscKind::Blo, &ladder, &cfg).unwrap();
    assert!(cprofile.iter().all(|r| r.1 <= 1e-12));
    let csweep = truncation_sweep(&c, ie, &[3.0], &cfg).unwrap();
    assert!(csweep.rows[0].measured <= 1e-12);
}

/// The decomposition's certified norm bound stays within a fixed ratio
/// window of the seminorm itself across the unbounded members. The window
/// stands in for the abstract equivalence constants between the seminorm
/// and its decomposition norm.
#[test]
fn decomposition_bound_tracks_the_seminorm() {
    let cfg = NumericConfig::default();
    let cases: [(&str, FuncExpr, Interval); 3] = [
        ("neg-log", FuncExpr::neg_log(unit_e()).unwrap(), unit_e()),
        ("log-neg-log", FuncExpr::log_neg_log(unit_e()).unwrap(), unit_e()),
        (
            "staircase",
            FuncExpr::jump_eta(JumpSpec::GeomDouble, unit()).unwrap(),
            unit(),
        ),
    ];
    for (name, f, i0) in cases {
        let blo = blo_seminorm(&f, i0, &cfg).unwrap().value;
        assert!(blo > 1e-6, "{name}: member must have positive seminorm");
        let d = blo_upper_decomposition(&f, i0, &cfg).unwrap();
        let ratio = d.norm_bound / blo;
        assert!(
            (1.0 / 64.0..=64.0).contains(&ratio),
            "{name}: bound/seminorm ratio {ratio} left the window"
        );
    }
}
