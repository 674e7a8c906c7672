//! Deterministic corpora for the integration suites: random step functions
//! and piecewise-linear ramps on (0, 1) with dyadic cut points, so every
//! breakpoint and value is exactly representable.

// Each test target compiles this module separately and uses its own subset.
#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use osc_core::{ClusterEnd, FuncExpr, Grid, GridFunction, Interp, NumericConfig};

pub fn light_cfg() -> NumericConfig {
    NumericConfig {
        grid_size: 64,
        refine_levels: 2,
        ..NumericConfig::default()
    }
}

/// Sorted distinct cut points k/1024 strictly inside (0, 1).
fn dyadic_cuts(rng: &mut ChaCha8Rng, max_cuts: usize) -> Vec<f64> {
    let n = rng.gen_range(1..=max_cuts);
    let mut ks: Vec<u32> = Vec::with_capacity(n);
    while ks.len() < n {
        let k = rng.gen_range(1..1024u32);
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    ks.sort_unstable();
    ks.iter().map(|&k| k as f64 / 1024.0).collect()
}

fn step_on_cuts(rng: &mut ChaCha8Rng, cuts: &[f64], signed: bool) -> GridFunction {
    let mut nodes = vec![0.0];
    nodes.extend_from_slice(cuts);
    nodes.push(1.0);
    let cells = nodes.len() - 1;
    let mut values: Vec<f64> = (0..cells)
        .map(|_| {
            let j: i32 = if signed {
                rng.gen_range(-64..=64)
            } else {
                rng.gen_range(1..=64)
            };
            j as f64 / 32.0
        })
        .collect();
    values.push(*values.last().unwrap());
    let grid = Grid::new(nodes, ClusterEnd::None).unwrap();
    GridFunction::new(grid, values, Interp::PiecewiseConstantLeft).unwrap()
}

/// Random step functions with at most `max_cuts` interior breakpoints.
/// Signed draws model BMO/BLO functions; unsigned draws are weights.
pub fn step_corpus(seed: u64, count: usize, max_cuts: usize, signed: bool) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let cuts = dyadic_cuts(&mut rng, max_cuts);
            step_on_cuts(&mut rng, &cuts, signed)
        })
        .collect()
}

/// Pairs of step functions sharing one cut set, for nodewise arithmetic.
pub fn step_pairs(seed: u64, count: usize, max_cuts: usize) -> Vec<(GridFunction, GridFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let cuts = dyadic_cuts(&mut rng, max_cuts);
            let a = step_on_cuts(&mut rng, &cuts, false);
            let b = step_on_cuts(&mut rng, &cuts, false);
            (a, b)
        })
        .collect()
}

/// Continuous piecewise-linear draws: Lipschitz with dyadic kinks.
pub fn ramp_corpus(seed: u64, count: usize, max_kinks: usize) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let cuts = dyadic_cuts(&mut rng, max_kinks);
            let mut nodes = vec![0.0];
            nodes.extend_from_slice(&cuts);
            nodes.push(1.0);
            let values: Vec<f64> = (0..nodes.len())
                .map(|_| rng.gen_range(-64..=64i32) as f64 / 32.0)
                .collect();
            let grid = Grid::new(nodes, ClusterEnd::None).unwrap();
            GridFunction::new(grid, values, Interp::PiecewiseLinear).unwrap()
        })
        .collect()
}

pub fn as_expr(g: &GridFunction) -> FuncExpr {
    FuncExpr::sampled(g.clone())
}
