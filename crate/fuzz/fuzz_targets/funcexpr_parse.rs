#![no_main]
//! Arbitrary bytes into the expression parser. Parsing must never panic,
//! and any accepted input must print to a canonical form that reparses to
//! the structurally identical tree.

use libfuzzer_sys::fuzz_target;
use osc_core::functions::{FuncExpr, FuncNode};
use osc_core::make_interval;
use osc_core::parse::{
    exprs_structurally_equal, parse_func_expr, to_expr_string, MAX_EXPR_DEPTH, MAX_EXPR_LEN,
};

/// Nesting depth of the tree, which equals the nesting depth of its
/// canonical text form.
fn depth(f: &FuncExpr) -> usize {
    match &f.node {
        FuncNode::Truncate(g, _)
        | FuncNode::Scale(g, _)
        | FuncNode::Negate(g)
        | FuncNode::ExpScale(g, _) => 1 + depth(g),
        FuncNode::Sum(a, b) => 1 + depth(a).max(depth(b)),
        _ => 1,
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Whole catalog is constructible on (0, 1/e).
    let domain = make_interval(0.0, (-1.0f64).exp()).unwrap();
    let Ok(expr) = parse_func_expr(text, domain) else { return };

    let printed = to_expr_string(&expr);
    // Constructors normalize (a negative scale gains a neg wrapper) and
    // constants print at full precision, so the canonical form can outgrow
    // the parser's hard caps. Within them it must reparse exactly.
    if printed.len() > MAX_EXPR_LEN || depth(&expr) > MAX_EXPR_DEPTH {
        return;
    }
    let reparsed = parse_func_expr(&printed, domain)
        .unwrap_or_else(|e| panic!("canonical form {printed:?} failed to reparse: {e}"));
    assert!(
        exprs_structurally_equal(&expr, &reparsed),
        "round trip changed the tree: {printed:?}"
    );
    assert_eq!(
        printed,
        to_expr_string(&reparsed),
        "canonical form must be a fixed point"
    );
});
