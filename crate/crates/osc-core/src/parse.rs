//! Compact text form for function expressions.
//!
//! Grammar, case-insensitive and whitespace tolerant:
//!
//! ```text
//! expr  := "neglog" | "logneglog" | "neglogpow(" INT ")"
//!        | "jumpeta" | "jumpeta(" NUM { "," NUM } ")"
//!        | "const:" NUM | "const(" NUM ")"
//!        | "trunc(" expr "," NUM ")" | "sum(" expr "," expr ")"
//!        | "scale(" expr "," NUM ")" | "neg(" expr ")"
//!        | "expscale(" expr "," NUM ")"
//! ```
//!
//! All leaves are constructed on the domain passed to [`parse_func_expr`];
//! sums therefore always see matching domains. Sampled data has no text
//! form. Input is hard-capped in length and nesting depth so malformed or
//! adversarial strings fail fast instead of recursing away.

use crate::domain::Interval;
use crate::error::{OscError, Result};
use crate::functions::{FuncExpr, FuncNode, JumpSpec};

use std::fmt;

pub const MAX_EXPR_LEN: usize = 4096;
pub const MAX_EXPR_DEPTH: usize = 40;

const CATALOG: &str = "neglog, logneglog, neglogpow(r), jumpeta, jumpeta(b1, b2, ...), \
const:c, trunc(f, k), sum(f, g), scale(f, c), neg(f), expscale(f, mu)";

pub fn parse_func_expr(text: &str, domain: Interval) -> Result<FuncExpr> {
    if text.len() > MAX_EXPR_LEN {
        return Err(OscError::ExprParse(format!(
            "expression longer than {MAX_EXPR_LEN} bytes"
        )));
    }
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        domain,
    };
    let expr = p.expr(MAX_EXPR_DEPTH)?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input after expression"));
    }
    Ok(expr)
}

/// Canonical text form; parsing it back reproduces the same tree. Sampled
/// nodes have no text form and render as a placeholder.
pub fn to_expr_string(f: &FuncExpr) -> String {
    match &f.node {
        FuncNode::Const(c) => format!("const:{c}"),
        FuncNode::NegLog => "neglog".into(),
        FuncNode::LogNegLog => "logneglog".into(),
        FuncNode::NegLogPow(r) => format!("neglogpow({r})"),
        FuncNode::JumpEta(JumpSpec::GeomDouble) => "jumpeta".into(),
        FuncNode::JumpEta(JumpSpec::Explicit(b)) => {
            let parts: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            format!("jumpeta({})", parts.join(", "))
        }
        FuncNode::Truncate(g, k) => format!("trunc({}, {k})", to_expr_string(g)),
        FuncNode::Sum(a, b) => format!("sum({}, {})", to_expr_string(a), to_expr_string(b)),
        FuncNode::Scale(g, c) => format!("scale({}, {c})", to_expr_string(g)),
        FuncNode::Negate(g) => format!("neg({})", to_expr_string(g)),
        FuncNode::ExpScale(g, mu) => format!("expscale({}, {mu})", to_expr_string(g)),
        FuncNode::Sampled(g) => format!("sampled({} nodes)", g.grid.len()),
    }
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_expr_string(self))
    }
}

/// Structural equality of expression trees, used by round-trip tests and
/// the parser fuzz target. Numbers must match bitwise.
pub fn exprs_structurally_equal(a: &FuncExpr, b: &FuncExpr) -> bool {
    match (&a.node, &b.node) {
        (FuncNode::Const(x), FuncNode::Const(y)) => x.to_bits() == y.to_bits(),
        (FuncNode::NegLog, FuncNode::NegLog) => true,
        (FuncNode::LogNegLog, FuncNode::LogNegLog) => true,
        (FuncNode::NegLogPow(r), FuncNode::NegLogPow(s)) => r == s,
        (FuncNode::JumpEta(JumpSpec::GeomDouble), FuncNode::JumpEta(JumpSpec::GeomDouble)) => true,
        (FuncNode::JumpEta(JumpSpec::Explicit(x)), FuncNode::JumpEta(JumpSpec::Explicit(y))) => {
            x.len() == y.len()
                && x.iter()
                    .zip(y.iter())
                    .all(|(p, q)| p.to_bits() == q.to_bits())
        }
        (FuncNode::Truncate(f, k), FuncNode::Truncate(g, l)) => {
            k.to_bits() == l.to_bits() && exprs_structurally_equal(f, g)
        }
        (FuncNode::Sum(f1, f2), FuncNode::Sum(g1, g2)) => {
            exprs_structurally_equal(f1, g1) && exprs_structurally_equal(f2, g2)
        }
        (FuncNode::Scale(f, c), FuncNode::Scale(g, d)) => {
            c.to_bits() == d.to_bits() && exprs_structurally_equal(f, g)
        }
        (FuncNode::Negate(f), FuncNode::Negate(g)) => exprs_structurally_equal(f, g),
        (FuncNode::ExpScale(f, c), FuncNode::ExpScale(g, d)) => {
            c.to_bits() == d.to_bits() && exprs_structurally_equal(f, g)
        }
        _ => false,
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    domain: Interval,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> OscError {
        OscError::ExprParse(format!("{msg} (at byte {})", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a function name"));
        }
        Ok(std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .to_ascii_lowercase())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'+' | b'-' | b'.' | b'e' | b'E'))
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a number"));
        }
        let tok = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        tok.parse::<f64>()
            .map_err(|_| self.err(&format!("'{tok}' is not a number")))
    }

    fn integer(&mut self) -> Result<u32> {
        let pos = self.pos;
        let n = self.number()?;
        if !n.is_finite() || n.fract() != 0.0 || n < 0.0 || n > u32::MAX as f64 {
            self.pos = pos;
            return Err(self.err("expected a small nonnegative integer"));
        }
        Ok(n as u32)
    }

    fn expr(&mut self, depth: usize) -> Result<FuncExpr> {
        if depth == 0 {
            return Err(self.err(&format!("nesting deeper than {MAX_EXPR_DEPTH}")));
        }
        let name = self.ident()?;
        match name.as_str() {
            "neglog" => FuncExpr::neg_log(self.domain),
            "logneglog" => FuncExpr::log_neg_log(self.domain),
            "neglogpow" => {
                self.expect(b'(')?;
                let r = self.integer()?;
                self.expect(b')')?;
                FuncExpr::neg_log_pow(r, self.domain)
            }
            "jumpeta" => {
                self.skip_ws();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let mut bs = vec![self.number()?];
                    loop {
                        self.skip_ws();
                        match self.peek() {
                            Some(b',') => {
                                self.pos += 1;
                                bs.push(self.number()?);
                            }
                            Some(b')') => {
                                self.pos += 1;
                                break;
                            }
                            _ => return Err(self.err("expected ',' or ')'")),
                        }
                    }
                    FuncExpr::jump_eta(JumpSpec::Explicit(bs), self.domain)
                } else {
                    FuncExpr::jump_eta(JumpSpec::GeomDouble, self.domain)
                }
            }
            "const" => {
                self.skip_ws();
                match self.peek() {
                    Some(b':') => {
                        self.pos += 1;
                        let c = self.number()?;
                        FuncExpr::constant(c, self.domain)
                    }
                    Some(b'(') => {
                        self.pos += 1;
                        let c = self.number()?;
                        self.expect(b')')?;
                        FuncExpr::constant(c, self.domain)
                    }
                    _ => Err(self.err("const needs ':' or '(' and a value")),
                }
            }
            "trunc" => {
                self.expect(b'(')?;
                let inner = self.expr(depth - 1)?;
                self.expect(b',')?;
                let k = self.number()?;
                self.expect(b')')?;
                FuncExpr::truncate(inner, k)
            }
            "sum" => {
                self.expect(b'(')?;
                let a = self.expr(depth - 1)?;
                self.expect(b',')?;
                let b = self.expr(depth - 1)?;
                self.expect(b')')?;
                FuncExpr::sum(a, b)
            }
            "scale" => {
                self.expect(b'(')?;
                let inner = self.expr(depth - 1)?;
                self.expect(b',')?;
                let c = self.number()?;
                self.expect(b')')?;
                FuncExpr::scale(inner, c)
            }
            "neg" => {
                self.expect(b'(')?;
                let inner = self.expr(depth - 1)?;
                self.expect(b')')?;
                Ok(FuncExpr::negate(inner))
            }
            "expscale" => {
                self.expect(b'(')?;
                let inner = self.expr(depth - 1)?;
                self.expect(b',')?;
                let mu = self.number()?;
                self.expect(b')')?;
                FuncExpr::exp_scale(inner, mu)
            }
            other => Err(OscError::ExprParse(format!(
                "unknown function '{other}'; available: {CATALOG}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_interval;
    use crate::functions::MonotoneTag;

    fn dom() -> Interval {
        make_interval(0.0, 0.5).unwrap()
    }

    #[test]
    fn parses_catalog_leaves() {
        let f = parse_func_expr("neglog", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::NegLog));
        assert_eq!(f.domain, dom());

        let f = parse_func_expr("neglogpow(3)", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::NegLogPow(3)));

        let f = parse_func_expr("jumpeta", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::JumpEta(JumpSpec::GeomDouble)));

        let f = parse_func_expr("const:3", dom()).unwrap();
        assert_eq!(f.as_const(), Some(3.0));
        let g = parse_func_expr("const(-2.5)", dom()).unwrap();
        assert_eq!(g.as_const(), Some(-2.5));
    }

    #[test]
    fn parses_nested_forms() {
        let f = parse_func_expr("trunc(logneglog, 2)", dom()).unwrap();
        match &f.node {
            FuncNode::Truncate(inner, k) => {
                assert!(matches!(inner.node, FuncNode::LogNegLog));
                assert_eq!(*k, 2.0);
            }
            _ => panic!("wrong shape"),
        }

        let f = parse_func_expr("scale(neglogpow(3), 0.5)", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::Scale(_, c) if c == 0.5));

        let f = parse_func_expr(" sum( neglog , const:1 ) ", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::Sum(..)));
        assert_eq!(f.monotone_tag, MonotoneTag::Decreasing);

        // negative scale routes through the explicit sign flip
        let f = parse_func_expr("scale(neglog, -2)", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::Negate(_)));

        let f = parse_func_expr("expscale(neglog, 1e-3)", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::ExpScale(_, mu) if mu == 1e-3));

        let f = parse_func_expr("jumpeta(0.1, 0.01, 0.001)", dom()).unwrap();
        assert!(matches!(f.node, FuncNode::JumpEta(JumpSpec::Explicit(ref b)) if b.len() == 3));
    }

    #[test]
    fn canonical_form_round_trips() {
        let cases = [
            "neglog",
            "logneglog",
            "neglogpow(7)",
            "jumpeta",
            "jumpeta(0.25, 0.125, 0.01171875)",
            "const:3",
            "const:-1.25e-4",
            "trunc(logneglog, 2)",
            "scale(neglogpow(3), 0.5)",
            "sum(neglog, const:-2)",
            "neg(trunc(neglog, 1.5))",
            "expscale(sum(jumpeta, const:0.125), 3)",
        ];
        for text in cases {
            let a = parse_func_expr(text, dom()).unwrap();
            let printed = to_expr_string(&a);
            let b = parse_func_expr(&printed, dom()).unwrap();
            assert!(
                exprs_structurally_equal(&a, &b),
                "{text} -> {printed} did not round trip"
            );
            // canonical form is a fixed point
            assert_eq!(printed, to_expr_string(&b));
        }
    }

    #[test]
    fn enforces_limits() {
        let deep_ok = format!("{}neglog{}", "neg(".repeat(30), ")".repeat(30));
        assert!(parse_func_expr(&deep_ok, dom()).is_ok());
        let deep_bad = format!("{}neglog{}", "neg(".repeat(45), ")".repeat(45));
        assert!(parse_func_expr(&deep_bad, dom()).is_err());

        let long = "neg(".repeat(2000) + "neglog" + &")".repeat(2000);
        assert!(matches!(
            parse_func_expr(&long, dom()),
            Err(OscError::ExprParse(_))
        ));
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "frobnicate",
            "neglog extra",
            "trunc(neglog)",
            "trunc(neglog, )",
            "sum(neglog)",
            "neglogpow(3.7)",
            "neglogpow(-1)",
            "neglogpow(1e400)",
            "const:",
            "const:abc",
            "scale(neglog, --5)",
            "scale(neglog, 1e400)",
            "jumpeta(0.5, 0.7)",
            "jumpeta()",
            "trunc(neglog, -1)",
            "expscale(neglog, 0)",
            "neg(neglog",
            "sum(neglog, neglog))",
        ] {
            assert!(parse_func_expr(bad, dom()).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn unknown_name_lists_catalog() {
        let err = parse_func_expr("mystery", dom()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("neglog") && msg.contains("expscale"), "{msg}");
    }
}
