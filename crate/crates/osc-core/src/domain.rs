//! Intervals, node grids, and the shared numeric configuration.

use crate::error::{OscError, Result};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// A nondegenerate finite interval [lo, hi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// True when `other` sits inside self (endpoints allowed to touch).
    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

// Reports serialize the witness interval as a bare [lo, hi] pair.
impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(2))?;
        seq.serialize_element(&self.lo)?;
        seq.serialize_element(&self.hi)?;
        seq.end()
    }
}

pub fn make_interval(lo: f64, hi: f64) -> Result<Interval> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(OscError::InvalidInterval { lo, hi });
    }
    Ok(Interval { lo, hi })
}

/// Which endpoint the grid nodes accumulate toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterEnd {
    Left,
    Right,
    None,
}

/// Strictly increasing node set.
///
/// The first node may sit above the ambient interval's left endpoint: grids
/// over intervals touching a logarithmic singularity start at the cutoff
/// e^{-t_max} instead of at the singular point itself.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub cluster_end: ClusterEnd,
}

impl Grid {
    pub fn new(nodes: Vec<f64>, cluster_end: ClusterEnd) -> Result<Grid> {
        if nodes.len() < 2 {
            return Err(OscError::InvalidArgument(format!(
                "grid needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        for w in nodes.windows(2) {
            if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(OscError::InvalidArgument(format!(
                    "grid nodes must be finite and strictly increasing near {} .. {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Grid { nodes, cluster_end })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn span(&self) -> Interval {
        Interval {
            lo: self.first(),
            hi: self.last(),
        }
    }

    /// Insert the midpoint of every cell, taken in the clustering coordinate:
    /// geometric mean where nodes cluster toward a singularity at 0,
    /// arithmetic mean otherwise. Output has 2m - 1 nodes and contains every
    /// input node.
    pub fn refine(&self) -> Grid {
        let n0 = self.first();
        let nl = self.last();
        let mid = |a: f64, b: f64| -> f64 {
            match self.cluster_end {
                ClusterEnd::Left if a > 0.0 && b > 0.0 => (a * b).sqrt(),
                ClusterEnd::Right => {
                    // mirror the geometric rule around the span
                    let (ra, rb) = (n0 + nl - b, n0 + nl - a);
                    if ra > 0.0 && rb > 0.0 {
                        n0 + nl - (ra * rb).sqrt()
                    } else {
                        0.5 * (a + b)
                    }
                }
                _ => 0.5 * (a + b),
            }
        };
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for i in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            nodes.push(a);
            let m = mid(a, b);
            // guard against degenerate midpoints in very tight cells
            if m > a && m < b {
                nodes.push(m);
            } else {
                nodes.push(0.5 * (a + b));
            }
        }
        nodes.push(nl);
        nodes.dedup();
        Grid {
            nodes,
            cluster_end: self.cluster_end,
        }
    }
}

/// Uniform grid with m nodes spanning the interval.
pub fn uniform_grid(i: &Interval, m: usize) -> Result<Grid> {
    if m < 2 {
        return Err(OscError::InvalidArgument(format!(
            "uniform_grid: m = {m} too small"
        )));
    }
    let mut nodes = Vec::with_capacity(m);
    for k in 0..m {
        let t = k as f64 / (m - 1) as f64;
        nodes.push(i.lo + t * (i.hi - i.lo));
    }
    nodes[0] = i.lo;
    *nodes.last_mut().unwrap() = i.hi;
    Grid::new(nodes, ClusterEnd::None)
}

/// Grid clustered toward a logarithmic singularity at x = 0.
///
/// With `cluster = Left`, nodes sit at e^{-t} for t equally spaced between
/// the cutoff `t_max` (used when lo = 0; otherwise -log lo) and -log hi,
/// so spacing is uniform in the t = -log x coordinate. `Right` mirrors the
/// construction around the span; `None` falls back to a uniform grid.
pub fn log_grid(i: &Interval, m: usize, cluster: ClusterEnd, t_max: f64) -> Result<Grid> {
    if m < 2 {
        return Err(OscError::InvalidArgument(format!(
            "log_grid: m = {m} too small"
        )));
    }
    match cluster {
        ClusterEnd::None => uniform_grid(i, m),
        ClusterEnd::Left => {
            let nodes = log_nodes_left(i, m, t_max)?;
            Grid::new(nodes, ClusterEnd::Left)
        }
        ClusterEnd::Right => {
            // Reflect: build the left-clustered grid on the mirrored interval,
            // then map x -> lo + hi - x.
            let nodes = log_nodes_left(i, m, t_max)?;
            let mut out: Vec<f64> = nodes.iter().rev().map(|&x| i.lo + i.hi - x).collect();
            out[0] = i.lo.max(out[0]);
            Grid::new(out, ClusterEnd::Right)
        }
    }
}

fn log_nodes_left(i: &Interval, m: usize, t_max: f64) -> Result<Vec<f64>> {
    if i.hi <= 0.0 {
        return Err(OscError::InvalidArgument(
            "log_grid needs hi > 0 for left clustering".into(),
        ));
    }
    let t_hi = -i.hi.ln();
    let t_lo = if i.lo > 0.0 { -i.lo.ln() } else { t_max };
    if !(t_lo > t_hi) {
        return Err(OscError::InvalidArgument(format!(
            "log_grid: cutoff t_max = {t_max} does not exceed -log(hi) = {t_hi}"
        )));
    }
    if t_lo > 700.0 {
        return Err(OscError::InvalidArgument(format!(
            "log_grid: t = {t_lo} underflows e^{{-t}}"
        )));
    }
    let mut nodes = Vec::with_capacity(m);
    for k in 0..m {
        let t = t_lo + (t_hi - t_lo) * k as f64 / (m - 1) as f64;
        nodes.push((-t).exp());
    }
    if i.lo > 0.0 {
        nodes[0] = i.lo;
    }
    *nodes.last_mut().unwrap() = i.hi;
    Ok(nodes)
}

/// Shared numeric knobs. `jn_c1` and `jn_c2` are the John-Nirenberg
/// constants used by the empirical decay checker and the sigma bracketing
/// recipe; they are configuration, not asserted ground truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericConfig {
    pub grid_size: usize,
    pub quad_rel_tol: f64,
    pub refine_levels: usize,
    pub stability_ratio: f64,
    pub a1_cap: f64,
    pub jn_c1: f64,
    pub jn_c2: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            grid_size: 512,
            quad_rel_tol: 1e-9,
            refine_levels: 3,
            stability_ratio: 0.02,
            a1_cap: 1e6,
            jn_c1: std::f64::consts::E,
            jn_c2: 1.0 / (2.0 * std::f64::consts::E),
        }
    }
}

impl NumericConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 16 {
            return Err(OscError::InvalidArgument(format!(
                "grid_size = {} below minimum 16",
                self.grid_size
            )));
        }
        if self.refine_levels == 0 {
            return Err(OscError::InvalidArgument("refine_levels must be >= 1".into()));
        }
        let positives = [
            ("quad_rel_tol", self.quad_rel_tol),
            ("stability_ratio", self.stability_ratio),
            ("a1_cap", self.a1_cap),
            ("jn_c1", self.jn_c1),
            ("jn_c2", self.jn_c2),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(OscError::InvalidArgument(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        if self.stability_ratio >= 1.0 {
            return Err(OscError::InvalidArgument(format!(
                "stability_ratio = {} must be below 1",
                self.stability_ratio
            )));
        }
        Ok(())
    }
}

/// Parse a plain-text `key = value` config. Every key is optional and
/// defaults to [`NumericConfig::default`]; `#` starts a comment; later
/// occurrences of a key override earlier ones.
pub fn parse_config(text: &str) -> Result<NumericConfig> {
    let mut cfg = NumericConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(OscError::ConfigParse {
            line: line_no,
            detail: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|e| OscError::ConfigParse {
                line: line_no,
                detail: format!("bad number {v:?}: {e}"),
            })
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse::<usize>().map_err(|e| OscError::ConfigParse {
                line: line_no,
                detail: format!("bad integer {v:?}: {e}"),
            })
        };
        match key {
            "grid_size" => cfg.grid_size = parse_usize(value)?,
            "quad_rel_tol" => cfg.quad_rel_tol = parse_f64(value)?,
            "refine_levels" => cfg.refine_levels = parse_usize(value)?,
            "stability_ratio" => cfg.stability_ratio = parse_f64(value)?,
            "a1_cap" => cfg.a1_cap = parse_f64(value)?,
            "jn_c1" => cfg.jn_c1 = parse_f64(value)?,
            "jn_c2" => cfg.jn_c2 = parse_f64(value)?,
            other => {
                return Err(OscError::ConfigParse {
                    line: line_no,
                    detail: format!(
                        "unknown key {other:?} (valid: grid_size, quad_rel_tol, refine_levels, \
                         stability_ratio, a1_cap, jn_c1, jn_c2)"
                    ),
                })
            }
        }
    }
    cfg.validate().map_err(|e| OscError::ConfigParse {
        line: 0,
        detail: e.to_string(),
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_construction() {
        let i = make_interval(0.0, 0.5).unwrap();
        assert_eq!(i.lo, 0.0);
        assert_eq!(i.hi, 0.5);
        assert!(make_interval(1.0, 1.0).is_err());
        assert!(make_interval(2.0, 1.0).is_err());
        assert!(make_interval(f64::NAN, 1.0).is_err());
        assert!(make_interval(f64::NEG_INFINITY, 1.0).is_err());
    }

    #[test]
    fn log_grid_left_nodes_are_exponentials() {
        let i = make_interval(0.0, (-1.0f64).exp()).unwrap();
        let g = log_grid(&i, 4, ClusterEnd::Left, 4.0).unwrap();
        let want = [(-4.0f64).exp(), (-3.0f64).exp(), (-2.0f64).exp(), (-1.0f64).exp()];
        for (a, b) in g.nodes.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn log_grid_uniform_fallback() {
        let i = make_interval(0.0, 1.0).unwrap();
        let g = log_grid(&i, 3, ClusterEnd::None, 40.0).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn log_grid_deep_domain_does_not_underflow() {
        // Domains like (0, e^{-e^2}) need the cutoff pushed past -log hi.
        let hi = (-(2.0f64.exp())).exp();
        let i = make_interval(0.0, hi).unwrap();
        let g = log_grid(&i, 16, ClusterEnd::Left, 2.0f64.exp() + 20.0).unwrap();
        assert!(g.first() > 0.0);
        assert_eq!(g.last(), hi);
    }

    #[test]
    fn refine_keeps_nodes_and_uses_clustering_coordinate() {
        let g = Grid::new(vec![(-4.0f64).exp(), (-2.0f64).exp()], ClusterEnd::Left).unwrap();
        let r = g.refine();
        assert_eq!(r.len(), 3);
        assert!((r.nodes[1] - (-3.0f64).exp()).abs() < 1e-16);

        let u = Grid::new(vec![0.0, 1.0], ClusterEnd::None).unwrap();
        assert_eq!(u.refine().nodes, vec![0.0, 0.5, 1.0]);

        let w = uniform_grid(&make_interval(0.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(w.refine().len(), 5);
        for x in &w.nodes {
            assert!(w.refine().nodes.contains(x));
        }
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, NumericConfig::default());

        let cfg = parse_config(
            "# comment\n\
             grid_size = 64\n\
             a1_cap = 1e7   # inline comment\n\
             stability_ratio=0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.grid_size, 64);
        assert_eq!(cfg.a1_cap, 1e7);
        assert_eq!(cfg.stability_ratio, 0.05);
        assert_eq!(cfg.refine_levels, 3);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(parse_config("grid_size = 8").is_err()); // below minimum
        assert!(parse_config("no_such_key = 1").is_err());
        assert!(parse_config("grid_size").is_err());
        assert!(parse_config("quad_rel_tol = banana").is_err());
        assert!(parse_config("stability_ratio = 1.5").is_err());
        assert!(parse_config("a1_cap = -3").is_err());
    }
}
