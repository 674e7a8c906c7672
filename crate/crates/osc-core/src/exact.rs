//! Exact rational reference values for piecewise-constant functions.
//!
//! Everything here runs in `BigRational`, converted bit-exactly from f64
//! input, so the results are true suprema rather than floating-point
//! estimates. Used to pin the search engine in tests and exposed through
//! the oscillation module's brute-force entry point.
//!
//! For a step function the three functionals below are suprema over
//! subintervals J whose objective combines the average over J (a Mobius
//! function of each endpoint) with an essential infimum or an absolute
//! first moment. Sliding an endpoint inside one piece keeps the infimum and
//! the sign pattern fixed, and on such a stretch `avg - v_piece` has constant
//! sign (it solves g' = g/(b-a)), so the average is monotone there. Suprema
//! therefore live at piece boundaries or at one-sided limits where an
//! endpoint approaches a boundary from outside, which lowers the infimum by
//! the neighbor piece's value without moving the average. The mean
//! oscillation additionally has interior stationary points; those are roots
//! of a linear equation per sign pattern and are enumerated exactly.

use crate::error::{OscError, Result};
use crate::functions::{GridFunction, Interp};
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// Hard cap on pieces: every functional here does at least an O(m^2) pair
/// scan in big-rational arithmetic.
pub const MAX_PIECES: usize = 64;

/// Step function with exact rational boundaries and values: piece p lives
/// on (x[p], x[p+1]) with value v[p].
#[derive(Clone, Debug)]
pub struct RationalStepFn {
    bounds: Vec<BigRational>,
    values: Vec<BigRational>,
    /// prefix[k] = integral from x[0] to x[k].
    prefix: Vec<BigRational>,
}

fn rat(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| {
        OscError::InvalidArgument(format!("{x} has no exact rational value"))
    })
}

impl RationalStepFn {
    /// Bit-exact conversion: `nodes` are the m+1 piece boundaries, `values`
    /// the m piece values.
    pub fn from_f64(nodes: &[f64], values: &[f64]) -> Result<RationalStepFn> {
        if nodes.len() < 2 || values.len() + 1 != nodes.len() {
            return Err(OscError::InvalidArgument(format!(
                "{} boundaries need {} piece values, got {}",
                nodes.len(),
                nodes.len() - 1,
                values.len()
            )));
        }
        if values.len() > MAX_PIECES {
            return Err(OscError::TooManyBreakpoints {
                got: values.len() - 1,
                limit: MAX_PIECES - 1,
            });
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(OscError::InvalidArgument(
                "piece boundaries must be strictly increasing".into(),
            ));
        }
        let bounds = nodes.iter().map(|&x| rat(x)).collect::<Result<Vec<_>>>()?;
        let values = values.iter().map(|&v| rat(v)).collect::<Result<Vec<_>>>()?;
        let mut prefix = Vec::with_capacity(bounds.len());
        prefix.push(BigRational::zero());
        for p in 0..values.len() {
            let cell = &values[p] * (&bounds[p + 1] - &bounds[p]);
            let acc = &prefix[p] + cell;
            prefix.push(acc);
        }
        Ok(RationalStepFn {
            bounds,
            values,
            prefix,
        })
    }

    /// Piecewise-constant grid data: the last node's value is the point
    /// value at the right end and carries no piece.
    pub fn from_grid_function(g: &GridFunction) -> Result<RationalStepFn> {
        if g.interp != Interp::PiecewiseConstantLeft {
            return Err(OscError::InvalidArgument(
                "rational reference needs piecewise-constant data".into(),
            ));
        }
        Self::from_f64(&g.grid.nodes, &g.values[..g.values.len() - 1])
    }

    pub fn piece_count(&self) -> usize {
        self.values.len()
    }

    fn avg(&self, i: usize, j: usize) -> BigRational {
        (&self.prefix[j] - &self.prefix[i]) / (&self.bounds[j] - &self.bounds[i])
    }

    /// Essential infimum of pieces i..j-1 extended by the one-sided limits
    /// just outside the boundary pair, matching sup over J shrinking onto
    /// (x[i], x[j]) from outside.
    fn extended_min(&self, i: usize, j: usize) -> BigRational {
        let mut lo = i;
        let mut hi = j; // pieces lo..hi-1
        if i >= 1 {
            lo -= 1;
        }
        if j <= self.values.len() - 1 {
            hi += 1;
        }
        let mut m = self.values[lo].clone();
        for p in lo + 1..hi {
            if self.values[p] < m {
                m = self.values[p].clone();
            }
        }
        m
    }

    /// sup over subintervals of (average - essential infimum).
    pub fn lower_oscillation_sup(&self) -> BigRational {
        let m = self.values.len();
        let mut best = BigRational::zero();
        for i in 0..m {
            for j in i + 1..=m {
                let cand = self.avg(i, j) - self.extended_min(i, j);
                if cand > best {
                    best = cand;
                }
            }
        }
        best
    }

    /// sup over subintervals of (average / essential infimum), for strictly
    /// positive step weights.
    pub fn a1_sup(&self) -> Result<BigRational> {
        if self.values.iter().any(|v| !v.is_positive()) {
            return Err(OscError::InvalidArgument(
                "A1 reference needs a strictly positive weight".into(),
            ));
        }
        let m = self.values.len();
        let mut best = BigRational::one();
        for i in 0..m {
            for j in i + 1..=m {
                let cand = self.avg(i, j) / self.extended_min(i, j);
                if cand > best {
                    best = cand;
                }
            }
        }
        Ok(best)
    }

    /// Mean oscillation of the interval (x[i], x[q] + l), the right endpoint
    /// sitting l into piece q.
    fn mean_osc_partial(&self, i: usize, q: usize, l: &BigRational) -> BigRational {
        let len = (&self.bounds[q] - &self.bounds[i]) + l;
        let mass = (&self.prefix[q] - &self.prefix[i]) + &self.values[q] * l;
        let mean = &mass / &len;
        let mut osc = (&self.values[q] - &mean).abs() * l;
        for p in i..q {
            osc += (&self.values[p] - &mean).abs() * (&self.bounds[p + 1] - &self.bounds[p]);
        }
        osc / len
    }

    fn mean_osc_pair(&self, i: usize, j: usize) -> BigRational {
        let len = &self.bounds[j] - &self.bounds[i];
        let mean = self.avg(i, j);
        let mut osc = BigRational::zero();
        for p in i..j {
            osc += (&self.values[p] - &mean).abs() * (&self.bounds[p + 1] - &self.bounds[p]);
        }
        osc / len
    }

    /// Candidates for a free right endpoint inside piece q with the left
    /// endpoint anchored at x[i]: sign-pattern changes of f - mean, plus the
    /// stationary point of the oscillation within each pattern stretch.
    /// Every candidate is evaluated exactly, so including a stationary point
    /// outside its own pattern's validity range costs nothing.
    fn anchored_candidates(&self, i: usize, q: usize) -> Vec<BigRational> {
        let b0 = &self.bounds[q] - &self.bounds[i];
        let m0 = &self.prefix[q] - &self.prefix[i];
        let len_q = &self.bounds[q + 1] - &self.bounds[q];
        let vq = &self.values[q];
        let zero = BigRational::zero();

        let mut pattern_edges: Vec<BigRational> = Vec::new();
        for p in i..q {
            let vp = &self.values[p];
            if vp == vq {
                continue;
            }
            // mean(l) = v_p  <=>  l = (v_p b0 - M0)/(v_q - v_p)
            let l = (vp * &b0 - &m0) / (vq - vp);
            if l > zero && l < len_q {
                pattern_edges.push(l);
            }
        }
        pattern_edges.sort();
        pattern_edges.dedup();

        let mut out = pattern_edges.clone();
        let mut stops = Vec::with_capacity(pattern_edges.len() + 2);
        stops.push(zero.clone());
        stops.extend(pattern_edges);
        stops.push(len_q.clone());
        let two = BigRational::from_integer(BigInt::from(2));
        for w in stops.windows(2) {
            if w[0] >= w[1] {
                continue;
            }
            let mid = (&w[0] + &w[1]) / &two;
            let mean_mid = (&m0 + vq * &mid) / (&b0 + &mid);
            // A0, B0: mass and length of the fully covered pieces above the
            // mean for this sign pattern
            let mut a0 = BigRational::zero();
            let mut bb0 = BigRational::zero();
            for p in i..q {
                if self.values[p] > mean_mid {
                    let lp = &self.bounds[p + 1] - &self.bounds[p];
                    a0 += &self.values[p] * &lp;
                    bb0 += lp;
                }
            }
            let mut beta = &a0 - vq * &bb0;
            if *vq > mean_mid {
                beta += vq * &b0 - &m0;
            }
            if beta.is_zero() {
                continue;
            }
            let alpha = &a0 * &b0 - &m0 * &bb0;
            // osc(l) = 2(alpha + beta l)/(b0 + l)^2 is stationary at
            let lstar = &b0 - &two * alpha / beta;
            if lstar > zero && lstar < len_q {
                out.push(lstar);
            }
        }
        out
    }

    /// sup over subintervals of the mean oscillation.
    pub fn mean_oscillation_sup(&self) -> BigRational {
        let forward = self.mean_osc_sup_one_orientation();
        let backward = self.reflected().mean_osc_sup_one_orientation();
        forward.max(backward)
    }

    fn mean_osc_sup_one_orientation(&self) -> BigRational {
        let m = self.values.len();
        let mut best = BigRational::zero();
        for i in 0..m {
            for j in i + 1..=m {
                let cand = self.mean_osc_pair(i, j);
                if cand > best {
                    best = cand;
                }
            }
        }
        for i in 0..m {
            for q in i..m {
                for l in self.anchored_candidates(i, q) {
                    let cand = self.mean_osc_partial(i, q, &l);
                    if cand > best {
                        best = cand;
                    }
                }
            }
        }
        best
    }

    /// Mirror image around the domain midpoint; mean oscillation is
    /// reflection invariant, which turns free-left configurations into the
    /// anchored free-right form.
    fn reflected(&self) -> RationalStepFn {
        let c = self.bounds.first().unwrap() + self.bounds.last().unwrap();
        let bounds: Vec<BigRational> =
            self.bounds.iter().rev().map(|x| &c - x).collect();
        let values: Vec<BigRational> = self.values.iter().rev().cloned().collect();
        let mut prefix = Vec::with_capacity(bounds.len());
        prefix.push(BigRational::zero());
        for p in 0..values.len() {
            let cell = &values[p] * (&bounds[p + 1] - &bounds[p]);
            let acc = &prefix[p] + cell;
            prefix.push(acc);
        }
        RationalStepFn {
            bounds,
            values,
            prefix,
        }
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::INFINITY)
}

/// Exact BLO-type supremum of a piecewise-constant grid function, as f64.
pub fn step_lower_oscillation_sup(g: &GridFunction) -> Result<f64> {
    Ok(to_f64(&RationalStepFn::from_grid_function(g)?.lower_oscillation_sup()))
}

/// Exact BMO-type supremum of a piecewise-constant grid function, as f64.
pub fn step_mean_oscillation_sup(g: &GridFunction) -> Result<f64> {
    Ok(to_f64(&RationalStepFn::from_grid_function(g)?.mean_oscillation_sup()))
}

/// Exact A1 constant of a strictly positive piecewise-constant weight.
pub fn step_a1_sup(g: &GridFunction) -> Result<f64> {
    Ok(to_f64(&RationalStepFn::from_grid_function(g)?.a1_sup()?))
}
