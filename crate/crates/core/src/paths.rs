//! Piecewise-constant cadlag paths and the Skorokhod metric.
//!
//! A [`StepPath`] is a right-continuous step function on `[0, T]` with values
//! in `R^d`, starting exactly at `(1, ..., 1)`, jumping finitely many times
//! strictly inside `(0, T)` and therefore continuous at the horizon. Paths
//! are kept in canonical form: jumps that do not change the value are removed
//! on construction, so equal functions have equal representations.
//!
//! The distance between two step paths with values `s_0..s_p` (jumps at
//! `u_1 < .. < u_p`) and `t_0..t_q` (jumps at `v_1 < .. < v_q`) is
//!
//! ```text
//! d(a, b) = inf_l max( sup_t |a(t) - b(l(t))|, sup_t |l(t) - t| )
//! ```
//!
//! over increasing bijections `l` of `[0, T]`. For step functions the
//! infimum reduces to a shortest-path problem over monotone lattice paths
//! from `(0, 0)` to `(p, q)`: a diagonal step matches a pair of jumps, a
//! horizontal or vertical step lets one path jump alone. Writing
//! `vd(i, j) = |s_i - t_j|` for the mismatch of a visited state, the exact
//! recursion is
//!
//! ```text
//! D[i][j] = min( max(D[i-1][j], vd(i,j), (v_j - u_i)^+),
//!                max(D[i][j-1], vd(i,j), (u_i - v_j)^+),
//!                max(D[i-1][j-1], vd(i,j), |u_i - v_j|) )
//! ```
//!
//! with `D[0][0] = vd(0, 0)` and `u_0 = v_0 = 0`. Every visited state dwells
//! for positive time under any admissible time change, so its mismatch enters
//! the supremum; the one-sided terms charge the displacement forced on an
//! unmatched jump that must be reordered past the other path's latest event.
//! The distance is an infimum and need not be attained, but piecewise-linear
//! time changes realize it up to an arbitrarily small margin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when comparing event times.
pub const PATH_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("initial value must be exactly (1, ..., 1)")]
    BadInitialValue,
    #[error("need one value per jump plus the initial value: {jumps} jumps, {values} values")]
    LengthMismatch { jumps: usize, values: usize },
    #[error("jump times must be strictly increasing inside (0, T), offending time {0}")]
    BadJumpTime(f64),
    #[error("value has dimension {got}, path has dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("values and times must be finite")]
    NotFinite,
    #[error("paths live on different horizons: {0} vs {1}")]
    HorizonMismatch(f64, f64),
    #[error("paths have different dimensions: {0} vs {1}")]
    IncompatibleDimensions(usize, usize),
    #[error("time change nodes must increase strictly in both coordinates")]
    BadTimeChange,
}

/// A canonical piecewise-constant cadlag path on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPath {
    dim: usize,
    horizon: f64,
    /// Strictly increasing jump times in the open interval `(0, T)`.
    jump_times: Vec<f64>,
    /// `values[k]` is the value on `[jump_times[k-1], jump_times[k])`;
    /// `values[0]` is the initial value `(1, ..., 1)`.
    values: Vec<Vec<f64>>,
    /// True when every coordinate of every value is strictly positive.
    positive: bool,
}

impl StepPath {
    /// The constant path at `(1, ..., 1)`.
    pub fn constant(dim: usize, horizon: f64) -> Result<Self, PathError> {
        StepPath::new(dim, horizon, Vec::new(), vec![vec![1.0; dim]])
    }

    /// Builds a path from jump times and the value sequence, canonicalizing
    /// by dropping jumps whose value equals the value before them.
    pub fn new(
        dim: usize,
        horizon: f64,
        jump_times: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, PathError> {
        if dim == 0 {
            return Err(PathError::ZeroDimension);
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(PathError::BadHorizon(horizon));
        }
        if values.len() != jump_times.len() + 1 {
            return Err(PathError::LengthMismatch {
                jumps: jump_times.len(),
                values: values.len(),
            });
        }
        for v in &values {
            if v.len() != dim {
                return Err(PathError::DimensionMismatch {
                    got: v.len(),
                    want: dim,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(PathError::NotFinite);
            }
        }
        if values[0] != vec![1.0; dim] {
            return Err(PathError::BadInitialValue);
        }
        let mut prev = 0.0f64;
        for &t in &jump_times {
            if !t.is_finite() || t <= prev || t >= horizon {
                return Err(PathError::BadJumpTime(t));
            }
            prev = t;
        }
        // canonical form: a jump that repeats the previous value is no jump
        let mut ct = Vec::with_capacity(jump_times.len());
        let mut cv = Vec::with_capacity(values.len());
        cv.push(values[0].clone());
        for (t, v) in jump_times.iter().zip(values.iter().skip(1)) {
            if v != cv.last().unwrap() {
                ct.push(*t);
                cv.push(v.clone());
            }
        }
        let positive = cv.iter().all(|v| v.iter().all(|&x| x > 0.0));
        Ok(StepPath {
            dim,
            horizon,
            jump_times: ct,
            values: cv,
            positive,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// Value sequence including the initial value, one entry per segment.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// Right-continuous evaluation at `t` in `[0, T]`.
    pub fn evaluate(&self, t: f64) -> &[f64] {
        debug_assert!(t >= -PATH_TOL && t <= self.horizon + PATH_TOL);
        let k = self.jump_times.partition_point(|&u| u <= t);
        &self.values[k]
    }

    /// Left limit at `t`, i.e. the value on the segment ending at `t`.
    pub fn left_limit(&self, t: f64) -> &[f64] {
        debug_assert!(t > 0.0);
        let k = self.jump_times.partition_point(|&u| u < t);
        &self.values[k]
    }

    /// Segments `(start, end, value)` covering `[0, T]`; the last segment
    /// closes at the horizon.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &[f64])> {
        let n = self.values.len();
        (0..n).map(move |k| {
            let start = if k == 0 { 0.0 } else { self.jump_times[k - 1] };
            let end = if k + 1 < n {
                self.jump_times[k]
            } else {
                self.horizon
            };
            (start, end, self.values[k].as_slice())
        })
    }

    /// Largest Euclidean norm attained by the path.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| euclid_norm(v))
            .fold(0.0, f64::max)
    }

    /// Coordinatewise running maximum over the whole horizon.
    pub fn max_coordinate(&self, c: usize) -> f64 {
        self.values.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Coordinatewise running minimum over the whole horizon.
    pub fn min_coordinate(&self, c: usize) -> f64 {
        self.values.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min)
    }

    /// Componentwise integral of the path over `[0, T]`.
    pub fn time_integral(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (start, end, v) in self.segments() {
            let w = end - start;
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        out
    }

    /// Componentwise time average, the integral divided by the horizon.
    pub fn time_average(&self) -> Vec<f64> {
        self.time_integral()
            .into_iter()
            .map(|x| x / self.horizon)
            .collect()
    }

    /// Bit-exact identity key of the canonical representation, usable for
    /// hashing and deduplication of equal functions.
    pub fn key_bits(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(1 + self.jump_times.len() * (1 + self.dim) + self.dim);
        key.push(self.jump_times.len() as u64);
        for t in &self.jump_times {
            key.push(t.to_bits());
        }
        for v in &self.values {
            for x in v {
                key.push(x.to_bits());
            }
        }
        key
    }
}

pub(crate) fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_compatible(a: &StepPath, b: &StepPath) -> Result<(), PathError> {
    if a.dim != b.dim {
        return Err(PathError::IncompatibleDimensions(a.dim, b.dim));
    }
    if (a.horizon - b.horizon).abs() > PATH_TOL {
        return Err(PathError::HorizonMismatch(a.horizon, b.horizon));
    }
    Ok(())
}

/// One step of a monotone lattice path used by the metric recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchStep {
    /// The first path jumps alone.
    Left,
    /// The second path jumps alone.
    Right,
    /// Both paths jump together under the time change.
    Both,
}

/// Skorokhod distance between two step paths, exact up to floating-point
/// rounding. Runs in `O(p * q)` time for paths with `p` and `q` jumps.
pub fn skorokhod_distance(a: &StepPath, b: &StepPath) -> Result<f64, PathError> {
    check_compatible(a, b)?;
    let (u, v) = (a.jump_times(), b.jump_times());
    let (av, bv) = (a.values(), b.values());
    let q = v.len();
    let mut row = vec![0.0f64; q + 1];
    row[0] = euclid_dist(&av[0], &bv[0]);
    for j in 1..=q {
        row[j] = row[j - 1].max(euclid_dist(&av[0], &bv[j]));
    }
    for i in 1..=u.len() {
        let mut prev_diag = row[0];
        row[0] = row[0].max(euclid_dist(&av[i], &bv[0]));
        for j in 1..=q {
            let vd = euclid_dist(&av[i], &bv[j]);
            let via_left = row[j].max(vd).max((v[j - 1] - u[i - 1]).max(0.0));
            let via_right = row[j - 1].max(vd).max((u[i - 1] - v[j - 1]).max(0.0));
            let via_both = prev_diag.max(vd).max((u[i - 1] - v[j - 1]).abs());
            prev_diag = row[j];
            row[j] = via_left.min(via_right).min(via_both);
        }
    }
    Ok(row[q])
}

/// Same recursion with backtracking: returns the distance together with one
/// optimal lattice path, as steps from `(0, 0)` to `(p, q)`.
pub fn skorokhod_distance_with_path(
    a: &StepPath,
    b: &StepPath,
) -> Result<(f64, Vec<MatchStep>), PathError> {
    check_compatible(a, b)?;
    let (u, v) = (a.jump_times(), b.jump_times());
    let (av, bv) = (a.values(), b.values());
    let (p, q) = (u.len(), v.len());
    let idx = |i: usize, j: usize| i * (q + 1) + j;
    let mut d = vec![0.0f64; (p + 1) * (q + 1)];
    let mut step = vec![MatchStep::Both; (p + 1) * (q + 1)];
    d[idx(0, 0)] = euclid_dist(&av[0], &bv[0]);
    for j in 1..=q {
        d[idx(0, j)] = d[idx(0, j - 1)].max(euclid_dist(&av[0], &bv[j]));
        step[idx(0, j)] = MatchStep::Right;
    }
    for i in 1..=p {
        d[idx(i, 0)] = d[idx(i - 1, 0)].max(euclid_dist(&av[i], &bv[0]));
        step[idx(i, 0)] = MatchStep::Left;
        for j in 1..=q {
            let vd = euclid_dist(&av[i], &bv[j]);
            let via_left = d[idx(i - 1, j)].max(vd).max((v[j - 1] - u[i - 1]).max(0.0));
            let via_right = d[idx(i, j - 1)].max(vd).max((u[i - 1] - v[j - 1]).max(0.0));
            let via_both = d[idx(i - 1, j - 1)].max(vd).max((u[i - 1] - v[j - 1]).abs());
            let (best, s) = if via_both <= via_left && via_both <= via_right {
                (via_both, MatchStep::Both)
            } else if via_left <= via_right {
                (via_left, MatchStep::Left)
            } else {
                (via_right, MatchStep::Right)
            };
            d[idx(i, j)] = best;
            step[idx(i, j)] = s;
        }
    }
    let mut steps = Vec::with_capacity(p + q);
    let (mut i, mut j) = (p, q);
    while i > 0 || j > 0 {
        let s = step[idx(i, j)];
        steps.push(s);
        match s {
            MatchStep::Left => i -= 1,
            MatchStep::Right => j -= 1,
            MatchStep::Both => {
                i -= 1;
                j -= 1;
            }
        }
    }
    steps.reverse();
    Ok((d[idx(p, q)], steps))
}

/// Distance used for time-average functionals: the Skorokhod distance plus
/// the Euclidean distance between the componentwise path integrals.
pub fn modified_distance(a: &StepPath, b: &StepPath) -> Result<f64, PathError> {
    let base = skorokhod_distance(a, b)?;
    let (ia, ib) = (a.time_integral(), b.time_integral());
    Ok(base + euclid_dist(&ia, &ib))
}

/// A piecewise-linear increasing bijection of `[0, T]`, given by its nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeChange {
    nodes: Vec<(f64, f64)>,
}

impl TimeChange {
    /// Nodes must increase strictly in both coordinates and span `[0, T]`
    /// exactly, starting at `(0, 0)` and ending at `(T, T)`.
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self, PathError> {
        if nodes.len() < 2 || nodes[0] != (0.0, 0.0) {
            return Err(PathError::BadTimeChange);
        }
        let last = *nodes.last().unwrap();
        if (last.0 - last.1).abs() > PATH_TOL {
            return Err(PathError::BadTimeChange);
        }
        for w in nodes.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(PathError::BadTimeChange);
            }
        }
        Ok(TimeChange { nodes })
    }

    pub fn identity(horizon: f64) -> Self {
        TimeChange {
            nodes: vec![(0.0, 0.0), (horizon, horizon)],
        }
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        interpolate(&self.nodes, t, |n| n.0, |n| n.1)
    }

    pub fn inverse(&self, r: f64) -> f64 {
        interpolate(&self.nodes, r, |n| n.1, |n| n.0)
    }

    /// `sup_t |l(t) - t|`; for a piecewise-linear bijection the supremum is
    /// attained at a node.
    pub fn sup_displacement(&self) -> f64 {
        self.nodes
            .iter()
            .map(|&(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

fn interpolate<FX, FY>(nodes: &[(f64, f64)], t: f64, fx: FX, fy: FY) -> f64
where
    FX: Fn(&(f64, f64)) -> f64,
    FY: Fn(&(f64, f64)) -> f64,
{
    let n = nodes.len();
    if t <= fx(&nodes[0]) {
        return fy(&nodes[0]);
    }
    if t >= fx(&nodes[n - 1]) {
        return fy(&nodes[n - 1]);
    }
    let k = nodes.partition_point(|node| fx(node) <= t);
    let (x0, x1) = (fx(&nodes[k - 1]), fx(&nodes[k]));
    let (y0, y1) = (fy(&nodes[k - 1]), fy(&nodes[k]));
    y0 + (t - x0) / (x1 - x0) * (y1 - y0)
}

/// Worst value mismatch `sup_t |a(t) - b(l(t))|` for a concrete time change,
/// evaluated at midpoints of the merged segment partition.
pub fn value_mismatch_under(a: &StepPath, b: &StepPath, tc: &TimeChange) -> f64 {
    let mut cuts: Vec<f64> = vec![0.0, a.horizon()];
    cuts.extend_from_slice(a.jump_times());
    cuts.extend(b.jump_times().iter().map(|&v| tc.inverse(v)));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= PATH_TOL);
    let mut worst = 0.0f64;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mismatch = euclid_dist(a.evaluate(mid), b.evaluate(tc.evaluate(mid).min(b.horizon())));
        worst = worst.max(mismatch);
    }
    worst
}

/// Cost achieved by a concrete time change: the larger of the value mismatch
/// and the time displacement. An upper bound on the Skorokhod distance.
pub fn achieved_cost(a: &StepPath, b: &StepPath, tc: &TimeChange) -> f64 {
    value_mismatch_under(a, b, tc).max(tc.sup_displacement())
}
