//! Discretization of cadlag paths by exit times and lattice projections.
//!
//! Fix `eps = sqrt(d) * 2^-n`. The trace of a path `S` records the times
//!
//! ```text
//! tau_0 = 0,
//! tau_{k+1} = min( T, tau_k + eps,
//!                  inf { jump u > tau_k : |S_u - S_{tau_k}| >= eps } )
//! ```
//!
//! together with the values `S_{tau_k}`, ending at `tau_M = T`. Between
//! consecutive trace times the path oscillates less than `eps` around the
//! recorded value and time increments never exceed `eps`.
//!
//! Three coarser and coarser step paths are read off a trace:
//!
//! * `map_pi` holds `S_{tau_k}` on `[tau_k, tau_{k+1})`, keeping the original
//!   times and values of the trace (terminal segment `[tau_{M-1}, T]`);
//! * `map_pi_check` additionally projects level `k` onto the dyadic grid at
//!   refinement `n + k` by the ceiling map, with the terminal level
//!   projected at the base refinement `n`;
//! * `map_pi_hat` also moves the jumps onto admissible durations: with
//!   `scale = 1 - eps/T`,
//!
//! ```text
//! tau^_0 = 0,  tau^_1 = eps,
//! tau^_k = tau^_{k-1} + scale * max{ t in B(n+k) : t < tau_{k-1} - tau_{k-2} },
//! ```
//!
//! and carries levels `ceil(n+k, S_{tau_k})` for `k < M` plus the terminal
//! level `ceil(n, S_T)`. The shifted times increase strictly, stay below the
//! horizon, and satisfy `|tau^_k - tau_k| <= 2 eps`.
//!
//! A path belongs to the lattice when some encoding of it (its own jumps
//! plus finitely many silent repetitions of a level) satisfies all the grid
//! and duration constraints above; [`verify_encoding`] checks a supplied
//! encoding exactly and [`lattice_membership`] searches for one within an
//! explicit padding budget.

use thiserror::Error;

use crate::grid::{ceil_project, on_value_grid, DurationSet, GridError, GridSpec, TIME_TOL};
use crate::paths::{euclid_dist, PathError, StepPath};

#[derive(Debug, Error, PartialEq)]
pub enum DiscretizationError {
    #[error("ball radius must be positive and below the horizon, got {0}")]
    BadEpsilon(f64),
    #[error("trace and grid disagree: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Exit-time trace of a path: times `tau_0 = 0 < ... < tau_M = T` and the
/// path values at those times.
#[derive(Clone, Debug)]
pub struct StoppingTimeTrace {
    eps: f64,
    horizon: f64,
    times: Vec<f64>,
    levels: Vec<Vec<f64>>,
}

impl StoppingTimeTrace {
    /// Number of increments `M`; the trace has `M + 1` entries.
    pub fn m(&self) -> usize {
        self.times.len() - 1
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }
}

/// Computes the exit-time trace of `path` for ball radius `eps`.
pub fn stopping_times(
    path: &StepPath,
    eps: f64,
) -> Result<StoppingTimeTrace, DiscretizationError> {
    let horizon = path.horizon();
    if !(eps > 0.0) || eps >= horizon {
        return Err(DiscretizationError::BadEpsilon(eps));
    }
    // a jump triggers a stop when it leaves the closed eps-ball; the slack
    // absorbs roundoff so grid-sized jumps of exactly eps still trigger
    let trigger = eps * (1.0 - 1e-9);
    let mut times = vec![0.0f64];
    let mut levels = vec![path.initial().to_vec()];
    loop {
        let t = *times.last().unwrap();
        if t >= horizon {
            break;
        }
        let level = levels.last().unwrap().clone();
        let cap = (t + eps).min(horizon);
        let mut next = cap;
        for &u in path.jump_times() {
            if u <= t {
                continue;
            }
            if u > cap {
                break;
            }
            if euclid_dist(path.evaluate(u), &level) >= trigger {
                next = u;
                break;
            }
        }
        times.push(next);
        levels.push(path.evaluate(next).to_vec());
    }
    Ok(StoppingTimeTrace {
        eps,
        horizon,
        times,
        levels,
    })
}

/// Shifted trace times `tau^_0 .. tau^_M` landing on scaled duration grids.
pub fn shifted_times(
    trace: &StoppingTimeTrace,
    spec: &GridSpec,
) -> Result<Vec<f64>, DiscretizationError> {
    let eps = spec.mesh();
    if (trace.eps - eps).abs() > TIME_TOL {
        return Err(DiscretizationError::Incompatible(format!(
            "trace radius {} differs from grid mesh {}",
            trace.eps, eps
        )));
    }
    if (trace.horizon - spec.horizon()).abs() > TIME_TOL {
        return Err(DiscretizationError::Incompatible(format!(
            "trace horizon {} differs from grid horizon {}",
            trace.horizon,
            spec.horizon()
        )));
    }
    let m = trace.m();
    let scale = spec.duration_scale();
    let mut out = Vec::with_capacity(m + 1);
    out.push(0.0);
    if m >= 1 {
        out.push(eps);
    }
    for k in 2..=m {
        let gap = trace.times[k - 1] - trace.times[k - 2];
        let raw = DurationSet::new(spec.n() + k as u32, spec.dim(), 1.0);
        let dur = raw.largest_below(gap);
        out.push(out[k - 1] + scale * dur);
    }
    Ok(out)
}

/// First discretization: the path frozen at its trace values.
pub fn map_pi(trace: &StoppingTimeTrace) -> Result<StepPath, PathError> {
    let m = trace.m();
    let dim = trace.levels[0].len();
    let jumps = trace.times[1..m].to_vec();
    let values = trace.levels[..m].to_vec();
    StepPath::new(dim, trace.horizon, jumps, values)
}

/// Second discretization: trace values projected onto dyadic value grids,
/// level `k` at refinement `n + k` and the terminal level at refinement `n`.
pub fn map_pi_check(
    trace: &StoppingTimeTrace,
    spec: &GridSpec,
) -> Result<StepPath, DiscretizationError> {
    let m = trace.m();
    let dim = trace.levels[0].len();
    let jumps = trace.times[1..m].to_vec();
    let mut values = Vec::with_capacity(m);
    for k in 0..m.saturating_sub(1) {
        values.push(ceil_project(&trace.levels[k], spec.n() + k as u32)?);
    }
    values.push(ceil_project(&trace.levels[m - 1], spec.n())?);
    Ok(StepPath::new(dim, trace.horizon, jumps, values)?)
}

/// A lattice path together with the encoding that produced it. The encoding
/// keeps silent segments (repeated levels) that the canonical path drops.
#[derive(Clone, Debug)]
pub struct LatticeImage {
    /// Canonical step path induced by the encoding.
    pub path: StepPath,
    /// Encoded segment starts `0 = t_0 < t_1 < ... < t_L < T`.
    pub times: Vec<f64>,
    /// Level held on `[t_k, t_{k+1})`, the last one up to the horizon.
    pub levels: Vec<Vec<f64>>,
}

/// Third discretization: projected levels at shifted times. The result lies
/// on the path lattice and its encoding witnesses that membership.
pub fn map_pi_hat(
    trace: &StoppingTimeTrace,
    spec: &GridSpec,
) -> Result<LatticeImage, DiscretizationError> {
    let m = trace.m();
    let dim = trace.levels[0].len();
    let shifted = shifted_times(trace, spec)?;
    let mut levels = Vec::with_capacity(m + 1);
    for k in 0..m {
        levels.push(ceil_project(&trace.levels[k], spec.n() + k as u32)?);
    }
    levels.push(ceil_project(&trace.levels[m], spec.n())?);
    let path = StepPath::new(
        dim,
        trace.horizon,
        shifted[1..].to_vec(),
        levels.clone(),
    )?;
    Ok(LatticeImage {
        path,
        times: shifted,
        levels,
    })
}

/// Exact check that an encoding satisfies every lattice constraint: the
/// first segment starts at zero with level one, the second at `eps`, later
/// increments lie on the scaled duration grids, level `k` lies on the value
/// grid at refinement `n + k`, and the last level on the base grid.
pub fn verify_encoding(times: &[f64], levels: &[Vec<f64>], spec: &GridSpec) -> bool {
    let horizon = spec.horizon();
    let eps = spec.mesh();
    if times.len() != levels.len() || times.len() < 2 {
        return false;
    }
    let last = times.len() - 1;
    if times[0].abs() > TIME_TOL || (times[1] - eps).abs() > TIME_TOL {
        return false;
    }
    if *times.last().unwrap() >= horizon - TIME_TOL {
        return false;
    }
    for k in 1..times.len() {
        if times[k] <= times[k - 1] {
            return false;
        }
        if k >= 2 {
            let set = spec.duration_set(k as u32);
            if !set.contains(times[k] - times[k - 1]) {
                return false;
            }
        }
    }
    if levels[0] != vec![1.0; spec.dim()] {
        return false;
    }
    for (k, level) in levels.iter().enumerate() {
        let refine = if k == last { 0 } else { k as u32 };
        if !on_value_grid(level, spec.n() + refine) {
            return false;
        }
    }
    true
}

/// Budgets for the explicit membership search.
#[derive(Clone, Copy, Debug)]
pub struct MembershipSearch {
    /// How many silent segments may be inserted in total.
    pub max_silent: usize,
    /// How many candidate durations to try per silent insertion.
    pub max_branch: usize,
    /// Reciprocal depth of the candidate durations.
    pub k_max: u32,
    /// Hard cap on visited search nodes.
    pub max_nodes: usize,
}

impl Default for MembershipSearch {
    fn default() -> Self {
        MembershipSearch {
            max_silent: 4,
            max_branch: 64,
            k_max: 64,
            max_nodes: 200_000,
        }
    }
}

/// Searches for an encoding of `path` that satisfies the lattice
/// constraints, inserting at most the budgeted number of silent segments.
/// Returns the witness encoding on success. The search is sound: any
/// returned encoding passes [`verify_encoding`] and reproduces `path`; a
/// `None` under exhausted budgets is reported as non-membership within the
/// searched class.
pub fn lattice_membership(
    path: &StepPath,
    spec: &GridSpec,
    search: &MembershipSearch,
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    if path.dim() != spec.dim() || (path.horizon() - spec.horizon()).abs() > TIME_TOL {
        return None;
    }
    let eps = spec.mesh();
    let visible = path.jump_times();
    let values = path.values();
    // the terminal level must sit on the base grid no matter the encoding
    if !on_value_grid(path.terminal(), spec.n()) {
        return None;
    }
    let mut nodes = 0usize;
    let mut times = vec![0.0f64];
    let mut levels = vec![vec![1.0; spec.dim()]];
    // the first segment boundary is pinned at eps: either it is the first
    // visible jump or a silent repetition of the initial level
    let first_real = !visible.is_empty() && (visible[0] - eps).abs() <= TIME_TOL;
    if first_real {
        if on_value_grid(&values[1], spec.n() + 1) {
            times.push(eps);
            levels.push(values[1].clone());
            if dfs(
                path, spec, search, &mut nodes, &mut times, &mut levels, 1, 1, 1,
            ) {
                return Some((times, levels));
            }
        }
        None
    } else if visible.is_empty() || visible[0] > eps + TIME_TOL {
        times.push(eps);
        levels.push(values[0].clone());
        if dfs(
            path, spec, search, &mut nodes, &mut times, &mut levels, 1, 0, 1,
        ) {
            return Some((times, levels));
        }
        None
    } else {
        // a visible jump strictly before eps cannot be encoded
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    path: &StepPath,
    spec: &GridSpec,
    search: &MembershipSearch,
    nodes: &mut usize,
    times: &mut Vec<f64>,
    levels: &mut Vec<Vec<f64>>,
    k: usize,
    consumed: usize,
    silent_used: usize,
) -> bool {
    *nodes += 1;
    if *nodes > search.max_nodes {
        return false;
    }
    let visible = path.jump_times();
    let p = visible.len();
    // accept: all visible jumps consumed and the current level (which equals
    // the terminal value) sits on the base grid
    if consumed == p && on_value_grid(levels.last().unwrap(), spec.n()) {
        return true;
    }
    let t = times[k];
    let set = spec.duration_set(k as u32 + 1);
    // real step: encode the next visible jump
    if consumed < p {
        let delta = visible[consumed] - t;
        let next_level = &path.values()[consumed + 1];
        if delta > 0.0
            && set.contains(delta)
            && on_value_grid(next_level, spec.n() + k as u32 + 1)
        {
            times.push(visible[consumed]);
            levels.push(next_level.clone());
            if dfs(
                path,
                spec,
                search,
                nodes,
                times,
                levels,
                k + 1,
                consumed + 1,
                silent_used,
            ) {
                return true;
            }
            times.pop();
            levels.pop();
        }
    }
    // silent step: repeat the current level on a new segment
    if silent_used < search.max_silent {
        let gap_end = if consumed < p {
            visible[consumed]
        } else {
            path.horizon()
        };
        let here = levels.last().unwrap().clone();
        if on_value_grid(&here, spec.n() + k as u32 + 1) {
            for delta in set.enumerate_below(gap_end - t, search.max_branch, search.k_max) {
                times.push(t + delta);
                levels.push(here.clone());
                if dfs(
                    path,
                    spec,
                    search,
                    nodes,
                    times,
                    levels,
                    k + 1,
                    consumed,
                    silent_used + 1,
                ) {
                    return true;
                }
                times.pop();
                levels.pop();
            }
        }
    }
    false
}

/// Exit-time traces restarted at prescribed dates `T_1 < ... < T_N = T`.
///
/// Within each interval `[T_{i-1}, T_i]` the recursion mirrors
/// [`stopping_times`] with two changes: the time cap of a step is
/// `eps` meet the previous increment (so increments within an interval
/// never grow), and the interval endpoint is always a trace time. The
/// i-th interval therefore runs `tau_0 = T_{i-1} < ... < tau_{M_i} = T_i`.
#[derive(Clone, Debug)]
pub struct MultiMarginalTrace {
    eps: f64,
    horizon: f64,
    dates: Vec<f64>,
    times: Vec<Vec<f64>>,
    levels: Vec<Vec<Vec<f64>>>,
}

impl MultiMarginalTrace {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The prescribed dates, ending at the horizon.
    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn num_intervals(&self) -> usize {
        self.dates.len()
    }

    /// Increment count of interval `i`.
    pub fn m(&self, i: usize) -> usize {
        self.times[i].len() - 1
    }

    /// Trace times of interval `i`, from `T_{i-1}` to `T_i` inclusive.
    pub fn times(&self, i: usize) -> &[f64] {
        &self.times[i]
    }

    /// Path values at the trace times of interval `i`.
    pub fn levels(&self, i: usize) -> &[Vec<f64>] {
        &self.levels[i]
    }

    /// All trace times and values in one increasing sequence, each
    /// interval boundary appearing once. The final entry is the horizon
    /// with the terminal path value.
    pub fn skeleton(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut times = Vec::new();
        let mut levels = Vec::new();
        for i in 0..self.times.len() {
            let from = usize::from(i > 0);
            times.extend_from_slice(&self.times[i][from..]);
            levels.extend_from_slice(&self.levels[i][from..]);
        }
        (times, levels)
    }
}

/// Computes per-interval exit-time traces with the dates forced as stops.
/// Dates must increase strictly, start after `eps`, and end at the horizon;
/// every interval must be longer than `eps`.
///
/// The step cap never exceeds the previous increment, so one short
/// increment pins every later step in its interval: sample counts scale
/// with the reciprocal of the smallest increment, not with `1/eps`.
/// Callers feeding arbitrary jump times should budget accordingly.
pub fn multi_marginal_stopping_times(
    path: &StepPath,
    eps: f64,
    dates: &[f64],
) -> Result<MultiMarginalTrace, DiscretizationError> {
    let horizon = path.horizon();
    if !(eps > 0.0) || eps >= horizon {
        return Err(DiscretizationError::BadEpsilon(eps));
    }
    if dates.is_empty()
        || dates.windows(2).any(|w| w[0] >= w[1])
        || (dates.last().unwrap() - horizon).abs() > TIME_TOL
    {
        return Err(DiscretizationError::Incompatible(
            "dates must increase strictly and end at the horizon".into(),
        ));
    }
    let mut start = 0.0;
    for &d in dates {
        if d - start <= eps {
            return Err(DiscretizationError::Incompatible(format!(
                "interval ending at {d} is not longer than the ball radius {eps}"
            )));
        }
        start = d;
    }
    let trigger = eps * (1.0 - 1e-9);
    let mut all_times = Vec::with_capacity(dates.len());
    let mut all_levels = Vec::with_capacity(dates.len());
    let mut start = 0.0;
    for &end in dates {
        let mut times = vec![start];
        let mut levels = vec![path.evaluate(start).to_vec()];
        loop {
            let t = *times.last().unwrap();
            if t >= end {
                break;
            }
            let level = levels.last().unwrap().clone();
            let prev = if times.len() >= 2 {
                t - times[times.len() - 2]
            } else {
                f64::INFINITY
            };
            let cap = (t + eps.min(prev)).min(end);
            let mut next = cap;
            for &u in path.jump_times() {
                if u <= t {
                    continue;
                }
                if u > cap {
                    break;
                }
                if euclid_dist(path.evaluate(u), &level) >= trigger {
                    next = u;
                    break;
                }
            }
            times.push(next);
            levels.push(path.evaluate(next).to_vec());
        }
        all_times.push(times);
        all_levels.push(levels);
        start = end;
    }
    Ok(MultiMarginalTrace {
        eps,
        horizon,
        dates: dates.to_vec(),
        times: all_times,
        levels: all_levels,
    })
}

/// Shifted times per interval. Within interval `i` the recursion restarts:
/// the first shifted time is the interval start, the second sits `eps`
/// later, later increments are scaled duration-grid elements with scale
/// `1 - eps / (T_i - T_{i-1})`, and at every date before the last the
/// final shifted time is pinned to the date itself. The contraction by
/// the interval length keeps every unpinned time strictly inside its
/// interval.
pub fn multi_marginal_shifted_times(
    trace: &MultiMarginalTrace,
    spec: &GridSpec,
) -> Result<Vec<Vec<f64>>, DiscretizationError> {
    let eps = spec.mesh();
    if (trace.eps - eps).abs() > TIME_TOL {
        return Err(DiscretizationError::Incompatible(format!(
            "trace radius {} differs from grid mesh {}",
            trace.eps, eps
        )));
    }
    if (trace.horizon - spec.horizon()).abs() > TIME_TOL {
        return Err(DiscretizationError::Incompatible(
            "trace and grid horizons differ".into(),
        ));
    }
    let n_int = trace.num_intervals();
    let mut out = Vec::with_capacity(n_int);
    let mut start = 0.0;
    for (i, &end) in trace.dates.iter().enumerate() {
        let m = trace.m(i);
        let scale = 1.0 - eps / (end - start);
        let last_interval = i + 1 == n_int;
        let k_hi = if last_interval { m } else { m.saturating_sub(1) };
        let mut shifted = vec![start];
        if (last_interval && m >= 1) || (!last_interval && m >= 2) {
            shifted.push(start + eps);
            for k in 2..=k_hi {
                let gap = trace.times[i][k - 1] - trace.times[i][k - 2];
                let raw = DurationSet::new(spec.n() + k as u32, spec.dim(), 1.0);
                let dur = raw.largest_below(gap);
                shifted.push(shifted[k - 1] + scale * dur);
            }
        }
        if !last_interval {
            shifted.push(end);
        }
        for w in shifted.windows(2) {
            if w[1] <= w[0] {
                return Err(DiscretizationError::Incompatible(
                    "shifted times failed to increase".into(),
                ));
            }
        }
        if *shifted.last().unwrap() >= trace.horizon - TIME_TOL {
            return Err(DiscretizationError::Incompatible(
                "shifted times reached the horizon".into(),
            ));
        }
        debug_assert_eq!(shifted.len(), m + 1);
        out.push(shifted);
        start = end;
    }
    Ok(out)
}

/// Multi-marginal skeleton path: the trace values held between trace
/// times, the last level running to the horizon.
pub fn multi_map_pi(trace: &MultiMarginalTrace) -> Result<StepPath, PathError> {
    let (times, levels) = trace.skeleton();
    let m = times.len() - 1;
    let dim = levels[0].len();
    StepPath::new(dim, trace.horizon, times[1..m].to_vec(), levels[..m].to_vec())
}

/// Multi-marginal grid projection at the original trace times: level `k`
/// of interval `i` is projected at refinement `n + k`, the refinement
/// restarting at each date; the final level of the last interval is
/// projected at the base refinement.
pub fn multi_map_pi_check(
    trace: &MultiMarginalTrace,
    spec: &GridSpec,
) -> Result<StepPath, DiscretizationError> {
    let n_int = trace.num_intervals();
    let dim = trace.levels[0][0].len();
    let mut jumps = Vec::new();
    let mut values = Vec::new();
    for i in 0..n_int {
        let m = trace.m(i);
        let last_interval = i + 1 == n_int;
        // interval i owns levels k = 0..m-1; the pinned date level is the
        // next interval's first
        for k in 0..m {
            if !(i == 0 && k == 0) {
                jumps.push(trace.times[i][k]);
            }
            let refine = if last_interval && k == m - 1 {
                spec.n()
            } else {
                spec.n() + k as u32
            };
            values.push(ceil_project(&trace.levels[i][k], refine)?);
        }
    }
    Ok(StepPath::new(dim, trace.horizon, jumps, values)?)
}

/// Multi-marginal lattice image: projected levels at the shifted times.
/// At each date before the last the path jumps to the base-grid
/// projection of the path value at that date; the terminal level is the
/// base-grid projection of the terminal value.
pub fn multi_map_pi_hat(
    trace: &MultiMarginalTrace,
    spec: &GridSpec,
) -> Result<LatticeImage, DiscretizationError> {
    let shifted = multi_marginal_shifted_times(trace, spec)?;
    let n_int = trace.num_intervals();
    let dim = trace.levels[0][0].len();
    let mut times = Vec::new();
    let mut levels = Vec::new();
    for i in 0..n_int {
        let m = trace.m(i);
        let last_interval = i + 1 == n_int;
        // interval i owns segments starting at its shifted times except the
        // pinned date, which the next interval opens
        let own = if last_interval { m + 1 } else { m };
        for k in 0..own {
            times.push(shifted[i][k]);
            if last_interval && k == m {
                levels.push(ceil_project(trace.levels[i].last().unwrap(), spec.n())?);
            } else {
                levels.push(ceil_project(&trace.levels[i][k], spec.n() + k as u32)?);
            }
        }
    }
    let path = StepPath::new(
        dim,
        trace.horizon,
        times[1..].to_vec(),
        levels.clone(),
    )?;
    Ok(LatticeImage {
        path,
        times,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::skorokhod_distance;

    fn path1(horizon: f64, jumps: &[(f64, f64)]) -> StepPath {
        let times = jumps.iter().map(|j| j.0).collect();
        let mut values = vec![vec![1.0]];
        values.extend(jumps.iter().map(|j| vec![j.1]));
        StepPath::new(1, horizon, times, values).unwrap()
    }

    #[test]
    fn trace_of_quiet_path_steps_by_eps() {
        // one big jump at 0.1, then quiet: stops at 0.1, 0.6, 1.0
        let p = path1(1.0, &[(0.1, 2.0)]);
        let trace = stopping_times(&p, 0.5).unwrap();
        let expect = [0.0, 0.1, 0.6, 1.0];
        assert_eq!(trace.times().len(), expect.len());
        for (t, e) in trace.times().iter().zip(&expect) {
            assert!((t - e).abs() < 1e-12);
        }
        assert_eq!(trace.levels()[1], vec![2.0]);
        assert_eq!(trace.m(), 3);
    }

    #[test]
    fn small_jumps_do_not_trigger_stops() {
        let p = path1(1.0, &[(0.3, 1.1), (0.45, 1.2)]);
        let trace = stopping_times(&p, 0.5).unwrap();
        // no jump moves 0.5 away from the running level, so stops are 0.5, 1.0
        let expect = [0.0, 0.5, 1.0];
        for (t, e) in trace.times().iter().zip(&expect) {
            assert!((t - e).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_increments_and_oscillation_are_bounded() {
        let p = path1(
            1.0,
            &[(0.12, 1.4), (0.2, 2.1), (0.53, 2.2), (0.74, 0.4)],
        );
        let eps = 0.35;
        let trace = stopping_times(&p, eps).unwrap();
        let times = trace.times();
        assert_eq!(*times.last().unwrap(), 1.0);
        for w in times.windows(2) {
            assert!(w[1] - w[0] > 0.0);
            assert!(w[1] - w[0] <= eps + 1e-12);
        }
        // oscillation below eps strictly inside each increment
        for (k, w) in times.windows(2).enumerate() {
            for step in 1..20 {
                let t = w[0] + (w[1] - w[0]) * step as f64 / 20.0;
                if t < w[1] {
                    let d = euclid_dist(p.evaluate(t), &trace.levels()[k]);
                    assert!(d < eps + 1e-9, "oscillation {d} at {t}");
                }
            }
        }
    }

    #[test]
    fn shifted_times_stay_inside_horizon_and_near_trace() {
        let spec = GridSpec::new(3, 1, 1.0).unwrap();
        let eps = spec.mesh();
        let p = path1(1.0, &[(0.21, 1.31), (0.47, 1.62), (0.83, 1.05)]);
        let trace = stopping_times(&p, eps).unwrap();
        let shifted = shifted_times(&trace, &spec).unwrap();
        assert_eq!(shifted.len(), trace.m() + 1);
        assert_eq!(shifted[0], 0.0);
        assert!((shifted[1] - eps).abs() < 1e-15);
        for w in shifted.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(*shifted.last().unwrap() < 1.0);
        for (k, (s, t)) in shifted.iter().zip(trace.times()).enumerate() {
            assert!(
                (s - t).abs() <= 2.0 * eps + 1e-12,
                "index {k}: shifted {s} vs trace {t}"
            );
        }
    }

    #[test]
    fn pi_map_stays_within_eps() {
        let p = path1(
            1.0,
            &[(0.11, 1.2), (0.34, 1.5), (0.55, 1.45), (0.81, 2.4)],
        );
        let eps = 0.3;
        let trace = stopping_times(&p, eps).unwrap();
        let pi = map_pi(&trace).unwrap();
        let d = skorokhod_distance(&p, &pi).unwrap();
        assert!(d <= eps + 1e-12, "distance {d}");
    }

    #[test]
    fn pi_check_projects_onto_grids() {
        let spec = GridSpec::new(2, 1, 1.0).unwrap();
        let p = path1(1.0, &[(0.3, 1.62)]);
        let trace = stopping_times(&p, spec.mesh()).unwrap();
        let check = map_pi_check(&trace, &spec).unwrap();
        // every level of the projected path lies on some dyadic grid and
        // dominates the trace level it came from
        let pi = map_pi(&trace).unwrap();
        let d = skorokhod_distance(&pi, &check).unwrap();
        assert!(d <= spec.mesh() + 1e-12);
    }

    #[test]
    fn pi_hat_encoding_verifies_and_path_matches_levels() {
        let spec = GridSpec::new(3, 1, 1.0).unwrap();
        let p = path1(1.0, &[(0.21, 1.31), (0.47, 1.62), (0.83, 1.05)]);
        let trace = stopping_times(&p, spec.mesh()).unwrap();
        let image = map_pi_hat(&trace, &spec).unwrap();
        assert!(verify_encoding(&image.times, &image.levels, &spec));
        assert_eq!(image.times.len(), trace.m() + 1);
        // chain of distances: each stage stays within a few eps
        let eps = spec.mesh();
        let check = map_pi_check(&trace, &spec).unwrap();
        let d = skorokhod_distance(&check, &image.path).unwrap();
        assert!(d <= 3.0 * eps + 1e-12, "distance {d}");
    }

    #[test]
    fn constant_path_is_a_lattice_member() {
        let spec = GridSpec::new(3, 1, 1.0).unwrap();
        let p = StepPath::constant(1, 1.0).unwrap();
        let witness = lattice_membership(&p, &spec, &MembershipSearch::default());
        let (times, levels) = witness.expect("constant path should be encodable");
        assert!(verify_encoding(&times, &levels, &spec));
        assert_eq!(times.len(), 2);
    }

    #[test]
    fn early_jump_is_not_a_lattice_member() {
        let spec = GridSpec::new(3, 1, 1.0).unwrap();
        let eps = spec.mesh();
        let p = path1(1.0, &[(0.9 * eps, 1.125)]);
        assert!(lattice_membership(&p, &spec, &MembershipSearch::default()).is_none());
    }

    #[test]
    fn multi_trace_forces_dates_and_caps_increments() {
        let p = path1(
            1.0,
            &[(0.12, 1.4), (0.2, 2.1), (0.53, 2.2), (0.74, 0.4)],
        );
        let eps = 0.2;
        let dates = [0.5, 1.0];
        let trace = multi_marginal_stopping_times(&p, eps, &dates).unwrap();
        assert_eq!(trace.num_intervals(), 2);
        assert_eq!(*trace.times(0).first().unwrap(), 0.0);
        assert_eq!(*trace.times(0).last().unwrap(), 0.5);
        assert_eq!(*trace.times(1).first().unwrap(), 0.5);
        assert_eq!(*trace.times(1).last().unwrap(), 1.0);
        for i in 0..2 {
            let times = trace.times(i);
            let mut prev_inc = f64::INFINITY;
            for (k, w) in times.windows(2).enumerate() {
                let inc = w[1] - w[0];
                assert!(inc > 0.0);
                assert!(inc <= eps + 1e-12);
                assert!(
                    inc <= prev_inc + 1e-12,
                    "interval {i} increment {k} grew: {inc} > {prev_inc}"
                );
                prev_inc = inc;
                // oscillation stays inside the ball strictly between stops
                for step in 1..20 {
                    let t = w[0] + inc * step as f64 / 20.0;
                    if t < w[1] {
                        let d = euclid_dist(p.evaluate(t), &trace.levels(i)[k]);
                        assert!(d < eps + 1e-9);
                    }
                }
            }
        }
        // skeleton ends at the horizon with the terminal value
        let (times, levels) = trace.skeleton();
        assert_eq!(*times.last().unwrap(), 1.0);
        assert_eq!(levels.last().unwrap(), &vec![0.4]);
        for w in times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn quiet_multi_trace_restarts_time_grid_at_dates() {
        let p = StepPath::constant(1, 1.0).unwrap();
        let trace = multi_marginal_stopping_times(&p, 0.2, &[0.5, 1.0]).unwrap();
        let expect0 = [0.0, 0.2, 0.4, 0.5];
        let expect1 = [0.5, 0.7, 0.9, 1.0];
        for (t, e) in trace.times(0).iter().zip(&expect0) {
            assert!((t - e).abs() < 1e-12);
        }
        for (t, e) in trace.times(1).iter().zip(&expect1) {
            assert!((t - e).abs() < 1e-12);
        }
    }

    #[test]
    fn single_date_trace_matches_plain_trace_on_quiet_paths() {
        // without exits the increment cap never binds, so the variants agree
        let p = path1(1.0, &[(0.3, 1.05), (0.6, 1.08)]);
        let eps = 0.25;
        let plain = stopping_times(&p, eps).unwrap();
        let multi = multi_marginal_stopping_times(&p, eps, &[1.0]).unwrap();
        assert_eq!(plain.times().len(), multi.times(0).len());
        for (a, b) in plain.times().iter().zip(multi.times(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_shifted_times_pin_dates_and_track_trace() {
        let spec = GridSpec::new(4, 1, 1.0).unwrap();
        let eps = spec.mesh();
        let p = path1(1.0, &[(0.21, 1.31), (0.47, 1.62), (0.83, 1.05)]);
        let trace = multi_marginal_stopping_times(&p, eps, &[0.5, 1.0]).unwrap();
        let shifted = multi_marginal_shifted_times(&trace, &spec).unwrap();
        assert_eq!(shifted.len(), 2);
        assert_eq!(shifted[0][0], 0.0);
        assert!((shifted[0][1] - eps).abs() < 1e-15);
        assert_eq!(*shifted[0].last().unwrap(), 0.5);
        assert_eq!(shifted[1][0], 0.5);
        assert!((shifted[1][1] - (0.5 + eps)).abs() < 1e-15);
        assert!(*shifted[1].last().unwrap() < 1.0);
        for (i, block) in shifted.iter().enumerate() {
            assert_eq!(block.len(), trace.m(i) + 1);
            for w in block.windows(2) {
                assert!(w[1] > w[0]);
            }
            for (s, t) in block.iter().zip(trace.times(i)) {
                assert!(
                    (s - t).abs() <= 2.0 * eps + 1e-12,
                    "interval {i}: shifted {s} vs trace {t}"
                );
            }
        }
    }

    #[test]
    fn multi_pi_maps_stay_close_and_land_on_grids() {
        let spec = GridSpec::new(4, 1, 1.0).unwrap();
        let eps = spec.mesh();
        let dates = [0.5, 1.0];
        let p = path1(
            1.0,
            &[(0.11, 1.2), (0.34, 1.5), (0.55, 1.45), (0.81, 1.3)],
        );
        let trace = multi_marginal_stopping_times(&p, eps, &dates).unwrap();
        let pi = multi_map_pi(&trace).unwrap();
        let d0 = skorokhod_distance(&p, &pi).unwrap();
        assert!(d0 <= eps + 1e-12, "pi distance {d0}");
        let check = multi_map_pi_check(&trace, &spec).unwrap();
        let d1 = skorokhod_distance(&pi, &check).unwrap();
        assert!(d1 <= eps + 1e-12, "check distance {d1}");
        let image = multi_map_pi_hat(&trace, &spec).unwrap();
        let d2 = skorokhod_distance(&check, &image.path).unwrap();
        let n_dates = dates.len() as f64;
        assert!(d2 <= 3.0 * n_dates * eps + 1e-12, "hat distance {d2}");
        // the value at each interior date sits on the base grid
        for &date in &dates[..dates.len() - 1] {
            assert!(on_value_grid(image.path.evaluate(date), spec.n()));
        }
        assert!(on_value_grid(image.path.terminal(), spec.n()));
    }

    #[test]
    fn multi_pi_hat_integral_deviation_decays_dyadically() {
        let p = path1(
            1.0,
            &[(0.13, 1.35), (0.42, 0.85), (0.67, 1.15), (0.88, 1.02)],
        );
        let dates = [0.5, 1.0];
        let mut prev = f64::INFINITY;
        for n in 2..=5u32 {
            let spec = GridSpec::new(n, 1, 1.0).unwrap();
            let trace =
                multi_marginal_stopping_times(&p, spec.mesh(), &dates).unwrap();
            let image = multi_map_pi_hat(&trace, &spec).unwrap();
            let dev = (p.time_integral()[0] - image.path.time_integral()[0]).abs();
            // measured decay: allow one plateau but demand overall shrinkage
            assert!(
                dev <= prev.max(2.0 * p.sup_norm() * 2f64.powi(-(n as i32 - 1))),
                "deviation {dev} at level {n}"
            );
            prev = dev;
        }
        assert!(prev <= 0.1, "final deviation {prev}");
    }

    #[test]
    fn pi_hat_images_are_lattice_members_via_their_encoding() {
        let spec = GridSpec::new(3, 1, 1.0).unwrap();
        for jumps in [
            vec![(0.21, 1.31), (0.47, 1.62)],
            vec![(0.13, 1.4), (0.55, 0.8), (0.7, 1.9)],
            vec![(0.5, 2.3)],
        ] {
            let p = path1(1.0, &jumps);
            let trace = stopping_times(&p, spec.mesh()).unwrap();
            let image = map_pi_hat(&trace, &spec).unwrap();
            assert!(
                verify_encoding(&image.times, &image.levels, &spec),
                "encoding of {jumps:?} failed"
            );
        }
    }
}
