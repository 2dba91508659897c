//! Independent brute-force reference implementations.
//!
//! Everything in this module trades efficiency for transparency and is used
//! to validate the production code: the metric oracle enumerates all monotone
//! matchings between two step paths and prices each one from first
//! principles, and the linear-programming oracle enumerates candidate basic
//! points as intersections of active constraints. Both are restricted to
//! small inputs and error out rather than degrade.

use thiserror::Error;

use crate::lp::{LinearProgram, RowSense, Sense};
use crate::paths::{
    euclid_dist, MatchStep, PathError, StepPath, TimeChange,
};

/// Combined jump budget accepted by the path-matching oracle.
pub const MAX_ORACLE_JUMPS: usize = 12;

/// Variable budget accepted by the vertex-enumeration oracle.
pub const MAX_ORACLE_VARS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle accepts at most {limit} combined jumps, got {got}")]
    TooManyJumps { got: usize, limit: usize },
    #[error("oracle accepts at most {limit} variables, got {got}")]
    TooManyVars { got: usize, limit: usize },
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Clone, Copy, Debug)]
enum Event {
    /// The first path jumps alone; carries its jump time.
    Lone1(f64),
    /// The second path jumps alone; carries its jump time.
    Lone2(f64),
    /// Matched pair of jump times.
    Pair(f64, f64),
}

fn events_of(a: &StepPath, b: &StepPath, steps: &[MatchStep]) -> Vec<Event> {
    let (u, v) = (a.jump_times(), b.jump_times());
    let (mut i, mut j) = (0usize, 0usize);
    let mut events = Vec::with_capacity(steps.len());
    for s in steps {
        match s {
            MatchStep::Left => {
                events.push(Event::Lone1(u[i]));
                i += 1;
            }
            MatchStep::Right => {
                events.push(Event::Lone2(v[j]));
                j += 1;
            }
            MatchStep::Both => {
                events.push(Event::Pair(u[i], v[j]));
                i += 1;
                j += 1;
            }
        }
    }
    assert_eq!(i, u.len());
    assert_eq!(j, v.len());
    events
}

/// Cost of one monotone matching, priced from scratch.
///
/// The value part is the largest mismatch over all visited state pairs. The
/// time part collects, for every matched pair, its displacement, and for
/// every lone jump the distance from its time to the open interval between
/// the other path's nearest earlier and later event times: an increasing
/// time change must send the lone jump into that interval.
pub fn lattice_path_cost(a: &StepPath, b: &StepPath, steps: &[MatchStep]) -> f64 {
    let horizon = a.horizon();
    let events = events_of(a, b, steps);
    let (av, bv) = (a.values(), b.values());
    let (mut i, mut j) = (0usize, 0usize);
    let mut cost = euclid_dist(&av[0], &bv[0]);
    for s in steps {
        match s {
            MatchStep::Left => i += 1,
            MatchStep::Right => j += 1,
            MatchStep::Both => {
                i += 1;
                j += 1;
            }
        }
        cost = cost.max(euclid_dist(&av[i], &bv[j]));
    }
    for (k, e) in events.iter().enumerate() {
        match *e {
            Event::Pair(tu, tv) => cost = cost.max((tu - tv).abs()),
            Event::Lone1(tu) => {
                let (lo, hi) = other_side_window(&events, k, horizon, false);
                cost = cost.max((lo - tu).max(tu - hi).max(0.0));
            }
            Event::Lone2(tv) => {
                let (lo, hi) = other_side_window(&events, k, horizon, true);
                cost = cost.max((lo - tv).max(tv - hi).max(0.0));
            }
        }
    }
    cost
}

/// Nearest event times of the other path strictly before and after event `k`
/// in matching order, with `0` and `T` as defaults. `first_path` selects
/// which path's times count as "other side".
fn other_side_window(events: &[Event], k: usize, horizon: f64, first_path: bool) -> (f64, f64) {
    let pick = |e: &Event| -> Option<f64> {
        match (*e, first_path) {
            (Event::Lone1(t), true) => Some(t),
            (Event::Lone2(t), false) => Some(t),
            (Event::Pair(tu, _), true) => Some(tu),
            (Event::Pair(_, tv), false) => Some(tv),
            _ => None,
        }
    };
    let lo = events[..k].iter().rev().find_map(pick).unwrap_or(0.0);
    let hi = events[k + 1..].iter().find_map(pick).unwrap_or(horizon);
    (lo, hi)
}

/// Exhaustive Skorokhod distance over all monotone matchings. Requires the
/// combined jump count to stay within [`MAX_ORACLE_JUMPS`].
pub fn skorokhod_distance_oracle(a: &StepPath, b: &StepPath) -> Result<f64, OracleError> {
    let total = a.num_jumps() + b.num_jumps();
    if total > MAX_ORACLE_JUMPS {
        return Err(OracleError::TooManyJumps {
            got: total,
            limit: MAX_ORACLE_JUMPS,
        });
    }
    let (best, _) = best_matching(a, b);
    Ok(best)
}

/// Exhaustive search returning the optimal matching itself.
pub fn best_matching(a: &StepPath, b: &StepPath) -> (f64, Vec<MatchStep>) {
    let (p, q) = (a.num_jumps(), b.num_jumps());
    let mut best = f64::INFINITY;
    let mut best_steps = Vec::new();
    let mut stack: Vec<MatchStep> = Vec::with_capacity(p + q);
    enumerate(a, b, 0, 0, p, q, &mut stack, &mut best, &mut best_steps);
    (best, best_steps)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    a: &StepPath,
    b: &StepPath,
    i: usize,
    j: usize,
    p: usize,
    q: usize,
    stack: &mut Vec<MatchStep>,
    best: &mut f64,
    best_steps: &mut Vec<MatchStep>,
) {
    if i == p && j == q {
        let cost = lattice_path_cost(a, b, stack);
        if cost < *best {
            *best = cost;
            *best_steps = stack.clone();
        }
        return;
    }
    if i < p {
        stack.push(MatchStep::Left);
        enumerate(a, b, i + 1, j, p, q, stack, best, best_steps);
        stack.pop();
    }
    if j < q {
        stack.push(MatchStep::Right);
        enumerate(a, b, i, j + 1, p, q, stack, best, best_steps);
        stack.pop();
    }
    if i < p && j < q {
        stack.push(MatchStep::Both);
        enumerate(a, b, i + 1, j + 1, p, q, stack, best, best_steps);
        stack.pop();
    }
}

/// Builds an explicit piecewise-linear time change realizing a matching up
/// to a perturbation controlled by `margin`: matched pairs become nodes, and
/// each lone jump of the second path is placed inside its admissible window,
/// as close to its own time as the window allows.
pub fn realize_time_change(
    a: &StepPath,
    b: &StepPath,
    steps: &[MatchStep],
    margin: f64,
) -> Result<TimeChange, PathError> {
    let horizon = a.horizon();
    let events = events_of(a, b, steps);
    let mut nodes = vec![(0.0, 0.0)];
    // walk gap by gap between fixed domain positions (first-path jumps and
    // matched pairs); lone second-path jumps inside a gap get clamped there
    let mut k = 0usize;
    let mut gap_start = 0.0f64;
    while k < events.len() {
        match events[k] {
            Event::Lone1(tu) => {
                gap_start = tu;
                k += 1;
            }
            Event::Pair(tu, tv) => {
                nodes.push((tu, tv));
                gap_start = tu;
                k += 1;
            }
            Event::Lone2(_) => {
                let mut group = Vec::new();
                while k < events.len() {
                    if let Event::Lone2(tv) = events[k] {
                        group.push(tv);
                        k += 1;
                    } else {
                        break;
                    }
                }
                let gap_end = match events.get(k) {
                    Some(Event::Lone1(tu)) | Some(Event::Pair(tu, _)) => *tu,
                    _ => horizon,
                };
                let delta = (margin / (4.0 * (group.len() as f64 + 1.0)))
                    .min((gap_end - gap_start) / (2.0 * (group.len() as f64 + 1.0)));
                let mut prev = gap_start;
                for (m, &tv) in group.iter().enumerate() {
                    let remaining = (group.len() - m) as f64;
                    let ideal = tv.clamp(gap_start + delta, gap_end - remaining * delta);
                    let x = ideal.max(prev + delta);
                    nodes.push((x, tv));
                    prev = x;
                }
            }
        }
    }
    nodes.push((horizon, horizon));
    TimeChange::new(nodes)
}

/// Basic point found by active-set enumeration.
#[derive(Clone, Debug)]
pub struct VertexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Brute-force linear programming by enumerating intersections of active
/// constraints. Every subset of `n` hyperplanes chosen from the rows and the
/// finite variable bounds is solved exactly; feasible points are ranked by
/// objective. Equality rows are forced into every subset. Returns `None`
/// when no feasible basic point exists, which for bounded feasible programs
/// with at least one vertex means infeasibility.
pub fn lp_vertex_oracle(lp: &LinearProgram) -> Result<Option<VertexSolution>, OracleError> {
    let n = lp.n_vars();
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVars {
            got: n,
            limit: MAX_ORACLE_VARS,
        });
    }
    // hyperplanes: (coefficients, rhs, mandatory)
    let mut planes: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for row in lp.rows() {
        let mut coeffs = vec![0.0; n];
        for &(j, c) in &row.entries {
            coeffs[j] += c;
        }
        planes.push((coeffs, row.rhs, row.sense == RowSense::Eq));
    }
    for j in 0..n {
        let (lo, hi) = lp.bounds(j);
        if lo.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            planes.push((coeffs, lo, false));
        }
        if hi.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            planes.push((coeffs, hi, false));
        }
    }
    let mandatory: Vec<usize> = planes
        .iter()
        .enumerate()
        .filter(|(_, p)| p.2)
        .map(|(k, _)| k)
        .collect();
    let free: Vec<usize> = (0..planes.len()).filter(|k| !planes[*k].2).collect();
    let need = n.saturating_sub(mandatory.len().min(n));
    let mut best: Option<VertexSolution> = None;
    let mut subset = Vec::with_capacity(n);
    let base: Vec<usize> = mandatory.iter().copied().take(n).collect();
    choose_and_test(lp, &planes, &base, &free, need, 0, &mut subset, &mut best);
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn choose_and_test(
    lp: &LinearProgram,
    planes: &[(Vec<f64>, f64, bool)],
    base: &[usize],
    free: &[usize],
    need: usize,
    from: usize,
    subset: &mut Vec<usize>,
    best: &mut Option<VertexSolution>,
) {
    if subset.len() == need {
        let active: Vec<usize> = base.iter().chain(subset.iter()).copied().collect();
        if let Some(x) = solve_square(lp.n_vars(), planes, &active) {
            if point_feasible(lp, &x) {
                let obj = lp
                    .objective()
                    .iter()
                    .zip(&x)
                    .map(|(c, xi)| c * xi)
                    .sum::<f64>();
                let better = match (best.as_ref(), lp.sense()) {
                    (None, _) => true,
                    (Some(b), Sense::Maximize) => obj > b.objective + 1e-12,
                    (Some(b), Sense::Minimize) => obj < b.objective - 1e-12,
                };
                if better {
                    *best = Some(VertexSolution { x, objective: obj });
                }
            }
        }
        return;
    }
    for k in from..free.len() {
        subset.push(free[k]);
        choose_and_test(lp, planes, base, free, need, k + 1, subset, best);
        subset.pop();
    }
}

/// Gaussian elimination with partial pivoting on the active-set system.
fn solve_square(n: usize, planes: &[(Vec<f64>, f64, bool)], active: &[usize]) -> Option<Vec<f64>> {
    if active.len() != n {
        return None;
    }
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for (r, &k) in active.iter().enumerate() {
        m[r][..n].copy_from_slice(&planes[k].0);
        m[r][n] = planes[k].1;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| {
            m[r1][col]
                .abs()
                .partial_cmp(&m[r2][col].abs())
                .unwrap()
        })?;
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|r| m[r][n] / m[r][r]).collect())
}

fn point_feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    const TOL: f64 = 1e-9;
    for j in 0..lp.n_vars() {
        let (lo, hi) = lp.bounds(j);
        if x[j] < lo - TOL || x[j] > hi + TOL {
            return false;
        }
    }
    for row in lp.rows() {
        let lhs: f64 = row.entries.iter().map(|&(j, c)| c * x[j]).sum();
        let ok = match row.sense {
            RowSense::Le => lhs <= row.rhs + TOL,
            RowSense::Ge => lhs >= row.rhs - TOL,
            RowSense::Eq => (lhs - row.rhs).abs() <= TOL,
        };
        if !ok {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{achieved_cost, skorokhod_distance};

    fn path1(horizon: f64, jumps: &[(f64, f64)]) -> StepPath {
        let times = jumps.iter().map(|j| j.0).collect();
        let mut values = vec![vec![1.0]];
        values.extend(jumps.iter().map(|j| vec![j.1]));
        StepPath::new(1, horizon, times, values).unwrap()
    }

    #[test]
    fn oracle_rejects_large_inputs() {
        let jumps: Vec<(f64, f64)> = (1..8).map(|k| (k as f64 * 0.1, 1.0 + k as f64)).collect();
        let a = path1(1.0, &jumps);
        assert!(matches!(
            skorokhod_distance_oracle(&a, &a),
            Err(OracleError::TooManyJumps { .. })
        ));
    }

    #[test]
    fn oracle_matches_dynamic_program_on_cases() {
        let cases = vec![
            (path1(1.0, &[(0.2, 5.0)]), path1(1.0, &[(0.8, 5.0)])),
            (
                path1(10.0, &[(1.0, 4.0), (2.0, 5.0)]),
                path1(10.0, &[(8.0, 4.5)]),
            ),
            (
                path1(1.0, &[(0.1, 2.0), (0.4, 0.7), (0.9, 1.3)]),
                path1(1.0, &[(0.3, 1.9), (0.5, 0.8)]),
            ),
            (path1(1.0, &[]), path1(1.0, &[(0.5, 1.01)])),
        ];
        for (a, b) in cases {
            let fast = skorokhod_distance(&a, &b).unwrap();
            let slow = skorokhod_distance_oracle(&a, &b).unwrap();
            assert!((fast - slow).abs() < 1e-12, "fast {fast} slow {slow}");
        }
    }

    #[test]
    fn realized_time_change_attains_matching_cost() {
        let a = path1(1.0, &[(0.2, 5.0), (0.6, 2.0)]);
        let b = path1(1.0, &[(0.25, 5.1), (0.7, 2.1)]);
        let (cost, steps) = best_matching(&a, &b);
        let tc = realize_time_change(&a, &b, &steps, 1e-6).unwrap();
        let achieved = achieved_cost(&a, &b, &tc);
        assert!(achieved <= cost + 1e-6, "achieved {achieved} vs {cost}");
        assert!(achieved + 1e-12 >= skorokhod_distance(&a, &b).unwrap());
    }

    #[test]
    fn vertex_oracle_solves_textbook_program() {
        // max x + y subject to x + 2y <= 4, 3x + y <= 6, x, y >= 0
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_row(vec![(0, 1.0), (1, 2.0)], RowSense::Le, 4.0);
        lp.add_row(vec![(0, 3.0), (1, 1.0)], RowSense::Le, 6.0);
        let best = lp_vertex_oracle(&lp).unwrap().unwrap();
        assert!((best.x[0] - 1.6).abs() < 1e-9);
        assert!((best.x[1] - 1.2).abs() < 1e-9);
        assert!((best.objective - 2.8).abs() < 1e-9);
    }

    #[test]
    fn vertex_oracle_handles_equalities_and_bounds() {
        // min 2x + y subject to x + y = 1, 0 <= x <= 0.3, y >= 0
        let mut lp = LinearProgram::new(Sense::Minimize, 2);
        lp.set_objective(0, 2.0);
        lp.set_objective(1, 1.0);
        lp.set_bounds(0, 0.0, 0.3);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], RowSense::Eq, 1.0);
        let best = lp_vertex_oracle(&lp).unwrap().unwrap();
        assert!((best.objective - 1.0).abs() < 1e-9);
        assert!((best.x[0] - 0.0).abs() < 1e-9);
    }

    #[test]
    fn vertex_oracle_reports_infeasible_as_none() {
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![(0, 1.0)], RowSense::Le, -1.0);
        assert!(lp_vertex_oracle(&lp).unwrap().is_none());
    }
}
