//! Pathwise integration, the portfolio lift, super-replication reports,
//! and the two explicit maximal-process hedges.
//!
//! Dynamic strategies are piecewise-constant, left-continuous step
//! processes with `gamma_0 = 0`; against a step price path the integral
//! is the finite jump sum
//!
//! ```text
//! int_0^t gamma dS = sum_{jumps u <= t} gamma_u (S_u - S_{u-}),
//! ```
//!
//! which agrees with the integration-by-parts form to roundoff.
//!
//! A dual solve on the path lattice produces static tables on grid atoms
//! and one dynamic dual per filtration group. The lift turns these into a
//! portfolio for arbitrary positive paths: the static leg composes with
//! the ceiling projection, and the dynamic position held on the k-th
//! exit-time interval of a path is the group dual that its lattice image
//! trades at the matching shifted time. Re-verification is pathwise and
//! from scratch: a report counts every path whose super-replication slack
//! falls below a roundoff floor.
//!
//! The power hedge dominates `max_t |S_t|_infty^p` with static part
//! `(p/(p-1))^p sum_c x_c^p - pd/(p-1)` and the running-maximum strategy
//! `gamma = -(p^2/(p-1)) (max_{i<=k} S_{tau_i})^{p-1}` per coordinate; the
//! quadratic-variation hedge dominates `sqrt(sum |Delta Pi|^2)` over
//! skeleton increments with positions normalized to `|gamma|_2 <= sqrt d`.

use std::collections::HashMap;

use thiserror::Error;

use crate::discretization::{
    map_pi_hat, multi_map_pi_hat, multi_marginal_stopping_times, stopping_times,
    DiscretizationError, LatticeImage,
};
use crate::grid::{ceil_project, on_value_grid, GridError, GridSpec, TIME_TOL};
use crate::measures::DiscreteMeasure;
use crate::mot::{MOTSolution, StaticLeg};
use crate::paths::{euclid_dist, PathError, StepPath};
use crate::payoffs::{CappedPayoff, FlooredPayoff, Payoff, ShiftedPayoff};
use crate::tree::{PathLattice, LOOKUP_TOL};

/// Slack below this is a genuine super-replication violation; above it is
/// floating-point noise on an inequality that is exact in real arithmetic.
pub const SLACK_TOL: f64 = -1e-10;

#[derive(Debug, Error)]
pub enum HedgeError {
    #[error("strategy and path are incompatible: {0}")]
    Mismatch(String),
    #[error("invalid strategy data: {0}")]
    BadStrategy(String),
    #[error("static table atom off its grid")]
    OffGridAtom,
    #[error("power hedge requires an exponent above one, got {0}")]
    BadExponent(f64),
    #[error("ball radius must be positive, got {0}")]
    BadRadius(f64),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Piecewise-constant, left-continuous d-vector strategy on [0, T]:
/// `values[k]` is held on `(breakpoints[k], breakpoints[k+1]]`, the last
/// value up to the horizon, and the position at time zero is zero.
#[derive(Clone, Debug)]
pub struct DynamicStrategy {
    dim: usize,
    horizon: f64,
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl DynamicStrategy {
    pub fn new(
        dim: usize,
        horizon: f64,
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, HedgeError> {
        if breakpoints.is_empty() || breakpoints[0] != 0.0 {
            return Err(HedgeError::BadStrategy(
                "breakpoints must start at zero".into(),
            ));
        }
        if breakpoints.len() != values.len() {
            return Err(HedgeError::BadStrategy(
                "one value per breakpoint is required".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1])
            || *breakpoints.last().unwrap() >= horizon
        {
            return Err(HedgeError::BadStrategy(
                "breakpoints must increase strictly inside the horizon".into(),
            ));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(HedgeError::BadStrategy("value dimension mismatch".into()));
        }
        Ok(DynamicStrategy {
            dim,
            horizon,
            breakpoints,
            values,
        })
    }

    /// The zero strategy.
    pub fn zero(dim: usize, horizon: f64) -> Self {
        DynamicStrategy {
            dim,
            horizon,
            breakpoints: vec![0.0],
            values: vec![vec![0.0; dim]],
        }
    }

    /// Constant position `v` on the whole of `(0, T]`.
    pub fn constant(horizon: f64, v: Vec<f64>) -> Self {
        DynamicStrategy {
            dim: v.len(),
            horizon,
            breakpoints: vec![0.0],
            values: vec![v],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Position held at time `t` by left-continuity; zero at `t <= 0`.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            return vec![0.0; self.dim];
        }
        // the last breakpoint strictly below t starts the active segment
        let k = self.breakpoints.partition_point(|b| *b < t);
        self.values[k - 1].clone()
    }

    /// Largest position norm over all segments.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Jump-sum stochastic integral of a step strategy against a step path,
/// up to and including time `upto`.
pub fn pathwise_integral(
    strategy: &DynamicStrategy,
    path: &StepPath,
    upto: f64,
) -> Result<f64, HedgeError> {
    if strategy.dim != path.dim() || (strategy.horizon - path.horizon()).abs() > TIME_TOL {
        return Err(HedgeError::Mismatch(
            "strategy and path must share dimension and horizon".into(),
        ));
    }
    let mut total = 0.0;
    for (j, &u) in path.jump_times().iter().enumerate() {
        if u > upto {
            break;
        }
        let gamma = strategy.value_at(u);
        for c in 0..path.dim() {
            total += gamma[c] * (path.values()[j + 1][c] - path.values()[j][c]);
        }
    }
    Ok(total)
}

/// Integration-by-parts form of the same integral:
/// `gamma_t S_t - gamma_0 S_0 - sum_{b < t} S_b (Delta gamma)(b)`.
pub fn integral_by_parts(
    strategy: &DynamicStrategy,
    path: &StepPath,
    upto: f64,
) -> Result<f64, HedgeError> {
    if strategy.dim != path.dim() || (strategy.horizon - path.horizon()).abs() > TIME_TOL {
        return Err(HedgeError::Mismatch(
            "strategy and path must share dimension and horizon".into(),
        ));
    }
    let gamma_t = strategy.value_at(upto);
    let s_t = path.evaluate(upto);
    let mut total: f64 = gamma_t.iter().zip(s_t).map(|(g, s)| g * s).sum();
    let mut prev = vec![0.0; strategy.dim];
    for (k, &b) in strategy.breakpoints.iter().enumerate() {
        if b >= upto {
            break;
        }
        let s_b = path.evaluate(b);
        for c in 0..strategy.dim {
            total -= s_b[c] * (strategy.values[k][c] - prev[c]);
        }
        prev = strategy.values[k].clone();
    }
    Ok(total)
}

/// Running minimum of `int_0^t gamma dS` over `t` in [0, T]: the
/// admissibility floor of the strategy along this path.
pub fn integral_floor(strategy: &DynamicStrategy, path: &StepPath) -> Result<f64, HedgeError> {
    if strategy.dim != path.dim() || (strategy.horizon - path.horizon()).abs() > TIME_TOL {
        return Err(HedgeError::Mismatch(
            "strategy and path must share dimension and horizon".into(),
        ));
    }
    let mut floor = 0.0f64;
    let mut running = 0.0;
    for (j, &u) in path.jump_times().iter().enumerate() {
        let gamma = strategy.value_at(u);
        for c in 0..path.dim() {
            running += gamma[c] * (path.values()[j + 1][c] - path.values()[j][c]);
        }
        floor = floor.min(running);
    }
    Ok(floor)
}

/// Finite function table on a dyadic value grid.
#[derive(Clone, Debug)]
pub struct GridTable {
    level: u32,
    entries: HashMap<Vec<i64>, f64>,
}

impl GridTable {
    pub fn new(level: u32) -> Self {
        GridTable {
            level,
            entries: HashMap::new(),
        }
    }

    /// Builds a table from a static hedge leg; every atom must sit on the
    /// value grid at `level`.
    pub fn from_leg(leg: &StaticLeg, level: u32) -> Result<Self, HedgeError> {
        let mut table = GridTable::new(level);
        for (atom, value) in leg.atoms.iter().zip(&leg.values) {
            table.insert(atom, *value)?;
        }
        Ok(table)
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        let scale = f64::from(2u32.pow(self.level.min(52)));
        x.iter().map(|v| (v * scale).round() as i64).collect()
    }

    pub fn insert(&mut self, atom: &[f64], value: f64) -> Result<(), HedgeError> {
        if !on_value_grid(atom, self.level) {
            return Err(HedgeError::OffGridAtom);
        }
        self.entries.insert(self.key(atom), value);
        Ok(())
    }

    /// Value at a point already on the table's grid.
    pub fn get_on_grid(&self, atom: &[f64]) -> Option<f64> {
        self.entries.get(&self.key(atom)).copied()
    }

    /// Value of the lifted function: project `x` up to the grid, look up.
    pub fn evaluate(&self, x: &[f64]) -> Option<f64> {
        let projected = ceil_project(x, self.level).ok()?;
        self.get_on_grid(&projected)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Expected value of the lifted function under `m`; None when an atom
    /// projects outside the table.
    pub fn price_lifted(&self, m: &DiscreteMeasure) -> Option<f64> {
        let mut total = 0.0;
        for (atom, w) in m.atoms().iter().zip(m.weights()) {
            total += w * self.evaluate(atom)?;
        }
        Some(total)
    }

    /// Expected value over a measure already supported on the grid.
    pub fn price_on_grid(&self, m: &DiscreteMeasure) -> Option<f64> {
        let mut total = 0.0;
        for (atom, w) in m.atoms().iter().zip(m.weights()) {
            total += w * self.get_on_grid(atom)?;
        }
        Some(total)
    }
}

/// A dual solution bound to its lattice, ready to hedge arbitrary paths.
pub struct LiftedPortfolio<'a> {
    lattice: &'a PathLattice,
    spec: GridSpec,
    dates: Vec<f64>,
    legs: Vec<GridTable>,
    duals: Vec<Vec<f64>>,
}

/// The lift of one path: the strategy to run, the lattice image that
/// produced it, and the image-side trade value for error accounting.
pub struct LiftedStrategy {
    pub strategy: DynamicStrategy,
    pub image: LatticeImage,
    /// Trade account of the dual strategy along the image path.
    pub discrete_integral: f64,
    /// The image left the enumerated lattice; positions there default to 0.
    pub off_lattice: bool,
}

impl<'a> LiftedPortfolio<'a> {
    /// Binds the static legs and group duals of a dual solve to the
    /// lattice that produced them.
    pub fn from_solution(
        lattice: &'a PathLattice,
        spec: GridSpec,
        solution: &MOTSolution,
    ) -> Result<Self, HedgeError> {
        if solution.static_legs.is_empty() {
            return Err(HedgeError::BadStrategy(
                "solution carries no static legs; run a dual solve".into(),
            ));
        }
        let mut legs = Vec::with_capacity(solution.static_legs.len());
        for leg in &solution.static_legs {
            legs.push(GridTable::from_leg(leg, spec.n())?);
        }
        Ok(LiftedPortfolio {
            lattice,
            spec,
            dates: solution.static_legs.iter().map(|l| l.date).collect(),
            legs,
            duals: solution.dynamic_duals.clone(),
        })
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn legs(&self) -> &[GridTable] {
        &self.legs
    }

    /// Static cost `sum_i g_i(pi(S_{T_i}))`; None off the tables.
    pub fn static_value(&self, path: &StepPath) -> Option<f64> {
        let mut total = 0.0;
        for (leg, date) in self.legs.iter().zip(&self.dates) {
            total += leg.evaluate(path.evaluate(*date))?;
        }
        Some(total)
    }

    /// The group duals as a step strategy along a lattice path, walking
    /// its prefix through the tree; positions after the first unmatched
    /// prefix are zero.
    fn duals_along(&self, canonical: &StepPath) -> (DynamicStrategy, f64, bool) {
        let nodes = self.lattice.nodes();
        let groups = self.lattice.groups();
        let mut node = 0usize;
        let mut off = false;
        let mut breakpoints = vec![0.0];
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut traded = 0.0;
        for (j, &t) in canonical.jump_times().iter().enumerate() {
            let target = &canonical.values()[j + 1];
            let hit = groups.iter().enumerate().find(|(_, g)| {
                g.node == node && (g.time - t).abs() <= LOOKUP_TOL
            });
            let (gid, group) = match hit {
                Some(x) => x,
                None => {
                    off = true;
                    break;
                }
            };
            let edge = group.edges.iter().find(|e| {
                nodes[e.child]
                    .level
                    .iter()
                    .zip(target)
                    .all(|(a, b)| (a - b).abs() <= LOOKUP_TOL)
            });
            let child = match edge {
                Some(e) => e.child,
                None => {
                    off = true;
                    break;
                }
            };
            values.push(self.duals[gid].clone());
            for c in 0..canonical.dim() {
                traded +=
                    self.duals[gid][c] * (nodes[child].level[c] - nodes[node].level[c]);
            }
            if t < canonical.horizon() - TIME_TOL {
                breakpoints.push(t);
            }
            node = child;
        }
        // hold nothing after the last matched jump
        values.push(vec![0.0; canonical.dim()]);
        values.truncate(breakpoints.len());
        let strategy = DynamicStrategy {
            dim: canonical.dim(),
            horizon: canonical.horizon(),
            breakpoints,
            values,
        };
        (strategy, traded, off)
    }

    /// Lifts the dual strategy onto an arbitrary positive path: position
    /// on the k-th exit-time interval equals the dual its lattice image
    /// trades at the matching shifted time.
    pub fn strategy_for(&self, path: &StepPath) -> Result<LiftedStrategy, HedgeError> {
        let mesh = self.spec.mesh();
        let (trace_times, image) = if self.dates.len() == 1 {
            let trace = stopping_times(path, mesh)?;
            let image = map_pi_hat(&trace, &self.spec)?;
            (trace.times().to_vec(), image)
        } else {
            let trace = multi_marginal_stopping_times(path, mesh, &self.dates)?;
            let image = multi_map_pi_hat(&trace, &self.spec)?;
            (trace.skeleton().0, image)
        };
        let (hat_strategy, traded, off) = self.duals_along(&image.path);
        let segments = trace_times.len() - 1;
        let mut values = Vec::with_capacity(segments);
        for k in 0..segments {
            values.push(hat_strategy.value_at(image.times[k + 1]));
        }
        let strategy = DynamicStrategy::new(
            path.dim(),
            path.horizon(),
            trace_times[..segments].to_vec(),
            values,
        )?;
        Ok(LiftedStrategy {
            strategy,
            image,
            discrete_integral: traded,
            off_lattice: off,
        })
    }
}

/// Pathwise super-replication audit of a portfolio.
#[derive(Clone, Debug)]
pub struct HedgeReport {
    /// Per-path slack `g + int gamma dS - (G - shift)`.
    pub slacks: Vec<f64>,
    pub min_slack: f64,
    /// Paths with slack below [`SLACK_TOL`].
    pub violations: usize,
    /// Worst running minimum of the trade account over all paths.
    pub integral_floor: f64,
    /// Paths whose image left the lattice or whose terminal projection
    /// missed the static tables; counted as violations.
    pub off_lattice: usize,
}

/// Re-verifies a lifted portfolio path by path against `G - shift`.
pub fn verify_superreplication(
    portfolio: &LiftedPortfolio,
    payoff: &dyn Payoff,
    paths: &[StepPath],
    shift: f64,
) -> Result<HedgeReport, HedgeError> {
    let mut slacks = Vec::with_capacity(paths.len());
    let mut min_slack = f64::INFINITY;
    let mut floor = 0.0f64;
    let mut off_lattice = 0usize;
    for path in paths {
        let lifted = portfolio.strategy_for(path)?;
        let static_part = portfolio.static_value(path);
        if lifted.off_lattice || static_part.is_none() {
            off_lattice += 1;
            slacks.push(f64::NEG_INFINITY);
            min_slack = f64::NEG_INFINITY;
            continue;
        }
        let integral = pathwise_integral(&lifted.strategy, path, path.horizon())?;
        let slack = static_part.unwrap() + integral - (payoff.evaluate(path) - shift);
        floor = floor.min(integral_floor(&lifted.strategy, path)?);
        min_slack = min_slack.min(slack);
        slacks.push(slack);
    }
    let violations = slacks.iter().filter(|s| **s < SLACK_TOL).count();
    Ok(HedgeReport {
        slacks,
        min_slack,
        violations,
        integral_floor: floor,
        off_lattice,
    })
}

/// Static part and running-maximum strategy dominating the p-th power of
/// the pathwise supremum.
pub struct PowerHedge {
    p: f64,
}

/// Pathwise audit of the power hedge along one path.
#[derive(Clone, Debug)]
pub struct PowerCertificate {
    pub strategy: DynamicStrategy,
    /// Worst slack of `g(S_t) + int_0^t gamma dS - rhs(t)` over the
    /// audited times, where rhs is the larger of `|S_t|_infty^p` and the
    /// running maximum of `|S_{tau_i}|_infty^p`.
    pub min_slack: f64,
    pub evaluations: usize,
}

impl PowerHedge {
    pub fn new(p: f64) -> Result<Self, HedgeError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(HedgeError::BadExponent(p));
        }
        Ok(PowerHedge { p })
    }

    /// `(p/(p-1))^p sum_c x_c^p - p d/(p-1)`.
    pub fn static_part(&self, x: &[f64]) -> f64 {
        let p = self.p;
        let lead = (p / (p - 1.0)).powf(p);
        let sum: f64 = x.iter().map(|v| v.powf(p)).sum();
        lead * sum - p * x.len() as f64 / (p - 1.0)
    }

    /// Strategy along one path: on the k-th exit-time interval hold, per
    /// coordinate, `-(p^2/(p-1))` times the (p-1)-th power of the running
    /// maximum of the sampled values.
    pub fn strategy_for(
        &self,
        path: &StepPath,
        eps: f64,
    ) -> Result<DynamicStrategy, HedgeError> {
        let trace = stopping_times(path, eps)?;
        let p = self.p;
        let coeff = -p * p / (p - 1.0);
        let m = trace.m();
        let dim = path.dim();
        let mut running = trace.levels()[0].clone();
        let mut values = Vec::with_capacity(m);
        for k in 0..m {
            for (r, v) in running.iter_mut().zip(&trace.levels()[k]) {
                *r = r.max(*v);
            }
            values.push(running.iter().map(|r| coeff * r.powf(p - 1.0)).collect());
        }
        DynamicStrategy::new(dim, path.horizon(), trace.times()[..m].to_vec(), values)
    }

    /// Audits the domination inequality at every jump of the path, every
    /// sampled time, and the horizon.
    pub fn verify(&self, path: &StepPath, eps: f64) -> Result<PowerCertificate, HedgeError> {
        let strategy = self.strategy_for(path, eps)?;
        let trace = stopping_times(path, eps)?;
        let mut times: Vec<f64> = trace
            .times()
            .iter()
            .chain(path.jump_times())
            .copied()
            .collect();
        times.push(path.horizon());
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        let p = self.p;
        let sup_p = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(*v)).powf(p);
        let mut min_slack = f64::INFINITY;
        for &t in &times {
            let lhs = self.static_part(path.evaluate(t))
                + pathwise_integral(&strategy, path, t)?;
            let sampled_max = trace
                .times()
                .iter()
                .zip(trace.levels())
                .take_while(|(u, _)| **u <= t + 1e-15)
                .map(|(_, level)| sup_p(level))
                .fold(0.0f64, f64::max);
            let rhs = sup_p(path.evaluate(t)).max(sampled_max);
            min_slack = min_slack.min(lhs - rhs);
        }
        Ok(PowerCertificate {
            strategy,
            min_slack,
            evaluations: times.len(),
        })
    }
}

/// Quadratic-variation hedge along one path: stopping times, skeleton
/// increments, the normalized strategy, and the audited inequality.
#[derive(Clone, Debug)]
pub struct QvCertificate {
    /// Exit times of the skeleton: date hits or moves of size `eps`.
    pub stop_times: Vec<f64>,
    /// Skeleton values at the stop times.
    pub stop_values: Vec<Vec<f64>>,
    /// Root of the summed squared skeleton increments.
    pub x_eps: f64,
    pub strategy: DynamicStrategy,
    /// Worst slack of the domination inequality over all prefixes.
    pub min_slack: f64,
    /// Largest Euclidean norm of a held position; at most sqrt(d).
    pub max_gamma: f64,
}

/// Builds and audits the quadratic-variation hedge. The skeleton is the
/// per-interval exit-time discretization of the path at radius
/// `skeleton_eps` with the given dates forced; the hedge stops at date
/// hits or skeleton moves of size `eps` and certifies, for every prefix,
///
/// ```text
/// int_0^{tau_i} gamma dS + 3 d max_{j<=i} |Pi_{tau_j}|_2
///     >= sqrt( sum_{j<=i} |Delta Pi_j|_2^2 ).
/// ```
pub fn burkholder_qv_hedge(
    eps: f64,
    path: &StepPath,
    dates: &[f64],
    skeleton_eps: f64,
) -> Result<QvCertificate, HedgeError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(HedgeError::BadRadius(eps));
    }
    if !(skeleton_eps > 0.0 && skeleton_eps.is_finite()) {
        return Err(HedgeError::BadRadius(skeleton_eps));
    }
    if dates.is_empty()
        || dates.windows(2).any(|w| w[0] >= w[1])
        || (dates.last().unwrap() - path.horizon()).abs() > TIME_TOL
    {
        return Err(HedgeError::Mismatch(
            "dates must increase strictly and end at the horizon".into(),
        ));
    }
    // per-interval exit-time skeleton with constant time caps and every
    // date a forced stop; constant caps keep the sample count at most
    // horizon / skeleton_eps plus the jump count
    let skeleton_trigger = skeleton_eps * (1.0 - 1e-9);
    let mut times = vec![0.0f64];
    let mut levels = vec![path.evaluate(0.0).to_vec()];
    for &end in dates {
        loop {
            let t = *times.last().unwrap();
            if t >= end {
                break;
            }
            let level = levels.last().unwrap().clone();
            let cap = (t + skeleton_eps).min(end);
            let mut next = cap;
            for &u in path.jump_times() {
                if u <= t {
                    continue;
                }
                if u > cap {
                    break;
                }
                if euclid_dist(path.evaluate(u), &level) >= skeleton_trigger {
                    next = u;
                    break;
                }
            }
            times.push(next);
            levels.push(path.evaluate(next).to_vec());
        }
    }
    let interior = &dates[..dates.len() - 1];
    let dim = path.dim();
    // stopping scan over the skeleton: a date hit or an eps-move stops
    let mut stop_times = vec![0.0f64];
    let mut stop_values = vec![levels[0].clone()];
    let mut cursor = 0usize;
    loop {
        let here = stop_values.last().unwrap().clone();
        let mut next: Option<usize> = None;
        for i in cursor + 1..times.len() {
            let is_date = interior.iter().any(|d| (times[i] - d).abs() <= TIME_TOL);
            if is_date || euclid_dist(&levels[i], &here) >= eps * (1.0 - 1e-12) {
                next = Some(i);
                break;
            }
        }
        match next {
            Some(i) => {
                stop_times.push(times[i]);
                stop_values.push(levels[i].clone());
                cursor = i;
                if i + 1 == times.len() {
                    break;
                }
            }
            None => {
                stop_times.push(*times.last().unwrap());
                stop_values.push(levels.last().unwrap().clone());
                break;
            }
        }
    }
    let m = stop_times.len() - 1;
    // per-coordinate normalizers: past squared increments plus the squared
    // running maximum of the sampled values
    let mut sum_sq = vec![0.0f64; dim];
    let mut max_sq: Vec<f64> = stop_values[0].iter().map(|v| v * v).collect();
    let mut values = Vec::with_capacity(m);
    let mut max_gamma = 0.0f64;
    for i in 1..=m {
        let prev = &stop_values[i - 1];
        let gamma: Vec<f64> = (0..dim)
            .map(|c| -prev[c] / (sum_sq[c] + max_sq[c]).sqrt())
            .collect();
        max_gamma = max_gamma.max(gamma.iter().map(|g| g * g).sum::<f64>().sqrt());
        values.push(gamma);
        for c in 0..dim {
            let d = stop_values[i][c] - prev[c];
            sum_sq[c] += d * d;
            max_sq[c] = max_sq[c].max(stop_values[i][c] * stop_values[i][c]);
        }
    }
    let strategy = DynamicStrategy::new(
        dim,
        path.horizon(),
        stop_times[..m].to_vec(),
        values,
    )?;
    // audit every prefix of the inequality
    let mut min_slack = f64::INFINITY;
    let mut qv = 0.0f64;
    let mut max_norm = stop_values[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    for i in 1..=m {
        let inc: f64 = (0..dim)
            .map(|c| {
                let d = stop_values[i][c] - stop_values[i - 1][c];
                d * d
            })
            .sum();
        qv += inc;
        let norm = stop_values[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        max_norm = max_norm.max(norm);
        let integral = pathwise_integral(&strategy, path, stop_times[i])?;
        let lhs = integral + 3.0 * dim as f64 * max_norm;
        min_slack = min_slack.min(lhs - qv.sqrt());
    }
    Ok(QvCertificate {
        stop_times,
        stop_values,
        x_eps: qv.sqrt(),
        strategy,
        min_slack,
        max_gamma,
    })
}

/// Value of date-jump legs: `sum_i beta_i . (S_{T_i} - S_{T_i-})`.
pub fn jump_leg_value(betas: &[Vec<f64>], path: &StepPath, dates: &[f64]) -> f64 {
    let mut total = 0.0;
    for (beta, &date) in betas.iter().zip(dates) {
        let after = path.evaluate(date);
        let before = path.left_limit(date);
        for (b, (a, pre)) in beta.iter().zip(after.iter().zip(before)) {
            total += b * (a - pre);
        }
    }
    total
}

/// The three claim reductions built from one payoff: a terminal-linear
/// shift making the claim nonnegative, a cap, and a floor.
pub struct Reductions {
    /// `G + C (1 + sum_c S_T^c)`.
    pub shifted: ShiftedPayoff,
    /// `G` capped at `C (d K + 1)`.
    pub capped: CappedPayoff,
    /// `G` floored at `-C (K + 1)`.
    pub floored: FlooredPayoff,
}

/// Builds the reductions; the factory is invoked once per wrapper.
pub fn payoff_reductions<F>(factory: F, c: f64, k: f64, dim: usize) -> Reductions
where
    F: Fn() -> Box<dyn Payoff>,
{
    Reductions {
        shifted: ShiftedPayoff {
            inner: factory(),
            constant: c,
        },
        capped: CappedPayoff {
            inner: factory(),
            cap: c * (dim as f64 * k + 1.0),
        },
        floored: FlooredPayoff {
            inner: factory(),
            floor: -c * (k + 1.0),
        },
    }
}
