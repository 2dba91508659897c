//! Martingale-optimal-transport solves over a finite path lattice.
//!
//! The primal maximizes the expected payoff over probability weights on the
//! lattice paths subject to the martingale equalities of every filtration
//! group and to prescribed distributions at one or more dates:
//!
//! ```text
//! maximize   sum_p Q_p G_p
//! subject to sum_p Q_p = 1,  Q >= 0,
//!            sum_{e in g} Q_e (level_child - level_node) = 0   per group,
//!            Q(S_{T_i} = v) = mu_i(v)                          per date, atom.
//! ```
//!
//! The super-hedging side is solved through a penalized twin of the primal
//! whose linear-programming dual is exactly the semi-static problem with a
//! box |gamma| <= n on the dynamic positions: unit defect mass may be
//! bought at price n, so a row price above n is never useful. Static legs
//! and node prices are read off the row duals and then re-verified path by
//! path, so a reported hedge never rests on solver internals alone.
//!
//! Relaxed solves replace the hard constraints by l1 budgets c/n on the
//! martingale defect and the marginal deviation, reproducing the relaxed
//! market used to squeeze the discrete values; an empty relaxed market is
//! reported as value zero with a flag rather than an error.

use thiserror::Error;

use crate::lp::{self, LPStatus, LinearProgram, RowSense, Sense};
use crate::measures::{convex_order_check, l1_marginal_deviation, DiscreteMeasure, MeasureError};
use crate::payoffs::Payoff;
use crate::tree::PathLattice;

/// Relative certified-gap tolerance for optimal solves.
pub const GAP_TOL: f64 = 1e-7;
/// Martingale-defect tolerance in exact mode.
pub const DEFECT_TOL: f64 = 1e-8;
/// Marginal-deviation tolerance in exact mode.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Atom-to-lattice-value matching tolerance.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MOTError {
    #[error("payoff vector has length {got}, expected {want}")]
    BadPayoff { got: usize, want: usize },
    #[error("marginal dates must be increasing, positive, and end at the horizon")]
    BadDates,
    #[error("marginal {0} has wrong dimension")]
    BadMarginal(usize),
    #[error(
        "marginal atom {atom:?} at date index {date} is not reachable on the truncated \
         lattice; this is a truncation artifact, not an arbitrage statement about the \
         original marginal"
    )]
    TruncationInfeasible { date: usize, atom: Vec<f64> },
    #[error(
        "no martingale measure on the truncated lattice matches the marginal system \
         (every atom is individually reachable, but the joint constraints are \
         incompatible, e.g. a projected marginal mean drifting off the initial level); \
         this is a truncation artifact, not an arbitrage statement about the original \
         marginals"
    )]
    TruncationJointlyInfeasible,
    #[error("marginals at date indices {0} and {1} are not in convex order")]
    ConvexOrderViolation(usize, usize),
    #[error("relaxed mode requires a positive budget")]
    BadBudget,
    #[error("gamma bound must be positive and finite")]
    BadGammaBound,
    #[error("re-verification of the extracted hedge failed: worst slack {0}")]
    HedgeVerification(f64),
    #[error("linear program failed: {0}")]
    Lp(#[from] lp::LPError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// How the constraints are imposed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolveMode {
    Exact,
    /// Budgets `c / level` on defect and marginal deviation.
    Relaxed { c: f64, level: u32 },
}

/// Static hedge leg at one date: one value per distinct reachable level.
#[derive(Clone, Debug)]
pub struct StaticLeg {
    pub date: f64,
    pub atoms: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl StaticLeg {
    /// Value at `x`, matched within [`ATOM_TOL`]; None when off the table.
    pub fn lookup(&self, x: &[f64]) -> Option<f64> {
        self.atoms
            .iter()
            .position(|a| a.iter().zip(x).all(|(p, q)| (p - q).abs() <= ATOM_TOL))
            .map(|i| self.values[i])
    }
}

#[derive(Clone, Debug)]
pub struct MOTSolution {
    pub value: f64,
    /// Primal weights per lattice path.
    pub weights: Vec<f64>,
    /// Static legs per marginal date (cash folded into the last leg).
    pub static_legs: Vec<StaticLeg>,
    /// Dynamic dual per (group, coordinate), aligned with `lattice.groups()`.
    pub dynamic_duals: Vec<Vec<f64>>,
    /// Certified duality gap of the underlying linear program.
    pub gap: f64,
    /// Total martingale defect of the returned weights.
    pub defect: f64,
    /// Largest l1 marginal deviation over the dates.
    pub marginal_deviation: f64,
    /// Dual solves only: the solution buys martingale-defect mass, i.e.
    /// the gamma box strictly binds and raises the super-hedging price
    /// above the unboxed value. A dual that merely touches |gamma| = n
    /// without purchasing defect does not set this.
    pub gamma_box_active: bool,
    /// Relaxed mode only: the budgeted market admits no measure.
    pub infeasible_relaxation: bool,
    /// Worst super-replication slack of the re-verified hedge (dual solves).
    pub worst_hedge_slack: Option<f64>,
    pub iterations: usize,
    pub pivot_hash: u64,
}

/// A pricing problem bound to a lattice.
pub struct MOTProblem<'a> {
    lattice: &'a PathLattice,
    payoff: Vec<f64>,
    marginals: Vec<(f64, DiscreteMeasure)>,
    gamma_bound: f64,
    mode: SolveMode,
}

/// Distinct values taken by the lattice paths at one date, with the paths
/// attaining each and the target mass (zero off the marginal's support).
struct DateClasses {
    values: Vec<Vec<f64>>,
    members: Vec<Vec<usize>>,
    target: Vec<f64>,
}

impl<'a> MOTProblem<'a> {
    pub fn new(
        lattice: &'a PathLattice,
        payoff: Vec<f64>,
        marginals: Vec<(f64, DiscreteMeasure)>,
        gamma_bound: f64,
    ) -> Result<Self, MOTError> {
        if payoff.len() != lattice.paths().len() {
            return Err(MOTError::BadPayoff {
                got: payoff.len(),
                want: lattice.paths().len(),
            });
        }
        if marginals.is_empty()
            || marginals.windows(2).any(|w| w[0].0 >= w[1].0)
            || marginals[0].0 <= 0.0
            || (marginals.last().unwrap().0 - lattice.horizon()).abs() > ATOM_TOL
        {
            return Err(MOTError::BadDates);
        }
        for (i, (_, m)) in marginals.iter().enumerate() {
            if m.dim() != lattice.dim() {
                return Err(MOTError::BadMarginal(i));
            }
        }
        if !(gamma_bound.is_finite() && gamma_bound > 0.0) {
            return Err(MOTError::BadGammaBound);
        }
        Ok(MOTProblem {
            lattice,
            payoff,
            marginals,
            gamma_bound,
            mode: SolveMode::Exact,
        })
    }

    pub fn with_mode(mut self, mode: SolveMode) -> Result<Self, MOTError> {
        if let SolveMode::Relaxed { c, level } = mode {
            if !(c > 0.0 && c.is_finite()) || level == 0 {
                return Err(MOTError::BadBudget);
            }
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn lattice(&self) -> &PathLattice {
        self.lattice
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    /// Groups the paths by their (exact) value at each marginal date and
    /// attaches the target masses. Errors when a marginal atom is
    /// unreachable, unless `allow_unreachable` (relaxed mode) in which case
    /// the atom becomes a class with no members.
    fn date_classes(&self, allow_unreachable: bool) -> Result<Vec<DateClasses>, MOTError> {
        let mut out = Vec::with_capacity(self.marginals.len());
        for (di, (date, measure)) in self.marginals.iter().enumerate() {
            let mut values: Vec<Vec<f64>> = Vec::new();
            let mut members: Vec<Vec<usize>> = Vec::new();
            for (p, path) in self.lattice.paths().iter().enumerate() {
                let v = path.evaluate(*date).to_vec();
                let hit = values.iter().position(|w| {
                    w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= ATOM_TOL)
                });
                match hit {
                    Some(k) => members[k].push(p),
                    None => {
                        values.push(v);
                        members.push(vec![p]);
                    }
                }
            }
            let mut target = vec![0.0; values.len()];
            for (atom, weight) in measure.atoms().iter().zip(measure.weights()) {
                let hit = values.iter().position(|w| {
                    w.iter().zip(atom).all(|(a, b)| (a - b).abs() <= ATOM_TOL)
                });
                match hit {
                    Some(k) => target[k] += weight,
                    None if allow_unreachable => {
                        values.push(atom.clone());
                        members.push(Vec::new());
                        target.push(*weight);
                    }
                    None => {
                        return Err(MOTError::TruncationInfeasible {
                            date: di,
                            atom: atom.clone(),
                        })
                    }
                }
            }
            out.push(DateClasses {
                values,
                members,
                target,
            });
        }
        Ok(out)
    }

    /// Whether a group's jump time coincides with a marginal date (such
    /// positions are date-boundary trades, kept outside the gamma box).
    fn is_date_group(&self, gid: usize) -> bool {
        let t = self.lattice.groups()[gid].time;
        self.marginals
            .iter()
            .take(self.marginals.len().saturating_sub(1))
            .any(|(date, _)| (t - date).abs() <= ATOM_TOL)
    }

    /// The exact-marginal primal program: variables are path weights, rows
    /// are total mass, per-(group, coordinate) martingale balance, and
    /// per-(date, class) marginal matching. Exposed so the polytope can be
    /// audited against independent solvers.
    pub fn primal_lp(&self) -> Result<LinearProgram, MOTError> {
        Ok(self.primal_parts()?.1)
    }

    fn primal_parts(&self) -> Result<(Vec<DateClasses>, LinearProgram), MOTError> {
        let classes = self.date_classes(false)?;
        let lattice = self.lattice;
        let n_paths = lattice.paths().len();
        let dim = lattice.dim();
        let groups = lattice.groups();
        let mut prog = LinearProgram::new(Sense::Maximize, n_paths);
        for (p, g) in self.payoff.iter().enumerate() {
            prog.set_objective(p, *g);
        }
        // mass row
        prog.add_row((0..n_paths).map(|p| (p, 1.0)).collect(), RowSense::Eq, 1.0);
        // martingale rows per (group, coordinate)
        for group in groups {
            let node_level = &lattice.nodes()[group.node].level;
            for c in 0..dim {
                let entries: Vec<(usize, f64)> = group
                    .edges
                    .iter()
                    .map(|e| (e.path, lattice.nodes()[e.child].level[c] - node_level[c]))
                    .collect();
                prog.add_row(entries, RowSense::Eq, 0.0);
            }
        }
        // marginal rows per (date, class)
        for cls in &classes {
            for (k, paths) in cls.members.iter().enumerate() {
                let entries: Vec<(usize, f64)> = paths.iter().map(|&p| (p, 1.0)).collect();
                prog.add_row(entries, RowSense::Eq, cls.target[k]);
            }
        }
        Ok((classes, prog))
    }

    /// Exact-marginal primal value and optimal weights.
    pub fn solve_primal(&self) -> Result<MOTSolution, MOTError> {
        if let SolveMode::Relaxed { .. } = self.mode {
            return self.solve_relaxed();
        }
        let (classes, prog) = self.primal_parts()?;
        let lattice = self.lattice;
        let dim = lattice.dim();
        let groups = lattice.groups();
        let sol = lp::solve(&prog)?;
        match sol.status {
            LPStatus::Optimal => {}
            LPStatus::Infeasible => return Err(MOTError::TruncationJointlyInfeasible),
            LPStatus::Unbounded => unreachable!("bounded by construction"),
        }
        let report = lp::certify(&prog, &sol);
        let weights = sol.x.clone();
        // duals: 1 mass row, then group rows, then class rows
        let mut dynamic_duals = Vec::with_capacity(groups.len());
        for gid in 0..groups.len() {
            dynamic_duals.push(sol.duals[1 + gid * dim..1 + (gid + 1) * dim].to_vec());
        }
        let static_legs =
            self.extract_static_legs(&classes, &sol.duals[1 + groups.len() * dim..], sol.duals[0]);
        let diag = self.diagnostics(&weights, &classes)?;
        Ok(MOTSolution {
            value: sol.objective,
            weights,
            static_legs,
            dynamic_duals,
            gap: report.gap,
            defect: diag.0,
            marginal_deviation: diag.1,
            gamma_box_active: false,
            infeasible_relaxation: false,
            worst_hedge_slack: None,
            iterations: sol.iterations,
            pivot_hash: sol.pivot_hash,
        })
    }

    /// Super-hedging side: minimal static cost of a semi-static portfolio
    /// super-replicating the payoff on every lattice path, with the dynamic
    /// part boxed at the gamma bound except on date-boundary groups.
    ///
    /// Solved as the penalized primal (defect mass purchasable at the box
    /// price), whose row prices are exactly the portfolio; the returned
    /// hedge is re-verified against every path before being reported.
    pub fn solve_dual_superhedge(&self) -> Result<MOTSolution, MOTError> {
        let classes = self.date_classes(false)?;
        let lattice = self.lattice;
        let n_paths = lattice.paths().len();
        let dim = lattice.dim();
        let groups = lattice.groups();
        let boxed: Vec<bool> = (0..groups.len()).map(|g| !self.is_date_group(g)).collect();
        let n_boxed: usize = boxed.iter().filter(|b| **b).count();
        // variables: Q, then (u+, u-) per boxed (group, coordinate)
        let n_vars = n_paths + 2 * n_boxed * dim;
        let mut prog = LinearProgram::new(Sense::Maximize, n_vars);
        for (p, g) in self.payoff.iter().enumerate() {
            prog.set_objective(p, *g);
        }
        for j in n_paths..n_vars {
            prog.set_objective(j, -self.gamma_bound);
        }
        prog.add_row((0..n_paths).map(|p| (p, 1.0)).collect(), RowSense::Eq, 1.0);
        let mut slot = n_paths;
        for (gid, group) in groups.iter().enumerate() {
            let node_level = &lattice.nodes()[group.node].level;
            for c in 0..dim {
                let mut entries: Vec<(usize, f64)> = group
                    .edges
                    .iter()
                    .map(|e| (e.path, lattice.nodes()[e.child].level[c] - node_level[c]))
                    .collect();
                if boxed[gid] {
                    entries.push((slot, -1.0));
                    entries.push((slot + 1, 1.0));
                    slot += 2;
                }
                prog.add_row(entries, RowSense::Eq, 0.0);
            }
        }
        for cls in &classes {
            for (k, paths) in cls.members.iter().enumerate() {
                let entries: Vec<(usize, f64)> = paths.iter().map(|&p| (p, 1.0)).collect();
                prog.add_row(entries, RowSense::Eq, cls.target[k]);
            }
        }
        let sol = lp::solve(&prog)?;
        match sol.status {
            LPStatus::Optimal => {}
            LPStatus::Infeasible => return Err(MOTError::TruncationJointlyInfeasible),
            LPStatus::Unbounded => unreachable!("bounded by construction"),
        }
        let report = lp::certify(&prog, &sol);
        let weights = sol.x[..n_paths].to_vec();
        let mut dynamic_duals: Vec<Vec<f64>> = Vec::with_capacity(groups.len());
        for gid in 0..groups.len() {
            let raw = &sol.duals[1 + gid * dim..1 + (gid + 1) * dim];
            let clamp = if boxed[gid] {
                self.gamma_bound
            } else {
                f64::INFINITY
            };
            dynamic_duals.push(raw.iter().map(|v| v.clamp(-clamp, clamp)).collect());
        }
        let static_legs =
            self.extract_static_legs(&classes, &sol.duals[1 + groups.len() * dim..], sol.duals[0]);
        // re-verify super-replication from scratch on every path
        let mut worst = f64::INFINITY;
        for (p, _path) in lattice.paths().iter().enumerate() {
            let mut hedge = 0.0;
            for (leg, cls) in static_legs.iter().zip(&classes) {
                let k = cls
                    .members
                    .iter()
                    .position(|paths| paths.contains(&p))
                    .expect("every path belongs to one class per date");
                hedge += leg.values[k];
            }
            for (gid, group) in groups.iter().enumerate() {
                for e in &group.edges {
                    if e.path == p {
                        let node_level = &lattice.nodes()[group.node].level;
                        for c in 0..dim {
                            hedge += dynamic_duals[gid][c]
                                * (lattice.nodes()[e.child].level[c] - node_level[c]);
                        }
                    }
                }
            }
            worst = worst.min(hedge - self.payoff[p]);
        }
        let scale = 1.0 + sol.objective.abs();
        if worst < -1e-8 * scale {
            return Err(MOTError::HedgeVerification(worst));
        }
        let diag = self.diagnostics(&weights, &classes)?;
        // any optimal basis keeps row duals inside the box (the penalty
        // columns' reduced costs force |y| <= n), so boundary contact is
        // not informative; purchased defect mass is
        let box_active = sol.x[n_paths..].iter().any(|u| *u > 1e-9);
        Ok(MOTSolution {
            value: sol.objective,
            weights,
            static_legs,
            dynamic_duals,
            gap: report.gap,
            defect: diag.0,
            marginal_deviation: diag.1,
            gamma_box_active: box_active,
            infeasible_relaxation: false,
            worst_hedge_slack: Some(worst),
            iterations: sol.iterations,
            pivot_hash: sol.pivot_hash,
        })
    }

    /// Relaxed market: probability weights with defect and deviation
    /// budgets `c / level` each. An empty market yields value 0, flagged.
    pub fn solve_relaxed(&self) -> Result<MOTSolution, MOTError> {
        let SolveMode::Relaxed { c, level } = self.mode else {
            return Err(MOTError::BadBudget);
        };
        let budget = c / level as f64;
        let classes = self.date_classes(true)?;
        let lattice = self.lattice;
        let n_paths = lattice.paths().len();
        let dim = lattice.dim();
        let groups = lattice.groups();
        let n_classes: usize = classes.iter().map(|c| c.values.len()).sum();
        // variables: Q, defect slacks (a+, a-) per (group, coord),
        // deviation slacks (b+, b-) per class
        let a0 = n_paths;
        let b0 = a0 + 2 * groups.len() * dim;
        let n_vars = b0 + 2 * n_classes;
        let mut prog = LinearProgram::new(Sense::Maximize, n_vars);
        for (p, g) in self.payoff.iter().enumerate() {
            prog.set_objective(p, *g);
        }
        prog.add_row((0..n_paths).map(|p| (p, 1.0)).collect(), RowSense::Eq, 1.0);
        let mut slot = a0;
        for group in groups {
            let node_level = &lattice.nodes()[group.node].level;
            for c in 0..dim {
                let mut entries: Vec<(usize, f64)> = group
                    .edges
                    .iter()
                    .map(|e| (e.path, lattice.nodes()[e.child].level[c] - node_level[c]))
                    .collect();
                entries.push((slot, -1.0));
                entries.push((slot + 1, 1.0));
                slot += 2;
                prog.add_row(entries, RowSense::Eq, 0.0);
            }
        }
        let mut slot = b0;
        for cls in &classes {
            for (k, paths) in cls.members.iter().enumerate() {
                let mut entries: Vec<(usize, f64)> =
                    paths.iter().map(|&p| (p, 1.0)).collect();
                entries.push((slot, -1.0));
                entries.push((slot + 1, 1.0));
                slot += 2;
                prog.add_row(entries, RowSense::Eq, cls.target[k]);
            }
        }
        // budgets
        prog.add_row(
            (a0..b0).map(|j| (j, 1.0)).collect(),
            RowSense::Le,
            budget,
        );
        prog.add_row(
            (b0..n_vars).map(|j| (j, 1.0)).collect(),
            RowSense::Le,
            budget,
        );
        let sol = lp::solve(&prog)?;
        if sol.status == LPStatus::Infeasible {
            return Ok(MOTSolution {
                value: 0.0,
                weights: vec![0.0; n_paths],
                static_legs: Vec::new(),
                dynamic_duals: Vec::new(),
                gap: 0.0,
                defect: 0.0,
                marginal_deviation: 0.0,
                gamma_box_active: false,
                infeasible_relaxation: true,
                worst_hedge_slack: None,
                iterations: sol.iterations,
                pivot_hash: sol.pivot_hash,
            });
        }
        let report = lp::certify(&prog, &sol);
        let weights = sol.x[..n_paths].to_vec();
        let diag = self.diagnostics(&weights, &classes)?;
        Ok(MOTSolution {
            value: sol.objective,
            weights,
            static_legs: Vec::new(),
            dynamic_duals: Vec::new(),
            gap: report.gap,
            defect: diag.0,
            marginal_deviation: diag.1,
            gamma_box_active: false,
            infeasible_relaxation: false,
            worst_hedge_slack: None,
            iterations: sol.iterations,
            pivot_hash: sol.pivot_hash,
        })
    }

    /// Multi-marginal gate: checks unit means and pairwise convex order of
    /// the marginals, then solves the primal with all date constraints.
    pub fn solve_multi_marginal(&self) -> Result<MOTSolution, MOTError> {
        for i in 0..self.marginals.len().saturating_sub(1) {
            let report = convex_order_check(&self.marginals[i].1, &self.marginals[i + 1].1)?;
            if !report.ordered {
                return Err(MOTError::ConvexOrderViolation(i, i + 1));
            }
        }
        self.solve_primal()
    }

    fn extract_static_legs(
        &self,
        classes: &[DateClasses],
        class_duals: &[f64],
        cash: f64,
    ) -> Vec<StaticLeg> {
        let mut legs = Vec::with_capacity(classes.len());
        let mut offset = 0;
        for (di, ((date, _), cls)) in self.marginals.iter().zip(classes).enumerate() {
            let mut values: Vec<f64> =
                class_duals[offset..offset + cls.values.len()].to_vec();
            offset += cls.values.len();
            if di + 1 == self.marginals.len() {
                for v in values.iter_mut() {
                    *v += cash;
                }
            }
            legs.push(StaticLeg {
                date: *date,
                atoms: cls.values.clone(),
                values,
            });
        }
        legs
    }

    /// (total martingale defect, worst l1 marginal deviation) of weights.
    fn diagnostics(
        &self,
        weights: &[f64],
        classes: &[DateClasses],
    ) -> Result<(f64, f64), MOTError> {
        let defect = self
            .lattice
            .martingale_defect(weights)
            .expect("weights sized by construction")
            .total;
        let mut worst = 0.0f64;
        for cls in classes {
            let mut dev = 0.0;
            for (k, paths) in cls.members.iter().enumerate() {
                let mass: f64 = paths.iter().map(|&p| weights[p]).sum();
                dev += (mass - cls.target[k]).abs();
            }
            worst = worst.max(dev);
        }
        Ok((defect, worst))
    }
}

/// Evaluates a payoff on every lattice path.
pub fn evaluate_on_lattice(payoff: &dyn Payoff, lattice: &PathLattice) -> Vec<f64> {
    lattice.paths().iter().map(|p| payoff.evaluate(p)).collect()
}

/// Convenience wrapper: exact primal value for a terminal marginal.
pub fn value_of_marginal(
    lattice: &PathLattice,
    payoff: &[f64],
    marginal: &DiscreteMeasure,
    gamma_bound: f64,
) -> Result<f64, MOTError> {
    let problem = MOTProblem::new(
        lattice,
        payoff.to_vec(),
        vec![(lattice.horizon(), marginal.clone())],
        gamma_bound,
    )?;
    Ok(problem.solve_primal()?.value)
}

/// Realized law of the path values at a date under the given weights.
/// Weights below `cut` are dropped before normalization.
pub fn realized_marginal(
    lattice: &PathLattice,
    weights: &[f64],
    date: f64,
    cut: f64,
) -> Result<DiscreteMeasure, MeasureError> {
    let mut atoms = Vec::new();
    let mut mass = Vec::new();
    for (p, w) in lattice.paths().iter().zip(weights) {
        if *w > cut {
            atoms.push(p.evaluate(date).to_vec());
            mass.push(*w);
        }
    }
    let total: f64 = mass.iter().sum();
    for w in mass.iter_mut() {
        *w /= total;
    }
    DiscreteMeasure::new(atoms, mass)
}

/// How far the realized terminal law sits from a target, in l1.
pub fn terminal_deviation(
    lattice: &PathLattice,
    weights: &[f64],
    target: &DiscreteMeasure,
) -> Result<f64, MeasureError> {
    let realized = realized_marginal(lattice, weights, lattice.horizon(), 0.0)?;
    l1_marginal_deviation(&realized, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::lp_vertex_oracle;
    use crate::paths::StepPath;

    fn path1(horizon: f64, jumps: &[(f64, f64)]) -> StepPath {
        let times = jumps.iter().map(|j| j.0).collect();
        let mut values = vec![vec![1.0]];
        values.extend(jumps.iter().map(|j| vec![j.1]));
        StepPath::new(1, horizon, times, values).unwrap()
    }

    fn one_step_lattice() -> PathLattice {
        PathLattice::build(vec![
            path1(1.0, &[(0.5, 0.5)]),
            path1(1.0, &[(0.5, 1.5)]),
        ])
        .unwrap()
    }

    fn two_step_lattice() -> PathLattice {
        PathLattice::build(vec![
            path1(1.0, &[(0.25, 1.5), (0.5, 2.0)]),
            path1(1.0, &[(0.25, 1.5), (0.5, 1.0)]),
            path1(1.0, &[(0.25, 0.5), (0.5, 1.0)]),
            path1(1.0, &[(0.25, 0.5), (0.5, 0.25)]),
        ])
        .unwrap()
    }

    fn half_half() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![vec![0.5], vec![1.5]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn one_step_unique_coupling() {
        let lattice = one_step_lattice();
        let payoff: Vec<f64> = lattice
            .paths()
            .iter()
            .map(|p| (p.terminal()[0] - 1.0f64).abs())
            .collect();
        let problem =
            MOTProblem::new(&lattice, payoff, vec![(1.0, half_half())], 3.0).unwrap();
        let sol = problem.solve_primal().unwrap();
        assert!((sol.value - 0.5).abs() < 1e-9);
        assert!(sol.defect <= DEFECT_TOL);
        assert!(sol.marginal_deviation <= MARGINAL_TOL);
        let dual = problem.solve_dual_superhedge().unwrap();
        assert!((dual.value - 0.5).abs() < 1e-7);
        assert!(dual.worst_hedge_slack.unwrap() >= -1e-10);
    }

    #[test]
    fn terminal_payoffs_price_statically() {
        let lattice = two_step_lattice();
        // marginal realized by a genuine martingale measure on the tree
        let marginal = DiscreteMeasure::new(
            vec![vec![2.0], vec![1.0], vec![0.25]],
            vec![0.25, 5.0 / 12.0, 1.0 / 3.0],
        )
        .unwrap();
        let g = |x: &[f64]| (x[0] - 0.75f64).max(0.0);
        let payoff: Vec<f64> = lattice.paths().iter().map(|p| g(p.terminal())).collect();
        let value = value_of_marginal(&lattice, &payoff, &marginal, 5.0).unwrap();
        let static_price = crate::measures::price_static(g, &marginal);
        assert!(
            (value - static_price).abs() < 1e-9,
            "value {value} vs static {static_price}"
        );
    }

    #[test]
    fn lookback_value_matches_vertex_oracle() {
        let lattice = two_step_lattice();
        let marginal = DiscreteMeasure::new(
            vec![vec![2.0], vec![1.0], vec![0.25]],
            vec![0.25, 5.0 / 12.0, 1.0 / 3.0],
        )
        .unwrap();
        let payoff: Vec<f64> = lattice
            .paths()
            .iter()
            .map(|p| p.max_coordinate(0) - p.terminal()[0])
            .collect();
        let problem =
            MOTProblem::new(&lattice, payoff.clone(), vec![(1.0, marginal)], 5.0).unwrap();
        let sol = problem.solve_primal().unwrap();
        // replicate the LP and enumerate polytope vertices independently
        let mut prog = LinearProgram::new(Sense::Maximize, 4);
        for (p, g) in payoff.iter().enumerate() {
            prog.set_objective(p, *g);
        }
        prog.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], RowSense::Eq, 1.0);
        // root group: levels 1.5 / 0.5
        prog.add_row(
            vec![(0, 0.5), (1, 0.5), (2, -0.5), (3, -0.5)],
            RowSense::Eq,
            0.0,
        );
        // up group: 1.5 -> {2, 1}
        prog.add_row(vec![(0, 0.5), (1, -0.5)], RowSense::Eq, 0.0);
        // down group: 0.5 -> {1, 0.25}
        prog.add_row(vec![(2, 0.5), (3, -0.25)], RowSense::Eq, 0.0);
        // marginal rows
        prog.add_row(vec![(0, 1.0)], RowSense::Eq, 0.25);
        prog.add_row(vec![(1, 1.0), (2, 1.0)], RowSense::Eq, 5.0 / 12.0);
        prog.add_row(vec![(3, 1.0)], RowSense::Eq, 1.0 / 3.0);
        let vertex = lp_vertex_oracle(&prog).unwrap().expect("feasible");
        assert!(
            (sol.value - vertex.objective).abs() < 1e-9,
            "lp {} vs vertex {}",
            sol.value,
            vertex.objective
        );
        let dual = problem.solve_dual_superhedge().unwrap();
        assert!((dual.value - sol.value).abs() <= GAP_TOL * (1.0 + sol.value.abs()));
        assert!(!dual.gamma_box_active, "box should be slack here");
        assert!(dual.worst_hedge_slack.unwrap() >= -1e-10);
    }

    #[test]
    fn unreachable_atom_reports_truncation() {
        let lattice = one_step_lattice();
        let marginal =
            DiscreteMeasure::new(vec![vec![0.5], vec![1.7]], vec![0.5, 0.5]).unwrap();
        let payoff = vec![0.0, 0.0];
        let problem =
            MOTProblem::new(&lattice, payoff, vec![(1.0, marginal)], 3.0).unwrap();
        assert!(matches!(
            problem.solve_primal(),
            Err(MOTError::TruncationInfeasible { date: 0, .. })
        ));
    }

    #[test]
    fn relaxed_value_dominates_exact_and_shrinks_with_level() {
        let lattice = two_step_lattice();
        let marginal = DiscreteMeasure::new(
            vec![vec![2.0], vec![1.0], vec![0.25]],
            vec![0.25, 5.0 / 12.0, 1.0 / 3.0],
        )
        .unwrap();
        let payoff: Vec<f64> = lattice
            .paths()
            .iter()
            .map(|p| p.max_coordinate(0) - p.terminal()[0])
            .collect();
        let exact = MOTProblem::new(
            &lattice,
            payoff.clone(),
            vec![(1.0, marginal.clone())],
            5.0,
        )
        .unwrap()
        .solve_primal()
        .unwrap();
        let mut last = f64::INFINITY;
        for level in 2..=6u32 {
            let sol = MOTProblem::new(
                &lattice,
                payoff.clone(),
                vec![(1.0, marginal.clone())],
                5.0,
            )
            .unwrap()
            .with_mode(SolveMode::Relaxed { c: 0.4, level })
            .unwrap()
            .solve_relaxed()
            .unwrap();
            assert!(!sol.infeasible_relaxation);
            assert!(
                sol.value >= exact.value - 1e-9,
                "relaxed {} under exact {}",
                sol.value,
                exact.value
            );
            assert!(sol.value <= last + 1e-9, "value rose at level {level}");
            assert!(sol.defect <= 0.4 / level as f64 + DEFECT_TOL);
            last = sol.value;
        }
    }

    #[test]
    fn relaxed_reports_empty_market() {
        let lattice = one_step_lattice();
        // far-away atom forces deviation mass 1 against a tiny budget
        let marginal = DiscreteMeasure::dirac(vec![7.0]).unwrap();
        let payoff = vec![1.0, 1.0];
        let sol = MOTProblem::new(&lattice, payoff, vec![(1.0, marginal)], 3.0)
            .unwrap()
            .with_mode(SolveMode::Relaxed { c: 0.01, level: 4 })
            .unwrap()
            .solve_relaxed()
            .unwrap();
        assert!(sol.infeasible_relaxation);
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn two_date_solve_passes_gate_and_duality() {
        let paths = vec![
            path1(1.0, &[(0.5, 0.75), (0.75, 0.5)]),
            path1(1.0, &[(0.5, 0.75), (0.75, 1.0)]),
            path1(1.0, &[(0.5, 1.25), (0.75, 1.0)]),
            path1(1.0, &[(0.5, 1.25), (0.75, 1.5)]),
        ];
        let lattice = PathLattice::build(paths).unwrap();
        let mu1 = DiscreteMeasure::new(vec![vec![0.75], vec![1.25]], vec![0.5, 0.5]).unwrap();
        let mu2 = DiscreteMeasure::new(
            vec![vec![0.5], vec![1.0], vec![1.5]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        let payoff: Vec<f64> = lattice
            .paths()
            .iter()
            .map(|p| p.max_coordinate(0) - p.terminal()[0])
            .collect();
        let problem = MOTProblem::new(
            &lattice,
            payoff.clone(),
            vec![(0.5, mu1.clone()), (1.0, mu2.clone())],
            4.0,
        )
        .unwrap();
        let sol = problem.solve_multi_marginal().unwrap();
        assert!(sol.defect <= DEFECT_TOL);
        assert!(sol.marginal_deviation <= MARGINAL_TOL);
        let dual = problem.solve_dual_superhedge().unwrap();
        assert!((dual.value - sol.value).abs() <= GAP_TOL * (1.0 + sol.value.abs()));
        assert_eq!(dual.static_legs.len(), 2);
        // reversed marginals violate convex order
        let reversed = MOTProblem::new(
            &lattice,
            payoff,
            vec![(0.5, mu2), (1.0, mu1)],
            4.0,
        )
        .unwrap();
        assert!(matches!(
            reversed.solve_multi_marginal(),
            Err(MOTError::ConvexOrderViolation(0, 1))
        ));
    }

    #[test]
    fn gamma_box_binds_when_increments_are_small() {
        // hedging a payoff on the 0.25-value needs |gamma| ~ 50 against
        // +-0.01 increments; boxing at 4 makes defect purchases optimal
        let paths = vec![
            path1(1.0, &[(0.25, 1.01), (0.5, 1.5)]),
            path1(1.0, &[(0.25, 1.01), (0.5, 0.5)]),
            path1(1.0, &[(0.25, 0.99), (0.5, 1.5)]),
            path1(1.0, &[(0.25, 0.99), (0.5, 0.5)]),
        ];
        let lattice = PathLattice::build(paths).unwrap();
        let payoff: Vec<f64> = lattice
            .paths()
            .iter()
            .map(|p| if p.evaluate(0.25)[0] > 1.0 { 1.0 } else { 0.0 })
            .collect();
        let problem =
            MOTProblem::new(&lattice, payoff, vec![(1.0, half_half())], 4.0).unwrap();
        let exact = problem.solve_primal().unwrap();
        assert!((exact.value - 0.5).abs() < 1e-9);
        let dual = problem.solve_dual_superhedge().unwrap();
        assert!(dual.gamma_box_active, "tight box must buy defect mass");
        assert!(
            dual.value > exact.value + 0.1,
            "boxed price {} should exceed exact {}",
            dual.value,
            exact.value
        );
        assert!(dual.value <= 1.0 + 1e-9);
        assert!(dual.worst_hedge_slack.unwrap() >= -1e-10);
    }

    #[test]
    fn shifting_payoff_by_terminal_leg_moves_value_linearly() {
        let lattice = two_step_lattice();
        let marginal = DiscreteMeasure::new(
            vec![vec![2.0], vec![1.0], vec![0.25]],
            vec![0.25, 5.0 / 12.0, 1.0 / 3.0],
        )
        .unwrap();
        assert!((marginal.mean()[0] - 1.0).abs() < 1e-12);
        let base: Vec<f64> = lattice
            .paths()
            .iter()
            .map(|p| p.terminal()[0] - p.min_coordinate(0))
            .collect();
        let c = 1.0;
        let shifted: Vec<f64> = lattice
            .paths()
            .iter()
            .zip(&base)
            .map(|(p, g)| g + c * (1.0 + p.terminal()[0]))
            .collect();
        let v0 = value_of_marginal(&lattice, &base, &marginal, 5.0).unwrap();
        let v1 = value_of_marginal(&lattice, &shifted, &marginal, 5.0).unwrap();
        assert!(
            (v1 - v0 - 2.0 * c).abs() < 1e-8,
            "shift moved value by {}",
            v1 - v0
        );
    }
}
