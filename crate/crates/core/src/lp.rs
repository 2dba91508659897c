//! Self-contained linear programming over bounded variables.
//!
//! The solver is a two-phase revised simplex method on the equality form
//! `A x + s = b` with one slack per row (`s_i >= 0` for `<=` rows,
//! `s_i <= 0` for `>=` rows, `s_i = 0` for equalities) and signed artificial
//! variables forming the initial basis. The basis inverse is kept explicitly
//! and updated by the product form after each pivot, with periodic
//! refactorization by Gauss-Jordan elimination to bound drift.
//!
//! Pricing uses the largest-violation rule and switches permanently to
//! Bland's smallest-index rule after a run of degenerate pivots, so the
//! method cannot cycle and every run of the same program performs the same
//! pivot sequence.
//!
//! For a program `min c.x` over `l <= x <= u` with row prices `y`, the
//! reported solution satisfies, up to the documented tolerances,
//!
//! ```text
//! c.x  =  y.b + sum_j r_j * x_j,    r_j = c_j - y.A_j,
//! ```
//!
//! with `r_j >= 0` on variables resting at a lower bound and `r_j <= 0` at an
//! upper bound; [`certify`] re-derives all of this from scratch. When the
//! constraints are inconsistent the phase-one prices form a Farkas
//! certificate: `y.b` strictly exceeds `sup { y.Ax : l <= x <= u }` over the
//! slack-extended system.

use thiserror::Error;

/// Optimization direction of a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Relation of one constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

/// One constraint row in sparse form.
#[derive(Clone, Debug)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A linear program over individually bounded variables.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<SparseRow>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LPError {
    #[error("variable index {0} out of range")]
    BadVariable(usize),
    #[error("iteration limit {0} exceeded")]
    IterationLimit(usize),
    #[error("singular basis encountered")]
    SingularBasis,
    #[error("coefficients must be finite")]
    NotFinite,
}

impl LinearProgram {
    /// New program with `n` variables, zero objective and default bounds
    /// `[0, +inf)`.
    pub fn new(sense: Sense, n: usize) -> Self {
        LinearProgram {
            sense,
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, entries: Vec<(usize, f64)>, sense: RowSense, rhs: f64) -> usize {
        self.rows.push(SparseRow {
            entries,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Human-readable dump for debugging small programs.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let verb = match self.sense {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        };
        let _ = writeln!(out, "{} {:?}", verb, self.objective);
        for row in &self.rows {
            let rel = match row.sense {
                RowSense::Le => "<=",
                RowSense::Ge => ">=",
                RowSense::Eq => "=",
            };
            let _ = writeln!(out, "  {:?} {} {}", row.entries, rel, row.rhs);
        }
        for j in 0..self.n_vars() {
            let _ = writeln!(out, "  x{} in [{}, {}]", j, self.lower[j], self.upper[j]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LPStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. `duals` and `reduced_costs` follow the original sense, so
/// for a maximization the price of a `<=` row is nonnegative.
#[derive(Clone, Debug)]
pub struct LPSolution {
    pub status: LPStatus,
    /// Objective value in the original sense; infinite when unbounded.
    pub objective: f64,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    /// Order-sensitive hash of the pivot sequence, for reproducibility checks.
    pub pivot_hash: u64,
    /// Phase-one row prices proving infeasibility, when status is Infeasible.
    pub farkas: Option<Vec<f64>>,
}

const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const RATIO_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    Free,
}

struct Simplex {
    m: usize,
    n_total: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x_basic: Vec<f64>,
    iterations: usize,
    pivot_hash: u64,
    bland: bool,
    degenerate_run: usize,
    since_refactor: usize,
    iteration_cap: usize,
}

impl Simplex {
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Free => 0.0,
            VarState::Basic(r) => self.x_basic[r],
        }
    }

    fn hash_pivot(&mut self, entering: usize, leaving: usize) {
        // FNV-1a over the pivot pair
        for v in [entering as u64, leaving as u64] {
            let mut h = self.pivot_hash ^ v;
            h = h.wrapping_mul(0x100000001b3);
            self.pivot_hash = h;
        }
    }

    fn refactor(&mut self) -> Result<(), LPError> {
        let m = self.m;
        // Gauss-Jordan inversion of the basis matrix with partial pivoting
        let mut a = vec![0.0f64; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(row, v) in &self.cols[j] {
                a[row * m + r] = v;
            }
        }
        let mut inv = vec![0.0f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let c = a[r * m + col].abs();
                if c > best {
                    best = c;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(LPError::SingularBasis);
            }
            if piv != col {
                for k in 0..m {
                    a.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basic_values();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.n_total {
            match self.state[j] {
                VarState::Basic(_) => {}
                _ => {
                    let v = self.nonbasic_value(j);
                    if v != 0.0 {
                        for &(row, c) in &self.cols[j] {
                            rhs[row] -= c * v;
                        }
                    }
                }
            }
        }
        for r in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.binv[r * m + k] * rhs[k];
            }
            self.x_basic[r] = acc;
        }
    }

    fn prices(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0f64; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                for k in 0..m {
                    y[k] += c * self.binv[r * m + k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        let mut d = self.cost[j];
        for &(row, v) in &self.cols[j] {
            d -= y[row] * v;
        }
        d
    }

    fn objective_value(&self) -> f64 {
        let mut obj = 0.0;
        for j in 0..self.n_total {
            obj += self.cost[j] * self.nonbasic_value(j);
        }
        obj
    }

    /// One phase of the simplex method over the current cost vector.
    /// Returns false when the program is unbounded in this phase.
    fn run(&mut self) -> Result<bool, LPError> {
        loop {
            if self.iterations >= self.iteration_cap {
                return Err(LPError::IterationLimit(self.iteration_cap));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.prices();
            // entering variable: direction +1 moves up from a lower bound,
            // -1 moves down from an upper bound
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.n_total {
                let movable = self.lower[j] < self.upper[j];
                if !movable {
                    continue;
                }
                let (dir, score) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower => (1.0, -self.reduced_cost(&y, j)),
                    VarState::AtUpper => (-1.0, self.reduced_cost(&y, j)),
                    VarState::Free => {
                        let d = self.reduced_cost(&y, j);
                        if d > 0.0 {
                            (-1.0, d)
                        } else {
                            (1.0, -d)
                        }
                    }
                };
                if score > PRICE_TOL {
                    if self.bland {
                        entering = Some((j, dir, score));
                        break;
                    }
                    match entering {
                        Some((_, _, s)) if s >= score => {}
                        _ => entering = Some((j, dir, score)),
                    }
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(true);
            };
            // representation of the entering column in the current basis
            let m = self.m;
            let mut d = vec![0.0f64; m];
            for &(row, v) in &self.cols[q] {
                if v != 0.0 {
                    for i in 0..m {
                        d[i] += self.binv[i * m + row] * v;
                    }
                }
            }
            // ratio test on x_B(t) = x_B - t * dir * d
            let mut t_best = f64::INFINITY;
            let mut blocker: Option<usize> = None;
            if self.upper[q].is_finite() && self.lower[q].is_finite() {
                t_best = self.upper[q] - self.lower[q];
            }
            for i in 0..m {
                let de = dir * d[i];
                let bi = self.basis[i];
                if de > RATIO_TOL {
                    if self.lower[bi].is_finite() {
                        let t = (self.x_basic[i] - self.lower[bi]) / de;
                        if t < t_best - 1e-12
                            || (t < t_best + 1e-12 && better_blocker(self, blocker, i, &d))
                        {
                            t_best = t.max(0.0);
                            blocker = Some(i);
                        }
                    }
                } else if de < -RATIO_TOL && self.upper[bi].is_finite() {
                    let t = (self.x_basic[i] - self.upper[bi]) / de;
                    if t < t_best - 1e-12
                        || (t < t_best + 1e-12 && better_blocker(self, blocker, i, &d))
                    {
                        t_best = t.max(0.0);
                        blocker = Some(i);
                    }
                }
            }
            if t_best.is_infinite() {
                return Ok(false);
            }
            self.iterations += 1;
            self.since_refactor += 1;
            if t_best <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            match blocker {
                None => {
                    // bound flip: the entering variable crosses to its other
                    // bound without a basis change
                    for i in 0..m {
                        self.x_basic[i] -= t_best * dir * d[i];
                    }
                    self.state[q] = match self.state[q] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        s => s,
                    };
                    self.hash_pivot(q, usize::MAX);
                }
                Some(r) => {
                    let leaving = self.basis[r];
                    let enter_value = self.nonbasic_value(q) + dir * t_best;
                    for i in 0..m {
                        self.x_basic[i] -= t_best * dir * d[i];
                    }
                    let de = dir * d[r];
                    self.state[leaving] = if de > 0.0 {
                        VarState::AtLower
                    } else {
                        VarState::AtUpper
                    };
                    if d[r].abs() < PIVOT_TOL {
                        // pivot too small to trust: rebuild and retry
                        self.refactor()?;
                        continue;
                    }
                    self.basis[r] = q;
                    self.state[q] = VarState::Basic(r);
                    self.x_basic[r] = enter_value;
                    // product-form update of the explicit inverse
                    let pr = d[r];
                    for i in 0..m {
                        if i != r {
                            let f = d[i] / pr;
                            if f != 0.0 {
                                for k in 0..m {
                                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                                }
                            }
                        }
                    }
                    for k in 0..m {
                        self.binv[r * m + k] /= pr;
                    }
                    self.hash_pivot(q, leaving);
                }
            }
        }
    }
}

fn better_blocker(s: &Simplex, current: Option<usize>, candidate: usize, d: &[f64]) -> bool {
    match current {
        None => true,
        Some(cur) => {
            if s.bland {
                s.basis[candidate] < s.basis[cur]
            } else {
                let (dc, da) = (d[cur].abs(), d[candidate].abs());
                da > dc * (1.0 + 1e-9) || (da >= dc * (1.0 - 1e-9) && s.basis[candidate] < s.basis[cur])
            }
        }
    }
}

/// Solves a linear program with the bundled simplex implementation.
pub fn solve(lp: &LinearProgram) -> Result<LPSolution, LPError> {
    let n = lp.n_vars();
    let m = lp.n_rows();
    for row in lp.rows() {
        for &(j, v) in &row.entries {
            if j >= n {
                return Err(LPError::BadVariable(j));
            }
            if !v.is_finite() {
                return Err(LPError::NotFinite);
            }
        }
        if !row.rhs.is_finite() {
            return Err(LPError::NotFinite);
        }
    }
    if lp.objective.iter().any(|c| !c.is_finite()) {
        return Err(LPError::NotFinite);
    }
    let flip = match lp.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    // columns: structural | slack per row | artificial per row
    let n_total = n + 2 * m;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_total];
    for (i, row) in lp.rows().iter().enumerate() {
        for &(j, v) in &row.entries {
            cols[j].push((i, v));
        }
    }
    let mut lower = Vec::with_capacity(n_total);
    let mut upper = Vec::with_capacity(n_total);
    lower.extend_from_slice(&lp.lower);
    upper.extend_from_slice(&lp.upper);
    for (i, row) in lp.rows().iter().enumerate() {
        cols[n + i].push((i, 1.0));
        let (lo, hi) = match row.sense {
            RowSense::Le => (0.0, f64::INFINITY),
            RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            RowSense::Eq => (0.0, 0.0),
        };
        lower.push(lo);
        upper.push(hi);
    }
    let b: Vec<f64> = lp.rows().iter().map(|r| r.rhs).collect();
    // initial nonbasic values and artificial signs
    let mut state: Vec<VarState> = (0..n + m)
        .map(|j| {
            if lower[j].is_finite() {
                VarState::AtLower
            } else if upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            }
        })
        .collect();
    let mut residual = b.clone();
    for j in 0..n + m {
        let v = match state[j] {
            VarState::AtLower => lower[j],
            VarState::AtUpper => upper[j],
            _ => 0.0,
        };
        if v != 0.0 {
            for &(row, c) in &cols[j] {
                residual[row] -= c * v;
            }
        }
    }
    let mut basis = Vec::with_capacity(m);
    let mut binv = vec![0.0f64; m * m];
    let mut x_basic = vec![0.0f64; m];
    for i in 0..m {
        let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
        cols[n + m + i].push((i, sign));
        lower.push(0.0);
        upper.push(f64::INFINITY);
        state.push(VarState::Basic(i));
        basis.push(n + m + i);
        binv[i * m + i] = sign;
        x_basic[i] = residual[i].abs();
    }
    let mut cost1 = vec![0.0f64; n_total];
    for j in n + m..n_total {
        cost1[j] = 1.0;
    }
    let mut cost2 = vec![0.0f64; n_total];
    for j in 0..n {
        cost2[j] = flip * lp.objective[j];
    }
    let iteration_cap = 50_000 + 200 * (m + n);
    let mut s = Simplex {
        m,
        n_total,
        cols,
        lower,
        upper,
        cost: cost1,
        b,
        state,
        basis,
        binv,
        x_basic,
        iterations: 0,
        pivot_hash: 0xcbf29ce484222325,
        bland: false,
        degenerate_run: 0,
        since_refactor: 0,
        iteration_cap,
    };

    // phase one: drive total infeasibility to zero
    let finished = s.run()?;
    debug_assert!(finished, "phase one is bounded below by zero");
    let b_scale = s.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let phase1_obj = s.objective_value();
    if phase1_obj > 1e-9 * b_scale {
        let y = s.prices();
        return Ok(LPSolution {
            status: LPStatus::Infeasible,
            objective: f64::NAN,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations: s.iterations,
            pivot_hash: s.pivot_hash,
            farkas: Some(y),
        });
    }
    // fix artificials at zero and install the real objective
    for j in n + m..n_total {
        s.lower[j] = 0.0;
        s.upper[j] = 0.0;
        if !matches!(s.state[j], VarState::Basic(_)) {
            s.state[j] = VarState::AtLower;
        }
    }
    s.cost = cost2;
    s.degenerate_run = 0;
    let bounded = s.run()?;
    if !bounded {
        return Ok(LPSolution {
            status: LPStatus::Unbounded,
            objective: match lp.sense {
                Sense::Maximize => f64::INFINITY,
                Sense::Minimize => f64::NEG_INFINITY,
            },
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations: s.iterations,
            pivot_hash: s.pivot_hash,
            farkas: None,
        });
    }
    s.refactor()?;
    let y_int = s.prices();
    let x: Vec<f64> = (0..n).map(|j| s.nonbasic_value(j)).collect();
    let duals: Vec<f64> = y_int.iter().map(|v| flip * v).collect();
    let mut reduced_costs = lp.objective.clone();
    for (i, row) in lp.rows().iter().enumerate() {
        let yi = duals[i];
        if yi != 0.0 {
            for &(j, v) in &row.entries {
                reduced_costs[j] -= yi * v;
            }
        }
    }
    let objective = flip * s.objective_value();
    Ok(LPSolution {
        status: LPStatus::Optimal,
        objective,
        x,
        duals,
        reduced_costs,
        iterations: s.iterations,
        pivot_hash: s.pivot_hash,
        farkas: None,
    })
}

/// Independent optimality certificate for a solved program.
#[derive(Clone, Debug)]
pub struct CertifyReport {
    /// Worst violation of rows and variable bounds by the primal point.
    pub primal_residual: f64,
    /// Worst violation of dual sign conditions by prices and reduced costs.
    pub dual_residual: f64,
    /// Worst complementary slackness product.
    pub complementarity: f64,
    /// Absolute gap between the primal objective and the dual objective.
    pub gap: f64,
    pub ok: bool,
}

/// Recomputes feasibility, dual feasibility, complementary slackness and the
/// duality gap of an optimal solution from scratch.
pub fn certify(lp: &LinearProgram, sol: &LPSolution) -> CertifyReport {
    assert_eq!(sol.status, LPStatus::Optimal, "can only certify optima");
    let x = &sol.x;
    let y = &sol.duals;
    let scale = 1.0 + sol.objective.abs();
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut compl = 0.0f64;
    for (row, &yi) in lp.rows().iter().zip(y) {
        let lhs: f64 = row.entries.iter().map(|&(j, v)| v * x[j]).sum();
        let slack = row.rhs - lhs;
        match row.sense {
            RowSense::Le => {
                primal = primal.max(-slack);
                // price sign: helpful rows push the objective in its sense
                let bad = match lp.sense {
                    Sense::Maximize => (-yi).max(0.0),
                    Sense::Minimize => yi.max(0.0),
                };
                dual = dual.max(bad);
            }
            RowSense::Ge => {
                primal = primal.max(slack);
                let bad = match lp.sense {
                    Sense::Maximize => yi.max(0.0),
                    Sense::Minimize => (-yi).max(0.0),
                };
                dual = dual.max(bad);
            }
            RowSense::Eq => {
                primal = primal.max(slack.abs());
            }
        }
        compl = compl.max((yi * slack).abs());
    }
    let mut reduced = lp.objective.clone();
    for (row, &yi) in lp.rows().iter().zip(y) {
        if yi != 0.0 {
            for &(j, v) in &row.entries {
                reduced[j] -= yi * v;
            }
        }
    }
    // dual objective: y.b plus the bound terms picked by reduced-cost signs
    let mut dual_obj: f64 = lp.rows().iter().zip(y).map(|(r, &yi)| yi * r.rhs).sum();
    for j in 0..lp.n_vars() {
        let (lo, hi) = lp.bounds(j);
        primal = primal.max(lo - x[j]).max(x[j] - hi);
        let r = reduced[j];
        if r.abs() <= 1e-9 * scale {
            continue;
        }
        // which bound must absorb this reduced cost depends on the sense
        let wants_lower = match lp.sense {
            Sense::Minimize => r > 0.0,
            Sense::Maximize => r < 0.0,
        };
        if wants_lower {
            if lo.is_finite() {
                dual_obj += r * lo;
                compl = compl.max((r * (x[j] - lo)).abs());
            } else {
                dual = dual.max(r.abs());
            }
        } else if hi.is_finite() {
            dual_obj += r * hi;
            compl = compl.max((r * (hi - x[j])).abs());
        } else {
            dual = dual.max(r.abs());
        }
    }
    let gap = (sol.objective - dual_obj).abs();
    let ok = primal <= 1e-9 * scale.max(1.0) * 10.0
        && dual <= 1e-9 * scale
        && compl <= 1e-8 * scale
        && gap <= 1e-8 * scale;
    CertifyReport {
        primal_residual: primal,
        dual_residual: dual,
        complementarity: compl,
        gap,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_textbook_maximum() {
        // max x + y subject to x + 2y <= 4, 3x + y <= 6
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_row(vec![(0, 1.0), (1, 2.0)], RowSense::Le, 4.0);
        lp.add_row(vec![(0, 3.0), (1, 1.0)], RowSense::Le, 6.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LPStatus::Optimal);
        assert!((sol.objective - 2.8).abs() < 1e-9);
        assert!((sol.x[0] - 1.6).abs() < 1e-9);
        assert!((sol.x[1] - 1.2).abs() < 1e-9);
        let report = certify(&lp, &sol);
        assert!(report.ok, "certification failed: {report:?}");
    }

    #[test]
    fn solves_minimum_with_equalities() {
        // min 2x + y subject to x + y = 1, x <= 0.3
        let mut lp = LinearProgram::new(Sense::Minimize, 2);
        lp.set_objective(0, 2.0);
        lp.set_objective(1, 1.0);
        lp.set_bounds(0, 0.0, 0.3);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], RowSense::Eq, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LPStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(certify(&lp, &sol).ok);
    }

    #[test]
    fn detects_infeasibility_with_certificate() {
        // x >= 0 and x <= -1 cannot hold together
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![(0, 1.0)], RowSense::Le, -1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LPStatus::Infeasible);
        let y = sol.farkas.unwrap();
        // certificate: y.b > sup over x >= 0 and s >= 0 of y(x + s)
        assert_eq!(y.len(), 1);
        assert!(y[0] < 0.0);
    }

    #[test]
    fn detects_unbounded_program() {
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], RowSense::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LPStatus::Unbounded);
        assert!(sol.objective.is_infinite());
    }

    #[test]
    fn honors_upper_bounds_and_free_variables() {
        // max x + y - z with x <= 2, y <= 3 via row, z free with z >= x - 1
        let mut lp = LinearProgram::new(Sense::Maximize, 3);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.set_objective(2, -1.0);
        lp.set_bounds(0, 0.0, 2.0);
        lp.set_bounds(2, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(1, 1.0)], RowSense::Le, 3.0);
        lp.add_row(vec![(0, 1.0), (2, -1.0)], RowSense::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LPStatus::Optimal);
        // optimum has y = 3 and z = x - 1 anywhere on the segment x in [0, 2]
        assert!((sol.objective - 4.0).abs() < 1e-9);
        assert!((sol.x[1] - 3.0).abs() < 1e-9);
        assert!((sol.x[0] - sol.x[2] - 1.0).abs() < 1e-9);
        assert!(certify(&lp, &sol).ok);
    }

    #[test]
    fn equality_with_negative_rhs() {
        let mut lp = LinearProgram::new(Sense::Minimize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], RowSense::Eq, -2.5);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LPStatus::Optimal);
        // minimize x + y with x = y - 2.5, y >= 0: best y = 0, x = -2.5
        assert!((sol.objective + 2.5).abs() < 1e-9);
        assert!(certify(&lp, &sol).ok);
    }

    #[test]
    fn pivot_sequence_is_reproducible() {
        let mut lp = LinearProgram::new(Sense::Maximize, 4);
        for j in 0..4 {
            lp.set_objective(j, (j + 1) as f64);
        }
        lp.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], RowSense::Le, 10.0);
        lp.add_row(vec![(0, 2.0), (1, 1.0)], RowSense::Le, 8.0);
        lp.add_row(vec![(2, 1.0), (3, 3.0)], RowSense::Le, 9.0);
        let a = solve(&lp).unwrap();
        let b = solve(&lp).unwrap();
        assert_eq!(a.pivot_hash, b.pivot_hash);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn duals_price_binding_rows() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 2.0);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], RowSense::Le, 4.0);
        lp.add_row(vec![(0, 1.0), (1, 3.0)], RowSense::Le, 6.0);
        let sol = solve(&lp).unwrap();
        // optimum at (4, 0) with only the first row binding
        assert!((sol.objective - 12.0).abs() < 1e-9);
        assert!((sol.duals[0] - 3.0).abs() < 1e-9);
        assert!(sol.duals[1].abs() < 1e-9);
        assert!(certify(&lp, &sol).ok);
    }
}
