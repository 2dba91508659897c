//! Finitely supported probability measures on the positive orthant.
//!
//! Provides the static pricing functional, the upward grid projection of a
//! marginal, the Prokhorov metric (exact on small supports, bisection with
//! max-flow feasibility checks otherwise), the `l1` deviation between
//! weight vectors, moment utilities, and a constructive convex-order test.
//!
//! Convex order is certified both ways: a mean-preserving kernel from `a`
//! to `b` when the order holds (Strassen), and otherwise a convex
//! piecewise-linear function `phi` with
//!
//! ```text
//! integral phi da > integral phi db,
//! ```
//!
//! read off an infeasibility certificate of the kernel program.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid;
use crate::lp::{self, LPStatus, LinearProgram, RowSense, Sense};

/// Mass and duplicate-atom tolerance.
pub const MASS_TOL: f64 = 1e-12;
/// Mean tolerance for the unit first-moment check.
pub const MEAN_TOL: f64 = 1e-9;
/// Coupling row tolerances.
pub const COUPLING_TOL: f64 = 1e-8;
/// Largest combined support size accepted by the exact Prokhorov mode.
pub const PROKHOROV_EXACT_LIMIT: usize = 12;
/// Guaranteed accuracy of the bisection Prokhorov mode.
pub const PROKHOROV_BISECT_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measure needs at least one atom")]
    Empty,
    #[error("atom {0} has wrong dimension")]
    BadAtom(usize),
    #[error("weight {0} is negative or not finite")]
    BadWeight(usize),
    #[error("total mass {0} is not 1")]
    BadMass(f64),
    #[error("dimension mismatch between measures")]
    DimMismatch,
    #[error("combined support {0} exceeds the exact Prokhorov limit")]
    SupportTooLarge(usize),
    #[error("numerical failure in the convex-order program: {0}")]
    ConvexOrderNumerics(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] lp::LPError),
    #[error(transparent)]
    Grid(#[from] grid::GridError),
}

#[derive(Clone, Debug, Deserialize)]
struct RawMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// A probability measure with finitely many atoms.
///
/// Construction canonicalizes: duplicate atoms (within [`MASS_TOL`]
/// coordinatewise) are merged, zero-weight atoms dropped, and atoms sorted
/// lexicographically, so equal measures have equal representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = MeasureError;

    fn try_from(raw: RawMeasure) -> Result<Self, MeasureError> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(MeasureError::Empty);
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(MeasureError::BadAtom(0));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != dim || a.iter().any(|v| !v.is_finite()) {
                return Err(MeasureError::BadAtom(i));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(MeasureError::BadWeight(i));
            }
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::BadMass(mass));
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| {
            atoms[i]
                .partial_cmp(&atoms[j])
                .expect("finite atoms are comparable")
        });
        let mut merged_atoms: Vec<Vec<f64>> = Vec::new();
        let mut merged_weights: Vec<f64> = Vec::new();
        for idx in order {
            let same = merged_atoms.last().is_some_and(|prev: &Vec<f64>| {
                prev.iter()
                    .zip(&atoms[idx])
                    .all(|(p, q)| (p - q).abs() <= MASS_TOL)
            });
            if same {
                *merged_weights.last_mut().unwrap() += weights[idx];
            } else {
                merged_atoms.push(atoms[idx].clone());
                merged_weights.push(weights[idx]);
            }
        }
        let kept: Vec<usize> = (0..merged_atoms.len())
            .filter(|&i| merged_weights[i] > 0.0)
            .collect();
        if kept.is_empty() {
            return Err(MeasureError::Empty);
        }
        Ok(DiscreteMeasure {
            atoms: kept.iter().map(|&i| merged_atoms[i].clone()).collect(),
            weights: kept.iter().map(|&i| merged_weights[i]).collect(),
        })
    }

    /// Point mass at `x`.
    pub fn dirac(x: Vec<f64>) -> Result<Self, MeasureError> {
        DiscreteMeasure::new(vec![x], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinatewise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (mc, ac) in m.iter_mut().zip(a) {
                *mc += w * ac;
            }
        }
        m
    }

    /// Convex mixture `(1-t) a + t b` of two measures on the same space.
    pub fn mix(a: &DiscreteMeasure, b: &DiscreteMeasure, t: f64) -> Result<Self, MeasureError> {
        if a.dim() != b.dim() {
            return Err(MeasureError::DimMismatch);
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(MeasureError::BadWeight(0));
        }
        let mut atoms = a.atoms.clone();
        let mut weights: Vec<f64> = a.weights.iter().map(|w| w * (1.0 - t)).collect();
        atoms.extend(b.atoms.iter().cloned());
        weights.extend(b.weights.iter().map(|w| w * t));
        // the two mass errors can add up; rescale to restore exact unit mass
        let mass: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= mass;
        }
        DiscreteMeasure::new(atoms, weights)
    }
}

/// Integral of `g` against the measure.
pub fn price_static(g: impl Fn(&[f64]) -> f64, m: &DiscreteMeasure) -> f64 {
    m.atoms
        .iter()
        .zip(&m.weights)
        .map(|(a, w)| w * g(a))
        .sum()
}

/// Whether every coordinate mean equals 1 within [`MEAN_TOL`]; also returns
/// the per-coordinate deviations `mean - 1`.
pub fn check_unit_first_moment(m: &DiscreteMeasure) -> (bool, Vec<f64>) {
    let dev: Vec<f64> = m.mean().into_iter().map(|v| v - 1.0).collect();
    (dev.iter().all(|d| d.abs() <= MEAN_TOL), dev)
}

/// Push-forward under the upward dyadic projection at `level`; colliding
/// preimages are merged.
pub fn project_measure(m: &DiscreteMeasure, level: u32) -> Result<DiscreteMeasure, MeasureError> {
    let mut atoms = Vec::with_capacity(m.len());
    for a in &m.atoms {
        atoms.push(grid::ceil_project(a, level)?);
    }
    DiscreteMeasure::new(atoms, m.weights.clone())
}

/// `p`-th moment of the Euclidean norm.
pub fn pth_moment(m: &DiscreteMeasure, p: f64) -> f64 {
    price_static(
        |a| a.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p),
        m,
    )
}

/// The `l1` distance between the weight vectors over the union of supports.
/// Atoms are matched within [`MASS_TOL`] coordinatewise.
pub fn l1_marginal_deviation(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    if a.dim() != b.dim() {
        return Err(MeasureError::DimMismatch);
    }
    let matches = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= MASS_TOL);
    let mut total = 0.0;
    let mut b_used = vec![false; b.len()];
    for (xa, wa) in a.atoms.iter().zip(&a.weights) {
        match b.atoms.iter().position(|xb| matches(xa, xb)) {
            Some(j) => {
                b_used[j] = true;
                total += (wa - b.weights[j]).abs();
            }
            None => total += wa,
        }
    }
    for (j, used) in b_used.iter().enumerate() {
        if !used {
            total += b.weights[j];
        }
    }
    Ok(total)
}

/// Mean-preserving perturbation: each atom keeps `1 - fraction` of its
/// weight and sends `fraction/2` to each of the two atoms shifted by
/// `+-offset` in the first coordinate. Shifted atoms must stay positive.
///
/// For `fraction <= offset` the Prokhorov distance to the original is of
/// the order of `fraction`, so halving the fraction halves the distance.
pub fn mean_preserving_spread(
    m: &DiscreteMeasure,
    fraction: f64,
    offset: f64,
) -> Result<DiscreteMeasure, MeasureError> {
    if !(0.0..=1.0).contains(&fraction) || !fraction.is_finite() {
        return Err(MeasureError::BadWeight(0));
    }
    if !(offset > 0.0 && offset.is_finite()) {
        return Err(MeasureError::BadAtom(0));
    }
    let mut atoms = Vec::with_capacity(3 * m.len());
    let mut weights = Vec::with_capacity(3 * m.len());
    for (atom, w) in m.atoms.iter().zip(&m.weights) {
        if atom[0] - offset <= 0.0 {
            return Err(MeasureError::BadAtom(0));
        }
        atoms.push(atom.clone());
        weights.push(w * (1.0 - fraction));
        let mut up = atom.clone();
        up[0] += offset;
        atoms.push(up);
        weights.push(w * fraction / 2.0);
        let mut down = atom.clone();
        down[0] -= offset;
        atoms.push(down);
        weights.push(w * fraction / 2.0);
    }
    DiscreteMeasure::new(atoms, weights)
}

fn cross_distances(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Vec<Vec<f64>> {
    a.atoms
        .iter()
        .map(|x| {
            b.atoms
                .iter()
                .map(|y| {
                    x.iter()
                        .zip(y)
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect()
}

/// One-sided Prokhorov check by exhaustive subsets: for every subset `C` of
/// the support of `from`, from(C) <= to(open delta-inflation of C) + delta.
fn subsets_satisfy(
    from_w: &[f64],
    to_w: &[f64],
    dist: impl Fn(usize, usize) -> f64,
    delta: f64,
) -> bool {
    let n = from_w.len();
    for mask in 1u32..(1 << n) {
        let mut mass_from = 0.0;
        for (i, w) in from_w.iter().enumerate() {
            if mask & (1 << i) != 0 {
                mass_from += w;
            }
        }
        let mut mass_to = 0.0;
        for (j, w) in to_w.iter().enumerate() {
            let near = (0..n).any(|i| mask & (1 << i) != 0 && dist(i, j) < delta);
            if near {
                mass_to += w;
            }
        }
        if mass_from > mass_to + delta + 1e-15 {
            return false;
        }
    }
    true
}

fn prokhorov_holds_exact(a: &DiscreteMeasure, b: &DiscreteMeasure, d: &[Vec<f64>], delta: f64) -> bool {
    subsets_satisfy(&a.weights, &b.weights, |i, j| d[i][j], delta)
        && subsets_satisfy(&b.weights, &a.weights, |j, i| d[i][j], delta)
}

/// Exact Prokhorov distance for small supports: the infimum is located in
/// the finite candidate set of pairwise atom distances and subset-mass
/// gaps, and each candidate is verified exhaustively at `delta + 1e-12`.
pub fn prokhorov_exact(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    if a.dim() != b.dim() {
        return Err(MeasureError::DimMismatch);
    }
    let combined = a.len() + b.len();
    if combined > PROKHOROV_EXACT_LIMIT {
        return Err(MeasureError::SupportTooLarge(combined));
    }
    let d = cross_distances(a, b);
    let mut candidates: Vec<f64> = vec![0.0, 1.0];
    for row in &d {
        candidates.extend(row.iter().copied());
    }
    // subset-mass gaps a(A) - b(J) in both orders
    let sub_masses = |w: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(1 << w.len());
        for mask in 0u32..(1 << w.len()) {
            let mut s = 0.0;
            for (i, wi) in w.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s += wi;
                }
            }
            out.push(s);
        }
        out
    };
    let ma = sub_masses(&a.weights);
    let mb = sub_masses(&b.weights);
    for x in &ma {
        for y in &mb {
            let gap = x - y;
            if gap > 0.0 && gap <= 1.0 {
                candidates.push(gap);
            }
            let gap = y - x;
            if gap > 0.0 && gap <= 1.0 {
                candidates.push(gap);
            }
        }
    }
    candidates.retain(|c| (0.0..=1.0 + 1e-12).contains(c));
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    // feasibility is monotone in delta, so binary-search the candidates
    let ok = |delta: f64| prokhorov_holds_exact(a, b, &d, delta + 1e-12);
    let mut lo = 0usize;
    let mut hi = candidates.len() - 1;
    debug_assert!(ok(candidates[hi]), "delta = 1 always satisfies both sides");
    if ok(candidates[0]) {
        return Ok(candidates[0]);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(candidates[hi])
}

/// Max-flow feasibility: largest mass transportable from `a` to `b` across
/// pairs strictly closer than `delta`. Prokhorov's one-sided condition at
/// `delta` is equivalent to `1 - flow <= delta` by min-cut duality.
fn close_pair_flow(a: &DiscreteMeasure, b: &DiscreteMeasure, d: &[Vec<f64>], delta: f64) -> f64 {
    let na = a.len();
    let nb = b.len();
    let nodes = na + nb + 2;
    let source = na + nb;
    let sink = na + nb + 1;
    let mut cap = vec![vec![0.0f64; nodes]; nodes];
    for i in 0..na {
        cap[source][i] = a.weights[i];
        for j in 0..nb {
            if d[i][j] < delta {
                cap[i][na + j] = 2.0;
            }
        }
    }
    for j in 0..nb {
        cap[na + j][sink] = b.weights[j];
    }
    let mut flow = 0.0;
    loop {
        // DFS for an augmenting path in the residual graph
        let mut parent = vec![usize::MAX; nodes];
        let mut stack = vec![source];
        parent[source] = source;
        while let Some(u) = stack.pop() {
            if u == sink {
                break;
            }
            for v in 0..nodes {
                if parent[v] == usize::MAX && cap[u][v] > 1e-12 {
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            return flow;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            push = push.min(cap[u][v]);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
        flow += push;
    }
}

/// Prokhorov distance by bisection, accurate to [`PROKHOROV_BISECT_TOL`].
pub fn prokhorov_bisect(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    if a.dim() != b.dim() {
        return Err(MeasureError::DimMismatch);
    }
    let d = cross_distances(a, b);
    let ok = |delta: f64| 1.0 - close_pair_flow(a, b, &d, delta) <= delta + 1e-12;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    if ok(0.0) {
        return Ok(0.0);
    }
    while hi - lo > PROKHOROV_BISECT_TOL / 2.0 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Prokhorov distance: exact when the combined support allows, otherwise
/// bisection.
pub fn prokhorov_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    if a.len() + b.len() <= PROKHOROV_EXACT_LIMIT {
        prokhorov_exact(a, b)
    } else {
        prokhorov_bisect(a, b)
    }
}

/// A mean-preserving kernel certifying convex order between two measures.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleCoupling {
    pub row_atoms: Vec<Vec<f64>>,
    pub col_atoms: Vec<Vec<f64>>,
    /// `matrix[i][j]` is the kernel mass moved from row atom i to column
    /// atom j; rows sum to 1.
    pub matrix: Vec<Vec<f64>>,
}

impl MartingaleCoupling {
    /// Checks the three kernel conditions within [`COUPLING_TOL`]: rows are
    /// probabilities, rows preserve their atom's mean, and the weighted
    /// rows reproduce the target measure.
    pub fn validate(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
        let dim = a.dim();
        for (i, row) in self.matrix.iter().enumerate() {
            let mass: f64 = row.iter().sum();
            if (mass - 1.0).abs() > COUPLING_TOL {
                return false;
            }
            for c in 0..dim {
                let mean: f64 = row
                    .iter()
                    .zip(&self.col_atoms)
                    .map(|(k, y)| k * y[c])
                    .sum();
                if (mean - self.row_atoms[i][c]).abs() > COUPLING_TOL {
                    return false;
                }
            }
        }
        for (j, y) in self.col_atoms.iter().enumerate() {
            let _ = y;
            let mass: f64 = self
                .matrix
                .iter()
                .zip(&a.weights)
                .map(|(row, w)| w * row[j])
                .sum();
            if (mass - b.weights[j]).abs() > COUPLING_TOL {
                return false;
            }
        }
        true
    }
}

/// A convex piecewise-linear function, stored as the maximum of affine
/// pieces `slope . y + intercept`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexWitness {
    pub pieces: Vec<(Vec<f64>, f64)>,
    pub integral_a: f64,
    pub integral_b: f64,
}

impl ConvexWitness {
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|(s, c)| s.iter().zip(y).map(|(si, yi)| si * yi).sum::<f64>() + c)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexOrderReport {
    pub ordered: bool,
    pub coupling: Option<MartingaleCoupling>,
    pub witness: Option<ConvexWitness>,
}

/// Tests `a` convex-dominated-by `b` through feasibility of a
/// mean-preserving kernel. On failure the infeasibility certificate is
/// turned into a separating convex function and re-verified numerically.
pub fn convex_order_check(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
) -> Result<ConvexOrderReport, MeasureError> {
    if a.dim() != b.dim() {
        return Err(MeasureError::DimMismatch);
    }
    let na = a.len();
    let nb = b.len();
    let dim = a.dim();
    let var = |i: usize, j: usize| i * nb + j;
    let mut prog = LinearProgram::new(Sense::Minimize, na * nb);
    // rows: per-i unit mass, per-(i,c) row mean, per-j target mass
    for i in 0..na {
        let entries: Vec<(usize, f64)> = (0..nb).map(|j| (var(i, j), 1.0)).collect();
        prog.add_row(entries, RowSense::Eq, 1.0);
    }
    for i in 0..na {
        for c in 0..dim {
            let entries: Vec<(usize, f64)> =
                (0..nb).map(|j| (var(i, j), b.atoms[j][c])).collect();
            prog.add_row(entries, RowSense::Eq, a.atoms[i][c]);
        }
    }
    for j in 0..nb {
        let entries: Vec<(usize, f64)> =
            (0..na).map(|i| (var(i, j), a.weights[i])).collect();
        prog.add_row(entries, RowSense::Eq, b.weights[j]);
    }
    let sol = lp::solve(&prog)?;
    match sol.status {
        LPStatus::Optimal => {
            let matrix: Vec<Vec<f64>> = (0..na)
                .map(|i| (0..nb).map(|j| sol.x[var(i, j)]).collect())
                .collect();
            let coupling = MartingaleCoupling {
                row_atoms: a.atoms.clone(),
                col_atoms: b.atoms.clone(),
                matrix,
            };
            if !coupling.validate(a, b) {
                return Err(MeasureError::ConvexOrderNumerics(
                    "kernel fails its invariants".into(),
                ));
            }
            Ok(ConvexOrderReport {
                ordered: true,
                coupling: Some(coupling),
                witness: None,
            })
        }
        LPStatus::Infeasible => {
            let y = sol.farkas.ok_or_else(|| {
                MeasureError::ConvexOrderNumerics("missing infeasibility certificate".into())
            })?;
            // rows were added as: alpha_i, beta_(i,c), g_j
            let alpha = &y[0..na];
            let beta = |i: usize| &y[na + i * dim..na + (i + 1) * dim];
            let g = &y[na + na * dim..na + na * dim + nb];
            let pieces: Vec<(Vec<f64>, f64)> = (0..na)
                .map(|i| {
                    let s: Vec<f64> = beta(i).iter().map(|v| v / a.weights[i]).collect();
                    (s, alpha[i] / a.weights[i])
                })
                .collect();
            let mut witness = ConvexWitness {
                pieces,
                integral_a: 0.0,
                integral_b: 0.0,
            };
            witness.integral_a = price_static(|x| witness.evaluate(x), a);
            witness.integral_b = price_static(|x| witness.evaluate(x), b);
            // the certificate guarantees int db <= -sum(g.b) < int da
            let margin: f64 = g
                .iter()
                .zip(&b.weights)
                .map(|(gi, wi)| gi * wi)
                .sum::<f64>()
                .abs()
                .max(1.0);
            if witness.integral_a <= witness.integral_b + 1e-9 * margin {
                return Err(MeasureError::ConvexOrderNumerics(format!(
                    "witness separation failed: {} vs {}",
                    witness.integral_a, witness.integral_b
                )));
            }
            Ok(ConvexOrderReport {
                ordered: false,
                coupling: None,
                witness: Some(witness),
            })
        }
        LPStatus::Unbounded => Err(MeasureError::ConvexOrderNumerics(
            "feasibility program cannot be unbounded".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            points.iter().map(|p| vec![p.0]).collect(),
            points.iter().map(|p| p.1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn construction_merges_and_sorts() {
        let m = DiscreteMeasure::new(
            vec![vec![1.5], vec![0.5], vec![1.5]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        assert_eq!(m.atoms(), &[vec![0.5], vec![1.5]]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert!(DiscreteMeasure::new(vec![vec![1.0]], vec![0.9]).is_err());
    }

    #[test]
    fn static_prices_match_closed_forms() {
        let m = m1(&[(0.5, 0.5), (1.5, 0.5)]);
        assert_eq!(price_static(|_| 1.0, &m), 1.0);
        assert!((price_static(|x| x[0], &m) - 1.0).abs() < 1e-15);
        // indicator of one atom prices to its weight
        let ind = |x: &[f64]| if (x[0] - 1.5).abs() < 1e-12 { 1.0 } else { 0.0 };
        assert_eq!(price_static(ind, &m), 0.5);
    }

    #[test]
    fn unit_first_moment_detects_deviations() {
        assert!(check_unit_first_moment(&m1(&[(1.0, 1.0)])).0);
        assert!(check_unit_first_moment(&m1(&[(0.5, 0.5), (1.5, 0.5)])).0);
        let (ok, dev) = check_unit_first_moment(&m1(&[(0.5, 0.5), (1.0, 0.5)]));
        assert!(!ok);
        assert!((dev[0] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn projection_ceils_and_merges() {
        let single = project_measure(&m1(&[(0.3, 1.0)]), 1).unwrap();
        assert_eq!(single.atoms(), &[vec![0.5]]);
        let merged = project_measure(&m1(&[(0.3, 0.5), (0.4, 0.5)]), 1).unwrap();
        assert_eq!(merged.atoms(), &[vec![0.5]]);
        assert_eq!(merged.weights(), &[1.0]);
        let fixed = m1(&[(0.5, 0.5), (1.5, 0.5)]);
        assert_eq!(project_measure(&fixed, 1).unwrap(), fixed);
    }

    #[test]
    fn moments_match_hand_values() {
        let m = m1(&[(0.5, 0.5), (1.5, 0.5)]);
        assert!((pth_moment(&m, 2.0) - 1.25).abs() < 1e-12);
        assert!((pth_moment(&m, 1.0) - 1.0).abs() < 1e-12);
        assert!((pth_moment(&m1(&[(1.0, 1.0)]), 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l1_deviation_over_union_support() {
        let a = m1(&[(1.0, 0.5), (2.0, 0.5)]);
        let b = m1(&[(1.0, 0.6), (2.0, 0.4)]);
        assert_eq!(l1_marginal_deviation(&a, &a).unwrap(), 0.0);
        assert!((l1_marginal_deviation(&a, &b).unwrap() - 0.2).abs() < 1e-12);
        let c = m1(&[(5.0, 1.0)]);
        let d = m1(&[(7.0, 1.0)]);
        assert_eq!(l1_marginal_deviation(&c, &d).unwrap(), 2.0);
    }

    #[test]
    fn prokhorov_distance_point_masses() {
        let near = prokhorov_exact(&m1(&[(1.0, 1.0)]), &m1(&[(1.2, 1.0)])).unwrap();
        assert!((near - 0.2).abs() < 1e-9, "got {near}");
        let far = prokhorov_exact(&m1(&[(1.0, 1.0)]), &m1(&[(9.0, 1.0)])).unwrap();
        assert!((far - 1.0).abs() < 1e-9, "got {far}");
        let same = prokhorov_exact(&m1(&[(1.0, 1.0)]), &m1(&[(1.0, 1.0)])).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn prokhorov_modes_agree() {
        let a = m1(&[(0.8, 0.3), (1.0, 0.4), (1.3, 0.3)]);
        let b = m1(&[(0.85, 0.25), (1.1, 0.5), (1.4, 0.25)]);
        let exact = prokhorov_exact(&a, &b).unwrap();
        let approx = prokhorov_bisect(&a, &b).unwrap();
        assert!(exact <= 1.0 + 1e-12);
        assert!(
            (exact - approx).abs() <= PROKHOROV_BISECT_TOL,
            "exact {exact} vs bisect {approx}"
        );
        let sym = prokhorov_exact(&b, &a).unwrap();
        assert!((exact - sym).abs() < 1e-12);
    }

    #[test]
    fn convex_order_split_is_accepted() {
        let a = m1(&[(1.0, 1.0)]);
        let b = m1(&[(0.5, 0.5), (1.5, 0.5)]);
        let report = convex_order_check(&a, &b).unwrap();
        assert!(report.ordered);
        let k = report.coupling.unwrap();
        assert!(k.validate(&a, &b));
        assert!((k.matrix[0][0] - 0.5).abs() < 1e-9);
        assert!((k.matrix[0][1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn convex_order_reversal_yields_witness() {
        let a = m1(&[(0.5, 0.5), (1.5, 0.5)]);
        let b = m1(&[(1.0, 1.0)]);
        let report = convex_order_check(&a, &b).unwrap();
        assert!(!report.ordered);
        let w = report.witness.unwrap();
        assert!(
            w.integral_a > w.integral_b,
            "separation {} vs {}",
            w.integral_a,
            w.integral_b
        );
        // the witness is convex by construction; spot-check midpoint bound
        let mid = w.evaluate(&[1.0]);
        let ends = 0.5 * (w.evaluate(&[0.5]) + w.evaluate(&[1.5]));
        assert!(mid <= ends + 1e-12);
    }

    #[test]
    fn convex_order_identity_measure() {
        let a = m1(&[(0.5, 0.25), (1.0, 0.5), (1.5, 0.25)]);
        let report = convex_order_check(&a, &a).unwrap();
        assert!(report.ordered);
        assert!(report.coupling.unwrap().validate(&a, &a));
    }

    #[test]
    fn mixing_preserves_mass_and_mean() {
        let a = m1(&[(0.875, 0.25), (1.0, 0.5), (1.125, 0.25)]);
        let b = m1(&[(0.75, 0.5), (1.25, 0.5)]);
        let m = DiscreteMeasure::mix(&a, &b, 0.25).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= MASS_TOL);
        assert!((m.mean()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_json_round_trip() {
        let a = m1(&[(0.5, 0.5), (1.5, 0.5)]);
        let text = serde_json::to_string(&a).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
        let bad: Result<DiscreteMeasure, _> =
            serde_json::from_str(r#"{"atoms": [[1.0]], "weights": [0.5]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn spread_preserves_mean_and_halves_prokhorov() {
        let a = m1(&[(0.875, 0.25), (1.0, 0.5), (1.125, 0.25)]);
        let spread = mean_preserving_spread(&a, 0.1, 0.125).unwrap();
        assert!((spread.mean()[0] - a.mean()[0]).abs() < 1e-12);
        assert!((spread.weights().iter().sum::<f64>() - 1.0).abs() <= MASS_TOL);
        let d1 = prokhorov_distance(&a, &spread).unwrap();
        let half = mean_preserving_spread(&a, 0.05, 0.125).unwrap();
        let d2 = prokhorov_distance(&a, &half).unwrap();
        assert!(d1 > 0.0 && d2 > 0.0);
        let ratio = d2 / d1;
        assert!(
            (0.35..=0.65).contains(&ratio),
            "halving the fraction should roughly halve the distance: {d1} -> {d2}"
        );
        // shifting past zero is refused
        let tight = m1(&[(0.1, 1.0)]);
        assert!(mean_preserving_spread(&tight, 0.1, 0.25).is_err());
    }
}
