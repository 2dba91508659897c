//! Prefix tree, filtration groups, and martingale diagnostics of a finite
//! path family.
//!
//! The nodes of the tree are the distinct jump-prefixes of the family. A
//! group is a pair of a node and one of the distinct next-jump times
//! observed at that node; its edges lead to the children reached at that
//! time. Groups are exactly the atoms of the pre-jump filtration: just
//! before a jump at time `t`, the observable past is the prefix plus the
//! fact that the next jump happens at `t`.
//!
//! A weight vector `Q >= 0` over the paths is a martingale law when, within
//! every group, the weighted mean of the children levels equals the node
//! level. The defect reported here is
//!
//! ```text
//! defect(Q) = sum_groups | sum_edges Q_edge * (child_level - node_level) |_1,
//! ```
//!
//! the total conditional-mean violation in unnormalized form; it vanishes
//! exactly on martingale laws and is the quantity that relaxed pricing
//! penalizes. The Doob split `M = S + A` built by [`PathLattice::doob`]
//! shifts each child by the group mean so that `M` is a martingale under
//! `Q` by construction; groups with zero mass inherit a zero compensator
//! increment and are flagged.

use std::collections::HashMap;

use thiserror::Error;

use crate::paths::StepPath;

/// Tolerance for matching jump times and levels of external query paths.
pub const LOOKUP_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("path family is empty")]
    Empty,
    #[error("path {0} has mismatched dimension or horizon")]
    Mixed(usize),
    #[error("weight vector has length {got}, expected {want}")]
    BadWeights { got: usize, want: usize },
}

/// One prefix of the family: the state after `depth` jumps.
#[derive(Clone, Debug)]
pub struct Node {
    pub parent: Option<usize>,
    pub depth: usize,
    /// Value held after the prefix jumps.
    pub level: Vec<f64>,
    /// Jump time that created this node (None at the root).
    pub time: Option<f64>,
}

/// One edge inside a group: a path continuing to a child node.
#[derive(Clone, Copy, Debug)]
pub struct GroupEdge {
    pub path: usize,
    pub child: usize,
}

/// A node together with one observed next-jump time.
#[derive(Clone, Debug)]
pub struct Group {
    pub node: usize,
    pub time: f64,
    pub edges: Vec<GroupEdge>,
}

/// Prefix tree over a finite family of step paths.
#[derive(Clone, Debug)]
pub struct PathLattice {
    dim: usize,
    horizon: f64,
    paths: Vec<StepPath>,
    nodes: Vec<Node>,
    groups: Vec<Group>,
    /// Node at which each path ends (after its last jump).
    terminal_node: Vec<usize>,
    /// Groups each path passes through, in jump order.
    path_groups: Vec<Vec<usize>>,
}

impl PathLattice {
    pub fn build(paths: Vec<StepPath>) -> Result<Self, TreeError> {
        let first = paths.first().ok_or(TreeError::Empty)?;
        let (dim, horizon) = (first.dim(), first.horizon());
        for (i, p) in paths.iter().enumerate() {
            if p.dim() != dim || (p.horizon() - horizon).abs() > LOOKUP_TOL {
                return Err(TreeError::Mixed(i));
            }
        }
        let mut nodes = vec![Node {
            parent: None,
            depth: 0,
            level: vec![1.0; dim],
            time: None,
        }];
        let mut node_key: HashMap<Vec<u64>, usize> = HashMap::new();
        node_key.insert(Vec::new(), 0);
        let mut terminal_node = Vec::with_capacity(paths.len());
        // per path: the chain of node ids it visits
        let mut chains: Vec<Vec<usize>> = Vec::with_capacity(paths.len());
        for path in &paths {
            let mut key: Vec<u64> = Vec::new();
            let mut current = 0usize;
            let mut chain = vec![0usize];
            for (j, &t) in path.jump_times().iter().enumerate() {
                key.push(t.to_bits());
                for v in &path.values()[j + 1] {
                    key.push(v.to_bits());
                }
                current = *node_key.entry(key.clone()).or_insert_with(|| {
                    nodes.push(Node {
                        parent: Some(current),
                        depth: j + 1,
                        level: path.values()[j + 1].clone(),
                        time: Some(t),
                    });
                    nodes.len() - 1
                });
                chain.push(current);
            }
            terminal_node.push(current);
            chains.push(chain);
        }
        // groups: per node, distinct next-jump times within tolerance
        let mut groups: Vec<Group> = Vec::new();
        let mut path_groups: Vec<Vec<usize>> = vec![Vec::new(); paths.len()];
        for (p, path) in paths.iter().enumerate() {
            for (j, &t) in path.jump_times().iter().enumerate() {
                let node = chains[p][j];
                let child = chains[p][j + 1];
                // time key by tolerance: scan the node's existing groups
                let existing = groups
                    .iter()
                    .enumerate()
                    .find(|(_, g)| g.node == node && (g.time - t).abs() <= LOOKUP_TOL)
                    .map(|(gid, _)| gid);
                let gid = match existing {
                    Some(gid) => gid,
                    None => {
                        groups.push(Group {
                            node,
                            time: t,
                            edges: Vec::new(),
                        });
                        groups.len() - 1
                    }
                };
                groups[gid].edges.push(GroupEdge { path: p, child });
                path_groups[p].push(gid);
            }
        }
        Ok(PathLattice {
            dim,
            horizon,
            paths,
            nodes,
            groups,
            terminal_node,
            path_groups,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn paths(&self) -> &[StepPath] {
        &self.paths
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn terminal_node(&self, path: usize) -> usize {
        self.terminal_node[path]
    }

    pub fn path_groups(&self, path: usize) -> &[usize] {
        &self.path_groups[path]
    }

    /// Finds the path equal to `query` up to [`LOOKUP_TOL`] in times and
    /// levels, by walking the prefix structure.
    pub fn lookup(&self, query: &StepPath) -> Option<usize> {
        self.paths.iter().position(|p| {
            p.num_jumps() == query.num_jumps()
                && p.jump_times()
                    .iter()
                    .zip(query.jump_times())
                    .all(|(a, b)| (a - b).abs() <= LOOKUP_TOL)
                && p.values()
                    .iter()
                    .zip(query.values())
                    .all(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= LOOKUP_TOL))
        })
    }

    /// Total and per-group conditional-mean violation of a weight vector.
    pub fn martingale_defect(&self, weights: &[f64]) -> Result<DefectReport, TreeError> {
        if weights.len() != self.paths.len() {
            return Err(TreeError::BadWeights {
                got: weights.len(),
                want: self.paths.len(),
            });
        }
        let mut per_group = Vec::with_capacity(self.groups.len());
        let mut zero_mass = Vec::new();
        let mut total = 0.0;
        for (gid, group) in self.groups.iter().enumerate() {
            let node_level = &self.nodes[group.node].level;
            let mut acc = vec![0.0f64; self.dim];
            let mut mass = 0.0f64;
            for edge in &group.edges {
                let w = weights[edge.path];
                mass += w;
                for (a, (c, n)) in acc
                    .iter_mut()
                    .zip(self.nodes[edge.child].level.iter().zip(node_level))
                {
                    *a += w * (c - n);
                }
            }
            if mass == 0.0 {
                zero_mass.push(gid);
            }
            let defect: f64 = acc.iter().map(|a| a.abs()).sum();
            total += defect;
            per_group.push(defect);
        }
        Ok(DefectReport {
            total,
            per_group,
            zero_mass_groups: zero_mass,
        })
    }

    /// Doob split of the family under `Q`: per-node compensator values `A`
    /// such that `M = S + A` has zero conditional-mean defect under `Q`.
    /// Groups with zero mass contribute a zero increment and are flagged.
    pub fn doob(&self, weights: &[f64]) -> Result<DoobReport, TreeError> {
        if weights.len() != self.paths.len() {
            return Err(TreeError::BadWeights {
                got: weights.len(),
                want: self.paths.len(),
            });
        }
        // group means of the child levels
        let mut compensator: Vec<Vec<f64>> = vec![vec![0.0; self.dim]; self.nodes.len()];
        let mut zero_mass = Vec::new();
        // order guarantees parents come before children within each chain,
        // but a child can be reached through several groups only via its
        // unique parent node, so a single pass over groups suffices
        for (gid, group) in self.groups.iter().enumerate() {
            let node_level = self.nodes[group.node].level.clone();
            let mut mean = vec![0.0f64; self.dim];
            let mut mass = 0.0f64;
            for edge in &group.edges {
                let w = weights[edge.path];
                mass += w;
                for (m, c) in mean.iter_mut().zip(&self.nodes[edge.child].level) {
                    *m += w * c;
                }
            }
            if mass > 0.0 {
                for m in mean.iter_mut() {
                    *m /= mass;
                }
            } else {
                zero_mass.push(gid);
                mean.copy_from_slice(&node_level);
            }
            let parent_a = compensator[group.node].clone();
            for edge in &group.edges {
                let child = edge.child;
                for ((a, pa), (n, m)) in compensator[child]
                    .iter_mut()
                    .zip(&parent_a)
                    .zip(node_level.iter().zip(&mean))
                {
                    *a = pa + (n - m);
                }
            }
        }
        // residual: per group, weighted mean of M-increments
        let mut max_residual = 0.0f64;
        for group in &self.groups {
            let node = group.node;
            let mut acc = vec![0.0f64; self.dim];
            for edge in &group.edges {
                let w = weights[edge.path];
                for (k, a) in acc.iter_mut().enumerate() {
                    let m_child =
                        self.nodes[edge.child].level[k] + compensator[edge.child][k];
                    let m_node = self.nodes[node].level[k] + compensator[node][k];
                    *a += w * (m_child - m_node);
                }
            }
            for a in &acc {
                max_residual = max_residual.max(a.abs());
            }
        }
        Ok(DoobReport {
            compensator,
            max_residual,
            zero_mass_groups: zero_mass,
        })
    }
}

#[derive(Clone, Debug)]
pub struct DefectReport {
    pub total: f64,
    pub per_group: Vec<f64>,
    pub zero_mass_groups: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DoobReport {
    /// Compensator value per node; `M = level + compensator` is a martingale.
    pub compensator: Vec<Vec<f64>>,
    /// Largest weighted conditional-mean violation of `M` over all groups.
    pub max_residual: f64,
    pub zero_mass_groups: Vec<usize>,
}
