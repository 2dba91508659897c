//! Dyadic value grids and admissible duration sets.
//!
//! The discretization lives on two families of sets indexed by a refinement
//! level `m`:
//!
//! * value grids `A(m) = { 2^-m * k : k = 1, 2, ... }^d` (strictly positive
//!   coordinates), entered through the ceiling projection
//!   `project(x)_i = 2^-m * ceil(2^m * x_i)`, and
//! * duration sets `B(m) = { k * sqrt(d) * 2^-m } ∪ { sqrt(d) * 2^-m / k }`
//!   for integer `k >= 1`, which contain arbitrarily small positive elements
//!   and arbitrarily large ones.
//!
//! Durations used by the lattice carry an extra scale factor
//! `1 - sqrt(d) * 2^-n / T` so that shifted jump times always land strictly
//! before the horizon; see [`crate::discretization::shifted_times`].

use thiserror::Error;

/// Tolerance for dyadic membership tests and time comparisons.
pub const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("refinement level must be at least 1")]
    LevelTooCoarse,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("mesh sqrt(d)*2^-n = {mesh} must be smaller than the horizon {horizon}")]
    MeshTooCoarse { mesh: f64, horizon: f64 },
    #[error("ceiling projection requires strictly positive coordinates, got {0}")]
    NonpositiveCoordinate(f64),
    #[error("coordinate is not finite")]
    NotFinite,
}

/// Refinement parameters shared by every discretization routine: the base
/// level `n`, the path dimension `d` and the time horizon `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: u32,
    d: usize,
    horizon: f64,
}

impl GridSpec {
    /// Requires `n >= 1` and a mesh `sqrt(d) * 2^-n` strictly below `T`, so
    /// that the first shifted jump time fits inside the horizon.
    pub fn new(n: u32, d: usize, horizon: f64) -> Result<Self, GridError> {
        if n == 0 {
            return Err(GridError::LevelTooCoarse);
        }
        if d == 0 {
            return Err(GridError::ZeroDimension);
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(GridError::BadHorizon(horizon));
        }
        let spec = GridSpec { n, d, horizon };
        if spec.mesh() >= horizon {
            return Err(GridError::MeshTooCoarse {
                mesh: spec.mesh(),
                horizon,
            });
        }
        Ok(spec)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The base mesh `sqrt(d) * 2^-n`: ball radius for the exit times, first
    /// shifted jump time, and the scale of every error bound downstream.
    pub fn mesh(&self) -> f64 {
        (self.d as f64).sqrt() * 0.5f64.powi(self.n as i32)
    }

    /// Mesh at a finer level `n + k`.
    pub fn mesh_at(&self, extra: u32) -> f64 {
        (self.d as f64).sqrt() * 0.5f64.powi((self.n + extra) as i32)
    }

    /// Scale factor `1 - mesh / T` applied to lattice durations.
    pub fn duration_scale(&self) -> f64 {
        1.0 - self.mesh() / self.horizon
    }

    /// Duration set for the jump with index `k >= 2` inside the lattice,
    /// already carrying the scale factor.
    pub fn duration_set(&self, k: u32) -> DurationSet {
        DurationSet::new(self.n + k, self.d, self.duration_scale())
    }
}

/// Coordinatewise ceiling projection onto the grid `2^-level * {1, 2, ...}`.
///
/// The result dominates `x` coordinatewise and moves each coordinate by less
/// than `2^-level`, hence by less than `sqrt(d) * 2^-level` in Euclidean norm.
pub fn ceil_project(x: &[f64], level: u32) -> Result<Vec<f64>, GridError> {
    let scale = 2f64.powi(level as i32);
    let inv = 0.5f64.powi(level as i32);
    x.iter()
        .map(|&xi| {
            if !xi.is_finite() {
                return Err(GridError::NotFinite);
            }
            if xi <= 0.0 {
                return Err(GridError::NonpositiveCoordinate(xi));
            }
            Ok((xi * scale).ceil() * inv)
        })
        .collect()
}

/// True when every coordinate of `x` lies on `2^-level * {1, 2, ...}` up to
/// [`TIME_TOL`].
pub fn on_value_grid(x: &[f64], level: u32) -> bool {
    let scale = 2f64.powi(level as i32);
    x.iter().all(|&xi| {
        if !(xi > 0.0) {
            return false;
        }
        let m = xi * scale;
        (m - m.round()).abs() <= TIME_TOL * scale.max(1.0) && m.round() >= 1.0
    })
}

/// The set of admissible jump durations at one refinement level, optionally
/// scaled. With base `b = sqrt(d) * 2^-level` the raw set is
/// `{ k*b : k >= 1 } ∪ { b/k : k >= 1 }`; members of this struct represent
/// `scale` times that set.
#[derive(Clone, Copy, Debug)]
pub struct DurationSet {
    level: u32,
    base: f64,
    scale: f64,
}

impl DurationSet {
    pub fn new(level: u32, d: usize, scale: f64) -> Self {
        DurationSet {
            level,
            base: (d as f64).sqrt() * 0.5f64.powi(level as i32),
            scale,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Largest element of the (scaled) set strictly below `cap`. The raw set
    /// contains arbitrarily small positive elements, so this never fails for
    /// `cap > 0`. Computed in closed form: the candidates are the largest
    /// multiple `k*b < cap/scale` and the largest reciprocal `b/k < cap/scale`.
    pub fn largest_below(&self, cap: f64) -> f64 {
        assert!(cap > 0.0, "duration cap must be positive");
        let x = cap / self.scale;
        let mut best = 0.0f64;
        let k_mult = (x / self.base - TIME_TOL).floor();
        if k_mult >= 1.0 {
            best = best.max(k_mult * self.base);
        }
        // smallest k with b/k < x maximizes b/k among reciprocals
        let k_rec = (self.base / x + TIME_TOL).floor() + 1.0;
        let rec = self.base / k_rec;
        if rec < x {
            best = best.max(rec);
        }
        debug_assert!(best > 0.0);
        best * self.scale
    }

    /// Membership test up to [`TIME_TOL`].
    pub fn contains(&self, dt: f64) -> bool {
        if !(dt > 0.0) {
            return false;
        }
        let x = dt / self.scale;
        let ratio = x / self.base;
        if ratio >= 0.5 {
            let k = ratio.round();
            if k >= 1.0 && (ratio - k).abs() * self.base <= TIME_TOL {
                return true;
            }
        }
        let inv = self.base / x;
        if inv >= 0.5 {
            let k = inv.round();
            if k >= 1.0 && (x - self.base / k).abs() <= TIME_TOL {
                return true;
            }
        }
        false
    }

    /// The `count` largest (scaled) elements strictly below `cap`, in
    /// descending order. `k_max` bounds the reciprocal family so the answer
    /// stays finite even when `cap` is smaller than the base element.
    pub fn enumerate_below(&self, cap: f64, count: usize, k_max: u32) -> Vec<f64> {
        let x = cap / self.scale;
        let mut out = Vec::with_capacity(count);
        let k_mult = (x / self.base - TIME_TOL).floor() as i64;
        // descending multiples first, they are the largest admissible elements
        let mut k = k_mult;
        while k >= 1 && out.len() < count {
            out.push(k as f64 * self.base);
            k -= 1;
        }
        if out.len() < count {
            // reciprocals b/k below x, descending means ascending k
            let mut k = ((self.base / x + TIME_TOL).floor() as i64 + 1).max(2);
            while out.len() < count && k <= k_max as i64 {
                let e = self.base / k as f64;
                if e < x && out.last().map_or(true, |&l| e < l - TIME_TOL) {
                    out.push(e);
                }
                k += 1;
            }
        }
        out.iter().map(|e| e * self.scale).collect()
    }
}
