//! Explicit enumeration of truncated path lattices.
//!
//! The full lattice is infinite: segment `k` may hold any strictly positive
//! value on the dyadic grid at refinement `n + k` and durations range over
//! unbounded sets. A [`LatticeTruncation`] carves out a finite piece with
//! four controls: the maximum number of encoded segments, a value ceiling, a
//! cap on the per-coordinate change between consecutive levels, and the
//! number of candidate durations kept per level.
//!
//! Durations are enumerated strictly below `scale * eps`. Every image of the
//! time-shift map lands in that range, because exit-time increments never
//! exceed `eps` and the shifted duration is the largest admissible element
//! strictly below the increment, times `scale`. A truncation therefore
//! contains such an image whenever its duration menu and value window do.
//!
//! Distinct encodings can induce the same step function by repeating a
//! level; enumeration deduplicates by the canonical function and keeps the
//! first encoding found as the witness.

use std::collections::HashMap;

use thiserror::Error;

use crate::discretization::LatticeImage;
use crate::grid::{GridSpec, TIME_TOL};
use crate::paths::{PathError, StepPath};

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("enumeration exceeded the cap of {0} paths")]
    TooManyPaths(usize),
    #[error("truncation parameters invalid: {0}")]
    BadTruncation(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Finite window of the path lattice.
#[derive(Clone, Copy, Debug)]
pub struct LatticeTruncation {
    pub spec: GridSpec,
    /// Largest number of encoded segments (including silent ones).
    pub m_max: usize,
    /// Value ceiling per coordinate.
    pub v_max: f64,
    /// Cap on the per-coordinate change between consecutive levels.
    pub level_step_max: f64,
    /// Number of candidate durations kept per level.
    pub durations_per_level: usize,
    /// Abort threshold for the enumeration.
    pub max_paths: usize,
}

impl LatticeTruncation {
    fn validate(&self) -> Result<(), LatticeError> {
        if self.m_max == 0 {
            return Err(LatticeError::BadTruncation("m_max must be >= 1".into()));
        }
        if self.v_max < 1.0 {
            return Err(LatticeError::BadTruncation(
                "v_max must reach the initial value 1".into(),
            ));
        }
        if self.level_step_max <= 0.0 || self.durations_per_level == 0 {
            return Err(LatticeError::BadTruncation(
                "level_step_max and durations_per_level must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// All values on the grid `2^-level N` within `step_cap` of `center`,
/// bounded by `(0, v_max]`, ascending.
fn coordinate_menu(center: f64, level: u32, step_cap: f64, v_max: f64) -> Vec<f64> {
    let step = 0.5f64.powi(level as i32);
    let lo = ((center - step_cap) / step).ceil().max(1.0) as i64;
    let hi = (((center + step_cap).min(v_max)) / step).floor() as i64;
    (lo..=hi)
        .map(|j| j as f64 * step)
        .filter(|v| (v - center).abs() <= step_cap + TIME_TOL)
        .collect()
}

/// Cartesian product of per-coordinate menus around `center`.
fn level_menu(center: &[f64], level: u32, step_cap: f64, v_max: f64) -> Vec<Vec<f64>> {
    let per: Vec<Vec<f64>> = center
        .iter()
        .map(|&c| coordinate_menu(c, level, step_cap, v_max))
        .collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for menu in &per {
        let mut next = Vec::with_capacity(out.len() * menu.len());
        for prefix in &out {
            for &v in menu {
                let mut row = prefix.clone();
                row.push(v);
                next.push(row);
            }
        }
        out = next;
    }
    out
}

/// Enumerates the truncated lattice, deduplicated by canonical function.
pub fn enumerate_lattice(trunc: &LatticeTruncation) -> Result<Vec<LatticeImage>, LatticeError> {
    trunc.validate()?;
    let spec = trunc.spec;
    let eps = spec.mesh();
    let horizon = spec.horizon();
    let duration_cap = spec.duration_scale() * eps;
    let mut images: Vec<LatticeImage> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut times = vec![0.0f64, eps];
    // segment counts m = 1..=m_max share the recursion; acceptance happens
    // whenever the terminal grid constraint holds
    let ones = vec![1.0; spec.dim()];
    let mut levels: Vec<Vec<f64>> = vec![ones.clone()];
    extend(
        trunc,
        &mut times,
        &mut levels,
        duration_cap,
        horizon,
        &mut images,
        &mut seen,
    )?;
    Ok(images)
}

fn extend(
    trunc: &LatticeTruncation,
    times: &mut Vec<f64>,
    levels: &mut Vec<Vec<f64>>,
    duration_cap: f64,
    horizon: f64,
    images: &mut Vec<LatticeImage>,
    seen: &mut HashMap<Vec<u64>, usize>,
) -> Result<(), LatticeError> {
    let spec = trunc.spec;
    let k = levels.len(); // index of the segment being chosen now
    let last = k == trunc.m_max;
    // the level on the final segment lives on the base grid, others on the
    // grid refined with their index
    let refine = if last { spec.n() } else { spec.n() + k as u32 };
    for level in level_menu(
        levels.last().unwrap(),
        refine,
        trunc.level_step_max,
        trunc.v_max,
    ) {
        levels.push(level);
        // accept the encoding ending here when the level is base-grid valid
        let terminal_ok = crate::grid::on_value_grid(levels.last().unwrap(), spec.n());
        if terminal_ok {
            record(trunc, times, levels, images, seen)?;
        }
        if !last {
            let set = spec.duration_set(k as u32 + 1);
            let t = times[k];
            let cap = duration_cap.min(horizon - t - TIME_TOL);
            if cap > 0.0 {
                for delta in set.enumerate_below(cap, trunc.durations_per_level, 64) {
                    times.push(t + delta);
                    extend(trunc, times, levels, duration_cap, horizon, images, seen)?;
                    times.pop();
                }
            }
        }
        levels.pop();
    }
    Ok(())
}

fn record(
    trunc: &LatticeTruncation,
    times: &[f64],
    levels: &[Vec<f64>],
    images: &mut Vec<LatticeImage>,
    seen: &mut HashMap<Vec<u64>, usize>,
) -> Result<(), LatticeError> {
    let spec = trunc.spec;
    let path = StepPath::new(
        spec.dim(),
        spec.horizon(),
        times[1..levels.len()].to_vec(),
        levels.to_vec(),
    )?;
    let key = path.key_bits();
    if seen.contains_key(&key) {
        return Ok(());
    }
    if images.len() >= trunc.max_paths {
        return Err(LatticeError::TooManyPaths(trunc.max_paths));
    }
    seen.insert(key, images.len());
    images.push(LatticeImage {
        path,
        times: times[..levels.len()].to_vec(),
        levels: levels.to_vec(),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::verify_encoding;

    fn small_truncation() -> LatticeTruncation {
        LatticeTruncation {
            spec: GridSpec::new(3, 1, 0.375).unwrap(),
            m_max: 3,
            v_max: 2.0,
            level_step_max: 0.25,
            durations_per_level: 1,
            max_paths: 5000,
        }
    }

    #[test]
    fn enumeration_produces_verified_encodings() {
        let trunc = small_truncation();
        let images = enumerate_lattice(&trunc).unwrap();
        assert!(!images.is_empty());
        for image in &images {
            assert!(
                verify_encoding(&image.times, &image.levels, &trunc.spec),
                "encoding {:?} fails verification",
                image.times
            );
        }
    }

    #[test]
    fn enumeration_is_deduplicated_and_deterministic() {
        let trunc = small_truncation();
        let a = enumerate_lattice(&trunc).unwrap();
        let b = enumerate_lattice(&trunc).unwrap();
        assert_eq!(a.len(), b.len());
        let mut keys: Vec<Vec<u64>> = a.iter().map(|i| i.path.key_bits()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), a.len(), "duplicate canonical paths");
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.path.key_bits(), y.path.key_bits());
        }
    }

    #[test]
    fn constant_path_is_enumerated() {
        let trunc = small_truncation();
        let images = enumerate_lattice(&trunc).unwrap();
        let constant = StepPath::constant(1, 0.375).unwrap();
        assert!(images
            .iter()
            .any(|i| i.path.key_bits() == constant.key_bits()));
    }

    #[test]
    fn enumeration_contains_shift_images_of_quiet_paths() {
        use crate::discretization::{map_pi_hat, stopping_times};
        let trunc = small_truncation();
        let spec = trunc.spec;
        // a no-exit path: small oscillation, never leaves the eps-ball
        let path = StepPath::new(
            1,
            0.375,
            vec![0.05, 0.2, 0.3],
            vec![vec![1.0], vec![1.02], vec![0.99], vec![1.01]],
        )
        .unwrap();
        let trace = stopping_times(&path, spec.mesh()).unwrap();
        assert_eq!(trace.m(), 3, "no-exit trace should step exactly by eps");
        let image = map_pi_hat(&trace, &spec).unwrap();
        let images = enumerate_lattice(&trunc).unwrap();
        assert!(
            images
                .iter()
                .any(|i| i.path.key_bits() == image.path.key_bits()),
            "shift image missing from truncation"
        );
    }

    #[test]
    fn value_ceiling_is_respected() {
        let trunc = small_truncation();
        let images = enumerate_lattice(&trunc).unwrap();
        for image in &images {
            for level in image.path.values() {
                for &v in level {
                    assert!(v > 0.0 && v <= trunc.v_max + 1e-12);
                }
            }
        }
    }

    #[test]
    fn path_cap_triggers() {
        let mut trunc = small_truncation();
        trunc.max_paths = 10;
        assert!(matches!(
            enumerate_lattice(&trunc),
            Err(LatticeError::TooManyPaths(10))
        ));
    }
}
