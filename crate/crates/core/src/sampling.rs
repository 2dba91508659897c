//! Reproducible random path generators behind a name registry.
//!
//! Each generator is a strategy selected at runtime by name plus JSON
//! parameters. Sampling is deterministic: path `i` of a batch uses stream
//! `i` of a counter-based generator seeded with the master seed, so batches
//! are reproducible and insertion-order independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::paths::{PathError, StepPath};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("unknown generator '{0}'")]
    UnknownGenerator(String),
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// A named sampling strategy producing one step path per call.
pub trait PathGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<StepPath, SamplingError>;
}

/// Names accepted by [`make_generator`].
pub fn generator_names() -> &'static [&'static str] {
    &["binomial_walk", "compound_jump", "geometric_steps"]
}

/// Builds a generator from its registry name and JSON parameters.
pub fn make_generator(
    name: &str,
    params: &serde_json::Value,
) -> Result<Box<dyn PathGenerator>, SamplingError> {
    fn parse<T: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<T, SamplingError> {
        serde_json::from_value(v.clone()).map_err(|e| SamplingError::BadParams(e.to_string()))
    }
    match name {
        "binomial_walk" => Ok(Box::new(parse::<BinomialWalk>(params)?.validated()?)),
        "compound_jump" => Ok(Box::new(parse::<CompoundJump>(params)?.validated()?)),
        "geometric_steps" => Ok(Box::new(parse::<GeometricSteps>(params)?.validated()?)),
        other => Err(SamplingError::UnknownGenerator(other.to_string())),
    }
}

/// Samples `count` paths; path `i` draws from stream `i` of the seed.
pub fn sample_paths(
    generator: &dyn PathGenerator,
    count: usize,
    seed: u64,
) -> Result<Vec<StepPath>, SamplingError> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            generator.sample(&mut rng)
        })
        .collect()
}

fn sorted_jump_times(rng: &mut ChaCha8Rng, count: usize, horizon: f64) -> Vec<f64> {
    let mut times: Vec<f64>;
    loop {
        times = (0..count)
            .map(|_| rng.gen_range(0.0..horizon))
            .filter(|&t| t > 0.0)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if times.windows(2).all(|w| w[1] - w[0] > 1e-9) {
            break;
        }
    }
    times
}

/// Multiplicative random walk: at each of `jumps` uniformly placed times,
/// every coordinate independently multiplies by `1 + up` or divides by it.
#[derive(Debug, Deserialize)]
pub struct BinomialWalk {
    pub dim: usize,
    pub horizon: f64,
    pub jumps: usize,
    pub up: f64,
}

impl BinomialWalk {
    fn validated(self) -> Result<Self, SamplingError> {
        if self.dim == 0 || self.horizon <= 0.0 || self.up <= 0.0 {
            return Err(SamplingError::BadParams(
                "binomial_walk needs dim >= 1, horizon > 0, up > 0".into(),
            ));
        }
        Ok(self)
    }
}

impl PathGenerator for BinomialWalk {
    fn name(&self) -> &'static str {
        "binomial_walk"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<StepPath, SamplingError> {
        let times = sorted_jump_times(rng, self.jumps, self.horizon);
        let mut values = vec![vec![1.0; self.dim]];
        for _ in &times {
            let prev = values.last().unwrap().clone();
            let next: Vec<f64> = prev
                .iter()
                .map(|&v| {
                    if rng.gen_bool(0.5) {
                        v * (1.0 + self.up)
                    } else {
                        v / (1.0 + self.up)
                    }
                })
                .collect();
            values.push(next);
        }
        Ok(StepPath::new(self.dim, self.horizon, times, values)?)
    }
}

/// Jumps of i.i.d. amplitude: additive uniform on `[-amplitude, amplitude]`,
/// or multiplicative by `exp(z)` with the same `z` law when `multiplicative`
/// is set (which keeps paths strictly positive).
#[derive(Debug, Deserialize)]
pub struct CompoundJump {
    pub dim: usize,
    pub horizon: f64,
    pub jumps: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub multiplicative: bool,
}

impl CompoundJump {
    fn validated(self) -> Result<Self, SamplingError> {
        if self.dim == 0 || self.horizon <= 0.0 || self.amplitude <= 0.0 {
            return Err(SamplingError::BadParams(
                "compound_jump needs dim >= 1, horizon > 0, amplitude > 0".into(),
            ));
        }
        Ok(self)
    }
}

impl PathGenerator for CompoundJump {
    fn name(&self) -> &'static str {
        "compound_jump"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<StepPath, SamplingError> {
        let times = sorted_jump_times(rng, self.jumps, self.horizon);
        let mut values = vec![vec![1.0; self.dim]];
        for _ in &times {
            let prev = values.last().unwrap().clone();
            let next: Vec<f64> = prev
                .iter()
                .map(|&v| {
                    let z = rng.gen_range(-self.amplitude..=self.amplitude);
                    if self.multiplicative {
                        v * z.exp()
                    } else {
                        v + z
                    }
                })
                .collect();
            values.push(next);
        }
        Ok(StepPath::new(self.dim, self.horizon, times, values)?)
    }
}

/// Jumps accumulating geometrically toward the horizon, each multiplying
/// every coordinate by `ratio` or its reciprocal. Stresses discretizations
/// with clusters of late jumps.
#[derive(Debug, Deserialize)]
pub struct GeometricSteps {
    pub dim: usize,
    pub horizon: f64,
    pub jumps: usize,
    pub ratio: f64,
    /// Geometric decay of the remaining time, in `(0, 1)`.
    pub decay: f64,
}

impl GeometricSteps {
    fn validated(self) -> Result<Self, SamplingError> {
        if self.dim == 0
            || self.horizon <= 0.0
            || self.ratio <= 0.0
            || !(0.0 < self.decay && self.decay < 1.0)
        {
            return Err(SamplingError::BadParams(
                "geometric_steps needs dim >= 1, horizon > 0, ratio > 0, decay in (0,1)".into(),
            ));
        }
        Ok(self)
    }
}

impl PathGenerator for GeometricSteps {
    fn name(&self) -> &'static str {
        "geometric_steps"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<StepPath, SamplingError> {
        let times: Vec<f64> = (1..=self.jumps)
            .map(|k| self.horizon * (1.0 - self.decay.powi(k as i32)))
            .filter(|&t| t > 0.0 && t < self.horizon)
            .collect();
        let mut values = vec![vec![1.0; self.dim]];
        for _ in &times {
            let prev = values.last().unwrap().clone();
            let next: Vec<f64> = prev
                .iter()
                .map(|&v| {
                    if rng.gen_bool(0.5) {
                        v * self.ratio
                    } else {
                        v / self.ratio
                    }
                })
                .collect();
            values.push(next);
        }
        Ok(StepPath::new(self.dim, self.horizon, times, values)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_names() {
        for name in generator_names() {
            let params = serde_json::json!({
                "dim": 2, "horizon": 1.0, "jumps": 5,
                "up": 0.05, "amplitude": 0.1, "ratio": 1.05, "decay": 0.5,
            });
            let g = make_generator(name, &params).unwrap();
            assert_eq!(g.name(), *name);
        }
        assert!(make_generator("nope", &serde_json::json!({})).is_err());
    }

    #[test]
    fn sampling_is_reproducible_per_seed_and_stream() {
        let params = serde_json::json!({"dim": 1, "horizon": 1.0, "jumps": 6, "up": 0.02});
        let g = make_generator("binomial_walk", &params).unwrap();
        let a = sample_paths(g.as_ref(), 4, 99).unwrap();
        let b = sample_paths(g.as_ref(), 4, 99).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.key_bits(), pb.key_bits());
        }
        let c = sample_paths(g.as_ref(), 4, 100).unwrap();
        assert!(a.iter().zip(&c).any(|(pa, pc)| pa.key_bits() != pc.key_bits()));
    }

    #[test]
    fn binomial_walk_paths_are_positive_and_inside_horizon() {
        let params = serde_json::json!({"dim": 3, "horizon": 0.375, "jumps": 8, "up": 0.01});
        let g = make_generator("binomial_walk", &params).unwrap();
        for p in sample_paths(g.as_ref(), 16, 7).unwrap() {
            assert!(p.is_positive());
            assert!(p.jump_times().iter().all(|&t| t > 0.0 && t < 0.375));
        }
    }

    #[test]
    fn multiplicative_compound_jump_stays_positive() {
        let params = serde_json::json!({
            "dim": 2, "horizon": 1.0, "jumps": 10, "amplitude": 0.4, "multiplicative": true
        });
        let g = make_generator("compound_jump", &params).unwrap();
        for p in sample_paths(g.as_ref(), 8, 3).unwrap() {
            assert!(p.is_positive());
        }
    }

    #[test]
    fn geometric_steps_cluster_toward_horizon() {
        let params = serde_json::json!({
            "dim": 1, "horizon": 1.0, "jumps": 5, "ratio": 1.1, "decay": 0.5
        });
        let g = make_generator("geometric_steps", &params).unwrap();
        let p = g
            .sample(&mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let times = p.jump_times();
        assert!(times.len() == 5);
        for w in times.windows(2) {
            assert!(w[1] - w[0] < w[0] + 1e-12);
        }
    }
}
