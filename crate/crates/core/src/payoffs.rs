//! Path-dependent payoff library behind a name-keyed registry.
//!
//! Every payoff declares, next to its evaluator, the metric it is
//! continuous under, a modulus of continuity `m` with
//!
//! ```text
//! |G(a) - G(b)| <= m(dist(a, b)),   m nondecreasing, m(0) = 0,
//! ```
//!
//! and a growth envelope (linear in the terminal value or in the running
//! supremum). These are verified properties: [`modulus_check`] sweeps path
//! pairs and reports violations, and the test suites run it over random
//! corpora. The moduli feed the discretization error term `3 m(3 sqrt(d)
//! 2^{-n})` of the pricing bound, so an overstated modulus would silently
//! weaken every certificate downstream.
//!
//! Lookback payoffs read one coordinate (configurable, default 0); Asian
//! payoffs use the exact time average of the step path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paths::{modified_distance, skorokhod_distance, PathError, StepPath};

#[derive(Debug, Error)]
pub enum PayoffError {
    #[error("unknown payoff '{0}'")]
    Unknown(String),
    #[error("bad parameters for '{name}': {message}")]
    BadParams { name: String, message: String },
}

/// Which path metric the payoff's modulus refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MetricFlavor {
    /// The Skorokhod metric.
    Skorokhod,
    /// Skorokhod plus the gap of time integrals (Asian-type payoffs).
    Modified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GrowthKind {
    /// |G| <= C (1 + |S_T|).
    LinearTerminal,
    /// |G| <= C (1 + sup_t |S_t|).
    LinearSupremum,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Growth {
    pub kind: GrowthKind,
    pub constant: f64,
}

pub trait Payoff {
    fn name(&self) -> String;
    fn evaluate(&self, path: &StepPath) -> f64;
    fn metric_flavor(&self) -> MetricFlavor;
    /// Declared modulus of continuity under the payoff's metric.
    fn modulus(&self, delta: f64) -> f64;
    fn growth(&self) -> Growth;
    /// Upper bound on |G| when the payoff is bounded.
    fn bound(&self) -> Option<f64> {
        None
    }
}

/// JSON shape of a payoff selection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum LookbackKind {
    PutFixed,
    CallFixed,
    CallFloating,
    MaxMinusTerminal,
}

struct Lookback {
    kind: LookbackKind,
    strike: f64,
    coordinate: usize,
}

impl Lookback {
    fn extremes(&self, path: &StepPath) -> (f64, f64) {
        (
            path.min_coordinate(self.coordinate),
            path.max_coordinate(self.coordinate),
        )
    }
}

impl Payoff for Lookback {
    fn name(&self) -> String {
        match self.kind {
            LookbackKind::PutFixed => "lookback_put_fixed",
            LookbackKind::CallFixed => "lookback_call_fixed",
            LookbackKind::CallFloating => "lookback_call_floating",
            LookbackKind::MaxMinusTerminal => "lookback_max_minus_terminal",
        }
        .to_string()
    }

    fn evaluate(&self, path: &StepPath) -> f64 {
        let (lo, hi) = self.extremes(path);
        let terminal = path.terminal()[self.coordinate];
        match self.kind {
            LookbackKind::PutFixed => (self.strike - lo).max(0.0),
            LookbackKind::CallFixed => (hi - self.strike).max(0.0),
            LookbackKind::CallFloating => (terminal - lo).max(0.0),
            LookbackKind::MaxMinusTerminal => hi - terminal,
        }
    }

    fn metric_flavor(&self) -> MetricFlavor {
        MetricFlavor::Skorokhod
    }

    fn modulus(&self, delta: f64) -> f64 {
        // one extreme moves by at most delta; the floating forms also move
        // the terminal value, doubling the constant
        match self.kind {
            LookbackKind::PutFixed | LookbackKind::CallFixed => delta,
            LookbackKind::CallFloating | LookbackKind::MaxMinusTerminal => 2.0 * delta,
        }
    }

    fn growth(&self) -> Growth {
        match self.kind {
            LookbackKind::PutFixed => Growth {
                kind: GrowthKind::LinearTerminal,
                constant: self.strike.max(1.0),
            },
            LookbackKind::CallFloating => Growth {
                kind: GrowthKind::LinearTerminal,
                constant: 1.0,
            },
            LookbackKind::CallFixed | LookbackKind::MaxMinusTerminal => Growth {
                kind: GrowthKind::LinearSupremum,
                constant: 1.0,
            },
        }
    }

    fn bound(&self) -> Option<f64> {
        match self.kind {
            LookbackKind::PutFixed => Some(self.strike),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum AsianKind {
    CallFixed,
    PutFixed,
    TerminalMinusAverage,
    AverageMinusTerminal,
}

struct Asian {
    kind: AsianKind,
    strike: f64,
    coordinate: usize,
    /// Horizon of the paths the payoff will be applied to; scales the
    /// declared modulus through the average's 1/T sensitivity.
    horizon: f64,
}

impl Payoff for Asian {
    fn name(&self) -> String {
        match self.kind {
            AsianKind::CallFixed => "asian_call_fixed",
            AsianKind::PutFixed => "asian_put_fixed",
            AsianKind::TerminalMinusAverage => "asian_terminal_minus_average",
            AsianKind::AverageMinusTerminal => "asian_average_minus_terminal",
        }
        .to_string()
    }

    fn evaluate(&self, path: &StepPath) -> f64 {
        let average = path.time_average()[self.coordinate];
        let terminal = path.terminal()[self.coordinate];
        match self.kind {
            AsianKind::CallFixed => (average - self.strike).max(0.0),
            AsianKind::PutFixed => (self.strike - average).max(0.0),
            AsianKind::TerminalMinusAverage => (terminal - average).max(0.0),
            AsianKind::AverageMinusTerminal => (average - terminal).max(0.0),
        }
    }

    fn metric_flavor(&self) -> MetricFlavor {
        MetricFlavor::Modified
    }

    fn modulus(&self, delta: f64) -> f64 {
        // the average moves by at most delta / T under the modified metric;
        // the floating forms add the terminal-value move
        match self.kind {
            AsianKind::CallFixed | AsianKind::PutFixed => {
                (1.0f64).max(1.0 / self.horizon) * delta
            }
            AsianKind::TerminalMinusAverage | AsianKind::AverageMinusTerminal => {
                (1.0 + 1.0 / self.horizon) * delta
            }
        }
    }

    fn growth(&self) -> Growth {
        match self.kind {
            AsianKind::PutFixed => Growth {
                kind: GrowthKind::LinearTerminal,
                constant: self.strike.max(1.0),
            },
            AsianKind::TerminalMinusAverage => Growth {
                kind: GrowthKind::LinearTerminal,
                constant: 1.0,
            },
            AsianKind::CallFixed | AsianKind::AverageMinusTerminal => Growth {
                kind: GrowthKind::LinearSupremum,
                constant: 1.0,
            },
        }
    }

    fn bound(&self) -> Option<f64> {
        match self.kind {
            AsianKind::PutFixed => Some(self.strike),
            _ => None,
        }
    }
}

/// The cash claim, identically 1.
struct Cash;

impl Payoff for Cash {
    fn name(&self) -> String {
        "cash".to_string()
    }
    fn evaluate(&self, _path: &StepPath) -> f64 {
        1.0
    }
    fn metric_flavor(&self) -> MetricFlavor {
        MetricFlavor::Skorokhod
    }
    fn modulus(&self, _delta: f64) -> f64 {
        0.0
    }
    fn growth(&self) -> Growth {
        Growth {
            kind: GrowthKind::LinearTerminal,
            constant: 1.0,
        }
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// One coordinate of the terminal value.
struct TerminalCoordinate {
    coordinate: usize,
}

impl Payoff for TerminalCoordinate {
    fn name(&self) -> String {
        "terminal_coordinate".to_string()
    }
    fn evaluate(&self, path: &StepPath) -> f64 {
        path.terminal()[self.coordinate]
    }
    fn metric_flavor(&self) -> MetricFlavor {
        MetricFlavor::Skorokhod
    }
    fn modulus(&self, delta: f64) -> f64 {
        delta
    }
    fn growth(&self) -> Growth {
        Growth {
            kind: GrowthKind::LinearTerminal,
            constant: 1.0,
        }
    }
}

pub fn payoff_names() -> Vec<&'static str> {
    vec![
        "lookback_put_fixed",
        "lookback_call_fixed",
        "lookback_call_floating",
        "lookback_max_minus_terminal",
        "asian_call_fixed",
        "asian_put_fixed",
        "asian_terminal_minus_average",
        "asian_average_minus_terminal",
        "cash",
        "terminal_coordinate",
    ]
}

fn param_f64(params: &serde_json::Value, key: &str) -> Option<f64> {
    params.get(key).and_then(|v| v.as_f64())
}

fn param_usize(params: &serde_json::Value, key: &str) -> Option<usize> {
    params.get(key).and_then(|v| v.as_u64()).map(|v| v as usize)
}

/// Builds a payoff from its registry name and JSON parameters.
///
/// Lookbacks take `strike` (where applicable) and `coordinate` (default 0).
/// Asians additionally take `horizon` (default 1), which scales the
/// declared modulus.
pub fn make_payoff(spec: &PayoffSpec) -> Result<Box<dyn Payoff>, PayoffError> {
    let name = spec.name.as_str();
    let params = &spec.params;
    let coordinate = param_usize(params, "coordinate").unwrap_or(0);
    let strike = param_f64(params, "strike");
    let need_strike = || {
        strike.filter(|k| *k >= 0.0).ok_or(PayoffError::BadParams {
            name: name.to_string(),
            message: "needs a nonnegative 'strike'".to_string(),
        })
    };
    let lookback = |kind: LookbackKind, strike: f64| -> Box<dyn Payoff> {
        Box::new(Lookback {
            kind,
            strike,
            coordinate,
        })
    };
    let horizon = param_f64(params, "horizon").unwrap_or(1.0);
    if horizon <= 0.0 {
        return Err(PayoffError::BadParams {
            name: name.to_string(),
            message: "'horizon' must be positive".to_string(),
        });
    }
    let asian = |kind: AsianKind, strike: f64| -> Box<dyn Payoff> {
        Box::new(Asian {
            kind,
            strike,
            coordinate,
            horizon,
        })
    };
    Ok(match name {
        "lookback_put_fixed" => lookback(LookbackKind::PutFixed, need_strike()?),
        "lookback_call_fixed" => lookback(LookbackKind::CallFixed, need_strike()?),
        "lookback_call_floating" => lookback(LookbackKind::CallFloating, 0.0),
        "lookback_max_minus_terminal" => lookback(LookbackKind::MaxMinusTerminal, 0.0),
        "asian_call_fixed" => asian(AsianKind::CallFixed, need_strike()?),
        "asian_put_fixed" => asian(AsianKind::PutFixed, need_strike()?),
        "asian_terminal_minus_average" => asian(AsianKind::TerminalMinusAverage, 0.0),
        "asian_average_minus_terminal" => asian(AsianKind::AverageMinusTerminal, 0.0),
        "cash" => Box::new(Cash),
        "terminal_coordinate" => Box::new(TerminalCoordinate { coordinate }),
        other => return Err(PayoffError::Unknown(other.to_string())),
    })
}

/// Outcome of sweeping the declared modulus over a pair corpus.
#[derive(Clone, Debug, Serialize)]
pub struct ModulusReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest value of |dG| - m(dist) observed (negative when clean).
    pub worst_excess: f64,
}

/// Checks `|G(a) - G(b)| <= m(dist(a,b))` on every pair, under the
/// payoff's declared metric.
pub fn modulus_check(
    payoff: &dyn Payoff,
    pairs: &[(StepPath, StepPath)],
) -> Result<ModulusReport, PathError> {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in pairs {
        let dist = match payoff.metric_flavor() {
            MetricFlavor::Skorokhod => skorokhod_distance(a, b)?,
            MetricFlavor::Modified => modified_distance(a, b)?,
        };
        let excess = (payoff.evaluate(a) - payoff.evaluate(b)).abs() - payoff.modulus(dist);
        worst = worst.max(excess);
        if excess > 1e-10 {
            violations += 1;
        }
    }
    Ok(ModulusReport {
        pairs: pairs.len(),
        violations,
        worst_excess: worst,
    })
}

/// Checks the declared growth envelope on a path corpus; returns the number
/// of violations.
pub fn growth_check(payoff: &dyn Payoff, paths: &[StepPath]) -> usize {
    let Growth { kind, constant } = payoff.growth();
    paths
        .iter()
        .filter(|p| {
            let anchor = match kind {
                GrowthKind::LinearTerminal => {
                    p.terminal().iter().map(|v| v * v).sum::<f64>().sqrt()
                }
                GrowthKind::LinearSupremum => p.sup_norm(),
            };
            payoff.evaluate(p).abs() > constant * (1.0 + anchor) + 1e-10
        })
        .count()
}

/// `G + C (1 + sum_c S_T^c)`: nonnegative whenever |G| <= C (1 + |S_T|).
pub struct ShiftedPayoff {
    pub inner: Box<dyn Payoff>,
    pub constant: f64,
}

impl Payoff for ShiftedPayoff {
    fn name(&self) -> String {
        format!("{}+terminal_shift", self.inner.name())
    }
    fn evaluate(&self, path: &StepPath) -> f64 {
        let s: f64 = path.terminal().iter().sum();
        self.inner.evaluate(path) + self.constant * (1.0 + s)
    }
    fn metric_flavor(&self) -> MetricFlavor {
        self.inner.metric_flavor()
    }
    fn modulus(&self, delta: f64) -> f64 {
        // the added leg moves by C * l1-move of the terminal value
        self.inner.modulus(delta) + self.constant * delta * 2.0f64.max(1.0)
    }
    fn growth(&self) -> Growth {
        let g = self.inner.growth();
        Growth {
            kind: GrowthKind::LinearTerminal,
            constant: g.constant * 3.0 + self.constant * 3.0,
        }
    }
}

/// `min(G, cap)`.
pub struct CappedPayoff {
    pub inner: Box<dyn Payoff>,
    pub cap: f64,
}

impl Payoff for CappedPayoff {
    fn name(&self) -> String {
        format!("{}^cap", self.inner.name())
    }
    fn evaluate(&self, path: &StepPath) -> f64 {
        self.inner.evaluate(path).min(self.cap)
    }
    fn metric_flavor(&self) -> MetricFlavor {
        self.inner.metric_flavor()
    }
    fn modulus(&self, delta: f64) -> f64 {
        self.inner.modulus(delta)
    }
    fn growth(&self) -> Growth {
        self.inner.growth()
    }
    fn bound(&self) -> Option<f64> {
        // capping bounds from above only; a two-sided bound still needs one
        // on the inner payoff
        self.inner.bound().map(|b| b.max(self.cap.abs()))
    }
}

/// `max(G, floor)`.
pub struct FlooredPayoff {
    pub inner: Box<dyn Payoff>,
    pub floor: f64,
}

impl Payoff for FlooredPayoff {
    fn name(&self) -> String {
        format!("{}^floor", self.inner.name())
    }
    fn evaluate(&self, path: &StepPath) -> f64 {
        self.inner.evaluate(path).max(self.floor)
    }
    fn metric_flavor(&self) -> MetricFlavor {
        self.inner.metric_flavor()
    }
    fn modulus(&self, delta: f64) -> f64 {
        self.inner.modulus(delta)
    }
    fn growth(&self) -> Growth {
        self.inner.growth()
    }
}
