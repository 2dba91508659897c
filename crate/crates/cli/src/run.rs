//! The six subcommands: solve, sweep, verify, and measure utilities.
//!
//! Sweep points (one per level or per perturbation step) run on worker
//! threads; rows are collected and written by the calling thread in
//! deterministic order, so concurrency never changes an artifact.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use mot_core::grid::GridSpec;
use mot_core::hedging::{verify_superreplication, LiftedPortfolio, SLACK_TOL};
use mot_core::lattice::enumerate_lattice;
use mot_core::measures::{
    convex_order_check, l1_marginal_deviation, mean_preserving_spread, prokhorov_distance,
    prokhorov_exact, ConvexWitness, DiscreteMeasure, MartingaleCoupling,
};
use mot_core::mot::{evaluate_on_lattice, MOTProblem, MOTSolution, SolveMode};
use mot_core::paths::{modified_distance, skorokhod_distance, StepPath};
use mot_core::payoffs::make_payoff;
use mot_core::sampling::{make_generator, sample_paths};
use mot_core::tree::PathLattice;

use crate::config::RunConfig;
use crate::CliError;

/// Weights below this are dropped from the reported support.
const SUPPORT_CUT: f64 = 1e-12;

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Solver(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Builds the truncated lattice a config describes.
fn build_lattice(config: &RunConfig) -> Result<(GridSpec, PathLattice), CliError> {
    let spec = config.grid()?.build()?;
    let trunc = config.truncation()?.build(spec);
    let images = enumerate_lattice(&trunc)?;
    let lattice = PathLattice::build(images.into_iter().map(|i| i.path).collect())?;
    Ok((spec, lattice))
}

fn gamma_bound(config: &RunConfig, spec: &GridSpec) -> f64 {
    config.gamma_bound.unwrap_or(f64::from(spec.n()))
}

/// Pairwise convex-order gate, mirrored from the multi-marginal solver so
/// dual-side runs fail with the same exit code before building the LP.
fn convex_gate(marginals: &[(f64, DiscreteMeasure)]) -> Result<(), CliError> {
    for (i, pair) in marginals.windows(2).enumerate() {
        let report = convex_order_check(&pair[0].1, &pair[1].1)?;
        if !report.ordered {
            return Err(CliError::Infeasible(format!(
                "marginals at date indices {i} and {} are not in convex order",
                i + 1
            )));
        }
    }
    Ok(())
}

// ---- price ----

#[derive(Serialize)]
struct LegOutput {
    date: f64,
    atoms: Vec<Vec<f64>>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct SupportEntry {
    path: usize,
    weight: f64,
}

#[derive(Serialize)]
struct PriceOutput {
    config: RunConfig,
    seed: u64,
    side: String,
    lattice_paths: usize,
    value: f64,
    gap: f64,
    defect: f64,
    marginal_deviation: f64,
    gamma_box_active: bool,
    infeasible_relaxation: bool,
    worst_hedge_slack: Option<f64>,
    iterations: usize,
    pivot_hash: u64,
    static_legs: Vec<LegOutput>,
    dynamic_duals: Vec<Vec<f64>>,
    support: Vec<SupportEntry>,
}

fn solution_output(
    config: &RunConfig,
    seed: u64,
    side: &str,
    lattice: &PathLattice,
    sol: &MOTSolution,
) -> PriceOutput {
    PriceOutput {
        config: config.clone(),
        seed,
        side: side.to_string(),
        lattice_paths: lattice.paths().len(),
        value: sol.value,
        gap: sol.gap,
        defect: sol.defect,
        marginal_deviation: sol.marginal_deviation,
        gamma_box_active: sol.gamma_box_active,
        infeasible_relaxation: sol.infeasible_relaxation,
        worst_hedge_slack: sol.worst_hedge_slack,
        iterations: sol.iterations,
        pivot_hash: sol.pivot_hash,
        static_legs: sol
            .static_legs
            .iter()
            .map(|l| LegOutput {
                date: l.date,
                atoms: l.atoms.clone(),
                values: l.values.clone(),
            })
            .collect(),
        dynamic_duals: sol.dynamic_duals.clone(),
        support: sol
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > SUPPORT_CUT)
            .map(|(path, w)| SupportEntry { path, weight: *w })
            .collect(),
    }
}

/// Runs the configured solve and returns the solution plus the side label.
fn solve_configured(
    config: &RunConfig,
    spec: &GridSpec,
    lattice: &PathLattice,
) -> Result<(MOTSolution, String), CliError> {
    let payoff = make_payoff(config.payoff()?)?;
    let values = evaluate_on_lattice(payoff.as_ref(), lattice);
    let marginals = config.built_marginals()?;
    let side = config.side.clone().unwrap_or_else(|| "primal".to_string());
    if !matches!(side.as_str(), "primal" | "dual") {
        return Err(CliError::Config(format!(
            "side must be 'primal' or 'dual', got '{side}'"
        )));
    }
    let mut problem = MOTProblem::new(lattice, values, marginals.clone(), gamma_bound(config, spec))?;
    if let Some(relaxed) = &config.relaxed {
        if side == "dual" {
            return Err(CliError::Config(
                "relaxed mode is primal by nature; drop 'side'".into(),
            ));
        }
        problem = problem.with_mode(SolveMode::Relaxed {
            c: relaxed.budget,
            level: relaxed.level,
        })?;
        return Ok((problem.solve_relaxed()?, "relaxed".to_string()));
    }
    let sol = match side.as_str() {
        "dual" => {
            if marginals.len() > 1 {
                convex_gate(&marginals)?;
            }
            problem.solve_dual_superhedge()?
        }
        _ if marginals.len() > 1 => problem.solve_multi_marginal()?,
        _ => problem.solve_primal()?,
    };
    Ok((sol, side))
}

pub fn cmd_price(config: RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (spec, lattice) = build_lattice(&config)?;
    let (sol, side) = solve_configured(&config, &spec, &lattice)?;
    let output = solution_output(&config, seed, &side, &lattice, &sol);
    let path = write_json(out, "price.json", &output)?;
    println!("side {side}");
    println!("lattice paths {}", lattice.paths().len());
    println!("value {:.12}", sol.value);
    println!("duality gap {:.3e}", sol.gap);
    println!("martingale defect {:.3e}", sol.defect);
    println!("marginal deviation {:.3e}", sol.marginal_deviation);
    if sol.infeasible_relaxation {
        println!("relaxed market admits no measure at this budget");
    }
    if let Some(slack) = sol.worst_hedge_slack {
        println!("worst hedge slack {slack:.3e}");
    }
    println!("wrote {}", path.display());
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

// ---- converge ----

#[derive(Serialize)]
struct ConvergeRow {
    n: u32,
    value: f64,
    duality_gap: f64,
    /// Shifted-time part of the approximation bound: `2 n mesh(n)`.
    time_bound: f64,
    /// Modulus part: `3 m_G(3 mesh(n))`.
    modulus_bound: f64,
}

#[derive(Serialize)]
struct ConvergeOutput {
    config: RunConfig,
    seed: u64,
    rows: Vec<ConvergeRow>,
}

fn converge_point(config: &RunConfig, n: u32) -> Result<ConvergeRow, CliError> {
    let grid = config.grid()?;
    let spec = GridSpec::new(n, grid.dim, grid.horizon)
        .map_err(|e| CliError::Config(format!("level {n}: {e}")))?;
    let trunc = config.truncation()?.build(spec);
    let images = enumerate_lattice(&trunc)?;
    let lattice = PathLattice::build(images.into_iter().map(|i| i.path).collect())?;
    let payoff = make_payoff(config.payoff()?)?;
    let values = evaluate_on_lattice(payoff.as_ref(), &lattice);
    // marginals are re-projected onto each level's grid; atoms already on
    // the coarsest grid of the sweep pass through unchanged
    let mut marginals = Vec::new();
    for m in &config.built_marginals()? {
        marginals.push((m.0, mot_core::measures::project_measure(&m.1, n)?));
    }
    if marginals.len() > 1 {
        convex_gate(&marginals)?;
    }
    let bound = config.gamma_bound.unwrap_or(f64::from(n));
    let problem = MOTProblem::new(&lattice, values, marginals.clone(), bound)?;
    let primal = if marginals.len() > 1 {
        problem.solve_multi_marginal()?
    } else {
        problem.solve_primal()?
    };
    let dual = problem.solve_dual_superhedge()?;
    Ok(ConvergeRow {
        n,
        value: primal.value,
        duality_gap: (primal.value - dual.value).abs(),
        time_bound: 2.0 * f64::from(n) * spec.mesh(),
        modulus_bound: 3.0 * payoff.modulus(3.0 * spec.mesh()),
    })
}

pub fn cmd_converge(config: RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let [lo, hi] = config
        .n_range
        .ok_or_else(|| CliError::Config("config needs 'n_range': [lo, hi]".into()))?;
    if lo == 0 || hi < lo {
        return Err(CliError::Config(format!(
            "'n_range' must satisfy 1 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    let results: Vec<Result<ConvergeRow, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (lo..=hi)
            .map(|n| {
                let cfg = &config;
                scope.spawn(move || converge_point(cfg, n))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("n,value,duality_gap,time_bound,modulus_bound\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n, r.value, r.duality_gap, r.time_bound, r.modulus_bound
        ));
    }
    let csv_path = write_text(out, "converge.csv", &csv)?;
    let json_path = write_json(out, "converge.json", &ConvergeOutput { config, seed, rows })?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

// ---- continuity ----

#[derive(Serialize)]
struct ContinuityRow {
    k: usize,
    prokhorov: f64,
    value_gap: f64,
}

#[derive(Serialize)]
struct ContinuityOutput {
    config: RunConfig,
    seed: u64,
    base_value: f64,
    rows: Vec<ContinuityRow>,
    /// Final value gap strictly below the first one.
    converging: bool,
}

pub fn cmd_continuity(config: RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (spec, lattice) = build_lattice(&config)?;
    let payoff = make_payoff(config.payoff()?)?;
    let values = evaluate_on_lattice(payoff.as_ref(), &lattice);
    let marginals = config.built_marginals()?;
    if marginals.len() != 1 {
        return Err(CliError::Config(
            "continuity sweeps a single terminal marginal".into(),
        ));
    }
    let sweep = config.continuity.clone().unwrap_or(crate::config::ContinuityConfig {
        steps: 6,
        fraction: 0.08,
        offset: None,
    });
    if sweep.steps == 0 || !(sweep.fraction > 0.0 && sweep.fraction <= 1.0) {
        return Err(CliError::Config(
            "'continuity' needs steps >= 1 and fraction in (0, 1]".into(),
        ));
    }
    let offset = sweep
        .offset
        .unwrap_or_else(|| 0.5f64.powi(spec.n() as i32));
    let base = mot_core::measures::project_measure(&marginals[0].1, spec.n())?;
    let bound = gamma_bound(&config, &spec);
    let date = marginals[0].0;
    let solve = |m: DiscreteMeasure| -> Result<f64, CliError> {
        let problem = MOTProblem::new(&lattice, values.clone(), vec![(date, m)], bound)?;
        Ok(problem.solve_primal()?.value)
    };
    let base_value = solve(base.clone())?;
    let results: Vec<Result<ContinuityRow, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=sweep.steps)
            .map(|k| {
                let base = &base;
                let solve = &solve;
                let fraction = sweep.fraction / 2.0f64.powi(k as i32 - 1);
                scope.spawn(move || {
                    let nu = mean_preserving_spread(base, fraction, offset)?;
                    let prokhorov = prokhorov_distance(&nu, base)?;
                    let value = solve(nu)?;
                    Ok(ContinuityRow {
                        k,
                        prokhorov,
                        value_gap: (value - base_value).abs(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let converging = rows.len() < 2 || rows.last().unwrap().value_gap < rows[0].value_gap;
    let mut csv = String::from("k,prokhorov,value_gap\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.k, r.prokhorov, r.value_gap));
    }
    let csv_path = write_text(out, "continuity.csv", &csv)?;
    let json_path = write_json(
        out,
        "continuity.json",
        &ContinuityOutput {
            config,
            seed,
            base_value,
            rows,
            converging,
        },
    )?;
    println!("base value {base_value:.12}");
    println!("converging {converging}");
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

// ---- hedge-verify ----

#[derive(Serialize)]
struct HedgeVerifyOutput {
    config: RunConfig,
    seed: u64,
    dual_value: f64,
    shift: f64,
    paths: usize,
    /// Worst slack over paths whose lift stayed on the lattice; absent
    /// when nothing could be verified.
    min_slack: Option<f64>,
    violations: usize,
    off_lattice: usize,
    integral_floor: f64,
    violating_paths: Vec<usize>,
}

pub fn cmd_hedge_verify(config: RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (spec, lattice) = build_lattice(&config)?;
    let payoff = make_payoff(config.payoff()?)?;
    let values = evaluate_on_lattice(payoff.as_ref(), &lattice);
    let marginals = config.built_marginals()?;
    if marginals.len() > 1 {
        convex_gate(&marginals)?;
    }
    let problem = MOTProblem::new(
        &lattice,
        values,
        marginals,
        gamma_bound(&config, &spec),
    )?;
    let mut sol = problem.solve_dual_superhedge()?;
    if let Some(offset) = config.leg_offset {
        // negative control: a corrupted static leg must trip the verifier
        for v in &mut sol.static_legs[0].values {
            *v -= offset;
        }
    }
    let portfolio = LiftedPortfolio::from_solution(&lattice, spec, &sol)?;
    let generator_cfg = config.generator()?;
    let generator = make_generator(&generator_cfg.name, &generator_cfg.params)?;
    if generator.dim() != spec.dim()
        || (generator.horizon() - spec.horizon()).abs() > 1e-12
    {
        return Err(CliError::Config(
            "generator dimension/horizon must match the grid".into(),
        ));
    }
    let count = config.num_paths.unwrap_or(1000);
    let corpus = sample_paths(generator.as_ref(), count, seed)?;
    let shift = config
        .shift
        .unwrap_or_else(|| 2.0 * f64::from(spec.n()) * spec.mesh()
            + 3.0 * payoff.modulus(3.0 * spec.mesh()));
    let report = verify_superreplication(&portfolio, payoff.as_ref(), &corpus, shift)?;
    let violating_paths: Vec<usize> = report
        .slacks
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < SLACK_TOL)
        .map(|(i, _)| i)
        .collect();
    let min_finite = report
        .slacks
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::INFINITY, f64::min);
    let output = HedgeVerifyOutput {
        config,
        seed,
        dual_value: sol.value,
        shift,
        paths: corpus.len(),
        min_slack: min_finite.is_finite().then_some(min_finite),
        violations: report.violations,
        off_lattice: report.off_lattice,
        integral_floor: report.integral_floor,
        violating_paths: violating_paths.clone(),
    };
    let path = write_json(out, "hedge_report.json", &output)?;
    println!("dual value {:.12}", sol.value);
    println!("shift {shift:.6}");
    println!("paths {}", corpus.len());
    println!("min slack {:.3e}", report.min_slack);
    println!("violations {}", report.violations);
    println!("off lattice {}", report.off_lattice);
    println!("wrote {}", path.display());
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    if report.violations > 0 {
        return Err(CliError::Hedge(format!(
            "{} of {} paths violate super-replication (worst slack {:.3e}); ids {:?}",
            report.violations,
            corpus.len(),
            report.min_slack,
            &violating_paths[..violating_paths.len().min(20)]
        )));
    }
    Ok(())
}

// ---- measure-tools ----

#[derive(Serialize)]
struct PairReport {
    a: usize,
    b: usize,
    prokhorov: f64,
    l1_deviation: f64,
    ordered: bool,
    coupling: Option<MartingaleCoupling>,
    witness: Option<ConvexWitness>,
}

#[derive(Serialize)]
struct MeasureToolsOutput {
    config: RunConfig,
    seed: u64,
    pairs: Vec<PairReport>,
}

pub fn cmd_measure_tools(
    config: RunConfig,
    seed: u64,
    out: &Path,
    exact: bool,
) -> Result<(), CliError> {
    let start = Instant::now();
    if config.measures.len() < 2 {
        return Err(CliError::Config(
            "config needs at least two entries in 'measures'".into(),
        ));
    }
    let mut pairs = Vec::new();
    for (i, pair) in config.measures.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let prokhorov = if exact {
            prokhorov_exact(a, b)?
        } else {
            prokhorov_distance(a, b)?
        };
        let l1 = l1_marginal_deviation(a, b)?;
        let order = convex_order_check(a, b)?;
        println!(
            "measures {i} vs {}: prokhorov {prokhorov:.6}, l1 {l1:.6}, convex order {}",
            i + 1,
            order.ordered
        );
        if let Some(w) = &order.witness {
            println!(
                "  witness: convex function separates ({:.6} vs {:.6})",
                w.integral_a, w.integral_b
            );
        }
        pairs.push(PairReport {
            a: i,
            b: i + 1,
            prokhorov,
            l1_deviation: l1,
            ordered: order.ordered,
            coupling: order.coupling,
            witness: order.witness,
        });
    }
    let path = write_json(out, "measures.json", &MeasureToolsOutput { config, seed, pairs })?;
    println!("wrote {}", path.display());
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

// ---- distance ----

#[derive(Serialize)]
struct DistanceOutput {
    config: RunConfig,
    seed: u64,
    skorokhod: f64,
    modified: f64,
}

pub fn cmd_distance(config: RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    if config.paths.len() != 2 {
        return Err(CliError::Config(
            "config needs exactly two entries in 'paths'".into(),
        ));
    }
    let build = |p: &crate::config::PathConfig| -> Result<StepPath, CliError> {
        StepPath::new(p.dim, p.horizon, p.jump_times.clone(), p.values.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    };
    let a = build(&config.paths[0])?;
    let b = build(&config.paths[1])?;
    let skorokhod = skorokhod_distance(&a, &b)?;
    let modified = modified_distance(&a, &b)?;
    let output = DistanceOutput {
        config,
        seed,
        skorokhod,
        modified,
    };
    let path = write_json(out, "distance.json", &output)?;
    println!("skorokhod {skorokhod:.12}");
    println!("modified {modified:.12}");
    println!("wrote {}", path.display());
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}
