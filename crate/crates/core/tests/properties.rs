//! Property tests: structural invariants and pathwise inequalities that
//! must hold for every input, exercised on randomized corpora.

use proptest::prelude::*;

use mot_core::discretization::{
    map_pi, map_pi_check, map_pi_hat, multi_marginal_stopping_times, shifted_times,
    stopping_times, verify_encoding,
};
use mot_core::grid::GridSpec;
use mot_core::hedging::{
    burkholder_qv_hedge, integral_by_parts, pathwise_integral, DynamicStrategy, PowerHedge,
    SLACK_TOL,
};
use mot_core::measures::{project_measure, prokhorov_distance, DiscreteMeasure};
use mot_core::mot::{evaluate_on_lattice, MOTProblem};
use mot_core::oracle::skorokhod_distance_oracle;
use mot_core::paths::{modified_distance, skorokhod_distance, StepPath};
use mot_core::payoffs::{make_payoff, modulus_check, payoff_names, PayoffSpec};
use mot_core::tree::PathLattice;

// ---- generators ----

/// Raw jump material: times in (0, 1) fractions of the horizon and
/// log-multipliers; construction sorts, separates, and canonicalizes.
fn path_from_raw(dim: usize, horizon: f64, raw: &[(f64, Vec<f64>)]) -> StepPath {
    let mut jumps: Vec<(f64, Vec<f64>)> = raw.to_vec();
    jumps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut times = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![vec![1.0; dim]];
    let mut prev_t = 0.0;
    for (frac, logs) in jumps {
        let t = frac * horizon;
        if t <= prev_t + 1e-3 * horizon || t >= horizon * 0.995 {
            continue;
        }
        prev_t = t;
        let last = values.last().unwrap().clone();
        let next: Vec<f64> = last.iter().zip(&logs).map(|(v, z)| v * z.exp()).collect();
        times.push(t);
        values.push(next);
    }
    StepPath::new(dim, horizon, times, values).unwrap()
}

fn arb_path(dim: usize, max_jumps: usize) -> impl Strategy<Value = StepPath> {
    prop::collection::vec(
        (
            0.02f64..0.95,
            prop::collection::vec(-0.55f64..0.55, dim..=dim),
        ),
        0..=max_jumps,
    )
    .prop_map(move |raw| path_from_raw(dim, 1.0, &raw))
}

/// A step strategy with breakpoints drawn independently of the path.
fn arb_strategy(dim: usize) -> impl Strategy<Value = DynamicStrategy> {
    prop::collection::vec(
        (
            0.02f64..0.95,
            prop::collection::vec(-3.0f64..3.0, dim..=dim),
        ),
        1..=5,
    )
    .prop_map(move |raw| {
        let mut raw = raw;
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut breakpoints = vec![0.0];
        let mut values = vec![vec![0.5; dim]];
        let mut prev = 0.0;
        for (t, v) in raw {
            if t > prev + 1e-3 && t < 0.99 {
                prev = t;
                breakpoints.push(t);
                values.push(v);
            }
        }
        DynamicStrategy::new(dim, 1.0, breakpoints, values).unwrap()
    })
}

// ---- path metric ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn skorokhod_metric_axioms(
        a in arb_path(1, 4),
        b in arb_path(1, 4),
        c in arb_path(1, 4),
    ) {
        let dab = skorokhod_distance(&a, &b).unwrap();
        let dba = skorokhod_distance(&b, &a).unwrap();
        let daa = skorokhod_distance(&a, &a).unwrap();
        prop_assert!(daa.abs() <= 1e-12);
        prop_assert!((dab - dba).abs() <= 1e-12);
        prop_assert!(dab >= 0.0);
        let dac = skorokhod_distance(&a, &c).unwrap();
        let dbc = skorokhod_distance(&b, &c).unwrap();
        prop_assert!(dac <= dab + dbc + 1e-9, "triangle: {dac} > {dab} + {dbc}");
    }

    #[test]
    fn modified_metric_adds_integral_term(
        a in arb_path(1, 4),
        b in arb_path(1, 4),
    ) {
        let d = skorokhod_distance(&a, &b).unwrap();
        let dm = modified_distance(&a, &b).unwrap();
        prop_assert!(dm >= d - 1e-12);
        let integral_gap = (a.time_integral()[0] - b.time_integral()[0]).abs();
        prop_assert!(dm <= d + integral_gap + 1e-12);
        prop_assert!(modified_distance(&a, &a).unwrap().abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_distance_matches_exhaustive_oracle(
        a in arb_path(1, 3),
        b in arb_path(1, 3),
    ) {
        let fast = skorokhod_distance(&a, &b).unwrap();
        let slow = skorokhod_distance_oracle(&a, &b).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-9, "dp {fast} vs oracle {slow}");
    }
}

// ---- discretization ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discretization_chain_respects_stated_bounds(
        path in arb_path(1, 6),
        n in 2u32..=4,
    ) {
        let spec = GridSpec::new(n, 1, 1.0).unwrap();
        let eps = spec.mesh();
        let trace = stopping_times(&path, eps).unwrap();
        // increments in (0, eps]; levels sample the path
        for w in trace.times().windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(w[1] - w[0] <= eps + 1e-12);
        }
        for (t, level) in trace.times().iter().zip(trace.levels()) {
            prop_assert_eq!(path.evaluate(*t), level.as_slice());
        }
        let pi = map_pi(&trace).unwrap();
        let pi_check = map_pi_check(&trace, &spec).unwrap();
        let image = map_pi_hat(&trace, &spec).unwrap();
        prop_assert!(skorokhod_distance(&path, &pi).unwrap() <= eps + 1e-12);
        prop_assert!(skorokhod_distance(&pi, &pi_check).unwrap() <= eps + 1e-12);
        prop_assert!(
            skorokhod_distance(&pi_check, &image.path).unwrap() <= 3.0 * eps + 1e-12
        );
        prop_assert!(verify_encoding(&image.times, &image.levels, &spec));
    }

    #[test]
    fn shifted_times_stay_within_two_meshes(
        path in arb_path(1, 6),
        n in 2u32..=4,
    ) {
        let spec = GridSpec::new(n, 1, 1.0).unwrap();
        let trace = stopping_times(&path, spec.mesh()).unwrap();
        let shifted = shifted_times(&trace, &spec).unwrap();
        prop_assert_eq!(shifted.len(), trace.times().len());
        for w in shifted.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        prop_assert!(*shifted.last().unwrap() < 1.0);
        for (tau, tau_hat) in trace.times().iter().zip(&shifted) {
            prop_assert!(
                (tau_hat - tau).abs() <= 2.0 * spec.mesh() + 1e-12,
                "|{tau_hat} - {tau}| > 2 mesh"
            );
        }
    }

    #[test]
    fn multi_marginal_trace_pins_dates(
        path in arb_path(1, 6),
    ) {
        let dates = [0.5, 1.0];
        let trace = multi_marginal_stopping_times(&path, 0.2, &dates).unwrap();
        prop_assert_eq!(trace.num_intervals(), 2);
        // each interval starts at its left date and ends at its right date
        prop_assert_eq!(trace.times(0)[0], 0.0);
        prop_assert_eq!(*trace.times(0).last().unwrap(), 0.5);
        prop_assert_eq!(trace.times(1)[0], 0.5);
        prop_assert_eq!(*trace.times(1).last().unwrap(), 1.0);
        // increments never exceed the radius nor the previous increment
        for i in 0..2 {
            let times = trace.times(i);
            let mut prev = f64::INFINITY;
            for w in times.windows(2) {
                let inc = w[1] - w[0];
                prop_assert!(inc > 0.0 && inc <= 0.2 + 1e-12);
                prop_assert!(inc <= prev + 1e-12);
                prev = inc;
            }
        }
        let (times, levels) = trace.skeleton();
        prop_assert_eq!(*times.last().unwrap(), 1.0);
        prop_assert_eq!(levels.last().unwrap().as_slice(), path.terminal());
    }

    #[test]
    fn traces_are_adapted_to_the_shared_prefix(
        path in arb_path(1, 5),
        cut in 1usize..=3,
        suffix_frac in 0.2f64..0.9,
        suffix_log in -0.5f64..0.5,
    ) {
        let eps = 0.25;
        let trace = stopping_times(&path, eps).unwrap();
        let k = cut.min(trace.m() - 1);
        let tau_k = trace.times()[k];
        // rebuild the prefix of the path up to tau_k, then attach a fresh
        // suffix jump strictly after tau_k
        let mut times = Vec::new();
        let mut values = vec![path.values()[0].clone()];
        for (j, t) in path.jump_times().iter().enumerate() {
            if *t <= tau_k {
                times.push(*t);
                values.push(path.values()[j + 1].clone());
            }
        }
        let suffix_t = tau_k + suffix_frac * (1.0 - tau_k) * 0.98;
        if suffix_t > tau_k + 1e-6 && suffix_t < 0.995 {
            let last = values.last().unwrap().clone();
            times.push(suffix_t);
            values.push(vec![last[0] * suffix_log.exp() * 1.2]);
        }
        let other = StepPath::new(1, 1.0, times, values).unwrap();
        let other_trace = stopping_times(&other, eps).unwrap();
        // the first k stopping times and sampled values agree
        for j in 0..=k.min(other_trace.m()) {
            prop_assert_eq!(trace.times()[j], other_trace.times()[j]);
            prop_assert_eq!(&trace.levels()[j], &other_trace.levels()[j]);
        }
    }
}

// ---- pathwise integration ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jump_sum_agrees_with_integration_by_parts(
        path in arb_path(1, 6),
        strategy in arb_strategy(1),
        upto_frac in 0.1f64..=1.0,
    ) {
        let upto = upto_frac * 1.0;
        let direct = pathwise_integral(&strategy, &path, upto).unwrap();
        let parts = integral_by_parts(&strategy, &path, upto).unwrap();
        let scale = 1.0 + path.sup_norm() * strategy.sup_norm();
        prop_assert!(
            (direct - parts).abs() <= 1e-12 * scale,
            "jump sum {direct} vs parts {parts}"
        );
    }
}

// ---- explicit hedges ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_hedge_dominates_running_supremum(
        path in arb_path(1, 6),
        eps in prop::sample::select(vec![0.1, 0.25, 0.5]),
    ) {
        for p in [1.5, 2.0, 3.0] {
            let hedge = PowerHedge::new(p).unwrap();
            let cert = hedge.verify(&path, eps).unwrap();
            prop_assert!(
                cert.min_slack >= SLACK_TOL,
                "p={p} eps={eps}: slack {}",
                cert.min_slack
            );
        }
    }

    #[test]
    fn qv_hedge_dominates_root_quadratic_variation(
        path in arb_path(1, 6),
        eps in prop::sample::select(vec![0.05, 0.1, 0.5]),
    ) {
        let cert = burkholder_qv_hedge(eps, &path, &[1.0], 0.25).unwrap();
        prop_assert!(cert.min_slack >= SLACK_TOL, "slack {}", cert.min_slack);
        prop_assert!(cert.max_gamma <= 1.0 + 1e-9, "gamma {}", cert.max_gamma);
        // two-date version with an interior date
        let cert2 = burkholder_qv_hedge(eps, &path, &[0.5, 1.0], 0.25).unwrap();
        prop_assert!(cert2.min_slack >= SLACK_TOL);
        prop_assert!(cert2.stop_times.iter().any(|t| (t - 0.5).abs() <= 1e-12));
    }
}

// ---- measures ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn projection_moves_mass_up_by_less_than_the_mesh(
        raw in prop::collection::vec((0.1f64..3.0, 0.05f64..1.0), 1..=5),
        n in 1u32..=5,
    ) {
        let atoms: Vec<Vec<f64>> = raw.iter().map(|(a, _)| vec![*a]).collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        let weights: Vec<f64> = raw.iter().map(|(_, w)| w / total).collect();
        let m = DiscreteMeasure::new(atoms, weights).unwrap();
        let projected = project_measure(&m, n).unwrap();
        let step = 0.5f64.powi(n as i32);
        prop_assert!((projected.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        // the projected mean dominates and moves by less than one step
        let before = m.mean()[0];
        let after = projected.mean()[0];
        prop_assert!(after >= before - 1e-12);
        prop_assert!(after - before < step + 1e-12);
    }

    #[test]
    fn prokhorov_is_a_metric_on_small_supports(
        raw_a in prop::collection::vec((0.2f64..2.0, 0.05f64..1.0), 1..=3),
        raw_b in prop::collection::vec((0.2f64..2.0, 0.05f64..1.0), 1..=3),
    ) {
        let build = |raw: &[(f64, f64)]| {
            let atoms: Vec<Vec<f64>> = raw.iter().map(|(a, _)| vec![*a]).collect();
            let total: f64 = raw.iter().map(|(_, w)| w).sum();
            let weights: Vec<f64> = raw.iter().map(|(_, w)| w / total).collect();
            DiscreteMeasure::new(atoms, weights).unwrap()
        };
        let a = build(&raw_a);
        let b = build(&raw_b);
        let dab = prokhorov_distance(&a, &b).unwrap();
        let dba = prokhorov_distance(&b, &a).unwrap();
        prop_assert!((dab - dba).abs() <= 1e-9);
        prop_assert!(prokhorov_distance(&a, &a).unwrap() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&dab));
    }
}

// ---- payoff moduli ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn declared_moduli_bound_payoff_increments(
        a in arb_path(1, 5),
        b in arb_path(1, 5),
    ) {
        for name in payoff_names() {
            let spec = PayoffSpec {
                name: name.to_string(),
                params: serde_json::json!({"strike": 1.0}),
            };
            let payoff = make_payoff(&spec).unwrap();
            let report = modulus_check(payoff.as_ref(), &[(a.clone(), b.clone())]).unwrap();
            prop_assert_eq!(
                report.violations, 0,
                "{} breaks its modulus: excess {}",
                name, report.worst_excess
            );
        }
    }
}

// ---- solver duality on random martingale trees ----

#[derive(Clone, Debug)]
struct BinomialFamily {
    paths: Vec<StepPath>,
    weights: Vec<f64>,
}

fn arb_binomial_family() -> impl Strategy<Value = BinomialFamily> {
    (
        0.1f64..0.4,
        0.5f64..0.9,
        1.05f64..1.7,
        0.35f64..0.92,
        1.05f64..1.7,
        0.35f64..0.92,
        1.05f64..1.7,
        0.35f64..0.92,
    )
        .prop_map(|(t1, t2, u0, d0, u1, d1, u2, d2)| {
            let two = |t1: f64, t2: f64, v1: f64, v2: f64| {
                StepPath::new(1, 1.0, vec![t1, t2], vec![vec![1.0], vec![v1], vec![v2]])
                    .unwrap()
            };
            let p0 = (1.0 - d0) / (u0 - d0);
            let p1 = (1.0 - d1) / (u1 - d1);
            let p2 = (1.0 - d2) / (u2 - d2);
            let paths = vec![
                two(t1, t2, u0, u0 * u1),
                two(t1, t2, u0, u0 * d1),
                two(t1, t2, d0, d0 * u2),
                two(t1, t2, d0, d0 * d2),
            ];
            let weights = vec![
                p0 * p1,
                p0 * (1.0 - p1),
                (1.0 - p0) * p2,
                (1.0 - p0) * (1.0 - p2),
            ];
            BinomialFamily { paths, weights }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn duality_holds_on_random_martingale_trees(family in arb_binomial_family()) {
        let lattice = PathLattice::build(family.paths.clone()).unwrap();
        let payoff = make_payoff(&PayoffSpec {
            name: "lookback_call_floating".to_string(),
            params: serde_json::Value::Null,
        })
        .unwrap();
        let values = evaluate_on_lattice(payoff.as_ref(), &lattice);
        // terminal law of the explicit martingale measure: always feasible
        let atoms: Vec<Vec<f64>> = family.paths.iter().map(|p| p.terminal().to_vec()).collect();
        let marginal = DiscreteMeasure::new(atoms, family.weights.clone()).unwrap();
        let expected: f64 = family
            .weights
            .iter()
            .zip(&values)
            .map(|(w, g)| w * g)
            .sum();
        let problem = MOTProblem::new(
            &lattice,
            values.clone(),
            vec![(1.0, marginal)],
            12.0,
        )
        .unwrap();
        let primal = problem.solve_primal().unwrap();
        let dual = problem.solve_dual_superhedge().unwrap();
        let scale = 1.0 + primal.value.abs();
        // the known coupling is feasible, so the optimum dominates it
        prop_assert!(primal.value >= expected - 1e-8 * scale);
        prop_assert!((primal.value - dual.value).abs() <= 1e-7 * scale);
        prop_assert!(primal.defect <= 1e-8);
        prop_assert!(primal.marginal_deviation <= 1e-9);
        if let Some(slack) = dual.worst_hedge_slack {
            prop_assert!(slack >= -1e-8 * scale);
        }
        // bitwise determinism of the pivot sequence
        let again = problem.solve_primal().unwrap();
        prop_assert_eq!(primal.value.to_bits(), again.value.to_bits());
        prop_assert_eq!(primal.pivot_hash, again.pivot_hash);
    }
}
