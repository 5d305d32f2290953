//! Acceptance suite: one test per verification criterion, each printing a
//! single `criterion N: PASS/FAIL - detail` line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 1 and 5 carry known red sub-assertions; the measured
//! discrepancies are printed and the analysis lives in the project notes.
//! Everything else is expected green.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_ocba::*;

fn report(criterion: &str, passed: bool, detail: String) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("{criterion}: {status} - {detail}");
    assert!(passed, "{criterion}: {detail}");
}

/// Random instances with every gap bounded away from zero so the numeric
/// oracle and the bounds are well posed.
fn random_truth(rng: &mut ChaCha8Rng, k: usize, m: usize) -> GroundTruth {
    loop {
        let means: Vec<f64> = (0..k * m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let vars: Vec<f64> = (0..k * m).map(|_| rng.random_range(0.25..4.0)).collect();
        if let Ok(t) = GroundTruth::new(k, m, means, vars) {
            if t.relevant_scenarios().iter().skip(1).all(|&id| t.gap(id) > 0.05) {
                return t;
            }
        }
    }
}

fn pooled_se(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1 * a.1 + b.1 * b.1).sqrt()
}

#[test]
fn criterion_1_allocator_oracle_agreement() {
    // As stated: per-coordinate agreement within 2% at N' = 1e5 and
    // f(closed form) <= 1.001 f(oracle) on 20 random instances with
    // k+m-1 <= 6. The closed form's pairwise ratios neglect the reference
    // scenario's own noise share, which is material at these sizes, so this
    // criterion measures that approximation gap rather than passing.
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let shapes = [(2usize, 2usize), (3, 2), (4, 3), (2, 5), (3, 1)];
    let total = 1e5;
    let mut worst_dev: f64 = 0.0;
    let mut worst_log_gap = f64::NEG_INFINITY;
    for instance in 0..20 {
        let (k, m) = shapes[instance % shapes.len()];
        let truth = random_truth(&mut rng, k, m);
        let oracle = numeric_min_f(&truth, total, 200_000).expect("oracle converges");
        let closed = asymptotic_allocation(&truth, total).expect("closed form");
        for &id in &truth.relevant_scenarios() {
            worst_dev = worst_dev.max(((oracle.get(id) - closed.get(id)) / closed.get(id)).abs());
        }
        let f_oracle = additive_pics_bound_log(&truth, &oracle).expect("log bound");
        let f_closed = additive_pics_bound_log(&truth, &closed).expect("log bound");
        worst_log_gap = worst_log_gap.max(f_closed - f_oracle);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let passed =
        worst_dev <= 0.02 && worst_log_gap <= 1.001f64.ln() && elapsed < 120.0;
    report(
        "criterion 1 (allocator-oracle agreement)",
        passed,
        format!(
            "max coordinate deviation {worst_dev:.3} (tolerance 0.02), \
             max log-objective excess {worst_log_gap:.3e} (tolerance {:.3e}), {elapsed:.1} s",
            1.001f64.ln()
        ),
    );
}

#[test]
fn criterion_2_zero_budget_outside_relevant_set() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0usize;
    for _ in 0..50 {
        let k = rng.random_range(2..=6);
        let m = rng.random_range(1..=5);
        let truth = random_truth(&mut rng, k, m);
        let alloc = asymptotic_allocation(&truth, rng.random_range(1e3..1e6)).expect("closed form");
        let set = IndexSet::from_truth(&truth);
        for i in 0..k {
            for j in 0..m {
                let id = ScenarioId::new(i, j);
                if !set.contains(id) && alloc.get(id) != 0.0 {
                    violations += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "criterion 2 (zeros outside the relevant set)",
        violations == 0 && elapsed < 10.0,
        format!("{violations} nonzero off-set coordinates over 50 instances, {elapsed:.1} s"),
    );
}

#[test]
fn criterion_3_bound_validity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_margin = f64::NEG_INFINITY;
    let mut failures = 0usize;
    for _ in 0..50 {
        let k = rng.random_range(2..=5);
        let m = rng.random_range(1..=5);
        let truth = random_truth(&mut rng, k, m);
        let samples: Vec<f64> = (0..k * m).map(|_| rng.random_range(2.0..40.0)).collect();
        let alloc = Allocation::new(k, m, samples).expect("positive allocation");
        let (estimate, se) = mc_pics(&truth, &alloc, 100_000, rng.random()).expect("mc");
        let additive = additive_pics_bound(&truth, &alloc).expect("bound");
        let multiplicative = multiplicative_pics_bound(&truth, &alloc).expect("bound");
        for bound in [additive, multiplicative] {
            let margin = estimate - bound - 3.0 * se;
            worst_margin = worst_margin.max(margin);
            if margin > 0.0 {
                failures += 1;
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "criterion 3 (Monte Carlo PICS below both bounds)",
        failures == 0 && elapsed < 300.0,
        format!(
            "{failures} violations over 50 instances, worst (estimate - bound - 3se) = \
             {worst_margin:.2e}, {elapsed:.1} s"
        ),
    );
}

#[test]
fn criterion_4_bound_coincidence_at_m_equal_1() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(2..=6);
        let truth = random_truth(&mut rng, k, 1);
        let samples: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..50.0)).collect();
        let alloc = Allocation::new(k, 1, samples).expect("allocation");
        let a = additive_pics_bound(&truth, &alloc).expect("bound");
        let b = multiplicative_pics_bound(&truth, &alloc).expect("bound");
        worst = worst.max((a - b).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "criterion 4 (m = 1 bound coincidence)",
        worst <= 1e-12 && elapsed < 5.0,
        format!("max |additive - multiplicative| = {worst:.2e} over 100 instances, {elapsed:.1} s"),
    );
}

#[test]
fn criterion_5_stage_rule_ordering() {
    // MM-CV, k=20, m=5, n0 = delta = 20, c = 50, 2000 replications:
    // PCS(AR-OCBA) > PCS(EA) > PCS(AR-OCBA-Starving), pairwise gaps beyond
    // 3 pooled standard errors. The first gap reproduces strongly; the
    // EA-above-Starving gap does not reproduce at this configuration for a
    // faithful implementation of the stage rules (the starving variant sits
    // at EA level here; it does drop below EA at larger m).
    let started = Instant::now();
    let sim = make_synthetic(20, 5, VarianceKind::Constant).expect("synthetic");
    let oracle = Oracle::from_truth(sim.truth());
    let config = ProcedureConfig {
        n0: 20,
        delta: 20,
        total_budget: (20 + 50) * 100,
        rule: AllocationRule::Proportional,
    };
    let reps = 2000;
    let ar = estimate_pcs(
        &sim,
        oracle,
        ProcedureKind::ArOcba(AllocationRule::Proportional),
        &config,
        reps,
        1000,
    )
    .expect("pcs");
    let ea = estimate_pcs(&sim, oracle, ProcedureKind::EqualAllocation, &config, reps, 1000)
        .expect("pcs");
    let starving = estimate_pcs(
        &sim,
        oracle,
        ProcedureKind::ArOcba(AllocationRule::MostStarving),
        &config,
        reps,
        1000,
    )
    .expect("pcs");
    let elapsed = started.elapsed().as_secs_f64();

    let gap_ar_ea = ar.0 - ea.0;
    let gap_ea_starving = ea.0 - starving.0;
    let ar_ea_ok = gap_ar_ea > 3.0 * pooled_se(ar, ea);
    let ea_starving_ok = gap_ea_starving > 3.0 * pooled_se(ea, starving);
    println!(
        "criterion 5 detail: PCS AR-OCBA {:.4}, EA {:.4}, Starving {:.4}; \
         AR-EA gap {:.4} (needs > {:.4}) {}; EA-Starving gap {:.4} (needs > {:.4}) {}",
        ar.0,
        ea.0,
        starving.0,
        gap_ar_ea,
        3.0 * pooled_se(ar, ea),
        if ar_ea_ok { "PASS" } else { "FAIL" },
        gap_ea_starving,
        3.0 * pooled_se(ea, starving),
        if ea_starving_ok { "PASS" } else { "FAIL" },
    );
    report(
        "criterion 5 (stage-rule ordering at c = 50)",
        ar_ea_ok && ea_starving_ok,
        format!(
            "AR {:.4} > EA {:.4}: {}, EA {:.4} > Starving {:.4}: {}, {elapsed:.1} s",
            ar.0,
            ea.0,
            if ar_ea_ok { "yes" } else { "no" },
            ea.0,
            starving.0,
            if ea_starving_ok { "yes" } else { "no" },
        ),
    );
}

#[test]
fn criterion_6_consistency_trend() {
    let started = Instant::now();
    let sim = make_synthetic(20, 5, VarianceKind::Constant).expect("synthetic");
    let oracle = Oracle::from_truth(sim.truth());
    let mut results = Vec::new();
    for c in [10u64, 20, 30, 40, 50] {
        let config = ProcedureConfig {
            n0: 20,
            delta: 20,
            total_budget: (20 + c) * 100,
            rule: AllocationRule::Proportional,
        };
        let r = estimate_pcs(
            &sim,
            oracle,
            ProcedureKind::ArOcba(AllocationRule::Proportional),
            &config,
            1000,
            2000,
        )
        .expect("pcs");
        results.push((c, r));
    }
    let mut worst_drop: f64 = 0.0;
    let mut ok = true;
    for pair in results.windows(2) {
        let (_, lo) = pair[0];
        let (_, hi) = pair[1];
        let drop = lo.0 - hi.0;
        worst_drop = worst_drop.max(drop);
        if drop > 2.0 * pooled_se(lo, hi) {
            ok = false;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let curve: Vec<String> = results.iter().map(|(c, r)| format!("c={c}:{:.3}", r.0)).collect();
    report(
        "criterion 6 (PCS nondecreasing in the budget)",
        ok,
        format!(
            "{}; worst adjacent drop {worst_drop:.4}, {elapsed:.1} s",
            curve.join(" ")
        ),
    );
}

#[test]
fn criterion_7_small_scale_concentration() {
    // The small-scale 3x3 instance at N = 5140 k m. The initialization and
    // batch sizes are not pinned for this experiment; n0 = 100, delta = 20
    // suits the 46k-observation budget. "Each relevant scenario exceeds every
    // irrelevant one" is checked against the run's terminal index set: the
    // third alternative's row is exactly tied in truth, so which of its
    // columns dominates is uniform by symmetry and no fixed labeling can win
    // that comparison in 90% of runs.
    let started = Instant::now();
    let means = vec![0.2, 0.1, 0.1, 0.4, 0.3, 0.3, 0.4, 0.4, 0.4];
    let truth = GroundTruth::new(3, 3, means, vec![1.0; 9]).expect("truth");
    let sim = SyntheticProblem::from_truth(truth.clone());
    let config = ProcedureConfig {
        n0: 100,
        delta: 20,
        total_budget: 5140 * 9,
        rule: AllocationRule::Proportional,
    };
    let true_set: Vec<usize> = truth
        .relevant_scenarios()
        .iter()
        .map(|id| id.alt * 3 + id.dist)
        .collect();

    let mut hold80 = 0usize;
    let mut realized_dominant = 0usize;
    for seed in 0..100u64 {
        let trace = run_meta_ocba(&sim, &config, 9000 + seed).expect("run");
        let total: u64 = trace.final_counts.iter().sum();
        let in_set: u64 = true_set.iter().map(|&i| trace.final_counts[i]).sum();
        if in_set as f64 >= 0.8 * total as f64 {
            hold80 += 1;
        }
        let final_set = IndexSet::from_means(3, 3, &trace.final_means).expect("final set");
        let min_in = final_set
            .entries()
            .iter()
            .map(|id| trace.final_counts[id.alt * 3 + id.dist])
            .min()
            .expect("nonempty");
        let max_out = (0..9)
            .filter(|i| {
                !final_set.contains(ScenarioId::new(i / 3, i % 3))
            })
            .map(|i| trace.final_counts[i])
            .max()
            .expect("nonempty");
        if min_in > max_out {
            realized_dominant += 1;
        }
    }
    let (pcs, _) = estimate_pcs(
        &sim,
        Oracle::from_truth(&truth),
        ProcedureKind::ArOcba(AllocationRule::Proportional),
        &config,
        1000,
        123,
    )
    .expect("pcs");
    let elapsed = started.elapsed().as_secs_f64();
    let passed = hold80 >= 90 && realized_dominant >= 90 && pcs >= 0.95;
    report(
        "criterion 7 (small-scale budget concentration)",
        passed,
        format!(
            "true five hold >= 80% in {hold80}/100 runs, terminal index set dominates in \
             {realized_dominant}/100 runs, PCS {pcs:.3} (needs >= 0.95), {elapsed:.1} s"
        ),
    );
}

#[test]
fn criterion_8_sensitivity_bands() {
    let started = Instant::now();
    let sim = make_synthetic(20, 5, VarianceKind::Constant).expect("synthetic");
    let oracle = Oracle::from_truth(sim.truth());

    // batch-size sweep at n0 = 10, N = 50 k m
    let delta_report = sensitivity_sweep(
        &sim,
        oracle,
        "MM-CV",
        SweepVariable::Delta,
        &[2, 4, 8, 12, 16, 20, 24],
        10,
        10,
        2000,
        31,
    )
    .expect("sweep");
    assert!(delta_report.failures.is_empty(), "{:?}", delta_report.failures);
    let pcs: Vec<f64> = delta_report.rows.iter().map(|r| r.pcs).collect();
    let band = pcs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - pcs.iter().cloned().fold(f64::INFINITY, f64::min);

    // initialization sweep at delta = 10, N = 50 k m
    let n0_values = [3u64, 6, 9, 12, 18, 24, 30, 36];
    let n0_report = sensitivity_sweep(
        &sim,
        oracle,
        "MM-CV",
        SweepVariable::N0,
        &n0_values,
        10,
        10,
        2000,
        32,
    )
    .expect("sweep");
    assert!(n0_report.failures.is_empty(), "{:?}", n0_report.failures);
    let by_value: Vec<(u64, f64)> = n0_values
        .iter()
        .zip(&n0_report.rows)
        .map(|(&v, r)| (v, r.pcs))
        .collect();
    let at = |v: u64| by_value.iter().find(|(x, _)| *x == v).expect("value").1;
    let inverted_u = at(12) >= at(3) && at(12) >= at(36);

    let elapsed = started.elapsed().as_secs_f64();
    let passed = band <= 0.05 && inverted_u;
    report(
        "criterion 8 (n0 and delta sensitivity)",
        passed,
        format!(
            "delta band max-min {band:.4} (tolerance 0.05); n0 curve {:?} inverted-U \
             (12 vs 3/36): {inverted_u}, {elapsed:.1} s",
            by_value
        ),
    );
}

#[test]
fn criterion_9_inventory_desk_scale() {
    // 4x3 policies x 3 demand means with a service tradeoff (backorders at
    // 6/unit-day), horizon 200: the worst case sits at the highest demand and
    // the top policies are separated by ~15 cost units against noise.
    let started = Instant::now();
    let problem = build_inventory_problem(
        &[550.0, 600.0, 650.0, 700.0],
        &[1150.0, 1200.0, 1250.0],
        &[50.0, 70.0, 90.0],
        InventoryConfig {
            backorder_cost: 6.0,
            horizon: 200,
            ..InventoryConfig::default()
        },
    )
    .expect("problem");
    assert_eq!((problem.k(), problem.m()), (12, 3));

    let est = estimate_truth(&problem, 20_000, 4242).expect("truth");
    let unambiguous = !est.ambiguous();
    let oracle = Oracle::from_estimate(&est);

    let config = ProcedureConfig {
        n0: 10,
        delta: 10,
        total_budget: (10 + 40) * 36,
        rule: AllocationRule::Proportional,
    };
    let ar = estimate_pcs(
        &problem,
        oracle,
        ProcedureKind::ArOcba(AllocationRule::Proportional),
        &config,
        200,
        77,
    )
    .expect("pcs");
    let ea = estimate_pcs(&problem, oracle, ProcedureKind::EqualAllocation, &config, 200, 77)
        .expect("pcs");
    let gap = ar.0 - ea.0;
    let needed = 2.0 * pooled_se(ar, ea);
    let elapsed = started.elapsed().as_secs_f64();
    let passed = unambiguous && gap > needed;
    report(
        "criterion 9 (inventory desk scale)",
        passed,
        format!(
            "oracle best alternative {} unambiguous: {unambiguous}; PCS AR {:.3} vs EA {:.3}, \
             gap {gap:.3} (needs > {needed:.3}), {elapsed:.1} s",
            est.truth().best() + 1,
            ar.0,
            ea.0,
        ),
    );
}

#[test]
fn criterion_10_determinism_and_ledger() {
    let started = Instant::now();
    let sim = make_synthetic(4, 3, VarianceKind::Increasing).expect("synthetic");
    let oracle = Oracle::from_truth(sim.truth());

    // byte-identical traces
    let config = ProcedureConfig {
        n0: 4,
        delta: 7,
        total_budget: 400,
        rule: AllocationRule::Proportional,
    };
    let a = run_meta_ocba(&sim, &config, 99).expect("run");
    let b = run_meta_ocba(&sim, &config, 99).expect("run");
    let mut bytes_a = Vec::new();
    let mut bytes_b = Vec::new();
    a.write_jsonl(&mut bytes_a).expect("serialize");
    b.write_jsonl(&mut bytes_b).expect("serialize");
    let traces_identical = a == b && bytes_a == bytes_b;

    // identical reports
    let spec = SweepSpec {
        config_label: "MM-IV".into(),
        procedures: vec![
            ProcedureKind::ArOcba(AllocationRule::Proportional),
            ProcedureKind::EqualAllocation,
        ],
        c_values: vec![5, 9],
        n0: 4,
        delta: 7,
        replications: 100,
        base_seed: 17,
    };
    let r1 = budget_sweep(&sim, oracle, &spec).expect("sweep");
    let r2 = budget_sweep(&sim, oracle, &spec).expect("sweep");
    let reports_identical = r1
        .rows
        .iter()
        .zip(&r2.rows)
        .all(|(x, y)| (x.pcs, x.stderr) == (y.pcs, y.stderr));

    // ledger and budget-safety over many runs and both rules
    let mut ledger_ok = true;
    let mut spend_ok = true;
    for rule in [AllocationRule::Proportional, AllocationRule::MostStarving] {
        for seed in 0..25u64 {
            let config = ProcedureConfig {
                n0: 3,
                delta: 6,
                total_budget: 350,
                rule,
            };
            let trace = run_meta_ocba(&sim, &config, seed).expect("run");
            ledger_ok &= trace.n_used == trace.final_counts.iter().sum::<u64>();
            // replay the rounds: booked spend must equal cumulative grants
            let profile = AllocationProfile::from_trace(&trace, config.n0);
            for (_, n_used, counts) in &profile.rounds {
                ledger_ok &= *n_used == counts.iter().sum::<u64>();
            }
            spend_ok &= trace.n_used <= config.total_budget + (4 + 3 - 2);
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let passed = traces_identical && reports_identical && ledger_ok && spend_ok;
    report(
        "criterion 10 (determinism, ledger, budget safety)",
        passed,
        format!(
            "byte-identical traces: {traces_identical}, identical reports: {reports_identical}, \
             ledger consistent: {ledger_ok}, spend within N + k+m-2: {spend_ok}, {elapsed:.1} s"
        ),
    );
}
