//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fairot::admm::{init_state, iterate, primal_residual, run, SolverOptions, SolverState};
use fairot::model::{
    breakdown, load_scenario, objective, EdgeKey, FunctionSpec, Scenario, ScenarioBuilder,
};
use fairot::online::{apply_event, run_online, segment_scenarios, EventSchedule};
use fairot::oracle::{grid_oracle, solve_centralized_report, OracleOptions};
use fairot::projection::{
    project, source_problem, target_problem, CappedSimplex, CoordinateTerms, InnerOptions,
    NodeProblem,
};

/// Penalty constant used for the two-target case study.
const CASE_STUDY_ETA: f64 = 1.0;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", oracle_equivalence),
        ("case-study reference residual", case_study_residual),
        ("fairness comparison", fairness_comparison),
        ("online segments", online_segments),
        ("20x20 scale", scale_check),
        ("invariant suites", invariant_suites),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({})",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            name,
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

// ---------------------------------------------------------------------------
// 1

fn random_spec(rng: &mut ChaCha8Rng, concave: bool) -> FunctionSpec {
    let coef = rng.gen_range(0.0..3.0);
    match (rng.gen_range(0..2), concave) {
        (0, _) => FunctionSpec::linear(coef),
        (_, true) => FunctionSpec::log(coef),
        (_, false) => FunctionSpec::quadratic(coef * 0.5),
    }
}

fn lattice(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo..hi) * 100.0).round() / 100.0
}

/// Small instance whose lattice search stays cheap: at most two variables
/// are enumerated, the rest are solved one-dimensionally. Every edge has a
/// strictly concave term so the optimal plan is unique.
fn small_instance(rng: &mut ChaCha8Rng) -> Scenario {
    let shapes: [(&[(usize, usize)], usize); 7] = [
        (&[(0, 0)], 1),
        (&[(0, 0)], 3),
        (&[(0, 0), (1, 1)], 2),
        (&[(0, 0), (0, 1)], 1),
        (&[(0, 0), (0, 1), (1, 1)], 1),
        (&[(0, 0), (0, 1), (0, 2)], 1),
        (&[(0, 0), (0, 1), (1, 0), (1, 1)], 1),
    ];
    let (edges, horizon) = shapes[rng.gen_range(0..shapes.len())];
    let n_t = edges.iter().map(|e| e.0).max().unwrap() + 1;
    let n_s = edges.iter().map(|e| e.1).max().unwrap() + 1;
    let mut b = ScenarioBuilder::new(horizon);
    for x in 0..n_t {
        let hi = lattice(rng, 0.5, 2.0);
        let lo = if rng.gen_bool(0.3) {
            lattice(rng, 0.0, 0.3)
        } else {
            0.0
        };
        b = b.target(&format!("x{x}"), lo, hi, rng.gen_range(0.0..5.0));
    }
    for y in 0..n_s {
        let hi = lattice(rng, 0.5, 2.0);
        b = b.source(&format!("y{y}"), 0.0, hi);
    }
    for &(x, y) in edges {
        let d = random_spec(rng, true);
        let s = random_spec(rng, true);
        let mut c = random_spec(rng, false);
        let strictly_concave = matches!(d.kind, fairot::model::FunctionKind::Log) && d.coef > 0.3
            || matches!(s.kind, fairot::model::FunctionKind::Log) && s.coef > 0.3
            || matches!(c.kind, fairot::model::FunctionKind::Quadratic) && c.coef > 0.1;
        if !strictly_concave {
            c = FunctionSpec::quadratic(rng.gen_range(0.1..1.0));
        }
        b = b.edge(&format!("x{x}"), &format!("y{y}"), d, s, c);
    }
    b.build().unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let admm = SolverOptions {
        eta: 1.0,
        tol: 1e-8,
        max_iters: 100_000,
        ..SolverOptions::default()
    };
    let mut worst_obj: f64 = 0.0;
    let mut worst_plan: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..25 {
        let sc = small_instance(&mut rng);
        let grid = grid_oracle(&sc, 1e-3).unwrap();
        let cen = solve_centralized_report(&sc, &OracleOptions::with_tol(1e-10)).unwrap();
        let res = run(&sc, &admm).unwrap();
        let obj_admm = objective(&sc, res.plan.amounts());
        let gap_obj = (grid.objective - cen.objective)
            .abs()
            .max((cen.objective - obj_admm).abs())
            .max((grid.objective - obj_admm).abs());
        let gap_plan = cen.plan.sup_distance(&res.plan).unwrap();
        worst_obj = worst_obj.max(gap_obj);
        worst_plan = worst_plan.max(gap_plan);
        if gap_obj > 5e-3 || gap_plan > 1e-4 || !res.converged || !cen.converged {
            failures.push(i);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "25 instances, worst objective gap {worst_obj:.2e}, worst plan gap {worst_plan:.2e}, failing {failures:?}, {}",
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------------------
// 2

fn case_study_residual() -> Outcome {
    let start = Instant::now();
    let sc = load_scenario(fixture("fig1_scenario.json")).unwrap();
    let reference = solve_centralized_report(&sc, &OracleOptions::with_tol(1e-10)).unwrap();
    let res = run(
        &sc,
        &SolverOptions {
            eta: CASE_STUDY_ETA,
            tol: 1e-10,
            max_iters: 500,
            reference_plan: Some(reference.plan),
            ..SolverOptions::default()
        },
    )
    .unwrap();
    let r: Vec<f64> = res
        .trajectory
        .records
        .iter()
        .map(|rec| rec.reference_residual.unwrap())
        .collect();
    let below = r.iter().position(|&v| v < 1e-3).map(|i| i + 1);
    // The residual oscillates with a short period while it decays, so the
    // monotonicity check applies to its running maximum over a window.
    const WINDOW: usize = 10;
    let envelope: Vec<f64> = (0..r.len())
        .map(|k| {
            r[k.saturating_sub(WINDOW - 1)..=k]
                .iter()
                .cloned()
                .fold(0.0, f64::max)
        })
        .collect();
    let transient = 10;
    let monotone = envelope
        .windows(2)
        .skip(transient)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    let elapsed = start.elapsed();
    outcome(
        below.is_some() && monotone && elapsed < Duration::from_secs(10),
        format!(
            "eta {CASE_STUDY_ETA}, residual < 1e-3 at k = {below:?}, final {:.2e} at k = {}, windowed maximum non-increasing after k = {transient}: {monotone}, {}",
            r.last().unwrap(),
            r.len(),
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------------------
// 3

fn fairness_comparison() -> Outcome {
    let base = load_scenario(fixture("fig1_scenario.json")).unwrap();
    let fair = base.with_uniform_weight(3.0);
    let plain = base.with_uniform_weight(0.0);
    let opts = OracleOptions::with_tol(1e-10);
    let fair_plan = solve_centralized_report(&fair, &opts).unwrap().plan;
    let plain_plan = solve_centralized_report(&plain, &opts).unwrap().plan;
    let at_fair = objective(&fair, fair_plan.amounts());
    let plain_under_fair = objective(&fair, plain_plan.amounts());

    let admm = SolverOptions {
        eta: CASE_STUDY_ETA,
        tol: 1e-9,
        ..SolverOptions::default()
    };
    let d_fair = run(&fair, &admm).unwrap().plan;
    let d_plain = run(&plain, &admm).unwrap().plan;
    let d_gap = objective(&fair, d_fair.amounts()) - objective(&fair, d_plain.amounts());
    outcome(
        at_fair - plain_under_fair > 1e-6 && d_gap > 1e-6,
        format!(
            "fair objective {at_fair:.6} at the weighted optimum vs {plain_under_fair:.6} at the unweighted optimum (distributed gap {d_gap:.6})"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4

type Snapshot = HashMap<(EdgeKey, usize), [u64; 4]>;

fn snapshot(state: &SolverState, sc: &Scenario) -> Snapshot {
    let mut out = HashMap::new();
    for (e, key) in sc.edge_keys().into_iter().enumerate() {
        for t in 0..sc.horizon() {
            let i = sc.var_index(e, t);
            out.insert(
                (key.clone(), t),
                [state.pi[i], state.pi_d[i], state.pi_s[i], state.alpha[i]].map(f64::to_bits),
            );
        }
    }
    out
}

fn online_segments() -> Outcome {
    let start = Instant::now();
    let sc = load_scenario(fixture("fig2_scenario.json")).unwrap();
    let schedule = EventSchedule::read(fixture("fig2_events.json")).unwrap();
    let scenarios = segment_scenarios(&sc, &schedule).unwrap();
    let references: Vec<_> = scenarios
        .iter()
        .map(|s| {
            solve_centralized_report(s, &OracleOptions::with_tol(1e-10))
                .unwrap()
                .plan
        })
        .collect();
    let opts = SolverOptions::default();
    let res = run_online(&sc, &schedule, &opts, Some(&references)).unwrap();

    let mut details = Vec::new();
    let mut tracked = true;
    for (i, seg) in res.segments.iter().enumerate() {
        let hit = res
            .trajectory
            .segment(i)
            .find(|r| r.reference_residual.unwrap() < 1e-3)
            .map(|r| r.k);
        tracked &= hit.is_some_and(|k| k <= seg.end);
        details.push(format!("segment {i} below 1e-3 at k = {hit:?}"));
    }

    // Replay by hand, checking surviving variables across each event.
    let mut continuity = true;
    let mut scenario = sc.clone();
    let mut state = init_state(&scenario).unwrap();
    for ev in schedule.events() {
        while state.k < ev.at_iteration {
            iterate(&mut state, &scenario, &opts);
        }
        let before = snapshot(&state, &scenario);
        let (next_state, next_scenario) = apply_event(&state, &scenario, ev).unwrap();
        let after = snapshot(&next_state, &next_scenario);
        for (key, bits) in &after {
            match before.get(key) {
                Some(old) => continuity &= old == bits,
                None => continuity &= *bits == [0; 4],
            }
        }
        continuity &= next_state.k == state.k;
        state = next_state;
        scenario = next_scenario;
    }
    let replay_matches = {
        let seg = &res.segments[1];
        let mut st = init_state(&sc).unwrap();
        let mut scn = sc.clone();
        let first = &schedule.events()[0];
        while st.k < first.at_iteration {
            iterate(&mut st, &scn, &opts);
        }
        (st, scn) = apply_event(&st, &scn, first).unwrap();
        while st.k < seg.end {
            iterate(&mut st, &scn, &opts);
        }
        st.pi == seg.plan.amounts()
    };
    let elapsed = start.elapsed();
    outcome(
        tracked && continuity && replay_matches && elapsed < Duration::from_secs(30),
        format!(
            "{}, continuity exact: {continuity}, replay identical: {replay_matches}, {}",
            details.join(", "),
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------------------
// 5

fn twenty_by_twenty(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ScenarioBuilder::new(1);
    for x in 0..20 {
        b = b.target(
            &format!("x{x}"),
            0.0,
            rng.gen_range(2.0..6.0),
            rng.gen_range(0.0..5.0),
        );
    }
    for y in 0..20 {
        b = b.source(&format!("y{y}"), 0.0, rng.gen_range(2.0..6.0));
    }
    for x in 0..20 {
        for y in 0..20 {
            let d = if rng.gen_bool(0.5) {
                FunctionSpec::linear(rng.gen_range(0.0..3.0))
            } else {
                FunctionSpec::log(rng.gen_range(0.0..3.0))
            };
            let s = FunctionSpec::linear(rng.gen_range(0.0..2.0));
            let c = if rng.gen_bool(0.5) {
                FunctionSpec::linear(rng.gen_range(0.0..3.0))
            } else {
                FunctionSpec::quadratic(rng.gen_range(0.0..1.0))
            };
            b = b.edge(&format!("x{x}"), &format!("y{y}"), d, s, c);
        }
    }
    b.build().unwrap()
}

fn scale_check() -> Outcome {
    let sc = twenty_by_twenty(20);
    let start = Instant::now();
    let res = run(
        &sc,
        &SolverOptions {
            tol: 1e-4,
            max_iters: 5000,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    let elapsed = start.elapsed();
    outcome(
        res.converged && primal_residual(&res.state) < 1e-4,
        format!(
            "{} edges, converged: {} after {} iterations, primal residual {:.2e}, wall time {}",
            sc.n_edges(),
            res.converged,
            res.iterations,
            primal_residual(&res.state),
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------------------
// 6

fn projection_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..1000 {
        let n = rng.gen_range(1..10);
        let a = rng.gen_range(0.0..5.0);
        let b = rng.gen_range(0.0..5.0);
        let set = CappedSimplex::new(n, f64::min(a, b), f64::max(a, b)).unwrap();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let pu = project(&u, &set);
        let pv = project(&v, &set);
        let ppu = project(&pu, &set);
        if pu.iter().zip(&ppu).any(|(x, y)| (x - y).abs() > 1e-10) {
            return Err(format!("projection case {case}: not idempotent"));
        }
        if !set.contains(&pu, 1e-9) {
            return Err(format!("projection case {case}: infeasible"));
        }
        let d = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        if d(&pu, &pv) > d(&u, &v) + 1e-10 {
            return Err(format!("projection case {case}: expansive"));
        }
    }
    Ok(())
}

fn grid_minimum(p: &NodeProblem, h: f64) -> f64 {
    let n = p.terms.len();
    let steps = (p.set.upper() / h).floor() as i64;
    let mut best = f64::INFINITY;
    let mut eval = |v: &[f64]| {
        if p.set.contains(v, 1e-12) {
            best = best.min(p.value(v));
        }
    };
    if n == 1 {
        for i in 0..=steps {
            eval(&[i as f64 * h]);
        }
    } else {
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                eval(&[i as f64 * h, j as f64 * h]);
            }
        }
    }
    best
}

fn subproblem_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let opts = InnerOptions::default();
    for case in 0..200 {
        let n = rng.gen_range(1..3);
        let upper = rng.gen_range(0.5..3.0);
        let lower = if rng.gen_bool(0.3) {
            rng.gen_range(0.0..upper)
        } else {
            0.0
        };
        let terms = (0..n)
            .map(|_| CoordinateTerms {
                utility: if rng.gen_bool(0.5) {
                    FunctionSpec::linear(rng.gen_range(0.0..3.0))
                } else {
                    FunctionSpec::log(rng.gen_range(0.0..3.0))
                },
                cost: if rng.gen_bool(0.5) {
                    FunctionSpec::linear(rng.gen_range(0.0..3.0))
                } else {
                    FunctionSpec::quadratic(rng.gen_range(0.0..1.0))
                },
            })
            .collect();
        let p = NodeProblem {
            set: CappedSimplex::new(n, lower, upper).unwrap(),
            terms,
            price: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            center: (0..n).map(|_| rng.gen_range(0.0..3.0)).collect(),
            reward: rng
                .gen_bool(0.5)
                .then(|| (rng.gen_range(0.0..5.0), FunctionSpec::log(1.0))),
            eta: rng.gen_range(0.2..4.0),
        };
        let sol = p.solve(&opts);
        if sol.pg_norm >= 1e-6 {
            return Err(format!(
                "subproblem case {case}: KKT residual {:.2e}",
                sol.pg_norm
            ));
        }
        let grid = grid_minimum(&p, 1e-3);
        if p.value(&sol.point) > grid + 1e-9 {
            return Err(format!(
                "subproblem case {case}: value {} above grid minimum {grid}",
                p.value(&sol.point)
            ));
        }
    }
    Ok(())
}

fn consensus_and_duals(sc: &Scenario) -> Result<(), String> {
    let opts = SolverOptions {
        inner: InnerOptions {
            tol: 1e-12,
            max_iters: 100_000,
        },
        ..SolverOptions::default()
    };
    let eta = opts.eta;
    let n = sc.n_vars();
    let mut st = init_state(sc).unwrap();
    let (mut pi, mut a_d, mut a_s) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut pd, mut ps) = (vec![0.0; n], vec![0.0; n]);
    for k in 1..=200 {
        iterate(&mut st, sc, &opts);
        if (0..n).any(|i| st.pi[i] != 0.5 * (st.pi_d[i] + st.pi_s[i])) {
            return Err(format!("consensus identity broken at k = {k}"));
        }
        // separate prices for the two sides, consensus from both
        for x in 0..sc.n_targets() {
            let sol = target_problem(sc, x, &pi, &a_d, eta).solve(&opts.inner);
            for (&i, &v) in sc.target_vars(x).iter().zip(&sol.point) {
                pd[i] = v;
            }
        }
        for y in 0..sc.n_sources() {
            let sol = source_problem(sc, y, &pi, &a_s, eta).solve(&opts.inner);
            for (&i, &v) in sc.source_vars(y).iter().zip(&sol.point) {
                ps[i] = v;
            }
        }
        for i in 0..n {
            pi[i] = 0.5 * (pd[i] + ps[i]) + (a_d[i] - a_s[i]) / (2.0 * eta);
            a_d[i] += eta * (pd[i] - pi[i]);
            a_s[i] += eta * (pi[i] - ps[i]);
        }
        for i in 0..n {
            if (a_d[i] - a_s[i]).abs() > 1e-12 {
                return Err(format!("side prices diverge at k = {k}"));
            }
            if (a_d[i] - st.alpha[i]).abs() > 1e-8 || (pi[i] - st.pi[i]).abs() > 1e-8 {
                return Err(format!(
                    "separate-price replay departs from the engine at k = {k}"
                ));
            }
        }
    }
    Ok(())
}

fn scalarization(sc: &Scenario) -> Result<String, String> {
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut trail = Vec::new();
    for factor in [0.5, 1.0, 2.0, 4.0] {
        let s = sc.with_scaled_weights(factor);
        let plan = solve_centralized_report(&s, &OracleOptions::with_tol(1e-10))
            .unwrap()
            .plan;
        let b = breakdown(&s, plan.amounts());
        if let Some((f0, eff, fair)) = prev {
            if b.unweighted_fairness < fair - 1e-7 || b.efficiency > eff + 1e-7 {
                return Err(format!(
                    "scaling {f0} -> {factor}: fairness {fair} -> {}, efficiency {eff} -> {}",
                    b.unweighted_fairness, b.efficiency
                ));
            }
        }
        trail.push(format!(
            "{factor}: {:.4}/{:.4}",
            b.efficiency, b.unweighted_fairness
        ));
        prev = Some((factor, b.efficiency, b.unweighted_fairness));
    }
    Ok(trail.join(", "))
}

fn invariant_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fig1 = load_scenario(fixture("fig1_scenario.json")).unwrap();
    let results = [
        projection_suite(&mut rng).map(|_| "projection ok".to_string()),
        subproblem_suite(&mut rng).map(|_| "subproblems ok".to_string()),
        consensus_and_duals(&fig1).map(|_| "consensus and dual symmetry ok".to_string()),
        scalarization(&fig1).map(|t| format!("efficiency/fairness by weight scale {t}")),
        // lower base weight, where the plan still moves with the scale
        scalarization(&fig1.with_uniform_weight(0.2)).map(|t| format!("at base weight 0.2: {t}")),
    ];
    let pass = results.iter().all(Result::is_ok);
    let detail = results
        .iter()
        .map(|r| match r {
            Ok(s) | Err(s) => s.clone(),
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

// ---------------------------------------------------------------------------
// 7

fn cli_csv(args: &[&str], threads: usize) -> Vec<u8> {
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_fairot"))
        .args(args)
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(
        status.status.code() == Some(0),
        "{args:?} exited with {:?}: {}",
        status.status.code(),
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read(out.path().join("trajectory.csv")).unwrap()
}

fn determinism() -> Outcome {
    let fig1 = fixture("fig1_scenario.json");
    let fig2 = fixture("fig2_scenario.json");
    let events = fixture("fig2_events.json");
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "solve",
            fig1.to_str().unwrap(),
            "--reference",
            "centralized",
        ],
        vec!["solve", fig1.to_str().unwrap(), "--mode", "centralized"],
        vec![
            "online",
            fig2.to_str().unwrap(),
            "--events",
            events.to_str().unwrap(),
            "--reference",
            "centralized",
        ],
    ];
    let mut identical = true;
    for args in &runs {
        let base = cli_csv(args, 1);
        for threads in [1, 2, 4] {
            identical &= cli_csv(args, threads) == base;
        }
    }
    outcome(
        identical,
        format!(
            "{} commands, thread counts 1/2/4, byte-identical: {identical}",
            runs.len()
        ),
    )
}
