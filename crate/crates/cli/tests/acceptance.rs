//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p specluster-cli --test acceptance`. The process
//! exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};
use specluster::harness::{run_sweep, SweepResult, SweepSpec};
use specluster::kmeans::{kmeans, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use specluster::linalg::{match_center_sets, squared_distance_matrix, truncated_svd, DEFAULT_TOL};
use specluster::models::{self, balanced_sizes, contiguous_assignment};
use specluster::{analysis, io, pipeline, CenterSet, Labeling, MixtureModel};

const BIN: &str = env!("CARGO_BIN_EXE_specluster");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn in_regime_spec(trials: usize, diagnostics: Value, margin_samples: usize) -> SweepSpec {
    serde_json::from_value(json!({
        "family": "bsbm",
        "fixed": {"m": 400, "n": 400, "k": 2, "p": 0.45, "q": 0.05},
        "trials_per_cell": trials,
        "base_seed": 0,
        "diagnostics": diagnostics,
        "margin_samples": margin_samples
    }))
    .unwrap()
}

fn sweep(spec: &SweepSpec) -> SweepResult {
    let res = run_sweep(spec).expect("sweep runs");
    let failures: usize = res.cells.iter().map(|c| c.failures).sum();
    assert_eq!(failures, 0, "trial errors: {:?}", res.trials.iter().find_map(|t| t.error.clone()));
    res
}

fn noiseless_exactness() -> Outcome {
    let seeds = 0..20u64;
    let mut misses = Vec::new();
    let mut total = 0;
    for m in [8usize, 40, 200] {
        for k in [2usize, 3, 4] {
            let n = 24;
            let weights: Vec<f64> = balanced_sizes(m, k).iter().map(|&s| s as f64 / m as f64).collect();
            let model = MixtureModel::block(1.0, 0.0, &contiguous_assignment(n, k), weights, None).unwrap();
            let mut failed = 0;
            for seed in seeds.clone() {
                total += 1;
                let ds = models::sample(&model, m, seed).unwrap();
                let labels = pipeline::cluster(ds.matrix(), k, seed).unwrap();
                let sc = analysis::score(&labels, &Labeling::new(ds.truth().unwrap().to_vec()), k).unwrap();
                if !sc.exact {
                    failed += 1;
                }
            }
            if failed > 0 {
                misses.push(format!("m={m} k={k}: {failed}/{}", seeds.end));
            }
        }
    }
    let detail = if misses.is_empty() {
        format!("{total}/{total} exact")
    } else {
        format!("not exact in {}", misses.join(", "))
    };
    outcome(misses.is_empty(), detail)
}

fn in_regime_recovery(res: &SweepResult) -> Outcome {
    let c = &res.cells[0];
    outcome(c.exact_count >= 19, format!("exact in {}/{} trials", c.exact_count, c.trials))
}

fn center_error(res: &SweepResult) -> Outcome {
    let c = &res.cells[0];
    let holds = c.center_error_holds.unwrap();
    outcome(holds >= 95, format!("bound holds in {holds}/{} trials", c.trials))
}

fn overlap(res: &SweepResult) -> Outcome {
    let c = &res.cells[0];
    let holds = c.overlap_holds.unwrap();
    let worst = res.trials.iter().filter_map(|t| t.min_overlap).fold(1.0, f64::min);
    outcome(holds >= 95, format!("all fractions >= 0.9 in {holds}/{} trials (worst {worst:.3})", c.trials))
}

fn margins(res: &SweepResult) -> Outcome {
    let c = &res.cells[0];
    let draws = c.margin_draws.unwrap();
    let counts = [c.margin_correct.unwrap(), c.margin_center_bound.unwrap(), c.margin_sample_bound.unwrap()];
    let pass = counts.iter().all(|&x| x * 100 >= draws * 99);
    outcome(
        pass,
        format!(
            "of {draws} draws: nearest center correct {}, center bound {}, sample bound {}",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn monotone_sweep() -> Outcome {
    let spec: SweepSpec = serde_json::from_value(json!({
        "family": "bsbm",
        "grid": {"p_minus_q": [0.05, 0.15, 0.25, 0.35, 0.45]},
        "fixed": {"m": 400, "n": 400, "k": 2, "q": 0.05},
        "trials_per_cell": 50,
        "base_seed": 0
    }))
    .unwrap();
    let res = sweep(&spec);
    let counts: Vec<usize> = res.cells.iter().map(|c| c.exact_count).collect();
    let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
    let pass = monotone && counts[0] <= 10 && counts[4] >= 48;
    outcome(pass, format!("exact counts over p-q = 0.05..0.45: {counts:?}"))
}

fn oracle_equivalence() -> Outcome {
    let mut r = oracles::rng(7);

    let mut svd_bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = r.random_range(1..=30);
        let n = r.random_range(1..=30);
        let k = r.random_range(1..=m.min(n));
        let a = oracles::random_matrix(m, n, &mut r);
        let got = truncated_svd(&a, k, DEFAULT_TOL, 10_000).unwrap().singular_values;
        let want = oracles::jacobi_singular_values(&a);
        let ok = got.iter().zip(&want).all(|(&s, &o)| {
            let rel = (s - o).abs() / o.max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            rel <= 1e-6
        });
        if !ok {
            svd_bad += 1;
        }
    }

    let mut km_equal = 0;
    let mut km_beat = 0;
    let km_cases = 200;
    for _ in 0..km_cases {
        let m = r.random_range(1..=8);
        let k = r.random_range(1..=3.min(m));
        let a = oracles::random_matrix(m, r.random_range(1..=3), &mut r);
        let got = kmeans(&a, k, DEFAULT_RESTARTS, DEFAULT_MAX_ITER, r.random()).unwrap().objective;
        let opt = oracles::brute_force_kmeans(&a, k);
        if got < opt - 1e-9 {
            km_beat += 1;
        }
        if (got - opt).abs() <= 1e-9 {
            km_equal += 1;
        }
    }

    let mut match_bad = 0;
    for _ in 0..200 {
        let k = r.random_range(1..=5);
        let dim = r.random_range(1..=5);
        let c1 = oracles::random_matrix(k, dim, &mut r);
        let c2 = oracles::random_matrix(k, dim, &mut r);
        let perm = match_center_sets(&CenterSet::from_centers(c1.clone()), &CenterSet::from_centers(c2.clone())).unwrap();
        let cost = squared_distance_matrix(&c1, &c2).unwrap();
        let got: f64 = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        if (got - oracles::brute_force_assignment(&cost)).abs() > 1e-12 * (1.0 + got) {
            match_bad += 1;
        }
    }

    let pass = svd_bad == 0 && km_beat == 0 && km_equal * 100 >= km_cases * 95 && match_bad == 0;
    outcome(
        pass,
        format!(
            "svd mismatches {svd_bad}/200 (worst rel {worst:.1e}); kmeans optimal {km_equal}/{km_cases}, \
             below optimum {km_beat}; matching mismatches {match_bad}/200"
        ),
    )
}

fn run(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(BIN).args(args).env_remove("SPECLUSTER_SEED").output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn determinism_and_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();
    let mut problems = Vec::new();

    fs::write(
        d.join("spec.json"),
        json!({
            "family": "bsbm",
            "grid": {"p_minus_q": [0.15, 0.35]},
            "fixed": {"m": 80, "n": 60, "k": 2, "q": 0.05},
            "trials_per_cell": 4,
            "diagnostics": {"center_error": true, "overlap": true, "margins": true, "conditions": true},
            "margin_samples": 50
        })
        .to_string(),
    )
    .unwrap();
    fs::write(
        d.join("model.json"),
        json!({"m": 4, "means": [[1, 1, 0, 0], [0, 0, 1, 1]], "weights": [0.5, 0.5]}).to_string(),
    )
    .unwrap();

    let read = |name: &str| fs::read(d.join(name)).unwrap_or_default();
    for tag in ["a", "b"] {
        let runs: [Vec<String>; 6] = [
            vec!["generate".into(), "--bsbm".into(), "m=60,n=50,k=3,p=0.4,q=0.1".into(), "--seed".into(), "5".into(), "--out".into(), p(&format!("g{tag}"))],
            vec!["generate".into(), "--model".into(), p("model.json"), "--seed".into(), "2".into(), "--out".into(), p(&format!("n{tag}"))],
            vec!["cluster".into(), "--data".into(), p("ga"), "--k".into(), "3".into(), "--seed".into(), "9".into(), "--out".into(), p(&format!("l{tag}.json")), "--diagnostics".into()],
            vec!["check".into(), "--data".into(), p("ga")],
            vec!["sweep".into(), "--spec".into(), p("spec.json"), "--out".into(), p(&format!("s{tag}")), "--trial-log".into()],
            vec!["sweep".into(), "--spec".into(), p("spec.json"), "--out".into(), p(&format!("t{tag}")), "--threads".into(), if tag == "a" { "1".into() } else { "4".into() }, "--trial-log".into()],
        ];
        let mut stdouts = Vec::new();
        for args in &runs {
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let (code, out) = run(&refs);
            if code != 0 {
                problems.push(format!("{} exited {code}", args[0]));
            }
            stdouts.push(out);
        }
        fs::write(d.join(format!("stdout{tag}")), stdouts.concat()).unwrap();
    }
    // Sweep summaries name their own output paths; compare the rest.
    let strip = |b: Vec<u8>| String::from_utf8(b).unwrap().replace("/sa.", "/s?.").replace("/sb.", "/s?.").replace("/ta.", "/t?.").replace("/tb.", "/t?.");
    if strip(read("stdouta")) != strip(read("stdoutb")) {
        problems.push("stdout differs between runs".into());
    }
    for (x, y) in [
        ("ga.mtx", "gb.mtx"),
        ("ga.json", "gb.json"),
        ("na.mtx", "nb.mtx"),
        ("na.json", "nb.json"),
        ("la.json", "lb.json"),
        ("sa.csv", "sb.csv"),
        ("sa.trials.jsonl", "sb.trials.jsonl"),
        ("sa.csv", "ta.csv"),
        ("ta.csv", "tb.csv"),
        ("ta.trials.jsonl", "tb.trials.jsonl"),
    ] {
        let (bx, by) = (read(x), read(y));
        if bx.is_empty() || bx != by {
            problems.push(format!("{x} vs {y} differ"));
        }
    }

    let lossless = |prefix: &Path| -> bool {
        let ds = io::read_dataset(prefix).unwrap();
        let again = d.join("again");
        io::write_dataset(&again, &ds).unwrap();
        let back = io::read_dataset(&again).unwrap();
        back.matrix() == ds.matrix()
            && back.truth() == ds.truth()
            && back.model() == ds.model()
            && back.bsbm() == ds.bsbm()
            && fs::read(io::matrix_path(prefix)).unwrap() == fs::read(io::matrix_path(&again)).unwrap()
            && fs::read(io::sidecar_path(prefix)).unwrap() == fs::read(io::sidecar_path(&again)).unwrap()
    };
    for prefix in ["ga", "na"] {
        if !lossless(&d.join(prefix)) {
            problems.push(format!("{prefix} does not round-trip"));
        }
    }
    let na = io::read_dataset(&d.join("na")).unwrap();
    let direct = models::sample(na.model().unwrap(), 4, 2).unwrap();
    if na.matrix() != direct.matrix() {
        problems.push("generated 4x4 block matrix differs from the sampler".into());
    }

    let detail = if problems.is_empty() {
        "generate, cluster, check, sweep byte-identical; datasets round-trip".to_string()
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn report(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail.push_str(&format!("; over the {}s budget", limit.as_secs()));
        }
    }
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("{verdict} [{id}] {name}: {} ({:.1}s)", o.detail, took.as_secs_f64());
    o.pass
}

fn main() -> ExitCode {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut ok = true;
    ok &= report(1, "noiseless exactness", secs(5), noiseless_exactness);

    let mut regime = None;
    ok &= report(2, "in-regime recovery", secs(60), || {
        let res = sweep(&in_regime_spec(20, json!({"margins": true}), 1000));
        let o = in_regime_recovery(&res);
        regime = Some(res);
        o
    });
    let mut centers = None;
    ok &= report(3, "center error bound", secs(300), || {
        let res = sweep(&in_regime_spec(100, json!({"center_error": true, "overlap": true}), 0));
        let o = center_error(&res);
        centers = Some(res);
        o
    });
    ok &= report(4, "k-means overlap", None, || overlap(centers.as_ref().unwrap()));
    ok &= report(5, "assignment margins", None, || margins(regime.as_ref().unwrap()));
    ok &= report(6, "monotone phase sweep", secs(900), monotone_sweep);
    ok &= report(7, "oracle equivalence", None, oracle_equivalence);
    ok &= report(8, "determinism and round-trip", None, determinism_and_round_trip);

    println!("acceptance: {}", if ok { "all criteria pass" } else { "some criteria FAIL" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
