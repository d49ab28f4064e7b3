//! End-to-end acceptance checks at full scale.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits non-zero if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use excited_walk::estimators::tail_curve_of_total;
use excited_walk::harness::{
    cmd_couple, cmd_sweep, default_block_cutoff, direct_summary, regen_summary,
    simulate_first_kappa, simulate_runs, ExperimentConfig,
};
use excited_walk::oracle::mc_vs_oracle;
use excited_walk::regeneration::{extract_blocks, find_regenerations, verify_record, RegenTracker};
use excited_walk::walk::{run_walk, Recording};
use excited_walk::{make_step_law, parse_decimal, RandomSource};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
}

fn combined(a_se: f64, b_se: f64) -> f64 {
    (a_se * a_se + b_se * b_se).sqrt()
}

fn oracle_agreement() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for p in ["0.6", "0.75", "1.0"] {
        let exact = make_step_law(parse_decimal(p).unwrap(), 2, true).unwrap();
        let float = make_step_law(p.parse::<f64>().unwrap(), 2, true).unwrap();
        let comps = mc_vs_oracle(&exact, &float, 8, 100_000, 42).unwrap();
        for c in &comps {
            worst = worst.max(c.z.abs());
            parts.push(format!("p={p} {} z={:.2}", c.statistic, c.z));
        }
    }
    outcome(
        worst <= 4.0,
        format!("max |z| = {worst:.2} ({})", parts.join(", ")),
    )
}

fn coupling_invariants() -> Outcome {
    let mut total = 0u64;
    let mut parts = Vec::new();
    for d in [2usize, 3] {
        for p in ["0.6", "1.0"] {
            let cfg = ExperimentConfig {
                p_text: p.into(),
                d,
                steps: 10_000,
                runs: 1000,
                allow_boundary_p: true,
                ..Default::default()
            };
            let (_, v) = cmd_couple(&cfg).unwrap();
            total += v;
            parts.push(format!("d={d} p={p}: {v}"));
        }
    }
    outcome(total == 0, format!("violations {}", parts.join(", ")))
}

fn regeneration_consistency() -> Outcome {
    let law = make_step_law(0.75f64, 2, false).unwrap();
    let source = RandomSource::new(42, 0);
    let lag = 1000;
    let mut mismatches = 0;
    let mut bad_records = 0;
    let mut bad_blocks = 0;
    let mut n_blocks = 0usize;
    for run in 0..1000 {
        let state = run_walk(&law, 10_000, source.substream(run), Recording::E1);
        let path = state.into_trajectory().unwrap().e1;
        let offline = find_regenerations(&path, lag).unwrap();
        let mut tracker = RegenTracker::new(lag);
        for &x in &path {
            tracker.observe(x).unwrap();
        }
        let online = tracker.record();
        if online != offline {
            mismatches += 1;
        }
        if verify_record(&path, &offline).is_err() {
            bad_records += 1;
        }
        let blocks = extract_blocks(&offline);
        n_blocks += blocks.len();
        bad_blocks += blocks.iter().filter(|b| b.dk < 1 || b.dx1 < 1).count();
    }
    outcome(
        mismatches == 0 && bad_records == 0 && bad_blocks == 0,
        format!(
            "1000 runs, {n_blocks} blocks: online/offline mismatches {mismatches}, \
             invalid records {bad_records}, blocks with dk<1 or dx1<1 {bad_blocks}"
        ),
    )
}

/// Also returns the single-threaded wall time of the workload.
fn estimator_consistency() -> (Outcome, f64) {
    let (steps, runs, lag, seed) = (10_000u64, 1000u64, 1000u64, 42u64);
    let law = make_step_law(0.75f64, 2, false).unwrap();
    let start = Instant::now();
    let results = simulate_runs(&law, steps, runs, seed, lag, &pool(1));
    let x1: Vec<i64> = results.iter().map(|r| r.x1_final).collect();
    let direct = direct_summary(0.75, 2, steps, &x1, 0.0).unwrap();
    let regen = regen_summary(0.75, 2, steps, default_block_cutoff(steps, lag), &results).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let z = (direct.v_hat - regen.v_hat).abs() / combined(direct.v_se, regen.v_se);
    let inside = |v: f64| v > 0.0 && v < 1.0;
    (
        outcome(
            z <= 2.0 && inside(direct.v_hat) && inside(regen.v_hat),
            format!(
                "direct {:.5} ± {:.5}, regeneration {:.5} ± {:.5} ({} blocks), z = {z:.2}",
                direct.v_hat, direct.v_se, regen.v_hat, regen.v_se, regen.n_blocks
            ),
        ),
        elapsed,
    )
}

fn grid() -> Vec<String> {
    (0..10)
        .map(|k| format!("{:.2}", 0.55 + 0.05 * k as f64))
        .collect()
}

fn monotonicity_and_sigma_shape() -> Outcome {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let v_rows = cmd_sweep(&ExperimentConfig {
        steps: 10_000,
        runs: 1000,
        p_grid: Some(grid()),
        allow_boundary_p: true,
        threads,
        ..Default::default()
    })
    .unwrap();
    let s_rows = cmd_sweep(&ExperimentConfig {
        steps: 1000,
        runs: 100_000,
        seed: 7,
        p_grid: Some(grid()),
        allow_boundary_p: true,
        threads,
        ..Default::default()
    })
    .unwrap();

    let monotone = v_rows
        .windows(2)
        .all(|w| w[1].v_hat >= w[0].v_hat - 2.0 * combined(w[0].v_se, w[1].v_se));
    let last = s_rows.last().unwrap();
    let interior = &s_rows[..s_rows.len() - 1];
    let best = interior
        .iter()
        .max_by(|a, b| a.sigma_hat.total_cmp(&b.sigma_hat))
        .unwrap();
    let excess = (best.sigma_hat - last.sigma_hat) / combined(best.sigma_se, last.sigma_se);
    let vs: Vec<String> = v_rows.iter().map(|r| format!("{:.4}", r.v_hat)).collect();
    let ss: Vec<String> = s_rows
        .iter()
        .map(|r| format!("{:.4}", r.sigma_hat))
        .collect();
    outcome(
        monotone && excess >= 2.0,
        format!(
            "v = [{}] nondecreasing: {monotone}; sigma = [{}], max at p={:.2} exceeds sigma(1) by {excess:.1} SE",
            vs.join(", "),
            ss.join(", "),
            best.p
        ),
    )
}

fn kappa_tail() -> Outcome {
    let law = make_step_law(0.75f64, 2, false).unwrap();
    let runs = 100_000usize;
    let max_steps = 20_000;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let kappas = simulate_first_kappa(&law, max_steps, runs as u64, 42, 1000, &pool(threads));
    let censored = kappas.iter().filter(|k| k.is_none()).count();
    let (a, b) = kappas.split_at(runs / 2);
    let finite = |s: &[Option<u64>]| s.iter().flatten().copied().collect::<Vec<u64>>();
    let (fa, fb) = (finite(a), finite(b));
    let all = finite(&kappas);

    let thresholds: Vec<u64> = (0..=12).map(|k| 1u64 << k).collect();
    let whole = tail_curve_of_total::<f64>(&all, runs, &thresholds).unwrap();
    let nonincreasing = whole.survival.windows(2).all(|w| w[1] <= w[0]);

    let ca = tail_curve_of_total::<f64>(&fa, a.len(), &thresholds).unwrap();
    let cb = tail_curve_of_total::<f64>(&fb, b.len(), &thresholds).unwrap();
    let (ea, eb) = (ca.standard_errors(), cb.standard_errors());
    let worst_band = (0..thresholds.len())
        .map(|i| {
            let se = combined(ea[i], eb[i]);
            let diff = (ca.survival[i] - cb.survival[i]).abs();
            if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);

    let mean = |s: &[u64]| s.iter().sum::<u64>() as f64 / s.len() as f64;
    let (ma, mb) = (mean(&fa), mean(&fb));
    let rel = (ma - mb).abs() / (0.5 * (ma + mb));
    outcome(
        nonincreasing && worst_band <= 4.0 && rel <= 0.05,
        format!(
            "survival nonincreasing: {nonincreasing}; worst split-half gap {worst_band:.2} SE; \
             half means {ma:.2} / {mb:.2} (rel diff {:.2}%); {censored} of {runs} runs unconfirmed by {max_steps}",
            100.0 * rel
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path, tag: &str, threads: usize) -> Vec<Vec<u8>> {
    let out = dir.join(format!("{tag}-{threads}.out"));
    let status = Command::new(env!("CARGO_BIN_EXE_erw"))
        .args(args)
        .args(["--threads", &threads.to_string(), "--output"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{tag}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut files = vec![std::fs::read(&out).unwrap()];
    let summary = dir.join(format!("{tag}-{threads}.out.summary.csv"));
    if summary.exists() {
        files.push(std::fs::read(summary).unwrap());
    }
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands: [(&str, Vec<&str>); 5] = [
        (
            "simulate",
            vec![
                "simulate",
                "--steps",
                "3000",
                "--runs",
                "200",
                "--confirm-lag",
                "300",
            ],
        ),
        (
            "regen",
            vec![
                "regen",
                "--steps",
                "3000",
                "--runs",
                "200",
                "--confirm-lag",
                "300",
            ],
        ),
        (
            "couple",
            vec!["couple", "--steps", "3000", "--runs", "200", "--d", "3"],
        ),
        (
            "sweep",
            vec![
                "sweep",
                "--steps",
                "500",
                "--runs",
                "200",
                "--p-grid",
                "0.6,0.8,1.0",
            ],
        ),
        ("oracle", vec!["oracle", "--steps", "6", "--statistic", "J"]),
    ];
    let mut differing = Vec::new();
    for (tag, args) in &commands {
        let reference = run_cli(args, dir.path(), tag, 1);
        for threads in [4, 8] {
            if run_cli(args, dir.path(), tag, threads) != reference {
                differing.push(format!("{tag} with {threads} threads"));
            }
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "simulate, regen, couple, sweep and oracle outputs byte-identical for 1, 4 and 8 threads".into()
        } else {
            format!("outputs differ: {}", differing.join(", "))
        },
    )
}

fn memory_footprint() -> Outcome {
    let law = make_step_law(0.75f64, 2, false).unwrap();
    let source = RandomSource::new(42, 0);
    let bad = (0..100)
        .filter(|&i| {
            let s = run_walk(&law, 10_000, source.substream(i), Recording::Off);
            s.visited_count() as u64 != s.fresh_count()
        })
        .count();
    outcome(
        bad == 0,
        format!(
            "visited set equals fresh-site count in {} of 100 runs",
            100 - bad
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: Outcome| {
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {n} ({name}): {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    };

    report(1, "oracle agreement", oracle_agreement());
    report(2, "coupling invariants", coupling_invariants());
    report(3, "regeneration consistency", regeneration_consistency());
    let (c4, seconds) = estimator_consistency();
    report(4, "estimator consistency", c4);
    report(
        5,
        "monotonicity and sigma shape",
        monotonicity_and_sigma_shape(),
    );
    report(6, "tail diagnostics", kappa_tail());
    report(7, "determinism", determinism());
    let mem = memory_footprint();
    report(
        8,
        "performance",
        outcome(
            seconds <= 60.0 && mem.passed,
            format!(
                "1000 runs x 10^4 steps single-threaded in {seconds:.1} s; {}",
                mem.detail
            ),
        ),
    );

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
