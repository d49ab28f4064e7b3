use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn erw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erw"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn oracle_one_step_law_golden() {
    // Hand-computed: P(+e1) = 3/8, P(-e1) = 1/8, transverse steps leave x1 = 0.
    let o = erw(&["oracle", "--p", "0.75", "--steps", "1"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "statistic,value,probability,exact\nx1,-1,0.125,1/8\nx1,0,0.5,1/2\nx1,1,0.375,3/8\n"
    );
}

#[test]
fn oracle_reports_censored_mass() {
    let o = erw(&["oracle", "--p", "0.75", "--steps", "1", "--statistic", "D"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "statistic,value,probability,exact\nD,1,0.5,1/2\nD,censored,0.5,1/2\n"
    );
}

#[test]
fn output_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &str); 4] = [
        (
            "simulate",
            &[
                "simulate",
                "--steps",
                "200",
                "--runs",
                "5",
                "--confirm-lag",
                "20",
            ],
            "run_id,seed,p,d,steps,x1_final,j_count,r_max,n_confirmed_regens,kappa1_or_censored",
        ),
        (
            "regen",
            &[
                "regen",
                "--steps",
                "200",
                "--runs",
                "5",
                "--confirm-lag",
                "20",
            ],
            "run_id,block_index,dk,dx1,is_first,censored",
        ),
        (
            "couple",
            &["couple", "--steps", "200", "--runs", "5"],
            "run_id,seed,p,d,steps,y_x1,z_x1,gap,h_count,tan_count,j_count,violations",
        ),
        (
            "sweep",
            &[
                "sweep", "--steps", "100", "--runs", "5", "--p-grid", "0.6,0.9",
            ],
            "p,v_hat,v_se,sigma_hat,sigma_se",
        ),
    ];
    for (tag, args, expected) in cases {
        let out = dir.path().join(format!("{tag}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_erw"))
            .args(args)
            .arg("--output")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{tag}: {}", stderr(&o));
        assert_eq!(header(&out), expected, "{tag}");
    }
    let summary = dir.path().join("simulate.csv.summary.csv");
    assert_eq!(
        header(&summary),
        "p,d,n_steps,n_runs,method,v_hat,v_se,sigma_hat,sigma_se,n_blocks,censored_fraction"
    );
    let leftovers = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .to_string_lossy()
                .ends_with(".partial")
        })
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn jsonl_rows_parse() {
    let o = erw(&[
        "couple", "--steps", "50", "--runs", "3", "--format", "jsonl",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for (i, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["run_id"], i as u64);
        assert_eq!(v["violations"], 0);
    }
}

#[test]
fn seed_replays_and_differs() {
    let args = ["simulate", "--steps", "300", "--runs", "4", "--seed", "9"];
    assert_eq!(erw(&args).stdout, erw(&args).stdout);
    let other = erw(&["simulate", "--steps", "300", "--runs", "4", "--seed", "10"]);
    assert_ne!(erw(&args).stdout, other.stdout);
}

#[test]
fn bias_outside_domain_is_refused() {
    let o = erw(&["simulate", "--p", "0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model domain violation"));

    let o = erw(&["simulate", "--p", "0.5", "--steps", "10", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = erw(&[
        "simulate",
        "--p",
        "0.5",
        "--steps",
        "10",
        "--runs",
        "1",
        "--allow-boundary-p",
    ]);
    assert!(o.status.success());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(erw(&["simulate", "--d", "1"]).status.code(), Some(1));
    assert_eq!(erw(&["sweep", "--runs", "2"]).status.code(), Some(1));
    assert_eq!(erw(&["bogus"]).status.code(), Some(1));
    let o = erw(&["oracle", "--steps", "13"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("budget"));
    assert_eq!(erw(&["--help"]).status.code(), Some(0));
}

#[test]
fn selftest_passes() {
    let o = erw(&["selftest", "--runs", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(
        err.lines().filter(|l| l.starts_with("PASS")).count() >= 6,
        "{err}"
    );
    assert!(!err.contains("FAIL"));
}

#[test]
fn selftest_detects_corrupt_law() {
    let o = erw(&["selftest", "--runs", "200", "--corrupt-step-law"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FAIL coupling_marginal"));
}

#[test]
fn selftest_zero_runs_is_vacuous() {
    let o = erw(&["selftest", "--runs", "0"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("vacuous"));
}

#[test]
fn plot_script_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let script = dir.path().join("plot.py");
    let o = Command::new(env!("CARGO_BIN_EXE_erw"))
        .args([
            "sweep", "--steps", "50", "--runs", "4", "--p-grid", "0.6,0.8", "--output",
        ])
        .arg(&out)
        .arg("--plot-script")
        .arg(&script)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&script).unwrap().contains("sweep.csv"));
}
