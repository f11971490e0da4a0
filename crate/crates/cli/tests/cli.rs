use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qss"))
        .args(args)
        .env_remove("QSS_OUTPUT_DIR")
        .output()
        .expect("spawn qss")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn num(text: &str, key: &str) -> f64 {
    value(text, key).parse().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qss-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

const SIM: [&str; 6] = ["simulate", "--loss-db", "10", "--mu", "0.01", "--rounds"];

#[test]
fn simulate_is_reproducible_per_seed() {
    let run = |seed: &str| qss(&[&SIM[..], &["2e5", "--seed", seed]].concat());
    let (a, b, c) = (run("7"), run("7"), run("8"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = stdout(&a);
    assert_eq!(value(&text, "rounds"), "200000");
    assert!(text.starts_with("# qss simulate\n"));
}

#[test]
fn noiseless_simulation_has_no_errors() {
    let o = qss(&[&SIM[..], &["2e5", "--seed", "3", "--noiseless"]].concat());
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["m_x", "m_ybc", "m_yac"] {
        assert_eq!(value(&text, key), "0");
    }
    for key in ["ebx", "eb_ybc", "eb_yac"] {
        assert_eq!(num(&text, key), 0.0);
    }
    assert_eq!(value(&text, "correlated_x"), "true");
    assert!(num(&text, "n_x") > 0.0);
}

#[test]
fn trace_has_one_line_per_round() {
    let dir = scratch("trace");
    let path = dir.join("trace.csv");
    let o = qss(&[
        &SIM[..],
        &["5000", "--seed", "1", "--trace", path.to_str().unwrap()],
    ]
    .concat());
    assert!(o.status.success());
    let trace = std::fs::read_to_string(&path).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("i,s_a,s_b,basis_a,basis_b,basis_c,outcome,s_c,set_tag")
    );
    assert_eq!(lines.count(), 5000);
}

#[test]
fn simulate_exit_codes() {
    let no_seed = qss(&[&SIM[..], &["100"]].concat());
    assert_eq!(no_seed.status.code(), Some(3));
    let capped = qss(&[
        "simulate",
        "--loss-db",
        "30",
        "--nx",
        "1e6",
        "--cap",
        "1e5",
        "--seed",
        "1",
    ]);
    assert_eq!(capped.status.code(), Some(2));
    assert_eq!(value(&stdout(&capped), "cap_exceeded"), "true");
    let bad = qss(&["simulate", "--mu", "-1", "--rounds", "10", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(3));
    let unknown = qss(&["simulate", "--frobnicate"]);
    assert_eq!(unknown.status.code(), Some(3));
}

fn last_positive(csv: &str) -> f64 {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("L_km"))
        .map(|l| {
            let f: Vec<f64> = l
                .split(',')
                .map(|x| x.parse().unwrap_or(f64::NAN))
                .collect();
            (f[0], f[3])
        })
        .filter(|&(_, rate)| rate > 0.0)
        .map(|(l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn sweep_reach() {
    let low = qss(&[
        "sweep", "--N", "1e10", "--ed", "0.015", "--Lmax", "260", "--step", "5",
    ]);
    assert!(low.status.success());
    assert!(last_positive(&stdout(&low)) >= 200.0);
    let high = qss(&[
        "sweep", "--N", "1e10", "--ed", "0.045", "--Lmax", "260", "--step", "5",
    ]);
    assert!(last_positive(&stdout(&high)) >= 150.0);
}

#[test]
fn infinite_key_curve_dominates() {
    let rates = |n: &str| -> Vec<f64> {
        let o = qss(&["sweep", "--N", n, "--Lmax", "240", "--step", "20"]);
        assert!(o.status.success());
        stdout(&o)
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("L_km"))
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect()
    };
    let inf = rates("inf");
    for n in ["1e9", "1e10", "1e11"] {
        for (f, i) in rates(n).iter().zip(&inf) {
            assert!(f <= i, "N = {n}: {f} > {i}");
        }
    }
}

#[test]
fn sweep_writes_to_output_dir() {
    let dir = scratch("outdir");
    let o = Command::new(env!("CARGO_BIN_EXE_qss"))
        .args([
            "sweep",
            "--Lmax",
            "10",
            "--step",
            "10",
            "--output",
            "curve.csv",
        ])
        .env("QSS_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    assert!(csv.contains("\nL_km,mu,px,rate_per_pulse,ell,Ep_bar,EbX,N\n"));
}

#[test]
fn analyze_first_table() {
    let o = qss(&["analyze", &fixture("tableIIIa_mu9e-4.csv"), "--N", "5e10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "n_x"), "787407");
    assert_eq!(format!("{:.2}", 100.0 * num(&text, "EbX")), "0.95");
    assert_eq!(format!("{:.2}", 100.0 * num(&text, "EbY")), "1.16");
    assert_eq!(value(&text, "worst_set"), "Yac");
}

#[test]
fn analyze_all_bundled_tables() {
    let o = qss(&["analyze", "--bundled"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let table: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("file,px,mu,"))
        .collect();
    assert_eq!(table.len(), 10);
    let names: Vec<&str> = table[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    let suffix = ["9e-4", "8e-4", "7e-4"];
    for (i, name) in names.iter().enumerate() {
        let letter = ["a", "b", "c"][i / 3];
        assert_eq!(*name, format!("tableIII{letter}_mu{}.csv", suffix[i % 3]));
    }
}

#[test]
fn analyze_exit_codes() {
    let dir = scratch("bad");
    let bad = dir.join("tableIIIa_mu9e-4.csv");
    std::fs::write(&bad, "phase_a,phase_b,phase_c,spd1,spd2\n0,0,7,1,2\n").unwrap();
    let malformed = qss(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(malformed.status.code(), Some(3));
    // a hopeless error-correction efficiency leaves no key
    let empty = qss(&["analyze", &fixture("tableIIIa_mu9e-4.csv"), "--fe", "40"]);
    assert_eq!(empty.status.code(), Some(2));
    assert_eq!(value(&stdout(&empty), "ell"), "0");
    let unnamed = dir.join("counts.csv");
    std::fs::copy(fixture("tableIIIa_mu9e-4.csv"), &unnamed).unwrap();
    assert_eq!(
        qss(&["analyze", unnamed.to_str().unwrap()]).status.code(),
        Some(3)
    );
    assert!(qss(&[
        "analyze",
        unnamed.to_str().unwrap(),
        "--mu",
        "9e-4",
        "--px",
        "0.9"
    ])
    .status
    .success());
    let few_pulses = qss(&["analyze", &fixture("tableIIIa_mu9e-4.csv"), "--N", "1e6"]);
    assert_eq!(few_pulses.status.code(), Some(3));
}

#[test]
fn kato_report() {
    let o = qss(&[
        "kato", "--k", "1e6", "--lam", "1e2", "--eps", "1e-10", "--dir", "upper",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let dev = num(&text, "deviation");
    assert!(num(&text, "brute_force_delta").abs() <= 1e-6 * dev);
    assert!((num(&text, "epsilon_back_substituted") / 1e-10 - 1.0).abs() < 1e-9);
    assert!(num(&text, "a") > 0.0);
    assert!((num(&text, "bound") - (100.0 + dev)).abs() < 1e-8 * dev);
}

#[test]
fn kato_symmetric_point_and_azuma() {
    let o = qss(&["kato", "--k", "1e6", "--lam", "k/2", "--compare-azuma"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(num(&text, "lambda"), 5e5);
    // the optimum sits just below a = 0 and barely improves on it
    assert!(num(&text, "a").abs() < 0.02);
    let (dev, a0) = (num(&text, "deviation"), num(&text, "a0_deviation"));
    assert!(dev <= a0 && (a0 - dev) / a0 < 1e-4);
    assert_eq!(num(&text, "azuma_over_a0"), 2.0);
    assert!(num(&text, "azuma_over_kato") >= 2.0);
    assert!(value(&text, "a0_deviation").parse::<f64>().is_ok());
}

#[test]
fn config_file_precedence() {
    let dir = scratch("config");
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        "# defaults for this run\nk = 1e4\nlam = 10\ndir = lower\n",
    )
    .unwrap();
    let o = qss(&["kato", "--config", cfg.to_str().unwrap(), "--lam", "20"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# k = 1.000000000e4\n"));
    assert!(text.contains("# dir = lower\n"));
    assert_eq!(num(&text, "lambda"), 20.0);
    assert_eq!(value(&text, "direction"), "lower");

    std::fs::write(&cfg, "k = 1e4\nlamda = 10\n").unwrap();
    let typo = qss(&["kato", "--config", cfg.to_str().unwrap()]);
    assert_eq!(typo.status.code(), Some(3));
    let missing = qss(&["kato", "--config", dir.join("nope.conf").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn seed_may_come_from_config() {
    let dir = scratch("seed");
    let cfg = dir.join("sim.conf");
    std::fs::write(&cfg, "seed = 11\nrounds = 1e4\nloss-db = 10\n").unwrap();
    let a = qss(&["simulate", "--config", cfg.to_str().unwrap()]);
    let b = qss(&[
        "simulate",
        "--loss-db",
        "10",
        "--rounds",
        "1e4",
        "--seed",
        "11",
    ]);
    assert!(a.status.success());
    let body = |o: &Output| {
        stdout(o)
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body(&a), body(&b));
}
