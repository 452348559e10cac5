//! End-to-end checks of the command-line workflow on small data.

use hapdecon::cli::cli_main;
use std::fs;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("hapdecon").chain(args.iter().copied()))
}

fn small_fit(dir: &Path, seed: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let sim = dir.join("sim");
    let out = dir.join(format!("run_{seed}"));
    assert_eq!(
        run(&[
            "simulate",
            "--out",
            sim.to_str().unwrap(),
            "--snvs",
            "20",
            "--samples",
            "4",
            "--depth",
            "40",
            "--seed",
            "5",
        ]),
        0
    );
    assert_eq!(
        run(&[
            "fit",
            "--data",
            sim.join("data.tsv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--paper-config",
            "--iterations",
            "300",
            "--burn-in",
            "150",
            "--thin",
            "5",
            "--seed",
            seed,
            "--rj-inner-iters",
            "15",
            "--c-max",
            "6",
        ]),
        0
    );
    (sim, out)
}

#[test]
fn simulate_fit_summarize_diagnose_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let (_sim, out) = small_fit(dir.path(), "11");

    // posterior_C.csv: probabilities sum to 1 and the argmax matches fit.json
    let text = fs::read_to_string(out.join("posterior_C.csv")).unwrap();
    let mut total = 0.0f64;
    let mut best = (0usize, 0.0f64);
    for line in text.lines().skip(1) {
        let (c, p) = line.split_once(',').unwrap();
        let (c, p): (usize, f64) = (c.parse().unwrap(), p.parse().unwrap());
        total += p;
        if p > best.1 {
            best = (c, p);
        }
    }
    assert!((total - 1.0).abs() < 1e-9);
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["c_star"].as_u64().unwrap() as usize, best.0);

    // w_star.csv rows: background + haplotype weights, all parseable
    let (header, rows) = hapdecon::io::read_csv(&out.join("w_star.csv")).unwrap();
    assert_eq!(header[0], "sample_id");
    assert_eq!(header[1], "background");
    assert_eq!(rows.len(), 4);
    for row in &rows {
        for v in &row[1..] {
            let x: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }

    // summarize into a fresh directory reproduces fit.json byte for byte
    let re = dir.path().join("resummary");
    assert_eq!(
        run(&[
            "summarize",
            "--run-dir",
            out.to_str().unwrap(),
            "--out",
            re.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(
        fs::read(out.join("fit.json")).unwrap(),
        fs::read(re.join("fit.json")).unwrap()
    );

    // diagnose writes one row per chain
    assert_eq!(run(&["diagnose", "--run-dir", out.to_str().unwrap()]), 0);
    let diag = fs::read_to_string(out.join("diagnose.csv")).unwrap();
    assert_eq!(diag.lines().count(), 2);
    assert!(diag.starts_with("chain,seed,iterations,theta_accept"));
}

#[test]
fn fit_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (_sim, a) = small_fit(dir.path(), "21");
    let sim = dir.path().join("sim").join("data.tsv");
    let b = dir.path().join("repeat");
    assert_eq!(
        run(&[
            "fit",
            "--data",
            sim.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--paper-config",
            "--iterations",
            "300",
            "--burn-in",
            "150",
            "--thin",
            "5",
            "--seed",
            "21",
            "--rj-inner-iters",
            "15",
            "--c-max",
            "6",
        ]),
        0
    );
    assert_eq!(
        fs::read(a.join("fit.json")).unwrap(),
        fs::read(b.join("fit.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("chain_0").join("scalars.csv")).unwrap(),
        fs::read(b.join("chain_0").join("scalars.csv")).unwrap()
    );
}

#[test]
fn fit_missing_data_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&[
        "fit",
        "--data",
        dir.path().join("nope.tsv").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    assert_eq!(run(&["fit", "--frobnicate"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
}

#[test]
fn malformed_tsv_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "snv_id\tsample_id\tn\tN\nrs1\ts1\t9\t5\n").unwrap();
    let code = run(&[
        "fit",
        "--data",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(
        run(&[
            "simulate",
            "--out",
            sim.to_str().unwrap(),
            "--snvs",
            "10",
            "--samples",
            "3",
            "--seed",
            "2",
        ]),
        0
    );
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "mcmc.iterations = 200\nmcmc.burn_in = 100\nmcmc.thin = 5\n\
         mcmc.seed = 40\nmcmc.rj_prob = 0\nhyperparams.c_max = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    // --seed overrides the config file's seed
    assert_eq!(
        run(&[
            "fit",
            "--data",
            sim.join("data.tsv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--config",
            conf.to_str().unwrap(),
            "--seed",
            "41",
        ]),
        0
    );
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("chain_0").join("meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"].as_u64().unwrap(), 41);
    assert_eq!(meta["iterations"].as_u64().unwrap(), 200);
}

#[test]
fn snv_noise_variant_simulates_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(
        run(&[
            "simulate",
            "--out",
            sim.to_str().unwrap(),
            "--snvs",
            "15",
            "--samples",
            "3",
            "--snv-noise",
            "--seed",
            "8",
        ]),
        0
    );
    let truth: serde_json::Value =
        serde_json::from_slice(&fs::read(sim.join("truth.json")).unwrap()).unwrap();
    assert!(truth["per_snv_noise"].is_array());
    assert_eq!(truth["per_snv_noise"].as_array().unwrap().len(), 15);
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "fit",
            "--data",
            sim.join("data.tsv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--iterations",
            "150",
            "--burn-in",
            "80",
            "--rj-inner-iters",
            "10",
            "--c-max",
            "4",
        ]),
        0
    );
}
