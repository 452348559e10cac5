//! Command-line workflow: simulate, fit, summarize, diagnose.

use crate::diagnostics::diagnose;
use crate::error::{Error, Result};
use crate::io::{read_counts, write_counts, write_summary, RunConfig};
use crate::model::Hyperparams;
use crate::sampler::run_chain;
use crate::simulate::{simulate_counts, SimTruth};
use crate::summary::summarize;
use crate::trace::Trace;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hapdecon",
    about = "Infer latent tumor haplotypes and their per-sample proportions \
             from SNV read counts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data set with known ground truth
    Simulate(SimulateArgs),
    /// Run MCMC chains on a counts file and summarize the posterior
    Fit(FitArgs),
    /// Recompute the posterior summary from stored traces
    Summarize(SummarizeArgs),
    /// Report acceptance rates, convergence scores and effective sample sizes
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory for data.tsv and truth.json
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of SNVs
    #[arg(long, default_value_t = 100)]
    snvs: usize,
    /// Number of samples
    #[arg(long, default_value_t = 30)]
    samples: usize,
    /// Total reads per cell
    #[arg(long, default_value_t = 50)]
    depth: u32,
    /// True background variant rate
    #[arg(long, default_value_t = 0.01)]
    p0: f64,
    /// Replace the shared background term with SNV-specific noise rates
    #[arg(long)]
    snv_noise: bool,
    /// Use the benchmark scenario exactly: 100 SNVs, 30 samples, depth 50,
    /// p0 = 0.01 (overrides the size flags)
    #[arg(long)]
    paper_config: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    /// Counts TSV (snv_id, sample_id, n, N)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Output directory for traces and summary files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Flat key=value configuration file; flags override its settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Simulation-study hyperparameters: r=0.2, alpha=3, a0=a=0.5, a00=1,
    /// b00=100
    #[arg(long, conflicts_with = "pdac_config")]
    paper_config: bool,
    /// Exome-analysis hyperparameters: r=0.2, alpha=1, a=a0=1, a00=5, b00=95
    #[arg(long)]
    pdac_config: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains (seeds seed, seed+1, ...)
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    c_max: Option<usize>,
    #[arg(long)]
    rj_prob: Option<f64>,
    #[arg(long)]
    rj_inner_iters: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Directory produced by `fit`
    #[arg(long, value_name = "DIR")]
    run_dir: PathBuf,
    /// Where to write the summary files (defaults to the run directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Directory produced by `fit`
    #[arg(long, value_name = "DIR")]
    run_dir: PathBuf,
    /// Output CSV path (defaults to <run_dir>/diagnose.csv)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout and usage errors on stderr
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (snvs, samples, depth, p0) = if args.paper_config {
        (100, 30, 50, 0.01)
    } else {
        (args.snvs, args.samples, args.depth, args.p0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut truth = SimTruth::benchmark_sized(snvs, samples, depth, p0, &mut rng)?;
    if args.snv_noise {
        truth = truth.with_snv_noise(None, &mut rng)?;
    }
    let data = simulate_counts(&truth, &mut rng)?;
    fs::create_dir_all(&args.out)?;
    write_counts(&data, &args.out.join("data.tsv"))?;
    truth.save_json(&args.out.join("truth.json"))?;
    println!(
        "wrote {} SNVs x {} samples to {}",
        snvs,
        samples,
        args.out.display()
    );
    Ok(())
}

/// Sidecar written at fit time so summarize/diagnose can label outputs
/// without re-reading the data.
#[derive(Serialize, Deserialize)]
struct RunIds {
    snv_ids: Vec<String>,
    sample_ids: Vec<String>,
    data_hash: u64,
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let preset = if args.pdac_config {
        Hyperparams::exome_preset()
    } else {
        // simulation-study values are the default preset
        Hyperparams::simulation_preset()
    };
    let mut cfg = RunConfig::new(preset);
    cfg.data_path = Some(args.data.clone());
    cfg.output_dir = args.out.clone();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = args.seed {
        cfg.hp.mcmc.seed = v;
    }
    if let Some(v) = args.chains {
        cfg.chains = v;
    }
    if let Some(v) = args.iterations {
        cfg.hp.mcmc.iterations = v;
    }
    if let Some(v) = args.burn_in {
        cfg.hp.mcmc.burn_in = v;
    }
    if let Some(v) = args.thin {
        cfg.hp.mcmc.thin = v;
    }
    if let Some(v) = args.c_max {
        cfg.hp.c_max = v;
    }
    if let Some(v) = args.rj_prob {
        cfg.hp.mcmc.rj_prob = v;
    }
    if let Some(v) = args.rj_inner_iters {
        cfg.hp.mcmc.rj_inner_iters = v;
    }
    cfg.validate()?;

    let data = read_counts(&args.data)?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(
        cfg.output_dir.join("ids.json"),
        serde_json::to_vec_pretty(&RunIds {
            snv_ids: data.snv_ids().to_vec(),
            sample_ids: data.sample_ids().to_vec(),
            data_hash: data.content_hash(),
        })?,
    )?;

    let base_seed = cfg.hp.mcmc.seed;
    let results: Vec<Result<Trace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|chain| {
                let mut hp = cfg.hp.clone();
                hp.mcmc.seed = base_seed + chain as u64;
                let data = &data;
                eprintln!(
                    "chain {chain}: {} iterations (seed {})",
                    hp.mcmc.iterations, hp.mcmc.seed
                );
                scope.spawn(move || run_chain(data, &hp, None))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    let mut traces = Vec::with_capacity(cfg.chains);
    for (chain, result) in results.into_iter().enumerate() {
        let trace = result?;
        trace.save_dir(&cfg.output_dir.join(format!("chain_{chain}")))?;
        traces.push(trace);
    }

    let summary = summarize(&traces)?;
    write_summary(&summary, data.snv_ids(), data.sample_ids(), &cfg.output_dir)?;
    println!(
        "C* = {}, p0* = {:.5}; summary written to {}",
        summary.c_star,
        summary.p0_star,
        cfg.output_dir.display()
    );
    Ok(())
}

fn load_run_traces(run_dir: &Path) -> Result<(Vec<Trace>, RunIds)> {
    let ids: RunIds = serde_json::from_slice(&fs::read(run_dir.join("ids.json"))?)?;
    let mut traces = Vec::new();
    let mut chain = 0usize;
    loop {
        let dir = run_dir.join(format!("chain_{chain}"));
        if !dir.is_dir() {
            break;
        }
        traces.push(Trace::load_dir(&dir)?);
        chain += 1;
    }
    if traces.is_empty() {
        return Err(Error::validation(format!(
            "no chain_* directories under {}",
            run_dir.display()
        )));
    }
    for t in &traces {
        if t.meta.data_hash != ids.data_hash {
            return Err(Error::validation(
                "stored traces do not match the recorded data hash",
            ));
        }
    }
    Ok((traces, ids))
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let (traces, ids) = load_run_traces(&args.run_dir)?;
    let summary = summarize(&traces)?;
    let out = args.out.unwrap_or_else(|| args.run_dir.clone());
    write_summary(&summary, &ids.snv_ids, &ids.sample_ids, &out)?;
    println!("C* = {}; summary written to {}", summary.c_star, out.display());
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let (traces, _) = load_run_traces(&args.run_dir)?;
    let mut csv = String::from(
        "chain,seed,iterations,theta_accept,row_accept,p0_accept,\
         rj_attempt_rate,rj_accept_rate,z_log_joint,z_c,ess_log_joint\n",
    );
    for (i, trace) in traces.iter().enumerate() {
        let d = diagnose(trace)?;
        writeln!(
            csv,
            "{i},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.3},{:.3},{:.1}",
            d.seed,
            d.iterations,
            d.theta_accept,
            d.row_accept,
            d.p0_accept,
            d.rj_attempt_rate,
            d.rj_accept_rate,
            d.z_log_joint,
            d.z_c,
            d.ess_log_joint
        )
        .expect("string write");
    }
    let out = args
        .out
        .unwrap_or_else(|| args.run_dir.join("diagnose.csv"));
    fs::write(&out, csv)?;
    println!("diagnostics written to {}", out.display());
    Ok(())
}
