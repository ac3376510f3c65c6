use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rgm::config::ModelConfig;
use rgm::datasets::{generate_synthetic, load_dataset, write_dataset, Dataset, Scenario};
use rgm::diagnostics::{
    autocorrelation, coclustering, log_cpo, posterior_k_distribution, predictive_density_grid,
    GridSpec,
};
use rgm::sampler::{build_zk_table, cached_zk_table, run_chains, Model, RunSpec};
use rgm::{Error, Trace};

const BUILD_ID: &str = env!("RGM_BUILD_ID");

#[derive(Parser)]
#[command(name = "rgm", version, about = "Repulsive Gaussian mixture sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV with a label column.
    Simulate {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampler on a CSV dataset; writes traces and manifest.json into --out.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// `key = value` configuration file; missing keys take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        sweeps: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Independent chains, seeded `seed, seed + 1, ...`.
        #[arg(long, default_value_t = 1)]
        chains: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summaries of a trace file.
    Diagnose {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        what: What,
        /// Dataset with true labels, for the misclassification error.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        grid_lo: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        grid_hi: f64,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[arg(long, default_value_t = 50)]
        max_lag: usize,
        /// Output file; stdout when absent (the grid and co-clustering matrix need a file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Cpo,
    Grid,
    Khist,
    Cocluster,
    Acf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            n,
            seed,
            out,
        } => simulate(scenario, n, seed, &out),
        Command::Fit {
            data,
            config,
            sweeps,
            burn_in,
            thin,
            seed,
            chains,
            out,
        } => fit(
            &data,
            config.as_deref(),
            RunSpec {
                sweeps,
                burn_in,
                thin,
                seed,
            },
            chains,
            &out,
        ),
        Command::Diagnose {
            trace,
            what,
            data,
            grid_lo,
            grid_hi,
            grid_points,
            max_lag,
            out,
        } => {
            let grid = (grid_lo, grid_hi, grid_points);
            diagnose(&trace, what, data.as_deref(), grid, max_lag, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input (arguments, configuration, data files), 1 for failures while running.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. }
        | Error::Parse { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyDataset
        | Error::TruncationInsufficient { .. }
        | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn simulate(scenario: Scenario, n: usize, seed: u64, out: &Path) -> rgm::Result<()> {
    let data = generate_synthetic(scenario, n, seed)?;
    write_dataset(&data, out)?;
    log::info!(
        "wrote {} observations of {} to {}",
        n,
        scenario,
        out.display()
    );
    Ok(())
}

fn fit(
    data_path: &Path,
    config_path: Option<&Path>,
    run: RunSpec,
    chains: u64,
    out: &Path,
) -> rgm::Result<()> {
    let config = match config_path {
        Some(path) => {
            let (config, missing) = ModelConfig::load(path)?;
            if !missing.is_empty() {
                log::info!("defaults used for: {}", missing.join(", "));
            }
            config
        }
        None => ModelConfig::default(),
    };
    config.validate()?;
    run.validate()?;
    if chains == 0 {
        return Err(Error::InvalidParameter {
            name: "chains",
            reason: "must be positive".into(),
        });
    }
    let data = load_dataset(data_path)?;
    fs::create_dir_all(out)?;

    let start = Instant::now();
    let zk = match std::env::var_os("RGM_ZK_CACHE") {
        Some(dir) => cached_zk_table(&config, data.p(), Path::new(&dir))?,
        None => build_zk_table(&config, data.p())?,
    };
    let zk_secs = start.elapsed().as_secs_f64();
    log::info!("Z_K table ready in {zk_secs:.1} s");
    let model = Model::with_zk_table(&config, data.n(), data.p(), zk)?;
    let seeds: Vec<u64> = (0..chains).map(|c| run.seed.wrapping_add(c)).collect();
    let traces = run_chains(&data, &model, run, &seeds)?;

    let mut chain_entries = Vec::new();
    for (c, trace) in traces.iter().enumerate() {
        let name = if chains == 1 {
            "trace.jsonl".to_string()
        } else {
            format!("trace-{c}.jsonl")
        };
        trace.save(&out.join(&name))?;
        let meta = trace.meta.as_ref();
        chain_entries.push(json!({
            "trace": name,
            "seed": seeds[c],
            "retained": trace.len(),
            "elapsed_secs": meta.map(|m| m.elapsed_secs),
            "k_path": trace.k_path,
        }));
    }
    let manifest = json!({
        "build": BUILD_ID,
        "data": data_path.display().to_string(),
        "n": data.n(),
        "p": data.p(),
        "config": config,
        "config_hash": config.content_hash(),
        "sweeps": run.sweeps,
        "burn_in": run.burn_in,
        "thin": run.thin,
        "zk_secs": zk_secs,
        "total_secs": start.elapsed().as_secs_f64(),
        "chains": chain_entries,
    });
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    log::info!("wrote {} chain(s) to {}", chains, out.display());
    Ok(())
}

fn diagnose(
    trace_path: &Path,
    what: What,
    data_path: Option<&Path>,
    (lo, hi, points): (f64, f64, usize),
    max_lag: usize,
    out: Option<&Path>,
) -> rgm::Result<()> {
    let trace = Trace::load(trace_path)?;
    if trace.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data: Option<Dataset> = data_path.map(load_dataset).transpose()?;
    let need_file = || {
        out.ok_or(Error::InvalidParameter {
            name: "out",
            reason: "this summary is written to a file".into(),
        })
    };
    let text = match what {
        What::Cpo => format!("{}\n", log_cpo(&trace)?),
        What::Khist => {
            let mut s = String::from("k,probability\n");
            for (k, f) in posterior_k_distribution(&trace) {
                s.push_str(&format!("{k},{f}\n"));
            }
            s
        }
        What::Acf => {
            let ks: Vec<f64> = trace.snapshots.iter().map(|s| s.k as f64).collect();
            let mut s = String::from("lag,acf\n");
            for (lag, a) in autocorrelation(&ks, max_lag.min(ks.len().saturating_sub(1)))?
                .iter()
                .enumerate()
            {
                s.push_str(&format!("{lag},{a}\n"));
            }
            s
        }
        What::Grid => {
            let p = trace.snapshots[0].p();
            let grid = predictive_density_grid(&trace, &GridSpec::square(p, lo, hi, points))?;
            grid.write_csv(need_file()?)?;
            return Ok(());
        }
        What::Cocluster => {
            let summary = coclustering(&trace, data.as_ref().and_then(|d| d.labels()))?;
            summary.write_csv(need_file()?)?;
            if let Some(m) = summary.misclassification {
                println!("misclassification {m}");
            }
            return Ok(());
        }
    };
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
