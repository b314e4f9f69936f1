use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use temporal_balance::config::ConfigFile;
use temporal_balance::experiments::{scheduler_rng, size_sweep};
use temporal_balance::output::{emit_results, emit_sweep, fmt_f64};
use temporal_balance::scheduler::{run_single, Scheduler};
use temporal_balance::validate::run_battery;
use temporal_balance::{run_ensemble, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "tbal", version, about = "Structural-balance dynamics on temporal complete graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single run with the first tau of the grid; prints the time course.
    Run,
    /// Full ensemble protocol over the tau grid.
    Ensemble,
    /// Ensembles over the n grid, normalized by the smallest tau.
    Sweep,
    /// Runs the oracle self-check battery.
    Validate,
    /// Prints the effective configuration.
    ShowConfig,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    r_bound: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Comma-separated tau grid, e.g. `0.01,0.22,1`.
    #[arg(long, global = true, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// no_self_loops | self_loops
    #[arg(long, global = true)]
    variant: Option<String>,
    /// with_replacement | without_replacement
    #[arg(long, global = true)]
    scheduler: Option<String>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    sample_interval: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write runs.jsonl.
    #[arg(long, global = true)]
    emit_raw: bool,
    /// Comma-separated node counts for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ConfigFile) -> Result<()> {
        let mut set = |k: &str, v: Value| cfg.set(k, &v);
        let int = |x: u64| Value::Integer(x as i64);
        if let Some(v) = self.seed {
            if v > i64::MAX as u64 {
                return Err(Error::Config("seed must fit in a signed 64-bit integer".into()));
            }
            set("master_seed", int(v))?;
        }
        if let Some(v) = self.threads {
            set("threads", int(v as u64))?;
        }
        if let Some(v) = &self.out {
            set("out_dir", Value::String(v.display().to_string()))?;
        }
        if let Some(v) = self.n {
            set("n", int(v as u64))?;
        }
        let floats = [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("r_bound", self.r_bound),
            ("epsilon", self.epsilon),
            ("t_max", self.t_max),
            ("sample_interval", self.sample_interval),
            ("tol", self.tol),
        ];
        for (k, v) in floats {
            if let Some(v) = v {
                set(k, Value::Float(v))?;
            }
        }
        if let Some(v) = &self.tau {
            set("tau_grid", Value::Array(v.iter().map(|&x| Value::Float(x)).collect()))?;
        }
        if let Some(v) = &self.variant {
            set("variant", Value::String(v.clone()))?;
        }
        if let Some(v) = &self.scheduler {
            set("scheduler", Value::String(v.clone()))?;
        }
        if let Some(v) = self.runs {
            set("runs", int(v as u64))?;
        }
        if self.emit_raw {
            set("emit_raw", Value::Boolean(true))?;
        }
        if let Some(v) = &self.n_grid {
            set("n_grid", Value::Array(v.iter().map(|&x| int(x as u64)).collect()))?;
        }
        Ok(())
    }
}

fn load_config(o: &Overrides) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    if let Some(path) = &o.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            field: path.display().to_string(),
            message: e.message().to_string(),
        })?;
        cfg.apply_table(&table)?;
    }
    cfg.apply_env(std::env::vars())?;
    o.apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(cfg: &ConfigFile) -> Result<()> {
    let e = &cfg.ensemble;
    let tau = e.tau_grid[0];
    let spec = e.model()?;
    let initial = e.initial_condition(0)?;
    let sched = Scheduler::new(e.scheduler, tau)?;
    let rng = scheduler_rng(e.master_seed, 0, 0);
    let out = run_single(initial, spec, sched, &e.run_params(), rng)?;
    println!(
        "# n={} mu={} tau={} variant={} scheduler={} seed={}",
        e.n,
        e.mu,
        tau,
        e.variant.as_str(),
        e.scheduler.as_str(),
        e.master_seed
    );
    println!("t,unbalanced,unbalanced_fraction");
    for (t, &c) in out.sample_times().zip(&out.timecourse) {
        println!("{},{},{}", fmt_f64(t), c, fmt_f64(c as f64 / out.total_triads as f64));
    }
    match out.t_balance {
        Some(t) => println!("# finished T={} events={}", fmt_f64(t), out.events),
        None => println!("# unfinished at t_max={} events={}", fmt_f64(e.t_max), out.events),
    }
    Ok(())
}

fn cmd_ensemble(cfg: &ConfigFile) -> Result<()> {
    let stats = run_ensemble(&cfg.ensemble)?;
    let files = emit_results(&stats, cfg)?;
    eprintln!(
        "{} runs x {} tau values, {} discarded; wrote {} files to {}",
        stats.runs,
        stats.per_tau.len(),
        stats.discarded.len(),
        files.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_sweep(cfg: &ConfigFile) -> Result<()> {
    let rows = size_sweep(&cfg.ensemble, &cfg.n_grid)?;
    emit_sweep(&rows, cfg)?;
    eprintln!("wrote sweep.csv ({} rows) to {}", rows.len(), cfg.out_dir.display());
    Ok(())
}

fn cmd_validate(cfg: &ConfigFile) -> bool {
    let checks = run_battery(cfg.ensemble.master_seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Ensemble => cmd_ensemble(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Validate => {
            return if cmd_validate(&cfg) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
