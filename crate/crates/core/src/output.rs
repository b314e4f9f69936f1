//! Plot-ready CSV/JSONL writers.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly. Missing values are empty fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::experiments::{EnsembleStats, SweepRow};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Tau as it appears in file names, e.g. `0.01` or `2.25`.
pub fn tau_label(tau: f64) -> String {
    format!("{tau}")
}

struct Sink {
    path: PathBuf,
    w: BufWriter<File>,
}

impl Sink {
    fn create(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Sink {
            w: BufWriter::new(file),
            path,
        })
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.w, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Provenance record. Excludes the output directory and thread count so
/// that outputs compare byte-for-byte across locations and parallelism.
pub fn manifest(config: &ConfigFile, kind: &str) -> serde_json::Value {
    let e = &config.ensemble;
    json!({
        "kind": kind,
        "code_version": env!("CARGO_PKG_VERSION"),
        "master_seed": e.master_seed,
        "config": {
            "n": e.n,
            "mu": e.mu,
            "sigma": e.sigma,
            "r_bound": e.r_bound,
            "epsilon": e.epsilon,
            "tau_grid": e.tau_grid,
            "variant": e.variant.as_str(),
            "scheduler": e.scheduler.as_str(),
            "runs": e.runs,
            "t_max": e.t_max,
            "sample_interval": e.sample_interval,
            "tol": e.tol,
            "emit_raw": config.emit_raw,
            "emit_histograms": config.emit_histograms,
            "emit_timecourses": config.emit_timecourses,
            "n_grid": config.n_grid,
        }
    })
}

fn write_manifest(dir: &Path, config: &ConfigFile, kind: &str) -> Result<PathBuf> {
    let mut s = Sink::create(dir, "manifest.json")?;
    let text = serde_json::to_string_pretty(&manifest(config, kind)).expect("json value serializes");
    s.line(&text)?;
    s.finish()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the ensemble outputs into `config.out_dir`; returns the paths written.
pub fn emit_results(stats: &EnsembleStats, config: &ConfigFile) -> Result<Vec<PathBuf>> {
    let dir = config.out_dir.as_path();
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let mut s = Sink::create(dir, "summary.csv")?;
    s.line("tau,finished,mean_T,updates_per_link,coupon_line,trivial_flag")?;
    for ts in &stats.per_tau {
        s.line(&format!(
            "{},{},{},{},{},{}",
            fmt_f64(ts.tau),
            ts.finished,
            fmt_opt(ts.mean_t),
            fmt_opt(ts.updates_per_link),
            fmt_f64(stats.coupon_line),
            ts.trivial as u8
        ))?;
    }
    written.push(s.finish()?);

    let mut s = Sink::create(dir, "discards.csv")?;
    s.line("run")?;
    for r in &stats.discarded {
        s.line(&r.to_string())?;
    }
    written.push(s.finish()?);

    for ts in &stats.per_tau {
        let label = tau_label(ts.tau);
        if config.emit_histograms {
            let mut s = Sink::create(dir, &format!("t_histogram_{label}.csv"))?;
            s.line("bin_lo,bin_hi,count")?;
            for b in &ts.histogram {
                s.line(&format!("{},{},{}", fmt_f64(b.lo), fmt_f64(b.hi), b.count))?;
            }
            written.push(s.finish()?);
        }
        if config.emit_timecourses {
            let mut s = Sink::create(dir, &format!("timecourse_{label}.csv"))?;
            s.line("t,mean_unbalanced_fraction,runs_contributing")?;
            for p in &ts.timecourse {
                s.line(&format!(
                    "{},{},{}",
                    fmt_f64(p.t),
                    fmt_f64(p.mean_fraction),
                    p.runs_contributing
                ))?;
            }
            written.push(s.finish()?);
        }
    }

    if config.emit_raw {
        let mut s = Sink::create(dir, "runs.jsonl")?;
        for r in &stats.records {
            let rec = json!({
                "master_seed": config.ensemble.master_seed,
                "run": r.run,
                "tau_index": r.tau_index,
                "tau": r.tau,
                "finished": r.finished,
                "T": r.t_balance,
                "events": r.events,
            });
            s.line(&rec.to_string())?;
        }
        written.push(s.finish()?);
    }

    written.push(write_manifest(dir, config, "ensemble")?);
    Ok(written)
}

/// Writes `sweep.csv` and the manifest for a size sweep.
pub fn emit_sweep(rows: &[SweepRow], config: &ConfigFile) -> Result<Vec<PathBuf>> {
    let dir = config.out_dir.as_path();
    ensure_dir(dir)?;
    let mut s = Sink::create(dir, "sweep.csv")?;
    s.line("n,tau,updates_per_link,normalized_updates,coupon_line_normalized,trivial_line,discarded")?;
    for r in rows {
        s.line(&format!(
            "{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.tau),
            fmt_opt(r.updates_per_link),
            fmt_opt(r.normalized),
            fmt_opt(r.coupon_normalized),
            fmt_f64(r.trivial_line),
            r.discarded
        ))?;
    }
    Ok(vec![s.finish()?, write_manifest(dir, config, "sweep")?])
}
