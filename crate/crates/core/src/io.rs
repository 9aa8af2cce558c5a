//! CSV and JSON exporters. Every CSV carries a fixed header, written even
//! when there are no rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::env::{TraceRow, TRACE_HEADER};
use crate::error::Result;
use crate::learner::{Algo, CurvePoint};

pub const CURVE_HEADER: [&str; 9] = [
    "algo",
    "task",
    "seed",
    "env_steps",
    "window_mean_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
];

pub const CONTINUAL_HEADER: [&str; 8] = [
    "algo",
    "preset",
    "seed",
    "phase",
    "task",
    "env_steps",
    "window_mean_reward",
    "phase_boundary",
];

pub const EPISODE_HEADER: [&str; 2] = ["episode", "reward"];

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    algo: &'a str,
    task: &'a str,
    seed: u64,
    env_steps: u64,
    window_mean_reward: Option<f64>,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    clip_fraction: f64,
}

#[derive(Debug, Serialize)]
struct ContinualRow<'a> {
    algo: &'a str,
    preset: &'a str,
    seed: u64,
    phase: usize,
    task: &'a str,
    env_steps: u64,
    window_mean_reward: Option<f64>,
    phase_boundary: bool,
}

fn write_rows<W: Write, S: Serialize>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = S>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn to_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn curve_csv<W: Write>(out: W, algo: Algo, seed: u64, curve: &[CurvePoint]) -> Result<()> {
    let rows = curve.iter().map(|p| CurveRow {
        algo: algo.name(),
        task: p.task.name(),
        seed,
        env_steps: p.env_steps,
        window_mean_reward: p.window_mean,
        policy_loss: p.stats.policy_loss,
        value_loss: p.stats.value_loss,
        entropy: p.stats.entropy,
        clip_fraction: p.stats.clip_fraction,
    });
    write_rows(out, &CURVE_HEADER, rows)
}

/// `phase_boundary` is true on the first row of each phase.
pub fn continual_csv<W: Write>(
    out: W,
    algo: Algo,
    preset: &str,
    seed: u64,
    curve: &[CurvePoint],
) -> Result<()> {
    let rows = curve.iter().enumerate().map(|(i, p)| ContinualRow {
        algo: algo.name(),
        preset,
        seed,
        phase: p.phase,
        task: p.task.name(),
        env_steps: p.env_steps,
        window_mean_reward: p.window_mean,
        phase_boundary: i == 0 || curve[i - 1].phase != p.phase,
    });
    write_rows(out, &CONTINUAL_HEADER, rows)
}

pub fn trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    write_rows(out, &TRACE_HEADER, rows)
}

pub fn episode_csv<W: Write>(out: W, rewards: &[f64]) -> Result<()> {
    write_rows(out, &EPISODE_HEADER, rewards.iter().enumerate())
}

pub fn write_curve(path: &Path, algo: Algo, seed: u64, curve: &[CurvePoint]) -> Result<()> {
    to_file(path, |b| curve_csv(b, algo, seed, curve))
}

pub fn write_continual_curve(
    path: &Path,
    algo: Algo,
    preset: &str,
    seed: u64,
    curve: &[CurvePoint],
) -> Result<()> {
    to_file(path, |b| continual_csv(b, algo, preset, seed, curve))
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    to_file(path, |b| trace_csv(b, rows))
}

pub fn write_episode_rewards(path: &Path, rewards: &[f64]) -> Result<()> {
    to_file(path, |b| episode_csv(b, rewards))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    to_file(path, |b| {
        serde_json::to_writer_pretty(&mut *b, value)?;
        b.push(b'\n');
        Ok(())
    })
}
