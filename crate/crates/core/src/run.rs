//! Driving a configured run: initial data, time stepping, diagnostics rows,
//! snapshots and the final report.

use std::collections::VecDeque;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::{AutoOr, RunConfig};
use crate::diagnostics::{diagnostics_row, flow_residual, summarize, write_csv, DiagnosticsRow, Summary};
use crate::error::{Error, Result};
use crate::solver::{auto_c1, initial_potential, read_snapshot, write_snapshot, Integrator, PotentialState, Snapshot,
    SplitMetricField};

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<DiagnosticsRow>,
    pub summary: Summary,
    pub final_state: PotentialState,
    pub snapshots: Vec<PathBuf>,
    pub steps: usize,
}

fn solver_failed(t: f64, e: Error) -> Error {
    match e {
        Error::SolverFailed { .. } => e,
        e @ (Error::NotPositive { .. } | Error::UnstableStep { .. } | Error::CannotSatisfyPositivity(_)) => {
            Error::SolverFailed { t, source: Box::new(e) }
        }
        other => other,
    }
}

/// Initial state of a run.
pub fn initial_state(cfg: &RunConfig) -> Result<PotentialState> {
    cfg.validate()?;
    let chart = cfg.chart()?;
    let params = cfg.params()?;
    let phi = initial_potential(&chart, &cfg.init_mode(), &params).map_err(|e| solver_failed(0.0, e))?;
    let c1 = match cfg.c1_policy {
        AutoOr::Value(c) => c,
        AutoOr::Auto => auto_c1(&chart, &phi, &params).map_err(|e| solver_failed(0.0, e))?,
    };
    PotentialState::new(chart, 0.0, phi, params, cfg.norm_mode, c1)
}

/// Times `k·dt` up to `t_end`, with the last one snapped onto `t_end`.
fn event_times(dt: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / dt + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            if (t - t_end).abs() <= 1e-9 * dt {
                t_end
            } else {
                t.min(t_end)
            }
        })
        .collect()
}

struct Pending {
    row: usize,
    samples: Vec<(f64, SplitMetricField)>,
    at: usize,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    run_observed(cfg, |_| {})
}

/// Like [`run`], calling `on_step` with the state at `t = 0` and after every step.
pub fn run_observed(cfg: &RunConfig, mut on_step: impl FnMut(&PotentialState)) -> Result<RunOutput> {
    let state = initial_state(cfg)?;
    let mut it = Integrator::new(state).map_err(|e| solver_failed(0.0, e))?;
    on_step(it.state());

    let diag_times = event_times(cfg.diag_dt, cfg.t_end);
    let snap_times = cfg.snapshot_dt.map(|d| event_times(d, cfg.t_end)).unwrap_or_default();
    let snap_dir = cfg.output.snapshot_dir.as_deref().filter(|_| !snap_times.is_empty());
    if let Some(dir) = snap_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rows = Vec::with_capacity(diag_times.len());
    let mut pending: Vec<Pending> = Vec::new();
    let mut hist: VecDeque<(f64, SplitMetricField)> = VecDeque::with_capacity(3);
    let mut snapshots = Vec::new();
    let (mut next_diag, mut next_snap, mut steps) = (0, 0, 0);
    hist.push_back((0.0, it.current().metric.clone()));

    loop {
        let t = it.state().t;
        if diag_times.get(next_diag) == Some(&t) {
            let ev = it.current();
            rows.push(diagnostics_row(it.state(), &ev.metric, &ev.rhs, cfg.stretch_tier)?);
            let n = hist.len();
            let samples: Vec<_> = hist.iter().skip(n.saturating_sub(2)).cloned().collect();
            let at = samples.len() - 1;
            pending.push(Pending { row: rows.len() - 1, samples, at });
            next_diag += 1;
        }
        if snap_times.get(next_snap) == Some(&t) {
            if let Some(dir) = snap_dir {
                let path = dir.join(format!("snapshot_{next_snap:05}.bin"));
                write_snapshot(&path, &Snapshot::from_state(it.state()))?;
                snapshots.push(path);
            }
            next_snap += 1;
        }
        if t >= cfg.t_end {
            break;
        }
        let target = [diag_times.get(next_diag), snap_times.get(next_snap), Some(&cfg.t_end)]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, |m, v| m.min(*v));
        let dt = it.stable_dt().min(cfg.dt_max);
        let rem = target - t;
        let t1 = if rem <= dt * (1.0 + 1e-6) {
            target
        } else if rem < 2.0 * dt {
            t + 0.5 * rem
        } else {
            t + dt
        };
        it.advance_to(t1).map_err(|e| solver_failed(t, e))?;
        steps += 1;
        on_step(it.state());

        if hist.len() == 3 {
            hist.pop_front();
        }
        hist.push_back((t1, it.current().metric.clone()));
        for p in pending.iter_mut() {
            p.samples.push((t1, it.current().metric.clone()));
        }
        for p in pending.iter().filter(|p| p.samples.len() == 3) {
            rows[p.row].flow_residual = Some(residual_of(&it, &p.samples, p.at)?);
        }
        pending.retain(|p| p.samples.len() < 3);
    }

    // rows too close to the end for a centered or forward difference
    for p in pending {
        if hist.len() == 3 && hist[2].0 == rows[p.row].t {
            let samples: Vec<_> = hist.iter().cloned().collect();
            rows[p.row].flow_residual = Some(residual_of(&it, &samples, 2)?);
        }
    }

    if let Some(path) = &cfg.output.csv_path {
        write_rows(path, &rows)?;
    }
    let summary = summarize(&rows)?;
    Ok(RunOutput {
        rows,
        summary,
        final_state: it.into_state(),
        snapshots,
        steps,
    })
}

fn residual_of(it: &Integrator, samples: &[(f64, SplitMetricField)], at: usize) -> Result<f64> {
    flow_residual(
        &it.state().chart,
        it.stencil(),
        [samples[0].0, samples[1].0, samples[2].0],
        [&samples[0].1, &samples[1].1, &samples[2].1],
        at,
    )
}

pub fn write_rows(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_csv(BufWriter::new(File::create(path)?), rows)
}

/// Recompute rows from snapshot files, ordered by time. The flow residual needs
/// closely spaced samples and is left empty.
pub fn diagnose_snapshots(paths: &[PathBuf], stretch: bool) -> Result<(Vec<DiagnosticsRow>, Summary)> {
    let mut states = Vec::with_capacity(paths.len());
    for p in paths {
        let snap = read_snapshot(p).map_err(|e| Error::Snapshot(format!("{}: {e}", p.display())))?;
        states.push(snap.to_state()?);
    }
    states.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut rows = Vec::with_capacity(states.len());
    for st in states {
        let t = st.t;
        let it = Integrator::new(st).map_err(|e| solver_failed(t, e))?;
        let ev = it.current();
        rows.push(diagnostics_row(it.state(), &ev.metric, &ev.rhs, stretch)?);
    }
    let summary = summarize(&rows)?;
    Ok((rows, summary))
}

/// Snapshot files (`*.bin`) in a directory.
pub fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    out.sort();
    Ok(out)
}
