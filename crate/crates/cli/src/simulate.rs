use std::path::PathBuf;

use evogame::lattice::{run_replicas, FrequencyTrace, Init, LatticeState};
use evogame::pde::{solve, wave_speed};
use evogame::{presets, Error, Result};
use serde_json::json;

use crate::output::{emit, emit_json};

#[derive(clap::Args)]
pub struct SimArgs {
    /// Lattice configuration: preset:NAME or a TOML/JSON file.
    #[arg(long)]
    config: String,
    /// Frequency trace CSV (replica mean when --replicas > 1); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Final state of the first replica.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Continue from a snapshot instead of the configured initial state.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// JSON summary: final and late-time mean frequencies.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn mean_trace(traces: &[FrequencyTrace]) -> FrequencyTrace {
    let k = traces.len() as f64;
    let first = &traces[0];
    let frequencies = (0..first.times.len())
        .map(|i| {
            let n = first.frequencies[i].len();
            (0..n).map(|j| traces.iter().map(|t| t.frequencies[i][j]).sum::<f64>() / k).collect()
        })
        .collect();
    FrequencyTrace { times: first.times.clone(), frequencies, blocks: None }
}

pub fn run_lattice(a: SimArgs) -> Result<()> {
    let mut cfg = presets::lattice_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.t_max {
        cfg.t_max = t;
    }
    if a.replicas == 0 {
        return Err(Error::Invalid("--replicas must be positive".into()));
    }
    let start = match &a.resume {
        Some(p) => {
            let s = LatticeState::read_snapshot(p)?;
            cfg.init = Init::File { path: p.clone() };
            Some((s.time, s.events))
        }
        None => None,
    };
    cfg.validate()?;
    let mut runs = run_replicas(&cfg, a.replicas)?;
    if let Some((t0, ev0)) = start {
        for r in &mut runs {
            r.trace.times.iter_mut().for_each(|t| *t += t0);
            r.state.time += t0;
            r.state.events += ev0;
        }
    }
    let traces: Vec<FrequencyTrace> = runs.iter().map(|r| r.trace.clone()).collect();
    let trace = if traces.len() == 1 { traces[0].clone() } else { mean_trace(&traces) };
    if let Some(p) = &a.snapshot {
        runs[0].state.write_snapshot(p)?;
    }
    emit(a.out.as_deref(), |w| trace.write_csv(w))?;
    if let Some(p) = &a.summary {
        let (t0, t1) = (trace.times[0], *trace.times.last().unwrap_or(&0.0));
        let late = trace.time_average(t0 + (t1 - t0) / 2.0, t1);
        let report = json!({
            "config": cfg,
            "replicas": a.replicas,
            "final": trace.final_frequencies(),
            "late_mean": late,
            "replica_final": traces.iter().map(|t| t.final_frequencies().to_vec()).collect::<Vec<_>>(),
            "events": runs.iter().map(|r| r.state.events).collect::<Vec<_>>(),
        });
        emit_json(Some(p), "simulate", &report)?;
    }
    Ok(())
}

#[derive(clap::Args)]
pub struct PdeArgs {
    /// PDE configuration: preset:NAME or a TOML/JSON file.
    #[arg(long)]
    config: String,
    /// Profiles CSV `t,x,u1..un`; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also fit the front speed and write it to this JSON file.
    #[arg(long)]
    speed: Option<PathBuf>,
    /// JSON summary of the run.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn run_pde(a: PdeArgs) -> Result<()> {
    let cfg = presets::pde_config(&a.config)?;
    let sol = solve(&cfg)?;
    emit(a.out.as_deref(), |w| sol.write_csv(w))?;
    if let Some(p) = &a.summary {
        let report = json!({
            "points": sol.points(),
            "steps": sol.steps,
            "widened": sol.widened,
            "converged": sol.converged,
            "max_mass_drift": sol.max_mass_drift,
            "final_front": sol.front.last().copied().flatten(),
        });
        emit_json(Some(p), "pde", &report)?;
    }
    if let Some(p) = &a.speed {
        emit_json(Some(p), "wave-speed", &wave_speed(&cfg)?)?;
    }
    Ok(())
}
