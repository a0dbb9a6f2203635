use std::io::Write;

use evogame::cancer::{analyze, build, CancerGameSpec, CaseReport, Family};
use evogame::replicator::interior_equilibrium_3;
use evogame::{presets, Error, Result};
use serde::Serialize;

use crate::output::{emit, emit_json, Out};
use crate::Spatial;

#[derive(clap::Args)]
pub struct Args {
    /// myeloma, chemical, glycolytic or stroma.
    #[arg(long)]
    family: Family,
    /// Parameters as name=value pairs; the family's preset when omitted.
    #[arg(long)]
    params: Option<String>,
    #[command(flatten)]
    spatial: Spatial,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: Out,
}

#[derive(Serialize)]
struct Report {
    spec: CancerGameSpec,
    game: Vec<Vec<f64>>,
    /// Interior rest point of the unmodified game.
    rho: Option<Vec<f64>>,
    analysis: CaseReport,
}

fn summary(r: &Report, w: &mut dyn Write) -> std::io::Result<()> {
    let a = &r.analysis;
    writeln!(w, "{} theta {:.6}", a.family, a.theta.unwrap_or(f64::NAN))?;
    let letters: Vec<String> = a.letters.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
    writeln!(w, "letters {}", letters.join(" "))?;
    writeln!(w, "case {}: {}", a.verdict.case, a.verdict.outcome)?;
    writeln!(w, "taxonomy {} ({:?})", a.taxonomy.label, a.verdict.proof_status)?;
    if let Some(rho) = &r.rho {
        let s: Vec<String> = rho.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(w, "rho ({})", s.join(", "))?;
    }
    for n in &a.notes {
        writeln!(w, "note: {n}")?;
    }
    Ok(())
}

pub fn run(a: Args) -> Result<()> {
    let spec = match &a.params {
        Some(p) => CancerGameSpec::parse(a.family, p)?,
        None => presets::cancer_spec(&format!("{}{}", presets::PREFIX, a.family))?,
    };
    let c = presets::constants(&a.spatial.constants)?;
    let g = build(&spec)?;
    let rho = match interior_equilibrium_3(&g) {
        Ok(p) => p.map(|p| p.into_vec()),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let report = Report { spec: spec.clone(), game: g.rows(), rho, analysis: analyze(&spec, a.spatial.update, &c)? };
    if a.json {
        emit_json(a.out.out.as_deref(), "cancer", &report)
    } else {
        emit(a.out.out.as_deref(), |w| summary(&report, w))
    }
}
