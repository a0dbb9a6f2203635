use std::io::Write;

use evogame::classifier::{
    classify2, classify3, Case2, GENERIC_TOL, favored_by_selection_n, impossible_case_guard, phase_region, sigma,
    tarnita_favored2, Favored, GuardReport, PhaseRegion, PhaseVerdict2, Taxonomy3,
};
use evogame::games::{modify_game_2, modify_game_3, normalize_zero_diagonal, theta, theta3, CoalescenceConstants, GameMatrix, UpdateRule};
use evogame::{presets, Error, Result};
use serde::Serialize;

use crate::figures::{sweep, write_sweep};
use crate::output::{emit, emit_json, parse_range, Out};
use crate::Spatial;

#[derive(clap::Args)]
pub struct Args {
    /// Game: preset:NAME or a JSON/TOML file. Omit for a grid sweep.
    #[arg(long)]
    game: Option<String>,
    #[command(flatten)]
    spatial: Spatial,
    /// Emit JSON instead of a short summary.
    #[arg(long)]
    json: bool,
    /// Sweep S over lo:hi:n (2-strategy grid mode).
    #[arg(long, requires = "t_grid", conflicts_with = "game", allow_hyphen_values = true)]
    s_grid: Option<String>,
    /// Sweep T over lo:hi:n.
    #[arg(long, requires = "s_grid", allow_hyphen_values = true)]
    t_grid: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[command(flatten)]
    out: Out,
}

#[derive(Serialize)]
pub struct Report2 {
    pub game: GameMatrix,
    pub update: UpdateRule,
    pub constants: CoalescenceConstants,
    pub theta: f64,
    pub modified: Vec<Vec<f64>>,
    pub case: Case2,
    pub equilibrium: Option<f64>,
    pub winner: Option<u8>,
    /// Absent when the game is bistable with its unstable point exactly at 1/2.
    pub verdict: Option<PhaseVerdict2>,
    pub phase_region: Option<PhaseRegion>,
    pub sigma: f64,
    pub tarnita_favored: bool,
    pub notes: Vec<String>,
}

/// Keeps a non-generic outcome as `None` with an explanatory note.
fn tolerate<T>(r: Result<T>, notes: &mut Vec<String>, what: &str) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonGeneric(m)) => {
            notes.push(format!("{what}: {m}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn report2(g: &GameMatrix, update: UpdateRule, c: &CoalescenceConstants) -> Result<Report2> {
    let (r, s, t, p) = g.abcd()?;
    let h = modify_game_2(g, update, c)?;
    let (a, b, gm, d) = h.abcd()?;
    if (b - d).abs() < GENERIC_TOL || (a - gm).abs() < GENERIC_TOL {
        return Err(Error::NonGeneric("modified game lies on a phase boundary".into()));
    }
    let case = match (b > d, a < gm) {
        (true, true) => Case2::S1,
        (false, false) => Case2::S2,
        (false, true) => Case2::S3,
        (true, false) => Case2::S4,
    };
    let equilibrium = matches!(case, Case2::S1 | Case2::S2).then(|| (b - d) / (b - d + gm - a));
    let mut notes = Vec::new();
    let verdict = tolerate(classify2(&h), &mut notes, "verdict")?;
    let phase_region = tolerate(phase_region(r, s, t, p, update, c), &mut notes, "phase region")?;
    if case == Case2::S2 && verdict.is_none() {
        notes.push("the strategies are risk-neutral under this rule; neither is expected to win".into());
    }
    Ok(Report2 {
        game: g.clone(),
        update,
        constants: *c,
        theta: theta(update, g, c)?,
        modified: h.rows(),
        case,
        equilibrium,
        winner: verdict.and_then(|v| v.winner),
        verdict,
        phase_region,
        sigma: sigma(update, c.kappa)?,
        tarnita_favored: tarnita_favored2(g, update, c.kappa)?,
        notes,
    })
}

#[derive(Serialize)]
pub struct Report3 {
    pub game: GameMatrix,
    pub update: UpdateRule,
    pub constants: CoalescenceConstants,
    pub taxonomy: Taxonomy3,
    pub favored: Favored,
    pub guard: GuardReport,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum Report {
    Two(Box<Report2>),
    Three(Box<Report3>),
}

pub fn classify(g: &GameMatrix, update: UpdateRule, c: &CoalescenceConstants) -> Result<Report> {
    match g.n() {
        2 => Ok(Report::Two(Box::new(report2(g, update, c)?))),
        _ => {
            let z = normalize_zero_diagonal(g);
            let h = modify_game_3(&z, theta3(update, c)?)?;
            Ok(Report::Three(Box::new(Report3 {
                game: g.clone(),
                update,
                constants: *c,
                taxonomy: classify3(&z, update, c)?,
                favored: favored_by_selection_n(g, update, c),
                guard: impossible_case_guard(&h)?,
            })))
        }
    }
}

fn fmt_point(u: &[f64]) -> String {
    let parts: Vec<String> = u.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn summary(r: &Report, w: &mut dyn Write) -> std::io::Result<()> {
    match r {
        Report::Two(r) => {
            writeln!(w, "update {}  theta {:.6}", r.update, r.theta)?;
            write!(w, "case {:?}", r.case)?;
            if let Some(v) = &r.verdict {
                write!(w, "  region {}", serde_json::to_value(v.region).unwrap_or_default())?;
            }
            writeln!(w)?;
            if let Some(u) = r.equilibrium {
                writeln!(w, "interior point u = {u:.6}")?;
            }
            if let Some(k) = r.winner {
                writeln!(w, "winner: strategy {k} ({})", r.game.labels()[k as usize - 1])?;
            }
            writeln!(w, "favoured by selection (sigma = {:.6}): {}", r.sigma, r.tarnita_favored)?;
            for n in &r.notes {
                writeln!(w, "note: {n}")?;
            }
            Ok(())
        }
        Report::Three(r) => {
            let t = &r.taxonomy;
            writeln!(w, "update {}  theta {:.6}", r.update, t.theta.unwrap_or(f64::NAN))?;
            writeln!(w, "label {}  ({:?})", t.label, t.proof_status)?;
            writeln!(w, "prediction {}", serde_json::to_string(&t.prediction).unwrap_or_default())?;
            if let Some(rho) = &t.interior_fp {
                writeln!(w, "interior point {}", fmt_point(rho))?;
            }
            if let Some(d) = t.delta {
                writeln!(w, "delta {d:.6}")?;
            }
            for n in &t.notes {
                writeln!(w, "note: {n}")?;
            }
            Ok(())
        }
    }
}

pub fn run(a: Args) -> Result<()> {
    let c = presets::constants(&a.spatial.constants)?;
    let out = a.out.out.as_deref();
    if let (Some(s), Some(t)) = (&a.s_grid, &a.t_grid) {
        let rows = sweep(a.spatial.update, &c, a.r, a.p, parse_range(s)?, parse_range(t)?);
        return emit(out, |w| write_sweep(w, &rows));
    }
    let reference = a.game.ok_or_else(|| Error::Invalid("either --game or --s-grid/--t-grid is required".into()))?;
    let g = presets::game(&reference)?;
    let report = classify(&g, a.spatial.update, &c)?;
    if a.json {
        emit_json(out, "classify", &report)
    } else {
        emit(out, |w| summary(&report, w))
    }
}
