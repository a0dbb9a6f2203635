use std::io::Write;

use clap::ValueEnum;
use evogame::classifier::{classify2_spatial, phase_region, Case2, Region2};
use evogame::games::{CoalescenceConstants, GameMatrix, UpdateRule};
use evogame::{presets, Error, Result};

use crate::output::{emit, linspace, parse_range, Out};

#[derive(Clone, Copy, ValueEnum)]
pub enum Which {
    /// Birth-death phase diagram.
    Fig2,
    /// Death-birth phase diagram.
    Fig3,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(value_enum)]
    which: Which,
    #[arg(long, default_value = "preset:paper-3d-nn")]
    constants: String,
    /// Override lambda = p2/p1 for fig2, keeping p(0|v1).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value = "-2:3:101", allow_hyphen_values = true)]
    s_grid: String,
    #[arg(long, default_value = "-1:4:101", allow_hyphen_values = true)]
    t_grid: String,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[command(flatten)]
    out: Out,
}

/// One grid point. Region fields are `None` on a phase boundary.
pub struct Row {
    pub s: f64,
    pub t: f64,
    pub case: Option<Case2>,
    pub region: Option<Region2>,
    pub ubar: Option<f64>,
    /// Region of the modified 2x2 game classified directly.
    pub direct: Option<Region2>,
}

pub fn sweep(
    update: UpdateRule,
    c: &CoalescenceConstants,
    r: f64,
    p: f64,
    (s0, s1, ns): (f64, f64, usize),
    (t0, t1, nt): (f64, f64, usize),
) -> Vec<Row> {
    let mut rows = Vec::with_capacity(ns * nt);
    for t in linspace(t0, t1, nt) {
        for s in linspace(s0, s1, ns) {
            let pr = phase_region(r, s, t, p, update, c).ok();
            let direct = GameMatrix::two(r, s, t, p)
                .and_then(|g| classify2_spatial(&g, update, c))
                .ok()
                .map(|v| v.region);
            rows.push(Row {
                s,
                t,
                case: pr.map(|x| x.verdict.case),
                region: pr.map(|x| x.verdict.region),
                ubar: pr.and_then(|x| x.verdict.equilibrium),
                direct,
            });
        }
    }
    rows
}

fn region_name(r: Option<Region2>) -> String {
    match r {
        Some(r) => serde_json::to_value(r).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        None => "boundary".into(),
    }
}

pub fn write_sweep(w: &mut dyn Write, rows: &[Row]) -> std::io::Result<()> {
    writeln!(w, "s,t,case,region,ubar,direct_region")?;
    for r in rows {
        let case = r.case.map(|c| format!("{c:?}")).unwrap_or_default();
        let ubar = r.ubar.map(|u| u.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{}", r.s, r.t, case, region_name(r.region), ubar, region_name(r.direct))?;
    }
    Ok(())
}

/// Constants with the given `lambda = p2 / p1` and the same `p(0|v1)`.
fn with_lambda(c: &CoalescenceConstants, lambda: f64) -> Result<CoalescenceConstants> {
    if !(lambda >= 0.0) {
        return Err(Error::Invalid("lambda must be nonnegative".into()));
    }
    let p1 = c.p01 / (1.0 + 2.0 * lambda);
    let mut out = *c;
    out.p1 = p1;
    out.p2 = lambda * p1;
    out.halfwidths = [0.0; 5];
    out.validate()?;
    Ok(out)
}

pub fn run(a: Args) -> Result<()> {
    let mut c = presets::constants(&a.constants)?;
    let update = match a.which {
        Which::Fig2 => UpdateRule::BirthDeath,
        Which::Fig3 => UpdateRule::DeathBirth,
    };
    if let Some(l) = a.lambda {
        if matches!(a.which, Which::Fig3) {
            return Err(Error::Invalid("--lambda applies to fig2 only".into()));
        }
        c = with_lambda(&c, l)?;
    }
    let rows = sweep(update, &c, a.r, a.p, parse_range(&a.s_grid)?, parse_range(&a.t_grid)?);
    emit(a.out.out.as_deref(), |w| write_sweep(w, &rows))
}
