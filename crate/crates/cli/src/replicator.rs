use clap::Subcommand;
use evogame::games::{
    modify_game_2, modify_game_3, normalize_zero_diagonal, phi, theta3, GameMatrix, Reaction, SimplexPoint, UpdateRule,
};
use evogame::repelling::{build_repelling, CertifyOptions, RepellingClass};
use evogame::replicator::{
    edge_fixed_point, integrate_field, interior_equilibrium_3, invasion_margin, lv_lyapunov, side_equilibrium,
    to_lotka_volterra, Domain, StepControl,
};
use evogame::{presets, Error, Result};
use serde_json::json;

use crate::output::{emit, emit_json, parse_vector, Out};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    op: Op,
}

#[derive(clap::Args)]
struct GameArgs {
    /// Game: preset:NAME or a JSON/TOML file.
    #[arg(long)]
    game: String,
    /// Work on the weak-selection modified game of this update rule.
    #[arg(long)]
    update: Option<UpdateRule>,
    #[arg(long, default_value = "preset:paper-3d-nn")]
    constants: String,
}

impl GameArgs {
    fn load(&self) -> Result<GameMatrix> {
        let g = presets::game(&self.game)?;
        let Some(update) = self.update else { return Ok(g) };
        let c = presets::constants(&self.constants)?;
        match g.n() {
            2 => modify_game_2(&g, update, &c),
            _ => modify_game_3(&normalize_zero_diagonal(&g), theta3(update, &c)?),
        }
    }
}

#[derive(Subcommand)]
enum Op {
    /// Integrate the replicator equation (or a spatial reaction term) to CSV.
    Integrate {
        #[arg(long)]
        game: String,
        /// Initial frequencies, comma separated; the barycenter by default.
        #[arg(long)]
        u0: Option<String>,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        /// Reaction term: R (replicator), B (birth-death) or D (death-birth).
        #[arg(long, default_value = "R")]
        reaction: String,
        #[arg(long, default_value = "preset:paper-3d-nn")]
        constants: String,
        #[command(flatten)]
        out: Out,
    },
    /// Edge and interior equilibria with invasion margins.
    Equilibrium {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Lotka-Volterra reduction of a 3-strategy game and its Lyapunov weights.
    Lyapunov {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Build and certify a repelling function.
    Repelling {
        #[command(flatten)]
        game: GameArgs,
        /// 7.1, 7.2, 7.3 or acs.
        #[arg(long)]
        class: RepellingClass,
        #[arg(long, default_value_t = 400)]
        grid_n: usize,
        #[arg(long, default_value_t = 1e-6)]
        offset: f64,
        #[command(flatten)]
        out: Out,
    },
}

fn reaction(s: &str) -> Result<Reaction> {
    match s.to_ascii_uppercase().as_str() {
        "R" | "REPLICATOR" => Ok(Reaction::Replicator),
        "B" | "BD" => Ok(Reaction::BirthDeath),
        "D" | "DB" => Ok(Reaction::DeathBirth),
        _ => Err(Error::Invalid(format!("unknown reaction '{s}' (expected R, B or D)"))),
    }
}

fn equilibria(g: &GameMatrix) -> Result<serde_json::Value> {
    if g.n() == 2 {
        let (a, b, c, d) = g.abcd()?;
        return Ok(json!({ "edge": edge_fixed_point(b - d, c - a)? }));
    }
    let h = normalize_zero_diagonal(g);
    let mut edges = Vec::new();
    for k in 0..3 {
        let point = side_equilibrium(&h, k)?;
        edges.push(json!({
            "side": k + 1,
            "point": point.as_ref().map(|p| &p.0),
            "attracting": point.as_ref().map(|p| p.1.attracting),
            "invasion_margin": invasion_margin(&h, k)?,
        }));
    }
    let interior = match interior_equilibrium_3(&h) {
        Ok(p) => p.map(SimplexPoint::into_vec),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(json!({ "zero_diagonal": h.rows(), "edges": edges, "interior": interior }))
}

pub fn run(a: Args) -> Result<()> {
    match a.op {
        Op::Integrate { game, u0, t_max, reaction: kind, constants, out } => {
            let g = presets::game(&game)?;
            let kind = reaction(&kind)?;
            let c = presets::constants(&constants)?;
            let u0 = match u0 {
                Some(s) => SimplexPoint::new(parse_vector(&s)?)?,
                None => SimplexPoint::barycenter(g.n()),
            };
            if u0.as_slice().len() != g.n() {
                return Err(Error::Invalid("initial state and game differ in dimension".into()));
            }
            if !(t_max > 0.0) {
                return Err(Error::Invalid("t_max must be positive".into()));
            }
            let ctl = StepControl { stop_on_convergence: false, stop_on_boundary: false, ..StepControl::default() };
            let tr = integrate_field(
                |u, o| o.copy_from_slice(&phi(kind, &g, u, &c)),
                u0.as_slice(),
                t_max,
                Domain::Simplex,
                &ctl,
            )
            .map_err(Error::from)?;
            emit(out.out.as_deref(), |w| {
                let cols: Vec<String> = (1..=g.n()).map(|i| format!("u{i}")).collect();
                writeln!(w, "t,{}", cols.join(","))?;
                for (t, u) in tr.times.iter().zip(&tr.states) {
                    let vals: Vec<String> = u.iter().map(|x| x.to_string()).collect();
                    writeln!(w, "{t},{}", vals.join(","))?;
                }
                Ok(())
            })
        }
        Op::Equilibrium { game, out } => emit_json(out.out.as_deref(), "equilibrium", &equilibria(&game.load()?)?),
        Op::Lyapunov { game, out } => {
            let g = game.load()?;
            if g.n() != 3 {
                return Err(Error::Invalid("the planar reduction needs a 3-strategy game".into()));
            }
            let lv = to_lotka_volterra(&g);
            let coef = lv.planar()?;
            let fp = lv.fixed_point()?;
            let cert = fp.and_then(|(x, y)| lv_lyapunov(coef, x, y));
            emit_json(
                out.out.as_deref(),
                "lyapunov",
                &json!({ "lv": lv, "coefficients": coef, "fixed_point": fp, "certificate": cert }),
            )
        }
        Op::Repelling { game, class, grid_n, offset, out } => {
            let h = normalize_zero_diagonal(&game.load()?);
            let opts = CertifyOptions { grid_n, offset, ..CertifyOptions::default() };
            let report = match build_repelling(&h, class, &opts) {
                Ok(cert) => json!({ "certified": true, "certificate": cert }),
                Err(refusal) => json!({ "certified": false, "refusal": refusal, "reason": refusal.to_string() }),
            };
            emit_json(out.out.as_deref(), "repelling", &report)
        }
    }
}
