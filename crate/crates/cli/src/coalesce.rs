use clap::ValueEnum;
use evogame::coalescence::{
    chi_and_p01, check_identities, estimate_constants, estimate_pair_escape, kappa, triple_counts, IdentityInputs,
    TripleStart,
};
use evogame::{presets, Error, Result};
use serde_json::json;

use crate::output::{emit, emit_json, Out};

#[derive(Clone, Copy, ValueEnum)]
pub enum What {
    Kappa,
    Chi,
    Pair,
    TripleBd,
    TripleDb,
    Constants,
    Identities,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    what: What,
    #[arg(long, default_value = "preset:nn3d")]
    kernel: String,
    /// Monte Carlo samples per estimate.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Jump-chain steps before a walk counts as escaped.
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finest quadrature grid per axis for chi.
    #[arg(long, default_value_t = 256)]
    max_resolution: usize,
    /// Check the identities on these constants instead of fresh Monte Carlo.
    #[arg(long)]
    analytic: Option<String>,
    /// Emit the identity report as JSON instead of CSV.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: Out,
}

pub fn run(a: Args) -> Result<()> {
    let out = a.out.out.as_deref();
    let k = presets::kernel(&a.kernel)?;
    match a.what {
        What::Kappa => emit_json(out, "kappa", &json!({ "kappa": kappa(&k), "sigma2": k.sigma2() })),
        What::Chi => emit_json(out, "chi", &chi_and_p01(&k, a.max_resolution)?),
        What::Pair => emit_json(out, "pair", &estimate_pair_escape(&k, a.samples, a.horizon, a.seed)?),
        What::TripleBd | What::TripleDb => {
            let start = if matches!(a.what, What::TripleBd) { TripleStart::BirthDeath } else { TripleStart::DeathBirth };
            let c = triple_counts(&k, start, a.samples, a.horizon, a.seed)?;
            let report = json!({
                "start": start,
                "counts": c,
                "all_apart": c.p_all_apart(),
                "pair_without": ([0, 1, 2].map(|i| c.p_pair_without(i))),
                "pair_apart": ([0, 1, 2].map(|i| c.p_pair_apart(i))),
            });
            emit_json(out, "triple", &report)
        }
        What::Constants => {
            let p01 = chi_and_p01(&k, a.max_resolution)?.p01;
            emit_json(out, "constants", &estimate_constants(&k, p01, a.samples, a.horizon, a.seed)?)
        }
        What::Identities => {
            let inputs = match &a.analytic {
                Some(c) => IdentityInputs::from_constants(&presets::constants(c)?),
                None => IdentityInputs::monte_carlo(&k, a.samples, a.horizon, a.seed)?,
            };
            let checks = check_identities(&inputs);
            if a.json {
                emit_json(out, "identities", &checks)?;
            } else {
                emit(out, |w| {
                    writeln!(w, "identity,residual,tolerance,pass")?;
                    for c in &checks {
                        writeln!(w, "\"{}\",{:e},{:e},{}", c.name, c.residual, c.tolerance, c.pass)?;
                    }
                    Ok(())
                })?;
            }
            let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Numeric(format!("identities violated: {}", failed.join("; "))))
            }
        }
    }
}
