use evogame::cancer::{analyze, CaseReport};
use evogame::classifier::{PhaseVerdict2, Taxonomy3};
use evogame::coalescence::{check_identities, IdentityInputs};
use evogame::games::UpdateRule;
use evogame::presets::{self, Payload};
use evogame::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::classify::{classify, Report, Report2};
use crate::output::{Envelope, REPORT_VERSION};

#[derive(clap::Args)]
pub struct Args {
    /// Print passing checks too.
    #[arg(long)]
    verbose: bool,
}

/// Serialises a report, reads it back and checks the envelope and payload.
fn round_trip<T: Serialize, U: DeserializeOwned + Serialize>(kind: &str, report: &T, part: impl Fn(&T) -> &U) -> Result<()> {
    let text = serde_json::to_string(&Envelope::new(kind, report)).map_err(|e| Error::Numeric(e.to_string()))?;
    let back: Envelope<serde_json::Value> = serde_json::from_str(&text).map_err(|e| Error::Numeric(e.to_string()))?;
    if back.format != format!("evogame.{kind}") || back.version != REPORT_VERSION {
        return Err(Error::Numeric("report envelope does not round-trip".into()));
    }
    let original = serde_json::to_value(part(report)).map_err(|e| Error::Numeric(e.to_string()))?;
    let parsed: U = serde_json::from_value(original.clone()).map_err(|e| Error::Numeric(format!("{kind}: {e}")))?;
    let again = serde_json::to_value(&parsed).map_err(|e| Error::Numeric(e.to_string()))?;
    if again != original {
        return Err(Error::Numeric(format!("{kind} report changes on re-reading")));
    }
    Ok(())
}

fn check_game(name: &str) -> Result<()> {
    let g = presets::game(&format!("{}{name}", presets::PREFIX))?;
    let c = presets::constants("preset:paper-3d-nn")?;
    for update in [UpdateRule::BirthDeath, UpdateRule::DeathBirth] {
        match classify(&g, update, &c) {
            Ok(Report::Two(r)) => round_trip::<Report2, Option<PhaseVerdict2>>("classify", &r, |r| &r.verdict)?,
            Ok(r @ Report::Three(_)) => round_trip::<Report, Taxonomy3>("classify", &r, |r| match r {
                Report::Three(x) => &x.taxonomy,
                Report::Two(_) => unreachable!(),
            })?,
            // Presets sitting on a phase boundary are legitimate inputs.
            Err(Error::NonGeneric(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

pub fn run(a: Args) -> Result<()> {
    let mut invalid = 0;
    let mut numeric = 0;
    let mut report = |name: &str, r: Result<()>| match r {
        Ok(()) => {
            if a.verbose {
                println!("ok    {name}");
            }
        }
        Err(e) => {
            println!("FAIL  {name}: {e}");
            if matches!(e, Error::Numeric(_)) {
                numeric += 1;
            } else {
                invalid += 1;
            }
        }
    };
    for (name, r) in presets::validate_all() {
        report(&format!("preset {name}"), r);
    }
    let c = presets::constants("preset:paper-3d-nn")?;
    for p in presets::all() {
        match &p.payload {
            Payload::Game(_) => report(&format!("classify {}", p.name), check_game(p.name)),
            Payload::Cancer(spec) => {
                let r = analyze(spec, UpdateRule::DeathBirth, &c)
                    .and_then(|x| round_trip::<CaseReport, CaseReport>("cancer", &x, |x| x));
                report(&format!("cancer {}", p.name), r)
            }
            Payload::Constants(k) if k.kappa.is_finite() => {
                let failed: Vec<String> = check_identities(&IdentityInputs::from_constants(k))
                    .into_iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name)
                    .collect();
                let r = if failed.is_empty() {
                    Ok(())
                } else {
                    Err(Error::Numeric(format!("identities fail: {}", failed.join("; "))))
                };
                report(&format!("identities {}", p.name), r)
            }
            _ => {}
        }
    }
    println!("selftest: {invalid} invalid, {numeric} numeric failures");
    if numeric > 0 {
        Err(Error::Numeric(format!("{numeric} numeric checks failed")))
    } else if invalid > 0 {
        Err(Error::Invalid(format!("{invalid} checks failed")))
    } else {
        Ok(())
    }
}
