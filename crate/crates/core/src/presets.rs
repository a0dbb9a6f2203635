//! Named games, kernels, constants and experiment configurations.
//!
//! Anything accepting a preset also accepts a path to a JSON or TOML file
//! holding the same payload. References are written `preset:NAME`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cancer::{build, CancerGameSpec, Family};
use crate::coalescence::Kernel;
use crate::error::{invalid, Error, Result};
use crate::games::{CoalescenceConstants, GameMatrix, Reaction, UpdateRule};
use crate::lattice::{Init, LatticeConfig};
use crate::pde::{Profile, RdeConfig};

pub const PREFIX: &str = "preset:";

/// Computed p(0|v1) for the 3-d nearest-neighbour walk.
pub const NN3D_P01: f64 = 0.659_462_670_5;
/// Monte Carlo triple probabilities for the 3-d nearest-neighbour walk,
/// 2e6 samples per start, horizon 1e4 jump-chain events.
pub const NN3D_P1: f64 = 0.29856;
pub const NN3D_PBAR1: f64 = 0.35547;
const NN3D_HALFWIDTHS: [f64; 5] = [0.0, 6.3e-4, 3.2e-4, 6.6e-4, 3.3e-4];

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Payload {
    Game(GameMatrix),
    Kernel(Kernel),
    Constants(CoalescenceConstants),
    Cancer(CancerGameSpec),
    Lattice(Box<LatticeConfig>),
    Pde(Box<RdeConfig>),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Game(_) => "game",
            Payload::Kernel(_) => "kernel",
            Payload::Constants(_) => "constants",
            Payload::Cancer(_) => "cancer",
            Payload::Lattice(_) => "lattice",
            Payload::Pde(_) => "pde",
        }
    }

    /// Re-runs the invariant checks of the payload's own type.
    pub fn validate(&self) -> Result<()> {
        match self {
            Payload::Game(g) => GameMatrix::new(g.rows()).map(drop),
            Payload::Kernel(k) => Kernel::new(k.d(), k.offsets().map(|(x, p)| (x.to_vec(), p)).collect()).map(drop),
            Payload::Constants(c) => c.validate(),
            Payload::Cancer(s) => build(s).map(drop),
            Payload::Lattice(c) => c.validate(),
            Payload::Pde(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub payload: Payload,
}

fn labelled(rows: Vec<Vec<f64>>, labels: &[&str]) -> GameMatrix {
    GameMatrix::new(rows)
        .and_then(|g| g.with_labels(labels.iter().map(|s| s.to_string()).collect()))
        .expect("preset game is valid")
}

fn gen33(a: [f64; 3], b: [f64; 3]) -> GameMatrix {
    GameMatrix::gen33(a, b).expect("preset game is valid")
}

/// Prisoner's dilemma `(b-c, -c; b, 0)`.
pub fn prisoners_dilemma(b: f64, c: f64) -> GameMatrix {
    labelled(vec![vec![b - c, -c], vec![b, 0.0]], &["C", "D"])
}

fn cancer(family: Family, params: &[(&str, f64)]) -> CancerGameSpec {
    CancerGameSpec::new(family, params).expect("preset parameters are valid")
}

fn lattice_3d(game: GameMatrix, update: UpdateRule, u: Vec<f64>, seed: u64) -> LatticeConfig {
    LatticeConfig {
        d: 3,
        l: 24,
        kernel: Kernel::nearest_neighbor(3),
        w: 0.01,
        update,
        game,
        init: Init::Product { u },
        seed,
        t_max: 1e4,
        sample_every: 100.0,
        block_side: None,
    }
}

fn front(game: GameMatrix, reaction: Reaction) -> RdeConfig {
    RdeConfig {
        reaction,
        game,
        constants: nn3d_constants(),
        sigma2: 1.0,
        length: 60.0,
        dx: 0.1,
        dt: 0.004,
        t_max: 60.0,
        initial: Profile::Step { left: vec![1.0, 0.0], right: vec![0.0, 1.0], at: 30.0 },
        sample_every: Some(0.5),
        auto_widen: true,
        settle_tol: 1e-8,
    }
}

fn nn3d_constants() -> CoalescenceConstants {
    let mut c = CoalescenceConstants::from_triples(6.0, NN3D_P01, NN3D_P1, NN3D_PBAR1).expect("valid");
    c.halfwidths = NN3D_HALFWIDTHS;
    c
}

/// Every preset, in a fixed order.
pub fn all() -> Vec<Preset> {
    let p = |name, description, payload| Preset { name, description, payload };
    let kappa = 6.0;
    vec![
        p("pd", "prisoner's dilemma, b=2, c=1", Payload::Game(prisoners_dilemma(2.0, 1.0))),
        p("pd-2kappa", "prisoner's dilemma with b/c = 2 kappa for the 3-d lattice", Payload::Game(prisoners_dilemma(2.0 * kappa, 1.0))),
        p("pd-half-kappa", "prisoner's dilemma with b/c = kappa/2 for the 3-d lattice", Payload::Game(prisoners_dilemma(kappa / 2.0, 1.0))),
        p("snowdrift", "snowdrift (b-c/2, b-c; b, 0), b=2, c=1", Payload::Game(labelled(vec![vec![1.5, 1.0], vec![2.0, 0.0]], &["C", "D"]))),
        p("hawk-dove", "hawk-dove (1-beta, 2; 0, 1) with beta=2.2", Payload::Game(labelled(vec![vec![-1.2, 2.0], vec![0.0, 1.0]], &["Hawk", "Dove"]))),
        p("stag-hunt", "stag hunt (3, 0; 2, 1)", Payload::Game(labelled(vec![vec![3.0, 0.0], vec![2.0, 1.0]], &["Stag", "Hare"]))),
        p("stag-hunt-rd", "stag hunt (5, 0; 3, 1), stag risk dominant", Payload::Game(labelled(vec![vec![5.0, 0.0], vec![3.0, 1.0]], &["Stag", "Hare"]))),
        p("rps", "standard rock-paper-scissors", Payload::Game(labelled(
            vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]],
            &["R", "P", "S"],
        ))),
        p("ex7.1", "three attracting, invadable edges", Payload::Game(gen33([1.0; 3], [1.0; 3]))),
        p("ex7.2", "two attracting invadable edges and a dominance edge", Payload::Game(gen33([2.0, 1.0, 1.0], [1.0, 1.0, -0.5]))),
        p("ex7.3", "one attracting invadable edge", Payload::Game(gen33([-0.5, 1.0, -0.5], [1.0, 1.0, 2.0]))),
        p("acs", "almost constant sum", Payload::Game(gen33([1.0, 1.0, 1.0], [1.0, 1.2, 0.9]))),
        p("unstable-edge", "side u1 = 0 carries an unstable mixed point", Payload::Game(gen33([-1.0, 1.0, 1.0], [-1.0, 1.0, 1.0]))),
        p("nn1d", "nearest neighbours on Z", Payload::Kernel(Kernel::nearest_neighbor(1))),
        p("nn2d", "nearest neighbours on Z^2", Payload::Kernel(Kernel::nearest_neighbor(2))),
        p("nn3d", "nearest neighbours on Z^3", Payload::Kernel(Kernel::nearest_neighbor(3))),
        p("moore2d", "Moore neighbourhood on Z^2", Payload::Kernel(Kernel::moore(2))),
        p("moore3d", "Moore neighbourhood on Z^3", Payload::Kernel(Kernel::moore(3))),
        p("paper-3d-nn", "published 3-d nearest-neighbour values", Payload::Constants(
            CoalescenceConstants::from_triples(6.0, 0.6404566, 0.325, 0.345).expect("valid"),
        )),
        p("nn3d-computed", "computed 3-d nearest-neighbour values", Payload::Constants(nn3d_constants())),
        p("mean-field", "no coalescence: the replicator equation", Payload::Constants(CoalescenceConstants::mean_field())),
        p("myeloma", "multiple myeloma, OC/OB/MM", Payload::Cancer(cancer(
            Family::Myeloma,
            &[("a", 1.0), ("b", 1.0), ("c", 2.0), ("d", 1.0), ("e", 1.0)],
        ))),
        p("chemical", "chemical competition, P/R/S", Payload::Cancer(cancer(
            Family::Chemical,
            &[("e", 1.0), ("f", 4.0), ("g", 2.0), ("h", 1.0)],
        ))),
        p("glycolytic", "glycolytic phenotype, AG/INV/GLY", Payload::Cancer(cancer(
            Family::Glycolytic,
            &[("c", 0.2), ("k", 0.15), ("n", 0.8)],
        ))),
        p("stroma", "tumour-stroma, S/D/I", Payload::Cancer(cancer(
            Family::Stroma,
            &[("alpha", 0.3), ("beta", 0.2), ("gamma", 0.4), ("rho", 0.5)],
        ))),
        p("lattice-ex7.1", "three-strategy coexistence on the 24^3 torus, BD", Payload::Lattice(Box::new(lattice_3d(
            gen33([1.0; 3], [1.0; 3]),
            UpdateRule::BirthDeath,
            vec![0.5, 0.3, 0.2],
            1,
        )))),
        p("lattice-pd-2kappa", "DB prisoner's dilemma with b/c = 2 kappa on the 24^3 torus", Payload::Lattice(Box::new(lattice_3d(
            prisoners_dilemma(2.0 * kappa, 1.0),
            UpdateRule::DeathBirth,
            vec![0.5, 0.5],
            1,
        )))),
        p("lattice-pd-half-kappa", "DB prisoner's dilemma with b/c = kappa/2 on the 24^3 torus", Payload::Lattice(Box::new(lattice_3d(
            prisoners_dilemma(kappa / 2.0, 1.0),
            UpdateRule::DeathBirth,
            vec![0.5, 0.5],
            1,
        )))),
        p("front-stag-hunt", "BD travelling front for the stag hunt", Payload::Pde(Box::new(front(
            labelled(vec![vec![3.0, 0.0], vec![2.0, 1.0]], &["Stag", "Hare"]),
            Reaction::BirthDeath,
        )))),
        p("front-cubic", "replicator front with reaction u(1-u)(u-1/4)", Payload::Pde(Box::new(RdeConfig {
            constants: CoalescenceConstants::mean_field(),
            ..front(GameMatrix::new(vec![vec![0.0, -0.25], vec![-0.75, 0.0]]).expect("valid"), Reaction::Replicator)
        }))),
    ]
}

/// Preset name of a reference: `preset:NAME`, or a bare known name that is not an existing file.
fn strip(reference: &str) -> Option<&str> {
    reference.strip_prefix(PREFIX).or_else(|| {
        (!Path::new(reference).exists() && all().iter().any(|p| p.name == reference)).then_some(reference)
    })
}

/// Looks a preset up by bare name.
pub fn find(name: &str) -> Result<Preset> {
    all().into_iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = all().iter().map(|p| p.name).collect();
        Error::Invalid(format!("unknown preset '{name}' (known: {})", names.join(", ")))
    })
}

/// Reads JSON or TOML depending on the extension.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            let raw: toml::Value =
                toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            let resolved = resolve_references(raw)?;
            resolved
                .try_into()
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
        }
        _ => serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display()))),
    }
}

macro_rules! resolver {
    ($fn:ident, $ty:ty, $what:literal, $($pat:pat => $val:expr),+) => {
        #[doc = concat!("Resolves `preset:NAME`, a bare preset name or a file path to a ", $what, ".")]
        pub fn $fn(reference: &str) -> Result<$ty> {
            match strip(reference) {
                Some(name) => match find(name)?.payload {
                    $($pat => $val,)+
                    other => invalid(format!("preset '{name}' is a {}, not a {}", other.kind(), $what)),
                },
                None => read_file(Path::new(reference)),
            }
        }
    };
}

resolver!(game, GameMatrix, "game", Payload::Game(g) => Ok(g), Payload::Cancer(s) => build(&s));
resolver!(kernel, Kernel, "kernel", Payload::Kernel(k) => Ok(k));
resolver!(constants, CoalescenceConstants, "constants", Payload::Constants(c) => Ok(c));
resolver!(cancer_spec, CancerGameSpec, "cancer", Payload::Cancer(s) => Ok(s));
resolver!(lattice_config, LatticeConfig, "lattice", Payload::Lattice(c) => Ok(*c));
resolver!(pde_config, RdeConfig, "pde", Payload::Pde(c) => Ok(*c));

fn to_toml<T: Serialize>(v: &T) -> Result<toml::Value> {
    toml::Value::try_from(v).map_err(|e| Error::Invalid(format!("cannot embed preset: {e}")))
}

/// Replaces `game`, `kernel` and `constants` strings of the form
/// `preset:NAME` inside a configuration table by the preset's payload.
pub fn resolve_references(mut v: toml::Value) -> Result<toml::Value> {
    if let toml::Value::Table(t) = &mut v {
        for key in ["game", "kernel", "constants"] {
            let Some(toml::Value::String(s)) = t.get(key) else { continue };
            if strip(s).is_none() {
                continue;
            }
            let value = match key {
                "game" => to_toml(&game(s)?)?,
                "kernel" => to_toml(&kernel(s)?)?,
                _ => to_toml(&constants(s)?)?,
            };
            t.insert(key.to_string(), value);
        }
    }
    Ok(v)
}

/// Checks name uniqueness and validates every payload.
pub fn validate_all() -> Vec<(String, Result<()>)> {
    let mut seen = BTreeSet::new();
    all()
        .into_iter()
        .map(|p| {
            let r = if seen.insert(p.name) { p.payload.validate() } else { invalid("duplicate preset name") };
            (p.name.to_string(), r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for (name, r) in validate_all() {
            assert!(r.is_ok(), "{name}: {r:?}");
        }
    }

    #[test]
    fn kinds_are_checked() {
        assert!(game("preset:stag-hunt").is_ok());
        assert!(game("preset:nn3d").is_err());
        assert!(game("preset:nope").is_err());
        assert_eq!(game("preset:myeloma").unwrap().n(), 3);
    }

    #[test]
    fn toml_references_expand() {
        let raw: toml::Value = toml::from_str("game = \"preset:pd\"\nw = 0.1").unwrap();
        let v = resolve_references(raw).unwrap();
        let g: GameMatrix = v.get("game").unwrap().clone().try_into().unwrap();
        assert_eq!(g, prisoners_dilemma(2.0, 1.0));
    }
}
