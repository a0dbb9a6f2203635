//! Three-strategy cancer games: multiple myeloma, chemical competition,
//! glycolytic phenotype and tumour-stroma interactions.
//!
//! Each family has a raw payoff table, a zero-diagonal form, a lettered
//! generalisation that absorbs the weak-selection shift, and a case table
//! read off the signs of the letters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{classify_modified, Label3, ProofStatus, Taxonomy3, GENERIC_TOL};
use crate::error::{invalid, Error, Result};
use crate::games::{modify_game_3, theta3, CoalescenceConstants, GameMatrix, SimplexPoint, UpdateRule};
use crate::replicator::invasion_margin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Myeloma,
    Chemical,
    Glycolytic,
    Stroma,
}

impl Family {
    pub fn strategies(self) -> [&'static str; 3] {
        match self {
            Family::Myeloma => ["OC", "OB", "MM"],
            Family::Chemical => ["P", "R", "S"],
            Family::Glycolytic => ["AG", "INV", "GLY"],
            Family::Stroma => ["S", "D", "I"],
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Family::Myeloma => &["a", "b", "c", "d", "e"],
            Family::Chemical => &["e", "f", "g", "h"],
            Family::Glycolytic => &["c", "k", "n"],
            Family::Stroma => &["alpha", "beta", "gamma", "rho"],
        }
    }

    fn optional(self) -> &'static [&'static str] {
        match self {
            Family::Chemical => &["z"],
            _ => &[],
        }
    }

    /// Letter names of the generalised table.
    pub fn letters(self) -> &'static [&'static str] {
        match self {
            Family::Myeloma => &["A", "B", "C", "D", "E", "F"],
            Family::Chemical => &["a", "b", "c", "d"],
            Family::Glycolytic => &["a", "b", "d", "e", "f"],
            Family::Stroma => &["a", "b", "c", "d", "e"],
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "myeloma" => Ok(Family::Myeloma),
            "chemical" => Ok(Family::Chemical),
            "glycolytic" => Ok(Family::Glycolytic),
            "stroma" => Ok(Family::Stroma),
            _ => invalid(format!("unknown cancer family '{s}'")),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Myeloma => "myeloma",
            Family::Chemical => "chemical",
            Family::Glycolytic => "glycolytic",
            Family::Stroma => "stroma",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancerGameSpec {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
}

impl CancerGameSpec {
    pub fn new(family: Family, params: &[(&str, f64)]) -> Result<Self> {
        let spec = CancerGameSpec {
            family,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses `name=value` pairs separated by commas.
    pub fn parse(family: Family, text: &str) -> Result<Self> {
        let mut params = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("expected name=value, got '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("parameter {k} is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        let spec = CancerGameSpec { family, params };
        spec.validate()?;
        Ok(spec)
    }

    fn get(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.family;
        for name in fam.required() {
            match self.params.get(*name) {
                None => return invalid(format!("{fam} needs parameter '{name}'")),
                Some(v) if !v.is_finite() => return invalid(format!("parameter '{name}' is not finite")),
                _ => {}
            }
        }
        for name in self.params.keys() {
            if !fam.required().contains(&name.as_str()) && !fam.optional().contains(&name.as_str()) {
                return invalid(format!("{fam} has no parameter '{name}'"));
            }
        }
        let p = |n| self.get(n);
        match fam {
            Family::Myeloma => {
                if ["a", "b", "c", "d", "e"].iter().any(|n| p(n) <= 0.0) {
                    return invalid("myeloma parameters a..e must be positive");
                }
            }
            Family::Chemical => {
                if !(p("g") > p("e")) || !(p("h") > 0.0) {
                    return invalid("chemical game needs g > e and h > 0");
                }
            }
            Family::Glycolytic => {
                if !(p("c") < 0.5) {
                    return invalid("glycolytic game needs c < 1/2");
                }
            }
            Family::Stroma => {
                if !(p("beta") < 1.0) || !(p("gamma") < 1.0) {
                    return invalid("stroma game needs beta < 1 and gamma < 1");
                }
            }
        }
        Ok(())
    }
}

fn labelled(fam: Family, rows: Vec<Vec<f64>>) -> Result<GameMatrix> {
    GameMatrix::new(rows)?.with_labels(fam.strategies().iter().map(|s| s.to_string()).collect())
}

/// The payoff table before normalising the diagonal.
pub fn raw_game(spec: &CancerGameSpec) -> Result<GameMatrix> {
    spec.validate()?;
    let p = |n| spec.get(n);
    let rows = match spec.family {
        Family::Myeloma => vec![
            vec![0.0, p("a"), p("b")],
            vec![p("e"), 0.0, -p("d")],
            vec![p("c"), 0.0, 0.0],
        ],
        Family::Chemical => {
            let (z, e, f, g, h) = (p("z"), p("e"), p("f"), p("g"), p("h"));
            vec![
                vec![z - e - f + g, z - e, z - e + g],
                vec![z - h, z - h, z - h],
                vec![z - f, z, z],
            ]
        }
        Family::Glycolytic => {
            let (c, k, n) = (p("c"), p("k"), p("n"));
            vec![
                vec![0.5, 1.0, 0.5 - n],
                vec![1.0 - c, 1.0 - c / 2.0, 1.0 - c],
                vec![0.5 + n - k, 1.0 - k, 0.5 - k],
            ]
        }
        Family::Stroma => {
            let (al, be, ga, rh) = (p("alpha"), p("beta"), p("gamma"), p("rho"));
            vec![
                vec![0.0, al, 0.0],
                vec![1.0 + al - be, 1.0 - 2.0 * be, 1.0 - be + rh],
                vec![1.0 - ga, 1.0 - ga, 1.0 - ga],
            ]
        }
    };
    labelled(spec.family, rows)
}

/// Zero-diagonal game of the family.
pub fn build(spec: &CancerGameSpec) -> Result<GameMatrix> {
    spec.validate()?;
    let p = |n| spec.get(n);
    let rows = match spec.family {
        Family::Myeloma => return raw_game(spec),
        Family::Chemical => {
            let (e, f, g, h) = (p("e"), p("f"), p("g"), p("h"));
            vec![
                vec![0.0, h - e, g - e],
                vec![e + f - g - h, 0.0, -h],
                vec![e - g, h, 0.0],
            ]
        }
        Family::Glycolytic => {
            let (c, k, n) = (p("c"), p("k"), p("n"));
            vec![
                vec![0.0, c / 2.0, k - n],
                vec![0.5 - c, 0.0, 0.5 - c + k],
                vec![n - k, c / 2.0 - k, 0.0],
            ]
        }
        Family::Stroma => {
            let (al, be, ga, rh) = (p("alpha"), p("beta"), p("gamma"), p("rho"));
            vec![
                vec![0.0, al + 2.0 * be - 1.0, ga - 1.0],
                vec![1.0 + al - be, 0.0, ga + rh - be],
                vec![1.0 - ga, 2.0 * be - ga, 0.0],
            ]
        }
    };
    labelled(spec.family, rows)
}

pub type Letters = BTreeMap<String, f64>;

/// Letters of the generalised table for the shift `theta`.
pub fn letters(spec: &CancerGameSpec, theta: f64) -> Result<Letters> {
    spec.validate()?;
    let p = |n| spec.get(n);
    let t = theta;
    let m = |x: f64, y: f64| (1.0 + t) * x - t * y;
    let vals: Vec<f64> = match spec.family {
        Family::Myeloma => {
            let (a, b, c, d, e) = (p("a"), p("b"), p("c"), p("d"), p("e"));
            vec![m(a, e), m(b, c), m(c, b), (1.0 + t) * d, m(e, a), t * d]
        }
        Family::Chemical => {
            let (e, f, g, h) = (p("e"), p("f"), p("g"), p("h"));
            let (x, y) = (h - e, e - h + f - g);
            vec![m(x, y), m(y, x), (1.0 + 2.0 * t) * (g - e), (1.0 + 2.0 * t) * h]
        }
        Family::Glycolytic => {
            let (c, k, n) = (p("c"), p("k"), p("n"));
            let (x12, x21) = (c / 2.0, 0.5 - c);
            let (x23, x32) = (0.5 - c + k, c / 2.0 - k);
            vec![m(x12, x21), m(x21, x12), (1.0 + 2.0 * t) * (k - n), m(x23, x32), m(x32, x23)]
        }
        Family::Stroma => {
            let (al, be, ga, rh) = (p("alpha"), p("beta"), p("gamma"), p("rho"));
            let (x12, x21) = (al + 2.0 * be - 1.0, 1.0 + al - be);
            let (x23, x32) = (ga + rh - be, 2.0 * be - ga);
            vec![m(x12, x21), m(x21, x12), (1.0 + 2.0 * t) * (1.0 - ga), m(x23, x32), m(x32, x23)]
        }
    };
    Ok(spec.family.letters().iter().map(|s| s.to_string()).zip(vals).collect())
}

fn letter(l: &Letters, name: &str) -> Result<f64> {
    l.get(name).copied().ok_or_else(|| Error::Invalid(format!("missing letter '{name}'")))
}

/// The generalised table filled with `letters`.
pub fn letter_matrix(family: Family, l: &Letters) -> Result<GameMatrix> {
    let g = |n| letter(l, n);
    let rows = match family {
        Family::Myeloma => vec![
            vec![0.0, g("A")?, g("B")?],
            vec![g("E")?, 0.0, -g("D")?],
            vec![g("C")?, g("F")?, 0.0],
        ],
        Family::Chemical => vec![
            vec![0.0, g("a")?, g("c")?],
            vec![g("b")?, 0.0, -g("d")?],
            vec![-g("c")?, g("d")?, 0.0],
        ],
        Family::Glycolytic => vec![
            vec![0.0, g("a")?, g("d")?],
            vec![g("b")?, 0.0, g("e")?],
            vec![-g("d")?, g("f")?, 0.0],
        ],
        Family::Stroma => vec![
            vec![0.0, g("a")?, -g("c")?],
            vec![g("b")?, 0.0, g("d")?],
            vec![g("c")?, g("e")?, 0.0],
        ],
    };
    labelled(family, rows)
}

/// Case of the family's table, with what the case says should happen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub case: String,
    /// Taxonomy label the case corresponds to, when the case table names one.
    pub expected_label: Option<Label3>,
    pub outcome: String,
    pub proof_status: ProofStatus,
}

fn verdict(case: &str, label: Option<Label3>, outcome: &str, status: ProofStatus) -> CaseVerdict {
    CaseVerdict {
        case: case.into(),
        expected_label: label,
        outcome: outcome.into(),
        proof_status: status,
    }
}

fn sign(x: f64, name: &str) -> Result<bool> {
    if x.abs() < GENERIC_TOL {
        Err(Error::NonGeneric(format!("{name} vanishes")))
    } else {
        Ok(x > 0.0)
    }
}

/// Does the strategy opposite side `k` invade the attracting point there?
fn invades(h: &GameMatrix, k: usize) -> Result<bool> {
    match invasion_margin(h, k)? {
        Some(m) => sign(m, "an invasion margin"),
        None => Err(Error::Invalid("side has no mixed equilibrium".into())),
    }
}

/// Reads the case table of a family off its letters.
pub fn case_of(family: Family, l: &Letters) -> Result<CaseVerdict> {
    use Label3::*;
    use ProofStatus::*;
    let h = letter_matrix(family, l)?;
    let g = |n| letter(l, n);
    match family {
        Family::Myeloma => {
            let (a, b, c, e) = (sign(g("A")?, "A")?, sign(g("B")?, "B")?, sign(g("C")?, "C")?, sign(g("E")?, "E")?);
            if !(g("D")? > 0.0 && g("F")? >= 0.0) {
                return Ok(verdict("other", None, "outside the case table (needs D > 0, F >= 0)", Open));
            }
            if (!a && !e) || (!b && !c) {
                return Ok(verdict("other", None, "an edge with an unstable mixed point; not in the case table", Open));
            }
            // x1 is the OC,OB point (side 3), x2 the OC,MM point (side 2).
            if !b {
                return Ok(if a && e {
                    if invades(&h, 2)? {
                        verdict("6B", Some(L7_3A), "MM takes over", Conjectured)
                    } else {
                        verdict("6B", Some(L7_3B), "interior saddle, bistable", Conjectured)
                    }
                } else {
                    verdict("6B", Some(L7_4A), "MM takes over", Conjectured)
                });
            }
            if !c {
                return Ok(if !a {
                    verdict("7A", Some(L7_4), "rock-paper-scissors; coexistence expected when Delta > 0", Conjectured)
                } else if !e {
                    verdict("7B", Some(L7_4A), "OC takes over", Conjectured)
                } else if invades(&h, 2)? {
                    verdict("6A", Some(L7_3), "coexistence", Proved)
                } else {
                    verdict("6A'", Some(L7_3D), "MM dies out", Conjectured)
                });
            }
            if !a {
                return Ok(if invades(&h, 1)? {
                    verdict("5A", Some(L7_3), "coexistence", Proved)
                } else {
                    verdict("5A'", Some(L7_3D), "OB dies out", Conjectured)
                });
            }
            if !e {
                return Ok(verdict("5B", Some(L7_3C), "OB dies out; replicator converges to x2", Conjectured));
            }
            Ok(match (invades(&h, 2)?, invades(&h, 1)?) {
                (true, false) => verdict("1", Some(L7_2A), "replicator converges to x2, the point that cannot be invaded", OdeProved),
                (false, false) => verdict("2", Some(L7_2B), "interior saddle, bistable", Conjectured),
                (false, true) => verdict("3", Some(L7_2A), "replicator converges to x1, the point that cannot be invaded", OdeProved),
                (true, true) => verdict("4", Some(L7_2), "coexistence", Proved),
            })
        }
        Family::Chemical => {
            if !(g("c")? > 0.0 && g("d")? > 0.0) {
                return Ok(verdict("other", None, "outside the case table (needs c, d > 0)", Open));
            }
            Ok(match (sign(g("a")?, "a")?, sign(g("b")?, "b")?) {
                (true, false) => verdict("1", Some(L7_4A), "P takes over", Conjectured),
                (false, true) => {
                    verdict("2", Some(L7_4), "rock-paper-scissors; coexistence expected when Delta > 0", Conjectured)
                }
                (true, true) if invades(&h, 2)? => verdict("3A", Some(L7_3), "coexistence", Proved),
                (true, true) => verdict("3B", Some(L7_3D), "S dies out", Conjectured),
                (false, false) if invades(&h, 2)? => {
                    verdict("4A", Some(L7_2B), "unstable P,R point; no interior equilibrium", Conjectured)
                }
                (false, false) => verdict("4B", Some(L7_2B), "unstable interior equilibrium; P expected to win", Conjectured),
            })
        }
        Family::Glycolytic => {
            let (a, b, d, e, f) =
                (sign(g("a")?, "a")?, sign(g("b")?, "b")?, sign(g("d")?, "d")?, sign(g("e")?, "e")?, sign(g("f")?, "f")?);
            let ag_inv = a && b;
            let inv_gly = e && f;
            Ok(if ag_inv && inv_gly && invades(&h, 2)? && invades(&h, 0)? {
                verdict("1", Some(L7_2), "coexistence", Proved)
            } else if ag_inv && e && !f && !d && invades(&h, 2)? {
                verdict("2", Some(L7_3), "coexistence", Proved)
            } else if !a && b && d && inv_gly && invades(&h, 0)? {
                verdict("3A", Some(L7_3), "coexistence", Proved)
            } else if a && !b && !d && inv_gly && invades(&h, 0)? {
                verdict("3B", Some(L7_3), "coexistence", Proved)
            } else if a && !b && e && !f && !d {
                verdict("4", Some(L7_4), "rock-paper-scissors; coexistence expected when Delta > 0", Conjectured)
            } else {
                verdict("other", None, "not in the case table", Open)
            })
        }
        Family::Stroma => {
            if !(g("c")? > 0.0) {
                return Ok(verdict("other", None, "outside the case table (needs c > 0)", Open));
            }
            let (a, b, d, e) = (sign(g("a")?, "a")?, sign(g("b")?, "b")?, sign(g("d")?, "d")?, sign(g("e")?, "e")?);
            Ok(if a && b && d && e && invades(&h, 2)? && invades(&h, 0)? {
                verdict("1", Some(L7_2), "coexistence", Proved)
            } else if a && b && d && !e && invades(&h, 2)? {
                verdict("2", Some(L7_3), "coexistence", Proved)
            } else if a && !b && d && e && invades(&h, 0)? {
                verdict("3", Some(L7_3), "coexistence", Proved)
            } else {
                verdict("other", None, "not in the case table", Open)
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub family: Family,
    pub theta: Option<f64>,
    pub letters: Letters,
    pub verdict: CaseVerdict,
    pub taxonomy: Taxonomy3,
    pub notes: Vec<String>,
}

/// Case analysis of the modified game under the given update rule.
pub fn analyze(spec: &CancerGameSpec, update: UpdateRule, c: &CoalescenceConstants) -> Result<CaseReport> {
    let theta = theta3(update, c)?;
    analyze_with_theta(spec, theta)
}

pub fn analyze_with_theta(spec: &CancerGameSpec, theta: f64) -> Result<CaseReport> {
    let l = letters(spec, theta)?;
    let from_letters = letter_matrix(spec.family, &l)?;
    let direct = modify_game_3(&build(spec)?, theta)?;
    let gap = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (from_letters.get(i, j) - direct.get(i, j)).abs())
        .fold(0.0, f64::max);
    if gap > 1e-12 * (1.0 + direct.max_abs()) {
        return Err(Error::Numeric(format!("letter table disagrees with the modified game by {gap:e}")));
    }
    let mut report = analyze_letters(spec.family, &l)?;
    report.theta = Some(theta);
    report.taxonomy.theta = Some(theta);
    Ok(report)
}

/// Case analysis straight from letters.
pub fn analyze_letters(family: Family, l: &Letters) -> Result<CaseReport> {
    let h = letter_matrix(family, l)?;
    let verdict = case_of(family, l)?;
    let taxonomy = classify_modified(&h, None)?;
    let mut notes = Vec::new();
    match verdict.expected_label {
        Some(_) if taxonomy.label == Label3::NonGeneric => {
            notes.push("taxonomy is non-generic (a weak dominance); case table used alone".into())
        }
        Some(want) if want != taxonomy.label => {
            return Err(Error::Numeric(format!(
                "case {} implies {want} but the taxonomy says {}",
                verdict.case, taxonomy.label
            )))
        }
        _ => {}
    }
    Ok(CaseReport { family, theta: None, letters: l.clone(), verdict, taxonomy, notes })
}

/// Closed-form interior equilibrium of the chemical-competition game.
pub fn interior_eq_chemical(e: f64, f: f64, g: f64, h: f64) -> Result<SimplexPoint> {
    let rho = vec![h / f, 1.0 - e / g, e / g - h / f];
    if rho.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Degenerate("chemical game has no interior equilibrium".into()));
    }
    SimplexPoint::new(rho)
}
