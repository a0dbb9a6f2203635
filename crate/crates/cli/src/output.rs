use std::io::Write;
use std::path::{Path, PathBuf};

use evogame::io::atomic_write_with;
use evogame::{Error, Result};
use serde::{Deserialize, Serialize};

/// Output destination; stdout when absent.
#[derive(clap::Args, Clone)]
pub struct Out {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const REPORT_VERSION: u32 = 1;

/// Every JSON report is wrapped with its kind and format version.
#[derive(Serialize, Deserialize)]
pub struct Envelope<T> {
    pub format: String,
    pub version: u32,
    pub report: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, report: T) -> Self {
        Envelope { format: format!("evogame.{kind}"), version: REPORT_VERSION, report }
    }
}

/// Writes through `fill` atomically to `out`, or to stdout.
pub fn emit<F>(out: Option<&Path>, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match out {
        Some(p) => atomic_write_with(p, fill),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match fill(&mut lock).and_then(|()| lock.flush()) {
                // A closed pipe downstream is not a failure of the command.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

pub fn emit_json<T: Serialize>(out: Option<&Path>, kind: &str, report: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Envelope::new(kind, report))
        .map_err(|e| Error::Numeric(format!("report does not serialise: {e}")))?;
    emit(out, |w| writeln!(w, "{text}"))
}

/// Parses a comma-separated list of numbers.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("'{x}' is not a number"))))
        .collect()
}

/// `lo:hi:n` grid specification.
pub fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Invalid(format!("expected lo:hi:n, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 2 || !(hi > lo) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}
