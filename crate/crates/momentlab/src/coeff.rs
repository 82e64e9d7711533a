//! Coefficient files and form selection.
//!
//! A coefficient file is plain text with one `n λ(n)` record per line.
//! Header lines start with `#` and carry `key value` (or `key = value`,
//! `key: value`) pairs:
//!
//! ```text
//! # kind holomorphic
//! # weight 12
//! # epsilon 1
//! # theta 0
//! 1 1.0
//! 2 -0.530330085889911
//! ```
//!
//! `kind` is `holomorphic` (with `weight`) or `maass` (with `kappa`).
//! `epsilon` defaults to +1; `theta` defaults to 0 for holomorphic forms
//! and 7/64 for Maass forms. Other `#` lines are comments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use momentlab_core::characters::Parity;
use momentlab_core::eigenform::{EigenformData, FormKind};
use momentlab_core::lfunc::WeightFunction;

use crate::error::{AppError, AppResult, IoContext};

/// Directory searched for relative coefficient file names.
pub const COEFF_DIR_ENV: &str = "MOMENTLAB_COEFF_DIR";

/// Default Ramanujan exponent for Maass forms (Kim–Sarnak).
pub const MAASS_THETA: f64 = 7.0 / 64.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormSelector {
    /// The discriminant form Δ, computed on demand.
    Delta,
    File(PathBuf),
}

impl FromStr for FormSelector {
    type Err = AppError;

    fn from_str(s: &str) -> AppResult<Self> {
        match s.split_once(':') {
            Some(("builtin", "delta")) => Ok(Self::Delta),
            Some(("builtin", other)) => Err(AppError::Config(format!("unknown builtin form '{other}' (known: delta)"))),
            Some(("file", path)) if !path.is_empty() => Ok(Self::File(PathBuf::from(path))),
            _ => Err(AppError::Config(format!("form selector '{s}' must be builtin:delta or file:PATH"))),
        }
    }
}

impl std::fmt::Display for FormSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Delta => f.write_str("builtin:delta"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Parsed header of a coefficient file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffHeader {
    pub kind: FormKind,
    pub epsilon: i8,
    pub theta: f64,
}

/// A parsed but not yet validated coefficient file.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffFile {
    pub header: CoeffHeader,
    pub records: Vec<(u64, f64)>,
}

/// Resolves a coefficient path: as given if it exists or is absolute,
/// otherwise inside `$MOMENTLAB_COEFF_DIR` when that is set.
pub fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(COEFF_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

pub fn parse_coefficients(text: &str, origin: &Path) -> AppResult<CoeffFile> {
    let err = |line: usize, message: String| AppError::Parse { path: origin.to_path_buf(), line, message };
    let mut kind = None;
    let mut weight = None;
    let mut kappa = None;
    let mut epsilon = None;
    let mut theta = None;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(h) = s.strip_prefix('#') {
            let h = h.trim();
            let (key, value) = match h.find([' ', '\t', '=', ':']) {
                Some(p) => (&h[..p], h[p + 1..].trim_start_matches(['=', ':', ' ', '\t']).trim()),
                None => (h, ""),
            };
            let number = |v: &str| v.parse::<f64>().map_err(|_| err(line, format!("bad {key} value '{v}'")));
            match key.to_ascii_lowercase().as_str() {
                "kind" => kind = Some(value.to_ascii_lowercase()),
                "weight" => weight = Some(value.parse::<u32>().map_err(|_| err(line, format!("bad weight '{value}'")))?),
                "kappa" => kappa = Some(number(value)?),
                "epsilon" => {
                    epsilon = Some(match value {
                        "1" | "+1" => 1,
                        "-1" => -1,
                        _ => return Err(err(line, format!("epsilon must be +1 or -1, got '{value}'"))),
                    })
                }
                "theta" => theta = Some(parse_fraction(value).ok_or_else(|| err(line, format!("bad theta '{value}'")))?),
                _ => {}
            }
            continue;
        }
        let mut it = s.split_whitespace();
        let (Some(n), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(err(line, format!("expected 'n lambda(n)', got '{s}'")));
        };
        let n = n.parse::<u64>().map_err(|_| err(line, format!("bad index '{n}'")))?;
        let v = v.parse::<f64>().map_err(|_| err(line, format!("bad coefficient '{v}'")))?;
        records.push((n, v));
    }
    let kind = match kind.as_deref() {
        Some("holomorphic") => FormKind::Holomorphic {
            weight: weight.ok_or_else(|| err(0, "holomorphic form needs a weight header".into()))?,
        },
        Some("maass") => FormKind::Maass { kappa: kappa.ok_or_else(|| err(0, "Maass form needs a kappa header".into()))? },
        Some(other) => return Err(err(0, format!("unknown kind '{other}'"))),
        None => return Err(err(0, "missing kind header".into())),
    };
    let theta = theta.unwrap_or(match kind {
        FormKind::Holomorphic { .. } => 0.0,
        FormKind::Maass { .. } => MAASS_THETA,
    });
    Ok(CoeffFile { header: CoeffHeader { kind, epsilon: epsilon.unwrap_or(1), theta }, records })
}

/// `p/q` or a decimal.
pub fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (p.trim().parse::<f64>().ok()?, q.trim().parse::<f64>().ok()?);
            (q != 0.0).then(|| p / q)
        }
        None => s.trim().parse().ok(),
    }
}

/// Reads and validates a coefficient file. With `extend`, λ is completed
/// by Hecke multiplicativity from prime-power records.
pub fn load_coefficients(path: &Path, extend: bool) -> AppResult<EigenformData> {
    let path = resolve(path);
    let text = fs::read_to_string(&path).at(&path)?;
    let file = parse_coefficients(&text, &path)?;
    let label = path.file_stem().map_or_else(|| "form".into(), |s| s.to_string_lossy().into_owned());
    let h = file.header;
    Ok(EigenformData::from_records(&label, h.kind, h.epsilon, h.theta, &file.records, extend)?)
}

/// Writes λ(1..=n_max) of `f` in the coefficient format.
pub fn write_coefficients(path: &Path, f: &EigenformData, n_max: u64) -> AppResult<()> {
    let mut out = String::new();
    match f.kind() {
        FormKind::Holomorphic { weight } => writeln!(out, "# kind holomorphic\n# weight {weight}"),
        FormKind::Maass { kappa } => writeln!(out, "# kind maass\n# kappa {kappa:?}"),
    }
    .expect("string write");
    writeln!(out, "# epsilon {}\n# theta {:?}", f.epsilon(), f.theta()).expect("string write");
    for n in 1..=n_max.min(f.n_max()) {
        writeln!(out, "{n} {:?}", f.lambda(n)?).expect("string write");
    }
    fs::write(path, out).at(path)
}

/// λ-table length the moment routines need for every modulus up to `q_max`.
pub fn table_for_moments(kind: FormKind, q_max: u64) -> AppResult<u64> {
    let mut x = 0.0f64;
    for p in [Parity::Even, Parity::Odd] {
        x = x.max(WeightFunction::new(kind, p)?.x_cut());
    }
    Ok(((q_max * q_max) as f64 * x).floor() as u64)
}

/// Materializes the selected form with λ known at least up to `n_needed`.
pub fn load_form(selector: &FormSelector, n_needed: u64) -> AppResult<EigenformData> {
    match selector {
        FormSelector::Delta => Ok(EigenformData::delta(n_needed.max(1) as usize)?),
        FormSelector::File(path) => {
            let f = load_coefficients(path, false)?;
            f.require(n_needed)?;
            Ok(f)
        }
    }
}
