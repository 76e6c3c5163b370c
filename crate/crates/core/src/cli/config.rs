//! Line-oriented `key = value` run configuration.
//!
//! Recognised keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `model` | `six_vertex`, `higher_spin_xxz` or `table` | `six_vertex` |
//! | `N` | number of states per site | 2 for `six_vertex`, 3 otherwise |
//! | `eta` | anisotropy of the built-in models | 0.6 |
//! | `table_file` | weight table, relative paths resolve against the config file | none |
//! | `L` | chain length | 2 |
//! | `inhomogeneities` | `[z1, z2, ...]` with one entry per site | all zero |
//! | `n` | particle number for `solve` | 1 |
//! | `lambda` | spectral parameter for eigenvalues and spectra | 0.23+0.17i |
//! | `roots` | `[z1, ...]` rapidities for `offshell` | none |
//! | `seeds` | Newton seeds for `solve` | 50 |
//!
//! Complex literals accept `1.5`, `-0.2i`, `0.3+0.1i`, `0.3-1e-2i` and `(0.3, 0.1)`.
//! Blank lines and text after `#` are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::chain::ChainContext;
use crate::error::{BetheError, Result};
use crate::linalg::C64;
use crate::weights::{ModelSpec, WeightTable, DEFAULT_ETA};

/// Default spectral parameter at which eigenvalues are reported.
pub const DEFAULT_LAMBDA: C64 = C64::new(0.23, 0.17);

/// Parsed run configuration: model, chain and command options.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Weight model.
    pub model: ModelSpec,
    /// Chain length.
    pub length: usize,
    /// Site inhomogeneities; `None` means the homogeneous chain.
    pub inhomogeneities: Option<Vec<C64>>,
    /// Particle number for `solve`.
    pub n: usize,
    /// Spectral parameter for eigenvalues and spectra.
    pub lambda: C64,
    /// Rapidities for `offshell`.
    pub roots: Option<Vec<C64>>,
    /// Newton seeds for `solve`.
    pub seeds: usize,
    /// Canonical key/value echo of every setting, defaults included.
    pub echo: BTreeMap<String, String>,
}

const KEYS: [&str; 10] = ["model", "N", "eta", "table_file", "L", "inhomogeneities", "n", "lambda", "roots", "seeds"];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("", None).expect("empty configuration is valid")
    }
}

impl RunConfig {
    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BetheError::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text, path.parent())
    }

    /// Parses configuration text; `base` resolves a relative `table_file`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            last_line = line_no;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| BetheError::Config { line: line_no, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let known = KEYS.iter().find(|k| **k == key).ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if value.is_empty() {
                return Err(err(format!("empty value for `{key}`")));
            }
            if entries.insert(known, (line_no, value.to_string())).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        let missing_line = last_line + 1;
        let line_of = |k: &str| entries.get(k).map_or(missing_line, |e| e.0);
        let get = |k: &str| entries.get(k).map(|e| (e.0, e.1.as_str()));

        let kind = get("model").map_or("six_vertex", |e| e.1);
        let eta = match get("eta") {
            Some((l, v)) => parse_complex(v).map_err(|m| BetheError::Config { line: l, message: m })?,
            None => C64::new(DEFAULT_ETA, 0.0),
        };
        let n_states = match get("N") {
            Some((l, v)) => parse_usize(v).map_err(|m| BetheError::Config { line: l, message: m })?,
            None if kind == "six_vertex" => 2,
            None => 3,
        };
        let model_err = |e: BetheError, line: usize| match e {
            BetheError::Config { .. } => e,
            other => BetheError::Config { line, message: other.to_string() },
        };
        let model = match kind {
            "six_vertex" => {
                if n_states != 2 {
                    return Err(BetheError::Config { line: line_of("N"), message: format!("six_vertex requires N = 2, got {n_states}") });
                }
                ModelSpec::six_vertex(eta).map_err(|e| model_err(e, line_of("eta")))?
            }
            "higher_spin_xxz" => ModelSpec::higher_spin_xxz(n_states, eta).map_err(|e| model_err(e, line_of("N")))?,
            "table" => {
                let (l, path) = get("table_file").ok_or(BetheError::Config {
                    line: missing_line,
                    message: "model `table` requires `table_file`".into(),
                })?;
                let mut full = PathBuf::from(path);
                if full.is_relative() {
                    if let Some(b) = base {
                        full = b.join(full);
                    }
                }
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| BetheError::Config { line: l, message: format!("{}: {e}", full.display()) })?;
                let table = WeightTable::parse(n_states, &text).map_err(|e| match e {
                    BetheError::Config { line, message } => BetheError::Config {
                        line,
                        message: format!("table file {}: {message}", full.display()),
                    },
                    other => other,
                })?;
                ModelSpec::table(n_states, table).map_err(|e| model_err(e, line_of("N")))?
            }
            other => {
                return Err(BetheError::Config { line: line_of("model"), message: format!("unknown model `{other}`") });
            }
        };

        let length = match get("L") {
            Some((l, v)) => {
                let len = parse_usize(v).map_err(|m| BetheError::Config { line: l, message: m })?;
                if len == 0 {
                    return Err(BetheError::Config { line: l, message: "L must be positive".into() });
                }
                len
            }
            None => 2,
        };
        let inhomogeneities = match get("inhomogeneities") {
            Some((l, v)) => {
                let list = parse_complex_list(v).map_err(|m| BetheError::Config { line: l, message: m })?;
                if list.len() != length {
                    return Err(BetheError::Config {
                        line: l,
                        message: format!("{} inhomogeneities for L = {length}", list.len()),
                    });
                }
                Some(list)
            }
            None => None,
        };
        let n = match get("n") {
            Some((l, v)) => parse_usize(v).map_err(|m| BetheError::Config { line: l, message: m })?,
            None => 1,
        };
        let lambda = match get("lambda") {
            Some((l, v)) => parse_complex(v).map_err(|m| BetheError::Config { line: l, message: m })?,
            None => DEFAULT_LAMBDA,
        };
        let roots = match get("roots") {
            Some((l, v)) => Some(parse_complex_list(v).map_err(|m| BetheError::Config { line: l, message: m })?),
            None => None,
        };
        let seeds = match get("seeds") {
            Some((l, v)) => {
                let s = parse_usize(v).map_err(|m| BetheError::Config { line: l, message: m })?;
                if s == 0 {
                    return Err(BetheError::Config { line: l, message: "seeds must be positive".into() });
                }
                s
            }
            None => 50,
        };

        let mut echo = BTreeMap::new();
        echo.insert("model".to_string(), kind.to_string());
        echo.insert("N".to_string(), n_states.to_string());
        if kind == "table" {
            echo.insert("table_file".to_string(), get("table_file").map_or(String::new(), |e| e.1.to_string()));
        } else {
            echo.insert("eta".to_string(), format_complex(eta));
        }
        echo.insert("L".to_string(), length.to_string());
        if let Some(list) = &inhomogeneities {
            echo.insert("inhomogeneities".to_string(), format_complex_list(list));
        }
        echo.insert("n".to_string(), n.to_string());
        echo.insert("lambda".to_string(), format_complex(lambda));
        if let Some(list) = &roots {
            echo.insert("roots".to_string(), format_complex_list(list));
        }
        echo.insert("seeds".to_string(), seeds.to_string());

        Ok(RunConfig { model, length, inhomogeneities, n, lambda, roots, seeds, echo })
    }

    /// Chain context of the configured length and inhomogeneities.
    pub fn chain(&self) -> Result<ChainContext> {
        ChainContext::new(self.model.clone(), self.length, self.inhomogeneities.clone())
    }
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>().map_err(|e| format!("`{v}`: {e}"))
}

/// Parses a complex literal such as `0.3-0.1i`, `2i`, `-1.5` or `(0.3, -0.1)`.
pub fn parse_complex(text: &str) -> std::result::Result<C64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("invalid complex literal `{text}`");
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let (re, im) = inner.split_once(',').ok_or_else(bad)?;
        let re = re.parse::<f64>().map_err(|_| bad())?;
        let im = im.parse::<f64>().map_err(|_| bad())?;
        return finite(C64::new(re, im)).ok_or_else(bad);
    }
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        let re = s.parse::<f64>().map_err(|_| bad())?;
        return finite(C64::new(re, 0.0)).ok_or_else(bad);
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |t: &str| -> std::result::Result<f64, String> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    let z = match split {
        Some(k) => C64::new(body[..k].parse::<f64>().map_err(|_| bad())?, imag(&body[k..])?),
        None => C64::new(0.0, imag(body)?),
    };
    finite(z).ok_or_else(bad)
}

fn finite(z: C64) -> Option<C64> {
    z.is_finite().then_some(z)
}

/// Parses `[z1, z2, ...]`; parenthesised literals may contain commas.
pub fn parse_complex_list(text: &str) -> std::result::Result<Vec<C64>, String> {
    let t = text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed list, found `{t}`"))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (k, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                items.push(&inner[start..k]);
                start = k + 1;
            }
            _ => {}
        }
    }
    items.push(&inner[start..]);
    items.into_iter().map(parse_complex).collect()
}

/// Formats a complex number as `re+imi` with 17 significant digits.
pub fn format_complex(z: C64) -> String {
    format!("{:.16e}{:+.16e}i", z.re, z.im)
}

fn format_complex_list(list: &[C64]) -> String {
    let parts: Vec<String> = list.iter().map(|&z| format_complex(z)).collect();
    format!("[{}]", parts.join(", "))
}
