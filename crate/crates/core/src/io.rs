//! CSV encoding of distributions and result tables.
//!
//! Distributions use a `index,prob` header, one row per flattened state and
//! `# key=value` comment lines carrying `V`, `d` and `mode`. Numbers are
//! written with 17 significant digits so files round-trip exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::ctmc::{DiscreteDistribution, Mode, StateSpace};
use crate::{Error, Result};

/// Full-precision rendering used for every float written to disk.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a distribution, with extra `# ` comment lines placed before the
/// space description.
pub fn distribution_to_csv(p: &DiscreteDistribution, comments: &[String]) -> String {
    let space = p.space();
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "# V={}", space.vocab_size());
    let _ = writeln!(out, "# d={}", space.dims());
    let _ = writeln!(out, "# mode={}", space.mode().name());
    out.push_str("index,prob\n");
    for (i, v) in p.values().iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_f64(*v));
    }
    out
}

pub fn write_distribution<W: Write>(w: &mut W, p: &DiscreteDistribution, comments: &[String]) -> Result<()> {
    w.write_all(distribution_to_csv(p, comments).as_bytes())?;
    Ok(())
}

/// Parses a distribution file. `space` is required when the file lacks the
/// `V`/`d`/`mode` comments and must agree with them otherwise.
pub fn read_distribution<R: BufRead>(r: R, space: Option<StateSpace>) -> Result<DiscreteDistribution> {
    let (mut v, mut d, mut mode) = (None, None, None);
    let mut rows: Vec<(usize, f64)> = Vec::new();
    let mut header = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, val)) = c.trim().split_once('=') {
                let val = val.trim();
                match k.trim() {
                    "V" => v = Some(parse_num::<usize>(val, lineno)?),
                    "d" => d = Some(parse_num::<usize>(val, lineno)?),
                    "mode" => mode = Some(Mode::parse(val)?),
                    _ => {}
                }
            }
            continue;
        }
        if !header {
            if line.replace(' ', "") != "index,prob" {
                return Err(Error::Parse(format!("line {}: expected header `index,prob`", lineno + 1)));
            }
            header = true;
            continue;
        }
        let (i, p) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `index,prob`", lineno + 1)))?;
        rows.push((parse_num(i.trim(), lineno)?, parse_num(p.trim(), lineno)?));
    }
    let declared = match (v, d, mode) {
        (Some(v), Some(d), Some(m)) => Some(StateSpace::new(v, d, m)?),
        (None, None, None) => None,
        _ => return Err(Error::Parse("incomplete V/d/mode comments".into())),
    };
    let space = match (declared, space) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Parse(format!("file declares {a:?} but {b:?} was requested")))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Parse("state space unknown: no V/d/mode comments".into())),
    };
    let mut values = vec![0.0; space.size()];
    let mut seen = vec![false; space.size()];
    for (i, p) in rows {
        if i >= values.len() {
            return Err(Error::Parse(format!("index {i} outside a space of {} states", values.len())));
        }
        if seen[i] {
            return Err(Error::Parse(format!("index {i} appears twice")));
        }
        seen[i] = true;
        values[i] = p;
    }
    DiscreteDistribution::new(space, values)
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {}: cannot parse `{s}`", lineno + 1)))
}

/// A rectangular table of named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Num(x) => f.write_str(&fmt_f64(*x)),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Text cells containing commas or quotes are quoted.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
