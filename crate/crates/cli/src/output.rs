//! Result files: CSV tables, gnuplot `.dat` blocks, JSON documents and the
//! run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// 17 significant digits, `.` decimal point.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

/// Writes into one output directory and remembers every path.
#[derive(Debug)]
pub struct OutDir {
    pub root: PathBuf,
    pub artifacts: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), artifacts: vec![] })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.root.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush()
    }

    /// Whitespace-separated columns; blocks separated by a blank line.
    pub fn dat(&mut self, name: &str, header: &[&str], blocks: &[Vec<Vec<f64>>]) -> io::Result<()> {
        let mut s = format!("# {}\n", header.join(" "));
        for (b, block) in blocks.iter().enumerate() {
            if b > 0 {
                s.push('\n');
            }
            for r in block {
                s.push_str(&r.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(" "));
                s.push('\n');
            }
        }
        fs::write(self.path(name), s)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        s.push('\n');
        fs::write(self.path(name), s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Invariant {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Invariant { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: Option<String>,
    /// `pass`, `fail` or `error`.
    pub status: &'static str,
    pub exit_code: i32,
    pub config: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<String>,
    pub invariants: Vec<Invariant>,
    pub error: Option<String>,
    pub summary: serde_json::Value,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}
