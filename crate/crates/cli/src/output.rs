//! CSV output with a commented provenance header.

use std::io::Write;

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes `# fpt <version> <command>` and `# config <json>`, then a CSV
/// table. Numbers use the shortest representation that parses back exactly.
pub struct Table<'a> {
    w: csv::Writer<&'a mut dyn Write>,
}

impl<'a> Table<'a> {
    pub fn new(out: &'a mut dyn Write, cfg: &RunConfig, columns: &[&str]) -> Result<Self, CliError> {
        writeln!(out, "# fpt {VERSION} {}", cfg.command.name())?;
        writeln!(out, "# config {}", cfg.to_json())?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(columns)?;
        Ok(Table { w })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<(), CliError> {
        self.w.write_record(cells.iter().map(Cell::render))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush()?;
        Ok(())
    }
}

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if *x == 0.0 || (1e-4..1e7).contains(&x.abs()) || !x.is_finite() => format!("{x}"),
            Cell::Num(x) => format!("{x:e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n)
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

/// `cells![a, b, c]` converts each argument into a [`Cell`].
#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { [$($crate::output::Cell::from($x)),*] };
}
