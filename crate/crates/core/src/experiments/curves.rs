use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// One row of a `series,x,y,spread` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub spread: f64,
}

impl CurvePoint {
    pub fn new(series: impl Into<String>, x: f64, y: f64, spread: f64) -> Self {
        Self {
            series: series.into(),
            x,
            y,
            spread,
        }
    }
}

/// `#`-prefixed provenance lines written above the CSV header.
#[derive(Debug, Clone)]
pub struct CsvHeader {
    lines: Vec<String>,
}

impl CsvHeader {
    pub fn new(kind: &str, config: &ScenarioConfig) -> Self {
        Self {
            lines: vec![
                format!("qdenoise {kind}"),
                format!("config_hash={}", config.hash()),
                format!("seed={}", config.seed),
            ],
        }
    }

    pub fn with(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.lines.push(format!("{key}={value}"));
        self
    }

    pub fn render(&self, points: &[CurvePoint]) -> Result<String> {
        let mut out = String::new();
        for l in &self.lines {
            writeln!(out, "# {l}").unwrap();
        }
        out.push_str("series,x,y,spread\n");
        for p in points {
            if !(p.x.is_finite() && p.y.is_finite() && p.spread.is_finite()) {
                return Err(Error::invalid(format!("non-finite curve point in series {}", p.series)));
            }
            if p.series.contains(',') || p.series.contains('\n') {
                return Err(Error::invalid(format!("series label {:?} not CSV-safe", p.series)));
            }
            writeln!(out, "{},{},{},{}", p.series, p.x, p.y, p.spread).unwrap();
        }
        Ok(out)
    }
}

pub fn write_csv(path: impl AsRef<Path>, header: &CsvHeader, points: &[CurvePoint]) -> Result<()> {
    fs::write(path, header.render(points)?)?;
    Ok(())
}
