//! Report rows and their CSV / JSON encodings.

use serde::Serialize;
use std::fmt::Write as _;
use std::str::FromStr;

use teleham_core::fields::PeriodicGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub suite: String,
    pub case: String,
    pub seed: u64,
    pub grid: String,
    pub residual: f64,
    pub tolerance: f64,
    /// measured convergence order, when the row comes from a refinement
    pub order: Option<f64>,
    /// signed quantity behind the residual, when it has one
    pub value: Option<f64>,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(suite: &str, case: impl Into<String>, seed: u64, grid: &str, residual: f64, tolerance: f64) -> Self {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual.abs() };
        Self {
            suite: suite.to_string(),
            case: case.into(),
            seed,
            grid: grid.to_string(),
            residual,
            tolerance,
            order: None,
            value: None,
            pass: residual <= tolerance,
        }
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order.is_finite().then_some(order);
        self
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

pub fn grid_label(g: &PeriodicGrid) -> String {
    let n = g.points();
    format!("{}x{}x{}", n[0], n[1], n[2])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub failed: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub rows: Vec<ReportRow>,
}

const COLUMNS: &str = "suite,case,seed,grid,residual,tolerance,order,value,pass";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            rows: self.rows.len(),
            failed: self.rows.iter().filter(|r| !r.pass).count(),
            max_residual: self.rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{:e},{},{},{}",
                r.suite,
                r.case,
                r.seed,
                r.grid,
                r.residual,
                r.tolerance,
                opt(r.order),
                opt(r.value),
                r.pass
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            command: &'a str,
            summary: Summary,
            rows: &'a [ReportRow],
        }
        let doc = Doc {
            command: &self.command,
            summary: self.summary(),
            rows: &self.rows,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_tolerance() {
        assert!(ReportRow::new("s", "c", 0, "-", 1e-12, 1e-10).pass);
        assert!(!ReportRow::new("s", "c", 0, "-", 1e-9, 1e-10).pass);
        assert!(!ReportRow::new("s", "c", 0, "-", f64::NAN, 1e-10).pass);
        assert_eq!(ReportRow::new("s", "c", 0, "-", -2.0, 3.0).residual, 2.0);
    }

    #[test]
    fn csv_layout() {
        let mut r = Report::new("x");
        r.push(ReportRow::new("a", "b", 4, "8x8x8", 0.5, 1.0).with_order(3.9));
        r.push(ReportRow::new("a", "c", 4, "-", 2.0, 1.0).with_order(f64::NAN));
        assert_eq!(
            r.to_csv(),
            "suite,case,seed,grid,residual,tolerance,order,value,pass\na,b,4,8x8x8,5e-1,1e0,3.9e0,,true\na,c,4,-,2e0,1e0,,,false\n"
        );
        let j: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(j["summary"]["failed"], 1);
        assert!(j["rows"][1]["order"].is_null());
    }
}
