use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, Stat};

/// A published result of an external system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub citation: String,
    pub parameters: String,
    pub layers: String,
    #[serde(default)]
    pub position: BTreeMap<String, f64>,
    #[serde(default)]
    pub angle: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    #[serde(rename = "reference")]
    pub references: Vec<Reference>,
}

impl ReferenceSet {
    /// The reference rows shipped in `data/references.toml`.
    pub fn builtin() -> Self {
        toml::from_str(include_str!("../../data/references.toml")).expect("shipped references parse")
    }

    pub fn none() -> Self {
        ReferenceSet { references: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableMetric {
    Position,
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Cell {
    Measured(Stat),
    Reported { value: f64 },
    Missing,
}

impl Cell {
    pub fn render(&self, digits: usize) -> String {
        match self {
            Cell::Measured(s) => format!("{:.digits$} ± {:.digits$}", s.mean, s.std),
            Cell::Reported { value } => format!("{value}"),
            Cell::Missing => "NA".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    /// External rows are published numbers, never computed here.
    pub external: bool,
    pub parameters: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub metric: TableMetric,
    pub datasets: Vec<String>,
    pub rows: Vec<TableRow>,
}

fn millions(n: usize) -> String {
    if n >= 1_000_000 {
        format!("{:.1}M", n as f64 / 1e6)
    } else if n >= 1_000 {
        format!("{:.1}k", n as f64 / 1e3)
    } else {
        n.to_string()
    }
}

/// Rows are architectures in first-seen order followed by the reference rows;
/// columns are datasets in first-seen order.
pub fn build_comparison(
    reports: &[EvalReport],
    references: &ReferenceSet,
    metric: TableMetric,
) -> Result<ComparisonTable, EvalError> {
    let mut datasets: Vec<String> = Vec::new();
    let mut archs: Vec<(String, usize)> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.meta.dataset) {
            datasets.push(r.meta.dataset.clone());
        }
        if !archs.iter().any(|(a, _)| *a == r.meta.arch) {
            archs.push((r.meta.arch.clone(), r.meta.param_count));
        }
    }
    let mut rows = Vec::new();
    for (arch, params) in &archs {
        let mut cells = vec![Cell::Missing; datasets.len()];
        for r in reports.iter().filter(|r| r.meta.arch == *arch) {
            let col = datasets.iter().position(|d| *d == r.meta.dataset).expect("dataset collected");
            if cells[col] != Cell::Missing {
                return Err(EvalError::DuplicateCell { arch: arch.clone(), dataset: r.meta.dataset.clone() });
            }
            cells[col] = Cell::Measured(match metric {
                TableMetric::Position => r.position,
                TableMetric::Angle => r.angle,
            });
        }
        rows.push(TableRow { label: arch.clone(), external: false, parameters: millions(*params), cells });
    }
    for reference in &references.references {
        let values = match metric {
            TableMetric::Position => &reference.position,
            TableMetric::Angle => &reference.angle,
        };
        let cells = datasets
            .iter()
            .map(|d| values.get(d).map_or(Cell::Missing, |&value| Cell::Reported { value }))
            .collect();
        rows.push(TableRow {
            label: reference.name.clone(),
            external: true,
            parameters: reference.parameters.clone(),
            cells,
        });
    }
    Ok(ComparisonTable { metric, datasets, rows })
}

impl ComparisonTable {
    /// Markdown rendering; external rows are italic.
    pub fn to_markdown(&self, digits: usize) -> String {
        let unit = match self.metric {
            TableMetric::Position => "m",
            TableMetric::Angle => "°",
        };
        let mut out = String::new();
        let _ = write!(out, "| Architecture | Parameters |");
        for d in &self.datasets {
            let _ = write!(out, " {d} [{unit}] |");
        }
        out.push('\n');
        out.push_str("|---|---|");
        out.push_str(&"---|".repeat(self.datasets.len()));
        out.push('\n');
        for row in &self.rows {
            let wrap = |s: &str| if row.external && s != "NA" { format!("*{s}*") } else { s.to_string() };
            let _ = write!(out, "| {} | {} |", wrap(&row.label), wrap(&row.parameters));
            for c in &row.cells {
                let _ = write!(out, " {} |", wrap(&c.render(digits)));
            }
            out.push('\n');
        }
        out
    }
}
