//! Report and convergence-table formats, with atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use twogauge_core::matrix::CMat;
use twogauge_core::transport::ConvergenceRow;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Defect {
    pub case: String,
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OrderEstimate {
    pub case: String,
    /// `None` when both defects sit at the noise floor.
    pub value: Option<f64>,
    pub minimum: Option<f64>,
    pub pass: bool,
}

/// A matrix result, row-major, as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MatrixValue {
    pub case: String,
    pub quantity: String,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixValue {
    pub fn new(case: impl Into<String>, quantity: impl Into<String>, m: &CMat) -> Self {
        MatrixValue { case: case.into(), quantity: quantity.into(), entries: m.entries().iter().map(|z| [z.re, z.im]).collect() }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub command: String,
    #[serde(rename = "config-hash")]
    pub config_hash: String,
    pub defects: Vec<Defect>,
    #[serde(rename = "order-estimates")]
    pub order_estimates: Vec<OrderEstimate>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<MatrixValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<String>,
    pub timing: Timing,
}

impl Report {
    pub fn new(command: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            config_hash: config_hash.into(),
            defects: Vec::new(),
            order_estimates: Vec::new(),
            pass: true,
            values: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
            timing: Timing { seconds: 0.0 },
        }
    }

    pub fn defect(&mut self, case: impl Into<String>, quantity: impl Into<String>, value: f64, tolerance: f64) {
        let pass = value <= tolerance;
        self.pass &= pass;
        self.defects.push(Defect { case: case.into(), quantity: quantity.into(), value, tolerance, pass });
    }

    pub fn order(&mut self, case: impl Into<String>, value: Option<f64>, minimum: Option<f64>) {
        let pass = match (value, minimum) {
            (Some(v), Some(m)) => v >= m,
            _ => true,
        };
        self.pass &= pass;
        self.order_estimates.push(OrderEstimate { case: case.into(), value, minimum, pass });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Fold another report in, prefixing its cases with its command.
    pub fn absorb(&mut self, other: Report) {
        let prefix = |c: String| format!("{}/{}", other.command, c);
        for mut d in other.defects {
            d.case = prefix(d.case);
            self.defects.push(d);
        }
        for mut o in other.order_estimates {
            o.case = prefix(o.case);
            self.order_estimates.push(o);
        }
        self.notes.extend(other.notes);
        self.tables.extend(other.tables);
        self.pass &= other.pass;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The failing defects and orders only.
    pub fn failure_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command,
            "pass": self.pass,
            "failed-defects": self.defects.iter().filter(|d| !d.pass).collect::<Vec<_>>(),
            "failed-orders": self.order_estimates.iter().filter(|o| !o.pass).collect::<Vec<_>>(),
        })
    }
}

pub fn csv_table(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("steps,defect,order\n");
    for r in rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{:e},{}\n", r.steps, r.defect, order));
    }
    out
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// The report JSON with the timing field dropped, for reproducibility comparisons.
pub fn without_timing(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).expect("report JSON");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    v
}
