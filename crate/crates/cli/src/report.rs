//! Command results and their JSON / CSV renderings.

use cubicmm::{Complex, Real};
use serde_json::{json, Map, Value};
use std::time::Duration;

pub const SCHEMA_VERSION: u32 = 1;

/// Significant decimal digits that let a `bits`-bit value re-parse exactly.
pub fn digits(bits: usize) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
}

pub fn dec(v: &Real) -> String {
    v.to_sci_string(digits(v.bits()))
}

pub fn dec64(v: f64) -> String {
    format!("{v:e}")
}

/// Value with an error estimate.
pub fn num(v: &Real, err: f64) -> Value {
    json!({ "value": dec(v), "err": dec64(err) })
}

pub fn num64(v: f64, err: f64) -> Value {
    json!({ "value": dec64(v), "err": dec64(err) })
}

/// Value that is exact by construction (counts, inputs, flags).
pub fn exact(v: impl Into<Value>) -> Value {
    json!({ "value": v.into(), "exact": true })
}

/// Closed-form value: the error is rounding in the last few bits.
pub fn closed(v: &Real) -> Value {
    let err = v.to_f64().abs() * 2f64.powi(4 - v.bits() as i32);
    num(v, err)
}

pub fn cnum(z: &Complex, err: f64) -> Value {
    json!({ "re": dec(&z.re), "im": dec(&z.im), "err": dec64(err) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Measured quantity as printed.
    pub measured: String,
    /// The requirement it was held to.
    pub limit: String,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Check {
        Check { name: name.into(), pass: value < limit, measured: dec64(value), limit: format!("< {}", dec64(limit)) }
    }

    pub fn holds(name: impl Into<String>, pass: bool, measured: impl Into<String>, limit: impl Into<String>) -> Check {
        Check { name: name.into(), pass, measured: measured.into(), limit: limit.into() }
    }

    /// A check whose computation itself failed.
    pub fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Check {
        Check { name: name.into(), pass: false, measured: format!("error: {err}"), limit: "computes".into() }
    }

    pub fn to_json(&self) -> Value {
        json!({ "name": self.name, "pass": self.pass, "measured": self.measured, "limit": self.limit })
    }
}

/// Row-oriented payload written as CSV (or embedded in the JSON).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub outputs: Map<String, Value>,
    pub checks: Vec<Check>,
    pub table: Table,
    pub warnings: Vec<String>,
    /// Kept out of the rendered output so that runs are byte-identical.
    pub wall_time: Duration,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report {
            command: command.into(),
            inputs: Map::new(),
            outputs: Map::new(),
            checks: Vec::new(),
            table: Table::default(),
            warnings: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    pub fn input(&mut self, key: &str, v: impl Into<Value>) {
        self.inputs.insert(key.into(), v.into());
    }

    pub fn output(&mut self, key: &str, v: Value) {
        self.outputs.insert(key.into(), v);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "checks": self.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "all_pass": self.all_pass(),
            "warnings": self.warnings,
            "table": { "header": self.table.header, "rows": self.table.rows },
        })
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.table.header).expect("in-memory write");
        for r in &self.table.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
