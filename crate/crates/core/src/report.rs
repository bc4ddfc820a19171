//! Machine-readable run reports.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::Value;

use crate::operator::{ComplexMatrix, Tolerances, C64};

pub const SCHEMA: u32 = 1;

/// One decided property together with the number it was decided on.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    /// What `margin` measures, e.g. `min_eig` or `residual`.
    pub margin_kind: String,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<(f64, f64)>>,
}

impl Verdict {
    pub fn new(name: impl Into<String>, holds: bool, margin_kind: impl Into<String>, margin: f64) -> Self {
        Verdict { name: name.into(), holds, margin_kind: margin_kind.into(), margin, witness: None }
    }

    pub fn with_witness(mut self, w: Option<&DVector<C64>>) -> Self {
        self.witness = w.map(complex_pairs);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: Vec<String>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub holds: bool,
    pub verdicts: Vec<Verdict>,
    /// Command-specific data.
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    /// Extra human-readable lines for text output.
    #[serde(skip)]
    pub lines: Vec<String>,
}

impl RunReport {
    pub fn new(command: Vec<String>, tolerances: Tolerances, seed: u64) -> Self {
        RunReport {
            schema: SCHEMA,
            command,
            tolerances,
            seed,
            holds: true,
            verdicts: Vec::new(),
            details: Value::Null,
            wall_time_ms: None,
            lines: Vec::new(),
        }
    }

    pub fn push(&mut self, v: Verdict) {
        self.holds &= v.holds;
        self.verdicts.push(v);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command.join(" "));
        let _ = writeln!(s, "seed: {}", self.seed);
        for line in &self.lines {
            let _ = writeln!(s, "{line}");
        }
        for v in &self.verdicts {
            let _ = writeln!(s, "{} {}: {} = {:.6e}", if v.holds { "HOLDS" } else { "FAILS" }, v.name, v.margin_kind, v.margin);
            if let Some(w) = &v.witness {
                let entries: Vec<String> = w.iter().map(|(re, im)| format!("({re:.6}, {im:.6})")).collect();
                let _ = writeln!(s, "  witness: [{}]", entries.join(", "));
            }
        }
        if let Some(t) = self.wall_time_ms {
            let _ = writeln!(s, "wall time: {t:.3} ms");
        }
        let _ = writeln!(s, "result: {}", if self.holds { "all verdicts hold" } else { "verification failed" });
        s
    }
}

pub fn complex_pairs(v: &DVector<C64>) -> Vec<(f64, f64)> {
    v.iter().map(|z| (z.re, z.im)).collect()
}

/// Row-major matrix of `(re, im)` pairs.
pub fn matrix_pairs(m: &ComplexMatrix) -> Vec<Vec<(f64, f64)>> {
    m.to_rows().iter().map(|r| r.iter().map(|z| (z.re, z.im)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_fold_into_overall_result() {
        let mut r = RunReport::new(vec!["check".into()], Tolerances::default(), 0);
        r.push(Verdict::new("a", true, "min_eig", 0.0));
        assert!(r.holds);
        r.push(Verdict::new("b", false, "min_eig", -0.5).with_witness(Some(&DVector::from_element(2, C64::new(1.0, 0.0)))));
        assert!(!r.holds);
        let j: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(j["schema"], 1);
        assert!(j.get("wall_time_ms").is_none());
        assert_eq!(j["verdicts"][1]["witness"][0][0], 1.0);
        assert!(r.to_text().contains("FAILS b"));
    }
}
