use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub method: String,
    /// Measured qubit.
    pub target: usize,
    /// Line driven against the target, when there is one.
    pub source: Option<usize>,
    pub shots: u32,
    pub elapsed_s: f64,
    pub x_unit: String,
    pub y_unit: String,
    /// Method-specific settings (biases, tone frequency, amplitudes).
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// One measured trace: `y ± y_sigma` against `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_sigma: Vec<f64>,
    pub meta: RecordMeta,
}

impl ExperimentRecord {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.meta.params.get(key).copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "y_sigma"])?;
        for i in 0..self.x.len() {
            w.write_record([
                format!("{:.12e}", self.x[i]),
                format!("{:.12e}", self.y[i]),
                format!("{:.12e}", self.y_sigma[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and the `<stem>.json` metadata sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        let csv_file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(csv_file).map_err(std::io::Error::other)?;
        let meta = serde_json::to_string_pretty(&self.meta).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{stem}.json")), meta + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_sidecar() {
        let rec = ExperimentRecord {
            x: vec![0.0, 1.0],
            y: vec![2.5, -1.0],
            y_sigma: vec![0.1, 0.1],
            meta: RecordMeta {
                method: "resonator_scan".into(),
                target: 0,
                source: Some(12),
                shots: 200,
                elapsed_s: 26.7,
                x_unit: "V".into(),
                y_unit: "MHz".into(),
                params: BTreeMap::from([("adversary_bias_phi0".into(), 1.0)]),
            },
        };
        let dir = tempfile::tempdir().unwrap();
        rec.save(dir.path(), "trace").unwrap();
        let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,y_sigma"));
        assert_eq!(lines.count(), 2);
        let meta: RecordMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap())
                .unwrap();
        assert_eq!(meta, rec.meta);
    }
}
