use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_counts: Vec<usize>,
    /// Per-epoch mean training loss of the evaluated model, if known.
    pub loss_curve: Vec<f64>,
}

impl Metrics {
    pub fn from_predictions(labels: &[usize], predicted: &[usize], n_classes: usize, loss_curve: Vec<f64>) -> Self {
        assert_eq!(labels.len(), predicted.len());
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&y, &p) in labels.iter().zip(predicted) {
            confusion[y][p] += 1;
        }
        let per_class_counts: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let per_class_accuracy = (0..n_classes)
            .map(|c| if per_class_counts[c] == 0 { 0.0 } else { confusion[c][c] as f64 / per_class_counts[c] as f64 })
            .collect();
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        let accuracy = if labels.is_empty() { 0.0 } else { correct as f64 / labels.len() as f64 };
        Self { accuracy, per_class_accuracy, confusion, per_class_counts, loss_curve }
    }

    pub fn total(&self) -> usize {
        self.per_class_counts.iter().sum()
    }

    /// Writes `metrics.json` and `confusion.csv` into `dir`.
    pub fn write_report(&self, dir: &Path, extra: serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut doc = serde_json::to_value(self).expect("metrics serialize");
        if let (Some(obj), serde_json::Value::Object(more)) = (doc.as_object_mut(), extra) {
            obj.extend(more);
        }
        let path = dir.join("metrics.json");
        std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("json")).map_err(io_err(&path))?;
        let n = self.confusion.len();
        let mut csv = String::from("true_class");
        (0..n).for_each(|c| csv.push_str(&format!(",pred_{c}")));
        csv.push('\n');
        for (c, row) in self.confusion.iter().enumerate() {
            csv.push_str(&c.to_string());
            row.iter().for_each(|v| csv.push_str(&format!(",{v}")));
            csv.push('\n');
        }
        let path = dir.join("confusion.csv");
        std::fs::write(&path, csv).map_err(io_err(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accounting_identities() {
        let labels = [0, 0, 1, 1, 1, 2];
        let pred = [0, 1, 1, 1, 0, 2];
        let m = Metrics::from_predictions(&labels, &pred, 3, vec![]);
        assert_eq!(m.confusion, vec![vec![1, 1, 0], vec![1, 2, 0], vec![0, 0, 1]]);
        assert_eq!(m.per_class_counts, vec![2, 3, 1]);
        assert_eq!(m.total(), labels.len());
        let trace: usize = (0..3).map(|c| m.confusion[c][c]).sum();
        assert_eq!(m.accuracy, trace as f64 / 6.0);
        assert_eq!(m.per_class_accuracy, vec![0.5, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = Metrics::from_predictions(&[0, 1], &[0, 0], 2, vec![1.5]);
        m.write_report(dir.path(), serde_json::json!({"mode": "none"})).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
        assert_eq!(csv, "true_class,pred_0,pred_1\n0,1,0\n1,1,0\n");
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
        assert_eq!(doc["accuracy"], 0.5);
        assert_eq!(doc["mode"], "none");
    }
}
