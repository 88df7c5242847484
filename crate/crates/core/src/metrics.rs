//! Confusion matrices, per-class scores and the baseline-vs-CNN table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::{ImpairmentKind, Label};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Rows are true labels, columns predictions, both in `Label::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; Label::COUNT]; Label::COUNT],
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels with {} predictions", truth.len(), predicted.len())));
        }
        let mut counts = [[0u64; Label::COUNT]; Label::COUNT];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= Label::COUNT || p >= Label::COUNT {
                return Err(Error::Domain(format!("class pair ({t}, {p}) out of range")));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..Label::COUNT).map(|k| self.counts[k][k]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }

    /// `None` when the class was never predicted.
    pub fn precision(&self, class: usize) -> Option<f64> {
        let predicted = self.predicted(class);
        (predicted > 0).then(|| self.counts[class][class] as f64 / predicted as f64)
    }

    /// `None` when the class has no support.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let support = self.support(class);
        (support > 0).then(|| self.counts[class][class] as f64 / support as f64)
    }

    /// Each row divided by its support; rows without support are `None`.
    pub fn row_normalized(&self) -> Vec<Option<Vec<f64>>> {
        (0..Label::COUNT)
            .map(|k| {
                let support = self.support(k);
                (support > 0).then(|| self.counts[k].iter().map(|&c| c as f64 / support as f64).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: Label,
    pub support: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

fn class_scores(cm: &ConfusionMatrix) -> Vec<ClassScores> {
    Label::ALL
        .iter()
        .map(|&label| ClassScores {
            label,
            support: cm.support(label.index()),
            precision: cm.precision(label.index()),
            recall: cm.recall(label.index()),
        })
        .collect()
}

/// Scores restricted to one impairment kind: samples of that kind plus the
/// unimpaired samples, which are what the kind's precision competes against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindBreakdown {
    pub kind: ImpairmentKind,
    pub confusion: ConfusionMatrix,
    pub accuracy: Option<f64>,
    pub classes: Vec<ClassScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model: String,
    pub split_id: String,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// Accuracy over impaired samples only, i.e. attribution accuracy.
    pub impaired_accuracy: Option<f64>,
    pub classes: Vec<ClassScores>,
    pub by_kind: Vec<KindBreakdown>,
}

impl EvalReport {
    pub fn from_predictions(
        model: &str,
        split_id: &str,
        truth: &[usize],
        predicted: &[usize],
        kinds: &[ImpairmentKind],
    ) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Domain("cannot evaluate on an empty test set".into()));
        }
        if kinds.len() != truth.len() {
            return Err(Error::Shape(format!("{} kinds for {} samples", kinds.len(), truth.len())));
        }
        let confusion = ConfusionMatrix::from_pairs(truth, predicted)?;
        let accuracy = confusion.accuracy().expect("non-empty");

        let subset = |keep: &dyn Fn(ImpairmentKind) -> bool| -> Result<ConfusionMatrix> {
            let (t, p): (Vec<usize>, Vec<usize>) = (0..truth.len())
                .filter(|&i| keep(kinds[i]))
                .map(|i| (truth[i], predicted[i]))
                .unzip();
            ConfusionMatrix::from_pairs(&t, &p)
        };
        let impaired_accuracy = subset(&|k| k != ImpairmentKind::None)?.accuracy();
        let by_kind = [ImpairmentKind::PowerRamp, ImpairmentKind::AddDrop]
            .into_iter()
            .map(|kind| {
                let cm = subset(&|k| k == kind || k == ImpairmentKind::None)?;
                Ok(KindBreakdown {
                    kind,
                    accuracy: cm.accuracy(),
                    classes: class_scores(&cm),
                    confusion: cm,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            model: model.to_string(),
            split_id: split_id.to_string(),
            test_size: truth.len(),
            classes: class_scores(&confusion),
            confusion,
            accuracy,
            impaired_accuracy,
            by_kind,
        })
    }

    pub fn kind(&self, kind: ImpairmentKind) -> Option<&KindBreakdown> {
        self.by_kind.iter().find(|b| b.kind == kind)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} on split {} ({} test samples)", self.model, self.split_id, self.test_size);
        let _ = writeln!(out, "accuracy {:.4}", self.accuracy);
        if let Some(a) = self.impaired_accuracy {
            let _ = writeln!(out, "impaired-only accuracy {a:.4}");
        }
        let _ = writeln!(out, "confusion (rows true, columns predicted, row-normalised):");
        for (label, row) in Label::ALL.iter().zip(self.confusion.row_normalized()) {
            let _ = write!(out, "  {:<14}", label.to_string());
            match row {
                Some(r) => r.iter().for_each(|v| {
                    let _ = write!(out, " {v:6.3}");
                }),
                None => out.push_str("  (no support)"),
            }
            out.push('\n');
        }
        let _ = writeln!(out, "  {:<14} {:>9} {:>9} {:>8}", "class", "precision", "recall", "support");
        for c in &self.classes {
            let _ = writeln!(
                out,
                "  {:<14} {:>9} {:>9} {:>8}",
                c.label.to_string(),
                fmt_opt(c.precision),
                fmt_opt(c.recall),
                c.support
            );
        }
        out
    }

    /// Raw counts, one row per true class.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("model,true_class");
        for label in Label::ALL {
            let _ = write!(out, ",pred {label}");
        }
        out.push('\n');
        for (label, row) in Label::ALL.iter().zip(&self.confusion.counts) {
            let _ = write!(out, "{},{label}", self.model);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,subset,class,support,precision,recall\n");
        let mut rows = |subset: &str, classes: &[ClassScores]| {
            for c in classes {
                let _ = writeln!(
                    out,
                    "{},{subset},{},{},{},{}",
                    self.model,
                    c.label,
                    c.support,
                    c.precision.map(|v| v.to_string()).unwrap_or_default(),
                    c.recall.map(|v| v.to_string()).unwrap_or_default()
                );
            }
        };
        rows("all", &self.classes);
        for b in &self.by_kind {
            rows(&b.kind.to_string(), &b.classes);
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into())
}

/// Precision and recall pair, in percent for the reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub class: Label,
    pub base: PrecisionRecall,
    pub cnn: PrecisionRecall,
    /// Values measured on a physical testbed, as fractions, for context.
    pub testbed_base: PrecisionRecall,
    pub testbed_cnn: PrecisionRecall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub split_id: String,
    pub base_accuracy: f64,
    pub cnn_accuracy: f64,
    pub rows: Vec<ComparisonRow>,
}

/// (base precision, cnn precision, base recall, cnn recall) in percent.
const TESTBED: [(f64, f64, f64, f64); 7] = [
    (97.0, 99.0, 95.0, 99.0),
    (24.0, 83.0, 100.0, 100.0),
    (56.0, 100.0, 83.0, 100.0),
    (43.0, 85.0, 100.0, 100.0),
    (62.0, 95.0, 72.0, 93.0),
    (79.0, 94.0, 69.0, 94.0),
    (71.0, 97.0, 82.0, 92.0),
];

fn pr(classes: &[ClassScores], label: Label) -> PrecisionRecall {
    let c = &classes[label.index()];
    PrecisionRecall {
        precision: c.precision,
        recall: c.recall,
    }
}

/// Lines up baseline and CNN scores: the unimpaired row over the whole test
/// set, then each user under each impairment kind.
pub fn compare(base: &EvalReport, cnn: &EvalReport) -> Result<ComparisonTable> {
    if base.split_id != cnn.split_id {
        return Err(Error::SplitMismatch {
            left: base.split_id.clone(),
            right: cnn.split_id.clone(),
        });
    }
    let mut rows = Vec::with_capacity(TESTBED.len());
    let mut push = |scenario: String, class: Label, base_pr, cnn_pr| {
        let (bp, cp, br, cr) = TESTBED[rows.len()];
        rows.push(ComparisonRow {
            scenario,
            class,
            base: base_pr,
            cnn: cnn_pr,
            testbed_base: PrecisionRecall {
                precision: Some(bp / 100.0),
                recall: Some(br / 100.0),
            },
            testbed_cnn: PrecisionRecall {
                precision: Some(cp / 100.0),
                recall: Some(cr / 100.0),
            },
        });
    };
    push(
        "No Impairment".into(),
        Label::NoImpairment,
        pr(&base.classes, Label::NoImpairment),
        pr(&cnn.classes, Label::NoImpairment),
    );
    for kind in [ImpairmentKind::PowerRamp, ImpairmentKind::AddDrop] {
        let (b, c) = match (base.kind(kind), cnn.kind(kind)) {
            (Some(b), Some(c)) => (b, c),
            _ => return Err(Error::Domain(format!("report lacks a {kind} breakdown"))),
        };
        for label in [Label::User1, Label::User2, Label::User3] {
            push(kind.to_string(), label, pr(&b.classes, label), pr(&c.classes, label));
        }
    }
    Ok(ComparisonTable {
        split_id: cnn.split_id.clone(),
        base_accuracy: base.accuracy,
        cnn_accuracy: cnn.accuracy,
        rows,
    })
}

impl ComparisonTable {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "split {}: Base accuracy {:.4}, CNN accuracy {:.4}",
            self.split_id, self.base_accuracy, self.cnn_accuracy
        );
        let _ = writeln!(
            out,
            "{:<14} {:<14} {:>8} {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} {:>8}",
            "scenario", "class", "Base P", "CNN P", "Base R", "CNN R", "tb Base P", "tb CNN P", "tb Base R", "tb CNN R"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:<14} {:>8} {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} {:>8}",
                r.scenario,
                r.class.to_string(),
                fmt_opt(r.base.precision),
                fmt_opt(r.cnn.precision),
                fmt_opt(r.base.recall),
                fmt_opt(r.cnn.recall),
                fmt_opt(r.testbed_base.precision),
                fmt_opt(r.testbed_cnn.precision),
                fmt_opt(r.testbed_base.recall),
                fmt_opt(r.testbed_cnn.recall),
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,class,base_precision,cnn_precision,base_recall,cnn_recall,\
             testbed_base_precision,testbed_cnn_precision,testbed_base_recall,testbed_cnn_recall\n",
        );
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.class,
                f(r.base.precision),
                f(r.cnn.precision),
                f(r.base.recall),
                f(r.cnn.recall),
                f(r.testbed_base.precision),
                f(r.testbed_cnn.precision),
                f(r.testbed_base.recall),
                f(r.testbed_cnn.recall),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use ImpairmentKind::{AddDrop, None as Clean, PowerRamp};

    fn sample_report(name: &str, split: &str) -> EvalReport {
        let truth = [0, 0, 0, 1, 1, 2, 2, 3, 3, 1, 2, 3];
        let pred = [0, 0, 1, 1, 1, 2, 0, 3, 3, 1, 2, 2];
        let kinds = [Clean, Clean, Clean, PowerRamp, PowerRamp, PowerRamp, PowerRamp, PowerRamp, PowerRamp, AddDrop, AddDrop, AddDrop];
        EvalReport::from_predictions(name, split, &truth, &pred, &kinds).unwrap()
    }

    #[test]
    fn hand_counted_scores() {
        let r = sample_report("CNN", "s");
        assert_eq!(r.confusion.counts[0], [2, 1, 0, 0]);
        assert_eq!(r.confusion.trace(), 9);
        assert_eq!(r.accuracy, 9.0 / 12.0);
        assert_eq!(r.classes[0].precision, Some(2.0 / 3.0));
        assert_eq!(r.classes[0].recall, Some(2.0 / 3.0));
        assert_eq!(r.classes[1].precision, Some(3.0 / 4.0));
        assert_eq!(r.classes[3].recall, Some(2.0 / 3.0));
        assert_eq!(r.impaired_accuracy, Some(7.0 / 9.0));

        let ramp = r.kind(PowerRamp).unwrap();
        assert_eq!(ramp.confusion.total(), 9);
        assert_eq!(ramp.classes[1].precision, Some(2.0 / 3.0));
        assert_eq!(ramp.classes[2].recall, Some(0.5));
        let add = r.kind(AddDrop).unwrap();
        assert_eq!(add.confusion.total(), 6);
        assert_eq!(add.classes[3].recall, Some(0.0));
        assert_eq!(add.classes[2].precision, Some(0.5));
    }

    #[test]
    fn perfect_predictions_give_identity() {
        let truth = [0, 1, 2, 3, 0, 1, 2, 3];
        let r = EvalReport::from_predictions("CNN", "s", &truth, &truth, &[Clean; 8]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for (k, row) in r.confusion.row_normalized().into_iter().enumerate() {
            let row = row.unwrap();
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if j == k { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(r.confusion_csv().lines().count(), 5);
    }

    #[test]
    fn identical_models_give_identical_columns() {
        let r = sample_report("CNN", "s");
        let table = compare(&r, &r).unwrap();
        assert!(table.rows.iter().all(|row| row.base == row.cnn));
    }

    #[test]
    fn empty_rows_and_columns_are_none() {
        let cm = ConfusionMatrix::from_pairs(&[0, 0, 1], &[0, 1, 1]).unwrap();
        assert_eq!(cm.precision(3), None);
        assert_eq!(cm.recall(2), None);
        let rows = cm.row_normalized();
        assert!(rows[2].is_none() && rows[3].is_none());
        assert_eq!(rows[0].as_ref().unwrap(), &vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn empty_test_set_refused() {
        assert!(EvalReport::from_predictions("CNN", "s", &[], &[], &[]).is_err());
    }

    #[test]
    fn comparison_layout() {
        let table = compare(&sample_report("MLP", "s"), &sample_report("CNN", "s")).unwrap();
        assert_eq!(table.rows.len(), 7);
        assert_eq!(table.rows[0].class, Label::NoImpairment);
        assert_eq!(table.rows.iter().filter(|r| r.scenario == "power-ramp").count(), 3);
        assert_eq!(table.rows.iter().filter(|r| r.scenario == "add-drop").count(), 3);
        let text = table.render_text();
        assert!(text.contains("Base P") && text.contains("CNN R"));
        assert_eq!(table.to_csv().lines().count(), 8);
    }

    #[test]
    fn comparison_across_splits_refused() {
        let err = compare(&sample_report("MLP", "a"), &sample_report("CNN", "b")).unwrap_err();
        assert!(matches!(err, Error::SplitMismatch { .. }));
    }

    proptest! {
        #[test]
        fn counts_are_consistent(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..200)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let cm = ConfusionMatrix::from_pairs(&t, &p).unwrap();
            prop_assert_eq!(cm.total() as usize, t.len());
            let hits = t.iter().zip(&p).filter(|(a, b)| a == b).count();
            prop_assert_eq!(cm.accuracy().unwrap(), hits as f64 / t.len() as f64);
            for row in cm.row_normalized().into_iter().flatten() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
