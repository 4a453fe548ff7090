//! The shared-task F1 score.
//!
//! Precision and recall are computed for the positive *and* the negative
//! class and averaged over the two; F1 is the harmonic mean of the averaged
//! precision and averaged recall. The macro score is the plain mean of the
//! three per-task F1 values. This is not the usual macro-F1 over classes.

use serde::{Deserialize, Serialize};

use crate::{Error, LabelSet, Result, Task};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    #[inline]
    pub fn record(&mut self, gold: bool, pred: bool) {
        match (gold, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// The same counts with positive and negative classes exchanged.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(gold: &[bool], pred: &[bool]) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "gold and predicted labels",
            left: gold.len(),
            right: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::config("cannot score an empty label list"));
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        m.record(g, p);
    }
    Ok(m)
}

/// `num / den`, or 0 when the denominator is 0.
#[inline]
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Shared-task F1 of one binary task.
///
/// Precision and recall are averaged over the classes that occur in the
/// gold labels or the predictions; a class absent from both (e.g. no
/// positives anywhere) takes no part. A ratio with a zero denominator
/// contributes 0, and F1 is 0 when both averages are 0.
pub fn germeval_f1(m: &ConfusionMatrix) -> f64 {
    let positive_seen = m.tp + m.fp + m.fn_ > 0;
    let negative_seen = m.tn + m.fp + m.fn_ > 0;
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut classes = 0.0;
    if positive_seen {
        precision += ratio(m.tp, m.tp + m.fp);
        recall += ratio(m.tp, m.tp + m.fn_);
        classes += 1.0;
    }
    if negative_seen {
        precision += ratio(m.tn, m.tn + m.fn_);
        recall += ratio(m.tn, m.tn + m.fp);
        classes += 1.0;
    }
    if classes == 0.0 {
        return 0.0;
    }
    let (precision, recall) = (precision / classes, recall / classes);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn macro_f1(f1s: [f64; 3]) -> f64 {
    (f1s[0] + f1s[1] + f1s[2]) / 3.0
}

/// Three decimals, the precision scores are reported at.
pub fn display(score: f64) -> String {
    format!("{score:.3}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub macro_f1: f64,
    pub f1_toxic: f64,
    pub f1_engaging: f64,
    pub f1_fact: f64,
    pub confusion: [ConfusionMatrix; 3],
}

impl EvalReport {
    pub fn from_confusion(confusion: [ConfusionMatrix; 3]) -> EvalReport {
        let f1 = confusion.map(|m| germeval_f1(&m));
        EvalReport {
            macro_f1: macro_f1(f1),
            f1_toxic: f1[0],
            f1_engaging: f1[1],
            f1_fact: f1[2],
            confusion,
        }
    }

    pub fn f1(&self, task: Task) -> f64 {
        match task {
            Task::Toxic => self.f1_toxic,
            Task::Engaging => self.f1_engaging,
            Task::Fact => self.f1_fact,
        }
    }

    pub const CSV_HEADER: [&'static str; 4] = ["macro_f1", "f1_toxic", "f1_engaging", "f1_fact"];

    /// Full-precision record in [`Self::CSV_HEADER`] order.
    pub fn csv_row(&self) -> [String; 4] {
        [self.macro_f1, self.f1_toxic, self.f1_engaging, self.f1_fact].map(|x| x.to_string())
    }

    /// One line in table layout, e.g. `0.726 | 0.716 | 0.699 | 0.763`.
    pub fn summary_line(&self) -> String {
        [self.macro_f1, self.f1_toxic, self.f1_engaging, self.f1_fact]
            .map(display)
            .join(" | ")
    }
}

pub fn evaluate(gold: &[LabelSet], pred: &[LabelSet]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "gold and predicted label sets",
            left: gold.len(),
            right: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::config("cannot score an empty label list"));
    }
    let mut confusion = [ConfusionMatrix::default(); 3];
    for (g, p) in gold.iter().zip(pred) {
        for (k, m) in confusion.iter_mut().enumerate() {
            m.record(g.0[k], p.0[k]);
        }
    }
    Ok(EvalReport::from_confusion(confusion))
}

/// Mean and population standard deviation, both NaN for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    match values.first() {
        None => return (f64::NAN, f64::NAN),
        Some(&first) if values.iter().all(|&v| v == first) => return (first, 0.0),
        _ => {}
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    #[test]
    fn one_of_each() {
        let m = confusion(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(m, cm(1, 1, 1, 1));
    }

    #[test]
    fn confusion_rejects_mismatch() {
        assert!(matches!(
            confusion(&[true], &[true, false]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn perfect_and_inverted() {
        assert_eq!(germeval_f1(&cm(3, 0, 0, 5)), 1.0);
        assert_eq!(germeval_f1(&cm(0, 4, 2, 0)), 0.0);
    }

    #[test]
    fn hand_computed_value() {
        // P_pos = R_pos = 2/3, P_neg = R_neg = 6/7, both averages 16/21
        let f = germeval_f1(&cm(2, 1, 1, 6));
        assert!((f - 16.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_left_out() {
        assert_eq!(germeval_f1(&cm(0, 0, 0, 10)), 1.0);
        assert_eq!(germeval_f1(&cm(1, 0, 0, 0)), 1.0);
        // negatives never predicted: their precision has a zero denominator
        // and contributes 0, their recall is 0
        let f = germeval_f1(&cm(3, 2, 0, 0));
        let (p, r) = ((3.0 / 5.0 + 0.0) / 2.0, (1.0 + 0.0) / 2.0);
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-15);
    }

    #[test]
    fn empty_matrix_scores_zero() {
        assert_eq!(germeval_f1(&ConfusionMatrix::default()), 0.0);
    }

    #[test]
    fn macro_average() {
        assert_eq!(macro_f1([1.0, 1.0, 1.0]), 1.0);
        assert_eq!(display(macro_f1([0.716, 0.699, 0.763])), "0.726");
        assert_eq!(display(macro_f1([0.717, 0.697, 0.768])), "0.727");
    }

    #[test]
    fn evaluate_identity() {
        let gold = vec![LabelSet::new(true, false, true)];
        let r = evaluate(&gold, &gold).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.summary_line(), "1.000 | 1.000 | 1.000 | 1.000");
    }

    #[test]
    fn mean_std_two_points() {
        let (m, s) = mean_std(&[0.6, 0.8]);
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7, 0.7, 0.7]), (0.7, 0.0));
    }
}
