use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, FeaturizerConfig};
use crate::table::{Layout, ProbabilityTable};
use crate::{seed, Error, LabelSet, Result, Task};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` inside the losses.
pub const CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "task")]
pub enum HeadKind {
    /// Three independent logistic outputs.
    MultiLabel,
    /// Two outputs (negative, positive) under a softmax, for one task.
    SingleLabel(Task),
}

impl HeadKind {
    pub fn outputs(self) -> usize {
        match self {
            HeadKind::MultiLabel => 3,
            HeadKind::SingleLabel(_) => 2,
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            HeadKind::MultiLabel => Layout::MultiLabel,
            HeadKind::SingleLabel(t) => Layout::SingleLabel(t),
        }
    }
}

/// A linear classifier over hashed n-gram features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub head: HeadKind,
    pub features: FeaturizerConfig,
    pub seed: u64,
    /// Bucket-major weights (`buckets × outputs`) followed by one bias per output.
    pub params: Vec<f64>,
}

/// A training or evaluation sample: its features and gold labels.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub features: &'a FeatureVector,
    pub labels: LabelSet,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    pub fn zeros(head: HeadKind, features: FeaturizerConfig) -> LinearModel {
        LinearModel {
            head,
            features,
            seed: 0,
            params: vec![0.0; (features.buckets + 1) * head.outputs()],
        }
    }

    /// Weights uniform in `[-1/sqrt(B), 1/sqrt(B)]`, biases zero.
    pub fn init(head: HeadKind, features: FeaturizerConfig, seed: u64) -> LinearModel {
        let mut model = LinearModel::zeros(head, features);
        model.seed = seed;
        let scale = 1.0 / (features.buckets as f64).sqrt();
        let mut rng = seed::stream(seed, &[0x1417]);
        let n_weights = features.buckets * head.outputs();
        for w in &mut model.params[..n_weights] {
            *w = rng.gen_range(-scale..=scale);
        }
        model
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs()
    }

    fn bias_offset(&self) -> usize {
        self.features.buckets * self.outputs()
    }

    fn logits(&self, x: &[(u32, f64)], out: &mut [f64]) {
        let o = self.outputs();
        out.copy_from_slice(&self.params[self.bias_offset()..]);
        for &(b, v) in x {
            let row = &self.params[b as usize * o..(b as usize + 1) * o];
            for (acc, w) in out.iter_mut().zip(row) {
                *acc += v * w;
            }
        }
    }

    /// Output probabilities: `[p_toxic, p_engaging, p_fact]` for multi-label
    /// heads, `[p_negative, p_positive]` for single-label heads.
    fn probabilities(&self, x: &[(u32, f64)], out: &mut [f64]) {
        self.logits(x, out);
        match self.head {
            HeadKind::MultiLabel => out.iter_mut().for_each(|z| *z = sigmoid(*z)),
            HeadKind::SingleLabel(_) => {
                let m = out[0].max(out[1]);
                let e0 = (out[0] - m).exp();
                let e1 = (out[1] - m).exp();
                out[0] = e0 / (e0 + e1);
                out[1] = e1 / (e0 + e1);
            }
        }
    }

    pub fn predict_one(&self, features: &FeatureVector) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        self.probabilities(&features.normalized(), &mut out);
        out
    }

    /// Table row for one sample: three probabilities, or the positive-class
    /// probability for single-label heads.
    pub fn table_row(&self, features: &FeatureVector) -> Vec<f64> {
        let p = self.predict_one(features);
        match self.head {
            HeadKind::MultiLabel => p,
            HeadKind::SingleLabel(_) => vec![p[1]],
        }
    }

    /// Predicts every `(sample_id, features)` pair into a probability table.
    pub fn predict_proba<'a>(
        &self,
        model_id: &str,
        samples: impl IntoIterator<Item = (u64, &'a FeatureVector)>,
    ) -> ProbabilityTable {
        let mut table = ProbabilityTable::new(model_id, self.head.layout());
        for (id, f) in samples {
            table.push(id, &self.table_row(f));
        }
        table
    }

    /// Mean loss over the batch; writes the gradient (same shape as
    /// `params`) into `grad`.
    ///
    /// Multi-label: binary cross-entropy averaged over the three tasks.
    /// Single-label: negative log-likelihood of the gold class.
    pub fn loss_and_gradient_into(&self, batch: &[Example], grad: &mut [f64]) -> f64 {
        assert!(!batch.is_empty(), "empty batch");
        assert_eq!(grad.len(), self.params.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let o = self.outputs();
        let bias = self.bias_offset();
        let n = batch.len() as f64;
        let mut p = vec![0.0; o];
        let mut dz = vec![0.0; o];
        let mut loss = 0.0;
        for ex in batch {
            let x = ex.features.normalized();
            self.probabilities(&x, &mut p);
            match self.head {
                HeadKind::MultiLabel => {
                    for k in 0..3 {
                        let y = if ex.labels.0[k] { 1.0 } else { 0.0 };
                        let q = p[k].clamp(CLAMP, 1.0 - CLAMP);
                        loss -= (y * q.ln() + (1.0 - y) * (1.0 - q).ln()) / 3.0;
                        dz[k] = (p[k] - y) / (3.0 * n);
                    }
                }
                HeadKind::SingleLabel(task) => {
                    let gold = usize::from(ex.labels.get(task));
                    loss -= p[gold].clamp(CLAMP, 1.0 - CLAMP).ln();
                    for k in 0..2 {
                        let y = if k == gold { 1.0 } else { 0.0 };
                        dz[k] = (p[k] - y) / n;
                    }
                }
            }
            for &(b, v) in &x {
                let row = &mut grad[b as usize * o..(b as usize + 1) * o];
                for (g, d) in row.iter_mut().zip(&dz) {
                    *g += v * d;
                }
            }
            for (g, d) in grad[bias..].iter_mut().zip(&dz) {
                *g += d;
            }
        }
        loss / n
    }

    pub fn loss_and_gradient(&self, batch: &[Example]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.loss_and_gradient_into(batch, &mut grad);
        (loss, grad)
    }

    pub fn loss(&self, batch: &[Example]) -> f64 {
        self.loss_and_gradient(batch).0
    }

    /// Label decisions at probability 0.5, used for early stopping. Tasks a
    /// single-label head does not predict are left negative.
    pub fn decide(&self, features: &FeatureVector) -> LabelSet {
        let p = self.predict_one(features);
        match self.head {
            HeadKind::MultiLabel => LabelSet([p[0] >= 0.5, p[1] >= 0.5, p[2] >= 0.5]),
            HeadKind::SingleLabel(task) => {
                let mut l = LabelSet::default();
                l.set(task, p[1] >= p[0]);
                l
            }
        }
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"GEVLM\0\0\0";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    head: HeadKind,
    features: FeaturizerConfig,
    seed: u64,
    params: usize,
}

impl LinearModel {
    /// Binary snapshot: magic, version, JSON header, little-endian f64 params.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&SnapshotHeader {
            head: self.head,
            features: self.features,
            seed: self.seed,
            params: self.params.len(),
        })?;
        let mut buf = Vec::with_capacity(16 + header.len() + self.params.len() * 8);
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LinearModel> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::config(format!("{}: {m}", path.display()));
        if bytes.len() < 16 || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(bad("not a model snapshot"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(bad(&format!("unsupported snapshot version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header_end = 16 + header_len;
        let header: SnapshotHeader = serde_json::from_slice(
            bytes.get(16..header_end).ok_or_else(|| bad("truncated header"))?,
        )?;
        let body = &bytes[header_end..];
        if header.params != (header.features.buckets + 1) * header.head.outputs()
            || body.len() != header.params * 8
        {
            return Err(bad("parameter count does not match header"));
        }
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(LinearModel {
            head: header.head,
            features: header.features,
            seed: header.seed,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> FeaturizerConfig {
        FeaturizerConfig {
            n_min: 1,
            n_max: 3,
            buckets: 64,
        }
    }

    #[test]
    fn zero_weights_give_ln2() {
        let f = tiny();
        let feats: Vec<FeatureVector> = ["hallo", "welt", "xy"].iter().map(|t| f.featurize(t)).collect();
        let labels = [
            LabelSet::new(true, false, true),
            LabelSet::new(false, false, false),
            LabelSet::new(true, true, true),
        ];
        let batch: Vec<Example> = feats
            .iter()
            .zip(labels)
            .map(|(features, labels)| Example { features, labels })
            .collect();
        for head in [HeadKind::MultiLabel, HeadKind::SingleLabel(Task::Engaging)] {
            let m = LinearModel::zeros(head, f);
            assert!((m.loss(&batch) - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weight_predictions_are_half() {
        let f = tiny();
        let x = f.featurize("irgendwas");
        assert_eq!(LinearModel::zeros(HeadKind::MultiLabel, f).predict_one(&x), [0.5; 3]);
        assert_eq!(
            LinearModel::zeros(HeadKind::SingleLabel(Task::Fact), f).predict_one(&x),
            [0.5, 0.5]
        );
    }

    #[test]
    fn softmax_pairs_sum_to_one() {
        let f = tiny();
        let m = LinearModel::init(HeadKind::SingleLabel(Task::Toxic), f, 3);
        for t in ["a", "bb", "ccc ddd", "☕☕"] {
            let p = m.predict_one(&f.featurize(t));
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn init_scale_and_seed() {
        let f = tiny();
        let a = LinearModel::init(HeadKind::MultiLabel, f, 1);
        let bound = 1.0 / 8.0;
        assert!(a.params[..64 * 3].iter().all(|w| w.abs() <= bound));
        assert!(a.params[64 * 3..].iter().all(|&b| b == 0.0));
        assert_eq!(a, LinearModel::init(HeadKind::MultiLabel, f, 1));
        assert_ne!(a, LinearModel::init(HeadKind::MultiLabel, f, 2));
    }

    #[test]
    fn snapshot_round_trip() {
        let m = LinearModel::init(HeadKind::SingleLabel(Task::Engaging), tiny(), 11);
        let f = tempfile::NamedTempFile::new().unwrap();
        m.save(f.path()).unwrap();
        assert_eq!(LinearModel::load(f.path()).unwrap(), m);
        std::fs::write(f.path(), b"garbage").unwrap();
        assert!(LinearModel::load(f.path()).is_err());
    }
}
