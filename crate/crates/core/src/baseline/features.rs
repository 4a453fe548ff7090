use serde::{Deserialize, Serialize};

/// Hashed character n-gram counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub buckets: usize,
    /// `(bucket, count)` pairs sorted by bucket, counts ≥ 1.
    pub entries: Vec<(u32, u32)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub buckets: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            n_min: 2,
            n_max: 5,
            buckets: 1 << 18,
        }
    }
}

// FNV-1a, stable across platforms and releases unlike std's hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl FeaturizerConfig {
    pub fn featurize(&self, text: &str) -> FeatureVector {
        assert!(self.n_min >= 1 && self.n_min <= self.n_max, "bad n-gram range");
        assert!(self.buckets >= 1 && self.buckets <= u32::MAX as usize);
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(text.len()))
            .collect();
        let chars = bounds.len() - 1;
        let mask = self.buckets.is_power_of_two().then(|| self.buckets as u64 - 1);

        let mut hits: Vec<u32> = Vec::new();
        for n in self.n_min..=self.n_max.min(chars) {
            for start in 0..=chars - n {
                let h = fnv1a(&text.as_bytes()[bounds[start]..bounds[start + n]]);
                let bucket = match mask {
                    Some(m) => h & m,
                    None => h % self.buckets as u64,
                };
                hits.push(bucket as u32);
            }
        }
        hits.sort_unstable();

        let mut entries: Vec<(u32, u32)> = Vec::new();
        for b in hits {
            match entries.last_mut() {
                Some((last, count)) if *last == b => *count += 1,
                _ => entries.push((b, 1)),
            }
        }
        FeatureVector {
            buckets: self.buckets,
            entries,
        }
    }
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(bucket, value)` pairs scaled to unit Euclidean norm, the input the
    /// linear model sees.
    pub fn normalized(&self) -> Vec<(u32, f64)> {
        let norm = self
            .entries
            .iter()
            .map(|&(_, c)| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt();
        self.entries
            .iter()
            .map(|&(b, c)| (b, f64::from(c) / norm))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bigrams(buckets: usize) -> FeaturizerConfig {
        FeaturizerConfig {
            n_min: 2,
            n_max: 2,
            buckets,
        }
    }

    #[test]
    fn single_bigram() {
        let v = bigrams(1 << 10).featurize("ab");
        assert_eq!(v.entries.len(), 1);
        assert_eq!(v.entries[0].1, 1);
    }

    #[test]
    fn overlapping_bigrams_are_counted() {
        let v = bigrams(1 << 10).featurize("aaa");
        assert_eq!(v.entries.len(), 1);
        assert_eq!(v.entries[0].1, 2);
    }

    #[test]
    fn empty_and_short_texts() {
        let f = FeaturizerConfig::default();
        assert!(f.featurize("").is_empty());
        assert!(f.featurize("a").is_empty());
        assert!(f.normalized_is_unit("hallo welt"));
    }

    #[test]
    fn ngram_total_matches_positions() {
        // "hallo" has 4 bigrams, 3 trigrams, 2 four-grams, 1 five-gram
        let v = FeaturizerConfig::default().featurize("hallo");
        assert_eq!(v.entries.iter().map(|e| e.1).sum::<u32>(), 10);
        // multi-byte characters are one position each
        let v = FeaturizerConfig::default().featurize("öäü");
        assert_eq!(v.entries.iter().map(|e| e.1).sum::<u32>(), 3);
    }

    #[test]
    fn deterministic_and_in_range() {
        let f = FeaturizerConfig {
            buckets: 1000,
            ..FeaturizerConfig::default()
        };
        let a = f.featurize("Das ist ein Test ☕");
        assert_eq!(a, f.featurize("Das ist ein Test ☕"));
        assert!(a.entries.iter().all(|&(b, c)| (b as usize) < 1000 && c >= 1));
        assert!(a.entries.windows(2).all(|w| w[0].0 < w[1].0));
    }

    impl FeaturizerConfig {
        fn normalized_is_unit(&self, text: &str) -> bool {
            let n: f64 = self.featurize(text).normalized().iter().map(|e| e.1 * e.1).sum();
            (n - 1.0).abs() < 1e-12
        }
    }
}
