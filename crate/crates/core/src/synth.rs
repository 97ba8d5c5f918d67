//! Synthetic multiple-choice datasets with planted cues of controlled
//! reliability, plus simulated LLM answer records with known policies.
//!
//! With reliability `rho`, a prompt carries a class-revealing cue token
//! with probability `rho`, so a cue-reading classifier has Bayes accuracy
//! `rho + (1 - rho) / k` and uniform-chance kappa exactly `rho`. The
//! bigram variant splits the cue across two adjacent tokens whose pairing
//! (not either token alone) encodes the label, which unigram-only feature
//! specs cannot see.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BenchmarkDataset, CorpusError, Instance, LlmRecord, LlmResultSet};
use crate::metrics::kappa_from_accuracy;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {reason}")]
    BadConfig { reason: String },
    #[error("vocabulary size {vocab_size} cannot reserve {needed} cue tokens")]
    VocabTooSmall { vocab_size: usize, needed: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CueKind {
    /// One token `cue<c>` reveals class `c` directly.
    Unigram,
    /// An adjacent pair (`zqa<i>`, `zqb<j>`) encodes class `(i+j) mod k`;
    /// each half is uniform over classes on its own.
    Bigram,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub name: String,
    pub k: usize,
    pub n: usize,
    pub vocab_size: usize,
    pub prompt_len: usize,
    pub rho: f64,
    pub cue: CueKind,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(name: &str, k: usize, n: usize, rho: f64, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            k,
            n,
            vocab_size: 30,
            prompt_len: 12,
            rho,
            cue: CueKind::Unigram,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.k < 2 {
            return Err(SynthError::BadConfig {
                reason: format!("k must be >= 2, got {}", self.k),
            });
        }
        if self.n < 1 {
            return Err(SynthError::BadConfig {
                reason: "n must be >= 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(SynthError::BadConfig {
                reason: format!("rho must be in [0,1], got {}", self.rho),
            });
        }
        if self.prompt_len == 0 {
            return Err(SynthError::BadConfig {
                reason: "prompt_len must be >= 1".into(),
            });
        }
        let needed = match self.cue {
            CueKind::Unigram => self.k,
            CueKind::Bigram => 2 * self.k,
        };
        if self.vocab_size <= needed {
            return Err(SynthError::VocabTooSmall {
                vocab_size: self.vocab_size,
                needed,
            });
        }
        Ok(())
    }
}

/// Which instances carry a planted cue, aligned with dataset order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CueMap {
    pub cued: Vec<bool>,
}

impl CueMap {
    pub fn is_cued(&self, position: usize) -> bool {
        self.cued[position]
    }

    pub fn cued_fraction(&self) -> f64 {
        self.cued.iter().filter(|&&c| c).count() as f64 / self.cued.len().max(1) as f64
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic letter-only pseudo-word for a filler index.
fn filler_word(index: usize) -> String {
    let syllable_count = CONSONANTS.len() * VOWELS.len();
    let syllable = |i: usize| {
        let c = CONSONANTS[i / VOWELS.len() % CONSONANTS.len()] as char;
        let v = VOWELS[i % VOWELS.len()] as char;
        format!("{c}{v}")
    };
    let mut word = syllable(index % syllable_count);
    word.push_str(&syllable((index / syllable_count) % syllable_count));
    if index >= syllable_count * syllable_count {
        word.push_str(&syllable(index / (syllable_count * syllable_count)));
    }
    word
}

pub fn unigram_cue_token(class: usize) -> String {
    format!("cue{class}")
}

pub fn bigram_cue_pair(i: usize, j: usize) -> (String, String) {
    (format!("zqa{i}"), format!("zqb{j}"))
}

/// Generates a dataset of uniform random filler prompts with a planted
/// cue inserted at a uniform position with probability `rho`; gold labels
/// are uniform over `k`. Deterministic per seed.
pub fn generate(config: &SynthConfig) -> Result<(BenchmarkDataset, CueMap), SynthError> {
    config.validate()?;
    let n_cues = match config.cue {
        CueKind::Unigram => config.k,
        CueKind::Bigram => 2 * config.k,
    };
    let fillers: Vec<String> = (0..config.vocab_size - n_cues).map(filler_word).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut instances = Vec::with_capacity(config.n);
    let mut cued_flags = Vec::with_capacity(config.n);

    for idx in 0..config.n {
        let gold = rng.random_range(0..config.k);
        let cued = rng.random_bool(config.rho);
        let mut tokens: Vec<String> = (0..config.prompt_len)
            .map(|_| fillers[rng.random_range(0..fillers.len())].clone())
            .collect();
        if cued {
            let at = rng.random_range(0..=tokens.len());
            match config.cue {
                CueKind::Unigram => tokens.insert(at, unigram_cue_token(gold)),
                CueKind::Bigram => {
                    let i = rng.random_range(0..config.k);
                    let j = (gold + config.k - i) % config.k;
                    let (a, b) = bigram_cue_pair(i, j);
                    tokens.insert(at, b);
                    tokens.insert(at, a);
                }
            }
        }
        instances.push(Instance {
            id: format!("{}-{idx:05}", config.name),
            prompt: tokens.join(" "),
            gold,
        });
        cued_flags.push(cued);
    }

    let label_space = (0..config.k).map(|c| format!("choice{c}")).collect();
    let dataset = BenchmarkDataset::new(config.name.clone(), label_space, instances)?;
    Ok((dataset, CueMap { cued: cued_flags }))
}

/// Uniform-chance kappa of the Bayes cue-reading classifier: accuracy
/// `rho + (1 - rho) / k` corrected for chance `1/k`, which simplifies to
/// `rho`.
pub fn expected_kappa(rho: f64, k: usize) -> f64 {
    let bayes_accuracy = rho + (1.0 - rho) / k as f64;
    kappa_from_accuracy(bayes_accuracy, k)
}

/// Per-instance answer policy of a simulated LLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SimPolicy {
    /// Correct with probability `follow` on cue-bearing instances and
    /// `background` elsewhere.
    CueFollower { follow: f64, background: f64 },
    /// Correct with probability `accuracy` everywhere.
    Capability { accuracy: f64 },
}

impl SimPolicy {
    fn validate(&self) -> Result<(), SynthError> {
        let probs: Vec<f64> = match *self {
            SimPolicy::CueFollower { follow, background } => vec![follow, background],
            SimPolicy::Capability { accuracy } => vec![accuracy],
        };
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::BadConfig {
                    reason: format!("policy probability {p} outside [0,1]"),
                });
            }
        }
        Ok(())
    }

    fn p_correct(&self, cued: bool) -> f64 {
        match *self {
            SimPolicy::CueFollower { follow, background } => {
                if cued {
                    follow
                } else {
                    background
                }
            }
            SimPolicy::Capability { accuracy } => accuracy,
        }
    }
}

/// Simulates one model's answer records over every instance of the
/// dataset. Deterministic per seed.
pub fn simulate_llm(
    dataset: &BenchmarkDataset,
    cue_map: &CueMap,
    policy: &SimPolicy,
    model: &str,
    family: &str,
    seed: u64,
) -> Result<LlmResultSet, SynthError> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = dataset
        .instances
        .iter()
        .enumerate()
        .map(|(idx, inst)| LlmRecord {
            model: model.to_string(),
            family: family.to_string(),
            dataset: dataset.name.clone(),
            instance_id: inst.id.clone(),
            correct: rng.random_bool(policy.p_correct(cue_map.is_cued(idx))),
        })
        .collect();
    Ok(LlmResultSet::from_records(records)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::make_splits;
    use crate::tokenize::word_tokenize;

    #[test]
    fn rho_zero_has_no_cues() {
        let (dataset, cues) = generate(&SynthConfig::new("s", 3, 200, 0.0, 1)).unwrap();
        assert_eq!(cues.cued_fraction(), 0.0);
        for inst in &dataset.instances {
            assert!(!inst.prompt.contains("cue"), "{}", inst.prompt);
        }
    }

    #[test]
    fn rho_one_every_prompt_has_matching_cue() {
        let (dataset, cues) = generate(&SynthConfig::new("s", 3, 200, 1.0, 2)).unwrap();
        assert_eq!(cues.cued_fraction(), 1.0);
        for inst in &dataset.instances {
            let tokens = word_tokenize(&inst.prompt).tokens;
            let cue_tokens: Vec<&String> =
                tokens.iter().filter(|t| t.starts_with("cue")).collect();
            assert_eq!(cue_tokens.len(), 1);
            assert_eq!(*cue_tokens[0], unigram_cue_token(inst.gold));
        }
    }

    #[test]
    fn rho_half_concentrates() {
        let (_, cues) = generate(&SynthConfig::new("s", 2, 10_000, 0.5, 3)).unwrap();
        assert!((cues.cued_fraction() - 0.5).abs() < 0.02);
    }

    #[test]
    fn prompts_retokenize_to_their_tokens() {
        let (dataset, _) = generate(&SynthConfig::new("s", 2, 50, 0.8, 4)).unwrap();
        for inst in &dataset.instances {
            let tokens = word_tokenize(&inst.prompt).tokens;
            assert_eq!(tokens.join(" "), inst.prompt);
        }
    }

    #[test]
    fn bigram_cue_pair_encodes_gold() {
        let mut config = SynthConfig::new("s", 4, 300, 1.0, 5);
        config.cue = CueKind::Bigram;
        let (dataset, _) = generate(&config).unwrap();
        for inst in &dataset.instances {
            let tokens = word_tokenize(&inst.prompt).tokens;
            let a_pos = tokens.iter().position(|t| t.starts_with("zqa")).unwrap();
            let i: usize = tokens[a_pos][3..].parse().unwrap();
            let b = &tokens[a_pos + 1];
            assert!(b.starts_with("zqb"), "pair must be adjacent");
            let j: usize = b[3..].parse().unwrap();
            assert_eq!((i + j) % 4, inst.gold);
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let config = SynthConfig::new("s", 2, 100, 0.5, 77);
        let (a, ca) = generate(&config).unwrap();
        let (b, cb) = generate(&config).unwrap();
        assert_eq!(a.instances, b.instances);
        assert_eq!(ca.cued, cb.cued);
    }

    #[test]
    fn vocab_too_small_rejected() {
        let mut config = SynthConfig::new("s", 4, 10, 0.5, 1);
        config.vocab_size = 4;
        assert!(matches!(
            generate(&config),
            Err(SynthError::VocabTooSmall { needed: 4, .. })
        ));
        config.cue = CueKind::Bigram;
        config.vocab_size = 8;
        assert!(matches!(
            generate(&config),
            Err(SynthError::VocabTooSmall { needed: 8, .. })
        ));
    }

    #[test]
    fn generated_dataset_splits_cleanly() {
        let (dataset, _) = generate(&SynthConfig::new("s", 3, 120, 0.7, 6)).unwrap();
        let splits = make_splits(&dataset, [0.6, 0.2, 0.2], 9, true).unwrap();
        let total = splits.train.len() + splits.validation.len() + splits.test.len();
        assert_eq!(total, 120);
    }

    // expected kappa closed form: Bayes accuracy rho + (1-rho)/k
    #[test]
    fn expected_kappa_closed_form() {
        assert_eq!(expected_kappa(1.0, 2), 1.0);
        assert_eq!(expected_kappa(1.0, 7), 1.0);
        assert_eq!(expected_kappa(0.0, 3), 0.0);
        // rho=0.6, k=2: accuracy 0.8, kappa (0.8-0.5)/0.5 = 0.6
        assert!((expected_kappa(0.6, 2) - 0.6).abs() < 1e-12);
        for k in [2usize, 4, 5] {
            for r in [0.1, 0.5, 0.9] {
                assert!((expected_kappa(r, k) - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn capability_one_is_always_correct() {
        let (dataset, cues) = generate(&SynthConfig::new("s", 2, 100, 0.5, 7)).unwrap();
        let results = simulate_llm(
            &dataset,
            &cues,
            &SimPolicy::Capability { accuracy: 1.0 },
            "perfect",
            "famA",
            1,
        )
        .unwrap();
        assert_eq!(results.records.len(), 100);
        assert!(results.records.iter().all(|r| r.correct));
    }

    #[test]
    fn simulated_rates_within_three_sigma() {
        let (dataset, cues) = generate(&SynthConfig::new("s", 2, 4000, 0.6, 8)).unwrap();
        let results = simulate_llm(
            &dataset,
            &cues,
            &SimPolicy::CueFollower {
                follow: 0.95,
                background: 0.5,
            },
            "m",
            "f",
            2,
        )
        .unwrap();
        let mut hits = [0usize; 2];
        let mut totals = [0usize; 2];
        for (idx, record) in results.records.iter().enumerate() {
            let _ = idx;
            let pos = dataset.position(&record.instance_id).unwrap();
            let group = usize::from(cues.is_cued(pos));
            totals[group] += 1;
            hits[group] += usize::from(record.correct);
        }
        for (group, p) in [(1usize, 0.95f64), (0, 0.5)] {
            let n = totals[group] as f64;
            let rate = hits[group] as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            assert!(
                (rate - p).abs() <= 3.0 * sigma.max(1e-3),
                "group {group}: rate {rate} vs {p}"
            );
        }
    }

    #[test]
    fn simulation_deterministic_per_seed() {
        let (dataset, cues) = generate(&SynthConfig::new("s", 2, 50, 0.5, 9)).unwrap();
        let policy = SimPolicy::Capability { accuracy: 0.7 };
        let a = simulate_llm(&dataset, &cues, &policy, "m", "f", 5).unwrap();
        let b = simulate_llm(&dataset, &cues, &policy, "m", "f", 5).unwrap();
        assert_eq!(a, b);
        let c = simulate_llm(&dataset, &cues, &policy, "m", "f", 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn filler_words_are_letters_only_and_distinct() {
        let words: Vec<String> = (0..500).map(filler_word).collect();
        let unique: std::collections::HashSet<&String> = words.iter().collect();
        assert_eq!(unique.len(), 500);
        for w in &words {
            assert!(w.chars().all(|c| c.is_ascii_lowercase()));
        }
    }
}
