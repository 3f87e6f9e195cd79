//! Deterministic, cross-platform pseudo-randomness.
//!
//! Every random object in the protocol — stage seeds, uniform values,
//! permutations, batch divisions, audit samples — derives from an explicit
//! 32-byte seed through SHA-256 in counter mode: `hash(seed || LE64(i))`.
//! Both parties of the protocol run the same derivations and obtain
//! bit-identical results, which is what makes exact re-execution checks
//! possible.
//!
//! Raw 32-byte hashes are used where a seed is needed (reseeding without
//! precision loss); the reduced-to-`[0,1)` form is used where a uniform
//! value is needed.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Errors from seed handling and random drawing.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrngError {
    #[error("seed must be 64 lowercase hex characters (32 bytes)")]
    BadSeedEncoding,
    #[error("stage index must be >= 1")]
    StageIndexZero,
    #[error("cannot permute an empty range")]
    EmptyRange,
    #[error("sample size {sample} out of range 1..={population}")]
    SampleSizeOutOfRange { sample: usize, population: usize },
    #[error("batch size {batch} does not divide dataset size {dataset}")]
    BatchSizeMismatch { batch: usize, dataset: usize },
}

/// A 32-byte opaque seed. Equality is byte equality; derivation from a seed
/// is a pure function of its inputs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed([u8; 32]);

impl Seed {
    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        Seed(bytes)
    }

    /// Convenience constructor hashing an arbitrary label into a seed.
    /// Used for fixtures and defaults; protocol seeds come from explicit
    /// 32-byte values.
    pub fn from_label(label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(label.as_bytes());
        Seed(hasher.finalize().into())
    }

    pub fn from_hex(text: &str) -> Result<Self, PrngError> {
        if text.len() != 64 || !text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(PrngError::BadSeedEncoding);
        }
        let raw = hex::decode(text).map_err(|_| PrngError::BadSeedEncoding)?;
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&raw);
        Ok(Seed(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub const fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Counter-mode derivation: `hash(self || LE64(index))`, returned as a
    /// fresh seed.
    pub fn derive(&self, index: u64) -> Seed {
        Seed(hash_with_counter(&self.0, index))
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

impl Serialize for Seed {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Seed::from_hex(&text).map_err(serde::de::Error::custom)
    }
}

fn hash_with_counter(seed: &[u8; 32], counter: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed);
    hasher.update(counter.to_le_bytes());
    hasher.finalize().into()
}

/// How a stage is designated to be trained. Each designation selects a
/// distinct per-stage seed, so a flag stage is a valid computation under an
/// alternate seed rather than an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageKind {
    /// Trained with the stage's primary seed (index offset 0).
    Normal,
    /// First flag designation (index offset 1).
    FlagOne,
    /// Second flag designation (index offset 2).
    FlagTwo,
}

impl StageKind {
    /// Offset added to `3t` when deriving the stage seed.
    pub const fn seed_offset(self) -> u64 {
        match self {
            StageKind::Normal => 0,
            StageKind::FlagOne => 1,
            StageKind::FlagTwo => 2,
        }
    }

    /// Numeric verdict code used on the wire: 0, 1 or 2.
    pub const fn code(self) -> u8 {
        self.seed_offset() as u8
    }
}

/// Seed for training stage `t` (1-based) under the given designation:
/// `hash(root || LE64(3t + offset))`. Distinct `(t, kind)` pairs hash
/// distinct inputs, so the derivation is collision-resistant across stages
/// and designations.
pub fn derive_stage_seed(root: &Seed, stage: u64, kind: StageKind) -> Result<Seed, PrngError> {
    if stage == 0 {
        return Err(PrngError::StageIndexZero);
    }
    Ok(root.derive(3 * stage + kind.seed_offset()))
}

/// A counter-mode stream of uniform values over a fixed seed.
///
/// Advancing the counter never repeats an output for counters below 2^64.
/// A stream must not be advanced concurrently from two threads; values and
/// seeds may be shared freely.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: Seed,
    counter: u64,
}

impl RandomStream {
    pub fn new(seed: Seed) -> Self {
        RandomStream { seed, counter: 0 }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Raw 64-bit draw: first 8 bytes of `hash(seed || LE64(counter))` as a
    /// little-endian unsigned integer. Advances the counter; panics if the
    /// 2^64 counter space is exhausted.
    pub fn next_u64(&mut self) -> u64 {
        let value = raw_u64(&self.seed, self.counter);
        self.counter = self
            .counter
            .checked_add(1)
            .expect("random stream counter exhausted");
        value
    }

    /// Uniform draw in `[0,1)`: the 64-bit draw divided by 2^64, rounded
    /// toward zero to f64 precision (top 53 bits scaled by 2^-53) so the
    /// result stays strictly below 1.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..range`.
    pub(crate) fn index(&mut self, range: usize) -> usize {
        debug_assert!(range > 0 && range < (1usize << 53));
        let idx = (self.uniform01() * range as f64) as usize;
        debug_assert!(idx < range);
        idx
    }
}

/// Stateless access to the stream value at a fixed counter. Lets a verifier
/// bind per-stage coin flips to counters derived from the stage index,
/// making a full verification reproducible for audit.
pub fn raw_u64(seed: &Seed, counter: u64) -> u64 {
    let digest = hash_with_counter(&seed.0, counter);
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Fisher-Yates permutation of `{1..n}`, driven by `uniform01` draws from
/// the seed's stream.
pub fn shuffle(seed: &Seed, n: usize) -> Result<Vec<usize>, PrngError> {
    if n == 0 {
        return Err(PrngError::EmptyRange);
    }
    let mut items: Vec<usize> = (1..=n).collect();
    let mut stream = RandomStream::new(*seed);
    fisher_yates_prefix(&mut stream, &mut items, n);
    Ok(items)
}

/// Permutation of `{0..n-1}` — the 0-based variant used for dataset index
/// shuffling.
fn shuffle_zero_based(stream: &mut RandomStream, n: usize) -> Vec<usize> {
    let mut items: Vec<usize> = (0..n).collect();
    fisher_yates_prefix(stream, &mut items, n);
    items
}

/// Uniformly randomizes the first `take` entries of `items`; after the call
/// they are a uniform sample without replacement (and with `take == len`, a
/// full Fisher-Yates shuffle).
fn fisher_yates_prefix(stream: &mut RandomStream, items: &mut [usize], take: usize) {
    let n = items.len();
    for i in 0..take.min(n.saturating_sub(1)) {
        let j = i + stream.index(n - i);
        items.swap(i, j);
    }
}

/// `sample` distinct stages out of `{1..population}`, uniform without
/// replacement, returned sorted ascending.
pub fn sample_without_replacement(
    seed: &Seed,
    population: usize,
    sample: usize,
) -> Result<Vec<usize>, PrngError> {
    if sample == 0 || sample > population {
        return Err(PrngError::SampleSizeOutOfRange { sample, population });
    }
    let mut items: Vec<usize> = (1..=population).collect();
    let mut stream = RandomStream::new(*seed);
    fisher_yates_prefix(&mut stream, &mut items, sample);
    let mut chosen = items[..sample].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Per-epoch batch division: derives the epoch seed as
/// `hash(stage_seed || LE64(epoch_in_stage))`, shuffles the dataset indices
/// `{0..n-1}` once, and cuts the permutation into consecutive blocks of `m`.
/// Each batch is returned sorted ascending so later gradient accumulation
/// has one canonical order; the list of batches keeps the shuffled block
/// order.
pub fn draw_batches(
    stage_seed: &Seed,
    epoch_in_stage: u64,
    n: usize,
    m: usize,
) -> Result<Vec<Vec<usize>>, PrngError> {
    if m == 0 || !n.is_multiple_of(m) {
        return Err(PrngError::BatchSizeMismatch {
            batch: m,
            dataset: n,
        });
    }
    let epoch_seed = stage_seed.derive(epoch_in_stage);
    let mut stream = RandomStream::new(epoch_seed);
    let order = shuffle_zero_based(&mut stream, n);
    let batches = order
        .chunks(m)
        .map(|chunk| {
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            batch
        })
        .collect();
    Ok(batches)
}
