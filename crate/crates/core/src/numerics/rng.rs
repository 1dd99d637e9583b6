use ndarray::{Array1, Array2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Seeded random stream.
///
/// Wraps a ChaCha8 generator keyed by `seed`; `stream` selects one of 2^64
/// disjoint keystreams, which is how [`RngState::split`] hands out
/// non-overlapping child streams.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

/// Serializable position of an [`RngState`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: u64,
    pub stream: u64,
    /// Word position in the keystream, as a decimal string (it is a u128).
    pub word_pos: String,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child stream number `index`. Does not advance `self`.
    pub fn split(&self, index: u64) -> RngState {
        let stream = splitmix64(splitmix64(self.stream) ^ splitmix64(index.wrapping_add(1)));
        Self::with_stream(self.seed, stream)
    }

    pub fn snapshot(&self) -> RngSnapshot {
        RngSnapshot {
            seed: self.seed,
            stream: self.stream,
            word_pos: self.inner.get_word_pos().to_string(),
        }
    }

    pub fn restore(snapshot: &RngSnapshot) -> Result<Self> {
        let pos: u128 = snapshot
            .word_pos
            .parse()
            .map_err(|_| crate::Error::CorruptFile(format!("bad rng word position {:?}", snapshot.word_pos)))?;
        let mut rng = Self::with_stream(snapshot.seed, snapshot.stream);
        rng.inner.set_word_pos(pos);
        Ok(rng)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || self.normal())
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `dim` i.i.d. standard normal draws.
pub fn gaussian_vector(dim: usize, rng: &mut RngState) -> Result<Array1<f64>> {
    if dim == 0 {
        return invalid("gaussian_vector: dim must be at least 1");
    }
    Ok(Array1::from_shape_simple_fn(dim, || rng.normal()))
}
