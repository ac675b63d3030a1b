//! Counter-addressed random streams and deterministic batch reduction.
//!
//! Every Monte-Carlo batch draws from its own ChaCha8 stream, selected by
//! `(seed, tag, term, batch)`. Batch results are reduced pairwise in index
//! order, so totals do not depend on how batches were scheduled.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Point, MAX_DIM};

/// Stream families; keeps independent estimators from sharing random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Tag {
    Grand = 1,
    Dilute = 2,
    Subset = 3,
    PlusSeries = 4,
    Indicator = 5,
    KsContinuum = 6,
    Audit = 7,
    DiluteCorrelation = 8,
}

/// Packs `(tag, term, batch)` into a 64-bit ChaCha stream id.
pub fn stream_id(tag: Tag, term: u64, batch: u64) -> u64 {
    ((tag as u64) << 56) | ((term & 0xFFFF) << 40) | (batch & 0xFF_FFFF_FFFF)
}

pub fn substream(seed: u64, tag: Tag, term: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, term, batch));
    rng
}

#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Uniform point in the axis-aligned cube with lower corner `lo` and edge `a`.
#[inline]
pub fn uniform_in_cube<R: RngCore + ?Sized>(rng: &mut R, lo: &Point, a: f64, dim: usize) -> Point {
    let mut x = [0.0; MAX_DIM];
    for i in 0..dim {
        x[i] = lo[i] + a * uniform(rng);
    }
    x
}

/// Runs independent, index-addressed jobs and returns results in index order.
pub trait BatchExecutor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every batch on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchExecutor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Running means and co-moments of `K` jointly sampled quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<const K: usize> {
    pub n: u64,
    pub mean: [f64; K],
    /// Sum of centred cross products.
    pub comoment: [[f64; K]; K],
}

impl<const K: usize> Default for Moments<K> {
    fn default() -> Self {
        Self {
            n: 0,
            mean: [0.0; K],
            comoment: [[0.0; K]; K],
        }
    }
}

impl<const K: usize> Moments<K> {
    pub fn push(&mut self, x: &[f64; K]) {
        self.n += 1;
        let n = self.n as f64;
        let mut d = [0.0; K];
        for i in 0..K {
            d[i] = x[i] - self.mean[i];
            self.mean[i] += d[i] / n;
        }
        for i in 0..K {
            for j in 0..K {
                self.comoment[i][j] += d[i] * (x[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut out = Self {
            n: self.n + other.n,
            ..Self::default()
        };
        let mut d = [0.0; K];
        for i in 0..K {
            d[i] = other.mean[i] - self.mean[i];
            out.mean[i] = self.mean[i] + d[i] * nb / n;
        }
        for i in 0..K {
            for j in 0..K {
                out.comoment[i][j] =
                    self.comoment[i][j] + other.comoment[i][j] + d[i] * d[j] * na * nb / n;
            }
        }
        out
    }

    /// Covariance of the sample means of components `i` and `j`.
    pub fn mean_cov(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        self.comoment[i][j] / (n - 1.0) / n
    }

    pub fn mean_var(&self, i: usize) -> f64 {
        self.mean_cov(i, i).max(0.0)
    }
}

/// Pairwise reduction in index order.
pub fn reduce<const K: usize>(parts: &[Moments<K>]) -> Moments<K> {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => {
            let (l, r) = parts.split_at(n / 2);
            reduce(l).merge(&reduce(r))
        }
    }
}

/// Splits `samples` into batches of at most `batch` draws: `(count, offset)` pairs.
pub fn batches(samples: usize, batch: usize) -> Vec<usize> {
    let batch = batch.max(1);
    let mut out = Vec::with_capacity(samples.div_ceil(batch));
    let mut left = samples;
    while left > 0 {
        let k = left.min(batch);
        out.push(k);
        left -= k;
    }
    out
}
