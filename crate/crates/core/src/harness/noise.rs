//! Seeded noise generation.
//!
//! Every sample draws from its own ChaCha8 stream: the generator is seeded
//! with `seed_from_u64(seed)` and then switched to stream `index`, so
//! samples can be produced in any order or in parallel and still be
//! bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Identifies the generator and the sampling algorithms, for CSV metadata.
pub const RNG_ID: &str =
    "chacha8(seed_from_u64,set_stream)+normal:ziggurat(rand_distr-0.5)+poisson:inversion<30/ptrs>=30";

/// Below this mean, Poisson variates are drawn by sequential inversion.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

/// Random stream for one sample.
pub struct SampleStream {
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        SampleStream { rng }
    }

    /// Stream index for `(sample, repeat)` pairs.
    pub fn index(sample: usize, repeat: usize) -> u64 {
        ((sample as u64) << 32) | repeat as u64
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn poisson(&mut self, lambda: f64) -> f64 {
        if lambda < POISSON_INVERSION_LIMIT {
            poisson_inversion(self, lambda)
        } else {
            poisson_ptrs(self, lambda)
        }
    }
}

fn poisson_inversion(s: &mut SampleStream, lambda: f64) -> f64 {
    let u = s.uniform();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u32;
    // The cap only matters when rounding keeps the CDF just below u ≈ 1.
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k as f64
}

/// `ln k!`: exact sum for small `k`, Stirling series beyond.
fn ln_factorial(k: f64) -> f64 {
    if k < 16.0 {
        (2..=k as u32).map(|i| (i as f64).ln()).sum()
    } else {
        let k2 = k * k;
        k * k.ln() - k + 0.5 * (std::f64::consts::TAU * k).ln() + 1.0 / (12.0 * k)
            - 1.0 / (360.0 * k * k2)
            + 1.0 / (1260.0 * k * k2 * k2)
    }
}

/// Hörmann's transformed rejection with squeeze (PTRS), valid for λ ≥ 10.
fn poisson_ptrs(s: &mut SampleStream, lambda: f64) -> f64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = s.uniform() - 0.5;
        let v = s.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - ln_factorial(k) {
            return k;
        }
    }
}

/// `dim × dim` iid normal samples.
pub fn gen_gaussian_sample(dim: usize, mean: f64, variance: f64, stream: &mut SampleStream) -> Result<Raster> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::domain(format!("variance must be >= 0, got {variance}")));
    }
    let sd = variance.sqrt();
    let values = (0..dim * dim).map(|_| mean + sd * stream.normal()).collect();
    Raster::new(dim, dim, values)
}

/// `dim × dim` iid Poisson(λ) counts.
pub fn gen_poisson_sample(dim: usize, lambda: f64, stream: &mut SampleStream) -> Result<Raster> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("Poisson mean must be positive, got {lambda}")));
    }
    let values = (0..dim * dim).map(|_| stream.poisson(lambda)).collect();
    Raster::new(dim, dim, values)
}
