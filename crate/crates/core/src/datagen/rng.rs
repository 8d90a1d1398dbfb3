//! Seeded sampling primitives.
//!
//! Streams are drawn from xoshiro256++ seeded through `seed_from_u64`
//! (SplitMix64 expansion) with a per-generator sub-seed
//! `splitmix64(seed ^ tag * 0x9E3779B97F4A7C15)`. The samplers below are
//! written out rather than taken from a distributions crate so that other
//! implementations can reproduce the streams exactly:
//!
//! * uniform: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`
//! * normal: Box-Muller on `(1 - u1, u2)`, both outputs used in order
//! * gamma: Marsaglia-Tsang, with the `u^(1/a)` boost for shape `a < 1`
//! * Poisson: sequential inversion, summed over chunks of mean at most 500
//! * categorical: first index whose cumulative weight exceeds `u * total`

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const POISSON_CHUNK: f64 = 500.0;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, tag: u64) -> Self {
        let sub = splitmix64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        StreamRng { inner: Xoshiro256PlusPlus::seed_from_u64(sub), spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0);
        if shape < 1.0 {
            let u = 1.0 - self.uniform();
            return self.gamma(shape + 1.0) * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x.powi(4) {
                return d * v;
            }
            if u > 0.0 && u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Symmetric Dirichlet sample of length `n`.
    pub fn dirichlet(&mut self, concentration: f64, n: usize) -> Vec<f64> {
        let mut g: Vec<f64> = (0..n).map(|_| self.gamma(concentration)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            g.iter_mut().for_each(|x| *x /= total);
        } else {
            g.iter_mut().for_each(|x| *x = 1.0 / n as f64);
        }
        g
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        let mut left = mean;
        let mut total = 0;
        while left > 0.0 {
            let m = left.min(POISSON_CHUNK);
            total += self.poisson_small(m);
            left -= m;
        }
        total
    }

    fn poisson_small(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut x = 0u64;
        while u >= cdf {
            x += 1;
            p *= mean / x as f64;
            if p == 0.0 && x as f64 > mean {
                // rounding left the cdf short of u; the tail is negligible
                break;
            }
            cdf += p;
        }
        x
    }

    /// Draws an index from a cumulative weight table.
    pub fn categorical(&mut self, cdf: &[f64]) -> usize {
        let total = *cdf.last().expect("non-empty table");
        let target = self.uniform() * total;
        cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
    }
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}
