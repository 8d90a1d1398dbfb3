//! Deterministic synthetic streams. Every generator is a pure function of its
//! [`GenSpec`]; see [`rng`] for the sampling discipline.

pub mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{CoverSummError, Result};
use crate::vectorspace::Point;
use rng::{cumulative, StreamRng};

pub const DEFAULT_TOPICS: usize = 10;
pub const DEFAULT_VOCAB: usize = 100;
pub const DEFAULT_MEAN_LEN: f64 = 150.0;
pub const DEFAULT_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenKind {
    /// I.i.d. uniform on `[-1/2, 1/2]^dim`.
    Uniform,
    /// Bag-of-words reviews from a topic model; each row is the mean of the
    /// one-hot vectors of its words.
    Lda { topics: usize, vocab: usize, mean_len: f64 },
    /// Equal-weight mixture of `N(i·1, I)` for `i = 1..=modes`.
    Multimodal { modes: usize },
    /// Point `i` of `n` drawn from `N((i/n)·1, sigma² I)`.
    Adversarial { sigma: f64 },
}

impl GenKind {
    pub fn name(&self) -> &'static str {
        match self {
            GenKind::Uniform => "uniform",
            GenKind::Lda { .. } => "lda",
            GenKind::Multimodal { .. } => "multimodal",
            GenKind::Adversarial { .. } => "adversarial",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            GenKind::Uniform => 1,
            GenKind::Lda { .. } => 2,
            GenKind::Multimodal { .. } => 3,
            GenKind::Adversarial { .. } => 4,
        }
    }

    pub fn lda_default() -> Self {
        GenKind::Lda { topics: DEFAULT_TOPICS, vocab: DEFAULT_VOCAB, mean_len: DEFAULT_MEAN_LEN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    #[serde(flatten)]
    pub kind: GenKind,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(kind: GenKind, n: usize, dim: usize, seed: u64) -> Self {
        let dim = match kind {
            GenKind::Lda { vocab, .. } => vocab,
            _ => dim,
        };
        GenSpec { kind, n, dim, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoverSummError::InvalidInput(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        match self.kind {
            GenKind::Lda { topics, vocab, mean_len } => {
                if topics == 0 || vocab == 0 {
                    return bad("topics and vocab must be at least 1".into());
                }
                if !(mean_len > 0.0 && mean_len.is_finite()) {
                    return bad(format!("mean length must be positive, got {mean_len}"));
                }
                if vocab != self.dim {
                    return bad(format!("lda dimension {} must equal vocab size {vocab}", self.dim));
                }
            }
            GenKind::Multimodal { modes: 0 } => return bad("modes must be at least 1".into()),
            GenKind::Adversarial { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return bad(format!("sigma must be non-negative, got {sigma}"))
            }
            _ => {}
        }
        Ok(())
    }

    fn rng(&self) -> StreamRng {
        StreamRng::new(self.seed, self.kind.tag())
    }
}

/// Generates the stream described by `spec`, with ids `0..n`.
pub fn generate(spec: &GenSpec) -> Result<Vec<Point>> {
    spec.validate()?;
    Ok(match spec.kind {
        GenKind::Uniform => gen_uniform(spec),
        GenKind::Lda { .. } => gen_lda(spec),
        GenKind::Multimodal { .. } => gen_multimodal(spec).0,
        GenKind::Adversarial { .. } => gen_adversarial(spec),
    })
}

fn gen_uniform(spec: &GenSpec) -> Vec<Point> {
    let mut rng = spec.rng();
    (0..spec.n as u64)
        .map(|i| Point::new(i, (0..spec.dim).map(|_| rng.uniform() - 0.5).collect()))
        .collect()
}

fn gen_lda(spec: &GenSpec) -> Vec<Point> {
    let GenKind::Lda { topics, vocab, mean_len } = spec.kind else {
        unreachable!("called with a non-lda spec")
    };
    let mut rng = spec.rng();
    let word_cdfs: Vec<Vec<f64>> = (0..topics).map(|_| cumulative(&rng.dirichlet(1.0, vocab))).collect();
    let mut counts = vec![0u32; vocab];
    (0..spec.n as u64)
        .map(|i| {
            let topic_cdf = cumulative(&rng.dirichlet(1.0, topics));
            let len = loop {
                let l = rng.poisson(mean_len);
                if l > 0 {
                    break l;
                }
            };
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..len {
                let z = rng.categorical(&topic_cdf);
                counts[rng.categorical(&word_cdfs[z])] += 1;
            }
            Point::new(i, counts.iter().map(|&c| c as f64 / len as f64).collect())
        })
        .collect()
}

/// Multimodal stream together with the zero-based mode of each point.
pub fn gen_multimodal(spec: &GenSpec) -> (Vec<Point>, Vec<usize>) {
    let GenKind::Multimodal { modes } = spec.kind else {
        unreachable!("called with a non-multimodal spec")
    };
    let mut rng = spec.rng();
    let uniform_cdf: Vec<f64> = (1..=modes).map(|i| i as f64).collect();
    let mut labels = Vec::with_capacity(spec.n);
    let points = (0..spec.n as u64)
        .map(|i| {
            let mode = rng.categorical(&uniform_cdf);
            labels.push(mode);
            let center = (mode + 1) as f64;
            Point::new(i, (0..spec.dim).map(|_| center + rng.normal()).collect())
        })
        .collect();
    (points, labels)
}

fn gen_adversarial(spec: &GenSpec) -> Vec<Point> {
    let GenKind::Adversarial { sigma } = spec.kind else {
        unreachable!("called with a non-adversarial spec")
    };
    let mut rng = spec.rng();
    let n = spec.n as f64;
    (0..spec.n as u64)
        .map(|i| {
            let center = (i + 1) as f64 / n;
            Point::new(i, (0..spec.dim).map(|_| center + sigma * rng.normal()).collect())
        })
        .collect()
}
