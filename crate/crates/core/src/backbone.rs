//! Trainable linear projection standing in for the image backbone.
//!
//! Raw item features (precomputed or synthetic) are mapped to an
//! `n`-dimensional embedding by `weight · features + bias`. Parameters are
//! stored as `f32`; embeddings and gradients are accumulated in `f64`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    n: usize,
    d: usize,
    /// Row-major `n × d`.
    weight: Vec<f32>,
    bias: Vec<f32>,
}

/// Output of [`Projection::embed`].
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
}

/// Gradient with respect to a [`Projection`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrad {
    /// Row-major `n × d`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ProjectionGrad {
    pub fn zeros(n: usize, d: usize) -> Self {
        ProjectionGrad {
            weight: vec![0.0; n * d],
            bias: vec![0.0; n],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weight.iter_mut().chain(self.bias.iter_mut()).for_each(|g| *g *= s);
    }
}

impl Projection {
    pub fn new(n: usize, d: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::arg("projection dimensions must be at least 1"));
        }
        if weight.len() != n * d || bias.len() != n {
            return Err(Error::arg(format!(
                "projection expects {} weights and {n} biases, got {} and {}",
                n * d,
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::arg("projection parameters must be finite"));
        }
        Ok(Projection { n, d, weight, bias })
    }

    /// Glorot-style uniform weights in `[-a, a]`, `a = sqrt(6 / (n + d))`, zero bias.
    pub fn init(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::arg("projection dimensions must be at least 1"));
        }
        let bound = libm::sqrt(6.0 / (n + d) as f64);
        let mut b32 = bound as f32;
        if b32 as f64 > bound {
            b32 = b32.next_down();
        }
        let mut rng = rng::rng_for(seed, &[purpose::INIT]);
        let weight = (0..n * d).map(|_| rng.random_range(-b32..=b32)).collect();
        Ok(Projection {
            n,
            d,
            weight,
            bias: vec![0.0; n],
        })
    }

    /// Embedding dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Input feature dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut [f32] {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f32] {
        &mut self.bias
    }

    fn check_features(&self, features: &[f32]) -> Result<()> {
        if features.len() != self.d {
            return Err(Error::arg(format!(
                "feature length {} does not match projection input {}",
                features.len(),
                self.d
            )));
        }
        Ok(())
    }

    pub fn embed(&self, features: &[f32]) -> Result<Embedding> {
        self.check_features(features)?;
        let values = self
            .weight
            .chunks_exact(self.d)
            .zip(&self.bias)
            .map(|(row, &b)| {
                row.iter()
                    .zip(features)
                    .fold(b as f64, |acc, (&w, &x)| acc + w as f64 * x as f64)
            })
            .collect();
        Ok(Embedding { values })
    }

    /// Gradient of `upstream · embed(features)`: `upstream ⊗ features` for the
    /// weight and `upstream` for the bias.
    pub fn embed_grad(&self, features: &[f32], upstream: &[f64]) -> Result<ProjectionGrad> {
        let mut g = ProjectionGrad::zeros(self.n, self.d);
        self.accumulate_grad(&mut g, features, upstream)?;
        Ok(g)
    }

    /// Adds the [`Projection::embed_grad`] contribution into `acc`.
    pub fn accumulate_grad(&self, acc: &mut ProjectionGrad, features: &[f32], upstream: &[f64]) -> Result<()> {
        self.check_features(features)?;
        if upstream.len() != self.n || acc.bias.len() != self.n || acc.weight.len() != self.n * self.d {
            return Err(Error::arg("gradient shape does not match projection"));
        }
        for ((row, gb), &u) in acc
            .weight
            .chunks_exact_mut(self.d)
            .zip(acc.bias.iter_mut())
            .zip(upstream)
        {
            if u == 0.0 {
                continue;
            }
            *gb += u;
            for (g, &x) in row.iter_mut().zip(features) {
                *g += u * x as f64;
            }
        }
        Ok(())
    }
}
