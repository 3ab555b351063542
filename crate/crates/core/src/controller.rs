//! The evolvable controller: an 8-10-2 perceptron with tanh units.
//!
//! Weight layout, row-major per unit with the bias last:
//! hidden unit `j` owns `weights[9j .. 9j + 9]` (8 inputs then bias), output
//! unit `k` owns `weights[90 + 11k .. 90 + 11k + 11]` (10 hidden then bias).

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const INPUTS: usize = 8;
pub const HIDDEN: usize = 10;
pub const OUTPUTS: usize = 2;
pub const GENOTYPE_LEN: usize = (INPUTS + 1) * HIDDEN + (HIDDEN + 1) * OUTPUTS;

/// Step size given to fresh genotypes and after every restart.
pub const INITIAL_SIGMA: f64 = 0.2;

/// Spread of the initial weight distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScale {
    /// Weights drawn with this variance.
    Variance(f64),
    /// Weights drawn with this standard deviation.
    StdDev(f64),
}

impl InitScale {
    pub fn std_dev(self) -> f64 {
        match self {
            InitScale::Variance(v) => v.sqrt(),
            InitScale::StdDev(s) => s,
        }
    }
}

impl Default for InitScale {
    fn default() -> Self {
        InitScale::Variance(0.1)
    }
}

/// MLP weights plus the mutation step size.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    weights: Vec<f64>,
    sigma: f64,
}

impl Genotype {
    pub fn new(weights: Vec<f64>, sigma: f64) -> Result<Self> {
        if weights.len() != GENOTYPE_LEN {
            return Err(Error::DimensionMismatch {
                expected: GENOTYPE_LEN,
                got: weights.len(),
            });
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Genotype { weights, sigma })
    }

    /// All-zero weights: the controller that never moves.
    pub fn zeros() -> Self {
        Genotype {
            weights: vec![0.0; GENOTYPE_LEN],
            sigma: INITIAL_SIGMA,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        self.sigma = sigma;
        self
    }

    pub fn activate(&self, inputs: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        mlp_forward(&self.weights, inputs)
    }

    pub fn mutate<R: Rng + ?Sized>(&self, rng: &mut R) -> Genotype {
        Genotype {
            weights: perturb(&self.weights, self.sigma, rng),
            sigma: self.sigma,
        }
    }

    /// One CSV line: the 112 weights then sigma, 17 significant digits each.
    pub fn to_csv_line(&self) -> String {
        let mut line = String::with_capacity(26 * (GENOTYPE_LEN + 1));
        for w in self.weights.iter().chain(std::iter::once(&self.sigma)) {
            if !line.is_empty() {
                line.push(',');
            }
            write!(line, "{w:.16e}").expect("writing to a String");
        }
        line
    }

    pub fn from_csv_line(line: &str) -> Result<Genotype> {
        let values = line
            .trim()
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::GenotypeParse(format!("bad number {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != GENOTYPE_LEN + 1 {
            return Err(Error::GenotypeParse(format!(
                "expected {} values (weights + sigma), found {}",
                GENOTYPE_LEN + 1,
                values.len()
            )));
        }
        let mut weights = values;
        let sigma = weights.pop().expect("length checked");
        Genotype::new(weights, sigma)
    }

    /// Reads the first non-comment line of a genotype file. Lines starting
    /// with `#` are skipped.
    pub fn from_file_text(text: &str) -> Result<Genotype> {
        let line = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| Error::GenotypeParse("no genotype line".into()))?;
        Genotype::from_csv_line(line)
    }
}

/// A fresh genotype: i.i.d. centered Gaussian weights, sigma = 0.2.
pub fn random_genotype<R: Rng + ?Sized>(rng: &mut R, init: InitScale) -> Genotype {
    Genotype {
        weights: gaussian_vector(rng, GENOTYPE_LEN, init.std_dev()),
        sigma: INITIAL_SIGMA,
    }
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, std_dev: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| std_dev * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Isotropic Gaussian perturbation of every coordinate.
pub fn perturb<R: Rng + ?Sized>(weights: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    weights
        .iter()
        .map(|w| w + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Forward pass of the 8-10-2 tanh network over a raw weight slice.
pub fn mlp_forward(weights: &[f64], inputs: &[f64; INPUTS]) -> [f64; OUTPUTS] {
    debug_assert_eq!(weights.len(), GENOTYPE_LEN);
    let (hidden_w, output_w) = weights.split_at((INPUTS + 1) * HIDDEN);
    let mut hidden = [0.0; HIDDEN];
    for (h, unit) in hidden.iter_mut().zip(hidden_w.chunks_exact(INPUTS + 1)) {
        let sum: f64 = unit[..INPUTS].iter().zip(inputs).map(|(w, x)| w * x).sum();
        *h = (sum + unit[INPUTS]).tanh();
    }
    let mut out = [0.0; OUTPUTS];
    for (o, unit) in out.iter_mut().zip(output_w.chunks_exact(HIDDEN + 1)) {
        let sum: f64 = unit[..HIDDEN].iter().zip(&hidden).map(|(w, h)| w * h).sum();
        *o = (sum + unit[HIDDEN]).tanh();
    }
    out
}
