//! Decision rules of three embedding-watermark schemes, reduced to the linear
//! algebra that an RST attack acts on.
//!
//! * EmbMarker-style: a trigger mixes a secret target direction into the
//!   output, and detection compares cosine similarities to that target.
//! * Linear decoder: each watermark bit is the rounded sigmoid of a dot
//!   product with a secret weight vector.
//! * Matrix key: outputs are multiplied by a secret matrix `T` and decoded
//!   with its left pseudo-inverse.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::pseudo_inverse;
use crate::geometry::{
    cosine, dot, norm, random_unit_direction, seeded_rng, HaarRotation, PointCloud, RotationMatrix,
    RstParams,
};

const UNIT_TOL: f64 = 1e-9;
const INPUT_UNIT_TOL: f64 = 1e-6;
pub const MIN_TRIALS: usize = 1000;

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn nonzero_norm(v: &[f64], what: &str) -> Result<f64> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::ZeroNorm(what.into()));
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbMarkerScheme {
    target: Vec<f64>,
    weight: f64,
}

impl EmbMarkerScheme {
    pub fn new(target: Vec<f64>, weight: f64) -> Result<Self> {
        if target.len() < 2 {
            return Err(Error::InvalidParameter(
                "target needs dimension >= 2".into(),
            ));
        }
        let n = norm(&target);
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::InvalidParameter(format!(
                "target embedding must be unit norm (got {n})"
            )));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!(
                "mix weight must lie in [0, 1] (got {weight})"
            )));
        }
        Ok(Self { target, weight })
    }

    /// Random unit target from `seed`.
    pub fn random(dim: usize, weight: f64, seed: u64) -> Result<Self> {
        Self::new(random_unit_direction(dim, seed)?, weight)
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }
}

/// `normalize((1 − w) e_o + w e_tar)`.
pub fn embmarker_insert(e_o: &[f64], scheme: &EmbMarkerScheme) -> Result<Vec<f64>> {
    check_dim(scheme.dim(), e_o.len())?;
    let n = norm(e_o);
    if !((n - 1.0).abs() <= INPUT_UNIT_TOL) {
        return Err(Error::InvalidParameter(format!(
            "original embedding must be unit norm (got {n})"
        )));
    }
    let w = scheme.weight;
    let mixed: Vec<f64> = e_o
        .iter()
        .zip(&scheme.target)
        .map(|(a, t)| (1.0 - w) * a + w * t)
        .collect();
    let len = nonzero_norm(&mixed, "mixed embedding")?;
    Ok(mixed.into_iter().map(|x| x / len).collect())
}

fn mean_cosine(cloud: &PointCloud, target: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, row) in cloud.rows().enumerate() {
        total += cosine(row, target).ok_or_else(|| Error::ZeroNorm(format!("row {i}")))?;
    }
    Ok(total / cloud.count() as f64)
}

/// Mean cosine to `e_tar` over `s1` minus the same over `s0`.
pub fn distribution_distance(s0: &PointCloud, s1: &PointCloud, e_tar: &[f64]) -> Result<f64> {
    check_dim(s0.dim(), s1.dim())?;
    check_dim(s0.dim(), e_tar.len())?;
    nonzero_norm(e_tar, "target embedding")?;
    Ok(mean_cosine(s1, e_tar)? - mean_cosine(s0, e_tar)?)
}

/// Cosine shift `e_tarᵀ(R e − e) / (‖e‖ ‖e_tar‖)` caused by rotating `e`.
pub fn rotation_delta(e: &[f64], rotation: &RotationMatrix, e_tar: &[f64]) -> Result<f64> {
    check_dim(rotation.dim(), e.len())?;
    check_dim(rotation.dim(), e_tar.len())?;
    let ne = nonzero_norm(e, "embedding")?;
    let nt = nonzero_norm(e_tar, "target embedding")?;
    let re = rotation.apply(e)?;
    let diff: Vec<f64> = re.iter().zip(e).map(|(a, b)| a - b).collect();
    Ok(dot(e_tar, &diff) / (ne * nt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoderScheme {
    weights: Vec<Vec<f64>>,
    message: Vec<bool>,
}

impl LinearDecoderScheme {
    pub fn new(weights: Vec<Vec<f64>>, message: Vec<bool>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one weight vector".into(),
            ));
        }
        check_dim(weights.len(), message.len())?;
        let dim = weights[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("weight vectors are empty".into()));
        }
        for w in &weights {
            check_dim(dim, w.len())?;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(
                    "weight vector is not finite".into(),
                ));
            }
        }
        Ok(Self { weights, message })
    }

    /// Gaussian weights and a random message of `bits` bits.
    pub fn random(dim: usize, bits: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, 20);
        let weights = (0..bits)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let message = (0..bits).map(|_| rng.random::<bool>()).collect();
        Self::new(weights, message)
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn message(&self) -> &[bool] {
        &self.message
    }

    pub fn bits(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Bit `i` is `round(sigmoid(w_iᵀ e_m))`, with 0.5 rounding up to 1.
pub fn linear_decode(scheme: &LinearDecoderScheme, e_m: &[f64]) -> Result<Vec<bool>> {
    check_dim(scheme.dim(), e_m.len())?;
    Ok(scheme
        .weights
        .iter()
        .map(|w| sigmoid(dot(w, e_m)) >= 0.5)
        .collect())
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Per-bit disagreement between `decode(e_m)` and `decode(R e_m)` averaged
/// over the given rotations.
pub fn bit_flip_rate(
    scheme: &LinearDecoderScheme,
    e_m: &[f64],
    rotations: &[RotationMatrix],
) -> Result<f64> {
    if rotations.is_empty() {
        return Err(Error::InvalidParameter("need at least one rotation".into()));
    }
    let base = linear_decode(scheme, e_m)?;
    let mut flips = 0usize;
    for r in rotations {
        flips += hamming(&base, &linear_decode(scheme, &r.apply(e_m)?)?);
    }
    Ok(flips as f64 / (rotations.len() * scheme.bits()) as f64)
}

/// Monte-Carlo bit-flip rate over Haar-random rotations of SO(n). Trial `i`
/// draws its rotation from stream `i` of `seed`, so the result does not
/// depend on thread scheduling.
pub fn rotation_bit_flip_rate(
    scheme: &LinearDecoderScheme,
    e_m: &[f64],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_TRIALS} trials (got {trials})"
        )));
    }
    let base = linear_decode(scheme, e_m)?;
    let flips = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed, i);
            let r = HaarRotation::sample(e_m.len(), &mut rng)?;
            let decoded = linear_decode(scheme, &r.apply(e_m)?)?;
            Ok(hamming(&base, &decoded))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(flips as f64 / (trials * scheme.bits()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixKeyScheme {
    key: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl MatrixKeyScheme {
    /// Accepts any `m × n` key with `m ≥ n` whose pseudo-inverse is a left
    /// inverse within 1e-9.
    pub fn new(key: DMatrix<f64>) -> Result<Self> {
        if key.iter().any(|x| !x.is_finite()) || key.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "key must be a finite, non-empty matrix".into(),
            ));
        }
        let (pinv, _) = pseudo_inverse(&key, 1e-12 * key.nrows().max(key.ncols()) as f64)?;
        let err = (&pinv * &key - DMatrix::identity(key.ncols(), key.ncols())).amax();
        if !(err <= UNIT_TOL) {
            return Err(Error::InvalidParameter(format!(
                "key is not full column rank: ‖T⁺T − I‖_max = {err:e}"
            )));
        }
        Ok(Self { key, pinv })
    }

    /// Random square Gaussian key.
    pub fn random(dim: usize, seed: u64) -> Result<Self> {
        Self::random_rectangular(dim, dim, seed)
    }

    pub fn random_rectangular(rows: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, 30);
        Self::new(DMatrix::from_fn(rows, dim, |_, _| {
            rng.sample(StandardNormal)
        }))
    }

    pub fn key(&self) -> &DMatrix<f64> {
        &self.key
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Dimension of the original embedding.
    pub fn dim(&self) -> usize {
        self.key.ncols()
    }

    /// Dimension of the watermarked output.
    pub fn output_dim(&self) -> usize {
        self.key.nrows()
    }

    pub fn embed(&self, e_o: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), e_o.len())?;
        Ok((&self.key * DVector::from_column_slice(e_o)).data.into())
    }

    pub fn decode(&self, e_m: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.output_dim(), e_m.len())?;
        Ok((&self.pinv * DVector::from_column_slice(e_m)).data.into())
    }
}

/// `‖e_o − T⁺ f(T e_o)‖` where `f` is the attack on the watermarked output.
pub fn matrixkey_residual(
    scheme: &MatrixKeyScheme,
    e_o: &[f64],
    attack: &RstParams,
) -> Result<f64> {
    let e_m = scheme.embed(e_o)?;
    check_dim(scheme.output_dim(), attack.dim())?;
    let attacked = attack.apply_vector(&e_m)?;
    let decoded = scheme.decode(&attacked)?;
    Ok(e_o
        .iter()
        .zip(&decoded)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}
