//! Similarity scoring and the one-sample t-test that turns an aligned suspect
//! into a verdict.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, AlignmentEstimate};
use crate::geometry::PointCloud;
use crate::stats;

pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Mean squared row distance `(1/N) Σ ‖a_i − b_i‖²`. Smaller means closer.
pub fn similarity_score(aligned: &PointCloud, reference: &PointCloud) -> Result<f64> {
    estimator::mean_squared_distance(aligned, reference)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub mu: f64,
    pub sigma: f64,
    pub t: f64,
    pub p: f64,
}

/// One-sample t-test of `s` against the reference scores.
///
/// `σ` uses the `M − 1` divisor, `t = (μ − s) / (σ / √M)` and `p` is the
/// two-tailed Student-t probability with `M − 1` degrees of freedom. The sign
/// of `t` is kept: negative means the suspect is farther from the victim than
/// the references are.
pub fn t_test(s: f64, scores: &[f64]) -> Result<TTest> {
    let m = scores.len();
    if m < 2 {
        return Err(Error::TooFewReferences(m));
    }
    if !s.is_finite() || scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "t-test inputs must be finite".into(),
        ));
    }
    let mf = m as f64;
    let mu = scores.iter().sum::<f64>() / mf;
    let var = scores.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (mf - 1.0);
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::DegenerateReferences);
    }
    let t = (mu - s) / (sigma / mf.sqrt());
    let p = stats::student_t_two_tailed(t, mf - 1.0)?;
    Ok(TTest { mu, sigma, t, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stolen,
    NotProven,
}

impl Verdict {
    pub fn from_p(p: f64, threshold: f64) -> Self {
        if p <= threshold {
            Verdict::Stolen
        } else {
            Verdict::NotProven
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stolen => "stolen",
            Verdict::NotProven => "not-proven",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub s: f64,
    pub reference_scores: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub alignment: AlignmentEstimate,
}

/// Align the suspect to the victim once, score the aligned suspect against
/// the victim and every reference, and run the t-test.
pub fn verify(
    suspect: &PointCloud,
    victim: &PointCloud,
    references: &[PointCloud],
    threshold: f64,
) -> Result<VerificationReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 1] (got {threshold})"
        )));
    }
    if references.len() < 2 {
        return Err(Error::TooFewReferences(references.len()));
    }
    suspect.check_same_shape(victim)?;
    for r in references {
        r.check_same_shape(victim)?;
    }
    let alignment = estimator::align(suspect, victim)?;
    let aligned = estimator::apply_alignment(suspect, &alignment)?;
    let s = similarity_score(&aligned, victim)?;
    let reference_scores = references
        .par_iter()
        .map(|r| similarity_score(&aligned, r))
        .collect::<Result<Vec<_>>>()?;
    let tt = t_test(s, &reference_scores)?;
    Ok(VerificationReport {
        s,
        reference_scores,
        mu: tt.mu,
        sigma: tt.sigma,
        t_value: tt.t,
        p_value: tt.p,
        threshold,
        verdict: Verdict::from_p(tt.p, threshold),
        alignment,
    })
}
