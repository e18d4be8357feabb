//! JSON documents written by `verify`, `attack` and `wm-analyze`.

use std::collections::BTreeMap;

use cloudprint::attacksim::AttackKind;
use cloudprint::verifier::{Verdict, VerificationReport};
use cloudprint::{RstOrder, RstParams};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub alpha_e: f64,
    pub d_e: Vec<f64>,
    pub rotation_frobenius_from_identity: f64,
    pub alignment_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub s: f64,
    pub reference_scores: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub alignment: AlignmentSummary,
    pub seeds: BTreeMap<String, u64>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl ReportFile {
    pub fn from_report(
        r: &VerificationReport,
        seeds: BTreeMap<String, u64>,
        timings_ms: BTreeMap<String, f64>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            s: r.s,
            reference_scores: r.reference_scores.clone(),
            mu: r.mu,
            sigma: r.sigma,
            t_value: r.t_value,
            p_value: r.p_value,
            threshold: r.threshold,
            verdict: r.verdict,
            alignment: AlignmentSummary {
                alpha_e: r.alignment.scale,
                d_e: r.alignment.translation.iter().copied().collect(),
                rotation_frobenius_from_identity: r.alignment.rotation.distance_from_identity(),
                alignment_error: r.alignment.alignment_error,
            },
            seeds,
            timings_ms,
        }
    }

    /// The verdict must agree with the p-value and threshold.
    pub fn is_consistent(&self) -> bool {
        Verdict::from_p(self.p_value, self.threshold) == self.verdict
            && (0.0..=1.0).contains(&self.p_value)
    }
}

/// Ground truth of an attack, written next to the attacked cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParamsFile {
    pub schema_version: u32,
    pub kind: AttackKind,
    pub order: RstOrder,
    pub seed: u64,
    pub scale: f64,
    pub translation: Vec<f64>,
    /// Row-major rotation matrix.
    pub rotation: Vec<Vec<f64>>,
}

impl AttackParamsFile {
    pub fn new(kind: AttackKind, seed: u64, p: &RstParams) -> Self {
        let r = p.rotation.as_matrix();
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            order: p.order,
            seed,
            scale: p.scale,
            translation: p.translation.iter().copied().collect(),
            rotation: r
                .row_iter()
                .map(|row| row.iter().copied().collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmAttack {
    pub degrees: Option<f64>,
    pub scale: Option<f64>,
    pub translate_len: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum WmStatistics {
    Embmarker {
        weight: f64,
        samples: usize,
        /// Mean cosine to the target, triggered minus normal.
        distance_before: f64,
        distance_after: f64,
    },
    Linear {
        bits: usize,
        trials: usize,
        flip_rate: f64,
        mean_hamming: f64,
    },
    Matrixkey {
        key_rows: usize,
        residual: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        residual_scale_only: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        predicted_scale_only: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        residual_translation_only: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        predicted_translation_only: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        residual_rotation_only: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmReport {
    pub schema_version: u32,
    pub dim: usize,
    pub attack: WmAttack,
    pub statistics: WmStatistics,
    pub seeds: BTreeMap<String, u64>,
}
