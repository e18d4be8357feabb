//! Seeded synthetic embedding clouds: a clustered unit-norm victim, a noisy
//! extracted copy, and clean reference models answering the same inputs.
//!
//! References are drawn as a family `normalize(q_j + u_j + m_i v_ij)` around
//! the victim. `u` is noise shared by the whole family (the common view that
//! clean models have of the inputs) and `v_i` is per-member noise scaled by a
//! member-specific multiplier `m_i = 1 + h·U(−1, 1)`. The per-row noise power
//! `σ_r²` is split as `U + V = σ_r²` with `V = U(1 + U)`, which makes the
//! victim itself statistically exchangeable with the family members once
//! everything is renormalised: a fresh member of the family is then an
//! innocent model that the test should not flag.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, seeded_rng, PointCloud};

const VICTIM_STREAM: u64 = 100;
const SUSPECT_STREAM: u64 = 101;
const SHARED_STREAM: u64 = 102;
const MEMBER_STREAM: u64 = 1_000;
/// Member index used for the innocent stand-in, far from any reference index.
const INNOCENT_MEMBER: u64 = 1 << 32;
const INDEPENDENT_STREAM: u64 = 1 << 40;

pub const DEFAULT_HETEROGENEITY: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    /// Noisy variants of the victim sharing common noise.
    Family,
    /// Unrelated clustered clouds with their own centres.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Std of points around their cluster centre before normalisation.
    pub cluster_spread: f64,
    /// Per-coordinate std of the suspect's extraction noise.
    pub suspect_noise: f64,
    /// Per-row RMS norm of the reference noise.
    pub ref_noise: f64,
    /// Spread `h` of the per-member noise multiplier.
    pub heterogeneity: f64,
    pub reference_mode: ReferenceMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 5000,
            dim: 128,
            clusters: 10,
            cluster_spread: 0.5,
            suspect_noise: 0.01,
            ref_noise: 0.3,
            heterogeneity: DEFAULT_HETEROGENEITY,
            reference_mode: ReferenceMode::Family,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dim < 2 {
            return bad(format!("dimension must be >= 2 (got {})", self.dim));
        }
        if self.count < self.dim + 1 {
            return bad(format!(
                "point count must be >= dim + 1 = {} for the sphere fit (got {})",
                self.dim + 1,
                self.count
            ));
        }
        if self.clusters == 0 {
            return bad("need at least one cluster".into());
        }
        if !(self.cluster_spread >= 0.0 && self.cluster_spread.is_finite()) {
            return bad(format!(
                "cluster spread must be >= 0 (got {})",
                self.cluster_spread
            ));
        }
        if !(self.suspect_noise >= 0.0 && self.suspect_noise.is_finite()) {
            return bad(format!(
                "suspect noise must be >= 0 (got {})",
                self.suspect_noise
            ));
        }
        if !(self.ref_noise > self.suspect_noise && self.ref_noise.is_finite()) {
            return bad(format!(
                "reference noise must exceed suspect noise ({} <= {})",
                self.ref_noise, self.suspect_noise
            ));
        }
        if !(0.0..1.0).contains(&self.heterogeneity) {
            return bad(format!(
                "heterogeneity must lie in [0, 1) (got {})",
                self.heterogeneity
            ));
        }
        Ok(())
    }
}

fn normal_row(rng: &mut impl Rng, dim: usize, std: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn normalise(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

fn clustered_cloud(cfg: &SynthConfig, stream: u64) -> Result<PointCloud> {
    let mut rng = seeded_rng(cfg.seed, stream);
    let centers: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| normal_row(&mut rng, cfg.dim, 1.0))
        .collect();
    let mut data = Vec::with_capacity(cfg.count * cfg.dim);
    for _ in 0..cfg.count {
        let c = &centers[rng.random_range(0..cfg.clusters)];
        loop {
            let mut row: Vec<f64> = normal_row(&mut rng, cfg.dim, cfg.cluster_spread)
                .into_iter()
                .zip(c)
                .map(|(e, c)| c + e)
                .collect();
            if normalise(&mut row) {
                data.extend(row);
                break;
            }
        }
    }
    PointCloud::from_flat(cfg.count, cfg.dim, data)
}

/// Unit-norm rows drawn from a mixture of `clusters` Gaussians with
/// standard-normal centres.
pub fn gen_victim(cfg: &SynthConfig) -> Result<PointCloud> {
    cfg.validate()?;
    clustered_cloud(cfg, VICTIM_STREAM)
}

/// `victim + N(0, σ_s²)` per coordinate, left unnormalised.
pub fn gen_suspect(victim: &PointCloud, suspect_noise: f64, seed: u64) -> Result<PointCloud> {
    if !(suspect_noise >= 0.0 && suspect_noise.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "suspect noise must be >= 0 (got {suspect_noise})"
        )));
    }
    let mut rng = seeded_rng(seed, SUSPECT_STREAM);
    let data = victim
        .as_slice()
        .iter()
        .map(|x| x + suspect_noise * rng.sample::<f64, _>(StandardNormal))
        .collect();
    PointCloud::from_flat(victim.count(), victim.dim(), data)
}

/// Reference models around one victim, sharing a common noise draw.
#[derive(Debug, Clone)]
pub struct ReferenceFamily<'a> {
    victim: &'a PointCloud,
    shared: Vec<f64>,
    member_std: f64,
    heterogeneity: f64,
    seed: u64,
}

impl<'a> ReferenceFamily<'a> {
    pub fn new(
        victim: &'a PointCloud,
        ref_noise: f64,
        heterogeneity: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(ref_noise > 0.0 && ref_noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "reference noise must be > 0 (got {ref_noise})"
            )));
        }
        if !(0.0..1.0).contains(&heterogeneity) {
            return Err(Error::InvalidParameter(format!(
                "heterogeneity must lie in [0, 1) (got {heterogeneity})"
            )));
        }
        let total = ref_noise * ref_noise;
        // U + V = total, V = U (1 + U)
        let shared_var = (1.0 + total).sqrt() - 1.0;
        let member_var = total - shared_var;
        let dim = victim.dim() as f64;
        let shared_std = (shared_var / dim).sqrt();
        let mut rng = seeded_rng(seed, SHARED_STREAM);
        let shared = (0..victim.as_slice().len())
            .map(|_| shared_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            victim,
            shared,
            member_std: (member_var / dim).sqrt(),
            heterogeneity,
            seed,
        })
    }

    /// Member `index`; members are independent given the shared noise.
    pub fn member(&self, index: u64) -> Result<PointCloud> {
        let mut rng = seeded_rng(self.seed, MEMBER_STREAM + index);
        let mult = 1.0 + self.heterogeneity * rng.random_range(-1.0..=1.0);
        let std = mult * self.member_std;
        let dim = self.victim.dim();
        let mut data = Vec::with_capacity(self.shared.len());
        for (q, u) in self.victim.rows().zip(self.shared.chunks_exact(dim)) {
            loop {
                let mut row: Vec<f64> = q
                    .iter()
                    .zip(u)
                    .map(|(q, u)| q + u + std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if normalise(&mut row) {
                    data.extend(row);
                    break;
                }
            }
        }
        PointCloud::from_flat(self.victim.count(), dim, data)
    }

    /// Members `0..count`, generated in parallel.
    pub fn members(&self, count: usize) -> Result<Vec<PointCloud>> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.member(i))
            .collect()
    }

    /// A member disjoint from every reference index: an innocent model drawn
    /// from the same population as the references.
    pub fn innocent(&self) -> Result<PointCloud> {
        self.member(INNOCENT_MEMBER)
    }
}

/// `count ≥ 2` unit-norm reference clouds from a [`ReferenceFamily`] with
/// the default heterogeneity.
pub fn gen_references(
    victim: &PointCloud,
    count: usize,
    ref_noise: f64,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    if count < 2 {
        return Err(Error::TooFewReferences(count));
    }
    ReferenceFamily::new(victim, ref_noise, DEFAULT_HETEROGENEITY, seed)?.members(count)
}

/// Clustered clouds unrelated to the victim, each with its own centres.
/// Member `count` (one past the references) serves as the innocent suspect.
pub fn gen_independent(cfg: &SynthConfig, index: u64) -> Result<PointCloud> {
    cfg.validate()?;
    clustered_cloud(cfg, INDEPENDENT_STREAM + index)
}

/// Everything one verification run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub victim: PointCloud,
    pub suspect: PointCloud,
    pub references: Vec<PointCloud>,
    pub innocent: PointCloud,
}

pub fn gen_scenario(cfg: &SynthConfig, references: usize) -> Result<Scenario> {
    if references < 2 {
        return Err(Error::TooFewReferences(references));
    }
    let victim = gen_victim(cfg)?;
    let suspect = gen_suspect(&victim, cfg.suspect_noise, cfg.seed)?;
    let (refs, innocent) = match cfg.reference_mode {
        ReferenceMode::Family => {
            let fam = ReferenceFamily::new(&victim, cfg.ref_noise, cfg.heterogeneity, cfg.seed)?;
            (fam.members(references)?, fam.innocent()?)
        }
        ReferenceMode::Independent => {
            let refs = (0..references as u64)
                .into_par_iter()
                .map(|i| gen_independent(cfg, i))
                .collect::<Result<Vec<_>>>()?;
            (refs, gen_independent(cfg, references as u64)?)
        }
    };
    Ok(Scenario {
        victim,
        suspect,
        references: refs,
        innocent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            count: 400,
            dim: 16,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn victim_rows_are_unit_and_reproducible() {
        let v = gen_victim(&small()).unwrap();
        assert!(v.row_norms().iter().all(|n| (n - 1.0).abs() < 1e-12));
        assert_eq!(v, gen_victim(&small()).unwrap());
        let other = SynthConfig { seed: 1, ..small() };
        assert_ne!(v, gen_victim(&other).unwrap());
    }

    #[test]
    fn collapsed_mixture_is_one_point() {
        let cfg = SynthConfig {
            clusters: 1,
            cluster_spread: 0.0,
            ..small()
        };
        let v = gen_victim(&cfg).unwrap();
        assert!(v.rows().all(|r| r == v.row(0)));
    }

    #[test]
    fn config_validation() {
        let bad = [
            SynthConfig {
                count: 16,
                ..small()
            },
            SynthConfig { dim: 1, ..small() },
            SynthConfig {
                clusters: 0,
                ..small()
            },
            SynthConfig {
                ref_noise: 0.01,
                ..small()
            },
            SynthConfig {
                suspect_noise: -1.0,
                ..small()
            },
            SynthConfig {
                heterogeneity: 1.0,
                ..small()
            },
        ];
        for cfg in bad {
            assert!(gen_victim(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn suspect_noise_level() {
        let v = gen_victim(&SynthConfig {
            count: 2000,
            dim: 128,
            ..small()
        })
        .unwrap();
        assert_eq!(gen_suspect(&v, 0.0, 3).unwrap(), v);
        let s = gen_suspect(&v, 0.01, 3).unwrap();
        let score = crate::estimator::mean_squared_distance(&s, &v).unwrap();
        assert!((score - 0.0128).abs() / 0.0128 < 0.1, "{score}");
    }

    #[test]
    fn references_are_unit_distinct_and_reproducible() {
        let v = gen_victim(&small()).unwrap();
        let refs = gen_references(&v, 3, 0.3, 5).unwrap();
        assert_eq!(refs.len(), 3);
        for r in &refs {
            assert!(r.row_norms().iter().all(|n| (n - 1.0).abs() < 1e-12));
        }
        assert_ne!(refs[0], refs[1]);
        assert_ne!(refs[1], refs[2]);
        assert_eq!(refs, gen_references(&v, 3, 0.3, 5).unwrap());
        assert!(gen_references(&v, 1, 0.3, 5).is_err());
    }

    #[test]
    fn references_sit_at_the_configured_noise_level() {
        let v = gen_victim(&SynthConfig {
            count: 2000,
            dim: 64,
            ..small()
        })
        .unwrap();
        let refs = gen_references(&v, 2, 0.3, 1).unwrap();
        let d = crate::estimator::mean_squared_distance(&refs[0], &v).unwrap();
        // roughly the squared chord length for a perturbation of norm 0.3
        assert!(d > 0.05 && d < 0.15, "{d}");
    }

    #[test]
    fn scenario_modes() {
        let fam = gen_scenario(&small(), 3).unwrap();
        assert_eq!(fam.references.len(), 3);
        assert!(!fam.references.contains(&fam.innocent));
        let ind = gen_scenario(
            &SynthConfig {
                reference_mode: ReferenceMode::Independent,
                ..small()
            },
            3,
        )
        .unwrap();
        assert_ne!(ind.references[0], ind.references[1]);
        assert!(ind
            .innocent
            .row_norms()
            .iter()
            .all(|n| (n - 1.0).abs() < 1e-12));
    }
}
