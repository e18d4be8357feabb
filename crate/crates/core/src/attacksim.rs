//! Seeded RST attacks. One global transform is applied to every row.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, random_rotation_in_plane, random_unit_direction, seeded_rng, PointCloud, RotationMatrix,
    RstOrder, RstParams,
};

pub const MAX_DEGREES: f64 = 180.0;
pub const SCALE_RANGE: (f64, f64) = (0.1, 10.0);
pub const TRANSLATION_BOUND: f64 = 10.0;
pub const DEFAULT_REPETITIONS: usize = 10;

const PARAM_STREAM: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Rotation,
    Scaling,
    Translation,
    Mixed,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Rotation,
        AttackKind::Scaling,
        AttackKind::Translation,
        AttackKind::Mixed,
    ];

    fn rotates(self) -> bool {
        matches!(self, AttackKind::Rotation | AttackKind::Mixed)
    }

    fn scales(self) -> bool {
        matches!(self, AttackKind::Scaling | AttackKind::Mixed)
    }

    fn translates(self) -> bool {
        matches!(self, AttackKind::Translation | AttackKind::Mixed)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Rotation => "rotation",
            AttackKind::Scaling => "scaling",
            AttackKind::Translation => "translation",
            AttackKind::Mixed => "mixed",
        })
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rotation" | "rotate" => Ok(AttackKind::Rotation),
            "scaling" | "scale" => Ok(AttackKind::Scaling),
            "translation" | "translate" => Ok(AttackKind::Translation),
            "mixed" => Ok(AttackKind::Mixed),
            other => Err(Error::InvalidParameter(format!(
                "unknown attack kind `{other}`"
            ))),
        }
    }
}

/// What to attack with. Unset parameters are drawn from the seeded RNG.
///
/// With `translation_len` set, the offset has that length and points along
/// `random_unit_direction(n, seed)`. Without it every component is drawn
/// uniformly from `[−10, 10]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub degrees: Option<f64>,
    pub scale: Option<f64>,
    pub translation_len: Option<f64>,
    pub order: RstOrder,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, seed: u64) -> Self {
        Self {
            kind,
            degrees: None,
            scale: None,
            translation_len: None,
            order: RstOrder::Rst,
            seed,
        }
    }

    pub fn rotation(degrees: f64, seed: u64) -> Self {
        Self {
            degrees: Some(degrees),
            ..Self::new(AttackKind::Rotation, seed)
        }
    }

    pub fn scaling(scale: f64, seed: u64) -> Self {
        Self {
            scale: Some(scale),
            ..Self::new(AttackKind::Scaling, seed)
        }
    }

    pub fn translation(length: f64, seed: u64) -> Self {
        Self {
            translation_len: Some(length),
            ..Self::new(AttackKind::Translation, seed)
        }
    }

    pub fn with_order(mut self, order: RstOrder) -> Self {
        self.order = order;
        self
    }

    /// Same spec for repetition `rep`, seeded with `seed + rep`.
    pub fn repetition(&self, rep: u64) -> Self {
        Self {
            seed: repetition_seed(self.seed, rep),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unused = |name: &str| {
            Err(Error::InvalidParameter(format!(
                "{name} is not used by a {} attack",
                self.kind
            )))
        };
        if let Some(deg) = self.degrees {
            if !self.kind.rotates() {
                return unused("a rotation angle");
            }
            if !(deg.abs() <= MAX_DEGREES) {
                return Err(Error::InvalidParameter(format!(
                    "rotation angle must lie in [-180, 180] degrees (got {deg})"
                )));
            }
        }
        if let Some(a) = self.scale {
            if !self.kind.scales() {
                return unused("a scale factor");
            }
            if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "scale factor must lie in [0.1, 10] (got {a})"
                )));
            }
        }
        if let Some(len) = self.translation_len {
            if !self.kind.translates() {
                return unused("a translation length");
            }
            if !(0.0..=TRANSLATION_BOUND).contains(&len) {
                return Err(Error::InvalidParameter(format!(
                    "translation length must lie in [0, 10] (got {len})"
                )));
            }
        }
        Ok(())
    }
}

pub fn repetition_seed(seed: u64, rep: u64) -> u64 {
    seed.wrapping_add(rep)
}

/// Concrete parameters for an `n`-dimensional cloud. Components the kind does
/// not touch are the identity.
pub fn sample_attack(spec: &AttackSpec, dim: usize) -> Result<RstParams> {
    spec.validate()?;
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "attacks need dimension >= 2 (got {dim})"
        )));
    }
    let mut rng = seeded_rng(spec.seed, PARAM_STREAM);
    let rotation = if spec.kind.rotates() {
        let deg = spec
            .degrees
            .unwrap_or_else(|| rng.random_range(-MAX_DEGREES..=MAX_DEGREES));
        random_rotation_in_plane(dim, deg, spec.seed)?
    } else {
        RotationMatrix::identity(dim)
    };
    let scale = if spec.kind.scales() {
        spec.scale
            .unwrap_or_else(|| rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1))
    } else {
        1.0
    };
    let translation = if spec.kind.translates() {
        match spec.translation_len {
            Some(len) => {
                let dir = random_unit_direction(dim, spec.seed)?;
                DVector::from_iterator(dim, dir.into_iter().map(|x| x * len))
            }
            None => DVector::from_fn(dim, |_, _| {
                rng.random_range(-TRANSLATION_BOUND..=TRANSLATION_BOUND)
            }),
        }
    } else {
        DVector::zeros(dim)
    };
    RstParams::new(rotation, scale, translation, spec.order)
}

/// Attack every row with one sampled transform; returns the ground truth too.
pub fn attack(cloud: &PointCloud, spec: &AttackSpec) -> Result<(PointCloud, RstParams)> {
    let params = sample_attack(spec, cloud.dim())?;
    let attacked = geometry::apply_rst(cloud, &params)?;
    Ok((attacked, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cloud() -> PointCloud {
        PointCloud::from_rows(&[[1.0, 0.0, 0.5], [0.0, -1.0, 2.0], [0.3, 0.3, 0.3]]).unwrap()
    }

    #[test]
    fn zero_rotation_is_identity() {
        let p = sample_attack(&AttackSpec::rotation(0.0, 3), 3).unwrap();
        assert_eq!(p.rotation, RotationMatrix::identity(3));
        assert_eq!(p.scale, 1.0);
        assert!(p.translation.iter().all(|&x| x == 0.0));
        let (out, _) = attack(&cloud(), &AttackSpec::rotation(0.0, 3)).unwrap();
        assert_eq!(out, cloud());
    }

    #[test]
    fn mixed_is_deterministic_and_samples_everything() {
        let spec = AttackSpec::new(AttackKind::Mixed, 11);
        let a = sample_attack(&spec, 16).unwrap();
        let b = sample_attack(&spec, 16).unwrap();
        assert_eq!(a, b);
        assert!(a.rotation.distance_from_identity() > 0.0);
        assert!((0.1..=10.0).contains(&a.scale));
        assert!(a.translation.iter().all(|x| x.abs() <= 10.0));
        assert!(a.translation.iter().any(|&x| x != 0.0));
        assert_ne!(a, sample_attack(&spec.repetition(1), 16).unwrap());
    }

    #[test]
    fn fixed_length_translation() {
        let p = sample_attack(&AttackSpec::translation(5.0, 9), 8).unwrap();
        assert_abs_diff_eq!(p.translation.norm(), 5.0, epsilon = 1e-12);
        let dir = random_unit_direction(8, 9).unwrap();
        for (d, u) in p.translation.iter().zip(dir) {
            assert_abs_diff_eq!(*d, 5.0 * u, epsilon = 1e-12);
        }
        assert_eq!(p.scale, 1.0);
        assert_eq!(p.rotation, RotationMatrix::identity(8));
    }

    #[test]
    fn single_kinds_leave_other_parts_alone() {
        let s = sample_attack(&AttackSpec::new(AttackKind::Scaling, 1), 4).unwrap();
        assert_eq!(s.rotation, RotationMatrix::identity(4));
        assert!(s.translation.iter().all(|&x| x == 0.0));
        let t = sample_attack(&AttackSpec::new(AttackKind::Translation, 1), 4).unwrap();
        assert_eq!(t.scale, 1.0);
        assert!(t.translation.iter().all(|x| x.abs() <= 10.0));
    }

    #[test]
    fn out_of_range_and_unused_fields_rejected() {
        assert!(sample_attack(&AttackSpec::rotation(181.0, 0), 4).is_err());
        assert!(sample_attack(&AttackSpec::scaling(0.05, 0), 4).is_err());
        assert!(sample_attack(&AttackSpec::scaling(f64::NAN, 0), 4).is_err());
        assert!(sample_attack(&AttackSpec::translation(10.5, 0), 4).is_err());
        let mut spec = AttackSpec::rotation(30.0, 0);
        spec.scale = Some(2.0);
        assert!(spec.validate().is_err());
        assert!(sample_attack(&AttackSpec::rotation(30.0, 0), 1).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Mixed".parse::<AttackKind>().unwrap(), AttackKind::Mixed);
        assert_eq!("scale".parse::<AttackKind>().unwrap(), AttackKind::Scaling);
        assert!("shear".parse::<AttackKind>().is_err());
    }
}
