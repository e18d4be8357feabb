//! Point-cloud alignment: recover the similarity transform that maps a
//! suspect cloud onto a unit-norm victim cloud.
//!
//! The scale comes from a least-squares hypersphere fit of the suspect cloud
//! (a unit-norm victim sits on the unit sphere, so `α = 1 / r`). Rotation and
//! translation then come from the SVD of the centred cross-covariance of the
//! scaled suspect and the victim, with the usual determinant correction so the
//! result is always a proper rotation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{self, PointCloud, RotationMatrix};
use crate::linalg::Svd;

/// Relative pseudo-inverse cutoff multiplier; see [`fit_hypersphere`].
pub const PINV_RTOL: f64 = 1e-12;

/// Victim rows must satisfy `|‖q_i‖ − 1| ≤ UNIT_NORM_TOL`.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Moore–Penrose pseudo-inverse via SVD. Singular values below
/// `rtol · σ_max` are treated as zero. Returns the inverse and the numerical
/// rank.
pub fn pseudo_inverse(m: &DMatrix<f64>, rtol: f64) -> Result<(DMatrix<f64>, usize)> {
    Ok(Svd::new(m)?.pseudo_inverse(rtol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereFit {
    pub center: DVector<f64>,
    pub radius: f64,
    /// RMS of `‖p_i − c‖ − r` over the fitted points.
    pub residual: f64,
}

/// Algebraic least-squares hypersphere fit.
///
/// Solves `A x ≈ b` with rows `[−2 p_iᵀ, 1]`, `b_i = −‖p_i‖²` and
/// `x = [c; cᵀc − r²]` as `x* = (AᵀA)⁺ Aᵀ b`. Singular values of `AᵀA` below
/// `1e-12 · σ_max · max(N, n+1)` count as zero, and any such rank loss is
/// reported as a degenerate fit.
///
/// The points are shifted to their centroid and divided by their RMS spread
/// before the normal equations are formed; the fit is equivariant under that
/// change of coordinates, which is undone on the result.
pub fn fit_hypersphere(cloud: &PointCloud) -> Result<SphereFit> {
    let (count, dim) = (cloud.count(), cloud.dim());
    if count < dim + 1 {
        return Err(Error::DegenerateFit(format!(
            "need at least n+1 = {} points, got {count}",
            dim + 1
        )));
    }
    let mean = cloud.centroid();
    let mut p = cloud.to_matrix();
    for mut row in p.row_iter_mut() {
        row -= mean.transpose();
    }
    let spread = (p.norm_squared() / count as f64).sqrt();
    if spread == 0.0 {
        return Err(Error::DegenerateFit("all points coincide".into()));
    }
    p /= spread;

    let sq: DVector<f64> = DVector::from_iterator(count, p.row_iter().map(|r| r.norm_squared()));
    let ones = DVector::<f64>::from_element(count, 1.0);
    let pt = p.transpose();

    // normal equations without materialising A
    let mut ata = DMatrix::zeros(dim + 1, dim + 1);
    ata.view_mut((0, 0), (dim, dim))
        .copy_from(&(&pt * &p * 4.0));
    let col_sum = &pt * &ones;
    ata.view_mut((0, dim), (dim, 1))
        .copy_from(&(&col_sum * -2.0));
    ata.view_mut((dim, 0), (1, dim))
        .copy_from(&(col_sum.transpose() * -2.0));
    ata[(dim, dim)] = count as f64;

    let mut atb = DVector::zeros(dim + 1);
    atb.rows_mut(0, dim).copy_from(&(&pt * &sq * 2.0));
    atb[dim] = -sq.sum();

    let rtol = PINV_RTOL * count.max(dim + 1) as f64;
    let (pinv, rank) = pseudo_inverse(&ata, rtol)?;
    if rank < dim + 1 {
        return Err(Error::DegenerateFit(format!(
            "design matrix has rank {rank} < {}; points are affinely degenerate",
            dim + 1
        )));
    }
    let x = pinv * atb;
    let c_norm: DVector<f64> = x.rows(0, dim).into_owned();
    let r2 = c_norm.norm_squared() - x[dim];
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::DegenerateFit(format!(
            "cᵀc − x₂ = {r2} is not positive"
        )));
    }
    let radius = r2.sqrt() * spread;
    let center = c_norm * spread + mean;

    let residual = (cloud
        .rows()
        .map(|r| {
            let d = r
                .iter()
                .zip(center.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                - radius;
            d * d
        })
        .sum::<f64>()
        / count as f64)
        .sqrt();

    Ok(SphereFit {
        center,
        radius,
        residual,
    })
}

/// `α_e = 1 / r` from the hypersphere fit of the suspect cloud.
pub fn estimate_scale(suspect: &PointCloud) -> Result<f64> {
    Ok(1.0 / fit_hypersphere(suspect)?.radius)
}

/// Kabsch step: the proper rotation `R` and offset `d` minimising
/// `Σ ‖R p_i + d − q_i‖²`.
///
/// `H = Σ (p_i − c_p)(q_i − c_q)ᵀ = UΣVᵀ`, `R = V·diag(1, …, 1, det(VUᵀ))·Uᵀ`,
/// `d = c_q − R c_p`.
pub fn estimate_rotation_translation(
    suspect_scaled: &PointCloud,
    victim: &PointCloud,
) -> Result<(RotationMatrix, DVector<f64>)> {
    suspect_scaled.check_same_shape(victim)?;
    if victim.count() < 2 {
        return Err(Error::InvalidCloud(
            "need at least 2 points to align".into(),
        ));
    }
    let cp = suspect_scaled.centroid();
    let cq = victim.centroid();
    let mut p = suspect_scaled.to_matrix();
    let mut q = victim.to_matrix();
    for mut row in p.row_iter_mut() {
        row -= cp.transpose();
    }
    for mut row in q.row_iter_mut() {
        row -= cq.transpose();
    }
    let h = p.transpose() * q;
    let svd = Svd::new(&h)?;
    let mut v = svd.v;
    if v.determinant() * svd.u.determinant() < 0.0 {
        // flip the axis with the weakest correlation
        v.column_mut(v.ncols() - 1).neg_mut();
    }
    let r = v * svd.u.transpose();
    let d = &cq - &r * &cp;
    Ok((RotationMatrix::new_unchecked(r), d))
}

/// Estimated alignment `f(p) = α R p + d` and its mean squared residual.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEstimate {
    pub rotation: RotationMatrix,
    pub scale: f64,
    pub translation: DVector<f64>,
    pub alignment_error: f64,
}

impl AlignmentEstimate {
    pub fn identity(n: usize) -> Self {
        Self {
            rotation: RotationMatrix::identity(n),
            scale: 1.0,
            translation: DVector::zeros(n),
            alignment_error: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    /// `α R p + d`.
    pub fn apply_vector(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.rotation.apply(p)?;
        x.iter_mut()
            .zip(self.translation.iter())
            .for_each(|(e, d)| *e = self.scale * *e + d);
        Ok(x)
    }

    /// `Rᵀ (q − d) / α`, the map from victim space back to suspect space.
    pub fn invert_vector(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        let shifted: Vec<f64> = q
            .iter()
            .zip(self.translation.iter())
            .map(|(a, d)| (a - d) / self.scale)
            .collect();
        self.rotation.transpose().apply(&shifted)
    }
}

/// Full alignment of `suspect` onto `victim`: estimate the scale, rescale the
/// suspect, then solve for rotation and translation on the rescaled cloud.
pub fn align(suspect: &PointCloud, victim: &PointCloud) -> Result<AlignmentEstimate> {
    suspect.check_same_shape(victim)?;
    for (row, n) in victim.row_norms().into_iter().enumerate() {
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { row, norm: n });
        }
    }
    let alpha = estimate_scale(suspect)?;
    let scaled = geometry::scale(suspect, alpha)?;
    let (rotation, translation) = estimate_rotation_translation(&scaled, victim)?;
    let mut est = AlignmentEstimate {
        rotation,
        scale: alpha,
        translation,
        alignment_error: 0.0,
    };
    let aligned = apply_alignment(suspect, &est)?;
    est.alignment_error = mean_squared_distance(&aligned, victim)?;
    Ok(est)
}

/// Row-wise `α R p_i + d` (rotate, then scale, then translate).
pub fn apply_alignment(cloud: &PointCloud, est: &AlignmentEstimate) -> Result<PointCloud> {
    let rotated = geometry::rotate(cloud, &est.rotation)?;
    let scaled = geometry::scale(&rotated, est.scale)?;
    geometry::translate(&scaled, est.translation.as_slice())
}

/// Row-wise inverse of [`apply_alignment`].
pub fn apply_inverse_alignment(cloud: &PointCloud, est: &AlignmentEstimate) -> Result<PointCloud> {
    let neg: Vec<f64> = est.translation.iter().map(|d| -d).collect();
    let shifted = geometry::translate(cloud, &neg)?;
    let scaled = geometry::scale(&shifted, 1.0 / est.scale)?;
    geometry::rotate(&scaled, &est.rotation.transpose())
}

/// `(1/N) Σ ‖a_i − b_i‖²`.
pub fn mean_squared_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.check_same_shape(b)?;
    let total: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(total / a.count() as f64)
}
