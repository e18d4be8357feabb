//! Point clouds and the rotation / scaling / translation (RST) algebra.
//!
//! A [`PointCloud`] holds `N` embeddings of dimension `n`, one per row, stored
//! row-major. Row `i` of two clouds always refers to the same input sample,
//! which is what makes row-wise alignment meaningful.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for `RᵀR = I` and `det(R) = 1`.
pub const ROTATION_TOL: f64 = 1e-9;

/// Deterministic generator for `(seed, stream)`. Independent streams of the
/// same seed never overlap.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ordered set of `N` embeddings of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    count: usize,
    dim: usize,
}

impl PointCloud {
    /// Builds a cloud from row-major data. Requires `N >= 1`, `n >= 2` and
    /// finite entries.
    pub fn from_flat(count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidCloud(
                "cloud must contain at least one point".into(),
            ));
        }
        if dim < 2 {
            return Err(Error::InvalidCloud(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        if data.len() != count * dim {
            return Err(Error::InvalidCloud(format!(
                "expected {} values for {count}x{dim}, got {}",
                count * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { data, count, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), dim, data)
    }

    /// Rows of `m` become points.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let data = m.transpose().as_slice().to_vec();
        Self::from_flat(m.nrows(), m.ncols(), data)
    }

    /// `N x n` matrix, one point per row.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.count, self.dim, &self.data)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// First `count` rows.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count > self.count {
            return Err(Error::CountMismatch {
                expected: self.count,
                found: count,
            });
        }
        Self::from_flat(count, self.dim, self.data[..count * self.dim].to_vec())
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for r in self.rows() {
            for (acc, v) in c.iter_mut().zip(r) {
                *acc += v;
            }
        }
        c / self.count as f64
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(norm).collect()
    }

    pub(crate) fn check_same_shape(&self, other: &PointCloud) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.count != other.count {
            return Err(Error::CountMismatch {
                expected: self.count,
                found: other.count,
            });
        }
        Ok(())
    }

    fn map_rows(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut out = vec![0.0; self.data.len()];
        for (src, dst) in self.rows().zip(out.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Self::from_flat(self.count, self.dim, out)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; `None` if either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let d = norm(a) * norm(b);
    (d > 0.0).then(|| dot(a, b) / d)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Orthogonal `n x n` matrix with determinant `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(DMatrix<f64>);

impl RotationMatrix {
    /// Validates orthogonality (`‖RᵀR − I‖_max ≤ 1e-9`) and `det = 1` within 1e-9.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotRotation(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotRotation("non-finite entry".into()));
        }
        let n = m.nrows();
        let dev = (m.transpose() * &m - DMatrix::<f64>::identity(n, n)).amax();
        if dev > ROTATION_TOL {
            return Err(Error::NotRotation(format!("‖RᵀR − I‖_max = {dev:e}")));
        }
        let det = m.clone().determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!("det = {det}")));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `R · v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let out = &self.0 * DVector::from_column_slice(v);
        Ok(out.as_slice().to_vec())
    }

    /// Frobenius distance from the identity.
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.dim();
        (&self.0 - DMatrix::<f64>::identity(n, n)).norm()
    }
}

/// One of the three primitive transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    Rotate,
    Scale,
    Translate,
}

impl Step {
    fn letter(self) -> char {
        match self {
            Step::Rotate => 'R',
            Step::Scale => 'S',
            Step::Translate => 'T',
        }
    }
}

/// Application order of the three primitives, e.g. `R-S-T` rotates first and
/// translates last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RstOrder {
    #[default]
    Rst,
    Rts,
    Srt,
    Str,
    Trs,
    Tsr,
}

impl RstOrder {
    pub const ALL: [RstOrder; 6] = [
        RstOrder::Rst,
        RstOrder::Rts,
        RstOrder::Srt,
        RstOrder::Str,
        RstOrder::Trs,
        RstOrder::Tsr,
    ];

    pub fn steps(self) -> [Step; 3] {
        use Step::*;
        match self {
            RstOrder::Rst => [Rotate, Scale, Translate],
            RstOrder::Rts => [Rotate, Translate, Scale],
            RstOrder::Srt => [Scale, Rotate, Translate],
            RstOrder::Str => [Scale, Translate, Rotate],
            RstOrder::Trs => [Translate, Rotate, Scale],
            RstOrder::Tsr => [Translate, Scale, Rotate],
        }
    }
}

impl fmt::Display for RstOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.steps();
        write!(f, "{}-{}-{}", a.letter(), b.letter(), c.letter())
    }
}

impl FromStr for RstOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .map(|c| c.to_ascii_uppercase())
            .collect();
        RstOrder::ALL
            .into_iter()
            .find(|o| o.to_string().replace('-', "") == letters)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown RST order '{s}'")))
    }
}

impl From<RstOrder> for String {
    fn from(o: RstOrder) -> Self {
        o.to_string()
    }
}

impl TryFrom<String> for RstOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A global RST transform: rotation, uniform scale `α > 0`, translation `d`,
/// applied in `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct RstParams {
    pub rotation: RotationMatrix,
    pub scale: f64,
    pub translation: DVector<f64>,
    pub order: RstOrder,
}

impl RstParams {
    pub fn new(
        rotation: RotationMatrix,
        scale: f64,
        translation: DVector<f64>,
        order: RstOrder,
    ) -> Result<Self> {
        validate_scale(scale)?;
        if translation.len() != rotation.dim() {
            return Err(Error::DimensionMismatch {
                expected: rotation.dim(),
                found: translation.len(),
            });
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "translation has non-finite entries".into(),
            ));
        }
        Ok(Self {
            rotation,
            scale,
            translation,
            order,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rotation: RotationMatrix::identity(n),
            scale: 1.0,
            translation: DVector::zeros(n),
            order: RstOrder::Rst,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    /// Applies the transform to a single vector.
    pub fn apply_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let mut x = v.to_vec();
        for step in self.order.steps() {
            match step {
                Step::Rotate => x = self.rotation.apply(&x)?,
                Step::Scale => x.iter_mut().for_each(|e| *e *= self.scale),
                Step::Translate => x
                    .iter_mut()
                    .zip(self.translation.iter())
                    .for_each(|(e, d)| *e += d),
            }
        }
        Ok(x)
    }
}

fn validate_scale(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "scale factor must be finite and > 0, got {alpha}"
        )));
    }
    Ok(())
}

/// Row-wise `R · p_i`.
pub fn rotate(cloud: &PointCloud, rotation: &RotationMatrix) -> Result<PointCloud> {
    if rotation.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: rotation.dim(),
        });
    }
    // P Rᵀ has rows R p_i
    let out = cloud.to_matrix() * rotation.as_matrix().transpose();
    PointCloud::from_matrix(&out)
}

/// Row-wise `α · p_i`.
pub fn scale(cloud: &PointCloud, alpha: f64) -> Result<PointCloud> {
    validate_scale(alpha)?;
    cloud.map_rows(|src, dst| {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = alpha * s;
        }
    })
}

/// Row-wise `p_i + d`.
pub fn translate(cloud: &PointCloud, offset: &[f64]) -> Result<PointCloud> {
    if offset.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: offset.len(),
        });
    }
    if offset.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "translation has non-finite entries".into(),
        ));
    }
    cloud.map_rows(|src, dst| {
        for ((d, s), o) in dst.iter_mut().zip(src).zip(offset) {
            *d = s + o;
        }
    })
}

/// Applies the three primitives in `params.order`.
pub fn apply_rst(cloud: &PointCloud, params: &RstParams) -> Result<PointCloud> {
    if params.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: params.dim(),
        });
    }
    let mut out = cloud.clone();
    for step in params.order.steps() {
        out = match step {
            Step::Rotate => rotate(&out, &params.rotation)?,
            Step::Scale => scale(&out, params.scale)?,
            Step::Translate => translate(&out, params.translation.as_slice())?,
        };
    }
    Ok(out)
}

/// `(sin θ, cos θ)` for `θ` in degrees, exact at multiples of 90°.
pub fn sin_cos_degrees(degrees: f64) -> (f64, f64) {
    let r = degrees.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        degrees.to_radians().sin_cos()
    }
}

fn gaussian_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_direction_from(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut v = gaussian_vector(n, rng);
        let len = norm(&v);
        if len > 1e-12 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
}

/// Seeded uniformly random unit vector in `R^n`.
pub fn random_unit_direction(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "direction dimension must be >= 1".into(),
        ));
    }
    Ok(unit_direction_from(n, &mut seeded_rng(seed, 0)))
}

/// Seeded orthonormal pair `(u, v)` spanning a random 2-plane.
pub fn random_plane(n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "a rotation plane needs n >= 2, got {n}"
        )));
    }
    let mut rng = seeded_rng(seed, 1);
    let u = unit_direction_from(n, &mut rng);
    let v = loop {
        let mut w = gaussian_vector(n, &mut rng);
        let proj = dot(&w, &u);
        w.iter_mut().zip(&u).for_each(|(x, ui)| *x -= proj * ui);
        let len = norm(&w);
        if len > 1e-8 {
            w.iter_mut().for_each(|x| *x /= len);
            break w;
        }
    };
    Ok((u, v))
}

/// Rotation by `degrees` inside one seeded random 2-plane `(u, v)`:
/// `R = I + (cos θ − 1)(uuᵀ + vvᵀ) + sin θ (uvᵀ − vuᵀ)`.
pub fn random_rotation_in_plane(n: usize, degrees: f64, seed: u64) -> Result<RotationMatrix> {
    if !degrees.is_finite() || !(-180.0..=180.0).contains(&degrees) {
        return Err(Error::InvalidParameter(format!(
            "rotation angle must lie in [-180, 180] degrees, got {degrees}"
        )));
    }
    let (u, v) = random_plane(n, seed)?;
    Ok(plane_rotation(&u, &v, degrees))
}

pub(crate) fn plane_rotation(u: &[f64], v: &[f64], degrees: f64) -> RotationMatrix {
    let n = u.len();
    let (s, c) = sin_cos_degrees(degrees);
    let u = DVector::from_column_slice(u);
    let v = DVector::from_column_slice(v);
    let mut m = DMatrix::identity(n, n);
    if c != 1.0 || s != 0.0 {
        m += (&u * u.transpose() + &v * v.transpose()) * (c - 1.0);
        m += (&u * v.transpose() - &v * u.transpose()) * s;
    }
    RotationMatrix::new_unchecked(m)
}

/// Rotation by `degrees` simultaneously in `⌊n/2⌋` mutually orthogonal random
/// planes. At 180° with even `n` this is exactly `−I`.
pub fn isoclinic_rotation(n: usize, degrees: f64, seed: u64) -> Result<RotationMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let (s, c) = sin_cos_degrees(degrees);
    if c == -1.0 && n.is_multiple_of(2) {
        return Ok(RotationMatrix::new_unchecked(-DMatrix::<f64>::identity(
            n, n,
        )));
    }
    let basis = haar_rotation(n, seed)?.into_inner();
    let mut block = DMatrix::<f64>::identity(n, n);
    for k in 0..n / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        block[(i, i)] = c;
        block[(j, j)] = c;
        block[(i, j)] = -s;
        block[(j, i)] = s;
    }
    Ok(RotationMatrix::new_unchecked(
        &basis * block * basis.transpose(),
    ))
}

/// A Haar-distributed element of SO(n), kept in factored form: the Householder
/// reflections and sign fix of a QR decomposition of an i.i.d. Gaussian matrix.
/// Applying it to a vector costs O(n²) instead of O(n³).
#[derive(Debug, Clone)]
pub struct HaarRotation {
    dim: usize,
    /// Householder unit vectors; entry `k` acts on coordinates `k..n`.
    reflectors: Vec<Vec<f64>>,
    /// Column signs making `diag(R) > 0` in `G = QR`.
    signs: Vec<f64>,
    /// Negate the first column to force `det = +1`.
    flip_first: bool,
}

impl HaarRotation {
    pub fn sample(n: usize, rng: &mut impl Rng) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
        }
        let mut reflectors = Vec::with_capacity(n - 1);
        let mut signs = Vec::with_capacity(n);
        // det(Q) = (−1)^(n−1) for the reflections times the product of signs
        let mut det_sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        for k in 0..n - 1 {
            let z = gaussian_vector(n - k, rng);
            let len = norm(&z);
            let s = if z[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut w = z;
            w[0] += s * len;
            let wn = norm(&w);
            if wn > 0.0 {
                w.iter_mut().for_each(|x| *x /= wn);
            }
            // H z = −s ‖z‖ e₁, so the diagonal entry of R has sign −s
            signs.push(-s);
            det_sign *= -s;
            reflectors.push(w);
        }
        let last: f64 = rng.sample(StandardNormal);
        let s = if last >= 0.0 { 1.0 } else { -1.0 };
        signs.push(s);
        det_sign *= s;
        Ok(Self {
            dim: n,
            reflectors,
            signs,
            flip_first: det_sign < 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `R · x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut y = x.to_vec();
        if self.flip_first {
            y[0] = -y[0];
        }
        y.iter_mut().zip(&self.signs).for_each(|(v, s)| *v *= s);
        for (k, w) in self.reflectors.iter().enumerate().rev() {
            let tail = &mut y[k..];
            let p = 2.0 * dot(w, tail);
            tail.iter_mut().zip(w).for_each(|(t, wi)| *t -= p * wi);
        }
        Ok(y)
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.apply(&e).expect("dimension checked");
            m.column_mut(j).copy_from_slice(&col);
        }
        RotationMatrix::new_unchecked(m)
    }
}

/// Seeded Haar-random rotation in SO(n).
pub fn haar_rotation(n: usize, seed: u64) -> Result<RotationMatrix> {
    Ok(HaarRotation::sample(n, &mut seeded_rng(seed, 2))?.to_rotation())
}
