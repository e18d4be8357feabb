//! Student-t tail probabilities through the regularized incomplete beta
//! function.

use statrs::function::beta::checked_beta_reg;

use crate::error::{Error, Result};

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "incomplete beta needs finite a, b (got a={a}, b={b})"
        )));
    }
    checked_beta_reg(a, b, x)
        .map_err(|e| Error::InvalidParameter(format!("incomplete beta (a={a}, b={b}, x={x}): {e}")))
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || t.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "student t tail needs df > 0 and a number t (got t={t}, df={df})"
        )));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    Ok(incomplete_beta(df / 2.0, 0.5, x)?.clamp(0.0, 1.0))
}

/// Student-t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    let tail = student_t_two_tailed(t, df)? / 2.0;
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta_edges_and_symmetric_case() {
        assert_eq!(incomplete_beta(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(incomplete_beta(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            incomplete_beta(3.0, 3.0, 0.5).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        // I_x(1, b) = 1 − (1−x)^b
        for &x in &[0.01, 0.3, 0.77, 0.999] {
            let expect = 1.0 - (1.0f64 - x).powf(4.5);
            assert_relative_eq!(
                incomplete_beta(1.0, 4.5, x).unwrap(),
                expect,
                epsilon = 1e-13
            );
        }
        // I_x(a, 1) = x^a
        assert_relative_eq!(
            incomplete_beta(2.5, 1.0, 0.4).unwrap(),
            0.4f64.powf(2.5),
            max_relative = 1e-12
        );
        assert!(incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(incomplete_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn df_one_is_cauchy() {
        for &t in &[0.1f64, 1.0, 3.0, 40.0] {
            let expect = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
            assert_relative_eq!(
                student_t_two_tailed(t, 1.0).unwrap(),
                expect,
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn df_two_closed_form() {
        for &t in &[-30.0, -2.0, -0.3, 0.0, 0.5, 4.0, 15.588457268119896, 300.0] {
            let expect = 0.5 * (1.0 + t / (t * t + 2.0f64).sqrt());
            assert!((student_t_cdf(t, 2.0).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_extremes() {
        assert_eq!(student_t_two_tailed(0.0, 5.0).unwrap(), 1.0);
        assert_eq!(student_t_two_tailed(f64::INFINITY, 5.0).unwrap(), 0.0);
        assert!(student_t_two_tailed(1.0, 0.0).is_err());
        assert_eq!(
            student_t_two_tailed(2.5, 7.0).unwrap(),
            student_t_two_tailed(-2.5, 7.0).unwrap()
        );
    }
}
