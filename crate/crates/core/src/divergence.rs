//! Closed-form divergences between 2-D Gaussians.
//!
//! `kld(a, b)` is `KL(a || b) = E_a[ln a - ln b]`. `gjsd` is the generalized
//! Jensen-Shannon divergence built from KL terms against the alpha-weighted
//! geometric interpolation of the two Gaussians, which has a closed form and
//! is symmetric at `alpha = 0.5`.

use std::fmt;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{invert_spd, Gaussian2, MIN_DET};

/// Interpolation weight, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self(0.5)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Kld,
    Gwd,
    #[default]
    Gjsd,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Kld => "kld",
            DivergenceKind::Gwd => "gwd",
            DivergenceKind::Gjsd => "gjsd",
        })
    }
}

fn det(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn check(g: &Gaussian2) -> Result<()> {
    let d = det(&g.sigma);
    if !(d > MIN_DET) || !d.is_finite() {
        return Err(Error::SingularCovariance { det: d });
    }
    Ok(())
}

/// The Gaussian `N_alpha` with precision `(1-alpha) P_p + alpha P_g` and the
/// matching precision-weighted mean.
pub fn alpha_interpolate(p: &Gaussian2, g: &Gaussian2, alpha: Alpha) -> Result<Gaussian2> {
    check(p)?;
    check(g)?;
    let a = alpha.value();
    let prec_p = invert_spd(&p.sigma)?;
    let prec_g = invert_spd(&g.sigma)?;
    let prec = prec_p * (1.0 - a) + prec_g * a;
    let mut sigma = invert_spd(&prec)?;
    // Symmetrize away rounding so the result passes the SPD check.
    let off = 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]);
    sigma[(0, 1)] = off;
    sigma[(1, 0)] = off;
    let mu = sigma * (prec_p * p.mu * (1.0 - a) + prec_g * g.mu * a);
    Ok(Gaussian2 { mu, sigma })
}

/// `KL(a || b)`.
pub fn kld(a: &Gaussian2, b: &Gaussian2) -> Result<f64> {
    check(a)?;
    check(b)?;
    let prec_b = invert_spd(&b.sigma)?;
    let d = b.mu - a.mu;
    let trace = (prec_b * a.sigma).trace();
    let maha = d.dot(&(prec_b * d));
    let log_det = (det(&b.sigma) / det(&a.sigma)).ln();
    Ok((0.5 * (trace + maha - 2.0 + log_det)).max(0.0))
}

/// Principal square root of a symmetric positive semi-definite 2x2 matrix.
fn sqrt_psd(m: &Matrix2<f64>) -> Matrix2<f64> {
    let eig = m.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Matrix2::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// 2-Wasserstein distance between Gaussians (the square root of
/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)`).
pub fn gwd(a: &Gaussian2, b: &Gaussian2) -> Result<f64> {
    check(a)?;
    check(b)?;
    let root_a = sqrt_psd(&a.sigma);
    let inner = root_a * b.sigma * root_a;
    let inner = (inner + inner.transpose()) * 0.5;
    let cross_term = sqrt_psd(&inner).trace();
    let shape = a.sigma.trace() + b.sigma.trace() - 2.0 * cross_term;
    let dist_sq = (a.mu - b.mu).norm_squared() + shape.max(0.0);
    Ok(dist_sq.max(0.0).sqrt())
}

/// `(1 - alpha) KL(N_alpha || p) + alpha KL(N_alpha || g)`.
pub fn gjsd(p: &Gaussian2, g: &Gaussian2, alpha: Alpha) -> Result<f64> {
    let mid = alpha_interpolate(p, g, alpha)?;
    let a = alpha.value();
    Ok((1.0 - a) * kld(&mid, p)? + a * kld(&mid, g)?)
}

/// Dispatches on `kind`. Argument order is `(prior, gt)` throughout.
pub fn divergence(kind: DivergenceKind, p: &Gaussian2, g: &Gaussian2, alpha: Alpha) -> Result<f64> {
    match kind {
        DivergenceKind::Kld => kld(p, g),
        DivergenceKind::Gwd => gwd(p, g),
        DivergenceKind::Gjsd => gjsd(p, g, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn gauss(mx: f64, my: f64, s: [f64; 3]) -> Gaussian2 {
        Gaussian2::new(Point::new(mx, my), Matrix2::new(s[0], s[1], s[1], s[2])).unwrap()
    }

    fn close(a: &Gaussian2, b: &Gaussian2, tol: f64) -> bool {
        (a.mu - b.mu).abs().max() <= tol && (a.sigma - b.sigma).abs().max() <= tol
    }

    #[test]
    fn alpha_bounds() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(1.0).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert_eq!(Alpha::default().value(), 0.5);
    }

    #[test]
    fn interpolation_endpoints() {
        let p = gauss(1.0, -2.0, [3.0, 0.4, 1.5]);
        let g = gauss(4.0, 0.5, [0.7, -0.2, 2.5]);
        let near_p = alpha_interpolate(&p, &g, Alpha::new(1e-9).unwrap()).unwrap();
        let near_g = alpha_interpolate(&p, &g, Alpha::new(1.0 - 1e-9).unwrap()).unwrap();
        assert!(close(&near_p, &p, 1e-6));
        assert!(close(&near_g, &g, 1e-6));
    }

    #[test]
    fn interpolation_midpoint_equal_covariance() {
        let p = gauss(0.0, 0.0, [1.0, 0.0, 1.0]);
        let g = gauss(2.0, 0.0, [1.0, 0.0, 1.0]);
        let m = alpha_interpolate(&p, &g, Alpha::default()).unwrap();
        assert!(close(&m, &gauss(1.0, 0.0, [1.0, 0.0, 1.0]), 1e-12));
    }

    #[test]
    fn kld_examples() {
        let a = gauss(0.0, 0.0, [1.0, 0.0, 1.0]);
        assert!(kld(&a, &a).unwrap().abs() < 1e-12);
        let b = gauss(1.0, 0.0, [1.0, 0.0, 1.0]);
        assert!((kld(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gwd_examples() {
        let a = gauss(0.0, 0.0, [4.0, 0.0, 1.0]);
        assert!(gwd(&a, &a).unwrap() < 1e-7);
        let shifted = gauss(3.0, 4.0, [4.0, 0.0, 1.0]);
        assert!((gwd(&a, &shifted).unwrap() - 5.0).abs() < 1e-9);
        let unit = gauss(0.0, 0.0, [1.0, 0.0, 1.0]);
        assert!((gwd(&a, &unit).unwrap() - 1.0).abs() < 1e-12);
        assert!((gwd(&a, &unit).unwrap() - gwd(&unit, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gjsd_identity_and_symmetry() {
        let p = gauss(1.0, 2.0, [3.0, 0.5, 2.0]);
        let g = gauss(-1.0, 0.5, [1.0, -0.3, 4.0]);
        assert!(gjsd(&p, &p, Alpha::default()).unwrap() < 1e-12);
        let ab = gjsd(&p, &g, Alpha::default()).unwrap();
        let ba = gjsd(&g, &p, Alpha::default()).unwrap();
        assert!(ab > 0.0);
        assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn singular_inputs_rejected() {
        let ok = gauss(0.0, 0.0, [1.0, 0.0, 1.0]);
        let bad = Gaussian2 {
            mu: Point::zeros(),
            sigma: Matrix2::new(1.0, 1.0, 1.0, 1.0),
        };
        for kind in [
            DivergenceKind::Kld,
            DivergenceKind::Gwd,
            DivergenceKind::Gjsd,
        ] {
            assert!(matches!(
                divergence(kind, &ok, &bad, Alpha::default()),
                Err(Error::SingularCovariance { .. })
            ));
        }
        assert!(alpha_interpolate(&bad, &ok, Alpha::default()).is_err());
    }

    #[test]
    fn kind_serde_names() {
        assert_eq!(
            serde_json::to_string(&DivergenceKind::Gjsd).unwrap(),
            "\"gjsd\""
        );
        let k: DivergenceKind = serde_json::from_str("\"gwd\"").unwrap();
        assert_eq!(k, DivergenceKind::Gwd);
    }
}
