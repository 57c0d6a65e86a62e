//! Variational parameters and their KL divergence.

use libm::exp;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Initialization hyperparameters: means are drawn from `N(0, mu_std^2)` and
/// every `rho` starts at the constant `rho_init` (so `sigma = exp(0.5 *
/// rho_init)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub mu_std: f64,
    pub rho_init: f64,
}

/// A matrix-shaped factorized Gaussian: per-element mean `mu` and free
/// parameter `rho` with `sigma = exp(0.5 * rho)`, which keeps `sigma`
/// strictly positive without clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParam {
    pub mu: Matrix,
    pub rho: Matrix,
}

impl GaussianParam {
    pub fn new(mu: Matrix, rho: Matrix) -> Result<GaussianParam> {
        if mu.shape() != rho.shape() {
            return Err(Error::ShapeMismatch {
                op: "gaussian param",
                left: mu.shape(),
                right: rho.shape(),
            });
        }
        Ok(GaussianParam { mu, rho })
    }

    /// Fresh trainable parameter: `mu ~ N(0, mu_std^2)`, constant `rho`.
    pub fn init(rows: usize, cols: usize, init: &InitConfig, rng: &mut Rng) -> GaussianParam {
        let mut mu = rng.normal_matrix(rows, cols);
        mu.scale(init.mu_std);
        GaussianParam {
            mu,
            rho: Matrix::filled(rows, cols, init.rho_init),
        }
    }

    /// Fresh-init prior: zero-centered with the initialization variance.
    pub fn prior(rows: usize, cols: usize, rho_init: f64) -> GaussianParam {
        GaussianParam {
            mu: Matrix::zeros(rows, cols),
            rho: Matrix::filled(rows, cols, rho_init),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.mu.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.mu.cols()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.mu.shape()
    }

    pub fn n_params(&self) -> usize {
        self.mu.len()
    }

    /// `sigma = exp(0.5 * rho)` elementwise.
    pub fn sigma(&self) -> Matrix {
        self.rho.map(|r| exp(0.5 * r))
    }

    /// Reparameterized sample `mu + sigma ∘ eps`.
    pub fn sample(&self, eps: &Matrix) -> Result<Matrix> {
        if eps.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                op: "sample_weights",
                left: self.shape(),
                right: eps.shape(),
            });
        }
        let mut out = self.mu.clone();
        for ((o, &r), &e) in out
            .data_mut()
            .iter_mut()
            .zip(self.rho.data())
            .zip(eps.data())
        {
            *o += exp(0.5 * r) * e;
        }
        Ok(out)
    }
}

/// Closed-form KL divergence between two factorized Gaussians, summed over
/// elements:
///
/// `KL = sum[ log(sigma_p / sigma_q) + (sigma_q^2 + (mu_q - mu_p)^2) / (2 sigma_p^2) - 1/2 ]`
///
/// In the `rho` parameterization `log(sigma_p / sigma_q) = 0.5 (rho_p - rho_q)`
/// and `sigma^2 = exp(rho)`.
pub fn gaussian_kl(q: &GaussianParam, p: &GaussianParam) -> Result<f64> {
    if q.shape() != p.shape() {
        return Err(Error::ShapeMismatch {
            op: "gaussian_kl",
            left: q.shape(),
            right: p.shape(),
        });
    }
    let mut total = 0.0;
    for i in 0..q.mu.len() {
        let mu_q = q.mu.data()[i];
        let mu_p = p.mu.data()[i];
        let rho_q = q.rho.data()[i];
        let rho_p = p.rho.data()[i];
        let diff = mu_q - mu_p;
        total += 0.5 * (rho_p - rho_q) + (exp(rho_q) + diff * diff) / (2.0 * exp(rho_p)) - 0.5;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(mu: &[f64], rho: &[f64]) -> GaussianParam {
        GaussianParam::new(
            Matrix::from_vec(1, mu.len(), mu.to_vec()).unwrap(),
            Matrix::from_vec(1, rho.len(), rho.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sigma_follows_rho() {
        let p = param(&[0.0], &[-6.0]);
        let sigma = p.sigma().data()[0];
        assert!((sigma - (-3.0f64).exp()).abs() < 1e-15);
        let p = param(&[0.0], &[0.0]);
        assert_eq!(p.sigma().data()[0], 1.0);
    }

    #[test]
    fn sample_zero_noise_returns_mu() {
        let mut rng = Rng::new(1);
        let p = GaussianParam::init(
            3,
            2,
            &InitConfig {
                mu_std: 0.1,
                rho_init: -6.0,
            },
            &mut rng,
        );
        let eps = Matrix::zeros(3, 2);
        assert_eq!(p.sample(&eps).unwrap(), p.mu);
    }

    #[test]
    fn sample_hand_cases() {
        let p = param(&[0.0], &[0.0]);
        let one = Matrix::filled(1, 1, 1.0);
        assert_eq!(p.sample(&one).unwrap().data()[0], 1.0);

        let p = param(&[0.5], &[-6.0]);
        let eps = Matrix::filled(1, 1, 2.0);
        let expected = 0.5 + 2.0 * (-3.0f64).exp();
        assert!((p.sample(&eps).unwrap().data()[0] - expected).abs() < 1e-15);
        assert!((expected - 0.59957).abs() < 1e-5);
    }

    #[test]
    fn sample_shape_mismatch_errors() {
        let p = param(&[0.0, 1.0], &[0.0, 0.0]);
        assert!(p.sample(&Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let mut rng = Rng::new(9);
        let q = GaussianParam::init(
            4,
            4,
            &InitConfig {
                mu_std: 0.5,
                rho_init: -2.0,
            },
            &mut rng,
        );
        assert!(gaussian_kl(&q, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_standard_hand_case() {
        // KL(N(1,1) || N(0,1)) = 0.5
        let q = param(&[1.0], &[0.0]);
        let p = param(&[0.0], &[0.0]);
        assert!((gaussian_kl(&q, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_on_random_pairs() {
        let mut rng = Rng::new(77);
        for _ in 0..1000 {
            let q = param(&[rng.normal()], &[rng.normal()]);
            let p = param(&[rng.normal()], &[rng.normal()]);
            let kl = gaussian_kl(&q, &p).unwrap();
            assert!(kl >= -1e-12, "negative KL {kl}");
        }
    }

    #[test]
    fn kl_matches_monte_carlo_estimate() {
        // E_q[log q(w) - log p(w)] over reparameterized samples.
        let q = param(&[0.3, -0.7], &[-1.0, 0.4]);
        let p = param(&[0.0, 0.1], &[0.0, -0.5]);
        let analytic = gaussian_kl(&q, &p).unwrap();

        // log N(w; mu, var) = -0.5 ((w-mu)^2/var + ln var + ln 2pi)
        let log_normal = |w: f64, mu: f64, rho: f64| -> f64 {
            let var = rho.exp();
            -0.5 * ((w - mu) * (w - mu) / var + var.ln() + (2.0 * core::f64::consts::PI).ln())
        };

        let mut rng = Rng::new(123);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            for i in 0..2 {
                let mu_q = q.mu.data()[i];
                let rho_q = q.rho.data()[i];
                let w = mu_q + (0.5 * rho_q).exp() * rng.normal();
                acc += log_normal(w, mu_q, rho_q)
                    - log_normal(w, p.mu.data()[i], p.rho.data()[i]);
            }
        }
        let mc = acc / n as f64;
        assert!(
            (mc - analytic).abs() / analytic.abs() < 0.01,
            "MC {mc} vs analytic {analytic}"
        );
    }
}
