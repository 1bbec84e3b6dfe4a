//! Diagonal Gaussian policy head squashed through `tanh`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside the log of the squashing Jacobian.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Mean and (clamped) log standard deviation of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// True where the raw log-std fell outside the clamp range.
    clamped: Vec<bool>,
}

impl PolicyHead {
    /// Splits a raw network output `[mean | log_std]` and clamps the log-std.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if !raw.len().is_multiple_of(2) {
            return Err(Error::Dimension {
                context: "policy head output",
                expected: raw.len() + 1,
                got: raw.len(),
            });
        }
        let n = raw.len() / 2;
        let mut log_std = Vec::with_capacity(n);
        let mut clamped = Vec::with_capacity(n);
        for &v in &raw[n..] {
            let c = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
            clamped.push(c != v);
            log_std.push(c);
        }
        Ok(PolicyHead {
            mean: raw[..n].to_vec(),
            log_std,
            clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Reparameterized draw `a = tanh(mean + std * xi)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianSample {
        let xi: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with(xi)
    }

    /// Same as [`PolicyHead::sample`] with the standard normal draws given.
    pub fn sample_with(&self, xi: Vec<f64>) -> GaussianSample {
        let mut action = Vec::with_capacity(self.dim());
        let mut std = Vec::with_capacity(self.dim());
        let mut log_prob = 0.0;
        for i in 0..self.dim() {
            let s = self.log_std[i].exp();
            let a = (self.mean[i] + s * xi[i]).tanh();
            log_prob += -0.5 * xi[i] * xi[i] - self.log_std[i] - HALF_LN_2PI
                - (1.0 - a * a + SQUASH_EPS).ln();
            action.push(a);
            std.push(s);
        }
        GaussianSample {
            action,
            log_prob,
            xi,
            std,
        }
    }

    /// Log-density of the squashed action whose pre-squash value is `u`.
    pub fn log_prob_of(&self, u: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let s = self.log_std[i].exp();
                let z = (u[i] - self.mean[i]) / s;
                let a = u[i].tanh();
                -0.5 * z * z - self.log_std[i] - HALF_LN_2PI - (1.0 - a * a + SQUASH_EPS).ln()
            })
            .sum()
    }

    /// Gradient of `L = dl_dlogp * log_prob + sum_i dl_da[i] * action[i]`
    /// with respect to the raw head output `[mean | log_std]`, holding the
    /// noise `xi` fixed. Clamped log-std entries get zero gradient.
    pub fn backward(&self, s: &GaussianSample, dl_da: &[f64], dl_dlogp: f64) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            let a = s.action[i];
            let one_m = 1.0 - a * a;
            // d log_prob / d a through the Jacobian term
            let dlogp_da = 2.0 * a / (one_m + SQUASH_EPS);
            let dl_du = dl_dlogp * dlogp_da * one_m + dl_da[i] * one_m;
            out[i] = dl_du;
            if !self.clamped[i] {
                out[n + i] = dl_du * s.std[i] * s.xi[i] - dl_dlogp;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    /// Squashed action in `(-1, 1)`.
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub xi: Vec<f64>,
    pub std: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn collapsed_head_is_deterministic() {
        let head = PolicyHead::from_raw(&[0.0, 0.0, -20.0, -25.0]).unwrap();
        assert_eq!(head.log_std, vec![-20.0, -20.0]);
        let a = head.sample(&mut stream(1, Stream::Policy));
        let b = head.sample(&mut stream(1, Stream::Policy));
        assert_eq!(a, b);
        assert!(a.action.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn actions_stay_inside_open_interval() {
        let head = PolicyHead::from_raw(&[0.5, -0.3, 2.0, 2.0]).unwrap();
        let mut rng = stream(2, Stream::Policy);
        for _ in 0..10_000 {
            let s = head.sample(&mut rng);
            assert!(s.action.iter().all(|a| a.abs() <= 1.0));
            assert!(s.log_prob.is_finite());
        }
    }

    #[test]
    fn sample_log_prob_matches_density_formula() {
        let head = PolicyHead::from_raw(&[0.2, -0.4, -0.5, 0.1]).unwrap();
        let s = head.sample(&mut stream(3, Stream::Policy));
        let u: Vec<f64> = (0..2).map(|i| head.mean[i] + s.std[i] * s.xi[i]).collect();
        assert!((head.log_prob_of(&u) - s.log_prob).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let raw = [0.3, -0.7, 0.2, -0.4, -1.1, 0.5];
        let xi = vec![0.8, -1.2, 0.3];
        let dl_da = [0.9, -0.4, 1.7];
        let w = 0.37;
        let objective = |r: &[f64]| {
            let h = PolicyHead::from_raw(r).unwrap();
            let s = h.sample_with(xi.clone());
            w * s.log_prob + s.action.iter().zip(&dl_da).map(|(a, g)| a * g).sum::<f64>()
        };
        let head = PolicyHead::from_raw(&raw).unwrap();
        let s = head.sample_with(xi.clone());
        let grad = head.backward(&s, &dl_da, w);
        let h = 1e-6;
        for k in 0..raw.len() {
            let mut p = raw.to_vec();
            let mut m = raw.to_vec();
            p[k] += h;
            m[k] -= h;
            let fd = (objective(&p) - objective(&m)) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel <= 1e-6, "k={k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn clamped_log_std_has_no_gradient() {
        let head = PolicyHead::from_raw(&[0.0, 5.0]).unwrap();
        let s = head.sample_with(vec![0.1]);
        assert_eq!(head.backward(&s, &[1.0], 1.0)[1], 0.0);
    }

    /// Entropy of `tanh(u)`, `u ~ N(m, s^2)`: Gaussian entropy plus
    /// `E[ln(1 - tanh(u)^2)]`, the expectation by fine trapezoidal quadrature.
    fn squashed_entropy_1d(m: f64, s: f64) -> f64 {
        let gauss = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s * s).ln();
        let n = 200_000;
        let (lo, hi) = (m - 12.0 * s, m + 12.0 * s);
        let du = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let u = lo + i as f64 * du;
            let pdf = (-(u - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            // ln(1 - tanh^2 u) = ln(sech^2 u), written stably
            let ln_jac = 2.0 * (std::f64::consts::LN_2 - u.abs() - (-2.0 * u.abs()).exp().ln_1p());
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += wgt * pdf * ln_jac;
        }
        gauss + acc * du
    }

    #[test]
    fn monte_carlo_entropy_matches_quadrature() {
        let (m, ls) = ([0.3, -0.6], [-0.7f64, -1.2]);
        let head = PolicyHead::from_raw(&[m[0], m[1], ls[0], ls[1]]).unwrap();
        let want: f64 = (0..2).map(|i| squashed_entropy_1d(m[i], ls[i].exp())).sum();
        let mut rng = stream(4, Stream::Policy);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = -head.sample(&mut rng).log_prob;
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let sd = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - want).abs() <= 3.0 * sd, "{mean} vs {want} (3 sigma = {})", 3.0 * sd);
    }
}
