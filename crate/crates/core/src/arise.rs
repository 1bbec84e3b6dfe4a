//! Steepest-descent RIS equalizer and the two reference configurations.
//!
//! The equalizer drives the scaled pulse `y / y_s` towards the unit pulse
//! `s = [1, 0, .., 0]` by descending `J = mean_k |s_k - y_k / y_s|^2` over the
//! reflection coefficients, then projects each coefficient back onto the
//! unit circle. Pulses inside the loop are computed from the known channels
//! without noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, C64};
use crate::env::{compute_eta, compute_eta_norm, RisConfiguration};
use crate::error::{Error, Result};

/// Consecutive sub-threshold steps required to declare convergence.
pub const PATIENCE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AriseConfig {
    /// Target scale: `y_s = alpha_s * M * |y_0|`.
    pub alpha_s: f64,
    /// Step scale: `mu = alpha_mu * (L + 1) / sum_k |y_k|`.
    pub alpha_mu: f64,
    pub eta_th: f64,
    /// Overshoot margin below the best `eta_n` seen.
    pub eta_d: f64,
    pub max_iters: usize,
}

impl Default for AriseConfig {
    fn default() -> Self {
        AriseConfig {
            alpha_s: 0.1,
            alpha_mu: 10.0,
            eta_th: 1e-5,
            eta_d: 0.5,
            max_iters: 5000,
        }
    }
}

impl AriseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_s > 0.0) {
            return Err(Error::config("alpha_s", "must be positive"));
        }
        if !(self.alpha_mu > 0.0) {
            return Err(Error::config("alpha_mu", "must be positive"));
        }
        if !(self.eta_th > 0.0) {
            return Err(Error::config("eta_th", "must be positive"));
        }
        if !(self.eta_d > 0.0) {
            return Err(Error::config("eta_d", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub eta: f64,
    pub eta_norm: f64,
    pub mu: f64,
    /// `(Re y_0)^2`.
    pub signal_power: f64,
    pub isi_power: f64,
}

impl IterationRecord {
    fn measure(y: &[C64], mu: f64) -> Result<Self> {
        Ok(IterationRecord {
            eta: compute_eta(y)?,
            eta_norm: compute_eta_norm(y)?,
            mu,
            signal_power: y[0].re * y[0].re,
            isi_power: y[1..].iter().map(|v| v.norm_sqr()).sum(),
        })
    }

    /// Analytic SINR of the noiseless pulse under `noise_power`.
    pub fn sinr_db(&self, noise_power: f64) -> f64 {
        10.0 * (self.signal_power / (self.isi_power + noise_power)).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AriseTrace {
    /// Metrics of the starting configuration.
    pub initial: IterationRecord,
    /// One record per update, holding the metrics after that update.
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub y_s: f64,
}

impl AriseTrace {
    pub fn iterations_used(&self) -> usize {
        self.iterations.len()
    }

    pub fn final_eta_norm(&self) -> f64 {
        self.iterations.last().unwrap_or(&self.initial).eta_norm
    }
}

/// `s_k - y_k / y_s` for the unit pulse `s`.
pub fn error_signal(y: &[C64], y_s: f64) -> Vec<C64> {
    y.iter()
        .enumerate()
        .map(|(k, &v)| {
            let s = if k == 0 { 1.0 } else { 0.0 };
            C64::new(s, 0.0) - v / y_s
        })
        .collect()
}

/// `mean_k |s_k - y_k / y_s|^2`.
pub fn cost(y: &[C64], y_s: f64) -> f64 {
    error_signal(y, y_s).iter().map(|e| e.norm_sqr()).sum::<f64>() / y.len() as f64
}

fn check_step(h_bru: &nalgebra::DMatrix<C64>, gamma: &[C64], y: &[C64], y_s: f64) -> Result<()> {
    if !(y_s > 0.0) {
        return Err(Error::Domain(format!("scale y_s = {y_s} must be positive")));
    }
    if gamma.len() != h_bru.nrows() {
        return Err(Error::Dimension {
            context: "reflection coefficients",
            expected: h_bru.nrows(),
            got: gamma.len(),
        });
    }
    if y.len() != h_bru.ncols() {
        return Err(Error::Dimension {
            context: "pulse taps",
            expected: h_bru.ncols(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Descent direction `mean_k conj(h_bru[:, k]) * eps_k`. Equal to
/// `-(y_s / 2) * grad J` with `grad = d/dRe + j d/dIm`.
pub fn update_direction(
    h_bru: &nalgebra::DMatrix<C64>,
    y: &[C64],
    y_s: f64,
) -> Vec<C64> {
    let eps = error_signal(y, y_s);
    let n = y.len() as f64;
    (0..h_bru.nrows())
        .map(|m| {
            h_bru
                .row(m)
                .iter()
                .zip(&eps)
                .map(|(h, e)| h.conj() * e)
                .sum::<C64>()
                / n
        })
        .collect()
}

/// One full-expectation update, before the passivity projection.
pub fn gradient_step(
    gamma: &[C64],
    h_bru: &nalgebra::DMatrix<C64>,
    y: &[C64],
    y_s: f64,
    mu: f64,
) -> Result<Vec<C64>> {
    check_step(h_bru, gamma, y, y_s)?;
    Ok(gamma
        .iter()
        .zip(update_direction(h_bru, y, y_s))
        .map(|(g, d)| g + d * mu)
        .collect())
}

/// Single-window update using only tap `k`.
pub fn sgd_step(
    gamma: &[C64],
    h_bru: &nalgebra::DMatrix<C64>,
    y: &[C64],
    y_s: f64,
    mu: f64,
    k: usize,
) -> Result<Vec<C64>> {
    check_step(h_bru, gamma, y, y_s)?;
    if k >= y.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: y.len() - 1,
        });
    }
    let s = if k == 0 { 1.0 } else { 0.0 };
    let eps = C64::new(s, 0.0) - y[k] / y_s;
    Ok(gamma
        .iter()
        .enumerate()
        .map(|(m, g)| g + h_bru[(m, k)].conj() * eps * mu)
        .collect())
}

/// Step-size control after an update. Returns the (possibly halved) step
/// and the running best `eta_n`, which resets to -1 on overshoot.
pub fn overshoot_control(mu: f64, eta_n_new: f64, eta_n_max: f64, eta_d: f64) -> (f64, f64) {
    if eta_n_new < eta_n_max - eta_d {
        (mu / 2.0, -1.0)
    } else {
        (mu, eta_n_max)
    }
}

/// Initial step size `alpha_mu (L + 1) / sum_k |y_k|`.
pub fn initial_step(y: &[C64], alpha_mu: f64) -> Result<f64> {
    let l1: f64 = y.iter().map(|v| v.norm()).sum();
    if !(l1 > 0.0) {
        return Err(Error::Degenerate("all-zero pulse"));
    }
    Ok(alpha_mu * y.len() as f64 / l1)
}

/// Target scale `alpha_s * M * |y_0|`.
pub fn target_scale(y: &[C64], elements: usize, alpha_s: f64) -> Result<f64> {
    let y_s = alpha_s * elements as f64 * y.first().map_or(0.0, |v| v.norm());
    if !(y_s > 0.0) {
        return Err(Error::Degenerate("zero main tap"));
    }
    Ok(y_s)
}

enum Update {
    Full,
    Cyclic,
}

fn run_inner(
    ch: &ChannelRealization,
    cfg: &AriseConfig,
    init: RisConfiguration,
    update: Update,
) -> Result<(RisConfiguration, AriseTrace)> {
    cfg.validate()?;
    let mut gamma = init.into_inner();
    let mut y = ch.noiseless_pulse(&gamma)?;
    let mut mu = initial_step(&y, cfg.alpha_mu)?;
    let y_s = target_scale(&y, ch.elements(), cfg.alpha_s)?;
    let initial = IterationRecord::measure(&y, mu)?;
    let mut eta_n = initial.eta_norm;
    let mut eta_n_max = -1.0f64;
    let mut streak = 0;
    let mut iterations = Vec::new();
    let mut converged = false;

    for i in 0..cfg.max_iters {
        eta_n_max = eta_n_max.max(eta_n);
        let raw = match update {
            Update::Full => gradient_step(&gamma, &ch.h_bru, &y, y_s, mu)?,
            Update::Cyclic => sgd_step(&gamma, &ch.h_bru, &y, y_s, mu, i % y.len())?,
        };
        gamma = RisConfiguration::normalized(raw).into_inner();
        y = ch.noiseless_pulse(&gamma)?;
        let rec = IterationRecord::measure(&y, mu)?;
        let eta_n_new = rec.eta_norm;
        iterations.push(rec);
        (mu, eta_n_max) = overshoot_control(mu, eta_n_new, eta_n_max, cfg.eta_d);
        if (eta_n_new - eta_n).abs() < cfg.eta_th {
            streak += 1;
        } else {
            streak = 0;
        }
        eta_n = eta_n_new;
        if streak >= PATIENCE {
            converged = true;
            break;
        }
    }

    Ok((
        RisConfiguration::from_raw(gamma),
        AriseTrace {
            initial,
            iterations,
            converged,
            y_s,
        },
    ))
}

/// Runs the equalizer from `init` until `eta_n` settles or `max_iters`.
pub fn run(
    ch: &ChannelRealization,
    cfg: &AriseConfig,
    init: RisConfiguration,
) -> Result<(RisConfiguration, AriseTrace)> {
    run_inner(ch, cfg, init, Update::Full)
}

/// Stochastic variant: each iteration uses a single tap, cycling through
/// `k = 0..=L`.
pub fn run_sgd(
    ch: &ChannelRealization,
    cfg: &AriseConfig,
    init: RisConfiguration,
) -> Result<(RisConfiguration, AriseTrace)> {
    run_inner(ch, cfg, init, Update::Cyclic)
}

/// Phases i.i.d. uniform on `[-pi, pi)`.
pub fn baseline_random<R: Rng + ?Sized>(rng: &mut R, elements: usize) -> RisConfiguration {
    let phases: Vec<f64> = (0..elements)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    RisConfiguration::from_phases(&phases)
}

/// Conjugate phase of each element's first cascaded tap, aligning the
/// reflected main-tap contributions. Zero taps map to 1.
pub fn baseline_inverse(h_bru: &nalgebra::DMatrix<C64>) -> RisConfiguration {
    RisConfiguration::normalized(h_bru.column(0).iter().map(|h| h.conj()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, FadingParams, Geometry};
    use crate::rng::{stream, Stream};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small_channel(seed: u64, elements: usize, delayed_paths: usize) -> ChannelRealization {
        let g = Geometry {
            elements,
            ..Geometry::default()
        };
        let f = FadingParams {
            delayed_paths,
            ..FadingParams::default()
        };
        sample_channels(&mut stream(seed, Stream::Channel), &g, &f).unwrap()
    }

    #[test]
    fn zero_error_leaves_gamma() {
        let h = DMatrix::from_row_slice(1, 2, &[c(0.3, 0.1), c(0.2, -0.4)]);
        let g = vec![c(0.0, 1.0)];
        // y / y_s equals the unit pulse
        let y = vec![c(2.0, 0.0), c(0.0, 0.0)];
        assert_eq!(gradient_step(&g, &h, &y, 2.0, 0.7).unwrap(), g);
        assert_eq!(sgd_step(&g, &h, &y, 2.0, 0.7, 1).unwrap(), g);
    }

    #[test]
    fn single_term_reduction() {
        let h = c(0.3, -0.8);
        let hm = DMatrix::from_element(1, 1, h);
        let g = c(0.6, 0.8);
        let y0 = c(0.5, 0.2);
        let (y_s, mu) = (1.7, 0.3);
        let got = gradient_step(&[g], &hm, &[y0], y_s, mu).unwrap()[0];
        let want = g + h.conj() * (c(1.0, 0.0) - y0 / y_s) * mu;
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let h = DMatrix::from_element(2, 3, c(1.0, 0.0));
        let g = vec![c(1.0, 0.0); 2];
        let y = vec![c(1.0, 0.0); 3];
        assert!(matches!(gradient_step(&g, &h, &y, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(gradient_step(&g[..1], &h, &y, 1.0, 1.0), Err(Error::Dimension { .. })));
        assert!(matches!(
            sgd_step(&g, &h, &y, 1.0, 1.0, 3),
            Err(Error::IndexOutOfRange { index: 3, max: 2 })
        ));
    }

    #[test]
    fn sgd_windows_average_to_full_step() {
        let ch = small_channel(3, 4, 3);
        let g = vec![c(1.0, 0.0); 4];
        let y = ch.noiseless_pulse(&g).unwrap();
        let y_s = target_scale(&y, 4, 0.1).unwrap();
        let mu = 0.4;
        let full = gradient_step(&g, &ch.h_bru, &y, y_s, mu).unwrap();
        let n = y.len();
        let mut avg = vec![c(0.0, 0.0); 4];
        for k in 0..n {
            let s = sgd_step(&g, &ch.h_bru, &y, y_s, mu, k).unwrap();
            for (a, v) in avg.iter_mut().zip(s) {
                *a += v / n as f64;
            }
        }
        for (a, b) in avg.iter().zip(&full) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    /// Central differences of `J` over the real and imaginary part of each
    /// coefficient, combined as `d/dRe + j d/dIm`.
    fn fd_gradient(ch: &ChannelRealization, gamma: &[C64], y_s: f64) -> Vec<C64> {
        let j = |g: &[C64]| cost(&ch.noiseless_pulse(g).unwrap(), y_s);
        let h = 1e-6;
        (0..gamma.len())
            .map(|m| {
                let mut part = [0.0; 2];
                for (p, dir) in part.iter_mut().zip([c(1.0, 0.0), c(0.0, 1.0)]) {
                    let mut plus = gamma.to_vec();
                    let mut minus = gamma.to_vec();
                    plus[m] += dir * h;
                    minus[m] -= dir * h;
                    *p = (j(&plus) - j(&minus)) / (2.0 * h);
                }
                c(part[0], part[1])
            })
            .collect()
    }

    #[test]
    fn direction_matches_finite_differences() {
        for seed in 0..20 {
            let mut ch = small_channel(seed, 4, 3);
            // Normalize so J is O(1) and finite differences are well scaled.
            let s = ch.beta_bru.sqrt();
            ch.h_bru /= c(s, 0.0);
            ch.h_bu.iter_mut().for_each(|v| *v /= s);
            let mut rng = stream(seed, Stream::Baseline);
            let g = baseline_random(&mut rng, 4).into_inner();
            let y = ch.noiseless_pulse(&g).unwrap();
            let y_s = target_scale(&y, 4, 0.1).unwrap();
            let d = update_direction(&ch.h_bru, &y, y_s);
            let fd = fd_gradient(&ch, &g, y_s);
            let want: Vec<C64> = fd.iter().map(|v| v * (-y_s / 2.0)).collect();
            let num: f64 = d.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = want.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(num / den <= 1e-6, "seed {seed}: {}", num / den);
        }
    }

    #[test]
    fn overshoot_halves_step_and_resets_best() {
        assert_eq!(overshoot_control(0.8, 0.2, 0.9, 0.5), (0.4, -1.0));
        assert_eq!(overshoot_control(0.8, 0.5, 0.9, 0.5), (0.8, 0.9));
    }

    #[test]
    fn equalized_channel_is_a_fixed_point() {
        // Single LoS tap, no direct path, RIS already aligned.
        let m = 8;
        let h = DMatrix::from_fn(m, 1, |i, _| C64::from_polar(1e-3, 0.3 * i as f64));
        let ch = ChannelRealization {
            h_bu: vec![c(0.0, 0.0)],
            h_bru: h.clone(),
            beta_bu: 0.0,
            beta_bru: 1e-6,
        };
        let init = baseline_inverse(&h);
        let (gamma, trace) = run(&ch, &AriseConfig::default(), init.clone()).unwrap();
        assert!(trace.converged);
        assert!(trace.iterations_used() <= PATIENCE);
        assert!((trace.final_eta_norm() - trace.initial.eta_norm).abs() < 1e-5);
        for (a, b) in gamma.as_slice().iter().zip(init.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn run_keeps_passivity_and_respects_cap() {
        let ch = small_channel(5, 16, 4);
        let cfg = AriseConfig {
            max_iters: 40,
            ..AriseConfig::default()
        };
        let init = baseline_random(&mut stream(5, Stream::Baseline), 16);
        let (gamma, trace) = run(&ch, &cfg, init).unwrap();
        assert!(trace.iterations_used() <= 40);
        for g in gamma.as_slice() {
            assert!((g.norm() - 1.0).abs() <= 1e-12);
        }
        for r in &trace.iterations {
            assert!((-1.0..=1.0).contains(&r.eta_norm));
        }
    }

    #[test]
    fn small_steps_do_not_increase_cost() {
        for seed in 0..5 {
            let ch = small_channel(seed, 16, 4);
            let mut g = baseline_random(&mut stream(seed, Stream::Baseline), 16).into_inner();
            let mut y = ch.noiseless_pulse(&g).unwrap();
            let y_s = target_scale(&y, 16, 0.1).unwrap();
            let mu = initial_step(&y, 0.1).unwrap();
            let mut j = cost(&y, y_s);
            for _ in 0..50 {
                let raw = gradient_step(&g, &ch.h_bru, &y, y_s, mu).unwrap();
                g = RisConfiguration::normalized(raw).into_inner();
                y = ch.noiseless_pulse(&g).unwrap();
                let next = cost(&y, y_s);
                assert!(next <= j * (1.0 + 1e-12), "seed {seed}: {next} > {j}");
                j = next;
            }
        }
    }

    #[test]
    fn sgd_variant_tracks_full_variant() {
        let ch = small_channel(8, 8, 2);
        let init = RisConfiguration::ones(8);
        let cfg = AriseConfig::default();
        let (_, full) = run(&ch, &cfg, init.clone()).unwrap();
        let (_, sgd) = run_sgd(&ch, &cfg, init).unwrap();
        assert!(
            (full.final_eta_norm() - sgd.final_eta_norm()).abs() < 0.05,
            "{} vs {}",
            full.final_eta_norm(),
            sgd.final_eta_norm()
        );
    }

    #[test]
    fn inverse_examples() {
        let h = DMatrix::from_element(1, 1, C64::from_polar(2.5, 0.7));
        let g = baseline_inverse(&h);
        assert!((g.as_slice()[0] - C64::from_polar(1.0, -0.7)).norm() < 1e-15);
        let h = DMatrix::from_element(1, 1, c(0.0, 0.0));
        assert_eq!(baseline_inverse(&h).as_slice(), &[c(1.0, 0.0)]);
    }

    #[test]
    fn inverse_with_broadside_los_is_all_ones() {
        let g = Geometry {
            elements: 6,
            ue: [-20.0, 0.0],
            ..Geometry::default()
        };
        let f = FadingParams {
            kappa: 1e12,
            delayed_paths: 1,
            spatial_correlation: false,
            direct_path: false,
            ..FadingParams::default()
        };
        let ch = sample_channels(&mut stream(0, Stream::Channel), &g, &f).unwrap();
        for v in baseline_inverse(&ch.h_bru).as_slice() {
            assert!((v - c(1.0, 0.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn random_phases_are_uniform() {
        let mut rng = stream(1, Stream::Baseline);
        let n = 100_000;
        let bins = 20;
        let mut counts = vec![0usize; bins];
        let g = baseline_random(&mut rng, n);
        assert_eq!(baseline_random(&mut rng, 1).len(), 1);
        for z in g.as_slice() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            let u = (z.arg() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
            counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let e = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 99.9% quantile of chi-square with 19 degrees of freedom
        assert!(chi2 < 43.82, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn zero_step_is_identity(seed in 0u64..500) {
            let ch = small_channel(seed, 4, 2);
            let g = baseline_random(&mut stream(seed, Stream::Baseline), 4).into_inner();
            let y = ch.noiseless_pulse(&g).unwrap();
            let out = gradient_step(&g, &ch.h_bru, &y, 1.0, 0.0).unwrap();
            prop_assert_eq!(out, g);
        }
    }
}
