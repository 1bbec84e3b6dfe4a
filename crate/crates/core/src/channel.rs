//! Frequency-selective channel model for a BS → RIS → UE downlink.
//!
//! The direct BS-UE link is Rayleigh faded. The cascaded BS-RIS-UE link is
//! Rician at the first sampling instant (LoS steering vector plus scattered
//! part) and Rayleigh for the delayed taps. Scattered components of every
//! tap are spatially correlated across RIS elements through `R^{1/2}`, with
//! `[R]_{n,m} = sinc(2 |u_n - u_m| f_c / c)`.
//!
//! Reflection coefficients are not part of a [`ChannelRealization`]; they are
//! applied when the received pulse is formed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::RisConfiguration;
use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sampling period (one 5G NR unit interval).
pub const SAMPLE_PERIOD: f64 = 16.3e-9;

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are treated as rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Positions of the base station, RIS centre and user, plus the RIS array
/// layout. Coordinates are in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub bs: [f64; 2],
    pub ris: [f64; 2],
    pub ue: [f64; 2],
    /// Element spacing along the array axis.
    pub element_spacing: f64,
    pub elements: usize,
    pub carrier_hz: f64,
    pub speed_of_light: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            bs: [0.0, 0.0],
            ris: [10.0, 0.0],
            ue: [-20.0, -20.0],
            element_spacing: 0.02,
            elements: 100,
            carrier_hz: 3.5e9,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 {
            return Err(Error::config("elements", "must be at least 1"));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::config("element_spacing", "must be positive"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::config("carrier_hz", "must be positive"));
        }
        if !(self.speed_of_light > 0.0) {
            return Err(Error::config("speed_of_light", "must be positive"));
        }
        for (name, d) in [
            ("d_bu", self.d_bu()),
            ("d_br", self.d_br()),
            ("d_ru", self.d_ru()),
        ] {
            if !(d > 0.0) {
                return Err(Error::config(name, "nodes must not coincide"));
            }
        }
        Ok(())
    }

    pub fn d_bu(&self) -> f64 {
        dist(self.bs, self.ue)
    }

    pub fn d_br(&self) -> f64 {
        dist(self.bs, self.ris)
    }

    pub fn d_ru(&self) -> f64 {
        dist(self.ris, self.ue)
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_hz
    }

    /// Element positions along the array axis, first element at 0.
    pub fn element_positions(&self) -> Vec<f64> {
        (0..self.elements)
            .map(|m| m as f64 * self.element_spacing)
            .collect()
    }

    /// Signed azimuth of the UE seen from the RIS, measured from the array
    /// broadside. The BS illuminates the RIS at normal incidence, so the
    /// broadside points from the RIS towards the BS.
    pub fn azimuth_bru(&self) -> f64 {
        let n = [self.bs[0] - self.ris[0], self.bs[1] - self.ris[1]];
        let u = [self.ue[0] - self.ris[0], self.ue[1] - self.ris[1]];
        let cross = n[0] * u[1] - n[1] * u[0];
        let dot = n[0] * u[0] + n[1] * u[1];
        cross.atan2(dot)
    }
}

/// Statistical parameters of the fading channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingParams {
    /// Rician factor of the cascaded link's first tap; infinity gives pure line of sight.
    pub kappa: f64,
    /// Number of delayed paths; the pulse carries `2 * delayed_paths` ISI taps.
    pub delayed_paths: usize,
    /// Exponential power-delay-profile decay: `sigma^2(k) = exp(-pdp_rate * k)`.
    pub pdp_rate: f64,
    pub path_loss_exponent: f64,
    pub gain_bu_db: f64,
    pub gain_bru_db: f64,
    pub noise_dbm: f64,
    /// Disable to remove the BS-UE link entirely.
    pub direct_path: bool,
    /// Disable to use `R = I`.
    pub spatial_correlation: bool,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams {
            kappa: 10.0,
            delayed_paths: 10,
            pdp_rate: 0.5,
            path_loss_exponent: 2.0,
            gain_bu_db: -43.0,
            gain_bru_db: -43.0,
            noise_dbm: -96.0,
            direct_path: true,
            spatial_correlation: true,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(Error::config("kappa", "must be non-negative"));
        }
        if !(self.pdp_rate >= 0.0) {
            return Err(Error::config("pdp_rate", "must be non-negative"));
        }
        if !self.path_loss_exponent.is_finite() {
            return Err(Error::config("path_loss_exponent", "must be finite"));
        }
        for (name, v) in [
            ("gain_bu_db", self.gain_bu_db),
            ("gain_bru_db", self.gain_bru_db),
            ("noise_dbm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Number of ISI terms `L`.
    pub fn isi_terms(&self) -> usize {
        2 * self.delayed_paths
    }

    pub fn taps(&self) -> usize {
        self.isi_terms() + 1
    }

    /// Scattered-power profile; `tap_variance(0) == 1`.
    pub fn tap_variance(&self, k: usize) -> f64 {
        (-self.pdp_rate * k as f64).exp()
    }

    /// Noise power in the same linear (mW) scale as the channel gains.
    pub fn noise_power(&self) -> f64 {
        db_to_linear(self.noise_dbm)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Taps of one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Direct link, `L + 1` taps.
    pub h_bu: Vec<C64>,
    /// Cascaded link, one row per RIS element and one column per tap.
    pub h_bru: DMatrix<C64>,
    pub beta_bu: f64,
    pub beta_bru: f64,
}

impl ChannelRealization {
    pub fn elements(&self) -> usize {
        self.h_bru.nrows()
    }

    pub fn taps(&self) -> usize {
        self.h_bru.ncols()
    }

    /// Noiseless pulse response `h_bu + sum_m gamma_m h_bru[m]`.
    pub fn noiseless_pulse(&self, gamma: &[C64]) -> Result<Vec<C64>> {
        if gamma.len() != self.elements() {
            return Err(Error::Dimension {
                context: "reflection coefficients",
                expected: self.elements(),
                got: gamma.len(),
            });
        }
        let mut y = self.h_bu.clone();
        for (k, yk) in y.iter_mut().enumerate() {
            let col = self.h_bru.column(k);
            *yk += col
                .iter()
                .zip(gamma)
                .map(|(h, g)| h * g)
                .sum::<C64>();
        }
        Ok(y)
    }
}

/// Sampled pulse response `y_0 .. y_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseResponse {
    pub samples: Vec<C64>,
    pub sample_period: f64,
}

impl PulseResponse {
    pub fn new(samples: Vec<C64>) -> Self {
        PulseResponse {
            samples,
            sample_period: SAMPLE_PERIOD,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|y| y.norm_sqr()).sum()
    }
}

/// `10^(gain_db/10) * prod(d_i^-exponent)`.
pub fn path_loss(gain_db: f64, distances: &[f64], exponent: f64) -> Result<f64> {
    let mut gain = db_to_linear(gain_db);
    for &d in distances {
        if !(d > 0.0) {
            return Err(Error::Domain(format!("path-loss distance {d} is not positive")));
        }
        gain *= d.powf(-exponent);
    }
    Ok(gain)
}

/// LoS array response `[1, e^{jw}, .., e^{j(M-1)w}]` with
/// `w = 2 pi d_x (f_c / c) sin(theta)`.
pub fn steering_vector(
    theta: f64,
    elements: usize,
    spacing: f64,
    carrier_hz: f64,
    speed_of_light: f64,
) -> Vec<C64> {
    let omega = 2.0 * std::f64::consts::PI * spacing * (carrier_hz / speed_of_light) * theta.sin();
    (0..elements)
        .map(|m| C64::from_polar(1.0, m as f64 * omega))
        .collect()
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

pub fn spatial_correlation(positions: &[f64], carrier_hz: f64, speed_of_light: f64) -> DMatrix<f64> {
    let n = positions.len();
    let wavelength = speed_of_light / carrier_hz;
    DMatrix::from_fn(n, n, |i, j| {
        sinc(2.0 * (positions[i] - positions[j]).abs() / wavelength)
    })
}

/// Symmetric square root of a PSD matrix via its eigendecomposition.
/// Slightly negative eigenvalues (rounding) are clamped to zero first.
pub fn matrix_sqrt_psd(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !r.is_square() {
        return Err(Error::Dimension {
            context: "PSD square root",
            expected: r.nrows(),
            got: r.ncols(),
        });
    }
    let eig = r.clone().symmetric_eigen();
    if let Some(&worst) = eig
        .eigenvalues
        .iter()
        .find(|&&lambda| lambda < -PSD_TOLERANCE)
    {
        return Err(Error::NotPsd(worst));
    }
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    // Symmetrize away rounding asymmetry.
    Ok((&s + s.transpose()) * 0.5)
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sd * re, sd * im)
}

/// Channel generator for a fixed geometry; caches `R^{1/2}`.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    geometry: Geometry,
    fading: FadingParams,
    corr_sqrt: Option<DMatrix<f64>>,
}

impl ChannelModel {
    pub fn new(geometry: Geometry, fading: FadingParams) -> Result<Self> {
        geometry.validate()?;
        fading.validate()?;
        let corr_sqrt = if fading.spatial_correlation && geometry.elements > 1 {
            let r = spatial_correlation(
                &geometry.element_positions(),
                geometry.carrier_hz,
                geometry.speed_of_light,
            );
            Some(matrix_sqrt_psd(&r)?)
        } else {
            None
        };
        Ok(ChannelModel {
            geometry,
            fading,
            corr_sqrt,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn fading(&self) -> &FadingParams {
        &self.fading
    }

    /// Moves the UE. Array layout is unchanged, so `R^{1/2}` stays valid.
    pub fn set_ue(&mut self, ue: [f64; 2]) -> Result<()> {
        let mut g = self.geometry.clone();
        g.ue = ue;
        g.validate()?;
        self.geometry = g;
        Ok(())
    }

    pub fn beta_bu(&self) -> f64 {
        let f = &self.fading;
        path_loss(f.gain_bu_db, &[self.geometry.d_bu()], f.path_loss_exponent)
            .expect("geometry validated")
    }

    pub fn beta_bru(&self) -> f64 {
        let f = &self.fading;
        path_loss(
            f.gain_bru_db,
            &[self.geometry.d_br() * self.geometry.d_ru()],
            f.path_loss_exponent,
        )
        .expect("geometry validated")
    }

    fn correlate(&self, v: Vec<C64>) -> Vec<C64> {
        match &self.corr_sqrt {
            None => v,
            Some(s) => (0..v.len())
                .map(|i| {
                    s.row(i)
                        .iter()
                        .zip(&v)
                        .map(|(&a, b)| b * a)
                        .sum::<C64>()
                })
                .collect(),
        }
    }

    /// Draws one coherence block. Direct taps are drawn first, then the
    /// cascaded matrix tap by tap.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let g = &self.geometry;
        let f = &self.fading;
        let taps = f.taps();
        let m = g.elements;
        let beta_bu = self.beta_bu();
        let beta_bru = self.beta_bru();

        let h_bu: Vec<C64> = (0..taps)
            .map(|k| {
                let h = complex_gaussian(rng, f.tap_variance(k));
                if f.direct_path {
                    h * beta_bu.sqrt()
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();

        let los = steering_vector(
            g.azimuth_bru(),
            m,
            g.element_spacing,
            g.carrier_hz,
            g.speed_of_light,
        );
        let (los_w, nlos_w) = if f.kappa.is_infinite() {
            (1.0, 0.0)
        } else {
            ((f.kappa / (f.kappa + 1.0)).sqrt(), (1.0 / (f.kappa + 1.0)).sqrt())
        };
        let scale = beta_bru.sqrt();
        let mut h_bru = DMatrix::<C64>::zeros(m, taps);
        for k in 0..taps {
            let var = f.tap_variance(k);
            let mut col: Vec<C64> = (0..m).map(|_| complex_gaussian(rng, var)).collect();
            if k == 0 {
                for (c, l) in col.iter_mut().zip(&los) {
                    *c = l * los_w + *c * nlos_w;
                }
            }
            for (i, v) in self.correlate(col).into_iter().enumerate() {
                h_bru[(i, k)] = v * scale;
            }
        }

        ChannelRealization {
            h_bu,
            h_bru,
            beta_bu: if f.direct_path { beta_bu } else { 0.0 },
            beta_bru,
        }
    }
}

/// One-shot convenience over [`ChannelModel`].
pub fn sample_channels<R: Rng + ?Sized>(
    rng: &mut R,
    geometry: &Geometry,
    fading: &FadingParams,
) -> Result<ChannelRealization> {
    Ok(ChannelModel::new(geometry.clone(), fading.clone())?.sample(rng))
}

/// `y_k = h_bu[k] + sum_m gamma_m h_bru[m][k] + n_k`. Noise is skipped
/// (and no random numbers drawn) when `noise_power` is zero.
pub fn received_pulse<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    gamma: &RisConfiguration,
    noise_power: f64,
    rng: &mut R,
) -> Result<PulseResponse> {
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power {noise_power} is negative")));
    }
    let mut y = ch.noiseless_pulse(gamma.as_slice())?;
    if noise_power > 0.0 {
        for yk in y.iter_mut() {
            *yk += complex_gaussian(rng, noise_power);
        }
    }
    Ok(PulseResponse::new(y))
}
