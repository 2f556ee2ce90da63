//! Free-space optical link: on-off keyed intensity modulation, chi-square
//! pointing-error fading, signal-dependent Gaussian noise and hard-threshold
//! detection.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Linear power gain of a `db` decibel amplifier.
pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Multiplicative factor (≤ 1) of a `db` decibel loss.
pub fn loss_db_to_factor(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Physical constants of one link, all in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Photodetector responsivity R (A/W).
    pub responsivity: f64,
    /// Transmitter amplifier gain G_o (linear, ≥ 1).
    pub amplifier_gain: f64,
    /// Free-space path loss L_FS as a factor in (0, 1].
    pub free_space_loss: f64,
    /// Pointing sensitivity G.
    pub pointing_sensitivity: f64,
    /// Pointing-error variance σ².
    pub pointing_variance: f64,
    /// Signal-independent noise power σ₀².
    pub noise_floor: f64,
    /// Signal-dependent noise proportionality k.
    pub signal_noise_factor: f64,
    /// Optical power of a transmitted '1' (W).
    pub on_power: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("responsivity", self.responsivity),
            ("amplifier_gain", self.amplifier_gain),
            ("free_space_loss", self.free_space_loss),
            ("pointing_sensitivity", self.pointing_sensitivity),
            ("pointing_variance", self.pointing_variance),
            ("noise_floor", self.noise_floor),
            ("signal_noise_factor", self.signal_noise_factor),
            ("on_power", self.on_power),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.free_space_loss > 0.0 && self.free_space_loss <= 1.0) {
            return Err(invalid(format!(
                "free_space_loss must lie in (0, 1], got {}",
                self.free_space_loss
            )));
        }
        if self.amplifier_gain < 1.0 {
            return Err(invalid(format!(
                "amplifier_gain must be >= 1, got {}",
                self.amplifier_gain
            )));
        }
        Ok(())
    }

    /// R·G_o·L_FS, the deterministic photocurrent per watt transmitted.
    pub fn link_gain(&self) -> f64 {
        self.responsivity * self.amplifier_gain * self.free_space_loss
    }

    /// Noiseless, unfaded photocurrent of a transmitted '1'.
    pub fn on_level(&self) -> f64 {
        self.link_gain() * self.on_power
    }

    /// Normalized pointing variance σ²·G.
    pub fn normalized_pointing(&self) -> f64 {
        self.pointing_variance * self.pointing_sensitivity
    }

    /// Copy with σ² chosen so that σ²·G equals `sigma2_g`.
    pub fn with_normalized_pointing(mut self, sigma2_g: f64) -> Result<Self> {
        if !sigma2_g.is_finite() || sigma2_g < 0.0 {
            return Err(invalid(format!("sigma2G must be >= 0, got {sigma2_g}")));
        }
        if sigma2_g > 0.0 && self.pointing_sensitivity == 0.0 {
            return Err(invalid(
                "nonzero sigma2G needs a nonzero pointing sensitivity",
            ));
        }
        self.pointing_variance = if sigma2_g == 0.0 {
            0.0
        } else {
            sigma2_g / self.pointing_sensitivity
        };
        Ok(self)
    }
}

/// Link constants as written in configuration files. Fields suffixed `_db`
/// are converted to linear units once, by [`LinkConfig::to_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub responsivity: f64,
    pub amplifier_gain_db: f64,
    pub free_space_loss_db: f64,
    pub pointing_sensitivity: f64,
    pub pointing_variance: f64,
    pub noise_floor: f64,
    pub signal_noise_factor: f64,
    pub on_power: f64,
}

impl Default for LinkConfig {
    /// Evaluation link: R = 0.8 A/W, G_o = 30 dB, L_FS = 14.3 dB, G = 1e6.
    fn default() -> Self {
        LinkConfig {
            responsivity: 0.8,
            amplifier_gain_db: 30.0,
            free_space_loss_db: 14.3,
            pointing_sensitivity: 1e6,
            pointing_variance: 0.0,
            noise_floor: 1e-6,
            signal_noise_factor: 1e-5,
            on_power: 1e-3,
        }
    }
}

impl LinkConfig {
    pub fn to_params(&self) -> Result<LinkParams> {
        let params = LinkParams {
            responsivity: self.responsivity,
            amplifier_gain: db_to_gain(self.amplifier_gain_db),
            free_space_loss: loss_db_to_factor(self.free_space_loss_db),
            pointing_sensitivity: self.pointing_sensitivity,
            pointing_variance: self.pointing_variance,
            noise_floor: self.noise_floor,
            signal_noise_factor: self.signal_noise_factor,
            on_power: self.on_power,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Photocurrent samples y[n], one per transmitted bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub samples: Vec<f64>,
}

/// The random quantities behind one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub pointing_errors: Vec<f64>,
    pub noise: Vec<f64>,
    pub seed: u64,
}

fn pointing_error<R: Rng + ?Sized>(component_std: f64, rng: &mut R) -> f64 {
    (0..4)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let z = z * component_std;
            z * z
        })
        .sum()
}

/// Draws `n` pointing errors e = Σ Z_i², four components of variance σ²/2.
///
/// With this parameterization E[exp(−G·e)] = (1 + Gσ²)⁻², the fading factor
/// used by [`decision_threshold`].
pub fn sample_pointing_error<R: Rng + ?Sized>(
    variance: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !variance.is_finite() || variance < 0.0 {
        return Err(invalid(format!(
            "pointing variance must be >= 0, got {variance}"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("pointing error count"));
    }
    let std = (variance / 2.0).sqrt();
    Ok((0..n).map(|_| pointing_error(std, rng)).collect())
}

/// One bit through the link: returns (y, e, w).
fn receive_bit<R: Rng + ?Sized>(bit: bool, p: &LinkParams, rng: &mut R) -> (f64, f64, f64) {
    let e = pointing_error((p.pointing_variance / 2.0).sqrt(), rng);
    let x = if bit { p.on_power } else { 0.0 };
    let signal = p.link_gain() * x * (-p.pointing_sensitivity * e).exp();
    let z: f64 = StandardNormal.sample(rng);
    let w = z * (p.noise_floor + p.signal_noise_factor * signal).sqrt();
    (signal + w, e, w)
}

/// Sends the OOK bit vector `bits` through the link.
pub fn transmit(
    bits: &[u8],
    params: &LinkParams,
    seed: u64,
) -> Result<(ReceivedSignal, ChannelDraw)> {
    if bits.is_empty() {
        return Err(Error::Empty("transmitted bit vector"));
    }
    params.validate()?;
    let mut rng = rng::stream(seed);
    let n = bits.len();
    let mut samples = Vec::with_capacity(n);
    let mut pointing_errors = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for &b in bits {
        if b > 1 {
            return Err(invalid(format!(
                "transmitted symbols must be 0 or 1, got {b}"
            )));
        }
        let (y, e, w) = receive_bit(b == 1, params, &mut rng);
        samples.push(y);
        pointing_errors.push(e);
        noise.push(w);
    }
    Ok((
        ReceivedSignal { samples },
        ChannelDraw {
            pointing_errors,
            noise,
            seed,
        },
    ))
}

/// θ = ½·R·G_o·P_on·L_FS·(1 + Gσ²)⁻².
pub fn decision_threshold(params: &LinkParams) -> f64 {
    let fade = (1.0 + params.normalized_pointing()).powi(-2);
    0.5 * params.link_gain() * params.on_power * fade
}

/// Hard decision: 1 iff y > θ.
pub fn detect(y: &ReceivedSignal, threshold: f64) -> Vec<u8> {
    y.samples.iter().map(|&v| u8::from(v > threshold)).collect()
}

/// Scales photocurrent so a noiseless unfaded '1' reads 1.0. Not clipped.
pub fn soft_receive(y: &ReceivedSignal, params: &LinkParams) -> Result<Vec<f64>> {
    let level = params.on_level();
    if level.is_nan() || level <= 0.0 {
        return Err(invalid(
            "soft receive needs a positive on-level (P_on, R, G_o, L_FS > 0)",
        ));
    }
    Ok(y.samples.iter().map(|&v| v / level).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
}

impl BerEstimate {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.bits as f64
    }
}

/// Monte-Carlo bit error rate of transmit→detect on equiprobable bits.
pub fn estimate_ber(params: &LinkParams, n_bits: u64, seed: u64) -> Result<BerEstimate> {
    if n_bits == 0 {
        return Err(Error::Empty("BER bit count"));
    }
    params.validate()?;
    let threshold = decision_threshold(params);
    let mut rng = rng::stream(seed);
    let mut errors = 0u64;
    for _ in 0..n_bits {
        let bit: bool = rng.random();
        let (y, _, _) = receive_bit(bit, params, &mut rng);
        if (y > threshold) != bit {
            errors += 1;
        }
    }
    Ok(BerEstimate {
        errors,
        bits: n_bits,
    })
}
