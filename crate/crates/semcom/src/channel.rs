//! AWGN channel between encoder and decoder, parameterized by PSNR.
//!
//! The channel adds i.i.d. zero-mean Gaussian noise whose variance is set by
//! the peak signal-to-noise ratio: `sigma^2 = peak^2 / 10^(psnr_db / 10)`.
//! A static channel keeps one PSNR; a dynamic channel draws a PSNR from a
//! finite schedule on every use, modelling per-slot fading severity.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// PSNR grid (dB) used by the default evaluation scenarios and as the default
/// dynamic schedule support.
pub const DEFAULT_PSNR_GRID_DB: [f64; 5] = [100.0, 25.0, 15.0, 12.5, 10.0];

/// Noise model of the link between encoder output and decoder input.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    /// Fixed PSNR for every transmission.
    Static { psnr_db: f64, peak: f64 },
    /// PSNR redrawn from a finite distribution on every transmission.
    /// `schedule` holds `(psnr_db, probability)` atoms.
    Dynamic {
        schedule: Vec<(f64, f64)>,
        peak: f64,
    },
}

impl ChannelSpec {
    /// Static channel with reference amplitude 1 (latents are clamped to
    /// [-1, 1] before transmission, so peak power is 1).
    pub fn static_db(psnr_db: f64) -> Self {
        ChannelSpec::Static { psnr_db, peak: 1.0 }
    }

    /// Dynamic channel drawing uniformly from the given PSNR values.
    pub fn dynamic_uniform(psnrs_db: &[f64]) -> Self {
        let p = 1.0 / psnrs_db.len() as f64;
        ChannelSpec::Dynamic {
            schedule: psnrs_db.iter().map(|&s| (s, p)).collect(),
            peak: 1.0,
        }
    }

    /// Checks the invariants: finite PSNR, positive peak, schedule summing
    /// to one.
    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelSpec::Static { psnr_db, peak } => {
                if !psnr_db.is_finite() {
                    return Err(Error::invalid("static PSNR must be finite"));
                }
                if !(*peak > 0.0) {
                    return Err(Error::invalid("peak must be positive"));
                }
            }
            ChannelSpec::Dynamic { schedule, peak } => {
                if schedule.is_empty() {
                    return Err(Error::invalid("dynamic schedule must be non-empty"));
                }
                if !(*peak > 0.0) {
                    return Err(Error::invalid("peak must be positive"));
                }
                let total: f64 = schedule.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "dynamic schedule probabilities sum to {total}, expected 1"
                    )));
                }
                if schedule.iter().any(|&(s, p)| !s.is_finite() || p < 0.0) {
                    return Err(Error::invalid("schedule atoms must be finite with p >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        match self {
            ChannelSpec::Static { peak, .. } | ChannelSpec::Dynamic { peak, .. } => *peak,
        }
    }

    /// Noise standard deviation at a given PSNR for this channel's peak.
    pub fn noise_sigma(&self, psnr_db: f64) -> f64 {
        self.peak() * 10f64.powf(-psnr_db / 20.0)
    }
}

/// Draws the PSNR governing one transmission: the constant for a static
/// channel, a sample from the schedule for a dynamic one.
pub fn sample_psnr<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> f64 {
    match spec {
        ChannelSpec::Static { psnr_db, .. } => *psnr_db,
        ChannelSpec::Dynamic { schedule, .. } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for &(psnr, p) in schedule {
                acc += p;
                if u < acc {
                    return psnr;
                }
            }
            // Guard against cumulative rounding at u ~ 1.
            schedule.last().map(|&(s, _)| s).unwrap_or(f64::NAN)
        }
    }
}

/// Sends a vector through the channel: returns `v + eta` with `eta` i.i.d.
/// `N(0, sigma^2)` at the PSNR governing this call.
pub fn transmit<R: Rng + ?Sized>(v: &[f64], spec: &ChannelSpec, rng: &mut R) -> Vec<f64> {
    let psnr_db = sample_psnr(spec, rng);
    let sigma = spec.noise_sigma(psnr_db);
    if sigma == 0.0 {
        return v.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    v.iter().map(|&x| x + normal.sample(rng)).collect()
}
