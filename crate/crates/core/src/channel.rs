//! Lossy channel and threshold detection.
//!
//! Yields, gains and per-Fock error rates of a BB84 link whose receiver uses
//! threshold detectors with dark counts and a fixed misalignment error.

use crate::error::{check_nonnegative, check_probability, Error, Result};
use crate::photon_stats::PhotonNumberDistribution;

/// Linear attenuation of standard telecom fiber in the C-band, dB/km.
pub const TELECOM_FIBER_ALPHA: f64 = 0.21;

/// Channel between Alice's output and Bob's detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Applied attenuation in dB.
    pub attenuation_db: f64,
    /// Fiber loss in dB/km, used only to express attenuations as distances.
    pub fiber_alpha: f64,
    /// Transmission at zero applied attenuation.
    pub eta0: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            attenuation_db: 0.0,
            fiber_alpha: TELECOM_FIBER_ALPHA,
            eta0: 1.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        check_nonnegative("attenuation_db", self.attenuation_db)?;
        if !(self.fiber_alpha > 0.0 && self.fiber_alpha.is_finite()) {
            return Err(Error::OutOfRange {
                name: "fiber_alpha",
                value: self.fiber_alpha,
                expected: "a positive attenuation per km",
            });
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::OutOfRange {
                name: "eta0",
                value: self.eta0,
                expected: "a transmissivity in (0, 1]",
            });
        }
        Ok(())
    }

    /// The same channel at a different applied attenuation.
    pub fn at_db(&self, attenuation_db: f64) -> Self {
        Self {
            attenuation_db,
            ..*self
        }
    }

    /// Total transmissivity `eta0 * 10^(-dB/10)`.
    pub fn transmissivity(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.eta0 * db_to_transmissivity(self.attenuation_db)?)
    }

    pub fn distance_km(&self) -> f64 {
        db_to_km(self.attenuation_db, self.fiber_alpha)
    }
}

/// Receiver imperfections and protocol constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Probability that a detected photon lands in the wrong path.
    pub e_d: f64,
    /// Dark-count click probability per pulse.
    pub y0: f64,
    /// Error probability of a dark-count click.
    pub e0: f64,
    /// Error-correction inefficiency.
    pub f_ec: f64,
    /// Pulse repetition rate in Hz.
    pub rep_rate_hz: f64,
}

impl DetectorModel {
    /// Dark-count probability per pulse from a dark-count rate.
    pub fn y0_from_dark_rate(dark_rate_hz: f64, rep_rate_hz: f64) -> f64 {
        dark_rate_hz / rep_rate_hz
    }

    /// The quantum-dot experiment: 0.8 % misalignment, 196 Hz dark counts at
    /// 81.96 MHz, `f_EC = 1.2`.
    pub fn experiment() -> Self {
        let rep_rate_hz = 81.96e6;
        Self {
            e_d: 0.008,
            y0: Self::y0_from_dark_rate(196.0, rep_rate_hz),
            e0: 0.5,
            f_ec: 1.2,
            rep_rate_hz,
        }
    }

    /// Perfect detection: no misalignment, no dark counts.
    pub fn ideal() -> Self {
        Self {
            e_d: 0.0,
            y0: 0.0,
            ..Self::experiment()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.e_d) {
            return Err(Error::OutOfRange {
                name: "e_d",
                value: self.e_d,
                expected: "a misalignment error in [0, 0.5]",
            });
        }
        if !(0.0..1.0).contains(&self.y0) {
            return Err(Error::OutOfRange {
                name: "y0",
                value: self.y0,
                expected: "a dark-count probability in [0, 1)",
            });
        }
        check_probability("e0", self.e0)?;
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::OutOfRange {
                name: "f_ec",
                value: self.f_ec,
                expected: "an error-correction factor >= 1",
            });
        }
        if !(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite()) {
            return Err(Error::OutOfRange {
                name: "rep_rate_hz",
                value: self.rep_rate_hz,
                expected: "a positive repetition rate",
            });
        }
        Ok(())
    }
}

pub fn db_to_transmissivity(db: f64) -> Result<f64> {
    check_nonnegative("attenuation_db", db)?;
    Ok(10f64.powf(-db / 10.0))
}

pub fn db_to_km(db: f64, alpha: f64) -> f64 {
    db / alpha
}

/// Probability that at least one of `k` photons survives.
fn arrival_probability(k: usize, eta: f64) -> f64 {
    1.0 - (1.0 - eta).powi(k as i32)
}

/// Yield of the `k`-photon component: `Y0 + (1 - Y0)(1 - (1 - eta)^k)`.
pub fn yield_k(k: usize, eta: f64, y0: f64) -> f64 {
    y0 + (1.0 - y0) * arrival_probability(k, eta)
}

/// Gain `Q_k = p_k Y_k`.
pub fn gain_k(p_k: f64, y_k: f64) -> f64 {
    p_k * y_k
}

/// Error rate of clicks caused by `k`-photon pulses:
/// `(e0 Y0 + e_d (1 - (1 - eta)^k)) / Y_k`.
pub fn error_k(k: usize, eta: f64, det: &DetectorModel) -> Result<f64> {
    let y_k = yield_k(k, eta, det.y0);
    if y_k <= 0.0 {
        return Err(Error::ZeroYield { k });
    }
    Ok(error_numerator(k, eta, det) / y_k)
}

fn error_numerator(k: usize, eta: f64, det: &DetectorModel) -> f64 {
    det.e0 * det.y0 + det.e_d * arrival_probability(k, eta)
}

/// Total gain and gain-weighted QBER of a source behind the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    /// Click probability per pulse (`p_click`).
    pub q_tot: f64,
    pub e_tot: f64,
}

/// `Q_tot = sum_k Q_k` and `E_tot = sum_k e_k Q_k / Q_tot`.
pub fn totals(dist: &PhotonNumberDistribution, eta: f64, det: &DetectorModel) -> Result<Totals> {
    check_probability("transmissivity", eta)?;
    let mut q_tot = 0.0;
    let mut errors = 0.0;
    for (k, &p_k) in dist.probs().iter().enumerate() {
        q_tot += gain_k(p_k, yield_k(k, eta, det.y0));
        // e_k Q_k = p_k * numerator, which stays finite where Y_k = 0
        errors += p_k * error_numerator(k, eta, det);
    }
    if q_tot <= 0.0 {
        return Err(Error::ZeroGain);
    }
    Ok(Totals {
        q_tot,
        e_tot: errors / q_tot,
    })
}
