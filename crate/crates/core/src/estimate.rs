//! Inferring the laser mean photon number from click statistics.
//!
//! Dark counts, quantum-dot photons and laser photons trigger Bob's threshold
//! detectors independently, so the probability of *no* click factorizes:
//!
//! ```text
//! 1 - p_click = (1 - p_dc)(1 - p_click_qd)(1 - p_click_laser)
//! 1 - p_click_laser = exp(-eta0 mu_laser)
//! ```
//!
//! Measuring `p_click`, `p_dc` and `p_click_qd` (laser path blocked) therefore
//! pins `mu_laser` at Alice's output. `p_click_qd` is taken to exclude dark
//! counts.

use crate::error::{check_nonnegative, check_probability, Error, Result};
use crate::optimize::mix_ratio;
use crate::photon_stats::{mean_photon_number, qd_distribution, QdSourceParams};

/// Negative inferred means down to this magnitude are attributed to
/// measurement noise and clamped to zero.
pub const NEGATIVE_MU_TOLERANCE: f64 = 1e-6;

/// Measured per-pulse click probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickObservables {
    /// Total click probability with both sources on.
    pub p_click: f64,
    /// Dark-count click probability.
    pub p_dc: f64,
    /// Click probability from the quantum dot alone, dark counts excluded.
    pub p_click_qd: f64,
    /// Alice-to-Bob transmission at zero applied attenuation.
    pub eta0: f64,
}

impl ClickObservables {
    pub fn validate(&self) -> Result<()> {
        check_probability("p_click", self.p_click)?;
        check_probability("p_dc", self.p_dc)?;
        check_probability("p_click_qd", self.p_click_qd)?;
        check_probability("eta0", self.eta0)?;
        if self.eta0 == 0.0 {
            return Err(Error::OutOfRange {
                name: "eta0",
                value: 0.0,
                expected: "a transmissivity in (0, 1]",
            });
        }
        if self.p_click < self.p_dc {
            return Err(Error::InconsistentObservables(format!(
                "p_click = {} is below the dark-count probability {}",
                self.p_click, self.p_dc
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserEstimate {
    pub mu_laser: f64,
    /// A slightly negative estimate was clamped to zero.
    pub clamped: bool,
}

/// Click probability of three independent trigger sources.
pub fn compose_click_probability(p_dc: f64, p_qd: f64, p_laser: f64) -> f64 {
    1.0 - (1.0 - p_dc) * (1.0 - p_qd) * (1.0 - p_laser)
}

/// `mu_laser = -ln[(1 - p_click) / ((1 - p_dc)(1 - p_click_qd))] / eta0`.
pub fn infer_mu_laser(obs: &ClickObservables) -> Result<LaserEstimate> {
    obs.validate()?;
    let background = (1.0 - obs.p_dc) * (1.0 - obs.p_click_qd);
    if background <= 0.0 {
        return Err(Error::InconsistentObservables(
            "dark counts or the quantum dot alone already click on every pulse".into(),
        ));
    }
    let no_click = 1.0 - obs.p_click;
    if no_click <= 0.0 {
        return Err(Error::InconsistentObservables(
            "p_click = 1 implies an unbounded laser mean".into(),
        ));
    }
    let mu = -(no_click / background).ln() / obs.eta0;
    if mu >= 0.0 {
        Ok(LaserEstimate { mu_laser: mu, clamped: false })
    } else if mu >= -NEGATIVE_MU_TOLERANCE {
        Ok(LaserEstimate { mu_laser: 0.0, clamped: true })
    } else {
        Err(Error::InconsistentObservables(format!(
            "no-click ratio {} exceeds 1 (inferred mu_laser = {mu:e})",
            no_click / background
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedEstimate {
    pub mu_qd: f64,
    pub mu_mixed: f64,
    /// `mu_laser / mu_mixed`, zero when nothing is emitted.
    pub ratio: f64,
}

/// Total mean photon number at Alice's output and the laser share of it.
pub fn infer_mu_mixed(qd_brightness_at_alice: f64, qd_g2: f64, mu_laser: f64) -> Result<MixedEstimate> {
    check_nonnegative("laser mean photon number", mu_laser)?;
    let qd = qd_distribution(&QdSourceParams::new(qd_brightness_at_alice, qd_g2)?)?;
    let mu_qd = mean_photon_number(&qd);
    let mu_mixed = mu_qd + mu_laser;
    Ok(MixedEstimate {
        mu_qd,
        mu_mixed,
        ratio: mix_ratio(mu_laser, mu_mixed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(p_click: f64, p_dc: f64, p_click_qd: f64, eta0: f64) -> ClickObservables {
        ClickObservables { p_click, p_dc, p_click_qd, eta0 }
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose_click_probability(0.0, 0.0, 0.0), 0.0);
        assert_eq!(compose_click_probability(0.0, 1.0, 0.0), 1.0);
        assert_eq!(compose_click_probability(0.5, 0.5, 0.5), 0.875);
    }

    #[test]
    fn no_laser_gives_zero() {
        let p = compose_click_probability(1e-5, 0.03, 0.0);
        let est = infer_mu_laser(&obs(p, 1e-5, 0.03, 0.7)).unwrap();
        assert!(est.mu_laser.abs() < 1e-12);
    }

    #[test]
    fn inversion_round_trip() {
        let (mu, eta0) = (0.35f64, 0.6);
        let p = 1.0 - (-eta0 * mu).exp();
        let est = infer_mu_laser(&obs(p, 0.0, 0.0, eta0)).unwrap();
        assert!((est.mu_laser - mu).abs() < 1e-12);
        assert!(!est.clamped);
    }

    #[test]
    fn small_negatives_are_clamped() {
        let base = compose_click_probability(1e-4, 0.02, 0.0);
        let est = infer_mu_laser(&obs(base - 1e-7, 1e-4, 0.02, 1.0)).unwrap();
        assert_eq!(est, LaserEstimate { mu_laser: 0.0, clamped: true });
        let err = infer_mu_laser(&obs(base - 1e-3, 1e-4, 0.02, 1.0)).unwrap_err();
        assert!(matches!(err, Error::InconsistentObservables(_)));
    }

    #[test]
    fn invalid_observables() {
        assert!(infer_mu_laser(&obs(0.1, 0.0, 0.0, 0.0)).is_err());
        assert!(infer_mu_laser(&obs(1e-6, 1e-5, 0.0, 1.0)).is_err());
        assert!(infer_mu_laser(&obs(1.0, 0.0, 0.1, 1.0)).is_err());
    }

    #[test]
    fn mixed_examples() {
        let m = infer_mu_mixed(0.0409, 0.012, 0.0).unwrap();
        assert_eq!(m.ratio, 0.0);
        let m = infer_mu_mixed(0.0, 0.012, 0.2).unwrap();
        assert_eq!(m.ratio, 1.0);

        // the laser mean that labels a configuration as 86.8 % laser
        let mu_qd = infer_mu_mixed(0.0409, 0.012, 0.0).unwrap().mu_qd;
        let mu_laser = 0.868 / (1.0 - 0.868) * mu_qd;
        let m = infer_mu_mixed(0.0409, 0.012, mu_laser).unwrap();
        assert!((m.ratio - 0.868).abs() < 1e-12);
        assert!((m.mu_mixed - (m.mu_qd + mu_laser)).abs() < 1e-15);
    }
}
