//! Asymptotic BB84 key rate under the tagged-multiphoton (GLLP) worst case.
//!
//! Every multiphoton emission is assumed to reach Bob and to be known to the
//! eavesdropper, so only the vacuum and single-photon share of the gain,
//! `Q_{k<2} = Q_tot - sum_{k>=2} p_k`, contributes secret bits:
//!
//! ```text
//! SKR >= 1/2 [ Q_{k<2} (1 - H2(e_{k<2})) - f_EC Q_tot H2(E_tot) ]
//! e_{k<2} = E_tot Q_tot / Q_{k<2}
//! ```
//!
//! The factor one half is the sifting ratio. Negative bounds are kept in
//! [`SkrReport::skr_per_pulse`] so optimizers can see how far from feasibility
//! a configuration is; [`SkrReport::effective`] applies the clamp.

use crate::channel::{totals, ChannelModel, DetectorModel, Totals};
use crate::error::{check_probability, Result};
use crate::photon_stats::PhotonNumberDistribution;

/// Above this the error rate of the single-photon share leaves no key.
const MAX_SECURE_ERROR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkrReport {
    pub q_tot: f64,
    pub e_tot: f64,
    /// Multiphoton emission probability at Alice's output.
    pub p_m: f64,
    /// Single-photon share `A` of the detected events, clipped to `[0, 1]`.
    pub a_fraction: f64,
    /// Estimated error rate of the vacuum and single-photon share.
    pub e_single: f64,
    /// Raw bound in bits per pulse, possibly negative.
    pub skr_per_pulse: f64,
    pub skr_per_second: f64,
    /// The bound produced no key: nonpositive rate, no single-photon share,
    /// or `e_{k<2} >= 1/2`.
    pub clamped: bool,
    /// `e_{k<2}` fell outside `[0, 1]` and was clipped before the entropy.
    pub ratio_clipped: bool,
}

impl SkrReport {
    /// Key rate in bits per pulse after clamping.
    pub fn effective(&self) -> f64 {
        if self.clamped {
            0.0
        } else {
            self.skr_per_pulse
        }
    }
}

/// `H2(x) = -x log2 x - (1 - x) log2(1 - x)`, with `H2(0) = H2(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("binary entropy argument", x)?;
    Ok(h2(x))
}

fn h2(x: f64) -> f64 {
    if !(1e-300..=1.0 - 1e-15).contains(&x) {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

fn clip_unit(x: f64) -> (f64, bool) {
    if x.is_nan() || x > 1.0 {
        (1.0, true)
    } else if x < 0.0 {
        (0.0, true)
    } else {
        (x, false)
    }
}

/// Probability of emitting two or more photons.
pub fn multiphoton_probability(dist: &PhotonNumberDistribution) -> f64 {
    dist.probs().iter().skip(2).sum()
}

/// Upper bound `g2 mu^2 / 2` on the multiphoton probability.
pub fn multiphoton_bound(g2: f64, mu: f64) -> f64 {
    g2 * mu * mu / 2.0
}

/// Key rate from detected totals and a multiphoton probability.
///
/// This is the entry point for measured data: `totals` may come from the
/// analytic channel or from counting clicks and errors.
pub fn skr_from_totals(totals: Totals, p_m: f64, det: &DetectorModel) -> Result<SkrReport> {
    det.validate()?;
    let Totals { q_tot, e_tot } = totals;
    if q_tot <= 0.0 {
        return Err(crate::Error::ZeroGain);
    }
    let q_single = q_tot - p_m;
    let raw_e_single = if q_single > 0.0 {
        e_tot * q_tot / q_single
    } else {
        1.0
    };
    let (e_single, ratio_clipped) = clip_unit(raw_e_single);
    let ratio_clipped = ratio_clipped || q_single <= 0.0;

    let skr_per_pulse =
        0.5 * (q_single * (1.0 - h2(e_single)) - det.f_ec * q_tot * h2(e_tot.clamp(0.0, 1.0)));
    let clamped = q_single <= 0.0 || e_single >= MAX_SECURE_ERROR || skr_per_pulse <= 0.0;
    let skr_per_second = if clamped {
        0.0
    } else {
        skr_per_pulse * det.rep_rate_hz
    };

    Ok(SkrReport {
        q_tot,
        e_tot,
        p_m,
        a_fraction: (q_single / q_tot).clamp(0.0, 1.0),
        e_single,
        skr_per_pulse,
        skr_per_second,
        clamped,
        ratio_clipped,
    })
}

/// Key rate in the `(p_click, e, A)` parametrization,
/// `p_click / 2 [A (1 - H2(e / A)) - f_EC H2(e)]`.
///
/// `e / A` is clipped to `[0, 1]`; a nonpositive `A` is treated as the
/// `A -> 0+` limit of the ratio.
pub fn skr_from_measured(p_click: f64, e: f64, a: f64, f_ec: f64) -> f64 {
    let ratio = if a > 0.0 { e / a } else { 1.0 };
    let (ratio, _) = clip_unit(ratio);
    0.5 * p_click * (a * (1.0 - h2(ratio)) - f_ec * h2(e))
}

/// Key rate of `dist` sent through `channel` into `det`.
pub fn gllp_skr(
    dist: &PhotonNumberDistribution,
    channel: &ChannelModel,
    det: &DetectorModel,
) -> Result<SkrReport> {
    gllp_skr_at(dist, channel.transmissivity()?, det)
}

/// [`gllp_skr`] at an explicit total transmissivity.
pub fn gllp_skr_at(dist: &PhotonNumberDistribution, eta: f64, det: &DetectorModel) -> Result<SkrReport> {
    let t = totals(dist, eta, det)?;
    skr_from_totals(t, multiphoton_probability(dist), det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_stats::{poisson_distribution, qd_distribution, QdSourceParams};

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let h = binary_entropy(0.11).unwrap();
        let direct = -0.11 * 0.11f64.log2() - 0.89 * 0.89f64.log2();
        assert!((h - direct).abs() < 1e-15);
        assert!((h - binary_entropy(0.89).unwrap()).abs() < 1e-15);
        assert!((h - 0.499_916).abs() < 1e-6);
        assert!(binary_entropy(1.2).is_err());
        assert!(binary_entropy(-1e-9).is_err());
    }

    #[test]
    fn multiphoton_examples() {
        assert_eq!(multiphoton_probability(&PhotonNumberDistribution::vacuum()), 0.0);
        let mu: f64 = 0.6;
        let d = poisson_distribution(mu, 0).unwrap();
        let tail = 1.0 - (-mu).exp() * (1.0 + mu);
        assert!((multiphoton_probability(&d) - tail).abs() < 1e-14);
    }

    #[test]
    fn perfect_single_photons_give_half_a_bit() {
        let det = DetectorModel::ideal();
        let r = gllp_skr_at(&PhotonNumberDistribution::fock(1), 1.0, &det).unwrap();
        assert_eq!(r.skr_per_pulse, 0.5);
        assert!(!r.clamped);
        assert_eq!(r.a_fraction, 1.0);
        assert_eq!(r.skr_per_second, 0.5 * det.rep_rate_hz);
    }

    #[test]
    fn clamping() {
        let det = DetectorModel::experiment();
        // pure dark counts: E_tot = e0 = 0.5
        let r = gllp_skr_at(&PhotonNumberDistribution::vacuum(), 0.1, &det).unwrap();
        assert!(r.clamped);
        assert_eq!(r.skr_per_second, 0.0);
        assert_eq!(r.effective(), 0.0);

        // a bright laser at high loss has no single-photon share left
        let d = poisson_distribution(2.0, 0).unwrap();
        let r = gllp_skr_at(&d, 1e-3, &det).unwrap();
        assert!(r.a_fraction == 0.0 && r.clamped && r.ratio_clipped);
        assert!(r.skr_per_pulse < 0.0);
    }

    #[test]
    fn experiment_long_distance_point() {
        let qd = qd_distribution(&QdSourceParams::new(0.0409, 0.012).unwrap()).unwrap();
        let ch = ChannelModel { attenuation_db: 30.0, ..Default::default() };
        let r = gllp_skr(&qd, &ch, &DetectorModel::experiment()).unwrap();
        assert!((2.5e-6..=1e-5).contains(&r.skr_per_pulse), "{r:?}");
    }

    #[test]
    fn laser_only_ideal_closed_form() {
        for mu in [0.1f64, 0.5, 1.0, 2.0] {
            let d = poisson_distribution(mu, 0).unwrap();
            let r = gllp_skr_at(&d, 1.0, &DetectorModel::ideal()).unwrap();
            assert!((r.skr_per_pulse - 0.5 * mu * (-mu).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_form_matches_constructive_form() {
        let det = DetectorModel::experiment();
        let qd = qd_distribution(&QdSourceParams::new(0.3, 0.02).unwrap()).unwrap();
        let r = gllp_skr_at(&qd, 0.05, &det).unwrap();
        let alt = skr_from_measured(r.q_tot, r.e_tot, r.a_fraction, det.f_ec);
        assert!((alt - r.skr_per_pulse).abs() < 1e-15);
    }

    #[test]
    fn zero_gain_is_an_error() {
        let r = skr_from_totals(Totals { q_tot: 0.0, e_tot: 0.0 }, 0.0, &DetectorModel::ideal());
        assert_eq!(r, Err(crate::Error::ZeroGain));
    }
}
