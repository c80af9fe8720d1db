//! Asymptotic BB84 key rates for sources that mix quantum-dot single photons
//! with Poissonian laser light.
//!
//! The crate is organized bottom-up:
//!
//! - [`photon_stats`]: photon-number distributions of the quantum dot, the
//!   laser and their incoherent mixture, plus binomial loss.
//! - [`channel`]: yields, gains and error rates behind a lossy channel with
//!   threshold detectors.
//! - [`security`]: the tagged-multiphoton key-rate bound.
//! - [`optimize`]: optimal laser admixture and the advantage thresholds.
//! - [`estimate`]: recovering the laser mean photon number from clicks.
//! - [`montecarlo`]: a pulse-level simulation that checks the analytic
//!   pipeline.
//!
//! ```
//! use hybridqkd::{gllp_skr, qd_distribution, ChannelModel, DetectorModel, QdSourceParams};
//!
//! let source = QdSourceParams::new(0.0409, 0.012)?;
//! let qd = qd_distribution(&source)?;
//! let channel = ChannelModel { attenuation_db: 30.0, ..Default::default() };
//! let report = gllp_skr(&qd, &channel, &DetectorModel::experiment())?;
//! assert!(report.skr_per_pulse > 0.0);
//! # Ok::<(), hybridqkd::Error>(())
//! ```

pub mod channel;
mod error;
pub mod estimate;
pub mod montecarlo;
pub mod optimize;
pub mod photon_stats;
pub mod security;

pub use channel::{
    db_to_km, db_to_transmissivity, error_k, gain_k, totals, yield_k, ChannelModel, DetectorModel,
    Totals,
};
pub use error::{Error, Result};
pub use estimate::{
    compose_click_probability, infer_mu_laser, infer_mu_mixed, ClickObservables, LaserEstimate,
    MixedEstimate,
};
pub use montecarlo::{empirical_skr, simulate, EmpiricalSkr, SimConfig, SimTally};
pub use optimize::{
    advantage_report, crossover_attenuation, laser_beat_brightness, optimize_laser_only,
    optimize_mu_laser, skr_scan, unconditional_advantage_brightness, AdvantageReport, Crossover,
    OptimizationResult, ScanRow,
};
pub use photon_stats::{
    apply_loss, brightness_after_loss, g2_of, hybrid_distribution, mean_photon_number,
    poisson_distribution, qd_distribution, PhotonNumberDistribution, QdSourceParams,
};
pub use security::{
    binary_entropy, gllp_skr, gllp_skr_at, multiphoton_probability, skr_from_measured,
    skr_from_totals, SkrReport,
};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/photon-statistics.md")]
    mod photon_statistics {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/key-rate.md")]
    mod key_rate {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
