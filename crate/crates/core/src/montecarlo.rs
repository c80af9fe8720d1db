//! Pulse-by-pulse simulation of the link, used as an independent check of
//! the analytic yields, gains and error rates.
//!
//! Each pulse draws a photon number from the source statistics, loses each
//! photon independently, and may add a dark count. A click caused by at least
//! one surviving photon errs with probability `e_d`; a dark-count-only click
//! errs with probability `e0`. A fair coin decides whether the click survives
//! sifting.
//!
//! Pulses are processed in blocks of [`BLOCK_PULSES`]. Block `b` draws from
//! stream `b` of a ChaCha8 generator keyed by the seed, so tallies are
//! bit-identical however the blocks are scheduled across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{DetectorModel, Totals};
use crate::error::{check_probability, Error, Result};
use crate::photon_stats::PhotonNumberDistribution;
use crate::security::{multiphoton_probability, skr_from_totals, SkrReport};

pub const BLOCK_PULSES: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub dist: PhotonNumberDistribution,
    /// Total transmissivity from Alice to Bob.
    pub eta: f64,
    pub det: DetectorModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTally {
    pub n_pulses: u64,
    pub n_clicks: u64,
    pub n_sifted: u64,
    /// Errors among sifted clicks.
    pub n_errors: u64,
    pub q_tot_hat: f64,
    pub e_tot_hat: f64,
    pub stderr_q: f64,
    pub stderr_e: f64,
    /// Pulses by number of photons surviving the channel.
    pub arrivals: Vec<u64>,
}

#[derive(Debug, Default, Clone)]
struct Counts {
    clicks: u64,
    sifted: u64,
    errors: u64,
    arrivals: Vec<u64>,
}

impl Counts {
    fn merge(mut self, other: Counts) -> Counts {
        self.clicks += other.clicks;
        self.sifted += other.sifted;
        self.errors += other.errors;
        if self.arrivals.len() < other.arrivals.len() {
            self.arrivals.resize(other.arrivals.len(), 0);
        }
        for (a, b) in self.arrivals.iter_mut().zip(&other.arrivals) {
            *a += b;
        }
        self
    }
}

fn simulate_block(config: &SimConfig, cdf: &[f64], block: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(block);
    let start = block * BLOCK_PULSES;
    let len = BLOCK_PULSES.min(config.n_pulses - start);

    let det = &config.det;
    let mut counts = Counts {
        arrivals: vec![0; cdf.len()],
        ..Default::default()
    };
    for _ in 0..len {
        let u: f64 = rng.gen();
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let survivors = (0..k).filter(|_| rng.gen::<f64>() < config.eta).count();
        counts.arrivals[survivors] += 1;
        let dark = rng.gen::<f64>() < det.y0;
        if survivors == 0 && !dark {
            continue;
        }
        counts.clicks += 1;
        let p_error = if survivors > 0 { det.e_d } else { det.e0 };
        let error = rng.gen::<f64>() < p_error;
        if rng.gen::<bool>() {
            counts.sifted += 1;
            counts.errors += u64::from(error);
        }
    }
    counts
}

/// Runs the pulse-level simulation.
pub fn simulate(config: &SimConfig) -> Result<SimTally> {
    if config.n_pulses == 0 {
        return Err(Error::OutOfRange {
            name: "n_pulses",
            value: 0.0,
            expected: "at least one pulse",
        });
    }
    check_probability("transmissivity", config.eta)?;
    config.det.validate()?;

    let mut cdf: Vec<f64> = config
        .dist
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    *cdf.last_mut().expect("distribution has at least three components") = 1.0;

    let blocks = config.n_pulses.div_ceil(BLOCK_PULSES);
    let partials: Vec<Counts> = (0..blocks)
        .into_par_iter()
        .map(|b| simulate_block(config, &cdf, b))
        .collect();
    let counts = partials.into_iter().fold(Counts::default(), Counts::merge);

    let n = config.n_pulses as f64;
    let q = counts.clicks as f64 / n;
    let (e, stderr_e) = if counts.sifted > 0 {
        let s = counts.sifted as f64;
        let e = counts.errors as f64 / s;
        (e, (e * (1.0 - e) / s).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(SimTally {
        n_pulses: config.n_pulses,
        n_clicks: counts.clicks,
        n_sifted: counts.sifted,
        n_errors: counts.errors,
        q_tot_hat: q,
        e_tot_hat: e,
        stderr_q: (q * (1.0 - q) / n).sqrt(),
        stderr_e,
        arrivals: counts.arrivals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSkr {
    pub report: SkrReport,
    /// Standard error of the raw key rate propagated from the gain and QBER
    /// estimates.
    pub stderr: f64,
}

/// Key rate computed from simulated counts and the exact multiphoton
/// probability of the source.
pub fn empirical_skr(
    tally: &SimTally,
    det: &DetectorModel,
    dist: &PhotonNumberDistribution,
) -> Result<EmpiricalSkr> {
    if tally.n_clicks == 0 {
        return Err(Error::ZeroGain);
    }
    let p_m = multiphoton_probability(dist);
    let rate = |q_tot: f64, e_tot: f64| -> Result<f64> {
        Ok(skr_from_totals(Totals { q_tot, e_tot }, p_m, det)?.skr_per_pulse)
    };
    let report = skr_from_totals(
        Totals {
            q_tot: tally.q_tot_hat,
            e_tot: tally.e_tot_hat,
        },
        p_m,
        det,
    )?;

    let hq = 1e-6 * tally.q_tot_hat;
    let dq = (rate(tally.q_tot_hat + hq, tally.e_tot_hat)? - rate(tally.q_tot_hat - hq, tally.e_tot_hat)?)
        / (2.0 * hq);
    let he = 1e-6 * tally.e_tot_hat.max(1e-9);
    let e_lo = (tally.e_tot_hat - he).max(0.0);
    let e_hi = (tally.e_tot_hat + he).min(1.0);
    let de = (rate(tally.q_tot_hat, e_hi)? - rate(tally.q_tot_hat, e_lo)?) / (e_hi - e_lo);
    let stderr = ((dq * tally.stderr_q).powi(2) + (de * tally.stderr_e).powi(2)).sqrt();

    Ok(EmpiricalSkr { report, stderr })
}
