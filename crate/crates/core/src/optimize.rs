//! Choosing how much laser light to mix into the single-photon stream.
//!
//! For a fixed quantum-dot source the key rate is a function of the laser
//! mean photon number alone. [`optimize_mu_laser`] maximizes it per
//! attenuation; the remaining functions locate where the optimum switches to
//! pure single photons, either along the attenuation axis
//! ([`crossover_attenuation`]) or along the brightness axis
//! ([`unconditional_advantage_brightness`]).

use rayon::prelude::*;

use crate::channel::{ChannelModel, DetectorModel};
use crate::error::{Error, Result};
use crate::photon_stats::{
    g2_of, hybrid_distribution, mean_photon_number, qd_distribution, PhotonNumberDistribution,
    QdSourceParams,
};
use crate::security::{gllp_skr_at, SkrReport};

/// Upper end of the laser search domain.
pub const MU_LASER_MAX: f64 = 5.0;

/// Optimal laser means below this count as "no laser".
pub const NO_LASER: f64 = 1e-4;

/// Attenuation range searched for a crossover, dB.
pub const CROSSOVER_DB_RANGE: (f64, f64) = (0.0, 60.0);

/// Resolution of the crossover bisection, dB.
pub const CROSSOVER_DB_RESOLUTION: f64 = 0.05;

/// Resolution of the brightness threshold bisections.
pub const BRIGHTNESS_RESOLUTION: f64 = 1e-4;

const GRID_POINTS: usize = 64;
const GRID_MIN: f64 = 1e-4;
const GOLDEN_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub attenuation_db: f64,
    pub mu_laser_opt: f64,
    /// Clamped key rate at the optimum, bits per pulse.
    pub skr_opt: f64,
    /// `mu_laser / mu_mixed` at the optimum.
    pub mix_ratio: f64,
    /// `1 - g2` of the hybrid output; `None` when nothing is emitted.
    pub purity_at_opt: Option<f64>,
    /// Full report at the optimum; `None` when no click is possible at all.
    pub report: Option<SkrReport>,
}

/// Where, along the attenuation axis, mixing stops paying off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossover {
    /// Smallest attenuation from which single photons alone are optimal.
    At(f64),
    /// Single photons alone are optimal wherever a key exists.
    NeverMixed,
    /// Some laser helps wherever a key exists.
    AlwaysMixed,
}

impl Crossover {
    pub fn db(&self) -> Option<f64> {
        match self {
            Crossover::At(db) => Some(*db),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantageReport {
    pub crossover: Crossover,
    /// Smallest brightness at which laser never helps.
    pub unconditional_brightness: Option<f64>,
    /// Smallest brightness at which single photons beat an optimized laser
    /// at zero applied attenuation.
    pub laser_beat_brightness: Option<f64>,
}

/// One evaluated point of a `(mu_laser, attenuation)` scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub attenuation_db: f64,
    pub km: f64,
    pub mu_laser: f64,
    pub mu_mixed: f64,
    pub mix_ratio: f64,
    pub g2_hybrid: Option<f64>,
    pub report: SkrReport,
}

/// Laser share of the mean photon number.
pub fn mix_ratio(mu_laser: f64, mu_mixed: f64) -> f64 {
    if mu_mixed > 0.0 {
        mu_laser / mu_mixed
    } else {
        0.0
    }
}

struct Objective<'a> {
    qd: PhotonNumberDistribution,
    eta: f64,
    det: &'a DetectorModel,
}

impl<'a> Objective<'a> {
    fn new(source: &QdSourceParams, eta: f64, det: &'a DetectorModel) -> Result<Self> {
        det.validate()?;
        Ok(Self {
            qd: qd_distribution(source)?,
            eta,
            det,
        })
    }

    fn report(&self, mu: f64) -> Result<Option<SkrReport>> {
        let dist = hybrid_distribution(&self.qd, mu, 0)?;
        match gllp_skr_at(&dist, self.eta, self.det) {
            Ok(r) => Ok(Some(r)),
            Err(Error::ZeroGain) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn value(&self, mu: f64) -> Result<f64> {
        Ok(self.report(mu)?.map_or(0.0, |r| r.effective()))
    }
}

/// Laser means probed before refinement: zero plus a log-spaced grid.
fn search_grid() -> Vec<f64> {
    let (lo, hi) = (GRID_MIN.ln(), MU_LASER_MAX.ln());
    std::iter::once(0.0)
        .chain((0..GRID_POINTS).map(|i| (lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).exp()))
        .collect()
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
///
/// Returns `(x_max, f_max)`.
pub fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, tolerance: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tolerance {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Laser mean maximizing the clamped key rate at `attenuation_db`.
///
/// A 65-point grid over `[0, MU_LASER_MAX]` locates the best region and a
/// golden-section search refines it. Ties, including the all-zero case
/// where no key exists, resolve to the smallest laser mean.
pub fn optimize_mu_laser(
    qd: &QdSourceParams,
    attenuation_db: f64,
    channel: &ChannelModel,
    det: &DetectorModel,
) -> Result<OptimizationResult> {
    let eta = channel.at_db(attenuation_db).transmissivity()?;
    let objective = Objective::new(qd, eta, det)?;

    let grid = search_grid();
    let values = grid
        .iter()
        .map(|&mu| objective.value(mu))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }

    let (mut mu_opt, mut skr_opt) = (grid[best], values[best]);
    if skr_opt > 0.0 {
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (mu, v) = golden_section_max(|mu| objective.value(mu), lo, hi, GOLDEN_TOLERANCE)?;
        if v > skr_opt {
            mu_opt = mu;
            skr_opt = v;
        }
    }

    let dist = hybrid_distribution(&objective.qd, mu_opt, 0)?;
    let mu_mixed = mean_photon_number(&objective.qd) + mu_opt;
    let purity_at_opt = match g2_of(&dist) {
        Ok(g2) => Some(1.0 - g2),
        Err(Error::ZeroMean) => None,
        Err(e) => return Err(e),
    };

    Ok(OptimizationResult {
        attenuation_db,
        mu_laser_opt: mu_opt,
        skr_opt,
        mix_ratio: mix_ratio(mu_opt, mu_mixed),
        purity_at_opt,
        report: objective.report(mu_opt)?,
    })
}

/// Optimal key rate of the laser alone (a quantum dot of zero brightness).
pub fn optimize_laser_only(
    attenuation_db: f64,
    channel: &ChannelModel,
    det: &DetectorModel,
) -> Result<OptimizationResult> {
    optimize_mu_laser(&QdSourceParams { brightness: 0.0, g2: 0.0 }, attenuation_db, channel, det)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    NoKey,
    Pure,
    Mixed,
}

fn regime(qd: &QdSourceParams, db: f64, channel: &ChannelModel, det: &DetectorModel) -> Result<Regime> {
    let opt = optimize_mu_laser(qd, db, channel, det)?;
    Ok(if opt.skr_opt <= 0.0 {
        Regime::NoKey
    } else if opt.mu_laser_opt < NO_LASER {
        Regime::Pure
    } else {
        Regime::Mixed
    })
}

/// Smallest attenuation from which adding laser no longer helps.
///
/// Attenuations without any key are ignored. A 1 dB scan over
/// [`CROSSOVER_DB_RANGE`] brackets the transition, which is then bisected to
/// [`CROSSOVER_DB_RESOLUTION`].
pub fn crossover_attenuation(
    qd: &QdSourceParams,
    channel: &ChannelModel,
    det: &DetectorModel,
) -> Result<Crossover> {
    let (start, end) = CROSSOVER_DB_RANGE;
    let steps = (end - start).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| start + i as f64).collect();
    let regimes = grid
        .par_iter()
        .map(|&db| regime(qd, db, channel, det))
        .collect::<Result<Vec<_>>>()?;

    let Some(first_pure) = regimes.iter().position(|&r| r == Regime::Pure) else {
        return Ok(if regimes.contains(&Regime::Mixed) {
            Crossover::AlwaysMixed
        } else {
            Crossover::NeverMixed
        });
    };
    let Some(last_mixed) = regimes[..first_pure].iter().rposition(|&r| r == Regime::Mixed) else {
        return Ok(Crossover::NeverMixed);
    };

    let (mut lo, mut hi) = (grid[last_mixed], grid[first_pure]);
    while hi - lo > CROSSOVER_DB_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        match regime(qd, mid, channel, det)? {
            Regime::Mixed => lo = mid,
            Regime::Pure | Regime::NoKey => hi = mid,
        }
    }
    Ok(Crossover::At(hi))
}

fn max_brightness(g2: f64) -> f64 {
    if g2 > 0.0 {
        (0.5 / g2).min(1.0)
    } else {
        1.0
    }
}

/// Bisects for the smallest brightness satisfying `holds`, assuming it is
/// monotone in brightness.
fn brightness_threshold<F>(g2: f64, holds: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<bool>,
{
    let (mut lo, mut hi) = (0.0, max_brightness(g2));
    if !holds(hi)? {
        return Ok(None);
    }
    if holds(lo)? {
        return Ok(Some(lo));
    }
    while hi - lo > BRIGHTNESS_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Smallest brightness at which mixing in laser light never improves the key
/// rate at any attenuation.
pub fn unconditional_advantage_brightness(
    g2: f64,
    det: &DetectorModel,
    channel: &ChannelModel,
) -> Result<Option<f64>> {
    brightness_threshold(g2, |brightness| {
        let qd = QdSourceParams::new(brightness, g2)?;
        Ok(crossover_attenuation(&qd, channel, det)? == Crossover::NeverMixed)
    })
}

/// Smallest brightness at which single photons alone beat the optimized
/// laser at zero applied attenuation.
pub fn laser_beat_brightness(
    g2: f64,
    det: &DetectorModel,
    channel: &ChannelModel,
) -> Result<Option<f64>> {
    let laser = optimize_laser_only(0.0, channel, det)?.skr_opt;
    let eta = channel.at_db(0.0).transmissivity()?;
    brightness_threshold(g2, |brightness| {
        let qd = QdSourceParams::new(brightness, g2)?;
        let skr = Objective::new(&qd, eta, det)?.value(0.0)?;
        Ok(skr > 0.0 && skr >= laser)
    })
}

pub fn advantage_report(
    qd: &QdSourceParams,
    channel: &ChannelModel,
    det: &DetectorModel,
) -> Result<AdvantageReport> {
    Ok(AdvantageReport {
        crossover: crossover_attenuation(qd, channel, det)?,
        unconditional_brightness: unconditional_advantage_brightness(qd.g2, det, channel)?,
        laser_beat_brightness: laser_beat_brightness(qd.g2, det, channel)?,
    })
}

/// Key-rate reports over the Cartesian product of laser means and
/// attenuations, attenuation-major.
pub fn skr_scan(
    qd: &QdSourceParams,
    mu_laser_list: &[f64],
    db_grid: &[f64],
    channel: &ChannelModel,
    det: &DetectorModel,
) -> Result<Vec<ScanRow>> {
    if mu_laser_list.is_empty() {
        return Err(Error::EmptyGrid("laser mean photon number"));
    }
    if db_grid.is_empty() {
        return Err(Error::EmptyGrid("attenuation"));
    }
    det.validate()?;
    let qd_dist = qd_distribution(qd)?;
    let mu_qd = mean_photon_number(&qd_dist);
    let hybrids = mu_laser_list
        .iter()
        .map(|&mu| hybrid_distribution(&qd_dist, mu, 0))
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<(f64, usize)> = db_grid
        .iter()
        .flat_map(|&db| (0..mu_laser_list.len()).map(move |i| (db, i)))
        .collect();
    points
        .par_iter()
        .map(|&(db, i)| {
            let ch = channel.at_db(db);
            let dist = &hybrids[i];
            let mu_mixed = mu_qd + mu_laser_list[i];
            let g2_hybrid = match g2_of(dist) {
                Ok(g2) => Some(g2),
                Err(Error::ZeroMean) => None,
                Err(e) => return Err(e),
            };
            Ok(ScanRow {
                attenuation_db: db,
                km: ch.distance_km(),
                mu_laser: mu_laser_list[i],
                mu_mixed,
                mix_ratio: mix_ratio(mu_laser_list[i], mu_mixed),
                g2_hybrid,
                report: gllp_skr_at(dist, ch.transmissivity()?, det)?,
            })
        })
        .collect()
}
