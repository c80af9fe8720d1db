//! The subcommands, each turning a [`RunConfig`] into tables.

use std::fmt::Write as _;

use hybridqkd::optimize::NO_LASER;
use hybridqkd::{
    advantage_report, empirical_skr, gllp_skr_at, hybrid_distribution, mean_photon_number,
    optimize_laser_only, optimize_mu_laser, qd_distribution, simulate, skr_scan, totals,
    AdvantageReport, Crossover, DetectorModel, Error, PhotonNumberDistribution, QdSourceParams,
    ScanRow, SimConfig, SimTally,
};
use rayon::prelude::*;

use crate::config::{ConfigError, LaserSpec, RunConfig};
use crate::gnuplot::PlotSpec;
use crate::table::{Cell, Table};
use crate::CliError;

pub const SCAN_COLUMNS: &[&str] = &[
    "db",
    "km",
    "mu_laser",
    "mu_mixed",
    "ratio",
    "g2_hybrid",
    "q_tot",
    "e_tot",
    "a_fraction",
    "skr_per_pulse",
    "skr_per_second",
    "clamped",
];

pub const OPTIMIZE_COLUMNS: &[&str] = &[
    "db",
    "km",
    "mu_laser_opt",
    "ratio_opt",
    "purity_opt",
    "skr_opt",
    "skr_qd_only",
    "skr_laser_only_opt",
    "crossover",
];

/// Optimal admixture over a brightness by attenuation grid.
pub const GRID_COLUMNS: &[&str] = &["brightness", "db", "km", "mu_laser_opt", "ratio_opt", "skr_opt"];

pub const MONTECARLO_COLUMNS: &[&str] = &[
    "db",
    "mu_laser",
    "q_tot_analytic",
    "q_tot_hat",
    "stderr_q",
    "e_tot_analytic",
    "e_tot_hat",
    "stderr_e",
    "skr_analytic",
    "skr_empirical",
    "pass",
];

/// Quantum-dot-only key rate curves for several sources.
pub const QD_SCALING_COLUMNS: &[&str] = &["curve", "brightness", "g2", "db", "km", "skr_per_pulse"];

pub const ERROR_RATE_COLUMNS: &[&str] = &["e_d", "db", "km", "mu_laser_opt", "ratio_opt", "skr_opt"];

pub const BRIGHTNESS_SWEEP_COLUMNS: &[&str] = &["brightness", "db", "km", "skr_per_pulse"];

/// Laser shares plotted when the configuration lists none.
pub const DEFAULT_RATIOS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.868];

pub const ERROR_RATE_SWEEP: [f64; 5] = [0.0001, 0.005, 0.01, 0.02, 0.05];

pub const BRIGHTNESS_SWEEP: [f64; 9] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];

pub const BRIGHTNESS_SWEEP_G2: f64 = 0.01;

/// `(brightness, g2)` of the quantum-dot-only curves.
pub const QD_SCALING_SOURCES: [(f64, f64); 6] =
    [(0.05, 0.01), (0.1, 0.01), (0.2, 0.01), (0.5, 0.01), (1.0, 0.01), (0.5, 0.0001)];

/// Laser means of the configuration, converting ratios with the source's
/// own mean photon number.
pub fn laser_means(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    match &cfg.laser {
        LaserSpec::Means(mu) => Ok(mu.clone()),
        LaserSpec::Ratios(ratios) => {
            let mu_qd = mean_photon_number(&qd_distribution(&cfg.source)?);
            Ok(ratios.iter().map(|r| r / (1.0 - r) * mu_qd).collect())
        }
        LaserSpec::Unset => Err(ConfigError::new("[laser] needs `mu` or `ratio`").into()),
    }
}

fn scan_cells(row: &ScanRow) -> Vec<Cell> {
    let r = &row.report;
    vec![
        row.attenuation_db.into(),
        row.km.into(),
        row.mu_laser.into(),
        row.mu_mixed.into(),
        row.mix_ratio.into(),
        row.g2_hybrid.into(),
        r.q_tot.into(),
        r.e_tot.into(),
        r.a_fraction.into(),
        r.skr_per_pulse.into(),
        r.skr_per_second.into(),
        r.clamped.into(),
    ]
}

/// Key rate over the attenuation grid for each laser mean, grouped by laser
/// mean. With `laser.optimize = true`, one row per attenuation at the
/// optimal laser mean.
pub fn scan(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut table = Table::new(SCAN_COLUMNS);
    if cfg.optimize {
        let rows = cfg
            .db_grid
            .par_iter()
            .map(|&db| {
                let opt = optimize_mu_laser(&cfg.source, db, &cfg.channel, &cfg.detector)?;
                skr_scan(&cfg.source, &[opt.mu_laser_opt], &[db], &cfg.channel, &cfg.detector)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        for row in rows.iter().flatten() {
            table.push(scan_cells(row));
        }
        return Ok(table);
    }
    let mus = laser_means(cfg)?;
    let rows = skr_scan(&cfg.source, &mus, &cfg.db_grid, &cfg.channel, &cfg.detector)?;
    for i in 0..mus.len() {
        for j in 0..cfg.db_grid.len() {
            table.push(scan_cells(&rows[j * mus.len() + i]));
        }
    }
    Ok(table)
}

fn effective_skr(dist: &PhotonNumberDistribution, eta: f64, det: &DetectorModel) -> Result<f64, Error> {
    match gllp_skr_at(dist, eta, det) {
        Ok(r) => Ok(r.effective()),
        Err(Error::ZeroGain) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Optimal admixture per attenuation, compared with each source alone.
pub fn optimize(cfg: &RunConfig) -> Result<Table, CliError> {
    let qd = qd_distribution(&cfg.source)?;
    let rows = cfg
        .db_grid
        .par_iter()
        .map(|&db| -> Result<Vec<Cell>, Error> {
            let opt = optimize_mu_laser(&cfg.source, db, &cfg.channel, &cfg.detector)?;
            let laser = optimize_laser_only(db, &cfg.channel, &cfg.detector)?;
            let ch = cfg.channel.at_db(db);
            let qd_only = effective_skr(&qd, ch.transmissivity()?, &cfg.detector)?;
            Ok(vec![
                db.into(),
                ch.distance_km().into(),
                opt.mu_laser_opt.into(),
                opt.mix_ratio.into(),
                opt.purity_at_opt.into(),
                opt.skr_opt.into(),
                qd_only.into(),
                laser.skr_opt.into(),
                (opt.skr_opt > 0.0 && opt.mu_laser_opt < NO_LASER).into(),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut table = Table::new(OPTIMIZE_COLUMNS);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

/// Optimal admixture for every brightness and attenuation, brightness-major.
pub fn optimal_ratio_grid(
    cfg: &RunConfig,
    g2: f64,
    detector: &DetectorModel,
    brightness: &[f64],
) -> Result<Table, CliError> {
    let points: Vec<(f64, f64)> = brightness
        .iter()
        .flat_map(|&b| cfg.db_grid.iter().map(move |&db| (b, db)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(b, db)| -> Result<Vec<Cell>, Error> {
            let source = QdSourceParams::new(b, g2)?;
            let opt = optimize_mu_laser(&source, db, &cfg.channel, detector)?;
            Ok(vec![
                b.into(),
                db.into(),
                cfg.channel.at_db(db).distance_km().into(),
                opt.mu_laser_opt.into(),
                opt.mix_ratio.into(),
                opt.skr_opt.into(),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut table = Table::new(GRID_COLUMNS);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOutput {
    pub source: QdSourceParams,
    pub report: AdvantageReport,
    pub grid: Table,
}

impl ThresholdOutput {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "brightness: {}", self.source.brightness);
        let _ = writeln!(s, "g2: {}", self.source.g2);
        let crossover = match self.report.crossover {
            Crossover::At(db) => format!("{db:.2} dB"),
            Crossover::NeverMixed => "none (single photons alone are optimal everywhere)".into(),
            Crossover::AlwaysMixed => "none (laser admixture helps everywhere)".into(),
        };
        let _ = writeln!(s, "crossover attenuation: {crossover}");
        let fmt = |b: Option<f64>| b.map_or("none below 1".to_string(), |b| format!("{b:.4}"));
        let _ = writeln!(
            s,
            "unconditional advantage brightness: {}",
            fmt(self.report.unconditional_brightness)
        );
        let _ = writeln!(s, "laser beat brightness: {}", fmt(self.report.laser_beat_brightness));
        s
    }
}

/// Advantage thresholds of the configured source and the optimal-ratio grid.
pub fn threshold(cfg: &RunConfig) -> Result<ThresholdOutput, CliError> {
    Ok(ThresholdOutput {
        source: cfg.source,
        report: advantage_report(&cfg.source, &cfg.channel, &cfg.detector)?,
        grid: optimal_ratio_grid(cfg, cfg.source.g2, &cfg.detector, &cfg.brightness_grid)?,
    })
}

/// Seed of Monte Carlo point `index`, attempt `attempt`, derived from the run
/// seed with SplitMix64 so neighbouring points get unrelated streams.
pub fn point_seed(seed: u64, index: u64, attempt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(attempt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McPoint {
    pub db: f64,
    pub mu_laser: f64,
    pub seed: u64,
    pub q_tot_analytic: f64,
    pub e_tot_analytic: f64,
    pub skr_analytic: f64,
    pub tally: SimTally,
    /// `None` when the simulation registered no click.
    pub skr_empirical: Option<f64>,
}

impl McPoint {
    /// Gain and error rate both within three standard errors.
    pub fn pass(&self) -> bool {
        let t = &self.tally;
        (t.q_tot_hat - self.q_tot_analytic).abs() <= 3.0 * t.stderr_q
            && (t.e_tot_hat - self.e_tot_analytic).abs() <= 3.0 * t.stderr_e
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            self.db.into(),
            self.mu_laser.into(),
            self.q_tot_analytic.into(),
            self.tally.q_tot_hat.into(),
            self.tally.stderr_q.into(),
            self.e_tot_analytic.into(),
            self.tally.e_tot_hat.into(),
            self.tally.stderr_e.into(),
            self.skr_analytic.into(),
            self.skr_empirical.into(),
            self.pass().into(),
        ]
    }
}

pub fn montecarlo_point(cfg: &RunConfig, db: f64, mu_laser: f64, seed: u64) -> Result<McPoint, CliError> {
    let dist = hybrid_distribution(&qd_distribution(&cfg.source)?, mu_laser, 0)?;
    let eta = cfg.channel.at_db(db).transmissivity()?;
    let exact = totals(&dist, eta, &cfg.detector)?;
    let tally = simulate(&SimConfig {
        n_pulses: cfg.n_pulses,
        seed,
        dist: dist.clone(),
        eta,
        det: cfg.detector,
    })?;
    let skr_empirical = match empirical_skr(&tally, &cfg.detector, &dist) {
        Ok(e) => Some(e.report.effective()),
        Err(Error::ZeroGain) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(McPoint {
        db,
        mu_laser,
        seed,
        q_tot_analytic: exact.q_tot,
        e_tot_analytic: exact.e_tot,
        skr_analytic: effective_skr(&dist, eta, &cfg.detector)?,
        tally,
        skr_empirical,
    })
}

/// Simulated against analytic totals at every `(db, mu_laser)` point,
/// attenuation-major. Point `i` uses `point_seed(seed, i, 0)`.
pub fn montecarlo_points(cfg: &RunConfig) -> Result<Vec<McPoint>, CliError> {
    let mus = laser_means(cfg)?;
    let mut points = Vec::with_capacity(mus.len() * cfg.db_grid.len());
    for &db in &cfg.db_grid {
        for &mu in &mus {
            let seed = point_seed(cfg.seed, points.len() as u64, 0);
            points.push(montecarlo_point(cfg, db, mu, seed)?);
        }
    }
    Ok(points)
}

pub fn montecarlo_table(points: &[McPoint]) -> Table {
    let mut table = Table::new(MONTECARLO_COLUMNS);
    points.iter().for_each(|p| table.push(p.cells()));
    table
}

pub fn montecarlo(cfg: &RunConfig) -> Result<Table, CliError> {
    Ok(montecarlo_table(&montecarlo_points(cfg)?))
}

fn qd_only_curve(cfg: &RunConfig, source: QdSourceParams) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let dist = qd_distribution(&source)?;
    cfg.db_grid
        .par_iter()
        .map(|&db| {
            let ch = cfg.channel.at_db(db);
            Ok((db, ch.distance_km(), effective_skr(&dist, ch.transmissivity()?, &cfg.detector)?))
        })
        .collect()
}

/// Quantum-dot-only key rates for the brightness sweep at fixed purity.
pub fn brightness_sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut table = Table::new(BRIGHTNESS_SWEEP_COLUMNS);
    for &b in &BRIGHTNESS_SWEEP {
        for (db, km, skr) in qd_only_curve(cfg, QdSourceParams::new(b, BRIGHTNESS_SWEEP_G2)?)? {
            table.push(vec![b.into(), db.into(), km.into(), skr.into()]);
        }
    }
    Ok(table)
}

fn qd_scaling(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut table = Table::new(QD_SCALING_COLUMNS);
    for (i, &(b, g2)) in QD_SCALING_SOURCES.iter().enumerate() {
        for (db, km, skr) in qd_only_curve(cfg, QdSourceParams::new(b, g2)?)? {
            table.push(vec![Cell::Int(i as u64), b.into(), g2.into(), db.into(), km.into(), skr.into()]);
        }
    }
    Ok(table)
}

fn error_rates(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut table = Table::new(ERROR_RATE_COLUMNS);
    for &e_d in &ERROR_RATE_SWEEP {
        let det = DetectorModel { e_d, ..cfg.detector };
        let grid = optimal_ratio_grid(cfg, cfg.source.g2, &det, &[cfg.source.brightness])?;
        for mut row in grid.rows {
            row[0] = e_d.into();
            table.push(row);
        }
    }
    Ok(table)
}

/// One figure's data and its plot description.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: &'static str,
    pub table: Table,
    pub plot: PlotSpec,
}

/// Data behind every figure, computed from the configured source, channel
/// and detector.
pub fn figures(cfg: &RunConfig) -> Result<Vec<Figure>, CliError> {
    let ratios = match &cfg.laser {
        LaserSpec::Ratios(r) => r.clone(),
        _ => DEFAULT_RATIOS.to_vec(),
    };
    let fig2_cfg = RunConfig { laser: LaserSpec::Ratios(ratios), optimize: false, ..cfg.clone() };

    let mut optimal_mu_brightness = vec![0.0, cfg.source.brightness, 0.1, 0.2, 0.3, 0.5];
    optimal_mu_brightness.sort_by(f64::total_cmp);
    optimal_mu_brightness.dedup();
    optimal_mu_brightness.retain(|&b| QdSourceParams::new(b, cfg.source.g2).is_ok());

    Ok(vec![
        Figure {
            name: "fig2_mixtures",
            table: scan(&fig2_cfg)?,
            plot: PlotSpec::new("Key rate of fixed mixtures", "db", &["skr_per_pulse"])
                .grouped("ratio")
                .log_y(),
        },
        Figure {
            name: "fig3_optimized",
            table: optimize(cfg)?,
            plot: PlotSpec::new(
                "Optimized mixture against each source alone",
                "db",
                &["skr_opt", "skr_qd_only", "skr_laser_only_opt"],
            )
            .log_y(),
        },
        Figure {
            name: "fig4a_optimal_ratio",
            table: optimal_ratio_grid(cfg, cfg.source.g2, &cfg.detector, &cfg.brightness_grid)?,
            plot: PlotSpec::new("Optimal laser share", "db", &["ratio_opt"]).grouped("brightness"),
        },
        Figure {
            name: "fig4b_qd_scaling",
            table: qd_scaling(cfg)?,
            plot: PlotSpec::new("Single-photon key rate by source", "db", &["skr_per_pulse"])
                .grouped("curve")
                .log_y(),
        },
        Figure {
            name: "error_rates",
            table: error_rates(cfg)?,
            plot: PlotSpec::new("Optimized key rate by misalignment error", "db", &["skr_opt"])
                .grouped("e_d")
                .log_y(),
        },
        Figure {
            name: "brightness_sweep",
            table: brightness_sweep(cfg)?,
            plot: PlotSpec::new("Single-photon key rate by brightness", "db", &["skr_per_pulse"])
                .grouped("brightness")
                .log_y(),
        },
        Figure {
            name: "optimal_mu",
            table: optimal_ratio_grid(cfg, cfg.source.g2, &cfg.detector, &optimal_mu_brightness)?,
            plot: PlotSpec::new("Optimal laser mean photon number", "db", &["mu_laser_opt"])
                .grouped("brightness"),
        },
    ])
}
