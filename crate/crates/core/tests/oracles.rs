//! The pulse-level simulation and the forward click model as independent
//! checks of the analytic pipeline.

use hybridqkd::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn table1_qd() -> PhotonNumberDistribution {
    qd_distribution(&QdSourceParams::new(0.0409, 0.012).unwrap()).unwrap()
}

fn hybrid(mu_laser: f64) -> PhotonNumberDistribution {
    hybrid_distribution(&table1_qd(), mu_laser, 0).unwrap()
}

#[test]
fn simulation_matches_analytic_totals_at_10_db() {
    let det = DetectorModel::experiment();
    let eta = db_to_transmissivity(10.0).unwrap();
    let dist = hybrid(0.05);
    let cfg = SimConfig { n_pulses: 10_000_000, seed: 2024, dist: dist.clone(), eta, det };
    let tally = simulate(&cfg).unwrap();
    let exact = totals(&dist, eta, &det).unwrap();
    assert!((tally.q_tot_hat - exact.q_tot).abs() < 3.0 * tally.stderr_q);
    assert!((tally.e_tot_hat - exact.e_tot).abs() < 3.0 * tally.stderr_e);

    let analytic = gllp_skr_at(&dist, eta, &det).unwrap().skr_per_pulse;
    let empirical = empirical_skr(&tally, &det, &dist).unwrap();
    assert!(
        (empirical.report.skr_per_pulse - analytic).abs() < 3.0 * empirical.stderr,
        "{} vs {analytic} (sigma {})",
        empirical.report.skr_per_pulse,
        empirical.stderr
    );
}

#[test]
fn tallies_do_not_depend_on_thread_count() {
    let cfg = SimConfig {
        n_pulses: 3 * montecarlo::BLOCK_PULSES + 1234,
        seed: 99,
        dist: hybrid(0.3),
        eta: 0.2,
        det: DetectorModel { y0: 1e-3, ..DetectorModel::experiment() },
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
    let other = simulate(&SimConfig { seed: 100, ..cfg.clone() }).unwrap();
    assert_ne!(one.n_clicks, other.n_clicks);
}

#[test]
fn surviving_photons_follow_binomial_thinning() {
    let dist = hybrid(0.8);
    let eta = 0.45;
    let n = 1_000_000u64;
    let cfg = SimConfig { n_pulses: n, seed: 5, dist: dist.clone(), eta, det: DetectorModel::ideal() };
    let tally = simulate(&cfg).unwrap();
    let expected = apply_loss(&dist, eta).unwrap();

    // pool the sparse tail so every bin expects at least five counts
    let mut observed_bins = Vec::new();
    let mut expected_bins = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for k in 0..tally.arrivals.len().max(expected.probs().len()) {
        obs_acc += tally.arrivals.get(k).copied().unwrap_or(0) as f64;
        exp_acc += expected.p(k) * n as f64;
        if exp_acc >= 5.0 {
            observed_bins.push(obs_acc);
            expected_bins.push(exp_acc);
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    *observed_bins.last_mut().unwrap() += obs_acc;
    *expected_bins.last_mut().unwrap() += exp_acc;

    let chi2: f64 = observed_bins
        .iter()
        .zip(&expected_bins)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let df = (observed_bins.len() - 1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.99);
    assert!(df >= 3.0);
    assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}, df = {df}");
}

#[test]
fn error_rate_above_half_gives_no_key() {
    let det = DetectorModel { e_d: 0.5, ..DetectorModel::experiment() };
    let dist = hybrid(0.1);
    let cfg = SimConfig { n_pulses: 200_000, seed: 1, dist: dist.clone(), eta: 0.3, det };
    let mut tally = simulate(&cfg).unwrap();
    tally.e_tot_hat = tally.e_tot_hat.max(0.5);
    assert_eq!(empirical_skr(&tally, &det, &dist).unwrap().report.effective(), 0.0);
}

/// Clicks generated from a known source through the independence product,
/// then inverted.
#[test]
fn laser_mean_survives_forward_model_round_trip() {
    let det = DetectorModel::experiment();
    let eta0 = 0.8;
    let qd = table1_qd();
    let p_qd = totals(&apply_loss(&qd, eta0).unwrap(), 1.0, &DetectorModel::ideal())
        .map(|t| t.q_tot)
        .unwrap();
    let p_laser = 1.0 - (-eta0 * 0.2f64).exp();
    let p_click = compose_click_probability(det.y0, p_qd, p_laser);
    let obs = ClickObservables { p_click, p_dc: det.y0, p_click_qd: p_qd, eta0 };
    let est = infer_mu_laser(&obs).unwrap();
    assert!((est.mu_laser - 0.2).abs() < 1e-9, "{}", est.mu_laser);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let p_dc = rng.gen_range(0.0..1e-3);
        let b = rng.gen_range(0.0..1.0);
        let g2 = rng.gen_range(0.0..0.49);
        if 2.0 * b * g2 > 1.0 {
            continue;
        }
        let eta0 = rng.gen_range(0.05..=1.0);
        let mu = rng.gen_range(0.0..3.0);
        let qd = qd_distribution(&QdSourceParams::new(b, g2).unwrap()).unwrap();
        let p_qd = 1.0 - apply_loss(&qd, eta0).unwrap().p(0);
        let p_laser = 1.0 - (-eta0 * mu).exp();
        let obs = ClickObservables {
            p_click: compose_click_probability(p_dc, p_qd, p_laser),
            p_dc,
            p_click_qd: p_qd,
            eta0,
        };
        let est = infer_mu_laser(&obs).unwrap();
        assert!((est.mu_laser - mu).abs() < 1e-9, "mu = {mu}, got {}", est.mu_laser);
    }
}
