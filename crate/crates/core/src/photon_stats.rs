//! Photon-number distributions for quantum-dot, laser and hybrid emitters.
//!
//! Every source in this crate is described by its diagonal photon-number
//! statistics `p_k`. The quantum-dot source is a three-component Fock mixture
//! fixed by its collected brightness and `g2(0)`, the laser is Poissonian, and
//! the hybrid emitter is the discrete convolution of the two (both are mixed
//! incoherently, so photon numbers simply add).

use crate::error::{check_nonnegative, check_probability, Error, Result};

/// Largest deviation of the raw probability sum from one accepted by
/// [`PhotonNumberDistribution::new`] before renormalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Mass a truncated Poisson tail may shed.
pub const POISSON_TAIL_MASS: f64 = 1e-9;

/// Smallest cutoff chosen by automatic Poisson truncation.
pub const MIN_POISSON_CUTOFF: usize = 20;

/// Tail mass targeted by automatic truncation. Tighter than
/// [`POISSON_TAIL_MASS`] so that first moments also survive truncation.
const AUTO_TAIL_MASS: f64 = 1e-16;

/// Below this `g2` the two-photon root is replaced by its limit `p2 = 0`.
pub const G2_LIMIT: f64 = 1e-12;

/// Cutoff above which binomial coefficients go through log-factorials.
const DIRECT_BINOMIAL_MAX: usize = 50;

/// Diagonal photon-number statistics `p_0 ..= p_kmax`.
///
/// Construction validates nonnegativity, renormalizes the entries to sum to
/// one and pads the support to at least `k = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
}

impl PhotonNumberDistribution {
    /// Builds a distribution from raw probabilities.
    ///
    /// The entries must be finite and nonnegative and sum to one within
    /// [`NORMALIZATION_TOLERANCE`]; they are renormalized exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, NORMALIZATION_TOLERANCE)
    }

    fn with_tolerance(mut probs: Vec<f64>, tolerance: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no components".into()));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!("p_{k} = {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        if probs.len() < 3 {
            probs.resize(3, 0.0);
        }
        Ok(Self { probs })
    }

    /// The vacuum state `|0><0|` on the support `0..=2`.
    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    /// A pure Fock state `|n><n|`.
    pub fn fock(n: usize) -> Self {
        let mut probs = vec![0.0; (n + 1).max(3)];
        probs[n] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest photon number carried by the support.
    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability of exactly `k` photons (zero beyond the support).
    pub fn p(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Convex combination `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Result<Self> {
        check_probability("mixing weight", weight)?;
        let len = self.probs.len().max(other.probs.len());
        let probs = (0..len)
            .map(|k| weight * self.p(k) + (1.0 - weight) * other.p(k))
            .collect();
        Self::new(probs)
    }

    /// Zero-pads the support up to `k_max`.
    pub fn padded(&self, k_max: usize) -> Self {
        let mut probs = self.probs.clone();
        if probs.len() < k_max + 1 {
            probs.resize(k_max + 1, 0.0);
        }
        Self { probs }
    }
}

/// Parameters of the quantum-dot emitter as seen at Alice's output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdSourceParams {
    /// Collected brightness: probability of at least one photon per pulse.
    pub brightness: f64,
    /// Second-order correlation at zero delay.
    pub g2: f64,
}

impl QdSourceParams {
    pub fn new(brightness: f64, g2: f64) -> Result<Self> {
        let params = Self { brightness, g2 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("brightness", self.brightness)?;
        if !(0.0..0.5).contains(&self.g2) {
            return Err(Error::OutOfRange {
                name: "g2",
                value: self.g2,
                expected: "a single-photon g2 in [0, 0.5)",
            });
        }
        if 2.0 * self.g2 * self.brightness > 1.0 {
            return Err(Error::ComplexTwoPhotonRoot {
                brightness: self.brightness,
                g2: self.g2,
            });
        }
        Ok(())
    }
}

/// Poisson statistics of mean `mu`, truncated at `k_max` and renormalized.
///
/// `k_max = 0` selects the cutoff automatically: the smallest `k` whose tail
/// is negligible at double precision, and never below
/// [`MIN_POISSON_CUTOFF`]. An explicit cutoff must leave at most
/// [`POISSON_TAIL_MASS`] in the discarded tail.
pub fn poisson_distribution(mu: f64, k_max: usize) -> Result<PhotonNumberDistribution> {
    check_nonnegative("mean photon number", mu)?;
    let auto = k_max == 0;
    let horizon = if auto {
        poisson_horizon(mu)
    } else {
        k_max.max(poisson_horizon(mu))
    };

    let terms = poisson_terms(mu, horizon);
    // tails[k] = mass strictly above k
    let mut tails = vec![0.0; terms.len()];
    for k in (0..terms.len() - 1).rev() {
        tails[k] = tails[k + 1] + terms[k + 1];
    }

    let cutoff = if auto {
        (MIN_POISSON_CUTOFF..terms.len())
            .find(|&k| tails[k] <= AUTO_TAIL_MASS)
            .unwrap_or(terms.len() - 1)
    } else {
        if k_max < 2 {
            return Err(Error::InvalidDistribution(format!(
                "cutoff k_max = {k_max} is below 2"
            )));
        }
        if tails[k_max] > POISSON_TAIL_MASS {
            return Err(Error::InvalidDistribution(format!(
                "cutoff k_max = {k_max} sheds {:e} of Poisson({mu}) mass",
                tails[k_max]
            )));
        }
        k_max
    };

    PhotonNumberDistribution::with_tolerance(terms[..=cutoff].to_vec(), POISSON_TAIL_MASS)
}

/// A photon number far enough into the tail that everything past it
/// underflows relative to `AUTO_TAIL_MASS`.
fn poisson_horizon(mu: f64) -> usize {
    let spread = 12.0 * mu.sqrt() + 40.0;
    (mu + spread).ceil() as usize
}

fn poisson_terms(mu: f64, k_max: usize) -> Vec<f64> {
    if mu == 0.0 {
        let mut terms = vec![0.0; k_max + 1];
        terms[0] = 1.0;
        return terms;
    }
    let ln_mu = mu.ln();
    let mut ln_fact = 0.0;
    (0..=k_max)
        .map(|k| {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            (-mu + k as f64 * ln_mu - ln_fact).exp()
        })
        .collect()
}

/// The truncated quantum-dot statistics `[p0, p1, p2]`.
///
/// `p2` is the physical root of `(B + p2)^2 g2 = 2 p2`; `p1 = B - p2`.
pub fn qd_distribution(params: &QdSourceParams) -> Result<PhotonNumberDistribution> {
    params.validate()?;
    let b = params.brightness;
    let p2 = two_photon_probability(b, params.g2);
    let p1 = b - p2;
    Ok(PhotonNumberDistribution {
        probs: vec![1.0 - b, p1, p2],
    })
}

/// Two-photon component of the truncated quantum-dot statistics.
///
/// Evaluates `(1 - g2 B - sqrt(1 - 2 g2 B)) / g2` in its rationalized form
/// `g2 B^2 / (1 - g2 B + sqrt(1 - 2 g2 B))`, which is the same root without
/// the cancellation at small `g2 B`.
fn two_photon_probability(brightness: f64, g2: f64) -> f64 {
    if g2 < G2_LIMIT {
        return 0.0;
    }
    let x = g2 * brightness;
    g2 * brightness * brightness / (1.0 - x + (1.0 - 2.0 * x).sqrt())
}

/// Statistics of a quantum dot mixed incoherently with laser light of mean
/// `mu_laser`, truncated at `k_max` (`0` = automatic).
///
/// `qd` must be supported on exactly `0..=2`.
pub fn hybrid_distribution(
    qd: &PhotonNumberDistribution,
    mu_laser: f64,
    k_max: usize,
) -> Result<PhotonNumberDistribution> {
    if qd.k_max() != 2 {
        return Err(Error::InvalidDistribution(format!(
            "quantum-dot statistics must stop at k = 2, got k_max = {}",
            qd.k_max()
        )));
    }
    check_nonnegative("laser mean photon number", mu_laser)?;
    let laser = poisson_distribution(mu_laser, 0)?;
    let cutoff = if k_max == 0 { laser.k_max() + 2 } else { k_max };
    if cutoff < 2 {
        return Err(Error::InvalidDistribution(format!(
            "cutoff k_max = {cutoff} is below 2"
        )));
    }

    let probs: Vec<f64> = (0..=cutoff)
        .map(|n| {
            (0..=n.min(2))
                .map(|j| qd.p(j) * laser.p(n - j))
                .sum::<f64>()
        })
        .collect();
    let kept: f64 = probs.iter().sum();
    if 1.0 - kept > POISSON_TAIL_MASS {
        return Err(Error::InvalidDistribution(format!(
            "cutoff k_max = {cutoff} sheds {:e} of the hybrid mass",
            1.0 - kept
        )));
    }
    PhotonNumberDistribution::with_tolerance(probs, POISSON_TAIL_MASS)
}

/// Closed-form `n`-photon probability of the hybrid emitter,
/// `e^-mu (p0 mu^n/n! + p1 mu^(n-1)/(n-1)! + p2 mu^(n-2)/(n-2)!)`.
pub fn hybrid_component(qd: [f64; 3], mu_laser: f64, n: usize) -> f64 {
    let poisson = |m: usize| -> f64 {
        let mut term = 1.0;
        for i in 1..=m {
            term *= mu_laser / i as f64;
        }
        term
    };
    let [p0, p1, p2] = qd;
    let mut sum = p0 * poisson(n);
    if n >= 1 {
        sum += p1 * poisson(n - 1);
    }
    if n >= 2 {
        sum += p2 * poisson(n - 2);
    }
    (-mu_laser).exp() * sum
}

/// `sum_k k p_k`.
pub fn mean_photon_number(dist: &PhotonNumberDistribution) -> f64 {
    dist.probs
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum()
}

/// `g2(0) = sum_k k (k-1) p_k / mu^2`.
pub fn g2_of(dist: &PhotonNumberDistribution) -> Result<f64> {
    let mu = mean_photon_number(dist);
    if mu <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let second: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(k, p)| (k * k.saturating_sub(1)) as f64 * p)
        .sum();
    Ok(second / (mu * mu))
}

/// Binomial thinning: each photon independently survives with probability
/// `eta`.
pub fn apply_loss(dist: &PhotonNumberDistribution, eta: f64) -> Result<PhotonNumberDistribution> {
    check_probability("transmissivity", eta)?;
    let k_max = dist.k_max();
    if eta == 1.0 {
        return Ok(dist.clone());
    }
    if eta == 0.0 {
        return Ok(PhotonNumberDistribution::vacuum().padded(k_max));
    }

    let binomial = BinomialTable::new(k_max);
    let mut out = vec![0.0; k_max + 1];
    for (k, &pk) in dist.probs.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        for (j, slot) in out.iter_mut().enumerate().take(k + 1) {
            *slot += pk * binomial.pmf(k, j, eta);
        }
    }
    PhotonNumberDistribution::new(out)
}

struct BinomialTable {
    ln_fact: Option<Vec<f64>>,
}

impl BinomialTable {
    fn new(k_max: usize) -> Self {
        let ln_fact = (k_max > DIRECT_BINOMIAL_MAX).then(|| {
            let mut table = Vec::with_capacity(k_max + 1);
            let mut acc = 0.0;
            table.push(0.0);
            for i in 1..=k_max {
                acc += (i as f64).ln();
                table.push(acc);
            }
            table
        });
        Self { ln_fact }
    }

    /// `C(n, j) eta^j (1 - eta)^(n - j)` for `0 < eta < 1`.
    fn pmf(&self, n: usize, j: usize, eta: f64) -> f64 {
        match &self.ln_fact {
            Some(ln_fact) => (ln_fact[n] - ln_fact[j] - ln_fact[n - j]
                + j as f64 * eta.ln()
                + (n - j) as f64 * (1.0 - eta).ln())
            .exp(),
            None => {
                let j_small = j.min(n - j);
                let mut coeff = 1.0;
                for i in 0..j_small {
                    coeff = coeff * (n - i) as f64 / (i + 1) as f64;
                }
                coeff * eta.powi(j as i32) * (1.0 - eta).powi((n - j) as i32)
            }
        }
    }
}

/// Click probability `p1 + p2` of a quantum dot of brightness `b0` after a
/// channel of transmissivity `eta`.
///
/// Loss does not simply rescale the brightness: the surviving two-photon
/// component adds `eta (1 - eta) p2` on top of `eta b0`.
pub fn brightness_after_loss(b0: f64, g2: f64, eta: f64) -> Result<f64> {
    QdSourceParams::new(b0, g2)?;
    check_probability("transmissivity", eta)?;
    if eta == 1.0 {
        return Ok(b0);
    }
    let p2 = two_photon_probability(b0, g2);
    Ok(eta * b0 + eta * (1.0 - eta) * p2)
}
