use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Tolerance on the sum of mixture weights.
pub const MIXTURE_WEIGHT_TOLERANCE: f64 = 1e-12;

/// One weighted component of a mixture prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub prior: RatePrior,
}

/// Parameterisation of a rate prior. All rates are per day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorKind {
    /// Gamma with shape α and rate β (mean α/β).
    Gamma { shape: f64, rate: f64 },
    /// Log-normal: ln r ~ N(mu, sigma²).
    #[serde(rename = "lognormal")]
    LogNormal { mu: f64, sigma: f64 },
    /// Uniform on [lo, hi].
    Uniform { lo: f64, hi: f64 },
    /// Finite mixture; weights sum to one.
    Mixture { components: Vec<MixtureComponent> },
}

/// A validated continuous distribution over nonnegative selling rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorKind", into = "PriorKind")]
pub struct RatePrior {
    kind: PriorKind,
}

impl TryFrom<PriorKind> for RatePrior {
    type Error = Error;

    fn try_from(kind: PriorKind) -> Result<Self> {
        match &kind {
            PriorKind::Gamma { shape, rate } => {
                if !(shape.is_finite() && *shape > 0.0 && rate.is_finite() && *rate > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma prior needs shape > 0 and rate > 0, got shape={shape}, rate={rate}"
                    )));
                }
            }
            PriorKind::LogNormal { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "lognormal prior needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                    )));
                }
            }
            PriorKind::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform prior needs 0 <= lo < hi, got lo={lo}, hi={hi}"
                    )));
                }
            }
            PriorKind::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter(
                        "mixture prior needs at least one component".into(),
                    ));
                }
                if components
                    .iter()
                    .any(|c| !(c.weight.is_finite() && c.weight >= 0.0))
                {
                    return Err(Error::InvalidParameter(
                        "mixture weights must be nonnegative".into(),
                    ));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > MIXTURE_WEIGHT_TOLERANCE {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
            }
        }
        Ok(RatePrior { kind })
    }
}

impl From<RatePrior> for PriorKind {
    fn from(prior: RatePrior) -> Self {
        prior.kind
    }
}

impl RatePrior {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        PriorKind::Gamma { shape, rate }.try_into()
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        PriorKind::LogNormal { mu, sigma }.try_into()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        PriorKind::Uniform { lo, hi }.try_into()
    }

    pub fn mixture<I>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, RatePrior)>,
    {
        PriorKind::Mixture {
            components: components
                .into_iter()
                .map(|(weight, prior)| MixtureComponent { weight, prior })
                .collect(),
        }
        .try_into()
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_density(&self, r: f64) -> f64 {
        if r.is_nan() || r < 0.0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            PriorKind::Gamma { shape, rate } => {
                if r == 0.0 {
                    return if *shape == 1.0 {
                        rate.ln()
                    } else if *shape < 1.0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                if r.is_infinite() {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * r.ln() - rate * r
            }
            PriorKind::LogNormal { mu, sigma } => {
                if r == 0.0 || r.is_infinite() {
                    return f64::NEG_INFINITY;
                }
                let z = (r.ln() - mu) / sigma;
                -0.5 * z * z - r.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            PriorKind::Uniform { lo, hi } => {
                if r >= *lo && r <= *hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorKind::Mixture { components } => {
                let d: f64 = components
                    .iter()
                    .map(|c| c.weight * c.prior.density(r))
                    .sum();
                d.ln()
            }
        }
    }

    /// Density at `r`; zero for negative rates.
    pub fn density(&self, r: f64) -> f64 {
        match &self.kind {
            PriorKind::Mixture { components } => {
                if r.is_nan() || r < 0.0 {
                    return 0.0;
                }
                components
                    .iter()
                    .map(|c| c.weight * c.prior.density(r))
                    .sum()
            }
            _ => self.ln_density(r).exp(),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            PriorKind::Gamma { shape, rate } => shape / rate,
            PriorKind::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            PriorKind::Uniform { lo, hi } => 0.5 * (lo + hi),
            PriorKind::Mixture { components } => {
                components.iter().map(|c| c.weight * c.prior.mean()).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            PriorKind::Gamma { shape, rate } => shape / (rate * rate),
            PriorKind::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
            PriorKind::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            PriorKind::Mixture { components } => {
                let mean = self.mean();
                components
                    .iter()
                    .map(|c| {
                        let m = c.prior.mean();
                        c.weight * (c.prior.variance() + m * m)
                    })
                    .sum::<f64>()
                    - mean * mean
            }
        }
    }

    /// Closed support interval `[lo, hi]`; `hi` is infinite for unbounded families.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            PriorKind::Gamma { .. } | PriorKind::LogNormal { .. } => (0.0, f64::INFINITY),
            PriorKind::Uniform { lo, hi } => (*lo, *hi),
            PriorKind::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.prior.support())
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
        }
    }

    /// Smallest rate `R` (approximately) with `P(r > R) < tail_mass`.
    pub fn upper_quantile(&self, tail_mass: f64) -> f64 {
        match &self.kind {
            PriorKind::Gamma { shape, rate } => {
                let tail = |r: f64| gamma_ur(*shape, rate * r);
                let mut hi = (shape / rate).max(1.0 / rate);
                while tail(hi) >= tail_mass {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if tail(mid) >= tail_mass {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * hi {
                        break;
                    }
                }
                hi
            }
            PriorKind::LogNormal { mu, sigma } => {
                let z = std::f64::consts::SQRT_2 * erfc_inv(2.0 * tail_mass);
                (mu + sigma * z).exp()
            }
            PriorKind::Uniform { hi, .. } => *hi,
            PriorKind::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.prior.upper_quantile(tail_mass))
                .fold(0.0, f64::max),
        }
    }

    /// Draws one rate.
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match &self.kind {
            PriorKind::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            PriorKind::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma)
                .expect("validated lognormal parameters")
                .sample(rng),
            PriorKind::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                (lo + (hi - lo) * u).clamp(*lo, *hi)
            }
            PriorKind::Mixture { components } => {
                let u: f64 = rng.random();
                let mut cumulative = 0.0;
                let last = components
                    .iter()
                    .rposition(|c| c.weight > 0.0)
                    .expect("mixture has positive weight");
                for (i, c) in components.iter().enumerate() {
                    cumulative += c.weight;
                    if u < cumulative || i == last {
                        return c.prior.sample(rng);
                    }
                }
                unreachable!("categorical draw always selects a component")
            }
        }
    }
}
