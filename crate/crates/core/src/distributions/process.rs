use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Cumulative mass at which infinite sums over outcomes are truncated.
pub const TAIL_CUTOFF: f64 = 1e-12;

/// Rates below this use sequential-search inversion; larger rates use PTRS.
const INVERSION_LIMIT: f64 = 10.0;

/// Conditional distribution of the daily sales count given a rate.
///
/// Both kinds are mean-parameterised: the conditional mean of `s` is `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProcessSpec", into = "ProcessSpec")]
pub enum DemandProcess {
    Poisson,
    /// Poisson with a gamma-distributed rate of mean `r` and shape `blur_shape`;
    /// marginally negative binomial with variance `r + r²/blur_shape`.
    NegativeBinomial {
        blur_shape: f64,
    },
}

// Empty struct variant so that stray keys next to `kind = "poisson"` are rejected.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ProcessSpec {
    Poisson {},
    NegativeBinomial { blur_shape: f64 },
}

impl TryFrom<ProcessSpec> for DemandProcess {
    type Error = Error;

    fn try_from(spec: ProcessSpec) -> Result<Self> {
        let p = match spec {
            ProcessSpec::Poisson {} => DemandProcess::Poisson,
            ProcessSpec::NegativeBinomial { blur_shape } => {
                DemandProcess::NegativeBinomial { blur_shape }
            }
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<DemandProcess> for ProcessSpec {
    fn from(p: DemandProcess) -> Self {
        match p {
            DemandProcess::Poisson => ProcessSpec::Poisson {},
            DemandProcess::NegativeBinomial { blur_shape } => {
                ProcessSpec::NegativeBinomial { blur_shape }
            }
        }
    }
}

impl DemandProcess {
    pub fn negative_binomial(blur_shape: f64) -> Result<Self> {
        let p = DemandProcess::NegativeBinomial { blur_shape };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DemandProcess::Poisson => Ok(()),
            DemandProcess::NegativeBinomial { blur_shape } => {
                if blur_shape.is_finite() && *blur_shape > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "negative-binomial blur shape must be positive, got {blur_shape}"
                    )))
                }
            }
        }
    }

    /// Log pmf, evaluated with log-gamma factorials.
    pub fn ln_pmf(&self, s: u64, r: f64) -> Result<f64> {
        check_rate(r)?;
        if r == 0.0 {
            return Ok(if s == 0 { 0.0 } else { f64::NEG_INFINITY });
        }
        let sf = s as f64;
        Ok(match self {
            DemandProcess::Poisson => sf * r.ln() - r - ln_gamma(sf + 1.0),
            DemandProcess::NegativeBinomial { blur_shape: k } => {
                let mut v = -k * (r / k).ln_1p();
                if s > 0 {
                    v += ln_gamma(sf + k) - ln_gamma(*k) - ln_gamma(sf + 1.0)
                        + sf * (r.ln() - (k + r).ln());
                }
                v
            }
        })
    }

    pub fn pmf(&self, s: u64, r: f64) -> Result<f64> {
        Ok(self.ln_pmf(s, r)?.exp())
    }

    pub fn mean(&self, r: f64) -> Result<f64> {
        check_rate(r)?;
        Ok(r)
    }

    pub fn variance(&self, r: f64) -> Result<f64> {
        check_rate(r)?;
        Ok(match self {
            DemandProcess::Poisson => r,
            DemandProcess::NegativeBinomial { blur_shape } => r + r * r / blur_shape,
        })
    }

    /// Draws one sales count.
    pub fn sample(&self, r: f64, rng: &mut RandomStream) -> Result<u64> {
        check_rate(r)?;
        Ok(match self {
            DemandProcess::Poisson => sample_poisson(r, rng),
            DemandProcess::NegativeBinomial { blur_shape } => {
                if r == 0.0 {
                    return Ok(0);
                }
                let lambda = Gamma::new(*blur_shape, r / blur_shape)
                    .expect("validated blur shape")
                    .sample(rng);
                sample_poisson(lambda, rng)
            }
        })
    }

    /// Smallest `S` such that `P(s ≤ S | r) > 1 − tail`.
    pub fn truncation_point(&self, r: f64, tail: f64) -> Result<u64> {
        let mut cumulative = 0.0;
        let mut s = 0u64;
        loop {
            cumulative += self.pmf(s, r)?;
            if cumulative > 1.0 - tail {
                return Ok(s);
            }
            // Guard against round-off stalling below the threshold far in the tail.
            if s as f64 > r + 50.0 * self.variance(r)?.sqrt() + 50.0 {
                return Ok(s);
            }
            s += 1;
        }
    }
}

fn check_rate(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "rate must be finite and nonnegative, got {r}"
        )))
    }
}

/// Poisson sampler: sequential-search inversion for small rates, Hörmann's
/// transformed rejection with squeeze (PTRS) otherwise.
pub fn sample_poisson(r: f64, rng: &mut RandomStream) -> u64 {
    if r <= 0.0 {
        return 0;
    }
    if r < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-r).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= r / k as f64;
            if p == 0.0 {
                break;
            }
            cdf += p;
        }
        return k;
    }

    let slam = r.sqrt();
    let loglam = r.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v = rng.open01();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + r + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -r + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}
