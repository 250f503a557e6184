//! Exact reference quantities for a (rate prior, sales process) pair.
//!
//! * the marginal outcome distribution `P(s) = ∫ p(r) P(s|r) dr`,
//! * the forward conditional mean `E(s|r) = r`,
//! * the hindsight density `p(r|s) = P(s|r) p(r) / P(s)` and its mean `E(r|s)`.
//!
//! Gamma priors with a Poisson process have closed forms (negative-binomial
//! marginal, conjugate posterior mean `(α+s)/(β+1)`); everything else is
//! integrated numerically. Mixtures are handled component by component, so a
//! mixture of gammas still uses the closed form.
//!
//! Numerical integrals work on `exp(log f(r) − log f(r*))`, where `r*` is the
//! mode of the integrand located beforehand, and split the range at `r*`. The
//! numerator and denominator of `E(r|s)` share one adaptive node set.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{DemandProcess, PriorKind, RatePrior, TAIL_CUTOFF};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gk21_points, maximize_unimodal, GaussLaguerre, Tolerance};

pub const DEFAULT_UPPER_CUTOFF_MASS: f64 = 1e-12;
const MAX_INTERVALS: usize = 20_000;
// Integrand is treated as negligible this many e-folds below its peak.
const NEGLIGIBLE_LOG_RATIO: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadratureScheme {
    AdaptiveInterval { abs_tol: f64, rel_tol: f64 },
    GaussLaguerre { node_count: usize },
}

/// Numerical settings for integrals over the rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    /// Prior tail mass beyond the (pre-doubling) upper integration limit.
    #[serde(default = "default_cutoff")]
    pub upper_cutoff_mass: f64,
}

fn default_cutoff() -> f64 {
    DEFAULT_UPPER_CUTOFF_MASS
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: QuadratureScheme::AdaptiveInterval {
                abs_tol: 1e-30,
                rel_tol: 1e-12,
            },
            upper_cutoff_mass: DEFAULT_UPPER_CUTOFF_MASS,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.upper_cutoff_mass > 0.0 && self.upper_cutoff_mass < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "upper_cutoff_mass must be in (0, 0.5), got {}",
                self.upper_cutoff_mass
            )));
        }
        match self.scheme {
            QuadratureScheme::AdaptiveInterval { abs_tol, rel_tol } => {
                Tolerance::new(abs_tol, rel_tol).map(|_| ())
            }
            QuadratureScheme::GaussLaguerre { node_count } => {
                GaussLaguerre::new(node_count).map(|_| ())
            }
        }
    }

    fn tolerance(&self) -> Tolerance {
        match self.scheme {
            QuadratureScheme::AdaptiveInterval { abs_tol, rel_tol } => Tolerance {
                abs: abs_tol,
                rel: rel_tol,
            },
            QuadratureScheme::GaussLaguerre { .. } => match QuadratureSpec::default().scheme {
                QuadratureScheme::AdaptiveInterval { abs_tol, rel_tol } => Tolerance {
                    abs: abs_tol,
                    rel: rel_tol,
                },
                QuadratureScheme::GaussLaguerre { .. } => unreachable!(),
            },
        }
    }
}

/// Prior/process pairs with an analytic route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosedForm {
    /// Gamma(shape, rate) prior with Poisson sales.
    GammaPoisson { shape: f64, rate: f64 },
}

/// Dispatch table for analytic routes. Mixtures are resolved per component.
pub fn closed_form(prior: &RatePrior, process: &DemandProcess) -> Option<ClosedForm> {
    match (prior.kind(), process) {
        (PriorKind::Gamma { shape, rate }, DemandProcess::Poisson) => {
            Some(ClosedForm::GammaPoisson {
                shape: *shape,
                rate: *rate,
            })
        }
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    Dispatch,
    Quadrature,
}

/// `ln ∫ P(s|r) p(r) dr` and `ln ∫ r P(s|r) p(r) dr`.
#[derive(Clone, Copy, Debug)]
struct LogMoments {
    den: f64,
    num: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Prior, process and numerical settings; the analytic reference.
#[derive(Clone, Debug)]
pub struct OracleContext {
    prior: RatePrior,
    process: DemandProcess,
    quadrature: QuadratureSpec,
    laguerre: Option<GaussLaguerre>,
}

impl OracleContext {
    pub fn new(
        prior: RatePrior,
        process: DemandProcess,
        quadrature: QuadratureSpec,
    ) -> Result<Self> {
        process.validate()?;
        quadrature.validate()?;
        let laguerre = match quadrature.scheme {
            QuadratureScheme::GaussLaguerre { node_count } => Some(GaussLaguerre::new(node_count)?),
            QuadratureScheme::AdaptiveInterval { .. } => None,
        };
        Ok(OracleContext {
            prior,
            process,
            quadrature,
            laguerre,
        })
    }

    /// Default adaptive quadrature.
    pub fn with_defaults(prior: RatePrior, process: DemandProcess) -> Result<Self> {
        Self::new(prior, process, QuadratureSpec::default())
    }

    pub fn prior(&self) -> &RatePrior {
        &self.prior
    }

    pub fn process(&self) -> &DemandProcess {
        &self.process
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quadrature
    }

    /// Marginal probability of observing `s`.
    pub fn target_pmf(&self, s: u64) -> Result<f64> {
        Ok(self.log_moments(&self.prior, s, Route::Dispatch)?.den.exp())
    }

    pub fn ln_target_pmf(&self, s: u64) -> Result<f64> {
        Ok(self.log_moments(&self.prior, s, Route::Dispatch)?.den)
    }

    /// [`target_pmf`](Self::target_pmf) forced through numerical integration.
    pub fn target_pmf_by_quadrature(&self, s: u64) -> Result<f64> {
        Ok(self
            .log_moments(&self.prior, s, Route::Quadrature)?
            .den
            .exp())
    }

    /// `E(s | r)`; both supported processes are mean-parameterised, so this is `r`.
    pub fn forward_mean(&self, r: f64) -> Result<f64> {
        self.process.mean(r)
    }

    /// `E(s | r)` recomputed as a truncated series `Σ s·P(s|r)`.
    pub fn forward_mean_by_series(&self, r: f64) -> Result<f64> {
        let s_max = self.process.truncation_point(r, TAIL_CUTOFF)?;
        let mut acc = crate::summation::CompensatedSum::new();
        for s in 1..=s_max {
            acc.add(s as f64 * self.process.pmf(s, r)?);
        }
        Ok(acc.value())
    }

    /// Posterior density of the rate after observing `s`.
    pub fn hindsight_density(&self, r: f64, s: u64) -> Result<f64> {
        let ln_target = self.ln_target_pmf(s)?;
        if ln_target == f64::NEG_INFINITY {
            return Err(Error::ZeroMass(s));
        }
        if r.is_nan() || r < 0.0 {
            return Ok(0.0);
        }
        let ln_prior = self.prior.ln_density(r);
        if ln_prior == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok((self.process.ln_pmf(s, r)? + ln_prior - ln_target).exp())
    }

    /// `E(r | s)`: the average forecast among items that realised `s`.
    pub fn hindsight_mean(&self, s: u64) -> Result<f64> {
        self.ratio(s, Route::Dispatch)
    }

    /// [`hindsight_mean`](Self::hindsight_mean) forced through numerical integration.
    pub fn hindsight_mean_by_quadrature(&self, s: u64) -> Result<f64> {
        self.ratio(s, Route::Quadrature)
    }

    /// `(s, E(r|s))` for `s = 0..=s_max`, skipping outcomes with zero mass.
    pub fn hindsight_curve(&self, s_max: u64) -> Result<Vec<(u64, f64)>> {
        let mut curve = Vec::new();
        for s in 0..=s_max {
            match self.hindsight_mean(s) {
                Ok(m) => curve.push((s, m)),
                Err(Error::ZeroMass(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(curve)
    }

    /// Smallest `S` with `Σ_{s ≤ S} P(s) > 1 − tail`, capped at `cap`.
    pub fn target_truncation_point(&self, tail: f64, cap: u64) -> Result<u64> {
        let mut cumulative = 0.0;
        for s in 0..=cap {
            cumulative += self.target_pmf(s)?;
            if cumulative > 1.0 - tail {
                return Ok(s);
            }
        }
        Ok(cap)
    }

    fn ratio(&self, s: u64, route: Route) -> Result<f64> {
        let m = self.log_moments(&self.prior, s, route)?;
        if m.den == f64::NEG_INFINITY {
            return Err(Error::ZeroMass(s));
        }
        Ok((m.num - m.den).exp())
    }

    fn log_moments(&self, prior: &RatePrior, s: u64, route: Route) -> Result<LogMoments> {
        if let PriorKind::Mixture { components } = prior.kind() {
            let mut acc = LogMoments {
                den: f64::NEG_INFINITY,
                num: f64::NEG_INFINITY,
            };
            for c in components.iter().filter(|c| c.weight > 0.0) {
                let m = self.log_moments(&c.prior, s, route)?;
                let lw = c.weight.ln();
                acc.den = log_add_exp(acc.den, lw + m.den);
                acc.num = log_add_exp(acc.num, lw + m.num);
            }
            return Ok(acc);
        }
        if route == Route::Dispatch {
            if let Some(form) = closed_form(prior, &self.process) {
                return Ok(closed_log_moments(form, s));
            }
        }
        self.quadrature_log_moments(prior, s)
    }

    fn quadrature_log_moments(&self, prior: &RatePrior, s: u64) -> Result<LogMoments> {
        let process = self.process;
        let log_f = |r: f64| -> f64 {
            let lp = prior.ln_density(r);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            process.ln_pmf(s, r).unwrap_or(f64::NEG_INFINITY) + lp
        };

        let (lo, hi) = prior.support();
        let mut upper = if hi.is_finite() {
            hi
        } else {
            2.0 * prior.upper_quantile(self.quadrature.upper_cutoff_mass)
        };
        let (mut mode, mut peak) = maximize_unimodal(log_f, lo, upper);
        if hi.is_infinite() {
            // The posterior can sit far beyond the prior's bulk for large s.
            let mut doublings = 0;
            while log_f(upper) > peak - NEGLIGIBLE_LOG_RATIO && doublings < 64 {
                upper *= 2.0;
                doublings += 1;
                (mode, peak) = maximize_unimodal(log_f, lo, upper);
            }
        }
        if !peak.is_finite() {
            if peak == f64::NEG_INFINITY {
                return Ok(LogMoments {
                    den: f64::NEG_INFINITY,
                    num: f64::NEG_INFINITY,
                });
            }
            return Err(Error::Domain(format!(
                "integrand for s={s} is unbounded at r={mode}"
            )));
        }

        let scaled = |r: f64| -> [f64; 2] {
            let v = (log_f(r) - peak).exp();
            [v, r * v]
        };

        let [den, num] = match &self.laguerre {
            Some(rule) if hi.is_infinite() && lo == 0.0 => {
                let scale = laguerre_scale(&log_f, mode, upper);
                rule.integrate(&scaled, scale)
            }
            _ => {
                let points = peak_breakpoints(&log_f, lo, mode, upper, peak);
                adaptive_gk21_points(&scaled, &points, self.quadrature.tolerance(), MAX_INTERVALS)?
                    .value
            }
        };
        Ok(LogMoments {
            den: den.ln() + peak,
            num: num.ln() + peak,
        })
    }
}

/// Point between `mode` and `bound` where `log_f` has fallen `drop` below `peak`.
fn drop_point<F: Fn(f64) -> f64>(log_f: &F, mode: f64, bound: f64, peak: f64, drop: f64) -> f64 {
    if log_f(bound) >= peak - drop {
        return bound;
    }
    let (mut near, mut far) = (mode, bound);
    for _ in 0..100 {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        if log_f(mid) >= peak - drop {
            near = mid;
        } else {
            far = mid;
        }
    }
    far
}

/// Breakpoints on `[lo, upper]`: the mode, then geometrically growing offsets
/// from it in units of the peak's half-width on each side.
fn peak_breakpoints<F: Fn(f64) -> f64>(
    log_f: &F,
    lo: f64,
    mode: f64,
    upper: f64,
    peak: f64,
) -> Vec<f64> {
    let mut points = vec![lo, mode, upper];
    let right = drop_point(log_f, mode, upper, peak, 1.0) - mode;
    if right > 0.0 {
        let mut step = right;
        while mode + step < upper {
            points.push(mode + step);
            step *= 2.0;
        }
    }
    let left = mode - drop_point(log_f, mode, lo, peak, 1.0);
    if left > 0.0 {
        let mut step = left;
        while mode - step > lo {
            points.push(mode - step);
            step *= 2.0;
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// Scale `c` for `r = c·x` so that the integrand decays roughly like `e^{-x}`.
fn laguerre_scale<F: Fn(f64) -> f64>(log_f: &F, mode: f64, upper: f64) -> f64 {
    let r1 = mode + 0.25 * (upper - mode);
    let r2 = mode + 0.5 * (upper - mode);
    let slope = (log_f(r1) - log_f(r2)) / (r2 - r1);
    if slope.is_finite() && slope > 0.0 {
        1.0 / slope
    } else {
        (upper / 40.0).max(f64::MIN_POSITIVE)
    }
}

fn closed_log_moments(form: ClosedForm, s: u64) -> LogMoments {
    match form {
        ClosedForm::GammaPoisson { shape, rate } => {
            let sf = s as f64;
            let den = ln_gamma(sf + shape) - ln_gamma(shape) - ln_gamma(sf + 1.0)
                + shape * (rate / (rate + 1.0)).ln()
                - sf * (rate + 1.0).ln();
            LogMoments {
                den,
                num: den + ((shape + sf) / (rate + 1.0)).ln(),
            }
        }
    }
}
