//! One-dimensional quadrature over the rate axis.
//!
//! The workhorse is a globally adaptive 21-point Gauss–Kronrod rule that
//! integrates a vector of integrands over the same node set, so that ratios of
//! integrals (posterior means) see correlated errors. A fixed Gauss–Laguerre
//! rule is available for semi-infinite integrals with exponential decay.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Standard QUADPACK tables, kept at their published precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_626_368_760,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights, paired with XGK[1], XGK[3], .., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Absolute and relative error targets for adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        if !(abs > 0.0 && rel > 0.0) || !abs.is_finite() || !rel.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be positive and finite (abs={abs}, rel={rel})"
            )));
        }
        Ok(Tolerance { abs, rel })
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadOutput<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}

impl<const N: usize> Eq for Segment<N> {}

impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn qk21<const N: usize, F>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mut resabs = [0.0; N];
    let mut fv1 = [[0.0; N]; 10];
    let mut fv2 = [[0.0; N]; 10];

    for i in 0..N {
        kronrod[i] = WGK[10] * fc[i];
        resabs[i] = WGK[10] * fc[i].abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        fv1[j] = lo;
        fv2[j] = hi;
        for i in 0..N {
            kronrod[i] += WGK[j] * (lo[i] + hi[i]);
            resabs[i] += WGK[j] * (lo[i].abs() + hi[i].abs());
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * (lo[i] + hi[i]);
            }
        }
    }

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        let mean = 0.5 * kronrod[i];
        let mut resasc = WGK[10] * (fc[i] - mean).abs();
        for j in 0..10 {
            resasc += WGK[j] * ((fv1[j][i] - mean).abs() + (fv2[j][i] - mean).abs());
        }
        let resasc = resasc * half.abs();
        let resabs = resabs[i] * half.abs();
        let mut err = ((kronrod[i] - gauss[i]) * half).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs);
        }
        value[i] = kronrod[i] * half;
        error[i] = err;
    }
    (value, error)
}

/// Integrates a vector-valued function over `[a, b]` by adaptive bisection of
/// the segment with the largest scaled error.
///
/// Every component must meet `tol`; the shared node set keeps the components
/// consistent with each other.
pub fn adaptive_gk21<const N: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_intervals: usize,
) -> Result<QuadOutput<N>>
where
    F: Fn(f64) -> [f64; N],
{
    adaptive_gk21_points(f, &[a, b], tol, max_intervals)
}

/// Like [`adaptive_gk21`], but starts from the segments between consecutive
/// `points` (ascending). Breakpoints near narrow features keep the first rule
/// evaluations from stepping over them.
pub fn adaptive_gk21_points<const N: usize, F>(
    f: &F,
    points: &[f64],
    tol: Tolerance,
    max_intervals: usize,
) -> Result<QuadOutput<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain(format!(
            "integration needs at least two finite breakpoints, got {points:?}"
        )));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("breakpoints must be ascending".into()));
    }

    let priority = |value: &[f64; N], error: &[f64; N]| -> f64 {
        (0..N)
            .map(|i| error[i] / tol.target(value[i]))
            .fold(0.0, f64::max)
    };

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2).filter(|w| w[1] > w[0]) {
        let (value, error) = qk21(f, w[0], w[1]);
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
            priority: priority(&value, &error),
        });
        evaluations += 21;
    }
    if heap.is_empty() {
        return Ok(QuadOutput {
            value: [0.0; N],
            error: [0.0; N],
            evaluations: 0,
            intervals: 0,
        });
    }

    loop {
        let mut total = [0.0; N];
        let mut total_err = [0.0; N];
        for seg in heap.iter() {
            for i in 0..N {
                total[i] += seg.value[i];
                total_err[i] += seg.error[i];
            }
        }
        let converged = (0..N).all(|i| total_err[i] <= tol.target(total[i]));
        if converged {
            return Ok(QuadOutput {
                value: total,
                error: total_err,
                evaluations,
                intervals: heap.len(),
            });
        }
        if heap.len() >= max_intervals {
            let (achieved, requested) = (0..N)
                .map(|i| (total_err[i], tol.target(total[i])))
                .max_by(|x, y| (x.0 / x.1).total_cmp(&(y.0 / y.1)))
                .unwrap_or((0.0, 0.0));
            return Err(Error::Quadrature {
                achieved,
                requested,
            });
        }

        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Segment cannot be split further in floating point; keep it and stop.
            heap.push(Segment {
                priority: 0.0,
                ..worst
            });
            let achieved = total_err.iter().copied().fold(0.0, f64::max);
            let requested = total
                .iter()
                .map(|v| tol.target(*v))
                .fold(f64::INFINITY, f64::min);
            return Err(Error::Quadrature {
                achieved,
                requested,
            });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = qk21(f, lo, hi);
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
                priority: priority(&value, &error),
            });
        }
        evaluations += 42;
    }
}

/// Locates the maximum of a unimodal function on `[lo, hi]` by golden-section search.
///
/// Only interior points are evaluated. Returns the abscissa and function value.
pub fn maximize_unimodal<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a) <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Gauss–Laguerre rule for `∫_0^∞ e^{-x} g(x) dx`.
#[derive(Clone, Debug)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLaguerre {
    pub const MIN_NODES: usize = 16;
    pub const MAX_NODES: usize = 256;

    /// Builds the rule by Newton iteration on the Laguerre recurrence.
    pub fn new(node_count: usize) -> Result<Self> {
        if !(Self::MIN_NODES..=Self::MAX_NODES).contains(&node_count) {
            return Err(Error::InvalidParameter(format!(
                "Gauss-Laguerre node count must be in {}..={}, got {node_count}",
                Self::MIN_NODES,
                Self::MAX_NODES
            )));
        }
        let n = node_count;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n {
            z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => z + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
                }
            };
            let mut pp = 0.0;
            let mut p2 = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = (nf * p1 - nf * p2) / z;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = -1.0 / (pp * nf * p2);
        }
        Ok(GaussLaguerre { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Approximates `∫_0^∞ f(r) dr` with the substitution `r = scale · x`.
    pub fn integrate<const N: usize, F>(&self, f: &F, scale: f64) -> [f64; N]
    where
        F: Fn(f64) -> [f64; N],
    {
        let mut acc = [0.0; N];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            if w == 0.0 || !w.is_finite() {
                continue;
            }
            let v = f(scale * x);
            let factor = w * x.exp() * scale;
            for i in 0..N {
                let term = factor * v[i];
                if term.is_finite() {
                    acc[i] += term;
                }
            }
        }
        acc
    }
}
