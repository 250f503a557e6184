//! Acceptance run: one line per criterion, nonzero exit if any criterion fails.
//!
//! Seeds are fixed up front: 0..100 for the repeated n = 10^4 runs and 1 for
//! the single n = 10^5 runs.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hindsight::evaluation::{backward_groups, backward_tail_gap, OutcomeGroupReport};
use hindsight::experiment::{evaluate_pairs, experiment_pairs, ExperimentConfig, ExperimentReport};
use hindsight::market::{DistortionStrategy, ForecastOutcomePair};
use hindsight::oracle::{OracleContext, QuadratureSpec};
use hindsight::{DemandProcess, RatePrior};

const ALPHA: f64 = 1.0;
const BETA: f64 = 0.5;
const REPEAT_SEEDS: std::ops::Range<u64> = 0..100;
const LARGE_SEED: u64 = 1;

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass,
        detail,
    }
}

/// Exact-to-rounding running sum (TwoSum cascade), independent of the library.
#[derive(Default)]
struct RefSum {
    hi: f64,
    lo: f64,
}

impl RefSum {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

fn reference_means(pairs: &[ForecastOutcomePair]) -> (f64, f64) {
    let mut r = RefSum::default();
    let mut s: u128 = 0;
    for p in pairs {
        r.add(p.prediction);
        s += p.outcome as u128;
    }
    let n = pairs.len() as f64;
    (r.value() / n, s as f64 / n)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn prior() -> RatePrior {
    RatePrior::gamma(ALPHA, BETA).unwrap()
}

fn config(n: usize, seed: u64, distortion: DistortionStrategy) -> ExperimentConfig {
    let mut c = ExperimentConfig::simulate(prior(), DemandProcess::Poisson, n, seed);
    c.distortion = distortion;
    c.oracle = true;
    c
}

struct Run {
    pairs: Vec<ForecastOutcomePair>,
    report: ExperimentReport,
}

fn run(n: usize, seed: u64, distortion: DistortionStrategy) -> Run {
    let c = config(n, seed, distortion);
    let pairs = experiment_pairs(&c).unwrap();
    let report = evaluate_pairs(&c, &pairs).unwrap();
    Run { pairs, report }
}

/// Largest relative deviation of the bucket- and group-weighted means from
/// the directly computed global means.
fn partition_error(run: &Run) -> f64 {
    let (r_bar, s_bar) = reference_means(&run.pairs);
    let n = run.pairs.len() as f64;
    let mut r_fwd = RefSum::default();
    let mut s_fwd = RefSum::default();
    let mut count_fwd = 0u64;
    for b in &run.report.forward_buckets {
        count_fwd += b.count;
        if let (Some(mp), Some(mo)) = (b.mean_prediction, b.mean_outcome) {
            r_fwd.add(mp * b.count as f64);
            s_fwd.add(mo * b.count as f64);
        }
    }
    let mut r_bwd = RefSum::default();
    let mut s_bwd = RefSum::default();
    let mut count_bwd = 0u64;
    for g in &run.report.backward_groups {
        count_bwd += g.count;
        r_bwd.add(g.mean_prediction * g.count as f64);
        s_bwd.add(g.outcome as f64 * g.count as f64);
    }
    if count_fwd != run.pairs.len() as u64 || count_bwd != run.pairs.len() as u64 {
        return f64::INFINITY;
    }
    [
        rel(r_fwd.value() / n, r_bar),
        rel(s_fwd.value() / n, s_bar),
        rel(r_bwd.value() / n, r_bar),
        rel(s_bwd.value() / n, s_bar),
        rel(run.report.global.mean_prediction, r_bar),
        rel(run.report.global.mean_outcome, s_bar),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut points = 0;
    for &(a, b) in &[(1.0, 1.0), (2.0, 1.0), (1.0, 0.5), (5.0, 2.0)] {
        let ctx = OracleContext::new(
            RatePrior::gamma(a, b).unwrap(),
            DemandProcess::Poisson,
            QuadratureSpec::default(),
        )
        .unwrap();
        for s in 0..=50u64 {
            let quad = ctx.hindsight_mean_by_quadrature(s).unwrap();
            worst = worst.max(rel(quad, (a + s as f64) / (b + 1.0)));
            points += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        "1",
        "conjugacy oracle",
        worst < 1e-8 && secs < 10.0,
        format!("max rel err {worst:.2e} over {points} points (< 1e-8), {secs:.2} s (< 10 s)"),
    )
}

fn criterion_2() -> Outcome {
    let priors = [
        RatePrior::gamma(1.0, 0.5).unwrap(),
        RatePrior::lognormal(0.5, 0.8).unwrap(),
        RatePrior::uniform(0.0, 2.0).unwrap(),
        RatePrior::mixture([
            (0.6, RatePrior::gamma(3.0, 1.0).unwrap()),
            (0.4, RatePrior::lognormal(0.0, 0.5).unwrap()),
        ])
        .unwrap(),
    ];
    let processes = [
        DemandProcess::Poisson,
        DemandProcess::negative_binomial(2.0).unwrap(),
    ];
    let mut norm = 0.0f64;
    for p in &priors {
        for &proc_ in &processes {
            let ctx = OracleContext::new(p.clone(), proc_, QuadratureSpec::default()).unwrap();
            let cut = ctx.target_truncation_point(1e-12, 1_000_000).unwrap();
            let mut total = RefSum::default();
            for s in 0..=cut {
                total.add(ctx.target_pmf(s).unwrap());
            }
            norm = norm.max((total.value() - 1.0).abs());
        }
    }

    let mut blur = 0.0f64;
    for &kappa in &[0.5, 1.0, 2.0, 5.0] {
        for &rho in &[0.3, 2.0, 8.0] {
            let nb = DemandProcess::negative_binomial(kappa).unwrap();
            let ctx = OracleContext::new(
                RatePrior::gamma(kappa, kappa / rho).unwrap(),
                DemandProcess::Poisson,
                QuadratureSpec::default(),
            )
            .unwrap();
            for s in 0..=30 {
                let direct = nb.pmf(s, rho).unwrap();
                let integral = ctx.target_pmf_by_quadrature(s).unwrap();
                blur = blur.max((direct - integral).abs());
            }
        }
    }
    outcome(
        "2",
        "target normalization and blur equivalence",
        norm < 1e-9 && blur < 1e-8,
        format!("max |Σ pmf − 1| {norm:.2e} (< 1e-9), max |negbin − ∫ gamma·poisson| {blur:.2e} (< 1e-8)"),
    )
}

struct RepeatStats {
    global_quiet: usize,
    buckets_quiet: usize,
    verdict_pass: usize,
    backward_ok: usize,
    backward_failures: Vec<String>,
    partition_worst: f64,
}

fn backward_check(seed: u64, groups: &[OutcomeGroupReport], failures: &mut Vec<String>) -> bool {
    let mut ok = true;
    let mut note = |ok: &mut bool, msg: String| {
        *ok = false;
        failures.push(format!("seed {seed}: {msg}"));
    };
    for g in groups {
        let analytic = (ALPHA + g.outcome as f64) / (BETA + 1.0);
        if g.count >= 100 && (g.mean_prediction - analytic).abs() > 4.0 * g.prediction_stderr {
            let z = (g.mean_prediction - analytic) / g.prediction_stderr;
            note(
                &mut ok,
                format!(
                    "s={} r̄={:.4} vs {analytic:.4} (z={z:.2})",
                    g.outcome, g.mean_prediction
                ),
            );
        }
        if g.outcome >= 8 && g.count >= 30 && g.mean_prediction >= g.outcome as f64 {
            note(
                &mut ok,
                format!("s={} r̄={:.4} not below s", g.outcome, g.mean_prediction),
            );
        }
    }
    match groups.first() {
        Some(g) if g.outcome == 0 => {
            let target = ALPHA / (BETA + 1.0);
            if !(g.mean_prediction > 0.0
                && (g.mean_prediction - target).abs() <= 4.0 * g.prediction_stderr)
            {
                note(
                    &mut ok,
                    format!("r̄(0)={:.4} vs {target:.4}", g.mean_prediction),
                );
            }
        }
        _ => note(&mut ok, "no s=0 group".into()),
    }
    ok
}

fn repeated_runs() -> RepeatStats {
    let mut stats = RepeatStats {
        global_quiet: 0,
        buckets_quiet: 0,
        verdict_pass: 0,
        backward_ok: 0,
        backward_failures: Vec::new(),
        partition_worst: 0.0,
    };
    for seed in REPEAT_SEEDS {
        let r = run(10_000, seed, DistortionStrategy::Honest);
        let rep = &r.report;
        if rep.global.z_score.is_some_and(|z| z.abs() <= 3.0) {
            stats.global_quiet += 1;
        }
        let big_ok = rep
            .forward_buckets
            .iter()
            .filter(|b| b.count >= 200)
            .all(|b| b.z_score.is_some_and(|z| z.abs() < 4.0));
        if big_ok {
            stats.buckets_quiet += 1;
        }
        if rep.calibration.pass {
            stats.verdict_pass += 1;
        }
        if backward_check(seed, &rep.backward_groups, &mut stats.backward_failures) {
            stats.backward_ok += 1;
        }
        stats.partition_worst = stats.partition_worst.max(partition_error(&r));
    }
    stats
}

fn criterion_6(partition: &mut f64) -> Outcome {
    let perm = run(
        100_000,
        LARGE_SEED,
        DistortionStrategy::Permutation { seed: LARGE_SEED },
    );
    let constant = run(100_000, LARGE_SEED, DistortionStrategy::ConstantMean);
    *partition = partition
        .max(partition_error(&perm))
        .max(partition_error(&constant));
    let zp = perm.report.global.z_score.unwrap_or(f64::NAN);
    let zc = constant.report.global.z_score.unwrap_or(f64::NAN);
    let worst = perm
        .report
        .calibration
        .worst
        .as_ref()
        .and_then(|b| b.z_score)
        .unwrap_or(0.0);
    let pass =
        zp.abs() <= 3.0 && zc.abs() <= 3.0 && !perm.report.calibration.pass && worst.abs() > 6.0;
    outcome(
        "6",
        "global test is insufficient",
        pass,
        format!(
            "global z: permutation {zp:.3}, constant-mean {zc:.3} (|z| ≤ 3); permutation verdict {} with worst bucket z {worst:.1} (> 6)",
            if perm.report.calibration.pass { "pass" } else { "fail" }
        ),
    )
}

fn tail_gaps(n: usize, seed: u64, gamma: f64) -> (ExperimentReport, f64, f64) {
    let honest = run(n, seed, DistortionStrategy::Honest);
    let exaggerated = run(
        n,
        seed,
        DistortionStrategy::exaggerate(gamma, 1e-9).unwrap(),
    );
    let h = honest.report.backward_tail_gap.unwrap();
    let e = exaggerated.report.backward_tail_gap.unwrap();
    (exaggerated.report, h, e)
}

fn criterion_7(partition: &mut f64) -> Outcome {
    let honest = run(100_000, LARGE_SEED, DistortionStrategy::Honest);
    let exaggerated = run(
        100_000,
        LARGE_SEED,
        DistortionStrategy::exaggerate(2.0, 1e-9).unwrap(),
    );
    *partition = partition
        .max(partition_error(&honest))
        .max(partition_error(&exaggerated));
    let verdict_fails = !exaggerated.report.calibration.pass;
    let worst = exaggerated
        .report
        .calibration
        .worst
        .as_ref()
        .and_then(|b| b.z_score)
        .unwrap_or(0.0);
    let h = honest.report.backward_tail_gap.unwrap();
    let e = exaggerated.report.backward_tail_gap.unwrap();
    // recomputed from the raw pairs so the gap does not rely on report plumbing alone
    let h_direct = backward_tail_gap(&backward_groups(&honest.pairs, None).unwrap(), 0.1).unwrap();
    let e_direct =
        backward_tail_gap(&backward_groups(&exaggerated.pairs, None).unwrap(), 0.1).unwrap();
    let consistent = h == h_direct && e == e_direct;
    outcome(
        "7",
        "dilemma signature (exaggerate γ=2)",
        verdict_fails && e < h && consistent,
        format!(
            "(a) forward verdict {} (worst z {worst:.1}); (b) top-decile mean |r̄(s) − s|: exaggerated {e:.4} vs honest {h:.4}",
            if verdict_fails { "fails" } else { "passes" }
        ),
    )
}

/// Not a criterion: how often (b) holds across seeds, and at a milder stretch.
fn criterion_7_context() -> String {
    let seeds = 2..22u64;
    let mut wins = 0;
    let mut mild_wins = 0;
    for seed in seeds.clone() {
        let (_, h, e) = tail_gaps(100_000, seed, 2.0);
        if e < h {
            wins += 1;
        }
        let (_, h, e) = tail_gaps(100_000, seed, 1.5);
        if e < h {
            mild_wins += 1;
        }
    }
    let n = seeds.count();
    let mut s = String::new();
    let _ = write!(
        s,
        "context for 7(b): exaggerated gap below honest in {wins}/{n} other seeds at γ=2 and {mild_wins}/{n} at γ=1.5"
    );
    s
}

fn criterion_9() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("experiment.toml");
    std::fs::write(
        &cfg,
        "n = 20000\nseed = 42\noracle = true\n\n[prior]\nkind = \"gamma\"\nshape = 1.0\nrate = 0.5\n\n[process]\nkind = \"poisson\"\n\n[distortion]\nkind = \"exaggerate\"\ngamma = 1.5\n",
    )
    .unwrap();
    let simulate = |out: &Path, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hindsight"))
            .arg("simulate")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .env("RAYON_NUM_THREADS", threads)
            .status()
            .unwrap()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let sa = simulate(&a, "1");
    let sb = simulate(&b, "4");
    let (ra, rb) = (
        std::fs::read(a.join("report.json")).unwrap_or_default(),
        std::fs::read(b.join("report.json")).unwrap_or_default(),
    );
    let pass = sa.success() && sb.success() && !ra.is_empty() && ra == rb;
    outcome(
        "9",
        "determinism",
        pass,
        format!(
            "two `simulate` runs (1 and 4 threads): {} bytes vs {} bytes, identical = {}",
            ra.len(),
            rb.len(),
            ra == rb
        ),
    )
}

fn main() {
    let mut results = vec![criterion_1(), criterion_2()];

    let start = Instant::now();
    let stats = repeated_runs();
    let repeat_secs = start.elapsed().as_secs_f64();
    let runs = REPEAT_SEEDS.count();
    results.push(outcome(
        "3",
        "global unbiasedness",
        stats.global_quiet >= 95,
        format!(
            "{}/{runs} runs with |z| ≤ 3 (need ≥ 95)",
            stats.global_quiet
        ),
    ));
    results.push(outcome(
        "4",
        "forward calibration",
        stats.buckets_quiet >= 95 && stats.verdict_pass >= 95,
        format!(
            "{}/{runs} runs with every count ≥ 200 bucket at |z| < 4, verdict passes in {}/{runs} (need ≥ 95 each)",
            stats.buckets_quiet, stats.verdict_pass
        ),
    ));
    let mut detail = format!(
        "{}/{runs} runs match (α+s)/(β+1) within 4 stderr for count ≥ 100, r̄(0) > 0, r̄(s) < s for s ≥ 8",
        stats.backward_ok
    );
    for f in stats.backward_failures.iter().take(5) {
        let _ = write!(detail, "; {f}");
    }
    results.push(outcome(
        "5",
        "backward bias of a calibrated forecast",
        stats.backward_ok == runs,
        detail,
    ));

    let mut partition = stats.partition_worst;
    results.push(criterion_6(&mut partition));
    results.push(criterion_7(&mut partition));
    results.push(outcome(
        "8",
        "partition identities",
        partition <= 1e-12,
        format!(
            "max relative deviation {partition:.2e} over {} datasets (≤ 1e-12)",
            runs + 4
        ),
    ));
    results.push(criterion_9());
    results.sort_by_key(|o| o.id);

    println!();
    for o in &results {
        println!(
            "criterion {} [{}] {}: {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    println!("note: {}", criterion_7_context());
    println!("note: repeated n = 10^4 runs took {repeat_secs:.1} s");
    let failed = results.iter().filter(|o| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
