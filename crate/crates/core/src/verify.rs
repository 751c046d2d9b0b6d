//! Randomized invariant suite.
//!
//! Every check reduces to a list of inequalities `value <= limit`; its margin
//! is the smallest `limit - value`. A check listed in [`KNOWN_FAILURES`] is
//! reported as `known_fail` instead of `fail` when it is violated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    binomial_tail_at_least, cantelli_lower, check_bound, hoeffding_tail, lemma_simplecase_bound, lemma_w2_probability,
    reverse_markov_lower, swap_cross_term, theorem_main_bound, theorem_rev_bound, theorem_same_side, NoGoBound,
};
use crate::characterize::{classify_transition, synthesize_protocol, TransitionClassification};
use crate::engine::{
    brute_force_work_distribution, exact_work_distribution, final_state, ks_critical_value, ks_statistic, monte_carlo,
    total_variation, ExactSolver, WorkDistribution,
};
use crate::error::{Error, Result};
use crate::paths::{
    decompose_stages, enumerate_paths, epsilon_iii, path_work_distribution, random_path, shrink, Element, Path,
};
use crate::protocol::{build_average_work_protocol, build_thermalize_once, random_protocol, Protocol, Step};
use crate::thermo::{QubitState, ThermalContext};

pub const CHECK_NAMES: &[&str] = &[
    "exact_vs_brute_force",
    "final_state_marginal",
    "monte_carlo_ks",
    "path_mixture",
    "shrink_preserves_law",
    "stage_free_energy_closure",
    "mean_area_identity",
    "variance_area",
    "variance_area_toward_zero",
    "swap_cross_term",
    "lemma_w1",
    "lemma_w3",
    "lemma_w2",
    "hoeffding",
    "lemma_simplecase",
    "theorem_a6",
    "theorem_a7",
    "theorem_a8",
    "reverse_markov",
    "cantelli",
    "classifier",
];

/// Checks of claims that are false in general; see [`variance_area_counterexample`].
pub const KNOWN_FAILURES: &[&str] = &["variance_area"];

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Randomized instances per property.
    pub cases: usize,
    pub seed: u64,
    /// Name of a check whose limits are deliberately broken.
    pub inject_fault: Option<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            cases: 200,
            seed: 2024,
            inject_fault: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    KnownFail,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    /// Number of inequalities evaluated.
    pub evaluated: usize,
    pub violations: usize,
    /// Smallest `limit - value` over all inequalities.
    pub margin: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub cases: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Default)]
struct Ledger {
    pairs: Vec<(f64, f64)>,
    detail: String,
}

impl Ledger {
    /// Records the requirement `value <= limit`.
    fn le(&mut self, value: f64, limit: f64) {
        self.pairs.push((value, limit));
    }
}

pub fn run_suite(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if let Some(name) = &cfg.inject_fault {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::Domain(format!("unknown check {name:?}")));
        }
    }
    let cases = cfg.cases.max(1);
    let mut checks = Vec::with_capacity(CHECK_NAMES.len());
    for (k, &name) in CHECK_NAMES.iter().enumerate() {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let mut ledger = Ledger::default();
        run_check(name, cases, seed, &mut ledger)?;
        if cfg.inject_fault.as_deref() == Some(name) {
            for (value, limit) in &mut ledger.pairs {
                *limit = *limit - 1.0 - 2.0 * (*limit - *value).abs();
            }
        }
        checks.push(summarize(name, ledger));
    }
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.status != Status::Fail),
        cases,
        seed: cfg.seed,
        checks,
    })
}

fn summarize(name: &str, ledger: Ledger) -> CheckResult {
    let violations = ledger.pairs.iter().filter(|(v, l)| !(v <= l)).count();
    let margin = ledger.pairs.iter().map(|(v, l)| l - v).fold(f64::INFINITY, f64::min);
    let status = match (violations, KNOWN_FAILURES.contains(&name)) {
        (0, _) => Status::Pass,
        (_, true) => Status::KnownFail,
        (_, false) => Status::Fail,
    };
    CheckResult {
        name: name.to_string(),
        status,
        evaluated: ledger.pairs.len(),
        violations,
        margin,
        detail: ledger.detail,
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> ThermalContext {
    ThermalContext::new(rng.gen_range(0.3..3.0), rng.gen_range(0.0..2.5)).expect("valid context")
}

fn run_check(name: &str, cases: usize, seed: u64, out: &mut Ledger) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "exact_vs_brute_force" => {
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let p = random_protocol(seed ^ i as u64, 8, (-2.0, 3.0), ctx);
                let init = QubitState::new(rng.gen())?;
                let exact = exact_work_distribution(&p, init)?;
                let brute = brute_force_work_distribution(&p, init)?;
                out.le(total_variation(&exact, &brute), 1e-12);
            }
        }
        "final_state_marginal" => {
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let p = random_protocol(seed ^ i as u64, 12, (-2.0, 3.0), ctx);
                let init = QubitState::new(rng.gen())?;
                let o = ExactSolver::default().solve(&p, init)?;
                out.le(
                    (o.final_state.p_excited() - final_state(&p, init).p_excited()).abs(),
                    1e-12,
                );
            }
        }
        "monte_carlo_ks" => {
            let seeds = (cases / 10).clamp(2, 20);
            let ctx = ThermalContext::new(1.0, 3f64.ln())?;
            let p = random_protocol(seed, 8, (-1.0, 2.5), ctx);
            let init = QubitState::new(0.3)?;
            let exact = exact_work_distribution(&p, init)?;
            let n = 20_000;
            let crit = ks_critical_value(n, 1e-3);
            let mut failures = 0;
            for s in 0..seeds as u64 {
                let mc = monte_carlo(&p, init, n, seed.wrapping_add(s));
                if ks_statistic(&mc.distribution, &exact) > crit {
                    failures += 1;
                }
            }
            out.le(failures as f64, 1.0);
            out.detail = format!("{failures} of {seeds} seeds above the 99.9% KS critical value at n={n}");
        }
        "path_mixture" => {
            for i in 0..cases.div_ceil(4) {
                let ctx = random_context(&mut rng);
                let p = random_protocol(seed ^ i as u64, 6, (-2.0, 3.0), ctx);
                let init = QubitState::new(rng.gen())?;
                let paths = enumerate_paths(&p)?;
                let laws = paths
                    .iter()
                    .map(|path| path_work_distribution(path, init))
                    .collect::<Result<Vec<_>>>()?;
                let mix = WorkDistribution::mixture(paths.iter().map(|p| p.weight).zip(laws.iter()));
                out.le(total_variation(&mix, &exact_work_distribution(&p, init)?), 1e-12);
            }
        }
        "shrink_preserves_law" => {
            for i in 0..cases.div_ceil(4) {
                let ctx = random_context(&mut rng);
                let p = random_protocol(seed ^ i as u64, 8, (-2.0, 3.0), ctx);
                let init = QubitState::new(rng.gen())?;
                for path in enumerate_paths(&p)? {
                    let a = path_work_distribution(&path, init)?;
                    let b = path_work_distribution(&shrink(&path), init)?;
                    out.le(total_variation(&a, &b), 1e-12);
                }
            }
        }
        "stage_free_energy_closure" => {
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let p = random_protocol(seed ^ i as u64, 8, (-2.0, 3.0), ctx);
                for path in enumerate_paths(&p)? {
                    let s = decompose_stages(&shrink(&path));
                    out.le(s.delta_f.iter().sum::<f64>().abs(), 1e-10);
                }
            }
        }
        "mean_area_identity" => {
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let s = decompose_stages(&random_path(seed ^ i as u64, 6, (-2.0, 4.0), 0.0, ctx));
                let w = s.stage2_work()?;
                out.le((w.mean() + s.delta_f[1] + s.stage2_area()).abs(), 1e-9);
            }
        }
        "variance_area" => {
            let mut worst = (0.0, 0u64);
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let path_seed = seed ^ i as u64;
                let s = decompose_stages(&random_path(path_seed, 6, (-2.0, 4.0), 0.3, ctx));
                let var = s.stage2_work()?.variance();
                let limit = 2.0 / ctx.beta() * s.stage2_area();
                if limit > 0.0 && var / limit > worst.0 {
                    worst = (var / limit, path_seed);
                }
                out.le(var, limit + 1e-9);
            }
            let (ratio, var, limit) = variance_area_counterexample();
            out.detail = format!(
                "largest Var/((2/beta)A) = {:.4} (path seed {}); minimal counterexample beta=1, G at E=1, shift to E=2, G: Var={var:.6} > {limit:.6} (ratio {ratio:.4})",
                worst.0, worst.1
            );
        }
        "variance_area_toward_zero" => {
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let path = descending_path(seed ^ i as u64, 6, ctx);
                let s = decompose_stages(&path);
                let var = s.stage2_work()?.variance();
                out.le(var, 2.0 / ctx.beta() * s.stage2_area() + 1e-9);
            }
        }
        "swap_cross_term" => {
            let ctx = ThermalContext::new(1.0, 1.0)?;
            for i in 1..=100 {
                for j in 1..=100 {
                    let (lhs, rhs) = swap_cross_term(i as f64 * 0.05, j as f64 * 0.05, &ctx);
                    out.le(lhs, rhs + 1e-15);
                }
            }
        }
        "lemma_w1" => {
            for _ in 0..cases {
                let ctx = random_context(&mut rng);
                let e_a = rng.gen_range(-2.0..4.0);
                let delta = e_a - ctx.e0();
                let df1 = ctx.gibbs_integral(ctx.e0(), e_a)?;
                // Occupied when the level rises, empty when it falls.
                let w = if delta > 0.0 { -delta } else { 0.0 };
                out.le(w, -df1 + 1e-12);
            }
        }
        "lemma_w3" => {
            for _ in 0..cases {
                let ctx = ThermalContext::new(rng.gen_range(0.3..3.0), rng.gen_range(0.05..2.5))?;
                let q_out = rng.gen_range(ctx.p_beta()..0.5);
                if q_out <= ctx.p_beta() {
                    continue;
                }
                let e_b = ctx.energy_of_population(q_out)?;
                let df3 = ctx.gibbs_integral(e_b, ctx.e0())?;
                let w = -(ctx.e0() - e_b);
                out.le(w, -df3 - epsilon_iii(q_out, &ctx)? + 1e-12);
            }
        }
        "lemma_w2" => {
            for i in 0..cases {
                let ctx = random_context(&mut rng);
                let s = decompose_stages(&random_path(seed ^ i as u64, 6, (-2.0, 4.0), 0.3, ctx));
                let w = s.stage2_work()?;
                for eps in [0.01, 0.1, 0.5, 2.0, 10.0] {
                    out.le(
                        lemma_w2_probability(eps, &ctx)?,
                        w.prob_work_at_most(-s.delta_f[1] + eps),
                    );
                }
            }
        }
        "hoeffding" => {
            for n in 1..=200u64 {
                for k in 1..=9 {
                    let p = 0.05 * k as f64;
                    out.le(binomial_tail_at_least(n, p, n.div_ceil(2)), hoeffding_tail(n, p)?);
                }
            }
        }
        "lemma_simplecase" => {
            let ctx = ThermalContext::new(1.0, 3f64.ln())?;
            for (p_in, p_out) in [(0.1, 0.3), (0.05, 0.45), (0.2, 0.4), (0.1, 0.2)] {
                let b = lemma_simplecase_bound(p_in, p_out, &ctx)?;
                for n in [10, 50, 200] {
                    let p = build_average_work_protocol(p_in, p_out, ctx, n)?;
                    let d = exact_work_distribution(&p, QubitState::new(p_in)?)?;
                    out.le(b.probability, d.prob_work_at_most(-b.threshold));
                }
            }
        }
        "theorem_a6" | "theorem_a7" | "theorem_a8" => {
            let ctx = ThermalContext::from_gibbs_population(1.0, 0.25)?;
            let cases: Vec<(f64, f64)> = match name {
                "theorem_a6" => (0..10)
                    .map(|i| (0.125, 0.25 + 0.025 * (i as f64 + 0.5)))
                    .chain([(0.125, 0.6), (0.125, 0.75), (0.2, 0.9)])
                    .collect(),
                "theorem_a7" => (0..10)
                    .map(|i| (0.3 + 0.065 * i as f64, 0.025 * (i as f64 + 0.5)))
                    .collect(),
                _ => (0..10)
                    .map(|i| {
                        if i % 2 == 0 {
                            (0.3 + 0.02 * i as f64, 0.5 + 0.04 * i as f64)
                        } else {
                            (0.2 - 0.01 * i as f64, 0.1 - 0.008 * i as f64)
                        }
                    })
                    .collect(),
            };
            let mut worst = f64::INFINITY;
            for (k, (p_in, p_out)) in cases.into_iter().enumerate() {
                let bound = forbidden_bound(p_in, p_out, &ctx)?;
                for proto in realizing_protocols(p_in, p_out, &ctx, k)? {
                    let d = exact_work_distribution(&proto, QubitState::new(p_in)?)?;
                    let c = check_bound(&d, bound.tail());
                    worst = worst.min(c.ratio);
                    out.le(bound.probability, c.measured);
                }
            }
            out.detail = format!("smallest measured/bound ratio {worst:.4e}");
        }
        "reverse_markov" => {
            for _ in 0..cases {
                let (ys, ps) = random_finite(&mut rng, 0.0, 1.0);
                let mean: f64 = ys.iter().zip(&ps).map(|(y, p)| y * p).sum::<f64>().clamp(0.0, 1.0);
                let a = rng.gen_range(0.01..0.99);
                let r = reverse_markov_lower(mean, a)?;
                let below: f64 = ys.iter().zip(&ps).filter(|(y, _)| **y < a).map(|(_, p)| p).sum();
                let above: f64 = ys.iter().zip(&ps).filter(|(y, _)| **y > a).map(|(_, p)| p).sum();
                out.le(r.below, below + 1e-12);
                out.le(r.above, above + 1e-12);
            }
        }
        "cantelli" => {
            for _ in 0..cases {
                let (xs, ps) = random_finite(&mut rng, -5.0, 5.0);
                let mean: f64 = xs.iter().zip(&ps).map(|(x, p)| x * p).sum();
                let var: f64 = xs.iter().zip(&ps).map(|(x, p)| p * (x - mean) * (x - mean)).sum();
                let delta = rng.gen_range(0.01..5.0);
                let exact: f64 = xs
                    .iter()
                    .zip(&ps)
                    .filter(|(x, _)| **x <= mean + delta)
                    .map(|(_, p)| p)
                    .sum();
                out.le(cantelli_lower(delta, var)?, exact + 1e-12);
            }
        }
        "classifier" => {
            let ctx = ThermalContext::from_gibbs_population(1.0, 0.25)?;
            let side = ((cases as f64).sqrt().ceil() as usize).max(10) * 4;
            for i in 0..side {
                for j in 0..side {
                    let p_in = (i as f64 + 0.5) / side as f64;
                    let p_out = (j as f64 + 0.5) / side as f64;
                    check_classification(p_in, p_out, &ctx, out)?;
                }
            }
            for k in 0..=side {
                check_classification(1.0, k as f64 / side as f64, &ctx, out)?;
            }
        }
        _ => return Err(Error::Domain(format!("unknown check {name:?}"))),
    }
    Ok(())
}

fn check_classification(p_in: f64, p_out: f64, ctx: &ThermalContext, out: &mut Ledger) -> Result<()> {
    let c = classify_transition(p_in, p_out, ctx)?;
    match &c {
        TransitionClassification::Forbidden { bound } => out.le(-bound.probability, -f64::MIN_POSITIVE),
        _ => {
            let proto = synthesize_protocol(&c, p_in, p_out, ctx)?;
            let init = QubitState::new(p_in)?;
            out.le((final_state(&proto, init).p_excited() - p_out).abs(), 1e-12);
            out.le(exact_work_distribution(&proto, init)?.prob_work_below(0.0), 0.0);
            out.le(if proto.validate().is_valid() { 0.0 } else { 1.0 }, 0.0);
        }
    }
    Ok(())
}

fn random_finite(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let k = rng.gen_range(1..=6);
    let xs: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    (xs, raw.into_iter().map(|w| w / total).collect())
}

/// The bound the classifier attaches to a forbidden transition.
pub fn forbidden_bound(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<NoGoBound> {
    let pb = ctx.p_beta();
    if p_in < pb && pb < p_out {
        theorem_main_bound(p_in, p_out, ctx)
    } else if p_out < pb && pb < p_in {
        theorem_rev_bound(p_in, p_out, ctx)
    } else {
        theorem_same_side(p_in, p_out, ctx)
    }
}

/// Protocols that take `p_in` exactly to `p_out`: a single thermalization at
/// `E(p_out)` (full, and partial when feasible) and a staged descent or ascent
/// with `2 + variant` full thermalizations ending at `E(p_out)`.
pub fn realizing_protocols(p_in: f64, p_out: f64, ctx: &ThermalContext, variant: usize) -> Result<Vec<Protocol>> {
    let e_out = ctx.energy_of_population(p_out)?;
    let mut out = vec![build_thermalize_once(e_out, 1.0, *ctx)?];
    let lambda = 0.8;
    let target = (p_out - (1.0 - lambda) * p_in) / lambda;
    if target > 0.0 && target < 1.0 {
        out.push(build_thermalize_once(ctx.energy_of_population(target)?, lambda, *ctx)?);
    }
    let e_start = if p_in > 0.0 && p_in < 1.0 {
        ctx.energy_of_population(p_in)?
    } else {
        ctx.e0()
    };
    let stages = 2 + variant;
    let mut steps = Vec::with_capacity(2 * stages + 1);
    let mut e = ctx.e0();
    for k in 1..=stages {
        let next = e_start + (e_out - e_start) * k as f64 / stages as f64;
        let next = if k == stages { e_out } else { next };
        steps.push(Step::lt(next - e));
        e += next - e;
        steps.push(Step::pt(1.0));
    }
    steps.push(Step::lt(ctx.e0() - e));
    out.push(Protocol::checked(*ctx, steps)?);
    Ok(out)
}

/// Swap-free path whose stage II descends monotonically through nonnegative
/// energies, so every hop moves toward zero from the Gibbs curve.
pub fn descending_path(seed: u64, n_hops: usize, ctx: ThermalContext) -> Path {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels: Vec<f64> = (0..=n_hops.max(1)).map(|_| rng.gen_range(0.0..5.0)).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    let mut elements = Vec::new();
    let mut e = ctx.e0();
    for level in levels {
        elements.push(Element::Shift(level - e));
        e += level - e;
        elements.push(Element::Gibbs);
    }
    elements.push(Element::Shift(ctx.e0() - e));
    shrink(&Path::new(ctx, ctx.e0(), elements, 1.0))
}

/// `(ratio, Var W_II, (2/beta) A)` for the one-hop path G at E=1, shift to E=2, G at beta=1.
pub fn variance_area_counterexample() -> (f64, f64, f64) {
    let ctx = ThermalContext::new(1.0, 1.0).expect("valid context");
    let path = Path::new(
        ctx,
        1.0,
        vec![
            Element::Gibbs,
            Element::Shift(1.0),
            Element::Gibbs,
            Element::Shift(-1.0),
        ],
        1.0,
    );
    let s = decompose_stages(&path);
    let var = s.stage2_work().expect("small path").variance();
    let limit = 2.0 * s.stage2_area();
    (var / limit, var, limit)
}
