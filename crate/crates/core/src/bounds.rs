//! Closed-form work-loss bounds and the probability inequalities behind them.
//!
//! A bound is a pair (threshold, probability): the work satisfies
//! `W <= -threshold` with at least the given probability.

use serde::{Deserialize, Serialize};

use crate::engine::WorkDistribution;
use crate::error::{domain, ensure_finite, Result};
use crate::format::g17;
use crate::paths::{epsilon_iii, epsilon_iii_tilde};
use crate::thermo::ThermalContext;

/// A guaranteed loss `threshold` occurring with probability at least `probability`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub threshold: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Below the Gibbs population to above it.
    A6,
    /// Above the Gibbs population to below it.
    A7,
    /// Same side of the Gibbs population, moving away from it.
    A8,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::A6 => "A6",
            Regime::A7 => "A7",
            Regime::A8 => "A8",
        }
    }
}

/// Stage-wise factors of a no-go bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub pf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGoBound {
    pub threshold: f64,
    pub probability: f64,
    pub components: Components,
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl NoGoBound {
    fn new(threshold: f64, components: Components, regime: Regime, note: Option<String>) -> Self {
        let Components { p1, p2, p3, pf } = components;
        Self {
            threshold,
            // p1 last so that bounds differing only in p_in scale exactly.
            probability: (p1 * (p2 * p3 * pf)).clamp(0.0, 1.0),
            components,
            regime,
            note,
        }
    }

    pub fn tail(&self) -> TailBound {
        TailBound {
            threshold: self.threshold,
            probability: self.probability,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound serializes")
    }
}

/// Outcome of checking a bound against a work law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    /// `P(W <= -threshold)` under the law.
    pub measured: f64,
    pub bound: f64,
    /// `measured / bound`, infinite when the bound is zero.
    pub ratio: f64,
    pub holds: bool,
}

pub fn check_bound(dist: &WorkDistribution, bound: TailBound) -> BoundCheck {
    let measured = dist.prob_work_at_most(-bound.threshold);
    BoundCheck {
        measured,
        bound: bound.probability,
        ratio: if bound.probability > 0.0 {
            measured / bound.probability
        } else {
            f64::INFINITY
        },
        holds: measured >= bound.probability,
    }
}

fn open_unit(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, 1), got {p}"))
    }
}

fn closed_unit(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        domain(format!("{name} must lie in [0, 1], got {p}"))
    }
}

/// Loss bound for the average-work protocol taking `p_in` to `p_out`:
/// with probability at least `p_in p_out (1 - e^{-2 (1/2 - p_out)^2})` the
/// work is at most `-(E(p_in) - E(p_out)) / 2`.
pub fn lemma_simplecase_bound(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<TailBound> {
    open_unit("p_in", p_in)?;
    if !(p_out > 0.0 && p_out < 0.5) {
        return domain(format!("p_out must lie in (0, 1/2), got {p_out}"));
    }
    if p_in >= p_out {
        return domain(format!("p_in must be below p_out, got {p_in} >= {p_out}"));
    }
    let gap = 0.5 - p_out;
    Ok(TailBound {
        threshold: (ctx.energy_unchecked(p_in) - ctx.energy_unchecked(p_out)) / 2.0,
        probability: p_in * p_out * -(-2.0 * gap * gap).exp_m1(),
    })
}

/// Hoeffding bound `e^{-2 n (1/2 - p)^2}` on `P(Bin(n, p) >= n/2)`.
pub fn hoeffding_tail(n: u64, p: f64) -> Result<f64> {
    if n == 0 {
        return domain("n must be positive");
    }
    if !(0.0..0.5).contains(&p) {
        return domain(format!("p must lie in [0, 1/2), got {p}"));
    }
    let gap = 0.5 - p;
    Ok((-2.0 * n as f64 * gap * gap).exp())
}

/// Exact `P(Bin(n, p) >= k)`, summed in log space.
pub fn binomial_tail_at_least(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0;
    let mut terms = Vec::with_capacity((n + 1) as usize);
    for j in 0..=n {
        if j > 0 {
            ln_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        if j >= k {
            terms.push(ln_choose + j as f64 * lp + (n - j) as f64 * lq);
        }
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>()).min(1.0)
}

/// `min{2/3, eps / (4/beta + eps)}`: a lower bound on `P(W_II <= -dF_II + eps)`.
pub fn lemma_w2_probability(epsilon2: f64, ctx: &ThermalContext) -> Result<f64> {
    ensure_finite("epsilon2", epsilon2)?;
    if epsilon2 <= 0.0 {
        return domain(format!("epsilon2 must be positive, got {epsilon2}"));
    }
    Ok(stage2_factor(epsilon2, 4.0, ctx))
}

fn stage2_factor(eps: f64, c: f64, ctx: &ThermalContext) -> f64 {
    (2.0f64 / 3.0).min(eps / (c / ctx.beta() + eps))
}

/// Single-path bound for a path from `p_in` ending at `q_out` with
/// `p_in < p_beta < q_out <= 1/2`.
pub fn lemma_path_bound(p_in: f64, q_out: f64, ctx: &ThermalContext) -> Result<TailBound> {
    let pb = ctx.p_beta();
    if !(p_in > 0.0 && p_in < pb && pb < q_out && q_out <= 0.5) {
        return domain(format!(
            "need 0 < p_in < p_beta < q_out <= 1/2, got p_in={p_in}, p_beta={pb}, q_out={q_out}"
        ));
    }
    let eps = epsilon_iii(q_out, ctx)?;
    Ok(TailBound {
        threshold: eps / 2.0,
        probability: p_in * (stage2_factor(eps, 8.0, ctx) * q_out),
    })
}

/// Bound for `p_in < p_beta < p_out`.
///
/// The transition is accepted for `p_in = 0`, where the bound is vacuous, and
/// for `p_out > 1/2`; both cases carry a note.
pub fn theorem_main_bound(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<NoGoBound> {
    closed_unit("p_in", p_in)?;
    closed_unit("p_out", p_out)?;
    let pb = ctx.p_beta();
    if !(p_in < pb && pb < p_out) {
        return domain(format!(
            "need p_in < p_beta < p_out, got p_in={p_in}, p_beta={pb}, p_out={p_out}"
        ));
    }
    let q = (p_out + pb) / 2.0;
    let eps = epsilon_iii(q, ctx)?;
    let note = if p_in == 0.0 {
        Some("vacuous at p_in = 0: stage I has no occupied branch".to_string())
    } else if p_out > 0.5 {
        Some("p_out > 1/2 lies outside the proven range".to_string())
    } else {
        None
    };
    Ok(NoGoBound::new(
        eps / 2.0,
        Components {
            p1: p_in,
            p2: stage2_factor(eps, 8.0, ctx),
            p3: q,
            pf: (p_out - pb) / 2.0,
        },
        Regime::A6,
        note,
    ))
}

/// Bound for `p_out < p_beta < p_in < 1`.
pub fn theorem_rev_bound(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<NoGoBound> {
    closed_unit("p_in", p_in)?;
    closed_unit("p_out", p_out)?;
    let pb = ctx.p_beta();
    if !(p_out < pb && pb < p_in && p_in < 1.0) {
        return domain(format!(
            "need p_out < p_beta < p_in < 1, got p_in={p_in}, p_beta={pb}, p_out={p_out}"
        ));
    }
    let q = (p_out + pb) / 2.0;
    let eps = epsilon_iii_tilde(q, ctx)?;
    Ok(NoGoBound::new(
        eps / 2.0,
        Components {
            p1: p_in.min(1.0 - p_in),
            p2: stage2_factor(eps, 8.0, ctx),
            p3: 1.0 - q,
            pf: (pb - p_out) / 2.0,
        },
        Regime::A7,
        None,
    ))
}

/// Bound for transitions that stay on one side of the Gibbs population and
/// move away from it: `p_beta <= p_in < p_out` or `p_beta >= p_in > p_out`.
///
/// The splitting level is the midpoint `a` of `p_in` and `p_out`, which keeps
/// paths without a thermalization (ending at `p_in`) out of the counted set.
pub fn theorem_same_side(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<NoGoBound> {
    closed_unit("p_in", p_in)?;
    closed_unit("p_out", p_out)?;
    let pb = ctx.p_beta();
    let a = (p_in + p_out) / 2.0;
    let note = Some("constructive instantiation".to_string());
    if pb <= p_in && p_in < p_out {
        let eps = epsilon_iii(a, ctx)?;
        Ok(NoGoBound::new(
            eps / 2.0,
            Components {
                p1: p_in.min(1.0 - p_in),
                p2: stage2_factor(eps, 8.0, ctx),
                p3: a,
                pf: (p_out - p_in) / 2.0,
            },
            Regime::A8,
            note,
        ))
    } else if pb >= p_in && p_in > p_out {
        let eps = epsilon_iii_tilde(a, ctx)?;
        Ok(NoGoBound::new(
            eps / 2.0,
            Components {
                p1: p_in.min(1.0 - p_in),
                p2: stage2_factor(eps, 8.0, ctx),
                p3: 1.0 - a,
                pf: (p_in - p_out) / 2.0,
            },
            Regime::A8,
            note,
        ))
    } else {
        domain(format!(
            "need p_beta <= p_in < p_out or p_beta >= p_in > p_out, got p_in={p_in}, p_beta={pb}, p_out={p_out}"
        ))
    }
}

/// Lower bounds from Markov's inequality for `Y` supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReverseMarkov {
    /// `P(Y < a) >= 1 - EY / a`, clamped at zero.
    pub below: f64,
    /// `P(Y > a) >= 1 - (1 - EY) / (1 - a)`, clamped at zero.
    pub above: f64,
    /// Whether either raw bound was negative.
    pub clamped: bool,
}

pub fn reverse_markov_lower(mean: f64, a: f64) -> Result<ReverseMarkov> {
    closed_unit("mean", mean)?;
    if !(a > 0.0 && a < 1.0) {
        return domain(format!("a must lie in (0, 1), got {a}"));
    }
    let below = 1.0 - mean / a;
    let above = 1.0 - (1.0 - mean) / (1.0 - a);
    Ok(ReverseMarkov {
        below: below.max(0.0),
        above: above.max(0.0),
        clamped: below < 0.0 || above < 0.0,
    })
}

/// Cantelli: `P(X <= EX + delta) >= delta^2 / (Var X + delta^2)`.
pub fn cantelli_lower(delta: f64, variance: f64) -> Result<f64> {
    ensure_finite("delta", delta)?;
    ensure_finite("variance", variance)?;
    if delta <= 0.0 {
        return domain(format!("delta must be positive, got {delta}"));
    }
    if variance < 0.0 {
        return domain(format!("variance must be nonnegative, got {variance}"));
    }
    Ok(delta * delta / (variance + delta * delta))
}

/// Both sides of `2 q (1 - q) d1 d2 <= (2/beta) (1/2 - q) d2` with `q = g(d1)`,
/// the cross term of a hop through a swap at zero energy.
pub fn swap_cross_term(d1: f64, d2: f64, ctx: &ThermalContext) -> (f64, f64) {
    let q = ctx.g(d1);
    (2.0 * q * (1.0 - q) * d1 * d2, 2.0 / ctx.beta() * (0.5 - q) * d2)
}

/// Initial populations plotted in the loss/probability figure.
pub const FIGURE8_P_IN: [f64; 3] = [1.0 / 16.0, 1.0 / 8.0, 3.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure8Row {
    pub p_out: f64,
    pub work_threshold: f64,
    /// Bound probability for each entry of [`FIGURE8_P_IN`].
    pub probabilities: [f64; 3],
}

/// The loss threshold and bound probabilities of the upward no-go bound on
/// the grid `p_out = p_beta + (1/2 - p_beta) k / n`, `k = 1..=n`.
pub fn figure8(ctx: &ThermalContext, n: usize) -> Result<Vec<Figure8Row>> {
    let pb = ctx.p_beta();
    if n == 0 {
        return domain("figure8 needs at least one grid point");
    }
    if !(FIGURE8_P_IN[2] < pb && pb < 0.5) {
        return domain(format!("figure8 needs 3/16 < p_beta < 1/2, got {pb}"));
    }
    (1..=n)
        .map(|k| {
            let p_out = if k == n {
                0.5
            } else {
                pb + (0.5 - pb) * k as f64 / n as f64
            };
            let mut probabilities = [0.0; 3];
            let mut work_threshold = 0.0;
            for (slot, &p_in) in probabilities.iter_mut().zip(FIGURE8_P_IN.iter()) {
                let b = theorem_main_bound(p_in, p_out, ctx)?;
                *slot = b.probability;
                work_threshold = b.threshold;
            }
            Ok(Figure8Row {
                p_out,
                work_threshold,
                probabilities,
            })
        })
        .collect()
}

pub fn figure8_csv(rows: &[Figure8Row]) -> String {
    let mut out = String::from("p_out,work_threshold,prob_pin_1_16,prob_pin_1_8,prob_pin_3_16\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            g17(r.p_out),
            g17(r.work_threshold),
            g17(r.probabilities[0]),
            g17(r.probabilities[1]),
            g17(r.probabilities[2])
        ));
    }
    out
}
