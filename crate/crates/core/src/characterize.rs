//! Which qubit transitions `p_in -> p_out` a memoryless protocol can realize
//! without any chance of losing work.
//!
//! A transition is free exactly when `p_out` lies between `p_in` and the Gibbs
//! population (a single partial thermalization), or when the input is the
//! pure excited state. Every other transition loses work with positive
//! probability, quantified by a [`NoGoBound`].

use serde_json::json;

use crate::bounds::{theorem_main_bound, theorem_rev_bound, theorem_same_side, NoGoBound};
use crate::error::{domain, ensure_probability, Result};
use crate::protocol::{build_pure_excited_reset, Protocol, Step};
use crate::thermo::ThermalContext;

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionClassification {
    AchievableByMixing { lambda: f64 },
    AchievableFromPureExcited { protocol: Protocol },
    Forbidden { bound: NoGoBound },
}

impl TransitionClassification {
    pub fn verdict(&self) -> &'static str {
        match self {
            Self::AchievableByMixing { .. } => "mixing",
            Self::AchievableFromPureExcited { .. } => "pure_excited",
            Self::Forbidden { .. } => "forbidden",
        }
    }

    pub fn is_achievable(&self) -> bool {
        !matches!(self, Self::Forbidden { .. })
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        match self {
            Self::AchievableByMixing { lambda } => json!({"verdict": "mixing", "lambda": lambda}),
            Self::AchievableFromPureExcited { .. } => json!({"verdict": "pure_excited"}),
            Self::Forbidden { bound } => json!({"verdict": "forbidden", "bound": bound}),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("verdict serializes")
    }
}

fn between(x: f64, a: f64, b: f64) -> bool {
    a.min(b) <= x && x <= a.max(b)
}

/// `lambda` with `p_out = (1 - lambda) p_in + lambda p_beta`.
pub fn mixing_coefficient(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<f64> {
    ensure_probability("p_in", p_in)?;
    ensure_probability("p_out", p_out)?;
    let pb = ctx.p_beta();
    if !between(p_out, p_in, pb) {
        return domain(format!("p_out={p_out} is not between p_in={p_in} and p_beta={pb}"));
    }
    if p_in == pb {
        return Ok(1.0);
    }
    Ok(((p_out - p_in) / (pb - p_in)).clamp(0.0, 1.0))
}

pub fn classify_transition(p_in: f64, p_out: f64, ctx: &ThermalContext) -> Result<TransitionClassification> {
    ensure_probability("p_in", p_in)?;
    ensure_probability("p_out", p_out)?;
    let pb = ctx.p_beta();
    if p_in == 1.0 {
        return Ok(TransitionClassification::AchievableFromPureExcited {
            protocol: pure_excited_protocol(p_out, ctx),
        });
    }
    if between(p_out, p_in, pb) {
        return Ok(TransitionClassification::AchievableByMixing {
            lambda: mixing_coefficient(p_in, p_out, ctx)?,
        });
    }
    let bound = if p_in < pb && pb < p_out {
        theorem_main_bound(p_in, p_out, ctx)?
    } else if p_out < pb && pb < p_in {
        theorem_rev_bound(p_in, p_out, ctx)?
    } else {
        theorem_same_side(p_in, p_out, ctx)?
    };
    Ok(TransitionClassification::Forbidden { bound })
}

fn pure_excited_protocol(p_out: f64, ctx: &ThermalContext) -> Protocol {
    let pb = ctx.p_beta();
    if p_out >= pb {
        Protocol::new(*ctx, vec![Step::pt((1.0 - p_out) / (1.0 - pb))])
    } else {
        let mut steps = build_pure_excited_reset(*ctx).steps().to_vec();
        steps.push(Step::pt(p_out / pb));
        Protocol::new(*ctx, steps)
    }
}

/// A work-free protocol realizing an achievable transition.
pub fn synthesize_protocol(
    classification: &TransitionClassification,
    _p_in: f64,
    _p_out: f64,
    ctx: &ThermalContext,
) -> Result<Protocol> {
    match classification {
        TransitionClassification::AchievableByMixing { lambda } => Ok(Protocol::new(*ctx, vec![Step::pt(*lambda)])),
        TransitionClassification::AchievableFromPureExcited { protocol } => Ok(protocol.clone()),
        TransitionClassification::Forbidden { .. } => domain("forbidden transitions have no work-free protocol"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Regime;
    use crate::engine::{exact_work_distribution, final_state};
    use crate::thermo::QubitState;
    use approx::assert_relative_eq;

    fn quarter() -> ThermalContext {
        ThermalContext::new(1.0, 3f64.ln()).unwrap()
    }

    #[test]
    fn mixing_examples() {
        let ctx = quarter();
        assert_eq!(mixing_coefficient(0.3, 0.3, &ctx).unwrap(), 0.0);
        assert_eq!(mixing_coefficient(0.3, ctx.p_beta(), &ctx).unwrap(), 1.0);
        assert_relative_eq!(mixing_coefficient(0.3, 0.26, &ctx).unwrap(), 0.8, epsilon = 1e-12);
        assert!(mixing_coefficient(0.3, 0.2, &ctx).is_err());
    }

    #[test]
    fn classify_examples() {
        let ctx = quarter();
        match classify_transition(0.1, 0.3, &ctx).unwrap() {
            TransitionClassification::Forbidden { bound } => {
                assert_eq!(bound.regime, Regime::A6);
                assert!(bound.probability > 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(classify_transition(1.0, 0.05, &ctx).unwrap().verdict(), "pure_excited");
        match classify_transition(0.3, 0.26, &ctx).unwrap() {
            TransitionClassification::AchievableByMixing { lambda } => {
                assert_relative_eq!(lambda, 0.8, epsilon = 1e-12)
            }
            other => panic!("{other:?}"),
        }
        let json: serde_json::Value =
            serde_json::from_str(&classify_transition(0.6, 0.1, &ctx).unwrap().to_json()).unwrap();
        assert_eq!(json["verdict"], "forbidden");
        assert_eq!(json["bound"]["regime"], "A7");
        assert!(classify_transition(1.5, 0.1, &ctx).is_err());
    }

    #[test]
    fn synthesized_protocols_are_free() {
        let ctx = quarter();
        for (p_in, p_out) in [
            (0.3, 0.26),
            (1.0, 0.0),
            (1.0, 0.4),
            (1.0, 0.1),
            (0.1, 0.2),
            (0.25, 0.25),
        ] {
            let c = classify_transition(p_in, p_out, &ctx).unwrap();
            let proto = synthesize_protocol(&c, p_in, p_out, &ctx).unwrap();
            assert!(proto.validate().is_valid());
            let init = QubitState::new(p_in).unwrap();
            assert!((final_state(&proto, init).p_excited() - p_out).abs() < 1e-12);
            let d = exact_work_distribution(&proto, init).unwrap();
            assert_eq!(d.prob_work_below(0.0), 0.0);
        }
        let reset = classify_transition(1.0, 0.0, &ctx).unwrap();
        let d = exact_work_distribution(
            &synthesize_protocol(&reset, 1.0, 0.0, &ctx).unwrap(),
            QubitState::excited(),
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        assert_relative_eq!(d.atoms()[0].0, ctx.e0(), epsilon = 1e-15);
        let up = synthesize_protocol(&classify_transition(1.0, 0.4, &ctx).unwrap(), 1.0, 0.4, &ctx).unwrap();
        assert_eq!(up.len(), 1);
        let forbidden = classify_transition(0.1, 0.3, &ctx).unwrap();
        assert!(synthesize_protocol(&forbidden, 0.1, 0.3, &ctx).is_err());
    }

    #[test]
    fn achievable_means_single_thermalization_reachable() {
        let ctx = quarter();
        for i in 0..50 {
            for j in 0..50 {
                let (p_in, p_out) = ((i as f64 + 0.5) / 50.0, (j as f64 + 0.5) / 50.0);
                let c = classify_transition(p_in, p_out, &ctx).unwrap();
                // Reachable by one partial thermalization at E_0 iff lambda in [0, 1] solves the mix.
                let pb = ctx.p_beta();
                let reachable = if p_in == pb {
                    p_out == pb
                } else {
                    (0.0..=1.0).contains(&((p_out - p_in) / (pb - p_in)))
                };
                assert_eq!(c.is_achievable(), reachable, "{p_in} {p_out}");
            }
        }
    }
}
