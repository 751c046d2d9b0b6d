//! Control sequences built from partial thermalizations (PT), level
//! transformations (LT) and bistochastic bit flips (BT).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::thermo::ThermalContext;

/// Absolute tolerance on `E_N == E_0`.
pub const CYCLE_TOLERANCE: f64 = 1e-9;
/// A BT with nonzero `gamma` must act at `|E| <= SWAP_ENERGY_TOLERANCE`.
pub const SWAP_ENERGY_TOLERANCE: f64 = 1e-9;
/// Level shifts smaller than this are treated as no-ops by [`Protocol::normalize`].
pub const NEGLIGIBLE_SHIFT: f64 = 1e-12;

/// One control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Step {
    /// `rho -> (1 - lambda) rho + lambda tau_E` at the current energy.
    #[serde(rename = "PT")]
    PartialThermalization { lambda: f64 },
    /// Shifts the excited level by `delta_e`; costs `delta_e` when occupied.
    #[serde(rename = "LT")]
    LevelTransformation { delta_e: f64 },
    /// Flips the populations with probability `gamma`.
    #[serde(rename = "BT")]
    BistochasticTransformation { gamma: f64 },
}

impl Step {
    pub fn pt(lambda: f64) -> Self {
        Step::PartialThermalization { lambda }
    }

    pub fn lt(delta_e: f64) -> Self {
        Step::LevelTransformation { delta_e }
    }

    pub fn bt(gamma: f64) -> Self {
        Step::BistochasticTransformation { gamma }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Step::PartialThermalization { .. } => "PT",
            Step::LevelTransformation { .. } => "LT",
            Step::BistochasticTransformation { .. } => "BT",
        }
    }

    fn is_noop(&self) -> bool {
        match *self {
            Step::PartialThermalization { lambda } => lambda == 0.0,
            Step::LevelTransformation { delta_e } => delta_e.abs() <= NEGLIGIBLE_SHIFT,
            Step::BistochasticTransformation { gamma } => gamma == 0.0,
        }
    }

    fn merge(&self, next: &Step) -> Option<Step> {
        match (*self, *next) {
            (Step::PartialThermalization { lambda: a }, Step::PartialThermalization { lambda: b }) => {
                Some(Step::pt(1.0 - (1.0 - a) * (1.0 - b)))
            }
            (Step::LevelTransformation { delta_e: a }, Step::LevelTransformation { delta_e: b }) => {
                Some(Step::lt(a + b))
            }
            (Step::BistochasticTransformation { gamma: a }, Step::BistochasticTransformation { gamma: b }) => {
                Some(Step::bt(a * (1.0 - b) + b * (1.0 - a)))
            }
            _ => None,
        }
    }

    /// True for steps that apply one of two maps at random
    /// (`0 < lambda < 1` or `0 < gamma < 1`).
    pub fn is_branching(&self) -> bool {
        match *self {
            Step::PartialThermalization { lambda } => lambda > 0.0 && lambda < 1.0,
            Step::BistochasticTransformation { gamma } => gamma > 0.0 && gamma < 1.0,
            Step::LevelTransformation { .. } => false,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Step::PartialThermalization { lambda } => write!(f, "PT({lambda})"),
            Step::LevelTransformation { delta_e } => write!(f, "LT({delta_e:+})"),
            Step::BistochasticTransformation { gamma } => write!(f, "BT({gamma})"),
        }
    }
}

/// A single reason a protocol is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the offending step, `None` for whole-protocol violations.
    pub step: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {i}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// A cyclic control sequence acting in a fixed thermal environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    ctx: ThermalContext,
    steps: Vec<Step>,
}

impl Protocol {
    /// Wraps the steps without validating them; see [`Protocol::validate`].
    pub fn new(ctx: ThermalContext, steps: Vec<Step>) -> Self {
        Self { ctx, steps }
    }

    /// Like [`Protocol::new`] but rejects protocols that fail validation.
    pub fn checked(ctx: ThermalContext, steps: Vec<Step>) -> Result<Self> {
        let proto = Self::new(ctx, steps);
        let report = proto.validate();
        if report.is_valid() {
            Ok(proto)
        } else {
            Err(Error::InvalidProtocol(report.to_string()))
        }
    }

    pub fn empty(ctx: ThermalContext) -> Self {
        Self::new(ctx, Vec::new())
    }

    pub fn ctx(&self) -> &ThermalContext {
        &self.ctx
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Excited-level energy before each step, followed by the final energy.
    pub fn energies(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut e = self.ctx.e0();
        out.push(e);
        for step in &self.steps {
            if let Step::LevelTransformation { delta_e } = *step {
                e += delta_e;
            }
            out.push(e);
        }
        out
    }

    pub fn branching_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.is_branching()).count()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut push = |step: Option<usize>, message: String| violations.push(Violation { step, message });
        let energies = self.energies();
        for (i, step) in self.steps.iter().enumerate() {
            match *step {
                Step::PartialThermalization { lambda } => {
                    if !(0.0..=1.0).contains(&lambda) {
                        push(Some(i), format!("lambda {lambda} outside [0, 1]"));
                    }
                }
                Step::LevelTransformation { delta_e } => {
                    if !delta_e.is_finite() {
                        push(Some(i), format!("delta_e {delta_e} is not finite"));
                    } else if !energies[i + 1].is_finite() {
                        push(Some(i), "energy trajectory overflows".to_string());
                    }
                }
                Step::BistochasticTransformation { gamma } => {
                    if !(0.0..=1.0).contains(&gamma) {
                        push(Some(i), format!("gamma {gamma} outside [0, 1]"));
                    } else if gamma > 0.0 && !(energies[i].abs() <= SWAP_ENERGY_TOLERANCE) {
                        push(
                            Some(i),
                            format!("bit flip at energy {} (levels must be degenerate)", energies[i]),
                        );
                    }
                }
            }
        }
        let last = *energies.last().expect("energies is never empty");
        if !((last - self.ctx.e0()).abs() <= CYCLE_TOLERANCE) {
            push(
                None,
                format!("not cyclic: final energy {last} differs from e0 = {}", self.ctx.e0()),
            );
        }
        ValidationReport { violations }
    }

    /// Merges adjacent steps of the same kind and drops steps with no effect,
    /// until a fixed point is reached. The final state and the law of the work
    /// are unchanged.
    pub fn normalize(&self) -> Protocol {
        let mut steps: Vec<Step> = self.steps.clone();
        loop {
            let mut out: Vec<Step> = Vec::with_capacity(steps.len());
            let mut changed = false;
            for step in steps.iter().copied() {
                if step.is_noop() {
                    changed = true;
                    continue;
                }
                if let Some(merged) = out.last().and_then(|prev| prev.merge(&step)) {
                    *out.last_mut().unwrap() = merged;
                    changed = true;
                } else {
                    out.push(step);
                }
            }
            steps = out;
            if !changed {
                break;
            }
        }
        Protocol::new(self.ctx, steps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProtocolFile::from(self)).expect("protocol serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProtocolFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }
}

/// On-disk form of a protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolFile {
    pub beta: f64,
    pub e0: f64,
    pub steps: Vec<Step>,
}

impl From<&Protocol> for ProtocolFile {
    fn from(p: &Protocol) -> Self {
        Self {
            beta: p.ctx.beta(),
            e0: p.ctx.e0(),
            steps: p.steps.clone(),
        }
    }
}

impl TryFrom<ProtocolFile> for Protocol {
    type Error = Error;

    fn try_from(file: ProtocolFile) -> Result<Self> {
        let ctx = ThermalContext::new(file.beta, file.e0)?;
        Ok(Protocol::new(ctx, file.steps))
    }
}

/// Raise the level to `E(p_in)`, descend to `E(p_out)` in `n_stage2` equal
/// shifts each followed by a full thermalization, then return to `E_0`.
/// Its mean work tends to `F(rho, E_0) - F(sigma, E_0)` as `n_stage2` grows.
pub fn build_average_work_protocol(p_in: f64, p_out: f64, ctx: ThermalContext, n_stage2: usize) -> Result<Protocol> {
    if n_stage2 == 0 {
        return domain("n_stage2 must be at least 1");
    }
    let e_in = ctx.energy_of_population(p_in)?;
    let e_out = ctx.energy_of_population(p_out)?;
    let delta = (e_out - e_in) / n_stage2 as f64;
    let mut steps = Vec::with_capacity(2 * n_stage2 + 2);
    steps.push(Step::lt(e_in - ctx.e0()));
    let mut e = ctx.e0() + (e_in - ctx.e0());
    for _ in 0..n_stage2 {
        steps.push(Step::lt(delta));
        steps.push(Step::pt(1.0));
        e += delta;
    }
    // Close the cycle against the accumulated energy, not the nominal E(p_out).
    steps.push(Step::lt(ctx.e0() - e));
    Protocol::checked(ctx, steps)
}

/// `LT(e_contact - E_0), PT(lambda), LT(E_0 - e_contact)`.
pub fn build_thermalize_once(e_contact: f64, lambda: f64, ctx: ThermalContext) -> Result<Protocol> {
    crate::error::ensure_finite("e_contact", e_contact)?;
    crate::error::ensure_probability("lambda", lambda)?;
    let down = e_contact - ctx.e0();
    let e = ctx.e0() + down;
    Protocol::checked(ctx, vec![Step::lt(down), Step::pt(lambda), Step::lt(ctx.e0() - e)])
}

/// Lower the level to zero, flip, raise it back. Maps the excited state to the
/// ground state while extracting `E_0` of work.
pub fn build_pure_excited_reset(ctx: ThermalContext) -> Protocol {
    Protocol::new(ctx, vec![Step::lt(-ctx.e0()), Step::bt(1.0), Step::lt(ctx.e0())])
}

/// Deterministic pseudo-random valid protocol for property tests.
///
/// Flips are only emitted right after a shift that lands exactly on zero, and
/// a closing shift returns the level to `E_0`.
pub fn random_protocol(seed: u64, max_steps: usize, energy_range: (f64, f64), ctx: ThermalContext) -> Protocol {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_steps = max_steps.max(1);
    let n = rng.gen_range(1..=max_steps);
    let (lo, hi) = if energy_range.0 <= energy_range.1 {
        energy_range
    } else {
        (energy_range.1, energy_range.0)
    };
    let mut steps = Vec::with_capacity(n + 2);
    let mut e = ctx.e0();
    for _ in 0..n {
        let r: f64 = rng.gen();
        if r < 0.4 {
            let lambda = if rng.gen_bool(0.15) { 1.0 } else { rng.gen::<f64>() };
            steps.push(Step::pt(lambda));
        } else if r < 0.8 || lo > 0.0 || hi < 0.0 {
            let target = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            let delta = target - e;
            steps.push(Step::lt(delta));
            e += delta;
        } else {
            let delta = -e;
            steps.push(Step::lt(delta));
            e += delta;
            let gamma = if rng.gen_bool(0.3) { 1.0 } else { rng.gen::<f64>() };
            steps.push(Step::bt(gamma));
        }
    }
    if e != ctx.e0() {
        steps.push(Step::lt(ctx.e0() - e));
    }
    Protocol::new(ctx, steps)
}
