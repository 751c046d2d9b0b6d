//! Resolved paths of a protocol.
//!
//! Every PT step either leaves the state alone (identity, probability
//! `1 - lambda`) or replaces it by the Gibbs state (probability `lambda`);
//! every BT step either does nothing or swaps the levels. Fixing all of
//! these choices gives a path, and a protocol is the weighted mixture of its
//! paths.

use std::fmt::Write as _;

use crate::engine::{JointLaw, Kernel, WorkDistribution, DEFAULT_ATOM_CAP};
use crate::error::{domain, Error, Result};
use crate::format::g17;
use crate::protocol::{Protocol, Step, NEGLIGIBLE_SHIFT};
use crate::thermo::{QubitState, ThermalContext};

/// Maximum number of random steps accepted by [`enumerate_paths`].
pub const MAX_PATH_BRANCHES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    /// Level shift by the given energy.
    Shift(f64),
    Identity,
    Gibbs,
    Swap,
}

impl Element {
    pub fn tag(&self) -> &'static str {
        match self {
            Element::Shift(_) => "LT",
            Element::Identity => "I",
            Element::Gibbs => "G",
            Element::Swap => "S",
        }
    }
}

/// One resolved branch of a protocol, or a piece of one.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub ctx: ThermalContext,
    pub start_energy: f64,
    pub elements: Vec<Element>,
    pub weight: f64,
}

impl Path {
    pub fn new(ctx: ThermalContext, start_energy: f64, elements: Vec<Element>, weight: f64) -> Self {
        Self {
            ctx,
            start_energy,
            elements,
            weight,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn end_energy(&self) -> f64 {
        self.energies().last().copied().unwrap_or(self.start_energy)
    }

    /// Energy after each element, preceded by the start energy.
    pub fn energies(&self) -> Vec<f64> {
        let mut e = self.start_energy;
        let mut out = Vec::with_capacity(self.elements.len() + 1);
        out.push(e);
        for el in &self.elements {
            if let Element::Shift(d) = el {
                e += d;
            }
            out.push(e);
        }
        out
    }

    pub fn increments(&self) -> Vec<f64> {
        self.elements
            .iter()
            .filter_map(|el| match el {
                Element::Shift(d) => Some(*d),
                _ => None,
            })
            .collect()
    }

    /// Non-shift elements in order.
    pub fn choices(&self) -> Vec<Element> {
        self.elements
            .iter()
            .copied()
            .filter(|el| !matches!(el, Element::Shift(_)))
            .collect()
    }

    pub fn count(&self, kind: Element) -> usize {
        self.elements
            .iter()
            .filter(|el| std::mem::discriminant(*el) == std::mem::discriminant(&kind))
            .count()
    }

    fn kernels(&self) -> Vec<Kernel> {
        let mut e = self.start_energy;
        let mut out = Vec::with_capacity(self.elements.len());
        for el in &self.elements {
            match *el {
                Element::Shift(d) => {
                    e += d;
                    out.push(Kernel::Shift(d));
                }
                Element::Identity => {}
                Element::Gibbs => out.push(Kernel::Thermalize {
                    lambda: 1.0,
                    population: self.ctx.g(e),
                }),
                Element::Swap => out.push(Kernel::Flip { gamma: 1.0 }),
            }
        }
        out
    }

    /// CSV dump with columns `segment,e_from,e_to,level_q,tag,area`, starting
    /// from excited population `q0`.
    pub fn to_csv(&self, q0: f64) -> String {
        let mut out = String::from("segment,e_from,e_to,level_q,tag,area\n");
        for seg in trace(self, q0) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                seg.index,
                g17(seg.e_from),
                g17(seg.e_to),
                g17(seg.level_q),
                seg.tag,
                g17(seg.area)
            );
        }
        out
    }
}

/// All paths of `proto`, ordered so that the first random step varies fastest.
pub fn enumerate_paths(proto: &Protocol) -> Result<Vec<Path>> {
    let k = proto.steps().iter().filter(|s| s.is_branching()).count();
    if k > MAX_PATH_BRANCHES {
        return Err(Error::Resource(format!(
            "{k} random steps exceed the path enumeration limit of {MAX_PATH_BRANCHES}"
        )));
    }
    let ctx = *proto.ctx();
    let mut paths = Vec::with_capacity(1 << k);
    for mask in 0u64..(1u64 << k) {
        let mut elements = Vec::with_capacity(proto.len());
        let mut weight = 1.0;
        let mut bit = 0;
        for step in proto.steps() {
            let active = if step.is_branching() {
                let on = mask >> bit & 1 == 1;
                bit += 1;
                on
            } else {
                false
            };
            match *step {
                Step::LevelTransformation { delta_e } => elements.push(Element::Shift(delta_e)),
                Step::PartialThermalization { lambda } => {
                    let gibbs = if step.is_branching() { active } else { lambda == 1.0 };
                    if step.is_branching() {
                        weight *= if gibbs { lambda } else { 1.0 - lambda };
                    }
                    elements.push(if gibbs { Element::Gibbs } else { Element::Identity });
                }
                Step::BistochasticTransformation { gamma } => {
                    let swap = if step.is_branching() { active } else { gamma == 1.0 };
                    if step.is_branching() {
                        weight *= if swap { gamma } else { 1.0 - gamma };
                    }
                    elements.push(if swap { Element::Swap } else { Element::Identity });
                }
            }
        }
        if weight > 0.0 {
            paths.push(Path::new(ctx, ctx.e0(), elements, weight));
        }
    }
    Ok(paths)
}

/// Canonical form of a path with the same conditional work law: identities
/// removed, adjacent shifts glued, negligible shifts dropped, swap pairs
/// cancelled, and tags adjacent to a thermalization absorbed into it.
pub fn shrink(path: &Path) -> Path {
    let mut elements = path.elements.clone();
    loop {
        let mut out: Vec<Element> = Vec::with_capacity(elements.len());
        for el in elements.iter().copied() {
            match (out.last().copied(), el) {
                (_, Element::Identity) => {}
                (_, Element::Shift(d)) if d.abs() <= NEGLIGIBLE_SHIFT => {}
                (Some(Element::Shift(a)), Element::Shift(b)) => {
                    let sum = a + b;
                    out.pop();
                    if sum.abs() > NEGLIGIBLE_SHIFT {
                        out.push(Element::Shift(sum));
                    }
                }
                (Some(Element::Swap), Element::Swap) => {
                    out.pop();
                }
                (Some(Element::Swap), Element::Gibbs) => {
                    out.pop();
                    out.push(Element::Gibbs);
                }
                (Some(Element::Gibbs), Element::Gibbs | Element::Swap) => {}
                _ => out.push(el),
            }
        }
        if out == elements {
            break;
        }
        elements = out;
    }
    Path::new(path.ctx, path.start_energy, elements, path.weight)
}

/// A path split at its first and last thermalization.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDecomposition {
    /// Up to and including the first thermalization.
    pub stage1: Path,
    /// After the first thermalization, up to and including the last.
    pub stage2: Path,
    /// After the last thermalization.
    pub stage3: Path,
    /// Energy at the first thermalization.
    pub e_a: f64,
    /// Energy at the last thermalization.
    pub e_b: f64,
    /// Free-energy changes `F(E_a) - F(E_start)`, `F(E_b) - F(E_a)`, `F(E_end) - F(E_b)`.
    pub delta_f: [f64; 3],
}

impl StageDecomposition {
    pub fn has_thermalization(&self) -> bool {
        self.stage1.elements.last() == Some(&Element::Gibbs)
    }

    /// Area between the stage II path and the Gibbs curve.
    pub fn stage2_area(&self) -> f64 {
        area_between(&self.stage2, self.stage2.ctx.g(self.e_a)).total
    }

    /// Exact law of the stage II work, started on the Gibbs curve at `E_a`.
    pub fn stage2_work(&self) -> Result<WorkDistribution> {
        path_work_distribution(&self.stage2, QubitState::clamped(self.stage2.ctx.g(self.e_a)))
    }
}

pub fn decompose_stages(path: &Path) -> StageDecomposition {
    let energies = path.energies();
    let gibbs: Vec<usize> = path
        .elements
        .iter()
        .enumerate()
        .filter(|(_, el)| **el == Element::Gibbs)
        .map(|(i, _)| i)
        .collect();
    let n = path.elements.len();
    let (cut1, cut2) = match (gibbs.first(), gibbs.last()) {
        (Some(&f), Some(&l)) => (f + 1, l + 1),
        _ => (n, n),
    };
    let sub =
        |from: usize, to: usize| Path::new(path.ctx, energies[from], path.elements[from..to].to_vec(), path.weight);
    let (e_a, e_b, e_end) = (energies[cut1], energies[cut2], energies[n]);
    let ctx = path.ctx;
    StageDecomposition {
        stage1: sub(0, cut1),
        stage2: sub(cut1, cut2),
        stage3: sub(cut2, n),
        e_a,
        e_b,
        delta_f: [
            ctx.integral(path.start_energy, e_a),
            ctx.integral(e_a, e_b),
            ctx.integral(e_b, e_end),
        ],
    }
}

/// One element of a traced path.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub e_from: f64,
    pub e_to: f64,
    /// Excited population carried along a shift, or the population after a tag.
    pub level_q: f64,
    pub tag: &'static str,
    /// Area between the horizontal segment and the Gibbs curve; zero for tags.
    pub area: f64,
}

fn trace(path: &Path, q0: f64) -> Vec<Segment> {
    let ctx = &path.ctx;
    let mut e = path.start_energy;
    let mut q = q0;
    path.elements
        .iter()
        .enumerate()
        .map(|(index, el)| {
            let e_from = e;
            let mut area = 0.0;
            match *el {
                Element::Shift(d) => {
                    e += d;
                    area = (ctx.integral(e_from, e) - q * (e - e_from)).abs();
                }
                Element::Gibbs => q = ctx.g(e),
                Element::Swap => q = 1.0 - q,
                Element::Identity => {}
            }
            Segment {
                index,
                e_from,
                e_to: e,
                level_q: q,
                tag: el.tag(),
                area,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaReport {
    pub total: f64,
    /// Shift segments only.
    pub segments: Vec<Segment>,
}

/// Area between the horizontal pieces of `path` and the Gibbs curve, with the
/// excited population starting at `q0`: for a shift at level `q` over
/// `[E_i, E_{i+1}]`, `A_i = |F(E_{i+1}) - F(E_i) - q (E_{i+1} - E_i)|`.
pub fn area_between(path: &Path, q0: f64) -> AreaReport {
    let segments: Vec<Segment> = trace(path, q0).into_iter().filter(|s| s.tag == "LT").collect();
    AreaReport {
        total: segments.iter().map(|s| s.area).sum(),
        segments,
    }
}

/// Whether `g(E) - q` changes sign strictly inside the segment, probed at
/// `probes` interior points.
pub fn crosses_gibbs_curve(ctx: &ThermalContext, seg: &Segment, probes: usize) -> bool {
    let mut sign = 0.0;
    for k in 1..=probes {
        let t = k as f64 / (probes + 1) as f64;
        let e = seg.e_from + t * (seg.e_to - seg.e_from);
        let diff = ctx.g(e) - seg.level_q;
        if diff.abs() < 1e-15 {
            continue;
        }
        if sign * diff < 0.0 {
            return true;
        }
        sign = diff.signum();
    }
    false
}

/// Exact work law conditional on the path, from the given initial state.
pub fn path_work_distribution(path: &Path, initial: QubitState) -> Result<WorkDistribution> {
    let mut law = JointLaw::new(initial, DEFAULT_ATOM_CAP);
    for kernel in path.kernels() {
        law.apply(kernel)?;
    }
    Ok(law.work_distribution())
}

/// Stage III work-loss margin for an endpoint above the Gibbs population:
/// `-E(q) + E_0 + ln((1 + e^{-beta E_0}) / (1 + e^{-beta E(q)})) / beta`.
pub fn epsilon_iii(q_out: f64, ctx: &ThermalContext) -> Result<f64> {
    let e = open_energy(q_out, ctx)?;
    Ok(-e + ctx.e0() + (ctx.ln_z(ctx.e0()) - ctx.ln_z(e)) / ctx.beta())
}

/// Mirror of [`epsilon_iii`] for an endpoint below the Gibbs population:
/// `E(q) - E_0 + ln((1 + e^{-beta E_0}) / (1 + e^{-beta E(q)})) / beta`.
pub fn epsilon_iii_tilde(q_out: f64, ctx: &ThermalContext) -> Result<f64> {
    let e = open_energy(q_out, ctx)?;
    Ok(e - ctx.e0() + (ctx.ln_z(ctx.e0()) - ctx.ln_z(e)) / ctx.beta())
}

fn open_energy(q: f64, ctx: &ThermalContext) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("population must lie in (0, 1), got {q}"));
    }
    Ok(ctx.energy_unchecked(q))
}

/// Random swap-free or swap-bearing shrunk path: a first shift to the contact
/// energy, `n_hops` thermalized hops inside `energy_range`, then a return to
/// `E_0`. With probability `swap_prob` a hop goes through a swap at zero.
pub fn random_path(seed: u64, n_hops: usize, energy_range: (f64, f64), swap_prob: f64, ctx: ThermalContext) -> Path {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = energy_range;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let mut elements = Vec::new();
    let mut e = ctx.e0();
    let first = draw(&mut rng);
    elements.push(Element::Shift(first - e));
    e += first - e;
    elements.push(Element::Gibbs);
    for _ in 0..n_hops.max(1) {
        if rng.gen::<f64>() < swap_prob && e != 0.0 {
            elements.push(Element::Shift(-e));
            elements.push(Element::Swap);
            let target = draw(&mut rng);
            elements.push(Element::Shift(target));
            e = target;
        } else {
            let target = draw(&mut rng);
            elements.push(Element::Shift(target - e));
            e += target - e;
        }
        elements.push(Element::Gibbs);
    }
    elements.push(Element::Shift(ctx.e0() - e));
    shrink(&Path::new(ctx, ctx.e0(), elements, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{exact_work_distribution, final_state, total_variation};
    use crate::protocol::{build_average_work_protocol, random_protocol};
    use approx::assert_relative_eq;

    fn ln3() -> ThermalContext {
        ThermalContext::new(1.0, 3f64.ln()).unwrap()
    }

    #[test]
    fn enumerate_two_thermalizations() {
        let ctx = ln3();
        let p = Protocol::new(ctx, vec![Step::pt(0.3), Step::pt(0.6)]);
        let paths = enumerate_paths(&p).unwrap();
        let w: Vec<f64> = paths.iter().map(|p| p.weight).collect();
        let expect = [0.4 * 0.7, 0.4 * 0.3, 0.6 * 0.7, 0.6 * 0.3];
        for (a, b) in w.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(paths[1].elements, vec![Element::Gibbs, Element::Identity]);
        let all = Protocol::new(ctx, vec![Step::pt(1.0), Step::lt(1.0), Step::pt(1.0), Step::lt(-1.0)]);
        let paths = enumerate_paths(&all).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].weight, 1.0);
        let many = Protocol::new(ctx, vec![Step::pt(0.5); 25]);
        assert!(matches!(enumerate_paths(&many), Err(Error::Resource(_))));
    }

    #[test]
    fn enumeration_weights_and_final_states() {
        let ctx = ThermalContext::new(0.7, 1.1).unwrap();
        for seed in 0..100 {
            let p = random_protocol(seed, 8, (-2.0, 3.0), ctx);
            let paths = enumerate_paths(&p).unwrap();
            let total: f64 = paths.iter().map(|p| p.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let init = QubitState::new(0.35).unwrap();
            let mixed: f64 = paths
                .iter()
                .map(|path| {
                    let law = path_work_distribution_with_state(path, init);
                    path.weight * law
                })
                .sum();
            assert!((mixed - final_state(&p, init).p_excited()).abs() < 1e-12);
        }
    }

    fn path_work_distribution_with_state(path: &Path, init: QubitState) -> f64 {
        let mut law = JointLaw::new(init, DEFAULT_ATOM_CAP);
        for k in path.kernels() {
            law.apply(k).unwrap();
        }
        law.excited_population()
    }

    #[test]
    fn shrink_examples() {
        let ctx = ln3();
        let p = Path::new(
            ctx,
            ctx.e0(),
            vec![
                Element::Shift(0.4),
                Element::Identity,
                Element::Shift(0.7),
                Element::Gibbs,
            ],
            1.0,
        );
        let s = shrink(&p);
        assert_eq!(s.elements.len(), 2);
        assert_relative_eq!(s.increments()[0], 1.1, epsilon = 1e-15);
        assert_eq!(s.elements[1], Element::Gibbs);

        let zero = ThermalContext::new(1.0, 0.0).unwrap();
        let p = Path::new(
            zero,
            0.0,
            vec![Element::Shift(0.0), Element::Swap, Element::Shift(0.0), Element::Swap],
            1.0,
        );
        assert!(shrink(&p).is_empty());
        assert!(shrink(&Path::new(ctx, 0.0, vec![], 1.0)).is_empty());
    }

    #[test]
    fn shrinking_preserves_work_laws() {
        let ctx = ThermalContext::new(1.3, 0.8).unwrap();
        for seed in 0..80 {
            let p = random_protocol(seed, 8, (-2.0, 3.0), ctx);
            for path in enumerate_paths(&p).unwrap() {
                let s = shrink(&path);
                for q in [0.0, 0.3, 1.0] {
                    let init = QubitState::new(q).unwrap();
                    let a = path_work_distribution(&path, init).unwrap();
                    let b = path_work_distribution(&s, init).unwrap();
                    assert!(total_variation(&a, &b) <= 1e-12, "seed {seed}");
                }
                // Shrunk paths alternate shifts and tags.
                for pair in s.elements.windows(2) {
                    let shift = |e: &Element| matches!(e, Element::Shift(_));
                    assert!(shift(&pair[0]) != shift(&pair[1]), "{:?}", s.elements);
                }
                assert_eq!(s.count(Element::Identity), 0);
            }
        }
    }

    #[test]
    fn mixture_of_paths_is_the_protocol() {
        let ctx = ln3();
        for seed in 0..100 {
            let p = random_protocol(seed, 6, (-1.5, 2.5), ctx);
            let init = QubitState::new(0.2).unwrap();
            let paths = enumerate_paths(&p).unwrap();
            let laws: Vec<WorkDistribution> = paths
                .iter()
                .map(|path| path_work_distribution(path, init).unwrap())
                .collect();
            let mix = WorkDistribution::mixture(paths.iter().map(|p| p.weight).zip(laws.iter()));
            let exact = exact_work_distribution(&p, init).unwrap();
            assert!(total_variation(&mix, &exact) <= 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn single_shift_path() {
        let ctx = ln3();
        let d = path_work_distribution(
            &Path::new(ctx, ctx.e0(), vec![Element::Shift(0.7)], 1.0),
            QubitState::new(0.3).unwrap(),
        )
        .unwrap();
        assert_eq!(d.atoms(), &[(-0.7, 0.3), (0.0, 0.7)]);
        // One thermalized hop: variance q(1 - q) delta^2.
        let hop = Path::new(ctx, 1.0, vec![Element::Shift(0.5), Element::Gibbs], 1.0);
        let q = ctx.g(1.0);
        let d = path_work_distribution(&hop, QubitState::new(q).unwrap()).unwrap();
        assert_relative_eq!(d.variance(), q * (1.0 - q) * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn stage_examples() {
        let ctx = ln3();
        let p = Path::new(
            ctx,
            ctx.e0(),
            vec![
                Element::Shift(0.5),
                Element::Gibbs,
                Element::Shift(-0.2),
                Element::Gibbs,
                Element::Shift(-0.3),
            ],
            1.0,
        );
        let s = decompose_stages(&p);
        assert_eq!(s.stage1.elements, vec![Element::Shift(0.5), Element::Gibbs]);
        assert_eq!(s.stage2.elements, vec![Element::Shift(-0.2), Element::Gibbs]);
        assert_eq!(s.stage3.elements, vec![Element::Shift(-0.3)]);
        assert!(s.delta_f.iter().sum::<f64>().abs() < 1e-12);

        let plain = Path::new(ctx, ctx.e0(), vec![Element::Shift(1.0), Element::Shift(-1.0)], 1.0);
        let s = decompose_stages(&plain);
        assert_eq!(s.stage1, plain);
        assert!(s.stage2.is_empty() && s.stage3.is_empty());
        assert!(!s.has_thermalization());

        let avg = build_average_work_protocol(0.1, 0.3, ctx, 10).unwrap();
        let paths = enumerate_paths(&avg).unwrap();
        assert_eq!(paths.len(), 1);
        let s = decompose_stages(&shrink(&paths[0]));
        assert_eq!(s.stage3.elements.len(), 1);
        assert_eq!(s.stage3.elements, vec![Element::Shift(avg_last(&avg))]);
    }

    fn avg_last(p: &Protocol) -> f64 {
        match p.steps().last() {
            Some(Step::LevelTransformation { delta_e }) => *delta_e,
            _ => panic!(),
        }
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn area_examples() {
        let ctx = ThermalContext::new(1.0, 3f64.ln()).unwrap();
        let flat = Path::new(ctx, 0.3, vec![Element::Shift(0.0)], 1.0);
        assert_eq!(area_between(&flat, 0.2).total, 0.0);
        let seg = Path::new(ctx, 0.0, vec![Element::Shift(3f64.ln())], 1.0);
        let a = area_between(&seg, 0.5).total;
        assert_relative_eq!(a, (1.5f64.ln() - 0.5 * 3f64.ln()).abs(), epsilon = 1e-15);
        assert_relative_eq!(a, 0.1438, epsilon = 1e-4);
        let quad = simpson(&|e| 0.5 - ctx.g(e), 0.0, 3f64.ln(), 2000);
        assert_relative_eq!(a, quad, epsilon = 1e-12);
    }

    #[test]
    fn areas_against_quadrature() {
        let ctx = ThermalContext::new(0.6, 1.0).unwrap();
        for seed in 0..50 {
            let path = random_path(seed, 4, (-3.0, 4.0), 0.4, ctx);
            let report = area_between(&path, 0.3);
            for s in &report.segments {
                let quad = simpson(&|e| ctx.g(e) - s.level_q, s.e_from, s.e_to, 4000).abs();
                assert!((quad - s.area).abs() < 1e-9, "{quad} vs {}", s.area);
            }
        }
    }

    #[test]
    fn segments_after_thermalization_stay_on_one_side() {
        let ctx = ThermalContext::new(1.0, 0.5).unwrap();
        for seed in 0..100 {
            let path = random_path(seed, 5, (-2.0, 3.0), 0.0, ctx);
            let segs = trace(&path, 0.1);
            for w in segs.windows(2) {
                if w[0].tag == "G" && w[1].tag == "LT" {
                    assert!(!crosses_gibbs_curve(&ctx, &w[1], 64));
                }
            }
        }
    }

    #[test]
    fn mean_area_identity() {
        let ctx = ThermalContext::new(1.0, 3f64.ln()).unwrap();
        for seed in 0..100 {
            let path = random_path(seed, 6, (-2.0, 4.0), 0.0, ctx);
            let s = decompose_stages(&path);
            let w = s.stage2_work().unwrap();
            assert!((w.mean() + s.delta_f[1] + s.stage2_area()).abs() < 1e-9);
        }
    }

    #[test]
    fn epsilon_examples() {
        let ctx = ln3();
        assert!(epsilon_iii(0.25, &ctx).unwrap().abs() < 1e-15);
        assert!(epsilon_iii_tilde(0.25, &ctx).unwrap().abs() < 1e-15);
        assert_relative_eq!(epsilon_iii(0.5, &ctx).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let tilde = epsilon_iii_tilde(0.125, &ctx).unwrap();
        assert_relative_eq!(tilde, (7.0f64 / 3.0).ln() + (7.0f64 / 6.0).ln(), epsilon = 1e-14);
        assert!(epsilon_iii(0.0, &ctx).is_err());
        assert!(epsilon_iii_tilde(1.0, &ctx).is_err());
        for k in 1..=1000 {
            let up = 0.25 + 0.25 * k as f64 / 1000.0;
            assert!(epsilon_iii(up, &ctx).unwrap() > 0.0);
            let down = 0.25 * k as f64 / 1001.0;
            assert!(epsilon_iii_tilde(down, &ctx).unwrap() > 0.0);
        }
    }

    #[test]
    fn csv_dump() {
        let ctx = ThermalContext::new(1.0, 0.0).unwrap();
        let p = Path::new(
            ctx,
            0.0,
            vec![Element::Shift(1.0), Element::Gibbs, Element::Shift(-1.0)],
            1.0,
        );
        let csv = p.to_csv(0.5);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "segment,e_from,e_to,level_q,tag,area");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,1,1,") && lines[2].contains(",G,0"));
    }
}
