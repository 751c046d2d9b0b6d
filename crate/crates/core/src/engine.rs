//! Exact and sampled evaluation of protocols.
//!
//! The work done in a level transformation is `-delta_e` when the excited
//! level is occupied and zero otherwise; positive work is work extracted.
//! The exact solver propagates the joint law of (occupation, accumulated
//! work) step by step, merging work values that agree to within
//! [`WORK_MERGE_TOLERANCE`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::g17;
use crate::protocol::{Protocol, Step};
use crate::thermo::{QubitState, ThermalContext};

/// Work values closer than this are treated as one atom.
pub const WORK_MERGE_TOLERANCE: f64 = 1e-10;
/// Default cap on the number of (work, occupation) atoms in the exact solver.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;
/// Maximum number of random steps accepted by the brute-force enumerator.
pub const BRUTE_FORCE_MAX_BRANCHES: usize = 20;

/// A finitely supported law of the work.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    atoms: Vec<(f64, f64)>,
    mean: f64,
    variance: f64,
}

impl WorkDistribution {
    pub fn point_mass(work: f64) -> Self {
        Self::from_atoms(vec![(work, 1.0)])
    }

    /// Builds a distribution from unsorted `(work, probability)` pairs,
    /// merging near-equal work values and dropping zero-mass atoms.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        let mut anchor = f64::NEG_INFINITY;
        for (w, p) in atoms {
            if p == 0.0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if w - anchor < WORK_MERGE_TOLERANCE => last.1 += p,
                _ => {
                    anchor = w;
                    merged.push((w, p));
                }
            }
        }
        let mean: f64 = merged.iter().map(|(w, p)| w * p).sum();
        let variance: f64 = merged.iter().map(|(w, p)| p * (w - mean) * (w - mean)).sum();
        Self {
            atoms: merged,
            mean,
            variance: variance.max(0.0),
        }
    }

    /// `(work, probability)` sorted by increasing work.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `P(W <= threshold)` with a `1e-12` slack on the threshold.
    pub fn prob_work_at_most(&self, threshold: f64) -> f64 {
        let cut = threshold + 1e-12;
        self.atoms
            .iter()
            .take_while(|a| a.0 <= cut)
            .map(|a| a.1)
            .sum::<f64>()
            .min(1.0)
    }

    /// `P(W < threshold)`, strict, with the same slack as
    /// [`WorkDistribution::prob_work_at_most`].
    pub fn prob_work_below(&self, threshold: f64) -> f64 {
        let cut = threshold - 1e-12;
        self.atoms.iter().take_while(|a| a.0 < cut).map(|a| a.1).sum()
    }

    /// Mixture `sum_k weight_k * dist_k`.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a WorkDistribution)>) -> Self {
        let atoms = parts
            .into_iter()
            .flat_map(|(w, d)| d.atoms.iter().map(move |&(x, p)| (x, w * p)))
            .collect();
        Self::from_atoms(atoms)
    }

    /// CSV with header `work,probability`, ascending work, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("work,probability\n");
        for &(w, p) in &self.atoms {
            out.push_str(&g17(w));
            out.push(',');
            out.push_str(&g17(p));
            out.push('\n');
        }
        out
    }
}

/// Total-variation distance between two work laws, with atoms matched at
/// [`WORK_MERGE_TOLERANCE`].
pub fn total_variation(a: &WorkDistribution, b: &WorkDistribution) -> f64 {
    let (xa, xb) = (a.atoms(), b.atoms());
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < xa.len() || j < xb.len() {
        match (xa.get(i), xb.get(j)) {
            (Some(&(wa, pa)), Some(&(wb, pb))) if (wa - wb).abs() < WORK_MERGE_TOLERANCE => {
                sum += (pa - pb).abs();
                i += 1;
                j += 1;
            }
            (Some(&(wa, pa)), Some(&(wb, _))) if wa < wb => {
                sum += pa;
                i += 1;
            }
            (Some(_), Some(&(_, pb))) => {
                sum += pb;
                j += 1;
            }
            (Some(&(_, pa)), None) => {
                sum += pa;
                i += 1;
            }
            (None, Some(&(_, pb))) => {
                sum += pb;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    0.5 * sum
}

/// Kolmogorov-Smirnov distance `sup_x |F_a(x) - F_b(x)|` between two
/// discrete laws, evaluated at and just below every atom of either.
pub fn ks_statistic(a: &WorkDistribution, b: &WorkDistribution) -> f64 {
    let cdf = |d: &WorkDistribution, x: f64, inclusive: bool| -> f64 {
        d.atoms()
            .iter()
            .take_while(|&&(w, _)| {
                if inclusive {
                    w <= x + WORK_MERGE_TOLERANCE
                } else {
                    w < x - WORK_MERGE_TOLERANCE
                }
            })
            .map(|a| a.1)
            .sum()
    };
    a.atoms()
        .iter()
        .chain(b.atoms())
        .flat_map(|&(x, _)| {
            [
                (cdf(a, x, true) - cdf(b, x, true)).abs(),
                (cdf(a, x, false) - cdf(b, x, false)).abs(),
            ]
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at significance `alpha` for `n` samples.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// The stochastic action of a protocol step on the occupation bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    Shift(f64),
    /// With probability `lambda` the occupation is redrawn as Bernoulli(`population`).
    Thermalize {
        lambda: f64,
        population: f64,
    },
    /// With probability `gamma` the occupation is flipped.
    Flip {
        gamma: f64,
    },
}

pub(crate) fn compile(proto: &Protocol) -> Vec<Kernel> {
    let ctx = proto.ctx();
    let mut e = ctx.e0();
    proto
        .steps()
        .iter()
        .map(|step| match *step {
            Step::LevelTransformation { delta_e } => {
                e += delta_e;
                Kernel::Shift(delta_e)
            }
            Step::PartialThermalization { lambda } => Kernel::Thermalize {
                lambda,
                population: ctx.g(e),
            },
            Step::BistochasticTransformation { gamma } => Kernel::Flip { gamma },
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Atom {
    work: f64,
    mass: [f64; 2],
}

/// Joint law of accumulated work and occupation, propagated kernel by kernel.
#[derive(Debug, Clone)]
pub(crate) struct JointLaw {
    atoms: Vec<Atom>,
    cap: usize,
}

impl JointLaw {
    pub(crate) fn new(initial: QubitState, cap: usize) -> Self {
        let [g, e] = initial.populations();
        Self {
            atoms: vec![Atom {
                work: 0.0,
                mass: [g, e],
            }],
            cap,
        }
    }

    pub(crate) fn apply(&mut self, kernel: Kernel) -> Result<()> {
        match kernel {
            Kernel::Shift(delta) => {
                if delta != 0.0 {
                    self.shift(delta);
                }
            }
            Kernel::Thermalize { lambda, population } => {
                if lambda > 0.0 {
                    for a in &mut self.atoms {
                        let total = a.mass[0] + a.mass[1];
                        a.mass = [
                            (1.0 - lambda) * a.mass[0] + lambda * (1.0 - population) * total,
                            (1.0 - lambda) * a.mass[1] + lambda * population * total,
                        ];
                    }
                }
            }
            Kernel::Flip { gamma } => {
                if gamma > 0.0 {
                    for a in &mut self.atoms {
                        a.mass = [
                            (1.0 - gamma) * a.mass[0] + gamma * a.mass[1],
                            (1.0 - gamma) * a.mass[1] + gamma * a.mass[0],
                        ];
                    }
                }
            }
        }
        if self.atoms.len() > self.cap {
            return Err(Error::Resource(format!(
                "exact work distribution needs more than {} atoms; use Monte Carlo",
                self.cap
            )));
        }
        Ok(())
    }

    fn shift(&mut self, delta: f64) {
        let empty = self
            .atoms
            .iter()
            .filter(|a| a.mass[0] != 0.0)
            .map(|a| (a.work, 0usize, a.mass[0]));
        let full: Vec<(f64, usize, f64)> = self
            .atoms
            .iter()
            .filter(|a| a.mass[1] != 0.0)
            .map(|a| (a.work - delta, 1usize, a.mass[1]))
            .collect();
        let mut merged: Vec<Atom> = Vec::with_capacity(self.atoms.len() + full.len());
        let mut anchor = f64::NEG_INFINITY;
        let mut push = |(w, bit, m): (f64, usize, f64)| match merged.last_mut() {
            Some(last) if w - anchor < WORK_MERGE_TOLERANCE => last.mass[bit] += m,
            _ => {
                anchor = w;
                let mut mass = [0.0; 2];
                mass[bit] = m;
                merged.push(Atom { work: w, mass });
            }
        };
        // Both streams are sorted by work; merge them in order.
        let mut full = full.into_iter().peekable();
        for item in empty {
            while let Some(&next) = full.peek() {
                if next.0 < item.0 {
                    push(next);
                    full.next();
                } else {
                    break;
                }
            }
            push(item);
        }
        full.for_each(&mut push);
        self.atoms = merged;
    }

    pub(crate) fn excited_population(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass[1]).sum()
    }

    pub(crate) fn work_distribution(&self) -> WorkDistribution {
        WorkDistribution::from_atoms(self.atoms.iter().map(|a| (a.work, a.mass[0] + a.mass[1])).collect())
    }
}

/// Result of the exact solver.
#[derive(Debug, Clone)]
pub struct ExactOutcome {
    pub distribution: WorkDistribution,
    /// Occupation marginal of the joint law.
    pub final_state: QubitState,
}

/// Exact solver with a configurable atom cap.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolver {
    pub atom_cap: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self {
            atom_cap: DEFAULT_ATOM_CAP,
        }
    }
}

impl ExactSolver {
    pub fn solve(&self, proto: &Protocol, initial: QubitState) -> Result<ExactOutcome> {
        let mut law = JointLaw::new(initial, self.atom_cap);
        for kernel in compile(proto) {
            law.apply(kernel)?;
        }
        Ok(ExactOutcome {
            distribution: law.work_distribution(),
            final_state: QubitState::clamped(law.excited_population()),
        })
    }
}

pub fn exact_work_distribution(proto: &Protocol, initial: QubitState) -> Result<WorkDistribution> {
    ExactSolver::default().solve(proto, initial).map(|o| o.distribution)
}

/// Final state by direct application of the affine maps.
pub fn final_state(proto: &Protocol, initial: QubitState) -> QubitState {
    let mut p = initial.p_excited();
    for kernel in compile(proto) {
        match kernel {
            Kernel::Shift(_) => {}
            Kernel::Thermalize { lambda, population } => p = (1.0 - lambda) * p + lambda * population,
            Kernel::Flip { gamma } => p = (1.0 - gamma) * p + gamma * (1.0 - p),
        }
    }
    QubitState::clamped(p)
}

pub fn prob_work_at_most(dist: &WorkDistribution, threshold: f64) -> f64 {
    dist.prob_work_at_most(threshold)
}

/// Exhaustive enumeration of every occupation history; exponential in the
/// number of random steps and independent of the merging solver.
pub fn brute_force_work_distribution(proto: &Protocol, initial: QubitState) -> Result<WorkDistribution> {
    let kernels = compile(proto);
    let branches = kernels
        .iter()
        .filter(|k| match **k {
            Kernel::Thermalize { lambda, .. } => lambda > 0.0,
            Kernel::Flip { gamma } => gamma > 0.0 && gamma < 1.0,
            Kernel::Shift(_) => false,
        })
        .count();
    if branches > BRUTE_FORCE_MAX_BRANCHES {
        return Err(Error::Resource(format!(
            "{branches} random steps exceed the brute-force limit of {BRUTE_FORCE_MAX_BRANCHES}"
        )));
    }

    fn walk(kernels: &[Kernel], occupied: bool, work: f64, prob: f64, leaves: &mut Vec<(f64, f64)>) {
        if prob == 0.0 {
            return;
        }
        let Some((head, rest)) = kernels.split_first() else {
            leaves.push((work, prob));
            return;
        };
        match *head {
            Kernel::Shift(d) => walk(rest, occupied, if occupied { work - d } else { work }, prob, leaves),
            Kernel::Thermalize { lambda, population } => {
                if lambda == 0.0 {
                    walk(rest, occupied, work, prob, leaves);
                } else {
                    let stay = 1.0 - lambda;
                    let to_one = lambda * population + if occupied { stay } else { 0.0 };
                    let to_zero = lambda * (1.0 - population) + if occupied { 0.0 } else { stay };
                    walk(rest, true, work, prob * to_one, leaves);
                    walk(rest, false, work, prob * to_zero, leaves);
                }
            }
            Kernel::Flip { gamma } => {
                if gamma == 0.0 || gamma == 1.0 {
                    walk(rest, occupied != (gamma == 1.0), work, prob, leaves);
                } else {
                    walk(rest, !occupied, work, prob * gamma, leaves);
                    walk(rest, occupied, work, prob * (1.0 - gamma), leaves);
                }
            }
        }
    }

    let mut leaves = Vec::new();
    let p = initial.p_excited();
    walk(&kernels, true, 0.0, p, &mut leaves);
    walk(&kernels, false, 0.0, 1.0 - p, &mut leaves);
    Ok(WorkDistribution::from_atoms(leaves))
}

/// Sampled estimate of a protocol's work law and final state.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub distribution: WorkDistribution,
    pub final_state: QubitState,
    pub n_samples: usize,
    pub mean_std_error: f64,
    pub final_state_std_error: f64,
}

fn sample_trajectory(kernels: &[Kernel], p_initial: f64, rng: &mut ChaCha8Rng) -> (f64, bool) {
    let mut occupied = rng.gen::<f64>() < p_initial;
    let mut work = 0.0;
    for kernel in kernels {
        match *kernel {
            Kernel::Shift(d) => {
                if occupied {
                    work -= d;
                }
            }
            Kernel::Thermalize { lambda, population } => {
                if rng.gen::<f64>() < lambda {
                    occupied = rng.gen::<f64>() < population;
                }
            }
            Kernel::Flip { gamma } => {
                if rng.gen::<f64>() < gamma {
                    occupied = !occupied;
                }
            }
        }
    }
    (work, occupied)
}

/// Samples `n_samples` independent trajectories. Sample `i` draws from
/// ChaCha8 stream `i` of `seed`, so the result does not depend on how the
/// work is split across threads.
pub fn monte_carlo(proto: &Protocol, initial: QubitState, n_samples: usize, seed: u64) -> MonteCarloEstimate {
    let n_samples = n_samples.max(1);
    let kernels = compile(proto);
    let p0 = initial.p_excited();
    let samples: Vec<(f64, bool)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            sample_trajectory(&kernels, p0, &mut rng)
        })
        .collect();
    let n = n_samples as f64;
    let weight = 1.0 / n;
    let occupied = samples.iter().filter(|s| s.1).count() as f64 / n;
    let distribution = WorkDistribution::from_atoms(samples.iter().map(|s| (s.0, weight)).collect());
    MonteCarloEstimate {
        mean_std_error: (distribution.variance() / n).sqrt(),
        final_state_std_error: (occupied * (1.0 - occupied) / n).sqrt(),
        final_state: QubitState::clamped(occupied),
        distribution,
        n_samples,
    }
}

/// Work of a single resolved trajectory: `-sum delta_e` over shifts made while
/// the excited level is occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Occupation before the first step and after every step.
    pub occupations: Vec<bool>,
    pub work: f64,
}

/// Replays one sampled trajectory, recording the occupation at each step boundary.
pub fn sample_trajectory_detailed(proto: &Protocol, initial: QubitState, seed: u64, index: u64) -> Trajectory {
    let kernels = compile(proto);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut occupied = rng.gen::<f64>() < initial.p_excited();
    let mut occupations = vec![occupied];
    let mut work = 0.0;
    for kernel in &kernels {
        match *kernel {
            Kernel::Shift(d) => {
                if occupied {
                    work -= d;
                }
            }
            Kernel::Thermalize { lambda, population } => {
                if rng.gen::<f64>() < lambda {
                    occupied = rng.gen::<f64>() < population;
                }
            }
            Kernel::Flip { gamma } => {
                if rng.gen::<f64>() < gamma {
                    occupied = !occupied;
                }
            }
        }
        occupations.push(occupied);
    }
    Trajectory { occupations, work }
}

impl ThermalContext {
    /// Convenience: the exact work law of `proto` started in `initial`.
    pub fn work_law(&self, proto: &Protocol, initial: QubitState) -> Result<WorkDistribution> {
        exact_work_distribution(proto, initial)
    }
}
