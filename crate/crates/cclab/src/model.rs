//! Synthesis and audit of an explicit measurement-dependent common-cause
//! measure for two-wing singlet statistics.
//!
//! The space has one atom per `(setting pair, outcome pair, label)` with the
//! label marking membership of one cause event `C_<i><j>_<ab>` (or of none),
//! plus an optional null-preparation atom whose complement is `Lambda`.
//! Containment (`C ⊆ L_i ∧ R_j ∧ Λ`), cause disjointness and the block
//! partition of `Λ` hold by construction; the screening-off equalities and
//! relevance margins for each cause are produced by a seeded multi-start
//! feasibility solve, block by block (with singlet fidelity enforced, all
//! cross-block masses entering the ¬C equations are constants, so blocks
//! decouple).
//!
//! Causes are postulated for positively correlated outcome pairs. For a
//! non-positive pair no event inside its block can satisfy both screening
//! equalities: total covariance gives `|Corr| = s(1−s)·Δ_A·|Δ_B|`, and with
//! `C` confined to the block `G` this is bounded by
//! `max(p(A∧G)·p(B), p(B∧G)·p(A))`. Every excluded pair carries that bound
//! as a certificate, re-verified by the audit in exact arithmetic; an
//! all-pairs build mode exists and reports such pairs as infeasible instead
//! of silently relaxing them.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{self, ConditionReport};
use crate::dict::{
    key_c, key_l, key_la, key_r, key_rb, EventDict, ModelView, Spin, KEY_LAMBDA, SPINS,
};
use crate::prob::{Event, ProbSpace};
use crate::quantum::{singlet_joint, singlet_joint_in, Direction, SettingDistribution, NULL_ATOM};
use crate::rpcc::{self, CriterionReport};
use crate::scalar::Scalar;
use crate::solver::{self, hinge};
use crate::{Error, Result};

/// Tolerance for agreement between model conditionals and the singlet
/// oracle.
pub const FIDELITY_TOL: f64 = 1e-9;

/// Which outcome pairs receive a postulated cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairPolicy {
    /// Causes for positively correlated pairs; others carry certificates.
    PositiveOnly,
    /// Attempt every correlated pair; provably infeasible pairs abort the
    /// build with an infeasibility report.
    AllPairs,
}

/// Setting distribution specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiSpec {
    Uniform,
    Explicit { left: [f64; 3], right: [f64; 3] },
}

impl PiSpec {
    fn distribution<N: Scalar>(&self) -> Result<SettingDistribution<N>> {
        match self {
            PiSpec::Uniform => Ok(SettingDistribution::uniform()),
            PiSpec::Explicit { left, right } => {
                let lift = |side: &[f64; 3]| -> Result<[N; 3]> {
                    Ok([
                        N::lift_f64(side[0])?,
                        N::lift_f64(side[1])?,
                        N::lift_f64(side[2])?,
                    ])
                };
                SettingDistribution::new(lift(left)?, lift(right)?)
            }
        }
    }

    fn as_f64(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            PiSpec::Uniform => ([1.0 / 3.0; 3], [1.0 / 3.0; 3]),
            PiSpec::Explicit { left, right } => (*left, *right),
        }
    }
}

/// Parameters of a model build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub angles_deg: [f64; 3],
    pub pi: PiSpec,
    pub null_mass: f64,
    pub seed: u64,
    /// Acceptance bound for the cleared screening residuals of the solve.
    pub tol: f64,
    /// Strictness margin for the relevance inequalities.
    pub margin: f64,
    pub pair_policy: PairPolicy,
    /// Demand at least one non-deterministic cause in the audit.
    pub require_nondeterministic: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            angles_deg: [0.0, 120.0, 240.0],
            pi: PiSpec::Uniform,
            null_mass: 0.02,
            seed: 42,
            tol: 1e-9,
            margin: 1e-6,
            pair_policy: PairPolicy::PositiveOnly,
            require_nondeterministic: true,
        }
    }
}

impl ModelSpec {
    pub fn angles(&self) -> [Direction; 3] {
        [
            Direction::new(self.angles_deg[0]),
            Direction::new(self.angles_deg[1]),
            Direction::new(self.angles_deg[2]),
        ]
    }
}

/// Status of one of the 36 outcome pairs in a built model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PairStatus {
    /// A cause event was synthesized for this pair.
    Built { correlation: f64 },
    /// No cause was postulated. `capacity` is the in-block screening bound
    /// `max(p(A∧G)·p(B), p(B∧G)·p(A))`; when `|correlation|` exceeds it (or
    /// the correlation vanishes) no in-block cause can exist at all.
    Excluded {
        correlation: f64,
        capacity: f64,
        provably_infeasible: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub a: Spin,
    pub b: Spin,
    #[serde(flatten)]
    pub status: PairStatus,
}

/// Per-block solver outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub i: usize,
    pub j: usize,
    pub pairs_built: usize,
    pub starts_run: usize,
    pub best_start: usize,
    pub best_objective: f64,
    pub iterations: usize,
}

/// Build provenance embedded in every model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub tool_version: String,
    pub angles_deg: [f64; 3],
    pub pi_left: [f64; 3],
    pub pi_right: [f64; 3],
    pub null_mass: f64,
    pub seed: u64,
    pub tol: f64,
    pub margin: f64,
    pub pair_policy: PairPolicy,
    pub require_nondeterministic: bool,
    pub pairs: Vec<PairRecord>,
    pub solver: Vec<BlockDiagnostics>,
}

/// A synthesized model: the measure, its event dictionary, and provenance.
#[derive(Debug, Clone)]
pub struct EprModel<N: Scalar> {
    pub space: ProbSpace<N>,
    pub dict: EventDict,
    pub meta: ModelMeta,
}

impl<N: Scalar> EprModel<N> {
    pub fn view(&self) -> ModelView<'_, N> {
        ModelView::new(&self.space, &self.dict)
    }

    /// Singlet oracle value for this model's geometry.
    pub fn oracle_joint(&self, i: usize, j: usize, a: Spin, b: Spin) -> f64 {
        singlet_joint(
            Direction::new(self.meta.angles_deg[i - 1]),
            Direction::new(self.meta.angles_deg[j - 1]),
            a,
            b,
        )
    }

    /// Exact oracle value, available when the angle difference has a
    /// rational cosine.
    pub fn oracle_joint_exact(&self, i: usize, j: usize, a: Spin, b: Spin) -> Option<BigRational> {
        singlet_joint_in::<BigRational>(
            Direction::new(self.meta.angles_deg[i - 1]),
            Direction::new(self.meta.angles_deg[j - 1]),
            a,
            b,
        )
        .ok()
    }

    /// Deviation of an exactly-formed conditional from the oracle, using the
    /// exact oracle whenever the geometry admits one.
    fn oracle_deviation(&self, cond: &BigRational, i: usize, j: usize, a: Spin, b: Spin) -> f64 {
        match self.oracle_joint_exact(i, j, a, b) {
            Some(exact) => (cond.clone() - exact).abs_value().to_f64(),
            None => (cond.to_f64() - self.oracle_joint(i, j, a, b)).abs(),
        }
    }
}

// ---------------------------------------------------------------------------
// Construction.
// ---------------------------------------------------------------------------

const OUTCOMES: [(Spin, Spin); 4] = [
    (Spin::Up, Spin::Up),
    (Spin::Up, Spin::Down),
    (Spin::Down, Spin::Up),
    (Spin::Down, Spin::Down),
];

fn outcome_index(a: Spin, b: Spin) -> usize {
    match (a, b) {
        (Spin::Up, Spin::Up) => 0,
        (Spin::Up, Spin::Down) => 1,
        (Spin::Down, Spin::Up) => 2,
        (Spin::Down, Spin::Down) => 3,
    }
}

fn atom_name(i: usize, j: usize, outcome: (Spin, Spin), label: Option<(Spin, Spin)>) -> String {
    let (a, b) = outcome;
    match label {
        Some((la, lb)) => format!("x{i}{j}_{}{}_{}{}", a.tag(), b.tag(), la.tag(), lb.tag()),
        None => format!("x{i}{j}_{}{}_rest", a.tag(), b.tag()),
    }
}

fn spin_index(s: Spin) -> usize {
    match s {
        Spin::Up => 0,
        Spin::Down => 1,
    }
}

/// Everything the per-block solve needs, in floats.
struct BlockTask {
    i: usize,
    j: usize,
    /// Cell masses by outcome index.
    w: [f64; 4],
    /// Outcome indices of the pairs to build.
    built: Vec<usize>,
    /// Global outcome-event probabilities p(L_i^a), p(R_j^b) by spin.
    p_la: [f64; 2],
    p_rb: [f64; 2],
    seed: u64,
    tol: f64,
    margin: f64,
}

struct BlockSolution {
    /// `alloc[pair_index][cell] =` mass of the cause in that outcome cell.
    alloc: Vec<[f64; 4]>,
    diagnostics: solver::Diagnostics,
}

fn empty_diagnostics() -> solver::Diagnostics {
    solver::Diagnostics {
        starts_run: 0,
        best_start: 0,
        best_objective: 0.0,
        iterations: 0,
    }
}

/// Cleared screening residuals and relevance margins of one allocation.
fn pair_equations(task: &BlockTask, outcome: usize, alloc: &[f64; 4]) -> (f64, f64, f64, f64) {
    let (a, b) = OUTCOMES[outcome];
    let z = alloc[outcome];
    let x = z + alloc[outcome_index(a, b.opposite())];
    let y = z + alloc[outcome_index(a.opposite(), b)];
    let s: f64 = alloc.iter().sum();
    let w11 = task.w[outcome];
    let pa = task.p_la[spin_index(a)];
    let pb = task.p_rb[spin_index(b)];
    let e1 = z * s - x * y;
    let e2 = (w11 - z) * (1.0 - s) - (pa - x) * (pb - y);
    let (da, db) = if s > 1e-15 && s < 1.0 - 1e-15 {
        (x / s - (pa - x) / (1.0 - s), y / s - (pb - y) / (1.0 - s))
    } else {
        (-1.0, -1.0)
    };
    (e1, e2, da, db)
}

fn solve_block(task: &BlockTask) -> Result<BlockSolution> {
    let pairs = task.built.len();
    if pairs == 0 {
        return Ok(BlockSolution {
            alloc: Vec::new(),
            diagnostics: empty_diagnostics(),
        });
    }
    let n = pairs * 4;
    let mut upper = vec![0.0; n];
    for p in 0..pairs {
        for cell in 0..4 {
            upper[p * 4 + cell] = task.w[cell];
        }
    }
    let margin_target = task.margin * 1.01 + 1e-12;
    let residuals = |v: &[f64], out: &mut [f64]| {
        for (p, &outcome) in task.built.iter().enumerate() {
            let alloc: [f64; 4] = [v[p * 4], v[p * 4 + 1], v[p * 4 + 2], v[p * 4 + 3]];
            let (e1, e2, da, db) = pair_equations(task, outcome, &alloc);
            out[p * 4] = e1;
            out[p * 4 + 1] = e2;
            out[p * 4 + 2] = hinge(margin_target - da);
            out[p * 4 + 3] = hinge(margin_target - db);
        }
    };
    let w = task.w;
    let project = move |v: &mut [f64]| {
        for cell in 0..4 {
            let total: f64 = (0..pairs).map(|p| v[p * 4 + cell]).sum();
            if total > w[cell] && total > 0.0 {
                let scale = w[cell] / total;
                for p in 0..pairs {
                    v[p * 4 + cell] *= scale;
                }
            }
        }
    };

    // deterministic warm start: each cause takes the feasible fraction of
    // its own outcome cell
    let mut det = vec![0.0; n];
    for (p, &outcome) in task.built.iter().enumerate() {
        let (a, b) = OUTCOMES[outcome];
        let w11 = task.w[outcome];
        let pa = task.p_la[spin_index(a)];
        let pb = task.p_rb[spin_index(b)];
        let denom = 1.0 - pa - pb + w11;
        if denom > 0.0 {
            det[p * 4 + outcome] = ((w11 - pa * pb) / denom).clamp(0.0, w11);
        }
    }

    let problem = solver::Problem {
        lower: vec![0.0; n],
        upper,
        residual_len: n,
        residuals: &residuals,
        project: Some(&project),
    };
    let opts = solver::Options {
        starts: 32,
        max_iters: 600,
        seed: task.seed,
        target: 1e-26,
        chunk: 8,
    };
    let (v, diagnostics) = solver::minimize_multistart(&problem, &opts, &[det]);

    let mut alloc = Vec::with_capacity(pairs);
    for p in 0..pairs {
        alloc.push([v[p * 4], v[p * 4 + 1], v[p * 4 + 2], v[p * 4 + 3]]);
    }
    // verify the solution against the build tolerance before accepting it
    for (p, &outcome) in task.built.iter().enumerate() {
        let (e1, e2, da, db) = pair_equations(task, outcome, &alloc[p]);
        let (a, b) = OUTCOMES[outcome];
        if e1.abs() > task.tol || e2.abs() > task.tol {
            return Err(Error::Infeasible {
                best_residual: e1.abs().max(e2.abs()),
                detail: format!(
                    "screening equalities for C_{}{}_{}{} not met at tol {:.1e}",
                    task.i,
                    task.j,
                    a.tag(),
                    b.tag(),
                    task.tol
                ),
            });
        }
        if da <= task.margin || db <= task.margin {
            return Err(Error::Infeasible {
                best_residual: diagnostics.best_objective.sqrt(),
                detail: format!(
                    "relevance margins for C_{}{}_{}{} below {:.1e} (got {:.3e}, {:.3e})",
                    task.i,
                    task.j,
                    a.tag(),
                    b.tag(),
                    task.margin,
                    da,
                    db
                ),
            });
        }
    }
    Ok(BlockSolution { alloc, diagnostics })
}

/// Plan of one block after pair classification.
struct BlockPlan {
    i: usize,
    j: usize,
    w: [f64; 4],
    built: Vec<usize>,
    records: Vec<PairRecord>,
    p_la: [f64; 2],
    p_rb: [f64; 2],
}

fn classify_blocks(spec: &ModelSpec) -> Result<Vec<BlockPlan>> {
    let angles = spec.angles();
    let (pi_left, pi_right) = spec.pi.as_f64();
    SettingDistribution::<f64>::new(pi_left, pi_right)?;
    if !(0.0..1.0).contains(&spec.null_mass) {
        return Err(Error::InvalidInput(format!(
            "null mass must lie in [0, 1), got {}",
            spec.null_mass
        )));
    }
    let live = 1.0 - spec.null_mass;

    // cell masses and the global outcome-event probabilities
    let mut w = [[[0.0f64; 4]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (o, &(a, b)) in OUTCOMES.iter().enumerate() {
                let q = singlet_joint(angles[i], angles[j], a, b);
                w[i][j][o] = live * pi_left[i] * pi_right[j] * q;
            }
        }
    }
    let mut p_la = [[0.0f64; 2]; 3];
    let mut p_rb = [[0.0f64; 2]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (o, &(a, b)) in OUTCOMES.iter().enumerate() {
                p_la[i][spin_index(a)] += w[i][j][o];
                p_rb[j][spin_index(b)] += w[i][j][o];
            }
        }
    }

    let mut plans = Vec::with_capacity(9);
    for i in 1..=3 {
        for j in 1..=3 {
            let cells = w[i - 1][j - 1];
            let mut built = Vec::new();
            let mut records = Vec::new();
            for (o, &(a, b)) in OUTCOMES.iter().enumerate() {
                let pa = p_la[i - 1][spin_index(a)];
                let pb = p_rb[j - 1][spin_index(b)];
                let corr = cells[o] - pa * pb;
                let row = cells[o] + cells[outcome_index(a, b.opposite())];
                let col = cells[o] + cells[outcome_index(a.opposite(), b)];
                let capacity = (row * pb).max(col * pa);
                if corr > 0.0 {
                    built.push(o);
                    records.push(PairRecord {
                        i,
                        j,
                        a,
                        b,
                        status: PairStatus::Built { correlation: corr },
                    });
                } else {
                    let provable = corr == 0.0 || corr.abs() > capacity;
                    if spec.pair_policy == PairPolicy::AllPairs && corr != 0.0 {
                        return Err(Error::Infeasible {
                            best_residual: corr.abs(),
                            detail: format!(
                                "pair ({i},{j},{a},{b}) is negatively correlated \
                                 (corr {corr:.6e}) and no event inside L{i} ∧ R{j} ∧ Λ can \
                                 screen it (in-block capacity {capacity:.6e} < |corr|); \
                                 use the positive-only policy"
                            ),
                        });
                    }
                    records.push(PairRecord {
                        i,
                        j,
                        a,
                        b,
                        status: PairStatus::Excluded {
                            correlation: corr,
                            capacity,
                            provably_infeasible: provable,
                        },
                    });
                }
            }
            plans.push(BlockPlan {
                i,
                j,
                w: cells,
                built,
                records,
                p_la: p_la[i - 1],
                p_rb: p_rb[j - 1],
            });
        }
    }
    Ok(plans)
}

/// Assemble the atom list and event dictionary from per-block allocations,
/// in the target arithmetic.
fn assemble<N: Scalar>(
    spec: &ModelSpec,
    plans: &[BlockPlan],
    solutions: &[BlockSolution],
) -> Result<EprModel<N>> {
    let angles = spec.angles();
    let pi: SettingDistribution<N> = spec.pi.distribution()?;
    let null_mass = N::lift_f64(spec.null_mass)?;
    let live = N::one() - null_mass.clone();

    let mut atoms: Vec<(String, N)> = Vec::with_capacity(181);
    for (plan, solution) in plans.iter().zip(solutions) {
        let (i, j) = (plan.i, plan.j);
        for (o, &(a, b)) in OUTCOMES.iter().enumerate() {
            let q: N = singlet_joint_in(angles[i - 1], angles[j - 1], a, b)?;
            let cell_mass = live.clone() * pi.left(i).clone() * pi.right(j).clone() * q;
            let mut labelled: Vec<((Spin, Spin), N)> = Vec::with_capacity(4);
            let mut used = N::zero();
            for (p, &built_outcome) in plan.built.iter().enumerate() {
                let amount = N::lift_f64(solution.alloc[p][o])?;
                used = used + amount.clone();
                labelled.push((OUTCOMES[built_outcome], amount));
            }
            for &label in &OUTCOMES {
                if !plan.built.iter().any(|&bo| OUTCOMES[bo] == label) {
                    labelled.push((label, N::zero()));
                }
            }
            let mut rest = cell_mass - used;
            if rest < N::zero() {
                // lifted allocations can overshoot the exact cell mass by
                // rounding; shave the excess off the largest allocation
                let deficit = N::zero() - rest;
                if deficit.to_f64() > 1e-9 {
                    return Err(Error::Infeasible {
                        best_residual: deficit.to_f64(),
                        detail: format!("cell ({i},{j},{a}{b}) over-allocated"),
                    });
                }
                let largest = labelled
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1 .1.partial_cmp(&y.1 .1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap();
                labelled[largest].1 = labelled[largest].1.clone() - deficit;
                rest = N::zero();
            }
            for (label, amount) in labelled {
                atoms.push((atom_name(i, j, (a, b), Some(label)), amount));
            }
            atoms.push((atom_name(i, j, (a, b), None), rest));
        }
    }
    let has_null = !null_mass.is_zero_value();
    if has_null {
        atoms.push((NULL_ATOM.to_string(), null_mass));
    }
    let space = ProbSpace::new(atoms)?;

    let mut dict = EventDict::new();
    type AtomPredicate<'a> = &'a dyn Fn(usize, usize, (Spin, Spin), Option<(Spin, Spin)>) -> bool;
    let collect = |pred: AtomPredicate| {
        let mut names = Vec::new();
        for i in 1..=3 {
            for j in 1..=3 {
                for &outcome in &OUTCOMES {
                    for label in OUTCOMES.iter().copied().map(Some).chain([None]) {
                        if pred(i, j, outcome, label) {
                            names.push(atom_name(i, j, outcome, label));
                        }
                    }
                }
            }
        }
        Event::new(names)
    };
    for k in 1..=3 {
        dict.insert(key_l(k), collect(&|i, _, _, _| i == k));
        dict.insert(key_r(k), collect(&|_, j, _, _| j == k));
        for s in SPINS {
            dict.insert(key_la(k, s), collect(&|i, _, (a, _), _| i == k && a == s));
            dict.insert(key_rb(k, s), collect(&|_, j, (_, b), _| j == k && b == s));
        }
    }
    for i in 1..=3 {
        for j in 1..=3 {
            for (a, b) in OUTCOMES {
                dict.insert(
                    key_c(i, j, a, b),
                    collect(&|ii, jj, _, label| ii == i && jj == j && label == Some((a, b))),
                );
            }
        }
    }
    dict.insert(KEY_LAMBDA, collect(&|_, _, _, _| true));

    let (pi_left, pi_right) = spec.pi.as_f64();
    let meta = ModelMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        angles_deg: spec.angles_deg,
        pi_left,
        pi_right,
        null_mass: spec.null_mass,
        seed: spec.seed,
        tol: spec.tol,
        margin: spec.margin,
        pair_policy: spec.pair_policy,
        require_nondeterministic: spec.require_nondeterministic,
        pairs: plans.iter().flat_map(|p| p.records.clone()).collect(),
        solver: plans
            .iter()
            .zip(solutions)
            .map(|(p, s)| BlockDiagnostics {
                i: p.i,
                j: p.j,
                pairs_built: p.built.len(),
                starts_run: s.diagnostics.starts_run,
                best_start: s.diagnostics.best_start,
                best_objective: s.diagnostics.best_objective,
                iterations: s.diagnostics.iterations,
            })
            .collect(),
    };
    Ok(EprModel { space, dict, meta })
}

/// Build the model in float arithmetic (the native mode for solver-produced
/// measures).
pub fn build_model(spec: &ModelSpec) -> Result<EprModel<f64>> {
    build_model_in::<f64>(spec)
}

/// Build the model in the requested arithmetic. In rational mode the angle
/// differences must have rational cosines; solver fractions are lifted
/// losslessly, so singlet fidelity is exact.
pub fn build_model_in<N: Scalar>(spec: &ModelSpec) -> Result<EprModel<N>> {
    let plans = classify_blocks(spec)?;
    let solutions: Vec<Result<BlockSolution>> = plans
        .par_iter()
        .enumerate()
        .map(|(index, plan)| {
            let task = BlockTask {
                i: plan.i,
                j: plan.j,
                w: plan.w,
                built: plan.built.clone(),
                p_la: plan.p_la,
                p_rb: plan.p_rb,
                seed: spec
                    .seed
                    .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1)),
                tol: spec.tol,
                margin: spec.margin,
            };
            solve_block(&task)
        })
        .collect();
    let solutions: Vec<BlockSolution> = solutions.into_iter().collect::<Result<_>>()?;
    assemble(spec, &plans, &solutions)
}

/// Counterexample fixture: each postulated cause is its entire outcome cell.
/// Screening on C holds trivially, screening on ¬C provably fails whenever
/// other blocks give the outcome events mass; the audit must reject it.
pub fn build_deterministic_cell_fixture(spec: &ModelSpec) -> Result<EprModel<f64>> {
    let plans = classify_blocks(spec)?;
    let solutions: Vec<BlockSolution> = plans
        .iter()
        .map(|plan| {
            let alloc = plan
                .built
                .iter()
                .map(|&outcome| {
                    let mut cells = [0.0; 4];
                    cells[outcome] = plan.w[outcome];
                    cells
                })
                .collect();
            BlockSolution {
                alloc,
                diagnostics: empty_diagnostics(),
            }
        })
        .collect();
    assemble(spec, &plans, &solutions)
}

// ---------------------------------------------------------------------------
// Audit.
// ---------------------------------------------------------------------------

/// Set-theoretic structure checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    /// Every cause lies inside its block ∧ Λ.
    pub causes_within_blocks: bool,
    /// Causes of one block are pairwise disjoint.
    pub causes_disjoint: bool,
    /// The nine blocks partition Λ.
    pub blocks_partition_lambda: bool,
    /// Outcome events lie inside their setting events.
    pub outcomes_within_settings: bool,
    /// Largest mass of `block ∧ Λ` minus the cause union (non-negative).
    pub union_residual_mass_max: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub max_deviation: f64,
    pub worst: String,
    pub ok: bool,
}

/// Audit entry for one outcome pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairAudit {
    pub i: usize,
    pub j: usize,
    pub a: Spin,
    pub b: Spin,
    pub built: bool,
    /// Screening/relevance criterion for the cause (built pairs).
    pub criterion: Option<CriterionReport>,
    pub outcome_independence_residual: Option<f64>,
    /// Factorizability at the cause equals outcome independence when the
    /// cause is contained in its block; checked as an identity.
    pub factorizability_equals_oi: Option<bool>,
    pub mi_residual_left: Option<f64>,
    pub mi_residual_right: Option<f64>,
    /// Exact-arithmetic check that the measurement-independence residual
    /// equals `p(C)(1 − p(L_i))` (resp. `R_j`) and is positive.
    pub mi_identity_exact: Option<bool>,
    pub hidden_locality_residual: Option<f64>,
    pub hl_identity_exact: Option<bool>,
    /// Exact-arithmetic verification of the exclusion certificate.
    pub certificate_correlation: Option<f64>,
    pub certificate_capacity: Option<f64>,
    pub certificate_provable: Option<bool>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockNonScreening {
    pub i: usize,
    pub j: usize,
    /// Whether the block carries any within-block outcome correlation; the
    /// non-screening mandate only applies when it does.
    pub conditionally_correlated: bool,
    /// Worst screening residual of Λ over the block's outcome pairs.
    pub lambda_max_residual: f64,
    /// Worst screening residual of `L_i ∧ R_j ∧ Λ`.
    pub block_lambda_max_residual: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonScreeningReport {
    pub lambda_checked: bool,
    pub per_block: Vec<BlockNonScreening>,
    pub all_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizabilityReport {
    /// Worst factorizability residual with Λ as the conditioning factor.
    pub lambda_condition: ConditionReport,
    pub violated_as_required: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterIndependenceReport {
    /// Parameter independence probed at cross-block cause-type unions (the
    /// only setting-transcending identification of the causes).
    pub union_condition: ConditionReport,
    /// Worst residual with the contained cause itself, expected ~0 by the
    /// conditioning identity.
    pub contained_identity_max: f64,
    pub violated_as_required: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondeterminismReport {
    pub required: bool,
    pub found: bool,
    /// Smallest `p(outcome | cause)` over built causes and their outcomes.
    pub min_outcome_given_cause: f64,
    pub witness: Option<String>,
    pub ok: bool,
}

/// Full audit of a model against its construction requirements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub summary_pass: bool,
    pub max_equality_residual: f64,
    pub structure: StructureReport,
    pub fidelity: FidelityReport,
    pub pairs: Vec<PairAudit>,
    pub lambda_nonscreening: NonScreeningReport,
    pub factorizability: FactorizabilityReport,
    pub parameter_independence: ParameterIndependenceReport,
    pub nondeterminism: NondeterminismReport,
    pub warnings: Vec<String>,
    pub solver: Vec<BlockDiagnostics>,
    /// Name of the first failing clause, for exit-code reporting.
    pub failing_clause: Option<String>,
}

fn exact_probability<N: Scalar>(space: &ProbSpace<N>, e: &Event) -> BigRational {
    space.probability_exact(e).expect("validated event")
}

/// Cleared screening residuals of candidate `c` for the pair `(a, b)`.
fn screening_residuals<N: Scalar>(
    space: &ProbSpace<N>,
    a: &Event,
    b: &Event,
    c: &Event,
) -> Result<(f64, f64)> {
    let pc = space.probability(c)?.to_f64();
    let pa = space.probability(a)?.to_f64();
    let pb = space.probability(b)?.to_f64();
    let ab = a.intersect(b);
    let pab = space.probability(&ab)?.to_f64();
    let pac = space.probability(&a.intersect(c))?.to_f64();
    let pbc = space.probability(&b.intersect(c))?.to_f64();
    let pabc = space.probability(&ab.intersect(c))?.to_f64();
    let on_c = pabc * pc - pac * pbc;
    let on_not_c = (pab - pabc) * (1.0 - pc) - (pa - pac) * (pb - pbc);
    Ok((on_c, on_not_c))
}

/// Audit a model: recompute every condition from the measure (never from
/// solver state), verify exact identities in rational arithmetic, and check
/// the mandatory violations.
pub fn audit<N: Scalar>(model: &EprModel<N>, tol: f64, margin: f64) -> Result<AuditReport> {
    let space = &model.space;
    let dict = &model.dict;
    dict.validate(space, true)?;
    let view = ModelView::new(space, dict);
    let mut warnings = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut failing: Option<String> = None;
    let fail = |clause: &str, slot: &mut Option<String>| {
        if slot.is_none() {
            *slot = Some(clause.to_string());
        }
    };

    let lambda = dict.lambda()?.clone();
    let not_lambda = space.not(&lambda)?;
    let lambda_proper = !exact_probability(space, &not_lambda).is_zero_value();
    if !lambda_proper {
        warnings.push(
            "Lambda equals the sure event (null mass 0); preparation-factor screening \
             checks that condition on its complement are skipped"
                .to_string(),
        );
    }

    // ---- structure ----
    let mut causes_within_blocks = true;
    let mut causes_disjoint = true;
    let mut outcomes_within_settings = true;
    let mut union_residual_mass_max: f64 = 0.0;
    let mut blocks_union = Event::empty();
    let mut blocks_partition_lambda = true;
    for i in 1..=3 {
        for s in SPINS {
            if !dict.la(i, s)?.is_subset(dict.l(i)?) || !dict.rb(i, s)?.is_subset(dict.r(i)?) {
                outcomes_within_settings = false;
            }
        }
    }
    for i in 1..=3 {
        for j in 1..=3 {
            let block = dict.block(i, j)?;
            let block_lambda = block.intersect(&lambda);
            if !blocks_union.is_disjoint(&block) {
                blocks_partition_lambda = false;
            }
            blocks_union = blocks_union.union(&block);
            let mut union_of_causes = Event::empty();
            let causes: Vec<&Event> = OUTCOMES
                .iter()
                .map(|&(a, b)| dict.c(i, j, a, b))
                .collect::<Result<_>>()?;
            for (k, c) in causes.iter().enumerate() {
                if !c.is_subset(&block_lambda) {
                    causes_within_blocks = false;
                }
                for other in &causes[k + 1..] {
                    if !c.is_disjoint(other) {
                        causes_disjoint = false;
                    }
                }
                union_of_causes = union_of_causes.union(c);
            }
            let residual_mass = space.probability(&block_lambda)?.to_f64()
                - space.probability(&union_of_causes)?.to_f64();
            union_residual_mass_max = union_residual_mass_max.max(residual_mass);
            if residual_mass < -1e-15 {
                causes_within_blocks = false;
            }
        }
    }
    if blocks_union != lambda {
        blocks_partition_lambda = false;
    }
    let structure_ok = causes_within_blocks
        && causes_disjoint
        && blocks_partition_lambda
        && outcomes_within_settings;
    if !structure_ok {
        fail("structure", &mut failing);
    }
    let structure = StructureReport {
        causes_within_blocks,
        causes_disjoint,
        blocks_partition_lambda,
        outcomes_within_settings,
        union_residual_mass_max,
        ok: structure_ok,
    };

    // ---- singlet fidelity ----
    // conditionals are formed in exact arithmetic and rounded once, so an
    // exactly faithful measure reports a deviation of exactly zero
    let mut fidelity_max: f64 = 0.0;
    let mut fidelity_worst = String::new();
    for i in 1..=3 {
        for j in 1..=3 {
            let block = dict.block(i, j)?;
            let p_block = space.probability_exact(&block)?;
            if p_block.is_zero_value() {
                return Err(Error::InvalidInput(format!(
                    "block ({i},{j}) carries no mass; setting probabilities must be positive"
                )));
            }
            for (a, b) in OUTCOMES {
                let cell = dict.la(i, a)?.intersect(dict.rb(j, b)?).intersect(&block);
                let cond = space.probability_exact(&cell)? / p_block.clone();
                let dev = model.oracle_deviation(&cond, i, j, a, b);
                if dev > fidelity_max {
                    fidelity_max = dev;
                    fidelity_worst = format!("i={i} j={j} a={a} b={b}");
                }
            }
        }
    }
    let fidelity_ok = fidelity_max <= FIDELITY_TOL;
    if !fidelity_ok {
        fail("quantum_fidelity", &mut failing);
    }
    max_residual = max_residual.max(fidelity_max);
    let fidelity = FidelityReport {
        max_deviation: fidelity_max,
        worst: fidelity_worst,
        ok: fidelity_ok,
    };

    // ---- per-pair clauses ----
    let status_of = |i: usize, j: usize, a: Spin, b: Spin| -> Option<&PairStatus> {
        model
            .meta
            .pairs
            .iter()
            .find(|r| r.i == i && r.j == j && r.a == a && r.b == b)
            .map(|r| &r.status)
    };
    let mut pairs = Vec::with_capacity(36);
    let mut min_outcome_given_cause = f64::INFINITY;
    let mut witness: Option<String> = None;
    for i in 1..=3 {
        for j in 1..=3 {
            for (a, b) in OUTCOMES {
                let c = dict.c(i, j, a, b)?;
                let la = dict.la(i, a)?;
                let rb = dict.rb(j, b)?;
                let pc_exact = exact_probability(space, c);
                let built = !pc_exact.is_zero_value();
                let mut entry = PairAudit {
                    i,
                    j,
                    a,
                    b,
                    built,
                    criterion: None,
                    outcome_independence_residual: None,
                    factorizability_equals_oi: None,
                    mi_residual_left: None,
                    mi_residual_right: None,
                    mi_identity_exact: None,
                    hidden_locality_residual: None,
                    hl_identity_exact: None,
                    certificate_correlation: None,
                    certificate_capacity: None,
                    certificate_provable: None,
                    pass: true,
                };
                if built {
                    let criterion = rpcc::check_common_cause(space, la, rb, c, tol, margin)?;
                    max_residual = max_residual.max(criterion.max_screening_residual());
                    if !criterion.pass {
                        entry.pass = false;
                        fail("screening_criterion", &mut failing);
                    }
                    let oi = bell::check_outcome_independence(
                        &view,
                        c,
                        &key_c(i, j, a, b),
                        i,
                        j,
                        a,
                        b,
                        tol,
                    )?;
                    max_residual = max_residual.max(oi.residual);
                    if !oi.holds {
                        entry.pass = false;
                        fail("outcome_independence", &mut failing);
                    }
                    let fact = bell::check_factorizability(
                        &view,
                        c,
                        &key_c(i, j, a, b),
                        i,
                        j,
                        a,
                        b,
                        tol,
                    )?;
                    let identity_ok = (fact.residual - oi.residual).abs() <= 1e-12;
                    if !identity_ok {
                        entry.pass = false;
                        fail("factorizability_oi_identity", &mut failing);
                    }

                    // measurement dependence: exact containment-forced form
                    let pl_exact = exact_probability(space, dict.l(i)?);
                    let pr_exact = exact_probability(space, dict.r(j)?);
                    let pcl_exact = exact_probability(space, &c.intersect(dict.l(i)?));
                    let pcr_exact = exact_probability(space, &c.intersect(dict.r(j)?));
                    let one = <BigRational as Scalar>::one;
                    let mi_left_exact =
                        pcl_exact.clone() - pc_exact.clone() * pl_exact.clone();
                    let mi_left_closed = pc_exact.clone() * (one() - pl_exact.clone());
                    let mi_right_exact =
                        pcr_exact.clone() - pc_exact.clone() * pr_exact.clone();
                    let mi_right_closed = pc_exact.clone() * (one() - pr_exact.clone());
                    let zero = <BigRational as Scalar>::zero();
                    let mi_ok = mi_left_exact == mi_left_closed
                        && mi_right_exact == mi_right_closed
                        && mi_left_exact > zero
                        && mi_right_exact > zero;
                    entry.mi_residual_left = Some(mi_left_exact.to_f64());
                    entry.mi_residual_right = Some(mi_right_exact.to_f64());
                    entry.mi_identity_exact = Some(mi_ok);
                    if !mi_ok {
                        entry.pass = false;
                        fail("measurement_dependence", &mut failing);
                    }

                    // hidden locality: same containment argument on the block
                    let block = dict.block(i, j)?;
                    let pg_exact = exact_probability(space, &block);
                    let hl_exact = exact_probability(space, &c.intersect(&block))
                        - pc_exact.clone() * pg_exact.clone();
                    let hl_closed = pc_exact.clone() * (one() - pg_exact);
                    let hl_ok = hl_exact == hl_closed && hl_exact > zero;
                    entry.hidden_locality_residual = Some(hl_exact.to_f64());
                    entry.hl_identity_exact = Some(hl_ok);
                    if !hl_ok {
                        entry.pass = false;
                        fail("hidden_locality", &mut failing);
                    }

                    // non-determinism scan
                    let p_a_given_c = space.conditional(la, c)?.to_f64();
                    let p_b_given_c = space.conditional(rb, c)?.to_f64();
                    for (label, value) in [("left", p_a_given_c), ("right", p_b_given_c)] {
                        if value < min_outcome_given_cause {
                            min_outcome_given_cause = value;
                            witness = Some(format!(
                                "p({label} outcome | C_{i}{j}_{}{}) = {value:.6}",
                                a.tag(),
                                b.tag()
                            ));
                        }
                    }

                    entry.criterion = Some(criterion);
                    entry.outcome_independence_residual = Some(oi.residual);
                    entry.factorizability_equals_oi = Some(identity_ok);
                } else {
                    // exclusion certificate, in exact arithmetic
                    let block = dict.block(i, j)?;
                    let pa = exact_probability(space, la);
                    let pb = exact_probability(space, rb);
                    let pab = exact_probability(space, &la.intersect(rb));
                    let corr = pab - pa.clone() * pb.clone();
                    let row = exact_probability(space, &la.intersect(&block));
                    let col = exact_probability(space, &rb.intersect(&block));
                    let cap_left = row * pb;
                    let cap_right = col * pa;
                    let capacity = if cap_left > cap_right {
                        cap_left
                    } else {
                        cap_right
                    };
                    let zero = <BigRational as Scalar>::zero();
                    let provable = corr.is_zero_value()
                        || (corr < zero && corr.abs_value() > capacity);
                    entry.certificate_correlation = Some(corr.to_f64());
                    entry.certificate_capacity = Some(capacity.to_f64());
                    entry.certificate_provable = Some(provable);
                    // a positively correlated pair without a cause is a
                    // genuine failure; excluded non-positive pairs pass
                    if corr > <BigRational as Scalar>::zero() {
                        entry.pass = false;
                        fail("missing_cause_for_positive_pair", &mut failing);
                    }
                    if !provable {
                        warnings.push(format!(
                            "pair ({i},{j},{a},{b}) excluded by policy; in-block \
                             infeasibility not established by the capacity bound"
                        ));
                    }
                    // consistency with the recorded build decision
                    if let Some(PairStatus::Built { .. }) = status_of(i, j, a, b) {
                        entry.pass = false;
                        fail("recorded_cause_is_empty", &mut failing);
                    }
                }
                pairs.push(entry);
            }
        }
    }

    // ---- Λ and block ∧ Λ must fail screening somewhere in every block that
    // carries a within-block outcome correlation (at orthogonal settings the
    // conditional outcomes are independent and there is nothing to screen) ----
    let mut per_block = Vec::with_capacity(9);
    let mut all_ok = true;
    for i in 1..=3 {
        for j in 1..=3 {
            let block = dict.block(i, j)?;
            let block_lambda = block.intersect(&lambda);
            let p_g = space.probability(&block_lambda)?.to_f64();
            let mut lambda_max: f64 = 0.0;
            let mut block_max: f64 = 0.0;
            let mut conditional_corr_max: f64 = 0.0;
            for (a, b) in OUTCOMES {
                let la = dict.la(i, a)?;
                let rb = dict.rb(j, b)?;
                let joint = space
                    .probability(&la.intersect(rb).intersect(&block_lambda))?
                    .to_f64();
                let left = space.probability(&la.intersect(&block_lambda))?.to_f64();
                let right = space.probability(&rb.intersect(&block_lambda))?.to_f64();
                conditional_corr_max =
                    conditional_corr_max.max((joint / p_g - (left / p_g) * (right / p_g)).abs());
                if lambda_proper {
                    let (on_c, on_not_c) = screening_residuals(space, la, rb, &lambda)?;
                    lambda_max = lambda_max.max(on_c.abs()).max(on_not_c.abs());
                }
                let (on_c, on_not_c) = screening_residuals(space, la, rb, &block_lambda)?;
                block_max = block_max.max(on_c.abs()).max(on_not_c.abs());
            }
            let correlated = conditional_corr_max > tol;
            let ok = !correlated || (block_max > tol && (!lambda_proper || lambda_max > tol));
            if !ok {
                all_ok = false;
            }
            per_block.push(BlockNonScreening {
                i,
                j,
                conditionally_correlated: correlated,
                lambda_max_residual: lambda_max,
                block_lambda_max_residual: block_max,
                ok,
            });
        }
    }
    if !all_ok {
        fail("lambda_nonscreening", &mut failing);
    }
    let lambda_nonscreening = NonScreeningReport {
        lambda_checked: lambda_proper,
        per_block,
        all_ok,
    };

    // ---- factorizability must fail with Λ as the hidden factor ----
    let mut fact_instances: Vec<ConditionReport> = Vec::new();
    for i in 1..=3 {
        for j in 1..=3 {
            for (a, b) in OUTCOMES {
                fact_instances.push(bell::check_factorizability(
                    &view, &lambda, KEY_LAMBDA, i, j, a, b, tol,
                )?);
            }
        }
    }
    let lambda_condition = fact_instances
        .iter()
        .max_by(|x, y| x.residual.partial_cmp(&y.residual).unwrap())
        .cloned()
        .expect("36 instances");
    let fact_violated = lambda_condition.residual > tol;
    if !fact_violated {
        fail("factorizability_not_violated", &mut failing);
    }
    let factorizability = FactorizabilityReport {
        lambda_condition,
        violated_as_required: fact_violated,
    };

    // ---- parameter independence at cause-type unions ----
    let mut union_instances: Vec<ConditionReport> = Vec::new();
    let mut contained_identity_max: f64 = 0.0;
    for (a, b) in OUTCOMES {
        for i in 1..=3 {
            // row union: same left setting and cause type across right settings
            let mut row_union = Event::empty();
            for j in 1..=3 {
                row_union = row_union.union(dict.c(i, j, a, b)?);
            }
            if space.probability(&row_union)?.to_f64() > 0.0 {
                for j in 1..=3 {
                    let c = dict.c(i, j, a, b)?;
                    if space.probability(c)?.to_f64() > 0.0 {
                        union_instances.push(bell::check_parameter_independence(
                            &view,
                            &row_union,
                            &format!("∨_j C_{i}j_{}{}", a.tag(), b.tag()),
                            i,
                            j,
                            a,
                            b,
                            tol,
                        )?);
                        let contained = bell::check_parameter_independence(
                            &view,
                            c,
                            &key_c(i, j, a, b),
                            i,
                            j,
                            a,
                            b,
                            tol,
                        )?;
                        contained_identity_max = contained_identity_max.max(contained.residual);
                    }
                }
            }
        }
        for j in 1..=3 {
            // column union: same right setting across left settings
            let mut col_union = Event::empty();
            for i in 1..=3 {
                col_union = col_union.union(dict.c(i, j, a, b)?);
            }
            if space.probability(&col_union)?.to_f64() > 0.0 {
                for i in 1..=3 {
                    let c = dict.c(i, j, a, b)?;
                    if space.probability(c)?.to_f64() > 0.0 {
                        union_instances.push(bell::check_parameter_independence(
                            &view,
                            &col_union,
                            &format!("∨_i C_i{j}_{}{}", a.tag(), b.tag()),
                            i,
                            j,
                            a,
                            b,
                            tol,
                        )?);
                    }
                }
            }
        }
    }
    let union_condition = union_instances
        .into_iter()
        .max_by(|x, y| x.residual.partial_cmp(&y.residual).unwrap())
        .unwrap_or(ConditionReport {
            condition: "parameter_independence".to_string(),
            residual: 0.0,
            holds: true,
            worst: None,
            instances: 0,
        });
    let pi_violated = union_condition.residual > tol;
    if !pi_violated {
        fail("parameter_independence_not_violated", &mut failing);
    }
    if contained_identity_max > 1e-9 {
        fail("contained_parameter_identity", &mut failing);
    }
    let parameter_independence = ParameterIndependenceReport {
        union_condition,
        contained_identity_max,
        violated_as_required: pi_violated,
    };

    // ---- non-determinism witness ----
    let required = model.meta.require_nondeterministic;
    let found = min_outcome_given_cause < 1.0 - 1e-9;
    let nondeterminism_ok = !required || found;
    if !nondeterminism_ok {
        fail("nondeterminism_witness", &mut failing);
    }
    let nondeterminism = NondeterminismReport {
        required,
        found,
        min_outcome_given_cause,
        witness,
        ok: nondeterminism_ok,
    };

    let pairs_ok = pairs.iter().all(|p| p.pass);
    let summary_pass = structure.ok
        && fidelity.ok
        && pairs_ok
        && lambda_nonscreening.all_ok
        && factorizability.violated_as_required
        && parameter_independence.violated_as_required
        && parameter_independence.contained_identity_max <= 1e-9
        && nondeterminism.ok;

    Ok(AuditReport {
        summary_pass,
        max_equality_residual: max_residual,
        structure,
        fidelity,
        pairs,
        lambda_nonscreening,
        factorizability,
        parameter_independence,
        nondeterminism,
        warnings,
        solver: model.meta.solver.clone(),
        failing_clause: failing,
    })
}

/// Maximum deviation of the model's conditional outcome statistics from the
/// singlet oracle over all 36 `(i, j, a, b)` combinations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityCheck {
    pub max_deviation: f64,
    pub worst: String,
    pub ok: bool,
}

pub fn verify_quantum_fidelity<N: Scalar>(model: &EprModel<N>, tol: f64) -> Result<FidelityCheck> {
    let mut max_deviation: f64 = 0.0;
    let mut worst = String::new();
    for i in 1..=3 {
        for j in 1..=3 {
            let block = model.dict.block(i, j)?;
            let p_block = model.space.probability_exact(&block)?;
            if p_block.is_zero_value() {
                return Err(Error::InvalidInput(format!(
                    "block ({i},{j}) carries no mass"
                )));
            }
            for (a, b) in OUTCOMES {
                let cell = model
                    .dict
                    .la(i, a)?
                    .intersect(model.dict.rb(j, b)?)
                    .intersect(&block);
                let cond = model.space.probability_exact(&cell)? / p_block.clone();
                let dev = model.oracle_deviation(&cond, i, j, a, b);
                if dev > max_deviation {
                    max_deviation = dev;
                    worst = format!("i={i} j={j} a={a} b={b}");
                }
            }
        }
    }
    Ok(FidelityCheck {
        max_deviation,
        worst,
        ok: max_deviation <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_spec() -> ModelSpec {
        ModelSpec {
            seed: 7,
            ..ModelSpec::default()
        }
    }

    #[test]
    fn classification_splits_pairs_by_correlation_sign() {
        let plans = classify_blocks(&quick_spec()).unwrap();
        assert_eq!(plans.len(), 9);
        let built: usize = plans.iter().map(|p| p.built.len()).sum();
        assert_eq!(built, 18);
        // diagonal blocks build the anti-aligned pairs
        let diag = plans.iter().find(|p| p.i == 1 && p.j == 1).unwrap();
        assert_eq!(diag.built, vec![1, 2]); // (+,−) and (−,+)
        let off = plans.iter().find(|p| p.i == 1 && p.j == 2).unwrap();
        assert_eq!(off.built, vec![0, 3]); // (+,+) and (−,−)
        // every excluded pair at this geometry is provably infeasible
        for plan in &plans {
            for record in &plan.records {
                if let PairStatus::Excluded {
                    provably_infeasible,
                    ..
                } = record.status
                {
                    assert!(provably_infeasible, "{record:?}");
                }
            }
        }
    }

    #[test]
    fn all_pairs_policy_reports_infeasibility() {
        let spec = ModelSpec {
            pair_policy: PairPolicy::AllPairs,
            ..quick_spec()
        };
        match build_model(&spec) {
            Err(Error::Infeasible { detail, .. }) => {
                assert!(detail.contains("negatively correlated"), "{detail}");
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn built_model_passes_audit() {
        let model = build_model(&quick_spec()).unwrap();
        assert_eq!(model.space.len(), 181);
        let report = audit(&model, 1e-6, 1e-6).unwrap();
        assert!(
            report.summary_pass,
            "failing clause: {:?}, warnings: {:?}",
            report.failing_clause, report.warnings
        );
        assert!(report.fidelity.max_deviation <= 1e-9);
        assert_eq!(report.pairs.iter().filter(|p| p.built).count(), 18);
        assert!(report.nondeterminism.found);
    }

    #[test]
    fn deterministic_cell_fixture_fails_not_c_screening() {
        let model = build_deterministic_cell_fixture(&quick_spec()).unwrap();
        let report = audit(&model, 1e-6, 1e-6).unwrap();
        assert!(!report.summary_pass);
        let broken: Vec<&PairAudit> = report
            .pairs
            .iter()
            .filter(|p| p.built && !p.pass)
            .collect();
        assert!(!broken.is_empty());
        for pair in broken {
            let criterion = pair.criterion.as_ref().unwrap();
            assert!(criterion.pass_screen_on_c, "screening on C should hold");
            assert!(
                !criterion.pass_screen_on_not_c,
                "screening on ¬C should fail: {criterion:?}"
            );
        }
    }

    #[test]
    fn zero_null_mass_keeps_structure_and_warns() {
        let spec = ModelSpec {
            null_mass: 0.0,
            ..quick_spec()
        };
        let model = build_model(&spec).unwrap();
        assert_eq!(model.space.len(), 180);
        let report = audit(&model, 1e-6, 1e-6).unwrap();
        assert!(report.structure.ok);
        assert!(!report.lambda_nonscreening.lambda_checked);
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("sure event")));
    }

    #[test]
    fn build_is_deterministic() {
        let one = build_model(&quick_spec()).unwrap();
        let two = build_model(&quick_spec()).unwrap();
        let bytes_one = crate::io::model_to_json(&one).unwrap();
        let bytes_two = crate::io::model_to_json(&two).unwrap();
        assert_eq!(bytes_one, bytes_two);
    }

    #[test]
    fn lambda_is_not_a_common_common_cause() {
        let model = build_model(&quick_spec()).unwrap();
        let lambda = model.dict.lambda().unwrap().clone();
        let mut pairs = Vec::new();
        for record in &model.meta.pairs {
            if matches!(record.status, PairStatus::Built { .. }) {
                pairs.push((
                    model.dict.la(record.i, record.a).unwrap().clone(),
                    model.dict.rb(record.j, record.b).unwrap().clone(),
                ));
            }
        }
        assert_eq!(pairs.len(), 18);
        let report =
            rpcc::check_common_common_cause(&model.space, &pairs, &lambda, 1e-6, 1e-6).unwrap();
        assert!(!report.all_pass);
        assert!(report.per_pair.iter().all(|r| !r.pass));
    }

    #[test]
    fn enlarged_cause_fails_audit() {
        let model = build_model(&quick_spec()).unwrap();
        let mut dict = model.dict.clone();
        // enlarge one cause to its whole block
        let block = model.dict.block(1, 2).unwrap();
        dict.insert(
            crate::dict::key_c(1, 2, Spin::Up, Spin::Up),
            block.intersect(model.dict.lambda().unwrap()),
        );
        let mutated = EprModel {
            space: model.space.clone(),
            dict,
            meta: model.meta.clone(),
        };
        let report = audit(&mutated, 1e-6, 1e-6).unwrap();
        assert!(!report.summary_pass);
        let pair = report
            .pairs
            .iter()
            .find(|p| p.i == 1 && p.j == 2 && p.a == Spin::Up && p.b == Spin::Up)
            .unwrap();
        assert!(!pair.pass);
        assert!(!pair.criterion.as_ref().unwrap().pass);
        // the whole block is no longer disjoint from the sibling causes
        assert!(!report.structure.causes_disjoint);
    }

    #[test]
    fn rational_mode_build_has_exact_fidelity() {
        use num_rational::BigRational;
        let spec = ModelSpec {
            seed: 5,
            ..ModelSpec::default()
        };
        let model = build_model_in::<BigRational>(&spec).unwrap();
        // conditional outcome statistics equal the oracle exactly
        for i in 1..=3 {
            for j in 1..=3 {
                let block = model.dict.block(i, j).unwrap();
                for (a, b) in OUTCOMES {
                    let cell = model
                        .dict
                        .la(i, a)
                        .unwrap()
                        .intersect(model.dict.rb(j, b).unwrap());
                    let cond = model.space.conditional(&cell, &block).unwrap();
                    let oracle: BigRational = singlet_joint_in(
                        Direction::new(spec.angles_deg[i - 1]),
                        Direction::new(spec.angles_deg[j - 1]),
                        a,
                        b,
                    )
                    .unwrap();
                    assert_eq!(cond, oracle, "block ({i},{j}), outcome ({a},{b})");
                }
            }
        }
        let report = audit(&model, 1e-6, 1e-6).unwrap();
        assert!(report.summary_pass, "{:?}", report.failing_clause);
    }

    #[test]
    fn mixed_geometry_builds_four_causes_per_orthogonal_block() {
        // At (0°, 90°, 180°) with positive null mass, orthogonal blocks have
        // four (weakly) positively correlated pairs, so all four causes are
        // demanded and the budget genuinely couples them.
        let spec = ModelSpec {
            angles_deg: [0.0, 90.0, 180.0],
            seed: 13,
            ..ModelSpec::default()
        };
        let model = build_model(&spec).unwrap();
        let orthogonal = model
            .meta
            .solver
            .iter()
            .find(|b| b.i == 1 && b.j == 2)
            .unwrap();
        assert_eq!(orthogonal.pairs_built, 4);
        let report = audit(&model, 1e-6, 1e-6).unwrap();
        assert!(report.summary_pass, "{:?}", report.failing_clause);
    }

    /// The model's conditional statistics equal the oracle's, so a
    /// three-setting inequality evaluated from model conditionals reports
    /// the same violation the oracle does.
    #[test]
    fn model_conditionals_reproduce_wigner_violation() {
        let spec = ModelSpec {
            angles_deg: [0.0, 60.0, 120.0],
            seed: 21,
            ..ModelSpec::default()
        };
        let model = build_model(&spec).unwrap();
        let accessor = |l: f64, r: f64| -> crate::Result<f64> {
            let find = |t: f64| {
                spec.angles_deg
                    .iter()
                    .position(|&x| (x - t).abs() < 1e-9)
                    .map(|k| k + 1)
            };
            let (i, j) = (find(l).unwrap(), find(r).unwrap());
            let block = model.dict.block(i, j)?;
            let cell = model
                .dict
                .la(i, Spin::Up)?
                .intersect(model.dict.rb(j, Spin::Up)?);
            model.space.conditional(&cell, &block)
        };
        let from_model = crate::bell::wigner(accessor, 0.0, 60.0, 120.0, 1e-9).unwrap();
        let oracle = |l: f64, r: f64| {
            Ok(singlet_joint(
                Direction::new(l),
                Direction::new(r),
                Spin::Up,
                Spin::Up,
            ))
        };
        let from_oracle = crate::bell::wigner(oracle, 0.0, 60.0, 120.0, 1e-9).unwrap();
        assert!(from_model.violated && from_oracle.violated);
        assert!((from_model.margin - from_oracle.margin).abs() <= 1e-9);
        assert!((from_model.margin - 0.125).abs() <= 1e-9);
    }

    #[test]
    fn fidelity_detects_mutation() {
        let model = build_model(&quick_spec()).unwrap();
        let check = verify_quantum_fidelity(&model, FIDELITY_TOL).unwrap();
        assert!(check.ok, "{check:?}");

        // perturb one weight and renormalize another
        let mut atoms: Vec<(String, f64)> = model
            .space
            .atoms()
            .iter()
            .map(|a| (a.name.clone(), a.weight))
            .collect();
        let idx = atoms.iter().position(|(n, _)| n == "x12_pp_rest").unwrap();
        let idx2 = atoms.iter().position(|(n, _)| n == "x12_mm_rest").unwrap();
        atoms[idx].1 += 0.001;
        atoms[idx2].1 -= 0.001;
        let mutated = EprModel {
            space: ProbSpace::new(atoms).unwrap(),
            dict: model.dict.clone(),
            meta: model.meta.clone(),
        };
        let check = verify_quantum_fidelity(&mutated, FIDELITY_TOL).unwrap();
        assert!(!check.ok);
        assert!(check.max_deviation > 1e-4);
    }
}
