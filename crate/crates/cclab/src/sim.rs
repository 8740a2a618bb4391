//! Seeded Monte-Carlo sampling of finite probability spaces and empirical
//! verification of conditional statistics and inequality violations.
//!
//! Sampling is inverse-CDF over the canonical atom order. Draws are split
//! into fixed-size chunks; chunk `k` uses the ChaCha8 stream `k` of the run
//! seed (`ChaCha8Rng::seed_from_u64(seed)` + `set_stream(k)`), so reports
//! are bit-identical for a given `(space, config)` regardless of how many
//! workers execute the chunks. The generator and splitting rule are frozen;
//! changing either is a format break.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{self, WignerReport};
use crate::dict::{EventDict, Spin, SPINS};
use crate::prob::ProbSpace;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Sampling parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Trials per worker chunk (and per RNG substream).
    pub chunk: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 1_000_000,
            seed: 7,
            chunk: 65_536,
        }
    }
}

/// Per-atom sampling outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomCount {
    pub name: String,
    pub expected: f64,
    pub count: u64,
    pub frequency: f64,
}

/// Empirical conditional outcome probability for one setting pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondCell {
    pub i: usize,
    pub j: usize,
    pub a: Spin,
    pub b: Spin,
    pub expected: f64,
    pub empirical: f64,
    pub block_count: u64,
}

/// Full report of one sampling run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    /// Setting angles, when the sampled space has experiment structure;
    /// needed to resolve inequality queries against blocks.
    pub angles_deg: Option<[f64; 3]>,
    pub atoms: Vec<AtomCount>,
    pub max_atom_deviation: f64,
    pub conditional: Option<Vec<CondCell>>,
    pub max_conditional_deviation: Option<f64>,
    /// Empirical expectation table E(i, j) over setting pairs.
    pub expectations: Option<[[f64; 3]; 3]>,
}

/// Draw per-atom counts from the space.
pub fn sample_counts<N: Scalar>(space: &ProbSpace<N>, cfg: &SimConfig) -> Result<Vec<u64>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if cfg.chunk == 0 {
        return Err(Error::InvalidInput("chunk must be at least 1".into()));
    }
    let n = space.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for atom in space.atoms() {
        acc += atom.weight.to_f64();
        cumulative.push(acc);
    }
    let total = acc;
    let chunks = cfg.trials.div_ceil(cfg.chunk);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k);
            let lo = k * cfg.chunk;
            let hi = ((k + 1) * cfg.chunk).min(cfg.trials);
            let mut local = vec![0u64; n];
            for _ in lo..hi {
                let u: f64 = rng.gen::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= u).min(n - 1);
                local[idx] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

/// Sample a bare space: atom frequencies and their worst deviation.
pub fn simulate_space<N: Scalar>(space: &ProbSpace<N>, cfg: &SimConfig) -> Result<SimReport> {
    let counts = sample_counts(space, cfg)?;
    Ok(assemble_report(space, None, None, cfg, &counts))
}

/// Sample a space that carries the standard experiment dictionary: adds the
/// empirical conditional table `p̂(a b | i j)` and expectation matrix.
pub fn simulate_model<N: Scalar>(
    space: &ProbSpace<N>,
    dict: &EventDict,
    angles_deg: [f64; 3],
    cfg: &SimConfig,
) -> Result<SimReport> {
    dict.validate(space, false)?;
    let counts = sample_counts(space, cfg)?;
    Ok(assemble_report(space, Some(dict), Some(angles_deg), cfg, &counts))
}

fn assemble_report<N: Scalar>(
    space: &ProbSpace<N>,
    dict: Option<&EventDict>,
    angles_deg: Option<[f64; 3]>,
    cfg: &SimConfig,
    counts: &[u64],
) -> SimReport {
    let trials = cfg.trials as f64;
    let mut atoms = Vec::with_capacity(space.len());
    let mut max_atom_deviation = 0.0f64;
    for (atom, &count) in space.atoms().iter().zip(counts) {
        let expected = atom.weight.to_f64();
        let frequency = count as f64 / trials;
        max_atom_deviation = max_atom_deviation.max((frequency - expected).abs());
        atoms.push(AtomCount {
            name: atom.name.clone(),
            expected,
            count,
            frequency,
        });
    }

    let mut conditional = None;
    let mut max_conditional_deviation = None;
    let mut expectations = None;
    if let Some(dict) = dict {
        let membership = |event: &crate::prob::Event| -> Vec<bool> {
            space
                .atoms()
                .iter()
                .map(|a| event.contains(&a.name))
                .collect()
        };
        let count_of = |mask: &[bool]| -> u64 {
            mask.iter()
                .zip(counts)
                .filter(|(m, _)| **m)
                .map(|(_, c)| c)
                .sum()
        };
        let mut cells = Vec::with_capacity(36);
        let mut worst = 0.0f64;
        let mut table = [[0.0f64; 3]; 3];
        for i in 1..=3 {
            for j in 1..=3 {
                let block = dict.block(i, j).expect("validated dictionary");
                let block_mask = membership(&block);
                let block_count = count_of(&block_mask);
                let block_mass = space.probability(&block).expect("validated").to_f64();
                let mut e_acc = 0.0;
                for a in SPINS {
                    for b in SPINS {
                        let cell = dict
                            .la(i, a)
                            .expect("validated")
                            .intersect(dict.rb(j, b).expect("validated"));
                        let cell_mask = membership(&cell);
                        let joint: u64 = cell_mask
                            .iter()
                            .zip(&block_mask)
                            .zip(counts)
                            .filter(|((c, bl), _)| **c && **bl)
                            .map(|(_, n)| n)
                            .sum();
                        let empirical = if block_count > 0 {
                            joint as f64 / block_count as f64
                        } else {
                            0.0
                        };
                        let expected = if block_mass > 0.0 {
                            space.probability(&cell.intersect(&block)).expect("validated").to_f64()
                                / block_mass
                        } else {
                            0.0
                        };
                        if block_count > 0 {
                            worst = worst.max((empirical - expected).abs());
                        }
                        e_acc += a.sign() * b.sign() * empirical;
                        cells.push(CondCell {
                            i,
                            j,
                            a,
                            b,
                            expected,
                            empirical,
                            block_count,
                        });
                    }
                }
                table[i - 1][j - 1] = e_acc;
            }
        }
        conditional = Some(cells);
        max_conditional_deviation = Some(worst);
        expectations = Some(table);
    }

    SimReport {
        config: *cfg,
        angles_deg,
        atoms,
        max_atom_deviation,
        conditional,
        max_conditional_deviation,
        expectations,
    }
}

/// Find the setting pair whose angles match `(left, right)`.
fn block_for_angles(report: &SimReport, left: f64, right: f64) -> Result<(usize, usize)> {
    let angles = report.angles_deg.ok_or_else(|| {
        Error::Coverage("the report carries no setting angles".to_string())
    })?;
    let find = |t: f64| -> Option<usize> {
        angles
            .iter()
            .position(|&a| (a.rem_euclid(360.0) - t.rem_euclid(360.0)).abs() < 1e-9)
    };
    match (find(left), find(right)) {
        (Some(i), Some(j)) => Ok((i + 1, j + 1)),
        _ => Err(Error::Coverage(format!(
            "no setting pair at angles ({left}°, {right}°)"
        ))),
    }
}

fn empirical_joint_up_up(report: &SimReport, left: f64, right: f64) -> Result<f64> {
    let (i, j) = block_for_angles(report, left, right)?;
    let cells = report
        .conditional
        .as_ref()
        .ok_or_else(|| Error::Coverage("the report has no conditional table".to_string()))?;
    let cell = cells
        .iter()
        .find(|c| c.i == i && c.j == j && c.a == Spin::Up && c.b == Spin::Up)
        .ok_or_else(|| Error::Coverage(format!("no cell for block ({i},{j})")))?;
    if cell.block_count == 0 {
        return Err(Error::Coverage(format!(
            "no samples landed in block ({i},{j})"
        )));
    }
    Ok(cell.empirical)
}

/// Plug empirical conditionals into the three-setting inequality evaluator.
pub fn empirical_wigner(report: &SimReport, t1: f64, t2: f64, t3: f64) -> Result<WignerReport> {
    bell::wigner(
        |l, r| empirical_joint_up_up(report, l, r),
        t1,
        t2,
        t3,
        0.0,
    )
}

/// CHSH combination of empirical expectations at the given setting indices
/// (`left`, `right` are 1-based pairs).
pub fn empirical_chsh(report: &SimReport, left: [usize; 2], right: [usize; 2]) -> Result<f64> {
    let table = report
        .expectations
        .ok_or_else(|| Error::Coverage("the report has no expectation table".to_string()))?;
    let mut e = [[0.0; 2]; 2];
    for (x, &li) in left.iter().enumerate() {
        for (y, &rj) in right.iter().enumerate() {
            if !(1..=3).contains(&li) || !(1..=3).contains(&rj) {
                return Err(Error::InvalidInput("setting indices must be 1..=3".into()));
            }
            e[x][y] = table[li - 1][rj - 1];
        }
    }
    bell::chsh(&e)
}
