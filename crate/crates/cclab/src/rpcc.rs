//! Reichenbach screening-off criterion: residual checker, brute-force
//! search for common causes, and completion of a space with a common cause
//! for a given correlated pair.
//!
//! Screening equalities are evaluated in cleared-denominator form,
//! `p(A∧B∧C)·p(C) − p(A∧C)·p(B∧C)` (and the ¬C analogue), so they are exact
//! polynomials in the measure. Statistical-relevance clauses are strict
//! inequalities with a configurable positive margin; for negatively
//! correlated pairs the orientation of the `B` clause flips (the symmetric
//! treatment of negative correlations), and the report records which
//! convention applied.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::prob::{Embedding, Event, ProbSpace};
use crate::scalar::Scalar;
use crate::solver::{self, hinge};
use crate::{Error, Result};

/// Sign of the correlation a criterion was oriented by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationSign {
    Positive,
    Negative,
    Zero,
}

/// Residuals and verdicts of the four screening-off clauses for one
/// candidate common cause.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    /// Cleared-denominator residual of screening on C.
    pub screen_on_c: f64,
    /// Cleared-denominator residual of screening on ¬C.
    pub screen_on_not_c: f64,
    /// Signed margin `p(A|C) − p(A|¬C)`.
    pub relevance_a: f64,
    /// Signed margin `p(B|C) − p(B|¬C)`.
    pub relevance_b: f64,
    pub correlation_sign: CorrelationSign,
    pub pass_screen_on_c: bool,
    pub pass_screen_on_not_c: bool,
    pub pass_relevance_a: bool,
    pub pass_relevance_b: bool,
    pub pass: bool,
}

impl CriterionReport {
    pub fn max_screening_residual(&self) -> f64 {
        self.screen_on_c.abs().max(self.screen_on_not_c.abs())
    }
}

/// Raw cell masses entering the criterion; shared by the event-based checker
/// and the mask-based exhaustive search.
#[derive(Debug, Clone, Copy)]
struct Cells {
    pc: f64,
    pa: f64,
    pb: f64,
    pab: f64,
    pac: f64,
    pbc: f64,
    pabc: f64,
}

fn criterion_from_cells(cells: Cells, sign: CorrelationSign, tol: f64, margin: f64) -> CriterionReport {
    let Cells {
        pc,
        pa,
        pb,
        pab,
        pac,
        pbc,
        pabc,
    } = cells;
    let pnc = 1.0 - pc;
    let screen_on_c = pabc * pc - pac * pbc;
    let screen_on_not_c = (pab - pabc) * pnc - (pa - pac) * (pb - pbc);
    let relevance_a = pac / pc - (pa - pac) / pnc;
    let relevance_b = pbc / pc - (pb - pbc) / pnc;
    let pass_screen_on_c = screen_on_c.abs() <= tol;
    let pass_screen_on_not_c = screen_on_not_c.abs() <= tol;
    let (pass_relevance_a, pass_relevance_b) = match sign {
        CorrelationSign::Positive => (relevance_a > margin, relevance_b > margin),
        CorrelationSign::Negative => (relevance_a > margin, relevance_b < -margin),
        CorrelationSign::Zero => (false, false),
    };
    let pass = pass_screen_on_c && pass_screen_on_not_c && pass_relevance_a && pass_relevance_b;
    CriterionReport {
        screen_on_c,
        screen_on_not_c,
        relevance_a,
        relevance_b,
        correlation_sign: sign,
        pass_screen_on_c,
        pass_screen_on_not_c,
        pass_relevance_a,
        pass_relevance_b,
        pass,
    }
}

fn sign_of<N: Scalar>(corr: &N) -> CorrelationSign {
    if *corr > N::zero() {
        CorrelationSign::Positive
    } else if *corr < N::zero() {
        CorrelationSign::Negative
    } else {
        CorrelationSign::Zero
    }
}

/// Evaluate the screening-off criterion for candidate `c` on the pair
/// `(a, b)`. `p(C)` must lie strictly between 0 and 1.
pub fn check_common_cause<N: Scalar>(
    space: &ProbSpace<N>,
    a: &Event,
    b: &Event,
    c: &Event,
    tol: f64,
    margin: f64,
) -> Result<CriterionReport> {
    space.validate_event(a)?;
    space.validate_event(b)?;
    space.validate_event(c)?;
    let pc = space.probability(c)?;
    if pc.is_zero_value() || pc >= N::one() {
        return Err(Error::DegenerateCause(format!("p(C) = {pc}")));
    }
    let corr = space.correlation(a, b)?;
    let sign = sign_of(&corr);
    let ab = a.intersect(b);
    let cells = Cells {
        pc: pc.to_f64(),
        pa: space.probability(a)?.to_f64(),
        pb: space.probability(b)?.to_f64(),
        pab: space.probability(&ab)?.to_f64(),
        pac: space.probability(&a.intersect(c))?.to_f64(),
        pbc: space.probability(&b.intersect(c))?.to_f64(),
        pabc: space.probability(&ab.intersect(c))?.to_f64(),
    };
    Ok(criterion_from_cells(cells, sign, tol, margin))
}

/// Hard cap on exhaustive candidate enumeration.
pub const SEARCH_ATOM_LIMIT: usize = 20;

/// Enumerate candidate events in canonical order (by cardinality, then by
/// lexicographic member order over name-sorted atoms) and return the first
/// one passing [`check_common_cause`], or `None`.
pub fn find_common_cause<N: Scalar>(
    space: &ProbSpace<N>,
    a: &Event,
    b: &Event,
    tol: f64,
    margin: f64,
) -> Result<Option<Event>> {
    let n = space.len();
    if n > SEARCH_ATOM_LIMIT {
        return Err(Error::SpaceTooLarge {
            atoms: n,
            limit: SEARCH_ATOM_LIMIT,
        });
    }
    space.validate_event(a)?;
    space.validate_event(b)?;

    // name-sorted axis so subset enumeration is canonical
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| space.atoms()[x].name.cmp(&space.atoms()[y].name));
    let weights: Vec<f64> = order
        .iter()
        .map(|&i| space.atoms()[i].weight.to_f64())
        .collect();
    let in_a: Vec<bool> = order
        .iter()
        .map(|&i| a.contains(&space.atoms()[i].name))
        .collect();
    let in_b: Vec<bool> = order
        .iter()
        .map(|&i| b.contains(&space.atoms()[i].name))
        .collect();

    let pa: f64 = weights.iter().zip(&in_a).filter(|(_, &m)| m).map(|(w, _)| w).sum();
    let pb: f64 = weights.iter().zip(&in_b).filter(|(_, &m)| m).map(|(w, _)| w).sum();
    let pab: f64 = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| in_a[*i] && in_b[*i])
        .map(|(_, w)| w)
        .sum();
    let corr = pab - pa * pb;
    let sign = sign_of(&corr);

    for cardinality in 1..n {
        let mut combo: Vec<usize> = (0..cardinality).collect();
        loop {
            let mut pc = 0.0;
            let mut pac = 0.0;
            let mut pbc = 0.0;
            let mut pabc = 0.0;
            for &k in &combo {
                let w = weights[k];
                pc += w;
                if in_a[k] {
                    pac += w;
                }
                if in_b[k] {
                    pbc += w;
                }
                if in_a[k] && in_b[k] {
                    pabc += w;
                }
            }
            if pc > 0.0 && pc < 1.0 {
                let cells = Cells {
                    pc,
                    pa,
                    pb,
                    pab,
                    pac,
                    pbc,
                    pabc,
                };
                let report = criterion_from_cells(cells, sign, tol, margin);
                if report.pass {
                    let names = combo
                        .iter()
                        .map(|&k| space.atoms()[order[k]].name.clone());
                    return Ok(Some(Event::new(names)));
                }
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Ok(None)
}

/// Advance `combo` to the next k-combination of `0..n` in lexicographic
/// order; returns `false` after the last one.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Result of completing a space with a common cause for a pair.
#[derive(Debug)]
pub struct CompletabilityResult<N: Scalar> {
    pub extended: ProbSpace<N>,
    pub common_cause: Event,
    pub embedding: Embedding,
    /// Independent re-check of the returned cause on the extended space.
    pub report: CriterionReport,
    /// In-cause fractions for the cells (a∧b, a∧¬b, ¬a∧b, ¬a∧¬b).
    pub fractions: [f64; 4],
    pub diagnostics: solver::Diagnostics,
}

/// Extend `space` so that the correlated pair `(a, b)` acquires a common
/// cause: every atom of each of the four cells of the `(a, b)` partition is
/// split into an in-cause and an out-of-cause part, with per-cell fractions
/// found by seeded multi-start feasibility search. Original event
/// probabilities are preserved by the embedding (exactly for rational
/// spaces). An infeasible search is an error carrying the best residual.
pub fn complete_with_common_cause<N: Scalar>(
    space: &ProbSpace<N>,
    a: &Event,
    b: &Event,
    tol: f64,
    margin: f64,
    seed: u64,
) -> Result<CompletabilityResult<N>> {
    space.validate_event(a)?;
    space.validate_event(b)?;
    let corr = space.correlation(a, b)?;
    let sign = sign_of(&corr);
    if sign == CorrelationSign::Zero {
        return Err(Error::InvalidInput(
            "the pair is uncorrelated; nothing to explain".into(),
        ));
    }

    // cell masses (a∧b, a∧¬b, ¬a∧b, ¬a∧¬b)
    let not_a = space.not(a)?;
    let not_b = space.not(b)?;
    let cells = [
        a.intersect(b),
        a.intersect(&not_b),
        not_a.intersect(b),
        not_a.intersect(&not_b),
    ];
    let w: Vec<f64> = cells
        .iter()
        .map(|e| space.probability(e).map(|p| p.to_f64()))
        .collect::<Result<_>>()?;
    let pa = w[0] + w[1];
    let pb = w[0] + w[2];

    let flip_b = sign == CorrelationSign::Negative;
    let margin_target = margin * 1.01 + 1e-12;
    let residuals = move |t: &[f64], out: &mut [f64]| {
        let z = t[0] * w[0];
        let x = z + t[1] * w[1];
        let y = z + t[2] * w[2];
        let s = z + t[1] * w[1] + t[2] * w[2] + t[3] * w[3];
        out[0] = z * s - x * y;
        out[1] = (w[0] - z) * (1.0 - s) - (pa - x) * (pb - y);
        let (da, db) = if s > 1e-12 && s < 1.0 - 1e-12 {
            (x / s - (pa - x) / (1.0 - s), y / s - (pb - y) / (1.0 - s))
        } else {
            (-1.0, if flip_b { 1.0 } else { -1.0 })
        };
        out[2] = hinge(margin_target - da);
        out[3] = if flip_b {
            hinge(margin_target + db)
        } else {
            hinge(margin_target - db)
        };
    };
    let problem = solver::Problem {
        lower: vec![0.0; 4],
        upper: vec![1.0; 4],
        residual_len: 4,
        residuals: &residuals,
        project: None,
    };
    let opts = solver::Options {
        starts: 64,
        max_iters: 500,
        seed,
        target: 1e-26,
        chunk: 8,
    };
    // analytic warm start: the cause "all of a" is always feasible
    let warm = vec![vec![1.0, 1.0, 0.0, 0.0]];
    let (t, diagnostics) = solver::minimize_multistart(&problem, &opts, &warm);

    // build the extension in the space's own arithmetic
    let mut splits: BTreeMap<String, Vec<N>> = BTreeMap::new();
    for (cell, fraction) in cells.iter().zip(&t) {
        let f_in = N::lift_f64(*fraction)?;
        let f_out = N::one() - f_in.clone();
        for name in cell.members() {
            splits.insert(name.to_string(), vec![f_in.clone(), f_out.clone()]);
        }
    }
    let (extended, embedding) = space.extend(&splits)?;
    let common_cause = Event::new(
        embedding
            .atom_map()
            .values()
            .filter(|successors| successors.len() == 2)
            .map(|successors| successors[0].clone()),
    );
    let image_a = embedding.map_event(a)?;
    let image_b = embedding.map_event(b)?;
    let report = check_common_cause(&extended, &image_a, &image_b, &common_cause, tol, margin)
        .map_err(|e| Error::Infeasible {
            best_residual: diagnostics.best_objective.sqrt(),
            detail: format!("returned cause is degenerate: {e}"),
        })?;
    if !report.pass {
        return Err(Error::Infeasible {
            best_residual: report
                .max_screening_residual()
                .max(diagnostics.best_objective.sqrt()),
            detail: format!(
                "screening residuals ({:.3e}, {:.3e}) or margins ({:.3e}, {:.3e}) \
                 failed at tol {tol:.1e}, margin {margin:.1e}",
                report.screen_on_c, report.screen_on_not_c, report.relevance_a, report.relevance_b
            ),
        });
    }
    Ok(CompletabilityResult {
        extended,
        common_cause,
        embedding,
        report,
        fractions: [t[0], t[1], t[2], t[3]],
        diagnostics,
    })
}

/// Per-pair reports for one candidate against several correlations; the
/// verdict is "common common cause" only when every pair passes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommonCommonReport {
    pub per_pair: Vec<CriterionReport>,
    pub all_pass: bool,
}

/// Check whether `c` screens off every listed pair simultaneously.
pub fn check_common_common_cause<N: Scalar>(
    space: &ProbSpace<N>,
    pairs: &[(Event, Event)],
    c: &Event,
    tol: f64,
    margin: f64,
) -> Result<CommonCommonReport> {
    let mut per_pair = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        per_pair.push(check_common_cause(space, a, b, c, tol, margin)?);
    }
    let all_pass = per_pair.iter().all(|r| r.pass);
    Ok(CommonCommonReport { per_pair, all_pass })
}
