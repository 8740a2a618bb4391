//! Condition checkers for two-wing experiment models: factorizability,
//! outcome / parameter / measurement independence, hidden locality, and the
//! CHSH and Wigner inequality evaluators.
//!
//! Every checker reports residual magnitudes together with the worst
//! offending instance, never a bare boolean: tolerances are policy, and the
//! caller should see the margins.

use serde::{Deserialize, Serialize};

use crate::dict::{ModelView, Spin};
use crate::prob::Event;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Worst instance found while checking a condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub instance: String,
    pub residual: f64,
}

/// Outcome of checking one condition over one or more instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    /// Largest residual magnitude over all instances checked.
    pub residual: f64,
    /// `true` when every instance satisfied the condition within tolerance.
    pub holds: bool,
    pub worst: Option<Witness>,
    pub instances: usize,
}

impl ConditionReport {
    fn from_instances(condition: &str, tol: f64, instances: Vec<(String, f64)>) -> Self {
        let count = instances.len();
        let worst = instances
            .into_iter()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(instance, residual)| Witness { instance, residual });
        let residual = worst.as_ref().map(|w| w.residual.abs()).unwrap_or(0.0);
        ConditionReport {
            condition: condition.to_string(),
            residual,
            holds: residual <= tol,
            worst,
            instances: count,
        }
    }
}

fn conditional_f64<N: Scalar>(view: &ModelView<N>, a: &Event, given: &Event) -> Result<f64> {
    Ok(view.space.conditional(a, given)?.to_f64())
}

/// Residual of `p(L_i^a ∧ R_j^b | L_i ∧ R_j ∧ C) −
/// p(L_i^a | L_i ∧ C) · p(R_j^b | R_j ∧ C)`.
#[allow(clippy::too_many_arguments)]
pub fn check_factorizability<N: Scalar>(
    view: &ModelView<N>,
    c: &Event,
    c_label: &str,
    i: usize,
    j: usize,
    a: Spin,
    b: Spin,
    tol: f64,
) -> Result<ConditionReport> {
    let la = view.dict.la(i, a)?;
    let rb = view.dict.rb(j, b)?;
    let li = view.dict.l(i)?;
    let rj = view.dict.r(j)?;
    let joint_given = li.intersect(rj).intersect(c);
    let lhs = conditional_f64(view, &la.intersect(rb), &joint_given)?;
    let left = conditional_f64(view, la, &li.intersect(c))?;
    let right = conditional_f64(view, rb, &rj.intersect(c))?;
    let residual = lhs - left * right;
    Ok(ConditionReport::from_instances(
        "factorizability",
        tol,
        vec![(format!("i={i} j={j} a={a} b={b} C={c_label}"), residual)],
    ))
}

/// Residuals `|p(C ∧ L_i) − p(C)p(L_i)|` and `|p(C ∧ R_j) − p(C)p(R_j)|`
/// over all settings.
pub fn check_measurement_independence<N: Scalar>(
    view: &ModelView<N>,
    c: &Event,
    c_label: &str,
    tol: f64,
) -> Result<ConditionReport> {
    let pc = view.space.probability(c)?.to_f64();
    let mut instances = Vec::with_capacity(6);
    for i in 1..=3 {
        let li = view.dict.l(i)?;
        let residual =
            view.space.probability(&c.intersect(li))?.to_f64() - pc * view.space.probability(li)?.to_f64();
        instances.push((format!("L{i} C={c_label}"), residual));
        let rj = view.dict.r(i)?;
        let residual =
            view.space.probability(&c.intersect(rj))?.to_f64() - pc * view.space.probability(rj)?.to_f64();
        instances.push((format!("R{i} C={c_label}"), residual));
    }
    Ok(ConditionReport::from_instances(
        "measurement_independence",
        tol,
        instances,
    ))
}

/// Residual `|p(C ∧ L_i ∧ R_j) − p(C)·p(L_i ∧ R_j)|`.
pub fn check_hidden_locality<N: Scalar>(
    view: &ModelView<N>,
    c: &Event,
    c_label: &str,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<ConditionReport> {
    let block = view.dict.block(i, j)?;
    let residual = view.space.probability(&c.intersect(&block))?.to_f64()
        - view.space.probability(c)?.to_f64() * view.space.probability(&block)?.to_f64();
    Ok(ConditionReport::from_instances(
        "hidden_locality",
        tol,
        vec![(format!("i={i} j={j} C={c_label}"), residual)],
    ))
}

/// Residual of outcome independence: `p(L_i^a ∧ R_j^b | L_i ∧ R_j ∧ C) −
/// p(L_i^a | L_i ∧ R_j ∧ C) · p(R_j^b | L_i ∧ R_j ∧ C)`.
#[allow(clippy::too_many_arguments)]
pub fn check_outcome_independence<N: Scalar>(
    view: &ModelView<N>,
    c: &Event,
    c_label: &str,
    i: usize,
    j: usize,
    a: Spin,
    b: Spin,
    tol: f64,
) -> Result<ConditionReport> {
    let la = view.dict.la(i, a)?;
    let rb = view.dict.rb(j, b)?;
    let given = view.dict.block(i, j)?.intersect(c);
    if view.space.probability(&given)?.is_zero_value() {
        return Err(Error::NullConditioning(format!(
            "L{i} ∧ R{j} ∧ {c_label} has zero probability"
        )));
    }
    let lhs = conditional_f64(view, &la.intersect(rb), &given)?;
    let rhs = conditional_f64(view, la, &given)? * conditional_f64(view, rb, &given)?;
    Ok(ConditionReport::from_instances(
        "outcome_independence",
        tol,
        vec![(format!("i={i} j={j} a={a} b={b} C={c_label}"), lhs - rhs)],
    ))
}

/// Residuals of parameter independence:
/// `|p(L_i^a | L_i ∧ R_j ∧ C) − p(L_i^a | L_i ∧ C)|` and the mirror-image
/// right-wing quantity.
#[allow(clippy::too_many_arguments)]
pub fn check_parameter_independence<N: Scalar>(
    view: &ModelView<N>,
    c: &Event,
    c_label: &str,
    i: usize,
    j: usize,
    a: Spin,
    b: Spin,
    tol: f64,
) -> Result<ConditionReport> {
    let la = view.dict.la(i, a)?;
    let rb = view.dict.rb(j, b)?;
    let li = view.dict.l(i)?;
    let rj = view.dict.r(j)?;
    let block_c = li.intersect(rj).intersect(c);
    let left = conditional_f64(view, la, &block_c)? - conditional_f64(view, la, &li.intersect(c))?;
    let right = conditional_f64(view, rb, &block_c)? - conditional_f64(view, rb, &rj.intersect(c))?;
    Ok(ConditionReport::from_instances(
        "parameter_independence",
        tol,
        vec![
            (format!("left i={i} j={j} a={a} C={c_label}"), left),
            (format!("right i={i} j={j} b={b} C={c_label}"), right),
        ],
    ))
}

// ---------------------------------------------------------------------------
// Inequality evaluators.
// ---------------------------------------------------------------------------

/// CHSH combination of a 2×2 expectation table:
/// `S = E(1,1) + E(1,2) + E(2,1) − E(2,2)`. Entries must lie in `[−1, 1]`.
pub fn chsh(e: &[[f64; 2]; 2]) -> Result<f64> {
    for row in e {
        for &v in row {
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "expectation {v} outside [-1, 1]"
                )));
            }
        }
    }
    Ok(e[0][0] + e[0][1] + e[1][0] - e[1][1])
}

/// CHSH score of the singlet state at left settings `(a, a')` and right
/// settings `(b, b')`, using the standard combination
/// `E(a,b) − E(a,b') + E(a',b) + E(a',b')`: the table rows are ordered
/// `(a', a)` so that the minus of [`chsh`] lands on `E(a, b')`.
pub fn singlet_chsh(a: f64, a_prime: f64, b: f64, b_prime: f64) -> f64 {
    use crate::quantum::{singlet_expectation, Direction};
    let e = |l: f64, r: f64| singlet_expectation(Direction::new(l), Direction::new(r));
    let table = [
        [e(a_prime, b), e(a_prime, b_prime)],
        [e(a, b), e(a, b_prime)],
    ];
    chsh(&table).expect("singlet expectations lie in [-1, 1]")
}

/// Report of a three-setting (Wigner-form) inequality evaluation:
/// `p(+,+ | θ1, θ3) ≤ p(+,+ | θ1, θ2) + p(+,+ | θ2, θ3)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`; positive means the inequality is violated.
    pub margin: f64,
    pub violated: bool,
}

/// Evaluate the three-setting inequality on any joint `(+,+)` probability
/// accessor (oracle, model conditionals, or empirical estimates).
pub fn wigner<F>(mut qjoint: F, t1: f64, t2: f64, t3: f64, tol: f64) -> Result<WignerReport>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    if t1 == t2 || t2 == t3 || t1 == t3 {
        return Err(Error::InvalidInput(
            "the three settings must be distinct".into(),
        ));
    }
    let lhs = qjoint(t1, t3)?;
    let rhs = qjoint(t1, t2)? + qjoint(t2, t3)?;
    let margin = lhs - rhs;
    Ok(WignerReport {
        lhs,
        rhs,
        margin,
        violated: margin > tol,
    })
}

/// Expectation table of one of the 16 deterministic two-setting local
/// strategies: bits of `s` fix the left outcomes at the two settings and the
/// right outcomes at the two settings; `E(i,j)` is the outcome product.
pub fn deterministic_strategy_table(s: usize) -> [[f64; 2]; 2] {
    let bit = |k: usize| if s >> k & 1 == 1 { 1.0 } else { -1.0 };
    let left = [bit(0), bit(1)];
    let right = [bit(2), bit(3)];
    let mut table = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            table[i][j] = left[i] * right[j];
        }
    }
    table
}

/// Expectation table of a mixture of the 16 deterministic strategies.
pub fn mixture_table(weights: &[f64; 16]) -> [[f64; 2]; 2] {
    let mut table = [[0.0; 2]; 2];
    for (s, w) in weights.iter().enumerate() {
        let t = deterministic_strategy_table(s);
        for i in 0..2 {
            for j in 0..2 {
                table[i][j] += w * t[i][j];
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::SPINS;
    use crate::prob::ProbSpace;
    use crate::quantum::{build_surface_space, singlet_joint, Direction, SettingDistribution};
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn surface(angles: [f64; 3]) -> (ProbSpace<f64>, crate::dict::EventDict) {
        let dirs = [
            Direction::new(angles[0]),
            Direction::new(angles[1]),
            Direction::new(angles[2]),
        ];
        let pi = SettingDistribution::<f64>::uniform();
        let s = build_surface_space(dirs, &pi, 0.0).unwrap();
        (s.space, s.dict)
    }

    #[test]
    fn chsh_is_two_sqrt_two_at_standard_singlet_angles() {
        let s = singlet_chsh(0.0, 90.0, 45.0, 135.0);
        assert!((s.abs() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12, "{s}");
    }

    #[test]
    fn chsh_rejects_out_of_range_entries() {
        assert!(chsh(&[[1.5, 0.0], [0.0, 0.0]]).is_err());
        assert_eq!(chsh(&[[0.0, 0.0], [0.0, 0.0]]).unwrap(), 0.0);
    }

    #[test]
    fn wigner_oracle_values() {
        let oracle = |l: f64, r: f64| {
            Ok(singlet_joint(
                Direction::new(l),
                Direction::new(r),
                Spin::Up,
                Spin::Up,
            ))
        };
        let report = wigner(oracle, 0.0, 60.0, 120.0, 1e-12).unwrap();
        assert!((report.lhs - 0.375).abs() < 1e-15);
        assert!((report.rhs - 0.25).abs() < 1e-15);
        assert!((report.margin - 0.125).abs() < 1e-15);
        assert!(report.violated);

        let report = wigner(oracle, 0.0, 120.0, 240.0, 1e-12).unwrap();
        assert!((report.lhs - 0.375).abs() < 1e-15);
        assert!((report.rhs - 0.75).abs() < 1e-15);
        assert!(!report.violated);

        assert!(wigner(oracle, 0.0, 0.0, 120.0, 1e-12).is_err());
    }

    #[test]
    fn anticorrelated_assignments_never_violate_wigner() {
        // deterministic anti-correlated models: left outcomes fixed by a sign
        // assignment over the three settings, right outcomes opposite
        for assignment in 0u8..8 {
            let sign = |k: usize| assignment >> k & 1 == 1;
            let q = |l: f64, r: f64| -> Result<f64> {
                let li = (l / 60.0).round() as usize % 3;
                let rj = (r / 60.0).round() as usize % 3;
                let left_up = sign(li);
                let right_up = !sign(rj);
                Ok(if left_up && right_up { 1.0 } else { 0.0 })
            };
            let report = wigner(q, 0.0, 60.0, 120.0, 1e-12).unwrap();
            assert!(!report.violated, "assignment {assignment:08b}: {report:?}");
        }
    }

    #[test]
    fn factorized_surface_model_reports_zero_residuals_on_lambda() {
        // independent wings: equal angles produce a product only in the
        // trivial sense, so build an explicitly factorized toy space instead
        let mut atoms = Vec::new();
        for i in 1..=3 {
            for j in 1..=3 {
                for (a, pa) in [(Spin::Up, 0.6), (Spin::Down, 0.4)] {
                    for (b, pb) in [(Spin::Up, 0.3), (Spin::Down, 0.7)] {
                        atoms.push((
                            format!("s{i}{j}_{}{}", a.tag(), b.tag()),
                            (1.0 / 9.0) * pa * pb,
                        ));
                    }
                }
            }
        }
        let space = ProbSpace::new(atoms).unwrap();
        let mut dict = crate::dict::EventDict::new();
        let member = |pred: &dyn Fn(usize, usize, Spin, Spin) -> bool| {
            let mut names = Vec::new();
            for i in 1..=3 {
                for j in 1..=3 {
                    for a in SPINS {
                        for b in SPINS {
                            if pred(i, j, a, b) {
                                names.push(format!("s{i}{j}_{}{}", a.tag(), b.tag()));
                            }
                        }
                    }
                }
            }
            Event::new(names)
        };
        for i in 1..=3 {
            dict.insert(crate::dict::key_l(i), member(&|ii, _, _, _| ii == i));
            dict.insert(crate::dict::key_r(i), member(&|_, jj, _, _| jj == i));
            for s in SPINS {
                dict.insert(
                    crate::dict::key_la(i, s),
                    member(&|ii, _, a, _| ii == i && a == s),
                );
                dict.insert(
                    crate::dict::key_rb(i, s),
                    member(&|_, jj, _, b| jj == i && b == s),
                );
            }
        }
        dict.insert(crate::dict::KEY_LAMBDA, member(&|_, _, _, _| true));
        let view = ModelView::new(&space, &dict);
        let lambda = dict.lambda().unwrap();
        // Λ is the sure event here, so conditioning on it is degenerate for
        // measurement independence but factorizability is well-defined.
        let f = check_factorizability(&view, lambda, "Lambda", 1, 2, Spin::Up, Spin::Up, TOL)
            .unwrap();
        assert!(f.holds, "{f:?}");
        let oi =
            check_outcome_independence(&view, lambda, "Lambda", 1, 2, Spin::Up, Spin::Up, TOL)
                .unwrap();
        assert!(oi.holds);
        let pi = check_parameter_independence(&view, lambda, "Lambda", 1, 2, Spin::Up, Spin::Up, TOL)
            .unwrap();
        assert!(pi.holds);
        let hl = check_hidden_locality(&view, lambda, "Lambda", 1, 2, TOL).unwrap();
        assert!(hl.holds);
    }

    #[test]
    fn surface_lambda_violates_outcome_independence() {
        let (space, dict) = surface([0.0, 120.0, 240.0]);
        let view = ModelView::new(&space, &dict);
        let lambda = dict.lambda().unwrap();
        let oi =
            check_outcome_independence(&view, lambda, "Lambda", 1, 2, Spin::Up, Spin::Up, TOL)
                .unwrap();
        assert!(!oi.holds);
        assert!((oi.residual - 0.125).abs() < 1e-9, "{oi:?}");
    }

    #[test]
    fn zero_mass_conditioning_is_a_null_conditioning_error() {
        let (space, dict) = surface([0.0, 120.0, 240.0]);
        let view = ModelView::new(&space, &dict);
        // equal settings make the (+,+) cell of the diagonal block empty
        let c = space.event(["s11_pp"]).unwrap();
        assert!(matches!(
            check_outcome_independence(&view, &c, "empty", 1, 1, Spin::Up, Spin::Up, TOL),
            Err(crate::Error::NullConditioning(_))
        ));
    }

    #[test]
    fn containment_forces_measurement_dependence() {
        let (space, dict) = surface([0.0, 120.0, 240.0]);
        // C: a sub-event of the block L1 ∧ R2
        let c = space.event(["s12_pp"]).unwrap();
        let view = ModelView::new(&space, &dict);
        let mi = check_measurement_independence(&view, &c, "sub-block", TOL).unwrap();
        assert!(!mi.holds);
        let pc = space.probability(&c).unwrap();
        let pl1 = space.probability(dict.l(1).unwrap()).unwrap();
        // closed form p(C)(1 − p(L_i)) for the contained setting
        let expected = pc * (1.0 - pl1);
        let li_residual = space
            .probability(&c.intersect(dict.l(1).unwrap()))
            .unwrap()
            - pc * pl1;
        assert!((li_residual - expected).abs() < 1e-16);
        let hl = check_hidden_locality(&view, &c, "sub-block", 1, 2, TOL).unwrap();
        assert!(!hl.holds);
        let pblock = space.probability(&dict.block(1, 2).unwrap()).unwrap();
        assert!((hl.residual - pc * (1.0 - pblock)).abs() < 1e-15);
    }

    #[test]
    fn oi_equals_factorizability_for_contained_causes() {
        let (space, dict) = surface([0.0, 120.0, 240.0]);
        let view = ModelView::new(&space, &dict);
        let c = space.event(["s12_pp", "s12_mm"]).unwrap();
        for a in SPINS {
            for b in SPINS {
                let f =
                    check_factorizability(&view, &c, "c", 1, 2, a, b, TOL).unwrap();
                let oi =
                    check_outcome_independence(&view, &c, "c", 1, 2, a, b, TOL).unwrap();
                assert!(
                    (f.worst.as_ref().unwrap().residual - oi.worst.as_ref().unwrap().residual)
                        .abs()
                        < 1e-15
                );
            }
        }
    }

    /// A mixture of deterministic local strategies (one fixed outcome per
    /// setting per wing) satisfies factorizability, outcome independence and
    /// parameter independence exactly when conditioned on the strategy.
    #[test]
    fn deterministic_strategy_mixture_is_factorizable() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        // 8 left × 8 right deterministic assignments over three settings
        let mut weights = [[0.0f64; 8]; 8];
        let mut total = 0.0;
        for row in weights.iter_mut() {
            for w in row.iter_mut() {
                *w = rng.gen::<f64>();
                total += *w;
            }
        }
        let mut atoms = Vec::new();
        for (sl, row) in weights.iter().enumerate() {
            for (sr, w) in row.iter().enumerate() {
                for i in 1..=3 {
                    for j in 1..=3 {
                        atoms.push((
                            format!("l{sl}r{sr}_i{i}j{j}"),
                            w / total * (1.0 / 9.0),
                        ));
                    }
                }
            }
        }
        let space = ProbSpace::new(atoms).unwrap();
        let left_up = |sl: usize, i: usize| sl >> (i - 1) & 1 == 1;
        let right_up = |sr: usize, j: usize| sr >> (j - 1) & 1 == 1;
        let mut dict = crate::dict::EventDict::new();
        let member = |pred: &dyn Fn(usize, usize, usize, usize) -> bool| {
            let mut names = Vec::new();
            for sl in 0..8 {
                for sr in 0..8 {
                    for i in 1..=3 {
                        for j in 1..=3 {
                            if pred(sl, sr, i, j) {
                                names.push(format!("l{sl}r{sr}_i{i}j{j}"));
                            }
                        }
                    }
                }
            }
            Event::new(names)
        };
        for k in 1..=3 {
            dict.insert(crate::dict::key_l(k), member(&|_, _, i, _| i == k));
            dict.insert(crate::dict::key_r(k), member(&|_, _, _, j| j == k));
            for s in SPINS {
                dict.insert(
                    crate::dict::key_la(k, s),
                    member(&|sl, _, i, _| i == k && left_up(sl, k) == (s == Spin::Up)),
                );
                dict.insert(
                    crate::dict::key_rb(k, s),
                    member(&|_, sr, _, j| j == k && right_up(sr, k) == (s == Spin::Up)),
                );
            }
        }
        dict.insert(crate::dict::KEY_LAMBDA, member(&|_, _, _, _| true));
        let view = ModelView::new(&space, &dict);
        // condition on each strategy event with positive mass
        for sl in 0..8 {
            for sr in 0..8 {
                let strategy = member(&|xl, xr, _, _| xl == sl && xr == sr);
                if space.probability(&strategy).unwrap() <= 0.0 {
                    continue;
                }
                let f = check_factorizability(
                    &view, &strategy, "strategy", 1, 2, Spin::Up, Spin::Up, 1e-12,
                )
                .unwrap();
                assert!(f.holds, "sl={sl} sr={sr}: {f:?}");
                let pi = check_parameter_independence(
                    &view, &strategy, "strategy", 1, 2, Spin::Up, Spin::Up, 1e-12,
                )
                .unwrap();
                assert!(pi.holds, "sl={sl} sr={sr}: {pi:?}");
            }
        }
        // the strategy mixture is setting-independent
        let strategy = member(&|xl, xr, _, _| xl == 3 && xr == 5);
        let mi = check_measurement_independence(&view, &strategy, "strategy", 1e-12).unwrap();
        assert!(mi.holds, "{mi:?}");
    }

    proptest! {
        /// every mixture of the 16 deterministic local strategies obeys
        /// |S| ≤ 2 under the CHSH combination
        #[test]
        fn classical_chsh_bound(raw in prop::collection::vec(0.0f64..1.0, 16)) {
            let total: f64 = raw.iter().sum::<f64>().max(1e-12);
            let mut weights = [0.0; 16];
            for (w, r) in weights.iter_mut().zip(&raw) {
                *w = r / total;
            }
            let s = chsh(&mixture_table(&weights)).unwrap();
            prop_assert!(s.abs() <= 2.0 + 1e-12);
        }
    }
}
