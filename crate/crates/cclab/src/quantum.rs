//! Independent oracle for singlet-state statistics, and the construction of
//! the "surface" classical space in which those statistics appear as
//! conditional probabilities on measurement events.
//!
//! Two independent computations of the joint outcome probability are kept:
//! the closed form `(1 − ab·cos Δ)/4` ([`singlet_joint`]) and a 4×4
//! density-matrix trace ([`singlet_joint_trace`]). The second exists purely
//! as a cross-check of the first; production code uses the closed form.

use crate::dict::{key_l, key_la, key_r, key_rb, EventDict, Spin, KEY_LAMBDA, SPINS};
use crate::prob::{Event, ProbSpace};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// A coplanar measurement direction, stored in degrees normalized to
/// `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Direction(f64);

impl Direction {
    pub fn new(degrees: f64) -> Self {
        Direction(degrees.rem_euclid(360.0))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }
}

/// Joint probability of outcomes `(a, b)` at settings `(l, r)` on the
/// singlet state: `(1 − ab·cos(θ_L − θ_R)) / 4`.
pub fn singlet_joint(l: Direction, r: Direction, a: Spin, b: Spin) -> f64 {
    singlet_joint_in::<f64>(l, r, a, b).expect("float cosine always exists")
}

/// Generic-scalar version of [`singlet_joint`]; in rational mode the angle
/// difference must have a rational cosine.
pub fn singlet_joint_in<N: Scalar>(l: Direction, r: Direction, a: Spin, b: Spin) -> Result<N> {
    let cos = N::cos_deg(l.degrees() - r.degrees())?;
    let ab = a.sign() * b.sign();
    let signed = if ab > 0.0 { cos } else { -cos };
    Ok((N::one() - signed) * N::ratio(1, 4))
}

/// Expectation of the outcome product at settings `(l, r)`: `−cos(θ_L − θ_R)`.
pub fn singlet_expectation(l: Direction, r: Direction) -> f64 {
    -(l.degrees() - r.degrees()).to_radians().cos()
}

// ---------------------------------------------------------------------------
// Density-matrix reference path.
//
// Coplanar directions make every matrix real: the spin-up state along θ is
// (cos θ/2, sin θ/2), the singlet is (|+-⟩ − |-+⟩)/√2 in any basis, and the
// joint probability is Tr(ρ · P_a(θL) ⊗ P_b(θR)).
// ---------------------------------------------------------------------------

type Mat2 = [[f64; 2]; 2];
type Mat4 = [[f64; 4]; 4];

fn projector(theta_deg: f64, outcome: Spin) -> Mat2 {
    let half = theta_deg.to_radians() / 2.0;
    let (c, s) = (half.cos(), half.sin());
    // spin-down along θ is the orthogonal state (−sin θ/2, cos θ/2)
    let v = match outcome {
        Spin::Up => [c, s],
        Spin::Down => [-s, c],
    };
    [[v[0] * v[0], v[0] * v[1]], [v[1] * v[0], v[1] * v[1]]]
}

fn kron(a: Mat2, b: Mat2) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn singlet_density() -> Mat4 {
    // |Ψ⟩ = (|01⟩ − |10⟩)/√2 in the z-basis ordering |00⟩,|01⟩,|10⟩,|11⟩.
    let psi = [0.0, std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2, 0.0];
    let mut rho = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = psi[i] * psi[j];
        }
    }
    rho
}

/// Reference computation of the joint probability through the explicit 4×4
/// singlet density matrix and spin projectors. Slower than
/// [`singlet_joint`]; retained as an independent cross-check.
pub fn singlet_joint_trace(l: Direction, r: Direction, a: Spin, b: Spin) -> f64 {
    let rho = singlet_density();
    let proj = kron(projector(l.degrees(), a), projector(r.degrees(), b));
    let mut trace = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            trace += rho[i][j] * proj[j][i];
        }
    }
    trace
}

// ---------------------------------------------------------------------------
// Setting distributions and the surface space.
// ---------------------------------------------------------------------------

/// Independent distributions over the three settings of each wing; the joint
/// setting distribution is their product.
#[derive(Debug, Clone)]
pub struct SettingDistribution<N: Scalar> {
    left: [N; 3],
    right: [N; 3],
}

impl<N: Scalar> SettingDistribution<N> {
    pub fn new(left: [N; 3], right: [N; 3]) -> Result<Self> {
        for side in [&left, &right] {
            let mut total = N::zero();
            for p in side {
                if *p <= N::zero() {
                    return Err(Error::InvalidInput(
                        "setting probabilities must be strictly positive".into(),
                    ));
                }
                total = total + p.clone();
            }
            if !N::is_normalized(&total) {
                return Err(Error::InvalidInput(format!(
                    "setting probabilities must sum to 1, got {total}"
                )));
            }
        }
        Ok(SettingDistribution { left, right })
    }

    pub fn uniform() -> Self {
        let third = || N::ratio(1, 3);
        SettingDistribution {
            left: [third(), third(), third()],
            right: [third(), third(), third()],
        }
    }

    pub fn left(&self, i: usize) -> &N {
        &self.left[i - 1]
    }

    pub fn right(&self, j: usize) -> &N {
        &self.right[j - 1]
    }

    pub fn left_all(&self) -> &[N; 3] {
        &self.left
    }

    pub fn right_all(&self) -> &[N; 3] {
        &self.right
    }
}

/// Name of the atom carrying the mass outside `Lambda` (failed preparation).
pub const NULL_ATOM: &str = "prep_fail";

fn surface_atom_name(i: usize, j: usize, a: Spin, b: Spin) -> String {
    format!("s{i}{j}_{}{}", a.tag(), b.tag())
}

/// A surface space together with its standard event dictionary.
pub struct SurfaceSpace<N: Scalar> {
    pub space: ProbSpace<N>,
    pub dict: EventDict,
}

/// Build the classical space whose atoms are `(setting pair, outcome pair)`
/// with weights `(1 − null_mass)·π_L(i)·π_R(j)·singlet_joint`, plus one
/// null-preparation atom when `null_mass > 0`. Conditional on `L_i ∧ R_j`
/// the outcome statistics equal the singlet oracle's exactly.
pub fn build_surface_space<N: Scalar>(
    angles: [Direction; 3],
    pi: &SettingDistribution<N>,
    null_mass: N,
) -> Result<SurfaceSpace<N>> {
    if null_mass < N::zero() || null_mass >= N::one() {
        return Err(Error::InvalidInput(format!(
            "null mass must lie in [0, 1), got {null_mass}"
        )));
    }
    let live = N::one() - null_mass.clone();
    let mut atoms: Vec<(String, N)> = Vec::with_capacity(37);
    for i in 1..=3 {
        for j in 1..=3 {
            for a in SPINS {
                for b in SPINS {
                    let q: N = singlet_joint_in(angles[i - 1], angles[j - 1], a, b)?;
                    let w = live.clone() * pi.left(i).clone() * pi.right(j).clone() * q;
                    atoms.push((surface_atom_name(i, j, a, b), w));
                }
            }
        }
    }
    let has_null = !null_mass.is_zero_value();
    if has_null {
        atoms.push((NULL_ATOM.to_string(), null_mass));
    }
    let space = ProbSpace::new(atoms)?;
    let mut dict = EventDict::new();
    let member = |pred: &dyn Fn(usize, usize, Spin, Spin) -> bool| -> Event {
        let mut names = Vec::new();
        for i in 1..=3 {
            for j in 1..=3 {
                for a in SPINS {
                    for b in SPINS {
                        if pred(i, j, a, b) {
                            names.push(surface_atom_name(i, j, a, b));
                        }
                    }
                }
            }
        }
        Event::new(names)
    };
    for i in 1..=3 {
        dict.insert(key_l(i), member(&|ii, _, _, _| ii == i));
        dict.insert(key_r(i), member(&|_, jj, _, _| jj == i));
        for s in SPINS {
            dict.insert(key_la(i, s), member(&|ii, _, a, _| ii == i && a == s));
            dict.insert(key_rb(i, s), member(&|_, jj, _, b| jj == i && b == s));
        }
    }
    dict.insert(KEY_LAMBDA, member(&|_, _, _, _| true));
    Ok(SurfaceSpace { space, dict })
}
