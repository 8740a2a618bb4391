//! The standard event dictionary of a two-wing experiment space: setting
//! events `L_i`, `R_j`, outcome events `L_i^a`, `R_j^b`, the preparation
//! factor `Lambda`, and (for synthesized models) the cause events
//! `C_<i><j>_<ab>`.

use std::collections::BTreeMap;
use std::fmt;

use crate::prob::{Event, ProbSpace};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Spin outcome along a measurement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Spin {
    #[serde(rename = "p")]
    Up,
    #[serde(rename = "m")]
    Down,
}

pub const SPINS: [Spin; 2] = [Spin::Up, Spin::Down];

impl Spin {
    /// ±1 value used in expectation sums.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    /// Single-character tag used in atom and event names (`p`/`m`).
    pub fn tag(self) -> char {
        match self {
            Spin::Up => 'p',
            Spin::Down => 'm',
        }
    }

    pub fn from_tag(c: char) -> Result<Spin> {
        match c {
            'p' | '+' => Ok(Spin::Up),
            'm' | '-' => Ok(Spin::Down),
            other => Err(Error::InvalidInput(format!("bad spin tag {other:?}"))),
        }
    }

    pub fn opposite(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if *self == Spin::Up { '+' } else { '-' })
    }
}

/// Dictionary key for the left setting event.
pub fn key_l(i: usize) -> String {
    format!("L{i}")
}
/// Dictionary key for the right setting event.
pub fn key_r(j: usize) -> String {
    format!("R{j}")
}
/// Dictionary key for a left outcome event.
pub fn key_la(i: usize, a: Spin) -> String {
    format!("L{i}_{}", a.tag())
}
/// Dictionary key for a right outcome event.
pub fn key_rb(j: usize, b: Spin) -> String {
    format!("R{j}_{}", b.tag())
}
/// Dictionary key for a cause event.
pub fn key_c(i: usize, j: usize, a: Spin, b: Spin) -> String {
    format!("C_{i}{j}_{}{}", a.tag(), b.tag())
}
pub const KEY_LAMBDA: &str = "Lambda";

/// Named events over some host space.
#[derive(Debug, Clone, Default)]
pub struct EventDict {
    map: BTreeMap<String, Event>,
}

impl EventDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, event: Event) {
        self.map.insert(key.into(), event);
    }

    pub fn get(&self, key: &str) -> Result<&Event> {
        self.map
            .get(key)
            .ok_or_else(|| Error::InvalidInput(format!("event dictionary has no entry {key:?}")))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn map(&self) -> &BTreeMap<String, Event> {
        &self.map
    }

    pub fn lambda(&self) -> Result<&Event> {
        self.get(KEY_LAMBDA)
    }

    pub fn l(&self, i: usize) -> Result<&Event> {
        self.get(&key_l(i))
    }

    pub fn r(&self, j: usize) -> Result<&Event> {
        self.get(&key_r(j))
    }

    pub fn la(&self, i: usize, a: Spin) -> Result<&Event> {
        self.get(&key_la(i, a))
    }

    pub fn rb(&self, j: usize, b: Spin) -> Result<&Event> {
        self.get(&key_rb(j, b))
    }

    pub fn c(&self, i: usize, j: usize, a: Spin, b: Spin) -> Result<&Event> {
        self.get(&key_c(i, j, a, b))
    }

    /// The measurement block `L_i ∧ R_j`.
    pub fn block(&self, i: usize, j: usize) -> Result<Event> {
        Ok(self.l(i)?.intersect(self.r(j)?))
    }

    /// Check that every named event is valid in `space` and that the
    /// standard keys for a 3-setting experiment are present.
    pub fn validate<N: Scalar>(&self, space: &ProbSpace<N>, expect_causes: bool) -> Result<()> {
        for (key, event) in &self.map {
            space.validate_event(event).map_err(|e| {
                Error::InvalidInput(format!("event {key:?} is invalid in the space: {e}"))
            })?;
        }
        let mut required = vec![KEY_LAMBDA.to_string()];
        for i in 1..=3 {
            required.push(key_l(i));
            required.push(key_r(i));
            for s in SPINS {
                required.push(key_la(i, s));
                required.push(key_rb(i, s));
            }
        }
        if expect_causes {
            for i in 1..=3 {
                for j in 1..=3 {
                    for a in SPINS {
                        for b in SPINS {
                            required.push(key_c(i, j, a, b));
                        }
                    }
                }
            }
        }
        for key in required {
            if !self.map.contains_key(&key) {
                return Err(Error::InvalidInput(format!(
                    "event dictionary is missing {key:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Borrowed view pairing a space with its event dictionary; the common
/// argument type of the condition checkers.
#[derive(Clone, Copy)]
pub struct ModelView<'a, N: Scalar> {
    pub space: &'a ProbSpace<N>,
    pub dict: &'a EventDict,
}

impl<'a, N: Scalar> ModelView<'a, N> {
    pub fn new(space: &'a ProbSpace<N>, dict: &'a EventDict) -> Self {
        ModelView { space, dict }
    }
}
