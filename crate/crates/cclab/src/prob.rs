//! Finite classical probability spaces: named atoms carrying mass, events as
//! atom-name sets, conditional probability and correlation, space extension
//! by atom splitting, and measure-preserving relabelings.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;

use crate::scalar::{Mode, Scalar};
use crate::{Error, Result};

/// A minimal element of the event algebra together with its mass.
#[derive(Debug, Clone)]
pub struct Atom<N> {
    pub name: String,
    pub weight: N,
}

/// A finite measure over named atoms. Total mass is 1 (exactly in rational
/// mode, within `1e-12` in float mode); weights are non-negative and names
/// unique. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ProbSpace<N: Scalar> {
    atoms: Vec<Atom<N>>,
    index: HashMap<String, usize>,
}

/// An event: a set of atom names of some host space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Event {
    members: BTreeSet<String>,
}

impl Event {
    pub fn new<I, S>(members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Event {
            members: members.into_iter().map(Into::into).collect(),
        }
    }

    pub fn empty() -> Self {
        Event::default()
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.members.contains(name)
    }

    /// Set intersection; hosts are not consulted.
    pub fn intersect(&self, other: &Event) -> Event {
        Event {
            members: self.members.intersection(&other.members).cloned().collect(),
        }
    }

    /// Set union.
    pub fn union(&self, other: &Event) -> Event {
        Event {
            members: self.members.union(&other.members).cloned().collect(),
        }
    }

    /// Set difference `self \ other`.
    pub fn difference(&self, other: &Event) -> Event {
        Event {
            members: self.members.difference(&other.members).cloned().collect(),
        }
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn is_disjoint(&self, other: &Event) -> bool {
        self.members.is_disjoint(&other.members)
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().cloned().collect()
    }
}

impl<N: Scalar> ProbSpace<N> {
    /// Build a space from `(name, weight)` pairs, validating all invariants.
    pub fn new<I, S>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, N)>,
        S: Into<String>,
    {
        let atoms: Vec<Atom<N>> = atoms
            .into_iter()
            .map(|(name, weight)| Atom {
                name: name.into(),
                weight,
            })
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidInput("a space needs at least one atom".into()));
        }
        let mut index = HashMap::with_capacity(atoms.len());
        let mut total = N::zero();
        for (i, atom) in atoms.iter().enumerate() {
            if atom.weight < N::zero() {
                return Err(Error::InvalidInput(format!(
                    "atom {} has negative weight {}",
                    atom.name, atom.weight
                )));
            }
            if index.insert(atom.name.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate atom name: {}",
                    atom.name
                )));
            }
            total = total + atom.weight.clone();
        }
        if !N::is_normalized(&total) {
            return Err(Error::InvalidInput(format!(
                "atom weights must sum to 1, got {total}"
            )));
        }
        Ok(ProbSpace { atoms, index })
    }

    pub fn mode(&self) -> Mode {
        N::MODE
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom<N>] {
        &self.atoms
    }

    pub fn atom_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    pub fn contains_atom(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// The sure event.
    pub fn full_event(&self) -> Event {
        Event::new(self.atoms.iter().map(|a| a.name.clone()))
    }

    /// Build an event, checking every member names an atom of this space.
    pub fn event<I, S>(&self, members: I) -> Result<Event>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let e = Event::new(members);
        self.validate_event(&e)?;
        Ok(e)
    }

    pub fn validate_event(&self, e: &Event) -> Result<()> {
        for m in e.members() {
            if !self.index.contains_key(m) {
                return Err(Error::UnknownAtom(m.to_string()));
            }
        }
        Ok(())
    }

    /// Measure of an event: the sum of its members' weights.
    pub fn probability(&self, e: &Event) -> Result<N> {
        let mut total = N::zero();
        for m in e.members() {
            let i = self.atom_index(m)?;
            total = total + self.atoms[i].weight.clone();
        }
        Ok(total)
    }

    /// `p(a | b) = p(a ∧ b) / p(b)`; conditioning on a null event is an
    /// error, never a silent zero or NaN.
    pub fn conditional(&self, a: &Event, b: &Event) -> Result<N> {
        let pb = self.probability(b)?;
        if pb.is_zero_value() {
            return Err(Error::NullConditioning(format!(
                "p(B) = 0 for B = {:?}",
                b.names()
            )));
        }
        let pab = self.probability(&a.intersect(b))?;
        Ok(pab / pb)
    }

    /// `Corr(a, b) = p(a ∧ b) − p(a)·p(b)`.
    pub fn correlation(&self, a: &Event, b: &Event) -> Result<N> {
        let pab = self.probability(&a.intersect(b))?;
        let pa = self.probability(a)?;
        let pb = self.probability(b)?;
        Ok(pab - pa * pb)
    }

    /// Validated conjunction.
    pub fn and(&self, a: &Event, b: &Event) -> Result<Event> {
        self.validate_event(a)?;
        self.validate_event(b)?;
        Ok(a.intersect(b))
    }

    /// Validated disjunction.
    pub fn or(&self, a: &Event, b: &Event) -> Result<Event> {
        self.validate_event(a)?;
        self.validate_event(b)?;
        Ok(a.union(b))
    }

    /// Complement within this space.
    pub fn not(&self, e: &Event) -> Result<Event> {
        self.validate_event(e)?;
        Ok(Event::new(
            self.atoms
                .iter()
                .filter(|a| !e.contains(&a.name))
                .map(|a| a.name.clone()),
        ))
    }

    pub fn subset(&self, a: &Event, b: &Event) -> Result<bool> {
        self.validate_event(a)?;
        self.validate_event(b)?;
        Ok(a.is_subset(b))
    }

    /// Split atoms into weighted successors.
    ///
    /// Atoms listed in `splits` are replaced by successors named
    /// `"{name}#{k}"` carrying `fraction · weight`; fractions must be
    /// non-negative and sum to 1. Atoms without an entry pass through
    /// unchanged. The returned [`Embedding`] maps every original atom to its
    /// successor set and preserves all event probabilities.
    pub fn extend(&self, splits: &BTreeMap<String, Vec<N>>) -> Result<(ProbSpace<N>, Embedding)> {
        for name in splits.keys() {
            self.atom_index(name)?;
        }
        let mut new_atoms: Vec<(String, N)> = Vec::new();
        let mut atom_map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for atom in &self.atoms {
            match splits.get(&atom.name) {
                None => {
                    new_atoms.push((atom.name.clone(), atom.weight.clone()));
                    atom_map.insert(atom.name.clone(), vec![atom.name.clone()]);
                }
                Some(fractions) => {
                    if fractions.is_empty() {
                        return Err(Error::InvalidInput(format!(
                            "empty split for atom {}",
                            atom.name
                        )));
                    }
                    let mut total = N::zero();
                    for f in fractions {
                        if *f < N::zero() {
                            return Err(Error::InvalidInput(format!(
                                "negative split fraction for atom {}",
                                atom.name
                            )));
                        }
                        total = total + f.clone();
                    }
                    if !N::is_normalized(&total) {
                        return Err(Error::InvalidInput(format!(
                            "split fractions for atom {} sum to {total}, expected 1",
                            atom.name
                        )));
                    }
                    let mut successors = Vec::with_capacity(fractions.len());
                    for (k, f) in fractions.iter().enumerate() {
                        let successor = format!("{}#{}", atom.name, k);
                        new_atoms.push((successor.clone(), f.clone() * atom.weight.clone()));
                        successors.push(successor);
                    }
                    atom_map.insert(atom.name.clone(), successors);
                }
            }
        }
        let extended = ProbSpace::new(new_atoms)?;
        Ok((extended, Embedding { atom_map }))
    }

    /// Rename atoms through a bijection; weights (and hence all correlations
    /// of mapped event pairs) are preserved. Names absent from `relabel` stay
    /// fixed; the induced total map must still be bijective.
    pub fn apply_isomorphism(&self, relabel: &BTreeMap<String, String>) -> Result<ProbSpace<N>> {
        for name in relabel.keys() {
            self.atom_index(name)?;
        }
        let mut seen = BTreeSet::new();
        let mut new_atoms = Vec::with_capacity(self.atoms.len());
        for atom in &self.atoms {
            let new_name = relabel.get(&atom.name).unwrap_or(&atom.name).clone();
            if !seen.insert(new_name.clone()) {
                return Err(Error::InvalidInput(format!(
                    "relabeling is not a bijection: {new_name} occurs twice"
                )));
            }
            new_atoms.push((new_name, atom.weight.clone()));
        }
        ProbSpace::new(new_atoms)
    }

    /// Event measure as an exact rational, by losslessly lifting each member
    /// weight. In float mode this interprets every weight as the dyadic
    /// rational it is, so containment-forced identities can be verified with
    /// exact equality even on solver output.
    pub fn probability_exact(&self, e: &Event) -> Result<BigRational> {
        let mut total = <BigRational as Scalar>::zero();
        for m in e.members() {
            let i = self.atom_index(m)?;
            total += self.atoms[i].weight.to_exact();
        }
        Ok(total)
    }

    /// Float view of the measure (lossy in rational mode).
    pub fn to_f64(&self) -> ProbSpace<f64> {
        let atoms: Vec<(String, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.name.clone(), a.weight.to_f64()))
            .collect();
        ProbSpace::<f64>::new(atoms).expect("float view preserves structure")
    }
}

/// Maps an original space's atoms onto successor sets in an extension.
#[derive(Debug, Clone)]
pub struct Embedding {
    atom_map: BTreeMap<String, Vec<String>>,
}

impl Embedding {
    pub fn successors(&self, name: &str) -> Result<&[String]> {
        self.atom_map
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    /// Image of an event of the original space in the extension.
    pub fn map_event(&self, e: &Event) -> Result<Event> {
        let mut members = Vec::new();
        for m in e.members() {
            members.extend(self.successors(m)?.iter().cloned());
        }
        Ok(Event::new(members))
    }

    pub fn atom_map(&self) -> &BTreeMap<String, Vec<String>> {
        &self.atom_map
    }
}
