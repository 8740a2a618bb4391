//! File formats and canonical report emission.
//!
//! Space files are JSON:
//! `{"mode":"rational|float","atoms":[{"name":"a1","weight":"3/8"}],"events":{"A":["a1"]}}`
//! with rational weights as `"n/d"` strings and float weights as numbers.
//! Model files add a `"meta"` section (build provenance). Reading a file and
//! writing it back is value-identical.
//!
//! All JSON output is canonical: struct field order, sorted maps, floats
//! printed with 17 significant digits (`{:.16e}`), so identical runs emit
//! byte-identical reports.

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dict::EventDict;
use crate::model::{EprModel, ModelMeta};
use crate::prob::{Event, ProbSpace};
use crate::scalar::{parse_rational, Mode, Scalar};
use crate::sim::CondCell;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Canonical JSON.
// ---------------------------------------------------------------------------

/// Pretty formatter with two-space indent and fixed 17-significant-digit
/// float formatting.
struct CanonicalFormatter {
    depth: usize,
    has_value: bool,
}

fn indent<W: ?Sized + std::io::Write>(writer: &mut W, depth: usize) -> std::io::Result<()> {
    for _ in 0..depth {
        writer.write_all(b"  ")?;
    }
    Ok(())
}

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.depth += 1;
        self.has_value = false;
        writer.write_all(b"[")
    }

    fn end_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.depth -= 1;
        if self.has_value {
            writer.write_all(b"\n")?;
            indent(writer, self.depth)?;
        }
        writer.write_all(b"]")
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if first {
            writer.write_all(b"\n")?;
        } else {
            writer.write_all(b",\n")?;
        }
        indent(writer, self.depth)
    }

    fn end_array_value<W>(&mut self, _writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.depth += 1;
        self.has_value = false;
        writer.write_all(b"{")
    }

    fn end_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.depth -= 1;
        if self.has_value {
            writer.write_all(b"\n")?;
            indent(writer, self.depth)?;
        }
        writer.write_all(b"}")
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if first {
            writer.write_all(b"\n")?;
        } else {
            writer.write_all(b",\n")?;
        }
        indent(writer, self.depth)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(b": ")
    }

    fn end_object_value<W>(&mut self, _writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.has_value = true;
        Ok(())
    }
}

/// Serialize any report in the canonical form (trailing newline included).
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let formatter = CanonicalFormatter {
        depth: 0,
        has_value: false,
    };
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut serializer)?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::InvalidInput(format!("non-utf8 output: {e}")))
}

// ---------------------------------------------------------------------------
// Space and model files.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawAtom {
    name: String,
    weight: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct RawFile {
    mode: Mode,
    atoms: Vec<RawAtom>,
    #[serde(default)]
    events: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<ModelMeta>,
}

/// A space in either numeric mode, as read from a file.
pub enum Space {
    Rational(ProbSpace<BigRational>),
    Float(ProbSpace<f64>),
}

impl Space {
    pub fn mode(&self) -> Mode {
        match self {
            Space::Rational(_) => Mode::Rational,
            Space::Float(_) => Mode::Float,
        }
    }

    pub fn to_f64(&self) -> ProbSpace<f64> {
        match self {
            Space::Rational(s) => s.to_f64(),
            Space::Float(s) => s.clone(),
        }
    }
}

/// A model in either numeric mode, as read from a file.
pub enum StoredModel {
    Rational(EprModel<BigRational>),
    Float(EprModel<f64>),
}

fn weight_value<N: Scalar>(w: &N) -> serde_json::Value {
    match N::MODE {
        Mode::Rational => serde_json::Value::String(format!("{w}")),
        Mode::Float => serde_json::json!(w.to_f64()),
    }
}

fn atoms_to_raw<N: Scalar>(space: &ProbSpace<N>) -> Vec<RawAtom> {
    space
        .atoms()
        .iter()
        .map(|a| RawAtom {
            name: a.name.clone(),
            weight: weight_value(&a.weight),
        })
        .collect()
}

fn events_to_raw(dict: &EventDict) -> BTreeMap<String, Vec<String>> {
    dict.map()
        .iter()
        .map(|(k, e)| (k.clone(), e.names()))
        .collect()
}

fn raw_to_events(raw: &BTreeMap<String, Vec<String>>) -> EventDict {
    let mut dict = EventDict::new();
    for (k, members) in raw {
        dict.insert(k.clone(), Event::new(members.iter().cloned()));
    }
    dict
}

fn parse_atoms_rational(raw: &[RawAtom]) -> Result<ProbSpace<BigRational>> {
    let mut atoms = Vec::with_capacity(raw.len());
    for a in raw {
        let weight = match &a.weight {
            serde_json::Value::String(s) => parse_rational(s)?,
            other => {
                return Err(Error::InvalidInput(format!(
                    "rational-mode weight for {} must be an \"n/d\" string, got {other}",
                    a.name
                )))
            }
        };
        atoms.push((a.name.clone(), weight));
    }
    ProbSpace::new(atoms)
}

fn parse_atoms_float(raw: &[RawAtom]) -> Result<ProbSpace<f64>> {
    let mut atoms = Vec::with_capacity(raw.len());
    for a in raw {
        let weight = a.weight.as_f64().ok_or_else(|| {
            Error::InvalidInput(format!(
                "float-mode weight for {} must be a number, got {}",
                a.name, a.weight
            ))
        })?;
        atoms.push((a.name.clone(), weight));
    }
    ProbSpace::new(atoms)
}

/// Serialize a space plus its named events.
pub fn space_to_json(space: &Space, events: &EventDict) -> Result<String> {
    let raw = match space {
        Space::Rational(s) => RawFile {
            mode: Mode::Rational,
            atoms: atoms_to_raw(s),
            events: events_to_raw(events),
            meta: None,
        },
        Space::Float(s) => RawFile {
            mode: Mode::Float,
            atoms: atoms_to_raw(s),
            events: events_to_raw(events),
            meta: None,
        },
    };
    to_canonical_json(&raw)
}

/// Parse a space file; events are validated against the atoms.
pub fn space_from_json(text: &str) -> Result<(Space, EventDict)> {
    let raw: RawFile = serde_json::from_str(text)?;
    let events = raw_to_events(&raw.events);
    let space = match raw.mode {
        Mode::Rational => Space::Rational(parse_atoms_rational(&raw.atoms)?),
        Mode::Float => Space::Float(parse_atoms_float(&raw.atoms)?),
    };
    match &space {
        Space::Rational(s) => validate_events(s, &events)?,
        Space::Float(s) => validate_events(s, &events)?,
    }
    Ok((space, events))
}

fn validate_events<N: Scalar>(space: &ProbSpace<N>, events: &EventDict) -> Result<()> {
    for (key, event) in events.map() {
        space
            .validate_event(event)
            .map_err(|e| Error::InvalidInput(format!("event {key:?}: {e}")))?;
    }
    Ok(())
}

/// Serialize a model (space, dictionary, provenance).
pub fn model_to_json<N: Scalar>(model: &EprModel<N>) -> Result<String> {
    let raw = RawFile {
        mode: N::MODE,
        atoms: atoms_to_raw(&model.space),
        events: events_to_raw(&model.dict),
        meta: Some(model.meta.clone()),
    };
    to_canonical_json(&raw)
}

/// Parse a model file (requires the `meta` section).
pub fn model_from_json(text: &str) -> Result<StoredModel> {
    let raw: RawFile = serde_json::from_str(text)?;
    let meta = raw
        .meta
        .clone()
        .ok_or_else(|| Error::InvalidInput("model file lacks a \"meta\" section".into()))?;
    let dict = raw_to_events(&raw.events);
    Ok(match raw.mode {
        Mode::Rational => {
            let space = parse_atoms_rational(&raw.atoms)?;
            validate_events(&space, &dict)?;
            StoredModel::Rational(EprModel { space, dict, meta })
        }
        Mode::Float => {
            let space = parse_atoms_float(&raw.atoms)?;
            validate_events(&space, &dict)?;
            StoredModel::Float(EprModel { space, dict, meta })
        }
    })
}

// ---------------------------------------------------------------------------
// Files, digests, manifests, CSV.
// ---------------------------------------------------------------------------

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Provenance header embedded in every CLI report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub tool_version: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// RFC 3339 timestamp; honors `SOURCE_DATE_EPOCH` so report bytes can be
/// made reproducible.
pub fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::<chrono::Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new(command: &str, parameters: BTreeMap<String, String>) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters,
            inputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
        }
    }

    pub fn with_input(mut self, path: &Path, contents: &str) -> Self {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        self
    }
}

/// A report wrapped with its manifest — the shape of every CLI output.
#[derive(Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub manifest: RunManifest,
    pub report: T,
}

/// Minimal CSV (fields never contain separators here).
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV export of an empirical or model conditional table (36 data rows).
pub fn conditional_table_csv(cells: &[CondCell]) -> String {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.i.to_string(),
                c.j.to_string(),
                c.a.to_string(),
                c.b.to_string(),
                format!("{:.16e}", c.expected),
                format!("{:.16e}", c.empirical),
                c.block_count.to_string(),
            ]
        })
        .collect();
    csv(
        &["i", "j", "a", "b", "expected", "empirical", "block_count"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    #[test]
    fn rational_space_round_trips_value_identically() {
        let r = |n: i64, d: i64| <BigRational as Scalar>::ratio(n, d);
        let space = ProbSpace::<BigRational>::new([
            ("a1", r(3, 8)),
            ("a2", r(1, 8)),
            ("a3", r(1, 2)),
        ])
        .unwrap();
        let mut events = EventDict::new();
        events.insert("A", Event::new(["a1", "a2"]));
        let text = space_to_json(&Space::Rational(space.clone()), &events).unwrap();
        assert!(text.contains("\"3/8\""));
        let (parsed, parsed_events) = space_from_json(&text).unwrap();
        match parsed {
            Space::Rational(p) => {
                for (x, y) in p.atoms().iter().zip(space.atoms()) {
                    assert_eq!(x.name, y.name);
                    assert_eq!(x.weight, y.weight);
                }
            }
            _ => panic!("mode lost"),
        }
        assert_eq!(parsed_events.get("A").unwrap(), events.get("A").unwrap());
        // writing again is byte-identical
        let again = match space_from_json(&text).unwrap() {
            (Space::Rational(p), ev) => space_to_json(&Space::Rational(p), &ev).unwrap(),
            _ => unreachable!(),
        };
        assert_eq!(text, again);
    }

    #[test]
    fn float_space_round_trips_and_uses_17_digit_floats() {
        let space = ProbSpace::new([("x", 0.375), ("y", 0.625)]).unwrap();
        let mut events = EventDict::new();
        events.insert("X", Event::new(["x"]));
        let text = space_to_json(&Space::Float(space), &events).unwrap();
        assert!(text.contains("3.7500000000000000e-1"), "{text}");
        let (parsed, _) = space_from_json(&text).unwrap();
        match parsed {
            Space::Float(p) => assert_eq!(p.atoms()[0].weight, 0.375),
            _ => panic!("mode lost"),
        }
    }

    #[test]
    fn mode_weight_mismatch_is_rejected() {
        let bad = r#"{"mode":"rational","atoms":[{"name":"a","weight":0.5},{"name":"b","weight":0.5}],"events":{}}"#;
        assert!(space_from_json(bad).is_err());
        let bad = r#"{"mode":"float","atoms":[{"name":"a","weight":"1/2"},{"name":"b","weight":"1/2"}],"events":{}}"#;
        assert!(space_from_json(bad).is_err());
    }

    #[test]
    fn unknown_event_members_are_rejected() {
        let bad = r#"{"mode":"float","atoms":[{"name":"a","weight":1.0}],"events":{"E":["zz"]}}"#;
        assert!(space_from_json(bad).is_err());
    }

    #[test]
    fn canonical_json_is_deterministic() {
        #[derive(Serialize)]
        struct Demo {
            b: f64,
            a: u64,
        }
        let one = to_canonical_json(&Demo { b: 1.0 / 3.0, a: 7 }).unwrap();
        let two = to_canonical_json(&Demo { b: 1.0 / 3.0, a: 7 }).unwrap();
        assert_eq!(one, two);
        assert!(one.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let text = csv(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(text, "a,b\n1,2\n");
    }
}
