//! A small SPICE-like netlist subset and its modified nodal analysis stamps.
//!
//! ```text
//! # comment
//! R1 1 0 1e3
//! C1 1 2 1e-6
//! L1 2 0 1e-3
//! V1 1 0 SIN <amp_c> <amp_s> <freq_Hz>
//! I1 2 0 SIN <amp_c> <amp_s> <freq_Hz>
//! ```
//!
//! Node labels are non-negative integers; 0 is ground. Labels are compacted
//! to `0..node_count` in ascending order.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dae::{LinearDae, Sinusoid};
use crate::error::NetlistError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Inductor,
    VoltageSource,
    CurrentSource,
}

impl ElementKind {
    fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'R' => Some(Self::Resistor),
            'C' => Some(Self::Capacitor),
            'L' => Some(Self::Inductor),
            'V' => Some(Self::VoltageSource),
            'I' => Some(Self::CurrentSource),
            _ => None,
        }
    }

    pub fn is_source(self) -> bool {
        matches!(self, Self::VoltageSource | Self::CurrentSource)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementValue {
    /// Ohms, farads or henries.
    Passive(f64),
    Sine { amp_c: f64, amp_s: f64, freq: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub name: String,
    pub n1: usize,
    pub n2: usize,
    pub value: ElementValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub elements: Vec<Element>,
    pub node_count: usize,
    /// Original label of each compacted node id.
    pub node_labels: Vec<usize>,
}

fn number(token: &str, line: usize) -> Result<f64, NetlistError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| NetlistError::MalformedNumber {
            token: token.to_string(),
            line,
        })
}

fn node(token: &str, line: usize) -> Result<usize, NetlistError> {
    token.parse::<usize>().map_err(|_| NetlistError::BadNode {
        token: token.to_string(),
        line,
    })
}

struct RawElement {
    kind: ElementKind,
    name: String,
    n1: usize,
    n2: usize,
    value: ElementValue,
}

fn parse_line(fields: &[&str], line: usize) -> Result<RawElement, NetlistError> {
    let name = fields[0];
    let letter = name.chars().next().expect("non-empty field");
    let kind =
        ElementKind::from_letter(letter).ok_or(NetlistError::UnknownElement { letter, line })?;
    let expected = if kind.is_source() { 7 } else { 4 };
    if fields.len() != expected {
        return Err(NetlistError::Fields {
            line,
            detail: format!("expected {expected}, found {}", fields.len()),
        });
    }
    let n1 = node(fields[1], line)?;
    let n2 = node(fields[2], line)?;
    let value = if kind.is_source() {
        if !fields[3].eq_ignore_ascii_case("SIN") {
            return Err(NetlistError::Fields {
                line,
                detail: format!("expected SIN, found '{}'", fields[3]),
            });
        }
        let freq = number(fields[6], line)?;
        if freq < 0.0 {
            return Err(NetlistError::NonPositiveValue { line });
        }
        if n1 == n2 {
            return Err(NetlistError::ShortedSource {
                name: name.to_string(),
                node: n1,
                line,
            });
        }
        ElementValue::Sine {
            amp_c: number(fields[4], line)?,
            amp_s: number(fields[5], line)?,
            freq,
        }
    } else {
        let v = number(fields[3], line)?;
        if v <= 0.0 {
            return Err(NetlistError::NonPositiveValue { line });
        }
        ElementValue::Passive(v)
    };
    Ok(RawElement {
        kind,
        name: name.to_string(),
        n1,
        n2,
        value,
    })
}

pub fn parse(text: &str) -> Result<Netlist, NetlistError> {
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for (idx, content) in text.lines().enumerate() {
        let line = idx + 1;
        let content = content.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let el = parse_line(&fields, line)?;
        if !seen.insert(el.name.to_ascii_uppercase()) {
            return Err(NetlistError::DuplicateName {
                name: el.name,
                line,
            });
        }
        raw.push(el);
    }
    if raw.is_empty() {
        return Err(NetlistError::Empty);
    }

    let mut labels = BTreeSet::from([0usize]);
    for el in &raw {
        labels.insert(el.n1);
        labels.insert(el.n2);
    }
    let node_labels: Vec<usize> = labels.into_iter().collect();
    let compact = |label: usize| node_labels.binary_search(&label).expect("collected label");
    let elements = raw
        .into_iter()
        .map(|el| Element {
            kind: el.kind,
            n1: compact(el.n1),
            n2: compact(el.n2),
            name: el.name,
            value: el.value,
        })
        .collect();
    Ok(Netlist {
        elements,
        node_count: node_labels.len(),
        node_labels,
    })
}

impl fmt::Display for Netlist {
    /// Writes compacted node ids, so the output reparses to the same
    /// element list.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for el in &self.elements {
            match el.value {
                ElementValue::Passive(v) => writeln!(f, "{} {} {} {}", el.name, el.n1, el.n2, v)?,
                ElementValue::Sine { amp_c, amp_s, freq } => writeln!(
                    f,
                    "{} {} {} SIN {} {} {}",
                    el.name, el.n1, el.n2, amp_c, amp_s, freq
                )?,
            }
        }
        Ok(())
    }
}

/// Adds `v` to `(a, b)` unless either index is the ground node.
fn add(m: &mut DMatrix<f64>, a: Option<usize>, b: Option<usize>, v: f64) {
    if let (Some(a), Some(b)) = (a, b) {
        m[(a, b)] += v;
    }
}

fn add_vec(b: &mut DVector<f64>, a: Option<usize>, v: f64) {
    if let Some(a) = a {
        b[a] += v;
    }
}

impl Netlist {
    pub fn voltage_source_count(&self) -> usize {
        self.count(ElementKind::VoltageSource)
    }

    pub fn inductor_count(&self) -> usize {
        self.count(ElementKind::Inductor)
    }

    fn count(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }

    /// Size of the MNA unknown vector.
    pub fn unknown_count(&self) -> usize {
        self.node_count - 1 + self.voltage_source_count() + self.inductor_count()
    }

    /// Names of the unknowns in stamp order, e.g. `v(3)` or `i(V1)`.
    pub fn unknown_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.node_labels[1..]
            .iter()
            .map(|l| format!("v({l})"))
            .collect();
        for kind in [ElementKind::VoltageSource, ElementKind::Inductor] {
            names.extend(
                self.elements
                    .iter()
                    .filter(|e| e.kind == kind)
                    .map(|e| format!("i({})", e.name)),
            );
        }
        names
    }

    /// Shared source frequency in Hz; zero when there are no sources.
    pub fn frequency(&self) -> Result<f64, NetlistError> {
        let mut freq: Option<f64> = None;
        for el in &self.elements {
            if let ElementValue::Sine { freq: f, .. } = el.value {
                match freq {
                    None => freq = Some(f),
                    Some(first) if first != f => {
                        return Err(NetlistError::MixedFrequencies { first, second: f })
                    }
                    _ => {}
                }
            }
        }
        Ok(freq.unwrap_or(0.0))
    }

    /// Unknowns: node voltages (ground excluded), then voltage-source
    /// currents in file order, then inductor currents in file order.
    pub fn stamp(&self) -> Result<LinearDae, NetlistError> {
        let omega = 2.0 * PI * self.frequency()?;
        let nn = self.node_count - 1;
        let size = self.unknown_count();
        let mut c = DMatrix::zeros(size, size);
        let mut g = DMatrix::zeros(size, size);
        let mut bc = DVector::zeros(size);
        let mut bs = DVector::zeros(size);
        let idx = |n: usize| n.checked_sub(1);

        let mut vsrc = nn;
        let mut ind = nn + self.voltage_source_count();
        for el in &self.elements {
            let (a, b) = (idx(el.n1), idx(el.n2));
            match (el.kind, el.value) {
                (ElementKind::Resistor, ElementValue::Passive(r)) => {
                    let y = 1.0 / r;
                    add(&mut g, a, a, y);
                    add(&mut g, b, b, y);
                    add(&mut g, a, b, -y);
                    add(&mut g, b, a, -y);
                }
                (ElementKind::Capacitor, ElementValue::Passive(cap)) => {
                    add(&mut c, a, a, cap);
                    add(&mut c, b, b, cap);
                    add(&mut c, a, b, -cap);
                    add(&mut c, b, a, -cap);
                }
                (ElementKind::Inductor, ElementValue::Passive(l)) => {
                    let j = Some(ind);
                    add(&mut g, a, j, 1.0);
                    add(&mut g, b, j, -1.0);
                    add(&mut g, j, a, 1.0);
                    add(&mut g, j, b, -1.0);
                    c[(ind, ind)] = -l;
                    ind += 1;
                }
                (ElementKind::VoltageSource, ElementValue::Sine { amp_c, amp_s, .. }) => {
                    let j = Some(vsrc);
                    add(&mut g, a, j, 1.0);
                    add(&mut g, b, j, -1.0);
                    add(&mut g, j, a, 1.0);
                    add(&mut g, j, b, -1.0);
                    bc[vsrc] = amp_c;
                    bs[vsrc] = amp_s;
                    vsrc += 1;
                }
                (ElementKind::CurrentSource, ElementValue::Sine { amp_c, amp_s, .. }) => {
                    // current flows from n1 through the source into n2
                    add_vec(&mut bc, a, -amp_c);
                    add_vec(&mut bs, a, -amp_s);
                    add_vec(&mut bc, b, amp_c);
                    add_vec(&mut bs, b, amp_s);
                }
                _ => unreachable!("parser pairs kinds with values"),
            }
        }

        for k in 0..nn {
            if c.row(k).iter().all(|&v| v == 0.0) && g.row(k).iter().all(|&v| v == 0.0) {
                return Err(NetlistError::FloatingNode {
                    node: self.node_labels[k + 1],
                });
            }
        }
        Ok(LinearDae::new(c, g, Sinusoid::new(bc, bs, omega))
            .expect("stamped matrices are square and finite"))
    }
}
