//! Dense one-hot graph tensors: node matrix `X` (N×D) and adjacency tensor `A` (N×N×Y).
//!
//! Node type order is the element list followed by PAD in the last column. Edge type 0 is
//! "no bond", then single, double, triple.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{BondOrder, Element, Molecule};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("molecule has {atoms} atoms but the graph holds at most {max}")]
    TooManyAtoms { atoms: usize, max: usize },
    #[error("element {0} is not a node type of this graph spec")]
    ElementNotInVocabulary(Element),
    #[error("bond order {0:?} is not an edge type of this graph spec")]
    BondNotInVocabulary(BondOrder),
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("tensor has {got} values, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub max_atoms: usize,
    /// Node types including PAD.
    pub node_types: usize,
    /// Edge types including no-bond.
    pub edge_types: usize,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec { max_atoms: 9, node_types: 5, edge_types: 4 }
    }
}

impl GraphSpec {
    pub fn new(max_atoms: usize, node_types: usize, edge_types: usize) -> Result<Self, GraphError> {
        let spec = GraphSpec { max_atoms, node_types, edge_types };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.max_atoms < 1 {
            return Err(GraphError::InvalidSpec("max_atoms must be at least 1".into()));
        }
        if self.node_types < 2 || self.node_types > Element::ALL.len() + 1 {
            return Err(GraphError::InvalidSpec(format!(
                "node_types must be in 2..={} (elements plus PAD)",
                Element::ALL.len() + 1
            )));
        }
        if !(2..=4).contains(&self.edge_types) {
            return Err(GraphError::InvalidSpec("edge_types must be in 2..=4 (no-bond plus bond orders)".into()));
        }
        Ok(())
    }

    /// Elements represented, in column order.
    pub fn elements(&self) -> &'static [Element] {
        &Element::ALL[..self.node_types - 1]
    }

    pub fn pad_index(&self) -> usize {
        self.node_types - 1
    }

    pub fn node_index(&self, e: Element) -> Option<usize> {
        self.elements().iter().position(|&x| x == e)
    }

    pub fn edge_index(&self, bo: BondOrder) -> Option<usize> {
        let k = usize::from(bo.value());
        (k < self.edge_types).then_some(k)
    }

    pub fn x_len(&self) -> usize {
        self.max_atoms * self.node_types
    }

    pub fn a_len(&self) -> usize {
        self.max_atoms * self.max_atoms * self.edge_types
    }
}

/// Row-major `X` (N×D) and `A` (N×N×Y).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensors {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
}

impl GraphTensors {
    pub fn x_at(&self, spec: &GraphSpec, i: usize, d: usize) -> f64 {
        self.x[i * spec.node_types + d]
    }

    pub fn a_at(&self, spec: &GraphSpec, i: usize, j: usize, y: usize) -> f64 {
        self.a[(i * spec.max_atoms + j) * spec.edge_types + y]
    }
}

pub fn featurize(m: &Molecule, spec: &GraphSpec) -> Result<GraphTensors, GraphError> {
    let n = spec.max_atoms;
    if m.atom_count() > n {
        return Err(GraphError::TooManyAtoms { atoms: m.atom_count(), max: n });
    }
    let (d, y) = (spec.node_types, spec.edge_types);
    let mut x = vec![0.0; n * d];
    for i in 0..n {
        let col = match m.atoms().get(i) {
            Some(&e) => spec.node_index(e).ok_or(GraphError::ElementNotInVocabulary(e))?,
            None => spec.pad_index(),
        };
        x[i * d + col] = 1.0;
    }
    let mut a = vec![0.0; n * n * y];
    for i in 0..n {
        for j in 0..n {
            a[(i * n + j) * y] = 1.0;
        }
    }
    for b in m.bonds() {
        let k = spec.edge_index(b.order).ok_or(GraphError::BondNotInVocabulary(b.order))?;
        for (p, q) in [(b.i, b.j), (b.j, b.i)] {
            let base = (p * n + q) * y;
            a[base] = 0.0;
            a[base + k] = 1.0;
        }
    }
    Ok(GraphTensors { x, a })
}

fn argmax(v: &[f64]) -> usize {
    // first maximal index wins ties
    let mut best = 0;
    for (k, &val) in v.iter().enumerate() {
        if val > v[best] {
            best = k;
        }
    }
    best
}

/// Map one-hot tensors back to a molecule. PAD rows, no-bond entries and bonds touching
/// PAD are dropped; valence is not checked. Non-one-hot inputs are read by argmax.
pub fn defeaturize(g: &GraphTensors, spec: &GraphSpec) -> Molecule {
    let (n, d, y) = (spec.max_atoms, spec.node_types, spec.edge_types);
    let mut new_index = vec![None; n];
    let mut atoms = Vec::new();
    for (i, slot) in new_index.iter_mut().enumerate() {
        let col = argmax(&g.x[i * d..(i + 1) * d]);
        if col != spec.pad_index() {
            *slot = Some(atoms.len());
            atoms.push(spec.elements()[col]);
        }
    }
    let mut bonds = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (Some(a), Some(b)) = (new_index[i], new_index[j]) else { continue };
            let base = (i * n + j) * y;
            let k = argmax(&g.a[base..base + y]);
            if k > 0 {
                let order = BondOrder::from_value(k as u8).expect("edge index within 1..=3");
                bonds.push((a, b, order));
            }
        }
    }
    Molecule::new(atoms, bonds).expect("upper-triangle pairs are unique and never self-bonds")
}

/// Discretize continuous tensors: rows of `X` by argmax; `A` is first symmetrized by
/// averaging `A[i,j]` with `A[j,i]`, then argmaxed. Diagonal entries and edges touching
/// PAD rows become no-bond.
pub fn one_hot_argmax(x: &[f64], a: &[f64], spec: &GraphSpec) -> Result<GraphTensors, GraphError> {
    let (n, d, y) = (spec.max_atoms, spec.node_types, spec.edge_types);
    if x.len() != spec.x_len() {
        return Err(GraphError::ShapeMismatch { got: x.len(), expected: spec.x_len() });
    }
    if a.len() != spec.a_len() {
        return Err(GraphError::ShapeMismatch { got: a.len(), expected: spec.a_len() });
    }
    let mut xo = vec![0.0; n * d];
    let mut pad = vec![false; n];
    for i in 0..n {
        let col = argmax(&x[i * d..(i + 1) * d]);
        xo[i * d + col] = 1.0;
        pad[i] = col == spec.pad_index();
    }
    let mut ao = vec![0.0; n * n * y];
    let mut avg = vec![0.0; y];
    for i in 0..n {
        for j in i..n {
            let k = if i == j || pad[i] || pad[j] {
                0
            } else {
                for (t, slot) in avg.iter_mut().enumerate() {
                    *slot = 0.5 * (a[(i * n + j) * y + t] + a[(j * n + i) * y + t]);
                }
                argmax(&avg)
            };
            ao[(i * n + j) * y + k] = 1.0;
            if i != j {
                ao[(j * n + i) * y + k] = 1.0;
            }
        }
    }
    Ok(GraphTensors { x: xo, a: ao })
}
