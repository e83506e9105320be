//! Molecule data model, SMILES subset codec, valence rules and canonical labels.

mod canon;
mod smiles;

pub use canon::{canonicalize, CanonError, MAX_CANON_ATOMS};
pub use smiles::{parse_smiles, write_smiles, SmilesError};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Heavy-atom element. Hydrogens are always implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    F,
    S,
}

impl Element {
    pub const ALL: [Element; 5] = [Element::C, Element::N, Element::O, Element::F, Element::S];

    pub fn max_valence(self) -> u8 {
        match self {
            Element::C => 4,
            Element::N => 3,
            Element::O => 2,
            Element::F => 1,
            Element::S => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.into_iter().find(|e| e.symbol() == s)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single = 1,
    Double = 2,
    Triple = 3,
}

impl BondOrder {
    pub const ALL: [BondOrder; 3] = [BondOrder::Single, BondOrder::Double, BondOrder::Triple];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(v: u8) -> Option<BondOrder> {
        match v {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    /// SMILES bond symbol; single bonds are implicit.
    pub fn symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoleculeError {
    #[error("bond ({i}, {j}) references an atom outside 0..{n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("self-bond on atom {0}")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

/// Heavy-atom graph. Bonds are stored with `i < j`, sorted, without duplicates.
/// Disconnected molecules are representable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Molecule {
    atoms: Vec<Element>,
    bonds: Vec<Bond>,
}

impl Molecule {
    pub fn new(
        atoms: Vec<Element>,
        bonds: impl IntoIterator<Item = (usize, usize, BondOrder)>,
    ) -> Result<Self, MoleculeError> {
        let n = atoms.len();
        let mut out = Vec::new();
        for (a, b, order) in bonds {
            if a >= n || b >= n {
                return Err(MoleculeError::IndexOutOfRange { i: a, j: b, n });
            }
            if a == b {
                return Err(MoleculeError::SelfBond(a));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            out.push(Bond { i, j, order });
        }
        out.sort_by_key(|b| (b.i, b.j));
        if let Some(w) = out.windows(2).find(|w| w[0].i == w[1].i && w[0].j == w[1].j) {
            return Err(MoleculeError::DuplicateBond(w[0].i, w[0].j));
        }
        Ok(Molecule { atoms, bonds: out })
    }

    pub fn empty() -> Self {
        Molecule::default()
    }

    pub fn atoms(&self) -> &[Element] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondOrder> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.bonds.binary_search_by_key(&(i, j), |b| (b.i, b.j)).ok().map(|k| self.bonds[k].order)
    }

    /// Neighbor lists `(atom, order)` in ascending atom index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.i].push((b.j, b.order));
            adj[b.j].push((b.i, b.order));
        }
        for l in &mut adj {
            l.sort_by_key(|&(n, _)| n);
        }
        adj
    }

    /// Sum of incident bond orders per atom.
    pub fn bond_order_sums(&self) -> Vec<u32> {
        let mut sums = vec![0u32; self.atoms.len()];
        for b in &self.bonds {
            sums[b.i] += u32::from(b.order.value());
            sums[b.j] += u32::from(b.order.value());
        }
        sums
    }

    /// Relabel atoms: atom `k` of `self` becomes atom `perm[k]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let mut atoms = vec![Element::C; self.atoms.len()];
        for (k, &p) in perm.iter().enumerate() {
            atoms[p] = self.atoms[k];
        }
        let bonds = self.bonds.iter().map(|b| (perm[b.i], perm[b.j], b.order));
        Molecule::new(atoms, bonds).expect("permutation preserves molecule invariants")
    }

    /// Connected components as sorted atom lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut comps = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// True for a single connected component. The empty molecule is not connected.
    pub fn is_connected(&self) -> bool {
        !self.atoms.is_empty() && self.components().len() == 1
    }
}

/// True iff every atom's incident bond orders sum to at most its element's maximum valence.
pub fn check_valence(m: &Molecule) -> bool {
    m.bond_order_sums().iter().zip(m.atoms()).all(|(&s, e)| s <= u32::from(e.max_valence()))
}

/// Brute-force isomorphism test over all atom bijections, respecting elements and bond orders.
/// Exponential; intended for oracles on small molecules.
pub fn isomorphic_brute_force(a: &Molecule, b: &Molecule) -> bool {
    if a.atom_count() != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let mut ea = a.atoms().to_vec();
    let mut eb = b.atoms().to_vec();
    ea.sort();
    eb.sort();
    if ea != eb {
        return false;
    }
    let n = a.atom_count();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn extend(k: usize, a: &Molecule, b: &Molecule, map: &mut [usize], used: &mut [bool]) -> bool {
        let n = a.atom_count();
        if k == n {
            return true;
        }
        for cand in 0..n {
            if used[cand] || a.atoms()[k] != b.atoms()[cand] {
                continue;
            }
            let consistent = (0..k).all(|prev| a.bond_between(k, prev) == b.bond_between(cand, map[prev]));
            if !consistent {
                continue;
            }
            map[k] = cand;
            used[cand] = true;
            if extend(k + 1, a, b, map, used) {
                return true;
            }
            used[cand] = false;
        }
        false
    }
    extend(0, a, b, &mut map, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(center: Element, arms: usize) -> Molecule {
        let mut atoms = vec![center];
        atoms.extend(std::iter::repeat_n(Element::C, arms));
        Molecule::new(atoms, (1..=arms).map(|k| (0, k, BondOrder::Single))).unwrap()
    }

    #[test]
    fn valence_examples() {
        assert!(check_valence(&star(Element::C, 4)));
        assert!(!check_valence(&star(Element::N, 4)));
        let co = Molecule::new(vec![Element::C, Element::O], [(0, 1, BondOrder::Double)]).unwrap();
        assert!(check_valence(&co));
    }

    #[test]
    fn invariants_rejected() {
        let atoms = vec![Element::C, Element::C];
        assert_eq!(Molecule::new(atoms.clone(), [(0, 0, BondOrder::Single)]), Err(MoleculeError::SelfBond(0)));
        assert_eq!(
            Molecule::new(atoms.clone(), [(0, 1, BondOrder::Single), (1, 0, BondOrder::Double)]),
            Err(MoleculeError::DuplicateBond(0, 1))
        );
        assert!(matches!(
            Molecule::new(atoms, [(0, 2, BondOrder::Single)]),
            Err(MoleculeError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn connectivity() {
        assert!(!Molecule::empty().is_connected());
        let two = Molecule::new(vec![Element::C, Element::C], []).unwrap();
        assert!(!two.is_connected());
        assert_eq!(two.components(), vec![vec![0], vec![1]]);
        assert!(star(Element::C, 3).is_connected());
    }

    #[test]
    fn valence_is_permutation_invariant() {
        let m = star(Element::N, 4);
        let p = m.permuted(&[3, 0, 4, 1, 2]);
        assert_eq!(check_valence(&m), check_valence(&p));
        assert!(isomorphic_brute_force(&m, &p));
    }
}
