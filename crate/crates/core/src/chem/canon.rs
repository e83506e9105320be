use thiserror::Error;

use super::{write_smiles, Molecule};

/// Largest molecule [`canonicalize`] accepts.
pub const MAX_CANON_ATOMS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CanonError {
    #[error("molecule has {0} atoms; canonicalization supports at most {MAX_CANON_ATOMS}")]
    TooLarge(usize),
}

/// Canonical SMILES: two molecules map to the same string iff they are isomorphic
/// (elements and bond orders included).
///
/// Atoms are ranked by iterated neighborhood refinement; remaining ties are broken by
/// individualizing each member of the first tied cell in turn and keeping the labeling
/// whose relabeled graph encodes smallest.
pub fn canonicalize(m: &Molecule) -> Result<String, CanonError> {
    let n = m.atom_count();
    if n > MAX_CANON_ATOMS {
        return Err(CanonError::TooLarge(n));
    }
    if n == 0 {
        return Ok(String::new());
    }
    let graph = Graph::new(m);
    let initial = graph.initial_colors();
    let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
    graph.search(initial, &mut best);
    let (_, labeling) = best.expect("search visits at least one leaf");
    Ok(write_smiles(&m.permuted(&labeling)))
}

struct Graph {
    elements: Vec<u8>,
    adj: Vec<Vec<(usize, u8)>>,
}

impl Graph {
    fn new(m: &Molecule) -> Self {
        let adj = m.adjacency().into_iter().map(|l| l.into_iter().map(|(v, bo)| (v, bo.value())).collect()).collect();
        Graph { elements: m.atoms().iter().map(|&e| e as u8).collect(), adj }
    }

    fn n(&self) -> usize {
        self.elements.len()
    }

    fn initial_colors(&self) -> Vec<usize> {
        let keys: Vec<(u8, usize, u32)> = (0..self.n())
            .map(|i| {
                let valence = self.adj[i].iter().map(|&(_, bo)| u32::from(bo)).sum();
                (self.elements[i], self.adj[i].len(), valence)
            })
            .collect();
        ranks(&keys)
    }

    /// Refine until the partition is equitable. Colors are cell start positions, so
    /// refinement only splits cells and never reorders them.
    fn refine(&self, mut colors: Vec<usize>) -> Vec<usize> {
        loop {
            let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..self.n())
                .map(|i| {
                    let mut sig: Vec<(usize, u8)> = self.adj[i].iter().map(|&(j, bo)| (colors[j], bo)).collect();
                    sig.sort_unstable();
                    (colors[i], sig)
                })
                .collect();
            let next = ranks(&keys);
            if cell_count(&next) == cell_count(&colors) {
                return next;
            }
            colors = next;
        }
    }

    fn search(&self, colors: Vec<usize>, best: &mut Option<(Vec<u8>, Vec<usize>)>) {
        let colors = self.refine(colors);
        let n = self.n();
        if cell_count(&colors) == n {
            let cert = self.certificate(&colors);
            if best.as_ref().is_none_or(|(b, _)| cert < *b) {
                *best = Some((cert, colors));
            }
            return;
        }
        let target = first_tied_cell(&colors);
        for v in (0..n).filter(|&v| colors[v] == target) {
            let mut split = colors.clone();
            for (u, c) in split.iter_mut().enumerate() {
                if *c == target && u != v {
                    *c = target + 1;
                }
            }
            self.search(split, best);
        }
    }

    /// Elements then upper-triangular bond orders under the labeling.
    fn certificate(&self, labeling: &[usize]) -> Vec<u8> {
        let n = self.n();
        let mut cert = vec![0u8; n + n * (n - 1) / 2];
        for (i, &l) in labeling.iter().enumerate() {
            cert[l] = self.elements[i] + 1;
        }
        for (i, nbrs) in self.adj.iter().enumerate() {
            for &(j, bo) in nbrs {
                let (a, b) = (labeling[i].min(labeling[j]), labeling[i].max(labeling[j]));
                // row-major index into the strict upper triangle
                let idx = n + a * (2 * n - a - 1) / 2 + (b - a - 1);
                cert[idx] = bo;
            }
        }
        cert
    }
}

/// Rank = number of strictly smaller keys; ties share a rank.
fn ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut out = vec![0; keys.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = if pos > 0 && keys[order[pos - 1]] == keys[i] { out[order[pos - 1]] } else { pos };
    }
    out
}

fn cell_count(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn first_tied_cell(colors: &[usize]) -> usize {
    let mut counts = vec![0usize; colors.len()];
    for &c in colors {
        counts[c] += 1;
    }
    counts.iter().position(|&k| k > 1).expect("a tied cell exists")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, BondOrder, Element};

    fn canon(s: &str) -> String {
        canonicalize(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn traversal_direction_does_not_matter() {
        assert_eq!(canon("CCO"), canon("OCC"));
        assert_eq!(canon("C(=O)O"), canon("OC=O"));
    }

    #[test]
    fn triangle_all_relabelings() {
        let tri = parse_smiles("C1CC1").unwrap();
        let expected = canonicalize(&tri).unwrap();
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            assert_eq!(canonicalize(&tri.permuted(&perm)).unwrap(), expected);
        }
    }

    #[test]
    fn element_distinguishes() {
        assert_ne!(canon("C"), canon("N"));
        assert_ne!(canon("C=C"), canon("CC"));
    }

    #[test]
    fn too_large() {
        let m = Molecule::new(vec![Element::C; 33], (0..32).map(|k| (k, k + 1, BondOrder::Single))).unwrap();
        assert_eq!(canonicalize(&m), Err(CanonError::TooLarge(33)));
    }

    #[test]
    fn regular_graphs_that_refinement_cannot_split() {
        // Two 6-vertex 2-regular graphs: hexagon vs two triangles. Refinement alone ties all atoms.
        assert_ne!(canon("C1CCCCC1"), canon("C1CC1.C1CC1"));
        // Cube-like cage vs its relabeling.
        let cube = parse_smiles("C12C3C4C1C5C2C3C45").unwrap();
        let p = cube.permuted(&[7, 3, 5, 1, 0, 6, 2, 4]);
        assert_eq!(canonicalize(&cube).unwrap(), canonicalize(&p).unwrap());
    }
}
