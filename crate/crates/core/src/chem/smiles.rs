use std::collections::BTreeMap;

use thiserror::Error;

use super::{check_valence, BondOrder, Element, Molecule, MoleculeError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unknown atom symbol `{symbol}` at position {pos}")]
    UnknownAtom { symbol: String, pos: usize },
    #[error("aromatic atom `{symbol}` at position {pos}; kekulize the input (explicit = bonds, uppercase atoms) before parsing")]
    AromaticAtom { symbol: char, pos: usize },
    #[error("bracket atoms are not supported (position {pos}); charges, isotopes and explicit hydrogens are outside the grammar")]
    BracketAtom { pos: usize },
    #[error("unbalanced parenthesis at position {pos}")]
    UnbalancedParenthesis { pos: usize },
    #[error("ring closure {label} opened but never closed")]
    DanglingRingClosure { label: u32 },
    #[error("ring closure {label} specifies conflicting bond orders")]
    ConflictingRingBond { label: u32 },
    #[error("unexpected character `{ch}` at position {pos}")]
    UnexpectedCharacter { ch: char, pos: usize },
    #[error("atom {atom} ({element}) exceeds its maximum valence")]
    ValenceExceeded { atom: usize, element: Element },
    #[error(transparent)]
    Invalid(#[from] MoleculeError),
}

/// Parse the SMILES subset: organic-subset atoms `C N O F S`, bonds `-`, `=`, `#`,
/// branches, ring closures (`1`-`9` and `%nn`), and `.` between fragments.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut atoms: Vec<Element> = Vec::new();
    let mut bonds: Vec<(usize, usize, BondOrder)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<BondOrder> = None;
    let mut branch_stack: Vec<(usize, usize)> = Vec::new();
    let mut open_rings: BTreeMap<u32, (usize, Option<BondOrder>)> = BTreeMap::new();

    let mut pos = 0;
    while pos < chars.len() {
        let ch = chars[pos];
        match ch {
            'A'..='Z' => {
                let mut symbol = ch.to_string();
                if let Some(&next) = chars.get(pos + 1) {
                    // Two-letter organic symbols (Cl, Br) are not in the element table.
                    if (ch == 'C' && next == 'l') || (ch == 'B' && next == 'r') {
                        symbol.push(next);
                    }
                }
                let element = Element::from_symbol(&symbol)
                    .ok_or_else(|| SmilesError::UnknownAtom { symbol: symbol.clone(), pos })?;
                let idx = atoms.len();
                atoms.push(element);
                if let Some(p) = prev {
                    bonds.push((p, idx, pending.take().unwrap_or(BondOrder::Single)));
                } else if pending.is_some() {
                    return Err(SmilesError::UnexpectedCharacter { ch: chars[pos - 1], pos: pos - 1 });
                }
                prev = Some(idx);
                pos += symbol.len();
                continue;
            }
            'b' | 'c' | 'n' | 'o' | 'p' | 's' => return Err(SmilesError::AromaticAtom { symbol: ch, pos }),
            '[' => return Err(SmilesError::BracketAtom { pos }),
            '-' | '=' | '#' => {
                if pending.is_some() || prev.is_none() {
                    return Err(SmilesError::UnexpectedCharacter { ch, pos });
                }
                pending = Some(match ch {
                    '-' => BondOrder::Single,
                    '=' => BondOrder::Double,
                    _ => BondOrder::Triple,
                });
            }
            '(' => {
                let Some(p) = prev else {
                    return Err(SmilesError::UnexpectedCharacter { ch, pos });
                };
                if pending.is_some() {
                    return Err(SmilesError::UnexpectedCharacter { ch, pos });
                }
                branch_stack.push((p, pos));
            }
            ')' => {
                let Some((p, _)) = branch_stack.pop() else {
                    return Err(SmilesError::UnbalancedParenthesis { pos });
                };
                if pending.is_some() {
                    return Err(SmilesError::UnexpectedCharacter { ch, pos });
                }
                prev = Some(p);
            }
            '1'..='9' | '%' => {
                let (label, width) = if ch == '%' {
                    let digits: String = chars.iter().skip(pos + 1).take(2).collect();
                    if digits.len() != 2 || !digits.chars().all(|c| c.is_ascii_digit()) {
                        return Err(SmilesError::UnexpectedCharacter { ch, pos });
                    }
                    (digits.parse::<u32>().expect("two ascii digits"), 3)
                } else {
                    (ch.to_digit(10).expect("ascii digit"), 1)
                };
                let Some(p) = prev else {
                    return Err(SmilesError::UnexpectedCharacter { ch, pos });
                };
                let here = pending.take();
                match open_rings.remove(&label) {
                    Some((other, there)) => {
                        let order = match (here, there) {
                            (Some(a), Some(b)) if a != b => return Err(SmilesError::ConflictingRingBond { label }),
                            (Some(a), _) | (None, Some(a)) => a,
                            (None, None) => BondOrder::Single,
                        };
                        if other == p {
                            return Err(MoleculeError::SelfBond(p).into());
                        }
                        bonds.push((other, p, order));
                    }
                    None => {
                        open_rings.insert(label, (p, here));
                    }
                }
                pos += width;
                continue;
            }
            '.' => {
                if pending.is_some() || prev.is_none() || !branch_stack.is_empty() {
                    return Err(SmilesError::UnexpectedCharacter { ch, pos });
                }
                prev = None;
            }
            _ => return Err(SmilesError::UnexpectedCharacter { ch, pos }),
        }
        pos += 1;
    }

    if let Some(&(_, at)) = branch_stack.last() {
        return Err(SmilesError::UnbalancedParenthesis { pos: at });
    }
    if let Some((&label, _)) = open_rings.iter().next() {
        return Err(SmilesError::DanglingRingClosure { label });
    }
    if pending.is_some() {
        return Err(SmilesError::UnexpectedCharacter { ch: chars[chars.len() - 1], pos: chars.len() - 1 });
    }
    let mol = Molecule::new(atoms, bonds)?;
    if !check_valence(&mol) {
        let sums = mol.bond_order_sums();
        let atom = (0..mol.atom_count())
            .find(|&k| sums[k] > u32::from(mol.atoms()[k].max_valence()))
            .expect("some atom violates valence");
        return Err(SmilesError::ValenceExceeded { atom, element: mol.atoms()[atom] });
    }
    Ok(mol)
}

/// Write a SMILES string. Traversal is depth-first from the lowest-indexed atom of each
/// fragment, visiting neighbors in ascending index, so output is a deterministic function
/// of the atom numbering.
pub fn write_smiles(m: &Molecule) -> String {
    let adj = m.adjacency();
    let n = m.atom_count();
    let mut parts = Vec::new();
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let tree = DfsTree::build(&adj, start, &mut visited);
        let mut out = String::new();
        let mut digits = RingDigits::default();
        write_atom(m, &tree, start, &mut digits, &mut out);
        parts.push(out);
    }
    parts.join(".")
}

struct DfsTree {
    children: Vec<Vec<(usize, BondOrder)>>,
    /// Ring bonds opened at an atom, to a later-visited partner.
    opens: Vec<Vec<(usize, BondOrder)>>,
    /// Ring bonds closed at an atom, back to an earlier-visited partner.
    closes: Vec<Vec<usize>>,
}

impl DfsTree {
    fn build(adj: &[Vec<(usize, BondOrder)>], start: usize, visited: &mut [bool]) -> DfsTree {
        let n = adj.len();
        let mut children = vec![Vec::new(); n];
        let mut opens = vec![Vec::new(); n];
        let mut closes = vec![Vec::new(); n];
        let mut order = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let mut counter = 0;
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        visited[start] = true;
        order[start] = counter;
        counter += 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next >= adj[u].len() {
                stack.pop();
                continue;
            }
            let (v, bo) = adj[u][*next];
            *next += 1;
            if !visited[v] {
                visited[v] = true;
                order[v] = counter;
                counter += 1;
                parent[v] = u;
                children[u].push((v, bo));
                stack.push((v, 0));
            } else if v != parent[u] && order[v] < order[u] {
                // back edge from descendant u to ancestor v
                opens[v].push((u, bo));
                closes[u].push(v);
            }
        }
        for o in &mut opens {
            o.sort_by_key(|&(x, _)| order[x]);
        }
        for c in &mut closes {
            c.sort_by_key(|&x| order[x]);
        }
        DfsTree { children, opens, closes }
    }
}

#[derive(Default)]
struct RingDigits {
    in_use: BTreeMap<(usize, usize), u32>,
}

impl RingDigits {
    fn allocate(&mut self, key: (usize, usize)) -> u32 {
        let label = (1..).find(|d| !self.in_use.values().any(|x| x == d)).expect("unbounded range");
        self.in_use.insert(key, label);
        label
    }

    fn release(&mut self, key: (usize, usize)) -> u32 {
        self.in_use.remove(&key).expect("ring closure was opened")
    }
}

fn push_label(out: &mut String, label: u32) {
    if label < 10 {
        out.push_str(&label.to_string());
    } else {
        out.push_str(&format!("%{label:02}"));
    }
}

fn write_atom(m: &Molecule, tree: &DfsTree, u: usize, digits: &mut RingDigits, out: &mut String) {
    out.push_str(m.atoms()[u].symbol());
    for &v in &tree.closes[u] {
        let label = digits.release((v, u));
        push_label(out, label);
    }
    for &(v, bo) in &tree.opens[u] {
        let label = digits.allocate((u, v));
        out.push_str(bo.symbol());
        push_label(out, label);
    }
    let kids = &tree.children[u];
    for (k, &(v, bo)) in kids.iter().enumerate() {
        let last = k + 1 == kids.len();
        if !last {
            out.push('(');
        }
        out.push_str(bo.symbol());
        write_atom(m, tree, v, digits, out);
        if !last {
            out.push(')');
        }
    }
}
