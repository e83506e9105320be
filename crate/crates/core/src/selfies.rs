//! Valence-constrained token codec. Every token sequence over [`vocabulary`] decodes to a
//! molecule that passes [`check_valence`](crate::chem::check_valence).
//!
//! Grammar:
//! * `[X]`, `[=X]`, `[#X]` add atom `X` bonded to the current atom with the given order.
//!   The order is lowered to whatever valence both atoms have left; if the current atom
//!   has none left the chain ends.
//! * `[BranchK]` reads the next `K` tokens as a base-`V-1` number `Q`; the `Q+1` tokens
//!   after that form a side chain hanging off the current atom. Branches on an atom with
//!   fewer than two free valences are ignored (the token alone is skipped).
//! * `[RingK]`, `[=RingK]`, `[#RingK]` read `Q` the same way and bond the current atom to
//!   the atom created `Q+1` atoms earlier. An existing bond is raised in order instead.
//! * `[Pad]` ends the sequence.
//!
//! Index digits use each token's vocabulary index minus one, so `[Pad]` is never a digit.

use std::fmt;

use thiserror::Error;

use crate::chem::{BondOrder, Element, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelfiesToken {
    Pad,
    Atom(Element),
    BondAtom(BondOrder, Element),
    /// Side chain whose length is read from the next `n` tokens.
    Branch(u8),
    /// Ring bond whose back-distance is read from the next `n` tokens.
    Ring(BondOrder, u8),
}

impl fmt::Display for SelfiesToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelfiesToken::Pad => write!(f, "[Pad]"),
            SelfiesToken::Atom(e) => write!(f, "[{e}]"),
            SelfiesToken::BondAtom(bo, e) => write!(f, "[{}{e}]", bond_prefix(*bo)),
            SelfiesToken::Branch(k) => write!(f, "[Branch{k}]"),
            SelfiesToken::Ring(bo, k) => write!(f, "[{}Ring{k}]", bond_prefix(*bo)),
        }
    }
}

fn bond_prefix(bo: BondOrder) -> &'static str {
    match bo {
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

/// Elements the token alphabet can express.
pub const VOCAB_ELEMENTS: [Element; 4] = [Element::C, Element::N, Element::O, Element::F];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelfiesError {
    #[error("cannot encode: {0}")]
    Unencodable(String),
    #[error("token index {index} outside vocabulary of size {size}")]
    IndexOutOfVocabulary { index: usize, size: usize },
    #[error("sequence of {len} tokens exceeds fixed length {fixed}")]
    TooLong { len: usize, fixed: usize },
    #[error("pad token at position {0} is followed by a non-pad token")]
    PadNotSuffix(usize),
}

/// Fixed token alphabet. Index 0 is `[Pad]`.
pub fn vocabulary() -> Vec<SelfiesToken> {
    use BondOrder::*;
    use Element::*;
    use SelfiesToken::*;
    vec![
        Pad,
        Atom(C),
        Atom(N),
        Atom(O),
        Atom(F),
        BondAtom(Double, C),
        BondAtom(Double, N),
        BondAtom(Double, O),
        BondAtom(Triple, C),
        BondAtom(Triple, N),
        Branch(1),
        Branch(2),
        Ring(Single, 1),
        Ring(Single, 2),
        Ring(Double, 1),
        Ring(Double, 2),
        Ring(Triple, 1),
    ]
}

fn index_of(token: SelfiesToken) -> Option<usize> {
    vocabulary().iter().position(|&t| t == token)
}

pub fn tokens_to_indices(tokens: &[SelfiesToken]) -> Result<Vec<usize>, SelfiesError> {
    let vocab = vocabulary();
    tokens
        .iter()
        .map(|t| {
            vocab
                .iter()
                .position(|v| v == t)
                .ok_or_else(|| SelfiesError::Unencodable(format!("token {t} is not in the vocabulary")))
        })
        .collect()
}

pub fn indices_to_tokens(indices: &[usize]) -> Result<Vec<SelfiesToken>, SelfiesError> {
    let vocab = vocabulary();
    indices
        .iter()
        .map(|&i| vocab.get(i).copied().ok_or(SelfiesError::IndexOutOfVocabulary { index: i, size: vocab.len() }))
        .collect()
}

pub fn render(tokens: &[SelfiesToken]) -> String {
    tokens.iter().map(|t| t.to_string()).collect()
}

/// A token list padded to a fixed length, pads only as a suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<SelfiesToken>,
}

impl TokenSequence {
    pub fn padded(mut tokens: Vec<SelfiesToken>, fixed_length: usize) -> Result<Self, SelfiesError> {
        if tokens.len() > fixed_length {
            return Err(SelfiesError::TooLong { len: tokens.len(), fixed: fixed_length });
        }
        if let Some(p) = tokens.iter().position(|&t| t == SelfiesToken::Pad) {
            if tokens[p..].iter().any(|&t| t != SelfiesToken::Pad) {
                return Err(SelfiesError::PadNotSuffix(p));
            }
        }
        tokens.resize(fixed_length, SelfiesToken::Pad);
        Ok(TokenSequence { tokens })
    }

    pub fn tokens(&self) -> &[SelfiesToken] {
        &self.tokens
    }

    pub fn fixed_length(&self) -> usize {
        self.tokens.len()
    }

    pub fn to_indices(&self) -> Vec<usize> {
        tokens_to_indices(&self.tokens).expect("padded sequences contain vocabulary tokens only")
    }
}

fn digit_base() -> usize {
    vocabulary().len() - 1
}

fn digit_value(t: SelfiesToken) -> usize {
    index_of(t).expect("vocabulary token").saturating_sub(1)
}

fn digit_token(d: usize) -> SelfiesToken {
    vocabulary()[d + 1]
}

/// Encode `q` as exactly `k` base-`V-1` digits, most significant first.
fn number_tokens(q: usize, k: u8) -> Vec<SelfiesToken> {
    let base = digit_base();
    let mut out = vec![SelfiesToken::Pad; usize::from(k)];
    let mut rest = q;
    for slot in out.iter_mut().rev() {
        *slot = digit_token(rest % base);
        rest /= base;
    }
    debug_assert_eq!(rest, 0);
    out
}

fn digits_needed(q: usize) -> Option<u8> {
    let base = digit_base();
    if q < base {
        Some(1)
    } else if q < base * base {
        Some(2)
    } else {
        None
    }
}

/// Encode a connected, valence-valid molecule. Traversal is depth-first from atom 0 with
/// neighbors in index order; the last child continues the chain, earlier children become
/// branches, and ring bonds are emitted right after the later of their two atoms.
pub fn encode(m: &Molecule) -> Result<Vec<SelfiesToken>, SelfiesError> {
    if m.is_empty() {
        return Err(SelfiesError::Unencodable("empty molecule".into()));
    }
    if let Some(e) = m.atoms().iter().find(|e| !VOCAB_ELEMENTS.contains(e)) {
        return Err(SelfiesError::Unencodable(format!("element {e} outside the token vocabulary")));
    }
    if !m.is_connected() {
        return Err(SelfiesError::Unencodable("molecule is disconnected".into()));
    }
    if !crate::chem::check_valence(m) {
        return Err(SelfiesError::Unencodable("molecule violates valence".into()));
    }
    let adj = m.adjacency();
    let n = m.atom_count();
    let mut order = vec![usize::MAX; n];
    let mut counter = 0;
    let mut children = vec![Vec::new(); n];
    let mut parent = vec![usize::MAX; n];
    // Iterative DFS recording pre-order and tree children.
    let mut stack = vec![(0usize, 0usize)];
    order[0] = 0;
    counter += 1;
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        if *next >= adj[u].len() {
            stack.pop();
            continue;
        }
        let (v, bo) = adj[u][*next];
        *next += 1;
        if order[v] == usize::MAX {
            order[v] = counter;
            counter += 1;
            parent[v] = u;
            children[u].push((v, bo));
            stack.push((v, 0));
        }
    }
    let ctx = EncodeCtx { m, adj: &adj, order: &order, children: &children, parent: &parent };
    ctx.chain(0, None)
}

struct EncodeCtx<'a> {
    m: &'a Molecule,
    adj: &'a [Vec<(usize, BondOrder)>],
    order: &'a [usize],
    children: &'a [Vec<(usize, BondOrder)>],
    parent: &'a [usize],
}

impl EncodeCtx<'_> {
    fn atom_token(&self, u: usize, bond: Option<BondOrder>) -> SelfiesToken {
        let e = self.m.atoms()[u];
        match bond {
            None | Some(BondOrder::Single) => SelfiesToken::Atom(e),
            Some(bo) => SelfiesToken::BondAtom(bo, e),
        }
    }

    /// Tokens for the chain starting at `u`, reached through `bond`.
    fn chain(&self, u: usize, bond: Option<BondOrder>) -> Result<Vec<SelfiesToken>, SelfiesError> {
        let token = self.atom_token(u, bond);
        if index_of(token).is_none() {
            return Err(SelfiesError::Unencodable(format!("no token for {token}")));
        }
        let mut out = vec![token];
        let mut rings: Vec<(usize, BondOrder)> = self.adj[u]
            .iter()
            .filter(|&&(v, _)| self.order[v] < self.order[u] && v != self.parent[u])
            .copied()
            .collect();
        rings.sort_by_key(|&(v, _)| self.order[v]);
        for (v, bo) in rings {
            let q = self.order[u] - self.order[v] - 1;
            let k = digits_needed(q).ok_or_else(|| SelfiesError::Unencodable("ring span too long".into()))?;
            if bo == BondOrder::Triple && k > 1 {
                return Err(SelfiesError::Unencodable("long triple-bond ring closure".into()));
            }
            out.push(SelfiesToken::Ring(bo, k));
            out.extend(number_tokens(q, k));
        }
        let kids = &self.children[u];
        for (idx, &(v, bo)) in kids.iter().enumerate() {
            let body = self.chain(v, Some(bo))?;
            if idx + 1 == kids.len() {
                out.extend(body);
            } else {
                let q = body.len() - 1;
                let k = digits_needed(q).ok_or_else(|| SelfiesError::Unencodable("branch too long".into()))?;
                out.push(SelfiesToken::Branch(k));
                out.extend(number_tokens(q, k));
                out.extend(body);
            }
        }
        Ok(out)
    }
}

struct Decoder {
    atoms: Vec<Element>,
    bonds: Vec<(usize, usize, u8)>,
    remaining: Vec<u8>,
}

impl Decoder {
    fn add_atom(&mut self, e: Element) -> usize {
        self.atoms.push(e);
        self.remaining.push(e.max_valence());
        self.atoms.len() - 1
    }

    fn bond_index(&self, a: usize, b: usize) -> Option<usize> {
        self.bonds.iter().position(|&(i, j, _)| (i == a && j == b) || (i == b && j == a))
    }

    /// Consume tokens of one chain starting after `prev`, never reading past `end`.
    fn chain(&mut self, tokens: &[SelfiesToken], mut pos: usize, end: usize, mut prev: Option<usize>) {
        while pos < end {
            let token = tokens[pos];
            pos += 1;
            match token {
                SelfiesToken::Pad => return,
                SelfiesToken::Atom(e) | SelfiesToken::BondAtom(_, e) => {
                    let requested = match token {
                        SelfiesToken::BondAtom(bo, _) => bo.value(),
                        _ => 1,
                    };
                    match prev {
                        None => prev = Some(self.add_atom(e)),
                        Some(p) => {
                            let order = requested.min(self.remaining[p]).min(e.max_valence());
                            if order == 0 {
                                return;
                            }
                            let v = self.add_atom(e);
                            self.remaining[p] -= order;
                            self.remaining[v] -= order;
                            self.bonds.push((p, v, order));
                            prev = Some(v);
                        }
                    }
                }
                SelfiesToken::Branch(k) => {
                    let Some(p) = prev else { continue };
                    if self.remaining[p] <= 1 {
                        continue;
                    }
                    let Some(q) = read_number(tokens, pos, end, k) else { return };
                    pos += usize::from(k);
                    let branch_end = (pos + q + 1).min(end);
                    self.chain(tokens, pos, branch_end, Some(p));
                    pos = branch_end;
                }
                SelfiesToken::Ring(bo, k) => {
                    let Some(p) = prev else { continue };
                    let Some(q) = read_number(tokens, pos, end, k) else { return };
                    pos += usize::from(k);
                    let target = p.saturating_sub(q + 1);
                    if target == p {
                        continue;
                    }
                    let room = self.remaining[p].min(self.remaining[target]);
                    match self.bond_index(p, target) {
                        Some(b) => {
                            let add = bo.value().min(room).min(3 - self.bonds[b].2);
                            self.bonds[b].2 += add;
                            self.remaining[p] -= add;
                            self.remaining[target] -= add;
                        }
                        None => {
                            let order = bo.value().min(room);
                            if order > 0 {
                                self.bonds.push((target, p, order));
                                self.remaining[p] -= order;
                                self.remaining[target] -= order;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn read_number(tokens: &[SelfiesToken], pos: usize, end: usize, k: u8) -> Option<usize> {
    let k = usize::from(k);
    if pos + k > end {
        return None;
    }
    let base = digit_base();
    Some(tokens[pos..pos + k].iter().fold(0, |acc, &t| acc * base + digit_value(t)))
}

/// Decode any token sequence. Decoding stops at the first `[Pad]`; an empty result
/// becomes a single carbon.
pub fn decode(tokens: &[SelfiesToken]) -> Molecule {
    let end = tokens.iter().position(|&t| t == SelfiesToken::Pad).unwrap_or(tokens.len());
    let mut d = Decoder { atoms: Vec::new(), bonds: Vec::new(), remaining: Vec::new() };
    d.chain(tokens, 0, end, None);
    if d.atoms.is_empty() {
        d.add_atom(Element::C);
    }
    let bonds = d
        .bonds
        .into_iter()
        .map(|(i, j, o)| (i, j, BondOrder::from_value(o).expect("decoded orders stay within 1..=3")));
    Molecule::new(d.atoms, bonds).expect("decoder maintains molecule invariants")
}
