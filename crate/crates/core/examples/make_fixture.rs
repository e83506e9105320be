//! Regenerates `tests/fixtures/cnof500.smi`: 500 distinct connected CNOF molecules with
//! 2 to 9 atoms, drawn by decoding random token strings.
//!
//! `cargo run -p molgen-core --example make_fixture > crates/core/tests/fixtures/cnof500.smi`

use std::collections::HashSet;

use molgen::chem::{canonicalize, Element};
use molgen::rng::stream;
use molgen::selfies::{decode, vocabulary, SelfiesToken};
use rand::Rng;

fn main() {
    let vocab: Vec<SelfiesToken> = vocabulary().into_iter().filter(|t| *t != SelfiesToken::Pad).collect();
    let mut rng = stream(2024, 99);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < 500 {
        let len = rng.random_range(3..=12);
        let tokens: Vec<SelfiesToken> = (0..len)
            .map(|_| {
                // bias toward carbon so the set resembles small organics
                if rng.random::<f64>() < 0.35 {
                    SelfiesToken::Atom(Element::C)
                } else {
                    vocab[rng.random_range(0..vocab.len())]
                }
            })
            .collect();
        let m = decode(&tokens);
        if !(2..=9).contains(&m.atom_count()) {
            continue;
        }
        let canon = canonicalize(&m).expect("small molecule");
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    for s in out {
        println!("{s}");
    }
}
