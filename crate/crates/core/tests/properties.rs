use proptest::prelude::*;

use molgen::chem::{canonicalize, check_valence, isomorphic_brute_force, parse_smiles, write_smiles, Molecule};
use molgen::graphs::{defeaturize, featurize, one_hot_argmax, GraphSpec};
use molgen::selfies::{decode, encode, vocabulary, SelfiesToken};

fn tokens(max_len: usize) -> impl Strategy<Value = Vec<SelfiesToken>> {
    let v = vocabulary();
    prop::collection::vec(0..v.len(), 1..max_len).prop_map(move |ix| ix.into_iter().map(|i| v[i]).collect())
}

/// Valid molecules of at most nine atoms, drawn through the decoder.
fn molecule() -> impl Strategy<Value = Molecule> {
    tokens(14).prop_map(|t| decode(&t)).prop_filter("at most nine atoms", |m| m.atom_count() <= 9)
}

fn permuted(m: Molecule) -> impl Strategy<Value = (Molecule, Vec<usize>)> {
    let n = m.atom_count();
    (Just(m), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn canonical_form_ignores_atom_order((m, perm) in molecule().prop_flat_map(permuted)) {
        prop_assert_eq!(canonicalize(&m).unwrap(), canonicalize(&m.permuted(&perm)).unwrap());
        prop_assert_eq!(check_valence(&m), check_valence(&m.permuted(&perm)));
    }

    #[test]
    fn written_smiles_reparse(m in molecule()) {
        let back = parse_smiles(&write_smiles(&m)).unwrap();
        prop_assert!(isomorphic_brute_force(&back, &m));
        prop_assert_eq!(canonicalize(&back).unwrap(), canonicalize(&m).unwrap());
    }

    #[test]
    fn canonical_form_separates_non_isomorphic(a in molecule(), b in molecule()) {
        let same = canonicalize(&a).unwrap() == canonicalize(&b).unwrap();
        prop_assert_eq!(same, isomorphic_brute_force(&a, &b));
    }

    #[test]
    fn decode_is_total_and_padding_neutral(t in tokens(40), pads in 0usize..6) {
        let m = decode(&t);
        prop_assert!(check_valence(&m) && m.is_connected());
        let mut padded = t.clone();
        padded.extend(std::iter::repeat_n(SelfiesToken::Pad, pads));
        prop_assert_eq!(decode(&padded), m);
    }

    #[test]
    fn encoding_is_stable(m in molecule()) {
        let t = encode(&m).unwrap();
        prop_assert!(isomorphic_brute_force(&decode(&t), &m));
        prop_assert_eq!(encode(&decode(&t)).unwrap(), t);
    }

    #[test]
    fn featurize_round_trips(m in molecule()) {
        let spec = GraphSpec::default();
        let g = featurize(&m, &spec).unwrap();
        prop_assert!(isomorphic_brute_force(&defeaturize(&g, &spec), &m));
        prop_assert_eq!(one_hot_argmax(&g.x, &g.a, &spec).unwrap(), g);
    }

    #[test]
    fn argmax_graphs_are_symmetric_and_pad_consistent(
        x in prop::collection::vec(-3.0f64..3.0, 45),
        a in prop::collection::vec(-3.0f64..3.0, 324),
    ) {
        let spec = GraphSpec::default();
        let g = one_hot_argmax(&x, &a, &spec).unwrap();
        let (n, y) = (spec.max_atoms, spec.edge_types);
        for i in 0..n {
            prop_assert_eq!(g.x[i * 5..(i + 1) * 5].iter().sum::<f64>(), 1.0);
            let pad_i = g.x_at(&spec, i, spec.pad_index()) == 1.0;
            for j in 0..n {
                prop_assert_eq!(g.a[(i * n + j) * y..(i * n + j + 1) * y].iter().sum::<f64>(), 1.0);
                for t in 0..y {
                    prop_assert_eq!(g.a_at(&spec, i, j, t), g.a_at(&spec, j, i, t));
                }
                if i == j || pad_i {
                    prop_assert_eq!(g.a_at(&spec, i, j, 0), 1.0);
                }
            }
        }
    }
}
