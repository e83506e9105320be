use std::path::Path;

use molgen::data::load_smiles_file;
use molgen::molgan::{train, MolganConfig, TrainOptions};
use molgen::nflow::{encode_molecules, train_flow, FlowConfig, FlowData};

fn fixture() -> Vec<molgen::chem::Molecule> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/cnof500.smi");
    load_smiles_file(&path, None).unwrap().dataset.molecules
}

fn window_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn wasserstein_estimate_shrinks_on_small_set() {
    let mols: Vec<_> = fixture().into_iter().take(50).collect();
    let options = TrainOptions { max_steps: Some(2000), ..TrainOptions::default() };
    let (trainer, _) = train(MolganConfig::default(), &mols, &options, 5).unwrap();
    let w: Vec<f64> = trainer.history.iter().map(|r| r.wasserstein.abs()).collect();
    assert_eq!(w.len(), 2000);
    let (first, last) = (window_mean(&w[..200]), window_mean(&w[1800..]));
    assert!(last < first, "first {first}, last {last}");
}

#[test]
fn flow_nll_decreases() {
    let enc = encode_molecules(&fixture(), None);
    assert_eq!(enc.sequences.len(), 500);
    let config = FlowConfig { batch_size: 128, epochs: 20, ..FlowConfig::default() };
    let (_, history) = train_flow(&config, &FlowData::Indices(enc.sequences), 1).unwrap();
    assert_eq!(history.len(), 20);
    assert!(history[19] < history[0], "{history:?}");
}
