//! SMILES dataset loading, model-specific filtering and subsampling.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use thiserror::Error;

use crate::chem::{parse_smiles, Element, Molecule};
use crate::graphs::GraphSpec;
use crate::metrics::canonical_key;
use crate::rng::{stream, streams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("no parseable rows in {0}")]
    NoParseableRows(PathBuf),
    #[error("column {column:?} not found in {path}")]
    ColumnNotFound { path: PathBuf, column: String },
    #[error("cannot take {k} molecules from a dataset of {size}")]
    SubsampleTooLarge { k: usize, size: usize },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing CSV {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeDataset {
    pub name: String,
    pub molecules: Vec<Molecule>,
    pub canonical_set: HashSet<String>,
    /// Source path followed by the filters applied, in order.
    pub provenance: Vec<String>,
}

impl MoleculeDataset {
    pub fn new(name: &str, molecules: Vec<Molecule>, provenance: Vec<String>) -> MoleculeDataset {
        let canonical_set = molecules.iter().map(canonical_key).collect();
        MoleculeDataset { name: name.to_string(), molecules, canonical_set, provenance }
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    fn derive(&self, molecules: Vec<Molecule>, step: String) -> MoleculeDataset {
        let mut provenance = self.provenance.clone();
        provenance.push(step);
        MoleculeDataset::new(&self.name, molecules, provenance)
    }
}

/// Rows read by [`load_smiles_file`], with the number dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub dataset: MoleculeDataset,
    pub dropped: usize,
}

/// Read SMILES from a CSV file (`column` names the SMILES header) or, with `column` unset,
/// from a plain file with one SMILES per line. Blank lines are skipped; rows that do not
/// parse or violate valence are dropped with a warning.
pub fn load_smiles_file(path: &Path, column: Option<&str>) -> Result<LoadReport, DataError> {
    if !path.exists() {
        return Err(DataError::FileNotFound(path.to_path_buf()));
    }
    let rows = match column {
        Some(col) => read_csv_column(path, col)?,
        None => std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?
            .lines()
            .map(|l| l.split_whitespace().next().unwrap_or("").to_string())
            .filter(|l| !l.is_empty())
            .collect(),
    };
    let mut molecules = Vec::new();
    let mut dropped = 0;
    for (k, s) in rows.iter().enumerate() {
        match parse_smiles(s) {
            Ok(m) => molecules.push(m),
            Err(e) => {
                dropped += 1;
                log::warn!("{}: row {}: dropping {s:?}: {e}", path.display(), k + 1);
            }
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} of {} rows", path.display(), rows.len());
    }
    if molecules.is_empty() {
        return Err(DataError::NoParseableRows(path.to_path_buf()));
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dataset = MoleculeDataset::new(&name, molecules, vec![path.display().to_string()]);
    Ok(LoadReport { dataset, dropped })
}

fn read_csv_column(path: &Path, column: &str) -> Result<Vec<String>, DataError> {
    let csv_err = |source| DataError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?;
    let idx = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| DataError::ColumnNotFound { path: path.to_path_buf(), column: column.to_string() })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        out.push(record.get(idx).unwrap_or("").trim().to_string());
    }
    Ok(out)
}

/// Keep molecules made of C, N, O and F with at most `spec.max_atoms` atoms.
pub fn filter_for_molgan(ds: &MoleculeDataset, spec: &GraphSpec) -> MoleculeDataset {
    const ALLOWED: [Element; 4] = [Element::C, Element::N, Element::O, Element::F];
    let kept = ds
        .molecules
        .iter()
        .filter(|m| m.atom_count() <= spec.max_atoms && m.atoms().iter().all(|e| ALLOWED.contains(e)))
        .cloned()
        .collect();
    ds.derive(kept, format!("elements in CNOF, at most {} atoms", spec.max_atoms))
}

/// `k` molecules drawn uniformly without replacement, in source order.
pub fn subsample(ds: &MoleculeDataset, k: usize, seed: u64) -> Result<MoleculeDataset, DataError> {
    if k > ds.len() {
        return Err(DataError::SubsampleTooLarge { k, size: ds.len() });
    }
    let mut idx = sample(&mut stream(seed, streams::SUBSAMPLE), ds.len(), k).into_vec();
    idx.sort_unstable();
    let mols = idx.iter().map(|&i| ds.molecules[i].clone()).collect();
    Ok(ds.derive(mols, format!("random subset of {k} (seed {seed})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_file_drops_bad_rows() {
        let f = write("C\nCC\nbogus(\n\n", ".smi");
        let r = load_smiles_file(f.path(), None).unwrap();
        assert_eq!(r.dataset.len(), 2);
        assert_eq!(r.dropped, 1);
    }

    #[test]
    fn csv_named_column() {
        let f = write("name,smiles,p_np\n\"a, b\",CCO,1\nx,c1ccccc1,0\ny,C#N,1\n", ".csv");
        let r = load_smiles_file(f.path(), Some("smiles")).unwrap();
        assert_eq!(r.dataset.len(), 2);
        assert_eq!(r.dropped, 1);
        assert!(matches!(load_smiles_file(f.path(), Some("SMILES")), Err(DataError::ColumnNotFound { .. })));
    }

    #[test]
    fn empty_and_missing_files() {
        let f = write("", ".smi");
        assert!(matches!(load_smiles_file(f.path(), None), Err(DataError::NoParseableRows(_))));
        assert!(matches!(load_smiles_file(Path::new("/nonexistent/x.smi"), None), Err(DataError::FileNotFound(_))));
    }

    #[test]
    fn molgan_filter() {
        let mols = ["CS", "CCCCCCCCC", "CCCCCCCCCC", "OC(F)N"].iter().map(|s| parse_smiles(s).unwrap()).collect();
        let ds = MoleculeDataset::new("t", mols, vec![]);
        let f = filter_for_molgan(&ds, &GraphSpec::default());
        assert_eq!(f.len(), 2);
        assert_eq!(filter_for_molgan(&f, &GraphSpec::default()), filter_for_molgan(&f, &GraphSpec::default()));
        assert_eq!(filter_for_molgan(&f, &GraphSpec::default()).molecules, f.molecules);
        assert_eq!(f.canonical_set.len(), 2);
    }

    #[test]
    fn subsample_rules() {
        let mols: Vec<Molecule> =
            ["C", "CC", "CCC", "CCCC", "CCCCC"].iter().map(|s| parse_smiles(s).unwrap()).collect();
        let ds = MoleculeDataset::new("t", mols, vec![]);
        assert_eq!(subsample(&ds, 5, 1).unwrap().canonical_set, ds.canonical_set);
        assert_eq!(subsample(&ds, 3, 9).unwrap(), subsample(&ds, 3, 9).unwrap());
        assert!(matches!(subsample(&ds, 6, 1), Err(DataError::SubsampleTooLarge { .. })));
    }
}
