//! Validity, uniqueness and novelty of generated molecules.
//!
//! A molecule is valid when it has at least one atom, is connected and respects valence.
//! Uniqueness and novelty use the valid molecules as denominator and are reported as 0
//! (with the `degenerate` flag set) when nothing is valid. Novelty counts every valid
//! occurrence, duplicates included.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chem::{canonicalize, check_valence, write_smiles, Molecule};

pub fn is_valid(m: &Molecule) -> bool {
    m.atom_count() >= 1 && m.is_connected() && check_valence(m)
}

/// Canonical string, falling back to the plain writer for molecules too large to canonicalize.
pub fn canonical_key(m: &Molecule) -> String {
    canonicalize(m).unwrap_or_else(|_| write_smiles(m))
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn validity(mols: &[Molecule]) -> f64 {
    percent(mols.iter().filter(|m| is_valid(m)).count(), mols.len())
}

pub fn uniqueness(mols: &[Molecule]) -> f64 {
    let keys: Vec<String> = mols.iter().filter(|m| is_valid(m)).map(canonical_key).collect();
    let distinct: HashSet<&String> = keys.iter().collect();
    percent(distinct.len(), keys.len())
}

pub fn novelty(mols: &[Molecule], training: &HashSet<String>) -> f64 {
    let keys: Vec<String> = mols.iter().filter(|m| is_valid(m)).map(canonical_key).collect();
    percent(keys.iter().filter(|k| !training.contains(*k)).count(), keys.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRecord {
    pub canonical: String,
    pub valid: bool,
    pub novel: bool,
}

/// Summary row. `label` names the source (file or seed) in multi-run tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub seed: Option<u64>,
    pub n_generated: usize,
    pub n_valid: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub n_generated: usize,
    pub n_valid: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub seed: Option<u64>,
    /// Set when no molecule is valid and uniqueness/novelty are reported as 0.
    pub degenerate: bool,
    pub records: Vec<MoleculeRecord>,
}

impl GenerationReport {
    pub fn evaluate(mols: &[Molecule], training: &HashSet<String>, seed: Option<u64>) -> GenerationReport {
        let records: Vec<MoleculeRecord> = mols
            .iter()
            .map(|m| {
                let canonical = canonical_key(m);
                let valid = is_valid(m);
                let novel = valid && !training.contains(&canonical);
                MoleculeRecord { canonical, valid, novel }
            })
            .collect();
        let valid: Vec<&MoleculeRecord> = records.iter().filter(|r| r.valid).collect();
        let distinct: HashSet<&str> = valid.iter().map(|r| r.canonical.as_str()).collect();
        let n_valid = valid.len();
        GenerationReport {
            n_generated: records.len(),
            n_valid,
            validity: percent(n_valid, records.len()),
            uniqueness: percent(distinct.len(), n_valid),
            novelty: percent(valid.iter().filter(|r| r.novel).count(), n_valid),
            seed,
            degenerate: n_valid == 0,
            records,
        }
    }

    pub fn row(&self, label: &str) -> ReportRow {
        ReportRow {
            label: label.to_string(),
            seed: self.seed,
            n_generated: self.n_generated,
            n_valid: self.n_valid,
            validity: self.validity,
            uniqueness: self.uniqueness,
            novelty: self.novelty,
            degenerate: self.degenerate,
        }
    }
}

/// Column-wise mean of several rows, labelled "mean".
pub fn mean_row(rows: &[ReportRow]) -> ReportRow {
    let n = rows.len().max(1) as f64;
    let avg = |f: fn(&ReportRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    ReportRow {
        label: "mean".into(),
        seed: None,
        n_generated: rows.iter().map(|r| r.n_generated).sum(),
        n_valid: rows.iter().map(|r| r.n_valid).sum(),
        validity: avg(|r| r.validity),
        uniqueness: avg(|r| r.uniqueness),
        novelty: avg(|r| r.novelty),
        degenerate: rows.iter().any(|r| r.degenerate),
    }
}

/// Rows appended with a mean row when there is more than one.
pub fn with_mean(mut rows: Vec<ReportRow>) -> Vec<ReportRow> {
    if rows.len() > 1 {
        let m = mean_row(&rows);
        rows.push(m);
    }
    rows
}

pub fn render_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str("# validity: % of generated molecules that are non-empty, connected and valence-valid\n");
    out.push_str("# uniqueness, novelty: % of valid molecules (0 when none are valid, marked *)\n");
    let _ = writeln!(
        out,
        "{:<24} {:>8} {:>10} {:>8} {:>8} {:>10} {:>8}",
        "label", "seed", "generated", "valid", "Val", "Uni", "Nov"
    );
    for r in rows {
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        let mark = if r.degenerate { "*" } else { "" };
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>10} {:>8} {:>8.2} {:>9.2}{:1} {:>8.2}",
            r.label, seed, r.n_generated, r.n_valid, r.validity, r.uniqueness, mark, r.novelty
        );
    }
    out
}
