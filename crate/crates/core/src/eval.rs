//! File- and function-level localization success rates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::StructuralIndex;
use crate::intent::LocalizationResult;
use crate::query::functions_at;
use crate::repo::PatchCandidate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("instance ids do not align: {0}")]
    IdMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub instance_id: String,
    pub predicted_files: BTreeSet<String>,
    pub predicted_functions: BTreeSet<String>,
    pub truth_files: BTreeSet<String>,
    pub truth_functions: BTreeSet<String>,
    pub file_hit: bool,
    pub function_hit: bool,
}

impl LocalizationReport {
    pub fn new(
        instance_id: impl Into<String>,
        predicted_files: BTreeSet<String>,
        predicted_functions: BTreeSet<String>,
        truth_files: BTreeSet<String>,
        truth_functions: BTreeSet<String>,
    ) -> LocalizationReport {
        LocalizationReport {
            instance_id: instance_id.into(),
            file_hit: !predicted_files.is_disjoint(&truth_files),
            function_hit: !predicted_functions.is_disjoint(&truth_functions),
            predicted_files,
            predicted_functions,
            truth_files,
            truth_functions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub file_rate: f64,
    pub function_rate: f64,
    /// Sorted by instance id.
    pub reports: Vec<LocalizationReport>,
}

/// Functions are identified by qualified name plus signature, so a
/// declaration and its out-of-line definition count as the same function.
fn function_key(index: &StructuralIndex, id: u32) -> Option<String> {
    let s = index.symbol(id)?;
    (s.kind.is_function() && !s.is_unresolved()).then(|| format!("{}{}", s.qualified_name, s.signature))
}

pub fn predicted_sets(index: &StructuralIndex, prediction: &LocalizationResult) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut files = BTreeSet::new();
    let mut functions = BTreeSet::new();
    for &id in &prediction.intersection {
        if let Some(s) = index.symbol(id) {
            if !s.location.path.is_empty() {
                files.insert(s.location.path.clone());
            }
        }
        functions.extend(function_key(index, id));
    }
    (files, functions)
}

/// Touched files and the functions whose pre-patch span contains a
/// changed line.
pub fn truth_sets(index: &StructuralIndex, truth: &PatchCandidate) -> (BTreeSet<String>, BTreeSet<String>) {
    let files: BTreeSet<String> = truth.touched_files.iter().cloned().collect();
    let mut functions = BTreeSet::new();
    for f in &truth.files {
        for h in &f.hunks {
            for line in h.changed_old_lines() {
                for id in functions_at(index, f.path(), line as u32) {
                    functions.extend(function_key(index, id));
                }
            }
        }
    }
    (files, functions)
}

/// Rates over already-built reports.
pub fn summarize(mut reports: Vec<LocalizationReport>) -> LocalizationSummary {
    reports.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let n = reports.len().max(1) as f64;
    let files = reports.iter().filter(|r| r.file_hit).count() as f64;
    let funcs = reports.iter().filter(|r| r.function_hit).count() as f64;
    LocalizationSummary {
        file_rate: if reports.is_empty() { 0.0 } else { files / n },
        function_rate: if reports.is_empty() { 0.0 } else { funcs / n },
        reports,
    }
}

/// Scores predictions against ground-truth patches. The three maps must
/// have exactly the same instance ids.
pub fn evaluate_localization(
    predictions: &BTreeMap<String, LocalizationResult>,
    truths: &BTreeMap<String, PatchCandidate>,
    indices: &BTreeMap<String, &StructuralIndex>,
) -> Result<LocalizationSummary, EvalError> {
    let ids = |m: Vec<&String>| m.into_iter().cloned().collect::<BTreeSet<String>>();
    let p = ids(predictions.keys().collect());
    let t = ids(truths.keys().collect());
    let i = ids(indices.keys().collect());
    if p != t || p != i {
        let odd: BTreeSet<&String> = p.symmetric_difference(&t).chain(p.symmetric_difference(&i)).collect();
        return Err(EvalError::IdMismatch(
            odd.into_iter().cloned().collect::<Vec<_>>().join(", "),
        ));
    }
    let reports = p
        .iter()
        .map(|id| {
            let index = indices[id];
            let (pf, pfn) = predicted_sets(index, &predictions[id]);
            let (tf, tfn) = truth_sets(index, &truths[id]);
            LocalizationReport::new(id.clone(), pf, pfn, tf, tfn)
        })
        .collect();
    Ok(summarize(reports))
}
