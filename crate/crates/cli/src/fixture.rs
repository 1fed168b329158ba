//! Localization evaluation fixtures.
//!
//! A fixture is a JSON object `{"instances": [...]}`. Each instance has an
//! `id`, a repository (`files` inline or a `root` directory relative to the
//! fixture), the ground-truth `truth_diff`, and either `predicted_symbols`
//! (qualified names taken as the localized set) or an `issue` text that is
//! localized live with the configured retrieval settings.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cppscope_core::config::Config;
use cppscope_core::eval::{evaluate_localization, LocalizationSummary};
use cppscope_core::index::{build_index_with, StructuralIndex};
use cppscope_core::intent::{build_intent_index_with, localize_issue, EmbeddingProvider, LocalizationResult};
use cppscope_core::query::DefectSubgraph;
use cppscope_core::repo::parse_unified_diff;
use cppscope_core::{load_repository, Execution, IssueDescription, PatchCandidate, Repository};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    id: String,
    #[serde(default)]
    files: Option<BTreeMap<String, String>>,
    #[serde(default)]
    root: Option<String>,
    truth_diff: String,
    #[serde(default)]
    predicted_symbols: Option<Vec<String>>,
    #[serde(default)]
    issue: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fixture {
    instances: Vec<Instance>,
}

fn repo_of(inst: &Instance, base: &Path) -> Result<Repository> {
    match (&inst.files, &inst.root) {
        (Some(files), None) => Ok(Repository::from_files(format!("/{}", inst.id), files.clone())?),
        (None, Some(root)) => Ok(load_repository(&base.join(root), &[])?.0),
        _ => bail!("instance {}: give exactly one of `files` and `root`", inst.id),
    }
}

fn predicted(
    inst: &Instance,
    repo: &Repository,
    sidx: &StructuralIndex,
    cfg: &Config,
    provider: &dyn EmbeddingProvider,
    exec: Execution,
) -> Result<LocalizationResult> {
    if let Some(names) = &inst.predicted_symbols {
        let ids: BTreeSet<u32> = names
            .iter()
            .flat_map(|n| sidx.by_qualified.get(n).cloned().unwrap_or_default())
            .collect();
        return Ok(LocalizationResult {
            intent_hits: Vec::new(),
            subgraph: DefectSubgraph {
                seeds: Vec::new(),
                members: ids.clone(),
                hop_limit: 0,
            },
            intersection: ids,
            fallback_used: false,
        });
    }
    let Some(text) = &inst.issue else {
        bail!("instance {}: needs `predicted_symbols` or `issue`", inst.id);
    };
    let iidx = build_intent_index_with(repo, sidx, provider, &cfg.retrieval.granularities, exec)?;
    let issue = IssueDescription::from_text(text);
    Ok(localize_issue(
        sidx,
        &iidx,
        provider,
        &issue,
        cfg.retrieval.k,
        cfg.retrieval.hop_limit,
        cfg.retrieval.fallback,
    )?)
}

pub fn evaluate_fixture(
    path: &Path,
    cfg: &Config,
    provider: &dyn EmbeddingProvider,
    exec: Execution,
) -> Result<LocalizationSummary> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading fixture {}", path.display()))?;
    let fixture: Fixture = serde_json::from_str(&text).with_context(|| format!("parsing fixture {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut indices: BTreeMap<String, StructuralIndex> = BTreeMap::new();
    let mut predictions = BTreeMap::new();
    let mut truths: BTreeMap<String, PatchCandidate> = BTreeMap::new();
    for inst in &fixture.instances {
        if indices.contains_key(&inst.id) {
            bail!("duplicate instance id {}", inst.id);
        }
        let repo = repo_of(inst, base)?;
        let sidx = build_index_with(&repo, exec);
        let truth = parse_unified_diff(&inst.truth_diff).with_context(|| format!("instance {} truth_diff", inst.id))?;
        predictions.insert(inst.id.clone(), predicted(inst, &repo, &sidx, cfg, provider, exec)?);
        truths.insert(inst.id.clone(), truth);
        indices.insert(inst.id.clone(), sidx);
    }
    let refs: BTreeMap<String, &StructuralIndex> = indices.iter().map(|(k, v)| (k.clone(), v)).collect();
    Ok(evaluate_localization(&predictions, &truths, &refs)?)
}
