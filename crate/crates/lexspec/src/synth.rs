//! Writes synthetic fixtures in the regular file formats.

use std::path::{Path, PathBuf};

use lexspec_core::eval::SimilarityDataset;
use lexspec_core::harness::{make_cluster_task_with, make_linear_task, ClusterParams, SynthTask};

use crate::error::{Error, Result};
use crate::formats::{save_constraint_pairs, save_embeddings, save_plain3col};
use crate::pipeline::write_text;

pub const VECTORS: &str = "vectors.txt";
pub const SYNONYMS: &str = "synonyms.txt";
pub const ANTONYMS: &str = "antonyms.txt";
pub const BENCHMARK: &str = "benchmark.txt";
pub const HELDOUT: &str = "heldout.txt";
pub const TARGETS: &str = "targets.txt";
pub const ORTHOGONAL: &str = "orthogonal.txt";
pub const RUN_CONFIG: &str = "run.cfg";

/// Planted pairs restricted to clusters `from..`.
fn benchmark_over(task: &SynthTask, from: usize) -> Result<SimilarityDataset> {
    let keep: std::collections::BTreeSet<&String> = task.clusters[from..].iter().flatten().collect();
    let all = task.planted_benchmark()?;
    let records = all
        .records()
        .iter()
        .filter(|r| keep.contains(&r.first) && keep.contains(&r.second))
        .cloned()
        .collect();
    Ok(SimilarityDataset::new("heldout", records)?)
}

/// A small run configuration for the cluster fixture. The held-out
/// benchmark covers the second half of the clusters, so under the disjoint
/// protocol their constraints are dropped and only the mapping reaches
/// them.
fn cluster_config(seed: u64) -> String {
    format!(
        "# synthetic cluster fixture\n\
         paths.vectors = {VECTORS}\n\
         paths.external_synonyms = {SYNONYMS}\n\
         paths.external_antonyms = {ANTONYMS}\n\
         paths.datasets = plain3col:{HELDOUT}\n\
         paths.output_dir = out\n\
         protocol.setting = disjoint\n\
         protocol.constraints = external\n\
         ar.epochs = 20\n\
         postspec.mode = wgan_gp\n\
         postspec.generator_hidden = 32,32\n\
         postspec.critic_hidden = 32,32\n\
         postspec.batch_size = 16\n\
         postspec.epochs = 50\n\
         run.seed = {seed}\n"
    )
}

pub fn write_cluster_fixture(dir: &Path, p: &ClusterParams) -> Result<Vec<PathBuf>> {
    if p.n_clusters < 2 {
        return Err(Error::Validation("the cluster fixture needs at least two clusters".into()));
    }
    let task = make_cluster_task_with(p)?;
    let mut written = Vec::new();
    let mut path = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    save_embeddings(&task.space, &path(VECTORS), false)?;
    save_constraint_pairs(task.constraints.synonyms(), &path(SYNONYMS))?;
    save_constraint_pairs(task.constraints.antonyms(), &path(ANTONYMS))?;
    save_plain3col(&task.planted_benchmark()?, &path(BENCHMARK))?;
    save_plain3col(&benchmark_over(&task, p.n_clusters / 2)?, &path(HELDOUT))?;
    write_text(&path(RUN_CONFIG), &cluster_config(p.seed))?;
    Ok(written)
}

pub fn write_linear_fixture(dir: &Path, n_words: usize, dim: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let task = make_linear_task(n_words, dim, seed)?;
    let targets = task.targets.as_ref().expect("linear tasks carry targets");
    let truth = task.truth.as_ref().expect("linear tasks carry the map");
    let mut q = String::new();
    for r in 0..truth.q.rows() {
        let row: Vec<String> = truth.q.row(r).iter().map(f64::to_string).collect();
        q.push_str(&row.join(" "));
        q.push('\n');
    }
    let files = [dir.join(VECTORS), dir.join(TARGETS), dir.join(ORTHOGONAL)];
    save_embeddings(&task.space, &files[0], false)?;
    save_embeddings(targets, &files[1], false)?;
    write_text(&files[2], &q)?;
    Ok(files.to_vec())
}
