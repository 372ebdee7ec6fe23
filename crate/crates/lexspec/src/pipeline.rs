//! The stages behind the subcommands, and the end-to-end run.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use lexspec_core::attract_repel::{run_attract_repel, EpochReport};
use lexspec_core::constraints::{filter_for_setting, merge_and_deconflict, ConstraintSet, Relation, SourceTag};
use lexspec_core::eval::{eval_vocabulary, evaluate_similarity, scored_pairs, SimilarityDataset};
use lexspec_core::nn::Mlp;
use lexspec_core::postspec::{apply_global_mapping, train_post_specializer, MappingPairs, PostSpecEpoch};
use lexspec_core::{unit_normalize, SeenVocab, VectorSpace};

use crate::checkpoint::save_mlp;
use crate::config::{ConstraintSource, PipelineConfig};
use crate::diag;
use crate::error::{Error, Result};
use crate::formats::{
    create, load_constraint_pairs, load_embeddings, load_similarity_dataset, save_embeddings, DatasetSpec,
    HeaderPolicy,
};
use crate::meta::{write_sidecar, Meta};

pub fn load_vectors(path: &Path, policy: HeaderPolicy) -> Result<VectorSpace> {
    let (space, stats) = load_embeddings(path, policy)?;
    if stats.duplicates > 0 {
        diag::warn(format!(
            "{}: {} duplicate tokens dropped (first occurrence kept)",
            path.display(),
            stats.duplicates
        ));
    }
    if let Some((n, d)) = stats.header {
        if n != stats.records {
            diag::warn(format!("{}: header declares {n} rows, found {}", path.display(), stats.records));
        }
        debug_assert_eq!(d, space.dim());
    }
    diag!("load_vectors", path = path.display(), words = space.len(), dim = space.dim());
    Ok(space)
}

pub fn load_datasets(specs: &[DatasetSpec]) -> Result<Vec<SimilarityDataset>> {
    specs
        .iter()
        .map(|s| {
            let ds = load_similarity_dataset(s)?;
            diag!("load_dataset", name = ds.name(), format = s.format.name(), pairs = ds.len());
            Ok(ds)
        })
        .collect()
}

fn load_source(
    tag: SourceTag,
    synonyms: Option<&Path>,
    antonyms: Option<&Path>,
    strip_prefix: bool,
) -> Result<ConstraintSet> {
    let mut set = ConstraintSet::empty(tag);
    for (relation, path) in [(Relation::Synonym, synonyms), (Relation::Antonym, antonyms)] {
        let Some(path) = path else { continue };
        let (part, stats) = load_constraint_pairs(path, relation, tag, strip_prefix)?;
        diag!(
            "load_constraints",
            path = path.display(),
            read = stats.read,
            kept = stats.kept,
            self_pairs = stats.self_pairs,
            duplicates = stats.duplicates,
        );
        set = merge_and_deconflict(&set, &part).0;
    }
    Ok(set)
}

/// Constraint set selected by `protocol.constraints`. The combined setting
/// merges both sources; pairs that are synonyms in one and antonyms in the
/// other stay antonyms.
pub fn load_constraints(cfg: &PipelineConfig) -> Result<ConstraintSet> {
    let p = &cfg.paths;
    let external = || {
        load_source(
            SourceTag::External,
            p.external_synonyms.as_deref(),
            p.external_antonyms.as_deref(),
            cfg.strip_prefix,
        )
    };
    let babelnet = || {
        load_source(
            SourceTag::Babelnet,
            p.babelnet_synonyms.as_deref(),
            p.babelnet_antonyms.as_deref(),
            cfg.strip_prefix,
        )
    };
    let cs = match cfg.constraints {
        ConstraintSource::External => external()?,
        ConstraintSource::Babelnet => babelnet()?,
        ConstraintSource::ExternalBabelnet => {
            let (merged, conflicts) = merge_and_deconflict(&external()?, &babelnet()?);
            diag!("merge_constraints", conflicts = conflicts);
            merged
        }
    };
    diag!(
        "constraints",
        source = cfg.constraints.name(),
        synonyms = cs.synonyms().len(),
        antonyms = cs.antonyms().len(),
    );
    Ok(cs)
}

/// The distributional space the stages work on: unit-normalized when
/// Attract-Repel normalizes, so the mapping is learned and applied at the
/// same scale.
pub fn working_space(space: VectorSpace, cfg: &PipelineConfig) -> Result<VectorSpace> {
    if cfg.ar.normalize_first {
        Ok(unit_normalize(&space)?)
    } else {
        Ok(space)
    }
}

pub struct Specialized {
    pub seen: SeenVocab,
    pub space: VectorSpace,
    pub epochs: Vec<EpochReport>,
}

/// Filters the constraints for the protocol and runs Attract-Repel.
pub fn specialize(
    space: &VectorSpace,
    cs: &ConstraintSet,
    datasets: &[SimilarityDataset],
    cfg: &PipelineConfig,
) -> Result<Specialized> {
    let eval_words = eval_vocabulary(datasets);
    let (filtered, seen, fs) = filter_for_setting(cs, space, &eval_words, cfg.setting)?;
    diag!(
        "filter",
        synonyms_in = fs.synonyms_in,
        antonyms_in = fs.antonyms_in,
        dropped_oov = fs.dropped_oov,
        dropped_eval = fs.dropped_eval,
        synonyms_out = fs.synonyms_out,
        antonyms_out = fs.antonyms_out,
        seen = seen.len(),
    );
    let out = run_attract_repel(space, &filtered, &seen, &cfg.ar_config())?;
    for e in &out.epochs {
        diag!(
            "ar_epoch",
            epoch = e.epoch,
            attract = e.cost.attract,
            repel = e.cost.repel,
            regularization = e.cost.regularization,
            total = e.cost.total(),
            skipped = e.skipped,
        );
    }
    Ok(Specialized {
        seen,
        space: out.specialized,
        epochs: out.epochs,
    })
}

pub fn train_mapping(
    original: &VectorSpace,
    specialized_seen: &VectorSpace,
    cfg: &PipelineConfig,
) -> Result<(Mlp, Vec<PostSpecEpoch>)> {
    let pairs = MappingPairs::from_spaces(original, specialized_seen)?;
    let ps = cfg.postspec_config();
    diag!("postspec_start", pairs = pairs.len(), mode = ps.mode.name(), seed = ps.seed);
    let out = train_post_specializer(&pairs, &ps)?;
    for e in &out.history {
        diag!(
            "postspec_epoch",
            epoch = e.epoch,
            generator_steps = e.generator_steps,
            l_g = e.l_g,
            l_d = e.l_d,
            penalty = e.penalty,
            mapping_l2 = e.mapping_l2,
        );
    }
    Ok((out.generator, out.history))
}

/// Applies the generator to the whole vocabulary of `original`.
pub fn map_space(
    original: &VectorSpace,
    generator: &Mlp,
    specialized_seen: &VectorSpace,
    cfg: &PipelineConfig,
) -> Result<VectorSpace> {
    let tokens = specialized_seen
        .words()
        .iter()
        .filter(|w| original.contains(w))
        .cloned()
        .collect();
    let seen = SeenVocab::new(tokens, original)?;
    Ok(apply_global_mapping(
        original,
        generator,
        &seen,
        specialized_seen,
        cfg.postspec.map_policy,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetResult {
    pub dataset: String,
    /// `None` when fewer than two pairs are covered or a side is constant
    pub rho: Option<f64>,
    pub pairs_used: usize,
    pub pairs_total: usize,
}

impl DatasetResult {
    pub fn coverage(&self) -> f64 {
        self.pairs_used as f64 / self.pairs_total as f64
    }

    pub fn rho_text(&self) -> String {
        self.rho.map_or_else(|| "undefined".into(), |r| format!("{r:.6}"))
    }
}

pub fn evaluate(space: &VectorSpace, ds: &SimilarityDataset) -> Result<DatasetResult> {
    match evaluate_similarity(space, ds) {
        Ok(r) => Ok(DatasetResult {
            dataset: r.dataset,
            rho: Some(r.rho),
            pairs_used: r.pairs_used,
            pairs_total: r.pairs_total,
        }),
        Err(lexspec_core::Error::Empty(_) | lexspec_core::Error::Undefined(_)) => Ok(DatasetResult {
            dataset: ds.name().into(),
            rho: None,
            pairs_used: scored_pairs(space, ds)?.0.len(),
            pairs_total: ds.len(),
        }),
        Err(e) => Err(e.into()),
    }
}

/// The block `evaluate` prints for one dataset.
pub fn report_block(r: &DatasetResult, source: &str) -> String {
    format!(
        "dataset={}\nsource={source}\nrho={}\npairs_used={}\npairs_total={}\ncoverage={:.6}\n",
        r.dataset,
        r.rho_text(),
        r.pairs_used,
        r.pairs_total,
        r.coverage()
    )
}

/// One row per dataset, one ρ column per stage.
pub fn report_tsv(stages: &[(&str, Vec<DatasetResult>)]) -> String {
    let mut s = String::from("dataset\tpairs_total\tpairs_used\tcoverage");
    for (name, _) in stages {
        write!(s, "\t{name}").unwrap();
    }
    s.push('\n');
    let Some((_, first)) = stages.first() else {
        return s;
    };
    for (i, r) in first.iter().enumerate() {
        write!(s, "{}\t{}\t{}\t{:.6}", r.dataset, r.pairs_total, r.pairs_used, r.coverage()).unwrap();
        for (_, rows) in stages {
            write!(s, "\t{}", rows[i].rho_text()).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn ar_curves(epochs: &[EpochReport]) -> String {
    let mut s = String::new();
    for e in epochs {
        writeln!(
            s,
            "epoch={} attract={} repel={} regularization={} total={} batches={} skipped={}",
            e.epoch,
            e.cost.attract,
            e.cost.repel,
            e.cost.regularization,
            e.cost.total(),
            e.batches,
            e.skipped
        )
        .unwrap();
    }
    s
}

pub fn postspec_curves(history: &[PostSpecEpoch]) -> String {
    let mut s = String::new();
    for e in history {
        writeln!(
            s,
            "epoch={} generator_steps={} l_g={} l_d={} penalty={} mapping_l2={}",
            e.epoch, e.generator_steps, e.l_g, e.l_d, e.penalty, e.mapping_l2
        )
        .unwrap();
    }
    s
}

/// Writes an artifact's sidecar and logs it.
pub fn finish_artifact(path: &Path, kind: &str, cfg: &PipelineConfig, seed: u64) -> Result<()> {
    write_sidecar(
        path,
        &Meta {
            kind: kind.into(),
            config_sha256: cfg.sha256(),
            seed,
        },
    )?;
    diag!("wrote", kind = kind, path = path.display());
    Ok(())
}

pub const SPECIALIZED_SEEN: &str = "specialized_seen.txt";
pub const GENERATOR: &str = "generator.ckpt";
pub const SPECIALIZED_FULL: &str = "specialized_full.txt";
pub const REPORT: &str = "report.tsv";
pub const AR_CURVES: &str = "ar_curves.txt";
pub const POSTSPEC_CURVES: &str = "postspec_curves.txt";
pub const EFFECTIVE_CONFIG: &str = "run.effective.cfg";

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub outputs: Vec<PathBuf>,
    pub report: Vec<(String, Vec<DatasetResult>)>,
}

/// Every stage in order, writing all artifacts into `paths.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate_pipeline_inputs()?;
    let out_dir = cfg.paths.output_dir.clone().expect("checked by validation");
    let vectors = cfg.paths.vectors.as_deref().expect("checked by validation");
    diag!("pipeline_start", config_sha256 = cfg.sha256(), seed = cfg.seed);

    let mut outputs = Vec::new();
    let mut artifact = |name: &str| {
        let p = out_dir.join(name);
        outputs.push(p.clone());
        p
    };

    let config_path = artifact(EFFECTIVE_CONFIG);
    write_text(&config_path, &cfg.canonical())?;
    finish_artifact(&config_path, "config", cfg, cfg.seed)?;

    let original = working_space(load_vectors(vectors, cfg.header)?, cfg)?;
    let datasets = load_datasets(&cfg.paths.datasets)?;
    let cs = load_constraints(cfg)?;

    let spec = specialize(&original, &cs, &datasets, cfg)?;
    let seen_path = artifact(SPECIALIZED_SEEN);
    save_embeddings(&spec.space, &seen_path, cfg.write_header)?;
    finish_artifact(&seen_path, "specialized_seen", cfg, cfg.ar_seed())?;
    let curves = artifact(AR_CURVES);
    write_text(&curves, &ar_curves(&spec.epochs))?;
    finish_artifact(&curves, "ar_curves", cfg, cfg.ar_seed())?;

    let (generator, history) = train_mapping(&original, &spec.space, cfg)?;
    let ckpt = artifact(GENERATOR);
    save_mlp(&generator, &ckpt)?;
    finish_artifact(&ckpt, "generator", cfg, cfg.postspec_seed())?;
    let curves = artifact(POSTSPEC_CURVES);
    write_text(&curves, &postspec_curves(&history))?;
    finish_artifact(&curves, "postspec_curves", cfg, cfg.postspec_seed())?;

    let full = map_space(&original, &generator, &spec.space, cfg)?;
    let full_path = artifact(SPECIALIZED_FULL);
    save_embeddings(&full, &full_path, cfg.write_header)?;
    finish_artifact(&full_path, "specialized_full", cfg, cfg.postspec_seed())?;

    let ar_only = original.overlaid_with(&spec.space)?;
    let mut report = Vec::new();
    for (stage, space) in [("original", &original), ("attract_repel", &ar_only), ("post_specialized", &full)] {
        let rows = datasets.iter().map(|ds| evaluate(space, ds)).collect::<Result<Vec<_>>>()?;
        for r in &rows {
            diag!(
                "evaluate",
                stage = stage,
                dataset = r.dataset,
                rho = r.rho_text(),
                pairs_used = r.pairs_used,
                pairs_total = r.pairs_total,
            );
        }
        report.push((stage.to_string(), rows));
    }
    let report_path = artifact(REPORT);
    let table: Vec<(&str, Vec<DatasetResult>)> = report.iter().map(|(s, r)| (s.as_str(), r.clone())).collect();
    write_text(&report_path, &report_tsv(&table))?;
    finish_artifact(&report_path, "report", cfg, cfg.seed)?;

    diag!("pipeline_done", outputs = outputs.len());
    Ok(PipelineSummary { outputs, report })
}
