//! Subcommand definitions and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lexspec_core::harness::ClusterParams;

use crate::checkpoint::{load_mlp, save_mlp};
use crate::config::PipelineConfig;
use crate::error::{exit, Error, Result};
use crate::formats::{save_embeddings, DatasetSpec};
use crate::pipeline::{
    ar_curves, evaluate, finish_artifact, load_constraints, load_datasets, load_vectors, map_space,
    postspec_curves, report_block, report_tsv, run_pipeline, specialize, train_mapping, working_space,
    write_text,
};
use crate::{diag, gradcheck, synth};

#[derive(Debug, Parser)]
#[command(name = "lexspec", version, about = "Specialize word vectors with lexical constraints")]
pub struct Cli {
    /// Suppress diagnostics on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by the training and evaluation commands. Precedence:
/// config file, then the command's own flags, then `--set`.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. `--set ar.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Global seed (`run.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Header handling for input vectors: auto, require or forbid.
    #[arg(long)]
    pub header: Option<String>,
    /// Write an `n d` header line on output vectors.
    #[arg(long)]
    pub write_header: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attract-Repel on the filtered constraints; writes the seen-word vectors.
    Specialize {
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// External synonym pairs.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        /// External antonym pairs.
        #[arg(long)]
        antonyms: Option<PathBuf>,
        #[arg(long)]
        babelnet_synonyms: Option<PathBuf>,
        #[arg(long)]
        babelnet_antonyms: Option<PathBuf>,
        /// external, babelnet or external_babelnet
        #[arg(long)]
        constraints: Option<String>,
        /// Evaluation datasets (`format:path`) whose words the disjoint protocol excludes.
        #[arg(long = "dataset")]
        datasets: Vec<DatasetSpec>,
        /// disjoint or overlap
        #[arg(long)]
        setting: Option<String>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Trains the post-specialization generator from original and specialized seen vectors.
    Postspec {
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Output of `specialize`.
        #[arg(long)]
        specialized: PathBuf,
        /// gan, wgan or wgan_gp
        #[arg(long)]
        mode: Option<String>,
        /// Checkpoint to write.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Applies a trained generator to the whole vocabulary.
    Map {
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        specialized: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// unseen_only or all_words
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Spearman correlation per dataset, printed as report blocks.
    Evaluate {
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long = "dataset")]
        datasets: Vec<DatasetSpec>,
        /// Also write a row-per-dataset TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Every stage as configured.
    Pipeline {
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference gradient suites.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt the analytic gradients; the run must then fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Writes synthetic fixtures.
    Synth {
        #[command(subcommand)]
        task: SynthTask,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthTask {
    /// Synonym clusters with cross-cluster antonyms, benchmarks and a run config.
    Cluster {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 5)]
        words: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.25)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Unit vectors with targets under a random orthogonal map.
    Linear {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        words: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn path_arg(p: &Path) -> String {
    p.display().to_string()
}

/// Builds the configuration: file, then `flags` as `(key, value)`, then
/// the `--set` overrides.
fn build_config(common: &Common, flags: &[(&str, Option<String>)]) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut set = |k: &str, v: &str| cfg.set(k, v, Path::new("")).map_err(|e| Error::Usage(e.to_string()));
    if let Some(s) = common.seed {
        set("run.seed", &s.to_string())?;
    }
    if let Some(h) = &common.header {
        set("paths.header", h)?;
    }
    if common.write_header {
        set("run.write_header", "true")?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            set(k, v)?;
        }
    }
    for o in &common.overrides {
        cfg.apply_override(o).map_err(|e| match e {
            Error::Validation(m) => Error::Usage(m),
            other => other,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn datasets_flag(ds: &[DatasetSpec]) -> Option<String> {
    (!ds.is_empty()).then(|| ds.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
}

fn vectors_of(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.paths
        .vectors
        .as_deref()
        .ok_or_else(|| Error::Usage("no input vectors (use --vectors or paths.vectors)".into()))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Specialize {
            vectors,
            synonyms,
            antonyms,
            babelnet_synonyms,
            babelnet_antonyms,
            constraints,
            datasets,
            setting,
            output,
            common,
        } => {
            let cfg = build_config(
                &common,
                &[
                    ("paths.vectors", vectors.as_deref().map(path_arg)),
                    ("paths.external_synonyms", synonyms.as_deref().map(path_arg)),
                    ("paths.external_antonyms", antonyms.as_deref().map(path_arg)),
                    ("paths.babelnet_synonyms", babelnet_synonyms.as_deref().map(path_arg)),
                    ("paths.babelnet_antonyms", babelnet_antonyms.as_deref().map(path_arg)),
                    ("protocol.constraints", constraints),
                    ("paths.datasets", datasets_flag(&datasets)),
                    ("protocol.setting", setting),
                ],
            )?;
            let space = working_space(load_vectors(vectors_of(&cfg)?, cfg.header)?, &cfg)?;
            let ds = load_datasets(&cfg.paths.datasets)?;
            let cs = load_constraints(&cfg)?;
            let spec = specialize(&space, &cs, &ds, &cfg)?;
            save_embeddings(&spec.space, &output, cfg.write_header)?;
            finish_artifact(&output, "specialized_seen", &cfg, cfg.ar_seed())?;
            let mut curves = output.as_os_str().to_owned();
            curves.push(".curves");
            let curves = PathBuf::from(curves);
            write_text(&curves, &ar_curves(&spec.epochs))?;
            finish_artifact(&curves, "ar_curves", &cfg, cfg.ar_seed())
        }
        Command::Postspec {
            vectors,
            specialized,
            mode,
            output,
            common,
        } => {
            let cfg = build_config(
                &common,
                &[
                    ("paths.vectors", vectors.as_deref().map(path_arg)),
                    ("postspec.mode", mode),
                ],
            )?;
            let original = working_space(load_vectors(vectors_of(&cfg)?, cfg.header)?, &cfg)?;
            let seen = load_vectors(&specialized, cfg.header)?;
            let (generator, history) = train_mapping(&original, &seen, &cfg)?;
            save_mlp(&generator, &output)?;
            finish_artifact(&output, "generator", &cfg, cfg.postspec_seed())?;
            let mut curves = output.as_os_str().to_owned();
            curves.push(".curves");
            let curves = PathBuf::from(curves);
            write_text(&curves, &postspec_curves(&history))?;
            finish_artifact(&curves, "postspec_curves", &cfg, cfg.postspec_seed())
        }
        Command::Map {
            vectors,
            specialized,
            checkpoint,
            policy,
            output,
            common,
        } => {
            let cfg = build_config(
                &common,
                &[
                    ("paths.vectors", vectors.as_deref().map(path_arg)),
                    ("postspec.map_policy", policy),
                ],
            )?;
            let original = working_space(load_vectors(vectors_of(&cfg)?, cfg.header)?, &cfg)?;
            let seen = load_vectors(&specialized, cfg.header)?;
            let generator = load_mlp(&checkpoint)?;
            let full = map_space(&original, &generator, &seen, &cfg)?;
            save_embeddings(&full, &output, cfg.write_header)?;
            finish_artifact(&output, "specialized_full", &cfg, cfg.postspec_seed())
        }
        Command::Evaluate {
            vectors,
            datasets,
            tsv,
            common,
        } => {
            let cfg = build_config(
                &common,
                &[
                    ("paths.vectors", vectors.as_deref().map(path_arg)),
                    ("paths.datasets", datasets_flag(&datasets)),
                ],
            )?;
            if cfg.paths.datasets.is_empty() {
                return Err(Error::Usage("no datasets (use --dataset format:path)".into()));
            }
            let space = load_vectors(vectors_of(&cfg)?, cfg.header)?;
            let ds = load_datasets(&cfg.paths.datasets)?;
            let rows = ds.iter().map(|d| evaluate(&space, d)).collect::<Result<Vec<_>>>()?;
            let mut stdout = std::io::stdout().lock();
            for (i, (r, spec)) in rows.iter().zip(&cfg.paths.datasets).enumerate() {
                if i > 0 {
                    writeln!(stdout).ok();
                }
                write!(stdout, "{}", report_block(r, &spec.to_string())).ok();
            }
            if let Some(path) = tsv {
                write_text(&path, &report_tsv(&[("rho", rows)]))?;
                finish_artifact(&path, "report", &cfg, cfg.seed)?;
            }
            Ok(())
        }
        Command::Pipeline { output_dir, common } => {
            if common.config.is_none() {
                return Err(Error::Usage("pipeline needs --config".into()));
            }
            let cfg = build_config(&common, &[("paths.output_dir", output_dir.as_deref().map(path_arg))])?;
            run_pipeline(&cfg).map(|_| ())
        }
        Command::Gradcheck { seed, inject_fault } => {
            if inject_fault {
                diag::warn("gradient fault injection is on; every suite is expected to fail");
            }
            let results = gradcheck::run_all(seed, inject_fault)?;
            for r in &results {
                diag::emit("gradcheck", &[("line", r.line())]);
            }
            let failed: Vec<&str> = results.iter().filter(|r| !r.report.pass).map(|r| r.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::GradCheck(failed.join(", ")))
            }
        }
        Command::Synth { task } => {
            let files = match task {
                SynthTask::Cluster {
                    out,
                    clusters,
                    words,
                    dim,
                    noise,
                    seed,
                } => synth::write_cluster_fixture(&out, &ClusterParams::new(clusters, words, dim, noise, seed))?,
                SynthTask::Linear { out, words, dim, seed } => synth::write_linear_fixture(&out, words, dim, seed)?,
            };
            for f in files {
                diag!("wrote", path = f.display());
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            e.print().ok();
            return code;
        }
    };
    diag::set_quiet(cli.quiet);
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
