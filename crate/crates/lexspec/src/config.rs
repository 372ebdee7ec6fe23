//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! paths.vectors = glove.txt
//! paths.external_synonyms = syn.txt
//! paths.datasets = plain3col:ws353.txt, simlex_tsv:SimLex-999.txt
//! protocol.setting = disjoint
//! run.seed = 7
//! ```
//!
//! Every key has a default; unknown keys are rejected. Relative paths are
//! resolved against the directory of the config file and stored absolute. Overrides given on
//! the command line are applied on top, in order.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lexspec_core::attract_repel::{ArConfig, NegativeRule};
use lexspec_core::constraints::Setting;
use lexspec_core::nn::OptimizerKind;
use lexspec_core::postspec::{AdversarialMode, MapPolicy, PostSpecConfig};
use sha2::{Digest, Sha256};

use crate::checkpoint::{activation_token, parse_activation};
use crate::error::{Error, Result};
use crate::formats::{DatasetSpec, HeaderPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSource {
    External,
    Babelnet,
    ExternalBabelnet,
}

impl ConstraintSource {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintSource::External => "external",
            ConstraintSource::Babelnet => "babelnet",
            ConstraintSource::ExternalBabelnet => "external_babelnet",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Paths {
    pub vectors: Option<PathBuf>,
    pub external_synonyms: Option<PathBuf>,
    pub external_antonyms: Option<PathBuf>,
    pub babelnet_synonyms: Option<PathBuf>,
    pub babelnet_antonyms: Option<PathBuf>,
    pub datasets: Vec<DatasetSpec>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub header: HeaderPolicy,
    pub write_header: bool,
    pub setting: Setting,
    pub constraints: ConstraintSource,
    pub strip_prefix: bool,
    pub ar: ArConfig,
    pub postspec: PostSpecConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            header: HeaderPolicy::Auto,
            write_header: false,
            setting: Setting::Disjoint,
            constraints: ConstraintSource::External,
            strip_prefix: false,
            ar: ArConfig::default(),
            postspec: PostSpecConfig::default(),
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Validation(format!("`{key}`: cannot parse `{value}`")))
}

fn finite(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Validation(format!("`{key}` must be finite")))
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(n, _)| *n == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::Validation(format!("`{key}`: `{value}` is not one of {}", names.join(", ")))
        })
}

fn widths(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|w| parse(key, w.trim())).collect()
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".into(), T::to_string)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(String::new, |p| p.display().to_string())
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// `p` relative to `base`, made absolute so the rendered configuration
/// works from any directory.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    let joined = base.join(p);
    std::path::absolute(&joined).unwrap_or(joined)
}

const NEGATIVES: [(&str, NegativeRule); 2] = [
    ("most_similar", NegativeRule::MostSimilar),
    ("least_similar", NegativeRule::LeastSimilar),
];

fn negative_name(r: NegativeRule) -> &'static str {
    match r {
        NegativeRule::MostSimilar => "most_similar",
        NegativeRule::LeastSimilar => "least_similar",
    }
}

/// Swaps the optimizer family, keeping the current learning rate.
fn with_family(key: &str, current: OptimizerKind, name: &str) -> Result<OptimizerKind> {
    if name == current.name() {
        return Ok(current);
    }
    let lr = current.learning_rate();
    match name {
        "sgd" => Ok(OptimizerKind::sgd(lr)),
        "rmsprop" => Ok(OptimizerKind::rmsprop(lr)),
        "adam" => Ok(OptimizerKind::adam(lr)),
        _ => Err(Error::Validation(format!("`{key}`: unknown optimizer `{name}` (sgd, rmsprop, adam)"))),
    }
}

fn with_lr(kind: OptimizerKind, lr: f64) -> OptimizerKind {
    match kind {
        OptimizerKind::Sgd { .. } => OptimizerKind::Sgd { lr },
        OptimizerKind::RmsProp { decay, eps, .. } => OptimizerKind::RmsProp { lr, decay, eps },
        OptimizerKind::Adam { beta1, beta2, eps, .. } => OptimizerKind::Adam { lr, beta1, beta2, eps },
    }
}

impl PipelineConfig {
    /// Seed used by Attract-Repel.
    pub fn ar_seed(&self) -> u64 {
        self.seed
    }

    /// Seed used by post-specialization training.
    pub fn postspec_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    /// Stage configurations with the derived seeds filled in.
    pub fn ar_config(&self) -> ArConfig {
        ArConfig {
            seed: self.ar_seed(),
            ..self.ar.clone()
        }
    }

    pub fn postspec_config(&self) -> PostSpecConfig {
        PostSpecConfig {
            seed: self.postspec_seed(),
            ..self.postspec.clone()
        }
    }

    /// Sets one key. Relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let value = value.trim();
        let path = || -> Option<PathBuf> {
            (!value.is_empty()).then(|| resolve(base, Path::new(value)))
        };
        let ps = &mut self.postspec;
        match key {
            "paths.vectors" => self.paths.vectors = path(),
            "paths.external_synonyms" => self.paths.external_synonyms = path(),
            "paths.external_antonyms" => self.paths.external_antonyms = path(),
            "paths.babelnet_synonyms" => self.paths.babelnet_synonyms = path(),
            "paths.babelnet_antonyms" => self.paths.babelnet_antonyms = path(),
            "paths.output_dir" => self.paths.output_dir = path(),
            "paths.datasets" => {
                self.paths.datasets = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        let mut d: DatasetSpec = s.parse().map_err(|e: String| Error::Validation(e))?;
                        d.path = resolve(base, &d.path);
                        Ok(d)
                    })
                    .collect::<Result<_>>()?
            }
            "paths.header" => self.header = value.parse().map_err(Error::Validation)?,
            "run.write_header" => self.write_header = parse(key, value)?,
            "run.seed" => self.seed = parse(key, value)?,
            "protocol.setting" => {
                self.setting = choice(key, value, &[("disjoint", Setting::Disjoint), ("overlap", Setting::Overlap)])?
            }
            "protocol.constraints" => {
                self.constraints = choice(
                    key,
                    value,
                    &[
                        ("external", ConstraintSource::External),
                        ("babelnet", ConstraintSource::Babelnet),
                        ("external_babelnet", ConstraintSource::ExternalBabelnet),
                    ],
                )?
            }
            "protocol.strip_prefix" => self.strip_prefix = parse(key, value)?,
            "ar.delta_att" => self.ar.delta_att = finite(key, value)?,
            "ar.delta_rep" => self.ar.delta_rep = finite(key, value)?,
            "ar.lambda_reg" => self.ar.lambda_reg = finite(key, value)?,
            "ar.k1" => self.ar.k1 = parse(key, value)?,
            "ar.k2" => self.ar.k2 = parse(key, value)?,
            "ar.epochs" => self.ar.epochs = parse(key, value)?,
            "ar.optimizer" => self.ar.rule = with_family(key, self.ar.rule, value)?,
            "ar.lr" => self.ar.rule = with_lr(self.ar.rule, finite(key, value)?),
            "ar.normalize_first" => self.ar.normalize_first = parse(key, value)?,
            "ar.attract_negatives" => self.ar.attract_negatives = choice(key, value, &NEGATIVES)?,
            "ar.repel_negatives" => self.ar.repel_negatives = choice(key, value, &NEGATIVES)?,
            "postspec.mode" => {
                ps.mode = choice(
                    key,
                    value,
                    &[
                        ("gan", AdversarialMode::Gan),
                        ("wgan", AdversarialMode::Wgan),
                        ("wgan_gp", AdversarialMode::WganGp),
                    ],
                )?
            }
            "postspec.alpha" => ps.alpha = finite(key, value)?,
            "postspec.lambda_gp" => ps.lambda_gp = finite(key, value)?,
            "postspec.clip_c" => ps.clip_c = finite(key, value)?,
            "postspec.n_critic" => ps.n_critic = parse(key, value)?,
            "postspec.batch_size" => ps.batch_size = parse(key, value)?,
            "postspec.real_batch_size" => ps.real_batch_size = optional(key, value)?,
            "postspec.epochs" => ps.epochs = parse(key, value)?,
            "postspec.max_generator_steps" => ps.max_generator_steps = optional(key, value)?,
            "postspec.generator_hidden" => ps.generator_hidden = widths(key, value)?,
            "postspec.critic_hidden" => ps.critic_hidden = widths(key, value)?,
            "postspec.generator_activation" => {
                ps.generator_activation = parse_activation(value).map_err(Error::Validation)?
            }
            "postspec.critic_activation" => ps.critic_activation = parse_activation(value).map_err(Error::Validation)?,
            "postspec.generator_optimizer" => {
                ps.generator_optimizer = match value {
                    "default" => None,
                    name => Some(with_family(key, ps.generator_optimizer(), name)?),
                }
            }
            "postspec.generator_lr" => ps.generator_optimizer = Some(with_lr(ps.generator_optimizer(), finite(key, value)?)),
            "postspec.critic_optimizer" => {
                ps.critic_optimizer = match value {
                    "default" => None,
                    name => Some(with_family(key, ps.critic_optimizer(), name)?),
                }
            }
            "postspec.critic_lr" => ps.critic_optimizer = Some(with_lr(ps.critic_optimizer(), finite(key, value)?)),
            "postspec.map_policy" => {
                ps.map_policy = choice(
                    key,
                    value,
                    &[("unseen_only", MapPolicy::UnseenOnly), ("all_words", MapPolicy::AllWords)],
                )?
            }
            _ => return Err(Error::Validation(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line; relative paths
    /// resolve against the working directory.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override `{assignment}` must be key=value")))?;
        self.set(k.trim(), v, Path::new(""))
    }

    pub fn parse_str(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            cfg.set(k.trim(), v, base).map_err(|e| match e {
                Error::Validation(msg) => Error::parse(origin, i + 1, msg),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse_str(&text, base, path)
    }

    /// Every setting as `(key, value)` in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.paths;
        let ar = &self.ar;
        let ps = &self.postspec;
        let gopt = ps.generator_optimizer();
        let copt = ps.critic_optimizer();
        vec![
            ("paths.vectors", show_path(&p.vectors)),
            ("paths.external_synonyms", show_path(&p.external_synonyms)),
            ("paths.external_antonyms", show_path(&p.external_antonyms)),
            ("paths.babelnet_synonyms", show_path(&p.babelnet_synonyms)),
            ("paths.babelnet_antonyms", show_path(&p.babelnet_antonyms)),
            ("paths.datasets", join(&p.datasets)),
            ("paths.output_dir", show_path(&p.output_dir)),
            (
                "paths.header",
                match self.header {
                    HeaderPolicy::Auto => "auto",
                    HeaderPolicy::Require => "require",
                    HeaderPolicy::Forbid => "forbid",
                }
                .into(),
            ),
            ("run.write_header", self.write_header.to_string()),
            ("run.seed", self.seed.to_string()),
            (
                "protocol.setting",
                match self.setting {
                    Setting::Disjoint => "disjoint",
                    Setting::Overlap => "overlap",
                }
                .into(),
            ),
            ("protocol.constraints", self.constraints.name().into()),
            ("protocol.strip_prefix", self.strip_prefix.to_string()),
            ("ar.delta_att", ar.delta_att.to_string()),
            ("ar.delta_rep", ar.delta_rep.to_string()),
            ("ar.lambda_reg", ar.lambda_reg.to_string()),
            ("ar.k1", ar.k1.to_string()),
            ("ar.k2", ar.k2.to_string()),
            ("ar.epochs", ar.epochs.to_string()),
            ("ar.optimizer", ar.rule.name().into()),
            ("ar.lr", ar.rule.learning_rate().to_string()),
            ("ar.normalize_first", ar.normalize_first.to_string()),
            ("ar.attract_negatives", negative_name(ar.attract_negatives).into()),
            ("ar.repel_negatives", negative_name(ar.repel_negatives).into()),
            ("postspec.mode", ps.mode.name().into()),
            ("postspec.alpha", ps.alpha.to_string()),
            ("postspec.lambda_gp", ps.lambda_gp.to_string()),
            ("postspec.clip_c", ps.clip_c.to_string()),
            ("postspec.n_critic", ps.n_critic.to_string()),
            ("postspec.batch_size", ps.batch_size.to_string()),
            ("postspec.real_batch_size", show_opt(&ps.real_batch_size)),
            ("postspec.epochs", ps.epochs.to_string()),
            ("postspec.max_generator_steps", show_opt(&ps.max_generator_steps)),
            ("postspec.generator_hidden", join(&ps.generator_hidden)),
            ("postspec.critic_hidden", join(&ps.critic_hidden)),
            ("postspec.generator_activation", activation_token(ps.generator_activation)),
            ("postspec.critic_activation", activation_token(ps.critic_activation)),
            ("postspec.generator_optimizer", gopt.name().into()),
            ("postspec.generator_lr", gopt.learning_rate().to_string()),
            ("postspec.critic_optimizer", copt.name().into()),
            ("postspec.critic_lr", copt.learning_rate().to_string()),
            (
                "postspec.map_policy",
                match ps.map_policy {
                    MapPolicy::UnseenOnly => "unseen_only",
                    MapPolicy::AllWords => "all_words",
                }
                .into(),
            ),
        ]
    }

    /// The effective configuration as config-file text.
    pub fn render(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The rendered settings without the output directory, so the same
    /// run written elsewhere reads, and hashes, the same.
    pub fn canonical(&self) -> String {
        self.entries()
            .into_iter()
            .filter(|(k, _)| *k != "paths.output_dir")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.ar_config().validate()?;
        self.postspec_config().validate()?;
        Ok(())
    }

    /// Checks that every input the pipeline needs is present on disk.
    pub fn validate_pipeline_inputs(&self) -> Result<()> {
        let p = &self.paths;
        let need = |name: &str, path: &Option<PathBuf>| -> Result<()> {
            match path {
                None => Err(Error::Validation(format!("`{name}` is not set"))),
                Some(path) if !path.is_file() => Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                )),
                Some(_) => Ok(()),
            }
        };
        need("paths.vectors", &p.vectors)?;
        if matches!(self.constraints, ConstraintSource::External | ConstraintSource::ExternalBabelnet) {
            need("paths.external_synonyms", &p.external_synonyms)?;
            if p.external_antonyms.is_some() {
                need("paths.external_antonyms", &p.external_antonyms)?;
            }
        }
        if matches!(self.constraints, ConstraintSource::Babelnet | ConstraintSource::ExternalBabelnet) {
            need("paths.babelnet_synonyms", &p.babelnet_synonyms)?;
            if p.babelnet_antonyms.is_some() {
                need("paths.babelnet_antonyms", &p.babelnet_antonyms)?;
            }
        }
        for d in &p.datasets {
            need("paths.datasets", &Some(d.path.clone()))?;
        }
        if p.output_dir.is_none() {
            return Err(Error::Validation("`paths.output_dir` is not set".into()));
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_text(text: &str) -> Result<PipelineConfig> {
        PipelineConfig::parse_str(text, Path::new("/cfg"), Path::new("run.cfg"))
    }

    #[test]
    fn defaults_and_seeds() {
        let c = parse_text("run.seed = 41 # trailing comment\n").unwrap();
        assert_eq!(c.ar_config().seed, 41);
        assert_eq!(c.postspec_config().seed, 42);
        assert_eq!(c.ar.delta_att, 0.6);
        assert_eq!(c.postspec.mode, AdversarialMode::WganGp);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let c = parse_text("paths.vectors = v.txt\npaths.datasets = plain3col:ws.txt, simlex_tsv:/abs/s.tsv").unwrap();
        assert_eq!(c.paths.vectors, Some(PathBuf::from("/cfg/v.txt")));
        assert_eq!(c.paths.datasets[0].path, PathBuf::from("/cfg/ws.txt"));
        assert_eq!(c.paths.datasets[1].path, PathBuf::from("/abs/s.tsv"));
    }

    #[test]
    fn bad_lines_are_reported() {
        assert!(matches!(parse_text("ar.k1 = 5\nnonsense\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            parse_text("ar.bogus = 1"),
            Err(Error::Parse { line: 1, ref msg, .. }) if msg.contains("unknown config key")
        ));
        assert!(parse_text("postspec.mode = lsgan").is_err());
        assert!(parse_text("ar.lr = inf").is_err());
    }

    #[test]
    fn rendered_config_parses_back() {
        let mut c = parse_text(
            "postspec.mode = wgan\npostspec.critic_lr = 0.0002\npostspec.generator_hidden = 64\nar.optimizer = adam\nar.lr = 0.01\npostspec.max_generator_steps = 500\n",
        )
        .unwrap();
        c.apply_override("postspec.generator_activation=tanh").unwrap();
        let back = PipelineConfig::parse_str(&c.render(), Path::new(""), Path::new("x")).unwrap();
        assert_eq!(back.render(), c.render());
        assert_eq!(back.postspec.critic_optimizer(), OptimizerKind::rmsprop(2e-4));
        assert_eq!(back.ar.rule, OptimizerKind::adam(0.01));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = parse_text("paths.output_dir = a").unwrap();
        let b = parse_text("paths.output_dir = b").unwrap();
        let c = parse_text("paths.output_dir = a\nrun.seed = 1").unwrap();
        assert_eq!(a.sha256(), b.sha256());
        assert_ne!(a.sha256(), c.sha256());
        assert_eq!(a.sha256().len(), 64);
    }

    #[test]
    fn overrides_win() {
        let mut c = parse_text("run.seed = 3").unwrap();
        c.apply_override("run.seed=9").unwrap();
        assert_eq!(c.seed, 9);
        assert!(matches!(c.apply_override("run.seed"), Err(Error::Usage(_))));
    }
}
