use std::path::{Path, PathBuf};

use decisionflow_core::FilterPolicy;
use decisionflow_pipeline::{DatasetKind, Mode, PipelineConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptModeArg {
    /// Call the live backend and persist every new transcript.
    #[serde(alias = "record")]
    LiveRecord,
    /// Serve recorded transcripts only; a miss is fatal.
    Replay,
}

impl std::str::FromStr for TranscriptModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "live_record" | "record" => Ok(Self::LiveRecord),
            "replay" => Ok(Self::Replay),
            _ => Err(format!("unknown transcript mode `{s}` (expected live_record or replay)")),
        }
    }
}

fn default_repeats() -> u32 {
    1
}

/// Experiment configuration as stored on disk. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub dataset: PathBuf,
    pub dataset_kind: DatasetKind,
    pub transcript_mode: TranscriptModeArg,
    pub transcript_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub dataset_kind: Option<DatasetKind>,
    pub mode: Option<Mode>,
    pub transcript_mode: Option<TranscriptModeArg>,
    pub transcript_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub repeats: Option<u32>,
    pub seed: Option<u64>,
    pub info_model: Option<String>,
    pub reasoning_model: Option<String>,
    pub filter_policy: Option<FilterPolicy>,
    pub max_concurrency: Option<usize>,
}

impl CliConfig {
    /// Reads `path`, resolves relative paths, applies `overrides` (whose
    /// paths are taken relative to the working directory) and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: CliConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_against(base);
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_against(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dataset);
        join(&mut self.transcript_dir);
        if let Some(p) = self.output_dir.as_mut() {
            join(p);
        }
        if let Some(p) = self.templates_dir.as_mut() {
            join(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(self.dataset, o.dataset);
        set!(self.dataset_kind, o.dataset_kind);
        set!(self.pipeline.mode, o.mode);
        set!(self.transcript_mode, o.transcript_mode);
        set!(self.transcript_dir, o.transcript_dir);
        set!(self.repeats, o.repeats);
        set!(self.seed, o.seed);
        set!(self.pipeline.info_model, o.info_model);
        set!(self.pipeline.reasoning_model, o.reasoning_model);
        set!(self.pipeline.filter_policy, o.filter_policy);
        set!(self.pipeline.max_concurrency, o.max_concurrency);
        if o.output_dir.is_some() {
            self.output_dir = o.output_dir.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        if self.transcript_mode == TranscriptModeArg::Replay && !self.transcript_dir.is_dir() {
            return Err(CliError::Config(format!(
                "replay needs an existing transcript directory, {} is missing",
                self.transcript_dir.display()
            )));
        }
        self.pipeline.validate().map_err(CliError::Config)
    }

    /// SHA-256 over the canonical JSON of the resolved config, leaving out
    /// the output directory so relocated runs keep their digest.
    pub fn digest(&self) -> String {
        let experiment = CliConfig {
            output_dir: None,
            ..self.clone()
        };
        let value = serde_json::to_value(&experiment).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

/// Parses `0,0.1,0.3` into threshold policies.
pub fn parse_epsilons(list: &str) -> Result<Vec<FilterPolicy>, String> {
    let items = split_list(list)?;
    items
        .iter()
        .map(|s| {
            let eps: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
            FilterPolicy::threshold(eps).map_err(|e| e.to_string())
        })
        .collect()
}

/// Parses `1,2,3,none` into top-k policies; `none` disables filtering.
pub fn parse_top_k(list: &str) -> Result<Vec<FilterPolicy>, String> {
    let items = split_list(list)?;
    items
        .iter()
        .map(|s| {
            if s.eq_ignore_ascii_case("none") {
                return Ok(FilterPolicy::None);
            }
            let k: usize = s.parse().map_err(|_| format!("`{s}` is not a count or `none`"))?;
            FilterPolicy::top_k(k).map_err(|e| e.to_string())
        })
        .collect()
}

fn split_list(list: &str) -> Result<Vec<&str>, String> {
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err("the sweep list is empty".into());
    }
    Ok(items)
}

/// Column label of a sweep setting.
pub fn policy_label(policy: &FilterPolicy) -> String {
    match policy {
        FilterPolicy::Threshold { epsilon } => format!("{epsilon}"),
        FilterPolicy::TopK { k } => format!("top{k}"),
        FilterPolicy::None => "none".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_lists() {
        assert_eq!(parse_epsilons("0, 0.1,0.3").unwrap().len(), 3);
        assert!(parse_epsilons("").is_err());
        assert!(parse_epsilons(" , ").is_err());
        assert!(parse_epsilons("-1").is_err());
        let k = parse_top_k("1,2,3,none").unwrap();
        assert_eq!(k.last(), Some(&FilterPolicy::None));
        assert!(parse_top_k("0").is_err());
        assert_eq!(policy_label(&k[0]), "top1");
        assert_eq!(policy_label(&FilterPolicy::Threshold { epsilon: 0.0 }), "0");
    }

    #[test]
    fn flags_win_over_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("corpus")).unwrap();
        let path = dir.path().join("exp.json");
        std::fs::write(
            &path,
            r#"{"dataset":"d.jsonl","dataset_kind":"mta","transcript_mode":"replay","transcript_dir":"corpus","repeats":2}"#,
        )
        .unwrap();
        let cfg = CliConfig::load(&path, &Overrides::default()).unwrap();
        assert_eq!(cfg.dataset, dir.path().join("d.jsonl"));
        assert_eq!(cfg.repeats, 2);
        let o = Overrides {
            repeats: Some(3),
            mode: Some(Mode::Cot),
            ..Overrides::default()
        };
        let cfg2 = CliConfig::load(&path, &o).unwrap();
        assert_eq!((cfg2.repeats, cfg2.pipeline.mode), (3, Mode::Cot));
        assert_ne!(cfg.digest(), cfg2.digest());
        assert_eq!(cfg.digest(), CliConfig::load(&path, &Overrides::default()).unwrap().digest());
        let moved = Overrides {
            output_dir: Some("elsewhere".into()),
            ..Overrides::default()
        };
        assert_eq!(cfg.digest(), CliConfig::load(&path, &moved).unwrap().digest());

        let bad = Overrides {
            repeats: Some(0),
            ..Overrides::default()
        };
        assert!(CliConfig::load(&path, &bad).is_err());
        let missing = Overrides {
            transcript_dir: Some(dir.path().join("nope")),
            ..Overrides::default()
        };
        assert!(CliConfig::load(&path, &missing).is_err());
    }
}
