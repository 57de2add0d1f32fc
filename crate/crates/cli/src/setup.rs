use std::sync::Arc;
use std::time::Duration;

use decisionflow_core::DecisionProblem;
use decisionflow_gateway::{Gateway, GatewayConfig, HttpBackend, TranscriptStore};
use decisionflow_pipeline::{Dataset, Pipeline};
use decisionflow_stages::TemplateSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{CliConfig, TranscriptModeArg};
use crate::error::CliError;

const HTTP_TIMEOUT: Duration = Duration::from_secs(120);

/// Everything a command needs before the first run.
pub struct Setup {
    pub dataset: Dataset,
    pub problems: Vec<DecisionProblem>,
    pub gateway: Arc<Gateway>,
    pub pipeline: Pipeline,
}

impl Setup {
    /// Loads the dataset, opens the transcript store and builds the pipeline.
    /// Every failure here happens before any run starts.
    pub fn new(cfg: &CliConfig, transcript_mode: TranscriptModeArg) -> Result<Self, CliError> {
        let dataset = Dataset::load(&cfg.dataset, cfg.dataset_kind)?;
        let problems = dataset.problems().map_err(|e| CliError::Problem(e.to_string()))?;
        let gateway_config = GatewayConfig {
            max_tokens_ceiling: cfg.pipeline.max_tokens,
            max_in_flight: cfg.pipeline.max_concurrency.max(1),
            ..GatewayConfig::default()
        };
        let gateway = match transcript_mode {
            TranscriptModeArg::Replay => {
                Gateway::replay(TranscriptStore::open_existing(&cfg.transcript_dir)?, gateway_config)
            }
            TranscriptModeArg::LiveRecord => {
                let backend = HttpBackend::from_env(None, HTTP_TIMEOUT).ok_or(CliError::NoBackend)?;
                Gateway::record(Arc::new(backend), TranscriptStore::open(&cfg.transcript_dir)?, gateway_config)
            }
        };
        let templates = match &cfg.templates_dir {
            Some(dir) => TemplateSet::with_overrides(dir)?,
            None => TemplateSet::builtin(),
        };
        let gateway = Arc::new(gateway);
        let pipeline =
            Pipeline::new(Arc::clone(&gateway), templates, cfg.pipeline.clone()).map_err(CliError::Config)?;
        Ok(Self {
            dataset,
            problems,
            gateway,
            pipeline,
        })
    }

    /// (problem index, repeat) pairs in a seed-determined execution order.
    /// Outputs are sorted afterwards, so the order only affects scheduling.
    pub fn jobs(&self, repeats: u32, seed: u64) -> Vec<(usize, u32)> {
        job_order(self.problems.len(), repeats, seed)
    }
}

pub fn job_order(problems: usize, repeats: u32, seed: u64) -> Vec<(usize, u32)> {
    let mut jobs: Vec<(usize, u32)> = (0..repeats).flat_map(|r| (0..problems).map(move |p| (p, r))).collect();
    jobs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    jobs
}
