use std::sync::Arc;

use decisionflow_core::{
    render_objective, runner_up, solve_symbolic, sparsify_weights, AttributeTable,
    DecisionOutcome, DecisionProblem, FilterPolicy, Grid, Stage, Step, SymbolicSolution, Trace,
    TraceEvent, WeightMatrix,
};
use decisionflow_gateway::{Completion, CompletionRequest, Gateway, GatewayError};
use decisionflow_stages::{
    ground_relevance, parse_attribute_table, parse_decision, parse_extraction, parse_rationale,
    parse_weight, parse_weight_batch, render_stage_prompt, DecisionSummary, PromptContext,
    StageOutput, TemplateId, TemplateSet, WeightJudgement,
};
use serde::{Deserialize, Serialize};

use crate::config::{FilterTarget, Mode, PipelineConfig};
use crate::error::{RunError, RunErrorKind};
use crate::vote::majority_vote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Keep every weighed cell.
    NoFilter,
    /// Replace the weighed matrix with all ones.
    NoScoring,
    Both,
}

impl Ablation {
    fn no_filter(self) -> bool {
        matches!(self, Self::NoFilter | Self::Both)
    }

    fn no_scoring(self) -> bool {
        matches!(self, Self::NoScoring | Self::Both)
    }
}

/// Steps 1 to 3 of a run with nothing filtered: the verbal table, the raw
/// weights and scores for every weighed cell. Any filter policy can then be
/// applied offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub table: AttributeTable,
    pub weights: WeightMatrix,
    pub relevance: Grid,
    pub trace: Trace,
}

impl Artifacts {
    pub fn solve(
        &self,
        policy: &FilterPolicy,
        problem: &DecisionProblem,
    ) -> Result<SymbolicSolution, decisionflow_core::KernelError> {
        solve_symbolic(&self.relevance, &self.weights, policy, problem.constraints())
    }
}

struct Failure {
    stage: Option<Stage>,
    kind: RunErrorKind,
}

type StepResult<T> = Result<T, Failure>;

trait At<T> {
    fn at(self, stage: Stage) -> StepResult<T>;
}

impl<T, E: Into<RunErrorKind>> At<T> for Result<T, E> {
    fn at(self, stage: Stage) -> StepResult<T> {
        self.map_err(|e| Failure {
            stage: Some(stage),
            kind: e.into(),
        })
    }
}

#[derive(Clone, Copy)]
struct Variant {
    policy_none: bool,
    no_scoring: bool,
    rationale: bool,
}

/// Runs decision problems against a gateway. Shareable across threads.
pub struct Pipeline {
    gateway: Arc<Gateway>,
    templates: TemplateSet,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        gateway: Arc<Gateway>,
        templates: TemplateSet,
        config: PipelineConfig,
    ) -> Result<Self, String> {
        config.validate()?;
        Ok(Self {
            gateway,
            templates,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Runs `problem` in the configured mode.
    pub fn run(&self, problem: &DecisionProblem, repeat: u32) -> Result<DecisionOutcome, RunError> {
        match self.config.mode {
            Mode::Decisionflow => self.run_decisionflow(problem, repeat),
            m @ (Mode::ZeroShot | Mode::Cot | Mode::CotWithTools | Mode::SelfConsistency) => {
                self.run_baseline(m, problem, repeat)
            }
            Mode::Joint => self.run_joint(problem, repeat),
            Mode::AblateNoFilter => self.run_ablation(problem, Ablation::NoFilter, repeat),
            Mode::AblateNoScoring => self.run_ablation(problem, Ablation::NoScoring, repeat),
            Mode::AblateNoBoth => self.run_ablation(problem, Ablation::Both, repeat),
        }
    }

    pub fn run_decisionflow(
        &self,
        problem: &DecisionProblem,
        repeat: u32,
    ) -> Result<DecisionOutcome, RunError> {
        let variant = Variant {
            policy_none: false,
            no_scoring: false,
            rationale: true,
        };
        self.finish(Run::new(self, problem, repeat), |run| run.structured(variant))
    }

    pub fn run_ablation(
        &self,
        problem: &DecisionProblem,
        which: Ablation,
        repeat: u32,
    ) -> Result<DecisionOutcome, RunError> {
        let variant = Variant {
            policy_none: which.no_filter(),
            no_scoring: which.no_scoring(),
            rationale: true,
        };
        self.finish(Run::new(self, problem, repeat), |run| run.structured(variant))
    }

    /// `strategy` is one of zero_shot, cot, cot_with_tools, self_consistency.
    pub fn run_baseline(
        &self,
        strategy: Mode,
        problem: &DecisionProblem,
        repeat: u32,
    ) -> Result<DecisionOutcome, RunError> {
        let run = Run::new(self, problem, repeat);
        match strategy {
            Mode::ZeroShot => self.finish(run, |r| r.single(TemplateId::ZeroShot)),
            Mode::Cot => self.finish(run, |r| r.single(TemplateId::Cot)),
            Mode::SelfConsistency => self.finish(run, Run::self_consistency),
            Mode::CotWithTools => {
                let variant = Variant {
                    policy_none: false,
                    no_scoring: false,
                    rationale: false,
                };
                self.finish(run, |r| r.structured(variant))
            }
            other => panic!("{other} is not a baseline strategy"),
        }
    }

    pub fn run_joint(&self, problem: &DecisionProblem, repeat: u32) -> Result<DecisionOutcome, RunError> {
        self.finish(Run::new(self, problem, repeat), |r| r.single(TemplateId::Joint))
    }

    /// Steps 1 to 3 with every weighed cell grounded, for offline filter sweeps.
    pub fn collect_artifacts(
        &self,
        problem: &DecisionProblem,
        repeat: u32,
    ) -> Result<Artifacts, RunError> {
        let mut run = Run::new(self, problem, repeat);
        match run.steps_one_to_three(Variant {
            policy_none: true,
            no_scoring: false,
            rationale: false,
        }) {
            Ok(s) => Ok(Artifacts {
                table: s.table,
                weights: s.weights,
                relevance: s.relevance,
                trace: run.trace,
            }),
            Err(f) => Err(RunError {
                stage: f.stage,
                kind: f.kind,
                trace: run.trace,
            }),
        }
    }

    fn finish<'a>(
        &self,
        mut run: Run<'a>,
        body: impl FnOnce(&mut Run<'a>) -> StepResult<Decided>,
    ) -> Result<DecisionOutcome, RunError> {
        match body(&mut run) {
            Ok(d) => Ok(DecisionOutcome {
                answer: d.answer,
                utilities: d.utilities,
                rationale: d.rationale,
                degenerate: d.degenerate,
                trace: run.trace,
            }),
            Err(f) => Err(RunError {
                stage: f.stage,
                kind: f.kind,
                trace: run.trace,
            }),
        }
    }
}

struct Decided {
    answer: usize,
    utilities: Vec<f64>,
    rationale: String,
    degenerate: bool,
}

struct Grounded {
    table: AttributeTable,
    weights: WeightMatrix,
    sparsified: WeightMatrix,
    relevance: Grid,
}

struct Run<'a> {
    pipe: &'a Pipeline,
    problem: &'a DecisionProblem,
    repeat: u32,
    trace: Trace,
}

impl<'a> Run<'a> {
    fn new(pipe: &'a Pipeline, problem: &'a DecisionProblem, repeat: u32) -> Self {
        Self {
            pipe,
            problem,
            repeat,
            trace: Trace::new(),
        }
    }

    fn config(&self) -> &'a PipelineConfig {
        &self.pipe.config
    }

    fn model_for(&self, stage: Stage) -> &'a str {
        match stage {
            Stage::ExtractInfo | Stage::SummarizeAttributes => &self.config().info_model,
            _ => &self.config().reasoning_model,
        }
    }

    fn render(&self, id: TemplateId, ctx: &PromptContext<'_>) -> StepResult<String> {
        render_stage_prompt(&self.pipe.templates, id, ctx).at(id.stage())
    }

    fn request(&self, stage: Stage, prompt: String, temperature: f64, attempt: u32) -> CompletionRequest {
        CompletionRequest::new(stage, self.model_for(stage), prompt)
            .temperature(temperature)
            .max_tokens(self.config().max_tokens)
            .attempt(attempt)
    }

    fn record(&mut self, req: &CompletionRequest, c: &Completion) {
        self.trace.push(TraceEvent::Completion {
            step: req.stage.step(),
            stage: req.stage,
            model: req.model.clone(),
            temperature: req.temperature,
            attempt: req.attempt,
            digest: c.digest.to_string(),
            prompt: req.prompt.clone(),
            text: c.text.clone(),
            usage: c.usage,
            latency_secs: c.latency_secs,
            cache_hit: c.cache_hit,
            transport_attempts: c.transport_attempts,
        });
    }

    fn parsed<T: Serialize>(&mut self, stage: Stage, out: &StageOutput<T>) {
        self.trace.push(TraceEvent::Parsed {
            step: stage.step(),
            stage,
            payload: serde_json::to_value(&out.parsed).expect("payloads serialize"),
            repairs: out.repairs.clone(),
            warnings: out.warnings.clone(),
        });
    }

    /// One deterministic call, recorded in the trace.
    fn call(&mut self, id: TemplateId, prompt: String) -> StepResult<String> {
        let stage = id.stage();
        let req = self.request(stage, prompt, self.config().temperature_deterministic, self.repeat);
        let c = self.pipe.gateway.complete(&req).at(stage)?;
        self.record(&req, &c);
        Ok(c.text)
    }

    fn single(&mut self, id: TemplateId) -> StepResult<Decided> {
        let prompt = self.render(id, &PromptContext::new(self.problem))?;
        let text = self.call(id, prompt)?;
        let out = parse_decision(&text, self.problem.n(), self.problem.indexing()).at(id.stage())?;
        self.parsed(id.stage(), &out);
        Ok(Decided {
            answer: out.parsed.answer,
            utilities: Vec::new(),
            rationale: out.parsed.reasoning,
            degenerate: false,
        })
    }

    fn self_consistency(&mut self) -> StepResult<Decided> {
        let stage = Stage::ZeroShot;
        let k = self.config().self_consistency_k;
        let prompt = self.render(TemplateId::ZeroShot, &PromptContext::new(self.problem))?;
        let mut votes = Vec::with_capacity(k as usize);
        for s in 0..k {
            let attempt = self.repeat * k + s;
            let req = self.request(stage, prompt.clone(), self.config().temperature_sampling, attempt);
            let completion = match self.pipe.gateway.complete(&req) {
                Ok(c) => c,
                Err(e @ (GatewayError::Transport { .. } | GatewayError::Backend { .. })) => {
                    self.trace.note(None, format!("sample {s} abstained: {e}"));
                    votes.push(None);
                    continue;
                }
                Err(e) => return Err(e).at(stage),
            };
            self.record(&req, &completion);
            match parse_decision(&completion.text, self.problem.n(), self.problem.indexing()) {
                Ok(out) => {
                    self.parsed(stage, &out);
                    votes.push(Some(out.parsed.answer));
                }
                Err(e) => {
                    self.trace.note(None, format!("sample {s} abstained: {e}"));
                    votes.push(None);
                }
            }
        }
        let answer = majority_vote(&votes).ok_or(Failure {
            stage: Some(stage),
            kind: RunErrorKind::AllAbstained,
        })?;
        self.trace.note(None, format!("votes {votes:?} -> {answer}"));
        Ok(Decided {
            answer,
            utilities: Vec::new(),
            rationale: String::new(),
            degenerate: false,
        })
    }

    fn weigh(&mut self, table: &AttributeTable) -> StepResult<WeightMatrix> {
        let (n, m) = (table.n(), table.m());
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| table.cell(i, j).is_mentioned())
            .collect();
        let mut grid = Grid::zeros(n, m);
        if pairs.is_empty() {
            return Ok(WeightMatrix::new(grid).expect("zeros are valid weights"));
        }
        let judgements: Vec<WeightJudgement> = if self.config().batch_weighing {
            let prompt = self.render(TemplateId::WeighBatch, &PromptContext::new(self.problem).table(table).pairs(&pairs))?;
            let text = self.call(TemplateId::WeighBatch, prompt)?;
            let out = parse_weight_batch(&text, self.problem.actions(), table, &pairs).at(Stage::Weigh)?;
            self.parsed(Stage::Weigh, &out);
            out.parsed
        } else {
            let mut requests = Vec::with_capacity(pairs.len());
            for &(i, j) in &pairs {
                let prompt = self.render(TemplateId::Weigh, &PromptContext::new(self.problem).table(table).cell(i, j))?;
                requests.push(self.request(Stage::Weigh, prompt, self.config().temperature_deterministic, self.repeat));
            }
            let completions = self.complete_all(&requests);
            let mut out = Vec::with_capacity(pairs.len());
            for (req, result) in requests.iter().zip(completions) {
                let c = result.at(Stage::Weigh)?;
                self.record(req, &c);
                let parsed = parse_weight(&c.text).at(Stage::Weigh)?;
                self.parsed(Stage::Weigh, &parsed);
                out.push(parsed.parsed);
            }
            out
        };
        for (&(i, j), judgement) in pairs.iter().zip(&judgements) {
            grid.set(i, j, judgement.weight);
        }
        WeightMatrix::new(grid).at(Stage::Weigh)
    }

    /// Issues `requests` with at most `max_concurrency` in flight; results
    /// come back in request order.
    fn complete_all(&self, requests: &[CompletionRequest]) -> Vec<Result<Completion, GatewayError>> {
        let gateway = &self.pipe.gateway;
        let width = self.config().max_concurrency.max(1);
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(width) {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|req| scope.spawn(move || gateway.complete(req)))
                    .collect();
                for h in handles {
                    out.push(h.join().expect("weighing thread panicked"));
                }
            });
        }
        out
    }

    fn steps_one_to_three(&mut self, variant: Variant) -> StepResult<Grounded> {
        let problem = self.problem;

        let prompt = self.render(TemplateId::ExtractInfo, &PromptContext::new(problem))?;
        let text = self.call(TemplateId::ExtractInfo, prompt)?;
        let extraction = parse_extraction(&text, problem.actions()).at(Stage::ExtractInfo)?;
        self.parsed(Stage::ExtractInfo, &extraction);
        let statements = extraction.parsed.statements;

        let prompt = self.render(
            TemplateId::SummarizeAttributes,
            &PromptContext::new(problem).information(&statements),
        )?;
        let text = self.call(TemplateId::SummarizeAttributes, prompt)?;
        let summary = parse_attribute_table(&text, problem.actions()).at(Stage::SummarizeAttributes)?;
        self.parsed(Stage::SummarizeAttributes, &summary);
        let table = summary.parsed;
        let (n, m) = (table.n(), table.m());

        let weights = if variant.no_scoring {
            self.trace.note(Some(Step::S2), "weighing skipped: all-ones weights");
            WeightMatrix::ones(n, m)
        } else {
            self.weigh(&table)?
        };
        self.trace.matrix(Some(Step::S2), "w", weights.grid());

        let policy = self.policy(variant);
        let sparsified = match self.config().filter_target {
            FilterTarget::Weights => sparsify_weights(&weights, &policy),
            FilterTarget::Relevance => weights.clone(),
        };
        self.trace.matrix(Some(Step::S2), "w_prime", sparsified.grid());

        let step3 = Some(Step::S3);
        let objective = render_objective(&sparsified, table.attributes());
        self.trace.note(step3, format!("objective: {}", objective.term));
        let needs_scores = sparsified
            .grid()
            .cells()
            .any(|(i, j, w)| w != 0.0 && table.cell(i, j).is_mentioned());
        let relevance = if needs_scores {
            let prompt = self.render(
                TemplateId::GroundAndDecide,
                &PromptContext::new(problem).table(&table).weights(&sparsified),
            )?;
            let text = self.call(TemplateId::GroundAndDecide, prompt)?;
            let grounding =
                ground_relevance(&text, problem.actions(), &table, &sparsified).at(Stage::GroundAndDecide)?;
            self.parsed(Stage::GroundAndDecide, &grounding);
            grounding.parsed.scores
        } else {
            self.trace.note(step3, "grounding skipped: no surviving mentioned cell");
            Grid::zeros(n, m)
        };
        self.trace.matrix(step3, "r", &relevance);
        Ok(Grounded {
            table,
            weights,
            sparsified,
            relevance,
        })
    }

    fn policy(&self, variant: Variant) -> FilterPolicy {
        if variant.policy_none {
            FilterPolicy::None
        } else {
            self.config().filter_policy
        }
    }

    fn structured(&mut self, variant: Variant) -> StepResult<Decided> {
        let grounded = self.steps_one_to_three(variant)?;
        let step4 = Some(Step::S4);
        let (r, w) = match self.config().filter_target {
            FilterTarget::Weights => (grounded.relevance.clone(), grounded.sparsified.clone()),
            FilterTarget::Relevance => {
                let policy = self.policy(variant);
                let scores = WeightMatrix::new(grounded.relevance.clone())
                    .expect("grounded scores lie in [0, 1]");
                (sparsify_weights(&scores, &policy).into_grid(), grounded.weights.clone())
            }
        };
        let solution = solve_symbolic(&r, &w, &FilterPolicy::None, self.problem.constraints())
            .map_err(|e| Failure {
                stage: None,
                kind: e.into(),
            })?;
        self.trace.matrix(step4, "r_prime", solution.filtered.grid());
        self.trace.note(
            step4,
            format!("utilities {:?}; answer {}", solution.utilities, solution.answer),
        );
        if solution.degenerate {
            self.trace.note(step4, "degenerate: every filtered relevance is zero");
        }
        let rationale = if variant.rationale {
            self.rationale(&grounded.table, &solution)?
        } else {
            String::new()
        };
        Ok(Decided {
            answer: solution.answer,
            utilities: solution.utilities,
            rationale,
            degenerate: solution.degenerate,
        })
    }

    fn rationale(&mut self, table: &AttributeTable, solution: &SymbolicSolution) -> StepResult<String> {
        let answer = solution.answer;
        let mut influential: Vec<(String, f64)> = (0..table.m())
            .map(|j| (table.attributes()[j].clone(), solution.filtered.grid().get(answer, j)))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        influential.sort_by(|a, b| b.1.total_cmp(&a.1));
        let summary = DecisionSummary {
            answer,
            utilities: solution.utilities.clone(),
            runner_up: runner_up(&solution.utilities, &solution.feasible, answer),
            influential,
        };
        let prompt = self.render(TemplateId::Rationale, &PromptContext::new(self.problem).decision(&summary))?;
        let text = self.call(TemplateId::Rationale, prompt)?;
        let out = parse_rationale(&text).at(Stage::Rationale)?;
        self.parsed(Stage::Rationale, &out);
        Ok(out.parsed)
    }
}
