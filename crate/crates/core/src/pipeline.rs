//! End-to-end orchestration shared by the command line and the test suites:
//! negation pairs, cached scoring, calibration, prediction and reporting.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, emit_report, AnalyticsError, EvaluationReport, PredictionRecord, ReportFormat};
use crate::datasets::{write_jsonl, DatasetError};
use crate::engine::{self, CalibrationReport, EngineError, GammaMode, Mode, NandConfig, PairScores};
use crate::instance::{Instance, NegationPair};
use crate::label::{LabelDistribution, WorldAssumption};
use crate::negator::{has_logical_negation, negate};
use crate::par::{self, Execution};
use crate::prompting::{distribution_from_scores, PromptError, PromptTemplate, Verbalizer};
use crate::scoring::{
    BiasedOracleConfig, CacheKey, OracleScorer, OracleTruth, RemoteConfig, RemoteScorer, ScoreCache, ScoreRequest,
    Scorer, ScorerError,
};

/// Requests sent to the scorer per call.
pub const SCORE_CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("scorer failed: {source}")]
    Scorer {
        source: ScorerError,
        /// Whatever finished before the failure.
        partial: Option<Box<EvalOutput>>,
    },
    #[error("score cache: {0}")]
    Cache(std::io::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl From<ScorerError> for PipelineError {
    fn from(source: ScorerError) -> Self {
        PipelineError::Scorer { source, partial: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<NegationPair>,
    /// `(instance id, reason)` for statements the negator rejected.
    pub unsupported: Vec<(String, String)>,
}

/// Negates every statement, keeping input order.
pub fn make_pairs(instances: &[Instance], exec: Execution) -> PairSet {
    let results = par::map(exec, instances, |inst| match negate(&inst.statement) {
        Ok(neg) => NegationPair::new(inst.clone(), neg).map_err(|e| e.to_string()),
        Err(e) => Err(e.to_string()),
    });
    let mut set = PairSet::default();
    for (inst, r) in instances.iter().zip(results) {
        match r {
            Ok(p) => set.pairs.push(p),
            Err(reason) => set.unsupported.push((inst.id.clone(), reason)),
        }
    }
    set
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScorerSpec {
    Oracle(BiasedOracleConfig),
    Remote(RemoteConfig),
}

/// One prompt to score: an instance, optionally with its statement replaced
/// by the negation.
#[derive(Debug, Clone, Copy)]
pub struct Job<'a> {
    pub instance: &'a Instance,
    pub negated: Option<&'a NegationPair>,
}

impl<'a> Job<'a> {
    pub fn original(instance: &'a Instance) -> Self {
        Job { instance, negated: None }
    }

    pub fn negation(pair: &'a NegationPair) -> Self {
        Job { instance: &pair.original, negated: Some(pair) }
    }

    pub fn request_id(&self, template_id: &str) -> String {
        let suffix = if self.negated.is_some() { "#neg" } else { "" };
        format!("{template_id}/{}{suffix}", self.instance.id)
    }

    fn statement(&self) -> &str {
        self.negated.map(|p| p.negated_statement.as_str()).unwrap_or(&self.instance.statement)
    }

    pub fn truth(&self) -> OracleTruth {
        let gold = self.negated.map(|p| p.counterpart_gold).unwrap_or(self.instance.gold);
        OracleTruth { gold, statement_has_negation: has_logical_negation(self.statement()) }
    }
}

/// Builds the configured scorer. The oracle is told the ground truth of
/// every job under every template.
pub fn build_scorer(
    spec: &ScorerSpec,
    verbalizer: &Verbalizer,
    templates: &[PromptTemplate],
    jobs: &[Job],
) -> Result<Box<dyn Scorer>, PipelineError> {
    match spec {
        ScorerSpec::Oracle(cfg) => {
            let mut oracle =
                OracleScorer::new(*cfg, verbalizer.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
            for t in templates {
                for j in jobs {
                    oracle.register(j.request_id(&t.id), j.truth());
                }
            }
            Ok(Box::new(oracle))
        }
        ScorerSpec::Remote(cfg) => Ok(Box::new(RemoteScorer::new(cfg.clone()))),
    }
}

/// Cache-aware scoring of jobs under one template.
pub struct Scoring<'a> {
    pub scorer: &'a dyn Scorer,
    pub cache: &'a ScoreCache,
    pub verbalizer: &'a Verbalizer,
    pub assumption: WorldAssumption,
    pub mask: &'a str,
    pub exec: Execution,
}

impl Scoring<'_> {
    fn key(&self, template: &PromptTemplate, job: &Job) -> CacheKey {
        CacheKey {
            scorer_id: self.scorer.scorer_id(),
            template_id: template.id.clone(),
            verbalizer_id: self.verbalizer.id.clone(),
            instance_id: job.instance.id.clone(),
            negated: job.negated.is_some(),
        }
    }

    pub fn score(&self, template: &PromptTemplate, jobs: &[Job]) -> Result<Vec<LabelDistribution>, PipelineError> {
        let candidates = self.verbalizer.candidates(self.assumption)?;
        let mut out: Vec<Option<LabelDistribution>> =
            jobs.iter().map(|j| self.cache.get(&self.key(template, j))).collect();
        let missing: Vec<usize> = (0..jobs.len()).filter(|&i| out[i].is_none()).collect();
        if missing.is_empty() {
            return Ok(out.into_iter().map(|d| d.expect("cached")).collect());
        }
        let mut requests = Vec::with_capacity(missing.len());
        for &i in &missing {
            let j = &jobs[i];
            requests.push(ScoreRequest {
                request_id: j.request_id(&template.id),
                prompt: template.render(j.instance, j.negated.map(|p| p.negated_statement.as_str()), self.mask)?,
                candidates: candidates.clone(),
            });
        }
        let chunks: Vec<(&[usize], &[ScoreRequest])> =
            missing.chunks(SCORE_CHUNK).zip(requests.chunks(SCORE_CHUNK)).collect();
        let scored = par::try_map(
            self.exec,
            &chunks,
            |(idx, reqs)| -> Result<Vec<(usize, LabelDistribution)>, PipelineError> {
                let maps = self.scorer.score_batch(reqs)?;
                let mut done = Vec::with_capacity(idx.len());
                for (&i, map) in idx.iter().zip(maps) {
                    let dist = distribution_from_scores(self.verbalizer, &map, self.assumption)
                        .map_err(|e| ScorerError::ProtocolViolation(e.to_string()))?;
                    self.cache.put(self.key(template, &jobs[i]), dist).map_err(PipelineError::Cache)?;
                    done.push((i, dist));
                }
                Ok(done)
            },
        )?;
        for (i, d) in scored.into_iter().flatten() {
            out[i] = Some(d);
        }
        Ok(out.into_iter().map(|d| d.expect("scored")).collect())
    }

    /// Scores both members of each pair.
    pub fn score_pairs(
        &self,
        template: &PromptTemplate,
        pairs: &[NegationPair],
    ) -> Result<Vec<PairScores>, PipelineError> {
        let jobs: Vec<Job> = pairs.iter().flat_map(|p| [Job::original(&p.original), Job::negation(p)]).collect();
        let dists = self.score(template, &jobs)?;
        Ok(dists.chunks(2).map(|d| PairScores::new(d[0], d[1])).collect())
    }

    pub fn calibrate(
        &self,
        template: &PromptTemplate,
        pairs: &[NegationPair],
        min_samples: usize,
    ) -> Result<CalibrationReport, PipelineError> {
        let neutral: Vec<NegationPair> =
            pairs.iter().filter(|p| p.original.gold == crate::label::Label::Neutral).cloned().collect();
        let scores = self.score_pairs(template, &neutral)?;
        let cal: Vec<(Instance, PairScores)> = neutral.into_iter().map(|p| p.original).zip(scores).collect();
        Ok(engine::estimate_bias(&cal, min_samples)?)
    }
}

/// Where an estimated γ comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationSource {
    /// Fixed reports, per template id.
    Reports(BTreeMap<String, CalibrationReport>),
    /// A held-out set of pairs, scored under each template.
    Pairs(Vec<NegationPair>),
    /// The Neutral-gold pairs of the evaluation set itself.
    EvaluationPairs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub assumption: WorldAssumption,
    /// Most elaborate mode to run; every simpler mode is run alongside it.
    pub mode: Mode,
    pub gamma: GammaMode,
    pub templates: Vec<PromptTemplate>,
    pub verbalizer: Verbalizer,
    pub scorer: ScorerSpec,
    pub mask: String,
    pub execution: Execution,
    pub min_calibration_samples: usize,
}

impl EvalConfig {
    pub fn modes(&self) -> Vec<Mode> {
        Mode::ALL.into_iter().filter(|m| *m <= self.mode).collect()
    }

    fn engine_config(&self, mode: Mode) -> Result<NandConfig, EngineError> {
        let gamma = if mode == Mode::Nand { self.gamma } else { GammaMode::None };
        NandConfig::new(self.assumption, mode, gamma)
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        if self.templates.is_empty() {
            return Err(PipelineError::Config("at least one template is required".into()));
        }
        let mut ids: Vec<&str> = self.templates.iter().map(|t| t.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.templates.len() {
            return Err(PipelineError::Config("template ids must be distinct".into()));
        }
        for t in &self.templates {
            t.check()?;
        }
        self.verbalizer.check(self.assumption)?;
        for m in self.modes() {
            self.engine_config(m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub records: Vec<PredictionRecord>,
    pub report: Option<EvaluationReport>,
    pub calibration: BTreeMap<String, CalibrationReport>,
    /// Templates fully evaluated, in run order.
    pub completed_templates: Vec<String>,
}

pub fn evaluate(
    cfg: &EvalConfig,
    instances: &[Instance],
    pairs: Option<&[NegationPair]>,
    calibration: CalibrationSource,
    cache: &ScoreCache,
) -> Result<EvalOutput, PipelineError> {
    cfg.check()?;
    let modes = cfg.modes();
    let needs_pairs = modes.iter().any(|m| m.needs_negation());
    if needs_pairs && pairs.is_none() {
        return Err(PipelineError::Config(format!(
            "mode {} combines each statement with its negation and requires a negation pairs file",
            cfg.mode
        )));
    }
    let by_id: HashMap<&str, &NegationPair> =
        pairs.unwrap_or_default().iter().map(|p| (p.original.id.as_str(), p)).collect();
    let unsupported_negation =
        if needs_pairs { instances.iter().filter(|i| !by_id.contains_key(i.id.as_str())).count() } else { 0 };

    let mut jobs: Vec<Job> = Vec::new();
    for inst in instances {
        jobs.push(Job::original(inst));
        if needs_pairs {
            if let Some(p) = by_id.get(inst.id.as_str()) {
                jobs.push(Job::negation(p));
            }
        }
    }

    let wants_estimate = modes.contains(&Mode::Nand) && cfg.gamma == GammaMode::Estimated;
    let eval_pairs: Vec<NegationPair>;
    let cal_pairs: Option<&[NegationPair]> = match (&calibration, wants_estimate) {
        (CalibrationSource::Pairs(p), true) => Some(p),
        (CalibrationSource::EvaluationPairs, true) => {
            eval_pairs = instances.iter().filter_map(|i| by_id.get(i.id.as_str()).map(|p| (*p).clone())).collect();
            Some(&eval_pairs)
        }
        _ => None,
    };
    let mut all_jobs = jobs.clone();
    if let Some(cp) = cal_pairs {
        all_jobs.extend(cp.iter().flat_map(|p| [Job::original(&p.original), Job::negation(p)]));
    }
    let scorer = build_scorer(&cfg.scorer, &cfg.verbalizer, &cfg.templates, &all_jobs)?;
    let scoring = Scoring {
        scorer: scorer.as_ref(),
        cache,
        verbalizer: &cfg.verbalizer,
        assumption: cfg.assumption,
        mask: &cfg.mask,
        exec: cfg.execution,
    };

    let mut out =
        EvalOutput { records: Vec::new(), report: None, calibration: BTreeMap::new(), completed_templates: Vec::new() };
    let mut per_mode: BTreeMap<Mode, Vec<PredictionRecord>> = BTreeMap::new();
    for template in &cfg.templates {
        let step = || -> Result<(Option<CalibrationReport>, Vec<LabelDistribution>), PipelineError> {
            let report = match (&calibration, wants_estimate) {
                (_, false) => None,
                (CalibrationSource::Reports(r), true) => Some(*r.get(&template.id).ok_or_else(|| {
                    PipelineError::Config(format!("no calibration report for template {}", template.id))
                })?),
                (_, true) => {
                    Some(scoring.calibrate(template, cal_pairs.expect("pairs"), cfg.min_calibration_samples)?)
                }
            };
            Ok((report, scoring.score(template, &jobs)?))
        };
        let (report, dists) = match step() {
            Ok(v) => v,
            Err(PipelineError::Scorer { source, .. }) => {
                let mut partial = out.clone();
                partial.records = per_mode.values().flatten().cloned().collect();
                return Err(PipelineError::Scorer { source, partial: Some(Box::new(partial)) });
            }
            Err(e) => return Err(e),
        };
        if let Some(r) = report {
            out.calibration.insert(template.id.clone(), r);
        }
        let mut k = 0;
        let mut scored: Vec<(LabelDistribution, Option<LabelDistribution>)> = Vec::with_capacity(instances.len());
        for inst in instances {
            let x = dists[k];
            k += 1;
            let negx = if needs_pairs && by_id.contains_key(inst.id.as_str()) {
                k += 1;
                Some(dists[k - 1])
            } else {
                None
            };
            scored.push((x, negx));
        }
        for &mode in &modes {
            let ecfg = cfg.engine_config(mode)?;
            for (inst, (x, negx)) in instances.iter().zip(&scored) {
                let predicted = match negx {
                    Some(n) => engine::predict(&ecfg, x, Some(n), report.as_ref())?,
                    None => engine::predict_baseline(x, cfg.assumption)?,
                };
                per_mode.entry(mode).or_default().push(PredictionRecord {
                    instance_id: inst.id.clone(),
                    gold: inst.gold,
                    predicted,
                    mode,
                    template_id: template.id.clone(),
                    has_negation: has_logical_negation(&inst.statement),
                    depth: inst.depth,
                    logic_tags: inst.logic_tags.clone(),
                });
            }
        }
        out.completed_templates.push(template.id.clone());
    }

    let mut reports = Vec::new();
    for (&mode, recs) in &per_mode {
        if !recs.is_empty() {
            reports.push(analytics::mode_report(mode, recs)?);
        }
    }
    out.records = per_mode.into_values().flatten().collect();
    out.report = (!reports.is_empty()).then_some(EvaluationReport { modes: reports, unsupported_negation });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    pub failure: Option<String>,
    pub completed_templates: Vec<String>,
    pub predictions: usize,
    pub files: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e }.into())
}

/// Writes predictions, reports, calibration and a manifest into `dir`.
/// Returns the paths written, manifest last.
pub fn write_outputs(dir: &Path, output: &EvalOutput, failure: Option<&str>) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io { path: dir.to_path_buf(), source: e })?;
    let mut written = Vec::new();
    let predictions = dir.join("predictions.jsonl");
    write_jsonl(&predictions, &output.records)?;
    written.push(predictions);
    if let Some(report) = &output.report {
        written.extend(emit_report(report, ReportFormat::Json, &dir.join("report.json"))?);
        written.extend(emit_report(report, ReportFormat::Csv, &dir.join("report.csv"))?);
    }
    if !output.calibration.is_empty() {
        let path = dir.join("calibration.json");
        write_json(&path, &output.calibration)?;
        written.push(path);
    }
    let manifest = Manifest {
        complete: failure.is_none(),
        failure: failure.map(str::to_string),
        completed_templates: output.completed_templates.clone(),
        predictions: output.records.len(),
        files: written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}
