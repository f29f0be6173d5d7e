//! Multi-stage training.
//!
//! Phase one trains on every language: head pre-training (BCE only, body
//! frozen) followed by contrastive fine-tuning (BCE + alpha * contrastive,
//! body and head trained jointly). Phase two adapts to a target language.
//! Zero-shot runs keep the head and post-train it on all languages;
//! few-shot runs re-initialise the head, then pre-train, contrastively
//! fine-tune and post-train on the target language.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector, Split};
use crate::error::{Error, Result};
use crate::loss::{bce_loss, combined_loss, SimilarityKernel};
use crate::matrix::Matrix;
use crate::model::{init_model, reinit_head, Activation, BodyConfig, BodyKind, HeadConfig, Mode, Model, ModelParams};
use crate::optim::{self, OptimizerKind, OptimizerState};
use crate::sampler::{plan_batches, SamplerStrategy};
use crate::seed::derive_seed;

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_BATCH_SIZE: usize = 26;
pub const DEFAULT_LR_HEAD: f64 = 1e-3;
pub const DEFAULT_LR_BODY: f64 = 2e-5;

const SAMPLER_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const REINIT_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    HeadPretrain,
    ContrastiveFinetune,
    HeadPosttrain,
}

impl StageName {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageName::HeadPretrain => "head_pretrain",
            StageName::ContrastiveFinetune => "contrastive_finetune",
            StageName::HeadPosttrain => "head_posttrain",
        }
    }
}

impl std::fmt::Display for StageName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BceOnly,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Languages {
    All,
    Only(Vec<String>),
}

impl Languages {
    pub fn only(lang: &str) -> Self {
        Languages::Only(vec![lang.to_string()])
    }

    /// Concrete language list; `All` means every language in the train split.
    pub fn resolve(&self, dataset: &Dataset) -> Vec<String> {
        match self {
            Languages::All => dataset.languages(Split::Train),
            Languages::Only(ls) => ls.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub name: StageName,
    pub epochs: usize,
    pub loss: LossKind,
    pub body_frozen: bool,
    pub head_frozen: bool,
    pub sampler_strategy: SamplerStrategy,
    pub languages: Languages,
    pub alpha: f64,
}

impl StageConfig {
    pub fn head_pretrain(epochs: usize, languages: Languages) -> Self {
        Self {
            name: StageName::HeadPretrain,
            epochs,
            loss: LossKind::BceOnly,
            body_frozen: true,
            head_frozen: false,
            sampler_strategy: SamplerStrategy::Random,
            languages,
            alpha: 0.0,
        }
    }

    pub fn contrastive_finetune(epochs: usize, languages: Languages, alpha: f64, sampler: SamplerStrategy) -> Self {
        Self {
            name: StageName::ContrastiveFinetune,
            epochs,
            loss: LossKind::Combined,
            body_frozen: false,
            head_frozen: false,
            sampler_strategy: sampler,
            languages,
            alpha,
        }
    }

    pub fn head_posttrain(epochs: usize, languages: Languages) -> Self {
        Self {
            name: StageName::HeadPosttrain,
            ..Self::head_pretrain(epochs, languages)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.name {
            StageName::HeadPretrain | StageName::HeadPosttrain => {
                self.loss == LossKind::BceOnly && self.body_frozen
            }
            StageName::ContrastiveFinetune => self.loss == LossKind::Combined && !self.body_frozen,
        };
        if !ok {
            return Err(Error::Config(format!(
                "stage {} requires {}",
                self.name,
                if self.name == StageName::ContrastiveFinetune {
                    "the combined loss and an unfrozen body"
                } else {
                    "the BCE-only loss and a frozen body"
                }
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be a non-negative number, got {}", self.alpha)));
        }
        if let Languages::Only(ls) = &self.languages {
            if ls.is_empty() {
                return Err(Error::Config(format!("stage {} selects no languages", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    FewShot,
    ZeroShot,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "few-shot" | "few_shot" => Ok(Setting::FewShot),
            "zero-shot" | "zero_shot" => Ok(Setting::ZeroShot),
            other => Err(Error::Config(format!("unknown setting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStep {
    ReinitHead,
    Stage(StageConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub phase1: Vec<StageConfig>,
    pub phase2: Vec<PlanStep>,
    pub setting: Setting,
    pub target_language: String,
}

/// Epoch counts for every stage of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpochConfig {
    pub head_pretrain: usize,
    pub contrastive: usize,
    pub target_head_pretrain: usize,
    pub target_contrastive: usize,
    pub head_posttrain: usize,
}

impl Default for EpochConfig {
    fn default() -> Self {
        Self {
            head_pretrain: 10,
            contrastive: 50,
            target_head_pretrain: 10,
            target_contrastive: 50,
            head_posttrain: 10,
        }
    }
}

impl StagePlan {
    pub fn new(
        setting: Setting,
        target_language: &str,
        epochs: &EpochConfig,
        alpha: f64,
        sampler: SamplerStrategy,
    ) -> Result<Self> {
        let phase1 = vec![
            StageConfig::head_pretrain(epochs.head_pretrain, Languages::All),
            StageConfig::contrastive_finetune(epochs.contrastive, Languages::All, alpha, sampler),
        ];
        let phase2 = match setting {
            Setting::ZeroShot => vec![PlanStep::Stage(StageConfig::head_posttrain(
                epochs.head_posttrain,
                Languages::All,
            ))],
            Setting::FewShot => {
                let target = Languages::only(target_language);
                vec![
                    PlanStep::ReinitHead,
                    PlanStep::Stage(StageConfig::head_pretrain(epochs.target_head_pretrain, target.clone())),
                    PlanStep::Stage(StageConfig::contrastive_finetune(
                        epochs.target_contrastive,
                        target.clone(),
                        alpha,
                        sampler,
                    )),
                    PlanStep::Stage(StageConfig::head_posttrain(epochs.head_posttrain, target)),
                ]
            }
        };
        let plan = Self {
            phase1,
            phase2,
            setting,
            target_language: target_language.to_string(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_language.is_empty() {
            return Err(Error::Config("plan needs a target language".into()));
        }
        for s in self.stages() {
            s.validate()?;
        }
        let p1: Vec<(StageName, &Languages)> = self.phase1.iter().map(|s| (s.name, &s.languages)).collect();
        if p1 != [(StageName::HeadPretrain, &Languages::All), (StageName::ContrastiveFinetune, &Languages::All)] {
            return Err(Error::Config(
                "phase one must be head_pretrain then contrastive_finetune over all languages".into(),
            ));
        }
        let target = Languages::only(&self.target_language);
        let shape: Vec<Option<(StageName, &Languages)>> = self
            .phase2
            .iter()
            .map(|s| match s {
                PlanStep::ReinitHead => None,
                PlanStep::Stage(c) => Some((c.name, &c.languages)),
            })
            .collect();
        let ok = match self.setting {
            Setting::ZeroShot => shape == [Some((StageName::HeadPosttrain, &Languages::All))],
            Setting::FewShot => {
                shape
                    == [
                        None,
                        Some((StageName::HeadPretrain, &target)),
                        Some((StageName::ContrastiveFinetune, &target)),
                        Some((StageName::HeadPosttrain, &target)),
                    ]
            }
        };
        if !ok {
            return Err(Error::Config(format!(
                "phase two does not match the {:?} layout for target '{}'",
                self.setting, self.target_language
            )));
        }
        Ok(())
    }

    /// All stages in execution order.
    pub fn stages(&self) -> impl Iterator<Item = &StageConfig> {
        self.phase1.iter().chain(self.phase2.iter().filter_map(|s| match s {
            PlanStep::Stage(c) => Some(c),
            PlanStep::ReinitHead => None,
        }))
    }
}

/// Plan with default epochs, alpha 0.01 and random batching.
pub fn default_plan(setting: Setting, target_language: &str) -> Result<StagePlan> {
    StagePlan::new(
        setting,
        target_language,
        &EpochConfig::default(),
        DEFAULT_ALPHA,
        SamplerStrategy::Random,
    )
}

/// Optimisation and model hyperparameters shared by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_head: f64,
    pub lr_body: f64,
    pub optimizer: OptimizerKind,
    pub kernel: SimilarityKernel,
    pub normalize_gamma: bool,
    pub body: BodyKind,
    /// Body output width; defaults to the input width.
    pub body_out_dim: Option<usize>,
    pub body_hidden: Vec<usize>,
    pub head_hidden: usize,
    pub dropout: f64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            lr_head: DEFAULT_LR_HEAD,
            lr_body: DEFAULT_LR_BODY,
            optimizer: OptimizerKind::Adam,
            kernel: SimilarityKernel::default(),
            normalize_gamma: false,
            body: BodyKind::Affine,
            body_out_dim: None,
            body_hidden: Vec::new(),
            head_hidden: 256,
            dropout: 0.5,
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn model_configs(&self, embed_dim: usize, num_classes: usize) -> (BodyConfig, HeadConfig) {
        let out = self.body_out_dim.unwrap_or(embed_dim);
        let body = BodyConfig {
            kind: self.body,
            in_dim: embed_dim,
            out_dim: out,
            hidden_dims: self.body_hidden.clone(),
            activation: self.activation,
        };
        let head = HeadConfig {
            in_dim: out,
            hidden: self.head_hidden,
            out_dim: num_classes,
            dropout_rate: self.dropout,
            activation: self.activation,
        };
        (body, head)
    }

    pub fn init_model(&self, dataset: &Dataset, seed: u64) -> Result<ModelParams> {
        let (body, head) = self.model_configs(dataset.embed_dim(), dataset.num_classes());
        init_model(body, head, seed)
    }

    pub fn new_optimizer(&self, params: &ModelParams) -> Result<OptimizerState> {
        OptimizerState::new(self.optimizer, self.lr_head, self.lr_body, params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size must be at least 2, got {}", self.batch_size)));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: u8,
    pub stage: StageName,
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_bce: f64,
    pub loss_con: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEvent {
    /// Head re-drawn before record number `before_record`.
    HeadReinit { before_record: usize },
    StageStart { phase: u8, stage: StageName, before_record: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub events: Vec<LogEvent>,
}

impl TrainLog {
    pub fn reinit_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, LogEvent::HeadReinit { .. }))
            .count()
    }

    /// Stage names in the order they started.
    pub fn stage_sequence(&self) -> Vec<StageName> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::StageStart { stage, .. } => Some(*stage),
                _ => None,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["stage", "epoch", "loss_total", "loss_bce", "loss_con", "seconds"])?;
        for r in &self.records {
            out.write_record([
                r.stage.as_str().to_string(),
                r.epoch.to_string(),
                r.loss_total.to_string(),
                r.loss_bce.to_string(),
                r.loss_con.to_string(),
                format!("{:.6}", r.seconds),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Where a stage sits in a run; keys its random streams.
#[derive(Debug, Clone, Copy)]
pub struct StageContext {
    pub phase: u8,
    pub index: usize,
    pub seed: u64,
}

fn stage_pool(dataset: &Dataset, stage: &StageConfig) -> Result<Vec<usize>> {
    let langs = stage.languages.resolve(dataset);
    if langs.is_empty() {
        return Err(Error::Config(format!("stage {} selects no languages", stage.name)));
    }
    let pool = dataset.indices(Split::Train, Some(&langs));
    if pool.is_empty() {
        return Err(Error::Config(format!(
            "stage {} has no training samples for languages [{}]",
            stage.name,
            langs.join(", ")
        )));
    }
    if let Some(&i) = pool.iter().find(|&&i| dataset.samples()[i].labels.count_ones() == 0) {
        return Err(Error::Config(format!(
            "training sample '{}' has no labels",
            dataset.samples()[i].id
        )));
    }
    Ok(pool)
}

/// Runs every epoch of one stage, updating `params` and `opt` in place.
pub fn run_stage(
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    dataset: &Dataset,
    stage: &StageConfig,
    config: &TrainConfig,
    ctx: StageContext,
) -> Result<Vec<EpochRecord>> {
    stage.validate()?;
    run_stage_unchecked(params, opt, dataset, stage, config, ctx)
}

fn run_stage_unchecked(
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    dataset: &Dataset,
    stage: &StageConfig,
    config: &TrainConfig,
    ctx: StageContext,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if params.input_dim() != dataset.embed_dim() || params.num_classes() != dataset.num_classes() {
        return Err(Error::Dimension(format!(
            "model expects {} inputs / {} classes, dataset has {} / {}",
            params.input_dim(),
            params.num_classes(),
            dataset.embed_dim(),
            dataset.num_classes()
        )));
    }
    let pool = stage_pool(dataset, stage)?;
    params.body_frozen = stage.body_frozen;
    params.head_frozen = stage.head_frozen;
    opt.set_learning_rates(config.lr_head, config.lr_body);

    let mut model = Model::new(params.clone());
    let mut records = Vec::with_capacity(stage.epochs);
    let stage_key = ctx.index as u64;
    for epoch in 0..stage.epochs {
        let start = Instant::now();
        let sampler_seed = derive_seed(ctx.seed, &[SAMPLER_STREAM, stage_key, epoch as u64]);
        let mut plan = plan_batches(stage.sampler_strategy, dataset, &pool, config.batch_size, sampler_seed)?;
        if stage.loss == LossKind::Combined {
            plan = plan.without_singletons();
            if plan.batches.is_empty() {
                return Err(Error::Config(format!(
                    "stage {} has no batch with at least two samples",
                    stage.name
                )));
            }
        }

        let (mut sum_total, mut sum_bce, mut sum_con) = (0.0, 0.0, 0.0);
        for (b, batch) in plan.batches.iter().enumerate() {
            let inputs = dataset.embeddings(batch);
            let labels: Vec<LabelVector> = dataset.labels(batch);
            let dropout_seed = derive_seed(ctx.seed, &[DROPOUT_STREAM, stage_key, epoch as u64, b as u64]);
            let out = model.forward(&inputs, Mode::Train, dropout_seed)?;
            let abort = |detail: String| Error::NumericalAbort {
                stage: stage.name.to_string(),
                epoch: epoch + 1,
                batch: b,
                detail,
            };
            if !out.embeddings.all_finite() || !out.probs.all_finite() {
                return Err(abort("non-finite forward output".into()));
            }

            let (total, bce, con, grad_embeddings, grad_probs) = match stage.loss {
                LossKind::BceOnly => {
                    let r = bce_loss(&out.probs, &dataset.label_matrix(batch))?;
                    let zero = Matrix::zeros(out.embeddings.rows(), out.embeddings.cols());
                    (r.loss, r.loss, 0.0, zero, r.grad)
                }
                LossKind::Combined => {
                    let r = combined_loss(
                        &out.probs,
                        &labels,
                        &out.embeddings,
                        stage.alpha,
                        &config.kernel,
                        config.normalize_gamma,
                    )
                    .map_err(|e| match e {
                        Error::DegenerateInput(m) => abort(m),
                        other => other,
                    })?;
                    let lb = r.breakdown;
                    (lb.total, lb.bce, lb.contrastive, r.grad_embeddings, r.grad_probs)
                }
            };
            if !total.is_finite() || !grad_embeddings.all_finite() || !grad_probs.all_finite() {
                return Err(abort(format!("loss {total}, bce {bce}, contrastive {con}")));
            }
            let grads = model.backward(&grad_embeddings, &grad_probs)?;
            optim::step(&mut model.params, &grads, opt)?;
            sum_total += total;
            sum_bce += bce;
            sum_con += con;
        }
        let n = plan.batches.len().max(1) as f64;
        records.push(EpochRecord {
            phase: ctx.phase,
            stage: stage.name,
            epoch: epoch + 1,
            loss_total: sum_total / n,
            loss_bce: sum_bce / n,
            loss_con: sum_con / n,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    *params = model.into_params();
    Ok(records)
}

/// Ablation switches applied on top of a valid plan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Skip phase one entirely.
    pub skip_phase1: bool,
    pub alpha_override: Option<f64>,
    /// Keep the body frozen in every stage.
    pub freeze_body: bool,
    /// Sampler used by contrastive stages instead of the plan's choice.
    pub contrastive_sampler: Option<SamplerStrategy>,
}

impl RunOptions {
    fn apply(&self, stage: &StageConfig) -> StageConfig {
        let mut s = stage.clone();
        if s.loss == LossKind::Combined {
            if let Some(a) = self.alpha_override {
                s.alpha = a;
            }
            if let Some(strategy) = self.contrastive_sampler {
                s.sampler_strategy = strategy;
            }
        }
        if self.freeze_body {
            s.body_frozen = true;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub log: TrainLog,
}

fn run_phase1(
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    plan: &StagePlan,
    dataset: &Dataset,
    config: &TrainConfig,
    seed: u64,
    options: &RunOptions,
    log: &mut TrainLog,
) -> Result<()> {
    if options.skip_phase1 {
        return Ok(());
    }
    for (i, stage) in plan.phase1.iter().enumerate() {
        let stage = options.apply(stage);
        log.events.push(LogEvent::StageStart {
            phase: 1,
            stage: stage.name,
            before_record: log.records.len(),
        });
        let ctx = StageContext { phase: 1, index: i, seed };
        log.records
            .extend(run_stage_unchecked(params, opt, dataset, &stage, config, ctx)?);
    }
    Ok(())
}

fn run_phase2(
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    plan: &StagePlan,
    dataset: &Dataset,
    config: &TrainConfig,
    seed: u64,
    options: &RunOptions,
    log: &mut TrainLog,
) -> Result<()> {
    let offset = plan.phase1.len();
    for (i, step) in plan.phase2.iter().enumerate() {
        match step {
            PlanStep::ReinitHead => {
                reinit_head(params, derive_seed(seed, &[REINIT_STREAM]));
                opt.reset_head(params);
                log.events.push(LogEvent::HeadReinit {
                    before_record: log.records.len(),
                });
            }
            PlanStep::Stage(stage) => {
                let stage = options.apply(stage);
                log.events.push(LogEvent::StageStart {
                    phase: 2,
                    stage: stage.name,
                    before_record: log.records.len(),
                });
                let ctx = StageContext {
                    phase: 2,
                    index: offset + i,
                    seed,
                };
                log.records
                    .extend(run_stage_unchecked(params, opt, dataset, &stage, config, ctx)?);
            }
        }
    }
    Ok(())
}

/// Initialises a model from `seed` and runs the whole plan.
pub fn run_plan(plan: &StagePlan, dataset: &Dataset, config: &TrainConfig, seed: u64) -> Result<RunOutcome> {
    let params = config.init_model(dataset, derive_seed(seed, &[INIT_STREAM]))?;
    run_plan_from(plan, dataset, config, params, seed, &RunOptions::default())
}

/// Runs `plan` starting from `params`, with optional ablation switches.
pub fn run_plan_from(
    plan: &StagePlan,
    dataset: &Dataset,
    config: &TrainConfig,
    mut params: ModelParams,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutcome> {
    plan.validate()?;
    config.validate()?;
    let mut opt = config.new_optimizer(&params)?;
    let mut log = TrainLog::default();
    run_phase1(&mut params, &mut opt, plan, dataset, config, seed, options, &mut log)?;
    run_phase2(&mut params, &mut opt, plan, dataset, config, seed, options, &mut log)?;
    Ok(RunOutcome {
        params,
        optimizer: opt,
        log,
    })
}

/// Phase one only; used to share multilingual training across targets.
pub fn run_phase1_only(
    plan: &StagePlan,
    dataset: &Dataset,
    config: &TrainConfig,
    mut params: ModelParams,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutcome> {
    plan.validate()?;
    config.validate()?;
    let mut opt = config.new_optimizer(&params)?;
    let mut log = TrainLog::default();
    run_phase1(&mut params, &mut opt, plan, dataset, config, seed, options, &mut log)?;
    Ok(RunOutcome {
        params,
        optimizer: opt,
        log,
    })
}

/// Continues a phase-one outcome with the plan's phase two.
pub fn run_phase2_from(
    plan: &StagePlan,
    dataset: &Dataset,
    config: &TrainConfig,
    phase1: RunOutcome,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutcome> {
    plan.validate()?;
    let RunOutcome {
        mut params,
        optimizer: mut opt,
        mut log,
    } = phase1;
    run_phase2(&mut params, &mut opt, plan, dataset, config, seed, options, &mut log)?;
    Ok(RunOutcome {
        params,
        optimizer: opt,
        log,
    })
}

/// Seed used by [`run_plan`] to initialise the model.
pub fn init_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, &[INIT_STREAM])
}
