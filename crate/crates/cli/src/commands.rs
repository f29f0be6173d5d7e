use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use labelcon::ablation::{ablation_run, AblationConfig, Variant};
use labelcon::analysis::{
    export_report, f1_scores, predict, similarity_by_distance, toy_experiment, F1Options, ToyConfig,
    DEFAULT_THRESHOLD,
};
use labelcon::checkpoint::{Checkpoint, Seeds};
use labelcon::gradcheck::{run_suite, SuiteOptions};
use labelcon::loss::KernelKind;
use labelcon::model::{Activation, BodyKind, Model, ModelParams};
use labelcon::optim::OptimizerKind;
use labelcon::sampler::SamplerStrategy;
use labelcon::synth::synth_generate;
use labelcon::trainer::{
    init_seed, run_plan_from, RunOptions, Setting, StagePlan, DEFAULT_ALPHA, DEFAULT_BATCH_SIZE, DEFAULT_LR_BODY,
    DEFAULT_LR_HEAD,
};
use labelcon::{Dataset, Split};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{out_path, KernelArgs, UsageError};

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum SettingArg {
    FewShot,
    ZeroShot,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum SamplerArg {
    Random,
    Contrast,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum BodyArg {
    Identity,
    Affine,
    Mlp,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Tanh,
    Gelu,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn check_compatible(params: &ModelParams, ds: &Dataset) -> Result<()> {
    if params.input_dim() != ds.embed_dim() || params.num_classes() != ds.num_classes() {
        return Err(labelcon::Error::Dimension(format!(
            "checkpoint expects {} inputs and {} classes, dataset has {} and {}",
            params.input_dim(),
            params.num_classes(),
            ds.embed_dim(),
            ds.num_classes()
        ))
        .into());
    }
    Ok(())
}

fn split_rows(ds: &Dataset, split: Split, langs: Option<&[String]>) -> Result<Vec<usize>> {
    let idx = ds.indices(split, langs);
    if idx.is_empty() {
        return Err(UsageError(format!("the dataset has no {split} rows")).into());
    }
    Ok(idx)
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 280)]
    samples: usize,
    #[arg(long, default_value_t = 14)]
    classes: usize,
    /// Embedding width.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Comma-separated language codes.
    #[arg(long, value_delimiter = ',', default_value = "en")]
    languages: Vec<String>,
    /// Strength of the label signal in the embeddings, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    correlation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct SynthConfig<'a> {
    samples: usize,
    classes: usize,
    dim: usize,
    languages: &'a [String],
    correlation: f64,
    seed: u64,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let ds = synth_generate(a.samples, a.classes, a.dim, &a.languages, a.correlation, a.seed)?;
    ds.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = Manifest::new(
        "synth",
        &SynthConfig {
            samples: a.samples,
            classes: a.classes,
            dim: a.dim,
            languages: &a.languages,
            correlation: a.correlation,
            seed: a.seed,
        },
    )?;
    m.seed("seed", a.seed);
    m.output(&a.out);
    m.write_beside(&a.out)?;
    println!("wrote {} samples to {}", ds.len(), a.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "zero-shot")]
    setting: SettingArg,
    /// Target language; required for few-shot.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight of the contrastive term.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_LR_HEAD)]
    lr_head: f64,
    #[arg(long, default_value_t = DEFAULT_LR_BODY)]
    lr_body: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// Batching in contrastive stages.
    #[arg(long, value_enum, default_value = "random")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 10)]
    epochs_head_pretrain: usize,
    #[arg(long, default_value_t = 50)]
    epochs_contrastive: usize,
    #[arg(long, default_value_t = 10)]
    epochs_target_head_pretrain: usize,
    #[arg(long, default_value_t = 50)]
    epochs_target_contrastive: usize,
    #[arg(long, default_value_t = 10)]
    epochs_head_posttrain: usize,
    #[arg(long, value_enum, default_value = "affine")]
    body: BodyArg,
    /// Body output width (defaults to the input width).
    #[arg(long)]
    body_out_dim: Option<usize>,
    /// Hidden widths of an mlp body, comma-separated.
    #[arg(long, value_delimiter = ',')]
    body_hidden: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    head_hidden: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Divide the negative weights by the number of classes.
    #[arg(long)]
    normalize_gamma: bool,
    /// TOML file whose values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint path; the log and manifest are written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log CSV (default: <out>.log.csv).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Also save the untrained model here.
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
}

impl TrainArgs {
    fn run_config(&self) -> RunConfig {
        let mut cfg = RunConfig {
            setting: match self.setting {
                SettingArg::FewShot => Setting::FewShot,
                SettingArg::ZeroShot => Setting::ZeroShot,
            },
            target: self.target.clone(),
            seed: self.seed,
            alpha: self.alpha,
            sampler: match self.sampler {
                SamplerArg::Random => SamplerStrategy::Random,
                SamplerArg::Contrast => SamplerStrategy::Contrast,
            },
            ..RunConfig::default()
        };
        cfg.epochs.head_pretrain = self.epochs_head_pretrain;
        cfg.epochs.contrastive = self.epochs_contrastive;
        cfg.epochs.target_head_pretrain = self.epochs_target_head_pretrain;
        cfg.epochs.target_contrastive = self.epochs_target_contrastive;
        cfg.epochs.head_posttrain = self.epochs_head_posttrain;
        let t = &mut cfg.train;
        t.batch_size = self.batch_size;
        t.lr_head = self.lr_head;
        t.lr_body = self.lr_body;
        t.optimizer = match self.optimizer {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        };
        t.kernel = self.kernel.resolve(KernelKind::RawCosine);
        t.normalize_gamma = self.normalize_gamma;
        t.body = match self.body {
            BodyArg::Identity => BodyKind::Identity,
            BodyArg::Affine => BodyKind::Affine,
            BodyArg::Mlp => BodyKind::Mlp,
        };
        t.body_out_dim = self.body_out_dim;
        t.body_hidden = self.body_hidden.clone();
        t.head_hidden = self.head_hidden;
        t.dropout = self.dropout;
        t.activation = match self.activation {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Gelu => Activation::Gelu,
        };
        cfg
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.run_config();
    if let Some(path) = &a.config {
        cfg = cfg.override_from(path)?;
    }
    let target = cfg.target_language()?;
    let ds = load_dataset(&a.data)?;
    let plan = StagePlan::new(cfg.setting, &target, &cfg.epochs, cfg.alpha, cfg.sampler)?;
    let out = out_path(a.out.clone(), "checkpoint.json");
    let log_path = a.log.clone().unwrap_or_else(|| out.with_extension("log.csv"));
    let seeds = Seeds {
        run_seed: cfg.seed,
        init_seed: init_seed(cfg.seed),
    };

    let mut m = Manifest::new("train", &cfg)?;
    m.input(&a.data)?;
    if let Some(path) = &a.config {
        m.input(path)?;
    }
    m.seed("run_seed", seeds.run_seed);
    m.seed("init_seed", seeds.init_seed);

    let initial = cfg.train.init_model(&ds, seeds.init_seed)?;
    if let Some(path) = &a.init_checkpoint {
        Checkpoint::new(ds.class_names().to_vec(), initial.clone(), None, seeds.clone())
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
        m.output(path);
    }

    let outcome = run_plan_from(&plan, &ds, &cfg.train, initial, cfg.seed, &RunOptions::default())?;
    Checkpoint::new(
        ds.class_names().to_vec(),
        outcome.params,
        Some(outcome.optimizer),
        seeds,
    )
    .save(&out)
    .with_context(|| format!("writing {}", out.display()))?;
    outcome
        .log
        .save_csv(&log_path)
        .with_context(|| format!("writing {}", log_path.display()))?;
    m.output(&out);
    m.output(&log_path);
    m.write_beside(&out)?;

    let mut last: Vec<(String, &labelcon::trainer::EpochRecord)> = Vec::new();
    for r in &outcome.log.records {
        let key = format!("phase {} {}", r.phase, r.stage);
        match last.last_mut() {
            Some((k, rec)) if *k == key => *rec = r,
            _ => last.push((key, r)),
        }
    }
    for (stage, r) in last {
        println!(
            "{stage}: {} epochs, loss {:.6} (bce {:.6}, contrastive {:.6})",
            r.epoch, r.loss_total, r.loss_bce, r.loss_con
        );
    }
    if outcome.log.reinit_count() > 0 {
        println!("head re-initialised before phase 2");
    }
    println!("checkpoint: {}", out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "dev")]
    split: SplitArg,
    /// A class is predicted when its probability is at least this value.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Ignore classes absent from both gold and predictions in Macro-F1.
    #[arg(long)]
    skip_empty: bool,
    /// Write the metrics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Scores {
    samples: usize,
    micro_f1: f64,
    macro_f1: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    split: String,
    threshold: f64,
    languages: BTreeMap<String, Scores>,
    all: Scores,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    check_compatible(&ckpt.params, &ds)?;
    let split: Split = a.split.into();
    let options = F1Options {
        skip_empty: a.skip_empty,
    };
    let score = |idx: &[usize]| -> Result<Scores> {
        let preds = predict(&ckpt.params, &ds, idx, a.threshold)?;
        let f1 = f1_scores(&preds.predictions, &ds.labels(idx), options)?;
        Ok(Scores {
            samples: idx.len(),
            micro_f1: f1.micro,
            macro_f1: f1.macro_,
        })
    };
    let all = score(&split_rows(&ds, split, None)?)?;
    let mut languages = BTreeMap::new();
    for lang in ds.languages(split) {
        let idx = ds.indices(split, Some(std::slice::from_ref(&lang)));
        languages.insert(lang, score(&idx)?);
    }

    println!("{:<8} {:>7} {:>9} {:>9}", "lang", "samples", "micro-F1", "macro-F1");
    for (lang, s) in languages.iter().chain([(&"all".to_string(), &all)]) {
        println!("{lang:<8} {:>7} {:>9.4} {:>9.4}", s.samples, s.micro_f1, s.macro_f1);
    }

    if let Some(out) = &a.out {
        let report = EvalReport {
            split: split.to_string(),
            threshold: a.threshold,
            languages,
            all,
        };
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
        let mut m = Manifest::new(
            "eval",
            &serde_json::json!({
                "split": split.to_string(),
                "threshold": a.threshold,
                "skip_empty": a.skip_empty,
            }),
        )?;
        m.input(&a.checkpoint)?;
        m.input(&a.data)?;
        m.output(out);
        m.write_beside(out)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Analyse the body output of this checkpoint instead of the raw
    /// embeddings.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dev")]
    split: SplitArg,
    /// Restrict to these languages, comma-separated.
    #[arg(long, value_delimiter = ',')]
    languages: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let split: Split = a.split.into();
    let langs = (!a.languages.is_empty()).then_some(a.languages.as_slice());
    let idx = split_rows(&ds, split, langs)?;
    if idx.len() < 2 {
        return Err(UsageError(format!("need at least two {split} rows, found {}", idx.len())).into());
    }
    let inputs = ds.embeddings(&idx);
    let embeddings = match &a.checkpoint {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            check_compatible(&ckpt.params, &ds)?;
            Model::new(ckpt.params).predict(&inputs)?.embeddings
        }
        None => inputs,
    };
    let report = similarity_by_distance(&embeddings, &ds.labels(&idx))?;
    let out = out_path(a.out.clone(), "similarity.csv");
    export_report(&report, &out).with_context(|| format!("writing {}", out.display()))?;

    let mut m = Manifest::new(
        "analyze",
        &serde_json::json!({ "split": split.to_string(), "languages": a.languages }),
    )?;
    m.input(&a.data)?;
    if let Some(path) = &a.checkpoint {
        m.input(path)?;
    }
    m.output(&out);
    m.write_beside(&out)?;

    println!(
        "pairs {}  beta {:.6}  R2 {:.6}{}",
        report.n_pairs,
        report.beta,
        report.r_squared,
        if report.degenerate { "  (degenerate fit)" } else { "" }
    );
    for (d, mean) in report.group_means() {
        println!("  d={d:<2} n={:<6} mean cos {mean:.4}", report.groups[&d].len());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated subset of full, no_PT, no_LCON, no_E2E, plus_CS.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Write the table as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let variants: Vec<Variant> = if a.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variants.iter().map(|v| v.parse()).collect::<labelcon::Result<_>>()?
    };
    let ds = load_dataset(&a.data)?;
    let config = AblationConfig {
        alpha: a.alpha,
        threshold: a.threshold,
        ..AblationConfig::default()
    };
    let table = ablation_run(&ds, &variants, &config, a.seed)?;
    println!("{:<8} {:<6} {:>9} {:>9}", "variant", "lang", "micro-F1", "macro-F1");
    for row in &table.rows {
        println!(
            "{:<8} {:<6} {:>9.4} {:>9.4}",
            row.variant.as_str(),
            row.language,
            row.micro_f1,
            row.macro_f1
        );
    }
    for v in &variants {
        if let Some(mean) = table.mean_micro_f1(*v) {
            println!("{:<8} mean   {mean:>9.4}", v.as_str());
        }
    }
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&table)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
        let mut m = Manifest::new("ablate", &config)?;
        m.input(&a.data)?;
        m.seed("seed", a.seed);
        m.output(out);
        m.write_beside(out)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 12)]
    points: usize,
    #[arg(long, default_value_t = 3)]
    label_dim: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    normalize_gamma: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn toy(a: ToyArgs) -> Result<()> {
    let config = ToyConfig {
        num_points: a.points,
        label_dim: a.label_dim,
        steps: a.steps,
        lr: a.lr,
        seed: a.seed,
        kernel: a.kernel.resolve(ToyConfig::default().kernel.kind),
        normalize_gamma: a.normalize_gamma,
        ..ToyConfig::default()
    };
    let report = toy_experiment(&config)?;
    let out = out_path(a.out.clone(), "toy.csv");
    report
        .export_csv(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    let mut m = Manifest::new("toy", &config)?;
    m.seed("seed", a.seed);
    m.output(&out);
    m.write_beside(&out)?;

    let first = report.losses.first().copied().unwrap_or(f64::NAN);
    let last = report.losses.last().copied().unwrap_or(f64::NAN);
    println!("loss {first:.6} -> {last:.6}, non-increasing steps {:.1}%", 100.0 * report.decreasing_fraction);
    for (g, spread) in &report.final_spread_deg {
        println!(
            "group {g:<6} spread {:.3} -> {spread:.3} deg, direction {:.1} deg",
            report.initial_spread_deg[g],
            report.final_direction_deg[g]
        );
    }
    for (pair, after) in &report.final_cross_cosine {
        println!("cos {pair:<8} {:.3} -> {after:.3}", report.initial_cross_cosine[pair]);
    }
    println!("mixed group between its parents: {}", report.mixed_between);
    Ok(())
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Number of random seeds per case.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, hide = true)]
    inject_bug: bool,
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let options = SuiteOptions {
        step: a.step,
        kernel: a.kernel.resolve(KernelKind::RawCosine),
        alpha: a.alpha,
        inject_bug: a.inject_bug,
    };
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let results = run_suite(&seeds, &options)?;
    let mut failed = 0;
    for r in &results {
        let ok = r.report.passes(a.tolerance);
        failed += usize::from(!ok);
        println!(
            "{:<11} seed {:<3} max rel err {:.3e} at {:<4} of {:<4} {}",
            r.case.as_str(),
            r.seed,
            r.report.max_rel_error,
            r.report.worst_param_index,
            r.report.num_params_checked,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if failed > 0 {
        bail!("{failed} of {} checks exceed {:e}", results.len(), a.tolerance);
    }
    println!("all {} checks within {:e}", results.len(), a.tolerance);
    Ok(())
}
