//! Component ablations: multilingual pre-training, the contrastive term and
//! end-to-end body training are removed cumulatively, and the contrast
//! sampler is offered as an extension of the full system.

use serde::{Deserialize, Serialize};

use crate::analysis::{f1_scores, predict, F1Options, DEFAULT_THRESHOLD};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::sampler::SamplerStrategy;
use crate::seed::derive_seed;
use crate::trainer::{
    init_seed, run_phase1_only, run_phase2_from, EpochConfig, RunOptions, RunOutcome, Setting, StagePlan,
    TrainConfig, DEFAULT_ALPHA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoPt,
    NoLcon,
    NoE2e,
    PlusCs,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Full, Variant::NoPt, Variant::NoLcon, Variant::NoE2e, Variant::PlusCs];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoPt => "no_PT",
            Variant::NoLcon => "no_LCON",
            Variant::NoE2e => "no_E2E",
            Variant::PlusCs => "plus_CS",
        }
    }

    pub fn options(&self) -> RunOptions {
        let none = RunOptions::default();
        let no_pt = RunOptions {
            skip_phase1: true,
            ..none.clone()
        };
        let no_lcon = RunOptions {
            alpha_override: Some(0.0),
            ..no_pt.clone()
        };
        match self {
            Variant::Full => none,
            Variant::NoPt => no_pt,
            Variant::NoLcon => no_lcon,
            Variant::NoE2e => RunOptions {
                freeze_body: true,
                ..no_lcon
            },
            Variant::PlusCs => RunOptions {
                contrastive_sampler: Some(SamplerStrategy::Contrast),
                ..none
            },
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown ablation variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub language: String,
    pub setting: Setting,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Body bytes were identical before and after the run.
    pub body_unchanged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn mean_micro_f1(&self, variant: Variant) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.micro_f1)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn get(&self, variant: Variant, language: &str) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.language == language)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub train: TrainConfig,
    pub epochs: EpochConfig,
    pub alpha: f64,
    pub threshold: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            epochs: EpochConfig::default(),
            alpha: DEFAULT_ALPHA,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

fn language_key(lang: &str) -> u64 {
    lang.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64))
}

/// Trains every requested variant and scores Micro/Macro-F1 on the dev
/// split of each language. Languages with training data use the few-shot
/// plan, the others the zero-shot plan. Phase one is trained once per
/// variant and shared across target languages.
pub fn ablation_run(
    dataset: &Dataset,
    variants: &[Variant],
    config: &AblationConfig,
    seed: u64,
) -> Result<AblationTable> {
    let dev_langs = dataset.languages(Split::Dev);
    if dev_langs.is_empty() {
        return Err(Error::Config("ablation needs a dev split".into()));
    }
    let train_langs = dataset.languages(Split::Train);
    let initial = config.train.init_model(dataset, init_seed(seed))?;
    let initial_body = initial.body_bytes();

    let mut table = AblationTable::default();
    for &variant in variants {
        let options = variant.options();
        let sampler = options.contrastive_sampler.unwrap_or(SamplerStrategy::Random);
        let mut phase1: Option<RunOutcome> = None;
        for lang in &dev_langs {
            let setting = if train_langs.contains(lang) {
                Setting::FewShot
            } else {
                Setting::ZeroShot
            };
            let plan = StagePlan::new(setting, lang, &config.epochs, config.alpha, sampler)?;
            if phase1.is_none() {
                phase1 = Some(run_phase1_only(&plan, dataset, &config.train, initial.clone(), seed, &options)?);
            }
            let shared = phase1.clone().expect("phase one trained above");
            let lang_seed = derive_seed(seed, &[language_key(lang)]);
            let outcome = run_phase2_from(&plan, dataset, &config.train, shared, lang_seed, &options)?;

            let dev = dataset.indices(Split::Dev, Some(std::slice::from_ref(lang)));
            let preds = predict(&outcome.params, dataset, &dev, config.threshold)?;
            let scores = f1_scores(&preds.predictions, &dataset.labels(&dev), F1Options::default())?;
            table.rows.push(AblationRow {
                variant,
                language: lang.clone(),
                setting,
                micro_f1: scores.micro,
                macro_f1: scores.macro_,
                body_unchanged: outcome.params.body_bytes() == initial_body,
            });
        }
    }
    Ok(table)
}
