use labelcon::ablation::Variant;
use labelcon::checkpoint::{Checkpoint, Seeds};
use labelcon::data::{Sample, Split};
use labelcon::loss::bce_loss;
use labelcon::model::Model;
use labelcon::sampler::SamplerStrategy;
use labelcon::synth::synth_generate;
use labelcon::trainer::{
    init_seed, run_phase1_only, run_phase2_from, run_plan, run_plan_from, run_stage, EpochConfig, Languages,
    LogEvent, Setting, StageContext, StageConfig, StageName, StagePlan, TrainConfig,
};
use labelcon::{Dataset, Error};

fn langs(ls: &[&str]) -> Vec<String> {
    ls.iter().map(|s| s.to_string()).collect()
}

fn short_epochs() -> EpochConfig {
    EpochConfig {
        head_pretrain: 2,
        contrastive: 3,
        target_head_pretrain: 2,
        target_contrastive: 2,
        head_posttrain: 2,
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        head_hidden: 32,
        ..TrainConfig::default()
    }
}

fn plan(setting: Setting, target: &str) -> StagePlan {
    StagePlan::new(setting, target, &short_epochs(), 0.01, SamplerStrategy::Random).unwrap()
}

#[test]
fn head_stages_leave_body_bytes_alone() {
    let ds = synth_generate(120, 6, 8, &langs(&["en", "de"]), 0.5, 1).unwrap();
    let config = small_config();
    let mut params = config.init_model(&ds, 3).unwrap();
    let mut opt = config.new_optimizer(&params).unwrap();
    let body = params.body_bytes();
    let head = params.head_bytes();
    for stage in [
        StageConfig::head_pretrain(3, Languages::All),
        StageConfig::head_posttrain(2, Languages::only("de")),
    ] {
        run_stage(&mut params, &mut opt, &ds, &stage, &config, StageContext { phase: 1, index: 0, seed: 4 }).unwrap();
    }
    assert_eq!(params.body_bytes(), body);
    assert_ne!(params.head_bytes(), head);
}

#[test]
fn head_pretraining_lowers_bce_almost_every_epoch() {
    let ds = synth_generate(260, 14, 32, &langs(&["en"]), 1.0, 11).unwrap();
    let config = TrainConfig::default();
    let mut params = config.init_model(&ds, 2).unwrap();
    let pool = ds.indices(Split::Train, None);
    let initial = {
        let out = Model::new(params.clone()).predict(&ds.embeddings(&pool)).unwrap();
        bce_loss(&out.probs, &ds.label_matrix(&pool)).unwrap().loss
    };
    let mut opt = config.new_optimizer(&params).unwrap();
    let stage = StageConfig::head_pretrain(10, Languages::All);
    let records = run_stage(&mut params, &mut opt, &ds, &stage, &config, StageContext { phase: 1, index: 0, seed: 0 }).unwrap();
    let mut curve = vec![initial];
    curve.extend(records.iter().map(|r| r.loss_bce));
    let drops = curve.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(drops >= 8, "{curve:?}");
}

#[test]
fn empty_or_missing_language_selection_is_a_config_error() {
    let ds = synth_generate(60, 4, 4, &langs(&["en"]), 0.5, 1).unwrap();
    let config = small_config();
    let mut params = config.init_model(&ds, 0).unwrap();
    let mut opt = config.new_optimizer(&params).unwrap();
    let ctx = StageContext { phase: 2, index: 2, seed: 0 };
    for languages in [Languages::Only(vec![]), Languages::only("xx")] {
        let stage = StageConfig::head_pretrain(1, languages);
        let err = run_stage(&mut params, &mut opt, &ds, &stage, &config, ctx).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}

#[test]
fn overflowing_inputs_abort_with_stage_and_batch() {
    let ds = synth_generate(60, 3, 4, &langs(&["en"]), 0.5, 1).unwrap();
    let samples: Vec<Sample> = ds
        .samples()
        .iter()
        .cloned()
        .map(|mut s| {
            s.embedding.iter_mut().for_each(|v| *v *= 1e300);
            s
        })
        .collect();
    let huge = Dataset::new(samples, 3, 4, ds.class_names().to_vec()).unwrap();
    let config = small_config();
    let mut params = config.init_model(&huge, 0).unwrap();
    let mut opt = config.new_optimizer(&params).unwrap();
    let stage = StageConfig::contrastive_finetune(2, Languages::All, 0.01, SamplerStrategy::Random);
    let err = run_stage(&mut params, &mut opt, &huge, &stage, &config, StageContext { phase: 1, index: 1, seed: 0 }).unwrap_err();
    assert!(err.is_numerical(), "{err}");
    let text = err.to_string();
    assert!(text.contains("contrastive_finetune") && text.contains("batch"), "{text}");
}

#[test]
fn zero_shot_runs_without_target_training_rows() {
    let ds = synth_generate(150, 5, 6, &langs(&["en", "de", "es"]), 0.5, 4).unwrap();
    let samples: Vec<Sample> = ds
        .samples()
        .iter()
        .filter(|s| !(s.lang == "es" && s.split == Split::Train))
        .cloned()
        .collect();
    let ds = Dataset::new(samples, 5, 6, ds.class_names().to_vec()).unwrap();
    assert!(ds.indices(Split::Train, Some(&langs(&["es"]))).is_empty());
    let out = run_plan(&plan(Setting::ZeroShot, "es"), &ds, &small_config(), 1).unwrap();
    assert_eq!(out.log.reinit_count(), 0);
    assert!(out.log.records.iter().all(|r| r.loss_total.is_finite()));

    let err = run_plan(&plan(Setting::FewShot, "es"), &ds, &small_config(), 1).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn reinit_swaps_the_head_and_keeps_the_body() {
    let ds = synth_generate(120, 5, 6, &langs(&["en", "de"]), 0.5, 2).unwrap();
    let config = small_config();
    let only_reinit = EpochConfig {
        target_head_pretrain: 0,
        target_contrastive: 0,
        head_posttrain: 0,
        ..short_epochs()
    };
    let p = StagePlan::new(Setting::FewShot, "de", &only_reinit, 0.01, SamplerStrategy::Random).unwrap();
    let init = config.init_model(&ds, init_seed(6)).unwrap();
    let phase1 = run_phase1_only(&p, &ds, &config, init, 6, &Default::default()).unwrap();
    let before = phase1.params.clone();
    let after = run_phase2_from(&p, &ds, &config, phase1, 6, &Default::default()).unwrap();
    assert_eq!(after.params.body_bytes(), before.body_bytes());
    assert_ne!(after.params.head_bytes(), before.head_bytes());
    assert_eq!(after.log.reinit_count(), 1);
}

#[test]
fn logs_follow_the_plan() {
    let ds = synth_generate(120, 5, 6, &langs(&["en", "de"]), 0.5, 2).unwrap();
    for setting in [Setting::FewShot, Setting::ZeroShot] {
        let p = plan(setting, "de");
        let out = run_plan(&p, &ds, &small_config(), 3).unwrap();
        let declared: Vec<StageName> = p.stages().map(|s| s.name).collect();
        assert_eq!(out.log.stage_sequence(), declared);

        let phase1_records: usize = p.phase1.iter().map(|s| s.epochs).sum();
        let reinits: Vec<usize> = out
            .log
            .events
            .iter()
            .filter_map(|e| match e {
                LogEvent::HeadReinit { before_record } => Some(*before_record),
                _ => None,
            })
            .collect();
        match setting {
            Setting::FewShot => assert_eq!(reinits, [phase1_records]),
            Setting::ZeroShot => assert!(reinits.is_empty()),
        }
        let per_stage: Vec<(StageName, usize)> = out.log.records.iter().map(|r| (r.stage, r.epoch)).collect();
        let expected: Vec<(StageName, usize)> = p
            .stages()
            .flat_map(|s| (1..=s.epochs).map(move |e| (s.name, e)))
            .collect();
        assert_eq!(per_stage, expected);
    }
}

#[test]
fn identical_seeds_give_identical_checkpoints() {
    let ds = synth_generate(120, 5, 6, &langs(&["en", "de"]), 0.5, 2).unwrap();
    let p = plan(Setting::FewShot, "en");
    let bytes = |seed: u64| {
        let out = run_plan(&p, &ds, &small_config(), seed).unwrap();
        Checkpoint::new(
            ds.class_names().to_vec(),
            out.params,
            Some(out.optimizer),
            Seeds {
                run_seed: seed,
                init_seed: init_seed(seed),
            },
        )
        .to_bytes()
        .unwrap()
    };
    let a = bytes(9);
    assert_eq!(a, bytes(9));
    assert_ne!(a, bytes(10));
}

#[test]
fn ablation_switches_hold_for_the_whole_run() {
    let ds = synth_generate(120, 5, 6, &langs(&["en", "de"]), 0.5, 2).unwrap();
    let config = small_config();
    let p = plan(Setting::FewShot, "de");
    let init = config.init_model(&ds, init_seed(1)).unwrap();

    let no_e2e = run_plan_from(&p, &ds, &config, init.clone(), 1, &Variant::NoE2e.options()).unwrap();
    assert_eq!(no_e2e.params.body_bytes(), init.body_bytes());

    let no_lcon = run_plan_from(&p, &ds, &config, init.clone(), 1, &Variant::NoLcon.options()).unwrap();
    assert!(no_lcon.log.records.iter().all(|r| r.loss_total == r.loss_bce));
    assert!(no_lcon.log.records.iter().all(|r| r.phase == 2));

    let full = run_plan_from(&p, &ds, &config, init, 1, &Default::default()).unwrap();
    assert!(full
        .log
        .records
        .iter()
        .any(|r| r.stage == StageName::ContrastiveFinetune && r.loss_con != 0.0));
}
