mod common;

use common::rng;
use labelcon::data::LabelVector;
use labelcon::gradcheck::finite_diff_check;
use labelcon::loss::{combined_loss, SimilarityKernel};
use labelcon::model::{init_model, Activation, BodyConfig, HeadConfig, Mode, Model};
use labelcon::optim::{step, OptimizerKind, OptimizerState};
use labelcon::Matrix;
use rand::Rng;

fn random_inputs(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn eval_hidden_is_the_mean_over_dropout_masks() {
    let params = init_model(BodyConfig::affine(6, 5), HeadConfig::new(5, 3), 3).unwrap();
    let model = Model::new(params);
    let x = random_inputs(1, 1, 6);
    let eval = model.head_hidden(&x, Mode::Eval, 0).unwrap();
    let masks = 40_000;
    let mut mean = vec![0.0; eval.cols()];
    for seed in 0..masks {
        let h = model.head_hidden(&x, Mode::Train, seed).unwrap();
        mean.iter_mut().zip(h.as_slice()).for_each(|(m, v)| *m += v / masks as f64);
    }
    let diff: f64 = mean.iter().zip(eval.as_slice()).map(|(m, e)| (m - e).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = eval.as_slice().iter().map(|e| e * e).sum::<f64>().sqrt();
    assert!(scale > 0.0);
    assert!(diff / scale < 0.01, "relative deviation {}", diff / scale);
}

#[test]
fn pipeline_gradients_pass_on_ten_seeds() {
    let kernel = SimilarityKernel::default();
    for seed in 0..10u64 {
        let mut r = rng(100 + seed);
        let (b, e, h, c) = (5, 4, 3, 3);
        let body = BodyConfig::mlp(e, vec![6], h, Activation::Tanh);
        let head = HeadConfig {
            in_dim: h,
            hidden: 7,
            out_dim: c,
            dropout_rate: 0.0,
            activation: Activation::Gelu,
        };
        let params = init_model(body, head, seed).unwrap();
        let inputs = random_inputs(200 + seed, b, e);
        let labels: Vec<LabelVector> = (0..b)
            .map(|i| {
                let mut y = LabelVector::zeros(c);
                y.set(i % c);
                if r.random_bool(0.5) {
                    y.set(r.random_range(0..c));
                }
                y
            })
            .collect();
        let point = params.to_flat();
        let mut model = Model::new(params);
        let report = finite_diff_check(
            |p| {
                model.params.set_flat(p)?;
                let out = model.forward(&inputs, Mode::Train, 0)?;
                // A large weight keeps the contrastive part visible in the check.
                let loss = combined_loss(&out.probs, &labels, &out.embeddings, 0.5, &kernel, false)?;
                let g = model.backward(&loss.grad_embeddings, &loss.grad_probs)?;
                Ok((loss.breakdown.total, g.to_flat()))
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(report.passes(1e-5), "seed {seed}: {report:?}");
    }
}

#[test]
fn frozen_body_survives_many_steps_bit_for_bit() {
    let mut params = init_model(BodyConfig::affine(4, 4), HeadConfig::new(4, 2), 9).unwrap();
    params.body_frozen = true;
    let body_before = params.body_bytes();
    let head_before = params.head_bytes();
    let mut opt = OptimizerState::new(OptimizerKind::Adam, 1e-3, 2e-5, &params).unwrap();
    let inputs = random_inputs(4, 3, 4);
    let labels = vec![
        LabelVector::new(vec![1, 0]).unwrap(),
        LabelVector::new(vec![1, 1]).unwrap(),
        LabelVector::new(vec![0, 1]).unwrap(),
    ];
    let mut model = Model::new(params);
    for i in 0..20 {
        let out = model.forward(&inputs, Mode::Train, i).unwrap();
        let loss = combined_loss(&out.probs, &labels, &out.embeddings, 0.01, &SimilarityKernel::default(), false).unwrap();
        let grads = model.backward(&loss.grad_embeddings, &loss.grad_probs).unwrap();
        step(&mut model.params, &grads, &mut opt).unwrap();
    }
    assert_eq!(model.params.body_bytes(), body_before);
    assert_ne!(model.params.head_bytes(), head_before);
    assert_eq!(opt.step_count, 20);
}
