//! Central finite-difference check of analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::loss::{bce_loss, combined_loss, contrastive_loss, SimilarityKernel};
use crate::matrix::Matrix;
use crate::model::{init_model, Activation, BodyConfig, HeadConfig, Mode, Model};
use crate::seed;

pub const MIN_STEP: f64 = 1e-7;
pub const MAX_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param_index: usize,
    pub num_params_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }

    /// Worst-case combination of two reports.
    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        let worst = if other.max_rel_error > self.max_rel_error {
            other
        } else {
            self
        };
        GradCheckReport {
            num_params_checked: self.num_params_checked + other.num_params_checked,
            ..worst
        }
    }
}

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient returned by `evaluator` at `point` with
/// central differences `(L(p + h e_k) - L(p - h e_k)) / 2h` for every
/// coordinate `k`.
///
/// The evaluator returns `(loss, gradient)`; it must be deterministic, which
/// is checked by calling it twice at `point`.
pub fn finite_diff_check<F>(mut evaluator: F, point: &[f64], step: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(MIN_STEP..=MAX_STEP).contains(&step) {
        return Err(Error::Argument(format!(
            "finite-difference step must lie in [{MIN_STEP}, {MAX_STEP}], got {step}"
        )));
    }
    let (first, analytic) = evaluator(point)?;
    let (second, _) = evaluator(point)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::Determinism { first, second });
    }
    if analytic.len() != point.len() {
        return Err(Error::Dimension(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            point.len()
        )));
    }

    let mut probe = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param_index: 0,
        num_params_checked: point.len(),
    };
    for k in 0..point.len() {
        probe[k] = point[k] + step;
        let (plus, _) = evaluator(&probe)?;
        probe[k] = point[k] - step;
        let (minus, _) = evaluator(&probe)?;
        probe[k] = point[k];
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[k], numeric);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            report.worst_param_index = k;
        }
    }
    Ok(report)
}

/// Which gradient a suite case checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteCase {
    Bce,
    Contrastive,
    Pipeline,
}

impl SuiteCase {
    pub const ALL: [SuiteCase; 3] = [SuiteCase::Bce, SuiteCase::Contrastive, SuiteCase::Pipeline];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteCase::Bce => "bce",
            SuiteCase::Contrastive => "contrastive",
            SuiteCase::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub case: SuiteCase,
    pub seed: u64,
    pub report: GradCheckReport,
}

/// Options for [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub step: f64,
    pub kernel: SimilarityKernel,
    pub alpha: f64,
    /// Scales the first analytic gradient entry by 1.5; lets tests confirm
    /// the checker notices a wrong gradient.
    pub inject_bug: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            kernel: SimilarityKernel::default(),
            alpha: 0.01,
            inject_bug: false,
        }
    }
}

fn random_labels<R: Rng>(rng: &mut R, rows: usize, classes: usize) -> Vec<LabelVector> {
    (0..rows)
        .map(|_| {
            let mut y = LabelVector::zeros(classes);
            for c in 0..classes {
                if rng.random::<f64>() < 0.5 {
                    y.set(c);
                }
            }
            if y.count_ones() == 0 {
                y.set(rng.random_range(0..classes));
            }
            y
        })
        .collect()
}

/// Entries in `[lo, hi)`.
fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn maybe_bug(mut grad: Vec<f64>, inject: bool) -> Vec<f64> {
    if inject {
        if let Some(g) = grad.first_mut() {
            *g = *g * 1.5 + 1e-3;
        }
    }
    grad
}

/// Checks one case on a random instance drawn from `seed`.
///
/// * `bce`: B=4, |C|=14 probabilities kept inside (0.05, 0.95).
/// * `contrastive`: B=6, H=4, |C|=3 with strictly positive entries so every
///   raw cosine is positive and no term sits on the clamp.
/// * `pipeline`: affine body + MLP head + combined loss, dropout off,
///   checked over every parameter.
pub fn check_case(case: SuiteCase, seed: u64, options: &SuiteOptions) -> Result<GradCheckReport> {
    let mut rng = seed::derived_rng(seed, &[case as u64]);
    let SuiteOptions {
        step,
        kernel,
        alpha,
        inject_bug,
    } = *options;
    match case {
        SuiteCase::Bce => {
            let labels = Matrix::from_rows(
                &random_labels(&mut rng, 4, 14)
                    .iter()
                    .map(LabelVector::as_f64)
                    .collect::<Vec<_>>(),
            )?;
            let probs = random_matrix(&mut rng, 4, 14, 0.05, 0.95);
            finite_diff_check(
                |p| {
                    let m = Matrix::from_vec(4, 14, p.to_vec())?;
                    let out = bce_loss(&m, &labels)?;
                    Ok((out.loss, maybe_bug(out.grad.into_vec(), inject_bug)))
                },
                probs.as_slice(),
                step,
            )
        }
        SuiteCase::Contrastive => {
            let labels = random_labels(&mut rng, 6, 3);
            let x = random_matrix(&mut rng, 6, 4, 0.1, 1.0);
            finite_diff_check(
                |p| {
                    let m = Matrix::from_vec(6, 4, p.to_vec())?;
                    let out = contrastive_loss(&m, &labels, &kernel, false)?;
                    Ok((out.loss, maybe_bug(out.grad.into_vec(), inject_bug)))
                },
                x.as_slice(),
                step,
            )
        }
        SuiteCase::Pipeline => {
            let (b, e, h, classes) = (6, 5, 4, 3);
            let labels = random_labels(&mut rng, b, classes);
            let inputs = random_matrix(&mut rng, b, e, -1.0, 1.0);
            let head = HeadConfig {
                in_dim: h,
                hidden: 8,
                out_dim: classes,
                dropout_rate: 0.0,
                activation: Activation::Relu,
            };
            let params = init_model(BodyConfig::affine(e, h), head, rng.random())?;
            let point = params.to_flat();
            let mut model = Model::new(params);
            finite_diff_check(
                |p| {
                    model.params.set_flat(p)?;
                    let out = model.forward(&inputs, Mode::Train, 0)?;
                    let loss = combined_loss(&out.probs, &labels, &out.embeddings, alpha, &kernel, false)?;
                    let grads = model.backward(&loss.grad_embeddings, &loss.grad_probs)?;
                    Ok((loss.breakdown.total, maybe_bug(grads.to_flat(), inject_bug)))
                },
                &point,
                step,
            )
        }
    }
}

/// Runs every case for each seed.
pub fn run_suite(seeds: &[u64], options: &SuiteOptions) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::with_capacity(seeds.len() * SuiteCase::ALL.len());
    for &seed in seeds {
        for case in SuiteCase::ALL {
            out.push(SuiteResult {
                case,
                seed,
                report: check_case(case, seed, options)?,
            });
        }
    }
    Ok(out)
}
