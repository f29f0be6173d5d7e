//! SGD and Adam with separate learning rates for body and head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelGrads, ModelParams};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// First and second moments for one model part, one vector per tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    /// Updates applied to this part since its moments were last reset;
    /// drives bias correction.
    pub steps: u64,
}

impl Moments {
    fn zeros_for(slices: &[&[f64]]) -> Self {
        let zeros: Vec<Vec<f64>> = slices.iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    fn matches(&self, slices: &[&[f64]]) -> bool {
        self.first.len() == slices.len()
            && self.second.len() == slices.len()
            && self.first.iter().zip(slices).all(|(m, s)| m.len() == s.len())
            && self.second.iter().zip(slices).all(|(m, s)| m.len() == s.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr_head: f64,
    pub lr_body: f64,
    pub body: Moments,
    pub head: Moments,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr_head: f64, lr_body: f64, params: &ModelParams) -> Result<Self> {
        for (name, lr) in [("lr_head", lr_head), ("lr_body", lr_body)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        Ok(Self {
            kind,
            lr_head,
            lr_body,
            body: Moments::zeros_for(&params.body.slices()),
            head: Moments::zeros_for(&params.head.slices()),
            step_count: 0,
        })
    }

    /// Clears head moments, used when the head is re-initialised.
    pub fn reset_head(&mut self, params: &ModelParams) {
        self.head = Moments::zeros_for(&params.head.slices());
    }

    pub fn set_learning_rates(&mut self, lr_head: f64, lr_body: f64) {
        self.lr_head = lr_head;
        self.lr_body = lr_body;
    }
}

fn update_part(
    kind: OptimizerKind,
    lr: f64,
    params: Vec<&mut [f64]>,
    grads: Vec<&[f64]>,
    moments: &mut Moments,
) {
    match kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.into_iter().zip(grads) {
                for (pv, gv) in p.iter_mut().zip(g) {
                    *pv -= lr * gv;
                }
            }
        }
        OptimizerKind::Adam => {
            moments.steps += 1;
            let t = moments.steps as i32;
            let c1 = 1.0 - ADAM_BETA1.powi(t);
            let c2 = 1.0 - ADAM_BETA2.powi(t);
            for (((p, g), m), v) in params
                .into_iter()
                .zip(grads)
                .zip(moments.first.iter_mut())
                .zip(moments.second.iter_mut())
            {
                for i in 0..p.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Applies one update. Frozen parts (per `params`' flags) are left
/// bit-identical and their moments untouched.
pub fn step(params: &mut ModelParams, grads: &ModelGrads, opt: &mut OptimizerState) -> Result<()> {
    let shapes_ok = |a: Vec<&[f64]>, b: Vec<&[f64]>| {
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    };
    if !shapes_ok(params.body.slices(), grads.body.slices()) || !shapes_ok(params.head.slices(), grads.head.slices()) {
        return Err(Error::Dimension("gradient shapes do not match parameters".into()));
    }
    if !opt.body.matches(&params.body.slices()) || !opt.head.matches(&params.head.slices()) {
        return Err(Error::Dimension("optimizer moments do not match parameters".into()));
    }

    if !params.body_frozen {
        update_part(opt.kind, opt.lr_body, params.body.slices_mut(), grads.body.slices(), &mut opt.body);
    }
    if !params.head_frozen {
        update_part(opt.kind, opt.lr_head, params.head.slices_mut(), grads.head.slices(), &mut opt.head);
    }
    opt.step_count += 1;
    Ok(())
}
