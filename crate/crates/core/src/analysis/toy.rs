//! Two-dimensional repositioning experiment: random 2-D points with small
//! label vectors are moved by gradient descent on the contrastive term
//! alone, with no model in between.
//!
//! The default kernel is `exp_cosine`: with raw cosine the objective is
//! unbounded below as an anchor's normaliser approaches zero from above,
//! and plain gradient descent overshoots into the clamped region.
//!
//! Label groups: `a` = {0}, `b` = {1}, `mixed` = {0, 1} and, when the label
//! space has a third class, a disjoint group `c` = {2}.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::loss::{contrastive_loss, SimilarityKernel};
use crate::matrix::{dot, norm, Matrix};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub num_points: usize,
    pub label_dim: usize,
    pub embed_dim: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub kernel: SimilarityKernel,
    pub normalize_gamma: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            num_points: 12,
            label_dim: 3,
            embed_dim: 2,
            steps: 2000,
            lr: 0.05,
            seed: 0,
            kernel: SimilarityKernel::exp_cosine(1.0),
            normalize_gamma: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPoint {
    pub group: String,
    pub labels: LabelVector,
    pub initial: [f64; 2],
    pub fin: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub points: Vec<ToyPoint>,
    /// Largest pairwise angle (degrees) inside each group, before and after.
    pub initial_spread_deg: BTreeMap<String, f64>,
    pub final_spread_deg: BTreeMap<String, f64>,
    /// Mean pairwise cosine between the points of two groups, keyed `x/y`.
    pub initial_cross_cosine: BTreeMap<String, f64>,
    pub final_cross_cosine: BTreeMap<String, f64>,
    /// Direction (degrees in (-180, 180]) of each group's mean unit vector.
    pub final_direction_deg: BTreeMap<String, f64>,
    /// Whether the mixed group's direction lies strictly inside the short
    /// arc between groups `a` and `b`.
    pub mixed_between: bool,
    pub losses: Vec<f64>,
    pub decreasing_fraction: f64,
}

fn group_layout(label_dim: usize) -> Vec<(&'static str, Vec<usize>)> {
    let mut groups = vec![("a", vec![0]), ("b", vec![1]), ("mixed", vec![0, 1])];
    if label_dim >= 3 {
        groups.push(("c", vec![2]));
    }
    groups
}

fn angle_deg(u: &[f64], v: &[f64]) -> f64 {
    (dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos() * 180.0 / PI
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn spreads(x: &Matrix, members: &BTreeMap<String, Vec<usize>>) -> BTreeMap<String, f64> {
    members
        .iter()
        .map(|(g, idx)| {
            let mut worst: f64 = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                for &j in &idx[k + 1..] {
                    worst = worst.max(angle_deg(x.row(i), x.row(j)));
                }
            }
            (g.clone(), worst)
        })
        .collect()
}

fn cross_cosines(x: &Matrix, members: &BTreeMap<String, Vec<usize>>) -> BTreeMap<String, f64> {
    let names: Vec<&String> = members.keys().collect();
    let mut out = BTreeMap::new();
    for (k, g) in names.iter().enumerate() {
        for h in &names[k + 1..] {
            let (gi, hi) = (&members[*g], &members[*h]);
            let mut sum = 0.0;
            for &i in gi {
                for &j in hi {
                    sum += dot(x.row(i), x.row(j)) / (norm(x.row(i)) * norm(x.row(j)));
                }
            }
            out.insert(format!("{g}/{h}"), sum / (gi.len() * hi.len()) as f64);
        }
    }
    out
}

fn mean_direction(x: &Matrix, idx: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for &i in idx {
        for (a, b) in m.iter_mut().zip(unit(x.row(i))) {
            *a += b;
        }
    }
    m
}

pub fn toy_experiment(config: &ToyConfig) -> Result<ToyReport> {
    if config.embed_dim != 2 {
        return Err(Error::Argument(format!(
            "toy experiment is two-dimensional, got embed_dim {}",
            config.embed_dim
        )));
    }
    if !(2..=4).contains(&config.label_dim) {
        return Err(Error::Argument(format!(
            "toy label_dim must lie in 2..=4, got {}",
            config.label_dim
        )));
    }
    let layout = group_layout(config.label_dim);
    if config.num_points < 2 * layout.len() {
        return Err(Error::Argument(format!(
            "need at least {} points for {} groups",
            2 * layout.len(),
            layout.len()
        )));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::Argument(format!("learning rate must be positive, got {}", config.lr)));
    }

    let mut rng = seed::rng(config.seed);
    let mut labels = Vec::with_capacity(config.num_points);
    let mut group_of = Vec::with_capacity(config.num_points);
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in 0..config.num_points {
        let (name, active) = &layout[i % layout.len()];
        labels.push(LabelVector::from_active(config.label_dim, active)?);
        group_of.push(name.to_string());
        members.entry(name.to_string()).or_default().push(i);
    }
    let mut x = Matrix::zeros(config.num_points, 2);
    for i in 0..config.num_points {
        loop {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if norm(&p) >= 0.1 {
                x.row_mut(i).copy_from_slice(&p);
                break;
            }
        }
    }
    let initial = x.clone();

    let mut losses = Vec::with_capacity(config.steps + 1);
    for step in 0..=config.steps {
        let out = contrastive_loss(&x, &labels, &config.kernel, config.normalize_gamma)?;
        if !out.loss.is_finite() || !out.grad.all_finite() {
            return Err(Error::Diverged { step });
        }
        losses.push(out.loss);
        if step < config.steps {
            x.add_scaled(&out.grad, -config.lr)?;
            if !x.all_finite() {
                return Err(Error::Diverged { step });
            }
        }
    }
    // Non-increasing up to rounding once converged.
    let decreasing = losses
        .windows(2)
        .filter(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
        .count();
    let decreasing_fraction = if losses.len() > 1 {
        decreasing as f64 / (losses.len() - 1) as f64
    } else {
        1.0
    };

    let directions: BTreeMap<String, Vec<f64>> = members
        .iter()
        .map(|(g, idx)| (g.clone(), mean_direction(&x, idx)))
        .collect();
    let final_direction_deg = directions
        .iter()
        .map(|(g, d)| (g.clone(), d[1].atan2(d[0]) * 180.0 / PI))
        .collect();
    let mixed_between = {
        let (a, b, m) = (&directions["a"], &directions["b"], &directions["mixed"]);
        let (am, mb, ab) = (angle_deg(a, m), angle_deg(m, b), angle_deg(a, b));
        am > 0.0 && mb > 0.0 && ab < 180.0 && (am + mb - ab).abs() < 1e-6
    };

    let points = (0..config.num_points)
        .map(|i| ToyPoint {
            group: group_of[i].clone(),
            labels: labels[i].clone(),
            initial: [initial.get(i, 0), initial.get(i, 1)],
            fin: [x.get(i, 0), x.get(i, 1)],
        })
        .collect();

    Ok(ToyReport {
        points,
        initial_spread_deg: spreads(&initial, &members),
        final_spread_deg: spreads(&x, &members),
        initial_cross_cosine: cross_cosines(&initial, &members),
        final_cross_cosine: cross_cosines(&x, &members),
        final_direction_deg,
        mixed_between,
        losses,
        decreasing_fraction,
    })
}

impl ToyReport {
    /// CSV of `point_id,x0,y0,x1,y1,label_bits`.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["point_id", "x0", "y0", "x1", "y1", "label_bits"])?;
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([
                i.to_string(),
                p.initial[0].to_string(),
                p.initial[1].to_string(),
                p.fin[0].to_string(),
                p.fin[1].to_string(),
                p.labels.to_bit_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
