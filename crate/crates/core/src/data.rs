//! Samples, label vectors, label-distance weights and the dataset file format.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The 14 media-frame categories used as the default taxonomy.
pub const MEDIA_FRAMES: [&str; 14] = [
    "Economic",
    "Capacity_and_resources",
    "Morality",
    "Fairness_and_equality",
    "Legality_Constitutionality_and_jurisprudence",
    "Policy_prescription_and_evaluation",
    "Crime_and_punishment",
    "Security_and_defense",
    "Health_and_safety",
    "Quality_of_life",
    "Cultural_identity",
    "Public_opinion",
    "Political",
    "External_regulation_and_reputation",
];

pub fn default_class_names(num_classes: usize) -> Vec<String> {
    if num_classes == MEDIA_FRAMES.len() {
        MEDIA_FRAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..num_classes).map(|c| format!("class_{c}")).collect()
    }
}

/// Dense multi-hot label vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct LabelVector(Vec<u8>);

impl LabelVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Argument(format!("label bit must be 0 or 1, got {b}")));
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn from_active(len: usize, active: &[usize]) -> Result<Self> {
        let mut bits = vec![0; len];
        for &c in active {
            *bits
                .get_mut(c)
                .ok_or_else(|| Error::Argument(format!("class {c} out of range for {len} classes")))? = 1;
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn has(&self, class: usize) -> bool {
        self.0[class] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(c, _)| c)
    }

    pub fn set(&mut self, class: usize) {
        self.0[class] = 1;
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    /// Bit string such as `101`, used in CSV exports.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }
}

impl TryFrom<Vec<u8>> for LabelVector {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<LabelVector> for Vec<u8> {
    fn from(v: LabelVector) -> Self {
        v.0
    }
}

fn check_lengths(y1: &LabelVector, y2: &LabelVector) -> Result<()> {
    if y1.len() != y2.len() {
        return Err(Error::Dimension(format!(
            "label vectors have lengths {} and {}",
            y1.len(),
            y2.len()
        )));
    }
    Ok(())
}

pub fn hamming_distance(y1: &LabelVector, y2: &LabelVector) -> Result<usize> {
    check_lengths(y1, y2)?;
    Ok(y1.0.iter().zip(&y2.0).filter(|(a, b)| a != b).count())
}

/// Attraction weight `1 - d / |C|`.
pub fn sigma_weight(y1: &LabelVector, y2: &LabelVector, num_classes: usize) -> Result<f64> {
    if y1.len() != num_classes {
        return Err(Error::Dimension(format!(
            "label vector has length {}, expected {num_classes}",
            y1.len()
        )));
    }
    let d = hamming_distance(y1, y2)?;
    Ok(1.0 - d as f64 / num_classes as f64)
}

/// Repulsion weight: the raw Hamming distance.
pub fn gamma_weight(y1: &LabelVector, y2: &LabelVector) -> Result<f64> {
    Ok(hamming_distance(y1, y2)? as f64)
}

/// Both label-distance weights for one pair of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelWeights {
    pub sigma: f64,
    pub gamma: f64,
}

impl LabelWeights {
    pub fn between(y1: &LabelVector, y2: &LabelVector) -> Result<Self> {
        let d = hamming_distance(y1, y2)? as f64;
        Ok(Self {
            sigma: 1.0 - d / y1.len() as f64,
            gamma: d,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Argument(format!("unknown split '{other}'"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub lang: String,
    pub split: Split,
    pub labels: LabelVector,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    num_classes: usize,
    embed_dim: usize,
    class_names: Vec<String>,
}

/// Immutable, validated collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_classes: usize,
    embed_dim: usize,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        num_classes: usize,
        embed_dim: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        validate_header(num_classes, embed_dim, &class_names).map_err(Error::Argument)?;
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            validate_sample(s, num_classes, embed_dim).map_err(Error::Argument)?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Argument(format!("duplicate sample id '{}'", s.id)));
            }
        }
        Ok(Self {
            samples,
            num_classes,
            embed_dim,
            class_names,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Indices of samples in `split`, optionally restricted to `langs`.
    pub fn indices(&self, split: Split, langs: Option<&[String]>) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.split == split)
            .filter(|(_, s)| langs.is_none_or(|ls| ls.contains(&s.lang)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Sorted distinct languages present in `split`.
    pub fn languages(&self, split: Split) -> Vec<String> {
        self.samples
            .iter()
            .filter(|s| s.split == split)
            .map(|s| s.lang.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn embeddings(&self, indices: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(indices.len(), self.embed_dim);
        for (r, &i) in indices.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&self.samples[i].embedding);
        }
        m
    }

    pub fn labels(&self, indices: &[usize]) -> Vec<LabelVector> {
        indices.iter().map(|&i| self.samples[i].labels.clone()).collect()
    }

    pub fn label_matrix(&self, indices: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(indices.len(), self.num_classes);
        for (r, &i) in indices.iter().enumerate() {
            for c in self.samples[i].labels.active() {
                m.set(r, c, 1.0);
            }
        }
        m
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_dataset(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_dataset(self, path)
    }
}

fn validate_header(num_classes: usize, embed_dim: usize, class_names: &[String]) -> std::result::Result<(), String> {
    if num_classes == 0 {
        return Err("num_classes must be at least 1".into());
    }
    if embed_dim == 0 {
        return Err("embed_dim must be at least 1".into());
    }
    if class_names.len() != num_classes {
        return Err(format!(
            "{} class names declared for {num_classes} classes",
            class_names.len()
        ));
    }
    Ok(())
}

fn validate_sample(s: &Sample, num_classes: usize, embed_dim: usize) -> std::result::Result<(), String> {
    if s.labels.len() != num_classes {
        return Err(format!(
            "label length mismatch: sample '{}' has {} labels, expected {num_classes}",
            s.id,
            s.labels.len()
        ));
    }
    if s.embedding.len() != embed_dim {
        return Err(format!(
            "embedding length mismatch: sample '{}' has {} values, expected {embed_dim}",
            s.id,
            s.embedding.len()
        ));
    }
    if s.embedding.iter().any(|v| !v.is_finite()) {
        return Err(format!("non-finite embedding value in sample '{}'", s.id));
    }
    Ok(())
}

/// Sample line whose embedding may contain `null` where the source had a
/// non-finite token.
#[derive(Deserialize)]
struct LenientSample {
    id: String,
    embedding: Vec<Option<f64>>,
}

/// Replaces bare `NaN` / `Infinity` tokens outside of strings with `null`.
fn nullify_non_finite(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(ch) = rest.chars().next() {
        if in_string {
            out.push(ch);
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            rest = &rest[ch.len_utf8()..];
            continue;
        }
        if ch == '"' {
            in_string = true;
        }
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t));
        match token {
            Some(t) => {
                out.push_str("null");
                rest = &rest[t.len()..];
            }
            None => {
                out.push(ch);
                rest = &rest[ch.len_utf8()..];
            }
        }
    }
    out
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let load_err = |line: usize, message: String| Error::Load {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(load_err(1, "missing header line".into())),
            Some((_, line)) if line.as_ref().is_ok_and(|l| l.trim().is_empty()) => continue,
            Some((n, line)) => {
                break serde_json::from_str(&line?)
                    .map_err(|e| load_err(n + 1, format!("invalid header: {e}")))?
            }
        }
    };
    validate_header(header.num_classes, header.embed_dim, &header.class_names)
        .map_err(|m| load_err(1, m))?;

    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in lines {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = match serde_json::from_str(&line) {
            Ok(s) => s,
            Err(e) => {
                if let Ok(lenient) = serde_json::from_str::<LenientSample>(&nullify_non_finite(&line)) {
                    if lenient.embedding.iter().any(Option::is_none) {
                        return Err(load_err(
                            lineno,
                            format!("non-finite embedding value in sample '{}'", lenient.id),
                        ));
                    }
                }
                return Err(load_err(lineno, format!("malformed sample: {e}")));
            }
        };
        validate_sample(&sample, header.num_classes, header.embed_dim).map_err(|m| load_err(lineno, m))?;
        if !seen.insert(sample.id.clone()) {
            return Err(load_err(lineno, format!("duplicate sample id '{}'", sample.id)));
        }
        samples.push(sample);
    }

    Ok(Dataset {
        samples,
        num_classes: header.num_classes,
        embed_dim: header.embed_dim,
        class_names: header.class_names,
    })
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset<W: Write>(dataset: &Dataset, w: &mut W) -> Result<()> {
    let header = Header {
        num_classes: dataset.num_classes,
        embed_dim: dataset.embed_dim,
        class_names: dataset.class_names.clone(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for s in &dataset.samples {
        serde_json::to_writer(&mut *w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
