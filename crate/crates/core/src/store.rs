//! Model populations ("bundles") and the uniform weight-averaging primitive.
//!
//! A bundle directory holds:
//!
//! - `manifest.json`: architecture/generator metadata, split sizes and order,
//!   trial/environment identifiers, seeds, and per-model metadata.
//! - `models/<id>.wts`: `b"SOUP"`, format version (`u32` LE), parameter
//!   count `L` (`u64` LE), then `L` little-endian `f32` values.
//! - `models/<id>.corr`: per-example correctness bits, one packed byte run per
//!   split (LSB-first), splits concatenated in manifest order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WEIGHT_MAGIC: &[u8; 4] = b"SOUP";
pub const WEIGHT_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;
const ACCURACY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("empty ingredient set")]
    EmptyIngredients,
    #[error("incompatible shapes: expected {expected} parameters, found {found}")]
    IncompatibleShapes { expected: usize, found: usize },
    #[error("weight vector must be non-empty")]
    EmptyWeights,
    #[error("non-finite weight at index {0}")]
    NonFinite(usize),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: bad magic", .0.display())]
    BadMagic(PathBuf),
    #[error("{}: unsupported format version {version}", path.display())]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("{}: length mismatch: expected {expected}, found {found}", path.display())]
    LengthMismatch { path: PathBuf, expected: usize, found: usize },
    #[error("model {id}: accuracy inconsistent with correctness (recorded {recorded}, recomputed {recomputed})")]
    AccuracyInconsistent { id: u32, recorded: f64, recomputed: f64 },
    #[error("{}: malformed manifest: {source}", path.display())]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| {
        if source.kind() == io::ErrorKind::NotFound {
            StoreError::MissingFile(path.to_path_buf())
        } else {
            StoreError::Io { path: path.to_path_buf(), source }
        }
    }
}

/// Flat parameter vector of one model or weight-average.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f32>);

impl WeightVector {
    pub fn new(values: Vec<f32>) -> Result<Self, StoreError> {
        if values.is_empty() {
            return Err(StoreError::EmptyWeights);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

/// Uniform (unweighted) element-wise mean, accumulated in `f64`.
pub fn average_weights<'a, I>(members: I) -> Result<WeightVector, StoreError>
where
    I: IntoIterator<Item = &'a WeightVector>,
{
    let mut iter = members.into_iter();
    let first = iter.next().ok_or(StoreError::EmptyIngredients)?;
    let dim = first.dim();
    let mut acc: Vec<f64> = first.0.iter().map(|&v| f64::from(v)).collect();
    let mut count = 1usize;
    for member in iter {
        if member.dim() != dim {
            return Err(StoreError::IncompatibleShapes { expected: dim, found: member.dim() });
        }
        for (a, &v) in acc.iter_mut().zip(&member.0) {
            *a += f64::from(v);
        }
        count += 1;
    }
    let n = count as f64;
    Ok(WeightVector(acc.into_iter().map(|a| (a / n) as f32).collect()))
}

/// Data split on which per-example correctness is recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    IdVal,
    OodTest,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::IdVal, Split::OodTest];

    pub fn name(self) -> &'static str {
        match self {
            Split::IdVal => "id_val",
            Split::OodTest => "ood_test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-example correctness on one split (`true` = classified correctly).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CorrectBits(BitVec<u8, Lsb0>);

impl CorrectBits {
    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Self(bits.into_iter().collect())
    }

    /// Rebuilds from packed LSB-first bytes holding exactly `len` bits.
    pub fn from_packed(bytes: &[u8], len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut bits = BitVec::<u8, Lsb0>::from_slice(bytes);
        bits.truncate(len);
        Some(Self(bits))
    }

    /// Packed LSB-first bytes; trailing pad bits are zero.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut bits = self.0.clone();
        bits.set_uninitialized(false);
        bits.into_vec()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().by_vals()
    }

    pub fn count_correct(&self) -> usize {
        self.0.count_ones()
    }

    pub fn count_incorrect(&self) -> usize {
        self.0.count_zeros()
    }

    /// Fraction correct; 0 for an empty split.
    pub fn accuracy(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.count_correct() as f64 / self.len() as f64
        }
    }

    /// Examples where exactly one of the two is wrong, and where both are.
    pub fn error_overlap(&self, other: &Self) -> Option<(usize, usize)> {
        if self.len() != other.len() {
            return None;
        }
        let mut differ = self.0.clone();
        differ ^= other.0.as_bitslice();
        let mut either_right = self.0.clone();
        either_right |= other.0.as_bitslice();
        Some((differ.count_ones(), either_right.count_zeros()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_packed())
    }
}

#[derive(Serialize, Deserialize)]
struct PackedBitsRepr {
    len: usize,
    hex: String,
}

impl Serialize for CorrectBits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PackedBitsRepr { len: self.len(), hex: self.to_hex() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrectBits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PackedBitsRepr::deserialize(d)?;
        let bytes = hex::decode(&repr.hex).map_err(serde::de::Error::custom)?;
        CorrectBits::from_packed(&bytes, repr.len)
            .ok_or_else(|| serde::de::Error::custom("packed bit length does not match declared length"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessRecord {
    pub id_val: CorrectBits,
    pub ood_test: CorrectBits,
}

impl CorrectnessRecord {
    pub fn split(&self, split: Split) -> &CorrectBits {
        match split {
            Split::IdVal => &self.id_val,
            Split::OodTest => &self.ood_test,
        }
    }
}

/// One candidate ingredient.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelEntry {
    pub id: u32,
    pub weights: WeightVector,
    pub correctness: CorrectnessRecord,
    pub hyperparams: BTreeMap<String, f64>,
    pub id_val_accuracy: f64,
}

impl ModelEntry {
    /// Builds an entry whose recorded accuracy is derived from its correctness bits.
    pub fn new(
        id: u32,
        weights: WeightVector,
        correctness: CorrectnessRecord,
        hyperparams: BTreeMap<String, f64>,
    ) -> Self {
        let id_val_accuracy = correctness.id_val.accuracy();
        Self { id, weights, correctness, hyperparams, id_val_accuracy }
    }

    pub fn ood_accuracy(&self) -> f64 {
        self.correctness.ood_test.accuracy()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub id_val: usize,
    pub ood_test: usize,
}

impl SplitSizes {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::IdVal => self.id_val,
            Split::OodTest => self.ood_test,
        }
    }
}

/// Bundle-level metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// Parameter count `L` shared by every model.
    pub dim: usize,
    pub split_order: Vec<Split>,
    pub split_sizes: SplitSizes,
    pub trial: u32,
    pub environment: u32,
    pub seeds: BTreeMap<String, u64>,
    /// Generator-specific description (architecture, domains, fine-tuning ranges).
    #[serde(default)]
    pub generator: serde_json::Value,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl Manifest {
    pub fn new(dim: usize, split_sizes: SplitSizes) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            dim,
            split_order: Split::ALL.to_vec(),
            split_sizes,
            trial: 0,
            environment: 0,
            seeds: BTreeMap::new(),
            generator: serde_json::Value::Null,
            config_hash: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub manifest: Manifest,
    pub models: Vec<ModelEntry>,
}

impl Bundle {
    pub fn model(&self, id: u32) -> Option<&ModelEntry> {
        // ids are contiguous from 1
        self.models.get((id as usize).checked_sub(1)?).filter(|m| m.id == id)
    }

    /// Checks every bundle invariant.
    pub fn validate(&self) -> Result<(), StoreError> {
        let m = &self.manifest;
        if m.dim == 0 {
            return Err(StoreError::Invariant("parameter count must be positive".into()));
        }
        let mut order = m.split_order.clone();
        order.sort();
        if order != Split::ALL {
            return Err(StoreError::Invariant("split order must list each split exactly once".into()));
        }
        for (i, model) in self.models.iter().enumerate() {
            let expected_id = i as u32 + 1;
            if model.id != expected_id {
                return Err(StoreError::Invariant(format!(
                    "model ids must be contiguous from 1: position {i} holds id {}",
                    model.id
                )));
            }
            if model.weights.dim() != m.dim {
                return Err(StoreError::IncompatibleShapes { expected: m.dim, found: model.weights.dim() });
            }
            for split in Split::ALL {
                let len = model.correctness.split(split).len();
                if len != m.split_sizes.get(split) {
                    return Err(StoreError::Invariant(format!(
                        "model {}: {split} correctness has {len} entries, manifest declares {}",
                        model.id,
                        m.split_sizes.get(split)
                    )));
                }
            }
            let recomputed = model.correctness.id_val.accuracy();
            if (recomputed - model.id_val_accuracy).abs() > ACCURACY_TOLERANCE {
                return Err(StoreError::AccuracyInconsistent {
                    id: model.id,
                    recorded: model.id_val_accuracy,
                    recomputed,
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    id: u32,
    id_val_accuracy: f64,
    hyperparams: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    bundle: Manifest,
    models: Vec<ModelMeta>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn weight_path(dir: &Path, id: u32) -> PathBuf {
    dir.join("models").join(format!("{id}.wts"))
}

pub fn correctness_path(dir: &Path, id: u32) -> PathBuf {
    dir.join("models").join(format!("{id}.corr"))
}

pub fn encode_weights(weights: &WeightVector) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 4 * weights.dim());
    buf.extend_from_slice(WEIGHT_MAGIC);
    buf.extend_from_slice(&WEIGHT_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(weights.dim() as u64).to_le_bytes());
    for v in weights.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_weights(bytes: &[u8], expected_dim: usize, path: &Path) -> Result<WeightVector, StoreError> {
    if bytes.len() < 4 || &bytes[..4] != WEIGHT_MAGIC {
        return Err(StoreError::BadMagic(path.to_path_buf()));
    }
    let header = |range: std::ops::Range<usize>| {
        bytes.get(range).ok_or_else(|| StoreError::LengthMismatch {
            path: path.to_path_buf(),
            expected: 16,
            found: bytes.len(),
        })
    };
    let version = u32::from_le_bytes(header(4..8)?.try_into().unwrap());
    if version != WEIGHT_FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion { path: path.to_path_buf(), version });
    }
    let declared = u64::from_le_bytes(header(8..16)?.try_into().unwrap()) as usize;
    let payload = &bytes[16..];
    let held = payload.len() / 4;
    if declared != expected_dim || !payload.len().is_multiple_of(4) || held != declared {
        let found = if declared != expected_dim { declared } else { held };
        return Err(StoreError::LengthMismatch { path: path.to_path_buf(), expected: expected_dim, found });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    WeightVector::new(values)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::write(path, bytes).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })
}

pub fn save_bundle(bundle: &Bundle, dir: &Path) -> Result<(), StoreError> {
    let models_dir = dir.join("models");
    fs::create_dir_all(&models_dir)
        .map_err(|source| StoreError::Io { path: models_dir.clone(), source })?;
    let file = ManifestFile {
        bundle: bundle.manifest.clone(),
        models: bundle
            .models
            .iter()
            .map(|m| ModelMeta { id: m.id, id_val_accuracy: m.id_val_accuracy, hyperparams: m.hyperparams.clone() })
            .collect(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|source| StoreError::Manifest { path: manifest_path.clone(), source })?;
    text.push('\n');
    write_file(&manifest_path, text.as_bytes())?;

    for model in &bundle.models {
        write_file(&weight_path(dir, model.id), &encode_weights(&model.weights))?;
        let mut corr = Vec::new();
        for &split in &bundle.manifest.split_order {
            corr.extend(model.correctness.split(split).to_packed());
        }
        write_file(&correctness_path(dir, model.id), &corr)?;
    }
    Ok(())
}

/// Reads only `manifest.json`, without model payloads.
pub fn load_manifest(dir: &Path) -> Result<Manifest, StoreError> {
    Ok(read_manifest_file(dir)?.bundle)
}

fn read_manifest_file(dir: &Path) -> Result<ManifestFile, StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| StoreError::Manifest { path, source })
}

pub fn load_bundle(dir: &Path) -> Result<Bundle, StoreError> {
    let file = read_manifest_file(dir)?;
    let manifest = file.bundle;
    if manifest.format_version != MANIFEST_FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion {
            path: dir.join(MANIFEST_FILE),
            version: manifest.format_version,
        });
    }
    let mut models = Vec::with_capacity(file.models.len());
    for meta in file.models {
        let wpath = weight_path(dir, meta.id);
        let bytes = fs::read(&wpath).map_err(io_err(&wpath))?;
        let weights = decode_weights(&bytes, manifest.dim, &wpath)?;

        let cpath = correctness_path(dir, meta.id);
        let bytes = fs::read(&cpath).map_err(io_err(&cpath))?;
        let expected: usize = manifest
            .split_order
            .iter()
            .map(|&s| manifest.split_sizes.get(s).div_ceil(8))
            .sum();
        if bytes.len() != expected {
            return Err(StoreError::LengthMismatch { path: cpath, expected, found: bytes.len() });
        }
        let mut correctness = CorrectnessRecord::default();
        let mut offset = 0;
        for &split in &manifest.split_order {
            let len = manifest.split_sizes.get(split);
            let nbytes = len.div_ceil(8);
            let bits = CorrectBits::from_packed(&bytes[offset..offset + nbytes], len)
                .expect("byte count checked above");
            offset += nbytes;
            match split {
                Split::IdVal => correctness.id_val = bits,
                Split::OodTest => correctness.ood_test = bits,
            }
        }
        models.push(ModelEntry {
            id: meta.id,
            weights,
            correctness,
            hyperparams: meta.hyperparams,
            id_val_accuracy: meta.id_val_accuracy,
        });
    }
    let bundle = Bundle { manifest, models };
    bundle.validate()?;
    Ok(bundle)
}
