//! CIFAR-10 binary loader, synthetic data and per-feature standardisation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;

use crate::error::{DataError, Result};
use crate::linalg::Vector;
use crate::rng::{gaussian_vector, seeded};

pub const CIFAR_PIXELS: usize = 3072;
pub const CIFAR_RECORD: usize = 1 + CIFAR_PIXELS;
pub const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vector>,
    pub labels: Vec<usize>,
    pub feature_dim: usize,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` samples and the rest.
    pub fn split(mut self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let rest = Dataset {
            features: self.features.split_off(n),
            labels: self.labels.split_off(n),
            feature_dim: self.feature_dim,
            n_classes: self.n_classes,
        };
        (self, rest)
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(DataError::Empty.into());
        }
        Ok(())
    }
}

/// Per-feature mean and standard deviation of a training set.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub mean: Vector,
    pub std: Vector,
}

/// Deviations below this are treated as a constant feature and left unscaled.
const MIN_STD: f64 = 1e-12;

impl Standardization {
    pub fn fit(data: &Dataset) -> Result<Self> {
        data.ensure_non_empty()?;
        let d = data.feature_dim;
        let n = data.len() as f64;
        let mut mean = Vector::zeros(d);
        for x in &data.features {
            mean.axpy(1.0, x);
        }
        mean.scale_mut(1.0 / n);
        let mut var = Vector::zeros(d);
        for x in &data.features {
            for ((v, xi), mi) in var.iter_mut().zip(x.iter()).zip(mean.iter()) {
                *v += (xi - mi) * (xi - mi);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < MIN_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, data: &mut Dataset) {
        for x in &mut data.features {
            for ((xi, m), s) in x.iter_mut().zip(self.mean.iter()).zip(self.std.iter()) {
                *xi = (*xi - m) / s;
            }
        }
    }
}

/// Parses one CIFAR-10 batch: records of one label byte and 3072 pixel bytes.
pub fn parse_cifar_batch<'a>(bytes: &'a [u8], path: &Path) -> Result<Vec<(u8, &'a [u8])>> {
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(DataError::CorruptBatch { path: path.to_path_buf(), len: bytes.len(), record: CIFAR_RECORD }.into());
    }
    Ok(bytes.chunks_exact(CIFAR_RECORD).map(|r| (r[0], &r[1..])).collect())
}

fn to_features(pixels: &[u8]) -> Vector {
    pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
}

fn read_split(dir: &Path, files: &[&str], subset: Option<usize>, seed: u64, stream: u64) -> Result<Dataset> {
    let mut raw = Vec::new();
    for f in files {
        let p = dir.join(f);
        let bytes = fs::read(&p)?;
        raw.push(bytes);
    }
    let records: Vec<(u8, &[u8])> = raw
        .iter()
        .zip(files)
        .map(|(b, f)| parse_cifar_batch(b, &dir.join(f)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let picked: Vec<usize> = match subset {
        Some(k) if k > records.len() => {
            return Err(DataError::SubsetTooLarge { requested: k, available: records.len() }.into())
        }
        Some(k) => {
            let mut rng = seeded(seed, stream);
            let mut idx = sample(&mut rng, records.len(), k).into_vec();
            idx.sort_unstable();
            idx
        }
        None => (0..records.len()).collect(),
    };
    let mut ds = Dataset { feature_dim: CIFAR_PIXELS, n_classes: 10, ..Default::default() };
    for i in picked {
        let (label, px) = records[i];
        ds.labels.push(usize::from(label));
        ds.features.push(to_features(px));
    }
    Ok(ds)
}

/// Lists the standard CIFAR-10 batch files missing from `dir`.
pub fn missing_cifar_files(dir: &Path) -> Vec<PathBuf> {
    CIFAR_TRAIN_FILES
        .iter()
        .chain(std::iter::once(&CIFAR_TEST_FILE))
        .map(|f| dir.join(f))
        .filter(|p| !p.is_file())
        .collect()
}

/// Loads the train/test splits, optionally subsampled with a seed, and
/// standardises both with statistics of the (subsampled) training split.
pub fn load_cifar10(
    dir: &Path,
    train_subset: Option<usize>,
    test_subset: Option<usize>,
    seed: u64,
) -> Result<(Dataset, Dataset, Standardization)> {
    let missing = missing_cifar_files(dir);
    if !missing.is_empty() {
        return Err(DataError::MissingFiles(missing).into());
    }
    let mut train = read_split(dir, &CIFAR_TRAIN_FILES, train_subset, seed, 1)?;
    let mut test = read_split(dir, &[CIFAR_TEST_FILE], test_subset, seed, 2)?;
    let stats = Standardization::fit(&train)?;
    stats.apply(&mut train);
    stats.apply(&mut test);
    Ok((train, test, stats))
}

/// Class-conditional isotropic Gaussians with unit noise around seeded means
/// drawn with standard deviation `separation`. Labels cycle through the classes.
pub fn synthetic_gaussian_with(n_samples: usize, dim: usize, n_classes: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n_classes < 2 {
        return Err(crate::Error::InvalidArgument("synthetic data needs at least two classes".into()));
    }
    let mut rng = seeded(seed, 0xda7a);
    let means: Vec<Vector> = (0..n_classes).map(|_| gaussian_vector(&mut rng, dim, separation)).collect();
    let mut ds = Dataset { feature_dim: dim, n_classes, ..Default::default() };
    for i in 0..n_samples {
        let c = i % n_classes;
        let mut x = gaussian_vector(&mut rng, dim, 1.0);
        x.axpy(1.0, &means[c]);
        ds.features.push(x);
        ds.labels.push(c);
    }
    Ok(ds)
}

pub fn synthetic_gaussian(n_samples: usize, dim: usize, n_classes: usize, seed: u64) -> Result<Dataset> {
    synthetic_gaussian_with(n_samples, dim, n_classes, 2.0, seed)
}
