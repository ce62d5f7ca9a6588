//! Synthetic label nodes.
//!
//! * [`TLUCascade`]: threshold linear units where unit `k` reads the input
//!   and the outputs of units `1..k`.
//! * [`RandomProjection`]: the same units without cascading.
//! * [`LabelIndicatorSet`]: label-space meta-labels, each firing when a label
//!   subset takes one particular value combination.
//!
//! Random draws use a ChaCha8 stream seeded by the caller. For each unit in
//! turn we draw its weight row (Gaussian, std [`WEIGHT_STD`]), then its mask
//! row (Bernoulli with keep probability [`MASK_KEEP`]), then one standard
//! normal for its threshold. Unit `k` is therefore independent of how many
//! units follow it, and a cascade of `H` units is a prefix of any longer
//! cascade built from the same seed and data.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{population_std, shifted_mean};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, Rng as SeededRng};

pub const WEIGHT_STD: f64 = 0.2;
pub const MASK_KEEP: f64 = 0.9;
/// Threshold noise, as a fraction of the activation standard deviation.
pub const THRESHOLD_SPREAD: f64 = 0.1;

/// One threshold unit: weights over its inputs and a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdUnit {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl ThresholdUnit {
    fn activation(&self, inputs: &[f64]) -> f64 {
        self.weights.iter().zip(inputs).map(|(w, v)| w * v).sum()
    }

    fn fire(&self, inputs: &[f64]) -> u8 {
        u8::from(self.activation(inputs) > self.threshold)
    }
}

/// Draws a masked weight row and fits the threshold to the activations the
/// row produces on `inputs` (N × row length). Returns the unit and its
/// outputs on `inputs`.
fn draw_unit(rng: &mut SeededRng, inputs: ArrayView2<f64>) -> (ThresholdUnit, Array1<u8>) {
    let len = inputs.ncols();
    let normal = Normal::new(0.0, WEIGHT_STD).expect("valid std");
    let raw: Vec<f64> = (0..len).map(|_| normal.sample(rng)).collect();
    let keep = Bernoulli::new(MASK_KEEP).expect("valid probability");
    let weights: Vec<f64> = raw
        .into_iter()
        .map(|w| if keep.sample(rng) { w } else { 0.0 })
        .collect();
    let noise: f64 = rng.sample(StandardNormal);

    let activations = inputs.dot(&Array1::from(weights.clone()));
    let mean = shifted_mean(activations.view());
    let std = population_std(activations.view(), mean);
    let threshold = mean + THRESHOLD_SPREAD * std * noise;
    let outputs = activations.mapv(|a| u8::from(a > threshold));
    (ThresholdUnit { weights, threshold }, outputs)
}

/// Cascaded threshold units; unit `k` (0-based) has `d + k` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TLUCascade {
    pub input_dim: usize,
    pub seed: u64,
    pub units: Vec<ThresholdUnit>,
}

impl TLUCascade {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<u8>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut inputs = x.to_vec();
        let mut z = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            let bit = unit.fire(&inputs);
            z.push(bit);
            inputs.push(f64::from(bit));
        }
        Ok(z)
    }

    /// N×H outputs for every row of `x`.
    pub fn apply_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let mut out = Array2::zeros((x.nrows(), self.units.len()));
        for (i, row) in x.rows().into_iter().enumerate() {
            let z = self.apply(&row.to_vec())?;
            out.row_mut(i).assign(&Array1::from(z));
        }
        Ok(out)
    }
}

/// Builds an `h`-unit cascade whose thresholds are fitted on `train_x`.
pub fn init_cascade(train_x: ArrayView2<f64>, h: usize, seed: u64) -> Result<TLUCascade> {
    if train_x.nrows() == 0 {
        return Err(Error::EmptyData("cascade needs training rows"));
    }
    let n = train_x.nrows();
    let d = train_x.ncols();
    let mut rng = rng_from_seed(seed);
    let mut inputs = Array2::<f64>::zeros((n, d + h));
    inputs.slice_mut(ndarray::s![.., ..d]).assign(&train_x);
    let mut units = Vec::with_capacity(h);
    for k in 0..h {
        let (unit, z) = draw_unit(&mut rng, inputs.slice(ndarray::s![.., ..d + k]));
        inputs.column_mut(d + k).assign(&z.mapv(f64::from));
        units.push(unit);
    }
    Ok(TLUCascade {
        input_dim: d,
        seed,
        units,
    })
}

pub fn apply_cascade(cascade: &TLUCascade, x: &[f64]) -> Result<Vec<u8>> {
    cascade.apply(x)
}

/// Independent threshold units over the input only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomProjection {
    pub input_dim: usize,
    pub seed: u64,
    pub units: Vec<ThresholdUnit>,
}

impl RandomProjection {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<u8>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(self.units.iter().map(|u| u.fire(x)).collect())
    }

    pub fn apply_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let mut out = Array2::zeros((x.nrows(), self.units.len()));
        for (k, unit) in self.units.iter().enumerate() {
            let a = x.dot(&Array1::from(unit.weights.clone()));
            out.column_mut(k).assign(&a.mapv(|a| u8::from(a > unit.threshold)));
        }
        Ok(out)
    }
}

pub fn init_projection(train_x: ArrayView2<f64>, h: usize, seed: u64) -> Result<RandomProjection> {
    if train_x.nrows() == 0 {
        return Err(Error::EmptyData("projection needs training rows"));
    }
    let mut rng = rng_from_seed(seed);
    let units = (0..h).map(|_| draw_unit(&mut rng, train_x).0).collect();
    Ok(RandomProjection {
        input_dim: train_x.ncols(),
        seed,
        units,
    })
}

pub fn apply_projection(projection: &RandomProjection, x: &[f64]) -> Result<Vec<u8>> {
    projection.apply(x)
}

/// Reads bits as a binary number, leftmost bit most significant.
pub fn int_encode(bits: &[u8]) -> Result<u64> {
    if bits.is_empty() {
        return Err(Error::EmptyData("cannot encode an empty bit sequence"));
    }
    if bits.len() > 64 {
        return Err(Error::InvalidConfig(format!(
            "at most 64 bits can be encoded, got {}",
            bits.len()
        )));
    }
    Ok(bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b & 1)))
}

/// One label-space meta-label: fires when the labels at `subset` encode to
/// `code`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelIndicator {
    /// Strictly increasing 0-based label indices.
    pub subset: Vec<usize>,
    pub code: u64,
}

impl LabelIndicator {
    pub fn new(subset: Vec<usize>, code: u64) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::EmptyData("indicator subset is empty"));
        }
        if subset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "indicator subset {subset:?} is not strictly increasing"
            )));
        }
        if subset.len() < 64 && code >> subset.len() != 0 {
            return Err(Error::InvalidConfig(format!(
                "code {code} does not fit in {} bits",
                subset.len()
            )));
        }
        Ok(LabelIndicator { subset, code })
    }

    fn encode(&self, y: &[u8]) -> Result<u64> {
        let bits = self
            .subset
            .iter()
            .map(|&j| {
                y.get(j)
                    .copied()
                    .ok_or(Error::IndexOutOfRange { index: j, len: y.len() })
            })
            .collect::<Result<Vec<u8>>>()?;
        int_encode(&bits)
    }

    pub fn fire(&self, y: &[u8]) -> Result<u8> {
        Ok(u8::from(self.encode(y)? == self.code))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelIndicatorSet {
    pub n_labels: usize,
    pub entries: Vec<LabelIndicator>,
}

impl LabelIndicatorSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn apply(&self, y: &[u8]) -> Result<Vec<u8>> {
        self.entries.iter().map(|e| e.fire(y)).collect()
    }

    pub fn apply_matrix(&self, y: ArrayView2<u8>) -> Result<Array2<u8>> {
        let mut out = Array2::zeros((y.nrows(), self.entries.len()));
        for (i, row) in y.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&Array1::from(self.apply(&row.to_vec())?));
        }
        Ok(out)
    }
}

/// Samples `h_prime` indicators. Each subset is drawn uniformly without
/// replacement; its code is drawn from the combinations observed on that
/// subset in `train_y`. Codes for a repeated subset are dealt from a
/// shuffled pool of its observed combinations, refilled when exhausted, so
/// repeats cover every observed combination before any code recurs.
pub fn sample_indicators(
    train_y: ArrayView2<u8>,
    h_prime: usize,
    subset_size: usize,
    seed: u64,
) -> Result<LabelIndicatorSet> {
    let l = train_y.ncols();
    if train_y.nrows() == 0 {
        return Err(Error::EmptyData("indicators need training rows"));
    }
    if subset_size == 0 || subset_size > l {
        return Err(Error::InvalidConfig(format!(
            "subset size must lie in 1..={l}, got {subset_size}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut pools: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    let mut entries = Vec::with_capacity(h_prime);
    for _ in 0..h_prime {
        let mut subset = index::sample(&mut rng, l, subset_size).into_vec();
        subset.sort_unstable();
        let pool = pools.entry(subset.clone()).or_default();
        if pool.is_empty() {
            let observed: BTreeSet<u64> = train_y
                .rows()
                .into_iter()
                .map(|row| {
                    let bits: Vec<u8> = subset.iter().map(|&j| row[j]).collect();
                    int_encode(&bits)
                })
                .collect::<Result<_>>()?;
            pool.extend(observed);
            pool.shuffle(&mut rng);
        }
        let code = pool.pop().expect("pool refilled above");
        entries.push(LabelIndicator::new(subset, code)?);
    }
    Ok(LabelIndicatorSet { n_labels: l, entries })
}

pub fn apply_indicators(set: &LabelIndicatorSet, y: &[u8]) -> Result<Vec<u8>> {
    set.apply(y)
}
