//! The composite multi-label methods and their uniform train/predict
//! contract.
//!
//! | kind        | structure                                                        |
//! |-------------|------------------------------------------------------------------|
//! | `BR`        | one logistic model per label                                     |
//! | `CC`        | greedy chain over the labels in dataset column order             |
//! | `CCASL`     | chain over `[z_1..z_H, y_1..y_L]`, `z` from a TLU cascade         |
//! | `CCASL+BR`  | CCASL, then a meta-BR on `[x, ŷ]`                                 |
//! | `CCASL+AML` | chain over `[z_1..z_H, φ_1..φ_H']`, then a meta-BR on `[x, ẑ, φ̂]` |
//! | `ELM+BR`    | BR on `[x, z]`, `z` from a flat random projection                 |

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::base_learner::TrainConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::synth_nodes::{
    init_cascade, init_projection, sample_indicators, LabelIndicatorSet, RandomProjection, TLUCascade,
};
use crate::transforms::{
    hstack_bits, stack_on, train_br_on, train_cc_on, BRModel, CCModel, StackedModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "BR")]
    Br,
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "CCASL")]
    Ccasl,
    #[serde(rename = "CCASL_BR")]
    CcaslBr,
    #[serde(rename = "CCASL_AML")]
    CcaslAml,
    #[serde(rename = "ELM_BR")]
    ElmBr,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Br,
        MethodKind::Cc,
        MethodKind::Ccasl,
        MethodKind::CcaslBr,
        MethodKind::CcaslAml,
        MethodKind::ElmBr,
    ];

    /// Short column heading used in report tables.
    pub fn short_name(self) -> &'static str {
        match self {
            MethodKind::Br => "BR",
            MethodKind::Cc => "CC",
            MethodKind::Ccasl => "CCASL",
            MethodKind::CcaslBr => "C.+BR",
            MethodKind::CcaslAml => "C.+AML",
            MethodKind::ElmBr => "ELM",
        }
    }

    /// Name accepted on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            MethodKind::Br => "br",
            MethodKind::Cc => "cc",
            MethodKind::Ccasl => "ccasl",
            MethodKind::CcaslBr => "ccasl+br",
            MethodKind::CcaslAml => "ccasl+aml",
            MethodKind::ElmBr => "elm",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        MethodKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == key || k.short_name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "elm+br" | "elm_br" => Some(MethodKind::ElmBr),
                "ccasl_br" | "ccasl+mbr" => Some(MethodKind::CcaslBr),
                "ccasl_aml" => Some(MethodKind::CcaslAml),
                _ => None,
            })
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method {s:?}; expected one of br, cc, ccasl, ccasl+br, ccasl+aml, elm"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    /// Synthetic feature-space labels. `None` means L (2L for ELM+BR).
    pub h: Option<usize>,
    /// Label-space meta-labels for CCASL+AML. `None` means 2L.
    pub h_prime: Option<usize>,
    /// Labels per meta-label subset, capped at L.
    pub subset_size: usize,
    pub base: TrainConfig,
    pub seed: u64,
    /// Compute ẑ from the stored cascade at prediction time instead of
    /// predicting it with the chain.
    pub cascade_at_predict: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            h: None,
            h_prime: None,
            subset_size: 3,
            base: TrainConfig::default(),
            seed: 1,
            cascade_at_predict: false,
        }
    }
}

impl MethodConfig {
    fn hidden_units(&self, kind: MethodKind, n_labels: usize) -> usize {
        self.h.unwrap_or(match kind {
            MethodKind::ElmBr => 2 * n_labels,
            _ => n_labels,
        })
    }

    fn meta_labels(&self, n_labels: usize) -> usize {
        self.h_prime.unwrap_or(2 * n_labels)
    }
}

/// CCASL: a chain whose first `H` positions are synthetic labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaslModel {
    pub cascade: TLUCascade,
    /// Chain over `H + L` positions in identity order.
    pub chain: CCModel,
    pub n_labels: usize,
    pub cascade_at_predict: bool,
}

impl CcaslModel {
    fn n_synthetic(&self) -> usize {
        self.cascade.n_units()
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        let h = self.n_synthetic();
        if self.cascade_at_predict {
            let z = self.cascade.apply(x)?;
            let all = self.chain.predict_given(x, &z)?;
            Ok(all[h..].to_vec())
        } else {
            Ok(self.chain.predict(x)?[h..].to_vec())
        }
    }

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        let h = self.n_synthetic();
        let all = if self.cascade_at_predict {
            let z = self.cascade.apply_matrix(x)?;
            self.chain.predict_matrix_given(x, z.view())?
        } else {
            self.chain.predict_matrix(x)?
        };
        Ok(all.slice(s![.., h..]).to_owned())
    }
}

/// CCASL+AML: a chain over synthetic feature-space and label-space nodes
/// followed by a BR output layer over `[x, ẑ, φ̂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmlModel {
    pub cascade: TLUCascade,
    pub indicators: LabelIndicatorSet,
    /// Chain over `H + H'` positions in identity order.
    pub chain: CCModel,
    pub output: BRModel,
    pub cascade_at_predict: bool,
}

impl AmlModel {
    fn middle_layer(&self, x: &[f64]) -> Result<Vec<u8>> {
        if self.cascade_at_predict {
            let z = self.cascade.apply(x)?;
            self.chain.predict_given(x, &z)
        } else {
            self.chain.predict(x)
        }
    }

    fn middle_layer_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        if self.cascade_at_predict {
            let z = self.cascade.apply_matrix(x)?;
            self.chain.predict_matrix_given(x, z.view())
        } else {
            self.chain.predict_matrix(x)
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        let middle = self.middle_layer(x)?;
        let mut features = x.to_vec();
        features.extend(middle.iter().map(|&b| f64::from(b)));
        self.output.predict(&features)
    }

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        let middle = self.middle_layer_matrix(x)?;
        self.output.predict_matrix(hstack_bits(x, middle.view()).view())
    }
}

/// ELM+BR: BR over the input and a fixed random projection of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    pub projection: RandomProjection,
    pub br: BRModel,
}

impl ElmModel {
    fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        let z = self.projection.apply(x)?;
        let mut features = x.to_vec();
        features.extend(z.iter().map(|&b| f64::from(b)));
        self.br.predict(&features)
    }

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        let z = self.projection.apply_matrix(x)?;
        self.br.predict_matrix(hstack_bits(x, z.view()).view())
    }
}

/// A trained multi-label classifier of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model")]
pub enum MultiLabelModel {
    #[serde(rename = "BR")]
    Br(BRModel),
    #[serde(rename = "CC")]
    Cc(CCModel),
    #[serde(rename = "CCASL")]
    Ccasl(CcaslModel),
    #[serde(rename = "CCASL_BR")]
    CcaslBr(StackedModel),
    #[serde(rename = "CCASL_AML")]
    CcaslAml(AmlModel),
    #[serde(rename = "ELM_BR")]
    ElmBr(ElmModel),
}

impl MultiLabelModel {
    pub fn kind(&self) -> MethodKind {
        match self {
            MultiLabelModel::Br(_) => MethodKind::Br,
            MultiLabelModel::Cc(_) => MethodKind::Cc,
            MultiLabelModel::Ccasl(_) => MethodKind::Ccasl,
            MultiLabelModel::CcaslBr(_) => MethodKind::CcaslBr,
            MultiLabelModel::CcaslAml(_) => MethodKind::CcaslAml,
            MultiLabelModel::ElmBr(_) => MethodKind::ElmBr,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            MultiLabelModel::Br(m) => m.input_dim,
            MultiLabelModel::Cc(m) => m.input_dim,
            MultiLabelModel::Ccasl(m) => m.chain.input_dim,
            MultiLabelModel::CcaslBr(m) => m.input_dim(),
            MultiLabelModel::CcaslAml(m) => m.chain.input_dim,
            MultiLabelModel::ElmBr(m) => m.projection.input_dim,
        }
    }

    pub fn n_labels(&self) -> usize {
        match self {
            MultiLabelModel::Br(m) => m.n_labels(),
            MultiLabelModel::Cc(m) => m.n_labels(),
            MultiLabelModel::Ccasl(m) => m.n_labels,
            MultiLabelModel::CcaslBr(m) => m.n_labels(),
            MultiLabelModel::CcaslAml(m) => m.output.n_labels(),
            MultiLabelModel::ElmBr(m) => m.br.n_labels(),
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        let expected = self.input_dim();
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// Length-L prediction in the training label order.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        self.check_dim(x.len())?;
        match self {
            MultiLabelModel::Br(m) => m.predict(x),
            MultiLabelModel::Cc(m) => m.predict(x),
            MultiLabelModel::Ccasl(m) => m.predict(x),
            MultiLabelModel::CcaslBr(m) => m.predict(x),
            MultiLabelModel::CcaslAml(m) => m.predict(x),
            MultiLabelModel::ElmBr(m) => m.predict(x),
        }
    }

    /// N×L predictions, row by row identical to [`MultiLabelModel::predict`].
    pub fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        self.check_dim(x.ncols())?;
        match self {
            MultiLabelModel::Br(m) => m.predict_matrix(x),
            MultiLabelModel::Cc(m) => m.predict_matrix(x),
            MultiLabelModel::Ccasl(m) => m.predict_matrix(x),
            MultiLabelModel::CcaslBr(m) => m.predict_matrix(x),
            MultiLabelModel::CcaslAml(m) => m.predict_matrix(x),
            MultiLabelModel::ElmBr(m) => m.predict_matrix(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn predict(model: &MultiLabelModel, x: &[f64]) -> Result<Vec<u8>> {
    model.predict(x)
}

fn check_nonempty(dataset: &Dataset) -> Result<()> {
    if dataset.n_rows() == 0 {
        return Err(Error::EmptyData("dataset has no rows"));
    }
    Ok(())
}

fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn concat_labels(a: ArrayView2<u8>, b: ArrayView2<u8>) -> Array2<u8> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("row counts agree")
}

pub fn train_ccasl_model(dataset: &Dataset, cfg: &MethodConfig) -> Result<CcaslModel> {
    check_nonempty(dataset)?;
    let l = dataset.n_labels();
    let h = cfg.hidden_units(MethodKind::Ccasl, l);
    let cascade = init_cascade(dataset.x.view(), h, cfg.seed)?;
    let z = cascade.apply_matrix(dataset.x.view())?;
    let targets = concat_labels(z.view(), dataset.y.view());
    let chain = train_cc_on(dataset.x.view(), targets.view(), &identity(h + l), &cfg.base)?;
    Ok(CcaslModel {
        cascade,
        chain,
        n_labels: l,
        cascade_at_predict: cfg.cascade_at_predict,
    })
}

pub fn train_ccasl(dataset: &Dataset, cfg: &MethodConfig) -> Result<MultiLabelModel> {
    train_ccasl_model(dataset, cfg).map(MultiLabelModel::Ccasl)
}

pub fn train_ccasl_br(dataset: &Dataset, cfg: &MethodConfig) -> Result<MultiLabelModel> {
    let first = train_ccasl(dataset, cfg)?;
    let stacked = stack_on(first, dataset.x.view(), dataset.y.view(), &cfg.base)?;
    Ok(MultiLabelModel::CcaslBr(stacked))
}

pub fn train_ccasl_aml_model(dataset: &Dataset, cfg: &MethodConfig) -> Result<AmlModel> {
    check_nonempty(dataset)?;
    let l = dataset.n_labels();
    let h = cfg.hidden_units(MethodKind::CcaslAml, l);
    let h_prime = cfg.meta_labels(l);
    let cascade = init_cascade(dataset.x.view(), h, cfg.seed)?;
    let indicators = sample_indicators(
        dataset.y.view(),
        h_prime,
        cfg.subset_size.min(l),
        derive_seed(cfg.seed, &[1]),
    )?;
    let z = cascade.apply_matrix(dataset.x.view())?;
    let phi = indicators.apply_matrix(dataset.y.view())?;
    let targets = concat_labels(z.view(), phi.view());
    let chain = train_cc_on(dataset.x.view(), targets.view(), &identity(h + h_prime), &cfg.base)?;
    let mut model = AmlModel {
        cascade,
        indicators,
        chain,
        output: BRModel {
            models: Vec::new(),
            input_dim: 0,
        },
        cascade_at_predict: cfg.cascade_at_predict,
    };
    let middle = model.middle_layer_matrix(dataset.x.view())?;
    model.output = train_br_on(
        hstack_bits(dataset.x.view(), middle.view()).view(),
        dataset.y.view(),
        &cfg.base,
    )?;
    Ok(model)
}

pub fn train_ccasl_aml(dataset: &Dataset, cfg: &MethodConfig) -> Result<MultiLabelModel> {
    train_ccasl_aml_model(dataset, cfg).map(MultiLabelModel::CcaslAml)
}

pub fn train_elm_br(dataset: &Dataset, cfg: &MethodConfig) -> Result<MultiLabelModel> {
    check_nonempty(dataset)?;
    let h = cfg.hidden_units(MethodKind::ElmBr, dataset.n_labels());
    let projection = init_projection(dataset.x.view(), h, cfg.seed)?;
    let z = projection.apply_matrix(dataset.x.view())?;
    let br = train_br_on(
        hstack_bits(dataset.x.view(), z.view()).view(),
        dataset.y.view(),
        &cfg.base,
    )?;
    Ok(MultiLabelModel::ElmBr(ElmModel { projection, br }))
}

/// Trains any method. BR and CC use only `cfg.base`; CC chains the labels in
/// dataset column order.
pub fn train(kind: MethodKind, dataset: &Dataset, cfg: &MethodConfig) -> Result<MultiLabelModel> {
    check_nonempty(dataset)?;
    match kind {
        MethodKind::Br => train_br_on(dataset.x.view(), dataset.y.view(), &cfg.base).map(MultiLabelModel::Br),
        MethodKind::Cc => train_cc_on(
            dataset.x.view(),
            dataset.y.view(),
            &identity(dataset.n_labels()),
            &cfg.base,
        )
        .map(MultiLabelModel::Cc),
        MethodKind::Ccasl => train_ccasl(dataset, cfg),
        MethodKind::CcaslBr => train_ccasl_br(dataset, cfg),
        MethodKind::CcaslAml => train_ccasl_aml(dataset, cfg),
        MethodKind::ElmBr => train_elm_br(dataset, cfg),
    }
}
