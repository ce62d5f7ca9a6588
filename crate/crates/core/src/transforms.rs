//! Problem transformations over the logistic base learner: binary relevance,
//! greedy classifier chains and a stacked meta-BR layer.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::base_learner::{train_logistic, LinearModel, TrainConfig};
use crate::data::{check_permutation, Dataset};
use crate::error::{Error, Result};
use crate::methods::MultiLabelModel;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Appends binary columns to a feature matrix.
pub(crate) fn hstack_bits(x: ArrayView2<f64>, bits: ArrayView2<u8>) -> Array2<f64> {
    concatenate(Axis(1), &[x, bits.mapv(f64::from).view()]).expect("row counts agree")
}

/// One independent binary model per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRModel {
    pub models: Vec<LinearModel>,
    pub input_dim: usize,
}

impl BRModel {
    pub fn n_labels(&self) -> usize {
        self.models.len()
    }

    /// Per-label probabilities for one input.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        self.models.iter().map(|m| m.predict_proba(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        check_dim(self.input_dim, x.len())?;
        Ok(self.models.iter().map(|m| m.predict_bit_unchecked(x)).collect())
    }

    pub fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        check_dim(self.input_dim, x.ncols())?;
        let mut out = Array2::zeros((x.nrows(), self.n_labels()));
        for (j, m) in self.models.iter().enumerate() {
            let a = m.activations(x)?;
            out.column_mut(j).assign(&a.mapv(|a| u8::from(a >= 0.0)));
        }
        Ok(out)
    }
}

pub fn train_br(dataset: &Dataset, config: &TrainConfig) -> Result<BRModel> {
    train_br_on(dataset.x.view(), dataset.y.view(), config)
}

pub(crate) fn train_br_on(
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    config: &TrainConfig,
) -> Result<BRModel> {
    if x.nrows() == 0 {
        return Err(Error::EmptyData("dataset has no rows"));
    }
    let models = y
        .columns()
        .into_iter()
        .map(|col| train_logistic(x, col, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(BRModel {
        models,
        input_dim: x.ncols(),
    })
}

pub fn predict_br(model: &BRModel, x: &[f64]) -> Result<Vec<u8>> {
    model.predict(x)
}

/// A greedy classifier chain. Position `j` predicts label `label_order[j]`
/// from the input and the labels at positions `0..j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CCModel {
    pub models: Vec<LinearModel>,
    pub label_order: Vec<usize>,
    pub input_dim: usize,
}

impl CCModel {
    pub fn n_labels(&self) -> usize {
        self.models.len()
    }

    /// Greedy chain prediction in original label indexing.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        self.predict_given(x, &[])
    }

    /// Chain prediction with the first `prefix.len()` positions fixed to
    /// `prefix` instead of predicted.
    pub fn predict_given(&self, x: &[f64], prefix: &[u8]) -> Result<Vec<u8>> {
        check_dim(self.input_dim, x.len())?;
        if prefix.len() > self.n_labels() {
            return Err(Error::DimensionMismatch {
                expected: self.n_labels(),
                got: prefix.len(),
            });
        }
        let mut features = Vec::with_capacity(self.input_dim + self.n_labels());
        features.extend_from_slice(x);
        let mut out = vec![0u8; self.n_labels()];
        for (pos, (model, &label)) in self.models.iter().zip(&self.label_order).enumerate() {
            debug_assert_eq!(model.input_dim(), features.len());
            let bit = match prefix.get(pos) {
                Some(&b) => b,
                None => model.predict_bit_unchecked(&features),
            };
            out[label] = bit;
            features.push(f64::from(bit));
        }
        Ok(out)
    }

    /// Row-wise [`CCModel::predict`]; rows are independent.
    pub fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        self.predict_matrix_given(x, Array2::<u8>::zeros((x.nrows(), 0)).view())
    }

    /// Row-wise [`CCModel::predict_given`].
    pub fn predict_matrix_given(&self, x: ArrayView2<f64>, prefix: ArrayView2<u8>) -> Result<Array2<u8>> {
        check_dim(self.input_dim, x.ncols())?;
        if prefix.nrows() != x.nrows() || prefix.ncols() > self.n_labels() {
            return Err(Error::DimensionMismatch {
                expected: self.n_labels(),
                got: prefix.ncols(),
            });
        }
        let n = x.nrows();
        let mut features = Array2::<f64>::zeros((n, self.input_dim + self.n_labels()));
        features.slice_mut(s![.., ..self.input_dim]).assign(&x);
        let mut out = Array2::zeros((n, self.n_labels()));
        for (pos, (model, &label)) in self.models.iter().zip(&self.label_order).enumerate() {
            let width = self.input_dim + pos;
            let bits: Array1<u8> = if pos < prefix.ncols() {
                prefix.column(pos).to_owned()
            } else {
                model
                    .activations(features.slice(s![.., ..width]))?
                    .mapv(|a| u8::from(a >= 0.0))
            };
            features.column_mut(width).assign(&bits.mapv(f64::from));
            out.column_mut(label).assign(&bits);
        }
        Ok(out)
    }
}

/// Trains a chain. Chain features during training are the true labels.
pub fn train_cc(dataset: &Dataset, label_order: &[usize], config: &TrainConfig) -> Result<CCModel> {
    train_cc_on(dataset.x.view(), dataset.y.view(), label_order, config)
}

pub(crate) fn train_cc_on(
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    label_order: &[usize],
    config: &TrainConfig,
) -> Result<CCModel> {
    check_permutation(label_order, y.ncols())?;
    if x.nrows() == 0 {
        return Err(Error::EmptyData("dataset has no rows"));
    }
    let ordered = y.select(Axis(1), label_order);
    let features = hstack_bits(x, ordered.view());
    let d = x.ncols();
    let models = (0..label_order.len())
        .map(|pos| train_logistic(features.slice(s![.., ..d + pos]), ordered.column(pos), config))
        .collect::<Result<Vec<_>>>()?;
    Ok(CCModel {
        models,
        label_order: label_order.to_vec(),
        input_dim: d,
    })
}

pub fn predict_cc(model: &CCModel, x: &[f64]) -> Result<Vec<u8>> {
    model.predict(x)
}

/// A first-layer model whose predictions, together with the input, feed a
/// meta-BR layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub first_layer: Box<MultiLabelModel>,
    pub meta: BRModel,
}

impl StackedModel {
    pub fn input_dim(&self) -> usize {
        self.first_layer.input_dim()
    }

    pub fn n_labels(&self) -> usize {
        self.meta.n_labels()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        let first = self.first_layer.predict(x)?;
        let mut features = x.to_vec();
        features.extend(first.iter().map(|&b| f64::from(b)));
        self.meta.predict(&features)
    }

    pub fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<u8>> {
        let first = self.first_layer.predict_matrix(x)?;
        self.meta.predict_matrix(hstack_bits(x, first.view()).view())
    }
}

/// Trains `first_layer_trainer` on the data, then a meta-BR on
/// `[x, first-layer training predictions]` against the original labels.
pub fn train_stack<F>(dataset: &Dataset, first_layer_trainer: F, config: &TrainConfig) -> Result<StackedModel>
where
    F: FnOnce(&Dataset) -> Result<MultiLabelModel>,
{
    if dataset.n_rows() == 0 {
        return Err(Error::EmptyData("dataset has no rows"));
    }
    let first = first_layer_trainer(dataset)?;
    stack_on(first, dataset.x.view(), dataset.y.view(), config)
}

pub(crate) fn stack_on(
    first: MultiLabelModel,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    config: &TrainConfig,
) -> Result<StackedModel> {
    let first_pred = first.predict_matrix(x)?;
    let meta = train_br_on(hstack_bits(x, first_pred.view()).view(), y, config)?;
    Ok(StackedModel {
        first_layer: Box::new(first),
        meta,
    })
}

pub fn predict_stack(model: &StackedModel, x: &[f64]) -> Result<Vec<u8>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_learner::predict_bits;
    use crate::data::gen_logical;
    use crate::eval::exact_match_matrices;
    use ndarray::array;
    use proptest::prelude::*;

    fn cfg() -> TrainConfig {
        TrainConfig::default()
    }

    #[test]
    fn single_label_br_matches_base_learner() {
        let d = gen_logical(12).unwrap();
        let single = Dataset::new(d.x.clone(), d.y.slice(s![.., 1..2]).to_owned()).unwrap();
        let br = train_br(&single, &cfg()).unwrap();
        let lr = train_logistic(single.x.view(), single.y.column(0), &cfg()).unwrap();
        let direct = predict_bits(&lr, single.x.view()).unwrap();
        for (row, &bit) in single.x.rows().into_iter().zip(&direct) {
            assert_eq!(predict_br(&br, row.as_slice().unwrap()).unwrap(), vec![bit]);
        }
    }

    #[test]
    fn br_on_logical_per_label_accuracy() {
        let d = gen_logical(20).unwrap();
        let br = train_br(&d, &cfg()).unwrap();
        let pred = br.predict_matrix(d.x.view()).unwrap();
        let acc = |j: usize| {
            pred.column(j).iter().zip(d.y.column(j)).filter(|(a, b)| a == b).count() as f64 / 20.0
        };
        assert_eq!(acc(0), 1.0);
        assert_eq!(acc(1), 1.0);
        assert!(acc(2) <= 0.75);
    }

    #[test]
    fn predict_br_dim_one_cases() {
        let br = BRModel {
            models: vec![
                LinearModel::new(vec![0.0, 0.0]).unwrap(),
                LinearModel::new(vec![-0.04, 0.0]).unwrap(),
                LinearModel::new(vec![0.04, 0.0]).unwrap(),
            ],
            input_dim: 1,
        };
        assert_eq!(br.predict(&[3.0]).unwrap(), vec![1, 0, 1]);
        assert!(matches!(br.predict(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chain_order_decides_xor() {
        let d = gen_logical(20).unwrap();
        let good = train_cc(&d, &[0, 1, 2], &cfg()).unwrap();
        let pred = good.predict_matrix(d.x.view()).unwrap();
        assert_eq!(exact_match_matrices(&d.y, &pred).unwrap(), 1.0);
        // Every one of the four input combinations reproduces its truth.
        for i in 0..4 {
            assert_eq!(good.predict(d.x.row(i).as_slice().unwrap()).unwrap(), d.y.row(i).to_vec());
        }

        let bad = train_cc(&d, &[2, 1, 0], &cfg()).unwrap();
        let pred = bad.predict_matrix(d.x.view()).unwrap();
        assert_eq!(exact_match_matrices(&d.y, &pred).unwrap(), 0.5);
    }

    #[test]
    fn chain_rejects_bad_order() {
        let d = gen_logical(8).unwrap();
        assert!(matches!(train_cc(&d, &[0, 1], &cfg()), Err(Error::InvalidPermutation(_))));
        assert!(matches!(train_cc(&d, &[0, 1, 1], &cfg()), Err(Error::InvalidPermutation(_))));
    }

    #[test]
    fn constant_zero_chain_predicts_zeros() {
        let cc = CCModel {
            models: (0..3).map(|j| LinearModel::new({
                let mut w = vec![-1.0];
                w.extend(std::iter::repeat_n(0.0, 2 + j));
                w
            }).unwrap()).collect(),
            label_order: vec![2, 0, 1],
            input_dim: 2,
        };
        for x in [[0.0, 0.0], [5.0, -3.0], [100.0, 100.0]] {
            assert_eq!(predict_cc(&cc, &x).unwrap(), vec![0, 0, 0]);
        }
    }

    #[test]
    fn chain_positions_consume_growing_inputs() {
        let d = gen_logical(8).unwrap();
        let cc = train_cc(&d, &[1, 2, 0], &cfg()).unwrap();
        for (pos, m) in cc.models.iter().enumerate() {
            assert_eq!(m.input_dim(), 2 + pos);
        }
    }

    #[test]
    fn single_label_br_cc_and_trivial_stack_agree() {
        let d = gen_logical(20).unwrap();
        let single = Dataset::new(d.x.clone(), d.y.slice(s![.., 0..1]).to_owned()).unwrap();
        let br = train_br(&single, &cfg()).unwrap();
        let cc = train_cc(&single, &[0], &cfg()).unwrap();
        // A first layer that always outputs 0 adds a column the meta layer
        // cannot use, so the meta model equals plain BR.
        let stack = train_stack(&single, |_| Ok(constant_zero_br(2, 1)), &cfg()).unwrap();
        for row in single.x.rows() {
            let row = row.as_slice().unwrap();
            let p = br.predict(row).unwrap();
            assert_eq!(cc.predict(row).unwrap(), p);
            assert_eq!(stack.predict(row).unwrap(), p);
        }
    }

    fn constant_zero_br(d: usize, l: usize) -> MultiLabelModel {
        let mut w = vec![-5.0];
        w.extend(std::iter::repeat_n(0.0, d));
        MultiLabelModel::Br(BRModel {
            models: vec![LinearModel::new(w).unwrap(); l],
            input_dim: d,
        })
    }

    #[test]
    fn constant_first_layer_matches_plain_br() {
        let d = gen_logical(20).unwrap();
        let br = train_br(&d, &cfg()).unwrap();
        let stack = train_stack(&d, |_| Ok(constant_zero_br(2, 3)), &cfg()).unwrap();
        assert_eq!(stack.meta.input_dim, 5);
        let a = br.predict_matrix(d.x.view()).unwrap();
        let b = stack.predict_matrix(d.x.view()).unwrap();
        assert_eq!(
            exact_match_matrices(&d.y, &a).unwrap(),
            exact_match_matrices(&d.y, &b).unwrap()
        );
    }

    #[test]
    fn perfect_first_layer_gives_perfect_stack() {
        let d = gen_logical(20).unwrap();
        let stack = train_stack(
            &d,
            |data| Ok(MultiLabelModel::Cc(train_cc(data, &[0, 1, 2], &cfg())?)),
            &cfg(),
        )
        .unwrap();
        let pred = stack.predict_matrix(d.x.view()).unwrap();
        assert_eq!(exact_match_matrices(&d.y, &pred).unwrap(), 1.0);
        for row in d.x.rows() {
            let row = row.as_slice().unwrap();
            assert_eq!(predict_stack(&stack, row).unwrap().len(), 3);
        }
    }

    #[test]
    fn stack_rejects_wrong_dims() {
        let d = gen_logical(8).unwrap();
        let stack = train_stack(&d, |_| Ok(constant_zero_br(2, 3)), &cfg()).unwrap();
        assert!(stack.predict(&[1.0]).is_err());
    }

    #[test]
    fn matrix_and_row_prediction_agree() {
        let d = gen_logical(20).unwrap();
        let cc = train_cc(&d, &[2, 0, 1], &cfg()).unwrap();
        let m = cc.predict_matrix(d.x.view()).unwrap();
        for (i, row) in d.x.rows().into_iter().enumerate() {
            assert_eq!(cc.predict(row.as_slice().unwrap()).unwrap(), m.row(i).to_vec());
        }
        let x = array![[0.3, -0.2]];
        assert_eq!(cc.predict_matrix(x.view()).unwrap().row(0).to_vec(), cc.predict(&[0.3, -0.2]).unwrap());
    }

    proptest! {
        #[test]
        fn relabeling_permutes_br_predictions(
            weights in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 4),
            x in proptest::collection::vec(-3.0f64..3.0, 2),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let models: Vec<LinearModel> = weights.into_iter().map(|w| LinearModel::new(w).unwrap()).collect();
            let br = BRModel { models: models.clone(), input_dim: 2 };
            let permuted = BRModel { models: perm.iter().map(|&j| models[j].clone()).collect(), input_dim: 2 };
            let p = br.predict(&x).unwrap();
            let q = permuted.predict(&x).unwrap();
            for (j, &src) in perm.iter().enumerate() {
                prop_assert_eq!(q[j], p[src]);
            }
        }
    }
}
