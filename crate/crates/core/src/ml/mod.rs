//! Classical classifiers and PCA, built from their defining algorithms.
//!
//! Each classifier has a typed parameter struct with a `fit` that returns an
//! immutable fitted model. [`MlModel`] wraps all five behind one string-keyed
//! hyperparameter surface for the grid search, the experiment harness, and
//! serialization.

pub mod forest;
pub mod gnb;
pub mod knn;
pub mod pca;
pub mod svm;
pub mod tree;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, SpectraDataset};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::matrix::Matrix;
use crate::seed::derive_seed;

pub use forest::{ForestModel, ForestParams, MaxFeatures};
pub use gnb::{GnbModel, GnbParams};
pub use knn::{KnnModel, KnnParams};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use svm::{Kernel, SvmModel, SvmParams};
pub use tree::{TreeModel, TreeParams};

/// The five classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlKind {
    Knn,
    Dtree,
    Rforest,
    Gnb,
    Svm,
}

impl MlKind {
    pub const ALL: [MlKind; 5] = [
        MlKind::Knn,
        MlKind::Dtree,
        MlKind::Rforest,
        MlKind::Gnb,
        MlKind::Svm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MlKind::Knn => "knn",
            MlKind::Dtree => "dtree",
            MlKind::Rforest => "rforest",
            MlKind::Gnb => "gnb",
            MlKind::Svm => "svm",
        }
    }

    pub fn parse(name: &str) -> Option<MlKind> {
        MlKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl core::fmt::Display for HyperValue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            HyperValue::Bool(v) => write!(f, "{v}"),
            HyperValue::Int(v) => write!(f, "{v}"),
            HyperValue::Float(v) => write!(f, "{v}"),
            HyperValue::Text(v) => write!(f, "{v}"),
        }
    }
}

pub type Hyperparams = BTreeMap<String, HyperValue>;

/// Typed readers over a [`Hyperparams`] map that reject unknown keys.
struct ParamReader<'a> {
    params: &'a Hyperparams,
    known: Vec<&'static str>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a Hyperparams) -> Self {
        Self {
            params,
            known: Vec::new(),
        }
    }

    fn int(&mut self, key: &'static str, default: i64) -> Result<i64> {
        self.known.push(key);
        match self.params.get(key) {
            None => Ok(default),
            Some(HyperValue::Int(v)) => Ok(*v),
            Some(_) => Err(Error::Invariant(alloc::format!(
                "hyperparameter {key:?} must be an integer"
            ))),
        }
    }

    fn float(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.known.push(key);
        match self.params.get(key) {
            None => Ok(default),
            Some(HyperValue::Float(v)) => Ok(*v),
            Some(HyperValue::Int(v)) => Ok(*v as f64),
            Some(_) => Err(Error::Invariant(alloc::format!(
                "hyperparameter {key:?} must be numeric"
            ))),
        }
    }

    fn bool(&mut self, key: &'static str, default: bool) -> Result<bool> {
        self.known.push(key);
        match self.params.get(key) {
            None => Ok(default),
            Some(HyperValue::Bool(v)) => Ok(*v),
            Some(HyperValue::Int(v)) => Ok(*v != 0),
            Some(_) => Err(Error::Invariant(alloc::format!(
                "hyperparameter {key:?} must be a boolean"
            ))),
        }
    }

    fn text(&mut self, key: &'static str, default: &str) -> Result<String> {
        self.known.push(key);
        match self.params.get(key) {
            None => Ok(default.to_string()),
            Some(HyperValue::Text(v)) => Ok(v.clone()),
            Some(_) => Err(Error::Invariant(alloc::format!(
                "hyperparameter {key:?} must be a string"
            ))),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.params.keys() {
            if !self.known.iter().any(|k| k == key) {
                return Err(Error::Invariant(alloc::format!(
                    "unknown hyperparameter {key:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Fitted state of any classifier kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FittedState {
    Knn(KnnModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Gnb(GnbModel),
    Svm(SvmModel),
}

/// Kind + hyperparameters + optional fitted state: the dynamic classifier
/// used by the grid search, the harness, and checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlModel {
    pub kind: MlKind,
    pub hyperparams: Hyperparams,
    pub state: Option<FittedState>,
}

impl MlModel {
    pub fn new(kind: MlKind, hyperparams: Hyperparams) -> Self {
        Self {
            kind,
            hyperparams,
            state: None,
        }
    }

    /// Trains on `x`/`y`, replacing any previous state.
    pub fn fit(&mut self, x: &Matrix, y: &[usize]) -> Result<()> {
        let state = match self.kind {
            MlKind::Knn => {
                let mut r = ParamReader::new(&self.hyperparams);
                let params = KnnParams {
                    k: r.int("k", 5)? as usize,
                    p: r.float("p", 2.0)?,
                };
                r.finish()?;
                FittedState::Knn(params.fit(x, y)?)
            }
            MlKind::Dtree => {
                let mut r = ParamReader::new(&self.hyperparams);
                let params = TreeParams {
                    min_leaf: r.int("min_leaf", 1)? as usize,
                    min_split: r.int("min_split", 2)? as usize,
                    max_depth: match r.int("max_depth", 0)? {
                        0 => None,
                        d => Some(d as usize),
                    },
                };
                r.finish()?;
                FittedState::Tree(params.fit(x, y)?)
            }
            MlKind::Rforest => {
                let mut r = ParamReader::new(&self.hyperparams);
                let max_features = match r.text("max_features", "sqrt")?.as_str() {
                    "sqrt" => MaxFeatures::Sqrt,
                    "all" => MaxFeatures::All,
                    other => {
                        return Err(Error::Invariant(alloc::format!(
                            "unknown max_features {other:?}"
                        )))
                    }
                };
                let params = ForestParams {
                    n_estimators: r.int("n_estimators", 50)? as usize,
                    tree: TreeParams {
                        min_leaf: r.int("min_leaf", 1)? as usize,
                        min_split: r.int("min_split", 2)? as usize,
                        max_depth: match r.int("max_depth", 0)? {
                            0 => None,
                            d => Some(d as usize),
                        },
                    },
                    bootstrap: r.bool("bootstrap", true)?,
                    max_features,
                    seed: r.int("seed", 0)? as u64,
                };
                r.finish()?;
                FittedState::Forest(params.fit(x, y)?)
            }
            MlKind::Gnb => {
                let mut r = ParamReader::new(&self.hyperparams);
                let params = GnbParams {
                    var_smoothing: r.float("var_smoothing", 1e-9)?,
                };
                r.finish()?;
                FittedState::Gnb(params.fit(x, y)?)
            }
            MlKind::Svm => {
                let mut r = ParamReader::new(&self.hyperparams);
                let c = r.float("c", 10.0)?;
                let gamma = r.float("gamma", 0.0)?; // 0 = auto (1 / n_features)
                let gamma = if gamma > 0.0 {
                    gamma
                } else {
                    1.0 / x.n_cols() as f64
                };
                let kernel = match r.text("kernel", "rbf")?.as_str() {
                    "linear" => Kernel::Linear,
                    "rbf" => Kernel::Rbf { gamma },
                    "poly" => Kernel::Poly {
                        gamma,
                        degree: r.int("degree", 3)? as u32,
                        coef0: r.float("coef0", 1.0)?,
                    },
                    other => {
                        return Err(Error::Invariant(alloc::format!(
                            "unknown kernel {other:?}"
                        )))
                    }
                };
                let params = SvmParams {
                    c,
                    kernel,
                    tol: r.float("tol", 1e-3)?,
                    max_passes: r.int("max_passes", 1000)? as usize,
                };
                r.finish()?;
                FittedState::Svm(params.fit(x, y)?)
            }
        };
        self.state = Some(state);
        Ok(())
    }

    /// Predicts class labels; errors if the model has not been fitted.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self.state.as_ref().ok_or(Error::Unfitted)? {
            FittedState::Knn(m) => m.predict(x),
            FittedState::Tree(m) => m.predict(x),
            FittedState::Forest(m) => m.predict(x),
            FittedState::Gnb(m) => m.predict(x),
            FittedState::Svm(m) => m.predict(x),
        }
    }

    pub fn n_classes(&self) -> Option<usize> {
        Some(match self.state.as_ref()? {
            FittedState::Knn(m) => m.n_classes(),
            FittedState::Tree(m) => m.n_classes(),
            FittedState::Forest(m) => m.n_classes(),
            FittedState::Gnb(m) => m.n_classes(),
            FittedState::Svm(m) => m.n_classes(),
        })
    }
}

/// Validates training inputs and returns the class count.
///
/// Labels must cover `0..K` with no gaps and `K >= 2`; features must be
/// finite; `x` and `y` must agree on the row count.
pub(crate) fn check_training_data(x: &Matrix, y: &[usize]) -> Result<usize> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    if x.n_rows() == 0 {
        return Err(Error::InvalidArgument("training set is empty"));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("training features"));
    }
    let k = y.iter().copied().max().unwrap_or(0) + 1;
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes"));
    }
    let mut seen = alloc::vec![false; k];
    for &label in y {
        seen[label] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::LabelOutOfRange {
            label: missing,
            classes: k,
        });
    }
    Ok(k)
}

pub(crate) fn check_predict_data(x: &Matrix, n_features: usize) -> Result<()> {
    if x.n_cols() != n_features {
        return Err(Error::LengthMismatch {
            left: x.n_cols(),
            right: n_features,
        });
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("prediction features"));
    }
    Ok(())
}

/// One evaluated lattice point of a hyperparameter sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: Hyperparams,
    /// Held-out accuracy; NaN when the fit failed.
    pub accuracy: f64,
}

/// Full sweep output plus the index of the best point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub kind: MlKind,
    pub rows: Vec<GridPoint>,
    pub best: Option<usize>,
}

/// Evaluates every point of a hyperparameter lattice on a stratified 80/20
/// split of `d`. Axes vary like nested loops with the last axis fastest.
/// Failed fits are recorded as NaN without aborting the sweep.
pub fn grid_search(
    kind: MlKind,
    grid: &[(String, Vec<HyperValue>)],
    d: &SpectraDataset,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() || grid.iter().any(|(_, values)| values.is_empty()) {
        return Err(Error::InvalidArgument("hyperparameter grid is empty"));
    }
    let split = stratified_split(d, &[0.8, 0.2], derive_seed(seed, &[0]))?;
    let train_x = d.rows().select_rows(&split.train);
    let train_y: Vec<usize> = split.train.iter().map(|&i| d.labels()[i]).collect();
    let test_x = d.rows().select_rows(&split.test);
    let test_y: Vec<usize> = split.test.iter().map(|&i| d.labels()[i]).collect();

    let total: usize = grid.iter().map(|(_, values)| values.len()).product();
    let mut rows = Vec::with_capacity(total);
    for flat in 0..total {
        let mut params = Hyperparams::new();
        let mut rest = flat;
        for (name, values) in grid.iter().rev() {
            params.insert(name.clone(), values[rest % values.len()].clone());
            rest /= values.len();
        }
        let mut model = MlModel::new(kind, params.clone());
        let accuracy = match model.fit(&train_x, &train_y) {
            Ok(()) => match model.predict(&test_x) {
                Ok(pred) => evaluate(&pred, &test_y, d.n_classes())?.accuracy,
                Err(_) => f64::NAN,
            },
            Err(_) => f64::NAN,
        };
        rows.push(GridPoint { params, accuracy });
    }
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, p)| p.accuracy.is_finite())
        .max_by(|a, b| {
            a.1.accuracy
                .partial_cmp(&b.1.accuracy)
                .unwrap()
                .then(b.0.cmp(&a.0))
        })
        .map(|(i, _)| i);
    Ok(GridSearchResult { kind, rows, best })
}
