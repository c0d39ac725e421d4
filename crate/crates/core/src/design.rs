//! Design-matrix construction: standardization, binary and categorical
//! coding, and enumeration of admissible two-way interactions.
//!
//! Continuous covariates are centered and scaled with population statistics
//! (denominator `n`). Binary covariates map the lexicographically smaller raw
//! label to −1 and the other to +1. A categorical covariate with `L` levels
//! expands into `L − 1` sum-to-zero contrast columns: level `l < L − 1` is +1
//! on column `l` and 0 elsewhere, the last level is −1 on every column.
//! Interactions are all column pairs `(j, k)`, `j < k`, in row-major order,
//! except pairs that fall inside the same categorical group.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw values of one covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Continuous(Vec<f64>),
    Binary(Vec<String>),
    /// `levels` fixes the label set and its order; observed labels are sorted
    /// lexicographically when it is `None`.
    Categorical {
        values: Vec<String>,
        levels: Option<Vec<String>>,
    },
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Continuous(v) => v.len(),
            ColumnValues::Binary(v) => v.len(),
            ColumnValues::Categorical { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind_name(&self) -> &'static str {
        match self {
            ColumnValues::Continuous(_) => "continuous",
            ColumnValues::Binary(_) => "binary",
            ColumnValues::Categorical { .. } => "categorical",
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Continuous(v) => ColumnValues::Continuous(rows.iter().map(|&i| v[i]).collect()),
            ColumnValues::Binary(v) => ColumnValues::Binary(rows.iter().map(|&i| v[i].clone()).collect()),
            ColumnValues::Categorical { values, levels } => ColumnValues::Categorical {
                values: rows.iter().map(|&i| values[i].clone()).collect(),
                levels: levels.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: ColumnValues,
}

impl RawColumn {
    pub fn continuous(name: &str, values: Vec<f64>) -> Self {
        Self { name: name.to_string(), values: ColumnValues::Continuous(values) }
    }

    pub fn binary<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.to_string(),
            values: ColumnValues::Binary(values.into_iter().map(Into::into).collect()),
        }
    }

    pub fn categorical<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.to_string(),
            values: ColumnValues::Categorical {
                values: values.into_iter().map(Into::into).collect(),
                levels: None,
            },
        }
    }
}

/// A tabular dataset of covariates plus a continuous response.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    columns: Vec<RawColumn>,
    response_name: String,
    response: Vec<f64>,
}

impl RawDataset {
    pub fn new(columns: Vec<RawColumn>, response_name: &str, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::Shape(format!(
                    "column `{}` has {} rows, response has {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.name == response_name {
                return Err(Error::Schema(format!("`{}` is both a covariate and the response", c.name)));
            }
        }
        Ok(Self { columns, response_name: response_name.to_string(), response })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn select_rows(&self, rows: &[usize]) -> RawDataset {
        RawDataset {
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn { name: c.name.clone(), values: c.values.select(rows) })
                .collect(),
            response_name: self.response_name.clone(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
        }
    }
}

/// How one covariate is turned into design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    Continuous { center: f64, scale: f64 },
    Binary { low: String, high: String },
    Categorical { levels: Vec<String> },
}

impl Encoding {
    pub fn n_columns(&self) -> usize {
        match self {
            Encoding::Categorical { levels } => levels.len() - 1,
            _ => 1,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Encoding::Continuous { .. } => "continuous",
            Encoding::Binary { .. } => "binary",
            Encoding::Categorical { .. } => "categorical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub encoding: Encoding,
    /// Index of the covariate's first design column.
    pub first_column: usize,
}

impl Covariate {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.first_column..self.first_column + self.encoding.n_columns()
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.encoding, Encoding::Categorical { .. })
    }
}

/// An interaction partner of a design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub partner: usize,
    pub interaction: usize,
}

/// Immutable description of the expansion from raw covariates to design
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    covariates: Vec<Covariate>,
    column_names: Vec<String>,
    group_of: Vec<usize>,
    interaction_index: Vec<(usize, usize)>,
    links: Vec<Vec<Link>>,
}

impl FeatureMap {
    /// Build a map from per-covariate encodings, in column order.
    pub fn new(encodings: Vec<(String, Encoding)>) -> Result<Self> {
        let mut covariates = Vec::with_capacity(encodings.len());
        let mut column_names = Vec::new();
        let mut group_of = Vec::new();
        for (g, (name, encoding)) in encodings.into_iter().enumerate() {
            match &encoding {
                Encoding::Continuous { scale, .. } if !(*scale > 0.0 && scale.is_finite()) => {
                    return Err(Error::ZeroVariance(name));
                }
                Encoding::Categorical { levels } if levels.len() < 2 => {
                    return Err(Error::SingleLevel(name));
                }
                _ => {}
            }
            let first_column = column_names.len();
            match &encoding {
                Encoding::Categorical { levels } => {
                    for level in &levels[..levels.len() - 1] {
                        column_names.push(format!("{name}={level}"));
                        group_of.push(g);
                    }
                }
                _ => {
                    column_names.push(name.clone());
                    group_of.push(g);
                }
            }
            covariates.push(Covariate { name, encoding, first_column });
        }
        let p = column_names.len();
        let mut interaction_index = Vec::new();
        let mut links = vec![Vec::new(); p];
        for j in 0..p {
            for k in (j + 1)..p {
                if group_of[j] == group_of[k] {
                    continue;
                }
                let r = interaction_index.len();
                interaction_index.push((j, k));
                links[j].push(Link { partner: k, interaction: r });
                links[k].push(Link { partner: j, interaction: r });
            }
        }
        Ok(Self { covariates, column_names, group_of, interaction_index, links })
    }

    /// Number of expanded main-effect columns (p).
    pub fn p_columns(&self) -> usize {
        self.column_names.len()
    }

    /// Number of covariates, counting each categorical once (p⁻).
    pub fn p_covariates(&self) -> usize {
        self.covariates.len()
    }

    /// Number of admissible interactions (q).
    pub fn q(&self) -> usize {
        self.interaction_index.len()
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    pub fn interaction_index(&self) -> &[(usize, usize)] {
        &self.interaction_index
    }

    /// Interactions that involve design column `j`, with the partner column.
    pub fn links(&self, j: usize) -> &[Link] {
        &self.links[j]
    }

    pub fn interaction_names(&self) -> Vec<String> {
        self.interaction_index
            .iter()
            .map(|&(j, k)| format!("{}:{}", self.column_names[j], self.column_names[k]))
            .collect()
    }

    /// Names of `alpha`, then main effects, then interactions.
    pub fn coefficient_names(&self) -> Vec<String> {
        std::iter::once("alpha".to_string())
            .chain(self.column_names.iter().cloned())
            .chain(self.interaction_names())
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.covariates
            .iter()
            .filter_map(|c| match c.encoding {
                Encoding::Continuous { center, .. } => Some(center),
                _ => None,
            })
            .collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.covariates
            .iter()
            .filter_map(|c| match c.encoding {
                Encoding::Continuous { scale, .. } => Some(scale),
                _ => None,
            })
            .collect()
    }

    /// `(name, raw label coded −1, raw label coded +1)` per binary covariate.
    pub fn binary_codes(&self) -> Vec<(&str, &str, &str)> {
        self.covariates
            .iter()
            .filter_map(|c| match &c.encoding {
                Encoding::Binary { low, high } => Some((c.name.as_str(), low.as_str(), high.as_str())),
                _ => None,
            })
            .collect()
    }

    /// The `L × (L − 1)` contrast matrix of a categorical covariate.
    pub fn contrast_matrix(&self, covariate: usize) -> Option<DMatrix<f64>> {
        match &self.covariates.get(covariate)?.encoding {
            Encoding::Categorical { levels } => Some(contrast_matrix(levels.len())),
            _ => None,
        }
    }
}

fn contrast_matrix(n_levels: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_levels, n_levels - 1, |l, c| {
        if l == n_levels - 1 {
            -1.0
        } else if l == c {
            1.0
        } else {
            0.0
        }
    })
}

/// Learn the expansion (centers, scales, codes, levels) from a dataset.
pub fn fit_feature_map(data: &RawDataset) -> Result<FeatureMap> {
    let mut encodings = Vec::with_capacity(data.columns.len());
    for col in &data.columns {
        let encoding = match &col.values {
            ColumnValues::Continuous(v) => {
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("column `{}` contains {bad}", col.name)));
                }
                let (center, scale) = mean_and_sd(v);
                if !(scale > 0.0) {
                    return Err(Error::ZeroVariance(col.name.clone()));
                }
                Encoding::Continuous { center, scale }
            }
            ColumnValues::Binary(v) => {
                let distinct: BTreeSet<&str> = v.iter().map(String::as_str).collect();
                if distinct.len() != 2 {
                    return Err(Error::BinaryLevels { name: col.name.clone(), found: distinct.len() });
                }
                let mut it = distinct.into_iter();
                let low = it.next().unwrap().to_string();
                let high = it.next().unwrap().to_string();
                Encoding::Binary { low, high }
            }
            ColumnValues::Categorical { values, levels } => {
                let observed: BTreeSet<&str> = values.iter().map(String::as_str).collect();
                if observed.len() < 2 {
                    return Err(Error::SingleLevel(col.name.clone()));
                }
                let levels = match levels {
                    Some(declared) => {
                        if let Some(extra) = observed.iter().find(|l| !declared.iter().any(|d| d == *l)) {
                            return Err(Error::UnseenLevel {
                                column: col.name.clone(),
                                level: extra.to_string(),
                            });
                        }
                        declared.clone()
                    }
                    None => observed.into_iter().map(str::to_string).collect(),
                };
                Encoding::Categorical { levels }
            }
        };
        encodings.push((col.name.clone(), encoding));
    }
    FeatureMap::new(encodings)
}

/// Population mean and standard deviation (denominator `n`).
pub(crate) fn mean_and_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardized main-effect and interaction columns for one dataset.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x_main: DMatrix<f64>,
    pub x_int: DMatrix<f64>,
    feature_map: Arc<FeatureMap>,
}

impl DesignMatrix {
    /// Form interaction columns as products of the given main columns.
    pub fn from_main(x_main: DMatrix<f64>, feature_map: Arc<FeatureMap>) -> Result<Self> {
        if x_main.ncols() != feature_map.p_columns() {
            return Err(Error::Shape(format!(
                "{} main columns, feature map expects {}",
                x_main.ncols(),
                feature_map.p_columns()
            )));
        }
        let n = x_main.nrows();
        let mut x_int = DMatrix::zeros(n, feature_map.q());
        for (r, &(j, k)) in feature_map.interaction_index().iter().enumerate() {
            for i in 0..n {
                x_int[(i, r)] = x_main[(i, j)] * x_main[(i, k)];
            }
        }
        Ok(Self { x_main, x_int, feature_map })
    }

    pub fn n_rows(&self) -> usize {
        self.x_main.nrows()
    }

    pub fn feature_map(&self) -> &Arc<FeatureMap> {
        &self.feature_map
    }

    /// Number of coefficients including the intercept: `1 + p + q`.
    pub fn n_coefficients(&self) -> usize {
        1 + self.x_main.ncols() + self.x_int.ncols()
    }

    /// `[1 | X_main | X_int]`.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        let p = self.x_main.ncols();
        let q = self.x_int.ncols();
        let mut z = DMatrix::zeros(n, 1 + p + q);
        z.column_mut(0).fill(1.0);
        z.view_mut((0, 1), (n, p)).copy_from(&self.x_main);
        z.view_mut((0, 1 + p), (n, q)).copy_from(&self.x_int);
        z
    }

    /// `[1 | X_main]`.
    pub fn main_only(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        let p = self.x_main.ncols();
        let mut z = DMatrix::zeros(n, 1 + p);
        z.column_mut(0).fill(1.0);
        z.view_mut((0, 1), (n, p)).copy_from(&self.x_main);
        z
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x_main: self.x_main.select_rows(rows),
            x_int: self.x_int.select_rows(rows),
            feature_map: Arc::clone(&self.feature_map),
        }
    }

    /// Linear predictor for a coefficient vector ordered as
    /// [`FeatureMap::coefficient_names`].
    pub fn predict(&self, coefficients: &[f64]) -> Vec<f64> {
        let p = self.x_main.ncols();
        let beta_main = DVector::from_column_slice(&coefficients[1..1 + p]);
        let beta_int = DVector::from_column_slice(&coefficients[1 + p..]);
        let fitted = &self.x_main * beta_main + &self.x_int * beta_int;
        fitted.iter().map(|v| v + coefficients[0]).collect()
    }
}

/// Standardize a dataset with a previously fitted map. Statistics are never
/// recomputed, so held-out data lands on the training scale.
pub fn apply_feature_map(map: &Arc<FeatureMap>, data: &RawDataset) -> Result<DesignMatrix> {
    let n = data.n_rows();
    let mut x_main = DMatrix::zeros(n, map.p_columns());
    for cov in map.covariates() {
        let col = data
            .column(&cov.name)
            .ok_or_else(|| Error::Schema(format!("missing column `{}`", cov.name)))?;
        match (&cov.encoding, &col.values) {
            (Encoding::Continuous { center, scale }, ColumnValues::Continuous(v)) => {
                for (i, x) in v.iter().enumerate() {
                    if !x.is_finite() {
                        return Err(Error::NonFinite(format!("column `{}` row {i}", cov.name)));
                    }
                    x_main[(i, cov.first_column)] = (x - center) / scale;
                }
            }
            (Encoding::Binary { low, high }, ColumnValues::Binary(v)) => {
                for (i, x) in v.iter().enumerate() {
                    x_main[(i, cov.first_column)] = if x == low {
                        -1.0
                    } else if x == high {
                        1.0
                    } else {
                        return Err(Error::UnseenLevel { column: cov.name.clone(), level: x.clone() });
                    };
                }
            }
            (Encoding::Categorical { levels }, ColumnValues::Categorical { values, .. }) => {
                let last = levels.len() - 1;
                for (i, x) in values.iter().enumerate() {
                    let l = levels.iter().position(|lv| lv == x).ok_or_else(|| Error::UnseenLevel {
                        column: cov.name.clone(),
                        level: x.clone(),
                    })?;
                    for c in 0..last {
                        x_main[(i, cov.first_column + c)] = if l == last {
                            -1.0
                        } else if l == c {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
            }
            (enc, vals) => {
                return Err(Error::Schema(format!(
                    "column `{}` is {} in the data but {} in the feature map",
                    cov.name,
                    vals.kind_name(),
                    enc.kind_name()
                )))
            }
        }
    }
    DesignMatrix::from_main(x_main, Arc::clone(map))
}

/// Plug-in second moments `(1/n) Σ_i x_ij x_ik` for every interaction pair.
pub fn interaction_moments(x: &DesignMatrix) -> Result<Vec<f64>> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument("interaction moments need at least two rows".into()));
    }
    Ok(x.x_int.column_iter().map(|c| c.sum() / n as f64).collect())
}

/// Column means of the main-effect block.
pub fn main_means(x: &DesignMatrix) -> Vec<f64> {
    let n = x.n_rows() as f64;
    x.x_main.column_iter().map(|c| c.sum() / n).collect()
}

/// Affine response transform; fitting happens on `(y − center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseScale {
    pub center: f64,
    pub scale: f64,
}

impl Default for ResponseScale {
    fn default() -> Self {
        Self { center: 0.0, scale: 1.0 }
    }
}

impl ResponseScale {
    pub fn fit(y: &[f64]) -> Result<Self> {
        let (center, scale) = mean_and_sd(y);
        if !(scale > 0.0) {
            return Err(Error::ZeroVariance("response".into()));
        }
        Ok(Self { center, scale })
    }

    pub fn transform(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.center) / self.scale).collect()
    }
}
