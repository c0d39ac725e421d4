//! File formats: delimited datasets with a TOML schema, feature maps, draw
//! dumps and coefficient files.
//!
//! A schema looks like
//!
//! ```toml
//! response = "y"
//! delimiter = ","          # optional
//!
//! [columns]
//! age = "continuous"
//! smoker = "binary"
//! region = { kind = "categorical", levels = ["north", "south", "west"] }
//! ```
//!
//! Covariates appear in the order of the data header; undeclared data
//! columns are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::design::{ColumnValues, FeatureMap, RawColumn, RawDataset};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ModelState};
use crate::sampler::PosteriorDraws;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnSpec {
    Kind(Kind),
    Detailed {
        kind: Kind,
        #[serde(default)]
        levels: Option<Vec<String>>,
    },
}

impl ColumnSpec {
    pub fn kind(&self) -> Kind {
        match self {
            ColumnSpec::Kind(k) | ColumnSpec::Detailed { kind: k, .. } => *k,
        }
    }

    fn levels(&self) -> Option<&Vec<String>> {
        match self {
            ColumnSpec::Detailed { levels, .. } => levels.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub response: String,
    #[serde(default)]
    pub delimiter: Option<char>,
    pub columns: BTreeMap<String, ColumnSpec>,
}

impl Schema {
    pub fn delimiter_byte(&self) -> Result<u8> {
        let c = self.delimiter.unwrap_or(',');
        u8::try_from(c).map_err(|_| Error::Schema(format!("delimiter `{c}` is not a single byte")))
    }
}

pub fn read_schema(path: &Path) -> Result<Schema> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: Schema =
        toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {}", path.display(), e.message())))?;
    if schema.columns.is_empty() {
        return Err(Error::Schema(format!("{}: no covariate columns declared", path.display())));
    }
    if schema.columns.contains_key(&schema.response) {
        return Err(Error::Schema(format!("response `{}` is also declared as a covariate", schema.response)));
    }
    Ok(schema)
}

/// Read a delimited file with a header. When `require_response` is false a
/// missing response column is replaced by zeros.
pub fn read_dataset(path: &Path, schema: &Schema, require_response: bool) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse(format!("{}: {other:?}", path.display())),
        })?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    for name in schema.columns.keys() {
        if !header.contains(name) {
            return Err(Error::Schema(format!("{}: declared column `{name}` not found", path.display())));
        }
    }
    let response_at = header.iter().position(|h| *h == schema.response);
    if require_response && response_at.is_none() {
        return Err(Error::Schema(format!("{}: response column `{}` not found", path.display(), schema.response)));
    }
    let used: Vec<(usize, &String, &ColumnSpec)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| schema.columns.get(h).map(|s| (i, h, s)))
        .collect();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); used.len()];
    let mut response = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (slot, &(i, _, _)) in raw.iter_mut().zip(&used) {
            slot.push(record.get(i).unwrap_or("").to_string());
        }
        if let Some(r) = response_at {
            response.push(parse_number(record.get(r).unwrap_or(""), &schema.response, row)?);
        }
    }
    let n = raw.first().map_or(0, Vec::len);
    if response_at.is_none() {
        response = vec![0.0; n];
    }
    let mut columns = Vec::with_capacity(used.len());
    for ((_, name, spec), values) in used.into_iter().zip(raw) {
        let values = match spec.kind() {
            Kind::Continuous => ColumnValues::Continuous(
                values.iter().enumerate().map(|(row, v)| parse_number(v, name, row)).collect::<Result<_>>()?,
            ),
            Kind::Binary => ColumnValues::Binary(values),
            Kind::Categorical => ColumnValues::Categorical { values, levels: spec.levels().cloned() },
        };
        columns.push(RawColumn { name: name.clone(), values });
    }
    RawDataset::new(columns, &schema.response, response)
}

fn parse_number(s: &str, column: &str, row: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("column `{column}` row {}: `{s}` is not a number", row + 1)))
}

/// Write a dataset as CSV (covariates in order, then the response).
pub fn write_dataset(path: &Path, data: &RawDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.columns().iter().map(|c| c.name.as_str()).collect();
    header.push(data.response_name());
    w.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut rec: Vec<String> = data
            .columns()
            .iter()
            .map(|c| match &c.values {
                ColumnValues::Continuous(v) => v[i].to_string(),
                ColumnValues::Binary(v) => v[i].clone(),
                ColumnValues::Categorical { values, .. } => values[i].clone(),
            })
            .collect();
        rec.push(data.response()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A schema describing a dataset's columns.
pub fn schema_of(data: &RawDataset) -> Schema {
    let columns = data
        .columns()
        .iter()
        .map(|c| {
            let spec = match &c.values {
                ColumnValues::Continuous(_) => ColumnSpec::Kind(Kind::Continuous),
                ColumnValues::Binary(_) => ColumnSpec::Kind(Kind::Binary),
                ColumnValues::Categorical { levels: Some(l), .. } => {
                    ColumnSpec::Detailed { kind: Kind::Categorical, levels: Some(l.clone()) }
                }
                ColumnValues::Categorical { levels: None, .. } => ColumnSpec::Kind(Kind::Categorical),
            };
            (c.name.clone(), spec)
        })
        .collect();
    Schema { response: data.response_name().to_string(), delimiter: None, columns }
}

pub fn write_schema(path: &Path, schema: &Schema) -> Result<()> {
    let text = toml::to_string(schema).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_feature_map(path: &Path) -> Result<FeatureMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: FeatureMap =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    // Rebuild to re-derive and validate the bookkeeping.
    FeatureMap::new(map.covariates().iter().map(|c| (c.name.clone(), c.encoding.clone())).collect())
}

/// Name → value pairs, one per line.
pub fn write_named_values(path: &Path, header: [&str; 2], names: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (n, v) in names.iter().zip(values) {
        w.write_record([n.as_str(), &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Draw dump: `chain,draw,` followed by [`PosteriorDraws::param_names`].
pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.param_names());
    w.write_record(&header)?;
    for ((s, c), d) in draws.states().iter().zip(draws.chain_ids()).zip(draws.draw_index()) {
        let mut rec = vec![c.to_string(), d.to_string()];
        rec.extend(draws.flatten(s).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a draw dump written by [`write_draws`] for the given model.
pub fn read_draws(path: &Path, spec: ModelSpec, map: Arc<FeatureMap>) -> Result<PosteriorDraws> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    })?;
    let template = PosteriorDraws::from_states(spec, Arc::clone(&map), vec![])?;
    let expected = template.param_names();
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() != expected.len() + 2 || header[2..] != expected[..] {
        return Err(Error::Schema(format!("{}: draw columns do not match the model", path.display())));
    }
    let mut states: Vec<ModelState> = Vec::new();
    let mut chains = Vec::new();
    let mut index = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i).unwrap_or("").parse::<f64>().map_err(|_| {
                Error::Parse(format!("{} row {}: bad value in `{}`", path.display(), row + 1, header[i]))
            })
        };
        chains.push(parse(0)? as usize);
        index.push(parse(1)? as usize);
        let values = (2..header.len()).map(parse).collect::<Result<Vec<f64>>>()?;
        states.push(template.unflatten(&values)?);
    }
    PosteriorDraws::new(spec, map, Default::default(), states, chains, index)
}
