//! CSV writers for command outputs. Floats use Rust's shortest round-trip
//! formatting so reruns are byte-identical.

use std::path::Path;

use linkshrink::importance::{GlobalImportance, UnitEffect};
use linkshrink::{Diagnostics, Error, ParamSummary, ShapleyResult};

use crate::CliError;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::from(Error::from(e)))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::from(Error::io(path, e)))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::from(Error::from(e))
}

pub fn summaries(path: &Path, rows: &[ParamSummary]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["name", "mean", "sd", "lower", "upper"]).map_err(csv_err)?;
    for r in rows {
        let s = &r.summary;
        w.write_record([r.name.clone(), s.mean.to_string(), s.sd.to_string(), s.lower.to_string(), s.upper.to_string()])
            .map_err(csv_err)?;
    }
    finish(w, path)
}

pub fn diagnostics(path: &Path, d: &Diagnostics) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["parameter", "rhat", "ess"]).map_err(csv_err)?;
    for (i, name) in d.names.iter().enumerate() {
        let rhat = d.rhat.as_ref().map_or_else(|| "NA".to_string(), |r| r[i].to_string());
        w.write_record([name.clone(), rhat, d.ess[i].to_string()]).map_err(csv_err)?;
    }
    finish(w, path)
}

pub fn shapley(path: &Path, result: &ShapleyResult, covariates: &[usize]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "individual_id",
        "covariate",
        "phi_mean",
        "phi_lower",
        "phi_upper",
        "phi_main_mean",
        "phi_int_mean",
    ])
    .map_err(csv_err)?;
    for i in 0..result.n_individuals {
        for &c in covariates {
            let k = result.cell(i, c);
            let phi = &result.phi[k];
            w.write_record([
                i.to_string(),
                result.covariates[c].clone(),
                phi.mean.to_string(),
                phi.lower.to_string(),
                phi.upper.to_string(),
                result.main[k].mean.to_string(),
                result.int[k].mean.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w, path)
}

pub fn importance(path: &Path, imp: &GlobalImportance, covariates: &[usize]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["covariate", "importance", "importance_main", "importance_int"]).map_err(csv_err)?;
    for &c in covariates {
        let r = &imp.rows[c];
        w.write_record([
            r.covariate.clone(),
            r.importance.to_string(),
            r.importance_main.to_string(),
            r.importance_int.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w, path)
}

pub fn unit_effect(path: &Path, effect: &UnitEffect, stratifier: Option<(&str, Vec<String>)>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["individual_id".to_string(), "covariate".to_string()];
    if let Some((name, _)) = &stratifier {
        header.push(name.to_string());
    }
    header.extend(["mean", "lower", "upper"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for (i, s) in effect.effects.iter().enumerate() {
        let mut rec = vec![i.to_string(), effect.covariate.clone()];
        if let Some((_, values)) = &stratifier {
            rec.push(values[i].clone());
        }
        rec.extend([s.mean.to_string(), s.lower.to_string(), s.upper.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w, path)
}
