use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use linkshrink::design::ColumnValues;
use linkshrink::eval::run_protocol;
use linkshrink::importance::{global_importance, unit_effect_posterior};
use linkshrink::io::{
    read_dataset, read_draws, read_feature_map, read_schema, schema_of, write_dataset, write_draws, write_json,
    write_named_values, write_schema, Schema,
};
use linkshrink::shapley::MAX_BRUTEFORCE_PLAYERS;
use linkshrink::synth::{generate_master, SynthConfig, TruthSpec};
use linkshrink::{
    apply_feature_map, compute_diagnostics, fit_feature_map, interaction_moments, main_means, posterior_summary,
    run_sampler, shapley_bruteforce, shapley_categorical, shapley_fast, shapley_posterior, DesignMatrix, Error,
    FeatureMap, ModelSpec, ModelState, PosteriorDraws, RawDataset, ResponseScale, ShapleyQuery, Variant,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, EvaluateConfig, ExplainConfig, FitConfig, SimulateConfig};
use crate::{tables, CliError, EvaluateArgs, ExplainArgs, FitArgs, SamplerArgs, SimulateArgs, SynthArgs};

/// Largest player count for which `--oracle` runs the exact enumeration.
const ORACLE_MAX_PLAYERS: usize = 12;
const ORACLE_TOL: f64 = 1e-8;
const _: () = assert!(ORACLE_MAX_PLAYERS <= MAX_BRUTEFORCE_PLAYERS);

/// Model metadata saved by `fit` for later explanation runs.
#[derive(Debug, Serialize, Deserialize)]
struct SavedModel {
    spec: ModelSpec,
    response_scale: ResponseScale,
}

/// Reference moments of the training design.
#[derive(Debug, Serialize, Deserialize)]
struct SavedReference {
    means: Vec<f64>,
    moments: Vec<f64>,
}

fn apply_sampler_args(cfg: &mut linkshrink::SamplerConfig, a: &SamplerArgs) {
    if let Some(v) = a.chains {
        cfg.n_chains = v;
    }
    if let Some(v) = a.warmup {
        cfg.n_warmup = v;
    }
    if let Some(v) = a.keep {
        cfg.n_keep = v;
    }
    if let Some(v) = a.thin {
        cfg.thin = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
}

fn apply_fit_args(cfg: &mut FitConfig, a: &FitArgs) -> Result<(), CliError> {
    if let Some(v) = &a.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &a.schema {
        cfg.schema = Some(v.clone());
    }
    if let Some(v) = &a.response {
        cfg.response = Some(v.clone());
    }
    if let Some(v) = &a.variant {
        cfg.variant = v.parse::<Variant>()?;
    }
    apply_sampler_args(&mut cfg.sampler, &a.sampler);
    if let Some(v) = a.level {
        cfg.level = v;
    }
    if let Some(v) = &a.out {
        cfg.out = v.clone();
    }
    cfg.standardize_response |= a.standardize_response;
    cfg.dump_draws |= a.dump_draws;
    Ok(())
}

fn resolve_fit(a: &FitArgs) -> Result<FitConfig, CliError> {
    let mut cfg: FitConfig = config::load(a.config.as_deref())?;
    apply_fit_args(&mut cfg, a)?;
    Ok(cfg)
}

fn load_schema(path: Option<&Path>, response: Option<&str>) -> Result<Schema, CliError> {
    let path = path.ok_or_else(|| CliError::usage("--schema is required"))?;
    let mut schema = read_schema(path)?;
    if let Some(r) = response {
        schema.columns.remove(r);
        schema.response = r.to_string();
    }
    Ok(schema)
}

struct Fitted {
    draws: PosteriorDraws,
    design: DesignMatrix,
    schema: Schema,
    warnings: Vec<String>,
}

fn fit_model(cfg: &FitConfig) -> Result<Fitted, CliError> {
    let input = cfg.input.as_deref().ok_or_else(|| CliError::usage("--input is required"))?;
    let schema = load_schema(cfg.schema.as_deref(), cfg.response.as_deref())?;
    let data = read_dataset(input, &schema, true)?;
    let map = Arc::new(fit_feature_map(&data)?);
    let design = apply_feature_map(&map, &data)?;
    let scale = if cfg.standardize_response { ResponseScale::fit(data.response())? } else { ResponseScale::default() };
    let y = scale.transform(data.response());
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(CliError::usage(format!("--level {} must lie in (0, 1)", cfg.level)));
    }
    let draws = run_sampler(&ModelSpec::new(cfg.variant), &design, &y, &cfg.sampler)?.with_response_scale(scale);
    Ok(Fitted { draws, design, schema, warnings: Vec::new() })
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let cfg = resolve_fit(a)?;
    let mut fitted = fit_model(&cfg)?;
    let out = &cfg.out;
    config::save(out, &cfg)?;
    let map = fitted.draws.feature_map().clone();
    write_json(&out.join("feature_map.json"), &*map)?;
    write_json(
        &out.join("model.json"),
        &SavedModel { spec: *fitted.draws.spec(), response_scale: fitted.draws.response_scale() },
    )?;
    write_json(
        &out.join("reference.json"),
        &SavedReference { means: main_means(&fitted.design), moments: interaction_moments(&fitted.design)? },
    )?;
    let summary = posterior_summary(&fitted.draws, cfg.level)?;
    let n_coef = 1 + map.p_columns() + map.q();
    tables::summaries(&out.join("coefficients.csv"), &summary[..n_coef])?;
    tables::summaries(&out.join("hyperparameters.csv"), &summary[n_coef..])?;
    let diag = compute_diagnostics(&fitted.draws);
    tables::diagnostics(&out.join("diagnostics.csv"), &diag)?;
    if cfg.dump_draws {
        write_draws(&out.join("draws.csv"), &fitted.draws)?;
    }
    fitted.warnings.extend(diag.warnings);
    for w in &fitted.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn resolve_explain(a: &ExplainArgs) -> Result<ExplainConfig, CliError> {
    let mut cfg: ExplainConfig = config::load(a.fit.config.as_deref())?;
    apply_fit_args(&mut cfg.fit, &a.fit)?;
    if let Some(v) = a.fit.level {
        cfg.level = v;
    }
    if let Some(v) = &a.fit.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &a.fit_dir {
        cfg.fit_dir = Some(v.clone());
    }
    if let Some(v) = &a.test {
        cfg.test = Some(v.clone());
    }
    if let Some(v) = a.rows {
        cfg.rows = Some(v);
    }
    if !a.covariates.is_empty() {
        cfg.covariates = a.covariates.clone();
    }
    cfg.oracle |= a.oracle;
    if let Some(v) = &a.unit_effect {
        cfg.unit_effect = Some(v.clone());
    }
    if let Some(v) = &a.stratify {
        cfg.stratify = Some(v.clone());
    }
    cfg.per_draw |= a.per_draw;
    Ok(cfg)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
    serde_json::from_str(&text).map_err(|e| CliError::from(Error::Parse(format!("{}: {e}", path.display()))))
}

/// Posterior, reference moments, schema and default test path.
struct Explainer {
    draws: PosteriorDraws,
    means: Vec<f64>,
    moments: Vec<f64>,
    schema: Schema,
    input: Option<PathBuf>,
}

fn load_explainer(cfg: &ExplainConfig) -> Result<Explainer, CliError> {
    match &cfg.fit_dir {
        Some(dir) => {
            let saved_cfg: FitConfig = config::load(Some(&dir.join("resolved_config.toml")))?;
            let model: SavedModel = read_json(&dir.join("model.json"))?;
            let reference: SavedReference = read_json(&dir.join("reference.json"))?;
            let map = Arc::new(read_feature_map(&dir.join("feature_map.json"))?);
            let draws = read_draws(&dir.join("draws.csv"), model.spec, Arc::clone(&map))?
                .with_response_scale(model.response_scale);
            let schema_path = cfg.fit.schema.clone().or(saved_cfg.schema);
            let response = cfg.fit.response.clone().or(saved_cfg.response);
            let schema = load_schema(schema_path.as_deref(), response.as_deref())?;
            Ok(Explainer {
                draws,
                means: reference.means,
                moments: reference.moments,
                schema,
                input: cfg.fit.input.clone().or(saved_cfg.input),
            })
        }
        None => {
            let fitted = fit_model(&cfg.fit)?;
            Ok(Explainer {
                means: main_means(&fitted.design),
                moments: interaction_moments(&fitted.design)?,
                draws: fitted.draws,
                schema: fitted.schema,
                input: cfg.fit.input.clone(),
            })
        }
    }
}

fn test_data(cfg: &ExplainConfig, ex: &Explainer) -> Result<RawDataset, CliError> {
    let path = cfg.test.clone().or_else(|| ex.input.clone()).ok_or_else(|| CliError::usage("--test is required"))?;
    let data = read_dataset(&path, &ex.schema, false)?;
    Ok(match cfg.rows {
        Some(r) if r < data.n_rows() => data.select_rows(&(0..r).collect::<Vec<_>>()),
        _ => data,
    })
}

fn selected_covariates(cfg: &ExplainConfig, map: &FeatureMap, response: &str) -> Result<Vec<usize>, CliError> {
    if cfg.covariates.is_empty() {
        return Ok((0..map.p_covariates()).collect());
    }
    cfg.covariates
        .iter()
        .map(|name| {
            if name == response {
                return Err(CliError::usage(format!("`{name}` is the response column, not a covariate")));
            }
            map.covariate_index(name).ok_or_else(|| CliError::usage(format!("unknown covariate `{name}`")))
        })
        .collect()
}

fn run_oracle(draws: &PosteriorDraws, query: &ShapleyQuery) -> Result<(), CliError> {
    let players = query.feature_map.p_covariates();
    if players > ORACLE_MAX_PLAYERS {
        return Err(CliError::usage(format!(
            "--oracle supports at most {ORACLE_MAX_PLAYERS} covariates, model has {players}"
        )));
    }
    let map = &query.feature_map;
    let mean_state = ModelState::from_coefficients(&draws.coefficient_means(), map.p_columns());
    let mut worst: f64 = 0.0;
    for state in std::iter::once(&mean_state).chain(draws.states().first()) {
        let fast = shapley_categorical(&shapley_fast(state, query)?, map);
        let exact = shapley_bruteforce(state, query)?;
        for (a, b) in fast.phi.iter().zip(exact.phi.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    if !(worst <= ORACLE_TOL) {
        return Err(CliError::internal(format!(
            "oracle mismatch: max |closed form - enumeration| = {worst:e} exceeds {ORACLE_TOL:e}"
        )));
    }
    eprintln!("oracle: max |closed form - enumeration| = {worst:e}");
    Ok(())
}

struct Explained {
    cfg: ExplainConfig,
    ex: Explainer,
    test: RawDataset,
    design: DesignMatrix,
    covariates: Vec<usize>,
    query: ShapleyQuery,
}

fn prepare(a: &ExplainArgs) -> Result<Explained, CliError> {
    let cfg = resolve_explain(a)?;
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(CliError::usage(format!("--level {} must lie in (0, 1)", cfg.level)));
    }
    let ex = load_explainer(&cfg)?;
    let map = Arc::clone(ex.draws.feature_map());
    let covariates = selected_covariates(&cfg, &map, &ex.schema.response)?;
    let test = test_data(&cfg, &ex)?;
    let design = apply_feature_map(&map, &test)?;
    let query = ShapleyQuery::new(design.x_main.clone(), ex.means.clone(), ex.moments.clone(), Arc::clone(&map))?;
    if cfg.oracle {
        run_oracle(&ex.draws, &query)?;
    }
    config::save(&cfg.out, &cfg)?;
    Ok(Explained { cfg, ex, test, design, covariates, query })
}

pub fn shapley(a: &ExplainArgs) -> Result<(), CliError> {
    let e = prepare(a)?;
    let result = shapley_posterior(&e.ex.draws, &e.query, e.cfg.level)?;
    tables::shapley(&e.cfg.out.join("shapley.csv"), &result, &e.covariates)
}

pub fn importance(a: &ExplainArgs) -> Result<(), CliError> {
    let e = prepare(a)?;
    let result = shapley_posterior(&e.ex.draws, &e.query, e.cfg.level)?;
    let imp = global_importance(&result, e.cfg.per_draw)?;
    tables::importance(&e.cfg.out.join("importance.csv"), &imp, &e.covariates)?;
    if let Some(cov) = &e.cfg.unit_effect {
        if *cov == e.ex.schema.response {
            return Err(CliError::usage(format!("`{cov}` is the response column, not a covariate")));
        }
        let effect = unit_effect_posterior(&e.ex.draws, &e.design.x_main, cov, e.cfg.level)?;
        let stratifier = match &e.cfg.stratify {
            Some(name) => {
                let col = e
                    .test
                    .column(name)
                    .ok_or_else(|| CliError::usage(format!("stratifier `{name}` is not a declared column")))?;
                let values = match &col.values {
                    ColumnValues::Continuous(v) => v.iter().map(f64::to_string).collect(),
                    ColumnValues::Binary(v) => v.clone(),
                    ColumnValues::Categorical { values, .. } => values.clone(),
                };
                Some((name.as_str(), values))
            }
            None => None,
        };
        tables::unit_effect(&e.cfg.out.join("unit_effect.csv"), &effect, stratifier)?;
    }
    Ok(())
}

fn apply_synth_args(cfg: &mut SynthConfig, a: &SynthArgs) -> Result<(), CliError> {
    if let Some(v) = a.n_master {
        cfg.n_master = v;
    }
    if let Some(v) = a.noise_sd {
        cfg.noise_sd = v;
    }
    if let Some(v) = a.n_continuous {
        cfg.schema.n_continuous = v;
    }
    if let Some(v) = a.n_binary {
        cfg.schema.n_binary = v;
    }
    if let Some(v) = &a.categorical_levels {
        cfg.schema.categorical_levels = v.clone();
    }
    if let Some(v) = a.n_noise {
        cfg.schema.n_noise = v;
    }
    match a.truth.as_deref() {
        None => {}
        Some("random") => cfg.truth = TruthSpec::default(),
        Some("linked") => cfg.truth = TruthSpec::linked_default(),
        Some(other) => return Err(CliError::usage(format!("unknown truth `{other}`; expected random or linked"))),
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg: SimulateConfig = config::load(a.config.as_deref())?;
    apply_synth_args(&mut cfg.synth, &a.synth)?;
    if let Some(v) = a.seed {
        cfg.synth.seed = v;
    }
    if let Some(v) = &a.out {
        cfg.out = v.clone();
    }
    let master = generate_master(&cfg.synth)?;
    config::save(&cfg.out, &cfg)?;
    write_dataset(&cfg.out.join("data.csv"), &master.data)?;
    write_schema(&cfg.out.join("schema.toml"), &schema_of(&master.data))?;
    write_named_values(
        &cfg.out.join("truth.csv"),
        ["coefficient", "value"],
        &master.feature_map().coefficient_names(),
        &master.truth,
    )?;
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let mut cfg: EvaluateConfig = config::load(a.config.as_deref())?;
    if !a.methods.is_empty() {
        cfg.eval.methods = config::parse_methods(&a.methods)?;
    }
    apply_synth_args(&mut cfg.eval.synth, &a.synth)?;
    if let Some(v) = a.b {
        cfg.eval.synth.n_sets = v;
    }
    if let Some(v) = a.n_train {
        cfg.eval.synth.n_train = v;
    }
    if let Some(v) = a.detection_subsets {
        cfg.eval.detection_subsets = v;
    }
    if let Some(v) = a.coverage_individuals {
        cfg.eval.coverage_individuals = v;
    }
    apply_sampler_args(&mut cfg.eval.sampler, &a.sampler);
    if let Some(seed) = a.sampler.seed {
        cfg.eval.synth.seed = seed;
    }
    if let Some(v) = a.level {
        cfg.eval.level = v;
    }
    if let Some(v) = &a.out {
        cfg.out = v.clone();
    }
    let report = run_protocol(&cfg.eval)?;
    config::save(&cfg.out, &cfg)?;
    report.write_dir(&cfg.out)?;
    Ok(())
}
