//! Stage implementations. Stages hand data to each other only through files
//! in the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dynqoi::clustering::{kmeans_fit, read_labels, write_labels, ClusterModel};
use dynqoi::density::{
    cluster_weights, compute_ratios, importance_event_probability, l1_distance, rejection_sample,
    updated_density, ClusterSummary, InversionResult, Kde1d, ScaledBeta, Uniform, UnivariateDensity,
};
use dynqoi::kernel::KernelSpec;
use dynqoi::kpca::{learn_qois_and_transform, ProposalScore, QoiMap, Standardizer};
use dynqoi::models::generate_experiment;
use dynqoi::rng::child_seed;
use dynqoi::splinefilter::{filter_ensemble, FilteredEnsemble};
use dynqoi::store;
use dynqoi::svm::{select_classifier, ClassifierModel, SvmParams};
use dynqoi::timeseries::{load_ensemble, load_parameters, EnsembleKind, ParamDistribution, ParameterSampleSet};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::CliError;

const GENERATE_SEED: u64 = 10;
const CLUSTER_SEED: u64 = 20;
const FOLD_SEED: u64 = 30;
const REJECTION_SEED: u64 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Filter,
    Dynamics,
    Qoi,
    Invert,
    Metrics,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Generate,
        Stage::Filter,
        Stage::Dynamics,
        Stage::Qoi,
        Stage::Invert,
        Stage::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Filter => "filter",
            Stage::Dynamics => "dynamics",
            Stage::Qoi => "qoi",
            Stage::Invert => "invert",
            Stage::Metrics => "metrics",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// File names inside the output directory.
pub mod files {
    pub const PREDICTED: &str = "predicted.csv";
    pub const OBSERVED: &str = "observed.csv";
    pub const PREDICTED_PARAMS: &str = "predicted_params.csv";
    pub const OBSERVED_PARAMS: &str = "observed_params.csv";
    pub const PARAMETERS: &str = "parameters.json";
    pub const FILTERED_PREDICTED: &str = "filtered_predicted.csv";
    pub const FILTERED_OBSERVED: &str = "filtered_observed.csv";
    pub const FILTER_REPORT_PREDICTED: &str = "filter_report_predicted.csv";
    pub const FILTER_REPORT_OBSERVED: &str = "filter_report_observed.csv";
    pub const CLUSTER_MODEL: &str = "cluster_model.json";
    pub const CLASSIFIER: &str = "classifier.json";
    pub const LABELS_PREDICTED: &str = "labels_predicted.csv";
    pub const LABELS_OBSERVED: &str = "labels_observed.csv";
    pub const DYNAMICS: &str = "dynamics.json";
    pub const QOI_MAPS: &str = "qoi_maps.json";
    pub const INVERSION: &str = "inversion.json";
    pub const UPDATE_WEIGHTS: &str = "update_weights.csv";
    pub const ACCEPTED: &str = "accepted.csv";
    pub const DIAGNOSTICS: &str = "diagnostics.json";
    pub const DENSITIES: &str = "densities.csv";
    pub const TV_TABLE: &str = "tv_table.csv";
    pub const MANIFEST: &str = "manifest.json";

    pub fn qoi_predicted(k: usize) -> String {
        format!("qoi_predicted_{k}.csv")
    }

    pub fn qoi_observed(k: usize) -> String {
        format!("qoi_observed_{k}.csv")
    }
}

/// Parameter names, bounds and the distributions behind both sample sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInfo {
    pub names: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
    pub initial: ParamDistribution,
    pub data_generating: Option<ParamDistribution>,
    pub has_observed_params: bool,
}

/// Output of the `dynamics` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub proposals: Vec<KernelSpec>,
    pub cv_rates: Vec<Option<f64>>,
    pub selected: usize,
    pub selected_kernel: String,
    pub cv_misclassification: f64,
    pub predicted_counts: Vec<usize>,
    pub observed_counts: Vec<usize>,
    pub inertia: f64,
}

/// Learned QoI map of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterQoiRecord {
    pub cluster: usize,
    pub standardizer: Standardizer,
    pub map: QoiMap,
    pub selected: usize,
    pub scores: Vec<ProposalScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvRow {
    pub parameter: String,
    pub init_vs_dg: f64,
    pub update_vs_dg: f64,
    pub dg_vs_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventProbability {
    pub cluster: usize,
    pub initial: f64,
    pub updated: f64,
    pub data_generating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub clusters: Vec<ClusterSummary>,
    pub accepted: usize,
    #[serde(default)]
    pub tv_table: Vec<TvRow>,
    #[serde(default)]
    pub event_probabilities: Vec<EventProbability>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    seeds: BTreeMap<String, u64>,
    stages: BTreeMap<String, BTreeMap<String, String>>,
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    dir: &'a Path,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Path of an artifact produced by `stage`, which must already exist.
    fn input(&self, name: &str, stage: Stage) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::MissingArtifact {
                path: p,
                stage: stage.name(),
            })
        }
    }

    fn seed(&self, label: u64) -> u64 {
        child_seed(self.cfg.seed, label)
    }
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let ctx = Ctx { cfg, dir };
    let outputs = match stage {
        Stage::Generate => generate(&ctx)?,
        Stage::Filter => filter(&ctx)?,
        Stage::Dynamics => dynamics(&ctx)?,
        Stage::Qoi => qoi(&ctx)?,
        Stage::Invert => invert(&ctx)?,
        Stage::Metrics => metrics(&ctx)?,
    };
    record_manifest(&ctx, stage, &outputs)
}

/// Runs every stage in order, stopping at the first failure.
pub fn run_all(cfg: &PipelineConfig) -> Result<(), CliError> {
    for stage in Stage::ALL {
        log::info!("stage {}", stage.name());
        run_stage(stage, cfg)?;
    }
    Ok(())
}

fn record_manifest(ctx: &Ctx, stage: Stage, outputs: &[String]) -> Result<(), CliError> {
    let path = ctx.path(files::MANIFEST);
    let mut m: Manifest = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => Manifest::default(),
    };
    let hash = ctx.cfg.hash();
    if m.config_hash != hash {
        m.stages.clear();
    }
    m.config_hash = hash;
    m.seeds = [
        ("seed", ctx.cfg.seed),
        ("generate", ctx.seed(GENERATE_SEED)),
        ("clustering", ctx.seed(CLUSTER_SEED)),
        ("cv_folds", ctx.seed(FOLD_SEED)),
        ("rejection", ctx.seed(REJECTION_SEED)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut hashes = BTreeMap::new();
    for name in outputs {
        let bytes = fs::read(ctx.path(name))?;
        hashes.insert(name.clone(), hex::encode(Sha256::digest(&bytes)));
    }
    m.stages.insert(stage.name().to_string(), hashes);
    fs::write(path, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(dynqoi::Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    })
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn generate(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let info = if let Some(exp) = &ctx.cfg.experiment {
        let data = generate_experiment(exp, ctx.seed(GENERATE_SEED))?;
        data.save(ctx.dir)?;
        ParameterInfo {
            names: data.predicted_params.names.clone(),
            bounds: data.predicted_params.bounds.clone(),
            initial: ParamDistribution::Uniform,
            data_generating: Some(exp.observed_source.distribution()),
            has_observed_params: true,
        }
    } else {
        let inputs = ctx.cfg.inputs.as_ref().expect("validated config has a data source");
        let require = |p: &Path| -> Result<(), CliError> {
            if p.is_file() {
                Ok(())
            } else {
                Err(CliError::Config(format!("input file {} does not exist", p.display())))
            }
        };
        require(&inputs.predicted)?;
        require(&inputs.observed)?;
        require(&inputs.predicted_params)?;
        let pred = load_ensemble(&inputs.predicted, EnsembleKind::Predicted)?;
        let obs = load_ensemble(&inputs.observed, EnsembleKind::Observed)?;
        if pred.grid != obs.grid {
            return Err(CliError::Config("predicted and observed time grids differ".into()));
        }
        let params = load_parameters(&inputs.predicted_params, None)?;
        if params.len() != pred.n_series() {
            return Err(CliError::Config(format!(
                "{} parameter rows for {} predicted series",
                params.len(),
                pred.n_series()
            )));
        }
        pred.save(ctx.path(files::PREDICTED))?;
        obs.save(ctx.path(files::OBSERVED))?;
        params.save(ctx.path(files::PREDICTED_PARAMS))?;
        let mut has_obs = false;
        if let Some(p) = &inputs.observed_params {
            require(p)?;
            load_parameters(p, None)?.save(ctx.path(files::OBSERVED_PARAMS))?;
            has_obs = true;
        }
        ParameterInfo {
            names: params.names.clone(),
            bounds: params.bounds.clone(),
            initial: inputs.initial_distribution,
            data_generating: inputs.dg_distribution,
            has_observed_params: has_obs,
        }
    };
    write_json(ctx.path(files::PARAMETERS), &info)?;
    let mut out = names(&[files::PREDICTED, files::OBSERVED, files::PREDICTED_PARAMS, files::PARAMETERS]);
    if info.has_observed_params {
        out.push(files::OBSERVED_PARAMS.into());
    }
    println!("generated predicted and observed ensembles in {}", ctx.dir.display());
    Ok(out)
}

fn filter(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let pred = load_ensemble(ctx.input(files::PREDICTED, Stage::Generate)?, EnsembleKind::Predicted)?;
    let obs = load_ensemble(ctx.input(files::OBSERVED, Stage::Generate)?, EnsembleKind::Observed)?;
    ctx.cfg
        .filter
        .validate(pred.n_times())
        .map_err(|e| CliError::Config(e.to_string()))?;
    for (ens, values, report, label) in [
        (&pred, files::FILTERED_PREDICTED, files::FILTER_REPORT_PREDICTED, "predicted"),
        (&obs, files::FILTERED_OBSERVED, files::FILTER_REPORT_OBSERVED, "observed"),
    ] {
        let f = filter_ensemble(ens, &ctx.cfg.filter)?;
        f.save(ctx.path(values))?;
        f.save_report(ctx.path(report))?;
        let unconverged = f.converged.iter().filter(|c| !**c).count();
        println!("filtered {} {label} series ({unconverged} reached max_knots)", f.n_series());
    }
    Ok(names(&[
        files::FILTERED_PREDICTED,
        files::FILTERED_OBSERVED,
        files::FILTER_REPORT_PREDICTED,
        files::FILTER_REPORT_OBSERVED,
    ]))
}

fn counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

fn dynamics(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let pred = FilteredEnsemble::load(ctx.input(files::FILTERED_PREDICTED, Stage::Filter)?)?;
    let obs = FilteredEnsemble::load(ctx.input(files::FILTERED_OBSERVED, Stage::Filter)?)?;
    let c = &ctx.cfg.clustering;
    let km: ClusterModel = kmeans_fit(pred.values.view(), c.k, c.n_init, ctx.seed(CLUSTER_SEED))?;
    let params = SvmParams {
        c: ctx.cfg.svm.c,
        tol: ctx.cfg.svm.tol,
        ..SvmParams::default()
    };
    let sel = select_classifier(
        pred.values.view(),
        &km.labels,
        &ctx.cfg.svm.proposals,
        ctx.cfg.svm.k_folds,
        &params,
        ctx.seed(FOLD_SEED),
    )?;
    for (spec, rate) in ctx.cfg.svm.proposals.iter().zip(&sel.cv_rates) {
        match rate {
            Some(r) => println!("{r} misclassification rate for  {spec}"),
            None => println!("skipped {spec}: a fold held a single class"),
        }
    }
    let model: &ClassifierModel = &sel.model;
    let rate = model.cv_misclassification.unwrap_or(f64::NAN);
    println!("Best classifier is  {}", model.spec);
    println!("Misclassification rate is  {rate}");
    let obs_labels = model.classify(obs.values.view())?;

    store::save(ctx.path(files::CLUSTER_MODEL), "cluster_model", &km)?;
    store::save(ctx.path(files::CLASSIFIER), "classifier", model)?;
    write_labels(ctx.path(files::LABELS_PREDICTED), &pred.ids, &km.labels)?;
    write_labels(ctx.path(files::LABELS_OBSERVED), &obs.ids, &obs_labels)?;
    let report = DynamicsReport {
        proposals: ctx.cfg.svm.proposals.clone(),
        cv_rates: sel.cv_rates.clone(),
        selected: sel.selected,
        selected_kernel: model.spec.to_string(),
        cv_misclassification: rate,
        predicted_counts: counts(&km.labels, c.k),
        observed_counts: counts(&obs_labels, c.k),
        inertia: km.inertia,
    };
    write_json(ctx.path(files::DYNAMICS), &report)?;
    Ok(names(&[
        files::CLUSTER_MODEL,
        files::CLASSIFIER,
        files::LABELS_PREDICTED,
        files::LABELS_OBSERVED,
        files::DYNAMICS,
    ]))
}

fn select_rows(values: &Array2<f64>, labels: &[usize], k: usize) -> (Vec<usize>, Array2<f64>) {
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
    (rows.clone(), values.select(Axis(0), &rows))
}

fn write_qoi_csv(path: PathBuf, ids: &[String], rows: &[usize], q: &Array2<f64>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["series_id".to_string()];
    head.extend((0..q.ncols()).map(|j| format!("q{j}")));
    w.write_record(&head)?;
    for (r, row) in rows.iter().zip(q.outer_iter()) {
        let mut rec = vec![ids[*r].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_qoi_csv(path: &Path) -> Result<Array2<f64>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len().saturating_sub(1);
    let mut flat = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        for s in rec.iter().skip(1) {
            flat.push(s.parse::<f64>().map_err(|e| {
                CliError::Core(dynqoi::Error::Format {
                    path: path.to_path_buf(),
                    msg: format!("bad value {s:?}: {e}"),
                })
            })?);
        }
        n += 1;
    }
    Array2::from_shape_vec((n, width), flat).map_err(|e| {
        CliError::Core(dynqoi::Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    })
}

fn qoi(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let pred = FilteredEnsemble::load(ctx.input(files::FILTERED_PREDICTED, Stage::Filter)?)?;
    let obs = FilteredEnsemble::load(ctx.input(files::FILTERED_OBSERVED, Stage::Filter)?)?;
    let (_, pred_labels) = read_labels(ctx.input(files::LABELS_PREDICTED, Stage::Dynamics)?)?;
    let (_, obs_labels) = read_labels(ctx.input(files::LABELS_OBSERVED, Stage::Dynamics)?)?;
    let k = ctx.cfg.clustering.k;
    let mut records = Vec::with_capacity(k);
    let mut out = Vec::new();
    for c in 0..k {
        let (prow, p) = select_rows(&pred.values, &pred_labels, c);
        let (orow, o) = select_rows(&obs.values, &obs_labels, c);
        if prow.len() < 2 {
            return Err(dynqoi::Error::EmptyCluster(c).into());
        }
        let learned = learn_qois_and_transform(p.view(), o.view(), &ctx.cfg.qoi.proposals, ctx.cfg.qoi.mode)?;
        let sel = &learned.selection;
        for s in &sel.scores {
            println!("{} PCs explain {:.4}% of variance for cluster {c} with {}", s.n_qoi, 100.0 * s.explained, s.spec);
        }
        println!("---------------------------------------------");
        println!("Best kPCA for cluster  {c}  is  {}", sel.map.spec);
        println!("{} PCs explain {:.4}% of variance", sel.map.n_qoi, 100.0 * sel.map.variance_explained());
        println!("---------------------------------------------");
        let pn = files::qoi_predicted(c);
        let on = files::qoi_observed(c);
        write_qoi_csv(ctx.path(&pn), &pred.ids, &prow, &learned.predicted)?;
        write_qoi_csv(ctx.path(&on), &obs.ids, &orow, &learned.observed)?;
        out.push(pn);
        out.push(on);
        records.push(ClusterQoiRecord {
            cluster: c,
            standardizer: learned.standardizer,
            map: learned.selection.map,
            selected: learned.selection.selected,
            scores: learned.selection.scores,
        });
    }
    store::save(ctx.path(files::QOI_MAPS), "qoi_maps", &records)?;
    out.push(files::QOI_MAPS.into());
    Ok(out)
}

fn load_param_info(ctx: &Ctx) -> Result<(ParameterInfo, ParameterSampleSet), CliError> {
    let info: ParameterInfo = read_json(&ctx.input(files::PARAMETERS, Stage::Generate)?)?;
    let init = load_parameters(ctx.input(files::PREDICTED_PARAMS, Stage::Generate)?, Some(info.bounds.clone()))?;
    Ok((info, init))
}

fn invert(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let (_, init) = load_param_info(ctx)?;
    let (pred_ids, pred_labels) = read_labels(ctx.input(files::LABELS_PREDICTED, Stage::Dynamics)?)?;
    let (_, obs_labels) = read_labels(ctx.input(files::LABELS_OBSERVED, Stage::Dynamics)?)?;
    let k = ctx.cfg.clustering.k;
    let mut ratios = Vec::with_capacity(k);
    for c in 0..k {
        let p = read_qoi_csv(&ctx.input(&files::qoi_predicted(c), Stage::Qoi)?)?;
        let o = read_qoi_csv(&ctx.input(&files::qoi_observed(c), Stage::Qoi)?)?;
        ratios.push(compute_ratios(p.view(), o.view())?);
    }
    let weights = cluster_weights(&obs_labels, k)?;
    let result = updated_density(&init, &pred_labels, &ratios, &weights)?;
    for s in &result.clusters {
        match s.diagnostic {
            Some(d) => println!("cluster {}: E(r) = {d:.2}, weight {:.3}", s.cluster, s.weight),
            None => println!("cluster {}: no observations, weight 0", s.cluster),
        }
    }
    let accepted = rejection_sample(&result.update_weights, ctx.seed(REJECTION_SEED))?;

    let mut w = csv::Writer::from_path(ctx.path(files::UPDATE_WEIGHTS))?;
    w.write_record(["series_id", "label", "update_weight"])?;
    for ((id, l), u) in pred_ids.iter().zip(&pred_labels).zip(&result.update_weights) {
        w.write_record([id.clone(), l.to_string(), u.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(ctx.path(files::ACCEPTED))?;
    w.write_record(["sample_index"])?;
    for i in &accepted {
        w.write_record([i.to_string()])?;
    }
    w.flush()?;
    store::save(ctx.path(files::INVERSION), "inversion", &result)?;
    let diag = Diagnostics {
        clusters: result.clusters.clone(),
        accepted: accepted.len(),
        tv_table: Vec::new(),
        event_probabilities: Vec::new(),
    };
    write_json(ctx.path(files::DIAGNOSTICS), &diag)?;
    Ok(names(&[files::UPDATE_WEIGHTS, files::ACCEPTED, files::INVERSION, files::DIAGNOSTICS]))
}

/// Density of one parameter under `dist` on `bounds`.
fn exact_density(dist: ParamDistribution, (lo, hi): (f64, f64)) -> Box<dyn UnivariateDensity> {
    match dist {
        ParamDistribution::Uniform => Box::new(Uniform { lo, hi }),
        ParamDistribution::Beta { alpha, beta } => Box::new(ScaledBeta { alpha, beta, lo, hi }),
    }
}

fn metrics(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let (info, init) = load_param_info(ctx)?;
    let result: InversionResult = store::load(ctx.input(files::INVERSION, Stage::Invert)?, "inversion")?;
    let mut diag: Diagnostics = read_json(&ctx.input(files::DIAGNOSTICS, Stage::Invert)?)?;
    let dg_samples = if info.has_observed_params {
        Some(load_parameters(ctx.input(files::OBSERVED_PARAMS, Stage::Generate)?, Some(info.bounds.clone()))?)
    } else {
        None
    };
    let grid_n = ctx.cfg.density.grid_n;

    let mut tv_rows = Vec::new();
    let mut dens = csv::Writer::from_path(ctx.path(files::DENSITIES))?;
    dens.write_record(["parameter", "x", "initial", "updated", "data_generating", "data_generating_exact"])?;
    for (j, name) in info.names.iter().enumerate() {
        let bounds = info.bounds[j];
        let initial = Kde1d::fit(&init.samples.column(j).to_vec(), None)?;
        let updated = result.updated_marginal(&init, j)?;
        let dg = match &dg_samples {
            Some(s) => Some(Kde1d::fit(&s.samples.column(j).to_vec(), None)?),
            None => None,
        };
        let exact = info.data_generating.map(|d| exact_density(d, bounds));
        if let Some(dg) = &dg {
            tv_rows.push(TvRow {
                parameter: name.clone(),
                init_vs_dg: l1_distance(&initial, dg, bounds, grid_n)?,
                update_vs_dg: l1_distance(&updated, dg, bounds, grid_n)?,
                dg_vs_exact: match &exact {
                    Some(e) => Some(l1_distance(dg, e.as_ref(), bounds, grid_n)?),
                    None => None,
                },
            });
        }
        let (lo, hi) = bounds;
        for i in 0..grid_n {
            let x = lo + (hi - lo) * i as f64 / (grid_n - 1) as f64;
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            dens.write_record([
                name.clone(),
                x.to_string(),
                initial.pdf(x).to_string(),
                updated.pdf(x).to_string(),
                opt(dg.as_ref().map(|d| d.pdf(x))),
                opt(exact.as_ref().map(|e| e.pdf(x))),
            ])?;
        }
    }
    dens.flush()?;

    let mut tv = csv::Writer::from_path(ctx.path(files::TV_TABLE))?;
    tv.write_record(["parameter", "init_vs_dg", "update_vs_dg", "dg_vs_exact"])?;
    for r in &tv_rows {
        tv.write_record([
            r.parameter.clone(),
            r.init_vs_dg.to_string(),
            r.update_vs_dg.to_string(),
            r.dg_vs_exact.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    tv.flush()?;

    // data-generating over initial density ratio at each initial sample
    let dg_ratio: Option<Vec<f64>> = info.data_generating.map(|dg| {
        (0..init.len())
            .map(|i| {
                (0..init.n_params())
                    .map(|j| {
                        let (lo, hi) = info.bounds[j];
                        let x = init.samples[[i, j]];
                        dg.pdf(x, lo, hi) / info.initial.pdf(x, lo, hi)
                    })
                    .product()
            })
            .collect()
    });
    let k = result.clusters.len();
    let n = result.labels.len() as f64;
    diag.event_probabilities = (0..k)
        .map(|c| EventProbability {
            cluster: c,
            initial: result.labels.iter().filter(|&&l| l == c).count() as f64 / n,
            updated: result.event_probability(c),
            data_generating: dg_ratio
                .as_ref()
                .map(|r| importance_event_probability(r, &result.labels, c)),
        })
        .collect();
    diag.tv_table = tv_rows;

    println!("{:<10} {:>12} {:>12} {:>12}", "parameter", "init-DG", "update-DG", "DG-exact");
    for r in &diag.tv_table {
        let e = r.dg_vs_exact.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<10} {:>12.4} {:>12.4} {:>12}", r.parameter, r.init_vs_dg, r.update_vs_dg, e);
    }
    for e in &diag.event_probabilities {
        let dg = e.data_generating.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("cluster {} event probability: updated {:.3}, data-generating {dg}", e.cluster, e.updated);
    }
    write_json(ctx.path(files::DIAGNOSTICS), &diag)?;
    Ok(names(&[files::DENSITIES, files::TV_TABLE, files::DIAGNOSTICS]))
}
