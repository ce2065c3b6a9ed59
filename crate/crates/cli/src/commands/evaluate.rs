use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use geoprior::eval::{learning_curve, make_fold_plan, run_cv, Paradigm};
use geoprior::model::{
    ClassWeighting, ElasticNetConfig, ModelConfig, RandomForestConfig,
};
use geoprior::tabular::{read_feature_csv, FeatureTable};

use super::{as_usage, ensure_dir, usage};
use crate::config::{parse_list, Config};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Labelled feature table CSV
    #[arg(long)]
    features: PathBuf,
    /// cv | learning-curve
    #[arg(long)]
    mode: Option<String>,
    /// Config file (`key = value`, keys mirror these flags; flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// elastic-net | random-forest
    #[arg(long)]
    model: Option<String>,
    /// Folds per repeat
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Elastic-net L1/L2 mix
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated λ candidates
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    inner_folds: Option<usize>,
    /// auto | uniform | inverse-frequency
    #[arg(long)]
    class_weighting: Option<String>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// true | false (bootstrap resampling per tree)
    #[arg(long)]
    bootstrap: Option<bool>,
    /// Learning-curve positive-sample sizes (e.g. `25,50,100,all`)
    #[arg(long)]
    sizes: Option<String>,
}

struct Merged {
    args: EvaluateArgs,
    config: Config,
}

impl Merged {
    fn get<T: std::str::FromStr + Clone>(&self, flag: Option<&T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        self.config.parse::<T>(key).map_err(as_usage)
    }
}

fn model_config(m: &Merged) -> Result<ModelConfig> {
    let model = m.get(m.args.model.as_ref(), "model")?.unwrap_or_else(|| "elastic-net".into());
    let seed = m.get(m.args.seed.as_ref(), "seed")?.unwrap_or(0);
    match model.as_str() {
        "elastic-net" => {
            let mut cfg = ElasticNetConfig { seed, ..Default::default() };
            if let Some(alpha) = m.get(m.args.alpha.as_ref(), "alpha")? {
                cfg.alpha = alpha;
            }
            if let Some(grid) = m.get(m.args.lambda_grid.as_ref(), "lambda-grid")? {
                cfg.lambda_grid = parse_list(&grid, "lambda").map_err(as_usage)?;
            }
            if let Some(folds) = m.get(m.args.inner_folds.as_ref(), "inner-folds")? {
                cfg.inner_folds = folds;
            }
            if let Some(cw) = m.get(m.args.class_weighting.as_ref(), "class-weighting")? {
                cfg.class_weighting = match cw.as_str() {
                    "auto" => ClassWeighting::Auto,
                    "uniform" => ClassWeighting::Uniform,
                    "inverse-frequency" => ClassWeighting::InverseFrequency,
                    other => return Err(usage(format!("unknown class weighting `{other}`"))),
                };
            }
            Ok(ModelConfig::ElasticNet(cfg))
        }
        "random-forest" => {
            let mut cfg = RandomForestConfig { seed, ..Default::default() };
            if let Some(trees) = m.get(m.args.trees.as_ref(), "trees")? {
                cfg.n_trees = trees;
            }
            if let Some(min_leaf) = m.get(m.args.min_leaf.as_ref(), "min-leaf")? {
                cfg.min_leaf = min_leaf;
            }
            if let Some(depth) = m.get(m.args.max_depth.as_ref(), "max-depth")? {
                cfg.max_depth = Some(depth);
            }
            if let Some(bootstrap) = m.get(m.args.bootstrap.as_ref(), "bootstrap")? {
                cfg.bootstrap = bootstrap;
            }
            Ok(ModelConfig::RandomForest(cfg))
        }
        other => Err(usage(format!("unknown model `{other}`"))),
    }
}

fn parse_paradigms(m: &Merged, base: &ModelConfig) -> Result<Vec<Paradigm>> {
    let entries = m.config.get_all("paradigm");
    if entries.is_empty() {
        // Default arms: the prior-anchored learner against the conventional
        // purely data-driven baseline.
        return Ok(vec![
            Paradigm { name: "proposed".into(), model: base.clone(), use_gpk: true },
            Paradigm {
                name: "conventional".into(),
                model: ModelConfig::RandomForest(RandomForestConfig {
                    seed: match base {
                        ModelConfig::ElasticNet(c) => c.seed,
                        ModelConfig::RandomForest(c) => c.seed,
                    },
                    ..Default::default()
                }),
                use_gpk: false,
            },
        ]);
    }
    entries
        .iter()
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').collect();
            let [name, model, gpk] = parts.as_slice() else {
                return Err(usage(format!(
                    "paradigm `{entry}` must be `name:elastic-net|random-forest:gpk|nogpk`"
                )));
            };
            let model = match *model {
                "elastic-net" => ModelConfig::ElasticNet(ElasticNetConfig::default()),
                "random-forest" => ModelConfig::RandomForest(RandomForestConfig::default()),
                other => return Err(usage(format!("unknown paradigm model `{other}`"))),
            };
            let use_gpk = match *gpk {
                "gpk" => true,
                "nogpk" => false,
                other => return Err(usage(format!("paradigm gpk flag `{other}`"))),
            };
            Ok(Paradigm { name: name.to_string(), model, use_gpk })
        })
        .collect()
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => Config::load(path).map_err(as_usage)?,
        None => Config::default(),
    };
    let m = Merged { args, config };

    let table = read_feature_csv(&m.args.features, Some(&m.args.label_column))?;
    let mode = m.get(m.args.mode.as_ref(), "mode")?.unwrap_or_else(|| "cv".into());
    let out_dir = m
        .args
        .out_dir
        .clone()
        .or_else(|| m.config.get("out-dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out_dir)?;

    let k = m.get(m.args.k.as_ref(), "k")?.unwrap_or(10);
    let repeats = m.get(m.args.repeats.as_ref(), "repeats")?.unwrap_or(5);
    let seed = m.get(m.args.seed.as_ref(), "seed")?.unwrap_or(0);
    let model = model_config(&m)?;

    match mode.as_str() {
        "cv" => run_cv_mode(&m, &table, &model, k, repeats, seed, &out_dir),
        "learning-curve" => run_curve_mode(&m, &table, &model, k, repeats, seed, &out_dir),
        other => Err(usage(format!("unknown mode `{other}` (expected cv or learning-curve)"))),
    }
}

fn run_cv_mode(
    _m: &Merged,
    table: &FeatureTable,
    model: &ModelConfig,
    k: usize,
    repeats: usize,
    seed: u64,
    out_dir: &std::path::Path,
) -> Result<()> {
    let plan = make_fold_plan(table, k, repeats, seed)?;
    let outcome = run_cv(table, model, &plan)?;
    for (repeat, fold, err) in &outcome.failures {
        eprintln!("[evaluate] cycle (repeat {repeat}, fold {fold}) failed: {err}");
    }

    let mut csv = String::from("repeat,fold,auc,brier\n");
    for c in &outcome.cycles {
        let _ = writeln!(csv, "{},{},{:.6},{:.6}", c.repeat, c.fold, c.auc, c.brier);
    }
    let cycles_path = out_dir.join("cycles.csv");
    std::fs::write(&cycles_path, csv)
        .with_context(|| format!("cannot write {}", cycles_path.display()))?;

    let models_dir = out_dir.join("models");
    ensure_dir(&models_dir)?;
    for (cycle, model) in outcome.cycles.iter().zip(&outcome.models) {
        model.save(models_dir.join(format!("model_r{:02}_f{:02}.json", cycle.repeat, cycle.fold)))?;
    }

    eprintln!(
        "[evaluate] {} cycles: mean AUC {:.4}, mean Brier {:.4}; models in {}",
        outcome.cycles.len(),
        outcome.mean_auc(),
        outcome.mean_brier(),
        models_dir.display()
    );
    Ok(())
}

fn run_curve_mode(
    m: &Merged,
    table: &FeatureTable,
    model: &ModelConfig,
    k: usize,
    repeats: usize,
    seed: u64,
    out_dir: &std::path::Path,
) -> Result<()> {
    let (pos, _) = table.class_counts()?;
    let sizes_text = m
        .get(m.args.sizes.as_ref(), "sizes")?
        .unwrap_or_else(|| "25,50,100,250,500,1000,all".into());
    let mut sizes = Vec::new();
    for token in sizes_text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let n = if token == "all" {
            pos
        } else {
            token.parse::<usize>().map_err(|e| usage(format!("bad size `{token}`: {e}")))?
        };
        if n <= pos && !sizes.contains(&n) {
            sizes.push(n);
        }
    }
    sizes.sort_unstable();
    if sizes.is_empty() {
        return Err(usage(format!("no usable sizes at or below {pos} positives")));
    }

    let paradigms = parse_paradigms(m, model)?;
    let points = learning_curve(table, &sizes, &paradigms, k, repeats, seed)?;

    let mut csv = String::from("n_pos,paradigm,auc_mean,auc_std,brier_mean,brier_std\n");
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            p.n_positives, p.paradigm, p.auc_mean, p.auc_std, p.brier_mean, p.brier_std
        );
    }
    let curve_path = out_dir.join("curve.csv");
    std::fs::write(&curve_path, csv)
        .with_context(|| format!("cannot write {}", curve_path.display()))?;
    eprintln!(
        "[evaluate] wrote {} curve points ({} sizes x {} paradigms) to {}",
        points.len(),
        sizes.len(),
        paradigms.len(),
        curve_path.display()
    );
    Ok(())
}
