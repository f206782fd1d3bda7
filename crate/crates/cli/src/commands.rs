use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use lips_core::bayes::{RegressionData, RegressionEvidence};
use lips_core::exact::{bf_table, exact_pip, exact_posterior};
use lips_core::model::canonical_masks;
use lips_core::lips::{
    effective_sample_size, islanded_pips, run_lips, HtEstimate, LipsConfig, LipsRun,
};
use lips_core::mc3::{mc3_run, Mc3Config, ModelPriorDensity};
use lips_core::prior::marginal_table;
use lips_core::proposal::{default_lookahead, ProposalKind};
use lips_core::workbench::{
    ase, compare, fmt_g, lips_predictions, load_csv, load_new_rows, simulate_dataset, write_pips,
    write_posterior_table, write_predictions, CoefSpec, CompareConfig, Dataset, Method, PriorSpec,
    ResponseSelector, ResponseVariant,
};
use lips_core::{LipsError, PfsPrior, Result};

use crate::config::{PriorSetting, RunConfig};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_PRIOR: &str = "beta-binomial";
const DEFAULT_COEF: &str = "g-prior";

/// Loaded data with its prior and evidence built from the effective config.
struct Problem {
    dataset: Dataset,
    data: Arc<RegressionData>,
    prior: PfsPrior,
    coef: CoefSpec,
    evidence: RegressionEvidence,
}

fn fill_model_defaults(cfg: &mut RunConfig) {
    cfg.seed.get_or_insert(DEFAULT_SEED);
    cfg.prior.get_or_insert_with(|| PriorSetting::Spec(DEFAULT_PRIOR.into()));
    cfg.coef_prior.get_or_insert_with(|| DEFAULT_COEF.into());
}

fn prior_spec(cfg: &RunConfig) -> Result<PriorSpec> {
    cfg.prior
        .as_ref()
        .map_or_else(|| PriorSpec::parse(DEFAULT_PRIOR), PriorSetting::to_spec)
}

fn coef_spec(cfg: &RunConfig) -> Result<CoefSpec> {
    CoefSpec::parse(cfg.coef_prior.as_deref().unwrap_or(DEFAULT_COEF))
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let sel = cfg
        .response
        .as_deref()
        .map_or(ResponseSelector::Last, ResponseSelector::parse);
    load_csv(cfg.require_data()?, &sel)
}

fn problem(cfg: &RunConfig) -> Result<Problem> {
    let dataset = load(cfg)?;
    let data = Arc::new(dataset.regression_data()?);
    let prior = prior_spec(cfg)?.build(&data, cfg.max_size)?;
    let coef = coef_spec(cfg)?;
    let evidence = RegressionEvidence::new(data.clone(), coef.build(data.n())?);
    Ok(Problem {
        dataset,
        data,
        prior,
        coef,
        evidence,
    })
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_summary(dir: &Path, cfg: &RunConfig, command: &str, mut body: Value, started: Instant) -> Result<()> {
    let obj = body.as_object_mut().expect("summary body is an object");
    obj.insert("command".into(), json!(command));
    let mut echo = serde_json::to_value(cfg).expect("config serializes");
    if let Some(m) = echo.as_object_mut() {
        m.retain(|_, v| !v.is_null());
        // Reported at the top level as the count actually used.
        m.remove("threads");
    }
    obj.insert("config".into(), echo);
    obj.insert("threads".into(), json!(rayon::current_num_threads()));
    obj.insert("wall_time_s".into(), json!(started.elapsed().as_secs_f64()));
    let text = serde_json::to_string_pretty(&body).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}

fn exact_estimates(values: &[f64]) -> Vec<HtEstimate> {
    values
        .iter()
        .map(|&value| HtEstimate {
            value,
            se: 0.0,
            ess: f64::INFINITY,
            islands: 0,
        })
        .collect()
}

pub fn enumerate(mut cfg: RunConfig) -> Result<()> {
    let started = Instant::now();
    fill_model_defaults(&mut cfg);
    let pb = problem(&cfg)?;
    let p = pb.data.p();
    let masks = canonical_masks(p)?;
    let log_bf0 = bf_table(&pb.evidence)?;
    let prior = marginal_table(&pb.prior)?;
    let post = exact_posterior(&pb.prior, &log_bf0)?;
    let pips = exact_pip(&post)?;
    let dir = prepare_out(&cfg)?;
    write_posterior_table(&dir.join("posterior.csv"), p, &masks, &log_bf0, &prior, &post)?;
    write_pips(&dir.join("pips.csv"), &pb.dataset.names, &exact_estimates(&pips))?;
    let body = json!({ "n": pb.data.n(), "p": p, "models": masks.len() });
    write_summary(&dir, &cfg, "enumerate", body, started)
}

fn lips_config(cfg: &mut RunConfig, p: usize) -> Result<LipsConfig> {
    let particles = *cfg.particles.get_or_insert(1000);
    let islands = *cfg.islands.get_or_insert(10);
    let k = *cfg.lookahead.get_or_insert(default_lookahead(p));
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let config = LipsConfig {
        particles,
        islands,
        proposal: ProposalKind::Lip { k },
        seed,
    };
    config.validate()?;
    Ok(config)
}

fn run_summary(pb: &Problem, run: &LipsRun) -> Result<Value> {
    let ess = run
        .islands
        .iter()
        .map(|i| effective_sample_size(&i.samples.iter().map(|s| s.log_weight).collect::<Vec<_>>()))
        .collect::<Result<Vec<f64>>>()?;
    let forced: Vec<usize> = run.islands.iter().map(|i| i.forced_stops).collect();
    Ok(json!({
        "n": pb.data.n(),
        "p": pb.data.p(),
        "steps": run.steps,
        "proposals": run.proposals,
        "island_ess": ess,
        "forced_stops": forced,
    }))
}

/// Runs LIPS; writes pips.csv unless `pips` is false, and predictions.csv when
/// new rows are given.
fn lips_common(mut cfg: RunConfig, command: &str, pips: bool) -> Result<()> {
    let started = Instant::now();
    fill_model_defaults(&mut cfg);
    let pb = problem(&cfg)?;
    let config = lips_config(&mut cfg, pb.data.p())?;
    let new_rows = cfg
        .predict
        .as_deref()
        .map(|path| load_new_rows(path, &pb.dataset.names, &pb.dataset.response))
        .transpose()?;
    let run = run_lips(&config, &pb.prior, &pb.evidence)?;
    log::info!("{} sweeps, {} proposals", run.steps, run.proposals);
    let dir = prepare_out(&cfg)?;
    if pips {
        write_pips(&dir.join("pips.csv"), &pb.dataset.names, &islanded_pips(&run, pb.data.p())?)?;
    }
    let mut body = run_summary(&pb, &run)?;
    if let Some((rows, truth)) = new_rows {
        let coef = pb.coef.build(pb.data.n())?;
        let preds = lips_predictions(&run, &pb.data, &coef, &rows)?;
        write_predictions(&dir.join("predictions.csv"), &preds)?;
        if let Some(y) = truth {
            let means: Vec<f64> = preds.iter().map(|e| e.value).collect();
            body["ase"] = json!(ase(&means, &y)?);
        }
    }
    write_summary(&dir, &cfg, command, body, started)
}

pub fn lips(cfg: RunConfig, pips: bool) -> Result<()> {
    lips_common(cfg, "lips", pips)
}

pub fn predict(cfg: RunConfig) -> Result<()> {
    if cfg.predict.is_none() {
        return Err(LipsError::Config("predict needs rows to predict (--test)".into()));
    }
    lips_common(cfg, "predict", false)
}

pub fn mc3(mut cfg: RunConfig) -> Result<()> {
    let started = Instant::now();
    fill_model_defaults(&mut cfg);
    let iterations = *cfg.iterations.get_or_insert(100_000);
    let burnin = *cfg.burnin.get_or_insert(iterations / 10);
    let pb = problem(&cfg)?;
    let density = ModelPriorDensity::from_prior(&pb.prior)?;
    let res = mc3_run(
        &pb.evidence,
        &density,
        &Mc3Config::new(iterations, burnin, cfg.seed.unwrap_or(DEFAULT_SEED)),
    )?;
    let estimates: Vec<HtEstimate> = res
        .pips
        .iter()
        .zip(&res.se)
        .map(|(&value, &se)| HtEstimate {
            value,
            se,
            // Sample size that would give this SE under independent draws.
            ess: if se > 0.0 { value * (1.0 - value) / (se * se) } else { f64::NAN },
            islands: 1,
        })
        .collect();
    let dir = prepare_out(&cfg)?;
    write_pips(&dir.join("pips.csv"), &pb.dataset.names, &estimates)?;
    let body = json!({
        "n": pb.data.n(),
        "p": pb.data.p(),
        "acceptance_rate": res.acceptance_rate,
        "evaluated_models": res.evaluated,
    });
    write_summary(&dir, &cfg, "mc3", body, started)
}

pub fn simulate(mut cfg: RunConfig) -> Result<()> {
    let started = Instant::now();
    let variant_name = cfg.variant.get_or_insert_with(|| "ex3".into()).clone();
    let variant = ResponseVariant::parse(&variant_name)?;
    let n = *cfg.n.get_or_insert(350);
    let default_p = if matches!(variant, ResponseVariant::Ex4) { 1000 } else { 100 };
    let p = *cfg.p.get_or_insert(default_p);
    let seed = *cfg.seed.get_or_insert(DEFAULT_SEED);
    let d = simulate_dataset(n, p, &variant, seed)?;
    log::info!(
        "signal variance {:.3}, signal-to-noise {:.3}",
        variant.signal_variance(),
        variant.signal_variance() / variant.sigma().powi(2)
    );
    let dir = prepare_out(&cfg)?;
    d.write_csv(&dir.join("simulated.csv"))?;
    let body = json!({ "n": n, "p": p, "signal_variance": variant.signal_variance() });
    write_summary(&dir, &cfg, "simulate", body, started)
}

fn parse_methods(cfg: &RunConfig, p: usize) -> Result<Vec<Method>> {
    let names = cfg
        .methods
        .clone()
        .unwrap_or_else(|| vec!["lips".into(), "mc3".into(), "null".into()]);
    names
        .iter()
        .map(|m| match m.as_str() {
            "null" => Ok(Method::Null),
            "lips" => Ok(Method::Lips {
                particles: cfg.particles.unwrap_or(1000),
                islands: cfg.islands.unwrap_or(10),
                k: cfg.lookahead.unwrap_or(default_lookahead(p)),
            }),
            "mc3" => {
                let iterations = cfg.iterations.unwrap_or(100_000);
                Ok(Method::Mc3 {
                    iterations,
                    burnin: cfg.burnin.unwrap_or(iterations / 10),
                })
            }
            other => Err(LipsError::Config(format!("unknown method `{other}` (lips, mc3, null)"))),
        })
        .collect()
}

pub fn compare_cmd(mut cfg: RunConfig) -> Result<()> {
    let started = Instant::now();
    fill_model_defaults(&mut cfg);
    let dataset = load(&cfg)?;
    let (n, p) = (dataset.n(), dataset.p());
    let splits = *cfg.splits.get_or_insert(20);
    let n_train = *cfg.n_train.get_or_insert((n * 7).div_ceil(10));
    let n_test = *cfg.n_test.get_or_insert(n.saturating_sub(n_train));
    let methods = parse_methods(&cfg, p)?;
    let config = CompareConfig {
        splits,
        n_train,
        n_test,
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        prior: prior_spec(&cfg)?,
        coef: coef_spec(&cfg)?,
        max_size: cfg.max_size,
        methods: methods.clone(),
    };
    let outcomes = compare(&dataset, &config)?;
    let dir = prepare_out(&cfg)?;
    let mut long = csv::Writer::from_path(dir.join("ase.csv"))?;
    long.write_record(["split", "method", "ase"])?;
    for o in &outcomes {
        long.write_record([(o.split + 1).to_string(), o.method.to_string(), fmt_g(o.ase)])?;
    }
    long.flush()?;
    let mut means = serde_json::Map::new();
    for m in &methods {
        let mut w = csv::Writer::from_path(dir.join(format!("ase_{}.csv", m.name())))?;
        w.write_record(["split", "ase"])?;
        let rows: Vec<_> = outcomes.iter().filter(|o| o.method == m.name()).collect();
        for o in &rows {
            w.write_record([(o.split + 1).to_string(), fmt_g(o.ase)])?;
        }
        w.flush()?;
        means.insert(
            m.name().into(),
            json!(rows.iter().map(|o| o.ase).sum::<f64>() / rows.len() as f64),
        );
    }
    let body = json!({ "n": n, "p": p, "mean_ase": means });
    write_summary(&dir, &cfg, "compare", body, started)
}
