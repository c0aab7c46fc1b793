use crate::args::*;
use crate::ingest::{ingest, write_csv, DataError};
use anyhow::{anyhow, bail, Context, Result};
use coxset::confset::{build_confidence_set, prediction_intervals, ConfSetConfig};
use coxset::data::DataSet;
use coxset::reduction::{cox_reduce_eligible, stability_report, ReductionConfig, ReductionOutcome};
use coxset::report;
use coxset::simulation::{self, CovariateLaw, GenSpec};
use coxset::stats::SigmaMode;
use nalgebra::DVector;
use serde_json::json;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

/// Marker for configuration-class failures (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

/// Marker for numerical-class failures (exit code 4).
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for NumericalFailure {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    if err.downcast_ref::<NumericalFailure>().is_some() {
        return 4;
    }
    if err.downcast_ref::<DataError>().is_some() {
        return 3;
    }
    if let Some(core) = err.downcast_ref::<coxset::Error>() {
        return match core {
            coxset::Error::BudgetExceeded { .. } => 5,
            coxset::Error::Invalid(_) | coxset::Error::TooSmall { .. } => 2,
            _ => 4,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    4
}

fn parse_sigma(text: &str) -> Result<SigmaMode> {
    if text.eq_ignore_ascii_case("estimate") {
        return Ok(SigmaMode::Estimate);
    }
    let value: f64 = text.parse().map_err(|_| {
        config_err(format!(
            "--sigma must be 'estimate' or a number, got '{text}'"
        ))
    })?;
    if value <= 0.0 {
        bail!(config_err("--sigma must be positive"));
    }
    Ok(SigmaMode::Known(value))
}

fn reduction_config(flags: &ReductionFlags, seed: u64) -> Result<ReductionConfig> {
    let cfg = ReductionConfig {
        dims_round1: flags.dims1,
        dims_round2: flags.dims2,
        side_round1: flags.k1,
        side_round2: flags.k2,
        alpha: flags.alpha,
        sigma: parse_sigma(&flags.sigma)?,
        pair_threshold: flags.pair_threshold,
        subsample_fraction: flags.subsample,
        rerandomisations: flags.rerandomisations,
        vote_fraction: flags.vote,
        seed,
        ..ReductionConfig::default()
    };
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(cfg)
}

fn ensure_dir(path: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(path);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn write_report(dir: &Path, stem: &str, text: &str, json: &serde_json::Value) -> Result<()> {
    fs::write(dir.join(format!("{stem}.txt")), text)?;
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(json)?,
    )?;
    Ok(())
}

fn dataset_note(ds: &DataSet) -> String {
    format!(
        "n = {}, p = {}, response = '{}', constant columns excluded: {:?}\n",
        ds.n(),
        ds.p(),
        ds.response_name,
        ds.constant_cols
    )
}

fn run_reduction(ds: &DataSet, cfg: &ReductionConfig) -> Result<ReductionOutcome> {
    let eligible = ds.eligible();
    cox_reduce_eligible(&ds.y, &ds.x, &eligible, cfg).map_err(anyhow::Error::from)
}

fn reduce_cmd(args: ReduceArgs) -> Result<()> {
    let dir = ensure_dir(&args.output)?;
    let ds = ingest(Path::new(&args.data.input), args.data.response.as_deref())?;
    let cfg = reduction_config(&args.reduction, args.seed)?;
    let outcome = run_reduction(&ds, &cfg)?;
    let stability = stability_report(&outcome);
    let mut text = dataset_note(&ds);
    text.push_str(&report::render_reduction(&outcome, &stability));
    write_report(
        &dir,
        "reduction_trace",
        &text,
        &json!({
            "dataset": {"n": ds.n(), "p": ds.p(), "response": ds.response_name,
                         "constant_columns": ds.constant_cols, "version": report::VERSION},
            "outcome": outcome,
            "stability": stability,
        }),
    )?;
    println!("comprehensive model: {:?}", outcome.comprehensive);
    println!("reports written to {}", dir.display());
    Ok(())
}

fn parse_members(text: &str, ds: &DataSet) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    for token in text.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let idx = match token.parse::<usize>() {
            Ok(i) if i < ds.p() => i,
            Ok(i) => bail!(config_err(format!("column index {i} out of range"))),
            Err(_) => ds
                .names
                .iter()
                .position(|n| n == token)
                .ok_or_else(|| config_err(format!("unknown column '{token}'")))?,
        };
        out.insert(idx);
    }
    if out.is_empty() {
        bail!(config_err("--members must name at least one column"));
    }
    Ok(out)
}

fn confset_cmd(args: ConfsetArgs) -> Result<()> {
    let dir = ensure_dir(&args.output)?;
    let ds = ingest(Path::new(&args.data.input), args.data.response.as_deref())?;
    let members = parse_members(&args.members, &ds)?;
    let cfg = ConfSetConfig {
        theta_level: args.theta,
        s_max: args.smax,
        sigma: parse_sigma(&args.sigma)?,
        budget: args.budget,
    };
    let mcs = build_confidence_set(&ds.y, &ds.x, &members, &cfg)?;
    let mut text = dataset_note(&ds);
    text.push_str(&report::render_confidence_set(&mcs));
    write_report(
        &dir,
        "confidence_set",
        &text,
        &json!({"config": cfg, "result": mcs, "version": report::VERSION}),
    )?;
    println!(
        "tested {} models, accepted {}",
        mcs.tested, mcs.accepted_count
    );
    println!("reports written to {}", dir.display());
    Ok(())
}

fn pipeline_cmd(args: PipelineArgs) -> Result<()> {
    let dir = ensure_dir(&args.output)?;
    let ds = ingest(Path::new(&args.data.input), args.data.response.as_deref())?;
    let red_cfg = reduction_config(&args.reduction, args.seed)?;
    let outcome = run_reduction(&ds, &red_cfg)?;
    let stability = stability_report(&outcome);
    let mut trace = dataset_note(&ds);
    trace.push_str(&report::render_reduction(&outcome, &stability));
    write_report(
        &dir,
        "reduction_trace",
        &trace,
        &json!({
            "dataset": {"n": ds.n(), "p": ds.p(), "response": ds.response_name,
                         "constant_columns": ds.constant_cols, "version": report::VERSION},
            "outcome": outcome,
            "stability": stability,
        }),
    )?;
    if outcome.comprehensive.is_empty() {
        println!("comprehensive model is empty; no models to assess");
        fs::write(
            dir.join("confidence_set.txt"),
            "comprehensive model is empty\n",
        )?;
        return Ok(());
    }
    // model assessment on the first-round part, re-centred
    let rows = &outcome.subsample.0;
    let y_a = coxset::linalg::centre_vector(&ds.y.select_rows(rows))?.0;
    let x_a = coxset::linalg::centre_matrix(&ds.x.select_rows(rows))?.values;
    let cs_cfg = ConfSetConfig {
        theta_level: args.theta,
        s_max: args.smax,
        sigma: parse_sigma(&args.reduction.sigma)?,
        budget: args.budget,
    };
    let mcs = build_confidence_set(&y_a, &x_a, &outcome.comprehensive, &cs_cfg)?;
    let mut cs_text = format!("assessment rows: first-round part ({})\n", rows.len());
    cs_text.push_str(&report::render_confidence_set(&mcs));
    write_report(
        &dir,
        "confidence_set",
        &cs_text,
        &json!({"config": cs_cfg, "result": mcs, "version": report::VERSION}),
    )?;
    if let Some(xnew_text) = &args.xnew {
        let values: Vec<f64> = xnew_text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| config_err(format!("--xnew: cannot parse '{t}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != ds.p() {
            bail!(config_err(format!(
                "--xnew needs {} values, got {}",
                ds.p(),
                values.len()
            )));
        }
        let x_new = DVector::from_vec(values);
        let table = prediction_intervals(
            &mcs,
            &y_a,
            &x_a,
            &x_new,
            args.level,
            parse_sigma(&args.reduction.sigma)?,
        )?;
        write_report(
            &dir,
            "intervals",
            &report::render_intervals(&table),
            &json!({"level": args.level, "table": table, "version": report::VERSION}),
        )?;
    }
    println!(
        "comprehensive model: {:?}; accepted {} of {} models",
        outcome.comprehensive, mcs.accepted_count, mcs.tested
    );
    println!("reports written to {}", dir.display());
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let dir = ensure_dir(&args.output)?;
    let ds = ingest(Path::new(&args.data.input), args.data.response.as_deref())?;
    if args.shat == 0 {
        bail!(config_err("--shat must be at least 1"));
    }
    let mut text = dataset_note(&ds);
    let json_value = match args.method {
        CompareMethod::Marginal => {
            let res = coxset::comparators::marginal_screen(&ds.y, &ds.x, args.shat)?;
            text.push_str(&format!(
                "# marginal screening (coxset {})\nkept = {:?}\n",
                report::VERSION,
                res.kept
            ));
            text.push_str("rank | column | |corr|\n");
            for (rank, idx) in res.ranking.iter().enumerate().take(args.shat.min(50)) {
                text.push_str(&format!(
                    "{rank} | {} | {:.6}\n",
                    ds.names[*idx], res.scores[*idx]
                ));
            }
            json!({"method": "marginal", "result": res, "version": report::VERSION})
        }
        CompareMethod::Lasso => {
            let res = coxset::comparators::lasso_undertuned_support(&ds.y, &ds.x, args.shat)?;
            text.push_str(&format!(
                "# undertuned penalised support (coxset {})\nlambda = {}\ngrid_exhausted = {}\nsupport = {:?}\n",
                report::VERSION,
                res.lambda,
                res.grid_exhausted,
                res.support
            ));
            json!({"method": "lasso", "result": res, "version": report::VERSION})
        }
    };
    write_report(&dir, "comparison", &text, &json_value)?;
    println!("reports written to {}", dir.display());
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    if let Experiment::Generate = args.experiment {
        let spec = GenSpec {
            n: args.n,
            p: args.p,
            support: vec![0, 1, 2, 3],
            theta: vec![1.0; 4],
            sigma: 1.0,
            law: CovariateLaw::IidGaussian,
            seed: args.seed,
        };
        let gen = simulation::generate(&spec)?;
        let names: Vec<String> = (0..spec.p).map(|j| format!("x{j}")).collect();
        write_csv(Path::new(&args.output), &gen.y, &gen.x, "y", &names)?;
        println!("wrote {} rows to {}", args.n, args.output);
        return Ok(());
    }
    let dir = ensure_dir(&args.output)?;
    let report_value = match args.experiment {
        Experiment::Spurious => simulation::spurious_correlation_experiment(
            &[50, 100, 200, 400],
            500,
            8,
            args.replicates,
            args.seed,
        )?,
        Experiment::Retention => simulation::retention_probability_experiment(
            10,
            9,
            300,
            args.replicates.max(10_000),
            args.replicates.min(500),
            args.seed,
        )?,
        Experiment::Companions => simulation::companion_count_experiment(
            &[4, 8, 12],
            &[4, 5, 6],
            args.replicates,
            args.seed,
        )?,
        Experiment::Coverage => {
            let spec = GenSpec {
                n: args.n,
                p: args.p,
                support: vec![0, 1, 2, 3],
                theta: vec![1.0; 4],
                sigma: 1.0,
                law: CovariateLaw::IidGaussian,
                seed: args.seed,
            };
            let side = coxset::hypercube::choose_shape(args.p, 3).1 + 2;
            let red = ReductionConfig {
                rerandomisations: 5,
                alpha: 0.005,
                side_round1: Some(side),
                sigma: SigmaMode::Known(1.0),
                ..ReductionConfig::default()
            };
            simulation::coverage_experiment(
                &spec,
                &red,
                0.05,
                4,
                args.replicates,
                2_000,
                args.seed,
            )?
        }
        Experiment::Noncentral => {
            simulation::noncentral_moment_suite(args.replicates.max(2_000), args.seed)?
        }
        Experiment::Contrast => {
            simulation::comparator_contrast_experiment(args.replicates, args.seed)?
        }
        Experiment::Generate => unreachable!(),
    };
    let text = report::render_experiment(&report_value);
    print!("{text}");
    if let Some(table) = &report_value.replicate_table {
        fs::write(dir.join("replicates.csv"), table.to_dsv())?;
    }
    write_report(
        &dir,
        "experiment",
        &text,
        &json!({"report": report_value, "version": report::VERSION}),
    )?;
    if !report_value.pass {
        bail!(anyhow!(NumericalFailure(
            "experiment assertions failed".into()
        )));
    }
    Ok(())
}

fn verify_cmd(args: VerifyArgs) -> Result<()> {
    let only: Option<BTreeSet<usize>> = match &args.only {
        Some(text) => Some(
            text.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| config_err(format!("--only: bad id '{t}'")))
                })
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let all: Vec<fn() -> coxset::verify::CriterionResult> = vec![
        coxset::verify::c01_wald_identity,
        coxset::verify::c02_cochran_identity,
        coxset::verify::c03_block_correlation,
        coxset::verify::c04_signal_noise_split,
        coxset::verify::c05_companion_means,
        coxset::verify::c06_unaccompanied_bound,
        coxset::verify::c07_noncentral_moments,
        coxset::verify::c08_coverage,
        coxset::verify::c09_comparator_contrasts,
        coxset::verify::c10_determinism,
        coxset::verify::c11_chisq_quantiles,
        coxset::verify::c12_lasso_kkt,
    ];
    let mut pass = true;
    for (i, f) in all.iter().enumerate() {
        let id = i + 1;
        if let Some(filter) = &only {
            if !filter.contains(&id) {
                continue;
            }
        }
        let result = f();
        println!("{}", result.line());
        pass &= result.pass;
    }
    if !pass {
        bail!(anyhow!(NumericalFailure("verification failed".into())));
    }
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!(config_err("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| config_err(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Reduce(args) => reduce_cmd(args),
        Command::Confset(args) => confset_cmd(args),
        Command::Pipeline(args) => pipeline_cmd(args),
        Command::Compare(args) => compare_cmd(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::Verify(args) => verify_cmd(args),
    }
}
