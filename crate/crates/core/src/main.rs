//! Command-line front end: run experiments, evaluate stopping criteria over
//! recorded traces, and analyze cost scenarios.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 run failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alstop::cost::{
    apply_treatment, dataset_worst, default_axes, pareto_frontier, region_map, scenario_rank,
    CostParams, Treatment,
};
use alstop::criteria::{catalogue_json, default_catalogue, CriterionId, CriterionSpec};
use alstop::data::Dataset;
use alstop::error::Error;
use alstop::harness::{
    al_potential, evaluate_all, load_traces, outcomes_from_rows, read_decisions_csv,
    run_experiments, write_decisions_csv, ExperimentConfig,
};
use alstop::stats::{cd_diagram_data, RankMatrix};
use alstop::svg::{render_cd_diagram, render_pareto, render_region_map};

#[derive(Parser)]
#[command(
    name = "alstop",
    version,
    about = "Active-learning stopping-criterion evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the active-learning experiments described by a config file.
    Run {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate stopping criteria over a directory of recorded traces.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Trace directory; defaults to `<output_dir>/traces`.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Output directory; defaults to the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated criterion ids; defaults to the full catalogue.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<String>,
    },
    /// Rank criteria by mean cost for a concrete scenario, or map optimal
    /// regions over a cost grid.
    Cost(CostArgs),
    /// Friedman/Nemenyi critical-difference data for a cost scenario.
    Rank {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Significance level of the grouping (only 0.05 is supported).
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the accuracy gap between training on half the data and on a
    /// 10-instance initial set, per dataset.
    Potential {
        #[arg(long)]
        config: PathBuf,
        /// Learner kind to probe with; defaults to every configured learner.
        #[arg(long)]
        learner: Option<String>,
        /// Splits to average over.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Export Pareto, region, and correlation summaries from an evaluation.
    Report {
        /// decisions.csv produced by `evaluate`.
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "penalize")]
        treatment: String,
        #[arg(long, default_value = "linear")]
        model: String,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// decisions.csv produced by `evaluate`.
    #[arg(long)]
    decisions: PathBuf,
    /// Price of one label (l).
    #[arg(long)]
    label_cost: f64,
    /// Price of one misclassification (m).
    #[arg(long)]
    misclass_cost: f64,
    /// Lifetime prediction count (n).
    #[arg(long)]
    lifetime: f64,
    /// Treatment of criteria that fail to stop: penalize, include, exclude.
    #[arg(long, default_value = "penalize")]
    treatment: String,
    /// Model whose runs are analyzed.
    #[arg(long, default_value = "linear")]
    model: String,
}

#[derive(Args)]
struct CostArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Emit a cost-region map over (n*m, l) axes instead of a fixed ranking.
    #[arg(long)]
    region: bool,
    /// Wilcoxon significance level for region winners.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output directory for CSV/JSON/SVG exports.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Inapplicable { .. } => 1,
        Error::Parse { .. }
        | Error::InvalidDataset(_)
        | Error::TraceFormat(_)
        | Error::TraceVersion { .. }
        | Error::TraceRecord { .. }
        | Error::EmptyInput(_)
        | Error::Json(_) => 2,
        Error::Learner(_)
        | Error::Io(_)
        | Error::DimensionMismatch { .. }
        | Error::UndefinedCorrelation(_) => 3,
    }
}

fn main() -> ExitCode {
    // default SIGPIPE disposition so piping into `head` terminates quietly
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn parse_treatment(s: &str) -> Result<Treatment, Error> {
    Treatment::parse(s).ok_or_else(|| Error::InvalidArgument(format!("unknown treatment '{s}'")))
}

fn load_config_datasets(config: &ExperimentConfig) -> Result<BTreeMap<String, Dataset>, Error> {
    let mut datasets = BTreeMap::new();
    for ds_cfg in &config.datasets {
        let ds = ds_cfg.load()?;
        datasets.insert(ds.name.clone(), ds);
    }
    Ok(datasets)
}

fn scenario_outcomes(
    args: &ScenarioArgs,
) -> Result<(Vec<alstop::cost::CriterionOutcome>, CostParams), Error> {
    let rows = read_decisions_csv(&args.decisions)?;
    let outcomes = outcomes_from_rows(&rows, &args.model);
    if outcomes.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no runs for model '{}' in {}",
            args.model,
            args.decisions.display()
        )));
    }
    let params = CostParams::new(args.label_cost, args.misclass_cost, args.lifetime)?;
    Ok((outcomes, params))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            let manifest = run_experiments(&config)?;
            let ok = manifest.runs.iter().filter(|r| r.status == "ok").count();
            println!(
                "completed {}/{} runs into {}",
                ok,
                manifest.runs.len(),
                config.output_dir.display()
            );
            Ok(())
        }
        Command::Evaluate {
            config,
            traces,
            out,
            criteria,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let trace_dir = traces.unwrap_or_else(|| config.output_dir.join("traces"));
            let out_dir = out.unwrap_or_else(|| config.output_dir.clone());
            fs::create_dir_all(&out_dir)?;
            let specs = if criteria.is_empty() {
                config.criteria_specs()
            } else {
                select_criteria(&criteria)?
            };
            let traces = load_traces(&trace_dir)?;
            let datasets = load_config_datasets(&config)?;
            let report = evaluate_all(&traces, &specs, &datasets)?;
            write_decisions_csv(&out_dir.join("decisions.csv"), &report.rows)?;
            fs::write(
                out_dir.join("summary.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            fs::write(out_dir.join("catalogue.json"), catalogue_json())?;
            println!(
                "evaluated {} traces x {} criteria -> {}",
                traces.len(),
                specs.len(),
                out_dir.join("decisions.csv").display()
            );
            for rate in &report.stop_rates {
                println!(
                    "  {:<26} stops {:>3}/{:<3} ({:.0}%)",
                    rate.criterion.to_string(),
                    rate.stops,
                    rate.runs,
                    rate.rate * 100.0
                );
            }
            Ok(())
        }
        Command::Cost(args) => run_cost(args),
        Command::Rank {
            scenario,
            alpha,
            out,
        } => {
            let treatment = parse_treatment(&scenario.treatment)?;
            let (outcomes, params) = scenario_outcomes(&scenario)?;
            let worst = dataset_worst(&outcomes);
            let (treated, warnings) = apply_treatment(&outcomes, treatment, &worst);
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            // matched problems: (dataset, seed) runs shared by all criteria
            let matrix = cost_rank_matrix(&treated, &params)?;
            let diagram = cd_diagram_data(&matrix, alpha)?;
            let names: Vec<String> = treated.iter().map(|o| o.criterion.to_string()).collect();
            println!(
                "friedman chi2 = {:.4}, p = {:.4}, CD = {:.4}",
                diagram.friedman_stat, diagram.friedman_p, diagram.cd
            );
            for (rank, (&col, mean)) in diagram.order.iter().zip(&diagram.mean_ranks).enumerate() {
                println!(
                    "  {:>2}. {:<26} mean rank {:.3}",
                    rank + 1,
                    names[col],
                    mean
                );
            }
            if let Some(out) = out {
                fs::create_dir_all(&out)?;
                let payload = serde_json::json!({
                    "criteria": names,
                    "diagram": diagram,
                });
                fs::write(out.join("cd.json"), serde_json::to_string_pretty(&payload)?)?;
                fs::write(out.join("cd.svg"), render_cd_diagram(&diagram, &names))?;
                println!("wrote {}", out.join("cd.json").display());
            }
            Ok(())
        }
        Command::Potential {
            config,
            learner,
            repeats,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let learners: Vec<_> = match &learner {
                Some(kind) => config
                    .learners
                    .iter()
                    .filter(|l| l.kind.name() == kind)
                    .cloned()
                    .collect(),
                None => config.learners.clone(),
            };
            if learners.is_empty() {
                return Err(Error::InvalidArgument(
                    "no matching learner in config".into(),
                ));
            }
            println!("dataset,learner,potential,stderr");
            for ds_cfg in &config.datasets {
                let dataset = ds_cfg.load()?;
                for spec in &learners {
                    let values: Result<Vec<f64>, Error> = (0..repeats.max(1))
                        .map(|r| {
                            al_potential(
                                &dataset,
                                spec,
                                alstop::harness::derive_seed(
                                    config.base_seed,
                                    &[b"potential", dataset.name.as_bytes(), &r.to_le_bytes()],
                                ),
                            )
                        })
                        .collect();
                    let values = values?;
                    let n = values.len() as f64;
                    let mean = values.iter().sum::<f64>() / n;
                    let se = if values.len() > 1 {
                        let var =
                            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                        (var / n).sqrt()
                    } else {
                        0.0
                    };
                    println!("{},{},{mean:.4},{se:.4}", dataset.name, spec.kind);
                }
            }
            Ok(())
        }
        Command::Report {
            decisions,
            out,
            treatment,
            model,
        } => {
            let treatment = parse_treatment(&treatment)?;
            let rows = read_decisions_csv(&decisions)?;
            let outcomes = outcomes_from_rows(&rows, &model);
            if outcomes.is_empty() {
                return Err(Error::EmptyInput(format!("no runs for model '{model}'")));
            }
            fs::create_dir_all(&out)?;

            // Pareto over per-run (labels, accuracy) points of stopped runs
            let mut points = Vec::new();
            let mut point_criteria = Vec::new();
            for outcome in &outcomes {
                for run in outcome.runs.iter().filter(|r| r.stopped) {
                    points.push((run.labels, run.accuracy));
                    point_criteria.push(outcome.criterion);
                }
            }
            let frontier = pareto_frontier(&points);
            write_pareto_csv(&out.join("pareto.csv"), &points, &point_criteria, &frontier)?;
            fs::write(out.join("pareto.svg"), render_pareto(&points, &frontier))?;

            // region map on default axes
            let (nm_axis, l_axis) = default_axes();
            let grid = region_map(&outcomes, &nm_axis, &l_axis, treatment, 0.05)?;
            fs::write(
                out.join("region.json"),
                serde_json::to_string_pretty(&grid)?,
            )?;
            write_region_csv(&out.join("region.csv"), &grid)?;
            fs::write(out.join("region.svg"), render_region_map(&grid))?;

            // correlation summary straight from the rows
            let report = alstop::harness::EvaluationReport::aggregate(rows);
            fs::write(
                out.join("correlations.json"),
                serde_json::to_string_pretty(&report.correlations)?,
            )?;
            println!(
                "wrote pareto/region/correlation exports to {}",
                out.display()
            );
            Ok(())
        }
    }
}

fn run_cost(args: CostArgs) -> Result<(), Error> {
    let treatment = parse_treatment(&args.scenario.treatment)?;
    let (outcomes, params) = scenario_outcomes(&args.scenario)?;
    if args.region {
        let (nm_axis, l_axis) = default_axes();
        let grid = region_map(&outcomes, &nm_axis, &l_axis, treatment, args.alpha)?;
        let named = grid
            .cells
            .iter()
            .filter_map(|c| c.map(|id| id.name()))
            .collect::<std::collections::BTreeSet<_>>();
        println!(
            "region winners: {}",
            named.into_iter().collect::<Vec<_>>().join(", ")
        );
        if let Some(out) = &args.out {
            fs::create_dir_all(out)?;
            fs::write(
                out.join("region.json"),
                serde_json::to_string_pretty(&grid)?,
            )?;
            write_region_csv(&out.join("region.csv"), &grid)?;
            fs::write(out.join("region.svg"), render_region_map(&grid))?;
            println!("wrote {}", out.join("region.json").display());
        }
        return Ok(());
    }

    let worst = dataset_worst(&outcomes);
    let (treated, warnings) = apply_treatment(&outcomes, treatment, &worst);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let ranking = scenario_rank(&treated, &params)?;
    println!("criterion,mean_cost,mean_accuracy,mean_labels");
    for entry in &ranking {
        println!(
            "{},{:.2},{:.4},{:.1}",
            entry.criterion, entry.mean_cost, entry.mean_accuracy, entry.mean_labels
        );
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(
            out.join("ranking.json"),
            serde_json::to_string_pretty(&ranking)?,
        )?;
        let mut w = csv::Writer::from_path(out.join("ranking.csv"))
            .map_err(|e| Error::Config(e.to_string()))?;
        for entry in &ranking {
            w.serialize(entry)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Config(e.to_string()))?;
        println!("wrote {}", out.join("ranking.csv").display());
    }
    Ok(())
}

fn select_criteria(names: &[String]) -> Result<Vec<CriterionSpec>, Error> {
    if names.is_empty() {
        return Ok(default_catalogue());
    }
    names
        .iter()
        .map(|name| {
            CriterionId::parse(name)
                .map(CriterionSpec::default_for)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion '{name}'")))
        })
        .collect()
}

/// Cost matrix over matched problems: rows are (dataset, seed) runs present
/// for every criterion, columns are criteria.
fn cost_rank_matrix(
    outcomes: &[alstop::cost::CriterionOutcome],
    params: &CostParams,
) -> Result<RankMatrix, Error> {
    use std::collections::BTreeSet;
    let mut shared: Option<BTreeSet<(String, u64)>> = None;
    for outcome in outcomes {
        let keys: BTreeSet<(String, u64)> = outcome
            .runs
            .iter()
            .map(|r| (r.dataset_id.clone(), r.run_seed))
            .collect();
        shared = Some(match shared {
            None => keys,
            Some(prev) => prev.intersection(&keys).cloned().collect(),
        });
    }
    let shared = shared.unwrap_or_default();
    if shared.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 matched runs across all criteria".into(),
        ));
    }
    let mut values = Vec::with_capacity(shared.len() * outcomes.len());
    for key in &shared {
        for outcome in outcomes {
            let run = outcome
                .runs
                .iter()
                .find(|r| (&r.dataset_id, r.run_seed) == (&key.0, key.1))
                .expect("matched run");
            values.push(alstop::cost::cost(run.accuracy, run.labels, params)?);
        }
    }
    RankMatrix::new(shared.len(), outcomes.len(), values)
}

fn write_pareto_csv(
    path: &Path,
    points: &[(usize, f64)],
    criteria: &[CriterionId],
    frontier: &[usize],
) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    w.write_record(["criterion", "labels", "accuracy", "on_frontier"])
        .map_err(|e| Error::Config(e.to_string()))?;
    for (i, ((labels, acc), criterion)) in points.iter().zip(criteria).enumerate() {
        w.write_record([
            criterion.name().to_string(),
            labels.to_string(),
            format!("{acc}"),
            frontier.contains(&i).to_string(),
        ])
        .map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))?;
    Ok(())
}

fn write_region_csv(path: &Path, grid: &alstop::cost::RegionGrid) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    w.write_record(["nm", "l", "winner"])
        .map_err(|e| Error::Config(e.to_string()))?;
    for (li, l) in grid.l_values.iter().enumerate() {
        for (ni, nm) in grid.nm_values.iter().enumerate() {
            let winner = grid
                .cell(li, ni)
                .map(|c| c.name())
                .unwrap_or("indeterminate");
            w.write_record([format!("{nm}"), format!("{l}"), winner.to_string()])
                .map_err(|e| Error::Config(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))?;
    Ok(())
}
