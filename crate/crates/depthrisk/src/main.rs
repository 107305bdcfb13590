use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};
use depthrisk::config::{self, set_override};
use depthrisk::core::experiments::{rate_table, run_convergence, run_replications, ExperimentConfig};
use depthrisk::core::{
    attach_costs, boundary_points, ccte_hat, ccte_hat_split, fit_model, hausdorff_boundaries, mhd, mhd_gradient,
    sample_risk_factors, sup_norm_distance, sym_diff_volume, DepthModel, LevelSetSpec, Probe, RngStream,
};
use depthrisk::io::{parse_grid, read_costed, read_model, read_points, to_json, write_atomic};
use depthrisk::report::{self, Manifest};
use depthrisk::{Error, RayonExecutor, Result};
use serde::Serialize;
use serde_json::json;

/// Mahalanobis depth, depth level sets and depth-based conditional tail
/// expectation.
///
/// Progress goes to stderr; stdout carries only the JSON summary requested
/// with --json.
#[derive(Parser)]
#[command(name = "depthrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Depth and gradient at each point.
    Depth(DepthArgs),
    /// Boundary of a lower level set and distances to a reference model.
    Levelset(LevelsetArgs),
    /// Plug-in estimate of the conditional tail expectation.
    Ccte(CcteArgs),
    /// Replication study over an (n, alpha) grid.
    Experiment(ExperimentArgs),
    /// Convergence of the fitted depth and its level sets.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Model JSON: {"mu": [...], "sigma": [[...]]}.
    #[arg(long)]
    model: Option<PathBuf>,
    /// CSV sample to fit the model on.
    #[arg(long)]
    fit: Option<PathBuf>,
}

#[derive(Args)]
struct DepthArgs {
    #[command(flatten)]
    source: ModelSource,
    /// CSV of points, one per row.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    points: Option<PathBuf>,
    /// Product grid "x0:x1:nx,y0:y1:ny".
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Args)]
struct LevelsetArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long)]
    alpha: f64,
    /// Points written on the boundary.
    #[arg(long, default_value_t = 256)]
    boundary_points: usize,
    /// Model JSON to compare against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Monte Carlo draws for the symmetric difference.
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
}

#[derive(Args)]
struct CcteArgs {
    #[arg(long)]
    alpha: f64,
    /// CSV sample that fits the depth.
    #[arg(long, requires = "cost")]
    level: Option<PathBuf>,
    /// CSV sample whose last column is the cost.
    #[arg(long, requires = "level")]
    cost: Option<PathBuf>,
    /// Costed CSV sample split into halves.
    #[arg(long, conflicts_with_all = ["level", "cost"])]
    sample: Option<PathBuf>,
    /// Draws per half when sampling from --config.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    truth_n_mc: Option<usize>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    seeds: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("depthrisk: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Depth(a) => depth(cli, a),
        Command::Levelset(a) => levelset(cli, a),
        Command::Ccte(a) => ccte(cli, a),
        Command::Experiment(a) => experiment(cli, a),
        Command::Convergence(a) => convergence(cli, a),
    }
}

fn no_config(cli: &Cli, command: &str) -> Result<()> {
    match cli.config {
        Some(_) => Err(Error::Usage(format!("{command} takes no --config"))),
        None => Ok(()),
    }
}

fn load_model(source: &ModelSource) -> Result<DepthModel> {
    match (&source.model, &source.fit) {
        (Some(path), _) => read_model(path),
        (None, Some(path)) => Ok(fit_model(&read_points(path, None)?)?),
        (None, None) => Err(Error::Usage(String::from("give --model or --fit"))),
    }
}

fn print_json<T: Serialize>(cli: &Cli, value: &T) {
    if cli.json {
        print!("{}", to_json(value));
    }
}

fn depth(cli: &Cli, a: &DepthArgs) -> Result<()> {
    no_config(cli, "depth")?;
    let model = load_model(&a.source)?;
    let points = match (&a.points, &a.grid) {
        (Some(path), _) => read_points(path, Some(model.dim()))?
            .points()
            .map(<[f64]>::to_vec)
            .collect(),
        (None, Some(spec)) => parse_grid(spec)?,
        (None, None) => return Err(Error::Usage(String::from("give --points or --grid"))),
    };
    if let Some(p) = points.iter().find(|p| p.len() != model.dim()) {
        return Err(Error::Usage(format!(
            "grid has {} axes but the model has dimension {}",
            p.len(),
            model.dim()
        )));
    }
    let depths = points.iter().map(|p| mhd(p, &model)).collect::<Result<Vec<_>, _>>()?;
    let gradients = points
        .iter()
        .map(|p| mhd_gradient(p, &model))
        .collect::<Result<Vec<_>, _>>()?;
    let path = cli.output_dir.join("depth.csv");
    write_atomic(&path, &report::depth_csv(&points, &depths, &gradients))?;
    eprintln!("depth: {} points written to {}", points.len(), path.display());
    let rows: Vec<_> = points
        .iter()
        .zip(&depths)
        .zip(&gradients)
        .map(|((p, d), g)| json!({ "point": p, "depth": d, "gradient": g }))
        .collect();
    print_json(cli, &json!({ "rows": rows }));
    Ok(())
}

fn levelset(cli: &Cli, a: &LevelsetArgs) -> Result<()> {
    no_config(cli, "levelset")?;
    let model = load_model(&a.source)?;
    let spec = LevelSetSpec::new(model, a.alpha)?;
    let boundary = boundary_points(&spec, a.boundary_points)?;
    write_atomic(&cli.output_dir.join("boundary.csv"), &report::points_csv(&boundary))?;
    let mut summary = json!({
        "alpha": a.alpha,
        "mahalanobis_radius_sq": spec.radius_sq(),
        "boundary_points": boundary.len(),
    });
    if let Some(path) = &a.reference {
        let reference = read_model(path)?;
        let other = LevelSetSpec::new(reference.clone(), a.alpha)?;
        let mut rng = RngStream::new(cli.seed.unwrap_or(0), 0);
        let mut probe = Probe::auto(&spec.model, &reference)?;
        probe.seed = rng.next_u64();
        let h = hausdorff_boundaries(&spec, &other, a.boundary_points.max(64))?;
        let sd = sym_diff_volume(&spec, &other, a.n_mc, &mut rng)?;
        summary["sup_norm"] = json!(sup_norm_distance(&spec.model, &reference, &probe)?);
        summary["hausdorff"] = json!(h.distance);
        summary["hausdorff_resolution"] = json!(h.resolution);
        summary["sym_diff_volume"] = json!(sd.estimate);
        summary["sym_diff_std_error"] = json!(sd.std_error);
    }
    write_atomic(&cli.output_dir.join("levelset.json"), to_json(&summary).as_bytes())?;
    eprintln!(
        "levelset: {} boundary points written to {}",
        boundary.len(),
        cli.output_dir.display()
    );
    print_json(cli, &summary);
    Ok(())
}

fn ccte(cli: &Cli, a: &CcteArgs) -> Result<()> {
    let estimate = match (&a.level, &a.cost, &a.sample, &cli.config) {
        (Some(level), Some(cost), None, None) => {
            let level = read_points(level, None)?;
            ccte_hat(&level, &read_costed(cost, Some(level.dim()))?, a.alpha)?
        }
        (None, None, Some(sample), None) => ccte_hat_split(&read_costed(sample, None)?, a.alpha)?,
        (None, None, None, Some(path)) => {
            let mut value = config::read_json(path)?;
            if let Some(seed) = cli.seed {
                set_override(&mut value, "seed", seed);
            }
            let cfg = config::sampling_from_value(value)?;
            let n =
                a.n.ok_or_else(|| Error::Usage(String::from("--n is required with --config")))?;
            let source = cfg.frank_gumbel();
            let mut rng = RngStream::new(cfg.seed, 0);
            let level = sample_risk_factors(n, &source, &mut rng)?;
            let cost = attach_costs(sample_risk_factors(n, &source, &mut rng)?, source.noise_var, &mut rng)?;
            ccte_hat(&level, &cost, a.alpha)?
        }
        _ => {
            return Err(Error::Usage(String::from(
                "give exactly one data source: --level with --cost, --sample, or --config with --n",
            )))
        }
    };
    let text = to_json(&estimate);
    write_atomic(&cli.output_dir.join("estimate.json"), text.as_bytes())?;
    eprintln!(
        "ccte: {} over {} of {} cost points{}",
        estimate.value,
        estimate.hits,
        estimate.n2,
        if estimate.degenerate {
            " (empty level set, reported as 0)"
        } else {
            ""
        }
    );
    print_json(cli, &estimate);
    Ok(())
}

fn required_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Usage(String::from("--config is required")))
}

/// Cell aggregates without the per-replicate estimates.
#[derive(Serialize)]
struct CellSummary {
    n: usize,
    alpha: f64,
    truth: f64,
    truth_se: f64,
    mean: f64,
    sigma_hat: f64,
    rmae: f64,
    degenerate_count: usize,
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    let mut value = config::read_json(required_config(cli)?)?;
    if let Some(seed) = cli.seed {
        set_override(&mut value, "master_seed", seed);
    }
    if let Some(r) = a.replications {
        set_override(&mut value, "replications", r);
    }
    if let Some(m) = a.truth_n_mc {
        set_override(&mut value, "truth_n_mc", m);
    }
    let cfg: ExperimentConfig = config::experiment_from_value(value)?;
    let exec = RayonExecutor::new(cli.threads)?;
    eprintln!(
        "experiment: {} cells x {} replicates, truth from {} draws, {} threads",
        cfg.n_values.len() * cfg.alpha_values.len(),
        cfg.replications,
        cfg.truth_n_mc,
        exec.threads()
    );
    let started = SystemTime::now();
    let clock = Instant::now();
    let report = run_replications(&cfg, &exec)?;
    let rates = rate_table(&report, &cfg.delta_values);
    let manifest = Manifest::new(&cfg, cfg.master_seed, exec.threads(), started, clock.elapsed());
    report::write_experiment(&cli.output_dir, &report, &rates, &manifest)?;
    eprintln!(
        "experiment: done in {:.1} s, tables in {}",
        clock.elapsed().as_secs_f64(),
        cli.output_dir.display()
    );
    let cells: Vec<CellSummary> = report
        .cells
        .iter()
        .map(|c| CellSummary {
            n: c.n,
            alpha: c.alpha,
            truth: c.truth,
            truth_se: c.truth_se,
            mean: c.mean,
            sigma_hat: c.sigma_hat,
            rmae: c.rmae,
            degenerate_count: c.degenerate_count,
        })
        .collect();
    print_json(cli, &json!({ "cells": cells, "rates": rates }));
    Ok(())
}

fn convergence(cli: &Cli, a: &ConvergenceArgs) -> Result<()> {
    let mut value = config::read_json(required_config(cli)?)?;
    if let Some(seed) = cli.seed {
        set_override(&mut value, "master_seed", seed);
    }
    if let Some(s) = a.seeds {
        set_override(&mut value, "seeds", s);
    }
    let cfg = config::convergence_from_value(value)?;
    let exec = RayonExecutor::new(cli.threads)?;
    eprintln!(
        "convergence: {} sizes x {} seeds, {} threads",
        cfg.n_values.len(),
        cfg.seeds,
        exec.threads()
    );
    let started = SystemTime::now();
    let clock = Instant::now();
    let report = run_convergence(&cfg, &exec)?;
    let manifest = Manifest::new(&cfg, cfg.master_seed, exec.threads(), started, clock.elapsed());
    report::write_convergence(&cli.output_dir, &report, &manifest)?;
    eprintln!(
        "convergence: done in {:.1} s, table in {}",
        clock.elapsed().as_secs_f64(),
        cli.output_dir.display()
    );
    print_json(cli, &report);
    Ok(())
}
