use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wfr_core::action::{ModelKind, ModelSpec};
use wfr_core::analytic::{
    build_dirac_certificate, check_dirac_certificate, distance_upper_bound, fisher_rao_distance_squared, gbb_distance,
    gbb_rate_of_growth, gbb_singular_time, wfr_dirac_geodesic, DiracPairGeodesic, GridMeasure,
};
use wfr_core::grids::{BoundaryData, GridSpec};
use wfr_core::solver::{delta_ladder_with, dr_solve, GeodesicResult, Ladder, SolverConfig, SolverReport};

use crate::io::{create_dir, read_density, write_file, DensityFile, Table};
use crate::manifest::{RunManifest, SolverSettings};
use crate::{CliError, CONVENTION};

#[derive(Debug, Parser)]
#[command(name = "wfr", version, about = "Unbalanced optimal transport geodesics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a geodesic and write frames, a summary and plot data.
    Solve(SolveArgs),
    /// Closed-form quantities.
    #[command(subcommand)]
    Analytic(AnalyticCommand),
    /// Solve over a ladder of length scales and compare with both limit models.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Time steps.
    #[arg(long, default_value_t = 11)]
    pub nt: usize,
    /// Prox step; picked from the data when omitted.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Relaxation in (0, 2).
    #[arg(long, default_value_t = 1.8)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Recorded in the manifest only.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub rho0: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub rho1: Option<PathBuf>,
    /// wfr, w2, partial, l2source or fr.
    #[arg(long, default_value = "wfr", value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub out: PathBuf,
    /// Rerun from a manifest or a summary.json; other run flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub rho0: PathBuf,
    #[arg(long)]
    pub rho1: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    pub deltas: Vec<f64>,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiracArgs {
    #[arg(long)]
    pub h0: f64,
    #[arg(long)]
    pub h1: f64,
    /// Position, comma separated in 2D.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Vec<f64>,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub rho0: PathBuf,
    #[arg(long)]
    pub rho1: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnalyticCommand {
    /// Distance between two weighted Diracs.
    DiracDistance(DiracArgs),
    /// Geodesic between two weighted Diracs, sampled in time.
    DiracGeodesic {
        #[command(flatten)]
        dirac: DiracArgs,
        #[arg(long, default_value_t = 11)]
        samples: usize,
    },
    /// Pure creation/destruction distance between two densities.
    FisherRao {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Large length scale limit (1D, positive masses).
    Gbb(PairArgs),
    /// Upper bounds on the squared distance.
    Bounds {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        delta: f64,
    },
    /// Builds the optimality certificate of a travelling Dirac and checks it.
    CertificateCheck {
        #[command(flatten)]
        dirac: DiracArgs,
        /// Samples per axis of the time x space check grid.
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: wfr_core::action::ModelError| e.to_string())
}

/// Runs a command; the returned JSON goes to stdout.
pub fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Analytic(cmd) => cmd_analytic(&cmd),
        Command::Compare(args) => cmd_compare(&args),
    }
}

fn load_pair(rho0: &Path, rho1: &Path) -> Result<(DensityFile, DensityFile), CliError> {
    let a = read_density(rho0)?;
    let b = read_density(rho1)?;
    if a.n_space != b.n_space {
        return Err(CliError::Shape(format!(
            "{} has shape {:?} but {} has {:?}",
            rho0.display(),
            a.n_space,
            rho1.display(),
            b.n_space
        )));
    }
    if a.lengths != b.lengths {
        return Err(CliError::Shape(format!(
            "domain lengths differ: {:?} vs {:?}",
            a.lengths, b.lengths
        )));
    }
    Ok((a, b))
}

fn grid_for(d: &DensityFile, nt: usize) -> Result<GridSpec, CliError> {
    GridSpec::new(d.lengths.clone(), d.n_space.clone(), nt).map_err(|e| CliError::Invalid(e.to_string()))
}

fn settings(run: &RunFlags) -> SolverSettings {
    SolverSettings {
        gamma: run.gamma,
        alpha: run.alpha,
        max_iters: run.iters,
        tol: run.tol,
    }
}

fn solver_config(m: &RunManifest) -> Result<SolverConfig, CliError> {
    let model = ModelSpec::new(m.model, m.delta).map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut cfg = SolverConfig::new(m.grid.clone(), model)
        .with_alpha(m.solver.alpha)
        .with_max_iters(m.solver.max_iters)
        .with_tol(m.solver.tol);
    cfg.gamma = m.solver.gamma;
    Ok(cfg)
}

fn boundary(grid: &GridSpec, a: DensityFile, b: DensityFile) -> Result<BoundaryData, CliError> {
    BoundaryData::new(grid, a.values, b.values).map_err(|e| CliError::Shape(e.to_string()))
}

/// Reads a manifest from either a bare manifest file or a summary.json.
pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let unreadable = |reason: String| CliError::Unreadable {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| unreadable(e.to_string()))?;
    let inner = value.get("manifest").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| unreadable(e.to_string()))
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub convention: String,
    pub distance: f64,
    #[serde(flatten)]
    pub report: SolverReport,
    pub mass_trace: Vec<f64>,
    pub manifest: RunManifest,
}

fn cmd_solve(args: &SolveArgs) -> Result<Value, CliError> {
    let manifest = match &args.manifest {
        Some(path) => RunManifest {
            out_dir: args.out.clone(),
            ..read_manifest(path)?
        },
        None => {
            let rho0 = args.rho0.clone().expect("required by clap");
            let rho1 = args.rho1.clone().expect("required by clap");
            let (a, _) = load_pair(&rho0, &rho1)?;
            RunManifest {
                model: args.model,
                delta: args.delta,
                grid: grid_for(&a, args.run.nt)?,
                solver: settings(&args.run),
                rho0,
                rho1,
                out_dir: args.out.clone(),
                seed: args.run.seed,
            }
        }
    };
    let (a, b) = load_pair(&manifest.rho0, &manifest.rho1)?;
    if a.n_space != manifest.grid.n_space() || a.lengths != manifest.grid.lengths() {
        return Err(CliError::Shape("inputs do not match the manifest grid".into()));
    }
    let bd = boundary(&manifest.grid, a, b)?;
    let res = dr_solve(&bd, &solver_config(&manifest)?)?;
    let summary = write_solve_outputs(&manifest.out_dir, &manifest, &bd, &res)?;
    Ok(json!({
        "distance": summary.distance,
        "distance_squared": summary.report.distance_squared,
        "iterations": summary.report.iterations_run,
        "converged": summary.report.converged,
        "out": manifest.out_dir,
    }))
}

fn coord_header(grid: &GridSpec) -> Vec<String> {
    let mut h = vec!["index".to_owned(), "x".to_owned()];
    if grid.dims() == 2 {
        h.push("y".into());
    }
    h
}

fn momentum_names(grid: &GridSpec, suffix: &str) -> Vec<String> {
    ["m_x", "m_y"][..grid.dims()].iter().map(|m| format!("{m}{suffix}")).collect()
}

/// Writes `frame_XXX.csv` per time node, `summary.json` and `plotdata.csv`.
pub fn write_solve_outputs(
    dir: &Path,
    manifest: &RunManifest,
    bd: &BoundaryData,
    res: &GeodesicResult,
) -> Result<Summary, CliError> {
    create_dir(dir)?;
    let grid = &res.grid;
    let cells = grid.spatial_cells();
    let coords: Vec<Vec<f64>> = (0..cells).map(|s| grid.spatial_coords(s)).collect();
    let prefix = |s: usize| -> Vec<f64> {
        let mut row = vec![s as f64];
        row.extend(&coords[s]);
        row
    };
    for j in 0..=grid.n_time() {
        let t = grid.time_node(j);
        let mut header = coord_header(grid);
        header.push("rho".into());
        header.extend(momentum_names(grid, ""));
        header.push("zeta".into());
        let mut table = Table::new(header);
        let rho = res.density_at_node(j);
        let m: Vec<Vec<f64>> = (0..grid.dims()).map(|k| res.momentum_at(k, t)).collect();
        let zeta = res.source_at(t);
        for s in 0..cells {
            let mut row = prefix(s);
            row.push(rho[s]);
            row.extend(m.iter().map(|mk| mk[s]));
            row.push(zeta[s]);
            table.rows.push(row);
        }
        table.write(&dir.join(format!("frame_{j:03}.csv")))?;
    }

    let mut header = coord_header(grid);
    header.extend(["rho0", "rho1", "rho_mid"].map(String::from));
    header.extend(momentum_names(grid, "_mid"));
    header.push("zeta_mid".into());
    let mut plot = Table::new(header);
    let rho_mid = res.density_at(0.5);
    let m_mid: Vec<Vec<f64>> = (0..grid.dims()).map(|k| res.momentum_at(k, 0.5)).collect();
    let zeta_mid = res.source_at(0.5);
    for s in 0..cells {
        let mut row = prefix(s);
        row.extend([bd.rho0.data()[s], bd.rho1.data()[s], rho_mid[s]]);
        row.extend(m_mid.iter().map(|mk| mk[s]));
        row.push(zeta_mid[s]);
        plot.rows.push(row);
    }
    plot.write(&dir.join("plotdata.csv"))?;

    let summary = Summary {
        convention: CONVENTION.into(),
        distance: res.distance(),
        report: res.report.clone(),
        mass_trace: res.mass_trace(),
        manifest: manifest.clone(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), &text)?;
    Ok(summary)
}

fn cmd_compare(args: &CompareArgs) -> Result<Value, CliError> {
    if args.deltas.is_empty() {
        return Err(CliError::Invalid("--deltas is empty".into()));
    }
    let (a, b) = load_pair(&args.rho0, &args.rho1)?;
    let grid = grid_for(&a, args.run.nt)?;
    let bd = boundary(&grid, a, b)?;
    let base = RunManifest {
        model: ModelKind::Wfr,
        delta: args.deltas[0],
        grid: grid.clone(),
        solver: settings(&args.run),
        rho0: args.rho0.clone(),
        rho1: args.rho1.clone(),
        out_dir: args.out.clone(),
        seed: args.run.seed,
    };
    let cfg = solver_config(&base)?;
    create_dir(&args.out)?;
    // A single delta writes the solve outputs at the top level, exactly like `solve`.
    let single = args.deltas.len() == 1;
    let ladder: Ladder = delta_ladder_with(&bd, &cfg, &args.deltas, |res| {
        let delta = res.model.delta;
        let dir = if single {
            args.out.clone()
        } else {
            args.out.join(format!("delta_{delta}"))
        };
        let manifest = RunManifest {
            delta,
            out_dir: dir.clone(),
            ..base.clone()
        };
        write_solve_outputs(&dir, &manifest, &bd, res).map(|_| ())
    })?;
    let mut table = Table::new(
        [
            "delta",
            "distance_squared",
            "reduced",
            "kinetic",
            "fr_gap",
            "gbb_gap",
            "iterations",
            "converged",
        ]
        .map(String::from)
        .to_vec(),
    );
    for r in &ladder.rows {
        table.rows.push(vec![
            r.delta,
            r.distance_squared,
            r.reduced,
            r.kinetic,
            r.fr_gap,
            r.gbb_gap,
            r.iterations as f64,
            if r.converged { 1.0 } else { 0.0 },
        ]);
    }
    table.write(&args.out.join("compare.csv"))?;
    let doc = json!({
        "convention": CONVENTION,
        "growth": ladder.growth,
        "gbb_squared": ladder.gbb_squared,
        "rows": ladder.rows,
        "manifest": base,
    });
    write_file(
        &args.out.join("compare.json"),
        &serde_json::to_string_pretty(&doc).expect("ladder serializes"),
    )?;
    Ok(doc)
}

fn measures(pair: &PairArgs) -> Result<(GridMeasure, GridMeasure), CliError> {
    let (a, b) = load_pair(&pair.rho0, &pair.rho1)?;
    let grid = grid_for(&a, 2)?;
    Ok((GridMeasure::new(&grid, a.values)?, GridMeasure::new(&grid, b.values)?))
}

fn pair_geodesic(d: &DiracArgs) -> Result<DiracPairGeodesic, CliError> {
    Ok(DiracPairGeodesic::new(d.h0, &d.x0, d.h1, &d.x1, d.delta)?)
}

fn cmd_analytic(cmd: &AnalyticCommand) -> Result<Value, CliError> {
    match cmd {
        AnalyticCommand::DiracDistance(d) => {
            let g = pair_geodesic(d)?;
            Ok(json!({
                "distance": g.distance(),
                "distance_squared": g.energy(),
                "regime": g.regime,
                "separation": g.separation(),
                "cut_locus": PI * d.delta,
            }))
        }
        AnalyticCommand::DiracGeodesic { dirac, samples } => {
            if *samples < 2 {
                return Err(CliError::Invalid("--samples must be at least 2".into()));
            }
            let g = pair_geodesic(dirac)?;
            let frames: Vec<Value> = (0..*samples)
                .map(|i| {
                    let t = i as f64 / (*samples - 1) as f64;
                    json!({ "t": t, "atoms": g.atoms_at(t) })
                })
                .collect();
            Ok(json!({
                "regime": g.regime,
                "distance": g.distance(),
                "distance_squared": g.energy(),
                "a": g.a,
                "b": g.b,
                "tau": g.tau,
                "momentum": g.omega0,
                "frames": frames,
            }))
        }
        AnalyticCommand::FisherRao { pair, delta } => {
            if !(*delta > 0.0 && delta.is_finite()) {
                return Err(CliError::Invalid(format!("delta must be positive, got {delta}")));
            }
            let (a, b) = measures(pair)?;
            let d2 = delta * delta * fisher_rao_distance_squared(&a, &b)?;
            Ok(json!({ "distance": d2.sqrt(), "distance_squared": d2, "delta": delta }))
        }
        AnalyticCommand::Gbb(pair) => {
            let (a, b) = measures(pair)?;
            let d = gbb_distance(&a, &b)?;
            let (m0, m1) = (a.mass(), b.mass());
            Ok(json!({
                "distance": d,
                "distance_squared": d * d,
                "mass0": m0,
                "mass1": m1,
                "singular_time": gbb_singular_time(m0, m1),
                "growth_rate_at_half": gbb_rate_of_growth(m0, m1, 0.5),
            }))
        }
        AnalyticCommand::Bounds { pair, delta } => {
            let (a, b) = measures(pair)?;
            Ok(serde_json::to_value(distance_upper_bound(&a, &b, *delta)?).expect("bounds serialize"))
        }
        AnalyticCommand::CertificateCheck { dirac, n } => {
            if *n < 2 {
                return Err(CliError::Invalid("--n must be at least 2".into()));
            }
            let g = wfr_dirac_geodesic(dirac.h0, &dirac.x0, dirac.h1, &dirac.x1, dirac.delta)?;
            let cert = build_dirac_certificate(&g)?;
            let reach = 2.0 * PI * dirac.delta;
            let report = check_dirac_certificate(&g, &cert, (-reach, g.separation() + reach), (*n, *n));
            Ok(json!({
                "certificate": cert,
                "max_violation": report.max_violation,
                "value_residual": report.value_residual,
                "gradient_residual": report.gradient_residual,
                "equality_residual": report.equality_residual,
            }))
        }
    }
}
