//! Command-line front end: DoS/LDoS runs, convergence studies and geometry
//! diagnostics, all emitting provenance-stamped CSV.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector2;

use moire_kpm::dos::{
    converge_coupled, converge_r, default_energy_grid, ldos_field, quadrature_error_probe,
    total_dos, ConvergenceReport, RateClass, DEFAULT_GRID_POINTS,
};
use moire_kpm::geometry::{equidistribution_discrepancy, fourier_mode_average, shift_grid};
use moire_kpm::hamiltonian::assemble;
use moire_kpm::kpm::{chebyshev_moments, jackson_coefficients, reconstruct};
use moire_kpm::model::{builtin_model, spectral_bound, validate_decay, Sheet, TBModel};
use moire_kpm::output::{
    fmt_f64, write_convergence_csv, write_dos_csv, write_ldos_csv, write_matrix_csv,
    write_moments_csv, write_sites_csv,
};

use moire_kpm_cli::config::{ModelSource, RunConfig};

#[derive(Parser)]
#[command(
    name = "moire-kpm",
    version,
    about = "Density of states for incommensurate bilayer tight-binding models"
)]
struct Cli {
    /// Worker threads (default: hardware parallelism). `--threads 1` gives
    /// the single-threaded reproducibility baseline.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Total density of states over an energy grid.
    Dos(DosArgs),
    /// Local density of states of one center orbital, at a shift or over a grid.
    Ldos(LdosArgs),
    /// Convergence studies: radius, coupled kernel order, or shift grid.
    Converge(ConvergeArgs),
    /// Equidistribution diagnostics of the two lattices.
    Equidist(EquidistArgs),
    /// Introspection dumps (site lists, matrices, decay report).
    #[command(subcommand)]
    Debug(DebugCommand),
}

#[derive(Args)]
struct ModelArgs {
    /// Builtin model name: monolayer_graphene | tbg.
    #[arg(long, conflicts_with = "config")]
    model: Option<String>,

    /// Model configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Twist angle in degrees (shorthand for --set twist_degrees=X).
    #[arg(long, allow_negative_numbers = true)]
    twist: Option<f64>,

    /// Override a builtin parameter, e.g. --set t_perp=0.3 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Lower edge of the energy grid in eV.
    #[arg(long, requires = "emax", requires = "ecount", allow_negative_numbers = true)]
    emin: Option<f64>,
    /// Upper edge of the energy grid in eV.
    #[arg(long, requires = "emin", allow_negative_numbers = true)]
    emax: Option<f64>,
    /// Number of grid points.
    #[arg(long, requires = "emin")]
    ecount: Option<usize>,
}

#[derive(Args)]
struct DosArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Cluster radius in Angstrom.
    #[arg(long)]
    r: f64,
    /// Chebyshev kernel order.
    #[arg(long)]
    p: usize,
    /// Shift-grid resolution per axis (n_disc^2 quadrature points).
    #[arg(long, default_value_t = 1)]
    ndisc: usize,
    #[command(flatten)]
    grid: GridArgs,
    /// Output CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded in provenance (used only by randomized diagnostics).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LdosArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    p: usize,
    /// Sheet of the center orbital (1 or 2).
    #[arg(long, default_value_t = 1)]
    j: u8,
    /// Orbital id (default: first orbital of sheet j).
    #[arg(long)]
    alpha: Option<String>,
    /// Cartesian shift "bx,by" in Angstrom applied to the opposite sheet.
    #[arg(long, conflicts_with = "grid_ndisc", default_value = "0,0", allow_hyphen_values = true)]
    b: String,
    /// Evaluate over an n x n uniform shift grid instead of a single shift.
    #[arg(long = "grid")]
    grid_ndisc: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the Chebyshev moment table(s) as CSV: PATH for a single shift,
    /// PATH_b<i>.csv per grid configuration.
    #[arg(long)]
    moments_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Study axis: r | coupled | ndisc.
    #[arg(long)]
    axis: String,
    /// Evaluation energy in eV.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    epsilon: f64,
    /// Kernel order (axes r and ndisc).
    #[arg(long)]
    p: Option<usize>,
    /// Radii in Angstrom, comma-separated (axis r).
    #[arg(long)]
    r_list: Option<String>,
    /// Sheet of the probed orbital (axis r).
    #[arg(long, default_value_t = 1)]
    j: u8,
    /// Orbital id (axis r; default: first orbital of sheet j).
    #[arg(long)]
    alpha: Option<String>,
    /// Cartesian shift "bx,by" (axis r).
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    b: String,
    /// Kernel orders, comma-separated (axis coupled).
    #[arg(long)]
    p_list: Option<String>,
    /// Radius coupling r = cr * p * ln p, Angstrom (axis coupled).
    #[arg(long, default_value_t = 0.25)]
    cr: f64,
    /// Grid coupling n_disc = max(1, round(cn * p * ln p)) (axis coupled).
    #[arg(long, default_value_t = 0.004)]
    cn: f64,
    /// Cluster radius in Angstrom (axis ndisc).
    #[arg(long)]
    r: Option<f64>,
    /// Shift-grid resolutions, comma-separated (axis ndisc).
    #[arg(long)]
    ndisc_list: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EquidistArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Ball radii in Angstrom, comma-separated.
    #[arg(long)]
    r_list: String,
    /// Fourier mode "m1,m2" on the second sheet's cell.
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    m: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum DebugCommand {
    /// Lattice sites of one sheet inside a ball.
    Sites(DebugSitesArgs),
    /// Sparse cluster matrix as a coordinate list.
    Matrix(DebugMatrixArgs),
    /// Hopping decay-envelope report.
    Decay(DebugDecayArgs),
}

#[derive(Args)]
struct DebugSitesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    sheet: u8,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DebugMatrixArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1)]
    j: u8,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    b: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DebugDecayArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    /// Bad flags or configuration: exit 2.
    Usage(String),
    /// Failure during computation or output: exit 1.
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        // First and only global-pool initialization.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let threads = cli.threads;
    let result = match cli.command {
        Command::Dos(args) => cmd_dos(args, threads),
        Command::Ldos(args) => cmd_ldos(args, threads),
        Command::Converge(args) => cmd_converge(args, threads),
        Command::Equidist(args) => cmd_equidist(args, threads),
        Command::Debug(cmd) => cmd_debug(cmd, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Builds the model and its provenance source descriptor.
fn build_model(args: &ModelArgs) -> CliResult<(TBModel, ModelSource)> {
    if let Some(path) = &args.config {
        if args.twist.is_some() || !args.set.is_empty() {
            return Err(CliError::Usage(
                "--twist/--set apply to builtin models, not --config files".into(),
            ));
        }
        let model = moire_kpm::config::model_from_file(path).map_err(usage)?;
        return Ok((model, ModelSource::File(path.display().to_string())));
    }
    let name = args
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("one of --model or --config is required".into()))?;
    let mut overrides = BTreeMap::new();
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        let value: f64 = v
            .parse()
            .map_err(|e| CliError::Usage(format!("bad value in --set {kv}: {e}")))?;
        overrides.insert(k.to_string(), value);
    }
    if let Some(t) = args.twist {
        overrides.insert("twist_degrees".to_string(), t);
    }
    let model = builtin_model(name, &overrides).map_err(usage)?;
    Ok((
        model,
        ModelSource::Builtin {
            name: name.clone(),
            overrides,
        },
    ))
}

fn parse_pair(s: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("expected 'x,y', got '{s}'")));
    }
    let x = parts[0]
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("bad number '{}': {e}", parts[0])))?;
    let y = parts[1]
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("bad number '{}': {e}", parts[1])))?;
    Ok((x, y))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("bad {what} entry '{t}': {e}")))
        })
        .collect()
}

/// Energy grid plus the explicit (min, max, count) spec when one was given.
type GridChoice = (Vec<f64>, Option<(f64, f64, usize)>);

fn energy_grid(
    grid: &GridArgs,
    window: &moire_kpm::model::SpectralWindow,
) -> CliResult<GridChoice> {
    match (grid.emin, grid.emax, grid.ecount) {
        (None, None, None) => Ok((
            default_energy_grid(window, DEFAULT_GRID_POINTS).map_err(usage)?,
            None,
        )),
        (Some(lo), Some(hi), Some(n)) => {
            if n < 2 || lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(CliError::Usage(
                    "energy grid needs emin < emax and ecount >= 2".into(),
                ));
            }
            let grid: Vec<f64> = (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect();
            for &e in &grid {
                if (window.eta * e).abs() > 1.0 - 1e-6 {
                    return Err(CliError::Usage(format!(
                        "energy {e} outside the scaled window |eta*eps| <= 1 - 1e-6 \
                         (|eps| <= {})",
                        (1.0 - 1e-6) / window.eta
                    )));
                }
            }
            Ok((grid, Some((lo, hi, n))))
        }
        _ => Err(CliError::Usage(
            "--emin/--emax/--ecount must be given together".into(),
        )),
    }
}

fn open_out(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn cmd_dos(args: DosArgs, threads: Option<usize>) -> CliResult<()> {
    let (model, source) = build_model(&args.model)?;
    let window = spectral_bound(&model).map_err(usage)?;
    let (grid, grid_spec) = energy_grid(&args.grid, &window)?;
    if !args.r.is_finite() || args.r <= 0.0 || args.p == 0 || args.ndisc == 0 {
        return Err(CliError::Usage("need r > 0, p >= 1, ndisc >= 1".into()));
    }

    let mut cfg = RunConfig::new(source);
    cfg.r = args.r;
    cfg.p = args.p;
    cfg.n_disc = args.ndisc;
    cfg.energy_grid = grid_spec;
    cfg.threads = threads;
    cfg.seed = args.seed;
    cfg.output_path = args.out.as_ref().map(|p| p.display().to_string());
    cfg.extras.insert("cmd".into(), "dos".into());

    let curve = total_dos(&model, args.r, args.p, args.ndisc, &grid).map_err(runtime)?;
    let mut w = open_out(&args.out)?;
    write_dos_csv(&mut w, &cfg.print(), &curve).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    eprintln!(
        "dos: {} points, eta = {}, nu = {}",
        curve.epsilons.len(),
        fmt_f64(curve.params.eta),
        fmt_f64(curve.nu)
    );
    Ok(())
}

fn resolve_orbital(model: &TBModel, j: Sheet, alpha: &Option<String>) -> CliResult<String> {
    match alpha {
        Some(id) => match model.find_orbital(id) {
            Some((sheet, _, _)) if sheet == j => Ok(id.clone()),
            Some((sheet, _, _)) => Err(CliError::Usage(format!(
                "orbital '{id}' belongs to sheet {sheet}, not sheet {j}"
            ))),
            None => Err(CliError::Usage(format!("unknown orbital id '{id}'"))),
        },
        None => model
            .orbitals(j)
            .first()
            .map(|o| o.id.as_str().to_string())
            .ok_or_else(|| CliError::Usage(format!("sheet {j} has no orbitals"))),
    }
}

fn cmd_ldos(args: LdosArgs, threads: Option<usize>) -> CliResult<()> {
    let (model, source) = build_model(&args.model)?;
    let j = Sheet::from_number(args.j).map_err(usage)?;
    let alpha_id = resolve_orbital(&model, j, &args.alpha)?;
    let alpha = moire_kpm::model::OrbitalId::new(alpha_id.clone());
    let window = spectral_bound(&model).map_err(usage)?;
    let (grid, grid_spec) = energy_grid(&args.grid, &window)?;

    let mut cfg = RunConfig::new(source);
    cfg.r = args.r;
    cfg.p = args.p;
    cfg.energy_grid = grid_spec;
    cfg.threads = threads;
    cfg.seed = args.seed;
    cfg.output_path = args.out.as_ref().map(|p| p.display().to_string());
    cfg.extras.insert("cmd".into(), "ldos".into());
    cfg.extras.insert("j".into(), args.j.to_string());
    cfg.extras.insert("alpha".into(), alpha_id.clone());

    match args.grid_ndisc {
        None => {
            let (bx, by) = parse_pair(&args.b)?;
            cfg.extras
                .insert("b".into(), format!("{},{}", fmt_f64(bx), fmt_f64(by)));
            let h = assemble(&model, args.r, j, Vector2::new(bx, by)).map_err(runtime)?;
            let moments = chebyshev_moments(&h, &alpha, args.p).map_err(runtime)?;
            let kernel = jackson_coefficients(args.p).map_err(usage)?;
            let samples = reconstruct(&moments, &kernel, &grid).map_err(runtime)?;
            let mut w = open_out(&args.out)?;
            write_ldos_csv(&mut w, &cfg.print(), &samples).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            if let Some(path) = &args.moments_out {
                let mut w = open_out(&Some(path.clone()))?;
                write_moments_csv(&mut w, &cfg.print(), &moments).map_err(runtime)?;
                w.flush().map_err(runtime)?;
            }
        }
        Some(n) => {
            cfg.n_disc = n;
            let shift_points = shift_grid(model.lattice(j.other()), n).map_err(usage)?;
            let field = ldos_field(&model, args.r, args.p, j, &alpha, &shift_points, &grid)
                .map_err(runtime)?;
            let mut w = open_out(&args.out)?;
            writeln!(w, "# {}", cfg.print()).map_err(runtime)?;
            writeln!(w, "b_frac1,b_frac2,energy_eV,ldos_per_eV").map_err(runtime)?;
            for (b, samples) in &field {
                for s in samples {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        fmt_f64(b.frac[0]),
                        fmt_f64(b.frac[1]),
                        fmt_f64(s.epsilon),
                        fmt_f64(s.value)
                    )
                    .map_err(runtime)?;
                }
            }
            w.flush().map_err(runtime)?;
            if let Some(prefix) = &args.moments_out {
                let kernel_p = args.p;
                for (i, (b, _)) in field.iter().enumerate() {
                    let h = assemble(&model, args.r, j, b.b).map_err(runtime)?;
                    let moments = chebyshev_moments(&h, &alpha, kernel_p).map_err(runtime)?;
                    let path = PathBuf::from(format!("{}_b{i}.csv", prefix.display()));
                    let mut w = open_out(&Some(path))?;
                    write_moments_csv(&mut w, &cfg.print(), &moments).map_err(runtime)?;
                    w.flush().map_err(runtime)?;
                }
            }
        }
    }
    Ok(())
}

fn print_report(report: &ConvergenceReport, out: &Option<PathBuf>, header: &str) -> CliResult<()> {
    println!("fitted_slope = {}", fmt_f64(report.fitted_slope));
    println!("r_squared = {}", fmt_f64(report.r_squared));
    if report.absolute_fallback {
        println!("note = absolute errors (reference below 1e-12)");
    }
    if let Some(class) = report.rate_class {
        let label = match class {
            RateClass::QuadraticPointwise => "consistent with p^-2 (C^2 point)",
            RateClass::LipschitzPointwise => "consistent with p^-1 (Lipschitz point)",
            RateClass::Unclassified => "unclassified",
        };
        println!("rate_class = {label}");
    }
    println!("reference = {}", report.reference);
    if out.is_some() {
        let mut w = open_out(out)?;
        write_convergence_csv(&mut w, header, report).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }
    Ok(())
}

fn cmd_converge(args: ConvergeArgs, threads: Option<usize>) -> CliResult<()> {
    let (model, source) = build_model(&args.model)?;
    let mut cfg = RunConfig::new(source);
    cfg.threads = threads;
    cfg.seed = args.seed;
    cfg.output_path = args.out.as_ref().map(|p| p.display().to_string());
    cfg.extras.insert("cmd".into(), "converge".into());
    cfg.extras.insert("axis".into(), args.axis.clone());
    cfg.extras.insert("epsilon".into(), fmt_f64(args.epsilon));

    let report = match args.axis.as_str() {
        "r" => {
            let p = args
                .p
                .ok_or_else(|| CliError::Usage("axis r requires --p".into()))?;
            let r_list: Vec<f64> = parse_list(
                args.r_list
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("axis r requires --r-list".into()))?,
                "radius",
            )?;
            if r_list.len() < 4 {
                return Err(CliError::Usage("--r-list needs at least 4 radii".into()));
            }
            let j = Sheet::from_number(args.j).map_err(usage)?;
            let alpha_id = resolve_orbital(&model, j, &args.alpha)?;
            let (bx, by) = parse_pair(&args.b)?;
            cfg.p = p;
            cfg.r = *r_list.last().unwrap_or(&1.0);
            cfg.extras.insert("j".into(), args.j.to_string());
            cfg.extras.insert("alpha".into(), alpha_id.clone());
            converge_r(
                &model,
                p,
                j,
                &moire_kpm::model::OrbitalId::new(alpha_id),
                Vector2::new(bx, by),
                &r_list,
                args.epsilon,
            )
            .map_err(runtime)?
        }
        "coupled" => {
            let p_list: Vec<usize> = parse_list(
                args.p_list
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("axis coupled requires --p-list".into()))?,
                "order",
            )?;
            if p_list.len() < 4 {
                return Err(CliError::Usage("--p-list needs at least 4 orders".into()));
            }
            cfg.p = *p_list.last().unwrap_or(&1);
            cfg.extras.insert("cr".into(), fmt_f64(args.cr));
            cfg.extras.insert("cn".into(), fmt_f64(args.cn));
            converge_coupled(&model, &p_list, args.cr, args.cn, args.epsilon).map_err(runtime)?
        }
        "ndisc" => {
            let p = args
                .p
                .ok_or_else(|| CliError::Usage("axis ndisc requires --p".into()))?;
            let r = args
                .r
                .ok_or_else(|| CliError::Usage("axis ndisc requires --r".into()))?;
            let list: Vec<usize> = parse_list(
                args.ndisc_list
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("axis ndisc requires --ndisc-list".into()))?,
                "n_disc",
            )?;
            cfg.p = p;
            cfg.r = r;
            cfg.n_disc = *list.last().unwrap_or(&1);
            quadrature_error_probe(&model, r, p, &list, args.epsilon).map_err(runtime)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown axis '{other}' (expected r | coupled | ndisc)"
            )))
        }
    };
    print_report(&report, &args.out, &cfg.print())
}

fn cmd_equidist(args: EquidistArgs, threads: Option<usize>) -> CliResult<()> {
    let (model, source) = build_model(&args.model)?;
    let r_list: Vec<f64> = parse_list(&args.r_list, "radius")?;
    if r_list.is_empty() {
        return Err(CliError::Usage("--r-list must not be empty".into()));
    }
    let (m1, m2) = {
        let parts: Vec<i64> = parse_list(&args.m, "mode index")?;
        if parts.len() != 2 {
            return Err(CliError::Usage("--m expects 'm1,m2'".into()));
        }
        (parts[0], parts[1])
    };

    let mut cfg = RunConfig::new(source);
    cfg.threads = threads;
    cfg.seed = args.seed;
    cfg.output_path = args.out.as_ref().map(|p| p.display().to_string());
    cfg.extras.insert("cmd".into(), "equidist".into());
    cfg.extras.insert("m".into(), format!("{m1},{m2}"));
    cfg.r = *r_list.last().unwrap();

    let mut w = open_out(&args.out)?;
    writeln!(w, "# {}", cfg.print()).map_err(runtime)?;
    writeln!(w, "r_angstrom,discrepancy,fourier_abs").map_err(runtime)?;
    let mut warned = false;
    for &r in &r_list {
        let disc =
            equidistribution_discrepancy(&model.lattice1, &model.lattice2, r).map_err(runtime)?;
        let four =
            fourier_mode_average(&model.lattice1, &model.lattice2, [m1, m2], r).map_err(runtime)?;
        if four.commensurate_warning && !warned {
            eprintln!(
                "warning: mode phase looks rational; the lattice pair is (near) commensurate \
                 and the averages need not decay"
            );
            warned = true;
        }
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(r),
            fmt_f64(disc),
            fmt_f64(four.value.norm())
        )
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

fn cmd_debug(cmd: DebugCommand, threads: Option<usize>) -> CliResult<()> {
    match cmd {
        DebugCommand::Sites(args) => {
            let (model, source) = build_model(&args.model)?;
            let sheet = Sheet::from_number(args.sheet).map_err(usage)?;
            let sites =
                moire_kpm::geometry::sites_in_ball(model.lattice(sheet), args.r).map_err(usage)?;
            let mut cfg = RunConfig::new(source);
            cfg.r = args.r;
            cfg.threads = threads;
            cfg.extras.insert("cmd".into(), "debug-sites".into());
            cfg.extras.insert("sheet".into(), args.sheet.to_string());
            let mut w = open_out(&args.out)?;
            write_sites_csv(&mut w, &cfg.print(), &sites).map_err(runtime)?;
            w.flush().map_err(runtime)?;
        }
        DebugCommand::Matrix(args) => {
            let (model, source) = build_model(&args.model)?;
            let j = Sheet::from_number(args.j).map_err(usage)?;
            let (bx, by) = parse_pair(&args.b)?;
            let h = assemble(&model, args.r, j, Vector2::new(bx, by)).map_err(runtime)?;
            let mut cfg = RunConfig::new(source);
            cfg.r = args.r;
            cfg.threads = threads;
            cfg.extras.insert("cmd".into(), "debug-matrix".into());
            cfg.extras.insert("j".into(), args.j.to_string());
            cfg.extras
                .insert("b".into(), format!("{},{}", fmt_f64(bx), fmt_f64(by)));
            let mut w = open_out(&args.out)?;
            write_matrix_csv(&mut w, &cfg.print(), &h).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            eprintln!("matrix: n = {}, nnz = {}", h.dim(), h.nnz());
        }
        DebugCommand::Decay(args) => {
            let (model, _) = build_model(&args.model)?;
            let report = validate_decay(&model, args.samples, args.seed).map_err(usage)?;
            println!(
                "decay: max_ratio = {} over {} samples -> {}",
                fmt_f64(report.max_ratio),
                report.samples,
                if report.pass { "PASS" } else { "FAIL" }
            );
            if !report.pass {
                return Err(CliError::Runtime(
                    "hopping exceeds its declared decay envelope".into(),
                ));
            }
        }
    }
    Ok(())
}
