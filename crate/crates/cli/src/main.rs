//! `tunneltime` command-line front end.
//!
//! Every command writes one CSV (or one per curve) plus a `key = value`
//! sidecar with the effective configuration. Without `--out` the CSV goes to
//! stdout and the metadata to stderr.

mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use tunneltime::export::{fmt_f64, fmt_opt, Metadata};
use tunneltime::oracle_cn::{self, GridSpec};
use tunneltime::quantities::BarrierSpec;
use tunneltime::resonances::{find_poles, write_pole_csv};
use tunneltime::scaling::{self, Reference};
use tunneltime::shutter::{build_model_with, BuildOptions, WaveModel, DEFAULT_TAIL_TOL};
use tunneltime::tfa;
use tunneltime::transients::{self, PeakSearch};

#[derive(Parser, Debug)]
#[command(name = "tunneltime", version, about = "Transient tunneling through a rectangular barrier after a quantum shutter opens")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Resonance poles k_n of the barrier.
    Poles(PolesArgs),
    /// Density (and optionally ω_av/ω_V, σ) against time at a probe.
    Evolve(EvolveArgs),
    /// t_max at x = L against the barrier width.
    Basin(BasinArgs),
    /// t_max(x) and ω_av/ω_V at t_max(x) against position.
    Posscan(PosscanArgs),
    /// ω_av/ω_V at (L, t_max) against opacity, and the opacity window.
    Opacity(OpacityArgs),
    /// Compare the expansion with a Crank-Nicolson integration.
    OracleCompare(OracleArgs),
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// Barrier height (eV).
    #[arg(long = "V-eV", default_value_t = 0.3)]
    v_ev: f64,
    /// Barrier width (nm).
    #[arg(long = "L-nm", default_value_t = 4.0)]
    l_nm: f64,
    /// Effective mass in units of the electron mass.
    #[arg(long = "m-rel", default_value_t = 0.067)]
    m_rel: f64,
    /// Incidence energy (eV).
    #[arg(long = "E-eV", default_value_t = 0.001)]
    e_ev: f64,
}

impl SpecArgs {
    fn spec(&self) -> Result<BarrierSpec, tunneltime::error::Error> {
        BarrierSpec::new(self.v_ev, self.l_nm, self.m_rel, self.e_ev)
    }

    fn record(&self, m: &mut Metadata) {
        m.push("V_eV", self.v_ev)
            .push("L_nm", self.l_nm)
            .push("m_rel", self.m_rel)
            .push("E_eV", self.e_ev);
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Tail tolerance of the resonance sum.
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    tail_tol: f64,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: logical CPUs).
    #[arg(long, env = "TUNNELTIME_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct PolesArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Number of poles n = 1..=count.
    #[arg(long, default_value_t = 20)]
    count: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EvolveArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Probe position (nm); default x = L.
    #[arg(long)]
    probe_nm: Option<f64>,
    /// Start of the log-spaced time grid (fs).
    #[arg(long)]
    t_lo_fs: Option<f64>,
    /// End of the time grid (fs); default max(100, 20 L/v).
    #[arg(long)]
    t_hi_fs: Option<f64>,
    /// Number of time points.
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Add omega_rel, sigma_per_fs and valid columns.
    #[arg(long)]
    spectrogram: bool,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BasinArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Smallest width (nm).
    #[arg(long = "L-min-nm", default_value_t = 2.0)]
    l_min_nm: f64,
    /// Largest width (nm).
    #[arg(long = "L-max-nm", default_value_t = 20.0)]
    l_max_nm: f64,
    /// Number of widths.
    #[arg(long, default_value_t = 37)]
    points: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct PosscanArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Largest x/L; positions are x/L = i·x_max/points, i = 1..=points.
    #[arg(long = "x-max-over-L", default_value_t = 4.0)]
    x_max_over_l: f64,
    #[arg(long, default_value_t = 80)]
    points: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct OpacityArgs {
    /// Reference barrier height (eV).
    #[arg(long = "V-eV", default_value_t = 0.3)]
    v_ev: f64,
    /// Reference effective mass.
    #[arg(long = "m-rel", default_value_t = 0.067)]
    m_rel: f64,
    #[command(flatten)]
    run: RunArgs,
    /// Ratios u = V/E, comma separated; one CSV per value.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "5,10,300")]
    u: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    alpha_lo: f64,
    #[arg(long, default_value_t = 4.0)]
    alpha_hi: f64,
    /// Number of opacities.
    #[arg(long, default_value_t = 51)]
    points: usize,
    /// Also bisect for alpha_min and alpha_max.
    #[arg(long)]
    window: bool,
    /// u used by the window search.
    #[arg(long, default_value_t = scaling::DEFAULT_U_LARGE)]
    u_large: f64,
    #[arg(long, default_value_t = 1e-3)]
    bisect_tol: f64,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct OracleArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Probe positions (nm), comma separated; default L/2, L, 2L.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    probes_nm: Vec<f64>,
    /// Start of the comparison interval (fs).
    #[arg(long, default_value_t = 0.5)]
    t_lo_fs: f64,
    /// End of the comparison interval and of the integration (fs).
    #[arg(long, default_value_t = 20.0)]
    t_hi_fs: f64,
    /// Grid cells per barrier width.
    #[arg(long = "cells-per-L", default_value_t = oracle_cn::DEFAULT_CELLS_PER_WIDTH)]
    cells_per_l: usize,
    /// Skip the convergence study.
    #[arg(long)]
    no_study: bool,
    /// Refinement levels of the convergence study.
    #[arg(long, default_value_t = 3)]
    study_levels: usize,
}

enum Failure {
    Config(String),
    Library(tunneltime::error::Error),
    Io(io::Error),
}

impl From<tunneltime::error::Error> for Failure {
    fn from(e: tunneltime::error::Error) -> Self {
        Failure::Library(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Library(e) if e.is_validation() => 2,
            Failure::Library(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("config error: {m}"),
            Failure::Library(e) if e.is_validation() => format!("validation error: {e}"),
            Failure::Library(e) => format!("numerical failure: {e}"),
            Failure::Io(e) => format!("I/O error: {e}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(f) => return fail(f),
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("tunneltime: {}", f.message());
    ExitCode::from(f.exit_code())
}

/// Inserts the config file's entries as flags right after the subcommand.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config::config_path(&args) else {
        return Ok(args);
    };
    let root = Cli::command();
    let Some(pos) = args.iter().skip(1).position(|a| {
        let a = a.to_string_lossy();
        root.get_subcommands().any(|c| c.get_name() == a)
    }) else {
        return Ok(args);
    };
    let pos = pos + 1;
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let entries = config::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let sub = args[pos].to_string_lossy().into_owned();
    let flags = config::to_flags(&root, &sub, &entries, &path).map_err(Failure::Config)?;
    let mut merged = args[..=pos].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

fn run(cli: Cli) -> Outcome {
    let start = Instant::now();
    let (name, run_args) = match &cli.command {
        Cmd::Poles(a) => ("poles", &a.run),
        Cmd::Evolve(a) => ("evolve", &a.run),
        Cmd::Basin(a) => ("basin", &a.run),
        Cmd::Posscan(a) => ("posscan", &a.run),
        Cmd::Opacity(a) => ("opacity", &a.run),
        Cmd::OracleCompare(a) => ("oracle-compare", &a.run),
    };
    let workers = setup_workers(run_args.workers)?;
    let mut meta = Metadata::new();
    meta.push("command", name)
        .push("version", env!("CARGO_PKG_VERSION"))
        .push("workers", workers)
        .push("tail_tol", run_args.tail_tol)
        .push(
            "config_file",
            run_args.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
    let out = Sink::new(run_args.out.clone(), start);
    match cli.command {
        Cmd::Poles(a) => poles(a, meta, out),
        Cmd::Evolve(a) => evolve(a, meta, out),
        Cmd::Basin(a) => basin(a, meta, out),
        Cmd::Posscan(a) => posscan(a, meta, out),
        Cmd::Opacity(a) => opacity(a, meta, out),
        Cmd::OracleCompare(a) => oracle_compare(a, meta, out),
    }
}

fn setup_workers(requested: Option<usize>) -> Result<usize, Failure> {
    if requested == Some(0) {
        return Err(Failure::Config("workers must be >= 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested {
        builder = builder.num_threads(n);
    }
    builder
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot start worker pool: {e}")))?;
    Ok(rayon::current_num_threads())
}

/// Destination of the CSV output and its metadata.
struct Sink {
    path: Option<PathBuf>,
    start: Instant,
}

impl Sink {
    fn new(path: Option<PathBuf>, start: Instant) -> Self {
        Sink { path, start }
    }

    /// Writes one CSV (to `path` or stdout) and its metadata.
    fn emit(&self, path: Option<&Path>, meta: &mut Metadata, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
        meta.push("duration_s", self.start.elapsed().as_secs_f64());
        match path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p)?);
                body(&mut w)?;
                w.flush()?;
                meta.write_sidecar(p)?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = BufWriter::new(stdout.lock());
                body(&mut w)?;
                w.flush()?;
                meta.write_to(io::stderr().lock())?;
            }
        }
        Ok(())
    }

    fn emit_main(&self, meta: &mut Metadata, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
        self.emit(self.path.as_deref(), meta, body)
    }
}

fn model_for(spec: &BarrierSpec, tail_tol: f64) -> Result<WaveModel, Failure> {
    Ok(build_model_with(spec, &BuildOptions::extended(tail_tol))?)
}

fn poles(a: PolesArgs, mut meta: Metadata, out: Sink) -> Outcome {
    a.spec.record(&mut meta);
    meta.push("count", a.count);
    let spec = a.spec.spec()?;
    let poles = find_poles(&spec, a.count)?;
    let worst = poles.iter().map(|p| p.scaled_residual).fold(0.0, f64::max);
    meta.push("max_scaled_residual", fmt_f64(worst));
    out.emit_main(&mut meta, |w| write_pole_csv(w, &poles))
}

fn evolve(a: EvolveArgs, mut meta: Metadata, out: Sink) -> Outcome {
    let spec = a.spec.spec()?;
    let (lo, hi) = transients::default_window(&spec);
    let x = a.probe_nm.unwrap_or(spec.l_nm);
    let lo = a.t_lo_fs.unwrap_or(lo);
    let hi = a.t_hi_fs.unwrap_or(hi);
    a.spec.record(&mut meta);
    meta.push("probe_nm", x)
        .push("t_lo_fs", lo)
        .push("t_hi_fs", hi)
        .push("points", a.points)
        .push("spectrogram", a.spectrogram);
    let grid = transients::log_grid(lo, hi, a.points)?;
    let model = model_for(&spec, a.run.tail_tol)?;
    let profile = transients::transient_profile(&model, x, &grid, &PeakSearch::for_spec(&spec))?;
    let spectro = if a.spectrogram {
        Some(tfa::spectrogram(&model, x, &grid)?)
    } else {
        None
    };
    meta.push("poles", model.pole_count())
        .push("region", if x < spec.l_nm { "internal" } else { "external" })
        .push("density", "normalized by |T|^2")
        .push("resolved_after_fs", model.resolved_after(x))
        .push("t_max_fs", fmt_opt(profile.t_max))
        .push("peak_value", fmt_opt(profile.peak_value));
    if let Some(t) = profile.t_max {
        if spec.v_ev > 0.0 {
            let f = tfa::local_frequency(&model, tunneltime::shutter::Region::of(x, spec.l_nm), x, t)?;
            meta.push("omega_rel_at_tmax", fmt_f64(f.omega_av / model.omega_v()))
                .push("sigma_at_tmax_per_fs", fmt_f64(f.sigma));
        }
    }
    out.emit_main(&mut meta, |w| {
        match &spectro {
            None => writeln!(w, "t_fs,density")?,
            Some(_) => writeln!(w, "t_fs,density,omega_rel,sigma_per_fs,valid")?,
        }
        for (i, (t, d)) in profile.t_grid.iter().zip(&profile.density).enumerate() {
            match &spectro {
                None => writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(*d))?,
                Some(s) => writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_f64(*t),
                    fmt_f64(*d),
                    fmt_opt(s.omega_rel[i]),
                    fmt_opt(s.sigma[i]),
                    s.omega_rel[i].is_some()
                )?,
            }
        }
        Ok(())
    })
}

fn linear_grid(lo: f64, hi: f64, n: usize, field: &'static str) -> Result<Vec<f64>, Failure> {
    if n < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Failure::Config(format!("{field}: need lo < hi and at least 2 points")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn basin(a: BasinArgs, mut meta: Metadata, out: Sink) -> Outcome {
    let spec = a.spec.spec()?;
    a.spec.record(&mut meta);
    meta.push("L_min_nm", a.l_min_nm)
        .push("L_max_nm", a.l_max_nm)
        .push("points", a.points);
    let grid = linear_grid(a.l_min_nm, a.l_max_nm, a.points, "L grid")?;
    let rows = transients::basin_scan(&spec, &grid, &BuildOptions::extended(a.run.tail_tol))?;
    meta.push("found", rows.iter().filter(|r| r.found()).count());
    for r in rows.iter().filter(|r| r.error.is_some()) {
        meta.push(format!("error_L_{}", r.l_nm), r.error.as_deref().unwrap_or_default());
    }
    out.emit_main(&mut meta, |w| transients::write_basin_csv(w, &rows))
}

fn posscan(a: PosscanArgs, mut meta: Metadata, out: Sink) -> Outcome {
    let spec = a.spec.spec()?;
    a.spec.record(&mut meta);
    meta.push("x_max_over_L", a.x_max_over_l).push("points", a.points);
    if a.points == 0 || !(a.x_max_over_l > 0.0) {
        return Err(Failure::Config("posscan: need points >= 1 and x-max-over-L > 0".into()));
    }
    let grid: Vec<f64> = (1..=a.points)
        .map(|i| a.x_max_over_l * spec.l_nm * i as f64 / a.points as f64)
        .collect();
    let model = model_for(&spec, a.run.tail_tol)?;
    let rows = tfa::position_scan(&model, &grid)?;
    let crossing = tfa::cutoff_crossing(&rows);
    meta.push("poles", model.pole_count())
        .push("crossing_x_over_L", fmt_opt(crossing.map(|x| x / spec.l_nm)));
    for r in rows.iter().filter(|r| r.error.is_some()) {
        meta.push(format!("error_x_{}", r.x_nm), r.error.as_deref().unwrap_or_default());
    }
    out.emit_main(&mut meta, |w| tfa::write_position_csv(w, &rows))
}

/// `opacity.csv` and u = 300 become `opacity_u300.csv`.
fn curve_path(base: &Path, u: f64) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_u{u}.{}", ext.to_string_lossy()),
        None => format!("{stem}_u{u}"),
    };
    base.with_file_name(name)
}

fn opacity(a: OpacityArgs, mut meta: Metadata, out: Sink) -> Outcome {
    let reference = Reference {
        v_ev: a.v_ev,
        m_rel: a.m_rel,
    };
    meta.push("V_eV", a.v_ev)
        .push("m_rel", a.m_rel)
        .push("alpha_lo", a.alpha_lo)
        .push("alpha_hi", a.alpha_hi)
        .push("points", a.points)
        .push("window", a.window);
    let options = BuildOptions::extended(a.run.tail_tol);
    let grid = linear_grid(a.alpha_lo, a.alpha_hi, a.points, "alpha grid")?;
    if a.window {
        let w = scaling::find_window(a.u_large, reference, a.bisect_tol, &options)?;
        meta.push("u_large", a.u_large)
            .push("bisect_tol", a.bisect_tol)
            .push("alpha_min", fmt_f64(w.alpha_min))
            .push("alpha_max", fmt_f64(w.alpha_max));
    }
    let curves = scaling::opacity_scan(&a.u, &grid, reference, &options)?;
    for (i, curve) in curves.iter().enumerate() {
        let mut m = meta.clone();
        m.push("u", curve.u);
        match &out.path {
            Some(base) => out.emit(Some(&curve_path(base, curve.u)), &mut m, |w| scaling::write_opacity_csv(w, curve))?,
            None => {
                if i > 0 {
                    println!();
                }
                out.emit(None, &mut m, |w| scaling::write_opacity_csv(w, curve))?
            }
        }
    }
    Ok(())
}

fn oracle_compare(a: OracleArgs, mut meta: Metadata, out: Sink) -> Outcome {
    let spec = a.spec.spec()?;
    let probes = if a.probes_nm.is_empty() {
        vec![0.5 * spec.l_nm, spec.l_nm, 2.0 * spec.l_nm]
    } else {
        a.probes_nm.clone()
    };
    if a.cells_per_l == 0 {
        return Err(Failure::Config("cells-per-L must be >= 1".into()));
    }
    a.spec.record(&mut meta);
    meta.push("probes_nm", probes.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";"))
        .push("t_lo_fs", a.t_lo_fs)
        .push("t_hi_fs", a.t_hi_fs)
        .push("cells_per_L", a.cells_per_l);
    let dx = spec.l_nm / a.cells_per_l as f64;
    let dt = oracle_cn::DEFAULT_DT_FRACTION * dx * dx / spec.hbar_over_m();
    let grid = GridSpec::sized_for(&spec, dx, dt, a.t_hi_fs, &probes, oracle_cn::DEFAULT_OUTPUT_DT)?;
    let run = oracle_cn::evolve(&spec, &grid)?;
    for (k, v) in oracle_cn::run_metadata(&spec, &grid, &run).entries().iter().skip(4) {
        meta.push(k.clone(), v);
    }
    let model = model_for(&spec, a.run.tail_tol)?;
    let dev = oracle_cn::compare_with_model(&model, &run, a.t_lo_fs, a.t_hi_fs)?;
    let worst = dev.iter().map(|d| d.relative_linf).fold(0.0, f64::max);
    for d in &dev {
        meta.push(format!("relative_linf_x_{}", d.x_nm), fmt_f64(d.relative_linf))
            .push(format!("worst_time_x_{}", d.x_nm), d.worst_time);
    }
    meta.push("max_relative_linf", fmt_f64(worst));
    if !a.no_study {
        let base = GridSpec::study_base(&spec, &probes)?;
        let report = oracle_cn::convergence_study(&spec, &base, a.study_levels)?;
        meta.push("study_levels", a.study_levels)
            .push("study_dx_nm", base.dx)
            .push("study_dt_fs", base.dt)
            .push("study_t_final_fs", base.t_final)
            .push("p_dx", fmt_f64(report.p_dx))
            .push("p_dt", fmt_f64(report.p_dt));
    }
    out.emit_main(&mut meta, |w| oracle_cn::write_probe_csv(w, &run))
}
