//! Command dispatch. Every command reads and writes the JSON artifacts of
//! [`crate::format`]; failures become a single `error: <kind>: <reason>`
//! line and a non-zero exit status.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use curvesfm_core::densify::reconstruct_curve;
use curvesfm_core::perspective::correspond_curve;
use curvesfm_core::perspective::fixture::PlanarFixture;
use curvesfm_core::{linearized_solve, observe_frames, solve_global, Error, Scene, SolveReport, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::format::{
    read_json, write_json, Curve3dDoc, FormatError, FramesDoc, ObservationsDoc, PairsDoc, SceneDoc, SolutionDoc,
    ViewDoc, VERSION,
};
use crate::plot;
use crate::suite::{self, Outcome};

#[derive(Debug, Parser)]
#[command(
    name = "curvesfm",
    version,
    about = "Rigid curve reconstruction from orthographic frames"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene and its frames (or two planar views).
    Gen(GenArgs),
    /// Extract per-frame observables from frames.json.
    Observe(ObserveArgs),
    /// Recover curve invariants and poses from obs.json.
    Solve(SolveArgs),
    /// Reconstruct every curve sample from frames and a solution.
    Densify(DensifyArgs),
    /// Map view-1 curve samples into view 2 by cross ratios.
    Correspond(CorrespondArgs),
    /// Render frames.json or curve3d.json as SVG.
    Plot(PlotArgs),
    /// Run the acceptance suite and write its artifacts.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    pub frames: u64,
    /// Samples per curve, endpoints included.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Standard deviation of image noise on samples and tangent angles.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Write view1.json and view2.json of a planar perspective scene instead.
    #[arg(long)]
    pub planar: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ObserveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "obs.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Nonlinear,
    Linearized,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "solution.json")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Nonlinear)]
    pub method: MethodArg,
    /// Acceptance threshold on the rms closure residual.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Expected image noise; raises the acceptance threshold accordingly.
    #[arg(long)]
    pub noise: Option<f64>,
    /// JSON file with solver settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value = "curve3d.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrespondArgs {
    /// The two view files, first view first.
    #[arg(long = "in", num_args = 1, required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "pairs.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "plots")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "selftest")]
    pub out: PathBuf,
}

/// Solver settings accepted from a config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFile {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub phi_starts: Option<usize>,
    pub c_starts: Option<usize>,
    pub noise_sigma: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Format(FormatError),
    Usage(String),
    /// Some acceptance criteria failed.
    Selftest(usize),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Format(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Selftest(_) => "selftest",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Format(e) => e.to_string(),
            CliError::Usage(m) => m.clone(),
            CliError::Selftest(n) => format!("{n} criteria failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Format(e)
    }
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    /// The solver found no start below tolerance; its best is on disk.
    NotConverged,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| FormatError::Io(dir.display().to_string(), e).into())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| FormatError::Io(path.display().to_string(), e).into())
}

fn gen(args: &GenArgs) -> Result<(), CliError> {
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(CliError::Usage(format!(
            "--noise must be finite and >= 0, got {}",
            args.noise
        )));
    }
    ensure_dir(&args.out)?;
    if args.planar {
        let fixture = PlanarFixture::random(args.seed);
        write_json(&args.out.join("view1.json"), &ViewDoc::new(&fixture.view(0)?))?;
        write_json(&args.out.join("view2.json"), &ViewDoc::new(&fixture.view(1)?))?;
        return Ok(());
    }
    let scene = Scene::random(args.seed, args.frames as usize, args.samples, true);
    scene.params.validate()?;
    let images = if args.noise > 0.0 {
        scene.render_noisy(args.noise, args.seed ^ 0x006e_6f69_7365)?
    } else {
        scene.render()?
    };
    write_json(&args.out.join("scene.json"), &SceneDoc::from(&scene))?;
    write_json(&args.out.join("frames.json"), &FramesDoc::new(&images))?;
    Ok(())
}

fn observe(args: &ObserveArgs) -> Result<(), CliError> {
    let frames: FramesDoc = read_json(&args.input)?;
    let obs = observe_frames(&frames.images())?;
    write_json(&args.out, &ObservationsDoc::new(&obs))?;
    Ok(())
}

pub fn solver_config(args: &SolveArgs) -> Result<SolverConfig, CliError> {
    let file: SolverFile = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| FormatError::Io(path.display().to_string(), e))?;
            serde_json::from_str(&text).map_err(|e| FormatError::Parse(path.display().to_string(), e))?
        }
        None => SolverFile::default(),
    };
    let base = SolverConfig::default();
    let config = SolverConfig {
        tol: args.tol.or(file.tol).unwrap_or(base.tol),
        max_iter: file.max_iter.unwrap_or(base.max_iter),
        phi_starts: file.phi_starts.unwrap_or(base.phi_starts),
        c_starts: file.c_starts.unwrap_or(base.c_starts),
        noise_sigma: args.noise.or(file.noise_sigma),
        ..base
    };
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(CliError::Usage(format!("tol must be positive, got {}", config.tol)));
    }
    if config.noise_sigma.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
        return Err(CliError::Usage("noise must be finite and >= 0".into()));
    }
    if config.max_iter == 0 || config.phi_starts == 0 || config.c_starts == 0 {
        return Err(CliError::Usage(
            "max_iter, phi_starts and c_starts must be positive".into(),
        ));
    }
    Ok(config)
}

fn solve(args: &SolveArgs) -> Result<Status, CliError> {
    let config = solver_config(args)?;
    let doc: ObservationsDoc = read_json(&args.input)?;
    let obs = doc.observations();
    let result = match args.method {
        MethodArg::Nonlinear => solve_global(&obs, &config),
        MethodArg::Linearized => linearized_solve(&obs, &config),
    };
    let write = |r: &SolveReport, converged| write_json(&args.out, &SolutionDoc::new(r, converged));
    match result {
        Ok(report) => {
            write(&report, true)?;
            Ok(Status::Done)
        }
        Err(Error::NoConvergence { best }) => {
            write(&best, false)?;
            Ok(Status::NotConverged)
        }
        Err(e) => Err(e.into()),
    }
}

fn densify(args: &DensifyArgs) -> Result<(), CliError> {
    let frames: FramesDoc = read_json(&args.input)?;
    let solution: SolutionDoc = read_json(&args.solution)?;
    let poses = solution.poses()?;
    let images = frames.images();
    // Frames the solver left without a pose are dropped.
    let mut selected = Vec::with_capacity(poses.len());
    for pose in &poses {
        let k = frames
            .frames
            .iter()
            .position(|f| f.index == pose.frame_index)
            .ok_or_else(|| {
                FormatError::Invalid(format!("solution names frame {} absent from frames", pose.frame_index))
            })?;
        selected.push(images[k].clone());
    }
    let curve = reconstruct_curve(&selected, &poses, &solution.params.into())?;
    write_json(&args.out, &Curve3dDoc::new(&curve))?;
    Ok(())
}

fn correspond(args: &CorrespondArgs) -> Result<(), CliError> {
    let [first, second] = args.inputs.as_slice() else {
        return Err(CliError::Usage(format!(
            "correspond needs exactly two --in files, got {}",
            args.inputs.len()
        )));
    };
    let v1 = read_json::<ViewDoc>(first)?.view()?;
    let v2 = read_json::<ViewDoc>(second)?.view()?;
    write_json(&args.out, &PairsDoc::new(&correspond_curve(&v1, &v2)?))?;
    Ok(())
}

#[derive(Deserialize)]
struct Probe {
    frames: Option<serde_json::Value>,
    points: Option<serde_json::Value>,
}

fn plot(args: &PlotArgs) -> Result<Vec<PathBuf>, CliError> {
    let name = args.input.display().to_string();
    let text = fs::read_to_string(&args.input).map_err(|e| FormatError::Io(name.clone(), e))?;
    let probe: Probe = serde_json::from_str(&text).map_err(|e| FormatError::Parse(name.clone(), e))?;
    ensure_dir(&args.out)?;
    let mut written = Vec::new();
    match (probe.frames, probe.points) {
        (Some(_), _) => {
            let doc: FramesDoc = read_json(&args.input)?;
            for f in &doc.frames {
                let path = args.out.join(format!("frame_{:03}.svg", f.index));
                write_text(
                    &path,
                    &plot::frame_svg(f.index, &f.curve, f.a, f.b, f.tan_a_dir, f.tan_b_dir),
                )?;
                written.push(path);
            }
        }
        (None, Some(_)) => {
            let doc: Curve3dDoc = read_json(&args.input)?;
            let path = args.out.join("reconstruction.svg");
            write_text(&path, &plot::reconstruction_svg(&doc.points, &doc.mirror_flag))?;
            written.push(path);
        }
        (None, None) => {
            return Err(FormatError::Invalid(format!("{name}: neither a frames nor a curve3d document")).into());
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct SelftestDoc<'a> {
    v: u32,
    seed: u64,
    passed: bool,
    criteria: &'a [Outcome],
}

/// Seed offset for the demonstration pipeline artifacts.
const PIPELINE_SEED: u64 = 1;

/// Runs the whole pipeline once through the command functions, then the
/// acceptance suite, writing everything under `args.out`.
pub fn selftest(args: &SelftestArgs) -> Result<Vec<Outcome>, CliError> {
    let out = &args.out;
    ensure_dir(out)?;
    let seed = args.seed.wrapping_add(PIPELINE_SEED);
    gen(&GenArgs {
        seed,
        frames: 6,
        samples: 64,
        noise: 0.0,
        planar: false,
        out: out.clone(),
    })?;
    observe(&ObserveArgs {
        input: out.join("frames.json"),
        out: out.join("obs.json"),
    })?;
    solve(&SolveArgs {
        input: out.join("obs.json"),
        out: out.join("solution.json"),
        method: MethodArg::Nonlinear,
        tol: None,
        noise: None,
        config: None,
    })?;
    densify(&DensifyArgs {
        input: out.join("frames.json"),
        solution: out.join("solution.json"),
        out: out.join("curve3d.json"),
    })?;
    gen(&GenArgs {
        seed,
        frames: 1,
        samples: 0,
        noise: 0.0,
        planar: true,
        out: out.clone(),
    })?;
    correspond(&CorrespondArgs {
        inputs: vec![out.join("view1.json"), out.join("view2.json")],
        out: out.join("pairs.json"),
    })?;
    for input in ["frames.json", "curve3d.json"] {
        plot(&PlotArgs {
            input: out.join(input),
            out: out.join("plots"),
        })?;
    }

    let outcomes = suite::run_all(args.seed, None);
    let passed = outcomes.iter().all(|o| o.passed);
    write_json(
        &out.join("selftest.json"),
        &SelftestDoc {
            v: VERSION,
            seed: args.seed,
            passed,
            criteria: &outcomes,
        },
    )?;
    Ok(outcomes)
}

pub fn run(cli: &Cli) -> Result<Status, CliError> {
    match &cli.command {
        Command::Gen(a) => gen(a).map(|_| Status::Done),
        Command::Observe(a) => observe(a).map(|_| Status::Done),
        Command::Solve(a) => solve(a),
        Command::Densify(a) => densify(a).map(|_| Status::Done),
        Command::Correspond(a) => correspond(a).map(|_| Status::Done),
        Command::Plot(a) => plot(a).map(|_| Status::Done),
        Command::Selftest(a) => {
            let outcomes = selftest(a)?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            if failed > 0 {
                return Err(CliError::Selftest(failed));
            }
            Ok(Status::Done)
        }
    }
}

/// Parses `args`, runs the command and maps the result to an exit code:
/// 0 on success, 1 on any error, 2 when the solver did not converge.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("error: no-convergence: best candidate written, residual above tolerance");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e.message());
            ExitCode::from(1)
        }
    }
}
