//! Command-line front end. `run` holds all logic so it can be driven from
//! tests; the binary only forwards process arguments and the exit code.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 tracking lost
//! for the whole run, 4 analysis failure.

mod range;

pub use range::Range;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Frame, Homography};
use crate::imaging::{esf_from_roi, mtf50, mtf_from_esf, read_pgm, write_mtf_csv, ImagingError};
use crate::optics::{fov_at_throw, rayleigh_spot, EyepieceModel, Wavelength};
use crate::simkit::{
    calibrate_from_patterns, graycode_generate, random_camera_mapping, run_scenario, simulate_observation,
    trajectory_stats, write_trace_csv, Scenario, DEFAULT_DECODE_THRESHOLD,
};
use crate::steering::{image_shift_approx, image_shift_exact, settle_time, MirrorModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRACKING_LOST: i32 = 3;
pub const EXIT_ANALYSIS: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "beamsim",
    version,
    about = "Beaming-display design calculators, closed-loop simulation, calibration and MTF analysis",
    after_help = "Ranges are written start:stop:step (inclusive of start, and of stop when it lands on the grid) or as a single value."
)]
pub struct Cli {
    /// Seed for every random draw; overrides a scenario's `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files. Without it, tables go to standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress informational messages on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an optics or steering formula over a grid.
    Design {
        #[command(subcommand)]
        kind: DesignKind,
    },
    /// Run a scenario file through the closed tracking loop.
    Simulate(SimulateArgs),
    /// Slanted-edge MTF of a PGM image.
    Mtf(MtfArgs),
    /// Gray-code calibration against a simulated camera.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Subcommand)]
pub enum DesignKind {
    /// Diffraction-limited spot size 1.22·d·λ/D.
    Rayleigh {
        /// Throw distance d, meters.
        #[arg(long, default_value = "0.5:2.0:0.5")]
        d: Range,
        /// Aperture D, meters.
        #[arg(long = "D", default_value = "0.02:0.08:0.01")]
        aperture: Range,
        /// Wavelength, meters.
        #[arg(long, default_value = "550e-9")]
        lambda: Range,
    },
    /// Image shift on the screen for a mirror pointing error.
    Shift {
        /// Throw distance, meters.
        #[arg(long, default_value = "1")]
        z: Range,
        /// Beam angle, degrees.
        #[arg(long, default_value = "0:45:15")]
        theta: Range,
        /// Pointing error, degrees.
        #[arg(long, default_value = "0.02:0.2:0.02")]
        dtheta: Range,
    },
    /// Mirror settling time against step size.
    Settle {
        /// Step size, degrees.
        #[arg(long, default_value = "0.1:20:0.1")]
        step: Range,
    },
    /// Headset field of view against throw distance.
    Fov {
        /// Throw distance, meters.
        #[arg(long, default_value = "0.5:2.0:0.25")]
        throw: Range,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (key = value).
    pub scenario: PathBuf,
    /// Project from the projector center instead of re-centering with the homography.
    #[arg(long)]
    pub no_warp: bool,
    /// Keep the mirror at rest.
    #[arg(long)]
    pub no_steer: bool,
    /// Leave the tunable lens uncommanded.
    #[arg(long)]
    pub no_refocus: bool,
    /// Simulated seconds; overrides `duration_s`.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Scenario key override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MtfArgs {
    /// Binary PGM (P5) containing a slanted edge.
    #[arg(long)]
    pub image: PathBuf,
    /// Region of interest `x,y,w,h`; the whole image by default.
    #[arg(long)]
    pub roi: Option<String>,
    /// Angular pixel pitch, degrees per pixel.
    #[arg(long)]
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mapping {
    Identity,
    Random,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 854)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    /// Simulated camera → projector mapping.
    #[arg(long, value_enum, default_value_t = Mapping::Identity)]
    pub h0: Mapping,
}

/// Validated inputs of `simulate`: the scenario with command-line overrides
/// applied, the seed and the output directory.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(args: &SimulateArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, String> {
        let text = std::fs::read_to_string(&args.scenario)
            .map_err(|e| format!("cannot read {}: {e}", args.scenario.display()))?;
        let mut overrides = Vec::new();
        for o in &args.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| format!("override '{o}' is not key=value"))?;
            overrides.push((k.trim().to_string(), v.to_string()));
        }
        if let Some(d) = args.duration {
            overrides.push(("duration_s".into(), d.to_string()));
        }
        if let Some(s) = seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        let mut scenario = Scenario::parse_with_overrides(&text, &overrides)
            .map_err(|e| format!("{}: {e}", args.scenario.display()))?;
        if args.no_warp {
            scenario.toggles.warp = false;
        }
        if args.no_steer {
            scenario.toggles.steer = false;
        }
        if args.no_refocus {
            scenario.toggles.refocus = false;
        }
        Ok(Self {
            seed: scenario.pipeline.seed,
            scenario,
            out,
        })
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn config(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn io_fail(e: io::Error) -> Failure {
    config(format!("write failed: {e}"))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Design { kind } => cmd_design(&cli, kind, stdout, stderr),
        Command::Simulate(a) => cmd_simulate(&cli, a, stdout, stderr),
        Command::Mtf(a) => cmd_mtf(&cli, a, stdout, stderr),
        Command::Calibrate(a) => cmd_calibrate(&cli, a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// Writes `body` to `<out>/<name>` when an output directory is set, else to
/// standard output.
fn emit(cli: &Cli, name: &str, body: &[u8], stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| config(format!("cannot create {}: {e}", dir.display())))?;
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| config(format!("cannot write {}: {e}", path.display())))?;
            if !cli.quiet {
                let _ = writeln!(stderr, "wrote {}", path.display());
            }
        }
        None => stdout.write_all(body).map_err(io_fail)?,
    }
    Ok(())
}

fn cmd_design(cli: &Cli, kind: &DesignKind, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let mut csv = String::new();
    let name;
    match kind {
        DesignKind::Rayleigh { d, aperture, lambda } => {
            name = "design_rayleigh.csv";
            csv.push_str("d_m,aperture_m,lambda_m,spot_m,spot_um\n");
            for l in lambda.values().map_err(config)? {
                let w = Wavelength::new(l).map_err(|e| config(e.to_string()))?;
                for dv in d.values().map_err(config)? {
                    for a in aperture.values().map_err(config)? {
                        let s = rayleigh_spot(dv, w, a).map_err(|e| config(e.to_string()))?;
                        csv.push_str(&format!("{dv},{a},{l},{s},{}\n", s * 1e6));
                    }
                }
            }
        }
        DesignKind::Shift { z, theta, dtheta } => {
            name = "design_shift.csv";
            csv.push_str("z_m,theta_deg,dtheta_deg,shift_exact_mm,shift_approx_mm,relative_error\n");
            for zv in z.values().map_err(config)? {
                for t in theta.values().map_err(config)? {
                    for dt in dtheta.values().map_err(config)? {
                        let (tr, dr) = (t.to_radians(), dt.to_radians());
                        let exact = image_shift_exact(zv, tr, dr).map_err(|e| config(e.to_string()))?;
                        let approx = image_shift_approx(zv, tr, dr).map_err(|e| config(e.to_string()))?;
                        let rel = if exact != 0.0 {
                            (approx - exact).abs() / exact.abs()
                        } else {
                            0.0
                        };
                        csv.push_str(&format!("{zv},{t},{dt},{},{},{rel}\n", exact * 1e3, approx * 1e3));
                    }
                }
            }
        }
        DesignKind::Settle { step } => {
            name = "design_settle.csv";
            let m = MirrorModel::default();
            csv.push_str("step_deg,settle_s\n");
            for s in step.values().map_err(config)? {
                if s < 0.0 {
                    return Err(config("step sizes must be non-negative"));
                }
                csv.push_str(&format!("{s},{}\n", settle_time(&m, s.to_radians())));
            }
        }
        DesignKind::Fov { throw } => {
            name = "design_fov.csv";
            let e = EyepieceModel::default();
            csv.push_str("throw_m,fov_h_deg,fov_v_deg\n");
            for t in throw.values().map_err(config)? {
                if !(t > 0.0) {
                    return Err(config("throw distances must be positive"));
                }
                let (h, v) = fov_at_throw(&e, t);
                csv.push_str(&format!("{t},{h},{v}\n"));
            }
        }
    }
    emit(cli, name, csv.as_bytes(), stdout, stderr)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(
    cli: &Cli,
    args: &SimulateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let rc = RunConfig::load(args, cli.seed, cli.out.clone()).map_err(config)?;
    let sc = &rc.scenario;
    let trace = run_scenario(&sc.scene, &sc.motion, &sc.pipeline, sc.duration, sc.toggles)
        .map_err(|e| config(e.to_string()))?;

    let mut csv = Vec::new();
    write_trace_csv(&trace, &mut csv).map_err(io_fail)?;
    emit(cli, "trace.csv", &csv, stdout, stderr)?;

    let lost = trace.samples.iter().filter(|s| !s.markers_visible).count();
    let ever_seen = trace.events.iter().any(|e| e.markers_visible == Some(true));
    let mut out = String::new();
    if rc.out.is_none() {
        out.push('\n');
    }
    out.push_str("stat,x,y\n");
    match trajectory_stats(&trace) {
        Ok(st) => {
            out.push_str(&format!("mean_offset_px,{},{}\n", st.x.mean_offset, st.y.mean_offset));
            out.push_str(&format!("rms_jitter_px,{},{}\n", st.x.rms_jitter, st.y.rms_jitter));
            out.push_str(&format!(
                "max_excursion_px,{},{}\n",
                st.x.max_excursion, st.y.max_excursion
            ));
            out.push_str(&format!("mean_latency_s,{},\n", st.mean_latency));
        }
        Err(e) => {
            if !cli.quiet {
                let _ = writeln!(stderr, "no statistics: {e}");
            }
        }
    }
    out.push_str(&format!("frames,{},\n", trace.samples.len()));
    out.push_str(&format!("frames_without_markers,{lost},\n"));
    out.push_str(&format!("seed,{},\n", rc.seed));
    stdout.write_all(out.as_bytes()).map_err(io_fail)?;

    if !ever_seen {
        return Err(Failure {
            code: EXIT_TRACKING_LOST,
            message: "markers were never visible".into(),
        });
    }
    Ok(EXIT_OK)
}

fn parse_roi(s: &str) -> Result<(u32, u32, u32, u32), Failure> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| config(format!("roi '{s}' is not x,y,w,h")))?;
    match parts[..] {
        [x, y, w, h] => Ok((x, y, w, h)),
        _ => Err(config(format!("roi '{s}' is not x,y,w,h"))),
    }
}

fn imaging_failure(e: ImagingError) -> Failure {
    let code = match e {
        ImagingError::NoEdgeFound(_) | ImagingError::ProfileTooShort(_) | ImagingError::NoHalfContrastCrossing => {
            EXIT_ANALYSIS
        }
        _ => EXIT_CONFIG,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn cmd_mtf(cli: &Cli, args: &MtfArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    if !(args.pitch > 0.0 && args.pitch.is_finite()) {
        return Err(config("pitch must be positive"));
    }
    let file = File::open(&args.image).map_err(|e| config(format!("cannot open {}: {e}", args.image.display())))?;
    let img = read_pgm(io::BufReader::new(file)).map_err(imaging_failure)?;
    let roi = match &args.roi {
        Some(s) => img.crop(parse_roi(s)?).map_err(imaging_failure)?,
        None => img,
    };
    let profile = esf_from_roi(&roi).map_err(imaging_failure)?;
    let curve = mtf_from_esf(&profile).map_err(imaging_failure)?;
    let (cypx, cpd) = mtf50(&curve, args.pitch).map_err(imaging_failure)?;

    let mut csv = Vec::new();
    write_mtf_csv(&curve, &mut csv).map_err(io_fail)?;
    emit(cli, "mtf.csv", &csv, stdout, stderr)?;
    let sep = if cli.out.is_none() { "\n" } else { "" };
    write!(stdout, "{sep}mtf50_cypx,mtf50_cpd\n{cypx},{cpd}\n").map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let size = (args.width, args.height);
    let stack = graycode_generate(size).map_err(|e| config(e.to_string()))?;
    let h0 = match args.h0 {
        Mapping::Identity => Homography::identity(Frame::Camera, Frame::Projector),
        Mapping::Random => random_camera_mapping(&mut ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0)), size),
    };
    let observed = simulate_observation(&stack, &h0, size);
    let (h, pairs) = calibrate_from_patterns(&stack, &observed, DEFAULT_DECODE_THRESHOLD).map_err(|e| Failure {
        code: EXIT_ANALYSIS,
        message: e.to_string(),
    })?;

    let m = h.matrix();
    let mut out = String::new();
    out.push_str(&format!("pattern_pairs,{}\n", stack.pair_count()));
    out.push_str(&format!("column_bits,{}\n", stack.col_bits));
    out.push_str(&format!("row_bits,{}\n", stack.row_bits));
    out.push_str(&format!("correspondences,{}\n", pairs.len()));
    for r in 0..3 {
        out.push_str(&format!("h_row{r},{},{},{}\n", m[(r, 0)], m[(r, 1)], m[(r, 2)]));
    }
    out.push_str(&format!(
        "max_reprojection_error_px,{}\n",
        pairs.max_reprojection_error(&h)
    ));
    out.push_str(&format!("max_entry_diff_vs_h0,{}\n", h.max_entry_diff(&h0)));
    stdout.write_all(out.as_bytes()).map_err(io_fail)?;
    Ok(EXIT_OK)
}

/// Convenience for callers that only need the exit code, e.g. the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run(args, &mut out, &mut err);
    let _ = out.flush();
    code
}
