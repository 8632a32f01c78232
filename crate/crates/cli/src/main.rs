use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tetreg::config::{parse_config, Value};
use tetreg::metrics::DEFAULT_MARGIN_MM;
use tetreg::render::Axis;
use tetreg::synth::SynthSpec;
use tetreg_cli::{
    cmd_evaluate, cmd_export_front, cmd_rasterize, cmd_register, cmd_render, cmd_synth, CliError, CliResult,
    Deformation, FrontFormat, RenderMode, RenderRequest,
};

/// Multi-objective deformable registration on dual tetrahedral meshes.
#[derive(Parser)]
#[command(name = "tetreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic problem with an analytic ground-truth field.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// JSON synthetic spec; the built-in anatomy when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Grid size per axis for the built-in anatomy.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Voxel spacing for the built-in anatomy; keeps the physical
        /// extent of the 64-voxel grid when omitted.
        #[arg(long)]
        spacing_mm: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimize a problem and write a run directory.
    Register {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute metric reports for a deformation.
    Evaluate {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        deformation: DeformationArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARGIN_MM)]
        margin_mm: f64,
    },
    /// Rasterize a genotype into forward and inverse DVFs.
    Rasterize {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        genotype: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a slice as a PGM/PPM image.
    Render {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        deformation: DeformationArgs,
        #[arg(long)]
        out: PathBuf,
        /// contours, grid or arrows.
        #[arg(long, default_value = "contours")]
        mode: String,
        #[arg(long, default_value = "z")]
        slice_axis: String,
        #[arg(long)]
        slice_index: Option<usize>,
        #[arg(long, default_value_t = 4)]
        step: usize,
        #[arg(long, default_value_t = 4)]
        zoom: usize,
    },
    /// Export the archive of a run directory as a table sorted by guidance.
    ExportFront {
        /// Run directory written by `register`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Args)]
struct DeformationArgs {
    /// Genotype JSON; the identity when no deformation is given.
    #[arg(long, conflicts_with_all = ["forward", "inverse"])]
    genotype: Option<PathBuf>,
    #[arg(long, requires = "inverse")]
    forward: Option<PathBuf>,
    #[arg(long, requires = "forward")]
    inverse: Option<PathBuf>,
}

impl DeformationArgs {
    fn resolve(self) -> Deformation {
        match (self.genotype, self.forward, self.inverse) {
            (Some(g), _, _) => Deformation::Genotype(g),
            (None, Some(forward), Some(inverse)) => Deformation::Fields { forward, inverse },
            _ => Deformation::Identity,
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::Core(tetreg::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth {
            out,
            spec,
            size,
            spacing_mm,
            seed,
        } => {
            let mut spec = match spec {
                Some(p) => serde_json::from_str::<SynthSpec>(&read_text(&p)?)
                    .map_err(|e| CliError::Core(tetreg::Error::Config(e.to_string())))?,
                None => SynthSpec::preset(size, spacing_mm.unwrap_or(96.0 / size.max(1) as f64)),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            cmd_synth(&spec, &out)?;
        }
        Command::Register {
            config,
            problem,
            out,
            seed,
        } => {
            let mut cfg = parse_config(&read_text(&config)?)?;
            if let Some(s) = seed {
                let s = i64::try_from(s).map_err(|_| CliError::Usage("seed too large".into()))?;
                cfg.set("seed", Value::Integer(s))?;
            }
            let summary = cmd_register(&cfg, &problem, &out)?;
            println!(
                "archive {} members, {} generations, seed {}",
                summary.archive_size, summary.generations, summary.seed
            );
        }
        Command::Evaluate {
            problem,
            deformation,
            out,
            margin_mm,
        } => {
            let report = cmd_evaluate(&problem, &deformation.resolve(), margin_mm, &out)?;
            print!("{}", report.to_csv());
        }
        Command::Rasterize { problem, genotype, out } => cmd_rasterize(&problem, &genotype, &out)?,
        Command::Render {
            problem,
            deformation,
            out,
            mode,
            slice_axis,
            slice_index,
            step,
            zoom,
        } => {
            let axis: Axis = slice_axis.parse()?;
            let index = match slice_index {
                Some(i) => i,
                None => {
                    let bundle = tetreg::synth::load_bundle(&problem)?;
                    let n = match axis {
                        Axis::X => 0,
                        Axis::Y => 1,
                        Axis::Z => 2,
                    };
                    bundle.source.geometry.dims[n] / 2
                }
            };
            let req = RenderRequest {
                mode: mode.parse::<RenderMode>()?,
                axis,
                index,
                step,
                zoom,
            };
            cmd_render(&problem, &deformation.resolve(), &req, &out)?;
        }
        Command::ExportFront { run, out, format } => {
            let rows = cmd_export_front(&run, format.parse::<FrontFormat>()?, &out)?;
            println!("{} rows", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
