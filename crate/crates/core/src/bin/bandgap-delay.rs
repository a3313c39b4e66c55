use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandgap_delay::experiment::{
    execute, reproduce_figures, with_threads, Command, ExperimentConfig, FigureOptions, OutputFormat, StackSource,
    THREADS_ENV,
};
use bandgap_delay::hom::SpectralShape;
use bandgap_delay::stack::{FirstLayer, QuarterWaveSpec, StackFile};
use bandgap_delay::{Error, Polarization};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "bandgap-delay",
    version,
    about = "Transmission delays of multilayer dielectric mirrors"
)]
struct Cli {
    /// Worker threads (default: number of cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
struct StackArgs {
    /// Stack description (JSON). Defaults to the 11-layer 2.22/1.41 mirror.
    #[arg(long)]
    stack: Option<PathBuf>,
    /// Design wavelength of the default mirror, nm (688 for mirror 2).
    #[arg(long, default_value_t = 692.0)]
    design_nm: f64,
}

impl StackArgs {
    fn source(&self) -> StackSource {
        match &self.stack {
            Some(path) => StackSource::File(path.clone()),
            None => StackSource::Inline(StackFile::QuarterWave {
                quarter_wave: QuarterWaveSpec {
                    lambda0_nm: self.design_nm,
                    n_high: 2.22,
                    n_low: 1.41,
                    count: 11,
                    first: FirstLayer::High,
                },
                label: String::new(),
            }),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Transmittance and unwrapped phase over a wavelength sweep.
    Spectrum {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long, default_value_t = 550.0)]
        from_nm: f64,
        #[arg(long, default_value_t = 850.0)]
        to_nm: f64,
        #[arg(long, default_value_t = 0.5)]
        step_nm: f64,
        #[arg(long, default_value_t = 0.0)]
        angle_deg: f64,
        #[arg(long, default_value = "p")]
        pol: Polarization,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Group delay, Larmor and semiclassical times versus angle of incidence.
    ScanAngle {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long, default_value_t = 702.0)]
        lambda_nm: f64,
        #[arg(long, default_value = "p")]
        pol: Polarization,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 70.0)]
        to: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Exit with status 2 when more than this fraction of rows is flagged.
        #[arg(long, default_value_t = 0.1)]
        max_flagged_fraction: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Two-photon coincidence rate versus relative delay.
    HomDip {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long, default_value_t = 702.0)]
        lambda_nm: f64,
        #[arg(long, default_value_t = 0.0)]
        angle_deg: f64,
        #[arg(long, default_value = "p")]
        pol: Polarization,
        #[arg(long, default_value_t = 15.0)]
        tc_fs: f64,
        #[arg(long, default_value_t = -40.0, allow_hyphen_values = true)]
        from_fs: f64,
        #[arg(long, default_value_t = 40.0, allow_hyphen_values = true)]
        to_fs: f64,
        #[arg(long, default_value_t = 0.25)]
        step_fs: f64,
        /// Use a sinc² pair spectrum instead of a Gaussian.
        #[arg(long)]
        sinc2: bool,
        /// Report trombone prism position (μm) instead of delay.
        #[arg(long)]
        prism_microns: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Group-delay spread over random layer-thickness errors.
    Perturb {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long, default_value_t = 702.0)]
        lambda_nm: f64,
        #[arg(long, default_value_t = 0.0)]
        angle_deg: f64,
        #[arg(long, default_value = "p")]
        pol: Polarization,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Writes the dip traces and P/S angle scans for the standard mirror.
    Reproduce {
        #[arg(long, default_value = "figures")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 692.0)]
        design_nm: f64,
    },
    /// Runs an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn config_for(cmd: Cmd, threads: Option<usize>) -> Result<(ExperimentConfig, Option<f64>), Error> {
    let build = |command, stack: StackArgs, out: OutputArgs| ExperimentConfig {
        command,
        stack: stack.source(),
        output: out.output,
        format: out.format.into(),
        threads,
    };
    Ok(match cmd {
        Cmd::Spectrum {
            stack,
            from_nm,
            to_nm,
            step_nm,
            angle_deg,
            pol,
            out,
        } => (
            build(
                Command::Spectrum {
                    from_nm,
                    to_nm,
                    step_nm,
                    angle_deg,
                    pol,
                },
                stack,
                out,
            ),
            None,
        ),
        Cmd::ScanAngle {
            stack,
            lambda_nm,
            pol,
            from,
            to,
            step,
            max_flagged_fraction,
            out,
        } => (
            build(
                Command::ScanAngle {
                    lambda_nm,
                    pol,
                    from_deg: from,
                    to_deg: to,
                    step_deg: step,
                },
                stack,
                out,
            ),
            Some(max_flagged_fraction),
        ),
        Cmd::HomDip {
            stack,
            lambda_nm,
            angle_deg,
            pol,
            tc_fs,
            from_fs,
            to_fs,
            step_fs,
            sinc2,
            prism_microns,
            out,
        } => (
            build(
                Command::HomDip {
                    lambda_nm,
                    angle_deg,
                    pol,
                    tc_fs,
                    from_fs,
                    to_fs,
                    step_fs,
                    shape: if sinc2 {
                        SpectralShape::Sinc2
                    } else {
                        SpectralShape::Gaussian
                    },
                    prism_microns,
                },
                stack,
                out,
            ),
            None,
        ),
        Cmd::Perturb {
            stack,
            lambda_nm,
            angle_deg,
            pol,
            sigma,
            samples,
            seed,
            out,
        } => (
            build(
                Command::Perturb {
                    lambda_nm,
                    angle_deg,
                    pol,
                    sigma,
                    samples,
                    seed,
                },
                stack,
                out,
            ),
            Some(0.5),
        ),
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            let mut config = ExperimentConfig::from_json_str(&text)?;
            config.threads = config.threads.or(threads);
            (config, Some(0.1))
        }
        Cmd::Reproduce { .. } => unreachable!("handled separately"),
    })
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Cmd::Reproduce { out_dir, design_nm } = &cli.command {
        let options = FigureOptions {
            design_wavelength_nm: *design_nm,
            ..Default::default()
        };
        let set = with_threads(cli.threads, || reproduce_figures(out_dir, &options))??;
        for f in &set.files {
            eprintln!("wrote {}", f.display());
        }
        eprintln!(
            "dip centre: {:.3} fs at normal incidence, {:.3} fs at {} deg",
            set.dip_normal.dip_center_fs, set.dip_oblique.dip_center_fs, options.oblique_angle_deg
        );
        return Ok(0);
    }

    let (config, max_flagged) = config_for(cli.command, cli.threads)?;
    let outcome = execute(&config)?;
    if let Some(summary) = &outcome.summary {
        if config.output.is_none() || config.format == OutputFormat::Csv {
            eprintln!("{summary}");
        }
    }
    let limit = max_flagged.unwrap_or(0.0);
    if outcome.rows > 0 && outcome.flagged as f64 > limit * outcome.rows as f64 {
        eprintln!("{} of {} points flagged", outcome.flagged, outcome.rows);
        return Ok(EXIT_NUMERICAL);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_VALIDATION
            })
        }
    }
}
