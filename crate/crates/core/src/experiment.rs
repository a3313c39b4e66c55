//! Experiment configurations and batch runs behind the command-line tool.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::{angle_grid, angle_scan, delay_report, write_scan_csv, ScanRow};
use crate::error::{require_finite, require_positive, Error, Result};
use crate::hom::{
    delay_grid, trace_dip, write_dip_csv, DipSummary, DipTrace, PhotonPairSpectrum, SpectralShape, StackBarrier,
};
use crate::stack::{
    build_quarter_wave_stack, perturb_thicknesses, FirstLayer, LayerStack, OperatingPoint, Polarization, StackFile,
};
use crate::tmm::{sig12, transmission_spectrum, write_spectrum_csv};

/// Env var consulted when no thread count is given.
pub const THREADS_ENV: &str = "BANDGAP_DELAY_THREADS";

/// Largest thickness sigma accepted by ensembles.
pub const MAX_ENSEMBLE_SIGMA: f64 = 0.1;

/// The standard mirror: 11 quarter-wave layers, 2.22/1.41, high first.
pub fn standard_mirror(design_wavelength_nm: f64) -> Result<LayerStack> {
    build_quarter_wave_stack(design_wavelength_nm, 2.22, 1.41, 11, FirstLayer::High)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackSource {
    File(PathBuf),
    Inline(StackFile),
}

impl StackSource {
    pub fn load(&self) -> Result<LayerStack> {
        match self {
            StackSource::File(path) => LayerStack::from_json_file(path),
            StackSource::Inline(file) => file.clone().into_stack(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Spectrum {
        from_nm: f64,
        to_nm: f64,
        step_nm: f64,
        angle_deg: f64,
        pol: Polarization,
    },
    ScanAngle {
        lambda_nm: f64,
        pol: Polarization,
        from_deg: f64,
        to_deg: f64,
        step_deg: f64,
    },
    HomDip {
        lambda_nm: f64,
        angle_deg: f64,
        pol: Polarization,
        tc_fs: f64,
        from_fs: f64,
        to_fs: f64,
        step_fs: f64,
        #[serde(default = "gaussian")]
        shape: SpectralShape,
        #[serde(default)]
        prism_microns: bool,
    },
    Perturb {
        lambda_nm: f64,
        angle_deg: f64,
        pol: Polarization,
        sigma: f64,
        samples: usize,
        seed: u64,
    },
}

fn gaussian() -> SpectralShape {
    SpectralShape::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
    pub stack: StackSource,
    /// `None` writes to stdout.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn require_angle_deg(field: &str, deg: f64) -> Result<()> {
    require_finite(field, deg)?;
    if !(0.0..90.0).contains(&deg) {
        return Err(Error::validation(
            field,
            format!("must lie in [0, 90) degrees, got {deg}"),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every parameter against the operation it feeds.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::validation("threads", "must be >= 1"));
        }
        match &self.command {
            Command::Spectrum {
                from_nm,
                to_nm,
                step_nm,
                angle_deg,
                ..
            } => {
                require_positive("from_nm", *from_nm)?;
                require_positive("step_nm", *step_nm)?;
                require_finite("to_nm", *to_nm)?;
                if to_nm <= from_nm {
                    return Err(Error::validation("to_nm", "must exceed from_nm"));
                }
                require_angle_deg("angle_deg", *angle_deg)
            }
            Command::ScanAngle {
                lambda_nm,
                from_deg,
                to_deg,
                step_deg,
                ..
            } => {
                require_positive("lambda_nm", *lambda_nm)?;
                require_positive("step_deg", *step_deg)?;
                for (field, v) in [("from_deg", *from_deg), ("to_deg", *to_deg)] {
                    require_finite(field, v)?;
                    if !(0.0..=crate::delay::MAX_SCAN_ANGLE_DEG).contains(&v) {
                        return Err(Error::validation(field, "must lie in [0, 85] degrees"));
                    }
                }
                if to_deg < from_deg {
                    return Err(Error::validation("to_deg", "must be >= from_deg"));
                }
                Ok(())
            }
            Command::HomDip {
                lambda_nm,
                angle_deg,
                tc_fs,
                from_fs,
                to_fs,
                step_fs,
                shape,
                ..
            } => {
                require_angle_deg("angle_deg", *angle_deg)?;
                require_positive("step_fs", *step_fs)?;
                require_finite("from_fs", *from_fs)?;
                require_finite("to_fs", *to_fs)?;
                if to_fs <= from_fs {
                    return Err(Error::validation("to_fs", "must exceed from_fs"));
                }
                PhotonPairSpectrum::centered(*lambda_nm, *tc_fs)?
                    .with_shape(*shape)
                    .validate()
            }
            Command::Perturb {
                lambda_nm,
                angle_deg,
                sigma,
                samples,
                ..
            } => {
                require_positive("lambda_nm", *lambda_nm)?;
                require_angle_deg("angle_deg", *angle_deg)?;
                validate_ensemble(*sigma, *samples)
            }
        }
    }
}

fn validate_ensemble(sigma: f64, samples: usize) -> Result<()> {
    require_finite("sigma", sigma)?;
    if !(0.0..=MAX_ENSEMBLE_SIGMA).contains(&sigma) {
        return Err(Error::validation(
            "sigma",
            format!("must lie in [0, {MAX_ENSEMBLE_SIGMA}]"),
        ));
    }
    if samples < 2 {
        return Err(Error::validation("samples", "must be >= 2"));
    }
    Ok(())
}

/// Runs `f` on a pool of `threads` workers, falling back to
/// [`THREADS_ENV`] and then to the number of cores.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = threads.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::validation("threads", "must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    Ok(pool.install(f))
}

/// Splitmix64 finalizer; per-sample seeds are `mix(base + i)`.
fn sample_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub index: usize,
    pub seed: u64,
    /// `None` when the perturbed stack was opaque at the point.
    pub relative_group_delay_fs: Option<f64>,
    pub deviation_fs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub sigma: f64,
    pub base_seed: u64,
    pub samples: usize,
    pub used: usize,
    pub excluded: usize,
    pub nominal_relative_group_delay_fs: f64,
    pub mean_deviation_fs: f64,
    pub std_deviation_fs: f64,
    pub min_deviation_fs: f64,
    pub max_deviation_fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub summary: EnsembleSummary,
    pub samples: Vec<EnsembleSample>,
}

/// Relative group delay of thickness-perturbed copies of `stack`, as
/// deviations from the unperturbed value. Opaque samples are excluded and
/// counted.
pub fn run_perturbation_ensemble(
    stack: &LayerStack,
    sigma: f64,
    n_samples: usize,
    point: &OperatingPoint,
    base_seed: u64,
) -> Result<EnsembleResult> {
    validate_ensemble(sigma, n_samples)?;
    let nominal = delay_report(stack, point)?.relative_group_delay;
    let samples: Vec<EnsembleSample> = (0..n_samples)
        .into_par_iter()
        .map(|index| {
            let seed = sample_seed(base_seed, index as u64);
            let perturbed = perturb_thicknesses(stack, sigma, seed)?;
            match delay_report(&perturbed, point) {
                Ok(r) => Ok(EnsembleSample {
                    index,
                    seed,
                    relative_group_delay_fs: Some(r.relative_group_delay),
                    deviation_fs: Some(r.relative_group_delay - nominal),
                }),
                Err(Error::OpaquePoint { .. }) => Ok(EnsembleSample {
                    index,
                    seed,
                    relative_group_delay_fs: None,
                    deviation_fs: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let deviations: Vec<f64> = samples.iter().filter_map(|s| s.deviation_fs).collect();
    let used = deviations.len();
    let mean = if used > 0 {
        deviations.iter().sum::<f64>() / used as f64
    } else {
        f64::NAN
    };
    let std = if used > 1 {
        (deviations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (used - 1) as f64).sqrt()
    } else {
        0.0
    };
    let summary = EnsembleSummary {
        sigma,
        base_seed,
        samples: n_samples,
        used,
        excluded: n_samples - used,
        nominal_relative_group_delay_fs: nominal,
        mean_deviation_fs: mean,
        std_deviation_fs: std,
        min_deviation_fs: deviations.iter().copied().fold(f64::INFINITY, f64::min),
        max_deviation_fs: deviations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(EnsembleResult { summary, samples })
}

pub fn write_ensemble_csv<W: Write>(samples: &[EnsembleSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "seed", "rel_group_delay_fs", "deviation_fs", "flags"])?;
    for s in samples {
        let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
        w.write_record([
            s.index.to_string(),
            s.seed.to_string(),
            opt(s.relative_group_delay_fs),
            opt(s.deviation_fs),
            if s.deviation_fs.is_none() {
                "opaque".into()
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// What a run produced, for exit-status decisions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutcome {
    pub rows: usize,
    pub flagged: usize,
    /// Human-readable summary, e.g. the dip JSON.
    pub summary: Option<String>,
    pub files: Vec<PathBuf>,
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.json"))
}

/// Validates and runs one experiment, writing its output.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let stack = config.stack.load()?;
    with_threads(config.threads, || run(config, &stack))?
}

fn run(config: &ExperimentConfig, stack: &LayerStack) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::default();
    let mut out = open_output(&config.output)?;
    match &config.command {
        Command::Spectrum {
            from_nm,
            to_nm,
            step_nm,
            angle_deg,
            pol,
        } => {
            let n = ((to_nm - from_nm) / step_nm + 1e-9).floor() as usize;
            let wavelengths: Vec<f64> = (0..=n).map(|i| from_nm + step_nm * i as f64).collect();
            let samples = transmission_spectrum(stack, &wavelengths, angle_deg.to_radians(), *pol)?;
            match config.format {
                OutputFormat::Csv => write_spectrum_csv(&samples, &mut out)?,
                OutputFormat::Json => serde_json::to_writer_pretty(&mut out, &samples)?,
            }
            outcome.rows = samples.len();
        }
        Command::ScanAngle {
            lambda_nm,
            pol,
            from_deg,
            to_deg,
            step_deg,
        } => {
            let angles = angle_grid(*from_deg, *to_deg, *step_deg)?;
            let rows = angle_scan(stack, *lambda_nm, *pol, &angles)?;
            match config.format {
                OutputFormat::Csv => write_scan_csv(&rows, &mut out)?,
                OutputFormat::Json => serde_json::to_writer_pretty(&mut out, &rows)?,
            }
            outcome.rows = rows.len();
            outcome.flagged = rows.iter().filter(|r| r.is_flagged()).count();
        }
        Command::HomDip {
            lambda_nm,
            angle_deg,
            pol,
            tc_fs,
            from_fs,
            to_fs,
            step_fs,
            shape,
            prism_microns,
        } => {
            let spectrum = PhotonPairSpectrum::centered(*lambda_nm, *tc_fs)?.with_shape(*shape);
            let barrier = StackBarrier::relative_to_air(stack, angle_deg.to_radians(), *pol);
            let trace = trace_dip(&spectrum, &barrier, &delay_grid(*from_fs, *to_fs, *step_fs)?)?;
            let summary = serde_json::to_string(&DipSummary::from(&trace))?;
            match config.format {
                OutputFormat::Csv => {
                    write_dip_csv(&trace, *prism_microns, &mut out)?;
                    if let Some(path) = &config.output {
                        let side = sidecar(path);
                        std::fs::write(&side, &summary)?;
                        outcome.files.push(side);
                    }
                }
                OutputFormat::Json => serde_json::to_writer_pretty(&mut out, &trace)?,
            }
            outcome.rows = trace.rates.len();
            outcome.summary = Some(summary);
        }
        Command::Perturb {
            lambda_nm,
            angle_deg,
            pol,
            sigma,
            samples,
            seed,
        } => {
            let point = OperatingPoint::from_degrees(*lambda_nm, *angle_deg, *pol)?;
            let result = run_perturbation_ensemble(stack, *sigma, *samples, &point, *seed)?;
            let summary = serde_json::to_string(&result.summary)?;
            match config.format {
                OutputFormat::Csv => {
                    write_ensemble_csv(&result.samples, &mut out)?;
                    if let Some(path) = &config.output {
                        let side = sidecar(path);
                        std::fs::write(&side, &summary)?;
                        outcome.files.push(side);
                    }
                }
                OutputFormat::Json => serde_json::to_writer_pretty(&mut out, &result)?,
            }
            outcome.rows = result.samples.len();
            outcome.flagged = result.summary.excluded;
            outcome.summary = Some(summary);
        }
    }
    out.flush()?;
    if let Some(p) = &config.output {
        outcome.files.insert(0, p.clone());
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    pub design_wavelength_nm: f64,
    pub photon_wavelength_nm: f64,
    pub correlation_time_fs: f64,
    pub oblique_angle_deg: f64,
    pub scan_step_deg: f64,
    pub scan_to_deg: f64,
    pub dip_half_range_fs: f64,
    pub dip_step_fs: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            design_wavelength_nm: 692.0,
            photon_wavelength_nm: 702.0,
            correlation_time_fs: 15.0,
            oblique_angle_deg: 55.0,
            scan_step_deg: 1.0,
            scan_to_deg: 70.0,
            dip_half_range_fs: 40.0,
            dip_step_fs: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSet {
    pub files: Vec<PathBuf>,
    pub dip_normal: DipSummary,
    pub dip_oblique: DipSummary,
    pub scan_p: Vec<ScanRow>,
    pub scan_s: Vec<ScanRow>,
}

fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
    f(&mut w).map_err(|e| match e {
        Error::Io(m) => Error::Io(format!("{}: {m}", path.display())),
        other => other,
    })?;
    w.flush()?;
    Ok(())
}

/// Theory curves for the coincidence dips at normal and oblique incidence
/// and the P/S angle scans, written into `dir`.
pub fn reproduce_figures(dir: &Path, options: &FigureOptions) -> Result<FigureSet> {
    std::fs::create_dir_all(dir)?;
    let mirror = standard_mirror(options.design_wavelength_nm)?;
    let spectrum = PhotonPairSpectrum::centered(options.photon_wavelength_nm, options.correlation_time_fs)?;
    let delays = delay_grid(
        -options.dip_half_range_fs,
        options.dip_half_range_fs,
        options.dip_step_fs,
    )?;
    let angles = angle_grid(0.0, options.scan_to_deg, options.scan_step_deg)?;

    let dip = |deg: f64| -> Result<DipTrace> {
        let barrier = StackBarrier::relative_to_air(&mirror, deg.to_radians(), Polarization::P);
        trace_dip(&spectrum, &barrier, &delays)
    };
    let fig2a = dip(0.0)?;
    let fig2b = dip(options.oblique_angle_deg)?;
    let scan_p = angle_scan(&mirror, options.photon_wavelength_nm, Polarization::P, &angles)?;
    let scan_s = angle_scan(&mirror, options.photon_wavelength_nm, Polarization::S, &angles)?;

    let mut files = Vec::new();
    for (name, trace) in [("fig2a.csv", &fig2a), ("fig2b.csv", &fig2b)] {
        let path = dir.join(name);
        write_file(&path, |w| write_dip_csv(trace, false, w))?;
        files.push(path);
    }
    for (name, rows) in [("fig3_theory.csv", &scan_p), ("fig4_theory.csv", &scan_s)] {
        let path = dir.join(name);
        write_file(&path, |w| write_scan_csv(rows, w))?;
        files.push(path);
    }
    let set = FigureSet {
        files,
        dip_normal: DipSummary::from(&fig2a),
        dip_oblique: DipSummary::from(&fig2b),
        scan_p,
        scan_s,
    };
    let summary_path = dir.join("figures_summary.json");
    let summary = serde_json::json!({
        "fig2a": set.dip_normal,
        "fig2b": set.dip_oblique,
        "options": options,
    });
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    let mut set = set;
    set.files.push(summary_path);
    Ok(set)
}
