//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line, then exits non-zero if any failed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bandgap_delay::delay::{angle_grid, angle_scan, delay_report};
use bandgap_delay::experiment::{run_perturbation_ensemble, standard_mirror, with_threads, EnsembleResult};
use bandgap_delay::hom::{delay_grid, trace_dip, PhotonPairSpectrum, StackBarrier};
use bandgap_delay::stack::{Layer, LayerStack, OperatingPoint, Polarization};
use bandgap_delay::tmm::{amplitudes_at, scattering, transmission_spectrum};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Frozen midgap transmittance of the 11-layer H(LH)^5 mirror in air:
/// quarter-wave layers map an admittance Y to n²/Y, so from the air exit
/// Y = n_H^12 / n_L^10 and T = 4Y/(1+Y)². Evaluated at 30 digits.
const MIDGAP_ORACLE: f64 = 0.008_632_464_701_542_14;

fn mirror() -> LayerStack {
    standard_mirror(692.0).expect("standard mirror")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn midgap_transmission() -> Outcome {
    let point = OperatingPoint::new(692.0, 0.0, Polarization::P).map_err(|e| e.to_string())?;
    let (s, dt) = timed(|| scattering(&mirror(), &point));
    let t = s.map_err(|e| e.to_string())?.transmittance;
    check((0.005..=0.02).contains(&t), format!("T = {t:.6} in {dt:?}"))
}

fn stopband_extent() -> Outcome {
    let wavelengths: Vec<f64> = (0..600).map(|i| 550.0 + 300.0 * i as f64 / 599.0).collect();
    let stack = mirror();
    let (spectrum, dt) = timed(|| transmission_spectrum(&stack, &wavelengths, 0.0, Polarization::P));
    let spectrum = spectrum.map_err(|e| e.to_string())?;
    let worst_in_band = spectrum
        .iter()
        .filter(|s| (620.0..=780.0).contains(&s.wavelength_nm))
        .map(|s| s.transmittance)
        .fold(0.0, f64::max);
    let edge =
        |nm: f64| amplitudes_at(&stack, bandgap_delay::angular_frequency(nm), 0.0, Polarization::P).transmittance;
    let (lo, hi) = (edge(550.0), edge(850.0));
    check(
        worst_in_band < 0.05 && lo > 0.5 && hi > 0.5 && dt < Duration::from_secs(1),
        format!("max T(620-780) = {worst_in_band:.4}, T(550) = {lo:.3}, T(850) = {hi:.3}, 600 points in {dt:?}"),
    )
}

fn analytic_oracle() -> Outcome {
    let point = OperatingPoint::new(692.0, 0.0, Polarization::P).map_err(|e| e.to_string())?;
    let t = scattering(&mirror(), &point).map_err(|e| e.to_string())?.transmittance;
    let rel = (t - MIDGAP_ORACLE).abs() / MIDGAP_ORACLE;
    check(rel < 1e-10, format!("relative error {rel:.2e}"))
}

fn energy_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let count = rng.random_range(1..=20);
        let layers = (0..count)
            .map(|_| Layer::lossless(rng.random_range(1.0..=3.0), rng.random_range(10.0..=500.0)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let stack = LayerStack::new(layers).map_err(|e| e.to_string())?;
        let nm = rng.random_range(300.0..2000.0);
        let angle = rng.random_range(0.0..(89.0f64).to_radians());
        let pol = if rng.random_bool(0.5) {
            Polarization::P
        } else {
            Polarization::S
        };
        let a = amplitudes_at(&stack, bandgap_delay::angular_frequency(nm), angle, pol);
        worst = worst.max((a.transmittance + a.reflectance - 1.0).abs());
    }
    let dt = start.elapsed();
    check(
        worst < 1e-12 && dt < Duration::from_secs(30),
        format!("max |T+R-1| = {worst:.2e} over 10^4 cases in {dt:?}"),
    )
}

fn superluminal_crossover() -> Outcome {
    let angles = angle_grid(0.0, 70.0, 1.0).map_err(|e| e.to_string())?;
    let rows = angle_scan(&mirror(), 702.0, Polarization::P, &angles).map_err(|e| e.to_string())?;
    let delays: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.report.as_ref().map(|rep| (r.angle_deg, rep.relative_group_delay)))
        .collect();
    if delays.len() != rows.len() {
        return Err(format!("{} of {} rows failed", rows.len() - delays.len(), rows.len()));
    }
    let at = |deg: f64| delays.iter().find(|(a, _)| *a == deg).map(|p| p.1).unwrap_or(f64::NAN);
    let changes: Vec<f64> = delays
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| w[1].0)
        .collect();
    check(
        at(0.0) < 0.0 && at(55.0) > 0.0 && changes.len() == 1 && at(0.0) < at(70.0),
        format!(
            "rel delay {:.3} fs at 0 deg, {:.3} fs at 55 deg, sign changes before {:?} deg",
            at(0.0),
            at(55.0),
            changes
        ),
    )
}

fn hom_consistency() -> Outcome {
    let stack = mirror();
    let mut lines = Vec::new();
    let mut ok = true;
    for (tc, tol) in [(150.0, 0.05), (15.0, 0.2)] {
        let spectrum = PhotonPairSpectrum::centered(702.0, tc).map_err(|e| e.to_string())?;
        let delays = delay_grid(-3.0 * tc, 3.0 * tc, tc / 200.0).map_err(|e| e.to_string())?;
        for deg in [0.0, 30.0, 55.0] {
            let point = OperatingPoint::from_degrees(702.0, deg, Polarization::P).map_err(|e| e.to_string())?;
            let expected = delay_report(&stack, &point)
                .map_err(|e| e.to_string())?
                .relative_group_delay;
            let barrier = StackBarrier::relative_to_air(&stack, point.angle, Polarization::P);
            let (trace, dt) = timed(|| trace_dip(&spectrum, &barrier, &delays));
            let trace = trace.map_err(|e| e.to_string())?;
            let diff = trace.dip_center_fs - expected;
            ok &= diff.abs() < tol && dt < Duration::from_secs(10);
            lines.push(format!("tc {tc} fs @ {deg} deg: {diff:+.4} fs"));
        }
    }
    check(ok, lines.join(", "))
}

fn derivative_integrity() -> Outcome {
    let angles = angle_grid(0.0, 70.0, 1.0).map_err(|e| e.to_string())?;
    let stack = mirror();
    let mut worst_discrepancy: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    let mut failures = 0;
    for pol in [Polarization::P, Polarization::S] {
        for row in angle_scan(&stack, 702.0, pol, &angles).map_err(|e| e.to_string())? {
            let Some(rep) = row.report else {
                failures += 1;
                continue;
            };
            for (_, d) in rep.derivatives.all() {
                worst_discrepancy = worst_discrepancy.max(d.relative_discrepancy());
                if !(d.converged && d.passes_cross_check()) {
                    failures += 1;
                }
            }
            let residual = rep.larmor_time.powi(2) - rep.group_delay.powi(2) - rep.larmor_out_of_plane.powi(2);
            worst_identity = worst_identity.max(residual.abs() / rep.larmor_time.powi(2));
        }
    }
    check(
        failures == 0 && worst_identity <= 8.0 * f64::EPSILON,
        format!(
            "{failures} failures, max central/Richardson discrepancy {worst_discrepancy:.2e}, \
             max quadrature residual {worst_identity:.2e}"
        ),
    )
}

fn theory_ordering() -> Outcome {
    let stack = mirror();
    let angles = angle_grid(0.0, 70.0, 1.0).map_err(|e| e.to_string())?;
    let rows = angle_scan(&stack, 702.0, Polarization::P, &angles).map_err(|e| e.to_string())?;
    let violations = rows
        .iter()
        .filter(|r| {
            r.report
                .as_ref()
                .is_none_or(|rep| rep.larmor_time < rep.group_delay.abs())
        })
        .count();
    let point = OperatingPoint::new(692.0, 0.0, Polarization::P).map_err(|e| e.to_string())?;
    let rep = delay_report(&stack, &point).map_err(|e| e.to_string())?;
    let sc = rep.semiclassical_time.unwrap_or(f64::NAN);
    check(
        violations == 0 && sc > rep.larmor_time && sc > rep.group_delay.abs(),
        format!(
            "{violations} ordering violations; midgap: semiclassical {sc:.3} fs, Larmor {:.3} fs, group {:.3} fs",
            rep.larmor_time, rep.group_delay
        ),
    )
}

fn ensemble_reproducibility() -> Outcome {
    let stack = mirror();
    let point = OperatingPoint::new(702.0, 0.0, Polarization::P).map_err(|e| e.to_string())?;
    let run = |threads| -> Result<EnsembleResult, String> {
        with_threads(Some(threads), || {
            run_perturbation_ensemble(&stack, 0.02, 1000, &point, 2024)
        })
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())
    };
    let bits = |r: &EnsembleResult| -> Vec<u64> {
        r.samples
            .iter()
            .map(|s| s.relative_group_delay_fs.map_or(u64::MAX, f64::to_bits))
            .chain([
                r.summary.mean_deviation_fs.to_bits(),
                r.summary.std_deviation_fs.to_bits(),
            ])
            .collect()
    };
    let (a, b, c) = (run(1)?, run(4)?, run(4)?);
    let identical = bits(&a) == bits(&b) && bits(&b) == bits(&c);
    let std = a.summary.std_deviation_fs;
    check(
        identical && std > 0.0 && std < 1.0,
        format!(
            "bit-identical across 1/4 threads: {identical}; std {std:.4} fs, range [{:.3}, {:.3}] fs, {} excluded",
            a.summary.min_deviation_fs, a.summary.max_deviation_fs, a.summary.excluded
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("midgap transmission", midgap_transmission),
        ("stopband extent", stopband_extent),
        ("analytic midgap oracle", analytic_oracle),
        ("energy conservation", energy_conservation),
        ("superluminal sign and crossover", superluminal_crossover),
        ("HOM dip vs group delay", hom_consistency),
        ("derivative integrity", derivative_integrity),
        ("ordering of delay theories", theory_ordering),
        ("ensemble reproducibility", ensemble_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
