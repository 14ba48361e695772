//! Acceptance run: one PASS/FAIL line per criterion, tolerances as stated in
//! the project requirements. Exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};

use vapor_memory_lab::atomic::{b_field_from_precession, larmor_angular_frequency, VaporState};
use vapor_memory_lab::config::ExperimentConfig;
use vapor_memory_lab::constants::PhysicalConstants;
use vapor_memory_lab::eit::{
    calibrate_density_scale, calibrate_kappa, eit_window_fwhm, group_velocity_on_resonance, od_eit,
    transmission_spectrum, ControlDrive, DetuningGrid, DopplerKernel, DopplerModel, EitSettings, Medium,
    WaveguideSpec,
};
use vapor_memory_lab::estimation::{
    fit_lifetime, fit_spectrum, grid_search_oracle, lifetime_model, lifetime_parameters, FitProblem,
    LifetimeFitSettings, ModelId, ParameterSpec, SpectrumFitSettings, DEFAULT_ORACLE_BUDGET,
};
use vapor_memory_lab::rng;
use vapor_memory_lab::storage::{
    bandwidth_scan, multiplex_ensemble, MultiplexSetup, NoiseMode, PulseSequence, SlowLightContext,
    StorageDecayModel, StorageSetup, REFERENCE_EFFICIENCY,
};

const TEMPERATURE: f64 = 347.15;
const CALIBRATION_POWER: f64 = 40e-3;
const CALIBRATION_OMEGA0: f64 = 2.0 * PI * 232e6;

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Operating point: kappa from the 40 mW anchor, density scale for
/// OD_EIT = 1 at that drive.
struct OperatingPoint {
    wg: WaveguideSpec,
    medium: Medium,
    kappa: f64,
    eit: EitSettings,
}

fn operating_point() -> OperatingPoint {
    let wg = WaveguideSpec::default();
    let eit = EitSettings::default();
    let kappa = calibrate_kappa(CALIBRATION_POWER, CALIBRATION_OMEGA0).unwrap();
    let full = Medium::cesium(TEMPERATURE, 1.0).unwrap();
    let anchor = ControlDrive::from_rabi(CALIBRATION_OMEGA0).unwrap();
    let scale = calibrate_density_scale(1.0, &wg, &anchor, &full, &eit).unwrap();
    OperatingPoint {
        wg,
        medium: full.with_density_scale(scale).unwrap(),
        kappa,
        eit,
    }
}

fn od_eit_at(op: &OperatingPoint, drive: &ControlDrive, grid: &DetuningGrid) -> f64 {
    let on = transmission_spectrum(&op.wg, drive, &op.medium, grid, &op.eit).unwrap();
    let off = transmission_spectrum(&op.wg, &ControlDrive::from_rabi(0.0).unwrap(), &op.medium, grid, &op.eit).unwrap();
    od_eit(&on, &off).unwrap()
}

fn criterion_1() -> Outcome {
    let k = PhysicalConstants::default();
    let f = larmor_angular_frequency(127.49e-6, &k).unwrap() / (2.0 * PI);
    let b = b_field_from_precession(3.573e6, &k).unwrap();
    let df = (f - 3.573e6).abs() / 3.573e6;
    let db = (b - 127.49e-6).abs() / 127.49e-6;
    outcome(
        df <= 5e-4 && db <= 5e-4,
        format!("f(127.49 uT) = {:.5} MHz ({:.3}%), B(3.573 MHz) = {:.3} uT ({:.3}%)", f / 1e6, df * 100.0, b * 1e6, db * 100.0),
    )
}

fn lifetime_data(t_mem: f64, omega: f64, phi: f64, eta0: f64, seed: u64, label: &str) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = rng::stream(seed, label, 0);
    let t: Vec<f64> = (0..30).map(|i| 400e-9 * i as f64 / 29.0).collect();
    let truth: Vec<f64> = t.iter().map(|&x| lifetime_model(x, t_mem, omega, phi, eta0)).collect();
    let sigma: Vec<f64> = truth.iter().map(|v| (0.02 * v).max(1e-12)).collect();
    let y = truth
        .iter()
        .zip(&sigma)
        .map(|(v, s)| {
            let e: f64 = StandardNormal.sample(&mut r);
            v + s * e
        })
        .collect();
    (t, y, sigma)
}

fn criterion_2() -> Outcome {
    let omega = 2.0 * PI * 3.573e6;
    let eta0 = StorageDecayModel::default().eta0;
    let settings = LifetimeFitSettings::default();
    let mut good = 0;
    for seed in 0..100 {
        let (t, y, s) = lifetime_data(84e-9, omega, PI / 2.0, eta0, seed, "acceptance-lifetime");
        let Ok(fit) = fit_lifetime(&t, &y, &s, &settings) else { continue };
        let f = fit.estimates[1] / (2.0 * PI);
        if (fit.estimates[0] - 84e-9).abs() <= 3e-9 && (f - 3.573e6).abs() <= 0.02e6 {
            good += 1;
        }
    }
    outcome(good >= 95, format!("{good}/100 seeds within 3 ns and 0.02 MHz (need 95)"))
}

fn criterion_3() -> Outcome {
    let op = operating_point();
    let grid = DetuningGrid::centered(1.5e9, 600).unwrap();
    let od = od_eit_at(&op, &ControlDrive::from_rabi(CALIBRATION_OMEGA0).unwrap(), &grid);
    let drive = ControlDrive::from_power(10e-3, op.kappa).unwrap();
    let r = group_velocity_on_resonance(&op.wg, &drive, &op.medium, &op.eit, 14e-9).unwrap();
    let od_ok = (od - 1.0).abs() <= 0.1;
    let factor_ok = (100.0..=190.0).contains(&r.compression_factor);
    let length_ok = (r.compressed_length - 29e-3).abs() <= 0.3 * 29e-3;
    outcome(
        od_ok && factor_ok && length_ok,
        format!(
            "OD_EIT {od:.3} (1.0 +- 0.1), density scale {:.5}, compression at 10 mW {:.1} (need 100..190), 14 ns pulse -> {:.2} mm (need 29 mm +- 30%)",
            op.medium.vapor.density_scale,
            r.compression_factor,
            r.compressed_length * 1e3
        ),
    )
}

fn criterion_4() -> Outcome {
    let op = operating_point();
    let grid = DetuningGrid::centered(1.5e9, 600).unwrap();
    let drive = ControlDrive::from_rabi(CALIBRATION_OMEGA0).unwrap();
    let spec = transmission_spectrum(&op.wg, &drive, &op.medium, &grid, &op.eit).unwrap();
    match eit_window_fwhm(&spec) {
        Ok(w) => outcome(
            (w - 133e6).abs() <= 24e6,
            format!("transparency window FWHM {:.2} MHz (need 133 +- 24 MHz)", w / 1e6),
        ),
        Err(e) => outcome(false, format!("window width undetermined: {e}")),
    }
}

fn storage_run() -> (PulseSequence, vapor_memory_lab::storage::StorageRun) {
    let setup = ExperimentConfig::default().storage_setup();
    let run = setup.run(90e-9, 0).unwrap();
    (run.sequence, run)
}

fn criterion_5() -> Outcome {
    let (seq, run) = storage_run();
    let e = &run.efficiency;
    let t_ok = (e.t_storage_measured - 52.37e-9).abs() <= 0.5e-9;
    // "F close to 3.7": the value rounds to 3.7
    let f_ok = (e.fractional_delay - 3.7).abs() < 0.05;
    outcome(
        t_ok && f_ok && seq.signal_width == 14.1e-9,
        format!(
            "t_storage {:.3} ns (need 52.37 +- 0.5), F = {:.3} (need ~3.7)",
            e.t_storage_measured * 1e9,
            e.fractional_delay
        ),
    )
}

fn criterion_6() -> Outcome {
    let (_, run) = storage_run();
    let e = &run.efficiency;
    let meta = run.histogram.metadata.as_ref().unwrap();
    let programmed_ok = (meta.eta_programmed - REFERENCE_EFFICIENCY).abs() < 1e-9
        && meta.signal.mean_photons == 50.0
        && meta.detection.repetitions == 3000
        && meta.noise == NoiseMode::Poisson;
    let dev = (e.eta_int - REFERENCE_EFFICIENCY).abs();
    outcome(
        programmed_ok && dev <= 2.0 * e.eta_uncertainty,
        format!(
            "programmed {:.4}, extracted {:.5} +- {:.5} (deviation {:.2} SE, need <= 2)",
            meta.eta_programmed,
            e.eta_int,
            e.eta_uncertainty,
            dev / e.eta_uncertainty
        ),
    )
}

fn criterion_7() -> Outcome {
    let c = ExperimentConfig::default();
    let setup = MultiplexSetup {
        storage: c.storage_setup(),
        slow_light: SlowLightContext {
            waveguide: c.waveguide,
            medium: c.medium().unwrap(),
            drive: c.drive.at_power(c.drive.power).unwrap(),
            eit: c.eit,
        },
        set_times: c.sequence.set_times.values().unwrap(),
        fit: c.lifetime_fit,
        jitter: c.multiplex.jitter,
    };
    let jitter_ok = [setup.jitter.omega0, setup.jitter.attenuation, setup.jitter.coupling_efficiency]
        .iter()
        .all(|&j| j <= 0.005);
    let r = multiplex_ensemble(&setup, 2, c.seed).unwrap();
    outcome(
        jitter_ok && r.consistent,
        format!(
            "t_mem {:.2} ns vs {:.2} ns, |difference| {:.2} ns, combined uncertainty {:.2} ns",
            r.channels[0].t_mem * 1e9,
            r.channels[1].t_mem * 1e9,
            r.max_pairwise_difference * 1e9,
            r.combined_uncertainty * 1e9
        ),
    )
}

/// The optimizer must do at least as well as the best grid point; the only
/// slack allowed is floating-point noise in the loss.
fn slack(oracle_loss: f64) -> f64 {
    1e-9 * (1.0 + oracle_loss)
}

fn criterion_8() -> Outcome {
    let mut r = rng::stream(8, "acceptance-oracle", 0);
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rand::RngExt::random::<f64>(&mut r);

    let mut lifetime_pass = 0;
    let settings = LifetimeFitSettings::default();
    for i in 0..20 {
        let t_mem = uniform(50e-9, 150e-9);
        // at least a full precession period inside the 400 ns curve, or the
        // fit correctly refuses the problem as unidentifiable
        let omega = 2.0 * PI * uniform(2.5e6, 5e6);
        let phi = uniform(0.0, PI);
        let eta0 = uniform(0.1, 0.5);
        let (t, y, s) = lifetime_data(t_mem, omega, phi, eta0, i, "acceptance-oracle-lifetime");
        let Ok(fit) = fit_lifetime(&t, &y, &s, &settings) else { continue };
        let xs = t.clone();
        let problem = FitProblem::new(
            ModelId::Lifetime,
            lifetime_parameters(&t, [t_mem, omega, phi, eta0]),
            t.clone(),
            y,
            s,
            move |p| Ok(xs.iter().map(|&x| lifetime_model(x, p[0], p[1], p[2], p[3])).collect()),
        )
        .unwrap();
        let oracle = grid_search_oracle(&problem, &[40, 40, 24, 24], DEFAULT_ORACLE_BUDGET).unwrap();
        if fit.loss <= oracle.loss + slack(oracle.loss) {
            lifetime_pass += 1;
        }
    }

    let wg = WaveguideSpec::default();
    let template = Medium::cesium(TEMPERATURE, 1.0).unwrap();
    let grid = DetuningGrid::centered(600e6, 40).unwrap();
    let eit = EitSettings {
        z_order: 8,
        z_panels: 2,
        check_convergence: false,
        ..Default::default()
    };
    let mut spectrum_pass = 0;
    for i in 0..20 {
        let omega0 = 2.0 * PI * uniform(100e6, 300e6);
        let scale = uniform(0.1, 0.3);
        let medium = template.with_density_scale(scale).unwrap();
        let truth = transmission_spectrum(&wg, &ControlDrive::from_rabi(omega0).unwrap(), &medium, &grid, &eit)
            .unwrap()
            .transmission;
        let mut noise = rng::stream(i, "acceptance-oracle-spectrum", 0);
        let sigma: Vec<f64> = truth.iter().map(|t| 0.01 * t.max(1e-3)).collect();
        let y: Vec<f64> = truth
            .iter()
            .zip(&sigma)
            .map(|(t, s)| {
                let e: f64 = StandardNormal.sample(&mut noise);
                (t + s * e).max(0.0)
            })
            .collect();
        let settings = SpectrumFitSettings {
            eit,
            ..Default::default()
        };
        let Ok(fit) = fit_spectrum(&grid, &y, Some(&sigma), &wg, &template, &settings) else { continue };
        let (g, w, tm) = (grid.clone(), wg, template.clone());
        let problem = FitProblem::new(
            ModelId::Spectrum,
            vec![
                ParameterSpec::new("omega0", omega0, 0.5 * omega0, 1.5 * omega0),
                ParameterSpec::new("density_scale", scale, 0.5 * scale, (1.5 * scale).min(1.0)),
            ],
            grid.values().to_vec(),
            y,
            sigma,
            move |p| {
                let m = tm.with_density_scale(p[1])?;
                Ok(transmission_spectrum(&w, &ControlDrive::from_rabi(p[0])?, &m, &g, &eit)?.transmission)
            },
        )
        .unwrap();
        let oracle = grid_search_oracle(&problem, &[41, 41], DEFAULT_ORACLE_BUDGET).unwrap();
        if fit.loss <= oracle.loss + slack(oracle.loss) {
            spectrum_pass += 1;
        }
    }
    outcome(
        lifetime_pass == 20 && spectrum_pass == 20,
        format!("lifetime {lifetime_pass}/20, spectrum {spectrum_pass}/20 at or below the grid oracle"),
    )
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let op = operating_point();
    let k = PhysicalConstants::default();
    let grid = DetuningGrid::centered(1.5e9, 300).unwrap();

    // transmission range, quadrature doubling (the convergence check
    // recomputes on doubled panels at 1e-6)
    for p in [0.0, 2.5e-3, 10e-3, 40e-3] {
        let drive = ControlDrive::from_power(p, op.kappa).unwrap();
        match transmission_spectrum(&op.wg, &drive, &op.medium, &grid, &op.eit) {
            Ok(s) => {
                if !s.transmission.iter().all(|&t| (0.0..=1.0 + 1e-6).contains(&t)) {
                    failures.push(format!("transmission outside [0, 1+1e-6] at {p} W"));
                }
            }
            Err(e) => failures.push(format!("quadrature doubling at {p} W: {e}")),
        }
    }

    let kernel = DopplerKernel::new(&op.medium.vapor, &op.medium.system, &k);
    let norm: f64 = kernel.points().map(|(_, w)| w).sum();
    if (norm - 1.0).abs() > 1e-9 {
        failures.push(format!("Doppler kernel weight sum {norm}"));
    }

    for p in [1e-3, 10e-3, 40e-3] {
        let drive = ControlDrive::from_power(p, op.kappa).unwrap();
        let r = group_velocity_on_resonance(&op.wg, &drive, &op.medium, &op.eit, 14e-9).unwrap();
        if r.group_velocity.is_nan() || r.group_velocity > k.c0 {
            failures.push(format!("v_g {} > c0 at {p} W", r.group_velocity));
        }
    }

    let mut no_decoherence = op.medium.clone();
    no_decoherence.system.gamma_d = 0.0;
    let resp = no_decoherence.response();
    // FullShift moves the two-photon detuning of each velocity class, so
    // only the bare response and the co-propagating average stay dark
    let bare = resp.chi(0.0, 0.0, CALIBRATION_OMEGA0);
    let averaged = resp.doppler_averaged(0.0, CALIBRATION_OMEGA0, DopplerModel::CoPropagating);
    for (label, chi) in [("bare", bare), ("co-propagating average", averaged)] {
        if chi.norm() > 1e-12 * resp.prefactor / resp.gamma31 {
            failures.push(format!("chi(0) = {chi} at gamma_d = 0 ({label})"));
        }
    }

    let empty = Medium::new(
        k,
        Default::default(),
        VaporState::with_density(TEMPERATURE, 0.0, 1.0, &k).unwrap(),
    )
    .unwrap();
    let s = transmission_spectrum(
        &op.wg,
        &ControlDrive::from_rabi(CALIBRATION_OMEGA0).unwrap(),
        &empty,
        &grid,
        &op.eit,
    )
    .unwrap();
    if !s.transmission.iter().all(|&t| t == 1.0) {
        failures.push("empty cell does not transmit everything".into());
    }

    let setup = ExperimentConfig::default().storage_setup();
    let a = setup.run(120e-9, 77).unwrap();
    let b = setup.run(120e-9, 77).unwrap();
    let same_bits = a.histogram.counts.iter().zip(&b.histogram.counts).all(|(x, y)| x.to_bits() == y.to_bits());
    if !(same_bits && a.efficiency.eta_int.to_bits() == b.efficiency.eta_int.to_bits()) {
        failures.push("seeded runs differ".into());
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "range, kernel normalization, v_g <= c0, chi(0) = 0, empty cell, z doubling, RNG".into()
        } else {
            failures.join("; ")
        },
    )
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_10() -> Outcome {
    let op = operating_point();
    let grid = DetuningGrid::centered(1.5e9, 300).unwrap();
    let ladder = [2.5e-3, 5e-3, 10e-3, 20e-3, 40e-3];
    let drives: Vec<ControlDrive> = ladder.iter().map(|&p| ControlDrive::from_power(p, op.kappa).unwrap()).collect();
    let mut notes = Vec::new();

    let peaks: Vec<f64> = drives
        .iter()
        .map(|d| {
            transmission_spectrum(&op.wg, d, &op.medium, &grid, &op.eit)
                .unwrap()
                .on_resonance()
                .unwrap()
        })
        .collect();
    let peak_ok = strictly_increasing(&peaks);
    notes.push(format!("peak T {}", fmt_list(&peaks, 4)));

    // shoulder structure: loss-induced change off resonance dominates the
    // change on the peak, and vanishes without loss
    let strong = drives[drives.len() - 1];
    let lossless_wg = WaveguideSpec {
        attenuation_db_per_mm: 0.0,
        ..op.wg
    };
    let lossless = transmission_spectrum(&lossless_wg, &strong, &op.medium, &grid, &op.eit).unwrap();
    let ratio = |wg: &WaveguideSpec| {
        let s = transmission_spectrum(wg, &strong, &op.medium, &grid, &op.eit).unwrap();
        let peak = (s.on_resonance().unwrap() - lossless.on_resonance().unwrap()).abs();
        let most = s
            .transmission
            .iter()
            .zip(&lossless.transmission)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (most, peak)
    };
    let (lossy_most, lossy_peak) = ratio(&op.wg);
    let (flat_most, _) = ratio(&lossless_wg);
    let shoulder_ok = lossy_most > 10.0 * lossy_peak && flat_most == 0.0;
    notes.push(format!(
        "shoulder max|dT| {lossy_most:.4} vs on-peak {lossy_peak:.5} (lossy), {flat_most} (lossless)"
    ));

    let compression: Vec<f64> = drives
        .iter()
        .map(|d| {
            group_velocity_on_resonance(&op.wg, d, &op.medium, &op.eit, 14e-9)
                .unwrap()
                .compression_factor
        })
        .collect();
    let compression_ok = strictly_decreasing(&compression);
    notes.push(format!("compression {}", fmt_list(&compression, 1)));

    // bandwidth at the configured operating point
    let c = ExperimentConfig::default();
    let bw = &c.bandwidth;
    let widths = bw.widths().unwrap();
    let mut setup: StorageSetup = c.storage_setup();
    if !bw.precession {
        setup.model.omega = 0.0;
    }
    let medium = c.medium().unwrap();
    let mut bandwidths = Vec::new();
    let mut short_eta = Vec::new();
    for (i, &p) in bw.powers.iter().enumerate() {
        let ctx = SlowLightContext {
            waveguide: c.waveguide,
            medium: medium.clone(),
            drive: c.drive.at_power(p).unwrap(),
            eit: c.eit,
        };
        let capture = ctx.capture().unwrap();
        match bandwidth_scan(&setup, &capture, &widths, bw.set_storage, rng::derive_seed(c.seed, "bandwidth-power", i as u64)) {
            Ok(s) => bandwidths.push(s.bandwidth_hz),
            Err(e) => {
                notes.push(format!("bandwidth at {p} W: {e}"));
                bandwidths.push(f64::NAN);
            }
        }
        let short = StorageSetup {
            captured_fraction: capture.captured_fraction(c.sequence.signal_width),
            noise: NoiseMode::Expectation,
            ..c.storage_setup()
        };
        short_eta.push(short.run(c.sequence.set_times.start, 0).unwrap().efficiency.eta_int);
    }
    let bandwidth_ok = strictly_increasing(&bandwidths) && strictly_decreasing(&short_eta);
    notes.push(format!(
        "bandwidth {} MHz at {} mW, short-storage eta {}",
        fmt_list(&bandwidths.iter().map(|b| b / 1e6).collect::<Vec<_>>(), 1),
        fmt_list(&bw.powers.iter().map(|p| p * 1e3).collect::<Vec<_>>(), 1),
        fmt_list(&short_eta, 4)
    ));

    outcome(peak_ok && shoulder_ok && compression_ok && bandwidth_ok, notes.join("; "))
}

fn fmt_list(v: &[f64], digits: usize) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", items.join(", "))
}

fn criterion_11() -> Outcome {
    let wg = WaveguideSpec {
        attenuation_db_per_mm: 0.0,
        ..WaveguideSpec::default()
    };
    let medium = Medium::cesium(TEMPERATURE, 1.0).unwrap();
    let grid = DetuningGrid::centered(1.5e9, 300).unwrap();
    let s = transmission_spectrum(&wg, &ControlDrive::from_rabi(0.0).unwrap(), &medium, &grid, &EitSettings::default())
        .unwrap();
    let od = -s.on_resonance().unwrap().ln();
    outcome(
        (3.5 / 3.0..=3.5 * 3.0).contains(&od),
        format!("free-space 5 mm OD {od:.3} (need {:.2}..{:.1})", 3.5 / 3.0, 3.5 * 3.0),
    )
}

/// Informational only: the bandwidth ordering with spin precession left on.
fn precession_note() -> String {
    let c = ExperimentConfig::default();
    let widths = c.bandwidth.widths().unwrap();
    let medium = c.medium().unwrap();
    let mut out = Vec::new();
    for (i, &p) in c.bandwidth.powers.iter().enumerate() {
        let ctx = SlowLightContext {
            waveguide: c.waveguide,
            medium: medium.clone(),
            drive: c.drive.at_power(p).unwrap(),
            eit: c.eit,
        };
        let capture = ctx.capture().unwrap();
        let s = bandwidth_scan(&c.storage_setup(), &capture, &widths, c.bandwidth.set_storage, rng::derive_seed(c.seed, "bandwidth-power", i as u64));
        out.push(match s {
            Ok(s) => format!("{:.1}", s.bandwidth_hz / 1e6),
            Err(_) => "undetermined".into(),
        });
    }
    format!("[{}] MHz", out.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "Larmor mapping", Duration::from_secs(1), criterion_1),
        (2, "lifetime-fit recovery", Duration::from_secs(30), criterion_2),
        (3, "pulse compression", Duration::from_secs(10), criterion_3),
        (4, "transparency-window width", Duration::from_secs(10), criterion_4),
        (5, "timing chain", Duration::from_secs(10), criterion_5),
        (6, "efficiency extraction", Duration::from_secs(10), criterion_6),
        (7, "multiplex reproducibility", Duration::from_secs(60), criterion_7),
        (8, "oracle equivalence", Duration::from_secs(300), criterion_8),
        (9, "property suite", Duration::from_secs(120), criterion_9),
        (10, "qualitative orderings", Duration::from_secs(120), criterion_10),
        (11, "free-space optical depth", Duration::from_secs(10), criterion_11),
    ];
    let mut failed = Vec::new();
    for (n, name, limit, run) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = o.passed && in_time;
        println!(
            "acceptance {n:>2} {} {name}: {} [{:.2} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
        if !pass {
            failed.push(n);
        }
    }
    println!("info: bandwidth with spin precession on: {}", precession_note());
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
