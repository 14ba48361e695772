//! Command implementations behind the CLI. Each run writes into
//! `<out>/<first 12 hex digits of the config hash>/`: the resolved
//! `config.toml`, the command's CSV/JSON outputs and `<command>_manifest.json`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::eit::{
    eit_window_fwhm, group_velocity_on_resonance, od_eit, transmission_spectrum, ControlDrive, DetuningGrid,
    EitSettings, Medium, SlowLightResult, WaveguideSpec,
};
use crate::estimation::{confidence_band, fit_lifetime, fit_spectrum, lifetime_model, lifetime_parameters, FitResult};
use crate::io::{csv_bytes, histogram_csv, read_spectrum_csv, to_json_bytes, write_atomic, FileRecord, RunManifest, RunStatus};
use crate::storage::{
    bandwidth_crossing, bandwidth_curve, extract_efficiency, lifetime_scan, multiplex_ensemble, storage_efficiency,
    synthesize_histogram, BandwidthPoint, CurvePoint, EfficiencyResult, HistogramMetadata, MultiplexSetup, NoiseMode,
    PulseSchedule, PulseSequence, SlowLightContext, StorageDecayModel, REFERENCE_EFFICIENCY, REFERENCE_STORAGE_TIME,
};
use crate::{rng, Error, Result};

/// Which drive a spectrum or slow-light command uses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DriveChoice {
    /// The configured power ladder.
    #[default]
    Ladder,
    /// One control power (W).
    Power(f64),
    /// One peak Rabi frequency (rad/s).
    Omega0(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Spectrum(DriveChoice),
    FitSpectrum { data: PathBuf },
    Slowlight(DriveChoice),
    Storage { set_storage: Option<f64> },
    Lifetime,
    Bandwidth,
    Multiplex { channels: Option<usize> },
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::FitSpectrum { .. } => "fit-spectrum",
            Command::Slowlight(_) => "slowlight",
            Command::Storage { .. } => "storage",
            Command::Lifetime => "lifetime",
            Command::Bandwidth => "bandwidth",
            Command::Multiplex { .. } => "multiplex",
            Command::Selftest => "selftest",
        }
    }
}

/// Where a finished run put its files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

/// Failure after the run directory was created; the manifest records it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub report: Option<Box<RunReport>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, report: None }
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
    inputs: Vec<FileRecord>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(FileRecord::of(&path)?);
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json_bytes(value)?)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.write(name, &csv_bytes(header, rows)?)
    }
}

/// Run directory of `config`.
pub fn run_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    Ok(config.out.join(&config.hash()?[..12]))
}

/// Validate `config`, run `cmd` and write the manifest last.
pub fn execute(cmd: &Command, config: &ExperimentConfig) -> std::result::Result<RunReport, RunFailure> {
    let started = Instant::now();
    config.validate()?;
    let toml = config.to_toml()?;
    let hash = config.hash()?;
    let dir = run_dir(config)?;
    let config_path = dir.join("config.toml");
    write_atomic(&config_path, toml.as_bytes())?;
    let config_record = FileRecord::of(&config_path)?;

    let mut out = Outputs {
        dir: dir.clone(),
        files: Vec::new(),
        inputs: Vec::new(),
    };
    let result = dispatch(cmd, config, &mut out);
    let status = match (&result, out.files.is_empty()) {
        (Ok(()), _) => RunStatus::Ok,
        (Err(_), true) => RunStatus::Failed,
        (Err(_), false) => RunStatus::Partial,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        seed: config.seed,
        config_hash: hash,
        config: config_record,
        inputs: out.inputs,
        outputs: out.files,
        wall_clock_s: started.elapsed().as_secs_f64(),
        status,
        error: result.as_ref().err().map(Into::into),
    };
    let manifest_path = dir.join(format!("{}_manifest.json", cmd.name()));
    let written = to_json_bytes(&manifest).and_then(|b| write_atomic(&manifest_path, &b));
    let report = RunReport {
        dir,
        manifest_path,
        manifest,
    };
    match (result, written) {
        (Ok(()), Ok(())) => Ok(report),
        (Err(error), _) => Err(RunFailure {
            error,
            report: Some(Box::new(report)),
        }),
        (Ok(()), Err(error)) => Err(RunFailure { error, report: None }),
    }
}

fn dispatch(cmd: &Command, config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    match cmd {
        Command::Spectrum(choice) => spectrum(config, *choice, out),
        Command::FitSpectrum { data } => fit_spectrum_cmd(config, data, out),
        Command::Slowlight(choice) => slowlight(config, *choice, out),
        Command::Storage { set_storage } => storage(config, set_storage.unwrap_or(config.sequence.set_storage), out),
        Command::Lifetime => lifetime(config, out),
        Command::Bandwidth => bandwidth(config, out),
        Command::Multiplex { channels } => multiplex(config, channels.unwrap_or(config.multiplex.channels), out),
        Command::Selftest => selftest(out),
    }
}

/// `10mW`, `2.5mW`: power label for file names.
fn power_label(power: f64) -> String {
    format!("{}mW", (power * 1e6).round() / 1e3)
}

fn drives(config: &ExperimentConfig, choice: DriveChoice) -> Result<Vec<(String, ControlDrive)>> {
    match choice {
        DriveChoice::Ladder if config.drive.omega0.is_some() => {
            Ok(vec![("omega0".into(), config.drive.at_power(config.drive.power)?)])
        }
        DriveChoice::Ladder => config
            .drive
            .ladder()
            .into_iter()
            .map(|p| Ok((power_label(p), config.drive.at_power(p)?)))
            .collect(),
        DriveChoice::Power(p) => Ok(vec![(
            power_label(p),
            ControlDrive::from_power(p, config.drive.kappa()?)?,
        )]),
        DriveChoice::Omega0(w) => Ok(vec![("omega0".into(), ControlDrive::from_rabi(w)?)]),
    }
}

#[derive(Serialize)]
struct SpectrumSidecar<'a> {
    drive: ControlDrive,
    waveguide: &'a WaveguideSpec,
    medium: &'a Medium,
    eit: &'a EitSettings,
    on_resonance_transmission: f64,
    od_eit: f64,
    /// `None` when the window has no resolvable half maximum.
    eit_fwhm_hz: Option<f64>,
    grid_points: usize,
    grid_spacing_hz: f64,
    warnings: Vec<String>,
}

fn spectrum(config: &ExperimentConfig, choice: DriveChoice, out: &mut Outputs) -> Result<()> {
    let medium = config.medium()?;
    let grid = config.grid.grid()?;
    let wg = &config.waveguide;
    let off = transmission_spectrum(wg, &ControlDrive::from_rabi(0.0)?, &medium, &grid, &config.eit)?;
    for (label, drive) in drives(config, choice)? {
        let spec = transmission_spectrum(wg, &drive, &medium, &grid, &config.eit)?;
        let rows: Vec<Vec<f64>> = grid
            .values()
            .iter()
            .zip(&spec.transmission)
            .map(|(nu, t)| vec![*nu, *t])
            .collect();
        out.csv(&format!("spectrum_{label}.csv"), &["detuning_hz", "transmission"], &rows)?;
        let mut warnings = spec.warnings.clone();
        let eit_fwhm_hz = match eit_window_fwhm(&spec) {
            Ok(w) => Some(w),
            Err(e) => {
                warnings.push(format!("EIT window width: {e}"));
                None
            }
        };
        let sidecar = SpectrumSidecar {
            drive,
            waveguide: wg,
            medium: &medium,
            eit: &config.eit,
            on_resonance_transmission: spec.on_resonance()?,
            od_eit: od_eit(&spec, &off)?,
            eit_fwhm_hz,
            grid_points: grid.len(),
            grid_spacing_hz: grid.spacing(),
            warnings,
        };
        out.json(&format!("spectrum_{label}.json"), &sidecar)?;
    }
    Ok(())
}

fn fit_spectrum_cmd(config: &ExperimentConfig, data: &Path, out: &mut Outputs) -> Result<()> {
    out.inputs.push(FileRecord::of(data)?);
    let d = read_spectrum_csv(data)?;
    let fit = fit_spectrum(
        &d.grid,
        &d.transmission,
        d.sigma.as_deref(),
        &config.waveguide,
        &config.medium()?,
        &config.spectrum_fit,
    )?;
    out.json("fit_spectrum.json", &fit)?;
    fit.require_converged().map(|_| ())
}

#[derive(Serialize)]
struct SlowLightRow {
    label: String,
    drive: ControlDrive,
    result: SlowLightResult,
}

fn slowlight(config: &ExperimentConfig, choice: DriveChoice, out: &mut Outputs) -> Result<()> {
    let medium = config.medium()?;
    let width = config.sequence.signal_width;
    let mut rows = Vec::new();
    for (label, drive) in drives(config, choice)? {
        let result = group_velocity_on_resonance(&config.waveguide, &drive, &medium, &config.eit, width)?;
        rows.push(SlowLightRow { label, drive, result });
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.drive.power.unwrap_or(f64::NAN),
                r.drive.omega0,
                r.result.group_velocity,
                r.result.compression_factor,
                r.result.compressed_length,
                r.result.captured_fraction,
            ]
        })
        .collect();
    out.csv(
        "slowlight.csv",
        &[
            "power_w",
            "omega0_rad_s",
            "group_velocity_m_s",
            "compression_factor",
            "compressed_length_m",
            "captured_fraction",
        ],
        &table,
    )?;
    out.json("slowlight.json", &rows)
}

#[derive(Serialize)]
struct StorageSummary<'a> {
    sequence: &'a PulseSequence,
    schedule: PulseSchedule,
    metadata: Option<&'a HistogramMetadata>,
    efficiency: &'a EfficiencyResult,
}

fn storage(config: &ExperimentConfig, set_storage: f64, out: &mut Outputs) -> Result<()> {
    let seed = rng::derive_seed(config.seed, "storage", 0);
    let run = config.storage_setup().run(set_storage, seed)?;
    out.write("storage_histogram.csv", &histogram_csv(&run.histogram)?)?;
    out.json(
        "storage.json",
        &StorageSummary {
            sequence: &run.sequence,
            schedule: run.sequence.schedule(),
            metadata: run.histogram.metadata.as_ref(),
            efficiency: &run.efficiency,
        },
    )
}

const CURVE_HEADER: [&str; 7] = [
    "set_storage_s",
    "storage_time_s",
    "efficiency",
    "efficiency_uncertainty",
    "efficiency_programmed",
    "captured_fraction",
    "low_confidence",
];

fn curve_row(p: &CurvePoint) -> Vec<f64> {
    vec![
        p.set_storage,
        p.t_storage,
        p.eta,
        p.eta_uncertainty,
        p.eta_programmed,
        p.captured_fraction,
        if p.low_confidence { 1.0 } else { 0.0 },
    ]
}

/// Two-sided 95% normal quantile used for the lifetime band.
const BAND_Z: f64 = 1.96;
const BAND_POINTS: usize = 401;

#[derive(Serialize)]
struct LifetimeSummary<'a> {
    t_mem_s: f64,
    t_mem_uncertainty_s: f64,
    frequency_hz: f64,
    fit: &'a FitResult,
}

fn lifetime(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let set_times = config.sequence.set_times.values()?;
    let curve = lifetime_scan(&config.storage_setup(), &set_times, config.seed)?;
    let rows: Vec<Vec<f64>> = curve.points.iter().map(curve_row).collect();
    out.csv("lifetime_curve.csv", &CURVE_HEADER, &rows)?;

    let t = curve.times();
    let fit = fit_lifetime(&t, &curve.etas(), &curve.uncertainties(), &config.lifetime_fit)?;
    out.json(
        "lifetime_fit.json",
        &LifetimeSummary {
            t_mem_s: fit.estimates[0],
            t_mem_uncertainty_s: fit.uncertainties[0],
            frequency_hz: fit.estimates[1] / (2.0 * PI),
            fit: &fit,
        },
    )?;

    let t_max = t[t.len() - 1];
    let dense: Vec<f64> = (0..BAND_POINTS)
        .map(|i| t_max * i as f64 / (BAND_POINTS - 1) as f64)
        .collect();
    let start = [fit.estimates[0], fit.estimates[1], fit.estimates[2], fit.estimates[3]];
    let params = lifetime_parameters(&t, start);
    let band = confidence_band(
        &fit,
        &params,
        |p| Ok(dense.iter().map(|&x| lifetime_model(x, p[0], p[1], p[2], p[3])).collect()),
        BAND_Z,
        config.lifetime_fit.lm.fd_relative_step,
    )?;
    let rows: Vec<Vec<f64>> = (0..BAND_POINTS)
        .map(|i| vec![dense[i], band.center[i], band.lower[i], band.upper[i]])
        .collect();
    out.csv(
        "lifetime_band.csv",
        &["storage_time_s", "efficiency_fit", "efficiency_lower", "efficiency_upper"],
        &rows,
    )?;
    fit.require_converged().map(|_| ())
}

#[derive(Serialize)]
struct BandwidthEntry {
    power_w: f64,
    group_velocity: f64,
    crossing_width_s: Option<f64>,
    bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    points: Vec<BandwidthPoint>,
}

#[derive(Serialize)]
struct BandwidthSummary {
    set_storage_s: f64,
    precession: bool,
    powers: Vec<BandwidthEntry>,
}

fn bandwidth(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let bw = &config.bandwidth;
    let widths = bw.widths()?;
    let mut setup = config.storage_setup();
    if !bw.precession {
        setup.model.omega = 0.0;
    }
    let medium = config.medium()?;
    let mut entries = Vec::new();
    let mut first_error = None;
    for (k, &power) in bw.powers.iter().enumerate() {
        let ctx = SlowLightContext {
            waveguide: config.waveguide,
            medium: medium.clone(),
            drive: config.drive.at_power(power)?,
            eit: config.eit,
        };
        let capture = ctx.capture()?;
        let seed = rng::derive_seed(config.seed, "bandwidth-power", k as u64);
        let points = bandwidth_curve(&setup, &capture, &widths, bw.set_storage, seed)?;
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                let mut r = vec![p.signal_width, p.control_width];
                r.extend(curve_row(&p.point));
                r
            })
            .collect();
        let mut header = vec!["signal_width_s", "control_width_s"];
        header.extend(CURVE_HEADER);
        out.csv(&format!("bandwidth_{}.csv", power_label(power)), &header, &rows)?;
        let eta: Vec<f64> = points.iter().map(|p| p.point.eta).collect();
        let crossing = bandwidth_crossing(&widths, &eta);
        let entry = BandwidthEntry {
            power_w: power,
            group_velocity: capture.group_velocity,
            crossing_width_s: crossing.as_ref().ok().copied(),
            bandwidth_hz: crossing.as_ref().ok().map(|w| 1.0 / w),
            error: crossing.as_ref().err().map(ToString::to_string),
            points,
        };
        if let Err(e) = crossing {
            first_error.get_or_insert(e);
        }
        entries.push(entry);
    }
    out.json(
        "bandwidth.json",
        &BandwidthSummary {
            set_storage_s: bw.set_storage,
            precession: bw.precession,
            powers: entries,
        },
    )?;
    first_error.map_or(Ok(()), Err)
}

fn multiplex(config: &ExperimentConfig, channels: usize, out: &mut Outputs) -> Result<()> {
    let setup = MultiplexSetup {
        storage: config.storage_setup(),
        slow_light: SlowLightContext {
            waveguide: config.waveguide,
            medium: config.medium()?,
            drive: config.drive.at_power(config.drive.power)?,
            eit: config.eit,
        },
        set_times: config.sequence.set_times.values()?,
        fit: config.lifetime_fit,
        jitter: config.multiplex.jitter,
    };
    let result = multiplex_ensemble(&setup, channels, config.seed)?;
    for ch in &result.channels {
        let rows: Vec<Vec<f64>> = ch.curve.points.iter().map(curve_row).collect();
        out.csv(&format!("multiplex_channel_{}.csv", ch.index), &CURVE_HEADER, &rows)?;
    }
    out.json("multiplex.json", &result)?;
    match result.channels.iter().find(|c| !c.fit_converged) {
        Some(c) => Err(Error::NonConvergence(format!("lifetime fit of channel {}", c.index))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Fast internal consistency checks on built-in defaults.
pub fn selftest_checks() -> Result<Vec<(String, bool, String)>> {
    Ok(run_checks()?
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect())
}

fn run_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let config = ExperimentConfig::default();

    let mut vacuum = config.clone();
    vacuum.vapor.density = Some(0.0);
    let grid = DetuningGrid::centered(1e9, 20)?;
    let spec = transmission_spectrum(
        &vacuum.waveguide,
        &ControlDrive::from_rabi(0.0)?,
        &vacuum.medium()?,
        &grid,
        &vacuum.eit,
    )?;
    let worst = spec.transmission.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
    checks.push(check("vacuum_is_transparent", worst == 0.0, format!("max |T - 1| = {worst:e}")));

    let model = StorageDecayModel::default();
    let eta = storage_efficiency(REFERENCE_STORAGE_TIME, &model, 1.0);
    checks.push(check(
        "reference_efficiency",
        (eta - REFERENCE_EFFICIENCY).abs() < 1e-9,
        format!("eta = {eta}"),
    ));

    let a = rng::derive_seed(7, "selftest", 3);
    checks.push(check(
        "seed_derivation_stable",
        a == rng::derive_seed(7, "selftest", 3) && a != rng::derive_seed(7, "selftest", 4),
        format!("{a:016x}"),
    ));

    let setup = config.storage_setup();
    let seq = PulseSequence::for_signal_width(setup.signal.width, 200e-9, setup.retrieval_lead)?;
    let hist = synthesize_histogram(
        &seq,
        &setup.signal,
        &model,
        1.0,
        &setup.detection,
        NoiseMode::Expectation,
        0,
    )?;
    let e = extract_efficiency(&hist, &seq, &setup.extraction)?;
    let want = hist.metadata.as_ref().map_or(f64::NAN, |m| m.eta_programmed);
    checks.push(check(
        "noiseless_extraction_round_trip",
        (e.eta_int - want).abs() < 1e-6,
        format!("extracted {} vs programmed {want}", e.eta_int),
    ));

    let toml = config.to_toml()?;
    let back = ExperimentConfig::from_toml(&toml)?;
    checks.push(check(
        "config_round_trip",
        back == config && back.hash()? == config.hash()?,
        config.hash()?[..12].to_string(),
    ));
    Ok(checks)
}

fn selftest(out: &mut Outputs) -> Result<()> {
    let checks = run_checks()?;
    out.json("selftest.json", &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::ModelValidity(format!("self-test failed: {}", failed.join(", "))))
    }
}
