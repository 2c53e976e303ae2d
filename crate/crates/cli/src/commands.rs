use std::fs;
use std::path::{Path, PathBuf};

use hhl_core::hhl::{
    final_density, run_hhl, run_hhl_noisy, sweep_r, sweep_t0, theoretical_final_state,
    LinearSystem, SolveReport,
};
use hhl_core::nmr::{
    pps_state, samples_to_csv, synthesize_spectrum, MoleculeParams, Nucleus, Spectrum,
};
use hhl_core::qcore::{fidelity, DensityMatrix};
use hhl_core::tomography::{
    extract_solution_partial, fit_records, pulse_catalog, reconstruct_density, simulate_readout,
    CatalogKind, ReadoutNoise, ReadoutPulse,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Config, Decimal};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StateChoice {
    /// Final state of the configured run.
    Final,
    /// Pseudo-pure state.
    Pps,
}

/// What a manifest re-runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Solve {
        spectrum: bool,
    },
    Sweep {
        r: Option<Vec<u32>>,
        t0: Option<Vec<Decimal>>,
    },
    Tomography {
        catalog: CatalogKind,
        fit: bool,
    },
    Spectrum {
        state: StateChoice,
        pulse: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub version: String,
    pub invocation: Invocation,
    /// Resolved configuration, flags applied.
    pub config: Config,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(name, &text)
    }
}

pub fn run(invocation: &Invocation, config: &Config, out: &Path) -> Result<RunManifest, CliError> {
    let mut output = Output::new(out)?;
    match invocation {
        Invocation::Solve { spectrum } => solve(config, *spectrum, &mut output)?,
        Invocation::Sweep { r, t0 } => sweep(config, r.as_deref(), t0.as_deref(), &mut output)?,
        Invocation::Tomography { catalog, fit } => tomography(config, *catalog, *fit, &mut output)?,
        Invocation::Spectrum { state, pulse } => {
            spectrum(config, *state, pulse.as_deref(), &mut output)?
        }
    }
    let manifest = RunManifest {
        format: MANIFEST_FORMAT,
        version: env!("CARGO_PKG_VERSION").to_string(),
        invocation: invocation.clone(),
        config: config.clone(),
        outputs: output.files.clone(),
    };
    output.write_json(MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}

fn solve_report(config: &Config, sys: &LinearSystem) -> Result<SolveReport, CliError> {
    let cfg = config.solver();
    Ok(match config.noise_model()? {
        Some(noise) => run_hhl_noisy(sys, &cfg, &noise)?,
        None => run_hhl(sys, &cfg)?,
    })
}

fn band(config: &Config) -> [f64; 2] {
    config.noise.fidelity_band.map(|d| d.0)
}

fn in_band(config: &Config, f: f64) -> bool {
    let [lo, hi] = band(config);
    lo <= f && f < hi
}

fn solve(config: &Config, with_spectrum: bool, output: &mut Output) -> Result<(), CliError> {
    let sys = config.system()?;
    let report = solve_report(config, &sys)?;
    let noisy = config.noise.enabled;
    let mut doc = json!({
        "ratio": report.ratio(),
        "noise": noisy,
        "condition_number": sys.condition_number(),
        "report": report,
    });
    if noisy {
        doc["fidelity_band"] = json!(band(config));
        doc["fidelity_in_band"] = json!(in_band(config, report.fidelity_4q));
    }
    output.write_json("report.json", &doc)?;
    if with_spectrum {
        let rho = final_density(&sys, &config.solver(), config.noise_model()?.as_ref())?;
        write_spectrum(config, &rho, output)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CsvSweepRow {
    r: u32,
    t0: f64,
    max_rel_error: Option<f64>,
    success_probability: f64,
    fidelity_4q: f64,
    clock_residual: f64,
}

fn sweep(
    config: &Config,
    r: Option<&[u32]>,
    t0: Option<&[Decimal]>,
    output: &mut Output,
) -> Result<(), CliError> {
    if config.noise.enabled {
        return Err(CliError::Config(
            "sweeps run noiseless; use --noise off".into(),
        ));
    }
    let sys = config.system()?;
    let base = config.solver();
    let r = r.map(<[u32]>::to_vec).or_else(|| config.sweep.r.clone());
    let t0 = t0
        .map(<[Decimal]>::to_vec)
        .or_else(|| config.sweep.t0.clone());
    let rows = match (r, t0) {
        (Some(_), Some(_)) => return Err(CliError::Usage("sweep either r or t0, not both".into())),
        (None, Some(t0)) => sweep_t0(&sys, &base, &t0.iter().map(|d| d.0).collect::<Vec<_>>())?,
        (r, None) => sweep_r(&sys, &base, &r.unwrap_or_else(|| (1..=8).collect()))?,
    };
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(CsvSweepRow {
                r: row.r,
                t0: row.t0,
                max_rel_error: row.max_rel_error,
                success_probability: row.success_probability,
                fidelity_4q: row.fidelity_4q,
                clock_residual: row.clock_residual,
            })
            .expect("in-memory CSV");
    }
    let bytes = writer.into_inner().expect("in-memory CSV");
    output.write(
        "sweep.csv",
        &String::from_utf8(bytes).expect("CSV is UTF-8"),
    )
}

fn tomography(
    config: &Config,
    catalog: CatalogKind,
    fit: bool,
    output: &mut Output,
) -> Result<(), CliError> {
    let sys = config.system()?;
    let cfg = config.solver();
    let noise = config.noise_model()?;
    let readout = config.readout_seed()?.map(|seed| ReadoutNoise {
        sigma: config.noise.readout_sigma.0,
        seed,
    });

    let rho = final_density(&sys, &cfg, noise.as_ref())?;
    let target = theoretical_final_state(&sys, &cfg)?.to_density();
    let mut records = simulate_readout(&rho, &pulse_catalog(catalog), readout)?;
    if fit {
        records = fit_records(
            &records,
            &config.molecule()?,
            config.tomography.points_per_hz.0,
        )?;
    }

    let state_fidelity = fidelity(&target, &rho)?;
    let mut doc = json!({
        "catalog": catalog,
        "fit": fit,
        "noise": noise.is_some(),
        "readout_sigma": config.noise.readout_sigma.0,
        "state_fidelity": state_fidelity,
    });
    match catalog {
        CatalogKind::Full => {
            let rec = reconstruct_density(&records)?;
            let fid = fidelity(&target, &rec)?;
            doc["reconstruction_fidelity"] = json!(fid);
            doc["round_trip_fidelity"] = json!(fidelity(&rho, &rec)?);
            if noise.is_some() {
                doc["fidelity_band"] = json!(band(config));
                doc["fidelity_in_band"] = json!(in_band(config, fid));
            }
        }
        CatalogKind::Partial => {
            let partial = extract_solution_partial(&records)?;
            let solve = solve_report(config, &sys)?;
            let ratio = partial.ratio()?;
            doc["partial"] = json!(partial);
            doc["ratio"] = json!(ratio);
            doc["solve_ratio"] = json!(solve.ratio());
            doc["ratio_abs_diff"] = json!((ratio - solve.ratio()).abs());
            doc["solution"] = json!(partial.solution());
        }
    }
    doc["records"] = serde_json::to_value(&records).expect("records serialize");
    output.write_json("tomography.json", &doc)
}

fn apply_pulse(rho: &DensityMatrix, name: &str) -> Result<DensityMatrix, CliError> {
    let pulse = ReadoutPulse::parse(name)?;
    let u = pulse.operator();
    let m = u * rho.matrix() * u.adjoint();
    Ok(DensityMatrix::project(&m)?)
}

fn write_spectrum(
    config: &Config,
    rho: &DensityMatrix,
    output: &mut Output,
) -> Result<Spectrum, CliError> {
    let params = config.molecule()?;
    let spectrum = synthesize_spectrum(rho, &params)?;
    let (lo, hi) = spectrum.window(config.spectrum.margin.0);
    let points = config.spectrum.points.max(2);
    output.write(
        "spectrum.csv",
        &samples_to_csv(&spectrum.sample(lo, hi, points)),
    )?;
    Ok(spectrum)
}

fn shifts(params: &MoleculeParams, temperature: f64) -> Result<Value, CliError> {
    let mut map = serde_json::Map::new();
    for nucleus in Nucleus::ALL {
        map.insert(
            format!("{nucleus:?}"),
            json!(params.chemical_shift(nucleus, temperature)?),
        );
    }
    Ok(Value::Object(map))
}

fn spectrum(
    config: &Config,
    state: StateChoice,
    pulse: Option<&str>,
    output: &mut Output,
) -> Result<(), CliError> {
    let mut rho = match state {
        StateChoice::Final => final_density(
            &config.system()?,
            &config.solver(),
            config.noise_model()?.as_ref(),
        )?,
        StateChoice::Pps => pps_state(config.spectrum.pps_epsilon.0)?,
    };
    if let Some(name) = pulse {
        rho = apply_pulse(&rho, name)?;
    }
    let spectrum = write_spectrum(config, &rho, output)?;
    let params = config.molecule()?;
    let t = config.molecule.temperature.0;
    let doc = json!({
        "state": state,
        "pulse": pulse,
        "temperature": t,
        "chemical_shifts_hz": shifts(&params, t)?,
        "peaks": spectrum.peaks.iter().map(|p| json!({
            "label": p.label,
            "center_hz": p.center,
            "intensity": p.intensity,
            "linewidth_hz": p.linewidth,
            "populations": [p.populations.0, p.populations.1],
        })).collect::<Vec<_>>(),
    });
    output.write_json("peaks.json", &doc)
}
