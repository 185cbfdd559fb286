//! Command-line front end: `ep-berry <command> --config <path> [options]`.
//!
//! Results are printed (or written to `--out`) as JSON with every float in
//! 17 significant digits; CSV plot data goes to the optional `--csv`,
//! `--track-csv` and `--versal-csv` paths. Exit codes: 0 success, 1 usage or
//! configuration error, 2 numerical failure.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Map, Number, Value};

use crate::asymptotics::{correction_direct, correction_spectral, divergence_scan, epsilon_sweep, spectators};
use crate::eppoint::{ep_tangent, jordan_chains, locate_ep, JordanData};
use crate::error::{EpError, Result};
use crate::hamiltonians::HamiltonianFamily;
use crate::numerics::{eig_general, ComplexVector};
use crate::phase::{
    dynamical_phase, phase_double_cycle_track, phase_versal_frames, phase_winding_symmetric, PhaseResult,
};
use crate::spectral::track_pair;
use crate::versal::versal_along_loop;

pub use config::{MethodChoice, Overrides, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const THREADS_ENV: &str = "EP_BERRY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ep-berry", version, about = "Exceptional points and geometric phases of non-Hermitian Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed of built-in families.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the loop size.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Overrides the samples per cycle.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Newton search for an EP from the configured guess.
    LocateEp {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Jordan chains, mu gradient and EP tangent at the located EP.
    Chains {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Geometric phase of the selected pair around the loop.
    Phase {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        method: Option<MethodChoice>,
        /// CSV of the tracked eigenvalues over two cycles.
        #[arg(long)]
        track_csv: Option<PathBuf>,
        /// CSV of s, p and sqrt(p) over one cycle.
        #[arg(long)]
        versal_csv: Option<PathBuf>,
    },
    /// Correction constant and loop-size sweep of the phase.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Loop sizes, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps: Option<Vec<f64>>,
        /// CSV of the sweep.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Spectrum at the EP and per-level contributions to the correction.
    Levels {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Permutation of the pair after one and two cycles.
    Monodromy {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        track_csv: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::LocateEp { common }
            | Command::Chains { common }
            | Command::Phase { common, .. }
            | Command::Sweep { common, .. }
            | Command::Levels { common }
            | Command::Monodromy { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::LocateEp { .. } => "locate-ep",
            Command::Chains { .. } => "chains",
            Command::Phase { .. } => "phase",
            Command::Sweep { .. } => "sweep",
            Command::Levels { .. } => "levels",
            Command::Monodromy { .. } => "monodromy",
        }
    }

    fn overrides(&self) -> Overrides {
        let c = self.common();
        let mut o = Overrides {
            seed: c.seed,
            epsilon: c.epsilon,
            samples: c.samples,
            ..Default::default()
        };
        match self {
            Command::Phase { method, .. } => o.method = *method,
            Command::Sweep { eps, .. } => o.eps_list = eps.clone(),
            _ => {}
        }
        o
    }
}

/// Float with 17 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    serde_json::from_str::<Number>(&text)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn cnum(z: Complex64) -> Value {
    Value::Array(vec![num(z.re), num(z.im)])
}

fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

fn cvec(v: &ComplexVector) -> Value {
    Value::Array(v.iter().map(|z| cnum(*z)).collect())
}

fn phase_json(r: &PhaseResult) -> Value {
    let mut m = Map::new();
    m.insert("method".into(), json!(r.method.name()));
    m.insert("gamma".into(), cnum(r.gamma));
    m.insert("error_estimate".into(), num(r.discretization_error));
    m.insert("samples".into(), json!(r.samples));
    m.insert("cycles".into(), json!(r.cycles));
    if let Some(w) = r.winding {
        m.insert("winding".into(), json!(w));
    }
    if let Some(res) = r.residual {
        m.insert("residual".into(), cnum(res));
    }
    if let Some(d) = &r.decomposition {
        m.insert("decomposition".into(), Value::Array(vec![cnum(d.i1), cnum(d.i2), cnum(d.i3)]));
    }
    Value::Object(m)
}

fn chains_json(jd: &JordanData) -> Result<Value> {
    let r = &jd.residuals;
    let tangent = match ep_tangent(jd) {
        Ok(t) => Value::Array(t.iter().map(|v| reals(v)).collect()),
        Err(EpError::DegenerateParametrization(_)) => Value::Null,
        Err(e) => return Err(e),
    };
    Ok(json!({
        "x_ep": reals(&jd.x_ep),
        "e_ep": cnum(jd.e_ep),
        "chi0": cvec(&jd.chi0),
        "chi1": cvec(&jd.chi1),
        "left_chi0": cvec(&jd.left0),
        "left_chi1": cvec(&jd.left1),
        "mu_grad": Value::Array(jd.mu_grad.iter().map(|z| cnum(*z)).collect()),
        "tangent": tangent,
        "residuals": {
            "sigma_min": num(r.sigma_min),
            "sigma_second": num(r.sigma_second),
            "right_eigen": num(r.right_eigen),
            "right_chain": num(r.right_chain),
            "left_eigen": num(r.left_eigen),
            "left_chain": num(r.left_chain),
            "orthogonality": num(r.orthogonality),
            "norm_10": num(r.norm_10),
            "norm_01": num(r.norm_01),
            "norm_11": num(r.norm_11),
        },
    }))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn locate_and_chain(cfg: &RunConfig, family: &HamiltonianFamily) -> Result<JordanData> {
    let loc = locate_ep(family, &cfg.guess, cfg.pair[0], cfg.newton_coords)?;
    jordan_chains(family, &loc.x, loc.energy)
}

fn cmd_locate(cfg: &RunConfig, family: &HamiltonianFamily) -> Result<Value> {
    let loc = locate_ep(family, &cfg.guess, cfg.pair[0], cfg.newton_coords)?;
    Ok(json!({
        "x_ep": reals(&loc.x),
        "e_ep": cnum(loc.energy),
        "iterations": loc.iterations,
        "residuals": {
            "p_abs": num(loc.p_abs),
            "gap": num(loc.gap),
            "history": reals(&loc.history),
        },
    }))
}

fn cmd_chains(cfg: &RunConfig, family: &HamiltonianFamily) -> Result<Value> {
    chains_json(&locate_and_chain(cfg, family)?)
}

fn cmd_phase(
    cfg: &RunConfig,
    family: &HamiltonianFamily,
    track_csv: Option<&Path>,
    versal_csv: Option<&Path>,
) -> Result<Value> {
    let lower = cfg.pair[0];
    let lp = &cfg.loop_;
    let mut results = Vec::new();
    let wants = |m: MethodChoice| cfg.method == m || cfg.method == MethodChoice::All;

    let mut dynamical = Value::Null;
    if wants(MethodChoice::Double) || track_csv.is_some() {
        let track = track_pair(family, lp, lower, 2)?;
        if let Some(path) = track_csv {
            write_text(path, &track.to_csv())?;
        }
        if wants(MethodChoice::Double) {
            results.push(phase_json(&phase_double_cycle_track(&track)?));
            dynamical = cnum(dynamical_phase(&track, cfg.period, cfg.hbar));
        }
    }
    if cfg.method == MethodChoice::Winding || (cfg.method == MethodChoice::All && family.is_symmetric()) {
        results.push(phase_json(&phase_winding_symmetric(family, lp, lower)?));
    }
    if wants(MethodChoice::Versal) || versal_csv.is_some() {
        let track = track_pair(family, lp, lower, 1)?;
        let frames = versal_along_loop(family, &track, None)?;
        if let Some(path) = versal_csv {
            write_text(path, &frames.to_csv())?;
        }
        if wants(MethodChoice::Versal) {
            results.push(phase_json(&phase_versal_frames(&frames)?));
        }
    }
    Ok(json!({ "results": results, "dynamical_phase": dynamical }))
}

fn correction_json(cfg: &RunConfig, family: &HamiltonianFamily, jd: &JordanData) -> Result<Map<String, Value>> {
    let shape = cfg.loop_.with_center(jd.x_ep.clone());
    let n = cfg.quadrature_samples;
    let direct = correction_direct(family, jd, &shape, n)?;
    let spectral = correction_spectral(family, jd, &shape, n)?;
    let mut m = Map::new();
    m.insert("x_ep".into(), reals(&jd.x_ep));
    m.insert("e_ep".into(), cnum(jd.e_ep));
    m.insert("a_direct".into(), cnum(direct.value));
    m.insert("a_direct_error".into(), num(direct.error));
    m.insert("a_spectral".into(), cnum(spectral.total.value));
    m.insert("a_spectral_error".into(), num(spectral.total.error));
    m.insert(
        "per_level".into(),
        Value::Array(
            spectral
                .per_level
                .iter()
                .map(|l| json!({ "level": l.level, "energy": cnum(l.energy), "contribution": cnum(l.contribution) }))
                .collect(),
        ),
    );
    Ok(m)
}

fn cmd_sweep(cfg: &RunConfig, family: &HamiltonianFamily, csv: Option<&Path>) -> Result<Value> {
    let jd = locate_and_chain(cfg, family)?;
    let mut m = correction_json(cfg, family, &jd)?;
    let report = epsilon_sweep(family, &jd, &cfg.loop_, cfg.pair[0], &cfg.eps_list, cfg.loop_.samples)?;
    if let Some(path) = csv {
        write_text(path, &report.to_csv())?;
    }
    m.insert(
        "sweep".into(),
        Value::Array(
            report
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "epsilon": num(e.epsilon),
                        "gamma": cnum(e.gamma),
                        "gamma_minus_pi": cnum(e.deviation),
                        "error_estimate": num(e.error),
                    })
                })
                .collect(),
        ),
    );
    m.insert("flat".into(), json!(report.is_flat()));
    m.insert("fitted_exponent".into(), report.fitted_exponent.map(num).unwrap_or(Value::Null));
    m.insert(
        "fitted_coefficient".into(),
        report.fitted_coefficient.map(cnum).unwrap_or(Value::Null),
    );
    Ok(Value::Object(m))
}

fn cmd_levels(cfg: &RunConfig, family: &HamiltonianFamily) -> Result<Value> {
    let jd = locate_and_chain(cfg, family)?;
    let spectrum: Vec<Value> = eig_general(&family.evaluate(&jd.x_ep))?
        .iter()
        .map(|t| cnum(t.value))
        .collect();
    let spec = spectators(family, &jd)?;
    let mut m = correction_json(cfg, family, &jd)?;
    m.insert("spectrum".into(), Value::Array(spectrum));
    m.insert("spectator_levels".into(), json!(spec.levels));
    if let Some(deltas) = &cfg.delta_list {
        if family.name() != "gen3" || cfg.family.builtin.is_none() {
            return Err(EpError::Config(
                "config field `delta_list`: the spectator scan applies to the built-in gen3 family".into(),
            ));
        }
        let options = cfg.family.options.unwrap_or_default();
        let scan = divergence_scan(&options, deltas, &cfg.loop_, cfg.quadrature_samples)?;
        m.insert(
            "divergence".into(),
            json!({
                "entries": scan.entries.iter().map(|(d, a)| json!({ "delta": num(*d), "a": cnum(*a) })).collect::<Vec<_>>(),
                "slope": scan.slope.map(num).unwrap_or(Value::Null),
                "truncated": scan.truncated,
            }),
        );
    }
    Ok(Value::Object(m))
}

fn cmd_monodromy(cfg: &RunConfig, family: &HamiltonianFamily, track_csv: Option<&Path>) -> Result<Value> {
    let track = track_pair(family, &cfg.loop_, cfg.pair[0], 2)?;
    if let Some(path) = track_csv {
        write_text(path, &track.to_csv())?;
    }
    let perm = |p: [usize; 2]| json!([cfg.pair[0] + p[0], cfg.pair[0] + p[1]]);
    Ok(json!({
        "one_cycle": perm(track.monodromy[0]),
        "two_cycles": perm(track.monodromy[1]),
        "swaps": track.swaps(),
        "samples": track.samples_per_cycle(),
    }))
}

/// Runs a parsed command and returns the JSON document.
pub fn execute(cli: &Cli) -> Result<Value> {
    let common = cli.command.common();
    let (cfg, family) = RunConfig::load(&common.config, &cli.command.overrides())?;
    let body = match &cli.command {
        Command::LocateEp { .. } => cmd_locate(&cfg, &family)?,
        Command::Chains { .. } => cmd_chains(&cfg, &family)?,
        Command::Phase {
            track_csv, versal_csv, ..
        } => cmd_phase(&cfg, &family, track_csv.as_deref(), versal_csv.as_deref())?,
        Command::Sweep { csv, .. } => cmd_sweep(&cfg, &family, csv.as_deref())?,
        Command::Levels { .. } => cmd_levels(&cfg, &family)?,
        Command::Monodromy { track_csv, .. } => cmd_monodromy(&cfg, &family, track_csv.as_deref())?,
    };
    let mut doc = Map::new();
    doc.insert("command".into(), json!(cli.command.name()));
    doc.insert(
        "config".into(),
        serde_json::to_value(&cfg).map_err(|e| EpError::Config(e.to_string()))?,
    );
    doc.insert("family".into(), json!(family.name()));
    doc.insert("result".into(), body);
    Ok(Value::Object(doc))
}

pub fn exit_code(err: &EpError) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    // A pool configured earlier in the same process is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    let doc = match execute(&cli) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let mut text = match serde_json::to_string_pretty(&doc) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERICAL;
        }
    };
    text.push('\n');
    let written = match &cli.command.common().out {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    EXIT_OK
}
