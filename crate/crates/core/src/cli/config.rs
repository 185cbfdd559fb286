use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EpError, Result};
use crate::hamiltonians::{builtin, load_family, BuiltinOptions, HamiltonianFamily, LoopShape, ParameterLoop};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_SAMPLES: usize = 1024;
pub const DEFAULT_QUADRATURE: usize = 256;
pub const DEFAULT_EPS_LIST: [f64; 4] = [0.02, 0.04, 0.08, 0.16];

/// Which phase methods `phase` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Double,
    Winding,
    Versal,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<BuiltinOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub plane: Option<(usize, usize)>,
    #[serde(default)]
    pub shape: Option<LoopShape>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub reversed: Option<bool>,
}

/// Config file as written by the user; every field but `family` is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub family: FamilyConfig,
    #[serde(default, rename = "loop")]
    pub loop_: Option<LoopConfig>,
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
    #[serde(default)]
    pub guess: Option<Vec<f64>>,
    #[serde(default)]
    pub newton_coords: Option<(usize, usize)>,
    #[serde(default)]
    pub method: Option<MethodChoice>,
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_list: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature_samples: Option<usize>,
    #[serde(default)]
    pub hbar: Option<f64>,
    #[serde(default)]
    pub period: Option<f64>,
}

/// Fully resolved configuration, echoed under `"config"` in every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub family: FamilyConfig,
    #[serde(rename = "loop")]
    pub loop_: ParameterLoop,
    pub pair: [usize; 2],
    pub guess: Vec<f64>,
    pub newton_coords: (usize, usize),
    pub method: MethodChoice,
    pub eps_list: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_list: Option<Vec<f64>>,
    pub quadrature_samples: usize,
    pub hbar: f64,
    pub period: f64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<MethodChoice>,
    pub eps_list: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub samples: Option<usize>,
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            EpError::Config(format!("config: {inner}"))
        } else {
            EpError::Config(format!("config field `{path}`: {inner}"))
        }
    })?;
    Ok(raw)
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<(RunConfig, HamiltonianFamily)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EpError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let raw = parse_raw(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::resolve(raw, base, overrides)
    }

    pub fn resolve(raw: RawConfig, base: &Path, overrides: &Overrides) -> Result<(RunConfig, HamiltonianFamily)> {
        let mut family_cfg = raw.family.clone();
        let family = match (&family_cfg.builtin, &family_cfg.file) {
            (Some(name), None) => {
                let mut options = family_cfg.options.unwrap_or_default();
                if let Some(seed) = overrides.seed {
                    options.seed = seed;
                }
                family_cfg.options = Some(options);
                builtin(name, &options).map_err(config_error("family.builtin"))?
            }
            (None, Some(file)) => {
                if family_cfg.options.is_some() {
                    return Err(EpError::Config(
                        "config field `family.options`: only valid with `family.builtin`".into(),
                    ));
                }
                let resolved = if file.is_absolute() { file.clone() } else { base.join(file) };
                family_cfg.file = Some(resolved.clone());
                load_family(&resolved).map_err(config_error("family.file"))?
            }
            _ => {
                return Err(EpError::Config(
                    "config field `family`: exactly one of `builtin` and `file` is required".into(),
                ))
            }
        };
        let m = family.param_count();

        let lc = raw.loop_.unwrap_or(LoopConfig {
            center: None,
            plane: None,
            shape: None,
            epsilon: None,
            samples: None,
            reversed: None,
        });
        let center = lc.center.unwrap_or_else(|| vec![0.0; m]);
        if center.len() != m {
            return Err(EpError::Config(format!(
                "config field `loop.center`: expected {m} components, got {}",
                center.len()
            )));
        }
        let mut lp = ParameterLoop::new(
            center,
            lc.plane.unwrap_or((0, 1)),
            lc.shape.unwrap_or(LoopShape::Circle),
            overrides.epsilon.or(lc.epsilon).unwrap_or(DEFAULT_EPSILON),
            overrides.samples.or(lc.samples).unwrap_or(DEFAULT_SAMPLES),
        )
        .map_err(config_error("loop"))?;
        lp.reversed = lc.reversed.unwrap_or(false);

        let pair = raw.pair.unwrap_or([0, 1]);
        if pair[1] != pair[0] + 1 || pair[1] >= family.dim() {
            return Err(EpError::Config(format!(
                "config field `pair`: expected [n, n+1] with n+1 < {}, got {pair:?}",
                family.dim()
            )));
        }
        let guess = raw.guess.unwrap_or_else(|| lp.center.clone());
        if guess.len() != m {
            return Err(EpError::Config(format!(
                "config field `guess`: expected {m} components, got {}",
                guess.len()
            )));
        }
        let newton_coords = raw.newton_coords.unwrap_or(lp.plane);
        if newton_coords.0 == newton_coords.1 || newton_coords.0 >= m || newton_coords.1 >= m {
            return Err(EpError::Config(format!(
                "config field `newton_coords`: invalid coordinates {newton_coords:?} for {m} parameters"
            )));
        }
        let eps_list = overrides
            .eps_list
            .clone()
            .or(raw.eps_list)
            .unwrap_or_else(|| DEFAULT_EPS_LIST.to_vec());
        if eps_list.is_empty() {
            return Err(EpError::Config("config field `eps_list`: must not be empty".into()));
        }
        if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(EpError::Config("config field `eps_list`: values must be positive".into()));
        }
        if let Some(d) = &raw.delta_list {
            if d.is_empty() || d.iter().any(|x| !(x.is_finite() && x.abs() >= 1e-2)) {
                return Err(EpError::Config(
                    "config field `delta_list`: need a nonempty list with |delta| >= 1e-2".into(),
                ));
            }
        }
        let quadrature_samples = raw.quadrature_samples.unwrap_or(DEFAULT_QUADRATURE);
        if quadrature_samples < 2 {
            return Err(EpError::Config("config field `quadrature_samples`: must be at least 2".into()));
        }
        let hbar = raw.hbar.unwrap_or(1.0);
        let period = raw.period.unwrap_or(1.0);
        for (name, v) in [("hbar", hbar), ("period", period)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EpError::Config(format!("config field `{name}`: must be positive")));
            }
        }
        let cfg = RunConfig {
            family: family_cfg,
            loop_: lp,
            pair,
            guess,
            newton_coords,
            method: overrides.method.or(raw.method).unwrap_or(MethodChoice::All),
            eps_list,
            delta_list: raw.delta_list,
            quadrature_samples,
            hbar,
            period,
        };
        Ok((cfg, family))
    }
}

fn config_error(field: &'static str) -> impl Fn(EpError) -> EpError {
    move |e| match e {
        EpError::Io(_) | EpError::Config(_) => e,
        e if e.is_numerical() => e,
        e => EpError::Config(format!("config field `{field}`: {e}")),
    }
}
