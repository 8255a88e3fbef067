//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::construct::{analyze_matrix, lattice_chart, parse_matrix, GridChart};
use crate::diagnostics::MIN_CURVATURE_RESOLUTION;
use crate::error::{Error, Result};
use crate::linalg::IMat3;
use crate::modelgeom::ModelParams;
use crate::solver::{InitMode, NormMode};

/// Smallest accepted resolution on any axis.
pub const MIN_RESOLUTION: usize = 4;
/// Largest accepted grid, in samples.
pub const MAX_GRID_SAMPLES: usize = 1 << 24;
/// Largest number of diagnostics rows or snapshots a run may request.
pub const MAX_EVENTS: f64 = 1e6;

/// `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AutoOr {
    #[default]
    Auto,
    Value(f64),
}

impl AutoOr {
    pub fn value(&self) -> Option<f64> {
        match self {
            AutoOr::Auto => None,
            AutoOr::Value(v) => Some(*v),
        }
    }
}

impl Serialize for AutoOr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AutoOr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(AutoOr::Value(v)),
            Raw::Word(w) if w == "auto" => Ok(AutoOr::Auto),
            Raw::Word(w) => Err(de::Error::custom(format!("expected \"auto\" or a number, got {w:?}"))),
        }
    }
}

/// Matrix entries in row-major order; accepts an array of nine integers or the
/// `"m11,m12,m13;m21,m22,m23;m31,m32,m33"` string form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct MatrixEntries(pub [i64; 9]);

impl MatrixEntries {
    pub fn to_mat(&self) -> IMat3 {
        let m = self.0;
        [[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]]
    }
}

impl<'de> Deserialize<'de> for MatrixEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Entries([i64; 9]),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Entries(e) => Ok(MatrixEntries(e)),
            Raw::Text(s) => {
                let m = parse_matrix(&s).map_err(de::Error::custom)?;
                Ok(MatrixEntries([
                    m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
                ]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zero,
    Noise,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub mode: InitKind,
    #[serde(default)]
    pub amplitude: AutoOr,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub matrix: MatrixEntries,
    #[serde(default = "one")]
    pub y0: f64,
    #[serde(rename = "N_u")]
    pub n_u: usize,
    #[serde(rename = "N_f")]
    pub n_f: usize,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default)]
    pub norm_mode: NormMode,
    #[serde(default)]
    pub c1_policy: AutoOr,
    pub init: InitConfig,
    pub t_end: f64,
    pub dt_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_dt: Option<f64>,
    pub diag_dt: f64,
    #[serde(default)]
    pub stretch_tier: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive finite number, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Cheap checks only; nothing grid-sized is allocated.
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("N_u", self.n_u), ("N_f", self.n_f)] {
            if n < MIN_RESOLUTION {
                return Err(Error::Config(format!("{name} = {n} is below the minimum {MIN_RESOLUTION}")));
            }
        }
        self.n_f
            .checked_pow(3)
            .and_then(|v| v.checked_mul(self.n_u))
            .filter(|v| *v <= MAX_GRID_SAMPLES)
            .ok_or_else(|| Error::Config(format!("grid {}×{}³ exceeds {MAX_GRID_SAMPLES} samples", self.n_u, self.n_f)))?;
        positive("y0", self.y0)?;
        positive("a", self.a)?;
        positive("b", self.b)?;
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        positive("dt_max", self.dt_max)?;
        positive("diag_dt", self.diag_dt)?;
        if self.t_end / self.diag_dt > MAX_EVENTS {
            return Err(Error::Config("too many diagnostics rows".into()));
        }
        if let Some(s) = self.snapshot_dt {
            positive("snapshot_dt", s)?;
            if self.t_end / s > MAX_EVENTS {
                return Err(Error::Config("too many snapshots".into()));
            }
        }
        if let AutoOr::Value(c) = self.c1_policy {
            positive("c1_policy", c)?;
        }
        match self.init.mode {
            InitKind::Noise => {
                if let AutoOr::Value(amp) = self.init.amplitude {
                    positive("init.amplitude", amp)?;
                }
            }
            InitKind::File if self.init.path.is_none() => {
                return Err(Error::Config("init.mode = file needs init.path".into()));
            }
            _ => {}
        }
        if self.stretch_tier && self.n_u.min(self.n_f) < MIN_CURVATURE_RESOLUTION {
            return Err(Error::ResolutionTooCoarse(format!(
                "stretch_tier needs N_u, N_f >= {MIN_CURVATURE_RESOLUTION}"
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::single(self.a, self.b)
    }

    pub fn chart(&self) -> Result<GridChart> {
        let s = analyze_matrix(&self.matrix.to_mat())?;
        lattice_chart(&s, self.y0, self.n_u, self.n_f)
    }

    pub fn init_mode(&self) -> InitMode {
        match self.init.mode {
            InitKind::Zero => InitMode::Zero,
            InitKind::Noise => InitMode::Noise {
                amplitude: self.init.amplitude.value(),
                seed: self.init.seed,
            },
            InitKind::File => InitMode::File(self.init.path.clone().unwrap_or_default()),
        }
    }
}
