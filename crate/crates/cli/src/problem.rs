//! Problem and compiled-program documents (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use thermoflow_core::compiler::{
    compile_signed, encode_matvec, encode_scalar_product, CompiledProgram, EncodingSettings,
    SignedProgram,
};
use thermoflow_core::dynamics::DEFAULT_SETTLING_TOL;
use thermoflow_core::physics::DeviceConfig;

use crate::error::{CliError, Result};

pub const COMPILED_FORMAT: &str = "thermoflow-compiled";
pub const COMPILED_SCHEMA_VERSION: u32 = 1;

/// Encoder settings plus the run-time knobs a problem may override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSettings {
    pub base_frequency: f64,
    pub drain_ratio: f64,
    pub total_rate: f64,
    pub group_tol: f64,
    pub occupancy_floor: f64,
    /// Relative tolerance for settling times.
    pub rel_tol: f64,
    /// Default bar-potential policy for `circuit`.
    pub policy: String,
}

impl Default for ProblemSettings {
    fn default() -> Self {
        let e = EncodingSettings::default();
        ProblemSettings {
            base_frequency: e.base_frequency,
            drain_ratio: e.drain_ratio,
            total_rate: e.total_rate,
            group_tol: e.group_tol,
            occupancy_floor: e.occupancy_floor,
            rel_tol: DEFAULT_SETTLING_TOL,
            policy: "max".into(),
        }
    }
}

impl ProblemSettings {
    pub fn encoding(&self) -> EncodingSettings {
        EncodingSettings {
            base_frequency: self.base_frequency,
            drain_ratio: self.drain_ratio,
            total_rate: self.total_rate,
            group_tol: self.group_tol,
            occupancy_floor: self.occupancy_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    /// a·b for non-negative a, b.
    Scalar {
        a: Vec<f64>,
        b: Vec<f64>,
        #[serde(default)]
        settings: ProblemSettings,
    },
    /// P·b for non-negative P, b.
    Matvec {
        matrix: Vec<Vec<f64>>,
        vector: Vec<f64>,
        #[serde(default)]
        settings: ProblemSettings,
    },
    /// A·b for signed A and non-negative b.
    SignedMatvec {
        matrix: Vec<Vec<f64>>,
        vector: Vec<f64>,
        #[serde(default)]
        settings: ProblemSettings,
    },
    /// A device given directly; nothing is decoded.
    RawConfig {
        config: DeviceConfig,
        #[serde(default)]
        settings: ProblemSettings,
    },
}

impl Problem {
    pub fn settings(&self) -> &ProblemSettings {
        match self {
            Problem::Scalar { settings, .. }
            | Problem::Matvec { settings, .. }
            | Problem::SignedMatvec { settings, .. }
            | Problem::RawConfig { settings, .. } => settings,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Scalar { .. } => "scalar",
            Problem::Matvec { .. } => "matvec",
            Problem::SignedMatvec { .. } => "signed_matvec",
            Problem::RawConfig { .. } => "raw_config",
        }
    }

    /// The exact result computed directly, for problems that decode one.
    pub fn direct_product(&self) -> Option<Vec<f64>> {
        let dot = |row: &[f64], x: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        match self {
            Problem::Scalar { a, b, .. } => Some(vec![dot(a, b)]),
            Problem::Matvec { matrix, vector, .. }
            | Problem::SignedMatvec { matrix, vector, .. } => {
                Some(matrix.iter().map(|row| dot(row, vector)).collect())
            }
            Problem::RawConfig { .. } => None,
        }
    }

    /// sha256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("problem serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// What a problem compiles to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompiledForm {
    Unsigned { program: Box<CompiledProgram> },
    Signed { program: Box<SignedProgram> },
    Raw { config: DeviceConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledDocument {
    pub format: String,
    pub schema_version: u32,
    pub source_sha256: String,
    pub problem: Problem,
    pub compiled: CompiledForm,
}

impl CompiledDocument {
    pub fn compile(problem: Problem) -> Result<Self> {
        let settings = problem.settings().encoding();
        settings.validate()?;
        let compiled = match &problem {
            Problem::Scalar { a, b, .. } => CompiledForm::Unsigned {
                program: Box::new(encode_scalar_product(a, b, &settings)?),
            },
            Problem::Matvec { matrix, vector, .. } => CompiledForm::Unsigned {
                program: Box::new(encode_matvec(matrix, vector, &settings)?),
            },
            Problem::SignedMatvec { matrix, vector, .. } => CompiledForm::Signed {
                program: Box::new(compile_signed(matrix, vector, &settings)?),
            },
            Problem::RawConfig { config, .. } => CompiledForm::Raw {
                config: config.clone(),
            },
        };
        Ok(CompiledDocument {
            format: COMPILED_FORMAT.into(),
            schema_version: COMPILED_SCHEMA_VERSION,
            source_sha256: problem.content_hash(),
            problem,
            compiled,
        })
    }

    /// Every simulated device, labelled.
    pub fn devices(&self) -> Vec<(&'static str, &DeviceConfig)> {
        match &self.compiled {
            CompiledForm::Unsigned { program } => vec![("program", &program.config)],
            CompiledForm::Signed { program } => {
                let mut out = Vec::new();
                if let Some(p) = &program.positive {
                    out.push(("positive", &p.program.config));
                }
                if let Some(p) = &program.negative {
                    out.push(("negative", &p.program.config));
                }
                out
            }
            CompiledForm::Raw { config } => vec![("config", config)],
        }
    }

    pub fn device(&self, part: usize) -> Result<&DeviceConfig> {
        let devices = self.devices();
        let count = devices.len();
        devices
            .into_iter()
            .nth(part)
            .map(|(_, c)| c)
            .ok_or_else(|| CliError::Usage(format!("--part {part} out of range ({count} devices)")))
    }

    fn check(&self) -> thermoflow_core::Result<()> {
        match &self.compiled {
            CompiledForm::Unsigned { program } => program.validate(),
            CompiledForm::Signed { program } => {
                program.parts().try_for_each(|p| p.program.validate())
            }
            CompiledForm::Raw { .. } => Ok(()),
        }
    }
}

/// Load either a problem file (compiled on the fly) or a compiled document.
pub fn load(path: &Path) -> Result<CompiledDocument> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |e: serde_json::Error| CliError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(schema)?;
    let is_compiled = value.get("format").and_then(|f| f.as_str()) == Some(COMPILED_FORMAT);
    if is_compiled {
        let doc: CompiledDocument = serde_json::from_str(&text).map_err(schema)?;
        if doc.schema_version != COMPILED_SCHEMA_VERSION {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                message: format!("unsupported schema_version {}", doc.schema_version),
            });
        }
        doc.check()?;
        log::info!("loaded compiled document {}", path.display());
        Ok(doc)
    } else {
        let problem: Problem = serde_json::from_str(&text).map_err(schema)?;
        log::info!(
            "compiling {} problem from {}",
            problem.kind(),
            path.display()
        );
        CompiledDocument::compile(problem)
    }
}

pub(crate) fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| CliError::Usage(format!("{what} needs an input file")))
}
