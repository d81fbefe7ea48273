//! Versioned JSON model files.
//!
//! Matrices and vectors are stored as base64 of their little-endian `f64`
//! bytes in column-major order, so a save/load round trip is bit-exact.
//! Everything derivable (kernel matrices, embeddings, the hypersphere
//! center) is recomputed on load by the same code that produced it.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use mssvdd::kernel::NptState;
use mssvdd::subspace::{Boundary, TrainTrace};
use mssvdd::svdd::{DataDescription, OcSvmModel};
use mssvdd::{FeatureMatrix, KernelParams, ProjectionMatrix, SubspaceModel, TrainConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, json, CliError, Result};

pub const FORMAT: &str = "mssvdd-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl EncodedMatrix {
    pub fn encode(m: &DMatrix<f64>) -> Self {
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for v in m.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        EncodedMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn encode_vector(v: &DVector<f64>) -> Self {
        Self::encode(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn decode(&self) -> std::result::Result<DMatrix<f64>, String> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| format!("bad base64: {e}"))?;
        let expected = self.rows * self.cols * 8;
        if bytes.len() != expected {
            return Err(format!(
                "{}x{} matrix needs {expected} bytes, found {}",
                self.rows,
                self.cols,
                bytes.len()
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(DMatrix::from_vec(self.rows, self.cols, values))
    }

    pub fn decode_vector(&self) -> std::result::Result<DVector<f64>, String> {
        if self.cols != 1 {
            return Err(format!(
                "expected a column vector, found {} columns",
                self.cols
            ));
        }
        Ok(DVector::from_column_slice(self.decode()?.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 over the training input files.
    pub dataset_sha256: String,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(seed: u64, dataset_sha256: String) -> Self {
        Provenance {
            seed,
            dataset_sha256,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// SHA-256 over the given files, each prefixed by its length so that moving
/// bytes between files changes the digest.
pub fn digest_files<P: AsRef<Path>>(paths: &[P]) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        let p = p.as_ref();
        let bytes = std::fs::read(p).map_err(|e| io(p, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NptRecord {
    pub params: KernelParams,
    pub train_data: EncodedMatrix,
    pub row_means: EncodedMatrix,
    pub grand_mean: f64,
    pub eigvals: EncodedMatrix,
    pub eigvecs: EncodedMatrix,
    pub dropped_negative_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundaryRecord {
    Hypersphere {
        alphas: EncodedMatrix,
        c_penalty: f64,
        radius_sq: f64,
        train_points: EncodedMatrix,
        kkt_violation: f64,
        converged: bool,
    },
    Hyperplane {
        alphas: EncodedMatrix,
        nu: f64,
        rho: f64,
        train_points: EncodedMatrix,
        kkt_violation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub iterations: usize,
    pub orthonormality_errors: Vec<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub config: TrainConfig,
    pub input_dims: Vec<usize>,
    pub n_train: usize,
    pub trace: TraceRecord,
    pub npt: Option<Vec<NptRecord>>,
    pub projections: Vec<EncodedMatrix>,
    pub boundary: BoundaryRecord,
}

impl ModelFile {
    pub fn from_model(model: &SubspaceModel, provenance: Provenance) -> Self {
        let npt = model.npt_states.as_ref().map(|states| {
            states
                .iter()
                .map(|s| NptRecord {
                    params: s.params,
                    train_data: EncodedMatrix::encode(s.train_data.values()),
                    row_means: EncodedMatrix::encode_vector(&s.row_means),
                    grand_mean: s.grand_mean,
                    eigvals: EncodedMatrix::encode_vector(&s.eigvals),
                    eigvecs: EncodedMatrix::encode(&s.eigvecs),
                    dropped_negative_mass: s.dropped_negative_mass,
                })
                .collect()
        });
        let boundary = match &model.boundary {
            Boundary::Hypersphere(d) => BoundaryRecord::Hypersphere {
                alphas: EncodedMatrix::encode_vector(&d.alphas),
                c_penalty: d.c_penalty,
                radius_sq: d.radius_sq,
                train_points: EncodedMatrix::encode(&d.train_points),
                kkt_violation: d.kkt_violation,
                converged: d.converged,
            },
            Boundary::Hyperplane(m) => BoundaryRecord::Hyperplane {
                alphas: EncodedMatrix::encode_vector(&m.alphas),
                nu: m.nu,
                rho: m.rho,
                train_points: EncodedMatrix::encode(&m.train_points),
                kkt_violation: m.kkt_violation,
            },
        };
        ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            provenance,
            config: model.config.clone(),
            input_dims: model.input_dims.clone(),
            n_train: model.n_train,
            trace: TraceRecord {
                iterations: model.trace.iterations,
                orthonormality_errors: model.trace.orthonormality_errors.clone(),
                warning: model.trace.warning.clone(),
            },
            npt,
            projections: model
                .projections
                .iter()
                .map(|q| EncodedMatrix::encode(q.matrix()))
                .collect(),
            boundary,
        }
    }

    pub fn into_model(self) -> std::result::Result<SubspaceModel, String> {
        let npt_states = match self.npt {
            None => None,
            Some(records) => Some(
                records
                    .into_iter()
                    .map(|r| {
                        let train = FeatureMatrix::new(r.train_data.decode()?)
                            .map_err(|e| e.to_string())?;
                        NptState::from_parts(
                            r.params,
                            train,
                            r.row_means.decode_vector()?,
                            r.grand_mean,
                            r.eigvals.decode_vector()?,
                            r.eigvecs.decode()?,
                            r.dropped_negative_mass,
                        )
                        .map_err(|e| e.to_string())
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?,
            ),
        };
        let projections = self
            .projections
            .iter()
            .map(|q| q.decode().map(ProjectionMatrix::from_matrix_unchecked))
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let boundary = match self.boundary {
            BoundaryRecord::Hypersphere {
                alphas,
                c_penalty,
                radius_sq,
                train_points,
                kkt_violation,
                converged,
            } => {
                let mut d = DataDescription::from_parts(
                    train_points.decode()?,
                    alphas.decode_vector()?,
                    c_penalty,
                    radius_sq,
                )
                .map_err(|e| e.to_string())?;
                d.kkt_violation = kkt_violation;
                d.converged = converged;
                Boundary::Hypersphere(d)
            }
            BoundaryRecord::Hyperplane {
                alphas,
                nu,
                rho,
                train_points,
                kkt_violation,
            } => {
                let mut m = OcSvmModel::from_parts(
                    train_points.decode()?,
                    alphas.decode_vector()?,
                    nu,
                    rho,
                )
                .map_err(|e| e.to_string())?;
                m.kkt_violation = kkt_violation;
                Boundary::Hyperplane(m)
            }
        };
        if projections.is_empty() {
            return Err("model has no projections".into());
        }
        if let Some(states) = &npt_states {
            if states.len() != projections.len() {
                return Err(format!(
                    "{} kernel embeddings for {} projections",
                    states.len(),
                    projections.len()
                ));
            }
        }
        Ok(SubspaceModel {
            config: self.config,
            input_dims: self.input_dims,
            npt_states,
            projections,
            boundary,
            n_train: self.n_train,
            trace: TrainTrace {
                iterations: self.trace.iterations,
                orthonormality_errors: self.trace.orthonormality_errors,
                warning: self.trace.warning,
            },
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| io(path, e))
    }

    /// Reads a model file, rejecting other formats and versions before
    /// interpreting anything else.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| json(path, e))?;
        let bad = |message: String| CliError::ModelFormat {
            path: path.to_path_buf(),
            message,
        };
        match value.get("format").and_then(|v| v.as_str()) {
            Some(FORMAT) => {}
            other => return Err(bad(format!("not a model file (format {other:?})"))),
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(VERSION) => {}
            Some(v) => {
                return Err(bad(format!(
                    "model file version {v} is not supported (this build reads version {VERSION})"
                )))
            }
            None => return Err(bad("missing model file version".into())),
        }
        serde_json::from_value(value).map_err(|e| json(path, e))
    }

    pub fn load_model(path: &Path) -> Result<SubspaceModel> {
        Self::load(path)?
            .into_model()
            .map_err(|message| CliError::ModelFormat {
                path: path.to_path_buf(),
                message,
            })
    }
}
