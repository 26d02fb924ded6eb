//! Persistence schema and the benchmark service's request/response types.
//!
//! Transport lives in the CLI crate; this module only defines what goes over
//! the wire and how a request is checked and answered.

use serde::{Deserialize, Serialize};

use crate::evaluator::{Evaluator, FidelityVector, Parameterisation};
use crate::geometry::NominalCoil;
use crate::mfbo::{evaluate_point, CampaignConfig, CampaignState, DesignSpace};
use crate::rtd::RtdCurve;

pub use crate::mfbo::{load_checkpoint as load_document, parse_checkpoint as parse_document, SCHEMA_VERSION};

/// The checkpoint file: a serialised [`CampaignState`].
pub type CampaignDocument = CampaignState;

pub fn document_json(doc: &CampaignDocument) -> String {
    serde_json::to_string_pretty(doc).expect("campaign state always serialises")
}

/// Service and library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `POST /v1/evaluate` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub parameterisation: String,
    pub x: Vec<f64>,
    /// `[axial, radial]`.
    pub z: [f64; 2],
    /// Falls back to the service seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub f: f64,
    pub n_star: f64,
    pub mse: f64,
    pub cost: f64,
    pub rtd: RtdCurve<f64>,
}

/// One entry of `GET /v1/spaces`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceInfo {
    pub id: String,
    pub dim: usize,
    pub labels: Vec<String>,
    pub x_bounds: Vec<(f64, f64)>,
    pub z_bounds: [(f64, f64); 2],
    pub parameterisation: Parameterisation,
}

impl SpaceInfo {
    pub fn new(id: impl Into<String>, space: &DesignSpace) -> Self {
        Self {
            id: id.into(),
            dim: space.x_dim(),
            labels: space.labels.clone(),
            x_bounds: space.x_bounds.clone(),
            z_bounds: space.z_bounds,
            parameterisation: space.parameterisation.clone(),
        }
    }
}

/// Built-in spaces on the default coil: `cross-section` and `coil-path`.
pub fn builtin_spaces() -> Vec<(String, DesignSpace)> {
    let nominal = NominalCoil::default();
    [
        Parameterisation::cross_section(nominal.clone()),
        Parameterisation::coil_path(nominal),
    ]
    .into_iter()
    .map(|p| {
        let id = p.id().to_string();
        (id, DesignSpace::new(p).expect("built-in spaces are valid"))
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

/// A rejected request and the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceError {
    pub status: u16,
    pub body: ErrorBody,
}

impl ServiceError {
    pub fn bad_request(fields: Vec<FieldError>) -> Self {
        let message = fields
            .iter()
            .map(|f| format!("{}: {}", f.field, f.message))
            .collect::<Vec<_>>()
            .join("; ");
        Self {
            status: 400,
            body: ErrorBody {
                error: "invalid-request".into(),
                message,
                fields,
            },
        }
    }

    fn from_failure(kind: &str, message: String) -> Self {
        let status = match kind {
            "invalid-input" => 400,
            "invalid-geometry" => 422,
            _ => 500,
        };
        Self {
            status,
            body: ErrorBody {
                error: kind.into(),
                message,
                fields: Vec::new(),
            },
        }
    }
}

fn field(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

/// Field-level checks; returns the matching space.
pub fn validate_request<'a>(
    spaces: &'a [(String, DesignSpace)],
    req: &EvaluateRequest,
) -> Result<&'a DesignSpace, ServiceError> {
    let Some((_, space)) = spaces.iter().find(|(id, _)| *id == req.parameterisation) else {
        let known: Vec<&str> = spaces.iter().map(|(id, _)| id.as_str()).collect();
        return Err(ServiceError::bad_request(vec![field(
            "parameterisation",
            format!("unknown parameterisation {:?}; expected one of {known:?}", req.parameterisation),
        )]));
    };
    let mut errors = Vec::new();
    if req.x.len() != space.x_dim() {
        errors.push(field("x", format!("expected {} values, got {}", space.x_dim(), req.x.len())));
    } else {
        for (i, (&v, &(lo, hi))) in req.x.iter().zip(&space.x_bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                errors.push(field(
                    format!("x[{i}]"),
                    format!("{v} outside [{lo}, {hi}] ({})", space.labels[i]),
                ));
            }
        }
    }
    for (i, (&v, &(lo, hi))) in req.z.iter().zip(&space.z_bounds).enumerate() {
        if !(v >= lo && v <= hi) {
            errors.push(field(format!("z[{i}]"), format!("{v} outside [{lo}, {hi}]")));
        }
    }
    if errors.is_empty() {
        Ok(space)
    } else {
        Err(ServiceError::bad_request(errors))
    }
}

/// Validates and answers one request. Stateless and deterministic.
pub fn evaluate_request<E: Evaluator + ?Sized>(
    evaluator: &E,
    spaces: &[(String, DesignSpace)],
    req: &EvaluateRequest,
    default_seed: u64,
    alpha: f64,
) -> Result<EvaluateResponse, ServiceError> {
    let space = validate_request(spaces, req)?;
    let config = CampaignConfig {
        alpha,
        ..CampaignConfig::default()
    };
    let z = FidelityVector::from_slice(&req.z);
    let e = evaluate_point(space, evaluator, &req.x, z, req.seed.unwrap_or(default_seed), &config);
    match (e.f, e.n_star, e.mse, e.rtd, e.failure) {
        (Some(f), Some(n_star), Some(mse), Some(rtd), _) => Ok(EvaluateResponse {
            f,
            n_star,
            mse,
            cost: e.cost,
            rtd,
        }),
        (.., Some(failure)) => Err(ServiceError::from_failure(&failure.kind, failure.message)),
        _ => Err(ServiceError::from_failure("solver-failure", "evaluation produced no result".into())),
    }
}
