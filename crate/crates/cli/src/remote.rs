//! Evaluators that delegate to another process or an HTTP service speaking
//! the `/v1/evaluate` schema.

use std::io::Write;
use std::process::{Command, Stdio};

use coilopt::evaluator::{EvaluationError, Evaluator, FidelityVector, OutletSeries, Parameterisation, SimulationResult};
use coilopt::interface::{ErrorBody, EvaluateRequest, EvaluateResponse};

fn request(space_id: &Option<String>, space: &Parameterisation, x: &[f64], z: &FidelityVector, seed: u64) -> EvaluateRequest {
    EvaluateRequest {
        parameterisation: space_id.clone().unwrap_or_else(|| space.id().to_string()),
        x: x.to_vec(),
        z: [z.axial, z.radial],
        seed: Some(seed),
    }
}

/// The RTD curve stands in for the outlet trace; it is already normalised.
fn to_result(resp: EvaluateResponse, z: &FidelityVector, seed: u64) -> SimulationResult {
    SimulationResult {
        outlet_series: OutletSeries {
            time: resp.rtd.theta,
            concentration: resp.rtd.e,
        },
        cost: resp.cost,
        fidelity_used: *z,
        seed,
    }
}

fn remote_error(status: u16, body: &str) -> EvaluationError {
    match serde_json::from_str::<ErrorBody>(body) {
        Ok(b) => EvaluationError::Remote {
            status,
            kind: b.error,
            message: b.message,
        },
        Err(_) => EvaluationError::Remote {
            status,
            kind: "remote".into(),
            message: body.trim().to_string(),
        },
    }
}

/// Posts to `{base_url}/v1/evaluate`.
#[derive(Debug, Clone)]
pub struct HttpEvaluator {
    pub base_url: String,
    /// Parameterisation id sent to the service; the local space's id if unset.
    pub space_id: Option<String>,
    agent: ureq::Agent,
}

impl HttpEvaluator {
    pub fn new(base_url: impl Into<String>, space_id: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            space_id,
            agent,
        }
    }
}

impl Evaluator for HttpEvaluator {
    fn evaluate(
        &self,
        space: &Parameterisation,
        x: &[f64],
        z: &FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError> {
        let body = serde_json::to_string(&request(&self.space_id, space, x, z, seed))
            .map_err(|e| EvaluationError::InvalidInput(e.to_string()))?;
        let url = format!("{}/v1/evaluate", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| EvaluationError::Transport(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| EvaluationError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(remote_error(status, &text));
        }
        let parsed: EvaluateResponse =
            serde_json::from_str(&text).map_err(|e| EvaluationError::Transport(format!("bad response: {e}")))?;
        Ok(to_result(parsed, z, seed))
    }

    fn name(&self) -> String {
        format!("http:{}", self.base_url)
    }
}

/// Runs a command per evaluation: request JSON on stdin, response JSON on
/// stdout, and on failure a non-zero exit with an error body on stderr.
#[derive(Debug, Clone)]
pub struct SubprocessEvaluator {
    pub program: String,
    pub args: Vec<String>,
    pub space_id: Option<String>,
}

impl SubprocessEvaluator {
    /// Splits `command` on whitespace.
    pub fn from_command_line(command: &str, space_id: Option<String>) -> Option<Self> {
        let mut parts = command.split_whitespace().map(String::from);
        Some(Self {
            program: parts.next()?,
            args: parts.collect(),
            space_id,
        })
    }
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(
        &self,
        space: &Parameterisation,
        x: &[f64],
        z: &FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError> {
        let body = serde_json::to_vec(&request(&self.space_id, space, x, z, seed))
            .map_err(|e| EvaluationError::InvalidInput(e.to_string()))?;
        let transport = |e: std::io::Error| EvaluationError::Transport(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(transport)?;
        child.stdin.take().expect("piped stdin").write_all(&body).map_err(transport)?;
        let out = child.wait_with_output().map_err(transport)?;
        if !out.status.success() {
            let err = String::from_utf8_lossy(&out.stderr);
            let status = match serde_json::from_str::<ErrorBody>(&err).map(|b| b.error) {
                Ok(k) if k == "invalid-input" || k == "invalid-request" => 400,
                Ok(k) if k == "invalid-geometry" => 422,
                _ => 500,
            };
            return Err(remote_error(status, &err));
        }
        let parsed: EvaluateResponse = serde_json::from_slice(&out.stdout)
            .map_err(|e| EvaluationError::Transport(format!("bad response from {}: {e}", self.program)))?;
        Ok(to_result(parsed, z, seed))
    }

    fn name(&self) -> String {
        format!("subprocess:{}", self.program)
    }
}
