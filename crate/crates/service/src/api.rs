//! Request schemas and the transport-independent dispatcher shared by the
//! HTTP server and the command-line tool.

use qpdesign::design::{
    self, AdmissibilityContour, ControlGiven, ControlPlant, DesignResult, SearchWindow,
};
use qpdesign::rootfinder::{self, DominanceReport, RootSet, SensitivitySweep};
use qpdesign::simulate::{self, InitialCondition, Trajectory, DEFAULT_STEPS_PER_DELAY};
use qpdesign::{ComplexRectangle, Error, Progress, Quasipolynomial};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Trajectories longer than this are thinned before transport.
pub const MAX_TRAJECTORY_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadInput,
    SingularSystem,
    NoAdmissiblePoint,
    ContourTooClose,
    RootOnBoundary,
    InvalidPerturbation,
    BlowUp,
    ConvergenceFailure,
    AssignedRootMissing,
    DeadlineExceeded,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::DeadlineExceeded => 408,
            ErrorCode::Internal => 500,
            _ => 422,
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::BadInput => 2,
            ErrorCode::Internal => 1,
            _ => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadInput => "bad_input",
            ErrorCode::SingularSystem => "singular_system",
            ErrorCode::NoAdmissiblePoint => "no_admissible_point",
            ErrorCode::ContourTooClose => "contour_too_close",
            ErrorCode::RootOnBoundary => "root_on_boundary",
            ErrorCode::InvalidPerturbation => "invalid_perturbation",
            ErrorCode::BlowUp => "blow_up",
            ErrorCode::ConvergenceFailure => "convergence_failure",
            ErrorCode::AssignedRootMissing => "assigned_root_missing",
            ErrorCode::DeadlineExceeded => "deadline_exceeded",
            ErrorCode::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn bad_input(message: impl Into<String>) -> Self {
        Self {
            code: ErrorCode::BadInput,
            message: message.into(),
            details: None,
        }
    }

    pub fn deadline(progress: &Progress) -> Self {
        Self {
            code: ErrorCode::DeadlineExceeded,
            message: "deadline expired before the computation finished".into(),
            details: Some(serde_json::json!({
                "completed": progress.completed(),
                "total": progress.total(),
            })),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use serde_json::json;
        let message = e.to_string();
        let (code, details) = match e {
            Error::InvalidInput(_) => (ErrorCode::BadInput, None),
            Error::SingularSystem { condition } => {
                (ErrorCode::SingularSystem, Some(json!({ "condition": condition })))
            }
            Error::NoAdmissiblePoint { lower, upper } => (
                ErrorCode::NoAdmissiblePoint,
                Some(json!({ "lower": lower, "upper": upper })),
            ),
            Error::ContourTooClose { re, im } => {
                (ErrorCode::ContourTooClose, Some(json!({ "re": re, "im": im })))
            }
            Error::RootOnBoundary { retries } => {
                (ErrorCode::RootOnBoundary, Some(json!({ "retries": retries })))
            }
            Error::ConvergenceFailure(_) => (ErrorCode::ConvergenceFailure, None),
            Error::AssignedRootMissing { s0 } => {
                (ErrorCode::AssignedRootMissing, Some(json!({ "s0": s0 })))
            }
            Error::InvalidPerturbation { tau, epsilon, k } => (
                ErrorCode::InvalidPerturbation,
                Some(json!({ "tau": tau, "epsilon": epsilon, "K": k })),
            ),
            Error::BlowUp { time } => (ErrorCode::BlowUp, Some(json!({ "time": time }))),
            Error::Cancelled { completed, total } => (
                ErrorCode::DeadlineExceeded,
                Some(json!({ "completed": completed, "total": total })),
            ),
        };
        Self {
            code,
            message,
            details,
        }
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

/// Operations reachable over HTTP (`POST /<path>`) and from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    GenericMid,
    GenericCrrid,
    ControlMid,
    Admissibility,
    Roots,
    Sensitivity,
    Simulate,
    Report,
}

impl Endpoint {
    pub const ALL: [Endpoint; 8] = [
        Endpoint::GenericMid,
        Endpoint::GenericCrrid,
        Endpoint::ControlMid,
        Endpoint::Admissibility,
        Endpoint::Roots,
        Endpoint::Sensitivity,
        Endpoint::Simulate,
        Endpoint::Report,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Endpoint::GenericMid => "/design/generic-mid",
            Endpoint::GenericCrrid => "/design/generic-crrid",
            Endpoint::ControlMid => "/design/control-mid",
            Endpoint::Admissibility => "/admissibility",
            Endpoint::Roots => "/roots",
            Endpoint::Sensitivity => "/sensitivity",
            Endpoint::Simulate => "/simulate",
            Endpoint::Report => "/report",
        }
    }
}

/// Server-wide defaults applied when a request leaves a field out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defaults {
    pub grid: [usize; 2],
}

impl Default for Defaults {
    fn default() -> Self {
        Self { grid: [400, 400] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericMidRequest {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub s0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericCrridRequest {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub roots: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMidRequest {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub given: ControlGiven,
    #[serde(default)]
    pub window: SearchWindow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityRequest {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub s0_min: f64,
    pub tau_max: f64,
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsRequest {
    pub q: Quasipolynomial,
    pub rect: ComplexRectangle,
    /// When present, the response also certifies dominance of this root.
    #[serde(default)]
    pub s0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootsResponse {
    #[serde(flatten)]
    pub roots: RootSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominance: Option<DominanceReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityRequest {
    pub q: Quasipolynomial,
    pub epsilon: f64,
    #[serde(rename = "K", alias = "k")]
    pub k_max: usize,
    pub rect: ComplexRectangle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub q: Quasipolynomial,
    pub ic: InitialCondition,
    #[serde(rename = "T", alias = "t_end")]
    pub t_end: f64,
    #[serde(default = "default_steps", alias = "steps_per_delay")]
    pub steps: usize,
}

fn default_steps() -> usize {
    DEFAULT_STEPS_PER_DELAY
}

/// Any of the three design problems, tagged by `mode`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DesignRequest {
    GenericMid(GenericMidRequest),
    GenericCrrid(GenericCrridRequest),
    ControlMid(ControlMidRequest),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub ic: InitialCondition,
    #[serde(rename = "T", alias = "t_end")]
    pub t_end: f64,
    #[serde(default = "default_steps", alias = "steps_per_delay")]
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRequest {
    pub design: DesignRequest,
    /// Defaults to `[-500, 500] × [-500, 500]`.
    #[serde(default)]
    pub rect: Option<ComplexRectangle>,
    #[serde(default)]
    pub simulation: Option<SimulationSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub design: DesignResult,
    pub roots: RootSet,
    pub dominance: DominanceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
}

/// Typed result of one operation.
#[derive(Debug, Clone)]
pub enum Output {
    Design(DesignResult),
    Designs(Vec<DesignResult>),
    Admissibility(AdmissibilityContour),
    Roots(RootsResponse),
    Sensitivity(SensitivitySweep),
    Trajectory(Trajectory),
    Report(Box<Report>),
}

impl Output {
    pub fn to_json(&self) -> Value {
        let v = match self {
            Output::Design(d) => serde_json::to_value(d),
            Output::Designs(d) => serde_json::to_value(d),
            Output::Admissibility(c) => serde_json::to_value(c),
            Output::Roots(r) => serde_json::to_value(r),
            Output::Sensitivity(s) => serde_json::to_value(s),
            Output::Trajectory(t) => serde_json::to_value(t),
            Output::Report(r) => serde_json::to_value(r),
        };
        v.expect("response types serialize")
    }

    /// CSV rendering, available for roots, sweeps, trajectories and
    /// admissibility polylines.
    pub fn to_csv(&self) -> Option<String> {
        match self {
            Output::Roots(r) => Some(r.roots.to_csv()),
            Output::Sensitivity(s) => Some(s.to_csv()),
            Output::Trajectory(t) => Some(t.to_csv()),
            Output::Admissibility(c) => {
                let mut out = String::from("polyline,s0,tau\n");
                for (i, line) in c.polylines.iter().enumerate() {
                    for [s0, tau] in line {
                        out.push_str(&format!("{i},{s0:.16e},{tau:.16e}\n"));
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }
}

fn parse<T: DeserializeOwned>(body: Value) -> ApiResult<T> {
    serde_json::from_value(body).map_err(|e| ApiError::bad_input(e.to_string()))
}

/// Removes and returns the optional `deadline_ms` field of a request body.
pub fn take_deadline(body: &mut Value) -> ApiResult<Option<u64>> {
    let Some(obj) = body.as_object_mut() else {
        return Ok(None);
    };
    match obj.remove("deadline_ms") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| ApiError::bad_input("deadline_ms must be a non-negative integer")),
    }
}

/// Runs one operation on a parsed JSON body.
pub fn handle(endpoint: Endpoint, body: Value, defaults: &Defaults, progress: &Progress) -> ApiResult<Output> {
    match endpoint {
        Endpoint::GenericMid => Ok(Output::Design(generic_mid(&parse(body)?)?)),
        Endpoint::GenericCrrid => Ok(Output::Design(generic_crrid(&parse(body)?)?)),
        Endpoint::ControlMid => Ok(Output::Designs(control_mid(&parse(body)?)?)),
        Endpoint::Admissibility => {
            let req: AdmissibilityRequest = parse(body)?;
            let plant = ControlPlant::new(req.n, req.m, req.a)?;
            let grid = req.grid.unwrap_or(defaults.grid);
            Ok(Output::Admissibility(design::admissibility_contour_with(
                &plant,
                req.s0_min,
                req.tau_max,
                grid,
                progress,
            )?))
        }
        Endpoint::Roots => {
            let req: RootsRequest = parse(body)?;
            let roots = rootfinder::find_roots_with(&req.q, &req.rect, progress)?;
            let dominance = match req.s0 {
                Some(s0) => Some(rootfinder::certify_dominance(&roots, s0)?),
                None => None,
            };
            Ok(Output::Roots(RootsResponse { roots, dominance }))
        }
        Endpoint::Sensitivity => {
            let req: SensitivityRequest = parse(body)?;
            Ok(Output::Sensitivity(rootfinder::sensitivity_sweep_with(
                &req.q,
                req.epsilon,
                req.k_max,
                &req.rect,
                progress,
            )?))
        }
        Endpoint::Simulate => {
            let req: SimulateRequest = parse(body)?;
            let tr = simulate::simulate_with(&req.q, &req.ic, req.t_end, req.steps, progress)?;
            Ok(Output::Trajectory(tr.decimated(MAX_TRAJECTORY_POINTS)))
        }
        Endpoint::Report => Ok(Output::Report(Box::new(report(parse(body)?, progress)?))),
    }
}

fn generic_mid(req: &GenericMidRequest) -> ApiResult<DesignResult> {
    Ok(design::solve_generic_mid(req.n, req.m, req.tau, req.s0)?)
}

fn generic_crrid(req: &GenericCrridRequest) -> ApiResult<DesignResult> {
    let mut roots = req.roots.clone();
    if roots.iter().any(|r| r.is_nan()) {
        return Err(ApiError::bad_input("roots must be finite"));
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(design::solve_generic_crrid(req.n, req.m, req.tau, &roots)?)
}

fn control_mid(req: &ControlMidRequest) -> ApiResult<Vec<DesignResult>> {
    let plant = ControlPlant::new(req.n, req.m, req.a.clone())?;
    Ok(design::solve_control_mid(&plant, req.given, req.window)?)
}

fn report(req: ReportRequest, progress: &Progress) -> ApiResult<Report> {
    let design = match &req.design {
        DesignRequest::GenericMid(r) => generic_mid(r)?,
        DesignRequest::GenericCrrid(r) => generic_crrid(r)?,
        DesignRequest::ControlMid(r) => control_mid(r)?.remove(0),
    };
    let rect = match req.rect {
        Some(r) => r,
        None => ComplexRectangle::new(-500.0, 500.0, -500.0, 500.0)?,
    };
    let q = &design.quasipolynomial;
    let roots = rootfinder::find_roots_with(q, &rect, progress)?;
    let dominance = rootfinder::certify_dominance(&roots, design.assigned_root)?;
    let trajectory = match &req.simulation {
        Some(sim) => Some(
            simulate::simulate_with(q, &sim.ic, sim.t_end, sim.steps, progress)?
                .decimated(MAX_TRAJECTORY_POINTS),
        ),
        None => None,
    };
    Ok(Report {
        design,
        roots,
        dominance,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn run(ep: Endpoint, body: Value) -> ApiResult<Value> {
        handle(ep, body, &Defaults::default(), &Progress::new()).map(|o| o.to_json())
    }

    #[test]
    fn error_codes_serialize_snake_case() {
        for (code, s) in [
            (ErrorCode::NoAdmissiblePoint, "no_admissible_point"),
            (ErrorCode::BadInput, "bad_input"),
            (ErrorCode::DeadlineExceeded, "deadline_exceeded"),
        ] {
            assert_eq!(serde_json::to_value(code).unwrap(), json!(s));
            assert_eq!(code.as_str(), s);
        }
    }

    #[test]
    fn every_core_error_has_one_code() {
        let cases = [
            (Error::InvalidInput("x".into()), ErrorCode::BadInput),
            (Error::SingularSystem { condition: 1e13 }, ErrorCode::SingularSystem),
            (
                Error::NoAdmissiblePoint {
                    lower: -1.0,
                    upper: 0.0,
                },
                ErrorCode::NoAdmissiblePoint,
            ),
            (Error::ContourTooClose { re: 0.0, im: 0.0 }, ErrorCode::ContourTooClose),
            (Error::RootOnBoundary { retries: 8 }, ErrorCode::RootOnBoundary),
            (Error::ConvergenceFailure("x".into()), ErrorCode::ConvergenceFailure),
            (Error::AssignedRootMissing { s0: 0.0 }, ErrorCode::AssignedRootMissing),
            (
                Error::InvalidPerturbation {
                    tau: 1.0,
                    epsilon: 1.0,
                    k: 1,
                },
                ErrorCode::InvalidPerturbation,
            ),
            (Error::BlowUp { time: 1.0 }, ErrorCode::BlowUp),
            (
                Error::Cancelled {
                    completed: 1,
                    total: 2,
                },
                ErrorCode::DeadlineExceeded,
            ),
        ];
        for (e, code) in cases {
            assert_eq!(ApiError::from(e).code, code);
        }
    }

    #[test]
    fn crrid_sorts_roots() {
        let a = run(Endpoint::GenericCrrid, json!({"n":1,"m":0,"tau":1,"roots":[-1,-2]})).unwrap();
        let b = run(Endpoint::GenericCrrid, json!({"n":1,"m":0,"tau":1,"roots":[-2,-1]})).unwrap();
        assert_eq!(a, b);
        let b0 = a["quasipolynomial"]["b"][0].as_f64().unwrap();
        assert!((b0 - 0.21409).abs() < 1e-5);
    }

    #[test]
    fn deadline_field_is_stripped() {
        let mut body = json!({"n":1,"deadline_ms":50});
        assert_eq!(take_deadline(&mut body).unwrap(), Some(50));
        assert_eq!(body, json!({"n":1}));
        let mut bad = json!({"deadline_ms":-1});
        assert!(take_deadline(&mut bad).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = run(Endpoint::GenericMid, json!({"n":1,"m":0,"tau":1,"s0":0,"extra":1})).unwrap_err();
        assert_eq!(err.code, ErrorCode::BadInput);
    }

    #[test]
    fn csv_only_for_tabular_outputs() {
        let d = handle(
            Endpoint::GenericMid,
            json!({"n":1,"m":0,"tau":1,"s0":0}),
            &Defaults::default(),
            &Progress::new(),
        )
        .unwrap();
        assert!(d.to_csv().is_none());
    }
}
