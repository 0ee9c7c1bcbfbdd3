//! Browser bindings. Every export takes and returns a JSON string; errors
//! are thrown as `{"code", "message"}` objects serialized to a string.
//!
//! The `*_json` functions are the plain Rust entry points and are what the
//! native tests call.

use qpdesign::design::{self, ControlGiven, ControlPlant, SearchWindow};
use qpdesign::rootfinder;
use qpdesign::simulate::{self, InitialCondition};
use qpdesign::{ComplexRectangle, Error, Quasipolynomial};
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_PLOT_POINTS: usize = 4000;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdmissibilityRequest {
    n: usize,
    m: usize,
    a: Vec<f64>,
    s0_min: f64,
    tau_max: f64,
    #[serde(default = "default_grid")]
    grid: [usize; 2],
}

fn default_grid() -> [usize; 2] {
    [200, 200]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignRequest {
    n: usize,
    m: usize,
    a: Vec<f64>,
    tau: f64,
    rect: ComplexRectangle,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    q: Quasipolynomial,
    ic: InitialCondition,
    #[serde(rename = "T")]
    t_end: f64,
    #[serde(default = "default_steps")]
    steps: usize,
}

fn default_steps() -> usize {
    simulate::DEFAULT_STEPS_PER_DELAY
}

fn error_json(code: &str, message: impl ToString) -> String {
    json!({"code": code, "message": message.to_string()}).to_string()
}

fn domain(e: Error) -> String {
    let code = match &e {
        Error::InvalidInput(_) => "bad_input",
        Error::SingularSystem { .. } => "singular_system",
        Error::NoAdmissiblePoint { .. } => "no_admissible_point",
        Error::ContourTooClose { .. } => "contour_too_close",
        Error::RootOnBoundary { .. } => "root_on_boundary",
        Error::InvalidPerturbation { .. } => "invalid_perturbation",
        Error::BlowUp { .. } => "blow_up",
        Error::ConvergenceFailure(_) => "convergence_failure",
        Error::AssignedRootMissing { .. } => "assigned_root_missing",
        Error::Cancelled { .. } => "deadline_exceeded",
    };
    error_json(code, e)
}

fn parse<T: for<'de> Deserialize<'de>>(input: &str) -> Result<T, String> {
    serde_json::from_str(input).map_err(|e| error_json("bad_input", e))
}

/// Zero-level curves of the admissibility residual, without the raw grid.
pub fn admissibility_json(input: &str) -> Result<String, String> {
    let req: AdmissibilityRequest = parse(input)?;
    let plant = ControlPlant::new(req.n, req.m, req.a).map_err(domain)?;
    let c = design::admissibility_contour(&plant, req.s0_min, req.tau_max, req.grid).map_err(domain)?;
    Ok(json!({
        "rectangle": c.rectangle,
        "resolution": c.resolution,
        "polylines": c.polylines,
    })
    .to_string())
}

/// Control-oriented MID for a given delay, followed by the spectrum in
/// `rect` and a dominance check of the assigned root.
pub fn design_json(input: &str) -> Result<String, String> {
    let req: DesignRequest = parse(input)?;
    let plant = ControlPlant::new(req.n, req.m, req.a).map_err(domain)?;
    let designs =
        design::solve_control_mid(&plant, ControlGiven::Delay(req.tau), SearchWindow::default()).map_err(domain)?;
    let d = &designs[0];
    let roots = rootfinder::find_roots(&d.quasipolynomial, &req.rect).map_err(domain)?;
    let dominance = rootfinder::certify_dominance(&roots, d.assigned_root).map_err(domain)?;
    let out: Value = json!({"design": d, "roots": roots, "dominance": dominance});
    Ok(out.to_string())
}

/// Euler trajectory, thinned to at most a few thousand points for plotting.
pub fn simulate_json(input: &str) -> Result<String, String> {
    let req: SimulateRequest = parse(input)?;
    let tr = simulate::simulate(&req.q, &req.ic, req.t_end, req.steps).map_err(domain)?;
    serde_json::to_string(&tr.decimated(MAX_PLOT_POINTS)).map_err(|e| error_json("internal", e))
}

#[wasm_bindgen]
pub fn admissibility(input: &str) -> Result<String, JsValue> {
    admissibility_json(input).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn design(input: &str) -> Result<String, JsValue> {
    design_json(input).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn simulate(input: &str) -> Result<String, JsValue> {
    simulate_json(input).map_err(JsValue::from)
}
