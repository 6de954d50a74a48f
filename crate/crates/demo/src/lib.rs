//! Browser bindings for `streetperc`.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. The plain functions are usable natively too.

use serde::{Deserialize, Serialize};
use serde_json::json;
use streetperc::experiments::{
    extract_double_critical, hop_bound, linspace, pole_capacity, sweep, FitError, LogisticFit,
    SweepParam,
};
use streetperc::io::RealizationDump;
use streetperc::percolation::realize;
use streetperc::{NetworkParams, Window};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealizationRequest {
    pub params: NetworkParams,
    pub users_per_street: Option<f64>,
    pub window_side: f64,
    pub seed: u64,
    pub replication: u64,
}

impl Default for RealizationRequest {
    fn default() -> Self {
        Self {
            params: NetworkParams::default(),
            users_per_street: None,
            window_side: 600.0,
            seed: 1,
            replication: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRequest {
    pub params: NetworkParams,
    pub window_side: f64,
    pub seed: u64,
    pub replications: usize,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Default for SweepRequest {
    fn default() -> Self {
        Self {
            params: NetworkParams::default(),
            window_side: 600.0,
            seed: 1,
            replications: 20,
            from: 0.0,
            to: 10.0,
            steps: 11,
        }
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    mu_star: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    error: Option<String>,
}

impl From<&Result<LogisticFit, FitError>> for FitSummary {
    fn from(r: &Result<LogisticFit, FitError>) -> Self {
        match r {
            Ok(f) => Self {
                mu_star: Some(f.mu_star),
                a: Some(f.a),
                b: Some(f.b),
                error: None,
            },
            Err(e) => Self {
                mu_star: None,
                a: None,
                b: None,
                error: Some(e.to_string()),
            },
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    if text.trim().is_empty() {
        return serde_json::from_str("{}").map_err(|e| e.to_string());
    }
    serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// One realization as a [`RealizationDump`].
pub fn realization_json(request: &str) -> Result<String, String> {
    let req: RealizationRequest = parse(request)?;
    let mut params = req.params;
    if let Some(u) = req.users_per_street {
        params = params.with_users_per_street(u);
    }
    let window = Window::new(req.window_side).map_err(|e| e.to_string())?;
    let r = realize(&params, &window, req.seed, req.replication).map_err(|e| e.to_string())?;
    to_json(&RealizationDump::new(&r, &params, &window))
}

/// Connection probability over a grid of users per street, with the
/// rising and falling logistic fits.
pub fn sweep_users_json(request: &str) -> Result<String, String> {
    let req: SweepRequest = parse(request)?;
    let window = Window::new(req.window_side).map_err(|e| e.to_string())?;
    let grid = linspace(req.from, req.to, req.steps).map_err(|e| e.to_string())?;
    let curve = sweep(
        &req.params,
        SweepParam::UsersPerStreet,
        &grid,
        &window,
        req.replications,
        req.seed,
    )
    .map_err(|e| e.to_string())?;
    let double = extract_double_critical(&curve.samples(), req.replications);
    let fits = double.as_ref().map(|d| {
        json!({
            "peak_value": d.peak_value,
            "peak_probability": d.peak_probability,
            "rising": FitSummary::from(&d.rising),
            "falling": FitSummary::from(&d.falling),
            "window": d.window(),
        })
    });
    to_json(&json!({ "points": curve.points, "fits": fits }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivedRequest {
    pub params: NetworkParams,
    pub users_per_street: Option<f64>,
}

/// Derived quantities plus the pole capacity and hop bound.
pub fn derived_json(request: &str) -> Result<String, String> {
    let req: DerivedRequest = parse(request)?;
    let params = match req.users_per_street {
        Some(u) => req.params.with_users_per_street(u),
        None => req.params,
    };
    let d = params.derive().map_err(|e| e.to_string())?;
    to_json(&json!({
        "derived": d,
        "pole_capacity": pole_capacity(params.theta, params.threshold),
        "hop_bound": hop_bound(d.hops_per_street, params.theta, params.threshold),
    }))
}

#[wasm_bindgen(js_name = realization)]
pub fn realization_js(request: &str) -> Result<String, JsError> {
    realization_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sweepUsers)]
pub fn sweep_users_js(request: &str) -> Result<String, JsError> {
    sweep_users_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = derived)]
pub fn derived_js(request: &str) -> Result<String, JsError> {
    derived_json(request).map_err(|e| JsError::new(&e))
}
