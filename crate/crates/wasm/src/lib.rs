//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The plain functions return JSON strings and are usable natively; the
//! `#[wasm_bindgen]` wrappers only convert errors into JS exceptions.

use serde_json::json;
use wasm_bindgen::prelude::*;

use mco_core::bounds::figure8;
use mco_core::characterize::classify_transition;
use mco_core::protocol::build_average_work_protocol;
use mco_core::{exact_work_distribution, QubitState, ThermalContext};

fn context(beta: f64, p_beta: f64) -> Result<ThermalContext, String> {
    ThermalContext::from_gibbs_population(beta, p_beta).map_err(|e| e.to_string())
}

/// `{"p_out": [...], "work_threshold": [...], "prob_pin_1_16": [...], ...}`.
pub fn figure8_curve(beta: f64, p_beta: f64, points: usize) -> Result<String, String> {
    let rows = figure8(&context(beta, p_beta)?, points).map_err(|e| e.to_string())?;
    let col = |f: &dyn Fn(&mco_core::bounds::Figure8Row) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Ok(json!({
        "p_out": col(&|r| r.p_out),
        "work_threshold": col(&|r| r.work_threshold),
        "prob_pin_1_16": col(&|r| r.probabilities[0]),
        "prob_pin_1_8": col(&|r| r.probabilities[1]),
        "prob_pin_3_16": col(&|r| r.probabilities[2]),
    })
    .to_string())
}

/// The classifier verdict as JSON.
pub fn classify(beta: f64, p_beta: f64, p_in: f64, p_out: f64) -> Result<String, String> {
    let c = classify_transition(p_in, p_out, &context(beta, p_beta)?).map_err(|e| e.to_string())?;
    Ok(c.to_json_value().to_string())
}

/// Exact work law of the average-work protocol from `p_in` to `p_out`:
/// `{"work": [...], "probability": [...], "mean": m, "free_energy_drop": d}`.
pub fn work_distribution(beta: f64, p_beta: f64, p_in: f64, p_out: f64, stage2_steps: usize) -> Result<String, String> {
    let ctx = context(beta, p_beta)?;
    let proto = build_average_work_protocol(p_in, p_out, ctx, stage2_steps).map_err(|e| e.to_string())?;
    let init = QubitState::new(p_in).map_err(|e| e.to_string())?;
    let d = exact_work_distribution(&proto, init).map_err(|e| e.to_string())?;
    let f = |p: f64| {
        let s = QubitState::new(p).map_err(|e| e.to_string())?;
        ctx.free_energy(s, ctx.e0()).map_err(|e| e.to_string())
    };
    Ok(json!({
        "work": d.atoms().iter().map(|a| a.0).collect::<Vec<_>>(),
        "probability": d.atoms().iter().map(|a| a.1).collect::<Vec<_>>(),
        "mean": d.mean(),
        "free_energy_drop": f(p_in)? - f(p_out)?,
    })
    .to_string())
}

#[wasm_bindgen(js_name = figure8Curve)]
pub fn figure8_curve_js(beta: f64, p_beta: f64, points: usize) -> Result<String, JsError> {
    figure8_curve(beta, p_beta, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = classify)]
pub fn classify_js(beta: f64, p_beta: f64, p_in: f64, p_out: f64) -> Result<String, JsError> {
    classify(beta, p_beta, p_in, p_out).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = workDistribution)]
pub fn work_distribution_js(
    beta: f64,
    p_beta: f64,
    p_in: f64,
    p_out: f64,
    stage2_steps: usize,
) -> Result<String, JsError> {
    work_distribution(beta, p_beta, p_in, p_out, stage2_steps).map_err(|e| JsError::new(&e))
}
