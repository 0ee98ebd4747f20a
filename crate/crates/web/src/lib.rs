//! Browser bindings. Every export returns a JSON string so the page can
//! stay plain JavaScript.

use kflip_core::bounds::chebyshev_lower_bound;
use kflip_core::coupling::coupling_tail_curve;
use kflip_core::exactdist::{
    flip_weight_kernel, l2_to_uniform, tail_from_touched, touched_weight_kernel, tv_to_uniform,
    zmn_tv_from_touched, Evolution, WeightDistribution,
};
use kflip_core::spectrum::{cube_spectrum, zmn_l2_upper_bound};
use kflip_core::{Backend, CyclicWalkSpec, Error, WalkSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps a single call well under a second in the browser.
pub const MAX_N: usize = 2000;
pub const MAX_STEPS: u64 = 5000;

#[derive(Serialize)]
pub struct CurvePoint {
    pub l: u64,
    pub tv: f64,
    /// Half the square root of the l2 distance, an upper bound on TV.
    pub l2_bound: f64,
    pub chebyshev: Option<f64>,
    pub coupling_tail: Option<f64>,
}

#[derive(Serialize)]
pub struct Curve {
    pub n: usize,
    pub k: usize,
    pub points: Vec<CurvePoint>,
}

#[derive(Serialize)]
pub struct CyclicPoint {
    pub l: u64,
    pub tv: f64,
    pub separation_tail: f64,
    pub l2_bound: f64,
}

#[derive(Serialize)]
pub struct CyclicCurve {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub points: Vec<CyclicPoint>,
}

fn check_size(n: usize, steps: u64) -> Result<(), Error> {
    if n > MAX_N || steps > MAX_STEPS {
        return Err(Error::Size(format!(
            "demo limits are n <= {MAX_N} and steps <= {MAX_STEPS}"
        )));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

pub fn tv_curve_json(n: usize, k: usize, steps: u64) -> Result<String, Error> {
    check_size(n, steps)?;
    let spec = WalkSpec::new(n, k)?;
    let kernel = flip_weight_kernel(&spec, Backend::Float);
    let start = WeightDistribution::point_mass(n, 0, Backend::Float);
    // Only defined for odd k <= n/2; absent otherwise.
    let tails = coupling_tail_curve(&spec, steps, Backend::Float).ok();
    let points = Evolution::new(start, &kernel)?
        .take(steps as usize + 1)
        .enumerate()
        .map(|(l, d)| {
            let l = l as u64;
            let l2 = l2_to_uniform(n, &d).to_f64();
            CurvePoint {
                l,
                tv: tv_to_uniform(n, &d).to_f64(),
                l2_bound: (0.5 * l2.sqrt()).min(1.0),
                chebyshev: chebyshev_lower_bound(n, k, l, None, Backend::Float)
                    .ok()
                    .map(|c| c.value.to_f64()),
                coupling_tail: tails.as_ref().map(|t| t[l as usize].to_f64()),
            }
        })
        .collect();
    Ok(to_json(&Curve { n, k, points }))
}

pub fn spectrum_json(n: usize, k: usize) -> Result<String, Error> {
    check_size(n, 0)?;
    Ok(to_json(&cube_spectrum(&WalkSpec::new(n, k)?)))
}

pub fn cyclic_curve_json(n: usize, m: usize, k: usize, steps: u64) -> Result<String, Error> {
    check_size(n, steps)?;
    let spec = CyclicWalkSpec::new(n, m, k)?;
    let kernel = touched_weight_kernel(&spec, Backend::Float);
    let start = WeightDistribution::point_mass(n, 0, Backend::Float);
    let points = Evolution::new(start, &kernel)?
        .take(steps as usize + 1)
        .enumerate()
        .map(|(l, d)| CyclicPoint {
            l: l as u64,
            tv: zmn_tv_from_touched(&spec, &d).to_f64(),
            separation_tail: tail_from_touched(&spec, &d).to_f64(),
            l2_bound: (0.5
                * zmn_l2_upper_bound(&spec, l as u64, Backend::Float)
                    .to_f64()
                    .sqrt())
            .min(1.0),
        })
        .collect();
    Ok(to_json(&CyclicCurve { n, m, k, points }))
}

fn js_err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn tv_curve(n: usize, k: usize, steps: u32) -> Result<String, JsValue> {
    tv_curve_json(n, k, steps as u64).map_err(js_err)
}

#[wasm_bindgen]
pub fn spectrum(n: usize, k: usize) -> Result<String, JsValue> {
    spectrum_json(n, k).map_err(js_err)
}

#[wasm_bindgen]
pub fn cyclic_curve(n: usize, m: usize, k: usize, steps: u32) -> Result<String, JsValue> {
    cyclic_curve_json(n, m, k, steps as u64).map_err(js_err)
}
