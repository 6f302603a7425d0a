//! Browser demo. The plain functions below are target independent and
//! tested natively; on wasm32 they are re-exported through wasm-bindgen.

use num_complex::Complex64;
use serde::Serialize;

use obreshkov::coefficients::ObreshkovScheme;
use obreshkov::dae::{builtin_system, BuiltinKind};
use obreshkov::integrator::{initial_state_from_steady_state, march};
use obreshkov::order_lab::{run_study, StudyOptions};
use obreshkov::steady_state::ac_solve;

/// Largest step count the trajectory view will run.
pub const MAX_STEPS: usize = 20_000;

/// Largest grid edge for the stability map.
pub const MAX_GRID: usize = 1024;

fn scheme(l: usize, m: usize) -> Result<ObreshkovScheme, String> {
    ObreshkovScheme::new(l, m).map_err(|e| e.to_string())
}

fn kind(name: &str) -> Result<BuiltinKind, String> {
    name.parse()
}

/// `|R(z)|` on a `nx` by `ny` grid over the given box, row-major from the
/// top (largest imaginary part). Poles come back as `NaN`.
#[allow(clippy::too_many_arguments)]
pub fn stability_map(
    l: usize,
    m: usize,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, String> {
    let s = scheme(l, m)?;
    if !(2..=MAX_GRID).contains(&nx) || !(2..=MAX_GRID).contains(&ny) {
        return Err(format!("grid must be between 2 and {MAX_GRID} per side"));
    }
    if !(re_min < re_max && im_min < im_max) {
        return Err("empty region".into());
    }
    let dx = (re_max - re_min) / (nx - 1) as f64;
    let dy = (im_max - im_min) / (ny - 1) as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let im = im_max - row as f64 * dy;
        for col in 0..nx {
            let z = Complex64::new(re_min + col as f64 * dx, im);
            out.push(s.amplification(z).map_or(f64::NAN, |r| r.norm()));
        }
    }
    Ok(out)
}

/// Order study on a builtin benchmark, as the JSON report.
pub fn order_study(kind_name: &str, seed: u64, l: usize, m: usize) -> Result<String, String> {
    let sys = builtin_system(kind(kind_name)?, seed);
    let report = run_study(&sys.dae, &scheme(l, m)?, &StudyOptions::default())
        .map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// `computed[j][n]`: component `j` at step `n`.
    pub computed: Vec<Vec<f64>>,
    pub exact: Vec<Vec<f64>>,
    pub max_deviation: f64,
}

/// Marches a builtin from its steady state with every component of the
/// starting value shifted by `offset`, next to the exact steady state.
/// A nonzero offset is inconsistent for a DAE; how fast it dies out depends
/// on the scheme.
pub fn trajectory(
    kind_name: &str,
    seed: u64,
    l: usize,
    m: usize,
    h: f64,
    steps: usize,
    offset: f64,
) -> Result<Trajectory, String> {
    if !(h > 0.0 && h.is_finite()) {
        return Err("h must be positive".into());
    }
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be between 1 and {MAX_STEPS}"));
    }
    let dae = builtin_system(kind(kind_name)?, seed).dae;
    let s = scheme(l, m)?;
    let phasor = ac_solve(&dae).map_err(|e| e.to_string())?;
    let mut start = initial_state_from_steady_state(&phasor, &s, h);
    start.scaled[0].add_scalar_mut(offset);
    let mut states = vec![start.clone()];
    states.extend(march(&dae, &s, &start, h, steps).map_err(|e| e.to_string())?);

    let n = dae.dim();
    let mut out = Trajectory {
        t: Vec::with_capacity(states.len()),
        computed: vec![Vec::with_capacity(states.len()); n],
        exact: vec![Vec::with_capacity(states.len()); n],
        max_deviation: 0.0,
    };
    for st in &states {
        let exact = phasor.value(st.t);
        out.t.push(st.t);
        for j in 0..n {
            out.computed[j].push(st.value()[j]);
            out.exact[j].push(exact[j]);
        }
        out.max_deviation = out.max_deviation.max((st.value() - exact).amax());
    }
    Ok(out)
}

pub fn trajectory_json(
    kind_name: &str,
    seed: u64,
    l: usize,
    m: usize,
    h: f64,
    steps: usize,
    offset: f64,
) -> Result<String, String> {
    let tr = trajectory(kind_name, seed, l, m, h, steps, offset)?;
    serde_json::to_string(&tr).map_err(|e| e.to_string())
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    fn js(err: String) -> JsValue {
        JsValue::from_str(&err)
    }

    #[wasm_bindgen(js_name = stabilityMap)]
    #[allow(clippy::too_many_arguments)]
    pub fn stability_map(
        l: usize,
        m: usize,
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Vec<f64>, JsValue> {
        super::stability_map(l, m, re_min, re_max, im_min, im_max, nx, ny).map_err(js)
    }

    #[wasm_bindgen(js_name = orderStudy)]
    pub fn order_study(kind: &str, seed: u32, l: usize, m: usize) -> Result<String, JsValue> {
        super::order_study(kind, seed as u64, l, m).map_err(js)
    }

    #[wasm_bindgen(js_name = trajectory)]
    pub fn trajectory(
        kind: &str,
        seed: u32,
        l: usize,
        m: usize,
        h: f64,
        steps: usize,
        offset: f64,
    ) -> Result<String, JsValue> {
        super::trajectory_json(kind, seed as u64, l, m, h, steps, offset).map_err(js)
    }
}
