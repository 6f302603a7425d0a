//! Single-step convergence study: start from the exact steady state, take
//! one step, and fit the log-log slope of the error in each h-scaled
//! derivative block.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::coefficients::ObreshkovScheme;
use crate::dae::LinearDae;
use crate::error::OrderError;
use crate::integrator::{initial_state_from_steady_state, Stepper};
use crate::pencil::{weierstrass, PencilOptions};
use crate::steady_state::ac_solve;

pub const MIN_FIT_SAMPLES: usize = 4;
pub const DEFAULT_POINTS: usize = 10;
pub const DEFAULT_TOLERANCE: f64 = 0.2;
/// Errors below `FLOOR_FACTOR * eps * ||x_ss(h)||` are treated as roundoff.
pub const FLOOR_FACTOR: f64 = 1e3;

/// Local order predicted for derivative block `i` of scheme `(l, m)` on a
/// DAE of index `k`.
pub fn predicted_order(l: usize, m: usize, k: usize, i: usize) -> usize {
    if k > 0 && m < k + i {
        (l + m + 2).saturating_sub(k)
    } else {
        l + m + 1 + i
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSample {
    pub h: f64,
    pub i: usize,
    pub error: f64,
    pub below_floor: bool,
}

fn check_grid(h_values: &[f64]) -> Result<(), OrderError> {
    if h_values.is_empty() {
        return Err(OrderError::Grid("no step sizes".into()));
    }
    if h_values.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(OrderError::Grid("step sizes must be positive and finite".into()));
    }
    if h_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OrderError::Grid("step sizes must be strictly descending".into()));
    }
    Ok(())
}

/// One step from the exact steady state at `t = 0` for each `h`, returning
/// `||h^i x_1^(i) - h^i x_ss^(i)(h)||` for `i = 0..=m`, ordered by `h` and
/// then `i`.
pub fn one_step_errors(
    dae: &LinearDae,
    scheme: &ObreshkovScheme,
    h_values: &[f64],
) -> Result<Vec<ErrorSample>, OrderError> {
    check_grid(h_values)?;
    let phasor = ac_solve(dae)?;
    let mut samples = Vec::with_capacity(h_values.len() * (scheme.m() + 1));
    for &h in h_values {
        let start = initial_state_from_steady_state(&phasor, scheme, h);
        let next = Stepper::new(dae, scheme, h)?.advance(&start)?;
        let floor = FLOOR_FACTOR * f64::EPSILON * phasor.value(h).norm();
        for i in 0..=scheme.m() {
            let exact = phasor.derivative(i, h) * h.powi(i as i32);
            let error = (&next.scaled[i] - exact).norm();
            samples.push(ErrorSample {
                h,
                i,
                error,
                below_floor: error <= floor,
            });
        }
    }
    Ok(samples)
}

/// Least-squares slope of `log10(y)` against `log10(x)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope over the samples above the roundoff floor. All samples are
/// expected to share one derivative order.
pub fn fit_slope(samples: &[ErrorSample]) -> Result<f64, OrderError> {
    let order = samples.first().map_or(0, |s| s.i);
    let usable: Vec<&ErrorSample> = samples.iter().filter(|s| !s.below_floor).collect();
    let distinct_h = {
        let mut hs: Vec<f64> = usable.iter().map(|s| s.h).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        hs.len()
    };
    if usable.len() < MIN_FIT_SAMPLES || distinct_h < 2 {
        return Err(OrderError::TooFewSamples {
            order,
            usable: usable.len(),
        });
    }
    let h: Vec<f64> = usable.iter().map(|s| s.h).collect();
    let e: Vec<f64> = usable.iter().map(|s| s.error).collect();
    Ok(log_log_slope(&h, &e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Absolute bounds; `None` uses `1e-3` and `1e-2` source periods.
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub points: usize,
    pub tolerance: f64,
    pub pencil: PencilOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            h_min: None,
            h_max: None,
            points: DEFAULT_POINTS,
            tolerance: DEFAULT_TOLERANCE,
            pencil: PencilOptions::default(),
        }
    }
}

/// `2 pi / omega`, or 1 for a constant source.
pub fn source_period(omega: f64) -> f64 {
    if omega > 0.0 {
        2.0 * PI / omega
    } else {
        1.0
    }
}

impl StudyOptions {
    /// Log-spaced step sizes from `h_max` down to `h_min`.
    pub fn grid(&self, omega: f64) -> Result<Vec<f64>, OrderError> {
        let period = source_period(omega);
        let h_min = self.h_min.unwrap_or(1e-3 * period);
        let h_max = self.h_max.unwrap_or(1e-2 * period);
        if !(h_min > 0.0 && h_max.is_finite()) {
            return Err(OrderError::Grid("step bounds must be positive and finite".into()));
        }
        if self.points < 8 {
            return Err(OrderError::Grid(format!(
                "at least 8 points are needed, got {}",
                self.points
            )));
        }
        if h_max / h_min < 10.0 * (1.0 - 1e-12) {
            return Err(OrderError::Grid(format!(
                "grid [{h_min}, {h_max}] spans less than one decade"
            )));
        }
        let (a, b) = (h_max.log10(), h_min.log10());
        let last = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|j| 10f64.powf(a + (b - a) * j as f64 / last))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Pass,
    Fail,
    /// Too few samples above the roundoff floor to measure a slope.
    BelowFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub i: usize,
    pub slope: Option<f64>,
    pub predicted: usize,
    pub usable_samples: usize,
    pub status: FitStatus,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudyReport {
    pub l: usize,
    pub m: usize,
    pub k: usize,
    pub omega: f64,
    pub tolerance: f64,
    pub orders: Vec<OrderFit>,
    pub samples: Vec<ErrorSample>,
}

impl OrderStudyReport {
    /// True unless some measured slope misses its prediction.
    pub fn all_pass(&self) -> bool {
        self.orders.iter().all(|o| o.pass)
    }

    pub fn fit(&self, i: usize) -> Option<&OrderFit> {
        self.orders.iter().find(|o| o.i == i)
    }

    pub fn slope(&self, i: usize) -> Option<f64> {
        self.fit(i).and_then(|o| o.slope)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,i,error,log10_h,log10_error\n");
        for s in &self.samples {
            writeln!(
                out,
                "{:e},{},{:e},{},{}",
                s.h,
                s.i,
                s.error,
                s.h.log10(),
                s.error.log10()
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Builds the report from precomputed samples.
pub fn evaluate(
    samples: Vec<ErrorSample>,
    scheme: &ObreshkovScheme,
    k: usize,
    omega: f64,
    tolerance: f64,
) -> OrderStudyReport {
    let (l, m) = (scheme.l(), scheme.m());
    let orders = (0..=m)
        .map(|i| {
            let per_i: Vec<ErrorSample> = samples.iter().filter(|s| s.i == i).copied().collect();
            let usable = per_i.iter().filter(|s| !s.below_floor).count();
            let predicted = predicted_order(l, m, k, i);
            let slope = fit_slope(&per_i).ok();
            let status = match slope {
                None => FitStatus::BelowFloor,
                Some(s) if (s - predicted as f64).abs() <= tolerance => FitStatus::Pass,
                Some(_) => FitStatus::Fail,
            };
            OrderFit {
                i,
                slope,
                predicted,
                usable_samples: usable,
                status,
                pass: status != FitStatus::Fail,
            }
        })
        .collect();
    OrderStudyReport {
        l,
        m,
        k,
        omega,
        tolerance,
        orders,
        samples,
    }
}

pub fn run_study(
    dae: &LinearDae,
    scheme: &ObreshkovScheme,
    opts: &StudyOptions,
) -> Result<OrderStudyReport, OrderError> {
    let k = weierstrass(dae.c(), dae.g(), opts.pencil)?.index;
    let grid = opts.grid(dae.omega())?;
    let samples = one_step_errors(dae, scheme, &grid)?;
    Ok(evaluate(samples, scheme, k, dae.omega(), opts.tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{builtin_system, BuiltinKind, Sinusoid};
    use nalgebra::{DMatrix, DVector};

    fn synthetic(exponent: f64, scale: f64) -> Vec<ErrorSample> {
        (0..10)
            .map(|j| {
                let h = 10f64.powf(-2.0 - j as f64 / 9.0);
                ErrorSample {
                    h,
                    i: 0,
                    error: scale * h.powf(exponent),
                    below_floor: false,
                }
            })
            .collect()
    }

    #[test]
    fn predictions() {
        assert_eq!(predicted_order(1, 2, 3, 0), 2);
        assert_eq!(predicted_order(1, 3, 3, 0), 5);
        assert_eq!(predicted_order(0, 2, 2, 0), 3);
        assert_eq!(predicted_order(0, 2, 2, 1), 2);
        assert_eq!(predicted_order(1, 1, 0, 0), 3);
        assert_eq!(predicted_order(1, 1, 0, 1), 4);
        assert_eq!(predicted_order(1, 3, 1, 0), 5);
    }

    #[test]
    fn slope_of_exact_power_laws() {
        assert!((fit_slope(&synthetic(3.0, 1.0)).unwrap() - 3.0).abs() < 1e-6);
        assert!((fit_slope(&synthetic(2.5, 2.0)).unwrap() - 2.5).abs() < 1e-6);
    }

    #[test]
    fn too_few_samples() {
        let mut s = synthetic(2.0, 1.0);
        for x in s.iter_mut().skip(3) {
            x.below_floor = true;
        }
        assert!(matches!(
            fit_slope(&s),
            Err(OrderError::TooFewSamples { usable: 3, .. })
        ));
    }

    #[test]
    fn default_grid_spans_a_decade() {
        let g = StudyOptions::default().grid(2.0 * PI).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 1e-2).abs() < 1e-16 && (g[9] - 1e-3).abs() < 1e-17);
        let short = StudyOptions {
            h_min: Some(1e-3),
            h_max: Some(5e-3),
            ..Default::default()
        };
        assert!(short.grid(1.0).is_err());
        let sparse = StudyOptions {
            points: 5,
            ..Default::default()
        };
        assert!(sparse.grid(1.0).is_err());
    }

    #[test]
    fn constant_solution_is_exact() {
        let dae = LinearDae::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 2.0]),
            Sinusoid::new(DVector::from_vec(vec![1.0, 0.5]), DVector::zeros(2), 0.0),
        )
        .unwrap();
        let scheme = ObreshkovScheme::new(1, 2).unwrap();
        let errs = one_step_errors(&dae, &scheme, &[0.1, 0.05]).unwrap();
        assert!(errs.iter().filter(|s| s.i == 0).all(|s| s.error <= 1e-13));
    }

    #[test]
    fn halving_h_on_ode_with_trapezoid() {
        let sys = builtin_system(BuiltinKind::Ode, 42);
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let h = 0.02;
        let e = one_step_errors(&sys.dae, &scheme, &[h, h / 2.0]).unwrap();
        let ratio = e[0].error / e[2].error;
        assert!((ratio / 8.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn algebraic_blocks_vanish() {
        for k in 1..=3 {
            let sys = builtin_system(BuiltinKind::Algebraic(k), 42);
            let scheme = ObreshkovScheme::new(1, 3).unwrap();
            let e = one_step_errors(&sys.dae, &scheme, &[0.05, 0.01]).unwrap();
            let scale = ac_solve(&sys.dae).unwrap().value(0.0).norm().max(1.0);
            for s in e.iter().filter(|s| 3 - s.i >= k && s.i <= 3) {
                assert!(s.error <= 1e-12 * scale, "k {k} i {} err {}", s.i, s.error);
            }
        }
    }

    #[test]
    fn report_outputs() {
        let sys = builtin_system(BuiltinKind::Ode, 42);
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        let r = run_study(&sys.dae, &scheme, &StudyOptions::default()).unwrap();
        assert_eq!(r.k, 0);
        assert_eq!(r.samples.len(), 20);
        assert!((r.slope(0).unwrap() - 3.0).abs() <= 0.2);
        let csv = r.to_csv();
        assert!(csv.starts_with("h,i,error,log10_h,log10_error\n"));
        assert_eq!(csv.lines().count(), 21);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["orders"][0]["predicted"], 3);
    }

    #[test]
    fn bad_grids() {
        let sys = builtin_system(BuiltinKind::Ode, 1);
        let scheme = ObreshkovScheme::new(1, 1).unwrap();
        assert!(one_step_errors(&sys.dae, &scheme, &[0.01, 0.02]).is_err());
        assert!(one_step_errors(&sys.dae, &scheme, &[0.01, -0.02]).is_err());
        assert!(one_step_errors(&sys.dae, &scheme, &[]).is_err());
    }
}
