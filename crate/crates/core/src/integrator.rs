//! Time stepping of first-order systems with constraint-drift monitoring.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::algebroid::PhasePoint;
use crate::error::{Error, Result};
use crate::hamiltonian::{legendre_forward, legendre_inverse, HamiltonianConstraints, MomentumPoint};
use crate::linalg::{min_norm_correction, Vector};
use crate::nonholonomic::ConstrainedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
    Rk45,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Rk45 => "rk45",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Method::Rk4),
            "rk45" | "dopri5" => Ok(Method::Rk45),
            other => Err(Error::Config {
                field: "method".into(),
                message: format!("unknown method `{other}` (expected rk4 or rk45)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Fixed step for RK4, initial step for RK45.
    pub step: f64,
    pub method: Method,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            method: Method::Rk4,
            atol: 1e-9,
            rtol: 1e-9,
        }
    }
}

impl IntegratorOptions {
    pub fn rk4(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub step: f64,
    pub method: Method,
    pub system: String,
}

/// Sampled solution; `drift` is empty until a drift report is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub drift: Vec<f64>,
    pub metadata: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with header `t,<names>` and one row per sample, plus a `drift` column when available.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        let with_drift = self.drift.len() == self.len();
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().cloned());
        if with_drift {
            header.push("drift".into());
        }
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(f64::to_string));
            if with_drift {
                row.push(self.drift[k].to_string());
            }
            writeln!(w, "{}", row.join(",")).map_err(io)?;
        }
        Ok(())
    }
}

fn eval_checked<F>(field: &F, t: f64, y: &[f64], last: &[f64]) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let fail = |message: String| Error::Integration {
        time: t,
        message,
        last_state: last.to_vec(),
    };
    let d = field(y).map_err(|e| fail(e.to_string()))?;
    if d.len() != y.len() {
        return Err(fail(format!("field returned {} components for a state of length {}", d.len(), y.len())));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite derivative".into()));
    }
    Ok(d)
}

fn rk4_step<F>(field: &F, t: f64, y: &Vector, h: f64) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let last = y.as_slice();
    let k1 = eval_checked(field, t, last, last)?;
    let k2 = eval_checked(field, t, (y + &k1 * (h / 2.0)).as_slice(), last)?;
    let k3 = eval_checked(field, t, (y + &k2 * (h / 2.0)).as_slice(), last)?;
    let k4 = eval_checked(field, t, (y + &k3 * h).as_slice(), last)?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step: fifth-order solution and error estimate.
fn dopri_step<F>(field: &F, t: f64, y: &Vector, h: f64) -> Result<(Vector, Vector)>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let last = y.as_slice();
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if DP_A[s][j] != 0.0 {
                ys += kj * (h * DP_A[s][j]);
            }
        }
        k.push(eval_checked(field, t + DP_C[s] * h, ys.as_slice(), last)?);
    }
    let mut y5 = y.clone();
    let mut err = Vector::zeros(y.len());
    for s in 0..7 {
        y5 += &k[s] * (h * DP_B5[s]);
        err += &k[s] * (h * (DP_B5[s] - DP_B4[s]));
    }
    Ok((y5, err))
}

/// Integrates `dy/dt = field(y)` from `t0` to `t1`.
pub fn integrate<F>(field: F, y0: &[f64], t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    integrate_with(field, y0, t0, t1, opts, |_| Ok(()))
}

/// As [`integrate`], applying `post_step` to every accepted state (e.g. constraint projection).
pub fn integrate_with<F, P>(field: F, y0: &[f64], t0: f64, t1: f64, opts: &IntegratorOptions, post_step: P) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vector>,
    P: Fn(&mut Vec<f64>) -> Result<()>,
{
    if !(opts.step > 0.0) || !opts.step.is_finite() {
        return Err(Error::Config {
            field: "step".into(),
            message: format!("step must be positive, got {}", opts.step),
        });
    }
    if !(t1 > t0) {
        return Err(Error::Config {
            field: "t1".into(),
            message: format!("t1 must exceed t0 (t0 = {t0}, t1 = {t1})"),
        });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            time: t0,
            message: "non-finite initial state".into(),
            last_state: y0.to_vec(),
        });
    }
    let mut times = vec![t0];
    let mut states = vec![y0.to_vec()];
    let mut y = Vector::from_column_slice(y0);
    let accept = |y: &mut Vector, t: f64, states: &mut Vec<Vec<f64>>, times: &mut Vec<f64>| -> Result<()> {
        let mut v: Vec<f64> = y.iter().cloned().collect();
        post_step(&mut v).map_err(|e| Error::Integration {
            time: t,
            message: e.to_string(),
            last_state: states.last().cloned().unwrap_or_default(),
        })?;
        *y = Vector::from_column_slice(&v);
        times.push(t);
        states.push(v);
        Ok(())
    };
    match opts.method {
        Method::Rk4 => {
            let steps = (((t1 - t0) / opts.step) - 1e-9).ceil().max(1.0) as usize;
            for k in 0..steps {
                let t = t0 + k as f64 * opts.step;
                let tn = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * opts.step };
                let next = rk4_step(&field, t, &y, tn - t)?;
                y = next;
                accept(&mut y, tn, &mut states, &mut times)?;
            }
        }
        Method::Rk45 => {
            let mut t = t0;
            let mut h = opts.step.min(t1 - t0);
            while t < t1 {
                if t + h > t1 {
                    h = t1 - t;
                }
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Integration {
                        time: t,
                        message: "step size underflow".into(),
                        last_state: y.iter().cloned().collect(),
                    });
                }
                let (y5, err) = dopri_step(&field, t, &y, h)?;
                let norm = err
                    .iter()
                    .zip(y.iter().zip(y5.iter()))
                    .map(|(e, (a, b))| e.abs() / (opts.atol + opts.rtol * a.abs().max(b.abs())))
                    .fold(0.0, f64::max);
                if norm <= 1.0 {
                    t = if t1 - (t + h) <= 1e-14 * t1.abs().max(1.0) { t1 } else { t + h };
                    y = y5;
                    accept(&mut y, t, &mut states, &mut times)?;
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        drift: Vec::new(),
        metadata: TrajectoryMeta {
            step: opts.step,
            method: opts.method,
            system: String::new(),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub max_drift: f64,
    pub per_step: Vec<f64>,
}

/// Max-norm of `constraint(state)` at every sample.
pub fn drift_report_with<F>(traj: &Trajectory, constraint: F) -> Result<DriftReport>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let per_step = traj
        .states
        .iter()
        .map(|s| constraint(s).map(|v| v.amax()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DriftReport {
        max_drift: per_step.iter().cloned().fold(0.0, f64::max),
        per_step,
    })
}

/// Drift of a Lagrangian trajectory with states `[x, y]`.
pub fn drift_report(sys: &ConstrainedSystem, traj: &Trajectory) -> Result<DriftReport> {
    drift_report_with(traj, |s| sys.constraint_values(&PhasePoint::from_coords(sys.m(), s)))
}

/// Drift of a Hamiltonian trajectory with states `[x, p]`.
pub fn drift_report_momentum(hc: &HamiltonianConstraints, traj: &Trajectory) -> Result<DriftReport> {
    drift_report_with(traj, |s| hc.values(&MomentumPoint::from_coords(hc.sys.m(), s)))
}

/// Minimal-norm fibre correction onto the constraint set; the base point is unchanged.
pub fn project_to_constraint(sys: &ConstrainedSystem, p: &PhasePoint) -> Result<PhasePoint> {
    let (mu0, mu) = sys.constraints.eval(&p.x);
    let y = Vector::from_column_slice(&p.y);
    let resid = mu0 + &mu * &y;
    let dy = min_norm_correction(&mu, &resid, sys.tolerances.cond_tol)?;
    Ok(PhasePoint::new(p.x.clone(), (y + dy).iter().cloned().collect()))
}

/// Projection of a momentum state through the inverse Legendre map.
pub fn project_momentum(hc: &HamiltonianConstraints, q: &MomentumPoint) -> Result<MomentumPoint> {
    let l = hc.sys.lagrangian();
    let p = legendre_inverse(l, q, &hc.opts)?;
    Ok(legendre_forward(l, &project_to_constraint(&hc.sys, &p)?)?.0)
}
