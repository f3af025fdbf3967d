//! Exponentially weighted mild equation for `V = e^{g(t)|k|} psi` and
//! radius-of-analyticity estimates from spectral decay.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::mild::{duhamel_integral, gradient_dot_trajectory, ConvolutionPlan};
use crate::picard::{
    eta_from_inputs, run_gated, EtaBreakdown, EtaInputs, PicardSpace, SolveResult, SolveSpec,
    SpacePair,
};
use crate::spectral::{mode_norm, SpectrumField, SymbolTable, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `g(t) = a t^{1/4}`
    FourthRoot,
    /// `g(t) = b t`
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyWeight {
    pub kind: WeightKind,
    pub param: f64,
}

impl GevreyWeight {
    pub fn fourth_root(a: f64) -> Self {
        Self {
            kind: WeightKind::FourthRoot,
            param: a,
        }
    }

    pub fn linear(b: f64) -> Self {
        Self {
            kind: WeightKind::Linear,
            param: b,
        }
    }

    /// Identically zero weight, useful for comparisons with the plain solver.
    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        weight_value(self, t)
    }

    /// Rejects non-finite or negative parameters, and linear rates at or
    /// above `M2 / 2`.
    pub fn check_admissible(&self, table: &SymbolTable) -> Result<()> {
        if !(self.param.is_finite() && self.param >= 0.0) {
            return Err(KsError::InvalidParameter(format!(
                "weight parameter must be finite and non-negative, got {}",
                self.param
            )));
        }
        if self.kind == WeightKind::Linear && self.param >= 0.5 * table.m2 {
            return Err(KsError::InadmissibleWeight {
                rate: self.param,
                limit: 0.5 * table.m2,
            });
        }
        Ok(())
    }

    /// Additive constant in `g(t)|k| - t sigma(k) <= C - M2 t |k|^4 / 2` on
    /// damped modes: `C(a)` for the fourth root, 0 for the linear weight.
    pub fn log_constant(&self, m2: f64) -> f64 {
        match self.kind {
            WeightKind::FourthRoot => fourth_root_constant(self.param, m2),
            WeightKind::Linear => 0.0,
        }
    }
}

/// `a t^{1/4}` or `b t`.
pub fn weight_value(w: &GevreyWeight, t: f64) -> f64 {
    match w.kind {
        WeightKind::FourthRoot => w.param * t.max(0.0).powf(0.25),
        WeightKind::Linear => w.param * t,
    }
}

/// `max{sup_z (a z - M2 z^4 / 2), 1}`; the supremum sits at
/// `z* = (a / (2 M2))^{1/3}` and equals `3 a z* / 4`.
pub fn fourth_root_constant(a: f64, m2: f64) -> f64 {
    let z = (a / (2.0 * m2)).cbrt();
    (0.75 * a * z).max(1.0)
}

/// `e^{g(t)|k| - t sigma(k)} V0`.
pub fn weighted_semigroup(
    v0: &SpectrumField,
    t: f64,
    w: &GevreyWeight,
    table: &SymbolTable,
) -> Result<SpectrumField> {
    w.check_admissible(table)?;
    if t.is_nan() || t < 0.0 {
        return Err(KsError::NegativeTime(t));
    }
    if !table.case_a() && t > table.horizon * (1.0 + 1e-12) {
        return Err(KsError::BeyondHorizon {
            t,
            horizon: table.horizon,
        });
    }
    v0.grid().check_same(table.grid())?;
    let g = w.value(t);
    let sigma = table.sigma_values();
    let mut out = v0.clone();
    for (i, (k, c)) in v0.iter().enumerate() {
        out.coeffs_mut()[i] = c * (g * mode_norm(k) - t * sigma[i]).exp();
    }
    Ok(out)
}

/// `e^{sign * g(t_m) |k|}` applied node by node.
pub fn apply_weight(traj: &Trajectory, w: &GevreyWeight, sign: f64) -> Trajectory {
    traj.map_fields(|t, u| {
        let g = sign * w.value(t);
        u.map(|k, c| c * (g * mode_norm(k)).exp())
    })
}

/// `psi = e^{-g(t)|k|} V`.
pub fn unweight(v: &Trajectory, w: &GevreyWeight) -> Trajectory {
    apply_weight(v, w, -1.0)
}

/// Weighted Duhamel term
/// `int_0^t e^{g(t)|k| - (t-s) sigma(k)} P(grad e^{-g(s)|D|}U . grad e^{-g(s)|D|}W) ds`.
pub fn weighted_bilinear(
    u: &Trajectory,
    v: &Trajectory,
    w: &GevreyWeight,
    table: &SymbolTable,
) -> Result<Trajectory> {
    w.check_admissible(table)?;
    weighted_bilinear_with(&ConvolutionPlan::new(u.grid()), u, v, w, table)
}

fn weighted_bilinear_with(
    plan: &ConvolutionPlan,
    u: &Trajectory,
    v: &Trajectory,
    w: &GevreyWeight,
    table: &SymbolTable,
) -> Result<Trajectory> {
    let uu = unweight(u, w);
    let q = if std::ptr::eq(u, v) {
        gradient_dot_trajectory(plan, &uu, &uu)?
    } else {
        gradient_dot_trajectory(plan, &uu, &unweight(v, w))?
    };
    let d = duhamel_integral(&q, table)?;
    Ok(apply_weight(&d, w, 1.0))
}

/// `eta` for the weighted equation: the unweighted bound with `M2 -> M2/2`,
/// `M1 -> M1 e^{g(T) M3}` when there are growing modes, times `e^{C}`.
pub fn weighted_eta(
    pair: SpacePair,
    w: &GevreyWeight,
    table: &SymbolTable,
) -> Result<EtaBreakdown> {
    w.check_admissible(table)?;
    let mut inputs = EtaInputs::from_table(table);
    if !table.omega_f.is_empty() {
        inputs.m1 *= (w.value(table.horizon) * table.m3).exp();
    }
    inputs.m2 *= 0.5;
    eta_from_inputs(pair, inputs, w.log_constant(table.m2).exp())
}

/// `L V0` on a time grid.
pub fn weighted_initial_trajectory(
    v0: &SpectrumField,
    w: &GevreyWeight,
    table: &SymbolTable,
    times: &[f64],
) -> Result<Trajectory> {
    let fields = times
        .iter()
        .map(|&t| weighted_semigroup(v0, t, w, table))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), fields)
}

struct WeightedSpace<'a> {
    table: &'a SymbolTable,
    plan: ConvolutionPlan,
    pair: SpacePair,
    weight: GevreyWeight,
}

impl PicardSpace for WeightedSpace<'_> {
    type Point = Trajectory;

    fn norm(&self, x: &Trajectory) -> Result<f64> {
        self.pair.norm(x)
    }

    fn step(&self, x0: &Trajectory, x: &Trajectory) -> Result<Trajectory> {
        let b = weighted_bilinear_with(&self.plan, x, x, &self.weight, self.table)?;
        x0.zip_with(&b, |a, b| a - 0.5 * b)
    }

    fn distance(&self, a: &Trajectory, b: &Trajectory) -> Result<f64> {
        self.pair.norm(&a.sub(b)?)
    }
}

#[derive(Clone, Debug)]
pub struct WeightedSolve {
    pub weight: GevreyWeight,
    /// Solution `V` and diagnostics of the weighted iteration.
    pub result: SolveResult,
}

impl WeightedSolve {
    /// `e^{-g(t)|k|} V`, the solution of the unweighted equation.
    pub fn unweighted(&self) -> Trajectory {
        unweight(&self.result.solution, &self.weight)
    }
}

/// Picard solve of `V = L V0 - 1/2 calB(V, V)` on `times`.
pub fn solve_weighted(
    v0: &SpectrumField,
    times: &[f64],
    w: &GevreyWeight,
    spec: &SolveSpec,
    table: &SymbolTable,
) -> Result<WeightedSolve> {
    v0.grid().check_same(table.grid())?;
    let eta = weighted_eta(spec.pair, w, table)?;
    let x0 = weighted_initial_trajectory(v0, w, table, times)?;
    let space = WeightedSpace {
        table,
        plan: ConvolutionPlan::new(table.grid()),
        pair: spec.pair,
        weight: *w,
    };
    let result = run_gated(&space, &x0, &x0, spec, eta)?;
    Ok(WeightedSolve { weight: *w, result })
}

/// Least-squares exponential decay rate of a field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusFit {
    pub t: f64,
    /// `max(0, -slope)` of `ln(shell max)` against `|k|`.
    pub rho: f64,
    /// Shell radii (rounded `|k|`) used by the fit, first and last.
    pub window: (usize, usize),
    pub shells_used: usize,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    pub noise_floor: f64,
}

/// Minimum number of shells for a decay fit.
pub const MIN_SHELLS: usize = 4;

/// Fits `ln max_{shell} |psi(k)| ~ c - rho |k|` over shells `round(|k|) = 1,
/// 2, ...`, stopping at the first shell whose maximum is at or below
/// `noise_floor`.
pub fn estimate_radius(field: &SpectrumField, noise_floor: f64) -> Result<RadiusFit> {
    estimate_radius_at(field, noise_floor, f64::NAN)
}

pub fn estimate_radius_at(field: &SpectrumField, noise_floor: f64, t: f64) -> Result<RadiusFit> {
    let mut shells: Vec<(f64, f64)> = Vec::new(); // (max |c|, |k| of the max)
    for (k, c) in field.iter() {
        let r = mode_norm(k);
        let s = r.round() as usize;
        if s == 0 {
            continue;
        }
        if shells.len() < s {
            shells.resize(s, (0.0, 0.0));
        }
        let a = c.norm();
        if a > shells[s - 1].0 {
            shells[s - 1] = (a, r);
        }
    }
    let usable: Vec<(f64, f64)> = shells
        .iter()
        .take_while(|(a, _)| *a > noise_floor)
        .copied()
        .collect();
    if usable.len() < MIN_SHELLS {
        return Err(KsError::InsufficientDecayData {
            usable: usable.len(),
            required: MIN_SHELLS,
        });
    }
    let n = usable.len() as f64;
    let (sx, sy) = usable
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(a, r)| (sx + r, sy + a.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(a, r) in &usable {
        sxx += (r - mx) * (r - mx);
        sxy += (r - mx) * (a.ln() - my);
    }
    let slope = sxy / sxx;
    let residual = (usable
        .iter()
        .map(|&(a, r)| (a.ln() - (my + slope * (r - mx))).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RadiusFit {
        t,
        rho: (-slope).max(0.0),
        window: (1, usable.len()),
        shells_used: usable.len(),
        residual,
        noise_floor,
    })
}

/// Radius fits at the requested nodes of a trajectory.
pub fn radius_series(traj: &Trajectory, at: &[f64], noise_floor: f64) -> Result<Vec<RadiusFit>> {
    at.iter()
        .map(|&t| {
            let f = traj
                .at_time(t)
                .ok_or_else(|| KsError::InvalidTimeGrid(format!("no node at t = {t}")))?;
            estimate_radius_at(f, noise_floor, t)
        })
        .collect()
}

/// CSV series `t,rho,g_linear,g_fourthroot,fit_residual`.
pub fn format_radius_csv(
    fits: &[RadiusFit],
    linear: &GevreyWeight,
    fourth: &GevreyWeight,
) -> String {
    let mut out = String::from("t,rho,g_linear,g_fourthroot,fit_residual\n");
    for f in fits {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            f.t,
            f.rho,
            linear.value(f.t),
            fourth.value(f.t),
            f.residual
        );
    }
    out
}
