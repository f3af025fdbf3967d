//! Picard iteration for `x = x0 + B~(x, x)` and its instances for the mild
//! equation `psi = S psi0 - 1/2 B(psi, psi)` in the three space pairs.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{KsError, Result};
use crate::mild::{apply_semigroup, duhamel_bilinear_with, ConvolutionPlan};
use crate::norms::{norm_cal_pm, norm_cal_x, norm_cal_y, norm_pm, norm_y};
use crate::spectral::{SpectrumField, SymbolTable, Trajectory};

/// A complete metric space with a quadratic map, as seen by [`iterate`].
pub trait PicardSpace {
    type Point: Clone;

    fn norm(&self, x: &Self::Point) -> Result<f64>;

    /// `x0 + B~(x, x)`.
    fn step(&self, x0: &Self::Point, x: &Self::Point) -> Result<Self::Point>;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> Result<f64>;
}

#[derive(Clone, Debug)]
pub struct PicardOutcome<P> {
    pub solution: P,
    pub iterations: usize,
    /// Norm of every iterate visited, the returned one included.
    pub iterate_norms: Vec<f64>,
    /// `r_m = |x_m - x0 - B~(x_m, x_m)|`, one per visited iterate.
    pub residuals: Vec<f64>,
}

/// Iterates `x_{m+1} = x0 + B~(x_m, x_m)` from `start` and returns the first
/// `x_m` whose residual is at most `tol`.
pub fn iterate<S: PicardSpace>(
    space: &S,
    x0: &S::Point,
    start: &S::Point,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome<S::Point>> {
    let mut x = start.clone();
    let mut iterate_norms = Vec::new();
    let mut residuals = Vec::new();
    for m in 0..=max_iter {
        iterate_norms.push(space.norm(&x)?);
        let next = space.step(x0, &x)?;
        let r = space.distance(&x, &next)?;
        residuals.push(r);
        if !r.is_finite() {
            break;
        }
        if r <= tol {
            return Ok(PicardOutcome {
                solution: x,
                iterations: m,
                iterate_norms,
                residuals,
            });
        }
        x = next;
    }
    Err(KsError::NotConverged { residuals })
}

/// `4 eta |x0| < 1`, strictly.
pub fn smallness_gate(x0_norm: f64, eta: f64) -> bool {
    4.0 * eta * x0_norm < 1.0
}

/// Low/high space-time norm pair in which the iteration runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "pair")]
pub enum SpacePair {
    /// Data in `Y^-1`, solution in `calY^-1 cap X^3`, any dimension.
    Y,
    /// 1D data in `PM^-p`, solution in `calPM^-p cap X^{2+p}`.
    Pm1d { p: f64 },
    /// 2D data in `PM^{1-p}`, solution in `calPM^{1-p} cap X^{2+p}`.
    Pm2d { p: f64 },
}

impl SpacePair {
    /// The pseudomeasure pair appropriate for `dim`.
    pub fn pseudomeasure(dim: usize, p: f64) -> Result<Self> {
        let pair = match dim {
            1 => SpacePair::Pm1d { p },
            2 => SpacePair::Pm2d { p },
            _ => {
                return Err(KsError::InvalidParameter(format!(
                    "no pseudomeasure pair in dimension {dim}"
                )))
            }
        };
        pair.validate(dim)?;
        Ok(pair)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            SpacePair::Y => Ok(()),
            SpacePair::Pm1d { p } | SpacePair::Pm2d { p } => {
                let want = if matches!(self, SpacePair::Pm1d { .. }) {
                    1
                } else {
                    2
                };
                if dim != want {
                    return Err(KsError::DimensionMismatch {
                        expected: want,
                        got: dim,
                    });
                }
                if !(p > 0.0 && p < 0.5) {
                    return Err(KsError::InvalidParameter(format!(
                        "p must lie in (0, 1/2), got {p}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Exponent of the sup-type (low) norm.
    pub fn low_exponent(&self) -> f64 {
        match *self {
            SpacePair::Y => -1.0,
            SpacePair::Pm1d { p } => -p,
            SpacePair::Pm2d { p } => 1.0 - p,
        }
    }

    /// Exponent of the time-integrated (high) norm.
    pub fn high_exponent(&self) -> f64 {
        match *self {
            SpacePair::Y => 3.0,
            SpacePair::Pm1d { p } | SpacePair::Pm2d { p } => 2.0 + p,
        }
    }

    pub fn low_norm(&self, x: &Trajectory) -> f64 {
        match self {
            SpacePair::Y => norm_cal_y(x, -1.0),
            _ => norm_cal_pm(x, self.low_exponent()),
        }
    }

    pub fn high_norm(&self, x: &Trajectory) -> Result<f64> {
        norm_cal_x(x, self.high_exponent())
    }

    /// Sum of the low and high norms.
    pub fn norm(&self, x: &Trajectory) -> Result<f64> {
        Ok(self.low_norm(x) + self.high_norm(x)?)
    }

    /// Norm of initial data: `Y^-1`, `PM^-p` or `PM^{1-p}`.
    pub fn data_norm(&self, f: &SpectrumField) -> f64 {
        match self {
            SpacePair::Y => norm_y(f, -1.0),
            _ => norm_pm(f, self.low_exponent()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SpacePair::Y => "calY[-1]+X[3]".into(),
            _ => format!("calPM[{}]+X[{}]", self.low_exponent(), self.high_exponent()),
        }
    }
}

/// Upper bound for `sum_{k in Z^dim, k != 0} |k|^{-s}`, `s > dim`: exact
/// partial sum over `|k| <= R` plus an integral bound for the tail.
pub fn lattice_power_sum(dim: usize, s: f64) -> f64 {
    assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
    assert!(s > dim as f64, "sum diverges for s <= dim");
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.lock().unwrap().get(&(dim, s.to_bits())) {
        return v;
    }
    let v = if dim == 1 {
        // k^{-s} <= int_{k-1/2}^{k+1/2} x^{-s} dx by convexity
        let r = 1_000_000u32;
        let head: f64 = (1..=r).rev().map(|k| f64::from(k).powf(-s)).sum();
        2.0 * head + 2.0 * (f64::from(r) + 0.5).powf(1.0 - s) / (s - 1.0)
    } else {
        // |x|^{-s} is subharmonic on R^2 \ {0}; average over disjoint disks
        // of radius 1/2 around the lattice points beyond R
        let r = 1000i64;
        let mut head = 0.0;
        for a in (1..=r).rev() {
            let mut row = 0.0;
            for b in (0..=r).rev() {
                let q = a * a + b * b;
                if q <= r * r {
                    row += (q as f64).powf(-0.5 * s);
                }
            }
            head += row;
        }
        // the loop covers one quadrant including the positive a-axis
        let head = 4.0 * head;
        let rf = r as f64 - 0.5;
        head + 8.0 * rf.powf(2.0 - s) / (s - 2.0)
    };
    cache.lock().unwrap().insert((dim, s.to_bits()), v);
    v
}

/// Lattice constants that enter the bilinear bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaInputs {
    pub dim: usize,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub omega_f_count: usize,
    /// `T` for the growing-mode terms; 0 when there are no such modes.
    pub growth_time: f64,
    /// `max_i (2 pi / L_i)^2`.
    pub normalization: f64,
}

impl EtaInputs {
    pub fn from_table(table: &SymbolTable) -> Self {
        Self {
            dim: table.grid().dim(),
            m1: table.m1,
            m2: table.m2,
            m3: table.m3,
            omega_f_count: table.omega_f.len(),
            growth_time: table.growth_time(),
            normalization: table.grid().normalization_factor(),
        }
    }
}

/// Constants of the two bilinear bounds of a pair and the resulting `eta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaBreakdown {
    pub pair: SpacePair,
    pub inputs: EtaInputs,
    /// Bound for `B` into the low norm, normalized lattice form.
    pub low_constant: f64,
    /// Bound for `B` into the high norm, normalized lattice form.
    pub high_constant: f64,
    /// `(low + high) / 2`, the constant with the wavenumber factors dropped.
    pub normalized: f64,
    /// Extra factor from an exponential weight (1 when unweighted).
    pub weight_factor: f64,
    /// `weight_factor * normalization * normalized`: bound for `-1/2 B` of
    /// the solver, which keeps the physical wavenumbers.
    pub eta: f64,
}

/// Low and high bilinear constants for `pair` from raw lattice constants.
pub fn bilinear_constants(pair: SpacePair, c: &EtaInputs) -> (f64, f64) {
    let n = c.dim as f64;
    let t = c.growth_time;
    let growth = |x: f64| if t == 0.0 { 0.0 } else { x * t };
    match pair {
        SpacePair::Y => (
            2.0 * n * c.m1,
            growth(c.m1 * c.m3.powi(3) * (c.m3 + 1.0)) + 1.0 / c.m2,
        ),
        SpacePair::Pm1d { p } => {
            let f = 2f64.powf(p - 1.0);
            let cp = lattice_power_sum(1, 2.0 - 2.0 * p);
            (
                f * c.m1,
                f * (growth(c.omega_f_count as f64 * c.m1 * c.m3.powf(2.0 + 2.0 * p)) + cp / c.m2),
            )
        }
        SpacePair::Pm2d { p } => {
            let f = 2f64.powf(p + 1.0);
            let s = lattice_power_sum(2, 3.0 - 2.0 * p);
            (
                f * c.m1,
                f * (growth(c.omega_f_count as f64 * c.m1 * c.m3.powf(1.0 + 2.0 * p)) + s / c.m2),
            )
        }
    }
}

pub fn eta_from_inputs(
    pair: SpacePair,
    inputs: EtaInputs,
    weight_factor: f64,
) -> Result<EtaBreakdown> {
    pair.validate(inputs.dim)?;
    let (low_constant, high_constant) = bilinear_constants(pair, &inputs);
    let normalized = 0.5 * (low_constant + high_constant);
    Ok(EtaBreakdown {
        pair,
        inputs,
        low_constant,
        high_constant,
        normalized,
        weight_factor,
        eta: weight_factor * inputs.normalization * normalized,
    })
}

/// `eta` for the unweighted mild equation on `table`'s domain.
pub fn compute_eta(pair: SpacePair, table: &SymbolTable) -> Result<EtaBreakdown> {
    eta_from_inputs(pair, EtaInputs::from_table(table), 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateRecord {
    pub x0_norm: f64,
    pub eta: f64,
    pub product: f64,
    pub passed: bool,
}

impl GateRecord {
    pub fn new(x0_norm: f64, eta: f64) -> Self {
        Self {
            x0_norm,
            eta,
            product: 4.0 * eta * x0_norm,
            passed: smallness_gate(x0_norm, eta),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSpec {
    pub pair: SpacePair,
    pub tol: f64,
    pub max_iter: usize,
    /// Optional larger `eta` to use instead of the computed one.
    pub eta_override: Option<f64>,
}

impl SolveSpec {
    pub fn new(pair: SpacePair) -> Self {
        Self {
            pair,
            tol: 1e-10,
            max_iter: 100,
            eta_override: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        self.pair.validate(dim)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(KsError::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }

    /// The `eta` actually used, after checking any override.
    pub(crate) fn resolve_eta(&self, computed: &EtaBreakdown) -> Result<f64> {
        match self.eta_override {
            None => Ok(computed.eta),
            Some(e) if e >= computed.eta => Ok(e),
            Some(e) => Err(KsError::InvalidParameter(format!(
                "eta override {e} is below the computed bound {}",
                computed.eta
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub solution: Trajectory,
    pub x0: Trajectory,
    pub iterations: usize,
    pub iterate_norms: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual of the returned solution in the paired norm.
    pub residual: f64,
    pub gate: GateRecord,
    pub eta: EtaBreakdown,
}

impl SolveResult {
    /// Largest ratio of successive residuals.
    pub fn worst_contraction(&self) -> Option<f64> {
        self.residuals
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .reduce(f64::max)
    }
}

/// Node `m` holds `S(t_m) phi0`.
pub fn build_initial_trajectory(
    phi0: &SpectrumField,
    table: &SymbolTable,
    times: &[f64],
) -> Result<Trajectory> {
    let fields = times
        .iter()
        .map(|&t| apply_semigroup(phi0, t, table))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), fields)
}

/// The unweighted mild equation as a [`PicardSpace`].
pub struct MildSpace<'a> {
    pub table: &'a SymbolTable,
    pub plan: ConvolutionPlan,
    pub pair: SpacePair,
}

impl<'a> MildSpace<'a> {
    pub fn new(table: &'a SymbolTable, pair: SpacePair) -> Self {
        Self {
            table,
            plan: ConvolutionPlan::new(table.grid()),
            pair,
        }
    }

    /// `x0 - 1/2 B(x, x)`.
    pub fn mild_map(&self, x0: &Trajectory, x: &Trajectory) -> Result<Trajectory> {
        let b = duhamel_bilinear_with(&self.plan, x, x, self.table)?;
        x0.zip_with(&b, |a, b| a - 0.5 * b)
    }
}

impl PicardSpace for MildSpace<'_> {
    type Point = Trajectory;

    fn norm(&self, x: &Trajectory) -> Result<f64> {
        self.pair.norm(x)
    }

    fn step(&self, x0: &Trajectory, x: &Trajectory) -> Result<Trajectory> {
        self.mild_map(x0, x)
    }

    fn distance(&self, a: &Trajectory, b: &Trajectory) -> Result<f64> {
        self.pair.norm(&a.sub(b)?)
    }
}

/// Picard solve of `x = x0 - 1/2 B(x, x)` starting from `x0`.
pub fn picard_solve(x0: &Trajectory, spec: &SolveSpec, table: &SymbolTable) -> Result<SolveResult> {
    picard_solve_from(x0, x0, spec, table)
}

/// As [`picard_solve`] but starting the iteration at `start`.
pub fn picard_solve_from(
    x0: &Trajectory,
    start: &Trajectory,
    spec: &SolveSpec,
    table: &SymbolTable,
) -> Result<SolveResult> {
    x0.grid().check_same(table.grid())?;
    spec.validate(table.grid().dim())?;
    let eta = compute_eta(spec.pair, table)?;
    let space = MildSpace::new(table, spec.pair);
    run_gated(&space, x0, start, spec, eta)
}

/// Applies the smallness gate, iterates, and packages the diagnostics.
pub(crate) fn run_gated<S>(
    space: &S,
    x0: &Trajectory,
    start: &Trajectory,
    spec: &SolveSpec,
    eta: EtaBreakdown,
) -> Result<SolveResult>
where
    S: PicardSpace<Point = Trajectory>,
{
    let eta_used = spec.resolve_eta(&eta)?;
    let gate = GateRecord::new(space.norm(x0)?, eta_used);
    if !gate.passed {
        return Err(KsError::SmallnessViolated {
            product: gate.product,
        });
    }
    let out = iterate(space, x0, start, spec.tol, spec.max_iter)?;
    Ok(SolveResult {
        solution: out.solution,
        x0: x0.clone(),
        iterations: out.iterations,
        residual: *out.residuals.last().expect("at least one residual"),
        iterate_norms: out.iterate_norms,
        residuals: out.residuals,
        gate,
        eta,
    })
}

/// Data `phi0` evolved to `x0 = S phi0` on `times`, then solved.
pub fn solve_from_data(
    phi0: &SpectrumField,
    times: &[f64],
    spec: &SolveSpec,
    table: &SymbolTable,
) -> Result<SolveResult> {
    let x0 = build_initial_trajectory(phi0, table, times)?;
    picard_solve(&x0, spec, table)
}
