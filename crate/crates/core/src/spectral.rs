//! Frequency lattice, coefficient fields, the linear symbol and the
//! stable/unstable mode partition.
//!
//! Every field is mean-free: the zero mode has no storage slot. Modes are
//! packed in lexicographic order over the box `|k_j| <= N` with `k = 0`
//! skipped, which is also the order used by snapshot files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

/// Integer wavevector. In one dimension the second component is zero.
pub type Mode = [i32; 2];

/// Coefficient map keyed by wavevector, possibly containing `k = 0`.
pub type CoefficientMap = BTreeMap<Mode, Complex64>;

/// Euclidean length of an integer wavevector.
#[inline]
pub fn mode_norm(k: Mode) -> f64 {
    let (a, b) = (k[0] as f64, k[1] as f64);
    (a * a + b * b).sqrt()
}

#[inline]
pub fn mode_sub(a: Mode, b: Mode) -> Mode {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn mode_neg(k: Mode) -> Mode {
    [-k[0], -k[1]]
}

#[inline]
fn is_zero(k: Mode) -> bool {
    k[0] == 0 && k[1] == 0
}

/// Periodic box `prod [0, L_i]` with a spectral cutoff `|k_j| <= N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    lengths: [f64; 2],
    cutoff: i32,
}

impl TorusGrid {
    pub fn new(lengths: &[f64], cutoff: usize) -> Result<Self> {
        let dim = lengths.len();
        if dim != 1 && dim != 2 {
            return Err(KsError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(KsError::InvalidGrid(format!(
                "period lengths must be positive and finite, got {lengths:?}"
            )));
        }
        if cutoff == 0 || cutoff > (i32::MAX as usize) / 4 {
            return Err(KsError::InvalidGrid(format!("invalid cutoff {cutoff}")));
        }
        let mut stored = [0.0; 2];
        stored[..dim].copy_from_slice(lengths);
        Ok(Self {
            dim,
            lengths: stored,
            cutoff: cutoff as i32,
        })
    }

    pub fn line(length: f64, cutoff: usize) -> Result<Self> {
        Self::new(&[length], cutoff)
    }

    pub fn plane(l1: f64, l2: f64, cutoff: usize) -> Result<Self> {
        Self::new(&[l1, l2], cutoff)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff as usize
    }

    /// Same periods, different cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.lengths(), cutoff)
    }

    /// `2 pi / L_j`, the physical wavenumber of lattice index 1 along axis `j`.
    pub fn wavenumber_scale(&self, axis: usize) -> f64 {
        2.0 * PI / self.lengths[axis]
    }

    /// `max_j (2 pi / L_j)^2`, the factor the normalised estimates drop.
    pub fn normalization_factor(&self) -> f64 {
        (0..self.dim)
            .map(|j| self.wavenumber_scale(j).powi(2))
            .fold(0.0, f64::max)
    }

    fn side(&self) -> usize {
        2 * self.cutoff as usize + 1
    }

    fn center(&self) -> usize {
        let n = self.cutoff as usize;
        match self.dim {
            1 => n,
            _ => n * self.side() + n,
        }
    }

    /// Number of stored (non-zero) modes.
    pub fn mode_count(&self) -> usize {
        self.side().pow(self.dim as u32) - 1
    }

    pub fn contains(&self, k: Mode) -> bool {
        let n = self.cutoff;
        k[0].abs() <= n
            && (if self.dim == 1 {
                k[1] == 0
            } else {
                k[1].abs() <= n
            })
    }

    /// Packed storage index of a non-zero mode inside the cutoff.
    pub fn index_of(&self, k: Mode) -> Option<usize> {
        if is_zero(k) || !self.contains(k) {
            return None;
        }
        let n = self.cutoff;
        let lex = match self.dim {
            1 => (k[0] + n) as usize,
            _ => (k[0] + n) as usize * self.side() + (k[1] + n) as usize,
        };
        Some(if lex > self.center() { lex - 1 } else { lex })
    }

    /// Inverse of [`TorusGrid::index_of`].
    pub fn mode_at(&self, index: usize) -> Mode {
        let lex = if index >= self.center() {
            index + 1
        } else {
            index
        };
        let n = self.cutoff;
        match self.dim {
            1 => [lex as i32 - n, 0],
            _ => {
                let side = self.side();
                [(lex / side) as i32 - n, (lex % side) as i32 - n]
            }
        }
    }

    /// All stored modes in packed (lexicographic) order.
    pub fn modes(&self) -> impl ExactSizeIterator<Item = Mode> + '_ {
        (0..self.mode_count()).map(move |i| self.mode_at(i))
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(KsError::GridMismatch)
        }
    }
}

/// Fourier coefficients of a mean-free field at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectrumField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.mode_count()],
        }
    }

    pub fn from_fn(grid: &TorusGrid, mut f: impl FnMut(Mode) -> Complex64) -> Self {
        let coeffs = grid.modes().map(&mut f).collect();
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Wraps coefficients given in packed order.
    pub fn from_packed(grid: &TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.mode_count() {
            return Err(KsError::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                grid.mode_count(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at `k`; zero for `k = 0` and for modes beyond the cutoff.
    pub fn get(&self, k: Mode) -> Complex64 {
        self.grid
            .index_of(k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set(&mut self, k: Mode, value: Complex64) -> Result<()> {
        if is_zero(k) {
            return Err(KsError::ZeroMode);
        }
        let i = self
            .grid
            .index_of(k)
            .ok_or_else(|| KsError::InvalidGrid(format!("mode {k:?} lies outside the cutoff")))?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// `(mode, coefficient)` pairs in packed order.
    pub fn iter(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        self.grid.modes().zip(self.coeffs.iter().copied())
    }

    pub fn to_map(&self) -> CoefficientMap {
        self.iter().collect()
    }

    pub fn map(&self, mut f: impl FnMut(Mode, Complex64) -> Complex64) -> Self {
        let coeffs = self.iter().map(|(k, c)| f(k, c)).collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|_, c| c * factor)
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            coeffs,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        self.iter()
            .map(|(k, c)| (c - self.get(mode_neg(k)).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Projects onto real-valued fields: `c(k) <- (c(k) + conj c(-k)) / 2`.
    pub fn hermitian_part(&self) -> Self {
        self.map(|k, c| (c + self.get(mode_neg(k)).conj()) * 0.5)
    }
}

/// Drops the mean of a coefficient map.
///
/// Modes beyond the cutoff are rejected rather than silently truncated.
pub fn project_zero_mean(
    grid: &TorusGrid,
    entries: impl IntoIterator<Item = (Mode, Complex64)>,
) -> Result<SpectrumField> {
    let mut field = SpectrumField::zeros(grid);
    for (k, c) in entries {
        if is_zero(k) {
            continue;
        }
        field.set(k, c)?;
    }
    Ok(field)
}

/// Samples of a field on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: TorusGrid,
    times: Vec<f64>,
    fields: Vec<SpectrumField>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<SpectrumField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(KsError::InvalidTimeGrid(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        validate_times(&times)?;
        let grid = fields[0].grid().clone();
        for f in &fields[1..] {
            grid.check_same(f.grid())?;
        }
        Ok(Self {
            grid,
            times,
            fields,
        })
    }

    pub fn zeros(grid: &TorusGrid, times: &[f64]) -> Result<Self> {
        Self::new(
            times.to_vec(),
            vec![SpectrumField::zeros(grid); times.len()],
        )
    }

    /// Builds a trajectory by evaluating `f(t, k)` on every node and mode.
    pub fn from_fn(
        grid: &TorusGrid,
        times: &[f64],
        mut f: impl FnMut(f64, Mode) -> Complex64,
    ) -> Result<Self> {
        let fields = times
            .iter()
            .map(|&t| SpectrumField::from_fn(grid, |k| f(t, k)))
            .collect();
        Self::new(times.to_vec(), fields)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectrumField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node(&self, i: usize) -> &SpectrumField {
        &self.fields[i]
    }

    pub fn last(&self) -> &SpectrumField {
        self.fields.last().expect("trajectories are never empty")
    }

    /// Index of the node at time `t` (within `1e-12` relative).
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn at_time(&self, t: f64) -> Option<&SpectrumField> {
        self.node_index(t).map(|i| &self.fields[i])
    }

    pub fn map_fields(&self, mut f: impl FnMut(f64, &SpectrumField) -> SpectrumField) -> Self {
        let fields = self
            .times
            .iter()
            .zip(&self.fields)
            .map(|(&t, u)| f(t, u))
            .collect();
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            fields,
        }
    }

    pub(crate) fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.times != other.times {
            return Err(KsError::TimeGridMismatch);
        }
        Ok(())
    }

    pub fn zip_with(
        &self,
        other: &Trajectory,
        f: impl Fn(Complex64, Complex64) -> Complex64 + Copy,
    ) -> Result<Self> {
        self.check_compatible(other)?;
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.zip_with(b, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            fields,
        })
    }

    pub fn add(&self, other: &Trajectory) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_fields(|_, u| u.scaled(factor))
    }

    pub fn is_zero(&self) -> bool {
        self.fields.iter().all(SpectrumField::is_zero)
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(KsError::InvalidTimeGrid("non-finite time".into()));
    }
    if times[0] < 0.0 {
        return Err(KsError::NegativeTime(times[0]));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KsError::InvalidTimeGrid(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `steps + 1` equally spaced nodes on `[0, t_end]`.
pub fn uniform_times(t_end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_end.is_finite() && t_end > 0.0) || steps == 0 {
        return Err(KsError::InvalidTimeGrid(format!(
            "need t_end > 0 and at least one step, got t_end={t_end}, steps={steps}"
        )));
    }
    let h = t_end / steps as f64;
    Ok((0..=steps)
        .map(|i| if i == steps { t_end } else { i as f64 * h })
        .collect())
}

/// Symbol of `Delta^2 + Delta` at lattice point `k`.
pub fn symbol(k: &[i32], lengths: &[f64]) -> Result<f64> {
    if k.len() != lengths.len() {
        return Err(KsError::DimensionMismatch {
            expected: lengths.len(),
            got: k.len(),
        });
    }
    if k.iter().all(|&c| c == 0) {
        return Err(KsError::ZeroMode);
    }
    Ok(symbol_unchecked(k, lengths))
}

fn symbol_unchecked(k: &[i32], lengths: &[f64]) -> f64 {
    let xi2: f64 = k
        .iter()
        .zip(lengths)
        .map(|(&kj, &l)| {
            let s = 2.0 * PI / l * kj as f64;
            s * s
        })
        .sum();
    xi2 * xi2 - xi2
}

/// Whether every mode is linearly damped (all periods below `2 pi`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DampingCase {
    /// No growing or neutral modes; infinite horizon allowed.
    A,
    /// Finitely many modes with non-positive symbol; finite horizon.
    B,
}

impl fmt::Display for DampingCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DampingCase::A => f.write_str("A"),
            DampingCase::B => f.write_str("B"),
        }
    }
}

/// Symbol values on the grid plus the lattice constants derived from them.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    grid: TorusGrid,
    sigma: Vec<f64>,
    /// Modes of the whole lattice with non-positive symbol.
    pub omega_f: Vec<Mode>,
    /// `sup_{t in [0,T]} sup_k exp(-t sigma(k))`.
    pub m1: f64,
    /// Largest `c` with `sigma(k) >= c |k|^4` on the damped modes.
    pub m2: f64,
    /// Largest `|k|` among the non-damped modes, 0 if there are none.
    pub m3: f64,
    pub case: DampingCase,
    /// `f64::INFINITY` for an unbounded horizon.
    pub horizon: f64,
}

impl SymbolTable {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn case_a(&self) -> bool {
        self.case == DampingCase::A
    }

    /// Symbol values in packed order.
    pub fn sigma_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_at(&self, index: usize) -> f64 {
        self.sigma[index]
    }

    pub fn sigma(&self, k: Mode) -> Option<f64> {
        self.grid.index_of(k).map(|i| self.sigma[i])
    }

    pub fn in_omega_f(&self, k: Mode) -> bool {
        self.sigma(k).map_or_else(
            || symbol_unchecked(&k[..self.grid.dim()], self.grid.lengths()) <= 0.0,
            |s| s <= 0.0,
        )
    }

    /// The horizon as a finite number, or `None` when unbounded.
    pub fn finite_horizon(&self) -> Option<f64> {
        self.horizon.is_finite().then_some(self.horizon)
    }

    /// `T` for the growing-mode terms of the estimates; `M1 T` is read as
    /// zero when there are no such modes.
    pub fn growth_time(&self) -> f64 {
        if self.omega_f.is_empty() {
            0.0
        } else {
            self.horizon
        }
    }

    /// Same constants with a different cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        build_symbol_table(&self.grid.with_cutoff(cutoff)?, self.horizon)
    }
}

/// Symbol values, partition and constants for `grid` over `[0, horizon]`.
///
/// `M2`, `M3`, `M1` and the non-damped set are computed on the infinite
/// lattice, independent of the cutoff.
pub fn build_symbol_table(grid: &TorusGrid, horizon: f64) -> Result<SymbolTable> {
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(KsError::InvalidHorizon(horizon));
    }
    let lengths = grid.lengths();
    let dim = grid.dim();
    let sigma: Vec<f64> = grid
        .modes()
        .map(|k| symbol_unchecked(&k[..dim], lengths))
        .collect();

    let c: Vec<f64> = (0..dim).map(|j| grid.wavenumber_scale(j).powi(2)).collect();
    let c_min = c.iter().copied().fold(f64::INFINITY, f64::min);
    // Outside |k| <= r every ratio sigma/|k|^4 exceeds the one at the first
    // damped axis mode along the slowest axis, and no mode is non-damped.
    let r = ((1.0 / c_min).sqrt().ceil() as i32) + 2;

    let mut omega_f = Vec::new();
    let mut m2 = f64::INFINITY;
    let mut most_negative: f64 = 0.0;
    let second = if dim == 2 { -r..=r } else { 0..=0 };
    for k0 in -r..=r {
        for k1 in second.clone() {
            let k = [k0, k1];
            if is_zero(k) {
                continue;
            }
            let s = symbol_unchecked(&k[..dim], lengths);
            if s <= 0.0 {
                omega_f.push(k);
                most_negative = most_negative.min(s);
            } else {
                m2 = m2.min(s / mode_norm(k).powi(4));
            }
        }
    }

    let case = if omega_f.is_empty() {
        DampingCase::A
    } else {
        DampingCase::B
    };
    if case == DampingCase::B && !horizon.is_finite() {
        return Err(KsError::InfiniteHorizon);
    }
    let m1 = if most_negative < 0.0 {
        (-most_negative * horizon).exp()
    } else {
        1.0
    };
    let m3 = omega_f.iter().map(|&k| mode_norm(k)).fold(0.0, f64::max);

    Ok(SymbolTable {
        grid: grid.clone(),
        sigma,
        omega_f,
        m1,
        m2,
        m3,
        case,
        horizon,
    })
}
