//! Weighted l^1 / l^infinity norms of coefficient fields and their
//! space-time versions on trajectories.
//!
//! Sums run over stored modes in packed order, sequentially, so every value
//! is bit-reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{KsError, Result};
use crate::spectral::{mode_norm, SpectrumField, SymbolTable, TorusGrid, Trajectory};

/// `|k|^m` for every stored mode, in packed order.
pub fn mode_weights(grid: &TorusGrid, m: f64) -> Vec<f64> {
    grid.modes().map(|k| mode_norm(k).powf(m)).collect()
}

/// `sum_k |k|^m |f(k)|`
pub fn norm_y(field: &SpectrumField, m: f64) -> f64 {
    let w = mode_weights(field.grid(), m);
    field
        .coeffs()
        .iter()
        .zip(&w)
        .map(|(c, w)| w * c.norm())
        .sum()
}

/// `sup_k |k|^m |f(k)|`
pub fn norm_pm(field: &SpectrumField, m: f64) -> f64 {
    let w = mode_weights(field.grid(), m);
    field
        .coeffs()
        .iter()
        .zip(&w)
        .map(|(c, w)| w * c.norm())
        .fold(0.0, f64::max)
}

/// Per-mode maximum of `|f(t,k)|` over the stored nodes.
pub fn time_sup_profile(traj: &Trajectory) -> Vec<f64> {
    let mut sup = vec![0.0f64; traj.grid().mode_count()];
    for field in traj.fields() {
        for (s, c) in sup.iter_mut().zip(field.coeffs()) {
            *s = s.max(c.norm());
        }
    }
    sup
}

/// Per-mode composite-trapezoid integral of `|f(t,k)|`.
pub fn time_integral_profile(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.len() < 2 {
        return Err(KsError::TooFewTimeNodes(traj.len()));
    }
    let mut acc = vec![0.0f64; traj.grid().mode_count()];
    let times = traj.times();
    let fields = traj.fields();
    for i in 0..times.len() - 1 {
        let h = 0.5 * (times[i + 1] - times[i]);
        for ((a, c0), c1) in acc
            .iter_mut()
            .zip(fields[i].coeffs())
            .zip(fields[i + 1].coeffs())
        {
            *a += h * (c0.norm() + c1.norm());
        }
    }
    Ok(acc)
}

/// `sum_k |k|^m sup_t |f(t,k)|`
pub fn norm_cal_y(traj: &Trajectory, m: f64) -> f64 {
    let w = mode_weights(traj.grid(), m);
    time_sup_profile(traj)
        .iter()
        .zip(&w)
        .map(|(s, w)| s * w)
        .sum()
}

/// `sum_k |k|^m int_0^T |f(t,k)| dt`, trapezoid in time.
pub fn norm_cal_x(traj: &Trajectory, m: f64) -> Result<f64> {
    let w = mode_weights(traj.grid(), m);
    Ok(time_integral_profile(traj)?
        .iter()
        .zip(&w)
        .map(|(s, w)| s * w)
        .sum())
}

/// `sup_t sup_k |k|^m |f(t,k)|`
pub fn norm_cal_pm(traj: &Trajectory, m: f64) -> f64 {
    let w = mode_weights(traj.grid(), m);
    time_sup_profile(traj)
        .iter()
        .zip(&w)
        .map(|(s, w)| s * w)
        .fold(0.0, f64::max)
}

/// Bound on the part of `calX[m]` beyond the last node for a trajectory that
/// decays at least like the linear flow on damped modes:
/// `int_{t_M}^inf |f(t,k)| dt <= |f(t_M,k)| / sigma(k) <= |f(t_M,k)| / (M2 |k|^4)`.
///
/// Only meaningful for an unbounded horizon with every mode damped.
pub fn tail_estimate(traj: &Trajectory, m: f64, table: &SymbolTable) -> Option<f64> {
    if table.horizon.is_finite() || !table.case_a() {
        return None;
    }
    Some(norm_y(traj.last(), m - 4.0) / table.m2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormKind {
    Y,
    Pm,
    CalY,
    CalX,
    CalPm,
}

impl NormKind {
    fn label(self) -> &'static str {
        match self {
            NormKind::Y => "Y",
            NormKind::Pm => "PM",
            NormKind::CalY => "calY",
            NormKind::CalX => "X",
            NormKind::CalPm => "calPM",
        }
    }

    /// Whether the norm needs a time axis.
    pub fn is_space_time(self) -> bool {
        matches!(self, NormKind::CalY | NormKind::CalX | NormKind::CalPm)
    }
}

/// A norm family plus its exponent, written like `Y[-1]`, `PM[-0.25]`,
/// `calY[-1]`, `X[3]`, `calPM[0.75]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormId {
    pub kind: NormKind,
    pub m: f64,
}

impl NormId {
    pub fn new(kind: NormKind, m: f64) -> Self {
        Self { kind, m }
    }

    /// Parses an identifier whose exponent may mention `p`, such as `PM[1-p]`
    /// or `X[2+p]`.
    pub fn parse_with_p(s: &str, p: Option<f64>) -> Result<Self> {
        let bad = |msg: &str| KsError::InvalidParameter(format!("norm id {s:?}: {msg}"));
        let s = s.trim();
        let open = s.find('[').ok_or_else(|| bad("missing '['"))?;
        if !s.ends_with(']') {
            return Err(bad("missing ']'"));
        }
        let kind = match &s[..open] {
            "Y" => NormKind::Y,
            "PM" => NormKind::Pm,
            "calY" => NormKind::CalY,
            "X" | "calX" => NormKind::CalX,
            "calPM" => NormKind::CalPm,
            other => return Err(bad(&format!("unknown family {other:?}"))),
        };
        let m = parse_exponent(&s[open + 1..s.len() - 1], p).map_err(|e| bad(&e))?;
        Ok(Self { kind, m })
    }

    pub fn eval_field(&self, field: &SpectrumField) -> Result<f64> {
        match self.kind {
            NormKind::Y => Ok(norm_y(field, self.m)),
            NormKind::Pm => Ok(norm_pm(field, self.m)),
            _ => Err(KsError::InvalidParameter(format!(
                "{self} needs a trajectory, not a single field"
            ))),
        }
    }

    /// Field norms are taken at the last node.
    pub fn eval_trajectory(&self, traj: &Trajectory) -> Result<f64> {
        match self.kind {
            NormKind::Y => Ok(norm_y(traj.last(), self.m)),
            NormKind::Pm => Ok(norm_pm(traj.last(), self.m)),
            NormKind::CalY => Ok(norm_cal_y(traj, self.m)),
            NormKind::CalX => norm_cal_x(traj, self.m),
            NormKind::CalPm => Ok(norm_cal_pm(traj, self.m)),
        }
    }
}

/// Accepts a plain number or `[c](+|-)p`.
fn parse_exponent(s: &str, p: Option<f64>) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return if v.is_finite() {
            Ok(v)
        } else {
            Err("exponent must be finite".into())
        };
    }
    let Some(body) = s.strip_suffix('p') else {
        return Err(format!("cannot read exponent {s:?}"));
    };
    let p = p.ok_or("exponent uses p but no p was given")?;
    let (head, sign) = if let Some(h) = body.strip_suffix('-') {
        (h, -1.0)
    } else if let Some(h) = body.strip_suffix('+') {
        (h, 1.0)
    } else if body.is_empty() {
        ("", 1.0)
    } else {
        return Err(format!("cannot read exponent {s:?}"));
    };
    let c = if head.trim().is_empty() {
        0.0
    } else {
        head.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("cannot read exponent {s:?}"))?
    };
    Ok(c + sign * p)
}

impl FromStr for NormId {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_p(s, None)
    }
}

impl fmt::Display for NormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.kind.label(), self.m)
    }
}

/// Parses a comma-separated list such as `Y[-1],PM[-0.25]`.
pub fn parse_norm_list(s: &str, p: Option<f64>) -> Result<Vec<NormId>> {
    let ids = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| NormId::parse_with_p(t, p))
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(KsError::InvalidParameter("empty norm list".into()));
    }
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormMeta {
    #[serde(rename = "N")]
    pub cutoff: usize,
    pub time_nodes: usize,
    pub tail_estimate: Option<f64>,
}

/// Norm values keyed by identifier, serialized flat next to `meta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
    pub meta: NormMeta,
}

impl NormReport {
    pub fn for_field(field: &SpectrumField, ids: &[NormId]) -> Result<Self> {
        let values = ids
            .iter()
            .map(|id| Ok((id.to_string(), id.eval_field(field)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            values,
            meta: NormMeta {
                cutoff: field.grid().cutoff(),
                time_nodes: 1,
                tail_estimate: None,
            },
        })
    }

    /// `tail_estimate` is filled from the first `X[m]` id when `table` has an
    /// unbounded horizon.
    pub fn for_trajectory(
        traj: &Trajectory,
        ids: &[NormId],
        table: Option<&SymbolTable>,
    ) -> Result<Self> {
        let values = ids
            .iter()
            .map(|id| Ok((id.to_string(), id.eval_trajectory(traj)?)))
            .collect::<Result<_>>()?;
        let tail_estimate = table.and_then(|t| {
            ids.iter()
                .find(|id| id.kind == NormKind::CalX)
                .and_then(|id| tail_estimate(traj, id.m, t))
        });
        Ok(Self {
            values,
            meta: NormMeta {
                cutoff: traj.grid().cutoff(),
                time_nodes: traj.len(),
                tail_estimate,
            },
        })
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("norm reports always serialize")
    }
}
