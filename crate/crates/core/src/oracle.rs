//! Reference solver: the truncated Galerkin system
//! `d/dt psi_k = -sigma(k) psi_k - 1/2 F[P |grad psi|^2]_k`
//! integrated with the classical four-stage Runge-Kutta scheme in
//! integrating-factor form. Only `gradient_dot` is shared with the mild
//! solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::mild::ConvolutionPlan;
use crate::spectral::{SpectrumField, SymbolTable, TorusGrid, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub t_end: f64,
    /// Largest allowed step; each interval between samples is cut into
    /// equal steps no longer than this.
    pub dt: f64,
    pub nonlinear: bool,
    /// Output nodes, increasing from 0; defaults to `[0, t_end]`.
    pub samples: Option<Vec<f64>>,
}

impl OracleConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            nonlinear: true,
            samples: None,
        }
    }

    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// Samples on the given nodes; `t_end` becomes the last of them.
    pub fn sample_at(mut self, times: &[f64]) -> Self {
        if let Some(&t) = times.last() {
            self.t_end = t;
        }
        self.samples = Some(times.to_vec());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(KsError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(KsError::InvalidParameter(format!(
                "bad end time {}",
                self.t_end
            )));
        }
        if let Some(s) = &self.samples {
            if s.first() != Some(&0.0) {
                return Err(KsError::InvalidTimeGrid("samples must start at 0".into()));
            }
            if s.windows(2).any(|w| !(w[1] > w[0])) || s.iter().any(|t| !t.is_finite()) {
                return Err(KsError::InvalidTimeGrid("samples must increase".into()));
            }
        }
        Ok(())
    }

    fn sample_times(&self) -> Vec<f64> {
        match &self.samples {
            Some(s) => s.clone(),
            None if self.t_end > 0.0 => vec![0.0, self.t_end],
            None => vec![0.0],
        }
    }
}

struct Stepper<'a> {
    plan: ConvolutionPlan,
    sigma: &'a [f64],
    nonlinear: bool,
}

impl Stepper<'_> {
    fn rhs(&self, psi: &[Complex64], grid: &TorusGrid) -> Result<Vec<Complex64>> {
        if !self.nonlinear {
            return Ok(vec![Complex64::new(0.0, 0.0); psi.len()]);
        }
        let f = SpectrumField::from_packed(grid, psi.to_vec())?;
        let q = self.plan.gradient_dot(&f, &f)?;
        Ok(q.coeffs().iter().map(|c| -0.5 * c).collect())
    }

    fn step(&self, psi: &mut [Complex64], h: f64, grid: &TorusGrid) -> Result<()> {
        let e: Vec<f64> = self.sigma.iter().map(|s| (-0.5 * h * s).exp()).collect();
        let k1: Vec<_> = self.rhs(psi, grid)?.into_iter().map(|c| h * c).collect();
        let y: Vec<_> = (0..psi.len())
            .map(|i| e[i] * (psi[i] + 0.5 * k1[i]))
            .collect();
        let k2: Vec<_> = self.rhs(&y, grid)?.into_iter().map(|c| h * c).collect();
        let y: Vec<_> = (0..psi.len())
            .map(|i| e[i] * psi[i] + 0.5 * k2[i])
            .collect();
        let k3: Vec<_> = self.rhs(&y, grid)?.into_iter().map(|c| h * c).collect();
        let y: Vec<_> = (0..psi.len())
            .map(|i| e[i] * e[i] * psi[i] + e[i] * k3[i])
            .collect();
        let k4: Vec<_> = self.rhs(&y, grid)?.into_iter().map(|c| h * c).collect();
        for i in 0..psi.len() {
            let e2 = e[i] * e[i];
            psi[i] = e2 * psi[i] + (e2 * k1[i] + 2.0 * e[i] * (k2[i] + k3[i]) + k4[i]) / 6.0;
        }
        Ok(())
    }
}

/// Integrates from `psi0` and returns the solution at the sample nodes.
/// A non-finite coefficient stops the run with the last time at which the
/// state was still finite.
pub fn integrate(
    psi0: &SpectrumField,
    cfg: &OracleConfig,
    table: &SymbolTable,
) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = table.grid();
    psi0.grid().check_same(grid)?;
    let stepper = Stepper {
        plan: ConvolutionPlan::new(grid),
        sigma: table.sigma_values(),
        nonlinear: cfg.nonlinear,
    };
    let samples = cfg.sample_times();
    let mut psi = psi0.coeffs().to_vec();
    let mut fields = vec![psi0.clone()];
    let mut t = 0.0;
    for w in samples.windows(2) {
        let span = w[1] - w[0];
        let n = (span / cfg.dt).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for i in 0..n {
            stepper.step(&mut psi, h, grid)?;
            if psi.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(KsError::Instability { last_good_time: t });
            }
            t = w[0] + (i + 1) as f64 * h;
        }
        t = w[1];
        fields.push(SpectrumField::from_packed(grid, psi.clone())?);
    }
    Trajectory::new(samples, fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cos1, random_field, rng};
    use crate::mild::apply_semigroup;
    use crate::spectral::{build_symbol_table, uniform_times, TorusGrid};
    use std::f64::consts::PI;

    #[test]
    fn linear_part_is_exact() {
        let g = TorusGrid::line(1.5 * PI, 12).unwrap();
        let table = build_symbol_table(&g, 2.0).unwrap();
        let psi0 = random_field(&g, 1.0, &mut rng(5));
        let times = uniform_times(2.0, 7).unwrap();
        let cfg = OracleConfig::new(2.0, 0.01).linear_only().sample_at(&times);
        let tr = integrate(&psi0, &cfg, &table).unwrap();
        for (&t, f) in tr.times().iter().zip(tr.fields()) {
            let exact = apply_semigroup(&psi0, t, &table).unwrap();
            for (a, b) in f.coeffs().iter().zip(exact.coeffs()) {
                assert!((a - b).norm() <= 1e-13 * b.norm().max(1e-300), "{a} {b}");
            }
        }
    }

    #[test]
    fn fourth_order_self_convergence() {
        let g = TorusGrid::line(PI, 16).unwrap();
        let table = build_symbol_table(&g, f64::INFINITY).unwrap();
        let psi0 = cos1(&g, 2.0);
        let run = |dt: f64| {
            integrate(&psi0, &OracleConfig::new(0.5, dt), &table)
                .unwrap()
                .last()
                .clone()
        };
        let reference = run(0.00025);
        let e1 = run(0.002).sub(&reference).unwrap().l2_norm();
        let e2 = run(0.001).sub(&reference).unwrap().l2_norm();
        assert!(e1 > 0.0 && e1 / e2 >= 15.0, "{e1} {e2} {}", e1 / e2);
    }

    #[test]
    fn second_mode_matches_first_correction() {
        let g = TorusGrid::line(2.0 * PI, 8).unwrap();
        let table = build_symbol_table(&g, 1.0).unwrap();
        let eps = 1e-3;
        let times = [0.0, 0.01, 0.1];
        let tr = integrate(
            &cos1(&g, eps),
            &OracleConfig::new(0.1, 1e-3).sample_at(&times),
            &table,
        )
        .unwrap();
        for (&t, f) in tr.times().iter().zip(tr.fields()).skip(1) {
            let predicted = eps * eps * (1.0 - (-12.0 * t).exp()) / 24.0;
            let err = (f.get([2, 0]).re - predicted).abs();
            assert!(err < 10.0 * eps.powi(4), "t={t} err={err}");
            assert!(f.is_hermitian(1e-18));
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let g = TorusGrid::line(PI, 8).unwrap();
        let table = build_symbol_table(&g, f64::INFINITY).unwrap();
        let err = integrate(&cos1(&g, 1e4), &OracleConfig::new(1.0, 0.01), &table).unwrap_err();
        assert!(matches!(err, KsError::Instability { .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_config() {
        let g = TorusGrid::line(PI, 4).unwrap();
        let table = build_symbol_table(&g, f64::INFINITY).unwrap();
        let f = cos1(&g, 0.1);
        assert!(integrate(&f, &OracleConfig::new(1.0, 0.0), &table).is_err());
        assert!(integrate(
            &f,
            &OracleConfig::new(1.0, 0.1).sample_at(&[0.0, 0.5, 0.5]),
            &table
        )
        .is_err());
    }
}
