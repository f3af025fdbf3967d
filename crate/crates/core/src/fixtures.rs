//! Named data fields and seeded random fields and trajectories.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::spectral::{mode_neg, mode_norm, SpectrumField, TorusGrid, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// `2 cos(2 pi x1 / L1)`: coefficient 1 at `k = +-e1`.
    Cos1,
    /// `f(k) = |k|^{1-n}` at every stored mode.
    PmBoundary,
    /// `f(k) = |k|^{3/4}` at `k = 2^{4l} e1`, `l >= 1`, positive side only.
    YLacunary,
}

impl Fixture {
    pub const ALL: [Fixture; 3] = [Fixture::Cos1, Fixture::PmBoundary, Fixture::YLacunary];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Cos1 => "cos1",
            Fixture::PmBoundary => "pm-boundary",
            Fixture::YLacunary => "y-lacunary",
        }
    }

    pub fn build(self, grid: &TorusGrid) -> SpectrumField {
        match self {
            Fixture::Cos1 => cos1(grid, 1.0),
            Fixture::PmBoundary => pm_boundary(grid),
            Fixture::YLacunary => y_lacunary(grid),
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| KsError::InvalidParameter(format!("unknown fixture {s:?}")))
    }
}

/// `eps * 2 cos(2 pi x1 / L1)`.
pub fn cos1(grid: &TorusGrid, eps: f64) -> SpectrumField {
    SpectrumField::from_fn(grid, |k| {
        if k[0].abs() == 1 && k[1] == 0 {
            Complex64::new(eps, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn pm_boundary(grid: &TorusGrid) -> SpectrumField {
    let e = 1.0 - grid.dim() as f64;
    SpectrumField::from_fn(grid, |k| Complex64::new(mode_norm(k).powf(e), 0.0))
}

pub fn y_lacunary(grid: &TorusGrid) -> SpectrumField {
    let mut f = SpectrumField::zeros(grid);
    let mut k = 16i64;
    while k <= grid.cutoff() as i64 {
        f.set([k as i32, 0], Complex64::new((k as f64).powf(0.75), 0.0))
            .expect("mode inside cutoff");
        k *= 16;
    }
    f
}

/// Rescales `field` so that `norm` evaluates to `target`.
pub fn scale_to(
    field: &SpectrumField,
    norm: impl Fn(&SpectrumField) -> f64,
    target: f64,
) -> Result<SpectrumField> {
    let n = norm(field);
    if !(n > 0.0 && n.is_finite()) {
        return Err(KsError::InvalidParameter(format!(
            "cannot rescale a field of norm {n}"
        )));
    }
    if !(target >= 0.0 && target.is_finite()) {
        return Err(KsError::InvalidParameter(format!(
            "bad target norm {target}"
        )));
    }
    Ok(field.scaled(target / n))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hermitian field with `|f(k)| = |k|^{-alpha} u_k`, `u_k ~ U(0.5, 1)`, and
/// uniformly random phases.
pub fn random_field(grid: &TorusGrid, alpha: f64, rng: &mut impl Rng) -> SpectrumField {
    let mut f = SpectrumField::zeros(grid);
    for k in grid.modes().collect::<Vec<_>>() {
        let nk = mode_neg(k);
        if nk < k {
            continue;
        }
        let mag = mode_norm(k).powf(-alpha) * rng.gen_range(0.5..1.0);
        let c = Complex64::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU));
        f.set(k, c).expect("stored mode");
        f.set(nk, c.conj()).expect("stored mode");
    }
    f
}

/// Hermitian trajectory `c_k e^{(-gamma_k + i omega_k) t}` with `c_k` drawn as
/// in [`random_field`], `gamma_k ~ U(0, 3)` and `omega_k ~ U(-5, 5)`.
pub fn random_trajectory(
    grid: &TorusGrid,
    times: &[f64],
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let base = random_field(grid, alpha, rng);
    let mut rates = vec![Complex64::new(0.0, 0.0); grid.mode_count()];
    for (i, k) in grid.modes().enumerate() {
        let nk = mode_neg(k);
        if nk < k {
            continue;
        }
        let r = Complex64::new(-rng.gen_range(0.0..3.0), rng.gen_range(-5.0..5.0));
        rates[i] = r;
        rates[grid.index_of(nk).expect("stored mode")] = r.conj();
    }
    Trajectory::from_fn(grid, times, |t, k| {
        let i = grid.index_of(k).expect("stored mode");
        base.coeffs()[i] * (rates[i] * t).exp()
    })
}
