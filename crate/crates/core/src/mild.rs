//! Semigroup, gradient product and the Duhamel bilinear operator.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{KsError, Result};
use crate::spectral::{DampingCase, SpectrumField, SymbolTable, TorusGrid, Trajectory};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_time(t: f64, table: &SymbolTable) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(KsError::NegativeTime(t));
    }
    if table.case == DampingCase::B && t > table.horizon * (1.0 + 1e-12) {
        return Err(KsError::BeyondHorizon {
            t,
            horizon: table.horizon,
        });
    }
    Ok(())
}

/// `e^{-t sigma(k)}` applied coefficient-wise.
pub fn apply_semigroup(
    field: &SpectrumField,
    t: f64,
    table: &SymbolTable,
) -> Result<SpectrumField> {
    check_time(t, table)?;
    field.grid().check_same(table.grid())?;
    let sigma = table.sigma_values();
    let mut out = field.clone();
    for (c, &s) in out.coeffs_mut().iter_mut().zip(sigma) {
        *c *= (-t * s).exp();
    }
    Ok(out)
}

/// FFT plans for alias-free products of fields on one grid.
#[derive(Clone)]
pub struct ConvolutionPlan {
    grid: TorusGrid,
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionPlan")
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .finish()
    }
}

/// Smallest power of two exceeding `3N`: products of two fields with
/// `|k_j| <= N` then alias only onto `|k_j| > N`.
pub fn padded_size(cutoff: usize) -> usize {
    (3 * cutoff + 1).next_power_of_two()
}

impl ConvolutionPlan {
    pub fn new(grid: &TorusGrid) -> Self {
        let padded = padded_size(grid.cutoff());
        let mut planner = FftPlanner::new();
        Self {
            grid: grid.clone(),
            padded,
            forward: planner.plan_fft_forward(padded),
            inverse: planner.plan_fft_inverse(padded),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn padded(&self) -> usize {
        self.padded
    }

    fn slot(&self, k: [i32; 2]) -> usize {
        let p = self.padded as i32;
        let a = k[0].rem_euclid(p) as usize;
        if self.grid.dim() == 1 {
            a
        } else {
            a * self.padded + k[1].rem_euclid(p) as usize
        }
    }

    fn len(&self) -> usize {
        self.padded.pow(self.grid.dim() as u32)
    }

    /// Physical values of `d/dx_axis` of `field` on the padded grid. In 2D
    /// the result is stored transposed (`[x2][x1]`).
    fn derivative_values(&self, field: &SpectrumField, axis: usize) -> Vec<Complex64> {
        let scale = self.grid.wavenumber_scale(axis);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len()];
        for (k, c) in field.iter() {
            buf[self.slot(k)] = I * (scale * k[axis] as f64) * c;
        }
        self.transform(&mut buf, &self.inverse);
        buf
    }

    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
        if self.grid.dim() == 2 {
            transpose_square(buf, self.padded);
            fft.process_with_scratch(buf, &mut scratch);
        }
    }

    /// Mean-free coefficients of `grad F . grad G`, truncated to the grid,
    /// with the physical factors `(2 pi / L_i)^2`.
    pub fn gradient_dot(&self, f: &SpectrumField, g: &SpectrumField) -> Result<SpectrumField> {
        self.grid.check_same(f.grid())?;
        self.grid.check_same(g.grid())?;
        let same = std::ptr::eq(f, g) || f.coeffs() == g.coeffs();
        let mut acc = vec![Complex64::new(0.0, 0.0); self.len()];
        for axis in 0..self.grid.dim() {
            let df = self.derivative_values(f, axis);
            if same {
                for (a, d) in acc.iter_mut().zip(&df) {
                    *a += d * d;
                }
            } else {
                let dg = self.derivative_values(g, axis);
                for ((a, x), y) in acc.iter_mut().zip(&df).zip(&dg) {
                    *a += x * y;
                }
            }
        }
        // Forward transform undoes the transposed layout.
        self.transform(&mut acc, &self.forward);
        let norm = 1.0 / self.len() as f64;
        Ok(SpectrumField::from_fn(&self.grid, |k| {
            acc[self.slot(k)] * norm
        }))
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// One-off `grad F . grad G`; build a [`ConvolutionPlan`] for repeated use.
pub fn gradient_dot(f: &SpectrumField, g: &SpectrumField) -> Result<SpectrumField> {
    f.grid().check_same(g.grid())?;
    ConvolutionPlan::new(f.grid()).gradient_dot(f, g)
}

/// `sum_i x^i / (i + k)!` for small `|x|`.
fn phi_series(x: f64, k: u32) -> f64 {
    let mut fact = (1..=k).map(f64::from).product::<f64>();
    let mut term = 1.0 / fact;
    let mut sum = term;
    for i in 1..24u32 {
        fact = f64::from(i + k);
        term *= x / fact;
        sum += term;
    }
    sum
}

/// Weights `(w_left, w_right)` with
/// `int_0^h e^{-(h-s) sigma} q(s) ds = w_left q(0) + w_right q(h)` exactly
/// for `q` linear on `[0, h]`.
pub fn exponential_weights(h: f64, sigma: f64) -> (f64, f64) {
    let z = h * sigma;
    if z.abs() < 0.5 {
        let p1 = phi_series(-z, 1);
        let p2 = phi_series(-z, 2);
        (h * (p1 - p2), h * p2)
    } else {
        let e = (-z).exp();
        let z2 = z * z;
        (h * (1.0 - e * (1.0 + z)) / z2, h * (z - 1.0 + e) / z2)
    }
}

/// `int_0^{t_m} e^{-(t_m - s) sigma(k)} q(s, k) ds` at every node, with `q`
/// interpolated linearly between nodes and the kernel integrated exactly.
pub fn duhamel_integral(q: &Trajectory, table: &SymbolTable) -> Result<Trajectory> {
    q.grid().check_same(table.grid())?;
    let times = q.times();
    if times[0] != 0.0 {
        return Err(KsError::InvalidTimeGrid(format!(
            "Duhamel integrals start at t = 0, grid starts at {}",
            times[0]
        )));
    }
    check_time(*times.last().unwrap(), table)?;
    let sigma = table.sigma_values();
    let nm = sigma.len();

    let mut fields = Vec::with_capacity(times.len());
    fields.push(SpectrumField::zeros(q.grid()));
    let mut cached_h = f64::NAN;
    let mut decay = vec![0.0; nm];
    let mut wl = vec![0.0; nm];
    let mut wr = vec![0.0; nm];
    for m in 0..times.len() - 1 {
        let h = times[m + 1] - times[m];
        if h != cached_h {
            for i in 0..nm {
                decay[i] = (-h * sigma[i]).exp();
                let (a, b) = exponential_weights(h, sigma[i]);
                wl[i] = a;
                wr[i] = b;
            }
            cached_h = h;
        }
        let prev = fields[m].coeffs();
        let q0 = q.node(m).coeffs();
        let q1 = q.node(m + 1).coeffs();
        let next: Vec<Complex64> = (0..nm)
            .map(|i| decay[i] * prev[i] + wl[i] * q0[i] + wr[i] * q1[i])
            .collect();
        fields.push(SpectrumField::from_packed(q.grid(), next)?);
    }
    Trajectory::new(times.to_vec(), fields)
}

/// `gradient_dot` at every node, nodes evaluated in parallel.
pub fn gradient_dot_trajectory(
    plan: &ConvolutionPlan,
    f: &Trajectory,
    g: &Trajectory,
) -> Result<Trajectory> {
    f.check_compatible(g)?;
    let fields = f
        .fields()
        .par_iter()
        .zip(g.fields().par_iter())
        .map(|(a, b)| plan.gradient_dot(a, b))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(f.times().to_vec(), fields)
}

/// `B(F, G)(t) = int_0^t e^{-(t-s) L} P(grad F . grad G)(s) ds`.
pub fn duhamel_bilinear(f: &Trajectory, g: &Trajectory, table: &SymbolTable) -> Result<Trajectory> {
    let plan = ConvolutionPlan::new(f.grid());
    duhamel_bilinear_with(&plan, f, g, table)
}

pub fn duhamel_bilinear_with(
    plan: &ConvolutionPlan,
    f: &Trajectory,
    g: &Trajectory,
    table: &SymbolTable,
) -> Result<Trajectory> {
    let q = gradient_dot_trajectory(plan, f, g)?;
    duhamel_integral(&q, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_symbol_table, mode_sub, uniform_times, Mode};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cos1(grid: &TorusGrid) -> SpectrumField {
        SpectrumField::from_fn(grid, |k| {
            if k[0].abs() == 1 && k[1] == 0 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    /// Direct convolution `-sum_j xi(k-j).xi(j) F(k-j) G(j)`.
    fn direct(f: &SpectrumField, g: &SpectrumField) -> SpectrumField {
        let grid = f.grid();
        let dim = grid.dim();
        SpectrumField::from_fn(grid, |k| {
            let mut s = c(0.0, 0.0);
            for j in grid.modes() {
                let kj: Mode = mode_sub(k, j);
                let fk = f.get(kj);
                if fk == c(0.0, 0.0) {
                    continue;
                }
                let dot: f64 = (0..dim)
                    .map(|a| grid.wavenumber_scale(a).powi(2) * (kj[a] * j[a]) as f64)
                    .sum();
                s -= dot * fk * g.get(j);
            }
            s
        })
    }

    fn max_diff(a: &SpectrumField, b: &SpectrumField) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn semigroup_examples() {
        let g = TorusGrid::line(PI, 3).unwrap();
        let t = build_symbol_table(&g, 1.0).unwrap();
        let f = cos1(&g);
        assert_eq!(apply_semigroup(&f, 0.0, &t).unwrap(), f);
        let s = apply_semigroup(&f, 1.0, &t).unwrap();
        assert!((s.get([1, 0]).re - (-12.0f64).exp()).abs() < 1e-20);
        assert_eq!(
            apply_semigroup(&f, -1.0, &t),
            Err(KsError::NegativeTime(-1.0))
        );

        let g2 = TorusGrid::line(2.0 * PI, 3).unwrap();
        let t2 = build_symbol_table(&g2, 5.0).unwrap();
        let f2 = cos1(&g2);
        assert_eq!(apply_semigroup(&f2, 3.7, &t2).unwrap(), f2);
        assert!(matches!(
            apply_semigroup(&f2, 6.0, &t2),
            Err(KsError::BeyondHorizon { .. })
        ));
    }

    #[test]
    fn gradient_dot_of_cosine() {
        let g = TorusGrid::line(2.0 * PI, 4).unwrap();
        let f = cos1(&g);
        let r = gradient_dot(&f, &f).unwrap();
        for (k, v) in r.iter() {
            let expected = if k[0].abs() == 2 { -1.0 } else { 0.0 };
            assert!((v - c(expected, 0.0)).norm() < 1e-14, "{k:?} {v}");
        }
        let z = SpectrumField::zeros(&g);
        assert!(gradient_dot(&z, &f).unwrap().is_zero());
    }

    #[test]
    fn gradient_dot_keeps_physical_factors() {
        // L = pi doubles wavenumbers: (F_x)^2 = 4 * 4 sin^2(2x)
        let g = TorusGrid::line(PI, 4).unwrap();
        let f = cos1(&g);
        let r = gradient_dot(&f, &f).unwrap();
        assert!((r.get([2, 0]).re + 4.0).abs() < 1e-13);
    }

    #[test]
    fn gradient_dot_matches_direct_sum() {
        let g = TorusGrid::plane(3.0, 7.0, 4).unwrap();
        let f = SpectrumField::from_fn(&g, |k| c((k[0] as f64 * 0.7).sin(), 0.1 * k[1] as f64));
        let h = SpectrumField::from_fn(&g, |k| {
            c(1.0 / (1.0 + k[0].abs() as f64), (k[1] as f64).cos())
        });
        let fast = gradient_dot(&f, &h).unwrap();
        let slow = direct(&f, &h);
        assert!(max_diff(&fast, &slow) < 1e-11 * slow.max_abs().max(1.0));

        let g1 = TorusGrid::line(5.0, 9).unwrap();
        let f1 = SpectrumField::from_fn(&g1, |k| c(1.0 / (k[0] as f64).powi(2), 0.3));
        let fast = gradient_dot(&f1, &f1).unwrap();
        let slow = direct(&f1, &f1);
        assert!(max_diff(&fast, &slow) < 1e-12 * slow.max_abs().max(1.0));
    }

    #[test]
    fn exponential_weights_match_quadrature() {
        for &(h, s) in &[
            (0.01, 12.0),
            (0.1, 0.0),
            (0.5, -0.3),
            (1e-3, 4e5),
            (0.2, 1.0),
            (0.3, 2.0),
        ] {
            let (a, b) = exponential_weights(h, s);
            // fine midpoint rule of the exact integrals
            let n = 200_000;
            let (mut ia, mut ib) = (0.0, 0.0);
            for i in 0..n {
                let x = (i as f64 + 0.5) * h / n as f64;
                let k = (-(h - x) * s).exp() * h / n as f64;
                ia += k * (1.0 - x / h);
                ib += k * x / h;
            }
            assert!((a - ia).abs() < 1e-9 * h, "{h} {s}: {a} vs {ia}");
            assert!((b - ib).abs() < 1e-9 * h, "{h} {s}: {b} vs {ib}");
        }
        let (a, b) = exponential_weights(0.2, 0.0);
        assert_eq!((a, b), (0.1, 0.1));
    }

    #[test]
    fn weights_are_continuous_across_series_switch() {
        for s in [-1.0, 1.0] {
            let lo = exponential_weights(1.0, s * 0.4999999);
            let hi = exponential_weights(1.0, s * 0.5000001);
            assert!((lo.0 - hi.0).abs() < 1e-7 && (lo.1 - hi.1).abs() < 1e-7);
        }
    }

    #[test]
    fn duhamel_closed_form() {
        let g = TorusGrid::line(2.0 * PI, 4).unwrap();
        let table = build_symbol_table(&g, 1.0).unwrap();
        let times = uniform_times(1.0, 1000).unwrap();
        let f = Trajectory::new(times.clone(), vec![cos1(&g); times.len()]).unwrap();
        let b = duhamel_bilinear(&f, &f, &table).unwrap();
        assert!(b.node(0).is_zero());
        for t in [0.01f64, 0.1, 1.0] {
            let exact = -(1.0 - (-12.0 * t).exp()) / 12.0;
            let got = b.at_time(t).unwrap().get([2, 0]);
            assert!(
                (got.re - exact).abs() < 1e-12 && got.im.abs() < 1e-14,
                "{t}"
            );
        }
    }

    #[test]
    fn duhamel_is_second_order_for_varying_integrands() {
        let g = TorusGrid::line(2.0 * PI, 4).unwrap();
        let table = build_symbol_table(&g, 1.0).unwrap();
        let err = |steps: usize| {
            let times = uniform_times(1.0, steps).unwrap();
            let f = Trajectory::from_fn(&g, &times, |t, k| {
                if k[0].abs() == 1 {
                    c((-t).exp(), 0.0)
                } else {
                    c(0.0, 0.0)
                }
            })
            .unwrap();
            let b = duhamel_bilinear(&f, &f, &table).unwrap();
            let exact = -((-2.0f64).exp() - (-12.0f64).exp()) / 10.0;
            (b.last().get([2, 0]).re - exact).abs()
        };
        let ratio = err(100) / err(200);
        assert!(ratio > 3.9 && ratio < 4.1, "{ratio}");
    }

    fn arb_field(grid: TorusGrid) -> impl Strategy<Value = SpectrumField> {
        let n = grid.mode_count();
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(move |v| {
            let coeffs = v.into_iter().map(|(a, b)| c(a, b)).collect();
            SpectrumField::from_packed(&grid, coeffs)
                .unwrap()
                .hermitian_part()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gradient_dot_symmetric_and_real(
            f in arb_field(TorusGrid::plane(2.0, 5.0, 3).unwrap()),
            h in arb_field(TorusGrid::plane(2.0, 5.0, 3).unwrap()),
        ) {
            let a = gradient_dot(&f, &h).unwrap();
            let b = gradient_dot(&h, &f).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.hermitian_defect() <= 1e-12 * (1.0 + a.max_abs()));
            let slow = direct(&f, &h);
            prop_assert!(max_diff(&a, &slow) <= 1e-11 * (1.0 + slow.max_abs()));
        }

        #[test]
        fn semigroup_law(f in arb_field(TorusGrid::line(3.0, 6).unwrap()), s in 0.0f64..0.5, t in 0.0f64..0.5) {
            let table = build_symbol_table(f.grid(), f64::INFINITY).unwrap();
            let two = apply_semigroup(&apply_semigroup(&f, s, &table).unwrap(), t, &table).unwrap();
            let one = apply_semigroup(&f, s + t, &table).unwrap();
            prop_assert!(max_diff(&two, &one) <= 1e-14 * (1.0 + f.max_abs()));
            prop_assert!(one.hermitian_defect() <= 1e-15);
        }

        #[test]
        fn bilinear_scaling_and_symmetry(
            f in arb_field(TorusGrid::line(4.0 * PI, 5).unwrap()),
            h in arb_field(TorusGrid::line(4.0 * PI, 5).unwrap()),
            alpha in -2.0f64..2.0,
        ) {
            let table = build_symbol_table(f.grid(), 0.5).unwrap();
            let times = uniform_times(0.5, 20).unwrap();
            let tf = Trajectory::from_fn(f.grid(), &times, |t, k| f.get(k) * (1.0 - t)).unwrap();
            let th = Trajectory::from_fn(h.grid(), &times, |t, k| h.get(k) * (-t).exp()).unwrap();
            let b = duhamel_bilinear(&tf, &th, &table).unwrap();
            prop_assert_eq!(&b, &duhamel_bilinear(&th, &tf, &table).unwrap());
            let scaled = duhamel_bilinear(&tf.scaled(alpha), &th, &table).unwrap();
            let expect = b.scaled(alpha);
            for (x, y) in scaled.fields().iter().zip(expect.fields()) {
                prop_assert!(max_diff(x, y) <= 1e-12 * (1.0 + y.max_abs()));
                prop_assert!(x.hermitian_defect() <= 1e-12 * (1.0 + x.max_abs()));
            }
        }
    }
}
