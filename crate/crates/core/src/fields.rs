//! Form and vector fields on a flat periodic 3-torus.
//!
//! Derivatives use the 4th-order centered stencil
//! `(-f[i+2] + 8 f[i+1] - 8 f[i-1] + f[i-2]) / 12h` with periodic wrap.
//! The stencil matrix is skew-adjoint, so discrete summation by parts is
//! exact and `d(d f) = 0` up to rounding (the stencils along different
//! axes commute).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exterior::{self, flat_index, layout, KForm, MetricAtPoint, VectorAtPoint};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid {
    n: [usize; 3],
    h: [f64; 3],
}

impl PeriodicGrid {
    /// `n` points per axis with spacing `h`.
    pub fn new(n: [usize; 3], h: [f64; 3]) -> Result<Self> {
        if n.iter().any(|&x| x < 5) {
            return Err(Error::InvalidGrid(format!(
                "need at least 5 points per axis for the stencil, got {n:?}"
            )));
        }
        if h.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacings must be positive, got {h:?}")));
        }
        Ok(Self { n, h })
    }

    /// Unit-period torus with `n` points per axis.
    pub fn unit(n: [usize; 3]) -> Result<Self> {
        Self::new(n, [1.0 / n[0] as f64, 1.0 / n[1] as f64, 1.0 / n[2] as f64])
    }

    pub fn cube(n: usize) -> Self {
        Self::unit([n; 3]).expect("cube grid")
    }

    pub fn points(&self) -> [usize; 3] {
        self.n
    }
    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }
    pub fn periods(&self) -> [f64; 3] {
        [
            self.n[0] as f64 * self.h[0],
            self.n[1] as f64 * self.h[1],
            self.n[2] as f64 * self.h[2],
        ]
    }
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }
    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Row-major point index, last axis fastest.
    pub fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.n[1] + c[1]) * self.n[2] + c[2]
    }

    pub fn coords(&self, p: usize) -> [usize; 3] {
        let k = p % self.n[2];
        let r = p / self.n[2];
        [r / self.n[1], r % self.n[1], k]
    }

    pub fn position(&self, p: usize) -> [f64; 3] {
        let c = self.coords(p);
        [
            c[0] as f64 * self.h[0],
            c[1] as f64 * self.h[1],
            c[2] as f64 * self.h[2],
        ]
    }

    /// Index of the point shifted by `off` along `axis`, with wrap.
    pub fn shifted(&self, p: usize, axis: usize, off: isize) -> usize {
        let mut c = self.coords(p);
        let n = self.n[axis] as isize;
        c[axis] = (c[axis] as isize + off).rem_euclid(n) as usize;
        self.index(c)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// `d/dx^axis` of every component of an interleaved array with `stride`
/// values per point.
pub fn partial(grid: &PeriodicGrid, data: &[f64], stride: usize, axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    if stride == 0 {
        return out;
    }
    let [n0, n1, n2] = grid.n;
    let inv = 1.0 / (12.0 * grid.h[axis]);
    let row = n2 * stride;
    par::fill_chunks(&mut out, row, |r, chunk| {
        let i = r / n1;
        let j = r % n1;
        for k in 0..n2 {
            let at = |o: isize| -> usize {
                let (mut a, mut b, mut c) = (i, j, k);
                match axis {
                    0 => a = (i as isize + o).rem_euclid(n0 as isize) as usize,
                    1 => b = (j as isize + o).rem_euclid(n1 as isize) as usize,
                    _ => c = (k as isize + o).rem_euclid(n2 as isize) as usize,
                }
                ((a * n1 + b) * n2 + c) * stride
            };
            let (p2, p1, m1, m2) = (at(2), at(1), at(-1), at(-2));
            for s in 0..stride {
                chunk[k * stride + s] =
                    (-data[p2 + s] + 8.0 * data[p1 + s] - 8.0 * data[m1 + s] + data[m2 + s]) * inv;
            }
        }
    });
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    grid: PeriodicGrid,
    k: usize,
    data: Vec<f64>,
}

fn stride(k: usize) -> usize {
    3usize.pow(k as u32)
}

impl FormField {
    pub fn zero(grid: PeriodicGrid, k: usize) -> Self {
        assert!(k <= 3, "form degree {k} on a 3-manifold");
        Self {
            grid,
            k,
            data: vec![0.0; grid.len() * stride(k)],
        }
    }

    /// Build pointwise; `f` must return forms of degree `k` in dimension 3.
    pub fn from_fn<F>(grid: PeriodicGrid, k: usize, f: F) -> Self
    where
        F: Fn(usize) -> KForm + Sync + Send,
    {
        let s = stride(k);
        let mut data = vec![0.0; grid.len() * s];
        let n2 = grid.n[2];
        par::fill_chunks(&mut data, s * n2, |r, chunk| {
            for q in 0..n2 {
                let form = f(r * n2 + q);
                debug_assert_eq!(form.degree(), k);
                chunk[q * s..(q + 1) * s].copy_from_slice(form.dense());
            }
        });
        Self { grid, k, data }
    }

    /// Scalar field from a function of position.
    pub fn scalar_fn<F>(grid: PeriodicGrid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync + Send,
    {
        let data = par::map_indexed(grid.len(), |p| f(grid.position(p)));
        Self { grid, k: 0, data }
    }

    pub fn constant(grid: PeriodicGrid, form: &KForm) -> Self {
        assert_eq!(form.n(), 3);
        let mut data = Vec::with_capacity(grid.len() * form.dense().len());
        for _ in 0..grid.len() {
            data.extend_from_slice(form.dense());
        }
        Self {
            grid,
            k: form.degree(),
            data,
        }
    }

    /// Wrap raw dense per-point data (length `points * 3^k`).
    pub fn from_data(grid: PeriodicGrid, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() * stride(k) {
            return Err(Error::DimensionMismatch {
                expected: grid.len() * stride(k),
                got: data.len(),
            });
        }
        Ok(Self { grid, k, data })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    pub fn degree(&self) -> usize {
        self.k
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn stride(&self) -> usize {
        stride(self.k)
    }

    pub fn at(&self, p: usize) -> KForm {
        let s = self.stride();
        KForm::from_dense(3, self.k, &self.data[p * s..(p + 1) * s])
    }

    pub fn set(&mut self, p: usize, form: &KForm) {
        let s = self.stride();
        self.data[p * s..(p + 1) * s].copy_from_slice(form.dense());
    }

    /// Value of a scalar field at point `p`.
    pub fn value(&self, p: usize) -> f64 {
        debug_assert_eq!(self.k, 0);
        self.data[p]
    }

    /// Component `alpha_{idx}` at every point.
    pub fn component(&self, idx: &[usize]) -> Vec<f64> {
        let s = self.stride();
        let off = flat_index(3, idx);
        self.data.chunks(s).map(|c| c[off]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Root mean square over points of the dense component norm.
    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|x| x * x).sum::<f64>() / self.grid.len() as f64).sqrt()
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.k == other.k
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.data.iter_mut().for_each(|x| *x *= s);
        f
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut f = self.clone();
        f.axpy(1.0, other);
        f
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut f = self.clone();
        f.axpy(-1.0, other);
        f
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert!(self.same_shape(other), "field shape mismatch");
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += s * b);
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar(&self, m: &FormField) -> Self {
        assert_eq!(m.k, 0);
        assert_eq!(self.grid, m.grid);
        let s = self.stride();
        let mut f = self.clone();
        f.data
            .chunks_mut(s)
            .zip(&m.data)
            .for_each(|(c, &v)| c.iter_mut().for_each(|x| *x *= v));
        f
    }

    /// Sum over all entries of `self * other` (a flat dot product).
    pub fn dot(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Largest antisymmetry defect over all points.
    pub fn antisymmetry_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| self.at(p).antisymmetry_defect())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldOnGrid {
    grid: PeriodicGrid,
    data: Vec<f64>,
}

impl VectorFieldOnGrid {
    pub fn zero(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            data: vec![0.0; 3 * grid.len()],
        }
    }

    pub fn from_fn<F>(grid: PeriodicGrid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync + Send,
    {
        let v = par::map_indexed(grid.len(), |p| f(grid.position(p)));
        Self {
            grid,
            data: v.into_iter().flatten().collect(),
        }
    }

    /// Build from a function of the point index.
    pub fn from_fn_indexed<F>(grid: PeriodicGrid, f: F) -> Self
    where
        F: Fn(usize) -> [f64; 3] + Sync + Send,
    {
        let v = par::map_indexed(grid.len(), f);
        Self {
            grid,
            data: v.into_iter().flatten().collect(),
        }
    }

    pub fn constant(grid: PeriodicGrid, v: [f64; 3]) -> Self {
        Self::from_fn(grid, move |_| v)
    }

    pub fn from_data(grid: PeriodicGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * grid.len() {
            return Err(Error::DimensionMismatch {
                expected: 3 * grid.len(),
                got: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, p: usize) -> VectorAtPoint {
        VectorAtPoint::new(&self.data[3 * p..3 * p + 3])
    }

    pub fn set(&mut self, p: usize, v: [f64; 3]) {
        self.data[3 * p..3 * p + 3].copy_from_slice(&v);
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.data.iter_mut().for_each(|x| *x *= s);
        f
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid);
        let mut f = self.clone();
        f.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        f
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Exterior derivative of a 0-, 1- or 2-form field.
///
/// A 3-form has no nonzero derivative on a 3-manifold; asking for one is
/// reported as a degree overflow.
pub fn exterior_derivative(f: &FormField) -> Result<FormField> {
    if f.k >= 3 {
        return Err(Error::DegreeOverflow { k: f.k, l: 1, n: 3 });
    }
    Ok(d(f))
}

pub(crate) fn d(f: &FormField) -> FormField {
    let k = f.k;
    assert!(k < 3, "exterior derivative of a 3-form");
    let g = f.grid;
    let s_in = stride(k);
    let parts: Vec<Vec<f64>> = (0..3).map(|a| partial(&g, &f.data, s_in, a)).collect();
    let out_lay = layout(3, k + 1);
    let s_out = stride(k + 1);
    // for each strict output component: (axis, flat input index, sign)
    let terms: Vec<Vec<(usize, usize, f64)>> = out_lay
        .strict
        .iter()
        .map(|e| {
            let j = &e.idx[..k + 1];
            (0..=k)
                .map(|r| {
                    let rest: Vec<usize> = j.iter().enumerate().filter(|&(q, _)| q != r).map(|(_, &x)| x).collect();
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    (j[r], flat_index(3, &rest), sign)
                })
                .collect()
        })
        .collect();
    let mut data = vec![0.0; g.len() * s_out];
    let n2 = g.n[2];
    par::fill_chunks(&mut data, s_out * n2, |r, chunk| {
        for q in 0..n2 {
            let p = r * n2 + q;
            let out = &mut chunk[q * s_out..(q + 1) * s_out];
            for (e, ts) in out_lay.strict.iter().zip(&terms) {
                let v: f64 = ts.iter().map(|&(a, fi, s)| s * parts[a][p * s_in + fi]).sum();
                for &(pi, ps) in &e.perms {
                    out[pi] = ps * v;
                }
            }
        }
    });
    FormField { grid: g, k: k + 1, data }
}

/// Pointwise interior product `X ⌟ f`.
pub fn contract(x: &VectorFieldOnGrid, f: &FormField) -> Result<FormField> {
    x.grid.check(&f.grid)?;
    if f.k == 0 {
        return Ok(FormField::zero(f.grid, 0));
    }
    Ok(FormField::from_fn(f.grid, f.k - 1, |p| exterior::contract(&x.at(p), &f.at(p))))
}

/// Pointwise exterior product.
pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField> {
    a.grid.check(&b.grid)?;
    if a.k + b.k > 3 {
        return Err(Error::DegreeOverflow { k: a.k, l: b.k, n: 3 });
    }
    Ok(FormField::from_fn(a.grid, a.k + b.k, |p| {
        exterior::wedge(&a.at(p), &b.at(p)).expect("degrees checked")
    }))
}

/// Pointwise Hodge star with one metric per point.
pub fn hodge(f: &FormField, metrics: &[MetricAtPoint]) -> FormField {
    assert_eq!(metrics.len(), f.grid.len());
    FormField::from_fn(f.grid, 3 - f.k, |p| exterior::hodge(&f.at(p), &metrics[p]))
}

/// Lie derivative by the Cartan formula `L_X f = d(X⌟f) + X⌟df`.
pub fn lie_derivative(x: &VectorFieldOnGrid, f: &FormField) -> Result<FormField> {
    x.grid.check(&f.grid)?;
    let mut out = FormField::zero(f.grid, f.k);
    if f.k > 0 {
        out.axpy(1.0, &d(&contract(x, f)?));
    }
    if f.k < 3 {
        out.axpy(1.0, &contract(x, &d(f))?);
    }
    Ok(out)
}

/// Coordinate expression `(X^i d_i a_j + a_i d_j X^i) dx^j` for one-forms.
pub fn lie_derivative_coordinate(x: &VectorFieldOnGrid, a: &FormField) -> Result<FormField> {
    x.grid.check(&a.grid)?;
    if a.k != 1 {
        return Err(Error::DegreeMismatch { expected: 1, got: a.k });
    }
    let g = a.grid;
    let da: Vec<Vec<f64>> = (0..3).map(|i| partial(&g, &a.data, 3, i)).collect();
    let dx: Vec<Vec<f64>> = (0..3).map(|j| partial(&g, &x.data, 3, j)).collect();
    let mut data = vec![0.0; 3 * g.len()];
    for p in 0..g.len() {
        for j in 0..3 {
            let mut v = 0.0;
            for i in 0..3 {
                v += x.data[3 * p + i] * da[i][3 * p + j] + a.data[3 * p + i] * dx[j][3 * p + i];
            }
            data[3 * p + j] = v;
        }
    }
    Ok(FormField { grid: g, k: 1, data })
}

/// Lie bracket `[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i`.
pub fn lie_bracket(x: &VectorFieldOnGrid, y: &VectorFieldOnGrid) -> Result<VectorFieldOnGrid> {
    x.grid.check(&y.grid)?;
    let g = x.grid;
    let dy: Vec<Vec<f64>> = (0..3).map(|j| partial(&g, &y.data, 3, j)).collect();
    let dx: Vec<Vec<f64>> = (0..3).map(|j| partial(&g, &x.data, 3, j)).collect();
    let mut data = vec![0.0; 3 * g.len()];
    for p in 0..g.len() {
        for i in 0..3 {
            let mut v = 0.0;
            for j in 0..3 {
                v += x.data[3 * p + j] * dy[j][3 * p + i] - y.data[3 * p + j] * dx[j][3 * p + i];
            }
            data[3 * p + i] = v;
        }
    }
    Ok(VectorFieldOnGrid { grid: g, data })
}

/// Riemann sum of a 3-form: `sum f_123 h1 h2 h3`.
pub fn integrate(f: &FormField) -> Result<f64> {
    if f.k != 3 {
        return Err(Error::DegreeMismatch { expected: 3, got: f.k });
    }
    let off = flat_index(3, &[0, 1, 2]);
    let total: f64 = f.data.chunks(27).map(|c| c[off]).sum();
    Ok(total * f.grid.cell_volume())
}

/// Riemann sum of a per-point density.
pub fn integrate_density(grid: &PeriodicGrid, density: &[f64]) -> f64 {
    par::ordered_sum(density) * grid.cell_volume()
}

/// Integer wave vectors on the half lattice `max |k_i| <= max_mode`,
/// excluding zero (one representative of each `+-k` pair).
pub fn half_lattice(max_mode: usize) -> Vec<[i64; 3]> {
    let kk = max_mode as i64;
    let mut out = Vec::new();
    for a in -kk..=kk {
        for b in -kk..=kk {
            for c in -kk..=kk {
                let v = [a, b, c];
                let first = v.iter().copied().find(|&x| x != 0);
                if matches!(first, Some(x) if x > 0) {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Coefficients of a random trigonometric polynomial; independent of the
/// grid it is later sampled on.
#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    modes: Vec<[i64; 3]>,
    /// per component: (amplitude, phase) per mode
    coeffs: Vec<Vec<(f64, f64)>>,
}

impl TrigPolynomial {
    pub fn random(components: usize, max_mode: usize, amplitude: f64, seed: u64, stream: u64) -> Self {
        let modes = half_lattice(max_mode);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let coeffs = (0..components)
            .map(|_| {
                modes
                    .iter()
                    .map(|_| {
                        let c = if amplitude > 0.0 { rng.gen_range(0.0..=amplitude) } else { 0.0 };
                        let phi = rng.gen_range(0.0..2.0 * PI);
                        (c, phi)
                    })
                    .collect()
            })
            .collect();
        Self { modes, coeffs }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn eval(&self, component: usize, x: [f64; 3], periods: [f64; 3]) -> f64 {
        self.modes
            .iter()
            .zip(&self.coeffs[component])
            .map(|(k, &(c, phi))| {
                let arg = 2.0 * PI * (k[0] as f64 * x[0] / periods[0] + k[1] as f64 * x[1] / periods[1] + k[2] as f64 * x[2] / periods[2]);
                c * (arg + phi).cos()
            })
            .sum()
    }
}

fn check_band(grid: &PeriodicGrid, max_mode: usize) -> Result<()> {
    let limit = grid.n.iter().copied().min().unwrap_or(0) / 4;
    if max_mode > limit {
        return Err(Error::BandLimit { max_mode, limit });
    }
    Ok(())
}

/// Random band-limited k-form field: every strict component is a sum of
/// `c cos(2 pi k.x / L + phi)` over the half lattice with `c` in
/// `[0, amplitude]`.
pub fn random_bandlimited(grid: &PeriodicGrid, k: usize, max_mode: usize, amplitude: f64, seed: u64) -> Result<FormField> {
    random_bandlimited_stream(grid, k, max_mode, amplitude, seed, 0)
}

/// As [`random_bandlimited`] on an independent random stream.
pub fn random_bandlimited_stream(
    grid: &PeriodicGrid,
    k: usize,
    max_mode: usize,
    amplitude: f64,
    seed: u64,
    stream: u64,
) -> Result<FormField> {
    if k > 3 {
        return Err(Error::DegreeOverflow { k, l: 0, n: 3 });
    }
    check_band(grid, max_mode)?;
    let lay = layout(3, k);
    let poly = TrigPolynomial::random(lay.strict.len(), max_mode, amplitude, seed, stream);
    let periods = grid.periods();
    Ok(FormField::from_fn(*grid, k, |p| {
        let x = grid.position(p);
        let strict: Vec<f64> = (0..lay.strict.len()).map(|c| poly.eval(c, x, periods)).collect();
        KForm::from_strict(3, k, &strict)
    }))
}

/// Random band-limited vector field.
pub fn random_vector_field(grid: &PeriodicGrid, max_mode: usize, amplitude: f64, seed: u64, stream: u64) -> Result<VectorFieldOnGrid> {
    check_band(grid, max_mode)?;
    let poly = TrigPolynomial::random(3, max_mode, amplitude, seed, stream);
    let periods = grid.periods();
    Ok(VectorFieldOnGrid::from_fn(*grid, |x| {
        [
            poly.eval(0, x, periods),
            poly.eval(1, x, periods),
            poly.eval(2, x, periods),
        ]
    }))
}

/// Convergence order from errors on grids with spacings ratio `ratio`.
pub fn convergence_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_x(grid: PeriodicGrid) -> FormField {
        let l = grid.periods()[0];
        FormField::scalar_fn(grid, move |x| (2.0 * PI * x[0] / l).sin())
    }

    #[test]
    fn grid_index_roundtrip() {
        let g = PeriodicGrid::unit([8, 9, 10]).unwrap();
        for p in [0, 1, 17, 300, g.len() - 1] {
            assert_eq!(g.index(g.coords(p)), p);
        }
        assert_eq!(g.coords(1), [0, 0, 1]);
        assert_eq!(g.shifted(0, 2, -1), 9);
    }

    #[test]
    fn small_grid_rejected() {
        assert!(PeriodicGrid::unit([4, 8, 8]).is_err());
    }

    #[test]
    fn constant_form_has_zero_derivative() {
        let g = PeriodicGrid::cube(8);
        let f = FormField::constant(g, &KForm::one_form(&[1.0, -2.0, 0.5]));
        assert!(d(&f).max_abs() < 1e-12);
    }

    #[test]
    fn derivative_of_sine() {
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let g = PeriodicGrid::cube(n);
                let df = d(&sine_x(g));
                let exact = FormField::from_fn(g, 1, |p| {
                    let x = g.position(p);
                    KForm::one_form(&[2.0 * PI * (2.0 * PI * x[0]).cos(), 0.0, 0.0])
                });
                df.max_diff(&exact)
            })
            .collect();
        let order = convergence_order(errs[0], errs[1], 2.0);
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn three_form_derivative_is_error() {
        let g = PeriodicGrid::cube(8);
        assert!(exterior_derivative(&FormField::zero(g, 3)).is_err());
    }

    #[test]
    fn integrate_constant_volume() {
        let g = PeriodicGrid::new([8, 8, 10], [0.5, 0.25, 0.1]).unwrap();
        let f = FormField::constant(g, &KForm::basis(3, &[0, 1, 2]));
        assert!((integrate(&f).unwrap() - 4.0 * 2.0 * 1.0).abs() < 1e-12);
        assert!(integrate(&FormField::zero(g, 2)).is_err());
    }

    #[test]
    fn integrate_mean_zero() {
        let g = PeriodicGrid::cube(8);
        let s = sine_x(g);
        let f = FormField::from_fn(g, 3, |p| KForm::from_strict(3, 3, &[s.value(p)]));
        assert!(integrate(&f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn half_lattice_counts() {
        assert_eq!(half_lattice(1).len(), 13);
        assert_eq!(half_lattice(2).len(), 62);
    }

    #[test]
    fn bandlimited_zero_amplitude_and_limits() {
        let g = PeriodicGrid::cube(8);
        assert_eq!(random_bandlimited(&g, 1, 1, 0.0, 3).unwrap().max_abs(), 0.0);
        assert!(matches!(
            random_bandlimited(&g, 1, 3, 0.1, 3),
            Err(Error::BandLimit { max_mode: 3, limit: 2 })
        ));
    }

    #[test]
    fn lie_of_zero_field() {
        let g = PeriodicGrid::cube(8);
        let a = random_bandlimited(&g, 1, 1, 0.3, 1).unwrap();
        let l = lie_derivative(&VectorFieldOnGrid::zero(g), &a).unwrap();
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_error() {
        let a = FormField::zero(PeriodicGrid::cube(8), 1);
        let x = VectorFieldOnGrid::zero(PeriodicGrid::cube(10));
        assert_eq!(lie_derivative(&x, &a), Err(Error::GridMismatch));
    }
}
