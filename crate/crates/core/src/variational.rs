//! Functional derivatives of the constraint functionals, the metric
//! variation kernel of the Hodge star, form/density conversions and the
//! discrete Poisson bracket.
//!
//! Gradients are forms `G` with `dF = ∫ dβ ^ G`; on the grid the integral is
//! the Riemann sum, so `G` equals the partial derivative of the discrete
//! functional divided by the cell volume.

use crate::dynamics::PhaseState;
use crate::error::{Error, Result};
use crate::exterior::{self, KForm, VectorAtPoint};
use crate::fields::{self, FormField, PeriodicGrid, VectorFieldOnGrid};
use crate::teleparallel::{InternalMetric as Eta, Legs, PointGeometry};

/// `δF/δθ^A` (four 2-form fields) and `δF/δp_A` (four 1-form fields).
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalGradient {
    pub d_theta: [FormField; 4],
    pub d_p: [FormField; 4],
}

impl FunctionalGradient {
    pub fn zero(grid: PeriodicGrid) -> Self {
        Self {
            d_theta: [0; 4].map(|_| FormField::zero(grid, 2)),
            d_p: [0; 4].map(|_| FormField::zero(grid, 1)),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.d_theta[0].grid()
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        for a in 0..4 {
            self.d_theta[a].axpy(s, &other.d_theta[a]);
            self.d_p[a].axpy(s, &other.d_p[a]);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.d_theta
            .iter()
            .chain(self.d_p.iter())
            .map(|f| f.max_abs())
            .fold(0.0, f64::max)
    }
}

/// Weight-one density components of a gradient:
/// `theta[A][p][i] = δF̃/δθ^A_i`, `p[A][p][(12),(13),(23)] = δF̃/δp_{A,jk}`
/// (strict components only, each counted once).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGradient {
    pub grid: PeriodicGrid,
    pub theta: [Vec<[f64; 3]>; 4],
    pub p: [Vec<[f64; 3]>; 4],
}

/// `ε̃^{abc}` with `ε̃^{123} = 1` (0-based indices).
pub fn levi_density(a: usize, b: usize, c: usize) -> f64 {
    exterior::permutation_sign(&[a, b, c])
}

/// Residual of `ε̃_{b.. a..} ε̃^{b.. c..} = k! l! δ^{[c}_{a} ..` over all
/// index choices in three dimensions, for every split `k + l = 3`.
pub fn levi_density_identity_residual() -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=3usize {
        let l = 3 - k;
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        let tuples = |len: usize| -> Vec<Vec<usize>> {
            (0..3usize.pow(len as u32))
                .map(|mut f| {
                    let mut v = vec![0; len];
                    for j in (0..len).rev() {
                        v[j] = f % 3;
                        f /= 3;
                    }
                    v
                })
                .collect()
        };
        let perms = exterior::permutations(&(0..l).collect::<Vec<_>>());
        for a in tuples(l) {
            for c in tuples(l) {
                let mut lhs = 0.0;
                for b in tuples(k) {
                    let lo: Vec<usize> = b.iter().chain(a.iter()).copied().collect();
                    let hi: Vec<usize> = b.iter().chain(c.iter()).copied().collect();
                    lhs += exterior::permutation_sign(&lo) * exterior::permutation_sign(&hi);
                }
                let mut delta = 0.0;
                for p in &perms {
                    let prod: f64 = (0..l).map(|j| if c[p[j]] == a[j] { 1.0 } else { 0.0 }).product();
                    delta += exterior::permutation_sign(p) * prod;
                }
                let rhs = fact(k) * delta;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

/// 2-form gradient to weight-one density: `D^a = 1/2 G_bc ε̃^{abc}`.
pub fn two_form_to_density(g: &KForm) -> [f64; 3] {
    let d = g.dense();
    let mut out = [0.0; 3];
    for (a, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for b in 0..3 {
            for c in 0..3 {
                s += d[3 * b + c] * levi_density(a, b, c);
            }
        }
        *o = 0.5 * s;
    }
    out
}

/// Inverse of [`two_form_to_density`]: `G_bc = D^a ε̃_{abc}`.
pub fn density_to_two_form(dens: [f64; 3]) -> KForm {
    let mut dense = [0.0; 9];
    for b in 0..3 {
        for c in 0..3 {
            dense[3 * b + c] = (0..3).map(|a| dens[a] * levi_density(a, b, c)).sum();
        }
    }
    KForm::from_dense(3, 2, &dense)
}

/// 1-form gradient to weight-one density with strict components
/// `D^{ab} = 1/2 G_c ε̃^{abc}` for `(ab) = (12), (13), (23)`.
pub fn one_form_to_density(g: &KForm) -> [f64; 3] {
    let c = g.dense();
    let pairs = [(0, 1), (0, 2), (1, 2)];
    pairs.map(|(a, b)| 0.5 * (0..3).map(|k| c[k] * levi_density(a, b, k)).sum::<f64>())
}

/// Inverse of [`one_form_to_density`]: `G_c = sum_{a,b} D^{ab} ε̃_{abc}`.
pub fn density_to_one_form(dens: [f64; 3]) -> KForm {
    let full = |a: usize, b: usize| -> f64 {
        match (a, b) {
            (0, 1) => dens[0],
            (1, 0) => -dens[0],
            (0, 2) => dens[1],
            (2, 0) => -dens[1],
            (1, 2) => dens[2],
            (2, 1) => -dens[2],
            _ => 0.0,
        }
    };
    let c: Vec<f64> = (0..3)
        .map(|k| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += full(a, b) * levi_density(a, b, k);
                }
            }
            s
        })
        .collect();
    KForm::one_form(&c)
}

pub fn to_density(g: &FunctionalGradient) -> DensityGradient {
    let grid = *g.grid();
    let theta = [0, 1, 2, 3].map(|a| (0..grid.len()).map(|p| two_form_to_density(&g.d_theta[a].at(p))).collect());
    let p = [0, 1, 2, 3].map(|a| (0..grid.len()).map(|q| one_form_to_density(&g.d_p[a].at(q))).collect());
    DensityGradient { grid, theta, p }
}

pub fn from_density(d: &DensityGradient) -> FunctionalGradient {
    let grid = d.grid;
    FunctionalGradient {
        d_theta: [0, 1, 2, 3].map(|a| FormField::from_fn(grid, 2, |p| density_to_two_form(d.theta[a][p]))),
        d_p: [0, 1, 2, 3].map(|a| FormField::from_fn(grid, 1, |p| density_to_one_form(d.p[a][p]))),
    }
}

/// Form -> density -> form; returns the recovered gradient.
pub fn form_density_roundtrip(g: &FunctionalGradient) -> FunctionalGradient {
    from_density(&to_density(g))
}

/// Momentum 2-form to its density `p̃^c = 1/2 p_ab ε̃^{cab}`.
pub fn momentum_density(p: &FormField) -> Result<Vec<[f64; 3]>> {
    if p.degree() != 2 {
        return Err(Error::DegreeMismatch {
            expected: 2,
            got: p.degree(),
        });
    }
    Ok((0..p.grid().len()).map(|q| two_form_to_density(&p.at(q))).collect())
}

/// `p_ab = p̃^c ε̃_{cab}`
pub fn momentum_from_density(grid: PeriodicGrid, dens: &[[f64; 3]]) -> Result<FormField> {
    if dens.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: dens.len(),
        });
    }
    Ok(FormField::from_fn(grid, 2, |q| density_to_two_form(dens[q])))
}

// ---------------------------------------------------------------------------
// metric variation of the Hodge star

/// `α ^ ⋆'_A β` for A = 0..3 at one point:
/// `θ^B ⌟ (η_AB α^*β - (θ_A⌟α)^*(θ_B⌟β) - (θ_B⌟α)^*(θ_A⌟β))`.
pub fn star_variation_point(alpha: &KForm, beta: &KForm, geo: &PointGeometry) -> [KForm; 4] {
    let k = alpha.degree();
    assert_eq!(beta.degree(), k, "star variation needs equal degrees");
    let ab = exterior::wedge(alpha, &geo.star(beta)).expect("top form");
    let low: [VectorAtPoint; 4] = [0, 1, 2, 3].map(|a| geo.vec_lower(a));
    let up: [VectorAtPoint; 4] = [0, 1, 2, 3].map(|a| geo.vec_upper(a));
    let mut out = [0, 1, 2, 3].map(|a| exterior::contract(&low[a], &ab));
    if k == 0 {
        return out;
    }
    let ca: [KForm; 4] = [0, 1, 2, 3].map(|a| exterior::contract(&low[a], alpha));
    let sb: [KForm; 4] = [0, 1, 2, 3].map(|a| geo.star(&exterior::contract(&low[a], beta)));
    for a in 0..4 {
        for b in 0..4 {
            let t2 = exterior::wedge(&ca[a], &sb[b]).expect("top form");
            let t3 = exterior::wedge(&ca[b], &sb[a]).expect("top form");
            let t = t2.add(&t3);
            out[a].axpy(-1.0, &exterior::contract(&up[b], &t));
        }
    }
    out
}

/// `max |ξ^A (α ^ ⋆'_A β)|`, which vanishes identically.
pub fn normal_transversality_residual(alpha: &KForm, beta: &KForm, geo: &PointGeometry) -> f64 {
    let k = star_variation_point(alpha, beta, geo);
    let mut s = KForm::zero(3, 2);
    for (a, ka) in k.iter().enumerate() {
        s.axpy(geo.xi[a], ka);
    }
    s.max_abs()
}

/// Density form of the same kernel:
/// `(⟨α|β⟩η_AB - ⟨θ_B⌟α|θ_A⌟β⟩ - ⟨θ_A⌟α|θ_B⌟β⟩) θ^{Bi} sqrt(det q)`,
/// converted to a 2-form.
pub fn star_variation_density_point(alpha: &KForm, beta: &KForm, geo: &PointGeometry) -> [KForm; 4] {
    let k = alpha.degree();
    let sp = |x: &KForm, y: &KForm| exterior::scalar_product(x, y, &geo.q).unwrap();
    let ab = sp(alpha, beta);
    let low: [VectorAtPoint; 4] = [0, 1, 2, 3].map(|a| geo.vec_lower(a));
    let ca: [KForm; 4] = [0, 1, 2, 3].map(|a| exterior::contract(&low[a], alpha));
    let cb: [KForm; 4] = [0, 1, 2, 3].map(|a| exterior::contract(&low[a], beta));
    [0, 1, 2, 3].map(|a| {
        let mut dens = [0.0; 3];
        for b in 0..4 {
            let mut coef = if a == b { Eta::DIAG[a] * ab } else { 0.0 };
            if k > 0 {
                coef -= sp(&ca[b], &cb[a]) + sp(&ca[a], &cb[b]);
            }
            for (i, d) in dens.iter_mut().enumerate() {
                // θ^{Bi} = η^{BB} θ_B^i
                *d += coef * Eta::DIAG[b] * geo.theta_vec[b][i] * geo.sqrt_det;
            }
        }
        density_to_two_form(dens)
    })
}

/// `α ^ ⋆'_A β` as four 2-form fields.
pub fn star_variation(alpha: &FormField, beta: &FormField, geo: &[PointGeometry]) -> Result<[FormField; 4]> {
    if alpha.degree() != beta.degree() {
        return Err(Error::DegreeMismatch {
            expected: alpha.degree(),
            got: beta.degree(),
        });
    }
    if alpha.grid() != beta.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *alpha.grid();
    let per_point: Vec<[KForm; 4]> = crate::par::map_indexed(grid.len(), |p| star_variation_point(&alpha.at(p), &beta.at(p), &geo[p]));
    Ok(gather(grid, 2, &per_point))
}

fn gather(grid: PeriodicGrid, k: usize, per_point: &[[KForm; 4]]) -> [FormField; 4] {
    [0, 1, 2, 3].map(|a| FormField::from_fn(grid, k, |p| per_point[p][a].clone()))
}

/// `∂ sqrt(det q) / ∂θ^A_i = sqrt(det q) θ_A^i`, returned as `[A][i]`.
pub fn sqrt_det_gradient(theta: &Legs) -> Result<[[f64; 3]; 4]> {
    let g = PointGeometry::new(theta)?;
    let mut out = [[0.0; 3]; 4];
    for a in 0..4 {
        for i in 0..3 {
            out[a][i] = g.sqrt_det * g.theta_vec[a][i];
        }
    }
    Ok(out)
}

/// Pointwise residual 3-form of
/// `L(α^*β) - Lα^*β - α^*Lβ - Lθ^A ^ (α ^ ⋆'_A β)`.
pub fn lie_star_identity_check(
    mv: &VectorFieldOnGrid,
    alpha: &FormField,
    beta: &FormField,
    theta: &crate::teleparallel::CotetradField,
) -> Result<FormField> {
    let geo = theta.geometry()?;
    let grid = *alpha.grid();
    let star = |f: &FormField| fields::hodge(f, &geo.iter().map(|g| g.q).collect::<Vec<_>>());
    let ab = fields::wedge(alpha, &star(beta))?;
    let mut res = fields::lie_derivative(mv, &ab)?;
    let la = fields::lie_derivative(mv, alpha)?;
    let lb = fields::lie_derivative(mv, beta)?;
    res.axpy(-1.0, &fields::wedge(&la, &star(beta))?);
    res.axpy(-1.0, &fields::wedge(alpha, &star(&lb))?);
    let kern = star_variation(alpha, beta, &geo)?;
    for (a, k) in kern.iter().enumerate() {
        let lt = fields::lie_derivative(mv, theta.leg(a))?;
        res.axpy(-1.0, &fields::wedge(&lt, k)?);
    }
    debug_assert_eq!(*res.grid(), grid);
    Ok(res)
}

// ---------------------------------------------------------------------------
// gradients of the scalar constraint pieces

/// `δS1/δθ^A = M/2 p_B ^ ⋆'_A p^B`
pub fn ds1_dtheta(geo: &[PointGeometry], p: &[FormField; 4], m: &FormField) -> [FormField; 4] {
    let grid = *m.grid();
    let per_point: Vec<[KForm; 4]> = crate::par::map_indexed(grid.len(), |q| {
        let mut acc = [0; 4].map(|_| KForm::zero(3, 2));
        for b in 0..4 {
            let pb = p[b].at(q);
            let k = star_variation_point(&pb, &pb, &geo[q]);
            for a in 0..4 {
                acc[a].axpy(0.5 * m.value(q) * Eta::DIAG[b], &k[a]);
            }
        }
        acc
    });
    gather(grid, 2, &per_point)
}

/// `δS1/δp_A = M *p^A`
pub fn ds1_dp(geo: &[PointGeometry], p: &[FormField; 4], m: &FormField) -> [FormField; 4] {
    let grid = *m.grid();
    [0, 1, 2, 3].map(|a| FormField::from_fn(grid, 1, |q| geo[q].star(&p[a].at(q)).scale(m.value(q) * Eta::DIAG[a])))
}

/// `w_B = sum_{C<D<E} ε^B_CDE θ^C ^ θ^D ^ θ^E` at one point.
fn triple_legs(geo: &PointGeometry) -> [KForm; 4] {
    [0, 1, 2, 3].map(|b| {
        let r: Vec<usize> = (0..4).filter(|&x| x != b).collect();
        let w = exterior::wedge(&exterior::wedge(&geo.leg(r[0]), &geo.leg(r[1])).unwrap(), &geo.leg(r[2])).unwrap();
        w.scale(Eta::levi_up(b, r[0], r[1], r[2]))
    })
}

/// `δS2/δθ^A = M/2 (*dp_D) ε^D_BCA θ^B^θ^C + M/3! ε^B_CDE dp_B ^ ⋆'_A (θ^C^θ^D^θ^E)`
pub fn ds2_dtheta(geo: &[PointGeometry], p: &[FormField; 4], m: &FormField) -> [FormField; 4] {
    let grid = *m.grid();
    let dp: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(&p[a]));
    let per_point: Vec<[KForm; 4]> = crate::par::map_indexed(grid.len(), |q| {
        let g = &geo[q];
        let mv = m.value(q);
        let dpq: [KForm; 4] = [0, 1, 2, 3].map(|a| dp[a].at(q));
        let sdp: [f64; 4] = [0, 1, 2, 3].map(|a| g.star(&dpq[a]).value());
        let mut acc = [0; 4].map(|_| KForm::zero(3, 2));
        for (a, out) in acc.iter_mut().enumerate() {
            for b in 0..4 {
                for c in b + 1..4 {
                    let coef: f64 = (0..4).map(|dd| sdp[dd] * Eta::levi_up(dd, b, c, a)).sum();
                    if coef != 0.0 {
                        let w = exterior::wedge(&g.leg(b), &g.leg(c)).unwrap();
                        out.axpy(mv * coef, &w);
                    }
                }
            }
        }
        let w = triple_legs(g);
        for b in 0..4 {
            let k = star_variation_point(&dpq[b], &w[b], g);
            for a in 0..4 {
                acc[a].axpy(mv, &k[a]);
            }
        }
        acc
    });
    gather(grid, 2, &per_point)
}

/// `δS2/δp_A = d(M ξ^A)`
pub fn ds2_dp(geo: &[PointGeometry], m: &FormField) -> [FormField; 4] {
    let grid = *m.grid();
    [0, 1, 2, 3].map(|a| {
        let f = FormField::from_fn(grid, 0, |q| KForm::scalar(3, m.value(q) * geo[q].xi[a]));
        fields::d(&f)
    })
}

/// `δS3/δθ^A = d(M *dθ_A) + M/2 dθ^B ^ ⋆'_A dθ_B`
pub fn ds3_dtheta(theta: &crate::teleparallel::CotetradField, geo: &[PointGeometry], m: &FormField) -> [FormField; 4] {
    let grid = *m.grid();
    let dth: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(theta.leg(a)));
    let per_point: Vec<[KForm; 4]> = crate::par::map_indexed(grid.len(), |q| {
        let mut acc = [0; 4].map(|_| KForm::zero(3, 2));
        for b in 0..4 {
            let db = dth[b].at(q);
            let k = star_variation_point(&db, &db, &geo[q]);
            for a in 0..4 {
                acc[a].axpy(0.5 * m.value(q) * Eta::DIAG[b], &k[a]);
            }
        }
        acc
    });
    let mut out = gather(grid, 2, &per_point);
    for (a, o) in out.iter_mut().enumerate() {
        let inner = FormField::from_fn(grid, 1, |q| geo[q].star(&dth[a].at(q)).scale(m.value(q) * Eta::DIAG[a]));
        o.axpy(1.0, &fields::d(&inner));
    }
    out
}

// ---------------------------------------------------------------------------
// Poisson bracket

/// Anything that can produce its functional gradient at a state.
pub trait GradientProvider {
    fn gradient(&self, state: &PhaseState) -> Result<FunctionalGradient>;
}

/// `∫ a ^ b` for a 2-form field and a 1-form field.
pub fn pair_21(a: &FormField, b: &FormField) -> f64 {
    debug_assert!(a.degree() == 2 && b.degree() == 1);
    let (ad, bd) = (a.data(), b.data());
    let mut s = 0.0;
    for q in 0..a.grid().len() {
        let x = &ad[9 * q..9 * q + 9];
        let y = &bd[3 * q..3 * q + 3];
        s += x[1] * y[2] - x[2] * y[1] + x[5] * y[0];
    }
    s * a.grid().cell_volume()
}

/// `{F, G}` from two gradients at the same state.
pub fn bracket_of_gradients(f: &FunctionalGradient, g: &FunctionalGradient) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let mut s = 0.0;
    for a in 0..4 {
        s += pair_21(&f.d_theta[a], &g.d_p[a]) - pair_21(&g.d_theta[a], &f.d_p[a]);
    }
    Ok(s)
}

pub fn poisson_bracket(f: &dyn GradientProvider, g: &dyn GradientProvider, state: &PhaseState) -> Result<f64> {
    bracket_of_gradients(&f.gradient(state)?, &g.gradient(state)?)
}

// ---------------------------------------------------------------------------
// finite-difference oracle

/// Perturbation sizes of the central-difference sweep.
pub const FD_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Relative errors below this are treated as exact agreement.
pub const FD_FLOOR: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdCheck {
    pub analytic: f64,
    /// best relative error over the sweep
    pub rel_error: f64,
    /// relative errors at steps `h` and `h/2` for the order estimate
    pub richardson: (f64, f64),
    /// measured order in the perturbation size (NaN when both errors sit
    /// below the floor)
    pub order: f64,
}

impl FdCheck {
    pub fn second_order(&self) -> bool {
        let (a, b) = self.richardson;
        (a < FD_FLOOR && b < FD_FLOOR) || (1.5..=2.5).contains(&self.order)
    }
}

/// Compare an analytic directional derivative with central differences of
/// `f(t)` around `t = 0`.
pub fn directional_check<F>(analytic: f64, f: F, richardson_step: f64) -> FdCheck
where
    F: Fn(f64) -> f64,
{
    let scale = analytic.abs().max(f64::MIN_POSITIVE);
    let rel = |h: f64| ((f(h) - f(-h)) / (2.0 * h) - analytic).abs() / scale;
    let rel_error = FD_STEPS.iter().map(|&h| rel(h)).fold(f64::INFINITY, f64::min);
    let e1 = rel(richardson_step);
    let e2 = rel(richardson_step / 2.0);
    let order = if e1 < FD_FLOOR && e2 < FD_FLOOR {
        f64::NAN
    } else {
        (e1 / e2).log2()
    };
    FdCheck {
        analytic,
        rel_error,
        richardson: (e1, e2),
        order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teleparallel::CotetradField;

    #[test]
    fn density_identity_holds() {
        assert_eq!(levi_density_identity_residual(), 0.0);
    }

    #[test]
    fn basis_gradient_density() {
        let d = two_form_to_density(&KForm::basis(3, &[0, 1]));
        assert_eq!(d, [0.0, 0.0, 1.0]);
        let back = density_to_two_form(d);
        assert_eq!(back, KForm::basis(3, &[0, 1]));
    }

    #[test]
    fn one_form_density_roundtrip() {
        let g = KForm::one_form(&[0.3, -1.1, 2.5]);
        let back = density_to_one_form(one_form_to_density(&g));
        assert!(back.max_diff(&g) < 1e-15);
    }

    #[test]
    fn momentum_density_basis() {
        let grid = PeriodicGrid::cube(8);
        let p = FormField::constant(grid, &KForm::basis(3, &[0, 1]));
        let d = momentum_density(&p).unwrap();
        assert_eq!(d[5], [0.0, 0.0, 1.0]);
        assert!(momentum_density(&FormField::zero(grid, 1)).is_err());
    }

    #[test]
    fn zero_form_kernel_on_flat() {
        let grid = PeriodicGrid::cube(8);
        let geo = CotetradField::flat(grid).geometry().unwrap();
        let one = KForm::scalar(3, 1.0);
        let k = star_variation_point(&one, &one, &geo[0]);
        let eps = exterior::volume_form(&geo[0].q);
        for a in 0..4 {
            let expect = exterior::contract(&geo[0].vec_lower(a), &eps);
            assert!(k[a].max_diff(&expect) < 1e-15);
        }
        // theta^0 vanishes on the flat cotetrad
        assert_eq!(k[0].max_abs(), 0.0);
    }

    #[test]
    fn kernel_matches_density_route() {
        let theta: Legs = [[0.1, -0.05, 0.02], [1.05, 0.1, 0.0], [-0.03, 0.95, 0.08], [0.04, 0.02, 1.1]];
        let geo = PointGeometry::new(&theta).unwrap();
        let a = KForm::from_strict(3, 2, &[0.4, -1.2, 0.7]);
        let b = KForm::from_strict(3, 2, &[-0.3, 0.5, 0.9]);
        let x = star_variation_point(&a, &b, &geo);
        let y = star_variation_density_point(&a, &b, &geo);
        for i in 0..4 {
            assert!(x[i].max_diff(&y[i]) < 1e-13, "{i}: {:?} vs {:?}", x[i], y[i]);
        }
    }

    #[test]
    fn richardson_on_a_cubic() {
        let c = directional_check(3.0, |t| (1.0 + t).powi(3), 1e-2);
        assert!(c.rel_error < 1e-8);
        assert!(c.second_order(), "{c:?}");
    }
}
