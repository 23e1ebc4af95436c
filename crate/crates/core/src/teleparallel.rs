//! Geometry derived from a cotetrad: induced spatial metric, internal
//! normal, lapse and shift, and pointwise 4D checks of the 3+1 split.
//!
//! Internal indices run over 0..4 with `eta = diag(-1, 1, 1, 1)` and
//! `eps_{0123} = +1`. Spacetime coordinate 0 is time.

use crate::error::{Error, Result};
use crate::exterior::{self, layout, permutation_sign, KForm, MetricAtPoint, Signature, VectorAtPoint};
use crate::fields::{random_bandlimited_stream, FormField, PeriodicGrid, VectorFieldOnGrid};
use crate::linalg::{self, Mat4};
use crate::par;

/// Condition number above which dual-reper inversions are flagged.
pub const CONDITION_WARN: f64 = 1e8;

/// The fixed Minkowski metric on the internal space.
#[derive(Clone, Copy, Debug, Default)]
pub struct InternalMetric;

impl InternalMetric {
    pub const DIAG: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

    /// `eta_{AB}` (equal to `eta^{AB}`).
    pub fn eta(a: usize, b: usize) -> f64 {
        if a == b {
            Self::DIAG[a]
        } else {
            0.0
        }
    }

    pub fn matrix() -> Mat4 {
        let mut m = linalg::ZERO4;
        for (a, row) in m.iter_mut().enumerate() {
            row[a] = Self::DIAG[a];
        }
        m
    }

    /// Lower (or raise) an internal index.
    pub fn lower(v: [f64; 4]) -> [f64; 4] {
        [-v[0], v[1], v[2], v[3]]
    }

    /// `v_A w^A`
    pub fn dot(v: [f64; 4], w: [f64; 4]) -> f64 {
        -v[0] * w[0] + v[1] * w[1] + v[2] * w[2] + v[3] * w[3]
    }

    /// `eps_{ABCD}`
    pub fn levi(a: usize, b: usize, c: usize, d: usize) -> f64 {
        permutation_sign(&[a, b, c, d])
    }

    /// `eps^A_{BCD}`
    pub fn levi_up(a: usize, b: usize, c: usize, d: usize) -> f64 {
        Self::DIAG[a] * Self::levi(a, b, c, d)
    }
}

type Eta = InternalMetric;

/// Spatial cotetrad legs at one point: `theta[A][i]`.
pub type Legs = [[f64; 3]; 4];

/// `q_ij = eta_AB theta^A_i theta^B_j`
pub fn induced_metric_at(theta: &Legs) -> Mat4 {
    let mut q = linalg::ZERO4;
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] = (0..4).map(|a| Eta::DIAG[a] * theta[a][i] * theta[a][j]).sum();
        }
    }
    q
}

fn positive_definite3(q: &Mat4) -> bool {
    q[0][0] > 0.0 && q[0][0] * q[1][1] - q[0][1] * q[1][0] > 0.0 && linalg::det(q, 3) > 0.0
}

/// Which sign of the closed-form normal to use. `Chosen` is the branch
/// giving a positive lapse on oriented cotetrads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum XiBranch {
    #[default]
    Chosen,
    Opposite,
}

/// Geometry of the spatial cotetrad at one point.
#[derive(Clone, Copy, Debug)]
pub struct PointGeometry {
    pub theta: Legs,
    pub q: MetricAtPoint,
    /// `sqrt(det q)`
    pub sqrt_det: f64,
    /// `xi^A`
    pub xi: [f64; 4],
    /// `theta_A^i = q^ij eta_AB theta^B_j`
    pub theta_vec: [[f64; 3]; 4],
}

impl PointGeometry {
    pub fn new(theta: &Legs) -> Result<Self> {
        Self::with_branch(theta, XiBranch::Chosen)
    }

    pub fn with_branch(theta: &Legs, branch: XiBranch) -> Result<Self> {
        let g = induced_metric_at(theta);
        if !positive_definite3(&g) {
            return Err(Error::NotPositiveDefinite {
                point: 0,
                coords: [0; 3],
            });
        }
        let q = MetricAtPoint::new(g, Signature::euclidean(3), 1.0)?;
        let sqrt_det = q.det().sqrt();
        let xi = xi_closed_form(theta, sqrt_det, branch);
        let qi = q.ginv();
        let mut theta_vec = [[0.0; 3]; 4];
        for a in 0..4 {
            for i in 0..3 {
                theta_vec[a][i] = Eta::DIAG[a] * (0..3).map(|j| qi[i][j] * theta[a][j]).sum::<f64>();
            }
        }
        Ok(Self {
            theta: *theta,
            q,
            sqrt_det,
            xi,
            theta_vec,
        })
    }

    /// `theta^A` as a 3D one-form.
    pub fn leg(&self, a: usize) -> KForm {
        KForm::one_form(&self.theta[a])
    }

    /// `theta_A` (internal index lowered).
    pub fn leg_lower(&self, a: usize) -> KForm {
        self.leg(a).scale(Eta::DIAG[a])
    }

    /// Vector `theta_A^i d_i` (lower internal index).
    pub fn vec_lower(&self, a: usize) -> VectorAtPoint {
        VectorAtPoint::new(&self.theta_vec[a])
    }

    /// Vector `theta^{A i} d_i` (upper internal index).
    pub fn vec_upper(&self, a: usize) -> VectorAtPoint {
        self.vec_lower(a).scale(Eta::DIAG[a])
    }

    pub fn star(&self, f: &KForm) -> KForm {
        exterior::hodge(f, &self.q)
    }
}

/// `xi^A = -1/3! eps^A_BCD *(theta^B ^ theta^C ^ theta^D)` (chosen branch).
fn xi_closed_form(theta: &Legs, sqrt_det: f64, branch: XiBranch) -> [f64; 4] {
    let sign = match branch {
        XiBranch::Chosen => -1.0,
        XiBranch::Opposite => 1.0,
    };
    let mut xi = [0.0; 4];
    for (a, x) in xi.iter_mut().enumerate() {
        let rest: Vec<usize> = (0..4).filter(|&b| b != a).collect();
        // the 3! orderings of (B, C, D) all give the same term
        let mut m = linalg::ZERO4;
        for (r, &b) in rest.iter().enumerate() {
            m[r][..3].copy_from_slice(&theta[b]);
        }
        let top = linalg::det(&m, 3);
        *x = sign * Eta::levi_up(a, rest[0], rest[1], rest[2]) * top / sqrt_det;
    }
    xi
}

/// Residual of `xi.xi = -1` and `xi^A theta_A = 0`.
pub fn normal_residual(g: &PointGeometry) -> f64 {
    let mut r = (Eta::dot(g.xi, g.xi) + 1.0).abs();
    for i in 0..3 {
        let s: f64 = (0..4).map(|a| Eta::DIAG[a] * g.xi[a] * g.theta[a][i]).sum();
        r = r.max(s.abs());
    }
    r
}

/// Residual of `1/2 eps^D_BCA theta^B ^ theta^C xi^A = -*theta^D`.
pub fn xi_identity_residual(g: &PointGeometry) -> f64 {
    let mut worst: f64 = 0.0;
    for dd in 0..4 {
        let mut lhs = KForm::zero(3, 2);
        for b in 0..4 {
            for c in 0..4 {
                for a in 0..4 {
                    let e = Eta::levi_up(dd, b, c, a);
                    if e == 0.0 {
                        continue;
                    }
                    let w = exterior::wedge(&g.leg(b), &g.leg(c)).unwrap();
                    lhs.axpy(0.5 * e * g.xi[a], &w);
                }
            }
        }
        let rhs = g.star(&g.leg(dd)).scale(-1.0);
        worst = worst.max(lhs.max_diff(&rhs));
    }
    worst
}

/// Four one-form fields `theta^A` on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct CotetradField {
    legs: [FormField; 4],
}

impl CotetradField {
    pub fn new(legs: [FormField; 4]) -> Result<Self> {
        let g = *legs[0].grid();
        for l in &legs {
            if l.degree() != 1 {
                return Err(Error::DegreeMismatch {
                    expected: 1,
                    got: l.degree(),
                });
            }
            if *l.grid() != g {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { legs })
    }

    /// `theta^0 = 0`, `theta^a = dx^a`.
    pub fn flat(grid: PeriodicGrid) -> Self {
        let legs = [0, 1, 2, 3].map(|a| {
            if a == 0 {
                FormField::zero(grid, 1)
            } else {
                FormField::constant(grid, &KForm::basis(3, &[a - 1]))
            }
        });
        Self { legs }
    }

    /// Flat legs plus band-limited perturbations bounded by `delta` in
    /// every component; validated to have a positive definite `q`.
    pub fn random_near_flat(grid: PeriodicGrid, delta: f64, max_mode: usize, seed: u64) -> Result<Self> {
        let modes = crate::fields::half_lattice(max_mode).len() as f64;
        let flat = Self::flat(grid);
        let mut legs = flat.legs.clone();
        for (a, leg) in legs.iter_mut().enumerate() {
            let pert = random_bandlimited_stream(&grid, 1, max_mode, delta / modes, seed, 100 + a as u64)?;
            leg.axpy(1.0, &pert);
        }
        let c = Self { legs };
        c.geometry()?;
        Ok(c)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.legs[0].grid()
    }

    pub fn leg(&self, a: usize) -> &FormField {
        &self.legs[a]
    }

    pub fn legs(&self) -> &[FormField; 4] {
        &self.legs
    }

    pub fn legs_mut(&mut self) -> &mut [FormField; 4] {
        &mut self.legs
    }

    pub fn at(&self, p: usize) -> Legs {
        let mut t = [[0.0; 3]; 4];
        for (a, row) in t.iter_mut().enumerate() {
            row.copy_from_slice(&self.legs[a].data()[3 * p..3 * p + 3]);
        }
        t
    }

    /// Per-point geometry; fails at the first point where `q` is not
    /// positive definite.
    pub fn geometry(&self) -> Result<Vec<PointGeometry>> {
        let grid = *self.grid();
        let pts = par::map_indexed(grid.len(), |p| {
            PointGeometry::new(&self.at(p)).map_err(|e| match e {
                Error::NotPositiveDefinite { .. } | Error::DegenerateMetric { .. } | Error::WrongSignature { .. } => {
                    Error::NotPositiveDefinite {
                        point: p,
                        coords: grid.coords(p),
                    }
                }
                other => other,
            })
        });
        pts.into_iter().collect()
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        (0..4)
            .map(|a| self.legs[a].max_diff(&other.legs[a]))
            .fold(0.0, f64::max)
    }
}

/// Induced metric at every point.
pub fn induced_metric(theta: &CotetradField) -> Result<Vec<MetricAtPoint>> {
    Ok(theta.geometry()?.into_iter().map(|g| g.q).collect())
}

/// Internal normal at every point.
pub fn normal(theta: &CotetradField) -> Result<Vec<[f64; 4]>> {
    Ok(theta.geometry()?.into_iter().map(|g| g.xi).collect())
}

/// Full spacetime cotetrad `theta^A_mu` at a point (row A, column mu).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullCotetradAtPoint {
    pub t: Mat4,
}

impl FullCotetradAtPoint {
    pub fn identity() -> Self {
        Self { t: linalg::identity(4) }
    }

    pub fn spatial(&self) -> Legs {
        let mut s = [[0.0; 3]; 4];
        for a in 0..4 {
            s[a].copy_from_slice(&self.t[a][1..4]);
        }
        s
    }

    pub fn time_leg(&self) -> [f64; 4] {
        [self.t[0][0], self.t[1][0], self.t[2][0], self.t[3][0]]
    }

    pub fn det(&self) -> f64 {
        linalg::det(&self.t, 4)
    }

    /// `g_{mu nu} = eta_AB theta^A_mu theta^B_nu`
    pub fn metric(&self) -> Mat4 {
        let mut g = linalg::ZERO4;
        for m in 0..4 {
            for n in 0..4 {
                g[m][n] = (0..4).map(|a| Eta::DIAG[a] * self.t[a][m] * self.t[a][n]).sum();
            }
        }
        g
    }

    /// `theta^A` as a 4D one-form.
    pub fn leg(&self, a: usize) -> KForm {
        KForm::one_form(&self.t[a])
    }

    /// Assemble from lapse, shift and spatial legs:
    /// `theta^A_0 = N xi^A + N^i theta^A_i`.
    pub fn reconstruct(lapse: f64, shift: [f64; 3], spatial: &Legs) -> Result<Self> {
        let geo = PointGeometry::new(spatial)?;
        let mut t = linalg::ZERO4;
        for a in 0..4 {
            t[a][0] = lapse * geo.xi[a] + (0..3).map(|i| shift[i] * spatial[a][i]).sum::<f64>();
            t[a][1..4].copy_from_slice(&spatial[a]);
        }
        Ok(Self { t })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LapseShiftAtPoint {
    pub lapse: f64,
    pub shift: [f64; 3],
}

/// Lapse and shift from the time leg by projection on `xi` and the
/// spatial legs. Errors on a singular cotetrad or a non-positive lapse.
pub fn lapse_shift_at(full: &FullCotetradAtPoint, branch: XiBranch) -> Result<LapseShiftAtPoint> {
    let spatial = full.spatial();
    let geo = PointGeometry::with_branch(&spatial, branch).map_err(|_| Error::SingularCotetrad { point: None })?;
    let tp = full.time_leg();
    let lapse = -Eta::dot(geo.xi, tp);
    let qi = geo.q.ginv();
    let mut shift = [0.0; 3];
    for (i, s) in shift.iter_mut().enumerate() {
        *s = (0..3)
            .map(|j| qi[i][j] * (0..4).map(|a| Eta::DIAG[a] * spatial[a][j] * tp[a]).sum::<f64>())
            .sum();
    }
    if !(lapse > 0.0) {
        return Err(Error::NonPositiveLapse { lapse, point: None });
    }
    Ok(LapseShiftAtPoint { lapse, shift })
}

/// Lapse and shift fields plus the spatial cotetrad from a full cotetrad
/// per point.
pub fn lapse_shift(grid: PeriodicGrid, full: &[FullCotetradAtPoint]) -> Result<(FormField, VectorFieldOnGrid, CotetradField)> {
    if full.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: full.len(),
        });
    }
    let mut lapse = FormField::zero(grid, 0);
    let mut shift = VectorFieldOnGrid::zero(grid);
    let mut legs = [0; 4].map(|_| FormField::zero(grid, 1));
    for (p, f) in full.iter().enumerate() {
        let ls = lapse_shift_at(f, XiBranch::Chosen).map_err(|e| match e {
            Error::NonPositiveLapse { lapse, .. } => Error::NonPositiveLapse { lapse, point: Some(p) },
            Error::SingularCotetrad { .. } => Error::SingularCotetrad { point: Some(p) },
            other => other,
        })?;
        lapse.data_mut()[p] = ls.lapse;
        shift.set(p, ls.shift);
        let s = f.spatial();
        for a in 0..4 {
            legs[a].data_mut()[3 * p..3 * p + 3].copy_from_slice(&s[a]);
        }
    }
    Ok((lapse, shift, CotetradField { legs }))
}

/// Spacetime metric and inverse from lapse, shift and spatial metric.
pub fn metric_decomposition(lapse: f64, shift: [f64; 3], q: &MetricAtPoint) -> (Mat4, Mat4) {
    let qm = q.g();
    let qi = q.ginv();
    let low: Vec<f64> = (0..3).map(|i| (0..3).map(|j| qm[i][j] * shift[j]).sum()).collect();
    let n2 = lapse * lapse;
    let mut g = linalg::ZERO4;
    g[0][0] = -n2 + (0..3).map(|i| shift[i] * low[i]).sum::<f64>();
    for i in 0..3 {
        g[0][i + 1] = low[i];
        g[i + 1][0] = low[i];
        for j in 0..3 {
            g[i + 1][j + 1] = qm[i][j];
        }
    }
    let mut gi = linalg::ZERO4;
    gi[0][0] = -1.0 / n2;
    for i in 0..3 {
        gi[0][i + 1] = shift[i] / n2;
        gi[i + 1][0] = shift[i] / n2;
        for j in 0..3 {
            gi[i + 1][j + 1] = qi[i][j] - shift[i] * shift[j] / n2;
        }
    }
    (g, gi)
}

/// 4D metric context built from a decomposition.
pub fn spacetime_metric(lapse: f64, shift: [f64; 3], q: &MetricAtPoint) -> Result<MetricAtPoint> {
    let (g, gi) = metric_decomposition(lapse, shift, q);
    let det = -lapse * lapse * q.det();
    MetricAtPoint::from_parts(g, gi, det, Signature::lorentzian(4), 1.0)
}

/// `|eps_0123(g) - N sqrt(det q)|`
pub fn volume_decomposition_check(lapse: f64, shift: [f64; 3], q: &MetricAtPoint) -> Result<f64> {
    let (g, _) = metric_decomposition(lapse, shift, q);
    let m = MetricAtPoint::new(g, Signature::lorentzian(4), 1.0)?;
    Ok((exterior::volume_form(&m).top() - lapse * q.det().sqrt()).abs())
}

// ---------------------------------------------------------------------------
// time/space splitting of 4D forms

fn dt() -> KForm {
    KForm::basis(4, &[0])
}

fn d_t() -> VectorAtPoint {
    VectorAtPoint::basis(4, 0)
}

/// `(alpha_perp, underline alpha)` as 4D forms.
pub fn perp_underline(alpha: &KForm) -> (KForm, KForm) {
    let perp = exterior::contract(&d_t(), alpha);
    let under = if alpha.degree() < 4 {
        exterior::contract(&d_t(), &exterior::wedge(&dt(), alpha).unwrap())
    } else {
        KForm::zero(4, 4)
    };
    (perp, under)
}

/// Timelike part `dt ^ alpha_perp`.
pub fn timelike(alpha: &KForm) -> KForm {
    if alpha.degree() == 0 {
        return KForm::zero(4, 0);
    }
    exterior::wedge(&dt(), &perp_underline(alpha).0).unwrap()
}

/// Spatial components of a 4D form without time components, as a 3D form.
pub fn restrict(alpha: &KForm) -> KForm {
    let k = alpha.degree();
    let lay = layout(3, k);
    let strict: Vec<f64> = lay
        .strict
        .iter()
        .map(|e| {
            let idx: Vec<usize> = e.idx[..k].iter().map(|i| i + 1).collect();
            alpha.get(&idx)
        })
        .collect();
    KForm::from_strict(3, k, &strict)
}

/// A 3D form as a 4D form with no time components.
pub fn embed(alpha: &KForm) -> KForm {
    let k = alpha.degree();
    let lay = layout(3, k);
    let l4 = layout(4, k);
    let vals = alpha.strict_values();
    let strict: Vec<f64> = l4
        .strict
        .iter()
        .map(|e| {
            let idx = &e.idx[..k];
            if idx.contains(&0) {
                return 0.0;
            }
            let pos = lay
                .strict
                .iter()
                .position(|s| s.idx[..k].iter().zip(idx).all(|(a, b)| a + 1 == *b))
                .unwrap();
            vals[pos]
        })
        .collect();
    KForm::from_strict(4, k, &strict)
}

/// A 4D form with its first partial derivatives `d_mu alpha`.
#[derive(Clone, Debug)]
pub struct FormJet {
    pub value: KForm,
    pub partials: [KForm; 4],
}

impl FormJet {
    fn map(&self, f: impl Fn(&KForm) -> KForm) -> FormJet {
        FormJet {
            value: f(&self.value),
            partials: [0, 1, 2, 3].map(|m| f(&self.partials[m])),
        }
    }

    /// Full 4D exterior derivative (value only).
    pub fn d(&self) -> KForm {
        self.d_over(0..4)
    }

    /// Spatial exterior derivative (partials 1..3 only).
    pub fn d_spatial(&self) -> KForm {
        self.d_over(1..4)
    }

    fn d_over(&self, axes: std::ops::Range<usize>) -> KForm {
        let mut out = KForm::zero(4, self.value.degree() + 1);
        for m in axes {
            out.axpy(1.0, &exterior::wedge(&KForm::basis(4, &[m]), &self.partials[m]).unwrap());
        }
        out
    }
}

/// Max residual over the projection property table, evaluated on a
/// k-form jet `a` and an l-form `b` (k + l <= 4).
pub fn perp_underline_table_residual(a: &FormJet, b: &KForm) -> f64 {
    let av = &a.value;
    let mut r: f64 = 0.0;
    let mut chk = |x: &KForm, y: &KForm| r = r.max(x.max_diff(y));
    let (a_perp, a_un) = perp_underline(av);
    let a_t = timelike(av);
    let zero = KForm::zero(4, av.degree());
    chk(&timelike(&a_t), &a_t);
    chk(&perp_underline(&a_t).1, &zero);
    chk(&timelike(&a_un), &zero);
    chk(&perp_underline(&a_un).1, &a_un);
    if av.degree() + b.degree() <= 4 {
        let ab = exterior::wedge(av, b).unwrap();
        let (_, b_un) = perp_underline(b);
        let rhs = exterior::wedge(&a_t, &b_un)
            .unwrap()
            .add(&exterior::wedge(&a_un, &timelike(b)).unwrap());
        chk(&timelike(&ab), &rhs);
        chk(&perp_underline(&ab).1, &exterior::wedge(&a_un, &b_un).unwrap());
    }
    if av.degree() >= 1 {
        chk(&perp_underline(&a_perp).1, &a_perp);
    }
    chk(&exterior::contract(&d_t(), &a_un), &KForm::zero(4, av.degree().saturating_sub(1)));
    if av.degree() < 4 {
        let da = a.d();
        let un_jet = a.map(|f| perp_underline(f).1);
        let lie_t_un = un_jet.partials[0].clone();
        let d_perp = if av.degree() >= 1 {
            a.map(|f| perp_underline(f).0).d_spatial()
        } else {
            KForm::zero(4, 0)
        };
        let (da_perp, da_un) = perp_underline(&da);
        if av.degree() >= 1 {
            chk(&da_perp, &lie_t_un.sub(&d_perp));
        } else {
            chk(&da_perp, &lie_t_un);
        }
        chk(&da_un, &un_jet.d_spatial());
        let mut rhs = exterior::wedge(&dt(), &lie_t_un).unwrap().add(&un_jet.d_spatial());
        if av.degree() >= 1 {
            rhs = rhs.sub(&exterior::wedge(&dt(), &d_perp).unwrap());
        }
        chk(&da, &rhs);
    }
    r
}

/// Both sides of the 3+1 split of `alpha ^ *beta` for 4D k-forms;
/// returns the max componentwise difference.
pub fn hodge_decomposition_check(alpha: &KForm, beta: &KForm, lapse: f64, shift: [f64; 3], q: &MetricAtPoint) -> Result<f64> {
    let k = alpha.degree();
    if beta.degree() != k {
        return Err(Error::DegreeMismatch {
            expected: k,
            got: beta.degree(),
        });
    }
    let g4 = spacetime_metric(lapse, shift, q)?;
    let lhs = exterior::wedge(alpha, &exterior::hodge(beta, &g4))?;
    let nv = VectorAtPoint::new(&shift);
    let split = |f: &KForm| -> (Option<KForm>, Option<KForm>) {
        let (perp, un) = perp_underline(f);
        // a 4-form has no spatial part
        let un3 = (k < 4).then(|| restrict(&un));
        let t = match (&un3, k) {
            (_, 0) => None,
            (Some(u), _) => Some(restrict(&perp).sub(&exterior::contract(&nv, u))),
            (None, _) => Some(restrict(&perp)),
        };
        (t, un3)
    };
    let (at, au) = split(alpha);
    let (bt, bu) = split(beta);
    let mut rhs = KForm::zero(4, 4);
    if let (Some(at), Some(bt)) = (at, bt) {
        let w = exterior::wedge(&at, &exterior::hodge(&bt, q))?;
        rhs.axpy(-1.0 / lapse, &exterior::wedge(&dt(), &embed(&w))?);
    }
    if let (Some(au), Some(bu)) = (au, bu) {
        let w = exterior::wedge(&au, &exterior::hodge(&bu, q))?;
        rhs.axpy(lapse, &exterior::wedge(&dt(), &embed(&w))?);
    }
    Ok(lhs.max_diff(&rhs))
}

// ---------------------------------------------------------------------------
// irreducible decomposition and action densities

/// Four 4D two-forms `dtheta^A`.
pub type TwoFormQuad = [KForm; 4];

#[derive(Clone, Debug)]
pub struct IrreducibleParts {
    /// parts[i] holds the (i+1)-th irreducible piece for every A
    pub parts: [TwoFormQuad; 3],
    pub condition: f64,
}

impl IrreducibleParts {
    pub fn ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARN
    }
}

/// Dual reper vectors `e_B` (lower internal index) and the condition
/// number of the inversion.
fn dual_reper(full: &FullCotetradAtPoint) -> Result<([VectorAtPoint; 4], f64)> {
    let lu = linalg::invert(&full.t, 4).ok_or(Error::SingularCotetrad { point: None })?;
    if !lu.condition.is_finite() {
        return Err(Error::SingularCotetrad { point: None });
    }
    let e = [0, 1, 2, 3].map(|b| {
        VectorAtPoint::new(&[lu.inverse[0][b], lu.inverse[1][b], lu.inverse[2][b], lu.inverse[3][b]])
    });
    Ok((e, lu.condition))
}

pub fn irreducible_parts(dtheta: &TwoFormQuad, full: &FullCotetradAtPoint) -> Result<IrreducibleParts> {
    let (e, condition) = dual_reper(full)?;
    let mut trace = KForm::zero(4, 1);
    let mut axial = KForm::zero(4, 3);
    for b in 0..4 {
        trace.axpy(1.0, &exterior::contract(&e[b], &dtheta[b]));
        let lower = full.leg(b).scale(Eta::DIAG[b]);
        axial.axpy(1.0, &exterior::wedge(&lower, &dtheta[b])?);
    }
    let p2 = [0, 1, 2, 3].map(|a| exterior::wedge(&full.leg(a), &trace).unwrap().scale(1.0 / 3.0));
    let p3 = [0, 1, 2, 3].map(|a| exterior::contract(&e[a].scale(Eta::DIAG[a]), &axial).scale(1.0 / 3.0));
    let p1 = [0, 1, 2, 3].map(|a| dtheta[a].sub(&p2[a]).sub(&p3[a]));
    Ok(IrreducibleParts {
        parts: [p1, p2, p3],
        condition,
    })
}

fn spacetime_context(full: &FullCotetradAtPoint) -> Result<MetricAtPoint> {
    let det = full.det();
    if det.abs() < exterior::DEGENERACY_EPS {
        return Err(Error::SingularCotetrad { point: None });
    }
    MetricAtPoint::new(full.metric(), Signature::lorentzian(4), det.signum())
}

/// `-1/2 dtheta^A ^ *(sum_i a_i part_i(dtheta)_A)`
pub fn action_density(dtheta: &TwoFormQuad, full: &FullCotetradAtPoint, coeffs: [f64; 3]) -> Result<KForm> {
    let parts = irreducible_parts(dtheta, full)?;
    let g = spacetime_context(full)?;
    let mut out = KForm::zero(4, 4);
    for a in 0..4 {
        let mut mix = KForm::zero(4, 2);
        for (i, c) in coeffs.iter().enumerate() {
            mix.axpy(*c, &parts.parts[i][a]);
        }
        let w = exterior::wedge(&dtheta[a], &exterior::hodge(&mix, &g))?;
        out.axpy(-0.5 * Eta::DIAG[a], &w);
    }
    Ok(out)
}

/// `-1/2 dtheta^A ^ *dtheta_A`, the plain quadratic integrand.
pub fn plain_action_density(dtheta: &TwoFormQuad, full: &FullCotetradAtPoint) -> Result<KForm> {
    let g = spacetime_context(full)?;
    let mut out = KForm::zero(4, 4);
    for a in 0..4 {
        let w = exterior::wedge(&dtheta[a], &exterior::hodge(&dtheta[a], &g))?;
        out.axpy(-0.5 * Eta::DIAG[a], &w);
    }
    Ok(out)
}

/// `-1/2 (dtheta^A ^ theta_B) ^ *(dtheta^B ^ theta_A) + 1/4 (dtheta^A ^ theta_A) ^ *(dtheta^B ^ theta_B)`
pub fn tegr_density(dtheta: &TwoFormQuad, full: &FullCotetradAtPoint) -> Result<KForm> {
    let g = spacetime_context(full)?;
    let lower = [0, 1, 2, 3].map(|b| full.leg(b).scale(Eta::DIAG[b]));
    let mut out = KForm::zero(4, 4);
    let mut trace = KForm::zero(4, 3);
    for a in 0..4 {
        trace.axpy(1.0, &exterior::wedge(&dtheta[a], &lower[a])?);
        for b in 0..4 {
            let x = exterior::wedge(&dtheta[a], &lower[b])?;
            let y = exterior::wedge(&dtheta[b], &lower[a])?;
            out.axpy(-0.5, &exterior::wedge(&x, &exterior::hodge(&y, &g))?);
        }
    }
    out.axpy(0.25, &exterior::wedge(&trace, &exterior::hodge(&trace, &g))?);
    Ok(out)
}
