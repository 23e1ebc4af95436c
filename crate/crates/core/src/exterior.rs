//! Pointwise multilinear algebra of k-forms in dimension n <= 4 with an
//! arbitrary metric signature.
//!
//! Components are stored densely as full antisymmetric rank-k arrays
//! (row-major, `n^k` entries) with the convention
//! `alpha = 1/k! alpha_{a1..ak} dx^a1 ^ .. ^ dx^ak`, so that
//! `(dx^1 ^ dx^2)(d_1, d_2) = 1`. Most operations work on the strictly
//! increasing components and scatter back through precomputed
//! permutation tables.

use std::sync::OnceLock;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4};

pub const MAX_DIM: usize = 4;

pub type Components = SmallVec<[f64; 27]>;

/// Relative threshold for degenerate metric detection.
pub const DEGENERACY_EPS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    n: usize,
    m: usize,
}

impl Signature {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM || m > n {
            return Err(Error::InvalidSignature { n, m });
        }
        Ok(Self { n, m })
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(n, 0).expect("euclidean signature")
    }

    pub fn lorentzian(n: usize) -> Self {
        Self::new(n, 1).expect("lorentzian signature")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `(-1)^m`
    pub fn sign(&self) -> f64 {
        if self.m % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

// ---------------------------------------------------------------------------
// index tables

pub(crate) struct StrictEntry {
    pub idx: [usize; MAX_DIM],
    pub flat: usize,
    /// every permutation of `idx` as (flat index, sign)
    pub perms: Vec<(usize, f64)>,
}

pub(crate) struct Layout {
    pub strict: Vec<StrictEntry>,
}

pub(crate) fn flat_index(n: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// Sign of the sequence as a permutation of its sorted self; 0 on repeats.
pub fn permutation_sign(seq: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] == seq[j] {
                return 0.0;
            }
            if seq[i] > seq[j] {
                s = -s;
            }
        }
    }
    s
}

pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn build_layout(n: usize, k: usize) -> Layout {
    let strict = combinations(n, k)
        .into_iter()
        .map(|c| {
            let mut idx = [0; MAX_DIM];
            idx[..k].copy_from_slice(&c);
            let perms = permutations(&c)
                .into_iter()
                .map(|p| (flat_index(n, &p), permutation_sign(&p)))
                .collect();
            StrictEntry {
                idx,
                flat: flat_index(n, &c),
                perms,
            }
        })
        .collect();
    Layout { strict }
}

pub(crate) fn layout(n: usize, k: usize) -> &'static Layout {
    static TABLES: OnceLock<Vec<Vec<Layout>>> = OnceLock::new();
    let t = TABLES.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|n| (0..=n).map(|k| build_layout(n, k)).collect())
            .collect()
    });
    &t[n][k]
}

/// For each strict output component of a (k+l)-form: the shuffle terms
/// `(strict index into alpha, strict index into beta, sign)`.
struct WedgeTable {
    terms: Vec<Vec<(usize, usize, f64)>>,
}

fn build_wedge(n: usize, k: usize, l: usize) -> WedgeTable {
    let out = layout(n, k + l);
    let la = layout(n, k);
    let lb = layout(n, l);
    let pos_a = |idx: &[usize]| la.strict.iter().position(|e| e.idx[..k] == *idx).unwrap();
    let pos_b = |idx: &[usize]| lb.strict.iter().position(|e| e.idx[..l] == *idx).unwrap();
    let terms = out
        .strict
        .iter()
        .map(|e| {
            let j = &e.idx[..k + l];
            combinations(k + l, k)
                .into_iter()
                .map(|sel| {
                    let rest: Vec<usize> = (0..k + l).filter(|p| !sel.contains(p)).collect();
                    let order: Vec<usize> = sel.iter().chain(rest.iter()).copied().collect();
                    let a: Vec<usize> = sel.iter().map(|&p| j[p]).collect();
                    let b: Vec<usize> = rest.iter().map(|&p| j[p]).collect();
                    (pos_a(&a), pos_b(&b), permutation_sign(&order))
                })
                .collect()
        })
        .collect();
    WedgeTable { terms }
}

fn wedge_table(n: usize, k: usize, l: usize) -> &'static WedgeTable {
    static TABLES: OnceLock<Vec<WedgeTable>> = OnceLock::new();
    let key = |n: usize, k: usize, l: usize| (n * 5 + k) * 5 + l;
    let t = TABLES.get_or_init(|| {
        let mut v: Vec<WedgeTable> = Vec::new();
        for n in 0..=MAX_DIM {
            for k in 0..=MAX_DIM {
                for l in 0..=MAX_DIM {
                    debug_assert_eq!(v.len(), key(n, k, l));
                    if n >= 1 && k + l <= n {
                        v.push(build_wedge(n, k, l));
                    } else {
                        v.push(WedgeTable { terms: Vec::new() });
                    }
                }
            }
        }
        v
    });
    &t[key(n, k, l)]
}

/// For each strict l-form component: strict index of the complementary
/// k-set and the sign of `complement ++ idx`.
fn complement_table(n: usize, l: usize) -> &'static [(usize, f64)] {
    static TABLES: OnceLock<Vec<Vec<Vec<(usize, f64)>>>> = OnceLock::new();
    let t = TABLES.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|n| {
                (0..=n)
                    .map(|l| {
                        let lc = layout(n, n - l);
                        layout(n, l)
                            .strict
                            .iter()
                            .map(|e| {
                                let nu = &e.idx[..l];
                                let comp: Vec<usize> = (0..n).filter(|i| !nu.contains(i)).collect();
                                let pos = lc
                                    .strict
                                    .iter()
                                    .position(|c| c.idx[..n - l] == comp[..])
                                    .unwrap();
                                let seq: Vec<usize> = comp.iter().chain(nu.iter()).copied().collect();
                                (pos, permutation_sign(&seq))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    });
    &t[n][l]
}

// ---------------------------------------------------------------------------
// vectors and metrics

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorAtPoint {
    n: usize,
    c: [f64; MAX_DIM],
}

impl VectorAtPoint {
    pub fn new(c: &[f64]) -> Self {
        assert!(c.len() <= MAX_DIM);
        let mut v = [0.0; MAX_DIM];
        v[..c.len()].copy_from_slice(c);
        Self { n: c.len(), c: v }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, c: [0.0; MAX_DIM] }
    }

    /// Coordinate basis vector `d_i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zero(n);
        v.c[i] = 1.0;
        v
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[f64] {
        &self.c[..self.n]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut v = *self;
        v.c.iter_mut().for_each(|x| *x *= s);
        v
    }
}

/// A metric at one point together with its inverse, determinant and an
/// explicit orientation sign.
#[derive(Clone, Copy, Debug)]
pub struct MetricAtPoint {
    sig: Signature,
    g: Mat4,
    ginv: Mat4,
    det: f64,
    orientation: f64,
}

impl MetricAtPoint {
    /// Build from the leading `n x n` block of `g`.
    pub fn new(g: Mat4, sig: Signature, orientation: f64) -> Result<Self> {
        let n = sig.n();
        let scale = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| g[i][j].abs())
            .fold(0.0, f64::max);
        let lu = linalg::invert(&g, n).ok_or(Error::DegenerateMetric { det: 0.0 })?;
        if lu.det.abs() < DEGENERACY_EPS * scale.powi(n as i32) || scale == 0.0 {
            return Err(Error::DegenerateMetric { det: lu.det });
        }
        if sig.sign() * lu.det <= 0.0 {
            return Err(Error::WrongSignature { det: lu.det, m: sig.m() });
        }
        let mut ginv = lu.inverse;
        for i in 0..n {
            for j in i + 1..n {
                let s = 0.5 * (ginv[i][j] + ginv[j][i]);
                ginv[i][j] = s;
                ginv[j][i] = s;
            }
        }
        Ok(Self {
            sig,
            g,
            ginv,
            det: lu.det,
            orientation: if orientation < 0.0 { -1.0 } else { 1.0 },
        })
    }

    /// Build directly from a metric and its already known inverse and
    /// determinant (no validation beyond the signature check).
    pub(crate) fn from_parts(g: Mat4, ginv: Mat4, det: f64, sig: Signature, orientation: f64) -> Result<Self> {
        if !(sig.sign() * det > 0.0) {
            return Err(Error::WrongSignature { det, m: sig.m() });
        }
        Ok(Self {
            sig,
            g,
            ginv,
            det,
            orientation,
        })
    }

    pub fn from_rows(rows: &[&[f64]], sig: Signature, orientation: f64) -> Result<Self> {
        let n = sig.n();
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        let mut g = linalg::ZERO4;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            g[i][..n].copy_from_slice(r);
        }
        Self::new(g, sig, orientation)
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(linalg::identity(n), Signature::euclidean(n), 1.0).unwrap()
    }

    /// `diag(-1, 1, .., 1)`
    pub fn minkowski(n: usize) -> Self {
        let mut g = linalg::identity(n);
        g[0][0] = -1.0;
        Self::new(g, Signature::lorentzian(n), 1.0).unwrap()
    }

    pub fn diagonal(d: &[f64], orientation: f64) -> Result<Self> {
        let n = d.len();
        let m = d.iter().filter(|&&x| x < 0.0).count();
        let mut g = linalg::ZERO4;
        for (i, &x) in d.iter().enumerate() {
            g[i][i] = x;
        }
        Self::new(g, Signature::new(n, m)?, orientation)
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }
    pub fn n(&self) -> usize {
        self.sig.n()
    }
    pub fn g(&self) -> &Mat4 {
        &self.g
    }
    pub fn ginv(&self) -> &Mat4 {
        &self.ginv
    }
    pub fn det(&self) -> f64 {
        self.det
    }
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn with_orientation(&self, orientation: f64) -> Self {
        let mut m = *self;
        m.orientation = if orientation < 0.0 { -1.0 } else { 1.0 };
        m
    }

    /// `orientation * sqrt((-1)^m det g)`, the single independent
    /// component of the volume form.
    pub fn volume_factor(&self) -> f64 {
        self.orientation * (self.sig.sign() * self.det).sqrt()
    }

    /// Residual of `g g^-1 = 1` (max abs entry).
    pub fn inverse_residual(&self) -> f64 {
        let n = self.n();
        let p = linalg::mul(&self.g, &self.ginv, n);
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                r = r.max((p[i][j] - e).abs());
            }
        }
        r
    }
}

// ---------------------------------------------------------------------------
// k-forms

#[derive(Clone, Debug, PartialEq)]
pub struct KForm {
    n: usize,
    k: usize,
    c: Components,
}

impl KForm {
    pub fn zero(n: usize, k: usize) -> Self {
        assert!(k <= n && n <= MAX_DIM, "k-form with k = {k} > n = {n}");
        Self {
            n,
            k,
            c: SmallVec::from_elem(0.0, n.pow(k as u32)),
        }
    }

    pub fn try_zero(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::DegreeOverflow { k, l: 0, n });
        }
        Ok(Self::zero(n, k))
    }

    pub fn scalar(n: usize, v: f64) -> Self {
        let mut f = Self::zero(n, 0);
        f.c[0] = v;
        f
    }

    pub fn one_form(c: &[f64]) -> Self {
        let mut f = Self::zero(c.len(), 1);
        f.c.copy_from_slice(c);
        f
    }

    /// Build from strictly increasing components (in `combinations` order).
    pub fn from_strict(n: usize, k: usize, strict: &[f64]) -> Self {
        let lay = layout(n, k);
        assert_eq!(strict.len(), lay.strict.len());
        let mut f = Self::zero(n, k);
        for (e, &v) in lay.strict.iter().zip(strict) {
            for &(p, s) in &e.perms {
                f.c[p] = s * v;
            }
        }
        f
    }

    /// Build from a dense component slice. The slice is taken as is; use
    /// [`KForm::antisymmetrized`] if it may not be antisymmetric.
    pub fn from_dense(n: usize, k: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), n.pow(k as u32));
        Self {
            n,
            k,
            c: SmallVec::from_slice(dense),
        }
    }

    /// `dx^{i1} ^ ... ^ dx^{ik}` (indices need not be sorted).
    pub fn basis(n: usize, idx: &[usize]) -> Self {
        let k = idx.len();
        let s = permutation_sign(idx);
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let lay = layout(n, k);
        let mut strict = vec![0.0; lay.strict.len()];
        if s != 0.0 {
            let pos = lay.strict.iter().position(|e| e.idx[..k] == sorted[..]).unwrap();
            strict[pos] = s;
        }
        Self::from_strict(n, k, &strict)
    }

    /// Fully antisymmetrized copy: `alpha_[a1..ak]`.
    pub fn antisymmetrized(n: usize, k: usize, dense: &[f64]) -> Self {
        let lay = layout(n, k);
        let fact: f64 = (1..=k).product::<usize>() as f64;
        let strict: Vec<f64> = lay
            .strict
            .iter()
            .map(|e| e.perms.iter().map(|&(p, s)| s * dense[p]).sum::<f64>() / fact)
            .collect();
        Self::from_strict(n, k, &strict)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn degree(&self) -> usize {
        self.k
    }
    pub fn dense(&self) -> &[f64] {
        &self.c
    }
    pub fn dense_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.k);
        self.c[flat_index(self.n, idx)]
    }

    pub fn strict_values(&self) -> Components {
        layout(self.n, self.k).strict.iter().map(|e| self.c[e.flat]).collect()
    }

    /// Value of a 0-form.
    pub fn value(&self) -> f64 {
        assert_eq!(self.k, 0);
        self.c[0]
    }

    /// The single component of a top-degree form, `alpha_{1..n}`.
    pub fn top(&self) -> f64 {
        assert_eq!(self.k, self.n);
        self.c[layout(self.n, self.k).strict[0].flat]
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest violation of antisymmetry under any index transposition.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let n = self.n;
        let k = self.k;
        let mut idx = vec![0usize; k];
        for flat in 0..self.c.len() {
            let mut r = flat;
            for j in (0..k).rev() {
                idx[j] = r % n;
                r /= n;
            }
            for a in 0..k {
                for b in a + 1..k {
                    let mut sw = idx.clone();
                    sw.swap(a, b);
                    let other = self.c[flat_index(n, &sw)];
                    worst = worst.max((self.c[flat] + other).abs());
                }
            }
        }
        worst
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.c.iter_mut().for_each(|x| *x *= s);
        f
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        let mut f = self.clone();
        f.c.iter_mut().zip(other.c.iter()).for_each(|(a, b)| *a += b);
        f
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_same(other);
        let mut f = self.clone();
        f.c.iter_mut().zip(other.c.iter()).for_each(|(a, b)| *a -= b);
        f
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        self.check_same(other);
        self.c.iter_mut().zip(other.c.iter()).for_each(|(a, b)| *a += s * b);
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.check_same(other);
        self.c
            .iter()
            .zip(other.c.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn check_same(&self, other: &Self) {
        assert!(
            self.n == other.n && self.k == other.k,
            "form shape mismatch: ({}, {}) vs ({}, {})",
            self.n,
            self.k,
            other.n,
            other.k
        );
    }

    /// Evaluate on vectors: `alpha(X_1, .., X_k)`.
    pub fn eval(&self, vs: &[VectorAtPoint]) -> f64 {
        assert_eq!(vs.len(), self.k);
        let mut f = self.clone();
        for v in vs {
            f = contract(v, &f);
        }
        f.value()
    }
}

/// Exterior product `alpha ^ beta`.
pub fn wedge(alpha: &KForm, beta: &KForm) -> Result<KForm> {
    if alpha.n != beta.n {
        return Err(Error::DimensionMismatch {
            expected: alpha.n,
            got: beta.n,
        });
    }
    let (n, k, l) = (alpha.n, alpha.k, beta.k);
    if k + l > n {
        return Err(Error::DegreeOverflow { k, l, n });
    }
    let la = layout(n, k);
    let lb = layout(n, l);
    let table = wedge_table(n, k, l);
    let strict: Components = table
        .terms
        .iter()
        .map(|terms| {
            terms
                .iter()
                .map(|&(a, b, s)| s * alpha.c[la.strict[a].flat] * beta.c[lb.strict[b].flat])
                .sum()
        })
        .collect();
    Ok(KForm::from_strict(n, k + l, &strict))
}

/// Interior product `X ⌟ alpha`. A 0-form contracts to the zero 0-form.
pub fn contract(x: &VectorAtPoint, alpha: &KForm) -> KForm {
    let n = alpha.n;
    assert_eq!(x.n, n, "vector/form dimension mismatch");
    if alpha.k == 0 {
        return KForm::zero(n, 0);
    }
    let k1 = alpha.k - 1;
    let stride = n.pow(k1 as u32);
    let lay = layout(n, k1);
    let strict: Components = lay
        .strict
        .iter()
        .map(|e| (0..n).map(|a| x.c[a] * alpha.c[a * stride + e.flat]).sum())
        .collect();
    KForm::from_strict(n, k1, &strict)
}

/// Strict components of alpha with all indices raised by `ginv`.
///
/// Uses `alpha^C = sum_a det(ginv[C, a]) alpha_a` over strict index sets.
fn raised_strict(alpha: &KForm, ginv: &Mat4) -> Components {
    let n = alpha.n;
    let k = alpha.k;
    let lay = layout(n, k);
    let vals = alpha.strict_values();
    lay.strict
        .iter()
        .map(|ce| {
            lay.strict
                .iter()
                .zip(vals.iter())
                .map(|(ae, &v)| {
                    if v == 0.0 {
                        return 0.0;
                    }
                    let mut sub = linalg::ZERO4;
                    for r in 0..k {
                        for s in 0..k {
                            sub[r][s] = ginv[ce.idx[r]][ae.idx[s]];
                        }
                    }
                    v * linalg::det(&sub, k)
                })
                .sum()
        })
        .collect()
}

/// `<alpha|beta> = 1/k! alpha^{a..} beta_{a..}`
pub fn scalar_product(alpha: &KForm, beta: &KForm, g: &MetricAtPoint) -> Result<f64> {
    if alpha.k != beta.k {
        return Err(Error::DegreeMismatch {
            expected: alpha.k,
            got: beta.k,
        });
    }
    if alpha.n != g.n() || beta.n != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: alpha.n,
        });
    }
    let up = raised_strict(alpha, &g.ginv);
    let b = beta.strict_values();
    Ok(up.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// Volume form `epsilon` with `epsilon_{1..n} = orientation sqrt((-1)^m det g)`.
pub fn volume_form(g: &MetricAtPoint) -> KForm {
    let n = g.n();
    KForm::from_strict(n, n, &[g.volume_factor()])
}

/// Hodge star: `(*beta)_{nu} = 1/k! beta^{mu} epsilon_{mu nu}`.
pub fn hodge(beta: &KForm, g: &MetricAtPoint) -> KForm {
    let n = g.n();
    assert_eq!(beta.n, n, "form/metric dimension mismatch");
    let l = n - beta.k;
    let up = raised_strict(beta, &g.ginv);
    let vol = g.volume_factor();
    let strict: Components = complement_table(n, l)
        .iter()
        .map(|&(pos, s)| vol * s * up[pos])
        .collect();
    KForm::from_strict(n, l, &strict)
}

/// `v^a = g^{ab} alpha_b`
pub fn raise(alpha: &KForm, g: &MetricAtPoint) -> Result<VectorAtPoint> {
    if alpha.k != 1 {
        return Err(Error::DegreeMismatch {
            expected: 1,
            got: alpha.k,
        });
    }
    let n = g.n();
    let mut v = VectorAtPoint::zero(n);
    for a in 0..n {
        v.c[a] = (0..n).map(|b| g.ginv[a][b] * alpha.c[b]).sum();
    }
    Ok(v)
}

/// `alpha_a = g_{ab} v^b`
pub fn lower(v: &VectorAtPoint, g: &MetricAtPoint) -> KForm {
    let n = g.n();
    let c: Vec<f64> = (0..n).map(|a| (0..n).map(|b| g.g[a][b] * v.c[b]).sum()).collect();
    KForm::one_form(&c)
}

/// Both sides of the epsilon-epsilon contraction identity
/// `eps_{rho.. nu..} eps^{rho.. mu..} = (-1)^m k! l! delta^{[mu1}_{nu1} .. delta^{mul]}_{nul}`,
/// as dense arrays indexed `[mu_1..mu_l, nu_1..nu_l]`.
#[derive(Clone, Debug)]
pub struct LeviTable {
    pub l: usize,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LeviTable {
    pub fn max_residual(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Evaluate the contraction identity for the given metric.
pub fn levi_contraction_with(g: &MetricAtPoint, k: usize, l: usize) -> Result<LeviTable> {
    let n = g.n();
    if k + l != n {
        return Err(Error::LeviDegrees { k, l, n });
    }
    let eps = volume_form(g);
    // fully raised epsilon: eps^{a..} = det(ginv) * eps_{a..}
    let ginv_det = linalg::det(&g.ginv, n);
    let len_l = n.pow(l as u32);
    let len_k = n.pow(k as u32);
    let mut lhs = vec![0.0; len_l * len_l];
    let mut rhs = vec![0.0; len_l * len_l];
    let sign = g.signature().sign();
    let kfact: f64 = (1..=k).product::<usize>() as f64;
    let decode = |mut flat: usize, len: usize| -> Vec<usize> {
        let mut v = vec![0; len];
        for j in (0..len).rev() {
            v[j] = flat % n;
            flat /= n;
        }
        v
    };
    let perms_l = permutations(&(0..l).collect::<Vec<_>>());
    for mu in 0..len_l {
        let mu_idx = decode(mu, l);
        for nu in 0..len_l {
            let nu_idx = decode(nu, l);
            let mut s = 0.0;
            for rho in 0..len_k {
                let rho_idx = decode(rho, k);
                let lo: Vec<usize> = rho_idx.iter().chain(nu_idx.iter()).copied().collect();
                let hi: Vec<usize> = rho_idx.iter().chain(mu_idx.iter()).copied().collect();
                let a = eps.c[flat_index(n, &lo)];
                let b = eps.c[flat_index(n, &hi)] * ginv_det;
                s += a * b;
            }
            lhs[mu * len_l + nu] = s;
            // the generalized delta vanishes on repeated indices
            if !distinct(&mu_idx) || !distinct(&nu_idx) {
                continue;
            }
            let mut d = 0.0;
            for p in &perms_l {
                let ps = permutation_sign(p);
                let prod: f64 = (0..l)
                    .map(|j| if mu_idx[p[j]] == nu_idx[j] { 1.0 } else { 0.0 })
                    .product();
                d += ps * prod;
            }
            rhs[mu * len_l + nu] = sign * kfact * d;
        }
    }
    Ok(LeviTable { l, lhs, rhs })
}

fn distinct(idx: &[usize]) -> bool {
    idx.iter().enumerate().all(|(i, a)| !idx[..i].contains(a))
}

/// Contraction identity in an oriented orthonormal basis of signature `sig`.
pub fn levi_contraction(sig: Signature, k: usize, l: usize) -> Result<LeviTable> {
    let n = sig.n();
    let mut g = linalg::identity(n);
    for (i, row) in g.iter_mut().enumerate().take(sig.m()) {
        row[i] = -1.0;
    }
    levi_contraction_with(&MetricAtPoint::new(g, sig, 1.0)?, k, l)
}

/// Residual of `*(*beta ^ alpha) = (-1)^{m+kl} raise(alpha) ⌟ beta` for a
/// one-form `alpha` and a k-form `beta`, `l = n - k`.
pub fn interior_hodge_residual(alpha: &KForm, beta: &KForm, g: &MetricAtPoint) -> Result<f64> {
    if alpha.degree() != 1 {
        return Err(Error::DegreeMismatch {
            expected: 1,
            got: alpha.degree(),
        });
    }
    let n = g.n();
    let k = beta.degree();
    if k == 0 {
        // both sides vanish
        return Ok(0.0);
    }
    let lhs = hodge(&wedge(&hodge(beta, g), alpha)?, g);
    let sign = if (g.signature().m() + k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = contract(&raise(alpha, g)?, beta).scale(sign);
    Ok(lhs.max_diff(&rhs))
}

/// `(-1)^{kl+m}`, the sign of `**` on k-forms.
pub fn double_star_sign(sig: Signature, k: usize) -> f64 {
    let l = sig.n() - k;
    if (k * l + sig.m()) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
