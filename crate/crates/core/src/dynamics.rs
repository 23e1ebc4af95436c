//! Canonical dynamics: phase states, the smeared constraints, Legendre
//! maps, Hamilton's equations, RK4 time stepping, the closure checks of the
//! constraint algebra and a projection onto the constraint surface.

use crate::error::{Error, Result};
use crate::exterior::{self, KForm};
use crate::fields::{self, FormField, PeriodicGrid, VectorFieldOnGrid};
use crate::teleparallel::{CotetradField, InternalMetric as Eta, PointGeometry};
use crate::variational::{self as var, FunctionalGradient, GradientProvider};

/// Canonical pair `(θ^A, p_A)`; `p_A` are 2-form fields.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub theta: CotetradField,
    pub p: [FormField; 4],
}

/// Time derivatives (or any tangent vector) of a phase state.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub theta: [FormField; 4],
    pub p: [FormField; 4],
}

impl Rates {
    pub fn max_abs(&self) -> f64 {
        self.theta.iter().chain(self.p.iter()).map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

impl PhaseState {
    pub fn new(theta: CotetradField, p: [FormField; 4]) -> Result<Self> {
        for f in &p {
            if f.degree() != 2 {
                return Err(Error::DegreeMismatch {
                    expected: 2,
                    got: f.degree(),
                });
            }
            if f.grid() != theta.grid() {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { theta, p })
    }

    /// Flat cotetrad, vanishing momenta.
    pub fn flat(grid: PeriodicGrid) -> Self {
        Self {
            theta: CotetradField::flat(grid),
            p: [0; 4].map(|_| FormField::zero(grid, 2)),
        }
    }

    /// Flat state plus band-limited perturbations of `θ` and `p`, each
    /// component bounded by `amplitude`.
    pub fn random(grid: PeriodicGrid, amplitude: f64, max_mode: usize, seed: u64) -> Result<Self> {
        let theta = CotetradField::random_near_flat(grid, amplitude, max_mode, seed)?;
        let modes = fields::half_lattice(max_mode).len() as f64;
        let mut p = [0; 4].map(|_| FormField::zero(grid, 2));
        for (a, f) in p.iter_mut().enumerate() {
            *f = fields::random_bandlimited_stream(&grid, 2, max_mode, amplitude / modes, seed, 200 + a as u64)?;
        }
        Ok(Self { theta, p })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.theta.grid()
    }

    pub fn geometry(&self) -> Result<Vec<PointGeometry>> {
        self.theta.geometry()
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        let dp = (0..4).map(|a| self.p[a].max_diff(&other.p[a])).fold(0.0, f64::max);
        self.theta.max_diff(&other.theta).max(dp)
    }

    /// `self + s * rates`
    pub fn advanced(&self, s: f64, rates: &Rates) -> Self {
        let mut out = self.clone();
        for a in 0..4 {
            out.theta.legs_mut()[a].axpy(s, &rates.theta[a]);
            out.p[a].axpy(s, &rates.p[a]);
        }
        out
    }
}

/// Lapse and shift; also used as smearing carriers.
#[derive(Clone, Debug, PartialEq)]
pub struct Multipliers {
    pub lapse: FormField,
    pub shift: VectorFieldOnGrid,
}

impl Multipliers {
    pub fn new(lapse: FormField, shift: VectorFieldOnGrid) -> Result<Self> {
        if lapse.degree() != 0 {
            return Err(Error::DegreeMismatch {
                expected: 0,
                got: lapse.degree(),
            });
        }
        if lapse.grid() != shift.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some((p, &n)) = lapse.data().iter().enumerate().find(|(_, &n)| !(n > 0.0)) {
            return Err(Error::NonPositiveLapse { lapse: n, point: Some(p) });
        }
        Ok(Self { lapse, shift })
    }

    /// `N = 1`, zero shift.
    pub fn unit(grid: PeriodicGrid) -> Self {
        Self {
            lapse: FormField::scalar_fn(grid, |_| 1.0),
            shift: VectorFieldOnGrid::zero(grid),
        }
    }

    pub fn max_lapse(&self) -> f64 {
        self.lapse.data().iter().copied().fold(0.0, f64::max)
    }
}

fn check_grid(state: &PhaseState, g: &PeriodicGrid) -> Result<()> {
    if state.grid() != g {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// constraints

/// Value of `S(M)` with its three pieces and the unsmeared density of the
/// scalar constraint (top component per point).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarConstraint {
    pub value: f64,
    /// `[S1, S2, S3]`
    pub parts: [f64; 3],
    pub density: Vec<f64>,
}

/// Value of `V(M⃗)` and the unsmeared densities `v_i` per point.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorConstraint {
    pub value: f64,
    pub density: Vec<[f64; 3]>,
}

/// Per-point pieces of the scalar constraint density:
/// `1/2 p^A ^ *p_A`, `-ξ^A dp_A`, `1/2 dθ^A ^ *dθ_A`.
pub fn scalar_density_parts(state: &PhaseState, geo: &[PointGeometry]) -> [Vec<f64>; 3] {
    let grid = *state.grid();
    let dp: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(&state.p[a]));
    let dth: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(state.theta.leg(a)));
    let per: Vec<[f64; 3]> = crate::par::map_indexed(grid.len(), |q| {
        let g = &geo[q];
        let mut out = [0.0; 3];
        for a in 0..4 {
            let pa = state.p[a].at(q);
            let w = exterior::wedge(&pa, &g.star(&pa)).expect("top form");
            out[0] += 0.5 * Eta::DIAG[a] * w.top();
            out[1] -= g.xi[a] * dp[a].at(q).top();
            let ta = dth[a].at(q);
            let w = exterior::wedge(&ta, &g.star(&ta)).expect("top form");
            out[2] += 0.5 * Eta::DIAG[a] * w.top();
        }
        out
    });
    [0, 1, 2].map(|i| per.iter().map(|x| x[i]).collect())
}

/// `S(M) = ∫ M (1/2 p^A^*p_A - ξ^A dp_A + 1/2 dθ^A^*dθ_A)`
pub fn scalar_constraint(state: &PhaseState, m: &FormField) -> Result<ScalarConstraint> {
    check_grid(state, m.grid())?;
    let geo = state.geometry()?;
    Ok(scalar_constraint_with(state, &geo, m))
}

fn scalar_constraint_with(state: &PhaseState, geo: &[PointGeometry], m: &FormField) -> ScalarConstraint {
    let grid = *state.grid();
    let parts_d = scalar_density_parts(state, geo);
    let smear = |d: &[f64]| -> f64 {
        let v: Vec<f64> = d.iter().zip(m.data()).map(|(x, w)| x * w).collect();
        fields::integrate_density(&grid, &v)
    };
    let parts = [smear(&parts_d[0]), smear(&parts_d[1]), smear(&parts_d[2])];
    let density: Vec<f64> = (0..grid.len()).map(|q| parts_d[0][q] + parts_d[1][q] + parts_d[2][q]).collect();
    ScalarConstraint {
        value: smear(&density),
        parts,
        density,
    }
}

/// Densities `v_i = -dθ^A ^ (∂_i⌟p_A) - θ^A_i dp_A`.
pub fn vector_density(state: &PhaseState) -> Vec<[f64; 3]> {
    let grid = *state.grid();
    let dp: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(&state.p[a]));
    let dth: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(state.theta.leg(a)));
    let basis = [0, 1, 2].map(|i| exterior::VectorAtPoint::basis(3, i));
    crate::par::map_indexed(grid.len(), |q| {
        let mut v = [0.0; 3];
        for a in 0..4 {
            let pa = state.p[a].at(q);
            let ta = dth[a].at(q);
            let dpa = dp[a].at(q).top();
            let th = state.theta.leg(a).at(q);
            for i in 0..3 {
                let w = exterior::wedge(&ta, &exterior::contract(&basis[i], &pa)).expect("top form");
                v[i] -= w.top() + th.dense()[i] * dpa;
            }
        }
        v
    })
}

/// `V(M⃗) = ∫ -dθ^A ^ (M⃗⌟p_A) - (M⃗⌟θ^A) ^ dp_A`
pub fn vector_constraint(state: &PhaseState, mv: &VectorFieldOnGrid) -> Result<VectorConstraint> {
    check_grid(state, mv.grid())?;
    let grid = *state.grid();
    let density = vector_density(state);
    let smeared: Vec<f64> = density
        .iter()
        .enumerate()
        .map(|(q, v)| {
            let m = &mv.data()[3 * q..3 * q + 3];
            v[0] * m[0] + v[1] * m[1] + v[2] * m[2]
        })
        .collect();
    Ok(VectorConstraint {
        value: fields::integrate_density(&grid, &smeared),
        density,
    })
}

/// The three equivalent integrands of the vector constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorForm {
    /// `-dθ^A ^ (M⃗⌟p_A) - (M⃗⌟θ^A) ^ dp_A`
    Contraction,
    /// `p_A ^ L θ^A`
    LieTheta,
    /// `-θ^A ^ L p_A`
    LieMomentum,
}

pub fn vector_constraint_form(state: &PhaseState, mv: &VectorFieldOnGrid, form: VectorForm) -> Result<f64> {
    check_grid(state, mv.grid())?;
    let mut total = FormField::zero(*state.grid(), 3);
    for a in 0..4 {
        let th = state.theta.leg(a);
        let p = &state.p[a];
        match form {
            VectorForm::Contraction => {
                total.axpy(-1.0, &fields::wedge(&fields::d(th), &fields::contract(mv, p)?)?);
                total.axpy(-1.0, &fields::wedge(&fields::contract(mv, th)?, &fields::d(p))?);
            }
            VectorForm::LieTheta => {
                total.axpy(1.0, &fields::wedge(p, &fields::lie_derivative(mv, th)?)?);
            }
            VectorForm::LieMomentum => {
                total.axpy(-1.0, &fields::wedge(th, &fields::lie_derivative(mv, p)?)?);
            }
        }
    }
    fields::integrate(&total)
}

// ---------------------------------------------------------------------------
// Legendre maps and the Hamiltonian

/// `E^A = d(N ξ^A) + L_N⃗ θ^A`
pub fn e_form(mult: &Multipliers, theta: &CotetradField) -> Result<[FormField; 4]> {
    let geo = theta.geometry()?;
    e_form_with(mult, theta, &geo)
}

fn e_form_with(mult: &Multipliers, theta: &CotetradField, geo: &[PointGeometry]) -> Result<[FormField; 4]> {
    if mult.lapse.grid() != theta.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *theta.grid();
    let mut out = [0; 4].map(|_| FormField::zero(grid, 1));
    for (a, e) in out.iter_mut().enumerate() {
        let nxi = FormField::from_fn(grid, 0, |q| KForm::scalar(3, mult.lapse.value(q) * geo[q].xi[a]));
        *e = fields::d(&nxi);
        e.axpy(1.0, &fields::lie_derivative(&mult.shift, theta.leg(a))?);
    }
    Ok(out)
}

fn check_lapse(mult: &Multipliers) -> Result<()> {
    if let Some((p, &n)) = mult.lapse.data().iter().enumerate().find(|(_, &n)| !(n > 0.0)) {
        return Err(Error::NonPositiveLapse { lapse: n, point: Some(p) });
    }
    Ok(())
}

/// `p_A = (1/N) *(θ̇_A - E_A)`
pub fn legendre(theta: &CotetradField, theta_dot: &[FormField; 4], mult: &Multipliers) -> Result<[FormField; 4]> {
    check_lapse(mult)?;
    let geo = theta.geometry()?;
    let e = e_form_with(mult, theta, &geo)?;
    let grid = *theta.grid();
    Ok([0, 1, 2, 3].map(|a| {
        FormField::from_fn(grid, 2, |q| {
            let v = theta_dot[a].at(q).sub(&e[a].at(q));
            geo[q].star(&v).scale(Eta::DIAG[a] / mult.lapse.value(q))
        })
    }))
}

/// `θ̇^A = N *p^A + E^A`
pub fn inverse_legendre(theta: &CotetradField, p: &[FormField; 4], mult: &Multipliers) -> Result<[FormField; 4]> {
    check_lapse(mult)?;
    let geo = theta.geometry()?;
    inverse_legendre_with(theta, &geo, p, mult)
}

fn inverse_legendre_with(
    theta: &CotetradField,
    geo: &[PointGeometry],
    p: &[FormField; 4],
    mult: &Multipliers,
) -> Result<[FormField; 4]> {
    let mut e = e_form_with(mult, theta, geo)?;
    let grid = *theta.grid();
    for (a, ea) in e.iter_mut().enumerate() {
        let kin = FormField::from_fn(grid, 1, |q| geo[q].star(&p[a].at(q)).scale(Eta::DIAG[a] * mult.lapse.value(q)));
        ea.axpy(1.0, &kin);
    }
    Ok(e)
}

/// `H = S(N) + V(N⃗)`
pub fn hamiltonian(state: &PhaseState, mult: &Multipliers) -> Result<f64> {
    Ok(scalar_constraint(state, &mult.lapse)?.value + vector_constraint(state, &mult.shift)?.value)
}

/// One-pass quadrature of the Hamiltonian integrand with scalar products in
/// place of wedges and stars.
pub fn hamiltonian_direct(state: &PhaseState, mult: &Multipliers) -> Result<f64> {
    check_grid(state, mult.lapse.grid())?;
    let geo = state.geometry()?;
    let grid = *state.grid();
    let dp: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(&state.p[a]));
    let dth: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(state.theta.leg(a)));
    let dens: Vec<f64> = crate::par::map_indexed(grid.len(), |q| {
        let g = &geo[q];
        let n = mult.lapse.value(q);
        let nv = mult.shift.at(q);
        let mut s = 0.0;
        for a in 0..4 {
            let pa = state.p[a].at(q);
            let ta = dth[a].at(q);
            let sp = |x: &KForm| exterior::scalar_product(x, x, &g.q).expect("same degree");
            s += n * (0.5 * Eta::DIAG[a] * (sp(&pa) + sp(&ta)) * g.sqrt_det - g.xi[a] * dp[a].at(q).top());
            let c = exterior::contract(&nv, &pa);
            s -= exterior::wedge(&ta, &c).expect("top form").top();
            let th = state.theta.leg(a).at(q);
            s -= exterior::contract(&nv, &th).value() * dp[a].at(q).top();
        }
        s
    });
    Ok(fields::integrate_density(&grid, &dens))
}

/// Hamiltonian through the velocities:
/// `∫ 1/(2N) θ̇^A^*θ̇_A - 1/(2N) E^A^*E_A + N/2 dθ^A^*dθ_A`.
pub fn hamiltonian_velocity(state: &PhaseState, mult: &Multipliers) -> Result<f64> {
    check_grid(state, mult.lapse.grid())?;
    let geo = state.geometry()?;
    let grid = *state.grid();
    let vel = inverse_legendre_with(&state.theta, &geo, &state.p, mult)?;
    let e = e_form_with(mult, &state.theta, &geo)?;
    let dth: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(state.theta.leg(a)));
    let dens: Vec<f64> = crate::par::map_indexed(grid.len(), |q| {
        let g = &geo[q];
        let n = mult.lapse.value(q);
        let mut s = 0.0;
        for a in 0..4 {
            let sq = |x: &KForm| exterior::wedge(x, &g.star(x)).expect("top form").top() * Eta::DIAG[a];
            s += (sq(&vel[a].at(q)) - sq(&e[a].at(q))) / (2.0 * n) + 0.5 * n * sq(&dth[a].at(q));
        }
        s
    });
    Ok(fields::integrate_density(&grid, &dens))
}

// ---------------------------------------------------------------------------
// gradients of the constraints

/// `S(M)` as a gradient provider.
#[derive(Clone, Debug)]
pub struct ScalarSmearing(pub FormField);

/// `V(M⃗)` as a gradient provider.
#[derive(Clone, Debug)]
pub struct VectorSmearing(pub VectorFieldOnGrid);

pub fn scalar_gradient(state: &PhaseState, geo: &[PointGeometry], m: &FormField) -> FunctionalGradient {
    let mut d_theta = var::ds1_dtheta(geo, &state.p, m);
    let t2 = var::ds2_dtheta(geo, &state.p, m);
    let t3 = var::ds3_dtheta(&state.theta, geo, m);
    for a in 0..4 {
        d_theta[a].axpy(1.0, &t2[a]);
        d_theta[a].axpy(1.0, &t3[a]);
    }
    let mut d_p = var::ds1_dp(geo, &state.p, m);
    let p2 = var::ds2_dp(geo, m);
    for a in 0..4 {
        d_p[a].axpy(1.0, &p2[a]);
    }
    FunctionalGradient { d_theta, d_p }
}

/// `δV/δθ^A = -L p_A`, `δV/δp_A = L θ^A`
pub fn vector_gradient(state: &PhaseState, mv: &VectorFieldOnGrid) -> Result<FunctionalGradient> {
    let mut d_theta = [0; 4].map(|_| FormField::zero(*state.grid(), 2));
    let mut d_p = [0; 4].map(|_| FormField::zero(*state.grid(), 1));
    for a in 0..4 {
        d_theta[a] = fields::lie_derivative(mv, &state.p[a])?.scale(-1.0);
        d_p[a] = fields::lie_derivative(mv, state.theta.leg(a))?;
    }
    Ok(FunctionalGradient { d_theta, d_p })
}

impl GradientProvider for ScalarSmearing {
    fn gradient(&self, state: &PhaseState) -> Result<FunctionalGradient> {
        check_grid(state, self.0.grid())?;
        let geo = state.geometry()?;
        Ok(scalar_gradient(state, &geo, &self.0))
    }
}

impl GradientProvider for VectorSmearing {
    fn gradient(&self, state: &PhaseState) -> Result<FunctionalGradient> {
        check_grid(state, self.0.grid())?;
        vector_gradient(state, &self.0)
    }
}

// ---------------------------------------------------------------------------
// Hamilton's equations and time stepping

/// `θ̇^A = N *p^A + E^A`, `ṗ_A = -Σ δS_i(N)/δθ^A + L_N⃗ p_A`
pub fn hamilton_rhs(state: &PhaseState, mult: &Multipliers) -> Result<Rates> {
    check_grid(state, mult.lapse.grid())?;
    check_lapse(mult)?;
    let geo = state.geometry()?;
    let theta = inverse_legendre_with(&state.theta, &geo, &state.p, mult)?;
    let mut p = var::ds1_dtheta(&geo, &state.p, &mult.lapse);
    let t2 = var::ds2_dtheta(&geo, &state.p, &mult.lapse);
    let t3 = var::ds3_dtheta(&state.theta, &geo, &mult.lapse);
    for a in 0..4 {
        p[a].axpy(1.0, &t2[a]);
        p[a].axpy(1.0, &t3[a]);
        p[a] = p[a].scale(-1.0);
        p[a].axpy(1.0, &fields::lie_derivative(&mult.shift, &state.p[a])?);
    }
    Ok(Rates { theta, p })
}

/// Largest admissible step `0.5 min(h) / max(N)`.
pub fn cfl_limit(grid: &PeriodicGrid, mult: &Multipliers) -> f64 {
    0.5 * grid.min_spacing() / mult.max_lapse()
}

fn check_cfl(grid: &PeriodicGrid, mult: &Multipliers, dt: f64) -> Result<()> {
    let limit = cfl_limit(grid, mult);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    Ok(())
}

/// One classical RK4 step.
pub fn step_rk4(state: &PhaseState, mult: &Multipliers, dt: f64) -> Result<PhaseState> {
    check_cfl(state.grid(), mult, dt)?;
    rk4_unchecked(state, mult, dt)
}

fn rk4_unchecked(state: &PhaseState, mult: &Multipliers, dt: f64) -> Result<PhaseState> {
    let k1 = hamilton_rhs(state, mult)?;
    let k2 = hamilton_rhs(&state.advanced(0.5 * dt, &k1), mult)?;
    let k3 = hamilton_rhs(&state.advanced(0.5 * dt, &k2), mult)?;
    let k4 = hamilton_rhs(&state.advanced(dt, &k3), mult)?;
    let mut out = state.clone();
    for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        out = out.advanced(dt * w / 6.0, k);
    }
    Ok(out)
}

/// Smearing functions whose constraint values are monitored during
/// evolution.
#[derive(Clone, Debug)]
pub struct Battery {
    pub scalars: Vec<(String, FormField)>,
    pub vectors: Vec<(String, VectorFieldOnGrid)>,
}

impl Battery {
    /// `M ∈ {1, cos(2π x¹/L₁)}`, `M⃗ ∈ {∂₁, cos(2π x²/L₂) ∂₃}`
    pub fn standard(grid: PeriodicGrid) -> Self {
        let l = grid.periods();
        let tau = std::f64::consts::TAU;
        Self {
            scalars: vec![
                ("S(1)".into(), FormField::scalar_fn(grid, |_| 1.0)),
                ("S(cos x1)".into(), FormField::scalar_fn(grid, move |x| (tau * x[0] / l[0]).cos())),
            ],
            vectors: vec![
                ("V(e1)".into(), VectorFieldOnGrid::constant(grid, [1.0, 0.0, 0.0])),
                (
                    "V(cos x2 e3)".into(),
                    VectorFieldOnGrid::from_fn(grid, move |x| [0.0, 0.0, (tau * x[1] / l[1]).cos()]),
                ),
            ],
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.scalars.iter().map(|s| s.0.clone()).chain(self.vectors.iter().map(|v| v.0.clone())).collect()
    }

    pub fn evaluate(&self, state: &PhaseState) -> Result<Vec<f64>> {
        let geo = state.geometry()?;
        let mut out: Vec<f64> = self.scalars.iter().map(|(_, m)| scalar_constraint_with(state, &geo, m).value).collect();
        for (_, v) in &self.vectors {
            out.push(vector_constraint(state, v)?.value);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftRow {
    pub step: usize,
    pub time: f64,
    pub values: Vec<f64>,
    /// largest change of any field component over this step
    pub step_change: f64,
}

/// Constraint values along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    pub labels: Vec<String>,
    pub rows: Vec<DriftRow>,
}

impl ConstraintReport {
    /// `max_t |C(t) - C(0)|` per monitored functional.
    pub fn drift(&self) -> Vec<f64> {
        let first = &self.rows[0].values;
        (0..self.labels.len())
            .map(|i| self.rows.iter().map(|r| (r.values[i] - first[i]).abs()).fold(0.0, f64::max))
            .collect()
    }

    pub fn max_drift(&self) -> f64 {
        self.drift().into_iter().fold(0.0, f64::max)
    }

    pub fn max_step_change(&self) -> f64 {
        self.rows.iter().map(|r| r.step_change).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub state: PhaseState,
    /// `(step, state)` every `snapshot_every` steps, including step 0
    pub snapshots: Vec<(usize, PhaseState)>,
    pub report: ConstraintReport,
}

/// Integrate `steps` RK4 steps, monitoring the battery after every step.
/// Stops with [`Error::EvolutionHalted`] if the cotetrad degenerates.
pub fn evolve(
    state: &PhaseState,
    mult: &Multipliers,
    dt: f64,
    steps: usize,
    snapshot_every: usize,
    battery: &Battery,
) -> Result<Trajectory> {
    check_cfl(state.grid(), mult, dt)?;
    let halt = |step: usize, e: Error| Error::EvolutionHalted {
        step,
        reason: e.to_string(),
    };
    let mut cur = state.clone();
    let mut rows = vec![DriftRow {
        step: 0,
        time: 0.0,
        values: battery.evaluate(&cur).map_err(|e| halt(0, e))?,
        step_change: 0.0,
    }];
    let mut snapshots = Vec::new();
    if snapshot_every > 0 {
        snapshots.push((0, cur.clone()));
    }
    for step in 1..=steps {
        let next = rk4_unchecked(&cur, mult, dt).map_err(|e| halt(step, e))?;
        let values = battery.evaluate(&next).map_err(|e| halt(step, e))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(halt(step, Error::Io("non-finite constraint value".into())));
        }
        rows.push(DriftRow {
            step,
            time: dt * step as f64,
            values,
            step_change: next.max_diff(&cur),
        });
        cur = next;
        if snapshot_every > 0 && step % snapshot_every == 0 {
            snapshots.push((step, cur.clone()));
        }
    }
    Ok(Trajectory {
        state: cur,
        snapshots,
        report: ConstraintReport {
            labels: battery.labels(),
            rows,
        },
    })
}

// ---------------------------------------------------------------------------
// constraint algebra

/// Residuals of the three closure relations plus the frozen-metric control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureResiduals {
    /// `{V(M⃗),V(M⃗')} - V([M⃗,M⃗'])`
    pub r1: f64,
    /// `{S(M),S(M')} - V(m⃗)`, `m⃗` raised with the current `q`
    pub r2: f64,
    /// `{S(M),V(M⃗)} + S(L_M⃗ M)`
    pub r3: f64,
    /// `r2` with `m⃗` raised by the identity instead of `q⁻¹`
    pub r2_frozen: f64,
    pub vv: f64,
    pub ss: f64,
    pub sv: f64,
}

/// `m = M dM' - M' dM` raised with `q⁻¹` (or the identity when `frozen`).
pub fn structure_vector(m: &FormField, m2: &FormField, geo: Option<&[PointGeometry]>) -> VectorFieldOnGrid {
    let grid = *m.grid();
    let dm = fields::d(m);
    let dm2 = fields::d(m2);
    VectorFieldOnGrid::from_fn_indexed(grid, |q| {
        let low: [f64; 3] = [0, 1, 2].map(|i| m.value(q) * dm2.data()[3 * q + i] - m2.value(q) * dm.data()[3 * q + i]);
        match geo {
            Some(g) => {
                let qi = g[q].q.ginv();
                [0, 1, 2].map(|i| (0..3).map(|j| qi[i][j] * low[j]).sum())
            }
            None => low,
        }
    })
}

pub fn bracket_closure(
    state: &PhaseState,
    m: &FormField,
    m2: &FormField,
    mv: &VectorFieldOnGrid,
    mv2: &VectorFieldOnGrid,
) -> Result<ClosureResiduals> {
    let geo = state.geometry()?;
    let gs = scalar_gradient(state, &geo, m);
    let gs2 = scalar_gradient(state, &geo, m2);
    let gv = vector_gradient(state, mv)?;
    let gv2 = vector_gradient(state, mv2)?;

    let vv = var::bracket_of_gradients(&gv, &gv2)?;
    let r1 = vv - vector_constraint(state, &fields::lie_bracket(mv, mv2)?)?.value;

    let ss = var::bracket_of_gradients(&gs, &gs2)?;
    let r2 = ss - vector_constraint(state, &structure_vector(m, m2, Some(&geo)))?.value;
    let r2_frozen = ss - vector_constraint(state, &structure_vector(m, m2, None))?.value;

    let sv = var::bracket_of_gradients(&gs, &gv)?;
    let dm = fields::d(m);
    let lm = FormField::from_fn(*m.grid(), 0, |q| {
        let v = mv.at(q);
        KForm::scalar(3, (0..3).map(|i| v.components()[i] * dm.data()[3 * q + i]).sum())
    });
    let r3 = sv + scalar_constraint_with(state, &geo, &lm).value;
    Ok(ClosureResiduals {
        r1,
        r2,
        r3,
        r2_frozen,
        vv,
        ss,
        sv,
    })
}

// ---------------------------------------------------------------------------
// projection onto the constraint surface

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionReport {
    pub iterations: usize,
    /// max |density| of the scalar and vector constraints before projecting
    pub initial_residual: f64,
    /// the same after projecting
    pub residual: f64,
}

/// All four constraint densities per point: `[s, v1, v2, v3]`.
pub fn constraint_densities(state: &PhaseState) -> Result<Vec<[f64; 4]>> {
    let geo = state.geometry()?;
    let s = scalar_constraint_with(state, &geo, &FormField::scalar_fn(*state.grid(), |_| 1.0)).density;
    let v = vector_density(state);
    Ok(s.iter().zip(&v).map(|(s, v)| [*s, v[0], v[1], v[2]]).collect())
}

fn max_density(c: &[[f64; 4]]) -> f64 {
    c.iter().flat_map(|x| x.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Linearization of the densities with respect to `p` along `dp`.
fn densities_linear(state: &PhaseState, geo: &[PointGeometry], dp: &[FormField; 4]) -> Vec<[f64; 4]> {
    let grid = *state.grid();
    let ddp: [FormField; 4] = [0, 1, 2, 3].map(|a| fields::d(&dp[a]));
    let lin_state = PhaseState {
        theta: state.theta.clone(),
        p: dp.clone(),
    };
    let v = vector_density(&lin_state);
    crate::par::map_indexed(grid.len(), |q| {
        let g = &geo[q];
        let mut s = 0.0;
        for a in 0..4 {
            let w = exterior::wedge(&state.p[a].at(q), &g.star(&dp[a].at(q))).expect("top form");
            s += Eta::DIAG[a] * w.top() - g.xi[a] * ddp[a].at(q).top();
        }
        [s, v[q][0], v[q][1], v[q][2]]
    })
}

/// Transpose of [`densities_linear`]: the momentum direction whose
/// pairing with every `dp` equals `Σ λ · (J dp)`.
fn densities_adjoint(state: &PhaseState, geo: &[PointGeometry], lambda: &[[f64; 4]]) -> Result<[FormField; 4]> {
    let grid = *state.grid();
    let ls = FormField::from_fn(grid, 0, |q| KForm::scalar(3, lambda[q][0]));
    let lv = VectorFieldOnGrid::from_fn_indexed(grid, |q| [lambda[q][1], lambda[q][2], lambda[q][3]]);
    let mut g = var::ds1_dp(geo, &state.p, &ls);
    let g2 = var::ds2_dp(geo, &ls);
    for a in 0..4 {
        g[a].axpy(1.0, &g2[a]);
        g[a].axpy(1.0, &fields::lie_derivative(&lv, state.theta.leg(a))?);
    }
    // a 1-form gradient G pairs with dp through dp_12 G_3 - dp_13 G_2 + dp_23 G_1
    Ok(g.map(|ga| {
        FormField::from_fn(grid, 2, |q| {
            let c = &ga.data()[3 * q..3 * q + 3];
            KForm::from_strict(3, 2, &[c[2], -c[1], c[0]])
        })
    }))
}

fn dot4(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + x[3] * y[3]).sum()
}

/// Gauss-Newton on the momenta (cotetrad held fixed): each iteration
/// solves `J Jᵀ λ = -c` by conjugate gradients and moves `p` by `Jᵀ λ`.
/// Stops once every density is below `tol`.
pub fn project_constraints(state: &PhaseState, tol: f64, max_iter: usize) -> Result<(PhaseState, ProjectionReport)> {
    let geo = state.geometry()?;
    let mut cur = state.clone();
    let mut c = constraint_densities(&cur)?;
    let initial = max_density(&c);
    let mut iterations = 0;
    while max_density(&c) > tol && iterations < max_iter {
        iterations += 1;
        let rhs: Vec<[f64; 4]> = c.iter().map(|x| x.map(|v| -v)).collect();
        let apply = |l: &[[f64; 4]]| -> Result<Vec<[f64; 4]>> {
            let dir = densities_adjoint(&cur, &geo, l)?;
            Ok(densities_linear(&cur, &geo, &dir))
        };
        let mut lambda = vec![[0.0; 4]; rhs.len()];
        let mut r = rhs.clone();
        let mut d = r.clone();
        let mut rr = dot4(&r, &r);
        let stop = rr * 1e-28;
        for _ in 0..400 {
            if rr <= stop {
                break;
            }
            let ad = apply(&d)?;
            let alpha = rr / dot4(&d, &ad);
            for i in 0..lambda.len() {
                for j in 0..4 {
                    lambda[i][j] += alpha * d[i][j];
                    r[i][j] -= alpha * ad[i][j];
                }
            }
            let rr_new = dot4(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..d.len() {
                for j in 0..4 {
                    d[i][j] = r[i][j] + beta * d[i][j];
                }
            }
        }
        let step = densities_adjoint(&cur, &geo, &lambda)?;
        for a in 0..4 {
            cur.p[a].axpy(1.0, &step[a]);
        }
        c = constraint_densities(&cur)?;
    }
    let residual = max_density(&c);
    Ok((
        cur,
        ProjectionReport {
            iterations,
            initial_residual: initial,
            residual,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid8() -> PeriodicGrid {
        PeriodicGrid::cube(8)
    }

    #[test]
    fn flat_state_has_zero_constraints() {
        let s = PhaseState::flat(grid8());
        let m = FormField::scalar_fn(*s.grid(), |x| 1.0 + x[0].sin());
        let sc = scalar_constraint(&s, &m).unwrap();
        assert_eq!(sc.value, 0.0);
        let v = vector_constraint(&s, &VectorFieldOnGrid::constant(*s.grid(), [1.0, 2.0, 3.0])).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn flat_rhs_vanishes() {
        let s = PhaseState::flat(grid8());
        let r = hamilton_rhs(&s, &Multipliers::unit(*s.grid())).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn legendre_hand_case() {
        let g = grid8();
        let theta = CotetradField::flat(g);
        let mult = Multipliers::unit(g);
        let mut vel = [0; 4].map(|_| FormField::zero(g, 1));
        vel[1] = FormField::constant(g, &KForm::basis(3, &[0]));
        let p = legendre(&theta, &vel, &mult).unwrap();
        assert!(p[1].max_diff(&FormField::constant(g, &KForm::basis(3, &[1, 2]))) < 1e-15);
        let back = inverse_legendre(&theta, &p, &mult).unwrap();
        assert!(back[1].max_diff(&vel[1]) < 1e-15);
    }

    #[test]
    fn nonpositive_lapse_rejected() {
        let g = grid8();
        let lapse = FormField::scalar_fn(g, |x| x[0] - 0.5);
        assert!(matches!(
            Multipliers::new(lapse, VectorFieldOnGrid::zero(g)),
            Err(Error::NonPositiveLapse { .. })
        ));
    }

    #[test]
    fn cfl_guard() {
        let g = grid8();
        let s = PhaseState::flat(g);
        let mult = Multipliers::unit(g);
        let lim = cfl_limit(&g, &mult);
        assert!((lim - 0.0625).abs() < 1e-15);
        assert!(matches!(step_rk4(&s, &mult, 0.1), Err(Error::CflViolation { .. })));
    }
}
