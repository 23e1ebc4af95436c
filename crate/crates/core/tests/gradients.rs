//! Analytic functional derivatives against central finite differences of
//! the discretized functionals.

use teleham_core::dynamics::{self, Multipliers, PhaseState, VectorForm};
use teleham_core::fields::{self, FormField, PeriodicGrid, VectorFieldOnGrid};
use teleham_core::teleparallel::CotetradField;
use teleham_core::variational::{self as var, FdCheck};

const REL_TOL: f64 = 1e-6;

fn state(n: usize, seed: u64) -> PhaseState {
    PhaseState::random(PeriodicGrid::cube(n), 0.3, 1, seed).unwrap()
}

fn smearing(grid: PeriodicGrid) -> FormField {
    FormField::scalar_fn(grid, |x| 1.0 + 0.4 * (std::f64::consts::TAU * (x[0] + 2.0 * x[2])).cos())
}

fn theta_dir(grid: PeriodicGrid, seed: u64) -> [FormField; 4] {
    [0, 1, 2, 3].map(|a| fields::random_bandlimited_stream(&grid, 1, 1, 0.05, seed, 500 + a).unwrap())
}

fn p_dir(grid: PeriodicGrid, seed: u64) -> [FormField; 4] {
    [0, 1, 2, 3].map(|a| fields::random_bandlimited_stream(&grid, 2, 1, 0.05, seed, 600 + a).unwrap())
}

fn shifted(s: &PhaseState, t: f64, dth: Option<&[FormField; 4]>, dp: Option<&[FormField; 4]>) -> PhaseState {
    let mut out = s.clone();
    for a in 0..4 {
        if let Some(d) = dth {
            out.theta.legs_mut()[a].axpy(t, &d[a]);
        }
        if let Some(d) = dp {
            out.p[a].axpy(t, &d[a]);
        }
    }
    out
}

fn pairing(g: &[FormField; 4], dir: &[FormField; 4]) -> f64 {
    (0..4)
        .map(|a| {
            if g[a].degree() == 2 {
                var::pair_21(&g[a], &dir[a])
            } else {
                var::pair_21(&dir[a], &g[a])
            }
        })
        .sum()
}

fn assert_fd(name: &str, c: FdCheck) {
    println!("{name}: analytic {:.6e} rel {:.2e} order {:.2}", c.analytic, c.rel_error, c.order);
    assert!(c.analytic.abs() > 1e-8, "{name}: degenerate test direction");
    assert!(c.rel_error <= REL_TOL, "{name}: {c:?}");
    assert!(c.second_order(), "{name}: {c:?}");
}

#[test]
fn scalar_pieces_match_finite_differences() {
    let s = state(8, 11);
    let grid = *s.grid();
    let m = smearing(grid);
    let geo = s.geometry().unwrap();
    let dth = theta_dir(grid, 3);
    let dp = p_dir(grid, 4);
    let part = |st: &PhaseState, i: usize| dynamics::scalar_constraint(st, &m).unwrap().parts[i];

    let g = var::ds1_dtheta(&geo, &s.p, &m);
    assert_fd("dS1/dtheta", var::directional_check(pairing(&g, &dth), |t| part(&shifted(&s, t, Some(&dth), None), 0), 1e-2));
    let g = var::ds1_dp(&geo, &s.p, &m);
    assert_fd("dS1/dp", var::directional_check(pairing(&g, &dp), |t| part(&shifted(&s, t, None, Some(&dp)), 0), 1e-2));
    let g = var::ds2_dtheta(&geo, &s.p, &m);
    assert_fd("dS2/dtheta", var::directional_check(pairing(&g, &dth), |t| part(&shifted(&s, t, Some(&dth), None), 1), 1e-2));
    let g = var::ds2_dp(&geo, &m);
    assert_fd("dS2/dp", var::directional_check(pairing(&g, &dp), |t| part(&shifted(&s, t, None, Some(&dp)), 1), 1e-2));
    let g = var::ds3_dtheta(&s.theta, &geo, &m);
    assert_fd("dS3/dtheta", var::directional_check(pairing(&g, &dth), |t| part(&shifted(&s, t, Some(&dth), None), 2), 1e-2));
}

#[test]
fn vector_gradient_matches_finite_differences() {
    let s = state(8, 12);
    let grid = *s.grid();
    let mv = fields::random_vector_field(&grid, 1, 0.5, 9, 1).unwrap();
    let g = dynamics::vector_gradient(&s, &mv).unwrap();
    let dth = theta_dir(grid, 5);
    let dp = p_dir(grid, 6);
    let v = |st: &PhaseState| dynamics::vector_constraint(st, &mv).unwrap().value;
    assert_fd("dV/dtheta", var::directional_check(pairing(&g.d_theta, &dth), |t| v(&shifted(&s, t, Some(&dth), None)), 1e-2));
    assert_fd("dV/dp", var::directional_check(pairing(&g.d_p, &dp), |t| v(&shifted(&s, t, None, Some(&dp))), 1e-2));
}

#[test]
fn star_variation_matches_finite_differences() {
    let grid = PeriodicGrid::cube(8);
    let theta = CotetradField::random_near_flat(grid, 0.3, 1, 21).unwrap();
    let dth = theta_dir(grid, 7);
    for k in 0..=3 {
        let a = fields::random_bandlimited_stream(&grid, k, 1, 1.0, 22, 10 + k as u64).unwrap();
        let b = fields::random_bandlimited_stream(&grid, k, 1, 1.0, 22, 20 + k as u64).unwrap();
        let functional = |th: &CotetradField| {
            let q: Vec<_> = th.geometry().unwrap().iter().map(|g| g.q).collect();
            fields::integrate(&fields::wedge(&a, &fields::hodge(&b, &q)).unwrap()).unwrap()
        };
        let geo = theta.geometry().unwrap();
        let kern = var::star_variation(&a, &b, &geo).unwrap();
        let moved = |t: f64| {
            let mut th = theta.clone();
            for i in 0..4 {
                th.legs_mut()[i].axpy(t, &dth[i]);
            }
            functional(&th)
        };
        assert_fd(&format!("star variation k={k}"), var::directional_check(pairing(&kern, &dth), moved, 1e-2));
    }
}

#[test]
fn momentum_rate_matches_hamiltonian_differences() {
    let s = state(8, 13);
    let grid = *s.grid();
    let lapse = FormField::scalar_fn(grid, |x| 1.2 + 0.3 * (std::f64::consts::TAU * x[1]).sin());
    let shift = fields::random_vector_field(&grid, 1, 0.2, 3, 2).unwrap();
    let mult = Multipliers::new(lapse, shift).unwrap();
    let rates = dynamics::hamilton_rhs(&s, &mult).unwrap();
    let dth = theta_dir(grid, 8);
    let analytic = -pairing(&rates.p, &dth);
    let c = var::directional_check(analytic, |t| dynamics::hamiltonian(&shifted(&s, t, Some(&dth), None), &mult).unwrap(), 1e-2);
    assert_fd("pdot vs -dH/dtheta", c);
    let dp = p_dir(grid, 9);
    let analytic = pairing(&rates.theta, &dp);
    let c = var::directional_check(analytic, |t| dynamics::hamiltonian(&shifted(&s, t, None, Some(&dp)), &mult).unwrap(), 1e-2);
    assert_fd("thetadot vs dH/dp", c);
}

#[test]
fn vector_constraint_forms_agree() {
    let s = state(8, 14);
    let mv = fields::random_vector_field(s.grid(), 1, 0.5, 4, 3).unwrap();
    let a = dynamics::vector_constraint_form(&s, &mv, VectorForm::Contraction).unwrap();
    let b = dynamics::vector_constraint_form(&s, &mv, VectorForm::LieTheta).unwrap();
    let c = dynamics::vector_constraint_form(&s, &mv, VectorForm::LieMomentum).unwrap();
    let d = dynamics::vector_constraint(&s, &mv).unwrap().value;
    println!("{a} {b} {c} {d}");
    assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    assert!((a - c).abs() < 1e-12 * a.abs().max(1.0));
    assert!((a - d).abs() < 1e-12 * a.abs().max(1.0));
    let zero = VectorFieldOnGrid::zero(*s.grid());
    assert_eq!(dynamics::vector_constraint(&s, &zero).unwrap().value, 0.0);
}
