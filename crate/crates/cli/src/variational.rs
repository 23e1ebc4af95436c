//! Finite-difference checks of the functional derivatives and the Lie/Hodge
//! identity refinement on a grid.

use teleham_core::dynamics::{self, Multipliers, PhaseState};
use teleham_core::fields::{self, FormField, PeriodicGrid};
use teleham_core::teleparallel::{CotetradField, PointGeometry};
use teleham_core::variational::{self as var, FdCheck};
use teleham_core::{Error, Result};

use crate::report::{grid_label, Report, ReportRow};

pub const SUITE: &str = "variational";
pub const DEFAULT_TOL: f64 = 1e-6;
pub const TRANSVERSALITY_TOL: f64 = 1e-10;
pub const IDENTITY_ORDER: f64 = 3.8;
const RICHARDSON_STEP: f64 = 1e-2;
const EXACT_TOL: f64 = 1e-12;

fn theta_dir(grid: &PeriodicGrid, seed: u64) -> Result<[FormField; 4]> {
    let f = |a: u64| fields::random_bandlimited_stream(grid, 1, 1, 0.05, seed, 500 + a);
    Ok([f(0)?, f(1)?, f(2)?, f(3)?])
}

fn p_dir(grid: &PeriodicGrid, seed: u64) -> Result<[FormField; 4]> {
    let f = |a: u64| fields::random_bandlimited_stream(grid, 2, 1, 0.05, seed, 600 + a);
    Ok([f(0)?, f(1)?, f(2)?, f(3)?])
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

/// `Σ_A ∫ g_A ^ dir_A` with the 2-form always on the left.
pub fn pairing(g: &[FormField; 4], dir: &[FormField; 4]) -> f64 {
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

/// Accuracy row and perturbation-order row for one FD check.
fn fd_rows(report: &mut Report, case: &str, seed: u64, grid: &str, c: FdCheck, tol: f64) {
    report.push(ReportRow::new(SUITE, format!("fd/{case}"), seed, grid, c.rel_error, tol).with_value(c.analytic));
    let (e1, e2) = c.richardson;
    let order_gap = if e1 < var::FD_FLOOR && e2 < var::FD_FLOOR { 0.0 } else { (c.order - 2.0).abs() };
    report.push(ReportRow::new(SUITE, format!("fd-order/{case}"), seed, grid, order_gap, 0.5).with_order(c.order));
}

/// Lie/Hodge identity residual (RMS) on an `n³` grid for degree `k`.
pub fn lie_star_residual(n: usize, k: usize, seed: u64) -> Result<f64> {
    let grid = PeriodicGrid::cube(n);
    let theta = CotetradField::random_near_flat(grid, 0.3, 1, seed)?;
    let a = fields::random_bandlimited_stream(&grid, k, 1, 1.0, seed, 1)?;
    let b = fields::random_bandlimited_stream(&grid, k, 1, 1.0, seed, 2)?;
    let x = fields::random_vector_field(&grid, 1, 1.0, seed, 3)?;
    Ok(var::lie_star_identity_check(&x, &a, &b, &theta)?.rms())
}

/// Convergence row: passes iff the measured order is at least `order`.
pub fn order_row(suite: &str, case: String, seed: u64, grid: &str, coarse: f64, fine: f64, ratio: f64, order: f64) -> ReportRow {
    let measured = fields::convergence_order(coarse.abs(), fine.abs(), ratio);
    let bound = coarse.abs() * ratio.powf(-order);
    ReportRow::new(suite, case, seed, grid, fine, bound).with_order(measured).with_value(fine)
}

pub fn run(grid: PeriodicGrid, seed: u64, tol: f64) -> Result<Report> {
    if grid.points().iter().any(|&n| n < 8) {
        return Err(Error::InvalidGrid("the variational suite needs at least 8 points per axis".into()));
    }
    let label = grid_label(&grid);
    let label = label.as_str();
    let mut report = Report::new("verify-variational");
    let s = PhaseState::random(grid, 0.3, 1, seed)?;
    let geo = s.geometry()?;
    let m = FormField::scalar_fn(grid, |x| 1.0 + 0.4 * (std::f64::consts::TAU * (x[0] + 2.0 * x[2])).cos());
    let dth = theta_dir(&grid, seed.wrapping_add(1))?;
    let dp = p_dir(&grid, seed.wrapping_add(2))?;

    let part = |st: &PhaseState, i: usize| dynamics::scalar_constraint(st, &m).map(|c| c.parts[i]).unwrap_or(f64::NAN);
    let (sr, dthr, dpr, partr) = (&s, &dth, &dp, &part);
    let along_theta = |i: usize| move |t: f64| partr(&shifted(sr, t, Some(dthr), None), i);
    let along_p = |i: usize| move |t: f64| partr(&shifted(sr, t, None, Some(dpr)), i);
    let checks = [
        ("S1/theta", var::directional_check(pairing(&var::ds1_dtheta(&geo, &s.p, &m), &dth), along_theta(0), RICHARDSON_STEP)),
        ("S1/p", var::directional_check(pairing(&var::ds1_dp(&geo, &s.p, &m), &dp), along_p(0), RICHARDSON_STEP)),
        ("S2/theta", var::directional_check(pairing(&var::ds2_dtheta(&geo, &s.p, &m), &dth), along_theta(1), RICHARDSON_STEP)),
        ("S2/p", var::directional_check(pairing(&var::ds2_dp(&geo, &m), &dp), along_p(1), RICHARDSON_STEP)),
        ("S3/theta", var::directional_check(pairing(&var::ds3_dtheta(&s.theta, &geo, &m), &dth), along_theta(2), RICHARDSON_STEP)),
    ];
    for (case, c) in checks {
        fd_rows(&mut report, case, seed, label, c, tol);
    }
    // S3 does not involve the momenta
    let s3p = (0..3).map(|j| (along_p(2)(1e-3 * (j as f64 + 1.0)) - along_p(2)(0.0)).abs()).fold(0.0, f64::max);
    report.push(ReportRow::new(SUITE, "exact/S3 independent of p", seed, label, s3p, EXACT_TOL));

    let mv = fields::random_vector_field(&grid, 1, 0.5, seed, 9)?;
    let g = dynamics::vector_gradient(&s, &mv)?;
    let v = |st: &PhaseState| dynamics::vector_constraint(st, &mv).map(|c| c.value).unwrap_or(f64::NAN);
    let c = var::directional_check(pairing(&g.d_theta, &dth), |t| v(&shifted(&s, t, Some(&dth), None)), RICHARDSON_STEP);
    fd_rows(&mut report, "V/theta", seed, label, c, tol);
    let c = var::directional_check(pairing(&g.d_p, &dp), |t| v(&shifted(&s, t, None, Some(&dp))), RICHARDSON_STEP);
    fd_rows(&mut report, "V/p", seed, label, c, tol);

    for k in 0..=3usize {
        let a = fields::random_bandlimited_stream(&grid, k, 1, 1.0, seed, 10 + k as u64)?;
        let b = fields::random_bandlimited_stream(&grid, k, 1, 1.0, seed, 20 + k as u64)?;
        let kern = var::star_variation(&a, &b, &geo)?;
        let functional = |t: f64| -> f64 {
            let th = shifted(&s, t, Some(&dth), None).theta;
            let q: Vec<_> = match th.geometry() {
                Ok(g) => g.iter().map(|g| g.q).collect(),
                Err(_) => return f64::NAN,
            };
            fields::wedge(&a, &fields::hodge(&b, &q)).and_then(|w| fields::integrate(&w)).unwrap_or(f64::NAN)
        };
        let c = var::directional_check(pairing(&kern, &dth), functional, RICHARDSON_STEP);
        fd_rows(&mut report, &format!("star-variation/k={k}"), seed, label, c, tol);

        let worst = geo
            .iter()
            .enumerate()
            .map(|(q, g)| var::normal_transversality_residual(&a.at(q), &b.at(q), g))
            .fold(0.0, f64::max);
        report.push(ReportRow::new(SUITE, format!("normal-transversality/k={k}"), seed, label, worst, TRANSVERSALITY_TOL));
    }

    // pointwise volume gradient at a spread of grid points
    let mut worst_vol = FdCheck { analytic: 0.0, rel_error: 0.0, richardson: (0.0, 0.0), order: f64::NAN };
    for q in (0..grid.len()).step_by(grid.len() / 8 + 1) {
        let legs = s.theta.at(q);
        let grad = var::sqrt_det_gradient(&legs)?;
        let dir: [[f64; 3]; 4] = [0, 1, 2, 3].map(|a| [0, 1, 2].map(|i| dth[a].data()[3 * q + i]));
        let analytic: f64 = (0..4).flat_map(|a| (0..3).map(move |i| (a, i))).map(|(a, i)| grad[a][i] * dir[a][i]).sum();
        let f = |t: f64| {
            let mut l = legs;
            for a in 0..4 {
                for i in 0..3 {
                    l[a][i] += t * dir[a][i];
                }
            }
            PointGeometry::new(&l).map(|g| g.sqrt_det).unwrap_or(f64::NAN)
        };
        let c = var::directional_check(analytic, f, RICHARDSON_STEP);
        if !(c.rel_error <= worst_vol.rel_error) {
            worst_vol = c;
        }
    }
    fd_rows(&mut report, "volume-gradient", seed, label, worst_vol, tol);

    // flat state: every constraint and rate vanishes exactly
    let flat = PhaseState::flat(grid);
    let sc = dynamics::scalar_constraint(&flat, &m)?.value;
    report.push(ReportRow::new(SUITE, "exact/flat S", seed, label, sc, EXACT_TOL).with_value(sc));
    let vc = dynamics::vector_constraint(&flat, &mv)?.value;
    report.push(ReportRow::new(SUITE, "exact/flat V", seed, label, vc, EXACT_TOL).with_value(vc));
    let r = dynamics::hamilton_rhs(&flat, &Multipliers::unit(grid))?.max_abs();
    report.push(ReportRow::new(SUITE, "exact/flat rates", seed, label, r, EXACT_TOL));

    // Lie/Hodge identity under refinement, from this grid to twice as fine
    let n = grid.points()[0];
    for k in 0..=2 {
        let (coarse, fine) = (lie_star_residual(n, k, seed)?, lie_star_residual(2 * n, k, seed)?);
        let pair = format!("{n}/{}", 2 * n);
        report.push(order_row(SUITE, format!("lie-hodge-order/k={k}"), seed, &pair, coarse, fine, 2.0, IDENTITY_ORDER));
    }
    Ok(report)
}
