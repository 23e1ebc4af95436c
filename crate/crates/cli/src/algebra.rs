//! Pointwise identity suite over random metrics, forms and cotetrads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teleham_core::exterior::{self, KForm, MetricAtPoint, Signature};
use teleham_core::linalg::{self, Mat4};
use teleham_core::teleparallel::{self as tp, FormJet, Legs, PointGeometry};
use teleham_core::variational as var;
use teleham_core::{par, Result};

use crate::report::{Report, ReportRow};

pub const SUITE: &str = "algebra";
pub const DEFAULT_TOL: f64 = 1e-10;

struct Draw(ChaCha8Rng);

impl Draw {
    fn new(seed: u64, trial: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(trial);
        Draw(r)
    }

    fn unit(&mut self) -> f64 {
        self.0.gen_range(-1.0..1.0)
    }

    fn values(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.unit()).collect()
    }

    fn form(&mut self, n: usize, k: usize) -> KForm {
        let len = binom(n, k);
        KForm::from_strict(n, k, &self.values(len))
    }

    /// `Lᵀ diag(-1 x m, 1 x (n-m)) L` with `L` within 0.3 of the identity.
    fn metric(&mut self, sig: Signature) -> Result<MetricAtPoint> {
        let (n, m) = (sig.n(), sig.m());
        let mut l: Mat4 = linalg::identity(n);
        for row in l.iter_mut().take(n) {
            for x in row.iter_mut().take(n) {
                *x += 0.3 * self.unit();
            }
        }
        let mut g = linalg::ZERO4;
        for a in 0..n {
            for b in 0..n {
                g[a][b] = (0..n).map(|c| l[c][a] * l[c][b] * if c < m { -1.0 } else { 1.0 }).sum();
            }
        }
        let orientation = if self.0.gen_bool(0.5) { 1.0 } else { -1.0 };
        MetricAtPoint::new(g, sig, orientation)
    }

    fn legs(&mut self) -> Legs {
        let mut t = [[0.0; 3]; 4];
        for (a, row) in t.iter_mut().enumerate() {
            for (i, x) in row.iter_mut().enumerate() {
                *x = 0.2 * self.unit() + if a == i + 1 { 1.0 } else { 0.0 };
            }
        }
        t
    }
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn sig_label(sig: Signature) -> String {
    format!("{}+{}", sig.n() - sig.m(), sig.m())
}

/// Named residuals of one trial, always in the same order.
fn trial(seed: u64, t: u64) -> Result<Vec<(String, f64)>> {
    let mut d = Draw::new(seed, t);
    let mut out = Vec::new();
    for sig in [Signature::new(3, 0)?, Signature::new(4, 1)?] {
        let n = sig.n();
        let g = d.metric(sig)?;
        let s = sig_label(sig);
        for k in 0..=n {
            let table = exterior::levi_contraction_with(&g, k, n - k)?;
            let scale = table.rhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            out.push((format!("eps-eps/{s}/k={k}"), table.max_residual() / scale));
        }
        for k in 0..=n {
            let b = d.form(n, k);
            let ss = exterior::hodge(&exterior::hodge(&b, &g), &g);
            let r = ss.max_diff(&b.scale(exterior::double_star_sign(sig, k)));
            out.push((format!("double-star/{s}/k={k}"), r));
        }
        for k in 0..=n {
            let a = d.form(n, 1);
            let b = d.form(n, k);
            out.push((format!("interior-hodge/{s}/k={k}"), exterior::interior_hodge_residual(&a, &b, &g)?));
        }
    }
    let legs = d.legs();
    let geo = PointGeometry::new(&legs)?;
    out.push(("normal/3+1".into(), tp::normal_residual(&geo)));
    out.push(("normal-identity/3+1".into(), tp::xi_identity_residual(&geo)));
    let lapse = 0.5 + d.unit().abs() * 1.5;
    let shift = [d.unit() * 0.5, d.unit() * 0.5, d.unit() * 0.5];
    for k in 0..=4 {
        let a = d.form(4, k);
        let b = d.form(4, k);
        let r = tp::hodge_decomposition_check(&a, &b, lapse, shift, &geo.q)?;
        out.push((format!("hodge-split/3+1/k={k}"), r));
    }
    for k in 0..=4 {
        let jet = FormJet {
            value: d.form(4, k),
            partials: [0; 4].map(|_| d.form(4, k)),
        };
        let mut worst: f64 = 0.0;
        for l in 0..=4 - k {
            let b = d.form(4, l);
            worst = worst.max(tp::perp_underline_table_residual(&jet, &b));
        }
        out.push((format!("perp-underline/3+1/k={k}"), worst));
    }
    for k in 0..=3 {
        let a = d.form(3, k);
        let b = d.form(3, k);
        out.push((format!("normal-transversality/3+1/k={k}"), var::normal_transversality_residual(&a, &b, &geo)));
    }
    Ok(out)
}

/// Run `trials` random instances and report the worst residual per case.
pub fn run(trials: usize, seed: u64, tol: f64) -> Result<Report> {
    let results: Vec<Result<Vec<(String, f64)>>> = par::map_indexed(trials, |t| trial(seed, t as u64));
    let mut worst: Vec<(String, f64)> = Vec::new();
    for r in results {
        let r = r?;
        if worst.is_empty() {
            worst = r;
            continue;
        }
        for (w, (_, v)) in worst.iter_mut().zip(r) {
            // NaN must not be swallowed by max
            w.1 = if v.is_nan() || w.1.is_nan() { f64::NAN } else { w.1.max(v) };
        }
    }
    let mut report = Report::new("verify-algebra");
    for (case, r) in worst {
        report.push(ReportRow::new(SUITE, case, seed, "-", r, tol));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let a = run(20, 3, DEFAULT_TOL).unwrap();
        assert!(a.all_pass(), "{}", a.to_csv());
        assert_eq!(a.to_csv(), run(20, 3, DEFAULT_TOL).unwrap().to_csv());
        assert_ne!(a.to_csv(), run(20, 4, DEFAULT_TOL).unwrap().to_csv());
    }
}
