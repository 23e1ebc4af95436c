mod common;

use common::{kform, legs, metric, values};
use proptest::prelude::*;
use teleham_core::exterior::{self, KForm, MetricAtPoint, Signature};
use teleham_core::teleparallel::{self as tp, FullCotetradAtPoint, InternalMetric as Eta, PointGeometry, XiBranch};

fn lapse_shift() -> impl Strategy<Value = (f64, [f64; 3])> {
    (0.3..3.0f64, values(3)).prop_map(|(n, s)| (n, [s[0], s[1], s[2]]))
}

fn full() -> impl Strategy<Value = FullCotetradAtPoint> {
    (legs(), lapse_shift()).prop_map(|(l, (n, s))| FullCotetradAtPoint::reconstruct(n, s, &l).unwrap())
}

fn quad() -> impl Strategy<Value = [KForm; 4]> {
    (kform(4, 2), kform(4, 2), kform(4, 2), kform(4, 2)).prop_map(|(a, b, c, d)| [a, b, c, d])
}

/// `xi^A` by summing over all orderings of the three other legs.
fn xi_by_permutation_sum(g: &PointGeometry) -> [f64; 4] {
    let mut xi = [0.0; 4];
    for (a, x) in xi.iter_mut().enumerate() {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let e = Eta::levi_up(a, b, c, d);
                    if e == 0.0 {
                        continue;
                    }
                    let w = exterior::wedge(&exterior::wedge(&g.leg(b), &g.leg(c)).unwrap(), &g.leg(d)).unwrap();
                    *x -= e * g.star(&w).value() / 6.0;
                }
            }
        }
    }
    xi
}

proptest! {
    #[test]
    fn induced_metric_matches_sum(t in legs()) {
        let g = PointGeometry::new(&t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..4).map(|a| Eta::DIAG[a] * t[a][i] * t[a][j]).sum();
                prop_assert!((g.q.g()[i][j] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn normal_conditions_hold(t in legs()) {
        let g = PointGeometry::new(&t).unwrap();
        prop_assert!(tp::normal_residual(&g) < 1e-10);
        prop_assert!(tp::xi_identity_residual(&g) < 1e-10);
        let brute = xi_by_permutation_sum(&g);
        for a in 0..4 {
            prop_assert!((brute[a] - g.xi[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_invariant_under_scaling(t in legs(), c in 0.2..5.0f64) {
        let g = PointGeometry::new(&t).unwrap();
        let scaled = t.map(|row| row.map(|x| c * x));
        let h = PointGeometry::new(&scaled).unwrap();
        for a in 0..4 {
            prop_assert!((g.xi[a] - h.xi[a]).abs() < 1e-10);
        }
    }

    #[test]
    fn lapse_shift_roundtrip(t in legs(), (n, s) in lapse_shift()) {
        let f = FullCotetradAtPoint::reconstruct(n, s, &t).unwrap();
        let ls = tp::lapse_shift_at(&f, XiBranch::Chosen).unwrap();
        prop_assert!((ls.lapse - n).abs() < 1e-10);
        for i in 0..3 {
            prop_assert!((ls.shift[i] - s[i]).abs() < 1e-10);
        }
        let g = PointGeometry::new(&t).unwrap();
        prop_assert!(f.det() > 0.0);
        prop_assert!((f.det() - n * g.sqrt_det).abs() < 1e-10);
        // the other branch of the normal flips the lapse
        prop_assert!(tp::lapse_shift_at(&f, XiBranch::Opposite).is_err());
    }

    #[test]
    fn metric_decomposition_matches_cotetrad(t in legs(), (n, s) in lapse_shift()) {
        let f = FullCotetradAtPoint::reconstruct(n, s, &t).unwrap();
        let g = PointGeometry::new(&t).unwrap();
        let (gd, gi) = tp::metric_decomposition(n, s, &g.q);
        let direct = f.metric();
        for a in 0..4 {
            for b in 0..4 {
                prop_assert!((gd[a][b] - direct[a][b]).abs() < 1e-10);
                let id: f64 = (0..4).map(|c| gd[a][c] * gi[c][b]).sum();
                let kd = if a == b { 1.0 } else { 0.0 };
                prop_assert!((id - kd).abs() < 1e-10);
            }
        }
        prop_assert!(tp::volume_decomposition_check(n, s, &g.q).unwrap() < 1e-10);
    }

    #[test]
    fn hodge_split(t in legs(), (n, s) in lapse_shift(), (a, b) in (0usize..=4).prop_flat_map(|k| (kform(4, k), kform(4, k)))) {
        let g = PointGeometry::new(&t).unwrap();
        prop_assert!(tp::hodge_decomposition_check(&a, &b, n, s, &g.q).unwrap() < 1e-10);
    }

    #[test]
    fn projection_table((v, p, b) in (0usize..=4).prop_flat_map(|k| (kform(4, k), (kform(4, k), kform(4, k), kform(4, k), kform(4, k)), (0..=4 - k).prop_flat_map(|l| kform(4, l))))) {
        let jet = tp::FormJet { value: v, partials: [p.0, p.1, p.2, p.3] };
        prop_assert!(tp::perp_underline_table_residual(&jet, &b) < 1e-12);
    }

    #[test]
    fn irreducible_parts_sum_and_project(d in quad(), f in full()) {
        let parts = tp::irreducible_parts(&d, &f).unwrap();
        for a in 0..4 {
            let s = parts.parts[0][a].add(&parts.parts[1][a]).add(&parts.parts[2][a]);
            prop_assert!(s.max_diff(&d[a]) < 1e-12);
        }
        for i in 0..3 {
            let again = tp::irreducible_parts(&parts.parts[i], &f).unwrap();
            for j in 0..3 {
                for a in 0..4 {
                    let expect = if i == j { parts.parts[i][a].clone() } else { KForm::zero(4, 2) };
                    prop_assert!(again.parts[j][a].max_diff(&expect) < 1e-10, "part {i} -> {j}");
                }
            }
        }
    }

    #[test]
    fn action_densities(d in quad(), f in full(), c in 0.1..3.0f64) {
        let plain = tp::plain_action_density(&d, &f).unwrap();
        let unit = tp::action_density(&d, &f, [1.0; 3]).unwrap();
        prop_assert!(unit.max_diff(&plain) < 1e-10 * (1.0 + plain.max_abs()));
        // term-by-term evaluation with the TEGR coefficients
        let coeffs = [1.0, -2.0, -0.5];
        let parts = tp::irreducible_parts(&d, &f).unwrap();
        let g = MetricAtPoint::new(f.metric(), Signature::lorentzian(4), 1.0).unwrap();
        let mut brute = KForm::zero(4, 4);
        for i in 0..3 {
            for a in 0..4 {
                let w = exterior::wedge(&d[a], &exterior::hodge(&parts.parts[i][a], &g)).unwrap();
                brute.axpy(-0.5 * coeffs[i] * Eta::DIAG[a], &w);
            }
        }
        let tegr_family = tp::action_density(&d, &f, coeffs).unwrap();
        prop_assert!(tegr_family.max_diff(&brute) < 1e-10 * (1.0 + brute.max_abs()));
        let t = tp::tegr_density(&d, &f).unwrap();
        let scaled = tp::tegr_density(&d.clone().map(|x| x.scale(c)), &f).unwrap();
        prop_assert!(scaled.max_diff(&t.scale(c * c)) < 1e-10 * (1.0 + t.max_abs() * c * c));
    }

    #[test]
    fn spacetime_metric_is_lorentzian(q in metric(3, 0), (n, s) in lapse_shift()) {
        let g = tp::spacetime_metric(n, s, &q).unwrap();
        prop_assert!(g.inverse_residual() < 1e-12 * 100.0);
        prop_assert!(g.det() < 0.0);
    }
}

#[test]
fn flat_normal_golden_value() {
    let flat = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let g = PointGeometry::new(&flat).unwrap();
    let brute = xi_by_permutation_sum(&g);
    for (a, e) in [1.0, 0.0, 0.0, 0.0].into_iter().enumerate() {
        assert!((brute[a] - e).abs() < 1e-15);
        assert_eq!(g.xi[a], e);
    }
}

#[test]
fn tegr_density_hand_cases() {
    let f = FullCotetradAtPoint::identity();
    let mut d = [0; 4].map(|_| KForm::zero(4, 2));
    // d theta^1 = dt ^ dx^1: every product pairs with a vanishing partner
    d[1] = KForm::basis(4, &[0, 1]);
    assert_eq!(tp::tegr_density(&d, &f).unwrap().max_abs(), 0.0);
    // d theta^1 = dx^2 ^ dx^3: only (d theta^1 ^ theta_1) = dx^123 survives,
    // giving -1/2 + 1/4 of the volume form
    d[1] = KForm::basis(4, &[2, 3]);
    let t = tp::tegr_density(&d, &f).unwrap();
    assert!((t.get(&[0, 1, 2, 3]) + 0.25).abs() < 1e-15, "{t:?}");
}
