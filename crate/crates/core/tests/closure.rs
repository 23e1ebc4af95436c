//! Refinement study of the constraint algebra closures on 8³ and 16³.

use teleham_core::dynamics::{self, ClosureResiduals, PhaseState};
use teleham_core::fields::{self, FormField, PeriodicGrid, VectorFieldOnGrid};

fn case(n: usize) -> ClosureResiduals {
    let grid = PeriodicGrid::cube(n);
    let s = PhaseState::random(grid, 0.3, 1, 7).unwrap();
    let tau = std::f64::consts::TAU;
    let m = FormField::scalar_fn(grid, move |x| 1.0 + 0.5 * (tau * x[0]).cos());
    let m2 = FormField::scalar_fn(grid, move |x| (tau * (x[1] + x[2])).sin());
    let v = VectorFieldOnGrid::from_fn(grid, move |x| [(tau * x[0]).cos(), 0.3, (tau * x[1]).sin()]);
    let v2 = VectorFieldOnGrid::from_fn(grid, move |x| [0.2 * (tau * x[2]).sin(), (tau * x[0]).cos(), 0.0]);
    dynamics::bracket_closure(&s, &m, &m2, &v, &v2).unwrap()
}

#[test]
fn closures_converge() {
    let (a, b) = (case(8), case(16));
    println!("8: {a:?}\n16: {b:?}");
    let o = |x: f64, y: f64| fields::convergence_order(x.abs(), y.abs(), 2.0);
    for (name, x, y) in [("r1", a.r1, b.r1), ("r2", a.r2, b.r2), ("r3", a.r3, b.r3)] {
        println!("{name} order {:.2}", o(x, y));
        assert!(o(x, y) >= 1.8, "{name}");
    }
    // the brackets themselves do not vanish
    assert!(b.vv.abs() > 1e-3 && b.ss.abs() > 1e-3 && b.sv.abs() > 1e-3);
    // raising with the identity instead of q⁻¹ leaves an O(1) mismatch
    let frozen = o(a.r2_frozen, b.r2_frozen);
    println!("frozen order {frozen:.2}");
    assert!(frozen < 1.0);
    assert!(b.r2_frozen.abs() > 10.0 * b.r2.abs());
}
