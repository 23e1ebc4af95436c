//! Shared proptest strategies for pointwise inputs.
#![allow(dead_code)]

use proptest::prelude::*;
use teleham_core::exterior::{KForm, MetricAtPoint, Signature, VectorAtPoint};
use teleham_core::linalg::{self, Mat4};
use teleham_core::teleparallel::Legs;

pub fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

pub fn kform(n: usize, k: usize) -> impl Strategy<Value = KForm> {
    values(binom(n, k)).prop_map(move |v| KForm::from_strict(n, k, &v))
}

pub fn vector(n: usize) -> impl Strategy<Value = VectorAtPoint> {
    values(n).prop_map(|v| VectorAtPoint::new(&v))
}

/// `g = Lᵀ diag(-1 x m, 1 x (n-m)) L` with `L` near the identity.
pub fn metric(n: usize, m: usize) -> impl Strategy<Value = MetricAtPoint> {
    (values(n * n), prop::bool::ANY).prop_map(move |(r, flip)| {
        let mut l: Mat4 = linalg::identity(n);
        for i in 0..n {
            for j in 0..n {
                l[i][j] += 0.3 * r[n * i + j];
            }
        }
        let mut g = linalg::ZERO4;
        for a in 0..n {
            for b in 0..n {
                g[a][b] = (0..n).map(|c| l[c][a] * l[c][b] * if c < m { -1.0 } else { 1.0 }).sum();
            }
        }
        let orientation = if flip { -1.0 } else { 1.0 };
        MetricAtPoint::new(g, Signature::new(n, m).unwrap(), orientation).unwrap()
    })
}

/// Near-flat spatial cotetrad legs with perturbations bounded by 0.2.
pub fn legs() -> impl Strategy<Value = Legs> {
    values(12).prop_map(|r| {
        let mut t = [[0.0; 3]; 4];
        for a in 0..4 {
            for i in 0..3 {
                t[a][i] = 0.2 * r[3 * a + i] + if a > 0 && a - 1 == i { 1.0 } else { 0.0 };
            }
        }
        t
    })
}
