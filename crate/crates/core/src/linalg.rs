//! Small dense matrices (n <= 4) on the stack.

pub type Mat4 = [[f64; 4]; 4];

pub const ZERO4: Mat4 = [[0.0; 4]; 4];

pub fn identity(n: usize) -> Mat4 {
    let mut m = ZERO4;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

#[derive(Clone, Copy, Debug)]
pub struct Lu {
    pub inverse: Mat4,
    pub det: f64,
    /// Infinity-norm condition number estimate `|A| |A^-1|`.
    pub condition: f64,
}

/// Gauss-Jordan inversion with partial pivoting of the leading `n x n` block.
///
/// Returns `None` when a pivot vanishes exactly.
pub fn invert(a: &Mat4, n: usize) -> Option<Lu> {
    let mut m = *a;
    let mut inv = identity(n);
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col] == 0.0 {
            return None;
        }
        if piv != col {
            m.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        let ip = 1.0 / p;
        for j in 0..n {
            m[col][j] *= ip;
            inv[col][j] *= ip;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r][j] -= f * m[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    let condition = norm_inf(a, n) * norm_inf(&inv, n);
    Some(Lu {
        inverse: inv,
        det,
        condition,
    })
}

pub fn norm_inf(a: &Mat4, n: usize) -> f64 {
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn det(a: &Mat4, n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        3 => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        _ => invert(a, n).map(|lu| lu.det).unwrap_or(0.0),
    }
}

pub fn mul(a: &Mat4, b: &Mat4, n: usize) -> Mat4 {
    let mut c = ZERO4;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Mat4) -> Mat4 {
    let mut t = ZERO4;
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = a[j][i];
        }
    }
    t
}
