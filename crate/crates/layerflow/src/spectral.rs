//! One-dimensional tools on the unit interval: Chebyshev–Gauss–Lobatto
//! nodes, collocation differentiation, Clenshaw–Curtis and Gauss–Legendre
//! quadrature, and the Legendre–Dirichlet ("Shen") basis in which the
//! Helmholtz operators are banded.
//!
//! Nodal values live on the CGL grid; all integrals of products are taken on
//! a Gauss–Legendre grid fine enough to be exact for cubic products of
//! degree-(N-1) polynomials.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// CGL nodes on [0, 1], increasing, `z_j = sin^2(pi j / (2(n-1)))`.
pub fn cgl_nodes(n: usize) -> Vec<f64> {
    let h = PI / (2.0 * (n - 1) as f64);
    (0..n).map(|j| (h * j as f64).sin().powi(2)).collect()
}

/// Barycentric weights for the CGL nodes.
pub fn cgl_bary_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Collocation differentiation matrix on the CGL nodes of [0, 1].
pub fn cheb_diff_matrix(n: usize) -> DMatrix<f64> {
    let w = cgl_bary_weights(n);
    let th = |j: usize| PI * j as f64 / (n - 1) as f64;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            // z_i - z_j without cancellation
            let dz = ((th(i) + th(j)) / 2.0).sin() * ((th(i) - th(j)) / 2.0).sin();
            let v = (w[j] / w[i]) / dz;
            d[(i, j)] = v;
            diag -= v;
        }
        d[(i, i)] = diag;
    }
    d
}

/// Clenshaw–Curtis weights on the CGL nodes of [0, 1].
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    let nn = n - 1;
    let mut w = vec![0.0; n];
    let theta: Vec<f64> = (0..n).map(|j| PI * j as f64 / nn as f64).collect();
    if nn % 2 == 0 {
        let c = 1.0 / ((nn * nn) as f64 - 1.0);
        w[0] = c;
        w[nn] = c;
        for j in 1..nn {
            let mut v = 1.0;
            for k in 1..nn / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nn as f64 * theta[j]).cos() / ((nn * nn) as f64 - 1.0);
            w[j] = 2.0 * v / nn as f64;
        }
    } else {
        let c = 1.0 / (nn * nn) as f64;
        w[0] = c;
        w[nn] = c;
        for j in 1..nn {
            let mut v = 1.0;
            for k in 1..=(nn - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            w[j] = 2.0 * v / nn as f64;
        }
    }
    // map [-1, 1] -> [0, 1]
    w.iter_mut().for_each(|x| *x *= 0.5);
    w
}

/// Gauss–Legendre nodes and weights on [0, 1], increasing.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(q, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(q, t);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - t * t) * dp * dp);
        // t is descending in i; store ascending on [0,1]
        x[i] = 0.5 * (1.0 - t);
        x[q - 1 - i] = 0.5 * (1.0 + t);
        w[i] = 0.5 * wt;
        w[q - 1 - i] = 0.5 * wt;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * t * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Values `L_l(2z - 1)` for `l = 0..count` at every point, as a
/// `points.len() x count` matrix.
pub fn legendre_table(points: &[f64], count: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(points.len(), count);
    for (r, &z) in points.iter().enumerate() {
        let t = 2.0 * z - 1.0;
        let mut p0 = 1.0;
        let mut p1 = t;
        for l in 0..count {
            let v = match l {
                0 => 1.0,
                1 => t,
                _ => {
                    let p2 = ((2 * l - 1) as f64 * t * p1 - (l - 1) as f64 * p0) / l as f64;
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
            m[(r, l)] = v;
        }
    }
    m
}

/// Barycentric interpolation matrix from CGL nodal values to `points`.
pub fn interp_matrix(nodes: &[f64], points: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let w = cgl_bary_weights(n);
    let mut p = DMatrix::zeros(points.len(), n);
    for (r, &y) in points.iter().enumerate() {
        if let Some(j) = nodes.iter().position(|&z| (y - z).abs() < 1e-15) {
            p[(r, j)] = 1.0;
            continue;
        }
        let terms: Vec<f64> = (0..n).map(|j| w[j] / (y - nodes[j])).collect();
        let s: f64 = terms.iter().sum();
        for j in 0..n {
            p[(r, j)] = terms[j] / s;
        }
    }
    p
}

/// Shen basis `phi_i = L_i - L_{i+2}` (in `2z-1`), `i = 0..n-2`, at points.
/// Returns values and z-derivatives.
pub fn shen_tables(points: &[f64], n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let leg = legendre_table(points, n);
    let m = n - 2;
    let mut v = DMatrix::zeros(points.len(), m);
    let mut d = DMatrix::zeros(points.len(), m);
    for r in 0..points.len() {
        for i in 0..m {
            v[(r, i)] = leg[(r, i)] - leg[(r, i + 2)];
            d[(r, i)] = -2.0 * (2 * i + 3) as f64 * leg[(r, i + 1)];
        }
    }
    (v, d)
}

/// Diagonal of the Shen stiffness matrix on [0, 1].
pub fn shen_stiffness(i: usize) -> f64 {
    4.0 * (2 * i + 3) as f64
}

/// Shen mass matrix entries on [0, 1]: (diagonal, offset-2 band).
pub fn shen_mass(i: usize) -> (f64, f64) {
    let a = 1.0 / (2 * i + 1) as f64 + 1.0 / (2 * i + 5) as f64;
    let b = -1.0 / (2 * i + 5) as f64;
    (a, b)
}

/// Solve `(S + k2 M) c = rhs` in place in the Shen basis. The operator
/// splits into two symmetric positive definite tridiagonal chains.
pub fn helmholtz_solve(k2: f64, rhs: &mut [Complex64]) {
    shen_solve(1.0, k2, rhs);
}

/// Solve `M c = rhs` in place in the Shen basis.
pub fn mass_solve(rhs: &mut [Complex64]) {
    shen_solve(0.0, 1.0, rhs);
}

fn shen_solve(s: f64, k2: f64, rhs: &mut [Complex64]) {
    let m = rhs.len();
    let mut diag = vec![0.0; m.div_ceil(2)];
    let mut off = vec![0.0; m.div_ceil(2)];
    let mut buf = vec![Complex64::new(0.0, 0.0); m.div_ceil(2)];
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..m).step_by(2).collect();
        let len = idx.len();
        if len == 0 {
            continue;
        }
        for (a, &i) in idx.iter().enumerate() {
            let (md, mo) = shen_mass(i);
            diag[a] = s * shen_stiffness(i) + k2 * md;
            off[a] = k2 * mo;
            buf[a] = rhs[i];
        }
        // Thomas elimination; off[a] couples a and a+1
        for a in 1..len {
            let f = off[a - 1] / diag[a - 1];
            diag[a] -= f * off[a - 1];
            let prev = buf[a - 1];
            buf[a] -= prev * f;
        }
        buf[len - 1] /= diag[len - 1];
        for a in (0..len - 1).rev() {
            let next = buf[a + 1];
            buf[a] = (buf[a] - next * off[a]) / diag[a];
        }
        for (a, &i) in idx.iter().enumerate() {
            rhs[i] = buf[a];
        }
    }
}

/// Apply `(S + k2 M)` in the Shen basis.
pub fn helmholtz_apply(k2: f64, x: &[Complex64], out: &mut [Complex64]) {
    let m = x.len();
    for i in 0..m {
        let (md, _) = shen_mass(i);
        let mut v = x[i] * (shen_stiffness(i) + k2 * md);
        if i + 2 < m {
            v += x[i + 2] * (k2 * shen_mass(i).1);
        }
        if i >= 2 {
            v += x[i - 2] * (k2 * shen_mass(i - 2).1);
        }
        out[i] = v;
    }
}

/// Real matrix times complex matrix.
pub fn rc_mul(a: &DMatrix<f64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let p = a * split(b);
    join(&p, b.ncols())
}

// [re | im] side by side, so one product handles both parts
fn split(b: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = b.shape();
    let mut s = DMatrix::zeros(r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            s[(i, j)] = b[(i, j)].re;
            s[(i, c + j)] = b[(i, j)].im;
        }
    }
    s
}

fn join(p: &DMatrix<f64>, c: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(p.nrows(), c, |i, j| Complex64::new(p[(i, j)], p[(i, c + j)]))
}

/// Transposed real matrix times complex matrix.
pub fn rc_tr_mul(a: &DMatrix<f64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let p = a.tr_mul(&split(b));
    join(&p, b.ncols())
}

/// A `Q x n` table on points symmetric about `1/2` whose column `i` has
/// parity `sign_even * (-1)^i` under `z -> 1 - z`, split so products touch
/// only half the rows and half the columns at a time.
pub struct ParityTable {
    even: DMatrix<f64>,
    odd: DMatrix<f64>,
    q: usize,
    n: usize,
    sign_even: f64,
}

impl ParityTable {
    pub fn new(t: &DMatrix<f64>, sign_even: f64) -> Self {
        let (q, n) = t.shape();
        let qh = q.div_ceil(2);
        let pick = |par: usize| {
            let cols: Vec<usize> = (par..n).step_by(2).collect();
            DMatrix::from_fn(qh, cols.len(), |r, c| t[(r, cols[c])])
        };
        ParityTable {
            even: pick(0),
            odd: pick(1),
            q,
            n,
            sign_even,
        }
    }

    /// `T c` for `c` of shape `n x cols`.
    pub fn apply(&self, c: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let cols = c.ncols();
        let ce = DMatrix::from_fn(self.even.ncols(), cols, |r, j| c[(2 * r, j)]);
        let co = DMatrix::from_fn(self.odd.ncols(), cols, |r, j| c[(2 * r + 1, j)]);
        let a = rc_mul(&self.even, &ce);
        let b = rc_mul(&self.odd, &co);
        let mut out = DMatrix::from_element(self.q, cols, Complex64::new(0.0, 0.0));
        let s = self.sign_even;
        for j in 0..cols {
            for r in 0..a.nrows() {
                out[(r, j)] = a[(r, j)] + b[(r, j)];
                let m = self.q - 1 - r;
                if m != r {
                    out[(m, j)] = (a[(r, j)] - b[(r, j)]) * s;
                }
            }
        }
        out
    }

    /// `T^T g` for `g` of shape `Q x cols`.
    pub fn apply_tr(&self, g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let cols = g.ncols();
        let qh = self.even.nrows();
        let s = self.sign_even;
        let mut ge = DMatrix::from_element(qh, cols, Complex64::new(0.0, 0.0));
        let mut go = ge.clone();
        for j in 0..cols {
            for r in 0..qh {
                let m = self.q - 1 - r;
                if m != r {
                    ge[(r, j)] = g[(r, j)] + g[(m, j)] * s;
                    go[(r, j)] = g[(r, j)] - g[(m, j)] * s;
                } else {
                    ge[(r, j)] = g[(r, j)];
                    go[(r, j)] = g[(r, j)];
                }
            }
        }
        let a = rc_tr_mul(&self.even, &ge);
        let b = rc_tr_mul(&self.odd, &go);
        let mut out = DMatrix::from_element(self.n, cols, Complex64::new(0.0, 0.0));
        for j in 0..cols {
            for r in 0..a.nrows() {
                out[(2 * r, j)] = a[(r, j)];
            }
            for r in 0..b.nrows() {
                out[(2 * r + 1, j)] = b[(r, j)];
            }
        }
        out
    }
}
