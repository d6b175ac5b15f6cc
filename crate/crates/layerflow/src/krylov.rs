//! Restarted GMRES and preconditioned CG on complex vectors. GMRES works
//! in the inner product `<x, y> = x^H G y` for a caller-supplied Hermitian
//! positive definite `G`.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// final relative (preconditioned) residual
    pub residual: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Left-preconditioned restarted GMRES for `P A x = P b`, minimising the
/// residual in the `G`-norm.
pub fn gmres<A, P, G>(a: A, p: P, g: G, b: &[C64], x0: Option<Vec<C64>>, cfg: KrylovConfig) -> KrylovResult
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
    G: Fn(&[C64]) -> Vec<C64>,
{
    let n = b.len();
    let norm = |v: &[C64]| cdot(v, &g(v)).re.max(0.0).sqrt();
    let pb = p(b);
    let bnorm = norm(&pb);
    let mut x = x0.unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return KrylovResult {
            x: vec![C64::new(0.0, 0.0); n],
            iterations: 0,
            residual: 0.0,
            converged: true,
            history,
        };
    }
    let mut total = 0;
    let restart = cfg.restart.max(1);
    loop {
        let ax = a(&x);
        let r0: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let r = p(&r0);
        let beta = norm(&r);
        let rel = beta / bnorm;
        history.push(rel);
        if rel <= cfg.tol || total >= cfg.max_iter {
            return KrylovResult {
                x,
                iterations: total,
                residual: rel,
                converged: rel <= cfg.tol,
                history,
            };
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut gv: Vec<Vec<C64>> = vec![g(&v[0])];
        let mut h: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<C64> = Vec::new();
        let mut sn: Vec<C64> = Vec::new();
        let mut rhs = vec![C64::new(beta, 0.0)];
        let mut steps = 0;
        for j in 0..restart {
            let mut w = p(&a(&v[j]));
            let mut hj = vec![C64::new(0.0, 0.0); j + 2];
            // modified Gram–Schmidt, twice for stability
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = cdot(&gv[i], &w);
                    hj[i] += hij;
                    axpy(&mut w, -hij, vi);
                }
            }
            let wn = norm(&w);
            hj[j + 1] = C64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * hj[i] + sn[i].conj() * hj[i + 1];
                hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
                hj[i] = t;
            }
            let (c, s) = givens(hj[j], hj[j + 1]);
            hj[j] = c.conj() * hj[j] + s.conj() * hj[j + 1];
            hj[j + 1] = C64::new(0.0, 0.0);
            let gj = rhs[j];
            rhs[j] = c.conj() * gj;
            rhs.push(-s * gj);
            cs.push(c);
            sn.push(s);
            h.push(hj);
            steps += 1;
            total += 1;
            let res = rhs[j + 1].norm() / bnorm;
            history.push(res);
            if res <= cfg.tol || total >= cfg.max_iter || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|c| c / wn).collect());
            gv.push(g(&v[j + 1]));
        }
        // back substitution
        let mut y = vec![C64::new(0.0, 0.0); steps];
        for i in (0..steps).rev() {
            let mut s = rhs[i];
            for k in i + 1..steps {
                s -= h[k][i] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(&mut x, *yi, &v[i]);
        }
    }
}

fn givens(a: C64, b: C64) -> (C64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (C64::new(0.0, 0.0), b / bn);
    }
    let r = (an * an + bn * bn).sqrt();
    let c = a / r;
    let s = b / r;
    (c, s)
}

/// Preconditioned conjugate gradients for Hermitian positive definite `A`.
pub fn pcg<A, P>(a: A, p: P, b: &[C64], x0: Option<Vec<C64>>, tol: f64, max_iter: usize) -> KrylovResult
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
{
    let n = b.len();
    let dot = |u: &[C64], v: &[C64]| -> C64 { u.iter().zip(v).map(|(a, b)| a.conj() * b).sum() };
    let mut x = x0.unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
    let ax = a(&x);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let pb = p(b);
    let bnorm = dot(b, &pb).re.max(0.0).sqrt();
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return KrylovResult {
            x: vec![C64::new(0.0, 0.0); n],
            iterations: 0,
            residual: 0.0,
            converged: true,
            history,
        };
    }
    let mut z = p(&r);
    let mut d = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut it = 0;
    loop {
        let rel = rz.max(0.0).sqrt() / bnorm;
        history.push(rel);
        if rel <= tol || it >= max_iter {
            return KrylovResult {
                x,
                iterations: it,
                residual: rel,
                converged: rel <= tol,
                history,
            };
        }
        let ad = a(&d);
        let alpha = rz / dot(&d, &ad).re;
        axpy(&mut x, C64::new(alpha, 0.0), &d);
        axpy(&mut r, C64::new(-alpha, 0.0), &ad);
        z = p(&r);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + *di * beta;
        }
        it += 1;
    }
}
