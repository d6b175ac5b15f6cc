//! Inverse Dirichlet Laplacian, the advection term
//! `avg |grad Lap^{-1} div(u xi)|^2`, its mode-by-mode decomposition, and
//! the Green's kernels `G_k` used as an independent cross-check.

use crate::error::{invalid, Result};
use crate::fields::{DomainSpec, SpectralField, VelocityField, C64, ZERO};
use crate::spectral;
use nalgebra::DMatrix;
use serde::Serialize;

/// Velocity sampled on the physical product grid at the Gauss points,
/// ready to form `u . grad f` for many `f`.
pub struct Advector {
    domain: DomainSpec,
    ux: Vec<f64>,
    w: Vec<f64>,
}

impl Advector {
    pub fn new(u: &VelocityField) -> Self {
        let d = u.domain().clone();
        let ux = d.to_physical(&u.u_x.at_gauss());
        let w = d.to_physical(&u.u_z.at_gauss());
        Advector { domain: d, ux, w }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Modes of `u . grad f` at the Gauss points, from Gauss values of `f`
    /// and `f_z`.
    pub(crate) fn flux_gauss(&self, f: &DMatrix<C64>, fz: &DMatrix<C64>) -> DMatrix<C64> {
        let d = &self.domain;
        let cols = |a: &DMatrix<C64>| a.columns(d.m, d.m + 1).clone_owned();
        d.from_half(&self.flux_gauss_half(&cols(f), &cols(fz)))
    }

    /// As [`Self::flux_gauss`] on the modes `m >= 0` only.
    fn flux_gauss_half(&self, f: &DMatrix<C64>, fz: &DMatrix<C64>) -> DMatrix<C64> {
        let d = &self.domain;
        let mut fx = f.clone();
        for m in 0..=d.m {
            let ik = C64::new(0.0, d.wavenumber(d.col(m as i64)));
            fx.column_mut(m).iter_mut().for_each(|v| *v *= ik);
        }
        let px = d.to_physical_half(&fx);
        let pz = d.to_physical_half(fz);
        let prod: Vec<f64> = (0..px.len())
            .map(|i| self.ux[i] * px[i] + self.w[i] * pz[i])
            .collect();
        d.to_modal_half(&prod, f.nrows())
    }

    /// Shen loads of `u . grad f` for `f` given by Shen coefficients.
    pub(crate) fn apply_shen(&self, c: &DMatrix<C64>) -> DMatrix<C64> {
        let d = &self.domain;
        let (g, gz) = d.shen_to_gauss(&c.columns(d.m, d.m + 1).clone_owned());
        d.from_half(&d.gauss_to_loads(&self.flux_gauss_half(&g, &gz)))
    }

    /// Shen loads of `u . grad f` for a nodal field (any wall values).
    pub(crate) fn apply_field(&self, f: &SpectralField) -> DMatrix<C64> {
        self.domain
            .gauss_to_loads(&self.flux_gauss(&f.at_gauss(), &f.dz_at_gauss()))
    }
}

/// Per-mode `b^H (S + k^2 M)^{-1} b` for a matrix of Shen loads.
pub(crate) fn dual_norms(d: &DomainSpec, loads: &DMatrix<C64>) -> Vec<f64> {
    let mut sol = loads.clone();
    d.helmholtz_solve_all(&mut sol);
    (0..d.n_modes())
        .map(|i| {
            loads
                .column(i)
                .iter()
                .zip(sol.column(i).iter())
                .map(|(b, g)| (b.conj() * g).re)
                .sum()
        })
        .collect()
}

/// `Lap^{-1} f` with homogeneous Dirichlet data, mode by mode.
pub fn inverse_laplacian(f: &SpectralField) -> SpectralField {
    let d = &f.domain;
    let mut loads = d.gauss_to_loads(&f.at_gauss());
    loads.iter_mut().for_each(|v| *v = -*v);
    d.helmholtz_solve_all(&mut loads);
    SpectralField::from_shen(d, &loads)
}

/// `avg |grad Lap^{-1} div(u xi)|^2`.
pub fn advection_term(u: &VelocityField, xi: &SpectralField) -> f64 {
    advection_term_with(&Advector::new(u), xi)
}

pub fn advection_term_with(adv: &Advector, xi: &SpectralField) -> f64 {
    let loads = adv.apply_field(xi);
    pairwise_sum(&dual_norms(adv.domain(), &loads))
}

/// Fixed-order pairwise summation.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QTerm {
    pub mode: i64,
    pub wavenumber: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelDecomposition {
    /// `int (bar(w xi) - avg(w xi))^2 dz`, projected onto the discrete space
    pub k0_term: f64,
    /// `Q_k` for every nonzero lattice wavenumber (both signs)
    pub q_terms: Vec<QTerm>,
    pub total: f64,
    /// `avg(w xi)`
    pub net_flux: f64,
}

impl KernelDecomposition {
    pub fn q_sum(&self) -> f64 {
        pairwise_sum(&self.q_terms.iter().map(|q| q.value).collect::<Vec<_>>())
    }

    pub fn q_at(&self, mode: i64) -> f64 {
        self.q_terms
            .iter()
            .find(|q| q.mode == mode)
            .map(|q| q.value)
            .unwrap_or(0.0)
    }
}

/// Split the advection term into the flux-deficit part and the positive
/// forms `Q_k`. The `k = 0` part is computed from the Legendre expansion
/// of `bar(w xi)` rather than from the Helmholtz solve.
pub fn mode_decomposition(u: &VelocityField, xi: &SpectralField) -> KernelDecomposition {
    mode_decomposition_with(&Advector::new(u), u, xi)
}

pub fn mode_decomposition_with(
    adv: &Advector,
    u: &VelocityField,
    xi: &SpectralField,
) -> KernelDecomposition {
    let d = adv.domain();
    let loads = adv.apply_field(xi);
    let q = dual_norms(d, &loads);
    let q_terms: Vec<QTerm> = (0..d.n_modes())
        .filter(|&i| d.mode(i) != 0)
        .map(|i| QTerm {
            mode: d.mode(i),
            wavenumber: d.wavenumber(i),
            value: q[i],
        })
        .collect();
    let (k0_term, net_flux) = flux_deficit_projected(u.w(), xi);
    let qs: Vec<f64> = q_terms.iter().map(|t| t.value).collect();
    KernelDecomposition {
        k0_term,
        total: k0_term + pairwise_sum(&qs),
        q_terms,
        net_flux,
    }
}

/// `(|| P(h) - mean h ||^2, mean h)` for `h = bar(w xi)`, where `P` is the
/// L2 projection onto polynomials of degree `N_z - 2`.
pub fn flux_deficit_projected(w: &SpectralField, xi: &SpectralField) -> (f64, f64) {
    let d = &w.domain;
    let h = w.horizontal_mean_product_gauss(xi);
    let (_, gw) = d.gauss_points();
    let leg = &d.z.legendre_g;
    let mut coef = vec![0.0; d.n_z - 1];
    for (l, c) in coef.iter_mut().enumerate() {
        let s: f64 = (0..h.len()).map(|q| gw[q] * h[q] * leg[(q, l)]).sum();
        *c = (2 * l + 1) as f64 * s;
    }
    let k0: f64 = (1..d.n_z - 1).map(|l| coef[l] * coef[l] / (2 * l + 1) as f64).sum();
    (k0, coef[0])
}

/// `int (bar(w xi) - avg(w xi))^2 dz` without projection.
pub fn flux_deficit_exact(w: &SpectralField, xi: &SpectralField) -> f64 {
    let d = &w.domain;
    let h = w.horizontal_mean_product_gauss(xi);
    let (_, gw) = d.gauss_points();
    let mean: f64 = h.iter().zip(gw).map(|(a, b)| a * b).sum();
    h.iter().zip(gw).map(|(a, b)| b * (a - mean).powi(2)).sum()
}

/// Dirichlet Green's function of `-d^2/dz^2 + k^2` on [0, 1].
pub fn green_kernel(k: f64, z: f64, zp: f64) -> f64 {
    let k = k.abs();
    let (lo, hi) = if z <= zp { (z, zp) } else { (zp, z) };
    if k == 0.0 {
        return lo * (1.0 - hi);
    }
    if k > 30.0 {
        let num = (-k * (hi - lo)).exp() * (-(-2.0 * k * lo).exp_m1()) * (-(-2.0 * k * (1.0 - hi)).exp_m1());
        return num / (2.0 * k * (-(-2.0 * k).exp_m1()));
    }
    (k * lo).sinh() * (k * (1.0 - hi)).sinh() / (k * k.sinh())
}

fn composite_gauss(a: f64, b: f64, h: f64, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let panels = ((b - a) / h).ceil().max(1.0) as usize;
    let len = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.0.len());
    for p in 0..panels {
        let s = a + p as f64 * len;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            out.push((s + x * len, w * len));
        }
    }
    out
}

/// `int_A int_B G_k(z, z') f(z) g(z') dz' dz` by nested composite Gauss
/// quadrature, splitting the inner integral at the kink `z' = z`.
pub fn kernel_double_integral(
    k: f64,
    outer: &[(f64, f64)],
    inner: &[(f64, f64)],
    f: &dyn Fn(f64) -> C64,
    g: &dyn Fn(f64) -> C64,
) -> C64 {
    let rule = spectral::gauss_legendre(12);
    let h = if k.abs() > 1.0 { (1.0 / k.abs()).min(0.05) } else { 0.05 };
    let mut total = ZERO;
    for &(a, b) in outer {
        for (z, wz) in composite_gauss(a, b, h, &rule) {
            let mut inner_sum = ZERO;
            for &(c, e) in inner {
                let pieces = [(c, e.min(z)), (c.max(z), e)];
                for (lo, hi) in pieces {
                    for (zp, wp) in composite_gauss(lo, hi, h, &rule) {
                        inner_sum += g(zp) * (wp * green_kernel(k, z, zp));
                    }
                }
            }
            total += f(z).conj() * inner_sum * wz;
        }
    }
    total
}

/// `Q_k` for a profile `J_k` by direct quadrature of the kernel.
pub fn kernel_quadratic_form(k: f64, j: &dyn Fn(f64) -> C64) -> f64 {
    kernel_double_integral(k, &[(0.0, 1.0)], &[(0.0, 1.0)], j, j).re
}

/// Finite union of closed subintervals of [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(mut iv: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &iv {
            if !(0.0 <= a && a <= b && b <= 1.0) {
                return invalid(format!("interval [{a}, {b}] is not inside [0, 1]"));
            }
        }
        iv.retain(|(a, b)| b > a);
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(IntervalSet { intervals: merged })
    }

    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// `(||G_k||_{L1(A x A)}, rhs)` with constant 2 on the right:
/// `2 (|A|/|k|) min(|A|, 1/|k|)` for `k != 0`, `2 |A| int_A z(1-z)` for `k = 0`.
pub fn kernel_l1_bound_check(k: f64, a: &IntervalSet) -> (f64, f64) {
    let m = a.measure();
    if m == 0.0 {
        return (0.0, 0.0);
    }
    let one = |_: f64| C64::new(1.0, 0.0);
    let lhs = kernel_double_integral(k, a.intervals(), a.intervals(), &one, &one).re;
    let rhs = if k == 0.0 {
        let prim = |z: f64| z * z / 2.0 - z * z * z / 3.0;
        2.0 * m * a.intervals().iter().map(|&(s, e)| prim(e) - prim(s)).sum::<f64>()
    } else {
        let ka = k.abs();
        2.0 * (m / ka) * m.min(1.0 / ka)
    };
    (lhs, rhs)
}

/// Modes of `u . grad xi` at arbitrary heights (points x modes).
pub fn flux_modes_at(u: &VelocityField, xi: &SpectralField, zs: &[f64]) -> DMatrix<C64> {
    let d = u.domain();
    let mut xx = xi.modes_at(zs);
    for i in 0..d.n_modes() {
        let ik = C64::new(0.0, d.wavenumber(i));
        xx.column_mut(i).iter_mut().for_each(|v| *v *= ik);
    }
    let xz = xi.dz().modes_at(zs);
    let pu = d.to_physical(&u.u_x.modes_at(zs));
    let pw = d.to_physical(&u.u_z.modes_at(zs));
    let px = d.to_physical(&xx);
    let pz = d.to_physical(&xz);
    let prod: Vec<f64> = (0..pu.len()).map(|i| pu[i] * px[i] + pw[i] * pz[i]).collect();
    d.to_modal(&prod, zs.len())
}

/// Polynomial interpolant of each mode of `u . grad xi`, exact because the
/// product has degree below `2 N_z`.
pub struct FluxInterpolant {
    nodes: Vec<f64>,
    values: DMatrix<C64>,
    domain: DomainSpec,
}

impl FluxInterpolant {
    pub fn new(u: &VelocityField, xi: &SpectralField) -> Self {
        let n2 = 2 * u.domain().n_z + 1;
        let nodes = spectral::cgl_nodes(n2);
        let values = flux_modes_at(u, xi, &nodes);
        FluxInterpolant {
            nodes,
            values,
            domain: u.domain().clone(),
        }
    }

    pub fn eval(&self, mode: i64, z: f64) -> C64 {
        let p = spectral::interp_matrix(&self.nodes, &[z]);
        let c = self.domain.col(mode);
        (0..self.nodes.len()).map(|j| self.values[(j, c)] * p[(0, j)]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_domain, random_streamfunction, streamfunction_to_velocity};
    use rand::SeedableRng;
    use std::f64::consts::PI;

    #[test]
    fn eigenfunction_inverse() {
        let lx = 2.0 * PI;
        let d = build_domain(lx, 2, 33).unwrap();
        let f0 = SpectralField::from_fn(&d, |_, z| (PI * z).sin());
        let g0 = inverse_laplacian(&f0);
        let f1 = SpectralField::from_fn(&d, |x, z| (PI * z).sin() * x.cos());
        let g1 = inverse_laplacian(&f1);
        for &z in &[0.1, 0.37, 0.8] {
            let e0 = -(PI * z).sin() / (PI * PI);
            assert!((g0.eval(0.4, z) - e0).abs() < 1e-12);
            let e1 = -(PI * z).sin() / (PI * PI + 1.0) * (0.4f64).cos();
            assert!((g1.eval(0.4, z) - e1).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_laplacian_of_polynomial_is_exact() {
        let d = build_domain(1.3, 3, 16).unwrap();
        let k = 2.0 * PI / 1.3;
        let g = SpectralField::from_fn(&d, |x, z| z * (1.0 - z) * (z * z + 0.3) * (1.0 + (k * x).cos() + (2.0 * k * x).sin()));
        let lap = g.dz().dz().add(&g.dx().dx());
        let back = inverse_laplacian(&lap);
        assert!((&back.coeffs - &g.coeffs).camax() < 1e-11);
    }

    #[test]
    fn kernel_matches_inverse_laplacian() {
        let d = build_domain(2.0, 2, 24).unwrap();
        let f = SpectralField::from_fn(&d, |x, z| (3.0 * z).exp() * (1.0 + (PI * x).cos()) - z * z);
        let g = inverse_laplacian(&f);
        for m in [0i64, 1] {
            let k = PI * m as f64;
            let prof = |zp: f64| f.modes_at(&[zp])[(0, d.col(m))];
            for &z in &[0.2, 0.5, 0.9] {
                let rule = spectral::gauss_legendre(12);
                let mut s = ZERO;
                for piece in [(0.0, z), (z, 1.0)] {
                    for (zp, w) in composite_gauss(piece.0, piece.1, 0.02, &rule) {
                        s += prof(zp) * (w * green_kernel(k, z, zp));
                    }
                }
                let got = g.modes_at(&[z])[(0, d.col(m))];
                assert!((got + s).norm() < 1e-8, "m={m} z={z}");
            }
        }
    }

    #[test]
    fn green_kernel_forms_agree_and_are_symmetric() {
        for &k in &[0.0, 1.0, 7.5, 29.0] {
            for &(a, b) in &[(0.1, 0.3), (0.7, 0.2), (0.5, 0.5)] {
                assert!((green_kernel(k, a, b) - green_kernel(k, b, a)).abs() < 1e-15);
                if k > 0.0 {
                    assert!(green_kernel(k, a, b) <= (-k * (a - b as f64).abs()).exp() / k + 1e-15);
                }
            }
        }
        // log-space branch continuous with the direct form
        let direct = |k: f64, z: f64, zp: f64| {
            let (lo, hi) = (z.min(zp), z.max(zp));
            (k * lo).sinh() * (k * (1.0 - hi)).sinh() / (k * k.sinh())
        };
        let k = 30.5;
        assert!((green_kernel(k, 0.4, 0.45) - direct(k, 0.4, 0.45)).abs() < 1e-14);
    }

    #[test]
    fn decomposition_identity_on_random_pair() {
        let d = build_domain(2.0 * PI, 4, 24).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u = streamfunction_to_velocity(&random_streamfunction(&d, &mut rng, 5).scaled(10.0));
        let xi = random_streamfunction(&d, &mut rng, 5);
        let a = advection_term(&u, &xi);
        let dec = mode_decomposition(&u, &xi);
        assert!((a - dec.total).abs() <= 1e-10 * a);
        assert!(dec.q_terms.iter().all(|q| q.value >= -1e-12));
        assert!(a >= dec.k0_term);
    }

    #[test]
    fn advection_term_below_projection_bound() {
        let d = build_domain(2.0, 3, 20).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = streamfunction_to_velocity(&random_streamfunction(&d, &mut rng, 4));
        let xi = random_streamfunction(&d, &mut rng, 4).scaled(50.0);
        let a = advection_term(&u, &xi);
        let (gz, gw) = spectral::gauss_legendre(60);
        let nx = 64;
        for c in [0.0, 0.3, -1.0] {
            let mut bound = 0.0;
            for (z, wz) in gz.iter().zip(&gw) {
                for i in 0..nx {
                    let x = 2.0 * i as f64 / nx as f64;
                    let s = xi.eval(x, *z) - c;
                    bound += wz / nx as f64 * s * s * (u.u_x.eval(x, *z).powi(2) + u.u_z.eval(x, *z).powi(2));
                }
            }
            assert!(a <= bound * (1.0 + 1e-9), "{a} > {bound}");
        }
    }

    #[test]
    fn kernel_quadrature_matches_helmholtz_q() {
        let d = build_domain(2.0 * PI, 2, 16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let u = streamfunction_to_velocity(&random_streamfunction(&d, &mut rng, 3));
        let xi = random_streamfunction(&d, &mut rng, 3);
        let dec = mode_decomposition(&u, &xi);
        let interp = FluxInterpolant::new(&u, &xi);
        for m in [1i64, 2] {
            let q = kernel_quadratic_form(m as f64, &|z| interp.eval(m, z));
            let h = dec.q_at(m);
            assert!((q - h).abs() <= 1e-6 * h.abs().max(1e-300), "m={m}: {q} vs {h}");
        }
    }

    #[test]
    fn l1_bounds() {
        let (l, r) = kernel_l1_bound_check(2.0 * PI, &IntervalSet::new(vec![(0.0, 1.0)]).unwrap());
        assert!(l <= r && l > 0.0);
        assert_eq!(kernel_l1_bound_check(3.0, &IntervalSet::empty()), (0.0, 0.0));
        let (l, r) = kernel_l1_bound_check(0.0, &IntervalSet::new(vec![(0.4, 0.6)]).unwrap());
        assert!(l <= r && l > 0.0);
    }
}
