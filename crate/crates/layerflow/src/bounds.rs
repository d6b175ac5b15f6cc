//! A priori upper bounds on `Nu`: the energy bound, the symmetrization
//! bound over z-profiles `eta`, the spectral constraint `M(eta)`, and
//! Howard's functional with its lower bound.

use crate::advection::flux_deficit_projected;
use crate::error::{invalid, Error, Result};
use crate::fields::{SpectralField, VelocityField, C64, ZERO};
use crate::spectral;
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Energy,
    Symmetrization,
    Howard,
}

/// Continuous piecewise-linear z-profile with `eta(0) = 1`, `eta(1) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaProfile {
    knots: Vec<(f64, f64)>,
}

impl EtaProfile {
    /// Knots `(z, eta)` with `z` strictly increasing from 0 to 1. Repeated
    /// heights would encode a jump, which is not in `H^1`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return invalid("a profile needs at least two knots");
        }
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        if first.0 != 0.0 || last.0 != 1.0 {
            return invalid("profile knots must start at z = 0 and end at z = 1");
        }
        if first.1 != 1.0 || last.1 != 0.0 {
            return invalid("profile must satisfy eta(0) = 1 and eta(1) = 0");
        }
        for p in knots.windows(2) {
            if !(p[1].0 > p[0].0) {
                return invalid(format!(
                    "knot heights must increase strictly ({} then {}); jumps are not allowed",
                    p[0].0, p[1].0
                ));
            }
            if !p[1].1.is_finite() {
                return invalid("profile values must be finite");
            }
        }
        Ok(EtaProfile { knots })
    }

    /// `1 - z`.
    pub fn conduction() -> Self {
        EtaProfile {
            knots: vec![(0.0, 1.0), (1.0, 0.0)],
        }
    }

    /// `eta_delta`: slope `-1/(2 delta)` in two wall layers, `1/2` between.
    pub fn layer(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return invalid(format!("delta must lie in (0, 1/2], got {delta}"));
        }
        if delta == 0.5 {
            return Ok(Self::conduction());
        }
        Ok(EtaProfile {
            knots: vec![(0.0, 1.0), (delta, 0.5), (1.0 - delta, 0.5), (1.0, 0.0)],
        })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn value(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        for p in self.knots.windows(2) {
            if z <= p[1].0 {
                let t = (z - p[0].0) / (p[1].0 - p[0].0);
                return p[0].1 + t * (p[1].1 - p[0].1);
            }
        }
        0.0
    }

    /// Segments `(a, b, slope)` with nonzero slope.
    pub fn sloped_segments(&self) -> Vec<(f64, f64, f64)> {
        self.knots
            .windows(2)
            .map(|p| (p[0].0, p[1].0, (p[1].1 - p[0].1) / (p[1].0 - p[0].0)))
            .filter(|s| s.2 != 0.0)
            .collect()
    }

    /// `int_0^1 |eta'|^2`.
    pub fn gradient_term(&self) -> f64 {
        self.sloped_segments().iter().map(|(a, b, s)| s * s * (b - a)).sum()
    }

    pub fn max_slope(&self) -> f64 {
        self.sloped_segments().iter().map(|s| s.2.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub kind: BoundKind,
    pub value: f64,
    pub profile: Option<EtaProfile>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
}

/// `1 + (avg w^2)^{1/2} / 2`.
pub fn energy_bound(u: &VelocityField) -> f64 {
    1.0 + 0.5 * u.w().mean_square().sqrt()
}

pub fn energy_certificate(u: &VelocityField) -> BoundCertificate {
    BoundCertificate {
        kind: BoundKind::Energy,
        value: energy_bound(u),
        profile: None,
        delta: None,
        lambda: None,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    /// Dirichlet test space size relative to `N_z`.
    pub enrich: f64,
    /// Log-spaced grid in `delta` before the golden-section refinement.
    pub grid_points: usize,
    pub delta_min: f64,
    pub refine_iters: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            enrich: 2.0,
            grid_points: 48,
            delta_min: 1e-6,
            refine_iters: 40,
        }
    }
}

/// The modes of `w` that are not identically zero, kept as nodal columns.
struct ActiveModes {
    nodes: Vec<f64>,
    cols: DMatrix<C64>,
    k2: Vec<f64>,
    /// 1 for `m = 0`, 2 otherwise (the conjugate mode contributes equally)
    weight: Vec<f64>,
}

impl ActiveModes {
    fn new(w: &SpectralField) -> Self {
        let d = &w.domain;
        let scale = w.coeffs.camax();
        let mut keep = Vec::new();
        for m in 0..=d.m {
            let c = d.col(m as i64);
            let mx = w.coeffs.column(c).iter().map(|v| v.norm()).fold(0.0, f64::max);
            if mx > 1e-14 * scale {
                keep.push(m);
            }
        }
        let mut cols = DMatrix::from_element(d.n_z, keep.len(), ZERO);
        for (a, &m) in keep.iter().enumerate() {
            cols.set_column(a, &w.coeffs.column(d.col(m as i64)));
        }
        let k2 = keep
            .iter()
            .map(|&m| d.wavenumber(d.col(m as i64)).powi(2))
            .collect();
        let weight = keep.iter().map(|&m| if m == 0 { 1.0 } else { 2.0 }).collect();
        ActiveModes {
            nodes: d.z_grid.clone(),
            cols,
            k2,
            weight,
        }
    }

    /// `sum_k |w_k eta'|^2_{H^{-1}_k}` with loads integrated exactly on each
    /// sloped segment, in a Shen basis of `n_test` functions.
    fn dual_norm(&self, profile: &EtaProfile, n_test: usize) -> f64 {
        if self.cols.ncols() == 0 {
            return 0.0;
        }
        let n = self.nodes.len();
        let q = (n + n_test + 2) / 2 + 1;
        let (gz, gw) = spectral::gauss_legendre(q);
        let mut loads = DMatrix::from_element(n_test, self.cols.ncols(), ZERO);
        for (a, b, s) in profile.sloped_segments() {
            let pts: Vec<f64> = gz.iter().map(|t| a + (b - a) * t).collect();
            let wq = spectral::rc_mul(&spectral::interp_matrix(&self.nodes, &pts), &self.cols);
            let (phi, _) = spectral::shen_tables(&pts, n_test + 2);
            let mut weighted = wq;
            for (r, w) in gw.iter().enumerate() {
                weighted.row_mut(r).scale_mut(w * (b - a) * s);
            }
            loads += spectral::rc_tr_mul(&phi, &weighted);
        }
        let mut total = 0.0;
        for c in 0..loads.ncols() {
            let b: Vec<C64> = loads.column(c).iter().copied().collect();
            let mut x = b.clone();
            spectral::helmholtz_solve(self.k2[c], &mut x);
            let v: f64 = b.iter().zip(&x).map(|(p, q)| (p.conj() * q).re).sum();
            total += self.weight[c] * v;
        }
        total
    }
}

fn test_size(n_z: usize, enrich: f64) -> usize {
    ((n_z as f64 * enrich.max(1.0)).ceil() as usize).max(n_z)
}

/// `avg |grad Lap^{-1} div(u eta)|^2` for a z-profile `eta`.
pub fn profile_advection_term(u: &VelocityField, profile: &EtaProfile, opts: &BoundOptions) -> f64 {
    let n_test = test_size(u.domain().n_z, opts.enrich);
    ActiveModes::new(u.w()).dual_norm(profile, n_test)
}

fn symmetrization_value(modes: &ActiveModes, profile: &EtaProfile, n_test: usize) -> f64 {
    profile.gradient_term() + modes.dual_norm(profile, n_test)
}

/// `avg |eta_delta'|^2 + avg |grad Lap^{-1} div(u eta_delta)|^2`, an upper
/// bound on `Nu(u)`.
pub fn symmetrization_bound(u: &VelocityField, delta: f64) -> Result<BoundCertificate> {
    symmetrization_bound_with(u, delta, &BoundOptions::default())
}

pub fn symmetrization_bound_with(
    u: &VelocityField,
    delta: f64,
    opts: &BoundOptions,
) -> Result<BoundCertificate> {
    let profile = EtaProfile::layer(delta)?;
    let value = profile_bound(u, &profile, opts);
    Ok(BoundCertificate {
        kind: BoundKind::Symmetrization,
        value,
        profile: Some(profile),
        delta: Some(delta),
        lambda: None,
    })
}

/// Symmetrization bound for an arbitrary profile.
pub fn profile_bound(u: &VelocityField, profile: &EtaProfile, opts: &BoundOptions) -> f64 {
    let n_test = test_size(u.domain().n_z, opts.enrich);
    symmetrization_value(&ActiveModes::new(u.w()), profile, n_test)
}

/// Minimise the symmetrization bound over `delta`: a log grid on
/// `[delta_min, 1/2]`, then golden-section search in `log delta`.
pub fn symmetrization_bound_min(u: &VelocityField, opts: &BoundOptions) -> Result<BoundCertificate> {
    if !(opts.delta_min > 0.0 && opts.delta_min < 0.5) || opts.grid_points < 3 {
        return invalid("delta grid needs delta_min in (0, 1/2) and at least 3 points");
    }
    let modes = ActiveModes::new(u.w());
    let n_test = test_size(u.domain().n_z, opts.enrich);
    let f = |ld: f64| -> f64 {
        let delta = ld.exp().min(0.5);
        symmetrization_value(&modes, &EtaProfile::layer(delta).unwrap(), n_test)
    };
    let (lo, hi) = (opts.delta_min.ln(), 0.5f64.ln());
    let n = opts.grid_points;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| f(g)).collect();
    let best = (0..n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n - 1)]);
    let (mut x_best, mut f_best) = (grid[best], vals[best]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..opts.refine_iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < f_best {
            x_best = x;
            f_best = v;
        }
    }
    let delta = x_best.exp().min(0.5);
    Ok(BoundCertificate {
        kind: BoundKind::Symmetrization,
        value: f_best,
        profile: Some(EtaProfile::layer(delta)?),
        delta: Some(delta),
        lambda: None,
    })
}

/// Legendre values and first two derivatives in `t` at one point.
fn legendre_d2(t: f64, count: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; count];
    let mut d = vec![0.0; count];
    let mut d2 = vec![0.0; count];
    p[0] = 1.0;
    if count > 1 {
        p[1] = t;
        d[1] = 1.0;
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * t * p[n] - nf * p[n - 1]) / (nf + 1.0);
        d[n + 1] = d[n - 1] + (2.0 * nf + 1.0) * p[n];
        d2[n + 1] = d2[n - 1] + (2.0 * nf + 1.0) * d[n];
    }
    (p, d, d2)
}

/// Clamped basis `psi_j = L_j + a_j L_{j+2} + b_j L_{j+4}` in `2z-1`
/// (`psi = psi' = 0` at both walls): values and first two z-derivatives.
pub(crate) fn clamped_tables(points: &[f64], nb: usize) -> [DMatrix<f64>; 3] {
    let mut v = DMatrix::zeros(points.len(), nb);
    let mut d1 = DMatrix::zeros(points.len(), nb);
    let mut d2 = DMatrix::zeros(points.len(), nb);
    for (r, &z) in points.iter().enumerate() {
        let (p, d, dd) = legendre_d2(2.0 * z - 1.0, nb + 4);
        for j in 0..nb {
            let jf = j as f64;
            let a = -2.0 * (2.0 * jf + 5.0) / (2.0 * jf + 7.0);
            let b = (2.0 * jf + 3.0) / (2.0 * jf + 7.0);
            v[(r, j)] = p[j] + a * p[j + 2] + b * p[j + 4];
            d1[(r, j)] = 2.0 * (d[j] + a * d[j + 2] + b * d[j + 4]);
            d2[(r, j)] = 4.0 * (dd[j] + a * dd[j + 2] + b * dd[j + 4]);
        }
    }
    [v, d1, d2]
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// polynomial degree + 1 of the streamfunction space (at most 128)
    pub n_z: usize,
    pub l_x: f64,
    /// hard cap on the scanned lattice modes
    pub max_mode: usize,
}

impl SpectralOptions {
    pub fn new(l_x: f64) -> Self {
        SpectralOptions {
            n_z: 64,
            l_x,
            max_mode: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralConstraint {
    /// `M(eta)`
    pub value: f64,
    pub wavenumber: f64,
    pub mode: usize,
    pub modes_scanned: usize,
    /// `max |eta'|^2 / k^4` at the first unscanned mode
    pub tail_bound: f64,
}

/// Largest generalized eigenvalue at wavenumber `k` of
/// `|k psi eta'|^2_{H^{-1}_k}` against `int |psi'' - k^2 psi|^2`.
pub fn spectral_constraint_at(profile: &EtaProfile, k: f64, n_z: usize) -> Result<f64> {
    if !(8..=128).contains(&n_z) {
        return invalid(format!("spectral constraint uses 8 <= N_z <= 128, got {n_z}"));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    let nb = n_z - 4;
    let nd = 2 * n_z;
    let k2 = k * k;

    let (gz, gw) = spectral::gauss_legendre(n_z + 4);
    let [v, _, d2] = clamped_tables(&gz, nb);
    let lap = &d2 - &v * k2;
    let mut wl = lap.clone();
    for (r, w) in gw.iter().enumerate() {
        wl.row_mut(r).scale_mut(*w);
    }
    let a = lap.transpose() * wl;

    let q = (nd + 2 + n_z) / 2 + 1;
    let (tz, tw) = spectral::gauss_legendre(q);
    let mut c = DMatrix::<f64>::zeros(nd, nb);
    for (lo, hi, s) in profile.sloped_segments() {
        let pts: Vec<f64> = tz.iter().map(|t| lo + (hi - lo) * t).collect();
        let (phi, _) = spectral::shen_tables(&pts, nd + 2);
        let [mut psi, _, _] = clamped_tables(&pts, nb);
        for (r, w) in tw.iter().enumerate() {
            psi.row_mut(r).scale_mut(w * (hi - lo) * s);
        }
        c += phi.transpose() * psi;
    }

    let mut kmat = DMatrix::<f64>::zeros(nd, nd);
    for i in 0..nd {
        let (md, mo) = spectral::shen_mass(i);
        kmat[(i, i)] = spectral::shen_stiffness(i) + k2 * md;
        if i + 2 < nd {
            kmat[(i, i + 2)] = k2 * mo;
            kmat[(i + 2, i)] = k2 * mo;
        }
    }
    let fail = |what: &str| Error::SolverFailure {
        method: format!("cholesky ({what})"),
        iterations: 0,
        residual_history: vec![],
    };
    let lk = Cholesky::new(kmat).ok_or_else(|| fail("test-space Helmholtz matrix"))?;
    let la = Cholesky::new(a).ok_or_else(|| fail("enstrophy matrix"))?;
    let dmat = lk.l().solve_lower_triangular(&c).ok_or_else(|| fail("triangular solve"))?;
    // E = D L_A^{-T}, so E^T = L_A^{-1} D^T
    let et = la
        .l()
        .solve_lower_triangular(&dmat.transpose())
        .ok_or_else(|| fail("triangular solve"))?;
    let g = &et * et.transpose() * k2;
    let eig = SymmetricEigen::try_new(g, 1e-14, 10_000).ok_or_else(|| Error::SolverFailure {
        method: "symmetric eigensolver".into(),
        iterations: 10_000,
        residual_history: vec![],
    })?;
    Ok(eig.eigenvalues.iter().copied().fold(0.0, f64::max))
}

/// `M(eta)`: the sup of `avg |grad Lap^{-1} div(u eta)|^2` over no-slip
/// divergence-free `u` of unit enstrophy, scanned over the lattice
/// wavenumbers `2 pi m / l_x` until the tail bound `max|eta'|^2 / k^4`
/// drops below the running maximum.
pub fn spectral_constraint_m(profile: &EtaProfile, opts: &SpectralOptions) -> Result<SpectralConstraint> {
    if !(opts.l_x > 0.0) {
        return invalid("l_x must be positive");
    }
    let s2 = profile.max_slope().powi(2);
    let mut best = SpectralConstraint {
        value: 0.0,
        wavenumber: 0.0,
        mode: 0,
        modes_scanned: 0,
        tail_bound: f64::INFINITY,
    };
    for m in 1..=opts.max_mode {
        let k = 2.0 * std::f64::consts::PI * m as f64 / opts.l_x;
        let tail = s2 / k.powi(4);
        if tail <= best.value {
            best.tail_bound = tail;
            break;
        }
        let v = spectral_constraint_at(profile, k, opts.n_z)?;
        best.modes_scanned = m;
        if v > best.value {
            best.value = v;
            best.wavenumber = k;
            best.mode = m;
        }
        let next = 2.0 * std::f64::consts::PI * (m + 1) as f64 / opts.l_x;
        best.tail_bound = s2 / next.powi(4);
    }
    Ok(best)
}

/// `int |eta'|^2 + Pe^2 M(eta)`, an upper bound on `Nu` over all flows of
/// enstrophy `Pe^2` in the periodic cell.
pub fn u_symm(profile: &EtaProfile, pe: f64, opts: &SpectralOptions) -> Result<BoundCertificate> {
    let m = spectral_constraint_m(profile, opts)?;
    Ok(BoundCertificate {
        kind: BoundKind::Symmetrization,
        value: profile.gradient_term() + pe * pe * m.value,
        profile: Some(profile.clone()),
        delta: None,
        lambda: Some(m.value),
    })
}

/// Lower-bound constant `c` in `howard >= c eps^{1/3}`: minimising
/// `delta/4 + eps/(64 delta^2)` gives `3/16`.
pub const HOWARD_LB_CONSTANT: f64 = 3.0 / 16.0;

/// `c eps^{1/3}`, valid for `eps <= 8/27`.
pub fn howard_lower_bound(epsilon: f64) -> f64 {
    HOWARD_LB_CONSTANT * epsilon.cbrt()
}

/// `int (bar(w theta) - 1)^2 dz` with `bar(w theta)` projected as in the
/// k = 0 term of the mode decomposition, so `E = howard + sum Q_k` holds
/// exactly in the discrete space.
fn flux_deficit_to_one(w: &SpectralField, theta: &SpectralField) -> (f64, f64) {
    let (k0, mean) = flux_deficit_projected(w, theta);
    (k0 + (mean - 1.0).powi(2), mean)
}

/// Howard's objective `int (bar(w theta) - 1)^2 + eps avg|grad u|^2 avg|grad theta|^2`.
pub fn howard_value(u: &VelocityField, theta: &SpectralField, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let scale = 1.0 + theta.coeffs.camax();
    if theta.wall_defect() > 1e-10 * scale || u.psi.wall_defect() > 1e-10 * (1.0 + u.psi.coeffs.camax()) {
        return invalid("u and theta must vanish at the walls");
    }
    let (dev, mean) = flux_deficit_to_one(u.w(), theta);
    if (mean - 1.0).abs() > 1e-8 {
        return invalid(format!("net flux avg(w theta) = {mean}, expected 1"));
    }
    Ok(dev + epsilon * u.enstrophy_norm().powi(2) * theta.grad_square())
}

/// Largest `|bar(w theta)(z)| / ((z ^ (1-z)) ||w_z|| ||theta_z||)` over the
/// interior CGL nodes (averaged norms), and the constant 4 it must not exceed.
pub fn check_lingrowth(w: &SpectralField, theta: &SpectralField) -> (f64, f64) {
    let a = w.dz().mean_square().sqrt();
    let b = theta.dz().mean_square().sqrt();
    if a == 0.0 || b == 0.0 {
        return (0.0, 4.0);
    }
    let zs: Vec<f64> = w.domain.z_grid[1..w.domain.n_z - 1].to_vec();
    let h = w.horizontal_mean_product(theta, &zs);
    let r = zs
        .iter()
        .zip(&h)
        .map(|(&z, v)| v.abs() / (z.min(1.0 - z) * a * b))
        .fold(0.0, f64::max);
    (r, 4.0)
}
