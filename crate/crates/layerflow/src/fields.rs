//! Domain, spectral fields on `T_x x [0, 1]`, and the streamfunction map.
//!
//! A field is stored as complex Fourier coefficients in `x` (modes
//! `-M..=M`) times nodal values on the CGL grid in `z`. The coefficient
//! matrix is `N_z x (2M+1)` column-major, so memory order is row-major in
//! `(mode, node)`.

use crate::error::{invalid, Result};
use crate::spectral;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Precomputed z-operators shared by every field on a domain.
pub(crate) struct ZOps {
    pub d1: DMatrix<f64>,
    pub cc_weights: Vec<f64>,
    pub gauss_z: Vec<f64>,
    pub gauss_w: Vec<f64>,
    /// CGL values -> Gauss values
    pub interp: DMatrix<f64>,
    /// CGL values -> Gauss values of the z-derivative
    pub interp_d: DMatrix<f64>,
    /// Shen basis at Gauss points: values, z-derivatives
    pub shen_g_par: spectral::ParityTable,
    pub shen_dg_par: spectral::ParityTable,
    /// Shen basis at CGL nodes
    pub shen_nodes: DMatrix<f64>,
    /// `L_l(2z-1)` at Gauss points, `l = 0..N_z-1`
    pub legendre_g: DMatrix<f64>,
}

pub(crate) struct XGrid {
    pub nx: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct DomainSpec {
    pub l_x: f64,
    pub m: usize,
    pub n_z: usize,
    pub z_grid: Vec<f64>,
    pub(crate) z: Arc<ZOps>,
    pub(crate) x: Arc<XGrid>,
}

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainSpec")
            .field("l_x", &self.l_x)
            .field("M", &self.m)
            .field("N_z", &self.n_z)
            .finish()
    }
}

impl PartialEq for DomainSpec {
    fn eq(&self, o: &Self) -> bool {
        self.l_x == o.l_x && self.m == o.m && self.n_z == o.n_z
    }
}

fn smooth_size(min: usize) -> usize {
    let mut n = min.max(4);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 && n % 2 == 0 {
            return n;
        }
        n += 1;
    }
}

/// Build a domain of period `l_x` with modes `|m| <= M` and `N_z` CGL nodes.
pub fn build_domain(l_x: f64, m: usize, n_z: usize) -> Result<DomainSpec> {
    if !(l_x > 0.0) || !l_x.is_finite() {
        return invalid(format!("l_x must be positive, got {l_x}"));
    }
    if m < 1 {
        return invalid("M must be at least 1");
    }
    if n_z < 8 {
        return invalid(format!("N_z must be at least 8, got {n_z}"));
    }
    let nodes = spectral::cgl_nodes(n_z);
    let q = 3 * n_z / 2 + 2;
    let (gz, gw) = spectral::gauss_legendre(q);
    let d1 = spectral::cheb_diff_matrix(n_z);
    let interp = spectral::interp_matrix(&nodes, &gz);
    let interp_d = &interp * &d1;
    let (shen_g, shen_dg) = spectral::shen_tables(&gz, n_z);
    let (shen_nodes, _) = spectral::shen_tables(&nodes, n_z);
    let legendre_g = spectral::legendre_table(&gz, n_z);
    let zops = ZOps {
        d1,
        cc_weights: spectral::clenshaw_curtis_weights(n_z),
        gauss_z: gz,
        gauss_w: gw,
        interp,
        interp_d,
        shen_g_par: spectral::ParityTable::new(&shen_g, 1.0),
        shen_dg_par: spectral::ParityTable::new(&shen_dg, -1.0),
        shen_nodes,
        legendre_g,
    };
    let nx = smooth_size(3 * m + 1);
    let mut planner = FftPlanner::new();
    let xg = XGrid {
        nx,
        fwd: planner.plan_fft_forward(nx),
        inv: planner.plan_fft_inverse(nx),
    };
    Ok(DomainSpec {
        l_x,
        m,
        n_z,
        z_grid: nodes,
        z: Arc::new(zops),
        x: Arc::new(xg),
    })
}

impl DomainSpec {
    pub fn n_modes(&self) -> usize {
        2 * self.m + 1
    }

    /// Mode index of column `i`.
    pub fn mode(&self, i: usize) -> i64 {
        i as i64 - self.m as i64
    }

    /// Column of mode `m`.
    pub fn col(&self, m: i64) -> usize {
        (m + self.m as i64) as usize
    }

    /// Wavenumber `2 pi m / l_x` of column `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * self.mode(i) as f64 / self.l_x
    }

    /// Clenshaw–Curtis weights on the z-grid (sum to 1).
    pub fn quad_weights(&self) -> &[f64] {
        &self.z.cc_weights
    }

    pub fn gauss_points(&self) -> (&[f64], &[f64]) {
        (&self.z.gauss_z, &self.z.gauss_w)
    }

    pub fn nx(&self) -> usize {
        self.x.nx
    }

    /// Physical x-grid used for products.
    pub fn x_grid(&self) -> Vec<f64> {
        let nx = self.x.nx;
        (0..nx).map(|i| self.l_x * i as f64 / nx as f64).collect()
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.z.d1
    }

    /// Modal rows (points x modes) -> physical values (points x nx, row-major).
    pub(crate) fn to_physical(&self, modal: &DMatrix<C64>) -> Vec<f64> {
        self.to_physical_half(&modal.columns(self.m, self.m + 1).clone_owned())
    }

    /// As [`Self::to_physical`] from the modes `m >= 0` only; negative
    /// modes are their conjugates.
    pub(crate) fn to_physical_half(&self, half: &DMatrix<C64>) -> Vec<f64> {
        let nx = self.x.nx;
        let rows = half.nrows();
        let mut out = vec![0.0; rows * nx];
        let mut buf = vec![ZERO; nx];
        for r in 0..rows {
            buf.iter_mut().for_each(|b| *b = ZERO);
            buf[0] = C64::new(half[(r, 0)].re, 0.0);
            for m in 1..=self.m {
                buf[m] = half[(r, m)];
                buf[nx - m] = half[(r, m)].conj();
            }
            self.x.inv.process(&mut buf);
            for (o, b) in out[r * nx..(r + 1) * nx].iter_mut().zip(&buf) {
                *o = b.re;
            }
        }
        out
    }

    /// Physical values (points x nx, row-major) -> modal rows, truncated to `|m| <= M`.
    pub(crate) fn to_modal(&self, phys: &[f64], rows: usize) -> DMatrix<C64> {
        self.from_half(&self.to_modal_half(phys, rows))
    }

    /// Modes `m >= 0` of physical rows.
    pub(crate) fn to_modal_half(&self, phys: &[f64], rows: usize) -> DMatrix<C64> {
        let nx = self.x.nx;
        let mut out = DMatrix::from_element(rows, self.m + 1, ZERO);
        let mut buf = vec![ZERO; nx];
        let scale = 1.0 / nx as f64;
        for r in 0..rows {
            for (b, &p) in buf.iter_mut().zip(&phys[r * nx..(r + 1) * nx]) {
                *b = C64::new(p, 0.0);
            }
            self.x.fwd.process(&mut buf);
            for m in 0..=self.m {
                out[(r, m)] = buf[m] * scale;
            }
        }
        out
    }

    /// Load vectors `int p(z) phi_i(z) dz` for every mode, from Gauss values.
    pub(crate) fn gauss_to_loads(&self, g: &DMatrix<C64>) -> DMatrix<C64> {
        let mut wg = g.clone();
        for (r, w) in self.z.gauss_w.iter().enumerate() {
            wg.row_mut(r).scale_mut(*w);
        }
        self.z.shen_g_par.apply_tr(&wg)
    }

    /// Full (points x modes) matrix from the columns `m >= 0`.
    pub(crate) fn from_half(&self, half: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::from_element(half.nrows(), self.n_modes(), ZERO);
        for m in 0..=self.m {
            for r in 0..half.nrows() {
                let v = half[(r, m)];
                if m == 0 {
                    out[(r, self.m)] = C64::new(v.re, 0.0);
                } else {
                    out[(r, self.m + m)] = v;
                    out[(r, self.m - m)] = v.conj();
                }
            }
        }
        out
    }

    /// Exact `sum_m int f_m conj(g_m) dz` from Gauss values.
    pub(crate) fn gauss_inner(&self, f: &DMatrix<C64>, g: &DMatrix<C64>) -> f64 {
        let w = &self.z.gauss_w;
        let mut s = 0.0;
        for c in 0..f.ncols() {
            for r in 0..f.nrows() {
                s += w[r] * (f[(r, c)] * g[(r, c)].conj()).re;
            }
        }
        s
    }

    /// Solve `(-d^2/dz^2 + k^2) g = rhs` (rhs given as Shen loads) per mode.
    pub(crate) fn helmholtz_solve_all(&self, loads: &mut DMatrix<C64>) {
        let n = loads.nrows();
        for i in 0..self.n_modes() {
            let k = self.wavenumber(i);
            spectral::helmholtz_solve(k * k, &mut loads.as_mut_slice()[i * n..(i + 1) * n]);
        }
    }

    pub(crate) fn helmholtz_apply_all(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = x.clone();
        for i in 0..self.n_modes() {
            let k = self.wavenumber(i);
            let n = x.nrows();
            spectral::helmholtz_apply(
                k * k,
                &x.as_slice()[i * n..(i + 1) * n],
                &mut out.as_mut_slice()[i * n..(i + 1) * n],
            );
        }
        out
    }

    /// Shen coefficients -> Gauss values and Gauss z-derivatives.
    pub(crate) fn shen_to_gauss(&self, c: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
        (self.z.shen_g_par.apply(c), self.z.shen_dg_par.apply(c))
    }

    pub fn params(&self) -> DomainParams {
        DomainParams {
            l_x: self.l_x,
            m: self.m,
            n_z: self.n_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub l_x: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N_z")]
    pub n_z: usize,
}

impl DomainParams {
    pub fn build(&self) -> Result<DomainSpec> {
        build_domain(self.l_x, self.m, self.n_z)
    }
}

/// Real scalar field: Fourier modes in x, CGL nodal values in z.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub domain: DomainSpec,
    /// `N_z x (2M+1)`; column `i` holds mode `i - M`.
    pub coeffs: DMatrix<C64>,
}

impl SpectralField {
    pub fn zeros(domain: &DomainSpec) -> Self {
        SpectralField {
            domain: domain.clone(),
            coeffs: DMatrix::from_element(domain.n_z, domain.n_modes(), ZERO),
        }
    }

    pub fn from_coeffs(domain: &DomainSpec, coeffs: DMatrix<C64>) -> Result<Self> {
        if coeffs.nrows() != domain.n_z || coeffs.ncols() != domain.n_modes() {
            return invalid("coefficient shape does not match domain");
        }
        Ok(SpectralField {
            domain: domain.clone(),
            coeffs,
        })
    }

    /// Sample a real function on the product grid and transform (exact for
    /// functions band-limited to `|m| <= M`).
    pub fn from_fn(domain: &DomainSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = domain.x_grid();
        let nx = xs.len();
        let mut phys = vec![0.0; domain.n_z * nx];
        for (j, &z) in domain.z_grid.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                phys[j * nx + i] = f(x, z);
            }
        }
        let coeffs = domain.to_modal(&phys, domain.n_z);
        let mut s = SpectralField {
            domain: domain.clone(),
            coeffs,
        };
        s.symmetrize();
        s
    }

    /// Field `sum_m profile_m(z) e^{i k_m x}` built from a list of
    /// non-negative modes; negative modes are filled by conjugation.
    pub fn from_mode_profiles(
        domain: &DomainSpec,
        modes: &[(usize, &dyn Fn(f64) -> C64)],
    ) -> Result<Self> {
        let mut s = SpectralField::zeros(domain);
        for (m, prof) in modes {
            if *m > domain.m {
                return Err(crate::Error::Resolution(format!(
                    "mode {m} exceeds cutoff M = {}",
                    domain.m
                )));
            }
            let cp = domain.col(*m as i64);
            let cn = domain.col(-(*m as i64));
            for (j, &z) in domain.z_grid.iter().enumerate() {
                let v = prof(z);
                if *m == 0 {
                    s.coeffs[(j, cp)] += C64::new(v.re, 0.0);
                } else {
                    s.coeffs[(j, cp)] += v;
                    s.coeffs[(j, cn)] += v.conj();
                }
            }
        }
        Ok(s)
    }

    pub fn coeff(&self, m: i64, j: usize) -> C64 {
        self.coeffs[(j, self.domain.col(m))]
    }

    /// Point evaluation.
    pub fn eval(&self, x: f64, z: f64) -> f64 {
        let p = spectral::interp_matrix(&self.domain.z_grid, &[z]);
        let mut s = 0.0;
        for i in 0..self.domain.n_modes() {
            let mut c = ZERO;
            for j in 0..self.domain.n_z {
                c += self.coeffs[(j, i)] * p[(0, j)];
            }
            let ph = self.domain.wavenumber(i) * x;
            s += (c * C64::new(ph.cos(), ph.sin())).re;
        }
        s
    }

    /// Mode profiles at arbitrary z (points x modes).
    pub fn modes_at(&self, zs: &[f64]) -> DMatrix<C64> {
        let p = spectral::interp_matrix(&self.domain.z_grid, zs);
        spectral::rc_mul(&p, &self.coeffs)
    }

    pub fn dx(&self) -> Self {
        let mut c = self.coeffs.clone();
        for i in 0..self.domain.n_modes() {
            let ik = C64::new(0.0, self.domain.wavenumber(i));
            c.column_mut(i).iter_mut().for_each(|v| *v *= ik);
        }
        SpectralField {
            domain: self.domain.clone(),
            coeffs: c,
        }
    }

    pub fn dz(&self) -> Self {
        SpectralField {
            domain: self.domain.clone(),
            coeffs: spectral::rc_mul(&self.domain.z.d1, &self.coeffs),
        }
    }

    /// Mode values at Gauss points (Q x modes).
    pub(crate) fn at_gauss(&self) -> DMatrix<C64> {
        spectral::rc_mul(&self.domain.z.interp, &self.coeffs)
    }

    /// z-derivative mode values at Gauss points.
    pub(crate) fn dz_at_gauss(&self) -> DMatrix<C64> {
        spectral::rc_mul(&self.domain.z.interp_d, &self.coeffs)
    }

    /// Largest `|c_{-m} - conj(c_m)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for m in 0..=self.domain.m as i64 {
            for j in 0..self.domain.n_z {
                d = d.max((self.coeff(-m, j) - self.coeff(m, j).conj()).norm());
            }
        }
        d
    }

    /// Project onto exactly Hermitian-symmetric coefficients.
    pub fn symmetrize(&mut self) {
        for m in 0..=self.domain.m as i64 {
            let (cp, cn) = (self.domain.col(m), self.domain.col(-m));
            for j in 0..self.domain.n_z {
                let a = 0.5 * (self.coeffs[(j, cp)] + self.coeffs[(j, cn)].conj());
                self.coeffs[(j, cp)] = a;
                self.coeffs[(j, cn)] = a.conj();
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        SpectralField {
            domain: self.domain.clone(),
            coeffs: self.coeffs.scale(s),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        SpectralField {
            domain: self.domain.clone(),
            coeffs: &self.coeffs + &o.coeffs,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        SpectralField {
            domain: self.domain.clone(),
            coeffs: &self.coeffs - &o.coeffs,
        }
    }

    /// Volume average of `f g` over the layer (exact for the stored polynomials).
    pub fn inner(&self, o: &Self) -> f64 {
        self.domain.gauss_inner(&self.at_gauss(), &o.at_gauss())
    }

    /// Volume average of `grad f . grad g`.
    pub fn grad_inner(&self, o: &Self) -> f64 {
        let d = &self.domain;
        let (fz, gz) = (self.dz_at_gauss(), o.dz_at_gauss());
        let (mut f, g) = (self.at_gauss(), o.at_gauss());
        for i in 0..d.n_modes() {
            let k = d.wavenumber(i);
            f.column_mut(i).scale_mut(k * k);
        }
        d.gauss_inner(&f, &g) + d.gauss_inner(&fz, &gz)
    }

    pub fn mean_square(&self) -> f64 {
        self.inner(self)
    }

    pub fn grad_square(&self) -> f64 {
        self.grad_inner(self)
    }

    /// Largest modulus of the wall values `f(x, 0)`, `f(x, 1)` over modes.
    pub fn wall_defect(&self) -> f64 {
        let n = self.domain.n_z;
        let mut d: f64 = 0.0;
        for i in 0..self.domain.n_modes() {
            d = d.max(self.coeffs[(0, i)].norm()).max(self.coeffs[(n - 1, i)].norm());
        }
        d
    }

    /// Shen coefficients of a field vanishing at both walls (L2 projection,
    /// exact for such fields).
    pub(crate) fn to_shen(&self) -> DMatrix<C64> {
        let d = &self.domain;
        let mut c = d.gauss_to_loads(&self.at_gauss());
        let n = c.nrows();
        for i in 0..d.n_modes() {
            spectral::mass_solve(&mut c.as_mut_slice()[i * n..(i + 1) * n]);
        }
        c
    }

    pub(crate) fn from_shen(domain: &DomainSpec, c: &DMatrix<C64>) -> Self {
        let mut s = SpectralField {
            domain: domain.clone(),
            coeffs: spectral::rc_mul(&domain.z.shen_nodes, c),
        };
        // walls are exactly zero in this basis up to rounding
        let n = domain.n_z;
        for i in 0..domain.n_modes() {
            s.coeffs[(0, i)] = ZERO;
            s.coeffs[(n - 1, i)] = ZERO;
        }
        s.symmetrize();
        s
    }

    /// Horizontal average `bar(f g)(z)` at the Gauss points.
    pub(crate) fn horizontal_mean_product_gauss(&self, o: &Self) -> Vec<f64> {
        let (f, g) = (self.at_gauss(), o.at_gauss());
        (0..f.nrows())
            .map(|r| (0..f.ncols()).map(|c| (f[(r, c)] * g[(r, c)].conj()).re).sum())
            .collect()
    }

    /// Horizontal average `bar(f g)(z)` at arbitrary points.
    pub fn horizontal_mean_product(&self, o: &Self, zs: &[f64]) -> Vec<f64> {
        let (f, g) = (self.modes_at(zs), o.modes_at(zs));
        (0..zs.len())
            .map(|r| (0..f.ncols()).map(|c| (f[(r, c)] * g[(r, c)].conj()).re).sum())
            .collect()
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson {
            l_x: self.domain.l_x,
            m: self.domain.m,
            n_z: self.domain.n_z,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_json(j: &FieldJson) -> Result<Self> {
        let d = build_domain(j.l_x, j.m, j.n_z)?;
        if j.coeffs.len() != d.n_z * d.n_modes() {
            return invalid(format!(
                "expected {} coefficients, found {}",
                d.n_z * d.n_modes(),
                j.coeffs.len()
            ));
        }
        let c = DMatrix::from_iterator(
            d.n_z,
            d.n_modes(),
            j.coeffs.iter().map(|p| C64::new(p[0], p[1])),
        );
        let mut f = SpectralField::from_coeffs(&d, c)?;
        if f.hermitian_defect() > 1e-12 * (1.0 + f.coeffs.camax()) {
            return invalid("coefficients are not Hermitian symmetric");
        }
        f.symmetrize();
        Ok(f)
    }
}

/// On-disk field representation; `coeffs` is row-major in `(mode, node)`
/// with modes ordered `-M..=M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldJson {
    pub l_x: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N_z")]
    pub n_z: usize,
    pub coeffs: Vec<[f64; 2]>,
}

/// Divergence-free velocity `(u_x, u_z) = (-psi_z, psi_x)`.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub psi: SpectralField,
    pub u_x: SpectralField,
    pub u_z: SpectralField,
}

pub fn streamfunction_to_velocity(psi: &SpectralField) -> VelocityField {
    let u_x = psi.dz().scaled(-1.0);
    let u_z = psi.dx();
    VelocityField {
        psi: psi.clone(),
        u_x,
        u_z,
    }
}

impl VelocityField {
    pub fn domain(&self) -> &DomainSpec {
        &self.psi.domain
    }

    /// `w`, the vertical component.
    pub fn w(&self) -> &SpectralField {
        &self.u_z
    }

    pub fn scaled(&self, s: f64) -> Self {
        VelocityField {
            psi: self.psi.scaled(s),
            u_x: self.u_x.scaled(s),
            u_z: self.u_z.scaled(s),
        }
    }

    /// Discrete L2 norm of `div u` relative to the L2 norm of `grad u`.
    pub fn divergence_residual(&self) -> f64 {
        let div = self.u_x.dx().add(&self.u_z.dz());
        let scale = self.enstrophy_norm().max(f64::MIN_POSITIVE);
        div.mean_square().sqrt() / scale
    }

    /// `(avg |u|^2)^{1/2}`.
    pub fn energy_norm(&self) -> f64 {
        (self.u_x.mean_square() + self.u_z.mean_square()).sqrt()
    }

    /// `(avg |grad u|^2)^{1/2}`.
    pub fn enstrophy_norm(&self) -> f64 {
        (self.u_x.grad_square() + self.u_z.grad_square()).sqrt()
    }
}

/// Random band-limited streamfunction with `psi = psi_z = 0` at the walls:
/// each mode is `z^2 (1-z)^2` times a random Legendre series of `degree`
/// terms. The result is normalised to unit enstrophy.
pub fn random_streamfunction<R: Rng + ?Sized>(
    domain: &DomainSpec,
    rng: &mut R,
    degree: usize,
) -> SpectralField {
    let mut s = SpectralField::zeros(domain);
    let leg = spectral::legendre_table(&domain.z_grid, degree.max(1));
    for m in 0..=domain.m as i64 {
        let a: Vec<C64> = (0..degree.max(1))
            .map(|_| {
                let re = rng.random::<f64>() * 2.0 - 1.0;
                let im = if m == 0 { 0.0 } else { rng.random::<f64>() * 2.0 - 1.0 };
                C64::new(re, im)
            })
            .collect();
        for (j, &z) in domain.z_grid.iter().enumerate() {
            let bump = z * z * (1.0 - z) * (1.0 - z);
            let mut v = ZERO;
            for (p, ap) in a.iter().enumerate() {
                v += ap * leg[(j, p)];
            }
            s.coeffs[(j, domain.col(m))] = v * bump;
            if m > 0 {
                s.coeffs[(j, domain.col(-m))] = (v * bump).conj();
            }
        }
    }
    let u = streamfunction_to_velocity(&s);
    let e = u.enstrophy_norm();
    if e > 0.0 {
        s.scaled(1.0 / e)
    } else {
        s
    }
}
