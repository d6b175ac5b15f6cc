//! Efficiency functionals of the integral formulation, the reduced 1D
//! lengthscale problem, and log-log scaling fits.

use crate::advection::advection_term;
use crate::designs::{build_branching_from, log_scale, BranchingParams};
use crate::error::{invalid, Error, Result};
use crate::fields::{SpectralField, VelocityField};
use crate::spectral;
use rand::{Rng, SeedableRng};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityNorm {
    Energy,
    Enstrophy,
}

#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyReport {
    pub epsilon: f64,
    pub norm: IntensityNorm,
    /// `avg |grad Lap^{-1} div(u xi)|^2`
    pub advection: f64,
    /// `avg |grad u|^2`, or `avg |u|^2` for the energy functional
    pub enstrophy_u: f64,
    pub grad_xi: f64,
    #[serde(rename = "total_E")]
    pub total_e: f64,
    /// Right-hand side of the lengthscale estimate, when the pair is a
    /// branching design
    pub analytic_bound: Option<f64>,
    pub constraint_residual: f64,
}

impl EfficiencyReport {
    /// `eps * enstrophy_u * grad_xi`.
    pub fn product(&self) -> f64 {
        self.epsilon * self.enstrophy_u * self.grad_xi
    }

    /// `Pe = eps^{-1/2}`.
    pub fn implied_pe(&self) -> f64 {
        self.epsilon.powf(-0.5)
    }

    /// `1 + 1/E`: the dual principle gives `Nu - 1 >= 1/E` for the flow
    /// rescaled to intensity `Pe`.
    pub fn implied_nu_lower(&self) -> f64 {
        1.0 + 1.0 / self.total_e
    }
}

fn efficiency(u: &VelocityField, xi: &SpectralField, epsilon: f64, norm: IntensityNorm) -> Result<EfficiencyReport> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    if xi.wall_defect() > 1e-10 * (1.0 + xi.coeffs.camax()) {
        return invalid("xi must vanish at the walls");
    }
    let flux = u.w().inner(xi);
    let residual = (flux - 1.0).abs();
    if residual > 1e-8 {
        return invalid(format!("net flux avg(w xi) = {flux}, expected 1"));
    }
    let advection = advection_term(u, xi);
    let size = match norm {
        IntensityNorm::Enstrophy => u.enstrophy_norm().powi(2),
        IntensityNorm::Energy => u.energy_norm().powi(2),
    };
    let grad_xi = xi.grad_square();
    Ok(EfficiencyReport {
        epsilon,
        norm,
        advection,
        enstrophy_u: size,
        grad_xi,
        total_e: advection + epsilon * size * grad_xi,
        analytic_bound: None,
        constraint_residual: residual,
    })
}

/// `avg |grad Lap^{-1} div(u xi)|^2 + eps avg|grad u|^2 avg|grad xi|^2`.
pub fn efficiency_enstrophy(u: &VelocityField, xi: &SpectralField, epsilon: f64) -> Result<EfficiencyReport> {
    efficiency(u, xi, epsilon, IntensityNorm::Enstrophy)
}

/// `avg |grad Lap^{-1} div(u xi)|^2 + eps avg|u|^2 avg|grad xi|^2`.
pub fn efficiency_energy(u: &VelocityField, xi: &SpectralField, epsilon: f64) -> Result<EfficiencyReport> {
    efficiency(u, xi, epsilon, IntensityNorm::Energy)
}

/// Build the branching design for `params` on its unit cell and evaluate
/// the enstrophy functional, with the analytic estimate attached.
pub fn branching_efficiency(params: &BranchingParams, n_z: usize) -> Result<EfficiencyReport> {
    let d = params.unit_cell_domain(n_z)?;
    let (u, xi) = build_branching_from(params, &d)?;
    let mut r = efficiency_enstrophy(&u, &xi, params.epsilon)?;
    r.analytic_bound = Some(analytic_branching_bound(params, params.epsilon));
    Ok(r)
}

/// Terms of `l_bl + int ell'^2 + eps (1/l_bulk^2 + int 1/ell^2 + 1/l_bl)^2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LengthscaleTerms {
    pub l_bl: f64,
    pub gradient: f64,
    pub inverse_square: f64,
    pub l_bulk: f64,
    pub epsilon: f64,
}

impl LengthscaleTerms {
    pub fn bracket(&self) -> f64 {
        1.0 / (self.l_bulk * self.l_bulk) + self.inverse_square + 1.0 / self.l_bl
    }

    pub fn total(&self) -> f64 {
        self.l_bl + self.gradient + self.epsilon * self.bracket().powi(2)
    }

    /// The same without the gradient term.
    pub fn total_without_gradient(&self) -> f64 {
        self.l_bl + self.epsilon * self.bracket().powi(2)
    }
}

/// Evaluate the lengthscale functional for a smooth `ell` on
/// `[z_bulk, z_bl]` by Gauss quadrature in `log(1 - z)`.
pub fn lengthscale_terms(
    ell: &dyn Fn(f64) -> f64,
    ell_prime: &dyn Fn(f64) -> f64,
    z_bulk: f64,
    z_bl: f64,
    epsilon: f64,
) -> LengthscaleTerms {
    let (l_bulk, l_bl) = (ell(z_bulk), ell(z_bl));
    let (mut grad, mut inv) = (0.0, 0.0);
    if z_bl > z_bulk {
        let (a, b) = ((1.0 - z_bulk).ln(), (1.0 - z_bl).ln());
        let panels = 16;
        let (gx, gw) = spectral::gauss_legendre(16);
        for p in 0..panels {
            let (s0, s1) = (a + (b - a) * p as f64 / panels as f64, a + (b - a) * (p + 1) as f64 / panels as f64);
            for (x, w) in gx.iter().zip(&gw) {
                let s = s0 + (s1 - s0) * x;
                let one_minus = s.exp();
                let z = 1.0 - one_minus;
                // dz = -(1 - z) ds, and b < a
                let jac = (s0 - s1) * w * one_minus;
                grad += jac * ell_prime(z).powi(2);
                inv += jac / ell(z).powi(2);
            }
        }
    }
    LengthscaleTerms {
        l_bl,
        gradient: grad,
        inverse_square: inv,
        l_bulk,
        epsilon,
    }
}

/// The lengthscale estimate for a branching design, evaluated on the
/// interpolating `ell(z) = eps^{1/6} log^{1/6}(1/eps) (1-z)^{1/2}` with
/// constant 1.
pub fn analytic_branching_bound(params: &BranchingParams, epsilon: f64) -> f64 {
    let s = log_scale(params.epsilon);
    let ell = |z: f64| s * (1.0 - z).sqrt();
    let ell_p = |z: f64| -0.5 * s / (1.0 - z).sqrt();
    let mut t = lengthscale_terms(&ell, &ell_p, params.z_bulk(), params.z_bl(), epsilon);
    // exact endpoint values
    t.l_bulk = params.l_bulk();
    t.l_bl = params.l_bl();
    t.total()
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthscaleProfile {
    /// heights on `[z_bulk, z_bl]`, graded towards `z_bl`
    pub grid: Vec<f64>,
    pub ell: Vec<f64>,
    pub l_bulk: f64,
    pub l_bl: f64,
    pub objective: f64,
    /// final objective of every start, in order
    pub restarts: Vec<f64>,
    pub busse: bool,
}

impl LengthscaleProfile {
    /// Least-squares fit `ell ~ c g(z)` on the grid (trapezoid weights);
    /// returns `(c, ||ell - c g|| / ||ell||)`.
    pub fn fit_shape(&self, g: &dyn Fn(f64) -> f64) -> (f64, f64) {
        let z = &self.grid;
        let w: Vec<f64> = (0..z.len())
            .map(|i| {
                let l = if i > 0 { z[i] - z[i - 1] } else { 0.0 };
                let r = if i + 1 < z.len() { z[i + 1] - z[i] } else { 0.0 };
                0.5 * (l + r)
            })
            .collect();
        let gs: Vec<f64> = z.iter().map(|&v| g(v)).collect();
        let num: f64 = (0..z.len()).map(|i| w[i] * self.ell[i] * gs[i]).sum();
        let den: f64 = (0..z.len()).map(|i| w[i] * gs[i] * gs[i]).sum();
        let c = num / den;
        let err: f64 = (0..z.len()).map(|i| w[i] * (self.ell[i] - c * gs[i]).powi(2)).sum();
        let nrm: f64 = (0..z.len()).map(|i| w[i] * self.ell[i].powi(2)).sum();
        (c, (err / nrm).sqrt())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LengthscaleOptions {
    /// bound on `|ell'|`
    pub max_slope: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// projected-gradient stationarity tolerance
    pub tol: f64,
    /// drop the `int ell'^2` term
    pub busse: bool,
}

impl Default for LengthscaleOptions {
    fn default() -> Self {
        LengthscaleOptions {
            max_slope: 10.0,
            restarts: 10,
            seed: 0,
            max_iter: 200_000,
            tol: 1e-9,
            busse: false,
        }
    }
}

/// Discrete functional on a piecewise-linear `ell`. Variables are
/// `x = (l_bl, sigma_0..sigma_{n-2})` where `sigma_j = -ell'` on cell `j`,
/// so monotonicity and the slope cap are box constraints.
struct Discrete<'a> {
    dz: &'a [f64],
    eps: f64,
    busse: bool,
}

impl Discrete<'_> {
    fn ell(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dz.len() + 1;
        let mut l = vec![0.0; n];
        l[n - 1] = x[0];
        for j in (0..n - 1).rev() {
            l[j] = l[j + 1] + self.dz[j] * x[j + 1];
        }
        l
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let l = self.ell(x);
        let n = l.len();
        let mut inv = 0.0;
        for j in 0..n - 1 {
            inv += self.dz[j] / (l[j] * l[j + 1]);
        }
        let bracket = 1.0 / (l[0] * l[0]) + inv + 1.0 / l[n - 1];
        let grad_term: f64 = if self.busse {
            0.0
        } else {
            (0..n - 1).map(|j| self.dz[j] * x[j + 1] * x[j + 1]).sum()
        };
        let f = l[n - 1] + grad_term + self.eps * bracket * bracket;
        // d f / d ell_i through the bracket
        let mut dl = vec![0.0; n];
        let cb = 2.0 * self.eps * bracket;
        dl[0] += cb * (-2.0 / l[0].powi(3));
        dl[n - 1] += 1.0 + cb * (-1.0 / (l[n - 1] * l[n - 1]));
        for j in 0..n - 1 {
            let t = self.dz[j] / (l[j] * l[j + 1]);
            dl[j] -= cb * t / l[j];
            dl[j + 1] -= cb * t / l[j + 1];
        }
        // ell_i = x_0 + sum_{j >= i} dz_j x_{j+1}
        let mut g = vec![0.0; x.len()];
        let mut acc = 0.0;
        for i in 0..n {
            acc += dl[i];
            if i < n - 1 {
                g[i + 1] = self.dz[i] * acc;
                if !self.busse {
                    g[i + 1] += 2.0 * self.dz[i] * x[i + 1];
                }
            }
        }
        g[0] = dl.iter().sum();
        (f, g)
    }
}

/// Spectral projected gradient with a nonmonotone Armijo search.
fn spg(
    obj: &Discrete,
    x0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, bool, usize) {
    let proj = |x: &mut [f64]| {
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0;
    proj(&mut x);
    let (mut f, mut g) = obj.value_grad(&x);
    let mut hist = vec![f; 10];
    let mut alpha = 1e-3;
    for it in 0..max_iter {
        let mut pg = x.clone();
        for i in 0..x.len() {
            pg[i] -= g[i];
        }
        proj(&mut pg);
        let stat = pg.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if stat <= tol {
            return (x, f, true, it);
        }
        let mut d: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
        proj(&mut d);
        d.iter_mut().zip(&x).for_each(|(di, xi)| *di -= xi);
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let fmax = hist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lam = 1.0;
        let (xn, fn_, gn) = loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + lam * b).collect();
            let (fv, gv) = obj.value_grad(&xn);
            if fv.is_finite() && fv <= fmax + 1e-4 * lam * gd {
                break (xn, fv, gv);
            }
            lam *= 0.5;
            if lam < 1e-20 {
                return (x, f, false, it);
            }
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-30, 1e30) } else { 1e3 * alpha.min(1.0) };
        x = xn;
        f = fn_;
        g = gn;
        hist[it % 10] = f;
    }
    (x, f, false, max_iter)
}

/// `(1/2, 1 - eps^{1/3} log^{1/3}(1/eps))`: unit constants in
/// `1 - z_bulk ~ 1` and `1 - z_bl ~ eps^{1/3} log^{1/3}(1/eps)`.
pub fn natural_lengthscale_range(epsilon: f64) -> (f64, f64) {
    let s = log_scale(epsilon);
    (0.5, 1.0 - s * s)
}

/// Minimise `l_bl + int ell'^2 + eps (1/l_bulk^2 + int 1/ell^2 + 1/l_bl)^2`
/// over nonincreasing piecewise-linear `ell > 0` on `[z_bulk, z_bl]` with
/// `|ell'| <= max_slope`; both endpoint values are free.
pub fn solve_1d_lengthscale(
    epsilon: f64,
    z_bulk: f64,
    z_bl: f64,
    n_grid: usize,
) -> Result<LengthscaleProfile> {
    solve_1d_lengthscale_with(epsilon, z_bulk, z_bl, n_grid, &LengthscaleOptions::default())
}

pub fn solve_1d_lengthscale_with(
    epsilon: f64,
    z_bulk: f64,
    z_bl: f64,
    n_grid: usize,
    opts: &LengthscaleOptions,
) -> Result<LengthscaleProfile> {
    if !(0.5 <= z_bulk && z_bulk < z_bl && z_bl < 1.0) {
        return invalid(format!("need 1/2 <= z_bulk < z_bl < 1, got {z_bulk}, {z_bl}"));
    }
    if n_grid < 32 {
        return invalid(format!("n_grid must be at least 32, got {n_grid}"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let (a, b) = ((1.0 - z_bulk).ln(), (1.0 - z_bl).ln());
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| 1.0 - (a + (b - a) * i as f64 / (n_grid - 1) as f64).exp())
        .collect();
    let dz: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let obj = Discrete {
        dz: &dz,
        eps: epsilon,
        busse: opts.busse,
    };
    let nv = n_grid;
    let mut lo = vec![0.0; nv];
    let mut hi = vec![opts.max_slope; nv];
    lo[0] = 1e-12;
    hi[0] = f64::INFINITY;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let s = log_scale(epsilon);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    // the square-root ansatz
    let mut x = vec![s * (1.0 - z_bl).sqrt()];
    x.extend((0..nv - 1).map(|j| {
        let zm = 0.5 * (grid[j] + grid[j + 1]);
        (0.5 * s / (1.0 - zm).sqrt()).min(opts.max_slope)
    }));
    starts.push(x);
    for _ in 0..opts.restarts {
        let l_bl = 10f64.powf(rng.random_range(-4.0..-1.0));
        let slope: f64 = rng.random_range(0.0..2.0);
        let mut x = vec![l_bl];
        x.extend((0..nv - 1).map(|_| (slope * rng.random_range(0.5..1.5f64)).min(opts.max_slope)));
        starts.push(x);
    }

    let mut results = Vec::new();
    let mut trace = Vec::new();
    for x0 in starts {
        let (x, f, ok, _) = spg(&obj, x0, &lo, &hi, opts.tol, opts.max_iter);
        trace.push(f);
        results.push((x, f, ok));
    }
    let best = (0..results.len())
        .min_by(|&i, &j| results[i].1.total_cmp(&results[j].1))
        .unwrap();
    if !results[best].2 {
        return Err(Error::OptimizerFailure {
            message: format!(
                "best start did not reach stationarity {:.1e} in {} iterations",
                opts.tol, opts.max_iter
            ),
            trace,
        });
    }
    let ell = obj.ell(&results[best].0);
    Ok(LengthscaleProfile {
        l_bulk: ell[0],
        l_bl: ell[nv - 1],
        grid,
        ell,
        objective: results[best].1,
        restarts: trace,
        busse: opts.busse,
    })
}

/// Objective of the discrete problem at a given profile on a grid.
pub fn discrete_lengthscale_objective(grid: &[f64], ell: &[f64], epsilon: f64, busse: bool) -> f64 {
    let dz: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let obj = Discrete {
        dz: &dz,
        eps: epsilon,
        busse,
    };
    let mut x = vec![ell[ell.len() - 1]];
    x.extend((0..dz.len()).map(|j| (ell[j] - ell[j + 1]) / dz[j]));
    obj.value_grad(&x).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least squares `log y = p log x + log c`.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 3 {
        return invalid(format!("need at least 3 samples, got {}", samples.len()));
    }
    if samples.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return invalid("samples must be positive and finite");
    }
    let xmin = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let xmax = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if xmax < 10.0 * xmin * (1.0 - 1e-12) {
        return invalid(format!("samples span less than a decade ({xmin} to {xmax})"));
    }
    let n = samples.len() as f64;
    let lx: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let p = sxy / sxx;
    let c = my - p * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - c - p * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ScalingFit {
        exponent: p,
        prefactor: c.exp(),
        r_squared: r2,
    })
}
