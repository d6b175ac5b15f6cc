//! Nusselt number of a steady flow three ways: the advection–diffusion
//! solve, the primal minimisation over `eta`, and the dual maximisation
//! over `xi`; plus the coupled symmetrised system.
//!
//! Unknowns vanishing at the walls are expanded in the Shen basis. With
//! `K_k = S + k^2 M` (the Dirichlet Helmholtz operator, symmetric positive
//! definite) and `B` the Galerkin advection operator (skew-adjoint because
//! all products are integrated exactly), the steady problem reads
//! `(K + B) theta = f`, `f` being the loads of `w`.

use crate::advection::{advection_term_with, Advector};
use crate::error::{invalid, Error, Result};
use crate::fields::{DomainSpec, SpectralField, VelocityField, C64, ZERO};
use crate::krylov::{gmres, pcg, KrylovConfig, KrylovResult};
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    /// defaults to `10 (2M+1) N_z`
    pub max_iter: Option<usize>,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: None,
            restart: 300,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    fn max_iter(&self, d: &DomainSpec) -> usize {
        self.max_iter.unwrap_or(10 * d.n_modes() * d.n_z)
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 1e-14 && self.tol < 1e-4) {
            return invalid(format!("tol must lie in (1e-14, 1e-4), got {}", self.tol));
        }
        Ok(())
    }
}

/// Discrete operator `K + B` on Shen coefficients for a fixed flow.
pub struct TransportOperator {
    adv: Advector,
    domain: DomainSpec,
    rhs: DMatrix<C64>,
}

impl TransportOperator {
    pub fn new(u: &VelocityField) -> Self {
        let adv = Advector::new(u);
        let domain = u.domain().clone();
        let rhs = domain.gauss_to_loads(&u.u_z.at_gauss());
        TransportOperator { adv, domain, rhs }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn advector(&self) -> &Advector {
        &self.adv
    }

    /// Number of complex unknowns.
    pub fn dim(&self) -> usize {
        (self.domain.n_z - 2) * self.domain.n_modes()
    }

    fn shape(&self, x: &[C64]) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.domain.n_z - 2, self.domain.n_modes(), x)
    }

    /// `(K + B) x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let c = self.shape(x);
        let k = self.domain.helmholtz_apply_all(&c);
        let b = self.adv.apply_shen(&c);
        (k + b).as_slice().to_vec()
    }

    /// `B x` alone.
    pub fn apply_advection(&self, x: &[C64]) -> Vec<C64> {
        self.adv.apply_shen(&self.shape(x)).as_slice().to_vec()
    }

    pub fn apply_k(&self, x: &[C64]) -> Vec<C64> {
        self.domain.helmholtz_apply_all(&self.shape(x)).as_slice().to_vec()
    }

    pub fn solve_k(&self, x: &[C64]) -> Vec<C64> {
        let mut c = self.shape(x);
        self.domain.helmholtz_solve_all(&mut c);
        c.as_slice().to_vec()
    }

    /// Loads of `w`.
    pub fn rhs(&self) -> Vec<C64> {
        self.rhs.as_slice().to_vec()
    }

    /// Nodal field from Shen coefficients.
    pub fn field(&self, x: &[C64]) -> SpectralField {
        SpectralField::from_shen(&self.domain, &self.shape(x))
    }
}

fn require_flow(u: &VelocityField) -> Result<()> {
    let w = u.w();
    let scale = w.coeffs.camax().max(1e-300);
    if w.wall_defect() > 1e-9 * scale {
        return invalid("w must vanish at the walls");
    }
    Ok(())
}

fn failure(method: &str, r: KrylovResult) -> Error {
    Error::SolverFailure {
        method: method.into(),
        iterations: r.iterations,
        residual_history: r.history,
    }
}

#[derive(Debug, Clone)]
pub struct ThetaSolve {
    pub theta: SpectralField,
    pub iterations: usize,
    /// relative residual in the dual (H^-1) norm
    pub residual: f64,
}

/// Solve `u . grad theta = Lap theta + w`, `theta = 0` at the walls.
pub fn solve_steady_theta(u: &VelocityField, tol: f64) -> Result<SpectralField> {
    Ok(solve_steady_theta_with(u, &SolverOptions::with_tol(tol))?.theta)
}

pub fn solve_steady_theta_with(u: &VelocityField, opts: &SolverOptions) -> Result<ThetaSolve> {
    opts.check()?;
    require_flow(u)?;
    let op = TransportOperator::new(u);
    solve_theta_op(&op, opts, None)
}

fn solve_theta_op(op: &TransportOperator, opts: &SolverOptions, x0: Option<Vec<C64>>) -> Result<ThetaSolve> {
    let cfg = KrylovConfig {
        tol: opts.tol,
        max_iter: opts.max_iter(op.domain()),
        restart: opts.restart,
    };
    let r = gmres(
        |x| op.apply(x),
        |x| op.solve_k(x),
        |x| op.apply_k(x),
        &op.rhs(),
        x0,
        cfg,
    );
    if !r.converged {
        return Err(failure("gmres", r));
    }
    Ok(ThetaSolve {
        theta: op.field(&r.x),
        iterations: r.iterations,
        residual: r.residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectNu {
    /// `1 + avg(w theta)`
    pub nu: f64,
    /// `avg |grad T|^2`
    pub nu_gradient: f64,
    pub iterations: usize,
    pub residual: f64,
    /// most negative `T` or largest `T - 1` on the collocation grid
    pub max_principle_overshoot: f64,
}

/// `1 + avg(w theta)`.
pub fn nu_direct(u: &VelocityField) -> Result<f64> {
    Ok(nu_direct_with(u, &SolverOptions::default())?.nu)
}

pub fn nu_direct_with(u: &VelocityField, opts: &SolverOptions) -> Result<DirectNu> {
    opts.check()?;
    require_flow(u)?;
    let op = TransportOperator::new(u);
    let mut o = *opts;
    let mut sol = solve_theta_op(&op, &o, None)?;
    loop {
        let (nu, nu_g) = nu_pair(u, &sol.theta);
        let gap = (nu - nu_g).abs() / nu;
        if gap <= 10.0 * opts.tol || o.tol <= 2e-14 {
            if gap > 10.0 * opts.tol {
                return Err(Error::Invariant {
                    name: "nu-identity".into(),
                    detail: format!("1 + <w theta> = {nu}, <|grad T|^2> = {nu_g}"),
                });
            }
            let overshoot = max_principle_overshoot(&sol.theta);
            if overshoot > 1e-6 {
                log::warn!("temperature leaves [0, 1] by {overshoot:.3e} at collocation points");
            }
            return Ok(DirectNu {
                nu,
                nu_gradient: nu_g,
                iterations: sol.iterations,
                residual: sol.residual,
                max_principle_overshoot: overshoot,
            });
        }
        // tighten and continue from the current iterate
        o.tol = (o.tol * 1e-2).max(2e-14);
        let x0 = sol.theta.to_shen().as_slice().to_vec();
        let it = sol.iterations;
        sol = solve_theta_op(&op, &o, Some(x0))?;
        sol.iterations += it;
    }
}

fn nu_pair(u: &VelocityField, theta: &SpectralField) -> (f64, f64) {
    let d = &theta.domain;
    let lift = SpectralField::from_fn(d, |_, z| 1.0 - z);
    let t = theta.add(&lift);
    (1.0 + u.w().inner(theta), t.grad_square())
}

fn max_principle_overshoot(theta: &SpectralField) -> f64 {
    let d = &theta.domain;
    let phys = d.to_physical(&theta.coeffs);
    let nx = d.nx();
    let mut worst: f64 = 0.0;
    for (j, z) in d.z_grid.iter().enumerate() {
        for v in &phys[j * nx..(j + 1) * nx] {
            let t = v + 1.0 - z;
            worst = worst.max(-t).max(t - 1.0);
        }
    }
    worst
}

/// Solve `u . grad eta = Lap xi + w`, `u . grad xi = Lap eta` with
/// homogeneous Dirichlet data.
pub fn solve_symmetrized(u: &VelocityField, tol: f64) -> Result<(SpectralField, SpectralField)> {
    let (eta, xi, _) = solve_symmetrized_with(u, &SolverOptions::with_tol(tol))?;
    Ok((eta, xi))
}

pub fn solve_symmetrized_with(
    u: &VelocityField,
    opts: &SolverOptions,
) -> Result<(SpectralField, SpectralField, KrylovResult)> {
    opts.check()?;
    require_flow(u)?;
    let op = TransportOperator::new(u);
    let n = op.dim();
    // unknown [eta; xi]; rows: B eta + K xi = f, K eta + B xi = 0
    let apply = |x: &[C64]| {
        let (e, s) = x.split_at(n);
        let (be, bs) = (op.apply_advection(e), op.apply_advection(s));
        let (ke, ks) = (op.apply_k(e), op.apply_k(s));
        let mut out: Vec<C64> = be.iter().zip(&ks).map(|(a, b)| a + b).collect();
        out.extend(ke.iter().zip(&bs).map(|(a, b)| a + b));
        out
    };
    let precond = |x: &[C64]| {
        let (r1, r2) = x.split_at(n);
        let mut out = op.solve_k(r2);
        out.extend(op.solve_k(r1));
        out
    };
    let metric = |x: &[C64]| {
        let mut out = op.apply_k(&x[..n]);
        out.extend(op.apply_k(&x[n..]));
        out
    };
    let mut rhs = op.rhs();
    rhs.extend(std::iter::repeat_n(ZERO, n));
    let cfg = KrylovConfig {
        tol: opts.tol,
        max_iter: 2 * opts.max_iter(op.domain()),
        restart: opts.restart,
    };
    let r = gmres(apply, precond, metric, &rhs, None, cfg);
    if !r.converged {
        return Err(failure("gmres (symmetrized)", r));
    }
    let eta = op.field(&r.x[..n]);
    let xi = op.field(&r.x[n..]);
    Ok((eta, xi, r))
}

fn require_wall_values(f: &SpectralField, bottom: f64, top: f64, what: &str) -> Result<()> {
    let d = &f.domain;
    let n = d.n_z;
    let mut bad: f64 = 0.0;
    for i in 0..d.n_modes() {
        let (b, t) = if d.mode(i) == 0 { (bottom, top) } else { (0.0, 0.0) };
        bad = bad
            .max((f.coeffs[(0, i)] - C64::new(b, 0.0)).norm())
            .max((f.coeffs[(n - 1, i)] - C64::new(t, 0.0)).norm());
    }
    if bad > 1e-10 {
        return invalid(format!("{what} violates its boundary values by {bad:.3e}"));
    }
    Ok(())
}

/// Primal functional `avg |grad eta|^2 + avg |grad Lap^{-1} div(u eta)|^2`
/// for `eta = 1` at `z = 0` and `eta = 0` at `z = 1`; an upper bound on Nu.
pub fn nu_primal(u: &VelocityField, eta: &SpectralField) -> Result<f64> {
    require_wall_values(eta, 1.0, 0.0, "eta")?;
    Ok(eta.grad_square() + advection_term_with(&Advector::new(u), eta))
}

/// Dual functional `1 + avg(2 w xi - |grad xi|^2 - |grad Lap^{-1} div(u xi)|^2)`
/// for `xi = 0` at the walls; a lower bound on Nu.
pub fn nu_dual(u: &VelocityField, xi: &SpectralField) -> Result<f64> {
    require_wall_values(xi, 0.0, 0.0, "xi")?;
    let adv = advection_term_with(&Advector::new(u), xi);
    Ok(1.0 + 2.0 * u.w().inner(xi) - xi.grad_square() - adv)
}

/// `1 + (avg w xi)^2 / (avg |grad xi|^2 + advection)`: the dual functional
/// maximised over rescalings of `xi`.
pub fn nu_dual_rescaled(u: &VelocityField, xi: &SpectralField) -> Result<f64> {
    require_wall_values(xi, 0.0, 0.0, "xi")?;
    let adv = advection_term_with(&Advector::new(u), xi);
    let den = xi.grad_square() + adv;
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 + u.w().inner(xi).powi(2) / den)
}

#[derive(Debug, Clone)]
pub struct VariationalSolve {
    pub value: f64,
    pub field: SpectralField,
    pub iterations: usize,
    pub residual: f64,
}

/// `(K + B^H K^{-1} B) x = b` by CG preconditioned with `K^{-1}`.
fn normal_solve(op: &TransportOperator, b: &[C64], opts: &SolverOptions, what: &str) -> Result<KrylovResult> {
    let a = |x: &[C64]| {
        let kx = op.apply_k(x);
        let bx = op.apply_advection(x);
        let kib = op.solve_k(&bx);
        // B^H = -B
        let bt = op.apply_advection(&kib);
        kx.iter().zip(&bt).map(|(p, q)| p - q).collect::<Vec<_>>()
    };
    let r = pcg(a, |x| op.solve_k(x), b, None, opts.tol, opts.max_iter(op.domain()));
    if !r.converged {
        return Err(failure(what, r));
    }
    Ok(r)
}

/// Minimise the primal functional over `eta = (1 - z) + eta_0`.
pub fn nu_primal_opt(u: &VelocityField) -> Result<f64> {
    Ok(nu_primal_opt_with(u, &SolverOptions::default())?.value)
}

pub fn nu_primal_opt_with(u: &VelocityField, opts: &SolverOptions) -> Result<VariationalSolve> {
    opts.check()?;
    require_flow(u)?;
    let op = TransportOperator::new(u);
    let kf = op.solve_k(&op.rhs());
    let b: Vec<C64> = op.apply_advection(&kf).iter().map(|v| -v).collect();
    let r = normal_solve(&op, &b, opts, "cg (primal)")?;
    let lift = SpectralField::from_fn(op.domain(), |_, z| 1.0 - z);
    let eta = op.field(&r.x).add(&lift);
    Ok(VariationalSolve {
        value: nu_primal(u, &eta)?,
        field: eta,
        iterations: r.iterations,
        residual: r.residual,
    })
}

/// Maximise the dual functional over `xi` vanishing at the walls.
pub fn nu_dual_opt(u: &VelocityField) -> Result<f64> {
    Ok(nu_dual_opt_with(u, &SolverOptions::default())?.value)
}

pub fn nu_dual_opt_with(u: &VelocityField, opts: &SolverOptions) -> Result<VariationalSolve> {
    opts.check()?;
    require_flow(u)?;
    let op = TransportOperator::new(u);
    let r = normal_solve(&op, &op.rhs(), opts, "cg (dual)")?;
    let xi = op.field(&r.x);
    Ok(VariationalSolve {
        value: nu_dual(u, &xi)?,
        field: xi,
        iterations: r.iterations,
        residual: r.residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub direct: f64,
    pub primal: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportReport {
    pub nu_direct: f64,
    pub nu_primal: f64,
    pub nu_dual: f64,
    pub pe_energy: f64,
    pub pe_enstrophy: f64,
    pub residuals: Residuals,
    pub nu_gradient: f64,
}

/// All three Nusselt numbers plus both intensity norms.
pub fn transport_report(u: &VelocityField, opts: &SolverOptions) -> Result<TransportReport> {
    let d = nu_direct_with(u, opts)?;
    let p = nu_primal_opt_with(u, opts)?;
    let q = nu_dual_opt_with(u, opts)?;
    Ok(TransportReport {
        nu_direct: d.nu,
        nu_primal: p.value,
        nu_dual: q.value,
        pe_energy: u.energy_norm(),
        pe_enstrophy: u.enstrophy_norm(),
        residuals: Residuals {
            direct: d.residual,
            primal: p.residual,
            dual: q.residual,
        },
        nu_gradient: d.nu_gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_domain, random_streamfunction, streamfunction_to_velocity};
    use rand::SeedableRng;

    fn flow(seed: u64, pe: f64) -> VelocityField {
        let d = build_domain(2.0 * std::f64::consts::PI, 3, 20).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        streamfunction_to_velocity(&random_streamfunction(&d, &mut rng, 5).scaled(pe))
    }

    #[test]
    fn zero_flow_is_conduction() {
        let u = flow(1, 0.0);
        assert_eq!(nu_direct(&u).unwrap(), 1.0);
        let th = solve_steady_theta(&u, 1e-10).unwrap();
        assert_eq!(th.coeffs.camax(), 0.0);
        let (e, x) = solve_symmetrized(&u, 1e-10).unwrap();
        assert_eq!(e.coeffs.camax() + x.coeffs.camax(), 0.0);
        let lin = SpectralField::from_fn(u.domain(), |_, z| 1.0 - z);
        assert!((nu_primal(&u, &lin).unwrap() - 1.0).abs() < 1e-13);
        assert_eq!(nu_dual(&u, &SpectralField::zeros(u.domain())).unwrap(), 1.0);
    }

    #[test]
    fn three_routes_agree() {
        let u = flow(2, 20.0);
        let r = transport_report(&u, &SolverOptions::default()).unwrap();
        assert!(r.nu_direct > 1.0);
        assert!((r.nu_primal - r.nu_direct).abs() < 1e-8 * r.nu_direct, "{r:?}");
        assert!((r.nu_dual - r.nu_direct).abs() < 1e-8 * r.nu_direct, "{r:?}");
        assert!((r.nu_gradient - r.nu_direct).abs() < 1e-9 * r.nu_direct);
    }

    #[test]
    fn symmetrized_identities() {
        let u = flow(3, 30.0);
        let nu = nu_direct(&u).unwrap();
        let (eta, xi) = solve_symmetrized(&u, 1e-11).unwrap();
        let theta = solve_steady_theta(&u, 1e-11).unwrap();
        let scale = eta.grad_square() + xi.grad_square();
        assert!(eta.grad_inner(&xi).abs() < 1e-8 * scale);
        assert!(((nu - 1.0) - scale).abs() < 1e-8 * nu);
        assert!((&theta.coeffs - &(&eta.coeffs + &xi.coeffs)).camax() < 1e-8 * theta.coeffs.camax());
        let theta_minus = solve_steady_theta(&u.scaled(-1.0), 1e-11).unwrap();
        assert!((&theta_minus.coeffs - &(&eta.coeffs - &xi.coeffs)).camax() < 1e-8 * theta.coeffs.camax());
        let nu_minus = nu_direct(&u.scaled(-1.0)).unwrap();
        assert!((nu - nu_minus).abs() < 1e-9 * nu);
    }

    #[test]
    fn sandwich_with_trial_functions() {
        let u = flow(4, 15.0);
        let nu = nu_direct(&u).unwrap();
        let d = u.domain().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let pert = random_streamfunction(&d, &mut rng, 4).scaled(0.3);
            let lin = SpectralField::from_fn(&d, |_, z| 1.0 - z);
            let eta = lin.add(&pert);
            assert!(nu_primal(&u, &eta).unwrap() >= nu - 1e-10);
            assert!(nu_dual(&u, &pert).unwrap() <= nu + 1e-10);
            assert!(nu_dual_rescaled(&u, &pert).unwrap() <= nu + 1e-10);
        }
    }

    #[test]
    fn bad_boundary_values_rejected() {
        let u = flow(5, 1.0);
        let eta = SpectralField::from_fn(u.domain(), |_, z| 0.5 - z);
        assert!(matches!(nu_primal(&u, &eta), Err(Error::InvalidArgument(_))));
        assert!(solve_steady_theta(&u, 1e-3).is_err());
    }
}
