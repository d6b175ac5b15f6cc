//! Convection rolls and branching flows, each paired with its test
//! function `xi`.

use crate::error::{invalid, Error, Result};
use crate::fields::{
    build_domain, streamfunction_to_velocity, DomainSpec, SpectralField, VelocityField, C64,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Amplitude of `Psi(x) = c0 cos x`, fixed by `avg (Psi')^2 = 1`.
pub const C0: f64 = SQRT_2;

/// Constant in the branching layer-count and bulk-wavenumber rules; logs are natural.
/// `(eps ln(1/eps))^{1/6}`.
pub fn log_scale(eps: f64) -> f64 {
    (eps * (1.0 / eps).ln()).powf(1.0 / 6.0)
}

/// Transition cutoff `f(t) = sqrt(1/2 - tanh(a)/2)`, `a = (t - 1/2) / (t^2 (1-t)^2)`,
/// extended by 1 for `t <= 0` and 0 for `t >= 1`.
pub fn cutoff_f(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = (t - 0.5) / (t * t * (1.0 - t) * (1.0 - t));
    // 1/2 - tanh(a)/2 = 1 / (1 + e^{2a})
    if a <= 0.0 {
        1.0 / (1.0 + (2.0 * a).exp()).sqrt()
    } else {
        (-a).exp() / (1.0 + (-2.0 * a).exp()).sqrt()
    }
}

pub fn cutoff_f_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let s = t * (1.0 - t);
    let a = (t - 0.5) / (s * s);
    let da = (3.0 * t * t - 3.0 * t + 1.0) / (s * s * s);
    // f = (1 + e^{2a})^{-1/2}, f' = -a' e^{2a} (1 + e^{2a})^{-3/2}
    let v = if a <= 0.0 {
        let e = (2.0 * a).exp();
        e / (1.0 + e).powf(1.5)
    } else {
        let e = (-2.0 * a).exp();
        e.sqrt() / (1.0 + e).powf(1.5)
    };
    -da * v
}

/// Overshoot weight of the boundary cutoff: positive root of `3 g^2 + 4 g - 5 = 0`.
pub fn g_gamma() -> f64 {
    (-4.0 + 76f64.sqrt()) / 6.0
}

/// Boundary cutoff `g(t) = (1 + cos pi t)/2 + gamma sin^2(pi t)` with `int_0^1 g^2 = 1`.
pub fn cutoff_g(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    0.5 * (1.0 + (PI * t).cos()) + g_gamma() * (PI * t).sin().powi(2)
}

pub fn cutoff_g_prime(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    -0.5 * PI * (PI * t).sin() + g_gamma() * PI * (2.0 * PI * t).sin()
}

/// Roll cutoff: rises from 0 at each wall to 1 over a layer of width `delta`.
pub fn roll_cutoff(delta: f64, z: f64) -> f64 {
    let d = z.min(1.0 - z);
    cutoff_f(1.0 - d / delta)
}

fn lattice_index(l_x: f64, l: f64) -> Result<usize> {
    let m = l_x / (2.0 * PI * l);
    let r = m.round();
    if r < 1.0 || (m - r).abs() > 1e-9 * m.max(1.0) {
        return invalid(format!(
            "1/l = {} is not a multiple of 2 pi / l_x = {}",
            1.0 / l,
            2.0 * PI / l_x
        ));
    }
    Ok(r as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollParams {
    pub delta: f64,
    pub l: f64,
}

impl RollParams {
    pub fn new(delta: f64, l: f64) -> Result<Self> {
        let p = RollParams { delta, l };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return invalid(format!("delta must lie in (0, 1/2], got {}", self.delta));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return invalid(format!("l must be positive, got {}", self.l));
        }
        Ok(())
    }

    /// Fourier index of the roll on a domain of period `l_x`.
    pub fn mode_index(&self, l_x: f64) -> Result<usize> {
        lattice_index(l_x, self.l)
    }

    /// Domain holding exactly one roll period; averages are unchanged.
    pub fn unit_cell_domain(&self, m: usize, n_z: usize) -> Result<DomainSpec> {
        build_domain(2.0 * PI * self.l, m, n_z)
    }

    /// `N_z` with 20 nodes in each boundary layer.
    pub fn suggested_n_z(&self) -> usize {
        resolve_layer(self.delta, 20)
    }

    /// `delta = eps^{1/2}`, `l` the admissible value nearest `delta^{1/2}`
    /// from below.
    pub fn optimal(epsilon: f64, l_x: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        if epsilon >= 0.25 || epsilon > l_x.powi(4) {
            return Err(Error::Infeasible(format!(
                "epsilon = {epsilon} too large for a roll on l_x = {l_x}"
            )));
        }
        let delta = epsilon.sqrt();
        let m = (l_x / (2.0 * PI * delta.sqrt()) - 1e-9).ceil().max(1.0);
        RollParams::new(delta, l_x / (2.0 * PI * m))
    }
}

/// Smallest odd `N_z >= 17` putting `nodes` CGL nodes within `thickness`
/// of each wall.
pub fn resolve_layer(thickness: f64, nodes: usize) -> usize {
    let t = thickness.clamp(1e-12, 0.5);
    let n = (PI * nodes as f64 / (1.0 - 2.0 * t).acos()).ceil() as usize + 1;
    (n | 1).max(17)
}

pub fn roll_optimal_params(epsilon: f64, domain: &DomainSpec) -> Result<RollParams> {
    RollParams::optimal(epsilon, domain.l_x)
}

/// Roll streamfunction `chi(z) l^{1/2} c0 cos(x/l)` and
/// `xi = chi(z) l^{1/2} Psi'(x/l)` rescaled so that `avg(w xi) = 1`.
pub fn build_roll(params: &RollParams, domain: &DomainSpec) -> Result<(VelocityField, SpectralField)> {
    params.check()?;
    let m = params.mode_index(domain.l_x)?;
    if m > domain.m {
        return Err(Error::Resolution(format!(
            "roll mode {m} exceeds cutoff M = {}",
            domain.m
        )));
    }
    let (delta, l) = (params.delta, params.l);
    let amp = l.sqrt() * C0 / 2.0;
    let psi_prof = |z: f64| C64::new(roll_cutoff(delta, z) * amp, 0.0);
    // Psi'(x) = -c0 sin x = Re(i c0 e^{ix})
    let xi_prof = |z: f64| C64::new(0.0, roll_cutoff(delta, z) * amp);
    let psi = SpectralField::from_mode_profiles(domain, &[(m, &psi_prof)])?;
    let xi = SpectralField::from_mode_profiles(domain, &[(m, &xi_prof)])?;
    let u = streamfunction_to_velocity(&psi);
    let flux = u.w().inner(&xi);
    Ok((u, xi.scaled(1.0 / flux)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingParams {
    pub n: usize,
    pub z_k: Vec<f64>,
    pub l_k: Vec<f64>,
    pub k_bulk: usize,
    pub c1: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

/// Constant standing in for the unspecified `~` and `<~` relations.
pub const SIMILARITY_CONSTANT: f64 = 8.0;

impl BranchingParams {
    /// Parameters interpolating `ell(z) = eps^{1/6} log^{1/6}(1/eps) (1-z)^{1/2}`.
    pub fn compute(epsilon: f64, l_x: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Infeasible(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(l_x > 0.0) {
            return invalid(format!("l_x must be positive, got {l_x}"));
        }
        let s = log_scale(epsilon);
        let kb = ((l_x / PI) / s - 1e-12).ceil();
        if kb < 1.0 {
            return Err(Error::Infeasible(format!("k_bulk = {kb} < 1")));
        }
        let k_bulk = kb as usize;
        let l_bulk = l_x / (2.0 * PI * k_bulk as f64);
        let c1 = (l_bulk / s).powi(2);
        let arg = (2.0 * PI / (s * s)) / k_bulk as f64;
        let n = (arg.log2() - 1e-12).ceil().max(1.0) as usize;
        if n < 2 {
            log::warn!("branching at epsilon = {epsilon} has a single layer; the design is a roll");
        }
        let l_k: Vec<f64> = (0..n).map(|k| l_bulk / 2f64.powi(k as i32)).collect();
        let z_k: Vec<f64> = (0..n).map(|k| 1.0 - c1 / 4f64.powi(k as i32)).collect();
        Ok(BranchingParams {
            n,
            z_k,
            l_k,
            k_bulk,
            c1,
            epsilon,
        })
    }

    /// Same bulk wavenumber and `c1` with `n` levels instead.
    pub fn with_layers(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("need at least one level");
        }
        let l_bulk = self.l_bulk();
        Ok(BranchingParams {
            n,
            z_k: (0..n).map(|k| 1.0 - self.c1 / 4f64.powi(k as i32)).collect(),
            l_k: (0..n).map(|k| l_bulk / 2f64.powi(k as i32)).collect(),
            ..self.clone()
        })
    }

    pub fn l_bulk(&self) -> f64 {
        self.l_k[0]
    }

    pub fn l_bl(&self) -> f64 {
        self.l_k[self.n - 1]
    }

    pub fn z_bulk(&self) -> f64 {
        self.z_k[0]
    }

    pub fn z_bl(&self) -> f64 {
        self.z_k[self.n - 1]
    }

    /// Period the parameters were computed for.
    pub fn l_x(&self) -> f64 {
        2.0 * PI * self.k_bulk as f64 * self.l_bulk()
    }

    /// Layer thicknesses: `z_{k+1} - z_k`, then `1 - z_n` for the boundary layer.
    pub fn deltas(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.z_k.windows(2).map(|w| w[1] - w[0]).collect();
        d.push(1.0 - self.z_bl());
        d
    }

    /// Continuous lengthscale the parameters interpolate.
    pub fn ell(&self, z: f64) -> f64 {
        log_scale(self.epsilon) * (1.0 - z).max(0.0).sqrt()
    }

    /// Largest `ell'` on `[z_bulk, z_bl]`.
    pub fn ell_prime_max(&self) -> f64 {
        0.5 * log_scale(self.epsilon) / (1.0 - self.z_bl()).sqrt()
    }

    /// Fourier indices of the levels on a domain of period `l_x`.
    pub fn mode_indices(&self, l_x: f64) -> Result<Vec<usize>> {
        self.l_k.iter().map(|&l| lattice_index(l_x, l)).collect()
    }

    /// Mode indices `(sum, diff)` of the interactions between adjacent levels.
    pub fn interaction_indices(&self, l_x: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        let m = self.mode_indices(l_x)?;
        let sum = m.windows(2).map(|w| w[0] + w[1]).collect();
        let diff = m.windows(2).map(|w| w[1].abs_diff(w[0])).collect();
        Ok((sum, diff))
    }

    /// Smallest `M` accepted by [`build_branching_from`] on period `l_x`.
    pub fn required_modes(&self, l_x: f64) -> Result<usize> {
        let m = self.mode_indices(l_x)?;
        Ok(if self.n >= 2 {
            2 * (m[self.n - 1] + m[self.n - 2])
        } else {
            2 * m[0]
        })
    }

    /// Domain holding one bulk period; level `j` sits at mode `2^{j-1}`.
    pub fn unit_cell_domain(&self, n_z: usize) -> Result<DomainSpec> {
        let l_x = 2.0 * PI * self.l_bulk();
        build_domain(l_x, self.required_modes(l_x)?, n_z)
    }

    /// `N_z` with 20 nodes in the thinnest layer.
    pub fn suggested_n_z(&self) -> usize {
        resolve_layer(self.deltas().into_iter().fold(f64::INFINITY, f64::min), 20)
    }

    /// `chi_j(z)` for every level, symmetric about `z = 1/2`.
    pub fn cutoffs(&self, z: f64) -> Vec<f64> {
        let z = if z < 0.5 { 1.0 - z } else { z };
        let n = self.n;
        let mut chi = vec![0.0; n];
        if z <= self.z_k[0] {
            chi[0] = 1.0;
        } else if z >= self.z_k[n - 1] {
            let t = (z - self.z_k[n - 1]) / (1.0 - self.z_k[n - 1]);
            chi[n - 1] = cutoff_g(t);
        } else {
            let j = self.z_k.partition_point(|&zk| zk <= z) - 1;
            let d = self.z_k[j + 1] - self.z_k[j];
            chi[j] = cutoff_f((z - self.z_k[j]) / d);
            chi[j + 1] = cutoff_f((self.z_k[j + 1] - z) / d);
        }
        chi
    }
}

/// Every violated structural constraint, each named after the relation it breaks.
pub fn validate_branching(p: &BranchingParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let c = SIMILARITY_CONSTANT;
    let mut push = |constraint: &'static str, detail: String| out.push(Violation { constraint, detail });
    if p.n == 0 || p.z_k.len() != p.n || p.l_k.len() != p.n {
        push("shape", format!("n = {}, |z_k| = {}, |l_k| = {}", p.n, p.z_k.len(), p.l_k.len()));
        return out;
    }
    let mut chain = vec![0.5];
    chain.extend(&p.z_k);
    chain.push(1.0);
    if let Some(i) = chain.windows(2).position(|w| !(w[0] < w[1])) {
        push("zk_inequalities", format!("not strictly increasing at position {i}: {:?}", p.z_k));
    }
    if p.l_k.iter().any(|&l| !(l > 0.0)) || p.l_k.windows(2).any(|w| !(w[0] > w[1])) {
        push("lk_inequalities", format!("l_k not strictly decreasing and positive: {:?}", p.l_k));
    }
    for (k, w) in p.l_k.windows(2).enumerate() {
        if (w[1] - 0.5 * w[0]).abs() > 1e-12 * w[0] {
            push("l_relations", format!("l_{} / l_{} = {}", k + 2, k + 1, w[1] / w[0]));
        }
    }
    let d = p.deltas();
    if d.iter().all(|&x| x > 0.0) {
        for k in 1..p.n.saturating_sub(1) {
            if d[k] > c * d[k - 1] {
                push("assumption2-0", format!("delta_{} = {} exceeds {c} delta_{}", k + 1, d[k], k));
            }
        }
        for k in 0..p.n - 1 {
            if p.l_k[k] > c * d[k] {
                push("assumption2-1", format!("l_{} = {} exceeds {c} delta_{}", k + 1, p.l_k[k], k + 1));
            }
        }
        let r = d[p.n - 1] / p.l_bl();
        if !(1.0 / c..=c).contains(&r) {
            push("assumption2-1", format!("delta_n / l_n = {r}"));
        }
    }
    if !(p.z_k[0] - 0.5 >= 1.0 / c) {
        push("assumption3", format!("z_1 - 1/2 = {}", p.z_k[0] - 0.5));
    }
    match p.interaction_indices(p.l_x()) {
        Ok((sum, diff)) => {
            if let Some(s) = sum.iter().find(|s| diff.contains(s)) {
                push("nointerference", format!("mode {s} is both a sum and a difference"));
            }
        }
        Err(e) => push("lattice", e.to_string()),
    }
    out
}

/// Branching design on `domain`, with parameters computed from its period.
pub fn build_branching(
    epsilon: f64,
    domain: &DomainSpec,
) -> Result<(VelocityField, SpectralField, BranchingParams)> {
    let p = BranchingParams::compute(epsilon, domain.l_x)?;
    let (u, xi) = build_branching_from(&p, domain)?;
    Ok((u, xi, p))
}

/// Branching design for given parameters on any domain whose period is
/// commensurate with every `l_k`; `xi = w / avg(w^2)`.
pub fn build_branching_from(p: &BranchingParams, domain: &DomainSpec) -> Result<(VelocityField, SpectralField)> {
    let bad = validate_branching(p);
    if let Some(v) = bad.iter().find(|v| matches!(v.constraint, "shape" | "zk_inequalities" | "lk_inequalities")) {
        return invalid(format!("{}: {}", v.constraint, v.detail));
    }
    let modes = p.mode_indices(domain.l_x)?;
    let need = p.required_modes(domain.l_x)?;
    if domain.m < need {
        return Err(Error::Resolution(format!(
            "branching needs M >= {need}, domain has M = {}",
            domain.m
        )));
    }
    let thinnest = p.deltas().into_iter().fold(f64::INFINITY, f64::min);
    let inside = domain.z_grid.iter().filter(|&&z| z > 1.0 - thinnest).count();
    if inside < 4 {
        log::warn!("only {inside} z-nodes inside the thinnest layer ({thinnest:.3e})");
    }
    let profiles: Vec<Box<dyn Fn(f64) -> C64>> = (0..p.n)
        .map(|j| {
            let amp = p.l_k[j] * C0 / 2.0;
            let q = p.clone();
            Box::new(move |z: f64| C64::new(q.cutoffs(z)[j] * amp, 0.0)) as Box<dyn Fn(f64) -> C64>
        })
        .collect();
    let list: Vec<(usize, &dyn Fn(f64) -> C64)> =
        modes.iter().zip(&profiles).map(|(&m, f)| (m, f.as_ref())).collect();
    let psi = SpectralField::from_mode_profiles(domain, &list)?;
    let u = streamfunction_to_velocity(&psi);
    let w = u.w().clone();
    let xi = w.scaled(1.0 / w.mean_square());
    Ok((u, xi))
}

/// Serializable design description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DesignDescriptor {
    Roll(RollParams),
    Branching(BranchingParams),
}
