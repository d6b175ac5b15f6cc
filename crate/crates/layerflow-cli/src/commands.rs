use crate::config::{Design, GridKind, RunConfig};
use anyhow::{anyhow, bail, Context, Result};
use layerflow::advection::{advection_term, kernel_l1_bound_check, mode_decomposition, IntervalSet};
use layerflow::bounds::{
    check_lingrowth, energy_bound, energy_certificate, howard_lower_bound, howard_value, symmetrization_bound_min,
    u_symm, BoundCertificate, BoundOptions, EtaProfile, SpectralOptions,
};
use layerflow::designs::{
    build_branching_from, build_roll, BranchingParams, DesignDescriptor, RollParams,
};
use layerflow::optimizer::{efficiency_energy, efficiency_enstrophy, fit_scaling, EfficiencyReport, ScalingFit};
use layerflow::transport::{nu_direct_with, solve_symmetrized, transport_report, SolverOptions, TransportReport};
use layerflow::{
    build_domain, random_streamfunction, streamfunction_to_velocity, DomainParams, FieldJson, SpectralField,
    VelocityField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const CSV_HEADER: [&str; 12] = [
    "epsilon",
    "pe",
    "nu_direct",
    "nu_primal",
    "nu_dual",
    "E_total",
    "E_advection",
    "E_product",
    "n_layers",
    "l_bulk",
    "l_bl",
    "wall_time_s",
];

/// A named invariant that did not hold; maps to exit code 4.
#[derive(Debug)]
pub struct InvariantFailure {
    pub names: Vec<String>,
}

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant failure: {}", self.names.join(", "))
    }
}

impl std::error::Error for InvariantFailure {}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Flow scaled to the requested intensity, with the unscaled pair used for
/// the efficiency functional.
struct Built {
    descriptor: Option<DesignDescriptor>,
    u: VelocityField,
    pair: (VelocityField, SpectralField),
    n_layers: usize,
    l_bulk: f64,
    l_bl: f64,
    energy: bool,
}

fn scale_to(u: &VelocityField, pe: f64, energy: bool) -> Result<VelocityField> {
    let n = if energy { u.energy_norm() } else { u.enstrophy_norm() };
    if n == 0.0 {
        bail!("design has zero velocity");
    }
    Ok(u.scaled(pe / n))
}

fn build_from_descriptor(cfg: &RunConfig, d: DesignDescriptor, pe: f64) -> Result<Built> {
    match d {
        DesignDescriptor::Roll(p) => {
            let dom = p.unit_cell_domain(cfg.modes.unwrap_or(8), cfg.n_z.unwrap_or_else(|| p.suggested_n_z()))?;
            let (u, xi) = build_roll(&p, &dom)?;
            Ok(Built {
                descriptor: Some(DesignDescriptor::Roll(p)),
                u: scale_to(&u, pe, true)?,
                pair: (u, xi),
                n_layers: 1,
                l_bulk: p.l,
                l_bl: p.l,
                energy: true,
            })
        }
        DesignDescriptor::Branching(p) => {
            let l_x = 2.0 * std::f64::consts::PI * p.l_bulk();
            let m = match cfg.modes {
                Some(m) => m,
                None => p.required_modes(l_x)?,
            };
            let dom = build_domain(l_x, m, cfg.n_z.unwrap_or_else(|| p.suggested_n_z()))?;
            let (u, xi) = build_branching_from(&p, &dom)?;
            Ok(Built {
                u: scale_to(&u, pe, false)?,
                pair: (u, xi),
                n_layers: p.n,
                l_bulk: p.l_bulk(),
                l_bl: p.l_bl(),
                descriptor: Some(DesignDescriptor::Branching(p)),
                energy: false,
            })
        }
    }
}

fn build(cfg: &RunConfig, eps: f64, pe: f64) -> Result<Built> {
    match cfg.design {
        Design::Roll => build_from_descriptor(cfg, DesignDescriptor::Roll(RollParams::optimal(eps, cfg.l_x)?), pe),
        Design::Branching => build_from_descriptor(
            cfg,
            DesignDescriptor::Branching(BranchingParams::compute(eps, cfg.l_x)?),
            pe,
        ),
        Design::File => {
            let path = cfg.input.as_ref().ok_or_else(|| anyhow!("--design file needs --input"))?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            if let Ok(d) = serde_json::from_str::<DesignDescriptor>(&text) {
                return build_from_descriptor(cfg, d, pe);
            }
            let j: FieldJson = serde_json::from_str(&text)
                .with_context(|| format!("{} is neither a design descriptor nor a field", path.display()))?;
            let psi = SpectralField::from_json(&j)?;
            let u = streamfunction_to_velocity(&psi);
            let w = u.w().clone();
            let ms = w.mean_square();
            if ms == 0.0 {
                bail!("flow in {} has w = 0", path.display());
            }
            let xi = w.scaled(1.0 / ms);
            Ok(Built {
                descriptor: None,
                u: scale_to(&u, pe, false)?,
                pair: (u, xi),
                n_layers: 0,
                l_bulk: f64::NAN,
                l_bl: f64::NAN,
                energy: false,
            })
        }
    }
}

fn efficiency(b: &Built, eps: f64) -> Result<EfficiencyReport> {
    let (u, xi) = &b.pair;
    Ok(if b.energy {
        efficiency_energy(u, xi, eps)?
    } else {
        efficiency_enstrophy(u, xi, eps)?
    })
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

#[derive(Serialize)]
struct EvaluateReport {
    design: Option<DesignDescriptor>,
    domain: DomainParams,
    epsilon: f64,
    pe: f64,
    intensity_norm: &'static str,
    transport: TransportReport,
    efficiency: EfficiencyReport,
    implied_nu_lower: f64,
    wall_time_s: f64,
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let t = Instant::now();
    let (eps, pe) = cfg.points()[0];
    let b = build(cfg, eps, pe)?;
    let transport = transport_report(&b.u, &SolverOptions::with_tol(cfg.tol))?;
    let eff = efficiency(&b, eps)?;
    let r = EvaluateReport {
        design: b.descriptor.clone(),
        domain: b.u.domain().params(),
        epsilon: eps,
        pe,
        intensity_norm: if b.energy { "energy" } else { "enstrophy" },
        implied_nu_lower: eff.implied_nu_lower(),
        transport,
        efficiency: eff,
        wall_time_s: t.elapsed().as_secs_f64(),
    };
    write_out(cfg.out.as_deref(), &json(&r)?)
}

struct Row {
    eps: f64,
    pe: f64,
    t: TransportReport,
    e: EfficiencyReport,
    n_layers: usize,
    l_bulk: f64,
    l_bl: f64,
    secs: f64,
}

fn sweep_point(cfg: &RunConfig, eps: f64, pe: f64) -> Result<Row> {
    let t0 = Instant::now();
    let b = build(cfg, eps, pe)?;
    let t = transport_report(&b.u, &SolverOptions::with_tol(cfg.tol))?;
    let e = efficiency(&b, eps)?;
    log::info!("epsilon {eps:e}: Nu = {:.6}, E = {:.6e}", t.nu_direct, e.total_e);
    Ok(Row {
        eps,
        pe,
        t,
        e,
        n_layers: b.n_layers,
        l_bulk: b.l_bulk,
        l_bl: b.l_bl,
        secs: t0.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub design: Design,
    pub grid_kind: GridKind,
    pub points: usize,
    /// `nu_direct ~ pe^p`
    pub nu_vs_pe: Option<ScalingFit>,
    /// `E_total ~ epsilon^p`
    pub efficiency_vs_epsilon: Option<ScalingFit>,
}

fn try_fit(samples: &[(f64, f64)], what: &str) -> Option<ScalingFit> {
    match fit_scaling(samples) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("no {what} fit: {e}");
            None
        }
    }
}

/// Path of the JSON summary written next to a CSV.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    let pts = cfg.points();
    let rows: Vec<Result<Row>> = pool.install(|| pts.par_iter().map(|&(e, p)| sweep_point(cfg, e, p)).collect());
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &rows {
        let mut rec: Vec<String> = [
            r.eps,
            r.pe,
            r.t.nu_direct,
            r.t.nu_primal,
            r.t.nu_dual,
            r.e.total_e,
            r.e.advection,
            r.e.product(),
        ]
        .iter()
        .map(|&x| fmt_f64(x))
        .collect();
        rec.push(r.n_layers.to_string());
        rec.extend([r.l_bulk, r.l_bl, r.secs].iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    let summary = Summary {
        design: cfg.design,
        grid_kind: cfg.grid_kind,
        points: rows.len(),
        nu_vs_pe: try_fit(&rows.iter().map(|r| (r.pe, r.t.nu_direct)).collect::<Vec<_>>(), "Nu"),
        efficiency_vs_epsilon: try_fit(&rows.iter().map(|r| (r.eps, r.e.total_e)).collect::<Vec<_>>(), "E"),
    };
    write_out(cfg.out.as_deref(), &bytes)?;
    match &cfg.out {
        Some(p) => write_out(Some(&summary_path(p)), &json(&summary)?)?,
        None => eprintln!("{}", serde_json::to_string(&summary)?),
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let path = cfg.input.as_ref().ok_or_else(|| anyhow!("fit needs --input"))?;
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} has no column {name}", path.display()))
    };
    let (ce, cp, cn, ct) = (col("epsilon")?, col("pe")?, col("nu_direct")?, col("E_total")?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().with_context(|| format!("bad number {:?}", &rec[i]))
        };
        rows.push((num(ce)?, num(cp)?, num(cn)?, num(ct)?));
    }
    let nu: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.2)).collect();
    let e: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.3)).collect();
    let s = Summary {
        design: cfg.design,
        grid_kind: cfg.grid_kind,
        points: rows.len(),
        nu_vs_pe: Some(fit_scaling(&nu)?),
        efficiency_vs_epsilon: Some(fit_scaling(&e)?),
    };
    write_out(cfg.out.as_deref(), &json(&s)?)
}

#[derive(Serialize)]
struct BoundReport {
    design: Option<DesignDescriptor>,
    epsilon: f64,
    pe: f64,
    nu_direct: f64,
    certificates: Vec<BoundCertificate>,
}

pub fn bound(cfg: &RunConfig) -> Result<()> {
    let (eps, pe) = cfg.points()[0];
    let b = build(cfg, eps, pe)?;
    let nu = nu_direct_with(&b.u, &SolverOptions::with_tol(cfg.tol))?.nu;
    let mut certs = vec![energy_certificate(&b.u)];
    let sym = symmetrization_bound_min(&b.u, &BoundOptions::default())?;
    if let Some(delta) = sym.delta {
        // the same layer profile against every flow of this enstrophy
        let pe_ens = b.u.enstrophy_norm();
        certs.push(u_symm(&EtaProfile::layer(delta)?, pe_ens, &SpectralOptions::new(b.u.domain().l_x))?);
    }
    certs.insert(1, sym);
    let r = BoundReport {
        design: b.descriptor.clone(),
        epsilon: eps,
        pe,
        nu_direct: nu,
        certificates: certs,
    };
    write_out(cfg.out.as_deref(), &json(&r)?)
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    /// worst observed value
    value: f64,
    limit: f64,
    pass: bool,
}

fn at_most(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        value,
        limit,
        pass: value <= limit,
    }
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    seed: u64,
    checks: Vec<Check>,
    passed: bool,
}

fn random_flow(rng: &mut ChaCha8Rng, m: usize, n_z: usize) -> Result<VelocityField> {
    let d = build_domain(2.0 * std::f64::consts::PI, m, n_z)?;
    let pe = 10f64.powf(rng.random_range(0.0..2.0));
    Ok(streamfunction_to_velocity(&random_streamfunction(&d, rng, 5).scaled(pe)))
}

/// Invariant suite on seeded random flows plus one design of each family.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = SolverOptions::with_tol(cfg.tol.min(1e-11));
    let flows: Vec<VelocityField> = (0..4).map(|_| random_flow(&mut rng, 3, 25)).collect::<Result<_>>()?;
    let mut checks = Vec::new();

    let (mut dual_gap, mut direct_gap, mut order) = (0.0f64, 0.0f64, 0.0f64);
    let (mut orth, mut split) = (0.0f64, 0.0f64);
    for u in &flows {
        let t = transport_report(u, &opts)?;
        let nu = t.nu_direct;
        dual_gap = dual_gap.max((t.nu_primal - t.nu_dual).abs() / nu);
        direct_gap = direct_gap.max((t.nu_primal - nu).abs().max((t.nu_dual - nu).abs()) / nu);
        let sym = symmetrization_bound_min(u, &BoundOptions::default())?.value;
        order = order.max((nu - sym.min(energy_bound(u))) / nu);
        let (eta, xi) = solve_symmetrized(u, opts.tol)?;
        let (ge, gx) = (eta.grad_square(), xi.grad_square());
        orth = orth.max(eta.grad_inner(&xi).abs() / (ge + gx));
        split = split.max(((nu - 1.0) - (ge + gx)).abs() / (nu - 1.0));
    }
    checks.push(at_most("primal-dual-gap", dual_gap, 1e-6));
    checks.push(at_most("variational-vs-direct", direct_gap, 1e-5));
    checks.push(at_most("bounds-dominate-nu", order, 1e-9));
    checks.push(at_most("symmetrized-orthogonality", orth, 1e-8));
    checks.push(at_most("symmetrized-split", split, 1e-8));

    let roll = RollParams::optimal(1e-3, 2.0 * std::f64::consts::PI)?;
    let (ru, rxi) = build_roll(&roll, &roll.unit_cell_domain(4, roll.suggested_n_z())?)?;
    let br = BranchingParams::compute(1e-4, 2.0 * std::f64::consts::PI)?;
    let (bu, bxi) = build_branching_from(&br, &br.unit_cell_domain(br.suggested_n_z())?)?;
    let mut pairs: Vec<(VelocityField, SpectralField)> = flows
        .iter()
        .map(|u| {
            let xi = random_streamfunction(u.domain(), &mut rng, 5);
            let f = u.w().inner(&xi);
            (u.clone(), xi.scaled(1.0 / f))
        })
        .collect();
    pairs.push((ru.clone(), rxi.clone()));
    pairs.push((bu.clone(), bxi.clone()));
    let (mut decomp, mut gap) = (0.0f64, 0.0f64);
    for (u, xi) in &pairs {
        let a = advection_term(u, xi);
        let d = mode_decomposition(u, xi);
        decomp = decomp.max((a - d.k0_term - d.q_sum()).abs() / a);
        let e = efficiency_enstrophy(u, xi, 1e-4)?;
        gap = gap.max((e.total_e - howard_value(u, xi, 1e-4)? - d.q_sum()).abs() / e.total_e);
    }
    checks.push(at_most("mode-decomposition", decomp, 1e-10));
    checks.push(at_most("howard-gap", gap, 1e-10));

    let rd = mode_decomposition(&ru, &rxi);
    let rq = rd.q_terms.iter().map(|q| q.value.abs()).fold(0.0, f64::max) / advection_term(&ru, &rxi);
    checks.push(at_most("roll-q-vanishes", rq, 1e-12));
    checks.push(at_most("roll-net-flux", (ru.w().inner(&rxi) - 1.0).abs(), 1e-12));

    let (a, z) = (1.0 - br.z_bl(), br.z_bl());
    let part = (0..=1000)
        .map(|i| {
            let s: f64 = br.cutoffs(a + (z - a) * i as f64 / 1000.0).iter().map(|c| c * c).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max);
    checks.push(at_most("partition-of-unity", part, 1e-10));

    let mut lin = 0.0f64;
    for _ in 0..20 {
        let modes = rng.random_range(1..=4);
        let u = random_flow(&mut rng, modes, 25)?;
        let th = random_streamfunction(u.domain(), &mut rng, 5);
        lin = lin.max(check_lingrowth(u.w(), &th).0);
    }
    checks.push(at_most("linear-growth", lin, 4.0));
    let mut kern = 0.0f64;
    for i in 0..20 {
        let k = if i % 4 == 0 { 0.0 } else { 10f64.powf(rng.random_range(-1.0..2.0)) };
        let mut c: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        c.sort_by(f64::total_cmp);
        let set = IntervalSet::new(vec![(c[0], c[1]), (c[2], c[3])])?;
        let (l, r) = kernel_l1_bound_check(k, &set);
        kern = kern.max(l / r);
    }
    checks.push(at_most("kernel-l1", kern, 1.0));
    let hw = [(1e-3, &ru, &rxi), (1e-4, &bu, &bxi)]
        .iter()
        .map(|&(e, u, xi)| Ok(howard_lower_bound(e) / howard_value(u, xi, e)?))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(at_most("howard-lower-bound", hw, 1.0));

    let passed = checks.iter().all(|c| c.pass);
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    let report = ValidateReport {
        seed: cfg.seed,
        checks,
        passed,
    };
    write_out(cfg.out.as_deref(), &json(&report)?)?;
    if !passed {
        return Err(InvariantFailure { names: failed }.into());
    }
    Ok(())
}

/// Exit code for an error: 2 configuration, 3 solver, 4 invariant.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<InvariantFailure>().is_some() {
        return 4;
    }
    match e.downcast_ref::<layerflow::Error>() {
        Some(layerflow::Error::SolverFailure { .. } | layerflow::Error::OptimizerFailure { .. }) => 3,
        Some(layerflow::Error::Invariant { .. }) => 4,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn exit_codes() {
        let solver = layerflow::Error::SolverFailure {
            method: "gmres".into(),
            iterations: 1,
            residual_history: vec![1.0],
        };
        assert_eq!(exit_code(&solver.into()), 3);
        let inv = layerflow::Error::Invariant {
            name: "x".into(),
            detail: String::new(),
        };
        assert_eq!(exit_code(&inv.into()), 4);
        assert_eq!(exit_code(&InvariantFailure { names: vec![] }.into()), 4);
        assert_eq!(exit_code(&layerflow::Error::InvalidArgument("x".into()).into()), 2);
        assert_eq!(exit_code(&anyhow!("bad flag")), 2);
    }

    #[test]
    fn summary_next_to_csv() {
        assert_eq!(summary_path(Path::new("out/s.csv")), PathBuf::from("out/s.summary.json"));
    }
}
