//! The five subcommands. Each returns the lines of its stdout summary.

use std::f64::consts::PI;
use std::fs;
use std::sync::Arc;

use diskreeb_core::calabi::{calabi_via_hamiltonian, CalabiValue};
use diskreeb_core::diskforms::DensityForm;
use diskreeb_core::poly::Poly2;
use diskreeb_core::hamflow::{
    EnvelopedPoly, HamiltonianIsotopy, Identity, RadialFlow, RadialHamiltonian, RadialProfile, SharedIsotopy,
    ZeroHamiltonian,
};
use diskreeb_core::maximizer::{build_counterexample, MaximizerConstruction};
use diskreeb_core::reebsys::{
    suspension_orbit, systolic_ratio_with, CensusOptions, IdentityMap, SuspensionReport,
};
use diskreeb_core::striplift::{
    calabi_from_w, find_negative_fixed_point, generating_function, lift_map, Closedness, FixedPointOptions, FixedPointReport,
    GenFunOptions, LiftOptions,
};
use diskreeb_core::C;
use serde::Serialize;

use crate::config::{RunConfig, Target};
use crate::files::{packing_csv, write_csv, write_json, ConstructionFile};
use crate::suite::{run_suite, SuiteOptions};
use crate::Failure;

pub type Summary = Vec<String>;

/// `max |phi(z) - z|` over the construction's sample points.
fn sup_distance(cx: &MaximizerConstruction, grid: usize) -> f64 {
    cx.sample_points(grid, 2 * grid, 8).into_iter().map(|z| (cx.phi(z) - z).norm()).fold(0.0, f64::max)
}

/// The construction named by `--input` or, failing that, by the parameters.
fn load_construction(cfg: &RunConfig) -> Result<MaximizerConstruction, Failure> {
    match &cfg.input {
        Some(path) => ConstructionFile::read(path)?.rebuild(),
        None => match cfg.target()? {
            Target::Construction(p) => Ok(build_counterexample(&p)?),
            Target::Identity => Err(Failure::config("the identity map has no construction")),
        },
    }
}

pub fn construct(cfg: &RunConfig) -> Result<Summary, Failure> {
    let params = cfg.params()?;
    let cx = build_counterexample(&params)?;
    let sup = sup_distance(&cx, cfg.grid.unwrap_or(100));
    let file = ConstructionFile::new(&cx, sup);
    let dir = cfg.out_dir();
    let json = write_json(&dir, "construction.json", &file)?;
    let csv_path = dir.join("packing.csv");
    fs::write(&csv_path, packing_csv(&cx)?).map_err(|e| Failure::numeric(format!("cannot write {}: {e}", csv_path.display())))?;
    Ok(vec![
        format!("variant      {}", params.variant.name()),
        format!("CAL          {:.12} (two-route gap {:.3e})", cx.cal.value, cx.cal.error_estimate),
        format!("CAL bound    {:.12}", cx.cal_bound()),
        format!("density      {:.6} ({} disks per sector)", cx.packing.density, cx.packing.sector_len),
        format!("|phi - id|   {:.6} (bound {:.6})", sup, file.sup_distance_bound),
        format!("wrote        {} and {}", json.display(), csv_path.display()),
    ])
}

#[derive(Serialize)]
struct SystolicFile<'a> {
    variant: &'a str,
    report: &'a SuspensionReport,
    /// Set when `T_min^2 > vol`.
    classification: Option<&'static str>,
    volume_gap: f64,
    volume_tolerance: f64,
    tol_fix: f64,
}

pub fn systolic(cfg: &RunConfig) -> Result<Summary, Failure> {
    let k_max = cfg.kmax.unwrap_or(8);
    let grid = cfg.grid.unwrap_or(400);
    let opts = CensusOptions { k_max, nr: grid, ntheta: grid, ..CensusOptions::default() };
    let (label, report) = if cfg.input.is_none() && cfg.target()? == Target::Identity {
        ("identity".to_string(), systolic_ratio_with(&IdentityMap, &opts)?)
    } else {
        let cx = load_construction(cfg)?;
        (cx.params.variant.name().to_string(), systolic_ratio_with(&cx, &opts)?)
    };
    let classification = report.exceeds_zoll().then_some("Hutchings-conjecture counterexample instance");
    let file = SystolicFile {
        variant: &label,
        report: &report,
        classification,
        volume_gap: (report.volume - report.volume_check).abs() / report.volume,
        volume_tolerance: 1e-4,
        tol_fix: opts.tol_fix,
    };
    let dir = cfg.out_dir();
    let json = write_json(&dir, "systolic.json", &file)?;
    let rows = report.census.entries.iter().map(|e| (e.x, e.y, e.k, e.period, e.family.clone().unwrap_or_default()));
    write_csv(&dir, "census.csv", &["x", "y", "k", "period", "family"], rows)?;
    let mut out = vec![
        format!("variant      {label}"),
        format!("volume       {:.12} (check {:.12})", report.volume, report.volume_check),
        format!("T_min        {:.12} (periods probed up to {})", report.t_min, report.t_min_certified_up_to),
        format!("rho_sys      {:.12}", report.rho_sys),
        format!("tau range    [{:.6}, {:.6}]", report.tau_min, report.tau_max),
    ];
    if let Some(c) = classification {
        out.push(format!("flag         {c}"));
    }
    out.push(format!("wrote        {}", json.display()));
    Ok(out)
}

#[derive(Serialize)]
struct GenFunFile {
    map: String,
    w_bottom: f64,
    w_bottom_spread: f64,
    closedness: Closedness,
    closedness_tolerance: f64,
    /// `(W1)`, `(W2)` against central differences of `W`.
    gradient_residual: f64,
    gradient_tolerance: f64,
    cal_from_w: CalabiValue,
    cal_hamiltonian: CalabiValue,
    fixed_points: Vec<FixedPointReport>,
    negative_fixed_point: Option<FixedPointReport>,
    note: Option<String>,
}

/// A registered radially monotone map with its generator.
fn genfun_map(cfg: &RunConfig) -> Result<(String, SharedIsotopy, CalabiValue), Failure> {
    let form = DensityForm::standard();
    match cfg.map.as_deref().unwrap_or("rotation") {
        "rotation" => {
            let beta = cfg.beta.unwrap_or(0.3);
            let profile = RadialProfile::rotation(beta);
            let cal = calabi_via_hamiltonian(&RadialHamiltonian::centered(profile.clone()), &form)?;
            Ok((format!("rotation({beta})"), Arc::new(RadialFlow::centered(profile)), cal))
        }
        "identity" => Ok(("identity".into(), Arc::new(Identity), calabi_via_hamiltonian(&ZeroHamiltonian, &form)?)),
        "perturbed" => {
            let ham = EnvelopedPoly::autonomous(2, Poly2::new(vec![(0, 0, 0.02), (2, 0, -0.3), (0, 2, -0.2), (3, 0, 0.1)]));
            let cal = calabi_via_hamiltonian(&ham, &form)?;
            Ok(("perturbed".into(), Arc::new(HamiltonianIsotopy::new(ham, form, 300)), cal))
        }
        other => Err(Failure::config(format!("unknown map {other:?}; expected rotation, identity or perturbed"))),
    }
}

pub fn genfun(cfg: &RunConfig) -> Result<Summary, Failure> {
    let (name, iso, cal_h) = genfun_map(cfg)?;
    let form = DensityForm::standard();
    let grid = cfg.grid.unwrap_or(64);
    let lift = LiftOptions::grid(grid, 2 * grid);
    let gopts = GenFunOptions::default();
    let strip = lift_map(iso.clone(), &lift)?;
    let gf = generating_function(&strip, &form, &gopts)?;
    let cal_w = calabi_from_w(&gf, &form);
    let fixed_points = gf.fixed_points(24)?;
    let fp_opts = FixedPointOptions { lift, genfun: gopts, ..FixedPointOptions::default() };
    let (negative_fixed_point, note) = if cal_w.value <= fp_opts.tol_cal && strip.max_displacement >= 1e-12 {
        (find_negative_fixed_point(iso, &form, &fp_opts)?, None)
    } else {
        (None, Some("negative fixed point search needs CAL <= 0 and a map other than the identity".to_string()))
    };
    let file = GenFunFile {
        map: name.clone(),
        w_bottom: gf.bottom_value(),
        w_bottom_spread: gf.bottom_spread(),
        closedness: gf.closedness,
        closedness_tolerance: 1e-5,
        gradient_residual: gf.gradient_residual(16, 1e-4)?,
        gradient_tolerance: 1e-6,
        cal_from_w: cal_w,
        cal_hamiltonian: cal_h,
        fixed_points,
        negative_fixed_point,
        note,
    };
    let dir = cfg.out_dir();
    let json = write_json(&dir, "genfun.json", &file)?;
    // `+ 0.0` folds negative zeros.
    let rows = gf.node_grid().into_iter().map(|(r, t, big_r, w)| (r, t, big_r, w + 0.0));
    write_csv(&dir, "genfun_w.csv", &["r", "theta", "R", "W"], rows)?;
    let mut out = vec![
        format!("map          {name}"),
        format!("W(0, .)      {:.12} (spread {:.3e})", file.w_bottom, file.w_bottom_spread),
        format!("closedness   curl {:.3e}, path gap {:.3e}", file.closedness.max_curl, file.closedness.path_gap),
        format!("gradient     {:.3e} vs central differences", file.gradient_residual),
        format!("CAL via W    {:.12} (Hamiltonian {:.12})", cal_w.value, cal_h.value),
    ];
    if let Some(fp) = &file.negative_fixed_point {
        out.push(format!("fixed point  z = ({:.9}, {:.9}), action {:.9}, residual {:.3e}", fp.z.re, fp.z.im, fp.action, fp.residual));
    }
    out.push(format!("wrote        {}", json.display()));
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<Summary, Failure> {
    let mut opts = SuiteOptions::default();
    if let Some(seed) = cfg.seed {
        opts.seed = seed;
    }
    if cfg.variant.is_some() || cfg.input.is_some() {
        opts.construction = Some(load_construction(cfg)?);
    }
    let rows = run_suite(&opts)?;
    let dir = cfg.out_dir();
    write_json(&dir, "verify.json", &rows)?;
    let mut out: Summary = rows
        .iter()
        .map(|r| format!("{:<4} {:<48} {:>14.6e} {:>10.1e}  {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.measured, r.tolerance, r.note))
        .collect();
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::verification(format!("{}\n{failed} of {} checks failed", out.join("\n"), rows.len())));
    }
    out.push(format!("all {} checks passed", rows.len()));
    Ok(out)
}

pub fn orbit(cfg: &RunConfig) -> Result<Summary, Failure> {
    let z0 = C::new(cfg.x0.unwrap_or(0.3), cfg.y0.unwrap_or(0.0));
    if z0.norm() > 1.0 {
        return Err(Failure::config(format!("start point {z0} lies outside the closed disk")));
    }
    let t_total = cfg.t_total.unwrap_or(4.0 * PI);
    let per_leg = cfg.per_leg.unwrap_or(8);
    let trace = if cfg.input.is_none() && cfg.target()? == Target::Identity {
        suspension_orbit(&IdentityMap, z0, t_total)?
    } else {
        let cx = load_construction(cfg)?;
        suspension_orbit(&cx, z0, t_total)?
    };
    let rows = trace.rows(per_leg).into_iter().map(|[t, x, y, s]| (t, x, y, s));
    let path = write_csv(&cfg.out_dir(), "orbit.csv", &["t", "x", "y", "s"], rows)?;
    let (end, s) = trace.end;
    Ok(vec![
        format!("start        ({}, {})", z0.re, z0.im),
        format!("crossings    {}", trace.crossings().count()),
        format!("end          ({:.12}, {:.12}) at s = {:.12}", end.re, end.im, s),
        format!("wrote        {}", path.display()),
    ])
}
