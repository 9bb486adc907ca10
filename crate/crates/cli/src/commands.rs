use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use proxsampler::concentration::{verify_bound, BoundQuery, RGrid, DEFAULT_EPSILON};
use proxsampler::metrics::{
    integrate, moments_1d, tv_histogram_1d, w2_empirical_assignment, DEFAULT_ASSIGNMENT_CAP,
};
use proxsampler::potentials::{builtin, TargetParams};
use proxsampler::rgo::{rgo_batch, DEFAULT_MAX_PROPOSALS};
use proxsampler::rng::{self, StreamRng};
use proxsampler::sampler::{
    run_baseline_ensemble, run_ensemble, run_proximal_sampler, Baseline, SamplerOptions,
};
use proxsampler::stepsize::{eta_for, plan_run};
use proxsampler::{
    Assumption64, ClosedForm, Error, Metric, Plan64, Potential64, ProxMode, Real, RgoOptions, Term,
};

use crate::config::{Config, ConfigError};
use crate::table::{Cell, Table};

#[derive(Debug)]
pub enum CmdError {
    Config(ConfigError),
    /// A computation failed; `check` names the stage.
    Run {
        check: String,
        source: Error,
    },
    Io(PathBuf, std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 1,
            CmdError::Run { .. } | CmdError::Io(..) => 2,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(e) => write!(f, "config error: {e}"),
            CmdError::Run { check, source } => write!(f, "check `{check}` failed: {source}"),
            CmdError::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

type CmdResult<T> = Result<T, CmdError>;

fn run_err(check: &str) -> impl FnOnce(Error) -> CmdError + '_ {
    move |source| CmdError::Run {
        check: check.to_string(),
        source,
    }
}

fn setup_err<'a>(cfg: &'a Config, section: &str, key: &str) -> impl Fn(Error) -> CmdError + 'a {
    let section = section.to_string();
    let key = key.to_string();
    move |e| {
        CmdError::Config(
            cfg.invalid::<()>(&section, &key, e.to_string())
                .unwrap_err(),
        )
    }
}

/// Everything a command needs besides its own section.
pub struct Context {
    pub cfg: Config,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    fn write(&self, name: &str, table: &Table) -> CmdResult<()> {
        let path = self.out.join(name);
        table
            .write(&path, self.cfg.digest(), self.seed)
            .map_err(|e| CmdError::Io(path, e))
    }

    fn write_timing(&self, command: &str, secs: f64, work: u64) -> CmdResult<()> {
        let mut t = Table::new(["command", "wall_seconds", "work_units"]);
        t.push(vec![command.into(), secs.into(), work.into()]);
        self.write("timing.csv", &t)
    }
}

fn target(cfg: &Config) -> CmdResult<Potential64> {
    let name: String = cfg.require("target", "name")?;
    let params = TargetParams {
        dim: cfg.get("target", "dim")?,
        diag: cfg.get_list("target", "diag")?,
        b: cfg.get_list("target", "b")?,
        l0: cfg.get("target", "l0")?,
        width: cfg.get("target", "width")?,
        lambda: cfg.get("target", "lambda")?,
        mean: cfg.get_list("target", "mean")?,
    };
    builtin(&name, &params).map_err(setup_err(cfg, "target", "name"))
}

fn assumption(cfg: &Config) -> CmdResult<Assumption64> {
    let regime: String = cfg.require("assumption", "regime")?;
    let r = |k: &str| cfg.require::<f64>("assumption", k);
    let a = match regime.as_str() {
        "strongly_log_concave" | "slc" => Assumption64::StronglyLogConcave {
            beta: r("beta")?,
            kl_init: r("kl_init")?,
        },
        "log_concave" | "lc" => Assumption64::LogConcave {
            w2_init: r("w2_init")?,
        },
        "lsi" => Assumption64::Lsi {
            c_lsi: r("c_lsi")?,
            kl_init: r("kl_init")?,
        },
        "pi" => Assumption64::Pi {
            c_pi: r("c_pi")?,
            chi2_init: r("chi2_init")?,
        },
        other => {
            return Err(cfg
                .invalid::<()>(
                    "assumption",
                    "regime",
                    format!("unknown regime `{other}` (expected slc, lc, lsi or pi)"),
                )
                .unwrap_err()
                .into())
        }
    };
    a.validate()
        .map_err(setup_err(cfg, "assumption", "regime"))?;
    Ok(a)
}

fn mode(cfg: &Config) -> CmdResult<ProxMode> {
    match cfg
        .get_or::<String>("plan", "mode", "exact".into())?
        .as_str()
    {
        "exact" => Ok(ProxMode::Exact),
        "approx" => Ok(ProxMode::Approx),
        other => Err(cfg
            .invalid::<()>(
                "plan",
                "mode",
                format!("unknown mode `{other}` (expected exact or approx)"),
            )
            .unwrap_err()
            .into()),
    }
}

fn metric(cfg: &Config) -> CmdResult<Metric> {
    match cfg
        .get_or::<String>("plan", "metric", "tv".into())?
        .as_str()
    {
        "tv" => Ok(Metric::Tv),
        "w2" => Ok(Metric::W2),
        other => Err(cfg
            .invalid::<()>(
                "plan",
                "metric",
                format!("unknown metric `{other}` (expected tv or w2)"),
            )
            .unwrap_err()
            .into()),
    }
}

fn vector(cfg: &Config, section: &str, key: &str, d: usize) -> CmdResult<Vec<f64>> {
    match cfg.get_list::<f64>(section, key)? {
        None => Ok(vec![0.0; d]),
        Some(v) if v.len() == d => Ok(v),
        Some(v) => Err(cfg
            .invalid::<()>(
                section,
                key,
                format!(
                    "`{key}` has {} entries, the target has dimension {d}",
                    v.len()
                ),
            )
            .unwrap_err()
            .into()),
    }
}

fn positive(cfg: &Config, section: &str, key: &str, v: f64) -> CmdResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg
            .invalid::<()>(section, key, format!("`{key}` must be positive, got {v}"))
            .unwrap_err()
            .into())
    }
}

fn make_plan(cfg: &Config, p: &Potential64) -> CmdResult<(Plan64, Assumption64)> {
    let a = assumption(cfg)?;
    let delta: f64 = cfg.require("plan", "delta")?;
    let plan = plan_run(p, &a, delta, metric(cfg)?, mode(cfg)?).map_err(|e| match e {
        Error::InvalidInput(_) => setup_err(cfg, "plan", "delta")(e),
        e => run_err("plan")(e),
    })?;
    Ok((plan, a))
}

pub fn plan(ctx: &Context) -> CmdResult<bool> {
    let start = Instant::now();
    let p = target(&ctx.cfg)?;
    let (plan, a) = make_plan(&ctx.cfg, &p)?;
    println!(
        "regime={} eta={} T={} zeta={} delta={} metric={} mode={} rounds={}",
        a.name(),
        plan.eta,
        plan.t_steps,
        plan.zeta,
        plan.delta,
        plan.metric.as_str(),
        plan.mode.as_str(),
        plan.rounds
    );
    let mut t = Table::new([
        "regime", "eta", "T", "zeta", "delta", "metric", "mode", "rounds",
    ]);
    t.push(vec![
        a.name().into(),
        plan.eta.into(),
        plan.t_steps.into(),
        plan.zeta.into(),
        plan.delta.into(),
        plan.metric.as_str().into(),
        plan.mode.as_str().into(),
        plan.rounds.into(),
    ]);
    ctx.write("plan.csv", &t)?;
    ctx.write_timing("plan", start.elapsed().as_secs_f64(), plan.rounds as u64)?;
    Ok(true)
}

pub fn sample(ctx: &Context) -> CmdResult<bool> {
    let start = Instant::now();
    let cfg = &ctx.cfg;
    let p = target(cfg)?;
    let d = p.dim();
    let (mut plan, _) = make_plan(cfg, &p)?;
    if let Some(steps) = cfg.get::<u64>("sample", "steps")? {
        plan = Plan64::manual(plan.eta, steps, plan.delta, plan.metric, plan.mode)
            .map_err(setup_err(cfg, "sample", "steps"))?;
    }
    let x0 = vector(cfg, "sample", "x0", d)?;
    let mut opts = SamplerOptions::for_plan(&p, &plan);
    if let Some(stride) = cfg.get::<u64>("sample", "record_stride")? {
        if stride == 0 {
            return Err(cfg
                .invalid::<()>(
                    "sample",
                    "record_stride",
                    "`record_stride` must be at least 1",
                )
                .unwrap_err()
                .into());
        }
        opts.record_stride = stride;
    }
    opts.rgo.closed_form = cfg.get_or("sample", "closed_form", true)?;
    let trace = run_proximal_sampler(&p, &plan, &x0, ctx.seed, &opts).map_err(run_err("sample"))?;

    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    let mut t = Table::new(header);
    for (step, x) in &trace.samples {
        let mut row: Vec<Cell> = vec![(*step).into()];
        row.extend(x.iter().map(|&v| Cell::from(v)));
        t.push(row);
    }
    ctx.write("trace.csv", &t)?;

    // moments over the second half of the recorded states
    let tail: Vec<&Vec<f64>> = trace
        .samples
        .iter()
        .filter(|(s, _)| *s > plan.t_steps / 2)
        .map(|(_, x)| x)
        .collect();
    let mut s = Table::new(["quantity", "value"]);
    s.push(vec!["T".into(), plan.t_steps.into()]);
    s.push(vec!["eta".into(), plan.eta.into()]);
    s.push(vec!["zeta".into(), plan.zeta.into()]);
    s.push(vec!["mode".into(), plan.mode.as_str().into()]);
    s.push(vec!["mean_proposals".into(), trace.mean_proposals().into()]);
    let prox_iters: u64 = trace.per_step.iter().map(|st| st.prox_iters as u64).sum();
    s.push(vec!["total_prox_iters".into(), prox_iters.into()]);
    s.push(vec!["moment_samples".into(), tail.len().into()]);
    if tail.len() >= 2 {
        for i in 0..d {
            let xs: Vec<f64> = tail.iter().map(|x| x[i]).collect();
            let m = moments_1d(&xs).map_err(run_err("moments"))?;
            s.push(vec![format!("mean_x{i}").into(), m.mean.into()]);
            s.push(vec![format!("var_x{i}").into(), m.var.into()]);
        }
    }
    ctx.write("summary.csv", &s)?;
    ctx.write_timing("sample", start.elapsed().as_secs_f64(), plan.t_steps)?;
    println!(
        "T={} eta={} mean_proposals={:.4}",
        plan.t_steps,
        plan.eta,
        trace.mean_proposals()
    );
    Ok(true)
}

/// Per-coordinate `f_i` when the potential is a sum of one-dimensional
/// pieces.
fn coordinate_energy(p: &Potential64) -> Option<Box<dyn Fn(usize, f64) -> f64 + Sync>> {
    match ClosedForm::detect(p)? {
        ClosedForm::Separable { diag, lin, lambda } => Some(Box::new(move |i, x: f64| {
            0.5 * diag[i] * x * x - lin[i] * x + lambda * x.abs()
        })),
        ClosedForm::Huber { width } => Some(Box::new(move |_, x: f64| {
            let a = x.abs();
            if a <= width {
                0.5 * x * x / width
            } else {
                a - 0.5 * width
            }
        })),
        ClosedForm::Norm { l0 } if p.dim() == 1 => Some(Box::new(move |_, x: f64| l0 * x.abs())),
        _ => None,
    }
}

struct Reference {
    mean: f64,
    var: f64,
    density: Box<dyn Fn(f64) -> f64 + Sync>,
}

fn conditional_reference(
    f: &(dyn Fn(usize, f64) -> f64 + Sync),
    i: usize,
    y: f64,
    center: f64,
    eta: f64,
) -> Reference {
    let sd = eta.sqrt();
    let (lo, hi) = (center - 14.0 * sd, center + 14.0 * sd);
    let peak = -f(i, center) - (center - y) * (center - y) / (2.0 * eta);
    let u = |x: f64| (-f(i, x) - (x - y) * (x - y) / (2.0 * eta) - peak).exp();
    let panels = 4096;
    let z = integrate(&u, lo, hi, panels);
    let mean = integrate(&|x| x * u(x), lo, hi, panels) / z;
    let var = integrate(&|x| (x - mean) * (x - mean) * u(x), lo, hi, panels) / z;
    // tabulated so the density owns its data
    let grid_lo = lo;
    let width = (hi - lo) / 65536.0;
    let table: Vec<f64> = (0..=65536)
        .map(|k| u(grid_lo + k as f64 * width) / z)
        .collect();
    let density = move |x: f64| {
        let t = (x - grid_lo) / width;
        if !(0.0..65536.0).contains(&t) {
            return 0.0;
        }
        let k = t as usize;
        let frac = t - k as f64;
        table[k] * (1.0 - frac) + table[k + 1] * frac
    };
    Reference {
        mean,
        var,
        density: Box::new(density),
    }
}

pub fn verify_rgo(ctx: &Context) -> CmdResult<bool> {
    let start = Instant::now();
    let cfg = &ctx.cfg;
    let p = target(cfg)?;
    let d = p.dim();
    let y = vector(cfg, "rgo", "y", d)?;
    let mode = mode(cfg)?;
    let zeta = positive(cfg, "rgo", "zeta", cfg.get_or("rgo", "zeta", 0.05)?)?;
    let eta = match cfg.get::<f64>("rgo", "eta")? {
        Some(e) => positive(cfg, "rgo", "eta", e)?,
        None => {
            eta_for(&p.specs(), d, zeta, Metric::Tv, mode).map_err(setup_err(cfg, "rgo", "zeta"))?
        }
    };
    let n: usize = cfg.get_or("rgo", "n_samples", 100_000)?;
    let bins: usize = cfg.get_or("rgo", "bins", 64)?;
    if n < 2 {
        return Err(cfg
            .invalid::<()>("rgo", "n_samples", "`n_samples` must be at least 2")
            .unwrap_err()
            .into());
    }
    if bins < 16 {
        return Err(cfg
            .invalid::<()>("rgo", "bins", "`bins` must be at least 16")
            .unwrap_err()
            .into());
    }
    let s = match mode {
        ProxMode::Exact => proxsampler::rgo::EXACT_FALLBACK_TOL,
        ProxMode::Approx => proxsampler::proxmap::default_s_for(&p),
    };
    let opts = RgoOptions {
        mode,
        s,
        max_proposals: cfg.get_or("rgo", "max_proposals", DEFAULT_MAX_PROPOSALS)?,
        ..RgoOptions::default()
    };
    let batch = rgo_batch(&p, &y, eta, &opts, n, ctx.seed).map_err(run_err("rgo_sampling"))?;

    let mut report = Table::new(["check", "value", "threshold", "pass"]);
    let mut all = true;
    let mut check = |name: String, value: f64, threshold: f64| {
        let pass = value <= threshold;
        all &= pass;
        report.push(vec![
            name.into(),
            value.into(),
            threshold.into(),
            pass.into(),
        ]);
    };
    check("mean_proposals".into(), batch.mean_proposals(), 4.0);
    check(
        "p99_proposals".into(),
        batch.proposal_quantile(0.99) as f64,
        40.0,
    );
    match coordinate_energy(&p) {
        Some(f) => {
            for i in 0..d {
                let xs: Vec<f64> = batch.samples.iter().map(|x| x[i]).collect();
                let m = moments_1d(&xs).map_err(run_err("moments"))?;
                let r = conditional_reference(f.as_ref(), i, y[i], batch.prox.x_y[i], eta);
                check(
                    format!("mean_z_x{i}"),
                    (m.mean - r.mean).abs() / m.se_mean,
                    4.0,
                );
                check(format!("var_z_x{i}"), (m.var - r.var).abs() / m.se_var, 4.0);
                if i == 0 {
                    let support = (r.mean - 12.0 * r.var.sqrt(), r.mean + 12.0 * r.var.sqrt());
                    let tv = tv_histogram_1d(&xs, &r.density, bins, support)
                        .map_err(run_err("tv_x0"))?;
                    check("tv_x0".into(), tv.value, zeta + 0.02);
                }
            }
        }
        None => eprintln!("note: target is not separable; moment and TV checks skipped"),
    }
    ctx.write("rgo_report.csv", &report)?;
    ctx.write_timing("verify-rgo", start.elapsed().as_secs_f64(), n as u64)?;
    println!(
        "eta={eta} mean_proposals={:.4} pass={all}",
        batch.mean_proposals()
    );
    Ok(all)
}

pub fn verify_conc(ctx: &Context) -> CmdResult<bool> {
    let start = Instant::now();
    let cfg = &ctx.cfg;
    let l = target(cfg)?;
    let d = l.dim();
    let eta = positive(cfg, "conc", "eta", cfg.require("conc", "eta")?)?;
    let epsilon: f64 = cfg.get_or("conc", "epsilon", DEFAULT_EPSILON)?;
    let n: usize = cfg.get_or("conc", "n_samples", 1_000_000)?;
    let center = vector(cfg, "conc", "center", d)?;
    let grid = match (
        cfg.get_list::<f64>("conc", "quantiles")?,
        cfg.get_list::<f64>("conc", "r_values")?,
    ) {
        (Some(_), Some(_)) => {
            return Err(cfg
                .invalid::<()>(
                    "conc",
                    "r_values",
                    "give either `quantiles` or `r_values`, not both",
                )
                .unwrap_err()
                .into())
        }
        (Some(q), None) => RGrid::Quantiles(q),
        (None, Some(r)) => RGrid::Explicit(r),
        (None, None) => RGrid::Quantiles(vec![0.5, 0.9, 0.99, 0.999]),
    };
    let specs = l.specs();
    let default_variant = if specs.len() > 1 {
        "composite"
    } else {
        "standard"
    };
    let variant: String = cfg.get_or("conc", "variant", default_variant.to_string())?;
    let single = |v: &str| {
        if specs.len() == 1 {
            Ok(specs[0])
        } else {
            cfg.invalid(
                "conc",
                "variant",
                format!("variant `{v}` needs a single-term target"),
            )
        }
    };
    let query = match variant.as_str() {
        "standard" => BoundQuery::standard(single("standard")?, d, eta, epsilon),
        "composite" => BoundQuery::composite(specs.clone(), d, eta, epsilon, None),
        "errored" => BoundQuery::errored(
            single("errored")?,
            d,
            eta,
            epsilon,
            cfg.require("conc", "s_offset")?,
        ),
        "lowrange" => BoundQuery::lowrange(single("lowrange")?, d, eta),
        other => return Err(cfg
            .invalid::<()>(
                "conc",
                "variant",
                format!(
                    "unknown variant `{other}` (expected standard, composite, errored or lowrange)"
                ),
            )
            .unwrap_err()
            .into()),
    }
    .with_rate_scale(cfg.get_or("conc", "rate_scale", 1.0)?);
    let rep = verify_bound(&query, &l, &center, &grid, n, ctx.seed).map_err(|e| match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } => {
            setup_err(cfg, "conc", "eta")(e)
        }
        e => run_err("tail_dominance")(e),
    })?;
    let mut t = Table::new(["r", "empirical", "ci_upper", "bound", "dominated"]);
    for i in 0..rep.bound.len() {
        t.push(vec![
            rep.tail.r_grid[i].into(),
            rep.tail.empirical[i].into(),
            rep.tail.ci_upper[i].into(),
            rep.bound[i].into(),
            rep.dominated[i].into(),
        ]);
    }
    ctx.write("tail_report.csv", &t)?;
    ctx.write_timing("verify-conc", start.elapsed().as_secs_f64(), n as u64)?;
    let all = rep.all_dominated();
    println!("points={} all_dominated={all}", rep.bound.len());
    Ok(all)
}

/// `N(A⁻¹b, A⁻¹)` for a diagonal quadratic target.
fn gaussian_truth(p: &Potential64) -> Option<(Vec<f64>, Vec<f64>)> {
    match p.terms() {
        [(Term::Quadratic { diag, b }, _)] if diag.iter().all(|&a| a > 0.0) => Some((
            diag.iter().zip(b).map(|(a, b)| b / a).collect(),
            diag.iter().map(|a| 1.0 / a.sqrt()).collect(),
        )),
        _ => None,
    }
}

pub fn benchmark(ctx: &Context) -> CmdResult<bool> {
    let start = Instant::now();
    let cfg = &ctx.cfg;
    let p = target(cfg)?;
    let d = p.dim();
    let Some((mean, sd)) = gaussian_truth(&p) else {
        return Err(cfg
            .invalid::<()>(
                "target",
                "name",
                "benchmark needs a Gaussian target (isotropic_gaussian or aniso_quadratic)",
            )
            .unwrap_err()
            .into());
    };
    let (plan, _) = make_plan(cfg, &p)?;
    let chains: usize = cfg.get_or("benchmark", "chains", 512)?;
    let budget: u64 = cfg.get_or("benchmark", "budget", 2000)?;
    if chains < 2 || budget == 0 {
        return Err(cfg
            .invalid::<()>(
                "benchmark",
                "chains",
                "`chains` must be at least 2 and `budget` positive",
            )
            .unwrap_err()
            .into());
    }
    let l = p.specs()[0].l_alpha();
    let langevin_eta = positive(
        cfg,
        "benchmark",
        "langevin_eta",
        cfg.get_or("benchmark", "langevin_eta", 0.1 / l)?,
    )?;
    let x0 = vector(cfg, "benchmark", "x0", d)?;
    let init = |_: usize, _: &mut StreamRng| x0.clone();

    let mut tr = rng::stream(rng::mix(ctx.seed, 4), 0);
    let truth: Vec<Vec<f64>> = (0..chains)
        .map(|_| {
            (0..d)
                .map(|i| mean[i] + sd[i] * f64::std_normal(&mut tr))
                .collect()
        })
        .collect();
    let w2 = |xs: &[Vec<f64>]| {
        w2_empirical_assignment(xs, &truth, DEFAULT_ASSIGNMENT_CAP, rng::mix(ctx.seed, 5))
            .map(|e| e.value)
            .map_err(run_err("w2_to_truth"))
    };

    // gradient evaluations are only counted for iterative prox solves
    let opts = RgoOptions {
        closed_form: false,
        ..SamplerOptions::for_plan(&p, &plan).rgo
    };
    let pilot_plan = Plan64::manual(plan.eta, 64, plan.delta, plan.metric, plan.mode)
        .map_err(run_err("pilot"))?;
    let pilot = run_ensemble(&p, &pilot_plan, init, 16, rng::mix(ctx.seed, 1), &[], &opts)
        .map_err(run_err("pilot"))?;
    let per_step = (pilot.total_prox_iters as f64 / (16.0 * 64.0)).max(1.0);
    let prox_steps = ((budget as f64 / per_step).floor() as u64).max(1);
    let prox_plan = Plan64::manual(plan.eta, prox_steps, plan.delta, plan.metric, plan.mode)
        .map_err(run_err("proximal"))?;
    let ens = run_ensemble(
        &p,
        &prox_plan,
        init,
        chains,
        rng::mix(ctx.seed, 2),
        &[prox_steps],
        &opts,
    )
    .map_err(run_err("proximal"))?;
    let prox_w2 = w2(ens.snapshot(prox_steps).unwrap())?;
    let prox_evals = ens.total_prox_iters as f64 / chains as f64;

    let mut t = Table::new([
        "method",
        "eta",
        "steps",
        "grad_evals_per_chain",
        "w2_to_truth",
        "acceptance_rate",
    ]);
    t.push(vec![
        "proximal".into(),
        plan.eta.into(),
        prox_steps.into(),
        prox_evals.into(),
        prox_w2.into(),
        (1.0 / ens.mean_proposals()).into(),
    ]);
    for (k, method) in [Baseline::Ula, Baseline::Mala].into_iter().enumerate() {
        let (finals, accepted) = run_baseline_ensemble(
            method,
            &p,
            langevin_eta,
            budget,
            init,
            chains,
            rng::mix(ctx.seed, 3 + 16 * k as u64),
        )
        .map_err(run_err(method.as_str()))?;
        t.push(vec![
            method.as_str().into(),
            langevin_eta.into(),
            budget.into(),
            (budget as f64).into(),
            w2(&finals)?.into(),
            (accepted as f64 / (budget as f64 * chains as f64)).into(),
        ]);
    }
    ctx.write("baselines.csv", &t)?;
    ctx.write_timing(
        "benchmark",
        start.elapsed().as_secs_f64(),
        budget * chains as u64,
    )?;
    println!("budget={budget} proximal_steps={prox_steps} proximal_w2={prox_w2:.4}");
    Ok(true)
}

pub fn output_dir(cfg: &Config, flag: Option<PathBuf>) -> CmdResult<PathBuf> {
    let dir = match flag {
        Some(d) => d,
        None => cfg.get_or::<String>("", "output_dir", ".".into())?.into(),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CmdError::Io(dir.clone(), e))?;
    Ok(dir)
}
