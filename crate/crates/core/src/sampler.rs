//! The proximal sampler and Langevin baselines.
//!
//! One proximal step: `y = x + √η ξ`, then `x ~ π(· | y)` through the RGO.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::check_dim;
use crate::potentials::Potential;
use crate::proxmap::default_s_for;
use crate::rgo::{ProxMode, RgoOptions, RgoWorkspace, EXACT_FALLBACK_TOL};
use crate::rng::{self, StreamRng};
use crate::scalar::Real;
use crate::stepsize::Plan;

/// Work done in one sampler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub proposals: u32,
    /// Gradient evaluations of the proximal solve; 0 for closed forms.
    pub prox_iters: u32,
    pub prox_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SamplerOptions<F> {
    pub rgo: RgoOptions<F>,
    /// Record `x_t` when `t` is a multiple of the stride (and always at `T`).
    pub record_stride: u64,
    pub record_y: bool,
}

impl<F: Real> SamplerOptions<F> {
    /// Oracle settings matching the plan's prox mode: `s = 1e-8` in exact
    /// mode and the per-potential default tolerance in approximate mode.
    /// Stride `max(1, T/1000)`.
    pub fn for_plan(p: &Potential<F>, plan: &Plan<F>) -> Self {
        let s = match plan.mode {
            ProxMode::Exact => F::lit(EXACT_FALLBACK_TOL),
            ProxMode::Approx => default_s_for(p),
        };
        SamplerOptions {
            rgo: RgoOptions {
                mode: plan.mode,
                s,
                ..RgoOptions::default()
            },
            record_stride: (plan.t_steps / 1000).max(1),
            record_y: false,
        }
    }
}

/// Record of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<F> {
    /// `(t, x_t)` at the recorded steps, starting with `(0, x0)`.
    pub samples: Vec<(u64, Vec<F>)>,
    pub y_snapshots: Option<Vec<(u64, Vec<F>)>>,
    pub per_step: Vec<StepStats>,
    pub plan: Plan<F>,
    pub root_seed: u64,
}

impl<F: Real> Trace<F> {
    pub fn final_state(&self) -> &[F] {
        &self.samples.last().expect("trace always holds x0").1
    }

    pub fn mean_proposals(&self) -> f64 {
        if self.per_step.is_empty() {
            return 0.0;
        }
        self.per_step
            .iter()
            .map(|s| s.proposals as f64)
            .sum::<f64>()
            / self.per_step.len() as f64
    }
}

/// One proximal step in place. `y` receives the forward draw.
pub fn proximal_step<F: Real, R: Rng + ?Sized>(
    p: &Potential<F>,
    eta: F,
    x: &mut [F],
    y: &mut [F],
    opts: &RgoOptions<F>,
    rng: &mut R,
) -> Result<StepStats> {
    let mut ws = RgoWorkspace::new(p, eta, opts)?;
    step_with(p, eta, &mut ws, x, y, rng)
}

fn step_with<F: Real, R: Rng + ?Sized>(
    p: &Potential<F>,
    eta: F,
    ws: &mut RgoWorkspace<F>,
    x: &mut [F],
    y: &mut [F],
    rng: &mut R,
) -> Result<StepStats> {
    let sd = eta.sqrt();
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi = xi + sd * F::std_normal(rng);
    }
    let st = ws.draw(p, y, x, rng)?;
    Ok(StepStats {
        proposals: st.proposals as u32,
        prox_iters: st.prox_iters as u32,
        prox_residual: st.prox_residual.as_f64(),
    })
}

fn check_plan<F: Real>(plan: &Plan<F>) -> Result<()> {
    if !(plan.eta > F::zero()) || !plan.eta.is_finite() {
        return invalid(format!("plan step size must be positive, got {}", plan.eta));
    }
    Ok(())
}

/// Runs `plan.t_steps` proximal steps from `x0` on stream 0 of `seed`.
pub fn run_proximal_sampler<F: Real>(
    p: &Potential<F>,
    plan: &Plan<F>,
    x0: &[F],
    seed: u64,
    opts: &SamplerOptions<F>,
) -> Result<Trace<F>> {
    check_dim(p.dim(), x0)?;
    check_plan(plan)?;
    if opts.record_stride == 0 {
        return invalid("record_stride must be at least 1");
    }
    let mut ws = RgoWorkspace::new(p, plan.eta, &opts.rgo)?;
    let mut r = rng::stream(seed, 0);
    let mut x = x0.to_vec();
    let mut y = vec![F::zero(); p.dim()];
    let mut samples = vec![(0, x.clone())];
    let mut ys = opts.record_y.then(Vec::new);
    let mut per_step = Vec::with_capacity(plan.t_steps.min(1 << 24) as usize);
    for t in 1..=plan.t_steps {
        let stats = step_with(p, plan.eta, &mut ws, &mut x, &mut y, &mut r).map_err(|e| {
            Error::StepFailed {
                step: t,
                source: Box::new(e),
            }
        })?;
        per_step.push(stats);
        if t % opts.record_stride == 0 || t == plan.t_steps {
            samples.push((t, x.clone()));
            if let Some(ys) = ys.as_mut() {
                ys.push((t, y.clone()));
            }
        }
    }
    Ok(Trace {
        samples,
        y_snapshots: ys,
        per_step,
        plan: *plan,
        root_seed: seed,
    })
}

/// Aggregate of many independent chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<F> {
    /// For each requested step, the states of all chains in chain order.
    pub snapshots: Vec<(u64, Vec<Vec<F>>)>,
    pub chains: usize,
    pub steps_per_chain: u64,
    pub total_proposals: u64,
    pub max_proposals: u32,
    pub total_prox_iters: u64,
    /// Largest `η·residual/s` over all iterative proximal solves (≤ 1 means
    /// every solve met its tolerance); 0 when only closed forms were used.
    pub max_residual_ratio: f64,
}

impl<F> Ensemble<F> {
    pub fn mean_proposals(&self) -> f64 {
        self.total_proposals as f64 / (self.chains as u64 * self.steps_per_chain).max(1) as f64
    }

    pub fn snapshot(&self, t: u64) -> Option<&[Vec<F>]> {
        self.snapshots
            .iter()
            .find(|(s, _)| *s == t)
            .map(|(_, v)| v.as_slice())
    }
}

struct ChainOut<F> {
    snaps: Vec<Vec<F>>,
    proposals: u64,
    max_proposals: u32,
    prox_iters: u64,
    max_ratio: f64,
}

/// Runs `chains` chains in parallel. Chain `c` draws its start from
/// `init(c, rng)` on substream `(seed, c, 1)` and runs on stream `(seed, c)`,
/// so results do not depend on the worker count.
pub fn run_ensemble<F, I>(
    p: &Potential<F>,
    plan: &Plan<F>,
    init: I,
    chains: usize,
    seed: u64,
    snapshot_steps: &[u64],
    opts: &RgoOptions<F>,
) -> Result<Ensemble<F>>
where
    F: Real,
    I: Fn(usize, &mut StreamRng) -> Vec<F> + Sync,
{
    check_plan(plan)?;
    if chains == 0 {
        return invalid("at least one chain is required");
    }
    let mut steps: Vec<u64> = snapshot_steps.to_vec();
    steps.sort_unstable();
    steps.dedup();
    if let Some(&last) = steps.last() {
        if last > plan.t_steps {
            return invalid(format!("snapshot step {last} beyond T = {}", plan.t_steps));
        }
    }
    let eta = plan.eta;
    let s = opts.s.as_f64();
    let proto = RgoWorkspace::new(p, eta, opts)?;
    let outs: Vec<ChainOut<F>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut x = init(c, &mut rng::substream(seed, c as u64, 1));
            check_dim(p.dim(), &x)?;
            let mut r = rng::stream(seed, c as u64);
            let mut y = vec![F::zero(); p.dim()];
            let mut ws = proto.clone();
            let mut out = ChainOut {
                snaps: Vec::with_capacity(steps.len()),
                proposals: 0,
                max_proposals: 0,
                prox_iters: 0,
                max_ratio: 0.0,
            };
            let mut next = 0;
            if steps.first() == Some(&0) {
                out.snaps.push(x.clone());
                next = 1;
            }
            for t in 1..=plan.t_steps {
                let st = step_with(p, eta, &mut ws, &mut x, &mut y, &mut r).map_err(|e| {
                    Error::StepFailed {
                        step: t,
                        source: Box::new(e),
                    }
                })?;
                out.proposals += st.proposals as u64;
                out.max_proposals = out.max_proposals.max(st.proposals);
                if st.prox_iters > 0 {
                    out.prox_iters += st.prox_iters as u64;
                    out.max_ratio = out.max_ratio.max(eta.as_f64() * st.prox_residual / s);
                }
                if next < steps.len() && steps[next] == t {
                    out.snaps.push(x.clone());
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut snapshots: Vec<(u64, Vec<Vec<F>>)> = steps
        .iter()
        .map(|&t| (t, Vec::with_capacity(chains)))
        .collect();
    let mut ens = Ensemble {
        snapshots: Vec::new(),
        chains,
        steps_per_chain: plan.t_steps,
        total_proposals: 0,
        max_proposals: 0,
        total_prox_iters: 0,
        max_residual_ratio: 0.0,
    };
    for o in outs {
        ens.total_proposals += o.proposals;
        ens.max_proposals = ens.max_proposals.max(o.max_proposals);
        ens.total_prox_iters += o.prox_iters;
        ens.max_residual_ratio = ens.max_residual_ratio.max(o.max_ratio);
        for (slot, x) in snapshots.iter_mut().zip(o.snaps) {
            slot.1.push(x);
        }
    }
    ens.snapshots = snapshots;
    Ok(ens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Ula,
    Mala,
}

impl Baseline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Baseline::Ula => "ula",
            Baseline::Mala => "mala",
        }
    }
}

/// Record of one Langevin chain.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTrace<F> {
    pub method: Baseline,
    pub eta: F,
    pub samples: Vec<(u64, Vec<F>)>,
    pub steps: u64,
    /// Accepted proposals (every step for ULA).
    pub accepted: u64,
    pub root_seed: u64,
}

impl<F: Real> BaselineTrace<F> {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            return 1.0;
        }
        self.accepted as f64 / self.steps as f64
    }

    pub fn final_state(&self) -> &[F] {
        &self.samples.last().expect("trace always holds x0").1
    }
}

/// Langevin state with its cached energy and gradient.
struct LangevinState<F> {
    x: Vec<F>,
    fx: F,
    gx: Vec<F>,
}

fn langevin_step<F: Real, R: Rng + ?Sized>(
    method: Baseline,
    p: &Potential<F>,
    eta: F,
    st: &mut LangevinState<F>,
    rng: &mut R,
) -> Result<bool> {
    let sd = (eta + eta).sqrt();
    let prop: Vec<F> =
        st.x.iter()
            .zip(&st.gx)
            .map(|(&xi, &gi)| xi - eta * gi + sd * F::std_normal(rng))
            .collect();
    let gp = p.subgradient(&prop)?;
    if method == Baseline::Ula {
        if !crate::linalg::all_finite(&prop) {
            return Err(Error::Numeric("ULA iterate is not finite".into()));
        }
        st.x = prop;
        st.gx = gp;
        return Ok(true);
    }
    let fp = p.energy(&prop)?;
    let four_eta = F::lit(4.0) * eta;
    // log q(x | x') − log q(x' | x)
    let (mut fwd, mut bwd) = (F::zero(), F::zero());
    for i in 0..prop.len() {
        let a = prop[i] - st.x[i] + eta * st.gx[i];
        let b = st.x[i] - prop[i] + eta * gp[i];
        fwd = fwd + a * a;
        bwd = bwd + b * b;
    }
    let log_a = st.fx - fp + (fwd - bwd) / four_eta;
    if log_a.is_nan() {
        return Err(Error::Numeric("MALA log acceptance is NaN".into()));
    }
    let u = F::unit(rng);
    if u.ln() <= log_a {
        st.x = prop;
        st.fx = fp;
        st.gx = gp;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// ULA `x' = x − η∇f(x) + √(2η)ξ`; MALA adds a Metropolis correction.
pub fn run_baseline<F: Real>(
    method: Baseline,
    p: &Potential<F>,
    eta: F,
    t_steps: u64,
    x0: &[F],
    seed: u64,
    record_stride: u64,
) -> Result<BaselineTrace<F>> {
    check_dim(p.dim(), x0)?;
    if !(eta > F::zero()) || !eta.is_finite() {
        return invalid(format!("eta must be positive and finite, got {eta}"));
    }
    if record_stride == 0 {
        return invalid("record_stride must be at least 1");
    }
    let mut r = rng::stream(seed, 0);
    let mut st = LangevinState {
        x: x0.to_vec(),
        fx: p.energy(x0)?,
        gx: p.subgradient(x0)?,
    };
    let mut samples = vec![(0, st.x.clone())];
    let mut accepted = 0;
    for t in 1..=t_steps {
        if langevin_step(method, p, eta, &mut st, &mut r)? {
            accepted += 1;
        }
        if t % record_stride == 0 || t == t_steps {
            samples.push((t, st.x.clone()));
        }
    }
    Ok(BaselineTrace {
        method,
        eta,
        samples,
        steps: t_steps,
        accepted,
        root_seed: seed,
    })
}

/// Final states and total acceptances of independent Langevin chains, seeded
/// like [`run_ensemble`].
pub fn run_baseline_ensemble<F, I>(
    method: Baseline,
    p: &Potential<F>,
    eta: F,
    t_steps: u64,
    init: I,
    chains: usize,
    seed: u64,
) -> Result<(Vec<Vec<F>>, u64)>
where
    F: Real,
    I: Fn(usize, &mut StreamRng) -> Vec<F> + Sync,
{
    if !(eta > F::zero()) || !eta.is_finite() {
        return invalid(format!("eta must be positive and finite, got {eta}"));
    }
    let outs = (0..chains)
        .into_par_iter()
        .map(|c| {
            let x0 = init(c, &mut rng::substream(seed, c as u64, 1));
            check_dim(p.dim(), &x0)?;
            let mut r = rng::stream(seed, c as u64);
            let mut st = LangevinState {
                fx: p.energy(&x0)?,
                gx: p.subgradient(&x0)?,
                x: x0,
            };
            let mut acc = 0u64;
            for _ in 0..t_steps {
                acc += langevin_step(method, p, eta, &mut st, &mut r)? as u64;
            }
            Ok((st.x, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let accepted = outs.iter().map(|o| o.1).sum();
    Ok((outs.into_iter().map(|o| o.0).collect(), accepted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::isotropic_gaussian;
    use crate::stepsize::Metric;

    fn plan(eta: f64, t: u64) -> Plan<f64> {
        Plan::manual(eta, t, 0.1, Metric::Tv, ProxMode::Exact).unwrap()
    }

    #[test]
    fn zero_steps_keep_x0() {
        let p = isotropic_gaussian::<f64>(2).unwrap();
        let pl = plan(0.1, 0);
        let tr = run_proximal_sampler(&p, &pl, &[1.0, 2.0], 0, &SamplerOptions::for_plan(&p, &pl))
            .unwrap();
        assert_eq!(tr.samples, vec![(0, vec![1.0, 2.0])]);
        assert!(tr.per_step.is_empty());
    }

    #[test]
    fn same_seed_same_trace() {
        let p = isotropic_gaussian::<f64>(3).unwrap();
        let pl = plan(0.05, 50);
        let mut o = SamplerOptions::for_plan(&p, &pl);
        o.record_y = true;
        let a = run_proximal_sampler(&p, &pl, &[3.0, 0.0, -1.0], 9, &o).unwrap();
        let b = run_proximal_sampler(&p, &pl, &[3.0, 0.0, -1.0], 9, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_step.len(), 50);
        assert!(a.per_step.iter().all(|s| s.proposals >= 1));
        assert_eq!(a.samples.len(), 51);
        let c = run_proximal_sampler(&p, &pl, &[3.0, 0.0, -1.0], 10, &o).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn stride_records_final_step() {
        let p = isotropic_gaussian::<f64>(1).unwrap();
        let pl = plan(0.1, 25);
        let mut o = SamplerOptions::for_plan(&p, &pl);
        o.record_stride = 10;
        let tr = run_proximal_sampler(&p, &pl, &[0.0], 1, &o).unwrap();
        let steps: Vec<u64> = tr.samples.iter().map(|s| s.0).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
    }

    #[test]
    fn single_chain_matches_ensemble_chain_zero() {
        let p = isotropic_gaussian::<f64>(2).unwrap();
        let pl = plan(0.1, 20);
        let o = SamplerOptions::for_plan(&p, &pl);
        let tr = run_proximal_sampler(&p, &pl, &[1.0, 1.0], 4, &o).unwrap();
        let ens = run_ensemble(&p, &pl, |_, _| vec![1.0, 1.0], 3, 4, &[20], &o.rgo).unwrap();
        assert_eq!(ens.snapshot(20).unwrap()[0], tr.final_state());
        assert_eq!(ens.total_proposals as f64 / 60.0, ens.mean_proposals());
    }

    #[test]
    fn variance_follows_the_exact_recursion() {
        let p = isotropic_gaussian::<f64>(1).unwrap();
        let eta = 0.2;
        let t = 15;
        let pl = plan(eta, t);
        let o = SamplerOptions::for_plan(&p, &pl);
        let chains = 2000;
        let ens = run_ensemble(&p, &pl, |_, _| vec![3.0], chains, 17, &[t], &o.rgo).unwrap();
        let mut v = 0.0;
        let mut m = 3.0;
        for _ in 0..t {
            v = eta / (1.0 + eta) + (v + eta) / ((1.0 + eta) * (1.0 + eta));
            m /= 1.0 + eta;
        }
        let xs: Vec<f64> = ens.snapshot(t).unwrap().iter().map(|x| x[0]).collect();
        let mo = crate::metrics::moments_1d(&xs).unwrap();
        assert!(
            (mo.mean - m).abs() <= 4.0 * (v / chains as f64).sqrt(),
            "{} vs {m}",
            mo.mean
        );
        let se = v * (2.0 / chains as f64).sqrt();
        assert!((mo.var - v).abs() <= 4.0 * se, "{} vs {v}", mo.var);
    }

    #[test]
    fn ula_stationary_variance() {
        let p = isotropic_gaussian::<f64>(1).unwrap();
        let eta = 0.1;
        let chains = 20_000;
        let (xs, acc) =
            run_baseline_ensemble(Baseline::Ula, &p, eta, 300, |_, _| vec![0.0], chains, 3)
                .unwrap();
        assert_eq!(acc, 300 * chains as u64);
        let xs: Vec<f64> = xs.into_iter().map(|x| x[0]).collect();
        let mo = crate::metrics::moments_1d(&xs).unwrap();
        let want = 1.0 / (1.0 - eta / 2.0);
        assert!(
            (mo.var - want).abs() <= 4.0 * want * (2.0 / chains as f64).sqrt(),
            "{}",
            mo.var
        );
    }

    #[test]
    fn mala_small_step_accepts() {
        let p = isotropic_gaussian::<f64>(1).unwrap();
        let tr = run_baseline(Baseline::Mala, &p, 1e-3, 20_000, &[0.5], 2, 1000).unwrap();
        assert!(tr.acceptance_rate() >= 0.9);
        let again = run_baseline(Baseline::Mala, &p, 1e-3, 20_000, &[0.5], 2, 1000).unwrap();
        assert_eq!(tr, again);
    }
}
