//! Restricted Gaussian oracle by approximate rejection sampling.
//!
//! Target: `π(x | y) ∝ exp(−f(x) − ‖x − y‖²/(2η))`. With `x_y` the proximal
//! stationary point and `g(x) = f(x) − ⟨f'(x_y), x⟩`, the target equals
//! `exp(−g(x) − ‖x − c‖²/(2η))` up to normalisation, where the proposal mean
//! `c` is `x_y` (exact prox) or `w = y − η f'(x_y)` (approximate prox).
//!
//! Each trial draws `x, z ~ N(c, ηI)` independently, sets
//! `ρ = exp(g(z) − g(x))` and accepts `x` when `u ≤ ρ/2`, `u ~ U[0, 1]`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_dim, dot};
use crate::potentials::Potential;
use crate::proxmap::{prox_agd, prox_exact, AgdSolver, Buffers, ClosedForm, ProxResult};
use crate::rng;
use crate::scalar::Real;

/// How the proximal stationary point is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProxMode {
    /// Closed form when available, otherwise the accelerated solver at a
    /// tolerance `s ≤ 1e-8`. Proposals are centred at `x_y`.
    Exact,
    /// Accelerated solver at tolerance `s`. Proposals are centred at
    /// `w = y − η f'(x_y)`.
    Approx,
}

impl ProxMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProxMode::Exact => "exact",
            ProxMode::Approx => "approx",
        }
    }
}

/// Largest tolerance accepted for the iterative fallback in exact mode.
pub const EXACT_FALLBACK_TOL: f64 = 1e-8;

/// Default give-up threshold, about 250 times the worst-case expected count.
pub const DEFAULT_MAX_PROPOSALS: usize = 1000;

#[derive(Debug, Clone, Copy)]
pub struct RgoOptions<F> {
    pub mode: ProxMode,
    /// Inner solver tolerance (approximate mode, or the exact-mode fallback).
    pub s: F,
    pub max_proposals: usize,
    pub record_rho: bool,
    /// Use a closed-form prox when one exists. When false every solve goes
    /// through the accelerated solver.
    pub closed_form: bool,
}

impl<F: Real> Default for RgoOptions<F> {
    fn default() -> Self {
        RgoOptions {
            mode: ProxMode::Exact,
            s: F::lit(EXACT_FALLBACK_TOL),
            max_proposals: DEFAULT_MAX_PROPOSALS,
            record_rho: false,
            closed_form: true,
        }
    }
}

/// `g(x) = f(x) − ⟨shift, x⟩` together with the proposal mean.
#[derive(Debug, Clone)]
pub struct ShiftedPotential<'a, F: Real> {
    pub base: &'a Potential<F>,
    pub shift: Vec<F>,
    pub center: Vec<F>,
}

impl<F: Real> ShiftedPotential<'_, F> {
    #[inline]
    pub fn g(&self, x: &[F]) -> F {
        self.base.energy_unchecked(x) - dot(&self.shift, x)
    }

    /// `g'(x) = f'(x) − shift`.
    pub fn g_subgradient(&self, x: &[F]) -> Result<Vec<F>> {
        let mut out = self.base.subgradient(x)?;
        for (o, &s) in out.iter_mut().zip(&self.shift) {
            *o = *o - s;
        }
        Ok(out)
    }
}

/// Builds `g` and the proposal mean from a proximal solve at `(y, η)`.
///
/// The shift is the certifying subgradient carried by `prox`, which equals
/// `f'(x_y)` wherever `f` is differentiable.
pub fn make_shifted<'a, F: Real>(
    p: &'a Potential<F>,
    prox: &ProxResult<F>,
    y: &[F],
    eta: F,
    mode: ProxMode,
) -> ShiftedPotential<'a, F> {
    let center = match mode {
        ProxMode::Exact => prox.x_y.clone(),
        ProxMode::Approx => prox.shifted_center(y, eta),
    };
    ShiftedPotential {
        base: p,
        shift: prox.shift.clone(),
        center,
    }
}

/// Proximal solve dispatch used by the oracle.
pub fn solve_prox<F: Real>(
    p: &Potential<F>,
    y: &[F],
    eta: F,
    opts: &RgoOptions<F>,
) -> Result<ProxResult<F>> {
    let s = opts.s;
    let closed = if opts.closed_form {
        prox_exact(p, y, eta)
    } else {
        None
    };
    let prox = match opts.mode {
        ProxMode::Exact => match closed {
            Some(r) => r?,
            None => {
                if s > F::lit(EXACT_FALLBACK_TOL) {
                    return invalid(format!(
                        "exact mode without a closed-form prox needs s <= {EXACT_FALLBACK_TOL}, got {s}"
                    ));
                }
                prox_agd(p, y, eta, s, None)?
            }
        },
        ProxMode::Approx => prox_agd(p, y, eta, s, None)?,
    };
    if prox.budget_exceeded {
        return Err(Error::Numeric(format!(
            "proximal solve exceeded its budget ({} iterations, residual {})",
            prox.iters, prox.residual
        )));
    }
    Ok(prox)
}

/// One oracle draw.
#[derive(Debug, Clone)]
pub struct RgoOutcome<F> {
    pub x: Vec<F>,
    /// Number of `(x, z, u)` trials, at least 1.
    pub proposals: usize,
    pub rho_trace: Option<Vec<F>>,
    pub prox: ProxResult<F>,
}

#[allow(clippy::too_many_arguments)]
fn rejection_core<F: Real, R: Rng + ?Sized>(
    base: &Potential<F>,
    shift: &[F],
    center: &[F],
    eta: F,
    max_proposals: usize,
    x: &mut [F],
    z: &mut [F],
    mut rho_trace: Option<&mut Vec<F>>,
    rng: &mut R,
) -> Result<usize> {
    let sd = eta.sqrt();
    let half = F::lit(0.5);
    let g = |v: &[F]| base.energy_unchecked(v) - dot(shift, v);
    for trial in 1..=max_proposals {
        for (xi, &c) in x.iter_mut().zip(center) {
            *xi = c + sd * F::std_normal(rng);
        }
        for (zi, &c) in z.iter_mut().zip(center) {
            *zi = c + sd * F::std_normal(rng);
        }
        let log_rho = g(z) - g(x);
        if log_rho.is_nan() {
            return Err(Error::Numeric("log rho is NaN".into()));
        }
        if log_rho > F::max_exp_arg() {
            return Err(Error::Numeric(format!(
                "rho overflows (log rho = {log_rho}); eta is too large for this potential"
            )));
        }
        let rho = log_rho.exp();
        if let Some(trace) = rho_trace.as_deref_mut() {
            trace.push(rho);
        }
        let u = F::unit(rng);
        if u <= half * rho {
            return Ok(trial);
        }
    }
    Err(Error::GaveUp {
        proposals: max_proposals,
    })
}

/// Rejection loop against a prepared shifted potential. Returns the accepted
/// point and the number of trials.
pub fn rejection_loop<F: Real, R: Rng + ?Sized>(
    shifted: &ShiftedPotential<'_, F>,
    eta: F,
    max_proposals: usize,
    rho_trace: Option<&mut Vec<F>>,
    rng: &mut R,
) -> Result<(Vec<F>, usize)> {
    let d = shifted.center.len();
    let mut x = vec![F::zero(); d];
    let mut z = vec![F::zero(); d];
    let n = rejection_core(
        shifted.base,
        &shifted.shift,
        &shifted.center,
        eta,
        max_proposals,
        &mut x,
        &mut z,
        rho_trace,
        rng,
    )?;
    Ok((x, n))
}

/// Per-draw diagnostics from [`RgoWorkspace::draw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawStats<F> {
    pub proposals: usize,
    pub prox_iters: usize,
    pub prox_residual: F,
}

/// Preallocated oracle for repeated draws at a fixed `(f, η)` and options.
/// Draws match [`rgo_sample`] exactly for the same random stream.
#[derive(Debug, Clone)]
pub struct RgoWorkspace<F> {
    eta: F,
    opts: RgoOptions<F>,
    closed: Option<ClosedForm<F>>,
    agd: Option<AgdSolver<F>>,
    buf: Buffers<F>,
    x_y: Vec<F>,
    shift: Vec<F>,
    center: Vec<F>,
    z: Vec<F>,
}

impl<F: Real> RgoWorkspace<F> {
    pub fn new(p: &Potential<F>, eta: F, opts: &RgoOptions<F>) -> Result<Self> {
        if opts.max_proposals == 0 {
            return invalid("max_proposals must be at least 1");
        }
        if !(eta > F::zero() && eta.is_finite()) {
            return invalid(format!("eta must be positive and finite, got {eta}"));
        }
        let closed = match opts.mode {
            ProxMode::Exact if opts.closed_form => ClosedForm::detect(p),
            _ => None,
        };
        let agd = if closed.is_none() {
            if opts.mode == ProxMode::Exact && opts.s > F::lit(EXACT_FALLBACK_TOL) {
                return invalid(format!(
                    "exact mode without a closed-form prox needs s <= {EXACT_FALLBACK_TOL}, got {}",
                    opts.s
                ));
            }
            Some(AgdSolver::new(p, eta, opts.s, None)?)
        } else {
            None
        };
        let d = p.dim();
        Ok(RgoWorkspace {
            eta,
            opts: *opts,
            closed,
            agd,
            buf: Buffers::new(d),
            x_y: vec![F::zero(); d],
            shift: vec![F::zero(); d],
            center: vec![F::zero(); d],
            z: vec![F::zero(); d],
        })
    }

    /// Draws from `π(· | y)` into `out`.
    pub fn draw<R: Rng + ?Sized>(
        &mut self,
        p: &Potential<F>,
        y: &[F],
        out: &mut [F],
        rng: &mut R,
    ) -> Result<DrawStats<F>> {
        check_dim(p.dim(), y)?;
        check_dim(p.dim(), out)?;
        let eta = self.eta;
        let (residual, iters) = match (&self.closed, &mut self.agd) {
            (Some(cf), _) => (
                cf.solve_into(
                    Some(p),
                    y,
                    eta,
                    &mut self.x_y,
                    &mut self.shift,
                    &mut self.buf,
                )?,
                0,
            ),
            (None, Some(agd)) => {
                let (r, it) = agd.solve_into(p, y, &mut self.x_y, &mut self.shift)?;
                if r > agd.tolerance() {
                    return Err(Error::Numeric(format!(
                        "proximal solve exceeded its budget ({it} iterations, residual {r})"
                    )));
                }
                (r, it)
            }
            (None, None) => unreachable!("workspace without a prox solver"),
        };
        match self.opts.mode {
            ProxMode::Exact => self.center.copy_from_slice(&self.x_y),
            ProxMode::Approx => {
                for i in 0..y.len() {
                    self.center[i] = y[i] - eta * self.shift[i];
                }
            }
        }
        let proposals = rejection_core(
            p,
            &self.shift,
            &self.center,
            eta,
            self.opts.max_proposals,
            out,
            &mut self.z,
            None,
            rng,
        )?;
        Ok(DrawStats {
            proposals,
            prox_iters: iters,
            prox_residual: residual,
        })
    }
}

/// Draws one sample from `π(· | y)`.
pub fn rgo_sample<F: Real, R: Rng + ?Sized>(
    p: &Potential<F>,
    y: &[F],
    eta: F,
    opts: &RgoOptions<F>,
    rng: &mut R,
) -> Result<RgoOutcome<F>> {
    check_dim(p.dim(), y)?;
    if opts.max_proposals == 0 {
        return invalid("max_proposals must be at least 1");
    }
    let prox = solve_prox(p, y, eta, opts)?;
    let shifted = make_shifted(p, &prox, y, eta, opts.mode);
    let mut trace = opts.record_rho.then(Vec::new);
    let (x, proposals) = rejection_loop(&shifted, eta, opts.max_proposals, trace.as_mut(), rng)?;
    Ok(RgoOutcome {
        x,
        proposals,
        rho_trace: trace,
        prox,
    })
}

/// `n` independent draws at a fixed `y`; draw `i` uses stream `i` of `seed`.
#[derive(Debug, Clone)]
pub struct RgoBatch<F> {
    pub samples: Vec<Vec<F>>,
    pub proposals: Vec<usize>,
    pub prox: ProxResult<F>,
}

impl<F> RgoBatch<F> {
    pub fn mean_proposals(&self) -> f64 {
        self.proposals.iter().sum::<usize>() as f64 / self.proposals.len().max(1) as f64
    }

    /// Empirical `q`-quantile of the proposal counts (nearest rank).
    pub fn proposal_quantile(&self, q: f64) -> usize {
        let mut v = self.proposals.clone();
        v.sort_unstable();
        if v.is_empty() {
            return 0;
        }
        let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
        v[rank - 1]
    }
}

pub fn rgo_batch<F: Real>(
    p: &Potential<F>,
    y: &[F],
    eta: F,
    opts: &RgoOptions<F>,
    n: usize,
    seed: u64,
) -> Result<RgoBatch<F>> {
    check_dim(p.dim(), y)?;
    let prox = solve_prox(p, y, eta, opts)?;
    let shifted = make_shifted(p, &prox, y, eta, opts.mode);
    let draws: Result<Vec<(Vec<F>, usize)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            rejection_loop(&shifted, eta, opts.max_proposals, None, &mut r)
        })
        .collect();
    let (samples, proposals) = draws?.into_iter().unzip();
    Ok(RgoBatch {
        samples,
        proposals,
        prox,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{huber, isotropic_gaussian, zero};
    use crate::proxmap::default_s;
    use approx::assert_abs_diff_eq;

    fn opts(mode: ProxMode, s: f64) -> RgoOptions<f64> {
        RgoOptions {
            mode,
            s,
            ..RgoOptions::default()
        }
    }

    #[test]
    fn shifted_gaussian_is_stationary_at_prox_point() {
        let p = isotropic_gaussian::<f64>(2).unwrap();
        let prox = solve_prox(&p, &[2.0, 0.0], 1.0, &opts(ProxMode::Exact, 1e-8)).unwrap();
        assert_eq!(prox.x_y, vec![1.0, 0.0]);
        let sh = make_shifted(&p, &prox, &[2.0, 0.0], 1.0, ProxMode::Exact);
        assert_eq!(sh.shift, vec![1.0, 0.0]);
        assert_eq!(sh.g_subgradient(&sh.center).unwrap(), vec![0.0, 0.0]);
        // g(x) = ½‖x‖² − x₁
        assert_abs_diff_eq!(sh.g(&[3.0, 1.0]), 5.0 - 3.0);
    }

    #[test]
    fn zero_potential_shift() {
        let p = zero::<f64>(2).unwrap();
        let y = [0.4, -1.0];
        let prox = solve_prox(&p, &y, 0.5, &opts(ProxMode::Approx, 0.1)).unwrap();
        let sh = make_shifted(&p, &prox, &y, 0.5, ProxMode::Approx);
        assert_eq!(sh.shift, vec![0.0, 0.0]);
        assert_eq!(sh.center, y.to_vec());
        assert_eq!(sh.g(&[5.0, 5.0]), 0.0);
    }

    #[test]
    fn approx_center_within_s_of_prox_point() {
        let p = huber::<f64>(4, 1.0).unwrap();
        let y = [2.0, -0.3, 0.8, 4.0];
        let eta = 0.05;
        let s = default_s(&p.specs()[0], 4);
        let prox = solve_prox(&p, &y, eta, &opts(ProxMode::Approx, s)).unwrap();
        let sh = make_shifted(&p, &prox, &y, eta, ProxMode::Approx);
        let gap = crate::linalg::dist(&sh.center, &prox.x_y);
        assert_abs_diff_eq!(gap, eta * prox.residual, epsilon = 1e-12);
        assert!(gap <= s);
    }

    #[test]
    fn zero_potential_accepts_half_the_time() {
        let p = zero::<f64>(1).unwrap();
        let opts = RgoOptions::default();
        let b = rgo_batch(&p, &[0.5], 0.2, &opts, 20_000, 3).unwrap();
        // Geometric(1/2): mean 2
        let m = b.mean_proposals();
        assert!((m - 2.0).abs() < 4.0 * (2.0f64 / 20_000.0).sqrt(), "{m}");
        let mean = b.samples.iter().map(|s| s[0]).sum::<f64>() / 20_000.0;
        assert!((mean - 0.5).abs() < 4.0 * (0.2f64 / 20_000.0).sqrt());
    }

    #[test]
    fn oversized_step_surfaces_as_error() {
        let p = isotropic_gaussian::<f64>(200).unwrap();
        let y = vec![0.0; 200];
        let opts = RgoOptions {
            max_proposals: 5,
            ..RgoOptions::default()
        };
        let mut errors = 0;
        for seed in 0..10 {
            let mut rng = rng::stream(seed, 0);
            match rgo_sample(&p, &y, 500.0, &opts, &mut rng) {
                Ok(_) => {}
                Err(Error::Numeric(_) | Error::GaveUp { .. }) => errors += 1,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(errors >= 5, "{errors}");
    }

    #[test]
    fn rho_trace_is_recorded_on_request() {
        let p = isotropic_gaussian::<f64>(3).unwrap();
        let opts = RgoOptions {
            record_rho: true,
            ..RgoOptions::default()
        };
        let mut rng = rng::stream(2, 0);
        let out = rgo_sample(&p, &[1.0, 1.0, 1.0], 0.01, &opts, &mut rng).unwrap();
        let trace = out.rho_trace.unwrap();
        assert_eq!(trace.len(), out.proposals);
        assert!(trace.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn exact_mode_rejects_loose_fallback_tolerance() {
        let p = crate::potentials::gaussian_mixture::<f64>(vec![1.0]).unwrap();
        let opts = RgoOptions {
            s: 1e-3,
            ..RgoOptions::default()
        };
        let mut rng = rng::stream(0, 0);
        assert!(rgo_sample(&p, &[0.0], 0.1, &opts, &mut rng).is_err());
    }

    #[test]
    fn workspace_draws_match_single_draws() {
        use crate::potentials::quadratic_l1;
        let p = quadratic_l1(vec![1.0, 2.0], 0.5).unwrap();
        let y = [0.3, -1.2];
        for (mode, s, closed) in [
            (ProxMode::Exact, 1e-8, true),
            (ProxMode::Exact, 1e-9, false),
            (ProxMode::Approx, 1e-3, true),
        ] {
            let o = RgoOptions {
                closed_form: closed,
                ..opts(mode, s)
            };
            let mut ws = RgoWorkspace::new(&p, 0.05, &o).unwrap();
            let mut r1 = rng::stream(3, 0);
            let mut r2 = rng::stream(3, 0);
            let mut out = [0.0; 2];
            for _ in 0..50 {
                let a = rgo_sample(&p, &y, 0.05, &o, &mut r1).unwrap();
                let st = ws.draw(&p, &y, &mut out, &mut r2).unwrap();
                assert_eq!(a.x, out.to_vec());
                assert_eq!(a.proposals, st.proposals);
                assert_eq!(a.prox.iters, st.prox_iters);
            }
        }
    }
}
