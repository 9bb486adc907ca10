//! Step sizes and run planning.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::potentials::{Potential, SemiSmoothSpec};
use crate::rgo::ProxMode;
use crate::scalar::Real;

/// Leading constant of the step-size bounds: 49 with an exact prox, 98 when
/// the proposal is centred at an approximate stationary point.
pub fn mode_constant<F: Real>(mode: ProxMode) -> F {
    match mode {
        ProxMode::Exact => F::lit(49.0),
        ProxMode::Approx => F::lit(98.0),
    }
}

fn check_args<F: Real>(d: usize, zeta: F) -> Result<()> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    if !(zeta > F::zero()) || !zeta.is_finite() {
        return invalid(format!("zeta must be positive and finite, got {zeta}"));
    }
    Ok(())
}

fn d_of<F: Real>(d: usize) -> F {
    F::from_usize(d).unwrap()
}

/// `L^{2/(α+1)} d^{α/(α+1)}`
fn scale<F: Real>(spec: &SemiSmoothSpec<F>, d: usize) -> F {
    let one = F::one();
    let a = spec.alpha();
    spec.l_alpha().powf((one + one) / (a + one)) * d_of::<F>(d).powf(a / (a + one))
}

/// `1 / (c·L^{2/(α+1)}·d^{α/(α+1)}·(1 + ln(1 + 12/ζ)))`
pub fn eta_tv<F: Real>(spec: &SemiSmoothSpec<F>, d: usize, zeta: F, mode: ProxMode) -> Result<F> {
    check_args(d, zeta)?;
    let log = F::one() + (F::one() + F::lit(12.0) / zeta).ln();
    Ok(F::one() / (mode_constant::<F>(mode) * scale(spec, d) * log))
}

fn w2_log<F: Real>(d: usize, n: usize, zeta: F) -> F {
    let d = d_of::<F>(d);
    let n = d_of::<F>(n);
    let z2 = zeta * zeta;
    F::lit(2.0) + (F::one() + F::lit(192.0) * n * (d * d + F::lit(2.0) * d) / (z2 * z2)).ln()
}

/// `min(1 / (c·L^{2/(α+1)}·d^{α/(α+1)}·(2 + ln(1 + 192(d²+2d)/ζ⁴))), 1)`
pub fn eta_w2<F: Real>(spec: &SemiSmoothSpec<F>, d: usize, zeta: F, mode: ProxMode) -> Result<F> {
    check_args(d, zeta)?;
    let v = F::one() / (mode_constant::<F>(mode) * scale(spec, d) * w2_log(d, 1, zeta));
    Ok(v.min(F::one()))
}

fn composite_terms<F: Real>(specs: &[SemiSmoothSpec<F>], d: usize) -> Result<Vec<F>> {
    if specs.is_empty() {
        return invalid("at least one component is required");
    }
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    let one = F::one();
    let two = one + one;
    Ok(specs
        .iter()
        .map(|s| {
            let a = s.alpha();
            s.l_alpha().powf(one / (a + one)) * d_of::<F>(d).powf(a / (two * (a + one)))
        })
        .collect())
}

/// `w_j ∝ L_j^{1/(α_j+1)} d^{α_j/(2(α_j+1))}`, normalised to sum to one.
pub fn composite_weights<F: Real>(specs: &[SemiSmoothSpec<F>], d: usize) -> Result<Vec<F>> {
    let t = composite_terms(specs, d)?;
    let total: F = t.iter().copied().sum();
    Ok(t.into_iter().map(|v| v / total).collect())
}

/// `M = (Σ_j L_j^{1/(α_j+1)} d^{α_j/(2(α_j+1))})²`
pub fn composite_scale<F: Real>(specs: &[SemiSmoothSpec<F>], d: usize) -> Result<F> {
    let total: F = composite_terms(specs, d)?.into_iter().sum();
    Ok(total * total)
}

/// `1 / (c·M·(1 + ln(1 + 12n/ζ)))`
pub fn eta_tv_composite<F: Real>(
    specs: &[SemiSmoothSpec<F>],
    d: usize,
    zeta: F,
    mode: ProxMode,
) -> Result<F> {
    check_args(d, zeta)?;
    let m = composite_scale(specs, d)?;
    let n = d_of::<F>(specs.len());
    let log = F::one() + (F::one() + F::lit(12.0) * n / zeta).ln();
    Ok(F::one() / (mode_constant::<F>(mode) * m * log))
}

/// `min(1 / (c·M·(2 + ln(1 + 192n(d²+2d)/ζ⁴))), 1)`
pub fn eta_w2_composite<F: Real>(
    specs: &[SemiSmoothSpec<F>],
    d: usize,
    zeta: F,
    mode: ProxMode,
) -> Result<F> {
    check_args(d, zeta)?;
    let m = composite_scale(specs, d)?;
    let v = F::one() / (mode_constant::<F>(mode) * m * w2_log(d, specs.len(), zeta));
    Ok(v.min(F::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Tv,
    W2,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Tv => "tv",
            Metric::W2 => "w2",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Step size for a potential with one or several terms. A single term uses
/// the plain formula.
pub fn eta_for<F: Real>(
    specs: &[SemiSmoothSpec<F>],
    d: usize,
    zeta: F,
    metric: Metric,
    mode: ProxMode,
) -> Result<F> {
    match (specs, metric) {
        ([s], Metric::Tv) => eta_tv(s, d, zeta, mode),
        ([s], Metric::W2) => eta_w2(s, d, zeta, mode),
        (_, Metric::Tv) => eta_tv_composite(specs, d, zeta, mode),
        (_, Metric::W2) => eta_w2_composite(specs, d, zeta, mode),
    }
}

/// What is known about the target, with the initial-distance quantity each
/// regime needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assumption<F> {
    /// `β`-strongly log-concave, `kl_init = KL(μ₀ ‖ ν)`.
    StronglyLogConcave { beta: F, kl_init: F },
    /// Log-concave, `w2_init = W₂(μ₀, ν)`.
    LogConcave { w2_init: F },
    /// Log-Sobolev with constant `c_lsi`, `kl_init = KL(μ₀ ‖ ν)`.
    Lsi { c_lsi: F, kl_init: F },
    /// Poincaré with constant `c_pi`, `chi2_init = χ²(μ₀ ‖ ν)`.
    Pi { c_pi: F, chi2_init: F },
}

impl<F: Real> Assumption<F> {
    pub fn name(&self) -> &'static str {
        match self {
            Assumption::StronglyLogConcave { .. } => "strongly_log_concave",
            Assumption::LogConcave { .. } => "log_concave",
            Assumption::Lsi { .. } => "lsi",
            Assumption::Pi { .. } => "pi",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[(&str, F)] = match self {
            Assumption::StronglyLogConcave { beta, kl_init } => {
                &[("beta", *beta), ("kl_init", *kl_init)]
            }
            Assumption::LogConcave { w2_init } => &[("w2_init", *w2_init)],
            Assumption::Lsi { c_lsi, kl_init } => &[("c_lsi", *c_lsi), ("kl_init", *kl_init)],
            Assumption::Pi { c_pi, chi2_init } => &[("c_pi", *c_pi), ("chi2_init", *chi2_init)],
        };
        for (name, v) in params {
            if !(*v > F::zero()) || !v.is_finite() {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Number of steps after which the regime's contraction bound reaches
    /// accuracy `delta` at step size `eta`. At least 1.
    pub fn steps_needed(&self, eta: F, delta: F, metric: Metric) -> Result<u64> {
        let one = F::one();
        let two = one + one;
        let t = match (*self, metric) {
            (Assumption::StronglyLogConcave { beta, kl_init }, Metric::Tv) => {
                (two / delta * (two * kl_init).sqrt()).ln() / (one + beta * eta).ln()
            }
            (Assumption::StronglyLogConcave { beta, kl_init }, Metric::W2) => {
                (two / delta * (two * kl_init / beta).sqrt()).ln() / (one + beta * eta).ln()
            }
            (Assumption::Lsi { c_lsi, kl_init }, Metric::Tv) => {
                (two / delta * (two * kl_init).sqrt()).ln() / (one + c_lsi * eta).ln()
            }
            (Assumption::LogConcave { w2_init }, Metric::Tv) => {
                F::lit(8.0) * w2_init * w2_init / (delta * delta * eta)
            }
            (Assumption::Pi { c_pi, chi2_init }, Metric::Tv) => {
                let denom = (delta * delta / F::lit(8.0)).exp() - one;
                (chi2_init / denom).ln() / (two * (one + c_pi * eta).ln())
            }
            (a, Metric::W2) => {
                return invalid(format!(
                    "W2 planning requires strong log-concavity, not {}",
                    a.name()
                ))
            }
        };
        if !t.is_finite() {
            return Err(Error::Numeric(format!("step count is not finite ({t})")));
        }
        let t = t.ceil().max(one);
        t.to_u64()
            .ok_or_else(|| Error::Numeric(format!("step count {t} does not fit in u64")))
    }
}

/// A complete run schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan<F> {
    pub eta: F,
    pub t_steps: u64,
    /// Per-step oracle accuracy, `δ/(2T)`.
    pub zeta: F,
    pub delta: F,
    pub metric: Metric,
    pub mode: ProxMode,
    /// Fixed-point rounds used by [`plan_run`].
    pub rounds: usize,
}

impl<F: Real> Plan<F> {
    /// A hand-made schedule. `zeta` is set to `delta/(2T)`.
    pub fn manual(eta: F, t_steps: u64, delta: F, metric: Metric, mode: ProxMode) -> Result<Self> {
        if !(eta > F::zero()) || !eta.is_finite() {
            return invalid(format!("eta must be positive and finite, got {eta}"));
        }
        let zeta = if t_steps == 0 {
            delta
        } else {
            split_budget(delta, t_steps)
        };
        Ok(Plan {
            eta,
            t_steps,
            zeta,
            delta,
            metric,
            mode,
            rounds: 0,
        })
    }

    /// Re-evaluates the defining inequalities: `η` within the step-size bound
    /// at `ζ`, `T` steps enough for the regime, and `ζ·T = δ/2` up to rounding.
    pub fn satisfies(&self, p: &Potential<F>, a: &Assumption<F>) -> Result<bool> {
        let bound = eta_for(&p.specs(), p.dim(), self.zeta, self.metric, self.mode)?;
        let needed = a.steps_needed(self.eta, self.delta, self.metric)?;
        let zt = self.zeta * F::from_u64(self.t_steps).unwrap();
        let half = self.delta / F::lit(2.0);
        let tol = F::lit(4.0) * F::epsilon() * half;
        Ok(self.eta <= bound && needed <= self.t_steps && (zt - half).abs() <= tol)
    }
}

/// `δ/(2T)`, correctly rounded.
fn split_budget<F: Real>(delta: F, t: u64) -> F {
    delta / (F::lit(2.0) * F::from_u64(t).unwrap())
}

pub const PLAN_INITIAL_T: u64 = 100;
pub const PLAN_MAX_ROUNDS: usize = 100;

/// Solves for `(T, η, ζ)` with `ζ = δ/(2T)`, `η` the step-size bound at `ζ`
/// and `T` the regime's step count at `η`.
///
/// Starts from `T = 100` and iterates until `T` repeats.
pub fn plan_run<F: Real>(
    p: &Potential<F>,
    a: &Assumption<F>,
    delta: F,
    metric: Metric,
    mode: ProxMode,
) -> Result<Plan<F>> {
    if !(delta > F::zero() && delta < F::one()) {
        return invalid(format!("delta must lie in (0, 1), got {delta}"));
    }
    a.validate()?;
    if metric == Metric::W2 && !matches!(a, Assumption::StronglyLogConcave { .. }) {
        return invalid(format!(
            "W2 planning requires strong log-concavity, not {}",
            a.name()
        ));
    }
    let specs = p.specs();
    let mut t = PLAN_INITIAL_T;
    let mut eta = F::nan();
    for round in 1..=PLAN_MAX_ROUNDS {
        let zeta = split_budget(delta, t);
        eta = eta_for(&specs, p.dim(), zeta, metric, mode)?;
        let next = a.steps_needed(eta, delta, metric)?;
        if next == t {
            return Ok(Plan {
                eta,
                t_steps: t,
                zeta,
                delta,
                metric,
                mode,
                rounds: round,
            });
        }
        t = next;
    }
    Err(Error::PlanNotConverged {
        rounds: PLAN_MAX_ROUNDS,
        last_t: t,
        last_eta: eta.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{isotropic_gaussian, norm_potential};
    use approx::assert_relative_eq;

    fn spec(a: f64, l: f64) -> SemiSmoothSpec<f64> {
        SemiSmoothSpec::new(a, l).unwrap()
    }

    #[test]
    fn eta_tv_examples() {
        let e = eta_tv(&spec(1.0, 1.0), 100, 0.01, ProxMode::Exact).unwrap();
        assert_relative_eq!(
            e,
            1.0 / (490.0 * (1.0 + 1201f64.ln())),
            max_relative = 1e-14
        );
        assert!((e - 2.522e-4).abs() < 1e-7);
        for d in [1, 7, 1000] {
            let e = eta_tv(&spec(0.0, 1.0), d, 1.0, ProxMode::Exact).unwrap();
            assert_relative_eq!(e, 1.0 / (49.0 * (1.0 + 13f64.ln())), max_relative = 1e-14);
        }
        let a = eta_tv(&spec(1.0, 1.0), 9, 0.3, ProxMode::Exact).unwrap();
        let b = eta_tv(&spec(1.0, 1.0), 36, 0.3, ProxMode::Exact).unwrap();
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn eta_w2_examples() {
        let e = eta_w2(&spec(1.0, 1.0), 4, 0.1, ProxMode::Exact).unwrap();
        assert_relative_eq!(
            e,
            1.0 / (98.0 * (2.0 + (1.0 + 192.0 * 24.0 / 1e-4f64).ln())),
            max_relative = 1e-13
        );
        assert!((e - 5.19e-4).abs() < 1e-6);
        assert_eq!(
            eta_w2(&spec(1.0, 1e-9), 1, 1e6, ProxMode::Exact).unwrap(),
            1.0
        );
        let e = eta_w2(&spec(0.0, 1.0), 1, 1.0, ProxMode::Exact).unwrap();
        assert_relative_eq!(e, 1.0 / (49.0 * (2.0 + 577f64.ln())), max_relative = 1e-14);
    }

    #[test]
    fn approx_mode_halves_the_step() {
        let s = spec(0.4, 2.5);
        let exact = eta_tv(&s, 13, 0.02, ProxMode::Exact).unwrap();
        let approx = eta_tv(&s, 13, 0.02, ProxMode::Approx).unwrap();
        assert_eq!(approx / exact, 0.5);
    }

    #[test]
    fn bad_arguments() {
        assert!(eta_tv(&spec(1.0, 1.0), 0, 0.1, ProxMode::Exact).is_err());
        assert!(eta_tv(&spec(1.0, 1.0), 3, 0.0, ProxMode::Exact).is_err());
        assert!(composite_weights::<f64>(&[], 3).is_err());
    }

    #[test]
    fn weights_and_composite() {
        let specs = [spec(1.0, 1.0), spec(0.0, 1.0)];
        let w = composite_weights(&specs, 16).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(composite_weights(&[spec(0.3, 2.0)], 5).unwrap(), vec![1.0]);
        assert_eq!(
            composite_weights(&[spec(0.3, 2.0); 2], 5).unwrap(),
            vec![0.5, 0.5]
        );

        let e = eta_tv_composite(&specs, 16, 0.1, ProxMode::Exact).unwrap();
        assert_relative_eq!(
            e,
            1.0 / (49.0 * 9.0 * (1.0 + 241f64.ln())),
            max_relative = 1e-13
        );
        assert!((e - 3.50e-4).abs() < 1e-6);

        let s = spec(0.6, 1.7);
        assert_relative_eq!(
            eta_tv_composite(&[s], 10, 0.2, ProxMode::Exact).unwrap(),
            eta_tv(&s, 10, 0.2, ProxMode::Exact).unwrap(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            eta_w2_composite(&[s], 10, 0.2, ProxMode::Exact).unwrap(),
            eta_w2(&s, 10, 0.2, ProxMode::Exact).unwrap(),
            max_relative = 1e-14
        );
        let both = eta_w2_composite(&specs, 4, 0.1, ProxMode::Exact).unwrap();
        for s in &specs {
            assert!(both < eta_w2(s, 4, 0.1, ProxMode::Exact).unwrap());
        }
        assert_eq!(
            eta_w2_composite(&[spec(1.0, 1e-9); 2], 1, 1e6, ProxMode::Exact).unwrap(),
            1.0
        );

        let doubled = [spec(1.0, 1.0), spec(0.0, 2.0)];
        let single = [spec(0.0, 1.0)];
        let single2 = [spec(0.0, 2.0)];
        let r = eta_tv_composite(&single, 3, 0.1, ProxMode::Exact).unwrap()
            / eta_tv_composite(&single2, 3, 0.1, ProxMode::Exact).unwrap();
        assert_relative_eq!(r, 4.0, max_relative = 1e-14);
        assert!(eta_tv_composite(&doubled, 3, 0.1, ProxMode::Exact).unwrap() < e);
    }

    #[test]
    fn monotone_on_grid() {
        let ls = [0.1, 0.5, 1.0, 3.0, 10.0];
        let ds = [1usize, 2, 8, 32, 128];
        let zs = [1e-4, 1e-3, 1e-2, 0.1, 1.0];
        for alpha in [0.0, 0.5, 1.0] {
            for (li, &l) in ls.iter().enumerate() {
                for (di, &d) in ds.iter().enumerate() {
                    for (zi, &z) in zs.iter().enumerate() {
                        let s = spec(alpha, l);
                        let e = eta_tv(&s, d, z, ProxMode::Exact).unwrap();
                        if li > 0 {
                            assert!(
                                e < eta_tv(&spec(alpha, ls[li - 1]), d, z, ProxMode::Exact)
                                    .unwrap()
                            );
                        }
                        if di > 0 && alpha > 0.0 {
                            assert!(e < eta_tv(&s, ds[di - 1], z, ProxMode::Exact).unwrap());
                        }
                        if zi > 0 {
                            assert!(e > eta_tv(&s, d, zs[zi - 1], ProxMode::Exact).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn plan_strongly_log_concave() {
        let p = isotropic_gaussian::<f64>(4).unwrap();
        let a = Assumption::StronglyLogConcave {
            beta: 1.0,
            kl_init: 4.0,
        };
        let plan = plan_run(&p, &a, 0.1, Metric::Tv, ProxMode::Exact).unwrap();
        assert!(plan.satisfies(&p, &a).unwrap());
        assert_eq!(
            plan.eta,
            eta_tv(&spec(1.0, 1.0), 4, plan.zeta, ProxMode::Exact).unwrap()
        );
        assert_eq!(
            plan.t_steps,
            a.steps_needed(plan.eta, 0.1, Metric::Tv).unwrap()
        );
        assert_eq!(plan.t_steps, 6006);
        assert_relative_eq!(plan.eta, 6.721_545_491_842_467e-4, max_relative = 1e-12);
        assert_relative_eq!(plan.zeta, 8.325008325008325e-6, max_relative = 1e-14);
        let w2 = plan_run(&p, &a, 0.1, Metric::W2, ProxMode::Exact).unwrap();
        assert!(w2.satisfies(&p, &a).unwrap());
    }

    #[test]
    fn plan_log_concave_and_others() {
        let p = norm_potential::<f64>(1, 0.5).unwrap();
        let a = Assumption::LogConcave { w2_init: 1.0 };
        let plan = plan_run(&p, &a, 0.5, Metric::Tv, ProxMode::Exact).unwrap();
        assert!(plan.satisfies(&p, &a).unwrap());
        assert_eq!(plan.t_steps, (8.0 / (0.25 * plan.eta)).ceil() as u64);
        assert_eq!(plan.t_steps, 23414);
        assert_relative_eq!(plan.eta, 1.3667134424670424e-3, max_relative = 1e-12);
        for a in [
            Assumption::Lsi {
                c_lsi: 0.5,
                kl_init: 2.0,
            },
            Assumption::Pi {
                c_pi: 0.25,
                chi2_init: 3.0,
            },
        ] {
            let plan = plan_run(&p, &a, 0.2, Metric::Tv, ProxMode::Approx).unwrap();
            assert!(plan.satisfies(&p, &a).unwrap());
            assert!(plan_run(&p, &a, 0.2, Metric::W2, ProxMode::Exact).is_err());
        }
    }

    #[test]
    fn plan_rejects_bad_input() {
        let p = isotropic_gaussian::<f64>(2).unwrap();
        let a = Assumption::StronglyLogConcave {
            beta: 1.0,
            kl_init: 1.0,
        };
        assert!(plan_run(&p, &a, 1.0, Metric::Tv, ProxMode::Exact).is_err());
        assert!(plan_run(&p, &a, 0.0, Metric::Tv, ProxMode::Exact).is_err());
        let bad = Assumption::StronglyLogConcave {
            beta: -1.0,
            kl_init: 1.0,
        };
        assert!(plan_run(&p, &bad, 0.1, Metric::Tv, ProxMode::Exact).is_err());
    }

    #[test]
    fn tiny_initial_error_needs_one_step() {
        let a = Assumption::StronglyLogConcave {
            beta: 1.0,
            kl_init: 1e-6,
        };
        assert_eq!(a.steps_needed(0.1, 0.5, Metric::Tv).unwrap(), 1);
    }
}
