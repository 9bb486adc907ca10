//! Stationary points of `f(x) + ‖x − y‖²/(2η)`.
//!
//! Closed forms cover the separable built-ins; everything else goes through
//! a constant-momentum Nesterov scheme started at `y`.

use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite, check_dim, norm};
use crate::potentials::{Potential, SemiSmoothSpec, Term};
use crate::scalar::Real;

/// Result of a proximal solve.
///
/// `shift` is the subgradient element certifying the residual,
/// `residual = ‖shift + (x_y − y)/η‖`. It is the element of `∂f(x_y)`
/// closest to `(y − x_y)/η`, which is `f'(x_y)` wherever `f` is
/// differentiable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult<F> {
    pub x_y: Vec<F>,
    pub shift: Vec<F>,
    pub residual: F,
    pub iters: usize,
    pub exact: bool,
    pub budget_exceeded: bool,
}

impl<F: Real> ProxResult<F> {
    /// `w = y − η·shift`, the approximate-mode proposal mean.
    pub fn shifted_center(&self, y: &[F], eta: F) -> Vec<F> {
        y.iter()
            .zip(&self.shift)
            .map(|(&yi, &gi)| yi - eta * gi)
            .collect()
    }
}

fn residual_of<F: Real>(shift: &[F], x: &[F], y: &[F], eta: F) -> F {
    shift
        .iter()
        .zip(x)
        .zip(y)
        .fold(F::zero(), |acc, ((&g, &xi), &yi)| {
            let r = g + (xi - yi) / eta;
            acc + r * r
        })
        .sqrt()
}

fn check_eta<F: Real>(eta: F) -> Result<()> {
    if eta > F::zero() && eta.is_finite() {
        Ok(())
    } else {
        invalid(format!("eta must be positive and finite, got {eta}"))
    }
}

/// Solves `(A + I/η) x = b + y/η` for diagonal `A`.
pub fn prox_quadratic<F: Real>(diag: &[F], b: &[F], y: &[F], eta: F) -> Result<ProxResult<F>> {
    check_eta(eta)?;
    check_dim(diag.len(), b)?;
    check_dim(diag.len(), y)?;
    let cf = ClosedForm::Separable {
        diag: diag.to_vec(),
        lin: b.to_vec(),
        lambda: F::zero(),
    };
    let mut out = ProxResult {
        x_y: vec![F::zero(); y.len()],
        shift: vec![F::zero(); y.len()],
        residual: F::zero(),
        iters: 0,
        exact: true,
        budget_exceeded: false,
    };
    let mut buf = Buffers::new(y.len());
    out.residual = cf.solve_into(None, y, eta, &mut out.x_y, &mut out.shift, &mut buf)?;
    Ok(out)
}

/// Scratch vectors for certification.
#[derive(Debug, Clone)]
pub(crate) struct Buffers<F> {
    target: Vec<F>,
    scratch: Vec<F>,
    rest: Vec<F>,
}

impl<F: Real> Buffers<F> {
    pub(crate) fn new(d: usize) -> Self {
        Buffers {
            target: vec![F::zero(); d],
            scratch: vec![F::zero(); d],
            rest: vec![F::zero(); d],
        }
    }
}

/// Writes the closest-subgradient certificate for `x` into `shift` and
/// returns the residual.
fn certify_into<F: Real>(
    p: &Potential<F>,
    x: &[F],
    y: &[F],
    eta: F,
    shift: &mut [F],
    buf: &mut Buffers<F>,
) -> F {
    for i in 0..x.len() {
        buf.target[i] = (y[i] - x[i]) / eta;
    }
    p.closest_subgradient_into(x, &buf.target, shift, &mut buf.scratch, &mut buf.rest);
    residual_of(shift, x, y, eta)
}

/// Structure of a potential whose prox has a closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm<F> {
    /// `½ Σ a_i x_i² − Σ b_i x_i + λ‖x‖₁`
    Separable {
        diag: Vec<F>,
        lin: Vec<F>,
        lambda: F,
    },
    /// `l0 ‖x‖`
    Norm { l0: F },
    /// `Σ_i h_w(x_i)`
    Huber { width: F },
}

impl<F: Real> ClosedForm<F> {
    /// Sums of diagonal quadratics and ℓ1 weights, a lone norm, or a lone
    /// Huber term.
    pub fn detect(p: &Potential<F>) -> Option<Self> {
        let d = p.dim();
        let mut diag = vec![F::zero(); d];
        let mut lin = vec![F::zero(); d];
        let mut lambda = F::zero();
        let mut other: Vec<&Term<F>> = Vec::new();
        let mut separable = false;
        for (t, _) in p.terms() {
            match t {
                Term::Quadratic { diag: a, b } => {
                    for i in 0..d {
                        diag[i] = diag[i] + a[i];
                        lin[i] = lin[i] + b[i];
                    }
                    separable = true;
                }
                Term::L1 { lambda: l } => {
                    lambda = lambda + *l;
                    separable = true;
                }
                Term::Zero => {}
                t => other.push(t),
            }
        }
        match (other.as_slice(), separable) {
            ([], _) => Some(ClosedForm::Separable { diag, lin, lambda }),
            ([Term::Norm { l0 }], false) => Some(ClosedForm::Norm { l0: *l0 }),
            ([Term::Huber { width }], false) => Some(ClosedForm::Huber { width: *width }),
            _ => None,
        }
    }

    /// Writes `x_y` and its certificate; returns the residual. `p` is needed
    /// for the norm and Huber certificates.
    pub(crate) fn solve_into(
        &self,
        p: Option<&Potential<F>>,
        y: &[F],
        eta: F,
        x: &mut [F],
        shift: &mut [F],
        buf: &mut Buffers<F>,
    ) -> Result<F> {
        let inv = F::one() / eta;
        match self {
            ClosedForm::Separable { diag, lin, lambda } => {
                let lambda = *lambda;
                for i in 0..y.len() {
                    let denom = diag[i] + inv;
                    if !(denom > F::zero()) {
                        return Err(Error::IllPosedProx {
                            index: i,
                            value: denom.as_f64(),
                        });
                    }
                    let v = lin[i] + y[i] * inv;
                    let soft = if v > lambda {
                        v - lambda
                    } else if v < -lambda {
                        v + lambda
                    } else {
                        F::zero()
                    };
                    x[i] = soft / denom;
                    // certificate: a x − b + λ·s with s ∈ sign(x), clamped at 0
                    let smooth = diag[i] * x[i] - lin[i];
                    let l1 = if lambda == F::zero() {
                        F::zero()
                    } else if x[i] > F::zero() {
                        lambda
                    } else if x[i] < F::zero() {
                        -lambda
                    } else {
                        ((y[i] - x[i]) * inv - smooth).max(-lambda).min(lambda)
                    };
                    shift[i] = smooth + l1;
                }
                Ok(residual_of(shift, x, y, eta))
            }
            ClosedForm::Norm { l0 } => {
                let n = norm(y);
                let scale = if n > eta * *l0 {
                    F::one() - eta * *l0 / n
                } else {
                    F::zero()
                };
                for (xi, &v) in x.iter_mut().zip(y) {
                    *xi = v * scale;
                }
                Ok(certify_into(
                    p.expect("norm certificate needs the potential"),
                    x,
                    y,
                    eta,
                    shift,
                    buf,
                ))
            }
            ClosedForm::Huber { width } => {
                let w = *width;
                for (xi, &v) in x.iter_mut().zip(y) {
                    *xi = if v.abs() <= w + eta {
                        v * w / (w + eta)
                    } else {
                        v - eta * v.signum()
                    };
                }
                Ok(certify_into(
                    p.expect("Huber certificate needs the potential"),
                    x,
                    y,
                    eta,
                    shift,
                    buf,
                ))
            }
        }
    }
}

/// Closed-form prox when the potential's structure admits one:
/// sums of diagonal quadratics (optionally plus ℓ1 weights), a lone norm,
/// or a lone Huber term. Returns `None` otherwise.
pub fn prox_exact<F: Real>(p: &Potential<F>, y: &[F], eta: F) -> Option<Result<ProxResult<F>>> {
    if let Err(e) = check_eta(eta).and_then(|_| check_dim(p.dim(), y)) {
        return Some(Err(e));
    }
    let cf = ClosedForm::detect(p)?;
    let d = p.dim();
    let mut out = ProxResult {
        x_y: vec![F::zero(); d],
        shift: vec![F::zero(); d],
        residual: F::zero(),
        iters: 0,
        exact: true,
        budget_exceeded: false,
    };
    let mut buf = Buffers::new(d);
    Some(
        cf.solve_into(Some(p), y, eta, &mut out.x_y, &mut out.shift, &mut buf)
            .map(|r| {
                out.residual = r;
                out
            }),
    )
}

/// Inner tolerance `s = d^{1/(2(1+α))} / (7·L^{1/(1+α)})`.
pub fn default_s<F: Real>(spec: &SemiSmoothSpec<F>, d: usize) -> F {
    let one = F::one();
    let a = spec.alpha();
    let d = F::from_usize(d).unwrap();
    d.powf(one / ((one + one) * (one + a))) / (F::lit(7.0) * spec.l_alpha().powf(one / (one + a)))
}

/// Smallest [`default_s`] over the terms of a composite potential.
pub fn default_s_for<F: Real>(p: &Potential<F>) -> F {
    p.terms()
        .iter()
        .map(|(_, s)| default_s(s, p.dim()))
        .fold(F::infinity(), F::min)
}

/// Accelerated-gradient constants for `f_y^η`: returns `(L_agd, β_agd)` with
/// `L_agd = 1/η + M` and `β_agd = max(1/η − M, 1/(2η))`.
pub fn agd_constants<F: Real>(p: &Potential<F>, eta: F) -> (F, F) {
    let m = p.smoothing_constant();
    let inv = F::one() / eta;
    (inv + m, (inv - m).max(inv / F::lit(2.0)))
}

/// Default iteration budget `10·⌈√(L_agd/β_agd)·log(1/s)⌉` (log floored at 1).
pub fn default_max_iters<F: Real>(p: &Potential<F>, eta: F, s: F) -> usize {
    let (l, b) = agd_constants(p, eta);
    let logs = (F::one() / s).ln().max(F::one());
    let n = ((l / b).sqrt() * logs)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX / 10);
    10 * n.max(1)
}

/// Constant-step Nesterov solver for `f_y^η` at a fixed `(η, s)`, reusable
/// across many `y`.
#[derive(Debug, Clone)]
pub struct AgdSolver<F> {
    eta: F,
    tol: F,
    step: F,
    momentum: F,
    max_iters: usize,
    kinked: bool,
    x: Vec<F>,
    v: Vec<F>,
    grad: Vec<F>,
    cand: Vec<F>,
    buf: Buffers<F>,
}

impl<F: Real> AgdSolver<F> {
    pub fn new(p: &Potential<F>, eta: F, s: F, max_iters: Option<usize>) -> Result<Self> {
        check_eta(eta)?;
        if !(s > F::zero()) {
            return invalid(format!("tolerance s must be positive, got {s}"));
        }
        let max_iters = max_iters.unwrap_or_else(|| default_max_iters(p, eta, s));
        if max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        let d = p.dim();
        let (l_agd, beta) = agd_constants(p, eta);
        let sq = (beta / l_agd).sqrt();
        Ok(AgdSolver {
            eta,
            tol: s / eta,
            step: F::one() / l_agd,
            momentum: (F::one() - sq) / (F::one() + sq),
            max_iters,
            kinked: p.has_kinks(),
            x: vec![F::zero(); d],
            v: vec![F::zero(); d],
            grad: vec![F::zero(); d],
            cand: vec![F::zero(); d],
            buf: Buffers::new(d),
        })
    }

    /// Residual tolerance `s/η`.
    pub fn tolerance(&self) -> F {
        self.tol
    }

    /// Solves at `y`, writing the stationary point and its certificate.
    /// Returns `(residual, gradient evaluations)`.
    pub(crate) fn solve_into(
        &mut self,
        p: &Potential<F>,
        y: &[F],
        x_out: &mut [F],
        shift_out: &mut [F],
    ) -> Result<(F, usize)> {
        let d = y.len();
        let eta = self.eta;
        let inv = F::one() / eta;
        self.x.copy_from_slice(y);
        self.v.copy_from_slice(y);
        let mut iters = 0;
        let mut done = false;
        while iters < self.max_iters {
            p.subgradient_into(&self.v, &mut self.grad, &mut self.buf.scratch);
            iters += 1;
            for i in 0..d {
                self.grad[i] = self.grad[i] + (self.v[i] - y[i]) * inv;
            }
            if !all_finite(&self.grad) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in the proximal solve after {iters} iterations"
                )));
            }
            let gnorm = norm(&self.grad);
            if gnorm <= self.tol {
                x_out.copy_from_slice(&self.v);
                done = true;
                break;
            }
            if self.kinked && iters < self.max_iters {
                // the iterate oscillates around kinks it should sit on; try
                // the point snapped onto any kink a step of 2η (the distance
                // bound from strong convexity) would cross
                self.cand.copy_from_slice(&self.v);
                p.snap_to_kinks(&mut self.cand, &self.grad, eta + eta);
                if self.cand != self.v {
                    iters += 1;
                    if certify_into(p, &self.cand, y, eta, shift_out, &mut self.buf) <= self.tol {
                        x_out.copy_from_slice(&self.cand);
                        done = true;
                        break;
                    }
                }
            }
            for i in 0..d {
                let next = self.v[i] - self.step * self.grad[i];
                self.v[i] = next + self.momentum * (next - self.x[i]);
                self.x[i] = next;
            }
        }
        if !done {
            // v was advanced past the last checked point; report the plain
            // iterate
            x_out.copy_from_slice(&self.x);
        }
        let residual = certify_into(p, x_out, y, eta, shift_out, &mut self.buf);
        let energy = p.energy_unchecked(x_out);
        if !energy.is_finite() || !residual.is_finite() {
            return Err(Error::Numeric(
                "non-finite energy at the proximal point".into(),
            ));
        }
        Ok((residual, iters))
    }
}

/// Approximate stationary point with `‖f'(x_y) + (x_y − y)/η‖ ≤ s/η`.
///
/// Constant-step Nesterov descent on `f_y^η` from `y`, step `1/L_agd`,
/// momentum `(1 − √q)/(1 + √q)` with `q = β_agd/L_agd`, no restarts.
/// `iters` counts gradient evaluations. If the budget runs out the last
/// iterate is returned with `budget_exceeded = true`.
pub fn prox_agd<F: Real>(
    p: &Potential<F>,
    y: &[F],
    eta: F,
    s: F,
    max_iters: Option<usize>,
) -> Result<ProxResult<F>> {
    check_dim(p.dim(), y)?;
    let mut solver = AgdSolver::new(p, eta, s, max_iters)?;
    let d = p.dim();
    let mut x_y = vec![F::zero(); d];
    let mut shift = vec![F::zero(); d];
    let (residual, iters) = solver.solve_into(p, y, &mut x_y, &mut shift)?;
    Ok(ProxResult {
        x_y,
        shift,
        residual,
        iters,
        exact: false,
        budget_exceeded: residual > solver.tol,
    })
}
