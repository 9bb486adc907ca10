//! Potentials `f = Σ_j f_j`, each term tagged with its declared
//! semi-smoothness `‖f_j'(u) − f_j'(v)‖ ≤ L_j ‖u − v‖^{α_j}`.
//!
//! The built-in terms cover the targets used by the planners and the
//! verification harness. Arbitrary terms plug in through [`Component`].

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_dim, dist, norm};
use crate::rng;
use crate::scalar::Real;

/// Declared smoothness class of one term: order `alpha ∈ [0, 1]` and
/// constant `l_alpha > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiSmoothSpec<F> {
    alpha: F,
    l_alpha: F,
}

impl<F: Real> SemiSmoothSpec<F> {
    pub fn new(alpha: F, l_alpha: F) -> Result<Self> {
        if !(alpha >= F::zero() && alpha <= F::one()) {
            return invalid(format!(
                "semi-smoothness order must lie in [0, 1], got {alpha}"
            ));
        }
        if !(l_alpha > F::zero() && l_alpha.is_finite()) {
            return invalid(format!(
                "semi-smoothness constant must be positive, got {l_alpha}"
            ));
        }
        Ok(SemiSmoothSpec { alpha, l_alpha })
    }

    #[inline]
    pub fn alpha(&self) -> F {
        self.alpha
    }

    #[inline]
    pub fn l_alpha(&self) -> F {
        self.l_alpha
    }
}

/// A user-supplied potential term.
///
/// `subgradient_into` must be deterministic. `closest_subgradient_into` only
/// needs overriding for terms with kinks, where it should return the element
/// of the subdifferential closest to `target`.
pub trait Component<F: Real>: Send + Sync {
    fn name(&self) -> &str;
    fn energy(&self, x: &[F]) -> F;
    fn subgradient_into(&self, x: &[F], out: &mut [F]);

    fn closest_subgradient_into(&self, x: &[F], _target: &[F], out: &mut [F]) {
        self.subgradient_into(x, out)
    }

    /// Whether a gradient discontinuity lies within distance `h` of `x`.
    fn near_kink(&self, _x: &[F], _h: F) -> bool {
        false
    }
}

/// One term of a potential.
#[derive(Clone)]
pub enum Term<F: Real> {
    /// `½ Σ a_i x_i² − Σ b_i x_i`
    Quadratic {
        diag: Vec<F>,
        b: Vec<F>,
    },
    /// `l0 ‖x‖`
    Norm {
        l0: F,
    },
    /// `Σ_i h_w(x_i)` with `h_w(t) = t²/(2w)` for `|t| ≤ w`, `|t| − w/2` otherwise.
    Huber {
        width: F,
    },
    /// `λ Σ_i |x_i|`
    L1 {
        lambda: F,
    },
    /// `½‖x‖² − log cosh⟨m, x⟩`, the negative log density (up to a constant)
    /// of `½N(m, I) + ½N(−m, I)`.
    Mixture {
        mean: Vec<F>,
    },
    /// `f ≡ 0`
    Zero,
    Custom(Arc<dyn Component<F>>),
}

impl<F: Real> fmt::Debug for Term<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Quadratic { diag, b } => f
                .debug_struct("Quadratic")
                .field("diag", diag)
                .field("b", b)
                .finish(),
            Term::Norm { l0 } => f.debug_struct("Norm").field("l0", l0).finish(),
            Term::Huber { width } => f.debug_struct("Huber").field("width", width).finish(),
            Term::L1 { lambda } => f.debug_struct("L1").field("lambda", lambda).finish(),
            Term::Mixture { mean } => f.debug_struct("Mixture").field("mean", mean).finish(),
            Term::Zero => write!(f, "Zero"),
            Term::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

#[inline]
fn log_cosh<F: Real>(t: F) -> F {
    // |t| + log(1 + e^{-2|t|}) - log 2, stable for large |t|
    let a = t.abs();
    a + (-(a + a)).exp().ln_1p() - F::lit(std::f64::consts::LN_2)
}

impl<F: Real> Term<F> {
    pub fn name(&self) -> &str {
        match self {
            Term::Quadratic { .. } => "quadratic",
            Term::Norm { .. } => "norm",
            Term::Huber { .. } => "huber",
            Term::L1 { .. } => "l1",
            Term::Mixture { .. } => "gaussian_mixture",
            Term::Zero => "zero",
            Term::Custom(c) => c.name(),
        }
    }

    pub fn energy(&self, x: &[F]) -> F {
        let half = F::lit(0.5);
        match self {
            Term::Quadratic { diag, b } => x
                .iter()
                .zip(diag)
                .zip(b)
                .fold(F::zero(), |acc, ((&xi, &ai), &bi)| {
                    acc + half * ai * xi * xi - bi * xi
                }),
            Term::Norm { l0 } => *l0 * norm(x),
            Term::Huber { width } => {
                let w = *width;
                x.iter().fold(F::zero(), |acc, &t| {
                    let a = t.abs();
                    acc + if a <= w {
                        half * t * t / w
                    } else {
                        a - half * w
                    }
                })
            }
            Term::L1 { lambda } => *lambda * x.iter().fold(F::zero(), |acc, &t| acc + t.abs()),
            Term::Mixture { mean } => {
                let mut sq = F::zero();
                let mut proj = F::zero();
                for (&xi, &mi) in x.iter().zip(mean) {
                    sq = sq + xi * xi;
                    proj = proj + mi * xi;
                }
                half * sq - log_cosh(proj)
            }
            Term::Zero => F::zero(),
            Term::Custom(c) => c.energy(x),
        }
    }

    /// Writes the deterministic subgradient selection (minimal-norm element
    /// at kinks) into `out`.
    pub fn subgradient_into(&self, x: &[F], out: &mut [F]) {
        match self {
            Term::Quadratic { diag, b } => {
                for i in 0..x.len() {
                    out[i] = diag[i] * x[i] - b[i];
                }
            }
            Term::Norm { l0 } => {
                let n = norm(x);
                if n > F::zero() {
                    let s = *l0 / n;
                    for (o, &xi) in out.iter_mut().zip(x) {
                        *o = s * xi;
                    }
                } else {
                    out.iter_mut().for_each(|o| *o = F::zero());
                }
            }
            Term::Huber { width } => {
                for (o, &t) in out.iter_mut().zip(x) {
                    *o = (t / *width).max(-F::one()).min(F::one());
                }
            }
            Term::L1 { lambda } => {
                for (o, &t) in out.iter_mut().zip(x) {
                    *o = if t > F::zero() {
                        *lambda
                    } else if t < F::zero() {
                        -*lambda
                    } else {
                        F::zero()
                    };
                }
            }
            Term::Mixture { mean } => {
                let proj = x
                    .iter()
                    .zip(mean)
                    .fold(F::zero(), |acc, (&a, &b)| acc + a * b);
                let th = proj.tanh();
                for i in 0..x.len() {
                    out[i] = x[i] - mean[i] * th;
                }
            }
            Term::Zero => out.iter_mut().for_each(|o| *o = F::zero()),
            Term::Custom(c) => c.subgradient_into(x, out),
        }
    }

    fn has_kinks(&self) -> bool {
        matches!(self, Term::Norm { .. } | Term::L1 { .. } | Term::Custom(_))
    }

    /// Element of the subdifferential at `x` closest to `target`.
    pub fn closest_subgradient_into(&self, x: &[F], target: &[F], out: &mut [F]) {
        match self {
            Term::Norm { l0 } if norm(x) == F::zero() => {
                let n = norm(target);
                let s = if n > *l0 { *l0 / n } else { F::one() };
                for (o, &t) in out.iter_mut().zip(target) {
                    *o = s * t;
                }
            }
            Term::L1 { lambda } => {
                self.subgradient_into(x, out);
                for i in 0..x.len() {
                    if x[i] == F::zero() {
                        out[i] = target[i].max(-*lambda).min(*lambda);
                    }
                }
            }
            Term::Custom(c) => c.closest_subgradient_into(x, target, out),
            _ => self.subgradient_into(x, out),
        }
    }

    /// Moves `x` onto a kink when a step of length `t` along `−grad` would
    /// cross it.
    fn snap_to_kink(&self, x: &mut [F], grad: &[F], t: F) {
        match self {
            Term::Norm { .. } if norm(x) <= t * norm(grad) => {
                x.iter_mut().for_each(|v| *v = F::zero())
            }
            Term::L1 { .. } => {
                for (v, &g) in x.iter_mut().zip(grad) {
                    if v.abs() <= t * g.abs() && *v * g > F::zero() {
                        *v = F::zero();
                    }
                }
            }
            _ => {}
        }
    }

    /// Whether `x` lies within `h` of a point where the gradient (or, for
    /// Huber, the second derivative) is discontinuous.
    pub fn near_kink(&self, x: &[F], h: F) -> bool {
        match self {
            Term::Norm { .. } => norm(x) <= h,
            Term::L1 { .. } => x.iter().any(|t| t.abs() <= h),
            Term::Huber { width } => x.iter().any(|t| (t.abs() - *width).abs() <= h),
            Term::Custom(c) => c.near_kink(x, h),
            _ => false,
        }
    }
}

/// Evaluable energy `f = Σ_j f_j` on `ℝ^dim` with per-term smoothness specs.
///
/// Immutable after construction; cheap to clone (terms are small or shared).
#[derive(Debug, Clone)]
pub struct Potential<F: Real> {
    dim: usize,
    terms: Vec<(Term<F>, SemiSmoothSpec<F>)>,
    name: String,
}

impl<F: Real> Potential<F> {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        terms: Vec<(Term<F>, SemiSmoothSpec<F>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if terms.is_empty() {
            return invalid("a potential needs at least one term");
        }
        for (t, _) in &terms {
            let len = match t {
                Term::Quadratic { diag, b } => {
                    if diag.len() != b.len() {
                        return invalid("quadratic term: diag and b lengths differ");
                    }
                    Some(diag.len())
                }
                Term::Mixture { mean } => Some(mean.len()),
                _ => None,
            };
            if let Some(got) = len {
                if got != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got });
                }
            }
            let positive = match t {
                Term::Norm { l0 } => Some(*l0),
                Term::Huber { width } => Some(*width),
                Term::L1 { lambda } => Some(*lambda),
                _ => None,
            };
            if let Some(v) = positive {
                if !(v > F::zero() && v.is_finite()) {
                    return invalid(format!(
                        "{} term parameter must be positive, got {v}",
                        t.name()
                    ));
                }
            }
        }
        Ok(Potential {
            dim,
            terms,
            name: name.into(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[(Term<F>, SemiSmoothSpec<F>)] {
        &self.terms
    }

    pub fn specs(&self) -> Vec<SemiSmoothSpec<F>> {
        self.terms.iter().map(|(_, s)| *s).collect()
    }

    /// The same potential plus a constant offset (a `Custom` term).
    pub fn with_constant(&self, c: F) -> Self {
        let mut terms = self.terms.clone();
        terms.push((
            Term::Custom(Arc::new(ConstantTerm(c))),
            SemiSmoothSpec {
                alpha: F::one(),
                l_alpha: F::one(),
            },
        ));
        Potential {
            dim: self.dim,
            terms,
            name: format!("{}+const", self.name),
        }
    }

    /// `Σ_j f_j(x)`, summed in term order.
    pub fn energy(&self, x: &[F]) -> Result<F> {
        check_dim(self.dim, x)?;
        Ok(self.energy_unchecked(x))
    }

    #[inline]
    pub(crate) fn energy_unchecked(&self, x: &[F]) -> F {
        self.terms
            .iter()
            .fold(F::zero(), |acc, (t, _)| acc + t.energy(x))
    }

    /// `Σ_j f_j'(x)` with the minimal-norm selection at kinks.
    pub fn subgradient(&self, x: &[F]) -> Result<Vec<F>> {
        check_dim(self.dim, x)?;
        let mut out = vec![F::zero(); self.dim];
        let mut scratch = vec![F::zero(); self.dim];
        self.subgradient_into(x, &mut out, &mut scratch);
        Ok(out)
    }

    /// Unchecked form of [`Potential::subgradient`]; `scratch` must have length `dim`.
    #[inline]
    pub(crate) fn subgradient_into(&self, x: &[F], out: &mut [F], scratch: &mut [F]) {
        out.iter_mut().for_each(|o| *o = F::zero());
        for (t, _) in &self.terms {
            t.subgradient_into(x, scratch);
            for (o, &s) in out.iter_mut().zip(scratch.iter()) {
                *o = *o + s;
            }
        }
    }

    pub fn has_kinks(&self) -> bool {
        self.terms.iter().any(|(t, _)| t.has_kinks())
    }

    pub(crate) fn snap_to_kinks(&self, x: &mut [F], grad: &[F], t: F) {
        for (term, _) in &self.terms {
            term.snap_to_kink(x, grad, t);
        }
    }

    /// Subgradient element at `x` closest to `target`, assembled term by term:
    /// kink-free terms contribute their gradient, kinked terms then absorb
    /// what remains of `target`. Exact whenever at most one term has a kink
    /// at `x`.
    pub fn closest_subgradient(&self, x: &[F], target: &[F]) -> Result<Vec<F>> {
        check_dim(self.dim, x)?;
        check_dim(self.dim, target)?;
        let d = self.dim;
        let mut acc = vec![F::zero(); d];
        let mut scratch = vec![F::zero(); d];
        let mut rest = vec![F::zero(); d];
        self.closest_subgradient_into(x, target, &mut acc, &mut scratch, &mut rest);
        Ok(acc)
    }

    /// Unchecked form of [`Potential::closest_subgradient`]; all buffers
    /// have length `dim`.
    pub(crate) fn closest_subgradient_into(
        &self,
        x: &[F],
        target: &[F],
        acc: &mut [F],
        scratch: &mut [F],
        rest: &mut [F],
    ) {
        let d = self.dim;
        acc.iter_mut().for_each(|a| *a = F::zero());
        for (t, _) in self.terms.iter().filter(|(t, _)| !t.has_kinks()) {
            t.subgradient_into(x, scratch);
            for i in 0..d {
                acc[i] = acc[i] + scratch[i];
            }
        }
        for (t, _) in self.terms.iter().filter(|(t, _)| t.has_kinks()) {
            for i in 0..d {
                rest[i] = target[i] - acc[i];
            }
            t.closest_subgradient_into(x, rest, scratch);
            for i in 0..d {
                acc[i] = acc[i] + scratch[i];
            }
        }
    }

    /// Lower bound on the per-term constant `M = Σ_j L_j^{2/(1+α_j)} / (1+α_j)^{(1−α_j)/(1+α_j)}`
    /// used by the inner accelerated solver.
    pub fn smoothing_constant(&self) -> F {
        self.terms.iter().fold(F::zero(), |acc, (_, s)| {
            let a = s.alpha;
            let one = F::one();
            acc + s.l_alpha.powf((one + one) / (one + a)) / (one + a).powf((one - a) / (one + a))
        })
    }

    /// Per-term maximum of `‖f_j'(u) − f_j'(v)‖ / ‖u − v‖^{α_j}` over
    /// `n_pairs` pairs drawn uniformly from the ball of radius `radius`.
    pub fn empirical_semismooth_check(
        &self,
        n_pairs: usize,
        radius: F,
        seed: u64,
    ) -> Result<SemiSmoothReport<F>> {
        if n_pairs == 0 {
            return invalid("n_pairs must be at least 1");
        }
        if !(radius > F::zero()) {
            return invalid("radius must be positive");
        }
        let d = self.dim;
        let mut rng = rng::stream(seed, 0);
        let mut max_ratio = vec![F::zero(); self.terms.len()];
        let (mut u, mut v) = (vec![F::zero(); d], vec![F::zero(); d]);
        let (mut gu, mut gv) = (vec![F::zero(); d], vec![F::zero(); d]);
        for _ in 0..n_pairs {
            uniform_in_ball(&mut rng, radius, &mut u);
            uniform_in_ball(&mut rng, radius, &mut v);
            let gap = dist(&u, &v);
            if gap == F::zero() {
                continue;
            }
            for (j, (t, s)) in self.terms.iter().enumerate() {
                t.subgradient_into(&u, &mut gu);
                t.subgradient_into(&v, &mut gv);
                let ratio = dist(&gu, &gv) / gap.powf(s.alpha);
                if ratio > max_ratio[j] {
                    max_ratio[j] = ratio;
                }
            }
        }
        // relative slack for rounding in ‖Au − Av‖ / ‖u − v‖
        let slack = F::one() + F::lit(1e-9);
        let components = self
            .terms
            .iter()
            .zip(max_ratio)
            .map(|((t, s), m)| ComponentRatio {
                name: t.name().to_string(),
                declared: *s,
                max_ratio: m,
                flagged: m > s.l_alpha * slack,
            })
            .collect();
        Ok(SemiSmoothReport { components })
    }

    /// Maximum absolute coordinate gap between central differences of the
    /// energy and the reported subgradient at `x`.
    pub fn finite_difference_check(&self, x: &[F], h: F) -> Result<FiniteDifferenceReport<F>> {
        check_dim(self.dim, x)?;
        if !(h > F::zero()) {
            return invalid("h must be positive");
        }
        let g = self.subgradient(x)?;
        let mut probe = x.to_vec();
        let two_h = h + h;
        let mut max_error = F::zero();
        for i in 0..self.dim {
            probe[i] = x[i] + h;
            let up = self.energy_unchecked(&probe);
            probe[i] = x[i] - h;
            let down = self.energy_unchecked(&probe);
            probe[i] = x[i];
            let err = ((up - down) / two_h - g[i]).abs();
            if err > max_error {
                max_error = err;
            }
        }
        let near_kink = self.terms.iter().any(|(t, _)| t.near_kink(x, h));
        Ok(FiniteDifferenceReport {
            max_error,
            near_kink,
        })
    }

    /// Smallest energy seen over `n` uniform draws in the box `[-half_width, half_width]^d`.
    /// A finite value is the sampled evidence that the energy is bounded below there.
    pub fn sampled_energy_floor(&self, half_width: F, n: usize, seed: u64) -> F {
        let mut rng = rng::stream(seed, 1);
        let mut x = vec![F::zero(); self.dim];
        let mut floor = F::infinity();
        for _ in 0..n {
            for xi in x.iter_mut() {
                *xi = (F::unit(&mut rng) * F::lit(2.0) - F::one()) * half_width;
            }
            let e = self.energy_unchecked(&x);
            if e.is_nan() {
                return F::nan();
            }
            floor = floor.min(e);
        }
        floor
    }
}

pub(crate) fn uniform_in_ball<F: Real, R: Rng + ?Sized>(rng: &mut R, radius: F, out: &mut [F]) {
    loop {
        for o in out.iter_mut() {
            *o = F::std_normal(rng);
        }
        let n = norm(out);
        if n > F::zero() {
            let d = F::from_usize(out.len()).unwrap();
            let r = radius * F::unit(rng).powf(F::one() / d) / n;
            out.iter_mut().for_each(|o| *o = *o * r);
            return;
        }
    }
}

struct ConstantTerm<F>(F);

impl<F: Real> Component<F> for ConstantTerm<F> {
    fn name(&self) -> &str {
        "constant"
    }
    fn energy(&self, _x: &[F]) -> F {
        self.0
    }
    fn subgradient_into(&self, _x: &[F], out: &mut [F]) {
        out.iter_mut().for_each(|o| *o = F::zero());
    }
}

/// Outcome of [`Potential::empirical_semismooth_check`] for one term.
#[derive(Debug, Clone)]
pub struct ComponentRatio<F> {
    pub name: String,
    pub declared: SemiSmoothSpec<F>,
    pub max_ratio: F,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct SemiSmoothReport<F> {
    pub components: Vec<ComponentRatio<F>>,
}

impl<F> SemiSmoothReport<F> {
    pub fn any_flagged(&self) -> bool {
        self.components.iter().any(|c| c.flagged)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FiniteDifferenceReport<F> {
    pub max_error: F,
    /// The probe stencil straddles a declared kink; `max_error` is not meaningful.
    pub near_kink: bool,
}

/// Parameters addressing a catalog entry. Unused fields are ignored by
/// entries that do not need them.
#[derive(Debug, Clone, Default)]
pub struct TargetParams<F> {
    pub dim: Option<usize>,
    pub diag: Option<Vec<F>>,
    pub b: Option<Vec<F>>,
    pub l0: Option<F>,
    pub width: Option<F>,
    pub lambda: Option<F>,
    pub mean: Option<Vec<F>>,
}

/// Names accepted by [`builtin`].
pub const CATALOG: &[&str] = &[
    "isotropic_gaussian",
    "aniso_quadratic",
    "norm",
    "huber",
    "gaussian_mixture",
    "quadratic_l1",
    "zero",
];

fn spec<F: Real>(alpha: f64, l: F) -> Result<SemiSmoothSpec<F>> {
    SemiSmoothSpec::new(F::lit(alpha), l)
}

fn max_abs<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |m, a| m.max(a.abs()))
}

/// `½‖x‖²`, spec (1, 1).
pub fn isotropic_gaussian<F: Real>(dim: usize) -> Result<Potential<F>> {
    aniso_quadratic(vec![F::one(); dim], None).map(|mut p| {
        p.name = "isotropic_gaussian".into();
        p
    })
}

/// `½xᵀAx − bᵀx` with `A = diag(diag)`, spec (1, max|a_i|).
pub fn aniso_quadratic<F: Real>(diag: Vec<F>, b: Option<Vec<F>>) -> Result<Potential<F>> {
    let dim = diag.len();
    let b = b.unwrap_or_else(|| vec![F::zero(); dim]);
    let l = max_abs(&diag);
    let l = if l > F::zero() { l } else { F::one() };
    Potential::new(
        "aniso_quadratic",
        dim,
        vec![(Term::Quadratic { diag, b }, spec(1.0, l)?)],
    )
}

/// `bᵀx`. Declared spec (1, 1): the gradient is constant, so any constant holds.
pub fn linear<F: Real>(b: Vec<F>) -> Result<Potential<F>> {
    let dim = b.len();
    let b = b.into_iter().map(|v| -v).collect();
    Potential::new(
        "linear",
        dim,
        vec![(
            Term::Quadratic {
                diag: vec![F::zero(); dim],
                b,
            },
            spec(1.0, F::one())?,
        )],
    )
}

/// `l0‖x‖`, spec (0, 2·l0).
pub fn norm_potential<F: Real>(dim: usize, l0: F) -> Result<Potential<F>> {
    Potential::new("norm", dim, vec![(Term::Norm { l0 }, spec(0.0, l0 + l0)?)])
}

/// Per-coordinate Huber with transition width `width`, spec (1, 1/width).
pub fn huber<F: Real>(dim: usize, width: F) -> Result<Potential<F>> {
    if !(width > F::zero()) {
        return invalid("huber width must be positive");
    }
    Potential::new(
        "huber",
        dim,
        vec![(Term::Huber { width }, spec(1.0, F::one() / width)?)],
    )
}

/// Symmetric two-component mixture `½N(m, I) + ½N(−m, I)`.
/// The Hessian `I − m mᵀ sech²(⟨m, x⟩)` has spectrum in `[1 − ‖m‖², 1]`,
/// so the spec is (1, max(1, ‖m‖² − 1)).
pub fn gaussian_mixture<F: Real>(mean: Vec<F>) -> Result<Potential<F>> {
    let dim = mean.len();
    let m2 = crate::linalg::norm_sq(&mean);
    let l = F::one().max(m2 - F::one());
    Potential::new(
        "gaussian_mixture",
        dim,
        vec![(Term::Mixture { mean }, spec(1.0, l)?)],
    )
}

/// `½xᵀAx + λΣ|x_i|`: quadratic (1, max|a_i|) plus ℓ1 (0, 2λ√d).
pub fn quadratic_l1<F: Real>(diag: Vec<F>, lambda: F) -> Result<Potential<F>> {
    let dim = diag.len();
    let l = max_abs(&diag);
    let l = if l > F::zero() { l } else { F::one() };
    let d = F::from_usize(dim).unwrap();
    Potential::new(
        "quadratic_l1",
        dim,
        vec![
            (
                Term::Quadratic {
                    diag,
                    b: vec![F::zero(); dim],
                },
                spec(1.0, l)?,
            ),
            (
                Term::L1 { lambda },
                spec(0.0, (lambda + lambda) * d.sqrt())?,
            ),
        ],
    )
}

/// `f ≡ 0`, declared spec (1, 1).
pub fn zero<F: Real>(dim: usize) -> Result<Potential<F>> {
    Potential::new("zero", dim, vec![(Term::Zero, spec(1.0, F::one())?)])
}

/// Looks up a catalog entry by name.
pub fn builtin<F: Real>(name: &str, p: &TargetParams<F>) -> Result<Potential<F>> {
    let need_dim = || {
        p.dim
            .or_else(|| p.diag.as_ref().map(Vec::len))
            .or_else(|| p.mean.as_ref().map(Vec::len))
            .ok_or_else(|| Error::InvalidInput(format!("target '{name}' needs `dim`")))
    };
    let need = |v: Option<F>, key: &str| {
        v.ok_or_else(|| Error::InvalidInput(format!("target '{name}' needs `{key}`")))
    };
    let pot = match name {
        "isotropic_gaussian" => isotropic_gaussian(need_dim()?),
        "aniso_quadratic" => {
            let diag = p.diag.clone().ok_or_else(|| {
                Error::InvalidInput("target 'aniso_quadratic' needs `diag`".into())
            })?;
            aniso_quadratic(diag, p.b.clone())
        }
        "norm" => norm_potential(need_dim()?, p.l0.unwrap_or(F::one())),
        "huber" => huber(need_dim()?, need(p.width, "width")?),
        "gaussian_mixture" => {
            let mean = p.mean.clone().ok_or_else(|| {
                Error::InvalidInput("target 'gaussian_mixture' needs `mean`".into())
            })?;
            gaussian_mixture(mean)
        }
        "quadratic_l1" => {
            let diag = match (&p.diag, p.dim) {
                (Some(d), _) => d.clone(),
                (None, Some(n)) => vec![F::one(); n],
                _ => return invalid("target 'quadratic_l1' needs `diag` or `dim`"),
            };
            quadratic_l1(diag, need(p.lambda, "lambda")?)
        }
        "zero" => zero(need_dim()?),
        other => invalid(format!(
            "unknown target '{other}' (known: {})",
            CATALOG.join(", ")
        )),
    }?;
    if let Some(expected) = p.dim {
        if expected != pot.dim() {
            return Err(Error::DimensionMismatch {
                expected,
                got: pot.dim(),
            });
        }
    }
    Ok(pot)
}
