//! Distances between sample sets and reference laws.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    pub method: &'static str,
    pub n_used: usize,
    pub bootstrap_ci: Option<(f64, f64)>,
}

impl DistanceEstimate {
    fn new(value: f64, method: &'static str, n_used: usize) -> Self {
        DistanceEstimate {
            value,
            method,
            n_used,
            bootstrap_ci: None,
        }
    }
}

/// `n` evenly spaced order statistics of `sorted`.
fn thin_sorted(sorted: &[f64], n: usize) -> Vec<f64> {
    let m = sorted.len();
    (0..n).map(|i| sorted[(2 * i + 1) * m / (2 * n)]).collect()
}

fn sorted_f64<F: Real>(a: &[F]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().map(|x| x.as_f64()).collect();
    v.sort_unstable_by(f64::total_cmp);
    v
}

fn w2_sq_sorted(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    let n = a.len().min(b.len());
    if a.len() > n {
        a = thin_sorted(&a, n);
    }
    if b.len() > n {
        b = thin_sorted(&b, n);
    }
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n as f64
}

/// Exact 1D W2 by the sorted coupling. With unequal counts the larger set
/// is reduced to evenly spaced order statistics.
pub fn w2_empirical_1d<F: Real>(a: &[F], b: &[F]) -> Result<DistanceEstimate> {
    if a.is_empty() || b.is_empty() {
        return invalid("empty sample set");
    }
    let n = a.len().min(b.len());
    let v = w2_sq_sorted(sorted_f64(a), sorted_f64(b)).sqrt();
    Ok(DistanceEstimate::new(v, "w2_1d", n))
}

/// Minimum-cost perfect matching on a dense square cost matrix (row-major),
/// returning the total cost.
fn assignment_cost(cost: &[f64], n: usize) -> f64 {
    // shortest augmenting paths with dual potentials, 1-based bookkeeping
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[(p[j] - 1) * n + (j - 1)]).sum()
}

fn subsample<'a, T, R: Rng>(a: &'a [T], n: usize, rng: &mut R) -> Vec<&'a T> {
    if a.len() == n {
        return a.iter().collect();
    }
    let mut idx = sample_indices(rng, a.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| &a[i]).collect()
}

pub const DEFAULT_ASSIGNMENT_CAP: usize = 512;

/// Exact W2 between point clouds by optimal matching on squared Euclidean
/// costs. Both sets are subsampled uniformly (without replacement, from
/// `seed`) to `min(|a|, |b|, n_cap)` points.
pub fn w2_empirical_assignment<F: Real>(
    a: &[Vec<F>],
    b: &[Vec<F>],
    n_cap: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    if a.is_empty() || b.is_empty() {
        return invalid("empty sample set");
    }
    if n_cap == 0 {
        return invalid("n_cap must be positive");
    }
    let d = a[0].len();
    if d == 0 || a.iter().chain(b).any(|x| x.len() != d) {
        return invalid("points must share a positive dimension");
    }
    let n = a.len().min(b.len()).min(n_cap);
    let mut r = rng::stream(seed, 0);
    let sa = subsample(a, n, &mut r);
    let sb = subsample(b, n, &mut r);
    let cost: Vec<f64> = sa
        .iter()
        .flat_map(|x| {
            sb.iter().map(move |y| {
                x.iter()
                    .zip(y.iter())
                    .map(|(&p, &q)| {
                        let t = (p - q).as_f64();
                        t * t
                    })
                    .sum::<f64>()
            })
        })
        .collect();
    let total = assignment_cost(&cost, n).max(0.0);
    Ok(DistanceEstimate::new(
        (total / n as f64).sqrt(),
        "w2_assignment",
        n,
    ))
}

/// Sliced W2: root mean over uniform random directions of the squared 1D W2
/// between projections.
pub fn sliced_w2<F: Real>(
    a: &[Vec<F>],
    b: &[Vec<F>],
    n_directions: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    if n_directions < 16 {
        return invalid(format!(
            "at least 16 directions are required, got {n_directions}"
        ));
    }
    if a.is_empty() || b.is_empty() {
        return invalid("empty sample set");
    }
    let d = a[0].len();
    if d == 0 || a.iter().chain(b).any(|x| x.len() != d) {
        return invalid("points must share a positive dimension");
    }
    let project = |set: &[Vec<F>], theta: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = set
            .iter()
            .map(|x| x.iter().zip(theta).map(|(&xi, &t)| xi.as_f64() * t).sum())
            .collect();
        v.sort_unstable_by(f64::total_cmp);
        v
    };
    let total: f64 = (0..n_directions as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k);
            let mut theta: Vec<f64> = (0..d).map(|_| f64::std_normal(&mut r)).collect();
            let nrm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            theta.iter_mut().for_each(|t| *t /= nrm);
            w2_sq_sorted(project(a, &theta), project(b, &theta))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(DistanceEstimate::new(
        (total / n_directions as f64).sqrt(),
        "sliced_w2",
        a.len().min(b.len()),
    ))
}

/// 16-point Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre_16() -> &'static [(f64, f64); 16] {
    static RULE: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut out = [(0.0, 0.0); N];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Composite 16-point Gauss–Legendre integral over `[lo, hi]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let rule = gauss_legendre_16();
    let h = (hi - lo) / panels as f64;
    (0..panels)
        .map(|k| {
            let a = lo + k as f64 * h;
            let mid = a + 0.5 * h;
            rule.iter()
                .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Sample range widened by `pad` on both sides.
pub fn default_support<F: Real>(samples: &[F], pad: f64) -> (f64, f64) {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            let x = x.as_f64();
            (lo.min(x), hi.max(x))
        });
    (lo - pad, hi + pad)
}

/// TV between the empirical law of `samples` and `density`, on `bins` equal
/// bins over `support`:
/// `½(Σ |empirical mass − density mass| + samples outside + density outside)`.
pub fn tv_histogram_1d<F: Real>(
    samples: &[F],
    density: &(dyn Fn(f64) -> f64 + Sync),
    bins: usize,
    support: (f64, f64),
) -> Result<DistanceEstimate> {
    if samples.is_empty() {
        return invalid("empty sample set");
    }
    if bins < 16 {
        return invalid(format!("at least 16 bins are required, got {bins}"));
    }
    let (lo, hi) = support;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return invalid(format!("bad support [{lo}, {hi}]"));
    }
    let width = (hi - lo) / bins as f64;
    let mass: Vec<f64> = (0..bins)
        .map(|k| {
            integrate(
                density,
                lo + k as f64 * width,
                lo + (k + 1) as f64 * width,
                1,
            )
        })
        .collect();
    let total: f64 = mass.iter().sum();
    if !total.is_finite() || total > 1.01 || mass.iter().any(|&m| m < -1e-12) {
        return Err(Error::Normalization { integral: total });
    }
    let mut counts = vec![0u64; bins];
    let mut outside = 0u64;
    for x in samples {
        let x = x.as_f64();
        if x >= lo && x < hi {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        } else {
            outside += 1;
        }
    }
    let n = samples.len() as f64;
    let inside: f64 = counts
        .iter()
        .zip(&mass)
        .map(|(&c, &m)| (c as f64 / n - m).abs())
        .sum();
    let tv = 0.5 * (inside + outside as f64 / n + (1.0 - total).max(0.0));
    Ok(DistanceEstimate::new(
        tv.min(1.0),
        "tv_histogram",
        samples.len(),
    ))
}

/// Percentile bootstrap interval (2.5%, 97.5%) of `stat` over `resamples`
/// paired resamples with replacement. Widened if needed so that it contains
/// `point`.
pub fn bootstrap_ci<T: Sync + Clone>(
    a: &[T],
    b: &[T],
    point: f64,
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[T], &[T], u64) -> Result<f64> + Sync,
) -> Result<(f64, f64)> {
    if resamples < 2 {
        return invalid("at least two bootstrap resamples are required");
    }
    let mut vals = (0..resamples as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k);
            let ra: Vec<T> = (0..a.len())
                .map(|_| a[r.gen_range(0..a.len())].clone())
                .collect();
            let rb: Vec<T> = (0..b.len())
                .map(|_| b[r.gen_range(0..b.len())].clone())
                .collect();
            stat(&ra, &rb, rng::mix(seed, k))
        })
        .collect::<Result<Vec<f64>>>()?;
    vals.sort_unstable_by(f64::total_cmp);
    let at = |q: f64| vals[((q * (vals.len() - 1) as f64).round() as usize).min(vals.len() - 1)];
    Ok((at(0.025).min(point), at(0.975).max(point)))
}

pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Sample mean and variance with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

pub fn moments_1d<F: Real>(x: &[F]) -> Result<Moments> {
    if x.len() < 2 {
        return invalid("at least two samples are required");
    }
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(a, b), v| {
        let c = v.as_f64() - mean;
        (a + c * c, b + c * c * c * c)
    });
    let var = m2 / (n - 1.0);
    let m4 = m4 / n;
    let pop = m2 / n;
    Ok(Moments {
        n: x.len(),
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - pop * pop).max(0.0) / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn gaussian_cloud(n: usize, d: usize, mean: &[f64], seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, 0);
        (0..n)
            .map(|_| (0..d).map(|i| mean[i] + f64::std_normal(&mut r)).collect())
            .collect()
    }

    #[test]
    fn w2_1d_examples() {
        let a = [0.3, -1.0, 2.5];
        assert_eq!(w2_empirical_1d(&a, &a).unwrap().value, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert_abs_diff_eq!(w2_empirical_1d(&a, &b).unwrap().value, 1.0, epsilon = 1e-15);
        assert_eq!(
            w2_empirical_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap().value,
            1.0
        );
        assert!(w2_empirical_1d::<f64>(&[], &[1.0]).is_err());
        // unequal sizes: thinned order statistics
        let v = w2_empirical_1d(&[0.0, 1.0, 2.0, 3.0], &[0.5, 2.5]).unwrap();
        assert_eq!(v.n_used, 2);
        assert_abs_diff_eq!(v.value, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn assignment_examples() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let b = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
        assert_abs_diff_eq!(
            w2_empirical_assignment(&a, &b, 512, 0).unwrap().value,
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(w2_empirical_assignment(&a, &a, 512, 0).unwrap().value, 0.0);
        let c = gaussian_cloud(60, 3, &[0.0; 3], 1);
        let v = [0.3, -1.2, 0.5];
        let shifted: Vec<Vec<f64>> = c
            .iter()
            .map(|x| x.iter().zip(&v).map(|(a, b)| a + b).collect())
            .collect();
        let norm_v = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert_abs_diff_eq!(
            w2_empirical_assignment(&c, &shifted, 512, 0).unwrap().value,
            norm_v,
            epsilon = 1e-9
        );
    }

    #[test]
    fn assignment_matches_brute_force() {
        let a = gaussian_cloud(6, 2, &[0.0; 2], 3);
        let b = gaussian_cloud(6, 2, &[0.5; 2], 4);
        let cost = |i: usize, j: usize| -> f64 {
            a[i].iter().zip(&b[j]).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let mut perm: Vec<usize> = (0..6).collect();
        let mut best = f64::INFINITY;
        fn heap(k: usize, p: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if k == 1 {
                f(p);
                return;
            }
            for i in 0..k {
                heap(k - 1, p, f);
                let j = if k % 2 == 0 { i } else { 0 };
                p.swap(j, k - 1);
            }
        }
        heap(6, &mut perm, &mut |p| {
            best = best.min((0..6).map(|i| cost(i, p[i])).sum());
        });
        let got = w2_empirical_assignment(&a, &b, 512, 0).unwrap().value;
        assert_abs_diff_eq!(got * got * 6.0, best, epsilon = 1e-10);
    }

    #[test]
    fn assignment_reduces_to_1d() {
        let a = gaussian_cloud(100, 1, &[0.0], 5);
        let b = gaussian_cloud(100, 1, &[0.7], 6);
        let flat = |s: &[Vec<f64>]| s.iter().map(|x| x[0]).collect::<Vec<_>>();
        let w1 = w2_empirical_1d(&flat(&a), &flat(&b)).unwrap().value;
        let wa = w2_empirical_assignment(&a, &b, 512, 0).unwrap().value;
        assert_abs_diff_eq!(w1, wa, epsilon = 1e-9);
        let ws = sliced_w2(&a, &b, 16, 0).unwrap().value;
        assert_abs_diff_eq!(w1, ws, epsilon = 1e-12);
    }

    #[test]
    fn assignment_caps_and_subsamples() {
        let a = gaussian_cloud(700, 2, &[0.0; 2], 7);
        let b = gaussian_cloud(600, 2, &[0.0; 2], 8);
        let e = w2_empirical_assignment(&a, &b, 100, 1).unwrap();
        assert_eq!(e.n_used, 100);
        assert_eq!(e, w2_empirical_assignment(&a, &b, 100, 1).unwrap());
    }

    #[test]
    fn sliced_mean_gap() {
        let d = 4;
        let a = gaussian_cloud(20_000, d, &[0.0; 4], 9);
        let b = gaussian_cloud(20_000, d, &[2.0, 0.0, 0.0, 0.0], 10);
        let s = sliced_w2(&a, &b, 400, 2).unwrap().value;
        let want = 4.0 / d as f64;
        assert!((s * s - want).abs() < 0.1 * want, "{}", s * s);
        assert_eq!(sliced_w2(&a, &a, 16, 0).unwrap().value, 0.0);
        assert!(sliced_w2(&a, &b, 8, 0).is_err());
    }

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        let v = integrate(&|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1);
        assert_abs_diff_eq!(v, (256.0 - 1.0) / 8.0 - 9.0, epsilon = 1e-12);
        let rule = gauss_legendre_16();
        assert_abs_diff_eq!(rule.iter().map(|r| r.1).sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    fn normal_pdf(mu: f64) -> impl Fn(f64) -> f64 + Sync {
        move |x: f64| (-(x - mu) * (x - mu) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn tv_examples() {
        let mut r = rng::stream(12, 0);
        let n01 = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| n01.sample(&mut r)).collect();
        let tv = tv_histogram_1d(&xs, &normal_pdf(0.0), 64, (-6.0, 6.0))
            .unwrap()
            .value;
        assert!(tv <= 0.03, "{tv}");
        let tv = tv_histogram_1d(&xs, &normal_pdf(1.0), 64, (-6.0, 7.0))
            .unwrap()
            .value;
        assert!((tv - 0.38292492254802624).abs() < 0.02, "{tv}");
        let tv = tv_histogram_1d(&xs, &normal_pdf(100.0), 64, (90.0, 110.0))
            .unwrap()
            .value;
        assert!((tv - 1.0).abs() < 1e-9);
        let bad = |x: f64| 2.0 * normal_pdf(0.0)(x);
        assert!(matches!(
            tv_histogram_1d(&xs, &bad, 64, (-6.0, 6.0)),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn bootstrap_contains_point() {
        let a: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..200).map(|i| (i as f64).cos() + 0.2).collect();
        let point = w2_empirical_1d(&a, &b).unwrap().value;
        let (lo, hi) = bootstrap_ci(&a, &b, point, DEFAULT_BOOTSTRAP, 3, |x, y, _| {
            Ok(w2_empirical_1d(x, y)?.value)
        })
        .unwrap();
        assert!(lo <= point && point <= hi);
        assert!(hi > lo);
    }

    #[test]
    fn moment_errors() {
        let m = moments_1d(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_abs_diff_eq!(m.var, 5.0 / 3.0, epsilon = 1e-15);
        assert!(moments_1d(&[1.0]).is_err());
    }
}
