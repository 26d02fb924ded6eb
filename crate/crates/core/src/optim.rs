//! Small optimisation and sampling utilities shared by the GP fitter, the
//! tanks-in-series fit and the acquisition maximiser.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Deterministic RNG for a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 mixing of a base seed with a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Latin-hypercube sample of `n` points in the unit cube `[0, 1]^dim`.
///
/// Each coordinate has exactly one point in each of the `n` equal strata.
pub fn latin_hypercube<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    let nf = n as f64;
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, p) in points.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[d] = (perm[i] as f64 + u) / nf;
        }
    }
    points
}

/// Maps a unit-cube point into a box.
pub fn scale_to_box(unit: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    unit.iter()
        .zip(bounds)
        .map(|(&u, &(lo, hi))| lo + u * (hi - lo))
        .collect()
}

/// Outcome of a local minimisation.
#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
}

/// Unconstrained limited-memory BFGS with Armijo backtracking.
///
/// `f` returns the objective and its gradient; a non-finite value is treated
/// as an infeasible point and the line search backs away from it. The returned
/// value never exceeds `f(x0)`.
pub fn lbfgs<T: Real, F>(mut f: F, x0: &[T], max_iter: usize, grad_tol: T) -> Minimum<T>
where
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    const MEMORY: usize = 6;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
        };
    }
    let mut s_hist: Vec<Vec<T>> = Vec::new();
    let mut y_hist: Vec<Vec<T>> = Vec::new();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&p, &q)| p * q).sum::<T>();

    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < grad_tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![T::zero(); k];
        for i in (0..k).rev() {
            let rho = T::one() / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &q);
            for j in 0..n {
                q[j] -= alphas[i] * y_hist[i][j];
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            T::one() / gnorm.max(T::one())
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..k {
            let rho = T::one() / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for j in 0..n {
                q[j] += s_hist[i][j] * (alphas[i] - beta);
            }
        }
        let mut dir: Vec<T> = q.iter().map(|&v| -v).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < T::zero()) {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|&v| -v / gnorm.max(T::one())).collect();
            slope = dot(&dir, &g);
        }

        let c1 = T::lit(1e-4);
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<T> = x.iter().zip(&dir).map(|(&a, &d)| a + step * d).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + c1 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= T::lit(0.5);
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = fx - fn_;
        x = xn;
        g = gn;
        let converged = improvement.abs() <= T::lit(1e-12) * (fx.abs() + T::one());
        fx = fn_;
        if sy > T::lit(1e-12) * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        if converged {
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        iterations: iter,
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
///
/// Returns the abscissa once the bracket is narrower than `tol`.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        // `<=` keeps the lower sub-bracket on ties
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / T::lit(2.0);
    let fx = f(x);
    (x, fx)
}

/// Coordinate-wise pattern search maximising `f` inside the unit box.
///
/// Starts with `step` and halves it whenever no coordinate move improves,
/// stopping below `min_step` or after `max_evals` evaluations. Returns the best
/// point and value; never worse than the start.
pub fn pattern_search_max<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    start_value: f64,
    mut step: f64,
    min_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let mut best = start.to_vec();
    let mut best_v = start_value;
    let mut evals = 0;
    while step >= min_step && evals < max_evals {
        let mut improved = false;
        for d in 0..best.len() {
            for sign in [1.0, -1.0] {
                let mut cand = best.clone();
                cand[d] = (cand[d] + sign * step).clamp(0.0, 1.0);
                if cand[d] == best[d] {
                    continue;
                }
                let v = f(&cand);
                evals += 1;
                if v > best_v {
                    best = cand;
                    best_v = v;
                    improved = true;
                    break;
                }
            }
            if evals >= max_evals {
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lhs_stratifies_each_coordinate() {
        let mut rng = rng_from_seed(3);
        let pts = latin_hypercube(10, 3, &mut rng);
        for d in 0..3 {
            let mut bins: Vec<usize> = pts.iter().map(|p| (p[d] * 10.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lbfgs_minimises_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let m = lbfgs(f, &[-1.2, 1.0], 500, 1e-10);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, _) = golden_section(|x: f64| (x - 2.5).powi(2), 0.0, 10.0, 1e-8);
        assert!((x - 2.5).abs() < 1e-7);
    }

    #[test]
    fn pattern_search_climbs() {
        let f = |x: &[f64]| -((x[0] - 0.3).powi(2) + (x[1] - 0.8).powi(2));
        let start = [0.5, 0.5];
        let (x, v) = pattern_search_max(f, &start, f(&start), 0.25, 1e-6, 10_000);
        assert!(v > -1e-10 && (x[0] - 0.3).abs() < 1e-5);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
