//! Bounded Nelder-Mead simplex minimizer.
//!
//! Standard reflection/expansion/contraction/shrink moves with every
//! candidate point clamped into the search box before evaluation, so the
//! objective is never called outside its domain. Fully deterministic: no
//! internal randomness.

use crate::float::Real;

/// Standard simplex coefficients.
const ALPHA: f64 = 1.0; // reflection
const GAMMA: f64 = 2.0; // expansion
const RHO: f64 = 0.5; // contraction
const SIGMA: f64 = 0.5; // shrink

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions<T> {
    /// Terminate when the simplex diameter (max infinity-norm distance from
    /// the best vertex) falls below this.
    pub simplex_tolerance: T,
    /// Hard cap on objective evaluations.
    pub max_evaluations: usize,
    /// Initial vertex displacement as a fraction of each box range.
    pub initial_step: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            simplex_tolerance: T::of(1e-9),
            max_evaluations: 20_000,
            initial_step: T::of(0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_simplex_size: T,
}

fn clamp_into<T: Real>(x: &mut [T], lo: &[T], hi: &[T]) {
    for ((xi, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        if *xi < l {
            *xi = l;
        }
        if *xi > h {
            *xi = h;
        }
    }
}

fn simplex_size<T: Real>(simplex: &[(T, Vec<T>)]) -> T {
    let best = &simplex[0].1;
    let mut size = T::zero();
    for (_, v) in &simplex[1..] {
        for (a, b) in v.iter().zip(best) {
            let d = (*a - *b).abs();
            if d > size {
                size = d;
            }
        }
    }
    size
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
pub fn minimize<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    x0: &[T],
    lo: &[T],
    hi: &[T],
    options: &NelderMeadOptions<T>,
) -> NelderMeadResult<T> {
    let dim = x0.len();
    assert!(dim > 0 && lo.len() == dim && hi.len() == dim);

    let mut evaluations = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| -> T {
        *evals += 1;
        f(x)
    };

    // Initial simplex: x0 plus one displaced vertex per axis, flipped when
    // the displacement would leave the box.
    let mut start = x0.to_vec();
    clamp_into(&mut start, lo, hi);
    let mut simplex: Vec<(T, Vec<T>)> = Vec::with_capacity(dim + 1);
    let v0 = eval(&start, &mut evaluations);
    simplex.push((v0, start.clone()));
    for i in 0..dim {
        let mut v = start.clone();
        let range = hi[i] - lo[i];
        let step = if range > T::zero() {
            options.initial_step * range
        } else {
            T::of(1e-4)
        };
        v[i] = if v[i] + step <= hi[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        clamp_into(&mut v, lo, hi);
        let fv = eval(&v, &mut evaluations);
        simplex.push((fv, v));
    }

    let mut iterations = 0usize;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

        let size = simplex_size(&simplex);
        if size < options.simplex_tolerance {
            converged = true;
            break;
        }
        if evaluations >= options.max_evaluations {
            break;
        }
        iterations += 1;

        // Centroid of all vertices but the worst.
        let mut centroid = vec![T::zero(); dim];
        for (_, v) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += *x;
            }
        }
        let inv = T::one() / T::of(dim as f64);
        for c in &mut centroid {
            *c *= inv;
        }

        let worst = simplex[dim].clone();
        let best_val = simplex[0].0;
        let second_worst_val = simplex[dim - 1].0;

        let blend = |a: &[T], b: &[T], t: T| -> Vec<T> {
            let mut out: Vec<T> = a
                .iter()
                .zip(b)
                .map(|(&ai, &bi)| ai + t * (ai - bi))
                .collect();
            clamp_into(&mut out, lo, hi);
            out
        };

        // Reflection.
        let reflected = blend(&centroid, &worst.1, T::of(ALPHA));
        let fr = eval(&reflected, &mut evaluations);

        if fr < best_val {
            // Expansion.
            let expanded = blend(&centroid, &worst.1, T::of(GAMMA));
            let fe = eval(&expanded, &mut evaluations);
            simplex[dim] = if fe < fr {
                (fe, expanded)
            } else {
                (fr, reflected)
            };
        } else if fr < second_worst_val {
            simplex[dim] = (fr, reflected);
        } else {
            // Contraction: outside when the reflection improved on the
            // worst vertex, inside otherwise.
            let contracted = if fr < worst.0 {
                blend(&centroid, &worst.1, T::of(ALPHA * RHO))
            } else {
                blend(&centroid, &worst.1, -T::of(RHO))
            };
            let fc = eval(&contracted, &mut evaluations);
            if fc < fr.min(worst.0) {
                simplex[dim] = (fc, contracted);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].1.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut v: Vec<T> = best
                        .iter()
                        .zip(&entry.1)
                        .map(|(&b, &x)| b + T::of(SIGMA) * (x - b))
                        .collect();
                    clamp_into(&mut v, lo, hi);
                    let fv = eval(&v, &mut evaluations);
                    *entry = (fv, v);
                    if evaluations >= options.max_evaluations {
                        break;
                    }
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let final_size = simplex_size(&simplex);
    let (value, x) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value,
        evaluations,
        iterations,
        converged,
        final_simplex_size: final_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.2).powi(2);
        let res = minimize(
            f,
            &[0.9, 0.9],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &NelderMeadOptions::default(),
        );
        assert!(res.converged);
        assert!((res.x[0] - 0.3).abs() < 1e-7);
        assert!((res.x[1] + 0.2).abs() < 1e-7);
        assert!(res.value < 1e-13);
    }

    #[test]
    fn minimizes_rosenbrock_in_box() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = minimize(
            f,
            &[-0.5, 0.5],
            &[-2.0, -2.0],
            &[2.0, 2.0],
            &NelderMeadOptions::default(),
        );
        assert!((res.x[0] - 1.0).abs() < 1e-5);
        assert!((res.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn respects_bounds_when_optimum_is_outside() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2);
        let res = minimize(
            f,
            &[0.0],
            &[-1.0],
            &[1.0],
            &NelderMeadOptions::default(),
        );
        assert!((res.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn never_evaluates_outside_the_box() {
        let mut violations = 0usize;
        {
            let f = |x: &[f64]| {
                if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
                    violations += 1;
                }
                (x[0] - 0.9).powi(2) + (x[1] - 0.1).powi(2)
            };
            let _ = minimize(
                f,
                &[0.5, 0.5],
                &[0.0, 0.0],
                &[1.0, 1.0],
                &NelderMeadOptions::default(),
            );
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| x[0].sin() * x[1].cos() + x[0] * x[0];
        let opts = NelderMeadOptions::default();
        let a = minimize(f, &[0.7, -0.3], &[-2.0, -2.0], &[2.0, 2.0], &opts);
        let b = minimize(f, &[0.7, -0.3], &[-2.0, -2.0], &[2.0, 2.0], &opts);
        assert_eq!(a, b);
    }
}
