//! One-dimensional quadrature rules.

use crate::real::{lit, Real};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are found by Newton iteration on the Legendre recurrence; for the
/// small orders used here this is accurate to machine precision.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = lit::<T>(n as f64);
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess.
        let theta = T::pi() * (lit::<T>(i as f64) + lit::<T>(0.75)) / (nf + lit::<T>(0.5));
        let mut x = theta.cos();
        let mut pp = T::zero();
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = T::one();
            let mut p1 = x;
            for k in 2..=n {
                let kf = lit::<T>(k as f64);
                let p2 = ((lit::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = nf * (x * p1 - p0) / (x * x - T::one());
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() <= T::eps() * lit::<T>(4.0) {
                break;
            }
        }
        let w = lit::<T>(2.0) / ((T::one() - x * x) * pp * pp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

/// Fixed-order Gauss-Legendre integration of `f` over `[a, b]`.
pub fn gauss<T: Real>(f: impl Fn(T) -> T, a: T, b: T, n: usize) -> T {
    let (nodes, weights) = gauss_legendre::<T>(n);
    let half = (b - a) * lit::<T>(0.5);
    let mid = (a + b) * lit::<T>(0.5);
    let mut acc = T::zero();
    for (x, w) in nodes.iter().zip(&weights) {
        acc += *w * f(mid + half * *x);
    }
    acc * half
}

/// Fixed-order Gauss rule with precomputed nodes, for hot loops.
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussRule { nodes, weights }
    }

    pub fn integrate(&self, f: impl FnMut(T) -> T, a: T, b: T) -> T {
        let mut f = f;
        let half = (b - a) * lit::<T>(0.5);
        let mid = (a + b) * lit::<T>(0.5);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(mid + half * *x);
        }
        acc * half
    }
}

/// Adaptive Simpson integration with absolute tolerance `tol`.
///
/// Used for primitive checks and the tail weights of the perturbed kernel
/// variant; the assembly itself never goes through here.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    fn simpson<T: Real>(fa: T, fm: T, fb: T, h: T) -> T {
        h / lit::<T>(6.0) * (fa + lit::<T>(4.0) * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<T: Real>(
        f: &impl Fn(T) -> T,
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: usize,
    ) -> T {
        let m = (a + b) * lit::<T>(0.5);
        let lm = (a + m) * lit::<T>(0.5);
        let rm = (m + b) * lit::<T>(0.5);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= lit::<T>(15.0) * tol {
            left + right + delta / lit::<T>(15.0)
        } else {
            let half_tol = tol * lit::<T>(0.5);
            recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
        }
    }
    let m = (a + b) * lit::<T>(0.5);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        // Order-n Gauss is exact up to degree 2n-1.
        let v = gauss(|x: f64| x * x * x * x * x * x, -1.0, 1.0, 4);
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_weights_sum_to_length() {
        for n in [1usize, 2, 3, 5, 8, 12, 16, 20] {
            let (_, w) = gauss_legendre::<f64>(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
        }
    }

    #[test]
    fn adaptive_simpson_handles_smooth_integrands() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn gauss_works_in_f32() {
        let v = gauss(|x: f32| x * x, 0.0f32, 1.0, 6);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }
}
