//! Constrained mountain-pass characterization of the Fučík curve.
//!
//! For fixed `p >= 0` the functional
//!
//! ```text
//! J_p(u) = u^T A u - p (u⁺)^T M u⁺     on the sphere  u^T M u = 1
//! ```
//!
//! has the curve value `c(p)` as the minimax level over paths joining
//! `phi_1` and `-phi_1` on the sphere. The path deformation keeps its level
//! monotonically non-increasing; the argmax is polished by the semismooth
//! Newton corrector, which also certifies the Lagrange multiplier identity
//! `t = J_p(u)`.

use nalgebra::DVector;

use crate::assembly::GalerkinPair;
use crate::continuation::semismooth_newton;
use crate::descent::{deform, DeformOptions, DeformSpace};
use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::spectrum::lowest_eigenpairs;

/// Functional value `J_p(u)`.
pub fn j_p<T: Real>(gp: &GalerkinPair<T>, p: T, u: &DVector<T>) -> Result<T> {
    let mut pos = T::zero();
    for i in 0..u.len() {
        let up = u[i].max(T::zero());
        pos += gp.m_lumped()[i] * up * up;
    }
    Ok(gp.energy(u)? - p * pos)
}

/// Gradient `2 A u - 2 p M u⁺` (the positive part is differentiated with
/// slope zero at nonpositive nodes).
pub fn grad_jp<T: Real>(gp: &GalerkinPair<T>, p: T, u: &DVector<T>) -> Result<DVector<T>> {
    if u.len() != gp.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: gp.n_dofs(),
            got: u.len(),
        });
    }
    let mut g = gp.a() * u * lit::<T>(2.0);
    for i in 0..u.len() {
        g[i] -= lit::<T>(2.0) * p * gp.m_lumped()[i] * u[i].max(T::zero());
    }
    Ok(g)
}

/// First-order criticality of `u` on the sphere: the best multiplier
/// `t* = u^T g / 2` and the dual norm of `g - 2 t* M u`.
pub fn criticality<T: Real>(gp: &GalerkinPair<T>, p: T, u: &DVector<T>) -> Result<(T, T)> {
    let g = grad_jp(gp, p, u)?;
    let t_star = u.dot(&g) * lit::<T>(0.5);
    let mut proj = g;
    for i in 0..u.len() {
        proj[i] -= lit::<T>(2.0) * t_star * gp.m_lumped()[i] * u[i];
    }
    Ok((t_star, gp.dual_norm(&proj)))
}

/// The sphere-constrained deformation space for `J_p`.
struct SphereSpace<'a, T> {
    gp: &'a GalerkinPair<T>,
    p: T,
    polish_tol: T,
}

impl<T: Real> DeformSpace<T> for SphereSpace<'_, T> {
    fn value(&self, u: &DVector<T>) -> T {
        j_p(self.gp, self.p, u).expect("dimension checked at construction")
    }

    fn gradient(&self, u: &DVector<T>) -> DVector<T> {
        grad_jp(self.gp, self.p, u).expect("dimension checked at construction")
    }

    fn direction(&self, u: &DVector<T>, g: &DVector<T>) -> DVector<T> {
        // Riemannian gradient in the lumped metric: M⁻¹ g minus its radial
        // component. Guarantees g^T d >= 0 by Cauchy–Schwarz on the sphere.
        let radial = u.dot(g);
        let mut d = DVector::zeros(u.len());
        for i in 0..u.len() {
            d[i] = g[i] / self.gp.m_lumped()[i] - radial * u[i];
        }
        d
    }

    fn retract(&self, u: DVector<T>) -> Option<DVector<T>> {
        let norm = self.gp.lumped_norm(&u);
        if norm > lit::<T>(1e-14) {
            Some(u / norm)
        } else {
            None
        }
    }

    fn dist2(&self, a: &DVector<T>, b: &DVector<T>) -> T {
        let mut acc = T::zero();
        for i in 0..a.len() {
            let d = a[i] - b[i];
            acc += self.gp.m_lumped()[i] * d * d;
        }
        acc
    }

    fn criticality(&self, u: &DVector<T>) -> T {
        criticality(self.gp, self.p, u)
            .expect("dimension checked at construction")
            .1
    }

    fn accelerate(&self, u: &DVector<T>) -> Option<DVector<T>> {
        let t0 = j_p(self.gp, self.p, u).ok()?;
        semismooth_newton(self.gp, self.p, u, t0, self.polish_tol, 30)
            .ok()
            .map(|pt| pt.u)
    }
}

/// Tuning knobs of the minimax solver.
#[derive(Debug, Clone)]
pub struct MinimaxOptions<T> {
    /// Number of path samples including endpoints.
    pub n_path: usize,
    /// Initial backtracking step; defaults to `0.1 / lambda_2`.
    pub step0: Option<T>,
    pub max_sweeps: usize,
    /// Criticality tolerance at the argmax (stopping rule).
    pub crit_tol: T,
    /// Tolerance of the Newton polish.
    pub polish_tol: T,
}

impl<T: Real> Default for MinimaxOptions<T> {
    fn default() -> Self {
        MinimaxOptions {
            n_path: 33,
            step0: None,
            max_sweeps: 4000,
            crit_tol: lit(1e-6),
            polish_tol: lit(1e-12),
        }
    }
}

/// A critical point of `J_p` on the sphere found by the minimax deformation.
#[derive(Debug, Clone)]
pub struct CriticalPoint<T> {
    pub u: DVector<T>,
    pub p: T,
    /// Lagrange multiplier; equals the level `c(p)`.
    pub t: T,
    /// Functional value `J_p(u)` (agrees with `t` at criticality).
    pub value: T,
    /// Dual norm of the projected gradient at `u`.
    pub criticality: T,
    /// Whether the Newton polish converged; if not, the point is the raw
    /// deformation argmax and only first-order accurate.
    pub polished: bool,
    /// Whether the deformation hit its sweep/plateau guard before meeting
    /// the criticality tolerance.
    pub stalled: bool,
    pub sweeps: usize,
    /// Per-sweep `(sweep, level, argmax criticality)` trace.
    pub history: Vec<(usize, T, T)>,
}

impl<T: Real> CriticalPoint<T> {
    pub fn alpha(&self) -> T {
        self.p + self.t
    }

    pub fn beta(&self) -> T {
        self.t
    }
}

/// Initial path: a quadratic Bezier from `-phi_1` to `phi_1` whose midpoint
/// is `phi_2`, sampled at `n_path` points and retracted to the sphere.
pub fn initial_path<T: Real>(
    gp: &GalerkinPair<T>,
    phi1: &DVector<T>,
    phi2: &DVector<T>,
    n_path: usize,
) -> Result<Vec<DVector<T>>> {
    if n_path < 3 {
        return Err(Error::Precondition("path needs at least 3 points".into()));
    }
    let control = phi2 * lit::<T>(2.0);
    let mut out = Vec::with_capacity(n_path);
    for k in 0..n_path {
        let tau = lit::<T>(k as f64) / lit::<T>((n_path - 1) as f64);
        let omt = T::one() - tau;
        let b = -phi1 * (omt * omt) + &control * (lit::<T>(2.0) * tau * omt) + phi1 * (tau * tau);
        let norm = gp.lumped_norm(&b);
        if !(norm > lit::<T>(1e-14)) {
            return Err(Error::Precondition(
                "degenerate initial path sample (phi_1 and phi_2 collinear?)".into(),
            ));
        }
        out.push(b / norm);
    }
    Ok(out)
}

/// Report of one path deformation run.
#[derive(Debug, Clone)]
pub struct DeformationReport<T> {
    pub level: T,
    pub argmax: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub stalled: bool,
    pub history: Vec<(usize, T, T)>,
}

/// Deform a sphere path under `J_p` in place (endpoints fixed); the level
/// never increases across sweeps.
pub fn deform_path<T: Real>(
    gp: &GalerkinPair<T>,
    p: T,
    points: &mut Vec<DVector<T>>,
    step0: T,
    max_sweeps: usize,
    crit_tol: T,
) -> Result<DeformationReport<T>> {
    if !(p >= T::zero()) {
        return Err(Error::Precondition("p must be >= 0".into()));
    }
    if points.len() < 3 {
        return Err(Error::Precondition("path needs at least 3 points".into()));
    }
    for pt in points.iter() {
        if pt.len() != gp.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: gp.n_dofs(),
                got: pt.len(),
            });
        }
        let norm = gp.lumped_norm(pt);
        if (norm - T::one()).abs() > lit::<T>(1e-10) {
            return Err(Error::Precondition(
                "path points must lie on the lumped-mass sphere".into(),
            ));
        }
    }
    let space = SphereSpace {
        gp,
        p,
        polish_tol: lit(1e-12),
    };
    let mut opts = DeformOptions::new(step0);
    opts.max_sweeps = max_sweeps;
    opts.crit_tol = crit_tol;
    let out = deform(&space, points, &opts);
    Ok(DeformationReport {
        level: out.level,
        argmax: out.argmax,
        sweeps: out.sweeps,
        converged: out.converged,
        stalled: out.stalled,
        history: out.history,
    })
}

/// Minimax value `c(p)` with its critical point.
pub fn c_of_p<T: Real>(
    gp: &GalerkinPair<T>,
    p: T,
    opts: &MinimaxOptions<T>,
) -> Result<CriticalPoint<T>> {
    if !(p >= T::zero()) {
        return Err(Error::Precondition("p must be >= 0".into()));
    }
    let eig = lowest_eigenpairs(gp, 2, lit::<T>(1e-8))?;
    let phi1 = &eig[0].vector;
    let phi2 = &eig[1].vector;
    let lambda2 = eig[1].value;
    let step0 = opts.step0.unwrap_or(lit::<T>(0.1) / lambda2);

    let mut path = initial_path(gp, phi1, phi2, opts.n_path)?;
    let report = deform_path(gp, p, &mut path, step0, opts.max_sweeps, opts.crit_tol)?;
    let u_raw = path[report.argmax].clone();
    let value_raw = j_p(gp, p, &u_raw)?;

    match semismooth_newton(gp, p, &u_raw, value_raw, opts.polish_tol, 50) {
        Ok(pt) => {
            let value = j_p(gp, p, &pt.u)?;
            let (_, crit) = criticality(gp, p, &pt.u)?;
            Ok(CriticalPoint {
                u: pt.u,
                p,
                t: pt.t,
                value,
                criticality: crit,
                polished: true,
                stalled: report.stalled,
                sweeps: report.sweeps,
                history: report.history,
            })
        }
        Err(err) => {
            log::warn!(
                "Newton polish of the minimax point failed ({err}); returning the raw argmax"
            );
            let (t_star, crit) = criticality(gp, p, &u_raw)?;
            Ok(CriticalPoint {
                u: u_raw,
                p,
                t: t_star,
                value: value_raw,
                criticality: crit,
                polished: false,
                stalled: report.stalled,
                sweeps: report.sweeps,
                history: report.history,
            })
        }
    }
}

/// Ring test of the strict local minimum at `-phi_1`: sample `n` tangent
/// perturbations of size `eps` on the sphere and return the smallest excess
/// `J_p(u_eps) - J_p(-phi_1)`. All excesses should be positive for small
/// `eps`.
pub fn ring_test<T: Real>(
    gp: &GalerkinPair<T>,
    p: T,
    eps: T,
    n: usize,
    seed: u64,
) -> Result<T> {
    let eig = lowest_eigenpairs(gp, 1, lit::<T>(1e-8))?;
    let phi1 = &eig[0].vector;
    let base = -phi1;
    let j0 = j_p(gp, p, &base)?;
    let dim = gp.n_dofs();

    // Small deterministic xorshift generator; test-side RNG stays external.
    let mut state = seed.max(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };

    let mut min_excess = T::max_value().unwrap();
    for _ in 0..n {
        let mut v = DVector::from_fn(dim, |_, _| lit::<T>(next()));
        // Project out the radial component in the lumped metric.
        let mut radial = T::zero();
        for i in 0..dim {
            radial += gp.m_lumped()[i] * v[i] * base[i];
        }
        for i in 0..dim {
            v[i] -= radial * base[i];
        }
        let norm = gp.lumped_norm(&v);
        if !(norm > T::zero()) {
            continue;
        }
        let cand = &base + &v * (eps / norm);
        let cand = &cand / gp.lumped_norm(&cand);
        min_excess = min_excess.min(j_p(gp, p, &cand)? - j0);
    }
    Ok(min_excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::geometry::{Domain, Mesh};
    use crate::kernel::{Kernel, KernelVariant};

    fn setup(n: usize) -> GalerkinPair<f64> {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let mesh = Mesh::uniform(domain, n).unwrap();
        let kernel = Kernel::new(0.25, 1.0, KernelVariant::Fractional).unwrap();
        assemble(&mesh, &kernel).unwrap()
    }

    #[test]
    fn endpoint_identities() {
        let gp = setup(64);
        let eig = lowest_eigenpairs(&gp, 1, 1e-10).unwrap();
        let (l1, phi1) = (eig[0].value, &eig[0].vector);
        for p in [0.0, 1.0, 5.0] {
            let jp = j_p(&gp, p, phi1).unwrap();
            let jm = j_p(&gp, p, &(-phi1)).unwrap();
            assert!((jp - (l1 - p)).abs() < 1e-10, "J_p(phi1) = {jp}");
            assert!((jm - l1).abs() < 1e-10, "J_p(-phi1) = {jm}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let gp = setup(16);
        let p = 1.7;
        let u = DVector::from_fn(gp.n_dofs(), |i, _| ((i * 13 % 7) as f64 - 3.0) / 4.0 + 0.05);
        let g = grad_jp(&gp, p, &u).unwrap();
        let eps = 1e-6;
        for k in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += eps;
            um[k] -= eps;
            let fd = (j_p(&gp, p, &up).unwrap() - j_p(&gp, p, &um).unwrap()) / (2.0 * eps);
            assert!(
                (fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()),
                "node {k}: fd {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn phi2_is_critical_at_p_zero() {
        let gp = setup(64);
        let eig = lowest_eigenpairs(&gp, 2, 1e-10).unwrap();
        let (t, crit) = criticality(&gp, 0.0, &eig[1].vector).unwrap();
        assert!((t - eig[1].value).abs() < 1e-8);
        assert!(crit < 1e-7, "criticality {crit}");
    }

    #[test]
    fn minimax_at_p_zero_recovers_lambda2() {
        let gp = setup(48);
        let eig = lowest_eigenpairs(&gp, 2, 1e-10).unwrap();
        let cp = c_of_p(&gp, 0.0, &MinimaxOptions::default()).unwrap();
        assert!(cp.polished);
        assert!(
            (cp.t - eig[1].value).abs() < 1e-8 * eig[1].value,
            "c(0) = {} vs lambda2 = {}",
            cp.t,
            eig[1].value
        );
        // Level history is monotone non-increasing.
        for w in cp.history.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn minimax_at_positive_p_sits_between_lambdas() {
        let gp = setup(48);
        let eig = lowest_eigenpairs(&gp, 2, 1e-10).unwrap();
        let cp = c_of_p(&gp, 1.0, &MinimaxOptions::default()).unwrap();
        assert!(cp.polished, "polish failed");
        assert!(cp.t > eig[0].value && cp.t < eig[1].value);
        assert!((cp.value - cp.t).abs() < 1e-8);
        assert!(cp.criticality < 1e-8);
        // Minimax upper-bound property: every sweep level stays at or above
        // the converged value.
        for h in &cp.history {
            assert!(h.1 >= cp.t - 1e-10, "sweep {} level {} < c(p) {}", h.0, h.1, cp.t);
        }
    }

    #[test]
    fn ring_test_confirms_local_minimum() {
        let gp = setup(48);
        for eps in [1e-2, 1e-1] {
            let excess = ring_test(&gp, 1.0, eps, 100, 42).unwrap();
            assert!(excess > 0.0, "eps {eps}: min excess {excess}");
        }
    }

    #[test]
    fn rejects_off_sphere_path() {
        let gp = setup(32);
        let n = gp.n_dofs();
        let mut pts = vec![DVector::from_element(n, 1.0); 3];
        let err = deform_path(&gp, 0.0, &mut pts, 0.01, 10, 1e-6);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
