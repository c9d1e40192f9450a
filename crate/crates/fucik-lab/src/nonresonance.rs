//! Mountain-pass solver for the semilinear problem `-L_K u = f(x, u)` with
//! nonlinearities whose asymptotic slopes sit strictly between the principal
//! eigenvalue (on both sides) and a Fučík curve point `(alpha, beta)`.
//!
//! The energy is
//!
//! ```text
//! Psi(u) = 1/2 u^T A u - sum_i w_i F(x_i, u_i)
//! ```
//!
//! with `w` the lumped-mass weights and `F` the primitive of `f`. Critical
//! points of `Psi` are exactly the discrete weak solutions. The solver
//! builds the segment `-R phi_1 -> R phi_1` (with `R` chosen so both
//! endpoints sit below `Psi(0) - 1`), deforms it with the shared engine in
//! the free (unconstrained) geometry, and polishes the argmax by damped
//! Newton on the gradient.

use nalgebra::DVector;

use crate::assembly::GalerkinPair;
use crate::descent::{deform, DeformOptions, DeformSpace};
use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::spectrum::lowest_eigenpairs;

/// Built-in nonlinearity families. All have closed-form primitives and
/// constant asymptotic slopes.
#[derive(Debug, Clone)]
pub enum NonlinearityKind<T> {
    /// `f(x,s) = m s + c`.
    LinearShift { m: T, c: T },
    /// `f(x,s) = a s⁺ - b s⁻ + arctan(s)` (slopes `a` at `+inf`, `b` at
    /// `-inf`, bounded perturbation).
    PiecewiseAsymptotic { slope_pos: T, slope_neg: T },
    /// Piecewise-linear interpolation of `(breaks, values)` extended by the
    /// declared slopes outside the table range.
    CustomTable {
        breaks: Vec<T>,
        values: Vec<T>,
        slope_neg: T,
        slope_pos: T,
    },
}

/// A validated nonlinearity together with its target curve point.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec<T> {
    kind: NonlinearityKind<T>,
    /// Target Fučík point `(alpha, beta)` the slopes must stay below.
    target: (T, T),
}

impl<T: Real> NonlinearitySpec<T> {
    /// Build a spec without the admissibility gate. Only structural checks
    /// (table shape) are performed; use [`NonlinearitySpec::gated`] for
    /// anything that will be solved.
    pub fn unchecked(kind: NonlinearityKind<T>, target: (T, T)) -> Result<Self> {
        if let NonlinearityKind::CustomTable { breaks, values, .. } = &kind {
            if breaks.len() < 2 || breaks.len() != values.len() {
                return Err(Error::NonlinearitySpec(
                    "table needs >= 2 breakpoints with one value each".into(),
                ));
            }
            for w in breaks.windows(2) {
                if !(w[0] < w[1]) {
                    return Err(Error::NonlinearitySpec(
                        "table breakpoints must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(NonlinearitySpec { kind, target })
    }

    /// Build a spec and enforce the admissibility conditions against the
    /// discrete principal eigenvalue of `gp`: both asymptotic slope bounds
    /// must lie in `[lambda_1, alpha]` resp. `[lambda_1, beta]`, strictly
    /// above `lambda_1`, and strictly below the target on at least one side.
    /// Violations are rejected with the violated inequality named.
    pub fn gated(
        kind: NonlinearityKind<T>,
        target: (T, T),
        gp: &GalerkinPair<T>,
    ) -> Result<Self> {
        let spec = Self::unchecked(kind, target)?;
        let lambda1 = lowest_eigenpairs(gp, 1, lit::<T>(1e-8))?[0].value;
        spec.gate(lambda1)?;
        Ok(spec)
    }

    /// The admissibility gate against a known `lambda_1`.
    pub fn gate(&self, lambda1: T) -> Result<()> {
        let (alpha, beta) = self.target;
        let (sp, sn) = self.asymptotic_slopes();
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        // Slope bounds: lambda_1 <= slope <= target coordinate.
        if !(sp >= lambda1) {
            return Err(Error::NonlinearitySpec(format!(
                "slope bound violated: positive-side slope {} is below lambda_1 = {}",
                f(sp),
                f(lambda1)
            )));
        }
        if !(sn >= lambda1) {
            return Err(Error::NonlinearitySpec(format!(
                "slope bound violated: negative-side slope {} is below lambda_1 = {}",
                f(sn),
                f(lambda1)
            )));
        }
        if !(sp <= alpha) {
            return Err(Error::NonlinearitySpec(format!(
                "slope bound violated: positive-side slope {} exceeds alpha = {}",
                f(sp),
                f(alpha)
            )));
        }
        if !(sn <= beta) {
            return Err(Error::NonlinearitySpec(format!(
                "slope bound violated: negative-side slope {} exceeds beta = {}",
                f(sn),
                f(beta)
            )));
        }
        // Strictness: above lambda_1 on both sides (the bounds are constant
        // in x, so "positive measure" means everywhere) ...
        if !(sp > lambda1) || !(sn > lambda1) {
            return Err(Error::NonlinearitySpec(format!(
                "strictness violated: slopes ({}, {}) must exceed lambda_1 = {} strictly",
                f(sp),
                f(sn),
                f(lambda1)
            )));
        }
        // ... and strictly below the target on at least one side.
        if !(sp < alpha) && !(sn < beta) {
            return Err(Error::NonlinearitySpec(format!(
                "strictness violated: slopes ({}, {}) must stay strictly below the target ({}, {}) on at least one side",
                f(sp),
                f(sn),
                f(alpha),
                f(beta)
            )));
        }
        Ok(())
    }

    pub fn target(&self) -> (T, T) {
        self.target
    }

    pub fn kind(&self) -> &NonlinearityKind<T> {
        &self.kind
    }

    /// Asymptotic slopes `(f(s)/s at +inf, f(s)/s at -inf)`; these also
    /// bound the primitive quotients `2F/s^2`.
    pub fn asymptotic_slopes(&self) -> (T, T) {
        match &self.kind {
            NonlinearityKind::LinearShift { m, .. } => (*m, *m),
            NonlinearityKind::PiecewiseAsymptotic {
                slope_pos,
                slope_neg,
            } => (*slope_pos, *slope_neg),
            NonlinearityKind::CustomTable {
                slope_pos,
                slope_neg,
                ..
            } => (*slope_pos, *slope_neg),
        }
    }

    /// `f(x, s)` (the built-in families do not vary in `x`; the coordinate
    /// is part of the interface contract).
    pub fn f(&self, _x: T, s: T) -> T {
        match &self.kind {
            NonlinearityKind::LinearShift { m, c } => *m * s + *c,
            NonlinearityKind::PiecewiseAsymptotic {
                slope_pos,
                slope_neg,
            } => {
                let lin = if s > T::zero() { *slope_pos } else { *slope_neg };
                lin * s + s.atan()
            }
            NonlinearityKind::CustomTable {
                breaks,
                values,
                slope_neg,
                slope_pos,
            } => {
                if s <= breaks[0] {
                    values[0] + *slope_neg * (s - breaks[0])
                } else if s >= *breaks.last().unwrap() {
                    *values.last().unwrap() + *slope_pos * (s - *breaks.last().unwrap())
                } else {
                    let k = breaks.partition_point(|&b| b < s).max(1) - 1;
                    let theta = (s - breaks[k]) / (breaks[k + 1] - breaks[k]);
                    values[k] * (T::one() - theta) + values[k + 1] * theta
                }
            }
        }
    }

    /// Generalized nodal slope `f_s(x, s)`; at kinks the nonpositive branch
    /// is used, matching the positive-part convention elsewhere.
    pub fn f_prime(&self, _x: T, s: T) -> T {
        match &self.kind {
            NonlinearityKind::LinearShift { m, .. } => *m,
            NonlinearityKind::PiecewiseAsymptotic {
                slope_pos,
                slope_neg,
            } => {
                let lin = if s > T::zero() { *slope_pos } else { *slope_neg };
                lin + T::one() / (T::one() + s * s)
            }
            NonlinearityKind::CustomTable {
                breaks,
                values,
                slope_neg,
                slope_pos,
            } => {
                if s <= breaks[0] {
                    *slope_neg
                } else if s >= *breaks.last().unwrap() {
                    *slope_pos
                } else {
                    let k = breaks.partition_point(|&b| b < s).max(1) - 1;
                    (values[k + 1] - values[k]) / (breaks[k + 1] - breaks[k])
                }
            }
        }
    }

    /// Closed-form primitive `F(x, s) = int_0^s f(x, t) dt`.
    pub fn big_f(&self, _x: T, s: T) -> T {
        let half = lit::<T>(0.5);
        match &self.kind {
            NonlinearityKind::LinearShift { m, c } => *m * s * s * half + *c * s,
            NonlinearityKind::PiecewiseAsymptotic {
                slope_pos,
                slope_neg,
            } => {
                let lin = if s > T::zero() { *slope_pos } else { *slope_neg };
                // Primitive of arctan: s atan(s) - ln(1+s^2)/2 (even, 0 at 0).
                lin * s * s * half + s * s.atan() - (T::one() + s * s).ln() * half
            }
            NonlinearityKind::CustomTable { breaks, .. } => {
                // Integrate the piecewise-linear interpolant from 0 to s.
                let mut knots: Vec<T> = breaks.clone();
                if s < knots[0] {
                    knots.insert(0, s);
                } else if s > *knots.last().unwrap() {
                    knots.push(s);
                }
                // Trapezoid sum over [min(0,s), max(0,s)] clipped pieces.
                let (lo, hi, sign) = if s >= T::zero() {
                    (T::zero(), s, T::one())
                } else {
                    (s, T::zero(), -T::one())
                };
                let mut acc = T::zero();
                let mut prev = lo;
                for &k in knots.iter().chain(std::iter::once(&hi)) {
                    let next = k.max(lo).min(hi);
                    if next > prev {
                        let fa = self.f(T::zero(), prev);
                        let fb = self.f(T::zero(), next);
                        acc += (fa + fb) * (next - prev) * half;
                        prev = next;
                    }
                }
                if prev < hi {
                    let fa = self.f(T::zero(), prev);
                    let fb = self.f(T::zero(), hi);
                    acc += (fa + fb) * (hi - prev) * half;
                }
                acc * sign
            }
        }
    }
}

/// Energy functional `Psi(u)`.
pub fn psi<T: Real>(gp: &GalerkinPair<T>, spec: &NonlinearitySpec<T>, u: &DVector<T>) -> Result<T> {
    let quad = gp.energy(u)? * lit::<T>(0.5);
    let nodes = gp.mesh().nodes();
    let mut pot = T::zero();
    for i in 0..u.len() {
        pot += gp.m_lumped()[i] * spec.big_f(nodes[i], u[i]);
    }
    Ok(quad - pot)
}

/// Gradient `A u - M_L f(x, u)` (nodal).
pub fn grad_psi<T: Real>(
    gp: &GalerkinPair<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    if u.len() != gp.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: gp.n_dofs(),
            got: u.len(),
        });
    }
    let nodes = gp.mesh().nodes();
    let mut g = gp.a() * u;
    for i in 0..u.len() {
        g[i] -= gp.m_lumped()[i] * spec.f(nodes[i], u[i]);
    }
    Ok(g)
}

/// Weight functional built from the primitive bounds:
/// `Phi(u) = u^T A u - sum_i w_i (Delta_+ (u_i⁺)² + Delta_- (u_i⁻)²)`.
/// Strict admissibility implies `Phi(±phi_1) < 0`.
pub fn phi_weight<T: Real>(
    gp: &GalerkinPair<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
) -> Result<T> {
    let (dp, dn) = spec.asymptotic_slopes();
    let mut pot = T::zero();
    for i in 0..u.len() {
        let up = u[i].max(T::zero());
        let un = (-u[i]).max(T::zero());
        pot += gp.m_lumped()[i] * (dp * up * up + dn * un * un);
    }
    Ok(gp.energy(u)? - pot)
}

/// Outcome of the endpoint search.
#[derive(Debug, Clone)]
pub struct RSelection<T> {
    pub r: T,
    /// `(R, Psi(R phi_1), Psi(-R phi_1))` for every tried radius.
    pub log: Vec<(T, T, T)>,
}

/// Smallest `R` in the doubling sequence `1, 2, 4, ...` with
/// `max(Psi(R phi_1), Psi(-R phi_1)) < Psi(0) - 1`. Aborts past `2^20`,
/// which indicates slopes touching `lambda_1`.
pub fn select_r<T: Real>(gp: &GalerkinPair<T>, spec: &NonlinearitySpec<T>) -> Result<RSelection<T>> {
    let phi1 = lowest_eigenpairs(gp, 1, lit::<T>(1e-8))?[0].vector.clone();
    let margin = T::one();
    let psi0 = psi(gp, spec, &DVector::zeros(gp.n_dofs()))?;
    let mut log = Vec::new();
    let mut r = T::one();
    for _ in 0..=20 {
        let plus = psi(gp, spec, &(&phi1 * r))?;
        let minus = psi(gp, spec, &(&phi1 * (-r)))?;
        log.push((r, plus, minus));
        if plus.max(minus) < psi0 - margin {
            return Ok(RSelection { r, log });
        }
        r *= lit::<T>(2.0);
    }
    Err(Error::EndpointSearchFailed)
}

/// Classification of a converged critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    MountainPass,
    Minimizer,
    Unknown,
}

/// A critical point of the energy.
#[derive(Debug, Clone)]
pub struct EnergyCritical<T> {
    pub u: DVector<T>,
    /// Energy `Psi(u)`.
    pub value: T,
    /// Dual norm of `grad Psi(u)`.
    pub grad_norm: T,
    pub classification: Classification,
    /// Endpoint energies `(Psi(R phi_1), Psi(-R phi_1))`.
    pub endpoints: (T, T),
    pub r: T,
    pub sweeps: usize,
    /// `(sweep, level, criticality)` per deformation sweep.
    pub history: Vec<(usize, T, T)>,
}

/// Damped Newton polish on `grad Psi` with the nodal-slope generalized
/// Jacobian `A - M_L diag(f_s)`; the line search is on the gradient norm
/// since the Jacobian is indefinite at a saddle.
fn newton_polish<T: Real>(
    gp: &GalerkinPair<T>,
    spec: &NonlinearitySpec<T>,
    start: &DVector<T>,
    tol: T,
    max_iter: usize,
) -> Result<DVector<T>> {
    let n = gp.n_dofs();
    let nodes = gp.mesh().nodes();
    let mut u = start.clone();
    let mut g = grad_psi(gp, spec, &u)?;
    let mut norm = gp.dual_norm(&g);
    for _ in 0..max_iter {
        if norm <= tol {
            return Ok(u);
        }
        let mut j = gp.a().clone();
        for i in 0..n {
            j[(i, i)] -= gp.m_lumped()[i] * spec.f_prime(nodes[i], u[i]);
        }
        let delta = j
            .lu()
            .solve(&g)
            .ok_or(Error::SingularJacobian)?;
        let mut lam = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let u_try = &u - &delta * lam;
            let g_try = grad_psi(gp, spec, &u_try)?;
            let n_try = gp.dual_norm(&g_try);
            if n_try < norm * (T::one() - lit::<T>(1e-4) * lam) || n_try <= tol {
                u = u_try;
                g = g_try;
                norm = n_try;
                accepted = true;
                break;
            }
            lam *= lit::<T>(0.5);
        }
        if !accepted {
            return Err(Error::NewtonNonConvergence {
                max_iter,
                residual: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    if norm <= tol {
        Ok(u)
    } else {
        Err(Error::NewtonNonConvergence {
            max_iter,
            residual: norm.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Unconstrained deformation space for `Psi`.
struct FreeSpace<'a, T> {
    gp: &'a GalerkinPair<T>,
    spec: &'a NonlinearitySpec<T>,
    polish_tol: T,
}

impl<T: Real> DeformSpace<T> for FreeSpace<'_, T> {
    fn value(&self, u: &DVector<T>) -> T {
        psi(self.gp, self.spec, u).expect("dimension fixed")
    }

    fn gradient(&self, u: &DVector<T>) -> DVector<T> {
        grad_psi(self.gp, self.spec, u).expect("dimension fixed")
    }

    fn direction(&self, _u: &DVector<T>, g: &DVector<T>) -> DVector<T> {
        DVector::from_fn(g.len(), |i, _| g[i] / self.gp.m_lumped()[i])
    }

    fn retract(&self, u: DVector<T>) -> Option<DVector<T>> {
        Some(u)
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
        self.gp.dual_norm(&self.gradient(u))
    }

    fn accelerate(&self, u: &DVector<T>) -> Option<DVector<T>> {
        newton_polish(self.gp, self.spec, u, self.polish_tol, 30).ok()
    }
}

/// Solve the semilinear problem by the mountain-pass deformation with a
/// Newton polish. On polish failure the best iterate is returned with
/// classification `Unknown` and whatever gradient norm it reached.
pub fn solve_nonresonance<T: Real>(
    gp: &GalerkinPair<T>,
    spec: &NonlinearitySpec<T>,
    tol: T,
) -> Result<EnergyCritical<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let lambda1 = lowest_eigenpairs(gp, 1, lit::<T>(1e-8))?[0].value;
    spec.gate(lambda1)?;
    let sel = select_r(gp, spec)?;
    let phi1 = lowest_eigenpairs(gp, 1, lit::<T>(1e-8))?[0].vector.clone();
    let endpoint_plus = &phi1 * sel.r;
    let endpoint_minus = &phi1 * (-sel.r);
    let psi_plus = psi(gp, spec, &endpoint_plus)?;
    let psi_minus = psi(gp, spec, &endpoint_minus)?;

    let n_path = 33usize;
    let mut points = Vec::with_capacity(n_path);
    for k in 0..n_path {
        let tau = lit::<T>(k as f64) / lit::<T>((n_path - 1) as f64);
        points.push(&endpoint_minus * (T::one() - tau) + &endpoint_plus * tau);
    }

    // Step scale from the largest curvature of the quadratic part.
    let lam_max = {
        let n = gp.n_dofs();
        let mut v = DVector::from_element(n, T::one());
        let mut lam = T::one();
        for _ in 0..60 {
            let mut w = gp.a() * &v;
            for i in 0..n {
                w[i] /= gp.m_lumped()[i];
            }
            lam = w.norm() / v.norm().max(T::eps());
            let norm = w.norm();
            if norm > T::zero() {
                v = w / norm;
            }
        }
        lam
    };
    let space = FreeSpace {
        gp,
        spec,
        polish_tol: tol.min(lit::<T>(1e-10)),
    };
    let mut opts = DeformOptions::new(T::one() / lam_max);
    opts.crit_tol = lit::<T>(1e-6);
    let out = deform(&space, &mut points, &opts);
    let u_raw = points[out.argmax].clone();

    match newton_polish(gp, spec, &u_raw, tol, 60) {
        Ok(u) => {
            let value = psi(gp, spec, &u)?;
            let grad_norm = gp.dual_norm(&grad_psi(gp, spec, &u)?);
            let classification = if value > psi_plus.max(psi_minus) {
                Classification::MountainPass
            } else if value < psi_plus.min(psi_minus) {
                Classification::Minimizer
            } else {
                Classification::Unknown
            };
            Ok(EnergyCritical {
                u,
                value,
                grad_norm,
                classification,
                endpoints: (psi_plus, psi_minus),
                r: sel.r,
                sweeps: out.sweeps,
                history: out.history,
            })
        }
        Err(err) => {
            log::warn!("Newton polish failed ({err}); returning the raw deformation argmax");
            let value = psi(gp, spec, &u_raw)?;
            let grad_norm = gp.dual_norm(&grad_psi(gp, spec, &u_raw)?);
            Ok(EnergyCritical {
                u: u_raw,
                value,
                grad_norm,
                classification: Classification::Unknown,
                endpoints: (psi_plus, psi_minus),
                r: sel.r,
                sweeps: out.sweeps,
                history: out.history,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::geometry::{Domain, Mesh};
    use crate::kernel::{Kernel, KernelVariant};
    use crate::quad::adaptive_simpson;

    fn setup(n: usize) -> GalerkinPair<f64> {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let mesh = Mesh::uniform(domain, n).unwrap();
        let kernel = Kernel::new(0.25, 1.0, KernelVariant::Fractional).unwrap();
        assemble(&mesh, &kernel).unwrap()
    }

    fn lambdas(gp: &GalerkinPair<f64>) -> (f64, f64) {
        let e = lowest_eigenpairs(gp, 2, 1e-10).unwrap();
        (e[0].value, e[1].value)
    }

    #[test]
    fn primitives_match_quadrature() {
        let specs = [
            NonlinearitySpec::unchecked(
                NonlinearityKind::LinearShift { m: 12.0, c: 1.0 },
                (16.0, 16.0),
            )
            .unwrap(),
            NonlinearitySpec::unchecked(
                NonlinearityKind::PiecewiseAsymptotic {
                    slope_pos: 12.0,
                    slope_neg: 11.0,
                },
                (16.0, 16.0),
            )
            .unwrap(),
            NonlinearitySpec::unchecked(
                NonlinearityKind::CustomTable {
                    breaks: vec![-2.0, -0.5, 0.0, 1.0, 3.0],
                    values: vec![-24.0, -6.0, 0.5, 13.0, 37.0],
                    slope_neg: 12.0,
                    slope_pos: 12.0,
                },
                (16.0, 16.0),
            )
            .unwrap(),
        ];
        for spec in &specs {
            for s in [-10.0, -3.0, -0.7, 0.0, 0.4, 1.3, 8.0] {
                let f = |t: f64| spec.f(0.0, t);
                let quad = adaptive_simpson(&f, 0.0, s, 1e-12);
                let closed = spec.big_f(0.0, s);
                assert!(
                    (closed - quad).abs() <= 1e-8 * (1.0 + s * s),
                    "s = {s}: closed {closed} vs quad {quad}"
                );
            }
        }
    }

    #[test]
    fn gate_rejects_resonant_and_out_of_band_slopes() {
        let gp = setup(32);
        let (l1, l2) = lambdas(&gp);
        // Slopes exactly at lambda_1: strictness violated.
        let r = NonlinearitySpec::gated(
            NonlinearityKind::LinearShift { m: l1, c: 1.0 },
            (l2, l2),
            &gp,
        );
        assert!(matches!(r, Err(Error::NonlinearitySpec(_))), "{r:?}");
        // Slope above the target.
        let r = NonlinearitySpec::gated(
            NonlinearityKind::LinearShift { m: l2 + 1.0, c: 0.0 },
            (l2, l2),
            &gp,
        );
        assert!(matches!(r, Err(Error::NonlinearitySpec(_))));
        // Admissible midpoint slope passes.
        assert!(NonlinearitySpec::gated(
            NonlinearityKind::LinearShift {
                m: 0.5 * (l1 + l2),
                c: 1.0
            },
            (l2, l2),
            &gp,
        )
        .is_ok());
    }

    #[test]
    fn psi_vanishes_on_principal_ray_at_resonance() {
        let gp = setup(32);
        let (l1, _) = lambdas(&gp);
        let spec = NonlinearitySpec::unchecked(
            NonlinearityKind::LinearShift { m: l1, c: 0.0 },
            (l1, l1),
        )
        .unwrap();
        let phi1 = lowest_eigenpairs(&gp, 1, 1e-10).unwrap()[0].vector.clone();
        for c in [0.5, 1.0, 7.0] {
            let v = psi(&gp, &spec, &(&phi1 * c)).unwrap();
            assert!(v.abs() < 1e-9 * c * c, "Psi({c} phi1) = {v}");
        }
        // And select_R must abort: the ray is energy-flat.
        assert!(matches!(select_r(&gp, &spec), Err(Error::EndpointSearchFailed)));
    }

    #[test]
    fn grad_matches_finite_differences() {
        let gp = setup(16);
        let spec = NonlinearitySpec::unchecked(
            NonlinearityKind::PiecewiseAsymptotic {
                slope_pos: 12.0,
                slope_neg: 11.0,
            },
            (16.0, 16.0),
        )
        .unwrap();
        let u = DVector::from_fn(gp.n_dofs(), |i, _| ((i * 11 % 9) as f64 - 4.0) / 3.0 + 0.07);
        let g = grad_psi(&gp, &spec, &u).unwrap();
        let eps = 1e-6;
        for k in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += eps;
            um[k] -= eps;
            let fd =
                (psi(&gp, &spec, &up).unwrap() - psi(&gp, &spec, &um).unwrap()) / (2.0 * eps);
            assert!(
                (fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()),
                "node {k}: fd {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn select_r_matches_closed_form_for_linear_shift() {
        let gp = setup(48);
        let (l1, l2) = lambdas(&gp);
        let m = 0.5 * (l1 + l2);
        let spec = NonlinearitySpec::unchecked(
            NonlinearityKind::LinearShift { m, c: 1.0 },
            (l2, l2),
        )
        .unwrap();
        let phi1 = lowest_eigenpairs(&gp, 1, 1e-10).unwrap()[0].vector.clone();
        let dot: f64 = (0..gp.n_dofs())
            .map(|i| gp.m_lumped()[i] * phi1[i])
            .sum();
        let sel = select_r(&gp, &spec).unwrap();
        // Psi(±R phi1) = R^2 (l1 - m)/2 ∓ R dot; find the first doubling R
        // with max over signs < -1.
        let mut expect = 1.0f64;
        loop {
            let e = expect * expect * (l1 - m) / 2.0 + expect * dot.abs();
            if e < -1.0 {
                break;
            }
            expect *= 2.0;
        }
        assert_eq!(sel.r, expect);
        // Logged energies decrease along the doubling sequence tail.
        for w in sel.log.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9);
        }
    }

    #[test]
    fn linear_shift_solution_matches_direct_solve() {
        let gp = setup(48);
        let (l1, l2) = lambdas(&gp);
        let m = 0.5 * (l1 + l2);
        let spec = NonlinearitySpec::gated(
            NonlinearityKind::LinearShift { m, c: 1.0 },
            (l2, l2),
            &gp,
        )
        .unwrap();
        let sol = solve_nonresonance(&gp, &spec, 1e-10).unwrap();
        assert!(sol.grad_norm <= 1e-10, "grad norm {}", sol.grad_norm);
        // Oracle: (A - m M) u = M 1.
        let n = gp.n_dofs();
        let mut lhs = gp.a().clone();
        for i in 0..n {
            lhs[(i, i)] -= m * gp.m_lumped()[i];
        }
        let rhs = DVector::from_fn(n, |i, _| gp.m_lumped()[i]);
        let oracle = lhs.lu().solve(&rhs).unwrap();
        let rel = (&sol.u - &oracle).norm() / oracle.norm();
        assert!(rel < 1e-8, "relative error {rel}");
        assert_eq!(sol.classification, Classification::MountainPass);
        assert!(sol.value > sol.endpoints.0.max(sol.endpoints.1));
    }

    #[test]
    fn piecewise_asymptotic_converges_above_endpoints() {
        let gp = setup(48);
        let (l1, l2) = lambdas(&gp);
        let spec = NonlinearitySpec::gated(
            NonlinearityKind::PiecewiseAsymptotic {
                slope_pos: 0.6 * l1 + 0.4 * l2,
                slope_neg: 0.4 * l1 + 0.6 * l2,
            },
            (l2, l2),
            &gp,
        )
        .unwrap();
        let sol = solve_nonresonance(&gp, &spec, 1e-9).unwrap();
        assert!(sol.grad_norm <= 1e-9);
        assert_eq!(sol.classification, Classification::MountainPass);
        assert!(sol.value > sol.endpoints.0.max(sol.endpoints.1));
        // Weight functional is negative on the principal directions.
        let phi1 = lowest_eigenpairs(&gp, 1, 1e-10).unwrap()[0].vector.clone();
        assert!(phi_weight(&gp, &spec, &phi1).unwrap() < 0.0);
        assert!(phi_weight(&gp, &spec, &(-&phi1)).unwrap() < 0.0);
    }
}
