//! Predictor–corrector continuation of the first nontrivial Fučík curve.
//!
//! A point on the curve is a pair `(u, t)` with `u` on the lumped-mass
//! sphere solving
//!
//! ```text
//! A u = (p + t) M u⁺ - t M u⁻            (equivalently  A u - p M u⁺ - t M u = 0)
//! ```
//!
//! so the Fučík pair is `(alpha, beta) = (p + t, t)`. The corrector is a
//! semismooth Newton method on the bordered system; the predictor is a
//! secant extrapolation in `p` with automatic step halving.

use nalgebra::{DMatrix, DVector};

use crate::assembly::GalerkinPair;
use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::spectrum::{lowest_eigenpairs, EigenPair};

/// Which algorithm produced a curve point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Minimax,
    Continuation,
}

/// One solution of the discrete Fučík system.
#[derive(Debug, Clone)]
pub struct FucikPoint<T> {
    /// First Fučík coordinate `alpha = p + t`.
    pub alpha: T,
    /// Second Fučík coordinate `beta = t = c(p)`.
    pub beta: T,
    /// Curve parameter `p = alpha - beta`.
    pub p: T,
    /// Lagrange multiplier (equals `beta`).
    pub t: T,
    /// Sign-changing solution on the lumped-mass sphere.
    pub u: DVector<T>,
    /// Final dual-norm residual of the discrete weak form.
    pub residual: T,
    /// Residual per Newton iterate (diagnostic; quadratic tail expected).
    pub residual_history: Vec<T>,
    pub method: MethodTag,
}

fn positive_part<T: Real>(u: &DVector<T>) -> DVector<T> {
    DVector::from_fn(u.len(), |i, _| u[i].max(T::zero()))
}

struct Residual<T> {
    f1: DVector<T>,
    f2: T,
    norm: T,
}

fn residual<T: Real>(gp: &GalerkinPair<T>, p: T, u: &DVector<T>, t: T) -> Residual<T> {
    let m = gp.m_lumped();
    let up = positive_part(u);
    let mut f1 = gp.a() * u;
    for i in 0..u.len() {
        f1[i] -= m[i] * (p * up[i] + t * u[i]);
    }
    let mut umu = T::zero();
    for i in 0..u.len() {
        umu += m[i] * u[i] * u[i];
    }
    let f2 = (umu - T::one()) * lit::<T>(0.5);
    let norm = gp.dual_norm(&f1) + f2.abs();
    Residual { f1, f2, norm }
}

/// Semismooth Newton corrector for the bordered Fučík system at fixed `p`.
///
/// The seed must change sign; the generalized Jacobian assigns slope zero to
/// the positive-part derivative at nodes with `u_i <= 0`. Steps are damped
/// on residual increase, and the active set is frozen for one retry when
/// the Jacobian is singular or damping fails.
pub fn semismooth_newton<T: Real>(
    gp: &GalerkinPair<T>,
    p: T,
    seed: &DVector<T>,
    t_seed: T,
    tol: T,
    max_iter: usize,
) -> Result<FucikPoint<T>> {
    if !(p >= T::zero()) {
        return Err(Error::Precondition("curve parameter p must be >= 0".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let n = gp.n_dofs();
    if seed.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: seed.len(),
        });
    }
    let has_pos = seed.iter().any(|&v| v > T::zero());
    let has_neg = seed.iter().any(|&v| v < T::zero());
    if !has_pos || !has_neg {
        return Err(Error::SeedDoesNotChangeSign);
    }

    let m = gp.m_lumped();
    let active = |u: &DVector<T>| -> Vec<bool> { u.iter().map(|&v| v > T::zero()).collect() };

    // Bordered generalized Jacobian for a fixed active set.
    let jacobian = |u: &DVector<T>, t: T, act: &[bool]| -> DMatrix<T> {
        let mut j = DMatrix::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(gp.a());
        for i in 0..n {
            if act[i] {
                j[(i, i)] -= p * m[i];
            }
            j[(i, i)] -= t * m[i];
            j[(i, n)] = -m[i] * u[i];
            j[(n, i)] = m[i] * u[i];
        }
        j
    };
    // Residual with the positive part replaced by the frozen active set.
    let frozen_residual = |u: &DVector<T>, t: T, act: &[bool]| -> Residual<T> {
        let mut f1 = gp.a() * u;
        for i in 0..n {
            let up = if act[i] { u[i] } else { T::zero() };
            f1[i] -= m[i] * (p * up + t * u[i]);
        }
        let mut umu = T::zero();
        for i in 0..n {
            umu += m[i] * u[i] * u[i];
        }
        let f2 = (umu - T::one()) * lit::<T>(0.5);
        let norm = gp.dual_norm(&f1) + f2.abs();
        Residual { f1, f2, norm }
    };

    let mut u = seed.clone();
    let mut t = t_seed;
    let mut history = Vec::new();
    let mut prev_active: Option<Vec<bool>> = None;

    for _ in 0..max_iter {
        let res = residual(gp, p, &u, t);
        history.push(res.norm);
        if res.norm <= tol {
            let alpha = p + t;
            return Ok(FucikPoint {
                alpha,
                beta: t,
                p,
                t,
                u,
                residual: gp.dual_norm(&res.f1),
                residual_history: history,
                method: MethodTag::Continuation,
            });
        }

        let act_now = active(&u);
        // Either the natural active set or, on a retry, the frozen one.
        let mut accepted = false;
        for (attempt, act) in [Some(&act_now), prev_active.as_ref()]
            .into_iter()
            .flatten()
            .enumerate()
        {
            let fr = if attempt == 0 {
                Residual {
                    f1: res.f1.clone(),
                    f2: res.f2,
                    norm: res.norm,
                }
            } else {
                frozen_residual(&u, t, act)
            };
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                rhs[i] = -fr.f1[i];
            }
            rhs[n] = -fr.f2;
            let j = jacobian(&u, t, act);
            let Some(delta) = j.lu().solve(&rhs) else {
                continue;
            };
            let mut lam = T::one();
            for _ in 0..12 {
                let u_try = DVector::from_fn(n, |i, _| u[i] + lam * delta[i]);
                let t_try = t + lam * delta[n];
                let r_try = residual(gp, p, &u_try, t_try);
                if r_try.norm < res.norm * (T::one() - lit::<T>(1e-4) * lam)
                    || r_try.norm <= tol
                {
                    u = u_try;
                    t = t_try;
                    accepted = true;
                    break;
                }
                lam *= lit::<T>(0.5);
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::NewtonNonConvergence {
                max_iter,
                residual: res.norm.to_f64().unwrap_or(f64::NAN),
            });
        }
        prev_active = Some(act_now);
    }
    let last = history.last().copied().unwrap_or_else(T::zero);
    Err(Error::NewtonNonConvergence {
        max_iter,
        residual: last.to_f64().unwrap_or(f64::NAN),
    })
}

/// A traced Fučík curve: the branch parameterized by `p >= 0` together with
/// its mirror image across the diagonal.
#[derive(Debug, Clone)]
pub struct Curve<T> {
    /// Main branch `(p + c(p), c(p))`, ordered by increasing `p`.
    pub points: Vec<FucikPoint<T>>,
    /// Mirror branch `(c(p), p + c(p))` with `u` negated.
    pub mirror: Vec<FucikPoint<T>>,
    pub lambda1: T,
    pub lambda2: T,
    /// Set when the march stopped before `p_max` despite step halving.
    pub truncated: bool,
}

fn mirror_point<T: Real>(gp: &GalerkinPair<T>, pt: &FucikPoint<T>) -> FucikPoint<T> {
    let u = -&pt.u;
    // Residual of the reflected system equals the original by the exact
    // symmetry (u⁺, u⁻) -> (u⁻, u⁺); recompute for the record.
    // Reflected system: A u - alpha' M u⁺ + beta' M u⁻ with alpha' = beta,
    // beta' = alpha.
    let m = gp.m_lumped();
    let up = positive_part(&u);
    let mut f1 = gp.a() * &u;
    for i in 0..u.len() {
        let un = up[i] - u[i];
        f1[i] -= m[i] * (pt.beta * up[i] - pt.alpha * un);
    }
    FucikPoint {
        alpha: pt.beta,
        beta: pt.alpha,
        p: -pt.p,
        t: pt.alpha,
        u,
        residual: gp.dual_norm(&f1),
        residual_history: pt.residual_history.clone(),
        method: pt.method,
    }
}

/// Trace the first nontrivial curve from `p = 0` (where it crosses the
/// diagonal at `(lambda_2, lambda_2)`) up to `p = p_max` in steps of `dp`,
/// with secant prediction and up to 6 step halvings on corrector failure.
pub fn trace_curve<T: Real>(
    gp: &GalerkinPair<T>,
    p_max: T,
    dp: T,
    tol: T,
) -> Result<Curve<T>> {
    if !(p_max > T::zero()) || !(dp > T::zero()) {
        return Err(Error::Precondition("need p_max > 0 and dp > 0".into()));
    }
    let eig = lowest_eigenpairs(gp, 2, lit::<T>(1e-8))?;
    let (lambda1, lambda2) = (eig[0].value, eig[1].value);
    let phi2 = eig[1].vector.clone();

    let first = semismooth_newton(gp, T::zero(), &phi2, lambda2, tol, 60)?;
    let mut points = vec![first];
    let mut truncated = false;

    let dp_min = dp / lit::<T>(64.0);
    let mut step = dp;
    'march: while {
        let p_here = points.last().unwrap().p;
        p_here < p_max - lit::<T>(1e-12)
    } {
        let p_here = points.last().unwrap().p;
        let mut local = step.min(p_max - p_here);
        loop {
            let target = p_here + local;
            let (seed, t_seed) = predict(&points, target);
            match semismooth_newton(gp, target, &seed, t_seed, tol, 60) {
                Ok(pt) => {
                    points.push(pt);
                    // Recover the nominal step after a successful stretch.
                    step = (step * lit::<T>(2.0)).min(dp);
                    break;
                }
                Err(_) => {
                    local *= lit::<T>(0.5);
                    step = local;
                    if local < dp_min {
                        log::warn!(
                            "curve tracing stalled at p = {:.6}; truncating",
                            p_here.to_f64().unwrap_or(f64::NAN)
                        );
                        truncated = true;
                        break 'march;
                    }
                }
            }
        }
    }

    let mirror = points.iter().map(|pt| mirror_point(gp, pt)).collect();
    Ok(Curve {
        points,
        mirror,
        lambda1,
        lambda2,
        truncated,
    })
}

/// Secant predictor in `p` from the last two accepted points.
fn predict<T: Real>(points: &[FucikPoint<T>], target: T) -> (DVector<T>, T) {
    let last = points.last().unwrap();
    if points.len() < 2 {
        return (last.u.clone(), last.t);
    }
    let prev = &points[points.len() - 2];
    let dp_old = last.p - prev.p;
    if !(dp_old > T::zero()) {
        return (last.u.clone(), last.t);
    }
    let theta = (target - last.p) / dp_old;
    let u = &last.u + (&last.u - &prev.u) * theta;
    let t = last.t + (last.t - prev.t) * theta;
    (u, t)
}

/// One validated curve property with its worst witness.
#[derive(Debug, Clone)]
pub struct PropertyCheck<T> {
    pub pass: bool,
    /// Signed margin of the worst case (positive = satisfied).
    pub worst: T,
    pub detail: String,
}

/// Structural properties of the traced branch.
#[derive(Debug, Clone)]
pub struct CurveReport<T> {
    /// `|c(p) - c(q)| <= |p - q| + 1e-10` over all sample pairs.
    pub lipschitz: PropertyCheck<T>,
    /// `beta` strictly decreasing and `alpha` strictly increasing in `p`.
    pub strict_monotone: PropertyCheck<T>,
    /// `c(p) > lambda_1` at every sample.
    pub above_lambda1: PropertyCheck<T>,
    /// The gap `c(p) - lambda_1` decreases monotonically along the branch.
    pub approach_lambda1: PropertyCheck<T>,
}

impl<T> CurveReport<T> {
    pub fn all_pass(&self) -> bool {
        self.lipschitz.pass
            && self.strict_monotone.pass
            && self.above_lambda1.pass
            && self.approach_lambda1.pass
    }
}

/// Check the traced branch against the structural properties of the curve.
/// Requires at least 3 samples.
pub fn validate_curve<T: Real>(curve: &Curve<T>) -> Result<CurveReport<T>> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::Precondition(
            "curve validation needs at least 3 samples".into(),
        ));
    }
    let slack = lit::<T>(1e-10);

    let mut lip_worst = T::max_value().unwrap();
    let mut lip_detail = String::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let margin = (pts[j].p - pts[i].p).abs() + slack - (pts[j].beta - pts[i].beta).abs();
            if margin < lip_worst {
                lip_worst = margin;
                lip_detail = format!(
                    "worst pair p = ({:.4}, {:.4})",
                    pts[i].p.to_f64().unwrap_or(f64::NAN),
                    pts[j].p.to_f64().unwrap_or(f64::NAN)
                );
            }
        }
    }

    let mut mono_worst = T::max_value().unwrap();
    let mut mono_detail = String::new();
    for w in pts.windows(2) {
        let db = w[0].beta - w[1].beta;
        let da = w[1].alpha - w[0].alpha;
        let margin = db.min(da);
        if margin < mono_worst {
            mono_worst = margin;
            mono_detail = format!(
                "worst step p = {:.4} -> {:.4}",
                w[0].p.to_f64().unwrap_or(f64::NAN),
                w[1].p.to_f64().unwrap_or(f64::NAN)
            );
        }
    }

    let mut above_worst = T::max_value().unwrap();
    let mut above_detail = String::new();
    for pt in pts {
        let margin = pt.beta - curve.lambda1;
        if margin < above_worst {
            above_worst = margin;
            above_detail = format!("worst at p = {:.4}", pt.p.to_f64().unwrap_or(f64::NAN));
        }
    }

    let gaps: Vec<T> = pts.iter().map(|pt| pt.beta - curve.lambda1).collect();
    let mut appr_worst = T::max_value().unwrap();
    for w in gaps.windows(2) {
        appr_worst = appr_worst.min(w[0] - w[1]);
    }
    let appr_detail = format!(
        "gap to lambda_1 shrinks from {:.6} to {:.6}",
        gaps.first().unwrap().to_f64().unwrap_or(f64::NAN),
        gaps.last().unwrap().to_f64().unwrap_or(f64::NAN)
    );

    Ok(CurveReport {
        lipschitz: PropertyCheck {
            pass: lip_worst >= T::zero(),
            worst: lip_worst,
            detail: lip_detail,
        },
        strict_monotone: PropertyCheck {
            pass: mono_worst > T::zero(),
            worst: mono_worst,
            detail: mono_detail,
        },
        above_lambda1: PropertyCheck {
            pass: above_worst > T::zero(),
            worst: above_worst,
            detail: above_detail,
        },
        approach_lambda1: PropertyCheck {
            pass: appr_worst > T::zero(),
            worst: appr_worst,
            detail: appr_detail,
        },
    })
}

/// Residuals along the trivial lines of the spectrum: the vertical line
/// `(lambda_1, beta)` carried by `phi_1` and the horizontal line
/// `(alpha, lambda_1)` carried by `-phi_1`.
#[derive(Debug, Clone)]
pub struct TrivialLinesReport<T> {
    /// Relative residual of the eigenpair itself (the comparison yardstick).
    pub eigen_residual: T,
    /// `(value, vertical-line residual, horizontal-line residual)`, both
    /// relative to `|A phi_1|` like the eigen residual.
    pub entries: Vec<(T, T, T)>,
}

impl<T: Real> TrivialLinesReport<T> {
    /// True when every line residual is bounded by the eigen residual
    /// (up to one ulp-level factor).
    pub fn all_within(&self) -> bool {
        let bound = self.eigen_residual * (T::one() + lit::<T>(1e-12)) + T::eps();
        self.entries
            .iter()
            .all(|&(_, rv, rh)| rv <= bound && rh <= bound)
    }
}

/// Evaluate the Fučík residual of `phi_1` on the vertical trivial line and
/// of `-phi_1` on the horizontal one, for each of the given `beta` (resp.
/// `alpha`) values.
pub fn trivial_lines_check<T: Real>(
    gp: &GalerkinPair<T>,
    values: &[T],
) -> Result<TrivialLinesReport<T>> {
    let eig = lowest_eigenpairs(gp, 1, lit::<T>(1e-8))?;
    let EigenPair {
        value: lambda1,
        vector: phi1,
        residual,
        ..
    } = eig.into_iter().next().unwrap();
    let m = gp.m_lumped();
    let scale = gp.dual_norm(&(gp.a() * &phi1));

    let fucik_residual = |alpha: T, beta: T, u: &DVector<T>| -> T {
        let mut f = gp.a() * u;
        for i in 0..u.len() {
            let up = u[i].max(T::zero());
            let un = (-u[i]).max(T::zero());
            f[i] -= m[i] * (alpha * up - beta * un);
        }
        gp.dual_norm(&f) / scale
    };

    let neg_phi1 = -&phi1;
    let entries = values
        .iter()
        .map(|&v| {
            let rv = fucik_residual(lambda1, v, &phi1);
            let rh = fucik_residual(v, lambda1, &neg_phi1);
            (v, rv, rh)
        })
        .collect();
    Ok(TrivialLinesReport {
        eigen_residual: residual,
        entries,
    })
}
