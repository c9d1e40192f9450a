//! Monotone path-deformation engine shared by the constrained minimax and
//! the unconstrained mountain-pass solvers.
//!
//! A discrete path (fixed endpoints, free interior points) is deformed by
//! backtracking descent steps applied point-wise. Two invariants are
//! maintained together:
//!
//! * the path level — the maximum of the functional along the path — never
//!   increases (descent steps are accepted only on sufficient decrease, and
//!   re-parameterizations are reverted if they would raise the level), and
//! * consecutive points stay within a chord bound `delta` of each other, so
//!   the discrete path cannot slip through the mountain ridge between two
//!   samples and collapse below the minimax level.

use nalgebra::DVector;

use crate::real::{lit, Real};

/// The geometry a path lives in: functional, gradient, a preconditioned
/// descent direction, a retraction onto the admissible set and the metric
/// used for the chord bound. Implemented by the sphere-constrained Fučík
/// functional and by the free energy functional.
pub(crate) trait DeformSpace<T: Real> {
    fn value(&self, u: &DVector<T>) -> T;
    fn gradient(&self, u: &DVector<T>) -> DVector<T>;
    /// Descent direction `d` with `g^T d >= 0`; a step is `u - eta d`.
    fn direction(&self, u: &DVector<T>, g: &DVector<T>) -> DVector<T>;
    /// Map a candidate back to the admissible set (identity if free).
    fn retract(&self, u: DVector<T>) -> Option<DVector<T>>;
    /// Squared distance in the deformation metric.
    fn dist2(&self, a: &DVector<T>, b: &DVector<T>) -> T;
    /// First-order criticality measure (dual norm of the projected
    /// gradient); drives the stopping rule at the path argmax.
    fn criticality(&self, u: &DVector<T>) -> T;
    /// Optional fast local solve used to polish the argmax once its
    /// criticality is small; returns a nearby critical point, or `None`
    /// when not applicable.
    fn accelerate(&self, _u: &DVector<T>) -> Option<DVector<T>> {
        None
    }
}

pub(crate) struct DeformOptions<T> {
    /// Hard cap on sweeps.
    pub max_sweeps: usize,
    /// Initial backtracking step.
    pub step0: T,
    /// Relative plateau tolerance on the level.
    pub level_tol: T,
    /// Criticality tolerance at the argmax.
    pub crit_tol: T,
    /// Points with value above `level - window_frac * range` are deformed
    /// every sweep; the rest only every `lazy_every` sweeps.
    pub window_frac: T,
    pub lazy_every: usize,
}

impl<T: Real> DeformOptions<T> {
    pub fn new(step0: T) -> Self {
        DeformOptions {
            max_sweeps: 4000,
            step0,
            level_tol: lit(1e-10),
            crit_tol: lit(1e-6),
            window_frac: lit(0.1),
            lazy_every: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DeformOutcome<T> {
    pub level: T,
    pub argmax: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// Set when the level plateaued but the argmax criticality never came
    /// under tolerance.
    pub stalled: bool,
    /// `(sweep, level, argmax criticality)` per sweep.
    pub history: Vec<(usize, T, T)>,
}

fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// One backtracking descent step on point `i`, respecting the chord bound
/// to its current neighbors. Returns the new value, or `None` if no
/// acceptable step was found.
fn descend_point<T: Real, S: DeformSpace<T>>(
    space: &S,
    points: &mut [DVector<T>],
    i: usize,
    value: T,
    step0: T,
    max_gap2: T,
) -> Option<T> {
    let g = space.gradient(&points[i]);
    let d = space.direction(&points[i], &g);
    let slope = g.dot(&d);
    if !(slope > T::zero()) {
        return None;
    }
    let armijo = lit::<T>(1e-4);
    let mut eta = step0;
    for _ in 0..40 {
        if let Some(cand) = space.retract(&points[i] - &d * eta) {
            let chord_ok = space.dist2(&points[i - 1], &cand) <= max_gap2
                && space.dist2(&cand, &points[i + 1]) <= max_gap2;
            if chord_ok {
                let v = space.value(&cand);
                if v <= value - armijo * eta * slope {
                    points[i] = cand;
                    return Some(v);
                }
            }
        }
        eta *= lit::<T>(0.5);
    }
    None
}

/// Re-parameterize `points[lo..=hi]` (keeping both ends fixed) to
/// approximately uniform arclength, writing into `out[lo..=hi]`. Returns
/// `false` when the retraction fails or the segment has zero length.
fn resample_segment<T: Real, S: DeformSpace<T>>(
    space: &S,
    points: &[DVector<T>],
    lo: usize,
    hi: usize,
    out: &mut [DVector<T>],
) -> bool {
    let m = hi - lo;
    if m < 2 {
        return true;
    }
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(T::zero());
    for k in lo + 1..=hi {
        let d = space.dist2(&points[k - 1], &points[k]).sqrt();
        let last = *cum.last().unwrap();
        cum.push(last + d);
    }
    let total = *cum.last().unwrap();
    if !(total > T::zero()) {
        return false;
    }
    let mut seg = 0usize;
    for k in 1..m {
        let target = total * lit::<T>(k as f64) / lit::<T>(m as f64);
        while seg + 2 <= m && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let theta = if len > T::zero() {
            (target - cum[seg]) / len
        } else {
            T::zero()
        };
        let blended = &points[lo + seg] * (T::one() - theta) + &points[lo + seg + 1] * theta;
        match space.retract(blended) {
            Some(p) => out[lo + k] = p,
            None => return false,
        }
    }
    true
}

/// Re-parameterize toward uniform arclength when spacing has become
/// unbalanced, keeping the endpoints and the optional pinned interior point
/// fixed. Returns `None` when spacing is fine or the retraction fails.
fn resample<T: Real, S: DeformSpace<T>>(
    space: &S,
    points: &[DVector<T>],
    pinned: Option<usize>,
) -> Option<Vec<DVector<T>>> {
    let n = points.len();
    let mut total = T::zero();
    let mut max_d = T::zero();
    for k in 1..n {
        let d = space.dist2(&points[k - 1], &points[k]).sqrt();
        max_d = max_d.max(d);
        total += d;
    }
    let mean = total / lit::<T>((n - 1) as f64);
    if !(total > T::zero()) || max_d <= mean * lit::<T>(1.8) {
        return None;
    }
    let mut out = points.to_vec();
    let ok = match pinned {
        Some(pin) if pin > 0 && pin + 1 < n => {
            resample_segment(space, points, 0, pin, &mut out)
                && resample_segment(space, points, pin, n - 1, &mut out)
        }
        _ => resample_segment(space, points, 0, n - 1, &mut out),
    };
    if ok {
        Some(out)
    } else {
        None
    }
}

/// Deform `points` in place until the level plateaus and the argmax is
/// critical, the sweep budget runs out, or progress stalls. Endpoints are
/// never moved. The reported level is non-increasing across sweeps.
pub(crate) fn deform<T: Real, S: DeformSpace<T>>(
    space: &S,
    points: &mut Vec<DVector<T>>,
    opts: &DeformOptions<T>,
) -> DeformOutcome<T> {
    let n = points.len();
    assert!(n >= 3, "path needs at least one interior point");
    let mut values: Vec<T> = points.iter().map(|u| space.value(u)).collect();
    // Chord budget: a fixed multiple of the initial spacing.
    let max_gap2 = {
        let mut g = T::zero();
        for k in 1..n {
            g = g.max(space.dist2(&points[k - 1], &points[k]));
        }
        g * lit::<T>(2.25)
    };

    let mut history = Vec::new();
    let mut level = values[argmax(&values)];
    let mut plateau = 0usize;
    let mut converged = false;
    let mut stalled = false;
    let mut sweeps = 0usize;
    // Index of a path point snapped onto the exact saddle by `accelerate`.
    // It is excluded from descent and kept fixed by re-parameterization so
    // the level stays pinned at the saddle value from above.
    let mut pinned: Option<usize> = None;
    let mut accel_backoff = 0usize;

    for sweep in 0..opts.max_sweeps {
        sweeps = sweep + 1;
        let top = argmax(&values);
        let bottom = values.iter().fold(values[0], |a, &b| a.min(b));
        let threshold = values[top] - opts.window_frac * (values[top] - bottom);
        let lazy_turn = sweep % opts.lazy_every == 0;
        for i in 1..n - 1 {
            if pinned == Some(i) {
                continue;
            }
            if values[i] >= threshold || lazy_turn {
                if let Some(v) = descend_point(space, points, i, values[i], opts.step0, max_gap2) {
                    values[i] = v;
                }
            }
        }

        // Let the fast local solver snap the argmax onto the exact saddle.
        // Accepting only non-increasing values keeps the level monotone:
        // while the level is still above the saddle the exchange succeeds,
        // and from then on the saddle itself carries the level.
        let top = argmax(&values);
        if top > 0 && top + 1 < n && pinned != Some(top) {
            if accel_backoff > 0 {
                accel_backoff -= 1;
            } else {
                match space.accelerate(&points[top]) {
                    Some(cand) => {
                        let v = space.value(&cand);
                        let chord_ok = space.dist2(&points[top - 1], &cand)
                            <= max_gap2 * lit::<T>(4.0)
                            && space.dist2(&cand, &points[top + 1]) <= max_gap2 * lit::<T>(4.0);
                        if v <= values[top] && chord_ok {
                            points[top] = cand;
                            values[top] = v;
                            pinned = Some(top);
                        } else {
                            accel_backoff = 3;
                        }
                    }
                    None => accel_backoff = 3,
                }
            }
        }

        // Redistribute bunched points, but never let it raise the level.
        if let Some(mut cand) = resample(space, points, pinned) {
            let mut cand_values: Vec<T> = cand.iter().map(|u| space.value(u)).collect();
            let current_level = values[argmax(&values)];
            for i in 1..n - 1 {
                if pinned == Some(i) {
                    continue;
                }
                let mut tries = 0;
                while cand_values[i] > current_level && tries < 10 {
                    match descend_point(space, &mut cand, i, cand_values[i], opts.step0, max_gap2)
                    {
                        Some(v) => cand_values[i] = v,
                        None => break,
                    }
                    tries += 1;
                }
            }
            if cand_values[argmax(&cand_values)] <= current_level {
                *points = cand;
                values = cand_values;
            }
        }

        let top = argmax(&values);
        let new_level = values[top];
        let crit = space.criticality(&points[top]);
        history.push((sweep, new_level, crit));

        if level - new_level < opts.level_tol * T::one().max(new_level.abs()) {
            plateau += 1;
        } else {
            plateau = 0;
        }
        level = new_level;

        if plateau >= 5 && crit < opts.crit_tol {
            converged = true;
            break;
        }
        if plateau >= 60 {
            stalled = true;
            break;
        }
    }

    let top = argmax(&values);
    if !converged && !stalled {
        stalled = true;
    }
    DeformOutcome {
        level: values[top],
        argmax: top,
        sweeps,
        converged,
        stalled,
        history,
    }
}
