//! Lowest eigenpairs of the discrete operator and spectral experiments.
//!
//! The generalized problem `A u = lambda M u` is solved densely: the mass
//! form is factored (trivially for the lumped diagonal, by Cholesky for the
//! consistent matrix), the problem is reduced to a standard symmetric one
//! and solved by direct tridiagonalization. All spectra quoted elsewhere in
//! the crate refer to the lumped mass form, which is also what the sphere
//! constraint and the positive-part terms use; that keeps eigenvalues,
//! minimax levels and continuation multipliers directly comparable.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble, GalerkinPair};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Mesh};
use crate::kernel::Kernel;
use crate::real::{lit, Real};

/// Which discrete mass form closes the eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassForm {
    /// Row-sum lumped diagonal (the default everywhere).
    Lumped,
    /// Consistent P1 mass matrix.
    Consistent,
}

/// One converged eigenpair, mass-normalized and sign-normalized.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    /// Eigenvalue (ascending `index` = 1 is the principal one).
    pub value: T,
    /// Coefficient vector with `u^T M u = 1`, largest-magnitude entry
    /// positive.
    pub vector: DVector<T>,
    /// 1-based ordinal.
    pub index: usize,
    /// Relative residual `|Au - lambda Mu| / |Au|` in the dual norm.
    pub residual: T,
}

/// Symmetric eigendecomposition driven to near machine precision. The
/// default stopping threshold of the iteration leaves the lowest
/// eigenvectors of our stiff problems visibly mixed, so ask for a much
/// tighter one and fall back to the default only if that fails to converge.
fn sym_eig<T: Real>(c: DMatrix<T>) -> nalgebra::SymmetricEigen<T, nalgebra::Dyn> {
    let tight = T::eps() * lit::<T>(1e-9);
    match c.clone().try_symmetric_eigen(tight, 200_000) {
        Some(eig) => eig,
        None => c.symmetric_eigen(),
    }
}

/// Shifted inverse iteration polishing one eigenpair of the symmetric `c`.
/// Removes the residual cross-contamination the iterative decomposition can
/// leave between well-separated eigenvectors.
fn refine_pair<T: Real>(c: &DMatrix<T>, lambda: &mut T, v: &mut DVector<T>) {
    let n = c.nrows();
    let scale = {
        let mut m = T::zero();
        for i in 0..n {
            m = m.max(c[(i, i)].abs());
        }
        m.max(lambda.abs()).max(T::one())
    };
    let res = |lam: T, vec: &DVector<T>| (c * vec - vec * lam).norm();
    let mut best = res(*lambda, v);
    for attempt in 0..4usize {
        if best <= scale * T::eps() * lit::<T>(20.0) {
            break;
        }
        // A slightly off-eigenvalue shift keeps the factorization regular
        // while still amplifying the wanted direction enormously.
        let shift = *lambda * (T::one() + lit::<T>(1e-11) * lit::<T>((attempt + 1) as f64))
            + scale * T::eps() * lit::<T>((attempt * attempt) as f64);
        let mut shifted = c.clone();
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let Some(x) = shifted.lu().solve(&*v) else {
            continue;
        };
        let norm = x.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            continue;
        }
        let cand = x / norm;
        let lam_cand = (cand.transpose() * c * &cand)[(0, 0)];
        let r = res(lam_cand, &cand);
        if r < best {
            best = r;
            *lambda = lam_cand;
            *v = cand;
        } else {
            break;
        }
    }
}

fn sign_normalize<T: Real>(v: &mut DVector<T>) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        for i in 0..v.len() {
            v[i] = -v[i];
        }
    }
}

fn solve_reduced<T: Real>(
    gp: &GalerkinPair<T>,
    mass: MassForm,
    refine: usize,
) -> Result<Vec<(T, DVector<T>)>> {
    let n = gp.n_dofs();
    // Reduce to a standard symmetric problem C v = lambda v.
    type BackMap<T> = Box<dyn Fn(DVector<T>) -> DVector<T>>;
    let (c, back): (DMatrix<T>, BackMap<T>) = match mass {
        MassForm::Lumped => {
            let d_inv_sqrt: DVector<T> =
                DVector::from_fn(n, |i, _| T::one() / gp.m_lumped()[i].sqrt());
            let mut c = gp.a().clone();
            for i in 0..n {
                for j in 0..n {
                    c[(i, j)] *= d_inv_sqrt[i] * d_inv_sqrt[j];
                }
            }
            let d = d_inv_sqrt.clone();
            (c, Box::new(move |v: DVector<T>| v.component_mul(&d)))
        }
        MassForm::Consistent => {
            let chol = gp
                .m()
                .clone()
                .cholesky()
                .ok_or_else(|| Error::EigenSolve("mass matrix not positive definite".into()))?;
            let l = chol.l();
            let tmp = l
                .solve_lower_triangular(gp.a())
                .ok_or_else(|| Error::EigenSolve("singular Cholesky factor".into()))?;
            let c = l
                .solve_lower_triangular(&tmp.transpose())
                .ok_or_else(|| Error::EigenSolve("singular Cholesky factor".into()))?;
            // Symmetrize against roundoff from the two triangular solves.
            let c = (c.transpose() + &c) * lit::<T>(0.5);
            let lt = l.transpose();
            (
                c,
                Box::new(move |v: DVector<T>| {
                    lt.solve_upper_triangular(&v)
                        .expect("triangular back-substitution")
                }),
            )
        }
    };
    let eig = sym_eig(c.clone());
    let mut raw: Vec<(T, DVector<T>)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into()))
        .collect();
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (lam, v) in raw.iter_mut().take(refine) {
        refine_pair(&c, lam, v);
    }
    Ok(raw.into_iter().map(|(lam, v)| (lam, back(v))).collect())
}

/// The `k` lowest eigenpairs of `A u = lambda M u` with the chosen mass form.
pub fn lowest_eigenpairs_with<T: Real>(
    gp: &GalerkinPair<T>,
    k: usize,
    tol: T,
    mass: MassForm,
) -> Result<Vec<EigenPair<T>>> {
    if k < 1 {
        return Err(Error::Precondition("need k >= 1 eigenpairs".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let n = gp.n_dofs();
    if k > n {
        return Err(Error::Precondition(format!(
            "asked for {k} eigenpairs of an {n}-dof problem"
        )));
    }
    let pairs = solve_reduced(gp, mass, k.max(2).min(n))?;

    // Simplicity of the principal eigenvalue is a structural guarantee;
    // a numerically multiple lambda_1 means the discretization is broken.
    if n >= 2 {
        let gap = pairs[1].0 - pairs[0].0;
        if gap < lit::<T>(1e-10) * pairs[0].0 {
            return Err(Error::MultiplePrincipal {
                gap: (gap / pairs[0].0).to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let mass_mul = |u: &DVector<T>| -> DVector<T> {
        match mass {
            MassForm::Lumped => u.component_mul(gp.m_lumped()),
            MassForm::Consistent => gp.m() * u,
        }
    };

    let mut out = Vec::with_capacity(k);
    for (idx, (value, mut vector)) in pairs.into_iter().take(k).enumerate() {
        sign_normalize(&mut vector);
        let au = gp.a() * &vector;
        let mu = mass_mul(&vector);
        let res = gp.dual_norm(&(&au - &mu * value)) / gp.dual_norm(&au);
        if res > tol {
            return Err(Error::EigenSolve(format!(
                "eigenpair {} residual {:e} exceeds tolerance {:e}",
                idx + 1,
                res.to_f64().unwrap_or(f64::NAN),
                tol.to_f64().unwrap_or(f64::NAN)
            )));
        }
        out.push(EigenPair {
            value,
            vector,
            index: idx + 1,
            residual: res,
        });
    }
    Ok(out)
}

/// The `k` lowest eigenpairs with the lumped mass form.
pub fn lowest_eigenpairs<T: Real>(
    gp: &GalerkinPair<T>,
    k: usize,
    tol: T,
) -> Result<Vec<EigenPair<T>>> {
    lowest_eigenpairs_with(gp, k, tol, MassForm::Lumped)
}

/// Weighted principal value `min_v v^T A v / v^T M_w v` where `M_w` is the
/// lumped mass scaled nodally by the strictly positive weight `w`.
/// Reduces to `lambda_1` for `w = 1`.
pub fn weighted_principal<T: Real>(gp: &GalerkinPair<T>, w: &DVector<T>) -> Result<T> {
    if w.len() != gp.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: gp.n_dofs(),
            got: w.len(),
        });
    }
    for i in 0..w.len() {
        if !(w[i] > T::zero()) {
            return Err(Error::NonpositiveWeight { index: i });
        }
    }
    let n = gp.n_dofs();
    let d_inv_sqrt: DVector<T> =
        DVector::from_fn(n, |i, _| T::one() / (gp.m_lumped()[i] * w[i]).sqrt());
    let mut c = gp.a().clone();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= d_inv_sqrt[i] * d_inv_sqrt[j];
        }
    }
    let eig = sym_eig(c.clone());
    let mut arg = 0usize;
    for i in 1..n {
        if eig.eigenvalues[i] < eig.eigenvalues[arg] {
            arg = i;
        }
    }
    let mut lam = eig.eigenvalues[arg];
    let mut v: DVector<T> = eig.eigenvectors.column(arg).into();
    refine_pair(&c, &mut lam, &mut v);
    Ok(lam)
}

/// Principal eigenvalues of two nested domains under the same kernel, each
/// with the exterior condition on its own complement. Requires strict
/// containment `A ⊊ B` and a connected `B`.
pub fn domain_monotonicity<T: Real>(
    kernel: &Kernel<T>,
    a_dom: &Domain<T>,
    b_dom: &Domain<T>,
    n: usize,
) -> Result<(T, T)> {
    if !b_dom.connected() {
        return Err(Error::Containment("outer domain must be connected".into()));
    }
    let slack = lit::<T>(1e-10) * b_dom.measure();
    if !a_dom.strictly_inside(b_dom, slack) {
        return Err(Error::Containment(
            "inner domain must be strictly contained in the outer one".into(),
        ));
    }
    let tol = lit::<T>(1e-8);
    let lam = |dom: &Domain<T>| -> Result<T> {
        let mesh = Mesh::uniform(dom.clone(), n)?;
        let gp = assemble(&mesh, kernel)?;
        Ok(lowest_eigenpairs(&gp, 1, tol)?[0].value)
    };
    Ok((lam(a_dom)?, lam(b_dom)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelVariant;

    fn setup(n: usize, s: f64) -> GalerkinPair<f64> {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let mesh = Mesh::uniform(domain, n).unwrap();
        let kernel = Kernel::new(s, 1.0, KernelVariant::Fractional).unwrap();
        assemble(&mesh, &kernel).unwrap()
    }

    #[test]
    fn principal_pair_is_positive_and_simple() {
        let gp = setup(64, 0.25);
        let pairs = lowest_eigenpairs(&gp, 3, 1e-10).unwrap();
        assert!(pairs[0].value > 0.0);
        assert!(pairs[1].value > pairs[0].value);
        for v in pairs[0].vector.iter() {
            assert!(*v > 0.0, "principal eigenvector must be one-signed");
        }
        // Second eigenfunction changes sign.
        let has_pos = pairs[1].vector.iter().any(|&v| v > 0.0);
        let has_neg = pairs[1].vector.iter().any(|&v| v < 0.0);
        assert!(has_pos && has_neg);
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal() {
        let gp = setup(48, 0.25);
        let pairs = lowest_eigenpairs(&gp, 4, 1e-10).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut dot = 0.0;
                for k in 0..gp.n_dofs() {
                    dot += pairs[i].vector[k] * gp.m_lumped()[k] * pairs[j].vector[k];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "({i},{j}): {dot}");
            }
        }
    }

    #[test]
    fn rayleigh_quotient_bounded_below_by_lambda1() {
        let gp = setup(32, 0.25);
        let l1 = lowest_eigenpairs(&gp, 1, 1e-10).unwrap()[0].value;
        for seed in 0..50u64 {
            let u = DVector::from_fn(gp.n_dofs(), |i, _| {
                let x = ((i as u64 + 1) * (seed + 3)) % 101;
                x as f64 / 50.0 - 1.0
            });
            let num = gp.energy(&u).unwrap();
            let den: f64 = (0..gp.n_dofs())
                .map(|i| gp.m_lumped()[i] * u[i] * u[i])
                .sum();
            if den > 0.0 {
                assert!(num / den >= l1 * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn weighted_principal_reduces_and_scales() {
        let gp = setup(32, 0.25);
        let l1 = lowest_eigenpairs(&gp, 1, 1e-10).unwrap()[0].value;
        let ones = DVector::from_element(gp.n_dofs(), 1.0);
        let w1 = weighted_principal(&gp, &ones).unwrap();
        assert!((w1 - l1).abs() < 1e-11 * l1);
        let threes = DVector::from_element(gp.n_dofs(), 3.0);
        let w3 = weighted_principal(&gp, &threes).unwrap();
        assert!((w3 - l1 / 3.0).abs() < 1e-11 * l1);
        let mut mixed = ones.clone();
        for i in 0..gp.n_dofs() / 2 {
            mixed[i] = 2.0;
        }
        let wm = weighted_principal(&gp, &mixed).unwrap();
        assert!(wm > l1 / 2.0 && wm < l1);
        let mut bad = ones;
        bad[0] = 0.0;
        assert!(weighted_principal(&gp, &bad).is_err());
    }

    #[test]
    fn consistent_and_lumped_masses_agree_to_discretization_order() {
        let gp = setup(64, 0.25);
        let l = lowest_eigenpairs_with(&gp, 1, 1e-10, MassForm::Lumped).unwrap()[0].value;
        let c = lowest_eigenpairs_with(&gp, 1, 1e-10, MassForm::Consistent).unwrap()[0].value;
        assert!((l - c).abs() / c < 5e-3, "lumped {l} vs consistent {c}");
    }

    #[test]
    fn domain_monotonicity_requires_strict_containment() {
        let kernel = Kernel::new(0.25, 1.0, KernelVariant::Fractional).unwrap();
        let d = Domain::interval(-1.0, 1.0).unwrap();
        assert!(matches!(
            domain_monotonicity(&kernel, &d, &d.clone(), 32),
            Err(Error::Containment(_))
        ));
    }

    #[test]
    fn smaller_domain_has_larger_principal_eigenvalue() {
        let kernel = Kernel::new(0.25, 1.0, KernelVariant::Fractional).unwrap();
        let a = Domain::interval(-0.5, 0.5).unwrap();
        let b = Domain::interval(-1.0, 1.0).unwrap();
        let (la, lb) = domain_monotonicity(&kernel, &a, &b, 64).unwrap();
        assert!(la > lb);
    }
}
