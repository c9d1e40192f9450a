//! Galerkin assembly of the nonlocal stiffness form and the mass forms.
//!
//! The stiffness entry is
//!
//! ```text
//! A_ij = int_Om int_Om (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y)) K(x-y) dx dy
//!      + 2 int_Om phi_i(x) phi_j(x) kappa(x) dx
//! ```
//!
//! where `kappa` is the exterior-tail weight. The double integral is reduced
//! per element pair to the difference coordinate `w = y - x`: for fixed `w`
//! the inner integral is a quadratic polynomial in `x` (integrated exactly by
//! two-point Gauss), and the outer integrand is piecewise polynomial in `w`
//! times `K(w)`. Pieces touching the singularity are integrated in closed
//! form against the kernel moments (the inner integral there is exactly
//! `c w^3` for touching elements and `c w^2 (h - |w|)` on the diagonal), so
//! the `|w|^{-(1+2s)}` singularity never meets a numerical rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Element, Mesh};
use crate::kernel::Kernel;
use crate::quad::GaussRule;
use crate::real::{lit, Real};

/// Gauss order for regular pieces of the `w` integral.
const NG_W: usize = 12;
/// Gauss order for graded substitutions (perturbed kernel only).
const NG_GRADED: usize = 24;

/// Assembled discrete forms: stiffness `A`, consistent mass `M` and the
/// row-sum lumped mass `M_L`, together with the mesh and kernel they came
/// from. Immutable after assembly.
#[derive(Debug, Clone)]
pub struct GalerkinPair<T> {
    a: DMatrix<T>,
    m: DMatrix<T>,
    m_lumped: DVector<T>,
    mesh: Mesh<T>,
    kernel: Kernel<T>,
}

impl<T: Real> GalerkinPair<T> {
    /// Rebuild a pair from previously assembled matrices (cache loads).
    /// Checks the structural invariants of the type: dimensions, bit-exact
    /// symmetry of `A` and `M`, positive diagonals, and mass row sums equal
    /// to the lumped diagonal.
    pub fn from_parts(
        a: DMatrix<T>,
        m: DMatrix<T>,
        m_lumped: DVector<T>,
        mesh: Mesh<T>,
        kernel: Kernel<T>,
    ) -> Result<Self> {
        let n = mesh.n_dofs();
        for (got, what) in [(a.nrows(), a.ncols()), (m.nrows(), m.ncols()), (m_lumped.len(), n)] {
            if got != n || what != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        for i in 0..n {
            if !(a[(i, i)] > T::zero()) || !(m[(i, i)] > T::zero()) || !(m_lumped[i] > T::zero()) {
                return Err(Error::Precondition(
                    "stored matrices have a nonpositive diagonal entry".into(),
                ));
            }
            let mut row_sum = T::zero();
            for j in 0..n {
                if a[(i, j)] != a[(j, i)] || m[(i, j)] != m[(j, i)] {
                    return Err(Error::Precondition(
                        "stored matrices are not bit-exactly symmetric".into(),
                    ));
                }
                row_sum += m[(i, j)];
            }
            if (row_sum - m_lumped[i]).abs() > lit::<T>(1e-12) * m_lumped[i] {
                return Err(Error::Precondition(
                    "stored mass row sums disagree with the lumped diagonal".into(),
                ));
            }
        }
        Ok(GalerkinPair {
            a,
            m,
            m_lumped,
            mesh,
            kernel,
        })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn m(&self) -> &DMatrix<T> {
        &self.m
    }

    /// Diagonal of the lumped mass form.
    pub fn m_lumped(&self) -> &DVector<T> {
        &self.m_lumped
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    fn check_dim(&self, u: &DVector<T>) -> Result<()> {
        if u.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Squared energy norm `u^T A u`.
    pub fn energy(&self, u: &DVector<T>) -> Result<T> {
        self.check_dim(u)?;
        Ok((u.transpose() * &self.a * u)[(0, 0)])
    }

    /// Interaction functional `int int a(x) b(y) K(x-y) dx dy` of the
    /// assembled form, for nodally nonnegative `a`, `b` with disjoint nodal
    /// supports. Equals `-a^T A b / 2`, which for support-disjoint functions
    /// is the literal double integral; the combination is what enters the
    /// positive/negative-part energy decomposition.
    pub fn cross_term(&self, a: &DVector<T>, b: &DVector<T>) -> Result<T> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        for i in 0..a.len() {
            if a[i] < T::zero() || b[i] < T::zero() {
                return Err(Error::Precondition(format!(
                    "cross_term arguments must be nodally nonnegative (node {i})"
                )));
            }
            if a[i] * b[i] != T::zero() {
                return Err(Error::OverlappingSupports { node: i });
            }
        }
        let v = (a.transpose() * &self.a * b)[(0, 0)];
        Ok(-v * lit::<T>(0.5))
    }

    /// Lumped-mass norm `sqrt(u^T M_L u)`.
    pub fn lumped_norm(&self, u: &DVector<T>) -> T {
        let mut acc = T::zero();
        for i in 0..u.len() {
            acc += self.m_lumped[i] * u[i] * u[i];
        }
        acc.sqrt()
    }

    /// Dual norm `sqrt(g^T M_L^{-1} g)` used for residuals and criticality.
    pub fn dual_norm(&self, g: &DVector<T>) -> T {
        let mut acc = T::zero();
        for i in 0..g.len() {
            acc += g[i] * g[i] / self.m_lumped[i];
        }
        acc.sqrt()
    }
}

/// Linear restriction of a nodal basis function to one element.
#[derive(Clone, Copy)]
struct LocalLinear<T> {
    /// Value at the element's left endpoint.
    va: T,
    /// Value at the element's right endpoint.
    vb: T,
}

impl<T: Real> LocalLinear<T> {
    fn zero() -> Self {
        LocalLinear {
            va: T::zero(),
            vb: T::zero(),
        }
    }

    fn of_dof(e: &Element<T>, dof: usize) -> Self {
        if e.left_dof == Some(dof) {
            LocalLinear {
                va: T::one(),
                vb: T::zero(),
            }
        } else if e.right_dof == Some(dof) {
            LocalLinear {
                va: T::zero(),
                vb: T::one(),
            }
        } else {
            Self::zero()
        }
    }

    #[inline]
    fn eval(&self, e: &Element<T>, x: T) -> T {
        let t = (x - e.a) / (e.b - e.a);
        self.va + (self.vb - self.va) * t
    }

    fn slope(&self, e: &Element<T>) -> T {
        (self.vb - self.va) / (e.b - e.a)
    }
}

struct PairRules<T> {
    w_rule: GaussRule<T>,
    graded: GaussRule<T>,
    /// Two-point Gauss nodes/weights on [0, 1]; exact for quadratics.
    x_nodes: [T; 2],
    x_weight: T,
}

impl<T: Real> PairRules<T> {
    fn new() -> Self {
        let d = T::one() / (lit::<T>(12.0).sqrt());
        PairRules {
            w_rule: GaussRule::new(NG_W),
            graded: GaussRule::new(NG_GRADED),
            x_nodes: [lit::<T>(0.5) - d, lit::<T>(0.5) + d],
            x_weight: lit::<T>(0.5),
        }
    }
}

/// Dofs touched by a pair of elements, with the basis restrictions to each.
struct PairBasis<T> {
    dofs: Vec<usize>,
    on_first: Vec<LocalLinear<T>>,
    on_second: Vec<LocalLinear<T>>,
}

impl<T: Real> PairBasis<T> {
    fn new(e1: &Element<T>, e2: &Element<T>) -> Self {
        let mut dofs: Vec<usize> = Vec::with_capacity(4);
        for d in [e1.left_dof, e1.right_dof, e2.left_dof, e2.right_dof]
            .into_iter()
            .flatten()
        {
            if !dofs.contains(&d) {
                dofs.push(d);
            }
        }
        let on_first = dofs.iter().map(|&d| LocalLinear::of_dof(e1, d)).collect();
        let on_second = dofs.iter().map(|&d| LocalLinear::of_dof(e2, d)).collect();
        PairBasis {
            dofs,
            on_first,
            on_second,
        }
    }

    fn len(&self) -> usize {
        self.dofs.len()
    }
}

/// Accumulate `wx * d_i * d_j` over the inner (x) rule at offset `w`,
/// where `d_i = phi_i(x) - phi_i(x + w)`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn accumulate_differences<T: Real>(
    basis: &PairBasis<T>,
    e1: &Element<T>,
    e2: &Element<T>,
    w: T,
    lo: T,
    hi: T,
    rules: &PairRules<T>,
    scale: T,
    local: &mut [[T; 4]; 4],
) {
    let width = hi - lo;
    if width <= T::zero() {
        return;
    }
    let n = basis.len();
    for &xi in &rules.x_nodes {
        let x = lo + width * xi;
        let y = x + w;
        let mut d = [T::zero(); 4];
        for i in 0..n {
            d[i] = basis.on_first[i].eval(e1, x) - basis.on_second[i].eval(e2, y);
        }
        let wgt = rules.x_weight * width * scale;
        for i in 0..n {
            for j in i..n {
                local[i][j] += wgt * d[i] * d[j];
            }
        }
    }
}

/// Stiffness contribution of one unordered element pair (`e1` left of or
/// equal to `e2`), as a symmetric local block over `basis.dofs`.
fn pair_block<T: Real>(
    e1: &Element<T>,
    e2: &Element<T>,
    same: bool,
    kernel: &Kernel<T>,
    rules: &PairRules<T>,
    basis: &PairBasis<T>,
) -> [[T; 4]; 4] {
    let mut local = [[T::zero(); 4]; 4];
    let n = basis.len();
    let two = lit::<T>(2.0);
    let two_s = two * kernel.s();

    if same {
        // On the diagonal the basis differences are slope * (x - y), so the
        // whole block is slope_i slope_j * 2 int_0^h (h-w) w^2 K(w) dw.
        let h = e1.width();
        let weight = if kernel.is_fractional() {
            two * kernel.lambda() * h.powf(lit::<T>(3.0) - two_s)
                / ((two - two_s) * (lit::<T>(3.0) - two_s))
        } else {
            // w = h t^{1/(2-2s)} flattens the w^{1-2s} factor.
            let p = T::one() / (two - two_s);
            let scale = two * kernel.lambda() * h.powf(two - two_s) / (two - two_s);
            scale
                * rules.graded.integrate(
                    |t| {
                        let w = h * t.powf(p);
                        kernel.multiplier(w) * (h - w)
                    },
                    T::zero(),
                    T::one(),
                )
        };
        for i in 0..n {
            for j in i..n {
                local[i][j] =
                    basis.on_first[i].slope(e1) * basis.on_first[j].slope(e1) * weight;
            }
        }
        return local;
    }

    // w = y - x ranges over [e2.a - e1.b, e2.b - e1.a]; the inner limits
    // switch at the two interior breakpoints.
    let mut brk = [
        e2.a - e1.b,
        e2.a - e1.a,
        e2.b - e1.b,
        e2.b - e1.a,
    ];
    brk.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let touching = e1.b == e2.a;

    let inner_lo = |w: T| (e2.a - w).max(e1.a);
    let inner_hi = |w: T| (e2.b - w).min(e1.b);

    let mut piece_start = 0;
    if touching {
        // First piece [0, w1]: the inner integral is exactly c_ij w^3, so
        // integrate w^3 K(w) in closed form (or by a graded rule for the
        // perturbed multiplier).
        let w1 = brk[1];
        if w1 > T::zero() {
            let three = lit::<T>(3.0);
            let moment = if kernel.is_fractional() {
                kernel.lambda() * w1.powf(three - two_s) / (three - two_s)
            } else {
                let p = T::one() / (three - two_s);
                let scale = kernel.lambda() * w1.powf(three - two_s) / (three - two_s);
                scale
                    * rules.graded.integrate(
                        |t| kernel.multiplier(w1 * t.powf(p)),
                        T::zero(),
                        T::one(),
                    )
            };
            // c_ij = Q_ij(w1) / w1^3 via one exact inner integration.
            let mut q = [[T::zero(); 4]; 4];
            accumulate_differences(
                basis,
                e1,
                e2,
                w1,
                inner_lo(w1),
                inner_hi(w1),
                rules,
                T::one(),
                &mut q,
            );
            let inv_w13 = T::one() / (w1 * w1 * w1);
            for i in 0..n {
                for j in i..n {
                    local[i][j] += q[i][j] * inv_w13 * moment;
                }
            }
        }
        piece_start = 1;
    }

    for piece in piece_start..3 {
        let (a, b) = (brk[piece], brk[piece + 1]);
        if !(b > a) {
            continue;
        }
        let half = (b - a) * lit::<T>(0.5);
        let mid = (a + b) * lit::<T>(0.5);
        for (node, wgt) in rules.w_rule.nodes.iter().zip(&rules.w_rule.weights) {
            let w = mid + half * *node;
            let k = kernel.eval(w).unwrap();
            accumulate_differences(
                basis,
                e1,
                e2,
                w,
                inner_lo(w),
                inner_hi(w),
                rules,
                *wgt * half * k,
                &mut local,
            );
        }
    }
    local
}

/// Exterior-tail contribution of one element: `int_e phi_a phi_b kappa dx`
/// as a symmetric local block over the element's dofs.
fn tail_block<T: Real>(
    mesh: &Mesh<T>,
    e: &Element<T>,
    kernel: &Kernel<T>,
    rules: &PairRules<T>,
) -> ([Option<usize>; 2], [[T; 2]; 2]) {
    let dofs = [e.left_dof, e.right_dof];
    let locals = [
        LocalLinear::<T> {
            va: if e.left_dof.is_some() { T::one() } else { T::zero() },
            vb: T::zero(),
        },
        LocalLinear::<T> {
            va: T::zero(),
            vb: if e.right_dof.is_some() { T::one() } else { T::zero() },
        },
    ];
    let h = e.width();
    let mut block = [[T::zero(); 2]; 2];
    let two_s = lit::<T>(2.0) * kernel.s();

    if kernel.is_fractional() {
        for (point, coeff) in kernel.fractional_tail_terms(mesh.domain(), e.a, e.b) {
            let singular_at_a = point == e.a;
            let singular_at_b = point == e.b;
            if singular_at_a || singular_at_b {
                // Express each basis restriction as alpha + beta r with
                // r the distance to the singular endpoint, and integrate
                // the r^{k-2s} moments exactly.
                for i in 0..2 {
                    if dofs[i].is_none() {
                        continue;
                    }
                    for j in i..2 {
                        if dofs[j].is_none() {
                            continue;
                        }
                        let coeffs_of = |l: &LocalLinear<T>| {
                            if singular_at_a {
                                (l.va, (l.vb - l.va) / h)
                            } else {
                                (l.vb, (l.va - l.vb) / h)
                            }
                        };
                        let (ai, bi) = coeffs_of(&locals[i]);
                        let (aj, bj) = coeffs_of(&locals[j]);
                        let c = [ai * aj, ai * bj + aj * bi, bi * bj];
                        let mut acc = T::zero();
                        for (k, &ck) in c.iter().enumerate() {
                            if ck == T::zero() {
                                continue;
                            }
                            let expo = lit::<T>(k as f64 + 1.0) - two_s;
                            acc += ck * h.powf(expo) / expo;
                        }
                        block[i][j] += coeff * acc;
                    }
                }
            } else {
                let half = h * lit::<T>(0.5);
                let mid = (e.a + e.b) * lit::<T>(0.5);
                for (node, wgt) in rules.w_rule.nodes.iter().zip(&rules.w_rule.weights) {
                    let x = mid + half * *node;
                    let kap = coeff * (x - point).abs().powf(-two_s);
                    for i in 0..2 {
                        for j in i..2 {
                            block[i][j] += *wgt
                                * half
                                * kap
                                * locals[i].eval(e, x)
                                * locals[j].eval(e, x);
                        }
                    }
                }
            }
        }
    } else {
        let kappa = |x: T| kernel.exterior_tail(mesh.domain(), x).unwrap();
        let boundary_end = if e.left_dof.is_none() {
            Some(e.a)
        } else if e.right_dof.is_none() {
            Some(e.b)
        } else {
            None
        };
        match boundary_end {
            Some(p) => {
                // Graded rule from the boundary end: the integrand behaves
                // like r^{2-2s} there.
                let q = T::one() / (lit::<T>(3.0) - two_s);
                for (node, wgt) in rules.graded.nodes.iter().zip(&rules.graded.weights) {
                    let t = (*node + T::one()) * lit::<T>(0.5);
                    let r = h * t.powf(q);
                    let jac = lit::<T>(0.5) * *wgt * h * q * t.powf(q - T::one());
                    let x = if p == e.a { p + r } else { p - r };
                    let kap = kappa(x);
                    for i in 0..2 {
                        for j in i..2 {
                            block[i][j] +=
                                jac * kap * locals[i].eval(e, x) * locals[j].eval(e, x);
                        }
                    }
                }
            }
            None => {
                let half = h * lit::<T>(0.5);
                let mid = (e.a + e.b) * lit::<T>(0.5);
                for (node, wgt) in rules.w_rule.nodes.iter().zip(&rules.w_rule.weights) {
                    let x = mid + half * *node;
                    let kap = kappa(x);
                    for i in 0..2 {
                        for j in i..2 {
                            block[i][j] += *wgt
                                * half
                                * kap
                                * locals[i].eval(e, x)
                                * locals[j].eval(e, x);
                        }
                    }
                }
            }
        }
    }
    (dofs, block)
}

/// Assemble the stiffness and mass forms for a mesh/kernel pair.
pub fn assemble<T: Real>(mesh: &Mesh<T>, kernel: &Kernel<T>) -> Result<GalerkinPair<T>> {
    let n = mesh.n_dofs();
    let elems = mesh.elements();
    let rules = PairRules::<T>::new();
    let mut a = DMatrix::<T>::zeros(n, n);

    for k1 in 0..elems.len() {
        for k2 in k1..elems.len() {
            let e1 = &elems[k1];
            let e2 = &elems[k2];
            let basis = PairBasis::new(e1, e2);
            if basis.len() == 0 {
                continue;
            }
            let block = pair_block(e1, e2, k1 == k2, kernel, &rules, &basis);
            let factor = if k1 == k2 { T::one() } else { lit::<T>(2.0) };
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    let v = block[i][j] * factor;
                    if !v.is_finite() {
                        return Err(Error::Assembly {
                            first: k1,
                            second: k2,
                            reason: "non-finite pair contribution".into(),
                        });
                    }
                    let (di, dj) = (basis.dofs[i], basis.dofs[j]);
                    a[(di, dj)] += v;
                    if di != dj {
                        a[(dj, di)] += v;
                    }
                }
            }
        }
    }

    // Exterior-tail term 2 * int phi_i phi_j kappa.
    for (idx, e) in elems.iter().enumerate() {
        let (dofs, block) = tail_block(mesh, e, kernel, &rules);
        for i in 0..2 {
            let Some(di) = dofs[i] else { continue };
            for j in i..2 {
                let Some(dj) = dofs[j] else { continue };
                let v = block[i][j] * lit::<T>(2.0);
                if !v.is_finite() {
                    return Err(Error::Assembly {
                        first: idx,
                        second: idx,
                        reason: "non-finite exterior-tail contribution".into(),
                    });
                }
                a[(di, dj)] += v;
                if di != dj {
                    a[(dj, di)] += v;
                }
            }
        }
    }

    // Consistent mass, element by element.
    let mut m = DMatrix::<T>::zeros(n, n);
    let sixth = T::one() / lit::<T>(6.0);
    for e in elems {
        let h = e.width();
        let pairs = [
            (e.left_dof, e.left_dof, h * sixth * lit::<T>(2.0)),
            (e.right_dof, e.right_dof, h * sixth * lit::<T>(2.0)),
            (e.left_dof, e.right_dof, h * sixth),
        ];
        for (di, dj, v) in pairs {
            let (Some(di), Some(dj)) = (di, dj) else {
                continue;
            };
            m[(di, dj)] += v;
            if di != dj {
                m[(dj, di)] += v;
            }
        }
    }
    let m_lumped = &m * DVector::from_element(n, T::one());

    Ok(GalerkinPair {
        a,
        m,
        m_lumped,
        mesh: mesh.clone(),
        kernel: kernel.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::kernel::KernelVariant;

    fn pair(n: usize, s: f64) -> GalerkinPair<f64> {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let mesh = Mesh::uniform(domain, n).unwrap();
        let kernel = Kernel::new(s, 1.0, KernelVariant::Fractional).unwrap();
        assemble(&mesh, &kernel).unwrap()
    }

    #[test]
    fn stiffness_is_bitwise_symmetric() {
        let gp = pair(16, 0.25);
        for i in 0..gp.n_dofs() {
            for j in 0..gp.n_dofs() {
                assert_eq!(gp.a()[(i, j)], gp.a()[(j, i)]);
            }
        }
    }

    #[test]
    fn definiteness_on_basis_vectors() {
        let gp = pair(16, 0.25);
        let zero = DVector::zeros(gp.n_dofs());
        assert_eq!(gp.energy(&zero).unwrap(), 0.0);
        let e1 = DVector::from_fn(gp.n_dofs(), |i, _| if i == 0 { 1.0 } else { 0.0 });
        assert!(gp.energy(&e1).unwrap() > 0.0);
    }

    #[test]
    fn energy_is_even() {
        let gp = pair(12, 0.3);
        let u = DVector::from_fn(gp.n_dofs(), |i, _| (i as f64 * 0.7).sin());
        let eu = gp.energy(&u).unwrap();
        let em = gp.energy(&(-&u)).unwrap();
        assert!((eu - em).abs() <= 1e-14 * eu.abs());
    }

    #[test]
    fn mass_row_sums_equal_lumped_diagonal() {
        let gp = pair(20, 0.25);
        for i in 0..gp.n_dofs() {
            let row_sum: f64 = gp.m().row(i).iter().sum();
            assert!((row_sum - gp.m_lumped()[i]).abs() < 1e-15);
            assert!(gp.m_lumped()[i] > 0.0);
        }
    }

    #[test]
    fn cross_term_requires_disjoint_nonnegative_supports() {
        let gp = pair(12, 0.25);
        let n = gp.n_dofs();
        let mut a = DVector::zeros(n);
        let mut b = DVector::zeros(n);
        a[2] = 1.0;
        b[2] = 1.0;
        assert!(matches!(
            gp.cross_term(&a, &b),
            Err(Error::OverlappingSupports { node: 2 })
        ));
        b[2] = 0.0;
        b[3] = -1.0;
        assert!(matches!(
            gp.cross_term(&a, &b),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn cross_term_zero_and_symmetric() {
        let gp = pair(16, 0.25);
        let n = gp.n_dofs();
        let zero = DVector::zeros(n);
        let mut a = DVector::zeros(n);
        let mut b = DVector::zeros(n);
        a[1] = 0.8;
        a[2] = 0.3;
        b[7] = 1.1;
        b[9] = 0.4;
        assert_eq!(gp.cross_term(&zero, &b).unwrap(), 0.0);
        let ab = gp.cross_term(&a, &b).unwrap();
        let ba = gp.cross_term(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-15 * ab.abs());
        assert!(ab > 0.0);
    }

    #[test]
    fn decomposition_identity_is_algebraic() {
        let gp = pair(24, 0.25);
        let n = gp.n_dofs();
        let u = DVector::from_fn(n, |i, _| ((i * 37 + 11) % 17) as f64 / 8.5 - 1.0);
        let up = u.map(|v: f64| v.max(0.0));
        let um = u.map(|v: f64| (-v).max(0.0));
        let lhs = gp.energy(&u).unwrap();
        let rhs = gp.energy(&up).unwrap()
            + gp.energy(&um).unwrap()
            + 4.0 * gp.cross_term(&up, &um).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let gp = pair(8, 0.25);
        let u = DVector::zeros(3);
        assert!(matches!(
            gp.energy(&u),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn perturbed_assembly_runs_and_dominates_fractional() {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let mesh = Mesh::uniform(domain, 16).unwrap();
        let frac = Kernel::new(0.25, 1.0, KernelVariant::Fractional).unwrap();
        let pert = Kernel::new(0.25, 1.0, KernelVariant::Perturbed { m_max: 2.0 }).unwrap();
        let gp_f = assemble(&mesh, &frac).unwrap();
        let gp_p = assemble(&mesh, &pert).unwrap();
        let u = DVector::from_fn(gp_f.n_dofs(), |i, _| 1.0 + (i as f64).cos());
        // m(z) >= 1 pointwise, so the perturbed energy dominates.
        assert!(gp_p.energy(&u).unwrap() > gp_f.energy(&u).unwrap());
    }
}
