//! Independent quadrature oracles: recompute assembled quantities straight
//! from their integral definitions with generic adaptive quadrature, sharing
//! no code path with the assembly routines.

use fucik_lab::assembly::assemble;
use fucik_lab::geometry::{Domain, Mesh};
use fucik_lab::kernel::{Kernel, KernelVariant};
use fucik_lab::quad::adaptive_simpson;

const S: f64 = 0.25;

fn kernel_value(z: f64) -> f64 {
    z.abs().powf(-(1.0 + 2.0 * S))
}

/// Hat function with peak at `c` and supports `[l, c]`, `[c, r]`.
fn hat(l: f64, c: f64, r: f64, x: f64) -> f64 {
    if x <= l || x >= r {
        0.0
    } else if x < c {
        (x - l) / (c - l)
    } else {
        (r - x) / (r - c)
    }
}

/// Exterior-tail weight kappa(x) = int_{R \ (a,b)} K(x - y) dy, computed by
/// quadrature over a large truncated window plus the analytic power-law
/// remainder of the truncation (the remainder formula is derived here, not
/// taken from the library).
fn kappa_oracle(a: f64, b: f64, x: f64) -> f64 {
    let big = 1e4;
    let right = adaptive_simpson(&|y: f64| kernel_value(y - x), b, b + big, 1e-12);
    let left = adaptive_simpson(&|y: f64| kernel_value(y - x), a - big, a, 1e-12);
    // int_R^inf z^{-1-2s} dz = R^{-2s} / (2s) for each side.
    let rem = ((b + big - x).powf(-2.0 * S) + (x - a + big).powf(-2.0 * S)) / (2.0 * S);
    left + right + rem
}

/// Integrate `f` over `[a, b]` split at the given knots, so narrow features
/// between knots are never missed by the adaptive rule.
fn integrate_with_knots(f: &impl Fn(f64) -> f64, a: f64, b: f64, knots: &[f64], tol: f64) -> f64 {
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(knots.iter().copied().filter(|&k| k > a && k < b));
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    cuts.windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol))
        .sum()
}

/// Stiffness entry oracle straight from the definition:
/// `A_ij = int_O int_O (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y)) K(x-y) dy dx
///        + 2 int_O phi_i phi_j kappa dx`.
/// `knots` are the support breakpoints of both hats.
#[allow(clippy::too_many_arguments)]
fn entry_oracle(
    a: f64,
    b: f64,
    phi_i: &dyn Fn(f64) -> f64,
    phi_j: &dyn Fn(f64) -> f64,
    knots: &[f64],
    inner_tol: f64,
    outer_tol: f64,
) -> f64 {
    let inner = |x: f64| {
        let f = |y: f64| {
            if (y - x).abs() < 1e-14 {
                0.0
            } else {
                (phi_i(x) - phi_i(y)) * (phi_j(x) - phi_j(y)) * kernel_value(x - y)
            }
        };
        // Split at the knots and at the (integrable) diagonal singularity.
        let mut cuts = knots.to_vec();
        cuts.push(x);
        integrate_with_knots(&f, a, b, &cuts, inner_tol)
    };
    let double = integrate_with_knots(&inner, a, b, knots, outer_tol);
    let tail_f = |x: f64| {
        let w = phi_i(x) * phi_j(x);
        if w == 0.0 {
            0.0
        } else {
            w * kappa_oracle(a, b, x)
        }
    };
    let tail = integrate_with_knots(&tail_f, a, b, knots, outer_tol);
    double + 2.0 * tail
}

#[test]
fn center_hat_energy_matches_2d_quadrature() {
    let n = 64;
    let mesh = Mesh::uniform(Domain::interval(-1.0, 1.0).unwrap(), n).unwrap();
    let kernel = Kernel::new(S, 1.0, KernelVariant::Fractional).unwrap();
    let gp = assemble(&mesh, &kernel).unwrap();
    let h = 2.0 / n as f64;
    // The dof at x = 0 is node index n/2 - 1 (boundary nodes carry no dof).
    let i = n / 2 - 1;
    assert!((gp.mesh().nodes()[i]).abs() < 1e-14);
    let phi = move |x: f64| hat(-h, 0.0, h, x);
    let oracle = entry_oracle(-1.0, 1.0, &phi, &phi, &[-h, 0.0, h], 1e-10, 1e-9);
    let assembled = gp.a()[(i, i)];
    let rel = (assembled - oracle).abs() / oracle;
    assert!(
        rel <= 1e-4,
        "A[{i},{i}] = {assembled} vs 2-D quadrature oracle {oracle} (relative {rel:.3e})"
    );
}

#[test]
fn neighbor_and_distant_entries_match_2d_quadrature() {
    let n = 16;
    let mesh = Mesh::uniform(Domain::interval(-1.0, 1.0).unwrap(), n).unwrap();
    let kernel = Kernel::new(S, 1.0, KernelVariant::Fractional).unwrap();
    let gp = assemble(&mesh, &kernel).unwrap();
    let h = 2.0 / n as f64;
    let node = |i: usize| -1.0 + (i as f64 + 1.0) * h;
    let basis = move |i: usize| move |x: f64| hat(node(i) - h, node(i), node(i) + h, x);
    for (i, j) in [(6usize, 7usize), (2, 9), (0, 14)] {
        let knots = [
            node(i) - h,
            node(i),
            node(i) + h,
            node(j) - h,
            node(j),
            node(j) + h,
        ];
        let oracle = entry_oracle(-1.0, 1.0, &basis(i), &basis(j), &knots, 1e-11, 1e-10);
        let assembled = gp.a()[(i, j)];
        let rel = (assembled - oracle).abs() / oracle.abs().max(1e-6);
        assert!(
            rel <= 1e-4,
            "A[{i},{j}] = {assembled} vs oracle {oracle} (relative {rel:.3e})"
        );
    }
}

#[test]
fn exterior_tail_matches_quadrature_oracle() {
    let kernel = Kernel::new(S, 1.0, KernelVariant::Fractional).unwrap();
    let domain = Domain::interval(-1.0, 1.0).unwrap();
    for &x in &[-0.9, -0.3, 0.0, 0.55, 0.97] {
        let got = kernel.exterior_tail(&domain, x).unwrap();
        let oracle = kappa_oracle(-1.0, 1.0, x);
        let rel = (got - oracle).abs() / oracle;
        assert!(
            rel <= 1e-7,
            "kappa({x}) = {got} vs quadrature oracle {oracle} (relative {rel:.3e})"
        );
    }
}

#[test]
fn consistent_mass_matches_quadrature_oracle() {
    let n = 16;
    let mesh = Mesh::uniform(Domain::interval(-1.0, 1.0).unwrap(), n).unwrap();
    let kernel = Kernel::new(S, 1.0, KernelVariant::Fractional).unwrap();
    let gp = assemble(&mesh, &kernel).unwrap();
    let h = 2.0 / n as f64;
    let node = |i: usize| -1.0 + (i as f64 + 1.0) * h;
    for (i, j) in [(3usize, 3usize), (3, 4), (3, 5)] {
        let f = |x: f64| {
            hat(node(i) - h, node(i), node(i) + h, x) * hat(node(j) - h, node(j), node(j) + h, x)
        };
        let lo = (node(i) - h).max(node(j) - h);
        let hi = (node(i) + h).min(node(j) + h);
        let oracle = if lo < hi {
            integrate_with_knots(&f, lo, hi, &[node(i), node(j)], 1e-13)
        } else {
            0.0
        };
        let got = gp.m()[(i, j)];
        assert!(
            (got - oracle).abs() <= 1e-12,
            "M[{i},{j}] = {got} vs {oracle}"
        );
    }
}

#[test]
fn weighted_principal_matches_direct_eigensolve_oracle() {
    use fucik_lab::spectrum::{lowest_eigenpairs, weighted_principal};
    use nalgebra::{DMatrix, DVector};

    let n = 32;
    let mesh = Mesh::uniform(Domain::interval(-1.0, 1.0).unwrap(), n).unwrap();
    let kernel = Kernel::new(S, 1.0, KernelVariant::Fractional).unwrap();
    let gp = assemble(&mesh, &kernel).unwrap();
    let l1 = lowest_eigenpairs(&gp, 1, 1e-10).unwrap()[0].value;

    // Weight 1 + indicator of the left half.
    let w = DVector::from_fn(gp.n_dofs(), |i, _| {
        if gp.mesh().nodes()[i] < 0.0 { 2.0f64 } else { 1.0 }
    });
    let got = weighted_principal(&gp, &w).unwrap();
    assert!(got > l1 / 2.0 && got < l1, "{got} outside ({}, {l1})", l1 / 2.0);

    // Direct oracle: smallest eigenvalue of D^{-1/2} A D^{-1/2} with
    // D = diag(w_i * m_i), reduced and solved here from scratch.
    let d: Vec<f64> = (0..gp.n_dofs())
        .map(|i| (w[i] * gp.m_lumped()[i]).sqrt())
        .collect();
    let c = DMatrix::from_fn(gp.n_dofs(), gp.n_dofs(), |i, j| {
        gp.a()[(i, j)] / (d[i] * d[j])
    });
    let oracle = c
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(
        (got - oracle).abs() <= 1e-8 * oracle,
        "weighted principal {got} vs direct eigensolve oracle {oracle}"
    );
}
