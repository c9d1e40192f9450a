//! Singular interaction kernels and their exterior-tail weights.
//!
//! A kernel is `K(z) = lambda * m(z) * |z|^{-(1+2s)}` with `m = 1` for the
//! plain fractional case and a bounded symmetric multiplier
//! `m(z) = 1 + (m_max - 1) z^2/(1+z^2)` for the perturbed case. Both satisfy
//! the integrability, lower-bound and symmetry conditions by construction.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::quad::{adaptive_simpson, GaussRule};
use crate::real::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelVariant<T> {
    Fractional,
    /// Fractional kernel scaled by the bounded symmetric multiplier
    /// `m(z) = 1 + (m_max - 1) z^2 / (1 + z^2)`, so `m(z)` ranges in
    /// `[1, m_max)`.
    Perturbed { m_max: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    s: T,
    lambda: T,
    variant: KernelVariant<T>,
}

impl<T: Real> Kernel<T> {
    /// Admissible kernel with the standing assumption `n > 2s` (so `s < 1/2`
    /// in one dimension).
    pub fn new(s: T, lambda: T, variant: KernelVariant<T>) -> Result<Self> {
        Self::with_options(s, lambda, variant, false)
    }

    /// As [`Kernel::new`], but `allow_large_s` admits `s in [1/2, 1)`.
    /// That range is outside the standing hypotheses of the spectral theory
    /// this library mirrors; use it for experiments only.
    pub fn with_options(
        s: T,
        lambda: T,
        variant: KernelVariant<T>,
        allow_large_s: bool,
    ) -> Result<Self> {
        if !(s > T::zero() && s < T::one()) {
            return Err(Error::InvalidKernel("order s must lie in (0, 1)".into()));
        }
        let half = lit::<T>(0.5);
        if s >= half && !allow_large_s {
            return Err(Error::InvalidKernel(
                "s >= 1/2 violates n > 2s in one dimension; pass allow_large_s to override".into(),
            ));
        }
        if !(lambda > T::zero()) {
            return Err(Error::InvalidKernel("scale lambda must be positive".into()));
        }
        if let KernelVariant::Perturbed { m_max } = variant {
            if !(m_max >= T::one()) {
                return Err(Error::InvalidKernel("m_max must be >= 1".into()));
            }
        }
        Ok(Kernel { s, lambda, variant })
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn variant(&self) -> KernelVariant<T> {
        self.variant
    }

    pub fn is_fractional(&self) -> bool {
        matches!(self.variant, KernelVariant::Fractional)
    }

    /// The bounded symmetric multiplier; identically 1 for the fractional
    /// variant.
    pub fn multiplier(&self, z: T) -> T {
        match self.variant {
            KernelVariant::Fractional => T::one(),
            KernelVariant::Perturbed { m_max } => {
                let z2 = z * z;
                T::one() + (m_max - T::one()) * z2 / (T::one() + z2)
            }
        }
    }

    /// Evaluate `K(z)`. Fails at the singularity `z = 0`.
    pub fn eval(&self, z: T) -> Result<T> {
        if z == T::zero() {
            return Err(Error::KernelSingularity);
        }
        let power = -(T::one() + lit::<T>(2.0) * self.s);
        Ok(self.lambda * self.multiplier(z) * z.abs().powf(power))
    }

    /// Exterior-tail weight `kappa(x) = \int_{R \ Omega} K(x - y) dy` for
    /// `x` inside the domain.
    ///
    /// For the fractional kernel this is the closed-form sum of per-gap
    /// contributions; the perturbed variant is integrated numerically.
    pub fn exterior_tail(&self, domain: &Domain<T>, x: T) -> Result<T> {
        if !domain.contains(x) {
            return Err(Error::OutsideDomain {
                x: x.to_f64().unwrap_or(f64::NAN),
            });
        }
        let dist = domain.boundary_distance(x);
        if dist <= lit::<T>(64.0) * T::eps() * domain.measure() {
            log::warn!(
                "exterior_tail evaluated within machine epsilon of the boundary (dist = {:e}); value is near-singular",
                dist.to_f64().unwrap_or(f64::NAN)
            );
        }
        let mut acc = T::zero();
        for (lo, hi) in domain.complement_components() {
            // Distance from x to the near and far edges of the component.
            let (r1, r2) = match (lo, hi) {
                (None, Some(c)) => (x - c, None),
                (Some(c), None) => (c - x, None),
                (Some(lo), Some(hi)) => {
                    if x < lo {
                        (lo - x, Some(hi - x))
                    } else {
                        (x - hi, Some(x - lo))
                    }
                }
                (None, None) => unreachable!(),
            };
            acc += self.tail_integral(r1, r2);
        }
        Ok(acc)
    }

    /// `\int_{r1}^{r2} K(w) dw` with `r2 = None` meaning infinity; `r1 > 0`.
    pub(crate) fn tail_integral(&self, r1: T, r2: Option<T>) -> T {
        let two_s = lit::<T>(2.0) * self.s;
        match self.variant {
            KernelVariant::Fractional => {
                let head = r1.powf(-two_s);
                let tail = r2.map(|r| r.powf(-two_s)).unwrap_or_else(T::zero);
                self.lambda * (head - tail) / two_s
            }
            KernelVariant::Perturbed { .. } => {
                let rule = GaussRule::<T>::new(32);
                let split = r2.unwrap_or_else(|| r1 + T::one()).min(r1 + T::one());
                let near = rule.integrate(|w| self.eval(w).unwrap(), r1, split);
                let far = match r2 {
                    Some(r2) if r2 <= split => T::zero(),
                    // Map w -> 1/v, then flatten the v^{2s-1} endpoint
                    // singularity with v = V t^{1/(2s)}.
                    _ => {
                        let v_hi = T::one() / split;
                        let v_lo = r2.map(|r| T::one() / r).unwrap_or_else(T::zero);
                        let scale = v_hi.powf(two_s) / two_s;
                        let t_lo = (v_lo / v_hi).powf(two_s);
                        rule.integrate(
                            |t| {
                                let v = v_hi * t.powf(T::one() / two_s);
                                self.lambda * self.multiplier(T::one() / v) * scale
                            },
                            t_lo,
                            T::one(),
                        )
                    }
                };
                near + far
            }
        }
    }

    /// Decompose `kappa(x)` on a region `(a, b)` strictly inside one domain
    /// interval into terms `coeff * |x - point|^{-2s}` (fractional variant
    /// only). Valid for every `x in (a, b)`.
    pub(crate) fn fractional_tail_terms(&self, domain: &Domain<T>, a: T, b: T) -> Vec<(T, T)> {
        debug_assert!(self.is_fractional());
        let two_s = lit::<T>(2.0) * self.s;
        let coeff = self.lambda / two_s;
        let probe = (a + b) * lit::<T>(0.5);
        let mut terms = Vec::new();
        for (lo, hi) in domain.complement_components() {
            match (lo, hi) {
                (None, Some(c)) => terms.push((c, coeff)),
                (Some(c), None) => terms.push((c, coeff)),
                (Some(lo), Some(hi)) => {
                    if probe < lo {
                        terms.push((lo, coeff));
                        terms.push((hi, -coeff));
                    } else {
                        terms.push((hi, coeff));
                        terms.push((lo, -coeff));
                    }
                }
                (None, None) => unreachable!(),
            }
        }
        terms
    }

    /// Verify the defining kernel conditions numerically: symmetry and the
    /// lower bound on log-spaced samples, and finiteness of
    /// `\int min(z^2, 1) K(z) dz`.
    pub fn condition_report(&self) -> KernelConditionReport<T> {
        let mut symmetric = true;
        let mut lower_bound = true;
        let n = 1000;
        let power = -(T::one() + lit::<T>(2.0) * self.s);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let z = lit::<T>(10f64.powf(-6.0 + 9.0 * t));
            let kp = self.eval(z).unwrap();
            let km = self.eval(-z).unwrap();
            if (kp - km).abs() > lit::<T>(4.0) * T::eps() * kp {
                symmetric = false;
            }
            let bound = self.lambda * z.powf(power);
            if kp < bound * (T::one() - lit::<T>(16.0) * T::eps()) {
                lower_bound = false;
            }
        }
        // \int_{|z|<=1} z^2 K + \int_{|z|>1} K, both finite for s in (0,1).
        let inner = lit::<T>(2.0)
            * adaptive_simpson(
                &|z: T| {
                    if z == T::zero() {
                        T::zero()
                    } else {
                        z * z * self.eval(z).unwrap()
                    }
                },
                T::zero(),
                T::one(),
                lit::<T>(1e-10),
            );
        let outer = lit::<T>(2.0) * self.tail_integral(T::one(), None);
        KernelConditionReport {
            symmetric,
            lower_bound,
            integrability: inner + outer,
        }
    }

    /// Canonical little-endian byte encoding, used for cache keys.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(25);
        out.extend_from_slice(&self.s.to_f64().unwrap().to_le_bytes());
        out.extend_from_slice(&self.lambda.to_f64().unwrap().to_le_bytes());
        match self.variant {
            KernelVariant::Fractional => out.push(0),
            KernelVariant::Perturbed { m_max } => {
                out.push(1);
                out.extend_from_slice(&m_max.to_f64().unwrap().to_le_bytes());
            }
        }
        out
    }
}

/// Outcome of the numeric kernel-condition checks.
#[derive(Debug, Clone, Copy)]
pub struct KernelConditionReport<T> {
    pub symmetric: bool,
    pub lower_bound: bool,
    /// Numeric value of `\int min(z^2,1) K(z) dz`; finite for admissible
    /// kernels.
    pub integrability: T,
}

impl<T: Real> KernelConditionReport<T> {
    pub fn all_ok(&self) -> bool {
        self.symmetric && self.lower_bound && self.integrability.is_finite()
    }
}
