//! Computational domain and nodal mesh.
//!
//! The domain is a finite union of disjoint open intervals; functions are
//! extended by zero on the complement, so meshes carry degrees of freedom
//! only at strictly interior nodes.

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Bounded open domain: an ordered list of disjoint open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    intervals: Vec<(T, T)>,
}

impl<T: Real> Domain<T> {
    pub fn new(mut intervals: Vec<(T, T)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidDomain("no intervals given".into()));
        }
        for &(a, b) in &intervals {
            if !(a < b) {
                return Err(Error::InvalidDomain(format!(
                    "interval endpoints must satisfy a < b, got ({:?}, {:?})",
                    a.to_f64(),
                    b.to_f64()
                )));
            }
        }
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        for w in intervals.windows(2) {
            if !(w[0].1 < w[1].0) {
                return Err(Error::InvalidDomain(
                    "intervals must be pairwise disjoint with positive gaps".into(),
                ));
            }
        }
        Ok(Domain { intervals })
    }

    /// Single interval `(a, b)`.
    pub fn interval(a: T, b: T) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn connected(&self) -> bool {
        self.intervals.len() == 1
    }

    pub fn measure(&self) -> T {
        self.intervals
            .iter()
            .fold(T::zero(), |acc, &(a, b)| acc + (b - a))
    }

    pub fn contains(&self, x: T) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }

    /// Distance from `x` to the boundary of the domain (0 outside).
    pub fn boundary_distance(&self, x: T) -> T {
        self.intervals
            .iter()
            .filter(|&&(a, b)| a < x && x < b)
            .map(|&(a, b)| (x - a).min(b - x))
            .fold(T::zero(), |acc, d| acc.max(d))
    }

    /// Connected components of the complement, as `(lower, upper)` with
    /// `None` marking an infinite end. Ordered left to right.
    pub fn complement_components(&self) -> Vec<(Option<T>, Option<T>)> {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        out.push((None, Some(self.intervals[0].0)));
        for w in self.intervals.windows(2) {
            out.push((Some(w[0].1), Some(w[1].0)));
        }
        out.push((Some(self.intervals.last().unwrap().1), None));
        out
    }

    /// True iff `self` is contained in `other` with strict slack, i.e. the
    /// containment is proper by more than `slack` in measure.
    pub fn strictly_inside(&self, other: &Domain<T>, slack: T) -> bool {
        let contained = self.intervals.iter().all(|&(a, b)| {
            other
                .intervals
                .iter()
                .any(|&(oa, ob)| oa <= a && b <= ob)
        });
        contained && other.measure() - self.measure() > slack
    }

    /// Canonical little-endian byte encoding, used for cache keys.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 * self.intervals.len());
        for &(a, b) in &self.intervals {
            out.extend_from_slice(&a.to_f64().unwrap().to_le_bytes());
            out.extend_from_slice(&b.to_f64().unwrap().to_le_bytes());
        }
        out
    }
}

/// One mesh element `[a, b]` with the dof indices of its endpoints.
/// `None` marks a domain-boundary endpoint (Dirichlet, no dof).
#[derive(Debug, Clone, Copy)]
pub struct Element<T> {
    pub a: T,
    pub b: T,
    pub left_dof: Option<usize>,
    pub right_dof: Option<usize>,
}

impl<T: Real> Element<T> {
    pub fn width(&self) -> T {
        self.b - self.a
    }
}

/// Piecewise-linear nodal mesh over a [`Domain`]. Degrees of freedom sit at
/// the strictly interior nodes; the exterior condition is built in.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    domain: Domain<T>,
    /// Interior node coordinates, dof-ordered (left to right across intervals).
    nodes: Vec<T>,
    elements: Vec<Element<T>>,
}

impl<T: Real> Mesh<T> {
    /// Uniform mesh with `n` elements distributed over the intervals in
    /// proportion to their lengths (at least 2 per interval).
    pub fn uniform(domain: Domain<T>, n: usize) -> Result<Self> {
        if n < domain.intervals().len() * 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least {} elements for {} interval(s)",
                domain.intervals().len() * 2,
                domain.intervals().len()
            )));
        }
        let total = domain.measure();
        let mut per_interval = Vec::with_capacity(domain.intervals().len());
        let mut assigned = 0usize;
        for (idx, &(a, b)) in domain.intervals().iter().enumerate() {
            let count = if idx + 1 == domain.intervals().len() {
                n - assigned
            } else {
                let frac = ((b - a) / total).to_f64().unwrap();
                ((n as f64 * frac).round() as usize).max(2)
            };
            assigned += count;
            per_interval.push(count);
        }
        let nodes = domain
            .intervals()
            .iter()
            .zip(&per_interval)
            .map(|(&(a, b), &count)| {
                let h = (b - a) / lit::<T>(count as f64);
                (1..count).map(|i| a + h * lit::<T>(i as f64)).collect()
            })
            .collect();
        Self::from_nodes(domain, nodes)
    }

    /// Mesh from explicit interior nodes, one strictly increasing list per
    /// interval.
    pub fn from_nodes(domain: Domain<T>, nodes_per_interval: Vec<Vec<T>>) -> Result<Self> {
        if nodes_per_interval.len() != domain.intervals().len() {
            return Err(Error::InvalidMesh(
                "need one node list per interval".into(),
            ));
        }
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for (&(a, b), interior) in domain.intervals().iter().zip(&nodes_per_interval) {
            if interior.is_empty() {
                return Err(Error::InvalidMesh(
                    "each interval needs at least one interior node".into(),
                ));
            }
            let mut prev = a;
            for &x in interior {
                if !(prev < x && x < b) {
                    return Err(Error::InvalidMesh(
                        "nodes must be strictly increasing and strictly interior".into(),
                    ));
                }
                prev = x;
            }
            let base = nodes.len();
            nodes.extend_from_slice(interior);
            let m = interior.len();
            elements.push(Element {
                a,
                b: interior[0],
                left_dof: None,
                right_dof: Some(base),
            });
            for i in 0..m - 1 {
                elements.push(Element {
                    a: interior[i],
                    b: interior[i + 1],
                    left_dof: Some(base + i),
                    right_dof: Some(base + i + 1),
                });
            }
            elements.push(Element {
                a: interior[m - 1],
                b,
                left_dof: Some(base + m - 1),
                right_dof: None,
            });
        }
        Ok(Mesh {
            domain,
            nodes,
            elements,
        })
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    /// Maximum element width.
    pub fn h(&self) -> T {
        self.elements
            .iter()
            .fold(T::zero(), |acc, e| acc.max(e.width()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_reversed_interval() {
        assert!(Domain::interval(1.0f64, 0.0).is_err());
    }

    #[test]
    fn rejects_overlapping_intervals() {
        assert!(Domain::new(vec![(-1.0f64, 0.5), (0.0, 1.0)]).is_err());
        assert!(Domain::new(vec![(-1.0f64, 0.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn complement_of_two_intervals() {
        let d = Domain::new(vec![(-1.0f64, 0.0), (0.5, 1.0)]).unwrap();
        let c = d.complement_components();
        assert_eq!(c.len(), 3);
        assert_eq!(c[1], (Some(0.0), Some(0.5)));
        assert!(c[0].0.is_none() && c[2].1.is_none());
    }

    #[test]
    fn uniform_mesh_layout() {
        let d = Domain::interval(-1.0f64, 1.0).unwrap();
        let m = Mesh::uniform(d, 8).unwrap();
        assert_eq!(m.n_dofs(), 7);
        assert_eq!(m.elements().len(), 8);
        assert!((m.h() - 0.25).abs() < 1e-15);
        assert!(m.elements()[0].left_dof.is_none());
        assert!(m.elements()[7].right_dof.is_none());
        for e in m.elements() {
            assert!(e.width() > 0.0);
        }
    }

    #[test]
    fn strict_containment() {
        let a = Domain::interval(-0.5f64, 0.5).unwrap();
        let b = Domain::interval(-1.0f64, 1.0).unwrap();
        assert!(a.strictly_inside(&b, 1e-12));
        assert!(!b.strictly_inside(&a, 1e-12));
        assert!(!b.strictly_inside(&b.clone(), 1e-12));
    }
}
