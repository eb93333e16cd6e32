//! Uniform grid on (0, 1), the distance-to-boundary function and the
//! subregions used by the control and Carleman machinery.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform interior-node grid on the unit interval with homogeneous Dirichlet
/// data at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    /// `delta[i] = min(x_i, 1 - x_i)`.
    pub delta: Vec<f64>,
}

impl Mesh1D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidMesh(n));
        }
        let h = 1.0 / (n as f64 + 1.0);
        // Index arithmetic keeps delta exactly symmetric.
        let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let delta = (1..=n)
            .map(|i| {
                let j = i.min(n + 1 - i);
                j as f64 * h
            })
            .collect();
        Ok(Self { n, h, nodes, delta })
    }

    /// Distance to the boundary at an arbitrary point of [0, 1].
    pub fn delta_at(x: f64) -> f64 {
        x.min(1.0 - x)
    }

    /// Trapezoid weights for interior-node functions vanishing at 0 and 1.
    pub fn quad_weights(&self) -> Vec<f64> {
        vec![self.h; self.n]
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.h * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Indices of the nodes lying strictly inside `(lo, hi)`.
    pub fn indices_in(&self, iv: Interval) -> Vec<usize> {
        self.nodes.iter().enumerate().filter(|(_, &x)| x > iv.lo && x < iv.hi).map(|(i, _)| i).collect()
    }
}

/// Build a mesh with `n` interior nodes.
pub fn build_mesh(n: usize) -> Result<Mesh1D> {
    Mesh1D::new(n)
}

/// Open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Node index sets for the control region and the Carleman subregions.
///
/// * `omega`: control region.
/// * `omega0`: observation core, compactly inside `omega`.
/// * `boundary_layer`: nodes with `delta < r0`.
/// * `o_set`: complement of `omega0` and of the closed boundary layer.
/// * `o_tilde`: complement of the closed boundary layer.
/// * `level_set`: the two nodes nearest `delta = r0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub omega_iv: Interval,
    pub omega0_iv: Interval,
    pub r0: f64,
    pub omega: Vec<usize>,
    pub omega0: Vec<usize>,
    pub boundary_layer: Vec<usize>,
    pub o_set: Vec<usize>,
    pub o_tilde: Vec<usize>,
    pub level_set: Vec<usize>,
    omega_mask: Vec<bool>,
}

impl RegionMasks {
    /// 0/1 indicator of the control region, node by node.
    pub fn omega_indicator(&self) -> Vec<f64> {
        self.omega_mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn in_omega(&self, i: usize) -> bool {
        self.omega_mask[i]
    }

    /// Control region covering every node. Carleman subregions keep the
    /// nominal `omega0` and `r0`.
    pub fn with_full_control(mut self) -> Self {
        self.omega_iv = Interval::new(0.0, 1.0);
        self.omega = (0..self.omega_mask.len()).collect();
        self.omega_mask.iter_mut().for_each(|b| *b = true);
        self
    }

    /// Control region with no nodes.
    pub fn with_empty_control(mut self) -> Self {
        self.omega.clear();
        self.omega_mask.iter_mut().for_each(|b| *b = false);
        self
    }
}

/// Build the region masks for `omega0 ⊂⊂ omega ⊂ (0,1)` and boundary layer radius `r0`.
pub fn build_regions(mesh: &Mesh1D, omega: Interval, omega0: Interval, r0: f64) -> Result<RegionMasks> {
    let ok = 0.0 < omega.lo && omega.lo < omega0.lo && omega0.lo < omega0.hi && omega0.hi < omega.hi && omega.hi < 1.0;
    if !ok {
        return Err(Error::RegionNesting(format!(
            "need 0 < a < a0 < b0 < b < 1, got omega = ({}, {}), omega0 = ({}, {})",
            omega.lo, omega.hi, omega0.lo, omega0.hi
        )));
    }
    let gap = (omega0.lo - omega.lo).min(omega.hi - omega0.hi);
    if gap < 2.0 * mesh.h {
        return Err(Error::RegionNesting(format!(
            "omega0 must sit at least 2h = {} inside omega (gap {gap})",
            2.0 * mesh.h
        )));
    }
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("r0 must be positive, got {r0}")));
    }
    let limit = omega0.lo.min(1.0 - omega0.hi);
    if r0 >= limit {
        return Err(Error::R0Overlap { r0, limit });
    }

    let omega_mask: Vec<bool> = mesh.nodes.iter().map(|&x| omega.contains(x)).collect();
    let omega_idx = mesh.indices_in(omega);
    let omega0_idx = mesh.indices_in(omega0);
    let boundary_layer: Vec<usize> = (0..mesh.n).filter(|&i| mesh.delta[i] < r0).collect();
    // Closed sets: delta <= r0 and [a0, b0].
    let o_tilde: Vec<usize> = (0..mesh.n).filter(|&i| mesh.delta[i] > r0).collect();
    let o_set: Vec<usize> = o_tilde
        .iter()
        .copied()
        .filter(|&i| {
            let x = mesh.nodes[i];
            !(x >= omega0.lo && x <= omega0.hi)
        })
        .collect();

    let mut level_set = Vec::new();
    for side in [r0, 1.0 - r0] {
        let nearest = (0..mesh.n)
            .min_by(|&a, &b| (mesh.nodes[a] - side).abs().total_cmp(&(mesh.nodes[b] - side).abs()))
            .expect("non-empty mesh");
        level_set.push(nearest);
    }

    Ok(RegionMasks {
        omega_iv: omega,
        omega0_iv: omega0,
        r0,
        omega: omega_idx,
        omega0: omega0_idx,
        boundary_layer,
        o_set,
        o_tilde,
        level_set,
        omega_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_meshes_closed_form() {
        let m = build_mesh(3).unwrap();
        assert_eq!(m.nodes, vec![0.25, 0.5, 0.75]);
        assert_eq!(m.delta, vec![0.25, 0.5, 0.25]);

        let m = build_mesh(4).unwrap();
        for (d, e) in m.delta.iter().zip([0.2, 0.4, 0.4, 0.2]) {
            assert_abs_diff_eq!(*d, e, epsilon = 1e-15);
        }

        let m = build_mesh(999).unwrap();
        let min = m.delta.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min, 1e-3, epsilon = 1e-15);
        assert_eq!(m.delta[0], m.delta[998]);
    }

    #[test]
    fn too_few_nodes() {
        assert_eq!(build_mesh(2), Err(Error::InvalidMesh(2)));
        assert!(build_mesh(0).is_err());
    }

    #[test]
    fn mesh_invariants() {
        for n in [3, 10, 101, 1000] {
            let m = build_mesh(n).unwrap();
            assert!(m.h * (n as f64) < 1.0);
            assert!(m.nodes.windows(2).all(|w| w[0] < w[1]));
            for i in 0..n {
                assert!(m.delta[i] > 0.0 && m.delta[i] <= 0.5);
                assert_eq!(m.delta[i], m.delta[n - 1 - i]);
            }
        }
    }

    #[test]
    fn quadrature() {
        let m = build_mesh(9).unwrap();
        let w: f64 = m.quad_weights().iter().sum();
        assert_abs_diff_eq!(w, 0.9, epsilon = 1e-14);

        let m = build_mesh(999).unwrap();
        let f: Vec<f64> = m.nodes.iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
        assert!((m.inner(&f, &f) - 0.5).abs() < 1e-5);
        assert_eq!(m.inner(&vec![0.0; 999], &f), 0.0);
    }

    #[test]
    fn quadrature_total_tends_to_one() {
        for n in [10, 100, 1000] {
            let m = build_mesh(n).unwrap();
            let s: f64 = m.quad_weights().iter().sum();
            assert!((1.0 - s).abs() <= m.h + 1e-12);
        }
    }

    #[test]
    fn regions_default() {
        let m = build_mesh(99).unwrap();
        let r = build_regions(&m, Interval::new(0.3, 0.7), Interval::new(0.4, 0.6), 0.1).unwrap();
        for &i in &r.boundary_layer {
            let x = m.nodes[i];
            assert!(!(0.1 - 1e-12..=0.9 + 1e-12).contains(&x));
        }
        // x = 0.01..0.09 and 0.91..0.99
        assert_eq!(r.boundary_layer.len(), 18);
        assert!(r.boundary_layer.iter().all(|i| !r.omega0.contains(i)));
        // O = O_tilde \ omega0 (closed)
        for &i in &r.o_set {
            assert!(r.o_tilde.contains(&i));
            assert!(!r.omega0.contains(&i));
        }
        // reversing node order maps the boundary layer onto itself
        let mut rev: Vec<usize> = r.boundary_layer.iter().map(|&i| m.n - 1 - i).collect();
        rev.sort();
        assert_eq!(rev, r.boundary_layer);
        assert_eq!(r.level_set.len(), 2);
        assert!((m.nodes[r.level_set[0]] - 0.1).abs() <= m.h);
    }

    #[test]
    fn regions_errors() {
        let m = build_mesh(99).unwrap();
        let e = build_regions(&m, Interval::new(0.3, 0.7), Interval::new(0.4, 0.6), 0.5);
        assert!(matches!(e, Err(Error::R0Overlap { .. })));
        let e = build_regions(&m, Interval::new(0.3, 0.7), Interval::new(0.2, 0.6), 0.1);
        assert!(matches!(e, Err(Error::RegionNesting(_))));
        // omega0 too close to the edge of omega
        let e = build_regions(&m, Interval::new(0.3, 0.7), Interval::new(0.305, 0.6), 0.1);
        assert!(matches!(e, Err(Error::RegionNesting(_))));
    }
}
