//! Euclidean-disk Dirichlet patch: same stencils as the surface grid, no
//! group machinery. Boundary nodes carry fixed values.

use super::ops::{self, Domain, NEIGHBOR_OFFSETS};
use super::{covariant_hessian, node_derivs, ScalarField, SymTensorField};
use crate::error::CoreError;
use crate::rho::RhoMetric;
use num_complex::Complex64;
use std::collections::HashMap;

/// Lattice inside a Euclidean disk of radius `r_patch`. Interior nodes have
/// all eight stencil neighbors in the lattice; the rest are boundary nodes
/// with Dirichlet values. Extended indices: interior first, then boundary.
#[derive(Debug)]
pub struct PatchGrid {
    h: f64,
    r_patch: f64,
    n_interior: usize,
    nodes: Vec<Complex64>,
    neighbors: Vec<[u32; 8]>,
    e2f: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    dirichlet: Vec<f64>,
}

impl PatchGrid {
    /// Builds the patch; `bc` supplies the Dirichlet value at boundary nodes.
    pub fn build(
        r_patch: f64,
        h: f64,
        bc: impl Fn(Complex64) -> f64,
    ) -> Result<PatchGrid, CoreError> {
        if !(r_patch > 4.0 * h && r_patch <= 0.5) {
            return Err(CoreError::InvalidInput(format!(
                "patch radius {r_patch} outside (4h, 0.5]"
            )));
        }
        if h <= 0.0 {
            return Err(CoreError::BadStep { h, max: 0.5 });
        }
        let span = (r_patch / h).floor() as i32;
        let in_disk = |i: i32, j: i32| {
            let z = Complex64::new(i as f64 * h, j as f64 * h);
            z.norm_sqr() <= r_patch * r_patch
        };
        let is_interior = |i: i32, j: i32| {
            in_disk(i, j)
                && NEIGHBOR_OFFSETS
                    .iter()
                    .all(|&(di, dj)| in_disk(i + di, j + dj))
        };

        let mut nodes = Vec::new();
        let mut node_ij = Vec::new();
        let mut index_of: HashMap<(i32, i32), u32> = HashMap::new();
        let mut n_interior = 0;
        for pass in 0..2 {
            for j in -span..=span {
                for i in -span..=span {
                    if !in_disk(i, j) {
                        continue;
                    }
                    let interior = is_interior(i, j);
                    if (pass == 0) == interior {
                        index_of.insert((i, j), nodes.len() as u32);
                        nodes.push(Complex64::new(i as f64 * h, j as f64 * h));
                        node_ij.push((i, j));
                    }
                }
            }
            if pass == 0 {
                n_interior = nodes.len();
                if n_interior == 0 {
                    return Err(CoreError::InvalidInput(
                        "patch has no interior nodes".into(),
                    ));
                }
            }
        }

        let mut neighbors = Vec::with_capacity(n_interior);
        for idx in 0..n_interior {
            let (i, j) = node_ij[idx];
            let mut row = [0u32; 8];
            for (slot, &(di, dj)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                row[slot] = index_of[&(i + di, j + dj)];
            }
            neighbors.push(row);
        }

        let rho = RhoMetric;
        let mut e2f = Vec::with_capacity(n_interior);
        let mut f1 = Vec::with_capacity(n_interior);
        let mut f2 = Vec::with_capacity(n_interior);
        for idx in 0..n_interior {
            let z = nodes[idx];
            e2f.push(rho.e2f(z));
            let g = rho.f_grad(z);
            f1.push(g.0);
            f2.push(g.1);
        }
        let dirichlet = nodes[n_interior..].iter().map(|&z| bc(z)).collect();

        Ok(PatchGrid {
            h,
            r_patch,
            n_interior,
            nodes,
            neighbors,
            e2f,
            f1,
            f2,
            dirichlet,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn r_patch(&self) -> f64 {
        self.r_patch
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, idx: usize) -> Complex64 {
        self.nodes[idx]
    }

    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet
    }

    fn check_len(&self, len: usize) -> Result<(), CoreError> {
        if len != self.n_interior {
            return Err(CoreError::FieldLength {
                got: len,
                expected: self.n_interior,
            });
        }
        Ok(())
    }

    pub fn extend_scalar(&self, u: &ScalarField) -> Result<Vec<f64>, CoreError> {
        self.check_len(u.len())?;
        Ok(ops::extended(self, &u.values))
    }

    pub fn laplacian_rho(&self, u: &ScalarField) -> Result<ScalarField, CoreError> {
        let ext = self.extend_scalar(u)?;
        let flat = ops::flat_laplacian(self, &ext);
        ScalarField::new(flat.iter().zip(&self.e2f).map(|(l, e)| l / e).collect())
    }

    pub fn hessian_rho(&self, u: &ScalarField) -> Result<SymTensorField, CoreError> {
        let ext = self.extend_scalar(u)?;
        let n = self.n_interior;
        let mut out = SymTensorField::zeros(n);
        for i in 0..n {
            let d = node_derivs(&ext, &self.neighbors[i], i, self.h);
            let (h11, h22, h12) = covariant_hessian(&d, self.f1[i], self.f2[i]);
            out.t11[i] = h11;
            out.t12[i] = h12;
            out.t22[i] = h22;
        }
        Ok(out)
    }
}

impl Domain for PatchGrid {
    fn h(&self) -> f64 {
        self.h
    }

    fn n_interior(&self) -> usize {
        self.n_interior
    }

    fn n_total(&self) -> usize {
        self.nodes.len()
    }

    fn neighbors(&self) -> &[[u32; 8]] {
        &self.neighbors
    }

    fn e2f(&self) -> &[f64] {
        &self.e2f
    }

    fn f_grad1(&self) -> &[f64] {
        &self.f1
    }

    fn f_grad2(&self) -> &[f64] {
        &self.f2
    }

    fn seed_closure(&self, ext: &mut [f64]) {
        ext[self.n_interior..].copy_from_slice(&self.dirichlet);
    }

    fn close_scalar(&self, _ext: &mut [f64]) {}

    fn expand_column(&self, col: u32, w: f64, push: &mut dyn FnMut(u32, f64)) {
        if (col as usize) < self.n_interior {
            push(col, w);
        }
    }
}
