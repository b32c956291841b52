//! Finite-difference grids: the fundamental-domain surface grid whose
//! boundary closure runs through deck transformations, and a Dirichlet disk
//! patch sharing the same stencil kernels.

mod fields;
mod mms;
pub(crate) mod ops;
mod patch;

pub use fields::{ScalarField, SymTensorField};
pub use mms::{observed_order, MmsJet, MmsProblem};
pub use ops::Domain;
pub use patch::PatchGrid;

pub(crate) use ops::{covariant_hessian, node_derivs, NEIGHBOR_OFFSETS};

use crate::error::CoreError;
use crate::group::FuchsianGroup;
use crate::mobius::MobiusMap;
use crate::rho::RhoMetric;
use crate::sym2::Sym2;
use num_complex::Complex64;
use std::collections::HashMap;

/// Collar half-width in units of h. Must cover the stencil reach (sqrt2) plus
/// the far corner of a centered 4x4 interpolation block (2 sqrt2).
const COLLAR_FACTOR: f64 = 4.5;

/// Default word budget when reducing ghost nodes into the octagon. Ghosts in
/// the vertex wedges need four letters (eight octagon copies meet there);
/// the count of such nodes is resolution-independent.
pub const DEFAULT_REDUCE_BUDGET: usize = 4;

/// The collar is measured in euclidean units, so near the octagon vertices
/// (radius ~0.841) the ghost ring reaches radius ~0.841 + 6h. Capping h keeps
/// every node safely inside the unit disk.
const MAX_H: f64 = 0.02;

/// Closure data for one ghost node: where it reduces to, through which deck
/// map, and the 4x4 interpolation stencil at the reduced point.
#[derive(Debug, Clone)]
pub struct GhostLink {
    /// The ghost node itself.
    pub source: Complex64,
    /// gamma(source), inside the closed octagon.
    pub reduced: Complex64,
    pub map: MobiusMap,
    /// gamma'(source); |deriv| >= 1 since reduction contracts toward 0.
    pub deriv: Complex64,
    pub word_length: usize,
    /// Interior node indices of the bicubic block around `reduced`.
    pub taps: [u32; 16],
    /// Tensor-product cubic Lagrange weights; they sum to 1.
    pub weights: [f64; 16],
}

/// Lattice-sampled fundamental domain plus collar, with ghost closure.
/// Extended node indices list interior nodes first, then ghosts.
#[derive(Debug)]
pub struct SurfaceGrid {
    h: f64,
    n_interior: usize,
    n_octagon: usize,
    nodes: Vec<Complex64>,
    node_ij: Vec<(i32, i32)>,
    neighbors: Vec<[u32; 8]>,
    ghost_links: Vec<GhostLink>,
    e2f: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    quad_w: Vec<f64>,
    index_of: HashMap<(i32, i32), u32>,
}

impl SurfaceGrid {
    pub fn build(group: &FuchsianGroup, h: f64) -> Result<SurfaceGrid, CoreError> {
        Self::build_with_budget(group, h, DEFAULT_REDUCE_BUDGET)
    }

    pub fn build_with_budget(
        group: &FuchsianGroup,
        h: f64,
        budget: usize,
    ) -> Result<SurfaceGrid, CoreError> {
        if !(h > 0.0 && h <= MAX_H) {
            return Err(CoreError::BadStep { h, max: MAX_H });
        }
        let collar = COLLAR_FACTOR * h;
        // Interior nodes reach radius vertex + collar; the ghost ring adds one
        // diagonal step. Two spare cells keep every neighbor probe on-lattice.
        let vertex_radius = 2f64.powf(-0.25);
        let span = ((vertex_radius + collar) / h).ceil() as i32 + 3;
        let dim = (2 * span + 1) as usize;
        let flat = |i: i32, j: i32| ((j + span) as usize) * dim + ((i + span) as usize);

        // Pass 1: classify lattice points. 0 = absent, 1 = interior candidate.
        let mut class = vec![0u8; dim * dim];
        for j in -span..=span {
            for i in -span..=span {
                let z = Complex64::new(i as f64 * h, j as f64 * h);
                if group.octagon_distance(z) <= collar {
                    class[flat(i, j)] = 1;
                }
            }
        }

        // Pass 2: interior nodes in scan order, then ghost nodes (absent
        // lattice points adjacent to an interior node).
        let mut nodes = Vec::new();
        let mut node_ij = Vec::new();
        let mut index_of: HashMap<(i32, i32), u32> = HashMap::new();
        for j in -span..=span {
            for i in -span..=span {
                if class[flat(i, j)] == 1 {
                    index_of.insert((i, j), nodes.len() as u32);
                    nodes.push(Complex64::new(i as f64 * h, j as f64 * h));
                    node_ij.push((i, j));
                }
            }
        }
        let n_interior = nodes.len();
        for j in -span..=span {
            for i in -span..=span {
                if class[flat(i, j)] != 0 {
                    continue;
                }
                let touches_interior = NEIGHBOR_OFFSETS.iter().any(|&(di, dj)| {
                    let (ni, nj) = (i + di, j + dj);
                    ni.abs() <= span && nj.abs() <= span && class[flat(ni, nj)] == 1
                });
                if touches_interior {
                    index_of.insert((i, j), nodes.len() as u32);
                    nodes.push(Complex64::new(i as f64 * h, j as f64 * h));
                    node_ij.push((i, j));
                }
            }
        }

        // Neighbor table for interior nodes.
        let mut neighbors = Vec::with_capacity(n_interior);
        for idx in 0..n_interior {
            let (i, j) = node_ij[idx];
            let mut row = [0u32; 8];
            for (slot, &(di, dj)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                row[slot] = *index_of.get(&(i + di, j + dj)).ok_or_else(|| {
                    CoreError::GhostBlock {
                        x: (i + di) as f64 * h,
                        y: (j + dj) as f64 * h,
                    }
                })?;
            }
            neighbors.push(row);
        }

        // Ghost links.
        let mut ghost_links = Vec::with_capacity(nodes.len() - n_interior);
        for idx in n_interior..nodes.len() {
            let z = nodes[idx];
            let (reduced, map, word_length) = group.reduce_to_domain(z, budget)?;
            debug_assert!(group.octagon_depth(reduced) >= -1e-9);
            let (taps, weights) =
                block_stencil(h, &index_of, reduced, Some(n_interior)).map_err(|_| {
                    CoreError::GhostBlock { x: z.re, y: z.im }
                })?;
            let wsum: f64 = weights.iter().sum();
            debug_assert!((wsum - 1.0).abs() <= 1e-12);
            ghost_links.push(GhostLink {
                source: z,
                reduced,
                map,
                deriv: map.derivative(z),
                word_length,
                taps,
                weights,
            });
        }

        // rho data and quadrature weights per interior node.
        let rho = RhoMetric;
        let mut e2f = Vec::with_capacity(n_interior);
        let mut f1 = Vec::with_capacity(n_interior);
        let mut f2 = Vec::with_capacity(n_interior);
        let mut quad_w = Vec::with_capacity(n_interior);
        let mut n_octagon = 0;
        for idx in 0..n_interior {
            let z = nodes[idx];
            e2f.push(rho.e2f(z));
            let g = rho.f_grad(z);
            f1.push(g.0);
            f2.push(g.1);
            let depth = group.octagon_depth(z);
            if depth >= 0.0 {
                n_octagon += 1;
            }
            quad_w.push(cell_weight(group, z, h, depth));
        }

        Ok(SurfaceGrid {
            h,
            n_interior,
            n_octagon,
            nodes,
            node_ij,
            neighbors,
            ghost_links,
            e2f,
            f1,
            f2,
            quad_w,
            index_of,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Interior nodes lying inside the octagon proper (not the collar).
    pub fn n_octagon(&self) -> usize {
        self.n_octagon
    }

    pub fn node(&self, idx: usize) -> Complex64 {
        self.nodes[idx]
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn node_index(&self, idx: usize) -> (i32, i32) {
        self.node_ij[idx]
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        idx < self.n_interior
    }

    pub fn ghost_links(&self) -> &[GhostLink] {
        &self.ghost_links
    }

    pub fn neighbor_rows(&self) -> &[[u32; 8]] {
        &self.neighbors
    }

    pub fn rho_at(&self, idx: usize) -> (f64, f64, f64) {
        (self.e2f[idx], self.f1[idx], self.f2[idx])
    }

    pub fn quad_weight(&self, idx: usize) -> f64 {
        self.quad_w[idx]
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

    /// Values at all extended nodes: interior values, then ghost values
    /// interpolated at the reduced points (scalar fields are deck-invariant).
    pub fn extend_scalar(&self, u: &ScalarField) -> Result<Vec<f64>, CoreError> {
        self.check_len(u.len())?;
        Ok(ops::extended(self, &u.values))
    }

    /// Extended tensor values; ghost entries are pulled back through the deck
    /// map: T(z) = J^T T(gamma z) J with J the Jacobian of gamma at z.
    pub fn extend_tensor(&self, t: &SymTensorField) -> Result<Vec<Sym2>, CoreError> {
        self.check_len(t.len())?;
        let mut ext = Vec::with_capacity(self.n_nodes());
        for i in 0..self.n_interior {
            ext.push(t.at(i));
        }
        for link in &self.ghost_links {
            let mut at_reduced = Sym2::ZERO;
            for (tap, w) in link.taps.iter().zip(&link.weights) {
                at_reduced = at_reduced + t.at(*tap as usize) * *w;
            }
            ext.push(at_reduced.conformal_pullback(link.deriv));
        }
        Ok(ext)
    }

    /// Delta_rho u = e^{-2f} (u_{,11} + u_{,22}) per interior node.
    pub fn laplacian_rho(&self, u: &ScalarField) -> Result<ScalarField, CoreError> {
        let ext = self.extend_scalar(u)?;
        let flat = ops::flat_laplacian(self, &ext);
        ScalarField::new(
            flat.iter()
                .zip(&self.e2f)
                .map(|(l, e)| l / e)
                .collect(),
        )
    }

    /// Covariant Hessian u_{;ab} per interior node.
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

    /// Extended-node index at lattice coordinates, if that point is a node.
    pub fn lattice_index(&self, i: i32, j: i32) -> Option<usize> {
        self.index_of.get(&(i, j)).map(|&v| v as usize)
    }

    /// \int u dmu_rho over the octagon, by clipped node cells.
    pub fn integrate_rho(&self, u: &ScalarField) -> Result<f64, CoreError> {
        self.check_len(u.len())?;
        Ok(u
            .values
            .iter()
            .zip(&self.e2f)
            .zip(&self.quad_w)
            .map(|((u, e), w)| u * e * w)
            .sum())
    }

    /// Bicubic interpolation of an interior-node field at z (octagon or collar).
    pub fn interpolate(&self, u: &ScalarField, z: Complex64) -> Result<f64, CoreError> {
        let ext = self.extend_scalar(u)?;
        self.interpolate_extended(&ext, z)
    }

    /// Same, reusing an already-extended value array.
    pub fn interpolate_extended(&self, ext: &[f64], z: Complex64) -> Result<f64, CoreError> {
        if ext.len() != self.n_nodes() {
            return Err(CoreError::FieldLength {
                got: ext.len(),
                expected: self.n_nodes(),
            });
        }
        let (taps, weights) = block_stencil(self.h, &self.index_of, z, None)
            .map_err(|_| CoreError::OutsideGrid { x: z.re, y: z.im })?;
        Ok(taps
            .iter()
            .zip(&weights)
            .map(|(t, w)| ext[*t as usize] * w)
            .sum())
    }
}

impl ops::Domain for SurfaceGrid {
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

    fn seed_closure(&self, _ext: &mut [f64]) {}

    fn close_scalar(&self, ext: &mut [f64]) {
        for (k, link) in self.ghost_links.iter().enumerate() {
            let mut v = 0.0;
            for (tap, w) in link.taps.iter().zip(&link.weights) {
                v += ext[*tap as usize] * w;
            }
            ext[self.n_interior + k] = v;
        }
    }

    fn expand_column(&self, col: u32, w: f64, push: &mut dyn FnMut(u32, f64)) {
        if (col as usize) < self.n_interior {
            push(col, w);
        } else {
            let link = &self.ghost_links[col as usize - self.n_interior];
            for (tap, wt) in link.taps.iter().zip(&link.weights) {
                push(*tap, w * wt);
            }
        }
    }
}

/// Cubic Lagrange weights on stencil offsets {-1, 0, 1, 2} at parameter t
/// (t = 0 at the second stencil node).
fn lagrange_cubic(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -t * (t + 1.0) * (t - 2.0) / 2.0,
        t * (t + 1.0) * (t - 1.0) / 6.0,
    ]
}

/// 4x4 tensor-product cubic block around point z. When `interior_below` is
/// set, taps must be interior nodes (indices below the bound); the block may
/// shift by one cell to fit. Tap order: y-major over the block.
fn block_stencil(
    h: f64,
    index_of: &HashMap<(i32, i32), u32>,
    z: Complex64,
    interior_below: Option<usize>,
) -> Result<([u32; 16], [f64; 16]), ()> {
    let base_x = (z.re / h).floor() as i32;
    let base_y = (z.im / h).floor() as i32;
    const SHIFTS: [i32; 3] = [0, -1, 1];
    for &sy in &SHIFTS {
        for &sx in &SHIFTS {
            let bx = base_x + sx;
            let by = base_y + sy;
            let mut taps = [0u32; 16];
            let mut ok = true;
            'gather: for b in 0..4 {
                for a in 0..4 {
                    let key = (bx - 1 + a as i32, by - 1 + b as i32);
                    match index_of.get(&key) {
                        Some(&idx)
                            if interior_below.is_none_or(|n| (idx as usize) < n) =>
                        {
                            taps[b * 4 + a] = idx;
                        }
                        _ => {
                            ok = false;
                            break 'gather;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let tx = z.re / h - bx as f64;
            let ty = z.im / h - by as f64;
            let wx = lagrange_cubic(tx);
            let wy = lagrange_cubic(ty);
            let mut weights = [0.0; 16];
            for b in 0..4 {
                for a in 0..4 {
                    weights[b * 4 + a] = wx[a] * wy[b];
                }
            }
            return Ok((taps, weights));
        }
    }
    Err(())
}

/// Euclidean area of the node cell clipped to the octagon, by 4x4 subsampling
/// of boundary-straddling cells.
fn cell_weight(group: &FuchsianGroup, z: Complex64, h: f64, depth: f64) -> f64 {
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    if depth >= half_diag + 1e-12 {
        return h * h;
    }
    if depth <= -half_diag - 1e-12 {
        return 0.0;
    }
    let mut inside = 0;
    for a in 0..4 {
        for b in 0..4 {
            let p = z + Complex64::new(
                (-0.5 + (a as f64 + 0.5) / 4.0) * h,
                (-0.5 + (b as f64 + 0.5) / 4.0) * h,
            );
            if group.octagon_depth(p) >= 0.0 {
                inside += 1;
            }
        }
    }
    h * h * inside as f64 / 16.0
}

#[cfg(test)]
mod tests;
