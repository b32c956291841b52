//! Shared 9-point stencil kernels and the domain abstraction that lets the
//! surface grid (ghost closure) and the Dirichlet patch run identical code.

/// Neighbor slots in a node's 3x3 stencil, as extended-index entries.
pub(crate) const W: usize = 0;
pub(crate) const E: usize = 1;
pub(crate) const S: usize = 2;
pub(crate) const N: usize = 3;
pub(crate) const SW: usize = 4;
pub(crate) const SE: usize = 5;
pub(crate) const NW: usize = 6;
pub(crate) const NE: usize = 7;

/// Offsets (di, dj) matching the neighbor slots above.
pub(crate) const NEIGHBOR_OFFSETS: [(i32, i32); 8] = [
    (-1, 0),
    (1, 0),
    (0, -1),
    (0, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (1, 1),
];

/// Centered first and second differences of an extended value array at
/// interior node `i` with neighbor table row `nb`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeDerivs {
    pub u: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
}

#[inline]
pub(crate) fn node_derivs(ext: &[f64], nb: &[u32; 8], i: usize, h: f64) -> NodeDerivs {
    let u = ext[i];
    let w = ext[nb[W] as usize];
    let e = ext[nb[E] as usize];
    let s = ext[nb[S] as usize];
    let n = ext[nb[N] as usize];
    let sw = ext[nb[SW] as usize];
    let se = ext[nb[SE] as usize];
    let nw = ext[nb[NW] as usize];
    let ne = ext[nb[NE] as usize];
    let inv_h = 1.0 / h;
    let inv_h2 = inv_h * inv_h;
    NodeDerivs {
        u,
        d1: (e - w) * 0.5 * inv_h,
        d2: (n - s) * 0.5 * inv_h,
        d11: (e - 2.0 * u + w) * inv_h2,
        d22: (n - 2.0 * u + s) * inv_h2,
        d12: (ne - nw - se + sw) * 0.25 * inv_h2,
    }
}

/// Covariant Hessian components of the curvature -1/2 conformal metric from
/// flat differences and the analytic gradient of f:
/// u_{;11} = u_{,11} - (f1 u1 - f2 u2), u_{;22} = u_{,22} + (f1 u1 - f2 u2),
/// u_{;12} = u_{,12} - (f1 u2 + f2 u1).
#[inline]
pub(crate) fn covariant_hessian(d: &NodeDerivs, f1: f64, f2: f64) -> (f64, f64, f64) {
    let radial = f1 * d.d1 - f2 * d.d2;
    let cross = f1 * d.d2 + f2 * d.d1;
    (d.d11 - radial, d.d22 + radial, d.d12 - cross)
}

/// A grid the elliptic operators and the Newton solver can run on: interior
/// nodes carry unknowns; the extended tail (ghost or Dirichlet nodes) is
/// closed from them. Interior nodes occupy extended indices 0..n_interior.
pub trait Domain {
    fn h(&self) -> f64;
    fn n_interior(&self) -> usize;
    fn n_total(&self) -> usize;
    fn neighbors(&self) -> &[[u32; 8]];
    /// rho data per interior node.
    fn e2f(&self) -> &[f64];
    fn f_grad1(&self) -> &[f64];
    fn f_grad2(&self) -> &[f64];
    /// Writes the tail entries that do not depend on the interior values
    /// (Dirichlet data); a no-op for the surface grid.
    fn seed_closure(&self, ext: &mut [f64]);
    /// Recomputes the dependent tail entries from the interior head
    /// (ghost interpolation); a no-op for the Dirichlet patch.
    fn close_scalar(&self, ext: &mut [f64]);
    /// Expands a coupling to extended column `col` with weight `w` into
    /// couplings to interior columns only. Dirichlet columns vanish; ghost
    /// columns spread over their interpolation taps.
    fn expand_column(&self, col: u32, w: f64, push: &mut dyn FnMut(u32, f64));
}

/// Builds the extended value array for interior values `u` on `d`.
pub(crate) fn extended<D: Domain + ?Sized>(d: &D, u: &[f64]) -> Vec<f64> {
    let mut ext = vec![0.0; d.n_total()];
    ext[..u.len()].copy_from_slice(u);
    d.seed_closure(&mut ext);
    d.close_scalar(&mut ext);
    ext
}

/// Flat Laplacian u_{,11} + u_{,22} per interior node.
pub(crate) fn flat_laplacian<D: Domain + ?Sized>(d: &D, ext: &[f64]) -> Vec<f64> {
    let h = d.h();
    d.neighbors()
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let nd = node_derivs(ext, nb, i, h);
            nd.d11 + nd.d22
        })
        .collect()
}
