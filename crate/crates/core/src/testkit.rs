//! Shared lazily-built fixtures for unit tests. Heavy objects (grids, series
//! caches) are constructed once per test binary.

use crate::grid::SurfaceGrid;
use crate::group::{ElementTable, FuchsianGroup};
use crate::theta::ThetaCache;
use std::sync::OnceLock;

pub(crate) fn bolza() -> &'static FuchsianGroup {
    static G: OnceLock<FuchsianGroup> = OnceLock::new();
    G.get_or_init(|| FuchsianGroup::bolza().unwrap())
}

/// Coarse surface grid, h = 0.02.
pub(crate) fn grid_002() -> &'static SurfaceGrid {
    static G: OnceLock<SurfaceGrid> = OnceLock::new();
    G.get_or_init(|| SurfaceGrid::build(bolza(), 0.02).unwrap())
}

/// Series cache on the coarse grid at word depth 4.
pub(crate) fn cache_002() -> &'static ThetaCache {
    static C: OnceLock<ThetaCache> = OnceLock::new();
    C.get_or_init(|| ThetaCache::build(grid_002(), &ElementTable::enumerate(bolza(), 4)))
}
