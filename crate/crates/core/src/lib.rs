//! Numerical laboratory for the Monge-Ampère parametrization of genus-2
//! hyperbolic metrics over the Bolza surface.
//!
//! The chart is the unit disk with the curvature -1/2 metric
//! `rho = e^{2f} (dx^2 + dy^2)`, `e^{2f} = 8/(1-|z|^2)^2`. Transverse-traceless
//! seeds come from truncated Poincaré theta series; the quasilinear equation
//! `Δ_ρ u - u + sqrt(1 + 2|ξ|^2) = 0` is solved by damped Newton on a
//! fundamental-domain grid whose boundary closure uses the deck group.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod group;
pub mod linsolve;
pub mod report;
pub mod mobius;
pub mod rho;
pub mod solver;
pub mod sym2;
#[cfg(test)]
pub(crate) mod testkit;
pub mod teich;
pub mod theta;

pub use error::CoreError;
pub use geometry::{
    derive, diameter_bound, diameter_bound_with, diameter_estimate, harmonicity_residual,
    inj_rho, AreaReport, BReport, DerivedGeometry,
};
pub use grid::{observed_order, MmsJet, MmsProblem, PatchGrid, ScalarField, SurfaceGrid, SymTensorField};
pub use group::{ElementTable, FuchsianGroup};
pub use linsolve::{BandLu, CsrMatrix};
pub use mobius::{DiskPoint, MobiusMap};
pub use rho::RhoMetric;
pub use solver::{
    check_bounds, check_pair, continuation_solve, mms_solve, newton_solve, BoundsReport,
    MoncriefSolution, NewtonOptions, NewtonResult, PairBounds,
};
pub use sym2::Sym2;
pub use teich::{psi, psi_inverse, properness_scan, round_trip, GammaCheck, GammaMetric, InverseIntermediate, PsiRun, RoundTripReport, ScanRow, ScanTable};
pub use report::{grid_fingerprint, CheckEntry, CheckList};
pub use theta::{assemble_tt, random_tt, verify_tt, ThetaCache, TtCheck, TtField};
