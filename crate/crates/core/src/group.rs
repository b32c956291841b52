//! The Bolza surface's deck group and its regular-octagon fundamental domain.

use crate::error::CoreError;
use crate::mobius::MobiusMap;
use num_complex::Complex64;
use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_8, PI, SQRT_2};

/// Residual allowed when the defining relation is re-checked at construction.
const RELATION_TOL: f64 = 1e-10;

/// Accept a reduced point whose signed depth is above this (closure of the octagon).
const DEPTH_TOL: f64 = -1e-12;

/// One representative word of the length-8 relation, as indices into `gens`
/// (0..4 are the generators, k+4 is the inverse of k).
const RELATION_WORD: [usize; 8] = [0, 3, 6, 1, 4, 7, 2, 5];

/// Genus-2 deck group acting on the disk, with the regular octagon centered
/// at the origin (one vertex on the positive x axis) as fundamental domain.
#[derive(Debug, Clone)]
pub struct FuchsianGroup {
    /// T_0..T_3 then their inverses T_0^{-1}..T_3^{-1}.
    gens: [MobiusMap; 8],
    vertices: [Complex64; 8],
    side_centers: [Complex64; 8],
    side_radius: f64,
}

impl FuchsianGroup {
    /// Builds the Bolza group: a = 1 + sqrt2, b_k = sqrt(2 + 2 sqrt2) e^{i(2k+1)pi/8}.
    /// Fails if the octagon relation does not close to machine accuracy.
    pub fn bolza() -> Result<Self, CoreError> {
        let a = Complex64::new(1.0 + SQRT_2, 0.0);
        let b_mag = (2.0 + 2.0 * SQRT_2).sqrt();
        let mut gens = [MobiusMap::IDENTITY; 8];
        for k in 0..4 {
            let b = Complex64::from_polar(b_mag, (2 * k + 1) as f64 * FRAC_PI_8);
            let t = MobiusMap::new(a, b)?;
            gens[k] = t;
            gens[k + 4] = t.inverse();
        }

        let mut word = MobiusMap::IDENTITY;
        for idx in RELATION_WORD {
            word = word.compose(&gens[idx]);
        }
        let residual = word.distance(&MobiusMap::IDENTITY);
        if residual > RELATION_TOL {
            return Err(CoreError::RelationCheck {
                residual,
                limit: RELATION_TOL,
            });
        }

        // Vertices at radius 2^{-1/4}; each side is the arc of the circle
        // orthogonal to the unit circle through two adjacent vertices.
        let r_v = 2.0f64.powf(-0.25);
        let mut vertices = [Complex64::new(0.0, 0.0); 8];
        for (j, v) in vertices.iter_mut().enumerate() {
            *v = Complex64::from_polar(r_v, j as f64 * PI / 4.0);
        }
        // Orthogonality |c|^2 - 1 = r^2 plus incidence at a vertex pin |c|:
        // 2 |c| R_v cos(pi/8) = 1 + R_v^2.
        let c_mag = (1.0 + r_v * r_v) / (2.0 * r_v * FRAC_PI_8.cos());
        let side_radius = (c_mag * c_mag - 1.0).sqrt();
        let mut side_centers = [Complex64::new(0.0, 0.0); 8];
        for (k, c) in side_centers.iter_mut().enumerate() {
            *c = Complex64::from_polar(c_mag, (2 * k + 1) as f64 * FRAC_PI_8);
        }

        Ok(Self {
            gens,
            vertices,
            side_centers,
            side_radius,
        })
    }

    /// Distance of the composed defining relation from the identity.
    pub fn relation_residual(&self) -> f64 {
        let mut word = MobiusMap::IDENTITY;
        for idx in RELATION_WORD {
            word = word.compose(&self.gens[idx]);
        }
        word.distance(&MobiusMap::IDENTITY)
    }

    /// The eight side-pairing maps: index 0..4 are T_k, index k+4 is T_k^{-1}.
    pub fn generators(&self) -> &[MobiusMap; 8] {
        &self.gens
    }

    pub fn generator(&self, k: usize) -> &MobiusMap {
        &self.gens[k]
    }

    /// Octagon vertices, counterclockwise from the positive x axis.
    pub fn vertices(&self) -> &[Complex64; 8] {
        &self.vertices
    }

    /// Center of the circle carrying side k (between vertices k and k+1).
    pub fn side_center(&self, k: usize) -> Complex64 {
        self.side_centers[k]
    }

    pub fn side_radius(&self) -> f64 {
        self.side_radius
    }

    /// Signed depth min_k(|z - c_k| - r_k): positive inside the octagon,
    /// negative outside, zero on the boundary.
    pub fn octagon_depth(&self, z: Complex64) -> f64 {
        self.side_centers
            .iter()
            .map(|&c| (z - c).norm() - self.side_radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.octagon_depth(z) >= DEPTH_TOL
    }

    /// Euclidean distance from z to the closed octagon: zero inside, else the
    /// least distance to a boundary arc (clamped to the arc's endpoints).
    /// Unlike `octagon_depth`, this stays honest in the vertex wedges and
    /// along the side circles' extensions beyond the vertices.
    pub fn octagon_distance(&self, z: Complex64) -> f64 {
        // depth-based membership is only meaningful inside the unit disk:
        // far points escape all eight side disks and fake a positive depth
        if z.norm_sqr() < 1.0 && self.octagon_depth(z) >= 0.0 {
            return 0.0;
        }
        (0..8)
            .map(|k| {
                let c = self.side_centers[k];
                let a = self.vertices[k] - c;
                let b = self.vertices[(k + 1) % 8] - c;
                let w = z - c;
                let cross = |p: Complex64, q: Complex64| p.re * q.im - p.im * q.re;
                let orient = cross(a, b);
                let on_arc = cross(a, w) * orient >= 0.0 && cross(w, b) * orient >= 0.0;
                if on_arc {
                    (w.norm() - self.side_radius).abs()
                } else {
                    (z - self.vertices[k])
                        .norm()
                        .min((z - self.vertices[(k + 1) % 8]).norm())
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Pulls z into the closed octagon by greedily applying the generator
    /// that most shrinks |z|. Returns the reduced point, the map gamma with
    /// gamma(z) = reduced, and the number of steps taken.
    pub fn reduce_to_domain(
        &self,
        z: Complex64,
        budget: usize,
    ) -> Result<(Complex64, MobiusMap, usize), CoreError> {
        let mut w = z;
        let mut gamma = MobiusMap::IDENTITY;
        let mut steps = 0;
        while self.octagon_depth(w) < DEPTH_TOL {
            if steps >= budget {
                return Err(CoreError::OutOfCollar {
                    x: z.re,
                    y: z.im,
                    budget,
                });
            }
            let (best, image) = self
                .gens
                .iter()
                .map(|g| (g, g.apply(w)))
                .min_by(|p, q| p.1.norm_sqr().total_cmp(&q.1.norm_sqr()))
                .expect("eight generators");
            if image.norm_sqr() >= w.norm_sqr() {
                // No generator makes progress: z is not in any translate's collar.
                return Err(CoreError::OutOfCollar {
                    x: z.re,
                    y: z.im,
                    budget,
                });
            }
            gamma = best.compose(&gamma);
            w = image;
            steps += 1;
        }
        Ok((w, gamma, steps))
    }
}

/// Group elements up to a word length, grouped by the length at which the
/// breadth-first sweep first reaches them.
#[derive(Debug)]
pub struct ElementTable {
    elements: Vec<MobiusMap>,
    level_offsets: Vec<usize>,
}

/// Matrix entries are quantized at 1e-6 for the duplicate test. Distinct
/// elements of the discrete group stay far above that scale even at depth 8,
/// while two float paths to the same element differ by well under an
/// edge-guard of 1e-2 bins.
const KEY_SCALE: f64 = 1e6;
const EDGE_GUARD: f64 = 1e-2;

fn key_floats(m: &MobiusMap, sign: f64) -> [f64; 4] {
    [
        sign * m.a().re * KEY_SCALE,
        sign * m.a().im * KEY_SCALE,
        sign * m.b().re * KEY_SCALE,
        sign * m.b().im * KEY_SCALE,
    ]
}

fn primary_key(v: [f64; 4]) -> [i64; 4] {
    [
        v[0].round() as i64,
        v[1].round() as i64,
        v[2].round() as i64,
        v[3].round() as i64,
    ]
}

/// Every key the other float copy of the same element could round to:
/// components near a bin edge may land on either side.
fn push_candidate_keys(v: [f64; 4], out: &mut Vec<[i64; 4]>) {
    let mut opts = [[0i64; 2]; 4];
    let mut n_opts = [1usize; 4];
    for i in 0..4 {
        let n = v[i].round();
        opts[i][0] = n as i64;
        let frac = v[i] - n;
        if frac.abs() > 0.5 - EDGE_GUARD {
            opts[i][1] = (n + frac.signum()) as i64;
            n_opts[i] = 2;
        }
    }
    for i0 in 0..n_opts[0] {
        for i1 in 0..n_opts[1] {
            for i2 in 0..n_opts[2] {
                for i3 in 0..n_opts[3] {
                    out.push([opts[0][i0], opts[1][i1], opts[2][i2], opts[3][i3]]);
                }
            }
        }
    }
}

impl ElementTable {
    /// Breadth-first enumeration of all elements of word length <= depth.
    pub fn enumerate(group: &FuchsianGroup, depth: usize) -> ElementTable {
        let mut elements = vec![MobiusMap::IDENTITY];
        let mut level_offsets = vec![0usize, 1];
        let mut seen: HashSet<[i64; 4]> = HashSet::new();
        seen.insert(primary_key(key_floats(&MobiusMap::IDENTITY, 1.0)));

        let mut candidates = Vec::with_capacity(16);
        for level in 1..=depth {
            let (lo, hi) = (level_offsets[level - 1], level_offsets[level]);
            for i in lo..hi {
                let stem = elements[i];
                for g in group.generators() {
                    let m = stem.compose(g).canonical();
                    candidates.clear();
                    push_candidate_keys(key_floats(&m, 1.0), &mut candidates);
                    push_candidate_keys(key_floats(&m, -1.0), &mut candidates);
                    if candidates.iter().any(|k| seen.contains(k)) {
                        continue;
                    }
                    seen.insert(primary_key(key_floats(&m, 1.0)));
                    elements.push(m);
                }
            }
            level_offsets.push(elements.len());
        }

        ElementTable {
            elements,
            level_offsets,
        }
    }

    /// Elements first reached at word length `level`.
    pub fn level(&self, level: usize) -> &[MobiusMap] {
        &self.elements[self.level_offsets[level]..self.level_offsets[level + 1]]
    }

    pub fn level_count(&self, level: usize) -> usize {
        self.level_offsets[level + 1] - self.level_offsets[level]
    }

    pub fn all(&self) -> &[MobiusMap] {
        &self.elements
    }

    pub fn depth(&self) -> usize {
        self.level_offsets.len() - 2
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn group() -> FuchsianGroup {
        FuchsianGroup::bolza().expect("bolza group")
    }

    #[test]
    fn side_midpoints_sit_at_the_known_radius() {
        let g = group();
        let mid = g.side_center(0).norm() - g.side_radius();
        assert_relative_eq!(mid, (SQRT_2 - 1.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn vertices_lie_on_their_two_side_circles() {
        let g = group();
        for j in 0..8 {
            let v = g.vertices()[j];
            for k in [(j + 7) % 8, j] {
                let gap = (v - g.side_center(k)).norm() - g.side_radius();
                assert_abs_diff_eq!(gap, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn side_circles_meet_the_unit_circle_at_right_angles() {
        let g = group();
        // Orthogonality is |c|^2 = 1 + r^2.
        let c = g.side_center(3).norm_sqr();
        assert_relative_eq!(c, 1.0 + g.side_radius() * g.side_radius(), epsilon = 1e-14);
    }

    #[test]
    fn generators_pair_opposite_sides_with_endpoint_swap() {
        let g = group();
        let midpoint = |k: usize| {
            Complex64::from_polar(
                g.side_center(k).norm() - g.side_radius(),
                (2 * k + 1) as f64 * FRAC_PI_8,
            )
        };
        for k in 0..4 {
            let t = g.generator(k);
            let v_far = g.vertices()[(k + 4) % 8];
            let v_far2 = g.vertices()[(k + 5) % 8];
            assert_abs_diff_eq!((t.apply(v_far) - g.vertices()[(k + 1) % 8]).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((t.apply(v_far2) - g.vertices()[k]).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((t.apply(midpoint(k + 4)) - midpoint(k)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn interior_angles_are_pi_over_4() {
        let g = group();
        // At vertex V_1 sides 0 and 1 meet. Tangents oriented away from the
        // vertex along each side; the angle between them is the interior angle.
        let p = g.vertices()[1];
        let tangent_toward = |k: usize, target: Complex64| {
            let radial = p - g.side_center(k);
            let t = Complex64::new(0.0, 1.0) * radial;
            let t = t / t.norm();
            if (t.conj() * (target - p)).re > 0.0 {
                t
            } else {
                -t
            }
        };
        let t0 = tangent_toward(0, g.vertices()[0]);
        let t1 = tangent_toward(1, g.vertices()[2]);
        let angle = (t0.conj() * t1).re.clamp(-1.0, 1.0).acos();
        assert_relative_eq!(angle, PI / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn membership_probes() {
        let g = group();
        assert!(g.contains(Complex64::new(0.0, 0.0)));
        // Side midpoint direction: boundary at sqrt(sqrt2 - 1) ~ 0.6436.
        assert!(g.contains(Complex64::from_polar(0.64, FRAC_PI_8)));
        assert!(!g.contains(Complex64::from_polar(0.65, FRAC_PI_8)));
        // Vertex direction: boundary at 2^{-1/4} ~ 0.8409.
        assert!(g.contains(Complex64::from_polar(0.84, 0.0)));
        assert!(!g.contains(Complex64::from_polar(0.842, 0.0)));
    }

    #[test]
    fn element_counts_match_growth_of_the_surface_group() {
        let g = group();
        let table = ElementTable::enumerate(&g, 5);
        let counts: Vec<usize> = (0..=5).map(|l| table.level_count(l)).collect();
        assert_eq!(counts, vec![1, 8, 56, 392, 2736, 19096]);
    }

    #[test]
    fn quantized_dedup_agrees_with_pairwise_distance_at_length_2() {
        let g = group();
        let table = ElementTable::enumerate(&g, 2);
        // Brute force: all 64 two-letter products, deduplicated by metric
        // distance, identity removed.
        let mut distinct: Vec<MobiusMap> = Vec::new();
        for a in g.generators() {
            for b in g.generators() {
                let m = a.compose(b);
                if m.is_identity(1e-9) {
                    continue;
                }
                if !distinct.iter().any(|e| e.distance(&m) < 1e-6) {
                    distinct.push(m);
                }
            }
        }
        assert_eq!(distinct.len(), table.level_count(2));
        for m in &distinct {
            assert!(table.level(2).iter().any(|e| e.distance(m) < 1e-9));
        }
    }

    #[test]
    fn reduction_recovers_interior_representative() {
        let g = group();
        let w0 = Complex64::new(0.31, -0.22);
        let word = g.generator(0).compose(g.generator(3)).compose(g.generator(6));
        let z = word.apply(w0);
        let (reduced, gamma, steps) = g.reduce_to_domain(z, 8).expect("reducible");
        assert!(steps >= 1);
        assert_abs_diff_eq!((reduced - w0).norm(), 0.0, epsilon = 1e-10);
        assert!(gamma.compose(&word).is_identity(1e-9));
    }

    #[test]
    fn reduction_never_shrinks_derivative_magnitude() {
        let g = group();
        // Points just outside the boundary, as ghost nodes are.
        for i in 0..200 {
            let phi = i as f64 * 0.031415;
            let dir = Complex64::from_polar(1.0, phi);
            let mut z = dir * 0.3;
            // Push outward until just past the boundary.
            while g.contains(z) {
                z += dir * 0.003;
            }
            let (reduced, gamma, _) = g.reduce_to_domain(z, 8).expect("collar point");
            assert!(g.contains(reduced));
            assert!(gamma.derivative(z).norm() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn interior_points_reduce_trivially() {
        let g = group();
        let z = Complex64::new(0.2, 0.1);
        let (w, gamma, steps) = g.reduce_to_domain(z, 8).unwrap();
        assert_eq!(steps, 0);
        assert_eq!(w, z);
        assert!(gamma.is_identity(0.0));
    }

    #[test]
    fn far_exterior_point_exhausts_budget() {
        let g = group();
        let z = Complex64::new(0.9995, 0.0);
        assert!(matches!(
            g.reduce_to_domain(z, 2),
            Err(CoreError::OutOfCollar { .. })
        ));
    }

    #[test]
    fn octagon_distance_matches_boundary_sampling() {
        let g = group();
        // dense boundary sample as the oracle
        let mut boundary = Vec::new();
        for k in 0..8 {
            let c = g.side_center(k);
            let a = g.vertices()[k] - c;
            let b = g.vertices()[(k + 1) % 8] - c;
            let sweep = (a.conj() * b / (a.norm() * b.norm())).arg();
            for i in 0..=4000 {
                let t = i as f64 / 4000.0;
                let rot = Complex64::from_polar(1.0, t * sweep);
                boundary.push(c + a * rot);
            }
        }
        let probes = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.2),
            Complex64::new(0.7, 0.0),
            Complex64::new(0.75, 0.31),  // vertex wedge near V0..V1 direction
            Complex64::new(0.0, -0.96),  // circle extension, far from octagon
            Complex64::new(-0.12, -0.96),
            Complex64::new(0.66, 0.0),
            Complex64::new(0.9, 0.37),
            Complex64::new(-0.88, -0.12),
        ];
        for z in probes {
            let fast = g.octagon_distance(z);
            let brute = if g.contains(z) {
                0.0
            } else {
                boundary
                    .iter()
                    .map(|p| (z - p).norm())
                    .fold(f64::INFINITY, f64::min)
            };
            assert!(
                (fast - brute).abs() < 1e-6,
                "z = {z}: fast {fast} vs sampled {brute}"
            );
        }
    }

    #[test]
    fn octagon_distance_exceeds_depth_on_circle_extensions() {
        // beyond the vertices the side circles curl back toward the unit
        // circle; signed circle depth sees them as shallow while the true
        // octagon is far away
        let g = group();
        let z = Complex64::new(-0.12, -0.96);
        let depth = g.octagon_depth(z);
        assert!(depth < 0.0 && depth > -0.16);
        assert!(g.octagon_distance(z) > 0.16);
    }
}
