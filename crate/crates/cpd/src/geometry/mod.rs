//! Specimen geometry: particle seeding and the interaction triangulation.
//!
//! The specimen is a rectangle with an optional circular hole and an optional
//! horizontal edge notch. Particles are seeded on a jittered grid; the
//! multi-body interaction structure is the Delaunay triangulation of the
//! reference positions with hole-interior and notch-crossing triangles
//! removed. Both the hole rim and the notch are therefore topological seams
//! in one shared representation: absent triangles.

pub mod delaunay;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vec2::Vec2;

use delaunay::{circumcenter, orient, triangulate_points};

/// Reference area below which a triangle is treated as degenerate (cm^2).
pub const AREA_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid configuration for `{param}`: {msg}")]
    Config { param: &'static str, msg: String },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("mesh topology invalid: {0}")]
    Topology(String),
}

fn config_err(param: &'static str, msg: impl Into<String>) -> GeometryError {
    GeometryError::Config {
        param,
        msg: msg.into(),
    }
}

/// Rectangular specimen with a circular hole and an edge notch.
///
/// All lengths in cm. The notch is the horizontal segment from the left edge
/// to `notch_tip_x` at height `hole_center.y + hole_radius + notch_height`,
/// i.e. `notch_height` is measured from the top of the hole. `hole_radius = 0`
/// degenerates to a plate without a hole, `notch_tip_x = 0` to a plate
/// without a notch.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub width: f64,
    pub height: f64,
    pub hole_center: Vec2,
    pub hole_radius: f64,
    /// Horizontal pre-crack length `a` from the left edge.
    pub notch_tip_x: f64,
    /// Vertical offset `h` of the notch line above the top of the hole.
    pub notch_height: f64,
    /// Mean inter-particle distance.
    pub target_spacing: f64,
    /// RNG seed for the seeding jitter.
    pub seed: u64,
}

impl DomainSpec {
    pub fn notch_line_y(&self) -> f64 {
        self.hole_center.y + self.hole_radius + self.notch_height
    }

    pub fn has_hole(&self) -> bool {
        self.hole_radius > 0.0
    }

    pub fn has_notch(&self) -> bool {
        self.notch_tip_x > 0.0
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (param, v) in [
            ("width", self.width),
            ("height", self.height),
            ("target_spacing", self.target_spacing),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(config_err(param, format!("must be positive, got {v}")));
            }
        }
        if !self.hole_radius.is_finite() || self.hole_radius < 0.0 {
            return Err(config_err("hole_radius", "must be nonnegative"));
        }
        if self.has_hole() {
            let c = self.hole_center;
            let r = self.hole_radius;
            if c.x <= r || self.width - c.x <= r || c.y <= r || self.height - c.y <= r {
                return Err(config_err(
                    "hole_center",
                    "hole must lie strictly inside the rectangle",
                ));
            }
            // resolution floor: at least 6 particles across the hole diameter
            if 2.0 * r / self.target_spacing < 6.0 {
                return Err(config_err(
                    "target_spacing",
                    format!(
                        "too coarse: {} particles across hole diameter, need >= 6",
                        2.0 * r / self.target_spacing
                    ),
                ));
            }
        }
        if self.notch_tip_x < 0.0 || self.notch_tip_x >= self.width {
            return Err(config_err("notch_tip_x", "must satisfy 0 <= a < width"));
        }
        if self.has_notch() {
            let y = self.notch_line_y();
            if y <= 0.0 || y >= self.height {
                return Err(config_err(
                    "notch_height",
                    format!("notch line y = {y} falls outside the specimen"),
                ));
            }
        }
        Ok(())
    }
}

/// Which part of the specimen boundary a particle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    Top,
    Bottom,
    Left,
    Right,
    NotchFace,
}

/// Particle state: reference/current positions, velocities, masses, tags.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub ref_positions: Vec<Vec2>,
    pub cur_positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub masses: Vec<f64>,
    /// Global damping coefficient of the equations of motion.
    pub damping: f64,
    pub boundary_tag: Vec<BoundaryTag>,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.ref_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_positions.is_empty()
    }
}

/// Delaunay interaction triangles over the reference configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    /// Particle index triples, CCW in the reference configuration.
    pub triangles: Vec<[u32; 3]>,
    /// Reference area per triangle (cm^2).
    pub ref_area: Vec<f64>,
    pub alive: Vec<bool>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }
}

/// Seed particles on a jittered grid covering the rectangle minus the hole.
///
/// Grid pitch is the spacing rounded so rows land exactly on the loading
/// edges; interior particles get uniform jitter of +/-30% of the pitch while
/// boundary rows stay straight. Deterministic for a fixed `spec.seed`.
pub fn seed_particles(spec: &DomainSpec) -> Result<ParticleSystem, GeometryError> {
    spec.validate()?;

    let n_cols = (spec.width / spec.target_spacing).round().max(1.0) as usize + 1;
    let n_rows = (spec.height / spec.target_spacing).round().max(1.0) as usize + 1;
    let pitch_x = spec.width / (n_cols - 1) as f64;
    let pitch_y = spec.height / (n_rows - 1) as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let notch_y = spec.notch_line_y();

    let mut ref_positions = Vec::with_capacity(n_cols * n_rows);
    let mut boundary_tag = Vec::with_capacity(n_cols * n_rows);

    for j in 0..n_rows {
        let y0 = if j == n_rows - 1 {
            spec.height
        } else {
            j as f64 * pitch_y
        };
        for i in 0..n_cols {
            let x0 = if i == n_cols - 1 {
                spec.width
            } else {
                i as f64 * pitch_x
            };
            let on_boundary = i == 0 || i == n_cols - 1 || j == 0 || j == n_rows - 1;
            let p = if on_boundary {
                Vec2::new(x0, y0)
            } else {
                let dx = rng.gen_range(-0.3..0.3) * pitch_x;
                let dy = rng.gen_range(-0.3..0.3) * pitch_y;
                Vec2::new(x0 + dx, y0 + dy)
            };
            if spec.has_hole() && p.dist(spec.hole_center) < spec.hole_radius {
                continue;
            }
            let tag = if j == 0 {
                BoundaryTag::Bottom
            } else if j == n_rows - 1 {
                BoundaryTag::Top
            } else if i == 0 {
                BoundaryTag::Left
            } else if i == n_cols - 1 {
                BoundaryTag::Right
            } else if spec.has_notch()
                && p.x <= spec.notch_tip_x
                && (p.y - notch_y).abs() <= 0.6 * pitch_y
            {
                BoundaryTag::NotchFace
            } else {
                BoundaryTag::Interior
            };
            ref_positions.push(p);
            boundary_tag.push(tag);
        }
    }

    let n = ref_positions.len();
    let cell_mass = pitch_x * pitch_y; // provisional; lumped from triangles later
    Ok(ParticleSystem {
        cur_positions: ref_positions.clone(),
        ref_positions,
        velocities: vec![Vec2::default(); n],
        masses: vec![cell_mass; n],
        damping: 0.0,
        boundary_tag,
    })
}

fn segments_cross_strictly(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Build the interaction triangulation for a seeded system.
///
/// Triangles whose centroid or circumcenter falls inside the hole are
/// dropped, as are triangles strictly crossed by the notch segment; the
/// pre-crack is therefore a seam of missing interactions.
pub fn triangulate(
    system: &ParticleSystem,
    spec: &DomainSpec,
) -> Result<Triangulation, GeometryError> {
    let pts = &system.ref_positions;
    let raw = triangulate_points(pts)?;

    let notch_a = Vec2::new(0.0, spec.notch_line_y());
    let notch_b = Vec2::new(spec.notch_tip_x, spec.notch_line_y());

    let mut triangles = Vec::with_capacity(raw.len());
    let mut ref_area = Vec::with_capacity(raw.len());
    'tri: for t in raw {
        let (a, b, c) = (
            pts[t[0] as usize],
            pts[t[1] as usize],
            pts[t[2] as usize],
        );
        let area = 0.5 * orient(a, b, c);
        if area <= AREA_EPSILON {
            continue;
        }
        if spec.has_hole() {
            let centroid = (a + b + c) * (1.0 / 3.0);
            if centroid.dist(spec.hole_center) < spec.hole_radius
                || circumcenter(a, b, c).dist(spec.hole_center) < spec.hole_radius
            {
                continue;
            }
        }
        if spec.has_notch() {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                if segments_cross_strictly(p, q, notch_a, notch_b) {
                    continue 'tri;
                }
            }
        }
        triangles.push(t);
        ref_area.push(area);
    }

    if triangles.is_empty() {
        return Err(GeometryError::Topology(
            "no triangles retained after hole/notch removal".into(),
        ));
    }

    let alive = vec![true; triangles.len()];
    Ok(Triangulation {
        triangles,
        ref_area,
        alive,
    })
}

/// Axis-aligned crop window around the hole/notch interaction zone.
///
/// Pure report metadata; the simulation never reads it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOfInterest {
    pub min: Vec2,
    pub max: Vec2,
}

impl RegionOfInterest {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

pub fn region_of_interest(spec: &DomainSpec) -> RegionOfInterest {
    let c = spec.hole_center;
    let r = spec.hole_radius;
    let tip = Vec2::new(spec.notch_tip_x, spec.notch_line_y());
    let margin = (1.0_f64).max(r).max(4.0 * spec.target_spacing);
    let min = Vec2::new(
        (c.x - r).min(tip.x) - margin,
        (c.y - r).min(tip.y) - margin,
    );
    let max = Vec2::new(
        (c.x + r).max(tip.x) + margin,
        (c.y + r).max(tip.y) + margin,
    );
    RegionOfInterest {
        min: Vec2::new(min.x.max(0.0), min.y.max(0.0)),
        max: Vec2::new(max.x.min(spec.width), max.y.min(spec.height)),
    }
}
