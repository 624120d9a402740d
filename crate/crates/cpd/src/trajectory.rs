//! Recorded simulation output: 101 snapshots of one loading run.

use crate::geometry::DomainSpec;
use crate::vec2::Vec2;

/// Snapshot count per trajectory, stages tau = 0..=100.
pub const NUM_FRAMES: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub positions: Vec<Vec2>,
    /// Per-triangle alive flags at this stage.
    pub alive: Vec<bool>,
}

/// One geometry sample: reference configuration plus the deformed
/// configurations recorded over equally spaced simulation stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sample_id: u32,
    /// The varied geometry scalar of the sample family (h or r, cm).
    pub geometry_param: f64,
    pub domain: DomainSpec,
    pub ref_positions: Vec<Vec2>,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    pub fn num_particles(&self) -> usize {
        self.ref_positions.len()
    }

    /// Displacement field u(x_i, tau) = y_i(tau) - x_i.
    pub fn displacement(&self, tau: usize, particle: usize) -> Vec2 {
        self.frames[tau].positions[particle] - self.ref_positions[particle]
    }

    /// First stage at which any triangle is dead, if fracture occurred.
    pub fn first_failure_tau(&self) -> Option<usize> {
        self.frames
            .iter()
            .position(|f| f.alive.iter().any(|a| !a))
    }

    pub fn dead_count(&self, tau: usize) -> usize {
        self.frames[tau].alive.iter().filter(|a| !**a).count()
    }

    /// Structural sanity: frame count, frame-0 identity, monotone dead set.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.frames.len() != NUM_FRAMES {
            return Err(format!("expected {NUM_FRAMES} frames, got {}", self.frames.len()));
        }
        if self.frames[0].positions != self.ref_positions {
            return Err("frame 0 differs from reference configuration".into());
        }
        let mut prev_dead = 0usize;
        for (tau, f) in self.frames.iter().enumerate() {
            if f.positions.len() != self.ref_positions.len() {
                return Err(format!("frame {tau} particle count mismatch"));
            }
            let dead = f.alive.iter().filter(|a| !**a).count();
            if dead < prev_dead {
                return Err(format!("dead set shrank at tau = {tau}"));
            }
            for (i, (&a, &b)) in self.frames[tau.saturating_sub(1)]
                .alive
                .iter()
                .zip(f.alive.iter())
                .enumerate()
            {
                if !a && b {
                    return Err(format!("triangle {i} resurrected at tau = {tau}"));
                }
            }
            prev_dead = dead;
        }
        Ok(())
    }
}
