//! Location-based RRH beam steering and train-side beam selection.
//!
//! RRH steering is continuous: each RRH points at the predicted train
//! position through whichever panel is closest, clamping (and flagging)
//! targets outside both panels' +-60 degree fields of view. Assignments are
//! held between SRS epochs.

use crate::scenario::Rrh;
use crate::{wrap_angle, Vec2};
use std::f64::consts::FRAC_PI_2;

/// Panel field of view around its boresight, rad.
pub const PANEL_FOV_RAD: f64 = std::f64::consts::PI / 3.0;

/// One RRH's steering decision for an epoch.
#[derive(Debug, Clone, Copy)]
pub struct BeamAssignment {
    pub rrh_id: u32,
    pub panel_index: usize,
    pub steer_azimuth: f64,
    pub train_beam_index: usize,
    pub epoch_time: f64,
    /// The target fell outside both panels' fields of view and the steering
    /// was clamped to the nearest edge.
    pub clamped: bool,
}

/// Points an RRH at the predicted train position.
pub fn point_beam(rrh: &Rrh, predicted_position: Vec2, epoch_time: f64) -> BeamAssignment {
    let bearing = rrh.bearing_to(predicted_position);
    let panel_index = rrh.panel_toward(bearing);
    let offset = wrap_angle(bearing - rrh.panels[panel_index]);
    let clamped = offset.abs() > PANEL_FOV_RAD;
    let steer_azimuth = if clamped {
        wrap_angle(rrh.panels[panel_index] + PANEL_FOV_RAD.copysign(offset))
    } else {
        bearing
    };
    BeamAssignment {
        rrh_id: rrh.id,
        panel_index,
        steer_azimuth,
        train_beam_index: 0,
        epoch_time,
        clamped,
    }
}

/// Absolute angle between the steered azimuth and the true bearing, degrees.
pub fn beam_direction_error_deg(rrh: &Rrh, assignment: &BeamAssignment, true_position: Vec2) -> f64 {
    let true_bearing = rrh.bearing_to(true_position);
    wrap_angle(assignment.steer_azimuth - true_bearing).abs().to_degrees()
}

/// Train beam strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainBeamMode {
    /// Two fixed beams at the nose and tail headings.
    Fixed,
    /// Codebook sweep; the serving RRH reports the best index.
    Sweep,
}

/// Picks the train-side beam for the coming interval.
///
/// In sweep mode this is the argmax of the reported per-beam powers at the
/// serving RRH; an empty sweep retains the previous index. In fixed mode the
/// nose (0) or tail (1) beam is chosen from the sign of the serving RRH
/// bearing relative to the heading.
pub fn select_train_beam(
    mode: TrainBeamMode,
    serving_bearing_minus_heading: f64,
    sweep_powers_db: &[(usize, f64)],
    previous: Option<usize>,
) -> Option<usize> {
    match mode {
        TrainBeamMode::Fixed => {
            if wrap_angle(serving_bearing_minus_heading).abs() <= FRAC_PI_2 {
                Some(0)
            } else {
                Some(1)
            }
        }
        TrainBeamMode::Sweep => sweep_powers_db
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(i, _)| *i)
            .or(previous),
    }
}
