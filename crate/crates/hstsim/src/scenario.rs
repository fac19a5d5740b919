//! Track geometry, train kinematics, and the trackside RRH deployment.
//!
//! The track is a chain of constant-curvature segments, so positions and
//! headings come from closed-form arc geometry rather than numerical
//! integration. The train is a point following a piecewise-constant
//! acceleration speed profile along the track.

use crate::rng::{stream_rng, Stream};
use crate::{wrap_angle, Vec2};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use thiserror::Error;

/// Hard physical bound on signed curvature magnitude, 1/m.
pub const MAX_CURVATURE_BOUND: f64 = 0.005;

/// Maximum train speed, m/s (500 km/h).
pub const MAX_TRAIN_SPEED_MPS: f64 = 500.0 / 3.6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("track length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("curvature magnitude {0} exceeds the rail-plausible bound {MAX_CURVATURE_BOUND}")]
    CurvatureTooLarge(f64),
    #[error("speed profile must start and end at 0 m/s")]
    ProfileEndpoints,
    #[error("speed {0} m/s outside [0, {MAX_TRAIN_SPEED_MPS}]")]
    SpeedOutOfRange(f64),
    #[error("speed phase needs a non-zero acceleration to change speed")]
    ZeroAcceleration,
    #[error("time {t} s outside the journey [0, {duration} s]")]
    TimeOutOfJourney { t: f64, duration: f64 },
    #[error("inter-site distance must be positive, got {0}")]
    NonPositiveIsd(f64),
    #[error("lateral offset must be positive, got {0}")]
    NonPositiveOffset(f64),
}

// ---------------------------------------------------------------------------
// Track
// ---------------------------------------------------------------------------

/// How random curvature is laid along the track.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureSpec {
    /// Number of constant-curvature segments.
    pub segments: usize,
    /// Maximum |curvature| in 1/m. Zero builds a straight track.
    pub max_curvature: f64,
    /// Correlation length of the curvature process, m.
    pub correlation_m: f64,
}

impl CurvatureSpec {
    /// A straight track.
    pub fn straight() -> Self {
        Self { segments: 1, max_curvature: 0.0, correlation_m: 5_000.0 }
    }

    /// Gentle random curvature sized for the given track length.
    ///
    /// The default maximum of 1.5e-4 /m (radius ~6.7 km) is the sharpest
    /// curve a 500 km/h line can take at rail-normal lateral acceleration.
    pub fn default_for(length_m: f64) -> Self {
        Self {
            segments: ((length_m / 500.0).round() as usize).max(1),
            max_curvature: 1.5e-4,
            correlation_m: 5_000.0,
        }
    }

    /// Constant-curvature track (single segment).
    pub fn constant(curvature: f64) -> Self {
        Self { segments: 1, max_curvature: curvature, correlation_m: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy)]
struct TrackSegment {
    arc_start: f64,
    len: f64,
    curvature: f64,
    origin: Vec2,
    heading: f64,
}

impl TrackSegment {
    /// Closed-form pose `ds` meters into the segment.
    fn pose_at(&self, ds: f64) -> (Vec2, f64) {
        let k = self.curvature;
        if k.abs() < 1e-15 {
            let p = self.origin + Vec2::new(self.heading.cos(), self.heading.sin()) * ds;
            (p, self.heading)
        } else {
            // Circular arc of radius 1/k; positive curvature turns left.
            let r = 1.0 / k;
            let dtheta = k * ds;
            let dx = r * ((self.heading + dtheta).sin() - self.heading.sin());
            let dy = -r * ((self.heading + dtheta).cos() - self.heading.cos());
            (self.origin + Vec2::new(dx, dy), self.heading + dtheta)
        }
    }
}

/// A rail centerline with per-segment signed curvature.
#[derive(Debug, Clone)]
pub struct Track {
    /// Sampled centerline as (cumulative arc length, position) pairs.
    pub centerline: Vec<(f64, Vec2)>,
    /// Signed curvature of each constant-curvature segment, 1/m.
    pub curvature: Vec<f64>,
    segments: Vec<TrackSegment>,
    length: f64,
}

/// Spacing of the sampled centerline points, m.
const CENTERLINE_STEP_M: f64 = 5.0;

/// Builds a track of the requested length; deterministic for a given seed.
pub fn build_track(length_m: f64, spec: &CurvatureSpec, seed: u64) -> Result<Track, ScenarioError> {
    if !(length_m > 0.0) {
        return Err(ScenarioError::NonPositiveLength(length_m));
    }
    if spec.max_curvature.abs() > MAX_CURVATURE_BOUND {
        return Err(ScenarioError::CurvatureTooLarge(spec.max_curvature));
    }

    let n_seg = spec.segments.max(1);
    let seg_len = length_m / n_seg as f64;

    // AR(1) curvature field with the requested correlation length, rescaled
    // so the largest excursion touches max_curvature exactly.
    let curvature: Vec<f64> = if spec.max_curvature == 0.0 {
        vec![0.0; n_seg]
    } else if n_seg == 1 {
        vec![spec.max_curvature]
    } else {
        let rho = (-seg_len / spec.correlation_m).exp();
        let mut rng = stream_rng(seed, Stream::Track, 0, 0, 0);
        let mut g = Vec::with_capacity(n_seg);
        let mut state: f64 = rng.sample(StandardNormal);
        g.push(state);
        for _ in 1..n_seg {
            let w: f64 = rng.sample(StandardNormal);
            state = rho * state + (1.0 - rho * rho).sqrt() * w;
            g.push(state);
        }
        let peak = g.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-12);
        g.iter().map(|x| x / peak * spec.max_curvature).collect()
    };

    let mut segments = Vec::with_capacity(n_seg);
    let mut origin = Vec2::new(0.0, 0.0);
    let mut heading = 0.0;
    let mut arc = 0.0;
    for &k in &curvature {
        let seg = TrackSegment { arc_start: arc, len: seg_len, curvature: k, origin, heading };
        let (end, end_heading) = seg.pose_at(seg_len);
        segments.push(seg);
        origin = end;
        heading = end_heading;
        arc += seg_len;
    }

    let mut centerline = Vec::new();
    let mut s = 0.0;
    while s < length_m {
        centerline.push((s, pose_on(&segments, length_m, s).0));
        s += CENTERLINE_STEP_M;
    }
    centerline.push((length_m, pose_on(&segments, length_m, length_m).0));

    Ok(Track { centerline, curvature, segments, length: length_m })
}

fn pose_on(segments: &[TrackSegment], length: f64, s: f64) -> (Vec2, f64) {
    let s = s.clamp(0.0, length);
    let idx = segments
        .partition_point(|seg| seg.arc_start + seg.len < s)
        .min(segments.len() - 1);
    let seg = &segments[idx];
    seg.pose_at(s - seg.arc_start)
}

impl Track {
    /// Total arc length, m.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Centerline position at arc length `s` (clamped to the track).
    pub fn position_at(&self, s: f64) -> Vec2 {
        pose_on(&self.segments, self.length, s).0
    }

    /// Tangent heading at arc length `s`, rad.
    pub fn heading_at(&self, s: f64) -> f64 {
        pose_on(&self.segments, self.length, s).1
    }

    /// Left-pointing unit normal at arc length `s`.
    pub fn left_normal_at(&self, s: f64) -> Vec2 {
        let h = self.heading_at(s);
        Vec2::new(-h.sin(), h.cos())
    }

    /// Signed curvature at arc length `s`, 1/m.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let idx = self
            .segments
            .partition_point(|seg| seg.arc_start + seg.len < s.clamp(0.0, self.length))
            .min(self.segments.len() - 1);
        self.segments[idx].curvature
    }
}

// ---------------------------------------------------------------------------
// Speed profile
// ---------------------------------------------------------------------------

/// One leg of the journey: ramp to `target_mps` at `accel_mps2`, then hold
/// that speed for `hold_m` meters.
#[derive(Debug, Clone, Copy)]
pub struct SpeedPhase {
    pub target_mps: f64,
    pub accel_mps2: f64,
    pub hold_m: f64,
}

#[derive(Debug, Clone, Copy)]
struct ProfileNode {
    t0: f64,
    s0: f64,
    v0: f64,
    accel: f64,
    duration: f64,
}

/// Piecewise-constant-acceleration speed profile starting and ending at rest.
#[derive(Debug, Clone)]
pub struct SpeedProfile {
    pub phases: Vec<SpeedPhase>,
    nodes: Vec<ProfileNode>,
    duration: f64,
    total_distance: f64,
}

impl SpeedProfile {
    pub fn new(phases: Vec<SpeedPhase>) -> Result<Self, ScenarioError> {
        match phases.last() {
            Some(last) if last.target_mps == 0.0 => {}
            _ => return Err(ScenarioError::ProfileEndpoints),
        }
        let mut nodes = Vec::new();
        let mut t = 0.0;
        let mut s = 0.0;
        let mut v = 0.0;
        for phase in &phases {
            if !(0.0..=MAX_TRAIN_SPEED_MPS + 1e-9).contains(&phase.target_mps) {
                return Err(ScenarioError::SpeedOutOfRange(phase.target_mps));
            }
            let dv = phase.target_mps - v;
            if dv.abs() > 1e-12 {
                if phase.accel_mps2 == 0.0 {
                    return Err(ScenarioError::ZeroAcceleration);
                }
                let a = phase.accel_mps2.abs() * dv.signum();
                let dur = dv / a;
                nodes.push(ProfileNode { t0: t, s0: s, v0: v, accel: a, duration: dur });
                s += v * dur + 0.5 * a * dur * dur;
                t += dur;
                v = phase.target_mps;
            }
            if phase.hold_m > 0.0 {
                let dur = phase.hold_m / v;
                nodes.push(ProfileNode { t0: t, s0: s, v0: v, accel: 0.0, duration: dur });
                s += phase.hold_m;
                t += dur;
            }
        }
        Ok(Self { phases, nodes, duration: t, total_distance: s })
    }

    /// Plans the default journey for a track of the given length: full-power
    /// acceleration, cruise at `vmax`, a mid-journey slowdown to `vslow`
    /// with re-acceleration when the track is long enough, and a final stop.
    pub fn plan(length_m: f64, vmax: f64, accel: f64, vslow: f64) -> Result<Self, ScenarioError> {
        let ramp = |v1: f64, v2: f64| (v2 * v2 - v1 * v1).abs() / (2.0 * accel);
        let full_fixed = ramp(0.0, vmax) + ramp(vmax, vslow) + ramp(vslow, vmax) + ramp(vmax, 0.0);
        let trapezoid_fixed = ramp(0.0, vmax) + ramp(vmax, 0.0);

        let phases = if length_m > full_fixed * 1.05 {
            let rem = length_m - full_fixed;
            let hold_slow = (rem * 0.2).min(2_000.0);
            let cruise2 = (rem * 0.2).min(2_000.0);
            let cruise1 = rem - hold_slow - cruise2;
            vec![
                SpeedPhase { target_mps: vmax, accel_mps2: accel, hold_m: cruise1 },
                SpeedPhase { target_mps: vslow, accel_mps2: accel, hold_m: hold_slow },
                SpeedPhase { target_mps: vmax, accel_mps2: accel, hold_m: cruise2 },
                SpeedPhase { target_mps: 0.0, accel_mps2: accel, hold_m: 0.0 },
            ]
        } else if length_m > trapezoid_fixed {
            vec![
                SpeedPhase { target_mps: vmax, accel_mps2: accel, hold_m: length_m - trapezoid_fixed },
                SpeedPhase { target_mps: 0.0, accel_mps2: accel, hold_m: 0.0 },
            ]
        } else {
            let v_peak = (accel * length_m / 2.0 * 2.0).sqrt().min(vmax);
            vec![
                SpeedPhase { target_mps: v_peak, accel_mps2: accel, hold_m: 0.0 },
                SpeedPhase { target_mps: 0.0, accel_mps2: accel, hold_m: 0.0 },
            ]
        };
        Self::new(phases)
    }

    /// Journey duration, s.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Distance covered by the whole journey, m.
    pub fn total_distance(&self) -> f64 {
        self.total_distance
    }

    /// (arc position, speed) at time `t`.
    pub fn sample(&self, t: f64) -> Result<(f64, f64), ScenarioError> {
        if !(0.0..=self.duration + 1e-9).contains(&t) {
            return Err(ScenarioError::TimeOutOfJourney { t, duration: self.duration });
        }
        let idx = self
            .nodes
            .partition_point(|n| n.t0 + n.duration < t)
            .min(self.nodes.len() - 1);
        let n = &self.nodes[idx];
        let dt = (t - n.t0).clamp(0.0, n.duration);
        Ok((n.s0 + n.v0 * dt + 0.5 * n.accel * dt * dt, n.v0 + n.accel * dt))
    }
}

// ---------------------------------------------------------------------------
// Train state
// ---------------------------------------------------------------------------

/// True kinematic state of the train at one instant.
#[derive(Debug, Clone, Copy)]
pub struct TrainState {
    pub time: f64,
    pub arc_position: f64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
}

/// Kinematic state at time `t`, consistent with the track and speed profile.
pub fn train_state_at(track: &Track, profile: &SpeedProfile, t: f64) -> Result<TrainState, ScenarioError> {
    let (s, speed) = profile.sample(t)?;
    let heading = track.heading_at(s);
    Ok(TrainState {
        time: t,
        arc_position: s,
        position: track.position_at(s),
        velocity: Vec2::new(heading.cos(), heading.sin()) * speed,
        heading,
    })
}

// ---------------------------------------------------------------------------
// Antenna arrays
// ---------------------------------------------------------------------------

/// Uniform rectangular array: element counts and spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub horizontal: usize,
    pub vertical: usize,
    pub spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(horizontal: usize, vertical: usize) -> Self {
        Self { horizontal: horizontal.max(1), vertical: vertical.max(1), spacing_wavelengths: 0.5 }
    }

    pub fn elements(&self) -> usize {
        self.horizontal * self.vertical
    }

    /// Half-power beamwidth of the horizontal dimension, rad (~0.886*lambda/(N*d)).
    pub fn hpbw_rad(&self) -> f64 {
        2.0 * 0.886 / (self.horizontal as f64 * 2.0 * self.spacing_wavelengths)
    }
}

/// Per-element unit-magnitude steering phasors for a plane wave from
/// (azimuth, elevation) relative to the array boresight.
pub fn array_response(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> Vec<num_complex::Complex64> {
    let mut v = Vec::with_capacity(geom.elements());
    let d = geom.spacing_wavelengths;
    for h in 0..geom.horizontal {
        for e in 0..geom.vertical {
            let phase = std::f64::consts::TAU
                * d
                * (h as f64 * azimuth.sin() * elevation.cos() + e as f64 * elevation.sin());
            v.push(num_complex::Complex64::from_polar(1.0, phase));
        }
    }
    v
}

/// Normalized array factor of a conjugate (matched) steering weight, dB.
///
/// Peaks at 10*log10(N) when the steer and signal directions coincide.
/// Elevation is fixed at zero in this 2D world.
pub fn beam_gain_db(geom: &ArrayGeometry, steer_azimuth: f64, signal_azimuth: f64) -> f64 {
    let n = geom.elements() as f64;
    let w = array_response(geom, steer_azimuth, 0.0);
    let a = array_response(geom, signal_azimuth, 0.0);
    let dot: num_complex::Complex64 = w.iter().zip(&a).map(|(wi, ai)| wi.conj() * ai).sum();
    10.0 * (dot.norm_sqr() / n).max(1e-30).log10()
}

// ---------------------------------------------------------------------------
// Deployment
// ---------------------------------------------------------------------------

/// A remote radio head with two panels rotated +-45 degrees from the
/// track normal.
#[derive(Debug, Clone)]
pub struct Rrh {
    pub id: u32,
    pub position: Vec2,
    /// Along-track arc position of the mount point, m.
    pub arc_m: f64,
    /// Boresight azimuths of the two panels, rad.
    pub panels: [f64; 2],
    pub array: ArrayGeometry,
}

impl Rrh {
    /// Bearing from this RRH toward `target`, rad.
    pub fn bearing_to(&self, target: Vec2) -> f64 {
        let d = target - self.position;
        d.y.atan2(d.x)
    }

    /// Panel whose boresight is closest to the bearing; ties go to panel 0.
    pub fn panel_toward(&self, bearing: f64) -> usize {
        let d0 = wrap_angle(bearing - self.panels[0]).abs();
        let d1 = wrap_angle(bearing - self.panels[1]).abs();
        if d1 < d0 {
            1
        } else {
            0
        }
    }
}

/// The full set of trackside RRHs.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub rrhs: Vec<Rrh>,
    pub inter_site_distance: f64,
}

impl Deployment {
    /// Indices of the `k` RRHs nearest to `p`, closest first.
    pub fn nearest(&self, p: Vec2, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rrhs.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (self.rrhs[a].position - p).norm_squared();
            let db = (self.rrhs[b].position - p).norm_squared();
            da.partial_cmp(&db).unwrap()
        });
        idx.truncate(k);
        idx
    }
}

/// Places RRHs every `isd` meters along the track on alternating sides,
/// each with two panels at +-45 degrees from the toward-track normal.
pub fn deploy_rrhs(
    track: &Track,
    isd: f64,
    lateral_offset: f64,
    array: ArrayGeometry,
) -> Result<Deployment, ScenarioError> {
    if !(isd > 0.0) {
        return Err(ScenarioError::NonPositiveIsd(isd));
    }
    if !(lateral_offset > 0.0) {
        return Err(ScenarioError::NonPositiveOffset(lateral_offset));
    }

    let mut rrhs = Vec::new();
    let mut s = 0.0;
    let mut side = 1.0; // +1: left of travel direction, -1: right
    let mut id = 0u32;
    while s <= track.length() + 1e-9 {
        let s_here = s.min(track.length());
        let center = track.position_at(s_here);
        let normal = track.left_normal_at(s_here);
        let heading = track.heading_at(s_here);
        let position = center + normal * (side * lateral_offset);
        // Toward-track normal, then +-45 degrees to cover both directions.
        let toward_track = if side > 0.0 { heading - FRAC_PI_2 } else { heading + FRAC_PI_2 };
        let panels = [wrap_angle(toward_track - FRAC_PI_4), wrap_angle(toward_track + FRAC_PI_4)];
        rrhs.push(Rrh { id, position, arc_m: s_here, panels, array });
        id += 1;
        side = -side;
        s += isd;
    }
    Ok(Deployment { rrhs, inter_site_distance: isd })
}

/// Uniform train-side beam grid over +-60 degrees around a panel boresight,
/// stepped by the array half-power beamwidth. Offsets are relative to the
/// panel boresight.
pub fn train_codebook(array: &ArrayGeometry) -> Vec<f64> {
    let span = 60.0_f64.to_radians();
    let step = array.hpbw_rad();
    let n_side = (span / step).ceil() as i32;
    (-n_side..=n_side).map(|i| (i as f64 * step).clamp(-span, span)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn straight_track_endpoint() {
        let t = build_track(1000.0, &CurvatureSpec::straight(), 1).unwrap();
        let p = t.position_at(1000.0);
        assert_abs_diff_eq!(p.x, 1000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn long_track_arc_length() {
        let t = build_track(100_000.0, &CurvatureSpec::default_for(100_000.0), 7).unwrap();
        assert_abs_diff_eq!(t.length(), 100_000.0, epsilon = 0.01);
        assert_abs_diff_eq!(t.centerline.last().unwrap().0, 100_000.0, epsilon = 0.01);
    }

    #[test]
    fn constant_curvature_matches_circle_chord() {
        // 2000 m arc at 0.001 /m: chord length is 2*R*sin(arc/(2R)) = 2000*sin(1).
        let t = build_track(2000.0, &CurvatureSpec::constant(0.001), 0).unwrap();
        let chord = t.position_at(2000.0).norm();
        assert_abs_diff_eq!(chord, 2000.0 * 1.0_f64.sin(), epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_track_parameters() {
        assert!(build_track(-5.0, &CurvatureSpec::straight(), 0).is_err());
        assert!(build_track(100.0, &CurvatureSpec::constant(0.01), 0).is_err());
    }

    #[test]
    fn track_invariants_hold() {
        let t = build_track(30_000.0, &CurvatureSpec::default_for(30_000.0), 3).unwrap();
        for w in t.centerline.windows(2) {
            assert!(w[1].0 > w[0].0);
            assert!((w[1].1 - w[0].1).norm() < 10.0);
        }
        for &k in &t.curvature {
            assert!(k.abs() <= MAX_CURVATURE_BOUND);
        }
    }

    #[test]
    fn journey_start_is_at_rest() {
        let track = build_track(20_000.0, &CurvatureSpec::straight(), 0).unwrap();
        let profile = SpeedProfile::plan(20_000.0, MAX_TRAIN_SPEED_MPS, 0.5, 290.0 / 3.6).unwrap();
        let st = train_state_at(&track, &profile, 0.0).unwrap();
        assert_eq!(st.arc_position, 0.0);
        assert_eq!(st.velocity.norm(), 0.0);
    }

    #[test]
    fn constant_acceleration_kinematics() {
        // Single phase at 1 m/s^2: s = a t^2 / 2.
        let track = build_track(10_000.0, &CurvatureSpec::straight(), 0).unwrap();
        let profile = SpeedProfile::new(vec![
            SpeedPhase { target_mps: 138.0, accel_mps2: 1.0, hold_m: 0.0 },
            SpeedPhase { target_mps: 0.0, accel_mps2: 1.0, hold_m: 0.0 },
        ])
        .unwrap();
        let st = train_state_at(&track, &profile, 10.0).unwrap();
        assert_abs_diff_eq!(st.arc_position, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(st.velocity.norm(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn default_plan_reaches_cruise_speed() {
        let profile = SpeedProfile::plan(100_000.0, MAX_TRAIN_SPEED_MPS, 0.5, 290.0 / 3.6).unwrap();
        let mut saw_cruise = false;
        let mut t = 0.0;
        while t < profile.duration() {
            let (_, v) = profile.sample(t).unwrap();
            assert!(v <= MAX_TRAIN_SPEED_MPS + 1e-9);
            if (v - MAX_TRAIN_SPEED_MPS).abs() < 1e-9 {
                saw_cruise = true;
            }
            t += 1.0;
        }
        assert!(saw_cruise);
        assert_abs_diff_eq!(profile.total_distance(), 100_000.0, epsilon = 1e-6);
        let (_, v_end) = profile.sample(profile.duration()).unwrap();
        assert_abs_diff_eq!(v_end, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn out_of_journey_time_is_an_error() {
        let profile = SpeedProfile::plan(1_000.0, MAX_TRAIN_SPEED_MPS, 0.5, 290.0 / 3.6).unwrap();
        assert!(profile.sample(-1.0).is_err());
        assert!(profile.sample(profile.duration() + 10.0).is_err());
    }

    #[test]
    fn trajectory_velocity_consistency() {
        // Central difference of position over 1 ms matches the velocity field.
        let track = build_track(50_000.0, &CurvatureSpec::default_for(50_000.0), 11).unwrap();
        let profile = SpeedProfile::plan(50_000.0, MAX_TRAIN_SPEED_MPS, 0.5, 290.0 / 3.6).unwrap();
        let dt = 1e-3;
        let mut t = 1.0;
        while t < profile.duration() - 1.0 {
            let a = train_state_at(&track, &profile, t - dt).unwrap();
            let b = train_state_at(&track, &profile, t + dt).unwrap();
            let v_num = (b.position - a.position) / (2.0 * dt);
            let v = train_state_at(&track, &profile, t).unwrap().velocity;
            assert!((v_num - v).norm() < 1e-3, "velocity mismatch at t={t}: {}", (v_num - v).norm());
            t += 7.3;
        }
    }

    #[test]
    fn deployment_alternates_sides() {
        let track = build_track(1740.0, &CurvatureSpec::straight(), 0).unwrap();
        let d = deploy_rrhs(&track, 580.0, 5.0, ArrayGeometry::new(8, 4)).unwrap();
        assert_eq!(d.rrhs.len(), 4);
        let expect = [(0.0, 5.0), (580.0, -5.0), (1160.0, 5.0), (1740.0, -5.0)];
        for (rrh, (x, y)) in d.rrhs.iter().zip(expect) {
            assert_abs_diff_eq!(rrh.position.x, x, epsilon = 1e-6);
            assert_abs_diff_eq!(rrh.position.y, y, epsilon = 1e-6);
        }
    }

    #[test]
    fn panels_are_45_degrees_off_normal() {
        let track = build_track(1740.0, &CurvatureSpec::straight(), 0).unwrap();
        let d = deploy_rrhs(&track, 580.0, 5.0, ArrayGeometry::new(8, 4)).unwrap();
        for rrh in &d.rrhs {
            let diff = wrap_angle(rrh.panels[1] - rrh.panels[0]).abs();
            assert_abs_diff_eq!(diff, FRAC_PI_2, epsilon = 1e-9);
            // Straight track along x: the toward-track normal is +-pi/2, so
            // every boresight is 45 degrees off the y-axis.
            for &b in &rrh.panels {
                let off_normal = wrap_angle(b - FRAC_PI_2).abs().min(wrap_angle(b + FRAC_PI_2).abs());
                assert_abs_diff_eq!(off_normal, FRAC_PI_4, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn oversized_isd_degenerates_to_single_rrh() {
        let track = build_track(300.0, &CurvatureSpec::straight(), 0).unwrap();
        let d = deploy_rrhs(&track, 580.0, 5.0, ArrayGeometry::new(8, 4)).unwrap();
        assert_eq!(d.rrhs.len(), 1);
        assert_abs_diff_eq!(d.rrhs[0].arc_m, 0.0);
    }

    #[test]
    fn straight_deployment_periodicity() {
        let track = build_track(5_800.0, &CurvatureSpec::straight(), 0).unwrap();
        let d = deploy_rrhs(&track, 580.0, 5.0, ArrayGeometry::new(8, 4)).unwrap();
        for pair in d.rrhs.chunks(2) {
            if pair.len() == 2 {
                assert_abs_diff_eq!(pair[1].position.x - pair[0].position.x, 580.0, epsilon = 1e-9);
            }
        }
        // Same side repeats every 2*isd.
        for i in 0..d.rrhs.len().saturating_sub(2) {
            assert_abs_diff_eq!(d.rrhs[i + 2].position.y, d.rrhs[i].position.y, epsilon = 1e-9);
            assert_abs_diff_eq!(
                d.rrhs[i + 2].position.x - d.rrhs[i].position.x,
                1160.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn matched_beam_peaks_at_element_count() {
        let g = ArrayGeometry::new(8, 4);
        assert_abs_diff_eq!(beam_gain_db(&g, 0.3, 0.3), 10.0 * 32.0_f64.log10(), epsilon = 1e-9);
        assert_abs_diff_eq!(beam_gain_db(&g, 0.3, 0.3), 15.0515, epsilon = 1e-3);
    }

    #[test]
    fn single_element_is_isotropic() {
        let g = ArrayGeometry::new(1, 1);
        for i in 0..16 {
            let az = -PI + i as f64 * 0.39;
            assert_abs_diff_eq!(beam_gain_db(&g, 0.0, az), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_matches_direct_summation() {
        // Independent oracle: brute-force sum of per-element phasors.
        let g = ArrayGeometry::new(8, 4);
        let steer = 0.0_f64;
        let signal = 30.0_f64.to_radians();
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for h in 0..8 {
            for _v in 0..4 {
                let phase = std::f64::consts::TAU * 0.5 * h as f64 * (signal.sin() - steer.sin());
                acc += num_complex::Complex64::from_polar(1.0, phase);
            }
        }
        let oracle_linear = acc.norm_sqr() / 32.0;
        let got_linear = 10.0_f64.powf(beam_gain_db(&g, steer, signal) / 10.0);
        assert_abs_diff_eq!(got_linear, oracle_linear, epsilon = 1e-9);
    }

    #[test]
    fn array_factor_bounded_by_element_count() {
        let g = ArrayGeometry::new(8, 4);
        let peak = 10.0 * 32.0_f64.log10();
        for i in 0..180 {
            let sig = -1.5 + i as f64 * (3.0 / 180.0);
            let gain = beam_gain_db(&g, 0.25, sig);
            assert!(gain <= peak + 1e-9);
            if (sig - 0.25).abs() > 1e-3 {
                assert!(gain < peak, "non-steer direction {sig} reached the peak");
            }
        }
    }

    #[test]
    fn response_is_unit_magnitude() {
        let v = array_response(&ArrayGeometry::new(4, 4), 0.7, -0.2);
        assert_eq!(v.len(), 16);
        for e in v {
            assert_abs_diff_eq!(e.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn codebook_covers_span() {
        let cb = train_codebook(&ArrayGeometry::new(4, 4));
        assert!(cb.len() >= 3);
        assert!(cb.first().unwrap() >= &(-60.1_f64.to_radians()));
        assert!(cb.last().unwrap() <= &60.1_f64.to_radians());
        // Steps are at most one half-power beamwidth.
        for w in cb.windows(2) {
            assert!(w[1] - w[0] <= ArrayGeometry::new(4, 4).hpbw_rad() + 1e-12);
        }
    }
}
