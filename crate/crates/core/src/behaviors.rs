//! Beacon-relative autonomy behaviors.
//!
//! Every behavior works in the beacon-centric frame: the beacon sits at the origin and the
//! vehicle at the negation of its relative-beacon estimate. Behaviors only ever see the
//! vehicle's own estimate and own sensors. All headings are compass headings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{heading_of, heading_unit, wrap_180};
use crate::waveforms::ModeId;

/// Pure-pursuit lookahead distance (m).
pub const LOOKAHEAD: f64 = 10.0;
/// Radial band (m) over which the loiter field blends from inward to tangent.
pub const LOITER_BLEND: f64 = 10.0;
/// Cross-track error (m) at which line recapture ends.
pub const RECAPTURE_TOLERANCE: f64 = 1.0;
/// Distance (m) to a return line's end at which the vehicle surfaces.
pub const RETURN_ARRIVAL: f64 = 3.0;
/// Maximum time (s) previous setpoints are held while the estimate is unconverged.
pub const UNCONVERGED_HOLD: f64 = 30.0;

/// Loiter circulation sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Cw,
    Ccw,
}

/// A behavior and its parameters, with field names matching the mission tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "snake_case")]
pub enum BehaviorSpec {
    Loiter {
        #[serde(default)]
        offset_x_m: f64,
        #[serde(default)]
        offset_y_m: f64,
        radius_m: f64,
        direction: Rotation,
    },
    Trackline {
        offset_x_m: f64,
        offset_y_m: f64,
        heading_deg: f64,
        length_m: f64,
        buffer_m: f64,
    },
    OffsetFollow {
        offset_x_m: f64,
        offset_y_m: f64,
        buffer_radius_m: f64,
        depth_ceiling_m: f64,
    },
    ReturnSurface {
        offset_x_m: f64,
        offset_y_m: f64,
        length_m: f64,
        heading_deg: f64,
    },
    Abort,
}

impl BehaviorSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            BehaviorSpec::Loiter { radius_m, .. } => positive("radius_m", radius_m),
            BehaviorSpec::Trackline { length_m, buffer_m, .. } => {
                positive("length_m", length_m)?;
                positive("buffer_m", buffer_m)
            }
            BehaviorSpec::OffsetFollow {
                buffer_radius_m,
                depth_ceiling_m,
                ..
            } => {
                positive("buffer_radius_m", buffer_radius_m)?;
                if depth_ceiling_m < 0.0 {
                    return Err(Error::Config("depth_ceiling_m must be non-negative".into()));
                }
                Ok(())
            }
            BehaviorSpec::ReturnSurface { length_m, .. } => positive("length_m", length_m),
            BehaviorSpec::Abort => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BehaviorSpec::Loiter { .. } => "loiter",
            BehaviorSpec::Trackline { .. } => "trackline",
            BehaviorSpec::OffsetFollow { .. } => "offset_follow",
            BehaviorSpec::ReturnSurface { .. } => "return_surface",
            BehaviorSpec::Abort => "abort",
        }
    }
}

/// Per-vehicle assignment of behaviors to modes 1..=4.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeMap(BTreeMap<String, BehaviorSpec>);

impl ModeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, mode: u8, spec: BehaviorSpec) -> Self {
        self.insert(mode, spec);
        self
    }

    pub fn insert(&mut self, mode: u8, spec: BehaviorSpec) {
        self.0.insert(mode.to_string(), spec);
    }

    pub fn get(&self, mode: ModeId) -> Option<&BehaviorSpec> {
        self.0.get(&mode.get().to_string())
    }

    pub fn modes(&self) -> impl Iterator<Item = (u8, &BehaviorSpec)> {
        self.0.iter().filter_map(|(k, v)| k.parse().ok().map(|m| (m, v)))
    }

    pub fn validate(&self) -> Result<()> {
        for (k, spec) in &self.0 {
            let m: u8 = k
                .parse()
                .map_err(|_| Error::Config(format!("mode key {k:?} is not a number")))?;
            if !(1..=4).contains(&m) {
                return Err(Error::ModeOutOfRange(m));
            }
            spec.validate()?;
        }
        Ok(())
    }
}

/// Cruise speed and depth used while transiting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cruise {
    pub speed: f64,
    pub depth: f64,
}

impl Default for Cruise {
    fn default() -> Self {
        Self { speed: 1.0, depth: 2.5 }
    }
}

/// Heading, speed and depth commands for the vehicle controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub heading_deg: f64,
    pub speed: f64,
    pub depth: f64,
    pub thruster_active: bool,
    pub surfaced: bool,
}

impl Setpoints {
    pub fn drive(heading_deg: f64, cruise: Cruise) -> Self {
        Self {
            heading_deg,
            speed: cruise.speed,
            depth: cruise.depth,
            thruster_active: true,
            surfaced: false,
        }
    }

    /// Thruster off; the vehicle floats up.
    pub fn idle(heading_deg: f64) -> Self {
        Self {
            heading_deg,
            speed: 0.0,
            depth: 0.0,
            thruster_active: false,
            surfaced: false,
        }
    }

    pub fn surface(heading_deg: f64) -> Self {
        Self {
            surfaced: true,
            ..Self::idle(heading_deg)
        }
    }
}

/// What the vehicle knows about itself when choosing setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleNav {
    /// Measured compass heading (deg).
    pub heading_deg: f64,
    /// Measured depth (m).
    pub depth: f64,
}

/// Vehicle position in the beacon-centric frame given the relative beacon estimate.
fn vehicle_position(rel_beacon: [f64; 2]) -> [f64; 2] {
    [-rel_beacon[0], -rel_beacon[1]]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn rotate(v: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c]
}

fn heading_to(v: [f64; 2]) -> f64 {
    heading_of(v[0], v[1])
}

/// Loiter heading: tangent to the circle with radial correction, or straight at the tangent point from far out.
pub fn loiter_setpoint(
    rel_beacon: [f64; 2],
    offset: [f64; 2],
    radius: f64,
    direction: Rotation,
    nav: &VehicleNav,
    cruise: Cruise,
) -> Setpoints {
    let d = sub(vehicle_position(rel_beacon), offset);
    let dist = norm(d);
    if dist < 1e-6 {
        return Setpoints::drive(nav.heading_deg, cruise);
    }
    let r_hat = [d[0] / dist, d[1] / dist];
    let sense = match direction {
        Rotation::Ccw => 1.0,
        Rotation::Cw => -1.0,
    };
    if dist > radius + LOITER_BLEND {
        let alpha = (radius / dist).asin().to_degrees();
        let aim = rotate([-r_hat[0], -r_hat[1]], -sense * alpha);
        return Setpoints::drive(heading_to(aim), cruise);
    }
    let t_hat = rotate(r_hat, sense * 90.0);
    let k = ((dist - radius) / LOITER_BLEND).clamp(-1.0, 1.0);
    let v = [t_hat[0] - k * r_hat[0], t_hat[1] - k * r_hat[1]];
    Setpoints::drive(heading_to(v), cruise)
}

/// Transit sense and recapture flag of a trackline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TracklineState {
    /// +1 toward the forward end (along the line heading), -1 toward the other end, 0 before start.
    pub sense: i8,
    pub recapturing: bool,
}

/// Back-and-forth pure-pursuit line following; leaving the buffer band flags a recapture.
#[allow(clippy::too_many_arguments)]
pub fn trackline_setpoint(
    rel_beacon: [f64; 2],
    offset: [f64; 2],
    heading_deg: f64,
    length: f64,
    buffer: f64,
    state: &mut TracklineState,
    cruise: Cruise,
) -> Setpoints {
    let p = sub(vehicle_position(rel_beacon), offset);
    let u = heading_unit(heading_deg);
    let n = [u[1], -u[0]];
    let s = dot(p, u);
    let e = dot(p, n);
    let half = length / 2.0;
    if state.sense == 0 {
        state.sense = if s <= 0.0 { 1 } else { -1 };
    }
    if state.sense > 0 && s >= half {
        state.sense = -1;
    } else if state.sense < 0 && s <= -half {
        state.sense = 1;
    }
    if e.abs() > buffer {
        state.recapturing = true;
    } else if state.recapturing && e.abs() < RECAPTURE_TOLERANCE {
        state.recapturing = false;
    }
    let along = s + f64::from(state.sense) * LOOKAHEAD;
    let target = [along * u[0], along * u[1]];
    Setpoints::drive(heading_to(sub(target, p)), cruise)
}

/// Sprint-and-drift progress of an offset follow.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OffsetFollowState {
    /// True once the offset point was reached; cleared when the buffer is left or the ceiling breached.
    pub on_station: bool,
}

/// Radius (m) within which an offset-follow vehicle counts as having reached its station.
pub fn station_radius(buffer_radius: f64) -> f64 {
    (buffer_radius / 3.0).max(3.0)
}

/// Drive to the offset point, then drift with the thruster off until pushed out of the buffer or above the ceiling.
pub fn offset_follow_setpoint(
    rel_beacon: [f64; 2],
    offset: [f64; 2],
    buffer_radius: f64,
    depth_ceiling: f64,
    nav: &VehicleNav,
    state: &mut OffsetFollowState,
    cruise: Cruise,
) -> Setpoints {
    let d = sub(offset, vehicle_position(rel_beacon));
    let dist = norm(d);
    if dist > buffer_radius || nav.depth < depth_ceiling {
        state.on_station = false;
    } else if !state.on_station && dist <= station_radius(buffer_radius) && nav.depth >= cruise.depth - 0.5 {
        state.on_station = true;
    }
    if state.on_station {
        return Setpoints::idle(nav.heading_deg);
    }
    let heading = if dist > 1e-6 { heading_to(d) } else { nav.heading_deg };
    Setpoints::drive(heading, cruise)
}

/// Progress along a return line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReturnState {
    pub done: bool,
}

/// Follow the return line from the nearest point of approach to its end, then surface.
pub fn return_surface_setpoint(
    rel_beacon: [f64; 2],
    offset: [f64; 2],
    length: f64,
    heading_deg: f64,
    state: &mut ReturnState,
    cruise: Cruise,
) -> Setpoints {
    let p = vehicle_position(rel_beacon);
    let u = heading_unit(heading_deg);
    let end = offset;
    let start = [end[0] - length * u[0], end[1] - length * u[1]];
    let s = dot(sub(p, start), u);
    if state.done || norm(sub(p, end)) <= RETURN_ARRIVAL || s >= length {
        state.done = true;
        return Setpoints::surface(heading_deg);
    }
    let foot = s.clamp(0.0, length);
    let along = (foot + LOOKAHEAD).min(length);
    let target = [start[0] + along * u[0], start[1] + along * u[1]];
    Setpoints::drive(heading_to(sub(target, p)), cruise)
}

/// Entry point of a return line: perpendicular foot of the vehicle clamped to the segment.
pub fn return_entry_point(rel_beacon: [f64; 2], offset: [f64; 2], length: f64, heading_deg: f64) -> [f64; 2] {
    let p = vehicle_position(rel_beacon);
    let u = heading_unit(heading_deg);
    let start = [offset[0] - length * u[0], offset[1] - length * u[1]];
    let s = dot(sub(p, start), u).clamp(0.0, length);
    [start[0] + s * u[0], start[1] + s * u[1]]
}

/// Internal state of whichever behavior is active.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BehaviorState {
    pub trackline: TracklineState,
    pub offset_follow: OffsetFollowState,
    pub ret: ReturnState,
}

/// Route the confirmed mode to its behavior.
///
/// `rel_beacon` is the converged relative-beacon estimate (x, y). Without a confirmed mode the
/// vehicle idles with its thruster off.
pub fn dispatch(
    mode: Option<ModeId>,
    map: &ModeMap,
    rel_beacon: [f64; 2],
    nav: &VehicleNav,
    state: &mut BehaviorState,
    cruise: Cruise,
) -> Result<Setpoints> {
    let Some(mode) = mode.filter(|m| !m.is_off()) else {
        return Ok(Setpoints::idle(nav.heading_deg));
    };
    let spec = map.get(mode).ok_or(Error::ModeNotMapped(mode.get()))?;
    Ok(match *spec {
        BehaviorSpec::Loiter {
            offset_x_m,
            offset_y_m,
            radius_m,
            direction,
        } => loiter_setpoint(rel_beacon, [offset_x_m, offset_y_m], radius_m, direction, nav, cruise),
        BehaviorSpec::Trackline {
            offset_x_m,
            offset_y_m,
            heading_deg,
            length_m,
            buffer_m,
        } => trackline_setpoint(
            rel_beacon,
            [offset_x_m, offset_y_m],
            heading_deg,
            length_m,
            buffer_m,
            &mut state.trackline,
            cruise,
        ),
        BehaviorSpec::OffsetFollow {
            offset_x_m,
            offset_y_m,
            buffer_radius_m,
            depth_ceiling_m,
        } => offset_follow_setpoint(
            rel_beacon,
            [offset_x_m, offset_y_m],
            buffer_radius_m,
            depth_ceiling_m,
            nav,
            &mut state.offset_follow,
            cruise,
        ),
        BehaviorSpec::ReturnSurface {
            offset_x_m,
            offset_y_m,
            length_m,
            heading_deg,
        } => return_surface_setpoint(
            rel_beacon,
            [offset_x_m, offset_y_m],
            length_m,
            heading_deg,
            &mut state.ret,
            cruise,
        ),
        BehaviorSpec::Abort => Setpoints::surface(nav.heading_deg),
    })
}

/// Per-vehicle autonomy: mode changes, unconverged-estimate hold and behavior dispatch.
#[derive(Debug, Clone)]
pub struct Autonomy {
    map: ModeMap,
    cruise: Cruise,
    active: Option<ModeId>,
    state: BehaviorState,
    last: Setpoints,
    unconverged_since: Option<f64>,
}

impl Autonomy {
    /// `initial` is held as the previous setpoint until the first converged estimate.
    pub fn new(map: ModeMap, cruise: Cruise, initial: Setpoints) -> Self {
        Self {
            map,
            cruise,
            active: None,
            state: BehaviorState::default(),
            last: initial,
            unconverged_since: None,
        }
    }

    pub fn active_mode(&self) -> Option<ModeId> {
        self.active
    }

    pub fn active_behavior(&self) -> &'static str {
        match self.active.and_then(|m| self.map.get(m)) {
            Some(spec) => spec.name(),
            None => "idle",
        }
    }

    pub fn last(&self) -> Setpoints {
        self.last
    }

    /// True while a trackline has been joined and is not being recaptured.
    pub fn on_line(&self) -> bool {
        self.active_behavior() == "trackline" && self.state.trackline.sense != 0 && !self.state.trackline.recapturing
    }

    /// Choose setpoints at time `t` (s). `estimate` is `(x, y, converged)` of the relative beacon.
    pub fn step(&mut self, t: f64, confirmed: Option<ModeId>, estimate: Option<([f64; 2], bool)>, nav: &VehicleNav) -> Result<Setpoints> {
        if confirmed != self.active {
            self.active = confirmed;
            self.state = BehaviorState::default();
        }
        if self.state.ret.done {
            self.last = Setpoints::surface(nav.heading_deg);
            return Ok(self.last);
        }
        let abort = self
            .active
            .and_then(|m| self.map.get(m))
            .is_some_and(|s| matches!(s, BehaviorSpec::Abort));
        if self.active.is_none() {
            // idle without forgetting the held setpoint
            self.unconverged_since = None;
            return Ok(Setpoints::idle(nav.heading_deg));
        }
        if abort {
            self.unconverged_since = None;
            self.last = dispatch(self.active, &self.map, [0.0, 0.0], nav, &mut self.state, self.cruise)?;
            return Ok(self.last);
        }
        match estimate {
            Some((rel, true)) => {
                self.unconverged_since = None;
                self.last = dispatch(self.active, &self.map, rel, nav, &mut self.state, self.cruise)?;
                Ok(self.last)
            }
            _ => {
                let since = *self.unconverged_since.get_or_insert(t);
                if t - since > UNCONVERGED_HOLD {
                    Ok(Setpoints::idle(nav.heading_deg))
                } else {
                    Ok(self.last)
                }
            }
        }
    }
}

/// Signed heading error `a - b` in degrees.
pub fn heading_error(a: f64, b: f64) -> f64 {
    wrap_180(a - b)
}
