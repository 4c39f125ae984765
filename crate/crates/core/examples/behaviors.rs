//! Noiseless closed-loop runs of each beacon-relative behavior with the beacon at the origin.

use owtt::behaviors::{
    loiter_setpoint, offset_follow_setpoint, return_surface_setpoint, trackline_setpoint, Cruise, OffsetFollowState,
    ReturnState, Rotation, Setpoints, TracklineState, VehicleNav,
};
use owtt::world::{step_vehicle, VehicleParams, VehicleTruth, DYNAMICS_RATE};

fn run(mut v: VehicleTruth, seconds: usize, current: [f64; 2], mut policy: impl FnMut(&VehicleTruth) -> Setpoints) -> VehicleTruth {
    let params = VehicleParams::default();
    let dt = 1.0 / f64::from(DYNAMICS_RATE);
    for _ in 0..seconds {
        let sp = policy(&v);
        for _ in 0..DYNAMICS_RATE {
            v = step_vehicle(&v, &sp, &params, current, dt);
        }
    }
    v
}

fn nav(v: &VehicleTruth) -> VehicleNav {
    VehicleNav {
        heading_deg: v.heading,
        depth: v.depth,
    }
}

fn main() {
    let cruise = Cruise::default();
    let start = VehicleTruth::new(80.0, 40.0, cruise.depth, 0.0);

    let v = run(start, 600, [0.0, 0.0], |v| {
        loiter_setpoint([-v.x, -v.y], [0.0, 0.0], 36.0, Rotation::Ccw, &nav(v), cruise)
    });
    println!("loiter 36 m: final radius {:.2} m", v.x.hypot(v.y));

    let mut line = TracklineState::default();
    let v = run(start, 600, [0.0, 0.0], |v| {
        trackline_setpoint([-v.x, -v.y], [-14.1, -5.1], 160.0, 120.0, 14.0, &mut line, cruise)
    });
    println!("trackline: position ({:.1}, {:.1}), sense {}", v.x, v.y, line.sense);

    let mut station = OffsetFollowState::default();
    let mut thrusting = 0;
    let v = run(start, 1200, [0.05, 0.0], |v| {
        let sp = offset_follow_setpoint([-v.x, -v.y], [7.5, -26.0], 15.0, 1.0, &nav(v), &mut station, cruise);
        thrusting += usize::from(sp.thruster_active);
        sp
    });
    println!(
        "offset follow: {:.1} m from station after 1200 s, thruster on {thrusting} s",
        (v.x - 7.5).hypot(v.y + 26.0)
    );

    let mut ret = ReturnState::default();
    let v = run(start, 600, [0.0, 0.0], |v| {
        return_surface_setpoint([-v.x, -v.y], [2.2, -2.2], 150.0, 300.0, &mut ret, cruise)
    });
    println!("return: surfaced {}, depth {:.2} m, {:.1} m from end point", ret.done, v.depth, (v.x - 2.2).hypot(v.y + 2.2));
}
