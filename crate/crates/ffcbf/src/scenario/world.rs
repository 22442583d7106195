use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ScenarioConfig, ScenarioKind};
use crate::controllers::NominalTarget;
use crate::dynamics::{planar_velocity, VehicleState};

/// Direction a vehicle arrives from. Traffic drives on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    South,
    West,
    North,
    East,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::South,
        Approach::West,
        Approach::North,
        Approach::East,
    ];

    /// Heading of travel on the approach lane.
    pub fn heading(self) -> f64 {
        match self {
            Approach::South => FRAC_PI_2,
            Approach::West => 0.0,
            Approach::North => -FRAC_PI_2,
            Approach::East => PI,
        }
    }

    pub fn direction(self) -> Vector2<f64> {
        match self {
            Approach::South => Vector2::new(0.0, 1.0),
            Approach::West => Vector2::new(1.0, 0.0),
            Approach::North => Vector2::new(0.0, -1.0),
            Approach::East => Vector2::new(-1.0, 0.0),
        }
    }

    /// The approach whose lane a left turn from `self` exits onto, i.e. the
    /// lane that travels in the rotated direction.
    pub fn left(self) -> Approach {
        match self {
            Approach::South => Approach::East,
            Approach::West => Approach::South,
            Approach::North => Approach::West,
            Approach::East => Approach::North,
        }
    }
}

/// A lane centreline: points `offset + direction · s`, where `s = 0` is the
/// intersection centre line crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub approach: Approach,
    pub offset: Vector2<f64>,
    pub direction: Vector2<f64>,
}

impl Lane {
    pub fn new(approach: Approach, lane_width: f64) -> Self {
        let d = approach.direction();
        let right = Vector2::new(d.y, -d.x);
        Self {
            approach,
            offset: right * (0.5 * lane_width),
            direction: d,
        }
    }

    pub fn point(&self, s: f64) -> Vector2<f64> {
        self.offset + self.direction * s
    }

    /// Coordinate along the lane.
    pub fn progress(&self, p: &Vector2<f64>) -> f64 {
        (p - self.offset).dot(&self.direction)
    }

    /// Unsigned distance from the centreline.
    pub fn lateral(&self, p: &Vector2<f64>) -> f64 {
        let rel = p - self.offset;
        (rel - self.direction * rel.dot(&self.direction)).norm()
    }
}

/// Constant-speed reference path for one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub enum Route {
    Straight {
        lane: Lane,
        start: f64,
        speed: f64,
    },
    /// Lane, then a quarter circle to the left, then the exit lane.
    LeftTurn {
        entry: Lane,
        exit: Lane,
        start: f64,
        speed: f64,
        /// Lane coordinate where the arc begins (the box edge).
        arc_start: f64,
        center: Vector2<f64>,
        radius: f64,
    },
}

impl Route {
    pub fn exit_lane(&self) -> &Lane {
        match self {
            Route::Straight { lane, .. } => lane,
            Route::LeftTurn { exit, .. } => exit,
        }
    }

    pub fn speed(&self) -> f64 {
        match self {
            Route::Straight { speed, .. } | Route::LeftTurn { speed, .. } => *speed,
        }
    }

    /// Desired position and velocity `t` seconds into the trial.
    pub fn target(&self, t: f64) -> NominalTarget {
        match self {
            Route::Straight { lane, start, speed } => {
                NominalTarget::new(lane.point(start + speed * t), lane.direction * *speed)
            }
            Route::LeftTurn {
                entry,
                exit,
                start,
                speed,
                arc_start,
                center,
                radius,
            } => {
                let travelled = speed * t;
                let lead_in = arc_start - start;
                let arc_len = FRAC_PI_2 * radius;
                if travelled <= lead_in {
                    NominalTarget::new(entry.point(start + travelled), entry.direction * *speed)
                } else if travelled <= lead_in + arc_len {
                    let theta = (travelled - lead_in) / radius;
                    let rot = Rotation2::new(theta);
                    let radial = rot * (entry.point(*arc_start) - center);
                    NominalTarget::new(center + radial, rot * entry.direction * *speed)
                } else {
                    let beyond = travelled - lead_in - arc_len;
                    let exit_point =
                        center + Rotation2::new(FRAC_PI_2) * (entry.point(*arc_start) - center);
                    let s0 = exit.progress(&exit_point);
                    NominalTarget::new(exit.point(s0 + beyond), exit.direction * *speed)
                }
            }
        }
    }

    /// Whether `position` counts as having left the intersection on the
    /// designated exit lane.
    pub fn has_exited(&self, position: &Vector2<f64>, box_half_width: f64, tolerance: f64) -> bool {
        let lane = self.exit_lane();
        lane.progress(position) >= box_half_width && lane.lateral(position) <= tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub box_half_width: f64,
    pub lanes: Vec<Lane>,
    pub routes: Vec<Route>,
    /// Speed each vehicle starts with.
    pub initial_speeds: Vec<f64>,
}

/// Initial distance and speed of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialDraw {
    pub distance: f64,
    pub speed: f64,
}

/// Lays out the approach lanes and builds one reference route per vehicle.
///
/// Vehicle `i` arrives from `Approach::ALL[i]`. In the turning scenario
/// vehicle 0 turns left.
pub fn build_world(config: &ScenarioConfig, draws: &[InitialDraw]) -> World {
    let half = config.box_half_width();
    let lanes: Vec<Lane> = Approach::ALL
        .iter()
        .map(|a| Lane::new(*a, config.lane_width))
        .collect();
    let routes = draws
        .iter()
        .enumerate()
        .map(|(i, draw)| {
            let lane = lanes[i];
            let start = -half - draw.distance;
            let speed = if config.reference_from_initial {
                draw.speed
            } else {
                config.reference_speed
            };
            if config.scenario == ScenarioKind::OneLeftTurn && i == 0 {
                let exit = Lane::new(lane.approach.left(), config.lane_width);
                let left_normal = Vector2::new(-lane.direction.y, lane.direction.x);
                let radius = half + 0.5 * config.lane_width;
                Route::LeftTurn {
                    entry: lane,
                    exit,
                    start,
                    speed,
                    arc_start: -half,
                    center: lane.point(-half) + left_normal * radius,
                    radius,
                }
            } else {
                Route::Straight { lane, start, speed }
            }
        })
        .collect();
    World {
        box_half_width: half,
        lanes,
        routes,
        initial_speeds: draws.iter().map(|d| d.speed).collect(),
    }
}

/// Deterministic generator for one trial: the batch seed picks the key and
/// the trial index picks the stream.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws `d_i = d0 + U(−Δd, Δd)` and `s_i = s0 + U(−Δs, Δs)` per vehicle.
pub fn randomize_initial<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Vec<InitialDraw> {
    (0..config.num_vehicles)
        .map(|_| {
            let ud: f64 = rng.random();
            let us: f64 = rng.random();
            InitialDraw {
                distance: config.d0 + config.delta_d * (2.0 * ud - 1.0),
                speed: config.s0 + config.delta_s * (2.0 * us - 1.0),
            }
        })
        .collect()
}

/// Places each vehicle on its lane centreline with zero slip.
pub fn initial_states_for(world: &World) -> Vec<VehicleState> {
    world
        .routes
        .iter()
        .zip(&world.initial_speeds)
        .map(|(route, &speed)| {
            let (lane, start) = match route {
                Route::Straight { lane, start, .. } => (lane, *start),
                Route::LeftTurn { entry, start, .. } => (entry, *start),
            };
            let p = lane.point(start);
            VehicleState::new(p.x, p.y, lane.approach.heading(), 0.0, speed)
        })
        .collect()
}

/// Accepts the configuration when no pair is predicted to come within `2R`
/// over `[0, τ̄]` if every vehicle keeps its current velocity.
pub fn clear_over_horizon(states: &[VehicleState], tau_bar: f64, radius: f64) -> bool {
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            let xi = a.position() - b.position();
            let nu = planar_velocity(a) - planar_velocity(b);
            let q = nu.norm_squared();
            let tau = if q > 0.0 {
                (-xi.dot(&nu) / q).clamp(0.0, tau_bar)
            } else {
                0.0
            };
            if (xi + nu * tau).norm() < 2.0 * radius {
                return false;
            }
        }
    }
    true
}
