//! Closed-loop simulated flight: render a depth image from the current pose,
//! replan within a budget, track the newest plan, and fall back to the last
//! plan (which ends at rest) when planning fails.
//!
//! The world frame has z up; the vehicle carries a forward-looking camera
//! (camera z along the vehicle's forward axis, camera y down) whose yaw
//! follows the velocity direction. Tracking is kinematically perfect: the
//! pose advances by exact evaluation of the active trajectory.

use nalgebra::{Matrix3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::planner::{find_lowest_cost_trajectory, PlannerConfig};
use crate::scene::{OrientedBox, Scene};
use crate::trajectory::{Trajectory, VehicleState};

/// Speed below which the vehicle counts as at rest.
const REST_SPEED: f64 = 1e-3;
/// Speed above which the camera yaw follows the velocity direction.
const YAW_FOLLOW_SPEED: f64 = 0.1;

/// Static world the simulation flies through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimWorld {
    pub scene: Scene,
    pub camera: CameraModel,
    pub start_position: Vector3<f64>,
    pub start_yaw: f64,
    /// Initial exploration direction, horizontal, world frame.
    pub initial_direction: Unit<Vector3<f64>>,
    pub goal_center: Vector3<f64>,
    pub goal_radius: f64,
    pub frame_rate: f64,
}

/// Geometry of the U-shaped corridor world.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorridorParams {
    pub leg_length: f64,
    pub width: f64,
    pub height: f64,
    pub wall_thickness: f64,
    /// Clutter boxes placed along each leg, hugging alternating walls.
    pub clutter_per_leg: usize,
    pub clutter_seed: u64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            leg_length: 10.0,
            width: 2.5,
            height: 2.5,
            wall_thickness: 0.2,
            clutter_per_leg: 0,
            clutter_seed: 0,
        }
    }
}

impl SimWorld {
    /// U-shaped corridor: one leg out along +x, a turn region, and a second
    /// leg back along -x, with floor and ceiling. The run starts near the
    /// beginning of the first leg and the goal sits at the far end of the
    /// second.
    pub fn u_corridor(params: &CorridorParams, camera: CameraModel, frame_rate: f64) -> Self {
        let p = params;
        let w = p.width;
        let t = p.wall_thickness;
        let len = p.leg_length;
        // Leg 1 spans y in [-w/2, w/2]; leg 2 spans y in [-1.5w - t, -w/2 - t].
        let y_top = 0.5 * w;
        let y_mid_lo = -0.5 * w;
        let y_leg2_hi = y_mid_lo - t;
        let y_bot = y_leg2_hi - w;
        // Turn region spans x in [len, len + w].
        let x_far = len + w;

        let mut boxes = vec![
            // Outer wall along leg 1 (y = y_top side), full length plus turn.
            OrientedBox::from_bounds(
                Vector3::new(-t, y_top, 0.0),
                Vector3::new(x_far + t, y_top + t, p.height),
            ),
            // Far end wall (closes the turn region).
            OrientedBox::from_bounds(
                Vector3::new(x_far, y_bot - t, 0.0),
                Vector3::new(x_far + t, y_top + t, p.height),
            ),
            // Outer wall along leg 2 (y = y_bot side).
            OrientedBox::from_bounds(
                Vector3::new(-t, y_bot - t, 0.0),
                Vector3::new(x_far + t, y_bot, p.height),
            ),
            // Dividing wall between the legs, stopping before the turn.
            OrientedBox::from_bounds(
                Vector3::new(-t, y_leg2_hi, 0.0),
                Vector3::new(len, y_mid_lo, p.height),
            ),
            // Near end wall (behind the start and closing leg 2's far end).
            OrientedBox::from_bounds(
                Vector3::new(-t, y_bot - t, 0.0),
                Vector3::new(0.0, y_top + t, p.height),
            ),
            // Floor and ceiling.
            OrientedBox::from_bounds(
                Vector3::new(-t, y_bot - t, -t),
                Vector3::new(x_far + t, y_top + t, 0.0),
            ),
            OrientedBox::from_bounds(
                Vector3::new(-t, y_bot - t, p.height),
                Vector3::new(x_far + t, y_top + t, p.height + t),
            ),
        ];

        let start = Vector3::new(1.0, 0.0, 0.5 * p.height);
        let leg2_center_y = 0.5 * (y_leg2_hi + y_bot);
        let goal = Vector3::new(1.0, leg2_center_y, 0.5 * p.height);

        let mut rng = ChaCha8Rng::seed_from_u64(p.clutter_seed);
        for leg in 0..2 {
            let leg_center_y = if leg == 0 { 0.0 } else { leg2_center_y };
            for i in 0..p.clutter_per_leg {
                let hx = rng.gen_range(0.1..0.3);
                let hy = rng.gen_range(0.1..0.3);
                let hz = rng.gen_range(0.1..0.3);
                let x = rng.gen_range(3.0..len - 1.0);
                // Hug alternating walls so a flyable gap always remains.
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                let y = leg_center_y + side * (0.5 * w - hy - rng.gen_range(0.05..0.2));
                let z = rng.gen_range(0.8..p.height - 0.8);
                boxes.push(OrientedBox::axis_aligned(
                    Vector3::new(x, y, z),
                    Vector3::new(hx, hy, hz),
                ));
            }
        }

        Self {
            scene: Scene::new(boxes),
            camera,
            start_position: start,
            start_yaw: 0.0,
            initial_direction: Vector3::x_axis(),
            goal_center: goal,
            goal_radius: 1.0,
            frame_rate,
        }
    }

    /// Sealed chamber around the start: every endpoint the planner samples is
    /// behind a wall, so planning always fails and the vehicle must stay put.
    pub fn sealed_chamber(camera: CameraModel, frame_rate: f64) -> Self {
        let half = 1.0;
        let t = 0.2;
        let lo = -half - t;
        let hi = half + t;
        let boxes = vec![
            OrientedBox::from_bounds(Vector3::new(half, lo, lo), Vector3::new(hi, hi, hi)),
            OrientedBox::from_bounds(Vector3::new(lo, lo, lo), Vector3::new(-half, hi, hi)),
            OrientedBox::from_bounds(Vector3::new(lo, half, lo), Vector3::new(hi, hi, hi)),
            OrientedBox::from_bounds(Vector3::new(lo, lo, lo), Vector3::new(hi, -half, hi)),
            OrientedBox::from_bounds(Vector3::new(lo, lo, half), Vector3::new(hi, hi, hi)),
            OrientedBox::from_bounds(Vector3::new(lo, lo, lo), Vector3::new(hi, hi, -half)),
        ];
        Self {
            scene: Scene::new(boxes),
            camera,
            start_position: Vector3::zeros(),
            start_yaw: 0.0,
            initial_direction: Vector3::x_axis(),
            goal_center: Vector3::new(1e6, 0.0, 0.0),
            goal_radius: 0.1,
            frame_rate,
        }
    }

    /// Unbounded empty world looking along +x.
    pub fn open_space(camera: CameraModel, frame_rate: f64) -> Self {
        Self {
            scene: Scene::default(),
            camera,
            start_position: Vector3::zeros(),
            start_yaw: 0.0,
            initial_direction: Vector3::x_axis(),
            goal_center: Vector3::new(1e6, 0.0, 0.0),
            goal_radius: 0.1,
            frame_rate,
        }
    }
}

/// Per-run settings; the planner config's seed field is replaced by a
/// per-frame stream derived from `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub planner: PlannerConfig,
    pub seed: u64,
}

/// Mutable state of the simulated vehicle.
#[derive(Debug, Clone)]
pub struct SimState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub yaw: f64,
    pub direction: Unit<Vector3<f64>>,
    /// World-frame active trajectory, its id, and tracking time into it.
    pub active: Option<(usize, f64)>,
    pub last_stage_failed: bool,
    pub frame: u64,
}

impl SimState {
    fn at_start(world: &SimWorld) -> Self {
        Self {
            position: world.start_position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            yaw: world.start_yaw,
            direction: world.initial_direction,
            active: None,
            last_stage_failed: false,
            frame: 0,
        }
    }

    pub fn at_rest(&self) -> bool {
        self.velocity.norm() < REST_SPEED
    }
}

/// One frame of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub position: [f64; 3],
    pub yaw: f64,
    pub speed: f64,
    pub at_rest: bool,
    pub planned: bool,
    pub candidates: u64,
    pub collision_free: u64,
    pub pyramids: usize,
    pub planner_elapsed_s: Option<f64>,
    pub active_trajectory: Option<usize>,
    pub direction: [f64; 3],
    pub clearance: f64,
}

/// Aggregate statistics recomputable from the per-frame records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub frames: u64,
    pub reached_goal: bool,
    pub success_fraction: f64,
    /// Mean candidates and pyramids over successful planning stages.
    pub mean_candidates: f64,
    pub mean_pyramids: f64,
    pub max_speed: f64,
    pub distance_traveled: f64,
    pub safety_violation: Option<u64>,
}

/// Full record of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimLog {
    pub frames: Vec<FrameRecord>,
    /// Every trajectory the planner accepted, world frame, in adoption order.
    pub trajectories: Vec<Trajectory>,
    pub summary: SimSummary,
}

impl SimLog {
    /// One JSON object per frame record.
    pub fn write_jsonl<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for rec in &self.frames {
            serde_json::to_writer(&mut *w, rec)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Recomputes the aggregate statistics from the frame records.
    pub fn recompute_summary(&self) -> SimSummary {
        summarize(&self.frames, self.summary.reached_goal)
    }
}

fn summarize(frames: &[FrameRecord], reached_goal: bool) -> SimSummary {
    let stages = frames.len() as f64;
    let successes: Vec<&FrameRecord> = frames.iter().filter(|f| f.planned).collect();
    let mean = |f: &dyn Fn(&FrameRecord) -> f64| -> f64 {
        if successes.is_empty() {
            f64::NAN
        } else {
            successes.iter().map(|r| f(r)).sum::<f64>() / successes.len() as f64
        }
    };
    let mut distance = 0.0;
    for pair in frames.windows(2) {
        let a = Vector3::from(pair[0].position);
        let b = Vector3::from(pair[1].position);
        distance += (b - a).norm();
    }
    SimSummary {
        frames: frames.len() as u64,
        reached_goal,
        success_fraction: if frames.is_empty() {
            f64::NAN
        } else {
            successes.len() as f64 / stages
        },
        mean_candidates: mean(&|r| r.candidates as f64),
        mean_pyramids: mean(&|r| r.pyramids as f64),
        max_speed: frames.iter().map(|r| r.speed).fold(0.0, f64::max),
        distance_traveled: distance,
        safety_violation: frames
            .iter()
            .find(|r| r.clearance < 0.0)
            .map(|r| r.frame),
    }
}

/// Rotates the exploration direction 90 degrees to the vehicle's right about
/// the world vertical exactly when the vehicle is at rest and the last
/// planning stage failed; otherwise returns it unchanged.
pub fn update_exploration_direction(
    direction: &Unit<Vector3<f64>>,
    at_rest: bool,
    stage_failed: bool,
) -> Unit<Vector3<f64>> {
    if at_rest && stage_failed {
        Unit::new_normalize(Vector3::new(direction.y, -direction.x, direction.z))
    } else {
        *direction
    }
}

/// Camera-to-world rotation for a level vehicle at `yaw`: camera x right,
/// camera y down, camera z forward.
pub fn camera_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::from_columns(&[
        Vector3::new(s, -c, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(c, s, 0.0),
    ])
}

fn transform_scene_to_camera(scene: &Scene, rot_wc: &Matrix3<f64>, pos: &Vector3<f64>) -> Scene {
    let rot_cw = rot_wc.transpose();
    let boxes = scene
        .boxes
        .iter()
        .map(|b| OrientedBox {
            center: rot_cw * (b.center - pos),
            half_extents: b.half_extents,
            rotation_rows: {
                let m = rot_cw * b.rotation();
                let mut rows = [[0.0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        rows[r][c] = m[(r, c)];
                    }
                }
                rows
            },
        })
        .collect();
    Scene::new(boxes)
}

fn transform_trajectory_to_world(
    traj: &Trajectory,
    rot_wc: &Matrix3<f64>,
    pos: &Vector3<f64>,
) -> Trajectory {
    Trajectory {
        alpha: rot_wc * traj.alpha,
        beta: rot_wc * traj.beta,
        gamma: rot_wc * traj.gamma,
        init: VehicleState::new(
            rot_wc * traj.init.position + pos,
            rot_wc * traj.init.velocity,
            rot_wc * traj.init.acceleration,
        ),
        duration: traj.duration,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Advances the simulation by one frame: render, replan, adopt or fall back,
/// then track for one frame period. Returns the frame record.
pub fn step(
    world: &SimWorld,
    cfg: &SimConfig,
    state: &mut SimState,
    trajectories: &mut Vec<Trajectory>,
) -> FrameRecord {
    let rot_wc = camera_rotation(state.yaw);
    let rot_cw = rot_wc.transpose();

    let camera_scene = transform_scene_to_camera(&world.scene, &rot_wc, &state.position);
    let image = camera_scene.render(&world.camera);

    let camera_state = VehicleState::new(
        Vector3::zeros(),
        rot_cw * state.velocity,
        rot_cw * state.acceleration,
    );
    let mut stage_cfg = cfg.planner.clone();
    stage_cfg.seed = splitmix64(cfg.seed ^ state.frame.wrapping_mul(0x51_7c_c1_b7_27_22_0a_95));
    stage_cfg.exploration_direction = Unit::new_normalize(rot_cw * state.direction.into_inner());

    let report = find_lowest_cost_trajectory(&camera_state, &image, &stage_cfg);
    let planned = report.best.is_some();
    let was_at_rest = state.at_rest();

    if let Some(best) = &report.best {
        let world_traj = transform_trajectory_to_world(best, &rot_wc, &state.position);
        trajectories.push(world_traj);
        state.active = Some((trajectories.len() - 1, 0.0));
    }
    state.last_stage_failed = !planned;
    state.direction = update_exploration_direction(&state.direction, was_at_rest, !planned);
    // A stuck vehicle yaws in place toward the (rotated) exploration
    // direction so the next stage can sample candidates along it; holding
    // yaw would leave the camera staring at the blocking wall forever.
    if was_at_rest && !planned {
        state.yaw = state.direction.y.atan2(state.direction.x);
    }

    // Track the active trajectory for one frame period.
    let dt = 1.0 / world.frame_rate;
    if let Some((id, elapsed)) = state.active {
        let traj = &trajectories[id];
        let t = elapsed + dt;
        if t >= traj.duration {
            let end = traj.end_state();
            state.position = end.position;
            state.velocity = Vector3::zeros();
            state.acceleration = Vector3::zeros();
            state.active = None;
        } else {
            state.position = traj.position_at(t);
            state.velocity = traj.velocity_at(t);
            state.acceleration = traj.acceleration_at(t);
            state.active = Some((id, t));
        }
    }

    let speed = state.velocity.norm();
    if speed > YAW_FOLLOW_SPEED {
        state.yaw = state.velocity.y.atan2(state.velocity.x);
    }
    state.frame += 1;

    FrameRecord {
        frame: state.frame - 1,
        position: state.position.into(),
        yaw: state.yaw,
        speed,
        at_rest: state.at_rest(),
        planned,
        candidates: report.candidates,
        collision_free: report.collision_free,
        pyramids: report.pyramids_generated,
        planner_elapsed_s: report.elapsed_s,
        active_trajectory: state.active.map(|(id, _)| id),
        direction: state.direction.into_inner().into(),
        clearance: f64::NAN, // filled by the caller, which owns the ground truth
    }
}

/// Runs until the goal region is reached or `max_frames` elapse, asserting
/// ground-truth clearance against the world geometry at every visited pose.
/// A violation stops the run and is recorded in the summary.
pub fn run(world: &SimWorld, cfg: &SimConfig, max_frames: u64) -> SimLog {
    let r = cfg.planner.vehicle_radius;
    let safety_floor = r * (1.0 - 1e-3);
    let mut state = SimState::at_start(world);
    let mut trajectories = Vec::new();
    let mut frames = Vec::new();
    let mut reached_goal = false;
    let mut violated = false;

    debug_assert!(world.scene.clearance(&world.start_position) >= r);

    for _ in 0..max_frames {
        let mut record = step(world, cfg, &mut state, &mut trajectories);
        let clearance = world.scene.clearance(&state.position);
        // Encode violations as negative clearance margin for the summary.
        record.clearance = clearance - safety_floor;
        let bad = record.clearance < 0.0;
        frames.push(record);
        if bad {
            violated = true;
            break;
        }
        if (state.position - world.goal_center).norm() <= world.goal_radius {
            reached_goal = true;
            break;
        }
    }

    let summary = summarize(&frames, reached_goal);
    debug_assert_eq!(summary.safety_violation.is_some(), violated);
    SimLog { frames, trajectories, summary }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Budget;

    fn camera() -> CameraModel {
        CameraModel::with_hfov(160, 120, 86.0, 10.0)
    }

    fn sim_cfg(seed: u64) -> SimConfig {
        SimConfig {
            planner: PlannerConfig {
                budget: Budget::Candidates(150),
                ..PlannerConfig::default()
            },
            seed,
        }
    }

    #[test]
    fn rotation_cycle_returns_to_start() {
        let mut d = Unit::new_normalize(Vector3::new(1.0, 0.0, 0.0));
        let original = d;
        for _ in 0..4 {
            let next = update_exploration_direction(&d, true, true);
            assert!((next.dot(&d)).abs() < 1e-12, "quarter turns are orthogonal");
            d = next;
        }
        assert!((d.into_inner() - original.into_inner()).norm() < 1e-12);
    }

    #[test]
    fn rotation_only_when_at_rest_and_failed() {
        let d = Unit::new_normalize(Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(update_exploration_direction(&d, false, true), d);
        assert_eq!(update_exploration_direction(&d, true, false), d);
        assert_eq!(update_exploration_direction(&d, false, false), d);
        let rotated = update_exploration_direction(&d, true, true);
        // 90 degrees to the right of +x is -y.
        assert!((rotated.into_inner() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn camera_rotation_is_orthonormal_and_forward() {
        for yaw in [0.0, 0.7, -2.1] {
            let rot = camera_rotation(yaw);
            let err = (rot.transpose() * rot - Matrix3::identity()).norm();
            assert!(err < 1e-12);
            // Camera z maps to the horizontal forward direction.
            let fwd = rot * Vector3::z();
            assert!((fwd - Vector3::new(yaw.cos(), yaw.sin(), 0.0)).norm() < 1e-12);
            // Camera y maps to world down.
            let down = rot * Vector3::y();
            assert!((down - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn open_space_advances_along_direction_first_frame() {
        let world = SimWorld::open_space(camera(), 30.0);
        let cfg = sim_cfg(5);
        let mut state = SimState::at_start(&world);
        let mut trajs = Vec::new();
        let rec = step(&world, &cfg, &mut state, &mut trajs);
        assert!(rec.planned);
        assert!(state.position.x > 0.0, "moved forward: {:?}", state.position);
    }

    #[test]
    fn sealed_chamber_never_plans_and_stays_at_rest() {
        let world = SimWorld::sealed_chamber(camera(), 30.0);
        let cfg = sim_cfg(9);
        let log = run(&world, &cfg, 8);
        assert!(log.summary.safety_violation.is_none());
        assert_eq!(log.summary.success_fraction, 0.0);
        for rec in &log.frames {
            assert!(!rec.planned);
            assert_eq!(rec.speed, 0.0);
        }
        // The exploration direction rotates every frame (at rest + failed).
        let d0 = Vector3::from(log.frames[0].direction);
        let d1 = Vector3::from(log.frames[1].direction);
        assert!(d0.dot(&d1).abs() < 1e-12);
    }

    #[test]
    fn seeded_run_is_reproducible() {
        let world = SimWorld::u_corridor(
            &CorridorParams { leg_length: 4.0, ..Default::default() },
            camera(),
            30.0,
        );
        let a = run(&world, &sim_cfg(3), 30);
        let b = run(&world, &sim_cfg(3), 30);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn summary_recomputes_from_frames() {
        let world = SimWorld::open_space(camera(), 30.0);
        let log = run(&world, &sim_cfg(1), 20);
        assert_eq!(log.summary, log.recompute_summary());
    }
}
