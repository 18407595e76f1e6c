//! Collision checking of whole trajectories against a pyramid store, and the
//! budgeted random-search planner that picks the lowest-cost dynamically
//! feasible collision-free candidate.

use nalgebra::{Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::image::DepthImage;
use crate::pyramid::{deepest_collision_time, inflate_pyramid, PyramidStore};
use crate::trajectory::{
    DeepestEnd, DynamicLimits, FeasibilityVerdict, MonotonicSection, Trajectory, VehicleState,
};

/// Hard cap on work-list iterations per trajectory; exceeding it declares
/// the trajectory in collision, which is always safe.
const MAX_SECTION_SPLITS: usize = 10_000;

/// Search budget for one planning stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    /// Wall-clock budget in milliseconds, checked once per candidate.
    /// Unavailable on wasm targets (no monotonic clock).
    TimeMs(f64),
    /// Exact number of candidates to evaluate; fully deterministic.
    Candidates(u64),
}

/// Configuration of one planning stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Radius of the sphere around the camera origin that must stay clear.
    pub vehicle_radius: f64,
    /// Unit vector rewarded by the cost function (camera frame).
    pub exploration_direction: Unit<Vector3<f64>>,
    /// Candidate endpoints are deprojected to a depth uniform in this range.
    pub endpoint_depth_range: (f64, f64),
    /// Candidate durations are uniform in this range, seconds.
    pub duration_range: (f64, f64),
    pub budget: Budget,
    pub limits: DynamicLimits,
    pub seed: u64,
    /// Cap on the pyramid store size; inflation refusals past the cap count
    /// as collision.
    pub max_pyramids: Option<usize>,
    /// Optional cap on pyramid depth, meters.
    pub max_pyramid_depth: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            vehicle_radius: 0.3,
            exploration_direction: Vector3::z_axis(),
            endpoint_depth_range: (1.5, 3.0),
            duration_range: (2.0, 3.0),
            budget: Budget::Candidates(1000),
            // Camera frame with the image y-axis pointing down: gravity is +y.
            limits: DynamicLimits {
                f_min: 2.0,
                f_max: 20.0,
                omega_max: 3.0,
                gravity: Vector3::new(0.0, 9.81, 0.0),
            },
            seed: 0,
            max_pyramids: None,
            max_pyramid_depth: None,
        }
    }
}

/// Outcome and bookkeeping of one planning stage. The candidate counters
/// partition: `candidates = cost_pruned + infeasible + collision_checked`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerReport {
    pub best: Option<Trajectory>,
    pub best_cost: Option<f64>,
    pub candidates: u64,
    pub cost_pruned: u64,
    pub infeasible: u64,
    pub collision_checked: u64,
    pub collision_free: u64,
    pub pyramids_generated: usize,
    /// Wall-clock duration of the stage; absent in candidate-budget mode.
    pub elapsed_s: Option<f64>,
    pub seed: u64,
    pub config: PlannerConfig,
}

impl PlannerReport {
    fn empty(cfg: &PlannerConfig) -> Self {
        Self {
            best: None,
            best_cost: None,
            candidates: 0,
            cost_pruned: 0,
            infeasible: 0,
            collision_checked: 0,
            collision_free: 0,
            pyramids_generated: 0,
            elapsed_s: None,
            seed: cfg.seed,
            config: cfg.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Displacement-rate cost: `d . (s(0) - s(T)) / T`. Lower is better;
/// candidates moving fast along `d` score the most negative.
pub fn cost(traj: &Trajectory, direction: &Unit<Vector3<f64>>) -> f64 {
    let displacement = traj.init.position - traj.position_at(traj.duration);
    direction.dot(&displacement) / traj.duration
}

/// Draws a candidate that comes to rest at a uniformly random image position
/// deprojected to a uniformly random depth, over a uniformly random duration.
pub fn sample_candidate<R: Rng + ?Sized>(
    rng: &mut R,
    state: &VehicleState,
    image: &DepthImage,
    cfg: &PlannerConfig,
) -> Trajectory {
    let cam = image.camera();
    let u = rng.gen_range(0.0..cam.width as f64);
    let v = rng.gen_range(0.0..cam.height as f64);
    let depth = rng.gen_range(cfg.endpoint_depth_range.0..cfg.endpoint_depth_range.1);
    let duration = rng.gen_range(cfg.duration_range.0..cfg.duration_range.1);
    let endpoint = cam.deproject(u, v, depth);
    Trajectory::from_boundary(*state, VehicleState::rest(endpoint), duration)
        .expect("sampled boundary conditions are finite with positive duration")
}

/// Whether the trajectory provably stays inside free space, growing the
/// store as needed.
///
/// The trajectory is split into monotonic-depth sections; each section's
/// deepest point is covered by a pyramid (reused from the store or inflated
/// on demand), and the part of the section that exits the pyramid laterally
/// is pushed back for re-checking. Any pyramid-generation failure, a store
/// cap hit, or a deepest point at or behind the camera declares collision.
pub fn is_collision_free(
    traj: &Trajectory,
    store: &mut PyramidStore,
    image: &DepthImage,
    cfg: &PlannerConfig,
) -> bool {
    debug_assert!(
        traj.init.position.norm() < 1e-9,
        "collision checking requires the trajectory to start at the camera origin"
    );
    let max_depth = cfg.max_pyramid_depth.unwrap_or(f64::INFINITY);
    let mut worklist = traj.monotonic_sections(&Vector3::z_axis());

    let mut splits = 0usize;
    while let Some(section) = worklist.pop() {
        splits += 1;
        if splits > MAX_SECTION_SPLITS {
            return false;
        }
        let deepest = traj.position_at(section.deepest_time());
        if deepest.z <= 0.0 {
            return false;
        }
        let pyramid = match store.find_containing(&deepest) {
            Some(p) => *p,
            None => {
                if cfg.max_pyramids.map_or(false, |cap| store.len() >= cap) {
                    return false;
                }
                match inflate_pyramid(&deepest, image, cfg.vehicle_radius, max_depth) {
                    Ok(p) => {
                        store.push(p);
                        p
                    }
                    Err(_) => return false,
                }
            }
        };
        if let Some(t_cross) = deepest_collision_time(&pyramid, traj, &section) {
            let outside = match section.deepest_end {
                DeepestEnd::AtEnd => MonotonicSection {
                    t_start: section.t_start,
                    t_end: t_cross,
                    deepest_end: DeepestEnd::AtEnd,
                },
                DeepestEnd::AtStart => MonotonicSection {
                    t_start: t_cross,
                    t_end: section.t_end,
                    deepest_end: DeepestEnd::AtStart,
                },
            };
            // Sub-microsecond remainders are below any physical motion
            // scale: at the trajectory start they shrink onto the vehicle's
            // own position and are covered by it; anywhere else they cannot
            // be certified and the trajectory is conservatively rejected.
            if outside.t_end - outside.t_start <= 1e-6 {
                if outside.t_start == 0.0 {
                    continue;
                }
                return false;
            }
            worklist.push(outside);
        }
    }
    true
}

/// Random search for the lowest-cost valid candidate within the budget.
///
/// Candidates are evaluated cheapest-test-first: cost pruning, then dynamic
/// feasibility, then collision checking. The pyramid store persists across
/// candidates of the stage.
pub fn find_lowest_cost_trajectory(
    state: &VehicleState,
    image: &DepthImage,
    cfg: &PlannerConfig,
) -> PlannerReport {
    let mut report = PlannerReport::empty(cfg);

    enum Stop {
        Count(u64),
        #[cfg(not(target_arch = "wasm32"))]
        Deadline(std::time::Instant, std::time::Instant),
    }
    let stop = match cfg.budget {
        Budget::Candidates(n) => Stop::Count(n),
        #[cfg(not(target_arch = "wasm32"))]
        Budget::TimeMs(ms) => {
            if !(ms > 0.0) {
                return report;
            }
            let start = std::time::Instant::now();
            Stop::Deadline(start, start + std::time::Duration::from_secs_f64(ms * 1e-3))
        }
        #[cfg(target_arch = "wasm32")]
        Budget::TimeMs(_) => panic!("wall-clock budgets are not available on wasm"),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = PyramidStore::new();
    let mut best: Option<(f64, Trajectory)> = None;

    loop {
        match &stop {
            Stop::Count(n) => {
                if report.candidates >= *n {
                    break;
                }
            }
            #[cfg(not(target_arch = "wasm32"))]
            Stop::Deadline(_, deadline) => {
                if std::time::Instant::now() >= *deadline {
                    break;
                }
            }
        }

        let candidate = sample_candidate(&mut rng, state, image, cfg);
        report.candidates += 1;

        let candidate_cost = cost(&candidate, &cfg.exploration_direction);
        let beats_best = match &best {
            Some((best_cost, _)) => candidate_cost < *best_cost,
            None => candidate_cost < f64::INFINITY,
        };
        if !beats_best {
            report.cost_pruned += 1;
            continue;
        }
        if candidate.feasibility_check(&cfg.limits) != FeasibilityVerdict::Feasible {
            report.infeasible += 1;
            continue;
        }
        report.collision_checked += 1;
        if is_collision_free(&candidate, &mut store, image, cfg) {
            report.collision_free += 1;
            best = Some((candidate_cost, candidate));
        }
    }

    report.pyramids_generated = store.len();
    #[cfg(not(target_arch = "wasm32"))]
    if let Stop::Deadline(start, _) = stop {
        report.elapsed_s = Some(start.elapsed().as_secs_f64());
    }
    if let Some((c, traj)) = best {
        report.best_cost = Some(c);
        report.best = Some(traj);
    }
    report
}
