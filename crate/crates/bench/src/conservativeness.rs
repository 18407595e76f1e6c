//! Conservativeness of the pyramid checker versus the ground truth, as a
//! function of the pyramid cap: the fraction of in-collision labels that the
//! oracle says are actually free. A single false-free occurrence anywhere is
//! a safety violation and fails the whole sweep.

use pyraplan::camera::CameraModel;
use pyraplan::oracle::ClearanceOracle;
use pyraplan::planner::{is_collision_free, sample_candidate, PlannerConfig};
use pyraplan::pyramid::PyramidStore;
use pyraplan::scene::{random_benchmark_scene, random_initial_state};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{csv_metadata, mean_and_se, trial_seed};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservativenessConfig {
    pub caps: Vec<usize>,
    pub trials: u64,
    pub candidates_per_trial: u64,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub vehicle_radius: f64,
    pub oracle_dt: f64,
}

impl Default for ConservativenessConfig {
    fn default() -> Self {
        Self {
            caps: vec![1, 4, 16, 64],
            trials: 1000,
            candidates_per_trial: 100,
            width: 160,
            height: 120,
            seed: 0,
            vehicle_radius: 0.3,
            oracle_dt: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativenessRow {
    pub cap: usize,
    pub trials: u64,
    /// Trials with at least one in-collision label (the ratio is defined).
    pub defined_trials: u64,
    pub mean_conservativeness: f64,
    pub std_error: f64,
    pub mean_false_free: f64,
}

#[derive(Debug, Clone)]
pub struct ConservativenessOutcome {
    pub rows: Vec<ConservativenessRow>,
    pub total_false_free: u64,
}

struct TrialCounts {
    /// Per cap: (labeled in-collision, erroneously in-collision, false-free).
    per_cap: Vec<(u64, u64, u64)>,
}

fn run_trial(cfg: &ConservativenessConfig, index: u64) -> TrialCounts {
    let camera = CameraModel::with_hfov(cfg.width, cfg.height, 86.0, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, index));
    let scene = random_benchmark_scene(&mut rng);
    let image = scene.render(&camera);
    let state = random_initial_state(&mut rng);
    let planner_cfg = PlannerConfig { vehicle_radius: cfg.vehicle_radius, ..Default::default() };

    let candidates: Vec<_> = (0..cfg.candidates_per_trial)
        .map(|_| sample_candidate(&mut rng, &state, &image, &planner_cfg))
        .collect();
    let oracle = ClearanceOracle::new(&image, cfg.vehicle_radius);
    let truth_free: Vec<bool> = candidates
        .iter()
        .map(|c| oracle.trajectory_free(c, cfg.vehicle_radius, cfg.oracle_dt))
        .collect();

    let per_cap = cfg
        .caps
        .iter()
        .map(|&cap| {
            let capped = PlannerConfig { max_pyramids: Some(cap), ..planner_cfg.clone() };
            let mut store = PyramidStore::new();
            let mut labeled = 0u64;
            let mut erroneous = 0u64;
            let mut false_free = 0u64;
            for (candidate, &truth) in candidates.iter().zip(&truth_free) {
                let free = is_collision_free(candidate, &mut store, &image, &capped);
                if free {
                    if !truth {
                        false_free += 1;
                    }
                } else {
                    labeled += 1;
                    if truth {
                        erroneous += 1;
                    }
                }
            }
            (labeled, erroneous, false_free)
        })
        .collect();
    TrialCounts { per_cap }
}

/// Runs the sweep; trials are sharded over the current rayon pool.
pub fn conservativeness_sweep(cfg: &ConservativenessConfig) -> ConservativenessOutcome {
    let trials: Vec<TrialCounts> =
        (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, i)).collect();

    let mut rows = Vec::with_capacity(cfg.caps.len());
    let mut total_false_free = 0u64;
    for (ci, &cap) in cfg.caps.iter().enumerate() {
        let ratios: Vec<f64> = trials
            .iter()
            .filter_map(|t| {
                let (labeled, erroneous, _) = t.per_cap[ci];
                (labeled > 0).then(|| erroneous as f64 / labeled as f64)
            })
            .collect();
        let false_free_sum: u64 = trials.iter().map(|t| t.per_cap[ci].2).sum();
        total_false_free += false_free_sum;
        let (mean, se) = mean_and_se(&ratios);
        rows.push(ConservativenessRow {
            cap,
            trials: cfg.trials,
            defined_trials: ratios.len() as u64,
            mean_conservativeness: mean,
            std_error: se,
            mean_false_free: false_free_sum as f64 / cfg.trials as f64,
        });
    }
    ConservativenessOutcome { rows, total_false_free }
}

pub fn to_csv(cfg: &ConservativenessConfig, outcome: &ConservativenessOutcome) -> String {
    let mut out = String::new();
    out.push_str(&csv_metadata(cfg, cfg.seed, cfg.width, cfg.height));
    out.push('\n');
    out.push_str("cap,trials,defined_trials,mean_conservativeness,std_error,mean_false_free\n");
    for r in &outcome.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cap,
            r.trials,
            r.defined_trials,
            r.mean_conservativeness,
            r.std_error,
            r.mean_false_free
        ));
    }
    out
}
