//! Benchmark subcommands behind the CLI: conservativeness sweep, collision
//! checking speed comparison, planner budget sweep, and the closed-loop
//! simulation driver. Everything is seeded; trials derive independent RNG
//! streams from (seed, trial index) so results do not depend on the thread
//! count.

pub mod budget;
pub mod conservativeness;
pub mod simcmd;
pub mod timing;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Mixes a base seed with a trial index into an independent stream seed.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut x = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Short hash of a serializable config, for the CSV metadata line.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Metadata comment line carried at the top of every CSV.
pub fn csv_metadata<T: Serialize>(cfg: &T, seed: u64, width: u32, height: u32) -> String {
    format!("# seed={seed} config={} image={width}x{height}", config_hash(cfg))
}

/// Mean and standard error of a sample; NaN for empty input.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Median of a sample; NaN for empty input.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Builds a rayon pool honoring `--threads` or `BENCH_THREADS`.
pub fn thread_pool(threads: Option<usize>) -> rayon::ThreadPool {
    let n = threads
        .or_else(|| std::env::var("BENCH_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(num_cpus_available);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool")
}

fn num_cpus_available() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
