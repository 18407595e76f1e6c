//! Camera, renderer, clearance oracle and k-d baseline checked against
//! brute-force re-implementations: supersampled ray casting, dense
//! discretization of the occupied set, and linear scans.

use nalgebra::{Matrix3, Vector3};
use pyraplan::camera::CameraModel;
use pyraplan::image::DepthImage;
use pyraplan::kdtree::{kd_check, KdTree};
use pyraplan::oracle::ClearanceOracle;
use pyraplan::planner::{sample_candidate, PlannerConfig};
use pyraplan::scene::{random_benchmark_scene, random_initial_state, OrientedBox, Scene};
use pyraplan::trajectory::{Trajectory, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn camera_160() -> CameraModel {
    CameraModel::new(100.0, 80.0, 60.0, 160, 120, 10.0).unwrap()
}

fn camera_80() -> CameraModel {
    CameraModel::new(50.0, 40.0, 30.0, 80, 60, 10.0).unwrap()
}

#[test]
fn project_deproject_round_trip() {
    let cam = camera_160();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1_000 {
        let p = Vector3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.1..9.0),
        );
        let (u, v, z) = cam.project(&p).unwrap();
        let back = cam.deproject(u, v, z);
        assert!((back - p).norm() <= 1e-9 * (1.0 + p.norm()), "{p:?} -> {back:?}");
    }
}

/// Independent slab-method ray/box intersection used by the test oracles.
fn ray_box_depth(dir: &Vector3<f64>, b: &OrientedBox) -> Option<f64> {
    let rot = b.rotation();
    let o = rot.transpose() * (-b.center);
    let d = rot.transpose() * dir;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i].abs() > b.half_extents[i] {
                return None;
            }
            continue;
        }
        let (a, c) = (
            (-b.half_extents[i] - o[i]) / d[i],
            (b.half_extents[i] - o[i]) / d[i],
        );
        lo = lo.max(a.min(c));
        hi = hi.min(a.max(c));
    }
    (lo <= hi && lo > 0.0).then_some(lo)
}

#[test]
fn render_matches_supersampled_ray_caster() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cam = camera_80();
    let w = cam.width as usize;
    let h = cam.height as usize;
    for _ in 0..20 {
        let scene = random_benchmark_scene(&mut rng);
        let img = scene.render(&cam);

        // 4x4 supersampled depth range per pixel.
        let mut lo = vec![0.0f64; w * h];
        let mut hi = vec![0.0f64; w * h];
        for iy in 0..h {
            for ix in 0..w {
                let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
                for sy in 0..4 {
                    for sx in 0..4 {
                        let u = ix as f64 + (sx as f64 + 0.5) / 4.0;
                        let v = iy as f64 + (sy as f64 + 0.5) / 4.0;
                        let dir = Vector3::new(cam.tan_u(u), cam.tan_v(v), 1.0);
                        let d = scene
                            .boxes
                            .iter()
                            .filter_map(|b| ray_box_depth(&dir, b))
                            .fold(f64::INFINITY, f64::min)
                            .min(cam.unknown_horizon);
                        mn = mn.min(d);
                        mx = mx.max(d);
                    }
                }
                lo[iy * w + ix] = mn;
                hi[iy * w + ix] = mx;
            }
        }

        // A pixel is near a silhouette when its own or any neighbor's
        // supersampled depth range jumps discontinuously.
        let edge = |ix: usize, iy: usize| hi[iy * w + ix] - lo[iy * w + ix] > 0.05;
        let mut checked = 0usize;
        for iy in 1..h - 1 {
            for ix in 1..w - 1 {
                let near_edge = (-1i64..=1)
                    .flat_map(|dy| (-1i64..=1).map(move |dx| (dx, dy)))
                    .any(|(dx, dy)| {
                        edge((ix as i64 + dx) as usize, (iy as i64 + dy) as usize)
                    });
                if near_edge {
                    continue;
                }
                let rendered = img.depth_at(ix as u32, iy as u32);
                let (mn, mx) = (lo[iy * w + ix], hi[iy * w + ix]);
                // Sub-rays only cover the inner 3/4 of the pixel; pad the
                // band by the local spread to cover the unsampled margin.
                let pad = 0.5 * (mx - mn) + 1e-6;
                assert!(
                    rendered >= mn - pad && rendered <= mx + pad,
                    "pixel ({ix},{iy}): rendered {rendered} outside supersampled [{mn}, {mx}]"
                );
                checked += 1;
            }
        }
        assert!(checked > 1_000, "too few interior pixels checked: {checked}");
    }
}

/// Brute-force minimum distance to the occupied set by dense sampling: a
/// coarse sweep along every obstacle ray plus local refinement, the horizon
/// half-space, and the four out-of-view plane caps.
fn brute_force_clearance(image: &DepthImage, x: &Vector3<f64>) -> f64 {
    let cam = image.camera();
    let l = cam.unknown_horizon;
    let mut best = f64::INFINITY;

    // Obstacle rays.
    for iy in 0..cam.height {
        for ix in 0..cam.width {
            let d0 = image.depth_at(ix, iy);
            if !(d0 > 0.0 && d0 < l) {
                continue;
            }
            let e = cam.pixel_ray(ix, iy);
            let reach = x.norm() + 3.0;
            let coarse_step = 0.05;
            let mut best_t = d0;
            let mut best_d = f64::INFINITY;
            let mut t = d0;
            while t <= reach {
                let d = (x - e * t).norm();
                if d < best_d {
                    best_d = d;
                    best_t = t;
                }
                t += coarse_step;
            }
            let mut t = (best_t - 1.5 * coarse_step).max(d0);
            while t <= best_t + 1.5 * coarse_step {
                let d = (x - e * t).norm();
                best = best.min(d);
                t += 5e-4;
            }
        }
    }

    // Beyond-horizon half-space.
    let horizon_point = Vector3::new(x.x, x.y, l.max(x.z));
    best = best.min((x - horizon_point).norm());

    // Out-of-view plane caps: dense polar grids on each FOV boundary plane,
    // restricted to norm >= l, plus the norm-l sphere outside the cone.
    let normals = cam.fov_plane_normals();
    for n in &normals {
        // In-plane orthonormal basis.
        let e1 = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (e1 - n * n.dot(&e1)).normalize();
        let e2 = n.cross(&e1);
        let reach = l + x.norm() + 3.0;
        for ir in 0..200 {
            let rho = l + (reach - l) * ir as f64 / 200.0;
            for ia in 0..720 {
                let th = std::f64::consts::TAU * ia as f64 / 720.0;
                let y = (e1 * th.cos() + e2 * th.sin()) * rho;
                best = best.min((x - y).norm());
            }
        }
    }
    best
}

#[test]
fn point_clearance_matches_brute_force_discretization() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cam = camera_80();
    for case in 0..6 {
        let scene = random_benchmark_scene(&mut rng);
        let img = scene.render(&cam);
        let oracle = ClearanceOracle::new(&img, 0.0);
        for _ in 0..3 {
            let u = rng.gen_range(5.0..75.0);
            let v = rng.gen_range(5.0..55.0);
            let z = rng.gen_range(0.3..4.0);
            let x = cam.deproject(u, v, z);
            let exact = oracle.point_clearance(&x);
            let brute = brute_force_clearance(&img, &x);
            assert!(
                (exact - brute).abs() <= 5e-3,
                "case {case}: exact {exact} vs brute {brute} at {x:?}"
            );
        }
    }
}

#[test]
fn oracle_agrees_with_ten_times_finer_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cam = camera_160();
    let cfg = PlannerConfig::default();
    let r = 0.3;
    let mut disagreements = 0usize;
    let total = 1_000;
    for _ in 0..total {
        let scene = random_benchmark_scene(&mut rng);
        let img = scene.render(&cam);
        let state = random_initial_state(&mut rng);
        let traj = sample_candidate(&mut rng, &state, &img, &cfg);
        let oracle = ClearanceOracle::new(&img, r);
        let coarse = oracle.trajectory_free(&traj, r, 0.005);
        let fine = oracle.trajectory_free(&traj, r, 0.0005);
        if coarse != fine {
            disagreements += 1;
            // Disagreement only when the minimum clearance grazes r.
            let mut min_clear = f64::INFINITY;
            let mut t = 0.0;
            while t <= traj.duration {
                min_clear = min_clear.min(oracle.point_clearance(&traj.position_at(t)));
                t += 0.0005;
            }
            assert!(
                (min_clear - r).abs() <= 1e-3,
                "verdict flip with clearance margin {}",
                min_clear - r
            );
        }
    }
    assert!(
        disagreements <= total / 100,
        "too many refinement disagreements: {disagreements}"
    );
}

#[test]
fn kd_check_equals_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cam = camera_160();
    let cfg = PlannerConfig::default();
    for _ in 0..200 {
        let scene = random_benchmark_scene(&mut rng);
        let img = scene.render(&cam);
        let tree = KdTree::from_image(&img);
        let state = random_initial_state(&mut rng);
        let traj = sample_candidate(&mut rng, &state, &img, &cfg);

        // Independent point extraction.
        let mut points = Vec::new();
        for iy in 0..cam.height {
            for ix in 0..cam.width {
                let d = img.depth_at(ix, iy);
                if d > 0.0 && d < cam.unknown_horizon {
                    points.push(cam.pixel_ray(ix, iy) * d);
                }
            }
        }
        assert_eq!(points.len(), tree.len());

        let m = 50;
        let r = 0.3;
        let brute = (0..m).all(|k| {
            let t = traj.duration * k as f64 / (m - 1) as f64;
            let p = traj.position_at(t);
            points.iter().all(|q| (q - p).norm() >= r)
        });
        assert_eq!(kd_check(&traj, &tree, r, m), brute);
    }
}

#[test]
fn scene_depths_pass_kolmogorov_smirnov() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut depths: Vec<f64> = Vec::with_capacity(20_000);
    for _ in 0..10_000 {
        let scene = random_benchmark_scene(&mut rng);
        for b in &scene.boxes {
            depths.push(b.center.z);
        }
    }
    depths.sort_unstable_by(f64::total_cmp);
    let n = depths.len() as f64;
    let mut d_stat = 0.0f64;
    for (i, &z) in depths.iter().enumerate() {
        let cdf = (z - 1.5) / 1.5;
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d_stat = d_stat.max((cdf - lo).abs()).max((cdf - hi).abs());
    }
    // Critical value at alpha = 0.01.
    let critical = 1.628 / n.sqrt();
    assert!(d_stat < critical, "KS statistic {d_stat} over critical {critical}");
}

#[test]
fn candidate_endpoints_uniform_over_pixel_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cam = camera_160();
    let img = Scene::default().render(&cam);
    let cfg = PlannerConfig::default();
    let state = VehicleState::rest(Vector3::zeros());
    let mut counts = [[0u32; 8]; 8];
    let draws = 10_000;
    for _ in 0..draws {
        let traj = sample_candidate(&mut rng, &state, &img, &cfg);
        let end = traj.position_at(traj.duration);
        let (u, v, _) = cam.project(&end).unwrap();
        let gx = ((u / 160.0 * 8.0) as usize).min(7);
        let gy = ((v / 120.0 * 8.0) as usize).min(7);
        counts[gy][gx] += 1;
    }
    let expected = draws as f64 / 64.0;
    let chi2: f64 = counts
        .iter()
        .flatten()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    // 99th percentile of chi-square with 63 degrees of freedom.
    assert!(chi2 < 92.01, "chi-square {chi2} rejects uniformity");
}

#[test]
fn rendering_is_deterministic() {
    let mut rng_a = ChaCha8Rng::seed_from_u64(17);
    let mut rng_b = ChaCha8Rng::seed_from_u64(17);
    let cam = camera_160();
    let a = random_benchmark_scene(&mut rng_a).render(&cam);
    let b = random_benchmark_scene(&mut rng_b).render(&cam);
    assert_eq!(a.buffer(), b.buffer(), "identical seeds render identical buffers");
}

#[test]
fn world_transform_preserves_rendering() {
    // Rendering a rotated scene from a rotated camera gives the same image.
    let cam = camera_160();
    let scene = random_benchmark_scene(&mut ChaCha8Rng::seed_from_u64(18));
    let base = scene.render(&cam);

    let yaw = 0.83f64;
    let rot = pyraplan::sim::camera_rotation(yaw);
    let world_boxes: Vec<OrientedBox> = scene
        .boxes
        .iter()
        .map(|b| {
            let m: Matrix3<f64> = rot * b.rotation();
            OrientedBox::new(rot * b.center, b.half_extents, m).unwrap()
        })
        .collect();
    let world_scene = Scene::new(world_boxes);

    // Transform back into the camera frame the way the simulator does.
    let rot_cw = rot.transpose();
    let back: Vec<OrientedBox> = world_scene
        .boxes
        .iter()
        .map(|b| OrientedBox::new(rot_cw * b.center, b.half_extents, rot_cw * b.rotation()).unwrap())
        .collect();
    let again = Scene::new(back).render(&cam);
    for (a, b) in base.buffer().iter().zip(again.buffer()) {
        assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
    }
}
