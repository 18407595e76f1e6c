//! Trajectory module checked against independent numerics: finite
//! differences for derivatives, quadrature for the jerk cost, and dense
//! sampling for sections, crossings and feasibility.

use nalgebra::{Unit, Vector3};
use pyraplan::trajectory::{
    DynamicLimits, FeasibilityVerdict, PlaneCrossings, Trajectory, VehicleState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state<R: Rng>(rng: &mut R, pos_span: f64) -> VehicleState {
    let mut v = || rng.gen_range(-1.0..1.0);
    VehicleState::new(
        Vector3::new(v(), v(), v()) * pos_span,
        Vector3::new(v(), v(), v()) * 3.0,
        Vector3::new(v(), v(), v()) * 4.0,
    )
}

fn random_trajectory<R: Rng>(rng: &mut R) -> Trajectory {
    let init = random_state(rng, 2.0);
    let end = random_state(rng, 3.0);
    let duration = rng.gen_range(0.5..3.0);
    Trajectory::from_boundary(init, end, duration).unwrap()
}

fn random_unit<R: Rng>(rng: &mut R) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 1e-3 {
            return Unit::new_normalize(v);
        }
    }
}

#[test]
fn boundary_states_reproduced_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1_000 {
        let init = random_state(&mut rng, 2.0);
        let end = random_state(&mut rng, 3.0);
        let duration = rng.gen_range(0.3..3.0);
        let traj = Trajectory::from_boundary(init, end, duration).unwrap();
        let got = traj.end_state();
        let scale = 1.0 + end.position.norm();
        assert!((got.position - end.position).norm() <= 1e-9 * scale);
        assert!((got.velocity - end.velocity).norm() <= 1e-9 * (1.0 + end.velocity.norm()));
        assert!(
            (got.acceleration - end.acceleration).norm()
                <= 1e-9 * (1.0 + end.acceleration.norm())
        );
        let s0 = traj.evaluate(0.0, 0).unwrap();
        assert!((s0 - init.position).norm() <= 1e-9 * (1.0 + init.position.norm()));
    }
}

/// Simpson quadrature of the squared jerk norm.
fn jerk_energy(traj: &Trajectory, n: usize) -> f64 {
    let h = traj.duration / n as f64;
    let f = |t: f64| traj.jerk_at(t).norm_squared();
    let mut sum = f(0.0) + f(traj.duration);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(k as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn jerk_energy_does_not_decrease_under_boundary_preserving_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let traj = random_trajectory(&mut rng);
        let base = jerk_energy(&traj, 2_000);
        let t_end = traj.duration;
        for _ in 0..100 {
            // Perturbation with triple zeros at both ends: position, velocity
            // and acceleration boundaries are all preserved.
            let coeff: Vec<Vector3<f64>> = (0..3)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect();
            let perturbed_jerk = |t: f64| {
                // Third derivative of w(t) * poly(t), w = t^3 (T - t)^3,
                // computed by finite differences of the perturbation itself
                // to stay independent of any closed form.
                let p = |t: f64| {
                    let w = t.powi(3) * (t_end - t).powi(3);
                    (coeff[0] + coeff[1] * t + coeff[2] * t * t) * w
                };
                let h = 1e-3;
                let tc = t.clamp(2.0 * h, t_end - 2.0 * h);
                (p(tc + 2.0 * h) - p(tc - 2.0 * h) - (p(tc + h) - p(tc - h)) * 2.0)
                    / (2.0 * h * h * h)
            };
            let f = |t: f64| (traj.jerk_at(t) + perturbed_jerk(t)).norm_squared();
            let n = 2_000;
            let h = t_end / n as f64;
            let mut sum = f(0.0) + f(t_end);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * f(k as f64 * h);
            }
            let perturbed = sum * h / 3.0;
            assert!(
                perturbed >= base * (1.0 - 1e-6) - 1e-9,
                "perturbation decreased jerk energy: {perturbed} < {base}"
            );
        }
    }
}

#[test]
fn derivatives_match_central_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let traj = random_trajectory(&mut rng);
        let h = 1e-5 * traj.duration;
        for _ in 0..10 {
            let t = rng.gen_range(2.0 * h..traj.duration - 2.0 * h);
            for order in 1..=3u8 {
                let lower = traj.evaluate(t - h, order - 1).unwrap();
                let upper = traj.evaluate(t + h, order - 1).unwrap();
                let fd = (upper - lower) / (2.0 * h);
                let exact = traj.evaluate(t, order).unwrap();
                let scale = exact.norm().max(1.0);
                assert!(
                    (fd - exact).norm() <= 1e-5 * scale,
                    "order {order} at t={t}: fd {fd:?} vs exact {exact:?}"
                );
            }
        }
    }
}

#[test]
fn monotonic_sections_have_constant_velocity_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let traj = random_trajectory(&mut rng);
        let axis = random_unit(&mut rng);
        let sections = traj.monotonic_sections(&axis);

        // Partition of [0, T].
        assert_eq!(sections.first().unwrap().t_start, 0.0);
        assert!((sections.last().unwrap().t_end - traj.duration).abs() < 1e-12);
        for pair in sections.windows(2) {
            assert_eq!(pair[0].t_end, pair[1].t_start);
        }

        for sec in &sections {
            let span = sec.t_end - sec.t_start;
            let mut sign = 0i8;
            for k in 0..=1_000 {
                let t = sec.t_start + span * k as f64 / 1_000.0;
                let v = axis.dot(&traj.velocity_at(t));
                // Tolerance scaled to the trajectory's speeds; section
                // boundaries are only located to root-finding accuracy.
                if v.abs() <= 1e-4 * (1.0 + traj.speed_bound()) {
                    continue;
                }
                let s = if v > 0.0 { 1 } else { -1 };
                if sign == 0 {
                    sign = s;
                } else {
                    assert_eq!(sign, s, "velocity sign flipped inside a section");
                }
            }
            // The deepest end matches the sign of motion.
            let d_start = axis.dot(&traj.position_at(sec.t_start));
            let d_end = axis.dot(&traj.position_at(sec.t_end));
            match sec.deepest_end {
                pyraplan::trajectory::DeepestEnd::AtEnd => {
                    assert!(d_end >= d_start - 1e-9)
                }
                pyraplan::trajectory::DeepestEnd::AtStart => assert!(d_start > d_end - 1e-9),
            }
        }
    }
}

#[test]
fn plane_crossings_match_dense_sign_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..300 {
        let traj = random_trajectory(&mut rng);
        let normal = random_unit(&mut rng);
        let crossings = match traj.plane_crossings(&normal, 0.0, traj.duration) {
            PlaneCrossings::InPlane => continue,
            PlaneCrossings::Times(ts) => ts,
        };
        let d = |t: f64| normal.dot(&(traj.position_at(t) - traj.init.position));

        // Every reported crossing is a zero of d.
        let scale = 1.0 + traj.speed_bound() * traj.duration;
        for &t in crossings.iter() {
            assert!(d(t).abs() <= 1e-6 * scale, "case {case}: residual {}", d(t));
        }

        // Dense scan: a sign change between consecutive grid points must be
        // matched by a reported crossing nearby (grid spacing tolerance).
        let n = 10_000;
        let step = traj.duration / n as f64;
        let mut prev = d(step); // skip the known root at t = 0
        for k in 2..=n {
            let t = k as f64 * step;
            let v = d(t);
            if prev != 0.0 && v != 0.0 && (prev < 0.0) != (v < 0.0) {
                let hit = crossings.iter().any(|&c| (c - t).abs() <= 2.0 * step + 1e-6);
                assert!(hit, "case {case}: sign change near t={t} not reported");
            }
            prev = v;
        }
    }
}

#[test]
fn feasible_verdicts_survive_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let limits = DynamicLimits {
        f_min: 2.0,
        f_max: 20.0,
        omega_max: 3.0,
        gravity: Vector3::new(0.0, 9.81, 0.0),
    };
    let mut feasible_count = 0;
    for _ in 0..1_000 {
        let traj = random_trajectory(&mut rng);
        if traj.feasibility_check(&limits) != FeasibilityVerdict::Feasible {
            continue;
        }
        feasible_count += 1;
        for k in 0..=10_000 {
            let t = traj.duration * k as f64 / 10_000.0;
            let thrust = (traj.acceleration_at(t) - limits.gravity).norm();
            assert!(
                thrust >= limits.f_min - 1e-9 && thrust <= limits.f_max + 1e-9,
                "thrust {thrust} outside limits at t={t}"
            );
            let omega = traj.jerk_at(t).norm() / thrust;
            assert!(omega <= limits.omega_max + 1e-9, "omega {omega} at t={t}");
        }
    }
    assert!(feasible_count > 0, "sampling produced no feasible trajectory");
    println!("feasible: {feasible_count}/1000");
}
