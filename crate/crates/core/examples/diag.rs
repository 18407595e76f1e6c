use pyraplan::camera::CameraModel;
use pyraplan::planner::{Budget, PlannerConfig};
use pyraplan::sim::{run, CorridorParams, SimConfig, SimWorld};

fn main() {
    let cam = CameraModel::with_hfov(160, 120, 86.0, 10.0);
    let world = SimWorld::u_corridor(&CorridorParams::default(), cam, 30.0);
    let cfg = SimConfig {
        planner: PlannerConfig { budget: Budget::Candidates(250), ..Default::default() },
        seed: 1,
    };
    let log = run(&world, &cfg, 900);
    for rec in log.frames.iter().step_by(15) {
        println!(
            "f{:4} pos ({:6.2},{:6.2},{:5.2}) yaw {:5.2} speed {:4.2} planned {} free {:3} pyr {:2} d ({:4.1},{:4.1})",
            rec.frame, rec.position[0], rec.position[1], rec.position[2], rec.yaw,
            rec.speed, rec.planned as u8, rec.collision_free, rec.pyramids,
            rec.direction[0], rec.direction[1],
        );
    }
    println!("{:?}", log.summary);
}
