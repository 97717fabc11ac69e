use socnav_core::crowd::{
    orca_velocity, preferred_velocity, sfm_velocity, Neighbor, OrcaParams, SfmParams,
};
use socnav_core::geometry::circle_circle_dist;
use socnav_core::{Entity, EntityId, EntityKind, Pose2D, Rng, Vec2, Velocity2D};

const DT: f64 = 0.1;
const TOLERANCE: f64 = 0.3;

fn human(id: u32, p: Vec2) -> Entity {
    Entity::new(
        EntityId(id),
        EntityKind::Human,
        Pose2D::new(p.x, p.y, 0.0),
        0.3,
    )
}

fn as_neighbor(e: &Entity) -> Neighbor {
    Neighbor {
        position: e.position(),
        velocity: e.velocity.linear(),
        radius: e.radius,
        reciprocal: true,
    }
}

/// Two ORCA agents swapping places; returns (min surface gap, both arrived).
fn head_on(rng: &mut Rng) -> (f64, bool) {
    let half = rng.range(1.5, 4.0);
    let lateral = rng.range(-0.2, 0.2);
    let params = OrcaParams {
        max_speed: rng.range(0.6, 1.4),
        ..OrcaParams::default()
    };
    let goals = [Vec2::new(half, -lateral), Vec2::new(-half, lateral)];
    let mut agents = [
        human(1, Vec2::new(-half, lateral)),
        human(2, Vec2::new(half, -lateral)),
    ];
    let mut gap = f64::INFINITY;
    for _ in 0..200 {
        let snapshot = agents.clone();
        for i in 0..2 {
            let other = as_neighbor(&snapshot[1 - i]);
            let pref = preferred_velocity(snapshot[i].position(), goals[i], params.max_speed, DT);
            let v = orca_velocity(&snapshot[i], &[other], &[], &params, pref, DT);
            let p = snapshot[i].position() + v.linear() * DT;
            agents[i].pose.set_position(p);
            agents[i].velocity = v;
        }
        gap = gap.min(circle_circle_dist(
            agents[0].position(),
            0.3,
            agents[1].position(),
            0.3,
        ));
    }
    let arrived = (0..2).all(|i| agents[i].position().distance(goals[i]) < TOLERANCE);
    (gap, arrived)
}

#[test]
fn orca_head_on_pairs_pass_safely() {
    let mut rng = Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let (gap, arrived) = head_on(&mut rng);
        assert!(gap > 0.0, "trial {trial}: gap {gap}");
        assert!(arrived, "trial {trial}");
    }
}

#[test]
fn sfm_single_agent_converges_in_time() {
    let mut rng = Rng::seed_from_u64(7);
    for trial in 0..100 {
        let start = Vec2::new(rng.range(-4.0, 4.0), rng.range(-4.0, 4.0));
        let goal = Vec2::new(rng.range(-4.0, 4.0), rng.range(-4.0, 4.0));
        let params = SfmParams::default();
        let mut agent = human(1, start);
        let optimal_steps = start.distance(goal) / (params.desired_speed * DT);
        let budget = (3.0 * optimal_steps).ceil().max(1.0) as usize;
        let mut last = start.distance(goal);
        let mut reached = last < TOLERANCE;
        for _ in 0..budget {
            if reached {
                break;
            }
            let v = sfm_velocity(&agent, &[], &[], &params, goal, DT);
            agent.pose.set_position(agent.position() + v.linear() * DT);
            agent.velocity = Velocity2D::new(v.vx, v.vy, 0.0);
            let d = agent.position().distance(goal);
            assert!(d <= last + 1e-12, "trial {trial}: distance grew");
            last = d;
            reached = d < TOLERANCE;
        }
        assert!(reached, "trial {trial}: {last} m left after {budget} steps");
    }
}
