use socnav_core::config::preset;
use socnav_core::env::{recompose_reward, Env};
use socnav_core::metrics::{finalize, time_to_collision, PERSONAL_SPACE};
use socnav_core::reward::RewardParams;
use socnav_core::{Action, Rng, World};

fn run(k: u8, seed: u64, actions: &[usize]) -> Vec<(World, f64)> {
    let mut env = Env::new(preset(k).unwrap()).unwrap();
    env.reset(seed).unwrap();
    let mut out = Vec::new();
    for &a in actions {
        let r = env.step(&Action::Discrete { index: a }).unwrap();
        out.push((env.world().unwrap().clone(), r.reward));
        if r.terminated || r.truncated {
            break;
        }
    }
    out
}

#[test]
fn independent_envs_agree_bitwise_for_two_hundred_steps() {
    let mut rng = Rng::seed_from_u64(5);
    let script: Vec<usize> = (0..200).map(|_| rng.index(7)).collect();
    for k in 1..=3 {
        let a = run(k, 99, &script);
        let b = run(k, 99, &script);
        assert_eq!(a.len(), b.len());
        for ((wa, ra), (wb, rb)) in a.iter().zip(&b) {
            assert!(wa.same_state(wb));
            assert_eq!(ra.to_bits(), rb.to_bits());
        }
    }
}

/// Straight-line recomputation of the episode metrics from robot positions.
#[test]
fn episode_metrics_match_trajectory_oracle() {
    let mut rng = Rng::seed_from_u64(17);
    for ep in 0..20 {
        let cfg = preset(2).unwrap();
        let params = RewardParams::from(&cfg);
        let mut env = Env::new(cfg.clone()).unwrap();
        env.reset(ep).unwrap();
        let w0 = env.world().unwrap().clone();
        let goal = w0.goal.position;
        let mut positions = vec![w0.robot.entity.position()];
        let mut psc_ok = 0u32;
        let mut ttc = w0.settings.max_steps as f64;
        let mut infos = Vec::new();
        loop {
            let r = env
                .step(&Action::Discrete {
                    index: rng.index(7),
                })
                .unwrap();
            let w = env.world().unwrap();
            positions.push(w.robot.entity.position());
            let closest = w
                .humans
                .iter()
                .map(|h| {
                    h.entity.position().distance(w.robot.entity.position())
                        - h.entity.radius
                        - w.robot.entity.radius
                })
                .fold(f64::INFINITY, f64::min);
            if closest >= PERSONAL_SPACE {
                psc_ok += 1;
            }
            ttc = ttc.min(time_to_collision(w, w.settings.max_steps as f64));
            assert!(
                (recompose_reward(&r.info, cfg.reward.function, &params).unwrap() - r.reward).abs()
                    < 1e-9
            );
            infos.push(r.info.clone());
            if r.terminated || r.truncated {
                break;
            }
        }
        let steps = positions.len() - 1;
        let path: f64 = positions.windows(2).map(|p| p[0].distance(p[1])).sum();
        let stalled = positions
            .windows(2)
            .filter(|p| p[0].distance(p[1]) / 0.1 < 1e-3)
            .count() as u32;
        let no_progress = positions
            .windows(2)
            .filter(|p| p[0].distance(goal) - p[1].distance(goal) <= 1e-6)
            .count() as u32;
        let ell = positions[0].distance(goal);
        let summary = finalize(&infos, ell, 1.0, 0.1);
        let success = infos.last().unwrap().success;
        let spl = if success { ell / path.max(ell) } else { 0.0 };
        let t_star = ell / (1.0 * 0.1);
        let stl = if success {
            t_star / (steps as f64).max(t_star)
        } else {
            0.0
        };

        assert!((summary.path_length - path).abs() < 1e-9);
        assert!((summary.personal_space_compliance - psc_ok as f64 / steps as f64).abs() < 1e-9);
        assert_eq!(summary.stalled_time, stalled);
        assert_eq!(summary.failure_to_progress, no_progress);
        assert!((summary.spl - spl).abs() < 1e-9 && (summary.stl - stl).abs() < 1e-9);
        assert!((summary.time_to_collision - ttc).abs() < 1e-9);
        for v in [summary.spl, summary.stl, summary.personal_space_compliance] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
