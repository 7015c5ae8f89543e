use rlfp::envlab::EnvId;
use rlfp::policylab::*;
use std::time::Instant;

fn run(tag: &str, cfg: &TrainConfig, env_id: EnvId) {
    let t0 = Instant::now();
    match train::<f32>(cfg, env_id) {
        Ok(p) => println!("{tag}: mean={:.2} in {:.1}s", p.final_mean_return, t0.elapsed().as_secs_f32()),
        Err(e) => println!("{tag}: ERROR {e}"),
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    if which == "a2c" {
        for env_id in [EnvId::Rally, EnvId::Chase] {
            let mut c = TrainConfig::default_for(Algo::A2c, 100);
            c.budget = Budget::Steps(120_000);
            run(&format!("a2c-long {env_id}"), &c, env_id);
            let mut c2 = c.clone(); c2.rollout = 32; c2.entropy_coef = 0.02;
            run(&format!("a2c-roll32-ent02 {env_id}"), &c2, env_id);
            let mut c3 = c.clone(); c3.learning_rate = 1e-3; c3.rollout = 32;
            run(&format!("a2c-lr1e3-roll32 {env_id}"), &c3, env_id);
            let mut c4 = c.clone(); c4.gamma = 0.99; c4.rollout = 32; c4.entropy_coef = 0.02;
            run(&format!("a2c-g99-roll32 {env_id}"), &c4, env_id);
        }
    } else if which == "dqn" {
        for env_id in [EnvId::Rally, EnvId::Chase] {
            let mut c = TrainConfig::default_for(Algo::Dqn, 100);
            c.budget = Budget::Steps(18_000); c.eps_decay_steps = 5_000;
            run(&format!("dqn-18k {env_id}"), &c, env_id);
            let mut c2 = c.clone(); c2.train_freq = 4; c2.budget = Budget::Steps(30_000); c2.eps_decay_steps = 8000;
            run(&format!("dqn-30k-tf4 {env_id}"), &c2, env_id);
            let mut c3 = c.clone(); c3.hidden = vec![32,32]; c3.budget = Budget::Steps(24_000); c3.eps_decay_steps = 6000;
            run(&format!("dqn-24k-h32 {env_id}"), &c3, env_id);
        }
    }
}
