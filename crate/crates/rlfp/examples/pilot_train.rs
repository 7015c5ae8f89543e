use rlfp::envlab::EnvId;
use rlfp::policylab::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    for (env_id, env_name) in [(EnvId::Rally, "rally"), (EnvId::Chase, "chase")] {
        for algo in [Algo::Dqn, Algo::A2c, Algo::Ppo] {
            if which != "all" && which != algo.as_str() { continue; }
            let t0 = Instant::now();
            let cfg = TrainConfig::default_for(algo, 100);
            match train::<f32>(&cfg, env_id) {
                Ok(p) => println!(
                    "{env_name} {algo}: mean_return={:.2} in {:.1}s",
                    p.final_mean_return,
                    t0.elapsed().as_secs_f32()
                ),
                Err(e) => println!("{env_name} {algo}: ERROR {e}"),
            }
        }
    }
}
