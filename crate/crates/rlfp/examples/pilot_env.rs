use rlfp::envlab::*;
fn main() {
    for seed in 0..8u64 {
        let mut env = make_env::<f64>(EnvId::Rally, seed);
        let mut p = WorstPolicy::new(EnvId::Rally);
        let t = run_episode(&mut p, env.as_mut(), seed, None);
        println!("rally worst seed={seed}: return={} len={}", t.return_total, t.len());
    }
    for seed in 0..3u64 {
        let mut env = make_env::<f64>(EnvId::Rally, seed);
        let mut p = ConstantPolicy { action: 0, action_count: 4 };
        let t = run_episode(&mut p, env.as_mut(), seed, None);
        println!("rally idle seed={seed}: return={} len={}", t.return_total, t.len());
    }
    // hand-written tracker to gauge playability and episode length
    struct Tracker;
    impl ActionPolicy<f64> for Tracker {
        fn act(&mut self, s: &ndarray::ArrayView1<f64>) -> usize {
            let d = rlfp::envlab::rally_decode(s);
            let target = if d.vel_x > 0 { rlfp::envlab::rally_arrival_row(&d) } else { 4 };
            let center = d.agent_y;
            if target < center { if center - target >= 2 { 3 } else { 1 } }
            else if target > center { 2 } else { 0 }
        }
        fn action_count(&self) -> usize { 4 }
    }
    for seed in 0..8u64 {
        let mut env = make_env::<f64>(EnvId::Rally, seed);
        let mut p = Tracker;
        let t = run_episode(&mut p, env.as_mut(), seed, None);
        println!("rally tracker seed={seed}: return={} len={}", t.return_total, t.len());
    }
}
