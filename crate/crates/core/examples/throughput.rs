//! Times one batched forward+backward step for each architecture.

use std::time::Instant;

use dqn_compress::net::{Arch, Network, NetworkSpec};
use dqn_compress::rng::SplitMix64;
use dqn_compress::Tensor;

fn main() -> dqn_compress::Result<()> {
    let batch = 32;
    for side in [40usize, 44, 84] {
        for arch in Arch::ALL {
            let spec = NetworkSpec::new(arch, [4, side, side], 3);
            let mut net = Network::build(&spec, 1)?;
            let mut rng = SplitMix64::new(2);
            let n = batch * 4 * side * side;
            let x = Tensor::from_vec(&[batch, 4, side, side], (0..n).map(|_| rng.next_f64()).collect())?;
            let reps = if side == 84 { 5 } else { 50 };
            let t = Instant::now();
            for _ in 0..reps {
                net.q_values(&x)?;
            }
            let fwd = t.elapsed().as_secs_f64() / reps as f64;
            let t = Instant::now();
            for _ in 0..reps {
                let mut tape = net.forward_train(&x)?;
                net.backward(&mut tape, &vec![1.0; batch * 3], false)?;
            }
            let step = t.elapsed().as_secs_f64() / reps as f64;
            println!("{side:>3} {:<12} infer {:>8.3} ms  train {:>8.3} ms", arch.name(), fwd * 1e3, step * 1e3);
        }
    }
    Ok(())
}
