//! Compare backpropagated gradients with central differences on a few
//! freshly initialized networks.

use airq_alarm::ann::{gradient_check, init_network, NetworkConfig};
use airq_alarm::preprocess::{FeatureVector, LabeledExample, RiskLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> airq_alarm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..5 {
        let net = init_network(&NetworkConfig {
            seed,
            ..NetworkConfig::default()
        })?;
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let features = FeatureVector(std::array::from_fn(|_| rng.random()));
            let label = RiskLabel::from_index(rng.random_range(0..3)).unwrap();
            let example = LabeledExample {
                features,
                score: 0.0,
                label,
                origin: 0,
            };
            worst = worst.max(gradient_check(&net, &example, 1e-5)?);
        }
        println!(
            "seed {seed}: {} parameters, max relative error {worst:.2e}",
            net.param_count()
        );
    }
    Ok(())
}
