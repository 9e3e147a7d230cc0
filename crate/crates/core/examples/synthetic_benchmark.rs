//! Plain vs. embedding-augmented decomposable attention on the generated
//! word-implication task.
//!
//! `cargo run --release -p awe-core --example synthetic_benchmark -- [seeds] [train] [epochs] [learning-rate]`

use std::time::Instant;

use awe_core::experiment::{fit_embeddings, score_variant, ExperimentConfig};
use awe_core::synthetic::{majority_baseline, SyntheticConfig, SyntheticWorld};

fn main() -> awe_core::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let seeds = args.first().copied().unwrap_or(5) as u64;
    let n_train = args.get(1).copied().unwrap_or(2000);
    let epochs = args.get(2).copied().unwrap_or(12);

    let mut config = ExperimentConfig::default();
    config.model.epochs = epochs;
    if let Some(lr) = std::env::args().nth(4).and_then(|a| a.parse().ok()) {
        config.model.learning_rate = lr;
    }
    let start = Instant::now();
    let (mut plain_sum, mut awe_sum, mut major_sum) = (0.0, 0.0, 0.0);
    for seed in 0..seeds {
        let world = SyntheticWorld::generate(&SyntheticConfig {
            seed,
            ..SyntheticConfig::default()
        })?;
        let s = world.splits(seed + 100, n_train, 500, 1000);
        let (emb, stats) = fit_embeddings(&s.train, &world.vectors, &config, seed)?;
        let splits = (&s.train[..], &s.dev[..], &s.test[..]);
        let plain = score_variant(splits, &world.vectors, None, &config.model, seed)?;
        let awe = score_variant(splits, &world.vectors, Some(&emb), &config.model, seed)?;
        let major = majority_baseline(&s.train, &s.test);
        println!(
            "seed {seed}: pairs {} plain {:.4} awe {:.4} majority {:.4} ({:.1?})",
            stats.n_final,
            plain.test_accuracy,
            awe.test_accuracy,
            major,
            start.elapsed()
        );
        plain_sum += plain.test_accuracy;
        awe_sum += awe.test_accuracy;
        major_sum += major;
    }
    let n = seeds as f64;
    println!(
        "mean: plain {:.4} awe {:.4} majority {:.4}",
        plain_sum / n,
        awe_sum / n,
        major_sum / n
    );
    Ok(())
}
