use criterion::{criterion_group, criterion_main, Criterion};

use rgm_bench::gmm_config;
use rgm_core::priors::{DswdConfig, MmdConfig};
use rgm_core::sampling::generate;
use rgm_core::{PriorConfig, RngState, Trainer};

fn train_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("training step, 2D batch 1000");
    group.sample_size(20);
    for (name, prior) in [
        ("kld", PriorConfig::default()),
        ("mmd", PriorConfig::Mmd(MmdConfig::default())),
        ("dswd", PriorConfig::Dswd(DswdConfig::default())),
    ] {
        let mut trainer = Trainer::new(gmm_config(prior, 1000)).unwrap();
        group.bench_function(name, |b| b.iter(|| trainer.step().unwrap()));
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let trainer = Trainer::new(gmm_config(PriorConfig::default(), 1000)).unwrap();
    c.bench_function("generate 10k samples, T=4", |b| {
        let mut rng = RngState::new(1);
        b.iter(|| generate(&trainer.generator, &trainer.schedule, 10_000, &mut rng).unwrap())
    });
}

criterion_group!(benches, train_steps, sampling);
criterion_main!(benches);
