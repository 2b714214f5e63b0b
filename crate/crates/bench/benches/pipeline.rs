use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use qdenoise::array::{draw_source_angles, synthesize};
use qdenoise::music::{sample_covariance, MusicEstimator};
use qdenoise::nn::{init_model, Adam, AdamConfig, Architecture, DenoiserModel};
use qdenoise::quantizer::quantize_snapshots;
use qdenoise::rng::rng_from_seed;
use qdenoise::ScenarioConfig;
use rand::Rng;

fn train_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("train_step");
    for hidden in [32, 128, 512] {
        let arch = Architecture::uniform(8, 6, hidden);
        let mut rng = rng_from_seed(1);
        let mut model: DenoiserModel<f32> = init_model(&arch, &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((256, 16), || rng.random_range(-1.0f32..1.0));
        let t = x.mapv(|v| 0.5 * v);
        let mut adam = Adam::new(AdamConfig::default());
        g.bench_function(format!("N={hidden}"), |b| {
            b.iter(|| {
                let cache = model.forward_train(&x).unwrap();
                let grads = model.backward(&cache, &t).unwrap();
                model.apply_adam(&grads, &mut adam).unwrap();
            })
        });
    }
    g.finish();
}

fn music(c: &mut Criterion) {
    let cfg = ScenarioConfig::desk();
    let geom = cfg.geometry().unwrap();
    let est = MusicEstimator::new(geom, cfg.grid().unwrap());
    let mut rng = rng_from_seed(2);
    let s = draw_source_angles(3, (-30.0, 30.0), 4.0, &mut rng).unwrap();
    let x = synthesize(&s, &geom, &cfg.noise_at(30.0), 5, &mut rng).unwrap();
    let r = sample_covariance(&x, 5).unwrap();
    c.bench_function("music_estimate_m8_6001", |b| b.iter(|| est.estimate(&r, 3).unwrap()));
}

fn quantize(c: &mut Criterion) {
    let cfg = ScenarioConfig::desk();
    let spec = cfg.quantizer_spec(1).unwrap();
    let geom = cfg.geometry().unwrap();
    let mut rng = rng_from_seed(3);
    let s = draw_source_angles(3, (-30.0, 30.0), 1.0, &mut rng).unwrap();
    c.bench_function("synthesize_quantize_8x256", |b| {
        b.iter_batched(
            || rng_from_seed(4),
            |mut r| {
                let x = synthesize(&s, &geom, &cfg.noise_at(10.0), 256, &mut r).unwrap();
                quantize_snapshots(&x, &spec)
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, train_step, music, quantize);
criterion_main!(benches);
