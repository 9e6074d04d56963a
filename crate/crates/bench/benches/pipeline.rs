use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use fracdens::density::{default_m_grid, fit_bernstein, lscv_select_m};
use fracdens::effects::{sample_effects, EffectDensity};
use fracdens::fbm::{FbmGenerator, FbmMethod};
use fracdens::mle::MolchanContext;
use fracdens::rng::substream;
use fracdens::sde::{simulate_bundle, DriftSpec};
use fracdens::{HurstModel, TimeGrid};

fn fbm(c: &mut Criterion) {
    let model = HurstModel::new(0.7).unwrap();
    let mut group = c.benchmark_group("fbm_path");
    for steps in [250usize, 1000, 4000] {
        let grid = TimeGrid::new(100.0, steps).unwrap();
        for method in [FbmMethod::Cholesky, FbmMethod::DaviesHarte] {
            let gen = FbmGenerator::new(&model, &grid, method).unwrap();
            let mut rng = substream(1, &[steps as u64]);
            group.bench_with_input(BenchmarkId::new(format!("{method:?}"), steps), &gen, |b, g| {
                b.iter(|| black_box(g.sample(&mut rng)))
            });
        }
    }
    group.finish();
}

fn molchan(c: &mut Criterion) {
    let model = HurstModel::new(0.7).unwrap();
    let drift = DriftSpec::vasicek(1.0, 1.0);
    let mut group = c.benchmark_group("molchan_estimate");
    group.sample_size(20);
    for steps in [250usize, 1000] {
        let grid = TimeGrid::new(100.0, steps).unwrap();
        let bundle = simulate_bundle(&model, &grid, drift.clone(), &EffectDensity::named("beta_3_5").unwrap(), 64, 3)
            .unwrap();
        group.bench_with_input(BenchmarkId::new("context", steps), &grid, |b, g| {
            b.iter(|| black_box(MolchanContext::new(&model, g, &drift).unwrap()))
        });
        let ctx = MolchanContext::new(&model, &grid, &drift).unwrap();
        group.bench_with_input(BenchmarkId::new("estimate_64_paths", steps), &bundle.paths, |b, p| {
            b.iter(|| black_box(ctx.estimate_all(p).unwrap()))
        });
    }
    group.finish();
}

fn bernstein(c: &mut Criterion) {
    let density = EffectDensity::named("beta_mix").unwrap();
    let mut group = c.benchmark_group("bernstein");
    for n in [50usize, 250, 1000] {
        let samples = sample_effects(&density, n, &mut substream(7, &[n as u64]));
        let grid = default_m_grid(n);
        group.bench_with_input(BenchmarkId::new("lscv", n), &samples, |b, s| {
            b.iter(|| black_box(lscv_select_m(s, &grid).unwrap()))
        });
        let fit = fit_bernstein(&samples, 20).unwrap();
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        group.bench_with_input(BenchmarkId::new("eval_101_m20", n), &xs, |b, x| {
            b.iter(|| black_box(fit.eval_many(x)))
        });
    }
    group.finish();
}

criterion_group!(benches, fbm, molchan, bernstein);
criterion_main!(benches);
