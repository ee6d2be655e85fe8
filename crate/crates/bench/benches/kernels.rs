use std::hint::black_box;

use cilfair_bench::{batch, dataset, network};
use cilfair_core::coverage::{neuron_coverage, CoverageConfig};
use cilfair_core::nn::{cross_entropy, DropoutSpec};
use cilfair_core::refine::{differential_analysis, DivergenceMetric};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn forward_backward(c: &mut Criterion) {
    let ds = dataset(20, 16);
    let net = network(20, 1);
    let x = batch(&ds, 32);
    let labels: Vec<usize> = ds.labels()[..32].to_vec();
    let drop = DropoutSpec::new(0.5, 7).unwrap();

    c.bench_function("forward_32x64x64", |b| {
        b.iter(|| net.forward(black_box(&x), None).unwrap())
    });
    c.bench_function("forward_backward_32x64x64", |b| {
        b.iter(|| {
            let (z, cache) = net.forward(black_box(&x), None).unwrap();
            let (_, gz) = cross_entropy(&z, &labels).unwrap();
            net.backward(&cache, &gz).unwrap()
        })
    });
    c.bench_function("forward_backward_dropout_32x64x64", |b| {
        b.iter(|| {
            let (z, cache) = net.forward(black_box(&x), Some(&drop)).unwrap();
            let (_, gz) = cross_entropy(&z, &labels).unwrap();
            net.backward(&cache, &gz).unwrap()
        })
    });
    c.bench_function("sgd_step_32x64x64", |b| {
        let (z, cache) = net.forward(&x, None).unwrap();
        let (_, gz) = cross_entropy(&z, &labels).unwrap();
        let grads = net.backward(&cache, &gz).unwrap();
        b.iter_batched(
            || net.clone(),
            |mut m| {
                m.sgd_step(&grads, 0.1).unwrap();
                m
            },
            BatchSize::SmallInput,
        )
    });
}

fn coverage(c: &mut Criterion) {
    let ds = dataset(20, 10);
    let net = network(20, 2);
    let cfg = CoverageConfig::default();
    c.bench_function("neuron_coverage_200", |b| {
        b.iter(|| neuron_coverage(&net, black_box(&ds), &cfg).unwrap())
    });
}

fn differential(c: &mut Criterion) {
    let ds = dataset(20, 20);
    let base = network(16, 3).expand_output_layer(20, 4).unwrap();
    let new = network(20, 5);
    for metric in DivergenceMetric::ALL {
        c.bench_function(
            &format!("differential_analysis_400_{}", metric.name()),
            |b| b.iter(|| differential_analysis(&base, &new, black_box(&ds), metric, 2.0).unwrap()),
        );
    }
}

criterion_group!(benches, forward_backward, coverage, differential);
criterion_main!(benches);
