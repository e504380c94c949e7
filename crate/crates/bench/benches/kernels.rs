use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use optostore::scenarios::{analytic_spectrum, default_detuning_grid, fit_cooperativity, simulate};
use optostore::{gated_power_scan, mhz, standard_sequence, synthesize_beat, GateConfig, SequenceKind, SystemParams};

fn integrate_fig3(c: &mut Criterion) {
    let p = SystemParams::sample_a();
    let s = standard_sequence(SequenceKind::Fig3, &p, &Default::default()).unwrap();
    c.bench_function("integrate_fig3", |b| b.iter(|| simulate(black_box(&p), black_box(&s)).unwrap()));
}

fn detection_fig3(c: &mut Criterion) {
    let p = SystemParams::sample_a();
    let s = standard_sequence(SequenceKind::Fig3, &p, &Default::default()).unwrap();
    let traj = simulate(&p, &s).unwrap();
    let gate = GateConfig::new(0.0, 0.1, 30.0, 160.0).unwrap();
    c.bench_function("beat_and_gated_scan_fig3", |b| {
        b.iter(|| {
            let beat = synthesize_beat(black_box(&traj), &p, 1.0).unwrap();
            gated_power_scan(&beat, &gate, 0.02).unwrap()
        })
    });
}

fn cooperativity_fit(c: &mut Criterion) {
    let p = SystemParams::sample_b();
    let g = mhz(0.38);
    let spec = analytic_spectrum(&p, g, &default_detuning_grid(&p, g)).unwrap();
    c.bench_function("fit_cooperativity", |b| b.iter(|| fit_cooperativity(black_box(&spec), &p).unwrap()));
}

criterion_group!(benches, integrate_fig3, detection_fig3, cooperativity_fit);
criterion_main!(benches);
