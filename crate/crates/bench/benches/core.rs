use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fpt_core::density::calibrate_rho;
use fpt_core::hseries::build_table;
use fpt_core::oupcf::{pcf, rightmost_zero};
use fpt_core::{Builtin, DensityModel, DensityOptions, ForceField, HGrid, TanhForm};

fn special_functions(c: &mut Criterion) {
    c.bench_function("pcf positive order", |b| b.iter(|| pcf(black_box(0.37), black_box(-1.2))));
    c.bench_function("pcf negative order", |b| b.iter(|| pcf(black_box(-2.63), black_box(0.8))));
    c.bench_function("rightmost_zero y+=-0.5", |b| b.iter(|| rightmost_zero(black_box(-0.5))));
    c.bench_function("rightmost_zero y+=2", |b| b.iter(|| rightmost_zero(black_box(2.0))));
}

fn h_table(c: &mut Criterion) {
    let (ou, ou_m) = ForceField::builtin(Builtin::Ou).unwrap();
    c.bench_function("build_table ou r=4 to 1", |b| {
        b.iter(|| build_table(&ou, &ou_m, HGrid::to(black_box(1.0)), 4))
    });
    let tanh = Builtin::Tanh { alpha: 2.0, gamma: 1.0, form: TanhForm::Amplitude };
    let (ff, im) = ForceField::builtin(tanh).unwrap();
    c.bench_function("build_table tanh r=6 to 2", |b| {
        b.iter(|| build_table(&ff, &im, HGrid::to(black_box(2.0)), 6))
    });
}

fn calibration(c: &mut Criterion) {
    let (ff, im) = ForceField::builtin(Builtin::Ou).unwrap();
    let opts = DensityOptions { rho: Some(0.0), ..DensityOptions::default() };
    let m = DensityModel::new(&ff, &im, -1.0, 1.0, opts).unwrap();
    c.bench_function("calibrate_rho ou (-1, 1)", |b| b.iter(|| calibrate_rho(black_box(&m))));
    let (ff, im) = ForceField::builtin(Builtin::DryFriction { mu: 1.0 }).unwrap();
    let m = DensityModel::new(&ff, &im, -2.0, 0.0, opts).unwrap();
    c.bench_function("calibrate_rho dry friction (-2, 0)", |b| b.iter(|| calibrate_rho(black_box(&m))));
}

criterion_group!(benches, special_functions, h_table, calibration);
criterion_main!(benches);
