//! Benchmarks of the pipeline stages: fundamental system integration,
//! characteristic function evaluation on both routes, a windowed eigenvalue
//! scan, one Fourier coefficient, and the finite difference pencil.

use criterion::{criterion_group, criterion_main, Criterion};
use slnev_core::expr::Expr;
use slnev_core::nevpair::EntirePair;
use slnev_core::oracle;
use slnev_core::problem::{Problem, Regularity, RightEndpoint, Tolerances};
use slnev_core::{
    find_eigenvalues, fourier_coefficient, CharMode, CharacteristicPair, Complex64, ScanOptions,
    TargetFunction,
};
use std::hint::black_box;

fn e(s: &str) -> Expr {
    Expr::parse(s).unwrap()
}

fn problem(delta: &str) -> Problem {
    Problem::new(
        0.0,
        RightEndpoint::Finite(1.0),
        Regularity::Regular,
        e("1"),
        e("0"),
        e(delta),
        std::f64::consts::FRAC_PI_2,
        Tolerances::default(),
    )
    .unwrap()
}

fn tangent_cp(mode: CharMode) -> CharacteristicPair {
    let pair = EntirePair::new(e("lambda"), e("-1")).unwrap();
    CharacteristicPair::new(problem("1"), pair, mode).unwrap()
}

fn bench_fundamental_system(c: &mut Criterion) {
    let p = problem("1");
    let lam = Complex64::new(37.0, 2.0);
    c.bench_function("phi_psi_dense", |b| {
        b.iter(|| p.phi_psi(black_box(lam), 1.0, true).unwrap())
    });
}

fn bench_characteristic(c: &mut Criterion) {
    let direct = tangent_cp(CharMode::RegularDirect);
    let w_route = tangent_cp(CharMode::QuasiregularW);
    let lam = Complex64::new(37.0, 2.0);
    c.bench_function("characteristic_direct", |b| {
        b.iter(|| direct.eval(black_box(lam)).unwrap())
    });
    c.bench_function("characteristic_w_route", |b| {
        b.iter(|| w_route.eval(black_box(lam)).unwrap())
    });
}

fn bench_spectrum(c: &mut Criterion) {
    let cp = tangent_cp(CharMode::RegularDirect);
    let mut group = c.benchmark_group("spectrum");
    group.sample_size(10);
    group.bench_function("window_to_70", |b| {
        b.iter(|| find_eigenvalues(&cp, (-1.0, 70.0), &ScanOptions::default()).unwrap())
    });
    group.finish();
}

fn bench_fourier(c: &mut Criterion) {
    let p = problem("1");
    let y = TargetFunction::new(|x| 1.0 - x * x);
    c.bench_function("fourier_coefficient", |b| {
        b.iter(|| fourier_coefficient(&p, 1.0, black_box(24.139342030445557), &y).unwrap())
    });
}

fn bench_pencil(c: &mut Criterion) {
    let p = problem("indicator(0, 0.5)");
    let row = oracle::affine_pair_parts(&EntirePair::new(e("1"), e("0")).unwrap()).unwrap();
    let mut group = c.benchmark_group("pencil");
    group.sample_size(10);
    group.bench_function("scan_n2048", |b| {
        b.iter(|| {
            let pencil = oracle::discretize(&p, row, 2048).unwrap();
            oracle::pencil_eigenvalues(&pencil, (-0.5, 300.0)).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_fundamental_system,
    bench_characteristic,
    bench_spectrum,
    bench_fourier,
    bench_pencil
);
criterion_main!(benches);
