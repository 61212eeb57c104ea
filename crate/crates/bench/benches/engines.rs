use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use spincorr::full::{FullLiouvillian, DEFAULT_FULL_CAP};
use spincorr::integrate::{EvolveOptions, MasterEquation};
use spincorr::reduced::{evolve_reduced, ReducedState};
use spincorr::{build_kernel, CMatrix, Frame, NetworkSpec, NoiseSpec, ReducedLiouvillian};

fn noise(xi: f64) -> NoiseSpec {
    NoiseSpec { xi, c_dephasing: 1.0, c_relax_down: 1.0, c_relax_up: 0.0 }
}

fn reduced_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduced_rhs");
    for n in [10, 20, 40] {
        let net = NetworkSpec::pst_chain(n, 100.0, 1.0, 1.0, 1.0).unwrap();
        let kernel = build_kernel(net.positions(), 2.0).unwrap();
        let l = ReducedLiouvillian::from_model(&net, &kernel, &noise(2.0), Frame::Rotating).unwrap();
        let rho = ReducedState::excited(n, 0).unwrap().into_inner();
        let mut out = CMatrix::zeros(n + 1, n + 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| l.apply(black_box(&rho), &mut out)));
    }
    group.finish();
}

fn full_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_rhs");
    group.sample_size(20);
    for n in [4, 6, 8] {
        let net = NetworkSpec::pst_chain(n, 100.0, 1.0, 1.0, 1.0).unwrap();
        let kernel = build_kernel(net.positions(), 2.0).unwrap();
        let l = FullLiouvillian::new(&net, &kernel, &noise(2.0), Frame::Rotating, DEFAULT_FULL_CAP).unwrap();
        let d = 1 << n;
        let rho = CMatrix::from_fn(d, d, |i, j| if i == j { (1.0 / d as f64).into() } else { 0.0.into() });
        let mut out = CMatrix::zeros(d, d);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| l.apply(black_box(&rho), &mut out)));
    }
    group.finish();
}

fn pst_transfer(c: &mut Criterion) {
    let mut group = c.benchmark_group("pst_transfer");
    group.sample_size(10);
    for n in [10, 20] {
        let net = NetworkSpec::pst_chain(n, 100.0, 1.0, 1.0, 0.0).unwrap();
        let kernel = build_kernel(net.positions(), 1.0).unwrap();
        let l = ReducedLiouvillian::from_model(&net, &kernel, &NoiseSpec::dephasing(1.0, 1.0), Frame::Rotating).unwrap();
        let rho0 = ReducedState::excited(n, 0).unwrap();
        let opts = EvolveOptions::new(PI / 2.0).sample_every(usize::MAX);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| evolve_reduced(&rho0, &l, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, reduced_rhs, full_rhs, pst_transfer);
criterion_main!(benches);
