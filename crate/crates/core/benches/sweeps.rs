use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hoslab_core::commutator::{bound_sweep, SweepOptions};
use hoslab_core::operator::{CoefficientSet, OperatorHandle};
use hoslab_core::potential::{eval_potential, PotentialFamily, PotentialSpec};
use hoslab_core::semigroup::domain_characterization_check;
use hoslab_core::spectral::scan::{default_thetas, log_space};
use hoslab_core::spectral::{sector_scan_fans, ScanOptions, SectorPoint};
use hoslab_core::{Exec, Grid};
use std::f64::consts::PI;

const L: f64 = 3.0 * PI;

fn model(n: usize) -> (OperatorHandle, OperatorHandle, hoslab_core::potential::PotentialFields) {
    let g = Grid::new(1, n, L).unwrap();
    let spec = PotentialSpec::new(PotentialFamily::PeriodicSurrogate { r: 2.0 }, 0.6, 2.0).unwrap();
    let pot = eval_potential(&spec, &g).unwrap();
    let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
    let b = OperatorHandle::multiplication(pot.value(), 1.0).unwrap();
    (a, b, pot)
}

const PATHS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn sector_scan(c: &mut Criterion) {
    let g = Grid::new(1, 64, L).unwrap();
    let op = OperatorHandle::varcoef(CoefficientSet::sine(&g), 1.0).unwrap();
    let thetas = default_thetas();
    let moduli = log_space(1e-2, 1e4, 13);
    let mut group = c.benchmark_group("sector_scan_varcoef_n64");
    group.sample_size(10);
    for (name, exec) in PATHS {
        let opts = ScanOptions {
            exec,
            ..ScanOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, o| {
            b.iter(|| sector_scan_fans(&op, &thetas, &moduli, o).unwrap())
        });
    }
    group.finish();
}

fn commutator_sweep(c: &mut Criterion) {
    let (a, b, pot) = model(64);
    let pts: Vec<SectorPoint> = [0.0, PI / 2.0]
        .iter()
        .flat_map(|&arg| log_space(1.0, 1e4, 13).into_iter().map(move |r| SectorPoint::new(r, arg).unwrap()))
        .collect();
    let mut group = c.benchmark_group("commutator_sweep_n64");
    group.sample_size(10);
    for (name, exec) in PATHS {
        let opts = SweepOptions {
            exec,
            ..SweepOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |bch, o| {
            bch.iter(|| bound_sweep(&a, &b, &pot, &pts, &pts, o).unwrap())
        });
    }
    group.finish();
}

fn domain_check(c: &mut Criterion) {
    let models: Vec<_> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let (a, b, _) = model(n);
            (a, b)
        })
        .collect();
    let mut group = c.benchmark_group("domain_check_200_trials");
    group.sample_size(10);
    for (name, exec) in PATHS {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| domain_characterization_check(&models, &[2.0, 4.0], 200, 0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sector_scan, commutator_sweep, domain_check);
criterion_main!(benches);
