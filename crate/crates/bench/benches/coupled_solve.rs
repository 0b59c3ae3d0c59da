use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ltn_bench::{m1_problem, table_grids};
use ltn_core::optimizer::solve;
use ltn_core::{BfgsOptions, KernelFamily, Solver};

fn coupled(c: &mut Criterion) {
    let opts = BfgsOptions::default();
    let mut group = c.benchmark_group("coupled_solve/m1_singular");
    for (p, h) in table_grids() {
        let problem = m1_problem(KernelFamily::SingularPeridynamic, 0.065, h);
        for solver in [Solver::Normal, Solver::Bfgs] {
            group.bench_with_input(BenchmarkId::new(solver.name(), format!("2^-{p}")), &problem, |b, pr| {
                b.iter(|| solve(pr, solver, &opts).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, coupled);
criterion_main!(benches);
