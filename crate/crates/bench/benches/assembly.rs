use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ltn_bench::{kernel, nonlocal_mesh, table_grids};
use ltn_core::fem::assemble_nonlocal_stiffness;
use ltn_core::KernelFamily;

fn stiffness(c: &mut Criterion) {
    for family in [KernelFamily::IntegrableConstant, KernelFamily::SingularPeridynamic] {
        let mut group = c.benchmark_group(format!("nonlocal_stiffness/{}", family.name()));
        for eps in [0.065, 0.01] {
            let k = kernel(family, eps);
            for (p, h) in table_grids() {
                let mesh = nonlocal_mesh(eps, h);
                group.bench_with_input(
                    BenchmarkId::new(format!("eps={eps}"), format!("2^-{p}")),
                    &mesh,
                    |b, m| b.iter(|| assemble_nonlocal_stiffness(m, &k).unwrap()),
                );
            }
        }
        group.finish();
    }
}

criterion_group!(benches, stiffness);
criterion_main!(benches);
