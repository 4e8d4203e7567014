use std::hint::black_box;

use cde_bench::instance;
use cde_core::im::{find_merge_cand, solve, TieBreakConfig};
use cde_core::oracle::is_feasible;
use cde_core::sumrate::lower_bound;
use cde_core::{EvalContext, Partition};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn union_size(c: &mut Criterion) {
    let inst = instance(40);
    let all = inst.all_clients();
    c.bench_function("union_size/K=40", |b| {
        let mut ctx = EvalContext::new(0);
        b.iter(|| ctx.union_size(&inst, black_box(&all)).unwrap())
    });
}

fn solve_from_lower_bound(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for k in [10, 20, 40] {
        let inst = instance(k);
        g.bench_with_input(BenchmarkId::from_parameter(k), &inst, |b, inst| {
            b.iter(|| {
                let mut ctx = EvalContext::new(0);
                let lb = lower_bound(&mut ctx, inst);
                solve(&mut ctx, inst, lb, &TieBreakConfig::lex()).unwrap()
            })
        });
    }
    g.finish();
}

fn merge_candidate(c: &mut Criterion) {
    let mut g = c.benchmark_group("find_merge_cand");
    for k in [10, 20, 40] {
        let inst = instance(k);
        let mut ctx = EvalContext::new(0);
        let lb = lower_bound(&mut ctx, &inst);
        let singles = Partition::singletons(&inst.all_clients());
        g.bench_with_input(BenchmarkId::from_parameter(k), &inst, |b, inst| {
            b.iter(|| find_merge_cand(&mut ctx, inst, black_box(&singles), lb).unwrap())
        });
    }
    g.finish();
}

fn cut_check(c: &mut Criterion) {
    let inst = instance(16);
    let mut ctx = EvalContext::new(0);
    let lb = lower_bound(&mut ctx, &inst);
    let rates = solve(&mut ctx, &inst, lb, &TieBreakConfig::lex())
        .unwrap()
        .rates;
    let mut g = c.benchmark_group("is_feasible");
    g.sample_size(10);
    g.bench_function("K=16", |b| {
        b.iter(|| is_feasible(&mut ctx, &inst, black_box(&rates)).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    union_size,
    solve_from_lower_bound,
    merge_candidate,
    cut_check
);
criterion_main!(benches);
