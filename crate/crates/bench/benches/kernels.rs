use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use ptune_bench::{matrix, token_ids, toy_model, values};
use ptune_core::metrics::{map_paper, ndcg_paper, NdcgVariant, RelevanceList};
use ptune_core::optim::{adamw_step, surgical_rates, AdamWHyper, OptimState};
use ptune_core::stats::{student_t_cdf, welch_t};
use ptune_core::Graph;

fn graph_ops(c: &mut Criterion) {
    let (a, b) = (matrix(32, 32, 1), matrix(32, 32, 2));
    c.bench_function("matmul 32x32 forward+backward", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let (x, y) = (g.leaf(&a), g.leaf(&b));
            let p = g.matmul(x, y).unwrap();
            let s = g.softmax_rows(p, true).unwrap();
            let l = g.sum(s).unwrap();
            g.backward(l).unwrap();
            black_box(g.grad(x).map(|d| d[0]))
        })
    });
}

fn model(c: &mut Criterion) {
    let m = toy_model(3);
    let ids = token_ids(24, 4);
    let targets: Vec<Option<usize>> = ids.iter().skip(1).map(|&t| Some(t)).chain([None]).collect();
    c.bench_function("toy model infer, 24 tokens", |bench| {
        bench.iter(|| black_box(m.infer(&ids, false).unwrap()))
    });
    c.bench_function("toy model loss + backward, 24 tokens", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let vars = m.bind(&mut g, true);
            let (logits, _) = m.sequence_logits(&mut g, &vars, &ids).unwrap();
            let loss = g.cross_entropy(logits, &targets).unwrap();
            g.backward(loss).unwrap();
            black_box(g.value(loss)[0])
        })
    });
}

fn optimizer(c: &mut Criterion) {
    let m = toy_model(5);
    let grads: Vec<Vec<f64>> = m
        .params()
        .iter()
        .enumerate()
        .map(|(i, p)| values(p.len(), i as u64))
        .collect();
    let lrs = vec![1e-3; grads.len()];
    let hyper = AdamWHyper::default();
    c.bench_function("adamw_step over toy model", |bench| {
        bench.iter_batched(
            || (m.params().to_vec(), OptimState::new(m.params())),
            |(mut params, mut state)| {
                adamw_step(&mut params, &grads, &mut state, &hyper, &lrs).unwrap();
                params
            },
            BatchSize::SmallInput,
        )
    });
    c.bench_function("surgical_rates", |bench| {
        bench.iter(|| {
            surgical_rates(
                black_box(1e-3),
                5000,
                &[640, 1200, 1200, 1200, 900],
                &[0, 1, 1, 0, 0],
            )
            .unwrap()
        })
    });
}

fn statistics(c: &mut Criterion) {
    c.bench_function("student_t_cdf df 8", |bench| {
        bench.iter(|| student_t_cdf(black_box(-1.3), 8.0).unwrap())
    });
    c.bench_function("student_t_cdf df 1e6", |bench| {
        bench.iter(|| student_t_cdf(black_box(2.1), 1e6).unwrap())
    });
    let (a, b) = (values(10, 6), values(10, 7));
    c.bench_function("welch_t 10 vs 10", |bench| {
        bench.iter(|| welch_t(black_box(&a), &b).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let list = RelevanceList::new(vec![1, 0, 2, 0, 0, 1, 0, 2, 0, 0], 5).unwrap();
    c.bench_function("map_paper 10", |bench| {
        bench.iter(|| map_paper(black_box(&list)).unwrap())
    });
    c.bench_function("ndcg standard 10", |bench| {
        bench.iter(|| ndcg_paper(black_box(&list), NdcgVariant::Standard).unwrap())
    });
}

criterion_group!(benches, graph_ops, model, optimizer, statistics, metrics);
criterion_main!(benches);
