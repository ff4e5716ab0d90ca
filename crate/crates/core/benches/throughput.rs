use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ivie_core::batch::{layout_all_lines, mock_explain_lines};
use ivie_core::pipeline::{Delivery, MockProvider};
use ivie_core::{
    ExecMode, ExplanationSet, GridMetrics, Pipeline, PipelineOptions, ProviderConfig, Suggestion,
};

fn document(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match i % 6 {
            0 => format!("img_{i} = cv2.GaussianBlur(img, (5, 5), 0)"),
            1 => format!("edges = cv2.Canny(img_{}, 100, 200)", i - 1),
            2 => "plt.subplot(121), plt.imshow(img, cmap='gray')".to_string(),
            3 => String::new(),
            4 => format!("result[{i}] = compute(a, (b, c), d={i}) + offset"),
            _ => format!("    log.info(\"step %d of %d\", {i}, total)"),
        })
        .collect()
}

const MODES: [(&str, ExecMode); 2] = [
    ("parallel", ExecMode::Parallel),
    ("sequential", ExecMode::Sequential),
];

fn bench_mock_lines(c: &mut Criterion) {
    let mut g = c.benchmark_group("mock_explain_lines");
    for n in [200usize, 2000] {
        let lines = document(n);
        g.throughput(Throughput::Elements(n as u64));
        for (name, mode) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &lines, |b, lines| {
                b.iter(|| mock_explain_lines(lines, mode))
            });
        }
    }
    g.finish();
}

fn bench_layout(c: &mut Criterion) {
    let mut g = c.benchmark_group("layout_all_lines");
    let metrics = GridMetrics::default();
    for n in [200usize, 2000] {
        let lines = document(n);
        let s = Suggestion::whole_file("bench.py", lines.clone()).unwrap();
        let mut set = ExplanationSet::new(&s.suggestion_id);
        for (i, items) in mock_explain_lines(&lines, ExecMode::Parallel)
            .into_iter()
            .enumerate()
        {
            set.expressions_by_line.insert(i, items);
        }
        g.throughput(Throughput::Elements(n as u64));
        for (name, mode) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &(), |b, _| {
                b.iter(|| layout_all_lines(&s, &set, &metrics, mode))
            });
        }
    }
    g.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline_explain");
    g.sample_size(20);
    let n = 300;
    let s = Suggestion::whole_file("bench.py", document(n)).unwrap();
    g.throughput(Throughput::Elements(n as u64));
    for (name, mode) in MODES {
        let pipeline = Pipeline::new(Arc::new(MockProvider), ProviderConfig::default())
            .with_options(PipelineOptions {
                exec: mode,
                delivery: Delivery::Settled,
                ..PipelineOptions::default()
            });
        g.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| pipeline.explain(&s).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_mock_lines, bench_layout, bench_pipeline);
criterion_main!(benches);
