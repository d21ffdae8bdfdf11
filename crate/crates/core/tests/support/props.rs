//! Strategies and checks for the property suite. Each check returns a
//! `TestCaseError` so it can run inside `proptest!` or a bare `TestRunner`.

use amgcn::data::{generate, SyntheticCase, SyntheticSpec};
use amgcn::graph::{build_knn_graph, normalize_adjacency, DenseMatrix, SimilarityMetric, SparseGraph};
use amgcn::losses::{consistency_loss, hsic};
use amgcn::model::{attention_fuse_masked, AttentionParams, AttentionProjection, Channel, ChannelSet};
use amgcn::training::{train, TrainConfig};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gaussian_matrix, oracles};

type Check = std::result::Result<(), TestCaseError>;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

/// Two matrices with the same row count `n ∈ [2, 20]`.
pub fn matrix_pair() -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    (2usize..=20, 1usize..=6, 1usize..=6).prop_flat_map(|(n, a, b)| (matrix(n, a), matrix(n, b)))
}

#[derive(Debug, Clone)]
pub struct AttentionCase {
    pub nodes: usize,
    pub hidden: usize,
    pub attn_hidden: usize,
    pub per_channel: bool,
    pub scale: f64,
    pub active: ChannelSet,
    pub seed: u64,
}

pub fn attention_case() -> impl Strategy<Value = AttentionCase> {
    (
        1usize..=12,
        1usize..=6,
        1usize..=5,
        any::<bool>(),
        0.01f64..50.0,
        prop::sample::select(vec!["tcf", "tc", "tf", "cf", "t", "c", "f"]),
        any::<u64>(),
    )
        .prop_map(
            |(nodes, hidden, attn_hidden, per_channel, scale, active, seed)| AttentionCase {
                nodes,
                hidden,
                attn_hidden,
                per_channel,
                scale,
                active: active.parse().unwrap(),
                seed,
            },
        )
}

pub fn attention_rows_sum_to_one(case: &AttentionCase) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let z: Vec<DenseMatrix> = (0..3)
        .map(|_| gaussian_matrix(&mut rng, case.nodes, case.hidden, case.scale))
        .collect();
    let proj = (0..if case.per_channel { 3 } else { 1 })
        .map(|_| AttentionProjection {
            w: gaussian_matrix(&mut rng, case.attn_hidden, case.hidden, 1.0),
            b: gaussian_matrix(&mut rng, 1, case.attn_hidden, 1.0),
        })
        .collect();
    let attn = AttentionParams {
        proj,
        q: gaussian_matrix(&mut rng, 1, case.attn_hidden, case.scale),
    };
    let (_, trace) = attention_fuse_masked([&z[0], &z[1], &z[2]], &attn, case.active).unwrap();
    for row in trace.alpha.row_iter() {
        let s: f64 = row.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9, "row sums to {}", s);
        for c in Channel::ALL {
            let a = row[c.index()];
            prop_assert!((0.0..=1.0).contains(&a));
            if !case.active.contains(c) {
                prop_assert_eq!(a, 0.0);
            }
        }
    }
    Ok(())
}

/// HSIC against a matrix whose rows are all `c` is zero.
pub fn hsic_with_constant_is_zero(za: &DenseMatrix, c: &[f64]) -> Check {
    let zb = DenseMatrix::from_fn(za.rows(), c.len(), |_, j| c[j]);
    let v = hsic(za, &zb).unwrap();
    prop_assert!(v.abs() < 1e-12, "hsic = {}", v);
    Ok(())
}

pub fn hsic_is_symmetric(za: &DenseMatrix, zb: &DenseMatrix) -> Check {
    let (ab, ba) = (hsic(za, zb).unwrap(), hsic(zb, za).unwrap());
    prop_assert!(close(ab, ba, 1e-12), "{} vs {}", ab, ba);
    prop_assert!(ab >= 0.0);
    prop_assert!(hsic(za, za).unwrap() >= 0.0);
    Ok(())
}

/// Adding one row vector to every row of an argument leaves HSIC unchanged.
pub fn hsic_is_shift_invariant(za: &DenseMatrix, zb: &DenseMatrix, shift: &[f64]) -> Check {
    let shifted = DenseMatrix::from_fn(za.rows(), za.cols(), |i, j| za.get(i, j) + shift[j % shift.len()]);
    let (a, b) = (hsic(za, zb).unwrap(), hsic(&shifted, zb).unwrap());
    prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
    Ok(())
}

/// Positive per-row rescaling of either argument leaves the loss unchanged.
pub fn consistency_is_scale_invariant(za: &DenseMatrix, zb: &DenseMatrix, scales: &[f64]) -> Check {
    let rescale = |z: &DenseMatrix| {
        DenseMatrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j) * scales[i % scales.len()])
    };
    let base = consistency_loss(za, zb).unwrap();
    prop_assert!(base >= 0.0);
    let a = consistency_loss(&rescale(za), zb).unwrap();
    let b = consistency_loss(za, &rescale(zb)).unwrap();
    prop_assert!(close(base, a, 1e-9), "{} vs {}", base, a);
    prop_assert!(close(base, b, 1e-9), "{} vs {}", base, b);
    prop_assert!(consistency_loss(za, za).unwrap() < 1e-12);
    Ok(())
}

pub fn knn_case() -> impl Strategy<Value = (DenseMatrix, usize, bool)> {
    (2usize..=30, 1usize..=6).prop_flat_map(|(n, d)| (matrix(n, d), 1..n, any::<bool>()))
}

/// Symmetric, loop-free, every degree in `[k, n−1]`, and equal to the
/// full-sort oracle.
pub fn knn_graph_is_well_formed(x: &DenseMatrix, k: usize, heat: bool) -> Check {
    let metric = if heat {
        SimilarityMetric::heat()
    } else {
        SimilarityMetric::Cosine
    };
    let g = build_knn_graph(x, k, metric).unwrap();
    let n = x.rows();
    for i in 0..n {
        prop_assert!(!g.has_edge(i, i));
        prop_assert!(
            g.degree(i) >= k && g.degree(i) < n,
            "degree {} with k {}",
            g.degree(i),
            k
        );
        for &j in g.neighbors(i) {
            prop_assert!(g.has_edge(j, i));
        }
    }
    let expected = oracles::knn_neighbours(&metric.similarity(x).unwrap(), k);
    for (i, nb) in expected.iter().enumerate() {
        prop_assert_eq!(g.neighbors(i), nb.as_slice());
    }
    Ok(())
}

pub fn normalized_adjacency_is_symmetric(n: usize, edges: &[(usize, usize)]) -> Check {
    let g = SparseGraph::from_edges(n, edges).unwrap();
    let a = normalize_adjacency(&g).to_dense();
    for i in 0..n {
        prop_assert!(a.get(i, i) > 0.0);
        for j in 0..n {
            prop_assert_eq!(a.get(i, j), a.get(j, i));
        }
    }
    Ok(())
}

/// Two runs from the same seed produce identical histories and parameters.
pub fn seeded_runs_are_deterministic(seed: u64) -> Check {
    let data = generate(&SyntheticSpec {
        case: SyntheticCase::GaussianFeatures,
        nodes: 60,
        features: 6,
        classes: 3,
        p_intra: 0.1,
        p_inter: 0.1,
        center_separation: 3.0,
        train_per_class: 4,
        test_per_class: 8,
        seed,
    })
    .unwrap();
    let cfg = TrainConfig {
        nhid1: 8,
        nhid2: 4,
        epoch_max: 5,
        k: 3,
        seed,
        ..TrainConfig::default()
    };
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    prop_assert_eq!(&a.history, &b.history);
    prop_assert_eq!(&a.params, &b.params);
    Ok(())
}

fn runner(cases: u32) -> proptest::test_runner::TestRunner {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn outcome<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Runs every property with a fixed-seed runner; `cases` scales the heavy
/// training property down by 16.
pub fn run_suite(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        (
            "attention rows sum to 1",
            outcome(runner(cases).run(&attention_case(), |c| attention_rows_sum_to_one(&c))),
        ),
        (
            "hsic with a constant is 0",
            outcome(
                runner(cases).run(
                    &(2usize..=20, 1usize..=6)
                        .prop_flat_map(|(n, d)| (matrix(n, d), prop::collection::vec(-5.0f64..5.0, 1..=4))),
                    |(z, c)| hsic_with_constant_is_zero(&z, &c),
                ),
            ),
        ),
        (
            "hsic is symmetric",
            outcome(runner(cases).run(&matrix_pair(), |(a, b)| hsic_is_symmetric(&a, &b))),
        ),
        (
            "hsic is shift invariant",
            outcome(runner(cases).run(
                &(matrix_pair(), prop::collection::vec(-10.0f64..10.0, 1..=6)),
                |((a, b), s)| hsic_is_shift_invariant(&a, &b, &s),
            )),
        ),
        (
            "consistency is scale invariant",
            outcome(runner(cases).run(
                &(2usize..=20, 1usize..=6).prop_flat_map(|(n, h)| {
                    (
                        matrix(n, h),
                        matrix(n, h),
                        prop::collection::vec(0.01f64..100.0, n),
                    )
                }),
                |(a, b, s)| consistency_is_scale_invariant(&a, &b, &s),
            )),
        ),
        (
            "knn graph symmetric with bounded degree",
            outcome(runner(cases).run(&knn_case(), |(x, k, heat)| knn_graph_is_well_formed(&x, k, heat))),
        ),
        (
            "normalized adjacency symmetric",
            outcome(runner(cases).run(
                &(1usize..=25).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..60))),
                |(n, e)| normalized_adjacency_is_symmetric(n, &e),
            )),
        ),
        (
            "seeded runs are deterministic",
            outcome(runner((cases / 16).max(1)).run(&any::<u64>(), seeded_runs_are_deterministic)),
        ),
    ]
}
