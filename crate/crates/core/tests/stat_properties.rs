use fcdd_core::stats::{
    average_ranks, compute_cliques, holm_correction, render_cd_svg, wilcoxon_signed_rank, CdModel, ScoreMatrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..16).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(0.0f64..1.0, n)))
}

proptest! {
    #[test]
    fn swap_symmetry((x, y) in paired()) {
        if let Ok(a) = wilcoxon_signed_rank(&x, &y) {
            let b = wilcoxon_signed_rank(&y, &x).unwrap();
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert_eq!(a.p, b.p);
        }
    }

    #[test]
    fn invariant_under_joint_affine_maps((x, y) in paired(), scale in 0.1f64..10.0, shift in -3.0f64..3.0) {
        // Positive affine maps keep every difference's sign and the order of |d|.
        let tx: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let ty: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).collect();
        let td: Vec<f64> = tx.iter().zip(&ty).map(|(a, b)| (a - b).abs()).collect();
        let order = |v: &[f64]| {
            let mut i: Vec<usize> = (0..v.len()).collect();
            i.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
            i
        };
        prop_assume!(order(&d) == order(&td));
        if let Ok(a) = wilcoxon_signed_rank(&x, &y) {
            let b = wilcoxon_signed_rank(&tx, &ty).unwrap();
            prop_assert_eq!(a.p, b.p);
        }
    }

    #[test]
    fn holm_between_raw_and_bonferroni(p in prop::collection::vec(0.0f64..=1.0, 1..12)) {
        let adj = holm_correction(&p).unwrap();
        let m = p.len() as f64;
        for (a, r) in adj.iter().zip(&p) {
            prop_assert!(*a >= *r);
            prop_assert!(*a <= (m * r).min(1.0) + 1e-15);
        }
    }

    #[test]
    fn rank_sums(k in 2usize..6, n in 3usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| (rng.random_range(0..4) as f64) / 4.0).collect())
            .collect();
        let names = |c: char, m: usize| (0..m).map(|i| format!("{c}{i}")).collect::<Vec<_>>();
        let m = ScoreMatrix::new(names('m', k), names('d', n), values).unwrap();
        let ranks = average_ranks(&m);
        let total: f64 = ranks.iter().sum();
        prop_assert!((total - (k * (k + 1)) as f64 / 2.0).abs() < 1e-9);
        prop_assert!(ranks.iter().all(|r| (1.0..=k as f64).contains(r)));
    }
}

/// Exact null p at n = 12 agrees with a Monte-Carlo sign-flip estimate.
#[test]
fn exact_matches_monte_carlo_at_n12() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.5)).collect();
    let zeros = vec![0.0; 12];
    let w = wilcoxon_signed_rank(&d, &zeros).unwrap();
    let mut abs: Vec<(f64, usize)> = d.iter().map(|v| v.abs()).zip(0..).collect();
    abs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut rank = [0.0; 12];
    for (r, &(_, i)) in abs.iter().enumerate() {
        rank[i] = (r + 1) as f64;
    }
    let draws = 100_000;
    let mut hits = 0u32;
    for _ in 0..draws {
        let plus: f64 = rank.iter().filter(|_| rng.random::<bool>()).sum();
        if plus.min(78.0 - plus) <= w.statistic {
            hits += 1;
        }
    }
    let est = hits as f64 / draws as f64;
    let se = (est * (1.0 - est) / draws as f64).sqrt();
    assert!((est - w.p).abs() <= 3.0 * se, "exact {} vs mc {est} (se {se})", w.p);
}

fn golden_model() -> CdModel {
    let methods = ["alpha", "beta", "gamma", "delta", "epsilon"].iter().map(|s| s.to_string()).collect();
    let datasets = (0..8).map(|i| format!("d{i}")).collect();
    let values = vec![
        vec![0.91, 0.88, 0.93, 0.90, 0.87, 0.92, 0.89, 0.94],
        vec![0.90, 0.86, 0.92, 0.91, 0.85, 0.90, 0.88, 0.93],
        vec![0.80, 0.79, 0.84, 0.82, 0.78, 0.83, 0.80, 0.85],
        vec![0.81, 0.78, 0.83, 0.80, 0.79, 0.82, 0.81, 0.84],
        vec![0.70, 0.69, 0.75, 0.72, 0.68, 0.71, 0.73, 0.74],
    ];
    let m = ScoreMatrix::new(methods, datasets, values).unwrap();
    CdModel::from_scores(&m, 0.10).unwrap()
}

#[test]
fn cd_svg_matches_golden_file() {
    let model = golden_model();
    assert_eq!(compute_cliques(&model), model.cliques);
    let svg = render_cd_svg(&model);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/cd_golden.svg");
    if std::env::var_os("FCDD_BLESS").is_some() {
        std::fs::write(path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(path).unwrap();
    assert_eq!(svg, golden);
    assert_eq!(svg.matches(r#"class="clique""#).count(), model.cliques.len());
    // Best half labelled on the left (anchored at the end), the rest on the right.
    let anchors: Vec<&str> = svg
        .lines()
        .filter(|l| l.contains(r#"class="label""#))
        .map(|l| if l.contains(r#"text-anchor="end""#) { "L" } else { "R" })
        .collect();
    assert_eq!(anchors, ["L", "L", "L", "R", "R"]);
}
