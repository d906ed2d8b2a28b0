use fcdd_core::rng::Purpose;
use fcdd_core::synth::{augment, gen_normal_image, AugmentConfig, CategorySpec};
use fcdd_core::{Rng, Tensor};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean pixel value of images 0..100 per built-in category at seed 0.
const CATEGORY_MEANS: [f64; 10] = [
    0.4500028864358,
    0.47636172240518426,
    0.3169665167644763,
    0.33335678744295066,
    0.730309653865453,
    0.2539294184476663,
    0.4957132038881317,
    0.5080894642737174,
    0.43355766126484274,
    0.5574596243642759,
];

#[test]
fn category_means_are_frozen_and_separated() {
    let rng = Rng::new(0);
    let mut means = Vec::new();
    for c in 0..10 {
        let spec = CategorySpec::builtin(c).unwrap();
        let m = (0..100).map(|i| gen_normal_image(&spec, &rng, i).mean()).sum::<f64>() / 100.0;
        assert!((m - CATEGORY_MEANS[c as usize]).abs() < 1e-12, "category {c}: {m}");
        means.push(m);
    }
    for a in 0..10 {
        for b in a + 1..10 {
            assert!((means[a] - means[b]).abs() > 0.01, "categories {a} and {b} too close");
        }
    }
}

#[test]
fn crop_offsets_are_uniform() {
    let cfg = AugmentConfig {
        crop_prob: 1.0,
        jitter_strong: 0.0,
        jitter_faint: 0.0,
        noise_pixel_prob: 0.0,
        ..AugmentConfig::default()
    };
    let base = cfg.base_size;
    let span = base - cfg.out_size + 1;
    let image = Tensor::full(&[3, base, base], 0.5);
    // A single marked pixel at (span-1, span-1) lands at (span-1-oy, span-1-ox).
    let mut mask = Tensor::zeros(&[1, base, base]);
    mask.data_mut()[(span - 1) * base + span - 1] = 1.0;
    let rng = Rng::new(99);
    let mut counts = vec![0u32; span * span];
    let draws = 4000;
    for i in 0..draws {
        let (_, m) = augment(&image, &mask, &mut rng.stream(Purpose::Augment, 0, i), &cfg).unwrap();
        let pos = m.data().iter().position(|&v| v == 1.0).unwrap();
        let (y, x) = (pos / cfg.out_size, pos % cfg.out_size);
        counts[(span - 1 - y) * span + (span - 1 - x)] += 1;
    }
    let expected = draws as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 {chi2}, p {p}, counts {counts:?}");
}
