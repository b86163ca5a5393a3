mod common;

use std::collections::{BTreeSet, HashSet};

use nsegment::fixtures::{random_image, random_mask, synthetic_pair};
use nsegment::pipeline::augment_batch;
use nsegment::{
    apply_augmentation, derive_stream, generate_displacement_field, nsegment, sample_params, warp_image, warp_label,
    AugmentConfig, DeformationParams, Mode, OmegaSet, SamplePair, SampleStream,
};
use proptest::prelude::*;

fn random_pair(w: usize, h: usize, seed: u64) -> SamplePair {
    let mut rng = SampleStream::from_seed(seed);
    let image = random_image(w, h, 3, &mut rng);
    let mask = random_mask(w, h, 6, &mut rng);
    SamplePair::new(image, mask, seed, 0).unwrap()
}

#[test]
fn omega_choice_is_uniform() {
    let omega = OmegaSet::default();
    let mut counts = vec![0u64; omega.len()];
    let mut rng = SampleStream::from_seed(2024);
    let draws = 150_000;
    for _ in 0..draws {
        let p = sample_params(&omega, &mut rng).unwrap();
        let k = omega.pairs().iter().position(|q| *q == p).unwrap();
        counts[k] += 1;
    }
    let expected = draws as f64 / omega.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    for &c in &counts {
        assert!((c as f64 / draws as f64 - 1.0 / 15.0).abs() < 0.005);
    }
    // 14 dof, 0.999 quantile is about 36.1
    assert!(chi2 < 36.1, "chi2 {chi2}");
}

#[test]
fn nsegment_equals_composed_oracle() {
    let pair = {
        let mut v = vec![0u8; 256];
        for y in 4..12 {
            for x in 3..10 {
                v[y * 16 + x] = 1;
            }
        }
        nsegment::LabelMask::new(16, 16, 2, v).unwrap()
    };
    let config = AugmentConfig {
        p: 1.0,
        omega: OmegaSet::single(15.0, 5.0).unwrap(),
        ..AugmentConfig::default()
    };
    for seed in 0..10u64 {
        let out = nsegment(&pair, &config, &mut SampleStream::from_seed(seed)).unwrap();

        let mut rng = SampleStream::from_seed(seed);
        let _gate = rng.uniform();
        let _choice = rng.uniform();
        let (dx, dy) = common::field_oracle(16, 16, 15.0, 5.0, &mut rng);
        let oracle = common::scatter_naive(pair.values(), 16, 16, &dx, &dy, nsegment::IGNORE);
        assert_eq!(out.values(), oracle.as_slice(), "seed {seed}");
    }
}

#[test]
fn gate_probability_matches_p() {
    let mask = random_mask(4, 4, 2, &mut SampleStream::from_seed(0));
    let config = AugmentConfig {
        p: 0.3,
        omega: OmegaSet::single(30.0, 1.0).unwrap(),
        ..AugmentConfig::default()
    };
    let mut applied = 0;
    for s in 0..4000u64 {
        let mut rng = derive_stream(1, s, 0);
        if nsegment::draw_plan(&config, &mut rng).unwrap().is_some() {
            applied += 1;
        }
        let _ = nsegment(&mask, &config, &mut derive_stream(1, s, 0)).unwrap();
    }
    let rate = applied as f64 / 4000.0;
    assert!((rate - 0.3).abs() < 0.03, "rate {rate}");
}

#[test]
fn gate_law_on_random_samples() {
    let off = AugmentConfig {
        p: 0.0,
        ..AugmentConfig::default()
    };
    let zero = AugmentConfig {
        p: 1.0,
        omega: OmegaSet::single(0.0, 3.0).unwrap(),
        mode: Mode::Identical,
        ..AugmentConfig::default()
    };
    for seed in 0..100 {
        let pair = random_pair(32, 24, seed);
        for c in [&off, &zero] {
            let out = apply_augmentation(&pair, c).unwrap();
            assert_eq!(out.sample, pair);
        }
    }
}

#[test]
fn epochs_vary_the_parameters() {
    let config = AugmentConfig {
        p: 1.0,
        master_seed: 42,
        ..AugmentConfig::default()
    };
    let pair = synthetic_pair(32, 32, 3, 1);
    let chosen: BTreeSet<(u64, u64)> = (0..10)
        .map(|epoch| {
            let s = SamplePair { epoch, ..pair.clone() };
            let p = apply_augmentation(&s, &config).unwrap().record.deformation.unwrap();
            (p.alpha.to_bits(), p.sigma.to_bits())
        })
        .collect();
    assert!(chosen.len() >= 2);
}

#[test]
fn derived_streams_are_distinct() {
    let mut firsts = HashSet::new();
    for sample in 0..250u64 {
        for epoch in 0..4u64 {
            assert!(firsts.insert(derive_stream(42, sample, epoch).uniform().to_bits()));
        }
    }
    assert_eq!(firsts.len(), 1000);
    assert_ne!(derive_stream(42, 0, 0).uniform(), derive_stream(42, 0, 1).uniform());
    assert_ne!(derive_stream(42, 0, 0).uniform(), derive_stream(43, 0, 0).uniform());
}

#[test]
fn identical_mode_matches_two_separate_warps() {
    let pair = synthetic_pair(40, 30, 4, 9);
    let pair = SamplePair { sample_id: 7, epoch: 3, ..pair };
    let config = AugmentConfig {
        p: 1.0,
        mode: Mode::Identical,
        master_seed: 42,
        ..AugmentConfig::default()
    };
    let out = apply_augmentation(&pair, &config).unwrap();

    let mut rng = derive_stream(42, 7, 3);
    let plan = nsegment::draw_plan(&config, &mut rng).unwrap().unwrap();
    let field = generate_displacement_field(40, 30, plan, &mut rng).unwrap();
    assert_eq!(out.sample.mask, warp_label(&pair.mask, &field, &config.warp_spec).unwrap());
    assert_eq!(out.sample.image, warp_image(&pair.image, &field, &config.warp_spec).unwrap());
    let mf = out.mask_field.unwrap();
    assert_eq!(common::bits(&mf.dx), common::bits(&field.dx));
    assert_eq!(common::bits(&mf.dy), common::bits(&field.dy));
}

#[test]
fn image_only_ramp_changes() {
    let w = 32;
    let image = nsegment::ImagePlane::new(w, w, 1, (0..w * w).map(|i| ((i % w) * 8) as u8).collect()).unwrap();
    let mask = random_mask(w, w, 3, &mut SampleStream::from_seed(2));
    let pair = SamplePair::new(image, mask, 0, 0).unwrap();
    for alpha in [15.0, 30.0, 50.0, 100.0] {
        let config = AugmentConfig {
            p: 1.0,
            mode: Mode::ImageOnly,
            omega: OmegaSet::single(alpha, 3.0).unwrap(),
            ..AugmentConfig::default()
        };
        let out = apply_augmentation(&pair, &config).unwrap();
        assert_eq!(out.sample.mask, pair.mask);
        assert_ne!(out.sample.image, pair.image, "alpha {alpha}");
    }
}

#[test]
fn batch_is_schedule_independent() {
    let samples: Vec<SamplePair> = (0..48)
        .map(|i| SamplePair {
            sample_id: i,
            epoch: i % 3,
            ..synthetic_pair(48, 40, 4, i)
        })
        .collect();
    let config = AugmentConfig {
        p: 0.7,
        mode: Mode::Identical,
        master_seed: 42,
        hflip_p: 0.5,
        resize_range: Some((0.5, 2.0)),
        ..AugmentConfig::default()
    };
    let one = augment_batch(&samples, &config, 1).unwrap();
    let eight = augment_batch(&samples, &config, 8).unwrap();
    let mut reversed: Vec<SamplePair> = samples.clone();
    reversed.reverse();
    let mut rev = augment_batch(&reversed, &config, 8).unwrap();
    rev.reverse();
    for ((a, b), c) in one.iter().zip(&eight).zip(&rev) {
        assert_eq!(a.sample, b.sample);
        assert_eq!(a.record, b.record);
        assert_eq!(a.sample, c.sample);
    }
}

#[test]
fn flip_twice_is_identity() {
    for seed in 0..20 {
        let pair = random_pair(1 + seed as usize, 5, seed);
        assert_eq!(pair.hflip().hflip(), pair);
    }
}

#[test]
fn companion_streams_do_not_shift_deformation() {
    let pair = synthetic_pair(40, 40, 3, 5);
    let base = AugmentConfig {
        p: 1.0,
        master_seed: 9,
        ..AugmentConfig::default()
    };
    let with_flip = AugmentConfig {
        hflip_p: 1.0,
        ..base.clone()
    };
    let a = apply_augmentation(&pair, &base).unwrap();
    let b = apply_augmentation(&pair, &with_flip).unwrap();
    assert_eq!(a.record.deformation, b.record.deformation);
    assert_eq!(b.sample.mask, a.sample.mask.hflip());
}

#[test]
fn resize_scale_stays_in_range() {
    let pair = synthetic_pair(20, 20, 2, 3);
    let config = AugmentConfig {
        p: 0.0,
        resize_range: Some((0.5, 2.0)),
        ..AugmentConfig::default()
    };
    for epoch in 0..50 {
        let s = SamplePair { epoch, ..pair.clone() };
        let out = apply_augmentation(&s, &config).unwrap();
        let scale = out.record.resize_scale.unwrap();
        assert!((0.5..=2.0).contains(&scale));
        assert_eq!(out.sample.width(), ((20.0 * scale).round() as usize).max(1));
        assert!(out.sample.mask.class_set().is_subset(&pair.mask.class_set()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mode_exclusivity(seed in any::<u64>(), sample_id in 0u64..1000, epoch in 0u64..50, p in 0.0f64..=1.0) {
        let pair = SamplePair { sample_id, epoch, ..random_pair(12, 10, seed) };
        let label = AugmentConfig { p, master_seed: seed, ..AugmentConfig::default() };
        let out = apply_augmentation(&pair, &label).unwrap();
        prop_assert_eq!(&out.sample.image, &pair.image);

        let image = AugmentConfig { mode: Mode::ImageOnly, ..label };
        let out = apply_augmentation(&pair, &image).unwrap();
        prop_assert_eq!(&out.sample.mask, &pair.mask);
    }

    #[test]
    fn plan_is_shared_across_modes(seed in any::<u64>(), sample_id in 0u64..1000) {
        let pair = SamplePair { sample_id, ..random_pair(8, 8, seed) };
        let mut plans = Vec::new();
        for mode in [Mode::LabelOnly, Mode::ImageOnly, Mode::Identical] {
            let c = AugmentConfig { mode, master_seed: seed, ..AugmentConfig::default() };
            plans.push(apply_augmentation(&pair, &c).unwrap().record.deformation);
        }
        prop_assert_eq!(&plans[0], &plans[1]);
        prop_assert_eq!(&plans[1], &plans[2]);
    }

    #[test]
    fn singleton_omega_always_chosen(seed in any::<u64>(), a in 0.0f64..200.0, s in 0.1f64..20.0) {
        let omega = OmegaSet::single(a, s).unwrap();
        let p = sample_params(&omega, &mut SampleStream::from_seed(seed)).unwrap();
        prop_assert_eq!(p, DeformationParams::new(a, s).unwrap());
    }
}
