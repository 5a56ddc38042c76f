//! Cross-module invariants, mostly as property tests.

use proptest::prelude::*;

use spivc_core::imaging::{
    generate_patterns, measure, measure_combined, measure_weighted, BitMatrix, Image,
    MeasurementSeries,
};
use spivc_core::pnm;
use spivc_core::qr::{self, block_spec, qr_decode, qr_encode, EcLevel};
use spivc_core::reconstruct::metrics::{psnr, relative_error};
use spivc_core::reconstruct::{reconstruct, solve_lsq, SolverConfig};
use spivc_core::rng::Stream;
use spivc_core::scenes;
use spivc_core::vc_opaque::{self, Assignment};
use spivc_core::vc_patterns::{self, Which};

fn image(w: usize, h: usize, seed: u64) -> Image {
    let mut s = Stream::new(seed, 7);
    Image::new(w, h, (0..w * h).map(|_| s.next_f64()).collect()).unwrap()
}

/// Multiples of 1/256 in [0, 1]: every partial sum is exact in f64.
fn dyadic(w: usize, h: usize, seed: u64) -> Image {
    let mut s = Stream::new(seed, 8);
    Image::new(
        w,
        h,
        (0..w * h).map(|_| s.below(257) as f64 / 256.0).collect(),
    )
    .unwrap()
}

fn bits(w: usize, h: usize, seed: u64, p_one: f64) -> BitMatrix {
    let mut s = Stream::new(seed, 9);
    BitMatrix::from_fn(w, h, |_, _| s.next_f64() < p_one).unwrap()
}

fn level() -> impl Strategy<Value = EcLevel> {
    prop_oneof![
        Just(EcLevel::L),
        Just(EcLevel::M),
        Just(EcLevel::Q),
        Just(EcLevel::H)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn combined_measurement_is_the_sum(w in 1usize..12, h in 1usize..12, n in 1usize..40,
                                       seed: u64, s1: u64, s2: u64) {
        let p = generate_patterns(w, h, n, seed).unwrap();
        let o1 = image(w, h, s1);
        let o2 = image(w, h, s2);
        let both = measure_combined(&[o1.clone(), o2.clone()], &[p.clone(), p.clone()]).unwrap();
        let a = measure(&o1, &p).unwrap();
        let b = measure(&o2, &p).unwrap();
        for ((c, x), y) in both.values.iter().zip(&a.values).zip(&b.values) {
            prop_assert!((c - (x + y)).abs() <= 1e-12 * c.abs().max(1.0));
        }
        let d1 = dyadic(w, h, s1);
        let d2 = dyadic(w, h, s2);
        let both = measure_combined(&[d1.clone(), d2.clone()], &[p.clone(), p.clone()]).unwrap();
        let a = measure(&d1, &p).unwrap();
        let b = measure(&d2, &p).unwrap();
        for ((c, x), y) in both.values.iter().zip(&a.values).zip(&b.values) {
            prop_assert_eq!(*c, x + y);
        }
    }

    #[test]
    fn measurement_scales(w in 1usize..10, h in 1usize..10, seed: u64, c in 0.0f64..100.0) {
        let p = generate_patterns(w, h, 16, seed).unwrap();
        let o = image(w, h, seed ^ 1);
        let base = measure(&o, &p).unwrap();
        let scaled = measure(&o.scaled(c).unwrap(), &p).unwrap();
        for (s, b) in scaled.values.iter().zip(&base.values) {
            prop_assert!((s - c * b).abs() <= 1e-12 * (c * b).abs().max(1e-300));
        }
    }

    #[test]
    fn patterns_are_deterministic_prefixes(w in 1usize..9, h in 1usize..9, n1 in 1usize..20,
                                           extra in 0usize..20, seed: u64) {
        let short = generate_patterns(w, h, n1, seed).unwrap();
        let long = generate_patterns(w, h, n1 + extra, seed).unwrap();
        prop_assert_eq!(short.patterns(), &long.patterns()[..n1]);
        prop_assert_eq!(&short, &generate_patterns(w, h, n1, seed).unwrap());
    }

    #[test]
    fn series_json_is_lossless(seed: u64, n in 1usize..30) {
        let p = generate_patterns(5, 4, n, seed).unwrap();
        let s = measure(&image(5, 4, seed), &p).unwrap();
        prop_assert_eq!(&MeasurementSeries::from_json(&s.to_json().unwrap()).unwrap(), &s);
    }

    #[test]
    fn pbm_round_trip(w in 1usize..40, h in 1usize..40, seed: u64) {
        let m = bits(w, h, seed, 0.5);
        for enc in [pnm::Encoding::Ascii, pnm::Encoding::Binary] {
            prop_assert_eq!(&pnm::read_pbm(&pnm::write_pbm(&m, enc)).unwrap(), &m);
        }
    }

    #[test]
    fn qr_round_trip(version in 1u8..=4, lvl in level(), mask in 0u8..8,
                     msg in proptest::collection::vec(any::<u8>(), 0..80)) {
        let cap = block_spec(version, lvl).unwrap().byte_capacity();
        let msg = &msg[..msg.len().min(cap)];
        let sym = qr_encode(msg, version, lvl, Some(mask)).unwrap();
        prop_assert_eq!(sym.mask_id, mask);
        let d = qr_decode(&sym.matrix).unwrap();
        prop_assert_eq!(&d.message[..], msg);
        prop_assert_eq!(d.corrected_errors, 0);
        prop_assert_eq!((d.version, d.ec_level, d.mask_id), (version, lvl, mask));
    }

    #[test]
    fn qr_decoding_ignores_mask(version in 1u8..=4, lvl in level(),
                                msg in proptest::collection::vec(any::<u8>(), 0..14)) {
        let msg = &msg[..msg.len().min(7)];
        let texts: Vec<Vec<u8>> = (0..8)
            .map(|m| qr_decode(&qr_encode(msg, version, lvl, Some(m)).unwrap().matrix).unwrap().message)
            .collect();
        prop_assert!(texts.iter().all(|t| t == msg));
    }

    #[test]
    fn qr_function_patterns_untouched(version in 1u8..=4, lvl in level(), mask in 0u8..8,
                                      msg in proptest::collection::vec(any::<u8>(), 0..14)) {
        // function modules depend only on version, level and mask, never on data
        let msg = &msg[..msg.len().min(7)];
        let sym = qr_encode(msg, version, lvl, Some(mask)).unwrap();
        let (expected, is_fn) = qr::layout::draw_function_patterns(version, lvl, mask);
        let size = sym.side();
        for y in 0..size {
            for x in 0..size {
                if is_fn.get(x, y) {
                    // BitMatrix 1 = light; grid true = dark
                    prop_assert_eq!(sym.matrix.get(x, y) == 0, expected.get(x, y), "({}, {})", x, y);
                }
            }
        }
    }

    #[test]
    fn rs_corrects_up_to_capacity(version in 1u8..=4, lvl in level(), seed: u64) {
        let spec = block_spec(version, lvl).unwrap();
        let mut s = Stream::new(seed, 1);
        let data: Vec<u8> = (0..spec.data_per_block).map(|_| s.below(256) as u8).collect();
        let clean = qr::CodewordBlock::encode(data, spec.ec_per_block);
        let mut word = clean.data_codewords.clone();
        word.extend(&clean.ec_codewords);
        let t = spec.ec_per_block / 2;
        let k = s.below(t + 1);
        let mut noisy = word.clone();
        for &pos in spivc_core::rng::permutation(word.len(), seed, 2).iter().take(k) {
            noisy[pos] ^= 1 + s.below(255) as u8;
        }
        let fixed = qr::rs::rs_correct(&mut noisy, spec.ec_per_block).unwrap();
        prop_assert_eq!(fixed, k);
        prop_assert_eq!(noisy, word);
    }

    #[test]
    fn opaque_shares_invariants(w in 3usize..30, h in 3usize..30, s1: u64, s2: u64,
                                seed: u64, balanced: bool) {
        let base = bits(w, h, s1, 0.5);
        let secret = bits(w, h, s2, 0.3);
        let assignment = if balanced { Assignment::Balanced } else { Assignment::Random };
        let pair = vc_opaque::encode_shares(&base, &secret, seed, assignment).unwrap();
        let ov = vc_opaque::overlay(&pair.key1, &pair.key2).unwrap();
        // exact reveal
        let revealed = BitMatrix::from_fn(w, h, |x, y| ov.get(x, y) == 1.0).unwrap();
        prop_assert_eq!(&revealed, &secret);
        prop_assert_eq!(
            &vc_opaque::extract_secret_from_overlay(&ov, vc_opaque::DEFAULT_TAU).unwrap(),
            &secret
        );
        for y in 0..h {
            for x in 0..w {
                let d1 = pair.key1.get(x, y) != base.get(x, y);
                let d2 = pair.key2.get(x, y) != base.get(x, y);
                if secret.get(x, y) == 1 {
                    prop_assert!(d1 ^ d2, "one key modified at ({}, {})", x, y);
                } else {
                    prop_assert!(!d1 && !d2);
                }
            }
        }
        // one detector over both keys sees the overlay
        let p = generate_patterns(w, h, 24, seed).unwrap();
        let k1 = Image::from(&pair.key1);
        let k2 = Image::from(&pair.key2);
        prop_assert_eq!(
            measure_combined(&[k1, k2], &[p.clone(), p.clone()]).unwrap().values,
            measure(&ov, &p).unwrap().values
        );
    }

    #[test]
    fn pattern_reveal_is_exact(w in 1usize..20, h in 1usize..20, n in 1usize..12,
                               s1: u64, base: u64, orient: u64) {
        let secret = bits(w, h, s1, 0.4);
        let pair = vc_patterns::encode_pattern_shares(w, h, n, &secret, base, orient).unwrap();
        prop_assert_eq!(&vc_patterns::reveal_secret_from_patterns(&pair), &secret);
        for lv in vc_patterns::superpose_sequences(&pair) {
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(lv.get(x, y) == 1, secret.get(x, y) == 1);
                }
            }
        }
    }

    #[test]
    fn pattern_pair_measures_like_superposition(w in 1usize..12, h in 1usize..12, n in 1usize..20,
                                                s1: u64, base: u64, orient: u64) {
        let secret = bits(w, h, s1, 0.4);
        let pair = vc_patterns::encode_pattern_shares(w, h, n, &secret, base, orient).unwrap();
        let o = dyadic(w, h, s1 ^ 3);
        let both = measure_combined(
            &[o.clone(), o.clone()],
            &[pair.sequence(Which::A).clone(), pair.sequence(Which::B).clone()],
        )
        .unwrap();
        let weights: Vec<Vec<f64>> =
            vc_patterns::superpose_sequences(&pair).iter().map(|l| l.to_weights()).collect();
        prop_assert_eq!(both.values, measure_weighted(&o, &weights).unwrap());
    }

    #[test]
    fn lsq_scales_with_measurements(seed: u64, c in 0.01f64..50.0) {
        let p = generate_patterns(5, 5, 18, seed).unwrap();
        let s = measure(&image(5, 5, seed), &p).unwrap();
        let mut t = s.clone();
        t.values.iter_mut().for_each(|v| *v *= c);
        let a = solve_lsq(&s, &p).unwrap();
        let b = solve_lsq(&t, &p).unwrap();
        let mut av: Vec<f64> = a.image.iter().map(|v| c * v).collect();
        av.push(c * a.offset);
        let mut bv = b.image;
        bv.push(b.offset);
        prop_assert!(relative_error(&bv, &av) <= 1e-9);
    }
}

#[test]
fn single_share_still_images_the_scene() {
    let (w, h) = (24, 24);
    let secret = scenes::ok_glyph(w, h, 2).unwrap();
    for seed in 0..3 {
        let pair =
            vc_patterns::encode_pattern_shares(w, h, 2 * w * h, &secret, seed, seed + 10).unwrap();
        for (kind, which) in [
            (scenes::ObjectKind::Pepper, Which::A),
            (scenes::ObjectKind::Shapes, Which::B),
        ] {
            let o = scenes::object(kind, w, h, seed).unwrap();
            let seq = pair.sequence(which);
            let r = reconstruct(&measure(&o, seq).unwrap(), seq, &SolverConfig::tv()).unwrap();
            let q = psnr(&r.image, &o).unwrap();
            assert!(q >= 40.0, "seed {seed} {kind:?}: {q}");
        }
    }
}

#[test]
fn single_share_statistics_hide_the_secret() {
    let (w, h, n) = (37, 37, 2738);
    let secret = scenes::ok_glyph(w, h, 3).unwrap();
    let pair = vc_patterns::encode_pattern_shares(w, h, n, &secret, 21, 22).unwrap();
    for which in [Which::A, Which::B] {
        let seq = pair.sequence(which);
        let mut fg_lag = Vec::new();
        let mut bg_lag = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let series: Vec<f64> = seq.patterns().iter().map(|p| p.get(x, y) as f64).collect();
                let mean = series.iter().sum::<f64>() / n as f64;
                assert!((mean - 0.5).abs() <= 0.05, "({x}, {y}) mean {mean}");
                let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
                let lag = series
                    .windows(2)
                    .map(|v| (v[0] - mean) * (v[1] - mean))
                    .sum::<f64>()
                    / var;
                if secret.get(x, y) == 1 {
                    fg_lag.push(lag)
                } else {
                    bg_lag.push(lag)
                }
            }
        }
        // lag-1 autocorrelation: per pixel about N(0, 1/n); the class means
        // must agree within a few standard errors
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let se = (1.0 / n as f64).sqrt()
            * (1.0 / fg_lag.len() as f64 + 1.0 / bg_lag.len() as f64).sqrt();
        let gap = (mean(&fg_lag) - mean(&bg_lag)).abs();
        assert!(gap <= 4.0 * se, "lag-1 gap {gap} vs se {se}");
        assert!(fg_lag
            .iter()
            .chain(&bg_lag)
            .all(|l| l.abs() < 5.0 / (n as f64).sqrt()));
    }
}

#[test]
fn random_assignment_is_fair_per_key() {
    let (w, h) = (64, 64);
    let base = bits(w, h, 1, 0.5);
    let secret = bits(w, h, 2, 0.25);
    let pair = vc_opaque::encode_shares(&base, &secret, 3, Assignment::Random).unwrap();
    let (mut ones, mut total) = (0.0, 0.0);
    let (mut on1, mut n1, mut on0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if secret.get(x, y) == 0 {
                continue;
            }
            let k = pair.key1.get(x, y) as f64;
            ones += k;
            total += 1.0;
            if base.get(x, y) == 1 {
                on1 += k;
                n1 += 1.0;
            } else {
                on0 += k;
                n0 += 1.0;
            }
        }
    }
    assert!(total >= 256.0);
    let p = ones / total;
    assert!((0.4..=0.6).contains(&p), "{p}");
    assert!((on1 / n1 - on0 / n0).abs() <= 0.15);
}
