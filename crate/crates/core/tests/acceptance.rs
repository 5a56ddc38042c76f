//! Acceptance criteria A1-A11. Each test prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use spivc_core::imaging::{
    add_noise, generate_patterns, measure, measure_combined, BitMatrix, Image, NoiseModel,
};
use spivc_core::qr::{self, block_spec, qr_decode, qr_decode_gray, qr_encode, EcLevel};
use spivc_core::reconstruct::metrics::{dot_accuracy, f1, psnr, relative_error};
use spivc_core::reconstruct::tv::TvProblem;
use spivc_core::reconstruct::{
    reconstruct, reconstruct_tv_full, solve_lsq, SensingMatrix, SolverConfig,
};
use spivc_core::rng::{permutation, Stream};
use spivc_core::scenes::{self, ObjectKind};
use spivc_core::threshold::ThresholdPolicy;
use spivc_core::vc_opaque::{self, Assignment, DEFAULT_TAU};
use spivc_core::vc_patterns::{self, Which};

const QR_TEXT: &str = "Nanophotonics Research Center";

fn verdict(id: &str, ok: bool, start: Instant, budget: Duration, detail: String) {
    let took = start.elapsed();
    let pass = ok && took < budget;
    println!(
        "{id} {} {detail} ({:.2}s, budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    assert!(ok, "{id}: {detail}");
    assert!(took < budget, "{id}: took {took:?}, budget {budget:?}");
}

fn random_image(w: usize, h: usize, seed: u64) -> Image {
    let mut s = Stream::new(seed, 0x51);
    Image::new(w, h, (0..w * h).map(|_| s.next_f64()).collect()).unwrap()
}

fn random_bits(w: usize, h: usize, seed: u64, p_one: f64) -> BitMatrix {
    let mut s = Stream::new(seed, 0x52);
    BitMatrix::from_fn(w, h, |_, _| s.next_f64() < p_one).unwrap()
}

fn v4h() -> qr::QrSymbol {
    qr_encode(QR_TEXT.as_bytes(), 4, EcLevel::H, None).unwrap()
}

fn key_secret() -> BitMatrix {
    scenes::ok_glyph(33, 33, 1).unwrap()
}

#[test]
fn a01_linearity() {
    let start = Instant::now();
    let p = generate_patterns(16, 16, 128, 1).unwrap();
    let mut worst = 0.0f64;
    for i in 0..20 {
        let o1 = random_image(16, 16, 2 * i);
        let o2 = random_image(16, 16, 2 * i + 1);
        let both = measure_combined(&[o1.clone(), o2.clone()], &[p.clone(), p.clone()]).unwrap();
        let a = measure(&o1, &p).unwrap();
        let b = measure(&o2, &p).unwrap();
        for ((c, x), y) in both.values.iter().zip(&a.values).zip(&b.values) {
            worst = worst.max((c - (x + y)).abs() / c.abs().max(1e-300));
        }
    }
    verdict(
        "A1",
        worst <= 1e-12,
        start,
        Duration::from_secs(1),
        format!("worst relative gap {worst:.1e}"),
    );
}

#[test]
fn a02_overlay_table() {
    let start = Instant::now();
    let mut ok = true;
    for (a, b, want) in [(0, 0, 0.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)] {
        let k1 = BitMatrix::filled(1, 1, a).unwrap();
        let k2 = BitMatrix::filled(1, 1, b).unwrap();
        ok &= vc_opaque::overlay(&k1, &k2).unwrap().get(0, 0) == want;
    }
    let mut exact = 0;
    for i in 0..100u64 {
        let k1 = random_bits(33, 33, 3 * i, 0.5);
        let k2 = random_bits(33, 33, 3 * i + 1, 0.5);
        let p = generate_patterns(33, 33, 16, 3 * i + 2).unwrap();
        let both = measure_combined(
            &[Image::from(&k1), Image::from(&k2)],
            &[p.clone(), p.clone()],
        )
        .unwrap();
        let ov = measure(&vc_opaque::overlay(&k1, &k2).unwrap(), &p).unwrap();
        exact += (both.values == ov.values) as usize;
    }
    verdict(
        "A2",
        ok && exact == 100,
        start,
        Duration::from_secs(1),
        format!(
            "table {}, {exact}/100 pairs exact",
            if ok { "matches" } else { "differs" }
        ),
    );
}

#[test]
fn a03_opaque_exact_reveal() {
    let start = Instant::now();
    let mut worst = 1.0f64;
    for i in 0..100u64 {
        let base = random_bits(33, 33, 2 * i, 0.5);
        let secret = random_bits(33, 33, 2 * i + 1, 0.3);
        let pair = vc_opaque::encode_shares(&base, &secret, i, Assignment::Random).unwrap();
        let ov = vc_opaque::overlay(&pair.key1, &pair.key2).unwrap();
        let support = BitMatrix::from_fn(33, 33, |x, y| ov.get(x, y) == 1.0).unwrap();
        let extracted = vc_opaque::extract_secret_from_overlay(&ov, DEFAULT_TAU).unwrap();
        worst = worst
            .min(dot_accuracy(&support, &secret).unwrap())
            .min(dot_accuracy(&extracted, &secret).unwrap());
    }
    verdict(
        "A3",
        worst == 1.0,
        start,
        Duration::from_secs(5),
        format!("worst dot accuracy {worst}"),
    );
}

#[test]
fn a04_keys_still_decode() {
    let start = Instant::now();
    let sym = v4h();
    let secret = key_secret();
    let budget = vc_opaque::modification_budget(&secret, &sym).unwrap();
    let mut good = 0;
    for seed in 0..20 {
        let pair =
            vc_opaque::encode_shares(&sym.matrix, &secret, seed, Assignment::Random).unwrap();
        good += [&pair.key1, &pair.key2]
            .iter()
            .filter(|k| qr_decode(k).map(|d| d.text() == QR_TEXT).unwrap_or(false))
            .count();
    }
    verdict(
        "A4",
        budget.ok && good == 40,
        start,
        Duration::from_secs(10),
        format!("budget ok={}, {good}/40 keys decode", budget.ok),
    );
}

#[test]
fn a05_key_reconstruction() {
    let start = Instant::now();
    let pair =
        vc_opaque::encode_shares(&v4h().matrix, &key_secret(), 1, Assignment::Random).unwrap();
    let key = Image::from(&pair.key1);
    let p = generate_patterns(33, 33, 2178, 2).unwrap();
    let s = measure(&key, &p).unwrap();
    let lsq = solve_lsq(&s, &p).unwrap();
    let lsq_err = relative_error(&lsq.image, key.pixels());
    let tv = reconstruct(&s, &p, &SolverConfig::tv()).unwrap();
    let q = psnr(&tv.image, &key).unwrap();
    let text = qr_decode_gray(&tv.image, ThresholdPolicy::Otsu).map(|d| d.text());
    verdict(
        "A5",
        lsq_err <= 1e-6 && q >= 35.0 && text.as_deref().ok() == Some(QR_TEXT),
        start,
        Duration::from_secs(120),
        format!("lsq rel err {lsq_err:.1e}, TV PSNR {q:.1} dB, decoded {text:?}"),
    );
}

fn overlay_accuracy(seed: u64, sigma: f64, cfg: &SolverConfig) -> f64 {
    let secret = key_secret();
    let pair = vc_opaque::encode_shares(&v4h().matrix, &secret, seed, Assignment::Random).unwrap();
    let p = generate_patterns(33, 33, 2178, 100 + seed).unwrap();
    let mut s = measure_combined(
        &[Image::from(&pair.key1), Image::from(&pair.key2)],
        &[p.clone(), p.clone()],
    )
    .unwrap();
    if sigma > 0.0 {
        s = add_noise(&s, &NoiseModel::gaussian(sigma, 200 + seed)).unwrap();
    }
    let r = reconstruct(&s, &p, cfg).unwrap();
    let rescaled = vc_opaque::rescale_overlay(&r.image).unwrap();
    let extracted = vc_opaque::extract_secret_from_overlay(&rescaled, DEFAULT_TAU).unwrap();
    dot_accuracy(&extracted, &secret).unwrap()
}

#[test]
fn a06_combined_secret_noiseless() {
    let start = Instant::now();
    let acc: Vec<f64> = (0..3)
        .map(|s| overlay_accuracy(s, 0.0, &SolverConfig::tv()))
        .collect();
    let worst = acc.iter().cloned().fold(1.0, f64::min);
    verdict(
        "A6(noiseless)",
        worst >= 0.99,
        start,
        Duration::from_secs(120),
        format!("dot accuracy per seed {acc:?}"),
    );
}

#[test]
fn a06_combined_secret_noisy() {
    let start = Instant::now();
    let cfg = SolverConfig {
        upper: Some(2.0),
        ..SolverConfig::tv()
    };
    let acc: Vec<f64> = (0..3).map(|s| overlay_accuracy(s, 0.02, &cfg)).collect();
    let worst = acc.iter().cloned().fold(1.0, f64::min);
    verdict(
        "A6(sigma=0.02)",
        worst >= 0.95,
        start,
        Duration::from_secs(120),
        format!(
            "dot accuracy per seed {:?}",
            acc.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn a07_pattern_domain_reveal() {
    let start = Instant::now();
    let mut exact = 0;
    let mut total = 0;
    for seed in 0..50u64 {
        let secret = if seed % 2 == 0 {
            scenes::ok_glyph(37, 37, 1 + (seed as usize / 2) % 3).unwrap()
        } else {
            random_bits(37, 37, seed, 0.3)
        };
        for n in [1, 595, 1369, 2738] {
            let pair =
                vc_patterns::encode_pattern_shares(37, 37, n, &secret, seed, seed + 1000).unwrap();
            exact += (vc_patterns::reveal_secret_from_patterns(&pair) == secret) as usize;
            total += 1;
        }
    }
    verdict(
        "A7",
        exact == total,
        start,
        Duration::from_secs(30),
        format!("{exact}/{total} exact"),
    );
}

fn pattern_f1(kind: ObjectKind, n: usize, which: Which) -> f64 {
    let secret = scenes::ok_glyph(37, 37, 3).unwrap();
    let pair = vc_patterns::encode_pattern_shares(37, 37, n, &secret, 11, 12).unwrap();
    let o = scenes::object(kind, 37, 37, 13).unwrap();
    let a = pair.sequence(Which::A);
    let b = pair.sequence(Which::B);
    let seq = pair.sequence(which);
    let combined = measure_combined(&[o.clone(), o.clone()], &[a.clone(), b.clone()]).unwrap();
    let single = measure(&o, seq).unwrap();
    let cfg = SolverConfig::tv();
    let rc = reconstruct(&combined, seq, &cfg).unwrap();
    let rs = reconstruct(&single, seq, &cfg).unwrap();
    let revealed = vc_patterns::reveal_secret_from_reconstruction(&rc.image, &rs.image).unwrap();
    f1(&revealed, &secret).unwrap()
}

#[test]
fn a08_pattern_share_end_to_end() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (kind, n, need) in [
        (ObjectKind::Pepper, 2738, 0.8),
        (ObjectKind::Shapes, 2738, 0.8),
        (ObjectKind::Pepper, 595, 0.6),
    ] {
        for which in [Which::A, Which::B] {
            let v = pattern_f1(kind, n, which);
            ok &= v >= need;
            lines.push(format!("{kind:?}/N={n}/{which:?}: F1 {v:.3}"));
        }
    }
    verdict("A8", ok, start, Duration::from_secs(300), lines.join(", "));
}

#[test]
fn a09_share_secrecy() {
    let start = Instant::now();
    let (w, h, n) = (37, 37, 2738);
    let secret = scenes::ok_glyph(w, h, 3).unwrap();
    let pair = vc_patterns::encode_pattern_shares(w, h, n, &secret, 31, 32).unwrap();
    let mut worst = 0.0f64;
    for which in [Which::A, Which::B] {
        let seq = pair.sequence(which);
        let mut sums = vec![0usize; w * h];
        for p in seq.patterns() {
            for (s, b) in sums.iter_mut().zip(p.bits()) {
                *s += *b as usize;
            }
        }
        for s in sums {
            worst = worst.max((s as f64 / n as f64 - 0.5).abs());
        }
    }

    // key-orientation fairness over the foreground
    let base = random_bits(64, 64, 41, 0.5);
    let fg = random_bits(64, 64, 42, 0.25);
    let keys = vc_opaque::encode_shares(&base, &fg, 43, Assignment::Random).unwrap();
    let mut counts = [[0.0f64; 2]; 2];
    for y in 0..64 {
        for x in 0..64 {
            if fg.get(x, y) == 1 {
                let b = base.get(x, y) as usize;
                counts[b][0] += 1.0;
                counts[b][1] += keys.key1.get(x, y) as f64;
            }
        }
    }
    let dots = counts[0][0] + counts[1][0];
    let p1 = (counts[0][1] + counts[1][1]) / dots;
    let bias = counts[1][1] / counts[1][0] - counts[0][1] / counts[0][0];
    let fair = dots >= 256.0 && (0.4..=0.6).contains(&p1) && bias.abs() <= 0.15;
    verdict(
        "A9",
        worst <= 0.05 && fair,
        start,
        Duration::from_secs(10),
        format!("max |mean-0.5| {worst:.4}; {dots} dots, P(key1=1) {p1:.3}, base bias {bias:+.3}"),
    );
}

#[test]
fn a10_solver_properties() {
    let start = Instant::now();
    let mut notes = Vec::new();

    let mut monotone = true;
    for (w, n, seed) in [(12, 72, 1u64), (16, 256, 2), (20, 800, 3)] {
        let o = scenes::pepper_like(w, w, seed).unwrap();
        let p = generate_patterns(w, w, n, seed + 10).unwrap();
        let s = measure(&o, &p).unwrap();
        let cfg = SolverConfig {
            record_log: true,
            ..SolverConfig::tv()
        };
        let sol = reconstruct_tv_full(&s, &p, &cfg).unwrap();
        monotone &=
            !sol.log.is_empty() && sol.log.windows(2).all(|r| r[1].objective <= r[0].objective);
    }
    notes.push(format!("monotone {monotone}"));

    let mut grad = 0.0f64;
    for seed in 0..5u64 {
        let p = generate_patterns(6, 6, 40, seed).unwrap();
        let s = measure(&random_image(6, 6, seed + 50), &p).unwrap();
        let op = SensingMatrix::new(&p);
        let prob = TvProblem::new(&op, &s.values, 6, 6, 0.1, 1e-6);
        let x = random_image(6, 6, seed + 60).into_pixels();
        let g = prob.data_gradient(&x);
        for i in 0..36 {
            let step = 1e-4;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let fd = (prob.data_fidelity(&xp) - prob.data_fidelity(&xm)) / (2.0 * step);
            grad = grad.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }
    notes.push(format!("gradient gap {grad:.1e}"));

    let o = random_image(8, 8, 70);
    let p = generate_patterns(8, 8, 128, 71).unwrap();
    let s = measure(&o, &p).unwrap();
    let lsq = solve_lsq(&s, &p).unwrap();
    let cfg = SolverConfig {
        lambda: Some(0.0),
        tol: 1e-14,
        max_iters: 20_000,
        ..SolverConfig::tv()
    };
    let tv = reconstruct_tv_full(&s, &p, &cfg).unwrap();
    let gap = relative_error(&tv.image, &lsq.image);
    notes.push(format!("lambda=0 vs lsq {gap:.1e}"));

    verdict(
        "A10",
        monotone && grad <= 1e-5 && gap <= 1e-4,
        start,
        Duration::from_secs(30),
        notes.join(", "),
    );
}

#[test]
fn a11_reed_solomon_capacity() {
    let start = Instant::now();
    let mut structures: Vec<(usize, usize)> = Vec::new();
    for version in 1..=4 {
        for level in [EcLevel::L, EcLevel::M, EcLevel::Q, EcLevel::H] {
            let b = block_spec(version, level).unwrap();
            if !structures.contains(&(b.data_per_block, b.ec_per_block)) {
                structures.push((b.data_per_block, b.ec_per_block));
            }
        }
    }
    let mut failures = 0;
    let mut silent = 0;
    let mut miscorrected = 0;
    let mut detected = 0;
    for (k, &(data_len, ec_len)) in structures.iter().enumerate() {
        let t = ec_len / 2;
        let mut rng = Stream::new(k as u64, 0x11);
        for trial in 0..1000u64 {
            let data: Vec<u8> = (0..data_len).map(|_| rng.below(256) as u8).collect();
            let mut word = data.clone();
            word.extend(qr::rs::rs_ec(&data, ec_len));
            let positions = permutation(word.len(), (k as u64) << 32 | trial, 0x12);

            let errors = rng.below(t + 1);
            let mut noisy = word.clone();
            for &i in &positions[..errors] {
                noisy[i] ^= 1 + rng.below(255) as u8;
            }
            match qr::rs::rs_correct(&mut noisy, ec_len) {
                Ok(n) if n == errors && noisy == word => {}
                _ => failures += 1,
            }

            let mut over = word.clone();
            for &i in &positions[..t + 1] {
                over[i] ^= 1 + rng.below(255) as u8;
            }
            match qr::rs::rs_correct(&mut over, ec_len) {
                Err(_) => detected += 1,
                Ok(_) if qr::rs::syndromes(&over, ec_len).iter().any(|&s| s != 0) => silent += 1,
                Ok(_) if over == word => failures += 1,
                Ok(_) => miscorrected += 1,
            }
        }
    }
    verdict(
        "A11",
        failures == 0 && silent == 0,
        start,
        Duration::from_secs(60),
        format!(
            "{} block structures; {failures} failures within capacity; capacity+1: {detected} detected, \
             {miscorrected} miscorrected to another codeword, {silent} inconsistent returns",
            structures.len()
        ),
    );
}
