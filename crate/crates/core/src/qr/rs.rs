//! Reed-Solomon coding over GF(256) as used by QR symbols: generator roots
//! alpha^0 .. alpha^(ec_len-1), codewords stored highest-degree first.
//!
//! Decoding is syndrome based: Berlekamp-Massey for the error locator,
//! Chien search for positions and Forney for magnitudes. A locator whose
//! root count disagrees with its degree, or a corrected word with non-zero
//! syndromes, is reported as uncorrectable rather than returned.

use super::gf256::{self, alpha_pow, mul, poly_eval};

/// Generator polynomial prod_{i < ec_len} (x - alpha^i), highest degree
/// first, monic.
pub fn generator(ec_len: usize) -> Vec<u8> {
    let mut g = vec![1u8];
    for i in 0..ec_len {
        let root = alpha_pow(i as i64);
        let mut next = vec![0u8; g.len() + 1];
        for (j, &c) in g.iter().enumerate() {
            next[j] ^= c;
            next[j + 1] ^= mul(c, root);
        }
        g = next;
    }
    g
}

/// EC codewords: the remainder of data(x) * x^ec_len divided by the
/// generator.
pub fn rs_ec(data: &[u8], ec_len: usize) -> Vec<u8> {
    assert!(ec_len >= 1, "ec_len must be at least 1");
    let g = generator(ec_len);
    let mut rem = vec![0u8; ec_len];
    for &d in data {
        let factor = d ^ rem[0];
        rem.rotate_left(1);
        rem[ec_len - 1] = 0;
        for (r, &gc) in rem.iter_mut().zip(&g[1..]) {
            *r ^= mul(gc, factor);
        }
    }
    rem
}

pub fn syndromes(codeword: &[u8], ec_len: usize) -> Vec<u8> {
    (0..ec_len)
        .map(|j| poly_eval(codeword, alpha_pow(j as i64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Uncorrectable;

/// Corrects `codeword` (data followed by `ec_len` EC bytes) in place and
/// returns the number of corrected codewords.
pub fn rs_correct(codeword: &mut [u8], ec_len: usize) -> Result<usize, Uncorrectable> {
    let n = codeword.len();
    if ec_len == 0 || ec_len > n || n > 255 {
        return Err(Uncorrectable);
    }
    let synd = syndromes(codeword, ec_len);
    if synd.iter().all(|&s| s == 0) {
        return Ok(0);
    }

    // Berlekamp-Massey, polynomials stored lowest degree first.
    let mut lambda = vec![0u8; ec_len + 1];
    let mut prev = vec![0u8; ec_len + 1];
    lambda[0] = 1;
    prev[0] = 1;
    let mut l = 0usize;
    let mut shift = 1usize;
    let mut b = 1u8;
    for k in 0..ec_len {
        let mut delta = synd[k];
        for i in 1..=l {
            delta ^= mul(lambda[i], synd[k - i]);
        }
        if delta == 0 {
            shift += 1;
            continue;
        }
        let coef = gf256::div(delta, b);
        let saved = lambda.clone();
        for i in 0..=ec_len - shift {
            lambda[i + shift] ^= mul(coef, prev[i]);
        }
        if 2 * l <= k {
            l = k + 1 - l;
            prev = saved;
            b = delta;
            shift = 1;
        } else {
            shift += 1;
        }
    }
    if 2 * l > ec_len {
        return Err(Uncorrectable);
    }
    let lambda = &lambda[..=l];

    // Chien search over positions: power i corresponds to index n-1-i.
    let eval_low = |p: &[u8], x: u8| p.iter().rev().fold(0u8, |acc, &c| mul(acc, x) ^ c);
    let mut powers = Vec::with_capacity(l);
    for i in 0..n {
        if eval_low(lambda, alpha_pow(-(i as i64))) == 0 {
            powers.push(i);
        }
    }
    if powers.len() != l {
        return Err(Uncorrectable);
    }

    // Omega = S(x) * Lambda(x) mod x^ec_len
    let mut omega = vec![0u8; ec_len];
    for (i, &s) in synd.iter().enumerate() {
        for (j, &c) in lambda.iter().enumerate() {
            if i + j < ec_len {
                omega[i + j] ^= mul(s, c);
            }
        }
    }
    // formal derivative: odd-degree terms survive in characteristic 2
    let deriv: Vec<u8> = (1..lambda.len())
        .map(|i| if i % 2 == 1 { lambda[i] } else { 0 })
        .collect();

    for &i in &powers {
        let x = alpha_pow(i as i64);
        let x_inv = alpha_pow(-(i as i64));
        let denom = eval_low(&deriv, x_inv);
        if denom == 0 {
            return Err(Uncorrectable);
        }
        let magnitude = mul(x, gf256::div(eval_low(&omega, x_inv), denom));
        codeword[n - 1 - i] ^= magnitude;
    }
    if syndromes(codeword, ec_len).iter().any(|&s| s != 0) {
        return Err(Uncorrectable);
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, Stream};

    #[test]
    fn zero_data_gives_zero_ec() {
        assert_eq!(rs_ec(&[0; 10], 7), vec![0; 7]);
    }

    #[test]
    fn known_generator() {
        // degree-7 generator from the QR standard (exponent form 0 87 229
        // 146 149 238 102 21)
        let g = generator(7);
        let logs: Vec<u8> = g.iter().map(|&c| gf256::log(c)).collect();
        assert_eq!(logs, vec![0, 87, 229, 146, 149, 238, 102, 21]);
    }

    #[test]
    fn known_ec_vector() {
        // "01234567" in numeric mode, version 1-M (ISO/IEC 18004 annex I)
        let data = [
            0x10, 0x20, 0x0c, 0x56, 0x61, 0x80, 0xec, 0x11, 0xec, 0x11, 0xec, 0x11, 0xec, 0x11,
            0xec, 0x11,
        ];
        assert_eq!(
            rs_ec(&data, 10),
            vec![0xa5, 0x24, 0xd4, 0xc1, 0xed, 0x36, 0xc7, 0x87, 0x2c, 0x55]
        );
    }

    #[test]
    fn codeword_has_zero_syndrome() {
        let mut s = Stream::new(1, domain::TEST);
        for ec_len in 1..30 {
            let data: Vec<u8> = (0..20).map(|_| s.next_u64() as u8).collect();
            let mut cw = data.clone();
            cw.extend(rs_ec(&data, ec_len));
            assert!(syndromes(&cw, ec_len).iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn single_byte_exhaustive_single_error() {
        for d in [0u8, 1, 0x5a, 0xff] {
            let mut clean = vec![d];
            clean.extend(rs_ec(&[d], 2));
            for pos in 0..3 {
                for e in 1..=255u8 {
                    let mut cw = clean.clone();
                    cw[pos] ^= e;
                    assert_eq!(rs_correct(&mut cw, 2), Ok(1));
                    assert_eq!(cw, clean);
                }
            }
        }
    }

    #[test]
    fn corrects_up_to_capacity() {
        let mut s = Stream::new(2, domain::TEST);
        for trial in 0..200 {
            let ec_len = 2 + trial % 27;
            let data: Vec<u8> = (0..(9 + trial % 40)).map(|_| s.next_u64() as u8).collect();
            let mut clean = data.clone();
            clean.extend(rs_ec(&data, ec_len));
            let t = ec_len / 2;
            let mut cw = clean.clone();
            let perm = crate::rng::permutation(cw.len(), trial as u64, domain::TEST);
            for &p in &perm[..t] {
                cw[p] ^= 1 + (s.next_u64() % 255) as u8;
            }
            assert_eq!(rs_correct(&mut cw, ec_len), Ok(t));
            assert_eq!(cw, clean);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(rs_correct(&mut [1, 2, 3], 0), Err(Uncorrectable));
        assert_eq!(rs_correct(&mut [1, 2, 3], 4), Err(Uncorrectable));
    }
}
