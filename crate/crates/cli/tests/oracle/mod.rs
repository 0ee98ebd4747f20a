//! Reference computations that share no code with `kflip-core`.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

pub fn choose(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Pascal table `t[a][b] = C(a, b)` for `a ≤ n`.
pub fn pascal(n: usize) -> Vec<Vec<BigInt>> {
    let mut t: Vec<Vec<BigInt>> = Vec::with_capacity(n + 1);
    for a in 0..=n {
        let mut row = vec![BigInt::one(); a + 1];
        for b in 1..a {
            row[b] = &t[a - 1][b - 1] + &t[a - 1][b];
        }
        t.push(row);
    }
    t
}

fn c_at(t: &[Vec<BigInt>], a: i64, b: i64) -> BigInt {
    if a < 0 || b < 0 || b > a {
        BigInt::zero()
    } else {
        t[a as usize][b as usize].clone()
    }
}

/// `Σ_b (−1)^b C(w,b) C(n−w, j−b)`: the sum of the level-`j` characters at a
/// point of weight `w`.
pub fn char_sum(t: &[Vec<BigInt>], n: usize, w: usize, j: usize) -> BigInt {
    let (n, w, j) = (n as i64, w as i64, j as i64);
    let mut s = BigInt::zero();
    for b in 0..=j.min(w) {
        let term = c_at(t, w, b) * c_at(t, n - w, j - b);
        if b % 2 == 0 {
            s += term;
        } else {
            s -= term;
        }
    }
    s
}

/// Lazy half-holding eigenvalue of the `k`-flip walk at level `j`.
pub fn level_eigenvalue(n: usize, k: usize, j: usize) -> BigRational {
    let t = pascal(n);
    let c = t[n][k].clone();
    BigRational::new(&c + char_sum(&t, n, j, k), c * 2)
}

/// Applies the full `2^n × 2^n` transition matrix (scaled by `2·C(n,k)`) to
/// every character and returns the eigenvalue each one is certified to have.
pub fn certified_spectrum(n: usize, k: usize) -> Result<Vec<(usize, BigRational)>, String> {
    let size = 1u32 << n;
    let masks: Vec<u32> = (0..size).filter(|s| s.count_ones() as usize == k).collect();
    let c = masks.len() as i64;
    (0..size)
        .into_par_iter()
        .map(|set| {
            let chi = |x: u32| {
                if (x & set).count_ones().is_multiple_of(2) {
                    1i64
                } else {
                    -1
                }
            };
            let mut value: Option<i64> = None;
            for x in 0..size {
                let image = c * chi(x) + masks.iter().map(|&s| chi(x ^ s)).sum::<i64>();
                let ratio = image * chi(x);
                match value {
                    None => value = Some(ratio),
                    Some(v) if v == ratio => {}
                    Some(v) => {
                        return Err(format!(
                            "character {set:b} is not an eigenvector: {v} vs {ratio} at {x:b}"
                        ))
                    }
                }
            }
            Ok((
                set.count_ones() as usize,
                BigRational::new(value.unwrap_or(0).into(), (2 * c).into()),
            ))
        })
        .collect()
}

/// Dense float transition matrix of the lazy walk on all of `{0,1}^n`.
pub fn dense_matrix(n: usize, k: usize) -> nalgebra::DMatrix<f64> {
    let size = 1usize << n;
    let masks: Vec<usize> = (0..size).filter(|s| s.count_ones() as usize == k).collect();
    let w = 0.5 / masks.len() as f64;
    let mut p = nalgebra::DMatrix::<f64>::zeros(size, size);
    for x in 0..size {
        p[(x, x)] += 0.5;
        for s in &masks {
            p[(x, x ^ s)] += w;
        }
    }
    p
}

/// Exact law of the lazy walk on `{0,1}^n` from the origin, one state per
/// configuration, over a common denominator.
pub struct FullCubeWalk {
    n: usize,
    masks: Vec<usize>,
    hold: BigUint,
    num: Vec<BigUint>,
    denom: BigUint,
}

impl FullCubeWalk {
    pub fn new(n: usize, k: usize) -> Self {
        let masks: Vec<usize> = (0..1usize << n)
            .filter(|s| s.count_ones() as usize == k)
            .collect();
        let mut num = vec![BigUint::zero(); 1 << n];
        num[0] = BigUint::one();
        FullCubeWalk {
            n,
            hold: BigUint::from(masks.len()),
            masks,
            num,
            denom: BigUint::one(),
        }
    }

    pub fn step(&mut self) {
        let cur = &self.num;
        let next = (0..1usize << self.n)
            .map(|x| {
                let mut acc = &self.hold * &cur[x];
                for s in &self.masks {
                    acc += &cur[x ^ s];
                }
                acc
            })
            .collect();
        self.num = next;
        self.denom *= &self.hold * 2u32;
    }

    pub fn tv(&self) -> BigRational {
        let d = BigInt::from_biguint(Sign::Plus, self.denom.clone());
        let abs: BigInt = self
            .num
            .iter()
            .map(|v| ((BigInt::from_biguint(Sign::Plus, v.clone()) << self.n) - &d).abs())
            .sum();
        BigRational::new(abs, d << (self.n + 1))
    }
}

/// TV to uniform of the lazy `k`-flip walk after `l` steps from the origin,
/// as `(numerator, denominator)`, by character expansion over a common
/// denominator `2^(n+1)·(2C(n,k))^l`.
pub fn spectral_tv(n: usize, k: usize, l: u64) -> (BigInt, BigInt) {
    let t = pascal(n);
    let c = t[n][k].clone();
    let powers: Vec<BigInt> = (0..=n)
        .map(|j| num_traits::pow(&c + char_sum(&t, n, j, k), l as usize))
        .collect();
    let sums: Vec<BigInt> = (0..=n)
        .into_par_iter()
        .map(|w| {
            let mut s = BigInt::zero();
            for (j, pw) in powers.iter().enumerate().skip(1) {
                if !pw.is_zero() {
                    s += pw * char_sum(&t, n, w, j);
                }
            }
            &t[n][w] * s.abs()
        })
        .collect();
    let num: BigInt = sums.into_iter().sum();
    let denom = num_traits::pow(c * 2, l as usize) << (n + 1);
    (num, denom)
}

/// Exact law of the `(Z/mZ)^n` walk by enumeration of all `m^n` states.
pub fn cyclic_tv_curve(n: usize, m: usize, k: usize, steps: u64) -> Vec<BigRational> {
    let size = m.pow(n as u32);
    let digits = |mut x: usize| {
        let mut d = vec![0usize; n];
        for v in d.iter_mut() {
            *v = x % m;
            x /= m;
        }
        d
    };
    let encode = |d: &[usize]| d.iter().rev().fold(0usize, |acc, &v| acc * m + v);
    // Every increment vector with its multiplicity over C(n,k)·m^k draws.
    let mut moves: Vec<Vec<usize>> = Vec::new();
    for set in 0..1usize << n {
        if set.count_ones() as usize != k {
            continue;
        }
        let coords: Vec<usize> = (0..n).filter(|i| set >> i & 1 == 1).collect();
        for r in 0..m.pow(k as u32) {
            let mut inc = vec![0usize; n];
            let mut r = r;
            for &i in &coords {
                inc[i] = r % m;
                r /= m;
            }
            moves.push(inc);
        }
    }
    let per_step = BigUint::from(moves.len());
    let mut num = vec![BigUint::zero(); size];
    num[0] = BigUint::one();
    let mut denom = BigUint::one();
    let mut out = Vec::new();
    for l in 0..=steps {
        let d = BigInt::from_biguint(Sign::Plus, denom.clone());
        let abs: BigInt = num
            .iter()
            .map(|v| (BigInt::from_biguint(Sign::Plus, v.clone()) * size - &d).abs())
            .sum();
        out.push(BigRational::new(abs, d * size * 2));
        if l == steps {
            break;
        }
        let mut next = vec![BigUint::zero(); size];
        for (x, v) in num.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let dx = digits(x);
            for inc in &moves {
                let y: Vec<usize> = dx.iter().zip(inc).map(|(a, b)| (a + b) % m).collect();
                next[encode(&y)] += v;
            }
        }
        num = next;
        denom *= &per_step;
    }
    out
}

/// Fixed-point arithmetic with `DIGITS` decimal digits.
pub mod fixed {
    use super::*;

    pub const DIGITS: u32 = 60;

    pub fn scale() -> BigInt {
        num_traits::pow(BigInt::from(10), DIGITS as usize)
    }

    pub fn from_ratio(a: i64, b: i64) -> BigInt {
        scale() * a / b
    }

    pub fn mul(a: &BigInt, b: &BigInt) -> BigInt {
        a * b / scale()
    }

    pub fn div(a: &BigInt, b: &BigInt) -> BigInt {
        a * scale() / b
    }

    pub fn sqrt(a: &BigInt) -> BigInt {
        (a * scale()).sqrt()
    }

    /// `2·atanh(z)` for `|z| ≤ 1/3`, which is `ln((1+z)/(1−z))`.
    fn two_atanh(z: &BigInt) -> BigInt {
        let z2 = mul(z, z);
        let mut term = z.clone();
        let mut acc = BigInt::zero();
        let mut i = 1i64;
        while !term.is_zero() {
            acc += &term / i;
            term = mul(&term, &z2);
            i += 2;
        }
        acc * 2
    }

    /// Natural log of a positive integer.
    pub fn ln_int(x: u64) -> BigInt {
        let ln2 = two_atanh(&from_ratio(1, 3));
        let a = 63 - x.leading_zeros() as i64;
        // x / 2^a lies in [1, 2); ln of it via z = (y − 1)/(y + 1) ≤ 1/3.
        let z = from_ratio(x as i64 - (1i64 << a), x as i64 + (1i64 << a));
        ln2 * a + two_atanh(&z)
    }

    pub fn ceil_to_u64(a: &BigInt) -> u64 {
        let s = scale();
        let q = a / &s;
        let q = if &q * &s < *a { q + 1 } else { q };
        q.to_u64().expect("small")
    }

    pub fn to_f64(a: &BigInt) -> f64 {
        BigRational::new(a.clone(), scale()).to_f64().unwrap_or(f64::NAN)
    }
}
