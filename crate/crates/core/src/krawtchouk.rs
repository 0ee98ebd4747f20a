//! Krawtchouk polynomials for the symmetric binomial weight, normalized so
//! that `K_j(0) = 1`:
//!
//! ```text
//! K_j(x) = Σ_a (−1)^a C(j,a) C(n−j, x−a) / C(n, x)
//! ```
//!
//! With this normalization `K_j(k)` is the character sum of a uniform
//! `k`-subset against a level-`j` character, i.e. the non-lazy part of the
//! hypercube walk's eigenvalues.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use crate::numerics::{binom_row, choose, int_rational, rational, ExactRational};
use crate::{Error, Result};

/// Dimension, degree and evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct KrawParams {
    pub n: usize,
    pub j: usize,
    pub x: usize,
}

impl KrawParams {
    pub fn new(n: usize, j: usize, x: usize) -> Result<Self> {
        if j > n || x > n {
            return Err(Error::Domain(format!(
                "Krawtchouk K_{j}({x}) with n={n}: need 0 <= j, x <= n"
            )));
        }
        Ok(KrawParams { n, j, x })
    }
}

/// Unnormalized character sum `Σ_a (−1)^a C(j,a) C(n−j, x−a)`.
pub fn kraw_sum(n: usize, j: usize, x: usize) -> BigInt {
    let rj = binom_row(j);
    let rc = binom_row(n - j);
    let mut acc = BigInt::zero();
    for a in x.saturating_sub(n - j)..=j.min(x) {
        let term = BigInt::from(&rj[a] * &rc[x - a]);
        if a % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Direct-sum evaluation.
pub fn kraw_eval(p: KrawParams) -> Result<ExactRational> {
    let p = KrawParams::new(p.n, p.j, p.x)?;
    Ok(rational(kraw_sum(p.n, p.j, p.x), BigInt::from(choose(p.n, p.x))))
}

/// Three-term recurrence in the degree:
/// `(n−j) K_{j+1}(x) = (n − 2x) K_j(x) − j K_{j−1}(x)`,
/// seeded with `K_0 = 1`, `K_1 = 1 − 2x/n`.
pub fn kraw_recurrence_eval(n: usize, j: usize, x: usize) -> Result<ExactRational> {
    KrawParams::new(n, j, x)?;
    Ok(kraw_recurrence_all(n, x).swap_remove(j))
}

/// All degrees `0..=n` at the point `x` by the recurrence.
pub fn kraw_recurrence_all(n: usize, x: usize) -> Vec<ExactRational> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(int_rational(1));
    if n == 0 {
        return out;
    }
    out.push(rational(n as i64 - 2 * x as i64, n as i64));
    let center = int_rational(n as i64 - 2 * x as i64);
    for j in 1..n {
        let next = (&center * &out[j] - int_rational(j as i64) * &out[j - 1]) / int_rational((n - j) as i64);
        out.push(next);
    }
    out
}

/// Closed form of `K_j(n/2)`: zero for odd `j`, `(−1)^i C(n/2,i)/C(n,2i)`
/// for `j = 2i`.
pub fn kraw_half(n: usize, j: usize) -> Result<ExactRational> {
    if n % 2 == 1 {
        return Err(Error::Domain(format!("kraw_half needs even n, got {n}")));
    }
    if j > n {
        return Err(Error::Domain(format!("degree {j} exceeds n={n}")));
    }
    if j % 2 == 1 {
        return Ok(ExactRational::zero());
    }
    let i = j / 2;
    let mag = rational(BigInt::from(choose(n / 2, i)), BigInt::from(choose(n, j)));
    Ok(if i.is_multiple_of(2) { mag } else { -mag })
}

/// Checks `C(y,i)·C(n−y,n/2−i) = C(y,y−i)·C(n−y,n/2−y+i)` exactly.
pub fn kraw_symmetry_holds(n: usize, y: usize, i: i64) -> Result<bool> {
    if n % 2 == 1 || y > n {
        return Err(Error::Domain(format!(
            "symmetry needs even n and y <= n (n={n}, y={y})"
        )));
    }
    let (n_, y_) = (n as i64, y as i64);
    if i < y_ - n_ / 2 || 2 * i > y_ {
        return Err(Error::Domain(format!(
            "symmetry index i={i} outside [y - n/2, y/2] for n={n}, y={y}"
        )));
    }
    use crate::numerics::binom;
    let lhs = binom(y, i) * binom(n - y, n_ / 2 - i);
    let rhs = binom(y, y_ - i) * binom(n - y, n_ / 2 - y_ + i);
    Ok(lhs == rhs)
}
