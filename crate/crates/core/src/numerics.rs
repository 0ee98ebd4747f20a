//! Exact and log-space combinatorial kernels shared by the rest of the crate.
//!
//! Two numeric backends coexist: big rationals, used for every certificate
//! and by default for `n` up to [`DEFAULT_EXACT_THRESHOLD`], and plain
//! `f64` (optionally carried in log space) for larger dimensions.

use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::{Error, Result};

/// Exact rational number, always kept in lowest terms with a positive
/// denominator (the `num-rational` normal form).
pub type ExactRational = BigRational;

/// Dimension up to which `Backend::Auto` picks exact arithmetic.
pub const DEFAULT_EXACT_THRESHOLD: usize = 400;

/// Rows of Pascal's triangle above this are computed on demand, not cached.
const ROW_CACHE_MAX: usize = 2048;

/// Below this many factors `log_binom` sums `ln((n-k+i)/i)` directly instead
/// of differencing log-factorials.
const LOG_BINOM_DIRECT_MAX: usize = 64;

/// Numeric backend selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
    Auto,
}

impl Backend {
    /// Resolves `Auto` against the default threshold.
    pub fn resolve(self, n: usize) -> Backend {
        self.resolve_with(n, DEFAULT_EXACT_THRESHOLD)
    }

    pub fn resolve_with(self, n: usize, threshold: usize) -> Backend {
        match self {
            Backend::Auto if n <= threshold => Backend::Exact,
            Backend::Auto => Backend::Float,
            b => b,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Backend::Exact)
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "float" => Ok(Backend::Float),
            "auto" => Ok(Backend::Auto),
            other => Err(Error::Domain(format!("unknown backend '{other}'"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Float => "float",
            Backend::Auto => "auto",
        })
    }
}

/// A quantity computed by either backend.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(ExactRational),
    Float(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => rational_to_f64(r),
            Value::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&ExactRational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Float(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => f.write_str(&fmt_rational(r)),
            Value::Float(x) => f.write_str(&fmt_float(*x)),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Exact(r) => s.serialize_str(&fmt_rational(r)),
            Value::Float(x) => s.serialize_f64(*x),
        }
    }
}

/// Renders a rational as `num/den` (denominator always present).
pub fn fmt_rational(r: &ExactRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Renders a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Serde helper for `ExactRational` fields.
pub fn serialize_rational<S: Serializer>(r: &ExactRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(r))
}

pub fn serialize_opt_rational<S: Serializer>(
    r: &Option<ExactRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&fmt_rational(r)),
        None => s.serialize_none(),
    }
}

pub fn rational_to_f64(r: &ExactRational) -> f64 {
    if let Some(x) = r.to_f64() {
        if x.is_finite() && (x != 0.0 || r.is_zero()) {
            return x;
        }
    }
    // Fall back to mantissa/exponent splitting for out-of-range parts.
    let (nm, ne) = big_to_scaled_f64(r.numer().magnitude());
    let (dm, de) = big_to_scaled_f64(r.denom().magnitude());
    let v = (nm / dm) * 2f64.powi((ne - de).clamp(-2000, 2000) as i32);
    if r.is_negative() {
        -v
    } else {
        v
    }
}

/// Splits `x` into `(m, e)` with `x ≈ m · 2^e` and `m` exact in its top
/// 64 bits.
pub fn big_to_scaled_f64(x: &BigUint) -> (f64, i64) {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap_or(0) as f64, 0);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64, shift as i64)
}

/// Natural log of a positive big integer, accurate to a few ulps.
pub fn ln_big(x: &BigUint) -> f64 {
    let (m, e) = big_to_scaled_f64(x);
    m.ln() + e as f64 * std::f64::consts::LN_2
}

pub fn rational(num: impl Into<BigInt>, den: impl Into<BigInt>) -> ExactRational {
    BigRational::new(num.into(), den.into())
}

pub fn int_rational(x: impl Into<BigInt>) -> ExactRational {
    BigRational::from_integer(x.into())
}

pub fn uint_rational(num: BigUint, den: BigUint) -> ExactRational {
    BigRational::new(
        BigInt::from_biguint(BigSign::Plus, num),
        BigInt::from_biguint(BigSign::Plus, den),
    )
}

type RowCache = RwLock<Vec<Option<Arc<Vec<BigUint>>>>>;

fn row_cache() -> &'static RowCache {
    static ROWS: OnceLock<RowCache> = OnceLock::new();
    ROWS.get_or_init(|| RwLock::new(Vec::new()))
}

fn compute_row(n: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for k in 0..n / 2 {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    for k in n / 2 + 1..=n {
        let mirrored = row[n - k].clone();
        row.push(mirrored);
    }
    row
}

/// Row `n` of Pascal's triangle, memoized for moderate `n`.
pub fn binom_row(n: usize) -> Arc<Vec<BigUint>> {
    if n > ROW_CACHE_MAX {
        return Arc::new(compute_row(n));
    }
    if let Some(Some(row)) = row_cache().read().expect("binomial cache poisoned").get(n) {
        return Arc::clone(row);
    }
    let row = Arc::new(compute_row(n));
    let mut cache = row_cache().write().expect("binomial cache poisoned");
    if cache.len() <= n {
        cache.resize(n + 1, None);
    }
    Arc::clone(cache[n].get_or_insert(row))
}

/// `C(n, k)`, zero when `k < 0` or `k > n`.
pub fn binom(n: usize, k: i64) -> BigUint {
    if k < 0 || k as u64 > n as u64 {
        return BigUint::zero();
    }
    choose(n, k as usize)
}

/// `C(n, k)` for unsigned `k`, zero when `k > n`.
pub fn choose(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    if n > ROW_CACHE_MAX {
        let k = k.min(n - k);
        let mut c = BigUint::one();
        for i in 0..k {
            c = c * (n - i) / (i + 1);
        }
        return c;
    }
    binom_row(n)[k].clone()
}

/// Sign of a [`LogProb`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

/// A real number stored as sign and natural log of its magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogProb {
    pub log_value: f64,
    pub sign: Sign,
}

impl LogProb {
    pub const ZERO: LogProb = LogProb {
        log_value: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };
    pub const ONE: LogProb = LogProb {
        log_value: 0.0,
        sign: Sign::Positive,
    };

    pub fn from_ln(log_value: f64) -> Self {
        LogProb {
            log_value,
            sign: Sign::Positive,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogProb {
                log_value: x.abs().ln(),
                sign: if x > 0.0 { Sign::Positive } else { Sign::Negative },
            }
        }
    }

    pub fn from_rational(r: &ExactRational) -> Self {
        if r.is_zero() {
            return Self::ZERO;
        }
        let log_value = ln_big(r.numer().magnitude()) - ln_big(r.denom().magnitude());
        // Near 1 the difference of logs cancels; the direct ratio is exact to an ulp.
        let direct = rational_to_f64(&r.abs());
        let log_value = if direct.is_normal() {
            direct.ln()
        } else {
            log_value
        };
        LogProb {
            log_value,
            sign: if r.is_positive() {
                Sign::Positive
            } else {
                Sign::Negative
            },
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            Sign::Positive => self.log_value.exp(),
            Sign::Negative => -self.log_value.exp(),
        }
    }

    /// Exact rational image of the represented `f64` value.
    pub fn to_rational(self) -> ExactRational {
        BigRational::from_float(self.to_f64()).unwrap_or_else(BigRational::zero)
    }

    pub fn checked_div(self, other: LogProb) -> Result<LogProb> {
        if other.sign == Sign::Zero {
            return Err(Error::Domain("division by zero LogProb".into()));
        }
        Ok(self
            * LogProb {
                log_value: -other.log_value,
                sign: other.sign,
            })
    }

    pub fn powi(self, e: u64) -> LogProb {
        if e == 0 {
            return Self::ONE;
        }
        let sign = match self.sign {
            Sign::Zero => return Self::ZERO,
            Sign::Negative if e % 2 == 1 => Sign::Negative,
            _ => Sign::Positive,
        };
        LogProb {
            log_value: self.log_value * e as f64,
            sign,
        }
    }
}

impl std::ops::Mul for LogProb {
    type Output = LogProb;

    fn mul(self, other: LogProb) -> LogProb {
        let sign = match (self.sign, other.sign) {
            (Sign::Zero, _) | (_, Sign::Zero) => return Self::ZERO,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        };
        LogProb {
            log_value: self.log_value + other.log_value,
            sign,
        }
    }
}

fn ln_factorial_table(n: usize) -> f64 {
    static TABLE: OnceLock<RwLock<Vec<f64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| RwLock::new(vec![0.0, 0.0]));
    if let Some(v) = table.read().expect("ln-factorial table poisoned").get(n) {
        return *v;
    }
    let mut t = table.write().expect("ln-factorial table poisoned");
    // Recompute the running compensated sum from scratch for the new tail;
    // the stored prefix is rounded so the compensation term is rebuilt.
    let mut acc = CompensatedSum::new();
    for i in 2..=n.max(t.len() - 1) {
        acc.add((i as f64).ln());
        if i >= t.len() {
            t.push(acc.value());
        }
    }
    t[n]
}

/// Natural log of `C(n, k)`.
pub fn log_binom(n: usize, k: i64) -> Result<LogProb> {
    if k < 0 || k as u64 > n as u64 {
        return Err(Error::Domain(format!("log_binom({n}, {k}): need 0 <= k <= n")));
    }
    let k = k as usize;
    let m = k.min(n - k);
    if m <= LOG_BINOM_DIRECT_MAX {
        let mut acc = CompensatedSum::new();
        for i in 1..=m {
            acc.add(((n - m + i) as f64 / i as f64).ln());
        }
        return Ok(LogProb::from_ln(acc.value()));
    }
    Ok(LogProb::from_ln(
        ln_factorial_table(n) - ln_factorial_table(k) - ln_factorial_table(n - k),
    ))
}

fn check_hypergeom(n: usize, y: usize, k: usize) -> Result<()> {
    if y > n || k == 0 || k > n {
        return Err(Error::Domain(format!(
            "hypergeometric(n={n}, y={y}, k={k}): need 0 <= y <= n and 1 <= k <= n"
        )));
    }
    Ok(())
}

/// Probability that a uniform `k`-subset of `n` coordinates contains
/// exactly `i` of `y` marked ones.
pub fn hypergeom_pmf(n: usize, y: usize, k: usize, i: i64) -> Result<ExactRational> {
    check_hypergeom(n, y, k)?;
    let num = binom(y, i) * binom(n - y, k as i64 - i);
    Ok(uint_rational(num, choose(n, k)))
}

/// Support bounds `[lo, hi]` of the hypergeometric law.
pub fn hypergeom_support(n: usize, y: usize, k: usize) -> (usize, usize) {
    ((k + y).saturating_sub(n), y.min(k))
}

/// Integer numerators `C(y,i)·C(n−y,k−i)` for `i` over the support; the
/// common denominator is `C(n,k)`. Returns `(lo, numerators)`.
pub fn hypergeom_row_exact(n: usize, y: usize, k: usize) -> Result<(usize, Vec<BigUint>)> {
    check_hypergeom(n, y, k)?;
    let (lo, hi) = hypergeom_support(n, y, k);
    let ry = binom_row(y);
    let rc = binom_row(n - y);
    Ok((lo, (lo..=hi).map(|i| &ry[i] * &rc[k - i]).collect()))
}

/// Floating hypergeometric row over its support, anchored at the mode and
/// filled by the ratio recurrence, then normalized to sum to one.
pub fn hypergeom_row_f64(n: usize, y: usize, k: usize) -> Result<(usize, Vec<f64>)> {
    check_hypergeom(n, y, k)?;
    let (lo, hi) = hypergeom_support(n, y, k);
    let mode = (((y + 1) * (k + 1)) / (n + 2)).clamp(lo, hi);
    let mut w = vec![0.0; hi - lo + 1];
    w[mode - lo] = 1.0;
    // f(i+1)/f(i) = (y-i)(k-i) / ((i+1)(n-y-k+i+1))
    for i in mode..hi {
        let r = ((y - i) as f64 * (k - i) as f64) / ((i + 1) as f64 * (n + i + 1 - y - k) as f64);
        w[i + 1 - lo] = w[i - lo] * r;
    }
    for i in (lo..mode).rev() {
        let r = ((i + 1) as f64 * (n + i + 1 - y - k) as f64) / ((y - i) as f64 * (k - i) as f64);
        w[i - lo] = w[i + 1 - lo] * r;
    }
    let total = w.iter().copied().collect::<CompensatedSum>().value();
    for v in &mut w {
        *v /= total;
    }
    Ok((lo, w))
}

/// `ln n! − ((n + ½)ln n − n + ln √(2π))`.
fn stirling_error(n: usize) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nf = n as f64;
    if n <= 15 {
        let ln_fact = (2..=n)
            .map(|i| (i as f64).ln())
            .collect::<CompensatedSum>()
            .value();
        if n == 0 {
            return 0.0;
        }
        return ln_fact - ((nf + 0.5) * nf.ln() - nf + 0.5 * (2.0 * std::f64::consts::PI).ln());
    }
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance `x·ln(x/np) + np − x`, accurate when `x ≈ np`.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln(C(n,x) p^x q^(n−x))` in saddle-point form.
fn ln_binomial_pmf(x: usize, n: usize, p: f64, q: f64) -> f64 {
    let (xf, nf) = (x as f64, n as f64);
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 {
            -deviance(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if x == n {
        return if q < 0.1 {
            -deviance(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let lc = stirling_error(n)
        - stirling_error(x)
        - stirling_error(n - x)
        - deviance(xf, nf * p)
        - deviance(nf - xf, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

/// Log-space hypergeometric probability, written as a ratio of three
/// binomial laws at `p = k/n` so that no large log-factorials cancel.
pub fn log_hypergeom_pmf(n: usize, y: usize, k: usize, i: i64) -> Result<LogProb> {
    check_hypergeom(n, y, k)?;
    let (lo, hi) = hypergeom_support(n, y, k);
    if i < lo as i64 || i > hi as i64 {
        return Ok(LogProb::ZERO);
    }
    let i = i as usize;
    let p = k as f64 / n as f64;
    let q = (n - k) as f64 / n as f64;
    let value =
        ln_binomial_pmf(i, y, p, q) + ln_binomial_pmf(k - i, n - y, p, q) - ln_binomial_pmf(k, n, p, q);
    Ok(LogProb::from_ln(value))
}

/// Neumaier-compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `base^e` for rationals.
pub fn rational_pow(base: &ExactRational, e: u64) -> ExactRational {
    num_traits::pow::pow(base.clone(), e as usize)
}

pub fn biguint_to_bigint(x: BigUint) -> BigInt {
    BigInt::from_biguint(BigSign::Plus, x)
}
