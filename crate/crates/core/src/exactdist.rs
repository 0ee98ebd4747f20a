//! Exact laws of both walks started at the origin.
//!
//! The hypercube walk is lumped to the Hamming weight of the current
//! configuration: the step measure is invariant under coordinate
//! permutations, so the law at time `l` is uniform on each weight class and
//! the weight process is itself a Markov chain on `0..=n`. The cyclic walk
//! is lumped to the number of coordinates touched so far.
//!
//! Exact distributions are stored as integer numerators over one common
//! (unreduced) denominator so that repeated kernel products never pay for
//! gcd reductions.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::krawtchouk::kraw_sum;
use crate::numerics::{
    biguint_to_bigint, binom_row, choose, hypergeom_row_exact, hypergeom_row_f64, log_binom, rational_pow,
    rational_to_f64, uint_rational, Backend, CompensatedSum, ExactRational, Value,
};
use crate::spectrum::{cube_eigenvalues, CyclicWalkSpec, WalkSpec};
use crate::{Error, Result};

/// Largest dimension accepted by the full-state oracles.
pub const BRUTE_FORCE_MAX_N: usize = 14;

/// Which lumped process a kernel describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Flip,
    Touched,
    Coupling,
}

#[derive(Clone, Debug)]
enum Entries {
    /// Sparse rows of integer weights over a common denominator.
    Exact {
        denom: BigUint,
        rows: Vec<Vec<(usize, BigUint)>>,
    },
    Float {
        rows: Vec<Vec<(usize, f64)>>,
    },
}

/// Row-stochastic `(n+1) × (n+1)` matrix on a lumped state space.
#[derive(Clone, Debug)]
pub struct WeightKernel {
    pub n: usize,
    pub kind: KernelKind,
    entries: Entries,
}

impl WeightKernel {
    /// Builds an exact kernel from integer rows; `denom` divides every row sum.
    pub fn from_integer_rows(
        n: usize,
        kind: KernelKind,
        denom: BigUint,
        rows: Vec<Vec<(usize, BigUint)>>,
    ) -> Result<Self> {
        if rows.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: rows.len(),
            });
        }
        let rows = rows.into_iter().map(merge_sparse).collect::<Vec<_>>();
        for (i, row) in rows.iter().enumerate() {
            let sum: BigUint = row.iter().map(|(_, w)| w).sum();
            if sum != denom {
                return Err(Error::Precondition(format!("kernel row {i} does not sum to one")));
            }
            if let Some((j, _)) = row.iter().find(|(j, _)| *j > n) {
                return Err(Error::DimensionMismatch {
                    expected: n + 1,
                    got: j + 1,
                });
            }
        }
        Ok(WeightKernel {
            n,
            kind,
            entries: Entries::Exact { denom, rows },
        })
    }

    /// Builds a float kernel; rows are renormalized to sum to one.
    pub fn from_float_rows(n: usize, kind: KernelKind, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: rows.len(),
            });
        }
        let rows = rows
            .into_iter()
            .map(|row| {
                let mut row = merge_sparse_f64(row);
                let total = row.iter().map(|(_, w)| *w).collect::<CompensatedSum>().value();
                for (_, w) in &mut row {
                    *w /= total;
                }
                row
            })
            .collect();
        Ok(WeightKernel {
            n,
            kind,
            entries: Entries::Float { rows },
        })
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.entries, Entries::Exact { .. })
    }

    pub fn entry(&self, i: usize, j: usize) -> Value {
        match &self.entries {
            Entries::Exact { denom, rows } => {
                let w = rows[i].iter().find(|(c, _)| *c == j).map(|(_, w)| w.clone());
                Value::Exact(uint_rational(w.unwrap_or_default(), denom.clone()))
            }
            Entries::Float { rows } => {
                Value::Float(rows[i].iter().find(|(c, _)| *c == j).map_or(0.0, |(_, w)| *w))
            }
        }
    }

    /// Nonzero entries of row `i` as `(column, probability)`.
    pub fn row(&self, i: usize) -> Vec<(usize, Value)> {
        match &self.entries {
            Entries::Exact { denom, rows } => rows[i]
                .iter()
                .map(|(j, w)| (*j, Value::Exact(uint_rational(w.clone(), denom.clone()))))
                .collect(),
            Entries::Float { rows } => rows[i].iter().map(|(j, w)| (*j, Value::Float(*w))).collect(),
        }
    }

    /// Float copy of this kernel.
    pub fn to_float(&self) -> WeightKernel {
        match &self.entries {
            Entries::Float { .. } => self.clone(),
            Entries::Exact { denom, rows } => {
                let rows = rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|(j, w)| (*j, rational_to_f64(&uint_rational(w.clone(), denom.clone()))))
                            .collect()
                    })
                    .collect();
                WeightKernel {
                    n: self.n,
                    kind: self.kind,
                    entries: Entries::Float { rows },
                }
            }
        }
    }

    /// One step of `dist · kernel`.
    fn apply(&self, dist: &WeightDistribution) -> WeightDistribution {
        match (&self.entries, &dist.repr) {
            (Entries::Exact { denom: kd, rows }, DistRepr::Exact { num, denom }) => {
                let mut out = vec![BigUint::zero(); self.n + 1];
                for (i, row) in rows.iter().enumerate() {
                    if num[i].is_zero() {
                        continue;
                    }
                    for (j, w) in row {
                        out[*j] += &num[i] * w;
                    }
                }
                WeightDistribution {
                    repr: DistRepr::Exact {
                        num: out,
                        denom: denom * kd,
                    },
                }
            }
            (Entries::Float { rows }, DistRepr::Float(p)) => {
                let mut acc = vec![CompensatedSum::new(); self.n + 1];
                for (i, row) in rows.iter().enumerate() {
                    if p[i] == 0.0 {
                        continue;
                    }
                    for (j, w) in row {
                        acc[*j].add(p[i] * w);
                    }
                }
                WeightDistribution::from_f64s(acc.iter().map(|a| a.value()).collect())
            }
            (Entries::Exact { .. }, DistRepr::Float(_)) => self.to_float().apply(dist),
            (Entries::Float { .. }, DistRepr::Exact { .. }) => self.apply(&dist.to_float()),
        }
    }
}

fn merge_sparse(mut row: Vec<(usize, BigUint)>) -> Vec<(usize, BigUint)> {
    row.sort_by_key(|(j, _)| *j);
    let mut out: Vec<(usize, BigUint)> = Vec::with_capacity(row.len());
    for (j, w) in row {
        if w.is_zero() {
            continue;
        }
        match out.last_mut() {
            Some((lj, lw)) if *lj == j => *lw += w,
            _ => out.push((j, w)),
        }
    }
    out
}

fn merge_sparse_f64(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|(j, _)| *j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, w) in row {
        if w == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some((lj, lw)) if *lj == j => *lw += w,
            _ => out.push((j, w)),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
enum DistRepr {
    Exact { num: Vec<BigUint>, denom: BigUint },
    Float(Vec<f64>),
}

/// Probability vector over a lumped state space `0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightDistribution {
    repr: DistRepr,
}

impl WeightDistribution {
    pub fn point_mass(n: usize, at: usize, backend: Backend) -> Self {
        assert!(at <= n, "point mass outside 0..=n");
        match backend.resolve(n) {
            Backend::Exact => {
                let mut num = vec![BigUint::zero(); n + 1];
                num[at] = BigUint::one();
                WeightDistribution {
                    repr: DistRepr::Exact {
                        num,
                        denom: BigUint::one(),
                    },
                }
            }
            _ => {
                let mut p = vec![0.0; n + 1];
                p[at] = 1.0;
                Self::from_f64s(p)
            }
        }
    }

    /// Weight law of a uniform configuration: `Binomial(n, 1/2)`.
    pub fn binomial(n: usize, backend: Backend) -> Self {
        match backend.resolve(n) {
            Backend::Exact => WeightDistribution {
                repr: DistRepr::Exact {
                    num: binom_row(n).to_vec(),
                    denom: BigUint::one() << n,
                },
            },
            _ => Self::from_f64s(binomial_f64(n)),
        }
    }

    pub fn from_rationals(probs: &[ExactRational]) -> Result<Self> {
        if probs.iter().any(|p| p.is_negative()) {
            return Err(Error::Domain("negative probability".into()));
        }
        let denom = probs.iter().fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let num: Vec<BigUint> = probs
            .iter()
            .map(|p| {
                (p.numer() * (&denom / p.denom()))
                    .to_biguint()
                    .expect("nonnegative")
            })
            .collect();
        let denom = denom.to_biguint().expect("positive");
        let total: BigUint = num.iter().sum();
        if total != denom {
            return Err(Error::Domain("probabilities do not sum to one".into()));
        }
        Ok(WeightDistribution {
            repr: DistRepr::Exact { num, denom },
        })
    }

    pub fn from_f64s(probs: Vec<f64>) -> Self {
        WeightDistribution {
            repr: DistRepr::Float(probs),
        }
    }

    pub fn len(&self) -> usize {
        match &self.repr {
            DistRepr::Exact { num, .. } => num.len(),
            DistRepr::Float(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest state index, i.e. `len() − 1`.
    pub fn n(&self) -> usize {
        self.len() - 1
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, DistRepr::Exact { .. })
    }

    pub fn prob(&self, w: usize) -> Value {
        match &self.repr {
            DistRepr::Exact { num, denom } => Value::Exact(uint_rational(num[w].clone(), denom.clone())),
            DistRepr::Float(p) => Value::Float(p[w]),
        }
    }

    pub fn to_rationals(&self) -> Option<Vec<ExactRational>> {
        match &self.repr {
            DistRepr::Exact { num, denom } => Some(
                num.iter()
                    .map(|x| uint_rational(x.clone(), denom.clone()))
                    .collect(),
            ),
            DistRepr::Float(_) => None,
        }
    }

    pub fn probs_f64(&self) -> Vec<f64> {
        match &self.repr {
            DistRepr::Exact { num, denom } => num
                .iter()
                .map(|x| rational_to_f64(&uint_rational(x.clone(), denom.clone())))
                .collect(),
            DistRepr::Float(p) => p.clone(),
        }
    }

    pub fn to_float(&self) -> WeightDistribution {
        Self::from_f64s(self.probs_f64())
    }

    /// Exact expectation of `f(w)`, or float when the law is float.
    pub fn expect(&self, f: impl Fn(usize) -> ExactRational) -> Value {
        match &self.repr {
            DistRepr::Exact { num, denom } => {
                let mut total = ExactRational::zero();
                for (w, x) in num.iter().enumerate() {
                    if !x.is_zero() {
                        total += f(w) * uint_rational(x.clone(), BigUint::one());
                    }
                }
                Value::Exact(total / uint_rational(denom.clone(), BigUint::one()))
            }
            DistRepr::Float(p) => Value::Float(
                p.iter()
                    .enumerate()
                    .map(|(w, x)| x * rational_to_f64(&f(w)))
                    .collect::<CompensatedSum>()
                    .value(),
            ),
        }
    }

    /// Sum of probabilities, exactly one for exact laws.
    pub fn total(&self) -> Value {
        match &self.repr {
            DistRepr::Exact { num, denom } => Value::Exact(uint_rational(num.iter().sum(), denom.clone())),
            DistRepr::Float(p) => Value::Float(p.iter().copied().collect::<CompensatedSum>().value()),
        }
    }
}

fn binomial_f64(n: usize) -> Vec<f64> {
    let ln2n = n as f64 * std::f64::consts::LN_2;
    (0..=n)
        .map(|w| (log_binom(n, w as i64).expect("in range").log_value - ln2n).exp())
        .collect()
}

/// Lumped kernel of the lazy k-flip walk on Hamming weight.
pub fn flip_weight_kernel(spec: &WalkSpec, backend: Backend) -> WeightKernel {
    let (n, k) = (spec.n, spec.k);
    match backend.resolve(n) {
        Backend::Exact => {
            let p = spec.laziness();
            let (pa, pb) = (
                p.numer().to_biguint().expect("laziness >= 0"),
                p.denom().to_biguint().expect("positive"),
            );
            let c = choose(n, k);
            let stay = &pa * &c;
            let move_w = &pb - &pa;
            let rows = (0..=n)
                .map(|w| {
                    let (lo, weights) = hypergeom_row_exact(n, w, k).expect("valid spec");
                    let mut row = vec![(w, stay.clone())];
                    for (off, x) in weights.into_iter().enumerate() {
                        let a = lo + off;
                        row.push((w + k - 2 * a, &move_w * x));
                    }
                    row
                })
                .collect();
            WeightKernel::from_integer_rows(n, KernelKind::Flip, &pb * &c, rows)
                .expect("flip kernel rows are stochastic")
        }
        _ => {
            let p = spec.laziness_f64();
            let rows = (0..=n)
                .map(|w| {
                    let (lo, weights) = hypergeom_row_f64(n, w, k).expect("valid spec");
                    let mut row = vec![(w, p)];
                    for (off, x) in weights.into_iter().enumerate() {
                        row.push((w + k - 2 * (lo + off), (1.0 - p) * x));
                    }
                    row
                })
                .collect();
            WeightKernel::from_float_rows(n, KernelKind::Flip, rows).expect("square")
        }
    }
}

/// `dist · kernel^l` by repeated vector–matrix products.
pub fn evolve(dist: &WeightDistribution, kernel: &WeightKernel, l: u64) -> Result<WeightDistribution> {
    let mut it = Evolution::new(dist.clone(), kernel)?;
    for _ in 0..l {
        it.advance();
    }
    Ok(it.current)
}

/// Iterator over `dist, dist·K, dist·K², …`.
pub struct Evolution<'a> {
    kernel: &'a WeightKernel,
    current: WeightDistribution,
    started: bool,
}

impl<'a> Evolution<'a> {
    pub fn new(dist: WeightDistribution, kernel: &'a WeightKernel) -> Result<Self> {
        if dist.len() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: dist.len(),
            });
        }
        Ok(Evolution {
            kernel,
            current: dist,
            started: false,
        })
    }

    fn advance(&mut self) {
        self.current = self.kernel.apply(&self.current);
    }

    pub fn current(&self) -> &WeightDistribution {
        &self.current
    }
}

impl Iterator for Evolution<'_> {
    type Item = WeightDistribution;

    fn next(&mut self) -> Option<WeightDistribution> {
        if self.started {
            self.advance();
        }
        self.started = true;
        Some(self.current.clone())
    }
}

/// Total variation between the lifted configuration law and uniform on
/// `2^n` states: `½ Σ_w |dist(w) − C(n,w)/2^n|`.
pub fn tv_to_uniform(n: usize, dist: &WeightDistribution) -> Value {
    assert_eq!(dist.len(), n + 1, "distribution length must be n + 1");
    match &dist.repr {
        DistRepr::Exact { num, denom } => {
            let row = binom_row(n);
            let denom_i = biguint_to_bigint(denom.clone());
            let mut total = BigInt::zero();
            for (w, x) in num.iter().enumerate() {
                let d = (biguint_to_bigint(x.clone()) << n) - biguint_to_bigint(row[w].clone()) * &denom_i;
                total += d.abs();
            }
            Value::Exact(ExactRational::new(total, denom_i << (n + 1)))
        }
        DistRepr::Float(p) => {
            let u = binomial_f64(n);
            Value::Float(
                0.5 * p
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a - b).abs())
                    .collect::<CompensatedSum>()
                    .value(),
            )
        }
    }
}

/// `|G|·Σ_x (P(x) − |G|^{-1})² = Σ_w dist(w)²·2^n/C(n,w) − 1`.
pub fn l2_to_uniform(n: usize, dist: &WeightDistribution) -> Value {
    assert_eq!(dist.len(), n + 1, "distribution length must be n + 1");
    match &dist.repr {
        DistRepr::Exact { num, denom } => {
            let row = binom_row(n);
            let lcm = row.iter().fold(BigUint::one(), |acc, c| acc.lcm(c));
            let mut total = BigUint::zero();
            for (w, x) in num.iter().enumerate() {
                if !x.is_zero() {
                    total += x * x * (&lcm / &row[w]);
                }
            }
            let value = uint_rational(total << n, lcm * denom * denom);
            Value::Exact(value - ExactRational::one())
        }
        DistRepr::Float(p) => {
            let ln2n = n as f64 * std::f64::consts::LN_2;
            let mut acc = CompensatedSum::new();
            for (w, x) in p.iter().enumerate() {
                if *x > 0.0 {
                    let lnc = log_binom(n, w as i64).expect("in range").log_value;
                    acc.add((2.0 * x.ln() + ln2n - lnc).exp());
                }
            }
            acc.add(-1.0);
            Value::Float(acc.value())
        }
    }
}

/// Exact law on all `2^n` configurations, as numerators over a common
/// denominator. Index bit `i` is coordinate `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullDistribution {
    pub n: usize,
    num: Vec<BigUint>,
    denom: BigUint,
}

impl FullDistribution {
    pub fn prob(&self, x: usize) -> ExactRational {
        uint_rational(self.num[x].clone(), self.denom.clone())
    }

    pub fn weight_marginal(&self) -> WeightDistribution {
        let mut num = vec![BigUint::zero(); self.n + 1];
        for (x, v) in self.num.iter().enumerate() {
            num[x.count_ones() as usize] += v;
        }
        WeightDistribution {
            repr: DistRepr::Exact {
                num,
                denom: self.denom.clone(),
            },
        }
    }

    /// `½ Σ_x |P(x) − 2^{-n}|` by direct enumeration.
    pub fn tv_to_uniform(&self) -> ExactRational {
        let denom = biguint_to_bigint(self.denom.clone());
        let mut total = BigInt::zero();
        for v in &self.num {
            total += ((biguint_to_bigint(v.clone()) << self.n) - &denom).abs();
        }
        ExactRational::new(total, denom << (self.n + 1))
    }
}

/// Direct convolution of the step measure over all `2^n` states.
pub struct BruteForceWalk {
    n: usize,
    masks: Vec<usize>,
    stay: BigUint,
    move_w: BigUint,
    scale: BigUint,
    current: FullDistribution,
}

impl BruteForceWalk {
    pub fn new(spec: &WalkSpec) -> Result<Self> {
        let (n, k) = (spec.n, spec.k);
        if n > BRUTE_FORCE_MAX_N {
            return Err(Error::Size(format!(
                "brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}"
            )));
        }
        let masks: Vec<usize> = (0usize..1 << n)
            .filter(|x| x.count_ones() as usize == k)
            .collect();
        let p = spec.laziness();
        let pa = p.numer().to_biguint().expect("laziness >= 0");
        let pb = p.denom().to_biguint().expect("positive");
        let c = BigUint::from(masks.len());
        let mut num = vec![BigUint::zero(); 1 << n];
        num[0] = BigUint::one();
        Ok(BruteForceWalk {
            n,
            stay: &pa * &c,
            move_w: &pb - &pa,
            scale: &pb * &c,
            masks,
            current: FullDistribution {
                n,
                num,
                denom: BigUint::one(),
            },
        })
    }

    pub fn current(&self) -> &FullDistribution {
        &self.current
    }

    pub fn step(&mut self) {
        let cur = &self.current.num;
        let next: Vec<BigUint> = (0..1usize << self.n)
            .map(|x| {
                let mut moved = BigUint::zero();
                for s in &self.masks {
                    moved += &cur[x ^ s];
                }
                &self.stay * &cur[x] + &self.move_w * moved
            })
            .collect();
        self.current = FullDistribution {
            n: self.n,
            num: next,
            denom: &self.current.denom * &self.scale,
        };
    }
}

pub fn brute_force_dist(spec: &WalkSpec, l: u64) -> Result<FullDistribution> {
    let mut walk = BruteForceWalk::new(spec)?;
    for _ in 0..l {
        walk.step();
    }
    Ok(walk.current.clone())
}

/// Weight law at step `l` by Fourier inversion over the characters:
/// `dist(w) = C(n,w)·2^{-n}·Σ_j eig_j^l · Σ_b (−1)^b C(w,b) C(n−w,j−b)`.
///
/// The float path suffers cancellation of order `2^n·ε` and is meant for
/// moderate `n` only.
pub fn spectral_dist(spec: &WalkSpec, l: u64, backend: Backend) -> Result<WeightDistribution> {
    let n = spec.n;
    let eig = cube_eigenvalues(spec);
    let row = binom_row(n);
    match backend.resolve(n) {
        Backend::Exact => {
            let powers: Vec<ExactRational> = eig.iter().map(|e| rational_pow(e, l)).collect();
            let scale = uint_rational(BigUint::one(), BigUint::one() << n);
            let probs: Vec<ExactRational> = (0..=n)
                .map(|w| {
                    let mut s = ExactRational::zero();
                    for (j, pw) in powers.iter().enumerate() {
                        if !pw.is_zero() {
                            s += pw * ExactRational::from_integer(kraw_sum(n, w, j));
                        }
                    }
                    s * &scale * ExactRational::from_integer(biguint_to_bigint(row[w].clone()))
                })
                .collect();
            WeightDistribution::from_rationals(&probs)
        }
        _ => {
            let powers: Vec<f64> = eig.iter().map(|e| rational_to_f64(e).powi(l as i32)).collect();
            let probs = (0..=n)
                .map(|w| {
                    let s = powers
                        .iter()
                        .enumerate()
                        .map(|(j, pw)| pw * kraw_sum(n, w, j).to_f64().unwrap_or(f64::NAN))
                        .collect::<CompensatedSum>()
                        .value();
                    s * (log_binom(n, w as i64).expect("in range").log_value
                        - n as f64 * std::f64::consts::LN_2)
                        .exp()
                })
                .collect();
            Ok(WeightDistribution::from_f64s(probs))
        }
    }
}

/// Chain on the number of touched coordinates of the `(Z/mZ)^n` walk.
pub fn touched_weight_kernel(spec: &CyclicWalkSpec, backend: Backend) -> WeightKernel {
    let (n, k) = (spec.n, spec.k);
    // New touches j out of k drawn: C(n−w, j)·C(w, k−j)/C(n, k), i.e. the
    // hypergeometric law with n − w marked coordinates.
    match backend.resolve(n) {
        Backend::Exact => {
            let rows = (0..=n)
                .map(|w| {
                    let (lo, weights) = hypergeom_row_exact(n, n - w, k).expect("valid spec");
                    weights
                        .into_iter()
                        .enumerate()
                        .map(|(off, x)| (w + lo + off, x))
                        .collect()
                })
                .collect();
            WeightKernel::from_integer_rows(n, KernelKind::Touched, choose(n, k), rows)
                .expect("touched kernel rows are stochastic")
        }
        _ => {
            let rows = (0..=n)
                .map(|w| {
                    let (lo, weights) = hypergeom_row_f64(n, n - w, k).expect("valid spec");
                    weights
                        .into_iter()
                        .enumerate()
                        .map(|(off, x)| (w + lo + off, x))
                        .collect()
                })
                .collect();
            WeightKernel::from_float_rows(n, KernelKind::Touched, rows).expect("square")
        }
    }
}

/// Law of the touched-coordinate count after `l` steps.
pub fn touched_distribution(spec: &CyclicWalkSpec, l: u64, backend: Backend) -> WeightDistribution {
    let start = WeightDistribution::point_mass(spec.n, 0, backend);
    let kernel = touched_weight_kernel(spec, backend);
    evolve(&start, &kernel, l).expect("dimensions agree")
}

/// Exact TV to uniform on `(Z/mZ)^n` given the touched-count law.
///
/// After the walk has touched a set `T`, coordinates in `T` are iid uniform
/// and the rest are zero. A state with support size `s` therefore has mass
/// `Σ_{w ≥ s} q_w · C(n−s, w−s)/C(n, w) · m^{−w}`.
pub fn zmn_tv_from_touched(spec: &CyclicWalkSpec, touched: &WeightDistribution) -> Value {
    let (n, m) = (spec.n, spec.m);
    match &touched.repr {
        DistRepr::Exact { num, denom } => {
            let mb = BigUint::from(m);
            // Work with m^n·P_s to stay integral up to the C(n,w) ratios.
            let row = binom_row(n);
            let mut total = ExactRational::zero();
            let uniform = uint_rational(BigUint::one(), mb.pow(n as u32));
            for s in 0..=n {
                let mut p = ExactRational::zero();
                for w in s..=n {
                    if num[w].is_zero() {
                        continue;
                    }
                    p += uint_rational(&num[w] * choose(n - s, w - s), denom * &row[w] * mb.pow(w as u32));
                }
                let classes = &row[s] * BigUint::from(m - 1).pow(s as u32);
                total += (p - &uniform).abs() * uint_rational(classes, BigUint::one());
            }
            Value::Exact(total / ExactRational::from_integer(2.into()))
        }
        DistRepr::Float(q) => {
            let ln_m = (m as f64).ln();
            let ln_m1 = ((m - 1) as f64).ln();
            let lnc = |a: usize, b: usize| log_binom(a, b as i64).expect("in range").log_value;
            let mut total = CompensatedSum::new();
            for s in 0..=n {
                // m^n·P_s − 1, assembled so that the w = n term cancels exactly.
                let mut acc = CompensatedSum::new();
                for (w, &qw) in q.iter().enumerate().take(n).skip(s) {
                    if qw > 0.0 {
                        acc.add(qw * (lnc(n - s, w - s) - lnc(n, w) + (n - w) as f64 * ln_m).exp());
                    }
                }
                acc.add(-(1.0 - q[n]));
                let diff = acc.value().abs();
                if diff > 0.0 {
                    total.add((lnc(n, s) + s as f64 * ln_m1 - n as f64 * ln_m + diff.ln()).exp());
                }
            }
            Value::Float(0.5 * total.value())
        }
    }
}

pub fn zmn_exact_tv(spec: &CyclicWalkSpec, l: u64, backend: Backend) -> Value {
    zmn_tv_from_touched(spec, &touched_distribution(spec, l, backend))
}

/// `P(T_touch > l)`: probability that some coordinate is still untouched.
pub fn separation_tail(spec: &CyclicWalkSpec, l: u64, backend: Backend) -> Value {
    tail_from_touched(spec, &touched_distribution(spec, l, backend))
}

pub fn tail_from_touched(spec: &CyclicWalkSpec, touched: &WeightDistribution) -> Value {
    match touched.prob(spec.n) {
        Value::Exact(q) => Value::Exact(ExactRational::one() - q),
        Value::Float(q) => {
            let rest = touched.probs_f64()[..spec.n]
                .iter()
                .copied()
                .collect::<CompensatedSum>();
            Value::Float(rest.value().min(1.0 - q).max(0.0))
        }
    }
}
