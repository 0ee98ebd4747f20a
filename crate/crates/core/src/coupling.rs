//! Mismatch-pairing coupling of two lazy k-flip walks.
//!
//! While the number `y` of mismatched coordinates is odd both chains take
//! independent lazy steps. Once it is even they move together: with
//! probability ½ both hold, otherwise a uniform `k`-set `S` is flipped in
//! the first chain and a set of the same size, built from `S` by pairing
//! each chosen mismatch with an unchosen one, is flipped in the second.
//!
//! Randomness is consumed in a fixed order so that runs are reproducible
//! and small cases can be enumerated atom by atom: per lazy step one fair
//! bit (`true` = move) and, only if moving, one uniform `k`-subset. An
//! even-`y` step makes one such draw; an odd-`y` step makes two, first for
//! the chain started at the origin, then for the other.
//!
//! Per-trial generators are `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `trial`, so trials are independent of scheduling.

use std::collections::BTreeMap;

use bitvec::prelude::*;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exactdist::{evolve, KernelKind, WeightDistribution, WeightKernel};
use crate::numerics::{
    choose, fmt_rational, hypergeom_row_exact, hypergeom_row_f64, rational, rational_to_f64, uint_rational,
    Backend, ExactRational, Value,
};
use crate::spectrum::WalkSpec;
use crate::{Error, Result};

/// Above this `n`, `Backend::Auto` solves for the expected coupling time in
/// floating point; the exact solve is a dense rational elimination.
pub const EXACT_SOLVE_THRESHOLD: usize = 60;

fn check_spec(spec: &WalkSpec) -> Result<()> {
    if spec.k.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "the coupling needs odd k (got k={}): with k even every move changes each weight by an \
             even amount, so y keeps its parity and odd y never reaches 0; the walk itself is then \
             not irreducible on the cube",
            spec.k
        )));
    }
    if 2 * spec.k > spec.n {
        return Err(Error::Precondition(format!(
            "the coupling needs k <= n/2 (n={}, k={}); the k and n-k walks mix alike",
            spec.n, spec.k
        )));
    }
    if *spec.laziness() != rational(1, 2) {
        return Err(Error::Precondition(
            "the coupling is defined for laziness 1/2".into(),
        ));
    }
    Ok(())
}

/// Pair of configurations driven by the coupling.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoupledState {
    pub x1: BitVec<u64, Lsb0>,
    pub x2: BitVec<u64, Lsb0>,
    y: usize,
}

impl CoupledState {
    pub fn new(x1: BitVec<u64, Lsb0>, x2: BitVec<u64, Lsb0>) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch {
                expected: x1.len(),
                got: x2.len(),
            });
        }
        let y = x1.iter().zip(x2.iter()).filter(|(a, b)| **a != **b).count();
        Ok(CoupledState { x1, x2, y })
    }

    /// Builds a state from the low `n` bits of two integers.
    pub fn from_masks(n: usize, x1: u64, x2: u64) -> Result<Self> {
        if n > 64 {
            return Err(Error::Size(format!(
                "mask states hold at most 64 bits, got n={n}"
            )));
        }
        let bits = |x: u64| (0..n).map(|i| x >> i & 1 == 1).collect::<BitVec<u64, Lsb0>>();
        Self::new(bits(x1), bits(x2))
    }

    pub fn n(&self) -> usize {
        self.x1.len()
    }

    /// Hamming distance between the two configurations.
    pub fn y(&self) -> usize {
        self.y
    }

    pub fn coalesced(&self) -> bool {
        self.y == 0
    }

    pub fn mismatches(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.x1[i] != self.x2[i]).collect()
    }

    fn mask(bits: &BitSlice<u64, Lsb0>) -> u64 {
        bits.iter_ones().fold(0, |acc, i| acc | 1 << i)
    }

    /// `(x1, x2)` as integers; only meaningful for `n ≤ 64`.
    pub fn masks(&self) -> (u64, u64) {
        (Self::mask(&self.x1), Self::mask(&self.x2))
    }
}

/// One lazy step's randomness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LazyDraw {
    pub moves: bool,
    /// Sorted coordinates to flip; ignored when `moves` is false.
    pub subset: Vec<usize>,
}

impl LazyDraw {
    pub fn hold() -> Self {
        LazyDraw {
            moves: false,
            subset: Vec::new(),
        }
    }

    pub fn flip(mut subset: Vec<usize>) -> Self {
        subset.sort_unstable();
        LazyDraw { moves: true, subset }
    }

    fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Self {
        if rng.random::<bool>() {
            LazyDraw::flip(sample(rng, n, k).into_vec())
        } else {
            LazyDraw::hold()
        }
    }

    fn check(&self, n: usize, k: usize) -> Result<()> {
        if !self.moves {
            return Ok(());
        }
        let ok = self.subset.len() == k
            && self.subset.windows(2).all(|w| w[0] < w[1])
            && self.subset.last().is_none_or(|&i| i < n);
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "flip set {:?} is not a {k}-subset of 0..{n}",
                self.subset
            )))
        }
    }
}

/// Randomness for one coupled step; the variant must match the parity of `y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepDraws {
    Even(LazyDraw),
    Odd(LazyDraw, LazyDraw),
}

/// Maps each chosen mismatched coordinate to the first mismatched
/// coordinate at or after it (cyclically upward) that is neither chosen nor
/// already assigned. Chosen mismatches are processed in increasing order.
pub fn partner_assignment(chosen: &[usize], mismatches: &[usize]) -> Result<BTreeMap<usize, usize>> {
    let mut mism = mismatches.to_vec();
    mism.sort_unstable();
    mism.dedup();
    let mut picked: Vec<usize> = chosen
        .iter()
        .copied()
        .filter(|c| mism.binary_search(c).is_ok())
        .collect();
    picked.sort_unstable();
    picked.dedup();
    if 2 * picked.len() > mism.len() {
        return Err(Error::Precondition(format!(
            "{} chosen mismatches but only {} mismatches in total",
            picked.len(),
            mism.len()
        )));
    }
    let mut taken: Vec<bool> = mism.iter().map(|m| picked.binary_search(m).is_ok()).collect();
    let mut out = BTreeMap::new();
    for &c in &picked {
        let start = mism.binary_search(&c).expect("chosen mismatch is a mismatch");
        let len = mism.len();
        let slot = (1..len)
            .map(|d| (start + d) % len)
            .find(|&s| !taken[s])
            .expect("enough unchosen mismatches");
        taken[slot] = true;
        out.insert(c, mism[slot]);
    }
    Ok(out)
}

/// Coordinates flipped in the second chain when the first flips `subset`
/// on an even-`y` step.
pub fn second_chain_flips(subset: &[usize], mismatches: &[usize]) -> Vec<usize> {
    let y = mismatches.len();
    let is_mismatch = |i: &usize| mismatches.binary_search(i).is_ok();
    let a = subset.iter().filter(|i| is_mismatch(i)).count();
    if 2 * a > y {
        return subset.to_vec();
    }
    let partners = partner_assignment(subset, mismatches).expect("a <= y/2");
    let mut out: Vec<usize> = subset.iter().copied().filter(|i| !is_mismatch(i)).collect();
    out.extend(partners.values());
    out.sort_unstable();
    out
}

fn flip(x: &mut BitVec<u64, Lsb0>, subset: &[usize]) {
    for &i in subset {
        let v = x[i];
        x.set(i, !v);
    }
}

/// Applies one coupled step with explicit randomness.
pub fn coupled_step_with(spec: &WalkSpec, state: &CoupledState, draws: &StepDraws) -> Result<CoupledState> {
    check_spec(spec)?;
    let (n, k) = (spec.n, spec.k);
    if state.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state.n(),
        });
    }
    let mut next = state.clone();
    match (state.y % 2, draws) {
        (0, StepDraws::Even(d)) => {
            d.check(n, k)?;
            if d.moves {
                let second = second_chain_flips(&d.subset, &state.mismatches());
                flip(&mut next.x1, &d.subset);
                flip(&mut next.x2, &second);
            }
        }
        (1, StepDraws::Odd(d1, d2)) => {
            d1.check(n, k)?;
            d2.check(n, k)?;
            if d1.moves {
                flip(&mut next.x1, &d1.subset);
            }
            if d2.moves {
                flip(&mut next.x2, &d2.subset);
            }
        }
        _ => {
            return Err(Error::Precondition(format!(
                "draws do not match the parity of y={}",
                state.y
            )))
        }
    }
    Ok(CoupledState::new(next.x1, next.x2).expect("same length"))
}

/// Applies one coupled step drawing randomness from `rng`.
pub fn coupled_step<R: Rng + ?Sized>(
    spec: &WalkSpec,
    state: &CoupledState,
    rng: &mut R,
) -> Result<CoupledState> {
    let (n, k) = (spec.n, spec.k);
    let draws = if state.y.is_multiple_of(2) {
        StepDraws::Even(LazyDraw::sample(rng, n, k))
    } else {
        let d1 = LazyDraw::sample(rng, n, k);
        StepDraws::Odd(d1, LazyDraw::sample(rng, n, k))
    };
    coupled_step_with(spec, state, &draws)
}

/// A pair of configurations at which two flip sets produce the same move in
/// the second chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginalViolation {
    pub x1: u64,
    pub x2: u64,
    pub first_set: Vec<usize>,
    pub second_set: Vec<usize>,
    pub image: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginalReport {
    pub n: usize,
    pub k: usize,
    pub pairs_checked: u64,
    pub atoms_checked: u64,
    pub violation_count: u64,
    pub violations: Vec<MarginalViolation>,
    pub holds: bool,
}

/// Largest `n` accepted by [`marginal_check`].
pub const MARGINAL_CHECK_MAX_N: usize = 8;
const WITNESS_CAP: usize = 20;

/// Exhaustive validity check of the even-`y` step.
///
/// For every pair with even `y` and every randomness atom, the first chain
/// must move by the drawn set and the sets flipped in the second chain must
/// run over all `k`-subsets exactly once, so that each marginal is `P`.
pub fn marginal_check(n: usize, k: usize) -> Result<MarginalReport> {
    if n > MARGINAL_CHECK_MAX_N {
        return Err(Error::Size(format!(
            "marginal check limited to n <= {MARGINAL_CHECK_MAX_N}, got {n}"
        )));
    }
    let spec = WalkSpec::new(n, k)?;
    check_spec(&spec)?;
    let subsets: Vec<Vec<usize>> = (0u64..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..n).filter(|i| s >> i & 1 == 1).collect())
        .collect();
    let to_mask = |s: &[usize]| s.iter().fold(0u64, |acc, i| acc | 1 << i);
    let mut report = MarginalReport {
        n,
        k,
        pairs_checked: 0,
        atoms_checked: 0,
        violation_count: 0,
        violations: Vec::new(),
        holds: true,
    };
    for x1 in 0u64..1 << n {
        for x2 in 0u64..1 << n {
            if (x1 ^ x2).count_ones() % 2 == 1 {
                continue;
            }
            let state = CoupledState::from_masks(n, x1, x2)?;
            report.pairs_checked += 1;
            let held = coupled_step_with(&spec, &state, &StepDraws::Even(LazyDraw::hold()))?;
            report.atoms_checked += 1;
            if held != state {
                report.violation_count += 1;
                report.holds = false;
            }
            let mut seen: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for s in &subsets {
                let next = coupled_step_with(&spec, &state, &StepDraws::Even(LazyDraw::flip(s.clone())))?;
                report.atoms_checked += 1;
                let (n1, n2) = next.masks();
                let image = n2 ^ x2;
                let bad_first = n1 ^ x1 != to_mask(s);
                let bad_size = image.count_ones() as usize != k;
                let image_set: Vec<usize> = (0..n).filter(|i| image >> i & 1 == 1).collect();
                let collision = seen.insert(image, s.clone());
                if bad_first || bad_size || collision.is_some() {
                    report.violation_count += 1;
                    report.holds = false;
                    if report.violations.len() < WITNESS_CAP {
                        report.violations.push(MarginalViolation {
                            x1,
                            x2,
                            first_set: collision.unwrap_or_default(),
                            second_set: s.clone(),
                            image: image_set,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    MonteCarlo,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub l: u64,
    /// `P(T > l)`; absent when no trials were run.
    pub p: Option<Value>,
    /// Trials with `T > l` (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceed: Option<u64>,
    /// Binomial standard error `√(p(1−p)/trials)` (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingTailReport {
    pub method: TailMethod,
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub seed: Option<u64>,
    pub max_steps: u64,
    pub tail: Vec<TailPoint>,
    /// Mean coupling time; absent if any trial failed to couple in time.
    pub expected_time: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_time_std_error: Option<f64>,
    /// Trials still uncoupled at `max_steps`.
    pub censored: u64,
}

/// Coupling time of one trial, or `None` if still apart after `max_steps`.
pub fn coupling_time_trial(spec: &WalkSpec, max_steps: u64, seed: u64, trial: u64) -> Result<Option<u64>> {
    check_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let x2: BitVec<u64, Lsb0> = (0..spec.n).map(|_| rng.random::<bool>()).collect();
    let mut state = CoupledState::new(bitvec![u64, Lsb0; 0; spec.n], x2)?;
    let mut t = 0;
    while !state.coalesced() {
        if t == max_steps {
            return Ok(None);
        }
        state = coupled_step(spec, &state, &mut rng)?;
        t += 1;
    }
    Ok(Some(t))
}

/// Monte Carlo estimate of the coupling-time tail, first chain at the
/// origin and second uniform.
pub fn simulate_coupling(
    spec: &WalkSpec,
    trials: u64,
    max_steps: u64,
    seed: u64,
) -> Result<CouplingTailReport> {
    check_spec(spec)?;
    let run = |t: u64| coupling_time_trial(spec, max_steps, seed, t).expect("spec checked");
    #[cfg(feature = "parallel")]
    let times: Vec<Option<u64>> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let times: Vec<Option<u64>> = (0..trials).map(run).collect();

    let mut hist = vec![0u64; max_steps as usize + 1];
    let mut censored = 0u64;
    let (mut sum, mut sum_sq) = (0u128, 0u128);
    for t in &times {
        match t {
            Some(t) => {
                hist[*t as usize] += 1;
                sum += *t as u128;
                sum_sq += (*t as u128) * (*t as u128);
            }
            None => censored += 1,
        }
    }
    let mut exceed = trials;
    let mut tail = Vec::with_capacity(hist.len());
    for (l, h) in hist.iter().enumerate() {
        exceed -= h;
        let (p, se) = if trials == 0 {
            (None, None)
        } else {
            let p = exceed as f64 / trials as f64;
            (
                Some(Value::Float(p)),
                Some((p * (1.0 - p) / trials as f64).sqrt()),
            )
        };
        tail.push(TailPoint {
            l: l as u64,
            p,
            exceed: Some(exceed),
            std_error: se,
        });
    }
    let (expected_time, expected_time_std_error) = if trials == 0 || censored > 0 {
        (None, None)
    } else {
        let mean = sum as f64 / trials as f64;
        let var = (sum_sq as f64 / trials as f64 - mean * mean).max(0.0);
        (Some(Value::Float(mean)), Some((var / trials as f64).sqrt()))
    };
    Ok(CouplingTailReport {
        method: TailMethod::MonteCarlo,
        n: spec.n,
        k: spec.k,
        trials,
        seed: Some(seed),
        max_steps,
        tail,
        expected_time,
        expected_time_std_error,
        censored,
    })
}

/// Lumped chain of the mismatch count `y`, absorbing at 0.
pub fn coupling_weight_kernel(spec: &WalkSpec, backend: Backend) -> Result<WeightKernel> {
    check_spec(spec)?;
    let (n, k) = (spec.n, spec.k);
    if backend.resolve(n).is_exact() {
        let c = choose(n, k);
        let c2 = &c * &c;
        let rows_of = |y: usize| hypergeom_row_exact(n, y, k).expect("valid");
        let mut rows = Vec::with_capacity(n + 1);
        for y in 0..=n {
            let mut row: Vec<(usize, BigUint)> = Vec::new();
            if y == 0 {
                row.push((0, BigUint::from(4u8) * &c2));
            } else if y % 2 == 0 {
                row.push((y, BigUint::from(2u8) * &c2));
                let (lo, w) = rows_of(y);
                for (off, x) in w.into_iter().enumerate() {
                    let a = lo + off;
                    let to = if 2 * a > y { y } else { y - 2 * a };
                    row.push((to, BigUint::from(2u8) * &c * x));
                }
            } else {
                row.push((y, c2.clone()));
                let (lo, w) = rows_of(y);
                for (off, x) in w.into_iter().enumerate() {
                    let mid = y + k - 2 * (lo + off);
                    row.push((mid, BigUint::from(2u8) * &c * &x));
                    let (lo2, w2) = rows_of(mid);
                    for (off2, x2) in w2.into_iter().enumerate() {
                        row.push((mid + k - 2 * (lo2 + off2), &x * x2));
                    }
                }
            }
            rows.push(row);
        }
        WeightKernel::from_integer_rows(n, KernelKind::Coupling, BigUint::from(4u8) * c2, rows)
    } else {
        let rows_of = |y: usize| hypergeom_row_f64(n, y, k).expect("valid");
        let mut rows = Vec::with_capacity(n + 1);
        for y in 0..=n {
            let mut row: Vec<(usize, f64)> = Vec::new();
            if y == 0 {
                row.push((0, 1.0));
            } else if y % 2 == 0 {
                row.push((y, 0.5));
                let (lo, w) = rows_of(y);
                for (off, x) in w.into_iter().enumerate() {
                    let a = lo + off;
                    row.push((if 2 * a > y { y } else { y - 2 * a }, 0.5 * x));
                }
            } else {
                row.push((y, 0.25));
                let (lo, w) = rows_of(y);
                for (off, x) in w.into_iter().enumerate() {
                    let mid = y + k - 2 * (lo + off);
                    row.push((mid, 0.5 * x));
                    let (lo2, w2) = rows_of(mid);
                    for (off2, x2) in w2.into_iter().enumerate() {
                        row.push((mid + k - 2 * (lo2 + off2), 0.25 * x * x2));
                    }
                }
            }
            rows.push(row);
        }
        WeightKernel::from_float_rows(n, KernelKind::Coupling, rows)
    }
}

fn tail_of(dist: &WeightDistribution) -> Value {
    match dist.prob(0) {
        Value::Exact(p0) => Value::Exact(ExactRational::one() - p0),
        Value::Float(_) => {
            let probs = dist.probs_f64();
            Value::Float(probs[1..].iter().sum::<f64>().clamp(0.0, 1.0))
        }
    }
}

/// `P(T > l)` for `l = 0..=l_max` from the lumped chain, `y_0 ~ Binomial(n, ½)`.
pub fn coupling_tail_curve(spec: &WalkSpec, l_max: u64, backend: Backend) -> Result<Vec<Value>> {
    let kernel = coupling_weight_kernel(spec, backend)?;
    let start = WeightDistribution::binomial(
        spec.n,
        if kernel.is_exact() {
            Backend::Exact
        } else {
            Backend::Float
        },
    );
    let it = crate::exactdist::Evolution::new(start, &kernel)?;
    Ok(it.take(l_max as usize + 1).map(|d| tail_of(&d)).collect())
}

pub fn coupling_tail_exact(spec: &WalkSpec, l: u64, backend: Backend) -> Result<Value> {
    let kernel = coupling_weight_kernel(spec, backend)?;
    let start = WeightDistribution::binomial(
        spec.n,
        if kernel.is_exact() {
            Backend::Exact
        } else {
            Backend::Float
        },
    );
    Ok(tail_of(&evolve(&start, &kernel, l)?))
}

/// Exact-oracle report in the same shape as the Monte Carlo one.
pub fn coupling_tail_report(spec: &WalkSpec, l_max: u64, backend: Backend) -> Result<CouplingTailReport> {
    let curve = coupling_tail_curve(spec, l_max, backend)?;
    let solve_backend = match backend {
        Backend::Auto => backend.resolve_with(spec.n, EXACT_SOLVE_THRESHOLD),
        b => b,
    };
    Ok(CouplingTailReport {
        method: TailMethod::Exact,
        n: spec.n,
        k: spec.k,
        trials: 0,
        seed: None,
        max_steps: l_max,
        tail: curve
            .into_iter()
            .enumerate()
            .map(|(l, p)| TailPoint {
                l: l as u64,
                p: Some(p),
                exceed: None,
                std_error: None,
            })
            .collect(),
        expected_time: Some(expected_coupling_time(spec, solve_backend)?),
        expected_time_std_error: None,
        censored: 0,
    })
}

/// `E[T]` with `y_0 ~ Binomial(n, ½)`, solving `(I − Q)t = 1` on the
/// transient states `1..=n`.
pub fn expected_coupling_time(spec: &WalkSpec, backend: Backend) -> Result<Value> {
    let n = spec.n;
    let backend = backend.resolve_with(n, EXACT_SOLVE_THRESHOLD);
    let kernel = coupling_weight_kernel(spec, backend)?;
    let start = WeightDistribution::binomial(n, backend);
    if backend.is_exact() {
        let mut a = vec![vec![ExactRational::zero(); n + 1]; n];
        for y in 1..=n {
            a[y - 1][y - 1] = ExactRational::one();
            for (to, v) in kernel.row(y) {
                if to > 0 {
                    a[y - 1][to - 1] -= v.exact().expect("exact kernel");
                }
            }
            a[y - 1][n] = ExactRational::one();
        }
        let t = solve_exact(a)?;
        let mut total = ExactRational::zero();
        for y in 1..=n {
            total += start.prob(y).exact().expect("exact law") * &t[y - 1];
        }
        Ok(Value::Exact(total))
    } else {
        let mut a = vec![vec![0.0; n + 1]; n];
        for y in 1..=n {
            a[y - 1][y - 1] = 1.0;
            for (to, v) in kernel.row(y) {
                if to > 0 {
                    a[y - 1][to - 1] -= v.to_f64();
                }
            }
            a[y - 1][n] = 1.0;
        }
        let t = solve_f64(a)?;
        let probs = start.probs_f64();
        Ok(Value::Float((1..=n).map(|y| probs[y] * t[y - 1]).sum()))
    }
}

fn solve_exact(mut a: Vec<Vec<ExactRational>>) -> Result<Vec<ExactRational>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Precondition("coupling chain is not absorbing".into()))?;
        a.swap(col, piv);
        let inv = ExactRational::one() / &a[col][col];
        for v in a[col][col..].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[m].clone()).collect())
}

fn solve_f64(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .filter(|&r| a[r][col] != 0.0)
            .ok_or_else(|| Error::Precondition("coupling chain is not absorbing".into()))?;
        a.swap(col, piv);
        let pivot_row = a[col].clone();
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= f * p;
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][m] - s) / a[r][r];
    }
    Ok(x)
}

/// Whether stated probabilities include the ½ chance of holding (as in the
/// per-step law of the coupling) or condition on a move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProbConvention {
    #[default]
    Lazy,
    Move,
}

/// Claimed lower bound in a lemma part.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Claim {
    Ratio(u64, u64),
    /// `(√2 − 1)/(4√2) = (2 − √2)/8`.
    RootTwo,
    /// `yk/(8n)`.
    Linear,
}

impl Claim {
    fn holds(self, s: &BigUint, d: &BigUint, n: usize, k: usize, y: usize) -> bool {
        match self {
            Claim::Ratio(p, q) => s * q >= d * p,
            Claim::RootTwo => {
                let lhs = BigUint::from(8u8) * s;
                let two_d = BigUint::from(2u8) * d;
                if lhs >= two_d {
                    return true;
                }
                let gap = two_d - lhs;
                BigUint::from(2u8) * d * d >= &gap * &gap
            }
            Claim::Linear => BigUint::from(8 * n) * s >= BigUint::from(y * k) * d,
        }
    }

    fn value(self, n: usize, k: usize, y: usize) -> f64 {
        match self {
            Claim::Ratio(p, q) => p as f64 / q as f64,
            Claim::RootTwo => (2.0 - std::f64::consts::SQRT_2) / 8.0,
            Claim::Linear => (y * k) as f64 / (8 * n) as f64,
        }
    }

    fn render(self, n: usize, k: usize, y: usize) -> String {
        match self {
            Claim::Ratio(p, q) => fmt_rational(&rational(p, q)),
            Claim::RootTwo => "(sqrt2-1)/(4*sqrt2)".into(),
            Claim::Linear => fmt_rational(&rational((y * k) as u64, (8 * n) as u64)),
        }
    }
}

/// One evaluated instance of a lemma inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCase {
    pub part: u8,
    pub n: usize,
    pub k: usize,
    pub y: usize,
    /// Integer range `[lo, hi]` of `a`.
    pub range: (i64, i64),
    pub probability: String,
    pub claimed: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartSummary {
    pub part: u8,
    pub statement: String,
    pub checked: u64,
    pub counterexamples: u64,
    pub even_y_counterexamples: u64,
    /// Smallest `probability − claimed`, as a float for ordering.
    pub min_margin: Option<f64>,
    pub tightest: Option<LemmaCase>,
    /// First counterexamples in `(n, k, y)` order.
    pub witnesses: Vec<LemmaCase>,
}

impl PartSummary {
    fn new(part: u8, statement: &str) -> Self {
        PartSummary {
            part,
            statement: statement.into(),
            checked: 0,
            counterexamples: 0,
            even_y_counterexamples: 0,
            min_margin: None,
            tightest: None,
            witnesses: Vec::new(),
        }
    }

    fn record(&mut self, case: LemmaCase, margin: f64) {
        self.checked += 1;
        if !case.holds {
            self.counterexamples += 1;
            if case.y.is_multiple_of(2) {
                self.even_y_counterexamples += 1;
            }
            if self.witnesses.len() < WITNESS_CAP {
                self.witnesses.push(case.clone());
            }
        }
        if self.min_margin.is_none_or(|m| margin < m) {
            self.min_margin = Some(margin);
            self.tightest = Some(case);
        }
    }

    fn merge(&mut self, other: PartSummary) {
        self.checked += other.checked;
        self.counterexamples += other.counterexamples;
        self.even_y_counterexamples += other.even_y_counterexamples;
        for w in other.witnesses {
            if self.witnesses.len() < WITNESS_CAP {
                self.witnesses.push(w);
            }
        }
        if let Some(m) = other.min_margin {
            if self.min_margin.is_none_or(|cur| m < cur) {
                self.min_margin = Some(m);
                self.tightest = other.tightest;
            }
        }
    }
}

/// Where the hypergeometric pmf stops increasing, by two rules.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeThresholds {
    /// `(yk − n + y + k)/(n + 1)` as printed.
    pub stated: String,
    /// `(yk − n + y + k − 1)/(n + 2)`, from `f(i+1)/f(i) ≥ 1`.
    pub exact: String,
    pub checked: u64,
    /// Triples where the stated threshold misclassifies some step.
    pub stated_failures: u64,
    /// Triples where the exact threshold misclassifies some step (expected 0).
    pub exact_failures: u64,
    pub witnesses: Vec<ModeWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeWitness {
    pub n: usize,
    pub k: usize,
    pub y: usize,
    /// Step `i → i+1` that contradicts the stated threshold.
    pub i: usize,
    pub stated_threshold: String,
    pub exact_threshold: String,
    pub pmf_i: String,
    pub pmf_next: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub convention: ProbConvention,
    pub n_values: Vec<usize>,
    pub parts: Vec<PartSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_thresholds: Option<ModeThresholds>,
    pub notes: Vec<String>,
    /// Parts with at least one counterexample.
    pub failing_parts: Vec<u8>,
    pub holds: bool,
}

impl LemmaReport {
    fn assemble(
        lemma: &str,
        convention: ProbConvention,
        n_values: Vec<usize>,
        parts: Vec<PartSummary>,
        mode_thresholds: Option<ModeThresholds>,
        mut notes: Vec<String>,
    ) -> Self {
        let failing_parts: Vec<u8> = parts
            .iter()
            .filter(|p| p.counterexamples > 0)
            .map(|p| p.part)
            .collect();
        if !failing_parts.is_empty() && parts.iter().all(|p| p.even_y_counterexamples == 0) {
            notes.push("every counterexample has odd y".into());
        }
        LemmaReport {
            lemma: lemma.into(),
            convention,
            n_values,
            holds: failing_parts.is_empty(),
            parts,
            mode_thresholds,
            notes,
            failing_parts,
        }
    }

    /// Part 1 counts failures of the stated mode threshold.
    pub fn counterexamples(&self) -> u64 {
        self.parts.iter().map(|p| p.counterexamples).sum()
    }
}

fn range_sum(lo_support: usize, w: &[BigUint], lo: i64, hi: i64) -> BigUint {
    let hi_support = (lo_support + w.len()) as i64 - 1;
    let (a, b) = (lo.max(lo_support as i64), hi.min(hi_support));
    if a > b {
        return BigUint::zero();
    }
    w[(a as usize - lo_support)..=(b as usize - lo_support)]
        .iter()
        .sum()
}

fn ceil_div(a: usize, b: usize) -> i64 {
    a.div_ceil(b) as i64
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    part: u8,
    claim: Claim,
    (n, k, y): (usize, usize, usize),
    (lo, hi): (i64, i64),
    row: &(usize, Vec<BigUint>),
    denom: &BigUint,
    summary: &mut PartSummary,
) {
    let s = range_sum(row.0, &row.1, lo, hi);
    let holds = claim.holds(&s, denom, n, k, y);
    let p = uint_rational(s, denom.clone());
    let margin = rational_to_f64(&p) - claim.value(n, k, y);
    summary.record(
        LemmaCase {
            part,
            n,
            k,
            y,
            range: (lo, hi),
            probability: fmt_rational(&p),
            claimed: claim.render(n, k, y),
            holds,
        },
        margin,
    );
}

fn convention_denominator(n: usize, k: usize, convention: ProbConvention) -> BigUint {
    match convention {
        ProbConvention::Lazy => BigUint::from(2u8) * choose(n, k),
        ProbConvention::Move => choose(n, k),
    }
}

/// Exact check of the two-part inequality for `k = n/2`, `n ≡ 2 (mod 4)`:
/// part 1, `P(y − n/2 ≤ a ≤ y/2) ≥ 1/4` for `y ≥ n/2`; part 2,
/// `P(y/4 ≤ a ≤ y/2) ≥ 1/4` for `y ≤ n/2`.
pub fn verify_lemma_probineq(n_values: &[usize], convention: ProbConvention) -> Result<LemmaReport> {
    if let Some(n) = n_values.iter().find(|&&n| n % 4 != 2) {
        return Err(Error::Domain(format!("probineq needs n = 2 mod 4, got {n}")));
    }
    let mut p1 = PartSummary::new(1, "y >= n/2: P(y - n/2 <= a <= y/2) >= 1/4");
    let mut p2 = PartSummary::new(2, "y <= n/2: P(y/4 <= a <= y/2) >= 1/4");
    for &n in n_values {
        let k = n / 2;
        let denom = convention_denominator(n, k, convention);
        for y in 1..=n {
            let row = hypergeom_row_exact(n, y, k)?;
            let top = (y / 2) as i64;
            if 2 * y >= n {
                evaluate(
                    1,
                    Claim::Ratio(1, 4),
                    (n, k, y),
                    (y as i64 - k as i64, top),
                    &row,
                    &denom,
                    &mut p1,
                );
            }
            if 2 * y <= n {
                evaluate(
                    2,
                    Claim::Ratio(1, 4),
                    (n, k, y),
                    (ceil_div(y, 4), top),
                    &row,
                    &denom,
                    &mut p2,
                );
            }
        }
    }
    Ok(LemmaReport::assemble(
        "probineq",
        convention,
        n_values.to_vec(),
        vec![p1, p2],
        None,
        vec!["rows with y = 0 are skipped".into()],
    ))
}

/// `⌊ln 2 · 10^30⌋` and its successor bracket `ln 2`.
const LN2_LO: u128 = 693_147_180_559_945_309_417_232_121_458;
const LN2_HI: u128 = LN2_LO + 1;
const LN2_SCALE: u128 = 1_000_000_000_000_000_000_000_000_000_000;

/// Whether `yk/n ≥ ln(2)/2`, decided exactly.
fn at_least_half_ln2(y: usize, k: usize, n: usize) -> bool {
    let lhs = 2 * (y * k) as u128 * LN2_SCALE;
    if lhs >= LN2_HI * n as u128 {
        true
    } else if lhs <= LN2_LO * n as u128 {
        false
    } else {
        unreachable!("yk/n within 1e-30 of ln(2)/2 for n < 2^64")
    }
}

pub const GENERAL_PARTS: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

const GENERAL_STATEMENTS: [&str; 9] = [
    "P(a = i) increases for i <= (yk - n + y + k)/(n + 1) and decreases after",
    "y >= k, yk/n >= 2: P(yk/(2n) <= a <= min(y/2, k)) >= 1/8",
    "y >= k, 1 <= yk/n < 2: P(1 <= a <= min(y/2, k)) >= 1/6",
    "y >= k, ln2/2 <= yk/n < 1: P(1 <= a <= min(y/2, k)) >= (sqrt2-1)/(4*sqrt2)",
    "y >= k, yk/n < ln2/2: P(1 <= a <= min(y/2, k)) >= yk/(8n)",
    "y < k, yk/n >= 2: P(yk/(2n) <= a <= y/2) >= 1/8",
    "y < k, 1 <= yk/n < 2: P(1 <= a <= y/2) >= 1/6",
    "y < k, ln2/2 <= yk/n < 1: P(1 <= a <= y/2) >= (sqrt2-1)/(4*sqrt2)",
    "y < k, yk/n <= ln2/2: P(1 <= a <= y/2) >= yk/(8n)",
];

struct GeneralAccumulator {
    parts: Vec<PartSummary>,
    mode: ModeThresholds,
}

fn general_for_n(n: usize, parts: &[u8], convention: ProbConvention) -> GeneralAccumulator {
    let mut acc = GeneralAccumulator {
        parts: parts
            .iter()
            .map(|&p| PartSummary::new(p, GENERAL_STATEMENTS[p as usize - 1]))
            .collect(),
        mode: ModeThresholds {
            stated: "(yk - n + y + k)/(n + 1)".into(),
            exact: "(yk - n + y + k - 1)/(n + 2)".into(),
            checked: 0,
            stated_failures: 0,
            exact_failures: 0,
            witnesses: Vec::new(),
        },
    };
    let want = |p: u8| parts.iter().position(|&q| q == p);
    for k in 1..=n / 2 {
        let denom = convention_denominator(n, k, convention);
        let c = choose(n, k);
        for y in 1..=n {
            let row = hypergeom_row_exact(n, y, k).expect("valid");
            if want(1).is_some() {
                mode_check(n, k, y, &row, &c, &mut acc.mode);
            }
            let (nk, yk) = (n, y * k);
            let half_y = (y / 2) as i64;
            let top = if y >= k { half_y.min(k as i64) } else { half_y };
            let region = if yk >= 2 * nk {
                0
            } else if yk >= nk {
                1
            } else if at_least_half_ln2(y, k, n) {
                2
            } else {
                3
            };
            let part = if y >= k { 2 + region } else { 6 + region } as u8;
            let Some(slot) = want(part) else { continue };
            let (lo, claim) = match region {
                0 => (ceil_div(yk, 2 * n), Claim::Ratio(1, 8)),
                1 => (1, Claim::Ratio(1, 6)),
                2 => (1, Claim::RootTwo),
                _ => (1, Claim::Linear),
            };
            evaluate(
                part,
                claim,
                (n, k, y),
                (lo, top),
                &row,
                &denom,
                &mut acc.parts[slot],
            );
        }
    }
    acc
}

fn mode_check(
    n: usize,
    k: usize,
    y: usize,
    row: &(usize, Vec<BigUint>),
    c: &BigUint,
    mode: &mut ModeThresholds,
) {
    mode.checked += 1;
    let (lo, w) = row;
    let stated_num = (y * k + y + k) as i64 - n as i64;
    let exact_num = stated_num - 1;
    let mut stated_bad = None;
    let mut exact_bad = false;
    for off in 0..w.len().saturating_sub(1) {
        let i = lo + off;
        let up = w[off + 1] >= w[off];
        let down = w[off + 1] <= w[off];
        // Stated rule: rising while i + 1 <= t, falling once i >= t.
        let rise_required = (i as i64 + 1) * (n as i64 + 1) <= stated_num;
        let fall_required = i as i64 * (n as i64 + 1) >= stated_num;
        if (rise_required && !up) || (fall_required && !down) {
            stated_bad.get_or_insert(i);
        }
        if up != (i as i64 * (n as i64 + 2) <= exact_num) {
            exact_bad = true;
        }
    }
    if exact_bad {
        mode.exact_failures += 1;
    }
    if let Some(i) = stated_bad {
        mode.stated_failures += 1;
        if mode.witnesses.len() < WITNESS_CAP {
            mode.witnesses.push(ModeWitness {
                n,
                k,
                y,
                i,
                stated_threshold: fmt_rational(&rational(stated_num, n as i64 + 1)),
                exact_threshold: fmt_rational(&rational(exact_num, n as i64 + 2)),
                pmf_i: fmt_rational(&uint_rational(w[i - lo].clone(), c.clone())),
                pmf_next: fmt_rational(&uint_rational(w[i + 1 - lo].clone(), c.clone())),
            });
        }
    }
}

/// Exact check of the nine-part lemma for all `n ≤ n_max`, `1 ≤ k ≤ n/2`,
/// `1 ≤ y ≤ n` in each part's hypothesis region.
pub fn verify_lemma_general(n_max: usize, parts: &[u8], convention: ProbConvention) -> Result<LemmaReport> {
    let mut parts = parts.to_vec();
    parts.sort_unstable();
    parts.dedup();
    if let Some(p) = parts.iter().find(|&&p| !(1..=9).contains(&p)) {
        return Err(Error::Domain(format!("lemma parts are 1..=9, got {p}")));
    }
    let ns: Vec<usize> = (2..=n_max).collect();
    let run = |&n: &usize| general_for_n(n, &parts, convention);
    #[cfg(feature = "parallel")]
    let per_n: Vec<GeneralAccumulator> = {
        use rayon::prelude::*;
        ns.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_n: Vec<GeneralAccumulator> = ns.iter().map(run).collect();

    let mut total = GeneralAccumulator {
        parts: parts
            .iter()
            .map(|&p| PartSummary::new(p, GENERAL_STATEMENTS[p as usize - 1]))
            .collect(),
        mode: ModeThresholds {
            stated: "(yk - n + y + k)/(n + 1)".into(),
            exact: "(yk - n + y + k - 1)/(n + 2)".into(),
            checked: 0,
            stated_failures: 0,
            exact_failures: 0,
            witnesses: Vec::new(),
        },
    };
    for acc in per_n {
        for (t, p) in total.parts.iter_mut().zip(acc.parts) {
            t.merge(p);
        }
        total.mode.checked += acc.mode.checked;
        total.mode.stated_failures += acc.mode.stated_failures;
        total.mode.exact_failures += acc.mode.exact_failures;
        for w in acc.mode.witnesses {
            if total.mode.witnesses.len() < WITNESS_CAP {
                total.mode.witnesses.push(w);
            }
        }
    }
    let has_part1 = parts.contains(&1);
    let mut summaries: Vec<PartSummary> = total.parts;
    if has_part1 {
        let p1 = summaries
            .iter_mut()
            .find(|p| p.part == 1)
            .expect("part 1 requested");
        p1.checked = total.mode.checked;
        p1.counterexamples = total.mode.stated_failures;
    }
    Ok(LemmaReport::assemble(
        "general",
        convention,
        ns,
        summaries,
        has_part1.then_some(total.mode),
        vec![
            "rows with y = 0 are skipped".into(),
            "when more than y/2 mismatches are drawn the second chain copies the first and y is unchanged"
                .into(),
        ],
    ))
}
