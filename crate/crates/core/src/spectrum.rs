//! Eigenvalue tables of the lazy k-flip walk on `(Z/2Z)^n` and of the
//! k-coordinate randomizing walk on `(Z/mZ)^n`, together with the
//! character-sum (l²) bounds built from them.
//!
//! Both walks are random walks on abelian groups, so their eigenvalues are
//! the Fourier coefficients of the step measure. On the hypercube the
//! coefficient at a character of weight `j` is `p + (1 − p)·K_j(k)`; on
//! `(Z/mZ)^n` a character with `w` nonzero coordinates has coefficient
//! `C(n−w, k)/C(n, k)`.

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::krawtchouk::kraw_recurrence_all;
use crate::numerics::{
    binom_row, choose, fmt_rational, int_rational, log_binom, rational, rational_pow, rational_to_f64,
    serialize_rational, uint_rational, Backend, CompensatedSum, ExactRational, Value,
};
use crate::{Error, Result};

/// Lazy k-flip walk: hold with probability `p`, otherwise flip a uniform
/// `k`-subset of the `n` coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WalkSpec {
    pub n: usize,
    pub k: usize,
    laziness: ExactRational,
}

impl WalkSpec {
    /// Walk with the default laziness `1/2`.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::Domain(format!("walk needs 1 <= k <= n (n={n}, k={k})")));
        }
        Ok(WalkSpec {
            n,
            k,
            laziness: rational(1, 2),
        })
    }

    pub fn with_laziness(mut self, p: ExactRational) -> Result<Self> {
        if p.is_negative() || p >= ExactRational::one() {
            return Err(Error::Domain(format!(
                "laziness {} outside [0, 1)",
                fmt_rational(&p)
            )));
        }
        self.laziness = p;
        Ok(self)
    }

    pub fn laziness(&self) -> &ExactRational {
        &self.laziness
    }

    pub fn laziness_f64(&self) -> f64 {
        rational_to_f64(&self.laziness)
    }

    /// True when every nontrivial eigenvalue has modulus below one.
    pub fn is_ergodic(&self) -> bool {
        cube_spectrum(self).ergodic
    }
}

/// Walk on `(Z/mZ)^n` that picks a uniform `k`-subset of coordinates and
/// adds an independent uniform element of `Z/mZ` to each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CyclicWalkSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

impl CyclicWalkSpec {
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n || m < 2 {
            return Err(Error::Domain(format!(
                "cyclic walk needs 1 <= k <= n and m >= 2 (n={n}, m={m}, k={k})"
            )));
        }
        Ok(CyclicWalkSpec { n, m, k })
    }

    pub fn group_order(&self) -> BigUint {
        BigUint::from(self.m).pow(self.n as u32)
    }
}

fn serialize_biguint<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    /// Character weight: number of ones (hypercube) or nonzero
    /// coordinates (cyclic).
    pub level: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub eigenvalue: ExactRational,
    pub eigenvalue_f64: f64,
    #[serde(serialize_with = "serialize_biguint")]
    pub multiplicity: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
    #[serde(serialize_with = "serialize_biguint")]
    pub group_order: BigUint,
    /// False when some nontrivial level has eigenvalue of modulus one.
    pub ergodic: bool,
}

impl SpectrumTable {
    fn from_rows(rows: Vec<(usize, ExactRational, BigUint)>, group_order: BigUint) -> Self {
        let ergodic = rows
            .iter()
            .filter(|(level, _, _)| *level > 0)
            .all(|(_, ev, _)| ev.abs() < ExactRational::one());
        let rows = rows
            .into_iter()
            .map(|(level, eigenvalue, multiplicity)| SpectrumRow {
                level,
                eigenvalue_f64: rational_to_f64(&eigenvalue),
                eigenvalue,
                multiplicity,
            })
            .collect();
        SpectrumTable {
            rows,
            group_order,
            ergodic,
        }
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = &ExactRational> {
        self.rows.iter().map(|r| &r.eigenvalue)
    }
}

fn check_level(n: usize, j: usize) -> Result<()> {
    if j > n {
        return Err(Error::Domain(format!("level {j} out of range 0..={n}")));
    }
    Ok(())
}

/// Eigenvalue at level `j`: `p + (1 − p)·K_j(k)`.
pub fn cube_eigenvalue(spec: &WalkSpec, j: usize) -> Result<ExactRational> {
    check_level(spec.n, j)?;
    let kraw = crate::krawtchouk::kraw_eval(crate::krawtchouk::KrawParams::new(spec.n, j, spec.k)?)?;
    let p = spec.laziness();
    Ok(p + (ExactRational::one() - p) * kraw)
}

/// All `n + 1` level eigenvalues, via the degree recurrence at `x = k`.
pub fn cube_eigenvalues(spec: &WalkSpec) -> Vec<ExactRational> {
    let p = spec.laziness();
    let q = ExactRational::one() - p;
    kraw_recurrence_all(spec.n, spec.k)
        .into_iter()
        .map(|kr| p + &q * kr)
        .collect()
}

pub fn cube_spectrum(spec: &WalkSpec) -> SpectrumTable {
    let mult = binom_row(spec.n);
    let rows = cube_eigenvalues(spec)
        .into_iter()
        .enumerate()
        .map(|(j, ev)| (j, ev, mult[j].clone()))
        .collect();
    SpectrumTable::from_rows(rows, BigUint::one() << spec.n)
}

pub fn max_nontrivial_eigenvalue_magnitude(spec: &WalkSpec) -> ExactRational {
    cube_eigenvalues(spec)
        .into_iter()
        .skip(1)
        .map(|ev| ev.abs())
        .max()
        .unwrap_or_else(ExactRational::zero)
}

/// Character sum `Σ_{levels ≥ 1} mult · eig^{2l}` evaluated in the
/// requested backend. Float evaluation runs in log space.
fn character_sum(rows: &[(ExactRational, BigUint, f64)], l: u64, backend: Backend) -> Value {
    match backend {
        Backend::Exact => {
            let mut total = ExactRational::zero();
            for (ev, mult, _) in rows {
                if ev.is_zero() && l > 0 {
                    continue;
                }
                total += rational_pow(ev, 2 * l) * int_rational(mult.clone());
            }
            Value::Exact(total)
        }
        _ => {
            let mut acc = CompensatedSum::new();
            for (ev, _, ln_mult) in rows {
                let evf = rational_to_f64(ev).abs();
                if l == 0 {
                    acc.add(ln_mult.exp());
                } else if evf > 0.0 {
                    acc.add((ln_mult + 2.0 * l as f64 * evf.ln()).exp());
                }
            }
            Value::Float(acc.value())
        }
    }
}

/// Upper Bound Lemma right-hand side for the hypercube walk:
/// `Σ_{j ≥ 1} C(n,j)·eig_j^{2l}`, an upper bound on `4·TV²` at step `l`.
pub fn l2_upper_bound(spec: &WalkSpec, l: u64, backend: Backend) -> Value {
    let backend = backend.resolve(spec.n);
    let mult = binom_row(spec.n);
    let rows: Vec<_> = cube_eigenvalues(spec)
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(j, ev)| {
            let lnm = log_binom(spec.n, j as i64).map(|x| x.log_value).unwrap_or(0.0);
            (ev, mult[j].clone(), lnm)
        })
        .collect();
    character_sum(&rows, l, backend)
}

/// Odd-level contribution to the l² distance for `k = n/2`, `n ≡ 2 mod 4`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OddLevelBound {
    /// `Σ_{j odd} C(n,j)·eig_j^{2l}`, which is `(1/2)^{2l}·2^{n−1}` at `p = 1/2`.
    pub computed: Value,
    /// The closed form `2^{(n−1)/2 − 2l}` as printed alongside the sum.
    pub printed_form: f64,
    pub note: String,
}

pub fn l2_lower_bound_odd_levels(spec: &WalkSpec, l: u64) -> Result<OddLevelBound> {
    if 2 * spec.k != spec.n || spec.n % 4 != 2 {
        return Err(Error::Domain(format!(
            "odd-level l2 bound needs k = n/2 with n = 2 mod 4 (n={}, k={})",
            spec.n, spec.k
        )));
    }
    let mult = binom_row(spec.n);
    let mut total = ExactRational::zero();
    for (j, ev) in cube_eigenvalues(spec).into_iter().enumerate() {
        if j % 2 == 1 {
            total += rational_pow(&ev, 2 * l) * int_rational(mult[j].clone());
        }
    }
    let exponent = (spec.n as f64 - 1.0) / 2.0 - 2.0 * l as f64;
    Ok(OddLevelBound {
        computed: Value::Exact(total),
        printed_form: exponent.exp2(),
        note: "printed closed form uses exponent (n-1)/2 - 2l; the odd-level sum equals 2^(n-1-2l)".into(),
    })
}

/// Eigenvalue of the `(Z/mZ)^n` walk at a character with `w` nonzero
/// coordinates.
pub fn zmn_eigenvalue(spec: &CyclicWalkSpec, w: usize) -> Result<ExactRational> {
    check_level(spec.n, w)?;
    if spec.n - w < spec.k {
        return Ok(ExactRational::zero());
    }
    Ok(uint_rational(choose(spec.n - w, spec.k), choose(spec.n, spec.k)))
}

pub fn zmn_spectrum(spec: &CyclicWalkSpec) -> SpectrumTable {
    let binoms = binom_row(spec.n);
    let rows = (0..=spec.n)
        .map(|w| {
            let ev = zmn_eigenvalue(spec, w).expect("level in range");
            let mult = &binoms[w] * BigUint::from(spec.m - 1).pow(w as u32);
            (w, ev, mult)
        })
        .collect();
    SpectrumTable::from_rows(rows, spec.group_order())
}

/// `Σ_{w ≥ 1} C(n,w)(m−1)^w·eig_w^{2l}`, an upper bound on `4·TV²`.
pub fn zmn_l2_upper_bound(spec: &CyclicWalkSpec, l: u64, backend: Backend) -> Value {
    let backend = backend.resolve(spec.n);
    let binoms = binom_row(spec.n);
    let ln_m1 = ((spec.m - 1) as f64).ln();
    let rows: Vec<_> = (1..=spec.n)
        .map(|w| {
            let ev = zmn_eigenvalue(spec, w).expect("level in range");
            let mult = &binoms[w] * BigUint::from(spec.m - 1).pow(w as u32);
            let lnm = log_binom(spec.n, w as i64).map(|x| x.log_value).unwrap_or(0.0) + w as f64 * ln_m1;
            (ev, mult, lnm)
        })
        .collect();
    character_sum(&rows, l, backend)
}
