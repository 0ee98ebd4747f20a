use kflip_core::bounds::{
    comparison_bound, table1_reproduction, thm1_lower, thm1_upper_steps, thm_gen_steps, thm_half_steps,
    BoundReport, Table1Report,
};
use kflip_core::coupling::{
    coupling_tail_report, marginal_check, simulate_coupling, verify_lemma_general, verify_lemma_probineq,
    CouplingTailReport, LemmaReport, ProbConvention,
};
use kflip_core::exactdist::{
    flip_weight_kernel, l2_to_uniform, tail_from_touched, touched_weight_kernel, tv_to_uniform,
    zmn_tv_from_touched, Evolution, WeightDistribution,
};
use kflip_core::krawtchouk::kraw_symmetry_holds;
use kflip_core::numerics::{fmt_float, fmt_rational};
use kflip_core::spectrum::{
    cube_eigenvalues, cube_spectrum, l2_upper_bound, max_nontrivial_eigenvalue_magnitude, zmn_l2_upper_bound,
    zmn_spectrum,
};
use kflip_core::{Backend, CyclicWalkSpec, ExactRational, Value, WalkSpec};
use num_rational::BigRational;
use serde::Serialize;

use crate::args::{BoundsArgs, Convention, CoupleArgs, Format, Lemma, SpectrumArgs, TvArgs, VerifyArgs};
use crate::output::{Artifact, Table};
use crate::CliError;

fn parse_laziness(p: &str) -> Result<ExactRational, CliError> {
    p.trim()
        .parse::<BigRational>()
        .map_err(|_| CliError::Invalid(format!("--p expects a rational like 1/2, got '{p}'")))
}

fn walk(n: usize, k: usize, p: &str) -> Result<WalkSpec, CliError> {
    Ok(WalkSpec::new(n, k)?.with_laziness(parse_laziness(p)?)?)
}

fn exact_str(v: &Value) -> String {
    v.exact().map(fmt_rational).unwrap_or_default()
}

fn float_str(v: &Value) -> String {
    fmt_float(v.to_f64())
}

#[derive(Serialize)]
struct SpectrumOut<T: Serialize> {
    walk: &'static str,
    n: usize,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<String>,
    table: T,
}

pub fn spectrum(a: &SpectrumArgs) -> Result<Artifact, CliError> {
    let (table, out) = match a.m {
        None => {
            let spec = walk(a.n, a.k, &a.p)?;
            let t = cube_spectrum(&spec);
            let out = SpectrumOut {
                walk: "hypercube",
                n: a.n,
                k: a.k,
                m: None,
                p: Some(fmt_rational(spec.laziness())),
                table: t.clone(),
            };
            (t, out)
        }
        Some(m) => {
            let spec = CyclicWalkSpec::new(a.n, m, a.k)?;
            let t = zmn_spectrum(&spec);
            (
                t.clone(),
                SpectrumOut {
                    walk: "cyclic",
                    n: a.n,
                    k: a.k,
                    m: Some(m),
                    p: None,
                    table: t,
                },
            )
        }
    };
    let mut csv = Table::new(&["level", "eigenvalue", "eigenvalue_f64", "multiplicity"]);
    for r in &table.rows {
        csv.push(vec![
            r.level.to_string(),
            fmt_rational(&r.eigenvalue),
            fmt_float(r.eigenvalue_f64),
            r.multiplicity.to_string(),
        ]);
    }
    Artifact::new("spectrum", &out, csv, Format::Csv)
}

#[derive(Serialize)]
struct TvRow {
    l: u64,
    tv: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    l2: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    separation_tail: Option<Value>,
    l2_upper: Value,
}

#[derive(Serialize)]
struct TvOut {
    walk: &'static str,
    n: usize,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<String>,
    backend: Backend,
    rows: Vec<TvRow>,
}

pub fn tv(a: &TvArgs) -> Result<Artifact, CliError> {
    let backend = Backend::from(a.backend).resolve(a.n);
    let mut rows = Vec::new();
    let (walk_name, p, table) = match a.m {
        None => {
            let spec = walk(a.n, a.k, &a.p)?;
            let kernel = flip_weight_kernel(&spec, backend);
            let start = WeightDistribution::point_mass(a.n, 0, backend);
            let mut t = Table::new(&["l", "tv", "l2", "l2_upper", "tv_exact", "l2_exact", "backend"]);
            for (l, d) in Evolution::new(start, &kernel)?
                .take(a.steps as usize + 1)
                .enumerate()
            {
                let l = l as u64;
                let tv = tv_to_uniform(a.n, &d);
                let l2 = l2_to_uniform(a.n, &d);
                let ub = l2_upper_bound(&spec, l, backend);
                t.push(vec![
                    l.to_string(),
                    float_str(&tv),
                    float_str(&l2),
                    float_str(&ub),
                    exact_str(&tv),
                    exact_str(&l2),
                    backend.to_string(),
                ]);
                rows.push(TvRow {
                    l,
                    tv,
                    l2: Some(l2),
                    separation_tail: None,
                    l2_upper: ub,
                });
            }
            ("hypercube", Some(fmt_rational(spec.laziness())), t)
        }
        Some(m) => {
            let spec = CyclicWalkSpec::new(a.n, m, a.k)?;
            let kernel = touched_weight_kernel(&spec, backend);
            let start = WeightDistribution::point_mass(a.n, 0, backend);
            let mut t = Table::new(&[
                "l",
                "tv",
                "separation_tail",
                "l2_upper",
                "tv_exact",
                "separation_tail_exact",
                "backend",
            ]);
            for (l, d) in Evolution::new(start, &kernel)?
                .take(a.steps as usize + 1)
                .enumerate()
            {
                let l = l as u64;
                let tv = zmn_tv_from_touched(&spec, &d);
                let sep = tail_from_touched(&spec, &d);
                let ub = zmn_l2_upper_bound(&spec, l, backend);
                t.push(vec![
                    l.to_string(),
                    float_str(&tv),
                    float_str(&sep),
                    float_str(&ub),
                    exact_str(&tv),
                    exact_str(&sep),
                    backend.to_string(),
                ]);
                rows.push(TvRow {
                    l,
                    tv,
                    l2: None,
                    separation_tail: Some(sep),
                    l2_upper: ub,
                });
            }
            ("cyclic", None, t)
        }
    };
    let out = TvOut {
        walk: walk_name,
        n: a.n,
        k: a.k,
        m: a.m,
        p,
        backend,
        rows,
    };
    Artifact::new("tv", &out, table, Format::Csv)
}

#[derive(Serialize)]
struct Skipped {
    theorem: &'static str,
    reason: String,
}

#[derive(Serialize)]
struct BoundsOut {
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    c: f64,
    eps: f64,
    backend: Backend,
    reports: Vec<BoundReport>,
    skipped: Vec<Skipped>,
    table1: Table1Report,
}

fn collect<T>(
    theorem: &'static str,
    r: kflip_core::Result<T>,
    into: &mut Vec<BoundReport>,
    skipped: &mut Vec<Skipped>,
    push: impl Fn(T, &mut Vec<BoundReport>),
) {
    match r {
        Ok(v) => push(v, into),
        Err(e) => skipped.push(Skipped {
            theorem,
            reason: e.to_string(),
        }),
    }
}

pub fn bounds(a: &BoundsArgs) -> Result<Artifact, CliError> {
    if a.k.is_some() && a.n.is_none() {
        return Err(CliError::Invalid("--k needs --n".into()));
    }
    let n_for_backend = a.n.unwrap_or(0);
    let backend = Backend::from(a.backend).resolve(n_for_backend);
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    if let (Some(n), Some(k)) = (a.n, a.k) {
        collect(
            "coupling_upper",
            thm1_upper_steps(n, k, a.c),
            &mut reports,
            &mut skipped,
            |v, r| r.extend(v),
        );
        if 2 * k == n {
            collect(
                "fourier_half",
                thm_half_steps(n, a.eps),
                &mut reports,
                &mut skipped,
                |v, r| r.push(v),
            );
        } else {
            skipped.push(Skipped {
                theorem: "fourier_half",
                reason: "needs k = n/2".into(),
            });
        }
        collect(
            "chebyshev_lower",
            thm1_lower(n, k, a.c, backend),
            &mut reports,
            &mut skipped,
            |v, r| r.push(v),
        );
        if let Some(m) = a.m {
            collect(
                "cyclic_fourier",
                thm_gen_steps(n, m, k, a.c),
                &mut reports,
                &mut skipped,
                |v, r| r.push(v),
            );
        }
    }
    if let (Some(n), Some(m)) = (a.n, a.m) {
        collect(
            "comparison",
            comparison_bound(n, m, a.c),
            &mut reports,
            &mut skipped,
            |v, r| r.extend(v),
        );
    }
    let table1 = table1_reproduction();

    let mut csv = Table::new(&[
        "theorem",
        "variant",
        "n",
        "k",
        "m",
        "c",
        "eps",
        "log_base",
        "steps_real",
        "steps",
        "bound",
        "bound_kind",
        "printed",
        "notes",
    ]);
    let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    let optf = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    for r in &reports {
        csv.push(vec![
            r.theorem.clone(),
            r.variant.clone(),
            opt(r.inputs.n),
            opt(r.inputs.k),
            opt(r.inputs.m),
            optf(r.inputs.c),
            optf(r.inputs.eps),
            tag(&r.log_base),
            fmt_float(r.steps_real),
            r.steps.to_string(),
            float_str(&r.bound),
            tag(&r.bound_kind),
            String::new(),
            r.notes.join("; "),
        ]);
    }
    for row in &table1.rows {
        for e in &row.evaluations {
            csv.push(vec![
                "table1".into(),
                e.variant.clone(),
                row.n.to_string(),
                row.k.to_string(),
                String::new(),
                "0+".into(),
                String::new(),
                tag(&e.log_base),
                fmt_float(e.steps_real),
                e.steps.to_string(),
                String::new(),
                String::new(),
                row.printed.to_string(),
                if e.matches_printed {
                    "matches printed".into()
                } else {
                    "MISMATCH".into()
                },
            ]);
        }
    }
    let out = BoundsOut {
        n: a.n,
        k: a.k,
        m: a.m,
        c: a.c,
        eps: a.eps,
        backend,
        reports,
        skipped,
        table1,
    };
    Artifact::new("bounds", &out, csv, Format::Json)
}

/// Serialized name of a unit enum variant.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}

#[derive(Serialize)]
struct CoupleOut {
    backend: Backend,
    monte_carlo: CouplingTailReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<CouplingTailReport>,
}

/// Exact tails can carry thousands of digits; the CLI reports their float
/// values and keeps the expected time exact.
fn tails_to_float(mut r: CouplingTailReport) -> CouplingTailReport {
    for p in &mut r.tail {
        if let Some(v) = &p.p {
            p.p = Some(Value::Float(v.to_f64()));
        }
    }
    r
}

pub fn couple(a: &CoupleArgs) -> Result<Artifact, CliError> {
    let spec = WalkSpec::new(a.n, a.k)?;
    let backend = Backend::from(a.backend).resolve(a.n);
    let mc = simulate_coupling(&spec, a.trials, a.steps, a.seed)?;
    let exact = if a.no_exact {
        None
    } else {
        Some(tails_to_float(coupling_tail_report(
            &spec,
            a.steps,
            Backend::from(a.backend),
        )?))
    };
    let mut csv = Table::new(&[
        "l",
        "mc_tail",
        "mc_std_error",
        "mc_exceed",
        "exact_tail",
        "backend",
    ]);
    for (i, p) in mc.tail.iter().enumerate() {
        let ex = exact
            .as_ref()
            .and_then(|e| e.tail.get(i))
            .and_then(|t| t.p.as_ref());
        csv.push(vec![
            p.l.to_string(),
            p.p.as_ref().map(float_str).unwrap_or_default(),
            p.std_error.map(fmt_float).unwrap_or_default(),
            p.exceed.map(|x| x.to_string()).unwrap_or_default(),
            ex.map(float_str).unwrap_or_default(),
            backend.to_string(),
        ]);
    }
    Artifact::new(
        "couple",
        &CoupleOut {
            backend,
            monte_carlo: mc,
            exact,
        },
        csv,
        Format::Csv,
    )
}

fn dims(a: &VerifyArgs, admissible: impl Fn(usize) -> bool, what: &str) -> Result<Vec<usize>, CliError> {
    let ns: Vec<usize> = match (a.n, a.n_max) {
        (Some(n), None) => vec![n],
        (None, Some(max)) => (1..=max).filter(|&n| admissible(n)).collect(),
        (Some(_), Some(_)) => return Err(CliError::Invalid("give either --n or --n-max, not both".into())),
        (None, None) => return Err(CliError::Invalid("--n or --n-max is required".into())),
    };
    if let Some(bad) = ns.iter().find(|&&n| !admissible(n)) {
        return Err(CliError::Invalid(format!("{what} (got n={bad})")));
    }
    if ns.is_empty() {
        return Err(CliError::Invalid(format!("no admissible n: {what}")));
    }
    Ok(ns)
}

fn lemma_table(r: &LemmaReport) -> Table {
    let mut t = Table::new(&[
        "kind",
        "part",
        "n",
        "k",
        "y",
        "range_lo",
        "range_hi",
        "probability",
        "claimed",
        "holds",
        "checked",
        "counterexamples",
        "even_y_counterexamples",
    ]);
    for p in &r.parts {
        t.push(vec![
            "summary".into(),
            p.part.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            p.tightest
                .as_ref()
                .map(|c| c.probability.clone())
                .unwrap_or_default(),
            p.tightest.as_ref().map(|c| c.claimed.clone()).unwrap_or_default(),
            (p.counterexamples == 0).to_string(),
            p.checked.to_string(),
            p.counterexamples.to_string(),
            p.even_y_counterexamples.to_string(),
        ]);
        for w in &p.witnesses {
            t.push(vec![
                "counterexample".into(),
                w.part.to_string(),
                w.n.to_string(),
                w.k.to_string(),
                w.y.to_string(),
                w.range.0.to_string(),
                w.range.1.to_string(),
                w.probability.clone(),
                w.claimed.clone(),
                w.holds.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    }
    if let Some(m) = &r.mode_thresholds {
        for w in &m.witnesses {
            t.push(vec![
                "mode_threshold".into(),
                "1".into(),
                w.n.to_string(),
                w.k.to_string(),
                w.y.to_string(),
                w.i.to_string(),
                (w.i + 1).to_string(),
                format!("{} -> {}", w.pmf_i, w.pmf_next),
                format!("stated {} exact {}", w.stated_threshold, w.exact_threshold),
                "false".into(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    }
    t
}

#[derive(Serialize)]
struct Eig34Row {
    n: usize,
    k: usize,
    max_nontrivial: String,
    max_nontrivial_f64: f64,
    odd_levels_half: bool,
    holds: bool,
}

#[derive(Serialize)]
struct Eig34Report {
    lemma: &'static str,
    claim: &'static str,
    rows: Vec<Eig34Row>,
    holds: bool,
}

#[derive(Serialize)]
struct SymmetryWitness {
    n: usize,
    y: usize,
    i: i64,
}

#[derive(Serialize)]
struct SymmetryReport {
    lemma: &'static str,
    claim: &'static str,
    n_values: Vec<usize>,
    checked: u64,
    failures: u64,
    witnesses: Vec<SymmetryWitness>,
    holds: bool,
}

pub fn verify(a: &VerifyArgs) -> Result<Artifact, CliError> {
    let convention = match a.convention {
        Convention::Lazy => ProbConvention::Lazy,
        Convention::Move => ProbConvention::Move,
    };
    let mut artifact = match a.lemma {
        Lemma::Probineq => {
            let ns = dims(a, |n| n % 4 == 2, "probineq needs n = 2 mod 4")?;
            let r = verify_lemma_probineq(&ns, convention)?;
            let mut art = Artifact::new("verify", &r, lemma_table(&r), Format::Json)?;
            art.counterexample = !r.holds;
            art
        }
        Lemma::General => {
            let n_max = match (a.n, a.n_max) {
                (_, Some(m)) | (Some(m), None) => m,
                (None, None) => return Err(CliError::Invalid("--n-max is required".into())),
            };
            let r = verify_lemma_general(n_max, &a.parts, convention)?;
            let mut art = Artifact::new("verify", &r, lemma_table(&r), Format::Json)?;
            art.counterexample = !r.holds;
            art
        }
        Lemma::Eig34 => {
            let ns = dims(a, |n| n % 4 == 2, "eig34 needs n = 2 mod 4")?;
            let three_quarters = ExactRational::new(3.into(), 4.into());
            let half = ExactRational::new(1.into(), 2.into());
            let rows: Vec<Eig34Row> = ns
                .iter()
                .map(|&n| {
                    let spec = WalkSpec::new(n, n / 2).expect("n >= 2");
                    let max = max_nontrivial_eigenvalue_magnitude(&spec);
                    let odd_half = cube_eigenvalues(&spec)
                        .iter()
                        .skip(1)
                        .step_by(2)
                        .all(|e| *e == half);
                    Eig34Row {
                        n,
                        k: n / 2,
                        max_nontrivial_f64: kflip_core::numerics::rational_to_f64(&max),
                        holds: max <= three_quarters && odd_half,
                        max_nontrivial: fmt_rational(&max),
                        odd_levels_half: odd_half,
                    }
                })
                .collect();
            let holds = rows.iter().all(|r| r.holds);
            let mut t = Table::new(&[
                "n",
                "k",
                "max_nontrivial",
                "max_nontrivial_f64",
                "odd_levels_half",
                "holds",
            ]);
            for r in &rows {
                t.push(vec![
                    r.n.to_string(),
                    r.k.to_string(),
                    r.max_nontrivial.clone(),
                    fmt_float(r.max_nontrivial_f64),
                    r.odd_levels_half.to_string(),
                    r.holds.to_string(),
                ]);
            }
            let report = Eig34Report {
                lemma: "eig34",
                claim: "k = n/2, n = 2 mod 4: max nontrivial |eigenvalue| <= 3/4 and odd levels equal 1/2",
                rows,
                holds,
            };
            let mut art = Artifact::new("verify", &report, t, Format::Json)?;
            art.counterexample = !holds;
            art
        }
        Lemma::Marginal => {
            let (Some(n), Some(k)) = (a.n, a.k) else {
                return Err(CliError::Invalid("marginal needs --n and --k".into()));
            };
            let r = marginal_check(n, k)?;
            let mut t = Table::new(&["x1", "x2", "first_set", "second_set", "image"]);
            let join = |s: &[usize]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            for v in &r.violations {
                t.push(vec![
                    v.x1.to_string(),
                    v.x2.to_string(),
                    join(&v.first_set),
                    join(&v.second_set),
                    join(&v.image),
                ]);
            }
            let mut art = Artifact::new("verify", &r, t, Format::Json)?;
            art.counterexample = !r.holds;
            art
        }
        Lemma::Symmetry => {
            let ns = dims(a, |n| n % 2 == 0, "symmetry needs even n")?;
            let mut report = SymmetryReport {
                lemma: "symmetry",
                claim: "C(y,i)C(n-y,n/2-i) = C(y,y-i)C(n-y,n/2-y+i) for y-n/2 <= i <= y/2",
                n_values: ns.clone(),
                checked: 0,
                failures: 0,
                witnesses: Vec::new(),
                holds: true,
            };
            for &n in &ns {
                for y in 0..=n {
                    let lo = y as i64 - n as i64 / 2;
                    for i in lo..=(y as i64 / 2) {
                        report.checked += 1;
                        if !kraw_symmetry_holds(n, y, i)? {
                            report.failures += 1;
                            report.holds = false;
                            if report.witnesses.len() < 20 {
                                report.witnesses.push(SymmetryWitness { n, y, i });
                            }
                        }
                    }
                }
            }
            let mut t = Table::new(&["n", "y", "i"]);
            for w in &report.witnesses {
                t.push(vec![w.n.to_string(), w.y.to_string(), w.i.to_string()]);
            }
            let holds = report.holds;
            let mut art = Artifact::new("verify", &report, t, Format::Json)?;
            art.counterexample = !holds;
            art
        }
    };
    artifact.name = "verify";
    Ok(artifact)
}
