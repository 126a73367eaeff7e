//! One function per subcommand. Each returns a report plus CSV rows.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use extbin_core::budget::dispersive_budget;
use extbin_core::channels::{cc_unitary, damage, CcParams, DampingParam, LossPattern};
use extbin_core::codes::{
    binomial_register_codeword, codeword, CodeFamily, CodeSpec, LogicalBasis, LogicalLabel,
};
use extbin_core::fock::PureState;
use extbin_core::kl::{
    analytic_diagonal, default_gamma_grid, fit_residual_scaling, kl_matrix, validate_grid,
};
use extbin_core::logical::{run_encoding_protocol, verify_logical_algebra, OutcomeSelector};
use extbin_core::recovery::fidelity_curve;
use extbin_core::report::{to_csv, to_value, CheckResult, Report};
use extbin_core::syndrome::{decoder_sweep, extract_syndrome};

use crate::config::{parse_grid, Options, RecoveryKind};

pub struct Output {
    pub report: Report,
    pub csv: Vec<u8>,
}

#[derive(Debug)]
pub enum CmdError {
    /// Bad or missing parameters: exit 2.
    Usage(String),
    /// Failure while computing or writing: exit 1.
    Run(anyhow::Error),
}

impl From<extbin_core::Error> for CmdError {
    fn from(e: extbin_core::Error) -> Self {
        CmdError::Run(e.into())
    }
}

type CmdResult<T> = Result<T, CmdError>;

fn usage<T>(msg: impl Into<String>) -> CmdResult<T> {
    Err(CmdError::Usage(msg.into()))
}

const EXACT: f64 = 1e-12;
const KL_TOL: f64 = 1e-13;

/// Rounds to the 1e−12 grid so CSV values do not carry float noise.
fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn family(opts: &Options, default: CodeFamily) -> CmdResult<CodeFamily> {
    match &opts.family {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|e: extbin_core::Error| CmdError::Usage(e.to_string())),
    }
}

fn spec(opts: &Options, default: CodeFamily) -> CmdResult<CodeSpec> {
    let fam = family(opts, default)?;
    let w = opts.w.unwrap_or(1);
    let k = opts.k.unwrap_or(1);
    CodeSpec::new(fam, w, k).map_err(|e| CmdError::Usage(e.to_string()))
}

fn in_suite_range(spec: &CodeSpec) -> CmdResult<()> {
    if !(1..=3).contains(&spec.w) || !(1..=3).contains(&spec.k) {
        return usage(format!(
            "w and K must lie in [1, 3] for this suite, got {spec}"
        ));
    }
    Ok(())
}

fn gamma(opts: &Options, default: f64) -> CmdResult<DampingParam> {
    let g = opts.gamma.unwrap_or(default);
    if !(g > 0.0 && g <= 0.05) {
        return usage(format!("gamma must lie in (0, 0.05], got {g}"));
    }
    DampingParam::new(g).map_err(|e| CmdError::Usage(e.to_string()))
}

fn label(opts: &Options, k: u32) -> CmdResult<LogicalLabel> {
    match &opts.label {
        None => Ok(LogicalLabel::from_index(0, k)),
        Some(s) => LogicalLabel::parse(s, k).map_err(|e| CmdError::Usage(e.to_string())),
    }
}

fn finish<T: Serialize>(
    command: &str,
    params: Value,
    results: Value,
    checks: Vec<CheckResult>,
    rows: &[T],
) -> CmdResult<Output> {
    Ok(Output {
        report: Report::new(command, params, results, checks)?,
        csv: to_csv(rows)?,
    })
}

#[derive(Serialize)]
struct Table1Row {
    family: String,
    w: u32,
    k: u32,
    label: String,
    mean_excitation: f64,
}

/// Reference mean excitations of the w=1 comparison rows by (family, K).
fn reference_mean(family: CodeFamily, k: u32) -> Option<f64> {
    match (family, k) {
        (_, 1) => Some(2.0),
        (CodeFamily::OneModeBinomial, 2) => Some(4.0),
        (_, 2) => Some(3.0),
        _ => None,
    }
}

pub fn table1(opts: &Options) -> CmdResult<Output> {
    let max_w = opts.max_w.unwrap_or(1);
    let max_k = opts.max_k.unwrap_or(2);
    if !(1..=3).contains(&max_w) || !(1..=3).contains(&max_k) {
        return usage("--max-w and --max-k must lie in [1, 3]");
    }
    let families = [
        CodeFamily::OneModeBinomial,
        CodeFamily::QubitShorAd,
        CodeFamily::ExtendedBinomial,
    ];
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for k in 1..=max_k {
        for w in 1..=max_w {
            for fam in families {
                let mut worst_norm: f64 = 0.0;
                let mut worst_table: f64 = 0.0;
                for idx in 0..(1usize << k) {
                    let l = LogicalLabel::from_index(idx, k);
                    // one-mode binomial registers for K > 1 are tensor products
                    let cw = if fam == CodeFamily::OneModeBinomial {
                        binomial_register_codeword(w, &l)?
                    } else {
                        codeword(&CodeSpec::new(fam, w, k)?, &l)?
                    };
                    worst_norm = worst_norm.max((cw.norm_sqr() - 1.0).abs());
                    let mean = cw.total_number_expectation()?;
                    let expected = match fam {
                        CodeFamily::ExtendedBinomial => Some(((w + 1) * (w + k)) as f64 / 2.0),
                        _ if w == 1 => reference_mean(fam, k),
                        _ => None,
                    };
                    if let Some(e) = expected {
                        worst_table = worst_table.max((mean - e).abs());
                    }
                    rows.push(Table1Row {
                        family: fam.to_string(),
                        w,
                        k,
                        label: l.to_string(),
                        mean_excitation: round12(mean),
                    });
                }
                checks.push(CheckResult::at_most(
                    format!("{fam}_w{w}_k{k}_normalized"),
                    worst_norm,
                    EXACT,
                ));
                if fam == CodeFamily::ExtendedBinomial || w == 1 {
                    checks.push(CheckResult::at_most(
                        format!("{fam}_w{w}_k{k}_mean_excitation"),
                        worst_table,
                        EXACT,
                    ));
                }
            }
        }
    }
    let results = json!({ "rows": to_value(&rows)? });
    finish(
        "table1",
        json!({"max_w": max_w, "max_k": max_k}),
        results,
        checks,
        &rows,
    )
}

#[derive(Serialize)]
struct AmplitudeRow {
    occupation: String,
    re: f64,
    im: f64,
}

pub fn codeword_cmd(opts: &Options) -> CmdResult<Output> {
    let spec = spec(opts, CodeFamily::ExtendedBinomial)?;
    let l = label(opts, spec.k)?;
    let cw = codeword(&spec, &l)?;
    let mean = cw.total_number_expectation()?;
    let rows: Vec<AmplitudeRow> = cw
        .to_records()
        .into_iter()
        .map(|r| AmplitudeRow {
            occupation: r
                .occupation
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            re: round12(r.re),
            im: round12(r.im),
        })
        .collect();
    let checks = vec![CheckResult::at_most(
        "normalized",
        (cw.norm_sqr() - 1.0).abs(),
        EXACT,
    )];
    let results = json!({
        "spec": to_value(&spec)?,
        "label": l.to_string(),
        "state": cw.to_string(),
        "amplitudes": to_value(&cw.to_records())?,
        "mean_excitation": mean,
    });
    finish(
        "codeword",
        json!({"spec": to_value(&spec)?, "label": l.to_string()}),
        results,
        checks,
        &rows,
    )
}

type Suite<'a> =
    Box<dyn Fn() -> CmdResult<(&'static str, Value, Vec<CheckResult>)> + Send + Sync + 'a>;

#[derive(Serialize)]
struct CheckRow {
    name: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

pub fn verify(opts: &Options) -> CmdResult<Output> {
    let spec = spec(opts, CodeFamily::ExtendedBinomial)?;
    in_suite_range(&spec)?;
    let g = gamma(opts, 0.01)?;
    let basis = LogicalBasis::new(spec)?;
    let b = &basis;

    let mut suites: Vec<Suite> = vec![
        Box::new(move || {
            let d = b.orthonormality_defect()?;
            Ok((
                "orthonormality",
                json!({"defect": d}),
                vec![CheckResult::at_most("orthonormality", d, EXACT)],
            ))
        }),
        Box::new(move || {
            let kl = kl_matrix(b, g, spec.w)?;
            let mut analytic: f64 = 0.0;
            for (p, pattern) in kl.patterns.iter().enumerate() {
                for (i, cw) in b.codewords().iter().enumerate() {
                    analytic = analytic
                        .max((kl.entry(i, i, p, p).re - analytic_diagonal(cw, pattern, g)).abs());
                }
            }
            let checks = vec![
                CheckResult::at_most("kl_offdiag", kl.offdiag_max, KL_TOL),
                CheckResult::at_most("kl_cross", kl.cross_max, KL_TOL),
                CheckResult::at_most("kl_hermiticity", kl.hermiticity_defect(), KL_TOL),
                CheckResult::at_most("kl_analytic_diagonal", analytic, KL_TOL),
            ];
            Ok(("kl", to_value(&kl.summary())?, checks))
        }),
    ];
    if spec.family == CodeFamily::ExtendedBinomial {
        suites.push(Box::new(move || {
            let r = verify_logical_algebra(&spec)?;
            Ok(("logical", to_value(&r.checks)?, r.checks))
        }));
        suites.push(Box::new(move || {
            let sweep = decoder_sweep(b, g)?;
            let checks = vec![
                CheckResult::holds("syndrome_deterministic", sweep.all_deterministic),
                CheckResult::holds("decoder_correct", sweep.all_correct),
                CheckResult::holds("decoder_injective", sweep.injective),
            ];
            Ok(("syndrome", json!({"cases": sweep.cases.len()}), checks))
        }));
    }
    let outcomes: Vec<_> = suites
        .par_iter()
        .map(|s| s())
        .collect::<CmdResult<Vec<_>>>()?;
    let mut results = serde_json::Map::new();
    let mut checks = Vec::new();
    for (name, value, c) in outcomes {
        results.insert(name.to_string(), value);
        checks.extend(c);
    }
    let rows: Vec<CheckRow> = checks
        .iter()
        .map(|c| CheckRow {
            name: c.name.clone(),
            value: c.value,
            tolerance: c.tolerance,
            pass: c.pass,
        })
        .collect();
    let params = json!({"spec": to_value(&spec)?, "gamma": g.value()});
    finish("verify", params, Value::Object(results), checks, &rows)
}

pub fn scaling(opts: &Options) -> CmdResult<Output> {
    let spec = spec(opts, CodeFamily::ExtendedBinomial)?;
    in_suite_range(&spec)?;
    let grid = match &opts.gamma_grid {
        Some(s) => parse_grid(s).map_err(CmdError::Usage)?,
        None => default_gamma_grid(),
    };
    validate_grid(&grid, 5).map_err(|e| CmdError::Usage(e.to_string()))?;
    let recovery = opts.recovery.unwrap_or(RecoveryKind::Transpose);
    if recovery == RecoveryKind::Naive && spec.family != CodeFamily::ExtendedBinomial {
        return usage("naive recovery needs the ext-bin syndrome decoder");
    }
    let basis = LogicalBasis::new(spec)?;
    let (fit, curve) = rayon::join(
        || fit_residual_scaling(&basis, &grid),
        || fidelity_curve(&basis, &grid),
    );
    let (fit, curve) = (fit?, curve?);
    let order = (spec.w + 1) as f64;
    let mut checks = vec![CheckResult::at_least(
        "residual_slope",
        fit.slope,
        order - 0.15,
    )];
    match recovery {
        RecoveryKind::Transpose => {
            checks.push(CheckResult::near(
                "transpose_slope",
                curve.slope_transpose,
                order,
                0.2,
            ));
        }
        RecoveryKind::Naive => {
            checks.push(CheckResult::at_least(
                "naive_slope",
                curve.slope_naive.unwrap_or(f64::NAN),
                1.0,
            ));
        }
    }
    let results = json!({
        "residual_fit": to_value(&fit)?,
        "fidelity": to_value(&curve)?,
    });
    let params = json!({
        "spec": to_value(&spec)?,
        "gamma_grid": grid,
        "recovery": to_value(&recovery)?,
    });
    finish("scaling", params, results, checks, &curve.points)
}

#[derive(Serialize)]
struct SyndromeRow {
    pattern: String,
    label: String,
    outcomes: String,
    decoded: String,
    deterministic: bool,
    #[serde(rename = "match")]
    matches: bool,
}

fn join_u32(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

pub fn syndrome(opts: &Options) -> CmdResult<Output> {
    let spec = spec(opts, CodeFamily::ExtendedBinomial)?;
    if spec.family != CodeFamily::ExtendedBinomial {
        return usage("syndrome extraction is defined for ext-bin codes only");
    }
    in_suite_range(&spec)?;
    let g = gamma(opts, 0.01)?;
    let basis = LogicalBasis::new(spec)?;
    let Some(pattern_text) = &opts.pattern else {
        let sweep = decoder_sweep(&basis, g)?;
        let checks = vec![
            CheckResult::holds("syndrome_deterministic", sweep.all_deterministic),
            CheckResult::holds("decoder_correct", sweep.all_correct),
            CheckResult::holds("decoder_injective", sweep.injective),
        ];
        let rows: Vec<SyndromeRow> = sweep
            .cases
            .iter()
            .map(|c| SyndromeRow {
                pattern: c.pattern.to_string(),
                label: c.label.clone(),
                outcomes: join_u32(&c.outcomes),
                decoded: c
                    .decoded
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
                deterministic: c.deterministic,
                matches: c.matches,
            })
            .collect();
        let params = json!({"spec": to_value(&spec)?, "gamma": g.value()});
        return finish("syndrome", params, to_value(&sweep)?, checks, &rows);
    };
    let pattern: LossPattern = pattern_text
        .parse()
        .map_err(|e: extbin_core::Error| CmdError::Usage(e.to_string()))?;
    if pattern.len() != spec.num_modes() {
        return usage(format!(
            "pattern {pattern} needs {} entries",
            spec.num_modes()
        ));
    }
    let l = label(opts, spec.k)?;
    let damaged = damage(basis.codeword(&l), &pattern, g)?;
    if damaged.is_empty() {
        return usage(format!("pattern {pattern} annihilates codeword {l}"));
    }
    let seed = opts.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rec = extract_syndrome(&damaged, &spec, &mut rng)?;
    let matches = !rec.ambiguous && rec.decoded.as_ref() == Some(&pattern);
    let mut checks = Vec::new();
    if pattern.weight() <= spec.w {
        checks.push(CheckResult::holds("decoded_matches", matches));
    }
    let results = json!({
        "pattern": pattern.to_string(),
        "outcomes": rec.outcomes,
        "decoded": rec.decoded.as_ref().map(ToString::to_string),
        "ambiguous": rec.ambiguous,
        "match": matches,
    });
    let rows = [SyndromeRow {
        pattern: pattern.to_string(),
        label: l.to_string(),
        outcomes: join_u32(&rec.outcomes),
        decoded: rec
            .decoded
            .as_ref()
            .map(ToString::to_string)
            .unwrap_or_default(),
        deterministic: true,
        matches,
    }];
    let params = json!({
        "spec": to_value(&spec)?,
        "gamma": g.value(),
        "pattern": pattern.to_string(),
        "label": l.to_string(),
        "seed": seed,
    });
    finish("syndrome", params, results, checks, &rows)
}

fn amplitude(text: Option<&String>, default: f64) -> CmdResult<Complex64> {
    match text {
        None => Ok(Complex64::new(default, 0.0)),
        Some(s) => s
            .parse::<Complex64>()
            .map_err(|_| CmdError::Usage(format!("cannot parse amplitude '{s}'"))),
    }
}

#[derive(Serialize)]
struct EncodeRow {
    parity_outcome: i8,
    x_outcome: i8,
    probability: f64,
    fidelity: f64,
}

pub fn encode(opts: &Options) -> CmdResult<Output> {
    let spec = spec(opts, CodeFamily::ExtendedBinomial)?;
    if spec.family != CodeFamily::ExtendedBinomial || spec.k != 1 {
        return usage("the encoding protocol runs on ext-bin codes with K = 1");
    }
    let alpha = amplitude(opts.alpha.as_ref(), 1.0)?;
    let beta = amplitude(opts.beta.as_ref(), 0.0)?;
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > EXACT {
        return usage(format!("|alpha|² + |beta|² = {norm}, expected 1"));
    }
    let selector = match opts.seed {
        Some(s) => OutcomeSelector::Sampled(s),
        None => OutcomeSelector::EnumerateAll,
    };
    let traces = run_encoding_protocol(alpha, beta, &spec, selector)?;
    let worst_fidelity = traces
        .iter()
        .map(|t| (1.0 - t.fidelity_to_target).abs())
        .fold(0.0, f64::max);
    let mut checks = vec![CheckResult::at_most("fidelity", worst_fidelity, EXACT)];
    if selector == OutcomeSelector::EnumerateAll {
        let worst_p = traces
            .iter()
            .map(|t| (t.probability - 0.25).abs())
            .fold(0.0, f64::max);
        checks.push(CheckResult::holds("four_branches", traces.len() == 4));
        checks.push(CheckResult::at_most("branch_probability", worst_p, EXACT));
    }
    let rows: Vec<EncodeRow> = traces
        .iter()
        .map(|t| EncodeRow {
            parity_outcome: t.outcomes.0,
            x_outcome: t.outcomes.1,
            probability: round12(t.probability),
            fidelity: round12(t.fidelity_to_target),
        })
        .collect();
    let params = json!({
        "spec": to_value(&spec)?,
        "alpha": to_value(&alpha)?,
        "beta": to_value(&beta)?,
        "seed": opts.seed,
    });
    finish(
        "encode",
        params,
        json!({"traces": to_value(&traces)?}),
        checks,
        &rows,
    )
}

#[derive(Serialize)]
struct CcRow {
    state: String,
    dt: f64,
    overlap: f64,
}

pub fn cc(opts: &Options) -> CmdResult<Output> {
    let spec = spec(opts, CodeFamily::CeExtendedBinomial)?;
    in_suite_range(&spec)?;
    let seed = opts.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dts: Vec<f64> = match &opts.dt {
        Some(v) if !v.is_empty() => v.clone(),
        Some(_) => return usage("--dt needs at least one value"),
        // 100 draws from (0, 10]
        None => (0..100)
            .map(|_| 10.0 * (1.0 - rng.random::<f64>()))
            .collect(),
    };
    if dts.iter().any(|t| !t.is_finite()) {
        return usage("--dt values must be finite");
    }
    let basis = LogicalBasis::new(spec)?;
    let coeffs: Vec<Complex64> = (0..basis.dimension())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut states: Vec<(String, PureState)> = basis
        .labels()
        .map(|l| l.to_string())
        .zip(basis.codewords().iter().cloned())
        .collect();
    states.push((
        "superposition".into(),
        basis.superpose(&coeffs)?.normalized()?,
    ));

    let layout = spec.layout();
    let rows = dts
        .par_iter()
        .map(|&dt| {
            let u = cc_unitary(CcParams::new(dt)?, &layout);
            states
                .iter()
                .map(|(name, s)| {
                    Ok(CcRow {
                        state: name.clone(),
                        dt,
                        overlap: s.inner(&u.apply(s)?)?.norm(),
                    })
                })
                .collect::<extbin_core::Result<Vec<_>>>()
        })
        .collect::<extbin_core::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();

    let mut checks = Vec::new();
    if spec.family == CodeFamily::CeExtendedBinomial {
        let worst = rows
            .iter()
            .map(|r| (r.overlap - 1.0).abs())
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most(
            "constant_excitation_invariance",
            worst,
            EXACT,
        ));
    } else if spec.family == CodeFamily::ExtendedBinomial && spec.w == 1 && spec.k == 1 {
        let worst = rows
            .iter()
            .filter(|r| r.state == "0")
            .map(|r| {
                (r.overlap
                    - (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -4.0 * r.dt)).norm()
                        / 2.0)
                    .abs()
            })
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most("two_component_phase", worst, EXACT));
    }
    let min_overlap = rows.iter().map(|r| r.overlap).fold(f64::INFINITY, f64::min);
    let results =
        json!({"num_dt": dts.len(), "min_overlap": min_overlap, "rows": to_value(&rows)?});
    let params = json!({"spec": to_value(&spec)?, "seed": seed, "dt": dts});
    let csv_rows: Vec<CcRow> = rows
        .into_iter()
        .map(|r| CcRow {
            overlap: round12(r.overlap),
            ..r
        })
        .collect();
    finish("cc", params, results, checks, &csv_rows)
}

pub fn budget(opts: &Options) -> CmdResult<Output> {
    let Some(nc) = opts.nc else {
        return usage("budget needs --nc");
    };
    let r = dispersive_budget(nc).map_err(|e| CmdError::Usage(e.to_string()))?;
    let checks = vec![CheckResult::holds(
        "extended_not_below_one_mode",
        r.w_extended >= r.w_one_mode,
    )];
    finish("budget", json!({"nc": nc}), to_value(&r)?, checks, &[r])
}
