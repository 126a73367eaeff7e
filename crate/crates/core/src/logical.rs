//! Logical operators of the extended binomial code and the measurement-based
//! encoding protocol.
//!
//! Per mode, X̂ swaps |0⟩ and |w+1⟩ and acts as the identity on |1⟩..|w⟩;
//! Ẑ = e^{iπn̂/(w+1)}. Buffer modes are 0..w, data modes w..w+K.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::{CodeFamily, CodeSpec, LogicalBasis, LogicalLabel};
use crate::error::{Error, Result};
use crate::fock::{LinearMap, ModeLayout, ModeOperator, PureState, EQ_TOL};
use crate::report::{all_pass, CheckResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalKind {
    XEll,
    ZEll,
    XAll,
    ZAll,
}

impl LogicalKind {
    pub fn name(self) -> &'static str {
        match self {
            LogicalKind::XEll => "x_ell",
            LogicalKind::ZEll => "z_ell",
            LogicalKind::XAll => "x_all",
            LogicalKind::ZAll => "z_all",
        }
    }

    pub fn needs_index(self) -> bool {
        matches!(self, LogicalKind::XEll | LogicalKind::ZEll)
    }
}

impl fmt::Display for LogicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LogicalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            LogicalKind::XEll,
            LogicalKind::ZEll,
            LogicalKind::XAll,
            LogicalKind::ZAll,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown logical operator '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct LogicalOperator {
    pub kind: LogicalKind,
    pub ell: Option<usize>,
    pub map: LinearMap,
}

impl LogicalOperator {
    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        self.map.apply(state)
    }
}

/// X̂ on one mode: |0⟩ ↔ |w+1⟩, identity on the rest.
pub fn x_hat(w: u32, cutoff: u32) -> Result<ModeOperator> {
    let s = w + 1;
    if cutoff < s {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} cannot hold |{s}⟩"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let entries = (0..=cutoff).map(|n| {
        let out = match n {
            0 => s,
            m if m == s => 0,
            m => m,
        };
        (out, n, one)
    });
    ModeOperator::from_entries(cutoff, cutoff, entries)
}

/// Ẑ^p on one mode: e^{iπ p n̂/(w+1)}.
pub fn z_hat_pow(w: u32, cutoff: u32, p: u32) -> ModeOperator {
    let s = (w + 1) as f64;
    ModeOperator::diagonal(cutoff, |n| {
        Complex64::from_polar(
            1.0,
            std::f64::consts::PI * ((p * n) % (2 * (w + 1))) as f64 / s,
        )
    })
}

fn require_ext(spec: &CodeSpec) -> Result<()> {
    if spec.family != CodeFamily::ExtendedBinomial {
        return Err(Error::Unsupported(format!(
            "logical operators are built for ext-bin codes, not {}",
            spec.family
        )));
    }
    Ok(())
}

pub fn build_logical_operator(
    kind: LogicalKind,
    ell: Option<usize>,
    spec: &CodeSpec,
) -> Result<LogicalOperator> {
    require_ext(spec)?;
    let (w, k) = (spec.w as usize, spec.k as usize);
    let layout = spec.layout();
    let c = spec.mode_cutoff();
    let ell = match (kind.needs_index(), ell) {
        (true, Some(l)) if l < k => Some(l),
        (true, other) => {
            return Err(Error::InvalidParameter(format!(
                "{kind} needs an index below {k}, got {other:?}"
            )))
        }
        (false, _) => None,
    };
    let identity = ModeOperator::identity(c);
    let mut factors = vec![identity; w + k];
    match kind {
        LogicalKind::XEll => factors[w + ell.unwrap()] = x_hat(spec.w, c)?,
        LogicalKind::XAll => factors[0] = x_hat(spec.w, c)?,
        LogicalKind::ZEll => {
            for f in factors.iter_mut().take(w) {
                *f = z_hat_pow(spec.w, c, 1);
            }
            factors[w + ell.unwrap()] = z_hat_pow(spec.w, c, 1);
        }
        LogicalKind::ZAll => {
            for f in factors.iter_mut().take(w) {
                *f = z_hat_pow(spec.w, c, spec.k);
            }
            for f in factors.iter_mut().skip(w) {
                *f = z_hat_pow(spec.w, c, 1);
            }
        }
    }
    debug_assert_eq!(&layout.cutoffs().len(), &factors.len());
    Ok(LogicalOperator {
        kind,
        ell,
        map: LinearMap::product(factors)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LogicalAlgebraReport {
    pub spec: CodeSpec,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

/// √(Σ_j ‖f(|j̄⟩) − t_j‖²), an upper bound on the operator norm of the
/// difference restricted to the code space.
fn code_defect<F, T>(basis: &LogicalBasis, f: F, target: T) -> Result<f64>
where
    F: Fn(&PureState) -> Result<PureState>,
    T: Fn(usize, &PureState) -> Result<PureState>,
{
    let mut acc = 0.0;
    for (j, cw) in basis.codewords().iter().enumerate() {
        let diff = f(cw)?.add_scaled(Complex64::new(-1.0, 0.0), &target(j, cw)?)?;
        acc += diff.norm_sqr();
    }
    Ok(acc.sqrt())
}

fn same(_: usize, s: &PureState) -> Result<PureState> {
    Ok(s.clone())
}

fn zero_target(_: usize, s: &PureState) -> Result<PureState> {
    Ok(PureState::zero(s.layout().clone()))
}

/// Pauli algebra and logical action of X̄_ℓ, Z̄_ℓ, X̄_all and Z̄_all.
pub fn verify_logical_algebra(spec: &CodeSpec) -> Result<LogicalAlgebraReport> {
    require_ext(spec)?;
    let basis = LogicalBasis::new(*spec)?;
    let k = spec.k as usize;
    let xs = (0..k)
        .map(|l| build_logical_operator(LogicalKind::XEll, Some(l), spec))
        .collect::<Result<Vec<_>>>()?;
    let zs = (0..k)
        .map(|l| build_logical_operator(LogicalKind::ZEll, Some(l), spec))
        .collect::<Result<Vec<_>>>()?;
    let x_all = build_logical_operator(LogicalKind::XAll, None, spec)?;
    let z_all = build_logical_operator(LogicalKind::ZAll, None, spec)?;
    let labels: Vec<LogicalLabel> = basis.labels().collect();
    let mut checks = Vec::new();
    let tol = EQ_TOL;

    let mut unitary: f64 = 0.0;
    for op in xs.iter().chain(&zs).chain([&x_all, &z_all]) {
        unitary = unitary.max(op.map.unitarity_defect()?);
    }
    checks.push(CheckResult::at_most("unitary", unitary, tol));

    let mut hermitian: f64 = 0.0;
    for op in xs.iter().chain([&x_all]) {
        let adj = op.map.adjoint();
        for cw in basis.codewords() {
            hermitian = hermitian.max(op.apply(cw)?.max_abs_diff(&adj.apply(cw)?)?);
        }
    }
    checks.push(CheckResult::at_most("x_hermitian", hermitian, tol));

    for l in 0..k {
        let (x, z) = (&xs[l], &zs[l]);
        checks.push(CheckResult::at_most(
            format!("x{l}_squared"),
            code_defect(&basis, |s| x.apply(&x.apply(s)?), same)?,
            tol,
        ));
        checks.push(CheckResult::at_most(
            format!("z{l}_squared"),
            code_defect(&basis, |s| z.apply(&z.apply(s)?), same)?,
            tol,
        ));
        checks.push(CheckResult::at_most(
            format!("x{l}z{l}_anticommute"),
            code_defect(
                &basis,
                |s| x.apply(&z.apply(s)?)?.add(&z.apply(&x.apply(s)?)?),
                zero_target,
            )?,
            tol,
        ));
        // Ȳ = −iZ̄X̄, so Ȳ² = −Z̄X̄Z̄X̄.
        checks.push(CheckResult::at_most(
            format!("y{l}_squared"),
            code_defect(
                &basis,
                |s| {
                    Ok(z.apply(&x.apply(&z.apply(&x.apply(s)?)?)?)?
                        .scaled(Complex64::new(-1.0, 0.0)))
                },
                same,
            )?,
            tol,
        ));
        checks.push(CheckResult::at_most(
            format!("x{l}_action"),
            code_defect(
                &basis,
                |s| x.apply(s),
                |j, _| Ok(basis.codeword(&labels[j].flipped(l)).clone()),
            )?,
            tol,
        ));
        checks.push(CheckResult::at_most(
            format!("z{l}_action"),
            code_defect(
                &basis,
                |s| z.apply(s),
                |j, s| {
                    Ok(if labels[j].bits()[l] == 1 {
                        s.scaled(Complex64::new(-1.0, 0.0))
                    } else {
                        s.clone()
                    })
                },
            )?,
            tol,
        ));
        checks.push(CheckResult::at_most(
            format!("h{l}_unitary"),
            hadamard_defect(&basis, x, z)?,
            tol,
        ));
        for m in (0..k).filter(|&m| m != l) {
            let zm = &zs[m];
            checks.push(CheckResult::at_most(
                format!("x{l}z{m}_commute"),
                code_defect(
                    &basis,
                    |s| {
                        x.apply(&zm.apply(s)?)?
                            .add_scaled(Complex64::new(-1.0, 0.0), &zm.apply(&x.apply(s)?)?)
                    },
                    zero_target,
                )?,
                tol,
            ));
        }
    }

    let x_prod = |s: &PureState| xs.iter().try_fold(s.clone(), |acc, x| x.apply(&acc));
    checks.push(CheckResult::at_most(
        "x_all_equals_product",
        code_defect(&basis, |s| x_all.apply(s), |_, s| x_prod(s))?,
        tol,
    ));
    checks.push(CheckResult::holds(
        "x_all_single_mode",
        x_all.map.support_modes().map(|m| m.len()) == Some(1),
    ));
    checks.push(CheckResult::at_most(
        "z_all_action",
        code_defect(
            &basis,
            |s| z_all.apply(s),
            |j, s| {
                Ok(if labels[j].weight() % 2 == 1 {
                    s.scaled(Complex64::new(-1.0, 0.0))
                } else {
                    s.clone()
                })
            },
        )?,
        tol,
    ));

    Ok(LogicalAlgebraReport {
        spec: *spec,
        pass: all_pass(&checks),
        checks,
    })
}

/// H̄ = (X̄+Z̄)/√2 compressed to the code space: leakage plus ‖H†H − I‖.
fn hadamard_defect(basis: &LogicalBasis, x: &LogicalOperator, z: &LogicalOperator) -> Result<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let images = basis
        .codewords()
        .iter()
        .map(|s| {
            Ok(x.apply(s)?
                .add(&z.apply(s)?)?
                .scaled(Complex64::new(h, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for (i, a) in images.iter().enumerate() {
        let in_code: f64 = basis
            .codewords()
            .iter()
            .map(|cw| cw.inner(a).map(|c| c.norm_sqr()))
            .sum::<Result<f64>>()?;
        worst = worst.max((a.norm_sqr() - in_code).abs());
        for (j, b) in images.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b)? - target).norm());
        }
    }
    Ok(worst)
}

/// How measurement outcomes of the protocol are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeSelector {
    EnumerateAll,
    Sampled(u64),
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolTrace {
    pub alpha: Complex64,
    pub beta: Complex64,
    /// (Ẑ⊗Z̄ outcome, physical X̂ outcome).
    pub outcomes: (i8, i8),
    pub probability: f64,
    /// Normalized joint state right after the Ẑ⊗Z̄ measurement.
    pub after_parity: PureState,
    pub final_state: PureState,
    pub fidelity_to_target: f64,
}

struct ProtocolOps {
    layout: ModeLayout,
    zz: LinearMap,
    x_bar: LinearMap,
    z_bar: LinearMap,
}

fn protocol_ops(spec: &CodeSpec) -> Result<ProtocolOps> {
    let qubit = ModeLayout::new(vec![1])?;
    let layout = qubit.concat(&spec.layout());
    let z_phys =
        ModeOperator::diagonal(1, |n| Complex64::new(if n == 0 { 1.0 } else { -1.0 }, 0.0));
    let z_bar = build_logical_operator(LogicalKind::ZEll, Some(0), spec)?.map;
    let mut zz = vec![z_phys];
    zz.extend_from_slice(z_bar.mode_factors().expect("product form"));
    let x_bar = build_logical_operator(LogicalKind::XEll, Some(0), spec)?.map;
    Ok(ProtocolOps {
        layout,
        zz: LinearMap::product(zz)?,
        x_bar,
        z_bar,
    })
}

/// (I + sign·ZZ̄)/2 applied to `state`.
fn parity_projection(ops: &ProtocolOps, state: &PureState, sign: f64) -> Result<PureState> {
    let flipped = ops.zz.apply(state)?;
    Ok(state
        .add_scaled(Complex64::new(sign, 0.0), &flipped)?
        .scaled(Complex64::new(0.5, 0.0)))
}

fn pick<R: Rng>(rng: &mut R, p_plus: f64) -> Vec<i8> {
    if rng.random::<f64>() < p_plus {
        vec![1]
    } else {
        vec![-1]
    }
}

/// Teleports α|0⟩+β|1⟩ from a physical qubit into α|0̄⟩+β|1̄⟩.
///
/// The physical qubit is mode 0 with cutoff 1. |+̄⟩ is prepared exactly.
pub fn run_encoding_protocol(
    alpha: Complex64,
    beta: Complex64,
    spec: &CodeSpec,
    selector: OutcomeSelector,
) -> Result<Vec<ProtocolTrace>> {
    require_ext(spec)?;
    if spec.k != 1 {
        return Err(Error::Unsupported(format!(
            "the encoding protocol needs K = 1, got {}",
            spec.k
        )));
    }
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > EQ_TOL {
        return Err(Error::NotNormalized { norm_sqr: norm });
    }
    let basis = LogicalBasis::new(*spec)?;
    let (zero, one) = (&basis.codewords()[0], &basis.codewords()[1]);
    let plus = zero
        .add(one)?
        .scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let target = zero.scaled(alpha).add_scaled(beta, one)?;
    let qubit = ModeLayout::new(vec![1])?;
    let input = PureState::from_components(qubit, [(vec![0], alpha), (vec![1], beta)])?;
    let ops = protocol_ops(spec)?;
    let joint = input.tensor(&plus);
    debug_assert_eq!(joint.layout(), &ops.layout);

    let mut rng = match selector {
        OutcomeSelector::Sampled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        OutcomeSelector::EnumerateAll => None,
    };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut traces = Vec::new();
    let p_plus = parity_projection(&ops, &joint, 1.0)?.norm_sqr();
    let first = match rng.as_mut() {
        Some(r) => pick(r, p_plus),
        None => vec![1, -1],
    };
    for m1 in first {
        let projected = parity_projection(&ops, &joint, m1 as f64)?;
        let p1 = projected.norm_sqr();
        if p1 <= 0.0 {
            continue;
        }
        let after_parity = projected.normalized()?;
        let corrected = if m1 == -1 {
            let x_joint = LinearMap::product(
                std::iter::once(ModeOperator::identity(1))
                    .chain(
                        ops.x_bar
                            .mode_factors()
                            .expect("product form")
                            .iter()
                            .cloned(),
                    )
                    .collect(),
            )?;
            x_joint.apply(&after_parity)?
        } else {
            after_parity.clone()
        };
        let bra_plus = [Complex64::new(h, 0.0), Complex64::new(h, 0.0)];
        let p_x_plus = corrected.contract_mode(0, &bra_plus)?.norm_sqr();
        let second = match rng.as_mut() {
            Some(r) => pick(r, p_x_plus),
            None => vec![1, -1],
        };
        for m2 in second {
            let bra = [Complex64::new(h, 0.0), Complex64::new(m2 as f64 * h, 0.0)];
            let reduced = corrected.contract_mode(0, &bra)?;
            let p2 = reduced.norm_sqr();
            if p2 <= 0.0 {
                continue;
            }
            let mut final_state = reduced.normalized()?;
            if m2 == -1 {
                final_state = ops.z_bar.apply(&final_state)?;
            }
            let fidelity = target.inner(&final_state)?.norm_sqr().min(1.0);
            traces.push(ProtocolTrace {
                alpha,
                beta,
                outcomes: (m1, m2),
                probability: p1 * p2,
                after_parity: after_parity.clone(),
                final_state,
                fidelity_to_target: fidelity,
            });
        }
    }
    Ok(traces)
}
