//! Amplitude damping and collective coherent (free-evolution) errors.

use std::fmt;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BranchEnsemble, LinearMap, ModeLayout, ModeOperator, PureState};

/// Per-excitation decay probability γ ∈ [0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DampingParam(f64);

impl DampingParam {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in [0, 1), got {gamma}"
            )));
        }
        Ok(Self(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// γ = 1 − exp(−Δt/T₁).
pub fn damping_from_lifetime(delta_t: f64, t1: f64) -> Result<DampingParam> {
    if !(t1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "T1 must be positive, got {t1}"
        )));
    }
    if !(delta_t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be nonnegative, got {delta_t}"
        )));
    }
    let gamma = -(-delta_t / t1).exp_m1();
    // exp underflow for very long durations would give exactly 1
    DampingParam::new(gamma.min(1.0 - f64::EPSILON))
}

/// Number of excitations lost on each mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossPattern(Vec<u32>);

impl LossPattern {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self(vec![0; n_modes])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl fmt::Display for LossPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl std::str::FromStr for LossPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        trimmed
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidParameter(format!("bad loss pattern {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LossPattern)
    }
}

/// Duration of the unknown free evolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcParams {
    pub delta_t: f64,
}

impl CcParams {
    pub fn new(delta_t: f64) -> Result<Self> {
        if !(delta_t >= 0.0) || !delta_t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Δt must be finite and nonnegative, got {delta_t}"
            )));
        }
        Ok(Self { delta_t })
    }
}

/// Exact binomial coefficient C(n, k) as f64.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc.to_f64().unwrap_or(f64::INFINITY)
}

fn kraus_magnitude(n: u32, ell: u32, gamma: f64) -> f64 {
    (binomial(n, ell) * (1.0 - gamma).powi((n - ell) as i32) * gamma.powi(ell as i32)).sqrt()
}

/// Single-mode damping Kraus operator Â_ℓ on occupations 0..=cutoff.
pub fn single_mode_kraus(ell: u32, gamma: DampingParam, cutoff: u32) -> Result<ModeOperator> {
    if ell > cutoff {
        return Err(Error::InvalidParameter(format!(
            "loss count {ell} exceeds cutoff {cutoff}"
        )));
    }
    let g = gamma.value();
    ModeOperator::from_entries(
        cutoff,
        cutoff,
        (ell..=cutoff).map(|k| (k - ell, k, Complex64::new(kraus_magnitude(k, ell, g), 0.0))),
    )
}

/// 𝒜̂_a = ⊗_j Â_{a_j}.
pub fn multi_mode_kraus(
    pattern: &LossPattern,
    gamma: DampingParam,
    layout: &ModeLayout,
) -> Result<LinearMap> {
    if pattern.len() != layout.num_modes() {
        return Err(Error::InvalidParameter(format!(
            "loss pattern has {} entries for {} modes",
            pattern.len(),
            layout.num_modes()
        )));
    }
    let factors = pattern
        .entries()
        .iter()
        .zip(layout.cutoffs())
        .map(|(&a, &c)| {
            if a == 0 && gamma.value() == 0.0 {
                Ok(ModeOperator::identity(c))
            } else {
                single_mode_kraus(a, gamma, c)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LinearMap::product(factors)
}

/// Every pattern of `n_modes` entries with weight ≤ `max_weight`, lexicographic.
pub fn enumerate_loss_patterns(n_modes: usize, max_weight: u32) -> Vec<LossPattern> {
    fn rec(prefix: &mut Vec<u32>, remaining_modes: usize, budget: u32, out: &mut Vec<LossPattern>) {
        if remaining_modes == 0 {
            out.push(LossPattern(prefix.clone()));
            return;
        }
        for a in 0..=budget {
            prefix.push(a);
            rec(prefix, remaining_modes - 1, budget - a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(
        &mut Vec::with_capacity(n_modes),
        n_modes,
        max_weight,
        &mut out,
    );
    out
}

/// Free evolution ⊗_j exp(−i n̂_j Δt) with the zero-point phase dropped.
pub fn cc_unitary(params: CcParams, layout: &ModeLayout) -> LinearMap {
    let dt = params.delta_t;
    LinearMap::product(
        layout
            .cutoffs()
            .iter()
            .map(|&c| {
                if dt == 0.0 {
                    ModeOperator::identity(c)
                } else {
                    ModeOperator::diagonal(c, |n| Complex64::from_polar(1.0, -(n as f64) * dt))
                }
            })
            .collect(),
    )
    .expect("layout has at least one mode")
}

/// 𝒜̂_a|s⟩, or the zero state when some a_j exceeds that mode's cutoff.
pub fn damage(state: &PureState, pattern: &LossPattern, gamma: DampingParam) -> Result<PureState> {
    let layout = state.layout();
    if pattern.len() == layout.num_modes()
        && pattern
            .entries()
            .iter()
            .zip(layout.cutoffs())
            .any(|(a, c)| a > c)
    {
        return Ok(PureState::zero(layout.clone()));
    }
    multi_mode_kraus(pattern, gamma, layout)?.apply(state)
}

/// Damaged branches 𝒜̂_a Û_CC |s⟩ for every pattern of weight ≤ `max_weight`.
///
/// Zero branches are dropped. The probability mass of patterns beyond
/// `max_weight` is reported in `tail_probability`.
pub fn apply_ad_channel(
    state: &PureState,
    gamma: DampingParam,
    max_weight: u32,
    cc: Option<CcParams>,
) -> Result<BranchEnsemble<LossPattern>> {
    let layout = state.layout();
    let evolved = match cc {
        Some(p) => cc_unitary(p, layout).apply(state)?,
        None => state.clone(),
    };
    let mut branches = Vec::new();
    for pattern in enumerate_loss_patterns(layout.num_modes(), max_weight) {
        let damaged = damage(&evolved, &pattern, gamma)?;
        if !damaged.is_empty() {
            branches.push((pattern, damaged));
        }
    }
    let mut ensemble = BranchEnsemble {
        branches,
        tail_probability: 0.0,
    };
    ensemble.tail_probability = (evolved.norm_sqr() - ensemble.total_probability()).max(0.0);
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::EQ_TOL;

    #[test]
    fn binomials_are_exact() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(2, 3), 0.0);
        assert_eq!(binomial(60, 30), 118264581564861424.0);
        assert!(binomial(200, 100) > 9.0e58);
    }

    #[test]
    fn no_damping_gives_identity_and_zero() {
        let g = DampingParam::new(0.0).unwrap();
        let a0 = single_mode_kraus(0, g, 4).unwrap();
        assert!(a0.is_identity());
        for ell in 1..=4 {
            let a = single_mode_kraus(ell, g, 4).unwrap();
            for n in 0..=4 {
                assert!(a.column(n).is_empty());
            }
        }
    }

    #[test]
    fn single_loss_element_on_two() {
        let g = DampingParam::new(0.5).unwrap();
        let a1 = single_mode_kraus(1, g, 2).unwrap();
        assert!((a1.element(1, 2).re - 0.5f64.sqrt()).abs() < 1e-15);
        let layout = ModeLayout::uniform(1, 2).unwrap();
        let out = LinearMap::product(vec![a1])
            .unwrap()
            .apply(&PureState::basis(layout, vec![2]).unwrap())
            .unwrap();
        assert!((out.amplitude(&[1]).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn kraus_index_beyond_cutoff_rejected() {
        assert!(single_mode_kraus(3, DampingParam::new(0.1).unwrap(), 2).is_err());
    }

    #[test]
    fn damping_param_range() {
        assert!(DampingParam::new(-0.1).is_err());
        assert!(DampingParam::new(1.0).is_err());
        assert!(DampingParam::new(0.999).is_ok());
    }

    #[test]
    fn lifetime_conversion() {
        assert_eq!(damping_from_lifetime(0.0, 3.0).unwrap().value(), 0.0);
        assert!(
            (damping_from_lifetime(2.0, 2.0).unwrap().value() - 0.6321205588285577).abs() < 1e-15
        );
        assert!(damping_from_lifetime(1e6, 1.0).unwrap().value() > 0.999_999);
        assert!(damping_from_lifetime(1.0, 0.0).is_err());
        assert!(damping_from_lifetime(1.0, -2.0).is_err());
    }

    #[test]
    fn pattern_enumeration_small_cases() {
        let p = enumerate_loss_patterns(2, 1);
        let raw: Vec<Vec<u32>> = p.iter().map(|x| x.entries().to_vec()).collect();
        assert_eq!(raw, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(enumerate_loss_patterns(2, 2).len(), 6);
        assert_eq!(
            enumerate_loss_patterns(1, 0),
            vec![LossPattern::new(vec![0])]
        );
        assert_eq!(LossPattern::new(vec![1, 0, 2]).weight(), 3);
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(
            "1,0,2".parse::<LossPattern>().unwrap(),
            LossPattern::new(vec![1, 0, 2])
        );
        assert_eq!(
            "(0, 1)".parse::<LossPattern>().unwrap(),
            LossPattern::new(vec![0, 1])
        );
        assert!("1,x".parse::<LossPattern>().is_err());
    }

    #[test]
    fn pattern_length_mismatch_rejected() {
        let layout = ModeLayout::uniform(2, 2).unwrap();
        let g = DampingParam::new(0.1).unwrap();
        assert!(multi_mode_kraus(&LossPattern::new(vec![1]), g, &layout).is_err());
    }

    #[test]
    fn multi_mode_kraus_on_code_state() {
        let gamma = 0.2;
        let g = DampingParam::new(gamma).unwrap();
        let layout = ModeLayout::uniform(2, 2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let s = PureState::from_real_components(layout.clone(), [(vec![0, 0], h), (vec![2, 2], h)])
            .unwrap();
        let out = multi_mode_kraus(&LossPattern::new(vec![1, 0]), g, &layout)
            .unwrap()
            .apply(&s)
            .unwrap();
        let expected = (2.0 * gamma * (1.0 - gamma)).sqrt() * (1.0 - gamma) * h;
        assert_eq!(out.len(), 1);
        assert!((out.amplitude(&[1, 2]).re - expected).abs() < 1e-15);
    }

    #[test]
    fn cc_unitary_phases() {
        let layout = ModeLayout::uniform(2, 2).unwrap();
        let s = PureState::basis(layout.clone(), vec![2, 2]).unwrap();
        let id = cc_unitary(CcParams::new(0.0).unwrap(), &layout)
            .apply(&s)
            .unwrap();
        assert_eq!(id, s);
        let dt = 0.37;
        let u = cc_unitary(CcParams::new(dt).unwrap(), &layout);
        let out = u.apply(&s).unwrap();
        assert!((out.amplitude(&[2, 2]) - Complex64::from_polar(1.0, -4.0 * dt)).norm() < EQ_TOL);
        assert!(u.unitarity_defect().unwrap() < EQ_TOL);
        assert!(u.to_sparse().unwrap().unitarity_defect().unwrap() < EQ_TOL);
    }

    #[test]
    fn channel_without_damping_has_one_branch() {
        let layout = ModeLayout::uniform(2, 2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let s =
            PureState::from_real_components(layout, [(vec![0, 0], h), (vec![2, 2], h)]).unwrap();
        let e = apply_ad_channel(&s, DampingParam::new(0.0).unwrap(), 2, None).unwrap();
        assert_eq!(e.branches.len(), 1);
        assert_eq!(e.branches[0].0, LossPattern::zeros(2));
        assert!((e.branches[0].1.norm_sqr() - 1.0).abs() < EQ_TOL);
        assert!(e.tail_probability < EQ_TOL);
    }

    #[test]
    fn complete_channel_has_no_tail() {
        let layout = ModeLayout::uniform(2, 2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let s =
            PureState::from_real_components(layout, [(vec![0, 0], h), (vec![2, 2], h)]).unwrap();
        for gamma in [0.01, 0.3, 0.9] {
            let e = apply_ad_channel(&s, DampingParam::new(gamma).unwrap(), 4, None).unwrap();
            assert!(e.tail_probability < EQ_TOL);
            assert!((e.total_probability() - 1.0).abs() < EQ_TOL);
            let truncated =
                apply_ad_channel(&s, DampingParam::new(gamma).unwrap(), 1, None).unwrap();
            assert!(
                (truncated.total_probability() + truncated.tail_probability - 1.0).abs() < EQ_TOL
            );
            assert!(truncated.tail_probability > 0.0);
        }
    }
}
