//! Codeword constructors for the binomial, qubit and extended binomial families.
//!
//! Every multi-group family shares one outer structure: the `w` buffer
//! groups run over all bit strings `a`, and the `K` data groups carry the
//! label `i` when `wt(a)` is even and its complement `i'` when it is odd.
//! The families differ only in how one group bit is written into modes.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::binomial;
use crate::error::{Error, Result};
use crate::fock::{ModeLayout, PureState, EQ_TOL};

/// Code family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeFamily {
    #[serde(rename = "one-bin")]
    OneModeBinomial,
    #[serde(rename = "two-bin")]
    TwoModeBinomial,
    #[serde(rename = "qubit-ad")]
    QubitShorAd,
    #[serde(rename = "ext-bin")]
    ExtendedBinomial,
    #[serde(rename = "ce-ext-bin")]
    CeExtendedBinomial,
}

impl CodeFamily {
    pub const ALL: [CodeFamily; 5] = [
        CodeFamily::OneModeBinomial,
        CodeFamily::TwoModeBinomial,
        CodeFamily::QubitShorAd,
        CodeFamily::ExtendedBinomial,
        CodeFamily::CeExtendedBinomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodeFamily::OneModeBinomial => "one-bin",
            CodeFamily::TwoModeBinomial => "two-bin",
            CodeFamily::QubitShorAd => "qubit-ad",
            CodeFamily::ExtendedBinomial => "ext-bin",
            CodeFamily::CeExtendedBinomial => "ce-ext-bin",
        }
    }

    /// Families that encode a single qubit only.
    pub fn is_single_qubit(self) -> bool {
        matches!(
            self,
            CodeFamily::OneModeBinomial | CodeFamily::TwoModeBinomial
        )
    }
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CodeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown code family {s:?}")))
    }
}

/// A code family together with its correctable weight `w` and logical qubit count `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeSpec {
    pub family: CodeFamily,
    pub w: u32,
    pub k: u32,
}

impl CodeSpec {
    pub fn new(family: CodeFamily, w: u32, k: u32) -> Result<Self> {
        if w == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!(
                "w and K must be positive (w={w}, K={k})"
            )));
        }
        if family.is_single_qubit() && k != 1 {
            return Err(Error::InvalidParameter(format!(
                "{family} encodes exactly one qubit (K={k})"
            )));
        }
        Ok(Self { family, w, k })
    }

    pub fn extended(w: u32, k: u32) -> Result<Self> {
        Self::new(CodeFamily::ExtendedBinomial, w, k)
    }

    pub fn num_modes(&self) -> usize {
        let (w, k) = (self.w as usize, self.k as usize);
        match self.family {
            CodeFamily::OneModeBinomial => 1,
            CodeFamily::TwoModeBinomial => 2,
            CodeFamily::QubitShorAd => (w + 1) * (w + k),
            CodeFamily::ExtendedBinomial => w + k,
            CodeFamily::CeExtendedBinomial => 2 * (w + k),
        }
    }

    /// Per-mode cutoff; codewords never exceed it and damping never raises occupations.
    pub fn mode_cutoff(&self) -> u32 {
        match self.family {
            CodeFamily::OneModeBinomial | CodeFamily::TwoModeBinomial => {
                (self.w + 1) * (self.w + 1)
            }
            CodeFamily::QubitShorAd => 1,
            CodeFamily::ExtendedBinomial | CodeFamily::CeExtendedBinomial => self.w + 1,
        }
    }

    pub fn layout(&self) -> ModeLayout {
        ModeLayout::uniform(self.num_modes(), self.mode_cutoff()).expect("spec is validated")
    }

    pub fn num_codewords(&self) -> usize {
        1 << self.k
    }

    /// Occupations of bosonic families are multiples of this spacing.
    pub fn spacing(&self) -> u32 {
        match self.family {
            CodeFamily::QubitShorAd => 1,
            _ => self.w + 1,
        }
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(w={},K={})", self.family, self.w, self.k)
    }
}

/// Logical label i = i_0 i_1 … i_{K−1}.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogicalLabel(Vec<u8>);

impl LogicalLabel {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidLabel {
                label: format!("{bits:?}"),
                expected: bits.len(),
            });
        }
        Ok(Self(bits))
    }

    /// Label whose bits are the binary digits of `index` (i_0 most significant).
    pub fn from_index(index: usize, k: u32) -> Self {
        Self((0..k).rev().map(|b| ((index >> b) & 1) as u8).collect())
    }

    pub fn parse(s: &str, k: u32) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(()),
            })
            .collect::<std::result::Result<Vec<u8>, ()>>();
        match bits {
            Ok(b) if b.len() == k as usize => Ok(Self(b)),
            _ => Err(Error::InvalidLabel {
                label: s.to_string(),
                expected: k as usize,
            }),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| 1 - b).collect())
    }

    pub fn flipped(&self, bit: usize) -> Self {
        let mut bits = self.0.clone();
        bits[bit] ^= 1;
        Self(bits)
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().map(|&b| b as u32).sum()
    }
}

impl fmt::Display for LogicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

fn check_label(label: &LogicalLabel, k: u32) -> Result<()> {
    if label.len() != k as usize {
        return Err(Error::InvalidLabel {
            label: label.to_string(),
            expected: k as usize,
        });
    }
    Ok(())
}

/// Mode layout of the single-mode binomial variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinomialVariant {
    OneMode,
    TwoMode,
}

/// One- or two-mode binomial codeword for logical bit `bit`.
pub fn binomial_codeword(w: u32, bit: u8, variant: BinomialVariant) -> Result<PureState> {
    if w == 0 {
        return Err(Error::InvalidParameter("w must be positive".into()));
    }
    if bit > 1 {
        return Err(Error::InvalidLabel {
            label: bit.to_string(),
            expected: 1,
        });
    }
    let s = w + 1;
    let norm = 2f64.powi(w as i32);
    let terms = (bit as u32..=s)
        .step_by(2)
        .map(|n| {
            let amp = (binomial(s, n) / norm).sqrt();
            let occ = match variant {
                BinomialVariant::OneMode => vec![n * s],
                BinomialVariant::TwoMode => vec![n * s, (s - n) * s],
            };
            (occ, amp)
        })
        .collect::<Vec<_>>();
    let modes = match variant {
        BinomialVariant::OneMode => 1,
        BinomialVariant::TwoMode => 2,
    };
    PureState::from_real_components(ModeLayout::uniform(modes, s * s)?, terms)?.normalized()
}

/// K independent one-mode binomial codewords, one mode per logical qubit.
pub fn binomial_register_codeword(w: u32, label: &LogicalLabel) -> Result<PureState> {
    let mut bits = label.bits().iter();
    let first = bits.next().ok_or(Error::InvalidLabel {
        label: String::new(),
        expected: 1,
    })?;
    let mut state = binomial_codeword(w, *first, BinomialVariant::OneMode)?;
    for &b in bits {
        state = state.tensor(&binomial_codeword(w, b, BinomialVariant::OneMode)?);
    }
    Ok(state)
}

/// Sums over all buffer strings `a ∈ {0,1}^w`; data groups carry `i` for even
/// `wt(a)` and `i'` for odd. `write_group` appends one group's modes.
fn shared_parity_codeword<F>(
    w: u32,
    label: &LogicalLabel,
    layout: ModeLayout,
    write_group: F,
) -> Result<PureState>
where
    F: Fn(u8, &mut Vec<u32>),
{
    let complement = label.complement();
    let amp = 2f64.powf(-(w as f64) / 2.0);
    let mut terms = Vec::with_capacity(1 << w);
    for a in 0u64..(1u64 << w) {
        let mut occ = Vec::with_capacity(layout.num_modes());
        for j in (0..w).rev() {
            write_group(((a >> j) & 1) as u8, &mut occ);
        }
        let data = if a.count_ones() % 2 == 0 {
            label
        } else {
            &complement
        };
        for &b in data.bits() {
            write_group(b, &mut occ);
        }
        terms.push((occ, amp));
    }
    PureState::from_real_components(layout, terms)?.normalized()
}

/// Qubit AD code on (w+1)(w+K) two-level modes, each group a (w+1)-fold repetition.
pub fn qubit_shor_codeword(w: u32, k: u32, label: &LogicalLabel) -> Result<PureState> {
    let spec = CodeSpec::new(CodeFamily::QubitShorAd, w, k)?;
    check_label(label, k)?;
    shared_parity_codeword(w, label, spec.layout(), |b, occ| {
        occ.extend(std::iter::repeat_n(b as u32, w as usize + 1))
    })
}

/// Extended binomial codeword on w+K modes, written directly in the number basis.
pub fn extended_binomial_codeword(w: u32, k: u32, label: &LogicalLabel) -> Result<PureState> {
    let spec = CodeSpec::extended(w, k)?;
    check_label(label, k)?;
    shared_parity_codeword(w, label, spec.layout(), |b, occ| {
        occ.push(b as u32 * (w + 1))
    })
}

/// Extended binomial codeword assembled from the inner repetition states:
/// (|+ī⟩ + |−ī⟩)/√2 with |±ī⟩ = |±⟩^{⊗w} ⊗ (|i⟩ ± |i'⟩)/√2.
pub fn extended_binomial_via_inner_code(w: u32, k: u32, label: &LogicalLabel) -> Result<PureState> {
    CodeSpec::extended(w, k)?;
    check_label(label, k)?;
    let s = w + 1;
    let one = ModeLayout::uniform(1, s)?;
    let h = 1.0 / 2f64.sqrt();
    let inner_pm = |sign: f64| {
        PureState::from_real_components(one.clone(), [(vec![0], h), (vec![s], sign * h)])
    };
    let repetition = |l: &LogicalLabel| -> Result<PureState> {
        let occ = l.bits().iter().map(|&b| b as u32 * s).collect();
        PureState::basis(ModeLayout::uniform(k as usize, s)?, occ)
    };
    let data_i = repetition(label)?;
    let data_c = repetition(&label.complement())?;

    let branch = |sign: f64| -> Result<PureState> {
        let buffer_state = inner_pm(sign)?;
        let mut state = buffer_state.clone();
        for _ in 1..w {
            state = state.tensor(&buffer_state);
        }
        let data = data_i
            .add_scaled(Complex64::new(sign, 0.0), &data_c)?
            .scaled(Complex64::new(h, 0.0));
        Ok(state.tensor(&data))
    };
    branch(1.0)?
        .add(&branch(-1.0)?)?
        .scaled(Complex64::new(h, 0.0))
        .normalized()
}

/// Constant-excitation variant: each mode pairs with its complement,
/// (|0⟩, |w+1⟩) ↦ (|0⟩|w+1⟩, |w+1⟩|0⟩), on 2(w+K) modes.
pub fn ce_extended_binomial_codeword(w: u32, k: u32, label: &LogicalLabel) -> Result<PureState> {
    let spec = CodeSpec::new(CodeFamily::CeExtendedBinomial, w, k)?;
    check_label(label, k)?;
    let s = w + 1;
    shared_parity_codeword(w, label, spec.layout(), |b, occ| {
        occ.push(b as u32 * s);
        occ.push((1 - b as u32) * s);
    })
}

/// Merges all two-level modes into one oscillator: |n_0 … n_{N−1}⟩ ↦ |Σ n_j⟩.
///
/// Components landing on the same excitation number combine in quadrature
/// (magnitude √Σ|a|², phase of the coherent sum), so a block of C(N, m)
/// equal-weight strings carries the binomial weight √C(N, m) of that level.
pub fn merge_modes_to_single(state: &PureState) -> Result<PureState> {
    if state.layout().cutoffs().iter().any(|&c| c != 1)
        || state.components().any(|(o, _)| o.iter().any(|&n| n > 1))
    {
        return Err(Error::InvalidParameter(
            "merging requires binary occupations on every mode".into(),
        ));
    }
    let total = state.layout().num_modes() as u32;
    let mut levels: std::collections::BTreeMap<u32, (f64, Complex64)> = Default::default();
    for (o, a) in state.components() {
        let entry = levels.entry(o.total() as u32).or_default();
        entry.0 += a.norm_sqr();
        entry.1 += a;
    }
    let layout = ModeLayout::uniform(1, total)?;
    PureState::from_components(
        layout,
        levels.into_iter().map(|(n, (weight, coherent))| {
            let phase = if coherent.norm() > 0.0 {
                coherent / coherent.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            (vec![n], phase * weight.sqrt())
        }),
    )?
    .normalized()
}

/// The 2^K codewords of a code, indexed by [`LogicalLabel::index`].
#[derive(Clone, Debug)]
pub struct LogicalBasis {
    spec: CodeSpec,
    codewords: Vec<PureState>,
}

impl LogicalBasis {
    pub fn new(spec: CodeSpec) -> Result<Self> {
        let codewords = (0..spec.num_codewords())
            .map(|i| codeword(&spec, &LogicalLabel::from_index(i, spec.k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, codewords })
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.codewords.len()
    }

    pub fn codewords(&self) -> &[PureState] {
        &self.codewords
    }

    pub fn codeword(&self, label: &LogicalLabel) -> &PureState {
        &self.codewords[label.index()]
    }

    pub fn labels(&self) -> impl Iterator<Item = LogicalLabel> + '_ {
        (0..self.codewords.len()).map(|i| LogicalLabel::from_index(i, self.spec.k))
    }

    /// Σ_i c_i |ī⟩.
    pub fn superpose(&self, coeffs: &[Complex64]) -> Result<PureState> {
        if coeffs.len() != self.codewords.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for {} codewords",
                coeffs.len(),
                self.codewords.len()
            )));
        }
        let mut acc = PureState::zero(self.spec.layout());
        for (c, cw) in coeffs.iter().zip(&self.codewords) {
            acc = acc.add_scaled(*c, cw)?;
        }
        Ok(acc)
    }

    /// Max |G_ij − δ_ij| over the Gram matrix of the codewords.
    pub fn orthonormality_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.codewords.iter().enumerate() {
            for (j, b) in self.codewords.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b)? - target).norm());
            }
        }
        Ok(worst)
    }
}

/// Codeword of any family.
pub fn codeword(spec: &CodeSpec, label: &LogicalLabel) -> Result<PureState> {
    check_label(label, spec.k)?;
    match spec.family {
        CodeFamily::OneModeBinomial => {
            binomial_codeword(spec.w, label.bits()[0], BinomialVariant::OneMode)
        }
        CodeFamily::TwoModeBinomial => {
            binomial_codeword(spec.w, label.bits()[0], BinomialVariant::TwoMode)
        }
        CodeFamily::QubitShorAd => qubit_shor_codeword(spec.w, spec.k, label),
        CodeFamily::ExtendedBinomial => extended_binomial_codeword(spec.w, spec.k, label),
        CodeFamily::CeExtendedBinomial => ce_extended_binomial_codeword(spec.w, spec.k, label),
    }
}

/// Mean total excitation of every codeword.
#[derive(Clone, Debug, Serialize)]
pub struct MeanExcitationReport {
    pub spec: CodeSpec,
    pub per_label: Vec<(String, f64)>,
    /// (w+1)(w+K)/2 for the extended binomial family.
    pub closed_form: Option<f64>,
}

impl MeanExcitationReport {
    pub fn matches_closed_form(&self) -> bool {
        match self.closed_form {
            Some(c) => self.per_label.iter().all(|(_, m)| (m - c).abs() < EQ_TOL),
            None => true,
        }
    }
}

pub fn mean_excitation(basis: &LogicalBasis) -> Result<MeanExcitationReport> {
    let per_label = basis
        .labels()
        .zip(basis.codewords())
        .map(|(l, cw)| Ok((l.to_string(), cw.total_number_expectation()?)))
        .collect::<Result<Vec<_>>>()?;
    let spec = *basis.spec();
    let closed_form = (spec.family == CodeFamily::ExtendedBinomial)
        .then(|| ((spec.w + 1) * (spec.w + spec.k)) as f64 / 2.0);
    Ok(MeanExcitationReport {
        spec,
        per_label,
        closed_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> LogicalLabel {
        LogicalLabel::parse(s, s.len() as u32).unwrap()
    }

    fn state(modes: usize, cutoff: u32, terms: &[(&[u32], f64)]) -> PureState {
        PureState::from_real_components(
            ModeLayout::uniform(modes, cutoff).unwrap(),
            terms.iter().map(|(o, a)| (o.to_vec(), *a)),
        )
        .unwrap()
    }

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn label_parsing_and_indexing() {
        let l = label("011");
        assert_eq!(l.index(), 3);
        assert_eq!(LogicalLabel::from_index(3, 3), l);
        assert_eq!(l.complement().to_string(), "100");
        assert!(LogicalLabel::parse("01", 3).is_err());
        assert!(LogicalLabel::parse("0a", 2).is_err());
        assert!(LogicalLabel::from_bits(vec![0, 2]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(CodeSpec::new(CodeFamily::ExtendedBinomial, 0, 1).is_err());
        assert!(CodeSpec::new(CodeFamily::OneModeBinomial, 1, 2).is_err());
        let s = CodeSpec::new(CodeFamily::QubitShorAd, 2, 3).unwrap();
        assert_eq!(s.num_modes(), 15);
        assert_eq!(
            CodeSpec::new(CodeFamily::CeExtendedBinomial, 2, 3)
                .unwrap()
                .num_modes(),
            10
        );
        assert_eq!(
            "ce-ext-bin".parse::<CodeFamily>().unwrap(),
            CodeFamily::CeExtendedBinomial
        );
    }

    #[test]
    fn one_mode_binomial_w1() {
        let zero = binomial_codeword(1, 0, BinomialVariant::OneMode).unwrap();
        assert!(zero.approx_eq(&state(1, 4, &[(&[0], H), (&[4], H)]), EQ_TOL));
        let one = binomial_codeword(1, 1, BinomialVariant::OneMode).unwrap();
        assert!(one.approx_eq(&state(1, 4, &[(&[2], 1.0)]), EQ_TOL));
        assert!(binomial_codeword(1, 2, BinomialVariant::OneMode).is_err());
    }

    #[test]
    fn two_mode_binomial_w1() {
        let zero = binomial_codeword(1, 0, BinomialVariant::TwoMode).unwrap();
        assert!(zero.approx_eq(&state(2, 4, &[(&[0, 4], H), (&[4, 0], H)]), EQ_TOL));
        let one = binomial_codeword(1, 1, BinomialVariant::TwoMode).unwrap();
        assert!(one.approx_eq(&state(2, 4, &[(&[2, 2], 1.0)]), EQ_TOL));
        for cw in [zero, one] {
            assert!(cw.components().all(|(o, _)| o.total() == 4));
        }
    }

    #[test]
    fn qubit_codes_match_small_table_entries() {
        let z = qubit_shor_codeword(1, 1, &label("0")).unwrap();
        assert!(z.approx_eq(
            &state(4, 1, &[(&[0, 0, 0, 0], H), (&[1, 1, 1, 1], H)]),
            EQ_TOL
        ));
        let o = qubit_shor_codeword(1, 1, &label("1")).unwrap();
        assert!(o.approx_eq(
            &state(4, 1, &[(&[0, 0, 1, 1], H), (&[1, 1, 0, 0], H)]),
            EQ_TOL
        ));
        let t = qubit_shor_codeword(1, 2, &label("11")).unwrap();
        assert!(t.approx_eq(
            &state(6, 1, &[(&[0, 0, 1, 1, 1, 1], H), (&[1, 1, 0, 0, 0, 0], H)]),
            EQ_TOL
        ));
        assert!(qubit_shor_codeword(1, 2, &label("1")).is_err());
    }

    #[test]
    fn extended_binomial_small_cases() {
        let cases: [(&str, &[(&[u32], f64)]); 4] = [
            ("0", &[(&[0, 0], H), (&[2, 2], H)]),
            ("1", &[(&[0, 2], H), (&[2, 0], H)]),
            ("00", &[(&[0, 0, 0], H), (&[2, 2, 2], H)]),
            ("01", &[(&[0, 0, 2], H), (&[2, 2, 0], H)]),
        ];
        for (l, terms) in cases {
            let k = l.len() as u32;
            let cw = extended_binomial_codeword(1, k, &label(l)).unwrap();
            assert!(
                cw.approx_eq(&state(1 + k as usize, 2, terms), EQ_TOL),
                "label {l}"
            );
        }
    }

    #[test]
    fn inner_code_pipeline_matches_direct_expansion() {
        for w in 1..=3 {
            for k in 1..=3 {
                for idx in 0..(1usize << k) {
                    let l = LogicalLabel::from_index(idx, k);
                    let a = extended_binomial_codeword(w, k, &l).unwrap();
                    let b = extended_binomial_via_inner_code(w, k, &l).unwrap();
                    assert!(a.approx_eq(&b, EQ_TOL), "w={w} K={k} label {l}");
                }
            }
        }
    }

    /// Literal reading with the (−1)^{wt(i)} sign: label 1 collapses onto label 0 at w=K=1.
    #[test]
    fn literal_sign_convention_is_degenerate() {
        let w = 1;
        let s = w + 1;
        let l = label("1");
        let one = ModeLayout::uniform(1, s).unwrap();
        let pm = |sign: f64| {
            PureState::from_real_components(one.clone(), [(vec![0], H), (vec![s], sign * H)])
                .unwrap()
        };
        let data = |sign: f64| {
            PureState::from_real_components(one.clone(), [(vec![s], H), (vec![0], sign * H)])
                .unwrap()
        };
        let plus = pm(1.0).tensor(&data(1.0));
        let minus = pm(-1.0).tensor(&data(-1.0));
        let sign = if l.weight() % 2 == 0 { 1.0 } else { -1.0 };
        let literal = plus
            .add_scaled(Complex64::new(sign, 0.0), &minus)
            .unwrap()
            .normalized()
            .unwrap();
        let zero = extended_binomial_codeword(1, 1, &label("0")).unwrap();
        assert!(literal.approx_eq(&zero, EQ_TOL));
    }

    #[test]
    fn ce_codewords_w1_k1() {
        let z = ce_extended_binomial_codeword(1, 1, &label("0")).unwrap();
        assert!(z.approx_eq(
            &state(4, 2, &[(&[0, 2, 0, 2], H), (&[2, 0, 2, 0], H)]),
            EQ_TOL
        ));
        let o = ce_extended_binomial_codeword(1, 1, &label("1")).unwrap();
        assert!(o.approx_eq(
            &state(4, 2, &[(&[0, 2, 2, 0], H), (&[2, 0, 0, 2], H)]),
            EQ_TOL
        ));
    }

    #[test]
    fn ce_components_have_constant_excitation() {
        for w in 1..=3u32 {
            for k in 1..=3u32 {
                let basis =
                    LogicalBasis::new(CodeSpec::new(CodeFamily::CeExtendedBinomial, w, k).unwrap())
                        .unwrap();
                for cw in basis.codewords() {
                    assert!(cw
                        .components()
                        .all(|(o, _)| o.total() == ((w + k) * (w + 1)) as u64));
                }
            }
        }
    }

    #[test]
    fn merge_reproduces_one_mode_binomial() {
        for w in 1..=2 {
            for bit in 0..=1u8 {
                let q = qubit_shor_codeword(w, 1, &LogicalLabel::from_bits(vec![bit]).unwrap())
                    .unwrap();
                let merged = merge_modes_to_single(&q).unwrap();
                let b = binomial_codeword(w, bit, BinomialVariant::OneMode).unwrap();
                assert!(merged.approx_eq(&b, EQ_TOL), "w={w} bit={bit}");
            }
        }
    }

    #[test]
    fn merge_rejects_bosonic_modes() {
        let cw = extended_binomial_codeword(1, 1, &label("0")).unwrap();
        assert!(merge_modes_to_single(&cw).is_err());
    }

    #[test]
    fn mean_excitations() {
        let ext = LogicalBasis::new(CodeSpec::extended(1, 1).unwrap()).unwrap();
        let r = mean_excitation(&ext).unwrap();
        assert!(r.per_label.iter().all(|(_, m)| (m - 2.0).abs() < EQ_TOL));
        assert!(r.matches_closed_form());
        let ext2 = LogicalBasis::new(CodeSpec::extended(1, 2).unwrap()).unwrap();
        let r = mean_excitation(&ext2).unwrap();
        assert_eq!(r.per_label.len(), 4);
        assert!(r.per_label.iter().all(|(_, m)| (m - 3.0).abs() < EQ_TOL));
        let bin =
            LogicalBasis::new(CodeSpec::new(CodeFamily::OneModeBinomial, 1, 1).unwrap()).unwrap();
        let r = mean_excitation(&bin).unwrap();
        assert!(r.per_label.iter().all(|(_, m)| (m - 2.0).abs() < EQ_TOL));
        assert!(r.closed_form.is_none());
        let pair = binomial_register_codeword(1, &label("01")).unwrap();
        assert!((pair.total_number_expectation().unwrap() - 4.0).abs() < EQ_TOL);
    }
}
