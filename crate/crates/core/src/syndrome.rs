//! Syndrome extraction and lookup decoding for extended binomial codes.
//!
//! Three kinds of integer observables are measured, all modulo s = w+1:
//!
//! * chain: (n_i − n_{i+1})² for i in 0..w−1,
//! * bridge: (n_{w−1} − Σ_{data} n_j)²,
//! * mode readouts: n_j for every mode.
//!
//! After a loss pattern `a` of weight ≤ w every occupation is a multiple of
//! s minus a_j, so the readouts identify `a` uniquely. The squared chain and
//! bridge values only detect losses (±1 and ±2 collide modulo 3) and serve as
//! a consistency check on the readouts.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::channels::{damage, enumerate_loss_patterns, DampingParam, LossPattern};
use crate::codes::{CodeFamily, CodeSpec, LogicalBasis};
use crate::error::{Error, Result};
use crate::fock::{IntegerObservable, PureState, EQ_TOL};

#[derive(Clone, Debug)]
pub struct SyndromeObservables {
    spec: CodeSpec,
    chain: Vec<IntegerObservable>,
    bridge: IntegerObservable,
    mode_readouts: Vec<IntegerObservable>,
}

impl SyndromeObservables {
    pub fn new(spec: CodeSpec) -> Result<Self> {
        if spec.family != CodeFamily::ExtendedBinomial {
            return Err(Error::Unsupported(format!(
                "syndrome observables are defined for ext-bin codes, not {}",
                spec.family
            )));
        }
        let (w, k) = (spec.w as usize, spec.k as usize);
        let n = w + k;
        let s = spec.w + 1;
        let chain = (0..w.saturating_sub(1))
            .map(|i| {
                let mut c = vec![0i64; n];
                c[i] = 1;
                c[i + 1] = -1;
                IntegerObservable::new(c, s, true)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bridge = vec![0i64; n];
        bridge[w - 1] = 1;
        for c in bridge.iter_mut().skip(w) {
            *c = -1;
        }
        let bridge = IntegerObservable::new(bridge, s, true)?;
        let mode_readouts = (0..n)
            .map(|j| {
                let mut c = vec![0i64; n];
                c[j] = 1;
                IntegerObservable::new(c, s, false)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            chain,
            bridge,
            mode_readouts,
        })
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    /// Chain, bridge, then mode readouts.
    pub fn all(&self) -> impl Iterator<Item = &IntegerObservable> {
        self.chain
            .iter()
            .chain(std::iter::once(&self.bridge))
            .chain(&self.mode_readouts)
    }

    /// Number of chain plus bridge observables (= w).
    pub fn num_checks(&self) -> usize {
        self.chain.len() + 1
    }

    pub fn len(&self) -> usize {
        self.num_checks() + self.mode_readouts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn evaluate(&self, occupation: &[u32]) -> Vec<u32> {
        self.all().map(|o| o.value(occupation)).collect()
    }

    /// Outcomes predicted for 𝒜̂_a|ī⟩ from the loss pattern alone.
    pub fn expected_outcomes(&self, pattern: &LossPattern) -> Vec<u32> {
        let s = (self.spec.w + 1) as i64;
        let a: Vec<i64> = pattern.entries().iter().map(|&x| x as i64).collect();
        let w = self.spec.w as usize;
        let sq = |x: i64| (x * x).rem_euclid(s) as u32;
        let mut out: Vec<u32> = (0..self.chain.len()).map(|i| sq(a[i + 1] - a[i])).collect();
        out.push(sq(a[w..].iter().sum::<i64>() - a[w - 1]));
        out.extend(a.iter().map(|&x| (-x).rem_euclid(s) as u32));
        out
    }
}

/// Result of table decoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "pattern", rename_all = "snake_case")]
pub enum Decoded {
    /// Unique pattern of weight ≤ w.
    Correctable(LossPattern),
    /// Readouts name a pattern heavier than w.
    Uncorrectable(LossPattern),
    /// Chain or bridge values disagree with the readouts.
    Inconsistent,
}

/// Decodes an outcome tuple (chain, bridge, readouts).
pub fn decode_lookup(outcomes: &[u32], spec: &CodeSpec) -> Result<Decoded> {
    let observables = SyndromeObservables::new(*spec)?;
    if outcomes.len() != observables.len() {
        return Err(Error::MalformedSyndrome(format!(
            "expected {} outcomes, got {}",
            observables.len(),
            outcomes.len()
        )));
    }
    let s = spec.w + 1;
    if let Some(bad) = outcomes.iter().find(|&&r| r >= s) {
        return Err(Error::MalformedSyndrome(format!(
            "outcome {bad} is not a residue mod {s}"
        )));
    }
    let readouts = &outcomes[observables.num_checks()..];
    let pattern = LossPattern::new(readouts.iter().map(|&r| (s - r) % s).collect());
    if observables.expected_outcomes(&pattern) != outcomes {
        return Ok(Decoded::Inconsistent);
    }
    if pattern.weight() <= spec.w {
        Ok(Decoded::Correctable(pattern))
    } else {
        Ok(Decoded::Uncorrectable(pattern))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyndromeRecord {
    pub outcomes: Vec<u32>,
    /// Pattern named by the readouts; `None` when the outcomes are inconsistent.
    pub decoded: Option<LossPattern>,
    /// Normalized post-measurement state.
    pub post_state: PureState,
    /// Set when the decoded pattern is heavier than w (or absent).
    pub ambiguous: bool,
}

fn record(outcomes: Vec<u32>, post_state: PureState, spec: &CodeSpec) -> Result<SyndromeRecord> {
    let (decoded, ambiguous) = match decode_lookup(&outcomes, spec)? {
        Decoded::Correctable(p) => (Some(p), false),
        Decoded::Uncorrectable(p) => (Some(p), true),
        Decoded::Inconsistent => (None, true),
    };
    Ok(SyndromeRecord {
        outcomes,
        decoded,
        post_state,
        ambiguous,
    })
}

/// Every outcome branch of the full measurement sequence with its probability.
pub fn syndrome_branches(state: &PureState, spec: &CodeSpec) -> Result<Vec<(f64, SyndromeRecord)>> {
    let observables = SyndromeObservables::new(*spec)?;
    if state.layout() != &spec.layout() {
        return Err(Error::LayoutMismatch {
            expected: spec.layout().cutoffs().to_vec(),
            found: state.layout().cutoffs().to_vec(),
        });
    }
    let mut branches = vec![(1.0, Vec::new(), state.normalized()?)];
    for obs in observables.all() {
        let mut next = Vec::new();
        for (p, outcomes, s) in branches {
            for b in s.measure(obs)? {
                let mut o: Vec<u32> = outcomes.clone();
                o.push(b.outcome);
                next.push((p * b.probability, o, b.state));
            }
        }
        branches = next;
    }
    branches
        .into_iter()
        .map(|(p, o, s)| Ok((p, record(o, s, spec)?)))
        .collect()
}

/// Measures every observable in turn, sampling each outcome with `rng`.
pub fn extract_syndrome<R: Rng + ?Sized>(
    state: &PureState,
    spec: &CodeSpec,
    rng: &mut R,
) -> Result<SyndromeRecord> {
    let observables = SyndromeObservables::new(*spec)?;
    let mut current = state.normalized()?;
    let mut outcomes = Vec::with_capacity(observables.len());
    for obs in observables.all() {
        let branches = current.measure(obs)?;
        let mut u: f64 = rng.random();
        let mut chosen = branches.len() - 1;
        for (idx, b) in branches.iter().enumerate() {
            if u < b.probability {
                chosen = idx;
                break;
            }
            u -= b.probability;
        }
        let b = branches
            .into_iter()
            .nth(chosen)
            .expect("at least one branch");
        outcomes.push(b.outcome);
        current = b.state;
    }
    record(outcomes, current, spec)
}

/// Re-excitation |n_j⟩ ↦ |n_j + a_j⟩ on every mode (not normalized).
pub fn shift_up(state: &PureState, pattern: &LossPattern) -> Result<PureState> {
    let layout = state.layout();
    if pattern.len() != layout.num_modes() {
        return Err(Error::InvalidParameter(format!(
            "pattern has {} entries for {} modes",
            pattern.len(),
            layout.num_modes()
        )));
    }
    let mut components = Vec::with_capacity(state.len());
    for (occ, amp) in state.components() {
        let mut shifted = occ.to_vec();
        for (mode, (n, &a)) in shifted.iter_mut().zip(pattern.entries()).enumerate() {
            *n += a;
            if *n > layout.cutoff(mode) {
                return Err(Error::Overflow {
                    mode,
                    value: *n,
                    cutoff: layout.cutoff(mode),
                });
            }
        }
        components.push((shifted, *amp));
    }
    PureState::from_components(layout.clone(), components)
}

/// Conditional re-excitation by the decoded pattern, renormalized.
pub fn recover_naive(record: &SyndromeRecord, spec: &CodeSpec) -> Result<PureState> {
    let pattern = match (&record.decoded, record.ambiguous) {
        (Some(p), false) => p,
        _ => {
            return Err(Error::Unsupported(format!(
                "syndrome {:?} has no correctable pattern for {spec}",
                record.outcomes
            )))
        }
    };
    shift_up(&record.post_state, pattern)?.normalized()
}

/// Outcome of one (pattern, label) case of the exhaustive decoder sweep.
#[derive(Clone, Debug, Serialize)]
pub struct DecoderCase {
    pub pattern: LossPattern,
    pub label: String,
    pub outcomes: Vec<u32>,
    pub decoded: Option<LossPattern>,
    pub deterministic: bool,
    #[serde(rename = "match")]
    pub matches: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecoderSweep {
    pub spec: CodeSpec,
    pub cases: Vec<DecoderCase>,
    pub all_deterministic: bool,
    pub all_correct: bool,
    /// Distinct patterns never share an outcome tuple.
    pub injective: bool,
}

/// Applies every pattern of weight ≤ w to every codeword and decodes the syndrome.
pub fn decoder_sweep(basis: &LogicalBasis, gamma: DampingParam) -> Result<DecoderSweep> {
    let spec = *basis.spec();
    let mut cases = Vec::new();
    let mut seen: BTreeMap<Vec<u32>, LossPattern> = BTreeMap::new();
    let mut injective = true;
    for pattern in enumerate_loss_patterns(spec.num_modes(), spec.w) {
        for (label, cw) in basis.labels().zip(basis.codewords()) {
            let damaged = damage(cw, &pattern, gamma)?;
            if damaged.is_empty() {
                continue;
            }
            let branches = syndrome_branches(&damaged, &spec)?;
            let deterministic = branches.len() == 1 && (branches[0].0 - 1.0).abs() < EQ_TOL;
            let rec = &branches[0].1;
            if let Some(prev) = seen.insert(rec.outcomes.clone(), pattern.clone()) {
                injective &= prev == pattern;
            }
            let matches = deterministic && !rec.ambiguous && rec.decoded.as_ref() == Some(&pattern);
            cases.push(DecoderCase {
                pattern: pattern.clone(),
                label: label.to_string(),
                outcomes: rec.outcomes.clone(),
                decoded: rec.decoded.clone(),
                deterministic,
                matches,
            });
        }
    }
    Ok(DecoderSweep {
        spec,
        all_deterministic: cases.iter().all(|c| c.deterministic),
        all_correct: cases.iter().all(|c| c.matches),
        injective,
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::LogicalLabel;
    use crate::fock::ModeLayout;
    use rand::SeedableRng;

    fn spec(w: u32, k: u32) -> CodeSpec {
        CodeSpec::extended(w, k).unwrap()
    }

    #[test]
    fn observable_counts() {
        for (w, k) in [(1, 1), (2, 3), (3, 2)] {
            let obs = SyndromeObservables::new(spec(w, k)).unwrap();
            assert_eq!(obs.num_checks(), w as usize);
            assert_eq!(obs.len(), (w + w + k) as usize);
        }
        assert!(SyndromeObservables::new(
            CodeSpec::new(CodeFamily::CeExtendedBinomial, 1, 1).unwrap()
        )
        .is_err());
    }

    #[test]
    fn single_loss_on_mode_zero_w1() {
        let sp = spec(1, 1);
        let s = PureState::basis(sp.layout(), vec![1, 2]).unwrap();
        let branches = syndrome_branches(&s, &sp).unwrap();
        assert_eq!(branches.len(), 1);
        let rec = &branches[0].1;
        assert_eq!(rec.outcomes, vec![1, 1, 0]);
        assert_eq!(rec.decoded, Some(LossPattern::new(vec![1, 0])));
        assert!(!rec.ambiguous);
        let recovered = recover_naive(rec, &sp).unwrap();
        assert_eq!(
            recovered,
            PureState::basis(sp.layout(), vec![2, 2]).unwrap()
        );
    }

    #[test]
    fn undamaged_codeword_has_trivial_syndrome() {
        let sp = spec(2, 2);
        let basis = LogicalBasis::new(sp).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for cw in basis.codewords() {
            let rec = extract_syndrome(cw, &sp, &mut rng).unwrap();
            assert!(rec.outcomes.iter().all(|&o| o == 0));
            assert_eq!(rec.decoded, Some(LossPattern::zeros(4)));
            assert!(recover_naive(&rec, &sp).unwrap().approx_eq(cw, EQ_TOL));
        }
    }

    #[test]
    fn squared_checks_conflate_but_readouts_separate() {
        let sp = spec(2, 1);
        let obs = SyndromeObservables::new(sp).unwrap();
        let two = obs.expected_outcomes(&LossPattern::new(vec![2, 0, 0]));
        let one = obs.expected_outcomes(&LossPattern::new(vec![1, 0, 0]));
        assert_eq!(&two[..2], &[1, 0]);
        assert_eq!(&one[..2], &[1, 0]);
        assert_eq!(&two[2..], &[1, 0, 0]);
        assert_eq!(&one[2..], &[2, 0, 0]);
    }

    #[test]
    fn decode_from_outcomes() {
        let sp = spec(1, 1);
        assert_eq!(
            decode_lookup(&[1, 1, 0], &sp).unwrap(),
            Decoded::Correctable(LossPattern::new(vec![1, 0]))
        );
        assert_eq!(
            decode_lookup(&[0, 0, 0], &sp).unwrap(),
            Decoded::Correctable(LossPattern::zeros(2))
        );
        // bridge says nothing happened but a readout is off
        assert_eq!(
            decode_lookup(&[0, 1, 0], &sp).unwrap(),
            Decoded::Inconsistent
        );
        assert_eq!(
            decode_lookup(&[0, 1, 1], &sp).unwrap(),
            Decoded::Uncorrectable(LossPattern::new(vec![1, 1]))
        );
        assert!(decode_lookup(&[0, 0], &sp).is_err());
        assert!(decode_lookup(&[0, 2, 0], &sp).is_err());
    }

    #[test]
    fn superposed_syndromes_split_into_branches() {
        let sp = spec(1, 1);
        let s =
            PureState::from_real_components(sp.layout(), [(vec![1, 2], 0.6), (vec![2, 2], 0.8)])
                .unwrap();
        let branches = syndrome_branches(&s, &sp).unwrap();
        assert_eq!(branches.len(), 2);
        let total: f64 = branches.iter().map(|b| b.0).sum();
        assert!((total - 1.0).abs() < EQ_TOL);
    }

    #[test]
    fn shift_overflow_is_an_error() {
        let layout = ModeLayout::uniform(2, 2).unwrap();
        let s = PureState::basis(layout, vec![2, 0]).unwrap();
        assert!(matches!(
            shift_up(&s, &LossPattern::new(vec![1, 0])),
            Err(Error::Overflow { mode: 0, .. })
        ));
    }

    #[test]
    fn naive_recovery_loses_the_damaged_component() {
        // A single loss on mode 0 of |0̄⟩ only leaves the |2,2⟩ component.
        let sp = spec(1, 1);
        let basis = LogicalBasis::new(sp).unwrap();
        let zero = basis.codeword(&LogicalLabel::parse("0", 1).unwrap());
        let gamma = DampingParam::new(0.01).unwrap();
        let damaged = damage(zero, &LossPattern::new(vec![1, 0]), gamma).unwrap();
        let (_, rec) = syndrome_branches(&damaged, &sp).unwrap().remove(0);
        let recovered = recover_naive(&rec, &sp).unwrap();
        assert!(
            (zero.inner(&recovered).unwrap().norm() - std::f64::consts::FRAC_1_SQRT_2).abs()
                < EQ_TOL
        );

        // The no-loss branch keeps both components, with an O(γ) amplitude skew.
        for g in [1e-3, 1e-2] {
            let damaged =
                damage(zero, &LossPattern::zeros(2), DampingParam::new(g).unwrap()).unwrap();
            let (_, rec) = syndrome_branches(&damaged, &sp).unwrap().remove(0);
            let overlap = zero
                .inner(&recover_naive(&rec, &sp).unwrap())
                .unwrap()
                .norm();
            let b = (1.0 - g) * (1.0 - g);
            let expected = (1.0 + b) / (2.0 * (1.0 + b * b)).sqrt();
            assert!((overlap - expected).abs() < 1e-14);
            assert!(1.0 - overlap < g * g);
        }
    }

    #[test]
    fn sweep_is_exhaustive_for_small_codes() {
        let sweep = decoder_sweep(
            &LogicalBasis::new(spec(2, 2)).unwrap(),
            DampingParam::new(0.01).unwrap(),
        )
        .unwrap();
        assert!(sweep.all_deterministic && sweep.all_correct && sweep.injective);
    }
}
