//! Truncated multi-mode Fock spaces.
//!
//! States are sparse maps from occupation vectors to complex amplitudes and
//! operators are sparse matrices between two [`ModeLayout`]s. Keys are kept
//! in lexicographic order so every reduction sums in a fixed order and the
//! results are reproducible bit for bit.
//!
//! Global phases are never tracked (ħ = 1 and the zero-point phase of the
//! free evolution is dropped).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped from canonical states.
pub const PRUNE_TOL: f64 = 1e-15;
/// Default tolerance for state and operator equality.
pub const EQ_TOL: f64 = 1e-12;
/// Largest Hilbert-space dimension an operator may be materialized on.
pub const MAX_DENSE_DIM: u128 = 1 << 22;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Number of modes together with the inclusive occupation cutoff of each.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLayout {
    cutoffs: Vec<u32>,
}

impl ModeLayout {
    pub fn new(cutoffs: Vec<u32>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::InvalidLayout("at least one mode is required".into()));
        }
        if let Some(j) = cutoffs.iter().position(|&c| c == 0) {
            return Err(Error::InvalidLayout(format!("mode {j} has cutoff 0")));
        }
        Ok(Self { cutoffs })
    }

    pub fn uniform(num_modes: usize, cutoff: u32) -> Result<Self> {
        Self::new(vec![cutoff; num_modes])
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[u32] {
        &self.cutoffs
    }

    pub fn cutoff(&self, mode: usize) -> u32 {
        self.cutoffs[mode]
    }

    /// Layout of `self ⊗ other`; the modes of `other` follow those of `self`.
    pub fn concat(&self, other: &ModeLayout) -> ModeLayout {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        ModeLayout { cutoffs }
    }

    pub fn contains(&self, occupation: &[u32]) -> bool {
        occupation.len() == self.cutoffs.len()
            && occupation.iter().zip(&self.cutoffs).all(|(n, c)| n <= c)
    }

    pub fn validate(&self, occupation: &[u32]) -> Result<()> {
        if self.contains(occupation) {
            Ok(())
        } else {
            Err(Error::InvalidOccupation {
                occupation: occupation.to_vec(),
                cutoffs: self.cutoffs.clone(),
            })
        }
    }

    /// Hilbert-space dimension, saturating at `u128::MAX`.
    pub fn dimension(&self) -> u128 {
        self.cutoffs
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(c as u128 + 1))
    }

    /// All basis occupations in lexicographic order.
    pub fn basis(&self) -> BasisIter<'_> {
        BasisIter {
            layout: self,
            next: Some(vec![0; self.cutoffs.len()]),
        }
    }

    fn ensure_eq(&self, other: &ModeLayout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                expected: self.cutoffs.clone(),
                found: other.cutoffs.clone(),
            })
        }
    }
}

/// Lexicographic odometer over the basis of a layout.
pub struct BasisIter<'a> {
    layout: &'a ModeLayout,
    next: Option<Vec<u32>>,
}

impl Iterator for BasisIter<'_> {
    type Item = Occupation;

    fn next(&mut self) -> Option<Occupation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut j = succ.len();
        while j > 0 {
            j -= 1;
            if succ[j] < self.layout.cutoffs[j] {
                succ[j] += 1;
                self.next = Some(succ);
                break;
            }
            succ[j] = 0;
        }
        Some(Occupation(current))
    }
}

/// Occupation numbers of every mode, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Occupation(Vec<u32>);

impl Occupation {
    pub fn new(entries: Vec<u32>) -> Self {
        Occupation(entries)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).sum()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl Deref for Occupation {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for Occupation {
    fn from(v: Vec<u32>) -> Self {
        Occupation(v)
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (j, n) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// One amplitude of a serialized state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub occupation: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

/// Sparse pure state (not necessarily normalized) on a truncated layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    layout: ModeLayout,
    amplitudes: BTreeMap<Occupation, Complex64>,
}

fn prune(map: &mut BTreeMap<Occupation, Complex64>) {
    map.retain(|_, a| a.norm() >= PRUNE_TOL);
}

impl PureState {
    pub fn zero(layout: ModeLayout) -> Self {
        Self {
            layout,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn basis(layout: ModeLayout, occupation: Vec<u32>) -> Result<Self> {
        Self::from_components(layout, [(occupation, Complex64::new(1.0, 0.0))])
    }

    /// Builds a state from (occupation, amplitude) pairs; repeated keys add up.
    pub fn from_components<I>(layout: ModeLayout, components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex64)>,
    {
        let mut amplitudes = BTreeMap::new();
        for (occ, amp) in components {
            layout.validate(&occ)?;
            *amplitudes
                .entry(Occupation(occ))
                .or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        prune(&mut amplitudes);
        Ok(Self { layout, amplitudes })
    }

    pub fn from_real_components<I>(layout: ModeLayout, components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        Self::from_components(
            layout,
            components
                .into_iter()
                .map(|(o, a)| (o, Complex64::new(a, 0.0))),
        )
    }

    pub fn from_records(layout: ModeLayout, records: &[AmplitudeRecord]) -> Result<Self> {
        Self::from_components(
            layout,
            records
                .iter()
                .map(|r| (r.occupation.clone(), Complex64::new(r.re, r.im))),
        )
    }

    pub fn to_records(&self) -> Vec<AmplitudeRecord> {
        self.amplitudes
            .iter()
            .map(|(o, a)| AmplitudeRecord {
                occupation: o.to_vec(),
                re: a.re,
                im: a.im,
            })
            .collect()
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occupation: &[u32]) -> Complex64 {
        self.amplitudes
            .get(&Occupation(occupation.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < PRUNE_TOL {
            return Err(Error::EmptyState);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut amplitudes: BTreeMap<_, _> = self
            .amplitudes
            .iter()
            .map(|(o, a)| (o.clone(), a * factor))
            .collect();
        prune(&mut amplitudes);
        Self {
            layout: self.layout.clone(),
            amplitudes,
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: Complex64, other: &PureState) -> Result<Self> {
        self.layout.ensure_eq(&other.layout)?;
        let mut amplitudes = self.amplitudes.clone();
        for (o, a) in &other.amplitudes {
            *amplitudes.entry(o.clone()).or_default() += factor * a;
        }
        prune(&mut amplitudes);
        Ok(Self {
            layout: self.layout.clone(),
            amplitudes,
        })
    }

    pub fn add(&self, other: &PureState) -> Result<Self> {
        self.add_scaled(Complex64::new(1.0, 0.0), other)
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        self.layout.ensure_eq(&other.layout)?;
        Ok(self
            .amplitudes
            .iter()
            .filter_map(|(o, a)| other.amplitudes.get(o).map(|b| a.conj() * b))
            .sum())
    }

    /// Tensor product; the modes of `other` are appended after those of `self`.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let layout = self.layout.concat(&other.layout);
        let mut amplitudes = BTreeMap::new();
        for (oa, a) in &self.amplitudes {
            for (ob, b) in &other.amplitudes {
                let mut occ = oa.to_vec();
                occ.extend_from_slice(ob);
                amplitudes.insert(Occupation(occ), a * b);
            }
        }
        prune(&mut amplitudes);
        PureState { layout, amplitudes }
    }

    /// Mean of the total excitation number Σ_j n_j.
    pub fn total_number_expectation(&self) -> Result<f64> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(self
            .amplitudes
            .iter()
            .map(|(o, a)| a.norm_sqr() * o.total() as f64)
            .sum())
    }

    /// Largest componentwise amplitude difference over the union of supports.
    pub fn max_abs_diff(&self, other: &PureState) -> Result<f64> {
        self.layout.ensure_eq(&other.layout)?;
        let mut worst: f64 = 0.0;
        for (o, a) in &self.amplitudes {
            let b = other.amplitudes.get(o).copied().unwrap_or_default();
            worst = worst.max((a - b).norm());
        }
        for (o, b) in &other.amplitudes {
            if !self.amplitudes.contains_key(o) {
                worst = worst.max(b.norm());
            }
        }
        Ok(worst)
    }

    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        self.max_abs_diff(other).map(|d| d <= tol).unwrap_or(false)
    }

    /// Keeps only the components accepted by `keep`.
    pub fn filtered<F: Fn(&Occupation) -> bool>(&self, keep: F) -> PureState {
        PureState {
            layout: self.layout.clone(),
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(o, _)| keep(o))
                .map(|(o, a)| (o.clone(), *a))
                .collect(),
        }
    }

    /// Contracts `mode` with the bra `Σ_n bra[n]* ⟨n|` and removes it from the layout.
    pub fn contract_mode(&self, mode: usize, bra: &[Complex64]) -> Result<PureState> {
        let n_modes = self.layout.num_modes();
        if mode >= n_modes || n_modes < 2 {
            return Err(Error::InvalidParameter(format!(
                "cannot contract mode {mode} of a {n_modes}-mode state"
            )));
        }
        let mut cutoffs = self.layout.cutoffs.clone();
        cutoffs.remove(mode);
        let layout = ModeLayout::new(cutoffs)?;
        let components = self.amplitudes.iter().filter_map(|(o, a)| {
            let coeff = bra.get(o[mode] as usize)?;
            let mut occ = o.to_vec();
            occ.remove(mode);
            Some((occ, coeff.conj() * a))
        });
        PureState::from_components(layout, components)
    }

    /// Projective measurement of an integer-valued diagonal observable.
    ///
    /// Outcome probabilities are relative to the norm of `self`, so damaged
    /// (unnormalized) branches can be measured directly.
    pub fn measure(&self, observable: &IntegerObservable) -> Result<Vec<MeasurementBranch>> {
        if observable.coeffs.len() != self.layout.num_modes() {
            return Err(Error::InvalidParameter(format!(
                "observable has {} coefficients for {} modes",
                observable.coeffs.len(),
                self.layout.num_modes()
            )));
        }
        let total = self.norm_sqr();
        if self.is_empty() || total < PRUNE_TOL * PRUNE_TOL {
            return Err(Error::EmptyState);
        }
        let mut parts: BTreeMap<u32, BTreeMap<Occupation, Complex64>> = BTreeMap::new();
        for (o, a) in &self.amplitudes {
            parts
                .entry(observable.value(o))
                .or_default()
                .insert(o.clone(), *a);
        }
        Ok(parts
            .into_iter()
            .map(|(outcome, amplitudes)| {
                let projected = PureState {
                    layout: self.layout.clone(),
                    amplitudes,
                };
                let weight = projected.norm_sqr();
                let state = projected.scaled(Complex64::new(1.0 / weight.sqrt(), 0.0));
                MeasurementBranch {
                    outcome,
                    probability: weight / total,
                    state,
                }
            })
            .collect())
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("PureState", 2)?;
        st.serialize_field("cutoffs", self.layout.cutoffs())?;
        st.serialize_field("amplitudes", &self.to_records())?;
        st.end()
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amplitudes.is_empty() {
            return write!(f, "0");
        }
        for (i, (o, a)) in self.amplitudes.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if a.im == 0.0 {
                write!(f, "{:.6}{o}", a.re)?;
            } else {
                write!(f, "({:.6}{:+.6}i){o}", a.re, a.im)?;
            }
        }
        Ok(())
    }
}

/// Tensor product of two states.
pub fn tensor(a: &PureState, b: &PureState) -> PureState {
    a.tensor(b)
}

/// Inner product ⟨a|b⟩.
pub fn inner(a: &PureState, b: &PureState) -> Result<Complex64> {
    a.inner(b)
}

/// Observable f(n) = (Σ_j c_j n_j) mod m, optionally squared before the reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerObservable {
    coeffs: Vec<i64>,
    modulus: u32,
    squared: bool,
}

impl IntegerObservable {
    pub fn new(coeffs: Vec<i64>, modulus: u32, squared: bool) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidParameter(format!(
                "modulus must be at least 2, got {modulus}"
            )));
        }
        Ok(Self {
            coeffs,
            modulus,
            squared,
        })
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn is_squared(&self) -> bool {
        self.squared
    }

    pub fn value(&self, occupation: &[u32]) -> u32 {
        let m = self.modulus as i64;
        let s: i64 = self
            .coeffs
            .iter()
            .zip(occupation)
            .map(|(&c, &n)| c * n as i64)
            .sum();
        let r = s.rem_euclid(m);
        let v = if self.squared {
            (r * r).rem_euclid(m)
        } else {
            r
        };
        v as u32
    }
}

/// One outcome of a projective measurement with its normalized post-state.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBranch {
    pub outcome: u32,
    pub probability: f64,
    pub state: PureState,
}

pub fn measure_integer_observable(
    state: &PureState,
    coeffs: &[i64],
    modulus: u32,
    squared: bool,
) -> Result<Vec<MeasurementBranch>> {
    state.measure(&IntegerObservable::new(coeffs.to_vec(), modulus, squared)?)
}

/// Labelled unnormalized branches; `norm²` of each state is its probability.
#[derive(Clone, Debug)]
pub struct BranchEnsemble<L> {
    pub branches: Vec<(L, PureState)>,
    /// Probability weight not represented by any branch (truncation).
    pub tail_probability: f64,
}

impl<L> BranchEnsemble<L> {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|(_, s)| s.norm_sqr()).sum()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

/// Sparse operator on a single mode, stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    out_cutoff: u32,
    columns: Vec<Vec<(u32, Complex64)>>,
    identity: bool,
}

impl ModeOperator {
    pub fn identity(cutoff: u32) -> Self {
        Self {
            out_cutoff: cutoff,
            columns: (0..=cutoff)
                .map(|n| vec![(n, Complex64::new(1.0, 0.0))])
                .collect(),
            identity: true,
        }
    }

    /// Builds from (out, in, value) triples; repeated entries add up.
    pub fn from_entries<I>(in_cutoff: u32, out_cutoff: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32, Complex64)>,
    {
        let mut cols: Vec<BTreeMap<u32, Complex64>> = vec![BTreeMap::new(); in_cutoff as usize + 1];
        for (out, inp, v) in entries {
            if out > out_cutoff || inp > in_cutoff {
                return Err(Error::InvalidOccupation {
                    occupation: vec![out, inp],
                    cutoffs: vec![out_cutoff, in_cutoff],
                });
            }
            *cols[inp as usize].entry(out).or_default() += v;
        }
        let columns: Vec<Vec<(u32, Complex64)>> = cols
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .filter(|(_, v)| v.norm() >= PRUNE_TOL)
                    .collect()
            })
            .collect();
        let identity = in_cutoff == out_cutoff
            && columns.iter().enumerate().all(|(n, c)| {
                c.len() == 1 && c[0].0 == n as u32 && c[0].1 == Complex64::new(1.0, 0.0)
            });
        Ok(Self {
            out_cutoff,
            columns,
            identity,
        })
    }

    pub fn diagonal<F: Fn(u32) -> Complex64>(cutoff: u32, f: F) -> Self {
        Self::from_entries(cutoff, cutoff, (0..=cutoff).map(|n| (n, n, f(n))))
            .expect("diagonal entries are within the cutoff")
    }

    pub fn in_cutoff(&self) -> u32 {
        self.columns.len() as u32 - 1
    }

    pub fn out_cutoff(&self) -> u32 {
        self.out_cutoff
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn column(&self, n: u32) -> &[(u32, Complex64)] {
        self.columns
            .get(n as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn element(&self, out: u32, inp: u32) -> Complex64 {
        self.column(inp)
            .iter()
            .find(|(o, _)| *o == out)
            .map(|(_, v)| *v)
            .unwrap_or_default()
    }

    pub fn adjoint(&self) -> ModeOperator {
        let entries =
            self.columns.iter().enumerate().flat_map(|(inp, col)| {
                col.iter().map(move |(out, v)| (inp as u32, *out, v.conj()))
            });
        ModeOperator::from_entries(self.out_cutoff, self.in_cutoff(), entries)
            .expect("adjoint entries are within the swapped cutoffs")
    }

    /// `self · rhs`.
    pub fn compose(&self, rhs: &ModeOperator) -> Result<ModeOperator> {
        if rhs.out_cutoff != self.in_cutoff() {
            return Err(Error::LayoutMismatch {
                expected: vec![self.in_cutoff()],
                found: vec![rhs.out_cutoff],
            });
        }
        let mut entries = Vec::new();
        for (inp, col) in rhs.columns.iter().enumerate() {
            for (mid, b) in col {
                for (out, a) in self.column(*mid) {
                    entries.push((*out, inp as u32, a * b));
                }
            }
        }
        ModeOperator::from_entries(rhs.in_cutoff(), self.out_cutoff, entries)
    }

    /// Max entry of |A†A − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().compose(self).expect("A†A is always defined");
        let mut worst: f64 = 0.0;
        for n in 0..=gram.in_cutoff() {
            for m in 0..=gram.out_cutoff {
                let target = if n == m { 1.0 } else { 0.0 };
                worst = worst.max((gram.element(m, n) - target).norm());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
enum Repr {
    /// Column map: input occupation → list of (output occupation, value).
    Sparse(BTreeMap<Occupation, Vec<(Occupation, Complex64)>>),
    /// Tensor product of one operator per mode.
    Product(Vec<ModeOperator>),
}

/// Sparse linear map between two Fock layouts.
#[derive(Clone, Debug)]
pub struct LinearMap {
    in_layout: ModeLayout,
    out_layout: ModeLayout,
    repr: Repr,
}

impl LinearMap {
    /// Builds from (out, in, value) triples; repeated entries add up.
    pub fn from_entries<I>(
        in_layout: ModeLayout,
        out_layout: ModeLayout,
        entries: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Vec<u32>, Complex64)>,
    {
        let mut acc: BTreeMap<Occupation, BTreeMap<Occupation, Complex64>> = BTreeMap::new();
        for (out, inp, v) in entries {
            out_layout.validate(&out)?;
            in_layout.validate(&inp)?;
            *acc.entry(Occupation(inp))
                .or_default()
                .entry(Occupation(out))
                .or_default() += v;
        }
        let cols = acc
            .into_iter()
            .map(|(i, col)| {
                (
                    i,
                    col.into_iter()
                        .filter(|(_, v)| v.norm() >= PRUNE_TOL)
                        .collect::<Vec<_>>(),
                )
            })
            .filter(|(_, c)| !c.is_empty())
            .collect();
        Ok(Self {
            in_layout,
            out_layout,
            repr: Repr::Sparse(cols),
        })
    }

    pub fn identity(layout: &ModeLayout) -> Self {
        Self::product(
            layout
                .cutoffs()
                .iter()
                .map(|&c| ModeOperator::identity(c))
                .collect(),
        )
        .expect("layout has at least one mode")
    }

    /// ⊗_j factors[j].
    pub fn product(factors: Vec<ModeOperator>) -> Result<Self> {
        let in_layout = ModeLayout::new(factors.iter().map(|f| f.in_cutoff()).collect())?;
        let out_layout = ModeLayout::new(factors.iter().map(|f| f.out_cutoff()).collect())?;
        Ok(Self {
            in_layout,
            out_layout,
            repr: Repr::Product(factors),
        })
    }

    /// `op` on `mode`, identity on every other mode of `layout`.
    pub fn local(layout: &ModeLayout, mode: usize, op: ModeOperator) -> Result<Self> {
        if mode >= layout.num_modes() || op.in_cutoff() != layout.cutoff(mode) {
            return Err(Error::InvalidParameter(format!(
                "cannot place a cutoff-{} operator on mode {mode} of {:?}",
                op.in_cutoff(),
                layout.cutoffs()
            )));
        }
        let mut factors: Vec<ModeOperator> = layout
            .cutoffs()
            .iter()
            .map(|&c| ModeOperator::identity(c))
            .collect();
        factors[mode] = op;
        Self::product(factors)
    }

    pub fn in_layout(&self) -> &ModeLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &ModeLayout {
        &self.out_layout
    }

    /// Per-mode factors when the map is stored as a tensor product.
    pub fn mode_factors(&self) -> Option<&[ModeOperator]> {
        match &self.repr {
            Repr::Product(f) => Some(f),
            Repr::Sparse(_) => None,
        }
    }

    /// Modes on which a product map acts non-trivially.
    pub fn support_modes(&self) -> Option<Vec<usize>> {
        self.mode_factors().map(|f| {
            f.iter()
                .enumerate()
                .filter(|(_, op)| !op.is_identity())
                .map(|(j, _)| j)
                .collect()
        })
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        self.in_layout.ensure_eq(state.layout())?;
        let amplitudes = match &self.repr {
            Repr::Sparse(cols) => {
                let mut acc: BTreeMap<Occupation, Complex64> = BTreeMap::new();
                for (o, a) in &state.amplitudes {
                    if let Some(col) = cols.get(o) {
                        for (out, v) in col {
                            *acc.entry(out.clone()).or_default() += v * a;
                        }
                    }
                }
                acc
            }
            Repr::Product(factors) => {
                let mut current = state.amplitudes.clone();
                for (j, op) in factors.iter().enumerate() {
                    if op.is_identity() {
                        continue;
                    }
                    let mut next: BTreeMap<Occupation, Complex64> = BTreeMap::new();
                    for (o, a) in &current {
                        for (n_out, v) in op.column(o[j]) {
                            let mut occ = o.to_vec();
                            occ[j] = *n_out;
                            *next.entry(Occupation(occ)).or_default() += v * a;
                        }
                    }
                    current = next;
                }
                current
            }
        };
        let mut amplitudes = amplitudes;
        prune(&mut amplitudes);
        Ok(PureState {
            layout: self.out_layout.clone(),
            amplitudes,
        })
    }

    pub fn adjoint(&self) -> LinearMap {
        let repr = match &self.repr {
            Repr::Product(f) => Repr::Product(f.iter().map(ModeOperator::adjoint).collect()),
            Repr::Sparse(cols) => {
                let mut acc: BTreeMap<Occupation, Vec<(Occupation, Complex64)>> = BTreeMap::new();
                for (inp, col) in cols {
                    for (out, v) in col {
                        acc.entry(out.clone())
                            .or_default()
                            .push((inp.clone(), v.conj()));
                    }
                }
                Repr::Sparse(acc)
            }
        };
        LinearMap {
            in_layout: self.out_layout.clone(),
            out_layout: self.in_layout.clone(),
            repr,
        }
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &LinearMap) -> Result<LinearMap> {
        self.in_layout.ensure_eq(&rhs.out_layout)?;
        if let (Repr::Product(a), Repr::Product(b)) = (&self.repr, &rhs.repr) {
            let factors = a
                .iter()
                .zip(b)
                .map(|(x, y)| x.compose(y))
                .collect::<Result<Vec<_>>>()?;
            return LinearMap::product(factors);
        }
        let mut entries = Vec::new();
        for (inp, col) in rhs.columns()? {
            let mid = PureState::from_components(
                self.in_layout.clone(),
                col.into_iter().map(|(o, v)| (o.into_inner(), v)),
            )?;
            for (out, v) in self.apply(&mid)?.amplitudes {
                entries.push((out.into_inner(), inp.to_vec(), v));
            }
        }
        LinearMap::from_entries(rhs.in_layout.clone(), self.out_layout.clone(), entries)
    }

    fn columns(&self) -> Result<Vec<(Occupation, Vec<(Occupation, Complex64)>)>> {
        match &self.repr {
            Repr::Sparse(cols) => Ok(cols.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
            Repr::Product(_) => {
                let dim = self.in_layout.dimension();
                if dim > MAX_DENSE_DIM {
                    return Err(Error::TooLarge(dim));
                }
                let mut out = Vec::new();
                for occ in self.in_layout.basis() {
                    let ket = PureState::basis(self.in_layout.clone(), occ.to_vec())?;
                    let image = self.apply(&ket)?;
                    if !image.is_empty() {
                        out.push((occ, image.amplitudes.into_iter().collect()));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Explicit sparse form; product maps are expanded over the whole basis.
    pub fn to_sparse(&self) -> Result<LinearMap> {
        Ok(LinearMap {
            in_layout: self.in_layout.clone(),
            out_layout: self.out_layout.clone(),
            repr: Repr::Sparse(self.columns()?.into_iter().collect()),
        })
    }

    /// All nonzero entries as (out, in, value) in column-major lexicographic order.
    pub fn entries(&self) -> Result<Vec<(Occupation, Occupation, Complex64)>> {
        Ok(self
            .columns()?
            .into_iter()
            .flat_map(|(inp, col)| col.into_iter().map(move |(out, v)| (out, inp.clone(), v)))
            .collect())
    }

    /// ⟨out|M|in⟩.
    pub fn element(&self, out: &[u32], inp: &[u32]) -> Complex64 {
        match &self.repr {
            Repr::Product(f) => {
                if out.len() != f.len() || inp.len() != f.len() {
                    return Complex64::default();
                }
                f.iter()
                    .zip(out.iter().zip(inp))
                    .map(|(op, (&o, &i))| op.element(o, i))
                    .product()
            }
            Repr::Sparse(cols) => cols
                .get(&Occupation(inp.to_vec()))
                .and_then(|c| c.iter().find(|(o, _)| o.as_ref() as &[u32] == out))
                .map(|(_, v)| *v)
                .unwrap_or_default(),
        }
    }

    /// Max entry of |M†M − I|; for product maps a rigorous bound from the factors.
    pub fn unitarity_defect(&self) -> Result<f64> {
        match &self.repr {
            Repr::Product(f) => Ok(f
                .iter()
                .map(|op| 1.0 + op.unitarity_defect())
                .product::<f64>()
                - 1.0),
            Repr::Sparse(_) => {
                if self.in_layout != self.out_layout {
                    return Ok(f64::INFINITY);
                }
                let gram = self.adjoint().compose(self)?;
                let mut worst: f64 = 0.0;
                let mut seen = std::collections::BTreeSet::new();
                for (out, inp, v) in gram.entries()? {
                    let target = if out == inp { 1.0 } else { 0.0 };
                    if out == inp {
                        seen.insert(inp.clone());
                    }
                    worst = worst.max((v - target).norm());
                }
                if (seen.len() as u128) < self.in_layout.dimension() {
                    worst = worst.max(1.0);
                }
                Ok(worst)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn layout_rejects_empty_and_zero_cutoffs() {
        assert!(ModeLayout::new(vec![]).is_err());
        assert!(ModeLayout::new(vec![2, 0]).is_err());
        assert_eq!(ModeLayout::new(vec![1, 2]).unwrap().dimension(), 6);
    }

    #[test]
    fn basis_is_lexicographic() {
        let layout = ModeLayout::new(vec![1, 2]).unwrap();
        let all: Vec<Vec<u32>> = layout.basis().map(Occupation::into_inner).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![1, 2]
            ]
        );
    }

    #[test]
    fn tensor_of_basis_kets() {
        let a = PureState::basis(ModeLayout::uniform(1, 2).unwrap(), vec![0]).unwrap();
        let b = PureState::basis(ModeLayout::uniform(1, 2).unwrap(), vec![2]).unwrap();
        let ab = a.tensor(&b);
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.amplitude(&[0, 2]), c(1.0));
    }

    #[test]
    fn tensor_distributes_over_superposition() {
        let l = ModeLayout::uniform(1, 2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let a = PureState::from_real_components(l.clone(), [(vec![0], h), (vec![2], h)]).unwrap();
        let b = PureState::basis(l, vec![0]).unwrap();
        let ab = a.tensor(&b);
        let expected = PureState::from_real_components(
            ModeLayout::uniform(2, 2).unwrap(),
            [(vec![0, 0], h), (vec![2, 0], h)],
        )
        .unwrap();
        assert!(ab.approx_eq(&expected, EQ_TOL));
    }

    #[test]
    fn inner_of_orthogonal_kets_and_mismatch() {
        let l = ModeLayout::uniform(2, 2).unwrap();
        let a = PureState::basis(l.clone(), vec![0, 0]).unwrap();
        let b = PureState::basis(l, vec![2, 2]).unwrap();
        assert_eq!(a.inner(&b).unwrap(), Complex64::default());
        let other = PureState::basis(ModeLayout::uniform(1, 2).unwrap(), vec![0]).unwrap();
        assert!(matches!(a.inner(&other), Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn invalid_occupation_rejected() {
        let l = ModeLayout::uniform(1, 2).unwrap();
        assert!(PureState::basis(l.clone(), vec![3]).is_err());
        assert!(PureState::basis(l, vec![0, 0]).is_err());
    }

    #[test]
    fn canonical_form_prunes_tiny_amplitudes() {
        let l = ModeLayout::uniform(1, 3).unwrap();
        let s = PureState::from_real_components(
            l,
            [(vec![1], 1.0), (vec![2], 1e-16), (vec![1], -1.0 + 1e-17)],
        )
        .unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn number_operator_eigenstate() {
        let l = ModeLayout::uniform(1, 4).unwrap();
        let n_op = LinearMap::product(vec![ModeOperator::diagonal(4, |n| c(n as f64))]).unwrap();
        let s = PureState::basis(l, vec![3]).unwrap();
        let out = n_op.apply(&s).unwrap();
        assert!(out.approx_eq(&s.scaled(c(3.0)), EQ_TOL));
    }

    #[test]
    fn identity_map_is_noop() {
        let l = ModeLayout::new(vec![2, 3]).unwrap();
        let s = PureState::from_real_components(l.clone(), [(vec![1, 2], 0.6), (vec![0, 3], 0.8)])
            .unwrap();
        assert_eq!(LinearMap::identity(&l).apply(&s).unwrap(), s);
    }

    #[test]
    fn mean_excitation_examples() {
        let h = 1.0 / 2f64.sqrt();
        let one = PureState::from_real_components(
            ModeLayout::uniform(1, 4).unwrap(),
            [(vec![0], h), (vec![4], h)],
        )
        .unwrap();
        assert!((one.total_number_expectation().unwrap() - 2.0).abs() < EQ_TOL);
        let two = PureState::from_real_components(
            ModeLayout::uniform(2, 2).unwrap(),
            [(vec![0, 0], h), (vec![2, 2], h)],
        )
        .unwrap();
        assert!((two.total_number_expectation().unwrap() - 2.0).abs() < EQ_TOL);
        let three = PureState::from_real_components(
            ModeLayout::uniform(3, 2).unwrap(),
            [(vec![0, 0, 0], h), (vec![2, 2, 2], h)],
        )
        .unwrap();
        assert!((three.total_number_expectation().unwrap() - 3.0).abs() < EQ_TOL);
    }

    #[test]
    fn mean_excitation_requires_normalization() {
        let s =
            PureState::from_real_components(ModeLayout::uniform(1, 2).unwrap(), [(vec![1], 2.0)])
                .unwrap();
        assert!(matches!(
            s.total_number_expectation(),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn squared_difference_measurement() {
        let l = ModeLayout::uniform(2, 2).unwrap();
        let s = PureState::basis(l.clone(), vec![1, 2]).unwrap();
        let branches = measure_integer_observable(&s, &[1, -1], 2, true).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].outcome, 1);
        assert!((branches[0].probability - 1.0).abs() < EQ_TOL);

        let h = 1.0 / 2f64.sqrt();
        let code = PureState::from_real_components(l, [(vec![0, 0], h), (vec![2, 2], h)]).unwrap();
        let branches = measure_integer_observable(&code, &[1, -1], 2, true).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].outcome, 0);
    }

    #[test]
    fn measurement_splits_superposition() {
        let l = ModeLayout::uniform(1, 3).unwrap();
        let s = PureState::from_real_components(l, [(vec![0], 0.6), (vec![1], 0.8)]).unwrap();
        let branches = measure_integer_observable(&s, &[1], 2, false).unwrap();
        assert_eq!(branches.len(), 2);
        assert!((branches[0].probability - 0.36).abs() < EQ_TOL);
        assert!((branches[1].probability - 0.64).abs() < EQ_TOL);
        for b in &branches {
            assert!((b.state.norm() - 1.0).abs() < EQ_TOL);
        }
    }

    #[test]
    fn measurement_errors() {
        let l = ModeLayout::uniform(1, 3).unwrap();
        assert!(matches!(
            measure_integer_observable(&PureState::zero(l.clone()), &[1], 2, false),
            Err(Error::EmptyState)
        ));
        let s = PureState::basis(l, vec![1]).unwrap();
        assert!(measure_integer_observable(&s, &[1], 1, false).is_err());
        assert!(measure_integer_observable(&s, &[1, 1], 2, false).is_err());
    }

    #[test]
    fn observable_handles_negative_sums() {
        let obs = IntegerObservable::new(vec![1, -1], 3, false).unwrap();
        assert_eq!(obs.value(&[0, 1]), 2);
        let sq = IntegerObservable::new(vec![1, -1], 3, true).unwrap();
        assert_eq!(sq.value(&[0, 2]), 1);
        assert_eq!(sq.value(&[0, 1]), 1);
    }

    #[test]
    fn contract_mode_projects_and_drops() {
        let l = ModeLayout::new(vec![1, 2]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let s = PureState::from_real_components(l, [(vec![0, 0], h), (vec![1, 2], h)]).unwrap();
        let plus = [c(h), c(h)];
        let out = s.contract_mode(0, &plus).unwrap();
        assert_eq!(out.layout().cutoffs(), &[2]);
        assert!((out.amplitude(&[0]).re - 0.5).abs() < EQ_TOL);
        assert!((out.amplitude(&[2]).re - 0.5).abs() < EQ_TOL);
    }

    #[test]
    fn compose_and_adjoint_of_sparse_and_product_agree() {
        let l = ModeLayout::new(vec![2, 1]).unwrap();
        let lower =
            ModeOperator::from_entries(2, 2, [(0, 1, c(1.0)), (1, 2, c(2f64.sqrt()))]).unwrap();
        let prod = LinearMap::local(&l, 0, lower).unwrap();
        let sparse = prod.to_sparse().unwrap();
        let raise = prod.adjoint();
        let a = raise.compose(&prod).unwrap();
        let b = sparse.adjoint().compose(&sparse).unwrap();
        for occ in l.basis() {
            for occ2 in l.basis() {
                assert!((a.element(&occ, &occ2) - b.element(&occ, &occ2)).norm() < EQ_TOL);
            }
        }
        // a†a is the number operator on mode 0
        assert!((a.element(&[2, 1], &[2, 1]).re - 2.0).abs() < EQ_TOL);
    }

    #[test]
    fn unitarity_defect_detects_non_unitary() {
        let l = ModeLayout::uniform(1, 2).unwrap();
        let phase = LinearMap::product(vec![ModeOperator::diagonal(2, |n| {
            Complex64::from_polar(1.0, n as f64)
        })])
        .unwrap();
        assert!(phase.unitarity_defect().unwrap() < EQ_TOL);
        assert!(phase.to_sparse().unwrap().unitarity_defect().unwrap() < EQ_TOL);
        let proj = LinearMap::from_entries(l.clone(), l, [(vec![0], vec![0], c(1.0))]).unwrap();
        assert!(proj.unitarity_defect().unwrap() >= 1.0);
    }

    #[test]
    fn records_round_trip() {
        let l = ModeLayout::new(vec![2, 2]).unwrap();
        let s = PureState::from_components(
            l.clone(),
            [
                (vec![0, 1], Complex64::new(0.6, 0.1)),
                (vec![2, 0], Complex64::new(0.0, -0.79)),
            ],
        )
        .unwrap();
        let back = PureState::from_records(l, &s.to_records()).unwrap();
        assert_eq!(s, back);
    }
}
