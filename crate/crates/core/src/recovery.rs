//! Recovery channels and entanglement fidelity on the code subspace.
//!
//! The transpose channel R_a = P 𝒜̂_a† M^{−1/2}, M = Σ_a 𝒜̂_a P 𝒜̂_a†, is never
//! built on the full Fock space. With v_(a,i) = 𝒜̂_a|ī⟩ and Gram matrix
//! G = V†V one has V† M^{−1/2} = G^{−1/2} V† (pseudo-inverse roots), so
//! ⟨ī|R_a|x⟩ = (G^{−1/2} V†x)_(a,i) and only the small Gram matrix is
//! diagonalized.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::channels::{enumerate_loss_patterns, DampingParam, LossPattern};
use crate::codes::{CodeFamily, LogicalBasis};
use crate::error::{Error, Result};
use crate::fock::{BranchEnsemble, LinearMap, PureState};
use crate::kl::{damaged_codewords, fit_log_log, validate_grid, ZERO_FLOOR};
use crate::syndrome::{decode_lookup, shift_up, Decoded, SyndromeObservables};

/// Eigenvalues of G below this fraction of the largest are outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Eigenvalues between this and `SUPPORT_TOL` make the support ill-defined.
pub const SINGULAR_TOL: f64 = 1e-14;

/// Amplitudes ⟨ī|x⟩ for every codeword.
pub fn compress_to_code(state: &PureState, basis: &LogicalBasis) -> Result<Vec<Complex64>> {
    basis.codewords().iter().map(|cw| cw.inner(state)).collect()
}

#[derive(Clone, Debug)]
pub struct TransposeRecovery {
    dim: usize,
    patterns: Vec<LossPattern>,
    /// v_(a,i) at index a·d + i.
    vectors: Vec<PureState>,
    gram: DMatrix<Complex64>,
    gram_inv_sqrt: DMatrix<Complex64>,
    rank: usize,
    condition: f64,
}

impl TransposeRecovery {
    /// Recovery for all patterns of weight ≤ w.
    pub fn new(basis: &LogicalBasis, gamma: DampingParam) -> Result<Self> {
        let spec = basis.spec();
        let patterns = enumerate_loss_patterns(spec.num_modes(), spec.w);
        Self::with_patterns(basis, gamma, patterns)
    }

    pub fn with_patterns(
        basis: &LogicalBasis,
        gamma: DampingParam,
        patterns: Vec<LossPattern>,
    ) -> Result<Self> {
        let dim = basis.dimension();
        let vectors: Vec<PureState> = damaged_codewords(basis, gamma, &patterns)?
            .into_iter()
            .flatten()
            .collect();
        let n = vectors.len();
        let mut gram = DMatrix::<Complex64>::zeros(n, n);
        for p in 0..n {
            for q in p..n {
                let g = vectors[p].inner(&vectors[q])?;
                gram[(p, q)] = g;
                gram[(q, p)] = g.conj();
            }
        }
        let eig = gram.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if lmax <= 0.0 {
            return Err(Error::SingularRecovery {
                condition: f64::INFINITY,
            });
        }
        let mut inv_sqrt = DMatrix::<f64>::zeros(n, n);
        let mut rank = 0;
        let mut lmin = lmax;
        for (idx, &l) in eig.eigenvalues.iter().enumerate() {
            if l > SUPPORT_TOL * lmax {
                inv_sqrt[(idx, idx)] = 1.0 / l.sqrt();
                rank += 1;
                lmin = lmin.min(l);
            } else if l > SINGULAR_TOL * lmax {
                return Err(Error::SingularRecovery {
                    condition: lmax / l,
                });
            }
        }
        let u = &eig.eigenvectors;
        let gram_inv_sqrt = u * inv_sqrt.map(|x| Complex64::new(x, 0.0)) * u.adjoint();
        Ok(Self {
            dim,
            patterns,
            vectors,
            gram,
            gram_inv_sqrt,
            rank,
            condition: lmax / lmin,
        })
    }

    pub fn patterns(&self) -> &[LossPattern] {
        &self.patterns
    }

    /// Dimension of range(M).
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Ratio of largest to smallest retained eigenvalue of M.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn coefficients(&self, x: &PureState) -> Result<nalgebra::DVector<Complex64>> {
        let c = self
            .vectors
            .iter()
            .map(|v| v.inner(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.gram_inv_sqrt.clone() * nalgebra::DVector::from_vec(c))
    }

    /// ⟨ī|R_a|x⟩ with outer index over recovery patterns and inner over labels.
    pub fn logical_amplitudes(&self, x: &PureState) -> Result<Vec<Vec<Complex64>>> {
        let r = self.coefficients(x)?;
        Ok(r.as_slice()
            .chunks(self.dim)
            .map(<[Complex64]>::to_vec)
            .collect())
    }

    /// R_a|x⟩ for every recovery pattern, as states in the code layout.
    pub fn recover(
        &self,
        x: &PureState,
        basis: &LogicalBasis,
    ) -> Result<Vec<(LossPattern, PureState)>> {
        let amps = self.logical_amplitudes(x)?;
        self.patterns
            .iter()
            .zip(amps)
            .map(|(p, a)| Ok((p.clone(), basis.superpose(&a)?)))
            .collect()
    }

    /// max |G G⁺ G − G|: zero when Σ R_a†R_a is the projector onto range(M).
    pub fn completeness_defect(&self) -> f64 {
        let g_pinv = &self.gram_inv_sqrt * &self.gram_inv_sqrt;
        let diff = &self.gram * g_pinv * &self.gram - &self.gram;
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Composes the transpose recovery with every input branch.
///
/// Output labels are (channel pattern, recovery pattern).
pub fn recover_transpose(
    ensemble: &BranchEnsemble<LossPattern>,
    basis: &LogicalBasis,
    gamma: DampingParam,
) -> Result<BranchEnsemble<(LossPattern, LossPattern)>> {
    let rec = TransposeRecovery::new(basis, gamma)?;
    let mut branches = Vec::new();
    for (b, state) in &ensemble.branches {
        for (a, out) in rec.recover(state, basis)? {
            if !out.is_empty() {
                branches.push(((b.clone(), a), out));
            }
        }
    }
    Ok(BranchEnsemble {
        branches,
        tail_probability: ensemble.tail_probability,
    })
}

/// d×d matrix L with L[i][j] = ⟨ī|B|j̄⟩.
pub type LogicalKraus = DMatrix<Complex64>;

/// F_e = Σ_k |Tr L_k / d|² for a set of logical Kraus matrices.
pub fn logical_entanglement_fidelity(ops: &[LogicalKraus]) -> f64 {
    ops.iter()
        .map(|l| (l.trace() / l.nrows() as f64).norm_sqr())
        .sum()
}

/// F_e of physical Kraus operators compressed to the code space.
pub fn entanglement_fidelity(ops: &[LinearMap], basis: &LogicalBasis) -> Result<f64> {
    let d = basis.dimension() as f64;
    let mut total = 0.0;
    for op in ops {
        let mut tr = Complex64::new(0.0, 0.0);
        for cw in basis.codewords() {
            tr += cw.inner(&op.apply(cw)?)?;
        }
        total += (tr / d).norm_sqr();
    }
    Ok(total)
}

/// Logical Kraus matrices of transpose recovery after each damaged branch.
///
/// `damaged[b][j]` holds 𝒜̂_b|j̄⟩.
pub fn transpose_logical_kraus(
    rec: &TransposeRecovery,
    damaged: &[Vec<PureState>],
) -> Result<Vec<LogicalKraus>> {
    let d = rec.dim;
    let na = rec.patterns.len();
    let mut out = Vec::with_capacity(damaged.len() * na);
    for column_states in damaged {
        let columns = column_states
            .iter()
            .map(|s| rec.coefficients(s))
            .collect::<Result<Vec<_>>>()?;
        for a in 0..na {
            out.push(DMatrix::from_fn(d, d, |i, j| columns[j][a * d + i]));
        }
    }
    Ok(out)
}

/// Logical Kraus matrices of syndrome measurement plus conditional re-excitation.
///
/// Each damaged branch splits into syndrome sectors. Correctable sectors are
/// shifted back up by the decoded pattern; the rest are left untouched.
pub fn naive_logical_kraus(
    basis: &LogicalBasis,
    damaged: &[Vec<PureState>],
) -> Result<Vec<LogicalKraus>> {
    let spec = *basis.spec();
    let observables = SyndromeObservables::new(spec)?;
    let d = basis.dimension();
    let mut out = Vec::new();
    for column_states in damaged {
        // syndrome tuple -> per-column recovered state
        let mut sectors: std::collections::BTreeMap<Vec<u32>, Vec<PureState>> = Default::default();
        for (j, s) in column_states.iter().enumerate() {
            for (occ, amp) in s.components() {
                let key = observables.evaluate(occ);
                let cols = sectors
                    .entry(key)
                    .or_insert_with(|| vec![PureState::zero(s.layout().clone()); d]);
                cols[j] = cols[j].add(&PureState::from_components(
                    s.layout().clone(),
                    [(occ.to_vec(), *amp)],
                )?)?;
            }
        }
        for (syndrome, cols) in sectors {
            let shift = match decode_lookup(&syndrome, &spec)? {
                Decoded::Correctable(p) => Some(p),
                _ => None,
            };
            let mut l = DMatrix::<Complex64>::zeros(d, d);
            for (j, col) in cols.iter().enumerate() {
                let recovered = match &shift {
                    Some(p) => shift_up(col, p)?,
                    None => col.clone(),
                };
                for (i, amp) in compress_to_code(&recovered, basis)?.into_iter().enumerate() {
                    l[(i, j)] = amp;
                }
            }
            out.push(l);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityPoint {
    pub gamma: f64,
    /// `None` for families without a syndrome decoder.
    pub infidelity_naive: Option<f64>,
    pub infidelity_transpose: f64,
    /// Average probability of loss patterns beyond the simulated weight.
    pub tail_bound: f64,
}

/// Channel patterns are simulated up to weight w+2; heavier ones only lower F_e.
pub fn fidelity_point(basis: &LogicalBasis, gamma: DampingParam) -> Result<FidelityPoint> {
    let spec = *basis.spec();
    let patterns = enumerate_loss_patterns(spec.num_modes(), spec.w + 2);
    let damaged = damaged_codewords(basis, gamma, &patterns)?;
    let d = basis.dimension() as f64;
    let kept: f64 = damaged
        .iter()
        .flatten()
        .map(PureState::norm_sqr)
        .sum::<f64>()
        / d;
    let rec = TransposeRecovery::new(basis, gamma)?;
    let transpose = logical_entanglement_fidelity(&transpose_logical_kraus(&rec, &damaged)?);
    let naive = if spec.family == CodeFamily::ExtendedBinomial {
        Some(1.0 - logical_entanglement_fidelity(&naive_logical_kraus(basis, &damaged)?))
    } else {
        None
    };
    Ok(FidelityPoint {
        gamma: gamma.value(),
        infidelity_naive: naive,
        infidelity_transpose: 1.0 - transpose,
        tail_bound: (1.0 - kept).max(0.0),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityCurve {
    pub points: Vec<FidelityPoint>,
    pub slope_transpose: f64,
    pub slope_naive: Option<f64>,
}

pub fn fidelity_curve(basis: &LogicalBasis, gamma_grid: &[f64]) -> Result<FidelityCurve> {
    validate_grid(gamma_grid, 2)?;
    let points = gamma_grid
        .iter()
        .map(|&g| fidelity_point(basis, DampingParam::new(g)?))
        .collect::<Result<Vec<_>>>()?;
    let tr: Vec<f64> = points.iter().map(|p| p.infidelity_transpose).collect();
    let (slope_transpose, _, _) = fit_log_log(gamma_grid, &tr, ZERO_FLOOR)?;
    let slope_naive = match points
        .iter()
        .map(|p| p.infidelity_naive)
        .collect::<Option<Vec<_>>>()
    {
        Some(ys) => Some(fit_log_log(gamma_grid, &ys, ZERO_FLOOR)?.0),
        None => None,
    };
    Ok(FidelityCurve {
        points,
        slope_transpose,
        slope_naive,
    })
}
