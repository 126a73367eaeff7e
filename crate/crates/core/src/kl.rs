//! Approximate Knill–Laflamme checks for damping errors.
//!
//! For codewords |ī⟩ and loss patterns k, ℓ of weight at most `max_weight`
//! the report holds ⟨ī|𝒜̂_k†𝒜̂_ℓ|j̄⟩ and three summary maxima:
//!
//! * `offdiag_max`: entries with i ≠ j (should vanish exactly),
//! * `cross_max`: entries with i = j and k ≠ ℓ (should vanish exactly),
//! * `diag_deviation`: spread of ⟨ī|𝒜̂_k†𝒜̂_k|ī⟩ across labels, O(γ^{w+1}).

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::channels::{damage, enumerate_loss_patterns, DampingParam, LossPattern};
use crate::codes::{CodeSpec, LogicalBasis};
use crate::error::{Error, Result};
use crate::fock::PureState;

/// Deviations below this are treated as exact zeros.
pub const ZERO_FLOOR: f64 = 1e-14;

/// Index (i, j, k, ℓ) into a [`KlReport`]; `k` and `l` index `patterns`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct KlIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

#[derive(Clone, Debug)]
pub struct KlReport {
    pub spec: CodeSpec,
    pub gamma: f64,
    pub patterns: Vec<LossPattern>,
    pub offdiag_max: f64,
    pub cross_max: f64,
    pub diag_deviation: f64,
    entries: BTreeMap<KlIndex, Complex64>,
}

impl KlReport {
    /// ⟨ī|𝒜̂_k†𝒜̂_ℓ|j̄⟩ (zero when not stored).
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.entries
            .get(&KlIndex { i, j, k, l })
            .copied()
            .unwrap_or_default()
    }

    /// Nonzero entries in lexicographic (i, j, k, ℓ) order.
    pub fn entries(&self) -> impl Iterator<Item = (&KlIndex, &Complex64)> {
        self.entries.iter()
    }

    /// Max |E(i,j,k,ℓ) − conj(E(j,i,ℓ,k))|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|(ix, v)| (v - self.entry(ix.j, ix.i, ix.l, ix.k).conj()).norm())
            .chain(std::iter::once(0.0))
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> KlSummary {
        KlSummary {
            spec: self.spec,
            gamma: self.gamma,
            num_patterns: self.patterns.len(),
            offdiag_max: self.offdiag_max,
            cross_max: self.cross_max,
            diag_deviation: self.diag_deviation,
        }
    }
}

/// Serializable summary of a [`KlReport`].
#[derive(Clone, Debug, Serialize)]
pub struct KlSummary {
    pub spec: CodeSpec,
    pub gamma: f64,
    pub num_patterns: usize,
    pub offdiag_max: f64,
    pub cross_max: f64,
    pub diag_deviation: f64,
}

/// 𝒜̂_a|ī⟩ for every pattern a (outer index) and label i (inner index).
pub(crate) fn damaged_codewords(
    basis: &LogicalBasis,
    gamma: DampingParam,
    patterns: &[LossPattern],
) -> Result<Vec<Vec<PureState>>> {
    patterns
        .iter()
        .map(|p| {
            basis
                .codewords()
                .iter()
                .map(|cw| damage(cw, p, gamma))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Full KL matrix over all patterns of weight ≤ `max_weight`.
pub fn kl_matrix(basis: &LogicalBasis, gamma: DampingParam, max_weight: u32) -> Result<KlReport> {
    let spec = *basis.spec();
    let patterns = enumerate_loss_patterns(spec.num_modes(), max_weight);
    let damaged = damaged_codewords(basis, gamma, &patterns)?;
    let d = basis.dimension();

    let mut entries = BTreeMap::new();
    let (mut offdiag_max, mut cross_max) = (0.0f64, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            for (k, dk) in damaged.iter().enumerate() {
                if dk[i].is_empty() {
                    continue;
                }
                for (l, dl) in damaged.iter().enumerate() {
                    let v = dk[i].inner(&dl[j])?;
                    if v == Complex64::default() {
                        continue;
                    }
                    if i != j {
                        offdiag_max = offdiag_max.max(v.norm());
                    } else if k != l {
                        cross_max = cross_max.max(v.norm());
                    }
                    entries.insert(KlIndex { i, j, k, l }, v);
                }
            }
        }
    }

    let mut diag_deviation = 0.0f64;
    for (k, pattern) in patterns.iter().enumerate() {
        if pattern.weight() > spec.w {
            continue;
        }
        let reference = damaged[k][0].norm_sqr();
        for state in &damaged[k] {
            diag_deviation = diag_deviation.max((state.norm_sqr() - reference).abs());
        }
    }

    Ok(KlReport {
        spec,
        gamma: gamma.value(),
        patterns,
        offdiag_max,
        cross_max,
        diag_deviation,
        entries,
    })
}

/// |⟨ī|𝒜̂_k†𝒜̂_k|ī⟩ − ⟨0̄|𝒜̂_k†𝒜̂_k|0̄⟩| maximized over labels, for each correctable k.
pub fn diagonal_deviations_by_pattern(
    basis: &LogicalBasis,
    gamma: DampingParam,
) -> Result<Vec<(LossPattern, f64)>> {
    let spec = basis.spec();
    let patterns = enumerate_loss_patterns(spec.num_modes(), spec.w);
    let damaged = damaged_codewords(basis, gamma, &patterns)?;
    Ok(patterns
        .into_iter()
        .zip(damaged)
        .map(|(p, states)| {
            let reference = states[0].norm_sqr();
            let dev = states
                .iter()
                .map(|s| (s.norm_sqr() - reference).abs())
                .fold(0.0, f64::max);
            (p, dev)
        })
        .collect())
}

/// Max over correctable patterns of the diagonal spread.
pub fn diagonal_deviation(basis: &LogicalBasis, gamma: DampingParam) -> Result<f64> {
    Ok(diagonal_deviations_by_pattern(basis, gamma)?
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max))
}

/// C(n, k)(1−γ)^{n−k}γ^k: the diagonal of Â_k†Â_k on |n⟩.
pub fn analytic_alpha(occupation: u32, losses: u32, gamma: DampingParam) -> f64 {
    if losses > occupation {
        return 0.0;
    }
    let g = gamma.value();
    let mut coeff = 1.0;
    for t in 0..losses {
        coeff = coeff * (occupation - t) as f64 / (t + 1) as f64;
    }
    coeff * (1.0 - g).powi((occupation - losses) as i32) * g.powi(losses as i32)
}

/// ⟨s|𝒜̂_k†𝒜̂_k|s⟩ = Σ_n |c_n|² Π_j α(n_j, k_j), from the closed-form diagonal.
pub fn analytic_diagonal(state: &PureState, pattern: &LossPattern, gamma: DampingParam) -> f64 {
    state
        .components()
        .map(|(occ, amp)| {
            amp.norm_sqr()
                * occ
                    .iter()
                    .zip(pattern.entries())
                    .map(|(&n, &k)| analytic_alpha(n, k, gamma))
                    .product::<f64>()
        })
        .sum()
}

/// Log-log least-squares fit of residual against γ.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub gamma_grid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub used_points: usize,
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    // endpoints are returned exactly
    (0..n)
        .map(|t| match t {
            0 => lo,
            t if t == n - 1 => hi,
            t => (a + (b - a) * t as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Default grid: 8 log-spaced points in [1e−3, 1e−2].
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(1e-3, 1e-2, 8)
}

/// Ordinary least squares of ln(y) on ln(x), skipping y below `floor`.
pub fn fit_log_log(xs: &[f64], ys: &[f64], floor: f64) -> Result<(f64, f64, usize)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y >= floor && y.is_finite())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientFitPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientFitPoints(1));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx, pts.len()))
}

/// Checks a γ grid: at least `min_points`, strictly increasing, within (0, 0.05].
pub fn validate_grid(grid: &[f64], min_points: usize) -> Result<()> {
    if grid.len() < min_points {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least {min_points} points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|&g| !(g > 0.0 && g <= 0.05)) {
        return Err(Error::InvalidParameter(
            "grid values must lie in (0, 0.05]".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Slope of log(diagonal_deviation) against log(γ).
pub fn fit_residual_scaling(basis: &LogicalBasis, gamma_grid: &[f64]) -> Result<ScalingFit> {
    validate_grid(gamma_grid, 5)?;
    let residuals = gamma_grid
        .iter()
        .map(|&g| diagonal_deviation(basis, DampingParam::new(g)?))
        .collect::<Result<Vec<_>>>()?;
    let (slope, intercept, used_points) = fit_log_log(gamma_grid, &residuals, ZERO_FLOOR)?;
    Ok(ScalingFit {
        gamma_grid: gamma_grid.to_vec(),
        residuals,
        slope,
        intercept,
        used_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{CodeFamily, CodeSpec};

    fn ext(w: u32, k: u32) -> LogicalBasis {
        LogicalBasis::new(CodeSpec::extended(w, k).unwrap()).unwrap()
    }

    fn g(x: f64) -> DampingParam {
        DampingParam::new(x).unwrap()
    }

    #[test]
    fn w1_k1_steps_one_and_two_vanish() {
        let basis = ext(1, 1);
        for gamma in [1e-3, 2e-2, 0.05] {
            let r = kl_matrix(&basis, g(gamma), 1).unwrap();
            assert!(r.offdiag_max < 1e-14);
            assert!(r.cross_max < 1e-14);
            assert!(r.hermiticity_defect() < 1e-15);
        }
    }

    #[test]
    fn no_damping_gives_identity_structure() {
        let basis = ext(1, 2);
        let r = kl_matrix(&basis, g(0.0), 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..r.patterns.len() {
                    for l in 0..r.patterns.len() {
                        let expected = if i == j && k == l && k == 0 { 1.0 } else { 0.0 };
                        assert!((r.entry(i, j, k, l).re - expected).abs() < 1e-14);
                    }
                }
            }
        }
        assert_eq!(r.diag_deviation, 0.0);
    }

    #[test]
    fn w1_k1_deviation_closed_forms() {
        let basis = ext(1, 1);
        for gamma in [1e-3, 1e-2, 0.04] {
            let by = diagonal_deviations_by_pattern(&basis, g(gamma)).unwrap();
            let zero = by.iter().find(|(p, _)| p.weight() == 0).unwrap().1;
            assert!((zero - (2.0 * gamma - gamma * gamma).powi(2) / 2.0).abs() < 1e-15);
            // single loss: γ(1−γ)³ on |0̄⟩ versus γ(1−γ) on |1̄⟩
            let single = by.iter().find(|(p, _)| p.entries() == [1, 0]).unwrap().1;
            let expected = gamma * (1.0 - gamma) - gamma * (1.0 - gamma).powi(3);
            assert!((single - expected).abs() < 1e-15);
            assert!((diagonal_deviation(&basis, g(gamma)).unwrap() - zero).abs() < 1e-15);
        }
        assert_eq!(diagonal_deviation(&basis, g(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn analytic_alpha_values() {
        let gamma = 0.013;
        assert!((analytic_alpha(2, 1, g(gamma)) - 2.0 * gamma * (1.0 - gamma)).abs() < 1e-16);
        assert!((analytic_alpha(5, 0, g(gamma)) - (1.0 - gamma).powi(5)).abs() < 1e-16);
        assert_eq!(analytic_alpha(1, 2, g(gamma)), 0.0);
    }

    #[test]
    fn analytic_diagonal_matches_matrix_entries() {
        for (w, k) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let basis = ext(w, k);
            let gamma = g(0.03);
            let r = kl_matrix(&basis, gamma, w).unwrap();
            for (pi, p) in r.patterns.iter().enumerate() {
                for (i, cw) in basis.codewords().iter().enumerate() {
                    let numeric = r.entry(i, i, pi, pi).re;
                    assert!((numeric - analytic_diagonal(cw, p, gamma)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn binomial_families_satisfy_exact_steps() {
        for family in [
            CodeFamily::OneModeBinomial,
            CodeFamily::TwoModeBinomial,
            CodeFamily::QubitShorAd,
        ] {
            let basis = LogicalBasis::new(CodeSpec::new(family, 1, 1).unwrap()).unwrap();
            let r = kl_matrix(&basis, g(0.01), 1).unwrap();
            assert!(r.offdiag_max < 1e-13, "{family}");
            assert!(r.cross_max < 1e-13, "{family}");
        }
    }

    #[test]
    fn fit_recovers_known_power() {
        let xs = log_grid(1e-3, 1e-2, 8);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powi(3)).collect();
        let (slope, intercept, used) = fit_log_log(&xs, &ys, ZERO_FLOOR).unwrap();
        assert!((slope - 3.0).abs() < 1e-12);
        assert!((intercept - 3f64.ln()).abs() < 1e-10);
        assert_eq!(used, 8);
    }

    #[test]
    fn fit_skips_exact_zeros() {
        let xs = log_grid(1e-3, 1e-2, 5);
        let ys = vec![0.0; 5];
        assert!(matches!(
            fit_log_log(&xs, &ys, ZERO_FLOOR),
            Err(Error::InsufficientFitPoints(0))
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.001, 0.002], 5).is_err());
        assert!(validate_grid(&[0.001, 0.002, 0.003, 0.004, 0.06], 5).is_err());
        assert!(validate_grid(&[0.001, 0.003, 0.002, 0.004, 0.005], 5).is_err());
        assert!(validate_grid(&default_gamma_grid(), 5).is_ok());
        let grid = default_gamma_grid();
        assert!((grid[0] - 1e-3).abs() < 1e-18 && (grid[7] - 1e-2).abs() < 1e-17);
    }

    #[test]
    fn residual_slopes() {
        let fit = fit_residual_scaling(&ext(1, 1), &default_gamma_grid()).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.05, "slope {}", fit.slope);
        let fit = fit_residual_scaling(&ext(2, 1), &default_gamma_grid()).unwrap();
        assert!(fit.slope >= 2.85, "slope {}", fit.slope);
    }
}
