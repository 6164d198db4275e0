//! Truncated Fock-space objects: states, bounded operators, and the standard
//! single-mode operators built on levels `0..dim`.

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, dagger, eigh, eigvalsh, expm, from_real_diag, hermitian_part, hermiticity_defect,
    identity, kron, psd_sqrt, singular_values, trace, trace_product, CMatrix, CVector, C64,
};

/// Elementwise Hermiticity tolerance for operators flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Most negative eigenvalue accepted in a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Leakage above this is logged.
pub const LEAKAGE_WARN: f64 = 1e-8;
/// Leakage above this is a `Truncation` error.
pub const LEAKAGE_FAIL: f64 = 1e-6;

// Raw input matrices further than this from Hermitian are rejected before
// symmetrization; anything closer is round-off.
const RAW_HERMITIAN_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::CutoffTooSmall(dim));
        }
        Ok(FockCutoff(dim))
    }

    pub fn dim(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for FockCutoff {
    type Error = Error;
    fn try_from(dim: usize) -> Result<Self> {
        FockCutoff::new(dim)
    }
}

impl From<FockCutoff> for usize {
    fn from(c: FockCutoff) -> usize {
        c.0
    }
}

/// One or two modes, each truncated at the same cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Space {
    pub cutoff: FockCutoff,
    pub modes: u8,
}

impl Space {
    pub fn single(cutoff: FockCutoff) -> Self {
        Space { cutoff, modes: 1 }
    }

    pub fn pair(cutoff: FockCutoff) -> Self {
        Space { cutoff, modes: 2 }
    }

    pub fn dim(self) -> usize {
        self.cutoff.dim().pow(self.modes as u32)
    }

    fn product(self, other: Space) -> Result<Space> {
        if self.cutoff != other.cutoff {
            return Err(Error::DimensionMismatch {
                left: self.cutoff.dim(),
                right: other.cutoff.dim(),
            });
        }
        if self.modes + other.modes > 2 {
            return Err(Error::InvalidParameter(
                "products beyond two modes are not supported".into(),
            ));
        }
        Ok(Space {
            cutoff: self.cutoff,
            modes: self.modes + other.modes,
        })
    }

    fn ensure_same(self, other: Space) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

/// Limit on materialized product-space matrices, in complex entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_entries: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_entries: 4096 * 4096,
        }
    }
}

impl Budget {
    pub fn check(self, dim: usize) -> Result<()> {
        let entries = dim.saturating_mul(dim);
        if entries > self.max_entries {
            return Err(Error::BudgetExceeded {
                entries,
                budget: self.max_entries,
            });
        }
        Ok(())
    }
}

pub(crate) fn note_leakage(leakage: f64, context: &str) {
    if leakage > LEAKAGE_WARN {
        log::warn!("truncation leakage {leakage:.3e} in {context}");
    }
}

#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: CVector,
    space: Space,
    leakage: f64,
}

impl PureState {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn new(amplitudes: CVector, space: Space) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: space.dim(),
            });
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::ZeroVector("pure state".into()));
        }
        Ok(PureState {
            amplitudes: amplitudes.mapv(|z| z / norm),
            space,
            leakage: 0.0,
        })
    }

    pub fn single(amplitudes: CVector, cutoff: FockCutoff) -> Result<Self> {
        Self::new(amplitudes, Space::single(cutoff))
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.leakage = self.leakage.max(leakage);
        self
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.space.cutoff
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// Σ_{j ≥ k} |a_j|².
    pub fn tail_mass(&self, k: usize) -> f64 {
        self.amplitudes
            .iter()
            .skip(k)
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.space.ensure_same(other.space)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        self.space.ensure_same(op.space)?;
        let v = op.matrix.dot(&self.amplitudes);
        Ok(self
            .amplitudes
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `op |ψ⟩`, renormalized.
    pub fn apply(&self, op: &OperatorMatrix) -> Result<PureState> {
        self.space.ensure_same(op.space)?;
        Ok(PureState::new(op.matrix.dot(&self.amplitudes), self.space)?
            .with_leakage(self.leakage.max(op.leakage)))
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let space = self.space.product(other.space)?;
        Ok(PureState {
            amplitudes: linalg::kron_vec(&self.amplitudes, &other.amplitudes),
            space,
            leakage: self.leakage.max(other.leakage),
        })
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: linalg::outer(&self.amplitudes, &self.amplitudes),
            space: self.space,
            leakage: self.leakage,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    space: Space,
    leakage: f64,
}

impl DensityMatrix {
    /// Symmetrizes once, then checks trace and positivity.
    pub fn new(matrix: CMatrix, space: Space) -> Result<Self> {
        if matrix.dim() != (space.dim(), space.dim()) {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: space.dim(),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > RAW_HERMITIAN_LIMIT {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let matrix = hermitian_part(&matrix);
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr:.12} differs from 1")));
        }
        let min_eig = eigvalsh(&matrix)?.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min_eig:.3e} is negative"
            )));
        }
        Ok(DensityMatrix {
            matrix,
            space,
            leakage: 0.0,
        })
    }

    pub fn single(matrix: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        Self::new(matrix, Space::single(cutoff))
    }

    /// Divides by the trace before validating.
    pub fn normalized(matrix: CMatrix, space: Space) -> Result<Self> {
        let tr = trace(&matrix).re;
        if !(tr > 1e-300) {
            return Err(Error::ZeroVector("density matrix with zero trace".into()));
        }
        Self::new(matrix.mapv(|z| z / tr), space)
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.leakage = self.leakage.max(leakage);
        self
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.space.cutoff
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// Tr(O ρ); the real part for Hermitian O.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<f64> {
        self.space.ensure_same(op.space)?;
        Ok(trace_product(&op.matrix, &self.matrix).re)
    }

    pub fn expectation_complex(&self, op: &OperatorMatrix) -> Result<C64> {
        self.space.ensure_same(op.space)?;
        Ok(trace_product(&op.matrix, &self.matrix))
    }

    /// Σ w_k ρ_k for weights summing to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let space = first.1.space;
        let mut acc = CMatrix::zeros((space.dim(), space.dim()));
        let mut leakage: f64 = 0.0;
        for (w, rho) in parts {
            space.ensure_same(rho.space)?;
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative weight {w}")));
            }
            acc.scaled_add(c(*w, 0.0), &rho.matrix);
            leakage = leakage.max(rho.leakage);
        }
        Ok(DensityMatrix::new(acc, space)?.with_leakage(leakage))
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    pub fn mean_photon_number(&self) -> f64 {
        if self.space.modes != 1 {
            return f64::NAN;
        }
        self.matrix
            .diag()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum()
    }

    pub fn tensor(&self, other: &DensityMatrix, budget: Budget) -> Result<DensityMatrix> {
        let space = self.space.product(other.space)?;
        budget.check(space.dim())?;
        Ok(DensityMatrix {
            matrix: kron(&self.matrix, &other.matrix),
            space,
            leakage: self.leakage.max(other.leakage),
        })
    }

    /// The difference ρ − σ as a Hermitian operator.
    pub fn difference(&self, other: &DensityMatrix) -> Result<OperatorMatrix> {
        self.space.ensure_same(other.space)?;
        Ok(OperatorMatrix {
            matrix: &self.matrix - &other.matrix,
            space: self.space,
            hermitian: true,
            norm_bound: 2.0,
            leakage: self.leakage.max(other.leakage),
        })
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        Ok(0.5 * trace_norm(&self.difference(other)?)?)
    }

}

/// A bounded operator together with a certified bound on its spectral norm.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    matrix: CMatrix,
    space: Space,
    hermitian: bool,
    norm_bound: f64,
    leakage: f64,
}

impl OperatorMatrix {
    /// Hermitian operator whose norm bound is taken from its spectrum.
    pub fn hermitian(matrix: CMatrix, space: Space) -> Result<Self> {
        if matrix.dim() != (space.dim(), space.dim()) {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: space.dim(),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > RAW_HERMITIAN_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        let matrix = hermitian_part(&matrix);
        let spectrum = eigvalsh(&matrix)?;
        let norm = spectrum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(OperatorMatrix {
            matrix,
            space,
            hermitian: true,
            norm_bound: norm * (1.0 + 1e-12) + 1e-14,
            leakage: 0.0,
        })
    }

    /// Caller certifies `norm_bound`.
    pub fn with_bound(matrix: CMatrix, space: Space, hermitian: bool, norm_bound: f64) -> Self {
        OperatorMatrix {
            matrix,
            space,
            hermitian,
            norm_bound,
            leakage: 0.0,
        }
    }

    /// Non-Hermitian operator bounded by its largest singular value.
    pub fn general(matrix: CMatrix, space: Space) -> Result<Self> {
        let norm = singular_values(&matrix)?.iter().cloned().fold(0.0, f64::max);
        Ok(OperatorMatrix {
            matrix,
            space,
            hermitian: false,
            norm_bound: norm * (1.0 + 1e-12) + 1e-14,
            leakage: 0.0,
        })
    }

    pub fn identity(space: Space) -> Self {
        OperatorMatrix::with_bound(identity(space.dim()), space, true, 1.0)
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.leakage = self.leakage.max(leakage);
        self
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn scale(&self, t: f64) -> OperatorMatrix {
        OperatorMatrix {
            matrix: self.matrix.mapv(|z| z * t),
            space: self.space,
            hermitian: self.hermitian,
            norm_bound: self.norm_bound * t.abs(),
            leakage: self.leakage,
        }
    }

    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix {
            matrix: dagger(&self.matrix),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.space.ensure_same(other.space)?;
        Ok(OperatorMatrix {
            matrix: self.matrix.dot(&other.matrix),
            space: self.space,
            hermitian: false,
            norm_bound: self.norm_bound * other.norm_bound,
            leakage: self.leakage.max(other.leakage),
        })
    }

    /// Eigenvalues (ascending); only meaningful for Hermitian operators.
    pub fn spectrum(&self) -> Result<Array1<f64>> {
        if !self.hermitian {
            return Err(Error::Precondition("spectrum of a non-Hermitian operator".into()));
        }
        eigvalsh(&self.matrix)
    }

    pub fn tensor(&self, other: &OperatorMatrix, budget: Budget) -> Result<OperatorMatrix> {
        let space = self.space.product(other.space)?;
        budget.check(space.dim())?;
        Ok(OperatorMatrix {
            matrix: kron(&self.matrix, &other.matrix),
            space,
            hermitian: self.hermitian && other.hermitian,
            norm_bound: self.norm_bound * other.norm_bound,
            leakage: self.leakage.max(other.leakage),
        })
    }
}

/// Returns (â, â†, n̂). [â, â†] = 𝕀 holds only on the leading (dim−1) block.
pub fn ladder_ops(cutoff: FockCutoff) -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    let d = cutoff.dim();
    let space = Space::single(cutoff);
    let mut a = CMatrix::zeros((d, d));
    for j in 1..d {
        a[[j - 1, j]] = c((j as f64).sqrt(), 0.0);
    }
    let top = ((d - 1) as f64).sqrt();
    let adag = dagger(&a);
    let n = from_real_diag(&Array1::from_iter((0..d).map(|j| j as f64)));
    (
        OperatorMatrix::with_bound(a, space, false, top),
        OperatorMatrix::with_bound(adag, space, false, top),
        OperatorMatrix::with_bound(n, space, true, (d - 1) as f64),
    )
}

/// Π = Σ (−1)ⁿ |n⟩⟨n|.
pub fn parity_op(cutoff: FockCutoff) -> OperatorMatrix {
    let d = cutoff.dim();
    let diag = Array1::from_iter((0..d).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }));
    OperatorMatrix::with_bound(from_real_diag(&diag), Space::single(cutoff), true, 1.0)
}

/// Truncated quadratures x̂ = (â+â†)/√2 and p̂ = (â−â†)/(i√2).
pub fn quadrature_ops(cutoff: FockCutoff) -> (OperatorMatrix, OperatorMatrix) {
    let d = cutoff.dim();
    let space = Space::single(cutoff);
    let mut x = CMatrix::zeros((d, d));
    let mut p = CMatrix::zeros((d, d));
    for j in 1..d {
        let s = (j as f64).sqrt() * FRAC_1_SQRT_2;
        x[[j - 1, j]] = c(s, 0.0);
        x[[j, j - 1]] = c(s, 0.0);
        p[[j - 1, j]] = c(0.0, -s);
        p[[j, j - 1]] = c(0.0, s);
    }
    // Spectral radius of the truncated quadrature is below √(2·dim).
    let bound = (2.0 * d as f64).sqrt();
    (
        OperatorMatrix::with_bound(x, space, true, bound),
        OperatorMatrix::with_bound(p, space, true, bound),
    )
}

/// Poisson tail Σ_{n ≥ dim} e^{−μ} μⁿ/n!: the probability a coherent state of
/// mean photon number μ places above the cutoff.
pub fn coherent_tail_mass(mean_photons: f64, dim: usize) -> f64 {
    if mean_photons == 0.0 {
        return 0.0;
    }
    let mut term = (-mean_photons).exp();
    let mut head = 0.0;
    for n in 0..dim {
        head += term;
        term *= mean_photons / (n + 1) as f64;
    }
    (1.0 - head).max(0.0).max(term)
}

/// D(α) = exp(α â† − α* â) by scaling-and-squaring on the truncated
/// generator. Leakage is the coherent-state tail mass at this cutoff.
pub fn displacement_op(alpha: C64, cutoff: FockCutoff) -> Result<OperatorMatrix> {
    displacement_op_with_limit(alpha, cutoff, LEAKAGE_FAIL)
}

pub fn displacement_op_with_limit(
    alpha: C64,
    cutoff: FockCutoff,
    limit: f64,
) -> Result<OperatorMatrix> {
    let leakage = coherent_tail_mass(alpha.norm_sqr(), cutoff.dim());
    if leakage > limit {
        return Err(Error::Truncation {
            leakage,
            limit,
            context: format!("displacement by {alpha} at cutoff {}", cutoff.dim()),
        });
    }
    note_leakage(leakage, "displacement");
    let (a, adag, _) = ladder_ops(cutoff);
    let generator = &adag.matrix.mapv(|z| z * alpha) - &a.matrix.mapv(|z| z * alpha.conj());
    let d = expm(&generator)?;
    Ok(OperatorMatrix::with_bound(d, Space::single(cutoff), false, 1.0).with_leakage(leakage))
}

/// Eigenbases of the truncated x̂ and p̂. Both share the same spectrum (the
/// Gauss–Hermite nodes scaled by 1/√2·√2 = the roots of H_dim); the p̂ basis
/// is the x̂ basis rotated by e^{iπn̂/2}.
#[derive(Debug, Clone)]
pub struct QuadratureBasis {
    cutoff: FockCutoff,
    nodes: Array1<f64>,
    position: CMatrix,
    momentum: CMatrix,
}

impl QuadratureBasis {
    pub fn new(cutoff: FockCutoff) -> Result<Self> {
        let d = cutoff.dim();
        let mut x = Array2::<f64>::zeros((d, d));
        for j in 1..d {
            let s = (j as f64 / 2.0).sqrt();
            x[[j - 1, j]] = s;
            x[[j, j - 1]] = s;
        }
        let (nodes, vecs) = linalg::real_eigh(&x)?;
        let position = vecs.mapv(|v| c(v, 0.0));
        let mut momentum = position.clone();
        for (n, mut row) in momentum.axis_iter_mut(Axis(0)).enumerate() {
            let phase = quarter_turn(n);
            row.mapv_inplace(|z| z * phase);
        }
        Ok(QuadratureBasis {
            cutoff,
            nodes,
            position,
            momentum,
        })
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Common eigenvalues of the truncated x̂ and p̂, ascending.
    pub fn nodes(&self) -> &Array1<f64> {
        &self.nodes
    }

    /// Columns are eigenvectors of the truncated x̂.
    pub fn position_vectors(&self) -> &CMatrix {
        &self.position
    }

    /// Columns are eigenvectors of the truncated p̂.
    pub fn momentum_vectors(&self) -> &CMatrix {
        &self.momentum
    }

    /// exp(−i s p̂): translates x̂ by +s.
    pub fn position_shift(&self, s: f64) -> CMatrix {
        let phases = self.nodes.mapv(|p| C64::from_polar(1.0, -s * p));
        linalg::conjugate_diag(&self.momentum, &phases)
    }

    /// exp(+i s x̂): translates p̂ by +s.
    pub fn momentum_shift(&self, s: f64) -> CMatrix {
        let phases = self.nodes.mapv(|x| C64::from_polar(1.0, s * x));
        linalg::conjugate_diag(&self.position, &phases)
    }

    /// Same matrix as [`displacement_op`] (the exponential of the truncated
    /// generator), assembled from the p̂ eigenbasis: with α = |α|e^{iθ},
    /// D(α) = e^{iθn̂} exp(−i√2|α| p̂) e^{−iθn̂}.
    pub fn displacement(&self, alpha: C64) -> CMatrix {
        let (r, theta) = alpha.to_polar();
        let mut m = self.position_shift(std::f64::consts::SQRT_2 * r);
        let d = self.cutoff.dim();
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] *= C64::from_polar(1.0, theta * (i as f64 - j as f64));
            }
        }
        m
    }
}

/// iⁿ
pub(crate) fn quarter_turn(n: usize) -> C64 {
    match n % 4 {
        0 => c(1.0, 0.0),
        1 => c(0.0, 1.0),
        2 => c(-1.0, 0.0),
        _ => c(0.0, -1.0),
    }
}

/// Uhlmann fidelity (Tr√(√a b √a))².
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.space.ensure_same(b.space)?;
    // A pure argument reduces to an overlap, which avoids square roots of
    // round-off eigenvalues.
    for (p, q) in [(a, b), (b, a)] {
        if (p.purity() - 1.0).abs() < 1e-10 {
            let (vals, vecs) = eigh(&p.matrix)?;
            let top = vals.len() - 1;
            let psi = vecs.column(top).to_owned();
            let v = q.matrix.dot(&psi);
            let f: C64 = psi.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
            return Ok(f.re.clamp(0.0, 1.0));
        }
    }
    let root = psd_sqrt(&a.matrix)?;
    let inner = hermitian_part(&root.dot(&b.matrix).dot(&root));
    let vals = eigvalsh(&inner)?;
    let scale = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let s: f64 = vals
        .iter()
        .map(|&x| if x > 1e-13 * scale { x.sqrt() } else { 0.0 })
        .sum();
    Ok((s * s).clamp(0.0, 1.0))
}

/// Schatten-1 norm.
pub fn trace_norm(x: &OperatorMatrix) -> Result<f64> {
    if x.hermitian {
        Ok(eigvalsh(&x.matrix)?.iter().map(|v| v.abs()).sum())
    } else {
        Ok(singular_values(&x.matrix)?.sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    fn fock_state(n: usize, d: usize) -> PureState {
        let mut v = CVector::zeros(d);
        v[n] = c(1.0, 0.0);
        PureState::single(v, cut(d)).unwrap()
    }

    fn coherent_amplitudes(alpha: C64, d: usize) -> CVector {
        let mut v = CVector::zeros(d);
        let mut term = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..d {
            v[n] = term;
            term = term * alpha / ((n + 1) as f64).sqrt();
        }
        v
    }

    #[test]
    fn cutoff_rejects_single_level() {
        assert!(matches!(FockCutoff::new(1), Err(Error::CutoffTooSmall(1))));
        assert!(FockCutoff::new(2).is_ok());
    }

    #[test]
    fn ladder_matrix_elements() {
        let (a, _, n) = ladder_ops(cut(3));
        let one = fock_state(1, 3);
        let two = fock_state(2, 3);
        let a1 = a.matrix().dot(one.amplitudes());
        assert!((a1[0] - c(1.0, 0.0)).norm() < 1e-15);
        let a2 = a.matrix().dot(two.amplitudes());
        assert!((a2[1] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        let diag: Vec<f64> = n.matrix().diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn commutator_is_identity_on_leading_block() {
        let (a, adag, _) = ladder_ops(cut(20));
        let comm = &a.matrix().dot(adag.matrix()) - &adag.matrix().dot(a.matrix());
        let block = comm.slice(ndarray::s![..19, ..19]).to_owned();
        assert!(max_abs_diff(block.view(), identity(19).view()) < 1e-12);
        // The last level carries the truncation defect.
        assert!((comm[[19, 19]] - c(-19.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn parity_diagonal_and_involutive() {
        let p = parity_op(cut(4));
        let diag: Vec<f64> = p.matrix().diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
        let sq = p.matrix().dot(p.matrix());
        assert_eq!(max_abs_diff(sq.view(), identity(4).view()), 0.0);
        let one = fock_state(1, 4);
        assert!((one.expectation(&p).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn parity_of_thermal_state() {
        // Σ (−1)ⁿ n̄ⁿ/(n̄+1)ⁿ⁺¹ = 1/(2n̄+1).
        let d = 60;
        let nbar: f64 = 1.0;
        let diag = Array1::from_iter(
            (0..d).map(|n| nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1)),
        );
        let total = diag.sum();
        let rho = DensityMatrix::single(from_real_diag(&diag.mapv(|x| x / total)), cut(d)).unwrap();
        let val = rho.expectation(&parity_op(cut(d))).unwrap();
        assert!((val - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn parity_anticommutes_with_annihilation() {
        let d = 12;
        let (a, _, _) = ladder_ops(cut(d));
        let p = parity_op(cut(d));
        let conj = p.matrix().dot(a.matrix()).dot(p.matrix());
        assert_eq!(max_abs_diff(conj.view(), a.matrix().mapv(|z| -z).view()), 0.0);
    }

    #[test]
    fn displacement_examples() {
        let zero = displacement_op(c(0.0, 0.0), cut(6)).unwrap();
        assert!(max_abs_diff(zero.matrix().view(), identity(6).view()) < 1e-15);

        let d1 = displacement_op(c(1.0, 0.0), cut(30)).unwrap();
        assert!((d1.matrix()[[0, 0]] - c((-0.5f64).exp(), 0.0)).norm() < 1e-12);

        let alpha = c(0.7, 0.3);
        let fwd = displacement_op(alpha, cut(40)).unwrap();
        let back = displacement_op(-alpha, cut(40)).unwrap();
        let prod = fwd.matrix().dot(back.matrix());
        assert!(max_abs_diff(prod.view(), identity(40).view()) < 1e-8);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent_state() {
        let alpha = c(0.9, -0.6);
        let d = 30;
        let op = displacement_op(alpha, cut(d)).unwrap();
        let col = op.matrix().column(0).to_owned();
        let want = coherent_amplitudes(alpha, d);
        let err = col.iter().zip(want.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let unit = op.matrix().dot(&dagger(op.matrix()));
        assert!(max_abs_diff(unit.view(), identity(d).view()) < 1e-8);
    }

    #[test]
    fn displacement_guard_trips_far_from_origin() {
        let err = displacement_op(c(5.0, 0.0), cut(10)).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn displacement_composition_on_leading_block() {
        // D(α)D(β) = e^{i Im(αβ*)} D(α+β); the truncated generator breaks the
        // group law only near the top levels.
        let d = 40;
        let alpha = c(0.8, 0.5);
        let beta = c(-0.3, 0.9);
        let lhs = displacement_op(alpha, cut(d))
            .unwrap()
            .mul(&displacement_op(beta, cut(d)).unwrap())
            .unwrap();
        let phase = C64::from_polar(1.0, (alpha * beta.conj()).im);
        let rhs = displacement_op(alpha + beta, cut(d)).unwrap().matrix().mapv(|z| z * phase);
        let half = d / 2;
        let err = max_abs_diff(
            lhs.matrix().slice(ndarray::s![..half, ..half]),
            rhs.slice(ndarray::s![..half, ..half]),
        );
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn quadrature_basis_reproduces_expm_displacement() {
        let cutoff = cut(25);
        let basis = QuadratureBasis::new(cutoff).unwrap();
        for alpha in [c(0.4, 0.0), c(-0.3, 1.1), c(0.0, -0.8)] {
            let fast = basis.displacement(alpha);
            let slow = displacement_op(alpha, cutoff).unwrap();
            assert!(max_abs_diff(fast.view(), slow.matrix().view()) < 1e-10);
        }
        let (x, p) = quadrature_ops(cutoff);
        let vx = x.matrix().dot(basis.position_vectors());
        let vp = p.matrix().dot(basis.momentum_vectors());
        for k in 0..25 {
            let lam = basis.nodes()[k];
            for n in 0..25 {
                assert!((vx[[n, k]] - basis.position_vectors()[[n, k]] * lam).norm() < 1e-10);
                assert!((vp[[n, k]] - basis.momentum_vectors()[[n, k]] * lam).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn fidelity_examples() {
        let d = 30;
        let vac = fock_state(0, d).density();
        let one = fock_state(1, d).density();
        assert!((fidelity(&vac, &vac).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&vac, &one).unwrap().abs() < 1e-12);
        let coh = PureState::single(coherent_amplitudes(c(1.0, 0.0), d), cut(d)).unwrap().density();
        assert!((fidelity(&vac, &coh).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn fidelity_between_mixed_states_is_symmetric() {
        let d = 6;
        let a = DensityMatrix::single(
            from_real_diag(&Array1::from(vec![0.5, 0.2, 0.1, 0.1, 0.05, 0.05])),
            cut(d),
        )
        .unwrap();
        let mut m = from_real_diag(&Array1::from(vec![0.3, 0.3, 0.2, 0.1, 0.05, 0.05]));
        m[[0, 1]] = c(0.1, 0.05);
        m[[1, 0]] = c(0.1, -0.05);
        let b = DensityMatrix::single(m, cut(d)).unwrap();
        let fab = fidelity(&a, &b).unwrap();
        let fba = fidelity(&b, &a).unwrap();
        assert!((fab - fba).abs() < 1e-8);
        assert!(fab > 0.0 && fab < 1.0);
    }

    #[test]
    fn trace_norm_examples() {
        let d = 5;
        let space = Space::single(cut(d));
        assert!((trace_norm(&OperatorMatrix::identity(space)).unwrap() - 5.0).abs() < 1e-12);
        let vac = fock_state(0, d).density();
        let one = fock_state(1, d).density();
        assert!(trace_norm(&vac.difference(&vac).unwrap()).unwrap().abs() < 1e-12);
        assert!((trace_norm(&vac.difference(&one).unwrap()).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_examples() {
        let d = 4;
        let vac = fock_state(0, d).density();
        let one = fock_state(1, d).density();
        let prod = one.tensor(&vac, Budget::default()).unwrap();
        assert!((trace(prod.matrix()).re - 1.0).abs() < 1e-15);
        let pi_id = parity_op(cut(d))
            .tensor(&OperatorMatrix::identity(Space::single(cut(d))), Budget::default())
            .unwrap();
        assert!((prod.expectation(&pi_id).unwrap() + 1.0).abs() < 1e-15);
        let tiny = Budget { max_entries: 15 };
        assert!(matches!(
            one.tensor(&vac, tiny),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn mismatched_cutoffs_are_rejected() {
        let a = fock_state(0, 4).density();
        let b = fock_state(0, 5).density();
        assert!(matches!(fidelity(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(a.expectation(&parity_op(cut(5))).is_err());
    }

    #[test]
    fn invalid_density_matrices_are_rejected() {
        let cutoff = cut(3);
        let neg = from_real_diag(&Array1::from(vec![1.2, -0.2, 0.0]));
        assert!(matches!(
            DensityMatrix::single(neg, cutoff),
            Err(Error::InvalidState(_))
        ));
        let bad_trace = from_real_diag(&Array1::from(vec![0.5, 0.2, 0.0]));
        assert!(DensityMatrix::single(bad_trace, cutoff).is_err());
        let mut skew = from_real_diag(&Array1::from(vec![0.5, 0.5, 0.0]));
        skew[[0, 1]] = c(0.1, 0.0);
        assert!(DensityMatrix::single(skew, cutoff).is_err());
    }

    #[test]
    fn tail_mass_counts_upper_levels() {
        let v = Array1::from(vec![c(0.6, 0.0), c(0.0, 0.6), c(0.4, 0.0), c(0.0, 0.2), c(0.2, 0.0)]);
        let psi = PureState::single(v, cut(5)).unwrap();
        assert!((psi.tail_mass(0) - 1.0).abs() < 1e-14);
        assert!((psi.tail_mass(3) - 0.08 / 0.96).abs() < 1e-14);
    }
}
