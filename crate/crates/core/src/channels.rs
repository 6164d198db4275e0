//! Quantum channels on a truncated mode: pure loss, Gaussian displacement
//! noise, e^{−εn̂} damping, the two-mode SUM gate and Steane-type GKP error
//! correction.

use std::f64::consts::PI;

use ndarray::{s, Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    coherent_tail_mass, note_leakage, Budget, DensityMatrix, FockCutoff, OperatorMatrix,
    PureState, QuadratureBasis, Space, LEAKAGE_FAIL,
};
use crate::linalg::{c, dagger, identity, kron, max_abs_diff, trace, CMatrix, CVector, C64};
use crate::quadrature::gauss_hermite;
use crate::states::{gkp_damped_detailed, GkpLogical, GkpParams};

/// Common interface of the maps applied to single-mode states.
pub trait Channel: Sync {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix>;
    fn label(&self) -> String;
}

/// A Kraus element, stored either densely or as K|n⟩ = d_n |n − shift⟩.
#[derive(Debug, Clone)]
pub enum KrausOp {
    Dense(CMatrix),
    Shifted { shift: usize, diag: Array1<f64> },
}

impl KrausOp {
    fn to_dense(&self, dim: usize) -> CMatrix {
        match self {
            KrausOp::Dense(m) => m.clone(),
            KrausOp::Shifted { shift, diag } => {
                let mut m = CMatrix::zeros((dim, dim));
                for n in *shift..dim {
                    m[[n - shift, n]] = c(diag[n], 0.0);
                }
                m
            }
        }
    }

    fn accumulate(&self, rho: &CMatrix, out: &mut CMatrix) {
        match self {
            KrausOp::Dense(k) => {
                *out += &k.dot(rho).dot(&dagger(k));
            }
            KrausOp::Shifted { shift, diag } => {
                let d = rho.nrows();
                let k = *shift;
                let w = diag.slice(s![k..]);
                let mut block = out.slice_mut(s![..d - k, ..d - k]);
                let src = rho.slice(s![k.., k..]);
                for ((i, j), o) in block.indexed_iter_mut() {
                    *o += src[[i, j]] * (w[i] * w[j]);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<KrausOp>,
    cutoff: FockCutoff,
    label: String,
}

/// Allowed deviation of Σ K†K from the identity.
pub const COMPLETENESS_TOL: f64 = 1e-8;

impl KrausChannel {
    /// Dense Kraus channel; fails unless Σ K†K = 𝕀 within tolerance.
    pub fn new(ops: Vec<OperatorMatrix>, label: impl Into<String>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidParameter("channel with no Kraus operators".into()))?;
        let space = first.space();
        if space.modes != 1 {
            return Err(Error::InvalidParameter("Kraus channels act on one mode".into()));
        }
        for op in &ops {
            if op.space() != space {
                return Err(Error::DimensionMismatch {
                    left: op.space().dim(),
                    right: space.dim(),
                });
            }
        }
        let ch = KrausChannel {
            ops: ops.into_iter().map(|o| KrausOp::Dense(o.into_matrix())).collect(),
            cutoff: space.cutoff,
            label: label.into(),
        };
        let defect = ch.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidParameter(format!(
                "Kraus operators are not trace preserving (defect {defect:.3e})"
            )));
        }
        Ok(ch)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn operator(&self, k: usize) -> OperatorMatrix {
        let m = self.ops[k].to_dense(self.cutoff.dim());
        let bound = match &self.ops[k] {
            KrausOp::Shifted { diag, .. } => diag.iter().cloned().fold(0.0, f64::max),
            KrausOp::Dense(_) => f64::INFINITY,
        };
        if bound.is_finite() {
            OperatorMatrix::with_bound(m, Space::single(self.cutoff), false, bound)
        } else {
            OperatorMatrix::general(m.clone(), Space::single(self.cutoff))
                .unwrap_or_else(|_| OperatorMatrix::with_bound(m, Space::single(self.cutoff), false, f64::INFINITY))
        }
    }

    /// max |Σ K†K − 𝕀| elementwise.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.cutoff.dim();
        let mut acc = CMatrix::zeros((d, d));
        for op in &self.ops {
            let k = op.to_dense(d);
            acc += &dagger(&k).dot(&k);
        }
        max_abs_diff(acc.view(), identity(d).view())
    }
}

impl Channel for KrausChannel {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.space() != Space::single(self.cutoff) {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.cutoff.dim(),
            });
        }
        let d = self.cutoff.dim();
        let mut out = CMatrix::zeros((d, d));
        for op in &self.ops {
            op.accumulate(rho.matrix(), &mut out);
        }
        Ok(DensityMatrix::single(out, self.cutoff)?.with_leakage(rho.leakage()))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub eta: f64,
}

/// K_k = √((1−η)^k/k!) η^{n̂/2} â^k for k = 0..dim−1, stored as shifted
/// diagonals: K_k|n⟩ = √(C(n,k) (1−η)^k η^{n−k}) |n−k⟩.
pub fn pure_loss(params: LossParams, cutoff: FockCutoff) -> Result<KrausChannel> {
    let eta = params.eta;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("transmissivity {eta} outside [0, 1]")));
    }
    let d = cutoff.dim();
    let mut log_fact = vec![0.0f64; d + 1];
    for n in 1..=d {
        log_fact[n] = log_fact[n - 1] + (n as f64).ln();
    }
    // x^p with 0^0 = 1.
    let pow = |x: f64, p: usize| if p == 0 { 1.0 } else { x.powi(p as i32) };
    let mut ops = Vec::with_capacity(d);
    for k in 0..d {
        let mut diag = Array1::zeros(d);
        for n in k..d {
            let binom = (log_fact[n] - log_fact[k] - log_fact[n - k]).exp();
            diag[n] = (binom * pow(1.0 - eta, k) * pow(eta, n - k)).sqrt();
        }
        ops.push(KrausOp::Shifted { shift: k, diag });
    }
    Ok(KrausChannel {
        ops,
        cutoff,
        label: format!("loss(eta={eta})"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussNoiseParams {
    /// Added variance per quadrature.
    pub sigma2: f64,
    /// Gauss–Hermite points per quadrature axis.
    pub quad_order: usize,
}

/// ρ ↦ Σ_j w_j D(α_j) ρ D(α_j)† on a tensor Gauss–Hermite grid for
/// independent N(0, σ²) shifts of x̂ and p̂.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    params: GaussNoiseParams,
    cutoff: FockCutoff,
    nodes: Vec<(C64, f64)>,
    basis: QuadratureBasis,
    leakage: f64,
}

pub fn gaussian_noise(params: GaussNoiseParams, cutoff: FockCutoff) -> Result<GaussianNoise> {
    if !(params.sigma2 >= 0.0) || params.quad_order == 0 {
        return Err(Error::InvalidParameter(format!(
            "Gaussian noise needs σ² ≥ 0 and a positive order, got {params:?}"
        )));
    }
    let (t, w) = gauss_hermite(params.quad_order)?;
    let total: f64 = w.sum();
    let scale = (2.0 * params.sigma2).sqrt();
    let mut nodes = Vec::with_capacity(t.len() * t.len());
    let mut leakage = 0.0;
    for (i, &tq) in t.iter().enumerate() {
        for (j, &tp) in t.iter().enumerate() {
            let weight = w[i] * w[j] / (total * total);
            // Quadrature shifts ξ = √2 σ t; α = (ξ_q + iξ_p)/√2.
            let alpha = c(scale * tq, scale * tp) / 2f64.sqrt();
            leakage += weight * coherent_tail_mass(alpha.norm_sqr(), cutoff.dim());
            nodes.push((alpha, weight));
        }
    }
    if leakage > LEAKAGE_FAIL {
        return Err(Error::Truncation {
            leakage,
            limit: LEAKAGE_FAIL,
            context: format!("Gaussian noise σ² = {} at cutoff {}", params.sigma2, cutoff.dim()),
        });
    }
    note_leakage(leakage, "Gaussian noise");
    Ok(GaussianNoise {
        params,
        cutoff,
        nodes,
        basis: QuadratureBasis::new(cutoff)?,
        leakage,
    })
}

impl GaussianNoise {
    pub fn params(&self) -> GaussNoiseParams {
        self.params
    }

    /// (α_j, w_j) with Σ w_j = 1.
    pub fn nodes(&self) -> &[(C64, f64)] {
        &self.nodes
    }
}

impl Channel for GaussianNoise {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.space() != Space::single(self.cutoff) {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.cutoff.dim(),
            });
        }
        let d = self.cutoff.dim();
        let mut out = CMatrix::zeros((d, d));
        for &(alpha, w) in &self.nodes {
            if w < 1e-300 {
                continue;
            }
            let disp = self.basis.displacement(alpha);
            out.scaled_add(c(w, 0.0), &disp.dot(rho.matrix()).dot(&dagger(&disp)));
        }
        let tr = trace(&out).re;
        out.mapv_inplace(|z| z / tr);
        Ok(DensityMatrix::single(out, self.cutoff)?.with_leakage(rho.leakage().max(self.leakage)))
    }

    fn label(&self) -> String {
        format!(
            "gaussian_noise(sigma2={}, order={})",
            self.params.sigma2, self.params.quad_order
        )
    }
}

/// ρ ↦ N̂ρN̂ / Tr(N̂ρN̂) with N̂ = e^{−εn̂}.
#[derive(Debug, Clone, Copy)]
pub struct Damping {
    pub epsilon: f64,
    pub cutoff: FockCutoff,
}

pub fn damping(epsilon: f64, cutoff: FockCutoff) -> Result<Damping> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("damping ε = {epsilon} is negative")));
    }
    Ok(Damping { epsilon, cutoff })
}

impl Damping {
    fn factors(&self) -> Array1<f64> {
        Array1::from_iter((0..self.cutoff.dim()).map(|n| (-self.epsilon * n as f64).exp()))
    }

    pub fn apply_pure(&self, psi: &PureState) -> Result<PureState> {
        let f = self.factors();
        let v = CVector::from_iter(psi.amplitudes().iter().zip(f.iter()).map(|(a, x)| a * *x));
        PureState::new(v, psi.space())
            .map_err(|_| Error::ZeroVector("damped state".into()))
            .map(|p| p.with_leakage(psi.leakage()))
    }
}

impl Channel for Damping {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let f = self.factors();
        let mut m = rho.matrix().clone();
        for ((i, j), z) in m.indexed_iter_mut() {
            *z *= f[i] * f[j];
        }
        let tr = trace(&m).re;
        if !(tr > 1e-300) {
            return Err(Error::ZeroVector("damped density matrix has zero trace".into()));
        }
        Ok(DensityMatrix::single(m.mapv(|z| z / tr), self.cutoff)?.with_leakage(rho.leakage()))
    }

    fn label(&self) -> String {
        format!("damping(epsilon={})", self.epsilon)
    }
}

/// exp(−i q̂₁⊗p̂₂) = (U⊗V) diag(e^{−i x_i p_j}) (U⊗V)† in the joint
/// quadrature eigenbasis.
pub fn sum_gate(cutoff: FockCutoff, budget: Budget) -> Result<OperatorMatrix> {
    let d = cutoff.dim();
    budget.check(d * d)?;
    let basis = QuadratureBasis::new(cutoff)?;
    let x = basis.nodes();
    let w = kron(basis.position_vectors(), basis.momentum_vectors());
    let phases = CVector::from_iter(
        (0..d * d).map(|ij| C64::from_polar(1.0, -x[ij / d] * x[ij % d])),
    );
    let m = crate::linalg::conjugate_diag(&w, &phases);
    Ok(OperatorMatrix::with_bound(m, Space::pair(cutoff), false, 1.0))
}

/// m − √π·round(m/√π) with ties rounded toward zero.
pub fn lattice_residue(m: f64) -> f64 {
    let spacing = PI.sqrt();
    let k = m / spacing;
    let n = k.signum() * (k.abs() - 0.5).ceil();
    m - spacing * n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpEcConfig {
    /// Damping ε of the ancilla codewords.
    pub ancilla_epsilon: f64,
    /// Outcomes below this probability are dropped.
    pub outcome_floor: f64,
}

impl GkpEcConfig {
    pub fn new(ancilla_epsilon: f64) -> Self {
        GkpEcConfig {
            ancilla_epsilon,
            outcome_floor: 1e-14,
        }
    }
}

/// One round of Steane-type GKP error correction, averaged over outcomes.
///
/// The q round couples the data to a |+̄⟩ ancilla with exp(−i q̂_d⊗p̂_a),
/// measures q̂_a and shifts the data position back by the lattice residue.
/// The p round couples a |0̄⟩ ancilla with exp(−i q̂_a⊗p̂_d), measures p̂_a and
/// shifts the data momentum by the residue. Each measurement outcome is an
/// eigenvector of the truncated quadrature. Both rounds act through Kraus
/// operators diagonal in a quadrature basis, so the two-mode state is never
/// materialized.
#[derive(Debug, Clone)]
pub struct GkpErrorCorrection {
    cutoff: FockCutoff,
    config: GkpEcConfig,
    basis: QuadratureBasis,
    /// c_{ik} for the q round: rows are data position eigenvalues, columns outcomes.
    q_coeffs: CMatrix,
    p_coeffs: CMatrix,
    /// U†V.
    transfer: CMatrix,
    leakage: f64,
}

pub fn gkp_error_correction(config: GkpEcConfig, cutoff: FockCutoff) -> Result<GkpErrorCorrection> {
    let basis = QuadratureBasis::new(cutoff)?;
    let plus = gkp_damped_detailed(
        &GkpParams::new(config.ancilla_epsilon, GkpLogical::Plus),
        cutoff,
        LEAKAGE_FAIL,
    )?;
    let zero = gkp_damped_detailed(
        &GkpParams::new(config.ancilla_epsilon, GkpLogical::Zero),
        cutoff,
        LEAKAGE_FAIL,
    )?;
    Ok(build_ec(config, cutoff, basis, plus.state, zero.state))
}

fn build_ec(
    config: GkpEcConfig,
    cutoff: FockCutoff,
    basis: QuadratureBasis,
    plus: PureState,
    zero: PureState,
) -> GkpErrorCorrection {
    let u = basis.position_vectors();
    let v = basis.momentum_vectors();
    let transfer = dagger(u).dot(v);
    let nodes = basis.nodes();
    let d = cutoff.dim();

    // q round: c_{ik} = ⟨u_k| exp(−i x_i p̂) |+̄⟩ = [U†V (e^{−i x_i p} ∘ V†a)]_k.
    let a_p = dagger(v).dot(plus.amplitudes());
    let mut shifted = CMatrix::zeros((d, d));
    for (i, mut col) in shifted.axis_iter_mut(Axis(1)).enumerate() {
        for j in 0..d {
            col[j] = a_p[j] * C64::from_polar(1.0, -nodes[i] * nodes[j]);
        }
    }
    let q_coeffs = transfer.dot(&shifted).reversed_axes();

    // p round: c_{jk} = ⟨v_k| exp(−i p_j x̂) |0̄⟩ = [V†U (e^{−i p_j x} ∘ U†a)]_k.
    let a_q = dagger(u).dot(zero.amplitudes());
    for (j, mut col) in shifted.axis_iter_mut(Axis(1)).enumerate() {
        for i in 0..d {
            col[i] = a_q[i] * C64::from_polar(1.0, -nodes[j] * nodes[i]);
        }
    }
    let p_coeffs = dagger(&transfer).dot(&shifted).reversed_axes();

    GkpErrorCorrection {
        cutoff,
        config,
        leakage: plus.leakage().max(zero.leakage()),
        basis,
        q_coeffs,
        p_coeffs,
        transfer,
    }
}

impl GkpErrorCorrection {
    /// Averages (φ_k φ_k†)∘(T σ_k T†) over outcomes k, with σ_k = (c_k c_k†)∘ρ_b
    /// in the measured basis and φ_k the correction phases in the other one.
    fn round(&self, rho_b: &CMatrix, coeffs: &CMatrix, to_other: &CMatrix) -> CMatrix {
        let d = self.cutoff.dim();
        let nodes = self.basis.nodes();
        let from_other = dagger(to_other);
        let mut out = CMatrix::zeros((d, d));
        for k in 0..d {
            let ck = coeffs.column(k);
            let prob: f64 = (0..d).map(|i| ck[i].norm_sqr() * rho_b[[i, i]].re).sum();
            if prob < self.config.outcome_floor {
                continue;
            }
            let mut sigma = rho_b.clone();
            for ((i, j), z) in sigma.indexed_iter_mut() {
                *z *= ck[i] * ck[j].conj();
            }
            let tau = to_other.dot(&sigma).dot(&from_other);
            let r = lattice_residue(nodes[k]);
            let phase = Array1::from_iter(nodes.iter().map(|&y| C64::from_polar(1.0, r * y)));
            for ((i, j), z) in out.indexed_iter_mut() {
                *z += tau[[i, j]] * phase[i] * phase[j].conj();
            }
        }
        out
    }

    fn q_round(&self, rho: &CMatrix) -> CMatrix {
        let u = self.basis.position_vectors();
        let v = self.basis.momentum_vectors();
        let rho_q = dagger(u).dot(rho).dot(u);
        // Position basis to momentum basis: V†U = T†.
        let out_p = self.round(&rho_q, &self.q_coeffs, &dagger(&self.transfer));
        v.dot(&out_p).dot(&dagger(v))
    }

    fn p_round(&self, rho: &CMatrix) -> CMatrix {
        let u = self.basis.position_vectors();
        let v = self.basis.momentum_vectors();
        let rho_p = dagger(v).dot(rho).dot(v);
        let out_q = self.round(&rho_p, &self.p_coeffs, &self.transfer);
        u.dot(&out_q).dot(&dagger(u))
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }
}

impl Channel for GkpErrorCorrection {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.space() != Space::single(self.cutoff) {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.cutoff.dim(),
            });
        }
        let after_q = self.q_round(rho.matrix());
        let mut out = self.p_round(&after_q);
        let tr = trace(&out).re;
        out.mapv_inplace(|z| z / tr);
        Ok(DensityMatrix::single(out, self.cutoff)?.with_leakage(rho.leakage().max(self.leakage)))
    }

    fn label(&self) -> String {
        format!("gkp_ec(ancilla_epsilon={})", self.config.ancilla_epsilon)
    }
}

/// Sequential composition.
pub struct Composite<'a> {
    pub stages: Vec<&'a dyn Channel>,
}

impl Channel for Composite<'_> {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let mut cur = rho.clone();
        for st in &self.stages {
            cur = st.apply(&cur)?;
        }
        Ok(cur)
    }

    fn label(&self) -> String {
        self.stages.iter().map(|s| s.label()).collect::<Vec<_>>().join(" ∘ ")
    }
}
