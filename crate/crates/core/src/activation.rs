//! Witness-generated measure-and-prepare channels onto Werner states, and the
//! Werner-state correlation measures.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Budget, DensityMatrix, OperatorMatrix};
use crate::linalg::{c, dagger, eigvalsh, identity, kron, real_eigh, trace_product, CMatrix};
use crate::optimize::NelderMead;
use crate::phase_space::ZERO_TOL;
use crate::witness::{witness_matrix, witness_value, WitnessBox, WitnessProvenance, WitnessSpec, BOX_TOL};

/// Discord above this certifies a resourceful input.
pub const DISCORD_THRESHOLD: f64 = 1.0 / 18.0;
/// Agreement demanded between closed forms and matrix-level evaluations.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerState {
    pub q: f64,
}

impl WernerState {
    pub fn new(q: f64) -> Result<Self> {
        if !(-1.0 / 3.0 - ZERO_TOL..=1.0 + ZERO_TOL).contains(&q) {
            return Err(Error::InvalidParameter(format!("Werner q = {q} outside [-1/3, 1]")));
        }
        Ok(WernerState { q: q.clamp(-1.0 / 3.0, 1.0) })
    }

    /// From the singlet weight p: q = (4p − 1)/3.
    pub fn from_singlet_weight(p: f64) -> Result<Self> {
        Self::new((4.0 * p - 1.0) / 3.0)
    }

    pub fn singlet_weight(&self) -> f64 {
        (3.0 * self.q + 1.0) / 4.0
    }

    /// q|ψ⁻⟩⟨ψ⁻| + (1−q)𝕀/4 in the basis |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn matrix(&self) -> CMatrix {
        let s = singlet_projector();
        &s.mapv(|z| z * self.q) + &identity(4).mapv(|z| z * (1.0 - self.q) / 4.0)
    }
}

fn singlet_projector() -> CMatrix {
    let mut m = CMatrix::zeros((4, 4));
    m[[1, 1]] = c(0.5, 0.0);
    m[[2, 2]] = c(0.5, 0.0);
    m[[1, 2]] = c(-0.5, 0.0);
    m[[2, 1]] = c(-0.5, 0.0);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Separable,
    EntangledUnsteerable,
    SteerableCHSHLocal,
    BellNonlocal,
}

impl Classification {
    /// Table boundaries q = 1/3, 1/2, 1/√2, each upper-closed.
    pub fn of(q: f64) -> Self {
        if q <= 1.0 / 3.0 + ZERO_TOL {
            Classification::Separable
        } else if q <= 0.5 + ZERO_TOL {
            Classification::EntangledUnsteerable
        } else if q <= FRAC_1_SQRT_2 + ZERO_TOL {
            Classification::SteerableCHSHLocal
        } else {
            Classification::BellNonlocal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationChannel {
    /// Φ_W: outcomes prepare |ψ⁻⟩⟨ψ⁻| or its normalized complement.
    Entanglement,
    /// Φ̄_W: outcomes prepare |ψ⁻⟩⟨ψ⁻| or 𝕀/4.
    Steering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationOutcome {
    pub q: f64,
    #[serde(rename = "E")]
    pub entanglement: f64,
    #[serde(rename = "S")]
    pub steering: f64,
    #[serde(rename = "D")]
    pub discord: f64,
    #[serde(rename = "N")]
    pub chsh: f64,
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ActivationChannel>,
    /// −Tr(Wρ) on the input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessProvenance>,
}

fn pos(x: f64) -> f64 {
    if x > ZERO_TOL {
        x
    } else {
        0.0
    }
}

pub fn werner_entanglement(q: f64) -> f64 {
    pos((3.0 * q - 1.0) / 4.0)
}

pub fn werner_steering(q: f64) -> f64 {
    pos(2.0 * q - 1.0)
}

/// Hilbert–Schmidt geometric discord.
pub fn werner_discord(q: f64) -> f64 {
    q * q / 2.0
}

/// Maximal CHSH violation 2√2 q − 2 above the local bound.
pub fn werner_chsh(q: f64) -> f64 {
    pos(2.0 * SQRT_2 * q - 2.0)
}

fn closed_forms(w: WernerState) -> ActivationOutcome {
    ActivationOutcome {
        q: w.q,
        entanglement: werner_entanglement(w.q),
        steering: werner_steering(w.q),
        discord: werner_discord(w.q),
        chsh: werner_chsh(w.q),
        classification: Classification::of(w.q),
        channel: None,
        witness_value: None,
        witness: None,
    }
}

/// ρ^{T_B} for a two-qubit matrix.
pub fn partial_transpose(m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros((4, 4));
    for a in 0..2 {
        for b in 0..2 {
            for a2 in 0..2 {
                for b2 in 0..2 {
                    out[[2 * a + b2, 2 * a2 + b]] = m[[2 * a + b, 2 * a2 + b2]];
                }
            }
        }
    }
    out
}

/// Sum of |negative eigenvalues| of the partial transpose.
pub fn pt_negativity(m: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(&partial_transpose(m))?.iter().filter(|&&l| l < 0.0).map(|l| -l).sum())
}

fn paulis() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [array![[z, o], [o, z]], array![[z, -i], [i, z]], array![[o, z], [z, -o]]]
}

/// Correlation tensor T_ij = Tr(ρ σ_i⊗σ_j).
pub fn correlation_tensor(m: &CMatrix) -> Array2<f64> {
    let s = paulis();
    Array2::from_shape_fn((3, 3), |(i, j)| trace_product(&kron(&s[i], &s[j]), m).re)
}

/// Maximal CHSH value 2√(t₁² + t₂²) from the two largest singular values of T.
pub fn chsh_max(m: &CMatrix) -> Result<f64> {
    let t = correlation_tensor(m);
    let (vals, _) = real_eigh(&t.t().dot(&t))?;
    Ok(2.0 * (vals[1] + vals[2]).max(0.0).sqrt())
}

/// ‖ρ − Σ_k (P_k⊗𝕀)ρ(P_k⊗𝕀)‖²_HS for the projective measurement along the
/// Bloch direction (θ, φ) on qubit A.
pub fn measurement_disturbance(m: &CMatrix, theta: f64, phi: f64) -> f64 {
    let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
    let s = paulis();
    let mut ndots = CMatrix::zeros((2, 2));
    for k in 0..3 {
        ndots = &ndots + &s[k].mapv(|z| z * n[k]);
    }
    let id2 = identity(2);
    let mut dephased = CMatrix::zeros((4, 4));
    for sign in [1.0, -1.0] {
        let p = (&id2 + &ndots.mapv(|z| z * sign)).mapv(|z| z * 0.5);
        let pk = kron(&p, &id2);
        dephased = &dephased + &pk.dot(m).dot(&pk);
    }
    let diff = m - &dephased;
    trace_product(&dagger(&diff), &diff).re
}

/// Minimum of [`measurement_disturbance`] over the Bloch sphere: a coarse
/// grid followed by Nelder–Mead from the best cell.
pub fn discord_bruteforce(m: &CMatrix, grid: usize) -> f64 {
    let grid = grid.max(4);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=grid {
        let theta = PI * i as f64 / grid as f64;
        for j in 0..2 * grid {
            let phi = PI * j as f64 / grid as f64;
            let v = measurement_disturbance(m, theta, phi);
            if v < best.0 {
                best = (v, theta, phi);
            }
        }
    }
    let nm = NelderMead {
        f_tol: 1e-14,
        max_iter: 500,
        step: PI / grid as f64,
    };
    let refined = nm.minimize(|x: &[f64]| measurement_disturbance(m, x[0], x[1]), &[best.1, best.2]);
    refined.value.min(best.0)
}

/// All four measures by closed form, with E checked against the partial
/// transpose and N against the correlation tensor of the explicit matrix.
pub fn werner_analytics(q: f64) -> Result<ActivationOutcome> {
    let w = WernerState::new(q)?;
    let out = closed_forms(w);
    let m = w.matrix();
    let neg = pt_negativity(&m)?;
    if (neg - out.entanglement).abs() > CROSS_CHECK_TOL {
        return Err(Error::Invariant(format!(
            "Werner E = {} but partial-transpose negativity = {neg}",
            out.entanglement
        )));
    }
    let n = pos(chsh_max(&m)? - 2.0);
    if (n - out.chsh).abs() > CROSS_CHECK_TOL {
        return Err(Error::Invariant(format!("Werner N = {} but tensor gives {n}", out.chsh)));
    }
    Ok(out)
}

/// M± = (𝕀 ± W)/2 with M₋ = 𝕀 − M₊.
pub fn povm_from_witness(w: &OperatorMatrix) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if !w.is_hermitian() {
        return Err(Error::InvalidParameter("POVM needs a Hermitian witness".into()));
    }
    let spec = w.spectrum()?;
    let (lo, hi) = (spec[0], spec[spec.len() - 1]);
    if lo < -1.0 - BOX_TOL || hi > 1.0 + BOX_TOL {
        return Err(Error::BoxViolation { min: lo, max: hi, n: 1.0, m: 1.0 });
    }
    let id = identity(w.space().dim());
    let plus = (&id + w.matrix()).mapv(|z| z * 0.5);
    let minus = &id - &plus;
    Ok((
        OperatorMatrix::with_bound(plus, w.space(), true, 1.0),
        OperatorMatrix::with_bound(minus, w.space(), true, 1.0),
    ))
}

fn check_unit_box(spec: &WitnessSpec, rho: &DensityMatrix, budget: Budget) -> Result<()> {
    let unit = WitnessBox::unit();
    if spec.witness_box.n > unit.n || spec.witness_box.m > unit.m {
        return Err(Error::BoxViolation {
            min: -spec.witness_box.n,
            max: spec.witness_box.m,
            n: 1.0,
            m: 1.0,
        });
    }
    witness_matrix(spec, rho.cutoff(), budget).map(|_| ())
}

/// Output of the measure-and-prepare channel as an explicit 4×4 matrix.
fn prepared(p: f64, channel: ActivationChannel) -> CMatrix {
    let s = singlet_projector();
    let other = match channel {
        ActivationChannel::Entanglement => (&identity(4) - &s).mapv(|z| z / 3.0),
        ActivationChannel::Steering => identity(4).mapv(|z| z / 4.0),
    };
    &s.mapv(|z| z * p) + &other.mapv(|z| z * (1.0 - p))
}

fn activate(rho: &DensityMatrix, spec: &WitnessSpec, budget: Budget, channel: ActivationChannel) -> Result<ActivationOutcome> {
    check_unit_box(spec, rho, budget)?;
    let v = witness_value(spec, rho, budget)?;
    // Born probability of M₋ = (𝕀 − W)/2.
    let p = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
    let werner = match channel {
        ActivationChannel::Entanglement => WernerState::from_singlet_weight(p)?,
        ActivationChannel::Steering => WernerState::new(p)?,
    };
    let out_matrix = prepared(p, channel);
    let mut out = closed_forms(werner);
    let neg = pt_negativity(&out_matrix)?;
    if (neg - out.entanglement).abs() > CROSS_CHECK_TOL {
        return Err(Error::Invariant(format!(
            "activated E = {} but output negativity = {neg}",
            out.entanglement
        )));
    }
    let expected = match channel {
        ActivationChannel::Entanglement => pos(v) / 2.0,
        ActivationChannel::Steering => pos(v),
    };
    let achieved = match channel {
        ActivationChannel::Entanglement => out.entanglement,
        ActivationChannel::Steering => out.steering,
    };
    if (expected - achieved).abs() > CROSS_CHECK_TOL {
        return Err(Error::Invariant(format!(
            "activation relation broken: {achieved} vs {expected}"
        )));
    }
    out.channel = Some(channel);
    out.witness_value = Some(v);
    out.witness = Some(spec.provenance());
    Ok(out)
}

/// Φ_W with output singlet weight p = Tr(M₋ρ).
pub fn activate_entanglement(rho: &DensityMatrix, spec: &WitnessSpec, budget: Budget) -> Result<ActivationOutcome> {
    activate(rho, spec, budget, ActivationChannel::Entanglement)
}

/// Φ̄_W with Werner parameter q = Tr(M₋ρ).
pub fn activate_steering(rho: &DensityMatrix, spec: &WitnessSpec, budget: Budget) -> Result<ActivationOutcome> {
    activate(rho, spec, budget, ActivationChannel::Steering)
}

/// True iff D > 1/18; false is inconclusive.
pub fn discord_certificate(outcome: &ActivationOutcome) -> bool {
    outcome.discord > DISCORD_THRESHOLD + ZERO_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{pure_loss, Channel, LossParams};
    use crate::fock::{parity_op, FockCutoff, Space};
    use crate::linalg::max_abs_diff;
    use crate::states::{coherent, fock};

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    fn parity() -> WitnessSpec {
        WitnessSpec::parity(c(0.0, 0.0))
    }

    #[test]
    fn povm_examples() {
        let space = Space::single(cut(6));
        let zero = OperatorMatrix::with_bound(CMatrix::zeros((6, 6)), space, true, 0.0);
        let (p, m) = povm_from_witness(&zero).unwrap();
        assert!(max_abs_diff(p.matrix().view(), identity(6).mapv(|z| z * 0.5).view()) < 1e-15);
        assert!(max_abs_diff(m.matrix().view(), p.matrix().view()) < 1e-15);
        let (_, m) = povm_from_witness(&parity_op(cut(6))).unwrap();
        for n in 0..6 {
            assert_eq!(m.matrix()[[n, n]].re, if n % 2 == 1 { 1.0 } else { 0.0 });
        }
        let (p, m) = povm_from_witness(&OperatorMatrix::identity(space)).unwrap();
        assert!(m.matrix().iter().all(|z| z.norm() == 0.0));
        assert!(max_abs_diff((p.matrix() + m.matrix()).view(), identity(6).view()) == 0.0);
        let big = OperatorMatrix::identity(space).scale(1.5);
        assert!(matches!(povm_from_witness(&big), Err(Error::BoxViolation { .. })));
    }

    #[test]
    fn entanglement_examples() {
        let d = 12;
        let one = fock(1, cut(d)).unwrap().density();
        let o = activate_entanglement(&one, &parity(), Budget::default()).unwrap();
        assert!((o.entanglement - 0.5).abs() < 1e-12);
        let vac = fock(0, cut(d)).unwrap().density();
        let o = activate_entanglement(&vac, &parity(), Budget::default()).unwrap();
        assert_eq!(o.entanglement, 0.0);
        assert_eq!(o.classification, Classification::Separable);
        let lossy = pure_loss(LossParams { eta: 0.9 }, cut(d)).unwrap().apply(&one).unwrap();
        let o = activate_entanglement(&lossy, &parity(), Budget::default()).unwrap();
        assert!((o.entanglement - 0.4).abs() < 1e-12);
    }

    #[test]
    fn steering_examples() {
        let d = 12;
        let one = fock(1, cut(d)).unwrap().density();
        let o = activate_steering(&one, &parity(), Budget::default()).unwrap();
        assert!((o.steering - 1.0).abs() < 1e-12 && (o.q - 1.0).abs() < 1e-12);
        assert_eq!(o.classification, Classification::BellNonlocal);
        let lossy = pure_loss(LossParams { eta: 0.75 }, cut(d)).unwrap().apply(&one).unwrap();
        let o = activate_steering(&lossy, &parity(), Budget::default()).unwrap();
        assert!((o.steering - 0.5).abs() < 1e-12 && (o.q - 0.75).abs() < 1e-12);
        // 0.75 > 1/√2 sits in the Bell-nonlocal row of the table.
        assert_eq!(o.classification, Classification::BellNonlocal);
        let lossy = pure_loss(LossParams { eta: 0.6 }, cut(d)).unwrap().apply(&one).unwrap();
        let o = activate_steering(&lossy, &parity(), Budget::default()).unwrap();
        assert_eq!(o.classification, Classification::SteerableCHSHLocal);
        let vac = fock(0, cut(d)).unwrap().density();
        assert_eq!(activate_steering(&vac, &parity(), Budget::default()).unwrap().steering, 0.0);
    }

    #[test]
    fn free_inputs_stay_separable() {
        let d = 40;
        let coh = coherent(c(0.7, -0.4), cut(d)).unwrap().density();
        for a in [c(0.0, 0.0), c(0.7, -0.4), c(-0.5, 1.0)] {
            let spec = WitnessSpec::parity(a);
            let e = activate_entanglement(&coh, &spec, Budget::default()).unwrap();
            let s = activate_steering(&coh, &spec, Budget::default()).unwrap();
            assert_eq!(e.classification, Classification::Separable);
            assert_eq!(s.steering, 0.0);
        }
    }

    #[test]
    fn discord_examples() {
        let at = |q: f64| discord_certificate(&werner_analytics(q).unwrap());
        assert!(!at(1.0 / 3.0));
        assert!(at(1.0));
        assert!(!at(0.0));
        assert!((werner_analytics(1.0 / 3.0).unwrap().discord - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn werner_examples() {
        let o = werner_analytics(1.0).unwrap();
        assert!((o.entanglement - 0.5).abs() < 1e-15 && (o.steering - 1.0).abs() < 1e-15);
        assert!((o.chsh - (2.0 * SQRT_2 - 2.0)).abs() < 1e-12);
        assert_eq!(werner_analytics(1.0 / 3.0).unwrap().entanglement, 0.0);
        assert_eq!(werner_analytics(0.6).unwrap().classification, Classification::SteerableCHSHLocal);
        assert!(werner_analytics(1.2).is_err());
    }

    #[test]
    fn table_boundaries() {
        use Classification::*;
        assert_eq!(Classification::of(1.0 / 3.0), Separable);
        assert_eq!(Classification::of(1.0 / 3.0 + 1e-9), EntangledUnsteerable);
        assert_eq!(Classification::of(0.5), EntangledUnsteerable);
        assert_eq!(Classification::of(0.5 + 1e-9), SteerableCHSHLocal);
        assert_eq!(Classification::of(FRAC_1_SQRT_2), SteerableCHSHLocal);
        assert_eq!(Classification::of(FRAC_1_SQRT_2 + 1e-9), BellNonlocal);
    }

    #[test]
    fn discord_bruteforce_matches_closed_form() {
        for q in [-1.0 / 3.0, 0.0, 0.3, 0.77, 1.0] {
            let w = WernerState::new(q).unwrap();
            let bf = discord_bruteforce(&w.matrix(), 24);
            assert!((bf - werner_discord(q)).abs() < 1e-6, "q={q}: {bf}");
        }
    }
}
