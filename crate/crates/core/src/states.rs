//! Canonical single-mode states: Fock, coherent, Gaussian, cat,
//! photon-subtracted squeezed and finite-energy GKP codewords.

use std::f64::consts::PI;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_tail_mass, note_leakage, quarter_turn, FockCutoff, PureState, LEAKAGE_FAIL};
use crate::linalg::{c, CVector, C64};
use crate::quadrature::{gauss_hermite_scaled, hermite_function_table};

/// Default ceiling on the squeezing magnitude of Gaussian candidates.
pub const DEFAULT_R_MAX: f64 = 2.0;

pub fn fock(n: usize, cutoff: FockCutoff) -> Result<PureState> {
    if n >= cutoff.dim() {
        return Err(Error::InvalidParameter(format!(
            "Fock level {n} is not below the cutoff {}",
            cutoff.dim()
        )));
    }
    let mut v = CVector::zeros(cutoff.dim());
    v[n] = c(1.0, 0.0);
    PureState::single(v, cutoff)
}

fn guard(leakage: f64, limit: f64, context: impl FnOnce() -> String) -> Result<()> {
    if leakage > limit {
        return Err(Error::Truncation {
            leakage,
            limit,
            context: context(),
        });
    }
    note_leakage(leakage, "state preparation");
    Ok(())
}

fn coherent_amplitudes(alpha: C64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut term = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        v[n] = term;
        term = term * alpha / ((n + 1) as f64).sqrt();
    }
    v
}

pub fn coherent(alpha: C64, cutoff: FockCutoff) -> Result<PureState> {
    let leakage = coherent_tail_mass(alpha.norm_sqr(), cutoff.dim());
    guard(leakage, LEAKAGE_FAIL, || format!("coherent state {alpha}"))?;
    Ok(PureState::single(coherent_amplitudes(alpha, cutoff.dim()), cutoff)?.with_leakage(leakage))
}

/// Parameters of D(α)S(re^{iφ})|0⟩ with S(ξ) = exp(½(ξ* â² − ξ â†²)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPureParams {
    pub alpha: C64,
    pub r: f64,
    pub phi: f64,
}

impl GaussianPureParams {
    pub fn vacuum() -> Self {
        GaussianPureParams {
            alpha: c(0.0, 0.0),
            r: 0.0,
            phi: 0.0,
        }
    }

    pub fn validate(&self, r_max: f64) -> Result<()> {
        if !(self.r >= 0.0 && self.r <= r_max) || !self.alpha.is_finite() || !self.phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Gaussian parameters need 0 ≤ r ≤ {r_max}, got r = {}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Fock amplitudes of D(α)S(ξ)|0⟩ on levels `0..dim` from the exact
/// three-term recurrence, together with the probability left above the
/// cutoff. No renormalization is applied.
pub fn gaussian_amplitudes(p: &GaussianPureParams, dim: usize) -> (CVector, f64) {
    let (ch, sh, th) = (p.r.cosh(), p.r.sinh(), p.r.tanh());
    let e = C64::from_polar(1.0, p.phi);
    let alpha = p.alpha;
    let mut v = CVector::zeros(dim);
    let log_c0 = -alpha.norm_sqr() / 2.0 - alpha.conj() * alpha.conj() * e * th / 2.0;
    v[0] = log_c0.exp() / ch.sqrt();
    let drive = alpha * ch + alpha.conj() * e * sh;
    for n in 0..dim - 1 {
        let prev = if n > 0 { v[n - 1] } else { c(0.0, 0.0) };
        let next = (drive * v[n] - e * sh * (n as f64).sqrt() * prev) / (((n + 1) as f64).sqrt() * ch);
        v[n + 1] = next;
    }
    let kept: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (v, (1.0 - kept).max(0.0))
}

pub fn gaussian_pure(params: &GaussianPureParams, cutoff: FockCutoff) -> Result<PureState> {
    gaussian_pure_with(params, cutoff, DEFAULT_R_MAX, LEAKAGE_FAIL)
}

pub fn gaussian_pure_with(
    params: &GaussianPureParams,
    cutoff: FockCutoff,
    r_max: f64,
    leakage_limit: f64,
) -> Result<PureState> {
    params.validate(r_max)?;
    let (v, leakage) = gaussian_amplitudes(params, cutoff.dim());
    guard(leakage, leakage_limit, || format!("Gaussian state {params:?}"))?;
    Ok(PureState::single(v, cutoff)?.with_leakage(leakage))
}

/// Normalized |α⟩ + sign·|−α⟩ for sign = ±1.
pub fn cat(alpha: C64, sign: i32, cutoff: FockCutoff) -> Result<PureState> {
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidParameter(format!("cat sign must be ±1, got {sign}")));
    }
    let leakage = coherent_tail_mass(alpha.norm_sqr(), cutoff.dim());
    guard(leakage, LEAKAGE_FAIL, || format!("cat state {alpha}"))?;
    // Scaling by e^{|α|²/2} keeps the leading odd term representable as α → 0.
    let mut v = coherent_amplitudes(alpha, cutoff.dim()).mapv(|z| z * (alpha.norm_sqr() / 2.0).exp());
    for (n, z) in v.iter_mut().enumerate() {
        let keep = (n % 2 == 0) == (sign == 1);
        *z = if keep { *z * 2.0 } else { c(0.0, 0.0) };
    }
    Ok(PureState::single(v, cutoff)
        .map_err(|_| Error::ZeroVector(format!("cat state with α = {alpha}")))?
        .with_leakage(leakage))
}

/// Normalized â S(r)|0⟩.
pub fn photon_subtracted_squeezed(r: f64, cutoff: FockCutoff) -> Result<PureState> {
    let params = GaussianPureParams {
        alpha: c(0.0, 0.0),
        r,
        phi: 0.0,
    };
    params.validate(DEFAULT_R_MAX)?;
    let d = cutoff.dim();
    // One extra level so that â maps the full truncated vector.
    let (sq, leakage) = gaussian_amplitudes(&params, d + 1);
    guard(leakage, LEAKAGE_FAIL, || format!("squeezed vacuum r = {r}"))?;
    let v = CVector::from_iter((0..d).map(|n| sq[n + 1] * ((n + 1) as f64).sqrt()));
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if norm < 1e-28 {
        return Err(Error::ZeroVector("photon subtraction from vacuum".into()));
    }
    Ok(PureState::single(v, cutoff)?.with_leakage(leakage))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GkpLogical {
    #[default]
    Zero,
    One,
    /// F|0̄⟩ with F = e^{iπn̂/2}, the position comb of spacing √π.
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpParams {
    pub epsilon: f64,
    pub logical: GkpLogical,
    /// Peaks |s| ≤ S; chosen adaptively when absent.
    pub peak_window: Option<usize>,
}

impl GkpParams {
    pub fn new(epsilon: f64, logical: GkpLogical) -> Self {
        GkpParams {
            epsilon,
            logical,
            peak_window: None,
        }
    }

    pub fn from_db(db: f64, logical: GkpLogical) -> Self {
        Self::new(epsilon_from_db(db), logical)
    }

    pub fn squeezing_db(&self) -> f64 {
        squeezing_db(self.epsilon)
    }
}

/// −10·log₁₀(tanh ε).
pub fn squeezing_db(epsilon: f64) -> f64 {
    -10.0 * epsilon.tanh().log10()
}

pub fn epsilon_from_db(db: f64) -> f64 {
    10f64.powf(-db / 10.0).atanh()
}

#[derive(Debug, Clone)]
pub struct GkpState {
    pub state: PureState,
    pub peak_window: usize,
    pub squeezing_db: f64,
}

const WINDOW_TOL: f64 = 1e-8;
const MAX_WINDOW: usize = 400;

struct GkpProjector {
    nodes: Array1<f64>,
    weights: Array1<f64>,
    table: ndarray::Array2<f64>,
    epsilon: f64,
    offset: f64,
}

impl GkpProjector {
    fn new(epsilon: f64, offset: f64, dim: usize) -> Result<Self> {
        let (nodes, weights) = gauss_hermite_scaled(4 * dim)?;
        let table = hermite_function_table(dim, &nodes);
        Ok(GkpProjector {
            nodes,
            weights,
            table,
            epsilon,
            offset,
        })
    }

    fn peak(&self, s: i64) -> f64 {
        (2.0 * s as f64 + self.offset) * PI.sqrt()
    }

    /// e^{−εn̂} applied to the position comb through the Mehler kernel:
    /// each peak x_s becomes e^{−tanh(ε) x_s²/2} e^{−coth(ε)(x − x_s/cosh ε)²/2}.
    fn wavefunction(&self, window: usize, x: f64) -> f64 {
        let (th, ch) = (self.epsilon.tanh(), self.epsilon.cosh());
        let mut psi = 0.0;
        for s in -(window as i64)..=(window as i64) {
            let xs = self.peak(s);
            let u = x - xs / ch;
            psi += (-0.5 * th * xs * xs - 0.5 * u * u / th).exp();
        }
        psi
    }

    /// Unnormalized Fock amplitudes by quadrature against Hermite functions.
    fn amplitudes(&self, window: usize) -> Array1<f64> {
        let f = Array1::from_iter(
            self.nodes
                .iter()
                .zip(self.weights.iter())
                .map(|(&x, &w)| w * self.wavefunction(window, x)),
        );
        self.table.t().dot(&f)
    }

    /// ‖ψ‖² from pairwise Gaussian overlaps.
    fn norm_sqr(&self, window: usize) -> f64 {
        let (th, ch) = (self.epsilon.tanh(), self.epsilon.cosh());
        let kappa = 1.0 / th;
        let range = -(window as i64)..=(window as i64);
        let mut total = 0.0;
        for s in range.clone() {
            for t in range.clone() {
                let (xs, xt) = (self.peak(s), self.peak(t));
                let dmu = (xs - xt) / ch;
                total += (-0.5 * th * (xs * xs + xt * xt) - 0.25 * kappa * dmu * dmu).exp();
            }
        }
        total * (PI / kappa).sqrt()
    }
}

fn unit(v: &Array1<f64>) -> Array1<f64> {
    let n = v.dot(v).sqrt();
    v / n
}

pub fn gkp_damped(params: &GkpParams, cutoff: FockCutoff) -> Result<PureState> {
    Ok(gkp_damped_detailed(params, cutoff, LEAKAGE_FAIL)?.state)
}

/// Finite-energy codeword e^{−εn̂}|μ̄⟩ on the square lattice.
pub fn gkp_damped_detailed(
    params: &GkpParams,
    cutoff: FockCutoff,
    leakage_limit: f64,
) -> Result<GkpState> {
    if !(params.epsilon > 0.0) || !params.epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "GKP damping must be positive, got {}",
            params.epsilon
        )));
    }
    let offset = match params.logical {
        GkpLogical::One => 1.0,
        _ => 0.0,
    };
    let proj = GkpProjector::new(params.epsilon, offset, cutoff.dim())?;
    let converged = |s: usize| -> (bool, Array1<f64>) {
        let a = unit(&proj.amplitudes(s));
        let b = unit(&proj.amplitudes(s + 2));
        let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        (diff < WINDOW_TOL, a)
    };
    let (window, raw) = match params.peak_window {
        Some(s) => {
            let (ok, _) = converged(s);
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "peak window {s} is too small: S → S+2 changes the amplitudes by more than {WINDOW_TOL}"
                )));
            }
            (s, proj.amplitudes(s))
        }
        None => {
            let mut s = 1;
            loop {
                if converged(s).0 {
                    break;
                }
                s += 1;
                if s > MAX_WINDOW {
                    return Err(Error::InvalidParameter(
                        "GKP peak window did not converge".into(),
                    ));
                }
            }
            (s, proj.amplitudes(s))
        }
    };
    let kept = raw.dot(&raw);
    let leakage = (1.0 - kept / proj.norm_sqr(window)).max(0.0);
    guard(leakage, leakage_limit, || {
        format!(
            "GKP codeword at {:.2} dB, cutoff {}",
            squeezing_db(params.epsilon),
            cutoff.dim()
        )
    })?;
    let mut v = raw.mapv(|x| c(x, 0.0));
    if params.logical == GkpLogical::Plus {
        for (n, z) in v.iter_mut().enumerate() {
            *z *= quarter_turn(n);
        }
    }
    Ok(GkpState {
        state: PureState::single(v, cutoff)?.with_leakage(leakage),
        peak_window: window,
        squeezing_db: squeezing_db(params.epsilon),
    })
}
