//! Witness families for the three free sets, their expectation values, box
//! rescaling, the Gaussian fidelity Λ_G and the two-copy lift.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Budget, DensityMatrix, FockCutoff, OperatorMatrix, PureState, Space};
use crate::linalg::{c, identity, kron_vec, outer, trace_product, C64};
use crate::optimize::NelderMead;
use crate::phase_space::{displaced_parity, displacement_elements};
use crate::states::{gaussian_amplitudes, GaussianPureParams, DEFAULT_R_MAX};

/// Slack allowed when checking a spectrum against the box.
pub const BOX_TOL: f64 = 1e-9;

/// The operator interval −n𝕀 ≤ W ≤ m𝕀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessBox {
    pub n: f64,
    pub m: f64,
}

impl WitnessBox {
    pub fn new(n: f64, m: f64) -> Result<Self> {
        if !(n > 0.0 && m > 0.0) || !n.is_finite() || !m.is_finite() {
            return Err(Error::InvalidParameter(format!("witness box needs n, m > 0, got ({n}, {m})")));
        }
        Ok(WitnessBox { n, m })
    }

    pub fn unit() -> Self {
        WitnessBox { n: 1.0, m: 1.0 }
    }

    pub fn min(&self) -> f64 {
        self.n.min(self.m)
    }

    pub fn max(&self) -> f64 {
        self.n.max(self.m)
    }

    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        lo >= -self.n - BOX_TOL && hi <= self.m + BOX_TOL
    }

    fn check(&self, lo: f64, hi: f64) -> Result<()> {
        if self.contains(lo, hi) {
            Ok(())
        } else {
            Err(Error::BoxViolation {
                min: lo,
                max: hi,
                n: self.n,
                m: self.m,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeSet {
    /// States with nonnegative Wigner function.
    WignerPositive,
    /// Closed convex hull of Gaussian states.
    ConvexGaussianHull,
    /// Gaussian states, witnessed on two copies.
    GaussianTwoCopy,
}

impl FreeSet {
    /// Position in the chain W₊ ⊃ Ḡ_c ⊃ G(two-copy): a witness feasible for
    /// a larger free set is feasible for every smaller one.
    fn rank(self) -> u8 {
        match self {
            FreeSet::WignerPositive => 0,
            FreeSet::ConvexGaussianHull => 1,
            FreeSet::GaussianTwoCopy => 2,
        }
    }

    pub fn admits(self, certified_for: FreeSet) -> bool {
        certified_for.rank() <= self.rank()
    }
}

#[derive(Debug, Clone)]
pub enum WitnessFamily {
    /// Π(α) = D(α)ΠD(α)†, feasible for W₊.
    DisplacedParity { alpha: C64 },
    /// Λ𝕀 − |ψ⟩⟨ψ|, feasible for the Gaussian hull when Λ = Λ_G(ψ).
    PureProjector { psi: PureState, lambda: Option<f64> },
    /// Λ²𝕀 − |ψ⟩⟨ψ|^{⊗2} on two copies.
    TwoCopyProjector { psi: PureState, lambda: Option<f64> },
    /// Caller-supplied operator; feasibility is taken from the certificate.
    Explicit {
        matrix: OperatorMatrix,
        certificate: Option<FreeSet>,
        label: String,
    },
    /// W ⊗ 𝕀 for a single-copy member, evaluated on ρ⊗ρ.
    Lifted(Box<WitnessFamily>),
}

#[derive(Debug, Clone)]
pub struct WitnessSpec {
    pub family: WitnessFamily,
    pub witness_box: WitnessBox,
    pub free_set: FreeSet,
    /// Multiplier applied to the family member (t from box rescaling).
    pub scale: f64,
}

/// Serializable summary of a witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessProvenance {
    pub family: String,
    pub alpha: Option<[f64; 2]>,
    pub lambda: Option<f64>,
    pub scale: f64,
    pub witness_box: WitnessBox,
    pub free_set: FreeSet,
    /// False for explicit witnesses without a matching certificate; their
    /// values are conditional lower bounds.
    pub certified: bool,
}

impl WitnessSpec {
    pub fn new(family: WitnessFamily, witness_box: WitnessBox, free_set: FreeSet) -> Self {
        WitnessSpec {
            family,
            witness_box,
            free_set,
            scale: 1.0,
        }
    }

    pub fn parity(alpha: C64) -> Self {
        Self::new(
            WitnessFamily::DisplacedParity { alpha },
            WitnessBox::unit(),
            FreeSet::WignerPositive,
        )
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn family_certified(family: &WitnessFamily, free_set: FreeSet) -> bool {
        match family {
            WitnessFamily::DisplacedParity { .. } => true,
            WitnessFamily::PureProjector { lambda, .. } => {
                lambda.is_some() && free_set != FreeSet::WignerPositive
            }
            WitnessFamily::TwoCopyProjector { lambda, .. } => {
                lambda.is_some() && free_set == FreeSet::GaussianTwoCopy
            }
            WitnessFamily::Explicit { certificate, .. } => {
                certificate.map(|cert| free_set.admits(cert)).unwrap_or(false)
            }
            WitnessFamily::Lifted(inner) => Self::family_certified(inner, free_set),
        }
    }

    pub fn is_certified(&self) -> bool {
        Self::family_certified(&self.family, self.free_set)
    }

    pub fn provenance(&self) -> WitnessProvenance {
        fn describe(f: &WitnessFamily) -> (String, Option<[f64; 2]>, Option<f64>) {
            match f {
                WitnessFamily::DisplacedParity { alpha } => {
                    ("displaced_parity".into(), Some([alpha.re, alpha.im]), None)
                }
                WitnessFamily::PureProjector { lambda, .. } => ("pure_projector".into(), None, *lambda),
                WitnessFamily::TwoCopyProjector { lambda, .. } => {
                    ("two_copy_projector".into(), None, *lambda)
                }
                WitnessFamily::Explicit { label, .. } => (format!("explicit:{label}"), None, None),
                WitnessFamily::Lifted(inner) => {
                    let (name, a, l) = describe(inner);
                    (format!("lifted:{name}"), a, l)
                }
            }
        }
        let (family, alpha, lambda) = describe(&self.family);
        WitnessProvenance {
            family,
            alpha,
            lambda,
            scale: self.scale,
            witness_box: self.witness_box,
            free_set: self.free_set,
            certified: self.is_certified(),
        }
    }
}

fn need_lambda(lambda: Option<f64>) -> Result<f64> {
    let l = lambda.ok_or_else(|| Error::Precondition("projector witness needs Λ_G(ψ)".into()))?;
    if !(0.0..=1.0 + 1e-12).contains(&l) {
        return Err(Error::InvalidParameter(format!("Λ = {l} outside [0, 1]")));
    }
    Ok(l)
}

/// Compression of Π(α) to the cutoff; its spectrum lies in [−1, 1].
pub fn displaced_parity_matrix(alpha: C64, cutoff: FockCutoff) -> Result<OperatorMatrix> {
    let mut m = displacement_elements(alpha * 2.0, cutoff.dim())?;
    for (n, mut col) in m.axis_iter_mut(ndarray::Axis(1)).enumerate() {
        if n % 2 == 1 {
            col.mapv_inplace(|z| -z);
        }
    }
    let m = crate::linalg::hermitian_part(&m);
    Ok(OperatorMatrix::with_bound(m, Space::single(cutoff), true, 1.0))
}

fn family_matrix(family: &WitnessFamily, cutoff: FockCutoff, budget: Budget) -> Result<OperatorMatrix> {
    match family {
        WitnessFamily::DisplacedParity { alpha } => displaced_parity_matrix(*alpha, cutoff),
        WitnessFamily::PureProjector { psi, lambda } => {
            let l = need_lambda(*lambda)?;
            let d = psi.space().dim();
            let m = &identity(d).mapv(|z| z * l) - &outer(psi.amplitudes(), psi.amplitudes());
            Ok(OperatorMatrix::with_bound(m, psi.space(), true, l.max(1.0 - l)))
        }
        WitnessFamily::TwoCopyProjector { psi, lambda } => {
            let l = need_lambda(*lambda)?;
            let d = psi.space().dim();
            budget.check(d * d)?;
            let pair = kron_vec(psi.amplitudes(), psi.amplitudes());
            let m = &identity(d * d).mapv(|z| z * l * l) - &outer(&pair, &pair);
            Ok(OperatorMatrix::with_bound(
                m,
                Space::pair(psi.cutoff()),
                true,
                (l * l).max(1.0 - l * l),
            ))
        }
        WitnessFamily::Explicit { matrix, .. } => {
            if !matrix.is_hermitian() {
                return Err(Error::InvalidParameter("explicit witness must be Hermitian".into()));
            }
            Ok(matrix.clone())
        }
        WitnessFamily::Lifted(inner) => {
            let w = family_matrix(inner, cutoff, budget)?;
            lift_witness(&w, budget)
        }
    }
}

/// The witness operator t·W, checked against the box.
pub fn witness_matrix(spec: &WitnessSpec, cutoff: FockCutoff, budget: Budget) -> Result<OperatorMatrix> {
    let w = family_matrix(&spec.family, cutoff, budget)?.scale(spec.scale);
    let (lo, hi) = match &spec.family {
        WitnessFamily::TwoCopyProjector { lambda, .. } => {
            let l2 = need_lambda(*lambda)?.powi(2);
            (spec.scale * (l2 - 1.0), spec.scale * l2)
        }
        _ => {
            let spec_vals = w.spectrum()?;
            (spec_vals[0], spec_vals[spec_vals.len() - 1])
        }
    };
    let (lo, hi) = if spec.scale < 0.0 { (hi, lo) } else { (lo, hi) };
    spec.witness_box.check(lo, hi)?;
    Ok(w)
}

fn overlap(psi: &PureState, rho: &DensityMatrix) -> Result<f64> {
    if psi.space() != rho.space() {
        return Err(Error::DimensionMismatch {
            left: psi.space().dim(),
            right: rho.dim(),
        });
    }
    let v = rho.matrix().dot(psi.amplitudes());
    Ok(psi
        .amplitudes()
        .iter()
        .zip(v.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
        .re)
}

fn family_value(family: &WitnessFamily, rho: &DensityMatrix, budget: Budget) -> Result<f64> {
    match family {
        WitnessFamily::DisplacedParity { alpha } => Ok(-displaced_parity(rho, *alpha)?),
        WitnessFamily::PureProjector { psi, lambda } => Ok(overlap(psi, rho)? - need_lambda(*lambda)?),
        WitnessFamily::TwoCopyProjector { psi, lambda } => {
            let l = need_lambda(*lambda)?;
            let d = rho.dim();
            let f = if budget.check(d * d).is_ok() && budget.check(d * d * d * d).is_ok() {
                let pair = rho.tensor(rho, budget)?;
                let v = kron_vec(psi.amplitudes(), psi.amplitudes());
                let w = pair.matrix().dot(&v);
                v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re
            } else {
                // Tr((P⊗P)(ρ⊗ρ)) = Tr(Pρ)².
                overlap(psi, rho)?.powi(2)
            };
            Ok(f - l * l)
        }
        WitnessFamily::Explicit { matrix, .. } => {
            if matrix.space() == rho.space() {
                Ok(-trace_product(matrix.matrix(), rho.matrix()).re)
            } else if matrix.space().modes == 2 && rho.space().modes == 1 {
                let pair = rho.tensor(rho, budget)?;
                Ok(-trace_product(matrix.matrix(), pair.matrix()).re)
            } else {
                Err(Error::DimensionMismatch {
                    left: matrix.space().dim(),
                    right: rho.dim(),
                })
            }
        }
        // −Tr[(W⊗𝕀)ρ⊗²] = −Tr(Wρ).
        WitnessFamily::Lifted(inner) => family_value(inner, rho, budget),
    }
}

/// −Tr(Wρ) for the scaled witness; two-copy members are evaluated on ρ⊗ρ.
pub fn witness_value(spec: &WitnessSpec, rho: &DensityMatrix, budget: Budget) -> Result<f64> {
    Ok(spec.scale * family_value(&spec.family, rho, budget)?)
}

/// t·W with t = min{n, m}/‖W‖.
pub fn rescale_to_box(w: &OperatorMatrix, witness_box: WitnessBox) -> Result<OperatorMatrix> {
    if !w.is_hermitian() {
        return Err(Error::InvalidParameter("only Hermitian witnesses can be rescaled".into()));
    }
    let norm = w.norm_bound();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroVector("witness with zero or unbounded norm".into()));
    }
    Ok(w.scale(witness_box.min() / norm))
}

/// W ⊗ 𝕀.
pub fn lift_witness(w: &OperatorMatrix, budget: Budget) -> Result<OperatorMatrix> {
    if w.space().modes != 1 {
        return Err(Error::InvalidParameter("only single-copy witnesses can be lifted".into()));
    }
    let id = OperatorMatrix::identity(w.space());
    w.tensor(&id, budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelitySearch {
    pub r_max: f64,
    /// Number of deterministic starts taken from the coarse parameter grid.
    pub starts: usize,
    /// Each seed adds one randomly jittered start.
    pub seeds: Vec<u64>,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for FidelitySearch {
    fn default() -> Self {
        FidelitySearch {
            r_max: DEFAULT_R_MAX,
            starts: 16,
            seeds: Vec::new(),
            f_tol: 1e-13,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFidelityResult {
    pub lambda_g: f64,
    pub argmax_params: GaussianPureParams,
    /// Max − min of the refined values over all starts.
    pub multistart_spread: f64,
    pub best_grid_sample: f64,
}

fn params_from(x: &[f64], r_max: f64) -> (GaussianPureParams, f64) {
    let (mut r, mut phi) = (x[2], x[3]);
    if r < 0.0 {
        r = -r;
        phi += PI;
    }
    let excess = (r - r_max).max(0.0);
    let params = GaussianPureParams {
        alpha: c(x[0], x[1]),
        r: r.min(r_max),
        phi: phi.rem_euclid(2.0 * PI),
    };
    (params, excess)
}

/// |⟨ψ|D(α)S(ξ)|0⟩|². The Gaussian amplitudes are exact on the levels that
/// ψ occupies, so no truncation enters the overlap.
pub fn gaussian_overlap(psi: &PureState, params: &GaussianPureParams) -> f64 {
    let (g, _) = gaussian_amplitudes(params, psi.cutoff().dim());
    psi.amplitudes()
        .iter()
        .zip(g.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
        .norm_sqr()
}

/// Λ_G(ψ) = sup over pure Gaussian σ of ⟨ψ|σ|ψ⟩, by multistart Nelder–Mead
/// over (Re α, Im α, r, φ).
pub fn gaussian_fidelity(psi: &PureState, cfg: &FidelitySearch) -> Result<GaussianFidelityResult> {
    if psi.space().modes != 1 {
        return Err(Error::InvalidParameter("Λ_G is defined for one mode".into()));
    }
    if psi.leakage() > 1e-6 {
        return Err(Error::Precondition(format!(
            "state leakage {:.3e} exceeds 1e-6",
            psi.leakage()
        )));
    }
    let r_max = cfg.r_max;
    let objective = |x: &[f64]| {
        let (p, excess) = params_from(x, r_max);
        -gaussian_overlap(psi, &p) + excess * excess
    };

    // Coarse grid over the parameter box.
    let mut grid = Vec::new();
    let radial = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0];
    for &a in &radial {
        let phases = if a == 0.0 { 1 } else { 12 };
        for ia in 0..phases {
            let arg = 2.0 * PI * ia as f64 / phases as f64;
            for ir in 0..8 {
                let r = (ir as f64 * 0.25).min(r_max);
                let nphi = if ir == 0 { 1 } else { 12 };
                for ip in 0..nphi {
                    let phi = 2.0 * PI * ip as f64 / nphi as f64;
                    let alpha = C64::from_polar(a, arg);
                    grid.push([alpha.re, alpha.im, r, phi]);
                }
            }
        }
    }
    let mut scored: Vec<(f64, [f64; 4])> =
        grid.par_iter().map(|x| (objective(x), *x)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best_grid_sample = -scored[0].0;

    let mut starts: Vec<[f64; 4]> = Vec::new();
    for (_, x) in &scored {
        if starts.len() >= cfg.starts {
            break;
        }
        // Skip near-duplicates of chosen starts.
        let close = starts.iter().any(|s| {
            let da = (s[0] - x[0]).hypot(s[1] - x[1]);
            da < 0.3 && (s[2] - x[2]).abs() < 0.3
                && ((s[3] - x[3]).rem_euclid(2.0 * PI)).min((x[3] - s[3]).rem_euclid(2.0 * PI)) < 0.6
        });
        if !close {
            starts.push(*x);
        }
    }
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = starts.first().copied().unwrap_or([0.0; 4]);
        starts.push([
            base[0] + rng.random_range(-0.5..0.5),
            base[1] + rng.random_range(-0.5..0.5),
            (base[2] + rng.random_range(-0.3..0.3)).abs(),
            base[3] + rng.random_range(-1.0..1.0),
        ]);
    }

    let nm = NelderMead {
        f_tol: cfg.f_tol,
        max_iter: cfg.max_iter,
        step: 0.2,
    };
    let polish = NelderMead { step: 0.02, ..nm };
    let refined: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|x0| {
            let m = nm.minimize(objective, x0);
            let m = polish.minimize(objective, &m.x);
            (m.value, m.x)
        })
        .collect();
    let (best_val, best_x) = refined
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .cloned()
        .ok_or_else(|| Error::Optimization("no starting points".into()))?;
    let worst = refined.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let (params, _) = params_from(&best_x, r_max);
    let lambda = gaussian_overlap(psi, &params).max(-best_val.min(0.0)).clamp(0.0, 1.0);
    Ok(GaussianFidelityResult {
        lambda_g: lambda.max(best_grid_sample.min(1.0)),
        argmax_params: params,
        multistart_spread: worst - best_val,
        best_grid_sample,
    })
}

/// Two-copy witness value in factored form for a product observable:
/// Tr((A⊗B)(ρ⊗ρ)) = Tr(Aρ)Tr(Bρ).
pub fn factored_product_expectation(a: &OperatorMatrix, b: &OperatorMatrix, rho: &DensityMatrix) -> Result<f64> {
    Ok(rho.expectation(a)? * rho.expectation(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{pure_loss, Channel, LossParams};
    use crate::fock::parity_op;
    use crate::linalg::{max_abs_diff, CMatrix, CVector};
    use crate::states::{cat, coherent, fock, gaussian_pure};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    fn random_state(d: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = CMatrix::zeros((d, d));
        for _ in 0..3 {
            let v = CVector::from_iter((0..d).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
            m += &outer(&v, &v);
        }
        let tr = crate::linalg::trace(&m).re;
        DensityMatrix::single(m.mapv(|z| z / tr), cut(d)).unwrap()
    }

    #[test]
    fn displaced_parity_at_origin_is_parity() {
        let w = witness_matrix(&WitnessSpec::parity(c(0.0, 0.0)), cut(8), Budget::default()).unwrap();
        assert!(max_abs_diff(w.matrix().view(), parity_op(cut(8)).matrix().view()) < 1e-15);
        let spec = w.spectrum().unwrap();
        assert!((spec[0] + 1.0).abs() < 1e-12 && (spec[7] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_spectrum() {
        let psi = fock(1, cut(10)).unwrap();
        let lam = 0.48;
        let spec = WitnessSpec::new(
            WitnessFamily::PureProjector { psi: psi.clone(), lambda: Some(lam) },
            WitnessBox::unit(),
            FreeSet::ConvexGaussianHull,
        );
        let w = witness_matrix(&spec, cut(10), Budget::default()).unwrap();
        let s = w.spectrum().unwrap();
        assert!((s[0] - (lam - 1.0)).abs() < 1e-12);
        assert!(s.iter().skip(1).all(|&v| (v - lam).abs() < 1e-12));
        let missing = WitnessSpec::new(
            WitnessFamily::PureProjector { psi, lambda: None },
            WitnessBox::unit(),
            FreeSet::ConvexGaussianHull,
        );
        assert!(matches!(
            witness_matrix(&missing, cut(10), Budget::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn two_copy_projector_on_its_own_state() {
        let d = 9;
        let psi = cat(c(0.5, 0.0), -1, cut(d)).unwrap();
        let lam = 0.4;
        let spec = WitnessSpec::new(
            WitnessFamily::TwoCopyProjector { psi: psi.clone(), lambda: Some(lam) },
            WitnessBox::unit(),
            FreeSet::GaussianTwoCopy,
        );
        let rho = psi.density();
        let v = witness_value(&spec, &rho, Budget::default()).unwrap();
        assert!((v - (1.0 - lam * lam)).abs() < 1e-12);
        let w = witness_matrix(&spec, cut(d), Budget::default()).unwrap();
        let pair = rho.tensor(&rho, Budget::default()).unwrap();
        assert!((pair.expectation(&w).unwrap() - (lam * lam - 1.0)).abs() < 1e-12);
        // Factored route above the budget gives the same number.
        let small = Budget { max_entries: 100 };
        let vf = witness_value(&spec, &rho, small).unwrap();
        assert!((vf - v).abs() < 1e-12);
    }

    #[test]
    fn parity_values() {
        let d = 10;
        let spec = WitnessSpec::parity(c(0.0, 0.0));
        let one = fock(1, cut(d)).unwrap().density();
        let vac = fock(0, cut(d)).unwrap().density();
        assert!((witness_value(&spec, &one, Budget::default()).unwrap() - 1.0).abs() < 1e-14);
        assert!((witness_value(&spec, &vac, Budget::default()).unwrap() + 1.0).abs() < 1e-14);
        let eta = 0.7;
        let lossy = pure_loss(LossParams { eta }, cut(d)).unwrap().apply(&one).unwrap();
        assert!((witness_value(&spec, &lossy, Budget::default()).unwrap() - (2.0 * eta - 1.0)).abs() < 1e-14);
        // Equals −(π/2)W at a displaced point.
        let alpha = c(0.3, 0.4);
        let v = witness_value(&WitnessSpec::parity(alpha), &lossy, Budget::default()).unwrap();
        let w = crate::phase_space::wigner_at(&lossy, alpha).unwrap();
        assert!((v + PI / 2.0 * w).abs() < 1e-12);
    }

    #[test]
    fn displaced_parity_matrix_agrees_with_value() {
        let rho = random_state(8, 4);
        let alpha = c(-0.4, 0.25);
        let w = displaced_parity_matrix(alpha, cut(8)).unwrap();
        let via_matrix = -rho.expectation(&w).unwrap();
        let via_value = witness_value(&WitnessSpec::parity(alpha), &rho, Budget::default()).unwrap();
        assert!((via_matrix - via_value).abs() < 1e-12);
        let s = w.spectrum().unwrap();
        assert!(s[0] >= -1.0 - 1e-12 && s[7] <= 1.0 + 1e-12);
    }

    #[test]
    fn rescale_examples() {
        let space = Space::single(cut(4));
        let pi = parity_op(cut(4));
        let same = rescale_to_box(&pi, WitnessBox::unit()).unwrap();
        assert!(max_abs_diff(same.matrix().view(), pi.matrix().view()) < 1e-15);
        let doubled = OperatorMatrix::hermitian(pi.matrix().mapv(|z| z * 2.0), space).unwrap();
        let back = rescale_to_box(&doubled, WitnessBox::unit()).unwrap();
        assert!(max_abs_diff(back.matrix().view(), pi.matrix().view()) < 1e-10);
        let half = OperatorMatrix::with_bound(pi.matrix().mapv(|z| z * 0.5), space, true, 0.5);
        let four = rescale_to_box(&half, WitnessBox::new(2.0, 3.0).unwrap()).unwrap();
        assert!(max_abs_diff(four.matrix().view(), pi.matrix().mapv(|z| z * 2.0).view()) < 1e-12);
        let zero = OperatorMatrix::with_bound(CMatrix::zeros((4, 4)), space, true, 0.0);
        assert!(rescale_to_box(&zero, WitnessBox::unit()).is_err());
    }

    #[test]
    fn box_violation_is_reported() {
        let spec = WitnessSpec::parity(c(0.0, 0.0)).with_scale(2.0);
        assert!(matches!(
            witness_matrix(&spec, cut(6), Budget::default()),
            Err(Error::BoxViolation { .. })
        ));
    }

    #[test]
    fn lift_examples() {
        let d = 6;
        let pi = parity_op(cut(d));
        let lifted = lift_witness(&pi, Budget::default()).unwrap();
        let one = fock(1, cut(d)).unwrap().density();
        let pair = one.tensor(&one, Budget::default()).unwrap();
        assert!((pair.expectation(&lifted).unwrap() + 1.0).abs() < 1e-14);
        let rho = random_state(d, 8);
        let w = displaced_parity_matrix(c(0.2, -0.1), cut(d)).unwrap();
        let lw = lift_witness(&w, Budget::default()).unwrap();
        let pr = rho.tensor(&rho, Budget::default()).unwrap();
        assert!((pr.expectation(&lw).unwrap() - rho.expectation(&w).unwrap()).abs() < 1e-10);
        let s1 = w.spectrum().unwrap();
        let s2 = lw.spectrum().unwrap();
        assert!((s1[0] - s2[0]).abs() < 1e-10 && (s1[d - 1] - s2[d * d - 1]).abs() < 1e-10);
    }

    #[test]
    fn fidelity_of_gaussian_states_is_one() {
        let cfg = FidelitySearch::default();
        let vac = fock(0, cut(30)).unwrap();
        assert!((gaussian_fidelity(&vac, &cfg).unwrap().lambda_g - 1.0).abs() < 1e-6);
        let coh = coherent(c(1.0, 0.0), cut(30)).unwrap();
        assert!((gaussian_fidelity(&coh, &cfg).unwrap().lambda_g - 1.0).abs() < 1e-6);
        let sq = gaussian_pure(
            &GaussianPureParams { alpha: c(0.4, -0.7), r: 0.6, phi: 2.0 },
            cut(40),
        )
        .unwrap();
        assert!((gaussian_fidelity(&sq, &cfg).unwrap().lambda_g - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fidelity_of_single_photon() {
        let res = gaussian_fidelity(&fock(1, cut(40)).unwrap(), &FidelitySearch::default()).unwrap();
        assert!((res.lambda_g - 0.4778894).abs() < 1e-6, "{}", res.lambda_g);
        assert!(res.lambda_g >= res.best_grid_sample);
        // tanh r = 1/2 at the optimum.
        assert!((res.argmax_params.r.tanh() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn mixed_gaussians_do_not_exceed_pure_optimum() {
        // Displaced thermal states are mixtures of coherent states, so their
        // fidelity with ψ cannot beat Λ_G(ψ).
        let d = 40;
        let psi = fock(1, cut(d)).unwrap();
        let lam = gaussian_fidelity(&psi, &FidelitySearch::default()).unwrap().lambda_g;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let nbar: f64 = rng.random_range(0.05..1.5);
            let alpha = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let diag = ndarray::Array1::from_iter(
                (0..d).map(|n| nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1)),
            );
            let total = diag.sum();
            let thermal = crate::linalg::from_real_diag(&diag.mapv(|x| x / total));
            let disp = crate::phase_space::displacement_elements(alpha, d).unwrap();
            let m = disp.dot(&thermal).dot(&crate::linalg::dagger(&disp));
            let f = psi.amplitudes().iter().enumerate().map(|(i, a)| {
                psi.amplitudes().iter().enumerate().map(|(j, b)| a.conj() * m[[i, j]] * b).sum::<C64>()
            }).sum::<C64>().re;
            assert!(f <= lam + 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn parity_is_nonnegative_on_gaussians(
            ar in -1.0f64..1.0, ai in -1.0f64..1.0, r in 0.0f64..1.0, phi in 0.0f64..6.28,
            br in -1.5f64..1.5, bi in -1.5f64..1.5,
        ) {
            let sigma = gaussian_pure(&GaussianPureParams { alpha: c(ar, ai), r, phi }, cut(100)).unwrap().density();
            let v = witness_value(&WitnessSpec::parity(c(br, bi)), &sigma, Budget::default()).unwrap();
            prop_assert!(v <= 1e-8, "{}", v);
        }

        #[test]
        fn rescaling_preserves_sign(seed in 0u64..500, t in 0.1f64..5.0) {
            let d = 5;
            let rho = random_state(d, seed);
            let w0 = displaced_parity_matrix(c(0.1, 0.2), cut(d)).unwrap().scale(t);
            let w = rescale_to_box(&w0, WitnessBox::new(0.7, 2.0).unwrap()).unwrap();
            let a = rho.expectation(&w0).unwrap();
            let b = rho.expectation(&w).unwrap();
            prop_assert!(a * b >= 0.0);
        }
    }

    #[test]
    fn projector_is_feasible_on_random_gaussians() {
        let d = 80;
        let psi = fock(1, cut(d)).unwrap();
        let lam = gaussian_fidelity(&psi, &FidelitySearch::default()).unwrap().lambda_g;
        let spec = WitnessSpec::new(
            WitnessFamily::PureProjector { psi, lambda: Some(lam) },
            WitnessBox::unit(),
            FreeSet::ConvexGaussianHull,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = GaussianPureParams {
                alpha: c(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)),
                r: rng.random_range(0.0..0.9),
                phi: rng.random_range(0.0..2.0 * PI),
            };
            let sigma = gaussian_pure(&p, cut(d)).unwrap().density();
            // Tr(Wσ) ≥ 0 ⇔ witness value ≤ 0.
            assert!(witness_value(&spec, &sigma, Budget::default()).unwrap() <= 1e-8);
        }
    }
}
