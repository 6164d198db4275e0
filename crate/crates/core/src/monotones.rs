//! Lower and upper bounds on the bounded-witness monotones, exact values in
//! the analytically solved cases, the hierarchy check and a property suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::fock::{Budget, DensityMatrix, PureState};
use crate::linalg::eigh;
use crate::phase_space::{displaced_parity, negativity_depth, parity_depth, NegativitySearch};
use crate::witness::{
    gaussian_fidelity, witness_value, FidelitySearch, FreeSet, WitnessBox, WitnessFamily,
    WitnessProvenance, WitnessSpec,
};
use crate::C64;

/// Slack in the hierarchy chain wn ≤ gng + 1e−9 ≤ sng + 2e−9.
pub const HIERARCHY_TOL: f64 = 1e-9;
/// Parity expectation within this of −1 counts as odd.
pub const ODD_PARITY_TOL: f64 = 1e-9;
pub const LEMMA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneBound {
    pub lower: f64,
    pub upper: f64,
    pub witness_used: WitnessProvenance,
    pub free_set: FreeSet,
    pub exact: bool,
    /// False when the best witness came from an uncertified explicit entry.
    pub certified: bool,
}

/// Witness families searched by [`lower_bound`].
#[derive(Debug, Clone)]
pub struct FamilySearch {
    pub negativity: NegativitySearch,
    pub fidelity: FidelitySearch,
    /// Projector candidates in addition to the leading eigenvector of ρ.
    pub projectors: Vec<PureState>,
    pub explicit: Vec<WitnessSpec>,
    pub budget: Budget,
}

impl Default for FamilySearch {
    fn default() -> Self {
        FamilySearch {
            negativity: NegativitySearch::default(),
            fidelity: FidelitySearch::default(),
            projectors: Vec::new(),
            explicit: Vec::new(),
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    spec: WitnessSpec,
    /// −Tr(tWρ) for the rescaled witness.
    value: f64,
}

fn best(cands: Vec<Candidate>) -> Option<Candidate> {
    // First strictly larger value wins, so earlier (lower-set) families are
    // kept on ties.
    let mut out: Option<Candidate> = None;
    for c in cands {
        match &out {
            Some(b) if c.value <= b.value + 1e-15 => {}
            _ => out = Some(c),
        }
    }
    out
}

fn parity_candidate(rho: &DensityMatrix, cfg: &FamilySearch, bx: WitnessBox, free_set: FreeSet) -> Result<Candidate> {
    let mut search = cfg.negativity.clone();
    search.seeds.push(C64::new(0.0, 0.0));
    let res = negativity_depth(rho, &search)?;
    let t = bx.min();
    let spec = WitnessSpec::new(WitnessFamily::DisplacedParity { alpha: res.argmin_alpha }, bx, free_set)
        .with_scale(t);
    Ok(Candidate {
        value: t * parity_depth(&res),
        spec,
    })
}

fn explicit_candidates(rho: &DensityMatrix, cfg: &FamilySearch, bx: WitnessBox, free_set: FreeSet) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for e in &cfg.explicit {
        if let WitnessFamily::Explicit { matrix, .. } = &e.family {
            let norm = matrix.norm_bound();
            if !(norm > 0.0) {
                continue;
            }
            let spec = WitnessSpec {
                family: e.family.clone(),
                witness_box: bx,
                free_set,
                scale: bx.min() / norm,
            };
            // Uncertified entries still contribute, but the result is then
            // flagged as a conditional bound.
            let value = witness_value(&spec, rho, cfg.budget)?;
            out.push(Candidate { spec, value });
        }
    }
    Ok(out)
}

fn projector_states(rho: &DensityMatrix, cfg: &FamilySearch) -> Result<Vec<PureState>> {
    let mut states = Vec::new();
    if rho.space().modes == 1 {
        let (vals, vecs) = eigh(rho.matrix())?;
        let top = vals.len() - 1;
        if vals[top] > 0.0 {
            states.push(PureState::single(vecs.column(top).to_owned(), rho.cutoff())?);
        }
    }
    states.extend(cfg.projectors.iter().filter(|p| p.space() == rho.space()).cloned());
    Ok(states)
}

fn projector_candidates(
    rho: &DensityMatrix,
    cfg: &FamilySearch,
    bx: WitnessBox,
    free_set: FreeSet,
    two_copy: bool,
) -> Result<Vec<Candidate>> {
    let states = projector_states(rho, cfg)?;
    states
        .par_iter()
        .map(|psi| {
            let lam = gaussian_fidelity(psi, &cfg.fidelity)?.lambda_g;
            let (family, norm) = if two_copy {
                let l2 = lam * lam;
                (
                    WitnessFamily::TwoCopyProjector { psi: psi.clone(), lambda: Some(lam) },
                    l2.max(1.0 - l2),
                )
            } else {
                (
                    WitnessFamily::PureProjector { psi: psi.clone(), lambda: Some(lam) },
                    lam.max(1.0 - lam),
                )
            };
            let spec = WitnessSpec::new(family, bx, free_set).with_scale(bx.min() / norm);
            let value = witness_value(&spec, rho, cfg.budget)?;
            Ok(Candidate { spec, value })
        })
        .collect()
}

fn lift(c: Candidate) -> Candidate {
    let spec = WitnessSpec {
        family: WitnessFamily::Lifted(Box::new(c.spec.family)),
        witness_box: c.spec.witness_box,
        free_set: FreeSet::GaussianTwoCopy,
        scale: c.spec.scale,
    };
    Candidate { spec, value: c.value }
}

fn retag(mut c: Candidate, free_set: FreeSet) -> Candidate {
    c.spec.free_set = free_set;
    c
}

/// Candidate sets nest: the GNG search contains every WN witness and the SNG
/// search contains the lift of every GNG witness.
fn search(rho: &DensityMatrix, cfg: &FamilySearch, free_set: FreeSet, bx: WitnessBox) -> Result<Candidate> {
    let mut cands = vec![parity_candidate(rho, cfg, bx, free_set)?];
    cands.extend(explicit_candidates(rho, cfg, bx, free_set)?);
    if free_set == FreeSet::WignerPositive {
        return best(cands).ok_or_else(|| Error::Invariant("empty witness family".into()));
    }
    cands.extend(projector_candidates(rho, cfg, bx, FreeSet::ConvexGaussianHull, false)?);
    let cands: Vec<Candidate> = cands.into_iter().map(|c| retag(c, FreeSet::ConvexGaussianHull)).collect();
    if free_set == FreeSet::ConvexGaussianHull {
        return best(cands).ok_or_else(|| Error::Invariant("empty witness family".into()));
    }
    let mut lifted: Vec<Candidate> = cands.into_iter().map(lift).collect();
    lifted.extend(projector_candidates(rho, cfg, bx, FreeSet::GaussianTwoCopy, true)?);
    best(lifted).ok_or_else(|| Error::Invariant("empty witness family".into()))
}

fn is_odd(rho: &DensityMatrix) -> Result<bool> {
    if rho.space().modes != 1 {
        return Ok(false);
    }
    Ok((displaced_parity(rho, C64::new(0.0, 0.0))? + 1.0).abs() <= ODD_PARITY_TOL)
}

/// Best witness value over the admissible families, clipped at zero.
pub fn lower_bound(rho: &DensityMatrix, cfg: &FamilySearch, free_set: FreeSet, bx: WitnessBox) -> Result<MonotoneBound> {
    let best = search(rho, cfg, free_set, bx)?;
    let lower = best.value.clamp(0.0, bx.n);
    let mut upper = bx.n;
    // Odd states saturate −Tr(Πρ) = 1, and nothing in a box (n, n) exceeds n.
    let exact = bx.n == bx.m && is_odd(rho)?;
    if exact {
        upper = lower;
    }
    Ok(MonotoneBound {
        lower,
        upper,
        certified: best.spec.is_certified(),
        witness_used: best.spec.provenance(),
        free_set,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub t: f64,
    pub exact: f64,
    /// Witness value of X on ρ_t.
    pub witness_value: f64,
    /// Searched WN lower bound on ρ_t.
    pub searched: f64,
}

/// Exact M₁₁ on ρ_t = (1−t)σ + tτ given Tr(Xσ) = 0, Tr(Xτ) = −1 and X in
/// the unit box.
pub fn exact_boundary_mixture(
    sigma: &DensityMatrix,
    tau: &DensityMatrix,
    witness: &WitnessSpec,
    t_grid: &[f64],
    cfg: &FamilySearch,
) -> Result<Vec<BoundaryPoint>> {
    let unit = WitnessBox::unit();
    if witness.witness_box.n > unit.n || witness.witness_box.m > unit.m {
        return Err(Error::Precondition("boundary lemma needs a witness in the unit box".into()));
    }
    crate::witness::witness_matrix(witness, sigma.cutoff(), cfg.budget)?;
    let on_sigma = -witness_value(witness, sigma, cfg.budget)?;
    let on_tau = -witness_value(witness, tau, cfg.budget)?;
    if on_sigma.abs() > LEMMA_TOL || (on_tau + 1.0).abs() > LEMMA_TOL {
        return Err(Error::Precondition(format!(
            "boundary lemma residuals: Tr(Xσ) = {on_sigma:.3e}, Tr(Xτ)+1 = {:.3e}",
            on_tau + 1.0
        )));
    }
    t_grid
        .par_iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParameter(format!("mixing weight {t} outside [0, 1]")));
            }
            let rho = DensityMatrix::mixture(&[(1.0 - t, sigma), (t, tau)])?;
            let searched = lower_bound(&rho, cfg, witness.free_set, unit)?.lower;
            if searched < t - 1e-6 {
                return Err(Error::Invariant(format!(
                    "searched bound {searched} below exact value {t}"
                )));
            }
            Ok(BoundaryPoint {
                t,
                exact: t,
                witness_value: witness_value(witness, &rho, cfg.budget)?,
                searched,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureStateBounds {
    pub lambda_g: f64,
    pub gng_lower: f64,
    pub sng_lower: f64,
}

/// (1 − Λ_G, 1 − Λ_G²).
pub fn pure_state_bounds(psi: &PureState, cfg: &FidelitySearch) -> Result<PureStateBounds> {
    let lam = gaussian_fidelity(psi, cfg)?.lambda_g;
    Ok(PureStateBounds {
        lambda_g: lam,
        gng_lower: (1.0 - lam).clamp(0.0, 1.0),
        sng_lower: (1.0 - lam * lam).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub wn: MonotoneBound,
    pub gng: MonotoneBound,
    pub sng: MonotoneBound,
}

/// (wn, gng, sng) lower bounds; the chain is asserted.
pub fn hierarchy_check(rho: &DensityMatrix, bx: WitnessBox, cfg: &FamilySearch) -> Result<Hierarchy> {
    let wn = lower_bound(rho, cfg, FreeSet::WignerPositive, bx)?;
    let gng = lower_bound(rho, cfg, FreeSet::ConvexGaussianHull, bx)?;
    let sng = lower_bound(rho, cfg, FreeSet::GaussianTwoCopy, bx)?;
    if wn.lower > gng.lower + HIERARCHY_TOL || gng.lower + HIERARCHY_TOL > sng.lower + 2.0 * HIERARCHY_TOL {
        return Err(Error::Invariant(format!(
            "hierarchy violated: wn {} gng {} sng {}",
            wn.lower, gng.lower, sng.lower
        )));
    }
    Ok(Hierarchy { wn, gng, sng })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    Monotonicity,
    Convexity,
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub kind: PropertyKind,
    pub detail: String,
    /// The check is lhs ≤ rhs.
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub free_set: FreeSet,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn failures(&self) -> Vec<&PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const MONOTONICITY_TOL: f64 = 1e-6;
pub const CONVEXITY_TOL: f64 = 1e-6;
pub const LIPSCHITZ_TOL: f64 = 1e-8;

fn check(kind: PropertyKind, detail: String, lhs: f64, rhs: f64) -> PropertyCheck {
    PropertyCheck {
        kind,
        detail,
        lhs,
        rhs,
        passed: lhs <= rhs,
    }
}

/// Bound-level monotonicity under the given free channels, convexity on
/// equal and 3:7 mixtures of corpus pairs, and the Lipschitz estimate.
pub fn property_suite(
    states: &[(String, DensityMatrix)],
    channels: &[&dyn Channel],
    free_set: FreeSet,
    bx: WitnessBox,
    cfg: &FamilySearch,
) -> Result<PropertyReport> {
    let bound = |rho: &DensityMatrix| lower_bound(rho, cfg, free_set, bx).map(|b| b.lower);
    let base: Vec<f64> = states.iter().map(|(_, r)| bound(r)).collect::<Result<_>>()?;
    let mut checks = Vec::new();

    for (i, (name, rho)) in states.iter().enumerate() {
        for ch in channels {
            let out = ch.apply(rho)?;
            let b = bound(&out)?;
            checks.push(check(
                PropertyKind::Monotonicity,
                format!("{} on {name}", ch.label()),
                b,
                base[i] + MONOTONICITY_TOL,
            ));
        }
    }

    let c = bx.max();
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let (ni, ri) = &states[i];
            let (nj, rj) = &states[j];
            if ri.space() != rj.space() {
                continue;
            }
            for p in [0.5, 0.3] {
                let mix = DensityMatrix::mixture(&[(p, ri), (1.0 - p, rj)])?;
                checks.push(check(
                    PropertyKind::Convexity,
                    format!("{p}·{ni} + {}·{nj}", 1.0 - p),
                    bound(&mix)?,
                    p * base[i] + (1.0 - p) * base[j] + CONVEXITY_TOL,
                ));
            }
            let dist = 2.0 * ri.trace_distance(rj)?;
            checks.push(check(
                PropertyKind::Lipschitz,
                format!("{ni} vs {nj}"),
                (base[i] - base[j]).abs(),
                c * dist + LIPSCHITZ_TOL,
            ));
        }
    }
    Ok(PropertyReport { free_set, checks })
}
