//! Parameter sweeps behind the CLI: lossy Fock states and the finite-energy
//! GKP pipeline (loss followed by error correction).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{activate_entanglement, activate_steering, Classification};
use crate::channels::{gkp_error_correction, pure_loss, Channel, GkpEcConfig, LossParams};
use crate::error::Result;
use crate::fock::{Budget, FockCutoff, LEAKAGE_FAIL};
use crate::linalg::c;
use crate::phase_space::{displaced_parity, negativity_depth, parity_depth, NegativitySearch};
use crate::states::{epsilon_from_db, fock, gkp_damped_detailed, GkpLogical, GkpParams};
use crate::witness::WitnessSpec;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSweepConfig {
    pub n: usize,
    pub etas: Vec<f64>,
    pub cutoff: FockCutoff,
    pub search: NegativitySearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub eta: f64,
    pub parity_expectation: f64,
    pub wn_lower_bound: f64,
    pub activated_e: f64,
    pub activated_s: f64,
    /// Class of the Φ_W output, which is separable for every free input.
    pub classification: Classification,
    pub witness_alpha: [f64; 2],
}

/// Best displaced-parity witness on ρ: the origin is always a seed.
pub fn best_parity_witness(rho: &crate::DensityMatrix, search: &NegativitySearch) -> Result<(WitnessSpec, f64)> {
    let mut s = search.clone();
    s.seeds.push(c(0.0, 0.0));
    let res = negativity_depth(rho, &s)?;
    Ok((WitnessSpec::parity(res.argmin_alpha), parity_depth(&res)))
}

/// |n⟩ through pure loss for each η; rows sorted by η.
pub fn loss_sweep(cfg: &LossSweepConfig) -> Result<Vec<LossRow>> {
    let input = fock(cfg.n, cfg.cutoff)?.density();
    let mut etas = cfg.etas.clone();
    etas.sort_by(f64::total_cmp);
    etas.par_iter()
        .map(|&eta| {
            let rho = pure_loss(LossParams { eta }, cfg.cutoff)?.apply(&input)?;
            let parity = displaced_parity(&rho, c(0.0, 0.0))?;
            let (spec, wn) = best_parity_witness(&rho, &cfg.search)?;
            let e = activate_entanglement(&rho, &spec, Budget::default())?;
            let s = activate_steering(&rho, &spec, Budget::default())?;
            let alpha = match spec.family {
                crate::witness::WitnessFamily::DisplacedParity { alpha } => alpha,
                _ => unreachable!(),
            };
            Ok(LossRow {
                eta,
                parity_expectation: parity,
                wn_lower_bound: wn,
                activated_e: e.entanglement,
                activated_s: s.steering,
                classification: e.classification,
                witness_alpha: [alpha.re, alpha.im],
            })
        })
        .collect()
}

/// Where the |0̄⟩ codeword has its deepest negativity: (√π + i√π/2)/√2 and
/// its mirror images.
pub fn gkp_lattice_seeds() -> Vec<C64> {
    let a = (PI / 2.0).sqrt();
    let mut v = Vec::new();
    for sx in [1.0, -1.0] {
        for sp in [1.0, -1.0] {
            v.push(c(sx * a, sp * a / 2.0));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkpSweepConfig {
    pub squeezing_db: Vec<f64>,
    pub eta: f64,
    pub cutoff: FockCutoff,
    /// Error correction after loss; `None` skips it.
    pub ec: Option<EcSetting>,
    pub logical: GkpLogical,
    pub search: NegativitySearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcSetting {
    /// Ancillas share the data squeezing.
    MatchData,
    /// Ancillas at a fixed squeezing in dB.
    FixedDb(f64),
}

impl GkpSweepConfig {
    pub fn new(squeezing_db: Vec<f64>, eta: f64, cutoff: FockCutoff) -> Self {
        GkpSweepConfig {
            squeezing_db,
            eta,
            cutoff,
            ec: Some(EcSetting::MatchData),
            logical: GkpLogical::Zero,
            search: NegativitySearch {
                radius: Some(3.0),
                resolution: 24,
                refine_best: 6,
                f_tol: 1e-10,
                max_iter: 300,
                seeds: gkp_lattice_seeds(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkpRow {
    pub squeezing_db: f64,
    pub epsilon: f64,
    /// Largest activated entanglement over displaced parities on the input.
    pub e_in: f64,
    pub e_out: f64,
    pub infidelity: f64,
    pub argmin_in: [f64; 2],
    pub argmin_out: [f64; 2],
    pub leakage: f64,
}

fn activated_max(rho: &crate::DensityMatrix, search: &NegativitySearch) -> Result<(f64, C64)> {
    let res = negativity_depth(rho, search)?;
    Ok((parity_depth(&res) / 2.0, res.argmin_alpha))
}

fn gkp_row(cfg: &GkpSweepConfig, db: f64) -> Result<GkpRow> {
    let eps = epsilon_from_db(db);
    let code = gkp_damped_detailed(&GkpParams::new(eps, cfg.logical), cfg.cutoff, LEAKAGE_FAIL)?;
    let psi = code.state;
    let rho_in = psi.density();
    let mut rho = pure_loss(LossParams { eta: cfg.eta }, cfg.cutoff)?.apply(&rho_in)?;
    if let Some(ec) = cfg.ec {
        let ancilla = match ec {
            EcSetting::MatchData => eps,
            EcSetting::FixedDb(a) => epsilon_from_db(a),
        };
        rho = gkp_error_correction(GkpEcConfig::new(ancilla), cfg.cutoff)?.apply(&rho)?;
    }
    let (e_in, a_in) = activated_max(&rho_in, &cfg.search)?;
    let (e_out, a_out) = activated_max(&rho, &cfg.search)?;
    let overlap = psi
        .amplitudes()
        .iter()
        .zip(rho.matrix().dot(psi.amplitudes()).iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
        .re;
    Ok(GkpRow {
        squeezing_db: db,
        epsilon: eps,
        e_in,
        e_out,
        infidelity: (1.0 - overlap).max(0.0),
        argmin_in: [a_in.re, a_in.im],
        argmin_out: [a_out.re, a_out.im],
        leakage: rho.leakage().max(psi.leakage()),
    })
}

/// One row per squeezing level, sorted by dB.
pub fn gkp_sweep(cfg: &GkpSweepConfig) -> Result<Vec<GkpRow>> {
    let mut dbs = cfg.squeezing_db.clone();
    dbs.sort_by(f64::total_cmp);
    dbs.iter().map(|&db| gkp_row(cfg, db)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    #[test]
    fn loss_sweep_examples() {
        let cfg = LossSweepConfig {
            n: 1,
            etas: vec![1.0, 0.5, 0.8],
            cutoff: cut(20),
            search: NegativitySearch::default(),
        };
        let rows = loss_sweep(&cfg).unwrap();
        assert_eq!(rows.iter().map(|r| r.eta).collect::<Vec<_>>(), vec![0.5, 0.8, 1.0]);
        assert!(rows[0].wn_lower_bound.abs() < 1e-9);
        assert!((rows[1].wn_lower_bound - 0.6).abs() < 1e-9);
        let top = &rows[2];
        assert!((top.wn_lower_bound - 1.0).abs() < 1e-12);
        assert!((top.activated_e - 0.5).abs() < 1e-12 && (top.activated_s - 1.0).abs() < 1e-12);

        let two = loss_sweep(&LossSweepConfig { n: 2, etas: vec![1.0], ..cfg }).unwrap();
        assert!((two[0].parity_expectation - 1.0).abs() < 1e-12);
        // |2⟩ has negativity off the origin.
        assert!(two[0].wn_lower_bound > 0.1);
    }

    #[test]
    fn identity_pipeline() {
        let mut cfg = GkpSweepConfig::new(vec![6.0], 1.0, cut(60));
        cfg.ec = None;
        let row = &gkp_sweep(&cfg).unwrap()[0];
        assert!(row.infidelity < 1e-12);
        assert!((row.e_in - row.e_out).abs() < 1e-12);
        assert!(row.e_in > 0.0);
    }

    #[test]
    fn small_sweep_orders_rows() {
        let cfg = GkpSweepConfig::new(vec![6.0, 4.0], 0.9, cut(60));
        let rows = gkp_sweep(&cfg).unwrap();
        assert!(rows[0].squeezing_db < rows[1].squeezing_db);
        for r in &rows {
            assert!(r.e_out <= r.e_in + 1e-9);
            assert!(r.infidelity > 0.0 && r.infidelity < 1.0);
        }
    }
}
