//! Per-command configuration records, state specs and their construction.

use serde::{Deserialize, Serialize};

use cvact::channels::{gaussian_noise, pure_loss, Channel, GaussNoiseParams, LossParams};
use cvact::experiments::gkp_lattice_seeds;
use cvact::linalg::c;
use cvact::phase_space::NegativitySearch;
use cvact::states::{
    cat, coherent, epsilon_from_db, fock, gaussian_pure, gkp_damped, photon_subtracted_squeezed,
    GaussianPureParams, GkpLogical, GkpParams,
};
use cvact::witness::{FidelitySearch, FreeSet};
use cvact::{DensityMatrix, FockCutoff, PureState, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Fock {
        n: usize,
    },
    Coherent {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Cat {
        re: f64,
        #[serde(default)]
        im: f64,
        /// +1 even, −1 odd.
        sign: i32,
    },
    PhotonSubtractedSqueezed {
        r: f64,
    },
    Gaussian {
        #[serde(default)]
        re: f64,
        #[serde(default)]
        im: f64,
        r: f64,
        #[serde(default)]
        phi: f64,
    },
    LossyFock {
        n: usize,
        eta: f64,
    },
    Gkp {
        squeezing_db: f64,
        #[serde(default)]
        logical: GkpLogical,
    },
    NoisyGkp {
        squeezing_db: f64,
        sigma2: f64,
        #[serde(default = "default_quad_order")]
        quad_order: usize,
    },
}

fn default_quad_order() -> usize {
    16
}

impl StateSpec {
    pub fn pure(&self, cutoff: FockCutoff) -> Result<Option<PureState>> {
        Ok(Some(match *self {
            StateSpec::Fock { n } => fock(n, cutoff)?,
            StateSpec::Coherent { re, im } => coherent(c(re, im), cutoff)?,
            StateSpec::Cat { re, im, sign } => cat(c(re, im), sign, cutoff)?,
            StateSpec::PhotonSubtractedSqueezed { r } => photon_subtracted_squeezed(r, cutoff)?,
            StateSpec::Gaussian { re, im, r, phi } => {
                gaussian_pure(&GaussianPureParams { alpha: c(re, im), r, phi }, cutoff)?
            }
            StateSpec::Gkp { squeezing_db, logical } => {
                gkp_damped(&GkpParams::new(epsilon_from_db(squeezing_db), logical), cutoff)?
            }
            StateSpec::LossyFock { .. } | StateSpec::NoisyGkp { .. } => return Ok(None),
        }))
    }

    pub fn density(&self, cutoff: FockCutoff) -> Result<DensityMatrix> {
        if let Some(psi) = self.pure(cutoff)? {
            return Ok(psi.density());
        }
        match *self {
            StateSpec::LossyFock { n, eta } => {
                pure_loss(LossParams { eta }, cutoff)?.apply(&fock(n, cutoff)?.density())
            }
            StateSpec::NoisyGkp { squeezing_db, sigma2, quad_order } => {
                let code = gkp_damped(&GkpParams::new(epsilon_from_db(squeezing_db), GkpLogical::Zero), cutoff)?;
                gaussian_noise(GaussNoiseParams { sigma2, quad_order }, cutoff)?.apply(&code.density())
            }
            _ => unreachable!(),
        }
    }

    pub fn label(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub state: StateSpec,
    pub cutoff: usize,
    /// `None` uses 3√⟨n̂⟩ + 2.
    pub radius: Option<f64>,
    pub resolution: usize,
}

impl Default for WignerConfig {
    fn default() -> Self {
        WignerConfig {
            state: StateSpec::Fock { n: 1 },
            cutoff: 30,
            radius: None,
            resolution: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegativityDepthConfig {
    pub state: StateSpec,
    pub cutoff: usize,
    pub search: NegativitySearch,
}

impl Default for NegativityDepthConfig {
    fn default() -> Self {
        NegativityDepthConfig {
            state: StateSpec::Fock { n: 1 },
            cutoff: 30,
            search: NegativitySearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSweepConfig {
    pub n: usize,
    pub etas: Vec<f64>,
    pub cutoff: usize,
    pub search: NegativitySearch,
}

impl Default for LossSweepConfig {
    fn default() -> Self {
        LossSweepConfig {
            n: 1,
            etas: (0..=10).map(|k| k as f64 / 10.0).collect(),
            cutoff: 25,
            search: NegativitySearch::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcChoice {
    None,
    MatchData,
    FixedDb(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GkpSweepConfig {
    pub squeezing_db: Vec<f64>,
    pub eta: f64,
    pub cutoff: usize,
    pub ec: EcChoice,
    pub logical: GkpLogical,
    pub search: NegativitySearch,
}

impl Default for GkpSweepConfig {
    fn default() -> Self {
        GkpSweepConfig {
            squeezing_db: vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0],
            eta: 0.9,
            cutoff: 300,
            ec: EcChoice::MatchData,
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
#[serde(default, deny_unknown_fields)]
pub struct PureBoundsConfig {
    pub state: StateSpec,
    pub cutoff: usize,
    pub fidelity: FidelitySearch,
}

impl Default for PureBoundsConfig {
    fn default() -> Self {
        PureBoundsConfig {
            state: StateSpec::Fock { n: 1 },
            cutoff: 40,
            fidelity: FidelitySearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessChoice {
    Parity {
        #[serde(default)]
        re: f64,
        #[serde(default)]
        im: f64,
    },
    /// The deepest displaced parity found by the negativity search.
    BestParity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivateConfig {
    pub state: StateSpec,
    pub cutoff: usize,
    pub witness: WitnessChoice,
    pub search: NegativitySearch,
}

impl Default for ActivateConfig {
    fn default() -> Self {
        ActivateConfig {
            state: StateSpec::Fock { n: 1 },
            cutoff: 30,
            witness: WitnessChoice::Parity { re: 0.0, im: 0.0 },
            search: NegativitySearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryMixConfig {
    pub t: Vec<f64>,
    pub cutoff: usize,
    pub search: NegativitySearch,
}

impl Default for BoundaryMixConfig {
    fn default() -> Self {
        BoundaryMixConfig {
            t: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            cutoff: 10,
            search: NegativitySearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertySuiteConfig {
    pub corpus: Vec<StateSpec>,
    pub cutoff: usize,
    pub loss_eta: f64,
    pub noise_sigma2: f64,
    pub noise_quad_order: usize,
    pub free_set: FreeSet,
    pub box_n: f64,
    pub box_m: f64,
    pub search: NegativitySearch,
    pub fidelity: FidelitySearch,
}

impl Default for PropertySuiteConfig {
    fn default() -> Self {
        PropertySuiteConfig {
            corpus: vec![
                StateSpec::Fock { n: 1 },
                StateSpec::LossyFock { n: 1, eta: 0.8 },
                StateSpec::LossyFock { n: 1, eta: 0.6 },
                StateSpec::Fock { n: 2 },
                StateSpec::Fock { n: 0 },
            ],
            cutoff: 20,
            loss_eta: 0.8,
            noise_sigma2: 0.02,
            noise_quad_order: 12,
            free_set: FreeSet::WignerPositive,
            box_n: 1.0,
            box_m: 1.0,
            search: NegativitySearch::default(),
            fidelity: FidelitySearch::default(),
        }
    }
}
