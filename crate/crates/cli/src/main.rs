//! `cvact`: drivers for the worked examples, emitting CSV sweeps and JSON
//! analyses with the resolved config, its hash, the cutoff and the largest
//! truncation leakage embedded in every file.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use cvact::activation::{activate_entanglement, activate_steering};
use cvact::channels::{gaussian_noise, pure_loss, Channel, GaussNoiseParams, LossParams};
use cvact::experiments::{self, best_parity_witness, EcSetting};
use cvact::linalg::c;
use cvact::monotones::{exact_boundary_mixture, property_suite, pure_state_bounds, FamilySearch};
use cvact::phase_space::{default_radius, negativity_depth, parity_depth, wigner_grid};
use cvact::states::fock;
use cvact::witness::{gaussian_fidelity, WitnessBox, WitnessSpec};
use cvact::{Budget, DensityMatrix, Error, FockCutoff};

use config::*;

#[derive(Parser, Debug)]
#[command(name = "cvact", version, about = "Witness-based resource bounds and activation for bosonic states")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML file with the command's parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Fock cutoff (number of levels), overriding the config.
    #[arg(long, global = true)]
    cutoff: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated seeds for multistart jitter.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,

    /// Largest dense matrix, in entries, allowed for two-mode objects.
    #[arg(long, global = true)]
    budget: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Wigner function on a square grid (CSV).
    Wigner,
    /// Negativity depth and its argmin (JSON).
    NegativityDepth,
    /// |n⟩ through pure loss over an η grid (CSV).
    LossSweep,
    /// Damped GKP codeword through loss and error correction (CSV).
    GkpSweep,
    /// Λ_G and the GNG/SNG floors of a pure state (JSON).
    PureBounds,
    /// Both activation channels for a state and witness (JSON).
    Activate,
    /// Exact values along the boundary mixture with the parity witness (CSV).
    BoundaryMix,
    /// Monotonicity, convexity and Lipschitz checks on a corpus (JSON).
    PropertySuite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Wigner => "wigner",
            Command::NegativityDepth => "negativity-depth",
            Command::LossSweep => "loss-sweep",
            Command::GkpSweep => "gkp-sweep",
            Command::PureBounds => "pure-bounds",
            Command::Activate => "activate",
            Command::BoundaryMix => "boundary-mix",
            Command::PropertySuite => "property-suite",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Compute(Error),
    /// Results were produced but a checked property failed.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Compute(e) => match e {
                Error::Truncation { .. } | Error::BudgetExceeded { .. } | Error::CutoffTooSmall(..) => 3,
                Error::Invariant(_) | Error::Linalg(_) | Error::Optimization(_) => 4,
                _ => 2,
            },
            Failure::Check(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(s) => write!(f, "config error: {s}"),
            Failure::Compute(e) => write!(f, "{e}"),
            Failure::Check(s) => write!(f, "check failed: {s}"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Outcome<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn cutoff(dim: usize) -> Outcome<FockCutoff> {
    FockCutoff::new(dim).map_err(|e| Failure::Config(e.to_string()))
}

/// Provenance shared by every output.
struct Meta {
    command: &'static str,
    config: Value,
    cutoff: usize,
    max_leakage: f64,
}

impl Meta {
    fn new<T: Serialize>(command: Command, cfg: &T, cutoff: usize, budget: Budget, seeds: &[u64]) -> Self {
        let config = json!({ "params": cfg, "budget": budget.max_entries, "seeds": seeds });
        Meta {
            command: command.name(),
            config,
            cutoff,
            max_leakage: 0.0,
        }
    }

    fn leak(&mut self, l: f64) {
        self.max_leakage = self.max_leakage.max(l);
    }

    fn hash(&self) -> String {
        let text = serde_json::to_string(&self.config).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    fn to_json(&self) -> Value {
        json!({
            "tool": "cvact",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config_hash": self.hash(),
            "cutoff": self.cutoff,
            "max_leakage": self.max_leakage,
            "config": self.config,
        })
    }

    fn csv_preamble(&self) -> String {
        format!(
            "# tool=cvact version={}\n# command={}\n# config_hash={}\n# cutoff={}\n# max_leakage={:e}\n# config={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.hash(),
            self.cutoff,
            self.max_leakage,
            serde_json::to_string(&self.config).expect("config serializes"),
        )
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Failure::Config(e.to_string()))
        }
    }
}

fn csv_text(meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8");
    meta.csv_preamble() + &body
}

fn json_text(meta: &Meta, result: Value) -> String {
    let doc = json!({ "metadata": meta.to_json(), "result": result });
    serde_json::to_string_pretty(&doc).expect("json serializes") + "\n"
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn run(cli: &Cli) -> Outcome<()> {
    let budget = cli.budget.map(|max_entries| Budget { max_entries }).unwrap_or_default();
    let seeds = cli.seed_list.clone().unwrap_or_default();
    let cfg_path = cli.config.as_deref();
    let out = cli.out.as_deref();
    let cmd = cli.command;

    match cmd {
        Command::Wigner => {
            let mut cfg: WignerConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let rho = cfg.state.density(cutoff(cfg.cutoff)?)?;
            meta.leak(rho.leakage());
            let radius = cfg.radius.unwrap_or_else(|| default_radius(&rho));
            let grid = wigner_grid(&rho, radius, cfg.resolution)?;
            let rows: Vec<Vec<String>> = grid
                .centers
                .iter()
                .zip(&grid.values)
                .map(|(a, w)| vec![f(a.re), f(a.im), f(*w)])
                .collect();
            emit(out, &csv_text(&meta, &["re_alpha", "im_alpha", "w_value"], &rows))
        }
        Command::NegativityDepth => {
            let mut cfg: NegativityDepthConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let rho = cfg.state.density(cutoff(cfg.cutoff)?)?;
            meta.leak(rho.leakage());
            let res = negativity_depth(&rho, &cfg.search)?;
            let result = json!({
                "depth": res.depth,
                "parity_depth": parity_depth(&res),
                "argmin_alpha": [res.argmin_alpha.re, res.argmin_alpha.im],
                "min_value": res.min_value,
                "refinement_converged": res.refinement_converged,
            });
            emit(out, &json_text(&meta, result))
        }
        Command::LossSweep => {
            let mut cfg: LossSweepConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            if cfg.etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
                return Err(Failure::Config("every η must lie in [0, 1]".into()));
            }
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let dim = cutoff(cfg.cutoff)?;
            meta.leak(fock(cfg.n, dim)?.leakage());
            let rows = experiments::loss_sweep(&experiments::LossSweepConfig {
                n: cfg.n,
                etas: cfg.etas.clone(),
                cutoff: dim,
                search: cfg.search.clone(),
            })?;
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        f(r.eta),
                        f(r.parity_expectation),
                        f(r.wn_lower_bound),
                        f(r.activated_e),
                        f(r.activated_s),
                        format!("{:?}", r.classification),
                    ]
                })
                .collect();
            let header = [
                "eta",
                "parity_expectation",
                "wn_lower_bound",
                "activated_E",
                "activated_S",
                "classification",
            ];
            emit(out, &csv_text(&meta, &header, &rows))
        }
        Command::GkpSweep => {
            let mut cfg: GkpSweepConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            if !(0.0..=1.0).contains(&cfg.eta) {
                return Err(Failure::Config("η must lie in [0, 1]".into()));
            }
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let ec = match cfg.ec {
                EcChoice::None => None,
                EcChoice::MatchData => Some(EcSetting::MatchData),
                EcChoice::FixedDb(db) => Some(EcSetting::FixedDb(db)),
            };
            let dim = cutoff(cfg.cutoff)?;
            // The structured EC never holds the two-mode state, but the
            // budget still caps the pair dimension the step stands for.
            if ec.is_some() {
                budget.check(dim.dim() * dim.dim())?;
            }
            let rows = experiments::gkp_sweep(&experiments::GkpSweepConfig {
                squeezing_db: cfg.squeezing_db.clone(),
                eta: cfg.eta,
                cutoff: dim,
                ec,
                logical: cfg.logical,
                search: cfg.search.clone(),
            })?;
            for r in &rows {
                meta.leak(r.leakage);
            }
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![f(r.squeezing_db), f(r.e_in), f(r.e_out), f(r.infidelity)])
                .collect();
            emit(out, &csv_text(&meta, &["squeezing_dB", "E_in", "E_out", "infidelity"], &rows))
        }
        Command::PureBounds => {
            let mut cfg: PureBoundsConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            if !seeds.is_empty() {
                cfg.fidelity.seeds = seeds.clone();
            }
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let psi = cfg
                .state
                .pure(cutoff(cfg.cutoff)?)?
                .ok_or_else(|| Failure::Config("pure-bounds needs a pure state".into()))?;
            meta.leak(psi.leakage());
            let fid = gaussian_fidelity(&psi, &cfg.fidelity)?;
            let b = pure_state_bounds(&psi, &cfg.fidelity)?;
            let result = json!({
                "lambda_g": b.lambda_g,
                "gng_lower": b.gng_lower,
                "sng_lower": b.sng_lower,
                "entanglement_floor_gng": b.gng_lower / 2.0,
                "entanglement_floor_sng": b.sng_lower / 2.0,
                "steering_floor_gng": b.gng_lower,
                "steering_floor_sng": b.sng_lower,
                "argmax_params": fid.argmax_params,
                "multistart_spread": fid.multistart_spread,
            });
            emit(out, &json_text(&meta, result))
        }
        Command::Activate => {
            let mut cfg: ActivateConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let rho = cfg.state.density(cutoff(cfg.cutoff)?)?;
            meta.leak(rho.leakage());
            let spec = match cfg.witness {
                WitnessChoice::Parity { re, im } => WitnessSpec::parity(c(re, im)),
                WitnessChoice::BestParity => best_parity_witness(&rho, &cfg.search)?.0,
            };
            let e = activate_entanglement(&rho, &spec, budget)?;
            let s = activate_steering(&rho, &spec, budget)?;
            let result = json!({ "entanglement_channel": e, "steering_channel": s });
            emit(out, &json_text(&meta, result))
        }
        Command::BoundaryMix => {
            let mut cfg: BoundaryMixConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            let meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let dim = cutoff(cfg.cutoff)?;
            let vac = fock(0, dim)?.density();
            let tau = fock(1, dim)?.density();
            let sigma = DensityMatrix::mixture(&[(0.5, &vac), (0.5, &tau)])?;
            let search = FamilySearch {
                negativity: cfg.search.clone(),
                budget,
                ..FamilySearch::default()
            };
            let mut ts = cfg.t.clone();
            ts.sort_by(f64::total_cmp);
            let pts = exact_boundary_mixture(&sigma, &tau, &WitnessSpec::parity(c(0.0, 0.0)), &ts, &search)?;
            let rows: Vec<Vec<String>> = pts
                .iter()
                .map(|p| vec![f(p.t), f(p.exact), f(p.witness_value), f(p.searched)])
                .collect();
            emit(out, &csv_text(&meta, &["t", "exact_value", "witness_value", "searched_bound"], &rows))
        }
        Command::PropertySuite => {
            let mut cfg: PropertySuiteConfig = load(cfg_path)?;
            cfg.cutoff = cli.cutoff.unwrap_or(cfg.cutoff);
            if !seeds.is_empty() {
                cfg.fidelity.seeds = seeds.clone();
            }
            let mut meta = Meta::new(cmd, &cfg, cfg.cutoff, budget, &seeds);
            let dim = cutoff(cfg.cutoff)?;
            let bx = WitnessBox::new(cfg.box_n, cfg.box_m).map_err(|e| Failure::Config(e.to_string()))?;
            let mut states = Vec::new();
            for s in &cfg.corpus {
                let rho = s.density(dim)?;
                meta.leak(rho.leakage());
                states.push((s.label(), rho));
            }
            let loss = pure_loss(LossParams { eta: cfg.loss_eta }, dim)?;
            let noise = gaussian_noise(
                GaussNoiseParams {
                    sigma2: cfg.noise_sigma2,
                    quad_order: cfg.noise_quad_order,
                },
                dim,
            )?;
            let search = FamilySearch {
                negativity: cfg.search.clone(),
                fidelity: cfg.fidelity.clone(),
                budget,
                ..FamilySearch::default()
            };
            let channels: [&dyn Channel; 2] = [&loss, &noise];
            let report = property_suite(&states, &channels, cfg.free_set, bx, &search)?;
            let failed = report.failures().len();
            emit(out, &json_text(&meta, serde_json::to_value(&report).expect("report serializes")))?;
            if failed > 0 {
                return Err(Failure::Check(format!("{failed} property checks failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvact {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
