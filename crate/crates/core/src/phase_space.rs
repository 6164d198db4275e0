//! Wigner function by displaced parity, grids, and the negativity depth
//! Δ(ρ) = max_α [−W_ρ(α)]₊.

use std::f64::consts::{FRAC_2_PI, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{displacement_op, DensityMatrix, FockCutoff, LEAKAGE_FAIL};
use crate::linalg::{c, trace_product, CMatrix, C64};
use crate::optimize::NelderMead;

/// Largest |β|² for which e^{−|β|²/2} and the recurrence below stay well
/// inside double precision.
pub const MAX_DISPLACEMENT_SQR: f64 = 600.0;

/// Wigner minima above −ZERO_TOL are round-off, not negativity.
pub const ZERO_TOL: f64 = 1e-12;

/// Matrix elements ⟨m|D(β)|n⟩ of the untruncated displacement operator for
/// m, n < dim, from the Laguerre form
/// ⟨n+k|D(β)|n⟩ = e^{−|β|²/2} β^k √(n!/(n+k)!) L_n^{(k)}(|β|²)
/// and ⟨n|D(β)|n+k⟩ = e^{−|β|²/2} (−β*)^k √(n!/(n+k)!) L_n^{(k)}(|β|²).
/// Along each diagonal the normalized Laguerre values follow the forward
/// three-term recurrence in n, which starts from the coherent amplitude at
/// level k and never leaves the unit interval.
pub fn displacement_elements(beta: C64, dim: usize) -> Result<CMatrix> {
    let x = beta.norm_sqr();
    if x > MAX_DISPLACEMENT_SQR {
        return Err(Error::Truncation {
            leakage: 1.0,
            limit: LEAKAGE_FAIL,
            context: format!("displacement {beta} beyond the representable range"),
        });
    }
    let (r, theta) = beta.to_polar();
    let mut d = CMatrix::zeros((dim, dim));
    let mut log_fact = 0.0;
    for k in 0..dim {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let h0 = if k == 0 {
            (-x / 2.0).exp()
        } else if r == 0.0 {
            0.0
        } else {
            (-x / 2.0 + k as f64 * r.ln() - 0.5 * log_fact).exp()
        };
        let up = C64::from_polar(1.0, k as f64 * theta);
        let down = if k % 2 == 0 { up.conj() } else { -up.conj() };
        let kf = k as f64;
        let (mut prev, mut cur) = (0.0, h0);
        for n in 0..dim - k {
            d[[n + k, n]] = up * cur;
            if k > 0 {
                d[[n, n + k]] = down * cur;
            }
            let nf = n as f64;
            let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf * (nf + kf)).sqrt() * prev)
                / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
            prev = cur;
            cur = next;
        }
    }
    Ok(d)
}

/// Tr(Π(α)ρ) with Π(α) = D(α)ΠD(α)† = D(2α)Π, using exact matrix elements.
pub fn displaced_parity(rho: &DensityMatrix, alpha: C64) -> Result<f64> {
    if rho.space().modes != 1 {
        return Err(Error::InvalidParameter("Wigner function of a single mode only".into()));
    }
    let d = rho.dim();
    let disp = displacement_elements(alpha * 2.0, d)?;
    let m = rho.matrix();
    let mut acc = c(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
            acc += disp[[a, b]] * m[[b, a]] * sign;
        }
    }
    if acc.im.abs() > 1e-10 {
        return Err(Error::Invariant(format!(
            "displaced parity has imaginary part {:.3e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// W_ρ(α) = (2/π) Tr[Π(α)ρ].
pub fn wigner_at(rho: &DensityMatrix, alpha: C64) -> Result<f64> {
    Ok(FRAC_2_PI * displaced_parity(rho, alpha)?)
}

/// Same value through the truncated matrix exponential D(α) on the state's
/// own cutoff, subject to the displacement leakage guard. Accurate only when
/// ρ is supported well below the cutoff.
pub fn wigner_at_truncated(rho: &DensityMatrix, alpha: C64) -> Result<f64> {
    let cutoff: FockCutoff = rho.cutoff();
    let disp = displacement_op(alpha, cutoff)?;
    let dm = disp.matrix();
    let mut par = dm.clone();
    for (_, mut col) in par.axis_iter_mut(ndarray::Axis(1)).enumerate().filter(|(n, _)| n % 2 == 1) {
        col.mapv_inplace(|z| -z);
    }
    let op = par.dot(&crate::linalg::dagger(dm));
    let v = trace_product(&op, rho.matrix());
    Ok(FRAC_2_PI * v.re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub centers: Vec<C64>,
    pub values: Vec<f64>,
    pub radius: f64,
    pub resolution: usize,
    /// Grid points skipped because the displacement left the valid range.
    pub dropped: Vec<C64>,
}

impl WignerGrid {
    pub fn spacing(&self) -> f64 {
        self.radius / self.resolution as f64
    }

    /// Riemann sum of W over the plane, in d²α.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing().powi(2)
    }

    pub fn min(&self) -> Option<(C64, f64)> {
        self.centers
            .iter()
            .zip(&self.values)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(a, v)| (*a, *v))
    }

    pub fn max(&self) -> Option<(C64, f64)> {
        self.centers
            .iter()
            .zip(&self.values)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(a, v)| (*a, *v))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_alpha,im_alpha,w_value\n");
        for (a, v) in self.centers.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", a.re, a.im, v));
        }
        out
    }
}

/// 3√⟨n̂⟩ + 2.
pub fn default_radius(rho: &DensityMatrix) -> f64 {
    3.0 * rho.mean_photon_number().max(0.0).sqrt() + 2.0
}

fn grid_points(center: C64, radius: f64, resolution: usize) -> Vec<C64> {
    let h = radius / resolution as f64;
    let r = resolution as i64;
    let mut pts = Vec::with_capacity((2 * resolution + 1).pow(2));
    for i in -r..=r {
        for j in -r..=r {
            pts.push(center + c(i as f64 * h, j as f64 * h));
        }
    }
    pts
}

/// Square grid of (2·resolution+1)² points spanning [−radius, radius]² in
/// Re α and Im α.
pub fn wigner_grid(rho: &DensityMatrix, radius: f64, resolution: usize) -> Result<WignerGrid> {
    if !(radius > 0.0) || resolution == 0 {
        return Err(Error::InvalidParameter(format!(
            "grid needs positive radius and resolution, got {radius}, {resolution}"
        )));
    }
    let pts = grid_points(c(0.0, 0.0), radius, resolution);
    let evaluated: Vec<(C64, Result<f64>)> =
        pts.par_iter().map(|&a| (a, wigner_at(rho, a))).collect();
    let mut grid = WignerGrid {
        centers: Vec::new(),
        values: Vec::new(),
        radius,
        resolution,
        dropped: Vec::new(),
    };
    for (a, v) in evaluated {
        match v {
            Ok(v) => {
                grid.centers.push(a);
                grid.values.push(v);
            }
            Err(Error::Truncation { .. }) => grid.dropped.push(a),
            Err(e) => return Err(e),
        }
    }
    if !grid.dropped.is_empty() {
        log::warn!("{} grid points dropped beyond the displacement range", grid.dropped.len());
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegativitySearch {
    /// Half-width of the coarse grid; `None` uses 3√⟨n̂⟩ + 2.
    pub radius: Option<f64>,
    pub resolution: usize,
    /// Number of best grid points refined.
    pub refine_best: usize,
    pub f_tol: f64,
    pub max_iter: usize,
    /// Extra refinement starting points.
    pub seeds: Vec<C64>,
}

impl Default for NegativitySearch {
    fn default() -> Self {
        NegativitySearch {
            radius: None,
            resolution: 20,
            refine_best: 5,
            f_tol: 1e-8,
            max_iter: 200,
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityDepthResult {
    pub depth: f64,
    pub argmin_alpha: C64,
    /// Wigner value at `argmin_alpha` (may be positive when depth is zero).
    pub min_value: f64,
    pub refinement_converged: bool,
}

/// Coarse grid scan, then Nelder–Mead from the best grid points and seeds.
pub fn negativity_depth(rho: &DensityMatrix, cfg: &NegativitySearch) -> Result<NegativityDepthResult> {
    let radius = cfg.radius.unwrap_or_else(|| default_radius(rho));
    let grid = wigner_grid(rho, radius, cfg.resolution.max(1))?;
    let mut order: Vec<usize> = (0..grid.values.len()).collect();
    order.sort_by(|&a, &b| {
        grid.values[a]
            .total_cmp(&grid.values[b])
            .then(grid.centers[a].norm().total_cmp(&grid.centers[b].norm()))
    });
    let mut starts: Vec<C64> = order
        .iter()
        .take(cfg.refine_best)
        .map(|&i| grid.centers[i])
        .collect();
    starts.extend(cfg.seeds.iter().cloned());
    let nm = NelderMead {
        f_tol: cfg.f_tol,
        max_iter: cfg.max_iter,
        step: 0.5 * grid.spacing(),
    };
    let refined: Vec<(C64, f64, bool)> = starts
        .par_iter()
        .map(|&a0| {
            let f = |x: &[f64]| wigner_at(rho, c(x[0], x[1])).unwrap_or(f64::INFINITY);
            let m = nm.minimize(f, &[a0.re, a0.im]);
            let start_val = f(&[a0.re, a0.im]);
            if m.value <= start_val {
                (c(m.x[0], m.x[1]), m.value, m.converged)
            } else {
                (a0, start_val, m.converged)
            }
        })
        .collect();
    let mut best: Option<(C64, f64)> = None;
    for &(a, v, _) in &refined {
        best = match best {
            None => Some((a, v)),
            Some((ba, bv)) => {
                if v < bv - 1e-12 || ((v - bv).abs() <= 1e-12 && a.norm() < ba.norm()) {
                    Some((a, v))
                } else {
                    Some((ba, bv))
                }
            }
        };
    }
    let (argmin, min_value) = match best {
        Some(b) => b,
        None => grid.min().ok_or_else(|| Error::InvalidParameter("empty Wigner grid".into()))?,
    };
    let depth = if -min_value > ZERO_TOL { -min_value } else { 0.0 };
    let converged = depth == 0.0 || refined.iter().all(|r| r.2);
    Ok(NegativityDepthResult {
        depth: depth.min(FRAC_2_PI + 1e-9),
        argmin_alpha: argmin,
        min_value,
        refinement_converged: converged,
    })
}

/// (π/2)·Δ(ρ): the displaced-parity witness value at the deepest point.
pub fn parity_depth(result: &NegativityDepthResult) -> f64 {
    PI / 2.0 * result.depth
}
