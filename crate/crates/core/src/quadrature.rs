//! Gauss–Hermite quadrature and normalized Hermite functions.

use ndarray::{Array1, Array2};

use crate::error::Result;
use crate::linalg::real_eigh;

/// φ_0(x), …, φ_{n−1}(x) for the orthonormal Hermite functions
/// φ_k(x) = H_k(x) e^{−x²/2} / √(2ᵏ k! √π).
///
/// The three-term recurrence runs on a rescaled value so that the Gaussian
/// prefactor never underflows before the polynomial growth catches up.
pub fn hermite_functions(n: usize, x: f64) -> Array1<f64> {
    let mut out = Array1::zeros(n);
    if n == 0 {
        return out;
    }
    const BIG: f64 = 1e150;
    let mut log_scale = -0.5 * x * x - 0.25 * std::f64::consts::PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log_scale.exp();
    for k in 0..n - 1 {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            log_scale += BIG.ln();
        }
        out[k + 1] = cur * log_scale.exp();
    }
    out
}

/// Hermite functions at every point; row `j` holds φ_·(xs[j]).
pub fn hermite_function_table(n: usize, xs: &Array1<f64>) -> Array2<f64> {
    let mut table = Array2::zeros((xs.len(), n));
    for (j, &x) in xs.iter().enumerate() {
        table.row_mut(j).assign(&hermite_functions(n, x));
    }
    table
}

/// Nodes and weights for ∫ f(x) e^{−x²} dx ≈ Σ w_j f(x_j), exact for
/// polynomials of degree < 2n (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Result<(Array1<f64>, Array1<f64>)> {
    let (nodes, scaled) = gauss_hermite_scaled(n)?;
    let weights = &scaled * &nodes.mapv(|x| (-x * x).exp());
    Ok((nodes, weights))
}

/// Nodes and weights w_j e^{x_j²} for integrating ∫ g(x) dx ≈ Σ w̃_j g(x_j).
/// Weights come from the Christoffel function 1/Σ_k φ_k(x_j)², which stays
/// finite where the unscaled weights underflow.
pub fn gauss_hermite_scaled(n: usize) -> Result<(Array1<f64>, Array1<f64>)> {
    let mut jacobi = Array2::<f64>::zeros((n, n));
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[[k - 1, k]] = b;
        jacobi[[k, k - 1]] = b;
    }
    let (mut nodes, _) = real_eigh(&jacobi)?;
    // Symmetrize to remove round-off asymmetry in the spectrum.
    for j in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - j] - nodes[j]);
        nodes[j] = -s;
        nodes[n - 1 - j] = s;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes.mapv(|x| {
        let phi = hermite_functions(n, x);
        1.0 / phi.iter().map(|v| v * v).sum::<f64>()
    });
    Ok((nodes, weights))
}
