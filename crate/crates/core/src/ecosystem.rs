//! Random interaction matrices for May's ecosystem model.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One draw of the community matrix `C` with `c_ii = -r` and sparse Gaussian
/// off-diagonal couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEcosystemDraw {
    pub n: usize,
    pub r: f64,
    pub p: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Row-major `n × n`.
    pub matrix: Vec<f64>,
    /// `-r + √(2Np)·σ`
    pub eta_max_semicircle: f64,
    /// Top eigenvalue of `(C + Cᵀ)/2`.
    pub eta_max_empirical: f64,
}

impl RandomEcosystemDraw {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    /// Symmetric part `(C + Cᵀ)/2`.
    pub fn symmetrized(&self) -> Vec<f64> {
        let n = self.n;
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                e[i * n + j] = 0.5 * (self.entry(i, j) + self.entry(j, i));
            }
        }
        e
    }

    /// Header line `N r p sigma seed`, then one whitespace-separated row per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {} {}\n", self.n, self.r, self.p, self.sigma, self.seed);
        for row in self.matrix.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidConfig(format!("ecosystem matrix text: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty input"))?.split_whitespace().collect();
        if header.len() != 5 {
            return Err(bad("header must be `N r p sigma seed`"));
        }
        let n: usize = header[0].parse().map_err(|_| bad("bad N"))?;
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        let r = num(header[1], "bad r")?;
        let p = num(header[2], "bad p")?;
        let sigma = num(header[3], "bad sigma")?;
        let seed: u64 = header[4].parse().map_err(|_| bad("bad seed"))?;

        let mut matrix = Vec::with_capacity(n * n);
        for line in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| num(s, "bad matrix entry"))
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(bad("row length differs from N"));
            }
            matrix.extend(row);
        }
        if matrix.len() != n * n {
            return Err(bad("expected N rows"));
        }
        Ok(Self::from_matrix(n, r, p, sigma, seed, matrix))
    }

    fn from_matrix(n: usize, r: f64, p: f64, sigma: f64, seed: u64, matrix: Vec<f64>) -> Self {
        let mut draw = RandomEcosystemDraw {
            n,
            r,
            p,
            sigma,
            seed,
            matrix,
            eta_max_semicircle: semicircle_edge(n, r, p, sigma),
            eta_max_empirical: 0.0,
        };
        draw.eta_max_empirical = top_symmetric_eigenvalue(n, &draw.symmetrized());
        draw
    }
}

/// Right edge of the semicircle support, `-r + √(2Np)·σ`.
pub fn semicircle_edge(n: usize, r: f64, p: f64, sigma: f64) -> f64 {
    -r + (2.0 * n as f64 * p).sqrt() * sigma
}

/// Largest eigenvalue of a symmetric row-major `n × n` matrix.
pub fn top_symmetric_eigenvalue(n: usize, sym: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(n, n, sym);
    m.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn draw_ecosystem(n: usize, r: f64, p: f64, sigma: f64, seed: u64) -> Result<RandomEcosystemDraw> {
    if n < 2 {
        return Err(Error::param("n", format!("must be >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1], got {p}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", format!("must be finite and > 0, got {r}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                matrix[i * n + j] = -r;
            } else {
                // Both draws are consumed for every entry so the stream layout
                // does not depend on p.
                let keep: f64 = rng.random();
                let z: f64 = rng.sample(StandardNormal);
                if keep < p {
                    matrix[i * n + j] = sigma * z;
                }
            }
        }
    }
    Ok(RandomEcosystemDraw::from_matrix(n, r, p, sigma, seed, matrix))
}
