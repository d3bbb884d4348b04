//! Fidelity kernels `K(x, x') = |<phi(x)|phi(x')>|^2` and Gram-matrix
//! conditioning.
//!
//! Exact mode reads the overlap off simulated statevectors. Shot mode runs
//! the compute-uncompute circuit `U_E(x)^dagger U_E(x')` on `|0...0>` and
//! reports the all-zeros frequency, an unbiased estimate with standard
//! error `sqrt(K(1-K)/M)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{angle_encode, EncoderConfig};
use crate::error::{Error, Result};
use crate::simcore::{overlap_sq, StateVector};
use crate::util::derive_seed;

/// Written as `exact` or `shots:M` in configs and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum KernelMode {
    #[default]
    Exact,
    Shots(u64),
}

impl std::fmt::Display for KernelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelMode::Exact => write!(f, "exact"),
            KernelMode::Shots(m) => write!(f, "shots:{m}"),
        }
    }
}

impl TryFrom<String> for KernelMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelMode> for String {
    fn from(m: KernelMode) -> String {
        m.to_string()
    }
}

impl std::str::FromStr for KernelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(KernelMode::Exact);
        }
        s.strip_prefix("shots:").and_then(|m| m.parse().ok()).map(KernelMode::Shots).ok_or_else(|| Error::Config(format!("unknown kernel mode `{s}`")))
    }
}

/// Symmetric `n x n` kernel matrix plus how it was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    n: usize,
    /// Row-major.
    values: Vec<f64>,
    pub mode: KernelMode,
    pub jitter: f64,
    pub centered: bool,
}

impl GramMatrix {
    /// Builds from row-major values, mirroring the upper triangle so the
    /// result is exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("gram matrix"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare { rows: n, cols: r.len() });
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                values[i * n + j] = rows[i][j];
                values[j * n + i] = rows[i][j];
            }
        }
        Ok(GramMatrix { n, values, mode: KernelMode::Exact, jitter: 0.0, centered: false })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    pub fn scaled(&self, c: f64) -> GramMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dmatrix()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// CSV: header `n,mode,jitter`, one metadata line, then `n` rows.
    pub fn to_csv(&self) -> String {
        let mut s = format!("n,mode,jitter\n{},{},{}\n", self.n, self.mode, self.jitter);
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("n,mode,jitter") {
            return Err(Error::Config("gram csv: missing `n,mode,jitter` header".into()));
        }
        let meta: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let bad = |what: &str| Error::Config(format!("gram csv: bad {what}"));
        if meta.len() != 3 {
            return Err(bad("metadata line"));
        }
        let n: usize = meta[0].parse().map_err(|_| bad("n"))?;
        let mode: KernelMode = meta[1].parse()?;
        let jitter: f64 = meta[2].parse().map_err(|_| bad("jitter"))?;
        let rows = lines.take(n).map(|l| l.split(',').map(|v| v.parse::<f64>().map_err(|_| bad("value"))).collect()).collect::<Result<Vec<Vec<f64>>>>()?;
        if rows.len() != n {
            return Err(bad("row count"));
        }
        let mut g = GramMatrix::from_rows(&rows)?;
        g.mode = mode;
        g.jitter = jitter;
        Ok(g)
    }
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    Ok(())
}

pub fn encoded_state(x: &[f64], enc: &EncoderConfig) -> Result<StateVector> {
    angle_encode(x, enc)?.prepare()
}

pub fn kernel_exact(x: &[f64], y: &[f64], enc: &EncoderConfig) -> Result<f64> {
    check_dims(x, y)?;
    overlap_sq(&encoded_state(x, enc)?, &encoded_state(y, enc)?)
}

/// Compute-uncompute estimate: prepare `U_E(y)|0>`, apply `U_E(x)^dagger`,
/// sample `shots` outcomes, return the all-zeros frequency.
pub fn kernel_shots(x: &[f64], y: &[f64], enc: &EncoderConfig, shots: u64, seed: u64) -> Result<f64> {
    check_dims(x, y)?;
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let mut circ = angle_encode(y, enc)?;
    circ.append(&angle_encode(x, enc)?.inverse())?;
    let state = circ.prepare()?;
    Ok(state.sample_counts(shots, seed)?.frequency(0))
}

fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    derive_seed(seed, &[i as u64, j as u64])
}

/// Gram matrix over `xs`. Off-diagonal cells are computed once on the upper
/// triangle and mirrored; the diagonal is pinned to 1.
pub fn gram(xs: &[Vec<f64>], mode: KernelMode, enc: &EncoderConfig, seed: u64) -> Result<GramMatrix> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyInput("gram: no samples"));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = match mode {
        KernelMode::Exact => {
            let states = xs.par_iter().map(|x| encoded_state(x, enc)).collect::<Result<Vec<_>>>()?;
            pairs.par_iter().map(|&(i, j)| overlap_sq(&states[i], &states[j])).collect::<Result<_>>()?
        }
        KernelMode::Shots(m) => pairs.par_iter().map(|&(i, j)| kernel_shots(&xs[i], &xs[j], enc, m, pair_seed(seed, i, j))).collect::<Result<_>>()?,
    };
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (&(i, j), v) in pairs.iter().zip(vals) {
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
    Ok(GramMatrix { n, values, mode, jitter: 0.0, centered: false })
}

/// Rectangular kernel block `K[r][c] = K(rows[r], cols[c])`, used to score
/// held-out samples against a training set.
pub fn cross_gram(rows: &[Vec<f64>], cols: &[Vec<f64>], mode: KernelMode, enc: &EncoderConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    match mode {
        KernelMode::Exact => {
            let col_states = cols.par_iter().map(|x| encoded_state(x, enc)).collect::<Result<Vec<_>>>()?;
            rows.par_iter()
                .map(|r| {
                    let s = encoded_state(r, enc)?;
                    col_states.iter().map(|c| overlap_sq(&s, c)).collect()
                })
                .collect()
        }
        KernelMode::Shots(m) => rows
            .par_iter()
            .enumerate()
            .map(|(i, r)| cols.iter().enumerate().map(|(j, c)| kernel_shots(r, c, enc, m, derive_seed(seed, &[u64::MAX, i as u64, j as u64]))).collect())
            .collect(),
    }
}

pub const AUTO_JITTER_MARGIN: f64 = 1e-10;

/// Adds `jitter * I`. A negative `jitter` requests the minimal repair
/// `max(0, -lambda_min + 1e-10)`.
pub fn repair(k: &GramMatrix, jitter: f64) -> GramMatrix {
    let amount = if jitter < 0.0 { (-k.min_eigenvalue() + AUTO_JITTER_MARGIN).max(0.0) } else { jitter };
    let mut out = k.clone();
    if amount > 0.0 {
        for i in 0..out.n {
            out.values[i * out.n + i] += amount;
        }
    }
    out.jitter += amount;
    out
}

/// Double centering `H K H` with `H = I - (1/n) 11^T`.
pub fn center(k: &GramMatrix) -> GramMatrix {
    let n = k.n;
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..n {
            // row and column means coincide for symmetric input
            out.values[i * n + j] = k.get(i, j) - row_mean[i] - row_mean[j] + grand;
        }
    }
    out.centered = true;
    out
}
