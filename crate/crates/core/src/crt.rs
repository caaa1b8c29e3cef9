//! Table-count machinery for the negative binomial dispersion parameter.
//!
//! Under the compound Poisson representation a count `y ~ NB(r, p)` is a sum
//! of `L ~ Pois(-r ln(1-p))` logarithmic variables. Given `y` and `r`, the
//! number of summands `L` has the p-free law
//!
//! ```text
//! Pr(L = j | y, r) = F(y, j) r^j / Σ_j' F(y, j') r^j'
//! F(m, j) = (m-1)/m F(m-1, j) + 1/m F(m-1, j-1),   F(1, 1) = 1
//! ```
//!
//! `F` rows are probability vectors (normalized unsigned Stirling numbers of
//! the first kind). [`RrTable`] is built with the same recurrence carrying the
//! `r^j` weights and is renormalized row by row, so no intermediate quantity
//! leaves `[0, 1]` whatever the size of `r`.

use rand::Rng;

use crate::error::{LgnbError, Result};

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Lower-triangular row-stochastic `F` table, rows `0..=m_max`.
///
/// Row `m` is indexed by `j = 0..=m`; `F(0, 0) = 1` and `F(m, 0) = 0` for `m >= 1`.
/// A log-space copy is kept for entries that underflow in linear space.
#[derive(Debug, Clone)]
pub struct FTable {
    rows: Vec<Vec<f64>>,
    ln_rows: Vec<Vec<f64>>,
}

pub fn build_f_table(m_max: usize) -> Result<FTable> {
    if m_max == 0 {
        return Err(LgnbError::domain("F table needs m_max >= 1"));
    }
    let mut rows = Vec::with_capacity(m_max + 1);
    let mut ln_rows = Vec::with_capacity(m_max + 1);
    rows.push(vec![1.0]);
    ln_rows.push(vec![0.0]);
    rows.push(vec![0.0, 1.0]);
    ln_rows.push(vec![f64::NEG_INFINITY, 0.0]);
    for m in 2..=m_max {
        let prev = &rows[m - 1];
        let ln_prev = &ln_rows[m - 1];
        let stay = (m - 1) as f64 / m as f64;
        let step = 1.0 / m as f64;
        let (ln_stay, ln_step) = (stay.ln(), step.ln());
        let mut row = vec![0.0; m + 1];
        let mut ln_row = vec![f64::NEG_INFINITY; m + 1];
        for j in 1..=m {
            let same = if j < m { prev[j] } else { 0.0 };
            row[j] = stay * same + step * prev[j - 1];
            let ln_same = if j < m { ln_prev[j] + ln_stay } else { f64::NEG_INFINITY };
            ln_row[j] = log_add_exp(ln_same, ln_prev[j - 1] + ln_step);
        }
        rows.push(row);
        ln_rows.push(ln_row);
    }
    Ok(FTable { rows, ln_rows })
}

impl FTable {
    pub fn m_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// `F(m, j)`; zero outside the triangle.
    pub fn get(&self, m: usize, j: usize) -> f64 {
        self.rows.get(m).and_then(|row| row.get(j)).copied().unwrap_or(0.0)
    }

    pub fn ln_get(&self, m: usize, j: usize) -> f64 {
        self.ln_rows
            .get(m)
            .and_then(|row| row.get(j))
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m]
    }
}

/// Row-normalized `R_r(m, j) ∝ F(m, j) r^j` for `0 <= j <= m <= m_max`.
#[derive(Debug, Clone)]
pub struct RrTable {
    r: f64,
    rows: Vec<Vec<f64>>,
}

pub fn build_rr_table(m_max: usize, r: f64) -> Result<RrTable> {
    if m_max == 0 {
        return Err(LgnbError::domain("R_r table needs m_max >= 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(LgnbError::domain(format!("R_r table needs a positive finite r, got {r}")));
    }
    let mut rows = Vec::with_capacity(m_max + 1);
    rows.push(vec![1.0]);
    rows.push(vec![0.0, 1.0]);
    for m in 2..=m_max {
        let prev = &rows[m - 1];
        let stay = (m - 1) as f64 / m as f64;
        let step = r / m as f64;
        let mut row = vec![0.0; m + 1];
        let mut total = 0.0;
        for j in 1..=m {
            let same = if j < m { prev[j] } else { 0.0 };
            row[j] = stay * same + step * prev[j - 1];
            total += row[j];
        }
        for v in row.iter_mut() {
            *v /= total;
        }
        rows.push(row);
    }
    Ok(RrTable { r, rows })
}

impl RrTable {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn m_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn get(&self, m: usize, j: usize) -> f64 {
        self.rows.get(m).and_then(|row| row.get(j)).copied().unwrap_or(0.0)
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m]
    }

    fn checked_row(&self, y: u64) -> Result<&[f64]> {
        let m = usize::try_from(y).ok().filter(|&m| m <= self.m_max()).ok_or_else(|| {
            LgnbError::domain(format!(
                "count {y} exceeds table size {}; build the table up to max(y)",
                self.m_max()
            ))
        })?;
        Ok(&self.rows[m])
    }
}

/// Draw the table count `L` for an observation `y` from row `y` of `table`.
pub fn sample_table_count<R: Rng + ?Sized>(y: u64, table: &RrTable, rng: &mut R) -> Result<u64> {
    if y == 0 {
        return Ok(0);
    }
    let row = table.checked_row(y)?;
    let u: f64 = rng.random();
    let mut cdf = 0.0;
    for (j, &prob) in row.iter().enumerate().skip(1) {
        cdf += prob;
        if u < cdf {
            return Ok(j as u64);
        }
    }
    // u landed in the rounding gap above the accumulated mass
    Ok(row.iter().rposition(|&p| p > 0.0).unwrap_or(1) as u64)
}

/// `E[L | y] = Σ_j j R(y, j)` under `table` (built at `exp(E[ln r])` for VB).
pub fn expected_table_count(y: u64, table: &RrTable) -> Result<f64> {
    if y == 0 {
        return Ok(0.0);
    }
    let row = table.checked_row(y)?;
    Ok(row.iter().enumerate().map(|(j, p)| j as f64 * p).sum())
}

/// Entropy `-Σ_j R(y, j) ln R(y, j)` of the table-count distribution.
pub fn table_count_entropy(y: u64, table: &RrTable) -> Result<f64> {
    if y == 0 {
        return Ok(0.0);
    }
    let row = table.checked_row(y)?;
    Ok(row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum())
}
