//! Cycle-by-cycle output-stationary array.
//!
//! Row `i` of A enters the left edge skewed by `i` cycles and moves one PE
//! right per cycle; column `j` of B enters the top edge skewed by `j` cycles
//! and moves one PE down per cycle. A PE accumulates whenever both operands
//! are present. Once the last operand has left the array the accumulators
//! shift out through the bottom edge, one row per cycle.

use ndarray::{s, Array2, ArrayView2};

use super::{MMJob, SystolicConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EventSimResult {
    pub cycles: u64,
    pub compute_cycles: u64,
    pub drain_cycles: u64,
    pub macs: u64,
    pub product: Array2<f64>,
}

/// Simulates the full product, one fold after another.
pub fn event_sim(job: &MMJob, cfg: &SystolicConfig, a: &Array2<f64>, b: &Array2<f64>) -> Result<EventSimResult> {
    let (m, k, n) = (job.m as usize, job.k as usize, job.n as usize);
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::DimensionMismatch(format!("job {job} has a zero dimension")));
    }
    if a.dim() != (m, k) {
        return Err(Error::DimensionMismatch(format!("A is {:?}, job needs {m}x{k}", a.dim())));
    }
    if b.dim() != (k, n) {
        return Err(Error::DimensionMismatch(format!("B is {:?}, job needs {k}x{n}", b.dim())));
    }
    cfg.validate()?;
    let (rows, cols) = (cfg.rows as usize, cfg.cols as usize);

    let mut out = EventSimResult {
        cycles: 0,
        compute_cycles: 0,
        drain_cycles: 0,
        macs: 0,
        product: Array2::zeros((m, n)),
    };
    for i0 in (0..m).step_by(rows) {
        let i1 = (i0 + rows).min(m);
        for j0 in (0..n).step_by(cols) {
            let j1 = (j0 + cols).min(n);
            let fold = simulate_fold(&a.slice(s![i0..i1, ..]), &b.slice(s![.., j0..j1]));
            out.compute_cycles += fold.compute_cycles;
            out.drain_cycles += fold.drain_cycles;
            out.macs += fold.macs;
            out.product.slice_mut(s![i0..i1, j0..j1]).assign(&fold.product);
        }
    }
    out.cycles = out.compute_cycles + out.drain_cycles;
    Ok(out)
}

fn simulate_fold(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> EventSimResult {
    let (m, k) = a.dim();
    let n = b.ncols();
    let mut a_reg: Array2<Option<f64>> = Array2::from_elem((m, n), None);
    let mut b_reg: Array2<Option<f64>> = Array2::from_elem((m, n), None);
    let mut acc = Array2::<f64>::zeros((m, n));
    let mut macs = 0u64;
    let mut compute_cycles = 0u64;
    let last_injection = (m - 1).max(n - 1) + k - 1;

    let mut t = 0usize;
    loop {
        let mut next_a = Array2::from_elem((m, n), None);
        let mut next_b = Array2::from_elem((m, n), None);
        for i in 0..m {
            for j in 0..n {
                next_a[[i, j]] = if j == 0 {
                    t.checked_sub(i).filter(|&s| s < k).map(|s| a[[i, s]])
                } else {
                    a_reg[[i, j - 1]]
                };
                next_b[[i, j]] = if i == 0 {
                    t.checked_sub(j).filter(|&s| s < k).map(|s| b[[s, j]])
                } else {
                    b_reg[[i - 1, j]]
                };
            }
        }
        a_reg = next_a;
        b_reg = next_b;

        let busy = a_reg.iter().chain(b_reg.iter()).any(Option::is_some);
        if !busy && t >= last_injection {
            break;
        }
        for ((acc, a), b) in acc.iter_mut().zip(a_reg.iter()).zip(b_reg.iter()) {
            if let (Some(x), Some(y)) = (a, b) {
                *acc += x * y;
                macs += 1;
            }
        }
        if busy {
            compute_cycles += 1;
        }
        t += 1;
    }

    // Drain: each cycle the bottom row leaves and the rest move down one.
    let mut product = Array2::<f64>::zeros((m, n));
    let mut drain_cycles = 0u64;
    let mut remaining = m;
    while remaining > 0 {
        let row = remaining - 1;
        product.row_mut(row).assign(&acc.row(row));
        remaining -= 1;
        drain_cycles += 1;
    }

    EventSimResult {
        cycles: compute_cycles + drain_cycles,
        compute_cycles,
        drain_cycles,
        macs,
        product,
    }
}
