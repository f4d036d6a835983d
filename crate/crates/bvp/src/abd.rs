//! Almost-block-diagonal linear solve for the global collocation Newton system.
//!
//! Unknowns are the nodal states `y_0 .. y_N` (each of size `n`). The system is
//!
//! ```text
//! [ Ba                 Bb ] [y_0]   [rbc]
//! [ A_0  B_0              ] [y_1]   [r_0]
//! [      A_1  B_1         ] [...] = [...]
//! [            ...        ] [   ]   [   ]
//! [          A_{N-1} B_{N-1}] [y_N] [r_{N-1}]
//! ```
//!
//! Boundary rows that only touch `y_0` are eliminated together with the first
//! interval, rows that only touch `y_N` are kept for the last block, and rows
//! that touch both carry an extra "tail" column block for `y_N` through the
//! sweep. Elimination uses partial pivoting restricted to the active window,
//! which is the same pivot set banded Gaussian elimination would use.
//! Interval blocks are produced on demand so the full Jacobian is never stored.

use thiserror::Error;

/// Column block width for the blocked panel factorization.
const PANEL: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbdError {
    #[error("singular collocation Jacobian (zero pivot in block {block}, column {column})")]
    Singular { block: usize, column: usize },
}

/// Blocks of one collocation interval, filled by the caller.
pub struct IntervalBlocks<'a> {
    /// `n×n` row-major derivative of the interval residual w.r.t. the left node.
    pub left: &'a mut [f64],
    /// `n×n` row-major derivative w.r.t. the right node.
    pub right: &'a mut [f64],
    /// Right-hand side for the interval rows.
    pub rhs: &'a mut [f64],
}

/// Stored pivot rows of one eliminated block.
struct PivotRows {
    /// `n × width` row-major, width = `2n + tail + 1` (last column is the rhs).
    rows: Vec<f64>,
}

/// Solve the ABD system. `ba`, `bb` are the `n×n` row-major boundary Jacobians,
/// `rbc` the boundary right-hand side. `fill(i, blocks)` must write interval `i`.
pub fn solve<F>(
    n: usize,
    intervals: usize,
    ba: &[f64],
    bb: &[f64],
    rbc: &[f64],
    mut fill: F,
) -> Result<Vec<f64>, AbdError>
where
    F: FnMut(usize, IntervalBlocks<'_>),
{
    assert!(intervals >= 1);
    let row_nonzero = |m: &[f64], r: usize| m[r * n..(r + 1) * n].iter().any(|&v| v != 0.0);
    let mut pending_rows = Vec::new();
    let mut right_rows = Vec::new();
    let mut tail_active = false;
    for r in 0..n {
        let a = row_nonzero(ba, r);
        let b = row_nonzero(bb, r);
        if b && !a {
            right_rows.push(r);
        } else {
            if b {
                tail_active = true;
            }
            pending_rows.push(r);
        }
    }
    let tail = if tail_active { n } else { 0 };
    let width = 2 * n + tail + 1;
    let p = pending_rows.len();
    let rows = p + n;

    // Pending rows: columns [cur (n) | tail (n if active)] + rhs.
    let pw = n + tail + 1;
    let mut pending = vec![0.0; p * pw];
    for (k, &r) in pending_rows.iter().enumerate() {
        let dst = &mut pending[k * pw..(k + 1) * pw];
        dst[..n].copy_from_slice(&ba[r * n..(r + 1) * n]);
        if tail_active {
            dst[n..2 * n].copy_from_slice(&bb[r * n..(r + 1) * n]);
        }
        dst[pw - 1] = rbc[r];
    }

    let mut window = vec![0.0; rows * width];
    let mut left = vec![0.0; n * n];
    let mut right = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    let mut stored: Vec<PivotRows> = Vec::with_capacity(intervals);

    for i in 0..intervals {
        fill(
            i,
            IntervalBlocks {
                left: &mut left,
                right: &mut right,
                rhs: &mut rhs,
            },
        );
        window.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..p {
            let src = &pending[k * pw..(k + 1) * pw];
            let dst = &mut window[k * width..(k + 1) * width];
            dst[..n].copy_from_slice(&src[..n]);
            if tail_active {
                dst[2 * n..3 * n].copy_from_slice(&src[n..2 * n]);
            }
            dst[width - 1] = src[pw - 1];
        }
        for r in 0..n {
            let dst = &mut window[(p + r) * width..(p + r + 1) * width];
            dst[..n].copy_from_slice(&left[r * n..(r + 1) * n]);
            dst[n..2 * n].copy_from_slice(&right[r * n..(r + 1) * n]);
            dst[width - 1] = rhs[r];
        }
        eliminate(&mut window, rows, width, n)
            .map_err(|column| AbdError::Singular { block: i, column })?;
        stored.push(PivotRows {
            rows: window[..n * width].to_vec(),
        });
        for k in 0..p {
            let src = &window[(n + k) * width..(n + k + 1) * width];
            let dst = &mut pending[k * pw..(k + 1) * pw];
            dst[..n].copy_from_slice(&src[n..2 * n]);
            if tail_active {
                dst[n..2 * n].copy_from_slice(&src[2 * n..3 * n]);
            }
            dst[pw - 1] = src[width - 1];
        }
    }

    // Final square block on y_N: leftover pending rows plus right-only boundary rows.
    let fw = n + 1;
    let mut last = vec![0.0; n * fw];
    for k in 0..p {
        let src = &pending[k * pw..(k + 1) * pw];
        let dst = &mut last[k * fw..(k + 1) * fw];
        for c in 0..n {
            dst[c] = src[c] + if tail_active { src[n + c] } else { 0.0 };
        }
        dst[n] = src[pw - 1];
    }
    for (k, &r) in right_rows.iter().enumerate() {
        let dst = &mut last[(p + k) * fw..(p + k + 1) * fw];
        dst[..n].copy_from_slice(&bb[r * n..(r + 1) * n]);
        dst[n] = rbc[r];
    }
    eliminate(&mut last, n, fw, n).map_err(|column| AbdError::Singular {
        block: intervals,
        column,
    })?;

    let mut x = vec![0.0; (intervals + 1) * n];
    {
        let xn = &mut x[intervals * n..];
        back_substitute(&last, fw, n, |r| last[r * fw + n], xn);
    }
    let xn_copy: Vec<f64> = x[intervals * n..].to_vec();
    for i in (0..intervals).rev() {
        let block = &stored[i].rows;
        let (head, rest) = x.split_at_mut((i + 1) * n);
        let next = &rest[..n];
        let xi = &mut head[i * n..];
        back_substitute(
            block,
            width,
            n,
            |r| {
                let row = &block[r * width..(r + 1) * width];
                let mut s = row[width - 1];
                for c in 0..n {
                    s -= row[n + c] * next[c];
                }
                if tail_active {
                    for c in 0..n {
                        s -= row[2 * n + c] * xn_copy[c];
                    }
                }
                s
            },
            xi,
        );
    }
    Ok(x)
}

/// Solve `U x = b` where `U` is the upper triangle of the leading `n×n` block of `rows`.
fn back_substitute<B>(rows: &[f64], width: usize, n: usize, b: B, x: &mut [f64])
where
    B: Fn(usize) -> f64,
{
    for r in (0..n).rev() {
        let row = &rows[r * width..(r + 1) * width];
        let mut s = b(r);
        for c in r + 1..n {
            s -= row[c] * x[c];
        }
        x[r] = s / row[r];
    }
}

/// Gaussian elimination with partial pivoting on the first `pivots` columns of a
/// `rows × width` row-major matrix. Row operations are applied across the full
/// width, so a right-hand side stored as the last column is reduced as well.
/// Returns the offending column on a zero pivot.
pub(crate) fn eliminate(
    a: &mut [f64],
    rows: usize,
    width: usize,
    pivots: usize,
) -> Result<(), usize> {
    debug_assert!(pivots <= rows && pivots <= width);
    let mut jb = 0;
    while jb < pivots {
        let bw = PANEL.min(pivots - jb);
        // Unblocked factorization of the panel columns jb..jb+bw.
        for j in jb..jb + bw {
            let mut piv = j;
            let mut best = a[j * width + j].abs();
            for r in j + 1..rows {
                let v = a[r * width + j].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(j);
            }
            if piv != j {
                for c in 0..width {
                    a.swap(j * width + c, piv * width + c);
                }
            }
            let d = a[j * width + j];
            for r in j + 1..rows {
                let l = a[r * width + j] / d;
                a[r * width + j] = l;
                if l != 0.0 {
                    for c in j + 1..jb + bw {
                        a[r * width + c] -= l * a[j * width + c];
                    }
                }
            }
        }
        let c0 = jb + bw;
        let nc = width - c0;
        if nc > 0 {
            // U12 = L11^{-1} A12 within the panel rows.
            for j in jb..jb + bw {
                for r in j + 1..jb + bw {
                    let l = a[r * width + j];
                    if l != 0.0 {
                        for c in c0..width {
                            a[r * width + c] -= l * a[j * width + c];
                        }
                    }
                }
            }
            // Trailing update A22 -= L21 U12.
            let m = rows - c0;
            if m > 0 {
                let ptr = a.as_mut_ptr();
                // SAFETY: L21 (rows c0.., cols jb..c0), U12 (rows jb..c0, cols c0..)
                // and A22 (rows c0.., cols c0..) are pairwise disjoint regions of `a`.
                unsafe {
                    matrixmultiply::dgemm(
                        m,
                        bw,
                        nc,
                        -1.0,
                        ptr.add(c0 * width + jb),
                        width as isize,
                        1,
                        ptr.add(jb * width + c0),
                        width as isize,
                        1,
                        1.0,
                        ptr.add(c0 * width + c0),
                        width as isize,
                        1,
                    );
                }
            }
        }
        jb += bw;
    }
    Ok(())
}
