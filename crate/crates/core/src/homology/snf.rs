//! Smith normal form with transformation matrices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::matrix::IntMatrix;

/// `U · A · V = D` with `U`, `V` unimodular and `D` diagonal,
/// `d₀ | d₁ | … | d_{r−1}`, all positive.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub diag: Vec<BigInt>,
}

impl Smith {
    pub fn rank(&self) -> usize {
        self.diag.len()
    }

    pub fn compute(a: &IntMatrix) -> Smith {
        let (m, n) = (a.rows(), a.cols());
        let mut b = a.clone();
        let mut u = IntMatrix::identity(m);
        let mut u_inv = IntMatrix::identity(m);
        let mut v = IntMatrix::identity(n);
        let mut diag = Vec::new();

        // each helper keeps U⁻¹ in step with U
        let row_add = |b: &mut IntMatrix, u: &mut IntMatrix, ui: &mut IntMatrix, dst: usize, src: usize, k: &BigInt| {
            b.add_row(dst, src, k);
            u.add_row(dst, src, k);
            ui.add_col(src, dst, &-k);
        };
        let row_swap = |b: &mut IntMatrix, u: &mut IntMatrix, ui: &mut IntMatrix, x: usize, y: usize| {
            b.swap_rows(x, y);
            u.swap_rows(x, y);
            ui.swap_cols(x, y);
        };

        for t in 0..m.min(n) {
            loop {
                // smallest nonzero entry of the trailing block
                let mut best: Option<(usize, usize)> = None;
                for i in t..m {
                    for j in t..n {
                        let x = b.get(i, j);
                        if !x.is_zero() && best.is_none_or(|(p, q)| x.abs() < b.get(p, q).abs()) {
                            best = Some((i, j));
                        }
                    }
                }
                let Some((p, q)) = best else {
                    return Smith { u, u_inv, v, diag };
                };
                row_swap(&mut b, &mut u, &mut u_inv, t, p);
                b.swap_cols(t, q);
                v.swap_cols(t, q);

                let mut clean = true;
                for i in t + 1..m {
                    if !b.get(i, t).is_zero() {
                        let k = b.get(i, t).div_floor(b.get(t, t));
                        row_add(&mut b, &mut u, &mut u_inv, i, t, &-k);
                        clean &= b.get(i, t).is_zero();
                    }
                }
                for j in t + 1..n {
                    if !b.get(t, j).is_zero() {
                        let k = -b.get(t, j).div_floor(b.get(t, t));
                        b.add_col(j, t, &k);
                        v.add_col(j, t, &k);
                        clean &= b.get(t, j).is_zero();
                    }
                }
                if !clean {
                    continue;
                }
                // divisibility of the remaining block
                let piv = b.get(t, t).clone();
                let bad = (t + 1..m).find(|&i| (t + 1..n).any(|j| !b.get(i, j).is_multiple_of(&piv)));
                match bad {
                    Some(i) => row_add(&mut b, &mut u, &mut u_inv, t, i, &BigInt::from(1)),
                    None => break,
                }
            }
            if b.get(t, t).is_negative() {
                b.negate_row(t);
                u.negate_row(t);
                u_inv.negate_col(t);
            }
            diag.push(b.get(t, t).clone());
        }
        Smith { u, u_inv, v, diag }
    }

    /// The diagonal matrix `D` with the shape of the input.
    pub fn d_matrix(&self) -> IntMatrix {
        let mut d = IntMatrix::zeros(self.u.rows(), self.v.rows());
        for (i, x) in self.diag.iter().enumerate() {
            d.set(i, i, x.clone());
        }
        d
    }
}
