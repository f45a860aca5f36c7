//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant.

use super::{ensure_finite, norm_one, DenseMatrix, NumericsError};

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371_920_351_148_152;

/// Returns `exp(a * t)`.
pub fn matrix_exponential(a: &DenseMatrix, t: f64) -> Result<DenseMatrix, NumericsError> {
    if a.nrows() != a.ncols() {
        return Err(NumericsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    ensure_finite(a, "matrix exponential argument")?;
    if !t.is_finite() {
        return Err(NumericsError::NonFinite("matrix exponential time"));
    }
    let n = a.nrows();
    let at = a * t;
    let norm = norm_one(&at);
    if norm == 0.0 {
        return Ok(DenseMatrix::identity(n, n));
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = at * 2f64.powi(-squarings);

    let b = &PADE13;
    let ident = DenseMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &scaled * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let numer = &v + &u;
    let denom = v - u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(NumericsError::Singular("Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs_diff;

    /// Scaled Taylor series with 30 terms followed by repeated squaring.
    fn taylor_oracle(a: &DenseMatrix, t: f64) -> DenseMatrix {
        let n = a.nrows();
        let mut s = 0;
        let mut scaled = a * t;
        while crate::numerics::norm_inf(&scaled) > 0.5 {
            scaled /= 2.0;
            s += 1;
        }
        let mut term = DenseMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..=30 {
            term = &term * &scaled / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn example_a() -> DenseMatrix {
        DenseMatrix::from_row_slice(
            4,
            4,
            &[
                -0.6, 0.0, -0.6, 0.2, -0.5, 0.0, 0.0, 0.4, 1.0, 0.6, 0.0, 0.5, 0.0, 0.0, 0.9, -0.3,
            ],
        )
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let e = matrix_exponential(&DenseMatrix::zeros(4, 4), 3.7).unwrap();
        assert_eq!(e, DenseMatrix::identity(4, 4));
    }

    #[test]
    fn diagonal_closed_form() {
        let a = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let e = matrix_exponential(&a, 1.0).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn matches_taylor_oracle_on_four_node_network() {
        let a = example_a();
        let e = matrix_exponential(&a, 1.0).unwrap();
        let o = taylor_oracle(&a, 1.0);
        assert!(max_abs_diff(&e, &o) < 1e-10);
    }

    #[test]
    fn large_argument_relative_accuracy() {
        // ||a t|| around 40 forces several squarings.
        let a = example_a();
        let e = matrix_exponential(&a, 10.0).unwrap();
        let o = taylor_oracle(&a, 10.0);
        let scale = o.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_abs_diff(&e, &o) / scale < 1e-10);
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(matches!(
            matrix_exponential(&DenseMatrix::zeros(2, 3), 1.0),
            Err(NumericsError::NotSquare { .. })
        ));
        let mut a = DenseMatrix::zeros(2, 2);
        a[(1, 0)] = f64::NAN;
        assert!(matrix_exponential(&a, 1.0).is_err());
        assert!(matrix_exponential(&DenseMatrix::zeros(2, 2), f64::INFINITY).is_err());
    }

    #[test]
    fn semigroup_property() {
        let a = example_a();
        for &(t, s) in &[(0.3, 0.9), (1.5, 2.5), (4.0, 3.0)] {
            let lhs = matrix_exponential(&a, t).unwrap() * matrix_exponential(&a, s).unwrap();
            let rhs = matrix_exponential(&a, t + s).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
        }
    }
}
