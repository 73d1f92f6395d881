//! Regression-based sensitivity indices: partial correlation coefficients
//! and standardized regression coefficients.
//!
//! Both operate on standardized columns, so they are invariant under affine
//! rescaling of any design column. The normal equations are solved by
//! Gaussian elimination with partial pivoting; a vanishing pivot or a
//! vanishing residual/response variance signals a degenerate design.

use super::SensitivityError;

const PIVOT_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-9;

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_sd(values: &[f64], center: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    (values.iter().map(|v| (v - center).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

fn standardize(values: &[f64], what: &str) -> Result<Vec<f64>, SensitivityError> {
    let m = mean(values);
    let s = sample_sd(values, m);
    if s <= 0.0 {
        return Err(SensitivityError::DegenerateDesign(format!(
            "{what} has zero variance"
        )));
    }
    Ok(values.iter().map(|v| (v - m) / s).collect())
}

/// Solves `a x = b` in place; `a` must be square. Errors on a vanishing
/// pivot (collinear design).
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, SensitivityError> {
    let k = b.len();
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < PIVOT_TOL {
            return Err(SensitivityError::DegenerateDesign(
                "singular normal equations (collinear columns)".to_string(),
            ));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..k {
            let factor = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = b[row];
        for c in (row + 1)..k {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Least squares of `target` on `columns` (all standardized, so no
/// intercept); returns the residual vector.
fn residual(columns: &[&[f64]], target: &[f64]) -> Result<Vec<f64>, SensitivityError> {
    if columns.is_empty() {
        return Ok(target.to_vec());
    }
    let k = columns.len();
    // Normal equations scaled by 1/(n-1): unit diagonal for standardized
    // columns, which keeps the pivot threshold meaningful.
    let scale = (target.len() - 1) as f64;
    let mut gram = vec![vec![0.0; k]; k];
    let mut moment = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let dot: f64 = columns[i].iter().zip(columns[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = dot / scale;
            gram[j][i] = gram[i][j];
        }
        moment[i] = columns[i].iter().zip(target).map(|(a, b)| a * b).sum::<f64>() / scale;
    }
    let coef = solve(gram, moment)?;
    Ok(target
        .iter()
        .enumerate()
        .map(|(row, &t)| {
            t - columns
                .iter()
                .zip(&coef)
                .map(|(col, &c)| c * col[row])
                .sum::<f64>()
        })
        .collect())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn check_shape(design: &[Vec<f64>], qoi: &[f64]) -> Result<usize, SensitivityError> {
    let n = design.len();
    if n == 0 || design[0].is_empty() {
        return Err(SensitivityError::DegenerateDesign("empty design".to_string()));
    }
    let k = design[0].len();
    if qoi.len() != n {
        return Err(SensitivityError::DegenerateDesign(
            "design row count and QOI length differ".to_string(),
        ));
    }
    if n <= k + 2 {
        return Err(SensitivityError::TooFewSamples {
            what: "regression indices",
            needed: k + 2,
            got: n,
        });
    }
    Ok(k)
}

fn standardized_columns(
    design: &[Vec<f64>],
    k: usize,
) -> Result<Vec<Vec<f64>>, SensitivityError> {
    (0..k)
        .map(|j| {
            let col: Vec<f64> = design.iter().map(|row| row[j]).collect();
            standardize(&col, &format!("design column {j}"))
        })
        .collect()
}

/// Partial correlation coefficients: for each parameter, the Pearson
/// correlation between the residuals of that column and of the QOI after
/// regressing both on the remaining columns. When the other columns explain
/// the QOI completely, the remaining partial correlation is zero.
pub fn pcc(design: &[Vec<f64>], qoi: &[f64]) -> Result<Vec<f64>, SensitivityError> {
    let k = check_shape(design, qoi)?;
    let columns = standardized_columns(design, k)?;
    let y = standardize(qoi, "qoi")?;

    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let others: Vec<&[f64]> = (0..k)
            .filter(|&c| c != j)
            .map(|c| columns[c].as_slice())
            .collect();
        let e_x = residual(&others, &columns[j])?;
        let sd_x = sample_sd(&e_x, mean(&e_x));
        if sd_x < RESIDUAL_TOL {
            return Err(SensitivityError::DegenerateDesign(format!(
                "column {j} is collinear with the others"
            )));
        }
        let e_y = residual(&others, &y)?;
        let sd_y = sample_sd(&e_y, mean(&e_y));
        if sd_y < RESIDUAL_TOL {
            out.push(0.0);
        } else {
            out.push(pearson(&e_x, &e_y));
        }
    }
    Ok(out)
}

/// Standardized regression coefficients: ordinary least squares of the
/// standardized QOI on the standardized design; the coefficients are
/// `b_j * sd(x_j) / sd(y)` of the raw regression.
pub fn src(design: &[Vec<f64>], qoi: &[f64]) -> Result<Vec<f64>, SensitivityError> {
    let k = check_shape(design, qoi)?;
    let columns = standardized_columns(design, k)?;
    let y = standardize(qoi, "qoi")?;
    let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    // Same normal equations as `residual`, but the coefficients are the
    // result here.
    let scale = (y.len() - 1) as f64;
    let mut gram = vec![vec![0.0; k]; k];
    let mut moment = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let dot: f64 = refs[i].iter().zip(refs[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = dot / scale;
            gram[j][i] = gram[i][j];
        }
        moment[i] = refs[i].iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / scale;
    }
    solve(gram, moment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::RngStream;
    use crate::sensitivity::{lhs_sample, ParameterSpace};
    use rand::Rng;

    fn random_design(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let space = ParameterSpace::new(
            (0..k).map(|j| format!("x{j}")).collect(),
            vec![(0.0, 1.0); k],
        );
        lhs_sample(&space, n, &mut RngStream::seeded(seed))
    }

    #[test]
    fn exact_dependence_gives_unit_pcc() {
        let design = random_design(200, 3, 1);
        let qoi: Vec<f64> = design.iter().map(|row| row[0]).collect();
        let p = pcc(&design, &qoi).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6, "pcc {p:?}");
        assert!(p[1].abs() < 0.05 && p[2].abs() < 0.05, "pcc {p:?}");
    }

    #[test]
    fn independent_noise_gives_near_zero_indices() {
        let n = 400;
        let design = random_design(n, 4, 2);
        let mut rng = RngStream::seeded(3);
        let qoi: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let bound = 3.0 / (n as f64).sqrt();
        for value in pcc(&design, &qoi).unwrap() {
            assert!(value.abs() < bound, "pcc {value}");
        }
        for value in src(&design, &qoi).unwrap() {
            assert!(value.abs() < bound, "src {value}");
        }
    }

    #[test]
    fn src_standardization_removes_scale() {
        let design = random_design(300, 1, 4);
        let qoi: Vec<f64> = design.iter().map(|row| 2.0 * row[0]).collect();
        let s = src(&design, &qoi).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-9, "src {s:?}");
    }

    #[test]
    fn constant_response_is_degenerate() {
        let design = random_design(50, 2, 5);
        let qoi = vec![0.7; 50];
        assert!(matches!(
            src(&design, &qoi),
            Err(SensitivityError::DegenerateDesign(_))
        ));
        assert!(matches!(
            pcc(&design, &qoi),
            Err(SensitivityError::DegenerateDesign(_))
        ));
    }

    #[test]
    fn collinear_design_is_degenerate() {
        let base = random_design(60, 1, 6);
        let design: Vec<Vec<f64>> = base
            .iter()
            .map(|row| vec![row[0], 2.0 * row[0], row[0] * 0.5 + 1.0])
            .collect();
        let qoi: Vec<f64> = base.iter().map(|row| row[0] + 0.1).collect();
        assert!(matches!(
            pcc(&design, &qoi),
            Err(SensitivityError::DegenerateDesign(_))
        ));
        assert!(matches!(
            src(&design, &qoi),
            Err(SensitivityError::DegenerateDesign(_))
        ));
    }

    #[test]
    fn too_few_samples_is_reported() {
        let design = random_design(5, 3, 7);
        let qoi = vec![0.1, 0.4, 0.2, 0.9, 0.3];
        assert!(matches!(
            pcc(&design, &qoi),
            Err(SensitivityError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn indices_are_affine_invariant() {
        let design = random_design(250, 4, 8);
        let qoi: Vec<f64> = design
            .iter()
            .map(|row| 3.0 * row[0] - row[2] + 0.25 * row[3])
            .collect();
        let rescaled: Vec<Vec<f64>> = design
            .iter()
            .map(|row| {
                vec![
                    row[0] * 1234.5 - 7.0,
                    row[1],
                    row[2] * 1e-6,
                    row[3] + 100.0,
                ]
            })
            .collect();
        let p0 = pcc(&design, &qoi).unwrap();
        let p1 = pcc(&rescaled, &qoi).unwrap();
        let s0 = src(&design, &qoi).unwrap();
        let s1 = src(&rescaled, &qoi).unwrap();
        for j in 0..4 {
            assert!((p0[j] - p1[j]).abs() < 1e-9);
            assert!((s0[j] - s1[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_additive_response_ranks_identically() {
        let design = random_design(500, 4, 9);
        let mut rng = RngStream::seeded(10);
        let qoi: Vec<f64> = design
            .iter()
            .map(|row| {
                4.0 * row[2] + 0.8 * row[0] + 0.3 * row[1] + 0.1 * row[3]
                    + 0.05 * rng.random::<f64>()
            })
            .collect();
        let p = pcc(&design, &qoi).unwrap();
        let s = src(&design, &qoi).unwrap();
        let rank = |v: &[f64]| {
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
            order
        };
        assert_eq!(rank(&p), rank(&s));
        assert_eq!(rank(&p)[0], 2);
    }
}
