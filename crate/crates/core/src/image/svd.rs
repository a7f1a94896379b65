//! One-sided Jacobi SVD. Dimensions here are tiny (image planes up to
//! 64x64), so the quadratic sweep cost is irrelevant and accuracy wins.

/// Thin SVD of a row-major `rows x cols` matrix: returns `(u, sigma, v)`
/// with `a = u * diag(sigma) * v^T`, `u` being `rows x k`, `v` `cols x k`,
/// `k = min(rows, cols)`, singular values sorted descending.
pub fn jacobi_svd(a: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), rows * cols);
    if rows < cols {
        // Factor the transpose and swap the factors back.
        let mut at = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                at[c * rows + r] = a[r * cols + c];
            }
        }
        let (u, s, v) = jacobi_svd(&at, cols, rows);
        return (v, s, u);
    }

    let (m, n) = (rows, cols);
    // Column-major working copy; Jacobi rotates column pairs in place.
    let mut w = vec![0.0f64; m * n];
    for r in 0..m {
        for c in 0..n {
            w[c * m + r] = a[r * n + c];
        }
    }
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let eps = 1e-12;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ci, cj) = (i * m, j * m);
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..m {
                    alpha += w[ci + r] * w[ci + r];
                    beta += w[cj + r] * w[cj + r];
                    gamma += w[ci + r] * w[cj + r];
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let wi = w[ci + r];
                    let wj = w[cj + r];
                    w[ci + r] = c * wi - s * wj;
                    w[cj + r] = s * wi + c * wj;
                }
                for r in 0..n {
                    let vi = v[r * n + i];
                    let vj = v[r * n + j];
                    v[r * n + i] = c * vi - s * vj;
                    v[r * n + j] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let sigmas: Vec<f64> = (0..n)
        .map(|c| (0..m).map(|r| w[c * m + r] * w[c * m + r]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&x, &y| sigmas[y].partial_cmp(&sigmas[x]).unwrap());

    let mut u_out = vec![0.0f64; m * n];
    let mut s_out = vec![0.0f64; n];
    let mut v_out = vec![0.0f64; n * n];
    for (k, &c) in order.iter().enumerate() {
        let sigma = sigmas[c];
        s_out[k] = sigma;
        if sigma > 0.0 {
            for r in 0..m {
                u_out[r * n + k] = w[c * m + r] / sigma;
            }
        }
        for r in 0..n {
            v_out[r * n + k] = v[r * n + c];
        }
    }
    (u_out, s_out, v_out)
}

/// Rank-`keep` reconstruction `u[:, :keep] * diag(sigma[:keep]) * v[:, :keep]^T`.
pub fn reconstruct(
    u: &[f64],
    sigma: &[f64],
    v: &[f64],
    rows: usize,
    cols: usize,
    keep: usize,
) -> Vec<f64> {
    let k = sigma.len();
    let keep = keep.min(k);
    let mut out = vec![0.0f64; rows * cols];
    for t in 0..keep {
        let s = sigma[t];
        for r in 0..rows {
            let ur = u[r * k + t] * s;
            for c in 0..cols {
                out[r * cols + c] += ur * v[c * k + t];
            }
        }
    }
    out
}
