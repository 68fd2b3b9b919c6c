//! Small dense linear algebra on row-major `d × d` matrices.

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solve `L z = b` for lower-triangular `L`.
pub(crate) fn forward_solve(l: &[f64], b: &[f64]) -> Vec<f64> {
    let d = b.len();
    let mut z = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * d + i];
    }
    z
}

/// Solve `Lᵀ x = z` for lower-triangular `L`.
pub(crate) fn backward_solve(l: &[f64], z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * d + i];
    }
    x
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky(a, b.len())?;
    Some(backward_solve(&l, &forward_solve(&l, b)))
}

/// `A v`.
pub(crate) fn mat_vec(a: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * d..(i + 1) * d].iter().zip(v).map(|(x, y)| x * y).sum();
    }
}
