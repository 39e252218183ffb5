//! Minimal dense routines for the pursuit: dot products and a Householder
//! QR least-squares solve on the (small) support submatrix.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Applies the reflector `I - 2 v v^T / (v^T v)` to `target[j..]`.
fn apply_reflector(v: &[f64], vtv: f64, j: usize, target: &mut [f64]) {
    let mut w = 0.0;
    for (i, vi) in v.iter().enumerate() {
        w += vi * target[j + i];
    }
    w *= 2.0 / vtv;
    for (i, vi) in v.iter().enumerate() {
        target[j + i] -= w * vi;
    }
}

/// Solves `min_x || A x - b ||` for the column set `columns` via Householder
/// QR. Returns `None` when the columns are (numerically) rank deficient.
pub(crate) fn least_squares(columns: &[&[f64]], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let k = columns.len();
    debug_assert!(k >= 1 && columns.iter().all(|c| c.len() == n));
    if k > n {
        return None;
    }

    // Column-major working copy of A, reduced in place to R.
    let mut a: Vec<f64> = Vec::with_capacity(n * k);
    for col in columns {
        a.extend_from_slice(col);
    }
    let mut qtb = b.to_vec();

    let scale = columns
        .iter()
        .map(|c| norm2(c))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let rank_tol = 1e-10 * scale;

    for j in 0..k {
        let head = a[j * n + j];
        let tail_norm_sq: f64 = (j + 1..n).map(|i| a[j * n + i] * a[j * n + i]).sum();
        let sigma = (head * head + tail_norm_sq).sqrt();
        if sigma <= rank_tol {
            return None;
        }
        // Sign chosen to avoid cancellation in v0.
        let alpha = if head >= 0.0 { -sigma } else { sigma };
        let v0 = head - alpha;
        let vtv = v0 * v0 + tail_norm_sq;
        let v: Vec<f64> = std::iter::once(v0)
            .chain((j + 1..n).map(|i| a[j * n + i]))
            .collect();

        a[j * n + j] = alpha;
        for c in j + 1..k {
            apply_reflector(&v, vtv, j, &mut a[c * n..(c + 1) * n]);
        }
        apply_reflector(&v, vtv, j, &mut qtb);
    }

    // Back-substitute R x = (Q^T b)[..k].
    let mut x = vec![0.0f64; k];
    for j in (0..k).rev() {
        let mut s = qtb[j];
        for c in j + 1..k {
            s -= a[c * n + j] * x[c];
        }
        x[j] = s / a[j * n + j];
    }
    Some(x)
}
