/// Thomas algorithm for `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
/// Returns `None` on a vanishing or negative pivot, which for the systems
/// solved here signals a matrix that is not positive definite.
pub(crate) fn solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut den = b[0];
    if !(den > 0.0) {
        return None;
    }
    cp[0] = c[0] / den;
    dp[0] = d[0] / den;
    for i in 1..n {
        den = b[i] - a[i] * cp[i - 1];
        if !(den > 0.0) {
            return None;
        }
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    #[test]
    fn small_system() {
        // [[2,1,0],[1,2,1],[0,1,2]] x = [4,8,8] -> x = [1,2,3]
        let x = super::solve(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 0.0], &[4.0, 8.0, 8.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
