#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("pass@k undefined for n={n}, c={c}, k={k}: need 0 <= c <= n and 1 <= k <= n")]
pub struct DomainError {
    pub n: u64,
    pub c: u64,
    pub k: u64,
}

/// Unbiased pass@k estimator: `1 - C(n-c, k) / C(n, k)`.
///
/// Evaluated as `1 - prod_{i=n-c+1}^{n} (1 - k/i)`, which never forms a
/// binomial coefficient and so stays finite for large `n`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, DomainError> {
    if c > n || k == 0 || k > n {
        return Err(DomainError { n, c, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let kf = k as f64;
    let miss: f64 = (n - c + 1..=n).map(|i| 1.0 - kf / i as f64).product();
    Ok((1.0 - miss).clamp(0.0, 1.0))
}

/// Mean pass@k over problems given `(n, c)` per problem.
pub fn mean_pass_at_k(samples: &[(u64, u64)], k: u64) -> Result<f64, DomainError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = samples
        .iter()
        .map(|&(n, c)| pass_at_k(n, c, k))
        .sum::<Result<f64, _>>()?;
    Ok(total / samples.len() as f64)
}
