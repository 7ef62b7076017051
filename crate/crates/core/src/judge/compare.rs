use serde::{Deserialize, Serialize};

/// How candidate output is matched against the expected answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ComparePolicy {
    /// Whitespace-delimited tokens must match byte for byte.
    #[default]
    Exact,
    /// Tokens that parse as decimals may differ by the given absolute or
    /// relative amount; everything else compares exactly.
    FloatTolerance(f64),
}

fn tokens(text: &[u8]) -> impl Iterator<Item = &[u8]> {
    text.split(|b| b.is_ascii_whitespace())
        .filter(|t| !t.is_empty())
}

fn parse_decimal(token: &[u8]) -> Option<f64> {
    let s = std::str::from_utf8(token).ok()?;
    // Reject inf/nan spellings; only plain decimal numbers get tolerance.
    if !s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn token_eq(actual: &[u8], expected: &[u8], policy: ComparePolicy) -> bool {
    if actual == expected {
        return true;
    }
    match policy {
        ComparePolicy::Exact => false,
        ComparePolicy::FloatTolerance(tol) => {
            match (parse_decimal(actual), parse_decimal(expected)) {
                (Some(a), Some(e)) => {
                    let diff = (a - e).abs();
                    diff <= tol || diff <= tol * e.abs()
                }
                _ => false,
            }
        }
    }
}

/// Token-wise output comparison. Total: never fails.
pub fn compare_output(actual: &[u8], expected: &[u8], policy: ComparePolicy) -> bool {
    let mut a = tokens(actual);
    let mut e = tokens(expected);
    loop {
        match (a.next(), e.next()) {
            (None, None) => return true,
            (Some(x), Some(y)) if token_eq(x, y, policy) => {}
            _ => return false,
        }
    }
}
