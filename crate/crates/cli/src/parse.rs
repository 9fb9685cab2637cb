//! Comma-separated complex vectors: `a`, `a+bi`, `a-bi` tokens.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("token {index} ({token:?}): {reason}")]
pub struct ParseError {
    /// 1-based token position.
    pub index: usize,
    pub token: String,
    pub reason: String,
}

fn real(text: &str) -> Option<f64> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit() || b".+-eE".contains(&b)) {
        return None;
    }
    text.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Parses one literal. The imaginary part, if any, must follow a sign that
/// is not part of an exponent.
pub fn parse_complex(token: &str) -> Result<Complex64, String> {
    let t = token.trim();
    if t.is_empty() {
        return Err("empty token".into());
    }
    let Some(body) = t.strip_suffix('i') else {
        return real(t)
            .map(|x| Complex64::new(x, 0.0))
            .ok_or_else(|| "malformed real literal".into());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        s => real(s),
    };
    match (real(re), im) {
        (Some(a), Some(b)) => Ok(Complex64::new(a, b)),
        _ => Err("malformed complex literal".into()),
    }
}

pub fn parse_complex_vector(text: &str) -> Result<Vec<Complex64>, ParseError> {
    text.split(',')
        .enumerate()
        .map(|(k, token)| {
            parse_complex(token).map_err(|reason| ParseError {
                index: k + 1,
                token: token.to_string(),
                reason,
            })
        })
        .collect()
}
