//! Finite models for dimension and product entropy of Lip-normed C*-algebras:
//! Weyl matrix algebras, noncommutative tori and finite metric spaces.

pub mod approxdim;
pub mod caps;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod metricspace;
pub mod nctorus;
pub mod weyl;

pub use error::{Error, Result};

/// Twelve significant digits, plain notation when the exponent is moderate,
/// trailing zeros trimmed. Locale independent.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}
