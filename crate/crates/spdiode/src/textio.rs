//! Locale-independent numeric formatting for text output.

/// Format with 9 significant digits in scientific notation. All CSV and
/// console output goes through this so runs are byte-reproducible.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}
