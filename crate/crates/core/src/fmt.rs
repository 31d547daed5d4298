//! Number rendering shared by every text artifact.

/// Renders a real with 17 significant digits (scientific notation), so the
/// written value round-trips to the same `f64` bit pattern.
pub fn real(x: f64) -> String {
    if x == 0.0 {
        // collapse -0.0
        return format!("{:.16e}", 0.0f64);
    }
    format!("{:.16e}", x)
}

/// Like [`real`] but renders `None` as an empty cell.
pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}
