//! Standard normal CDF in plain and log scale.
//!
//! `phi` evaluates Φ through the complementary error function
//! (`libm::erfc`, the musl rational approximation), which keeps the
//! absolute error well below 1e-10 over the whole double range.
//! `log_phi` stays finite far into the lower tail where Φ itself
//! underflows, using the Mills-ratio asymptotic expansion.

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF Φ(z).
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal density φ(z) in log scale.
pub fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// ln Φ(z), finite for arbitrarily negative z.
///
/// For z ≥ -36, Φ(z) is representable (≥ ~4e-285) and computed directly.
/// Below that, ln Φ(z) = ln φ(z) - ln(-z) + ln(1 - 1/z² + 3/z⁴ - ...),
/// truncated where the next term is below machine precision for |z| ≥ 36.
pub fn log_phi(z: f64) -> f64 {
    if z >= -36.0 {
        phi(z).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)
            + 105.0 / (z2 * z2 * z2 * z2)
            - 945.0 / (z2 * z2 * z2 * z2 * z2);
        log_pdf(z) - (-z).ln() + series.ln()
    }
}

/// Hazard ratio φ(z)/Φ(z), stable in the lower tail.
pub fn hazard(z: f64) -> f64 {
    (log_pdf(z) - log_phi(z)).exp()
}
