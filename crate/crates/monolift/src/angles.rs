//! Angle normalization helpers shared by lifting, losses, IO, and eval.

use std::f64::consts::PI;

/// Wraps an angle to the half-open interval [-pi, pi). In-range angles are
/// returned bit-for-bit unchanged, so wrapping is a true projection.
pub fn wrap_to_pi(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        -PI
    } else {
        t
    }
}

/// Absolute angular difference on the circle, in [0, pi].
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}
