use super::{environment_response, lambda_total, AnalyticConfig};
use crate::error::{Error, Result};
use crate::quad::integrate_pieces;

/// Mandel Q of counts in a window of length `t` in the stationary regime,
///
/// `Q(t) = (2λ|β|²/Λ) ∫₀ᵗ (1 − u/t)(|C(u)|² + |D(u)|²) du`,
///
/// with `C`, `D` the stationary environment correlations of the amplitude.
/// Needs the laser off: with a laser the `|U_f|²` covariance enters, which
/// is left to simulation.
pub fn mandel_q(cfg: &AnalyticConfig, t: f64) -> Result<f64> {
    let p = &cfg.model.params;
    if p.laser.is_on() {
        return Err(Error::UnsupportedConfiguration(
            "closed-form Mandel Q needs the laser off; use simulation".into(),
        ));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(crate::error::invalid("window must be nonnegative"));
    }
    let lam = lambda_total(cfg)?.total;
    let rate = p.count_rate * p.beta.norm_sqr();
    if !(lam * rate > 0.0) {
        return Err(Error::QUndefined);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let g = |u: f64| -> f64 {
        match environment_response(cfg, u) {
            Ok((c, d)) => (1.0 - u / t) * (c.norm_sqr() + d.norm_sqr()),
            Err(_) => f64::NAN,
        }
    };
    // Correlations decay on the scale 2/γ₀; split so the start is resolved.
    let scale = 2.0 / cfg.model.gamma0;
    let mut pts = vec![0.0];
    let mut x = scale / 8.0;
    while x < t {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(t);
    let v = integrate_pieces(&g, &pts, cfg.quad)?;
    if !v.is_finite() {
        return Err(Error::NumericalDegeneracy("environment correlation failed".into()));
    }
    Ok(2.0 * rate / lam * v)
}
