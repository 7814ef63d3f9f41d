use std::cell::Cell;

use super::GrowthModel;
use crate::error::{Error, Result};
use crate::numeric::integrate;

impl GrowthModel {
    /// `log(F(t) / f(t))` with `F(t) = int_0^t f(s) ds`.
    ///
    /// The integrand is `exp(g(s) - g(t)) <= 1`, so nothing is ever formed in
    /// linear scale. Only the stretch where the integrand exceeds ~1e-20 of its
    /// total is integrated; the rest is bounded by monotonicity of `g`.
    /// Results are memoized per model.
    pub fn log_f_ratio(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("antiderivative needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let key = t.to_bits();
        if let Some(v) = self.f_cache.read().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.log_f_ratio_uncached(t)?;
        self.f_cache.write().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    fn log_f_ratio_uncached(&self, t: f64) -> Result<f64> {
        let at_t = self.eval_ext(t)?;
        let slope = at_t.g_prime.max(0.0);
        let failure: Cell<Option<Error>> = Cell::new(None);
        // integrate in the offset d = s - t so the bubble-width scale 1/g'
        // is not lost to the absolute precision of t
        let shift = |d: f64| -> f64 {
            match self.g_increment(t, d) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NEG_INFINITY
                }
            }
        };
        // integral is at least ~min(t, 1/g')/e
        let scale = if slope > 0.0 { (1.0 / slope).min(t) } else { t };
        let mut width = scale;
        let lower = loop {
            if width >= t {
                break -t;
            }
            let drop = -shift(-width);
            if drop >= 47.0 + (width / scale).ln().max(0.0) {
                break -width;
            }
            width *= 2.0;
        };
        let (value, _) = integrate(|d| shift(d).exp(), lower, 0.0, 0.0, 1e-13);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if !(value > 0.0) {
            return Err(Error::internal(format!("antiderivative quadrature returned {value} at t = {t}")));
        }
        Ok(value.ln())
    }

    /// `log F(t)`; `-inf` at `t = 0`.
    pub fn antiderivative_log(&self, t: f64) -> Result<f64> {
        let ratio = self.log_f_ratio(t)?;
        if ratio == f64::NEG_INFINITY {
            return Ok(ratio);
        }
        Ok(self.eval_ext(t)?.g + ratio)
    }
}
