//! Closed-form and quadrature evaluation of the model's detection
//! statistics: mean intensity, Mandel Q, hetero/homodyne spectra, mean
//! current and the counting functional.

mod current;
mod lambda;
mod mandel;
mod moments;
mod spectra;

pub use current::{counting_functional, mean_current, mean_current_power, CountingFunctional};
pub use lambda::{lambda_channel_closed, lambda_channel_quadrature, lambda_total, LambdaBreakdown};
pub use mandel::mandel_q;
pub use moments::{autocorrelation, environment_response, phase_variance, phase_variance_table, Moment};
pub use spectra::{
    environment_line, heterodyne_spectrum, homodyne_l, homodyne_phase, homodyne_spectrum, laser_line,
    laser_line_dual, HomodyneRegime, SpectralTable,
};

use crate::detection::ResponseFilter;
use crate::error::Result;
use crate::noise::Kernel;
use crate::oscillator::{derive_params, DerivedParams, OscillatorParams};
use crate::quad::QuadConfig;

/// Model plus quadrature controls and the current detector response.
#[derive(Debug, Clone)]
pub struct AnalyticConfig {
    pub model: DerivedParams,
    pub quad: QuadConfig,
    pub filter: ResponseFilter,
}

impl AnalyticConfig {
    pub fn new(params: &OscillatorParams) -> Result<Self> {
        Ok(Self {
            model: derive_params(params)?,
            quad: QuadConfig::with_tolerance(1e-13, 1e-11),
            filter: ResponseFilter::default(),
        })
    }

    pub fn with_filter(mut self, filter: ResponseFilter) -> Result<Self> {
        filter.validate()?;
        self.filter = filter;
        Ok(self)
    }

    pub fn with_quad(mut self, quad: QuadConfig) -> Self {
        self.quad = quad;
        self
    }

    /// Frequencies where spectral integrands peak.
    fn features(&self) -> Vec<f64> {
        let mut v = vec![self.model.params.mode_frequency];
        for ch in &self.model.params.channels {
            if let Kernel::Exponential { center, .. } = ch.kernel {
                v.push(center);
            }
        }
        v
    }

    /// Width scale of the spectral integrands.
    fn width(&self) -> f64 {
        let mut w = self.model.gamma0;
        for ch in &self.model.params.channels {
            if let Kernel::Exponential { decay, .. } = ch.kernel {
                w = w.max(decay);
            }
        }
        w
    }
}
