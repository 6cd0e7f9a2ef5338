//! End-to-end acceptance checks binding simulation to the analytic oracles.
//! Each criterion carries its own fixed model; only the master seed and
//! worker count are adjustable.

use crate::detection::{estimate_counting, estimate_spectrum, estimate_spectrum_real, filter_increments, CountSample};
use crate::detection::{ResponseFilter, SpectrumConfig, Window};
use crate::ensemble::{mean_se, run_ordered, MeanEstimate};
use crate::error::{Error, Result};
use crate::fock::C64;
use crate::noise::{
    classical_spectrum, ClassicalSpectrum, ColoredChannelSpec, LaserSpec, LaserState, LocalOscillatorSpec, NoiseBank,
};
use crate::oracle::{
    autocorrelation, environment_line, heterodyne_spectrum, homodyne_l, homodyne_phase, homodyne_spectrum,
    lambda_channel_closed, lambda_channel_quadrature, lambda_total, laser_line, mandel_q, AnalyticConfig,
    HomodyneRegime, Moment,
};
use crate::oscillator::{cross_validate_fock_substeps, derive_params, DerivedParams, Mode, OscillatorParams, OscillatorSimulator};
use crate::quad::{integrate_real_line, QuadConfig};
use crate::rng::{stream, stream_key, TrajectorySeed};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

pub const CRITERIA: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceOptions {
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self { seed: 20240501, threads: None }
    }
}

/// Result of one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub wall_seconds: f64,
}

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "martingale weight",
        2 => "reference/physical equivalence",
        3 => "direct-detection rate",
        4 => "squeezed-reservoir identity",
        5 => "Mandel Q",
        6 => "heterodyne spectrum",
        7 => "spectral sum rules",
        8 => "homodyne limits",
        9 => "engine cross-validation",
        10 => "classical noise fidelity",
        _ => "unknown",
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Seed of an independent sub-experiment.
fn sub_seed(seed: u64, tag: &str) -> u64 {
    let k = stream_key(seed, u64::MAX, tag);
    u64::from_le_bytes(k[..8].try_into().expect("8 bytes"))
}

/// Model shared by criteria 1–3 and 7: γ₀ = 1, λ = 0.5, |β| = 1, one OU
/// channel with γ₅ = 0.3 and |g₅| = 0.2, laser g = 0.3 with ε = 0.05.
pub fn drift_model() -> OscillatorParams {
    OscillatorParams {
        mode_frequency: 1.0,
        alpha1: c(0.5, 0.0),
        alpha2: c(0.5, 0.0),
        beta: c(1.0, 0.0),
        count_rate: 0.5,
        laser: LaserSpec {
            amplitude: c(0.3, 0.0),
            frequency: 1.0,
            bandwidth: 0.05,
        },
        local_oscillator: LocalOscillatorSpec::Heterodyne {
            frequency: 1.0,
            linewidth: 0.1,
            phase: 0.0,
        },
        channels: vec![ColoredChannelSpec::exponential(c(0.0, 0.0), c(0.2, 0.0), 0.3, 1.0)],
        initial_amplitude: c(0.0, 0.0),
    }
}

/// Heterodyne model of criterion 6, with the line at ν₀ = 10 and the LO at 0.
pub fn heterodyne_model() -> OscillatorParams {
    OscillatorParams {
        mode_frequency: 10.0,
        alpha1: c(0.6, 0.0),
        alpha2: c(0.4, 0.0),
        beta: c(1.0, 0.0),
        count_rate: 0.48,
        laser: LaserSpec {
            amplitude: c(0.8, 0.0),
            frequency: 10.0,
            bandwidth: 0.2,
        },
        local_oscillator: LocalOscillatorSpec::Heterodyne {
            frequency: 0.0,
            linewidth: 0.1,
            phase: 0.0,
        },
        channels: vec![
            ColoredChannelSpec::exponential(c(0.0, 0.0), c(0.3, 0.0), 0.5, 9.0),
            ColoredChannelSpec::white(c(0.2, 0.0)),
        ],
        initial_amplitude: c(0.0, 0.0),
    }
}

/// Balanced homodyne model of criterion 8, zero detuning, LO phase `theta`.
pub fn homodyne_model(theta: f64) -> OscillatorParams {
    OscillatorParams {
        mode_frequency: 1.0,
        alpha1: c(0.6, 0.0),
        alpha2: c(0.4, 0.0),
        beta: c(1.0, 0.0),
        count_rate: 0.48,
        laser: LaserSpec {
            amplitude: c(0.8, 0.0),
            frequency: 1.0,
            bandwidth: 0.1,
        },
        local_oscillator: LocalOscillatorSpec::Homodyne { phase: theta, delay: 0.0 },
        channels: Vec::new(),
        initial_amplitude: c(0.0, 0.0),
    }
}

/// Weak-drive model of criterion 9: occupation stays near one photon, far
/// below the truncation, and ξ rarely nears the vacuum, where a jump divides
/// the integrator's error by |ξ|.
pub fn crossval_model() -> OscillatorParams {
    OscillatorParams {
        mode_frequency: 1.0,
        alpha1: c(0.6, 0.0),
        alpha2: c(0.5, 0.2),
        beta: c(0.5, 0.0),
        count_rate: 0.5,
        laser: LaserSpec {
            amplitude: c(0.8, 0.0),
            frequency: 1.0,
            bandwidth: 0.05,
        },
        local_oscillator: LocalOscillatorSpec::Heterodyne {
            frequency: 1.0,
            linewidth: 0.2,
            phase: 0.3,
        },
        channels: vec![
            ColoredChannelSpec::exponential(c(0.1, 0.0), c(0.2, 0.1), 0.5, 1.0),
            ColoredChannelSpec::white(c(0.25, 0.1)),
        ],
        initial_amplitude: c(0.0, -0.8),
    }
}

/// Per-trajectory result of the shared reference ensemble.
#[derive(Debug, Clone, Copy)]
struct WeightedCount {
    weight: f64,
    count: f64,
}

/// Runs `n` trajectories of `steps` steps and maps each simulator through
/// `f`, which sees every snapshot.
fn ensemble<T, S, F>(p: &DerivedParams, dt: f64, mode: Mode, seed: u64, n: u64, threads: Option<usize>, init: S, f: F) -> Result<Vec<T>>
where
    T: Send,
    S: Fn() -> T + Sync + Send,
    F: Fn(&mut OscillatorSimulator, &mut T) -> bool + Sync + Send,
{
    let rows = run_ordered(n, threads, |id| -> Result<T> {
        let mut sim = OscillatorSimulator::new(p, dt, mode, TrajectorySeed::new(seed, id))?;
        let mut acc = init();
        while f(&mut sim, &mut acc) {}
        Ok(acc)
    })?;
    rows.into_iter().collect()
}

/// Effective sample size `(Σw)²/Σw²` and the largest single share of `Σw`.
fn weight_diagnostics(ws: impl Iterator<Item = f64>) -> String {
    let (mut s1, mut s2, mut top) = (0.0f64, 0.0f64, 0.0f64);
    for w in ws {
        s1 += w;
        s2 += w * w;
        top = top.max(w);
    }
    format!("effective sample size {:.0}, largest share {:.3}", s1 * s1 / s2, top / s1)
}

/// Acceptance suite with shared intermediate results.
pub struct AcceptanceSuite {
    opts: AcceptanceOptions,
    reference: OnceLock<std::result::Result<Vec<WeightedCount>, Error>>,
}

const DRIFT_DT: f64 = 0.01;
const DRIFT_HORIZON: f64 = 20.0;
/// Reference-law paths. The weights of this model are heavy tailed (an
/// effective sample size of a few dozen per 1e5 paths), so the sample is
/// taken ten times above the minimum.
const REFERENCE_PATHS: u64 = 1_000_000;
const PHYSICAL_PATHS: u64 = 100_000;

impl AcceptanceSuite {
    pub fn new(opts: AcceptanceOptions) -> Self {
        Self {
            opts,
            reference: OnceLock::new(),
        }
    }

    /// Runs one criterion; errors count as failures.
    pub fn run(&self, id: u32) -> CriterionOutcome {
        let start = Instant::now();
        let res = match id {
            1 => self.martingale(),
            2 => self.girsanov(),
            3 => self.direct_rate(),
            4 => self.squeezed_reservoir(),
            5 => self.mandel(),
            6 => self.heterodyne(),
            7 => self.sum_rules(),
            8 => self.homodyne(),
            9 => self.crossval(),
            10 => self.noise_fidelity(),
            _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
        };
        let (passed, detail) = match res {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionOutcome {
            id,
            name: criterion_name(id).to_string(),
            passed,
            detail,
            wall_seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn reference_ensemble(&self) -> Result<&[WeightedCount]> {
        let r = self.reference.get_or_init(|| {
            let p = derive_params(&drift_model())?;
            let steps = (DRIFT_HORIZON / DRIFT_DT).round() as usize;
            let rows = ensemble(
                &p,
                DRIFT_DT,
                Mode::Reference,
                sub_seed(self.opts.seed, "reference"),
                REFERENCE_PATHS,
                self.opts.threads,
                || (0usize, 0.0f64, 0.0f64),
                |sim, acc| {
                    let s = sim.step();
                    acc.0 += 1;
                    acc.1 += s.jumps as f64;
                    acc.2 = s.log_weight;
                    acc.0 < steps
                },
            )?;
            Ok(rows
                .into_iter()
                .map(|(_, count, lw)| WeightedCount { weight: lw.exp(), count })
                .collect())
        });
        match r {
            Ok(v) => Ok(v),
            Err(e) => Err(e.clone()),
        }
    }

    fn martingale(&self) -> Result<(bool, String)> {
        let rows = self.reference_ensemble()?;
        let w = mean_se(&rows.iter().map(|r| r.weight).collect::<Vec<_>>());
        let z = w.z_value(1.0);
        Ok((
            z <= 3.0,
            format!(
                "E_Q[p(T)] = {:.5} ± {:.5} over {} paths, |z| = {:.2}; {}",
                w.mean,
                w.se,
                w.n,
                z,
                weight_diagnostics(rows.iter().map(|r| r.weight))
            ),
        ))
    }

    fn girsanov(&self) -> Result<(bool, String)> {
        let rows = self.reference_ensemble()?;
        let q = mean_se(&rows.iter().map(|r| r.weight * r.count).collect::<Vec<_>>());
        let p = derive_params(&drift_model())?;
        let steps = (DRIFT_HORIZON / DRIFT_DT).round() as usize;
        let counts = ensemble(
            &p,
            DRIFT_DT,
            Mode::Physical,
            sub_seed(self.opts.seed, "physical"),
            PHYSICAL_PATHS,
            self.opts.threads,
            || (0usize, 0.0f64),
            |sim, acc| {
                let s = sim.step();
                acc.0 += 1;
                acc.1 += s.jumps as f64;
                acc.0 < steps
            },
        )?;
        let phys = mean_se(&counts.iter().map(|r| r.1).collect::<Vec<_>>());
        let z = q.z_against(&phys);
        Ok((
            z <= 3.0,
            format!(
                "E_Q[pN] = {:.5} ± {:.5}, E_P[N] = {:.5} ± {:.5}, |z| = {:.2}; {}",
                q.mean,
                q.se,
                phys.mean,
                phys.se,
                z,
                weight_diagnostics(rows.iter().map(|r| r.weight * r.count))
            ),
        ))
    }

    /// Physical-law count rate over `[burn, burn + window]`.
    fn count_rate(&self, params: &OscillatorParams, tag: &str, paths: u64, burn: f64, window: f64, dt: f64) -> Result<MeanEstimate> {
        let p = derive_params(params)?;
        let first = (burn / dt).round() as usize;
        let last = ((burn + window) / dt).round() as usize;
        let rows = ensemble(
            &p,
            dt,
            Mode::Physical,
            sub_seed(self.opts.seed, tag),
            paths,
            self.opts.threads,
            || (0usize, 0.0f64),
            |sim, acc| {
                let s = sim.step();
                if acc.0 >= first {
                    acc.1 += s.jumps as f64;
                }
                acc.0 += 1;
                acc.0 < last
            },
        )?;
        let mut m = mean_se(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
        m.mean /= window;
        m.se /= window;
        Ok(m)
    }

    fn direct_rate(&self) -> Result<(bool, String)> {
        let params = drift_model();
        let cfg = AnalyticConfig::new(&params)?;
        let closed = lambda_channel_closed(&cfg, 0).ok_or_else(|| Error::InvalidConfiguration("no closed form".into()))?;
        let quad = lambda_channel_quadrature(&cfg, 0)?;
        let dual = ((closed - quad) / closed).abs();
        let lam = lambda_total(&cfg)?.total;
        let want = params.count_rate * params.beta.norm_sqr() * lam;
        // OU variance settles as e^{−γ₅t}; 40 time units leave e^{−12}.
        let rate = self.count_rate(&params, "rate", 20_000, 40.0, 20.0, DRIFT_DT)?;
        let z = rate.z_value(want);
        Ok((
            z <= 3.0 && dual <= 1e-8,
            format!(
                "rate {:.5} ± {:.5} vs λ|β|²Λ = {:.5} (|z| = {:.2}); channel Λ closed/quadrature rel. diff {:.1e}",
                rate.mean, rate.se, want, z, dual
            ),
        ))
    }

    fn squeezed_reservoir(&self) -> Result<(bool, String)> {
        let base = OscillatorParams {
            mode_frequency: 1.0,
            alpha1: c(0.5, 0.0),
            alpha2: c(0.5, 0.0),
            beta: c(1.0, 0.0),
            count_rate: 0.5,
            ..Default::default()
        };
        let mut unsqueezed = base.clone();
        unsqueezed.channels = vec![ColoredChannelSpec::white(c(0.3, 0.0)), ColoredChannelSpec::white(c(0.0, 0.3))];
        let mut squeezed = base;
        squeezed.channels = vec![ColoredChannelSpec::white(c(0.3, 0.0)), ColoredChannelSpec::white(c(0.3, 0.0))];
        let mut ok = true;
        let mut parts = Vec::new();
        let mut rates = Vec::new();
        for (tag, params) in [("m=0", &unsqueezed), ("m!=0", &squeezed)] {
            let cfg = AnalyticConfig::new(params)?;
            let (n, m) = cfg.model.white.ok_or_else(|| Error::InvalidConfiguration("not white".into()))?;
            let lam = lambda_total(&cfg)?.total;
            let exact = (lam - n).abs() <= 1e-14 * n;
            let want = params.count_rate * params.beta.norm_sqr() * n;
            let rate = self.count_rate(params, tag, 20_000, 15.0, 20.0, DRIFT_DT)?;
            let z = rate.z_value(want);
            ok &= exact && z <= 3.0;
            parts.push(format!(
                "{tag}: |m| = {:.3}, Λ − n = {:.1e}, rate {:.5} ± {:.5} vs {:.5} (|z| = {:.2})",
                m.norm(),
                lam - n,
                rate.mean,
                rate.se,
                want,
                z
            ));
            rates.push(rate);
        }
        let z = rates[0].z_against(&rates[1]);
        ok &= z <= 3.0;
        parts.push(format!("rate shift with m: |z| = {z:.2}"));
        Ok((ok, parts.join("; ")))
    }

    fn mandel(&self) -> Result<(bool, String)> {
        let params = OscillatorParams {
            mode_frequency: 1.0,
            alpha1: c(0.5, 0.0),
            alpha2: c(0.5, 0.0),
            beta: c(1.0, 0.0),
            count_rate: 0.5,
            channels: vec![
                ColoredChannelSpec::exponential(c(0.0, 0.0), c(0.5, 0.0), 1.0, 1.0),
                ColoredChannelSpec::white(c(0.3, 0.2)),
            ],
            ..Default::default()
        };
        let cfg = AnalyticConfig::new(&params)?;
        let q0 = mandel_q(&cfg, 0.0)?;
        let p = derive_params(&params)?;
        let dt = DRIFT_DT;
        let burn = 20.0;
        let windows = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
        let first = (burn / dt).round() as usize;
        let ends: Vec<usize> = windows.iter().map(|w| ((burn + w) / dt).round() as usize).collect();
        let last = *ends.last().expect("windows");
        let rows = ensemble(
            &p,
            dt,
            Mode::Physical,
            sub_seed(self.opts.seed, "mandel"),
            20_000,
            self.opts.threads,
            || (0usize, vec![0.0f64; windows.len()]),
            |sim, acc| {
                let s = sim.step();
                acc.0 += 1;
                if acc.0 > first {
                    for (k, &e) in ends.iter().enumerate() {
                        if acc.0 <= e {
                            acc.1[k] += s.jumps as f64;
                        }
                    }
                }
                acc.0 < last
            },
        )?;
        let mut ok = q0 == 0.0;
        let mut parts = vec![format!("oracle Q(0) = {q0}")];
        for (k, &w) in windows.iter().enumerate() {
            let samples: Vec<CountSample> = rows.iter().map(|r| CountSample::physical(r.1[k])).collect();
            let st = estimate_counting(&samples, burn, w)?;
            ok &= st.q >= -3.0 * st.q_se;
            if [1.0, 5.0, 20.0].contains(&w) {
                let want = mandel_q(&cfg, w)?;
                let z = (st.q - want).abs() / st.q_se;
                ok &= z <= 3.0;
                parts.push(format!("t={w}: Q̂ = {:.4} ± {:.4} vs {:.4} (|z| = {:.2})", st.q, st.q_se, want, z));
            }
        }
        Ok((ok, parts.join("; ")))
    }

    fn heterodyne(&self) -> Result<(bool, String)> {
        let params = heterodyne_model();
        let filter = ResponseFilter::exponential(20.0);
        let cfg = AnalyticConfig::new(&params)?.with_filter(filter.clone())?;
        let p = derive_params(&params)?;
        let dt: f64 = 0.01;
        let seg = 25_100usize;
        let per_record = 9usize;
        let burn = 30.0;
        let burn_steps = (burn / dt).round() as usize;
        let keep = seg + (per_record - 1) * seg / 2;
        let records = 60u64;
        let recs = current_records(&p, dt, burn_steps, keep, &filter, sub_seed(self.opts.seed, "heterodyne"), records, self.opts.threads)?;
        let sc = SpectrumConfig {
            segment_length: seg,
            overlap: 0.5,
            window: Window::Hann,
        };
        let est = estimate_spectrum_real(&recs, dt, &sc)?;
        let nu0 = params.mode_frequency;
        let g0 = p.gamma0;
        let idx: Vec<usize> = (0..est.freqs.len())
            .filter(|&i| (est.freqs[i] - nu0).abs() <= 5.0 * g0)
            .collect();
        let mus: Vec<f64> = idx.iter().map(|&i| est.freqs[i]).collect();
        let table = heterodyne_spectrum(&cfg, &mus, false)?;
        let rel: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| (est.power[i] - table.s_i[k]) / table.s_i[k])
            .collect();
        let rms = (rel.iter().map(|r| r * r).sum::<f64>() / rel.len() as f64).sqrt();
        // Shot-noise floor on every bin, as stated: each bin is its own 3 SE
        // test, so chance violations grow with the bin count.
        let mut floor_bad = 0usize;
        let mut worst = f64::INFINITY;
        for (i, (&mu, &pw)) in est.freqs.iter().zip(&est.power).enumerate() {
            let g2 = crate::detection::transfer_function(&filter, mu).norm_sqr();
            let z = (pw - g2) / est.se[i];
            worst = worst.min(z);
            if z < -3.0 {
                floor_bad += 1;
            }
        }
        Ok((
            rms <= 0.10 && floor_bad == 0 && est.segments >= 500,
            format!(
                "{} segments, RMS rel. error {:.4} over {} bins in [ν0 − 5γ0, ν0 + 5γ0]; \
                 {} of {} bins below shot floor by more than 3 SE (lowest z = {:.2}; \
                 {:.1} expected by chance at the one-sided 3 SE rate)",
                est.segments,
                rms,
                idx.len(),
                floor_bad,
                est.freqs.len(),
                worst,
                est.freqs.len() as f64 * 0.00135
            ),
        ))
    }

    fn sum_rules(&self) -> Result<(bool, String)> {
        let params = drift_model();
        let cfg = AnalyticConfig::new(&params)?;
        let kappa = match params.local_oscillator {
            LocalOscillatorSpec::Heterodyne { linewidth, .. } => linewidth,
            LocalOscillatorSpec::Homodyne { .. } => params.laser.bandwidth,
        };
        let lam = lambda_total(&cfg)?;
        let a1 = params.alpha1.norm_sqr();
        let outer = QuadConfig::with_tolerance(1e-12, 1e-9);
        let peaks = [params.mode_frequency, params.laser.frequency, 1.0];
        let s1 = integrate_real_line(|x| laser_line(&cfg, x, kappa), &peaks, 1.0, outer)? / (4.0 * PI);
        let s2 = integrate_real_line(|x| environment_line(&cfg, x, kappa).unwrap_or(f64::NAN), &peaks, 1.0, outer)? / (4.0 * PI);
        let w1 = a1 * lam.laser / 2.0;
        let w2 = a1 * lam.channels.iter().sum::<f64>() / 2.0;
        let e1 = ((s1 - w1) / w1).abs();
        let e2 = ((s2 - w2) / w2).abs();
        Ok((
            e1 <= 1e-6 && e2 <= 1e-6,
            format!("laser line rel. error {e1:.1e}, environment line rel. error {e2:.1e}"),
        ))
    }

    fn homodyne(&self) -> Result<(bool, String)> {
        // Delay far beyond the coherence time against the heterodyne oracle.
        let mut hom = heterodyne_model();
        hom.local_oscillator = LocalOscillatorSpec::Homodyne { phase: 0.4, delay: 50.0 };
        let mut het = hom.clone();
        het.local_oscillator = LocalOscillatorSpec::Heterodyne {
            frequency: hom.laser.frequency,
            linewidth: hom.laser.bandwidth,
            phase: 0.0,
        };
        let mus: Vec<f64> = (-200..=200).map(|k| k as f64 * 0.05).collect();
        let a = homodyne_spectrum(&AnalyticConfig::new(&hom)?, &mus, HomodyneRegime::DelayInfinite)?;
        let b = heterodyne_spectrum(&AnalyticConfig::new(&het)?, &mus, false)?;
        let worst = a
            .s_i
            .iter()
            .zip(&b.s_i)
            .map(|(x, y)| ((x - y) / y).abs())
            .fold(0.0, f64::max);
        let mut ok = worst <= 1e-12;
        let mut parts = vec![format!("delay-infinite vs heterodyne max rel. diff {worst:.1e}")];

        let filter = ResponseFilter::exponential(20.0);
        let dt = 0.01;
        let seg = 10_000usize;
        let burn_steps = 2_000usize;
        let keep = 200_000usize;
        for (tag, theta, zero_spike) in [("zeta=pi/2", PI / 2.0, true), ("zeta=-pi/2", -PI / 2.0, true), ("zeta=0", 0.0, false)] {
            let params = homodyne_model(theta);
            let cfg = AnalyticConfig::new(&params)?.with_filter(filter.clone())?;
            let zeta = homodyne_phase(&cfg)?;
            let p = derive_params(&params)?;
            let recs = current_records(&p, dt, burn_steps, keep, &filter, sub_seed(self.opts.seed, tag), 60, self.opts.threads)?;
            let est = estimate_spectrum_real(
                &recs,
                dt,
                &SpectrumConfig {
                    segment_length: seg,
                    overlap: 0.5,
                    window: Window::Hann,
                },
            )?;
            if zero_spike {
                let z = est.spike_weight.abs() / est.spike_se;
                ok &= z <= 3.0;
                parts.push(format!(
                    "{tag} (ζ = {zeta:.3}): spike {:.4} ± {:.4}, |z| = {z:.2}",
                    est.spike_weight, est.spike_se
                ));
            } else {
                let want = PI / 2.0 * p.gamma0 * homodyne_l(&cfg, 0.0);
                let oracle = homodyne_spectrum(&cfg, &[0.0], HomodyneRegime::Balanced)?.spike_weight;
                let rel = (est.spike_weight - want).abs() / want;
                ok &= rel <= 0.10 && ((oracle - want) / want).abs() <= 1e-12;
                parts.push(format!(
                    "{tag} (ζ = {zeta:.3}): spike {:.4} ± {:.4} vs (π/2)γ0 l(0) = {:.4}, rel. error {rel:.3}",
                    est.spike_weight, est.spike_se, want
                ));
            }
        }
        Ok((ok, parts.join("; ")))
    }

    fn crossval(&self) -> Result<(bool, String)> {
        let p = derive_params(&crossval_model())?;
        let seed = sub_seed(self.opts.seed, "crossval");
        let (dt, horizon, dim, paths) = (2.5e-4, 4.0, 32usize, 96u64);
        let rows = run_ordered(paths, self.opts.threads, |id| -> Result<(f64, f64, f64, f64)> {
            let coarse = cross_validate_fock_substeps(&p, horizon, dt, TrajectorySeed::new(seed, id), dim, 2)?;
            let fine = cross_validate_fock_substeps(&p, horizon, dt / 2.0, TrajectorySeed::new(seed, id), dim, 1)?;
            Ok((coarse.mean_deficit, fine.mean_deficit, coarse.min_fidelity, fine.min_fidelity))
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let min_f = rows.iter().map(|r| r.2.min(r.3)).fold(1.0, f64::min);
        let a = mean_se(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
        let b = mean_se(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
        let ratio = a.mean / b.mean;
        // Paired delta-method error of the ratio.
        let n = rows.len() as f64;
        let resid: Vec<f64> = rows.iter().map(|r| (r.0 - ratio * r.1) / b.mean).collect();
        let ratio_se = (resid.iter().map(|x| x * x).sum::<f64>() / (n - 1.0) / n).sqrt();
        Ok((
            min_f >= 0.999 && (1.6..=2.4).contains(&ratio),
            format!(
                "min fidelity {min_f:.6}; mean deficit {:.3e} (dt) / {:.3e} (dt/2), ratio {ratio:.3} ± {ratio_se:.3}",
                a.mean, b.mean
            ),
        ))
    }

    fn noise_fidelity(&self) -> Result<(bool, String)> {
        let channels = vec![
            ColoredChannelSpec::exponential(c(0.1, 0.0), c(0.3, 0.1), 1.0, 1.0),
            ColoredChannelSpec::exponential(c(0.0, 0.0), c(0.2, 0.0), 2.0, -2.0),
            ColoredChannelSpec::white(c(0.2, -0.1)),
        ];
        let dt = 0.01;
        let burn = 3_000usize;
        let len = 1usize << 17;
        let seed = sub_seed(self.opts.seed, "noise");
        let recs = run_ordered(64, self.opts.threads, |id| -> Result<Vec<C64>> {
            let mut bank = NoiseBank::new(&channels, dt, None)?;
            let mut main: Vec<_> = (0..channels.len()).map(|j| stream(seed, id, &format!("B{j}"))).collect();
            let mut aux: Vec<_> = (0..channels.len()).map(|j| stream(seed, id, &format!("aux{j}"))).collect();
            let mut out = Vec::with_capacity(len);
            let mut db = vec![0.0; channels.len()];
            for step in 0..burn + len {
                for (d, r) in db.iter_mut().zip(main.iter_mut()) {
                    *d = r.sample::<f64, _>(StandardNormal) * dt.sqrt();
                }
                let inc = bank.step(&db, &mut aux);
                if step >= burn {
                    out.push(inc.dy / dt);
                }
            }
            Ok(out)
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let est = estimate_spectrum(
            &recs,
            dt,
            &SpectrumConfig {
                segment_length: 8192,
                overlap: 0.5,
                window: Window::Hann,
            },
        )?;
        let mut sq = 0.0;
        let mut n = 0usize;
        for (i, &mu) in est.freqs.iter().enumerate() {
            if mu.abs() <= 6.0 {
                let want = classical_spectrum(ClassicalSpectrum::Colored(&channels), mu);
                sq += ((est.power[i] - want) / want).powi(2);
                n += 1;
            }
        }
        let rms = (sq / n as f64).sqrt();

        // Laser autocorrelation on sampled paths against the moment oracle.
        let laser = LaserSpec {
            amplitude: c(0.7, 0.2),
            frequency: 1.3,
            bandwidth: 0.5,
        };
        // Laser moments do not involve the mode; any damped mode will do.
        let oracle_cfg = AnalyticConfig::new(&OscillatorParams {
            alpha2: c(1.0, 0.0),
            laser,
            ..Default::default()
        })?;
        let pairs = [(1.0, 0.5), (2.0, 0.0), (5.0, 3.0), (0.5, 4.0)];
        let lsteps = 500usize;
        let lseed = sub_seed(self.opts.seed, "laser");
        let samples = run_ordered(20_000, self.opts.threads, |id| {
            let mut st = LaserState::new(laser);
            let mut rng = stream(lseed, id, "B3");
            let mut path = Vec::with_capacity(lsteps + 1);
            path.push(st.value());
            for _ in 0..lsteps {
                let db = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
                path.push(st.step(dt, db));
            }
            pairs
                .iter()
                .map(|&(r, s)| {
                    let v = path[(r / dt).round() as usize] * path[(s / dt).round() as usize].conj();
                    [v.re, v.im]
                })
                .collect::<Vec<_>>()
        })?;
        let mut worst: f64 = 0.0;
        for (k, &(r, s)) in pairs.iter().enumerate() {
            let want = autocorrelation(&oracle_cfg, Moment::LaserAutocorrelation { r, s })?;
            for part in 0..2 {
                let est = mean_se(&samples.iter().map(|row| row[k][part]).collect::<Vec<_>>());
                let w = if part == 0 { want.re } else { want.im };
                worst = worst.max(est.z_value(w));
            }
        }
        Ok((
            rms <= 0.05 && worst <= 3.0,
            format!(
                "S_Y RMS rel. error {rms:.4} over {n} bins ({} segments); laser autocorrelation worst |z| = {worst:.2}",
                est.segments
            ),
        ))
    }
}

/// Filtered physical-law output-1 currents after a burn-in.
#[allow(clippy::too_many_arguments)]
fn current_records(
    p: &DerivedParams,
    dt: f64,
    burn_steps: usize,
    keep: usize,
    filter: &ResponseFilter,
    seed: u64,
    records: u64,
    threads: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let rows = run_ordered(records, threads, |id| -> Result<Vec<f64>> {
        let mut sim = OscillatorSimulator::new(p, dt, Mode::Physical, TrajectorySeed::new(seed, id))?;
        let out: Vec<f64> = (0..burn_steps + keep).map(|_| sim.step().out1).collect();
        let cur = filter_increments(filter, &out, dt)?;
        Ok(cur[burn_steps..].to_vec())
    })?;
    rows.into_iter().collect()
}

/// Runs the listed criteria in order.
pub fn run_criteria(ids: &[u32], opts: AcceptanceOptions) -> Vec<CriterionOutcome> {
    let suite = AcceptanceSuite::new(opts);
    ids.iter().map(|&id| suite.run(id)).collect()
}
