//! One function per subcommand. Each returns the tables it produced so the
//! caller can write them, plot them and list them in the manifest.

use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table};
use qtraj::acceptance::{run_criteria, AcceptanceOptions, CriterionOutcome};
use qtraj::config::{ExperimentConfig, SimulationLaw, TimeUnit};
use qtraj::detection::{estimate_counting, estimate_spectrum_real, filter_increments, CountSample};
use qtraj::ensemble::run_ordered;
use qtraj::noise::{Kernel, LocalOscillatorSpec};
use qtraj::oracle::{
    counting_functional, heterodyne_spectrum, homodyne_phase, homodyne_spectrum, lambda_total, mandel_q,
    mean_current, AnalyticConfig, SpectralTable,
};
use qtraj::oscillator::{derive_params, DerivedParams, Mode, OscillatorSimulator};
use qtraj::quad::QuadConfig;
use qtraj::rng::TrajectorySeed;

/// Trajectories simulated per ordered batch; bounds memory for large ensembles.
const BATCH: u64 = 256;

/// A named output table plus an optional plot request.
pub struct Output {
    pub file: &'static str,
    pub table: Table,
    pub plot: Option<PlotSpec>,
}

pub struct PlotSpec {
    pub file: &'static str,
    pub title: &'static str,
    pub x: String,
    pub ys: Vec<String>,
}

/// Everything a command produced.
#[derive(Default)]
pub struct CommandResult {
    pub outputs: Vec<Output>,
    pub criteria: Vec<CriterionOutcome>,
}

impl CommandResult {
    fn with(outputs: Vec<Output>) -> Self {
        Self {
            outputs,
            criteria: Vec::new(),
        }
    }
}

struct Clock {
    scale: f64,
    header: &'static str,
}

impl Clock {
    fn new(unit: TimeUnit, gamma0: f64) -> Self {
        match unit {
            TimeUnit::Raw => Self {
                scale: 1.0,
                header: "time[T]",
            },
            TimeUnit::ModeLifetime => Self {
                scale: gamma0,
                header: "time[1/gamma0]",
            },
        }
    }

    fn named(&self, what: &str) -> String {
        format!("{what}{}", &self.header[4..])
    }
}

fn steps_for(span: f64, dt: f64) -> usize {
    (span / dt - 1e-9).ceil().max(0.0) as usize
}

/// Runs `count` tasks in fixed batches, handing results to `consume` in
/// trajectory order whatever the thread count.
fn for_each_ordered<T, F, C>(count: u64, threads: Option<usize>, task: F, mut consume: C) -> CliResult<()>
where
    T: Send,
    F: Fn(u64) -> qtraj::Result<T> + Sync,
    C: FnMut(u64, T) -> CliResult<()>,
{
    let mut start = 0;
    while start < count {
        let n = BATCH.min(count - start);
        let rows = run_ordered(n, threads, |k| task(start + k))?;
        for (k, row) in rows.into_iter().enumerate() {
            consume(start + k as u64, row?)?;
        }
        start += n;
    }
    Ok(())
}

fn oracle_config(cfg: &ExperimentConfig) -> CliResult<AnalyticConfig> {
    Ok(AnalyticConfig::new(&cfg.model)?
        .with_filter(cfg.detection.filter.clone())?
        .with_quad(QuadConfig::with_tolerance(1e-11, 1e-9)))
}

pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<CommandResult> {
    use qtraj::config::Command;
    match cfg.command {
        Command::Simulate => simulate(cfg, threads),
        Command::Counting => counting(cfg, threads),
        Command::Spectrum => spectrum(cfg, threads),
        Command::Oracle => oracle(cfg),
        Command::Validate => validate(cfg, threads),
    }
}

struct PathSummary {
    /// Per recorded time: weighted intensity and weight.
    weighted: Vec<(f64, f64)>,
    detail: Option<Vec<Vec<Cell>>>,
}

fn simulate(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<CommandResult> {
    let p = derive_params(&cfg.model)?;
    let run = &cfg.run;
    let dt = run.dt;
    let steps = steps_for(run.horizon, dt);
    let stride = run.record_stride;
    let mode = Mode::from(run.law);
    let clock = Clock::new(run.time_unit, p.gamma0);
    let points = steps / stride + 1;

    let task = |id: u64| -> qtraj::Result<PathSummary> {
        let mut sim = OscillatorSimulator::new(&p, dt, mode, TrajectorySeed::new(run.seed, id))?;
        let keep = id < run.keep_trajectories;
        let mut weighted = Vec::with_capacity(points);
        let mut detail = keep.then(Vec::new);
        let mut charge = 0.0;
        let mut record = |sim: &OscillatorSimulator, t: f64, charge: f64, weighted: &mut Vec<(f64, f64)>| {
            let w = if mode == Mode::Reference { sim.log_weight().exp() } else { 1.0 };
            weighted.push((w * sim.intensity(), w));
            if let Some(rows) = detail.as_mut() {
                let xi = sim.xi();
                rows.push(vec![
                    Cell::from(id),
                    Cell::from(t * clock.scale),
                    Cell::from(xi.re),
                    Cell::from(xi.im),
                    Cell::from(sim.intensity()),
                    Cell::from(sim.m1()),
                    Cell::from(charge),
                    Cell::from(sim.total_jumps()),
                    Cell::from(sim.log_weight()),
                ]);
            }
        };
        record(&sim, 0.0, 0.0, &mut weighted);
        for n in 1..=steps {
            let snap = sim.step();
            charge += snap.out1;
            if n % stride == 0 {
                record(&sim, n as f64 * dt, charge, &mut weighted);
            }
        }
        Ok(PathSummary { weighted, detail })
    };

    let mut sums = vec![[0.0f64; 4]; points];
    let mut traj = Table::new([
        "trajectory".to_string(),
        clock.header.to_string(),
        "xi_re".into(),
        "xi_im".into(),
        "intensity[1/T]".into(),
        "m1[1/sqrt(T)]".into(),
        "output1_integral[sqrt(T)]".into(),
        "jumps".into(),
        "log_weight".into(),
    ]);
    for_each_ordered(run.trajectories, threads, task, |_, s| {
        for (acc, &(x, w)) in sums.iter_mut().zip(&s.weighted) {
            acc[0] += x;
            acc[1] += x * x;
            acc[2] += w;
            acc[3] += w * w;
        }
        for row in s.detail.into_iter().flatten() {
            traj.push(row);
        }
        Ok(())
    })?;

    let n = run.trajectories as f64;
    let se = |s1: f64, s2: f64| {
        if n < 2.0 {
            f64::NAN
        } else {
            ((s2 - s1 * s1 / n).max(0.0) / (n - 1.0) / n).sqrt()
        }
    };
    let mut ens = Table::new([
        clock.header.to_string(),
        "mean_intensity[1/T]".into(),
        "intensity_se[1/T]".into(),
        "mean_weight".into(),
        "weight_se".into(),
    ]);
    for (k, acc) in sums.iter().enumerate() {
        let t = (k * stride) as f64 * dt * clock.scale;
        ens.push(vec![
            t.into(),
            (acc[0] / n).into(),
            se(acc[0], acc[1]).into(),
            (acc[2] / n).into(),
            se(acc[2], acc[3]).into(),
        ]);
    }
    Ok(CommandResult::with(vec![
        Output {
            file: "ensemble.csv",
            plot: Some(PlotSpec {
                file: "ensemble.svg",
                title: "ensemble mean intensity",
                x: clock.header.to_string(),
                ys: vec!["mean_intensity[1/T]".into()],
            }),
            table: ens,
        },
        Output {
            file: "trajectories.csv",
            table: traj,
            plot: None,
        },
    ]))
}

fn counting(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<CommandResult> {
    let p = derive_params(&cfg.model)?;
    let run = &cfg.run;
    let dt = run.dt;
    let windows = &cfg.detection.count_windows;
    let t0 = run.burn_in;
    let longest = windows.iter().copied().fold(0.0, f64::max);
    if t0 + longest > run.horizon + 1e-9 {
        return Err(CliError::Usage(format!(
            "run.burn_in + longest count window ({}) exceeds run.horizon ({})",
            t0 + longest,
            run.horizon
        )));
    }
    if run.trajectories < 3 {
        return Err(CliError::Usage("counting needs run.trajectories >= 3".into()));
    }
    let mode = Mode::from(run.law);
    let ends: Vec<usize> = windows.iter().map(|w| ((t0 + w) / dt).round() as usize).collect();
    let steps = ends.iter().copied().max().unwrap_or(0);
    let start = (t0 / dt).round() as usize;

    let task = |id: u64| -> qtraj::Result<Vec<CountSample>> {
        let mut sim = OscillatorSimulator::new(&p, dt, mode, TrajectorySeed::new(run.seed, id))?;
        let mut out: Vec<CountSample> = vec![CountSample { count: 0.0, weight: 1.0 }; windows.len()];
        let mut counted = 0.0;
        for n in 1..=steps {
            let snap = sim.step();
            if n > start {
                counted += f64::from(snap.jumps);
            }
            for (slot, &end) in out.iter_mut().zip(&ends) {
                if n == end {
                    slot.count = counted;
                    slot.weight = if mode == Mode::Reference { sim.log_weight().exp() } else { 1.0 };
                }
            }
        }
        Ok(out)
    };
    let mut per_window: Vec<Vec<CountSample>> = vec![Vec::with_capacity(run.trajectories as usize); windows.len()];
    for_each_ordered(run.trajectories, threads, task, |_, row| {
        for (dst, s) in per_window.iter_mut().zip(row) {
            dst.push(s);
        }
        Ok(())
    })?;

    let oracle = oracle_config(cfg)?;
    let laser_off = !cfg.model.laser.is_on();
    let clock = Clock::new(run.time_unit, p.gamma0);
    let mut table = Table::new([
        clock.named("window"),
        "samples".into(),
        "mean_count".into(),
        "mean_count_se".into(),
        "variance".into(),
        "mandel_q".into(),
        "mandel_q_se".into(),
        "mandel_q_stationary_oracle".into(),
    ]);
    for (w, samples) in windows.iter().zip(&per_window) {
        let q_oracle = if laser_off {
            mandel_q(&oracle, *w).ok()
        } else {
            None
        };
        match estimate_counting(samples, t0, *w) {
            Ok(s) => table.push(vec![
                (w * clock.scale).into(),
                s.samples.into(),
                s.mean.into(),
                s.mean_se.into(),
                s.variance.into(),
                s.q.into(),
                s.q_se.into(),
                q_oracle.into(),
            ]),
            Err(qtraj::Error::QUndefined) => table.push(vec![
                (w * clock.scale).into(),
                samples.len().into(),
                0.0.into(),
                0.0.into(),
                0.0.into(),
                Cell::Empty,
                Cell::Empty,
                q_oracle.into(),
            ]),
            Err(e) => return Err(e.into()),
        }
    }

    let k = cfg.detection.functional_k;
    let f = counting_functional(&oracle, |_| k, run.horizon, dt, run.trajectories, run.seed, threads)?;
    let mut func = Table::new([
        clock.named("horizon"),
        "k[rad]".into(),
        "phi_re".into(),
        "phi_re_se".into(),
        "phi_im".into(),
        "phi_im_se".into(),
        "p_zero".into(),
        "p_zero_se".into(),
        "mean_count".into(),
        "mean_count_se".into(),
        "second_moment".into(),
        "second_moment_se".into(),
    ]);
    func.push(vec![
        (run.horizon * clock.scale).into(),
        k.into(),
        f.phi_re.into(),
        f.phi_re_se.into(),
        f.phi_im.into(),
        f.phi_im_se.into(),
        f.p_zero.into(),
        f.p_zero_se.into(),
        f.mean.into(),
        f.mean_se.into(),
        f.second_moment.into(),
        f.second_moment_se.into(),
    ]);
    let x = clock.named("window");
    Ok(CommandResult::with(vec![
        Output {
            file: "counting.csv",
            plot: Some(PlotSpec {
                file: "counting.svg",
                title: "Mandel Q against window length",
                x,
                ys: vec!["mandel_q".into(), "mandel_q_stationary_oracle".into()],
            }),
            table,
        },
        Output {
            file: "functional.csv",
            table: func,
            plot: None,
        },
    ]))
}

fn oracle_spectrum(cfg: &ExperimentConfig, oracle: &AnalyticConfig, mus: &[f64]) -> CliResult<SpectralTable> {
    Ok(match cfg.model.local_oscillator {
        LocalOscillatorSpec::Heterodyne { .. } => heterodyne_spectrum(oracle, mus, cfg.detection.perfect_lo)?,
        LocalOscillatorSpec::Homodyne { .. } => homodyne_spectrum(oracle, mus, cfg.detection.homodyne_regime)?,
    })
}

fn spectrum(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<CommandResult> {
    let run = &cfg.run;
    if run.law != SimulationLaw::Physical {
        return Err(CliError::Usage("spectrum estimation needs run.law = \"physical\"".into()));
    }
    let p: DerivedParams = derive_params(&cfg.model)?;
    let dt = run.dt;
    let burn = (run.burn_in / dt).round() as usize;
    let total = steps_for(run.horizon, dt);
    let keep = total.saturating_sub(burn);
    if keep < cfg.detection.spectrum.segment_length {
        return Err(CliError::Usage(format!(
            "record after burn-in has {keep} samples, fewer than detection.spectrum.segment_length = {}",
            cfg.detection.spectrum.segment_length
        )));
    }
    let filter = &cfg.detection.filter;
    let records = run_ordered(run.trajectories, threads, |id| -> qtraj::Result<Vec<f64>> {
        let mut sim = OscillatorSimulator::new(&p, dt, Mode::Physical, TrajectorySeed::new(run.seed, id))?;
        let out: Vec<f64> = (0..total).map(|_| sim.step().out1).collect();
        let cur = filter_increments(filter, &out, dt)?;
        Ok(cur[burn..].to_vec())
    })?
    .into_iter()
    .collect::<qtraj::Result<Vec<_>>>()?;
    let est = estimate_spectrum_real(&records, dt, &cfg.detection.spectrum)?;
    let d = &cfg.detection;
    let idx: Vec<usize> = (0..est.freqs.len())
        .filter(|&i| est.freqs[i] >= d.mu_min && est.freqs[i] <= d.mu_max)
        .collect();
    let mus: Vec<f64> = idx.iter().map(|&i| est.freqs[i]).collect();
    let oracle = oracle_config(cfg)?;
    let o = oracle_spectrum(cfg, &oracle, &mus)?;
    let mut table = Table::new([
        "mu[rad/T]",
        "s_estimate",
        "s_estimate_se",
        "s_oracle",
        "gain2",
    ]);
    for (k, &i) in idx.iter().enumerate() {
        table.push(vec![
            est.freqs[i].into(),
            est.power[i].into(),
            est.se[i].into(),
            o.s_i[k].into(),
            o.gain[k].into(),
        ]);
    }
    let mut spike = Table::new([
        "spike_weight_estimate",
        "spike_weight_se",
        "spike_weight_oracle",
        "segments",
        "segment_length",
        "bin_width[rad/T]",
    ]);
    spike.push(vec![
        est.spike_weight.into(),
        est.spike_se.into(),
        o.spike_weight.into(),
        est.segments.into(),
        est.segment_length.into(),
        est.bin_width().into(),
    ]);
    Ok(CommandResult::with(vec![
        Output {
            file: "spectrum.csv",
            plot: Some(PlotSpec {
                file: "spectrum.svg",
                title: "current spectrum",
                x: "mu[rad/T]".into(),
                ys: vec!["s_estimate".into(), "s_oracle".into()],
            }),
            table,
        },
        Output {
            file: "spectrum_spike.csv",
            table: spike,
            plot: None,
        },
    ]))
}

fn oracle(cfg: &ExperimentConfig) -> CliResult<CommandResult> {
    let oracle = oracle_config(cfg)?;
    let p = &oracle.model;
    let clock = Clock::new(cfg.run.time_unit, p.gamma0);
    let rate_scale = p.params.count_rate * p.params.beta.norm_sqr();
    let lam = lambda_total(&oracle)?;
    let mut sources = Table::new(["source", "lambda", "count_rate[1/T]", "white_photon_number"]);
    sources.push(vec![
        "laser".into(),
        lam.laser.into(),
        (rate_scale * lam.laser).into(),
        Cell::Empty,
    ]);
    for (j, (v, ch)) in lam.channels.iter().zip(&p.params.channels).enumerate() {
        let n = matches!(ch.kernel, Kernel::None).then(|| ch.b.norm_sqr() / p.gamma0);
        sources.push(vec![format!("channel_{j}").into(), (*v).into(), (rate_scale * v).into(), n.into()]);
    }
    sources.push(vec![
        "total".into(),
        lam.total.into(),
        (rate_scale * lam.total).into(),
        p.white.map(|(n, _)| n).into(),
    ]);

    let mut outputs = vec![Output {
        file: "lambda.csv",
        table: sources,
        plot: None,
    }];

    if !p.params.laser.is_on() && rate_scale * lam.total > 0.0 {
        let mut mandel = Table::new([clock.named("window"), "mandel_q".into()]);
        let mut windows: Vec<f64> = (0..=40)
            .map(|k| 0.01 / p.gamma0 * 10f64.powf(k as f64 * 0.1))
            .collect();
        windows.extend(cfg.detection.count_windows.iter().copied());
        windows.sort_by(f64::total_cmp);
        windows.dedup();
        for w in windows {
            mandel.push(vec![(w * clock.scale).into(), mandel_q(&oracle, w)?.into()]);
        }
        outputs.push(Output {
            file: "mandel.csv",
            plot: Some(PlotSpec {
                file: "mandel.svg",
                title: "stationary Mandel Q",
                x: clock.named("window"),
                ys: vec!["mandel_q".into()],
            }),
            table: mandel,
        });
    }

    let d = &cfg.detection;
    let mus: Vec<f64> = if d.mu_points == 1 {
        vec![d.mu_min]
    } else {
        (0..d.mu_points)
            .map(|k| d.mu_min + (d.mu_max - d.mu_min) * k as f64 / (d.mu_points - 1) as f64)
            .collect()
    };
    let s = oracle_spectrum(cfg, &oracle, &mus)?;
    let mut spec = Table::new(["mu[rad/T]", "gain2", "laser", "environment", "s_m", "s_i"]);
    for k in 0..mus.len() {
        spec.push(vec![
            mus[k].into(),
            s.gain[k].into(),
            s.laser[k].into(),
            s.environment[k].into(),
            s.s_m[k].into(),
            s.s_i[k].into(),
        ]);
    }
    outputs.push(Output {
        file: "spectrum_oracle.csv",
        plot: Some(PlotSpec {
            file: "spectrum_oracle.svg",
            title: "oracle current spectrum",
            x: "mu[rad/T]".into(),
            ys: vec!["s_i".into()],
        }),
        table: spec,
    });

    let mut summary = Table::new(["quantity", "value"]);
    summary.push(vec!["gamma0[1/T]".into(), p.gamma0.into()]);
    summary.push(vec!["lambda_total".into(), lam.total.into()]);
    summary.push(vec!["count_rate[1/T]".into(), (rate_scale * lam.total).into()]);
    summary.push(vec!["spike_weight".into(), s.spike_weight.into()]);
    if let LocalOscillatorSpec::Homodyne { .. } = p.params.local_oscillator {
        summary.push(vec!["homodyne_zeta[rad]".into(), homodyne_phase(&oracle)?.into()]);
    }
    outputs.push(Output {
        file: "oracle_summary.csv",
        table: summary,
        plot: None,
    });

    if p.params.laser.is_on() {
        let mut cur = Table::new([clock.header.to_string(), "mean_current".into()]);
        for k in 0..=40 {
            let t = cfg.run.horizon * k as f64 / 40.0;
            cur.push(vec![(t * clock.scale).into(), mean_current(&oracle, t)?.into()]);
        }
        outputs.push(Output {
            file: "mean_current.csv",
            plot: Some(PlotSpec {
                file: "mean_current.svg",
                title: "mean filtered current",
                x: clock.header.to_string(),
                ys: vec!["mean_current".into()],
            }),
            table: cur,
        });
    }
    Ok(CommandResult::with(outputs))
}

fn validate(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<CommandResult> {
    let criteria = run_criteria(
        &cfg.validate.criteria,
        AcceptanceOptions {
            seed: cfg.run.seed,
            threads,
        },
    );
    let mut table = Table::new(["criterion", "name", "passed", "detail"]);
    for c in &criteria {
        table.push(vec![
            u64::from(c.id).into(),
            c.name.clone().into(),
            c.passed.into(),
            c.detail.clone().into(),
        ]);
    }
    Ok(CommandResult {
        outputs: vec![Output {
            file: "acceptance.csv",
            table,
            plot: None,
        }],
        criteria,
    })
}
