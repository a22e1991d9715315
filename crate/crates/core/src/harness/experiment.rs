//! Experiment orchestration.
//!
//! Each trial draws from `substream(seed, stream_id(trial, tag))` with tags
//! `channel`, `pilot/g<G>`, `design/<scheme>/g<G>` and `noise`, so sweep points
//! and schemes see common random numbers and dropping a scheme leaves the
//! others untouched. Trials land in indexed slots and are reduced in order.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CsiMode, ExperimentKind, ExperimentSpec, Metric, OutageEstimator, Series, SeriesKind, SweepParam};
use crate::beamform::{scheme_select, received_power, Design, Scheme};
use crate::channel::{dbm_to_watts, link_gain, sample_channels, ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::numkit::{self, stream_id, substream, C64};
use crate::outage::{
    outage_closed_form, outage_conditional_mc, outage_monte_carlo, outage_unit_phase, OutageEstimate, OutageQuery,
    PhaseMode,
};
use crate::pilots::{estimate_channels, run_pilot_phase, ChannelEstimate};
use crate::rate::{draw_noise, effective_rate_with_overhead, rate_from_channels, Constellation};

/// Monte Carlo block size for the single-antenna outage study.
const OUTAGE_BLOCK: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesColumn {
    /// Column suffix, e.g. `rpm_k3_20dbm`.
    pub key: String,
    pub label: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Analytical approximation, where one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub spec: ExperimentSpec,
    pub sweep: Vec<f64>,
    pub series: Vec<SeriesColumn>,
    pub code_version: String,
}

impl ResultTable {
    pub fn metric(&self) -> Metric {
        self.spec.name.metric()
    }

    pub fn column(&self, key: &str) -> Option<&SeriesColumn> {
        self.series.iter().find(|c| c.key == key)
    }
}

/// Per-trial values, indexed `[trial][sweep point][series]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialMatrix {
    pub values: Vec<Vec<Vec<f64>>>,
}

impl TrialMatrix {
    pub fn samples(&self, point: usize, series: usize) -> Vec<f64> {
        self.values.iter().map(|t| t[point][series]).collect()
    }

    /// Mean and standard error of the per-trial difference `a − b`.
    pub fn paired_difference(&self, point: usize, a: usize, b: usize) -> (f64, f64) {
        let d: Vec<f64> = self.values.iter().map(|t| t[point][a] - t[point][b]).collect();
        mean_stderr(&d)
    }
}

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ResultTable> {
    run_experiment_detailed(spec, opts).map(|(t, _)| t)
}

/// Like [`run_experiment`], also returning per-trial values (empty for the
/// single-antenna outage study, which has no channel trials).
pub fn run_experiment_detailed(spec: &ExperimentSpec, opts: &RunOptions) -> Result<(ResultTable, TrialMatrix)> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
    let (series, trials) = pool.install(|| match spec.name {
        ExperimentKind::Fig2OutageVsSnr => run_outage_study(spec).map(|s| (s, TrialMatrix::default())),
        _ => run_system(spec),
    })?;
    Ok((
        ResultTable {
            spec: spec.clone(),
            sweep: spec.sweep.values.clone(),
            series,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        trials,
    ))
}

fn run_outage_study(spec: &ExperimentSpec) -> Result<Vec<SeriesColumn>> {
    let g = spec.scenario.g;
    let blocks = spec.trials.div_ceil(OUTAGE_BLOCK);
    let queries: Vec<Vec<OutageQuery>> = spec
        .schemes
        .iter()
        .map(|s| {
            let SeriesKind::Abstract { mode, kbar: Some(k) } = s.kind else {
                unreachable!("validated")
            };
            spec.sweep
                .values
                .iter()
                .map(|&snr| OutageQuery::new(k, spec.rate_target, 10f64.powf(snr / 10.0), mode))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..spec.schemes.len())
        .flat_map(|k| (0..spec.sweep.values.len()).flat_map(move |p| (0..blocks).map(move |b| (k, p, b))))
        .collect();
    let results: Vec<Result<OutageEstimate>> = jobs
        .par_iter()
        .map(|&(k, p, b)| {
            let q = &queries[k][p];
            let n = OUTAGE_BLOCK.min(spec.trials - b * OUTAGE_BLOCK);
            let mut rng = substream(spec.seed, stream_id(b as u64, &format!("outage/{}", spec.schemes[k])));
            let est = match (q.phase_mode, spec.outage_estimator) {
                (PhaseMode::Optimal, OutageEstimator::Conditional) => outage_conditional_mc(q, g, n, &mut rng),
                _ => outage_monte_carlo(q, g, n, &mut rng),
            };
            est.map_err(|e| Error::Trial {
                trial: b * OUTAGE_BLOCK,
                source: Box::new(e),
            })
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let points = spec.sweep.values.len();
    let mut out = Vec::with_capacity(spec.schemes.len());
    for (k, s) in spec.schemes.iter().enumerate() {
        let mut mean = Vec::with_capacity(points);
        let mut stderr = Vec::with_capacity(points);
        let mut approx = Vec::with_capacity(points);
        for (p, q) in queries[k].iter().enumerate() {
            let chunk = &results[(k * points + p) * blocks..(k * points + p + 1) * blocks];
            let total = spec.trials as f64;
            mean.push(chunk.iter().map(|e| e.p_hat * e.trials as f64).sum::<f64>() / total);
            stderr.push(chunk.iter().map(|e| (e.stderr * e.trials as f64).powi(2)).sum::<f64>().sqrt() / total);
            approx.push(match q.phase_mode {
                PhaseMode::Optimal => outage_closed_form(q)?.p,
                PhaseMode::Unit => outage_unit_phase(q)?.p,
            });
        }
        out.push(SeriesColumn {
            key: s.column_key(),
            label: s.to_string(),
            mean,
            stderr,
            approx: Some(approx),
        });
    }
    Ok(out)
}

/// One series at one sweep point, fully resolved.
#[derive(Debug, Clone)]
struct Cell {
    scheme: Scheme,
    g: usize,
    pt: f64,
    states: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
struct Point {
    cfg: ScenarioConfig,
    /// Sweep points sharing a key share channels and designs.
    geometry: usize,
    cells: Vec<Cell>,
}

fn states_of(scheme: Scheme, g: usize) -> Vec<Vec<usize>> {
    match scheme {
        Scheme::RpmStatistical(k) | Scheme::RpmInstantaneous(k) | Scheme::RandomPhase(k) => numkit::combinations(g, k),
        Scheme::NoItFullOn => vec![(0..g).collect()],
        Scheme::NoRisMrt => vec![vec![]],
        Scheme::Pbit => (0..=g).flat_map(|k| numkit::combinations(g, k)).collect(),
    }
}

fn plan(spec: &ExperimentSpec) -> Result<Vec<Point>> {
    let param = spec.sweep.parameter;
    spec.sweep
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = spec.scenario.clone();
            let mut kbar = None;
            match param {
                SweepParam::Dy => cfg.dy = v,
                SweepParam::PtDbm => cfg.pt = dbm_to_watts(v),
                SweepParam::Kbar => kbar = Some(v as usize),
                SweepParam::SnrDb => unreachable!("validated"),
            }
            let cells = spec
                .schemes
                .iter()
                .map(|s| {
                    if s.pt_dbm.is_some() && param == SweepParam::PtDbm {
                        return Err(Error::config(
                            "experiment.schemes",
                            format!("series {s} fixes Pt inside a Pt sweep"),
                        ));
                    }
                    let scheme = s.resolve(kbar)?;
                    let g = s.g.unwrap_or(cfg.g);
                    if let Some(k) = scheme.kbar(g) {
                        if k > g {
                            return Err(Error::config(
                                "experiment.schemes",
                                format!("series {s} turns on {k} of {g} groups"),
                            ));
                        }
                    }
                    Ok(Cell {
                        scheme,
                        g,
                        pt: s.pt_dbm.map(dbm_to_watts).unwrap_or(cfg.pt),
                        states: states_of(scheme, g),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Point {
                geometry: if param == SweepParam::Dy { i } else { 0 },
                cfg,
                cells,
            })
        })
        .collect()
}

fn run_system(spec: &ExperimentSpec) -> Result<(Vec<SeriesColumn>, TrialMatrix)> {
    let points = plan(spec)?;
    let constellation = Constellation::for_order(spec.scenario.m)?;
    let rows: Vec<Result<Vec<Vec<f64>>>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(spec, &points, &constellation, t).map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect();
    let trials = TrialMatrix {
        values: rows.into_iter().collect::<Result<_>>()?,
    };

    let series = spec
        .schemes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let (mean, stderr) = (0..points.len()).map(|p| mean_stderr(&trials.samples(p, k))).unzip();
            SeriesColumn {
                key: s.column_key(),
                label: s.to_string(),
                mean,
                stderr,
                approx: None,
            }
        })
        .collect();
    Ok((series, trials))
}

fn series_stream(spec: &ExperimentSpec, trial: usize, tag: &str) -> numkit::RngStream {
    substream(spec.seed, stream_id(trial as u64, tag))
}

fn run_trial(
    spec: &ExperimentSpec,
    points: &[Point],
    constellation: &Constellation,
    trial: usize,
) -> Result<Vec<Vec<f64>>> {
    let metric = spec.name.metric();
    let noise = match metric {
        Metric::Rate => draw_noise(spec.noise_samples, &mut series_stream(spec, trial, "noise"))?,
        _ => Vec::new(),
    };
    let mut channels: HashMap<(usize, usize), (ChannelSet, ChannelEstimate)> = HashMap::new();
    let mut designs: HashMap<(usize, usize, Scheme), Design> = HashMap::new();

    let mut row = Vec::with_capacity(points.len());
    for point in points {
        let mut values = Vec::with_capacity(point.cells.len());
        for cell in &point.cells {
            let cfg = ScenarioConfig {
                g: cell.g,
                kbar: point.cfg.kbar.min(cell.g),
                ..point.cfg.clone()
            };
            let link_key = (point.geometry, cell.g);
            if !channels.contains_key(&link_key) {
                let set = sample_channels(&cfg, &mut series_stream(spec, trial, "channel"))?;
                let est = match spec.csi {
                    CsiMode::Perfect => ChannelEstimate::exact(&set),
                    CsiMode::Estimated => {
                        let mut rng = series_stream(spec, trial, &format!("pilot/g{}", cell.g));
                        estimate_channels(&run_pilot_phase(&set, &cfg, &mut rng)?, cfg.pp)?
                    }
                };
                channels.insert(link_key, (set, est));
            }
            let (set, est) = &channels[&link_key];

            let design_key = (point.geometry, cell.g, cell.scheme);
            if !designs.contains_key(&design_key) {
                let mut rng = series_stream(spec, trial, &format!("design/{}/g{}", cell.scheme, cell.g));
                let design = scheme_select(cell.scheme, &est.h_hat, &est.hd_hat, &spec.solver, &mut rng)?;
                designs.insert(design_key, design);
            }
            let design = &designs[&design_key];

            let value = match metric {
                Metric::Power => cell.pt * received_power(design, &set.h, &set.hd)?,
                Metric::Outage | Metric::Rate => {
                    let gains = state_gains(design, set, &cell.states)?;
                    if metric == Metric::Outage {
                        let threshold = spec.rate_target.exp2() - 1.0;
                        let snr = cell.pt / cfg.sigma2;
                        gains.iter().filter(|c| snr * c.norm_sqr() < threshold).count() as f64 / gains.len() as f64
                    } else {
                        let r = rate_from_channels(&gains, constellation, cell.pt, cfg.sigma2, &noise)?.mean_bits;
                        if spec.overhead {
                            effective_rate_with_overhead(r, cell.g, cfg.tc)?
                        } else {
                            r
                        }
                    }
                }
            };
            values.push(value);
        }
        row.push(values);
    }
    Ok(row)
}

/// Effective scalar channel of `design` on the true links, per ON set.
fn state_gains(design: &Design, set: &ChannelSet, states: &[Vec<usize>]) -> Result<Vec<C64>> {
    states
        .iter()
        .map(|on| {
            let (w, theta) = design.for_state(on)?;
            Ok(link_gain(&set.h, &set.hd, &theta, &w))
        })
        .collect()
}

/// Index of `series` in the spec, by its label.
pub fn series_index(spec: &ExperimentSpec, label: &str) -> Option<usize> {
    let target: Series = label.parse().ok()?;
    spec.schemes.iter().position(|s| *s == target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, trials: usize) -> ExperimentSpec {
        let mut spec = ExperimentSpec::for_kind(kind, false);
        spec.trials = trials;
        spec.noise_samples = spec.noise_samples.min(20);
        spec.solver.randomization_samples = 20;
        spec
    }

    #[test]
    fn mean_stderr_basics() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pbit_states_cover_all_subsets() {
        assert_eq!(states_of(Scheme::Pbit, 4).len(), 16);
        assert_eq!(states_of(Scheme::RpmStatistical(3), 4).len(), 4);
        assert_eq!(states_of(Scheme::NoRisMrt, 4), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn noiseless_power_full_on_beats_rpm() {
        let spec = &mut small(ExperimentKind::Fig3PowerVsDy, 1);
        assert_eq!(spec.csi, CsiMode::Perfect);
        spec.sweep.values = vec![30.0, 45.0, 60.0];
        let table = run_experiment(spec, &RunOptions::default()).unwrap();
        let full = table.column("no_it").unwrap();
        let rpm = table.column("rpm_k3").unwrap();
        for p in 0..3 {
            assert!(full.mean[p] >= rpm.mean[p], "point {p}");
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let mut spec = small(ExperimentKind::Fig5RateVsDy, 3);
        spec.sweep.values = vec![40.0, 50.0];
        let a = run_experiment(&spec, &RunOptions { workers: 1 }).unwrap();
        let b = run_experiment(&spec, &RunOptions { workers: 3 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dropping_a_scheme_leaves_others_unchanged() {
        let mut spec = small(ExperimentKind::Fig4OutageVsPt, 4);
        spec.sweep.values = vec![10.0];
        spec.scenario.dy = 48.0;
        let (_, all) = run_experiment_detailed(&spec, &RunOptions::default()).unwrap();
        let keep = series_index(&spec, "pbit").unwrap();
        let mut fewer = spec.clone();
        fewer.schemes.retain(|s| s.to_string() == "pbit");
        let (_, one) = run_experiment_detailed(&fewer, &RunOptions::default()).unwrap();
        assert_eq!(all.samples(0, keep), one.samples(0, 0));
    }

    #[test]
    fn outage_study_orders_by_kbar() {
        let mut spec = small(ExperimentKind::Fig2OutageVsSnr, 20_000);
        spec.schemes = ["optimal:0", "optimal:2", "optimal:4"].iter().map(|s| s.parse().unwrap()).collect();
        spec.sweep.values = vec![20.0, 25.0];
        let table = run_experiment(&spec, &RunOptions::default()).unwrap();
        for p in 0..2 {
            let m: Vec<(f64, f64)> = table.series.iter().map(|c| (c.mean[p], c.stderr[p])).collect();
            assert!(m[0].0 - m[1].0 > 3.0 * (m[0].1.hypot(m[1].1)));
            assert!(m[1].0 - m[2].0 > 3.0 * (m[1].1.hypot(m[2].1)));
        }
    }

    #[test]
    fn trial_errors_carry_index() {
        let mut spec = small(ExperimentKind::Fig3PowerVsDy, 2);
        spec.scenario.d0 = 0.0;
        spec.scenario.dy = 0.0;
        spec.scenario.dz = 0.0;
        match run_experiment(&spec, &RunOptions::default()) {
            Err(Error::Trial { trial, .. }) => assert_eq!(trial, 0),
            Err(Error::Validation(_)) | Err(Error::Config { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
