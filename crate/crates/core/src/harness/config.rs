//! Experiment specifications and their TOML form.
//!
//! ```toml
//! [experiment]
//! name = "fig4_outage_vs_pt"
//! trials = 500
//! noise_samples = 200
//! seed = 7
//! csi = "estimated"          # or "perfect"
//! schemes = ["rpm_k3", "pbit"]
//! rate_target = 1.0
//! overhead = false
//!
//! [sweep]
//! parameter = "pt_dbm"        # dy | pt_dbm | snr_db | kbar
//! values = [0, 10, 20, 30]    # or start / stop / step
//!
//! [scenario]
//! g = 6
//! pt = "20 dBm"               # numbers are dBm; strings accept dBm, mW, W
//! sigma2 = -80
//! kappa_ar = "inf"
//!
//! [solver]
//! eps = 1e-4
//! max_iter = 5
//! ```
//!
//! Every key is optional; missing keys take the defaults of the named experiment.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamform::{AlgorithmSettings, Scheme};
use crate::channel::{db_to_linear, dbm_to_watts, ScenarioConfig};
use crate::error::{Error, Result};
use crate::outage::PhaseMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig2OutageVsSnr,
    Fig3PowerVsDy,
    Fig4OutageVsPt,
    Fig5RateVsDy,
    Fig6RateVsKbar,
    Fig7RateVsGrouping,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Fig2OutageVsSnr,
        ExperimentKind::Fig3PowerVsDy,
        ExperimentKind::Fig4OutageVsPt,
        ExperimentKind::Fig5RateVsDy,
        ExperimentKind::Fig6RateVsKbar,
        ExperimentKind::Fig7RateVsGrouping,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Fig2OutageVsSnr => "fig2_outage_vs_snr",
            ExperimentKind::Fig3PowerVsDy => "fig3_power_vs_dy",
            ExperimentKind::Fig4OutageVsPt => "fig4_outage_vs_pt",
            ExperimentKind::Fig5RateVsDy => "fig5_rate_vs_dy",
            ExperimentKind::Fig6RateVsKbar => "fig6_rate_vs_kbar",
            ExperimentKind::Fig7RateVsGrouping => "fig7_rate_vs_grouping",
        }
    }

    pub fn from_figure(fig: u8) -> Option<Self> {
        match fig {
            2..=7 => Some(Self::ALL[(fig - 2) as usize]),
            _ => None,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            ExperimentKind::Fig2OutageVsSnr | ExperimentKind::Fig4OutageVsPt => Metric::Outage,
            ExperimentKind::Fig3PowerVsDy => Metric::Power,
            _ => Metric::Rate,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("experiment.name", format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Mean received power, W.
    Power,
    Outage,
    /// Bits per channel use.
    Rate,
}

impl Metric {
    pub fn column_prefix(&self) -> &'static str {
        match self {
            Metric::Power => "power",
            Metric::Outage => "outage",
            Metric::Rate => "rate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// User offset along y, m.
    Dy,
    PtDbm,
    /// `γ = Pt/σ²` in dB, for the single-antenna outage study.
    SnrDb,
    Kbar,
}

impl SweepParam {
    pub fn column(&self) -> &'static str {
        match self {
            SweepParam::Dy => "dy_m",
            SweepParam::PtDbm => "pt_dbm",
            SweepParam::SnrDb => "snr_db",
            SweepParam::Kbar => "kbar",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dy" | "dy_m" => Ok(SweepParam::Dy),
            "pt" | "pt_dbm" => Ok(SweepParam::PtDbm),
            "snr" | "snr_db" => Ok(SweepParam::SnrDb),
            "kbar" => Ok(SweepParam::Kbar),
            _ => Err(Error::config("sweep.parameter", format!("unknown sweep parameter {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn range(parameter: SweepParam, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::config("sweep.step", "step must be positive"));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if !(count >= 0.0) || count > 1e6 {
            return Err(Error::config("sweep.stop", "empty or oversized range"));
        }
        let values = (0..=count as usize).map(|i| start + step * i as f64).collect();
        Ok(Self { parameter, values })
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep.values", "no sweep values"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", "sweep values must be finite"));
        }
        if self.values.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::config("sweep.values", "sweep values must be strictly increasing"));
        }
        if self.parameter == SweepParam::Kbar && self.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(Error::config("sweep.values", "K̄ values must be non-negative integers"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    Perfect,
    Estimated,
}

/// Scheme families whose ON count comes from a `kbar` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Rpm,
    Ub,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesKind {
    Fixed(Scheme),
    SweptK(Family),
    /// Single-antenna outage study with `K̄` fixed or swept.
    Abstract { mode: PhaseMode, kbar: Option<usize> },
}

/// One curve: `body[@<P>dBm][/g<G>]`, e.g. `rpm_k3`, `ub_k3@20dBm`,
/// `rpm_k1/g2`, `rpm@30dBm` (K̄ from the sweep), `optimal:2`, `unit:1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Series {
    pub kind: SeriesKind,
    pub pt_dbm: Option<f64>,
    pub g: Option<usize>,
}

impl Series {
    pub fn scheme(scheme: Scheme) -> Self {
        Self {
            kind: SeriesKind::Fixed(scheme),
            pt_dbm: None,
            g: None,
        }
    }

    pub fn at_power(mut self, pt_dbm: f64) -> Self {
        self.pt_dbm = Some(pt_dbm);
        self
    }

    pub fn with_groups(mut self, g: usize) -> Self {
        self.g = Some(g);
        self
    }

    /// Concrete scheme, resolving a swept ON count.
    pub fn resolve(&self, kbar_sweep: Option<usize>) -> Result<Scheme> {
        let need_k = || {
            kbar_sweep.ok_or_else(|| Error::config("experiment.schemes", format!("series {self} needs a kbar sweep")))
        };
        match self.kind {
            SeriesKind::Fixed(s) => Ok(s),
            SeriesKind::SweptK(Family::Rpm) => Ok(Scheme::RpmStatistical(need_k()?)),
            SeriesKind::SweptK(Family::Ub) => Ok(Scheme::RpmInstantaneous(need_k()?)),
            SeriesKind::SweptK(Family::Random) => Ok(Scheme::RandomPhase(need_k()?)),
            SeriesKind::Abstract { .. } => Err(Error::config(
                "experiment.schemes",
                format!("series {self} only applies to fig2_outage_vs_snr"),
            )),
        }
    }

    /// CSV-safe column suffix.
    pub fn column_key(&self) -> String {
        self.to_string()
            .to_ascii_lowercase()
            .replace(':', "_k")
            .replace('@', "_")
            .replace('/', "_")
            .replace('-', "m")
            .replace('.', "p")
    }
}

fn fmt_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SeriesKind::Fixed(s) => write!(f, "{s}")?,
            SeriesKind::SweptK(Family::Rpm) => f.write_str("rpm")?,
            SeriesKind::SweptK(Family::Ub) => f.write_str("ub")?,
            SeriesKind::SweptK(Family::Random) => f.write_str("random")?,
            SeriesKind::Abstract { mode, kbar } => {
                f.write_str(match mode {
                    PhaseMode::Optimal => "optimal",
                    PhaseMode::Unit => "unit",
                })?;
                if let Some(k) = kbar {
                    write!(f, ":{k}")?;
                }
            }
        }
        if let Some(p) = self.pt_dbm {
            write!(f, "@{}dBm", fmt_number(p))?;
        }
        if let Some(g) = self.g {
            write!(f, "/g{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::config("experiment.schemes", msg);
        let text = s.trim();
        let (rest, g) = match text.rsplit_once("/g") {
            Some((head, g)) => (head, Some(g.parse::<usize>().map_err(|_| bad(format!("bad group count in {s:?}")))?)),
            None => (text, None),
        };
        let (body, pt_dbm) = match rest.split_once('@') {
            Some((head, p)) => {
                let p = p.trim();
                let p = p.strip_suffix("dBm").or_else(|| p.strip_suffix("dbm")).unwrap_or(p).trim();
                (head, Some(p.parse::<f64>().map_err(|_| bad(format!("bad power in {s:?}")))?))
            }
            None => (rest, None),
        };
        let abstract_mode = |name: &str| match name {
            "optimal" => Some(PhaseMode::Optimal),
            "unit" => Some(PhaseMode::Unit),
            _ => None,
        };
        let kind = if let Some((name, k)) = body.split_once(':') {
            let mode = abstract_mode(name).ok_or_else(|| bad(format!("unknown series {s:?}")))?;
            let k = k.parse().map_err(|_| bad(format!("bad ON count in {s:?}")))?;
            SeriesKind::Abstract { mode, kbar: Some(k) }
        } else if let Some(mode) = abstract_mode(body) {
            SeriesKind::Abstract { mode, kbar: None }
        } else {
            match body {
                "rpm" => SeriesKind::SweptK(Family::Rpm),
                "ub" => SeriesKind::SweptK(Family::Ub),
                "random" => SeriesKind::SweptK(Family::Random),
                other => SeriesKind::Fixed(other.parse().map_err(|e: Error| bad(e.to_string()))?),
            }
        };
        Ok(Self { kind, pt_dbm, g })
    }
}

impl TryFrom<String> for Series {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Series> for String {
    fn from(s: Series) -> String {
        s.to_string()
    }
}

/// Which estimator the single-antenna outage study uses for optimal phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageEstimator {
    /// Event counting.
    Counting,
    /// Direct link integrated out, reflected magnitudes truncated.
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: ExperimentKind,
    pub scenario: ScenarioConfig,
    pub sweep: Sweep,
    pub schemes: Vec<Series>,
    pub trials: usize,
    pub noise_samples: usize,
    pub seed: u64,
    pub csi: CsiMode,
    /// Target rate for outage, bits/s/Hz.
    pub rate_target: f64,
    /// Scale rates by `1 − (G + 1)/T_c`.
    pub overhead: bool,
    pub outage_estimator: OutageEstimator,
    pub solver: AlgorithmSettings,
}

fn series(list: &[&str]) -> Vec<Series> {
    list.iter().map(|s| s.parse().expect("built-in series")).collect()
}

impl ExperimentSpec {
    /// Quick defaults for a figure; `full` switches to the large trial counts.
    pub fn for_kind(kind: ExperimentKind, full: bool) -> Self {
        let base = ScenarioConfig::default();
        let dy_grid = Sweep::range(SweepParam::Dy, 20.0, 70.0, 2.5).expect("static range");
        let pt_grid = Sweep::range(SweepParam::PtDbm, 0.0, 30.0, 5.0).expect("static range");
        let mk = |scenario: ScenarioConfig, sweep: Sweep, list: &[&str], trials: (usize, usize), noise: (usize, usize), csi| Self {
            name: kind,
            scenario,
            sweep,
            schemes: series(list),
            trials: if full { trials.1 } else { trials.0 },
            noise_samples: if full { noise.1 } else { noise.0 },
            seed: 1,
            csi,
            rate_target: 1.0,
            overhead: false,
            outage_estimator: OutageEstimator::Conditional,
            solver: AlgorithmSettings::default(),
        };
        match kind {
            ExperimentKind::Fig2OutageVsSnr => mk(
                ScenarioConfig { n: 1, ..base },
                Sweep::range(SweepParam::SnrDb, 0.0, 30.0, 2.5).expect("static range"),
                &["optimal:0", "optimal:1", "optimal:2", "optimal:3", "optimal:4", "unit:4"],
                (100_000, 1_000_000),
                (1, 1),
                CsiMode::Perfect,
            ),
            ExperimentKind::Fig3PowerVsDy => mk(
                base,
                dy_grid,
                &["ub_k3", "no_it", "rpm_k3", "pbit", "random_k3", "no_ris"],
                (100, 1000),
                (1, 1),
                CsiMode::Perfect,
            ),
            ExperimentKind::Fig4OutageVsPt => mk(
                ScenarioConfig { g: 6, ..base },
                pt_grid,
                &["rpm_k5", "rpm_k3", "pbit", "no_it", "no_ris"],
                (500, 2000),
                (1, 1),
                CsiMode::Estimated,
            ),
            ExperimentKind::Fig5RateVsDy => mk(
                base,
                dy_grid,
                &[
                    "ub_k3@0dBm", "rpm_k3@0dBm", "rpm_k2@0dBm", "no_it@0dBm", "no_ris@0dBm", "pbit@0dBm",
                    "ub_k3@20dBm", "rpm_k3@20dBm", "rpm_k2@20dBm", "no_it@20dBm", "no_ris@20dBm", "pbit@20dBm",
                ],
                (50, 1000),
                (100, 200),
                CsiMode::Estimated,
            ),
            ExperimentKind::Fig6RateVsKbar => mk(
                ScenarioConfig { g: 9, ..base },
                Sweep {
                    parameter: SweepParam::Kbar,
                    values: (0..=9).map(f64::from).collect(),
                },
                &["rpm@10dBm", "rpm@30dBm"],
                (100, 1000),
                (50, 200),
                CsiMode::Estimated,
            ),
            ExperimentKind::Fig7RateVsGrouping => {
                let mut spec = mk(
                    base,
                    pt_grid,
                    &["rpm_k1/g2", "rpm_k2/g4", "rpm_k3/g6", "pbit/g2", "pbit/g4", "pbit/g6"],
                    (50, 1000),
                    (100, 200),
                    CsiMode::Estimated,
                );
                spec.overhead = true;
                spec
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::config("experiment.schemes", "no series"));
        }
        if self.trials == 0 {
            return Err(Error::config("experiment.trials", "trials must be at least 1"));
        }
        if self.noise_samples == 0 {
            return Err(Error::config("experiment.noise_samples", "noise_samples must be at least 1"));
        }
        if !(self.rate_target > 0.0) {
            return Err(Error::config("experiment.rate_target", "target rate must be positive"));
        }
        if !(self.solver.eps > 0.0) || self.solver.max_iter == 0 || self.solver.randomization_samples == 0 {
            return Err(Error::config("solver", "eps must be positive, max_iter and randomization_samples at least 1"));
        }
        let is_abstract = self.name == ExperimentKind::Fig2OutageVsSnr;
        if is_abstract != (self.sweep.parameter == SweepParam::SnrDb) {
            return Err(Error::config(
                "sweep.parameter",
                "snr_db sweeps belong to fig2_outage_vs_snr, which only sweeps snr_db",
            ));
        }
        let kbar_sweep = self.sweep.parameter == SweepParam::Kbar;
        for s in &self.schemes {
            let abstract_series = matches!(s.kind, SeriesKind::Abstract { .. });
            if abstract_series != is_abstract {
                return Err(Error::config(
                    "experiment.schemes",
                    format!("series {s} does not fit experiment {}", self.name),
                ));
            }
            if let SeriesKind::Abstract { kbar: None, .. } = s.kind {
                return Err(Error::config("experiment.schemes", format!("series {s} needs an explicit K̄")));
            }
            if matches!(s.kind, SeriesKind::SweptK(_)) && !kbar_sweep {
                return Err(Error::config("experiment.schemes", format!("series {s} needs a kbar sweep")));
            }
            if let Some(g) = s.g {
                let cfg = ScenarioConfig {
                    g,
                    kbar: self.scenario.kbar.min(g),
                    ..self.scenario.clone()
                };
                cfg.validate()?;
            }
        }
        let mut cfg = self.scenario.clone();
        if is_abstract {
            cfg.g = cfg.g.max(self.schemes.iter().filter_map(|s| match s.kind {
                SeriesKind::Abstract { kbar, .. } => kbar,
                _ => None,
            }).max().unwrap_or(0));
        }
        // K̄ is per-series here; the scenario's own K̄ only needs to fit G.
        cfg.kbar = cfg.kbar.min(cfg.g);
        cfg.validate()
    }
}

/// Reads and validates a TOML experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.to_string()))?;
    let mut root = Section::new("", root);
    let mut exp = root.section("experiment")?;
    let kind = match exp.take_str("name")? {
        Some(name) => name.parse()?,
        None => ExperimentKind::Fig3PowerVsDy,
    };
    let mut spec = ExperimentSpec::for_kind(kind, false);

    if let Some(v) = exp.take_usize("trials")? {
        spec.trials = v;
    }
    if let Some(v) = exp.take_usize("noise_samples")? {
        spec.noise_samples = v;
    }
    if let Some(v) = exp.take_u64("seed")? {
        spec.seed = v;
    }
    if let Some(v) = exp.take_str("csi")? {
        spec.csi = match v.as_str() {
            "perfect" => CsiMode::Perfect,
            "estimated" => CsiMode::Estimated,
            _ => return Err(exp.err("csi", "expected \"perfect\" or \"estimated\"")),
        };
    }
    if let Some(v) = exp.take_str("outage_estimator")? {
        spec.outage_estimator = match v.as_str() {
            "counting" => OutageEstimator::Counting,
            "conditional" => OutageEstimator::Conditional,
            _ => return Err(exp.err("outage_estimator", "expected \"counting\" or \"conditional\"")),
        };
    }
    if let Some(v) = exp.take_f64("rate_target")? {
        spec.rate_target = v;
    }
    if let Some(v) = exp.take_bool("overhead")? {
        spec.overhead = v;
    }
    if let Some(list) = exp.take_str_list("schemes")? {
        spec.schemes = list
            .iter()
            .map(|s| s.parse::<Series>().map_err(|e| exp.err("schemes", &e.to_string())))
            .collect::<Result<_>>()?;
    }
    exp.finish()?;

    let mut sweep = root.section("sweep")?;
    let parameter = match sweep.take_str("parameter")? {
        Some(p) => p.parse().map_err(|_| sweep.err("parameter", &format!("unknown sweep parameter {p:?}")))?,
        None => spec.sweep.parameter,
    };
    let values = sweep.take_f64_list("values")?;
    let start = sweep.take_f64("start")?;
    let stop = sweep.take_f64("stop")?;
    let step = sweep.take_f64("step")?;
    spec.sweep = match (values, start, stop, step) {
        (Some(values), None, None, None) => Sweep { parameter, values },
        (None, Some(a), Some(b), Some(s)) => Sweep::range(parameter, a, b, s)?,
        (None, None, None, None) if parameter == spec.sweep.parameter => spec.sweep.clone(),
        (None, None, None, None) => return Err(sweep.err("values", "a new sweep parameter needs values or start/stop/step")),
        _ => return Err(sweep.err("values", "give either values or all of start, stop, step")),
    };
    sweep.finish()?;

    let mut sc = root.section("scenario")?;
    let cfg = &mut spec.scenario;
    macro_rules! usize_key {
        ($($k:ident),*) => {$(
            if let Some(v) = sc.take_usize(stringify!($k))? { cfg.$k = v; }
        )*};
    }
    macro_rules! f64_key {
        ($($k:ident),*) => {$(
            if let Some(v) = sc.take_f64(stringify!($k))? { cfg.$k = v; }
        )*};
    }
    macro_rules! power_key {
        ($($k:ident),*) => {$(
            if let Some(v) = sc.take_power(stringify!($k))? { cfg.$k = v; }
        )*};
    }
    macro_rules! kappa_key {
        ($($k:ident),*) => {$(
            if let Some(v) = sc.take_kappa(stringify!($k))? { cfg.$k = v; }
        )*};
    }
    usize_key!(n, ris_x, ris_z, g, kbar, tc, m);
    if let Some(l) = sc.take_usize("l")? {
        cfg.ris_x = l;
        cfg.ris_z = 1;
    }
    f64_key!(d0, dy, dz, wavelength, alpha_au, alpha_ar, alpha_ru);
    if let Some(db) = sc.take_f64("c0_db")? {
        cfg.c0 = db_to_linear(db);
    }
    power_key!(pt, pp, sigma2);
    kappa_key!(kappa_au, kappa_ar, kappa_ru);
    sc.finish()?;

    let mut solver = root.section("solver")?;
    if let Some(v) = solver.take_f64("eps")? {
        spec.solver.eps = v;
    }
    if let Some(v) = solver.take_usize("max_iter")? {
        spec.solver.max_iter = v;
    }
    if let Some(v) = solver.take_usize("randomization_samples")? {
        spec.solver.randomization_samples = v;
    }
    if let Some(v) = solver.take_usize("sdp_max_iter")? {
        spec.solver.sdp.max_iter = v;
    }
    if let Some(v) = solver.take_f64("sdp_gap_tol")? {
        spec.solver.sdp.gap_tol = v;
    }
    solver.finish()?;
    root.finish()?;

    spec.validate()?;
    Ok(spec)
}

/// Parses `"20 dBm"`, `"100 mW"`, `"0.1 W"`, or a bare dBm number.
pub fn parse_power(text: &str) -> Option<f64> {
    let t = text.trim();
    let num = t.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let unit = match &t[num.len()..] {
        "" => "dBm",
        u => u,
    };
    let num = num.trim();
    let v: f64 = num.parse().ok()?;
    let w = match unit.to_ascii_lowercase().as_str() {
        "dbm" => dbm_to_watts(v),
        "dbw" => db_to_linear(v),
        "w" => v,
        "mw" => v * 1e-3,
        "uw" => v * 1e-6,
        _ => return None,
    };
    Some(w)
}

/// A TOML table that tracks its path and rejects unknown keys.
struct Section {
    path: String,
    table: toml::Table,
}

impl Section {
    fn new(path: &str, table: toml::Table) -> Self {
        Self {
            path: path.to_string(),
            table,
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn err(&self, k: &str, msg: &str) -> Error {
        Error::config(self.key(k), msg)
    }

    fn section(&mut self, name: &str) -> Result<Section> {
        match self.table.remove(name) {
            None => Ok(Section::new(name, toml::Table::new())),
            Some(toml::Value::Table(t)) => Ok(Section::new(&self.key(name), t)),
            Some(_) => Err(self.err(name, "expected a table")),
        }
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }

    fn take_f64(&mut self, k: &str) -> Result<Option<f64>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(v)),
            Some(toml::Value::Integer(v)) => Ok(Some(v as f64)),
            Some(_) => Err(self.err(k, "expected a number")),
        }
    }

    fn take_u64(&mut self, k: &str) -> Result<Option<u64>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if v >= 0 => Ok(Some(v as u64)),
            Some(_) => Err(self.err(k, "expected a non-negative integer")),
        }
    }

    fn take_usize(&mut self, k: &str) -> Result<Option<usize>> {
        Ok(self.take_u64(k)?.map(|v| v as usize))
    }

    fn take_bool(&mut self, k: &str) -> Result<Option<bool>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Boolean(v)) => Ok(Some(v)),
            Some(_) => Err(self.err(k, "expected true or false")),
        }
    }

    fn take_str(&mut self, k: &str) -> Result<Option<String>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::String(v)) => Ok(Some(v)),
            Some(_) => Err(self.err(k, "expected a string")),
        }
    }

    fn take_str_list(&mut self, k: &str) -> Result<Option<Vec<String>>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s),
                    _ => Err(self.err(k, "expected a list of strings")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(k, "expected a list of strings")),
        }
    }

    fn take_f64_list(&mut self, k: &str) -> Result<Option<Vec<f64>>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(x),
                    toml::Value::Integer(x) => Ok(x as f64),
                    _ => Err(self.err(k, "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(k, "expected a list of numbers")),
        }
    }

    fn take_power(&mut self, k: &str) -> Result<Option<f64>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(dbm_to_watts(v))),
            Some(toml::Value::Integer(v)) => Ok(Some(dbm_to_watts(v as f64))),
            Some(toml::Value::String(s)) => parse_power(&s)
                .map(Some)
                .ok_or_else(|| self.err(k, &format!("cannot read power {s:?} (use e.g. \"20 dBm\" or \"0.1 W\")"))),
            Some(_) => Err(self.err(k, "expected a power")),
        }
    }

    fn take_kappa(&mut self, k: &str) -> Result<Option<f64>> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(v)),
            Some(toml::Value::Integer(v)) => Ok(Some(v as f64)),
            Some(toml::Value::String(s)) if s.trim().eq_ignore_ascii_case("inf") => Ok(Some(f64::INFINITY)),
            Some(_) => Err(self.err(k, "expected a number or \"inf\"")),
        }
    }
}
