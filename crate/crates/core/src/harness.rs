//! Monte-Carlo experiment runner, configuration files and the CSV format.
//!
//! Every trial draws one channel realization from `derive_seed(seed, trial)`
//! and every scheme and sweep value sees that same realization, so scheme
//! comparisons and power trends are paired. Trials run on the rayon pool and
//! are merged back in `(value, trial, scheme)` order, so the output does not
//! depend on the thread count.
//!
//! CSV columns:
//!
//! ```text
//! scheme,sweep_param,sweep_value_db,trial,secrecy_rate_bits,sinr_mu1,sinr_mu2,sinr_eve,sinr_fu_mean,iterations,solve_ms,status
//! ```
//!
//! Reals are written in shortest round-trip scientific notation; quantities
//! that do not apply are `NaN`. `sweep_param` is `p_m_db` or `p_f_db`, with
//! the held-fixed power appended for two-dimensional grids, e.g.
//! `p_m_db@p_f_db=25`. Convergence traces use status `trace`, one row per
//! iterate with the iterate index in `iterations`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::benchmark::solve_benchmark;
use crate::channel::{db_to_linear, derive_seed, sample_rayleigh_channels, ChannelSet, NetworkConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, BeamformingSolution};
use crate::stb_jmf::{solve_stb_jmf, JmfOptions};
use crate::stb_om::{solve_random_an, solve_stb_om, solve_stb_om_with_an, StbOmOptions};
use crate::stb_smf::solve_stb_smf;

pub const CSV_HEADER: [&str; 12] = [
    "scheme",
    "sweep_param",
    "sweep_value_db",
    "trial",
    "secrecy_rate_bits",
    "sinr_mu1",
    "sinr_mu2",
    "sinr_eve",
    "sinr_fu_mean",
    "iterations",
    "solve_ms",
    "status",
];

/// FU target used when the joint design is infeasible at the configured one.
pub const FALLBACK_GAMMA_FU: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    StbOm,
    StbSmf,
    StbJmf,
    Benchmark,
    StbOmAn,
    RandomAn,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::StbOm, Scheme::StbSmf, Scheme::StbJmf, Scheme::Benchmark, Scheme::StbOmAn, Scheme::RandomAn];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StbOm => "stb_om",
            Scheme::StbSmf => "stb_smf",
            Scheme::StbJmf => "stb_jmf",
            Scheme::Benchmark => "benchmark",
            Scheme::StbOmAn => "stb_om_an",
            Scheme::RandomAn => "random_an",
        }
    }

    /// Whether the femtocells serve their FUs on the macro band.
    pub fn serves_fus(self) -> bool {
        matches!(self, Scheme::StbSmf | Scheme::StbJmf | Scheme::Benchmark)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// Parses `a,b,c`.
pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    let out: Vec<Scheme> = s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config("no schemes selected".into()));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    PmDb,
    PfDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PmDb => "p_m_db",
            SweepParam::PfDb => "p_f_db",
        }
    }

    pub fn apply(self, cfg: &mut NetworkConfig, db: f64) {
        match self {
            SweepParam::PmDb => cfg.p_m = db_to_linear(db),
            SweepParam::PfDb => cfg.p_f = db_to_linear(db),
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p_m_db" => Ok(SweepParam::PmDb),
            "p_f_db" => Ok(SweepParam::PfDb),
            other => Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Self {
        Self { param, values }
    }

    /// `start..=stop` in steps of `step`, robust to rounding at the end.
    pub fn range(param: SweepParam, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::Config(format!("bad sweep range {start}:{stop}:{step}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok(Self::new(param, (0..=n).map(|i| start + step * i as f64).collect()))
    }
}

/// `p_m_db=30:45:3`, `p_f_db=20,30,40` or `p_m_db=40`.
impl FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, rhs) = s.split_once('=').ok_or_else(|| Error::Config(format!("sweep `{s}` needs `param=values`")))?;
        let param: SweepParam = name.parse()?;
        let num = |t: &str| -> Result<f64> {
            t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in sweep `{s}`")))
        };
        let parts: Vec<&str> = rhs.split(':').collect();
        let sweep = match parts.as_slice() {
            [a, b, c] => Sweep::range(param, num(a)?, num(b)?, num(c)?)?,
            [list] => Sweep::new(param, list.split(',').map(num).collect::<Result<_>>()?),
            _ => return Err(Error::Config(format!("sweep `{s}` must be start:stop:step or a list"))),
        };
        if sweep.values.is_empty() || sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sweep `{s}` has no finite values")));
        }
        Ok(sweep)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub base: NetworkConfig,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    /// Wall-clock times in `solve_ms`; off gives byte-identical reruns.
    pub record_timing: bool,
    /// Appended to `sweep_param` as `@label`.
    pub label: Option<String>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        if self.sweep.values.is_empty() || self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        for &v in &self.sweep.values {
            let mut cfg = self.base.clone();
            self.sweep.param.apply(&mut cfg, v);
            cfg.validate()?;
        }
        Ok(())
    }

    fn param_label(&self) -> String {
        match &self.label {
            Some(l) => format!("{}@{l}", self.sweep.param.name()),
            None => self.sweep.param.name().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub sweep_param: String,
    pub sweep_value_db: f64,
    pub trial: u64,
    pub secrecy_rate_bits: f64,
    pub sinr_mu1: f64,
    pub sinr_mu2: f64,
    pub sinr_eve: f64,
    pub sinr_fu_mean: f64,
    pub iterations: u64,
    pub solve_ms: f64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status.starts_with("ok")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Row status for a failed solve.
pub fn failure_status(e: &Error) -> &'static str {
    match e {
        Error::QosInfeasible(_) => "qos_infeasible",
        Error::DegenerateChannel(_) => "degenerate_channel",
        Error::NumericalFailure(_) | Error::RandomizationFailed(_) => "solver_failure",
        _ => "error",
    }
}

/// Runs one scheme; the string is the row status.
pub fn run_scheme(
    scheme: Scheme,
    ch: &ChannelSet,
    cfg: &NetworkConfig,
    trial_seed: u64,
) -> (Result<BeamformingSolution>, &'static str) {
    let om = StbOmOptions { an_seed: trial_seed, ..Default::default() };
    let jmf = JmfOptions { seed: trial_seed, ..Default::default() };
    match scheme {
        Scheme::StbOm => (solve_stb_om(ch, cfg, &om), "ok"),
        Scheme::StbSmf => (solve_stb_smf(ch, cfg, &om), "ok"),
        Scheme::Benchmark => (solve_benchmark(ch, cfg), "ok"),
        Scheme::StbOmAn => (solve_stb_om_with_an(ch, cfg, &om), "ok"),
        Scheme::RandomAn => (solve_random_an(ch, cfg, &om), "ok"),
        Scheme::StbJmf => match solve_stb_jmf(ch, cfg, &jmf) {
            Err(Error::QosInfeasible(_)) if cfg.n_coop > 0 => {
                let relaxed = cfg.clone().with_gamma_fu(FALLBACK_GAMMA_FU);
                (solve_stb_jmf(ch, &relaxed, &jmf), "ok_gamma_fu_0.5")
            }
            r => (r, "ok"),
        },
    }
}

fn nan_row(scheme: Scheme, spec: &ExperimentSpec, value: f64, trial: u64) -> ResultRow {
    ResultRow {
        scheme: scheme.name().into(),
        sweep_param: spec.param_label(),
        sweep_value_db: value,
        trial,
        secrecy_rate_bits: f64::NAN,
        sinr_mu1: f64::NAN,
        sinr_mu2: f64::NAN,
        sinr_eve: f64::NAN,
        sinr_fu_mean: f64::NAN,
        iterations: 0,
        solve_ms: 0.0,
        status: String::new(),
    }
}

fn score(scheme: Scheme, ch: &ChannelSet, sol: &BeamformingSolution, row: &mut ResultRow) -> Result<()> {
    row.secrecy_rate_bits = metrics::secrecy_rate(ch, sol)?;
    row.sinr_mu1 = metrics::sinr_mu(ch, sol, 0)?;
    if ch.m_users() > 1 {
        row.sinr_mu2 = metrics::sinr_mu(ch, sol, 1)?;
    }
    row.sinr_eve = metrics::sinr_eve(ch, sol)?;
    if scheme.serves_fus() {
        row.sinr_fu_mean = metrics::mean_sinr_fu(ch, sol)?.unwrap_or(f64::NAN);
    }
    row.iterations = sol.diagnostics.iterations as u64;
    Ok(())
}

fn run_trial(spec: &ExperimentSpec, value: f64, trial: u64) -> Vec<ResultRow> {
    let mut cfg = spec.base.clone();
    spec.sweep.param.apply(&mut cfg, value);
    let trial_seed = derive_seed(spec.seed, trial);
    let ch = sample_rayleigh_channels(&cfg, trial_seed);
    spec.schemes
        .iter()
        .map(|&scheme| {
            let mut row = nan_row(scheme, spec, value, trial);
            let t0 = Instant::now();
            let (res, ok) = run_scheme(scheme, &ch, &cfg, trial_seed);
            if spec.record_timing {
                row.solve_ms = t0.elapsed().as_secs_f64() * 1e3;
            }
            let res = res.and_then(|sol| score(scheme, &ch, &sol, &mut row));
            row.status = match res {
                Ok(()) => ok.to_string(),
                Err(e) => {
                    log::warn!("{scheme} at {value} dB, trial {trial}: {e}");
                    failure_status(&e).to_string()
                }
            };
            row
        })
        .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let units: Vec<(f64, u64)> =
        spec.sweep.values.iter().flat_map(|&v| (0..spec.trials as u64).map(move |t| (v, t))).collect();
    let rows: Vec<Vec<ResultRow>> = units.par_iter().map(|&(v, t)| run_trial(spec, v, t)).collect();
    Ok(ResultTable { rows: rows.into_iter().flatten().collect() })
}

/// STB-OM convergence traces, one row per iterate.
pub fn run_traces(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let units: Vec<(f64, u64)> =
        spec.sweep.values.iter().flat_map(|&v| (0..spec.trials as u64).map(move |t| (v, t))).collect();
    let rows: Vec<Vec<ResultRow>> = units
        .par_iter()
        .map(|&(v, t)| {
            let mut cfg = spec.base.clone();
            spec.sweep.param.apply(&mut cfg, v);
            let ch = sample_rayleigh_channels(&cfg, derive_seed(spec.seed, t));
            match solve_stb_om(&ch, &cfg, &StbOmOptions::default()) {
                Ok(sol) => sol
                    .diagnostics
                    .objective_trace
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| ResultRow {
                        secrecy_rate_bits: r,
                        iterations: k as u64,
                        status: "trace".into(),
                        ..nan_row(Scheme::StbOm, spec, v, t)
                    })
                    .collect(),
                Err(e) => vec![ResultRow { status: failure_status(&e).into(), ..nan_row(Scheme::StbOm, spec, v, t) }],
            }
        })
        .collect();
    Ok(ResultTable { rows: rows.into_iter().flatten().collect() })
}

fn real(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_csv_to<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &table.rows {
        w.write_record([
            r.scheme.clone(),
            r.sweep_param.clone(),
            real(r.sweep_value_db),
            r.trial.to_string(),
            real(r.secrecy_rate_bits),
            real(r.sinr_mu1),
            real(r.sinr_mu2),
            real(r.sinr_eve),
            real(r.sinr_fu_mean),
            r.iterations.to_string(),
            real(r.solve_ms),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<()> {
    write_csv_to(table, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_csv_from<R: Read>(input: R) -> Result<ResultTable> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected CSV header {header:?}")));
    }
    let bad = |what: &str, v: &str| Error::InvalidArgument(format!("bad {what} `{v}`"));
    let f = |v: &str| v.parse::<f64>().map_err(|_| bad("real", v));
    let u = |v: &str| v.parse::<u64>().map_err(|_| bad("integer", v));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let r = rec?;
        if r.len() != CSV_HEADER.len() {
            return Err(Error::InvalidArgument(format!("row has {} fields", r.len())));
        }
        rows.push(ResultRow {
            scheme: r[0].to_string(),
            sweep_param: r[1].to_string(),
            sweep_value_db: f(&r[2])?,
            trial: u(&r[3])?,
            secrecy_rate_bits: f(&r[4])?,
            sinr_mu1: f(&r[5])?,
            sinr_mu2: f(&r[6])?,
            sinr_eve: f(&r[7])?,
            sinr_fu_mean: f(&r[8])?,
            iterations: u(&r[9])?,
            solve_ms: f(&r[10])?,
            status: r[11].to_string(),
        });
    }
    Ok(ResultTable { rows })
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    read_csv_from(std::fs::File::open(path)?)
}

/// Means over the successful rows of one `(scheme, sweep_param, value)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub scheme: String,
    pub sweep_param: String,
    pub sweep_value_db: f64,
    pub mean_secrecy_rate: f64,
    pub mean_sinr_fu: f64,
    pub ok: usize,
    pub failed: usize,
}

/// Groups in first-appearance order; trace rows are skipped.
pub fn summarize(table: &ResultTable) -> Vec<Summary> {
    let mut out: Vec<(Summary, f64, usize)> = Vec::new();
    for r in table.rows.iter().filter(|r| r.status != "trace") {
        let i = match out.iter().position(|(s, _, _)| {
            s.scheme == r.scheme && s.sweep_param == r.sweep_param && s.sweep_value_db == r.sweep_value_db
        }) {
            Some(i) => i,
            None => {
                out.push((
                    Summary {
                        scheme: r.scheme.clone(),
                        sweep_param: r.sweep_param.clone(),
                        sweep_value_db: r.sweep_value_db,
                        mean_secrecy_rate: 0.0,
                        mean_sinr_fu: 0.0,
                        ok: 0,
                        failed: 0,
                    },
                    0.0,
                    0,
                ));
                out.len() - 1
            }
        };
        let (s, fu_sum, fu_n) = &mut out[i];
        if r.is_ok() {
            s.ok += 1;
            s.mean_secrecy_rate += r.secrecy_rate_bits;
            if r.sinr_fu_mean.is_finite() {
                *fu_sum += r.sinr_fu_mean;
                *fu_n += 1;
            }
        } else {
            s.failed += 1;
        }
    }
    out.into_iter()
        .map(|(mut s, fu_sum, fu_n)| {
            s.mean_secrecy_rate = if s.ok > 0 { s.mean_secrecy_rate / s.ok as f64 } else { f64::NAN };
            s.mean_sinr_fu = if fu_n > 0 { fu_sum / fu_n as f64 } else { f64::NAN };
            s
        })
        .collect()
}

/// Rows whose solve failed (traces excluded).
pub fn failure_count(table: &ResultTable) -> usize {
    table.rows.iter().filter(|r| r.status != "trace" && !r.is_ok()).count()
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n_m: Option<usize>,
    pub n_f: Option<usize>,
    pub m_users: Option<usize>,
    pub k_users: Option<usize>,
    pub n_coop: Option<usize>,
    pub p_m_db: Option<f64>,
    pub p_f_db: Option<f64>,
    /// Common target of MUs `1..M`.
    pub gamma_mu: Option<f64>,
    /// Common target of every FU.
    pub gamma_fu: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub schemes: Option<Vec<String>>,
    pub sweep: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

/// Experiment file; every key is optional and defaults to the simulation
/// setup (`n_m=10, n_f=4, M=2, K=1, N=2, P_F=40 dB, γ_FU=0.6`).
///
/// ```toml
/// [network]
/// p_f_db = 40
/// gamma_fu = 0.6
///
/// [experiment]
/// schemes = ["stb_om", "stb_smf", "stb_jmf", "benchmark"]
/// sweep = "p_m_db=30:45:3"
/// trials = 100
/// seed = 1
/// ```
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn network(&self) -> NetworkConfig {
        let d = NetworkConfig::simulation_defaults();
        let s = &self.network;
        let m_users = s.m_users.unwrap_or(d.m_users);
        let mut cfg = NetworkConfig {
            n_m: s.n_m.unwrap_or(d.n_m),
            n_f: s.n_f.unwrap_or(d.n_f),
            m_users,
            k_users: s.k_users.unwrap_or(d.k_users),
            n_coop: s.n_coop.unwrap_or(d.n_coop),
            p_m: s.p_m_db.map_or(d.p_m, db_to_linear),
            p_f: s.p_f_db.map_or(d.p_f, db_to_linear),
            gamma_mu: vec![s.gamma_mu.unwrap_or(1.0); m_users.saturating_sub(1)],
            ..d
        };
        cfg = cfg.with_gamma_fu(s.gamma_fu.unwrap_or(0.6));
        cfg
    }

    /// Spec from the file; `None` fields fall back to the defaults
    /// (the four main schemes, `p_m_db=30:45:3`, 100 trials, seed 1).
    pub fn spec(&self) -> Result<ExperimentSpec> {
        let e = &self.experiment;
        let schemes = match &e.schemes {
            Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<Scheme>>>()?,
            None => vec![Scheme::StbOm, Scheme::StbSmf, Scheme::StbJmf, Scheme::Benchmark],
        };
        let sweep = e.sweep.as_deref().unwrap_or("p_m_db=30:45:3").parse()?;
        let spec = ExperimentSpec {
            base: self.network(),
            sweep,
            schemes,
            trials: e.trials.unwrap_or(100),
            seed: e.seed.unwrap_or(1),
            record_timing: true,
            label: None,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Figures the runner can regenerate.
pub const FIGURES: [&str; 6] = ["fig3", "fig6", "fig7", "fig8", "fig9", "fig10"];

fn figure_spec(sweep: Sweep, schemes: Vec<Scheme>, trials: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        base: NetworkConfig::simulation_defaults(),
        sweep,
        schemes,
        trials,
        seed,
        record_timing: true,
        label: None,
    }
}

/// Specs behind a figure. `fig3` is a trace run (see [`run_traces`]).
///
/// | figure | content |
/// |---|---|
/// | fig3 | STB-OM traces at `P_M ∈ {30, 40, 45}` dB |
/// | fig6 | secrecy rate vs `P_M` 30..45 dB, four schemes, `P_F = 40` dB |
/// | fig7 | secrecy rate vs `P_F` 20..40 dB, `P_M = 40` dB |
/// | fig8 | STB-SMF/STB-JMF over the `(P_M, P_F)` grid |
/// | fig9 | FU SINR vs `P_M` |
/// | fig10 | FU SINR vs `P_F` |
pub fn figure_specs(name: &str, trials: usize, seed: u64) -> Result<Vec<ExperimentSpec>> {
    use Scheme::*;
    let pm = || Sweep::range(SweepParam::PmDb, 30.0, 45.0, 3.0);
    let pf = || Sweep::range(SweepParam::PfDb, 20.0, 40.0, 5.0);
    let four = vec![StbOm, StbSmf, StbJmf, Benchmark];
    let specs = match name {
        "fig3" => vec![figure_spec(Sweep::new(SweepParam::PmDb, vec![30.0, 40.0, 45.0]), vec![StbOm], trials, seed)],
        "fig6" => vec![figure_spec(pm()?, four, trials, seed)],
        "fig7" => vec![figure_spec(pf()?, four, trials, seed)],
        "fig8" => pf()?
            .values
            .iter()
            .map(|&f| {
                let mut s = figure_spec(pm()?, vec![StbSmf, StbJmf], trials, seed);
                s.base.p_f = db_to_linear(f);
                s.label = Some(format!("p_f_db={f}"));
                Ok(s)
            })
            .collect::<Result<_>>()?,
        "fig9" => vec![figure_spec(pm()?, vec![StbSmf, StbJmf], trials, seed)],
        "fig10" => vec![figure_spec(pf()?, vec![StbSmf, StbJmf], trials, seed)],
        other => {
            return Err(Error::Config(format!("unknown figure `{other}` (expected one of {})", FIGURES.join(", "))))
        }
    };
    Ok(specs)
}

pub fn run_figure(name: &str, trials: usize, seed: u64, record_timing: bool) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    for mut spec in figure_specs(name, trials, seed)? {
        spec.record_timing = record_timing;
        let part = if name == "fig3" { run_traces(&spec)? } else { run_experiment(&spec)? };
        table.rows.extend(part.rows);
    }
    Ok(table)
}

/// One invariant check of [`verify_batch`].
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Core invariants on `n` fresh instances at the simulation defaults:
/// STB-OM monotonicity and QoS, STB-SMF null-space exactness, STB-JMF
/// rank-one covariances and QoS, benchmark QoS.
pub fn verify_batch(seed: u64, n: usize) -> Vec<Check> {
    let cfg = NetworkConfig::simulation_defaults();
    let per_seed: Vec<Vec<Check>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i);
            let ch = sample_rayleigh_channels(&cfg, s);
            verify_instance(&ch, &cfg, s)
        })
        .collect();
    let mut merged: Vec<Check> = Vec::new();
    for c in per_seed.into_iter().flatten() {
        match merged.iter_mut().find(|m| m.name == c.name) {
            Some(m) if m.passed && !c.passed => *m = c,
            Some(_) => {}
            None => merged.push(c),
        }
    }
    merged
}

fn verify_instance(ch: &ChannelSet, cfg: &NetworkConfig, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        out.push(Check { name: name.into(), passed, detail: format!("seed {seed}: {detail}") })
    };
    let qos = |sol: &BeamformingSolution| crate::stb_jmf::meets_qos(ch, cfg, sol, 1e-6);
    let mu_qos = |sol: &BeamformingSolution| {
        (1..cfg.m_users).all(|m| metrics::sinr_mu(ch, sol, m).map_or(false, |s| s >= cfg.gamma_mu[m - 1] - 1e-6))
    };

    match solve_stb_om(ch, cfg, &StbOmOptions::default()) {
        Ok(sol) => {
            let t = &sol.diagnostics.objective_trace;
            let worst = t.windows(2).map(|p| p[0] - p[1]).fold(0.0, f64::max);
            check("stb_om monotone trace", worst <= 1e-6, format!("largest drop {worst:.3e}"));
            check("stb_om MU QoS", mu_qos(&sol), "SINR targets".into());
        }
        Err(e) => check("stb_om solve", false, e.to_string()),
    }
    match solve_stb_smf(ch, cfg, &StbOmOptions::default()) {
        Ok(sol) => {
            let mut leak: f64 = 0.0;
            for n in 0..cfg.n_coop {
                for w in &sol.w_fu[n] {
                    for h in &ch.h_fbs_mu[n] {
                        leak = leak.max(crate::linalg::row_dot(h, w).norm());
                    }
                }
            }
            let bound = 1e-8 * cfg.p_f.sqrt();
            check("stb_smf null space", leak <= bound, format!("max |h w| {leak:.3e} vs {bound:.3e}"));
            check("stb_smf MU QoS", mu_qos(&sol), "SINR targets".into());
        }
        Err(e) => check("stb_smf solve", false, e.to_string()),
    }
    match solve_stb_jmf(ch, cfg, &JmfOptions { seed, ..Default::default() }) {
        Ok(sol) => {
            let r = sol.diagnostics.max_rank_ratio.unwrap_or(f64::NAN);
            check("stb_jmf rank one", r <= 1e-6, format!("max ratio {r:.3e}"));
            check(
                "stb_jmf randomization unused",
                sol.diagnostics.randomized_blocks == 0,
                format!("{} randomized blocks", sol.diagnostics.randomized_blocks),
            );
            check("stb_jmf QoS", qos(&sol), "MU and FU targets".into());
        }
        Err(e) => check("stb_jmf solve", false, e.to_string()),
    }
    match solve_benchmark(ch, cfg) {
        Ok(sol) => check("benchmark QoS", qos(&sol), "MU and FU targets".into()),
        Err(e) => check("benchmark solve", false, e.to_string()),
    }
    out
}
