//! Seeded, parallel Monte Carlo experiments.
//!
//! Replication `i` draws everything from the stream derived from
//! `(seed, Replication, i)`, and rows are collected in index order, so the
//! output does not depend on the number of workers.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clt::{centering_values, moment_clt_params, standardize_moments, MomentCltParams};
use crate::elliptical::{sample_direction, EllipticalModel, RadiusLaw};
use crate::error::{Error, Result};
use crate::rng::{derive_stream, Purpose};
use crate::spectral::{spatial_sign, SpectralSample};
use crate::sphericity::{run_test_on_spectrum, TestConfig, TestKind, TestReport};
use crate::stats::{self, qq_correlation, rejection_rate};

pub use crate::stats::qq_data;

/// Score thresholds for declaring standardized moments compatible with N(0, 1).
pub const SCORE_MEAN_TOL: f64 = 0.1;
pub const SCORE_VAR_TOL: f64 = 0.15;
pub const SCORE_QQ_MIN: f64 = 0.995;

/// What each replication records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Standardized `p(β̂_1 − β_1)` and `p(β̂_2 − β_2) − v_2` of the raw `B_n`.
    MomentScores,
    T1,
    T2,
    Tm,
    Tlr,
    TlrTilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeDirection {
    #[default]
    FixedE1,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub h: f64,
    #[serde(default)]
    pub direction: SpikeDirection,
}

fn default_replications() -> usize {
    2000
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: EllipticalModel,
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Replaces the model's scatter by `I + h v v′` (the spectrum is ignored).
    #[serde(default)]
    pub spike: Option<Spike>,
    /// Values of `s` for the log-LSS tests.
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    /// `τ` for the moment scores and `T̃_LR`; taken from the radius law when absent.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(model: EllipticalModel, n: usize, replications: usize, seed: u64, statistics: Vec<Statistic>) -> Self {
        ExperimentConfig {
            model,
            n,
            replications,
            seed,
            statistics,
            alpha: default_alpha(),
            spike: None,
            s_grid: None,
            tau: None,
            workers: None,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::domain("replications must be >= 1"));
        }
        if self.n == 0 {
            return Err(Error::domain("sample size n must be >= 1"));
        }
        if self.statistics.is_empty() {
            return Err(Error::domain("no statistics selected"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(spike) = &self.spike {
            if !(spike.h.is_finite() && spike.h >= 0.0) {
                return Err(Error::domain(format!("spike h must be >= 0, got {}", spike.h)));
            }
        }
        let needs_s = self.statistics.iter().any(|s| matches!(s, Statistic::Tlr | Statistic::TlrTilde));
        if needs_s && self.s_grid.as_ref().is_none_or(|g| g.is_empty()) {
            return Err(Error::domain("TLR statistics need a nonempty s_grid"));
        }
        if matches!(self.workers, Some(0)) {
            return Err(Error::domain("workers must be >= 1"));
        }
        Ok(())
    }

    /// The model actually sampled, with the spike applied.
    pub fn effective_model(&self) -> Result<EllipticalModel> {
        match &self.spike {
            None => Ok(self.model.clone()),
            Some(spike) => spiked_model(self.model.p(), *self.model.radius(), spike.h, spike.direction, self.seed),
        }
    }

    pub fn ratio(&self) -> f64 {
        self.model.p() as f64 / self.n as f64
    }
}

/// `Σ = I_p + h v v′` with `v = e₁` or a uniformly random unit vector drawn
/// from the experiment's spike stream.
pub fn spiked_model(p: usize, radius: RadiusLaw, h: f64, direction: SpikeDirection, seed: u64) -> Result<EllipticalModel> {
    if p == 0 {
        return Err(Error::domain("dimension p must be positive"));
    }
    let v = match direction {
        SpikeDirection::FixedE1 => {
            let mut v = vec![0.0; p];
            v[0] = 1.0;
            v
        }
        SpikeDirection::Random => {
            let mut rng = derive_stream(seed, Purpose::SpikeDirection, 0);
            sample_direction(p, &mut rng)?.iter().copied().collect()
        }
    };
    EllipticalModel::spiked(p, radius, h, v)
}

/// Per-replication values; one row per replication, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ReplicationTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["replication".to_string()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Everything a replication needs that does not depend on the draw.
struct Plan {
    model: EllipticalModel,
    n: usize,
    seed: u64,
    statistics: Vec<Statistic>,
    moments: Option<(MomentCltParams, (f64, f64))>,
    test_cfg: TestConfig,
    s_grid: Vec<f64>,
    tau: Option<f64>,
}

/// `τ` used for standardization, and whether it had to be assumed.
fn reference_tau(cfg: &ExperimentConfig) -> (f64, bool) {
    match (cfg.tau, cfg.model.radius().tau()) {
        (Some(t), _) => (t, false),
        (None, Ok(t)) => (t, false),
        (None, Err(_)) => (2.0, true),
    }
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.effective_model()?;
        let c_n = cfg.ratio();
        let (tau, _) = reference_tau(cfg);
        let moments = if cfg.statistics.contains(&Statistic::MomentScores) {
            let params = moment_clt_params(c_n, model.spectrum(), tau)?;
            Some((params, centering_values(c_n, model.spectrum())))
        } else {
            None
        };
        let mut test_cfg = TestConfig::new(cfg.alpha);
        test_cfg.seed = Some(cfg.seed);
        Ok(Plan {
            model,
            n: cfg.n,
            seed: cfg.seed,
            statistics: cfg.statistics.clone(),
            moments,
            test_cfg,
            s_grid: cfg.s_grid.clone().unwrap_or_default(),
            tau: Some(tau),
        })
    }

    fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        for stat in &self.statistics {
            match stat {
                Statistic::MomentScores => cols.extend(["z1".to_string(), "z2".to_string()]),
                Statistic::T1 => cols.extend(["nT1".to_string(), "p_T1".to_string()]),
                Statistic::T2 => cols.extend(["nT2".to_string(), "p_T2".to_string()]),
                Statistic::Tm => cols.extend(["Tm".to_string(), "p_Tm".to_string()]),
                Statistic::Tlr => {
                    for s in &self.s_grid {
                        cols.push(format!("pTLR(s={s})"));
                        cols.push(format!("p_TLR(s={s})"));
                    }
                }
                Statistic::TlrTilde => {
                    for s in &self.s_grid {
                        cols.push(format!("pTLR_tilde(s={s})"));
                        cols.push(format!("p_TLR_tilde(s={s})"));
                    }
                }
            }
        }
        cols
    }

    fn replicate(&self, index: u64) -> Result<Vec<f64>> {
        let mut rng = derive_stream(self.seed, Purpose::Replication, index);
        let x = self.model.sample(self.n, &mut rng)?;
        let needs_raw = self.statistics.iter().any(|s| matches!(s, Statistic::MomentScores | Statistic::TlrTilde));
        let needs_sign = self
            .statistics
            .iter()
            .any(|s| matches!(s, Statistic::T1 | Statistic::T2 | Statistic::Tm | Statistic::Tlr));
        let raw = if needs_raw { Some(SpectralSample::from_data(&x)?) } else { None };
        let sign = if needs_sign {
            Some(SpectralSample::from_data(&spatial_sign(&x)?)?)
        } else {
            None
        };
        let mut row = Vec::new();
        let push = |row: &mut Vec<f64>, r: TestReport| {
            row.push(r.statistic);
            row.push(r.p_value);
        };
        for stat in &self.statistics {
            match stat {
                Statistic::MomentScores => {
                    let spec = raw.as_ref().expect("raw spectrum computed");
                    let (params, centering) = self.moments.as_ref().expect("moment parameters computed");
                    let (z1, z2) = standardize_moments(spec.moment(1), spec.moment(2), spec.p(), params, *centering)?;
                    row.push(z1);
                    row.push(z2);
                }
                Statistic::T1 | Statistic::T2 | Statistic::Tm => {
                    let kind = match stat {
                        Statistic::T1 => TestKind::T1,
                        Statistic::T2 => TestKind::T2,
                        _ => TestKind::Tm,
                    };
                    push(&mut row, run_test_on_spectrum(kind, sign.as_ref().expect("sign spectrum"), &self.test_cfg)?);
                }
                Statistic::Tlr => {
                    for &s in &self.s_grid {
                        let cfg = self.test_cfg.clone().with_s(s);
                        let r = run_test_on_spectrum(TestKind::Tlr, sign.as_ref().expect("sign spectrum"), &cfg);
                        push_defined(&mut row, r)?;
                    }
                }
                Statistic::TlrTilde => {
                    for &s in &self.s_grid {
                        let mut cfg = self.test_cfg.clone().with_s(s);
                        cfg.tau = self.tau;
                        let r = run_test_on_spectrum(TestKind::TlrTilde, raw.as_ref().expect("raw spectrum"), &cfg);
                        push_defined(&mut row, r)?;
                    }
                }
            }
        }
        Ok(row)
    }
}

/// Log-LSS tests are undefined when `z(s)` falls below the top eigenvalue;
/// such replications are recorded as NaN and counted in the summary.
fn push_defined(row: &mut Vec<f64>, report: Result<TestReport>) -> Result<()> {
    match report {
        Ok(r) => {
            row.push(r.statistic);
            row.push(r.p_value);
            Ok(())
        }
        Err(Error::AboveSupport { .. }) => {
            row.push(f64::NAN);
            row.push(f64::NAN);
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))
}

/// Run all replications of `cfg`.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<ReplicationTable> {
    let plan = Plan::new(cfg)?;
    let rows = pool(cfg.workers)?.install(|| {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|i| plan.replicate(i))
            .collect::<Result<Vec<_>>>()
    })?;
    log::debug!("{} replications of {:?} done", rows.len(), cfg.statistics);
    Ok(ReplicationTable {
        columns: plan.columns(),
        rows,
    })
}

/// Evaluate replication `index` alone, without a worker pool.
pub fn run_single(cfg: &ExperimentConfig, index: u64) -> Result<Vec<f64>> {
    Plan::new(cfg)?.replicate(index)
}

/// `(rejections/R, √(f(1−f)/R))` with rejection meaning `p-value < alpha`.
pub fn empirical_size_power(reports: &[TestReport], alpha: f64) -> Result<(f64, f64)> {
    if reports.is_empty() {
        return Err(Error::domain("no reports to aggregate"));
    }
    let hits = reports.iter().filter(|r| r.p_value < alpha).count();
    Ok(rejection_rate(hits, reports.len()))
}

/// Same as [`empirical_size_power`] from raw p-values.
pub fn rejection_frequency(p_values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::domain("no p-values to aggregate"));
    }
    let hits = p_values.iter().filter(|&&p| p < alpha).count();
    Ok(rejection_rate(hits, p_values.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    /// Replications where the statistic is undefined (recorded as NaN).
    pub undefined: usize,
    pub mean: f64,
    pub variance: f64,
    pub qq_correlation: Option<f64>,
    /// Rejection frequency and its standard error, for p-value columns.
    pub rejection: Option<(f64, f64)>,
    /// KS p-value against U(0, 1), for p-value columns.
    pub ks_uniform_pvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub p: usize,
    pub n: usize,
    pub c_n: f64,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub radius: String,
    pub tau: f64,
    pub tau_assumed: bool,
    pub law_conforming: bool,
    /// True when the radius law or the observed scores contradict the moment condition.
    pub nonconformance_flagged: bool,
    pub flags: Vec<String>,
    pub columns: Vec<ColumnSummary>,
}

/// Summarize a table produced from `cfg`.
pub fn summarize(cfg: &ExperimentConfig, table: &ReplicationTable) -> Result<ExperimentSummary> {
    let (tau, tau_assumed) = reference_tau(cfg);
    let law_conforming = cfg.model.radius().is_conforming();
    let mut flags = Vec::new();
    let mut nonconforming = !law_conforming;
    if !law_conforming {
        flags.push(format!(
            "radius law {} violates the fourth-moment condition; scores standardized with tau = {tau}",
            cfg.model.radius().name()
        ));
    }
    let mut columns = Vec::new();
    for (j, name) in table.columns.iter().enumerate() {
        let all: Vec<f64> = table.rows.iter().map(|r| r[j]).collect();
        let values: Vec<f64> = all.iter().copied().filter(|v| !v.is_nan()).collect();
        let undefined = all.len() - values.len();
        if undefined > 0 && !name.starts_with("p_") {
            flags.push(format!("{name}: undefined in {undefined} of {} replications", all.len()));
        }
        let is_p = name.starts_with("p_");
        let qq = if !is_p && values.len() >= 10 && values.iter().all(|v| v.is_finite()) {
            Some(qq_correlation(&values)?)
        } else {
            None
        };
        let (rejection, ks) = if is_p && !values.is_empty() {
            let (_, ks_p) = stats::ks_test(&values, |u| u.clamp(0.0, 1.0));
            (Some(rejection_frequency(&values, cfg.alpha)?), Some(ks_p))
        } else {
            (None, None)
        };
        let summary = ColumnSummary {
            name: name.clone(),
            undefined,
            mean: stats::mean(&values),
            variance: stats::variance(&values),
            qq_correlation: qq,
            rejection,
            ks_uniform_pvalue: ks,
        };
        if name == "z1" || name == "z2" {
            let ok = summary.mean.abs() <= SCORE_MEAN_TOL
                && (summary.variance - 1.0).abs() <= SCORE_VAR_TOL
                && qq.is_some_and(|q| q >= SCORE_QQ_MIN);
            if !ok {
                nonconforming = true;
                flags.push(format!(
                    "{name}: mean {:.4}, variance {:.4}, QQ correlation {:.4} are not compatible with N(0,1)",
                    summary.mean,
                    summary.variance,
                    qq.unwrap_or(f64::NAN)
                ));
            }
        }
        columns.push(summary);
    }
    Ok(ExperimentSummary {
        p: cfg.model.p(),
        n: cfg.n,
        c_n: cfg.ratio(),
        replications: table.rows.len(),
        seed: cfg.seed,
        alpha: cfg.alpha,
        radius: cfg.model.radius().name(),
        tau,
        tau_assumed,
        law_conforming,
        nonconformance_flagged: nonconforming,
        flags,
        columns,
    })
}

/// Run `cfg` and write `replications.csv`, `qq.csv` and `summary.json` into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<ExperimentSummary> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let table = run_replications(cfg)?;
    let summary = summarize(cfg, &table)?;
    table.write_csv(std::fs::File::create(dir.join("replications.csv"))?)?;
    write_qq_csv(&table, std::fs::File::create(dir.join("qq.csv"))?)?;
    let mut f = std::fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    Ok(summary)
}

/// Long-format QQ pairs `(column, theoretical, empirical)` for every statistic column.
pub fn write_qq_csv<W: Write>(table: &ReplicationTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["column", "theoretical", "empirical"])?;
    for (j, name) in table.columns.iter().enumerate() {
        if name.starts_with("p_") {
            continue;
        }
        let values: Vec<f64> = table.rows.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
        if values.len() < 10 {
            continue;
        }
        for (t, e) in qq_data(&values)? {
            out.write_record([name.clone(), t.to_string(), e.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::DiscreteSpectrum;

    fn small(stats: Vec<Statistic>) -> ExperimentConfig {
        let model = EllipticalModel::new(20, RadiusLaw::Normal, &DiscreteSpectrum::identity()).unwrap();
        let mut cfg = ExperimentConfig::new(model, 40, 24, 7, stats);
        cfg.s_grid = Some(vec![0.3]);
        cfg
    }

    #[test]
    fn single_replication_matches_direct_evaluation() {
        let mut cfg = small(vec![Statistic::Tm]);
        cfg.replications = 1;
        let table = run_replications(&cfg).unwrap();
        let mut rng = derive_stream(7, Purpose::Replication, 0);
        let x = cfg.model.sample(40, &mut rng).unwrap();
        let spec = SpectralSample::from_data(&spatial_sign(&x).unwrap()).unwrap();
        let mut tc = TestConfig::new(0.05);
        tc.seed = Some(7);
        let r = run_test_on_spectrum(TestKind::Tm, &spec, &tc).unwrap();
        assert_eq!(table.rows, vec![vec![r.statistic, r.p_value]]);
        assert_eq!(run_single(&cfg, 0).unwrap(), table.rows[0]);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let all = vec![
            Statistic::MomentScores,
            Statistic::T1,
            Statistic::T2,
            Statistic::Tm,
            Statistic::Tlr,
            Statistic::TlrTilde,
        ];
        let mut cfg = small(all);
        let mut tables = Vec::new();
        for w in [1, 4, 8] {
            cfg.workers = Some(w);
            tables.push(run_replications(&cfg).unwrap());
        }
        assert_eq!(tables[0], tables[1]);
        assert_eq!(tables[0], tables[2]);
        assert_eq!(tables[0].columns.len(), 12);
        assert_eq!(tables[0].rows.len(), 24);
    }

    #[test]
    fn spiked_model_examples() {
        let m = spiked_model(100, RadiusLaw::Normal, 0.3, SpikeDirection::FixedE1, 1).unwrap();
        assert_eq!(m.spectrum().max_atom(), 1.3);
        assert!((m.spectrum().moment(1) - (1.0 + 0.3 / 100.0)).abs() < 1e-15);
        let id = spiked_model(10, RadiusLaw::Normal, 0.0, SpikeDirection::Random, 1).unwrap();
        assert_eq!(id.spectrum(), &DiscreteSpectrum::identity());
        assert!(spiked_model(10, RadiusLaw::Normal, -0.1, SpikeDirection::FixedE1, 1).is_err());
        let a = spiked_model(10, RadiusLaw::Normal, 1.0, SpikeDirection::Random, 3).unwrap();
        let b = spiked_model(10, RadiusLaw::Normal, 1.0, SpikeDirection::Random, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn size_power_edges() {
        let model = EllipticalModel::new(10, RadiusLaw::Normal, &DiscreteSpectrum::identity()).unwrap();
        let x = model.sample(20, &mut derive_stream(1, Purpose::Oracle, 0)).unwrap();
        let r = crate::sphericity::run_test(TestKind::Tm, &x, &TestConfig::new(0.05)).unwrap();
        let mut yes = r.clone();
        yes.p_value = 0.0;
        let mut no = r;
        no.p_value = 1.0;
        assert_eq!(empirical_size_power(&[yes.clone(), yes.clone()], 0.05).unwrap(), (1.0, 0.0));
        assert_eq!(empirical_size_power(&[no.clone()], 0.05).unwrap(), (0.0, 0.0));
        assert_eq!(empirical_size_power(&[yes, no], 0.05).unwrap().0, 0.5);
        assert!(empirical_size_power(&[], 0.05).is_err());
    }

    #[test]
    fn config_validation_and_json() {
        let cfg = small(vec![Statistic::Tlr]);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let mut bad = cfg.clone();
        bad.s_grid = None;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.replications = 0;
        assert!(bad.validate().is_err());
        let minimal = r#"{"model":{"p":4,"radius":{"kind":"normal"},"spectrum":{"atoms":[1.0],"weights":[1.0]}},
                          "n":8,"seed":1,"statistics":["tm"]}"#;
        let cfg: ExperimentConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!((cfg.replications, cfg.alpha), (2000, 0.05));
    }

    #[test]
    fn student_t_is_flagged() {
        let model = EllipticalModel::new(20, RadiusLaw::StudentT { dof: 6.0 }, &DiscreteSpectrum::identity()).unwrap();
        let cfg = ExperimentConfig::new(model, 40, 20, 1, vec![Statistic::MomentScores]);
        let table = run_replications(&cfg).unwrap();
        let summary = summarize(&cfg, &table).unwrap();
        assert!(summary.tau_assumed && !summary.law_conforming && summary.nonconformance_flagged);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(vec![Statistic::MomentScores, Statistic::Tm]);
        let summary = run_to_dir(&cfg, dir.path()).unwrap();
        assert_eq!(summary.columns.len(), 4);
        let csv = std::fs::read_to_string(dir.path().join("replications.csv")).unwrap();
        assert!(csv.starts_with("replication,z1,z2,Tm,p_Tm\n"));
        assert_eq!(csv.lines().count(), 25);
        let qq = std::fs::read_to_string(dir.path().join("qq.csv")).unwrap();
        assert_eq!(qq.lines().count(), 1 + 3 * 24);
        let back: ExperimentSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back, summary);
    }
}
