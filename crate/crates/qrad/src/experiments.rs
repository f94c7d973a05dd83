//! Reproducible experiment drivers: sample-size scaling, parameter-size
//! scaling on full and restricted domains, estimator convergence in the
//! trial count, and the generalization-gap grid.
//!
//! Every driver takes a spec and a worker pool, and every output is a
//! pure function of `(spec, seed)`: rerunning with the same spec writes
//! byte-identical CSVs at any thread count. Each CSV starts with a `#`
//! comment preamble carrying the tool version, seed, and resolved spec,
//! and is accompanied by a JSON manifest (which adds wall time, so only
//! the CSVs are covered by the byte-identity guarantee).
//!
//! Paper-scale presets reproduce the reference protocols and need an
//! `eval_budget` override to run; desk presets finish on a laptop.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{loglog_fit, RegressionResult};
use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::rademacher::{
    estimate, estimate_scaling_sweep, EstimatorConfig, ModelSource, RademacherEstimate,
    SweepAxis, DEFAULT_EVAL_BUDGET,
};
use crate::training::{gap_experiment, GapConfig, GapRow, LossKind, SpsaConfig};

/// 17 significant digits: round-trips f64 exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// Sample-size (M) scaling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ScalingMSpec {
    pub n_qubits: usize,
    pub l: usize,
    pub m_values: Vec<usize>,
    pub n_trials: usize,
    pub n_theta: usize,
    pub scale: f64,
    pub seed: u64,
    pub eval_budget: u64,
}

impl ScalingMSpec {
    /// Reference protocol: L = 5, M in {10, 100, 200, 400, 800},
    /// 500 trials of 100000 candidates. Needs a raised budget.
    pub fn paper(seed: u64) -> Self {
        Self {
            n_qubits: 5,
            l: 5,
            m_values: vec![10, 100, 200, 400, 800],
            n_trials: 500,
            n_theta: 100_000,
            scale: 1.0,
            seed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        }
    }

    /// Same sweep at 100 trials of 2000 candidates.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_trials: 100,
            n_theta: 2000,
            ..Self::paper(seed)
        }
    }

    fn base_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            n_trials: self.n_trials,
            n_data: 1, // swept
            n_theta: self.n_theta,
            l: self.l,
            scale: self.scale,
            n_qubits: self.n_qubits,
            seed: self.seed,
            model_source: ModelSource::SampledPerSeed,
            eval_budget: self.eval_budget,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingMRow {
    pub m: usize,
    pub g_ave: f64,
    pub g_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingMResult {
    pub spec: ScalingMSpec,
    pub rows: Vec<ScalingMRow>,
    /// Log-log fit of g_ave against M.
    pub fit: RegressionResult,
    pub wall_time_secs: f64,
}

pub fn run_scaling_m(spec: &ScalingMSpec, par: &Parallelism) -> Result<ScalingMResult> {
    let start = Instant::now();
    let estimates = estimate_scaling_sweep(
        &spec.base_config(),
        SweepAxis::DataCount,
        &spec.m_values,
        par,
    )
    .map_err(|e| e.context("sample-size scaling sweep"))?;
    let rows: Vec<ScalingMRow> = spec
        .m_values
        .iter()
        .zip(&estimates)
        .map(|(&m, est)| ScalingMRow {
            m,
            g_ave: est.g_ave,
            g_err: est.g_err,
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.g_ave).collect();
    let fit = loglog_fit(&xs, &ys).map_err(|e| e.context("sample-size scaling log-log fit"))?;
    Ok(ScalingMResult {
        spec: spec.clone(),
        rows,
        fit,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Parameter-size (L) scaling, full vs restricted domain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ScalingLSpec {
    pub n_qubits: usize,
    pub l_values: Vec<usize>,
    pub n_data: usize,
    pub n_trials: usize,
    /// Candidate budget per unit of L: each point uses `n_theta_per_l * L`.
    pub n_theta_per_l: usize,
    pub seed: u64,
    pub eval_budget: u64,
}

impl ScalingLSpec {
    /// Reference protocol: N_data = 200, 500 trials, 50000 L candidates.
    pub fn paper(seed: u64) -> Self {
        Self {
            n_qubits: 5,
            l_values: vec![4, 8, 12, 16, 20],
            n_data: 200,
            n_trials: 500,
            n_theta_per_l: 50_000,
            seed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self {
            l_values: vec![4, 8, 12, 16],
            n_trials: 100,
            n_theta_per_l: 1000,
            ..Self::paper(seed)
        }
    }

    fn base_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            n_trials: self.n_trials,
            n_data: self.n_data,
            n_theta: self.n_theta_per_l,
            l: 1, // swept
            scale: 1.0,
            n_qubits: self.n_qubits,
            seed: self.seed,
            model_source: ModelSource::SampledPerSeed,
            eval_budget: self.eval_budget,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingLRow {
    pub l: usize,
    /// "full" or "restricted".
    pub domain: &'static str,
    pub scale: f64,
    pub n_theta: usize,
    pub g_ave: f64,
    pub g_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingLResult {
    pub spec: ScalingLSpec,
    pub rows: Vec<ScalingLRow>,
    pub fit_full: RegressionResult,
    pub fit_restricted: RegressionResult,
    pub wall_time_secs: f64,
}

pub fn run_scaling_l(spec: &ScalingLSpec, par: &Parallelism) -> Result<ScalingLResult> {
    let start = Instant::now();
    let base = spec.base_config();
    let full = estimate_scaling_sweep(&base, SweepAxis::ParamCountFull, &spec.l_values, par)
        .map_err(|e| e.context("parameter scaling sweep (full domain)"))?;
    let restricted =
        estimate_scaling_sweep(&base, SweepAxis::ParamCountRestricted, &spec.l_values, par)
            .map_err(|e| e.context("parameter scaling sweep (restricted domain)"))?;

    let mut rows = Vec::with_capacity(2 * spec.l_values.len());
    let mut to_rows = |ests: &[RademacherEstimate], domain: &'static str| {
        for (&l, est) in spec.l_values.iter().zip(ests) {
            rows.push(ScalingLRow {
                l,
                domain,
                scale: est.config_echo.scale,
                n_theta: est.config_echo.n_theta,
                g_ave: est.g_ave,
                g_err: est.g_err,
            });
        }
    };
    to_rows(&full, "full");
    to_rows(&restricted, "restricted");

    let ls: Vec<f64> = spec.l_values.iter().map(|&l| l as f64).collect();
    let full_ys: Vec<f64> = full.iter().map(|e| e.g_ave).collect();
    let restr_ys: Vec<f64> = restricted.iter().map(|e| e.g_ave).collect();
    let fit_full =
        loglog_fit(&ls, &full_ys).map_err(|e| e.context("parameter scaling fit (full)"))?;
    let fit_restricted = loglog_fit(&ls, &restr_ys)
        .map_err(|e| e.context("parameter scaling fit (restricted)"))?;
    Ok(ScalingLResult {
        spec: spec.clone(),
        rows,
        fit_full,
        fit_restricted,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Convergence in the trial count
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSpec {
    pub n_qubits: usize,
    pub l_values: Vec<usize>,
    pub n_data: usize,
    pub n_trials: usize,
    pub n_theta_per_l: usize,
    pub scale: f64,
    pub seed: u64,
    pub eval_budget: u64,
}

impl ConvergenceSpec {
    /// Reference protocol: L in {4, 8, 12, 16, 20}, N_data = 200,
    /// N_theta = 50000 L, 500 trials.
    pub fn paper(seed: u64) -> Self {
        Self {
            n_qubits: 5,
            l_values: vec![4, 8, 12, 16, 20],
            n_data: 200,
            n_trials: 500,
            n_theta_per_l: 50_000,
            scale: 1.0,
            seed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self {
            l_values: vec![4, 8],
            n_data: 50,
            n_trials: 200,
            n_theta_per_l: 250,
            ..Self::paper(seed)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub l: usize,
    /// Prefix length: the running mean uses trials `0..n_trials`.
    pub n_trials: usize,
    pub prefix_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceResult {
    pub spec: ConvergenceSpec,
    pub rows: Vec<ConvergenceRow>,
    pub wall_time_secs: f64,
}

/// One estimator run per L, reused for every prefix: the running mean of
/// per-trial maxima after n trials is statistically identical to an
/// n-trial run, so the whole convergence curve costs one run.
pub fn run_convergence(spec: &ConvergenceSpec, par: &Parallelism) -> Result<ConvergenceResult> {
    let start = Instant::now();
    if spec.l_values.is_empty() {
        return Err(Error::InvalidArgument("sweep must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(spec.l_values.len() * spec.n_trials);
    for &l in &spec.l_values {
        let cfg = EstimatorConfig {
            n_trials: spec.n_trials,
            n_data: spec.n_data,
            n_theta: spec.n_theta_per_l * l,
            l,
            scale: spec.scale,
            n_qubits: spec.n_qubits,
            seed: spec.seed,
            model_source: ModelSource::SampledPerSeed,
            eval_budget: spec.eval_budget,
        };
        let est = estimate(&cfg, par).map_err(|e| e.context(format!("convergence run L={l}")))?;
        let mut acc = 0.0;
        for (i, v) in est.per_trial_values.iter().enumerate() {
            acc += v;
            rows.push(ConvergenceRow {
                l,
                n_trials: i + 1,
                prefix_mean: acc / (i + 1) as f64,
            });
        }
    }
    Ok(ConvergenceResult {
        spec: spec.clone(),
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Generalization gap
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GapSpec {
    pub config: GapConfig,
}

impl GapSpec {
    /// Reference protocol: L in {4, 5, 8}, M in {25, 100}, 20 repeats,
    /// 5000 epochs, test size 1000.
    pub fn paper(seed: u64) -> Self {
        Self {
            config: GapConfig {
                n_qubits: 5,
                l_values: vec![4, 5, 8],
                m_values: vec![25, 100],
                n_repeats: 20,
                test_size: 1000,
                spsa: SpsaConfig {
                    seed,
                    ..SpsaConfig::default()
                },
                loss: LossKind::Rmse,
                seed,
            },
        }
    }

    pub fn desk(seed: u64) -> Self {
        let mut spec = Self::paper(seed);
        spec.config.l_values = vec![5];
        spec.config.n_repeats = 10;
        spec.config.spsa.max_epochs = 1500;
        spec
    }
}

/// Box-plot summary of one (L, M) cell: Tukey hinges and 1.5 IQR whiskers
/// clamped to observed points.
#[derive(Debug, Clone, Serialize)]
pub struct GapCellSummary {
    pub l: usize,
    pub m: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapResult {
    pub spec: GapSpec,
    pub rows: Vec<GapRow>,
    pub summaries: Vec<GapCellSummary>,
    pub wall_time_secs: f64,
}

pub fn run_gap(spec: &GapSpec, par: &Parallelism) -> Result<GapResult> {
    let start = Instant::now();
    let rows = gap_experiment(&spec.config, par).map_err(|e| e.context("gap experiment"))?;
    let mut summaries = Vec::new();
    for &l in &spec.config.l_values {
        for &m in &spec.config.m_values {
            let gaps: Vec<f64> = rows
                .iter()
                .filter(|r| r.l == l && r.m == m)
                .map(|r| r.gap)
                .collect();
            let (median, q1, q3) = quartiles(&gaps);
            let iqr = q3 - q1;
            let lo_fence = q1 - 1.5 * iqr;
            let hi_fence = q3 + 1.5 * iqr;
            let whisker_lo = gaps
                .iter()
                .copied()
                .filter(|g| *g >= lo_fence)
                .fold(f64::INFINITY, f64::min);
            let whisker_hi = gaps
                .iter()
                .copied()
                .filter(|g| *g <= hi_fence)
                .fold(f64::NEG_INFINITY, f64::max);
            summaries.push(GapCellSummary {
                l,
                m,
                median,
                q1,
                q3,
                whisker_lo,
                whisker_hi,
            });
        }
    }
    Ok(GapResult {
        spec: spec.clone(),
        rows,
        summaries,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// (median, Q1, Q3) by Tukey hinges: medians of the lower and upper
/// halves, the overall median shared by both halves when n is odd.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN gaps"));
    let median_of = |s: &[f64]| -> f64 {
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    };
    let n = sorted.len();
    let median = median_of(&sorted);
    let half = n / 2;
    let (lower, upper) = if n % 2 == 0 {
        (&sorted[..half], &sorted[half..])
    } else {
        (&sorted[..=half], &sorted[half..])
    };
    (median, median_of(lower), median_of(upper))
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

const TOOL_NAME: &str = "qrad";
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Build identifier embedded in manifests and CSV preambles.
pub fn build_id() -> String {
    format!("{TOOL_NAME} {TOOL_VERSION}")
}

fn csv_preamble<S: Serialize>(seed: u64, spec: &S) -> Result<String> {
    let spec_json = serde_json::to_string(spec)?;
    Ok(format!(
        "# tool: {}\n# seed: {}\n# spec: {}\n",
        build_id(),
        seed,
        spec_json
    ))
}

/// Write one CSV: `#` preamble with tool/seed/spec, then header and rows.
pub fn write_csv<S: Serialize>(
    path: &Path,
    seed: u64,
    spec: &S,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(csv_preamble(seed, spec)?.as_bytes())?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest<S: Serialize>(path: &Path, seed: u64, spec: &S, extra: serde_json::Value) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "seed": seed,
        "spec": serde_json::to_value(spec)?,
        "results": extra,
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

impl ScalingMResult {
    /// Writes `scaling_m.csv` and `scaling_m_manifest.json`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("scaling_m.csv");
        write_csv(
            &csv_path,
            self.spec.seed,
            &self.spec,
            &["m", "g_ave", "g_err"],
            self.rows.iter().map(|r| {
                vec![r.m.to_string(), fmt_float(r.g_ave), fmt_float(r.g_err)]
            }),
        )?;
        let manifest_path = dir.join("scaling_m_manifest.json");
        write_manifest(
            &manifest_path,
            self.spec.seed,
            &self.spec,
            serde_json::json!({ "fit": self.fit, "wall_time_secs": self.wall_time_secs }),
        )?;
        Ok(vec![csv_path, manifest_path])
    }
}

impl ScalingLResult {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("scaling_l.csv");
        write_csv(
            &csv_path,
            self.spec.seed,
            &self.spec,
            &["l", "domain", "scale", "n_theta", "g_ave", "g_err"],
            self.rows.iter().map(|r| {
                vec![
                    r.l.to_string(),
                    r.domain.to_string(),
                    fmt_float(r.scale),
                    r.n_theta.to_string(),
                    fmt_float(r.g_ave),
                    fmt_float(r.g_err),
                ]
            }),
        )?;
        let manifest_path = dir.join("scaling_l_manifest.json");
        write_manifest(
            &manifest_path,
            self.spec.seed,
            &self.spec,
            serde_json::json!({
                "fit_full": self.fit_full,
                "fit_restricted": self.fit_restricted,
                "wall_time_secs": self.wall_time_secs,
            }),
        )?;
        Ok(vec![csv_path, manifest_path])
    }
}

impl ConvergenceResult {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("convergence.csv");
        write_csv(
            &csv_path,
            self.spec.seed,
            &self.spec,
            &["l", "n_trials", "prefix_mean"],
            self.rows.iter().map(|r| {
                vec![
                    r.l.to_string(),
                    r.n_trials.to_string(),
                    fmt_float(r.prefix_mean),
                ]
            }),
        )?;
        let manifest_path = dir.join("convergence_manifest.json");
        write_manifest(
            &manifest_path,
            self.spec.seed,
            &self.spec,
            serde_json::json!({ "wall_time_secs": self.wall_time_secs }),
        )?;
        Ok(vec![csv_path, manifest_path])
    }
}

impl GapResult {
    /// Writes `gap.csv` (raw grid), `gap_summary.csv` (box-plot stats per
    /// cell), and the manifest.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let seed = self.spec.config.seed;
        let csv_path = dir.join("gap.csv");
        write_csv(
            &csv_path,
            seed,
            &self.spec,
            &["l", "m", "repeat", "train_loss", "test_loss", "gap", "epochs_used"],
            self.rows.iter().map(|r| {
                vec![
                    r.l.to_string(),
                    r.m.to_string(),
                    r.repeat.to_string(),
                    fmt_float(r.train_loss),
                    fmt_float(r.test_loss),
                    fmt_float(r.gap),
                    r.epochs_used.to_string(),
                ]
            }),
        )?;
        let summary_path = dir.join("gap_summary.csv");
        write_csv(
            &summary_path,
            seed,
            &self.spec,
            &["l", "m", "median", "q1", "q3", "whisker_lo", "whisker_hi"],
            self.summaries.iter().map(|s| {
                vec![
                    s.l.to_string(),
                    s.m.to_string(),
                    fmt_float(s.median),
                    fmt_float(s.q1),
                    fmt_float(s.q3),
                    fmt_float(s.whisker_lo),
                    fmt_float(s.whisker_hi),
                ]
            }),
        )?;
        let manifest_path = dir.join("gap_manifest.json");
        write_manifest(
            &manifest_path,
            seed,
            &self.spec,
            serde_json::json!({ "wall_time_secs": self.wall_time_secs }),
        )?;
        Ok(vec![csv_path, summary_path, manifest_path])
    }
}

/// Write an estimator run as `trial_index,trial_max` rows plus a summary
/// row, the `estimate` subcommand's output format.
pub fn write_estimate_csv(path: &Path, est: &RademacherEstimate) -> Result<()> {
    let cfg = &est.config_echo;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(csv_preamble(cfg.seed, cfg)?.as_bytes())?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(["trial_index", "trial_max", "g_ave", "g_err"])?;
    for (i, v) in est.per_trial_values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_float(*v), String::new(), String::new()])?;
    }
    w.write_record([
        "summary".to_string(),
        String::new(),
        fmt_float(est.g_ave),
        fmt_float(est.g_err),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_scaling_m(seed: u64) -> ScalingMSpec {
        ScalingMSpec {
            n_qubits: 2,
            l: 2,
            m_values: vec![4, 8, 16],
            n_trials: 8,
            n_theta: 16,
            scale: 1.0,
            seed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        }
    }

    #[test]
    fn scaling_m_produces_rows_and_fit() {
        let spec = tiny_scaling_m(5);
        let res = run_scaling_m(&spec, &Parallelism::Sequential).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert_eq!(res.fit.n_points, 3);
    }

    #[test]
    fn degenerate_m_sweep_propagates_fit_error() {
        let mut spec = tiny_scaling_m(6);
        spec.m_values = vec![8, 8];
        let err = run_scaling_m(&spec, &Parallelism::Sequential).unwrap_err();
        let text = err.to_string();
        assert!(
            text.contains("log-log fit") && text.contains("at least 3"),
            "unexpected error: {text}"
        );
    }

    #[test]
    fn scaling_l_couplings_hold() {
        let spec = ScalingLSpec {
            n_qubits: 2,
            l_values: vec![1, 2, 4],
            n_data: 4,
            n_trials: 4,
            n_theta_per_l: 8,
            seed: 7,
            eval_budget: DEFAULT_EVAL_BUDGET,
        };
        let res = run_scaling_l(&spec, &Parallelism::Sequential).unwrap();
        assert_eq!(res.rows.len(), 6);
        for row in &res.rows {
            assert_eq!(row.n_theta, 8 * row.l);
            if row.domain == "restricted" {
                // Box diameter sqrt(L) * (2 pi scale) is exactly 1.
                let side = std::f64::consts::TAU * row.scale;
                assert_abs_diff_eq!(side * (row.l as f64).sqrt(), 1.0, epsilon = 1e-15);
            } else {
                assert_eq!(row.scale, 1.0);
            }
        }
    }

    #[test]
    fn convergence_prefix_means_are_running_means() {
        let spec = ConvergenceSpec {
            n_qubits: 2,
            l_values: vec![2],
            n_data: 4,
            n_trials: 10,
            n_theta_per_l: 4,
            scale: 1.0,
            seed: 8,
            eval_budget: DEFAULT_EVAL_BUDGET,
        };
        let res = run_convergence(&spec, &Parallelism::Sequential).unwrap();
        assert_eq!(res.rows.len(), 10);
        // Final prefix mean equals the full-run g_ave bit-for-bit.
        let cfg = EstimatorConfig {
            n_trials: 10,
            n_data: 4,
            n_theta: 8,
            l: 2,
            scale: 1.0,
            n_qubits: 2,
            seed: 8,
            model_source: ModelSource::SampledPerSeed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        };
        let est = estimate(&cfg, &Parallelism::Sequential).unwrap();
        assert_eq!(res.rows.last().unwrap().prefix_mean.to_bits(), est.g_ave.to_bits());
        // And each row is the mean of the prefix.
        for row in &res.rows {
            let mean: f64 = est.per_trial_values[..row.n_trials].iter().sum::<f64>()
                / row.n_trials as f64;
            assert_eq!(row.prefix_mean.to_bits(), mean.to_bits());
        }
    }

    #[test]
    fn quartiles_reference_case() {
        let (median, q1, q3) = quartiles(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(median, 2.5);
        assert_eq!(q1, 1.5);
        assert_eq!(q3, 3.5);

        let (median, q1, q3) = quartiles(&[5.0, 1.0, 3.0]);
        assert_eq!(median, 3.0);
        assert_eq!(q1, 2.0);
        assert_eq!(q3, 4.0);
    }

    #[test]
    fn gap_run_counts_cells() {
        let spec = GapSpec {
            config: GapConfig {
                n_qubits: 2,
                l_values: vec![2],
                m_values: vec![4, 6],
                n_repeats: 3,
                test_size: 10,
                spsa: SpsaConfig {
                    max_epochs: 5,
                    ..SpsaConfig::default()
                },
                loss: LossKind::Rmse,
                seed: 9,
            },
        };
        let res = run_gap(&spec, &Parallelism::Sequential).unwrap();
        assert_eq!(res.rows.len(), 6);
        assert_eq!(res.summaries.len(), 2);
        for s in &res.summaries {
            assert!(s.q1 <= s.median && s.median <= s.q3);
            assert!(s.whisker_lo <= s.q1 && s.q3 <= s.whisker_hi);
        }
    }

    #[test]
    fn csv_outputs_are_deterministic_and_carry_seed() {
        let spec = tiny_scaling_m(11);
        let res = run_scaling_m(&spec, &Parallelism::Sequential).unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        res.write(dir1.path()).unwrap();
        // A second full run, not just a rewrite.
        let res2 = run_scaling_m(&spec, &Parallelism::Sequential).unwrap();
        res2.write(dir2.path()).unwrap();
        let a = std::fs::read(dir1.path().join("scaling_m.csv")).unwrap();
        let b = std::fs::read(dir2.path().join("scaling_m.csv")).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# tool: qrad"));
        assert!(text.contains("# seed: 11"));
        assert!(text.contains("\"seed\":11"));
        assert!(text.contains("m,g_ave,g_err"));
        // 17 significant digits round-trip: parse the first data row back.
        let line = text.lines().nth(4).unwrap();
        let g: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(g, res.rows[0].g_ave);
    }

    #[test]
    fn estimate_csv_has_trials_and_summary() {
        let cfg = EstimatorConfig {
            n_trials: 4,
            n_data: 3,
            n_theta: 2,
            l: 1,
            scale: 1.0,
            n_qubits: 2,
            seed: 12,
            model_source: ModelSource::SampledPerSeed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        };
        let est = estimate(&cfg, &Parallelism::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("estimate.csv");
        write_estimate_csv(&path, &est).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("trial_index,trial_max,g_ave,g_err"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
        assert!(text.lines().last().unwrap().starts_with("summary"));
    }
}
