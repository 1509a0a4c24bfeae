//! Accuracy metrics and the four evaluation experiments: the accuracy
//! table, the SNR Monte-Carlo sweep, FF x T1H2O error-difference heat maps
//! and the forward/backward error correlation.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::seed;
use crate::sim::{NUM_PARAMS, PARAM_NAMES};
use crate::training::{perturb_matrix, TrainedModel};

/// Reference values with smaller magnitude are left out of relative errors.
pub const MRE_EPSILON: f64 = 1e-9;

/// Default SNR levels (dB) of the sweep.
pub const DEFAULT_SNR_LEVELS: [f64; 9] = [10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];

/// Default Monte-Carlo repetitions per SNR level.
pub const DEFAULT_REPETITIONS: usize = 100;

fn check_same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", a.dim(), b.dim())));
    }
    if a.nrows() == 0 {
        return Err(Error::Shape("no entries".into()));
    }
    Ok(())
}

/// Coefficient of determination per column, `1 - SS_res / SS_tot`.
pub fn r2_per_param(truth: ArrayView2<f64>, pred: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_same_shape(truth, pred)?;
    Ok((0..truth.ncols())
        .map(|j| {
            let t = truth.column(j);
            let p = pred.column(j);
            let mean = t.mean().expect("non-empty");
            let ss_tot: f64 = t.iter().map(|v| (v - mean).powi(2)).sum();
            let ss_res: f64 = t.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            1.0 - ss_res / ss_tot
        })
        .collect())
}

/// Relative error in percent, `None` when the reference is too close to zero.
pub fn relative_error(truth: f64, pred: f64) -> Option<f64> {
    (truth.abs() >= MRE_EPSILON).then(|| (pred - truth).abs() / truth.abs() * 100.0)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamMetrics {
    pub mae: f64,
    pub mae_sd: f64,
    /// Percent.
    pub mre: f64,
    pub mre_sd: f64,
    pub r2: f64,
    /// Entries left out of the MRE because the reference is (near) zero.
    pub mre_excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub params: [ParamMetrics; NUM_PARAMS],
    pub entries: usize,
}

/// MAE, MRE and R² per parameter, in original units.
pub fn metrics(x_true: ArrayView2<f64>, x_pred: ArrayView2<f64>) -> Result<MetricsReport> {
    check_same_shape(x_true, x_pred)?;
    if x_true.ncols() != NUM_PARAMS {
        return Err(Error::Shape(format!("expected {NUM_PARAMS} columns, got {}", x_true.ncols())));
    }
    let r2 = r2_per_param(x_true, x_pred)?;
    let params = std::array::from_fn(|j| {
        let t = x_true.column(j);
        let p = x_pred.column(j);
        let abs: Vec<f64> = t.iter().zip(p.iter()).map(|(a, b)| (b - a).abs()).collect();
        let rel: Vec<f64> = t.iter().zip(p.iter()).filter_map(|(&a, &b)| relative_error(a, b)).collect();
        let (mae, mae_sd) = mean_sd(&abs);
        let (mre, mre_sd) = mean_sd(&rel);
        ParamMetrics {
            mae,
            mae_sd,
            mre,
            mre_sd,
            r2: r2[j],
            mre_excluded: abs.len() - rel.len(),
        }
    });
    Ok(MetricsReport {
        params,
        entries: x_true.nrows(),
    })
}

impl MetricsReport {
    /// One row per parameter.
    pub fn to_csv(&self, model: &str) -> String {
        let mut out = String::new();
        for (name, m) in PARAM_NAMES.iter().zip(&self.params) {
            out.push_str(&format!(
                "{model},{name},{:.9},{:.9},{:.9},{:.9},{:.9},{},{}\n",
                m.mae, m.mae_sd, m.mre, m.mre_sd, m.r2, self.entries, m.mre_excluded
            ));
        }
        out
    }

    pub const CSV_HEADER: &'static str = "model,parameter,mae,mae_sd,mre_percent,mre_sd_percent,r2,entries,mre_excluded\n";
}

/// `20 log10(S / N)`.
pub fn snr_db(signal_ref: f64, noise_sd: f64) -> Result<f64> {
    if !(signal_ref > 0.0) || !(noise_sd > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "SNR needs positive signal and noise, got S={signal_ref}, N={noise_sd}"
        )));
    }
    Ok(20.0 * (signal_ref / noise_sd).log10())
}

/// Inverse of [`snr_db`]. An infinite level maps to zero noise.
pub fn noise_for_snr(signal_ref: f64, snr: f64) -> Result<f64> {
    if !(signal_ref > 0.0) || snr.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "need positive signal and a level, got S={signal_ref}, SNR={snr}"
        )));
    }
    if snr == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(signal_ref / 10f64.powf(snr / 20.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrLevelResult {
    pub snr_db: f64,
    pub noise_sd: f64,
    /// Percent; each repetition contributes its test-set mean MRE.
    pub mre_mean: [f64; NUM_PARAMS],
    /// Spread of the per-repetition means.
    pub mre_sd: [f64; NUM_PARAMS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweepResult {
    pub model: String,
    pub repetitions: usize,
    pub levels: Vec<SnrLevelResult>,
}

/// Monte-Carlo SNR sweep. For each level and repetition one noise
/// realization of the whole test set is drawn (seeded by level index and
/// repetition) and fed to every model.
pub fn snr_sweep(
    models: &[(&str, &TrainedModel)],
    test: &Dictionary,
    levels: &[f64],
    repetitions: usize,
    signal_ref: f64,
    seed_value: u64,
) -> Result<Vec<SnrSweepResult>> {
    if levels.is_empty() {
        return Err(Error::Config("empty SNR level list".into()));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("SNR levels must be strictly increasing".into()));
    }
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be >= 1".into()));
    }
    let truth = test.param_matrix();
    let features = test.feature_matrix();
    let mut results: Vec<SnrSweepResult> = models
        .iter()
        .map(|(name, _)| SnrSweepResult {
            model: name.to_string(),
            repetitions,
            levels: Vec::with_capacity(levels.len()),
        })
        .collect();
    for (li, &level) in levels.iter().enumerate() {
        let noise_sd = noise_for_snr(signal_ref, level)?;
        // per model, per parameter: one mean MRE per repetition
        let mut per_rep: Vec<[Vec<f64>; NUM_PARAMS]> = models.iter().map(|_| Default::default()).collect();
        for rep in 0..repetitions {
            let label = format!("snr-level-{li}");
            let mut rng = seed::rng_from(seed::indexed_seed(seed_value, &label, rep as u64));
            let noisy = perturb_matrix(features.view(), noise_sd, &mut rng)?;
            for ((_, model), acc) in models.iter().zip(per_rep.iter_mut()) {
                let est = model.estimate(noisy.view())?;
                for j in 0..NUM_PARAMS {
                    let rel: Vec<f64> = truth
                        .column(j)
                        .iter()
                        .zip(est.column(j).iter())
                        .filter_map(|(&t, &p)| relative_error(t, p))
                        .collect();
                    acc[j].push(mean_sd(&rel).0);
                }
            }
        }
        for (res, acc) in results.iter_mut().zip(&per_rep) {
            let stats: [(f64, f64); NUM_PARAMS] = std::array::from_fn(|j| mean_sd(&acc[j]));
            res.levels.push(SnrLevelResult {
                snr_db: level,
                noise_sd,
                mre_mean: stats.map(|s| s.0),
                mre_sd: stats.map(|s| s.1),
            });
        }
    }
    Ok(results)
}

impl SnrSweepResult {
    pub const CSV_HEADER: &'static str = "model,snr_db,noise_sd,parameter,mre_mean_percent,mre_sd_percent,repetitions\n";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in &self.levels {
            for (j, name) in PARAM_NAMES.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{:e},{name},{:.9},{:.9},{}\n",
                    self.model, l.snr_db, l.noise_sd, l.mre_mean[j], l.mre_sd[j], self.repetitions
                ));
            }
        }
        out
    }
}

/// Which parameter's relative error a heat map shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatParam {
    T1H2o,
    T1Fat,
}

impl HeatParam {
    pub fn index(self) -> usize {
        match self {
            HeatParam::T1H2o => 1,
            HeatParam::T1Fat => 2,
        }
    }

    pub fn name(self) -> &'static str {
        PARAM_NAMES[self.index()]
    }
}

impl std::str::FromStr for HeatParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1_h2o" => Ok(HeatParam::T1H2o),
            "t1_fat" => Ok(HeatParam::T1Fat),
            _ => Err(Error::Config(format!("heat map parameter must be t1_h2o or t1_fat, got {s:?}"))),
        }
    }
}

/// Mean relative-error difference `A - B` (percentage points) per
/// (FF, T1H2O) cell; positive cells favour model B.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub param: HeatParam,
    /// Row axis, ascending.
    pub ff_values: Vec<f64>,
    /// Column axis, ascending.
    pub t1_h2o_values: Vec<f64>,
    /// `cells[row][col]`; NaN for empty cells.
    pub cells: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

/// Heat map from reference parameters and two sets of estimates (original units).
pub fn heatmap_from_estimates(
    truth: ArrayView2<f64>,
    pred_a: ArrayView2<f64>,
    pred_b: ArrayView2<f64>,
    param: HeatParam,
) -> Result<HeatMap> {
    check_same_shape(truth, pred_a)?;
    check_same_shape(truth, pred_b)?;
    let axis = |j: usize| -> BTreeMap<u64, usize> {
        let mut vals: Vec<f64> = truth.column(j).to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect()
    };
    let rows = axis(0);
    let cols = axis(1);
    let mut sums = vec![vec![0.0; cols.len()]; rows.len()];
    let mut counts = vec![vec![0usize; cols.len()]; rows.len()];
    let j = param.index();
    for i in 0..truth.nrows() {
        let t = truth[[i, j]];
        let (Some(ea), Some(eb)) = (relative_error(t, pred_a[[i, j]]), relative_error(t, pred_b[[i, j]])) else {
            continue;
        };
        let r = rows[&truth[[i, 0]].to_bits()];
        let c = cols[&truth[[i, 1]].to_bits()];
        sums[r][c] += ea - eb;
        counts[r][c] += 1;
    }
    let cells = sums
        .iter()
        .zip(&counts)
        .map(|(sr, cr)| sr.iter().zip(cr).map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 }).collect())
        .collect();
    let sorted = |m: &BTreeMap<u64, usize>| {
        let mut v: Vec<(usize, f64)> = m.iter().map(|(b, i)| (*i, f64::from_bits(*b))).collect();
        v.sort_by_key(|p| p.0);
        v.into_iter().map(|p| p.1).collect()
    };
    Ok(HeatMap {
        param,
        ff_values: sorted(&rows),
        t1_h2o_values: sorted(&cols),
        cells,
        counts,
    })
}

/// Evaluates both models on the noise-free test fingerprints and bins the
/// relative-error difference `A - B`.
pub fn heatmap_diff(model_a: &TrainedModel, model_b: &TrainedModel, test: &Dictionary, param: HeatParam) -> Result<HeatMap> {
    let truth = test.param_matrix();
    let features = test.feature_matrix();
    let a = model_a.estimate(features.view())?;
    let b = model_b.estimate(features.view())?;
    heatmap_from_estimates(truth.view(), a.view(), b.view(), param)
}

impl HeatMap {
    /// Mean of the non-empty cells in rows with FF >= `ff_min`.
    pub fn mean_over_rows(&self, ff_min: f64) -> f64 {
        let vals: Vec<f64> = self
            .ff_values
            .iter()
            .zip(&self.cells)
            .filter(|(ff, _)| **ff >= ff_min)
            .flat_map(|(_, row)| row.iter().copied().filter(|v| !v.is_nan()))
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    pub const CSV_HEADER: &'static str = "parameter,ff,t1_h2o,mre_diff_percent,count\n";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (r, ff) in self.ff_values.iter().enumerate() {
            for (c, t1) in self.t1_h2o_values.iter().enumerate() {
                out.push_str(&format!(
                    "{},{ff},{t1},{:.9},{}\n",
                    self.param.name(),
                    self.cells[r][c],
                    self.counts[r][c]
                ));
            }
        }
        out
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt()
}

/// Spearman rank-order correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::Shape(format!(
            "spearman needs two equal-length vectors of at least 3 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().any(|v| v.is_nan()) || b.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("spearman input contains NaN".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(a) || constant(b) {
        return Err(Error::Numerical("spearman is undefined for a constant vector".into()));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Magnitude of the inner product of two L2-normalized complex signals.
pub fn normalized_inner_product(y: &[Complex64], y_hat: &[Complex64]) -> Result<f64> {
    let ny = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nh = y_hat.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if ny == 0.0 || nh == 0.0 {
        return Err(Error::Numerical("zero-norm fingerprint".into()));
    }
    let dot: Complex64 = y.iter().zip(y_hat).map(|(a, b)| a.conj() * b).sum();
    Ok(dot.norm() / (ny * nh))
}

fn features_to_complex(row: ndarray::ArrayView1<f64>) -> Vec<Complex64> {
    let t = row.len() / 2;
    (0..t).map(|k| Complex64::new(row[k], row[t + k])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    /// Per-entry mean relative error over the parameters (percent).
    pub mre: Vec<f64>,
    /// Per-entry `|<y, y_hat>|` of normalized fingerprints.
    pub inner_product: Vec<f64>,
    pub rho: f64,
}

impl Correlation {
    pub const CSV_HEADER: &'static str = "entry,mre_percent,inner_product\n";

    pub fn to_csv(&self) -> String {
        self.mre
            .iter()
            .zip(&self.inner_product)
            .enumerate()
            .map(|(i, (m, p))| format!("{i},{m:.9},{p:.12}\n"))
            .collect()
    }
}

/// Per-entry mean relative error over the parameters with a usable reference.
pub fn entry_mre(truth: &[f64], pred: &[f64]) -> f64 {
    let rel: Vec<f64> = truth.iter().zip(pred).filter_map(|(&t, &p)| relative_error(t, p)).collect();
    rel.iter().sum::<f64>() / rel.len() as f64
}

/// Backward estimate `x_hat` from `y`, then forward prediction `y_hat` from
/// `x_hat`, relating the backward error to the forward agreement.
pub fn fwd_bwd_correlate(model: &TrainedModel, test: &Dictionary) -> Result<Correlation> {
    let truth = test.param_matrix();
    let features = test.feature_matrix();
    let x_hat = model.estimate(features.view())?;
    let y_hat = model.synthesize(x_hat.view())?;
    let mut mre = Vec::with_capacity(test.len());
    let mut inner = Vec::with_capacity(test.len());
    for i in 0..test.len() {
        mre.push(entry_mre(&truth.row(i).to_vec(), &x_hat.row(i).to_vec()));
        inner.push(normalized_inner_product(
            &features_to_complex(features.row(i)),
            &features_to_complex(y_hat.row(i)),
        )?);
    }
    let rho = spearman(&mre, &inner)?;
    Ok(Correlation {
        mre,
        inner_product: inner,
        rho,
    })
}

/// Estimates for every entry of a dictionary from its clean fingerprints.
pub fn estimate_dictionary(model: &TrainedModel, test: &Dictionary) -> Result<Array2<f64>> {
    if model.fingerprint_length() != test.length() {
        return Err(Error::Shape(format!(
            "model expects fingerprints of length {}, dictionary has {}",
            model.fingerprint_length(),
            test.length()
        )));
    }
    model.estimate(test.feature_matrix().view())
}

/// Mean over the rows of one column.
pub fn column_mean(m: ArrayView2<f64>, j: usize) -> f64 {
    m.index_axis(Axis(1), j).mean().unwrap_or(f64::NAN)
}
