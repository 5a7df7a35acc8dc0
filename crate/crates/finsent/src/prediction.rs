//! Next-day close-price regression backtests.
//!
//! Sentiment index series are joined with daily OHLCV bars into feature
//! rows (one per consecutive trading-day pair), split by a calendar
//! boundary, fitted with closed-form ridge regression, and scored with
//! RMSE/MAE. Improvement tables compare sentiment variants against the
//! price-only baseline per regressor first, then average.
//!
//! The feature construction is leakage-free by design: every feature,
//! including the sentiment score, derives from dates up to and including
//! the feature date, and the target is the strictly later trading day's
//! close. [`audit_rows`] re-checks that property on any row collection.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::scoring::DailySentimentIndex;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("price file is missing column {name:?}")]
    MissingColumn { name: String },
    #[error("bad price row {line}: {reason}")]
    BadBar { line: usize, reason: String },
    #[error("duplicate price bar for {date}")]
    DuplicateBar { date: NaiveDate },
    #[error("need at least {needed} rows, got {got}")]
    NotEnoughRows { needed: usize, got: usize },
    #[error("expected {expected} features, got {got}")]
    FeatureWidthMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} predictions vs {right} actuals")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("ridge strength must be a finite non-negative number, got {lambda}")]
    InvalidLambda { lambda: f64 },
    #[error("normal equations are singular; collinear features need a ridge strength > 0")]
    SingularSystem,
    #[error("sentiment series and price bars share no dates")]
    EmptyOverlap,
    #[error("baseline {metric} for regressor {regressor} is zero; improvement undefined")]
    ZeroBaselineMetric { regressor: String, metric: String },
    #[error("baseline and method cover different regressor sets")]
    RegressorSetMismatch,
    #[error("leakage: feature date {feature} does not precede target date {target}")]
    Leakage {
        feature: NaiveDate,
        target: NaiveDate,
    },
}

/// One daily price bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    pub fn validate(&self) -> Result<(), String> {
        let body_low = self.open.min(self.close);
        let body_high = self.open.max(self.close);
        if !(self.low <= body_low && body_high <= self.high) {
            return Err(format!(
                "price bounds violated: low {} open {} close {} high {}",
                self.low, self.open, self.close, self.high
            ));
        }
        if self.volume < 0.0 {
            return Err(format!("negative volume {}", self.volume));
        }
        if [self.open, self.high, self.low, self.close, self.volume]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err("non-finite price field".into());
        }
        Ok(())
    }
}

/// Loads daily bars from CSV with columns date, open, high, low, close,
/// volume (an adjusted-close column is accepted and ignored). Bars are
/// sorted by date; duplicate dates are an error.
pub fn load_price_csv<R: Read>(reader: R) -> Result<Vec<OhlcvBar>, PredictError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let index_of = |name: &str| -> Result<usize, PredictError> {
        headers
            .iter()
            .position(|h| normalize_header(h) == name)
            .ok_or_else(|| PredictError::MissingColumn {
                name: name.to_string(),
            })
    };
    let date_col = index_of("date")?;
    let open_col = index_of("open")?;
    let high_col = index_of("high")?;
    let low_col = index_of("low")?;
    let close_col = index_of("close")?;
    let volume_col = index_of("volume")?;

    let mut bars = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let date = field(date_col)
            .parse::<NaiveDate>()
            .map_err(|e| PredictError::BadBar {
                line,
                reason: format!("bad date: {e}"),
            })?;
        let number = |col: usize, name: &str| -> Result<f64, PredictError> {
            field(col).parse::<f64>().map_err(|e| PredictError::BadBar {
                line,
                reason: format!("bad {name}: {e}"),
            })
        };
        let bar = OhlcvBar {
            date,
            open: number(open_col, "open")?,
            high: number(high_col, "high")?,
            low: number(low_col, "low")?,
            close: number(close_col, "close")?,
            volume: number(volume_col, "volume")?,
        };
        bar.validate()
            .map_err(|reason| PredictError::BadBar { line, reason })?;
        bars.push(bar);
    }
    bars.sort_by_key(|b| b.date);
    for pair in bars.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(PredictError::DuplicateBar { date: pair[0].date });
        }
    }
    Ok(bars)
}

pub fn load_price_csv_path(path: &Path) -> Result<Vec<OhlcvBar>, PredictError> {
    load_price_csv(std::fs::File::open(path)?)
}

fn normalize_header(h: &str) -> String {
    h.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// One regression example: features observed on `date`, target close on
/// the strictly later `target_date`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub features: Vec<f64>,
    pub target: f64,
    pub target_date: NaiveDate,
}

/// Verifies that every feature date strictly precedes its target date.
pub fn audit_rows(rows: &[FeatureRow]) -> Result<(), PredictError> {
    for row in rows {
        if row.date >= row.target_date {
            return Err(PredictError::Leakage {
                feature: row.date,
                target: row.target_date,
            });
        }
    }
    Ok(())
}

/// Joins bars (and optionally a sentiment series) into feature rows.
///
/// Each consecutive bar pair (t, t+1) yields one row: features are t's
/// open, high, low, close, volume — plus, when a series is supplied, a
/// sentiment feature — and the target is t+1's close.
///
/// The sentiment feature for trading day t averages the series scores over
/// t and any non-trading days since the previous bar, so weekend and
/// holiday sentiment rolls forward into the next trading day. Missing-flag
/// days carry score 0 and participate in the average; window days absent
/// from the series are skipped. A series that shares no window day with
/// the bars at all is an error.
pub fn align(
    series: Option<&[DailySentimentIndex]>,
    bars: &[OhlcvBar],
) -> Result<Vec<FeatureRow>, PredictError> {
    for pair in bars.windows(2) {
        if pair[0].date >= pair[1].date {
            return Err(PredictError::DuplicateBar { date: pair[1].date });
        }
    }
    let scores: Option<BTreeMap<NaiveDate, f64>> =
        series.map(|s| s.iter().map(|e| (e.date, e.score)).collect());

    let mut rows = Vec::new();
    let mut any_overlap = false;
    for (i, pair) in bars.windows(2).enumerate() {
        let bar = pair[0];
        let next = pair[1];
        let mut features = vec![bar.open, bar.high, bar.low, bar.close, bar.volume];
        if let Some(scores) = &scores {
            let window_start = if i == 0 {
                bar.date
            } else {
                bars[i - 1]
                    .date
                    .succ_opt()
                    .expect("date within calendar bounds")
            };
            let mut sum = 0.0;
            let mut count = 0usize;
            for (_, score) in scores.range(window_start..=bar.date) {
                sum += score;
                count += 1;
            }
            if count > 0 {
                any_overlap = true;
                features.push(sum / count as f64);
            } else {
                features.push(0.0);
            }
        }
        rows.push(FeatureRow {
            date: bar.date,
            features,
            target: next.close,
            target_date: next.date,
        });
    }
    if scores.is_some() && !rows.is_empty() && !any_overlap {
        return Err(PredictError::EmptyOverlap);
    }
    audit_rows(&rows)?;
    Ok(rows)
}

/// Why one side of a temporal split came out empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitWarning {
    EmptyTrain,
    EmptyTest,
}

impl fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitWarning::EmptyTrain => f.write_str("no rows on or before the split boundary"),
            SplitWarning::EmptyTest => f.write_str("no rows after the split boundary"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
    pub warning: Option<SplitWarning>,
}

/// Splits date-sorted rows at a boundary: rows whose feature date is on or
/// before the boundary train, the rest test.
pub fn temporal_split(rows: &[FeatureRow], boundary: NaiveDate) -> SplitOutcome {
    let (train, test): (Vec<FeatureRow>, Vec<FeatureRow>) =
        rows.iter().cloned().partition(|r| r.date <= boundary);
    let warning = if train.is_empty() {
        Some(SplitWarning::EmptyTrain)
    } else if test.is_empty() {
        Some(SplitWarning::EmptyTest)
    } else {
        None
    };
    SplitOutcome {
        train,
        test,
        warning,
    }
}

/// Closed-form ridge fit on train-standardized features.
///
/// Columns constant in the training data are excluded from the solve
/// (their weight is zero; the intercept absorbs them) and pass through
/// prediction unscaled, so appending a constant column never changes
/// predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    means: Vec<f64>,
    scales: Vec<f64>,
    constant: Vec<bool>,
    /// Weights in standardized feature space; zero for constant columns.
    weights: Vec<f64>,
    y_mean: f64,
    lambda: f64,
}

impl LinearFit {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Slope per feature in original units.
    pub fn coefficients(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.scales)
            .map(|(w, s)| w / s)
            .collect()
    }

    /// Intercept in original units.
    pub fn intercept(&self) -> f64 {
        let shift: f64 = self
            .weights
            .iter()
            .zip(&self.scales)
            .zip(&self.means)
            .map(|((w, s), m)| w / s * m)
            .sum();
        self.y_mean - shift
    }

    /// Train-time standardization statistics (mean, scale) per feature.
    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (&self.means, &self.scales)
    }
}

/// Fits `targets ~ features` by minimizing the squared error plus
/// `lambda` times the squared norm of the standardized weights.
#[allow(clippy::needless_range_loop)]
pub fn fit_linear_xy(
    features: &[Vec<f64>],
    targets: &[f64],
    lambda: f64,
) -> Result<LinearFit, PredictError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(PredictError::InvalidLambda { lambda });
    }
    let n = features.len();
    if n < 2 {
        return Err(PredictError::NotEnoughRows { needed: 2, got: n });
    }
    if targets.len() != n {
        return Err(PredictError::LengthMismatch {
            left: n,
            right: targets.len(),
        });
    }
    let d = features[0].len();
    for row in features {
        if row.len() != d {
            return Err(PredictError::FeatureWidthMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }

    let mut means = vec![0.0; d];
    for row in features {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    let mut variances = vec![0.0; d];
    let mut constant = vec![true; d];
    for row in features {
        for j in 0..d {
            let dev = row[j] - means[j];
            variances[j] += dev * dev;
            if row[j] != features[0][j] {
                constant[j] = false;
            }
        }
    }
    let scales: Vec<f64> = variances
        .iter()
        .zip(&constant)
        .map(|(v, is_const)| {
            if *is_const {
                1.0
            } else {
                (v / n as f64).sqrt()
            }
        })
        .collect();

    let active: Vec<usize> = (0..d).filter(|j| !constant[*j]).collect();
    let k = active.len();
    let y_mean = targets.iter().sum::<f64>() / n as f64;

    let mut weights = vec![0.0; d];
    if k > 0 {
        // Standardize active columns and center the target.
        let mut z = vec![vec![0.0; k]; n];
        for (i, row) in features.iter().enumerate() {
            for (jj, &j) in active.iter().enumerate() {
                z[i][jj] = (row[j] - means[j]) / scales[j];
            }
        }
        let mut gram = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for i in 0..n {
            let yc = targets[i] - y_mean;
            for a in 0..k {
                rhs[a] += z[i][a] * yc;
                for b in a..k {
                    gram[a][b] += z[i][a] * z[i][b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[a][b] = gram[b][a];
            }
            gram[a][a] += lambda;
        }
        let solved = solve_symmetric(gram, rhs, n as f64)?;
        for (jj, &j) in active.iter().enumerate() {
            weights[j] = solved[jj];
        }
    }

    Ok(LinearFit {
        means,
        scales,
        constant,
        weights,
        y_mean,
        lambda,
    })
}

/// Gaussian elimination with partial pivoting. `scale` sets the pivot
/// cutoff below which the system counts as singular.
#[allow(clippy::needless_range_loop)]
fn solve_symmetric(
    mut a: Vec<Vec<f64>>,
    mut b: Vec<f64>,
    scale: f64,
) -> Result<Vec<f64>, PredictError> {
    let k = b.len();
    let cutoff = scale.max(1.0) * 1e-12;
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| {
                a[r1][col]
                    .abs()
                    .partial_cmp(&a[r2][col].abs())
                    .expect("finite pivots")
            })
            .expect("nonempty column");
        if a[pivot_row][col].abs() < cutoff {
            return Err(PredictError::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..k {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut sum = b[col];
        for c in (col + 1)..k {
            sum -= a[col][c] * x[c];
        }
        x[col] = sum / a[col][col];
    }
    Ok(x)
}

/// [`fit_linear_xy`] over feature rows.
pub fn fit_linear(rows: &[FeatureRow], lambda: f64) -> Result<LinearFit, PredictError> {
    let features: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    fit_linear_xy(&features, &targets, lambda)
}

/// Applies the stored standardization and linear map.
#[allow(clippy::needless_range_loop)]
pub fn predict_xy(fit: &LinearFit, features: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
    let d = fit.n_features();
    let mut out = Vec::with_capacity(features.len());
    for row in features {
        if row.len() != d {
            return Err(PredictError::FeatureWidthMismatch {
                expected: d,
                got: row.len(),
            });
        }
        let mut y = fit.y_mean;
        for j in 0..d {
            if fit.constant[j] {
                continue;
            }
            y += fit.weights[j] * (row[j] - fit.means[j]) / fit.scales[j];
        }
        out.push(y);
    }
    Ok(out)
}

/// [`predict_xy`] over feature rows.
pub fn predict(fit: &LinearFit, rows: &[FeatureRow]) -> Result<Vec<f64>, PredictError> {
    let features: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    predict_xy(fit, &features)
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, PredictError> {
    check_pair(predicted, actual)?;
    let sum_sq: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sum_sq / predicted.len() as f64).sqrt())
}

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64, PredictError> {
    check_pair(predicted, actual)?;
    let sum_abs: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(sum_abs / predicted.len() as f64)
}

fn check_pair(predicted: &[f64], actual: &[f64]) -> Result<(), PredictError> {
    if predicted.len() != actual.len() {
        return Err(PredictError::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(PredictError::EmptyInput);
    }
    Ok(())
}

/// Per-regressor evaluation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMetrics {
    pub name: String,
    pub rmse: f64,
    pub mae: f64,
}

/// Averaged percentage improvements of a method over a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub rmse_pct: f64,
    pub mae_pct: f64,
}

/// Improvement of `method` over `baseline`, computed per regressor as
/// `100 * (base - method) / base` and then averaged over regressors —
/// separately for RMSE and MAE. Both sides must cover the same regressor
/// set, and baseline metrics must be nonzero.
pub fn improvement_table(
    baseline: &[RegressorMetrics],
    method: &[RegressorMetrics],
) -> Result<Improvement, PredictError> {
    if baseline.is_empty() || method.is_empty() {
        return Err(PredictError::EmptyInput);
    }
    if baseline.len() != method.len() {
        return Err(PredictError::RegressorSetMismatch);
    }
    let by_name: BTreeMap<&str, &RegressorMetrics> =
        method.iter().map(|m| (m.name.as_str(), m)).collect();
    let mut rmse_sum = 0.0;
    let mut mae_sum = 0.0;
    for base in baseline {
        let method = by_name
            .get(base.name.as_str())
            .ok_or(PredictError::RegressorSetMismatch)?;
        if base.rmse == 0.0 {
            return Err(PredictError::ZeroBaselineMetric {
                regressor: base.name.clone(),
                metric: "rmse".into(),
            });
        }
        if base.mae == 0.0 {
            return Err(PredictError::ZeroBaselineMetric {
                regressor: base.name.clone(),
                metric: "mae".into(),
            });
        }
        rmse_sum += 100.0 * (base.rmse - method.rmse) / base.rmse;
        mae_sum += 100.0 * (base.mae - method.mae) / base.mae;
    }
    Ok(Improvement {
        rmse_pct: rmse_sum / baseline.len() as f64,
        mae_pct: mae_sum / baseline.len() as f64,
    })
}

/// Plug-in contract for regression models over real feature matrices.
///
/// The core is randomness-free; a stochastic plug-in must take an
/// explicit seed at construction so experiment reruns stay deterministic.
pub trait Regressor: Send + Sync {
    fn name(&self) -> String;
    fn fit(
        &self,
        features: &[Vec<f64>],
        targets: &[f64],
    ) -> Result<Box<dyn FittedModel>, PredictError>;
}

/// A trained regressor ready to predict.
pub trait FittedModel: Send + Sync {
    fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<f64>, PredictError>;
}

/// The built-in closed-form regressor: plain least squares at strength 0,
/// ridge otherwise.
#[derive(Debug, Clone, Copy)]
pub struct RidgeRegressor {
    pub lambda: f64,
}

impl RidgeRegressor {
    pub fn new(lambda: f64) -> RidgeRegressor {
        RidgeRegressor { lambda }
    }
}

impl Regressor for RidgeRegressor {
    fn name(&self) -> String {
        if self.lambda == 0.0 {
            "linear".to_string()
        } else {
            format!("ridge({})", self.lambda)
        }
    }

    fn fit(
        &self,
        features: &[Vec<f64>],
        targets: &[f64],
    ) -> Result<Box<dyn FittedModel>, PredictError> {
        Ok(Box::new(fit_linear_xy(features, targets, self.lambda)?))
    }
}

impl FittedModel for LinearFit {
    fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
        predict_xy(self, features)
    }
}

/// Price history for one stock.
#[derive(Debug, Clone)]
pub struct StockData {
    pub ticker: String,
    pub bars: Vec<OhlcvBar>,
}

/// One feature variant: the price-only baseline (`series` absent) or a
/// sentiment variant with one index series per ticker.
#[derive(Debug, Clone)]
pub struct VariantData {
    pub name: String,
    pub series: Option<BTreeMap<String, Vec<DailySentimentIndex>>>,
}

impl VariantData {
    pub fn baseline() -> VariantData {
        VariantData {
            name: "baseline".into(),
            series: None,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.series.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub stocks: Vec<StockData>,
    pub variants: Vec<VariantData>,
    pub split: NaiveDate,
}

/// Metrics for one (stock, variant) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub per_regressor: Vec<RegressorMetrics>,
    pub avg_rmse: f64,
    pub avg_mae: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// One (stock, variant) result; failures are isolated per cell.
#[derive(Debug, Clone)]
pub struct ReportCell {
    pub stock: String,
    pub variant: String,
    pub result: Result<CellMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct ImprovementCell {
    pub stock: String,
    pub variant: String,
    pub improvement: Improvement,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<ReportCell>,
    pub improvements: Vec<ImprovementCell>,
    /// Per sentiment variant: improvement averaged across stocks.
    pub variant_averages: Vec<(String, Improvement)>,
    pub regressors: Vec<String>,
    pub split: NaiveDate,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn cell(&self, stock: &str, variant: &str) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.stock == stock && c.variant == variant)
    }

    pub fn improvement(&self, stock: &str, variant: &str) -> Option<&Improvement> {
        self.improvements
            .iter()
            .find(|c| c.stock == stock && c.variant == variant)
            .map(|c| &c.improvement)
    }
}

fn run_cell(
    stock: &StockData,
    variant: &VariantData,
    split: NaiveDate,
    regressors: &[Box<dyn Regressor>],
) -> Result<CellMetrics, PredictError> {
    let series = match &variant.series {
        Some(map) => Some(map.get(&stock.ticker).map(|s| s.as_slice()).unwrap_or(&[])),
        None => None,
    };
    let rows = align(series, &stock.bars)?;
    audit_rows(&rows)?;
    let split_outcome = temporal_split(&rows, split);
    if split_outcome.train.len() < 2 {
        return Err(PredictError::NotEnoughRows {
            needed: 2,
            got: split_outcome.train.len(),
        });
    }
    if split_outcome.test.is_empty() {
        return Err(PredictError::EmptyInput);
    }
    let train_x: Vec<Vec<f64>> = split_outcome
        .train
        .iter()
        .map(|r| r.features.clone())
        .collect();
    let train_y: Vec<f64> = split_outcome.train.iter().map(|r| r.target).collect();
    let test_x: Vec<Vec<f64>> = split_outcome
        .test
        .iter()
        .map(|r| r.features.clone())
        .collect();
    let test_y: Vec<f64> = split_outcome.test.iter().map(|r| r.target).collect();

    let mut per_regressor = Vec::with_capacity(regressors.len());
    for regressor in regressors {
        let fitted = regressor.fit(&train_x, &train_y)?;
        let predicted = fitted.predict(&test_x)?;
        per_regressor.push(RegressorMetrics {
            name: regressor.name(),
            rmse: rmse(&predicted, &test_y)?,
            mae: mae(&predicted, &test_y)?,
        });
    }
    let avg_rmse = per_regressor.iter().map(|m| m.rmse).sum::<f64>() / per_regressor.len() as f64;
    let avg_mae = per_regressor.iter().map(|m| m.mae).sum::<f64>() / per_regressor.len() as f64;
    Ok(CellMetrics {
        per_regressor,
        avg_rmse,
        avg_mae,
        train_rows: split_outcome.train.len(),
        test_rows: split_outcome.test.len(),
    })
}

/// Runs every (stock, variant) cell with every regressor, computes
/// averaged metrics, and builds the improvement table against the
/// baseline variant. A failing cell is reported as failed without voiding
/// the rest of the report.
pub fn run_experiment(
    spec: &ExperimentSpec,
    regressors: &[Box<dyn Regressor>],
) -> Result<ExperimentReport, PredictError> {
    if spec.stocks.is_empty() || spec.variants.is_empty() || regressors.is_empty() {
        return Err(PredictError::EmptyInput);
    }
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for stock in &spec.stocks {
        for variant in &spec.variants {
            let result =
                run_cell(stock, variant, spec.split, regressors).map_err(|e| e.to_string());
            cells.push(ReportCell {
                stock: stock.ticker.clone(),
                variant: variant.name.clone(),
                result,
            });
        }
    }

    let baseline_name = spec
        .variants
        .iter()
        .find(|v| v.is_baseline())
        .map(|v| v.name.clone());
    let mut improvements = Vec::new();
    if let Some(baseline_name) = &baseline_name {
        for stock in &spec.stocks {
            let Some(ReportCell {
                result: Ok(base), ..
            }) = cells
                .iter()
                .find(|c| c.stock == stock.ticker && &c.variant == baseline_name)
            else {
                continue;
            };
            for variant in spec.variants.iter().filter(|v| !v.is_baseline()) {
                let Some(ReportCell {
                    result: Ok(metrics),
                    ..
                }) = cells
                    .iter()
                    .find(|c| c.stock == stock.ticker && c.variant == variant.name)
                else {
                    continue;
                };
                match improvement_table(&base.per_regressor, &metrics.per_regressor) {
                    Ok(improvement) => improvements.push(ImprovementCell {
                        stock: stock.ticker.clone(),
                        variant: variant.name.clone(),
                        improvement,
                    }),
                    Err(e) => warnings.push(format!(
                        "improvement unavailable for {}/{}: {e}",
                        stock.ticker, variant.name
                    )),
                }
            }
        }
    }

    let mut variant_averages = Vec::new();
    for variant in spec.variants.iter().filter(|v| !v.is_baseline()) {
        let per_stock: Vec<&Improvement> = improvements
            .iter()
            .filter(|c| c.variant == variant.name)
            .map(|c| &c.improvement)
            .collect();
        if per_stock.is_empty() {
            continue;
        }
        let n = per_stock.len() as f64;
        variant_averages.push((
            variant.name.clone(),
            Improvement {
                rmse_pct: per_stock.iter().map(|i| i.rmse_pct).sum::<f64>() / n,
                mae_pct: per_stock.iter().map(|i| i.mae_pct).sum::<f64>() / n,
            },
        ));
    }

    Ok(ExperimentReport {
        cells,
        improvements,
        variant_averages,
        regressors: regressors.iter().map(|r| r.name()).collect(),
        split: spec.split,
        warnings,
    })
}

/// Wide Markdown table of averaged RMSE/MAE per variant and stock.
pub fn experiment_table_markdown(report: &ExperimentReport) -> String {
    let mut stocks: Vec<&str> = report.cells.iter().map(|c| c.stock.as_str()).collect();
    stocks.dedup();
    let mut variants: Vec<&str> = Vec::new();
    for cell in &report.cells {
        if !variants.contains(&cell.variant.as_str()) {
            variants.push(&cell.variant);
        }
    }
    let mut out = String::from("| Method |");
    for stock in &stocks {
        out.push_str(&format!(" {stock} RMSE | {stock} MAE |"));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &stocks {
        out.push_str("---:|---:|");
    }
    out.push('\n');
    for variant in &variants {
        out.push_str(&format!("| {variant} |"));
        for stock in &stocks {
            match report.cell(stock, variant).map(|c| &c.result) {
                Some(Ok(m)) => out.push_str(&format!(" {:.3} | {:.3} |", m.avg_rmse, m.avg_mae)),
                Some(Err(_)) => out.push_str(" error | error |"),
                None => out.push_str(" - | - |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Long-format CSV: one row per (stock, variant, regressor) plus an
/// averaged row per cell.
pub fn experiment_table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("stock,variant,regressor,rmse,mae\n");
    for cell in &report.cells {
        match &cell.result {
            Ok(metrics) => {
                for m in &metrics.per_regressor {
                    out.push_str(&format!(
                        "{},{},{},{:.6},{:.6}\n",
                        cell.stock, cell.variant, m.name, m.rmse, m.mae
                    ));
                }
                out.push_str(&format!(
                    "{},{},avg,{:.6},{:.6}\n",
                    cell.stock, cell.variant, metrics.avg_rmse, metrics.avg_mae
                ));
            }
            Err(e) => {
                out.push_str(&format!(
                    "{},{},error,,\"{}\"\n",
                    cell.stock,
                    cell.variant,
                    e.replace('"', "'")
                ));
            }
        }
    }
    out
}

/// Markdown improvement table: per stock `rmse% (mae%)` cells and a
/// cross-stock average column.
pub fn improvement_table_markdown(report: &ExperimentReport) -> String {
    let mut stocks: Vec<&str> = report.cells.iter().map(|c| c.stock.as_str()).collect();
    stocks.dedup();
    let mut out = String::from("| Method |");
    for stock in &stocks {
        out.push_str(&format!(" {stock} |"));
    }
    out.push_str(" Average |\n|---|");
    for _ in &stocks {
        out.push_str("---:|");
    }
    out.push_str("---:|\n");
    for (variant, average) in &report.variant_averages {
        out.push_str(&format!("| {variant} |"));
        for stock in &stocks {
            match report.improvement(stock, variant) {
                Some(i) => out.push_str(&format!(" {:.2} ({:.2}) |", i.rmse_pct, i.mae_pct)),
                None => out.push_str(" - |"),
            }
        }
        out.push_str(&format!(
            " {:.2} ({:.2}) |\n",
            average.rmse_pct, average.mae_pct
        ));
    }
    out
}

pub fn improvement_table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("stock,variant,rmse_improvement_pct,mae_improvement_pct\n");
    for cell in &report.improvements {
        out.push_str(&format!(
            "{},{},{:.2},{:.2}\n",
            cell.stock, cell.variant, cell.improvement.rmse_pct, cell.improvement.mae_pct
        ));
    }
    for (variant, average) in &report.variant_averages {
        out.push_str(&format!(
            "(all),{},{:.2},{:.2}\n",
            variant, average.rmse_pct, average.mae_pct
        ));
    }
    out
}
