//! Monte-Carlo WER estimation, threshold search and efficiency sweeps.
//!
//! A trial encodes a random message, sends it over the BI-AWGN channel,
//! applies the rate-adaptation scheme and decodes. Trial `i` draws all of its
//! randomness from [`trial_rng`]`(seed, i)`, and the message is drawn before
//! the noise, so different SNRs see the same messages and the same
//! standard-normal noise samples (common random numbers). Trials run on a
//! worker pool in chunks but are tallied in index order, so every result is a
//! function of the inputs and the seed alone.

pub mod report;

use std::sync::Arc;

use bitvec::prelude::*;
use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{efficiency, from_db, to_db, transmit_bits, CapacityModel, ChannelParams, EfficiencyResult};
use crate::codebook::QcRaCode;
use crate::decoder::{Decoder, DecoderVariant};
use crate::encoder::{encode, Codeword, MessageBits};
use crate::error::{Error, Result};
use crate::graph::TannerGraph;
use crate::rate_adapt::{
    build_extended, combine_repeated_flat, puncture_in_place, puncture_pattern, select_scheme,
    CodeProfile, ExtendedCode, MeasuredPoint, RateAdaptScheme, SelectionMode,
};
use crate::stats::{error_rate_interval, trial_rng, Interval};

/// Default iteration cap.
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// A base code with a rate-adaptation scheme applied, ready to simulate.
#[derive(Debug, Clone)]
pub struct SimTarget {
    base: Arc<QcRaCode>,
    scheme: RateAdaptScheme,
    extended: Option<ExtendedCode>,
    pattern: Vec<usize>,
    graph: TannerGraph,
}

impl SimTarget {
    pub fn new(base: Arc<QcRaCode>, scheme: RateAdaptScheme) -> Result<Self> {
        scheme.validate(base.n(), base.k())?;
        let mut pattern = Vec::new();
        let mut extended = None;
        let graph = match scheme {
            RateAdaptScheme::Extend { count } => {
                let ext = build_extended(base.clone(), count)?;
                let g = ext.tanner_graph();
                extended = Some(ext);
                g
            }
            RateAdaptScheme::Puncture { count } => {
                pattern = puncture_pattern(base.n(), base.k(), count)?;
                base.tanner_graph()
            }
            _ => base.tanner_graph(),
        };
        Ok(SimTarget {
            base,
            scheme,
            extended,
            pattern,
            graph,
        })
    }

    pub fn base(&self) -> &QcRaCode {
        &self.base
    }

    pub fn scheme(&self) -> RateAdaptScheme {
        self.scheme
    }

    pub fn overall_rate(&self) -> Ratio<usize> {
        self.scheme
            .overall_rate(self.base.n(), self.base.k())
            .expect("validated at construction")
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    fn encode(&self, msg: &MessageBits) -> Result<Codeword> {
        match &self.extended {
            Some(ext) => ext.encode(msg),
            None => encode(&self.base, msg),
        }
    }

    /// Runs trial `index` of a run seeded with `seed`.
    pub fn run_trial(
        &self,
        params: ChannelParams,
        seed: u64,
        index: u64,
        max_iterations: usize,
        scratch: &mut TrialScratch,
    ) -> Result<TrialOutcome> {
        let mut rng = trial_rng(seed, index);
        let k = self.base.k();
        let words: Vec<u64> = (0..k.div_ceil(64)).map(|_| rng.gen()).collect();
        let mut bits = BitVec::<u64, Lsb0>::from_vec(words);
        bits.truncate(k);
        let cw = self.encode(&MessageBits(bits))?;

        let llrs = &mut scratch.llrs;
        llrs.clear();
        if let RateAdaptScheme::Repeat { factor } = self.scheme {
            let repeated = cw.bits().iter().flat_map(|b| std::iter::repeat(*b).take(factor));
            scratch.observations.clear();
            transmit_bits(repeated, params, &mut rng, &mut scratch.observations);
            combine_repeated_flat(&scratch.observations, factor, llrs)?;
        } else {
            transmit_bits(cw.bits().iter().map(|b| *b), params, &mut rng, llrs);
            puncture_in_place(llrs, &self.pattern)?;
        }

        let result = scratch.decoder.decode(&self.graph, llrs, max_iterations)?;
        let outcome = if !result.converged {
            TrialError::Detected
        } else if result.bits != cw {
            TrialError::Undetected
        } else {
            TrialError::None
        };
        Ok(TrialOutcome {
            error: outcome,
            iterations: result.iterations_used,
        })
    }
}

/// Per-worker buffers reused across trials.
#[derive(Debug, Clone, Default)]
pub struct TrialScratch {
    decoder: Decoder,
    observations: Vec<f64>,
    llrs: Vec<f64>,
}

impl TrialScratch {
    pub fn new(variant: DecoderVariant) -> Self {
        TrialScratch {
            decoder: Decoder::new(variant),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialError {
    None,
    /// Decoder stopped without satisfying every check.
    Detected,
    /// Decoder converged to a codeword other than the one sent.
    Undetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub error: TrialError,
    pub iterations: usize,
}

/// When to stop adding trials at one SNR.
///
/// Checked after every trial in index order: stop at `max_trials`, or once at
/// least `min_trials` have run and either `min_errors` word errors were seen
/// or the 95% interval excludes `separate_from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub min_errors: usize,
    pub max_trials: usize,
    pub min_trials: usize,
    pub separate_from: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_errors: 50,
            max_trials: 10_000,
            min_trials: 1,
            separate_from: None,
        }
    }
}

impl StopRule {
    pub fn fixed(trials: usize) -> Self {
        StopRule {
            min_errors: usize::MAX,
            max_trials: trials,
            min_trials: trials,
            separate_from: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_trials == 0 || self.min_trials > self.max_trials {
            return Err(Error::Argument(format!(
                "stop rule needs 0 < min_trials <= max_trials, got {} / {}",
                self.min_trials, self.max_trials
            )));
        }
        Ok(())
    }

    fn done(&self, trials: usize, errors: usize) -> bool {
        if trials >= self.max_trials {
            return true;
        }
        if trials < self.min_trials {
            return false;
        }
        errors >= self.min_errors
            || self
                .separate_from
                .is_some_and(|t| error_rate_interval(errors, trials).separates(t))
    }
}

/// Decoder and run settings shared by every point of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub max_iterations: usize,
    pub decoder: DecoderVariant,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            decoder: DecoderVariant::SumProduct,
            seed: 0,
            workers: 1,
        }
    }
}

/// One Monte-Carlo WER estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerPoint {
    pub code_hash: String,
    pub scheme: String,
    pub overall_rate: String,
    pub snr_linear: f64,
    pub snr_db: f64,
    pub trials: usize,
    pub word_errors: usize,
    pub detected_failures: usize,
    pub undetected_errors: usize,
    pub wer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub avg_iterations: f64,
    pub max_iterations: usize,
    pub decoder_variant: String,
    pub seed: u64,
}

impl WerPoint {
    pub fn interval(&self) -> Interval {
        Interval {
            low: self.ci_low,
            high: self.ci_high,
        }
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Argument("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))
}

/// Estimates the word error rate of `target` at linear SNR `snr`.
pub fn estimate_wer(target: &SimTarget, snr: f64, settings: &SimSettings, stop: &StopRule) -> Result<WerPoint> {
    let pool = build_pool(settings.workers)?;
    estimate_wer_in(&pool, target, snr, settings, stop)
}

fn estimate_wer_in(
    pool: &rayon::ThreadPool,
    target: &SimTarget,
    snr: f64,
    settings: &SimSettings,
    stop: &StopRule,
) -> Result<WerPoint> {
    let params = ChannelParams::new(snr)?;
    stop.validate()?;
    if settings.max_iterations == 0 {
        return Err(Error::Argument("max_iterations must be at least 1".into()));
    }
    let chunk = 4 * settings.workers;
    let (mut trials, mut detected, mut undetected, mut iterations) = (0usize, 0usize, 0usize, 0usize);
    'outer: while trials < stop.max_trials {
        let start = trials as u64;
        let end = (trials + chunk).min(stop.max_trials) as u64;
        let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map_init(
                    || TrialScratch::new(settings.decoder),
                    |scratch, i| target.run_trial(params, settings.seed, i, settings.max_iterations, scratch),
                )
                .collect()
        });
        for outcome in outcomes {
            let outcome = outcome?;
            trials += 1;
            iterations += outcome.iterations;
            match outcome.error {
                TrialError::None => {}
                TrialError::Detected => detected += 1,
                TrialError::Undetected => undetected += 1,
            }
            if stop.done(trials, detected + undetected) {
                break 'outer;
            }
        }
    }
    let errors = detected + undetected;
    let ci = error_rate_interval(errors, trials);
    Ok(WerPoint {
        code_hash: target.base.source_hash().to_string(),
        scheme: target.scheme.to_string(),
        overall_rate: target.overall_rate().to_string(),
        snr_linear: snr,
        snr_db: to_db(snr),
        trials,
        word_errors: errors,
        detected_failures: detected,
        undetected_errors: undetected,
        wer: errors as f64 / trials as f64,
        ci_low: ci.low,
        ci_high: ci.high,
        avg_iterations: iterations as f64 / trials as f64,
        max_iterations: settings.max_iterations,
        decoder_variant: settings.decoder.label(),
        seed: settings.seed,
    })
}

/// Bisection settings for [`find_snr_at_wer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Initial bracket in dB; when absent it starts at the Gaussian-capacity
    /// limit of the scheme's rate and spans `default_span_db`.
    pub lo_db: Option<f64>,
    pub hi_db: Option<f64>,
    pub default_span_db: f64,
    pub tolerance_db: f64,
    /// Trials per point: at least `min_trials`, then until the 95% interval
    /// excludes the target or `max_trials` is reached.
    pub min_trials: usize,
    pub max_trials: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lo_db: None,
            hi_db: None,
            default_span_db: 3.0,
            tolerance_db: 0.05,
            min_trials: 20,
            max_trials: 2_000,
        }
    }
}

/// SNR at which the WER crosses a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub scheme: String,
    pub overall_rate: Ratio<usize>,
    pub wer_target: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    /// Final bracket: WER above the target at `lo`, at or below it at `hi`.
    pub lo: WerPoint,
    pub hi: WerPoint,
    /// Every point evaluated, in order of evaluation.
    pub points: Vec<WerPoint>,
}

impl ThresholdResult {
    pub fn efficiency(&self, model: CapacityModel) -> Result<EfficiencyResult> {
        let mut e = efficiency(self.overall_rate, self.snr_linear, model)?;
        e.wer_at_measurement = Some(self.wer_target);
        Ok(e)
    }

    pub fn total_trials(&self) -> usize {
        self.points.iter().map(|p| p.trials).sum()
    }
}

/// Bisects in dB for the SNR where the WER of `target` equals `wer_target`,
/// then interpolates log-WER linearly in dB inside the final bracket.
pub fn find_snr_at_wer(
    target: &SimTarget,
    wer_target: f64,
    search: &SearchConfig,
    settings: &SimSettings,
) -> Result<ThresholdResult> {
    if !(wer_target > 0.0 && wer_target < 1.0) {
        return Err(Error::Argument(format!("WER target must lie in (0, 1), got {wer_target}")));
    }
    if !(search.tolerance_db > 0.0) {
        return Err(Error::Argument("tolerance_db must be positive".into()));
    }
    let rate = target.overall_rate();
    let limit_db = to_db(CapacityModel::Gaussian.snr_for_capacity(*rate.numer() as f64 / *rate.denom() as f64)?);
    let mut lo_db = search.lo_db.unwrap_or(limit_db);
    let mut hi_db = search.hi_db.unwrap_or(lo_db + search.default_span_db);
    if !(lo_db < hi_db) {
        return Err(Error::Argument(format!("empty search range [{lo_db}, {hi_db}] dB")));
    }
    let stop = StopRule {
        min_errors: usize::MAX,
        max_trials: search.max_trials,
        min_trials: search.min_trials,
        separate_from: Some(wer_target),
    };
    let pool = build_pool(settings.workers)?;
    let mut points = Vec::new();
    let mut eval = |db: f64| -> Result<WerPoint> {
        let p = estimate_wer_in(&pool, target, from_db(db), settings, &stop)?;
        points.push(p.clone());
        Ok(p)
    };

    let mut lo = eval(lo_db)?;
    if lo.wer <= wer_target {
        return Err(Error::Range(format!(
            "WER {} at the low end {lo_db:.3} dB is already at or below {wer_target}",
            lo.wer
        )));
    }
    let mut hi = eval(hi_db)?;
    if hi.wer > wer_target {
        return Err(Error::Range(format!(
            "WER {} at the high end {hi_db:.3} dB is still above {wer_target}",
            hi.wer
        )));
    }
    while hi_db - lo_db > search.tolerance_db {
        let mid_db = 0.5 * (lo_db + hi_db);
        let mid = eval(mid_db)?;
        if mid.wer > wer_target {
            (lo_db, lo) = (mid_db, mid);
        } else {
            (hi_db, hi) = (mid_db, mid);
        }
    }

    // Zero counts get half an event so the logarithm stays finite.
    let log_wer = |p: &WerPoint| {
        let n = p.trials as f64;
        (p.word_errors as f64).clamp(0.5, n - 0.5).ln() - n.ln()
    };
    let (a, b) = (log_wer(&lo), log_wer(&hi));
    let t = if a > b {
        ((a - wer_target.ln()) / (a - b)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let snr_db = lo_db + t * (hi_db - lo_db);
    Ok(ThresholdResult {
        scheme: target.scheme.to_string(),
        overall_rate: rate,
        wer_target,
        snr_linear: from_db(snr_db),
        snr_db,
        lo,
        hi,
        points,
    })
}

/// One row of an efficiency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub code_hash: String,
    pub scheme: String,
    pub overall_rate: String,
    pub rate: f64,
    pub wer_target: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    pub capacity_model: CapacityModel,
    pub c_of_s: f64,
    pub beta: f64,
    pub bracket_lo_db: f64,
    pub bracket_hi_db: f64,
    pub bracket_lo_wer: f64,
    pub bracket_hi_wer: f64,
    pub trials: usize,
}

impl EfficiencyRow {
    pub fn from_threshold(code_hash: &str, t: &ThresholdResult, model: CapacityModel) -> Result<Self> {
        let e = t.efficiency(model)?;
        Ok(EfficiencyRow {
            code_hash: code_hash.to_string(),
            scheme: t.scheme.clone(),
            overall_rate: t.overall_rate.to_string(),
            rate: *t.overall_rate.numer() as f64 / *t.overall_rate.denom() as f64,
            wer_target: t.wer_target,
            snr_linear: t.snr_linear,
            snr_db: t.snr_db,
            capacity_model: model,
            c_of_s: e.c_of_s,
            beta: e.beta,
            bracket_lo_db: t.lo.snr_db,
            bracket_hi_db: t.hi.snr_db,
            bracket_lo_wer: t.lo.wer,
            bracket_hi_wer: t.hi.wer,
            trials: t.total_trials(),
        })
    }
}

/// Efficiency at the measured threshold of every target and WER target.
pub fn efficiency_sweep(
    targets: &[SimTarget],
    wer_targets: &[f64],
    search: &SearchConfig,
    settings: &SimSettings,
    model: CapacityModel,
) -> Result<Vec<EfficiencyRow>> {
    let mut rows = Vec::new();
    for target in targets {
        for &w in wer_targets {
            let t = find_snr_at_wer(target, w, search, settings)?;
            rows.push(EfficiencyRow::from_threshold(target.base.source_hash(), &t, model)?);
        }
    }
    Ok(rows)
}

/// Measures the threshold of `base` under each scheme; `Hop` is always
/// included. Returns the profile together with the raw searches.
pub fn measure_profile(
    name: &str,
    base: Arc<QcRaCode>,
    schemes: &[RateAdaptScheme],
    wer_target: f64,
    search: &SearchConfig,
    settings: &SimSettings,
) -> Result<(CodeProfile, Vec<ThresholdResult>)> {
    let mut all = vec![RateAdaptScheme::Hop];
    all.extend(schemes.iter().copied().filter(|s| *s != RateAdaptScheme::Hop));
    let mut points = Vec::new();
    let mut searches = Vec::new();
    for scheme in all {
        let target = SimTarget::new(base.clone(), scheme)?;
        let t = find_snr_at_wer(&target, wer_target, search, settings)?;
        points.push(MeasuredPoint {
            scheme,
            threshold_snr: t.snr_linear,
        });
        searches.push(t);
    }
    let profile = CodeProfile {
        name: name.to_string(),
        n: base.n(),
        k: base.k(),
        wer_target,
        points,
    };
    Ok((profile, searches))
}

/// Hop/repeat versus adaptive selection at one channel SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub snr_db: f64,
    pub snr_linear: f64,
    pub capacity_model: CapacityModel,
    pub c_of_s: f64,
    pub hop_code: Option<String>,
    pub hop_scheme: Option<String>,
    pub hop_rate: Option<f64>,
    pub hop_beta: Option<f64>,
    pub adapt_code: Option<String>,
    pub adapt_scheme: Option<String>,
    pub adapt_rate: Option<f64>,
    pub adapt_beta: Option<f64>,
}

/// Predicted efficiency of both selection modes over `snr_grid_db`.
pub fn compare_schemes(
    bank: &[CodeProfile],
    snr_grid_db: &[f64],
    wer_target: f64,
    model: CapacityModel,
    max_repeat: usize,
) -> Result<Vec<ComparisonRow>> {
    if snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Argument("SNR grid must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(snr_grid_db.len());
    for &db in snr_grid_db {
        let s = from_db(db);
        let c = model.capacity(s);
        let pick = |mode| match select_scheme(s, wer_target, bank, mode, max_repeat) {
            Ok(sel) => Ok(Some(sel)),
            Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        };
        let hop = pick(SelectionMode::HopRepeat)?;
        let adapt = pick(SelectionMode::Adaptive)?;
        let rate = |sel: &Option<crate::rate_adapt::Selection>| {
            sel.as_ref().map(|x| *x.overall_rate.numer() as f64 / *x.overall_rate.denom() as f64)
        };
        rows.push(ComparisonRow {
            snr_db: db,
            snr_linear: s,
            capacity_model: model,
            c_of_s: c,
            hop_code: hop.as_ref().map(|x| x.code_name.clone()),
            hop_scheme: hop.as_ref().map(|x| x.scheme.to_string()),
            hop_rate: rate(&hop),
            hop_beta: rate(&hop).map(|r| r / c),
            adapt_code: adapt.as_ref().map(|x| x.code_name.clone()),
            adapt_scheme: adapt.as_ref().map(|x| x.scheme.to_string()),
            adapt_rate: rate(&adapt),
            adapt_beta: rate(&adapt).map(|r| r / c),
        });
    }
    Ok(rows)
}
