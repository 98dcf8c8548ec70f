//! Rate adjustment around a base code.
//!
//! * puncturing raises the rate: selected parity bits are not sent and enter
//!   the decoder as erasures (LLR 0);
//! * extending lowers it: `M_e` extra parity bits, each the XOR of two
//!   message bits, giving `H_etnd = [[H1, A, 0], [E, 0, I]]`;
//! * repetition lowers it by an integer factor `k`: each bit is sent `k`
//!   times and the observations are combined by adding LLRs;
//! * hopping switches between base codes.
//!
//! [`select_scheme`] picks the highest-rate option predicted to reach a WER
//! target from measured thresholds.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::channel::{from_db, to_db};
use crate::codebook::QcRaCode;
use crate::decoder::LlrVector;
use crate::encoder::{encode, Codeword, MessageBits};
use crate::error::{Error, Result};
use crate::graph::TannerGraph;

/// Version tag of the puncturing pattern rule, recorded with results.
pub const PUNCTURE_RULE: &str = "parity-even-spacing-v1";
/// Version tag of the extension-row rule, recorded with results.
pub const EXTEND_RULE: &str = "weight2-shift-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateAdaptScheme {
    /// The base code as is.
    Hop,
    /// `count` parity bits punctured at [`puncture_pattern`] positions.
    Puncture { count: usize },
    /// `count` extra rows from [`build_extended`].
    Extend { count: usize },
    /// Every bit sent `factor` times.
    Repeat { factor: usize },
}

impl RateAdaptScheme {
    /// Checks the scheme against a base code with length `n` and dimension `k`.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        match *self {
            RateAdaptScheme::Hop => Ok(()),
            RateAdaptScheme::Puncture { count } if count > n - k => Err(Error::Construction(
                format!("cannot puncture {count} bits: only {} parity bits", n - k),
            )),
            RateAdaptScheme::Puncture { .. } => Ok(()),
            RateAdaptScheme::Extend { count: 0 } => {
                Err(Error::Construction("extension needs at least one row".into()))
            }
            RateAdaptScheme::Extend { .. } => Ok(()),
            RateAdaptScheme::Repeat { factor } if factor < 2 => Err(Error::Construction(
                format!("repetition factor must be at least 2, got {factor}"),
            )),
            RateAdaptScheme::Repeat { .. } => Ok(()),
        }
    }

    /// Exact rate after adaptation of an `(n, k)` base code.
    pub fn overall_rate(&self, n: usize, k: usize) -> Result<Ratio<usize>> {
        self.validate(n, k)?;
        Ok(match *self {
            RateAdaptScheme::Hop => Ratio::new(k, n),
            RateAdaptScheme::Puncture { count } => Ratio::new(k, n - count),
            RateAdaptScheme::Extend { count } => Ratio::new(k, n + count),
            RateAdaptScheme::Repeat { factor } => Ratio::new(k, n * factor),
        })
    }

    /// Channel uses per codeword.
    pub fn transmitted_bits(&self, n: usize) -> usize {
        match *self {
            RateAdaptScheme::Hop => n,
            RateAdaptScheme::Puncture { count } => n - count,
            RateAdaptScheme::Extend { count } => n + count,
            RateAdaptScheme::Repeat { factor } => n * factor,
        }
    }

    /// Rule version behind the scheme's positions or rows, if any.
    pub fn rule(&self) -> Option<&'static str> {
        match self {
            RateAdaptScheme::Puncture { .. } => Some(PUNCTURE_RULE),
            RateAdaptScheme::Extend { .. } => Some(EXTEND_RULE),
            _ => None,
        }
    }

    /// Serializable record of the scheme applied to an `(n, k)` code.
    pub fn descriptor(&self, n: usize, k: usize) -> Result<SchemeDescriptor> {
        Ok(SchemeDescriptor {
            scheme: *self,
            rule: self.rule().map(str::to_string),
            overall_rate: self.overall_rate(n, k)?,
        })
    }
}

impl fmt::Display for RateAdaptScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateAdaptScheme::Hop => write!(f, "hop"),
            RateAdaptScheme::Puncture { count } => write!(f, "puncture({count})"),
            RateAdaptScheme::Extend { count } => write!(f, "extend({count})"),
            RateAdaptScheme::Repeat { factor } => write!(f, "repeat({factor})"),
        }
    }
}

/// Scheme as written into result records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDescriptor {
    #[serde(flatten)]
    pub scheme: RateAdaptScheme,
    pub rule: Option<String>,
    pub overall_rate: Ratio<usize>,
}

/// Parity positions `k + floor(i * m / count)` for `i < count`.
pub fn puncture_pattern(n: usize, k: usize, count: usize) -> Result<Vec<usize>> {
    RateAdaptScheme::Puncture { count }.validate(n, k)?;
    let m = n - k;
    Ok((0..count).map(|i| k + i * m / count).collect())
}

/// Copy of `llrs` with every position in `pattern` erased.
pub fn puncture_llrs(llrs: &LlrVector, pattern: &[usize]) -> Result<LlrVector> {
    let mut out = llrs.clone();
    puncture_in_place(&mut out.0, pattern)?;
    Ok(out)
}

pub fn puncture_in_place(llrs: &mut [f64], pattern: &[usize]) -> Result<()> {
    if let Some(&p) = pattern.iter().find(|&&p| p >= llrs.len()) {
        return Err(Error::Argument(format!(
            "puncture position {p} outside word of length {}",
            llrs.len()
        )));
    }
    for &p in pattern {
        llrs[p] = 0.0;
    }
    Ok(())
}

/// Sums each group of repeated observations into one LLR.
pub fn combine_repeated_llrs<G: AsRef<[f64]>>(groups: &[G]) -> Result<LlrVector> {
    let k = groups.first().map_or(0, |g| g.as_ref().len());
    if k < 2 {
        return Err(Error::Argument(format!(
            "repetition groups need at least 2 values, got {k}"
        )));
    }
    let mut out = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() != k {
            return Err(Error::Argument(format!(
                "ragged repetition group {i}: {} values, expected {k}",
                g.len()
            )));
        }
        out.push(g.iter().sum());
    }
    Ok(LlrVector(out))
}

/// [`combine_repeated_llrs`] over a flat buffer holding `factor` consecutive
/// observations per bit.
pub fn combine_repeated_flat(observations: &[f64], factor: usize, out: &mut Vec<f64>) -> Result<()> {
    if factor < 2 || observations.len() % factor != 0 {
        return Err(Error::Argument(format!(
            "{} observations do not split into groups of {factor} >= 2",
            observations.len()
        )));
    }
    out.clear();
    out.extend(observations.chunks_exact(factor).map(|g| g.iter().sum::<f64>()));
    Ok(())
}

/// Base code plus `M_e` weight-2 extension rows.
#[derive(Debug, Clone)]
pub struct ExtendedCode {
    base: Arc<QcRaCode>,
    e_rows: Vec<[u32; 2]>,
}

/// Extends `base` by `m_e` rows; row `i` joins message columns `i mod K` and
/// `(i + 1 + floor(i / K)) mod K`.
pub fn build_extended(base: Arc<QcRaCode>, m_e: usize) -> Result<ExtendedCode> {
    RateAdaptScheme::Extend { count: m_e }.validate(base.n(), base.k())?;
    let k = base.k();
    let mut seen = HashSet::with_capacity(m_e);
    let mut e_rows = Vec::with_capacity(m_e);
    for i in 0..m_e {
        let j1 = i % k;
        let j2 = (i + 1 + i / k) % k;
        if j1 == j2 {
            return Err(Error::Construction(format!(
                "extension row {i} has coinciding columns {j1} (m_e = {m_e}, K = {k})"
            )));
        }
        let key = (j1.min(j2), j1.max(j2));
        if !seen.insert(key) {
            return Err(Error::Construction(format!(
                "extension row {i} repeats columns {key:?}"
            )));
        }
        e_rows.push([j1 as u32, j2 as u32]);
    }
    Ok(ExtendedCode { base, e_rows })
}

impl ExtendedCode {
    pub fn base(&self) -> &QcRaCode {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n() + self.e_rows.len()
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    pub fn m_e(&self) -> usize {
        self.e_rows.len()
    }

    pub fn rate(&self) -> Ratio<usize> {
        Ratio::new(self.k(), self.n())
    }

    pub fn e_row(&self, i: usize) -> [usize; 2] {
        let [a, b] = self.e_rows[i];
        [a as usize, b as usize]
    }

    /// Base codeword followed by the extra parity `u_j1 ^ u_j2` of each row.
    pub fn encode(&self, msg: &MessageBits) -> Result<Codeword> {
        let mut word = encode(&self.base, msg)?.0;
        word.reserve(self.e_rows.len());
        for &[a, b] in &self.e_rows {
            let bit = msg.0[a as usize] ^ msg.0[b as usize];
            word.push(bit);
        }
        Ok(Codeword(word))
    }

    /// Unsatisfied checks among all `M + M_e` rows.
    pub fn syndrome_weight(&self, word: &Codeword) -> Result<usize> {
        if word.len() != self.n() {
            return Err(Error::Length {
                expected: self.n(),
                actual: word.len(),
            });
        }
        let n = self.base.n();
        let base = crate::encoder::syndrome_weight(&self.base, &Codeword(word.0[..n].to_bitvec()))?;
        let extra = self
            .e_rows
            .iter()
            .enumerate()
            .filter(|(i, &[a, b])| word.0[a as usize] ^ word.0[b as usize] ^ word.0[n + i])
            .count();
        Ok(base + extra)
    }

    pub fn tanner_graph(&self) -> TannerGraph {
        let base = &self.base;
        let n = base.n();
        let base_rows = (0..base.m()).map(|i| base.full_row(i).collect::<Vec<_>>());
        let extra_rows = self
            .e_rows
            .iter()
            .enumerate()
            .map(|(i, &[a, b])| vec![a as usize, b as usize, n + i]);
        TannerGraph::from_rows(self.n(), base_rows.chain(extra_rows))
    }
}

/// Threshold SNR (linear) of one scheme at a profile's WER target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPoint {
    pub scheme: RateAdaptScheme,
    pub threshold_snr: f64,
}

/// Measured thresholds of one base code and its puncture/extend family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeProfile {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub wer_target: f64,
    /// Must contain a `Hop` point; `Repeat` points are ignored since their
    /// thresholds follow from the hop threshold.
    pub points: Vec<MeasuredPoint>,
}

impl CodeProfile {
    pub fn hop_threshold(&self) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.scheme == RateAdaptScheme::Hop)
            .map(|p| p.threshold_snr)
    }

    /// `(rate, threshold dB)` of the hop/puncture/extend points, by rate.
    fn curve(&self) -> Result<Vec<(f64, f64)>> {
        let mut curve = Vec::new();
        for p in &self.points {
            if matches!(p.scheme, RateAdaptScheme::Repeat { .. }) {
                continue;
            }
            if !(p.threshold_snr > 0.0) {
                return Err(Error::Argument(format!(
                    "profile {}: non-positive threshold for {}",
                    self.name, p.scheme
                )));
            }
            curve.push((ratio_f64(p.scheme.overall_rate(self.n, self.k)?), to_db(p.threshold_snr)));
        }
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        curve.dedup_by(|a, b| a.0 == b.0);
        Ok(curve)
    }

    /// Threshold (dB) predicted at `rate`, if `rate` lies within the measured
    /// range. Interpolation is linear in `ln(rate)`: exact for a locally
    /// constant efficiency at low SNR, where the threshold scales with rate.
    pub fn predicted_threshold_db(&self, rate: f64) -> Result<Option<f64>> {
        Ok(interpolate(&self.curve()?, rate))
    }
}

fn interpolate(curve: &[(f64, f64)], rate: f64) -> Option<f64> {
    let (first, last) = (curve.first()?, curve.last()?);
    if rate < first.0 || rate > last.0 {
        return None;
    }
    for w in curve.windows(2) {
        let ((r0, t0), (r1, t1)) = (w[0], w[1]);
        if rate <= r1 {
            return Some(t0 + (t1 - t0) * (rate / r0).ln() / (r1 / r0).ln());
        }
    }
    Some(last.1)
}

/// Largest rate whose interpolated threshold is at most `target_db`.
fn max_feasible_rate(curve: &[(f64, f64)], target_db: f64) -> Option<f64> {
    let &(r_top, t_top) = curve.last()?;
    if t_top <= target_db {
        return Some(r_top);
    }
    for w in curve.windows(2).rev() {
        let ((r0, t0), (r1, t1)) = (w[0], w[1]);
        if t0 <= target_db {
            return Some(r0 * (r1 / r0).powf((target_db - t0) / (t1 - t0)));
        }
    }
    None
}

fn ratio_f64(r: Ratio<usize>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Base codes and their repetitions only.
    HopRepeat,
    /// Also puncture and extend, interpolating measured thresholds.
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub code_index: usize,
    pub code_name: String,
    pub scheme: RateAdaptScheme,
    pub overall_rate: Ratio<usize>,
    /// Predicted threshold SNR (linear) of the chosen scheme.
    pub predicted_threshold: f64,
}

/// Highest-rate scheme predicted to reach `wer_target` at `target_snr`.
///
/// Repetition by `k` divides the hop threshold by `k`. In adaptive mode the
/// threshold (dB) of an arbitrary puncture/extend count is interpolated
/// linearly in `ln(rate)` between measured points; no extrapolation beyond
/// them.
pub fn select_scheme(
    target_snr: f64,
    wer_target: f64,
    bank: &[CodeProfile],
    mode: SelectionMode,
    max_repeat: usize,
) -> Result<Selection> {
    if !(target_snr > 0.0 && target_snr.is_finite()) {
        return Err(Error::Argument(format!("target SNR must be positive, got {target_snr}")));
    }
    let target_db = to_db(target_snr);
    let mut best: Option<Selection> = None;
    // Equal rates favour the least adaptation.
    let rank = |s: &Selection| {
        let plainness = match s.scheme {
            RateAdaptScheme::Hop => 2,
            RateAdaptScheme::Puncture { .. } | RateAdaptScheme::Extend { .. } => 1,
            RateAdaptScheme::Repeat { .. } => 0,
        };
        (s.overall_rate, plainness)
    };
    let mut consider = |cand: Selection| {
        if best.as_ref().map_or(true, |b| rank(&cand) > rank(b)) {
            best = Some(cand);
        }
    };
    for (idx, profile) in bank.iter().enumerate() {
        if (profile.wer_target - wer_target).abs() > 1e-12 * wer_target {
            return Err(Error::Argument(format!(
                "profile {} measured at WER {}, requested {wer_target}",
                profile.name, profile.wer_target
            )));
        }
        let hop = profile.hop_threshold().ok_or_else(|| {
            Error::Argument(format!("profile {} has no hop threshold", profile.name))
        })?;
        let candidate = |scheme: RateAdaptScheme, threshold: f64| -> Result<Selection> {
            Ok(Selection {
                code_index: idx,
                code_name: profile.name.clone(),
                scheme,
                overall_rate: scheme.overall_rate(profile.n, profile.k)?,
                predicted_threshold: threshold,
            })
        };
        if hop <= target_snr {
            consider(candidate(RateAdaptScheme::Hop, hop)?);
        }
        if mode == SelectionMode::Adaptive {
            if let Some(c) = adapted_candidate(profile, target_db)? {
                consider(candidate(c.0, c.1)?);
            }
        }
        for factor in 2..=max_repeat {
            let threshold = hop / factor as f64;
            if threshold <= target_snr {
                consider(candidate(RateAdaptScheme::Repeat { factor }, threshold)?);
                break;
            }
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no scheme reaches WER {wer_target} at SNR {target_snr} ({target_db:.3} dB)"
        ))
    })
}

/// Integer puncture/extend count realising the largest feasible rate.
fn adapted_candidate(profile: &CodeProfile, target_db: f64) -> Result<Option<(RateAdaptScheme, f64)>> {
    let curve = profile.curve()?;
    let Some(rate) = max_feasible_rate(&curve, target_db) else {
        return Ok(None);
    };
    let (n, k) = (profile.n, profile.k);
    let needed = k as f64 / rate;
    let mut scheme = if needed <= n as f64 + 1e-9 {
        let count = ((n as f64 - needed) + 1e-6).floor().max(0.0) as usize;
        if count == 0 { RateAdaptScheme::Hop } else { RateAdaptScheme::Puncture { count } }
    } else {
        RateAdaptScheme::Extend {
            count: ((needed - n as f64) - 1e-6).ceil() as usize,
        }
    };
    // Rounding may leave the realised rate a hair above the feasible one.
    loop {
        let r = ratio_f64(scheme.overall_rate(n, k)?);
        match interpolate(&curve, r) {
            Some(t) if t <= target_db + 1e-9 => return Ok(Some((scheme, from_db(t)))),
            Some(_) => {
                scheme = match scheme {
                    RateAdaptScheme::Puncture { count: 1 } => RateAdaptScheme::Hop,
                    RateAdaptScheme::Puncture { count } => RateAdaptScheme::Puncture { count: count - 1 },
                    RateAdaptScheme::Hop => RateAdaptScheme::Extend { count: 1 },
                    RateAdaptScheme::Extend { count } => RateAdaptScheme::Extend { count: count + 1 },
                    RateAdaptScheme::Repeat { .. } => unreachable!(),
                }
            }
            None => return Ok(None),
        }
    }
}
