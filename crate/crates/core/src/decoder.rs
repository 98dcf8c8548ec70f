//! Flooding-schedule belief-propagation decoding.
//!
//! LLRs follow `ln(P(b = 0) / P(b = 1))`: positive values favour bit 0.
//! Messages are clamped to `±LLR_CLAMP`. A hard decision of exactly 0 maps to
//! bit 0. Decoding stops as soon as the hard decisions satisfy every check.

use serde::{Deserialize, Serialize};

use crate::codebook::QcRaCode;
use crate::encoder::Codeword;
use crate::error::{Error, Result};
use crate::graph::TannerGraph;

/// Magnitude limit for every message inside the decoder.
pub const LLR_CLAMP: f64 = 30.0;

/// Default scaling for normalized min-sum.
pub const MIN_SUM_SCALE: f64 = 0.8;

/// Per-bit channel log-likelihood ratios.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrVector(pub Vec<f64>);

impl LlrVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Check-node arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderVariant {
    /// Exact tanh-rule sum-product.
    SumProduct,
    /// Normalized min-sum with the given scale factor.
    MinSum { scale: f64 },
}

impl Default for DecoderVariant {
    fn default() -> Self {
        DecoderVariant::SumProduct
    }
}

impl DecoderVariant {
    /// Short label written into result records.
    pub fn label(&self) -> String {
        match self {
            DecoderVariant::SumProduct => "sum-product/flooding".to_string(),
            DecoderVariant::MinSum { scale } => format!("min-sum({scale})/flooding"),
        }
    }
}

impl std::str::FromStr for DecoderVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum-product" | "sp" => Ok(DecoderVariant::SumProduct),
            "min-sum" | "ms" => Ok(DecoderVariant::MinSum {
                scale: MIN_SUM_SCALE,
            }),
            other => Err(Error::Argument(format!(
                "unknown decoder variant {other:?} (expected sum-product or min-sum)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Hard-decision estimate of the whole word.
    pub bits: Codeword,
    /// All checks satisfied.
    pub converged: bool,
    /// Iterations run; 0 when the channel hard decisions were already valid.
    pub iterations_used: usize,
    pub detected_failure: bool,
}

/// Decoder with reusable scratch buffers.
///
/// One `Decoder` serves any number of sequential calls, on any graph.
///
/// Sum-product runs in the likelihood-ratio domain: every message is stored
/// as `exp(llr)`, clamped to `[exp(-30), exp(30)]`, so the inner loops need
/// no transcendental functions. Min-sum runs on LLRs directly.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    variant: DecoderVariant,
    channel: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    hard: Vec<u8>,
    scratch: Vec<f64>,
}

impl Decoder {
    pub fn new(variant: DecoderVariant) -> Self {
        Decoder {
            variant,
            ..Default::default()
        }
    }

    pub fn variant(&self) -> DecoderVariant {
        self.variant
    }

    pub fn decode(
        &mut self,
        graph: &TannerGraph,
        llrs: &[f64],
        max_iterations: usize,
    ) -> Result<DecodeResult> {
        if llrs.len() != graph.n_vars() {
            return Err(Error::Length {
                expected: graph.n_vars(),
                actual: llrs.len(),
            });
        }
        if max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        if let Some(i) = llrs.iter().position(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("non-finite LLR at position {i}")));
        }

        self.hard.clear();
        self.hard.extend(llrs.iter().map(|&x| (x < 0.0) as u8));
        if graph.is_codeword(&self.hard) {
            return Ok(self.result(true, 0));
        }

        let likelihood = matches!(self.variant, DecoderVariant::SumProduct);
        self.channel.clear();
        self.channel.extend(llrs.iter().map(|&x| {
            let x = x.clamp(-LLR_CLAMP, LLR_CLAMP);
            if likelihood {
                x.exp()
            } else {
                x
            }
        }));
        self.v2c.clear();
        self.v2c
            .extend(graph.edge_var().iter().map(|&v| self.channel[v as usize]));
        self.c2v.clear();
        self.c2v.resize(graph.n_edges(), 0.0);

        for iteration in 1..=max_iterations {
            match self.variant {
                DecoderVariant::SumProduct => {
                    for c in 0..graph.n_checks() {
                        let edges = graph.check_edges(c);
                        lr_check(&self.v2c[edges.clone()], &mut self.c2v[edges], &mut self.scratch);
                    }
                    self.lr_vars(graph);
                }
                DecoderVariant::MinSum { scale } => {
                    for c in 0..graph.n_checks() {
                        let edges = graph.check_edges(c);
                        min_sum_check(&self.v2c[edges.clone()], &mut self.c2v[edges], scale);
                    }
                    self.llr_vars(graph);
                }
            }
            if graph.is_codeword(&self.hard) {
                return Ok(self.result(true, iteration));
            }
        }
        Ok(self.result(false, max_iterations))
    }

    fn result(&self, converged: bool, iterations_used: usize) -> DecodeResult {
        DecodeResult {
            bits: Codeword(self.hard.iter().map(|&b| b != 0).collect()),
            converged,
            iterations_used,
            detected_failure: !converged,
        }
    }

    fn lr_vars(&mut self, graph: &TannerGraph) {
        for (v, &ch) in self.channel.iter().enumerate() {
            let edges = graph.var_edges(v);
            let total = if edges.len() <= SAFE_PRODUCT_DEGREE {
                edges.iter().fold(ch, |acc, &e| acc * self.c2v[e as usize])
            } else {
                renormalized_product(ch, edges.iter().map(|&e| self.c2v[e as usize]))
            };
            self.hard[v] = (total < 1.0) as u8;
            for &e in edges {
                let e = e as usize;
                self.v2c[e] = (total / self.c2v[e]).clamp(LR_MIN, LR_MAX);
            }
        }
    }

    fn llr_vars(&mut self, graph: &TannerGraph) {
        for (v, &ch) in self.channel.iter().enumerate() {
            let edges = graph.var_edges(v);
            let total = ch + edges.iter().map(|&e| self.c2v[e as usize]).sum::<f64>();
            self.hard[v] = (total < 0.0) as u8;
            for &e in edges {
                let e = e as usize;
                self.v2c[e] = (total - self.c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
            }
        }
    }
}

const LR_MAX: f64 = 1.068_647_458_152_446_2e13; // exp(30)
const LR_MIN: f64 = 9.357_622_968_840_175e-14; // exp(-30)

/// Up to this many clamped factors (times the channel value) the plain
/// product cannot leave the f64 range: 21 * 30 < 709.
const SAFE_PRODUCT_DEGREE: usize = 22;

/// Product of likelihood ratios that stays finite for any degree. Once the
/// running product leaves `2^(+-500)` the true LLR magnitude exceeds 300, far
/// beyond the clamp, so saturating to 0 or infinity keeps every derived
/// extrinsic message and hard decision exact.
fn renormalized_product(init: f64, factors: impl Iterator<Item = f64>) -> f64 {
    const HI: f64 = 3.273_390_607_896_142e150; // 2^500
    const LO: f64 = 3.054_936_363_499_605e-151; // 2^-500
    let mut mantissa = init;
    let mut scale: i32 = 0;
    for f in factors {
        mantissa *= f;
        if mantissa > HI {
            mantissa *= LO;
            scale += 1;
        } else if mantissa < LO {
            mantissa *= HI;
            scale -= 1;
        }
    }
    match scale {
        0 => mantissa,
        s if s > 0 => mantissa * HI.powi(s),
        s => mantissa * LO.powi(-s),
    }
}

/// Decodes `llrs` on the full `[H1 | A]` graph of `code`.
///
/// Builds the graph on every call; hold a [`TannerGraph`] and a [`Decoder`]
/// for repeated use.
pub fn decode(code: &QcRaCode, llrs: &LlrVector, max_iterations: usize) -> Result<DecodeResult> {
    Decoder::new(DecoderVariant::SumProduct).decode(&code.tanner_graph(), &llrs.0, max_iterations)
}

/// Sum-product check update: outbound `i` is
/// `2 atanh(prod_{j != i} tanh(inbound_j / 2))`.
///
/// Runs the decoder's likelihood-ratio kernel on `exp(inbound)`.
///
/// # Panics
///
/// Panics with fewer than two inbound messages.
pub fn check_node_update(inbound: &[f64]) -> Vec<f64> {
    assert!(inbound.len() >= 2, "check node needs at least two edges");
    let lr: Vec<f64> = inbound
        .iter()
        .map(|x| x.clamp(-LLR_CLAMP, LLR_CLAMP).exp())
        .collect();
    let mut out = vec![0.0; inbound.len()];
    lr_check(&lr, &mut out, &mut Vec::new());
    out.iter().map(|x| x.ln()).collect()
}

/// Check update on likelihood ratios `L = exp(llr)`.
///
/// Two inputs `a, b` combine to `(1 + ab) / (a + b)`; in general the rule is
/// `tanh(llr/2) = (L - 1) / (L + 1)` products, mapped back by
/// `L = (1 + p) / (1 - p)`.
fn lr_check(inbound: &[f64], outbound: &mut [f64], scratch: &mut Vec<f64>) {
    match inbound.len() {
        0 => {}
        1 => outbound[0] = LR_MAX,
        2 => {
            outbound[0] = inbound[1];
            outbound[1] = inbound[0];
        }
        3 => {
            let (a, b, c) = (inbound[0], inbound[1], inbound[2]);
            outbound[0] = ((1.0 + b * c) / (b + c)).clamp(LR_MIN, LR_MAX);
            outbound[1] = ((1.0 + a * c) / (a + c)).clamp(LR_MIN, LR_MAX);
            outbound[2] = ((1.0 + a * b) / (a + b)).clamp(LR_MIN, LR_MAX);
        }
        d => {
            scratch.clear();
            scratch.extend(inbound.iter().map(|&l| (l - 1.0) / (l + 1.0)));
            let mut prefix = 1.0;
            for j in 0..d {
                outbound[j] = prefix;
                prefix *= scratch[j];
            }
            let mut suffix = 1.0;
            for j in (0..d).rev() {
                let p = outbound[j] * suffix;
                outbound[j] = if p >= 1.0 {
                    LR_MAX
                } else {
                    ((1.0 + p) / (1.0 - p)).clamp(LR_MIN, LR_MAX)
                };
                suffix *= scratch[j];
            }
        }
    }
}

fn min_sum_check(inbound: &[f64], outbound: &mut [f64], scale: f64) {
    if inbound.len() == 1 {
        outbound[0] = LLR_CLAMP;
        return;
    }
    let mut min1 = f64::INFINITY;
    let mut min2 = f64::INFINITY;
    let mut argmin = 0;
    let mut negative = false;
    for (j, &x) in inbound.iter().enumerate() {
        let a = x.abs();
        negative ^= x < 0.0;
        if a < min1 {
            min2 = min1;
            min1 = a;
            argmin = j;
        } else if a < min2 {
            min2 = a;
        }
    }
    for (j, (out, &x)) in outbound.iter_mut().zip(inbound).enumerate() {
        let mag = if j == argmin { min2 } else { min1 };
        let sign = if negative ^ (x < 0.0) { -1.0 } else { 1.0 };
        *out = sign * scale * mag;
    }
}
