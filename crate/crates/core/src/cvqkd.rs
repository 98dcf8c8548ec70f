//! Asymptotic secret key rate of coherent-state CV-QKD with homodyne
//! detection and reverse reconciliation, under collective attacks.
//!
//! All variances are in shot-noise units, rates in bits per symbol.
//!
//! With `V = V_A + 1` and the noises referred to the channel input
//!
//! ```text
//! chi_line = 1/T - 1 + eps
//! chi_hom  = (1 + v_el)/eta - 1
//! chi_tot  = chi_line + chi_hom / T
//! I_AB     = 1/2 log2((V + chi_tot) / (1 + chi_tot))
//! ```
//!
//! Eve's information is the Holevo bound
//! `I_E = G((l1-1)/2) + G((l2-1)/2) - G((l3-1)/2) - G((l4-1)/2)` with
//! `G(x) = (x+1) log2(x+1) - x log2 x` and the symplectic eigenvalues
//!
//! ```text
//! A = V^2 (1 - 2T) + 2T + T^2 (V + chi_line)^2
//! B = T^2 (V chi_line + 1)^2
//! l1,2^2 = (A +- sqrt(A^2 - 4B)) / 2
//! C = (V sqrt(B) + T (V + chi_line) + A chi_hom) / (T (V + chi_tot))
//! D = sqrt(B) (V + sqrt(B) chi_hom) / (T (V + chi_tot))
//! l3,4^2 = (C +- sqrt(C^2 - 4D)) / 2
//! ```
//!
//! (the fifth eigenvalue is 1 and contributes nothing). The key rate is
//! `dI = (beta I_AB - I_E)(1 - p_fail)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fibre loss.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;
/// Default upper limit on the modulation variance when matching an SNR.
pub const DEFAULT_VA_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvqkdParams {
    pub modulation_variance: f64,
    pub transmission: f64,
    pub excess_noise: f64,
    pub detector_efficiency: f64,
    pub electronic_noise: f64,
    pub attenuation_db_per_km: f64,
}

impl CvqkdParams {
    /// Link with the given noise figures, unit transmission and `V_A = 1`.
    pub fn link(excess_noise: f64, detector_efficiency: f64, electronic_noise: f64) -> Self {
        CvqkdParams {
            modulation_variance: 1.0,
            transmission: 1.0,
            excess_noise,
            detector_efficiency,
            electronic_noise,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self;
        let bad = |what: &str, v: f64| Err(Error::Domain(format!("{what} = {v} is not physical")));
        if !(p.modulation_variance > 0.0 && p.modulation_variance.is_finite()) {
            return bad("V_A", p.modulation_variance);
        }
        if !(p.transmission > 0.0 && p.transmission <= 1.0) {
            return bad("T", p.transmission);
        }
        if !(p.excess_noise >= 0.0 && p.excess_noise.is_finite()) {
            return bad("excess noise", p.excess_noise);
        }
        if !(p.detector_efficiency > 0.0 && p.detector_efficiency <= 1.0) {
            return bad("detector efficiency", p.detector_efficiency);
        }
        if !(p.electronic_noise >= 0.0 && p.electronic_noise.is_finite()) {
            return bad("electronic noise", p.electronic_noise);
        }
        if !(p.attenuation_db_per_km >= 0.0 && p.attenuation_db_per_km.is_finite()) {
            return bad("attenuation", p.attenuation_db_per_km);
        }
        Ok(())
    }

    /// `T = 10^(-alpha d / 10)`.
    pub fn transmission_at(&self, distance_km: f64) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * distance_km / 10.0)
    }

    pub fn at_distance(&self, distance_km: f64) -> Self {
        CvqkdParams {
            transmission: self.transmission_at(distance_km),
            ..*self
        }
    }

    pub fn with_modulation_variance(&self, v_a: f64) -> Self {
        CvqkdParams {
            modulation_variance: v_a,
            ..*self
        }
    }

    fn noise_denominator(&self) -> f64 {
        1.0 + self.electronic_noise + self.detector_efficiency * self.transmission * self.excess_noise
    }
}

/// `s = eta T V_A / (1 + v_el + eta T eps)`.
pub fn snr_from_params(p: &CvqkdParams) -> f64 {
    p.detector_efficiency * p.transmission * p.modulation_variance / p.noise_denominator()
}

/// Modulation variance giving SNR `s`: `V_A = s (1 + v_el + eta T eps) / (eta T)`.
pub fn solve_va(p: &CvqkdParams, s: f64) -> f64 {
    s * p.noise_denominator() / (p.detector_efficiency * p.transmission)
}

/// `G(x) = (x+1) log2(x+1) - x log2 x`, with `G(0) = 0`.
pub fn g_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Mutual information between the parties, bits per symbol.
pub fn mutual_information(p: &CvqkdParams) -> Result<f64> {
    p.validate()?;
    let n = Noises::new(p);
    Ok(0.5 * ((n.v + n.chi_tot) / (1.0 + n.chi_tot)).log2())
}

/// Holevo bound on Eve's information for reverse reconciliation.
pub fn holevo_bound(p: &CvqkdParams) -> Result<f64> {
    p.validate()?;
    let Noises { v, chi_line, chi_hom, chi_tot } = Noises::new(p);
    let t = p.transmission;
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let sqrt_b = b.sqrt();
    let c = (v * sqrt_b + t * (v + chi_line) + a * chi_hom) / (t * (v + chi_tot));
    let d = sqrt_b * (v + sqrt_b * chi_hom) / (t * (v + chi_tot));
    let (l1, l2) = symplectic_pair(a, b);
    let (l3, l4) = symplectic_pair(c, d);
    let h = |l: f64| g_entropy((l - 1.0) / 2.0);
    Ok((h(l1) + h(l2) - h(l3) - h(l4)).max(0.0))
}

/// Roots of `l^4 - x l^2 + y` as `(l+, l-)`, each at least 1.
fn symplectic_pair(x: f64, y: f64) -> (f64, f64) {
    let disc = (x * x - 4.0 * y).max(0.0).sqrt();
    let plus = (0.5 * (x + disc)).sqrt().max(1.0);
    let minus = (0.5 * (x - disc)).max(0.0).sqrt().max(1.0);
    (plus, minus)
}

struct Noises {
    v: f64,
    chi_line: f64,
    chi_hom: f64,
    chi_tot: f64,
}

impl Noises {
    fn new(p: &CvqkdParams) -> Self {
        let chi_line = 1.0 / p.transmission - 1.0 + p.excess_noise;
        let chi_hom = (1.0 + p.electronic_noise) / p.detector_efficiency - 1.0;
        Noises {
            v: p.modulation_variance + 1.0,
            chi_line,
            chi_hom,
            chi_tot: chi_line + chi_hom / p.transmission,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRatePoint {
    pub distance_km: f64,
    pub transmission: f64,
    pub modulation_variance: f64,
    pub snr_linear: f64,
    pub beta: f64,
    pub p_fail: f64,
    pub i_ab: f64,
    pub i_e: f64,
    /// `(beta I_AB - I_E)(1 - p_fail)`, possibly negative.
    pub delta_i: f64,
}

impl KeyRatePoint {
    /// Key rate clamped at zero for plotting.
    pub fn delta_i_floored(&self) -> f64 {
        self.delta_i.max(0.0)
    }
}

/// Key rate for `params` with reconciliation efficiency `beta` and frame
/// error rate `p_fail`. `distance_km` is recorded as given.
pub fn key_rate(p: &CvqkdParams, beta: f64, p_fail: f64, distance_km: f64) -> Result<KeyRatePoint> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("efficiency {beta} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::Domain(format!("p_fail {p_fail} outside [0, 1]")));
    }
    let i_ab = mutual_information(p)?;
    let i_e = holevo_bound(p)?;
    Ok(KeyRatePoint {
        distance_km,
        transmission: p.transmission,
        modulation_variance: p.modulation_variance,
        snr_linear: snr_from_params(p),
        beta,
        p_fail,
        i_ab,
        i_e,
        delta_i: (beta * i_ab - i_e) * (1.0 - p_fail),
    })
}

/// Operating point of a reconciliation code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeOperatingPoint {
    pub name: String,
    pub rate: f64,
    /// Channel SNR the code is run at (its threshold at the WER target).
    pub operating_snr: f64,
    pub beta: f64,
    pub p_fail: f64,
}

/// One row of a key-rate curve; infeasible distances carry no rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateRow {
    pub code: String,
    pub distance_km: f64,
    #[serde(rename = "T")]
    pub transmission: f64,
    #[serde(rename = "V_A")]
    pub modulation_variance: f64,
    pub snr: f64,
    pub beta: f64,
    pub p_fail: f64,
    pub i_ab: Option<f64>,
    pub i_e: Option<f64>,
    pub delta_i: Option<f64>,
    pub delta_i_floored: f64,
    pub feasible: bool,
}

/// Key rate against distance, with `V_A` chosen at each distance so the
/// channel SNR equals the code's operating SNR. Distances needing a
/// modulation variance above `va_cap` are marked infeasible.
pub fn key_rate_vs_distance(
    code: &CodeOperatingPoint,
    template: &CvqkdParams,
    distances_km: &[f64],
    va_cap: f64,
) -> Result<Vec<KeyRateRow>> {
    template.validate()?;
    if distances_km.windows(2).any(|w| !(w[0] < w[1])) || distances_km.iter().any(|d| *d < 0.0) {
        return Err(Error::Argument("distances must be non-negative and strictly increasing".into()));
    }
    if !(code.operating_snr > 0.0) {
        return Err(Error::Domain(format!("operating SNR {} must be positive", code.operating_snr)));
    }
    let mut rows = Vec::with_capacity(distances_km.len());
    for &d in distances_km {
        let at = template.at_distance(d);
        let v_a = solve_va(&at, code.operating_snr);
        let mut row = KeyRateRow {
            code: code.name.clone(),
            distance_km: d,
            transmission: at.transmission,
            modulation_variance: v_a,
            snr: code.operating_snr,
            beta: code.beta,
            p_fail: code.p_fail,
            i_ab: None,
            i_e: None,
            delta_i: None,
            delta_i_floored: 0.0,
            feasible: false,
        };
        if v_a.is_finite() && v_a > 0.0 && v_a <= va_cap && at.transmission > 0.0 {
            let k = key_rate(&at.with_modulation_variance(v_a), code.beta, code.p_fail, d)?;
            row.i_ab = Some(k.i_ab);
            row.i_e = Some(k.i_e);
            row.delta_i = Some(k.delta_i);
            row.delta_i_floored = k.delta_i_floored();
            row.feasible = true;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Largest distance with a positive key rate, if any.
pub fn max_positive_distance(rows: &[KeyRateRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.delta_i.is_some_and(|x| x > 0.0))
        .map(|r| r.distance_km)
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_params() -> CvqkdParams {
        CvqkdParams::link(0.01, 0.6, 0.01)
    }

    #[test]
    fn lossless_snr_identity() {
        let p = CvqkdParams::link(0.0, 1.0, 0.0);
        assert_eq!(snr_from_params(&p), 1.0);
        assert!(snr_from_params(&p.at_distance(500.0)) < 1e-9);
    }

    #[test]
    fn va_inversion_round_trips() {
        for d in [0.0, 10.0, 55.5, 120.0] {
            let p = fig_params().at_distance(d);
            for s in [0.02, 0.18, 1.0, 3.0] {
                let q = p.with_modulation_variance(solve_va(&p, s));
                assert!((snr_from_params(&q) - s).abs() <= 1e-14 * s);
            }
        }
    }

    #[test]
    fn matched_mutual_information_is_gaussian_capacity() {
        let p = fig_params().at_distance(40.0);
        for s in [0.05, 0.2, 1.0] {
            let q = p.with_modulation_variance(solve_va(&p, s));
            let i_ab = mutual_information(&q).unwrap();
            assert!((i_ab - 0.5 * (1.0 + s).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_channel_leaks_nothing() {
        for v_a in [0.5, 4.0, 40.0] {
            let p = CvqkdParams::link(0.0, 1.0, 0.0).with_modulation_variance(v_a);
            assert!(holevo_bound(&p).unwrap().abs() < 1e-9);
            let k = key_rate(&p, 1.0, 0.0, 0.0).unwrap();
            assert!((k.delta_i - k.i_ab).abs() < 1e-9);
        }
    }

    #[test]
    fn vanishing_modulation_gives_no_key() {
        let quiet = CvqkdParams::link(0.0, 0.6, 0.01).at_distance(20.0).with_modulation_variance(1e-7);
        let k = key_rate(&quiet, 1.0, 0.0, 20.0).unwrap();
        assert!(k.i_ab < 1e-6 && k.i_e < 1e-6);
        // With excess noise Eve still learns about Bob's noise: no key either way.
        let noisy = fig_params().at_distance(20.0).with_modulation_variance(1e-7);
        assert!(key_rate(&noisy, 1.0, 0.0, 20.0).unwrap().delta_i <= 1e-9);
    }

    #[test]
    fn ideal_detector_limit_matches_unit_efficiency() {
        // eta -> 1 with v_el = 0 makes chi_hom vanish continuously.
        let base = CvqkdParams::link(0.01, 1.0, 0.0).at_distance(30.0).with_modulation_variance(5.0);
        let near = CvqkdParams { detector_efficiency: 1.0 - 1e-9, ..base };
        assert!((holevo_bound(&base).unwrap() - holevo_bound(&near).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn key_rate_edge_cases() {
        let p = fig_params().at_distance(10.0).with_modulation_variance(3.0);
        assert_eq!(key_rate(&p, 0.9, 1.0, 10.0).unwrap().delta_i, 0.0);
        let k = key_rate(&p, 0.05, 0.0, 10.0).unwrap();
        assert!(k.delta_i < 0.0);
        assert_eq!(k.delta_i_floored(), 0.0);
        assert!(key_rate(&p, 1.2, 0.0, 0.0).is_err());
        assert!(key_rate(&p, 0.9, -0.1, 0.0).is_err());
        let bad = CvqkdParams { transmission: 1.5, ..p };
        assert!(matches!(key_rate(&bad, 0.9, 0.0, 0.0), Err(Error::Domain(_))));
        let bad = CvqkdParams { excess_noise: -0.1, ..p };
        assert!(holevo_bound(&bad).is_err());
    }

    #[test]
    fn curve_properties() {
        let code = CodeOperatingPoint {
            name: "r".into(),
            rate: 0.1,
            operating_snr: 0.17,
            beta: 0.9,
            p_fail: 0.1,
        };
        let distances: Vec<f64> = (0..=60).map(|i| i as f64 * 2.5).collect();
        let rows = key_rate_vs_distance(&code, &fig_params(), &distances, DEFAULT_VA_CAP).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].delta_i_floored <= w[0].delta_i_floored + 1e-15);
        }
        for r in rows.iter().filter(|r| r.feasible) {
            let exact = (r.beta * r.i_ab.unwrap() - r.i_e.unwrap()) * (1.0 - r.p_fail);
            assert_eq!(r.delta_i.unwrap(), exact);
            assert!(r.modulation_variance <= DEFAULT_VA_CAP);
        }
        assert!(rows.iter().any(|r| !r.feasible));
        assert!(max_positive_distance(&rows).is_some());
        assert!(key_rate_vs_distance(&code, &fig_params(), &[5.0, 1.0], 100.0).is_err());
    }
}
