use std::path::{Path, PathBuf};

use qcra::channel::{self, from_db, ChannelParams};
use qcra::cvqkd::{key_rate_vs_distance, max_positive_distance, CodeOperatingPoint, CvqkdParams};
use qcra::decoder::Decoder;
use qcra::encoder::{encode as encode_bits, Codeword, MessageBits};
use qcra::harness::report::{save, Provenance};
use qcra::harness::{
    compare_schemes, efficiency_sweep, estimate_wer, find_snr_at_wer, EfficiencyRow, SimTarget,
};
use qcra::rate_adapt::{CodeProfile, MeasuredPoint, RateAdaptScheme};
use qcra::stats::trial_rng;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::bitio;
use crate::config::{load_code, load_table, Overrides, RunConfig};
use crate::CliError;

fn provenance(cfg: &RunConfig, code_hash: Option<String>) -> Result<Provenance, CliError> {
    Ok(Provenance::new(cfg, cfg.seed, code_hash)?)
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}{suffix}"))
}

fn histogram(h: &std::collections::BTreeMap<usize, usize>) -> String {
    h.iter().map(|(w, c)| format!("{w}:{c}")).collect::<Vec<_>>().join(" ")
}

pub fn build_code(o: &Overrides) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let table = load_table(&cfg.code)?;
    let code = table.expand();
    println!("N={} K={} M={} groups={}", code.n(), code.k(), code.m(), table.groups().len());
    println!("rate={} expansion_step={}", code.rate(), table.expansion_step());
    let mut group_hist = std::collections::BTreeMap::new();
    for &w in code.group_weights() {
        *group_hist.entry(w).or_insert(0) += 1;
    }
    println!("group_weights(weight:groups)={}", histogram(&group_hist));
    println!("column_weights(weight:columns)={}", histogram(&code.column_weight_histogram()));
    println!("row_weights(weight:rows)={}", histogram(&code.row_weight_histogram()));
    println!("h1_ones={} density={:.6e}", code.h1_ones(), code.density());
    println!("table_hash={}", table.hash());
    if let Some(out) = &cfg.out {
        let rows: Vec<&[u32]> = (0..code.m()).map(|i| code.h1_row(i)).collect();
        let cache = json!({
            "n": code.n(),
            "k": code.k(),
            "m": code.m(),
            "table_hash": table.hash(),
            "h1_rows": rows,
        });
        std::fs::write(out, serde_json::to_vec(&cache).unwrap())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn encode(o: &Overrides, input: Option<&Path>) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let code = load_code(&cfg.code)?;
    let out = cfg.out.clone().ok_or_else(|| CliError::Config("encode needs --out".into()))?;
    let msg = match input {
        Some(p) => bitio::read_bits(p)?,
        None => {
            let mut rng = trial_rng(cfg.seed, 0);
            let bits: Vec<bool> = (0..code.k()).map(|_| rng.gen()).collect();
            let msg_path = with_suffix(&out, ".msg.bin");
            bitio::write_bits(&msg_path, &bits, Default::default())?;
            println!("wrote random message {}", msg_path.display());
            bits
        }
    };
    let cw = encode_bits(&code, &MessageBits::from_bools(&msg))?;
    let bits: Vec<bool> = cw.bits().iter().map(|b| *b).collect();
    let mut extra = serde_json::Map::new();
    extra.insert("code_hash".into(), json!(code.source_hash()));
    bitio::write_bits(&out, &bits, extra)?;
    println!("encoded {} message bits into {} codeword bits: {}", code.k(), code.n(), out.display());
    Ok(())
}

pub fn transmit(o: &Overrides, input: &Path) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let out = cfg.out.clone().ok_or_else(|| CliError::Config("transmit needs --out".into()))?;
    let db = match cfg.simulate.snr_db.as_slice() {
        [db] => *db,
        _ => return Err(CliError::Config("transmit needs exactly one --snr-db".into())),
    };
    let bits = bitio::read_bits(input)?;
    let llrs = channel::transmit(&Codeword::from_bools(&bits), ChannelParams::from_db(db)?, cfg.seed);
    bitio::write_llrs(&out, &llrs.0)?;
    println!("{} LLRs at {db} dB (s = {:.6}): {}", llrs.len(), from_db(db), out.display());
    Ok(())
}

pub fn decode(o: &Overrides, input: &Path) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let code = load_code(&cfg.code)?;
    let out = cfg.out.clone().ok_or_else(|| CliError::Config("decode needs --out".into()))?;
    let llrs = bitio::read_llrs(input)?;
    let result = Decoder::new(cfg.decoder).decode(&code.tanner_graph(), &llrs, cfg.max_iterations)?;
    let bits: Vec<bool> = result.bits.bits().iter().map(|b| *b).collect();
    let mut extra = serde_json::Map::new();
    extra.insert("converged".into(), json!(result.converged));
    extra.insert("iterations".into(), json!(result.iterations_used));
    extra.insert("decoder".into(), json!(cfg.decoder.label()));
    bitio::write_bits(&out, &bits, extra)?;
    println!(
        "converged={} iterations={} out={}",
        result.converged,
        result.iterations_used,
        out.display()
    );
    Ok(())
}

pub fn simulate(o: &Overrides) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let code = load_code(&cfg.code)?;
    let target = SimTarget::new(code.clone(), cfg.simulate.scheme)?;
    let settings = cfg.settings();
    let prov = provenance(&cfg, Some(code.source_hash().to_string()))?;
    let out = cfg.out_path("simulate");
    if let Some(w) = cfg.simulate.wer_target {
        let t = find_snr_at_wer(&target, w, &cfg.search, &settings)?;
        let row = EfficiencyRow::from_threshold(code.source_hash(), &t, cfg.capacity_model)?;
        println!(
            "{} rate {}: WER {w} at {:.4} dB (s = {:.5}), beta = {:.4} ({:?} capacity), {} trials",
            t.scheme,
            t.overall_rate,
            t.snr_db,
            t.snr_linear,
            row.beta,
            cfg.capacity_model,
            t.total_trials()
        );
        save(&out, &prov, &t.points, &json!({ "threshold": t, "efficiency": row }))?;
    } else {
        if cfg.simulate.snr_db.is_empty() {
            return Err(CliError::Config("simulate needs --snr-db points or --wer-target".into()));
        }
        let mut points = Vec::new();
        for &db in &cfg.simulate.snr_db {
            let p = estimate_wer(&target, from_db(db), &settings, &cfg.simulate.stop)?;
            println!(
                "{db:+.3} dB: {}/{} word errors (undetected {}), WER {:.4e} [{:.4e}, {:.4e}], avg iterations {:.1}",
                p.word_errors, p.trials, p.undetected_errors, p.wer, p.ci_low, p.ci_high, p.avg_iterations
            );
            points.push(p);
        }
        save(&out, &prov, &points, &points)?;
    }
    println!("wrote {}.{{csv,json}}", out.display());
    Ok(())
}

pub fn sweep(o: &Overrides) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let code = load_code(&cfg.code)?;
    let settings = cfg.settings();
    let sw = &cfg.sweep;
    let mut schemes = vec![RateAdaptScheme::Hop];
    schemes.extend(sw.schemes.iter().copied().filter(|s| *s != RateAdaptScheme::Hop));
    let mut wer_targets = sw.wer_targets.clone();
    if let Some(w) = cfg.simulate.wer_target {
        wer_targets = vec![w];
    }
    if !sw.compare_grid_db.is_empty() && !wer_targets.contains(&sw.compare_wer_target) {
        wer_targets.push(sw.compare_wer_target);
    }
    let targets = schemes
        .iter()
        .map(|&s| SimTarget::new(code.clone(), s))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = efficiency_sweep(&targets, &wer_targets, &cfg.search, &settings, cfg.capacity_model)?;
    for r in &rows {
        println!(
            "{:<16} rate {:<9} WER {:<6} {:+.3} dB beta {:.4}",
            r.scheme, r.overall_rate, r.wer_target, r.snr_db, r.beta
        );
    }
    let prov = provenance(&cfg, Some(code.source_hash().to_string()))?;
    let out = cfg.out_path("sweep");
    let eff = with_suffix(&out, "_efficiency");
    save(&eff, &prov, &rows, &rows)?;
    println!("wrote {}.{{csv,json}}", eff.display());

    if !sw.compare_grid_db.is_empty() {
        let points = schemes
            .iter()
            .zip(rows.chunks(wer_targets.len()))
            .filter(|(s, _)| !matches!(s, RateAdaptScheme::Repeat { .. }))
            .map(|(&scheme, chunk)| {
                let r = chunk.iter().find(|r| r.wer_target == sw.compare_wer_target).unwrap();
                MeasuredPoint { scheme, threshold_snr: r.snr_linear }
            })
            .collect();
        let profile = CodeProfile {
            name: cfg.code.clone(),
            n: code.n(),
            k: code.k(),
            wer_target: sw.compare_wer_target,
            points,
        };
        let cmp = compare_schemes(
            std::slice::from_ref(&profile),
            &sw.compare_grid_db,
            sw.compare_wer_target,
            cfg.capacity_model,
            sw.max_repeat,
        )?;
        let path = with_suffix(&out, "_compare");
        save(&path, &prov, &cmp, &json!({ "profile": profile, "rows": cmp }))?;
        println!("wrote {}.{{csv,json}}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct KeyrateRecord<'a> {
    profiles: &'a [CodeOperatingPoint],
    rows: &'a [qcra::cvqkd::KeyRateRow],
}

pub fn keyrate(o: &Overrides) -> Result<(), CliError> {
    let (cfg, _) = RunConfig::load(o)?;
    let k = &cfg.keyrate;
    let template = CvqkdParams {
        modulation_variance: 1.0,
        transmission: 1.0,
        excess_noise: k.excess_noise,
        detector_efficiency: k.detector_efficiency,
        electronic_noise: k.electronic_noise,
        attenuation_db_per_km: k.attenuation_db_per_km,
    };
    template.validate()?;
    if !(k.distance_step_km > 0.0 && k.distance_stop_km >= k.distance_start_km) {
        return Err(CliError::Config("distance grid needs step > 0 and stop >= start".into()));
    }
    if k.profiles.is_empty() {
        return Err(CliError::Config("keyrate needs at least one [[keyrate.profiles]] entry".into()));
    }
    let steps = ((k.distance_stop_km - k.distance_start_km) / k.distance_step_km + 1e-9).floor() as usize;
    let distances: Vec<f64> = (0..=steps).map(|i| k.distance_start_km + i as f64 * k.distance_step_km).collect();

    let mut profiles = Vec::new();
    let mut rows = Vec::new();
    for p in &k.profiles {
        let s = from_db(p.operating_snr_db);
        let beta = match p.beta {
            Some(b) => b,
            None => p.rate / cfg.capacity_model.capacity(s),
        };
        let op = CodeOperatingPoint {
            name: p.name.clone(),
            rate: p.rate,
            operating_snr: s,
            beta,
            p_fail: k.p_fail_override.unwrap_or(p.p_fail),
        };
        let curve = key_rate_vs_distance(&op, &template, &distances, k.va_cap)?;
        println!(
            "{}: beta {:.4}, p_fail {}, positive key up to {}",
            op.name,
            op.beta,
            op.p_fail,
            max_positive_distance(&curve).map_or("nowhere".to_string(), |d| format!("{d} km"))
        );
        rows.extend(curve);
        profiles.push(op);
    }
    let prov = provenance(&cfg, None)?;
    let out = cfg.out_path("keyrate");
    save(&out, &prov, &rows, &KeyrateRecord { profiles: &profiles, rows: &rows })?;
    println!("wrote {}.{{csv,json}}", out.display());
    Ok(())
}
