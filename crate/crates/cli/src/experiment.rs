//! Runs every (sweep point, seed) pair and writes the results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qsdc_core::bits;
use qsdc_core::protocols::{run_dl04, run_mdi_dl04, SessionTranscript};
use qsdc_core::qmf::{run_qmf_session, Dl04Transport, QmfError, QmfOutcome};
use qsdc_core::security::{secrecy_capacity, CapacityInputs, CapacityReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PointSetup, Protocol};
use crate::{fmt_float, CliError};

pub const RESULT_HEADER: [&str; 14] = [
    "seed",
    "sweep_value",
    "length_km",
    "q_bob",
    "q_eve",
    "e",
    "eps_x",
    "eps_z",
    "c_m",
    "c_w",
    "c_s",
    "mode",
    "aborted",
    "fidelity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub point: usize,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub length_km: f64,
    pub capacity: CapacityReport,
    pub aborted: bool,
    pub fidelity: Option<f64>,
    /// Mean detection-round error rate, for the summary.
    pub detection_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SessionArtifact {
    Transcript(Box<SessionTranscript>),
    Qmf(Box<QmfOutcome>),
}

#[derive(Debug, Clone)]
pub struct SessionFailure {
    pub point: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResults {
    /// Ordered by sweep point, then by seed order in the config.
    pub rows: Vec<ResultRow>,
    pub artifacts: Vec<(usize, u64, SessionArtifact)>,
    pub failures: Vec<SessionFailure>,
}

/// A ChaCha stream per (seed, point), independent of scheduling.
pub fn session_rng(seed: u64, point: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point as u64);
    rng
}

type SessionOutput = Result<(ResultRow, SessionArtifact), String>;

fn run_session(cfg: &ExperimentConfig, p: &PointSetup, seed: u64) -> SessionOutput {
    let mut rng = session_rng(seed, p.index);
    let message = bits::random_bits(cfg.message_len(&p.channel), &mut rng);
    let from_transcript = |t: SessionTranscript| {
        let row = ResultRow {
            point: p.index,
            seed,
            sweep_value: p.sweep_value,
            length_km: p.channel.length_km,
            capacity: t.capacity,
            aborted: t.aborted,
            fidelity: t.fidelity(),
            detection_rate: t.dber.raw_detection_rate(),
        };
        (row, SessionArtifact::Transcript(Box::new(t)))
    };
    match cfg.protocol {
        Protocol::Dl04 | Protocol::Dl04Incum => run_dl04(&cfg.dl04_config(p.channel), &message, &p.eve, &mut rng)
            .map(from_transcript)
            .map_err(|e| e.to_string()),
        Protocol::MdiDl04 => run_mdi_dl04(
            &cfg.mdi_config(p.channel),
            &message,
            &p.eve,
            cfg.session.charlie_honest,
            &mut rng,
        )
        .map(from_transcript)
        .map_err(|e| e.to_string()),
        Protocol::Qmf => {
            let mut transport = Dl04Transport::new(p.channel, p.eve);
            transport.config.check_fraction = cfg.session.check_fraction;
            transport.config.dber_abort_threshold = cfg.session.dber_abort_threshold;
            transport.config.qber_abort_threshold = cfg.session.qber_abort_threshold;
            transport.config.check_bit_fraction = cfg.session.check_bit_fraction;
            let out = run_qmf_session(&cfg.qmf_config(p.channel), &message, &mut transport, &mut rng)
                .map_err(|e: QmfError| e.to_string())?;
            let capacity = qmf_capacity(cfg, &out).map_err(|e| e.to_string())?;
            let matching = out.received.iter().zip(&message).filter(|(a, b)| a == b).count();
            let fidelity = (!message.is_empty()).then(|| matching as f64 / message.len() as f64);
            let row = ResultRow {
                point: p.index,
                seed,
                sweep_value: p.sweep_value,
                length_km: p.channel.length_km,
                capacity,
                aborted: false,
                fidelity,
                detection_rate: Some(capacity.eps_x),
            };
            Ok((row, SessionArtifact::Qmf(Box::new(out))))
        }
    }
}

/// Session-level capacities for QMF: frame measurements averaged, with
/// Q_Eve = Q_Bob since every frame is INCUM-masked.
fn qmf_capacity(cfg: &ExperimentConfig, out: &QmfOutcome) -> Result<CapacityReport, qsdc_core::security::SecurityError> {
    let measured: Vec<_> = out.frames.iter().filter_map(|f| f.measured).collect();
    let n = measured.len().max(1) as f64;
    let mean = |f: fn(&qsdc_core::qmf::FrameCapacity) -> f64| measured.iter().map(f).sum::<f64>() / n;
    let q = mean(|m| m.q_bob);
    let eps = mean(|m| m.eps).min(0.5);
    let inputs = CapacityInputs {
        q_bob: q,
        q_eve: q,
        e: mean(|m| m.e).min(0.5),
        eps_x: eps,
        eps_z: eps,
    };
    secrecy_capacity(inputs, cfg.capacity_mode)
}

pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentResults, CliError> {
    cfg.validate()?;
    let points = cfg.points();
    let work: Vec<(&PointSetup, u64)> = points
        .iter()
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    let outputs: Vec<SessionOutput> = pool.install(|| work.par_iter().map(|(p, s)| run_session(cfg, p, *s)).collect());

    let mut results = ExperimentResults::default();
    for ((p, seed), out) in work.into_iter().zip(outputs) {
        match out {
            Ok((row, artifact)) => {
                results.rows.push(row);
                results.artifacts.push((p.index, seed, artifact));
            }
            Err(reason) => results.failures.push(SessionFailure {
                point: p.index,
                seed,
                reason,
            }),
        }
    }
    Ok(results)
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for row in rows {
        let c = &row.capacity;
        let mut fields = vec![row.seed.to_string(), opt_float(row.sweep_value)];
        fields.extend(
            [row.length_km, c.q_bob, c.q_eve, c.e, c.eps_x, c.eps_z, c.c_m, c.c_w, c.c_s]
                .into_iter()
                .map(fmt_float),
        );
        fields.push(c.mode.to_string());
        fields.push(row.aborted.to_string());
        fields.push(opt_float(row.fidelity));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// C_S at g = 1 and e = ε_x = ε_z reaches zero at this error rate.
fn break_even_error_rate() -> f64 {
    let h = |p: f64| qsdc_core::quantum::binary_entropy(p).unwrap_or(1.0);
    let f = |p: f64| 1.0 - h(p) - h((2.0 * p).min(0.5));
    let (mut lo, mut hi) = (0.0, 0.25);
    for _ in 0..100 {
        let mid = (lo + hi) / 2.0;
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn summary_text(cfg: &ExperimentConfig, results: &ExperimentResults) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "protocol: {:?}", cfg.protocol);
    let _ = writeln!(s, "capacity mode: {}", cfg.capacity_mode);
    let _ = writeln!(s, "seeds: {:?}", cfg.seeds);
    let _ = writeln!(
        s,
        "abort thresholds: DBER {}, QBER {} (C_S with g = 1 and e = eps_x = eps_z is zero at {:.4})",
        cfg.session.dber_abort_threshold,
        cfg.session.qber_abort_threshold,
        break_even_error_rate()
    );
    let variable = cfg.sweep.as_ref().map(|sw| format!("{:?}", sw.variable));
    for p in cfg.points() {
        let rows: Vec<&ResultRow> = results.rows.iter().filter(|r| r.point == p.index).collect();
        let failed = results.failures.iter().filter(|f| f.point == p.index).count();
        let aborted = rows.iter().filter(|r| r.aborted).count();
        let mean = |xs: Vec<f64>| {
            if xs.is_empty() {
                "n/a".to_string()
            } else {
                format!("{:.6}", xs.iter().sum::<f64>() / xs.len() as f64)
            }
        };
        let label = match (&variable, p.sweep_value) {
            (Some(name), Some(v)) => format!("{name} = {v}"),
            _ => "single point".to_string(),
        };
        let _ = writeln!(
            s,
            "point {} ({label}): {} sessions, {aborted} aborted, {failed} failed, abort rate {}, mean fidelity {}, mean DBER {}, mean C_S {}",
            p.index,
            rows.len() + failed,
            mean(rows.iter().map(|r| f64::from(u8::from(r.aborted))).collect()),
            mean(rows.iter().filter_map(|r| r.fidelity).collect()),
            mean(rows.iter().filter_map(|r| r.detection_rate).collect()),
            mean(rows.iter().map(|r| r.capacity.c_s).collect()),
        );
    }
    for f in &results.failures {
        let _ = writeln!(s, "failed: point {} seed {}: {}", f.point, f.seed, f.reason);
    }
    s
}

/// Writes results, transcripts and the summary under `dir`.
pub fn write_artifacts(
    cfg: &ExperimentConfig,
    results: &ExperimentResults,
    dir: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    match format {
        OutputFormat::Csv => write_rows_csv(&results.rows, fs::File::create(dir.join("results.csv"))?)?,
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(&results.rows)?;
            fs::write(dir.join("results.json"), text + "\n")?;
        }
    }
    if cfg.output.transcripts {
        let tdir = dir.join("transcripts");
        fs::create_dir_all(&tdir)?;
        for (point, seed, artifact) in &results.artifacts {
            let file = tdir.join(format!("point{point:04}_seed{seed}.json"));
            fs::write(file, serde_json::to_string(artifact)?)?;
        }
    }
    fs::write(dir.join("summary.txt"), summary_text(cfg, results))?;
    Ok(())
}
