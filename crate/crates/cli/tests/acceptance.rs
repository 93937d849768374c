//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use qsdc_cli::experiment::write_rows_csv;
use qsdc_cli::table::linspace;
use qsdc_cli::{capacity_table, run_experiment, zero_crossing_km, DberAssumption, ExperimentConfig};
use qsdc_core::bits;
use qsdc_core::channel::ChannelParams;
use qsdc_core::protocols::{run_dl04, run_mdi_dl04, BasisPolicy, Dl04Config, EveStrategy, MdiConfig};
use qsdc_core::qmf::{admit_frame, run_qmf_session, Dl04Transport, QmfOutcome, QmfSessionConfig};
use qsdc_core::quantum::{
    bell_probabilities, binary_entropy, make_bell, measure, prepare, teleport_branches, von_neumann_entropy, Basis,
    BellState, DensityMatrix, Measurement, PhotonState, StateVector, Subsystem,
};
use qsdc_core::security::{
    apply_incum, main_capacity, max_holevo, secrecy_capacity, CapacityInputs, CapacityMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Independent high-precision evaluations (mpmath, 50 digits).
const MAIN_CAPACITY_0_1_0_02: f64 = 0.085_855_945_745_817_94;
const SECRECY_PER_Q_0_05: f64 = 0.244_607_449_294_762_65;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn h(p: f64) -> f64 {
    binary_entropy(p).unwrap()
}

fn quantum_core() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ok = true;
    for basis in Basis::ALL {
        for bit in 0..2u8 {
            for _ in 0..1000 {
                ok &= measure(&prepare(basis, bit), basis, &mut rng) == Measurement::Click(bit);
            }
        }
    }
    let mut worst_bell = 0.0f64;
    for _ in 0..2000 {
        let psi = StateVector::random(4, &mut rng).unwrap();
        let total: f64 = bell_probabilities(&psi).unwrap().iter().sum();
        worst_bell = worst_bell.max((total - 1.0).abs());
    }
    ok &= worst_bell < 1e-10;
    for dim in [2, 4, 8] {
        for _ in 0..200 {
            let rho = DensityMatrix::random(dim, &mut rng).unwrap();
            let s = von_neumann_entropy(&rho);
            ok &= s >= -1e-12 && s <= (dim as f64).log2() + 1e-12;
        }
    }
    for i in 0..=1000 {
        let v = h(i as f64 / 1000.0);
        ok &= (0.0..=1.0).contains(&v);
    }
    let mut worst_trace = 0.0f64;
    for _ in 0..200 {
        let rho = DensityMatrix::random(4, &mut rng).unwrap();
        for side in [Subsystem::First, Subsystem::Second] {
            worst_trace = worst_trace.max((rho.partial_trace(side).unwrap().trace() - rho.trace()).abs());
        }
        let big = DensityMatrix::random(8, &mut rng).unwrap();
        for side in [Subsystem::First, Subsystem::Second] {
            let reduced = big.partial_trace_dims(2, 4, side).unwrap();
            worst_trace = worst_trace.max((reduced.trace() - 1.0).abs());
        }
    }
    ok &= worst_trace < 1e-10;
    let t = start.elapsed();
    outcome(
        ok && within(t, 10),
        format!("Bell completeness err {worst_bell:.1e}, partial-trace err {worst_trace:.1e}, {t:.2?}"),
    )
}

fn holevo_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Feasible pairs below the h(·) peak, where the bound is informative.
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(1000);
    while pairs.len() < 1000 {
        let (x, z) = (rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.5);
        if x + z <= 0.5 {
            pairs.push((x, z));
        }
    }
    let worst = pairs
        .par_iter()
        .map(|&(x, z)| max_holevo(x, z).unwrap().0 - h(x + z))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    // Beyond ε_x + ε_z = ½ the bound is read with its argument capped at ½.
    let square: Vec<(f64, f64)> = (0..200).map(|_| (rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.5)).collect();
    let worst_square = square
        .par_iter()
        .map(|&(x, z)| max_holevo(x, z).unwrap().0 - h((x + z).min(0.5)))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let zero = max_holevo(0.0, 0.0).unwrap().0;
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && worst_square <= 1e-9 && zero == 0.0 && within(t, 60),
        format!("max(χ − h) = {worst:.2e} on 1000 pairs, {worst_square:.2e} on the square, χ(0,0) = {zero}, {t:.2?}"),
    )
}

fn capacity_pins() -> Outcome {
    let c_m = main_capacity(0.1, 0.02).unwrap();
    let mut worst: f64 = (c_m - MAIN_CAPACITY_0_1_0_02).abs();
    for q in [1.0, 0.5, 0.1, 0.01] {
        let r = secrecy_capacity(
            CapacityInputs {
                q_bob: q,
                q_eve: q,
                e: 0.05,
                eps_x: 0.05,
                eps_z: 0.05,
            },
            CapacityMode::TwoBasis,
        )
        .unwrap();
        worst = worst.max((r.c_s - q * SECRECY_PER_Q_0_05).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("C_M(0.1, 0.02) = {c_m:.10}, C_S/q at 0.05 = {SECRECY_PER_Q_0_05:.10}, max deviation {worst:.1e}"),
    )
}

fn intercept(fraction: f64) -> EveStrategy {
    EveStrategy::InterceptResend {
        basis_policy: BasisPolicy::RandomZX,
        fraction,
    }
}

fn intercept_resend() -> Outcome {
    let start = Instant::now();
    let mut cfg = Dl04Config::new(420_000, ChannelParams::ideal());
    cfg.record_rounds = false;
    let full = run_dl04(&cfg, &[], &intercept(1.0), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let partial = run_dl04(&cfg, &[], &intercept(0.2), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let rounds = full.dber.n_x + full.dber.n_z;
    let r_full = full.dber.raw_detection_rate().unwrap();
    let r_partial = partial.dber.raw_detection_rate().unwrap();

    let sessions = 2000u64;
    let mut small = Dl04Config::new(4_800, ChannelParams::ideal());
    small.record_rounds = false;
    small.dber_abort_threshold = 0.12;
    let (aborted, min_rounds) = (0..sessions)
        .into_par_iter()
        .map(|s| {
            let t = run_dl04(&small, &[1, 0], &intercept(1.0), &mut ChaCha8Rng::seed_from_u64(1_000 + s)).unwrap();
            (usize::from(t.aborted), t.dber.n_x + t.dber.n_z)
        })
        .reduce(|| (0, usize::MAX), |a, b| (a.0 + b.0, a.1.min(b.1)));
    let p_abort = aborted as f64 / sessions as f64;
    let t = start.elapsed();
    outcome(
        rounds >= 100_000
            && (r_full - 0.25).abs() <= 0.01
            && (r_partial - 0.05).abs() <= 0.01
            && min_rounds >= 1000
            && p_abort >= 0.999
            && within(t, 120),
        format!(
            "DBER {r_full:.4} over {rounds} rounds, {r_partial:.4} at fraction 0.2, abort rate {p_abort:.4} over {sessions} sessions (≥ {min_rounds} rounds each), {t:.2?}"
        ),
    )
}

fn incum_effect() -> Outcome {
    let channel = ChannelParams::default().with_length(50.0);
    let q_bob = channel.reception_rate();
    let q_eve = channel.eve_reception_rate_for(q_bob).unwrap();
    let raw = secrecy_capacity(
        CapacityInputs {
            q_bob,
            q_eve,
            e: 0.02,
            eps_x: 0.02,
            eps_z: 0.02,
        },
        CapacityMode::TwoBasis,
    )
    .unwrap();
    let masked = apply_incum(&raw);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut monotone = true;
    for _ in 0..1000 {
        let q_bob = rng.random::<f64>();
        let q_eve = q_bob + (1.0 - q_bob) * rng.random::<f64>();
        let r = secrecy_capacity(
            CapacityInputs {
                q_bob,
                q_eve,
                e: rng.random::<f64>() * 0.5,
                eps_x: rng.random::<f64>() * 0.5,
                eps_z: rng.random::<f64>() * 0.5,
            },
            if rng.random_bool(0.5) {
                CapacityMode::TwoBasis
            } else {
                CapacityMode::ZBasisOnly
            },
        )
        .unwrap();
        monotone &= apply_incum(&r).c_s >= r.c_s;
    }
    outcome(
        raw.c_s < 0.0 && masked.c_s > 0.0 && monotone,
        format!(
            "50 km, Q_Eve = {q_eve}: C_S = {:.5} without, {:.5} with masking; monotone on 1000 reports: {monotone}",
            raw.c_s, masked.c_s
        ),
    )
}

fn z_basis_benefit() -> Outcome {
    let dber = DberAssumption {
        e: 0.03,
        eps_x: 0.03,
        eps_z: 0.03,
    };
    let lengths = linspace(0.0, 120.0, 1201);
    let crossing = |mode| {
        let rows = capacity_table(&lengths, &ChannelParams::default(), dber, mode, false).unwrap();
        zero_crossing_km(&rows)
    };
    let two = crossing(CapacityMode::TwoBasis);
    let z = crossing(CapacityMode::ZBasisOnly);
    outcome(
        matches!((two, z), (Some(a), Some(b)) if b > a),
        format!("zero crossing: TwoBasis {two:?} km, ZBasisOnly {z:?} km"),
    )
}

fn mdi_suite() -> Outcome {
    let msg = bits::random_bits(512, &mut ChaCha8Rng::seed_from_u64(6));
    let honest = run_mdi_dl04(
        &MdiConfig::new(6_000, ChannelParams::ideal()),
        &msg,
        &EveStrategy::None,
        true,
        &mut ChaCha8Rng::seed_from_u64(7),
    )
    .unwrap();
    let fidelity = honest.fidelity();

    let mut cfg = MdiConfig::new(4_400, ChannelParams::ideal());
    cfg.record_rounds = false;
    let sessions = 1000u64;
    let (caught, min_rounds) = (0..sessions)
        .into_par_iter()
        .map(|s| {
            let t = run_mdi_dl04(&cfg, &[1, 0, 1], &EveStrategy::None, false, &mut ChaCha8Rng::seed_from_u64(2_000 + s))
                .unwrap();
            (usize::from(t.aborted), t.dber.n_x + t.dber.n_z)
        })
        .reduce(|| (0, usize::MAX), |a, b| (a.0 + b.0, a.1.min(b.1)));
    let p_detect = caught as f64 / sessions as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let resource = make_bell(1).unwrap();
    let mut worst_fid = 1.0f64;
    let mut worst_prob = 0.0f64;
    let mut seen = [false; 4];
    for _ in 0..200 {
        let payload = PhotonState::from_vector(StateVector::random(2, &mut rng).unwrap()).unwrap();
        for branch in teleport_branches(&resource, &payload).unwrap() {
            seen[branch.outcome.index() as usize - 1] = true;
            worst_prob = worst_prob.max((branch.probability - 0.25).abs());
            let out = branch.retained.unwrap().to_vector();
            worst_fid = worst_fid.min(out.inner(&payload.to_vector()).norm_sqr());
        }
    }
    let all_outcomes = seen.iter().all(|&s| s) && BellState::ALL.len() == 4;
    outcome(
        fidelity == Some(1.0)
            && !honest.aborted
            && p_detect >= 0.999
            && min_rounds >= 1000
            && all_outcomes
            && worst_fid > 1.0 - 1e-10
            && worst_prob < 1e-10,
        format!(
            "honest fidelity {fidelity:?}; dishonest relay caught in {p_detect:.4} of {sessions} sessions (≥ {min_rounds} rounds); teleport fidelity ≥ {worst_fid:.12} across 4 outcomes"
        ),
    )
}

// A failed session counts as not recovered.
fn qmf_session(channel: ChannelParams, seed: u64) -> (Vec<u8>, Option<QmfOutcome>) {
    let msg = bits::random_bits(1024, &mut ChaCha8Rng::seed_from_u64(10_000 + seed));
    let cfg = QmfSessionConfig::new(channel);
    let mut transport = Dl04Transport::new(channel, EveStrategy::None);
    let out = run_qmf_session(&cfg, &msg, &mut transport, &mut ChaCha8Rng::seed_from_u64(seed)).ok();
    (msg, out)
}

fn no_key_reuse(out: &QmfOutcome) -> bool {
    [&out.alice_pool, &out.bob_pool].iter().all(|pool| {
        let mut next = 0;
        pool.withdrawals().iter().all(|w| {
            let fresh = w.range.start >= next;
            next = w.range.end;
            fresh
        }) && next <= pool.total_deposited()
    })
}

fn min_slack(out: &QmfOutcome) -> f64 {
    out.frames
        .iter()
        .map(|f| {
            if admit_frame(f.k, f.n_c, f.rate, f.c_w_prev, f.c_m_prev) {
                f.admission_slack()
            } else {
                f64::NEG_INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn qmf_end_to_end() -> Outcome {
    let (msg, ideal) = qmf_session(ChannelParams::ideal(), 0);
    let ideal_ok = ideal.as_ref().is_some_and(|o| o.received == msg && no_key_reuse(o));
    let mut slack = ideal.as_ref().map_or(f64::NEG_INFINITY, min_slack);

    let noisy = ChannelParams::ideal().with_flips(0.02, 0.02);
    let results: Vec<(bool, bool, f64, usize)> = (1..=100u64)
        .into_par_iter()
        .map(|seed| {
            match qmf_session(noisy, seed) {
                (msg, Some(out)) => (out.received == msg, no_key_reuse(&out), min_slack(&out), out.frames.len()),
                (_, None) => (false, true, f64::INFINITY, 0),
            }
        })
        .collect();
    let exact = results.iter().filter(|r| r.0).count();
    let reuse_free = results.iter().all(|r| r.1);
    let frames: usize = results.iter().map(|r| r.3).sum::<usize>() + ideal.as_ref().map_or(0, |o| o.frames.len());
    slack = results.iter().map(|r| r.2).fold(slack, f64::min);
    outcome(
        ideal_ok && exact >= 99 && reuse_free && slack >= 0.0,
        format!(
            "noiseless exact: {ideal_ok}; 2% flips exact in {exact}/100; key reuse: {}; min admission slack {slack:.3e} over {frames} frames",
            !reuse_free
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"
protocol = "DL04_INCUM"
seeds = [11, 12, 13]

[channel]
flip_prob_z = 0.01
flip_prob_x = 0.02

[eve]
strategy = "intercept_resend"
basis_policy = "random_zx"
fraction = 0.05

[session]
n_photons = 4000

[sweep]
variable = "length_km"
start = 0.0
stop = 20.0
steps = 5
"#;

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::from_toml(DETERMINISM_CONFIG).unwrap();
    let csv = |jobs| {
        let results = run_experiment(&cfg, jobs).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&results.rows, &mut buf).unwrap();
        buf
    };
    let a = csv(Some(1));
    let b = csv(None);
    let c = csv(Some(3));
    outcome(
        a == b && b == c && !a.is_empty(),
        format!("{} bytes, identical across three runs with 1, default and 3 workers", a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("quantum-core invariants", quantum_core),
        ("Holevo bound under h(eps_x + eps_z)", holevo_bound),
        ("capacity formula pins", capacity_pins),
        ("intercept-resend detection", intercept_resend),
        ("INCUM effect", incum_effect),
        ("Z-basis-only reaches further", z_basis_benefit),
        ("MDI suite", mdi_suite),
        ("QMF end to end", qmf_end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
