use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{admit_frame, distill_key, toeplitz_hash, xor_encrypt, FecCode, KeyPool, QmfError, KNOWN_BIT_LLR};
use crate::bits;
use crate::channel::ChannelParams;
use crate::protocols::{run_dl04, Dl04Config, Event, EveStrategy, ProtocolError, SessionTranscript};
use crate::quantum::binary_entropy;

/// Length of the public hash Alice announces so Bob can confirm he holds
/// the same frame codeword before distilling from it.
pub const VERIFY_TAG_BITS: usize = 64;
const MAX_COPIES: usize = 256;
const TAG_SEED_MIX: u64 = 0x7a67_5f74_6167_0001;
const KEY_SEED_MIX: u64 = 0x6b65_795f_6469_0002;

/// Carries one frame codeword over the quantum channel.
pub trait FrameTransport {
    fn transmit<R: Rng + ?Sized>(&mut self, frame: &[u8], rng: &mut R) -> Result<SessionTranscript, ProtocolError>;
}

/// One DL04 session with INCUM masking per frame. The photon count is sized
/// from the channel so the frame fits the retained photons.
#[derive(Debug, Clone)]
pub struct Dl04Transport {
    pub config: Dl04Config,
    pub eve: EveStrategy,
}

impl Dl04Transport {
    pub fn new(channel: ChannelParams, eve: EveStrategy) -> Self {
        let mut config = Dl04Config::new(1, channel).with_incum(true);
        config.record_rounds = false;
        Self { config, eve }
    }
}

impl FrameTransport for Dl04Transport {
    fn transmit<R: Rng + ?Sized>(&mut self, frame: &[u8], rng: &mut R) -> Result<SessionTranscript, ProtocolError> {
        let q = self.config.channel.reception_rate().max(1e-6);
        let slots = frame.len() as f64 / (1.0 - self.config.check_bit_fraction) + 2.0;
        let mut n = (slots / (q * (1.0 - self.config.check_fraction)) * 1.15 + 64.0).ceil() as usize;
        loop {
            self.config.n_photons = n;
            match run_dl04(&self.config, frame, &self.eve, rng) {
                Err(ProtocolError::MessageTooLong { .. }) => n += n / 2,
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmfSessionConfig {
    /// Rate R_p of the outer LDPC precode.
    pub precode_rate: f64,
    /// Outer codeword length k for a full message block.
    pub outer_block_len: usize,
    /// Length of the rate-1/2 inner code; a frame is this many bits times
    /// the repetition count.
    pub inner_block_len: usize,
    pub variable_degree: usize,
    /// Ratio Q_Eve/Q_Bob assumed in the wiretap estimate; 1 under INCUM.
    pub g_estimate: f64,
    pub channel: ChannelParams,
    pub distillation_margin: f64,
    /// Extra attempts per frame slice, and consecutive refusals tolerated.
    pub retry_budget: usize,
    pub max_frames: usize,
    pub decoder_iterations: usize,
    /// Repetition is chosen so the chance that every copy of a bit is lost
    /// stays below this.
    pub max_copy_erasure: f64,
    /// Payload sizing backs off from the admission limit by this many
    /// standard deviations of the C_W estimate, so that the frame still
    /// satisfies admission when its own statistics are measured.
    pub confidence_sigmas: f64,
    /// Seeds code construction and the public hash functions.
    pub public_seed: u64,
}

impl Default for QmfSessionConfig {
    fn default() -> Self {
        Self {
            precode_rate: 0.5,
            outer_block_len: 2048,
            inner_block_len: 2048,
            variable_degree: 3,
            g_estimate: 1.0,
            channel: ChannelParams::default(),
            distillation_margin: 0.1,
            retry_budget: 3,
            max_frames: 10_000,
            decoder_iterations: super::DEFAULT_DECODER_ITERATIONS,
            max_copy_erasure: 0.2,
            confidence_sigmas: 2.0,
            public_seed: 0x5153_4443_514d_4601,
        }
    }
}

impl QmfSessionConfig {
    pub fn new(channel: ChannelParams) -> Self {
        Self {
            channel,
            ..Self::default()
        }
    }

    /// Check degree giving the precode rate with the configured variable degree.
    fn check_degree(&self) -> Result<usize, QmfError> {
        let dc = self.variable_degree as f64 / (1.0 - self.precode_rate);
        if !(dc.is_finite() && (dc - dc.round()).abs() < 1e-9 && dc.round() as usize > self.variable_degree) {
            return Err(QmfError::InvalidConfig(format!(
                "precode rate {} is not 1 - {}/d for an integer d",
                self.precode_rate, self.variable_degree
            )));
        }
        Ok(dc.round() as usize)
    }

    pub fn validate(&self) -> Result<(), QmfError> {
        let bad = |m: String| Err(QmfError::InvalidConfig(m));
        if !(self.precode_rate > 0.0 && self.precode_rate < 1.0) {
            return bad(format!("precode_rate {} outside (0, 1)", self.precode_rate));
        }
        self.check_degree()?;
        if self.variable_degree < 2 {
            return bad("variable_degree must be at least 2".into());
        }
        if self.inner_block_len < 12 || self.inner_block_len % 2 != 0 {
            return bad("inner_block_len must be an even number >= 12".into());
        }
        if self.outer_block_len < 12 {
            return bad("outer_block_len must be at least 12".into());
        }
        if !(self.g_estimate > 0.0 && self.g_estimate.is_finite()) {
            return bad("g_estimate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.distillation_margin) {
            return bad("distillation_margin must be in [0, 1)".into());
        }
        if !(self.max_copy_erasure > 0.0 && self.max_copy_erasure < 1.0) {
            return bad("max_copy_erasure must be in (0, 1)".into());
        }
        if !(self.confidence_sigmas >= 0.0 && self.confidence_sigmas.is_finite()) {
            return bad("confidence_sigmas must be non-negative".into());
        }
        if self.max_frames == 0 || self.decoder_iterations == 0 {
            return bad("max_frames and decoder_iterations must be positive".into());
        }
        self.channel
            .validate()
            .map_err(|e| QmfError::InvalidConfig(e.to_string()))
    }

    /// Message bits carried per outer block.
    pub fn block_message_len(&self) -> usize {
        (self.outer_block_len as f64 * self.precode_rate).floor() as usize
    }

    fn outer_len_for(&self, message_len: usize) -> Result<usize, QmfError> {
        let dv = self.variable_degree;
        let dc = self.check_degree()?;
        let step = dc / gcd(dv, dc);
        let wanted = ((message_len as f64 / self.precode_rate).ceil() as usize).max(dc);
        Ok(wanted.div_ceil(step) * step)
    }

    /// Capacities expected before any frame has been measured, from the
    /// channel model: Q from loss, e from flips on both legs, ε from one leg.
    pub fn prior_capacity(&self) -> FrameCapacity {
        let c = &self.channel;
        let round_trip = |p: f64| 2.0 * p * (1.0 - p);
        let e = (round_trip(c.flip_prob_z) + round_trip(c.flip_prob_x)) / 2.0;
        let eps = (c.flip_prob_z + c.flip_prob_x) / 2.0;
        FrameCapacity::new(c.reception_rate(), e, eps, self.g_estimate)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Capacities for one frame: C_M = Q(1 − h(e)), C_W = g·Q·h(2ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCapacity {
    pub q_bob: f64,
    pub e: f64,
    pub eps: f64,
    pub c_m: f64,
    pub c_w: f64,
    pub c_s: f64,
    /// Standard deviation of `c_w` from the binomial spread of ε.
    #[serde(default)]
    pub c_w_sigma: f64,
}

impl FrameCapacity {
    pub fn new(q_bob: f64, e: f64, eps: f64, g: f64) -> Self {
        let h = |p: f64| binary_entropy(p.clamp(0.0, 0.5)).unwrap_or(1.0);
        let c_m = q_bob * (1.0 - h(e));
        let c_w = g * q_bob * h((2.0 * eps).min(0.5));
        Self {
            q_bob,
            e,
            eps,
            c_m,
            c_w,
            c_s: c_m - c_w,
            c_w_sigma: 0.0,
        }
    }

    fn measured(t: &SessionTranscript, g: f64) -> Self {
        let d = &t.dber;
        let eps = match (d.eps_x, d.eps_z) {
            (Some(x), Some(z)) => (x + z) / 2.0,
            (Some(r), None) | (None, Some(r)) => r,
            (None, None) => 0.5,
        };
        let mut cap = Self::new(t.capacity.q_bob, d.e.unwrap_or(0.5), eps, g);
        let n = (d.n_x + d.n_z).max(1) as f64;
        let p = eps.clamp(1.0 / n, 0.25 - 1.0 / n);
        let sigma_eps = (p * (1.0 - p) / n).sqrt();
        // d/dε h(2ε) = 2·log2((1 − 2ε)/2ε)
        cap.c_w_sigma = g * cap.q_bob * 2.0 * ((1.0 - 2.0 * p) / (2.0 * p)).log2() * sigma_eps;
        cap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayloadKind {
    /// Bits `start..end` of outer block `block`'s codeword.
    MessageBits { block: usize, start: usize, end: usize },
    RandomBits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub payload: PayloadKind,
    /// Retransmission count for the same cache position.
    pub attempt: usize,
    /// Payload bits k_i.
    pub k: usize,
    /// Frame codeword length n_ci.
    pub n_c: usize,
    pub copies: usize,
    /// Secure coding rate R_i.
    pub rate: f64,
    pub c_w_prev: f64,
    pub c_m_prev: f64,
    pub admitted: bool,
    pub photons: usize,
    pub aborted: bool,
    pub measured: Option<FrameCapacity>,
    pub inner_decoded: bool,
    pub verified: bool,
    /// Whether this frame's own capacities still satisfy admission, which
    /// gates key distillation.
    pub post_check: bool,
    pub key_bits: usize,
    /// Bob's copy of the payload when verified.
    #[serde(with = "bits::serde_bits")]
    pub decoded_payload: Vec<u8>,
}

impl FrameRecord {
    /// k/n − (R − C_W): non-positive when the admission inequality holds.
    pub fn admission_slack(&self) -> f64 {
        self.rate - self.c_w_prev - self.k as f64 / self.n_c as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmfOutcome {
    #[serde(with = "bits::serde_bits")]
    pub received: Vec<u8>,
    pub frames: Vec<FrameRecord>,
    pub alice_pool: KeyPool,
    pub bob_pool: KeyPool,
    /// Outer blocks whose decoder did not converge.
    pub outer_failures: usize,
    pub bootstrap_frames: usize,
}

impl QmfOutcome {
    pub fn random_frames_after_bootstrap(&self) -> usize {
        self.frames[self.bootstrap_frames..]
            .iter()
            .filter(|f| f.payload == PayloadKind::RandomBits)
            .count()
    }
}

struct FramePlan {
    copies: usize,
    n_c: usize,
    rate: f64,
    k_max: usize,
    admitted: bool,
}

struct Session<'a, T, R: ?Sized> {
    cfg: &'a QmfSessionConfig,
    transport: &'a mut T,
    rng: &'a mut R,
    inner: FecCode,
    prev: FrameCapacity,
    frames: Vec<FrameRecord>,
    alice: KeyPool,
    bob: KeyPool,
    qber_errors: usize,
    qber_total: usize,
}

impl<T: FrameTransport, R: Rng + ?Sized> Session<'_, T, R> {
    fn plan(&self) -> FramePlan {
        let dim = self.inner.dimension();
        let len = self.inner.len();
        let q = self.prev.q_bob;
        let mut copies = if q >= 1.0 {
            1
        } else if q <= 0.0 {
            MAX_COPIES
        } else {
            (self.cfg.max_copy_erasure.ln() / (1.0 - q).ln()).ceil().max(1.0) as usize
        };
        copies = copies.min(MAX_COPIES);
        while copies < MAX_COPIES && dim as f64 / (len * copies) as f64 >= self.prev.c_m {
            copies += 1;
        }
        let n_c = len * copies;
        let rate = dim as f64 / n_c as f64;
        let backoff = self.cfg.confidence_sigmas * std::f64::consts::SQRT_2 * self.prev.c_w_sigma;
        let bound = (rate - self.prev.c_w - backoff - 1e-12) * n_c as f64;
        let k_max = if bound >= 1.0 { (bound.floor() as usize).min(dim) } else { 0 };
        FramePlan {
            copies,
            n_c,
            rate,
            k_max,
            admitted: k_max > 0 && admit_frame(k_max, n_c, rate, self.prev.c_w, self.prev.c_m),
        }
    }

    fn frame_seed(&self, index: usize, mix: u64) -> u64 {
        self.cfg.public_seed ^ mix ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    /// Sends one frame. Returns Bob's copy of the payload if he recovered
    /// and verified the frame codeword.
    fn send_frame(
        &mut self,
        payload: PayloadKind,
        x: &[u8],
        plan: &FramePlan,
        attempt: usize,
    ) -> Result<Option<Vec<u8>>, QmfError> {
        let index = self.frames.len();
        if index >= self.cfg.max_frames {
            return Err(QmfError::SessionFailure {
                frame: index,
                reason: format!("frame limit {} reached", self.cfg.max_frames),
            });
        }
        let dim = self.inner.dimension();
        let mut info = x.to_vec();
        info.extend(bits::random_bits(dim - x.len(), self.rng));
        let word = self.inner.encode(&info)?;
        let c: Vec<u8> = word.iter().copied().cycle().take(plan.n_c).collect();
        let transcript = self.transport.transmit(&c, self.rng)?;
        let photons = transcript
            .events
            .iter()
            .find_map(|e| match e {
                Event::Initialization { photons } => Some(*photons),
                _ => None,
            })
            .unwrap_or(0);

        let mut record = FrameRecord {
            index,
            payload,
            attempt,
            k: x.len(),
            n_c: plan.n_c,
            copies: plan.copies,
            rate: plan.rate,
            c_w_prev: self.prev.c_w,
            c_m_prev: self.prev.c_m,
            admitted: admit_frame(x.len(), plan.n_c, plan.rate, self.prev.c_w, self.prev.c_m),
            photons,
            aborted: transcript.aborted,
            measured: None,
            inner_decoded: false,
            verified: false,
            post_check: false,
            key_bits: 0,
            decoded_payload: Vec::new(),
        };
        if transcript.aborted {
            self.frames.push(record);
            return Ok(None);
        }
        let measured = FrameCapacity::measured(&transcript, self.cfg.g_estimate);
        record.measured = Some(measured);
        self.qber_errors += transcript.dber.errors_e;
        self.qber_total += transcript.dber.n_e;

        // Bob: combine every copy that came back, then decode.
        let p = ((self.qber_errors as f64 + 1.0) / (self.qber_total as f64 + 2.0)).clamp(0.005, 0.3);
        let mag = ((1.0 - p) / p).ln();
        let mut llr = vec![0.0; self.inner.len()];
        for (&pos, &bit) in transcript.received_positions.iter().zip(&transcript.received_bits) {
            llr[pos % self.inner.len()] += if bit == 0 { mag } else { -mag };
        }
        let mut bob_word = None;
        if let Ok(w) = self.inner.decode_llr(&llr) {
            record.inner_decoded = true;
            let seed = self.frame_seed(index, TAG_SEED_MIX);
            if toeplitz_hash(&w, VERIFY_TAG_BITS, seed) == toeplitz_hash(&word, VERIFY_TAG_BITS, seed) {
                record.verified = true;
                bob_word = Some(w);
            }
        }

        let mut delivered = None;
        if let Some(w) = bob_word {
            record.post_check = admit_frame(x.len(), plan.n_c, plan.rate, measured.c_w, measured.c_m);
            if record.post_check {
                let seed = self.frame_seed(index, KEY_SEED_MIX);
                let bob_c: Vec<u8> = w.iter().copied().cycle().take(plan.n_c).collect();
                let mut alice_key = distill_key(&c, measured.c_s, self.cfg.distillation_margin, seed);
                let mut bob_key = distill_key(&bob_c, measured.c_s, self.cfg.distillation_margin, seed);
                let keep = alice_key.len().saturating_sub(VERIFY_TAG_BITS);
                alice_key.truncate(keep);
                bob_key.truncate(keep);
                record.key_bits = keep;
                self.alice.deposit(&alice_key);
                self.bob.deposit(&bob_key);
            }
            let bob_x: Vec<u8> = self.inner.extract_info(&w)[..x.len()].to_vec();
            record.decoded_payload = bob_x.clone();
            delivered = Some(bob_x);
        }
        self.prev = measured;
        self.frames.push(record);
        Ok(delivered)
    }

    /// Sends a frame of random bits; used to fill the key pool or to refresh
    /// capacity estimates.
    fn random_frame(&mut self) -> Result<usize, QmfError> {
        let plan = self.plan();
        let x = bits::random_bits(plan.k_max, self.rng);
        self.send_frame(PayloadKind::RandomBits, &x, &plan, 0)?;
        Ok(self.frames.last().map_or(0, |f| f.key_bits))
    }

    fn fill_pool(&mut self, needed: usize) -> Result<(), QmfError> {
        let mut idle = 0;
        while self.alice.remaining() < needed {
            if self.random_frame()? == 0 {
                idle += 1;
                if idle > self.cfg.retry_budget {
                    return Err(QmfError::SessionFailure {
                        frame: self.frames.len(),
                        reason: "no key could be distilled from consecutive frames".into(),
                    });
                }
            } else {
                idle = 0;
            }
        }
        Ok(())
    }

    fn send_block(&mut self, block: usize, message: &[u8], codes: &mut HashMap<usize, FecCode>) -> Result<(Vec<u8>, bool), QmfError> {
        let n = self.cfg.outer_len_for(message.len())?;
        if !codes.contains_key(&n) {
            let dc = self.cfg.check_degree()?;
            let mut code = FecCode::regular(n, self.cfg.variable_degree, dc, self.cfg.public_seed ^ n as u64)?;
            code.max_iterations = self.cfg.decoder_iterations;
            codes.insert(n, code);
        }
        let code = &codes[&n];

        self.fill_pool(message.len())?;
        let purpose = format!("block {block}");
        let k_alice = self.alice.take(message.len(), purpose.clone())?;
        let k_bob = self.bob.take(message.len(), purpose)?;
        let mut y = xor_encrypt(message, &k_alice)?;
        y.resize(code.dimension(), 0);
        let x = code.encode(&y)?;

        let mut llr = vec![0.0; x.len()];
        let mut cursor = 0;
        let mut attempt = 0;
        let mut refused = 0;
        while cursor < x.len() {
            let plan = self.plan();
            if !plan.admitted {
                refused += 1;
                if refused > self.cfg.retry_budget {
                    return Err(QmfError::SessionFailure {
                        frame: self.frames.len(),
                        reason: format!(
                            "admission refused {refused} times (C_M = {:.4}, C_W = {:.4})",
                            self.prev.c_m, self.prev.c_w
                        ),
                    });
                }
                self.random_frame()?;
                continue;
            }
            refused = 0;
            let end = (cursor + plan.k_max).min(x.len());
            let payload = PayloadKind::MessageBits { block, start: cursor, end };
            match self.send_frame(payload, &x[cursor..end], &plan, attempt)? {
                Some(bits) => {
                    for (l, b) in llr[cursor..end].iter_mut().zip(bits) {
                        *l = if b == 0 { KNOWN_BIT_LLR } else { -KNOWN_BIT_LLR };
                    }
                }
                None if attempt < self.cfg.retry_budget => {
                    attempt += 1;
                    continue;
                }
                // Retries exhausted: these positions stay erased for the outer code.
                None => {}
            }
            cursor = end;
            attempt = 0;
        }

        let (word, ok) = match code.decode_llr(&llr) {
            Ok(w) => (w, true),
            Err(_) => (llr.iter().map(|&l| u8::from(l < 0.0)).collect(), false),
        };
        let y_hat = &code.extract_info(&word)[..message.len()];
        Ok((xor_encrypt(y_hat, &k_bob)?, ok))
    }
}

/// Runs a full session: bootstrap frames until the pool can encrypt the
/// first block, then per block encrypt, precode, and send the codeword in
/// admitted frames, inserting random frames whenever the pool runs short.
pub fn run_qmf_session<T: FrameTransport, R: Rng + ?Sized>(
    cfg: &QmfSessionConfig,
    message: &[u8],
    transport: &mut T,
    rng: &mut R,
) -> Result<QmfOutcome, QmfError> {
    cfg.validate()?;
    let mut inner = FecCode::regular(cfg.inner_block_len, 3, 6, cfg.public_seed)?;
    inner.max_iterations = cfg.decoder_iterations;
    let mut session = Session {
        cfg,
        transport,
        rng,
        inner,
        prev: cfg.prior_capacity(),
        frames: Vec::new(),
        alice: KeyPool::new(),
        bob: KeyPool::new(),
        qber_errors: 0,
        qber_total: 0,
    };
    let block_len = cfg.block_message_len().max(1);
    let first = message.len().min(block_len);
    session.fill_pool(first)?;
    let bootstrap_frames = session.frames.len();

    let mut codes = HashMap::new();
    let mut received = Vec::with_capacity(message.len());
    let mut outer_failures = 0;
    for (block, chunk) in message.chunks(block_len).enumerate() {
        let (bits, ok) = session.send_block(block, chunk, &mut codes)?;
        received.extend(bits);
        if !ok {
            outer_failures += 1;
        }
    }
    Ok(QmfOutcome {
        received,
        frames: session.frames,
        alice_pool: session.alice,
        bob_pool: session.bob,
        outer_failures,
        bootstrap_frames,
    })
}
