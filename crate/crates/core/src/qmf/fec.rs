//! Binary LDPC codes: seeded regular construction, systematic encoding via
//! GF(2) elimination, and sum-product decoding on log-likelihood ratios.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QmfError;

/// LLR magnitude used for bits known with certainty.
pub const KNOWN_BIT_LLR: f64 = 30.0;
pub const DEFAULT_DECODER_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeFailure {
    pub iterations: usize,
    pub unsatisfied_checks: usize,
}

impl std::fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "decoder stopped after {} iterations with {} unsatisfied checks",
            self.iterations, self.unsatisfied_checks
        )
    }
}

#[derive(Debug, Clone)]
pub struct FecCode {
    n: usize,
    checks: Vec<Vec<usize>>,
    /// Edge ids per variable; edges are numbered check by check.
    var_edges: Vec<Vec<usize>>,
    edge_var: Vec<usize>,
    info_positions: Vec<usize>,
    /// (pivot variable, free variables it equals the XOR of).
    parity_rows: Vec<(usize, Vec<usize>)>,
    pub max_iterations: usize,
}

impl FecCode {
    /// Builds a code from its parity checks (each a list of variable indices).
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self, QmfError> {
        if n == 0 {
            return Err(QmfError::BadCode("code length must be positive".into()));
        }
        let mut var_edges = vec![Vec::new(); n];
        let mut edge_var = Vec::new();
        for (c, vars) in checks.iter().enumerate() {
            let mut sorted = vars.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(QmfError::BadCode(format!("check {c} lists a variable twice")));
            }
            for &v in vars {
                if v >= n {
                    return Err(QmfError::BadCode(format!("check {c} references variable {v} >= {n}")));
                }
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
        }
        let (info_positions, parity_rows) = systematic_form(n, &checks);
        Ok(Self {
            n,
            checks,
            var_edges,
            edge_var,
            info_positions,
            parity_rows,
            max_iterations: DEFAULT_DECODER_ITERATIONS,
        })
    }

    /// Regular (dv, dc) code from a seeded socket permutation, with
    /// repeated edges swapped away.
    pub fn regular(n: usize, dv: usize, dc: usize, seed: u64) -> Result<Self, QmfError> {
        if dv == 0 || dc <= dv || (n * dv) % dc != 0 {
            return Err(QmfError::BadCode(format!("no regular ({dv},{dc}) code of length {n}")));
        }
        let m = n * dv / dc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sockets: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, dv)).collect();
        sockets.shuffle(&mut rng);
        let has_repeat = |sockets: &[usize], c: usize| {
            let row = &sockets[c * dc..(c + 1) * dc];
            (0..dc).any(|i| row[i + 1..].contains(&row[i]))
        };
        for _ in 0..1000 {
            let bad: Vec<usize> = (0..m).filter(|&c| has_repeat(&sockets, c)).collect();
            if bad.is_empty() {
                let checks = sockets.chunks(dc).map(|row| row.to_vec()).collect();
                return Self::from_checks(n, checks);
            }
            for c in bad {
                for i in c * dc..(c + 1) * dc {
                    let row = &sockets[c * dc..(c + 1) * dc];
                    if row.iter().filter(|&&v| v == sockets[i]).count() > 1 {
                        let j = rng.random_range(0..sockets.len());
                        sockets.swap(i, j);
                    }
                }
            }
        }
        Err(QmfError::BadCode(format!("could not remove repeated edges for n={n}")))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of information bits per codeword.
    pub fn dimension(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.n as f64
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, QmfError> {
        if info.len() != self.dimension() {
            return Err(QmfError::LengthMismatch {
                left: info.len(),
                right: self.dimension(),
            });
        }
        let mut word = vec![0u8; self.n];
        for (&pos, &bit) in self.info_positions.iter().zip(info) {
            word[pos] = bit & 1;
        }
        for (pivot, free) in &self.parity_rows {
            word[*pivot] = free.iter().fold(0, |acc, &v| acc ^ word[v]);
        }
        Ok(word)
    }

    pub fn extract_info(&self, word: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| word[p]).collect()
    }

    pub fn unsatisfied_checks(&self, word: &[u8]) -> usize {
        self.checks
            .iter()
            .filter(|vars| vars.iter().fold(0, |acc, &v| acc ^ word[v]) == 1)
            .count()
    }

    /// Sum-product decoding. Positive LLR favours 0.
    pub fn decode_llr(&self, llr: &[f64]) -> Result<Vec<u8>, DecodeFailure> {
        assert_eq!(llr.len(), self.n, "LLR vector length");
        let clamp = |x: f64| x.clamp(-KNOWN_BIT_LLR, KNOWN_BIT_LLR);
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| clamp(llr[v])).collect();
        let mut c2v = vec![0.0; v2c.len()];
        let mut word: Vec<u8> = llr.iter().map(|&l| u8::from(l < 0.0)).collect();
        if self.unsatisfied_checks(&word) == 0 {
            return Ok(word);
        }
        let mut tanhs = Vec::new();
        let mut suffix = Vec::new();
        for iteration in 1..=self.max_iterations {
            let mut edge = 0;
            for vars in &self.checks {
                let d = vars.len();
                tanhs.clear();
                tanhs.extend(v2c[edge..edge + d].iter().map(|&m| (m / 2.0).tanh()));
                suffix.clear();
                suffix.resize(d + 1, 1.0);
                for i in (0..d).rev() {
                    suffix[i] = suffix[i + 1] * tanhs[i];
                }
                let mut prefix = 1.0;
                for i in 0..d {
                    let p = (prefix * suffix[i + 1]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    c2v[edge + i] = clamp(2.0 * p.atanh());
                    prefix *= tanhs[i];
                }
                edge += d;
            }
            for (v, edges) in self.var_edges.iter().enumerate() {
                let total = llr[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
                word[v] = u8::from(total < 0.0);
                for &e in edges {
                    v2c[e] = clamp(total - c2v[e]);
                }
            }
            let unsatisfied = self.unsatisfied_checks(&word);
            if unsatisfied == 0 {
                return Ok(word);
            }
            if iteration == self.max_iterations {
                return Err(DecodeFailure {
                    iterations: iteration,
                    unsatisfied_checks: unsatisfied,
                });
            }
        }
        Err(DecodeFailure {
            iterations: 0,
            unsatisfied_checks: self.unsatisfied_checks(&word),
        })
    }

    /// Decodes a hard-decision word received over a binary symmetric
    /// channel with the given crossover probability; returns the info bits.
    pub fn decode_hard(&self, word: &[u8], flip_prob: f64) -> Result<Vec<u8>, DecodeFailure> {
        let p = flip_prob.clamp(1e-6, 0.5 - 1e-6);
        let mag = ((1.0 - p) / p).ln();
        let llr: Vec<f64> = word.iter().map(|&b| if b & 1 == 0 { mag } else { -mag }).collect();
        self.decode_llr(&llr).map(|w| self.extract_info(&w))
    }

    /// Plain-text sparse form: a `<variables> <checks>` header, then one line
    /// per check holding its index followed by its variable indices.
    pub fn to_sparse_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.checks.len());
        for (c, vars) in self.checks.iter().enumerate() {
            let _ = write!(out, "{c}");
            for v in vars {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`to_sparse_text`](Self::to_sparse_text) output. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn from_sparse_text(text: &str) -> Result<Self, QmfError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse = |line: usize, tok: &str| {
            tok.parse::<usize>().map_err(|_| QmfError::Format {
                line,
                message: format!("expected a non-negative integer, got {tok:?}"),
            })
        };
        let (hline, header) = lines.next().ok_or(QmfError::Format {
            line: 0,
            message: "missing header".into(),
        })?;
        let dims: Vec<usize> = header.split_whitespace().map(|t| parse(hline, t)).collect::<Result<_, _>>()?;
        let [n, m] = dims[..] else {
            return Err(QmfError::Format {
                line: hline,
                message: "header must be `<variables> <checks>`".into(),
            });
        };
        let mut checks: Vec<Option<Vec<usize>>> = vec![None; m];
        for (line, row) in lines {
            let nums: Vec<usize> = row.split_whitespace().map(|t| parse(line, t)).collect::<Result<_, _>>()?;
            let (&c, vars) = nums.split_first().expect("non-empty line");
            let slot = checks.get_mut(c).ok_or(QmfError::Format {
                line,
                message: format!("check index {c} out of range"),
            })?;
            if slot.replace(vars.to_vec()).is_some() {
                return Err(QmfError::Format {
                    line,
                    message: format!("check {c} defined twice"),
                });
            }
        }
        let checks = checks
            .into_iter()
            .enumerate()
            .map(|(c, row)| {
                row.ok_or(QmfError::Format {
                    line: 0,
                    message: format!("check {c} missing"),
                })
            })
            .collect::<Result<_, _>>()?;
        Self::from_checks(n, checks)
    }
}

/// Reduced row echelon form of H over GF(2). Pivot columns become parity
/// positions; the rest carry information.
fn systematic_form(n: usize, checks: &[Vec<usize>]) -> (Vec<usize>, Vec<(usize, Vec<usize>)>) {
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = checks
        .iter()
        .map(|vars| {
            let mut row = vec![0u64; words];
            for &v in vars {
                row[v / 64] ^= 1 << (v % 64);
            }
            row
        })
        .collect();
    let bit = |row: &[u64], c: usize| row[c / 64] >> (c % 64) & 1 == 1;
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..rows.len()).find(|&r| bit(&rows[r], col)) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && bit(row, col) {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let info = (0..n).filter(|&c| !is_pivot[c]).collect();
    let parity = pivots
        .iter()
        .zip(&rows)
        .map(|(&p, row)| (p, (0..n).filter(|&c| c != p && bit(row, c)).collect()))
        .collect();
    (info, parity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_code_shape() {
        let code = FecCode::regular(96, 3, 6, 1).unwrap();
        assert_eq!(code.checks().len(), 48);
        assert!(code.checks().iter().all(|c| c.len() == 6));
        assert!(code.dimension() >= 48);
        assert!(code.var_edges.iter().all(|e| e.len() == 3));
    }

    #[test]
    fn codewords_satisfy_all_checks() {
        let code = FecCode::regular(120, 3, 6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let info: Vec<u8> = (0..code.dimension()).map(|_| rng.random_range(0..2)).collect();
            let word = code.encode(&info).unwrap();
            assert_eq!(code.unsatisfied_checks(&word), 0);
            assert_eq!(code.extract_info(&word), info);
        }
    }

    #[test]
    fn sparse_text_rejects_garbage() {
        assert!(FecCode::from_sparse_text("4 1\n0 1 x\n").is_err());
        assert!(FecCode::from_sparse_text("4 1\n3 0 1\n").is_err());
        assert!(FecCode::from_sparse_text("4 2\n0 0 1\n").is_err());
        assert!(FecCode::from_sparse_text("4 1\n0 0 9\n").is_err());
        let code = FecCode::from_sparse_text("# tiny\n4 1\n\n0 0 1 2 3\n").unwrap();
        assert_eq!(code.dimension(), 3);
    }
}
