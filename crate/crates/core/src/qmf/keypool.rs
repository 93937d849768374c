use std::collections::VecDeque;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::QmfError;

/// One withdrawal from the pool, by global deposit index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyWithdrawal {
    pub range: Range<usize>,
    pub purpose: String,
}

/// FIFO store of distilled key bits. Bits are numbered in deposit order and
/// each is handed out at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPool {
    bits: VecDeque<u8>,
    total_deposited: usize,
    total_consumed: usize,
    withdrawals: Vec<KeyWithdrawal>,
}

impl KeyPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deposit(&mut self, key: &[u8]) {
        self.bits.extend(key.iter().map(|b| b & 1));
        self.total_deposited += key.len();
    }

    pub fn take(&mut self, n: usize, purpose: impl Into<String>) -> Result<Vec<u8>, QmfError> {
        if n > self.bits.len() {
            return Err(QmfError::KeyPoolUnderflow {
                requested: n,
                available: self.bits.len(),
            });
        }
        let start = self.total_consumed;
        self.total_consumed += n;
        self.withdrawals.push(KeyWithdrawal {
            range: start..self.total_consumed,
            purpose: purpose.into(),
        });
        Ok(self.bits.drain(..n).collect())
    }

    pub fn remaining(&self) -> usize {
        self.bits.len()
    }

    pub fn total_deposited(&self) -> usize {
        self.total_deposited
    }

    pub fn total_consumed(&self) -> usize {
        self.total_consumed
    }

    pub fn withdrawals(&self) -> &[KeyWithdrawal] {
        &self.withdrawals
    }
}
