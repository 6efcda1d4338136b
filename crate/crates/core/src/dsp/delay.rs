use crate::error::{Error, Result};

/// Fixed-capacity tapped delay line read most-recent-first.
///
/// Every sample is written twice (at `pos` and `pos + capacity`) so any
/// window up to `capacity` taps is one contiguous slice. Taps that were
/// never written read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buf: Vec<f64>,
    pos: usize,
    capacity: usize,
}

impl DelayLine {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        DelayLine {
            buf: vec![0.0; 2 * capacity],
            pos: 0,
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn push(&mut self, z: f64) {
        self.pos = if self.pos == 0 { self.capacity - 1 } else { self.pos - 1 };
        self.buf[self.pos] = z;
        self.buf[self.pos + self.capacity] = z;
    }

    /// `[z(n), z(n−1), …, z(n−len+1)]`.
    pub fn window(&self, len: usize) -> Result<&[f64]> {
        if len > self.capacity {
            return Err(Error::contract(format!(
                "window of {len} taps exceeds delay-line capacity {}",
                self.capacity
            )));
        }
        Ok(&self.buf[self.pos..self.pos + len])
    }

    /// Full-capacity window; never fails.
    #[inline]
    pub fn full(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.capacity]
    }

    /// Window starting `offset` taps in the past: `[z(n−offset), …]`.
    #[inline]
    pub fn window_from(&self, offset: usize, len: usize) -> &[f64] {
        assert!(offset + len <= self.capacity, "delayed window exceeds capacity");
        &self.buf[self.pos + offset..self.pos + offset + len]
    }

    /// Pushes `z` and returns the newest `len` taps.
    pub fn push_and_window(&mut self, z: f64, len: usize) -> Result<&[f64]> {
        if len > self.capacity {
            return Err(Error::contract(format!(
                "window of {len} taps exceeds delay-line capacity {}",
                self.capacity
            )));
        }
        self.push(z);
        Ok(&self.buf[self.pos..self.pos + len])
    }

    pub fn clear(&mut self) {
        self.buf.fill(0.0);
        self.pos = 0;
    }
}
