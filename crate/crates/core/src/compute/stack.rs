use crate::error::SimError;
use crate::memsim::{Addr, AddrRange, CoreId};

/// A core's execution stack inside its stack arena.
///
/// Frames are pushed in start order. A frame can be released while frames
/// above it are still live (its task was finished by another core); the top
/// only recedes once the topmost frame is released.
#[derive(Clone, Debug)]
pub struct ExecutionStack {
    pub core: CoreId,
    arena: AddrRange,
    top: Addr,
    frames: Vec<(AddrRange, Addr, bool)>,
    high_water: Addr,
}

impl ExecutionStack {
    pub fn new(core: CoreId, arena: AddrRange) -> Self {
        Self {
            core,
            arena,
            top: arena.start,
            frames: Vec::new(),
            high_water: arena.start,
        }
    }

    pub fn top(&self) -> Addr {
        self.top
    }

    pub fn base(&self) -> Addr {
        self.arena.start
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn high_water(&self) -> u64 {
        self.high_water - self.arena.start
    }

    /// Places `words` of locals after the current top, first skipping `gap`
    /// untouched words when padding.
    pub fn push(&mut self, words: u64, gap: u64) -> Result<AddrRange, SimError> {
        let start = self.top + gap;
        let end = start + words;
        if end > self.arena.end() {
            return Err(SimError::StackOverflow {
                core: self.core,
                need: end - self.arena.start,
                cap: self.arena.len,
            });
        }
        let range = AddrRange { start, len: words };
        self.frames.push((range, self.top, true));
        self.top = end;
        self.high_water = self.high_water.max(end);
        Ok(range)
    }

    /// Releases a frame previously returned by `push`.
    pub fn pop(&mut self, range: AddrRange) -> Result<(), SimError> {
        let slot = self
            .frames
            .iter()
            .rposition(|&(r, _, live)| live && r == range)
            .ok_or_else(|| SimError::Internal(format!("pop of unknown frame {range:?}")))?;
        self.frames[slot].2 = false;
        while let Some(&(_, below, false)) = self.frames.last() {
            self.top = below;
            self.frames.pop();
        }
        Ok(())
    }
}

/// Padding gap before the frame of a task of size `size`: ⌈√size⌉.
pub fn pad_gap(size: u64) -> u64 {
    let r = size.isqrt();
    if r * r == size {
        r
    } else {
        r + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> ExecutionStack {
        ExecutionStack::new(
            0,
            AddrRange {
                start: 64,
                len: 1024,
            },
        )
    }

    #[test]
    fn unpadded_frames_are_adjacent() {
        let mut s = stack();
        let a = s.push(4, 0).unwrap();
        let b = s.push(4, 0).unwrap();
        assert_eq!(a.end(), b.start);
    }

    #[test]
    fn padding_precedes_locals() {
        let mut s = stack();
        assert_eq!(pad_gap(256), 16);
        assert_eq!(pad_gap(257), 17);
        let f = s.push(3, pad_gap(256)).unwrap();
        assert_eq!(f.start, 64 + 16);
    }

    #[test]
    fn out_of_order_release_restores_top() {
        let mut s = stack();
        let a = s.push(4, 0).unwrap();
        let b = s.push(4, 2).unwrap();
        s.pop(a).unwrap();
        assert_eq!(s.top(), b.end());
        s.pop(b).unwrap();
        assert_eq!(s.top(), 64);
        assert_eq!(s.depth(), 0);
    }

    #[test]
    fn overflow_is_reported() {
        let mut s = stack();
        assert!(matches!(
            s.push(2000, 0),
            Err(SimError::StackOverflow { .. })
        ));
    }
}
