//! Lazily paged word store with a per-word write counter.

use super::{Addr, Word};

const PAGE_BITS: u32 = 12;
const PAGE_WORDS: usize = 1 << PAGE_BITS;

struct Page {
    words: Box<[Word]>,
    writes: Box<[u8]>,
}

impl Page {
    fn new() -> Self {
        Self {
            words: vec![0; PAGE_WORDS].into_boxed_slice(),
            writes: vec![0; PAGE_WORDS].into_boxed_slice(),
        }
    }
}

#[derive(Default)]
pub struct PagedStore {
    pages: Vec<Option<Page>>,
}

impl PagedStore {
    fn split(addr: Addr) -> (usize, usize) {
        (
            (addr >> PAGE_BITS) as usize,
            (addr as usize) & (PAGE_WORDS - 1),
        )
    }

    fn page_mut(&mut self, p: usize) -> &mut Page {
        if p >= self.pages.len() {
            self.pages.resize_with(p + 1, || None);
        }
        self.pages[p].get_or_insert_with(Page::new)
    }

    pub fn get(&self, addr: Addr) -> Word {
        let (p, o) = Self::split(addr);
        match self.pages.get(p) {
            Some(Some(page)) => page.words[o],
            _ => 0,
        }
    }

    pub fn set(&mut self, addr: Addr, w: Word) {
        let (p, o) = Self::split(addr);
        self.page_mut(p).words[o] = w;
    }

    /// Stores `w` and bumps the write counter, returning the new count.
    pub fn write_counted(&mut self, addr: Addr, w: Word) -> u32 {
        let (p, o) = Self::split(addr);
        let page = self.page_mut(p);
        page.words[o] = w;
        page.writes[o] = page.writes[o].saturating_add(1);
        page.writes[o] as u32
    }

    pub fn write_count(&self, addr: Addr) -> u32 {
        let (p, o) = Self::split(addr);
        match self.pages.get(p) {
            Some(Some(page)) => page.writes[o] as u32,
            _ => 0,
        }
    }

    /// Forgets write counts for a range that now holds fresh variables.
    pub fn reset_counts(&mut self, start: Addr, len: u64) {
        let mut a = start;
        let end = start + len;
        while a < end {
            let (p, o) = Self::split(a);
            let run = ((PAGE_WORDS - o) as u64).min(end - a);
            if let Some(Some(page)) = self.pages.get_mut(p) {
                page.writes[o..o + run as usize].fill(0);
            }
            a += run;
        }
    }
}
