//! Multiply-add accounting for the scoring kernels.
//!
//! Kernels take a `&mut impl Tally`. The unit impl is a no-op the optimizer
//! removes, so only callers that ask for a count pay for one.

pub trait Tally {
    /// Records `n` multiply-adds in contraction stage `stage` (0 = first).
    fn record(&mut self, stage: usize, n: u64);
}

impl Tally for () {
    #[inline(always)]
    fn record(&mut self, _stage: usize, _n: u64) {}
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlopCounter {
    stages: Vec<u64>,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.stages.iter().sum()
    }

    /// The first contraction stage. For Tucker this is the core contraction
    /// against the innermost lexical view; for CP it is the whole product.
    pub fn core(&self) -> u64 {
        self.stages.first().copied().unwrap_or(0)
    }

    pub fn stages(&self) -> &[u64] {
        &self.stages
    }
}

impl Tally for FlopCounter {
    fn record(&mut self, stage: usize, n: u64) {
        if self.stages.len() <= stage {
            self.stages.resize(stage + 1, 0);
        }
        self.stages[stage] += n;
    }
}
