//! Execution policy shared by the data-parallel kernels.

/// Whether a kernel may fan out over the current rayon pool.
///
/// `Sequential` is the deterministic reference mode: every kernel runs in a
/// fixed order on the calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    DataParallel,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        matches!(self, Parallelism::DataParallel)
    }
}
