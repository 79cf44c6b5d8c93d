//! Benchmark fixtures; the benchmarks live in `benches/`.

use eecop_core::simulate::{generate, DgpKind, DgpSpec};
use eecop_core::Sample;

pub fn fixture(kind: DgpKind, n: usize, p: usize) -> Sample {
    generate(&DgpSpec { kind, n, p, seed: 42 }).expect("valid design")
}
