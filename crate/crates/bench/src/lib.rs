//! Shared fixtures for the benchmarks.

use fdmx::prelude::*;

/// The embedded corpus with the default boosted model fit to it.
pub fn corpus_with_model() -> (Dataset, GbtModel) {
    let d = embedded_fdm_corpus();
    let (m, _) = fit_gbt(&d, &GbtParams::default()).expect("default fit succeeds on the corpus");
    (d, m)
}
