use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{coalition_value, Attribution, Background, Coalition, ShapError};
use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::models::Predictor;
use crate::numeric::solve_symmetric;

/// How many interior coalitions (neither empty nor full) to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelBudget {
    /// All `2^d − 2` interior coalitions, in ascending mask order.
    Complete,
    /// The first `n` of a seeded shuffle of the interior coalitions.
    /// `n ≥ 2^d − 2` is the same as `Complete`.
    Coalitions(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelDiagnostics {
    pub coalitions_used: usize,
    /// True when the requested sample did not span and more coalitions
    /// were pulled from the shuffle.
    pub extended: bool,
    /// Weighted residual sum of squares of the fitted coalition values.
    pub weighted_residual: f64,
}

const INTERIOR: usize = Coalition::COUNT - 2;

/// Shapley kernel `(d − 1) / (C(d, |z|) · |z| · (d − |z|))`.
fn kernel_weight(size: usize) -> f64 {
    let d = NUM_FEATURES;
    let choose = (0..size).fold(1.0, |acc, i| acc * (d - i) as f64 / (i + 1) as f64);
    (d - 1) as f64 / (choose * size as f64 * (d - size) as f64)
}

/// Kernel-weighted least-squares estimate of the Shapley values.
///
/// The efficiency constraint `Σφ = f(x) − v(∅)` is enforced by writing the
/// last attribution as `Δ − Σ_{j<d−1} φ_j` and solving ordinary WLS for the
/// remaining `d − 1`. With the complete budget this reproduces the exact
/// Shapley values up to rounding.
pub fn kernel_shapley<P: Predictor + ?Sized>(
    p: &P,
    background: &Background,
    x: &FeatureVector,
    budget: KernelBudget,
    seed: u64,
) -> Result<(Attribution, KernelDiagnostics), ShapError> {
    if background.is_empty() {
        return Err(ShapError::EmptyBackground);
    }
    let mut order: Vec<Coalition> = (1..=INTERIOR as u8).map(Coalition::from_bits).collect();
    let requested = match budget {
        KernelBudget::Complete => INTERIOR,
        KernelBudget::Coalitions(n) if n < NUM_FEATURES + 2 => return Err(ShapError::InvalidBudget(n)),
        KernelBudget::Coalitions(n) => {
            if n < INTERIOR {
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            }
            n.min(INTERIOR)
        }
    };

    let base_value = coalition_value(p, background, x, Coalition::EMPTY);
    let delta = p.predict_row(x) - base_value;

    let mut values: Vec<f64> = order[..requested].iter().map(|&s| coalition_value(p, background, x, s)).collect();
    let mut used = requested;
    let solution = loop {
        if let Some(sol) = solve_constrained(&order[..used], &values, base_value, delta) {
            break sol;
        }
        if used == INTERIOR {
            return Err(ShapError::DegenerateSystem);
        }
        values.push(coalition_value(p, background, x, order[used]));
        used += 1;
    };

    let (phi, weighted_residual) = solution;
    Ok((
        Attribution { base_value, values: phi },
        KernelDiagnostics { coalitions_used: used, extended: used > requested, weighted_residual },
    ))
}

fn solve_constrained(
    coalitions: &[Coalition],
    values: &[f64],
    base_value: f64,
    delta: f64,
) -> Option<([f64; NUM_FEATURES], f64)> {
    const FREE: usize = NUM_FEATURES - 1;
    let last = NUM_FEATURES - 1;
    let mut gram = vec![vec![0.0; FREE]; FREE];
    let mut rhs = vec![0.0; FREE];
    let mut design = Vec::with_capacity(coalitions.len());
    for (&s, &v) in coalitions.iter().zip(values) {
        let w = kernel_weight(s.size());
        let z_last = f64::from(u8::from(s.contains(last)));
        let row: [f64; FREE] = std::array::from_fn(|j| f64::from(u8::from(s.contains(j))) - z_last);
        let target = v - base_value - z_last * delta;
        for a in 0..FREE {
            rhs[a] += w * row[a] * target;
            for b in 0..FREE {
                gram[a][b] += w * row[a] * row[b];
            }
        }
        design.push((w, row, target));
    }
    let free = solve_symmetric(&gram, &rhs)?;

    let mut phi = [0.0; NUM_FEATURES];
    phi[..FREE].copy_from_slice(&free);
    phi[last] = delta - free.iter().sum::<f64>();
    let residual = design
        .iter()
        .map(|(w, row, t)| {
            let fit: f64 = row.iter().zip(&free).map(|(z, f)| z * f).sum();
            w * (t - fit) * (t - fit)
        })
        .sum();
    Some((phi, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::embedded_fdm_corpus;
    use crate::models::{fit_linear, FnPredictor};
    use crate::shapley::exact_shapley;

    #[test]
    fn kernel_weights() {
        // d = 4: sizes 1 and 3 get 3 / (4·3) = 1/4, size 2 gets 3 / (6·4) = 1/8.
        assert_eq!(kernel_weight(1), 0.25);
        assert_eq!(kernel_weight(2), 0.125);
        assert_eq!(kernel_weight(3), 0.25);
    }

    #[test]
    fn complete_budget_matches_exact_on_linear_model() {
        let d = embedded_fdm_corpus();
        let (m, _) = fit_linear(&d, 0.0).unwrap();
        let bg = Background::full(&d);
        for x in d.rows() {
            let exact = exact_shapley(&m, &bg, x);
            let (k, diag) = kernel_shapley(&m, &bg, x, KernelBudget::Complete, 0).unwrap();
            assert_eq!(diag.coalitions_used, 14);
            for j in 0..4 {
                assert!((exact.values[j] - k.values[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dummy_feature_gets_zero() {
        let d = embedded_fdm_corpus();
        let f = FnPredictor(|x: &FeatureVector| 0.1 * x[0] * x[3] / 200.0 - 0.02 * x[2]);
        let bg = Background::full(&d);
        for x in d.rows() {
            let (a, _) = kernel_shapley(&f, &bg, x, KernelBudget::Complete, 0).unwrap();
            assert!(a.values[1].abs() < 1e-6);
        }
    }

    #[test]
    fn single_live_feature_takes_the_whole_gap() {
        let d = embedded_fdm_corpus();
        let f = FnPredictor(|x: &FeatureVector| (x[3] / 10.0).sin() * 3.0 + 40.0);
        let bg = Background::full(&d);
        let x = d.rows()[13];
        let (a, _) = kernel_shapley(&f, &bg, &x, KernelBudget::Complete, 0).unwrap();
        let gap = f.predict_row(&x) - a.base_value;
        assert!((a.values[3] - gap).abs() < 1e-12);
        for j in 0..3 {
            assert!(a.values[j].abs() < 1e-12);
        }
    }

    #[test]
    fn partial_budget_is_seeded_and_efficient() {
        let d = embedded_fdm_corpus();
        let (m, _) = fit_linear(&d, 0.0).unwrap();
        let bg = Background::full(&d);
        let x = d.rows()[0];
        let (a, diag) = kernel_shapley(&m, &bg, &x, KernelBudget::Coalitions(8), 42).unwrap();
        let (b, _) = kernel_shapley(&m, &bg, &x, KernelBudget::Coalitions(8), 42).unwrap();
        assert_eq!(a, b);
        assert!(diag.coalitions_used >= 8);
        assert!((a.total() - m.predict_row(&x)).abs() < 1e-9);
        // An additive model is fit exactly by any spanning sample.
        let exact = exact_shapley(&m, &bg, &x);
        for j in 0..4 {
            assert!((a.values[j] - exact.values[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn budget_below_minimum_is_rejected() {
        let d = embedded_fdm_corpus();
        let bg = Background::full(&d);
        let f = FnPredictor(|x: &FeatureVector| x[0]);
        assert!(matches!(
            kernel_shapley(&f, &bg, &d.rows()[0], KernelBudget::Coalitions(5), 0),
            Err(ShapError::InvalidBudget(5))
        ));
    }
}
