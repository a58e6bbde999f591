use super::{composite, Attribution, Background, Coalition};
use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::models::Predictor;
use crate::numeric::order_free_mean;

/// Mean prediction over the background with the features in `coalition`
/// taken from `x`. One batched `predict` call of `|background|` rows.
pub fn coalition_value<P: Predictor + ?Sized>(
    p: &P,
    background: &Background,
    x: &FeatureVector,
    coalition: Coalition,
) -> f64 {
    let rows: Vec<FeatureVector> = background.rows().iter().map(|r| composite(x, r, coalition)).collect();
    order_free_mean(&p.predict(&rows))
}

/// `|S|! (d − |S| − 1)! / d!`
pub(crate) fn shapley_weight(size: usize) -> f64 {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    fact(size) * fact(NUM_FEATURES - size - 1) / fact(NUM_FEATURES)
}

/// Exact Shapley values by enumeration: each of the 16 coalition values is
/// computed once, then every feature's marginal contributions are summed in
/// ascending coalition order.
pub fn exact_shapley<P: Predictor + ?Sized>(p: &P, background: &Background, x: &FeatureVector) -> Attribution {
    let value: Vec<f64> = Coalition::all().map(|s| coalition_value(p, background, x, s)).collect();
    let mut phi = [0.0; NUM_FEATURES];
    for (j, slot) in phi.iter_mut().enumerate() {
        for s in Coalition::all().filter(|s| !s.contains(j)) {
            let gain = value[s.with(j).bits() as usize] - value[s.bits() as usize];
            *slot += shapley_weight(s.size()) * gain;
        }
    }
    Attribution { base_value: value[Coalition::EMPTY.bits() as usize], values: phi }
}
