//! Deterministic LIBSVM-format fixture generators.
//!
//! These produce desk-scale binary-classification instances with the same
//! shapes and sparsity patterns as two widely used benchmark datasets
//! (1605 x 123 one-hot categorical rows, and 1243 x 22 dense scaled rows),
//! for tests and demos when the real files are not on disk. Both carry a
//! planted signal so solvers have something to fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 1605 observations, 123 binary features, labels in {-1, +1} with roughly a
/// quarter positive. Every row has exactly 14 active features, one drawn
/// uniformly from each of 14 one-hot groups; labels follow a diffuse planted
/// weight over all features, so no handful of coordinates separates the
/// classes and solvers face a realistically slow instance.
pub fn a1a_style_text() -> String {
    let n = 1605;
    let p = 123;
    let groups = 14usize;
    // 13 groups of 9 plus one of 6 cover the 123 features
    let sizes: Vec<usize> = (0..groups).map(|g| if g < 13 { 9 } else { 6 }).collect();
    debug_assert_eq!(sizes.iter().sum::<usize>(), p);
    let mut offsets = Vec::with_capacity(groups);
    let mut acc = 0usize;
    for &s in &sizes {
        offsets.push(acc);
        acc += s;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xA1A);
    let planted: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = String::with_capacity(n * 90);
    for _ in 0..n {
        let mut picks = Vec::with_capacity(groups);
        let mut margin = 0.0;
        for g in 0..groups {
            let pick = offsets[g] + rng.gen_range(0..sizes[g]);
            margin += planted[pick];
            picks.push(pick);
        }
        // bias toward the negative class for the usual ~25% positive rate
        let prob = 1.0 / (1.0 + (-(0.3 * margin - 1.3)).exp());
        let positive = rng.gen_bool(prob.clamp(0.0, 1.0));
        out.push_str(if positive { "+1" } else { "-1" });
        for pick in picks {
            out.push_str(&format!(" {}:1", pick + 1));
        }
        out.push('\n');
    }
    out
}

/// 1243 observations, 22 dense scaled features, labels in {0, 1} (the
/// alternate binary convention, exercising the automatic remap).
pub fn svmguide3_style_text() -> String {
    let n = 1243;
    let p = 22;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5736);
    let planted: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = String::with_capacity(n * 250);
    for _ in 0..n {
        let features: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let margin: f64 = features.iter().zip(&planted).map(|(a, b)| a * b).sum();
        let prob = 1.0 / (1.0 + (-3.0 * margin).exp());
        let label = if rng.gen_bool(prob.clamp(0.0, 1.0)) { "1" } else { "0" };
        out.push_str(label);
        for (j, v) in features.iter().enumerate() {
            // keep the text compact; 6 significant digits are plenty here
            out.push_str(&format!(" {}:{:.6}", j + 1, v));
        }
        out.push('\n');
    }
    out
}
