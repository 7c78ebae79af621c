//! Self-contained re-implementation of the discrete recursion on a
//! five-node grid with every quantity hard-coded. It shares no code with
//! the library.

use impulse_maint::model::{CostSpec, ModelSpec, ShockDistribution, UtilitySpec};

/// lambda = 0.5, delta = 0.2, O = 1, h = 0.25, Exp(rate 2) shocks,
/// G(r) = 2.5 (1 - e^{-2r}), C(r, z) = r + z^2 + 0.1.
#[allow(clippy::needless_range_loop)]
pub fn straight_line_fixed_point() -> [f64; 5] {
    let (lam, del, h, k) = (0.5, 0.2, 0.25, 0.1);
    let cdf = |x: f64| 1.0 - (-2.0 * x).exp();
    let g = |r: f64| 2.5 * (1.0 - (-2.0 * r).exp());
    let c = |r: f64, z: f64| r + z * z + k;
    let mut p = [cdf(h / 2.0), 0.0, 0.0, 0.0, 0.0];
    for i in 1..5 {
        p[i] = cdf((i as f64 + 0.5) * h) - cdf((i as f64 - 0.5) * h);
    }
    let mut v = [0.0f64; 5];
    for _ in 0..100_000 {
        let mut next = [0.0f64; 5];
        for j in 1..5 {
            let r = j as f64 * h;
            let acc: f64 = (0..=j).map(|i| v[j - i] * p[i]).sum();
            let wait = (g(r) + lam * acc) / (lam + del);
            let act = (0..=4 - j)
                .map(|i| v[j + i] - c(r, i as f64 * h))
                .fold(f64::NEG_INFINITY, f64::max);
            next[j] = wait.max(act);
        }
        let gap = (0..5).map(|j| (next[j] - v[j]).abs()).fold(0.0, f64::max);
        v = next;
        if gap < 1e-15 {
            break;
        }
    }
    v
}

pub fn toy_model() -> ModelSpec {
    ModelSpec::new(
        0.5,
        0.2,
        1.0,
        ShockDistribution::Exponential { rate: 2.0 },
        UtilitySpec::ExponentialAversion { scale: 5.0, alpha: 2.0 },
        CostSpec::Quadratic { fixed: 0.1 },
    )
    .unwrap()
}

// Output of `straight_line_fixed_point`, frozen.
pub const FROZEN: [f64; 5] = [
    0.0,
    5.681765546998349,
    5.744265546998349,
    5.684261334281851,
    6.594265546998349,
];
