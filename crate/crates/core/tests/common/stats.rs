use impulse_maint::model::{CostSpec, ModelSpec, ShockDistribution, UtilitySpec};
use impulse_maint::simulator::{horizon, path_rng, sample_path, DoNothing};

pub const LAMBDA: f64 = 0.5;

/// Example utility and cost with point-mass shocks of `size`.
pub fn point_mass_model(size: f64) -> ModelSpec {
    ModelSpec::new(
        LAMBDA,
        0.2,
        1.0,
        ShockDistribution::Tabulated {
            atoms: vec![(size, 1.0)],
        },
        UtilitySpec::ExponentialAversion { scale: 5.0, alpha: 2.0 },
        CostSpec::Quadratic { fixed: 0.1 },
    )
    .unwrap()
}

/// Kolmogorov-Smirnov distance between a sample and `Exp(rate)`.
pub fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = -(-rate * x).exp_m1();
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the KS statistic, asymptotic form.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Inter-arrival gaps from uncontrolled paths that fail on their third
/// shock, so no gap is cut short by the horizon.
pub fn collect_gaps(target: usize, seed: u64) -> Vec<f64> {
    let model = point_mass_model(0.14);
    let t_max = horizon(&model, 1e-6);
    let mut gaps = Vec::with_capacity(target + 3);
    let mut k = 0;
    while gaps.len() < target {
        let path = sample_path(&model, &DoNothing, 0.3, &mut path_rng(seed, k), t_max).unwrap();
        assert!(path.failed);
        let mut last = 0.0;
        for e in &path.events {
            gaps.push(e.time - last);
            last = e.time;
        }
        k += 1;
    }
    gaps
}
