use optdesign::design::{hoel_levine_design, DesignRequest};
use optdesign::sim::{
    compare_designs, replication_rng, run_experiment, sample_noise, Noise, NoiseFamily,
    PolynomialModel, EULER_GAMMA,
};
use rand::Rng;
use rand_distr::{Distribution, Weibull};

const DRAWS: usize = 1_000_000;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn gumbel_min_density(z: f64) -> f64 {
    (z - z.exp()).exp()
}

fn logistic_density(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

fn draws(family: NoiseFamily, seed: u64) -> Vec<f64> {
    let noise = Noise::new(family, 1.0).unwrap();
    sample_noise(&noise, DRAWS, &mut replication_rng(seed, 0))
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let s = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (m, s)
}

fn ks_statistic(mut v: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn quadrature_oracles() {
    let mass = simpson(gumbel_min_density, -40.0, 4.0, 200_000);
    assert!((mass - 1.0).abs() < 1e-10);
    let mean = simpson(|z| z * gumbel_min_density(z), -40.0, 4.0, 200_000);
    assert!((mean + EULER_GAMMA).abs() < 1e-10, "{mean}");
    let second = simpson(|z| z * z * gumbel_min_density(z), -40.0, 4.0, 200_000);
    let var = second - mean * mean;
    assert!((var - NoiseFamily::GumbelWeibull.unit_variance()).abs() < 1e-9);
    let lvar = simpson(|z| z * z * logistic_density(z), -60.0, 60.0, 400_000);
    assert!(
        (lvar - NoiseFamily::Logistic.unit_variance()).abs() < 1e-9,
        "{lvar}"
    );
}

#[test]
fn gumbel_draws_are_centered() {
    let (m, v) = mean_var(&draws(NoiseFamily::GumbelWeibull, 11));
    assert!(m.abs() < 0.005, "{m}");
    let target = NoiseFamily::GumbelWeibull.unit_variance();
    assert!((v / target - 1.0).abs() < 0.02);
}

#[test]
fn logistic_variance() {
    let (m, v) = mean_var(&draws(NoiseFamily::Logistic, 12));
    assert!(m.abs() < 0.01);
    let target = std::f64::consts::PI.powi(2) / 3.0;
    assert!((v / target - 1.0).abs() < 0.02, "{v}");
}

#[test]
fn gaussian_moments() {
    let (m, v) = mean_var(&draws(NoiseFamily::Gaussian, 13));
    assert!(m.abs() < 0.005);
    assert!((v - 1.0).abs() < 0.01);
}

#[test]
fn gumbel_ks() {
    let z: Vec<f64> = draws(NoiseFamily::GumbelWeibull, 14)
        .iter()
        .map(|e| e - EULER_GAMMA)
        .collect();
    let d = ks_statistic(z, |z| 1.0 - (-z.exp()).exp());
    assert!(d < 1.63 / (DRAWS as f64).sqrt(), "{d}");
}

#[test]
fn weibull_log_transform_matches_gumbel_law() {
    // Z = ln(-ln(1 - F(T))) = k ln(T/λ) for T ~ Weibull(λ, k)
    let (lambda, k) = (2.5f64, 1.7f64);
    let w = Weibull::new(lambda, k).unwrap();
    let mut rng = replication_rng(15, 0);
    let z: Vec<f64> = (0..DRAWS)
        .map(|_| k * (w.sample(&mut rng) / lambda).ln())
        .collect();
    let d = ks_statistic(z, |z| 1.0 - (-z.exp()).exp());
    assert!(d < 1.63 / (DRAWS as f64).sqrt(), "{d}");
}

#[test]
fn logistic_ks() {
    let d = ks_statistic(draws(NoiseFamily::Logistic, 16), |z| {
        1.0 / (1.0 + (-z).exp())
    });
    assert!(d < 1.63 / (DRAWS as f64).sqrt(), "{d}");
}

#[test]
fn substreams_differ() {
    let mut a = replication_rng(1, 0);
    let mut b = replication_rng(1, 1);
    let mut c = replication_rng(1, 0);
    let x: u64 = a.random();
    assert_ne!(x, b.random::<u64>());
    assert_eq!(x, c.random::<u64>());
}

#[test]
fn unbiased_for_all_families() {
    let d = hoel_levine_design(&DesignRequest::unit(4, 52, Some(2.0)).unwrap()).unwrap();
    for family in [
        NoiseFamily::Gaussian,
        NoiseFamily::GumbelWeibull,
        NoiseFamily::Logistic,
    ] {
        let model =
            PolynomialModel::new(vec![1.0, -2.0, 0.5, 1.0], Noise::new(family, 0.7).unwrap());
        let r = run_experiment(&model, &d, 2.0, 20_000, None, 5).unwrap();
        let se = (r.theoretical_variance / 20_000.0).sqrt();
        assert!(
            (r.empirical_mean - model.eval(2.0)).abs() <= 4.0 * se,
            "{family:?}"
        );
        let tol = 5.0 / (20_000f64).sqrt();
        assert!(
            (r.variance_ratio - 1.0).abs() <= tol,
            "{family:?} {}",
            r.variance_ratio
        );
    }
}

#[test]
fn guest_worse_than_hoel_levine_at_three() {
    use optdesign::design::guest_design;
    let model = PolynomialModel::new(
        vec![0.0, 1.0, 1.0],
        Noise::new(NoiseFamily::Gaussian, 1.0).unwrap(),
    );
    let hl = hoel_levine_design(&DesignRequest::unit(3, 60, Some(3.0)).unwrap()).unwrap();
    let guest = guest_design(&DesignRequest::unit(3, 60, None).unwrap()).unwrap();
    let reports = compare_designs(&model, &[guest, hl], 3.0, 20_000, 3).unwrap();
    assert!(reports[0].theoretical_variance > reports[1].theoretical_variance);
    assert!(reports[0].empirical_variance > reports[1].empirical_variance);
}

#[test]
fn too_few_replications() {
    let d = hoel_levine_design(&DesignRequest::unit(4, 52, Some(2.0)).unwrap()).unwrap();
    let model = PolynomialModel::new(vec![0.0], Noise::new(NoiseFamily::Gaussian, 1.0).unwrap());
    assert!(run_experiment(&model, &d, 2.0, 99, None, 0).is_err());
}
