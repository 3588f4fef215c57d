use genco_core::regression::{FeatureSpec, PosteriorSummary};
use genco_core::scenarios::{generate, SamplingMode};

fn posterior() -> PosteriorSummary {
    let spec = FeatureSpec::new(4);
    let k = spec.len() + 1;
    let mut mean = vec![0.0; k];
    let mut sd = vec![0.0; k];
    for i in 0..4 {
        mean[2 + i] = 0.05 * (i + 1) as f64;
        sd[2 + i] = 0.01 * (i + 1) as f64;
    }
    PosteriorSummary {
        names: spec.names,
        mean: mean.clone(),
        sd: sd.clone(),
        std_mean: mean,
        std_sd: sd,
        noise_sd: 1.0,
        draws: 1000,
        burn_in: 0,
        draw_matrix: None,
    }
}

#[test]
fn sample_moments_converge() {
    let p = posterior();
    let omega = 100_000;
    let s = generate(&p, 4, 1, omega, 5, SamplingMode::PerDay).unwrap();
    for i in 0..4 {
        let (m, sd) = (p.mean[2 + i], p.sd[2 + i]);
        let xs: Vec<f64> = (0..omega).map(|w| s.beta(w, 0, i)).collect();
        let mean = xs.iter().sum::<f64>() / omega as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (omega - 1) as f64;
        let se = sd / (omega as f64).sqrt();
        assert!((mean - m).abs() <= 4.0 * se, "block {i}: mean {mean} vs {m}");
        // The sample sd of a normal has standard error sd / sqrt(2 (n - 1)).
        let sd_se = sd / (2.0 * (omega - 1) as f64).sqrt();
        assert!((var.sqrt() - sd).abs() <= 4.0 * sd_se, "block {i}: sd {} vs {sd}", var.sqrt());
    }
    assert!(s.probabilities.iter().all(|&p| p == 1.0 / omega as f64));
    assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}
