use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resrate::models::{analytic_gradient, fit_logistic, logistic_mse, predict_logistic, MagnitudeSummary};
use resrate::{CoeffBlock, GdConfig, LogisticParams};

fn blocks(n: usize, seed: u64) -> Vec<CoeffBlock> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (w, h) = [(4, 4), (8, 8), (16, 8), (4, 16)][rng.random_range(0..4)];
            let c = (0..w * h)
                .map(|_| if rng.random_bool(0.65) { 0 } else { rng.random_range(-9..=9) })
                .collect();
            CoeffBlock::new(w, h, c, 27, "").unwrap()
        })
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng) -> LogisticParams {
    LogisticParams {
        alpha: rng.random_range(-1.0..2.0),
        beta: rng.random_range(-3.0..3.0),
        gamma: rng.random_range(-1.5..1.5),
        delta: rng.random_range(-2.0..2.0),
        epsilon: rng.random_range(-5.0..5.0),
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for draw in 0..20 {
        let data = blocks(30, 1000 + draw);
        let rates: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..200.0)).collect();
        let p = random_params(&mut rng);
        let analytic = analytic_gradient(&p, &data, &rates).unwrap();
        let summaries: Vec<_> = data.iter().map(MagnitudeSummary::new).collect();
        let h = 1e-5;
        for j in 0..5 {
            let mut up = p.to_array();
            let mut dn = p.to_array();
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic_mse(&LogisticParams::from_array(up), &summaries, &rates)
                - logistic_mse(&LogisticParams::from_array(dn), &summaries, &rates))
                / (2.0 * h);
            let rel = (analytic[j] - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-4, "draw {draw} coord {j}: {} vs {fd}", analytic[j]);
        }
    }
}

#[test]
fn fits_data_without_logistic_term() {
    let data = blocks(120, 5);
    let truth = LogisticParams {
        alpha: 1.3,
        beta: 0.0,
        gamma: 0.7,
        delta: -0.2,
        epsilon: 6.0,
    };
    let rates: Vec<f64> = data.iter().map(|b| predict_logistic(&truth, b)).collect();
    let (_, rep) = fit_logistic(&data, &rates, &GdConfig::default()).unwrap();
    assert!(rep.final_mse <= 1e-6, "{rep:?}");
}
