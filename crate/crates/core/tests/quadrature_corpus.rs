use curvelab::curve::{model_class_check, Curve, Perturbation, Shape};
use curvelab::cutoff::SmoothCutoff;
use curvelab::oscillatory::{eval_mu_hat, eval_mu_hat_reference};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 500;
const TOL: f64 = 1e-9;

fn random_member(rng: &mut ChaCha8Rng) -> Curve {
    loop {
        let terms: Vec<Perturbation> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let comp = rng.gen_range(0..4);
                let amp = rng.gen_range(-0.004..0.004);
                let shape = if rng.gen_bool(0.7) {
                    Shape::Sine { omega: rng.gen_range(0.3..1.0), phase: rng.gen_range(0.0..std::f64::consts::TAU) }
                } else {
                    Shape::Monomial { power: rng.gen_range(5..=7) }
                };
                Perturbation::new(comp, amp, shape)
            })
            .collect();
        let g = Curve::perturbed_moment(4, terms).unwrap();
        if model_class_check(&g, 0.01, 201).unwrap().member {
            return g;
        }
    }
}

#[test]
fn adaptive_quadrature_matches_reference_on_random_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let chi = SmoothCutoff::bump(0.5);
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let g = random_member(&mut rng);
        let dir: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-6);
        let r = 2f64.powf(rng.gen_range(0.0..16.0));
        let xi: Vec<f64> = dir.iter().map(|v| v / norm * r).collect();
        let fast = eval_mu_hat(&g, &chi, &xi, TOL).unwrap();
        let slow = eval_mu_hat_reference(&g, &chi, &xi).unwrap();
        let diff = (fast.value - slow.value).norm();
        assert!(diff <= TOL + slow.error, "case {case}: |ξ| = {r:.1}, diff {diff:.2e}, reference error {:.2e}", slow.error);
        worst = worst.max(diff);
    }
    println!("worst disagreement over {CASES} cases: {worst:.2e}");
}
