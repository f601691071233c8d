//! Helpers shared between integration test targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub struct OracleOutcome {
    pub cases: usize,
    pub max_rel_err: f64,
}

fn rel_err(ours: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        ours.abs()
    } else {
        (ours - reference).abs() / reference.abs()
    }
}

/// Compares `t_cdf` and `t_quantile` against an independently implemented
/// t distribution on randomized (x, p, df) cases. The quantile direction is
/// verified by pushing our quantile back through the reference CDF, which
/// keeps the check meaningful regardless of how the reference inverts.
pub fn run_t_distribution_oracle(cases: usize) -> OracleOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0eac1e);
    let mut max_rel_err: f64 = 0.0;
    for i in 0..cases {
        // Log-uniform df over [1, 1e3], with every tenth case pushed to 1e6
        // to cover the near-normal regime.
        let df = if i % 10 == 9 {
            1e6
        } else {
            10f64.powf(rng.random_range(0.0..3.0))
        };
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();

        let x = rng.random_range(-6.0..6.0);
        max_rel_err = max_rel_err.max(rel_err(
            continuum_sim::stats::t_cdf(x, df).unwrap(),
            reference.cdf(x),
        ));

        let p = rng.random_range(0.001..0.999);
        let q = continuum_sim::stats::t_quantile(p, df).unwrap();
        max_rel_err = max_rel_err.max(rel_err(reference.cdf(q), p));
    }
    OracleOutcome { cases, max_rel_err }
}

/// Compares `welch_t_test` against reference arithmetic plus the reference
/// t distribution on randomized sample pairs.
pub fn run_welch_oracle(cases: usize) -> OracleOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e1c4);
    let mut max_rel_err: f64 = 0.0;
    for _ in 0..cases {
        let na = rng.random_range(3..=30);
        let nb = rng.random_range(3..=30);
        let shift = rng.random_range(-2.0..2.0);
        let scale_b = rng.random_range(0.2..5.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..nb)
            .map(|_| shift + scale_b * rng.random_range(0.0..10.0))
            .collect();

        let ours = continuum_sim::stats::welch_t_test(&a, &b).unwrap();

        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let var = |s: &[f64], m: f64| {
            s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64
        };
        let (ma, mb) = (mean(&a), mean(&b));
        let (va, vb) = (var(&a, ma), var(&b, mb));
        let (fa, fb) = (na as f64, nb as f64);
        let se2 = va / fa + vb / fb;
        let t_ref = (ma - mb) / se2.sqrt();
        let df_ref =
            se2 * se2 / ((va / fa).powi(2) / (fa - 1.0) + (vb / fb).powi(2) / (fb - 1.0));
        let p_ref = 2.0 * StudentsT::new(0.0, 1.0, df_ref).unwrap().cdf(-t_ref.abs());

        max_rel_err = max_rel_err.max(rel_err(ours.t_statistic, t_ref));
        max_rel_err = max_rel_err.max(rel_err(ours.degrees_of_freedom, df_ref));
        max_rel_err = max_rel_err.max(rel_err(ours.p_value, p_ref));
    }
    OracleOutcome { cases, max_rel_err }
}
