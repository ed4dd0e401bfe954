//! Small end-to-end runs of the convergence pipeline.

use epd_wavelet::experiments::{
    diagram_pool, fit_rate, mean_errors, run_convergence, run_convergence_on, ExperimentConfig,
    RateModel,
};
use epd_wavelet::geometry::QuadraturePartition;
use epd_wavelet::samplers::Shape;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        shape: Shape::circle(),
        n: 40,
        noise_var: 0.01,
        m: 48,
        ns: vec![6, 12, 24, 48],
        replicates: 3,
        seed: 11,
        threads: 1,
        quadrature: QuadraturePartition::new(2, 6).unwrap(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn error_at_full_pool_is_below_error_at_small_samples() {
    let run = run_convergence(&small()).unwrap();
    let means = mean_errors(&run.records);
    assert!(means[&48] < means[&6], "{means:?}");
    assert!(run.records.iter().all(|r| r.error >= 0.0));
    assert!(run.reference.quantized_atoms > 0);
    assert_eq!(run.reference.lost_mass, 0.0);
    let fit = fit_rate(&run.records, RateModel::Power).unwrap();
    assert!(fit.b > 0.0 && fit.residual.is_finite());
}

#[test]
fn shared_pool_gives_the_same_records() {
    let config = small();
    let pool = diagram_pool(&config, config.m).unwrap();
    let a = run_convergence_on(&config, &pool).unwrap();
    let b = run_convergence(&config).unwrap();
    assert_eq!(a.records, b.records);
    assert!(run_convergence_on(&config, &pool[..10]).is_err());
}

#[test]
fn thread_count_does_not_change_records() {
    let config = small();
    let pool = diagram_pool(&config, config.m).unwrap();
    let one = run_convergence_on(&config, &pool).unwrap();
    let many = run_convergence_on(
        &ExperimentConfig {
            threads: 4,
            ..config
        },
        &pool,
    )
    .unwrap();
    assert_eq!(one.records, many.records);
}

#[test]
fn thresholding_removes_detail_coefficients() {
    let config = ExperimentConfig {
        ns: vec![24],
        taus: vec![0.0, 0.5, 50.0],
        ps: vec![2.0],
        ..small()
    };
    let run = run_convergence(&config).unwrap();
    for replicate in 0..config.replicates {
        let nnz: Vec<usize> = run
            .records
            .iter()
            .filter(|r| r.replicate == replicate)
            .map(|r| r.nnz_coeffs)
            .collect();
        assert!(nnz[0] > nnz[1] && nnz[1] >= nnz[2], "{nnz:?}");
        assert_eq!(nnz[2], 0);
    }
}
