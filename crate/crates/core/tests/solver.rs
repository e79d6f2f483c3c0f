use std::sync::Arc;

use limtomo::experiments::{make_phantom, Phantom};
use limtomo::radon::radon;
use limtomo::solver::{mad_sigma, reconstruct, soft_threshold, threshold_schedule};
use limtomo::visibility::{extract_range, invisible_indices};
use limtomo::*;

fn tiny() -> (Arc<CurveletSystem>, RadonGeometry) {
    (Arc::new(CurveletSystem::build(32, 32, 2).unwrap()), RadonGeometry::degree_sweep(-40.0, 40.0, 8.0, 32, 32).unwrap())
}

// phantoms need 64 pixels; keep every other one
fn phantom32(kind: Phantom) -> Image {
    let f = make_phantom(&kind, 64).unwrap();
    Image::new(32, 32, (0..1024).map(|i| f.pixels[(i / 32) * 128 + (i % 32) * 2]).collect()).unwrap()
}

#[test]
fn operator_norm_matches_dense_power_iteration() {
    let (sys, geom) = tiny();
    let op = ForwardOperator::new(sys.clone(), geom, None).unwrap();
    let a = op.dense_matrix().unwrap();
    let n = sys.num_coefficients();
    let m = a.len() / n;
    // power iteration on A^T A with the explicit matrix
    let mut v = vec![1.0; n];
    let mut est = 0.0;
    for _ in 0..3000 {
        let av: Vec<f64> = (0..m).map(|r| a[r * n..(r + 1) * n].iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let mut w = vec![0.0; n];
        for r in 0..m {
            for (wc, x) in w.iter_mut().zip(&a[r * n..(r + 1) * n]) {
                *wc += x * av[r];
            }
        }
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        est = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
    }
    let got = op.operator_norm().unwrap();
    assert!((got - est).abs() <= 1e-3 * est, "{got} vs {est}");
}

#[test]
fn acsr_on_full_range_is_csr() {
    let (sys, _) = tiny();
    let geom = RadonGeometry::degree_sweep(0.0, 174.0, 6.0, 32, 32).unwrap();
    let y = radon(&phantom32(Phantom::SheppLogan), &geom).unwrap();
    let part = invisible_indices(&sys, &extract_range(&geom.angles).unwrap()).unwrap();
    assert_eq!(part.invisible_count(), 0);
    let cfg = SolverConfig { max_iter: 30, ..Default::default() };
    let a = reconstruct(&ForwardOperator::new(sys.clone(), geom.clone(), None).unwrap(), &y, &cfg).unwrap();
    let b = reconstruct(&ForwardOperator::new(sys, geom, Some(part)).unwrap(), &y, &cfg).unwrap();
    assert_eq!(a.coeffs, b.coeffs);
}

#[test]
fn objective_trace_decreases_with_fixed_weights() {
    let (sys, geom) = tiny();
    let op = ForwardOperator::new(sys.clone(), geom.clone(), None).unwrap();
    let y = radon(&phantom32(Phantom::Disk { radius: 0.5 }), &geom).unwrap();
    let cfg = SolverConfig { max_iter: 80, threshold_mode: ThresholdMode::uniform(&sys, 1e-3), ..Default::default() };
    let rec = reconstruct(&op, &y, &cfg).unwrap();
    assert!(rec.trace.windows(2).all(|t| t[1].objective <= t[0].objective * (1.0 + 1e-12)));
    assert!(rec.trace.last().unwrap().data_residual < 0.5 * y.norm());
}

#[test]
fn soft_threshold_and_mad() {
    let sys = CurveletSystem::build(32, 32, 2).unwrap();
    let mut c = CoeffSet::zeros(&sys);
    c.data.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 % 7.0 - 3.0);
    let tau = vec![1.5; c.len()];
    let s = soft_threshold(&c, &tau).unwrap();
    for (a, b) in c.data.iter().zip(&s.data) {
        let expect = if a.abs() > 1.5 { (a.abs() - 1.5).copysign(*a) } else { 0.0 };
        assert_eq!(*b, expect);
    }
    assert!(matches!(soft_threshold(&c, &tau[1..]), Err(Error::Dimension(_))));
    let sigma = mad_sigma(&c, sys.finest_scale()).unwrap();
    assert!((sigma - 1.4826 * 2.0).abs() < 0.2 * 1.4826 * 2.0);
    let sched = threshold_schedule(&sys, 1.0).unwrap();
    assert_eq!(sched.len(), c.len());
    assert_eq!(sched[0], 0.0);
}

#[test]
fn invalid_configurations_are_rejected() {
    let (sys, geom) = tiny();
    let op = ForwardOperator::new(sys.clone(), geom.clone(), None).unwrap();
    let y = geom.zero_sinogram();
    let bad_step = SolverConfig { step_fraction: 2.0, ..Default::default() };
    assert!(matches!(reconstruct(&op, &y, &bad_step), Err(Error::Config(_))));
    let bad_w = SolverConfig { threshold_mode: ThresholdMode::Fixed(Arc::new(vec![1.0; 3])), ..Default::default() };
    assert!(matches!(reconstruct(&op, &y, &bad_w), Err(Error::Dimension(_))));
    let other = RadonGeometry::degree_sweep(0.0, 10.0, 5.0, 32, 32).unwrap().zero_sinogram();
    assert!(matches!(reconstruct(&op, &other, &SolverConfig::default()), Err(Error::Dimension(_))));
}
