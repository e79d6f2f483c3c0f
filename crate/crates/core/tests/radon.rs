use limtomo::experiments::{make_phantom, Phantom};
use limtomo::radon::{backprojection, fbp, radon, ramp_filter};
use limtomo::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (num / b.iter().map(|y| y * y).sum::<f64>()).sqrt()
}

#[test]
fn backprojection_is_the_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let geom = RadonGeometry::degree_sweep(-20.0, 47.0, 3.0, 48, 48).unwrap();
    // keep the random image inside the inscribed disk
    let mut f = Image::zeros(48, 48);
    for r in 0..48 {
        for c in 0..48 {
            if f.x_at(c).hypot(f.y_at(r)) < 0.99 {
                f.pixels[r * 48 + c] = rng.random_range(-1.0..1.0);
            }
        }
    }
    let mut g = geom.zero_sinogram();
    g.samples.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    let lhs = radon(&f, &geom).unwrap().dot(&g);
    let rhs = f.dot(&backprojection(&g, 48, 48, 1.0).unwrap());
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
}

#[test]
fn every_projection_carries_the_image_mass() {
    let f = make_phantom(&Phantom::SheppLogan, 128).unwrap();
    let geom = RadonGeometry::degree_sweep(0.0, 170.0, 17.0, 128, 128).unwrap();
    let g = radon(&f, &geom).unwrap();
    let mass: f64 = f.pixels.iter().sum::<f64>() * f.spacing().powi(2);
    for m in 0..geom.angles.len() {
        let line: f64 = g.row(m).iter().sum::<f64>() * geom.offset_spacing;
        assert!((line - mass).abs() <= 1e-12 * mass, "angle {m}: {line} vs {mass}");
    }
}

#[test]
fn disk_projection_matches_chord_length() {
    let r0 = 0.5;
    let f = make_phantom(&Phantom::Disk { radius: r0 }, 256).unwrap();
    let geom = RadonGeometry::from_degrees(&[0.0, 33.0, 90.0], 256, 256).unwrap();
    let g = radon(&f, &geom).unwrap();
    for m in 0..3 {
        for (s, v) in g.offsets.iter().zip(g.row(m)) {
            // skip the rim, where the pixelized edge dominates
            if (s.abs() - r0).abs() > 0.05 {
                let chord = 2.0 * (r0 * r0 - s * s).max(0.0).sqrt();
                assert!((v - chord).abs() < 2e-2, "s={s}: {v} vs {chord}");
            }
        }
    }
}

#[test]
fn fbp_recovers_shepp_logan_from_full_data() {
    let f = make_phantom(&Phantom::SheppLogan, 256).unwrap();
    let geom = RadonGeometry::degree_sweep(0.0, 179.0, 1.0, 256, 256).unwrap();
    let rec = fbp(&radon(&f, &geom).unwrap(), 256, 256, 1.0, &FbpFilter::default()).unwrap();
    let err = rel_l2(&rec.pixels, &f.pixels);
    assert!(err <= 0.21, "relative L2 {err}");
}

#[test]
fn apodized_filters_damp_the_ramp() {
    let f = make_phantom(&Phantom::SheppLogan, 64).unwrap();
    let g = radon(&f, &RadonGeometry::degree_sweep(0.0, 90.0, 30.0, 64, 64).unwrap()).unwrap();
    let energy = |kind: &str, cut: f64| ramp_filter(&g, &FbpFilter::new(kind.parse().unwrap(), cut).unwrap()).unwrap().norm();
    let (ramlak, shepp, hann) = (energy("ram-lak", 1.0), energy("shepp-logan", 1.0), energy("hann", 1.0));
    assert!(hann < shepp && shepp < ramlak);
    assert!(energy("ram-lak", 0.5) < ramlak);
}

#[test]
fn bad_geometry_is_rejected() {
    assert!(matches!(RadonGeometry::from_degrees(&[10.0, 5.0], 32, 32), Err(Error::Geometry(_))));
    assert!(matches!(RadonGeometry::from_degrees(&[0.0, 180.0], 32, 32), Err(Error::Geometry(_))));
    assert!(matches!(RadonGeometry::new(vec![0.0], 10, 0.0), Err(Error::Geometry(_))));
    // a detector too short for the image corners
    let f = Image::new(32, 32, vec![1.0; 1024]).unwrap();
    let short = RadonGeometry::new(vec![0.0], 20, 0.1).unwrap();
    assert!(matches!(radon(&f, &short), Err(Error::Geometry(_))));
    assert!(FbpFilter::new(FilterKind::RamLak, 0.0).is_err());
}
