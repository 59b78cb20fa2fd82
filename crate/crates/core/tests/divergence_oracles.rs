mod common;

use rand::Rng;

use oriented_assign::divergence::alpha_interpolate;
use oriented_assign::{box_to_gaussian, gjsd, gwd, kld, Alpha, Point, RotatedBox};

use common::{quadrature_kld, random_gaussian, rng, similarity};

#[test]
fn kld_agrees_with_quadrature() {
    let mut r = rng(3);
    for _ in 0..20 {
        let a = random_gaussian(&mut r, 3.0, 0.5, 6.0);
        let b = random_gaussian(&mut r, 3.0, 0.5, 6.0);
        let exact = kld(&a, &b).unwrap();
        let numeric = quadrature_kld(&a, &b, 600);
        assert!((exact - numeric).abs() < 1e-3, "{exact} vs {numeric}");
    }
}

#[test]
fn divergences_survive_shared_similarity() {
    let mut r = rng(4);
    for _ in 0..200 {
        let p = random_gaussian(&mut r, 20.0, 1.0, 50.0);
        let g = random_gaussian(&mut r, 20.0, 1.0, 50.0);
        let s = r.random_range(0.1..10.0);
        let angle = r.random_range(-3.0..3.0);
        let t = Point::new(r.random_range(-100.0..100.0), r.random_range(-100.0..100.0));
        let (tp, tg) = (similarity(&p, s, angle, t), similarity(&g, s, angle, t));
        assert!((kld(&p, &g).unwrap() - kld(&tp, &tg).unwrap()).abs() < 1e-8);
        let a = Alpha::default();
        assert!((gjsd(&p, &g, a).unwrap() - gjsd(&tp, &tg, a).unwrap()).abs() < 1e-8);
        // Wasserstein distance is a length, so it scales with the map.
        assert!(
            (s * gwd(&p, &g).unwrap() - gwd(&tp, &tg).unwrap()).abs() < 1e-8 * s.max(1.0) * 100.0
        );
    }
}

#[test]
fn divergences_grow_with_separation() {
    let g = box_to_gaussian(&RotatedBox::new(0.0, 0.0, 12.0, 4.0, 0.3).unwrap()).unwrap();
    let mut last = [-1.0; 3];
    for step in 0..40 {
        let shifted = box_to_gaussian(
            &RotatedBox::new(step as f64, 0.5 * step as f64, 12.0, 4.0, 0.3).unwrap(),
        )
        .unwrap();
        let now = [
            kld(&shifted, &g).unwrap(),
            gwd(&shifted, &g).unwrap(),
            gjsd(&shifted, &g, Alpha::default()).unwrap(),
        ];
        for (n, l) in now.iter().zip(last) {
            assert!(*n > l, "{now:?} after {last:?}");
        }
        last = now;
    }
}

#[test]
fn far_apart_boxes_stay_finite() {
    // Zero IoU everywhere, yet the divergences still rank the pairs.
    let g = box_to_gaussian(&RotatedBox::new(0.0, 0.0, 2.0, 2.0, 0.0).unwrap()).unwrap();
    let near = box_to_gaussian(&RotatedBox::new(50.0, 0.0, 2.0, 2.0, 0.0).unwrap()).unwrap();
    let far = box_to_gaussian(&RotatedBox::new(5000.0, 0.0, 2.0, 2.0, 0.0).unwrap()).unwrap();
    for f in [
        |a, b| kld(a, b).unwrap(),
        |a, b| gwd(a, b).unwrap(),
        |a, b| gjsd(a, b, Alpha::default()).unwrap(),
    ] {
        let (dn, df) = (f(&near, &g), f(&far, &g));
        assert!(dn.is_finite() && df.is_finite());
        assert!(df > dn);
    }
}

#[test]
fn interpolation_reaches_its_endpoints() {
    let mut r = rng(5);
    for _ in 0..50 {
        let p = random_gaussian(&mut r, 10.0, 0.5, 20.0);
        let g = random_gaussian(&mut r, 10.0, 0.5, 20.0);
        for (alpha, target) in [(1e-10, p), (1.0 - 1e-10, g)] {
            let m = alpha_interpolate(&p, &g, Alpha::new(alpha).unwrap()).unwrap();
            assert!((m.mu - target.mu).abs().max() < 1e-6);
            assert!((m.sigma - target.sigma).abs().max() < 1e-6);
        }
    }
}
