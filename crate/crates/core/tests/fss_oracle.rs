//! Synthetic collapse data with planted parameters as the oracle for the
//! three scaling objectives.

mod common;

use common::{planted, NU, P_C};
use mipt_core::fss::{fit_scaling, scale_points, unscale_point, DataPoint, FitOptions, Method};

fn fit(method: Method, pts: &[DataPoint<f64>]) -> mipt_core::ScalingFitResult {
    let mut opts = FitOptions::new(method, 0.45, 1.1);
    opts.scan = Some((0.42, 0.58, 0.5, 1.4, 17));
    fit_scaling(pts, &opts).unwrap()
}

#[test]
fn all_methods_recover_planted_parameters() {
    let pts = planted(11, 0.004);
    let mut fits = Vec::new();
    for m in Method::ALL {
        let r = fit(m, &pts);
        println!(
            "{:>10}: p_c = {:.4} +- {:.4}, nu = {:.4} +- {:.4}, eps = {:.3e}",
            m.name(),
            r.p_c,
            r.p_c_width.half_width,
            r.nu,
            r.nu_width.half_width,
            r.epsilon
        );
        assert!((r.p_c - P_C).abs() / P_C < 0.05, "{m:?} p_c {}", r.p_c);
        assert!((r.nu - NU).abs() / NU < 0.05, "{m:?} nu {}", r.nu);
        assert!(r.p_c_width.half_width > 0.0 && r.nu_width.half_width > 0.0);
        assert!(!r.p_c_width.unbounded && !r.nu_width.unbounded);
        fits.push(r);
    }
    for a in &fits {
        for b in &fits {
            let pc_tol = a.p_c_width.half_width + b.p_c_width.half_width;
            let nu_tol = a.nu_width.half_width + b.nu_width.half_width;
            assert!((a.p_c - b.p_c).abs() <= pc_tol, "{:?} vs {:?}", a.method, b.method);
            assert!((a.nu - b.nu).abs() <= nu_tol, "{:?} vs {:?}", a.method, b.method);
        }
    }
}

#[test]
fn restarts_agree_within_widths() {
    let pts = planted(5, 0.004);
    for m in Method::ALL {
        let base = fit(m, &pts);
        for (p0, nu0) in [(0.47, 0.8), (0.53, 0.95)] {
            let opts = FitOptions::new(m, p0, nu0);
            let r = fit_scaling(&pts, &opts).unwrap();
            assert!((r.p_c - base.p_c).abs() <= 2.0 * base.p_c_width.half_width, "{m:?} {r:?}");
            assert!((r.nu - base.nu).abs() <= 2.0 * base.nu_width.half_width, "{m:?} {r:?}");
        }
    }
}

#[test]
fn objectives_ignore_point_order() {
    let pts = planted(3, 0.004);
    let mut rev = pts.clone();
    rev.reverse();
    for m in Method::ALL {
        let a = mipt_core::fss::objective(m, &pts, 0.49, 0.9, 0.0).unwrap();
        let b = mipt_core::fss::objective(m, &rev, 0.49, 0.9, 0.0).unwrap();
        assert_eq!(a, b, "{m:?}");
    }
}

#[test]
fn scale_roundtrip() {
    let pts = planted(1, 0.004);
    let s = scale_points(&pts, 0.47, 0.77, 0.3).unwrap();
    for q in &s {
        let (p, d) = unscale_point(q, 0.47, 0.77, 0.3);
        let orig = pts
            .iter()
            .find(|o| o.l == q.l && (o.p - p).abs() < 1e-9)
            .expect("matching point");
        assert!((orig.p - p).abs() <= 1e-12 * orig.p.abs().max(1.0));
        assert!((orig.delta - d).abs() <= 1e-12 * orig.delta.abs().max(1.0));
    }
}
