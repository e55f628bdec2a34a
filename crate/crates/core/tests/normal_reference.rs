//! Normal distribution helpers against statrs.

#![allow(clippy::excessive_precision)]

use probe_core::stats::{inverse_normal, normal_cdf, normal_sf};
use statrs::distribution::{ContinuousCDF, Normal};

// statrs' erfc is accurate to about 2e-11 on this grid.
#[test]
fn cdf_and_survival_match_reference() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for i in -80..=80 {
        let z = f64::from(i) / 10.0;
        assert!((normal_cdf(z) - n.cdf(z)).abs() < 1e-10, "cdf at {z}");
        assert!((normal_sf(z) - n.sf(z)).abs() < 1e-10, "sf at {z}");
    }
}

/// 30-digit values of the standard normal cdf.
#[test]
fn cdf_matches_high_precision_values() {
    let cases = [
        (-2.0, 0.0227501319481792072002826371665),
        (-1.0, 0.158655253931457051414767454368),
        (0.5, 0.691462461274013103637704610608),
        (2.0, 0.977249868051820792799717362833),
        (0.8, 0.788144601416603327289357504837),
        (-3.0, 0.0013498980316300945266518147676),
        (3.5, 0.999767370920964474963650074113),
        (-5.0, 2.86651571879193911673752332875e-7),
    ];
    for (z, want) in cases {
        assert!(((normal_cdf(z) - want) / want).abs() < 4e-15, "cdf at {z}");
    }
}

#[test]
fn quantile_matches_reference() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for i in 1..1000 {
        let p = f64::from(i) / 1000.0;
        assert!(
            (inverse_normal(p) - n.inverse_cdf(p)).abs() < 1e-9,
            "quantile at {p}"
        );
    }
    assert!((inverse_normal(1e-10) - n.inverse_cdf(1e-10)).abs() < 1e-7);
}
