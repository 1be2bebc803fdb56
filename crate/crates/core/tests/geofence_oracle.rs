use daqwear::geofence::{distance_m, label, GpsFix, PrivacyCircle, PrivacyLabel};
use proptest::prelude::*;

const LAT: f64 = 52.169311;
const LON: f64 = 4.456711;

/// Vincenty inverse on the WGS-84 ellipsoid.
fn vincenty_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let a = 6_378_137.0;
    let f = 1.0 / 298.257_223_563;
    let b = (1.0 - f) * a;
    let u1 = ((1.0 - f) * lat1.to_radians().tan()).atan();
    let u2 = ((1.0 - f) * lat2.to_radians().tan()).atan();
    let l = (lon2 - lon1).to_radians();
    let (su1, cu1, su2, cu2) = (u1.sin(), u1.cos(), u2.sin(), u2.cos());
    let mut lambda = l;
    for _ in 0..200 {
        let (sl, cl) = (lambda.sin(), lambda.cos());
        let sin_sigma = ((cu2 * sl).powi(2) + (cu1 * su2 - su1 * cu2 * cl).powi(2)).sqrt();
        if sin_sigma == 0.0 {
            return 0.0;
        }
        let cos_sigma = su1 * su2 + cu1 * cu2 * cl;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cu1 * cu2 * sl / sin_sigma;
        let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
        let cos_2sm = if cos2_alpha == 0.0 {
            0.0
        } else {
            cos_sigma - 2.0 * su1 * su2 / cos2_alpha
        };
        let c = f / 16.0 * cos2_alpha * (4.0 + f * (4.0 - 3.0 * cos2_alpha));
        let prev = lambda;
        lambda = l + (1.0 - c) * f * sin_alpha
            * (sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)));
        if (lambda - prev).abs() < 1e-12 {
            let u_sq = cos2_alpha * (a * a - b * b) / (b * b);
            let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let d_sigma = big_b
                * sin_sigma
                * (cos_2sm
                    + big_b / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)
                            - big_b / 6.0
                                * cos_2sm
                                * (-3.0 + 4.0 * sin_sigma * sin_sigma)
                                * (-3.0 + 4.0 * cos_2sm * cos_2sm)));
            return b * big_a * (sigma - d_sigma);
        }
    }
    panic!("vincenty did not converge");
}

/// Spherical distance via the atan2 form of the great-circle formula,
/// coded separately from the library's haversine.
fn sphere_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let y = ((p2.cos() * dl.sin()).powi(2) + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2)).sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    6_371_000.0 * y.atan2(x)
}

fn fix(lat: f64, lon: f64) -> GpsFix {
    GpsFix {
        lat_deg: lat,
        lon_deg: lon,
        time_ms: 0,
        valid: true,
    }
}

#[test]
fn golden_pairs_against_ellipsoid() {
    for (lat2, lon2, approx) in [
        (LAT + 0.001, LON, 111.19),
        (LAT, LON + 0.001, 68.2),
        (LAT + 0.002, LON, 222.4),
    ] {
        let ours = distance_m(&fix(LAT, LON), lat2, lon2);
        let geo = vincenty_m(LAT, LON, lat2, lon2);
        assert!(((ours - geo) / geo).abs() < 0.005, "{ours} vs {geo}");
        assert!((ours - approx).abs() / approx < 0.001, "{ours} vs {approx}");
    }
}

#[test]
fn equator_meridian_error_is_known() {
    // meridional radius at the equator is ~6335 km, so a sphere of 6371 km
    // overestimates north-south distances there by ~0.57%
    let ours = distance_m(&fix(0.0, 0.0), 0.05, 0.0);
    let geo = vincenty_m(0.0, 0.0, 0.05, 0.0);
    let rel = (ours - geo) / geo;
    assert!((0.005..0.006).contains(&rel), "{rel}");
}

#[test]
fn fixed_points() {
    let c = PrivacyCircle {
        center_lat_deg: LAT,
        center_lon_deg: LON,
        radius_m: 100,
    };
    assert_eq!(label(None, &c), PrivacyLabel::Unknown);
    assert_eq!(label(Some(&fix(LAT, LON)), &c), PrivacyLabel::Inside);
    assert_eq!(label(Some(&fix(LAT + 0.002, LON)), &c), PrivacyLabel::Private);
}

fn radius() -> impl Strategy<Value = u32> {
    prop_oneof![1 => Just(0u32), 9 => 10u32..=1000]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn label_matches_oracle(
        dlat in -0.02f64..0.02,
        dlon in -0.02f64..0.02,
        clat in -60.0f64..60.0,
        clon in -170.0f64..170.0,
        r in radius(),
        valid in prop::bool::weighted(0.95),
    ) {
        let c = PrivacyCircle { center_lat_deg: clat, center_lon_deg: clon, radius_m: r };
        let f = GpsFix { valid, ..fix(clat + dlat, clon + dlon) };
        let d = sphere_m(clat, clon, f.lat_deg, f.lon_deg);
        prop_assume!((d - r as f64).abs() > 1e-6);
        let expected = if r == 0 {
            PrivacyLabel::Inside
        } else if !valid {
            PrivacyLabel::Unknown
        } else if d <= r as f64 {
            PrivacyLabel::Inside
        } else {
            PrivacyLabel::Private
        };
        prop_assert_eq!(label(Some(&f), &c), expected);
    }

    #[test]
    fn distance_is_symmetric_and_nonnegative(
        a in -80.0f64..80.0, b in -170.0f64..170.0, da in -0.1f64..0.1, db in -0.1f64..0.1,
    ) {
        let d1 = distance_m(&fix(a, b), a + da, b + db);
        let d2 = distance_m(&fix(a + da, b + db), a, b);
        prop_assert!(d1 >= 0.0);
        prop_assert!((d1 - d2).abs() <= 1e-9 * d1.max(1.0));
        // the sphere is within 0.5% of the ellipsoid at mid latitudes only
        if d1 < 10_000.0 && d1 > 1.0 && (20.0..=70.0).contains(&a.abs()) {
            let geo = vincenty_m(a, b, a + da, b + db);
            prop_assert!(((d1 - geo) / geo).abs() < 0.005);
        }
    }

    #[test]
    fn single_crossing_along_a_bearing(bearing in 0.0f64..std::f64::consts::TAU, r in 10u32..=1000) {
        let c = PrivacyCircle { center_lat_deg: LAT, center_lon_deg: LON, radius_m: r };
        let mut seen_private = false;
        for step in 0..200 {
            let m = step as f64 * 10.0;
            let lat = LAT + (m * bearing.cos() / 6_371_000.0).to_degrees();
            let lon = LON + (m * bearing.sin() / (6_371_000.0 * LAT.to_radians().cos())).to_degrees();
            match label(Some(&fix(lat, lon)), &c) {
                PrivacyLabel::Private => seen_private = true,
                PrivacyLabel::Inside => prop_assert!(!seen_private, "inside again after leaving"),
                PrivacyLabel::Unknown => unreachable!(),
            }
        }
        prop_assert!(seen_private);
    }
}
