//! Privacy labels from the latest GPS fix and the configured public-area
//! circle.

use std::fmt;

use crate::config::Config;

/// Mean Earth radius used by the haversine distance.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A fix older than this many GPS intervals counts as absent.
pub const STALENESS_FACTOR: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyCircle {
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    /// 0 switches geofencing off.
    pub radius_m: u32,
}

impl PrivacyCircle {
    pub fn from_config(config: &Config) -> Self {
        Self {
            center_lat_deg: config.privacy_lat_deg,
            center_lon_deg: config.privacy_lon_deg,
            radius_m: config.privacy_radius_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// Central-clock time the fix became known.
    pub time_ms: u64,
    /// False while there is no satellite lock.
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrivacyLabel {
    /// Inside the public area.
    Inside,
    /// Outside the public area (private).
    Private,
    /// No usable fix.
    Unknown,
}

impl PrivacyLabel {
    pub fn as_char(self) -> char {
        match self {
            PrivacyLabel::Inside => 'I',
            PrivacyLabel::Private => 'P',
            PrivacyLabel::Unknown => '?',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(PrivacyLabel::Inside),
            'P' => Some(PrivacyLabel::Private),
            '?' => Some(PrivacyLabel::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for PrivacyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Great-circle distance in meters (haversine).
pub fn haversine_m(lat1_deg: f64, lon1_deg: f64, lat2_deg: f64, lon2_deg: f64) -> f64 {
    let phi1 = lat1_deg.to_radians();
    let phi2 = lat2_deg.to_radians();
    let dphi = (lat2_deg - lat1_deg).to_radians();
    let dlambda = (lon2_deg - lon1_deg).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

pub fn distance_m(fix: &GpsFix, lat_deg: f64, lon_deg: f64) -> f64 {
    haversine_m(fix.lat_deg, fix.lon_deg, lat_deg, lon_deg)
}

/// Label a record. The boundary itself counts as inside.
pub fn label(fix: Option<&GpsFix>, circle: &PrivacyCircle) -> PrivacyLabel {
    if circle.radius_m == 0 {
        return PrivacyLabel::Inside;
    }
    match fix {
        Some(fix) if fix.valid => {
            if distance_m(fix, circle.center_lat_deg, circle.center_lon_deg)
                <= circle.radius_m as f64
            {
                PrivacyLabel::Inside
            } else {
                PrivacyLabel::Private
            }
        }
        _ => PrivacyLabel::Unknown,
    }
}

/// Drop a fix that is older than the staleness window.
pub fn fresh_fix(fix: Option<&GpsFix>, now_ms: u64, gps_interval_ms: u64) -> Option<&GpsFix> {
    fix.filter(|f| now_ms.saturating_sub(f.time_ms) <= STALENESS_FACTOR * gps_interval_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAT: f64 = 52.169311;
    const LON: f64 = 4.456711;

    fn fix(lat: f64, lon: f64) -> GpsFix {
        GpsFix {
            lat_deg: lat,
            lon_deg: lon,
            time_ms: 0,
            valid: true,
        }
    }

    fn circle(r: u32) -> PrivacyCircle {
        PrivacyCircle {
            center_lat_deg: LAT,
            center_lon_deg: LON,
            radius_m: r,
        }
    }

    #[test]
    fn coincident_points() {
        assert_eq!(distance_m(&fix(LAT, LON), LAT, LON), 0.0);
    }

    // Frozen from a spherical law-of-cosines calculator; the WGS-84
    // comparison lives in the integration tests.
    #[test]
    fn golden_pairs() {
        let north = distance_m(&fix(LAT, LON), LAT + 0.001, LON);
        assert!((north - 111.1949).abs() < 0.001, "{north}");
        let east = distance_m(&fix(LAT, LON), LAT, LON + 0.001);
        assert!((east - 68.1992).abs() < 0.001, "{east}");
    }

    #[test]
    fn labels() {
        assert_eq!(label(None, &circle(100)), PrivacyLabel::Unknown);
        assert_eq!(label(Some(&fix(LAT, LON)), &circle(100)), PrivacyLabel::Inside);
        assert_eq!(
            label(Some(&fix(LAT + 0.002, LON)), &circle(100)),
            PrivacyLabel::Private
        );
        let mut lost = fix(LAT, LON);
        lost.valid = false;
        assert_eq!(label(Some(&lost), &circle(100)), PrivacyLabel::Unknown);
    }

    #[test]
    fn radius_zero_is_inside_everywhere() {
        assert_eq!(label(None, &circle(0)), PrivacyLabel::Inside);
        assert_eq!(label(Some(&fix(0.0, 0.0)), &circle(0)), PrivacyLabel::Inside);
    }

    #[test]
    fn radius_straddles_distance() {
        let f = fix(LAT + 0.001, LON);
        let d = distance_m(&f, LAT, LON);
        let c = PrivacyCircle {
            center_lat_deg: LAT,
            center_lon_deg: LON,
            radius_m: 0,
        };
        // radii just above and just below the distance
        let r = d.ceil() as u32;
        assert_eq!(label(Some(&f), &PrivacyCircle { radius_m: r, ..c }), PrivacyLabel::Inside);
        assert_eq!(
            label(Some(&f), &PrivacyCircle { radius_m: r - 1, ..c }),
            PrivacyLabel::Private
        );
    }

    #[test]
    fn staleness_window() {
        let mut f = fix(LAT, LON);
        f.time_ms = 1000;
        assert!(fresh_fix(Some(&f), 4000, 1000).is_some());
        assert!(fresh_fix(Some(&f), 4001, 1000).is_none());
    }
}
