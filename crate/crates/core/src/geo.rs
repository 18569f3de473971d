//! Great-circle helpers.

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A WGS84 position in degrees.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

impl Coord {
    pub fn new(lat: f64, lon: f64) -> Self {
        Coord { lat, lon }
    }

    /// Haversine distance in meters.
    pub fn distance_m(&self, other: &Coord) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }

    /// Moves the coordinate by a local east/north offset in meters.
    pub fn offset_m(&self, east: f64, north: f64) -> Coord {
        let dlat = north / EARTH_RADIUS_M;
        let dlon = east / (EARTH_RADIUS_M * self.lat.to_radians().cos());
        Coord {
            lat: self.lat + dlat.to_degrees(),
            lon: self.lon + dlon.to_degrees(),
        }
    }

    pub fn lerp(&self, other: &Coord, t: f64) -> Coord {
        Coord {
            lat: self.lat + (other.lat - self.lat) * t,
            lon: self.lon + (other.lon - self.lon) * t,
        }
    }
}

/// Inclusive latitude/longitude box.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, c: &Coord) -> bool {
        (self.min_lat..=self.max_lat).contains(&c.lat) && (self.min_lon..=self.max_lon).contains(&c.lon)
    }

    /// Smallest box around `coords`, grown by `margin_deg` on every side.
    pub fn around<'a>(coords: impl IntoIterator<Item = &'a Coord>, margin_deg: f64) -> Option<Self> {
        let mut it = coords.into_iter();
        let first = it.next()?;
        let mut b = BoundingBox {
            min_lat: first.lat,
            max_lat: first.lat,
            min_lon: first.lon,
            max_lon: first.lon,
        };
        for c in it {
            b.min_lat = b.min_lat.min(c.lat);
            b.max_lat = b.max_lat.max(c.lat);
            b.min_lon = b.min_lon.min(c.lon);
            b.max_lon = b.max_lon.max(c.lon);
        }
        b.min_lat -= margin_deg;
        b.max_lat += margin_deg;
        b.min_lon -= margin_deg;
        b.max_lon += margin_deg;
        Some(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_roundtrips_distance() {
        let base = Coord::new(-3.73, -38.52);
        let moved = base.offset_m(300.0, 400.0);
        assert!((base.distance_m(&moved) - 500.0).abs() < 0.5);
    }

    #[test]
    fn zero_distance() {
        let c = Coord::new(10.0, 20.0);
        assert_eq!(c.distance_m(&c), 0.0);
    }
}
