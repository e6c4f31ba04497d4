use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Euclidean,
    /// Every coordinate lives on `[0, 1)` with mod-1 wrap.
    Torus,
}

impl Geometry {
    /// Maps a coordinate back into the fundamental domain.
    #[inline]
    pub fn wrap<T: Real>(self, v: T) -> T {
        match self {
            Geometry::Euclidean => v,
            Geometry::Torus => wrap_unit(v),
        }
    }

    /// Signed shortest displacement `x - y` for one coordinate.
    #[inline]
    pub fn displacement<T: Real>(self, x: T, y: T) -> T {
        let d = x - y;
        match self {
            Geometry::Euclidean => d,
            Geometry::Torus => {
                let half = T::lit(0.5);
                let w = d - d.round();
                // round() ties away from zero; keep the result in [-1/2, 1/2)
                if w >= half {
                    w - T::one()
                } else {
                    w
                }
            }
        }
    }

    /// Euclidean norm of the per-coordinate shortest displacements.
    #[inline]
    pub fn distance<T: Real>(self, x: &[T], y: &[T]) -> T {
        let mut acc = T::zero();
        for (&a, &b) in x.iter().zip(y) {
            let d = self.displacement(a, b);
            acc = acc + d * d;
        }
        acc.sqrt()
    }
}

#[inline]
pub(crate) fn wrap_unit<T: Real>(v: T) -> T {
    let w = v - v.floor();
    if w >= T::one() {
        T::zero()
    } else {
        w
    }
}

/// A point of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint<T> {
    coords: Vec<T>,
    geometry: Geometry,
}

impl<T: Real> StatePoint<T> {
    pub fn new(coords: Vec<T>, geometry: Geometry) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("state dimension must be at least 1".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate {bad}")));
        }
        if geometry == Geometry::Torus {
            if let Some(bad) = coords.iter().find(|&&c| c < T::zero() || c >= T::one()) {
                return Err(Error::InvalidInput(format!(
                    "torus coordinate {bad} outside [0, 1)"
                )));
            }
        }
        Ok(Self { coords, geometry })
    }

    /// Builds a point, wrapping torus coordinates into `[0, 1)` first.
    pub fn wrapped(coords: Vec<T>, geometry: Geometry) -> Result<Self> {
        let coords = coords.into_iter().map(|c| geometry.wrap(c)).collect();
        Self::new(coords, geometry)
    }

    pub fn euclidean(coords: Vec<T>) -> Result<Self> {
        Self::new(coords, Geometry::Euclidean)
    }

    pub fn torus(coords: Vec<T>) -> Result<Self> {
        Self::wrapped(coords, Geometry::Torus)
    }

    pub(crate) fn from_raw(coords: Vec<T>, geometry: Geometry) -> Self {
        Self { coords, geometry }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn distance(&self, other: &Self) -> T {
        self.geometry.distance(&self.coords, &other.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_rejects_out_of_range() {
        assert!(StatePoint::new(vec![1.0_f64], Geometry::Torus).is_err());
        assert!(StatePoint::new(vec![-0.1_f64], Geometry::Torus).is_err());
        assert!(StatePoint::new(Vec::<f64>::new(), Geometry::Euclidean).is_err());
        let p = StatePoint::torus(vec![1.25_f64, -0.25]).unwrap();
        assert_eq!(p.coords(), &[0.25, 0.75]);
    }

    #[test]
    fn torus_distance_wraps() {
        let g = Geometry::Torus;
        assert!((g.distance(&[0.05_f64], &[0.95]) - 0.1).abs() < 1e-12);
        assert!((g.displacement(0.05_f64, 0.95) - 0.1).abs() < 1e-12);
        assert!((g.displacement(0.95_f64, 0.05) + 0.1).abs() < 1e-12);
        let d = g.distance(&[0.0_f64, 0.1], &[0.3, 0.5]);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wrap_never_returns_one() {
        let tiny = -1e-18_f64;
        let w = wrap_unit(tiny);
        assert!((0.0..1.0).contains(&w));
        let w32 = wrap_unit(-1e-9_f32);
        assert!((0.0..1.0).contains(&w32));
    }
}
