use crate::error::{Error, Result};

/// Isovelocity shallow-water waveguide with a receiver mounted above the
/// sea floor. Depths are measured downward from the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub water_depth: f64,
    pub sound_speed: f64,
    pub receiver_height_above_bottom: f64,
    /// Pressure-release surface is -1.
    pub surface_reflection_coeff: f64,
    pub bottom_reflection_coeff: f64,
}

impl Default for Environment {
    /// 30 m of water, hydrophone 1 m above the bottom, c = 1500 m/s. With a
    /// source 1 m deep the largest surface-minus-direct TDOA is 1.333 ms,
    /// just inside the 1.4 ms upper lifter bound.
    fn default() -> Self {
        Self {
            water_depth: 30.0,
            sound_speed: 1500.0,
            receiver_height_above_bottom: 1.0,
            surface_reflection_coeff: -1.0,
            bottom_reflection_coeff: 0.5,
        }
    }
}

impl Environment {
    pub fn receiver_depth(&self) -> f64 {
        self.water_depth - self.receiver_height_above_bottom
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.water_depth > 0.0) {
            return bad(format!("water_depth {} must be > 0", self.water_depth));
        }
        if !(self.sound_speed > 0.0) {
            return bad(format!("sound_speed {} must be > 0", self.sound_speed));
        }
        if !(self.receiver_height_above_bottom > 0.0
            && self.receiver_height_above_bottom < self.water_depth)
        {
            return bad(format!(
                "receiver_height_above_bottom {} must lie in (0, water_depth)",
                self.receiver_height_above_bottom
            ));
        }
        for (name, r) in [
            ("surface", self.surface_reflection_coeff),
            ("bottom", self.bottom_reflection_coeff),
        ] {
            if !(r.abs() <= 1.0) {
                return bad(format!("{name} reflection coefficient {r} must satisfy |r| <= 1"));
            }
        }
        Ok(())
    }
}

/// One propagation path from the source to the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Travel time in seconds.
    pub delay: f64,
    /// Product of reflection coefficients over path length (spherical spreading).
    pub amplitude: f64,
    pub surface_bounces: u32,
    pub bottom_bounces: u32,
}

/// Enumerates image sources with at most `max_order` boundary reflections.
///
/// Reflections alternate between the surface (z -> -z) and the bottom
/// (z -> 2D - z), so each order k >= 1 contributes exactly two images: one
/// whose first bounce is at the surface and one whose first bounce is at the
/// bottom. The total count is `2 * max_order + 1`. Arrivals are sorted by
/// delay; the sort is stable so coincident paths keep enumeration order.
pub fn path_arrivals(
    horizontal_range: f64,
    source_depth: f64,
    env: &Environment,
    max_order: u32,
) -> Result<Vec<Arrival>> {
    if !(horizontal_range >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizontal range {horizontal_range} must be >= 0"
        )));
    }
    if !(source_depth > 0.0 && source_depth < env.water_depth) {
        return Err(Error::InvalidArgument(format!(
            "source depth {source_depth} must lie in (0, {})",
            env.water_depth
        )));
    }
    let zr = env.receiver_depth();
    let make = |image_depth: f64, ns: u32, nb: u32| {
        let length = horizontal_range.hypot(image_depth - zr);
        Arrival {
            delay: length / env.sound_speed,
            amplitude: env.surface_reflection_coeff.powi(ns as i32)
                * env.bottom_reflection_coeff.powi(nb as i32)
                / length,
            surface_bounces: ns,
            bottom_bounces: nb,
        }
    };

    let mut arrivals = Vec::with_capacity(2 * max_order as usize + 1);
    arrivals.push(make(source_depth, 0, 0));
    for surface_first in [true, false] {
        let (mut z, mut ns, mut nb) = (source_depth, 0u32, 0u32);
        let mut at_surface = surface_first;
        for _ in 0..max_order {
            if at_surface {
                z = -z;
                ns += 1;
            } else {
                z = 2.0 * env.water_depth - z;
                nb += 1;
            }
            at_surface = !at_surface;
            arrivals.push(make(z, ns, nb));
        }
    }
    arrivals.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(arrivals)
}

/// Surface-reflected minus direct path length for a two-path geometry.
pub fn two_path_difference(horizontal_range: f64, source_depth: f64, receiver_depth: f64) -> f64 {
    horizontal_range.hypot(receiver_depth + source_depth)
        - horizontal_range.hypot(receiver_depth - source_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env() -> Environment {
        Environment::default()
    }

    #[test]
    fn direct_only_at_order_zero() {
        let a = path_arrivals(40.0, 1.0, &env(), 0).unwrap();
        assert_eq!(a.len(), 1);
        assert_abs_diff_eq!(a[0].delay, (40.0f64.powi(2) + 28.0f64.powi(2)).sqrt() / 1500.0, epsilon = 1e-15);
    }

    #[test]
    fn hand_computed_delays_at_zero_range() {
        let a = path_arrivals(0.0, 1.0, &env(), 1).unwrap();
        assert_abs_diff_eq!(a[0].delay, 28.0 / 1500.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[0].delay * 1e3, 18.667, epsilon = 1e-3);
        let surface = a.iter().find(|x| x.surface_bounces == 1).unwrap();
        assert_abs_diff_eq!(surface.delay, 0.020, epsilon = 1e-15);
        assert_abs_diff_eq!((surface.delay - a[0].delay) * 1e3, 1.3333, epsilon = 1e-4);
    }

    #[test]
    fn tdoa_at_100m() {
        let a = path_arrivals(100.0, 1.0, &env(), 1).unwrap();
        let surface = a.iter().find(|x| x.surface_bounces == 1).unwrap();
        let expected = (10900f64.sqrt() - 10784f64.sqrt()) / 1500.0;
        assert_abs_diff_eq!(surface.delay - a[0].delay, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected * 1e3, 0.3714, epsilon = 1e-4);
    }

    #[test]
    fn image_counts() {
        for k in 0..=2 {
            assert_eq!(path_arrivals(10.0, 1.0, &env(), k).unwrap().len(), 2 * k as usize + 1);
        }
    }

    #[test]
    fn direct_first_and_strongest() {
        for r in [0.0, 3.0, 50.0, 333.0, 1000.0] {
            for z in [0.5, 1.0, 10.0, 25.0] {
                let a = path_arrivals(r, z, &env(), 4).unwrap();
                assert_eq!((a[0].surface_bounces, a[0].bottom_bounces), (0, 0));
                for w in a.windows(2) {
                    assert!(w[0].delay <= w[1].delay);
                }
                for x in &a[1..] {
                    assert!(x.amplitude.abs() <= a[0].amplitude.abs());
                }
            }
        }
    }

    #[test]
    fn tdoa_decreases_with_range() {
        let tdoa = |r: f64| {
            let a = path_arrivals(r, 1.0, &env(), 1).unwrap();
            a.iter().find(|x| x.surface_bounces == 1).unwrap().delay - a[0].delay
        };
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 10.0).collect();
        for w in grid.windows(2) {
            assert!(tdoa(w[1]) < tdoa(w[0]));
        }
        assert!(tdoa(500.0) < tdoa(100.0) && tdoa(100.0) < tdoa(0.0));
    }

    #[test]
    fn rejects_invalid_geometry() {
        assert!(path_arrivals(-1.0, 1.0, &env(), 1).is_err());
        assert!(path_arrivals(1.0, 31.0, &env(), 1).is_err());
        let mut e = env();
        e.receiver_height_above_bottom = 30.0;
        assert!(e.validate().is_err());
        e = env();
        e.bottom_reflection_coeff = 1.5;
        assert!(e.validate().is_err());
        assert!(env().validate().is_ok());
    }
}
