//! Line-of-sight channel models for the pinching-antenna waveguide and for the
//! co-located MIMO baseline.
//!
//! Every element of the waveguide couples the device signal with free-space
//! attenuation `1/D` and accumulates phase over both the free-space hop and
//! the in-waveguide run from the feed point at `x = 0`:
//!
//! ```text
//! h_k(l) = xi * alpha_k * sum_n exp(-j psi (D_k(l_n) + i_ref * l_n)) / D_k(l_n)
//! D_k(l)^2 = (l - x_k)^2 + y_k^2 + a^2
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default effective refractive index of the dielectric waveguide.
pub const DEFAULT_REFRACTIVE_INDEX: f64 = 1.4;

/// Physical constants and per-round budgets shared by every device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub carrier_frequency: f64,
    pub wavelength: f64,
    pub wavenumber: f64,
    pub aperture_coeff: f64,
    pub refractive_index: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Per-device transmit power cap in watts.
    pub power_cap: f64,
    pub bandwidth: f64,
    /// Resolution of one model entry in bits.
    pub resolution_bits: f64,
    /// Minimum spacing between neighbouring pinching elements in meters.
    pub min_spacing: f64,
}

impl SystemParams {
    /// Builds the parameter set from the carrier frequency; wavelength,
    /// wavenumber and aperture coefficient are derived.
    ///
    /// `min_spacing = None` selects half a wavelength.
    pub fn new(
        carrier_frequency: f64,
        refractive_index: f64,
        noise_power: f64,
        power_cap: f64,
        bandwidth: f64,
        resolution_bits: f64,
        min_spacing: Option<f64>,
    ) -> Result<Self> {
        let positive = [
            ("carrier_frequency", carrier_frequency),
            ("noise_power", noise_power),
            ("power_cap", power_cap),
            ("bandwidth", bandwidth),
            ("resolution_bits", resolution_bits),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !(refractive_index.is_finite() && refractive_index >= 0.0) {
            return Err(Error::invalid("refractive_index", format!("must be non-negative, got {refractive_index}")));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        let min_spacing = min_spacing.unwrap_or(wavelength / 2.0);
        // Tiny slack so that `lambda / 2` computed elsewhere is accepted.
        if !(min_spacing.is_finite() && min_spacing >= wavelength / 2.0 * (1.0 - 1e-12)) {
            return Err(Error::invalid(
                "min_spacing",
                format!("must be at least half a wavelength ({}), got {min_spacing}", wavelength / 2.0),
            ));
        }
        Ok(SystemParams {
            carrier_frequency,
            wavelength,
            wavenumber: 2.0 * PI / wavelength,
            aperture_coeff: wavelength / (4.0 * PI),
            refractive_index,
            noise_power,
            power_cap,
            bandwidth,
            resolution_bits,
            min_spacing,
        })
    }

    /// 5 GHz carrier, -90 dBm noise, 0 dBm power cap, 1 MHz, 32 bits.
    pub fn reference() -> Self {
        SystemParams::new(5e9, DEFAULT_REFRACTIVE_INDEX, 1e-12, 1e-3, 1e6, 32.0, None)
            .expect("reference parameters are valid")
    }
}

/// A single-antenna edge device in the `z = 0` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub x: f64,
    pub y: f64,
    pub shadowing: f64,
    pub dataset_size: usize,
    pub weight: f64,
}

impl Device {
    pub fn at(x: f64, y: f64) -> Self {
        Device {
            x,
            y,
            shadowing: 1.0,
            dataset_size: 1,
            weight: 1.0,
        }
    }

    pub fn with_shadowing(mut self, shadowing: f64) -> Self {
        self.shadowing = shadowing;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// Distance from waveguide coordinate `ell` at altitude `altitude`.
    #[inline]
    pub fn distance_to_waveguide(&self, ell: f64, altitude: f64) -> f64 {
        let dx = ell - self.x;
        (dx * dx + self.y * self.y + altitude * altitude).sqrt()
    }
}

/// Single waveguide along the x-axis at `y = 0`, fed at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveguide {
    pub length: f64,
    pub altitude: f64,
    pub positions: Vec<f64>,
}

impl Waveguide {
    pub fn new(length: f64, altitude: f64, positions: Vec<f64>) -> Self {
        Waveguide {
            length,
            altitude,
            positions,
        }
    }

    /// `count` elements spread evenly over the waveguide, at least
    /// `min_spacing` apart and centred when even spreading is too tight.
    pub fn uniform(length: f64, altitude: f64, count: usize, min_spacing: f64) -> Result<Self> {
        check_fits(count, length, min_spacing)?;
        let even = length / (count as f64 + 1.0);
        let positions = if even >= min_spacing {
            (1..=count).map(|n| n as f64 * even).collect()
        } else {
            let span = (count.saturating_sub(1)) as f64 * min_spacing;
            let start = (length - span) / 2.0;
            (0..count).map(|n| start + n as f64 * min_spacing).collect()
        };
        Ok(Waveguide::new(length, altitude, positions))
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    /// Checks `0 <= l_n <= L` and `l_{n+1} - l_n >= min_spacing`.
    pub fn is_feasible(&self, min_spacing: f64) -> bool {
        let tol = 1e-12 * self.length.max(1.0);
        self.positions
            .iter()
            .all(|&p| p >= -tol && p <= self.length + tol)
            && self
                .positions
                .windows(2)
                .all(|w| w[1] - w[0] >= min_spacing - tol)
    }
}

pub(crate) fn check_fits(count: usize, length: f64, min_spacing: f64) -> Result<()> {
    if count as f64 * min_spacing > length {
        return Err(Error::WaveguideTooShort {
            n: count,
            spacing: min_spacing,
            length,
        });
    }
    Ok(())
}

/// Uniform linear array along the x-axis, used by the MIMO baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MimoArray {
    pub center: [f64; 3],
    pub element_count: usize,
    pub spacing: f64,
}

impl MimoArray {
    pub fn new(center: [f64; 3], element_count: usize, spacing: f64) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::invalid("element_count", "array needs at least one antenna"));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        Ok(MimoArray {
            center,
            element_count,
            spacing,
        })
    }

    pub fn element_position(&self, m: usize) -> [f64; 3] {
        let offset = (m as f64 + 1.0 - (self.element_count as f64 + 1.0) / 2.0) * self.spacing;
        [self.center[0] + offset, self.center[1], self.center[2]]
    }
}

/// Contribution of a single pinching element at `ell` to the channel of `device`.
#[inline]
pub fn element_response(params: &SystemParams, altitude: f64, ell: f64, device: &Device) -> Complex64 {
    let d = device.distance_to_waveguide(ell, altitude);
    let phase = -params.wavenumber * (d + params.refractive_index * ell);
    Complex64::from_polar(params.aperture_coeff * device.shadowing / d, phase)
}

/// Uplink coefficient between the waveguide and one device.
pub fn pass_channel(params: &SystemParams, waveguide: &Waveguide, device: &Device) -> Complex64 {
    waveguide
        .positions
        .iter()
        .map(|&ell| element_response(params, waveguide.altitude, ell, device))
        .sum()
}

/// Channel vector `h(l)` with one entry per device.
pub fn channel_vector(params: &SystemParams, waveguide: &Waveguide, devices: &[Device]) -> Vec<Complex64> {
    devices
        .iter()
        .map(|dev| pass_channel(params, waveguide, dev))
        .collect()
}

/// `A = sum_{k in S} |xi alpha_k|^2 N / D_k(x_k)^2`.
///
/// Used as the norm budget of the relaxed placement problem. It dominates
/// `sum |h_k|^2` for incoherent placements but not for phase-aligned ones,
/// which can reach `N^2` instead of `N`.
pub fn norm_bound(params: &SystemParams, element_count: usize, altitude: f64, scheduled: &[Device]) -> Result<f64> {
    if scheduled.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let xi2 = params.aperture_coeff * params.aperture_coeff;
    Ok(scheduled
        .iter()
        .map(|dev| {
            let d2 = dev.y * dev.y + altitude * altitude;
            xi2 * dev.shadowing * dev.shadowing * element_count as f64 / d2
        })
        .sum())
}

/// Per-antenna exact spherical-wave line-of-sight channel.
pub fn mimo_channel(params: &SystemParams, array: &MimoArray, device: &Device) -> Vec<Complex64> {
    (0..array.element_count)
        .map(|m| {
            let p = array.element_position(m);
            let (dx, dy, dz) = (p[0] - device.x, p[1] - device.y, p[2]);
            let d = (dx * dx + dy * dy + dz * dz).sqrt();
            Complex64::from_polar(
                params.aperture_coeff * device.shadowing / d,
                -params.wavenumber * d,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_6cm() -> SystemParams {
        SystemParams::new(SPEED_OF_LIGHT / 0.06, 1.4, 1e-12, 1e-3, 1e6, 32.0, None).unwrap()
    }

    #[test]
    fn derived_constants() {
        let p = SystemParams::reference();
        assert!((p.wavenumber * p.wavelength / (2.0 * PI) - 1.0).abs() < 1e-12);
        assert!((p.aperture_coeff * 4.0 * PI / p.wavelength - 1.0).abs() < 1e-12);
        assert!(p.min_spacing >= p.wavelength / 2.0);
    }

    #[test]
    fn rejects_subwavelength_spacing() {
        let err = SystemParams::new(5e9, 1.4, 1e-12, 1e-3, 1e6, 32.0, Some(0.01)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "min_spacing", .. }));
    }

    #[test]
    fn shadowed_device_has_zero_channel() {
        let p = params_6cm();
        let wg = Waveguide::uniform(50.0, 5.0, 32, p.min_spacing).unwrap();
        let dev = Device::at(12.0, -3.0).with_shadowing(0.0);
        assert_eq!(pass_channel(&p, &wg, &dev), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn single_element_hand_value() {
        let p = params_6cm();
        let wg = Waveguide::new(50.0, 4.0, vec![10.0]);
        let dev = Device::at(10.0, 3.0);
        let h = pass_channel(&p, &wg, &dev);
        let xi = 0.06 / (4.0 * PI);
        assert!((h.norm() - xi / 5.0).abs() < 1e-15);
        assert!((h.norm() - 9.5493e-4).abs() < 1e-8);
        let expected = Complex64::from_polar(xi / 5.0, -p.wavenumber * (5.0 + 10.0 * 1.4));
        assert!((h - expected).norm() < 1e-15);
    }

    #[test]
    fn far_device_bounded() {
        let p = params_6cm();
        let wg = Waveguide::uniform(50.0, 5.0, 32, p.min_spacing).unwrap();
        let dev = Device::at(20.0, 1e6);
        assert!(pass_channel(&p, &wg, &dev).norm() <= p.aperture_coeff * 32.0 / 1e6);
    }

    #[test]
    fn channel_vector_matches_per_device() {
        let p = params_6cm();
        let wg = Waveguide::new(30.0, 5.0, vec![2.0, 7.5, 19.25]);
        let devs = [Device::at(1.0, 2.0), Device::at(14.0, -8.0), Device::at(27.5, 11.0)];
        let h = channel_vector(&p, &wg, &devs);
        for (hk, dev) in h.iter().zip(&devs) {
            assert_eq!(*hk, pass_channel(&p, &wg, dev));
        }
        assert!(channel_vector(&p, &wg, &[]).is_empty());
        let twins = channel_vector(&p, &wg, &[devs[1], devs[1]]);
        assert_eq!(twins[0], twins[1]);
    }

    #[test]
    fn norm_bound_values() {
        let p = params_6cm();
        let dev = Device::at(10.0, 3.0);
        let a = norm_bound(&p, 32, 4.0, &[dev]).unwrap();
        let xi = p.aperture_coeff;
        assert!((a - xi * xi * 32.0 / 25.0).abs() < 1e-20);
        let a2 = norm_bound(&p, 32, 4.0, &[dev, dev]).unwrap();
        assert!((a2 - 2.0 * a).abs() < 1e-20);
        let dark = norm_bound(&p, 32, 4.0, &[dev.with_shadowing(0.0)]).unwrap();
        assert_eq!(dark, 0.0);
        assert!(matches!(norm_bound(&p, 32, 4.0, &[]), Err(Error::EmptySchedule)));
    }

    #[test]
    fn mimo_vertical_and_symmetric() {
        let p = params_6cm();
        let arr = MimoArray::new([25.0, 0.0, 5.0], 1, p.wavelength / 2.0).unwrap();
        let h = mimo_channel(&p, &arr, &Device::at(25.0, 0.0));
        assert!((h[0].norm() - p.aperture_coeff / 5.0).abs() < 1e-15);

        let dark = mimo_channel(&p, &arr, &Device::at(3.0, 3.0).with_shadowing(0.0));
        assert!(dark.iter().all(|c| c.norm() == 0.0));

        let arr2 = MimoArray::new([25.0, 0.0, 5.0], 2, p.wavelength / 2.0).unwrap();
        let h2 = mimo_channel(&p, &arr2, &Device::at(25.0, 17.0));
        assert!((h2[0].norm() - h2[1].norm()).abs() < 1e-18);
    }

    #[test]
    fn uniform_layout_is_feasible() {
        let p = SystemParams::reference();
        let wg = Waveguide::uniform(50.0, 5.0, 32, p.min_spacing).unwrap();
        assert!(wg.is_feasible(p.min_spacing));
        let tight = Waveguide::uniform(1.0, 5.0, 32, p.min_spacing).unwrap();
        assert!(tight.is_feasible(p.min_spacing));
        assert!(Waveguide::uniform(0.5, 5.0, 32, p.min_spacing).is_err());
    }
}
