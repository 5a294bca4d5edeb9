//! Delay-and-sum beamforming for a uniform linear array.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::radar::RadarParams;
use crate::scene::RawDataCube;

/// Array response `a(θ)` of a plane wave arriving from azimuth `angle_deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub angle_deg: f64,
    pub values: Vec<Complex64>,
}

/// Delay-and-sum weights, the element-wise conjugate of the steering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    pub look_angle_deg: f64,
    pub weights: Vec<Complex64>,
}

fn check_angle(angle_deg: f64) -> Result<()> {
    if angle_deg > 0.0 && angle_deg < 180.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("angle {angle_deg} outside (0, 180) degrees")))
    }
}

/// `a_m(θ) = exp(j (2π/λ) d m cos θ)`, with `a_0 = 1` exactly.
pub fn steering_vector(angle_deg: f64, params: &RadarParams) -> Result<SteeringVector> {
    check_angle(angle_deg)?;
    let step = 2.0 * std::f64::consts::PI / params.wavelength()
        * params.element_spacing
        * angle_deg.to_radians().cos();
    let values = (0..params.num_elements)
        .map(|m| Complex64::from_polar(1.0, step * m as f64))
        .collect();
    Ok(SteeringVector { angle_deg, values })
}

impl BeamWeights {
    pub fn toward(look_angle_deg: f64, params: &RadarParams) -> Result<Self> {
        let steer = steering_vector(look_angle_deg, params)?;
        Ok(Self {
            look_angle_deg,
            weights: steer.values.iter().map(Complex64::conj).collect(),
        })
    }

    /// Response of these weights to a unit plane wave from `source_deg`.
    pub fn response(&self, source_deg: f64, params: &RadarParams) -> Result<Complex64> {
        let steer = steering_vector(source_deg, params)?;
        Ok(steer.values.iter().zip(&self.weights).map(|(a, w)| a * w).sum())
    }
}

/// Spatially filters every row of the cube toward `look_angle_deg`:
/// `y[n] = Σ_m s(n, m) conj(a_m)`. The output is not normalised by `M`.
pub fn beamform(cube: &RawDataCube, look_angle_deg: f64) -> Result<Vec<Complex64>> {
    let m_len = cube.params.num_elements;
    let n_len = cube.params.total_samples();
    if cube.samples.len() != n_len * m_len {
        return Err(Error::invalid(format!(
            "cube holds {} samples but params describe {n_len} x {m_len}",
            cube.samples.len()
        )));
    }
    let weights = BeamWeights::toward(look_angle_deg, &cube.params)?;
    Ok(cube
        .samples
        .chunks_exact(m_len)
        .map(|row| row.iter().zip(&weights.weights).map(|(s, w)| s * w).sum())
        .collect())
}

/// The beamformed signal as a single-element cube, so it can be stored and
/// processed like raw data. Ground truth is carried over unchanged.
pub fn beamformed_cube(cube: &RawDataCube, look_angle_deg: f64) -> Result<RawDataCube> {
    let samples = beamform(cube, look_angle_deg)?;
    Ok(RawDataCube {
        params: RadarParams {
            num_elements: 1,
            ..cube.params
        },
        samples,
        ground_truth: cube.ground_truth.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> RadarParams {
        RadarParams::default()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_vector(90.0, &params()).unwrap();
        assert_eq!(a.values[0], Complex64::new(1.0, 0.0));
        for v in &a.values {
            assert!(close(*v, Complex64::new(1.0, 0.0), 1e-12));
        }
    }

    #[test]
    fn sixty_degrees_steps_by_quarter_turn() {
        let a = steering_vector(60.0, &params()).unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (v, e) in a.values.iter().zip(expected) {
            assert!(close(*v, e, 1e-9), "{v} vs {e}");
        }
    }

    #[test]
    fn thirty_degrees_matches_per_element_exponential() {
        let a = steering_vector(30.0, &params()).unwrap();
        for (m, v) in a.values.iter().enumerate() {
            let phase = m as f64 * PI * (30.0_f64 * PI / 180.0).cos();
            let e = Complex64::new(phase.cos(), phase.sin());
            assert!(close(*v, e, 1e-12));
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_endfire_and_beyond() {
        for angle in [0.0, 180.0, -1.0, 181.0, f64::NAN] {
            assert!(steering_vector(angle, &params()).is_err());
        }
    }

    #[test]
    fn weights_are_conjugate_steering() {
        let w = BeamWeights::toward(75.0, &params()).unwrap();
        let a = steering_vector(75.0, &params()).unwrap();
        for (w, a) in w.weights.iter().zip(&a.values) {
            assert_eq!(*w, a.conj());
        }
    }

    #[test]
    fn suppression_is_symmetric_in_source_and_look() {
        let p = params();
        for (s, k) in [(60.0, 120.0), (45.0, 100.0), (90.0, 30.0)] {
            let a = BeamWeights::toward(k, &p).unwrap().response(s, &p).unwrap().norm();
            let b = BeamWeights::toward(s, &p).unwrap().response(k, &p).unwrap().norm();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_element_is_identity() {
        let p = RadarParams {
            num_elements: 1,
            num_pulses: 2,
            ..RadarParams::default().with_samples_per_pulse(4)
        };
        let samples: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let cube = RawDataCube {
            params: p,
            samples: samples.clone(),
            ground_truth: vec![],
        };
        assert_eq!(beamform(&cube, 40.0).unwrap(), samples);
    }

    #[test]
    fn rejects_mismatched_cube() {
        let p = RadarParams {
            num_pulses: 2,
            ..RadarParams::default().with_samples_per_pulse(4)
        };
        let cube = RawDataCube {
            params: p,
            samples: vec![Complex64::new(0.0, 0.0); 7],
            ground_truth: vec![],
        };
        assert!(beamform(&cube, 90.0).is_err());
    }

    #[test]
    fn beamformed_cube_round_trips_through_identity() {
        let p = RadarParams {
            num_pulses: 2,
            ..RadarParams::default().with_samples_per_pulse(4)
        };
        let samples: Vec<Complex64> = (0..32).map(|i| Complex64::new((i as f64).sin(), (i as f64).cos())).collect();
        let cube = RawDataCube {
            params: p,
            samples,
            ground_truth: vec![],
        };
        let single = beamformed_cube(&cube, 60.0).unwrap();
        assert_eq!(single.params.num_elements, 1);
        single.validate().unwrap();
        assert_eq!(beamform(&single, 90.0).unwrap(), beamform(&cube, 60.0).unwrap());
    }
}
