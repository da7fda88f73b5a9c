//! Synthetic turbulent wind: a first-order autoregressive Gaussian process
//! around a (possibly scheduled) mean, seeded and fully reproducible.
//!
//! The process is V(t+dt) = m + phi * (V(t) - m) + sigma_eps * xi with
//! phi = exp(-dt / T_C), and sigma_eps chosen so the stationary standard
//! deviation equals TI * m. The coherence time T_C is 10 s. Samples are
//! floored at 0.5 m/s so the tip-speed ratio stays finite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Mean-reversion time constant of the turbulence process, seconds.
pub const COHERENCE_TIME_S: f64 = 10.0;
/// Hard floor applied to every emitted sample, m/s.
pub const WIND_FLOOR_MPS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindError {
    #[error("mean wind speed must be positive, got {0}")]
    BadMean(f64),
    #[error("turbulence intensity must lie in [0, 0.5), got {0}")]
    BadTurbulence(f64),
    #[error("wind series needs positive dt and duration")]
    BadGrid,
    #[error("mean schedule must be non-empty, time-sorted, and positive")]
    BadSchedule,
}

/// Piecewise-linear positive profile: (time s, value) knots, held
/// constant before the first and after the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn constant(mean: f64) -> Result<Self, WindError> {
        Self::new(vec![(0.0, mean)])
    }

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, WindError> {
        if knots.is_empty()
            || knots.iter().any(|&(t, m)| !t.is_finite() || !(m > 0.0))
            || knots.windows(2).any(|w| w[1].0 <= w[0].0)
        {
            return Err(WindError::BadSchedule);
        }
        Ok(Schedule { knots })
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, m0), (t1, m1)) = (w[0], w[1]);
            if t <= t1 {
                return m0 + (m1 - m0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    pub fn max_mean(&self) -> f64 {
        self.knots.iter().map(|&(_, m)| m).fold(0.0, f64::max)
    }
}

/// Samples on the uniform grid t = 0, dt, 2*dt, ... covering `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl WindSeries {
    /// Sample at grid index `i`, holding the last value past the end.
    pub fn at(&self, i: usize) -> f64 {
        self.samples[i.min(self.samples.len() - 1)]
    }
}

/// Standard normal draw via Box-Muller on two uniform(0,1] samples.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Constant-mean turbulent series; see the module docs for the process.
pub fn generate_wind(
    mean: f64,
    ti: f64,
    seed: u64,
    dt: f64,
    duration: f64,
) -> Result<WindSeries, WindError> {
    if !(mean > 0.0) {
        return Err(WindError::BadMean(mean));
    }
    let schedule = Schedule::constant(mean)?;
    generate_wind_scheduled(&schedule, ti, seed, dt, duration)
}

/// Scheduled-mean variant: the AR recursion tracks the instantaneous mean,
/// and the innovation variance follows TI * m(t).
pub fn generate_wind_scheduled(
    schedule: &Schedule,
    ti: f64,
    seed: u64,
    dt: f64,
    duration: f64,
) -> Result<WindSeries, WindError> {
    if !(0.0..0.5).contains(&ti) {
        return Err(WindError::BadTurbulence(ti));
    }
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(WindError::BadGrid);
    }
    let n = (duration / dt).round() as usize + 1;
    let phi = (-dt / COHERENCE_TIME_S).exp();
    let innovation_scale = (1.0 - phi * phi).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let mut deviation = 0.0;
    for i in 0..n {
        let t = i as f64 * dt;
        let m = schedule.mean_at(t);
        if i > 0 {
            let sigma_eps = ti * m * innovation_scale;
            deviation = phi * deviation + sigma_eps * standard_normal(&mut rng);
        }
        samples.push((m + deviation).max(WIND_FLOOR_MPS));
    }
    Ok(WindSeries { dt, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_turbulence_is_the_mean_schedule() {
        let w = generate_wind(8.0, 0.0, 7, 0.05, 10.0).unwrap();
        assert_eq!(w.samples.len(), 201);
        assert!(w.samples.iter().all(|&v| v == 8.0));
    }

    #[test]
    fn same_seed_reproduces_the_series_bit_exactly() {
        let a = generate_wind(10.0, 0.12, 42, 0.05, 60.0).unwrap();
        let b = generate_wind(10.0, 0.12, 42, 0.05, 60.0).unwrap();
        assert_eq!(a, b);
        let c = generate_wind(10.0, 0.12, 43, 0.05, 60.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn long_sample_matches_requested_turbulence_intensity() {
        // One hour at 8 m/s, TI 9%: empirical std/mean within +-0.015.
        let w = generate_wind(8.0, 0.09, 1, 0.05, 3600.0).unwrap();
        let n = w.samples.len() as f64;
        let mean: f64 = w.samples.iter().sum::<f64>() / n;
        let var: f64 = w.samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let ti = var.sqrt() / mean;
        assert!((ti - 0.09).abs() < 0.015, "empirical TI {ti}");
        assert!((mean - 8.0).abs() < 0.5, "empirical mean {mean}");
    }

    #[test]
    fn samples_never_drop_below_the_floor() {
        // Low mean and high turbulence push excursions into the floor.
        let w = generate_wind(1.0, 0.49, 3, 0.05, 600.0).unwrap();
        assert!(w.samples.iter().all(|&v| v >= WIND_FLOOR_MPS));
        assert!(w.samples.iter().any(|&v| v == WIND_FLOOR_MPS));
    }

    #[test]
    fn schedule_interpolates_and_holds_ends() {
        let s = Schedule::new(vec![(10.0, 6.0), (40.0, 16.0)]).unwrap();
        assert_eq!(s.mean_at(0.0), 6.0);
        assert_eq!(s.mean_at(10.0), 6.0);
        assert!((s.mean_at(25.0) - 11.0).abs() < 1e-12);
        assert_eq!(s.mean_at(40.0), 16.0);
        assert_eq!(s.mean_at(100.0), 16.0);
        assert_eq!(s.max_mean(), 16.0);
    }

    #[test]
    fn scheduled_zero_turbulence_tracks_the_ramp() {
        let s = Schedule::new(vec![(0.0, 6.0), (30.0, 16.0)]).unwrap();
        let w = generate_wind_scheduled(&s, 0.0, 9, 0.05, 60.0).unwrap();
        assert_eq!(w.at(0), 6.0);
        let mid = w.samples[(15.0f64 / 0.05) as usize];
        assert!((mid - 11.0).abs() < 1e-9);
        assert_eq!(*w.samples.last().unwrap(), 16.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            generate_wind(-1.0, 0.1, 0, 0.05, 1.0),
            Err(WindError::BadMean(_))
        ));
        assert!(matches!(
            generate_wind(8.0, 0.5, 0, 0.05, 1.0),
            Err(WindError::BadTurbulence(_))
        ));
        assert!(matches!(
            generate_wind(8.0, 0.1, 0, 0.0, 1.0),
            Err(WindError::BadGrid)
        ));
        assert!(Schedule::new(vec![]).is_err());
        assert!(Schedule::new(vec![(0.0, 5.0), (0.0, 6.0)]).is_err());
        assert!(Schedule::new(vec![(0.0, -5.0)]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            // The floor holds and the sample count matches the grid for any
            // admissible parameters.
            #[test]
            fn floor_and_grid_hold(
                mean in 0.6f64..25.0,
                ti in 0.0f64..0.45,
                seed in 0u64..1000,
            ) {
                let w = generate_wind(mean, ti, seed, 0.5, 30.0).unwrap();
                prop_assert_eq!(w.samples.len(), 61);
                prop_assert!(w.samples.iter().all(|&v| v >= WIND_FLOOR_MPS));
            }
        }
    }
}
