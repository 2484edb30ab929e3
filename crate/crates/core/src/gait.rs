//! The expert baseline: offset-sine gaits with a phase shift between leg
//! groups, PneuNet bend-angle measurement, and the affine pressure
//! calibration fit.

use nalgebra::Vector3;
use thiserror::Error;

use crate::fem::{
    clamp_pressure_kpa, static_solve, FemModel, MaterialParams, StaticProblem,
};
use crate::geometry::Part;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("gait leaves the admissible pressure range: offset {offset} amplitude {amplitude}")]
    PressureRange { offset: f64, amplitude: f64 },
    #[error("calibration requires at least two distinct commanded pressures")]
    DegenerateCalibration,
    #[error("static solve failed: {0}")]
    Statics(String),
}

/// Offset-sine pressure wave shared by all regulators, with a per-regulator
/// phase shift.
#[derive(Debug, Clone, PartialEq)]
pub struct SineGait {
    pub amplitude_kpa: f64,
    pub offset_kpa: f64,
    pub period_s: f64,
    /// Phase per regulator, degrees.
    pub phases_deg: Vec<f64>,
}

impl SineGait {
    /// The experiment defaults: maximum amplitude within the 0-90 kPa range
    /// and a 4 second period, fore legs at phase zero.
    pub fn baseline(hind_phase_deg: f64) -> Self {
        SineGait {
            amplitude_kpa: 45.0,
            offset_kpa: 45.0,
            period_s: 4.0,
            phases_deg: vec![0.0, hind_phase_deg, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        if self.offset_kpa - self.amplitude_kpa < 0.0 || self.offset_kpa + self.amplitude_kpa > 90.0
        {
            return Err(GaitError::PressureRange {
                offset: self.offset_kpa,
                amplitude: self.amplitude_kpa,
            });
        }
        Ok(())
    }
}

/// Pressure of one regulator at time `t`, clamped to the admissible range.
pub fn sine_gait(t: f64, gait: &SineGait, regulator: usize) -> f64 {
    let phase = gait.phases_deg.get(regulator).copied().unwrap_or(0.0).to_radians();
    let p = gait.offset_kpa
        + gait.amplitude_kpa * (std::f64::consts::TAU * t / gait.period_s + phase).sin();
    clamp_pressure_kpa(p)
}

/// Result of a phase sweep: the evaluated table and the best entry.
#[derive(Debug, Clone)]
pub struct PhaseSweepResult {
    /// (phase degrees, reward cm), in sweep order.
    pub table: Vec<(f64, f64)>,
    pub best_phase_deg: f64,
    pub best_reward_cm: f64,
}

/// The standard sweep grid: 0..=180 degrees in steps of 10.
pub fn standard_phase_grid() -> Vec<f64> {
    (0..=18).map(|i| 10.0 * i as f64).collect()
}

/// Evaluates a reward function over the phase grid and returns the argmax.
/// The reward function typically runs one full episode of the baseline design
/// under [`SineGait::baseline`] with the given hind-leg phase.
pub fn phase_sweep(
    phases_deg: &[f64],
    mut reward_of_phase: impl FnMut(f64) -> f64,
) -> PhaseSweepResult {
    let mut table = Vec::with_capacity(phases_deg.len());
    for &phase in phases_deg {
        table.push((phase, reward_of_phase(phase)));
    }
    let (best_phase_deg, best_reward_cm) = table
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0.0, 0.0));
    PhaseSweepResult { table, best_phase_deg, best_reward_cm }
}

/// Serializes a sweep table as CSV with a header.
pub fn phase_sweep_csv(result: &PhaseSweepResult) -> String {
    let mut out = String::from("phase_deg,reward_cm\n");
    for (phase, reward) in &result.table {
        out.push_str(&format!("{phase},{reward}\n"));
    }
    out
}

/// Measures the bend of a clamped PneuNet at the given cavity pressure: the
/// angle in degrees between the undeformed leg axis and the chord from the
/// clamp centroid to the tip centroid, positive toward the constraint layer.
pub fn measure_bend_angle(
    part: &Part,
    pressure_kpa: f64,
    material: &MaterialParams,
) -> Result<f64, GaitError> {
    let model =
        FemModel::from_part(part, material).map_err(|e| GaitError::Statics(e.to_string()))?;
    let clamp = part.mesh.face_set_nodes("attachment");
    let length = part.mesh.nodes.iter().map(|p| p.x).fold(0.0, f64::max);
    let tip: Vec<u32> = part
        .mesh
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.x - length).abs() < 1e-9)
        .map(|(i, _)| i as u32)
        .collect();
    let n_cavities = part.cavities.len().max(1);
    let problem = StaticProblem {
        fixed_nodes: clamp.clone(),
        pressures_kpa: vec![pressure_kpa; n_cavities],
        include_gravity: false,
        ..Default::default()
    };
    let state = static_solve(&model, &problem).map_err(|e| GaitError::Statics(e.to_string()))?;

    let centroid = |nodes: &[u32], q: &[f64]| -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for &n in nodes {
            acc += Vector3::new(q[3 * n as usize], q[3 * n as usize + 1], q[3 * n as usize + 2]);
        }
        acc / nodes.len() as f64
    };
    let clamp_c = centroid(&clamp, state.q.as_slice());
    let tip_c = centroid(&tip, state.q.as_slice());
    let chord = tip_c - clamp_c;
    let rest_chord = centroid(&tip, &model.rest) - centroid(&clamp, &model.rest);
    let cos = (chord.dot(&rest_chord) / (chord.norm() * rest_chord.norm())).clamp(-1.0, 1.0);
    let angle = cos.acos().to_degrees();
    // Sign: positive when the tip moves toward the constraint layer (-z).
    Ok(if chord.z <= rest_chord.z { angle } else { -angle })
}

/// Affine map from commanded to simulated pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationMap {
    pub slope: f64,
    pub intercept: f64,
}

impl CalibrationMap {
    pub fn identity() -> Self {
        CalibrationMap { slope: 1.0, intercept: 0.0 }
    }

    /// Applies the map and clamps into the admissible range.
    pub fn apply(&self, commanded_kpa: f64) -> f64 {
        clamp_pressure_kpa(self.slope * commanded_kpa + self.intercept)
    }
}

/// Least-squares affine fit of (commanded, matched simulated) pressure pairs.
pub fn fit_pressure_calibration(pairs: &[(f64, f64)]) -> Result<CalibrationMap, GaitError> {
    if pairs.len() < 2 {
        return Err(GaitError::DegenerateCalibration);
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|(x, _)| x).sum();
    let sy: f64 = pairs.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 * (sxx.abs() + 1.0) {
        return Err(GaitError::DegenerateCalibration);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(CalibrationMap { slope, intercept })
}

/// Calibration bench protocol run entirely in simulation: measure the bend of
/// a fine-resolution leg (standing in for the physical actuator) at each
/// commanded pressure, find the coarse-model pressure producing the same bend
/// by bisection, and fit the affine map.
pub fn calibrate_against_reference(
    reference: &Part,
    simulated: &Part,
    material: &MaterialParams,
    commanded_kpa: &[f64],
) -> Result<CalibrationMap, GaitError> {
    let mut pairs = Vec::with_capacity(commanded_kpa.len());
    for &p in commanded_kpa {
        let target = measure_bend_angle(reference, p, material)?;
        let matched = match_pressure_for_angle(simulated, target, material)?;
        pairs.push((p, matched));
    }
    fit_pressure_calibration(&pairs)
}

/// Bisection for the pressure at which the part reaches the target bend
/// angle; relies on the monotone pressure-angle response.
fn match_pressure_for_angle(
    part: &Part,
    target_deg: f64,
    material: &MaterialParams,
) -> Result<f64, GaitError> {
    let (mut lo, mut hi) = (0.0, 90.0);
    let angle_hi = measure_bend_angle(part, hi, material)?;
    if angle_hi <= target_deg {
        return Ok(hi);
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        let angle = measure_bend_angle(part, mid, material)?;
        if angle < target_deg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_gait_values() {
        let gait = SineGait::baseline(110.0);
        gait.validate().unwrap();
        assert_eq!(sine_gait(0.0, &gait, 0), 45.0);
        // Extremes over one period at defaults.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut t = 0.0;
        while t < 4.0 {
            let p = sine_gait(t, &gait, 0);
            lo = lo.min(p);
            hi = hi.max(p);
            t += 0.001;
        }
        assert!(lo < 1e-3 && hi > 90.0 - 1e-3);
        // Equal phases give identical waveforms.
        let flat = SineGait { phases_deg: vec![30.0, 30.0, 30.0], ..gait };
        for t in [0.0, 0.3, 1.7, 3.9] {
            assert_eq!(sine_gait(t, &flat, 0), sine_gait(t, &flat, 1));
        }
    }

    #[test]
    fn out_of_range_gait_rejected() {
        let gait = SineGait {
            amplitude_kpa: 50.0,
            offset_kpa: 45.0,
            period_s: 4.0,
            phases_deg: vec![0.0],
        };
        assert!(gait.validate().is_err());
    }

    #[test]
    fn sweep_finds_synthetic_argmax() {
        let grid = standard_phase_grid();
        assert_eq!(grid.len(), 19);
        let result = phase_sweep(&grid, |phi| -(phi - 110.0).abs());
        assert_eq!(result.best_phase_deg, 110.0);
        assert_eq!(result.table.len(), 19);
        let csv = phase_sweep_csv(&result);
        assert!(csv.starts_with("phase_deg,reward_cm\n"));
        assert_eq!(csv.lines().count(), 20);
    }

    #[test]
    fn affine_fit_recovers_exact_line() {
        let pairs: Vec<(f64, f64)> =
            (1..=5).map(|i| (i as f64 * 10.0, 2.0 * i as f64 * 10.0 + 5.0)).collect();
        let map = fit_pressure_calibration(&pairs).unwrap();
        assert!((map.slope - 2.0).abs() < 1e-10);
        assert!((map.intercept - 5.0).abs() < 1e-10);
        // Identical curves give the identity map.
        let same: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, i as f64)).collect();
        let id = fit_pressure_calibration(&same).unwrap();
        assert!((id.slope - 1.0).abs() < 1e-10);
        assert!(id.intercept.abs() < 1e-10);
    }

    #[test]
    fn noisy_fit_matches_normal_equations_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let pairs: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = i as f64 * 2.5;
                (x, 1.4 * x - 3.0 + rng.random_range(-0.5..0.5))
            })
            .collect();
        let map = fit_pressure_calibration(&pairs).unwrap();
        // Oracle: solve the 2x2 normal equations directly.
        let n = pairs.len() as f64;
        let (sx, sy, sxx, sxy) = pairs.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, (x, y)| {
            (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
        });
        let m = nalgebra::Matrix2::new(sxx, sx, sx, n);
        let rhs = nalgebra::Vector2::new(sxy, sy);
        let sol = m.lu().solve(&rhs).unwrap();
        assert!((map.slope - sol[0]).abs() < 1e-8);
        assert!((map.intercept - sol[1]).abs() < 1e-8);
    }

    #[test]
    fn degenerate_calibration_rejected() {
        assert!(fit_pressure_calibration(&[(10.0, 12.0)]).is_err());
        assert!(fit_pressure_calibration(&[(10.0, 12.0), (10.0, 13.0)]).is_err());
    }

    #[test]
    fn calibration_preserves_range_after_clamp() {
        let map = CalibrationMap { slope: 1.3, intercept: -8.0 };
        for p in [0.0, 10.0, 45.0, 90.0] {
            let out = map.apply(p);
            assert!((0.0..=90.0).contains(&out));
        }
    }
}
