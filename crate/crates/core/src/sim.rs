//! Two-pool (water/fat) longitudinal-recursion signal model.
//!
//! Each pool is an ideally spoiled gradient-echo train: before repetition `k`
//! the longitudinal magnetization `Mz` is tipped by `b1 * alpha_k`, the
//! transverse part `Mz * sin(b1 * alpha_k)` is read out with phase
//! `2 pi delta_f TE_k`, and `Mz` then recovers toward 1 with constant T1 over
//! `TR_k`. The fingerprint mixes the two pools linearly by fat fraction.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of MR parameters per tissue tuple.
pub const NUM_PARAMS: usize = 5;

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; NUM_PARAMS] = ["ff", "t1_h2o", "t1_fat", "delta_f", "b1"];

/// Default chemical-shift offset of the fat pool (about -3.3 ppm at 3 T).
pub const DEFAULT_FAT_SHIFT_HZ: f64 = -420.0;

/// Default number of repetitions.
pub const DEFAULT_LENGTH: usize = 175;

/// The acquisition: per-repetition flip angle (degrees), echo time and
/// repetition time (ms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSchedule {
    pub flip_angles: Vec<f64>,
    pub echo_times: Vec<f64>,
    pub repetition_times: Vec<f64>,
    /// Apply a 180 degree inversion before the first repetition.
    pub invert_first: bool,
}

impl SequenceSchedule {
    pub fn new(
        flip_angles: Vec<f64>,
        echo_times: Vec<f64>,
        repetition_times: Vec<f64>,
        invert_first: bool,
    ) -> Result<Self> {
        let s = SequenceSchedule {
            flip_angles,
            echo_times,
            repetition_times,
            invert_first,
        };
        s.validate()?;
        Ok(s)
    }

    /// Constant flip angle, echo time and repetition time over `len` repetitions.
    pub fn constant(len: usize, flip_deg: f64, te: f64, tr: f64, invert_first: bool) -> Result<Self> {
        Self::new(vec![flip_deg; len], vec![te; len], vec![tr; len], invert_first)
    }

    /// The reference schedule: triangular flip-angle ramp 5 -> 70 -> 5 degrees,
    /// echo time alternating 1.0 / 2.3 ms, repetition time linearly spaced
    /// over 8..=12 ms, preceded by an inversion.
    pub fn reference(len: usize) -> Self {
        assert!(len >= 2, "reference schedule needs at least two repetitions");
        let last = (len - 1) as f64;
        let flip_angles = (0..len)
            .map(|k| {
                let pos = k as f64 / last;
                5.0 + 65.0 * (1.0 - (2.0 * pos - 1.0).abs())
            })
            .collect();
        let echo_times = (0..len).map(|k| if k % 2 == 0 { 1.0 } else { 2.3 }).collect();
        let repetition_times = (0..len).map(|k| 8.0 + 4.0 * k as f64 / last).collect();
        SequenceSchedule {
            flip_angles,
            echo_times,
            repetition_times,
            invert_first: true,
        }
    }

    pub fn len(&self) -> usize {
        self.flip_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flip_angles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.flip_angles.len();
        if n == 0 {
            return Err(Error::InvalidSchedule("schedule is empty".into()));
        }
        if self.echo_times.len() != n || self.repetition_times.len() != n {
            return Err(Error::InvalidSchedule(format!(
                "array lengths differ: flip_angles {}, echo_times {}, repetition_times {}",
                n,
                self.echo_times.len(),
                self.repetition_times.len()
            )));
        }
        for k in 0..n {
            let (fa, te, tr) = (
                self.flip_angles[k],
                self.echo_times[k],
                self.repetition_times[k],
            );
            if !(fa > 0.0 && fa <= 180.0) {
                return Err(Error::InvalidSchedule(format!(
                    "flip angle {fa} at repetition {k} outside (0, 180]"
                )));
            }
            if !(te >= 0.0 && te <= tr) || !tr.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "need 0 <= TE <= TR at repetition {k}, got TE={te}, TR={tr}"
                )));
            }
        }
        Ok(())
    }
}

/// On-disk schedule document: the three arrays, the inversion flag and the
/// fat-pool chemical shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default = "default_fat_shift")]
    pub fat_shift: f64,
    #[serde(flatten)]
    pub schedule: SequenceSchedule,
}

fn default_fat_shift() -> f64 {
    DEFAULT_FAT_SHIFT_HZ
}

impl ScheduleFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScheduleFile =
            toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        file.schedule.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One tissue tuple. Times in ms, frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueParams {
    pub ff: f64,
    pub t1_h2o: f64,
    pub t1_fat: f64,
    pub delta_f: f64,
    pub b1: f64,
}

impl TissueParams {
    pub fn new(ff: f64, t1_h2o: f64, t1_fat: f64, delta_f: f64, b1: f64) -> Result<Self> {
        let p = TissueParams {
            ff,
            t1_h2o,
            t1_fat,
            delta_f,
            b1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_array(a: [f64; NUM_PARAMS]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(&self) -> [f64; NUM_PARAMS] {
        [self.ff, self.t1_h2o, self.t1_fat, self.delta_f, self.b1]
    }

    /// Healthy skeletal muscle, used as the SNR signal reference.
    pub fn healthy_muscle() -> Self {
        TissueParams {
            ff: 0.0,
            t1_h2o: 1400.0,
            t1_fat: 300.0,
            delta_f: 0.0,
            b1: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ff) {
            return Err(Error::InvalidParameter(format!("ff {} outside [0, 1]", self.ff)));
        }
        check_positive("t1_h2o", self.t1_h2o)?;
        check_positive("t1_fat", self.t1_fat)?;
        check_positive("b1", self.b1)?;
        if !self.delta_f.is_finite() {
            return Err(Error::InvalidParameter("delta_f is not finite".into()));
        }
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Complex signal evolution, one sample per repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint(pub Vec<Complex64>);

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    /// Real parts followed by imaginary parts (length 2T).
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.0.len());
        out.extend(self.0.iter().map(|c| c.re));
        out.extend(self.0.iter().map(|c| c.im));
        out
    }

    /// Inverse of [`Fingerprint::features`].
    pub fn from_features(features: &[f64]) -> Result<Self> {
        if features.len() % 2 != 0 {
            return Err(Error::Shape(format!(
                "feature vector length {} is odd",
                features.len()
            )));
        }
        let t = features.len() / 2;
        Ok(Fingerprint(
            (0..t)
                .map(|k| Complex64::new(features[k], features[t + k]))
                .collect(),
        ))
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).sum::<f64>() / self.0.len() as f64
    }
}

/// Signal of a single pool with relaxation constant `t1` (ms), off-resonance
/// `delta_f` (Hz) and flip efficacy `b1`.
pub fn simulate_pool(t1: f64, delta_f: f64, b1: f64, schedule: &SequenceSchedule) -> Result<Fingerprint> {
    check_positive("t1", t1)?;
    check_positive("b1", b1)?;
    if !delta_f.is_finite() {
        return Err(Error::InvalidParameter("delta_f is not finite".into()));
    }
    schedule.validate()?;
    Ok(pool_signal(t1, delta_f, b1, schedule))
}

fn pool_signal(t1: f64, delta_f: f64, b1: f64, schedule: &SequenceSchedule) -> Fingerprint {
    let mut mz = if schedule.invert_first { -1.0 } else { 1.0 };
    let values = schedule
        .flip_angles
        .iter()
        .zip(&schedule.echo_times)
        .zip(&schedule.repetition_times)
        .map(|((&fa, &te), &tr)| {
            let alpha = (b1 * fa).to_radians();
            let phase = 2.0 * std::f64::consts::PI * delta_f * te / 1000.0;
            let signal = Complex64::from_polar(mz * alpha.sin(), phase);
            let e1 = (-tr / t1).exp();
            mz = 1.0 - (1.0 - mz * alpha.cos()) * e1;
            signal
        })
        .collect();
    Fingerprint(values)
}

/// Water/fat mixture: `(1 - ff) * water + ff * fat`, the fat pool shifted by
/// `fat_shift` Hz relative to `delta_f`.
pub fn simulate_fingerprint(
    params: &TissueParams,
    schedule: &SequenceSchedule,
    fat_shift: f64,
) -> Result<Fingerprint> {
    params.validate()?;
    let water = simulate_pool(params.t1_h2o, params.delta_f, params.b1, schedule)?;
    let fat = simulate_pool(params.t1_fat, params.delta_f + fat_shift, params.b1, schedule)?;
    let ff = params.ff;
    Ok(Fingerprint(
        water
            .0
            .iter()
            .zip(&fat.0)
            .map(|(w, f)| w * (1.0 - ff) + f * ff)
            .collect(),
    ))
}

/// Mean signal magnitude of healthy muscle under `schedule`; the `S` of the
/// SNR definition.
pub fn reference_signal(schedule: &SequenceSchedule, fat_shift: f64) -> Result<f64> {
    Ok(simulate_fingerprint(&TissueParams::healthy_muscle(), schedule, fat_shift)?.mean_magnitude())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spoiled_steady_state(alpha_deg: f64, tr: f64, t1: f64) -> f64 {
        let a = alpha_deg.to_radians();
        let e1 = (-tr / t1).exp();
        a.sin() * (1.0 - e1) / (1.0 - e1 * a.cos())
    }

    #[test]
    fn converges_to_spoiled_steady_state() {
        // 10 * t1 / TR repetitions
        let s = SequenceSchedule::constant(1000, 10.0, 0.0, 10.0, false).unwrap();
        let fp = simulate_pool(1000.0, 0.0, 1.0, &s).unwrap();
        let expected = spoiled_steady_state(10.0, 10.0, 1000.0);
        let last = fp.values().last().unwrap().norm();
        assert!((last - expected).abs() <= 1e-6, "{last} vs {expected}");
    }

    #[test]
    fn inversion_converges_to_same_steady_state() {
        let s = SequenceSchedule::constant(2000, 20.0, 0.0, 10.0, true).unwrap();
        let fp = simulate_pool(800.0, 0.0, 1.0, &s).unwrap();
        assert!(fp.0[0].re < 0.0);
        let expected = spoiled_steady_state(20.0, 10.0, 800.0);
        assert!((fp.0.last().unwrap().re - expected).abs() <= 1e-9);
    }

    #[test]
    fn zero_phase_gives_real_signal() {
        let mut s = SequenceSchedule::reference(175);
        s.echo_times.iter_mut().for_each(|te| *te = 0.0);
        let fp = simulate_pool(1200.0, 50.0, 0.9, &s).unwrap();
        assert!(fp.values().iter().all(|c| c.im == 0.0));
        let s = SequenceSchedule::reference(175);
        let fp = simulate_pool(1200.0, 0.0, 0.9, &s).unwrap();
        assert!(fp.values().iter().all(|c| c.im == 0.0));
    }

    #[test]
    fn depends_only_on_b1_times_flip() {
        let s = SequenceSchedule::reference(175);
        let mut halved = s.clone();
        halved.flip_angles.iter_mut().for_each(|a| *a *= 0.5);
        let a = simulate_pool(900.0, 30.0, 0.8, &s).unwrap();
        let b = simulate_pool(900.0, 30.0, 1.6, &halved).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() <= 1e-15, "{x} vs {y}");
        }
    }

    #[test]
    fn fat_fraction_mixing() {
        let s = SequenceSchedule::reference(175);
        let base = TissueParams::new(0.0, 1100.0, 300.0, 20.0, 0.9).unwrap();
        let water = simulate_pool(1100.0, 20.0, 0.9, &s).unwrap();
        let fat = simulate_pool(300.0, 20.0 + DEFAULT_FAT_SHIFT_HZ, 0.9, &s).unwrap();
        assert_eq!(simulate_fingerprint(&base, &s, DEFAULT_FAT_SHIFT_HZ).unwrap(), water);

        let pure_fat_a = TissueParams { ff: 1.0, ..base };
        let pure_fat_b = TissueParams { ff: 1.0, t1_h2o: 2900.0, ..base };
        assert_eq!(
            simulate_fingerprint(&pure_fat_a, &s, DEFAULT_FAT_SHIFT_HZ).unwrap(),
            simulate_fingerprint(&pure_fat_b, &s, DEFAULT_FAT_SHIFT_HZ).unwrap()
        );

        let half = simulate_fingerprint(&TissueParams { ff: 0.5, ..base }, &s, DEFAULT_FAT_SHIFT_HZ).unwrap();
        for ((h, w), f) in half.values().iter().zip(water.values()).zip(fat.values()) {
            let mean = (w + f) * 0.5;
            assert!((h - mean).norm() <= 1e-12 * mean.norm().max(1e-300));
        }
    }

    #[test]
    fn conjugate_off_resonance_conjugates_signal() {
        let s = SequenceSchedule::reference(175);
        let p = TissueParams::new(0.3, 1300.0, 280.0, 45.0, 1.1).unwrap();
        let q = TissueParams { delta_f: -45.0, ..p };
        let a = simulate_fingerprint(&p, &s, -420.0).unwrap();
        let b = simulate_fingerprint(&q, &s, 420.0).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(*x, y.conj());
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let s = SequenceSchedule::reference(10);
        assert!(matches!(simulate_pool(0.0, 0.0, 1.0, &s), Err(Error::InvalidParameter(_))));
        assert!(matches!(simulate_pool(100.0, 0.0, -1.0, &s), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            SequenceSchedule::new(vec![10.0], vec![5.0], vec![4.0], false),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(matches!(
            SequenceSchedule::new(vec![0.0], vec![1.0], vec![4.0], false),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(matches!(
            SequenceSchedule::new(vec![10.0, 10.0], vec![1.0], vec![4.0, 4.0], false),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(TissueParams::new(1.2, 100.0, 100.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn reference_schedule_shape() {
        let s = SequenceSchedule::reference(DEFAULT_LENGTH);
        s.validate().unwrap();
        assert_eq!(s.len(), 175);
        assert_eq!(s.flip_angles[0], 5.0);
        assert_eq!(s.flip_angles[87], 70.0);
        assert_eq!(s.flip_angles[174], 5.0);
        assert_eq!(s.repetition_times[0], 8.0);
        assert_eq!(s.repetition_times[174], 12.0);
        assert_eq!(&s.echo_times[..2], &[1.0, 2.3]);
    }

    #[test]
    fn features_roundtrip() {
        let s = SequenceSchedule::reference(20);
        let fp = simulate_fingerprint(&TissueParams::healthy_muscle(), &s, -420.0).unwrap();
        let f = fp.features();
        assert_eq!(f.len(), 40);
        assert_eq!(Fingerprint::from_features(&f).unwrap(), fp);
    }

    #[test]
    fn schedule_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schedule.toml");
        let file = ScheduleFile {
            fat_shift: -420.0,
            schedule: SequenceSchedule::reference(12),
        };
        file.save(&path).unwrap();
        assert_eq!(ScheduleFile::load(&path).unwrap(), file);
    }
}
