//! Parameter grids, simulated dictionaries, splitting and persistence.
//!
//! On disk a dictionary `<name>` is three files:
//!
//! * `<name>.manifest`: TOML manifest (format version, counts, grid, schedule, seed)
//! * `<name>.params.bin`: N x 5 little-endian `f32`, row-major
//! * `<name>.fp.bin`: N x T complex values as interleaved little-endian `f32` (re, im)

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;
use crate::sim::{self, Fingerprint, SequenceSchedule, TissueParams, NUM_PARAMS};

pub const FORMAT_VERSION: &str = "1";

/// One `(start, increment, stop)` run of grid values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment(pub f64, pub f64, pub f64);

impl Segment {
    pub fn validate(&self) -> Result<()> {
        let Segment(start, inc, stop) = *self;
        if !(start.is_finite() && inc.is_finite() && stop.is_finite()) {
            return Err(Error::Grid(format!("non-finite segment {self:?}")));
        }
        if inc <= 0.0 {
            return Err(Error::Grid(format!("segment {self:?} has non-positive increment")));
        }
        if start > stop {
            return Err(Error::Grid(format!("segment {self:?} has start > stop")));
        }
        Ok(())
    }

    /// Number of values `start + k * inc` not exceeding `stop` (up to rounding).
    pub fn count(&self) -> usize {
        let Segment(start, inc, stop) = *self;
        ((stop - start) / inc + 1e-6).floor() as usize + 1
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let Segment(start, inc, _) = *self;
        (0..self.count()).map(move |k| start + k as f64 * inc)
    }
}

/// Per-parameter segment lists in the order (FF, T1H2O, T1fat, delta_f, B1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub ff: Vec<Segment>,
    pub t1_h2o: Vec<Segment>,
    pub t1_fat: Vec<Segment>,
    pub delta_f: Vec<Segment>,
    pub b1: Vec<Segment>,
}

impl GridSpec {
    /// Training grid: FF 0:0.1:1, T1H2O 500:100:1700 + 1900:200:3100 ms,
    /// T1fat 200:25:400 ms, delta_f -120:10:120 Hz, B1 0.3:0.1:1.0.
    pub fn standard_training() -> Self {
        GridSpec {
            ff: vec![Segment(0.0, 0.1, 1.0)],
            t1_h2o: vec![Segment(500.0, 100.0, 1700.0), Segment(1900.0, 200.0, 3100.0)],
            t1_fat: vec![Segment(200.0, 25.0, 400.0)],
            delta_f: vec![Segment(-120.0, 10.0, 120.0)],
            b1: vec![Segment(0.3, 0.1, 1.0)],
        }
    }

    /// Validation/test grid, offset from the training grid.
    pub fn standard_testing() -> Self {
        GridSpec {
            ff: vec![Segment(0.05, 0.1, 0.95)],
            t1_h2o: vec![Segment(550.0, 200.0, 1750.0), Segment(2150.0, 400.0, 2950.0)],
            t1_fat: vec![Segment(215.0, 50.0, 365.0)],
            delta_f: vec![Segment(-115.0, 20.0, 105.0)],
            b1: vec![Segment(0.35, 0.1, 0.95)],
        }
    }

    pub fn segments(&self) -> [&[Segment]; NUM_PARAMS] {
        [&self.ff, &self.t1_h2o, &self.t1_fat, &self.delta_f, &self.b1]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, segs) in sim::PARAM_NAMES.iter().zip(self.segments()) {
            if segs.is_empty() {
                return Err(Error::Grid(format!("parameter {name} has no segments")));
            }
            segs.iter().try_for_each(Segment::validate)?;
        }
        Ok(())
    }

    /// Distinct values per parameter, segments concatenated in order.
    pub fn axis_values(&self) -> [Vec<f64>; NUM_PARAMS] {
        self.segments()
            .map(|segs| segs.iter().flat_map(|s| s.values().collect::<Vec<_>>()).collect())
    }

    pub fn count(&self) -> usize {
        self.segments()
            .iter()
            .map(|segs| segs.iter().map(Segment::count).sum::<usize>())
            .product()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: GridSpec = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Cartesian product of the per-parameter value lists, FF varying slowest.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<TissueParams>> {
    spec.validate()?;
    let axes = spec.axis_values();
    let mut out = Vec::with_capacity(spec.count());
    for &ff in &axes[0] {
        for &t1_h2o in &axes[1] {
            for &t1_fat in &axes[2] {
                for &delta_f in &axes[3] {
                    for &b1 in &axes[4] {
                        out.push(TissueParams::new(ff, t1_h2o, t1_fat, delta_f, b1).map_err(
                            |e| Error::Grid(format!("grid value out of range: {e}")),
                        )?);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Choose about `target` tuples, the same number from every (FF, T1H2O)
/// stratum, uniformly at random within each stratum. Output keeps grid order.
pub fn stratified_sample(params: &[TissueParams], target: usize, seed_value: u64) -> Vec<TissueParams> {
    let mut strata: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, p) in params.iter().enumerate() {
        strata
            .entry((p.ff.to_bits(), p.t1_h2o.to_bits()))
            .or_default()
            .push(i);
    }
    if strata.is_empty() {
        return Vec::new();
    }
    let per = ((target as f64 / strata.len() as f64).round() as usize).max(1);
    let mut rng = seed::rng(seed_value, "stratified-sample");
    let mut chosen: Vec<usize> = Vec::new();
    for idx in strata.values_mut() {
        idx.shuffle(&mut rng);
        chosen.extend(idx.iter().take(per));
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| params[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: String,
    pub entries: usize,
    pub length: usize,
    pub seed: u64,
    pub fat_shift: f64,
    /// How the entries were produced, e.g. `grid`, `stratified(5000)`, `split(0.2,part=0)`.
    pub provenance: String,
    pub schedule_sha256: String,
    pub grid: Option<GridSpec>,
    pub schedule: SequenceSchedule,
}

pub fn schedule_hash(schedule: &SequenceSchedule, fat_shift: f64) -> String {
    let mut h = Sha256::new();
    for arr in [&schedule.flip_angles, &schedule.echo_times, &schedule.repetition_times] {
        h.update((arr.len() as u64).to_le_bytes());
        for v in arr {
            h.update(v.to_le_bytes());
        }
    }
    h.update([schedule.invert_first as u8]);
    h.update(fat_shift.to_le_bytes());
    hex_string(&h.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parameter tuples paired with simulated fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    params: Array2<f32>,
    /// N x 2T, interleaved (re, im).
    fingerprints: Array2<f32>,
    pub manifest: Manifest,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.params.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fingerprint length T.
    pub fn length(&self) -> usize {
        self.manifest.length
    }

    pub fn schedule(&self) -> &SequenceSchedule {
        &self.manifest.schedule
    }

    pub fn params_row(&self, i: usize) -> [f64; NUM_PARAMS] {
        std::array::from_fn(|j| self.params[[i, j]] as f64)
    }

    pub fn tissue(&self, i: usize) -> TissueParams {
        let [ff, t1_h2o, t1_fat, delta_f, b1] = self.params_row(i);
        TissueParams {
            ff,
            t1_h2o,
            t1_fat,
            delta_f,
            b1,
        }
    }

    pub fn fingerprint(&self, i: usize) -> Fingerprint {
        Fingerprint::from_features(&self.features(i)).expect("even length")
    }

    /// Real parts followed by imaginary parts, length 2T.
    pub fn features(&self, i: usize) -> Vec<f64> {
        let t = self.length();
        let row = self.fingerprints.row(i);
        let mut out = vec![0.0; 2 * t];
        for k in 0..t {
            out[k] = row[2 * k] as f64;
            out[t + k] = row[2 * k + 1] as f64;
        }
        out
    }

    /// N x M parameter matrix in original units.
    pub fn param_matrix(&self) -> Array2<f64> {
        self.params.mapv(|v| v as f64)
    }

    /// N x 2T feature matrix (real block, then imaginary block).
    pub fn feature_matrix(&self) -> Array2<f64> {
        let t = self.length();
        Array2::from_shape_fn((self.len(), 2 * t), |(i, j)| {
            if j < t {
                self.fingerprints[[i, 2 * j]] as f64
            } else {
                self.fingerprints[[i, 2 * (j - t) + 1]] as f64
            }
        })
    }

    /// True when both dictionaries were simulated with the same schedule and fat shift.
    pub fn shares_schedule(&self, other: &Dictionary) -> bool {
        self.manifest.schedule_sha256 == other.manifest.schedule_sha256
    }

    /// New dictionary holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize], provenance: &str) -> Dictionary {
        let params = self.params.select(ndarray::Axis(0), indices);
        let fingerprints = self.fingerprints.select(ndarray::Axis(0), indices);
        let mut manifest = self.manifest.clone();
        manifest.entries = indices.len();
        manifest.provenance = format!("{} -> {}", self.manifest.provenance, provenance);
        Dictionary {
            params,
            fingerprints,
            manifest,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let files = DictionaryFiles::new(path.as_ref());
        if let Some(dir) = files.manifest.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = toml::to_string(&self.manifest)
            .map_err(|e| Error::format(&files.manifest, e.to_string()))?;
        std::fs::write(&files.manifest, text).map_err(|e| Error::io(&files.manifest, e))?;
        write_f32(&files.params, self.params.iter())?;
        write_f32(&files.fingerprints, self.fingerprints.iter())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let files = DictionaryFiles::new(path.as_ref());
        let text =
            std::fs::read_to_string(&files.manifest).map_err(|e| Error::io(&files.manifest, e))?;
        // Check the version before the full schema so future layouts get a clear error.
        let raw: toml::Table =
            toml::from_str(&text).map_err(|e| Error::format(&files.manifest, e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::format(&files.manifest, "missing format_version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                path: files.manifest.clone(),
                found: version.to_string(),
                expected: FORMAT_VERSION.to_string(),
            });
        }
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| Error::format(&files.manifest, e.to_string()))?;
        manifest.schedule.validate()?;
        if manifest.schedule.len() != manifest.length {
            return Err(Error::format(&files.manifest, "schedule length differs from length"));
        }
        let n = manifest.entries;
        let t = manifest.length;
        let params = read_f32(&files.params, n * NUM_PARAMS)?;
        let fingerprints = read_f32(&files.fingerprints, n * 2 * t)?;
        Ok(Dictionary {
            params: Array2::from_shape_vec((n, NUM_PARAMS), params).expect("size checked"),
            fingerprints: Array2::from_shape_vec((n, 2 * t), fingerprints).expect("size checked"),
            manifest,
        })
    }
}

/// The three file paths of a stored dictionary.
#[derive(Debug, Clone)]
pub struct DictionaryFiles {
    pub manifest: PathBuf,
    pub params: PathBuf,
    pub fingerprints: PathBuf,
}

impl DictionaryFiles {
    pub fn new(base: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = base.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        DictionaryFiles {
            manifest: with(".manifest"),
            params: with(".params.bin"),
            fingerprints: with(".fp.bin"),
        }
    }
}

fn write_f32<'a>(path: &Path, values: impl Iterator<Item = &'a f32>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32(path: &Path, count: usize) -> Result<Vec<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (count * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Simulate one fingerprint per tuple (in parallel; output order follows `params`).
pub fn build_from_params(
    params: &[TissueParams],
    schedule: &SequenceSchedule,
    fat_shift: f64,
    grid: Option<GridSpec>,
    seed_value: u64,
    provenance: &str,
) -> Result<Dictionary> {
    schedule.validate()?;
    let t = schedule.len();
    let fps: Vec<Fingerprint> = params
        .par_iter()
        .map(|p| sim::simulate_fingerprint(p, schedule, fat_shift))
        .collect::<Result<_>>()?;
    let n = params.len();
    let mut pm = Array2::<f32>::zeros((n, NUM_PARAMS));
    let mut fm = Array2::<f32>::zeros((n, 2 * t));
    for (i, (p, fp)) in params.iter().zip(&fps).enumerate() {
        for (j, v) in p.to_array().iter().enumerate() {
            pm[[i, j]] = *v as f32;
        }
        for (k, c) in fp.values().iter().enumerate() {
            fm[[i, 2 * k]] = c.re as f32;
            fm[[i, 2 * k + 1]] = c.im as f32;
        }
    }
    Ok(Dictionary {
        params: pm,
        fingerprints: fm,
        manifest: Manifest {
            format_version: FORMAT_VERSION.to_string(),
            entries: n,
            length: t,
            seed: seed_value,
            fat_shift,
            provenance: provenance.to_string(),
            schedule_sha256: schedule_hash(schedule, fat_shift),
            grid,
            schedule: schedule.clone(),
        },
    })
}

/// Simulate the full grid.
pub fn build_dictionary(
    spec: &GridSpec,
    schedule: &SequenceSchedule,
    fat_shift: f64,
    seed_value: u64,
) -> Result<Dictionary> {
    let params = expand_grid(spec)?;
    build_from_params(&params, schedule, fat_shift, Some(spec.clone()), seed_value, "grid")
}

/// Random partition: the first part gets `round(fraction * N)` entries.
/// Both parts keep the original relative order.
pub fn split_dictionary(d: &Dictionary, fraction: f64, seed_value: u64) -> Result<(Dictionary, Dictionary)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("fraction {fraction} outside (0, 1)")));
    }
    let (first, second) = split_indices(d.len(), fraction, seed_value);
    Ok((
        d.subset(&first, &format!("split({fraction},seed={seed_value},part=0)")),
        d.subset(&second, &format!("split({fraction},seed={seed_value},part=1)")),
    ))
}

pub fn split_indices(n: usize, fraction: f64, seed_value: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed_value, "split"));
    let k = (fraction * n as f64).round() as usize;
    let mut first = idx[..k].to_vec();
    let mut second = idx[k..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(v: f64) -> Vec<Segment> {
        vec![Segment(v, 1.0, v)]
    }

    fn tiny_spec() -> GridSpec {
        GridSpec {
            ff: vec![Segment(0.0, 0.5, 1.0)],
            t1_h2o: vec![Segment(800.0, 400.0, 1200.0)],
            t1_fat: single(300.0),
            delta_f: vec![Segment(-10.0, 10.0, 10.0)],
            b1: single(1.0),
        }
    }

    #[test]
    fn segment_counts() {
        assert_eq!(Segment(500.0, 100.0, 1700.0).count(), 13);
        assert_eq!(Segment(1900.0, 200.0, 3100.0).count(), 7);
        assert_eq!(Segment(0.0, 0.1, 1.0).count(), 11);
        assert_eq!(Segment(0.3, 0.1, 1.0).count(), 8);
        assert_eq!(Segment(0.35, 0.1, 0.95).count(), 7);
        assert_eq!(Segment(-115.0, 20.0, 105.0).count(), 12);
        assert_eq!(Segment(0.0, 0.4, 1.0).count(), 3);
        let last = Segment(0.0, 0.1, 1.0).values().last().unwrap();
        assert!((last - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_grid_counts() {
        assert_eq!(GridSpec::standard_training().count(), 396_000);
        assert_eq!(GridSpec::standard_testing().count(), 33_600);
        assert_eq!(expand_grid(&GridSpec::standard_testing()).unwrap().len(), 33_600);
    }

    #[test]
    fn degenerate_grid_has_one_entry() {
        let spec = GridSpec {
            ff: single(0.2),
            t1_h2o: single(1000.0),
            t1_fat: single(300.0),
            delta_f: single(0.0),
            b1: single(1.0),
        };
        assert_eq!(expand_grid(&spec).unwrap().len(), 1);
    }

    #[test]
    fn invalid_segments_rejected() {
        let mut spec = tiny_spec();
        spec.ff = vec![Segment(0.0, 0.0, 1.0)];
        assert!(matches!(expand_grid(&spec), Err(Error::Grid(_))));
        spec.ff = vec![Segment(1.0, 0.1, 0.0)];
        assert!(matches!(expand_grid(&spec), Err(Error::Grid(_))));
        spec.ff = vec![];
        assert!(matches!(expand_grid(&spec), Err(Error::Grid(_))));
    }

    #[test]
    fn expansion_order_is_lexicographic() {
        let p = expand_grid(&tiny_spec()).unwrap();
        assert_eq!(p.len(), 3 * 2 * 3);
        assert_eq!(p[0].to_array(), [0.0, 800.0, 300.0, -10.0, 1.0]);
        assert_eq!(p[1].to_array(), [0.0, 800.0, 300.0, 0.0, 1.0]);
        assert_eq!(p[3].to_array(), [0.0, 1200.0, 300.0, -10.0, 1.0]);
        assert_eq!(p[17].to_array(), [1.0, 1200.0, 300.0, 10.0, 1.0]);
    }

    #[test]
    fn build_matches_simulator() {
        let s = SequenceSchedule::reference(30);
        let d = build_dictionary(&tiny_spec(), &s, -420.0, 3).unwrap();
        assert_eq!(d.len(), 18);
        assert_eq!(d.length(), 30);
        for i in [0, 7, 17] {
            let fp = sim::simulate_fingerprint(&d.tissue(i), &s, -420.0).unwrap();
            for (a, b) in fp.values().iter().zip(d.fingerprint(i).values()) {
                assert!((a - b).norm() < 1e-6);
            }
        }
        let fm = d.feature_matrix();
        assert_eq!(fm.row(5).to_vec(), d.features(5));
    }

    #[test]
    fn split_standard_counts() {
        let (a, b) = split_indices(33_600, 0.2, 11);
        assert_eq!((a.len(), b.len()), (6720, 26_880));
    }

    #[test]
    fn split_small_and_seeded() {
        let s = SequenceSchedule::reference(8);
        let d = build_dictionary(&tiny_spec(), &s, -420.0, 0).unwrap();
        let two = d.subset(&[0, 1], "pair");
        let (a, b) = split_dictionary(&two, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert_ne!(a.params_row(0), b.params_row(0));

        assert_eq!(split_indices(1000, 0.3, 5), split_indices(1000, 0.3, 5));
        assert_ne!(split_indices(1000, 0.3, 5), split_indices(1000, 0.3, 6));
        assert!(matches!(split_dictionary(&d, 0.0, 1), Err(Error::Split(_))));
        assert!(matches!(split_dictionary(&d, 1.0, 1), Err(Error::Split(_))));
    }

    #[test]
    fn stratified_sample_covers_every_stratum() {
        let params = expand_grid(&GridSpec::standard_testing()).unwrap();
        let picked = stratified_sample(&params, 1000, 4);
        assert_eq!(picked.len(), 1000);
        let mut strata = std::collections::BTreeMap::new();
        for p in &picked {
            *strata.entry((p.ff.to_bits(), p.t1_h2o.to_bits())).or_insert(0) += 1;
        }
        assert_eq!(strata.len(), 100);
        assert!(strata.values().all(|&c| c == 10));
        assert_eq!(picked, stratified_sample(&params, 1000, 4));
    }

    #[test]
    fn persistence_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("dict");
        let s = SequenceSchedule::reference(16);
        let d = build_dictionary(&tiny_spec(), &s, -420.0, 9).unwrap();
        d.save(&base).unwrap();
        let loaded = Dictionary::load(&base).unwrap();
        assert_eq!(loaded, d);

        // identical inputs give identical files
        let again = dir.path().join("again");
        build_dictionary(&tiny_spec(), &s, -420.0, 9).unwrap().save(&again).unwrap();
        let (fa, fb) = (DictionaryFiles::new(&base), DictionaryFiles::new(&again));
        for (x, y) in [(&fa.manifest, &fb.manifest), (&fa.params, &fb.params), (&fa.fingerprints, &fb.fingerprints)] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }

        let mut fp = std::fs::read(&fa.fingerprints).unwrap();
        fp.truncate(fp.len() - 4);
        std::fs::write(&fa.fingerprints, &fp).unwrap();
        assert!(matches!(Dictionary::load(&base), Err(Error::SizeMismatch { .. })));

        d.save(&base).unwrap();
        let text = std::fs::read_to_string(&fa.manifest)
            .unwrap()
            .replace("format_version = \"1\"", "format_version = \"2\"");
        std::fs::write(&fa.manifest, text).unwrap();
        assert!(matches!(Dictionary::load(&base), Err(Error::Version { .. })));

        assert!(matches!(Dictionary::load(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn grid_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.toml");
        GridSpec::standard_training().save(&path).unwrap();
        assert_eq!(GridSpec::load(&path).unwrap(), GridSpec::standard_training());
    }

    fn segment_strategy() -> impl Strategy<Value = Segment> {
        (-50i32..50, 1u32..20, 0u32..6).prop_map(|(start, inc, steps)| {
            let (start, inc) = (start as f64 * 0.25, inc as f64 * 0.1);
            Segment(start, inc, start + steps as f64 * inc)
        })
    }

    proptest! {
        #[test]
        fn count_law_matches_nested_loops(
            segs in proptest::collection::vec(proptest::collection::vec(segment_strategy(), 1..3), 5)
        ) {
            // brute force: walk each segment by repeated addition
            let brute_axis = |segs: &[Segment]| -> usize {
                segs.iter().map(|s| {
                    let mut n = 0;
                    let mut v = s.0;
                    while v <= s.2 + s.1 * 1e-3 { n += 1; v += s.1; }
                    n
                }).sum()
            };
            let spec = GridSpec {
                ff: vec![Segment(0.0, 1.0, 0.0)],
                t1_h2o: segs[1].iter().map(|s| Segment(s.0 + 20.0, s.1, s.2 + 20.0)).collect(),
                t1_fat: segs[2].iter().map(|s| Segment(s.0 + 20.0, s.1, s.2 + 20.0)).collect(),
                delta_f: segs[3].clone(),
                b1: segs[4].iter().map(|s| Segment(s.0 + 20.0, s.1, s.2 + 20.0)).collect(),
            };
            let expected: usize = spec.segments().iter().map(|s| brute_axis(s)).product();
            prop_assert_eq!(expand_grid(&spec).unwrap().len(), expected);
            prop_assert_eq!(spec.count(), expected);
        }

        #[test]
        fn split_is_a_partition(n in 1usize..400, fraction in 0.01f64..0.99, seed_value in any::<u64>()) {
            let (a, b) = split_indices(n, fraction, seed_value);
            prop_assert_eq!(a.len(), (fraction * n as f64).round() as usize);
            let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
