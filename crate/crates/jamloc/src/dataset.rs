//! Canonical sample model, on-disk dataset format, deterministic synthetic
//! generator, and reproducible stratified splits.
//!
//! A dataset on disk is a directory holding `manifest.json` and `data.csv`.
//! One `CirSample` is one reception event at one receiver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{JamlocError, Result};

pub const CIR_TAPS: usize = 300;
pub const NUM_DIAGNOSTICS: usize = 11;
pub const DIAGNOSTIC_NAMES: [&str; NUM_DIAGNOSTICS] = [
    "PHE",
    "RSL",
    "CRCG",
    "CRCB",
    "PREJ",
    "RSSI",
    "IpatovPeak",
    "IpatovPower",
    "IpatovF1",
    "IpatovF2",
    "IpatovF3",
];

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "source" => Some(Domain::Source),
            "target" => Some(Domain::Target),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// One reception event: 300 complex CIR taps, 11 diagnostic readings, domain
/// tag, and ground-truth jammer coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CirSample {
    pub sample_id: u64,
    pub receiver_id: u8,
    pub diagnostics: [f64; NUM_DIAGNOSTICS],
    pub cir: Vec<(f64, f64)>, // (re, im), exactly 300 taps
    pub position_id: u32,
    pub x_cm: f64,
    pub y_cm: f64,
    pub domain: Domain,
}

#[derive(Clone, Debug)]
pub struct SampleSet {
    pub samples: Vec<CirSample>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub domain: String,
    pub provenance: Provenance,
    pub seed: Option<u64>,
    pub sample_count: usize,
}

/// Disjoint train/val/test index lists into a `SampleSet`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub strategy: String,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// On-disk format
// ---------------------------------------------------------------------------

fn expected_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["sample_id".into(), "receiver_id".into()];
    h.extend(DIAGNOSTIC_NAMES.iter().map(|s| s.to_string()));
    for i in 0..CIR_TAPS {
        h.push(format!("cir_re_{i:03}"));
    }
    for i in 0..CIR_TAPS {
        h.push(format!("cir_im_{i:03}"));
    }
    h.extend(["position_id".into(), "x_cm".into(), "y_cm".into(), "domain".into()]);
    h
}

/// Write a dataset directory (`manifest.json` + `data.csv`). Floats are
/// rendered with shortest round-trip formatting, so write-then-load is exact.
pub fn write_dataset(set: &SampleSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let domain = set
        .samples
        .first()
        .map(|s| s.domain.as_str())
        .unwrap_or("source");
    let manifest = Manifest {
        schema_version: DATASET_SCHEMA_VERSION,
        domain: domain.into(),
        provenance: set.provenance,
        seed: set.seed,
        sample_count: set.samples.len(),
    };
    let mf = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(mf, &manifest)?;

    let file = std::fs::File::create(dir.join("data.csv"))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", expected_header().join(","))?;
    let mut line = String::new();
    for s in &set.samples {
        line.clear();
        write!(line, "{},{}", s.sample_id, s.receiver_id).unwrap();
        for d in &s.diagnostics {
            write!(line, ",{d}").unwrap();
        }
        for (re, _) in &s.cir {
            write!(line, ",{re}").unwrap();
        }
        for (_, im) in &s.cir {
            write!(line, ",{im}").unwrap();
        }
        write!(line, ",{},{},{},{}", s.position_id, s.x_cm, s.y_cm, s.domain.as_str()).unwrap();
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Load a dataset directory. Malformed rows abort with their row index; they
/// are never silently dropped.
pub fn load_dataset(dir: &Path) -> Result<SampleSet> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(JamlocError::Format(format!(
            "missing manifest.json in {}",
            dir.display()
        )));
    }
    let manifest: Manifest = serde_json::from_reader(std::fs::File::open(manifest_path)?)?;
    if manifest.schema_version != DATASET_SCHEMA_VERSION {
        return Err(JamlocError::Format(format!(
            "unsupported schema version {}",
            manifest.schema_version
        )));
    }
    let data_path = dir.join("data.csv");
    if !data_path.exists() {
        return Err(JamlocError::Format(format!(
            "missing data.csv in {}",
            dir.display()
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&data_path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let expected = expected_header();
    if header != expected {
        return Err(JamlocError::Format(format!(
            "schema mismatch: expected {} columns starting {:?}, got {} starting {:?}",
            expected.len(),
            &expected[..3],
            header.len(),
            header.get(..3.min(header.len()))
        )));
    }
    let ncols = expected.len();
    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != ncols {
            return Err(JamlocError::MalformedRow {
                row: row_idx,
                reason: format!("expected {ncols} columns, got {}", record.len()),
            });
        }
        let parse_f = |i: usize| -> std::result::Result<f64, JamlocError> {
            record[i]
                .parse::<f64>()
                .map_err(|e| JamlocError::MalformedRow {
                    row: row_idx,
                    reason: format!("column {}: {e}", expected[i]),
                })
        };
        let sample_id = record[0]
            .parse::<u64>()
            .map_err(|e| JamlocError::MalformedRow {
                row: row_idx,
                reason: format!("sample_id: {e}"),
            })?;
        let receiver_id = record[1]
            .parse::<u8>()
            .map_err(|e| JamlocError::MalformedRow {
                row: row_idx,
                reason: format!("receiver_id: {e}"),
            })?;
        if receiver_id > 3 {
            return Err(JamlocError::MalformedRow {
                row: row_idx,
                reason: format!("receiver_id {receiver_id} out of 0..=3"),
            });
        }
        let mut diagnostics = [0.0; NUM_DIAGNOSTICS];
        for (j, d) in diagnostics.iter_mut().enumerate() {
            *d = parse_f(2 + j)?;
        }
        let base = 2 + NUM_DIAGNOSTICS;
        let mut cir = Vec::with_capacity(CIR_TAPS);
        for t in 0..CIR_TAPS {
            cir.push((parse_f(base + t)?, parse_f(base + CIR_TAPS + t)?));
        }
        let tail = base + 2 * CIR_TAPS;
        let position_id =
            record[tail]
                .parse::<u32>()
                .map_err(|e| JamlocError::MalformedRow {
                    row: row_idx,
                    reason: format!("position_id: {e}"),
                })?;
        let x_cm = parse_f(tail + 1)?;
        let y_cm = parse_f(tail + 2)?;
        if !x_cm.is_finite() || !y_cm.is_finite() {
            return Err(JamlocError::MalformedRow {
                row: row_idx,
                reason: "non-finite ground-truth coordinates".into(),
            });
        }
        let domain = Domain::parse(&record[tail + 3]).ok_or_else(|| JamlocError::MalformedRow {
            row: row_idx,
            reason: format!("unknown domain tag {:?}", &record[tail + 3]),
        })?;
        samples.push(CirSample {
            sample_id,
            receiver_id,
            diagnostics,
            cir,
            position_id,
            x_cm,
            y_cm,
            domain,
        });
    }
    Ok(SampleSet {
        samples,
        provenance: manifest.provenance,
        seed: manifest.seed,
    })
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

/// Configuration of the synthetic CIR generator. The CIR is a sum of
/// geometrically consistent decaying multipath arrivals: one direct path and
/// four wall reflections (image sources), plus optional clutter taps and
/// additive complex Gaussian noise. Target-domain configs perturb reflection
/// coefficients and add clutter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub grid_w_cm: f64,
    pub grid_h_cm: f64,
    pub receivers: Vec<(f64, f64)>,
    pub positions: Vec<(f64, f64)>,
    pub rounds_per_position: usize,
    pub domain: Domain,
    /// cm of propagation per CIR tap.
    pub tap_cm: f64,
    pub noise_sigma: f64,
    pub reflection_coeff: f64,
    /// Domain-shift knob: scales all reflection coefficients.
    pub reflection_scale: f64,
    /// Domain-shift knob: extra clutter arrivals per sample.
    pub clutter_taps: usize,
    /// Domain-shift knob: additive drift applied to the diagnostics.
    pub diag_shift: f64,
}

impl SynthConfig {
    pub fn new(positions: Vec<(f64, f64)>, rounds_per_position: usize, domain: Domain) -> Self {
        Self {
            grid_w_cm: 300.0,
            grid_h_cm: 500.0,
            receivers: vec![(0.0, 0.0), (300.0, 0.0), (0.0, 500.0), (300.0, 500.0)],
            positions,
            rounds_per_position,
            domain,
            tap_cm: 30.0,
            noise_sigma: 0.004,
            reflection_coeff: 0.4,
            reflection_scale: 1.0,
            clutter_taps: 0,
            diag_shift: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds_per_position == 0 {
            return Err(JamlocError::Config(
                "rounds_per_position must be positive".into(),
            ));
        }
        for (i, &(x, y)) in self.positions.iter().enumerate() {
            if !(0.0..=self.grid_w_cm).contains(&x) || !(0.0..=self.grid_h_cm).contains(&y) {
                return Err(JamlocError::Config(format!(
                    "jammer position {i} ({x}, {y}) outside grid bounds"
                )));
            }
        }
        Ok(())
    }
}

/// Evenly spaced grid of `nx * ny` jammer positions, inset from the walls.
pub fn grid_positions(nx: usize, ny: usize, w: f64, h: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let x = w * (ix as f64 + 1.0) / (nx as f64 + 1.0);
            let y = h * (iy as f64 + 1.0) / (ny as f64 + 1.0);
            out.push((x, y));
        }
    }
    out
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Path amplitude at range `d` cm.
fn path_amp(d: f64) -> f64 {
    1.0 / (1.0 + d / 100.0)
}

/// Geometric first-path tap index for a jammer/receiver pair.
pub fn first_path_tap(jammer: (f64, f64), receiver: (f64, f64), tap_cm: f64) -> usize {
    (dist(jammer, receiver) / tap_cm).round() as usize
}

/// Image-source positions of `p` mirrored across the four walls.
fn wall_images(p: (f64, f64), w: f64, h: f64) -> [(f64, f64); 4] {
    [
        (-p.0, p.1),
        (2.0 * w - p.0, p.1),
        (p.0, -p.1),
        (p.0, 2.0 * h - p.1),
    ]
}

const CARRIER_WAVELENGTH_CM: f64 = 4.6;
const PULSE_WIDTH_TAPS: f64 = 0.8;

fn add_arrival(cir: &mut [(f64, f64)], delay_taps: f64, amp: f64, phase: f64) {
    let lo = (delay_taps - 3.0).floor().max(0.0) as usize;
    let hi = ((delay_taps + 3.0).ceil() as usize).min(cir.len().saturating_sub(1));
    for n in lo..=hi {
        let d = n as f64 - delay_taps;
        let a = amp * (-d * d / (2.0 * PULSE_WIDTH_TAPS * PULSE_WIDTH_TAPS)).exp();
        cir[n].0 += a * phase.cos();
        cir[n].1 += a * phase.sin();
    }
}

/// Deterministic synthetic dataset: same `(config, seed)` gives a bit-identical
/// `SampleSet`.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<SampleSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.noise_sigma).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut samples = Vec::with_capacity(
        config.positions.len() * config.rounds_per_position * config.receivers.len(),
    );
    let mut sample_id = 0u64;
    for (pos_idx, &jammer) in config.positions.iter().enumerate() {
        let images = wall_images(jammer, config.grid_w_cm, config.grid_h_cm);
        for _round in 0..config.rounds_per_position {
            for (rx_idx, &rx) in config.receivers.iter().enumerate() {
                // global phase offset models the rotating legitimate tag
                let global_phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let d0 = dist(jammer, rx);
                let a0 = path_amp(d0);
                let mut cir = vec![(0.0f64, 0.0f64); CIR_TAPS];
                add_arrival(
                    &mut cir,
                    d0 / config.tap_cm,
                    a0,
                    global_phase - std::f64::consts::TAU * d0 / CARRIER_WAVELENGTH_CM,
                );
                let coeff = config.reflection_coeff * config.reflection_scale;
                for &img in &images {
                    let dr = dist(img, rx);
                    add_arrival(
                        &mut cir,
                        dr / config.tap_cm,
                        coeff * path_amp(dr),
                        global_phase - std::f64::consts::TAU * dr / CARRIER_WAVELENGTH_CM,
                    );
                }
                for _ in 0..config.clutter_taps {
                    let delay = d0 / config.tap_cm + rng.gen_range(2.0..40.0);
                    let amp = 0.35 * a0 * rng.gen_range(0.3..1.0);
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    add_arrival(&mut cir, delay, amp, phase);
                }
                for tap in cir.iter_mut() {
                    tap.0 += noise.sample(&mut rng);
                    tap.1 += noise.sample(&mut rng);
                }

                let energy: f64 = cir.iter().map(|(re, im)| re * re + im * im).sum();
                let ft = first_path_tap(jammer, rx, config.tap_cm);
                let window_energy = |lo: usize, hi: usize| -> f64 {
                    cir[lo.min(CIR_TAPS - 1)..hi.min(CIR_TAPS)]
                        .iter()
                        .map(|(re, im)| re * re + im * im)
                        .sum()
                };
                let shift = config.diag_shift;
                let mut n = |sigma: f64| sigma * unit.sample(&mut rng);
                let diagnostics = [
                    5.0 + 0.040 * d0 + shift * 2.0 + n(0.5),
                    2.0 + 0.050 * d0 + shift * 3.0 + n(0.4),
                    100.0 - 0.100 * d0 - shift * 4.0 + n(1.0),
                    1.0 + 0.060 * d0 + shift * 2.5 + n(0.8),
                    3.0 + 0.030 * d0 + shift * 1.5 + n(1.0),
                    -40.0 - 20.0 * (d0 / 100.0 + 0.1).log10() - shift + n(1.5),
                    a0 * (1.0 + n(0.05)),
                    energy * (1.0 + n(0.05)),
                    window_energy(ft.saturating_sub(1), ft + 2) * (1.0 + n(0.05)),
                    window_energy(ft + 2, ft + 8) * (1.0 + n(0.05)),
                    window_energy(ft + 8, ft + 20) * (1.0 + n(0.05)),
                ];
                samples.push(CirSample {
                    sample_id,
                    receiver_id: rx_idx as u8,
                    diagnostics,
                    cir,
                    position_id: pos_idx as u32,
                    x_cm: jammer.0,
                    y_cm: jammer.1,
                    domain: config.domain,
                });
                sample_id += 1;
            }
        }
    }
    Ok(SampleSet {
        samples,
        provenance: Provenance::Synthetic,
        seed: Some(seed),
    })
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// Largest-remainder partition of `n` items by `ratios`.
fn partition_counts(n: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let r = [ratios.0, ratios.1, ratios.2];
    let exact: Vec<f64> = r.iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut rem: i64 = n as i64 - counts.iter().sum::<usize>() as i64;
    // distribute leftovers by descending fractional part, ties in order
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while rem > 0 {
        counts[order[i % 3]] += 1;
        rem -= 1;
        i += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Stratified-by-position split. Pure function of `(set, ratios, seed)`.
pub fn split(set: &SampleSet, ratios: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let (a, b, c) = ratios;
    if a < 0.0 || b < 0.0 || c < 0.0 || a + b + c <= 0.0 {
        return Err(JamlocError::Invalid("ratios must be non-negative".into()));
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(JamlocError::Invalid(format!(
            "ratios must sum to 1, got {}",
            a + b + c
        )));
    }
    let nonempty = [a, b, c].iter().filter(|&&r| r > 0.0).count();
    let mut by_pos: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in set.samples.iter().enumerate() {
        by_pos.entry(s.position_id).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (pos, mut idxs) in by_pos {
        if idxs.len() < nonempty {
            return Err(JamlocError::Invalid(format!(
                "position {pos} has {} samples but {nonempty} non-empty partitions",
                idxs.len()
            )));
        }
        // Fisher-Yates with the shared stream; position order is fixed (BTreeMap).
        for i in (1..idxs.len()).rev() {
            let j = rng.gen_range(0..=i);
            idxs.swap(i, j);
        }
        let [nt, nv, _] = partition_counts(idxs.len(), ratios);
        train.extend_from_slice(&idxs[..nt]);
        val.extend_from_slice(&idxs[nt..nt + nv]);
        test.extend_from_slice(&idxs[nt + nv..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Splits {
        train,
        val,
        test,
        strategy: format!("stratified_position({a},{b},{c})"),
        seed,
    })
}

/// Reserve `n` samples stratified by position (the evaluation hold-out);
/// returns `(holdout, rest)` index lists.
pub fn stratified_holdout(set: &SampleSet, n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n > set.samples.len() {
        return Err(JamlocError::Invalid(format!(
            "hold-out of {n} requested from {} samples",
            set.samples.len()
        )));
    }
    let mut by_pos: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in set.samples.iter().enumerate() {
        by_pos.entry(s.position_id).or_default().push(i);
    }
    let total = set.samples.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holdout = Vec::new();
    let mut rest = Vec::new();
    let mut assigned = 0usize;
    let npos = by_pos.len();
    for (k, (_pos, mut idxs)) in by_pos.into_iter().enumerate() {
        for i in (1..idxs.len()).rev() {
            let j = rng.gen_range(0..=i);
            idxs.swap(i, j);
        }
        let want = if k + 1 == npos {
            n - assigned
        } else {
            ((idxs.len() as f64 / total) * n as f64).round() as usize
        };
        let want = want.min(idxs.len());
        assigned += want;
        holdout.extend_from_slice(&idxs[..want]);
        rest.extend_from_slice(&idxs[want..]);
    }
    holdout.sort_unstable();
    rest.sort_unstable();
    Ok((holdout, rest))
}
