//! Per-slot unknowns revealed by the environment: task demands, channel gains
//! and linear delay coefficients.
//!
//! Draws are counter based: the sample for slot `t` is a pure function of
//! `(seed, t)`, so any slot can be regenerated out of order.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::Topology;

/// Closed real interval `[lo, hi]`, serialized as a two element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidConfig(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        (self.lo + (self.hi - self.lo) * u).min(self.hi)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandSource {
    Uniform(Interval),
    /// CSV trace, min-max rescaled into `scale_to` when given.
    Trace {
        path: PathBuf,
        #[serde(default)]
        scale_to: Option<Interval>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(default = "EnvConfig::default_gain_range")]
    pub gain_range: Interval,
    #[serde(default = "EnvConfig::default_delay_range")]
    pub cloud_delay_range: Interval,
    #[serde(default = "EnvConfig::default_demand")]
    pub demand: DemandSource,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            gain_range: Self::default_gain_range(),
            cloud_delay_range: Self::default_delay_range(),
            demand: Self::default_demand(),
            seed: 0,
        }
    }
}

impl EnvConfig {
    fn default_gain_range() -> Interval {
        Interval { lo: 8.0, hi: 15.0 }
    }

    fn default_delay_range() -> Interval {
        Interval { lo: 3.0, hi: 10.0 }
    }

    fn default_demand() -> DemandSource {
        DemandSource::Uniform(Interval { lo: 1.0, hi: 10.0 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.gain_range.lo <= 0.0 {
            return Err(Error::InvalidConfig("gain range must be positive".into()));
        }
        if self.cloud_delay_range.lo <= 0.0 {
            return Err(Error::InvalidConfig("delay range must be positive".into()));
        }
        match &self.demand {
            DemandSource::Uniform(i) if i.lo < 0.0 => Err(Error::InvalidConfig(
                "demand range must be non-negative".into(),
            )),
            DemandSource::Trace {
                scale_to: Some(i), ..
            } if i.lo < 0.0 || i.lo >= i.hi => Err(Error::InvalidConfig(
                "trace scaling target must satisfy 0 <= lo < hi".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// The unknowns of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSample<F> {
    num_bs: usize,
    num_servers: usize,
    /// `r_d`, one per device.
    pub requests: Vec<F>,
    /// `alpha_db`, `D x B` row major.
    pub gain_db: Vec<F>,
    /// `alpha_bs`, `B x S` row major.
    pub gain_bs: Vec<F>,
    /// `d_bC`, one per base station.
    pub cloud_delay_b: Vec<F>,
    /// `d_sC`, one per server.
    pub cloud_delay_s: Vec<F>,
    /// Wired rerouting delay `d_ss'`, `S x S` row major (diagonal unused).
    pub wired_delay: Vec<F>,
}

impl<F: Scalar> EnvSample<F> {
    /// A sample with every gain equal to `gain`, every delay equal to `delay`
    /// and the given demands.
    pub fn constant(topology: &Topology, requests: Vec<F>, gain: F, delay: F) -> Self {
        let (d, b, s) = (
            topology.num_devices(),
            topology.num_bs(),
            topology.num_servers(),
        );
        assert_eq!(requests.len(), d);
        EnvSample {
            num_bs: b,
            num_servers: s,
            requests,
            gain_db: vec![gain; d * b],
            gain_bs: vec![gain; b * s],
            cloud_delay_b: vec![delay; b],
            cloud_delay_s: vec![delay; s],
            wired_delay: vec![delay; s * s],
        }
    }

    #[inline]
    pub fn gain_db(&self, d: usize, b: usize) -> F {
        self.gain_db[d * self.num_bs + b]
    }

    #[inline]
    pub fn gain_bs(&self, b: usize, s: usize) -> F {
        self.gain_bs[b * self.num_servers + s]
    }

    #[inline]
    pub fn wired_delay(&self, s: usize, to: usize) -> F {
        self.wired_delay[s * self.num_servers + to]
    }

    pub fn num_devices(&self) -> usize {
        self.requests.len()
    }

    pub fn all_finite(&self) -> bool {
        self.requests
            .iter()
            .chain(&self.gain_db)
            .chain(&self.gain_bs)
            .chain(&self.cloud_delay_b)
            .chain(&self.cloud_delay_s)
            .chain(&self.wired_delay)
            .all(|v| v.is_finite())
    }

    pub fn cast<G: Scalar>(&self) -> EnvSample<G> {
        let c = |v: &Vec<F>| v.iter().map(|x| G::of(x.to_f64_lossy())).collect();
        EnvSample {
            num_bs: self.num_bs,
            num_servers: self.num_servers,
            requests: c(&self.requests),
            gain_db: c(&self.gain_db),
            gain_bs: c(&self.gain_bs),
            cloud_delay_b: c(&self.cloud_delay_b),
            cloud_delay_s: c(&self.cloud_delay_s),
            wired_delay: c(&self.wired_delay),
        }
    }

    /// Worst case over a sequence for the constraints: the largest demand and
    /// the smallest gain per entry. Delays are averaged (they only enter the
    /// cost).
    pub fn constraint_envelope(samples: &[EnvSample<F>]) -> EnvSample<F> {
        assert!(!samples.is_empty());
        let mut out = samples[0].clone();
        for s in &samples[1..] {
            for (o, v) in out.requests.iter_mut().zip(&s.requests) {
                *o = o.max(*v);
            }
            for (o, v) in out.gain_db.iter_mut().zip(&s.gain_db) {
                *o = o.min(*v);
            }
            for (o, v) in out.gain_bs.iter_mut().zip(&s.gain_bs) {
                *o = o.min(*v);
            }
        }
        out
    }
}

/// Demand vectors over slots, one column per device.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTrace {
    rows: Vec<Vec<f64>>,
}

impl DemandTrace {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 {
            return Err(Error::InvalidConfig("empty demand trace".into()));
        }
        for row in &rows {
            if row.len() != width {
                return Err(Error::InvalidConfig("ragged demand trace".into()));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidConfig(
                    "demands must be finite and non-negative".into(),
                ));
            }
        }
        Ok(DemandTrace { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_devices(&self) -> usize {
        self.rows[0].len()
    }

    /// Demands of slot `t` (1-based).
    pub fn slot(&self, t: usize) -> Result<&[f64]> {
        if t == 0 || t > self.rows.len() {
            return Err(Error::TraceExhausted {
                slot: t,
                len: self.rows.len(),
            });
        }
        Ok(&self.rows[t - 1])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Reads a headerless CSV with one row per slot and `num_devices` columns.
pub fn load_trace(path: &Path, num_devices: usize) -> Result<DemandTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, num_devices, path)
}

pub(crate) fn parse_trace(text: &str, num_devices: usize, path: &Path) -> Result<DemandTrace> {
    let err = |line: usize, msg: String| Error::TraceParse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| err(line, e.to_string()))?;
        if record.len() != num_devices {
            return Err(err(
                line,
                format!("expected {num_devices} columns, found {}", record.len()),
            ));
        }
        let row = record
            .iter()
            .map(|f| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| err(line, format!("not a number: {f:?}")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(err(line, format!("negative or non-finite demand {v}")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err(0, "trace is empty".into()));
    }
    DemandTrace::new(rows)
}

/// Joint affine min-max rescaling of every entry into `target`. A constant
/// trace maps to the interval midpoint.
pub fn scale_trace(trace: &DemandTrace, target: Interval) -> Result<DemandTrace> {
    if target.lo >= target.hi {
        return Err(Error::InvalidConfig(format!(
            "scaling target [{}, {}] must have lo < hi",
            target.lo, target.hi
        )));
    }
    let (min, max) = trace
        .rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let rows = if max > min {
        let k = (target.hi - target.lo) / (max - min);
        trace
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| (target.lo + k * (v - min)).clamp(target.lo, target.hi))
                    .collect()
            })
            .collect()
    } else {
        let mid = target.midpoint();
        trace.rows.iter().map(|r| vec![mid; r.len()]).collect()
    };
    Ok(DemandTrace { rows })
}

/// Ranges every sample of an [`Environment`] stays within.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvRanges {
    pub gain: Interval,
    pub delay: Interval,
    pub demand: Interval,
}

#[derive(Debug, Clone)]
enum Demands {
    Uniform(Interval),
    Trace(DemandTrace),
}

/// Environment generator bound to one topology.
#[derive(Debug, Clone)]
pub struct Environment {
    num_devices: usize,
    num_bs: usize,
    num_servers: usize,
    gain_range: Interval,
    delay_range: Interval,
    demands: Demands,
    seed: u64,
}

impl Environment {
    /// Builds the generator, loading (and rescaling) a trace when configured.
    pub fn new(config: &EnvConfig, topology: &Topology) -> Result<Self> {
        config.validate()?;
        let demands = match &config.demand {
            DemandSource::Uniform(i) => Demands::Uniform(*i),
            DemandSource::Trace { path, scale_to } => {
                let raw = load_trace(path, topology.num_devices())?;
                Demands::Trace(match scale_to {
                    Some(target) => scale_trace(&raw, *target)?,
                    None => raw,
                })
            }
        };
        Ok(Self::assemble(config, topology, demands))
    }

    /// Uses an in-memory trace as the demand source; `config.demand` is ignored.
    pub fn with_trace(config: &EnvConfig, topology: &Topology, trace: DemandTrace) -> Result<Self> {
        config.validate()?;
        if trace.num_devices() != topology.num_devices() {
            return Err(Error::InvalidConfig(format!(
                "trace has {} columns but topology has {} devices",
                trace.num_devices(),
                topology.num_devices()
            )));
        }
        Ok(Self::assemble(config, topology, Demands::Trace(trace)))
    }

    fn assemble(config: &EnvConfig, topology: &Topology, demands: Demands) -> Self {
        Environment {
            num_devices: topology.num_devices(),
            num_bs: topology.num_bs(),
            num_servers: topology.num_servers(),
            gain_range: config.gain_range,
            delay_range: config.cloud_delay_range,
            demands,
            seed: config.seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The trace driving demands, if any.
    pub fn trace(&self) -> Option<&DemandTrace> {
        match &self.demands {
            Demands::Trace(t) => Some(t),
            Demands::Uniform(_) => None,
        }
    }

    pub fn ranges(&self) -> EnvRanges {
        let demand = match &self.demands {
            Demands::Uniform(i) => *i,
            Demands::Trace(t) => {
                let (lo, hi) = t
                    .rows
                    .iter()
                    .flatten()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    });
                Interval { lo, hi }
            }
        };
        EnvRanges {
            gain: self.gain_range,
            delay: self.delay_range,
            demand,
        }
    }

    /// Unknowns of slot `t` (1-based).
    pub fn sample<F: Scalar>(&self, t: usize) -> Result<EnvSample<F>> {
        if t == 0 {
            return Err(Error::InvalidConfig("slots are numbered from 1".into()));
        }
        let (d, b, s) = (self.num_devices, self.num_bs, self.num_servers);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t as u64);

        let mut draw = |n: usize, range: Interval| -> Vec<F> {
            (0..n).map(|_| F::of(range.draw(&mut rng))).collect()
        };
        let gain_db = draw(d * b, self.gain_range);
        let gain_bs = draw(b * s, self.gain_range);
        let cloud_delay_b = draw(b, self.delay_range);
        let cloud_delay_s = draw(s, self.delay_range);
        let wired_delay = draw(s * s, self.delay_range);
        let requests = match &self.demands {
            Demands::Uniform(range) => draw(d, *range),
            Demands::Trace(trace) => trace.slot(t)?.iter().map(|&v| F::of(v)).collect(),
        };
        Ok(EnvSample {
            num_bs: b,
            num_servers: s,
            requests,
            gain_db,
            gain_bs,
            cloud_delay_b,
            cloud_delay_s,
            wired_delay,
        })
    }

    /// Samples of slots `1..=horizon`.
    pub fn sequence<F: Scalar>(&self, horizon: usize) -> Result<Vec<EnvSample<F>>> {
        (1..=horizon).map(|t| self.sample(t)).collect()
    }
}
