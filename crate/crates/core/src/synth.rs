//! Seeded synthetic sensor streams with a known error law.
//!
//! The reference signal is a diurnal sinusoid plus an AR(1) component. The
//! sensor reads
//!
//! ```text
//! s = a·y + b·y·g(rh) + c·(t − t0) + ε,   ε ~ N(0, (σ0 + σ1·rh)²)
//! ```
//!
//! with the hygroscopic gain `g(rh) = (1 − 50/103) / (1 − rh/103)`, so that
//! `g(50) = 1`. Optional blocks add sensor inertia and vehicle motion.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleRecord;
use crate::error::{Error, Result};

const DAY: f64 = 86_400.0;

pub fn hygroscopic_gain(rh: f64) -> f64 {
    (1.0 - 50.0 / 103.0) / (1.0 - rh / 103.0)
}

/// Diurnal sinusoid plus stationary AR(1) noise, clamped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub mean: f64,
    pub diurnal_amplitude: f64,
    /// Phase offset in seconds.
    pub phase: f64,
    /// AR(1) coefficient per sample.
    pub ar_coef: f64,
    /// Marginal standard deviation of the AR(1) component.
    pub ar_std: f64,
    pub min: f64,
    pub max: f64,
}

impl Process {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.min < self.max
            && (0.0..1.0).contains(&self.ar_coef)
            && self.ar_std >= 0.0
            && self.diurnal_amplitude >= 0.0
            && [self.mean, self.phase].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::BadConfig(format!("invalid `{name}` process")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseLaw {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t0: f64,
    pub sigma0: f64,
    pub sigma1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityLaw {
    /// Speed process while moving, km/h.
    pub speed: Process,
    /// Per-sample probability of coming to a stop.
    pub stop_probability: f64,
    /// Per-sample probability of moving off again once stopped.
    pub go_probability: f64,
    /// Scale of the spike added to `s` on the first sample after a stop.
    pub transient_gain: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Seconds between samples: 1 or 60.
    pub resolution: i64,
    pub start: i64,
    pub y: Process,
    pub rh: Process,
    pub t: Process,
    pub response: ResponseLaw,
    /// Exponential smoothing weight on the previous reading, in `[0, 1)`.
    pub lag: Option<f64>,
    pub mobility: Option<MobilityLaw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Noiseless,
    Mobile,
    Heteroscedastic,
    HumidNoise,
    Lagged,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(Self::Noiseless),
            "mobile" => Ok(Self::Mobile),
            "heteroscedastic" => Ok(Self::Heteroscedastic),
            "humid_noise" => Ok(Self::HumidNoise),
            "lagged" => Ok(Self::Lagged),
            other => Err(Error::BadConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

impl SynthConfig {
    pub fn scenario(kind: Scenario, n: usize, seed: u64) -> Self {
        match kind {
            Scenario::Noiseless => Self::noiseless(n, seed),
            Scenario::Mobile => Self::mobile(n, seed),
            Scenario::Heteroscedastic => Self::heteroscedastic(n, seed),
            Scenario::HumidNoise => Self::humid_noise(n, seed),
            Scenario::Lagged => Self::lagged(n, seed),
        }
    }

    /// Minute-resolution stream shaped like a vehicle campaign in a humid
    /// climate. No mobility block.
    fn base(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            resolution: 60,
            start: 1_600_000_000,
            y: Process {
                mean: 35.9,
                diurnal_amplitude: 9.0,
                phase: 0.0,
                ar_coef: 0.95,
                ar_std: 8.0,
                min: 7.7,
                max: 69.9,
            },
            rh: Process {
                mean: 71.6,
                diurnal_amplitude: 7.0,
                phase: DAY / 2.0,
                ar_coef: 0.97,
                ar_std: 4.0,
                min: 51.0,
                max: 91.0,
            },
            t: Process {
                mean: 30.6,
                diurnal_amplitude: 2.5,
                phase: 0.0,
                ar_coef: 0.97,
                ar_std: 1.0,
                min: 26.0,
                max: 36.2,
            },
            response: ResponseLaw {
                a: 0.35,
                b: 0.1,
                c: 0.3,
                t0: 30.0,
                sigma0: 0.5,
                sigma1: 0.02,
            },
            lag: None,
            mobility: None,
        }
    }

    /// `s ≡ y`: unit gain, no humidity or temperature coupling, no noise.
    pub fn noiseless(n: usize, seed: u64) -> Self {
        let mut cfg = Self::base(n, seed);
        cfg.response = ResponseLaw {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            t0: 0.0,
            sigma0: 0.0,
            sigma1: 0.0,
        };
        cfg
    }

    /// Vehicle campaign with stops, start transients and a GPS track.
    pub fn mobile(n: usize, seed: u64) -> Self {
        let mut cfg = Self::base(n, seed);
        cfg.mobility = Some(MobilityLaw {
            speed: Process {
                mean: 5.1,
                diurnal_amplitude: 0.0,
                phase: 0.0,
                ar_coef: 0.8,
                ar_std: 2.38,
                min: 2.4,
                max: 29.4,
            },
            stop_probability: 0.03,
            go_probability: 0.3,
            transient_gain: 15.0,
            origin_lat: 45.0,
            origin_lon: 7.0,
        });
        cfg
    }

    /// Strong hygroscopic gain over a wide humidity range, noise spread
    /// proportional to humidity, and a reference that varies less than the
    /// humidity-driven part of the reading.
    pub fn heteroscedastic(n: usize, seed: u64) -> Self {
        let mut cfg = Self::base(n, seed);
        cfg.y.ar_std = 5.0;
        cfg.y.diurnal_amplitude = 3.0;
        cfg.rh.ar_std = 15.0;
        cfg.response.b = 2.0;
        cfg.response.sigma0 = 0.0;
        cfg.response.sigma1 = 0.01;
        cfg
    }

    /// Linear sensor whose only error is noise growing with humidity.
    pub fn humid_noise(n: usize, seed: u64) -> Self {
        let mut cfg = Self::base(n, seed);
        cfg.rh.mean = 60.0;
        cfg.rh.ar_std = 20.0;
        cfg.rh.min = 10.0;
        cfg.response.b = 0.0;
        cfg.response.sigma0 = 0.0;
        cfg.response.sigma1 = 0.01;
        cfg
    }

    /// Sensor inertia: readings trail the reference by about a sample.
    pub fn lagged(n: usize, seed: u64) -> Self {
        let mut cfg = Self::base(n, seed);
        cfg.lag = Some(0.6);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::BadConfig("n must be at least 1".into()));
        }
        if self.resolution != 1 && self.resolution != 60 {
            return Err(Error::BadConfig("resolution must be 1 or 60 seconds".into()));
        }
        self.y.validate("y")?;
        self.rh.validate("rh")?;
        self.t.validate("t")?;
        if self.y.min <= 0.0 {
            return Err(Error::BadConfig("y must stay positive".into()));
        }
        if self.rh.min < 0.0 || self.rh.max > 100.0 {
            return Err(Error::BadConfig("rh must stay within [0, 100]".into()));
        }
        let r = &self.response;
        if ![r.a, r.b, r.c, r.t0].iter().all(|v| v.is_finite()) || r.sigma0 < 0.0 || r.sigma1 < 0.0 {
            return Err(Error::BadConfig("invalid response law".into()));
        }
        if let Some(l) = self.lag {
            if !(0.0..1.0).contains(&l) {
                return Err(Error::BadConfig("lag weight must be in [0, 1)".into()));
            }
        }
        if let Some(m) = &self.mobility {
            m.speed.validate("speed")?;
            let p = [m.stop_probability, m.go_probability];
            if m.speed.min < 0.0 || p.iter().any(|p| !(0.0..=1.0).contains(p)) || m.transient_gain < 0.0 {
                return Err(Error::BadConfig("invalid mobility law".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<SampleRecord>,
    /// True noise standard deviation of each sample.
    pub sigma: Vec<f64>,
}

struct ProcessState {
    law: Process,
    z: f64,
}

impl ProcessState {
    fn new(law: Process, rng: &mut ChaCha8Rng) -> Self {
        let z = law.ar_std * rng.sample::<f64, _>(StandardNormal);
        Self { law, z }
    }

    fn step(&mut self, time: f64, rng: &mut ChaCha8Rng) -> f64 {
        let l = &self.law;
        let e: f64 = rng.sample(StandardNormal);
        self.z = l.ar_coef * self.z + l.ar_std * (1.0 - l.ar_coef * l.ar_coef).sqrt() * e;
        let diurnal = l.diurnal_amplitude * (2.0 * PI * (time + l.phase) / DAY).sin();
        (l.mean + diurnal + self.z).clamp(l.min, l.max)
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y_p = ProcessState::new(cfg.y, &mut rng);
    let mut rh_p = ProcessState::new(cfg.rh, &mut rng);
    let mut t_p = ProcessState::new(cfg.t, &mut rng);
    let mut speed_p = cfg.mobility.map(|m| ProcessState::new(m.speed, &mut rng));

    let r = cfg.response;
    let mut records = Vec::with_capacity(cfg.n);
    let mut sigma = Vec::with_capacity(cfg.n);
    let mut prev_s: Option<f64> = None;
    let mut stopped = false;
    let mut pos = cfg.mobility.map(|m| (m.origin_lat, m.origin_lon));
    let mut heading: f64 = rng.gen_range(0.0..2.0 * PI);

    for k in 0..cfg.n {
        let ts = cfg.start + k as i64 * cfg.resolution;
        let time = ts as f64;
        let y = y_p.step(time, &mut rng);
        let rh = rh_p.step(time, &mut rng);
        let t = t_p.step(time, &mut rng);
        let sd = r.sigma0 + r.sigma1 * rh;
        let eps = sd * rng.sample::<f64, _>(StandardNormal);
        let mut s = r.a * y + r.b * y * hygroscopic_gain(rh) + r.c * (t - r.t0) + eps;
        if let Some(w) = cfg.lag {
            if let Some(p) = prev_s {
                s = w * p + (1.0 - w) * s;
            }
        }
        prev_s = Some(s);

        let mut rec = SampleRecord::new(ts);
        if let (Some(m), Some(sp)) = (cfg.mobility, speed_p.as_mut()) {
            let was_stopped = stopped;
            stopped = if stopped {
                !rng.gen_bool(m.go_probability)
            } else {
                rng.gen_bool(m.stop_probability)
            };
            let moving_speed = sp.step(time, &mut rng);
            let speed = if stopped { rng.gen_range(0.0..0.5) } else { moving_speed };
            if was_stopped && !stopped {
                s += m.transient_gain * rng.sample::<f64, _>(StandardNormal).abs();
            }
            heading += 0.3 * rng.sample::<f64, _>(StandardNormal);
            let (lat, lon) = pos.as_mut().expect("position set with mobility");
            let km = speed * cfg.resolution as f64 / 3600.0;
            *lat += km * heading.cos() / 111.195;
            *lon += km * heading.sin() / (111.195 * lat.to_radians().cos());
            rec.speed = Some(speed);
            rec.lat = Some(*lat);
            rec.lon = Some(*lon);
        }
        rec.s = Some(s.max(0.0));
        rec.t = Some(t);
        rec.rh = Some(rh);
        rec.y = Some(y);
        records.push(rec);
        sigma.push(sd);
    }
    Ok(SynthOutput { records, sigma })
}
