//! Classical envelope simulation of the rotating-frame dynamics
//! dβ = [−(Γ_eff/2)β − (Γ_par/2)e^{iφ}β*]dt + dξ.
//!
//! The noise has intensity E|dξ|² = Γ_eff(2n̄+1)/2·dt and pseudo-covariance
//! E[dξ²] = c·dt (the anomalous correlator), so the trace reproduces the
//! symmetrized quadrature statistics. Ordered sideband spectra are outside
//! the reach of a classical process; see [`super::propagate`].

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rates::DerivedRates;
use crate::seed;

/// Largest accepted dt·Γ₊.
pub const MAX_STEP: f64 = 0.1;
/// Smallest accepted duration·Γ₋.
pub const MIN_CORRELATION_TIMES: f64 = 50.0;

const MAGIC: &str = "omsqueeze-trace v1";

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrace {
    pub samples: Vec<Complex64>,
    pub dt: f64,
    pub seed: u64,
}

impl EnvelopeTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// X_θ(t) = Re(e^{iθ}β(t)); Y is at θ = −φ/2, X at θ = −φ/2 + π/2.
    pub fn quadrature(&self, theta: f64) -> Vec<f64> {
        let e = Complex64::from_polar(1.0, theta);
        self.samples.iter().map(|b| (e * b).re).collect()
    }

    /// Text header (`dt`, `seed`, `length`, blank line) followed by
    /// interleaved little-endian f64 (re, im) pairs.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        write!(
            w,
            "{MAGIC}\ndt {:e}\nseed {}\nlength {}\n\n",
            self.dt,
            self.seed,
            self.samples.len()
        )?;
        let mut buf = Vec::with_capacity(16 * self.samples.len());
        for z in &self.samples {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(r: &mut impl BufRead) -> Result<Self> {
        let bad = |m: &str| Error::InsufficientData(format!("trace header: {m}"));
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(bad("missing magic line"));
        }
        let (mut dt, mut seed, mut length) = (None, None, None);
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(bad("unterminated header"));
            }
            let l = line.trim_end();
            if l.is_empty() {
                break;
            }
            match l.split_once(' ') {
                Some(("dt", v)) => dt = v.parse::<f64>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("length", v)) => length = v.parse::<usize>().ok(),
                _ => return Err(bad(&format!("unknown field `{l}`"))),
            }
        }
        let (dt, seed, length) = (
            dt.ok_or_else(|| bad("dt"))?,
            seed.ok_or_else(|| bad("seed"))?,
            length.ok_or_else(|| bad("length"))?,
        );
        let mut raw = vec![0u8; 16 * length];
        r.read_exact(&mut raw)?;
        let samples = raw
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Ok(Self { samples, dt, seed })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Euler–Maruyama integration over `duration` seconds with step `dt`. A
/// burn-in of 10/Γ₋ precedes the recorded samples.
pub fn sde_simulate(rates: &DerivedRates<f64>, n_bar: f64, duration: f64, dt: f64, seed: u64) -> Result<EnvelopeTrace> {
    if !(rates.s.abs() < 1.0) {
        return Err(Error::ParametricInstability { s: rates.s });
    }
    if !(rates.gamma_eff > 0.0) {
        return Err(Error::AntiDamping {
            gamma_eff: rates.gamma_eff,
        });
    }
    let gp = rates.gamma_eff * (1.0 + rates.s.abs());
    let gm = rates.gamma_eff * (1.0 - rates.s.abs());
    if !(dt > 0.0 && dt * gp < MAX_STEP) {
        return Err(Error::invalid("dt", format!("dt·Γ₊ = {} must be below {MAX_STEP}", dt * gp)));
    }
    if !(duration * gm > MIN_CORRELATION_TIMES) {
        return Err(Error::invalid(
            "duration",
            format!("duration·Γ₋ = {} must exceed {MIN_CORRELATION_TIMES}", duration * gm),
        ));
    }

    let d = rates.gamma_eff * (2.0 * n_bar + 1.0) / 2.0;
    let c = rates.anomalous;
    let cuu = ((d + c.re) / 2.0 * dt).max(0.0);
    let cvv = (d - c.re) / 2.0 * dt;
    let cuv = c.im / 2.0 * dt;
    let l11 = cuu.sqrt();
    let l21 = if l11 > 0.0 { cuv / l11 } else { 0.0 };
    let l22 = (cvv - l21 * l21).max(0.0).sqrt();

    let decay = 1.0 - rates.gamma_eff / 2.0 * dt;
    let pump = Complex64::from_polar(rates.gamma_par / 2.0 * dt, rates.phi);
    let mut rng = seed::stream(seed, 0);
    let mut beta = Complex64::new(0.0, 0.0);
    let burn_in = (10.0 / (gm * dt)).ceil() as usize;
    let n = (duration / dt).round() as usize;
    let mut samples = Vec::with_capacity(n);
    for k in 0..burn_in + n {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let noise = Complex64::new(l11 * z1, l21 * z1 + l22 * z2);
        beta = beta * decay - pump * beta.conj() + noise;
        if k >= burn_in {
            samples.push(beta);
        }
    }
    Ok(EnvelopeTrace { samples, dt, seed })
}
