//! Sampled power spectra on a uniform frequency grid.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Relative tolerance on grid uniformity.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumData {
    pub freq_hz: Vec<f64>,
    pub psd: Vec<f64>,
    /// Number of averaged periodograms.
    pub n_avg: usize,
    /// `true` marks bins excluded from fits.
    pub mask: Vec<bool>,
    pub resolution_hz: f64,
    /// Free-form metadata (seed, truth values, ...), written to the CSV header.
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl SpectrumData {
    pub fn new(freq_hz: Vec<f64>, psd: Vec<f64>, n_avg: usize) -> Result<Self> {
        let n = freq_hz.len();
        if n < 2 {
            return Err(Error::InsufficientData("a spectrum needs at least two bins".into()));
        }
        if psd.len() != n {
            return Err(Error::invalid("psd", "length differs from the frequency grid"));
        }
        if n_avg == 0 {
            return Err(Error::invalid("n_avg", "must be >= 1"));
        }
        let resolution_hz = freq_hz[1] - freq_hz[0];
        if !(resolution_hz > 0.0) {
            return Err(Error::invalid("freq_hz", "grid must be ascending"));
        }
        // Steps of a grid far from zero carry rounding of order eps·|f|.
        let rounding = 8.0 * f64::EPSILON * freq_hz[0].abs().max(freq_hz[n - 1].abs());
        for (i, w) in freq_hz.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - resolution_hz).abs() > GRID_TOLERANCE * resolution_hz + rounding {
                return Err(Error::invalid(
                    "freq_hz",
                    format!("grid is not uniform at bin {}", i + 1),
                ));
            }
        }
        if let Some(index) = psd.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::NegativeSpectrum {
                index,
                value: psd[index],
            });
        }
        Ok(Self {
            mask: vec![false; n],
            freq_hz,
            psd,
            n_avg,
            resolution_hz,
            meta: Map::new(),
        })
    }

    /// Uniform grid `start + i·step` for `i < n`.
    pub fn grid(start_hz: f64, step_hz: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| start_hz + step_hz * i as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_owned(), value.into());
        self
    }

    /// Index of the bin closest to `f_hz`.
    pub fn bin_of(&self, f_hz: f64) -> usize {
        let i = ((f_hz - self.freq_hz[0]) / self.resolution_hz).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Restricts the spectrum to `[lo_hz, hi_hz]`.
    pub fn window(&self, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.freq_hz[i] >= lo_hz && self.freq_hz[i] <= hi_hz)
            .collect();
        if keep.len() < 2 {
            return Err(Error::InsufficientData(format!("window [{lo_hz}, {hi_hz}] Hz holds fewer than two bins")));
        }
        let (a, b) = (keep[0], keep[keep.len() - 1] + 1);
        Ok(Self {
            freq_hz: self.freq_hz[a..b].to_vec(),
            psd: self.psd[a..b].to_vec(),
            mask: self.mask[a..b].to_vec(),
            n_avg: self.n_avg,
            resolution_hz: self.resolution_hz,
            meta: self.meta.clone(),
        })
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut meta = self.meta.clone();
        meta.insert("n_avg".into(), self.n_avg.into());
        meta.insert("resolution_hz".into(), self.resolution_hz.into());
        writeln!(w, "# {}", Value::Object(meta))?;
        writeln!(w, "freq_hz,psd,mask")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.freq_hz[i], self.psd[i], u8::from(self.mask[i]))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Reads the format written by [`SpectrumData::write_csv`]. The mask column
    /// is optional; `n_avg` defaults to 1 when the header does not carry it.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut meta = Map::new();
        let (mut freq, mut psd, mut mask) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Ok(Value::Object(m)) = serde_json::from_str(rest.trim()) {
                    meta.extend(m);
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols[0].parse::<f64>().is_err() {
                continue; // column header
            }
            let bad = |what: &str| Error::InsufficientData(format!("line {}: cannot parse {what}", lineno + 1));
            if cols.len() < 2 {
                return Err(bad("psd column"));
            }
            freq.push(cols[0].parse::<f64>().map_err(|_| bad("frequency"))?);
            psd.push(cols[1].parse::<f64>().map_err(|_| bad("psd"))?);
            mask.push(cols.get(2).is_some_and(|m| *m == "1" || m.eq_ignore_ascii_case("true")));
        }
        let n_avg = meta.get("n_avg").and_then(Value::as_u64).unwrap_or(1) as usize;
        meta.remove("n_avg");
        meta.remove("resolution_hz");
        let mut data = Self::new(freq, psd, n_avg)?;
        data.mask = mask;
        data.meta = meta;
        Ok(data)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
