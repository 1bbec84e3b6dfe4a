//! CSV output, empirical CDFs and summary statistics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use super::{Algorithm, RunRecord, SweepRow};
use crate::channel::ChannelRealization;
use crate::env::{qpsk_constellation, sinr_db, RisConfiguration};
use crate::error::{Error, Result};
use crate::channel::C64;

pub const RECORD_HEADER: &str = "episode,step,algorithm,eta,eta_norm,sinr_db,wall_time_s";

/// Right-continuous empirical CDF: each distinct value with the fraction of
/// samples less than or equal to it.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in CDF input".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        if i + 1 < n && v[i + 1] == *x {
            continue;
        }
        out.push((*x, (i + 1) as f64 / n as f64));
    }
    Ok(out)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let rows = records.iter().map(|r| {
        format!(
            "{},{},{},{},{},{},{}",
            r.episode,
            r.step,
            r.algorithm,
            float(r.eta),
            float(r.eta_norm),
            float(r.sinr_db),
            r.wall_time_s.map(float).unwrap_or_default()
        )
    });
    write_lines(path, std::iter::once(RECORD_HEADER.to_string()).chain(rows))
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    match lines.next() {
        Some(Ok(h)) if h == RECORD_HEADER => {}
        Some(Err(e)) => return Err(Error::io(path, e)),
        _ => return Err(Error::Parse(format!("{}: missing record header", path.display()))),
    }
    let bad = |n: usize| Error::Parse(format!("{}: malformed row {n}", path.display()));
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(i + 2));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2));
        out.push(RunRecord {
            episode: f[0].parse().map_err(|_| bad(i + 2))?,
            step: f[1].parse().map_err(|_| bad(i + 2))?,
            algorithm: f[2].parse()?,
            eta: num(f[3])?,
            eta_norm: num(f[4])?,
            sinr_db: num(f[5])?,
            wall_time_s: if f[6].is_empty() { None } else { Some(num(f[6])?) },
        });
    }
    Ok(out)
}

pub fn emit_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let body = rows.iter().map(|r| {
        format!(
            "{},{},{},{},{},{}",
            r.axis.name(),
            float(r.value),
            r.algorithm,
            float(r.mean),
            float(r.std),
            r.episodes
        )
    });
    write_lines(
        path,
        std::iter::once("axis,value,algorithm,mean_eta_norm,std_eta_norm,episodes".to_string()).chain(body),
    )
}

/// One CDF per algorithm, stacked.
pub fn emit_cdf(cdfs: &[(Algorithm, Vec<(f64, f64)>)], path: &Path) -> Result<()> {
    let body = cdfs.iter().flat_map(|(a, c)| {
        c.iter()
            .map(move |(v, p)| format!("{a},{},{}", float(*v), float(*p)))
    });
    write_lines(path, std::iter::once("algorithm,value,probability".to_string()).chain(body))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub samples: Vec<C64>,
    /// Analytic SINR of the pulse response.
    pub sinr_db: f64,
}

/// Sends `n_symbols` random QPSK symbols through the channel under `gamma`.
pub fn constellation<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    gamma: &RisConfiguration,
    noise_power: f64,
    n_symbols: usize,
    rng: &mut R,
) -> Result<Constellation> {
    let y = ch.noiseless_pulse(gamma.as_slice())?;
    Ok(Constellation {
        samples: qpsk_constellation(&y, n_symbols, noise_power, rng)?,
        sinr_db: sinr_db(&y, noise_power)?,
    })
}

/// Writes the received samples as `re,im` rows under a comment line
/// carrying the analytic SINR.
pub fn emit_constellation<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    gamma: &RisConfiguration,
    noise_power: f64,
    n_symbols: usize,
    rng: &mut R,
    path: &Path,
) -> Result<Constellation> {
    let c = constellation(ch, gamma, noise_power, n_symbols, rng)?;
    let head = [format!("# sinr_db = {}", float(c.sinr_db)), "re,im".to_string()];
    let rows = c.samples.iter().map(|s| format!("{},{}", float(s.re), float(s.im)));
    write_lines(path, head.into_iter().chain(rows))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
        assert_eq!(
            empirical_cdf(&[1.0, 2.0, 2.0, 4.0]).unwrap(),
            vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]
        );
        assert!(empirical_cdf(&[]).is_err());
        assert!(empirical_cdf(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn stats() {
        assert_eq!(mean_std(&[1.0, 3.0]).unwrap(), (2.0, 1.0));
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_ends_at_one(v in proptest::collection::vec(-5i32..5, 1..60)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let c = empirical_cdf(&v).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(c.last().unwrap().1, 1.0);
            for (x, p) in &c {
                let count = v.iter().filter(|y| *y <= x).count();
                prop_assert_eq!(*p, count as f64 / v.len() as f64);
            }
        }
    }
}
