//! File formats: plain-text matrices, CSV tables, text reports.
//!
//! All numbers are written with 17 significant digits ('.' decimal, no
//! locale), so identical runs produce byte-identical files and golden files
//! stay stable across platforms.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::basis::DensityState;
use crate::ensemble::TrajectoryEnsembleResult;
use crate::transfer::{BuildMethod, TransferMatrix};

/// 17-significant-digit scientific form, stable for golden files.
pub fn fmt_g17(x: f64) -> String {
    // normalize -0.0 so equal values format identically
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Write a transfer matrix as a dimension header plus row-major entries.
///
/// Layout: comment lines start with '#'; the first data line is
/// `<rows> <cols>`; each following line is one row, entries space-separated.
pub fn write_transfer_matrix(path: &Path, t: &TransferMatrix) -> io::Result<()> {
    let mut out = String::new();
    out.push_str("# transfer matrix, one dwell interval\n");
    out.push_str(&format!("# tau = {}\n", fmt_g17(t.tau())));
    match t.build_method() {
        BuildMethod::ExactEnumeration => out.push_str("# build = exact-enumeration\n"),
        BuildMethod::MonteCarloAverage { n_samples, seed } => {
            out.push_str(&format!("# build = monte-carlo n={n_samples} seed={seed}\n"))
        }
    }
    let d = t.dim_basis();
    out.push_str(&format!("{d} {d}\n"));
    for i in 0..d {
        let row: Vec<String> = (0..d).map(|j| fmt_g17(t.matrix()[[i, j]])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Read a matrix in the text format back: (rows, cols, row-major entries).
pub fn read_matrix_text(path: &Path) -> io::Result<(usize, usize, Vec<f64>)> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "missing dimension header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|w| w.parse())
        .collect::<Result<_, _>>()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("bad header: {e}")))?;
    if dims.len() != 2 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "dimension header must be `rows cols`",
        ));
    }
    let mut entries = Vec::with_capacity(dims[0] * dims[1]);
    for line in lines {
        for w in line.split_whitespace() {
            entries.push(w.parse().map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("bad entry: {e}"))
            })?);
        }
    }
    if entries.len() != dims[0] * dims[1] {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!(
                "expected {} entries, found {}",
                dims[0] * dims[1],
                entries.len()
            ),
        ));
    }
    Ok((dims[0], dims[1], entries))
}

/// Eigenvalues and decoherence rates: index, re, im, modulus, rate.
pub fn write_spectrum_csv(path: &Path, t: &TransferMatrix) -> io::Result<()> {
    let rates = t.decoherence_rates().ok_or_else(|| {
        io::Error::new(
            io::ErrorKind::InvalidInput,
            "transfer matrix not diagonalized",
        )
    })?;
    let mut out = String::from("index,eig_re,eig_im,eig_abs,rate\n");
    for (i, (ev, rate)) in rates.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            fmt_g17(ev.re),
            fmt_g17(ev.im),
            fmt_g17(ev.norm()),
            fmt_g17(*rate)
        ));
    }
    write_atomic(path, &out)
}

/// Coefficient trajectory, one row per step: step, c0..c{d-1}.
pub fn write_trajectory_csv(path: &Path, states: &[DensityState]) -> io::Result<()> {
    let d = states.first().map(|s| s.coeffs().len()).unwrap_or(0);
    let mut out = String::from("step");
    for a in 0..d {
        out.push_str(&format!(",c{a}"));
    }
    out.push('\n');
    for (k, s) in states.iter().enumerate() {
        out.push_str(&k.to_string());
        for x in s.coeffs() {
            out.push(',');
            out.push_str(&fmt_g17(*x));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Ensemble means, long form: step, coefficient index, mean, stderr.
pub fn write_ensemble_csv(path: &Path, r: &TrajectoryEnsembleResult) -> io::Result<()> {
    let mut out = String::from("step,coeff,mean,stderr\n");
    for (k, (means, errs)) in r.mean.iter().zip(&r.stderr).enumerate() {
        for (a, (mu, se)) in means.iter().zip(errs).enumerate() {
            out.push_str(&format!("{k},{a},{},{}\n", fmt_g17(*mu), fmt_g17(*se)));
        }
    }
    write_atomic(path, &out)
}

/// One Monte Carlo vs transfer-matrix comparison entry.
pub struct ComparisonRow {
    pub step: usize,
    pub coeff: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub tm_value: f64,
    pub deviation: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Deviation report: each entry carries its statistical bound and a flag.
pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> io::Result<()> {
    let mut out = String::from("step,coeff,mc_mean,mc_stderr,tm_value,deviation,bound,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.step,
            r.coeff,
            fmt_g17(r.mc_mean),
            fmt_g17(r.mc_stderr),
            fmt_g17(r.tm_value),
            fmt_g17(r.deviation),
            fmt_g17(r.bound),
            if r.pass { "1" } else { "0" }
        ));
    }
    write_atomic(path, &out)
}

/// Pulse columns: t, q, J, Phi, F, K, Re/Im D+, Re/Im D-, margin.
pub fn write_pulse_csv(path: &Path, pulse: &crate::pulse::PulseProfile) -> io::Result<()> {
    let mut out = String::from(
        "t,q,j,phi,f,k,d_plus_re,d_plus_im,d_minus_re,d_minus_im,margin\n",
    );
    let seed = pulse.seed();
    for i in 0..pulse.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_g17(pulse.times()[i]),
            fmt_g17(seed.q()[i]),
            fmt_g17(pulse.j()[i]),
            fmt_g17(pulse.phi()[i]),
            fmt_g17(pulse.f()[i]),
            fmt_g17(pulse.k()[i]),
            fmt_g17(pulse.d_plus()[i].re),
            fmt_g17(pulse.d_plus()[i].im),
            fmt_g17(pulse.d_minus()[i].re),
            fmt_g17(pulse.d_minus()[i].im),
            fmt_g17(pulse.margin()[i]),
        ));
    }
    write_atomic(path, &out)
}

pub fn write_text(path: &Path, content: &str) -> io::Result<()> {
    write_atomic(path, content)
}

fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::BuildMethod;
    use ndarray::array;

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_g17(-0.0), "0.0000000000000000e0");
        assert_eq!(fmt_g17(0.1), "1.0000000000000001e-1");
        // round-trips through parse
        for x in [std::f64::consts::PI, 1.0 / 3.0, -2.5e-17, 1e300] {
            let back: f64 = fmt_g17(x).parse().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn matrix_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let m = array![[1.0, 2.5e-17, -3.0], [0.25, -1.0 / 3.0, 0.0], [9.9, 0.1, 1.0]];
        let t = TransferMatrix::from_matrix(m.clone(), 0.5, BuildMethod::ExactEnumeration);
        write_transfer_matrix(&path, &t).unwrap();
        let (r, c, entries) = read_matrix_text(&path).unwrap();
        assert_eq!((r, c), (3, 3));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(entries[i * 3 + j], m[[i, j]]);
            }
        }
    }

    #[test]
    fn malformed_matrix_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "2 2\n1.0 2.0\n3.0\n").unwrap();
        assert!(read_matrix_text(&path).is_err());
    }
}
