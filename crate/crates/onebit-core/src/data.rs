//! Synthetic problem generation, recovery metrics, and problem bundles.
//!
//! Generation is fully reproducible: a ChaCha8 generator is seeded from the
//! configured seed and split into independent substreams (support, signal,
//! matrix, noise, flips), so e.g. changing the noise level leaves the
//! measurement matrix and flip pattern untouched.
//!
//! A problem bundle is a directory holding `meta.json` (the generation
//! config), `phi.csv` (one row per line), `b.csv` (one sign per line), and
//! optionally `xtrue.csv` and `support.csv` (0-based indices). Floats in
//! the CSV files carry 17 significant digits, so a round trip is bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::Problem;
use crate::{Error, Result};

const STREAM_SUPPORT: u64 = 1;
const STREAM_SIGNAL: u64 = 2;
const STREAM_MATRIX: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_FLIP: u64 = 5;

/// How the measurement matrix is drawn: correlated Gaussian rows with
/// covariance `mu^|i-j|` (type I) or i.i.d. standard normal entries
/// (type II).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum MatrixType {
    TypeI,
    TypeII,
}

impl From<MatrixType> for u8 {
    fn from(t: MatrixType) -> u8 {
        match t {
            MatrixType::TypeI => 1,
            MatrixType::TypeII => 2,
        }
    }
}

impl TryFrom<u8> for MatrixType {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(MatrixType::TypeI),
            2 => Ok(MatrixType::TypeII),
            other => Err(format!("matrix_type must be 1 or 2, got {other}")),
        }
    }
}

/// Configuration of one synthetic instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenConfig {
    pub m: usize,
    pub n: usize,
    pub s_star: usize,
    pub matrix_type: MatrixType,
    /// Row correlation factor in `[0, 1)`; only used by type I.
    pub mu: f64,
    /// Standard deviation of the pre-quantization noise.
    pub noise_level: f64,
    /// Probability that a recorded sign is flipped, in `[0, 1)`.
    pub flip_ratio: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Invalid("m must be at least 1".into()));
        }
        if self.s_star < 1 || self.s_star > self.n {
            return Err(Error::Invalid(format!(
                "s_star must satisfy 1 <= s_star <= n, got s_star={} n={}",
                self.s_star, self.n
            )));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::Invalid(format!("mu must lie in [0,1), got {}", self.mu)));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::Invalid(format!(
                "noise level must be nonnegative, got {}",
                self.noise_level
            )));
        }
        if !(0.0..1.0).contains(&self.flip_ratio) {
            return Err(Error::Invalid(format!(
                "flip ratio must lie in [0,1), got {}",
                self.flip_ratio
            )));
        }
        Ok(())
    }
}

/// Recovery quality of one trial. `wall_seconds` and `iterations` are
/// filled by the harness around the solver call.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialMetrics {
    /// Euclidean distance between the recovered and true unit vectors.
    pub mse: f64,
    /// Fraction of measurement signs that differ (three-valued sign).
    pub herr: f64,
    /// Fraction of the true support that was missed.
    pub fnr: f64,
    /// Fraction of off-support indices falsely selected.
    pub fpr: f64,
    pub wall_seconds: f64,
    pub iterations: usize,
}

/// A generated instance: the problem (with ground truth attached) plus the
/// true support, sorted ascending.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub problem: Problem,
    pub support: Vec<usize>,
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw one instance: sparse unit signal, measurement matrix, noisy signed
/// observations with independent flips.
pub fn generate_problem(cfg: &GenConfig) -> Result<GeneratedProblem> {
    cfg.validate()?;
    let (m, n, s) = (cfg.m, cfg.n, cfg.s_star);

    let mut support = rand::seq::index::sample(&mut substream(cfg.seed, STREAM_SUPPORT), n, s)
        .into_vec();
    support.sort_unstable();

    let mut signal_rng = substream(cfg.seed, STREAM_SIGNAL);
    let mut xi: Vec<f64> = (0..s).map(|_| StandardNormal.sample(&mut signal_rng)).collect();
    let norm = linalg::norm(&xi);
    xi.iter_mut().for_each(|v| *v /= norm);
    let mut x_true = Array1::zeros(n);
    for (&j, &v) in support.iter().zip(&xi) {
        x_true[j] = v;
    }

    let mut matrix_rng = substream(cfg.seed, STREAM_MATRIX);
    let mut phi = Array2::zeros((m, n));
    match cfg.matrix_type {
        MatrixType::TypeII => {
            for v in phi.iter_mut() {
                *v = StandardNormal.sample(&mut matrix_rng);
            }
        }
        MatrixType::TypeI => {
            // Rows are a stationary AR(1) process: this is exactly the
            // triangular factor of the Toeplitz covariance mu^|i-j|.
            let mu = cfg.mu;
            let blend = (1.0 - mu * mu).sqrt();
            for mut row in phi.rows_mut() {
                let mut prev = 0.0;
                for (j, v) in row.iter_mut().enumerate() {
                    let g: f64 = StandardNormal.sample(&mut matrix_rng);
                    *v = if j == 0 { g } else { mu * prev + blend * g };
                    prev = *v;
                }
            }
        }
    }

    // measurements of the sparse signal: m x s products suffice
    let mut t = vec![0.0; m];
    for (i, ti) in t.iter_mut().enumerate() {
        let row = phi.row(i);
        *ti = support.iter().zip(&xi).map(|(&j, &v)| row[j] * v).sum();
    }

    if cfg.noise_level > 0.0 {
        let mut noise_rng = substream(cfg.seed, STREAM_NOISE);
        for ti in t.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut noise_rng);
            *ti += cfg.noise_level * g;
        }
    }

    let mut flip_rng = substream(cfg.seed, STREAM_FLIP);
    let b = Array1::from_iter(t.iter().map(|&ti| {
        let zeta = if flip_rng.random::<f64>() < cfg.flip_ratio {
            -1.0
        } else {
            1.0
        };
        // two-valued sgn: zero maps to -1
        let sgn = if ti > 0.0 { 1.0 } else { -1.0 };
        zeta * sgn
    }));

    let problem = Problem::new(phi, b, Some(x_true))?;
    Ok(GeneratedProblem { problem, support })
}

fn sign3(t: f64) -> i8 {
    if t > 0.0 {
        1
    } else if t < 0.0 {
        -1
    } else {
        0
    }
}

/// Indices whose magnitude exceeds `1e-5 * max |x|`.
pub fn detected_support(x: &Array1<f64>) -> Vec<usize> {
    let max = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max == 0.0 {
        return Vec::new();
    }
    let thresh = 1e-5 * max;
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > thresh)
        .map(|(i, _)| i)
        .collect()
}

/// Recovery metrics of a solution against the ground truth.
pub fn compute_metrics(
    x_sol: &Array1<f64>,
    x_true: &Array1<f64>,
    phi: &Array2<f64>,
    support: &[usize],
) -> TrialMetrics {
    let (m, n) = phi.dim();
    assert_eq!(x_sol.len(), n, "x_sol has wrong length");
    assert_eq!(x_true.len(), n, "x_true has wrong length");

    let mse = x_sol
        .iter()
        .zip(x_true.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let view: ArrayView2<'_, f64> = phi.view();
    let mut t_sol = vec![0.0; m];
    let mut t_true = vec![0.0; m];
    linalg::mat_vec(&view, x_sol.as_slice().expect("contiguous"), &mut t_sol);
    linalg::mat_vec(&view, x_true.as_slice().expect("contiguous"), &mut t_true);
    let mismatches = t_sol
        .iter()
        .zip(&t_true)
        .filter(|(a, b)| sign3(**a) != sign3(**b))
        .count();
    let herr = mismatches as f64 / m as f64;

    let mut in_true = vec![false; n];
    for &j in support {
        in_true[j] = true;
    }
    let detected = detected_support(x_sol);
    let mut hits = 0usize;
    let mut false_pos = 0usize;
    for &j in &detected {
        if in_true[j] {
            hits += 1;
        } else {
            false_pos += 1;
        }
    }
    let fnr = if support.is_empty() {
        0.0
    } else {
        (support.len() - hits) as f64 / support.len() as f64
    };
    let off = n - support.len();
    let fpr = if off == 0 { 0.0 } else { false_pos as f64 / off as f64 };

    TrialMetrics {
        mse,
        herr,
        fnr,
        fpr,
        wall_seconds: 0.0,
        iterations: 0,
    }
}

/// A bundle read back from disk. `support` is present only when the bundle
/// carries ground truth.
#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub problem: Problem,
    pub gen: GenConfig,
    pub support: Option<Vec<usize>>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Write a generated problem as a bundle directory.
pub fn save_problem(dir: &Path, gp: &GeneratedProblem, cfg: &GenConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta_path = dir.join("meta.json");
    let meta = serde_json::to_string_pretty(cfg).expect("GenConfig serializes");
    fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(&meta_path, e))?;

    let phi_path = dir.join("phi.csv");
    let mut w = create(&phi_path)?;
    for row in gp.problem.phi().rows() {
        let line = row.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(",");
        writeln!(w, "{line}").map_err(|e| Error::io(&phi_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&phi_path, e))?;

    let b_path = dir.join("b.csv");
    let mut w = create(&b_path)?;
    for &v in gp.problem.b() {
        writeln!(w, "{}", if v > 0.0 { "1" } else { "-1" }).map_err(|e| Error::io(&b_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&b_path, e))?;

    if let Some(x_true) = gp.problem.x_true() {
        let x_path = dir.join("xtrue.csv");
        let mut w = create(&x_path)?;
        for &v in x_true {
            writeln!(w, "{}", fmt17(v)).map_err(|e| Error::io(&x_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&x_path, e))?;

        let s_path = dir.join("support.csv");
        let mut w = create(&s_path)?;
        for &j in &gp.support {
            writeln!(w, "{j}").map_err(|e| Error::io(&s_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&s_path, e))?;
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| Error::io(path, e))?);
    }
    // tolerate trailing blank lines; interior blanks fail field parsing
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    Ok(lines)
}

fn parse_f64(path: &Path, line_no: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line: line_no,
        msg: format!("cannot parse '{}' as a number", field.trim()),
    })
}

/// Read a vector from a one-value-per-line file.
pub fn load_vector(path: &Path) -> Result<Array1<f64>> {
    let lines = read_lines(path)?;
    let mut out = Array1::zeros(lines.len());
    for (i, line) in lines.iter().enumerate() {
        out[i] = parse_f64(path, i + 1, line)?;
    }
    Ok(out)
}

/// Read a bundle directory back. Validates signs, dimensions, and
/// consistency with the metadata.
pub fn load_problem(dir: &Path) -> Result<ProblemBundle> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let gen: GenConfig = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;

    let phi_path = dir.join("phi.csv");
    let phi_lines = read_lines(&phi_path)?;
    let m = phi_lines.len();
    if m == 0 {
        return Err(Error::Parse {
            path: phi_path.display().to_string(),
            line: 1,
            msg: "empty matrix file".into(),
        });
    }
    let n = phi_lines[0].split(',').count();
    let mut phi = Array2::zeros((m, n));
    for (i, line) in phi_lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(Error::Parse {
                path: phi_path.display().to_string(),
                line: i + 1,
                msg: format!("expected {n} fields, found {}", fields.len()),
            });
        }
        for (j, field) in fields.iter().enumerate() {
            phi[[i, j]] = parse_f64(&phi_path, i + 1, field)?;
        }
    }
    if gen.m != m || gen.n != n {
        return Err(Error::Dimension(format!(
            "meta.json declares {}x{} but phi.csv holds {m}x{n}",
            gen.m, gen.n
        )));
    }

    let b_path = dir.join("b.csv");
    let b_lines = read_lines(&b_path)?;
    if b_lines.len() != m {
        return Err(Error::Dimension(format!(
            "phi.csv has {m} rows but b.csv has {} entries",
            b_lines.len()
        )));
    }
    let mut b = Array1::zeros(m);
    for (i, line) in b_lines.iter().enumerate() {
        let v = parse_f64(&b_path, i + 1, line)?;
        if v != 1.0 && v != -1.0 {
            return Err(Error::Parse {
                path: b_path.display().to_string(),
                line: i + 1,
                msg: format!("sign entries must be +1 or -1, got {v}"),
            });
        }
        b[i] = v;
    }

    let x_path = dir.join("xtrue.csv");
    let x_true = if x_path.exists() {
        let lines = read_lines(&x_path)?;
        if lines.len() != n {
            return Err(Error::Dimension(format!(
                "xtrue.csv has {} entries but phi.csv has {n} columns",
                lines.len()
            )));
        }
        let mut x = Array1::zeros(n);
        for (i, line) in lines.iter().enumerate() {
            x[i] = parse_f64(&x_path, i + 1, line)?;
        }
        Some(x)
    } else {
        None
    };

    let s_path = dir.join("support.csv");
    let support = if s_path.exists() {
        let lines = read_lines(&s_path)?;
        let mut sup = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let j: usize = line.trim().parse().map_err(|_| Error::Parse {
                path: s_path.display().to_string(),
                line: i + 1,
                msg: format!("cannot parse '{}' as an index", line.trim()),
            })?;
            if j >= n {
                return Err(Error::Parse {
                    path: s_path.display().to_string(),
                    line: i + 1,
                    msg: format!("support index {j} out of range for n = {n}"),
                });
            }
            sup.push(j);
        }
        Some(sup)
    } else {
        None
    };

    let problem = Problem::new(phi, b, x_true)?;
    Ok(ProblemBundle {
        problem,
        gen,
        support,
    })
}
