//! Quantum-spectrometer conditioning: shot-record ingestion, energy
//! normalization, anti-correlation selection, photon-absorption histograms,
//! Gaussian-comb fitting, background subtraction, and a synthetic shot
//! generator for closed-loop testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics;

/// Per-shot detector currents. `i_0` is the reference-energy signal; `phi`
/// and `i_phi` carry the homodyne phase and difference current when present.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub id: u64,
    pub i_hh: f64,
    pub i_out: f64,
    pub i_0: Option<f64>,
    pub phi: Option<f64>,
    pub i_phi: Option<f64>,
}

impl ShotRecord {
    fn validate(&self, line: usize) -> Result<()> {
        let finite = self.i_hh.is_finite()
            && self.i_out.is_finite()
            && self.i_0.map_or(true, |v| v.is_finite())
            && self.phi.map_or(true, |v| v.is_finite())
            && self.i_phi.map_or(true, |v| v.is_finite());
        if !finite {
            return Err(Error::Parse {
                line,
                msg: "non-finite signal value".into(),
            });
        }
        if let Some(i0) = self.i_0 {
            if i0 <= 0.0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("i_0 must be positive, got {i0}"),
                });
            }
        }
        Ok(())
    }
}

/// Selection geometry along the anti-correlation diagonal of the
/// (i_out, i_hh) joint distribution.
#[derive(Debug, Clone, Copy)]
pub struct SelectionBand {
    /// Line slope (strictly negative).
    pub slope: f64,
    pub intercept: f64,
    /// Half-width in perpendicular-residual units.
    pub half_width: f64,
}

impl SelectionBand {
    /// Perpendicular distance of a shot from the band axis.
    pub fn residual(&self, shot: &ShotRecord) -> f64 {
        (shot.i_hh - self.slope * shot.i_out - self.intercept) / (1.0 + self.slope * self.slope).sqrt()
    }
}

/// Load shots from CSV with declared header `id,i_hh,i_out,i_0[,phi,i_phi]`;
/// trailing optional columns may be absent.
pub fn load_shots(path: &std::path::Path) -> Result<Vec<ShotRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty shot file".into(),
        })?;
    let columns: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    if columns.len() < 3 || columns[0] != "id" || columns[1] != "i_hh" || columns[2] != "i_out" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header id,i_hh,i_out[,i_0,phi,i_phi], got {header:?}"),
        });
    }
    let col_index = |name: &str| columns.iter().position(|&c| c == name);
    let idx_i0 = col_index("i_0");
    let idx_phi = col_index("phi");
    let idx_iphi = col_index("i_phi");

    let mut shots = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected {} columns, got {}", columns.len(), fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad number {s:?}: {e}"),
            })
        };
        let opt = |idx: Option<usize>| -> Result<Option<f64>> {
            match idx {
                Some(i) if !fields[i].is_empty() => Ok(Some(parse(fields[i])?)),
                _ => Ok(None),
            }
        };
        let record = ShotRecord {
            id: fields[0].parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad id {:?}: {e}", fields[0]),
            })?,
            i_hh: parse(fields[1])?,
            i_out: parse(fields[2])?,
            i_0: opt(idx_i0)?,
            phi: opt(idx_phi)?,
            i_phi: opt(idx_iphi)?,
        };
        record.validate(lineno + 1)?;
        shots.push(record);
    }
    Ok(shots)
}

/// Write shots in the [`load_shots`] format (all columns declared).
pub fn write_shots(path: &std::path::Path, shots: &[ShotRecord]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "id,i_hh,i_out,i_0,phi,i_phi")?;
    for s in shots {
        let field = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        writeln!(
            f,
            "{},{:.17e},{:.17e},{},{},{}",
            s.id,
            s.i_hh,
            s.i_out,
            field(s.i_0),
            field(s.phi),
            field(s.i_phi)
        )?;
    }
    Ok(())
}

/// Remove shot-to-shot energy fluctuations: divide `i_hh` and `i_out` by
/// (i_0 / median i_0).
pub fn energy_normalize(shots: &[ShotRecord]) -> Result<Vec<ShotRecord>> {
    let i0: Vec<f64> = shots
        .iter()
        .map(|s| {
            s.i_0.filter(|&v| v > 0.0).ok_or_else(|| {
                Error::validation(format!("shot {} is missing a positive i_0", s.id))
            })
        })
        .collect::<Result<_>>()?;
    if i0.is_empty() {
        return Err(Error::validation("no shots to normalize"));
    }
    let med = numerics::median(&i0);
    Ok(shots
        .iter()
        .zip(&i0)
        .map(|(s, &v)| {
            let factor = v / med;
            ShotRecord {
                i_hh: s.i_hh / factor,
                i_out: s.i_out / factor,
                ..s.clone()
            }
        })
        .collect())
}

/// Fit the anti-correlation diagonal through the (i_out, i_hh) cloud with a
/// total-least-squares principal axis (both signals are noisy), and size the
/// band as `half_width_sigmas` perpendicular-residual standard deviations.
pub fn fit_anticorrelation_band(
    shots: &[ShotRecord],
    half_width_sigmas: f64,
) -> Result<SelectionBand> {
    if shots.len() < 100 {
        return Err(Error::validation(format!(
            "need at least 100 shots to fit the diagonal, got {}",
            shots.len()
        )));
    }
    let xs: Vec<f64> = shots.iter().map(|s| s.i_out).collect();
    let ys: Vec<f64> = shots.iter().map(|s| s.i_hh).collect();
    let mx = numerics::mean(&xs);
    let my = numerics::mean(&ys);
    let n = shots.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    let corr = sxy / (sxx * syy).sqrt().max(1e-300);
    if corr >= -0.05 {
        return Err(Error::constraint(format!(
            "no anti-correlation: Pearson correlation {corr:.3} is not negative"
        )));
    }
    // principal axis of the 2x2 covariance
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lambda = 0.5 * trace + (0.25 * trace * trace - det).max(0.0).sqrt();
    let slope = (lambda - sxx) / sxy;
    if !(slope < 0.0) || !slope.is_finite() {
        return Err(Error::constraint(format!(
            "no anti-correlation: fitted slope {slope:.4} is not negative"
        )));
    }
    let intercept = my - slope * mx;
    let provisional = SelectionBand {
        slope,
        intercept,
        half_width: f64::INFINITY,
    };
    let residuals: Vec<f64> = shots.iter().map(|s| provisional.residual(s)).collect();
    // robust spread: MAD refined inside a 3σ window, so an uncorrelated
    // background cloud does not inflate the band
    let mut sigma = 1.4826 * numerics::median(&residuals.iter().map(|r| r.abs()).collect::<Vec<_>>());
    for _ in 0..3 {
        let inside: Vec<f64> = residuals
            .iter()
            .cloned()
            .filter(|r| r.abs() <= 3.0 * sigma)
            .map(|r| r.abs())
            .collect();
        if inside.len() < 10 {
            break;
        }
        let refined = 1.4826 * numerics::median(&inside);
        if refined <= 0.0 || (refined - sigma).abs() < 1e-12 * sigma {
            break;
        }
        sigma = refined;
    }
    Ok(SelectionBand {
        slope,
        intercept,
        half_width: half_width_sigmas * sigma,
    })
}

/// Partition shots into (selected, rejected) by |perpendicular residual|
/// against the band half-width.
pub fn select_shots(
    shots: &[ShotRecord],
    band: &SelectionBand,
) -> Result<(Vec<ShotRecord>, Vec<ShotRecord>)> {
    let mut selected = Vec::new();
    let mut rejected = Vec::new();
    for s in shots {
        if band.residual(s).abs() <= band.half_width {
            selected.push(s.clone());
        } else {
            rejected.push(s.clone());
        }
    }
    if selected.is_empty() {
        return Err(Error::constraint("selection band contains no shots"));
    }
    Ok((selected, rejected))
}

/// Normalized histogram over uniform bins.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    /// Probability mass per bin; sums to 1.
    pub probability: Vec<f64>,
    pub bin_width: f64,
}

impl Histogram {
    pub fn mass(&self) -> f64 {
        self.probability.iter().sum()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "bin_center,probability")?;
        for (c, p) in self.bin_centers.iter().zip(&self.probability) {
            writeln!(f, "{c:.17e},{p:.17e}")?;
        }
        Ok(())
    }
}

/// Histogram of absorbed photon equivalents, (reference level − i_out),
/// where the reference (zero-absorption) level is the largest transmitted
/// signal among the selected shots. Photon-equivalent conversion is a linear
/// detector-gain map applied by the caller; identity by default.
pub fn absorption_histogram(selected: &[ShotRecord], bin_width: f64) -> Result<Histogram> {
    if selected.is_empty() {
        return Err(Error::validation("empty selection"));
    }
    if !(bin_width > 0.0) {
        return Err(Error::validation("bin_width must be positive"));
    }
    let reference = selected
        .iter()
        .map(|s| s.i_out)
        .fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f64> = selected.iter().map(|s| reference - s.i_out).collect();
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    let n_bins = (max / bin_width).floor() as usize + 1;
    let mut counts = vec![0.0; n_bins];
    for v in &values {
        let idx = ((v / bin_width).floor() as usize).min(n_bins - 1);
        counts[idx] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    Ok(Histogram {
        bin_centers: (0..n_bins).map(|i| (i as f64 + 0.5) * bin_width).collect(),
        probability: counts.into_iter().map(|c| c / total).collect(),
        bin_width,
    })
}

/// A fitted sum of Gaussians with shared spacing.
#[derive(Debug, Clone)]
pub struct CombFit {
    pub spacing: f64,
    pub centers: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
    /// Fit evaluated on the histogram bins.
    pub model: Vec<f64>,
    /// model − data per bin.
    pub residual: Vec<f64>,
}

fn comb_model(params: &[f64], n_peaks: usize, x: f64) -> f64 {
    let x0 = params[0];
    let s = params[1];
    let mut acc = 0.0;
    for k in 0..n_peaks {
        let a = params[2 + k];
        let w = params[2 + n_peaks + k].abs().max(1e-12);
        let c = x0 + k as f64 * s;
        acc += a * (-(x - c) * (x - c) / (2.0 * w * w)).exp();
    }
    acc
}

/// Nonlinear least squares of a Gaussian comb (shared spacing, per-peak
/// amplitude and width) to a histogram.
pub fn fit_gaussian_comb(
    histogram: &Histogram,
    spacing_guess: f64,
    n_peaks: usize,
) -> std::result::Result<CombFit, (Error, Box<CombFit>)> {
    let data = &histogram.probability;
    let xs = &histogram.bin_centers;
    let floor = data.iter().cloned().fold(0.0_f64, f64::max) * 0.05;
    let min_sep = ((0.6 * spacing_guess / histogram.bin_width) as usize).max(1);
    let maxima = numerics::local_maxima(data, floor, min_sep);
    if maxima.len() < n_peaks {
        let err = Error::validation(format!(
            "histogram shows {} visible local maxima, need {n_peaks}",
            maxima.len()
        ));
        return Err((
            err,
            Box::new(CombFit {
                spacing: spacing_guess,
                centers: Vec::new(),
                amplitudes: Vec::new(),
                widths: Vec::new(),
                model: vec![0.0; data.len()],
                residual: data.iter().map(|&d| -d).collect(),
            }),
        ));
    }

    let mut params = vec![0.0; 2 + 2 * n_peaks];
    params[0] = xs[maxima[0]];
    params[1] = spacing_guess;
    for k in 0..n_peaks {
        let guess_center = params[0] + k as f64 * spacing_guess;
        let idx = xs
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (**a - guess_center)
                    .abs()
                    .partial_cmp(&(**b - guess_center).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        params[2 + k] = data[idx].max(floor);
        params[2 + n_peaks + k] = spacing_guess / 4.0;
    }

    let residuals = |p: &[f64], r: &mut [f64]| {
        for (i, &x) in xs.iter().enumerate() {
            r[i] = comb_model(p, n_peaks, x) - data[i];
        }
    };
    let outcome = numerics::levenberg_marquardt(residuals, &params, xs.len(), 800, 1e-12);
    let build = |p: &[f64]| -> CombFit {
        let model: Vec<f64> = xs.iter().map(|&x| comb_model(p, n_peaks, x)).collect();
        let residual: Vec<f64> = model.iter().zip(data).map(|(m, d)| m - d).collect();
        CombFit {
            spacing: p[1].abs(),
            centers: (0..n_peaks).map(|k| p[0] + k as f64 * p[1]).collect(),
            amplitudes: (0..n_peaks).map(|k| p[2 + k]).collect(),
            widths: (0..n_peaks).map(|k| p[2 + n_peaks + k].abs()).collect(),
            model,
            residual,
        }
    };
    match outcome {
        Ok(fit) => Ok(build(&fit.params)),
        Err((e, fit)) => Err((e, Box::new(build(&fit.params)))),
    }
}

/// Estimate and remove the smooth background under a comb fit: a Gaussian is
/// fitted to (raw trough minima − fit trough minima) samples, subtracted
/// from the histogram, negatives clipped, and the mass renormalized.
pub fn subtract_background(histogram: &Histogram, fit: &CombFit) -> Result<Histogram> {
    let xs = &histogram.bin_centers;
    let data = &histogram.probability;
    let bg1 = estimate_background(histogram, fit);
    // refine once: refitting the comb on background-subtracted data lets
    // teeth relax to their true width, which sharpens the trough estimate
    let background = {
        let cleaned1: Vec<f64> = data.iter().zip(&bg1).map(|(d, b)| (d - b).max(0.0)).collect();
        let interim = Histogram {
            bin_centers: xs.clone(),
            probability: cleaned1,
            bin_width: histogram.bin_width,
        };
        match fit_gaussian_comb(&interim, fit.spacing, fit.centers.len()) {
            Ok(refit) => estimate_background(histogram, &refit),
            Err(_) => bg1,
        }
    };
    let mut cleaned: Vec<f64> = data
        .iter()
        .zip(&background)
        .map(|(d, b)| (d - b).max(0.0))
        .collect();
    let total: f64 = cleaned.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation(
            "background subtraction removed all histogram mass",
        ));
    }
    for c in &mut cleaned {
        *c /= total;
    }
    Ok(Histogram {
        bin_centers: xs.clone(),
        probability: cleaned,
        bin_width: histogram.bin_width,
    })
}

/// Gaussian background curve estimated from (raw trough minima − fit trough
/// minima), with the troughs at midpoints between comb centers plus flank
/// midpoints on either side.
fn estimate_background(histogram: &Histogram, fit: &CombFit) -> Vec<f64> {
    let xs = &histogram.bin_centers;
    let data = &histogram.probability;
    let mut centers = fit.centers.clone();
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let spacing = fit.spacing.max(histogram.bin_width);
    let mut trough_positions: Vec<f64> = centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    for k in [1, 3] {
        trough_positions.insert(0, centers[0] - 0.5 * k as f64 * spacing);
        trough_positions.push(centers[centers.len() - 1] + 0.5 * k as f64 * spacing);
    }
    // 3-bin smoothed minima to suppress the low bias of per-bin minima
    let smooth = |i: usize, v: &[f64]| -> f64 {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(v.len() - 1);
        v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
    };
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for &pos in &trough_positions {
        // the raw minimum and the fit minimum are taken independently over
        // the trough window
        let mut raw_min: Option<(f64, f64)> = None;
        let mut fit_min: Option<f64> = None;
        for (i, &x) in xs.iter().enumerate() {
            if (x - pos).abs() > 0.25 * spacing {
                continue;
            }
            let raw = smooth(i, data);
            if raw_min.map_or(true, |(_, r)| raw < r) {
                raw_min = Some((x, raw));
            }
            let m = smooth(i, &fit.model);
            if fit_min.map_or(true, |f| m < f) {
                fit_min = Some(m);
            }
        }
        if let (Some((x, raw)), Some(model)) = (raw_min, fit_min) {
            samples.push((x, raw - model));
        }
    }
    let scale = data.iter().cloned().fold(0.0_f64, f64::max);
    let significant = samples.iter().any(|&(_, v)| v > 1e-9 * scale);
    if samples.len() < 3 || !significant {
        return vec![0.0; xs.len()];
    }
    let x0 = samples
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap()
        .0;
    let a0 = samples.iter().map(|&(_, v)| v.max(0.0)).fold(0.0, f64::max);
    let span = xs.last().unwrap() - xs[0];
    let residuals = |p: &[f64], r: &mut [f64]| {
        for (i, &(x, v)) in samples.iter().enumerate() {
            let w = p[2].abs().max(1e-12);
            r[i] = p[0] * (-(x - p[1]) * (x - p[1]) / (2.0 * w * w)).exp() - v;
        }
    };
    let fit_bg =
        numerics::levenberg_marquardt(residuals, &[a0, x0, 0.3 * span], samples.len(), 300, 1e-10)
            .unwrap_or_else(|(_, f)| f);
    let (a, c, w) = (
        fit_bg.params[0],
        fit_bg.params[1],
        fit_bg.params[2].abs().max(1e-12),
    );
    xs.iter()
        .map(|&x| a * (-(x - c) * (x - c) / (2.0 * w * w)).exp())
        .collect()
}

/// Parameters of the synthetic shot generator.
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n_shots: usize,
    /// Fraction of shots carrying the planted anti-correlated signal.
    pub signal_fraction: f64,
    /// Coherently emitting atom count; the planted yield is N² and the
    /// planted coherent shift scales as √yield = N.
    pub n_atoms: f64,
    /// Absorbed-photon spacing between comb teeth.
    pub comb_spacing: f64,
    /// Lowest comb order and number of teeth.
    pub q_min: u32,
    pub n_teeth: usize,
    /// Zero-absorption transmitted-IR level.
    pub out_reference: f64,
    /// Planted anti-correlation gain: i_hh = gain · absorption.
    pub hh_gain: f64,
    /// Detector noise (standard deviation, same units as signals).
    pub noise: f64,
    /// Relative shot-to-shot energy jitter on i_0.
    pub energy_jitter: f64,
    /// Width of each comb tooth in absorbed-photon units.
    pub peak_width: f64,
    /// Width of the uncorrelated background blob.
    pub background_width: f64,
}

impl SynthParams {
    pub fn baseline() -> Self {
        SynthParams {
            n_shots: 4000,
            signal_fraction: 0.5,
            n_atoms: 1.0,
            comb_spacing: 2.0,
            q_min: 11,
            n_teeth: 5,
            out_reference: 60.0,
            hh_gain: 1.0,
            noise: 0.05,
            energy_jitter: 0.05,
            peak_width: 0.18,
            background_width: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_shots == 0 {
            return Err(Error::validation("n_shots must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) {
            return Err(Error::validation("signal_fraction must lie in [0, 1]"));
        }
        if !(self.comb_spacing > 0.0 && self.peak_width > 0.0 && self.background_width > 0.0) {
            return Err(Error::validation("widths and spacing must be positive"));
        }
        if self.n_teeth == 0 {
            return Err(Error::validation("need at least one comb tooth"));
        }
        Ok(())
    }
}

/// Planted ground truth accompanying a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    /// True when the shot carries planted signal.
    pub labels: Vec<bool>,
    pub slope: f64,
    pub comb_positions: Vec<f64>,
    /// Yield ∝ N².
    pub planted_yield: f64,
    /// δα ∝ √yield.
    pub planted_delta_alpha: f64,
}

/// Generate labeled synthetic shots: anti-correlated signal pairs with a
/// harmonic-comb absorption structure, an uncorrelated background blob, and
/// multiplicative energy jitter on every channel. Deterministic per seed.
pub fn synthesize_shots(params: &SynthParams, seed: u64) -> Result<(Vec<ShotRecord>, SynthTruth)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::validation(e.to_string()))?;
    let comb_positions: Vec<f64> = (0..params.n_teeth)
        .map(|k| (params.q_min as f64 + 2.0 * k as f64) * params.comb_spacing / 2.0)
        .collect();
    // plateau-then-decay tooth weights
    let weights: Vec<f64> = (0..params.n_teeth)
        .map(|k| 1.0 / (1.0 + 0.35 * k as f64))
        .collect();
    let w_total: f64 = weights.iter().sum();

    let mut shots = Vec::with_capacity(params.n_shots);
    let mut labels = Vec::with_capacity(params.n_shots);
    let mid = 0.5 * (comb_positions[0] + comb_positions[params.n_teeth - 1]);
    for id in 0..params.n_shots {
        let is_signal = (rng.gen::<f64>()) < params.signal_fraction;
        let jitter = (1.0 + params.energy_jitter * normal.sample(&mut rng)).max(0.1);
        let (absorption, i_hh) = if is_signal {
            let mut pick = rng.gen::<f64>() * w_total;
            let mut tooth = 0;
            for (k, w) in weights.iter().enumerate() {
                if pick < *w {
                    tooth = k;
                    break;
                }
                pick -= w;
            }
            let a = comb_positions[tooth] + params.peak_width * normal.sample(&mut rng);
            (a, params.hh_gain * a + params.noise * normal.sample(&mut rng))
        } else {
            // uncorrelated background: independent draws in both channels
            let a = (mid + params.background_width * normal.sample(&mut rng)).max(0.0);
            let hh = (params.hh_gain * mid
                + params.hh_gain * params.background_width * normal.sample(&mut rng))
            .max(0.0);
            (a, hh)
        };
        let i_out = params.out_reference - absorption + params.noise * normal.sample(&mut rng);
        shots.push(ShotRecord {
            id: id as u64,
            i_hh: i_hh * jitter,
            i_out: i_out * jitter,
            i_0: Some(jitter),
            phi: None,
            i_phi: None,
        });
        labels.push(is_signal);
    }
    let planted_yield = params.n_atoms * params.n_atoms;
    Ok((
        shots,
        SynthTruth {
            labels,
            slope: -params.hh_gain,
            comb_positions,
            planted_yield,
            planted_delta_alpha: planted_yield.sqrt(),
        },
    ))
}

/// Precision/recall of a selection against truth labels.
pub fn selection_quality(
    shots: &[ShotRecord],
    selected: &[ShotRecord],
    labels: &[bool],
) -> (f64, f64) {
    use std::collections::HashSet;
    let chosen: HashSet<u64> = selected.iter().map(|s| s.id).collect();
    let mut tp = 0.0_f64;
    let mut fp = 0.0_f64;
    let mut fn_ = 0.0_f64;
    for s in shots {
        let truth = labels[s.id as usize];
        let picked = chosen.contains(&s.id);
        match (truth, picked) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fn_ += 1.0,
            _ => {}
        }
    }
    (tp / (tp + fp).max(1.0), tp / (tp + fn_).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean_params() -> SynthParams {
        SynthParams {
            noise: 0.0,
            energy_jitter: 0.0,
            signal_fraction: 1.0,
            ..SynthParams::baseline()
        }
    }

    #[test]
    fn shot_csv_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shots.csv");
        std::fs::write(&path, "id,i_hh,i_out,i_0\n0,1.5,2.5,1.0\n1,1.6,2.4,1.1\n2,1.7,2.3,0.9\n")
            .unwrap();
        let shots = load_shots(&path).unwrap();
        assert_eq!(shots.len(), 3);
        assert_eq!(shots[1].i_0, Some(1.1));
        assert_eq!(shots[1].phi, None);

        write_shots(&path, &shots).unwrap();
        let back = load_shots(&path).unwrap();
        assert_eq!(back, shots);

        // missing i_0 column: loads fine, normalization rejects
        std::fs::write(&path, "id,i_hh,i_out\n0,1.5,2.5\n").unwrap();
        let bare = load_shots(&path).unwrap();
        assert_eq!(bare[0].i_0, None);
        assert!(energy_normalize(&bare).is_err());

        // malformed row carries its line number
        std::fs::write(&path, "id,i_hh,i_out\n0,1.5,2.5\n1,boom,2.4\n").unwrap();
        let err = load_shots(&path).unwrap_err();
        assert!(format!("{err}").contains("line 3"), "{err}");
    }

    #[test]
    fn energy_normalization_behavior() {
        let mk = |i0: f64| ShotRecord {
            id: 0,
            i_hh: 4.0,
            i_out: 8.0,
            i_0: Some(i0),
            phi: None,
            i_phi: None,
        };
        // all i_0 equal → identity
        let shots: Vec<ShotRecord> = (0..5).map(|_| mk(2.0)).collect();
        let out = energy_normalize(&shots).unwrap();
        for s in &out {
            assert_eq!(s.i_hh, 4.0);
            assert_eq!(s.i_out, 8.0);
        }
        // a doubled i_0 halves that shot's signals
        let mut shots: Vec<ShotRecord> = (0..5).map(|_| mk(1.0)).collect();
        shots[2] = mk(2.0);
        let out = energy_normalize(&shots).unwrap();
        assert_eq!(out[2].i_hh, 2.0);
        assert_eq!(out[2].i_out, 4.0);
        assert_eq!(out[0].i_hh, 4.0);

        // jittered synthetic data: normalized variance not larger than raw
        let mut p = clean_params();
        p.energy_jitter = 0.08;
        p.n_shots = 3000;
        let (shots, _) = synthesize_shots(&p, 9).unwrap();
        let raw: Vec<f64> = shots.iter().map(|s| s.i_out).collect();
        let norm = energy_normalize(&shots).unwrap();
        let fixed: Vec<f64> = norm.iter().map(|s| s.i_out).collect();
        assert!(numerics::variance(&fixed) <= numerics::variance(&raw));
    }

    #[test]
    fn band_fit_recovers_planted_slope() {
        let mut p = clean_params();
        p.n_shots = 2000;
        p.hh_gain = 1.7;
        p.noise = 0.02;
        let (shots, truth) = synthesize_shots(&p, 3).unwrap();
        let band = fit_anticorrelation_band(&shots, 1.0).unwrap();
        assert!(
            (band.slope - truth.slope).abs() / truth.slope.abs() < 0.02,
            "slope {} vs planted {}",
            band.slope,
            truth.slope
        );
    }

    #[test]
    fn band_fit_rejects_uncorrelated_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let shots: Vec<ShotRecord> = (0..500)
            .map(|id| ShotRecord {
                id,
                i_hh: rng.gen::<f64>(),
                i_out: rng.gen::<f64>(),
                i_0: Some(1.0),
                phi: None,
                i_phi: None,
            })
            .collect();
        assert!(fit_anticorrelation_band(&shots, 1.0).is_err());
        assert!(fit_anticorrelation_band(&shots[..50], 1.0).is_err());
    }

    #[test]
    fn band_width_contains_expected_fraction() {
        // Gaussian residual model: ≈ 68% of pure-signal shots inside 1σ
        let mut p = clean_params();
        p.noise = 0.3;
        p.n_shots = 20_000;
        let (shots, _) = synthesize_shots(&p, 5).unwrap();
        let band = fit_anticorrelation_band(&shots, 1.0).unwrap();
        let (selected, _) = select_shots(&shots, &band).unwrap();
        let fraction = selected.len() as f64 / shots.len() as f64;
        assert!((fraction - 0.68).abs() < 0.03, "fraction {fraction}");
    }

    #[test]
    fn selection_partition_properties() {
        let mut p = clean_params();
        p.n_shots = 500;
        let (shots, _) = synthesize_shots(&p, 21).unwrap();
        let band = SelectionBand {
            slope: -1.0,
            intercept: 100.0,
            half_width: 1e9,
        };
        let (selected, rejected) = select_shots(&shots, &band).unwrap();
        assert_eq!(selected.len(), shots.len());
        assert!(rejected.is_empty());

        let band = fit_anticorrelation_band(&shots, 1.0).unwrap();
        let (selected, rejected) = select_shots(&shots, &band).unwrap();
        assert_eq!(selected.len() + rejected.len(), shots.len());
        // idempotent on its own output
        let (again, none) = select_shots(&selected, &band).unwrap();
        assert_eq!(again.len(), selected.len());
        assert!(none.is_empty());

        let tight = SelectionBand {
            slope: -1.0,
            intercept: 1e6,
            half_width: 1e-12,
        };
        assert!(select_shots(&shots, &tight).is_err());
    }

    #[test]
    fn selection_precision_recall_on_mixture() {
        let mut p = SynthParams::baseline();
        p.signal_fraction = 0.5;
        p.n_shots = 8000;
        let (shots, truth) = synthesize_shots(&p, 11).unwrap();
        let normalized = energy_normalize(&shots).unwrap();
        // a 1σ band contains 68% of the signal by construction (see
        // band_width_contains_expected_fraction); the conditioning preset
        // widens to 2σ for the ≥0.9 precision/recall operating point
        let band = fit_anticorrelation_band(&normalized, 2.0).unwrap();
        let (selected, _) = select_shots(&normalized, &band).unwrap();
        let (precision, recall) = selection_quality(&normalized, &selected, &truth.labels);
        assert!(precision >= 0.9, "precision {precision}");
        assert!(recall >= 0.9, "recall {recall}");
    }

    #[test]
    fn histogram_basics() {
        // delta-like input lands in a single bin
        let shots: Vec<ShotRecord> = (0..50)
            .map(|id| ShotRecord {
                id,
                i_hh: 1.0,
                i_out: 5.0,
                i_0: None,
                phi: None,
                i_phi: None,
            })
            .collect();
        let h = absorption_histogram(&shots, 0.5).unwrap();
        assert_eq!(h.probability.iter().filter(|&&p| p > 0.0).count(), 1);
        assert!((h.mass() - 1.0).abs() < 1e-12);

        // comb input: peaks at planted positions ± bin width
        let mut p = clean_params();
        p.n_shots = 20_000;
        p.peak_width = 0.15;
        let (shots, truth) = synthesize_shots(&p, 2).unwrap();
        let h = absorption_histogram(&shots, 0.25).unwrap();
        assert!((h.mass() - 1.0).abs() < 1e-12);
        let floor = h.probability.iter().cloned().fold(0.0_f64, f64::max) * 0.2;
        let maxima = numerics::local_maxima(&h.probability, floor, 3);
        let offset = truth.comb_positions[0]
            - h.bin_centers[maxima
                .iter()
                .min_by(|&&a, &&b| {
                    h.bin_centers[a].partial_cmp(&h.bin_centers[b]).unwrap()
                })
                .copied()
                .unwrap_or(0)];
        for pos in &truth.comb_positions {
            let hit = maxima
                .iter()
                .any(|&m| (h.bin_centers[m] + offset - pos).abs() <= h.bin_width + 1e-12);
            assert!(hit, "no histogram peak near planted position {pos}");
        }
    }

    #[test]
    fn comb_fit_single_gaussian_and_spacing() {
        // comb of one: center recovered within 1%
        let xs: Vec<f64> = (0..120).map(|i| i as f64 * 0.1).collect();
        let truth_center = 6.37;
        let data: Vec<f64> = xs
            .iter()
            .map(|&x| 0.8 * (-(x - truth_center) * (x - truth_center) / (2.0 * 0.16)).exp())
            .collect();
        let total: f64 = data.iter().sum();
        let h = Histogram {
            bin_centers: xs,
            probability: data.into_iter().map(|d| d / total).collect(),
            bin_width: 0.1,
        };
        let fit = fit_gaussian_comb(&h, 2.0, 1).unwrap();
        assert!((fit.centers[0] - truth_center).abs() / truth_center < 0.01);

        // planted comb: spacing within 5%
        let mut p = clean_params();
        p.n_shots = 30_000;
        let (shots, _) = synthesize_shots(&p, 6).unwrap();
        let h = absorption_histogram(&shots, 0.2).unwrap();
        let fit = fit_gaussian_comb(&h, 1.8, p.n_teeth).unwrap();
        assert!(
            (fit.spacing - p.comb_spacing).abs() / p.comb_spacing < 0.05,
            "spacing {} vs planted {}",
            fit.spacing,
            p.comb_spacing
        );
    }

    #[test]
    fn comb_fit_scale_equivariance() {
        let mut p = clean_params();
        p.n_shots = 15_000;
        let (shots, _) = synthesize_shots(&p, 14).unwrap();
        let h = absorption_histogram(&shots, 0.2).unwrap();
        let fit = fit_gaussian_comb(&h, 1.8, p.n_teeth).unwrap();
        let c = 2.5;
        let h2 = Histogram {
            bin_centers: h.bin_centers.iter().map(|&x| c * x).collect(),
            probability: h.probability.clone(),
            bin_width: c * h.bin_width,
        };
        let fit2 = fit_gaussian_comb(&h2, 1.8 * c, p.n_teeth).unwrap();
        assert!(
            (fit2.spacing - c * fit.spacing).abs() / (c * fit.spacing) < 1e-3,
            "{} vs {}",
            fit2.spacing,
            c * fit.spacing
        );
    }

    #[test]
    fn comb_fit_rejects_flat_histogram() {
        let h = Histogram {
            bin_centers: (0..60).map(|i| i as f64 * 0.2).collect(),
            probability: vec![1.0 / 60.0; 60],
            bin_width: 0.2,
        };
        assert!(fit_gaussian_comb(&h, 2.0, 3).is_err());
    }

    #[test]
    fn background_subtraction() {
        // zero background plant (noise-free analytic comb): output ≈ input
        let xs: Vec<f64> = (0..220).map(|i| (i as f64 + 0.5) * 0.1).collect();
        let comb = |x: f64| -> f64 {
            (0..5)
                .map(|k| {
                    let c = 3.0 + 2.0 * k as f64;
                    (0.9 - 0.1 * k as f64) * (-(x - c) * (x - c) / (2.0 * 0.04)).exp()
                })
                .sum()
        };
        let raw: Vec<f64> = xs.iter().map(|&x| comb(x)).collect();
        let total: f64 = raw.iter().sum();
        let h = Histogram {
            bin_centers: xs,
            probability: raw.into_iter().map(|v| v / total).collect(),
            bin_width: 0.1,
        };
        let fit = fit_gaussian_comb(&h, 1.9, 5).unwrap();
        let cleaned = subtract_background(&h, &fit).unwrap();
        assert!((cleaned.mass() - 1.0).abs() < 1e-12);
        for k in 0..h.probability.len() {
            assert!(
                (cleaned.probability[k] - h.probability[k]).abs() < 1e-6,
                "bin {k} changed under zero background"
            );
        }

        // planted broad background: post-subtraction residual background
        // mass under 10% of the planted mass
        let mut p = SynthParams::baseline();
        p.n_shots = 40_000;
        p.signal_fraction = 0.6;
        p.noise = 0.02;
        p.energy_jitter = 0.0;
        let (shots, truth) = synthesize_shots(&p, 12).unwrap();
        let h = absorption_histogram(&shots, 0.2).unwrap();
        let fit = fit_gaussian_comb(&h, 1.9, p.n_teeth).unwrap();
        let cleaned = subtract_background(&h, &fit).unwrap();
        assert!((cleaned.mass() - 1.0).abs() < 1e-12);

        // signal-only reference histogram with the SAME zero-absorption
        // reference level and binning as the full histogram
        let reference_level = shots.iter().map(|s| s.i_out).fold(f64::NEG_INFINITY, f64::max);
        let signal_values: Vec<f64> = shots
            .iter()
            .filter(|s| truth.labels[s.id as usize])
            .map(|s| reference_level - s.i_out)
            .collect();
        let bg_mass_before = 1.0 - signal_values.len() as f64 / shots.len() as f64;
        let mut ref_probability = vec![0.0; cleaned.probability.len()];
        for v in &signal_values {
            let idx = ((v / 0.2).floor() as usize).min(ref_probability.len() - 1);
            ref_probability[idx] += 1.0;
        }
        let total: f64 = ref_probability.iter().sum();
        for p in &mut ref_probability {
            *p /= total;
        }
        let mut residual_bg = 0.0;
        for (k, &p_out) in cleaned.probability.iter().enumerate() {
            residual_bg += (p_out - ref_probability[k]).max(0.0);
        }
        assert!(
            residual_bg < 0.1 * bg_mass_before,
            "residual background {residual_bg:.4} vs planted {bg_mass_before:.4}"
        );
    }

    #[test]
    fn generator_determinism_and_scaling() {
        let p = SynthParams::baseline();
        let (a, _) = synthesize_shots(&p, 33).unwrap();
        let (b, _) = synthesize_shots(&p, 33).unwrap();
        assert_eq!(a, b);
        let (c, _) = synthesize_shots(&p, 34).unwrap();
        assert_ne!(a, c);

        // doubling N quadruples the planted yield and doubles planted δα
        let mut p2 = p.clone();
        p2.n_atoms = 2.0 * p.n_atoms;
        let (_, t1) = synthesize_shots(&p, 1).unwrap();
        let (_, t2) = synthesize_shots(&p2, 1).unwrap();
        assert!((t2.planted_yield / t1.planted_yield - 4.0).abs() < 1e-12);
        assert!((t2.planted_delta_alpha / t1.planted_delta_alpha - 2.0).abs() < 1e-12);

        // perfect anti-correlation at zero noise
        let (shots, truth) = synthesize_shots(&clean_params(), 2).unwrap();
        for s in shots.iter().take(200) {
            let on_line = s.i_hh / s.i_0.unwrap()
                - (-truth.slope) * (p.out_reference - s.i_out / s.i_0.unwrap());
            assert!(on_line.abs() < 1e-9, "off the planted line: {on_line}");
        }
    }
}
