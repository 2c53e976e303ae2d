//! Damped least-squares (Levenberg-Marquardt) fit of a sum of Lorentzians.

use nalgebra::{DMatrix, DVector};

use super::{lorentzian, NmrError, Peak, Result};

pub const MAX_ITERATIONS: usize = 200;
/// Relative residual `||y - model|| / ||y||` treated as an exact fit, and the
/// relative cost decrease below which an accepted step counts as converged.
pub const RELATIVE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Fitted peaks sorted by decreasing center frequency. Labels are empty
    /// unless the initial peaks carried them.
    pub peaks: Vec<Peak>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Fits `n_peaks` Lorentzians, seeding them from the tallest features of `|y|`.
pub fn lorentzian_fit(samples: &[(f64, f64)], n_peaks: usize) -> Result<FitReport> {
    if n_peaks == 0 {
        return Err(NmrError::InvalidFitInput("need at least one peak".into()));
    }
    let initial = initial_guesses(samples, n_peaks)?;
    lorentzian_fit_from(samples, &initial)
}

/// Fits starting from caller-supplied peaks (center, intensity, width).
pub fn lorentzian_fit_from(samples: &[(f64, f64)], initial: &[Peak]) -> Result<FitReport> {
    if initial.is_empty() {
        return Err(NmrError::InvalidFitInput("need at least one peak".into()));
    }
    if samples.len() < 3 * initial.len() {
        return Err(NmrError::InvalidFitInput(format!(
            "{} samples for {} peaks",
            samples.len(),
            initial.len()
        )));
    }
    if samples
        .iter()
        .any(|(f, y)| !f.is_finite() || !y.is_finite())
    {
        return Err(NmrError::InvalidFitInput("non-finite sample".into()));
    }
    let y_norm = samples.iter().map(|(_, y)| y * y).sum::<f64>().sqrt();
    let mut params: Vec<f64> = initial
        .iter()
        .flat_map(|p| [p.center, p.intensity, p.linewidth.abs()])
        .collect();

    let finish = |params: &[f64], iterations: usize, cost: f64| {
        let mut peaks: Vec<Peak> = params
            .chunks(3)
            .zip(initial)
            .map(|(p, seed)| Peak {
                center: p[0],
                intensity: p[1],
                linewidth: p[2].abs(),
                ..seed.clone()
            })
            .collect();
        peaks.sort_by(|a, b| b.center.total_cmp(&a.center));
        FitReport {
            peaks,
            iterations,
            relative_residual: relative(cost.sqrt(), y_norm),
        }
    };

    let mut cost = cost_of(samples, &params);
    if relative(cost.sqrt(), y_norm) < RELATIVE_THRESHOLD {
        return Ok(finish(&params, 0, cost));
    }
    let mut mu = 1e-3;
    for iteration in 1..=MAX_ITERATIONS {
        let (jac, resid) = jacobian(samples, &params);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &resid;
        let scale = jtj.diagonal().max().max(1e-300);
        loop {
            let mut lhs = jtj.clone();
            for i in 0..lhs.nrows() {
                // Marquardt scaling with a floor so parameters with zero
                // sensitivity (e.g. the width of a vanishing peak) stay pinned.
                lhs[(i, i)] += mu * jtj[(i, i)].max(1e-12 * scale);
            }
            let Some(step) = lhs.lu().solve(&grad) else {
                mu *= 10.0;
                if mu > 1e16 {
                    return Ok(finish(&params, iteration, cost));
                }
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, d)| p + d).collect();
            let trial_cost = cost_of(samples, &trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let improvement = (cost - trial_cost) / cost;
                params = trial;
                cost = trial_cost;
                mu = (mu / 10.0).max(1e-12);
                if relative(cost.sqrt(), y_norm) < RELATIVE_THRESHOLD
                    || improvement < RELATIVE_THRESHOLD
                {
                    return Ok(finish(&params, iteration, cost));
                }
                break;
            }
            mu *= 10.0;
            if mu > 1e16 {
                // No descent direction left: a (local) minimum.
                return Ok(finish(&params, iteration, cost));
            }
        }
    }
    Err(NmrError::FitDiverged {
        iterations: MAX_ITERATIONS,
        residual: relative(cost.sqrt(), y_norm),
    })
}

fn relative(residual: f64, y_norm: f64) -> f64 {
    if y_norm > 0.0 {
        residual / y_norm
    } else {
        residual
    }
}

fn model(f: f64, params: &[f64]) -> f64 {
    params
        .chunks(3)
        .map(|p| lorentzian(f, p[0], p[1], p[2]))
        .sum()
}

fn cost_of(samples: &[(f64, f64)], params: &[f64]) -> f64 {
    samples
        .iter()
        .map(|&(f, y)| (y - model(f, params)).powi(2))
        .sum()
}

/// Jacobian of the model with respect to `(center, intensity, width)` per
/// peak, and the residual `y - model`.
fn jacobian(samples: &[(f64, f64)], params: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let mut jac = DMatrix::zeros(samples.len(), params.len());
    let mut resid = DVector::zeros(samples.len());
    for (row, &(f, y)) in samples.iter().enumerate() {
        resid[row] = y - model(f, params);
        for (k, p) in params.chunks(3).enumerate() {
            let (f0, amp, w) = (p[0], p[1], p[2]);
            let g = w / 2.0;
            let d = f - f0;
            let den = d * d + g * g;
            jac[(row, 3 * k)] = amp * g * g * 2.0 * d / (den * den);
            jac[(row, 3 * k + 1)] = g * g / den;
            jac[(row, 3 * k + 2)] = amp * g * d * d / (den * den);
        }
    }
    (jac, resid)
}

/// Repeatedly takes the largest `|y|` sample as a peak, estimates its width
/// from the half-height crossings, and masks that region out.
fn initial_guesses(samples: &[(f64, f64)], n_peaks: usize) -> Result<Vec<Peak>> {
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut masked = vec![false; sorted.len()];
    let spacing = if sorted.len() > 1 {
        (sorted[sorted.len() - 1].0 - sorted[0].0) / (sorted.len() - 1) as f64
    } else {
        1.0
    };
    let mut peaks = Vec::with_capacity(n_peaks);
    for _ in 0..n_peaks {
        let Some((idx, &(f0, y0))) = sorted
            .iter()
            .enumerate()
            .filter(|(i, _)| !masked[*i])
            .max_by(|a, b| a.1 .1.abs().total_cmp(&b.1 .1.abs()))
        else {
            return Err(NmrError::InvalidFitInput(format!(
                "found only {} peaks",
                peaks.len()
            )));
        };
        if y0 == 0.0 {
            return Err(NmrError::InvalidFitInput(format!(
                "found only {} peaks",
                peaks.len()
            )));
        }
        let half = y0.abs() / 2.0;
        let mut lo = idx;
        while lo > 0 && sorted[lo - 1].1.abs() > half && sorted[lo - 1].1.signum() == y0.signum() {
            lo -= 1;
        }
        let mut hi = idx;
        while hi + 1 < sorted.len()
            && sorted[hi + 1].1.abs() > half
            && sorted[hi + 1].1.signum() == y0.signum()
        {
            hi += 1;
        }
        let width = ((sorted[hi].0 - sorted[lo].0) + spacing).max(spacing);
        // Mask out to a few widths so the tails of this peak are not re-picked.
        let reach = 2.0 * width;
        for (i, m) in masked.iter_mut().enumerate() {
            if (sorted[i].0 - f0).abs() <= reach {
                *m = true;
            }
        }
        peaks.push(Peak {
            label: String::new(),
            center: f0,
            intensity: y0,
            linewidth: width,
            populations: (0, 0),
        });
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;

    fn synth(peaks: &[(f64, f64, f64)], lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let f = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (
                    f,
                    peaks.iter().map(|&(c, a, w)| lorentzian(f, c, a, w)).sum(),
                )
            })
            .collect()
    }

    #[test]
    fn single_peak_is_recovered() {
        let samples = synth(&[(12.3, 0.8, 1.7)], 0.0, 25.0, 401);
        let fit = lorentzian_fit(&samples, 1).unwrap();
        let p = &fit.peaks[0];
        assert!((p.center - 12.3).abs() / 12.3 < 1e-6);
        assert!((p.intensity - 0.8).abs() / 0.8 < 1e-6);
        assert!((p.linewidth - 1.7).abs() / 1.7 < 1e-6);
    }

    #[test]
    fn negative_peak_is_recovered() {
        let samples = synth(&[(-3.0, -0.4, 1.0)], -10.0, 4.0, 301);
        let fit = lorentzian_fit(&samples, 1).unwrap();
        assert!((fit.peaks[0].intensity + 0.4).abs() < 1e-7);
    }

    #[test]
    fn overlapping_pair_is_resolved() {
        let w = 1.0;
        let samples = synth(&[(0.0, 1.0, w), (3.0 * w, 0.6, w)], -8.0, 11.0, 761);
        let fit = lorentzian_fit(&samples, 2).unwrap();
        // Sorted by decreasing center.
        assert!((fit.peaks[0].intensity - 0.6).abs() / 0.6 < 0.01);
        assert!((fit.peaks[1].intensity - 1.0).abs() < 0.01);
    }

    #[test]
    fn noisy_ratio_is_stable() {
        let samples = synth(&[(-10.0, 1.0, 1.0), (10.0, 0.5, 1.0)], -30.0, 30.0, 1201);
        let sigma = 0.01;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<(f64, f64)> = samples
            .iter()
            .map(|&(f, y)| (f, y + noise.sample(&mut rng)))
            .collect();
        let fit = lorentzian_fit(&noisy, 2).unwrap();
        let ratio = fit.peaks[0].intensity / fit.peaks[1].intensity;
        assert!((ratio - 0.5).abs() / 0.5 < 0.03, "ratio {ratio}");
    }

    #[test]
    fn seeded_fit_handles_vanishing_peaks() {
        let truth = [(20.0, 0.3, 1.0), (0.0, 0.0, 1.0), (-20.0, -0.7, 1.0)];
        let samples = synth(&truth, -40.0, 40.0, 1601);
        let seeds: Vec<Peak> = truth
            .iter()
            .map(|&(c, _, w)| Peak {
                label: String::new(),
                center: c,
                intensity: 0.1,
                linewidth: w,
                populations: (0, 0),
            })
            .collect();
        let fit = lorentzian_fit_from(&samples, &seeds).unwrap();
        for (p, t) in fit.peaks.iter().zip(truth) {
            assert!((p.intensity - t.1).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(lorentzian_fit(&[(0.0, 1.0)], 0).is_err());
        assert!(lorentzian_fit(&[(0.0, 1.0), (1.0, 0.5)], 1).is_err());
        assert!(lorentzian_fit(&synth(&[], 0.0, 1.0, 10), 1).is_err());
    }
}
