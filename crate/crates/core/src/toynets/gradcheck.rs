//! Central-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::nets::{backward_params, Net, Network};
use crate::imagery::Image;
use crate::{Error, Result};

/// Probes every parameter up to this count, otherwise a seeded subset.
pub const FULL_PROBE_LIMIT: usize = 5_000;
pub const SAMPLED_PROBES: usize = 512;
/// Denominator floor of the relative error.
pub const ABS_FLOOR: f64 = 1e-6;
const PROBE_SEED: u64 = 0x5EED_CAFE;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub probe_count: usize,
    /// Probes whose perturbation crossed a ReLU kink.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Fixed pseudo-random upstream gradient, so the checked scalar touches every output.
pub fn probe_upstream(len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn probe_indices(total: usize) -> Vec<usize> {
    if total <= FULL_PROBE_LIMIT {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        let mut idx = sample(&mut rng, total, SAMPLED_PROBES).into_vec();
        idx.sort_unstable();
        idx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GradCheckReport {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.max_abs_error = self.max_abs_error.max((analytic - numeric).abs());
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
        self.probe_count += 1;
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    Ok(())
}

/// Compares the parameter gradient from `analytic` with central differences of
/// `<u, output>` for a fixed pseudo-random `u`.
pub fn check_params_with<N, F>(net: &N, image: &Image, step: f64, analytic: F) -> Result<GradCheckReport>
where
    N: Network,
    F: Fn(&N, &Image, &[f64]) -> Result<Vec<f64>>,
{
    check_step(step)?;
    let base = net.net();
    let (h, w) = (image.height(), image.width());
    let (out, cache) = base.forward(image)?;
    let pattern = cache.activation_pattern();
    let upstream = probe_upstream(out.len());
    let grad = analytic(net, image, &upstream)?;

    let mut probe: Net = base.clone();
    let mut report = GradCheckReport::default();
    for j in probe_indices(base.params().len()) {
        let original = base.params()[j];
        let mut eval = |value: f64| -> Result<(f64, bool)> {
            probe.params_mut()[j] = value;
            let (o, c) = probe.forward_raw(image.data(), h, w)?;
            Ok((dot(&upstream, &o), c.activation_pattern() == pattern))
        };
        let (plus, same_plus) = eval(original + step)?;
        let (minus, same_minus) = eval(original - step)?;
        probe.params_mut()[j] = original;
        if same_plus && same_minus {
            report.record(grad[j], (plus - minus) / (2.0 * step));
        } else {
            report.skipped += 1;
        }
    }
    Ok(report)
}

/// Checks the exact parameter gradient of `net`.
pub fn finite_diff_check<N: Network>(net: &N, image: &Image, step: f64) -> Result<GradCheckReport> {
    check_params_with(net, image, step, |n, img, up| backward_params(n, img, up))
}

/// Checks the input gradient of `net` on every input value.
pub fn finite_diff_check_input<N: Network>(net: &N, image: &Image, step: f64) -> Result<GradCheckReport> {
    check_step(step)?;
    let base = net.net();
    let (h, w) = (image.height(), image.width());
    let (out, cache) = base.forward(image)?;
    let pattern = cache.activation_pattern();
    let upstream = probe_upstream(out.len());
    let grad = base
        .backward_raw(&cache, &upstream, super::nets::GradRequest::INPUT)?
        .input
        .expect("input gradient requested");
    let mut values = image.data().to_vec();
    let mut report = GradCheckReport::default();
    for j in 0..values.len() {
        let original = values[j];
        let mut eval = |value: f64| -> Result<(f64, bool)> {
            values[j] = value;
            let (o, c) = base.forward_raw(&values, h, w)?;
            Ok((dot(&upstream, &o), c.activation_pattern() == pattern))
        };
        let (plus, same_plus) = eval(original + step)?;
        let (minus, same_minus) = eval(original - step)?;
        values[j] = original;
        if same_plus && same_minus {
            report.record(grad[j], (plus - minus) / (2.0 * step));
        } else {
            report.skipped += 1;
        }
    }
    Ok(report)
}
