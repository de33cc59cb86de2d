//! Draws the completion time of one elementary link in O(1) random numbers.
//!
//! A link round is: both end sites retry local preparation once per source
//! period until each succeeds, then one heralding attempt over the fiber.
//! With `G1, G2` the per-site attempt counts, the round length in periods is
//! `M + D` with `M = max(G1, G2)` and `D = r L0 / c`. Writing
//! `M = min(G1, G2) + B G'` where `min ~ Geom(1 - q^2)`, `B` marks an untied
//! round (probability `2q / (1 + q)`) and `G' ~ Geom(p)` is independent, a run
//! of `K ~ Geom(p0)` rounds only needs the sums of these pieces, which are
//! negative binomial and binomial.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, Poisson, StandardNormal};

/// Above this mean, Poisson draws use the normal limit.
const POISSON_EXACT_MAX: f64 = 1e8;
/// Above this count, binomial draws use the normal limit.
const BINOMIAL_EXACT_MAX: f64 = 4.0e18;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkSampler {
    p_l: f64,
    /// `1 - q^2`: success probability of the earlier of two sites.
    p_min: f64,
    untied: f64,
    p0: f64,
    period_s: f64,
    tau_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinkDraw {
    pub duration_s: f64,
    /// Source pulses used at both end sites together.
    pub prep_attempts: f64,
    pub link_attempts: f64,
}

impl LinkSampler {
    pub fn new(p_l: f64, p0: f64, r_hz: f64, tau_s: f64) -> Self {
        let q = 1.0 - p_l;
        Self { p_l, p_min: p_l * (1.0 + q), untied: 2.0 * q / (1.0 + q), p0, period_s: 1.0 / r_hz, tau_s }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LinkDraw {
        let k = geometric_trials(self.p0, rng);
        let min_sum = k + negative_binomial_failures(k, self.p_min, rng);
        let untied = binomial(k, self.untied, rng);
        let extra_sum = if untied > 0.0 { untied + negative_binomial_failures(untied, self.p_l, rng) } else { 0.0 };
        LinkDraw {
            duration_s: (min_sum + extra_sum) * self.period_s + k * self.tau_s,
            prep_attempts: 2.0 * min_sum + extra_sum,
            link_attempts: k,
        }
    }
}

/// Number of Bernoulli(`p`) trials up to and including the first success.
pub(crate) fn geometric_trials<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    let e: f64 = Exp1.sample(rng);
    1.0 + (e / -(-p).ln_1p()).floor()
}

/// Failures before the `k`-th success, via the gamma-Poisson mixture.
fn negative_binomial_failures<R: Rng + ?Sized>(k: f64, p: f64, rng: &mut R) -> f64 {
    if p >= 1.0 || k == 0.0 {
        return 0.0;
    }
    let gamma = Gamma::new(k, (1.0 - p) / p).expect("positive shape and scale");
    poisson(gamma.sample(rng), rng)
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else if lambda < POISSON_EXACT_MAX {
        Poisson::new(lambda).expect("positive mean").sample(rng)
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (lambda + lambda.sqrt() * z).round().max(0.0)
    }
}

fn binomial<R: Rng + ?Sized>(n: f64, p: f64, rng: &mut R) -> f64 {
    if p <= 0.0 || n == 0.0 {
        0.0
    } else if n < BINOMIAL_EXACT_MAX {
        Binomial::new(n as u64, p).expect("valid probability").sample(rng) as f64
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (n * p + (n * p * (1.0 - p)).sqrt() * z).round().clamp(0.0, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straightforward per-pulse simulation of the same process.
    fn naive<R: Rng>(p_l: f64, p0: f64, d: f64, rng: &mut R) -> (f64, f64, f64) {
        let (mut periods, mut pulses, mut attempts) = (0.0, 0.0, 0.0);
        loop {
            let mut done = [false, false];
            let mut t = 0.0;
            while !(done[0] && done[1]) {
                t += 1.0;
                for s in &mut done {
                    if !*s {
                        pulses += 1.0;
                        *s = rng.gen::<f64>() < p_l;
                    }
                }
            }
            periods += t + d;
            attempts += 1.0;
            if rng.gen::<f64>() < p0 {
                return (periods, pulses, attempts);
            }
        }
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn matches_per_pulse_simulation() {
        let (p_l, p0, d) = (0.3, 0.2, 2.5);
        let s = LinkSampler::new(p_l, p0, 1.0, d);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40_000;
        let fast: Vec<LinkDraw> = (0..n).map(|_| s.draw(&mut rng)).collect();
        let slow: Vec<(f64, f64, f64)> = (0..n).map(|_| naive(p_l, p0, d, &mut rng)).collect();
        let cols_fast = [
            fast.iter().map(|x| x.duration_s).collect::<Vec<_>>(),
            fast.iter().map(|x| x.prep_attempts).collect(),
            fast.iter().map(|x| x.link_attempts).collect(),
        ];
        let cols_slow = [
            slow.iter().map(|x| x.0).collect::<Vec<_>>(),
            slow.iter().map(|x| x.1).collect(),
            slow.iter().map(|x| x.2).collect(),
        ];
        for (a, b) in cols_fast.iter().zip(&cols_slow) {
            let (ma, va) = mean_var(a);
            let (mb, vb) = mean_var(b);
            let se = ((va + vb) / n as f64).sqrt();
            assert!((ma - mb).abs() < 4.0 * se, "{ma} vs {mb} (se {se})");
            assert!((va / vb - 1.0).abs() < 0.1, "{va} vs {vb}");
        }
    }

    #[test]
    fn closed_form_moments() {
        let (p_l, p0, d) = (0.05, 0.01, 40.0);
        let s = LinkSampler::new(p_l, p0, 1.0, d);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let durations: Vec<f64> = (0..n).map(|_| s.draw(&mut rng).duration_s).collect();
        let (m, v) = mean_var(&durations);
        // E[max of two Geom(p)] = 2/p - 1/(p(2-p)); rounds ~ Geom(p0).
        let e_m = 2.0 / p_l - 1.0 / (p_l * (2.0 - p_l));
        let expected = (e_m + d) / p0;
        assert!((m - expected).abs() < 4.0 * (v / n as f64).sqrt(), "{m} vs {expected}");
    }

    #[test]
    fn deterministic_when_certain() {
        let s = LinkSampler::new(1.0, 1.0, 10.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = s.draw(&mut rng);
        assert_eq!(d, LinkDraw { duration_s: 0.1 + 0.5, prep_attempts: 2.0, link_attempts: 1.0 });
    }

    #[test]
    fn tiny_probabilities_stay_finite() {
        let s = LinkSampler::new(6.6e-4, 1e-26, 39.2e6, 6.4e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let d = s.draw(&mut rng);
            assert!(d.duration_s.is_finite() && d.duration_s > 0.0);
            assert!(d.link_attempts >= 1.0);
        }
    }
}
