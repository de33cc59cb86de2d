//! Exact expected completion time for chains of one or two elementary links.
//!
//! Times are handled in source periods `1/r`. One link round costs
//! `X = M + D` periods with `M` the later of two geometric preparations and
//! `D = r L0 / c`; the link completes after `K ~ Geom(p0)` rounds, at `T`.
//!
//! * `n = 0`: the mean round length comes from an absorbing Markov chain over
//!   the preparation states of the two sites; Wald's identity gives
//!   `E[T] = E[round] / p0`.
//! * `n = 1`: the two links run concurrently and each swap round costs
//!   `max(T1, T2)` plus the optional signalling delay, so
//!   `E = (2 E[T] - E[min(T1, T2)] + delay) / p_swap`. With `S(t) = P(T > t)`,
//!   `E[min] = int S^2 dt`, evaluated by Plancherel from the characteristic
//!   function of `T`:
//!   `int S^2 = (1/pi) int_0^inf |1 - phi_X|^2 / (w^2 |1 - q0 phi_X|^2) dw`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use super::{Setup, SimError, SimPolicy};
use crate::params::ProtocolParams;

/// Relative accuracy targeted for `int S^2`.
const REL_TOL: f64 = 1e-6;

/// Mean length of one link round (preparation of both sites, then one
/// heralding attempt), from the absorbing chain on `{00, 10, 01, 11}`.
fn mean_round_periods(p_l: f64, d: f64) -> f64 {
    let q = 1.0 - p_l;
    // Transient states 00, 10, 01, 11; from 11 the attempt ends the round.
    #[rustfmt::skip]
    let qm = Matrix4::new(
        q * q, p_l * q, q * p_l, p_l * p_l,
        0.0,   q,       0.0,     p_l,
        0.0,   0.0,     q,       p_l,
        0.0,   0.0,     0.0,     0.0,
    );
    let cost = Vector4::new(1.0, 1.0, 1.0, d);
    let t = (Matrix4::identity() - qm).lu().solve(&cost).expect("substochastic chain with p_l > 0");
    t[0]
}

/// `1 - e^{ix}` without cancellation.
fn one_minus_cis(x: f64) -> Complex64 {
    let s = (0.5 * x).sin();
    Complex64::new(2.0 * s * s, -x.sin())
}

/// `E[min(T1, T2)]` in periods for two independent links with local success
/// probability `p_l`, heralding probability `p0` and fiber delay `d` periods.
pub fn min_overlap_integral(p_l: f64, p0: f64, d: f64) -> f64 {
    let q = 1.0 - p_l;
    let p_min = p_l * (1.0 + q);
    let q0 = 1.0 - p0;
    let e_m = 2.0 / p_l - 1.0 / p_min;
    let e_x = e_m + d;
    let e_t = e_x / p0;

    let g = |w: f64| -> f64 {
        let z1 = one_minus_cis(w);
        let one_minus_phi_m =
            z1 * (2.0 / (Complex64::new(p_l, 0.0) + q * z1) - 1.0 / (Complex64::new(p_min, 0.0) + q * q * z1));
        let delay = Complex64::from_polar(1.0, w * d);
        let one_minus_phi_x = one_minus_cis(w * d) + delay * one_minus_phi_m;
        let denom = Complex64::new(p0, 0.0) + q0 * one_minus_phi_x;
        one_minus_phi_x.norm_sqr() / (w * w * denom.norm_sqr())
    };

    // |1 - phi_T| <= 2 bounds the tail beyond omega by 4 / (pi omega).
    let abs_tol = REL_TOL * e_t;
    let omega = 4.0 / (PI * 0.5 * abs_tol);
    let lorentz = 1.0 / e_t;
    let panel = PI / e_x;

    let mut breaks = vec![0.0];
    let mut w = (1e-3 * lorentz).min(0.5 * panel).min(omega);
    while w < panel.min(omega) {
        breaks.push(w);
        w *= 2.0;
    }
    let mut w = panel.min(omega);
    while w < omega {
        breaks.push(w);
        w += panel;
    }
    breaks.push(omega);

    let per_panel = 0.5 * abs_tol * PI / breaks.len() as f64;
    let integral: f64 = breaks.windows(2).map(|ab| adaptive_gk(&g, ab[0], ab[1], per_panel, 0)).sum();
    integral / PI
}

// Gauss-Kronrod 7/15 nodes on [-1, 1].
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XK[i]) + f(c + h * XK[i]);
        kronrod += WK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive_gk(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth >= 40 {
        return value;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, 0.5 * tol, depth + 1) + adaptive_gk(f, m, b, 0.5 * tol, depth + 1)
}

/// Exact mean end-to-end time in seconds for `n <= 1`, under the same event
/// semantics as the simulator.
pub fn exact_expected_time_small(params: &ProtocolParams, policy: &SimPolicy) -> Result<f64, SimError> {
    if params.n > 1 {
        return Err(SimError::UnsupportedDepth(params.n));
    }
    Ok(expected_seconds(&Setup::new(params, policy)?))
}

fn expected_seconds(s: &Setup) -> f64 {
    let d = s.tau_s * s.r_hz;
    let round = mean_round_periods(s.p_l, d);
    let e_t = round / s.p0;
    let periods = if s.n == 0 {
        e_t
    } else {
        let e_max = 2.0 * e_t - min_overlap_integral(s.p_l, s.p0, d);
        (e_max + s.swap_delay_s(0) * s.r_hz) / s.p_swap
    };
    periods / s.r_hz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{estimate, SimPolicy};

    /// pmf of `T` on the integer lattice for integer `d`, by direct renewal convolution.
    fn lattice_pmf(p_l: f64, p0: f64, d: usize, len: usize) -> Vec<f64> {
        let q = 1.0 - p_l;
        let mut fx = vec![0.0; len];
        for k in 1..len.saturating_sub(d) {
            fx[k + d] = 2.0 * p_l * q.powi(k as i32 - 1) - (1.0 - q * q) * (q * q).powi(k as i32 - 1);
        }
        let mut ft = vec![0.0; len];
        for t in 0..len {
            let mut acc = p0 * fx[t];
            for x in 1..=t {
                acc += (1.0 - p0) * fx[x] * ft[t - x];
            }
            ft[t] = acc;
        }
        ft
    }

    fn brute_force_min(p_l: f64, p0: f64, d: usize, len: usize) -> (f64, f64) {
        let ft = lattice_pmf(p_l, p0, d, len);
        let mut survival = 1.0;
        let (mut e_min, mut e_t) = (0.0, 0.0);
        for f in &ft {
            survival -= f;
            e_min += survival * survival;
            e_t += survival;
        }
        assert!(survival < 1e-11, "lattice too short: {survival}");
        (e_min, e_t)
    }

    #[test]
    fn markov_round_matches_closed_form() {
        for &(p, d) in &[(1.0, 0.0), (0.5, 3.0), (6.643e-4, 15680.0), (0.01, 0.25)] {
            let e_m = 2.0 / p - 1.0 / (p * (2.0 - p));
            let r = mean_round_periods(p, d);
            assert!((r - (e_m + d)).abs() <= 1e-9 * r, "{p} {d}: {r}");
        }
    }

    #[test]
    fn overlap_matches_lattice_sum() {
        for &(p_l, p0, d) in &[(0.3, 0.2, 3usize), (0.5, 0.5, 0), (0.1, 0.05, 7), (0.9, 0.6, 1), (1.0, 0.3, 2)] {
            let (e_min, e_t) = brute_force_min(p_l, p0, d, 12_000);
            let e_m = 2.0 / p_l - 1.0 / (p_l * (2.0 - p_l));
            assert!((e_t - (e_m + d as f64) / p0).abs() < 1e-9 * e_t);
            let parseval = min_overlap_integral(p_l, p0, d as f64);
            assert!((parseval - e_min).abs() < 2e-6 * e_min, "{p_l} {p0} {d}: {parseval} vs {e_min}");
        }
    }

    #[test]
    fn deterministic_link() {
        // T = 1 + d exactly, so E[min] = E[T].
        let v = min_overlap_integral(1.0, 1.0, 4.5);
        assert!((v - 5.5).abs() < 1e-5, "{v}");
    }

    #[test]
    fn unit_efficiency_single_link() {
        let p = ProtocolParams { r_hz: 1e6, l_km: 100.0, n: 0, ..ProtocolParams::ideal() };
        let e = exact_expected_time_small(&p, &SimPolicy::default()).unwrap();
        // p_l = 1/2 with unit efficiencies; only the fiber loses photons.
        let e_m = 2.0 / 0.5 - 1.0 / 0.75;
        let expected = (e_m / 1e6 + 100.0 / 2e5) / crate::rates::p_link(&p).unwrap();
        assert!((e - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn certain_stages() {
        let s = Setup { n: 1, p_l: 1.0, p0: 1.0, p_swap: 1.0, r_hz: 1e6, tau_s: 1e-3, l0_km: 200.0, c_km_s: 2e5, swap_comm_time: false };
        assert!((expected_seconds(&s) - (1e-6 + 1e-3)).abs() < 1e-6 * 1e-3);
        let s = Setup { n: 0, ..s };
        assert_eq!(expected_seconds(&s), 1e-6 + 1e-3);
    }

    #[test]
    fn rejects_deep_chains() {
        let p = ProtocolParams::paper_defaults();
        assert_eq!(exact_expected_time_small(&p, &SimPolicy::default()), Err(SimError::UnsupportedDepth(4)));
    }

    #[test]
    fn simulation_agrees_for_one_swap_level() {
        let p = ProtocolParams { l_km: 60.0, n: 1, r_hz: 1e6, ..ProtocolParams::paper_defaults() };
        for policy in [SimPolicy { swap_comm_time: false }, SimPolicy { swap_comm_time: true }] {
            let oracle = exact_expected_time_small(&p, &policy).unwrap();
            let e = estimate(&p, &policy, 20_000, 17).unwrap();
            assert!((e.mean - oracle).abs() < 4.0 * e.std_error, "{} vs {oracle} ({})", e.mean, e.std_error);
        }
    }
}
