//! Globally adaptive Gauss–Kronrod (10/21) quadrature with declared
//! singular points.
//!
//! The interval is cut at every declared singular point. Each piece that
//! touches a singular end is mapped through `x = end ∓ h·t²`, which turns
//! inverse-square-root singularities into smooth integrands and flattens
//! logarithmic ones to `t ln t`. Panels are then bisected by largest error
//! estimate across the whole integral. Kronrod nodes never touch panel
//! ends, so the singular point itself is never evaluated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SpecfunError;

/// Hard cap on the number of live panels.
pub const MAX_PANELS: usize = 20_000;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Variable change applied to one piece of the split interval.
#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `x = origin + sign·width·t²`, `t ∈ [0, 1]`; the singular end is `origin`.
    Squared { origin: f64, width: f64, sign: f64 },
}

impl Map {
    #[inline]
    fn apply<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match *self {
            Map::Identity => f(t),
            Map::Squared { origin, width, sign } => {
                let x = origin + sign * width * t * t;
                f(x) * 2.0 * width * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    map: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod21<F: Fn(f64) -> f64>(
    f: &F,
    map: &Map,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64), SpecfunError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |t: f64| -> Result<f64, SpecfunError> {
        let v = map.apply(f, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SpecfunError::NonFiniteIntegrand { x: t })
        }
    };

    let fc = eval(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_k = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    let mut err = (res_k - res_g * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && err < roundoff {
        err = roundoff;
    }
    Ok((res_k, err))
}

/// Adaptive quadrature of a regular integrand on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadratureResult, SpecfunError> {
    integrate_with_endpoint_singularity(f, a, b, &[], tol)
}

/// Adaptive quadrature of `f` over `[a, b]` where `f` may have integrable
/// singularities at the listed points (endpoints included).
///
/// On success the estimated absolute error is `≤ tol`. When the panel budget
/// runs out first, the error carries the best estimate and its error bound.
pub fn integrate_with_endpoint_singularity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    singular_points: &[f64],
    tol: f64,
) -> Result<QuadratureResult, SpecfunError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(SpecfunError::InvalidInterval { a, b });
    }
    if !(tol > 0.0) {
        return Err(SpecfunError::InvalidTolerance { tol });
    }
    if a == b {
        return Ok(QuadratureResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    if a > b {
        let r = integrate_with_endpoint_singularity(f, b, a, singular_points, tol)?;
        return Ok(QuadratureResult { value: -r.value, ..r });
    }

    let mut cuts: Vec<f64> = singular_points.iter().copied().filter(|&s| s > a && s < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let is_singular = |x: f64| singular_points.iter().any(|&s| s == x);

    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);

    let mut maps = Vec::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        match (is_singular(lo), is_singular(hi)) {
            (false, false) => maps.push((Map::Identity, lo, hi)),
            (true, false) => {
                maps.push((Map::Squared { origin: lo, width: hi - lo, sign: 1.0 }, 0.0, 1.0))
            }
            (false, true) => {
                maps.push((Map::Squared { origin: hi, width: hi - lo, sign: -1.0 }, 0.0, 1.0))
            }
            (true, true) => {
                let mid = 0.5 * (lo + hi);
                let h = mid - lo;
                maps.push((Map::Squared { origin: lo, width: h, sign: 1.0 }, 0.0, 1.0));
                maps.push((Map::Squared { origin: hi, width: h, sign: -1.0 }, 0.0, 1.0));
            }
        }
    }

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (idx, (map, lo, hi)) in maps.iter().enumerate() {
        let (v, e) = kronrod21(&f, map, *lo, *hi)?;
        evaluations += 21;
        total += v;
        total_err += e;
        heap.push(Panel { map: idx, lo: *lo, hi: *hi, value: v, error: e });
    }

    // Panels too narrow to split further are parked here.
    let mut frozen_err = 0.0;
    while total_err > tol {
        if heap.len() >= MAX_PANELS {
            return Err(SpecfunError::NoConvergence { estimate: total, error_bound: total_err });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        let (_, dom_lo, dom_hi) = maps[worst.map];
        if worst.hi - worst.lo < 64.0 * f64::EPSILON * (dom_hi - dom_lo) {
            frozen_err += worst.error;
            if frozen_err > tol {
                return Err(SpecfunError::NoConvergence {
                    estimate: total,
                    error_bound: total_err,
                });
            }
            continue;
        }
        let map = &maps[worst.map].0;
        let (v1, e1) = kronrod21(&f, map, worst.lo, mid)?;
        let (v2, e2) = kronrod21(&f, map, mid, worst.hi)?;
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { map: worst.map, lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Panel { map: worst.map, lo: mid, hi: worst.hi, value: v2, error: e2 });
    }

    // Re-sum to shed the drift of the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let abs_error: f64 = heap.iter().map(|p| p.error).sum::<f64>() + frozen_err;
    Ok(QuadratureResult { value, abs_error, evaluations })
}
