//! Resonance structure, step-size assumption checks, and an empirical modal
//! amplitude diagnostic.
//!
//! Frequencies enter in two scalings: the O(1) vector `lambda` of distinct
//! positive frequencies and the stiff `omega_tilde = lambda / eps` actually
//! carried by the generator. Integer combinations `k . lambda` that vanish
//! form the resonance module; everything else is subject to the numerical
//! non-resonance condition `|sin((h / 2 eps) k . lambda)| >= c sqrt(h)`.

use std::collections::BTreeSet;
use std::ops::Range;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, CVector};
use crate::system::{derive_oscillatory, ConservativeSystem};

/// Default tolerance for detecting integer resonances among float inputs.
pub const RESONANCE_TOL: f64 = 1e-12;

/// Condition-number cap for the modal least-squares basis.
pub const MODAL_COND_LIMIT: f64 = 1e10;

/// Lattice-point budget for resonance enumeration.
const ENUMERATION_BUDGET: u128 = 10_000_000;

pub type MultiIndex = Vec<i64>;

/// Distinct positive frequencies `lambda_1 < ... < lambda_l` and the small
/// parameter, with `omega_tilde_k = lambda_k / eps`.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyBasis {
    lambdas: Vec<f64>,
    eps: f64,
}

impl FrequencyBasis {
    pub fn new(lambdas: Vec<f64>, eps: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid(
                "frequency basis needs at least one frequency",
            ));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        for win in lambdas.windows(2) {
            if !(win[0] < win[1]) {
                return Err(Error::invalid("frequencies must be strictly increasing"));
            }
        }
        if lambdas[0] <= 0.0 {
            return Err(Error::invalid("frequencies must be positive"));
        }
        Ok(Self { lambdas, eps })
    }

    /// Distinct positive frequencies of a conservative system, recovered
    /// from the spectrum of `O = Q M / eps` (which carries `1/eps`).
    pub fn from_system(sys: &ConservativeSystem) -> Result<Option<Self>> {
        let osc = derive_oscillatory(sys)?;
        let mut positives: Vec<f64> = osc
            .dec()
            .lambda()
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| l * sys.eps())
            .collect();
        positives.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut distinct: Vec<f64> = Vec::new();
        for l in positives {
            match distinct.last() {
                Some(&last) if (l - last).abs() <= RESONANCE_TOL * l.max(1.0) => {}
                _ => distinct.push(l),
            }
        }
        if distinct.is_empty() {
            return Ok(None);
        }
        Ok(Some(Self::new(distinct, sys.eps())?))
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn omega_tilde(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l / self.eps).collect()
    }

    pub fn dot(&self, k: &[i64]) -> f64 {
        k.iter()
            .zip(self.lambdas.iter())
            .map(|(&ki, &li)| ki as f64 * li)
            .sum()
    }

    pub fn dot_omega_tilde(&self, k: &[i64]) -> f64 {
        self.dot(k) / self.eps
    }
}

fn l1_norm(k: &[i64]) -> u64 {
    k.iter().map(|&x| x.unsigned_abs()).sum()
}

/// Resonance module and class representatives up to truncation order `N`.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSet {
    pub order: usize,
    pub tol: f64,
    /// Multi-indices with `k . lambda = 0` (within tolerance), `|k| <= N`.
    pub module_members: Vec<MultiIndex>,
    /// Per-class minimal-norm representatives, closed under negation;
    /// includes the zero representative of the module class.
    pub representatives: Vec<MultiIndex>,
}

impl ResonanceSet {
    pub fn in_module(&self, basis: &FrequencyBasis, k: &[i64]) -> bool {
        let lmax = basis.lambdas().iter().cloned().fold(0.0_f64, f64::max);
        basis.dot(k).abs() <= self.tol * lmax
    }
}

/// All multi-indices with `|k|_1 <= n` in dimension `l`, lexicographic order.
fn enumerate_ball(l: usize, n: i64) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![-n; l];
    loop {
        if l1_norm(&current) <= n as u64 {
            out.push(current.clone());
        }
        let mut pos = l;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if current[pos] < n {
                current[pos] += 1;
                for item in current.iter_mut().skip(pos + 1) {
                    *item = -n;
                }
                break;
            }
        }
    }
}

/// Exhaustive enumeration of the resonance module and equivalence-class
/// representatives within the `|k|_1 <= n` ball.
///
/// Classes are grouped by the value of `k . lambda` (two indices are
/// equivalent modulo the module exactly when their frequency combinations
/// agree). Representatives minimize `|k|_1` with lexicographic tie-break and
/// the set is closed under negation afterwards.
pub fn enumerate_resonance(basis: &FrequencyBasis, n: usize, tol: f64) -> Result<ResonanceSet> {
    if n < 1 {
        return Err(Error::invalid("truncation order must be at least 1"));
    }
    let l = basis.len();
    let side = 2 * n as u128 + 1;
    let points = side.pow(l as u32);
    if points > ENUMERATION_BUDGET {
        return Err(Error::CombinatorialBudgetExceeded { points });
    }

    let ball = enumerate_ball(l, n as i64);
    let lmax = basis.lambdas().iter().cloned().fold(0.0_f64, f64::max);
    let gap = tol * lmax;

    let mut module_members: Vec<MultiIndex> = ball
        .iter()
        .filter(|k| basis.dot(k).abs() <= gap)
        .cloned()
        .collect();
    module_members.sort();

    // Group by k . lambda value; clusters are separated by more than `gap`.
    let mut keyed: Vec<(f64, &MultiIndex)> = ball.iter().map(|k| (basis.dot(k), k)).collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));

    let mut reps: BTreeSet<MultiIndex> = BTreeSet::new();
    let mut cluster: Vec<&MultiIndex> = Vec::new();
    let mut cluster_value = f64::NEG_INFINITY;
    let flush = |cluster: &mut Vec<&MultiIndex>, reps: &mut BTreeSet<MultiIndex>| {
        if cluster.is_empty() {
            return;
        }
        let best = cluster
            .iter()
            .min_by(|a, b| l1_norm(a).cmp(&l1_norm(b)).then_with(|| a.cmp(b)))
            .unwrap();
        reps.insert((*best).clone());
        cluster.clear();
    };
    for (value, k) in keyed {
        if cluster.is_empty() || (value - cluster_value).abs() <= gap {
            cluster.push(k);
            cluster_value = value;
        } else {
            flush(&mut cluster, &mut reps);
            cluster.push(k);
            cluster_value = value;
        }
    }
    flush(&mut cluster, &mut reps);

    let negated: Vec<MultiIndex> = reps
        .iter()
        .map(|k| k.iter().map(|&x| -x).collect())
        .collect();
    reps.extend(negated);

    Ok(ResonanceSet {
        order: n,
        tol,
        module_members,
        representatives: reps.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NonResonanceRow {
    pub k: MultiIndex,
    pub k_dot_lambda: f64,
    pub sin_value: f64,
    pub pass: bool,
}

/// Per-multi-index record of the numerical non-resonance condition.
#[derive(Debug, Clone, Serialize)]
pub struct NonResonanceReport {
    pub h: f64,
    pub eps: f64,
    pub c: f64,
    pub order: usize,
    pub threshold: f64,
    pub rows: Vec<NonResonanceRow>,
    pub overall: bool,
}

/// Checks `|sin((h / 2 eps) k . lambda)| >= c sqrt(h)` for every non-module
/// `k` with `|k|_1 <= n`.
pub fn check_nonresonance(
    basis: &FrequencyBasis,
    h: f64,
    n: usize,
    c: f64,
    res: &ResonanceSet,
) -> Result<NonResonanceReport> {
    if !(h > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("need h > 0 and c > 0"));
    }
    let l = basis.len();
    let side = 2 * n as u128 + 1;
    if side.pow(l as u32) > ENUMERATION_BUDGET {
        return Err(Error::CombinatorialBudgetExceeded {
            points: side.pow(l as u32),
        });
    }
    let threshold = c * h.sqrt();
    let mut rows = Vec::new();
    let mut overall = true;
    for k in enumerate_ball(l, n as i64) {
        if res.in_module(basis, &k) {
            continue;
        }
        let kdl = basis.dot(&k);
        let sin_value = (0.5 * h / basis.eps() * kdl).sin().abs();
        let pass = sin_value >= threshold;
        overall &= pass;
        rows.push(NonResonanceRow {
            k,
            k_dot_lambda: kdl,
            sin_value,
            pass,
        });
    }
    Ok(NonResonanceReport {
        h,
        eps: basis.eps(),
        c,
        order: n,
        threshold,
        rows,
        overall,
    })
}

/// Free constants of the step-size and non-resonance assumptions. The
/// defaults make no claim of matching any published run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AssumptionParams {
    pub e_bound: f64,
    pub c0: f64,
    pub c: f64,
    pub order: usize,
    pub resonance_tol: f64,
}

impl Default for AssumptionParams {
    fn default() -> Self {
        Self {
            e_bound: 10.0,
            c0: 1.0,
            c: 0.1,
            order: 2,
            resonance_tol: RESONANCE_TOL,
        }
    }
}

/// Advisory report; nothing here blocks a run.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// `H(y0)`, compared against the eps-independent bound.
    pub initial_energy: f64,
    pub e_bound: f64,
    pub energy_ok: bool,
    pub h_over_eps: f64,
    pub c0: f64,
    pub stepsize_ok: bool,
    /// `None` when the generator has no oscillatory frequencies.
    pub nonresonance: Option<NonResonanceReport>,
    pub all_ok: bool,
}

/// Evaluates the initial-energy bound, the step-size lower bound
/// `h / eps >= c0`, and the non-resonance condition.
pub fn check_assumptions(
    sys: &ConservativeSystem,
    y0: &crate::matrix::RVector,
    h: f64,
    params: &AssumptionParams,
) -> Result<AssumptionReport> {
    let initial_energy = sys.energy(y0);
    let energy_ok = initial_energy <= params.e_bound;
    let h_over_eps = h / sys.eps();
    let stepsize_ok = h_over_eps >= params.c0;

    let nonresonance = match FrequencyBasis::from_system(sys)? {
        None => None,
        Some(basis) => {
            let res = enumerate_resonance(&basis, params.order, params.resonance_tol)?;
            Some(check_nonresonance(&basis, h, params.order, params.c, &res)?)
        }
    };
    let all_ok =
        energy_ok && stepsize_ok && nonresonance.as_ref().map(|r| r.overall).unwrap_or(true);
    Ok(AssumptionReport {
        initial_energy,
        e_bound: params.e_bound,
        energy_ok,
        h_over_eps,
        c0: params.c0,
        stepsize_ok,
        nonresonance,
        all_ok,
    })
}

/// Complex amplitude estimates per component and multi-index from a
/// least-squares projection onto `{exp(i (k . omega_tilde) t)}`.
#[derive(Debug, Clone)]
pub struct ModalAmplitudes {
    pub window: (f64, f64),
    pub kset: Vec<MultiIndex>,
    /// Angular frequencies `k . omega_tilde`, parallel to `kset`.
    pub frequencies: Vec<f64>,
    /// `amplitudes[component][mode]`.
    pub amplitudes: Vec<Vec<Complex64>>,
    /// Relative least-squares residual over all components.
    pub residual: f64,
}

impl ModalAmplitudes {
    /// Largest amplitude modulus over components among modes with
    /// `|k|_1 == order`. `None` when no such mode was fitted.
    pub fn amplitude_for_order(&self, order: u64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (m, k) in self.kset.iter().enumerate() {
            if l1_norm(k) != order {
                continue;
            }
            for comp in &self.amplitudes {
                let a = comp[m].norm();
                best = Some(best.map_or(a, |b: f64| b.max(a)));
            }
        }
        best
    }
}

/// Least-squares fit of a sampled (complex) trajectory window against the
/// modal exponentials of `kset`. Coefficients are treated as constants over
/// the window, so keep windows short relative to the slow time scale.
pub fn fit_modal_amplitudes(
    times: &[f64],
    states: &[CVector],
    basis: &FrequencyBasis,
    kset: &[MultiIndex],
    window: Range<usize>,
) -> Result<ModalAmplitudes> {
    if times.len() != states.len() {
        return Err(Error::invalid("times and states lengths differ"));
    }
    if kset.is_empty() {
        return Err(Error::invalid("kset must be nonempty"));
    }
    if kset.iter().any(|k| k.len() != basis.len()) {
        return Err(Error::invalid("multi-index length must match basis size"));
    }
    if window.end > times.len() || window.start >= window.end {
        return Err(Error::invalid("window out of range"));
    }
    let len = window.end - window.start;
    let required = 4 * kset.len();
    if len < required {
        return Err(Error::WindowTooShort { len, required });
    }

    let ts = &times[window.clone()];
    let freqs: Vec<f64> = kset.iter().map(|k| basis.dot_omega_tilde(k)).collect();
    let max_freq = freqs.iter().fold(0.0_f64, |acc, f| acc.max(f.abs()));
    let max_spacing = ts
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0_f64, f64::max);
    let product = max_spacing * max_freq;
    if product > 1.0 {
        return Err(Error::AliasedSampling { product });
    }

    let m = kset.len();
    let design = CMatrix::from_fn(len, m, |row, col| {
        Complex64::new(0.0, freqs[col] * ts[row]).exp()
    });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > MODAL_COND_LIMIT {
        return Err(Error::IllConditionedBasis { cond });
    }

    let dim = states[0].len();
    let mut amplitudes = vec![Vec::with_capacity(m); dim];
    let mut res_num = 0.0_f64;
    let mut res_den = 0.0_f64;
    for comp in 0..dim {
        let rhs = CVector::from_fn(len, |row, _| states[window.start + row][comp]);
        let coef = svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::invalid(format!("least-squares solve failed: {e}")))?;
        let fitted = &design * &coef;
        res_num += (&rhs - fitted).norm_squared();
        res_den += rhs.norm_squared();
        amplitudes[comp] = coef.iter().cloned().collect();
    }
    let residual = if res_den > 0.0 {
        (res_num / res_den).sqrt()
    } else {
        0.0
    };

    Ok(ModalAmplitudes {
        window: (ts[0], ts[len - 1]),
        kset: kset.to_vec(),
        frequencies: freqs,
        amplitudes,
        residual,
    })
}
