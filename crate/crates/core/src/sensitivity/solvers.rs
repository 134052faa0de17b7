use crate::error::{Error, Result};
use crate::model::ProbitCoefVector;

use super::{
    k_ratios, ratios, Branch, Candidate, CandidateSolutions, EtaDeltaMode, SelectionRule, SensitivityParams,
    Warning, CERTIFY_TOL,
};

const QUAD_TOL: f64 = 1e-12;

/// Real roots of `a·x² + b·x + c` with `a ≠ 0`, via the cancellation-free form.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Result<[f64; 2]> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || !disc.is_finite() {
        return Err(Error::NoRealSolution("negative discriminant"));
    }
    let s = disc.sqrt();
    let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
    if q == 0.0 {
        // b = c = 0: double root at zero
        return Ok([0.0, 0.0]);
    }
    let (r1, r2) = (q / a, c / q);
    Ok(if r1 <= r2 { [r1, r2] } else { [r2, r1] })
}

fn dedup(mut roots: Vec<f64>) -> Vec<f64> {
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    roots
}

fn sign_eq(a: f64, b: f64) -> bool {
    a.signum() == b.signum() || (a == 0.0 && b == 0.0)
}

/// `R = √(λ1/λ2)` as a function of the effects, `None` where undefined.
fn variance_ratio(beta_xy: f64, beta_yx: f64, gamma1: f64, gamma2: f64) -> Option<f64> {
    let num = gamma1 + 2.0 * gamma2 * beta_yx + beta_yx * beta_yx;
    let den = gamma1 * beta_xy * beta_xy + 2.0 * gamma2 * beta_xy + 1.0;
    (num > 0.0 && den > 0.0).then(|| (num / den).sqrt())
}

/// Largest residual of the unsquared constraints
/// `k1 = R·(βxy + η0)/(1 + βyx·η0)` and `k2 = (βyx + δ0)/((1 + βxy·δ0)·R)`,
/// each scaled by `max(1, |k|)`. Infinite where the constraints are undefined.
pub fn constraint_residual(xi: &ProbitCoefVector, beta_xy: f64, beta_yx: f64, sp: &SensitivityParams) -> Result<f64> {
    let (k1, k2) = k_ratios(xi)?;
    if sp.mode == EtaDeltaMode::SignalToNoise {
        return Ok(perfect_correlation_residual(xi, beta_xy, beta_yx, sp.eta0, sp.delta0));
    }
    let Some(r) = variance_ratio(beta_xy, beta_yx, sp.gamma1, sp.gamma2) else {
        return Ok(f64::INFINITY);
    };
    let dz = 1.0 + beta_yx * sp.eta0;
    let dw = 1.0 + beta_xy * sp.delta0;
    if dz == 0.0 || dw == 0.0 {
        return Ok(f64::INFINITY);
    }
    let r1 = (k1 - r * (beta_xy + sp.eta0) / dz).abs() / k1.abs().max(1.0);
    let r2 = (k2 - (beta_yx + sp.delta0) / (dw * r)).abs() / k2.abs().max(1.0);
    Ok(r1.max(r2))
}

/// Residual of the perfectly correlated system (`U = V`) with signal-to-noise
/// violations, after eliminating the instrument strengths:
///
/// ```text
/// ξyz(1 + βxy) = βxy·(ξxz(1 + βyx) − βyx·η0) + η0
/// ξxw(1 + βyx) = βyx·(ξyw(1 + βxy) − βxy·δ0) + δ0
/// ```
fn perfect_correlation_residual(xi: &ProbitCoefVector, bxy: f64, byx: f64, eta0: f64, delta0: f64) -> f64 {
    let rz = xi.xi_yz * (1.0 + bxy) - bxy * (xi.xi_xz * (1.0 + byx) - byx * eta0) - eta0;
    let rw = xi.xi_xw * (1.0 + byx) - byx * (xi.xi_yw * (1.0 + bxy) - bxy * delta0) - delta0;
    let scale = xi.xi_xz.abs().max(xi.xi_yw.abs()).max(1.0);
    rz.abs().max(rw.abs()) / scale
}

fn certified(xi: &ProbitCoefVector, beta_xy: f64, beta_yx: f64, sp: &SensitivityParams) -> Result<Option<Candidate>> {
    if !beta_xy.is_finite() || !beta_yx.is_finite() {
        return Ok(None);
    }
    let residual = constraint_residual(xi, beta_xy, beta_yx, sp)?;
    Ok((residual <= CERTIFY_TOL).then_some(Candidate { beta_xy, beta_yx, residual }))
}

fn params(gamma1: f64, gamma2: f64, eta0: f64, delta0: f64) -> SensitivityParams {
    SensitivityParams { gamma1, gamma2, eta0, delta0, mode: EtaDeltaMode::RelativeToIv }
}

/// Correlated or unequal-variance confounders with valid instruments.
///
/// Substituting `βxy = k1/R`, `βyx = k2·R` into the definition of `R` gives
/// `(1 − k2²)R² + 2γ2(k1 − k2)R + γ1(k1² − 1) = 0`; each positive root is a
/// candidate and satisfies `sgn(βxy) = sgn(k1)` by construction. Two positive
/// roots leave the selection unresolved.
pub fn solve_prop3(xi: &ProbitCoefVector, gamma1: f64, gamma2: f64) -> Result<CandidateSolutions> {
    let sp = params(gamma1, gamma2, 0.0, 0.0);
    sp.validate()?;
    let (k1, k2) = k_ratios(xi)?;
    let a = 1.0 - k2 * k2;
    let b = 2.0 * gamma2 * (k1 - k2);
    let c = gamma1 * (k1 * k1 - 1.0);
    if a.abs() < QUAD_TOL {
        return Err(Error::DegenerateRatio("k2^2 = 1"));
    }
    if c.abs() < QUAD_TOL && b.abs() < QUAD_TOL {
        return Err(Error::DegenerateRatio("k1^2 = 1"));
    }
    let roots = dedup(quadratic_roots(a, b, c)?.to_vec());
    let mut candidates = Vec::new();
    for r in roots.into_iter().filter(|&r| r > 0.0) {
        if let Some(cand) = certified(xi, k1 / r, k2 * r, &sp)? {
            candidates.push(cand);
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoRealSolution("no positive variance ratio"));
    }
    Ok(CandidateSolutions::select(candidates, SelectionRule::SignK1, |c| sign_eq(c.beta_xy, k1)))
}

/// Legacy closed form with `γ1²` where the constraint system gives `γ1`:
///
/// ```text
/// βxy = (γ2·k1(k2 − k1) ± k1·√Δ1) / (γ1²(k1² − 1)),   βyx = k1·k2/βxy
/// Δ1 = γ1²(k1² − 1)(k2² − 1) + γ2²(k1 − k2)²
/// ```
///
/// Kept for comparison; it agrees with [`solve_prop3`] only at `γ1 = 1`.
/// Candidates carry their constraint residuals but are not filtered.
pub fn solve_prop3_printed(xi: &ProbitCoefVector, gamma1: f64, gamma2: f64) -> Result<CandidateSolutions> {
    let sp = params(gamma1, gamma2, 0.0, 0.0);
    sp.validate()?;
    let (k1, k2) = k_ratios(xi)?;
    let g1sq = gamma1 * gamma1;
    let den = g1sq * (k1 * k1 - 1.0);
    if den.abs() < QUAD_TOL {
        return Err(Error::DegenerateRatio("k1^2 = 1"));
    }
    let delta1 = g1sq * k1 * k1 * k2 * k2 - g1sq * k1 * k1 - g1sq * k2 * k2 + g1sq + gamma2 * gamma2 * k1 * k1
        - 2.0 * gamma2 * gamma2 * k1 * k2
        + gamma2 * gamma2 * k2 * k2;
    if delta1 < 0.0 {
        return Err(Error::NoRealSolution("negative discriminant"));
    }
    let mut candidates = Vec::new();
    for s in [1.0, -1.0] {
        let bxy = (gamma2 * k1 * (k2 - k1) + s * k1 * delta1.sqrt()) / den;
        let byx = k1 * k2 / bxy;
        if bxy.is_finite() && byx.is_finite() {
            let residual = constraint_residual(xi, bxy, byx, &sp)?;
            candidates.push(Candidate { beta_xy: bxy, beta_yx: byx, residual });
        }
    }
    if delta1 == 0.0 {
        candidates.truncate(1);
    }
    Ok(CandidateSolutions::select(candidates, SelectionRule::SignK1, |c| sign_eq(c.beta_xy, k1)))
}

/// Direct effect of `Z` on `Y°` (`η0 = η/μxz`), independent equal-variance
/// confounders, valid `W`. With `T = t1·t2`, `S = t3·t4`:
///
/// ```text
/// s1·βyx² + s2·βyx + s3 = 0,   βxy = η0(T − 1) + T/βyx
/// s1 = η0²(T − 1)² − T·S + 1,  s2 = 2T·η0(T − 1),  s3 = T(T − S)
/// ```
///
/// Selection: `sgn(βyx) = sgn(t4)`.
pub fn solve_corollary1(xi: &ProbitCoefVector, eta0: f64) -> Result<CandidateSolutions> {
    let r = ratios(xi)?;
    let (t, s) = (r.t1 * r.t2, r.t3 * r.t4);
    let s1 = eta0 * eta0 * (t - 1.0).powi(2) - t * s + 1.0;
    let s2 = 2.0 * t * eta0 * (t - 1.0);
    let s3 = t * (t - s);
    if s1.abs() < QUAD_TOL {
        return Err(Error::QuadraticDegenerate);
    }
    let sp = params(1.0, 0.0, eta0, 0.0);
    let mut candidates = Vec::new();
    for byx in dedup(quadratic_roots(s1, s2, s3)?.to_vec()) {
        if byx == 0.0 {
            continue;
        }
        if let Some(c) = certified(xi, eta0 * (t - 1.0) + t / byx, byx, &sp)? {
            candidates.push(c);
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoRealSolution("no certified root"));
    }
    Ok(CandidateSolutions::select(candidates, SelectionRule::SignT4, |c| sign_eq(c.beta_yx, r.t4)))
}

fn corollary2_coefficients(xi: &ProbitCoefVector, delta0: f64) -> Result<(super::Ratios, f64, [f64; 3])> {
    let r = ratios(xi)?;
    let (t, s) = (r.t1 * r.t2, r.t3 * r.t4);
    let s4 = s + s * delta0 * delta0 * (t - 1.0).powi(2) - t;
    let s5 = 2.0 * t * s * delta0 * (t - 1.0);
    let s6 = t * (t * s - 1.0);
    if s4.abs() < QUAD_TOL {
        return Err(Error::QuadraticDegenerate);
    }
    Ok((r, t, [s4, s5, s6]))
}

/// Direct effect of `W` on `X°` (`δ0 = δ/μyw`), independent equal-variance
/// confounders, valid `Z`:
///
/// ```text
/// s4·βxy² + s5·βxy + s6 = 0,   βyx = δ0(T − 1) + T/βxy
/// s4 = S + S·δ0²(T − 1)² − T,  s5 = 2T·S·δ0(T − 1),  s6 = T(T·S − 1)
/// ```
///
/// The quadratic is in `βxy`. Selection: `sgn(βxy) = sgn(t3)`.
pub fn solve_corollary2(xi: &ProbitCoefVector, delta0: f64) -> Result<CandidateSolutions> {
    let (r, t, [s4, s5, s6]) = corollary2_coefficients(xi, delta0)?;
    let sp = params(1.0, 0.0, 0.0, delta0);
    let mut candidates = Vec::new();
    for bxy in dedup(quadratic_roots(s4, s5, s6)?.to_vec()) {
        if bxy == 0.0 {
            continue;
        }
        if let Some(c) = certified(xi, bxy, delta0 * (t - 1.0) + t / bxy, &sp)? {
            candidates.push(c);
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoRealSolution("no certified root"));
    }
    Ok(CandidateSolutions::select(candidates, SelectionRule::SignT3, |c| sign_eq(c.beta_xy, r.t3)))
}

/// Legacy labelling of [`solve_corollary2`]: the quadratic root is taken
/// as `βyx` and `βxy = δ0(T − 1) + T/βyx`. Kept for comparison; candidates
/// carry residuals but are not filtered.
pub fn solve_corollary2_printed(xi: &ProbitCoefVector, delta0: f64) -> Result<CandidateSolutions> {
    let (r, t, [s4, s5, s6]) = corollary2_coefficients(xi, delta0)?;
    let sp = params(1.0, 0.0, 0.0, delta0);
    let mut candidates = Vec::new();
    for byx in dedup(quadratic_roots(s4, s5, s6)?.to_vec()) {
        let bxy = delta0 * (t - 1.0) + t / byx;
        if bxy.is_finite() {
            let residual = constraint_residual(xi, bxy, byx, &sp)?;
            candidates.push(Candidate { beta_xy: bxy, beta_yx: byx, residual });
        }
    }
    Ok(CandidateSolutions::select(candidates, SelectionRule::SignT3, |c| sign_eq(c.beta_xy, r.t3)))
}

/// Perfectly correlated confounders (`γ1 = γ2 = 1`) with direct effects of
/// both instruments, `η0 = η/σ`, `δ0 = δ/σ`:
///
/// ```text
/// βyx = (ξyz − ξxz)(ξxw ∓ δ0) / ((ξxw − ξyw)(ξxz ∓ η0))
/// βxy = (ξxw − ξyw)(ξyz ∓ η0) / ((ξyz − ξxz)(ξyw ∓ δ0))
/// ```
///
/// The upper signs apply when `βxy·βyx < 1`, the lower ones when the
/// product exceeds 1; the caller picks the branch. A returned pair on the
/// wrong side of 1 is flagged, not rejected.
pub fn solve_corollary3(xi: &ProbitCoefVector, eta0: f64, delta0: f64, branch: Branch) -> Result<CandidateSolutions> {
    let s = match branch {
        Branch::ProductLtOne => 1.0,
        Branch::ProductGtOne => -1.0,
    };
    let (e, d) = (s * eta0, s * delta0);
    let dw = xi.xi_xw - xi.xi_yw;
    let dz = xi.xi_yz - xi.xi_xz;
    let den_yx = dw * (xi.xi_xz - e);
    let den_xy = dz * (xi.xi_yw - d);
    if den_yx.abs() < 1e-12 || den_xy.abs() < 1e-12 {
        return Err(Error::DegenerateRatio("zero denominator in the perfectly correlated solution"));
    }
    let byx = dz * (xi.xi_xw - d) / den_yx;
    let bxy = dw * (xi.xi_yz - e) / den_xy;
    let residual = perfect_correlation_residual(xi, bxy, byx, e, d);
    let rule = match branch {
        Branch::ProductLtOne => SelectionRule::BranchProductLtOne,
        Branch::ProductGtOne => SelectionRule::BranchProductGtOne,
    };
    let product = bxy * byx;
    let consistent = match branch {
        Branch::ProductLtOne => product < 1.0,
        Branch::ProductGtOne => product > 1.0,
    };
    Ok(CandidateSolutions {
        candidates: vec![Candidate { beta_xy: bxy, beta_yx: byx, residual }],
        selected: Some(0),
        selection_rule: rule,
        warnings: if consistent { Vec::new() } else { vec![Warning::BranchInconsistent { product }] },
    })
}

/// Legacy `βxy` expression for the general quartic, divided
/// through by `ξxz·ξyw` (`K = k1·k2`):
///
/// ```text
/// βxy = (δ0η0 − K − η0·βyx + K·η0·βyx) / (βyx − K·η0δ0·βyx + δ0 − K·δ0)
/// ```
///
/// At `η0 = δ0 = 0` this is `−K/βyx`, the negative of the product constraint.
pub fn prop4_printed_beta_xy(xi: &ProbitCoefVector, beta_yx: f64, eta0: f64, delta0: f64) -> Result<f64> {
    let (k1, k2) = k_ratios(xi)?;
    let k = k1 * k2;
    let num = delta0 * eta0 - k - eta0 * beta_yx + k * eta0 * beta_yx;
    let den = beta_yx - k * eta0 * delta0 * beta_yx + delta0 - k * delta0;
    if den.abs() < QUAD_TOL {
        return Err(Error::DegenerateRatio("zero denominator"));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralSolverOptions {
    /// Roots are searched in `[−bound, bound]`.
    pub bound: f64,
    pub grid_points: usize,
}

impl Default for GeneralSolverOptions {
    fn default() -> Self {
        Self { bound: 10.0, grid_points: 4001 }
    }
}

/// `βxy` from the product constraint
/// `K(1 + βyx·η0)(1 + βxy·δ0) = (βxy + η0)(βyx + δ0)`, as `(N, D)` with
/// `βxy = N/D`.
fn product_constraint(k: f64, b: f64, eta0: f64, delta0: f64) -> (f64, f64) {
    let n = eta0 * (b + delta0) - k * (1.0 + b * eta0);
    let d = k * delta0 * (1.0 + b * eta0) - (b + delta0);
    (n, d)
}

/// The squared `k1` constraint with `βxy = N/D` cleared of denominators, a
/// quartic in `βyx`:
/// `k1²(1 + bη0)²(γ1N² + 2γ2ND + D²) − (N + η0D)²(γ1 + 2γ2b + b²)`.
fn quartic_residual(k1: f64, k: f64, b: f64, sp: &SensitivityParams) -> f64 {
    let (n, d) = product_constraint(k, b, sp.eta0, sp.delta0);
    let lead = 1.0 + b * sp.eta0;
    k1 * k1 * lead * lead * (sp.gamma1 * n * n + 2.0 * sp.gamma2 * n * d + d * d)
        - (n + sp.eta0 * d).powi(2) * (sp.gamma1 + 2.0 * sp.gamma2 * b + b * b)
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimum of `sign·f` on `[lo, hi]`; used to split pairs of
/// nearby roots that fall in one grid cell without a sign change.
fn min_toward_zero(f: &impl Fn(f64) -> f64, sign: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let h = |x: f64| sign * f(x);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (h(a), h(b));
    for _ in 0..80 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = h(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = h(b);
        }
    }
    0.5 * (lo + hi)
}

/// All real roots of `f` on a uniform grid: sign changes are bisected, and a
/// local extremum of `|f|` between same-signed neighbours is probed for a
/// hidden pair of roots.
fn scan_roots(f: impl Fn(f64) -> f64, bound: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * bound / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| -bound + i as f64 * step).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..points {
        if fs[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < points && fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0) {
            roots.push(bisect(&f, xs[i], xs[i + 1]));
        }
        if i > 0 && i + 1 < points {
            let (l, m, r) = (fs[i - 1], fs[i], fs[i + 1]);
            let same = (l < 0.0) == (m < 0.0) && (m < 0.0) == (r < 0.0);
            if same && m.abs() <= l.abs() && m.abs() <= r.abs() {
                let x = min_toward_zero(&f, m.signum(), xs[i - 1], xs[i + 1]);
                let fx = f(x);
                if fx == 0.0 {
                    roots.push(x);
                } else if (fx < 0.0) != (m < 0.0) {
                    roots.push(bisect(&f, xs[i - 1], x));
                    roots.push(bisect(&f, x, xs[i + 1]));
                }
            }
        }
    }
    roots
}

/// Numeric solution of the full constraint system with default scan options.
pub fn solve_general(xi: &ProbitCoefVector, sp: &SensitivityParams) -> Result<CandidateSolutions> {
    solve_general_with(xi, sp, &GeneralSolverOptions::default())
}

/// Numeric solution of the full constraint system.
///
/// `βxy` is eliminated through the product constraint and the squared `k1`
/// constraint becomes a quartic residual in `βyx`, scanned over
/// `[−bound, bound]`. Roots where `βxy` has a pole, roots that violate the
/// sign of the unsquared `k1` constraint, and roots failing residual
/// certification are discarded. A unique survivor is selected; several are
/// all reported with the selection unresolved.
pub fn solve_general_with(
    xi: &ProbitCoefVector,
    sp: &SensitivityParams,
    opts: &GeneralSolverOptions,
) -> Result<CandidateSolutions> {
    sp.validate()?;
    if sp.mode != EtaDeltaMode::RelativeToIv {
        return Err(Error::Config("general solver needs relative-to-IV eta0 and delta0".into()));
    }
    if !(opts.bound > 0.0) || opts.grid_points < 2 {
        return Err(Error::Config("root scan needs a positive bound and at least two grid points".into()));
    }
    let (k1, k2) = k_ratios(xi)?;
    let k = k1 * k2;
    let roots = scan_roots(|b| quartic_residual(k1, k, b, sp), opts.bound, opts.grid_points);
    if roots.is_empty() {
        return Err(Error::NoRealSolution("no sign change in the scan interval"));
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for b in dedup(roots) {
        let (n, d) = product_constraint(k, b, sp.eta0, sp.delta0);
        if d.abs() < 1e-10 * n.abs().max(1.0) {
            continue;
        }
        let bxy = n / d;
        let lead = 1.0 + b * sp.eta0;
        if !sign_eq(k1 * lead, bxy + sp.eta0) {
            continue;
        }
        if let Some(c) = certified(xi, bxy, b, sp)? {
            let dup = candidates
                .iter()
                .any(|o| (o.beta_xy - c.beta_xy).abs() <= 1e-9 && (o.beta_yx - c.beta_yx).abs() <= 1e-9);
            if !dup {
                candidates.push(c);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoRealSolution("no root survives certification"));
    }
    Ok(CandidateSolutions::select(candidates, SelectionRule::SignK1, |_| true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identification::identify_prop1;
    use crate::model::{probit_coefs, StructuralParams};

    fn truth() -> StructuralParams {
        StructuralParams::benchmark()
    }

    fn assert_pair(pair: (f64, f64), want: (f64, f64), tol: f64) {
        assert!(
            (pair.0 - want.0).abs() <= tol && (pair.1 - want.1).abs() <= tol,
            "got {pair:?}, want {want:?}"
        );
    }

    #[test]
    fn quadratic_roots_are_stable() {
        let [a, b] = quadratic_roots(1.0, -1e8, 1.0).unwrap();
        assert!((a - 1e-8).abs() < 1e-20);
        assert!((b - 1e8).abs() < 1e-6);
        assert_eq!(quadratic_roots(1.0, 0.0, 1.0).unwrap_err(), Error::NoRealSolution("negative discriminant"));
    }

    #[test]
    fn prop3_baseline_equals_closed_form() {
        let xi = probit_coefs(&truth()).unwrap();
        let pair = solve_prop3(&xi, 1.0, 0.0).unwrap().selected_pair().unwrap();
        let closed = identify_prop1(&xi).unwrap();
        assert_pair(pair, closed, 1e-10);
        assert_pair(pair, (-0.25, 0.45), 2e-4);
        assert!((pair.0 * pair.1 - xi.xi_yz / xi.xi_xz * xi.xi_xw / xi.xi_yw).abs() <= 1e-10);
    }

    #[test]
    fn prop3_round_trip_correlated() {
        let p = StructuralParams { gamma1: 0.5, gamma2: 0.3, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let sol = solve_prop3(&xi, 0.5, 0.3).unwrap();
        assert_pair(sol.selected_pair().unwrap(), (-0.25, 0.45), 1e-8);
        assert!(sol.candidates.iter().all(|c| c.residual <= CERTIFY_TOL));
    }

    #[test]
    fn prop3_printed_agrees_only_at_unit_gamma1() {
        let xi = probit_coefs(&truth()).unwrap();
        let printed = solve_prop3_printed(&xi, 1.0, 0.0).unwrap().selected_pair().unwrap();
        assert_pair(printed, (-0.25, 0.45), 1e-10);

        let p = StructuralParams { gamma1: 0.5, gamma2: 0.3, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let printed = solve_prop3_printed(&xi, 0.5, 0.3).unwrap();
        assert!(!printed.contains(-0.25, 0.45, 1e-3));
        assert!(printed.candidates.iter().all(|c| c.residual > CERTIFY_TOL));
    }

    #[test]
    fn prop3_degenerate_ratio() {
        let xi = ProbitCoefVector::from_slopes(0.5, 0.7, 0.2, 0.7);
        assert_eq!(solve_prop3(&xi, 1.0, 0.0).unwrap_err(), Error::DegenerateRatio("k2^2 = 1"));
    }

    #[test]
    fn corollary1_reduction_and_round_trip() {
        let xi = probit_coefs(&truth()).unwrap();
        let pair = solve_corollary1(&xi, 0.0).unwrap().selected_pair().unwrap();
        assert_pair(pair, identify_prop1(&xi).unwrap(), 1e-10);

        let p = StructuralParams { eta: 0.1 * 0.65, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let pair = solve_corollary1(&xi, 0.1).unwrap().selected_pair().unwrap();
        assert_pair(pair, (-0.25, 0.45), 1e-8);
    }

    #[test]
    fn corollary1_negative_discriminant() {
        // t1 = 0.5, t2 = 2, t3 = 0.5, t4 = 0.5: T = 1, S = 0.25, s1 = s3 = 0.75, s2 = 0
        let xi = ProbitCoefVector::from_slopes(1.0, 0.5, 2.0, 1.0);
        assert_eq!(solve_corollary1(&xi, 0.0).unwrap_err(), Error::NoRealSolution("negative discriminant"));
    }

    #[test]
    fn corollary2_reduction_and_round_trip() {
        let xi = probit_coefs(&truth()).unwrap();
        let pair = solve_corollary2(&xi, 0.0).unwrap().selected_pair().unwrap();
        assert_pair(pair, identify_prop1(&xi).unwrap(), 1e-10);

        let p = StructuralParams { delta: -0.08 * 0.65, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let pair = solve_corollary2(&xi, -0.08).unwrap().selected_pair().unwrap();
        assert_pair(pair, (-0.25, 0.45), 1e-8);
    }

    #[test]
    fn corollary2_printed_labels_miss_truth() {
        let p = StructuralParams { delta: -0.08 * 0.65, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let printed = solve_corollary2_printed(&xi, -0.08).unwrap();
        assert!(!printed.contains(-0.25, 0.45, 1e-3));
    }

    #[test]
    fn corollary2_degenerate() {
        // t1 = 0.5, t2 = 1, t3 = 1, t4 = 0.5: S = T, so s4 vanishes at δ0 = 0
        let xi = ProbitCoefVector::from_slopes(1.0, 0.5, 1.0, 1.0);
        assert_eq!(solve_corollary2(&xi, 0.0).unwrap_err(), Error::QuadraticDegenerate);
    }

    #[test]
    fn corollary3_perfect_correlation() {
        let xi = ProbitCoefVector::from_slopes(0.59770, 0.26897, -0.28889, 1.15556);
        let sol = solve_corollary3(&xi, 0.0, 0.0, Branch::ProductLtOne).unwrap();
        assert_pair(sol.selected_pair().unwrap(), (-0.25, 0.45), 1e-4);
        assert!(sol.warnings.is_empty());

        let p = StructuralParams { gamma2: 1.0, eta: 0.1 * 0.75, delta: -0.05 * 0.75, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let sol = solve_corollary3(&xi, 0.1, -0.05, Branch::ProductLtOne).unwrap();
        assert_pair(sol.selected_pair().unwrap(), (-0.25, 0.45), 1e-10);
        assert!(sol.candidates[0].residual <= CERTIFY_TOL);
    }

    #[test]
    fn corollary3_reduces_at_zero_violation() {
        let xi = ProbitCoefVector::from_slopes(0.6, 0.27, -0.29, 1.15);
        let sol = solve_corollary3(&xi, 0.0, 0.0, Branch::ProductLtOne).unwrap();
        let want = (xi.xi_yz - xi.xi_xz) * xi.xi_xw / ((xi.xi_xw - xi.xi_yw) * xi.xi_xz);
        assert_eq!(sol.candidates[0].beta_yx, want);
    }

    #[test]
    fn corollary3_flags_branch_inconsistency() {
        let xi = ProbitCoefVector::from_slopes(0.59770, 0.26897, -0.28889, 1.15556);
        let sol = solve_corollary3(&xi, 0.0, 0.0, Branch::ProductGtOne).unwrap();
        assert!(matches!(sol.warnings.as_slice(), [Warning::BranchInconsistent { .. }]));
        let xi = ProbitCoefVector::from_slopes(0.5, 0.6, 0.2, 0.6);
        assert!(matches!(
            solve_corollary3(&xi, 0.0, 0.0, Branch::ProductLtOne),
            Err(Error::DegenerateRatio(_))
        ));
    }

    #[test]
    fn general_reduces_to_prop3() {
        let xi = probit_coefs(&truth()).unwrap();
        let sol = solve_general(&xi, &SensitivityParams::baseline()).unwrap();
        let p3 = solve_prop3(&xi, 1.0, 0.0).unwrap().selected_pair().unwrap();
        assert!(sol.contains(p3.0, p3.1, 1e-8));
    }

    #[test]
    fn general_round_trip() {
        let p = StructuralParams { gamma1: 0.8, gamma2: 0.2, eta: 0.05 * 0.65, delta: -0.05 * 0.65, ..truth() };
        let xi = probit_coefs(&p).unwrap();
        let sp = SensitivityParams { gamma1: 0.8, gamma2: 0.2, eta0: 0.05, delta0: -0.05, ..SensitivityParams::baseline() };
        let sol = solve_general(&xi, &sp).unwrap();
        assert!(sol.contains(-0.25, 0.45, 1e-6), "{sol:?}");
        assert!(sol.candidates.iter().all(|c| c.residual <= CERTIFY_TOL));
    }

    #[test]
    fn general_no_root_in_bound() {
        let xi = probit_coefs(&truth()).unwrap();
        let opts = GeneralSolverOptions { bound: 0.1, grid_points: 101 };
        assert!(matches!(
            solve_general_with(&xi, &SensitivityParams::baseline(), &opts),
            Err(Error::NoRealSolution(_))
        ));
    }

    #[test]
    fn printed_prop4_ratio_has_flipped_sign() {
        let xi = probit_coefs(&truth()).unwrap();
        let printed = prop4_printed_beta_xy(&xi, 0.45, 0.0, 0.0).unwrap();
        assert!((printed - 0.25).abs() < 1e-10);
        let (n, d) = product_constraint(-0.25 * 0.45, 0.45, 0.0, 0.0);
        assert!((n / d + 0.25).abs() < 1e-12);
    }

    #[test]
    fn scan_finds_close_root_pair() {
        // roots at 0.3001 and 0.3003 share one cell of a 0.005 grid
        let roots = scan_roots(|x| (x - 0.3001) * (x - 0.3003), 1.0, 401);
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0] - 0.3001).abs() < 1e-10 && (roots[1] - 0.3003).abs() < 1e-10);
    }
}
