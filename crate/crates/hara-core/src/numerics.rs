//! Quadrature rules and log-space helpers shared by the filter and the
//! policy computations.
//!
//! Every integral against the centered normal kernel φ_s goes through
//! [`ZQuadrature`]. Integrals whose integrand carries an exponential tilt
//! `F(T, y + z)^k` are evaluated by [`TiltedIntegrator`], which re-centres
//! the Gauss–Hermite rule on the mode of the tilted density before
//! summing, so that large tilts (γ close to one, far-out observations)
//! keep the full accuracy of the rule.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{HaraError, Result};
use crate::prior::Prior;

pub const DEFAULT_Z_NODES: usize = 64;
pub const DEFAULT_THETA_NODES: usize = 64;
pub const DEFAULT_CONTINUOUS_NODES: usize = 128;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Node counts and self-convergence tolerance for the z-integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub z_nodes: usize,
    pub theta_nodes: usize,
    pub tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            z_nodes: DEFAULT_Z_NODES,
            theta_nodes: DEFAULT_THETA_NODES,
            tol: DEFAULT_TOL,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.z_nodes < 2 {
            return Err(HaraError::param("quad.z_nodes", "need at least 2 nodes"));
        }
        if self.theta_nodes < 2 {
            return Err(HaraError::param(
                "quad.theta_nodes",
                "need at least 2 nodes",
            ));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(HaraError::param("quad.tol", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Gauss rule on a reference interval: nodes in ascending order.
#[derive(Debug)]
pub struct ReferenceRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn rule_cache() -> &'static Mutex<HashMap<(char, usize), Arc<ReferenceRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<(char, usize), Arc<ReferenceRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: char, n: usize, build: fn(usize) -> ReferenceRule) -> Arc<ReferenceRule> {
    let mut cache = rule_cache().lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry((kind, n))
        .or_insert_with(|| Arc::new(build(n)))
        .clone()
}

/// Physicists' Gauss–Hermite rule for the weight `e^{-x²}` (weights sum to √π).
pub fn hermite_rule(n: usize) -> Arc<ReferenceRule> {
    cached('h', n, build_hermite)
}

/// Gauss–Legendre rule on [-1, 1].
pub fn legendre_rule(n: usize) -> Arc<ReferenceRule> {
    cached('l', n, build_legendre)
}

// Roots are the eigenvalues of the Jacobi matrix (zero diagonal,
// off-diagonal sqrt(j/2)), polished by Newton on the orthonormal
// recurrence. The recurrence values grow like e^{x²/2}, so they are
// rescaled on the fly and the weights are assembled in log form; the
// weights of the extreme nodes of large rules underflow to 0.
fn build_hermite(n: usize) -> ReferenceRule {
    let mut diag = vec![0.0; n];
    let mut off: Vec<f64> = (1..=n).map(|j| (j as f64 / 2.0).sqrt()).collect();
    off[n - 1] = 0.0;
    tridiagonal_eigenvalues(&mut diag, &mut off);
    diag.sort_by(f64::total_cmp);

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &root in &diag {
        let mut x = root;
        let mut log_w = 0.0;
        for _ in 0..3 {
            let (p, dp, log_scale) = hermite_orthonormal(n, x);
            let step = p / dp;
            x -= step;
            // w = 2 / (√(2n) p_{n-1})² = 1 / (n p_{n-1}²); dp carries √(2n) p_{n-1}
            log_w = 2f64.ln() - 2.0 * (dp.abs().ln() + log_scale);
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        nodes.push(x);
        weights.push(log_w.exp());
    }
    // symmetrize
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    ReferenceRule { nodes, weights }
}

/// `(p_n(x), √(2n) p_{n-1}(x), log scale)` for the orthonormal Hermite
/// recurrence; both values are divided by `e^{log scale}`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    const RESCALE: f64 = 1e100;
    let mut p1 = PIM4;
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > RESCALE {
            p1 /= RESCALE;
            p2 /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (p1, (2.0 * n as f64).sqrt() * p2, log_scale)
}

// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix;
// eigenvalues overwrite `diag`. `off[i]` couples rows i and i+1.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations <= 60, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

fn build_legendre(n: usize) -> ReferenceRule {
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 1..=n.div_ceil(2) {
        let mut z = (PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        nodes[i - 1] = -z;
        nodes[n - i] = z;
        weights[i - 1] = w;
        weights[n - i] = w;
    }
    ReferenceRule { nodes, weights }
}

/// Discretization of `∫ g(z) φ_s(z) dz`, φ_s the centered normal density
/// with variance `s`.
#[derive(Clone, Debug)]
pub struct ZQuadrature {
    pub variance: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ZQuadrature {
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * g(z))
            .sum()
    }
}

/// Gauss–Hermite rule for the normal kernel with variance `t_minus_t`,
/// exact for polynomials up to degree `2n - 1`.
pub fn gauss_hermite_z(t_minus_t: f64, n: usize) -> Result<ZQuadrature> {
    if !(t_minus_t > 0.0) || !t_minus_t.is_finite() {
        return Err(HaraError::DegenerateKernel);
    }
    if n < 2 {
        return Err(HaraError::param("n", "need at least 2 nodes"));
    }
    let rule = hermite_rule(n);
    let scale = (2.0 * t_minus_t).sqrt();
    let total: f64 = rule.weights.iter().sum();
    Ok(ZQuadrature {
        variance: t_minus_t,
        nodes: rule.nodes.iter().map(|x| scale * x).collect(),
        weights: rule.weights.iter().map(|w| w / total).collect(),
    })
}

/// `log Σ exp(xᵢ)` with the maximum factored out. Returns `-inf` for an
/// empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log ∫ e^{exponent(θ)} μ(dθ)`, evaluated by subtracting the largest
/// exponent before exponentiating.
pub fn log_sum_exp_integrate(prior: &Prior, exponent: impl Fn(f64) -> f64) -> Result<f64> {
    let mut terms = Vec::with_capacity(prior.atoms().len());
    for (atom, lw) in prior.atoms().iter().zip(prior.log_weights()) {
        let e = exponent(atom.theta);
        if e.is_nan() || e == f64::INFINITY {
            return Err(HaraError::NonFiniteIntegrand { theta: atom.theta });
        }
        terms.push(lw + e);
    }
    let value = log_sum_exp(&terms);
    if value == f64::NEG_INFINITY {
        return Err(HaraError::EmptyMass);
    }
    Ok(value)
}

/// Log-density data of the tilting function at one abscissa: its value,
/// first and second derivatives in z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TiltPoint {
    pub log_f: f64,
    pub slope: f64,
    pub curvature: f64,
}

/// Result of a tilted integral: `log ∫ e^{k ℓ(z)} φ_s(z) dz` and the mean
/// of the integrand statistic under the normalized tilted density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TiltedMoment {
    pub log_mass: f64,
    pub mean: f64,
}

/// Integrals of the form `∫ g(z) e^{k ℓ(z)} φ_s(z) dz` where `ℓ` is a
/// log-convex-in-z tilt (in practice `log F(T, y + z)`).
///
/// The rule is centred at the mode `c` of `k ℓ(z) - z²/(2s)` and scaled by
/// the local curvature; nodes are then weighted by the ratio of the target
/// kernel to the shifted proposal kernel.
pub struct TiltedIntegrator<E> {
    eval: E,
    s: f64,
    k: f64,
    center: f64,
    width2: f64,
}

impl<E> TiltedIntegrator<E>
where
    E: Fn(f64) -> Result<TiltPoint>,
{
    pub fn new(s: f64, k: f64, eval: E) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(HaraError::DegenerateKernel);
        }
        if !k.is_finite() || k < 0.0 {
            return Err(HaraError::param(
                "k",
                "tilt exponent must be finite and >= 0",
            ));
        }
        let mut this = TiltedIntegrator {
            eval,
            s,
            k,
            center: 0.0,
            width2: s,
        };
        if k > 0.0 {
            this.center = this.find_mode()?;
            let curv = (this.eval)(this.center)?.curvature;
            let precision = 1.0 / s - k * curv;
            this.width2 = if precision > 0.0 {
                (1.0 / precision).min(1e4 * s)
            } else {
                4.0 * s
            };
        }
        Ok(this)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width2(&self) -> f64 {
        self.width2
    }

    // Root of z/s - k ℓ'(z) by bracketed Newton.
    fn find_mode(&self) -> Result<f64> {
        let h = |z: f64| -> Result<(f64, f64)> {
            let p = (self.eval)(z)?;
            Ok((
                z / self.s - self.k * p.slope,
                1.0 / self.s - self.k * p.curvature,
            ))
        };
        let (h0, d0) = h(0.0)?;
        if h0 == 0.0 {
            return Ok(0.0);
        }
        let dir = if h0 < 0.0 { 1.0 } else { -1.0 };
        let mut step = if d0 > 0.0 {
            (h0 / d0).abs()
        } else {
            self.s.sqrt()
        };
        step = step.max(1e-3 * self.s.sqrt());
        let (mut lo, mut hi) = (0.0, dir * step);
        let mut expansions = 0;
        while (h(hi)?.0 < 0.0) == (dir > 0.0) {
            lo = hi;
            step *= 2.0;
            hi = dir * step;
            expansions += 1;
            if expansions > 200 {
                return Err(HaraError::Divergent(
                    "tilted density has no mode; the tilt outgrows the normal kernel".into(),
                ));
            }
        }
        // keep lo with h < 0, hi with h > 0
        if dir < 0.0 {
            std::mem::swap(&mut lo, &mut hi);
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (hz, dz) = h(z)?;
            if hz == 0.0 {
                return Ok(z);
            }
            if hz < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let newton = z - hz / dz;
            let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
            let next = if dz > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - z).abs() <= 1e-13 * (1.0 + z.abs()) || (b - a) <= 1e-13 * (1.0 + z.abs()) {
                return Ok(next);
            }
            z = next;
        }
        Ok(z)
    }

    /// Evaluates the tilted moment of `g` with an `n`-node rule.
    pub fn moment(&self, n: usize, g: impl Fn(f64, &TiltPoint) -> f64) -> Result<TiltedMoment> {
        let rule = gauss_hermite_z(self.width2, n)?;
        let mut terms = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let half_log_ratio = 0.5 * (self.width2 / self.s).ln();
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            if w == 0.0 {
                continue;
            }
            let z = self.center + u;
            let p = (self.eval)(z)?;
            let tilt = if self.k == 0.0 { 0.0 } else { self.k * p.log_f };
            let term = w.ln() + tilt - z * z / (2.0 * self.s)
                + u * u / (2.0 * self.width2)
                + half_log_ratio;
            let value = g(z, &p);
            if !term.is_finite() && term != f64::NEG_INFINITY || !value.is_finite() {
                return Err(HaraError::Divergent(format!(
                    "non-finite integrand at z = {z} (tilt {tilt}, value {value})"
                )));
            }
            terms.push(term);
            values.push(value);
        }
        let log_mass = log_sum_exp(&terms);
        if !log_mass.is_finite() {
            return Err(HaraError::Divergent(
                "normalizer of the tilted density under/overflowed".into(),
            ));
        }
        // centred on the first value so a constant integrand is reproduced exactly
        let base = values[0];
        let (mut num, mut den) = (0.0, 0.0);
        for (t, v) in terms.iter().zip(&values) {
            let w = (t - log_mass).exp();
            num += w * (v - base);
            den += w;
        }
        let mean = base + num / den;
        Ok(TiltedMoment { log_mass, mean })
    }

    /// Evaluates with `quad.z_nodes` and `2 * quad.z_nodes` nodes; if the two
    /// disagree beyond `quad.tol`, doubles once more before giving up.
    pub fn refined(
        &self,
        quad: &QuadConfig,
        g: impl Fn(f64, &TiltPoint) -> f64,
    ) -> Result<TiltedMoment> {
        let mut n = quad.z_nodes;
        let mut prev = self.moment(n, &g)?;
        let mut difference = 0.0;
        for _ in 0..2 {
            n *= 2;
            let next = self.moment(n, &g)?;
            difference = moment_difference(&prev, &next);
            if difference <= quad.tol {
                return Ok(next);
            }
            prev = next;
        }
        Err(HaraError::NotConverged {
            nodes: n,
            difference,
        })
    }
}

fn moment_difference(a: &TiltedMoment, b: &TiltedMoment) -> f64 {
    let dm = (a.mean - b.mean).abs() / b.mean.abs().max(1.0);
    let dl = (a.log_mass - b.log_mass).abs() / b.log_mass.abs().max(1.0);
    dm.max(dl)
}

/// Log of the centered normal density with variance `var`.
pub fn log_normal_pdf(z: f64, var: f64) -> f64 {
    -z * z / (2.0 * var) - 0.5 * (2.0 * PI * var).ln()
}

/// Pairwise (cascade) summation; fixed association order regardless of
/// how the input was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
