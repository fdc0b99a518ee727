//! Two-knot hinge regression `b = s (theta - t1)_+ - s (theta - t2)_+ + e`
//! with `t2 >= t1 >= T` and `s >= 0`.
//!
//! For fixed knots the slope has the closed form
//! `s = max(0, <x, b> / <x, x>)` with `x = clamp(theta - t1, 0, t2 - t1)`, so
//! the search only ranges over knot pairs. Every evaluation is O(1) on prefix
//! sums of the data sorted by `theta`.
//!
//! Candidate knots are the threshold, a uniform grid, every observed shock
//! and every midpoint between consecutive shocks. On top of those, each split
//! of the sorted data into zero / linear / flat blocks proposes the knots of
//! its own unconstrained least-squares fit. When the optimum lies strictly
//! inside a block structure this proposal is exact, which recovers knots
//! between observations without any grid error.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};

pub const DEFAULT_KNOT_GRID: usize = 200;
pub const MIN_EPISODES: usize = 4;

/// Audit classification of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Zero,
    Interior,
    Cap,
    Override,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Zero => "zero",
            Regime::Interior => "interior",
            Regime::Cap => "cap",
            Regime::Override => "override",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(Regime::Zero),
            "interior" => Ok(Regime::Interior),
            "cap" => Ok(Regime::Cap),
            "override" => Ok(Regime::Override),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// Observed shock proxy.
    pub theta: f64,
    /// Realized bailout.
    pub b: f64,
    pub regime: Option<Regime>,
}

impl Episode {
    pub fn new(theta: f64, b: f64) -> Self {
        Self { theta, b, regime: None }
    }
}

/// Estimation method. Only least squares exists today; the enum keeps room
/// for a quantile variant without changing the fit contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitMethod {
    #[default]
    LeastSquares,
}

/// Benefit family the data are believed to come from. Only under linear
/// benefits does the slope estimate `omega_b / c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenefitFamily {
    #[default]
    Linear,
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Admissibility threshold; the lower knot never falls below it.
    pub threshold: f64,
    /// Number of uniform grid intervals between the threshold and the largest shock.
    pub knot_grid: usize,
    pub method: FitMethod,
    pub family: BenefitFamily,
}

impl FitOptions {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            knot_grid: DEFAULT_KNOT_GRID,
            method: FitMethod::LeastSquares,
            family: BenefitFamily::Linear,
        }
    }

    pub fn with_knot_grid(self, knot_grid: usize) -> Self {
        Self { knot_grid, ..self }
    }

    pub fn with_family(self, family: BenefitFamily) -> Self {
        Self { family, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlcFit {
    /// Interior slope.
    pub s: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub sse: f64,
    /// Plateau `s (theta2 - theta1)`.
    pub cap_level: f64,
    pub n_obs: usize,
    pub threshold: f64,
    /// Grid spacing of the uniform knot candidates.
    pub knot_resolution: f64,
    pub knot_grid: usize,
    pub candidates: usize,
    /// All bailouts were zero (or no positive slope fits); knots are not identified.
    pub degenerate: bool,
    /// `theta1 == theta2`: the fitted schedule has no interior segment.
    pub no_interior: bool,
    /// The slope is interpretable as `omega_b / c`.
    pub structural_slope: bool,
}

impl TlcFit {
    /// Residual standard error with three fitted parameters.
    pub fn rse(&self) -> f64 {
        if self.n_obs > 3 {
            (self.sse / (self.n_obs - 3) as f64).sqrt()
        } else {
            0.0
        }
    }

    /// Fitted value, clipped at zero.
    pub fn predict(&self, theta: f64) -> f64 {
        let x = (theta - self.theta1).max(0.0).min(self.theta2 - self.theta1);
        (self.s * x).max(0.0)
    }
}

/// Data sorted by shock with prefix sums of `1, theta, theta^2, b, theta b, b^2`.
#[derive(Debug, Clone)]
pub(crate) struct Profile {
    pub theta: Vec<f64>,
    pub b: Vec<f64>,
    st: Vec<f64>,
    stt: Vec<f64>,
    sb: Vec<f64>,
    stb: Vec<f64>,
    sbb: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Sums {
    n: f64,
    t: f64,
    tt: f64,
    b: f64,
    tb: f64,
    bb: f64,
}

/// Hinge fit at fixed knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HingeEval {
    pub s: f64,
    pub sse: f64,
}

/// Hinge-plus-cap-dummy fit at fixed knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DummyEval {
    pub s: f64,
    pub delta: f64,
    pub sse: f64,
    /// Standard error factor: `var(delta) = sigma^2 * delta_var_factor`.
    pub delta_var_factor: f64,
    pub n_cap: usize,
}

impl Profile {
    pub fn new(data: &[Episode]) -> Self {
        let mut pts: Vec<(f64, f64)> = data.iter().map(|e| (e.theta, e.b)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let n = pts.len();
        let mut p = Profile {
            theta: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            st: vec![0.0; n + 1],
            stt: vec![0.0; n + 1],
            sb: vec![0.0; n + 1],
            stb: vec![0.0; n + 1],
            sbb: vec![0.0; n + 1],
        };
        for (i, &(t, b)) in pts.iter().enumerate() {
            p.theta.push(t);
            p.b.push(b);
            p.st[i + 1] = p.st[i] + t;
            p.stt[i + 1] = p.stt[i] + t * t;
            p.sb[i + 1] = p.sb[i] + b;
            p.stb[i + 1] = p.stb[i] + t * b;
            p.sbb[i + 1] = p.sbb[i] + b * b;
        }
        p
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    fn sums(&self, lo: usize, hi: usize) -> Sums {
        Sums {
            n: (hi - lo) as f64,
            t: self.st[hi] - self.st[lo],
            tt: self.stt[hi] - self.stt[lo],
            b: self.sb[hi] - self.sb[lo],
            tb: self.stb[hi] - self.stb[lo],
            bb: self.sbb[hi] - self.sbb[lo],
        }
    }

    /// Number of observations with `theta <= t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.theta.partition_point(|&x| x <= t)
    }

    /// Number of observations with `theta < t`.
    fn count_lt(&self, t: f64) -> usize {
        self.theta.partition_point(|&x| x < t)
    }

    /// Profiled hinge fit with block boundaries given as counts:
    /// `[0, i1)` at zero, `[i1, i2)` on the line, `[i2, n)` on the plateau.
    fn hinge_blocks(&self, t1: f64, t2: f64, i1: usize, i2: usize) -> HingeEval {
        let n = self.len();
        let total_bb = self.sbb[n];
        let i2 = i2.max(i1);
        let mid = self.sums(i1, i2);
        let up = self.sums(i2, n);
        let width = t2 - t1;
        let sxx = (mid.tt - 2.0 * t1 * mid.t + t1 * t1 * mid.n) + width * width * up.n;
        let sxb = (mid.tb - t1 * mid.b) + width * up.b;
        if !(sxx > 0.0) || !(sxb > 0.0) {
            return HingeEval { s: 0.0, sse: total_bb };
        }
        let s = sxb / sxx;
        HingeEval {
            s,
            sse: (total_bb - s * sxb).max(0.0),
        }
    }

    pub fn hinge(&self, t1: f64, t2: f64) -> HingeEval {
        self.hinge_blocks(t1, t2, self.count_le(t1), self.count_lt(t2))
    }

    /// Fit with an additive dummy on `theta > t2`. The plateau level is free,
    /// so the slope comes from the linear block alone.
    pub(crate) fn dummy_blocks(&self, t1: f64, t2: f64, j1: usize, j2: usize) -> DummyEval {
        let n = self.len();
        let j2 = j2.max(j1);
        let zero = self.sums(0, j1);
        let mid = self.sums(j1, j2);
        let up = self.sums(j2, n);
        let mxx = mid.tt - 2.0 * t1 * mid.t + t1 * t1 * mid.n;
        let mxb = mid.tb - t1 * mid.b;
        let s = if mxx > 0.0 && mxb > 0.0 { mxb / mxx } else { 0.0 };
        let mid_sse = (mid.bb - s * mxb).max(0.0);
        let (up_sse, up_mean) = if up.n > 0.0 {
            let mean = up.b / up.n;
            ((up.bb - up.b * mean).max(0.0), mean)
        } else {
            (0.0, 0.0)
        };
        let width = t2 - t1;
        let delta = if up.n > 0.0 { up_mean - s * width } else { 0.0 };
        let delta_var_factor = if up.n > 0.0 && mxx > 0.0 {
            let sxx = mxx + width * width * up.n;
            sxx / (up.n * mxx)
        } else {
            f64::INFINITY
        };
        DummyEval {
            s,
            delta,
            sse: zero.bb + mid_sse + up_sse,
            delta_var_factor,
            n_cap: n - j2,
        }
    }

    pub fn dummy(&self, t1: f64, t2: f64) -> DummyEval {
        self.dummy_blocks(t1, t2, self.count_le(t1), self.count_le(t2))
    }

    /// Knots proposed by the unconstrained fit of each block structure.
    /// `closed_mid` selects the dummy model's convention (`theta == t2` on the line).
    pub(crate) fn block_proposals(&self, closed_mid: bool, mut visit: impl FnMut(f64, f64)) {
        let n = self.len();
        for i1 in 0..n {
            for i2 in (i1 + 2)..=n {
                let m = self.sums(i1, i2);
                let var = m.tt - m.t * m.t / m.n;
                if !(var > 0.0) || self.theta[i2 - 1] == self.theta[i1] {
                    continue;
                }
                let cov = m.tb - m.t * m.b / m.n;
                if !(cov > 0.0) {
                    continue;
                }
                let s = cov / var;
                let t1 = (m.b - s * m.t) / m.n * (-1.0 / s);
                let t2 = if closed_mid {
                    self.theta[i2 - 1]
                } else if i2 < n {
                    let up = self.sums(i2, n);
                    t1 + up.b / up.n / s
                } else {
                    self.theta[n - 1]
                };
                if t1.is_finite() && t2.is_finite() {
                    visit(t1, t2);
                }
            }
        }
    }
}

pub(crate) fn validate_episodes(data: &[Episode]) -> Result<()> {
    for (i, e) in data.iter().enumerate() {
        if !e.theta.is_finite() {
            return Err(Error::InvalidData(format!("episode {i}: theta = {} is not finite", e.theta)));
        }
        if !e.b.is_finite() || e.b < 0.0 {
            return Err(Error::InvalidData(format!("episode {i}: bailout {} must be finite and >= 0", e.b)));
        }
    }
    Ok(())
}

/// Candidate knot locations at or above the threshold, sorted and deduplicated.
pub(crate) fn knot_candidates(profile: &Profile, threshold: f64, knot_grid: usize) -> (Vec<f64>, f64) {
    let n = profile.len();
    let top = profile.theta[n - 1].max(threshold);
    let grid = knot_grid.max(1);
    let step = (top - threshold) / grid as f64;
    let mut c: Vec<f64> = (0..=grid).map(|k| threshold + step * k as f64).collect();
    c.push(top);
    c.extend(profile.theta.iter().copied().filter(|&t| t >= threshold));
    c.extend(
        profile
            .theta
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| 0.5 * (w[0] + w[1]))
            .filter(|&t| t >= threshold),
    );
    c.sort_by(f64::total_cmp);
    c.dedup();
    (c, step)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Best<E> {
    pub t1: f64,
    pub t2: f64,
    pub eval: E,
    pub sse: f64,
}

/// Keeps the smallest SSE, breaking exact ties by smallest `t1`, then `t2`.
pub(crate) fn consider<E: Copy>(best: &mut Option<Best<E>>, t1: f64, t2: f64, eval: E, sse: f64) {
    let better = match best {
        None => true,
        Some(b) => sse < b.sse || (sse == b.sse && (t1, t2) < (b.t1, b.t2)),
    };
    if better {
        *best = Some(Best { t1, t2, eval, sse });
    }
}

pub(crate) fn check_fit_input(data: &[Episode], threshold: f64) -> Result<()> {
    check(threshold.is_finite() && threshold >= 0.0, "threshold", threshold, "must be finite and non-negative")?;
    if data.len() < MIN_EPISODES {
        return Err(Error::InvalidData(format!(
            "need at least {MIN_EPISODES} episodes, got {}",
            data.len()
        )));
    }
    validate_episodes(data)?;
    let first = data[0].theta;
    if data.iter().all(|e| e.theta == first) {
        return Err(Error::EstimationImpossible("all shocks are equal".into()));
    }
    Ok(())
}

/// Fits the constrained two-knot hinge by exhaustive profiled least squares.
pub fn fit_tlc(data: &[Episode], options: &FitOptions) -> Result<TlcFit> {
    let threshold = options.threshold;
    check_fit_input(data, threshold)?;
    let profile = Profile::new(data);
    let n = profile.len();
    let (cands, step) = knot_candidates(&profile, threshold, options.knot_grid);
    let le: Vec<usize> = cands.iter().map(|&t| profile.count_le(t)).collect();
    let lt: Vec<usize> = cands.iter().map(|&t| profile.count_lt(t)).collect();

    let mut best: Option<Best<HingeEval>> = None;
    let mut evaluated = 0usize;
    for a in 0..cands.len() {
        for z in a..cands.len() {
            let e = profile.hinge_blocks(cands[a], cands[z], le[a], lt[z]);
            consider(&mut best, cands[a], cands[z], e, e.sse);
        }
        evaluated += cands.len() - a;
    }
    profile.block_proposals(false, |t1, t2| {
        if t1 >= threshold && t2 >= t1 {
            let e = profile.hinge(t1, t2);
            consider(&mut best, t1, t2, e, e.sse);
            evaluated += 1;
        }
    });
    let best = best.expect("at least one candidate pair");

    let top = cands[cands.len() - 1];
    let degenerate = best.eval.s == 0.0;
    let (s, theta1, theta2) = if degenerate {
        (0.0, threshold, top)
    } else {
        (best.eval.s, best.t1, best.t2)
    };
    let mut fit = TlcFit {
        s,
        theta1,
        theta2,
        sse: 0.0,
        cap_level: s * (theta2 - theta1),
        n_obs: n,
        threshold,
        knot_resolution: step,
        knot_grid: options.knot_grid,
        candidates: evaluated,
        degenerate,
        no_interior: !degenerate && theta1 == theta2,
        structural_slope: options.family == BenefitFamily::Linear,
    };
    fit.sse = data.iter().map(|e| (e.b - fit.predict(e.theta)).powi(2)).sum();
    Ok(fit)
}
