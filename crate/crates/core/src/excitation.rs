//! Excitation analysis of the observer regressor `φ = (x̂₂, tanh(ϑx̂₂))`.
//!
//! Everything here works on a sampled series: Gram matrices `∫φφᵀ` are
//! trapezoidal sums over the logged grid, with `φ` linearly interpolated at
//! window endpoints that fall between samples.
//!
//! Interval-excitation reports list partial sums and their growth rate. A
//! finite log can only evidence divergence of those sums, never establish it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSeries {
    times: Vec<f64>,
    phi: Vec<[f64; 2]>,
}

impl RegressorSeries {
    /// Requires at least two samples, strictly increasing finite times, finite
    /// values and a second component within `[−1, 1]`.
    pub fn new(times: Vec<f64>, phi: Vec<[f64; 2]>) -> Result<Self> {
        if times.len() != phi.len() {
            return Err(Error::Excitation(format!(
                "times ({}) and phi ({}) differ in length",
                times.len(),
                phi.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Excitation("series needs at least 2 samples".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Excitation("times must be finite and strictly increasing".into()));
        }
        if let Some(i) = phi
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite() || p[1].abs() > 1.0)
        {
            return Err(Error::Excitation(format!(
                "regressor sample {i} is non-finite or has |tanh component| > 1"
            )));
        }
        Ok(Self { times, phi })
    }

    /// Builds `φ = (x̂₂, tanh(ϑx̂₂))` from velocity estimates.
    pub fn from_velocity_estimates(times: Vec<f64>, x2hat: &[f64], vartheta: f64) -> Result<Self> {
        let phi = x2hat.iter().map(|&v| [v, (vartheta * v).tanh()]).collect();
        Self::new(times, phi)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn phi(&self) -> &[[f64; 2]] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    /// Mean sampling period.
    pub fn sampling_period(&self) -> f64 {
        let (a, b) = self.span();
        (b - a) / (self.len() - 1) as f64
    }

    /// Largest Euclidean norm of any sample.
    pub fn sup_norm(&self) -> f64 {
        self.phi
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    fn snap_tolerance(&self) -> f64 {
        let (a, b) = self.span();
        1e-9 * (b - a).max(1.0)
    }

    /// `φ(t)` by linear interpolation; `t` must lie inside the span.
    fn interpolate(&self, t: f64) -> [f64; 2] {
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.len() - 1);
        let (ta, tb) = (self.times[i - 1], self.times[i]);
        let w = (t - ta) / (tb - ta);
        let (pa, pb) = (self.phi[i - 1], self.phi[i]);
        [pa[0] + w * (pb[0] - pa[0]), pa[1] + w * (pb[1] - pa[1])]
    }
}

/// Symmetric 2×2 matrix stored as `[[a, b], [b, d]]`.
pub type Gram = [[f64; 2]; 2];

/// Smallest eigenvalue of a symmetric 2×2 matrix.
#[inline]
pub fn lambda_min(g: &Gram) -> f64 {
    let (a, b, d) = (g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1]);
    let half_gap = (0.5 * (a - d)).hypot(b);
    0.5 * (a + d) - half_gap
}

#[inline]
fn outer(p: [f64; 2]) -> [f64; 3] {
    [p[0] * p[0], p[0] * p[1], p[1] * p[1]]
}

#[inline]
fn trapezoid(acc: &mut [f64; 3], ta: f64, pa: [f64; 2], tb: f64, pb: [f64; 2]) {
    let (oa, ob) = (outer(pa), outer(pb));
    let h = 0.5 * (tb - ta);
    for k in 0..3 {
        acc[k] += h * (oa[k] + ob[k]);
    }
}

fn to_gram(acc: [f64; 3]) -> Gram {
    [[acc[0], acc[1]], [acc[1], acc[2]]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub gram: Gram,
    pub lambda_min: f64,
}

impl GramWindow {
    fn from_gram(t_start: f64, t_end: f64, gram: Gram) -> Self {
        Self {
            t_start,
            t_end,
            gram,
            lambda_min: lambda_min(&gram),
        }
    }
}

fn check_window(rs: &RegressorSeries, t0: f64, t1: f64) -> Result<()> {
    let (a, b) = rs.span();
    let tol = rs.snap_tolerance();
    if !(t0 < t1) {
        return Err(Error::Excitation(format!("empty window [{t0}, {t1}]")));
    }
    if t0 < a - tol || t1 > b + tol {
        return Err(Error::Excitation(format!(
            "window [{t0}, {t1}] outside series span [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Trapezoidal `∫φφᵀ` over `[t0, t1]`.
pub fn gram_over_window(rs: &RegressorSeries, t0: f64, t1: f64) -> Result<GramWindow> {
    check_window(rs, t0, t1)?;
    let tol = rs.snap_tolerance();
    let times = &rs.times;
    let i0 = times.partition_point(|&s| s < t0 - tol);
    let i1 = times.partition_point(|&s| s <= t1 + tol);
    if i1 < i0 + 2 {
        return Err(Error::Excitation(format!(
            "window [{t0}, {t1}] holds fewer than 2 samples"
        )));
    }
    let last = i1 - 1;
    let mut acc = [0.0; 3];
    if times[i0] > t0 + tol {
        trapezoid(&mut acc, t0, rs.interpolate(t0), times[i0], rs.phi[i0]);
    }
    for i in i0..last {
        trapezoid(&mut acc, times[i], rs.phi[i], times[i + 1], rs.phi[i + 1]);
    }
    if times[last] < t1 - tol {
        trapezoid(&mut acc, times[last], rs.phi[last], t1, rs.interpolate(t1));
    }
    Ok(GramWindow::from_gram(t0, t1, to_gram(acc)))
}

/// Running trapezoidal integral of `φφᵀ`, for O(1) sliding windows.
struct GramPrefix<'a> {
    rs: &'a RegressorSeries,
    cumulative: Vec<[f64; 3]>,
}

impl<'a> GramPrefix<'a> {
    fn new(rs: &'a RegressorSeries) -> Self {
        let mut cumulative = Vec::with_capacity(rs.len());
        let mut acc = [0.0; 3];
        cumulative.push(acc);
        for i in 1..rs.len() {
            trapezoid(&mut acc, rs.times[i - 1], rs.phi[i - 1], rs.times[i], rs.phi[i]);
            cumulative.push(acc);
        }
        Self { rs, cumulative }
    }

    /// Integral from the first sample to `t`.
    fn at(&self, t: f64) -> [f64; 3] {
        let times = &self.rs.times;
        let tol = self.rs.snap_tolerance();
        let i = times.partition_point(|&s| s <= t + tol).max(1) - 1;
        let mut acc = self.cumulative[i];
        if times[i] < t - tol && i + 1 < times.len() {
            trapezoid(&mut acc, times[i], self.rs.phi[i], t, self.rs.interpolate(t));
        }
        acc
    }

    fn window(&self, t0: f64, t1: f64) -> GramWindow {
        let (a, b) = (self.at(t0), self.at(t1));
        GramWindow::from_gram(t0, t1, to_gram([b[0] - a[0], b[1] - a[1], b[2] - a[2]]))
    }
}

/// Windows of width `width` starting every `stride` from the first sample.
pub fn sliding_windows(rs: &RegressorSeries, width: f64, stride: f64) -> Result<Vec<GramWindow>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Excitation(format!("window width must be > 0, got {width}")));
    }
    if !(stride > 0.0 && stride.is_finite()) {
        return Err(Error::Excitation(format!("stride must be > 0, got {stride}")));
    }
    let (a, b) = rs.span();
    let tol = rs.snap_tolerance();
    if width > b - a + tol {
        return Err(Error::Excitation(format!(
            "window width {width} exceeds series span {}",
            b - a
        )));
    }
    let prefix = GramPrefix::new(rs);
    let count = ((b - a - width + tol) / stride).floor() as usize + 1;
    Ok((0..count)
        .map(|m| {
            let t0 = a + m as f64 * stride;
            prefix.window(t0, (t0 + width).min(b))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeVerdict {
    pub satisfied: bool,
    pub mu: f64,
    pub width: f64,
    /// Window attaining the smallest `λ_min`, recomputed directly.
    pub worst: GramWindow,
    pub windows_checked: usize,
}

/// Sliding-window persistence-of-excitation test: satisfied iff every window
/// of width `width` has `λ_min ≥ mu`. `stride` defaults to the sampling period.
pub fn check_pe(rs: &RegressorSeries, width: f64, mu: f64, stride: Option<f64>) -> Result<PeVerdict> {
    Ok(pe_scan(rs, width, mu, stride)?.0)
}

fn pe_scan(
    rs: &RegressorSeries,
    width: f64,
    mu: f64,
    stride: Option<f64>,
) -> Result<(PeVerdict, Vec<GramWindow>)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Excitation(format!("mu must be > 0, got {mu}")));
    }
    let stride = stride.unwrap_or_else(|| rs.sampling_period());
    let windows = sliding_windows(rs, width, stride)?;
    let worst_idx = windows
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.lambda_min.total_cmp(&y.1.lambda_min))
        .map(|(i, _)| i)
        .expect("at least one window");
    let w = windows[worst_idx];
    let worst = gram_over_window(rs, w.t_start, w.t_end)?;
    let satisfied = windows.iter().all(|w| w.lambda_min >= mu) && worst.lambda_min >= mu;
    Ok((
        PeVerdict {
            satisfied,
            mu,
            width,
            worst,
            windows_checked: windows.len(),
        },
        windows,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationMode {
    Pe,
    Intervals,
    Conservative,
}

impl ExcitationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExcitationMode::Pe => "pe",
            ExcitationMode::Intervals => "intervals",
            ExcitationMode::Conservative => "conservative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationReport {
    pub mode: ExcitationMode,
    pub windows: Vec<GramWindow>,
    /// Per-window summand: `λ_k²` for the pe and intervals modes,
    /// `μ_k / (1 + ‖φ‖⁴_∞·T̃_k)` for the conservative mode.
    pub terms: Vec<f64>,
    /// Running sums of `terms`; nondecreasing.
    pub partial_sums: Vec<f64>,
    /// Least-squares slope of `partial_sums` against the window index;
    /// `None` with fewer than two windows.
    pub growth_slope: Option<f64>,
    pub pe_verdict: Option<PeVerdict>,
    /// `‖φ‖_∞` over the whole series (conservative mode).
    pub phi_sup_norm: Option<f64>,
}

impl ExcitationReport {
    fn assemble(
        mode: ExcitationMode,
        windows: Vec<GramWindow>,
        terms: Vec<f64>,
        pe_verdict: Option<PeVerdict>,
        phi_sup_norm: Option<f64>,
    ) -> Self {
        let partial_sums: Vec<f64> = terms
            .iter()
            .scan(0.0, |s, &x| {
                *s += x;
                Some(*s)
            })
            .collect();
        let growth_slope = least_squares_slope(&partial_sums);
        Self {
            mode,
            windows,
            terms,
            partial_sums,
            growth_slope,
            pe_verdict,
            phi_sup_norm,
        }
    }

    pub fn lambda_series(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.lambda_min).collect()
    }

    pub fn sum_lambda_sq(&self) -> f64 {
        self.windows.iter().map(|w| w.lambda_min * w.lambda_min).sum()
    }

    /// CSV with one row per window and a `#` comment header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# mode: {}", self.mode.as_str())?;
        if let Some(v) = &self.pe_verdict {
            writeln!(
                out,
                "# pe: {} (mu={}, width={}, worst lambda_min={} on [{}, {}])",
                if v.satisfied { "satisfied" } else { "violated" },
                v.mu,
                v.width,
                v.worst.lambda_min,
                v.worst.t_start,
                v.worst.t_end
            )?;
        }
        if let Some(n) = self.phi_sup_norm {
            writeln!(out, "# phi_sup_norm: {n}")?;
        }
        match self.growth_slope {
            Some(s) => writeln!(out, "# partial_sum_growth_slope: {s}")?,
            None => writeln!(out, "# partial_sum_growth_slope: n/a")?,
        }
        writeln!(
            out,
            "# note: partial sums over a finite log evidence divergence; they cannot certify it"
        )?;
        writeln!(out, "window_index,t_start,t_end,lambda_min,term,partial_sum")?;
        for (k, w) in self.windows.iter().enumerate() {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?}",
                k, w.t_start, w.t_end, w.lambda_min, self.terms[k], self.partial_sums[k]
            )?;
        }
        Ok(())
    }
}

fn least_squares_slope(y: &[f64]) -> Option<f64> {
    let n = y.len();
    if n < 2 {
        return None;
    }
    let mean_k = (n - 1) as f64 / 2.0;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &v) in y.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxy += dk * (v - mean_y);
        sxx += dk * dk;
    }
    Some(sxy / sxx)
}

/// Sliding-window report behind [`check_pe`], one row per window.
pub fn pe_report(rs: &RegressorSeries, width: f64, mu: f64, stride: Option<f64>) -> Result<ExcitationReport> {
    let (verdict, windows) = pe_scan(rs, width, mu, stride)?;
    let terms = windows.iter().map(|w| w.lambda_min * w.lambda_min).collect();
    Ok(ExcitationReport::assemble(
        ExcitationMode::Pe,
        windows,
        terms,
        Some(verdict),
        None,
    ))
}

/// Audits a user-supplied sequence of windows `(t_k, T_k)` for interval
/// excitation: `λ_k = λ_min(∫_{t_k}^{t_k+T_k} φφᵀ)` and the partial sums of `λ_k²`.
pub fn interval_excitation(rs: &RegressorSeries, windows: &[(f64, f64)]) -> Result<ExcitationReport> {
    if windows.is_empty() {
        return Err(Error::Excitation("no windows given".into()));
    }
    let tol = rs.snap_tolerance();
    for (k, &(t, len)) in windows.iter().enumerate() {
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::Excitation(format!("window {k} has non-positive length {len}")));
        }
        if let Some(&(next, _)) = windows.get(k + 1) {
            if next < t + len - tol {
                return Err(Error::Excitation(format!(
                    "window {} starts at {next}, before window {k} ends at {}",
                    k + 1,
                    t + len
                )));
            }
        }
    }
    let grams = windows
        .iter()
        .map(|&(t, len)| gram_over_window(rs, t, t + len))
        .collect::<Result<Vec<_>>>()?;
    let terms = grams.iter().map(|w| w.lambda_min * w.lambda_min).collect();
    Ok(ExcitationReport::assemble(
        ExcitationMode::Intervals,
        grams,
        terms,
        None,
        None,
    ))
}

/// Consecutive windows `[t_k, t_{k+1}]` of an increasing partition, with
/// summands `μ_k / (1 + ‖φ‖⁴_∞·(t_{k+1} − t_k))`.
pub fn conservative_check(rs: &RegressorSeries, partition: &[f64]) -> Result<ExcitationReport> {
    if partition.len() < 2 {
        return Err(Error::Excitation("partition needs at least 2 points".into()));
    }
    if partition.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Excitation("partition must be strictly increasing".into()));
    }
    let sup = rs.sup_norm();
    let sup4 = sup.powi(4);
    let grams = partition
        .windows(2)
        .map(|w| gram_over_window(rs, w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    let terms = grams
        .iter()
        .map(|w| w.lambda_min / (1.0 + sup4 * (w.t_end - w.t_start)))
        .collect();
    Ok(ExcitationReport::assemble(
        ExcitationMode::Conservative,
        grams,
        terms,
        None,
        Some(sup),
    ))
}
