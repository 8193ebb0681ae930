//! Modulation analysis around the flat profile: spectral decomposition of
//! trajectories, shrinking-set membership and exit classification, projection
//! ODE residuals, the region split driven by `G_1(x_0)`, the `W_{x_0}`
//! relation and heteroclinic trapping diagnostics.

use crate::error::{CoreError, Result};
use crate::interp::{MonotoneCubic, OutOfRange};
use crate::profile::{ModelParams, Profile};
use crate::quad::{GaussianWeight, SpectralDecomp};
use crate::solver::SimilarityFrame;

/// Envelopes of the shrinking set. The baseline is
/// `|q_k| <= A e^{-2s}` for `k <= 5`, `|q_6| <= A^{a6} s^{sigma6} e^{-2s}`,
/// `‖q_-‖ <= A^2 s^2 e^{-3s}`, `sup |w~| <= 2 kappa`, and `|u| <= eta0` on
/// the regular region when a physical field is supplied. The `q_6` prefactor
/// exponents are exposed because three variants of them circulate
/// (`A s^2`, `A^2 s^2`, `A s`); the default is `A s^2`.
#[derive(Clone, Debug)]
pub struct ShrinkingSetParams {
    pub a_amp: f64,
    pub q6_s_power: f64,
    pub q6_a_power: f64,
    pub sup_bound: f64,
    pub eta0: f64,
}

impl ShrinkingSetParams {
    pub fn from_params(params: &ModelParams) -> Self {
        Self {
            a_amp: params.a_amp,
            q6_s_power: 2.0,
            q6_a_power: 1.0,
            sup_bound: 2.0 * params.kappa,
            eta0: params.eta0,
        }
    }

    pub fn with_amplitude(mut self, a_amp: f64) -> Self {
        self.a_amp = a_amp;
        self
    }

    pub fn low_envelope(&self, s: f64) -> f64 {
        self.a_amp * (-2.0 * s).exp()
    }

    pub fn top_envelope(&self, s: f64) -> f64 {
        self.a_amp.powf(self.q6_a_power) * s.powf(self.q6_s_power) * (-2.0 * s).exp()
    }

    pub fn tail_envelope(&self, s: f64) -> f64 {
        self.a_amp * self.a_amp * s * s * (-3.0 * s).exp()
    }
}

/// Which bound of the set a margin refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundKind {
    Mode(usize),
    Tail,
    Sup,
    Regular,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundKind::Mode(m) => write!(f, "q{m}"),
            BoundKind::Tail => write!(f, "qminus"),
            BoundKind::Sup => write!(f, "sup"),
            BoundKind::Regular => write!(f, "regular"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitEvent {
    pub bound: BoundKind,
    pub theta: i8,
}

#[derive(Clone, Debug)]
pub struct MembershipReport {
    pub in_set: bool,
    /// `(bound, |value| / envelope)` for every checked bound
    pub margins: Vec<(BoundKind, f64)>,
    /// violated bound with the largest margin; ties break to the lowest
    /// mode index (then tail, sup, regular)
    pub exit: Option<ExitEvent>,
}

/// `q = w~ - phi(., s)` projected on the Hermite basis. Uses the stored
/// machine-accurate perturbation when the frame carries one.
pub fn decompose(
    frame: &SimilarityFrame,
    profile: &Profile,
    quad: &GaussianWeight,
    with_tail: bool,
) -> Result<SpectralDecomp> {
    if frame.s < profile.s2() {
        return Err(CoreError::Parameter(format!(
            "frame.s = {} below the profile threshold s2 = {}",
            frame.s,
            profile.s2()
        )));
    }
    // interpolate the perturbation itself so the error scales with q, not w
    let q_grid: std::borrow::Cow<'_, Vec<f64>> = match &frame.q {
        Some(q) => std::borrow::Cow::Borrowed(q),
        None => {
            let mut q = Vec::with_capacity(frame.y.len());
            for (i, &y) in frame.y.iter().enumerate() {
                q.push(frame.w[i] - profile.phi(y, frame.s)?);
            }
            std::borrow::Cow::Owned(q)
        }
    };
    let itp = MonotoneCubic::new(&frame.y, &q_grid, OutOfRange::Zero)?;
    let values: Vec<f64> = quad
        .nodes()
        .iter()
        .map(|&y| itp.eval(y).unwrap_or(0.0))
        .collect();
    quad.project_samples(&values, with_tail)
}

/// Evaluate every bound of the shrinking set. `physical_max` is the observed
/// `max_{r <= eps0/4} |u|` when physical data accompanies the frame.
pub fn check_membership(
    decomp: &SpectralDecomp,
    sup_w: f64,
    s: f64,
    set: &ShrinkingSetParams,
    physical_max: Option<f64>,
) -> MembershipReport {
    let mut margins = Vec::with_capacity(10);
    let low = set.low_envelope(s);
    for k in 0..=5 {
        margins.push((BoundKind::Mode(k), decomp.q_low[k].abs() / low));
    }
    margins.push((BoundKind::Mode(6), decomp.q_low[6].abs() / set.top_envelope(s)));
    margins.push((BoundKind::Tail, decomp.q_minus_norm / set.tail_envelope(s)));
    margins.push((BoundKind::Sup, sup_w / set.sup_bound));
    if let Some(m) = physical_max {
        margins.push((BoundKind::Regular, m / set.eta0));
    }
    let in_set = margins.iter().all(|&(_, m)| m <= 1.0);
    let exit = if in_set {
        None
    } else {
        // largest margin wins; ties break to the lowest-ordered bound
        let (bound, _) = margins
            .iter()
            .copied()
            .max_by(|a, b| match a.1.partial_cmp(&b.1).expect("finite margins") {
                std::cmp::Ordering::Equal => b.0.cmp(&a.0),
                ord => ord,
            })
            .expect("non-empty margins");
        let theta = match bound {
            BoundKind::Mode(m) => {
                if decomp.q_low[m] >= 0.0 {
                    1
                } else {
                    -1
                }
            }
            _ => 1,
        };
        Some(ExitEvent { bound, theta })
    };
    MembershipReport {
        in_set,
        margins,
        exit,
    }
}

/// Classification of a recorded envelope crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowDirection {
    Outward,
    Inward,
    Ambiguous,
}

/// Compare `theta q_i'(s1)` with the envelope derivative at a recorded exit,
/// using a 3-point one-sided finite difference on the snapshot grid ending
/// at `s1`. Outward means the trajectory crosses with strictly larger slope.
pub fn exit_flow_direction(
    series: &[(f64, SpectralDecomp)],
    exit: ExitEvent,
    s1: f64,
    set: &ShrinkingSetParams,
) -> Result<FlowDirection> {
    let m = match exit.bound {
        BoundKind::Mode(m) if m <= 6 => m,
        _ => {
            return Err(CoreError::Parameter(
                "flow direction applies to mode exits".into(),
            ))
        }
    };
    let upto: Vec<&(f64, SpectralDecomp)> =
        series.iter().filter(|(s, _)| *s <= s1 + 1e-12).collect();
    if upto.len() < 3 {
        return Err(CoreError::InsufficientData(
            "need at least 3 snapshots at or before the exit".into(),
        ));
    }
    let k = upto.len();
    let (s_a, d_a) = (upto[k - 3].0, &upto[k - 3].1);
    let (s_b, d_b) = (upto[k - 2].0, &upto[k - 2].1);
    let (s_c, d_c) = (upto[k - 1].0, &upto[k - 1].1);
    let h1 = s_b - s_a;
    let h2 = s_c - s_b;
    let (qa, qb, qc) = (d_a.q_low[m], d_b.q_low[m], d_c.q_low[m]);
    // one-sided derivative at s_c on a possibly nonuniform 3-point stencil
    let dq = (h2 / (h1 * (h1 + h2))) * qa - ((h1 + h2) / (h1 * h2)) * qb
        + ((h1 + 2.0 * h2) / (h2 * (h1 + h2))) * qc;
    let env_slope = if m <= 5 {
        -2.0 * set.low_envelope(s1)
    } else {
        let e = set.top_envelope(s1);
        e * (set.q6_s_power / s1 - 2.0)
    };
    let lhs = exit.theta as f64 * dq;
    let noise = 1e-3 * (qa.abs() + qb.abs() + qc.abs()).max(1e-300) / h2.max(1e-12);
    if (lhs - env_slope).abs() <= noise {
        Ok(FlowDirection::Ambiguous)
    } else if lhs > env_slope {
        Ok(FlowDirection::Outward)
    } else {
        Ok(FlowDirection::Inward)
    }
}

/// Source of the remainder projections used by the ODE residual check.
pub enum RemainderSource<'a> {
    Analytic(&'a Profile, &'a GaussianWeight),
    Zero,
}

#[derive(Clone, Debug)]
pub struct OdeResidualReport {
    /// `sup_s |r_i(s)| e^{(3 - delta) s} / s` with `delta = 0.25`
    pub scaled_sup: [f64; 7],
    /// raw `sup_s |r_i(s)|`
    pub raw_sup: [f64; 7],
    pub delta: f64,
    /// set when the window contained snapshots outside the shrinking set
    pub membership_flag: bool,
}

/// Residuals of the projection ODEs,
/// `r_i(s) = q_i'(s) - (1 - i/2) q_i(s) - P_i(R(., s))`, by centered finite
/// differences on the snapshot grid.
pub fn verify_modulation_odes(
    series: &[(f64, SpectralDecomp)],
    source: RemainderSource<'_>,
    membership_flag: bool,
) -> Result<OdeResidualReport> {
    if series.len() < 3 {
        return Err(CoreError::InsufficientData(
            "need at least 3 snapshots for the ODE residuals".into(),
        ));
    }
    let delta = 0.25;
    let mut scaled_sup = [0.0f64; 7];
    let mut raw_sup = [0.0f64; 7];
    for k in 1..series.len() - 1 {
        let (s_prev, d_prev) = &series[k - 1];
        let (s_mid, d_mid) = &series[k];
        let (s_next, d_next) = &series[k + 1];
        let r_proj: [f64; 7] = match &source {
            RemainderSource::Zero => [0.0; 7],
            RemainderSource::Analytic(profile, quad) => {
                let d = quad.project_fn(
                    |y| profile.remainder_r(y, *s_mid).unwrap_or(f64::NAN),
                    false,
                )?;
                d.q_low
            }
        };
        for i in 0..7 {
            let dq = (d_next.q_low[i] - d_prev.q_low[i]) / (s_next - s_prev);
            let r = dq - (1.0 - i as f64 / 2.0) * d_mid.q_low[i] - r_proj[i];
            raw_sup[i] = raw_sup[i].max(r.abs());
            scaled_sup[i] =
                scaled_sup[i].max(r.abs() * ((3.0 - delta) * s_mid).exp() / s_mid);
        }
    }
    Ok(OdeResidualReport {
        scaled_sup,
        raw_sup,
        delta,
        membership_flag,
    })
}

/// Region thresholds for the `G_1` split.
#[derive(Clone, Copy, Debug)]
pub struct RegionParams {
    pub m_outer: f64,
    pub m_inner: f64,
    pub s0: f64,
}

impl RegionParams {
    pub fn new(m_outer: f64, m_inner: f64, s0: f64) -> Result<Self> {
        if !(m_inner < 1.0 && m_inner > 0.0 && m_outer >= 1.0) {
            return Err(CoreError::Parameter(
                "region thresholds need 0 < m < 1 <= M".into(),
            ));
        }
        Ok(Self {
            m_outer,
            m_inner,
            s0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    R1,
    R2,
    R3,
}

/// `G_1(x_0) = ((p-1)/kappa) (|x_0| - r0)^4`.
pub fn g1(x0_norm: f64, params: &ModelParams) -> f64 {
    (params.p - 1.0) / params.kappa * (x0_norm - params.r0).powi(4)
}

/// Compare `G_1` against `M e^{-s0}` and `m e^{-s0}`; the middle region is
/// closed, so both boundary values classify as `R2`.
pub fn region_classify(x0_norm: f64, region: &RegionParams, params: &ModelParams) -> Region {
    let g = g1(x0_norm, params);
    let hi = region.m_outer * (-region.s0).exp();
    let lo = region.m_inner * (-region.s0).exp();
    if g > hi {
        Region::R1
    } else if g >= lo {
        Region::R2
    } else {
        Region::R3
    }
}

/// `W_{x_0}(Y_1 e_1, s) = w_1((|Y_1 e^{-s/2} + x_0| - 1) e^{s/2}, s)` along
/// the axis, by interpolation on the frame.
pub fn w_x0_eval(frame: &SimilarityFrame, x0_norm: f64, y1: f64) -> Result<f64> {
    let emsh = (-frame.s / 2.0).exp();
    let mapped = ((y1 * emsh + x0_norm).abs() - 1.0) / emsh;
    let itp = MonotoneCubic::new(&frame.y, &frame.w, OutOfRange::Error)?;
    itp.eval(mapped)
}

#[derive(Clone, Debug)]
pub struct HeteroclinicFit {
    pub sigma: f64,
    pub residual: f64,
}

/// Least-squares time shift `sigma*` minimising
/// `Σ (W(0, s_k) - psi(s_k + sigma))^2`. Samples must sit in `(0, kappa)`.
pub fn heteroclinic_fit(samples: &[(f64, f64)], profile: &Profile) -> Result<HeteroclinicFit> {
    if samples.len() < 10 {
        return Err(CoreError::InsufficientData(
            "heteroclinic fit needs at least 10 samples".into(),
        ));
    }
    if samples
        .iter()
        .any(|&(_, w)| w <= 0.0 || w >= profile.kappa)
    {
        return Err(CoreError::NotInBasin);
    }
    let objective = |sigma: f64| -> f64 {
        samples
            .iter()
            .map(|&(s, w)| {
                let d = w - profile.psi(s + sigma);
                d * d
            })
            .sum()
    };
    // bracket by coarse scan, then golden-section
    let mut best = (f64::MAX, 0.0);
    let mut lo = -40.0;
    let mut hi = 40.0;
    let coarse = 400;
    for k in 0..=coarse {
        let sig = lo + (hi - lo) * k as f64 / coarse as f64;
        let v = objective(sig);
        if v < best.0 {
            best = (v, sig);
        }
    }
    lo = best.1 - (hi - lo) / coarse as f64;
    hi = best.1 + 80.0 / coarse as f64;
    let golden = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = objective(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let sigma = 0.5 * (a + b);
    Ok(HeteroclinicFit {
        sigma,
        residual: objective(sigma).sqrt(),
    })
}
