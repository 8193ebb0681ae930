//! Shooting over the six-parameter initial-data family: integrate the
//! similarity equation, watch the shrinking set, time the first exit, and
//! drive a cyclic coordinate-wise bisection that maximises the exit time.
//! Everything is deterministic: fixed iteration orders, no seeds.

use crate::error::{CoreError, Result};
use crate::modulation::{
    check_membership, decompose, BoundKind, ExitEvent, MembershipReport, ShrinkingSetParams,
};
use crate::profile::{ModelParams, Profile};
use crate::quad::{GaussianWeight, SpectralDecomp};
use crate::solver::{
    build_initial_data, solve_w_equation, ControlSignal, RGrid, StopReason, WSolverSettings, YGrid,
};

/// One evaluated trajectory. `s_exit` is `f64::INFINITY` when the budget was
/// reached without an exit, in which case `exit_sig` is absent.
#[derive(Clone, Debug)]
pub struct ShootingState {
    pub d6: [f64; 6],
    pub s_exit: f64,
    pub exit_sig: Option<ExitEvent>,
    pub run_id: String,
}

impl ShootingState {
    pub fn exited(&self) -> bool {
        self.s_exit.is_finite()
    }
}

/// Exit with the refined crossing data: the interpolated coefficient vector
/// and margins at the crossing time, where the exiting margin equals 1.
#[derive(Clone, Debug)]
pub struct ExitRecord {
    pub s1: f64,
    pub event: ExitEvent,
    pub q_low: [f64; 7],
    pub q_minus_norm: f64,
    pub margins: Vec<(BoundKind, f64)>,
}

#[derive(Clone, Debug)]
pub struct ShootOutcome {
    pub state: ShootingState,
    /// decomposition series sampled at the snapshot cadence
    pub series: Vec<(f64, SpectralDecomp)>,
    pub exit: Option<ExitRecord>,
    pub sup_series: Vec<(f64, f64)>,
}

/// Everything an exit-time evaluation needs.
pub struct ShootContext {
    pub params: ModelParams,
    pub set: ShrinkingSetParams,
    pub ygrid: YGrid,
    pub rgrid: RGrid,
    pub solver: WSolverSettings,
    profile: Profile,
    quad: GaussianWeight,
}

impl ShootContext {
    pub fn new(params: ModelParams, set: ShrinkingSetParams) -> Result<Self> {
        let profile = Profile::new(&params);
        let quad = GaussianWeight::new(1, 64)?;
        Ok(Self {
            params,
            set,
            ygrid: YGrid::standard(),
            rgrid: RGrid::new(3.0, 1e-2)?,
            solver: WSolverSettings::default(),
            profile,
            quad,
        })
    }

    pub fn quad(&self) -> &GaussianWeight {
        &self.quad
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }
}

fn run_id(d6: &[f64; 6], params: &ModelParams) -> String {
    // FNV-1a over the run-defining bytes; stable across runs by construction
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: f64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    };
    for &v in d6 {
        eat(v);
    }
    eat(params.p);
    eat(params.d as f64);
    eat(params.a_amp);
    eat(params.s0);
    eat(params.eps0);
    format!("{h:016x}")
}

/// Integrate from `s0`, checking membership on every snapshot; return the
/// first exit (refined to the envelope crossing) or the budget sentinel.
pub fn exit_time(d6: &[f64; 6], ctx: &ShootContext, s_budget: f64) -> Result<ShootOutcome> {
    let (frame, _) = build_initial_data(d6, &ctx.params, &ctx.ygrid, &ctx.rgrid)?;
    let mut series: Vec<(f64, SpectralDecomp)> = Vec::new();
    let mut sup_series: Vec<(f64, f64)> = Vec::new();
    let mut reports: Vec<(f64, MembershipReport)> = Vec::new();
    let mut fault: Option<CoreError> = None;

    let run = solve_w_equation(&frame, &ctx.params, s_budget, &ctx.solver, |snap| {
        let decomp = match decompose(snap, &ctx.profile, &ctx.quad, false) {
            Ok(d) => d,
            Err(e) => {
                fault = Some(e);
                return ControlSignal::Stop;
            }
        };
        let sup = snap.sup_norm();
        let report = check_membership(&decomp, sup, snap.s, &ctx.set, None);
        let stop = !report.in_set;
        series.push((snap.s, decomp));
        sup_series.push((snap.s, sup));
        reports.push((snap.s, report));
        if stop {
            ControlSignal::Stop
        } else {
            ControlSignal::Continue
        }
    })?;
    if let Some(e) = fault {
        return Err(e);
    }
    if let StopReason::NumericFault(msg) = &run.reason {
        return Err(CoreError::NumericFault(msg.clone()));
    }

    let id = run_id(d6, &ctx.params);
    let exited = reports.last().map_or(false, |(_, r)| !r.in_set);
    if !exited {
        return Ok(ShootOutcome {
            state: ShootingState {
                d6: *d6,
                s_exit: f64::INFINITY,
                exit_sig: None,
                run_id: id,
            },
            series,
            exit: None,
            sup_series,
        });
    }

    let k = reports.len() - 1;
    let record = if k == 0 {
        // already outside at s0: the exit is the initial snapshot itself
        let (s1, report) = (&reports[0].0, &reports[0].1);
        let d = &series[0].1;
        ExitRecord {
            s1: *s1,
            event: report.exit.expect("violating report has an exit"),
            q_low: d.q_low,
            q_minus_norm: d.q_minus_norm,
            margins: report.margins.clone(),
        }
    } else {
        refine_crossing(
            &series[k - 1],
            &series[k],
            reports[k].1.exit.expect("violating report has an exit"),
            &ctx.set,
        )
    };

    Ok(ShootOutcome {
        state: ShootingState {
            d6: *d6,
            s_exit: record.s1,
            exit_sig: Some(record.event),
            run_id: id,
        },
        series,
        exit: Some(record),
        sup_series,
    })
}

/// Solve `margin(s) = 1` for the exiting bound on the straddling snapshot
/// interval, with the coefficient vector interpolated linearly in `s`.
fn refine_crossing(
    before: &(f64, SpectralDecomp),
    after: &(f64, SpectralDecomp),
    event: ExitEvent,
    set: &ShrinkingSetParams,
) -> ExitRecord {
    let (s_a, d_a) = before;
    let (s_b, d_b) = after;
    let lerp = |t: f64| -> SpectralDecomp {
        let mut q_low = [0.0; 7];
        for m in 0..7 {
            q_low[m] = d_a.q_low[m] + t * (d_b.q_low[m] - d_a.q_low[m]);
        }
        SpectralDecomp {
            q_low,
            q_minus_norm: d_a.q_minus_norm + t * (d_b.q_minus_norm - d_a.q_minus_norm),
            tail: None,
        }
    };
    let margin_of = |t: f64| -> f64 {
        let s = s_a + t * (s_b - s_a);
        let d = lerp(t);
        match event.bound {
            BoundKind::Mode(m) if m <= 5 => d.q_low[m].abs() / set.low_envelope(s),
            BoundKind::Mode(_) => d.q_low[6].abs() / set.top_envelope(s),
            BoundKind::Tail => d.q_minus_norm / set.tail_envelope(s),
            _ => 1.0,
        }
    };
    // bisection on margin(t) - 1; margin(1) > 1 by construction
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if margin_of(0.0) < 1.0 {
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if margin_of(mid) >= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = 0.0;
    }
    let t = hi;
    let s1 = s_a + t * (s_b - s_a);
    let d = lerp(t);
    let report = check_membership(&d, 0.0, s1, set, None);
    ExitRecord {
        s1,
        event,
        q_low: d.q_low,
        q_minus_norm: d.q_minus_norm,
        margins: report.margins,
    }
}

#[derive(Clone, Debug)]
pub struct BisectOutcome {
    pub bracket: (f64, f64),
    pub best: ShootingState,
    pub evaluations: usize,
}

/// Bisection on coordinate `i` with the other five frozen. Endpoints exiting
/// through `i` with opposite signs drive sign-balancing; an endpoint that
/// exits elsewhere (or never) counts as "past the sign flip" and pulls the
/// bracket toward itself by replacing the shorter-lived endpoint.
pub fn bisect_coordinate<E>(
    i: usize,
    bracket: (f64, f64),
    frozen: &[f64; 6],
    mut eval: E,
    max_steps: usize,
    width_tol: f64,
) -> Result<BisectOutcome>
where
    E: FnMut(&[f64; 6]) -> Result<ShootingState>,
{
    if i > 5 {
        return Err(CoreError::Parameter("coordinate index must be <= 5".into()));
    }
    let with_coord = |d: f64| {
        let mut v = *frozen;
        v[i] = d;
        v
    };
    let theta_through_i = |st: &ShootingState| -> Option<i8> {
        st.exit_sig.and_then(|e| match e.bound {
            BoundKind::Mode(m) if m == i => Some(e.theta),
            _ => None,
        })
    };
    let better = |a: &ShootingState, b: &ShootingState| -> bool {
        // strictly longer survival wins
        a.s_exit > b.s_exit
    };

    let (mut lo, mut hi) = bracket;
    let mut st_lo = eval(&with_coord(lo))?;
    let mut st_hi = eval(&with_coord(hi))?;
    let mut evaluations = 2;
    match (theta_through_i(&st_lo), theta_through_i(&st_hi)) {
        (Some(a), Some(b)) if a == b && st_lo.s_exit == st_hi.s_exit => {
            return Err(CoreError::InvalidBracket(format!(
                "coordinate {i}: both endpoints exit ({i}, {a:+})"
            )));
        }
        _ => {}
    }
    let mut best = if better(&st_lo, &st_hi) {
        st_lo.clone()
    } else {
        st_hi.clone()
    };

    for _ in 0..max_steps {
        if (hi - lo).abs() <= width_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let st_mid = eval(&with_coord(mid))?;
        evaluations += 1;
        if better(&st_mid, &best) {
            best = st_mid.clone();
        }
        match (
            theta_through_i(&st_lo),
            theta_through_i(&st_mid),
            theta_through_i(&st_hi),
        ) {
            (Some(tl), Some(tm), _) if tm != tl => {
                hi = mid;
                st_hi = st_mid;
            }
            (_, Some(tm), Some(th)) if tm != th => {
                lo = mid;
                st_lo = st_mid;
            }
            (Some(_), Some(tm), _) => {
                // same sign as lo: the flip is on the other side
                if tm > 0 {
                    // positive exits sit above the flip
                    hi = mid;
                    st_hi = st_mid;
                } else {
                    lo = mid;
                    st_lo = st_mid;
                }
            }
            _ => {
                // mid exits elsewhere or survives: pull in the weaker endpoint
                if st_lo.s_exit <= st_hi.s_exit {
                    lo = mid;
                    st_lo = st_mid;
                } else {
                    hi = mid;
                    st_hi = st_mid;
                }
            }
        }
    }
    Ok(BisectOutcome {
        bracket: (lo, hi),
        best,
        evaluations,
    })
}

#[derive(Clone, Debug)]
pub struct SearchSettings {
    pub s_target: f64,
    pub eval_budget: usize,
    pub max_rounds: usize,
    pub initial_bracket: f64,
    pub width_tol: f64,
}

impl SearchSettings {
    pub fn new(s_target: f64, eval_budget: usize) -> Self {
        Self {
            s_target,
            eval_budget,
            max_rounds: 8,
            initial_bracket: 0.5,
            width_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: ShootingState,
    pub history: Vec<ShootingState>,
    pub evaluations: usize,
    pub reached_target: bool,
}

/// Cyclic coordinate-wise bisection over `i = 0..5` (fastest-growing mode
/// first), warm-starting each round from the best state so far. Stops at
/// `s_exit >= s_target` or on budget exhaustion; either way the full history
/// is returned.
pub fn search(ctx: &ShootContext, settings: &SearchSettings) -> Result<SearchResult> {
    let mut history: Vec<ShootingState> = Vec::new();
    let mut evaluations = 0usize;
    let box_edge = 2.0;

    let target = ctx.params.s0 + settings.s_target;
    let budget_s = target + 0.5;

    macro_rules! spent {
        () => {
            evaluations >= settings.eval_budget
        };
    }

    // round-0 reference
    let baseline = exit_time(&[0.0; 6], ctx, budget_s)?;
    evaluations += 1;
    history.push(baseline.state.clone());
    let mut best = baseline.state;

    let mut widths = [settings.initial_bracket; 6];
    'rounds: for _round in 0..settings.max_rounds {
        if best.s_exit >= target || spent!() {
            break;
        }
        let mut improved = false;
        for i in 0..6 {
            if best.s_exit >= target || spent!() {
                break 'rounds;
            }
            let frozen = best.d6;
            let w = widths[i];
            let lo = (frozen[i] - w).max(-box_edge);
            let hi = (frozen[i] + w).min(box_edge);
            let before_best = best.s_exit;
            // leave budget headroom for the remaining coordinates
            let step_cap = 24.min(settings.eval_budget.saturating_sub(evaluations));
            let outcome = {
                let mut eval = |d: &[f64; 6]| -> Result<ShootingState> {
                    let st = exit_time(d, ctx, budget_s)?;
                    evaluations += 1;
                    history.push(st.state.clone());
                    Ok(st.state)
                };
                bisect_coordinate(i, (lo, hi), &frozen, &mut eval, step_cap, settings.width_tol)
            };
            match outcome {
                Ok(out) => {
                    if out.best.s_exit > best.s_exit {
                        best = out.best;
                        improved = true;
                    }
                    let final_width = (out.bracket.1 - out.bracket.0).abs();
                    widths[i] = (4.0 * final_width).clamp(16.0 * settings.width_tol, 0.5);
                    let _ = before_best;
                }
                Err(CoreError::InvalidBracket(_)) => {
                    // widen next time around
                    widths[i] = (2.0 * widths[i]).min(box_edge);
                }
                Err(e) => return Err(e),
            }
        }
        if !improved {
            break;
        }
    }

    let reached_target = best.s_exit >= target;
    Ok(SearchResult {
        best,
        history,
        evaluations,
        reached_target,
    })
}

/// Boundary-normalised exit map `d -> (q_0..q_5)(s_*) e^{+2 s_*} / A`; the
/// exiting coordinate lands on +-1 by the crossing refinement. (With the
/// exit condition `q_i = +-A e^{-2 s_*}`, only the growing normalisation
/// factor can reach the unit-cube boundary.)
pub fn exit_map(d6: &[f64; 6], ctx: &ShootContext, s_probe: f64) -> Result<[f64; 6]> {
    let outcome = exit_time(d6, ctx, s_probe)?;
    let record = outcome.exit.ok_or(CoreError::NoExit { s_probe })?;
    let scale = (2.0 * record.s1).exp() / ctx.set.a_amp;
    let mut v = [0.0; 6];
    for m in 0..6 {
        v[m] = record.q_low[m] * scale;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synthetic exit model: `q_i(s) = A e^{-2 s0} d_i e^{(1 - i/2)(s - s0)}`
    /// against the `A e^{-2s}` envelope; exit when `|d_i| e^{(3 - i/2) ds} = 1`.
    fn synthetic_eval(i: usize, s0: f64) -> impl FnMut(&[f64; 6]) -> Result<ShootingState> {
        move |d6: &[f64; 6]| {
            let di = d6[i];
            if di == 0.0 {
                return Ok(ShootingState {
                    d6: *d6,
                    s_exit: f64::INFINITY,
                    exit_sig: None,
                    run_id: "synthetic".into(),
                });
            }
            let rate = 3.0 - i as f64 / 2.0;
            let ds = -(di.abs().ln()) / rate;
            Ok(ShootingState {
                d6: *d6,
                s_exit: s0 + ds.max(0.0),
                exit_sig: Some(ExitEvent {
                    bound: BoundKind::Mode(i),
                    theta: if di > 0.0 { 1 } else { -1 },
                }),
                run_id: "synthetic".into(),
            })
        }
    }

    #[test]
    fn bisection_recovers_zero_of_linear_model() {
        for i in 0..6usize {
            let mut eval = synthetic_eval(i, 10.0);
            let out = bisect_coordinate(
                i,
                (-0.5, 0.5),
                &[0.0; 6],
                &mut eval,
                20,
                0.0,
            )
            .unwrap();
            let width = out.bracket.1 - out.bracket.0;
            assert!(
                width <= 2.0f64.powi(-20) + 1e-18,
                "mode {i}: width {width}"
            );
            assert!(out.bracket.0 <= 0.0 && 0.0 <= out.bracket.1);
        }
    }

    #[test]
    fn invalid_bracket_is_reported() {
        let mut calls = 0;
        let eval = |d6: &[f64; 6]| -> Result<ShootingState> {
            calls += 1;
            Ok(ShootingState {
                d6: *d6,
                s_exit: 10.0,
                exit_sig: Some(ExitEvent {
                    bound: BoundKind::Mode(2),
                    theta: 1,
                }),
                run_id: "x".into(),
            })
        };
        let err = bisect_coordinate(2, (0.1, 0.2), &[0.0; 6], eval, 5, 1e-9);
        assert!(matches!(err, Err(CoreError::InvalidBracket(_))));
    }

    #[test]
    fn refined_midpoint_not_worse_than_endpoints() {
        let mut eval = synthetic_eval(3, 10.0);
        let lo_state = eval(&{
            let mut d = [0.0; 6];
            d[3] = -0.4;
            d
        })
        .unwrap();
        let hi_state = eval(&{
            let mut d = [0.0; 6];
            d[3] = 0.4;
            d
        })
        .unwrap();
        let out = bisect_coordinate(3, (-0.4, 0.4), &[0.0; 6], &mut eval, 25, 0.0).unwrap();
        assert!(out.best.s_exit >= lo_state.s_exit);
        assert!(out.best.s_exit >= hi_state.s_exit);
    }
}
