use super::common::{adjoint_ensemble, gradient, AdjointMember, LogSum, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::model::{Field, Kernel};
use crate::pde::Problem;
use crate::weights::WeightSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarlemanVariant {
    /// Degenerate weight with the trace of `v_x` at `x = 1` on the right.
    Boundary,
    /// Degenerate weight on the left, observation on the control set on the right.
    Local,
    /// Weights that do not blow up at `t = 0`, with the initial trace on the left.
    ModifiedNondiv,
    /// Divergence form with observation on the control set.
    Div,
    /// Divergence form with weights that do not blow up at `t = 0`.
    ModifiedDiv,
}

impl CarlemanVariant {
    pub fn all() -> [CarlemanVariant; 5] {
        [Self::Boundary, Self::Local, Self::ModifiedNondiv, Self::Div, Self::ModifiedDiv]
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Self::Div | Self::ModifiedDiv)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Boundary => "boundary",
            Self::Local => "local",
            Self::ModifiedNondiv => "modified_nondiv",
            Self::Div => "div",
            Self::ModifiedDiv => "modified_div",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarlemanOptions {
    pub members: usize,
    pub seed: u64,
    pub sweep_points: usize,
    /// Centre of the sweep `[s_mid/2, 2 s_mid]`; the weight set's `s` when absent.
    pub s_mid: Option<f64>,
    /// Largest acceptable ratio.
    pub ratio_cap: f64,
    /// Explicit geometric sweep `(lo, hi, points)`, replacing the one around `s_mid`.
    pub range: Option<(f64, f64, usize)>,
}

impl Default for CarlemanOptions {
    fn default() -> Self {
        Self { members: 10, seed: DEFAULT_SEED, sweep_points: 5, s_mid: None, ratio_cap: 1e12, range: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberRatio {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Gradient (or initial trace) term and zero-order term of the left side.
    pub lhs_terms: [f64; 2],
    /// Source term and observation (or boundary) term of the right side.
    pub rhs_terms: [f64; 2],
    /// `None` when the right side vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanRecord {
    pub s: f64,
    pub members: Vec<MemberRatio>,
    pub max_ratio: f64,
    /// Mean ratio of the top quarter of members.
    pub top_quartile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanReport {
    pub variant: CarlemanVariant,
    pub nodes: usize,
    pub steps: usize,
    pub records: Vec<CarlemanRecord>,
    pub max_ratio: f64,
    /// Top-quartile ratios do not increase over the upper half of the sweep.
    pub trend_nonincreasing: bool,
    pub excluded: Vec<String>,
    pub passed: bool,
}

impl CarlemanReport {
    /// Per-member rows: `s,member,lhs,rhs,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,member,lhs,rhs,ratio\n");
        for r in &self.records {
            for m in &r.members {
                out.push_str(&format!(
                    "{:.16e},{},{:.16e},{:.16e},{}\n",
                    r.s,
                    m.index,
                    m.lhs,
                    m.rhs,
                    m.ratio.map_or(String::new(), |v| format!("{v:.16e}"))
                ));
            }
        }
        out
    }

    /// Plot data `s,max_ratio,top_quartile`.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("s,max_ratio,top_quartile\n");
        for r in &self.records {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.s, r.max_ratio, r.top_quartile));
        }
        out
    }
}

/// Geometric sweep over `[s_mid/2, 2 s_mid]`.
pub fn s_sweep(s_mid: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![s_mid];
    }
    geometric_range(0.5 * s_mid, 2.0 * s_mid, points)
}

/// `points` values spaced geometrically from `lo` to `hi`.
pub fn geometric_range(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![(lo * hi).sqrt()];
    }
    let r = (hi / lo).ln();
    (0..points).map(|k| lo * (r * k as f64 / (points - 1) as f64).exp()).collect()
}

fn over_a(value: f64, a: f64) -> f64 {
    if a > 0.0 {
        value / a
    } else {
        0.0
    }
}

struct Sides {
    lhs: [LogSum; 2],
    rhs: [LogSum; 2],
    /// Log of a common factor multiplying the right side.
    rhs_log_factor: f64,
}

fn evaluate_member(pb: &Problem, w: &WeightSet, variant: CarlemanVariant, s: f64, member: &AdjointMember) -> Sides {
    let time = &pb.time;
    let grid = &pb.grid;
    let x = grid.nodes();
    let q = grid.weights();
    let a = pb.coef.sample(x);
    let horizon = time.horizon();
    let main = w.main_space();
    let big = &w.big_psi;
    let v: &Field = &member.solution;
    let g: &Field = &member.source;
    let mut lhs = [LogSum::default(), LogSum::default()];
    let mut rhs = [LogSum::default(), LogSum::default()];
    let mut rhs_log_factor = 0.0;
    let modified = matches!(variant, CarlemanVariant::ModifiedNondiv | CarlemanVariant::ModifiedDiv);
    let div = variant.is_divergence();

    if modified {
        let t_shift = if div { 0.625 * horizon } else { w.params.t_star() };
        let hat0 = w.main_hat(w.nu(0.0));
        rhs_log_factor = 2.0 * s * (hat0 - w.main_check(w.nu(t_shift)));
        let v0 = v.level(0);
        for i in 0..x.len() {
            let val = if div { v0[i] * v0[i] } else { over_a(v0[i] * v0[i], a[i]) };
            lhs[0].add(q[i] * val, 2.0 * s * hat0);
        }
    }

    for n in 0..time.levels() {
        let t = time.t(n);
        let tw = time.weight(n);
        let tf = if modified { w.nu(t) } else { w.theta(t) };
        if !tf.is_finite() || tw == 0.0 {
            continue;
        }
        let vn = v.level(n);
        let gn = g.level(n);
        let vx = gradient(vn, grid);
        for i in 0..x.len() {
            let lw_main = 2.0 * s * tf * main[i];
            let lw_big = 2.0 * s * tf * big[i];
            let obs = pb.mask[i] > 0.0;
            let c = tw * q[i];
            let v2 = vn[i] * vn[i];
            let g2 = gn[i] * gn[i];
            match variant {
                CarlemanVariant::Boundary | CarlemanVariant::Local => {
                    lhs[0].add(c * s * tf * vx[i] * vx[i], lw_main);
                    let ratio = over_a(x[i], a[i]);
                    lhs[1].add(c * (s * tf).powi(3) * ratio * ratio * v2, lw_main);
                    if variant == CarlemanVariant::Boundary {
                        rhs[0].add(c * over_a(g2, a[i]), lw_main);
                    } else {
                        rhs[0].add(c * over_a(g2, a[i]), lw_big);
                        if obs {
                            rhs[1].add(c * (s * tf).powi(3) * over_a(v2, a[i]), lw_big);
                        }
                    }
                }
                CarlemanVariant::Div => {
                    lhs[0].add(c * s * tf * a[i] * vx[i] * vx[i], lw_main);
                    lhs[1].add(c * (s * tf).powi(3) * over_a(x[i] * x[i], a[i]) * v2, lw_main);
                    rhs[0].add(c * g2, lw_big);
                    if obs {
                        rhs[1].add(c * (s * tf).powi(3) * v2, lw_big);
                    }
                }
                CarlemanVariant::ModifiedNondiv => {
                    lhs[1].add(c * over_a(v2, a[i]), lw_main);
                    rhs[0].add(c * over_a(g2, a[i]), lw_big);
                    if obs {
                        rhs[1].add(c * (s * tf).powi(3) * over_a(v2, a[i]), lw_big);
                    }
                }
                CarlemanVariant::ModifiedDiv => {
                    lhs[1].add(c * v2, lw_main);
                    rhs[0].add(c * g2, lw_big);
                    if obs {
                        rhs[1].add(c * (s * tf).powi(3) * v2, lw_big);
                    }
                }
            }
        }
        if variant == CarlemanVariant::Boundary {
            let last = x.len() - 1;
            let lw = 2.0 * s * tf * main[last];
            rhs[1].add(tw * 2.0 * s * tf * x[last] * vx[last] * vx[last], lw);
        }
    }
    Sides { lhs, rhs, rhs_log_factor }
}

fn member_ratio(index: usize, sides: &Sides) -> MemberRatio {
    let mut lhs_all = sides.lhs[0];
    lhs_all.merge(&sides.lhs[1]);
    let mut rhs_all = sides.rhs[0];
    rhs_all.merge(&sides.rhs[1]);
    let f = sides.rhs_log_factor;
    let ratio = if rhs_all.is_zero() { None } else { Some((lhs_all.ln() - rhs_all.ln() - f).exp()) };
    MemberRatio {
        index,
        lhs: lhs_all.value(),
        rhs: (rhs_all.ln() + f).exp(),
        lhs_terms: [sides.lhs[0].value(), sides.lhs[1].value()],
        rhs_terms: [(sides.rhs[0].ln() + f).exp(), (sides.rhs[1].ln() + f).exp()],
        ratio,
    }
}

fn top_quartile(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = sorted.len().div_ceil(4);
    sorted[..k].iter().sum::<f64>() / k as f64
}

fn check_form(pb: &Problem, divergence: bool) -> Result<()> {
    if pb.coef.form.is_divergence() != divergence {
        return Err(Error::Config(format!("estimate variant does not apply to the {} form", pb.coef.form.name())));
    }
    Ok(())
}

/// Evaluates both sides of a Carleman-type estimate on a seeded ensemble of adjoint solutions over
/// an `s` sweep.
pub fn check_carleman(
    pb: &Problem,
    weights: &WeightSet,
    variant: CarlemanVariant,
    opts: &CarlemanOptions,
) -> Result<CarlemanReport> {
    check_form(pb, variant.is_divergence())?;
    let local = pb.with_kernel(Kernel::zero())?;
    let ensemble = adjoint_ensemble(&local, opts.members, opts.seed, true)?;
    let (s_mid, sweep) = match opts.range {
        Some((lo, hi, k)) => {
            if !(lo > 0.0 && hi >= lo && k > 0) {
                return Err(Error::Config(format!("invalid s range {lo}:{hi}:{k}")));
            }
            (opts.s_mid.unwrap_or((lo * hi).sqrt()), geometric_range(lo, hi, k))
        }
        None => {
            let s_mid = opts.s_mid.unwrap_or(weights.params.s);
            (s_mid, s_sweep(s_mid, opts.sweep_points))
        }
    };
    let mut excluded = Vec::new();
    let mut records = Vec::with_capacity(sweep.len());
    for &s in &sweep {
        let members: Vec<MemberRatio> = ensemble
            .par_iter()
            .map(|m| member_ratio(m.index, &evaluate_member(&local, weights, variant, s, m)))
            .collect();
        for m in &members {
            if m.ratio.is_none() {
                excluded.push(format!("member {} at s = {s:e}: right side vanishes", m.index));
            }
        }
        let ratios: Vec<f64> = members.iter().filter_map(|m| m.ratio).collect();
        let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        records.push(CarlemanRecord { s, members, max_ratio, top_quartile: top_quartile(&ratios) });
    }
    let max_ratio = records.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let upper: Vec<f64> = records.iter().filter(|r| r.s >= s_mid * (1.0 - 1e-12)).map(|r| r.top_quartile).collect();
    let trend_nonincreasing = upper.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let passed = max_ratio.is_finite() && max_ratio <= opts.ratio_cap && trend_nonincreasing;
    Ok(CarlemanReport {
        variant,
        nodes: pb.grid.cells(),
        steps: pb.time.steps(),
        records,
        max_ratio,
        trend_nonincreasing,
        excluded,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliReport {
    pub s: f64,
    pub inner: (f64, f64),
    pub outer: (f64, f64),
    pub members: Vec<MemberRatio>,
    pub max_ratio: f64,
    pub excluded: Vec<String>,
}

/// Gradient on an inner interval against weighted zero-order terms on an enclosing interval.
///
/// The weight is `theta(t) eta(x)` with `eta` the main space weight, which is negative.
pub fn check_caccioppoli(
    pb: &Problem,
    weights: &WeightSet,
    outer: (f64, f64),
    inner: (f64, f64),
    s: Option<f64>,
    members: usize,
    seed: u64,
) -> Result<CaccioppoliReport> {
    if !(0.0 < outer.0 && outer.0 < inner.0 && inner.0 < inner.1 && inner.1 < outer.1 && outer.1 < 1.0) {
        return Err(Error::InvalidRegion(format!("need {inner:?} compactly inside {outer:?} inside (0, 1)")));
    }
    let s = s.unwrap_or(weights.params.s);
    let local = pb.with_kernel(Kernel::zero())?;
    let ensemble = adjoint_ensemble(&local, members, seed, true)?;
    let x = local.grid.nodes();
    let q = local.grid.weights();
    let a = local.coef.sample(x);
    let div = local.coef.form.is_divergence();
    let eta = weights.main_space();
    let time = &local.time;
    let rows: Vec<MemberRatio> = ensemble
        .par_iter()
        .map(|m| {
            let mut lhs = LogSum::default();
            let (mut src, mut obs) = (LogSum::default(), LogSum::default());
            for n in 0..time.levels() {
                let th = weights.theta(time.t(n));
                if !th.is_finite() {
                    continue;
                }
                let tw = time.weight(n);
                let vn = m.solution.level(n);
                let gn = m.source.level(n);
                let vx = gradient(vn, &local.grid);
                for i in 0..x.len() {
                    let lw = 2.0 * s * th * eta[i];
                    let c = tw * q[i];
                    if inner.0 < x[i] && x[i] < inner.1 {
                        lhs.add(c * vx[i] * vx[i], lw);
                    }
                    if outer.0 < x[i] && x[i] < outer.1 {
                        let v2 = vn[i] * vn[i];
                        obs.add(c * (s * th).powi(2) * if div { v2 } else { over_a(v2, a[i]) }, lw);
                    }
                    let g2 = gn[i] * gn[i];
                    src.add(c * if div { g2 } else { over_a(g2, a[i]) }, lw);
                }
            }
            member_ratio(m.index, &Sides { lhs: [lhs, LogSum::default()], rhs: [src, obs], rhs_log_factor: 0.0 })
        })
        .collect();
    let excluded = rows
        .iter()
        .filter(|r| r.ratio.is_none())
        .map(|r| format!("member {}: right side vanishes", r.index))
        .collect();
    let max_ratio = rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    Ok(CaccioppoliReport { s, inner, outer, members: rows, max_ratio, excluded })
}
