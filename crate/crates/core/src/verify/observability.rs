use super::common::adjoint_ensemble;
use crate::error::Result;
use crate::pde::Problem;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    /// `|v(0)|^2 / int int_omega v^2`; `None` for an excluded member.
    pub ratios: Vec<Option<f64>>,
    /// Same numerator over the whole domain.
    pub full_ratios: Vec<Option<f64>>,
    /// `|v(0)|^2 / int_0^T |v|^2` with both norms in the natural space.
    pub weighted_ratios: Vec<Option<f64>>,
    /// Empirical lower bound for the observability constant.
    pub max_ratio: f64,
    /// `e^{2 L T} / T` with `L` a bound for the transposed kernel operator.
    pub weighted_bound: f64,
    pub kernel_norm: f64,
    pub weighted_ok: bool,
    /// Every control-set ratio is at least the full-domain ratio.
    pub ordering_ok: bool,
    pub excluded: Vec<String>,
}

/// Bound for the transposed kernel operator in the natural inner product, over the time levels.
fn kernel_operator_bound(pb: &Problem) -> f64 {
    if !pb.has_kernel() {
        return 0.0;
    }
    let n = pb.nodes();
    let mass = &pb.op.mass;
    let mut best: f64 = 0.0;
    for level in 0..pb.time.levels() {
        let mut frob = 0.0;
        for j in pb.op.active() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = pb.nonlocal(level, &e, true);
            for i in pb.op.active() {
                frob += mass[i] / mass[j] * col[i] * col[i];
            }
        }
        best = best.max(frob.sqrt());
    }
    best
}

/// Ratio of the initial adjoint energy to the observed energy for random terminal data.
pub fn check_observability(pb: &Problem, members: usize, seed: u64) -> Result<ObservabilityReport> {
    let ensemble = adjoint_ensemble(pb, members, seed, false)?;
    let time = &pb.time;
    let q = pb.grid.weights();
    let horizon = time.horizon();
    let kernel_norm = kernel_operator_bound(pb);
    let weighted_bound = (2.0 * kernel_norm * horizon).exp() / horizon;
    let mut ratios = Vec::new();
    let mut full_ratios = Vec::new();
    let mut weighted_ratios = Vec::new();
    let mut excluded = Vec::new();
    for m in &ensemble {
        let v = &m.solution;
        let num = pb.op.inner(v.level(0), v.level(0));
        let (mut obs, mut full, mut natural) = (0.0, 0.0, 0.0);
        for n in 0..time.levels() {
            let tw = time.weight(n);
            let vn = v.level(n);
            for i in pb.op.active() {
                let c = tw * q[i] * vn[i] * vn[i];
                full += c;
                if pb.mask[i] > 0.0 {
                    obs += c;
                }
            }
            natural += tw * pb.op.inner(vn, vn);
        }
        if obs > 0.0 {
            ratios.push(Some(num / obs));
        } else {
            excluded.push(format!("member {}: no observed energy", m.index));
            ratios.push(None);
        }
        full_ratios.push(if full > 0.0 { Some(num / full) } else { None });
        weighted_ratios.push(if natural > 0.0 { Some(num / natural) } else { None });
    }
    let max_ratio = ratios.iter().flatten().cloned().fold(0.0, f64::max);
    let weighted_ok = weighted_ratios.iter().flatten().all(|r| *r <= weighted_bound * (1.0 + 1e-12));
    let ordering_ok = ratios.iter().zip(&full_ratios).all(|(r, f)| match (r, f) {
        (Some(r), Some(f)) => *r >= f * (1.0 - 1e-12),
        _ => true,
    });
    Ok(ObservabilityReport {
        ratios,
        full_ratios,
        weighted_ratios,
        max_ratio,
        weighted_bound,
        kernel_norm,
        weighted_ok,
        ordering_ok,
        excluded,
    })
}
