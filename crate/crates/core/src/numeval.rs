//! Floating-point evaluation of truncated series at a point, and a numeric
//! cross-check of formula instances.
//!
//! Term ratios are formed exactly and converted to `f64` once; the sum is
//! accumulated per weighted-degree layer and the layers are added in
//! increasing order. The tail estimate is the magnitude of the last nonempty
//! layer. It is a heuristic, not a bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::{describe, IdentityForm, IdentityInstance, Status, Summand};
use crate::kdf_core::{convergence_class, ratio_table, KdfSpec, SlotBinding};

/// Weighted degree used by [`numeric_verify`].
pub const NUMERIC_CAP: u32 = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalResult {
    pub value: f64,
    pub terms_used: u64,
    pub tail_estimate: f64,
    pub domain_ok: bool,
}

/// Evaluates with slot `t` at `point[t]`.
pub fn evaluate(spec: &KdfSpec, point: &[f64], cap: u32) -> Result<EvalResult> {
    if point.len() != spec.n() {
        return Err(Error::ShapeMismatch(format!("point has {} entries, series has {} slots", point.len(), spec.n())));
    }
    evaluate_bound(spec, &SlotBinding::identity(spec.n()), point, cap)
}

/// Evaluates under a binding: slot `t` receives `vars[var_t]^mult_t`, and
/// index vectors with `sum_t mult_t s_t <= cap` are summed.
pub fn evaluate_bound(spec: &KdfSpec, binding: &SlotBinding, vars: &[f64], cap: u32) -> Result<EvalResult> {
    binding.check(spec.n(), vars.len())?;
    let args: Vec<f64> = binding.slots().iter().map(|s| vars[s.var].powi(s.mult as i32)).collect();
    let (joined_reach, slot_reach) = binding.reach(cap);
    let joined: Vec<f64> = ratio_table(&spec.a, &spec.alpha, joined_reach, false, "joined denominator")?
        .iter()
        .map(|x| x.to_f64())
        .collect();
    let per_slot = (0..spec.n())
        .map(|t| {
            let tab = ratio_table(&spec.b[t], &spec.beta[t], slot_reach[t], true, &format!("slot {} denominator", t + 1))?;
            let mut pow = 1.0;
            Ok(tab
                .iter()
                .map(|x| {
                    let v = x.to_f64() * pow;
                    pow *= args[t];
                    v
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mults: Vec<u32> = binding.slots().iter().map(|s| s.mult).collect();
    let mut acc = Accum { layers: vec![0.0; cap as usize + 1], occupied: vec![false; cap as usize + 1], terms: 0 };
    let mut s = vec![0u32; spec.n()];
    visit(&mults, &args, &joined, &per_slot, cap, 0, 0, &mut s, &mut acc);

    let value = acc.layers.iter().sum();
    let last = acc.occupied.iter().rposition(|&o| o).unwrap_or(0);
    let domain_ok = convergence_class(spec).admits(spec, &args);
    Ok(EvalResult {
        value,
        terms_used: acc.terms.max(1),
        tail_estimate: acc.layers[last].abs(),
        domain_ok,
    })
}

struct Accum {
    layers: Vec<f64>,
    occupied: Vec<bool>,
    terms: u64,
}

#[allow(clippy::too_many_arguments)]
fn visit(
    mults: &[u32],
    args: &[f64],
    joined: &[f64],
    per_slot: &[Vec<f64>],
    cap: u32,
    slot: usize,
    used: u32,
    s: &mut Vec<u32>,
    acc: &mut Accum,
) {
    if slot == mults.len() {
        let total: u32 = s.iter().sum();
        let mut v = joined[total as usize];
        for (t, &st) in s.iter().enumerate() {
            v *= per_slot[t][st as usize];
        }
        acc.occupied[used as usize] = true;
        if v != 0.0 {
            acc.layers[used as usize] += v;
            acc.terms += 1;
        }
        return;
    }
    let mult = mults[slot];
    // a zero argument contributes only through s_t = 0
    let top = if args[slot] == 0.0 { 0 } else { (cap - used) / mult };
    for st in 0..=top {
        s[slot] = st;
        visit(mults, args, joined, per_slot, cap, slot + 1, used + st * mult, s, acc);
    }
    s[slot] = 0;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NumericReport {
    pub status: Status,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_diff: f64,
    /// Largest tail estimate over all summands, scaled by coefficient.
    pub tail_estimate: f64,
    /// Whether every expansion in the instance converges at the point.
    pub domain_ok: bool,
}

fn side_value(form: &IdentityForm, terms: &[Summand], point: &[f64], cap: u32) -> Result<(f64, f64, bool)> {
    let mut value = 0.0;
    let mut tail: f64 = 0.0;
    let mut ok = true;
    for s in terms {
        let c = s.coef.value()?.to_f64();
        if c == 0.0 {
            continue;
        }
        let e = evaluate_bound(&s.spec, &form.binding, point, cap)?;
        let scale = c * point[0].powi(s.shift as i32);
        value += scale * e.value;
        tail = tail.max((scale * e.tail_estimate).abs());
        ok &= e.domain_ok;
    }
    Ok((value, tail, ok))
}

/// Evaluates both sides at `point` (one entry per formal variable of the
/// instance) with weighted degree [`NUMERIC_CAP`] and compares them.
pub fn numeric_verify(inst: &IdentityInstance, point: &[f64], rel_tol: f64) -> Result<NumericReport> {
    numeric_verify_at(inst, point, rel_tol, NUMERIC_CAP)
}

pub fn numeric_verify_at(inst: &IdentityInstance, point: &[f64], rel_tol: f64, cap: u32) -> Result<NumericReport> {
    let form = describe(inst)?;
    if point.len() != form.var_count {
        return Err(Error::ShapeMismatch(format!(
            "point has {} entries, instance uses {} variables",
            point.len(),
            form.var_count
        )));
    }
    let (lhs, lt, lok) = side_value(&form, &form.lhs, point, cap)?;
    let (rhs, rt, rok) = side_value(&form, &form.rhs, point, cap)?;
    let scale = lhs.abs().max(rhs.abs());
    let rel_diff = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(NumericReport {
        status: if rel_diff <= rel_tol { Status::Pass } else { Status::Fail },
        lhs,
        rhs,
        rel_diff,
        tail_estimate: lt.max(rt),
        domain_ok: lok && rok,
    })
}
