//! Busemann functions and their first two derivatives.
//!
//! In one hyperboloid factor with boundary representative `xi` (null,
//! `<o, xi> = -1`):
//!
//! ```text
//! B_p(x, xi)      = log(-<x, xi>) - log(-<p, xi>)
//! dB_(x,xi)(u)    = <u, xi> / <x, xi>
//! DdB_(x,xi)(u,v) = <u, v> - dB(u) dB(v)
//! ```
//!
//! `B` decreases at unit rate along the ray toward `xi`. In `H^2 x H^2` the
//! factor quantities are added with weight `1/sqrt 2`.

use crate::model::{minkowski, BoundaryPoint, Model, ModelPoint, TangentVector};

pub fn busemann(model: &Model, p: &ModelPoint, x: &ModelPoint, theta: &BoundaryPoint) -> f64 {
    busemann_raw(model, p.as_slice(), x.as_slice(), theta.as_slice())
}

pub(crate) fn busemann_raw(model: &Model, p: &[f64], x: &[f64], xi: &[f64]) -> f64 {
    let w = model.busemann_weight();
    model
        .factor_ranges()
        .into_iter()
        .map(|r| {
            let xf = -minkowski(&x[r.clone()], &xi[r.clone()]);
            let pf = -minkowski(&p[r.clone()], &xi[r]);
            w * (xf / pf).ln()
        })
        .sum()
}

/// Per-factor Busemann values `B^f_p(x, theta)` (unweighted).
pub fn factor_busemann(model: &Model, p: &ModelPoint, x: &ModelPoint, theta: &BoundaryPoint) -> Vec<f64> {
    model
        .factor_ranges()
        .into_iter()
        .map(|r| {
            let xf = -minkowski(&x.as_slice()[r.clone()], &theta.as_slice()[r.clone()]);
            let pf = -minkowski(&p.as_slice()[r.clone()], &theta.as_slice()[r]);
            (xf / pf).ln()
        })
        .collect()
}

pub fn busemann_one_form(model: &Model, x: &ModelPoint, theta: &BoundaryPoint, u: &TangentVector) -> f64 {
    let w = model.busemann_weight();
    model
        .factor_ranges()
        .into_iter()
        .map(|r| {
            let xi = &theta.as_slice()[r.clone()];
            w * minkowski(&u.as_slice()[r.clone()], xi) / minkowski(&x.as_slice()[r], xi)
        })
        .sum()
}

pub fn busemann_two_form(
    model: &Model,
    x: &ModelPoint,
    theta: &BoundaryPoint,
    u: &TangentVector,
    v: &TangentVector,
) -> f64 {
    let w = model.busemann_weight();
    model
        .factor_ranges()
        .into_iter()
        .map(|r| {
            let xi = &theta.as_slice()[r.clone()];
            let uf = &u.as_slice()[r.clone()];
            let vf = &v.as_slice()[r.clone()];
            let s = minkowski(&x.as_slice()[r], xi);
            let du = minkowski(uf, xi) / s;
            let dv = minkowski(vf, xi) / s;
            w * (minkowski(uf, vf) - du * dv)
        })
        .sum()
}

/// Metric dual of `dB_(x,theta)`; a unit vector pointing away from `theta`.
pub fn busemann_gradient(model: &Model, x: &ModelPoint, theta: &BoundaryPoint) -> TangentVector {
    let w = model.busemann_weight();
    let mut out = x.as_vector().clone();
    for r in model.factor_ranges() {
        let xi = &theta.as_slice()[r.clone()];
        let s = minkowski(&x.as_slice()[r.clone()], xi);
        for (o, (xv, xiv)) in out.as_mut_slice()[r.clone()]
            .iter_mut()
            .zip(x.as_slice()[r.clone()].iter().zip(xi))
        {
            *o = w * (xiv / s + xv);
        }
    }
    TangentVector(out)
}

/// Unit-speed ray from `p` toward `theta`, evaluated at time `t`.
pub fn geodesic_ray(model: &Model, p: &ModelPoint, theta: &BoundaryPoint, t: f64) -> ModelPoint {
    let dir = busemann_gradient(model, p, theta).scaled(-1.0);
    model.exp_map(p, &dir, t)
}
