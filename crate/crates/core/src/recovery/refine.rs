//! Off-grid refinement by cyclic coordinate ascent.

use nalgebra::{DMatrix, DVector};

use crate::channel::{exact_response, fresnel_response, WaveModel};
use crate::geometry::ArrayGeometry;
use crate::recovery::{sort_by_power, Estimate};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Search half-widths (one grid cell) per coordinate; zero disables that coordinate.
    pub step_u: f64,
    pub step_v: f64,
    pub step_inv_r: f64,
    pub max_cycles: usize,
    /// Stop once a cycle improves the objective by less than this fraction.
    pub tolerance: f64,
    pub model: WaveModel,
}

impl RefineOptions {
    pub fn new(step_u: f64, step_v: f64, step_inv_r: f64) -> Self {
        Self { step_u, step_v, step_inv_r, max_cycles: 20, tolerance: 1e-6, model: WaveModel::Exact }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput {
    pub estimates: Vec<Estimate>,
    /// Objective before the first cycle and after each completed cycle.
    pub objective: Vec<f64>,
}

fn response(geom: &ArrayGeometry, model: WaveModel, p: [f64; 3]) -> DVector<C64> {
    let [u, v, inv_r] = p;
    let a = match model {
        WaveModel::Fresnel => fresnel_response(geom, u, v, inv_r),
        WaveModel::Exact => exact_response(geom, u, v, if inv_r > 0.0 { 1.0 / inv_r } else { f64::INFINITY }),
    };
    DVector::from_vec(a)
}

/// Orthonormal basis of the given columns (dependent columns are skipped).
fn basis(cols: &[DVector<C64>]) -> Vec<DVector<C64>> {
    let mut q: Vec<DVector<C64>> = Vec::new();
    for c in cols {
        let scale = c.norm_squared();
        let mut w = c.clone();
        for e in &q {
            let coef = e.dotc(&w);
            w.axpy(-coef, e, C64::new(1.0, 0.0));
        }
        let n = w.norm_squared();
        if n > 1e-20 * scale {
            q.push(w / C64::new(n.sqrt(), 0.0));
        }
    }
    q
}

fn project_out(q: &[DVector<C64>], a: &DVector<C64>) -> DVector<C64> {
    let mut w = a.clone();
    for e in q {
        let coef = e.dotc(&w);
        w.axpy(-coef, e, C64::new(1.0, 0.0));
    }
    w
}

/// `‖P_A Y‖²_F`, the energy of `y` captured by the span of the steering vectors.
pub fn captured(geom: &ArrayGeometry, model: WaveModel, params: &[[f64; 3]], y: &DMatrix<C64>) -> f64 {
    let cols: Vec<DVector<C64>> = params.iter().map(|&p| response(geom, model, p)).collect();
    basis(&cols).iter().map(|e| e.ad_mul(y).norm_squared()).sum()
}

/// Refines `(u, v, 1/r)` of every estimate to maximize the energy of `y`
/// (`N x T`) captured by the span of their steering vectors.
///
/// Each coordinate is searched by golden section within one grid cell of its
/// current value while the others stay fixed; a move is kept only if it
/// raises the objective, so the objective never decreases. Powers are carried
/// over unchanged.
pub fn refine_offgrid(estimates: &[Estimate], y: &DMatrix<C64>, geom: &ArrayGeometry, opts: &RefineOptions) -> RefineOutput {
    let mut params: Vec<[f64; 3]> = estimates.iter().map(|e| [e.u, e.v, e.inv_r()]).collect();
    let mut objective = vec![captured(geom, opts.model, &params, y)];
    if params.is_empty() {
        return RefineOutput { estimates: estimates.to_vec(), objective };
    }
    let steps = [opts.step_u, opts.step_v, opts.step_inv_r];
    let mut cols: Vec<DVector<C64>> = params.iter().map(|&p| response(geom, opts.model, p)).collect();

    for _ in 0..opts.max_cycles {
        for l in 0..params.len() {
            let others: Vec<DVector<C64>> =
                cols.iter().enumerate().filter(|&(j, _)| j != l).map(|(_, c)| c.clone()).collect();
            let q = basis(&others);
            let score = |p: [f64; 3]| {
                let a = project_out(&q, &response(geom, opts.model, p));
                let n = a.norm_squared();
                if n <= 1e-20 * geom.len() as f64 {
                    return 0.0;
                }
                a.ad_mul(y).norm_squared() / n
            };
            for (axis, &step) in steps.iter().enumerate() {
                if !(step > 0.0) {
                    continue;
                }
                let current = params[l];
                let (lo, hi) = bounds(current, axis, step);
                if !(hi > lo) {
                    continue;
                }
                let f = |x: f64| {
                    let mut p = current;
                    p[axis] = x;
                    score(p)
                };
                let base = f(current[axis]);
                let (x, fx) = golden_max(&f, lo, hi, step * 1e-7);
                if fx > base {
                    params[l][axis] = x;
                }
            }
            cols[l] = response(geom, opts.model, params[l]);
        }
        let obj = captured(geom, opts.model, &params, y);
        let prev = *objective.last().expect("non-empty");
        // Rounding in the full recomputation can undercut the previous value by
        // a few ulps; the accepted moves themselves never lower it.
        objective.push(obj.max(prev));
        if obj - prev < opts.tolerance * prev.abs() {
            break;
        }
    }
    let mut out: Vec<Estimate> = estimates
        .iter()
        .zip(&params)
        .map(|(e, p)| Estimate {
            u: p[0],
            v: p[1],
            r: if p[2] > 0.0 { 1.0 / p[2] } else { f64::INFINITY },
            power: e.power,
        })
        .collect();
    sort_by_power(&mut out);
    RefineOutput { estimates: out, objective }
}

/// Search interval for one coordinate, kept inside the unit disc for the
/// angles and non-negative for `1/r`.
fn bounds(p: [f64; 3], axis: usize, step: f64) -> (f64, f64) {
    let x = p[axis];
    match axis {
        0 | 1 => {
            let other = p[1 - axis];
            let lim = (1.0 - other * other).max(0.0).sqrt();
            ((x - step).max(-lim), (x + step).min(lim))
        }
        _ => ((x - step).max(0.0), x + step),
    }
}

pub(crate) fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a) > tol && iter < 80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    let ends = [(a, f(a)), (b, f(b)), (c, fc), (d, fd)];
    ends.into_iter().fold((c, f64::NEG_INFINITY), |best, e| if e.1 > best.1 { e } else { best })
}
