//! Minimal adversarial perturbations: closed forms for hyperplanes and an
//! iterative linearize-and-project search for differentiable models.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, check_finite, invalid, Error, Result};
use crate::models::{Classifier, Differentiable, LinearModel, MulticlassLinearModel};
use crate::norm::{dot, Exponent};

/// A minimal perturbation `r*` and where it leads.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialResult {
    pub r_star: Vec<f64>,
    /// `‖r*‖_p`.
    pub norm: f64,
    pub p: Exponent,
    /// Class reached at (or across) the boundary.
    pub target_class: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest `r` in ℓp with `wᵀr = −value`, i.e. the step from a point where the
/// affine function equals `value` onto its zero set. Returns `(r, ‖r‖_p)`.
pub fn hyperplane_step(w: &[f64], value: f64, p: Exponent) -> Result<(Vec<f64>, f64)> {
    check_finite(w, "weights")?;
    if !value.is_finite() {
        return Err(Error::NonFinite("decision value"));
    }
    let m = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return Err(Error::ZeroWeight);
    }
    if value == 0.0 {
        return Err(Error::OnBoundary);
    }
    let q = p.conjugate();
    let dist = value.abs() / q.norm(w);
    let s = -value.signum();
    let mut r = vec![0.0; w.len()];
    match p {
        Exponent::Infinity => {
            let step = value.abs() / Exponent::ONE.norm(w);
            for (ri, wi) in r.iter_mut().zip(w) {
                if *wi != 0.0 {
                    *ri = s * wi.signum() * step;
                }
            }
        }
        Exponent::Finite(1.0) => {
            let mut best = 0;
            for (i, wi) in w.iter().enumerate() {
                if wi.abs() > w[best].abs() {
                    best = i;
                }
            }
            r[best] = s * w[best].signum() * value.abs() / w[best].abs();
        }
        Exponent::Finite(_) => {
            let qv = q.value();
            let total: f64 = w.iter().map(|wi| (wi.abs() / m).powf(qv)).sum();
            for (ri, wi) in r.iter_mut().zip(w) {
                if *wi != 0.0 {
                    let u = wi.abs() / m;
                    *ri = s * wi.signum() * u.powf(qv - 1.0) * value.abs() / (m * total);
                }
            }
        }
    }
    Ok((r, dist))
}

/// `r*_p(x)` for a binary hyperplane classifier.
pub fn linear_min_perturbation(model: &LinearModel, x: &[f64], p: Exponent) -> Result<AdversarialResult> {
    let f = model.decision(x)?;
    let (r_star, norm) = hyperplane_step(model.weights(), f, p)?;
    Ok(AdversarialResult {
        r_star,
        norm,
        p,
        target_class: if f > 0.0 { 0 } else { 1 },
        iterations: 1,
        converged: true,
    })
}

/// `r*_p(x)` for a one-vs-all hyperplane classifier: the closest pairwise
/// boundary between the predicted class and any other.
pub fn multiclass_linear_min_perturbation(
    model: &MulticlassLinearModel,
    x: &[f64],
    p: Exponent,
) -> Result<AdversarialResult> {
    let k = model.strict_label(x)?;
    let q = p.conjugate();
    let mut best: Option<(usize, f64, Vec<f64>, f64)> = None;
    for l in (0..model.num_classes()).filter(|&l| l != k) {
        let w = model.weight_difference(l, k);
        let value = model.pairwise_decision(x, l, k)?;
        let dist = value.abs() / q.norm(&w);
        if best.as_ref().is_none_or(|b| dist < b.1) {
            best = Some((l, dist, w, value));
        }
    }
    let (target_class, _, w, value) = best.ok_or(Error::Degenerate("single class"))?;
    let (r_star, norm) = hyperplane_step(&w, value, p)?;
    Ok(AdversarialResult {
        r_star,
        norm,
        p,
        target_class,
        iterations: 1,
        converged: true,
    })
}

/// Settings for [`iterative_min_perturbation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeConfig {
    pub max_iter: usize,
    /// Each linearized step is lengthened by `1 + overshoot`.
    pub overshoot: f64,
    /// Gradients with dual norm below this stop the search.
    pub tol: f64,
    /// After the label flips, rounds of re-projecting `x` onto the tangent
    /// plane of the boundary point found so far, kept while they shorten the
    /// perturbation.
    pub refine_rounds: usize,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        IterativeConfig {
            max_iter: 50,
            overshoot: 0.02,
            tol: 1e-12,
            refine_rounds: 20,
        }
    }
}

/// Repeatedly linearizes the pairwise score differences at the current point
/// and steps onto the nearest linearized boundary until the label changes.
/// The boundary point reached is then refined, and the result is
/// `1 + overshoot` times the distance to it.
pub fn iterative_min_perturbation<M: Differentiable + ?Sized>(
    model: &M,
    x: &[f64],
    p: Exponent,
    config: &IterativeConfig,
) -> Result<AdversarialResult> {
    check_dim(model.dim(), x.len())?;
    check_finite(x, "input")?;
    if !(config.overshoot >= 0.0) || !(config.tol >= 0.0) {
        return Err(invalid("config", "overshoot and tol must be non-negative"));
    }
    let scores = model.scores(x)?;
    let k = crate::models::argmax(&scores);
    if let Some(l) = (0..scores.len()).find(|&l| l != k && scores[l] == scores[k]) {
        return Err(if scores.len() == 2 {
            Error::OnBoundary
        } else {
            Error::ArgmaxTie(k.min(l), k.max(l))
        });
    }
    let q = p.conjugate();
    let mut current = x.to_vec();
    let mut previous = x.to_vec();
    let mut target_class = if k == 0 { 1 } else { 0 };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let scores = model.scores(&current)?;
        let now = crate::models::argmax(&scores);
        if now != k {
            target_class = now;
            converged = true;
            break;
        }
        let gk = model.score_gradient(&current, k)?;
        let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;
        for l in (0..scores.len()).filter(|&l| l != k) {
            let mut g = model.score_gradient(&current, l)?;
            g.iter_mut().zip(&gk).for_each(|(a, b)| *a -= b);
            let gn = q.norm(&g);
            if !(gn > config.tol) {
                continue;
            }
            let value = scores[l] - scores[k];
            let dist = value.abs() / gn;
            if best.as_ref().is_none_or(|b| dist < b.0) {
                best = Some((dist, g, value, l));
            }
        }
        let Some((_, g, value, l)) = best else { break };
        target_class = l;
        let value = if value == 0.0 { -f64::EPSILON * (1.0 + scores[k].abs()) } else { value };
        let (step, _) = hyperplane_step(&g, value, p)?;
        let factor = 1.0 + config.overshoot;
        previous.clone_from(&current);
        current.iter_mut().zip(&step).for_each(|(c, s)| *c += factor * s);
        iterations += 1;
    }
    if !converged {
        let now = model.label(&current)?;
        if now != k {
            target_class = now;
            converged = true;
        }
    }
    if converged && iterations > 0 {
        let mut boundary = crossing(model, k, &previous, &current)?;
        let mut best = p.norm(&difference(&boundary, x));
        for _ in 0..config.refine_rounds {
            let t = model.label(&boundary)?;
            let mut normal = model.score_gradient(&boundary, t)?;
            let gk = model.score_gradient(&boundary, k)?;
            normal.iter_mut().zip(&gk).for_each(|(a, b)| *a -= b);
            let scores = model.scores(&boundary)?;
            let value = scores[t] - scores[k] + dot(&normal, &difference(x, &boundary));
            if !(value < 0.0) || !(q.norm(&normal) > config.tol) {
                break;
            }
            let (step, length) = hyperplane_step(&normal, value, p)?;
            let reach = best / length;
            let mut scale = (1.0 + config.overshoot).min(reach);
            let mut probe = offset(x, &step, scale);
            while model.label(&probe)? == k && scale < reach {
                scale = (scale * 1.25).min(reach);
                probe = offset(x, &step, scale);
            }
            if model.label(&probe)? == k {
                break;
            }
            let candidate = crossing(model, k, x, &probe)?;
            let norm = p.norm(&difference(&candidate, x));
            if !(norm < best * (1.0 - 1e-12)) {
                break;
            }
            boundary = candidate;
            best = norm;
        }
        let stretched = offset(x, &difference(&boundary, x), 1.0 + config.overshoot);
        current = if model.label(&stretched)? != k { stretched } else { boundary };
        target_class = model.label(&current)?;
    }
    let r_star: Vec<f64> = current.iter().zip(x).map(|(c, o)| c - o).collect();
    let norm = p.norm(&r_star);
    Ok(AdversarialResult {
        r_star,
        norm,
        p,
        target_class,
        iterations,
        converged,
    })
}

/// First label change found by bisection on the segment `from → to`, given
/// that `from` carries `reference` and `to` does not. Returns the point on
/// the changed side.
fn crossing<M: Classifier + ?Sized>(model: &M, reference: usize, from: &[f64], to: &[f64]) -> Result<Vec<f64>> {
    let at = |t: f64| -> Vec<f64> { from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if model.label(&at(mid))? == reference {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if hi == 1.0 { to.to_vec() } else { at(hi) })
}

fn offset(x: &[f64], r: &[f64], scale: f64) -> Vec<f64> {
    x.iter().zip(r).map(|(a, b)| a + scale * b).collect()
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| u - v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    
    fn exps() -> [Exponent; 5] {
        [
            Exponent::ONE,
            Exponent::Finite(1.5),
            Exponent::TWO,
            Exponent::Finite(3.0),
            Exponent::Infinity,
        ]
    }

    #[test]
    fn worked_examples() {
        let m = LinearModel::new(vec![3.0, 4.0], 0.0).unwrap();
        let x = [1.0, 0.0];
        let r = linear_min_perturbation(&m, &x, Exponent::TWO).unwrap();
        assert!((r.norm - 0.6).abs() < 1e-12);
        let r = linear_min_perturbation(&m, &x, Exponent::Infinity).unwrap();
        assert!((r.norm - 3.0 / 7.0).abs() < 1e-12);
        let r = linear_min_perturbation(&m, &x, Exponent::ONE).unwrap();
        assert!((r.norm - 0.75).abs() < 1e-12);
        assert_eq!(r.r_star[0], 0.0);
        assert_eq!(r.target_class, 0);
    }

    #[test]
    fn lands_on_boundary_with_reported_norm() {
        let m = LinearModel::new(vec![0.3, -2.0, 0.0, 1e-3], 0.7).unwrap();
        let x = [1.0, 0.2, -4.0, 3.0];
        let f = m.decision(&x).unwrap();
        for p in exps() {
            let r = linear_min_perturbation(&m, &x, p).unwrap();
            let z: Vec<f64> = x.iter().zip(&r.r_star).map(|(a, b)| a + b).collect();
            assert!(m.decision(&z).unwrap().abs() <= 1e-9 * f.abs(), "{p}");
            assert!((p.norm(&r.r_star) - r.norm).abs() <= 1e-9 * r.norm, "{p}");
            assert!((dot(m.weights(), &r.r_star).abs() - p.conjugate().norm(m.weights()) * r.norm).abs() <= 1e-9 * f.abs());
        }
    }

    #[test]
    fn p_one_ties_pick_first_index() {
        let (r, _) = hyperplane_step(&[1.0, -2.0, 2.0], 1.0, Exponent::ONE).unwrap();
        assert_eq!(r, vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn errors() {
        let m = LinearModel::new(vec![1.0, 1.0], 0.0).unwrap();
        assert_eq!(linear_min_perturbation(&m, &[1.0, -1.0], Exponent::TWO), Err(Error::OnBoundary));
        assert_eq!(hyperplane_step(&[0.0, 0.0], 1.0, Exponent::TWO), Err(Error::ZeroWeight));
        let mc = MulticlassLinearModel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]], vec![0.0; 3]).unwrap();
        assert_eq!(multiclass_linear_min_perturbation(&mc, &[1.0, 1.0], Exponent::TWO), Err(Error::ArgmaxTie(0, 1)));
    }

    #[test]
    fn multiclass_example() {
        let s = 2.5;
        let rows = vec![vec![s, 0.0, 0.0], vec![0.0, s, 0.0], vec![0.0, 0.0, s]];
        let mc = MulticlassLinearModel::new(rows, vec![0.0; 3]).unwrap();
        let r = multiclass_linear_min_perturbation(&mc, &[1.0, 0.5, 0.0], Exponent::TWO).unwrap();
        assert_eq!(r.target_class, 1);
        assert!((r.norm - 0.5 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn iterative_on_linear_is_one_step() {
        let m = LinearModel::new(vec![3.0, 4.0], -1.0).unwrap();
        let x = [1.0, 1.0];
        for p in exps() {
            let exact = linear_min_perturbation(&m, &x, p).unwrap();
            let it = iterative_min_perturbation(&m, &x, p, &IterativeConfig::default()).unwrap();
            assert!(it.converged);
            assert_eq!(it.iterations, 1);
            assert!((it.norm - 1.02 * exact.norm).abs() < 1e-9 * exact.norm, "{p}");
            assert_eq!(it.target_class, 0);
        }
    }

    #[test]
    fn iterative_reports_exhaustion() {
        let m = LinearModel::new(vec![1.0], -1.0).unwrap();
        let cfg = IterativeConfig { max_iter: 0, ..Default::default() };
        let r = iterative_min_perturbation(&m, &[0.0], Exponent::TWO, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.norm, 0.0);
    }
}
