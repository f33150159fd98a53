//! Two-dimensional nonlinear conjugate-gradient minimiser.
//!
//! Polak–Ribière+ directions with a restart to steepest descent whenever the
//! new direction is not a descent direction, and a line search that first
//! expands the trial step while the cost keeps dropping and otherwise
//! backtracks until the Armijo condition holds, then tries the minimiser of
//! the interpolating quadratic.

use crate::geom::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Gradient-norm tolerance relative to `1 + |f(x)|`.
    pub grad_tol: f64,
    /// Stop once an accepted step is shorter than this (pixels).
    pub step_tol: f64,
    pub ls_shrink: f64,
    pub ls_max: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-8,
            step_tol: 1e-6,
            ls_shrink: 0.5,
            ls_max: 40,
            armijo: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn is_valid(&self) -> bool {
        self.max_iters > 0
            && self.grad_tol > 0.0
            && self.step_tol > 0.0
            && self.ls_shrink > 0.0
            && self.ls_shrink < 1.0
            && self.ls_max > 0
            && self.armijo > 0.0
            && self.armijo < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub point: Point2,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

/// Minimises `f`, which returns the cost and its gradient at a point.
///
/// The returned cost never exceeds `f(x0)`.
pub fn minimize<F>(f: F, x0: Point2, cfg: &OptimizerConfig) -> Minimum
where
    F: Fn(Point2) -> (f64, Point2),
{
    let (mut fx, mut g) = f(x0);
    let mut x = x0;
    let mut d = -g;
    // Trial step length (in units of the direction vector) carried across
    // iterations.
    let mut alpha = 1.0 / g.norm().max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let termination = loop {
        if !(g.norm() >= cfg.grad_tol * (1.0 + fx.abs())) {
            break Termination::Gradient;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let mut slope = g.dot(d);
        if !(slope < 0.0) {
            d = -g;
            slope = -g.dot(g);
        }

        let Some((step, x_new, f_new, g_new)) = line_search(&f, x, fx, slope, d, alpha, cfg)
        else {
            if d != -g {
                // retry once along steepest descent before giving up
                d = -g;
                alpha = 1.0 / g.norm();
                iterations -= 1;
                continue;
            }
            break Termination::LineSearch;
        };

        let moved = (x_new - x).norm();
        // Polak–Ribière+ update.
        let beta = (g_new.dot(g_new - g) / g.dot(g)).max(0.0);
        let d_new = -g_new + d.scale(beta);
        // Next trial: same predicted decrease as this step.
        let denom = g_new.dot(d_new);
        alpha = if denom < 0.0 {
            (step * slope / denom).clamp(step * 1e-3, step * 1e3)
        } else {
            1.0 / g_new.norm().max(f64::MIN_POSITIVE)
        };
        x = x_new;
        fx = f_new;
        g = g_new;
        d = d_new;
        if moved < cfg.step_tol {
            break Termination::Step;
        }
    };
    Minimum {
        point: x,
        cost: fx,
        iterations,
        termination,
    }
}

/// Returns `(step, x, f(x), ∇f(x))` for an accepted step along `d`.
fn line_search<F>(
    f: &F,
    x: Point2,
    fx: f64,
    slope: f64,
    d: Point2,
    alpha0: f64,
    cfg: &OptimizerConfig,
) -> Option<(f64, Point2, f64, Point2)>
where
    F: Fn(Point2) -> (f64, Point2),
{
    let armijo_ok = |a: f64, fa: f64| fa.is_finite() && fa <= fx + cfg.armijo * a * slope;
    let mut a = alpha0;
    let (mut fa, mut ga) = f(x + d.scale(a));
    if armijo_ok(a, fa) {
        // Expand while the cost keeps falling.
        for _ in 0..cfg.ls_max {
            let a2 = a / cfg.ls_shrink;
            let (f2, g2) = f(x + d.scale(a2));
            if !(f2 < fa) || !armijo_ok(a2, f2) {
                break;
            }
            a = a2;
            fa = f2;
            ga = g2;
        }
    } else {
        let mut found = false;
        for _ in 0..cfg.ls_max {
            a *= cfg.ls_shrink;
            let (f2, g2) = f(x + d.scale(a));
            fa = f2;
            ga = g2;
            if armijo_ok(a, fa) {
                found = true;
                break;
            }
        }
        if !found {
            return None;
        }
    }
    if !(fa < fx) {
        return None;
    }
    // Minimiser of the quadratic through f(x), the slope and f(x + a·d).
    let curv = fa - fx - slope * a;
    if curv > 0.0 {
        let aq = -slope * a * a / (2.0 * curv);
        if aq.is_finite() && aq > 0.0 && aq != a {
            let (fq, gq) = f(x + d.scale(aq));
            if fq < fa {
                return Some((aq, x + d.scale(aq), fq, gq));
            }
        }
    }
    Some((a, x + d.scale(a), fa, ga))
}
