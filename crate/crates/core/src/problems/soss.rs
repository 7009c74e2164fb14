//! Scalar second-order semi-smoothness checks.
//!
//! A function `T` is second order semi-smooth at `x*` with respect to `T″`
//! when `T(x*+ξ) − T(x*) − T′(x*)ξ − ½T″(x*+ξ)ξ² = o(ξ²)`; note that the
//! second derivative is taken at the perturbed point.

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

pub struct ScalarSossCase {
    pub name: String,
    pub t: ScalarFn,
    pub t_prime: ScalarFn,
    /// The chosen (generalized) second derivative.
    pub t_second: ScalarFn,
    pub x_star: f64,
}

impl std::fmt::Debug for ScalarSossCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarSossCase").field("name", &self.name).field("x_star", &self.x_star).finish()
    }
}

/// A `C²` inner function for the chain rule check.
pub struct SmoothScalar {
    pub s: ScalarFn,
    pub s_prime: ScalarFn,
    pub s_second: ScalarFn,
}

impl SmoothScalar {
    pub fn identity() -> Self {
        Self { s: Box::new(|x| x), s_prime: Box::new(|_| 1.0), s_second: Box::new(|_| 0.0) }
    }

    pub fn sin() -> Self {
        Self { s: Box::new(f64::sin), s_prime: Box::new(f64::cos), s_second: Box::new(|x| -x.sin()) }
    }
}

pub const SOSS_CASES: [&str; 4] = ["max_sq", "x3sin", "chain_sin", "exp_smooth"];

fn max_sq() -> ScalarSossCase {
    ScalarSossCase {
        name: "max_sq".into(),
        t: Box::new(|x| x.max(0.0).powi(2)),
        t_prime: Box::new(|x| 2.0 * x.max(0.0)),
        // factor 2: the exact second derivative of x² on x ≥ 0
        t_second: Box::new(|x| if x >= 0.0 { 2.0 } else { 0.0 }),
        x_star: 0.0,
    }
}

fn x3sin() -> ScalarSossCase {
    ScalarSossCase {
        name: "x3sin".into(),
        t: Box::new(|x| if x == 0.0 { 0.0 } else { x.powi(3) * (1.0 / x).sin() }),
        t_prime: Box::new(|x| {
            if x == 0.0 {
                0.0
            } else {
                3.0 * x * x * (1.0 / x).sin() - x * (1.0 / x).cos()
            }
        }),
        t_second: Box::new(|_| 0.0),
        x_star: 0.0,
    }
}

/// `eˣ − 1 − x`: the exponential minus its affine Taylor part. Remainders
/// are those of `exp` itself, without cancellation against `e⁰ = 1`.
fn exp_smooth() -> ScalarSossCase {
    fn exp_tail(x: f64) -> f64 {
        if x.abs() >= 0.5 {
            return x.exp_m1() - x;
        }
        let (mut term, mut sum) = (x * x / 2.0, 0.0);
        for k in 3..40 {
            sum += term;
            term *= x / k as f64;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }
    ScalarSossCase {
        name: "exp_smooth".into(),
        t: Box::new(exp_tail),
        t_prime: Box::new(f64::exp_m1),
        t_second: Box::new(f64::exp),
        x_star: 0.0,
    }
}

/// `T ∘ S` with `(T∘S)″(x) = T″(S(x))S′(x)² + T′(S(x))S″(x)`.
pub fn compose(outer: ScalarSossCase, inner: SmoothScalar) -> ScalarSossCase {
    let outer = std::sync::Arc::new(outer);
    let inner = std::sync::Arc::new(inner);
    let (o1, i1) = (outer.clone(), inner.clone());
    let (o2, i2) = (outer.clone(), inner.clone());
    let (o3, i3) = (outer.clone(), inner.clone());
    ScalarSossCase {
        name: format!("{}∘S", outer.name),
        t: Box::new(move |x| (o1.t)((i1.s)(x))),
        t_prime: Box::new(move |x| (o2.t_prime)((i2.s)(x)) * (i2.s_prime)(x)),
        t_second: Box::new(move |x| {
            let s = (i3.s)(x);
            let s1 = (i3.s_prime)(x);
            (o3.t_second)(s) * s1 * s1 + (o3.t_prime)(s) * (i3.s_second)(x)
        }),
        x_star: outer.x_star,
    }
}

/// Registry lookup for the named cases.
pub fn soss_case(name: &str) -> Option<ScalarSossCase> {
    match name {
        "max_sq" => Some(max_sq()),
        "x3sin" => Some(x3sin()),
        "exp_smooth" => Some(exp_smooth()),
        "chain_sin" => Some(compose(max_sq(), SmoothScalar::sin())),
        _ => None,
    }
}

/// `|T(x*+ξ) − T(x*) − T′(x*)ξ − ½T″(x*+ξ)ξ²|`
pub fn soss_remainder(case: &ScalarSossCase, xi: f64) -> f64 {
    let x = case.x_star;
    ((case.t)(x + xi) - (case.t)(x) - (case.t_prime)(x) * xi - 0.5 * (case.t_second)(x + xi) * xi * xi).abs()
}

/// `|T′(x*) − T′(x*+ξ) + T″(x*+ξ)ξ|`
pub fn semismooth_remainder(case: &ScalarSossCase, xi: f64) -> f64 {
    let x = case.x_star;
    ((case.t_prime)(x) - (case.t_prime)(x + xi) + (case.t_second)(x + xi) * xi).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SossRow {
    pub j: u32,
    pub xi: f64,
    /// remainder / ξ²
    pub second_order_ratio: f64,
    /// semi-smooth remainder / |ξ|
    pub semismooth_ratio: f64,
}

/// Ratios over `ξ = 2^(−j)`, `j = 1..=max_j`.
pub fn soss_table(case: &ScalarSossCase, max_j: u32) -> Vec<SossRow> {
    (1..=max_j)
        .map(|j| {
            let xi = 2f64.powi(-(j as i32));
            SossRow {
                j,
                xi,
                second_order_ratio: soss_remainder(case, xi) / (xi * xi),
                semismooth_ratio: semismooth_remainder(case, xi) / xi.abs(),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub rows: Vec<SossRow>,
    pub initial_ratio: f64,
    /// Largest second-order ratio over `j ≥ 20`.
    pub tail_ratio: f64,
    /// Whether the tail ratio fell below `10⁻³` of the initial one.
    pub passes: bool,
}

/// Verifies numerically that `T ∘ S` is second order semi-smooth with the
/// chain-rule second derivative.
pub fn soss_chain_check(outer: ScalarSossCase, inner: SmoothScalar) -> ChainReport {
    let composed = compose(outer, inner);
    let rows = soss_table(&composed, 40);
    let initial_ratio = rows[0].second_order_ratio;
    let tail_ratio = rows[19..].iter().map(|r| r.second_order_ratio).fold(0.0, f64::max);
    let passes = tail_ratio <= 1e-3 * initial_ratio || tail_ratio == 0.0;
    ChainReport { rows, initial_ratio, tail_ratio, passes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_sq_cancels_exactly() {
        let case = max_sq();
        for j in 1..=40 {
            let xi = 2f64.powi(-j);
            for s in [xi, -xi] {
                assert_eq!(soss_remainder(&case, s), 0.0);
                assert_eq!(semismooth_remainder(&case, s), 0.0);
            }
        }
    }

    #[test]
    fn x3sin_separates_the_two_notions() {
        let case = x3sin();
        for row in soss_table(&case, 40) {
            assert!(row.second_order_ratio <= row.xi);
        }
        // ξ_m = 1/(2πm): |3ξ sin(1/ξ) − cos(1/ξ)| = 1 up to rounding in sin(2πm)
        for m in [10.0, 1e3, 1e5] {
            let xi = 1.0 / (2.0 * std::f64::consts::PI * m);
            let r = semismooth_remainder(&case, xi) / xi;
            assert!((r - 1.0).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn exp_ratios_vanish() {
        let rows = soss_table(&exp_smooth(), 40);
        // remainder/ξ² ≈ ξ/3, semi-smooth remainder/ξ ≈ ξ/2
        for r in &rows[10..] {
            assert!((r.second_order_ratio / r.xi - 1.0 / 3.0).abs() < 1e-3, "{r:?}");
            assert!((r.semismooth_ratio / r.xi - 0.5).abs() < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn chain_rule_with_identity_reduces_to_outer() {
        let composed = compose(max_sq(), SmoothScalar::identity());
        let plain = max_sq();
        for j in 1..=30 {
            let xi = 2f64.powi(-j);
            assert_eq!(soss_remainder(&composed, xi), soss_remainder(&plain, xi));
        }
    }

    #[test]
    fn chain_with_sin_decays() {
        let report = soss_chain_check(max_sq(), SmoothScalar::sin());
        assert!(report.passes);
        assert!(report.rows[19].second_order_ratio < 1e-4);
    }

    #[test]
    fn smooth_quadratic_chain_cancels() {
        let quad = ScalarSossCase {
            name: "sq".into(),
            t: Box::new(|x| x * x),
            t_prime: Box::new(|x| 2.0 * x),
            t_second: Box::new(|_| 2.0),
            x_star: 0.0,
        };
        let affine = SmoothScalar { s: Box::new(|x| 3.0 * x), s_prime: Box::new(|_| 3.0), s_second: Box::new(|_| 0.0) };
        let composed = compose(quad, affine);
        for j in 10..=30 {
            let xi = 2f64.powi(-j);
            assert!(soss_remainder(&composed, xi) <= 1e-15 * xi * xi * 9.0);
        }
    }

    #[test]
    fn unknown_case_is_none() {
        assert!(soss_case("nope").is_none());
        assert!(SOSS_CASES.iter().all(|c| soss_case(c).is_some()));
    }
}
