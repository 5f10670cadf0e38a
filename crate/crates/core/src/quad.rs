//! Adaptive Simpson quadrature.

/// Outcome of [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// False if some subinterval hit the recursion limit before meeting the tolerance.
    pub converged: bool,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Uses the classic recursive scheme with the Richardson correction
/// `S₂ + (S₂ − S₁)/15`. Errors from `f` abort the integration.
pub fn adaptive_simpson<F, E>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<Quadrature, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut st = State { evaluations: 3, converged: true };
    let value = recurse(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut st)?;
    Ok(Quadrature {
        value,
        converged: st.converged,
        evaluations: st.evaluations,
    })
}

struct State {
    evaluations: usize,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn recurse<F, E>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    st: &mut State,
) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    st.evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || m <= a || m >= b {
        st.converged = false;
        return Ok(left + right + delta / 15.0);
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, st)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, st)?;
    Ok(l + r)
}
