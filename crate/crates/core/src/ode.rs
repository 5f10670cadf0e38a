//! Classical fourth-order Runge–Kutta steps.

/// One RK4 step of `ẋ = f(t, x)` from `(t, x)` with step `dt`.
pub fn rk4_step<F, E>(f: &mut F, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let n = x.len();
    let k1 = f(t, x)?;
    let mut tmp = vec![0.0; n];
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    let k2 = f(t + 0.5 * dt, &tmp)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    let k3 = f(t + 0.5 * dt, &tmp)?;
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    let k4 = f(t + dt, &tmp)?;
    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Scalar RK4 step of `ẋ = f(x)`.
pub fn rk4_step_scalar<F, E>(f: &mut F, x: f64, dt: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let k1 = f(x)?;
    let k2 = f(x + 0.5 * dt * k1)?;
    let k3 = f(x + 0.5 * dt * k2)?;
    let k4 = f(x + dt * k3)?;
    Ok(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Uniform grid `0, dt, 2dt, …` ending exactly at `t_end`; the last step may be short.
pub fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    times.push(t_end);
    times
}
