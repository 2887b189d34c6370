//! Scalar population dynamics in `(h, ρ)` and the factored form of a
//! matrix gradient flow.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{FactoredPoint, MatrixAction, RANK_TOL_REL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarState {
    pub t: f64,
    pub h: f64,
    pub rho: f64,
}

impl ScalarState {
    pub fn new(h: f64, rho: f64) -> Self {
        Self { t: 0.0, h, rho }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum OdeSystem {
    /// `h' = −h + ρ`, `ρ' = 2ρ(1 − ρ)/h`.
    Rank1,
    /// `h' = θ − (2 + θ)h + 2ρ`, `ρ' = 4ρ(1 − ρ)/h`.
    PhaseRetrieval { theta: f64 },
}

impl OdeSystem {
    pub fn validate(&self) -> Result<()> {
        if let OdeSystem::PhaseRetrieval { theta } = *self {
            if !(theta > 0.0) || !theta.is_finite() {
                return Err(Error::param("theta", format!("must be positive, got {theta}")));
            }
        }
        Ok(())
    }
}

/// `(dh/dt, dρ/dt)`.
pub fn ode_rhs(system: OdeSystem, state: &ScalarState) -> Result<(f64, f64)> {
    let ScalarState { t, h, rho } = *state;
    if !(h > 0.0) {
        return Err(Error::NonPositiveH { t, h, rho });
    }
    Ok(match system {
        OdeSystem::Rank1 => (-h + rho, 2.0 * rho * (1.0 - rho) / h),
        OdeSystem::PhaseRetrieval { theta } => {
            (theta - (2.0 + theta) * h + 2.0 * rho, 4.0 * rho * (1.0 - rho) / h)
        }
    })
}

/// Output of [`integrate`].
#[derive(Clone, Debug)]
pub struct OdeTrajectory {
    pub states: Vec<ScalarState>,
    /// Number of steps after which ρ had to be clipped back into `[0, 1]`.
    pub clip_events: usize,
}

impl OdeTrajectory {
    /// First time with `ρ ≥ level`, linearly interpolated between steps.
    pub fn hitting_time(&self, level: f64) -> Option<f64> {
        let first = self.states.first()?;
        if first.rho >= level {
            return Some(first.t);
        }
        self.states.windows(2).find_map(|w| {
            (w[1].rho >= level).then(|| {
                let frac = (level - w[0].rho) / (w[1].rho - w[0].rho);
                w[0].t + frac * (w[1].t - w[0].t)
            })
        })
    }

    pub fn last(&self) -> &ScalarState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn shifted(s: &ScalarState, k: (f64, f64), c: f64, dt: f64) -> ScalarState {
    ScalarState {
        t: s.t + c * dt,
        h: s.h + c * dt * k.0,
        rho: s.rho + c * dt * k.1,
    }
}

/// Fixed-step RK4 from `state0` up to `t_max`; ρ is clipped to `[0, 1]`
/// after each step.
pub fn integrate(system: OdeSystem, state0: ScalarState, dt: f64, t_max: f64) -> Result<OdeTrajectory> {
    system.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::param("t_max", format!("must be nonnegative, got {t_max}")));
    }
    let steps = (t_max / dt).round() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut clip_events = 0;
    let mut s = state0;
    states.push(s);
    for i in 0..steps {
        let step = || -> Result<ScalarState> {
            let k1 = ode_rhs(system, &s)?;
            let k2 = ode_rhs(system, &shifted(&s, k1, 0.5, dt))?;
            let k3 = ode_rhs(system, &shifted(&s, k2, 0.5, dt))?;
            let k4 = ode_rhs(system, &shifted(&s, k3, 1.0, dt))?;
            Ok(ScalarState {
                t: state0.t + (i + 1) as f64 * dt,
                h: s.h + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                rho: s.rho + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            })
        };
        let mut next = step().inspect_err(|_| {
            log::error!("integration stopped at t = {}, h = {}, rho = {}", s.t, s.h, s.rho);
        })?;
        if !(next.h > 0.0) {
            log::error!("h left the positive axis: {next:?}");
            return Err(Error::NonPositiveH {
                t: next.t,
                h: next.h,
                rho: next.rho,
            });
        }
        if next.rho > 1.0 || next.rho < 0.0 {
            log::debug!("clipping rho = {} at t = {}", next.rho, next.t);
            next.rho = next.rho.clamp(0.0, 1.0);
            clip_events += 1;
        }
        s = next;
        states.push(s);
    }
    if clip_events > 0 {
        log::info!("rho clipped {clip_events} times");
    }
    Ok(OdeTrajectory { states, clip_events })
}

/// One forward-Euler step of the system with step `alpha`.
pub fn discrete_map(system: OdeSystem, state: &ScalarState, alpha: f64) -> Result<ScalarState> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let (dh, drho) = ode_rhs(system, state)?;
    Ok(ScalarState {
        t: state.t + alpha,
        h: state.h + alpha * dh,
        rho: state.rho + alpha * drho,
    })
}

/// Factor derivatives of the flow `Z' = P_{T_Z}(M)` for `Z = U S V^T`:
/// `S' = U^T M V`, `U' = (I − UU^T) M V S^{-1}`, `V' = (I − VV^T) M^T U S^{-T}`.
pub fn factored_flow_derivative<W>(
    z: &FactoredPoint,
    m: &W,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>
where
    W: MatrixAction + ?Sized,
{
    if m.shape() != z.shape() {
        return Err(Error::dims(format!("{:?}", z.shape()), format!("{:?}", m.shape())));
    }
    let sv = z.singular_values();
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    if !(sigma_min > RANK_TOL_REL * sigma_max) {
        return Err(Error::SingularCore { sigma_min });
    }
    let s_inv = z
        .core()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularCore { sigma_min })?;
    let u = z.left();
    let v = z.right();
    let mv = m.apply(v);
    let mtu = m.apply_transpose(u);
    let ds = u.tr_mul(&mv);
    let du = (&mv - u * &ds) * &s_inv;
    let dv = (&mtu - v * ds.transpose()) * s_inv.transpose();
    Ok((du, ds, dv))
}

/// `U' S V^T + U S' V^T + U S V'^T`.
pub fn assemble_flow_derivative(
    z: &FactoredPoint,
    du: &DMatrix<f64>,
    ds: &DMatrix<f64>,
    dv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (u, s, v) = (z.left(), z.core(), z.right());
    du * s * v.transpose() + u * ds * v.transpose() + u * s * dv.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::tangent_project;

    #[test]
    fn rhs_examples() {
        assert_eq!(ode_rhs(OdeSystem::Rank1, &ScalarState::new(1.0, 1.0)).unwrap(), (0.0, 0.0));
        assert_eq!(ode_rhs(OdeSystem::Rank1, &ScalarState::new(1.0, 0.5)).unwrap(), (-0.5, 0.5));
        let theta = 1.0;
        let pr = OdeSystem::PhaseRetrieval { theta };
        let (dh, drho) = ode_rhs(pr, &ScalarState::new(theta / (2.0 + theta), 0.0)).unwrap();
        assert!(dh.abs() < 1e-15 && drho == 0.0);
        assert!(ode_rhs(OdeSystem::Rank1, &ScalarState::new(0.0, 0.5)).is_err());
    }

    #[test]
    fn fixed_point_is_constant() {
        let out = integrate(OdeSystem::Rank1, ScalarState::new(1.0, 1.0), 1e-2, 5.0).unwrap();
        assert_eq!(out.states.len(), 501);
        assert!(out.states.iter().all(|s| s.h == 1.0 && s.rho == 1.0));
        let next = discrete_map(OdeSystem::Rank1, &ScalarState::new(1.0, 1.0), 0.3).unwrap();
        assert_eq!((next.h, next.rho), (1.0, 1.0));
    }

    #[test]
    fn hitting_time_interpolates() {
        let traj = OdeTrajectory {
            states: vec![
                ScalarState { t: 0.0, h: 1.0, rho: 0.0 },
                ScalarState { t: 1.0, h: 1.0, rho: 0.5 },
            ],
            clip_events: 0,
        };
        assert_eq!(traj.hitting_time(0.25), Some(0.5));
        assert_eq!(traj.hitting_time(0.9), None);
    }

    #[test]
    fn collapse_of_h_is_an_error() {
        // the exact h never reaches zero; a huge dt drives an RK stage negative
        let out = integrate(OdeSystem::Rank1, ScalarState::new(1.0, 0.0), 3.0, 30.0);
        assert!(matches!(out, Err(Error::NonPositiveH { .. })));
    }

    #[test]
    fn flow_derivative_matches_projection() {
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let z = FactoredPoint::new(u.clone(), DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.0, 1.0]), u).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 1.0) + 0.2);
        let (du, ds, dv) = factored_flow_derivative(&z, &m).unwrap();
        let lhs = assemble_flow_derivative(&z, &du, &ds, &dv);
        let rhs = tangent_project(&z, &m).unwrap().dense();
        assert!((lhs - rhs).norm() < 1e-13);
        assert!(factored_flow_derivative(&FactoredPoint::zero(3, 3).scaled(1.0), &m).is_err());
    }
}
