//! The scalar `(h, ρ)` dynamics of rank-one F1 and of the phase-retrieval
//! population loss, integrated with RK4 and compared with the observables
//! of a full-matrix PGD run.

use lmr::diagnostics::h_rho;
use lmr::init::{sample_ground_truth, sample_rank1_gaussian, stream_rng};
use lmr::losses::LossSpec;
use lmr::manifold::pgd_step;
use lmr::ode::{discrete_map, integrate, OdeSystem, ScalarState};

fn main() -> lmr::error::Result<()> {
    let (n, alpha) = (256, 0.05);
    let mut rng = stream_rng(3, 0);
    let x = sample_ground_truth(n, n, &[1.0], true, &mut rng)?;
    let z0 = sample_rank1_gaussian(n, 1.0, &mut rng)?;

    let cases = [
        ("rank-one F1", LossSpec::f1(x.clone()), OdeSystem::Rank1),
        ("phase retrieval", LossSpec::f2(x.clone(), 1.0)?, OdeSystem::PhaseRetrieval { theta: 1.0 }),
    ];
    for (name, loss, system) in cases {
        let (h0, rho0) = h_rho(&z0, &x)?;
        let flow = integrate(system, ScalarState::new(h0, rho0), 1e-3, 12.0)?;
        println!("{name}: h0 {h0:.3}, rho0 {rho0:.2e}, flow reaches rho 0.99 at t = {:.3}", flow.hitting_time(0.99).unwrap_or(f64::NAN));
        println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>10}", "t", "h pgd", "h flow", "rho pgd", "rho flow", "map dev");
        let mut z = z0.clone();
        let steps = (12.0 / alpha) as usize;
        for k in 0..=steps {
            let (h, rho) = h_rho(&z, &x)?;
            let grad = loss.gradient(&z)?;
            let next = pgd_step(&z, &grad, alpha, 1)?.point;
            if k % 40 == 0 {
                let t = k as f64 * alpha;
                let f = flow.states[((t / 1e-3).round() as usize).min(flow.states.len() - 1)];
                let (h1, rho1) = h_rho(&next, &x)?;
                let pred = discrete_map(system, &ScalarState::new(h, rho), alpha)?;
                let dev = (h1 - pred.h).abs().max((rho1 - pred.rho).abs());
                println!("{t:>6.2} {h:>9.5} {:>9.5} {rho:>9.5} {:>9.5} {dev:>10.2e}", f.h, f.rho);
            }
            z = next;
        }
        println!();
    }
    Ok(())
}
