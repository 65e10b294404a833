use extremal_core::enhance::*;
use extremal_core::matrix::SymMatrix;
use extremal_core::nalgebra::DMatrix;
use extremal_core::solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> SymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    SymMatrix::from_dmatrix(&(&a * a.transpose() * (1.0 / n as f64) + DMatrix::identity(n, n) * ridge))
}

fn main() {
    let total: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed0: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let counts: Vec<(usize, f64, f64, f64)> = extremal_core::exec::map_indexed(total, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed0.wrapping_add(i as u64));
        rng.set_stream(0xD00D);
        let n = 1 + (rng.random::<u32>() % 5) as usize;
        // wider conditioning than the acceptance battery
        let ridge = 0.05 + 0.5 * rng.random::<f64>();
        let scale = 0.2 + 5.0 * rng.random::<f64>();
        let inst = ExtremalInstance::new(
            random_pd(&mut rng, n, ridge).scale(scale),
            random_pd(&mut rng, n, ridge),
            random_pd(&mut rng, n, 0.5 * ridge).scale(1.0 / scale),
            1.0 + 9.0 * rng.random::<f64>(),
        )
        .unwrap();
        match solve(&inst, &SolverConfig::default()) {
            Ok(rep) => {
                let res = kkt_residual(&rep.solution, &inst);
                let mut prop = 0.0;
                let mut valeq = 0.0;
                if rep.certified && inst.mu > 1.001 {
                    if let Ok(e) = enhance(&inst, &rep.solution) {
                        if let Ok(p) = check_proportionality(&e, 1e-7) {
                            prop = p.residual.max(p.entropy_identity_gap);
                        }
                        if let Ok(v) = check_value_equality(&e, 1e-8) {
                            valeq = v.residual_noise1.max(v.residual_noise2).max(v.objective_gap);
                        }
                    }
                }
                (if rep.certified { 0 } else { 1 }, res, prop, valeq)
            }
            Err(_) => (2, f64::INFINITY, 0.0, 0.0),
        }
    });
    let uncert = counts.iter().filter(|c| c.0 == 1).count();
    let errs = counts.iter().filter(|c| c.0 == 2).count();
    let max_res = counts.iter().filter(|c| c.0 == 0).map(|c| c.1).fold(0.0, f64::max);
    let max_prop = counts.iter().map(|c| c.2).fold(0.0, f64::max);
    let max_val = counts.iter().map(|c| c.3).fold(0.0, f64::max);
    println!("{total} instances: uncertified={uncert} errors={errs} max_residual={max_res:.3e} max_prop={max_prop:.3e} max_valeq={max_val:.3e}");
}
