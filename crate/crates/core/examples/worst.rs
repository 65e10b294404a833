use extremal_core::matrix::SymMatrix;
use extremal_core::nalgebra::DMatrix;
use extremal_core::solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> SymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    SymMatrix::from_dmatrix(&(&a * a.transpose() * (1.0 / n as f64) + DMatrix::identity(n, n) * ridge))
}

fn inst_for(i: u64) -> ExtremalInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(1u64.wrapping_add(i));
    rng.set_stream(0xD00D);
    let n = 1 + (rng.random::<u32>() % 5) as usize;
    let ridge = 0.05 + 0.5 * rng.random::<f64>();
    let scale = 0.2 + 5.0 * rng.random::<f64>();
    ExtremalInstance::new(
        random_pd(&mut rng, n, ridge).scale(scale),
        random_pd(&mut rng, n, ridge),
        random_pd(&mut rng, n, 0.5 * ridge).scale(1.0 / scale),
        1.0 + 9.0 * rng.random::<f64>(),
    ).unwrap()
}

fn main() {
    let mut worst = (0u64, 0.0f64);
    for i in 0..2000u64 {
        let inst = inst_for(i);
        if let Ok(rep) = solve(&inst, &SolverConfig::default()) {
            let r = kkt_residual(&rep.solution, &inst);
            if r.is_finite() && r > worst.1 { worst = (i, r); }
        }
    }
    println!("worst idx {} res {:.3e}", worst.0, worst.1);
    let inst = inst_for(worst.0);
    println!("n={} mu={:.4}", inst.dim(), inst.mu);
    println!("s eigs {:?}", inst.s.eigenvalues());
    println!("kz1 eigs {:?}", inst.kz1.eigenvalues());
    println!("kz2 eigs {:?}", inst.kz2.eigenvalues());
    let rep = solve(&inst, &SolverConfig::default()).unwrap();
    let kx = &rep.solution.kx;
    let shalf = inst.s.sqrt_psd().unwrap().to_dmatrix();
    let sinv = SymMatrix::from_dmatrix(&shalf).inverse_pd().unwrap().to_dmatrix();
    let w = SymMatrix::from_dmatrix(&(&sinv * kx.to_dmatrix() * &sinv));
    println!("W eigs {:?}", w.eigenvalues());
    let g = gaussian_gradient(kx, &inst).unwrap();
    let (_, wq) = w.eigen();
    let gt = &shalf * g.to_dmatrix() * &shalf;
    println!("G~ blocks:\n{:.3e}", wq.transpose() * gt * wq);
    println!("residual parts: stat={:.3e} s1={:.3e} s2={:.3e}", rep.solution.stationarity_residual, rep.solution.slack1, rep.solution.slack2);
}
