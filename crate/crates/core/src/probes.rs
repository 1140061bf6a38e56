//! Seeded random trial functions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::grid::{GridFunction, Mesh};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent uniform values in `[-amplitude, amplitude]` at every node.
pub fn random_nodal<R: Rng + ?Sized>(mesh: Mesh, rng: &mut R, amplitude: f64) -> GridFunction {
    let values = (0..mesh.node_count())
        .map(|_| amplitude * rng.gen_range(-1.0..1.0))
        .collect();
    GridFunction::from_parts(mesh, values)
}

/// Random combination of the lowest `modes` sine modes per axis, with
/// coefficients decaying like `1/k`.
pub fn random_smooth<R: Rng + ?Sized>(mesh: Mesh, rng: &mut R, modes: usize) -> GridFunction {
    let modes = modes.max(1);
    let ky_max = if mesh.dim() == 1 { 1 } else { modes };
    let mut values = vec![0.0; mesh.node_count()];
    for kx in 1..=modes {
        for ky in 1..=ky_max {
            let c: f64 = rng.gen_range(-1.0..1.0) / (kx + ky - 1) as f64;
            let mode = GridFunction::sine_mode(mesh, &[kx, ky]);
            values.iter_mut().zip(mode.values()).for_each(|(v, m)| *v += c * m);
        }
    }
    GridFunction::from_parts(mesh, values)
}

/// Ground state plus seeded noise of the given amplitude.
pub fn perturbed_ground_state<R: Rng + ?Sized>(mesh: Mesh, rng: &mut R, amplitude: f64) -> GridFunction {
    let base = GridFunction::ground_state(mesh);
    let noise = random_nodal(mesh, rng, amplitude);
    let values = base.values().iter().zip(noise.values()).map(|(a, b)| a + b).collect();
    GridFunction::from_parts(mesh, values)
}
