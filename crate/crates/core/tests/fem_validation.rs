//! Physics validation of the full-order solver against closed-form oracles.

use nalgebra::{DVector, Vector3};
use softcrawl_core::fem::{
    static_solve, ContactConfig, ElasticModel, ElasticRegion, FemModel, FullOrderSim,
    FullOrderState, MaterialParams, PressureCommand, StaticMode, StaticProblem, KPA_TO_INTERNAL,
};
use softcrawl_core::geometry::{generate_bar_part, Region};

/// Cantilever tip deflection for one mesh refinement: a clamped slender bar
/// of `layers` elements through the thickness under a static tip load,
/// solved with linear elasticity.
fn cantilever_deflection(layers: usize, length: f64, thickness: f64) -> (f64, f64) {
    let pitch = thickness / layers as f64;
    let nx = (length / pitch).round() as usize;
    let part = generate_bar_part(nx, layers, layers, pitch, Region::Silicone);

    // Poisson 0 avoids the volumetric locking of linear tets, which the
    // Euler-Bernoulli oracle knows nothing about.
    let mat = MaterialParams {
        silicone: ElasticRegion { youngs_kpa: 1000.0, poisson: 0.0 },
        elastic_model: ElasticModel::Linear,
        ..Default::default()
    };
    let model = FemModel::from_part(&part, &mat).unwrap();

    let mut clamp = Vec::new();
    let mut tip = Vec::new();
    for (i, p) in part.mesh.nodes.iter().enumerate() {
        if p.x.abs() < 1e-9 {
            clamp.push(i as u32);
        }
        if (p.x - length).abs() < 1e-9 {
            tip.push(i as u32);
        }
    }

    // Keep the response in the small-deflection regime of the oracle.
    let total_load = 20.0 * KPA_TO_INTERNAL * thickness * thickness / 1000.0;
    let per_node = total_load / tip.len() as f64;
    let problem = StaticProblem {
        fixed_nodes: clamp,
        loads: tip.iter().map(|&n| (n, Vector3::new(0.0, 0.0, -per_node))).collect(),
        mode: StaticMode::Linear,
        ..Default::default()
    };
    let state = static_solve(&model, &problem).unwrap();

    let q0 = DVector::from_column_slice(&model.rest);
    let tip_dz: f64 = tip
        .iter()
        .map(|&n| (state.q[3 * n as usize + 2] - q0[3 * n as usize + 2]).abs())
        .sum::<f64>()
        / tip.len() as f64;

    let e = 1000.0 * KPA_TO_INTERNAL;
    let i_area = thickness * thickness * thickness * thickness / 12.0;
    let euler_bernoulli = total_load * length.powi(3) / (3.0 * e * i_area);
    (tip_dz, euler_bernoulli)
}

#[test]
fn cantilever_converges_to_euler_bernoulli() {
    let (length, thickness) = (32.0, 4.0);
    let mut errors = Vec::new();
    for layers in [2, 4, 8] {
        let (fem, eb) = cantilever_deflection(layers, length, thickness);
        let err = (fem - eb).abs() / eb;
        println!("layers {layers}: fem {fem:.4} vs EB {eb:.4} (error {:.2}%)", err * 100.0);
        errors.push(err);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "errors not monotone: {errors:?}");
    assert!(errors[2] < 0.10, "finest error {:.2}% exceeds 10%", errors[2] * 100.0);
}

#[test]
fn energy_is_nonincreasing_without_damping_or_actuation() {
    // Free vibration of a linear-elastic block with zero damping, zero
    // gravity, no contact: backward Euler must strictly dissipate.
    let part = generate_bar_part(4, 2, 2, 1.0, Region::Silicone);
    let mat = MaterialParams {
        elastic_model: ElasticModel::Linear,
        rayleigh_alpha: 0.0,
        rayleigh_beta: 0.0,
        gravity: Vector3::zeros(),
        ..Default::default()
    };
    let model = FemModel::from_part(&part, &mat).unwrap();
    let mut sim = FullOrderSim::new(model);
    sim.solver.cg_rel_tol = 1e-12;
    let mut state = FullOrderState::rest(&sim.model);
    // Pinch the block: squeeze x, bulge z.
    for n in 0..sim.model.num_nodes {
        let x = state.q[3 * n];
        state.q[3 * n] -= 0.05 * x;
        state.q[3 * n + 2] += 0.03 * x;
    }

    let energy = |s: &FullOrderState, sim: &FullOrderSim| -> f64 {
        let mut e = 0.0;
        for n in 0..sim.model.num_nodes {
            let m = sim.model.node_mass[n];
            let v = Vector3::new(s.v[3 * n], s.v[3 * n + 1], s.v[3 * n + 2]);
            e += 0.5 * m * v.norm_squared();
        }
        for elem in &sim.model.elements {
            let mut u = softcrawl_core::fem::element::ElemVec::zeros();
            for (a, &node) in elem.nodes.iter().enumerate() {
                for c in 0..3 {
                    u[3 * a + c] =
                        s.q[3 * node as usize + c] - sim.model.rest[3 * node as usize + c];
                }
            }
            e += 0.5 * (u.transpose() * elem.stiffness * u)[(0, 0)];
        }
        e
    };

    let no_floor = ContactConfig { floor_z: -1e12, ..Default::default() };
    let cmd = PressureCommand::zeros_regulators(3);
    let mut prev = energy(&state, &sim);
    let initial = prev;
    for _ in 0..200 {
        state = sim.step(&state, &cmd, &no_floor, 0.002).unwrap();
        let now = energy(&state, &sim);
        // Solver tolerance leaves noise at ~1e-12 of the initial energy.
        assert!(
            now <= prev * (1.0 + 1e-9) + 1e-10 * initial,
            "energy grew from {prev} to {now} at t={}",
            state.t
        );
        prev = now;
    }
    assert!(prev < initial, "no dissipation at all is implausible");
}

#[test]
fn dropped_block_settles_on_the_floor() {
    let part = generate_bar_part(4, 2, 2, 1.0, Region::Silicone);
    let mat =
        MaterialParams { elastic_model: ElasticModel::Linear, ..Default::default() };
    let model = FemModel::from_part(&part, &mat).unwrap();
    let total_mass: f64 = model.node_mass.iter().sum();
    let contact = ContactConfig::default();
    let mut sim = FullOrderSim::new(model);
    let mut state = FullOrderState::rest(&sim.model);
    for i in 0..sim.model.num_nodes {
        state.q[3 * i + 2] += 2.0;
    }
    let cmd = PressureCommand::zeros_regulators(3);
    for _ in 0..600 {
        state = sim.step(&state, &cmd, &contact, 0.002).unwrap();
    }
    assert!(state.v.amax() < 1.0, "block still moving at {} mm/s", state.v.amax());
    // Resting penetration carries the weight: depth ~ m g / (k_n * n_bottom).
    let depth: f64 = sim
        .model
        .contact_candidates
        .iter()
        .map(|&n| (contact.floor_z - state.q[3 * n as usize + 2]).max(0.0))
        .sum();
    let weight = total_mass * 9800.0;
    assert!(
        (contact.normal_stiffness * depth - weight).abs() < 0.05 * weight,
        "support {} vs weight {}",
        contact.normal_stiffness * depth,
        weight
    );
}
