//! Temporary probe: one full-size controller step with diagnostics.

use std::path::Path;

use turbine::mpc::{mpc_step, MpcState};

#[test]
#[ignore = "probe"]
fn one_full_size_step() {
    let setup = wtsim::load_setup(Path::new(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/scenarios/power_max_8ms.txt"),
    ))
    .unwrap();
    let sc = &setup.scenario;
    let mut state = MpcState::new(turbine::model::ControlInput {
        pitch_deg: sc.pitch0_deg,
        torque_nm: sc.torque0_nm,
    });
    let t0 = std::time::Instant::now();
    let r = mpc_step(
        &setup.params,
        &setup.mpc_cfg,
        &setup.pwa,
        &setup.bigm,
        &mut state,
        sc.omega0_radps,
        8.0,
        3.3e6,
    );
    match r {
        Ok((input, diag)) => println!(
            "input: pitch={:.4} torque={:.1}; solve_time={:.3}s gap={:.3e} nodes={} fallback={} eps={:.4} obj_kw={:.3} elapsed={:?}",
            input.pitch_deg,
            input.torque_nm,
            diag.solve_time_s,
            diag.mip_gap,
            diag.nodes,
            diag.fallback,
            diag.eps_omega_max,
            diag.objective_kw,
            t0.elapsed()
        ),
        Err(e) => println!("step error: {e}"),
    }
}
