use campus_abm::{engine, Scenario};

fn main() {
    let scenario = Scenario::baseline();
    let summary = engine::run_ensemble(&scenario, 200, 1).unwrap();
    println!(
        "baseline qs_mean={:.4} sd={:.4} ci=({:.4},{:.4})",
        summary.qs_mean, summary.qs_sd, summary.qs_ci.0, summary.qs_ci.1
    );
    let mut double_mu = Scenario::baseline();
    double_mu.model.context_betas[1] *= 2.0;
    let s2 = engine::run_ensemble(&double_mu, 200, 1).unwrap();
    println!("2x MU qs_mean={:.4}", s2.qs_mean);
    let mut no_mu = Scenario::baseline();
    no_mu.model.context_betas[1] = 0.0;
    let s0 = engine::run_ensemble(&no_mu, 200, 1).unwrap();
    println!("0x MU qs_mean={:.4}", s0.qs_mean);
}
