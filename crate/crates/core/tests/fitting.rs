//! End-to-end fitting behavior through the public API: structure recovery,
//! data-size effects, and file-round-trip scoring.

use fsll_core::{
    fit, kl_divergence, model_cost, sample, BayesNetSpec, Dataset, FitConfig, IsingGridSpec,
    ModelState, ParentSchedule, RegularizerTable,
};

fn average_order(state: &ModelState) -> f64 {
    let spec = state.density().spec();
    let mut orders = 0usize;
    let mut count = 0usize;
    for y in state.theta().support() {
        let digits = spec.unpack(y).unwrap();
        orders += digits.iter().filter(|&&d| d != 0).count();
        count += 1;
    }
    assert!(count > 0, "expected a non-empty model");
    orders as f64 / count as f64
}

#[test]
fn pairwise_target_yields_a_low_order_model() {
    // The grid distribution has only pairwise interactions, so the order
    // penalty should keep the selected labels near order two.
    let grid = IsingGridSpec::new(3, 3, 0.5).unwrap();
    let truth = grid.true_distribution().unwrap();
    let data = sample(&truth, 20_000, 11).unwrap();
    let (state, trace) = fit(&data, &FitConfig::default()).unwrap();

    assert!(!trace.records.is_empty());
    let kl = kl_divergence(&truth, state.density());
    assert!(kl < 0.05, "kl(p*, fit) = {kl}");
    let order = average_order(&state);
    assert!(order <= 2.5, "average interaction order {order}");
}

#[test]
fn more_data_grows_the_basis_and_tightens_the_fit() {
    let net = BayesNetSpec::random(8, ParentSchedule::ThreeParent, 21).unwrap();
    let truth = net.true_distribution().unwrap();

    let small = sample(&truth, 500, 2).unwrap();
    let large = sample(&truth, 50_000, 2).unwrap();
    let (state_s, _) = fit(&small, &FitConfig::default()).unwrap();
    let (state_l, _) = fit(&large, &FitConfig::default()).unwrap();

    let kl_s = kl_divergence(&truth, state_s.density());
    let kl_l = kl_divergence(&truth, state_l.density());
    assert!(
        state_l.theta().len() > state_s.theta().len(),
        "basis counts: {} (N=500) vs {} (N=50000)",
        state_s.theta().len(),
        state_l.theta().len()
    );
    assert!(kl_l < kl_s, "kl: {kl_s} (N=500) vs {kl_l} (N=50000)");
}

#[test]
fn uniform_data_keeps_the_model_empty() {
    let spec = fsll_core::VariableSpec::new(vec![2, 2, 2]).unwrap();
    let uniform = fsll_core::DenseTable::uniform(spec);
    let data = sample(&uniform, 100_000, 17).unwrap();
    let (state, trace) = fit(&data, &FitConfig::default()).unwrap();
    assert!(state.theta().is_empty(), "support: {:?}", state.theta().len());
    assert!(trace.records.is_empty());
    assert_eq!(trace.final_cost(), trace.initial_cost);
}

#[test]
fn files_alone_reproduce_the_reported_cost() {
    // Write dataset + model + trace, reload everything in fresh objects, and
    // re-score: the trace's accumulated cost must be reproduced from files.
    let grid = IsingGridSpec::new(2, 3, 0.5).unwrap();
    let truth = grid.true_distribution().unwrap();
    let data = sample(&truth, 5_000, 3).unwrap();
    let (state, trace) = fit(&data, &FitConfig::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("grid.data.csv");
    let model_path = dir.path().join("grid.model.csv");
    let trace_path = dir.path().join("grid.trace.csv");
    data.write_csv(&data_path).unwrap();
    state.write_file(&model_path).unwrap();
    trace.write_csv(&trace_path).unwrap();

    let data_back = Dataset::read_csv(&data_path).unwrap();
    let state_back = ModelState::read_file(&model_path).unwrap();
    let r = RegularizerTable::new(data_back.spec(), data_back.n_rows() as u64).unwrap();
    let rescored = model_cost(&state_back, &data_back.empirical_distribution(), &r);
    assert!(
        (rescored - trace.final_cost()).abs() < 1e-10,
        "rescored {rescored} vs trace {}",
        trace.final_cost()
    );

    // The trace file carries the same final cost at full precision.
    let text = std::fs::read_to_string(&trace_path).unwrap();
    let last = text.lines().last().unwrap();
    let cost_field: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(cost_field.to_bits(), trace.final_cost().to_bits());
}
