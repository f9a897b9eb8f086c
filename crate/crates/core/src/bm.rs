//! Pairwise Boltzmann machine baselines over binary variables.
//!
//! Two trainers share the parameterization: an exact-gradient quasi-Newton
//! fit (feasible while 2^n states can be enumerated) and persistent
//! contrastive divergence with Gibbs chains. Log-probabilities are
//! enumerated in Gray-code order so each state costs O(n) rather than
//! O(n^2), and model moments come from the fast transform of the enumerated
//! density rather than per-pair sums.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{bases_for, dual_transform_into, DualTable};
use crate::cost::kl_divergence;
use crate::error::{Error, Result};
use crate::format;
use crate::lbfgs::{self, LbfgsConfig};
use crate::learner::FitStatus;
use crate::numeric::KahanSum;
use crate::space::{Dataset, DenseTable, TableKind, VariableSpec};

/// Largest variable count the exact paths will enumerate (2^25 states).
const MAX_BM_VARS: usize = 25;

fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Packed index of the unordered pair (i, j) with i < j.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn check_binary_spec(spec: &VariableSpec) -> Result<usize> {
    if spec.cards().iter().any(|&c| c != 2) {
        return Err(Error::Domain(
            "Boltzmann machines are defined over binary variables only".into(),
        ));
    }
    let n = spec.n();
    if n > MAX_BM_VARS {
        return Err(Error::Capacity(format!(
            "{n} variables need 2^{n} enumerated states; the cap is {MAX_BM_VARS}"
        )));
    }
    Ok(n)
}

/// A pairwise Boltzmann machine: log p(x) = sum_i b_i x_i
/// + sum_{i<j} w_ij x_i x_j - ln Z over x in {0,1}^n.
///
/// Parameters are stored flat — n biases followed by the packed
/// upper-triangular weights — so moment vectors and gradients line up
/// index-for-index.
#[derive(Debug, Clone, PartialEq)]
pub struct BmParams {
    n: usize,
    values: Vec<f64>,
}

impl BmParams {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("a Boltzmann machine needs at least one variable".into()));
        }
        if n > MAX_BM_VARS {
            return Err(Error::Capacity(format!(
                "{n} variables need 2^{n} enumerated states; the cap is {MAX_BM_VARS}"
            )));
        }
        Ok(Self {
            n,
            values: vec![0.0; n + pair_count(n)],
        })
    }

    fn from_values(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n + pair_count(n));
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn variable_spec(&self) -> VariableSpec {
        VariableSpec::binary(self.n).expect("count validated at construction")
    }

    pub fn bias(&self, i: usize) -> f64 {
        assert!(i < self.n);
        self.values[i]
    }

    pub fn set_bias(&mut self, i: usize, value: f64) {
        assert!(i < self.n);
        self.values[i] = value;
    }

    /// Weight of the unordered pair {i, j}, i != j.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        assert!(i != j && i < self.n && j < self.n);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.values[self.n + pair_index(self.n, lo, hi)]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j && i < self.n && j < self.n);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.values[self.n + pair_index(self.n, lo, hi)] = value;
    }

    /// Exact normalized distribution over all 2^n states.
    pub fn density(&self) -> Result<DenseTable> {
        let spec = self.variable_spec();
        let mut values = vec![0.0f64; spec.size()];
        fill_log_table(self.n, &self.values, &mut values);
        normalize_in_place(&mut values)?;
        Ok(DenseTable::distribution_unchecked(spec, values))
    }

    /// ln Z at the current parameters.
    pub fn log_partition(&self) -> Result<f64> {
        let mut values = vec![0.0f64; 1usize << self.n];
        fill_log_table(self.n, &self.values, &mut values);
        let mut probe = values.clone();
        normalize_in_place(&mut probe)
    }

    /// Write as `# n:` header plus `i,j,value` records, where j = n marks
    /// the bias of variable i. Floats carry 17 significant digits.
    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "# n: {}", self.n).unwrap();
        for i in 0..self.n {
            for j in i + 1..self.n {
                writeln!(out, "{i},{j},{}", format::float(self.weight(i, j))).unwrap();
            }
            writeln!(out, "{i},{},{}", self.n, format::float(self.bias(i))).unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Read the format produced by [`BmParams::write_file`]. Absent records
    /// default to zero; duplicate or out-of-range records are rejected.
    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let bad = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let n: usize = format::parse_header(first, "n")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, format!("expected '# n: <count>', got '{first}'")))?;
        let mut params = Self::zeros(n).map_err(|e| bad(1, e.to_string()))?;
        let mut seen = vec![false; params.values.len()];
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(idx + 1, format!("expected 'i,j,value', got '{line}'")));
            }
            let i: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| bad(idx + 1, format!("bad index '{}'", fields[0])))?;
            let j: usize = fields[1]
                .trim()
                .parse()
                .map_err(|_| bad(idx + 1, format!("bad index '{}'", fields[1])))?;
            let value: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| bad(idx + 1, format!("bad value '{}'", fields[2])))?;
            if !value.is_finite() {
                return Err(bad(idx + 1, format!("value {value} is not finite")));
            }
            if i >= n || j > n || i >= j {
                return Err(bad(idx + 1, format!("indices ({i},{j}) out of range for n={n}")));
            }
            let slot = if j == n { i } else { n + pair_index(n, i, j) };
            if seen[slot] {
                return Err(bad(idx + 1, format!("duplicate record for ({i},{j})")));
            }
            seen[slot] = true;
            params.values[slot] = value;
        }
        Ok(params)
    }
}

/// Fill `out[x] = log unnormalized p(x)` for all 2^n states by walking the
/// Gray code: successive states differ in one bit, so each step costs one
/// bias plus the weights against the other set bits.
fn fill_log_table(n: usize, values: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 1usize << n);
    out[0] = 0.0;
    let mut current = 0.0f64;
    for t in 1..out.len() {
        let b = t.trailing_zeros() as usize;
        let g = t ^ (t >> 1);
        let mut delta = values[b];
        let mut rest = g & !(1usize << b);
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            let (lo, hi) = if b < j { (b, j) } else { (j, b) };
            delta += values[n + pair_index(n, lo, hi)];
            rest &= rest - 1;
        }
        // The changed bit's new value decides the sign; the other set bits
        // are identical before and after the flip.
        if g & (1usize << b) != 0 {
            current += delta;
        } else {
            current -= delta;
        }
        out[g] = current;
    }
}

/// Exponentiate a log table in place (max-subtracted) and normalize;
/// returns ln Z.
fn normalize_in_place(values: &mut [f64]) -> Result<f64> {
    let max = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !max.is_finite() {
        return Err(Error::Numeric(format!("log-density peak is {max}")));
    }
    let mut sum = KahanSum::default();
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum.add(*v);
    }
    let total = sum.value();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numeric(format!("partition sum is {total}")));
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Ok(max + total.ln())
}

/// First and second moments (or any per-parameter vector laid out like
/// [`BmParams`]): n singleton entries followed by packed pair entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    n: usize,
    values: Vec<f64>,
}

impl Moments {
    /// Exact <x_i> and <x_i x_j> of a distribution over binary variables.
    ///
    /// Runs the fast transform once and reads the answers off the
    /// single-variable and pair coefficients: with the +-1 basis,
    /// <phi_i> = 1 - 2<x_i>, so <x_i> = (1 - dual_i)/2 and
    /// <x_i x_j> = (1 - dual_i - dual_j + dual_ij)/4.
    pub fn of_distribution(p: &DenseTable) -> Result<Self> {
        if p.kind() != TableKind::Distribution {
            return Err(Error::Domain("moments need a distribution table".into()));
        }
        check_binary_spec(p.spec())?;
        let bases = bases_for(p.spec());
        let mut dual = DualTable::zeros(p.spec().clone());
        dual_transform_into(p, &bases, &mut dual)?;
        Ok(Self::from_dual(&dual))
    }

    fn from_dual(dual: &DualTable) -> Self {
        let n = dual.spec().n();
        let d = dual.values();
        let mut values = Vec::with_capacity(n + pair_count(n));
        for i in 0..n {
            values.push((1.0 - d[1usize << i]) / 2.0);
        }
        for i in 0..n {
            let di = d[1usize << i];
            for j in i + 1..n {
                let dj = d[1usize << j];
                let dij = d[(1usize << i) | (1usize << j)];
                values.push((1.0 - di - dj + dij) / 4.0);
            }
        }
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first(&self, i: usize) -> f64 {
        assert!(i < self.n);
        self.values[i]
    }

    pub fn second(&self, i: usize, j: usize) -> f64 {
        assert!(i != j && i < self.n && j < self.n);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.values[self.n + pair_index(self.n, lo, hi)]
    }

    fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Exact gradient of KL(p_d || p_theta) in the flat parameter layout:
/// model moments minus data moments, entry for entry.
pub fn exact_kl_gradient(params: &BmParams, data_moments: &Moments) -> Result<Moments> {
    if data_moments.n != params.n {
        return Err(Error::Domain(format!(
            "moment vector is over {} variables, parameters over {}",
            data_moments.n, params.n
        )));
    }
    let model = Moments::of_distribution(&params.density()?)?;
    let values = model
        .values
        .iter()
        .zip(&data_moments.values)
        .map(|(m, d)| m - d)
        .collect();
    Ok(Moments {
        n: params.n,
        values,
    })
}

/// One point of a Boltzmann fit trace: cost is KL(p_d || p_theta).
#[derive(Debug, Clone, Copy)]
pub struct BmTracePoint {
    pub iter: usize,
    pub cost: f64,
    pub delta: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct BmFit {
    pub params: BmParams,
    pub trace: Vec<BmTracePoint>,
    pub status: FitStatus,
    /// KL(p_d || p_theta) at the returned parameters.
    pub final_cost: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DiConfig {
    /// Stop when the gradient max-norm falls below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for DiConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iters: 500,
        }
    }
}

/// Fit by direct minimization of KL(p_d || p_theta) with exact enumerated
/// gradients and a quasi-Newton line search.
pub fn fit_di(data: &Dataset, config: &DiConfig) -> Result<BmFit> {
    fit_di_distribution(&data.empirical_distribution(), config)
}

/// [`fit_di`] against an explicit target distribution.
pub fn fit_di_distribution(p_d: &DenseTable, config: &DiConfig) -> Result<BmFit> {
    let n = check_binary_spec(p_d.spec())?;
    if !(config.tolerance > 0.0 && config.tolerance.is_finite()) {
        return Err(Error::Domain(format!(
            "gradient tolerance must be positive, got {}",
            config.tolerance
        )));
    }
    let data_m = Moments::of_distribution(p_d)?;
    // Constant part of the objective, so that f is exactly the KL value.
    let mut neg_entropy = KahanSum::default();
    for &p in p_d.values() {
        if p > 0.0 {
            neg_entropy.add(p * p.ln());
        }
    }
    let neg_entropy = neg_entropy.value();

    let spec = p_d.spec().clone();
    let bases = bases_for(&spec);
    let mut density = DenseTable::uniform(spec.clone());
    let mut dual = DualTable::zeros(spec);

    let lbfgs_config = LbfgsConfig {
        grad_tol: config.tolerance,
        max_iters: config.max_iters,
        ..LbfgsConfig::default()
    };
    let start = Instant::now();
    let mut trace = Vec::new();
    let outcome = lbfgs::minimize(
        vec![0.0; n + pair_count(n)],
        &lbfgs_config,
        |x, grad| {
            fill_log_table(n, x, density.values_mut());
            let log_z = normalize_in_place(density.values_mut())?;
            dual_transform_into(&density, &bases, &mut dual)?;
            let model_m = Moments::from_dual(&dual);
            let mut dot = KahanSum::default();
            for (xv, dv) in x.iter().zip(data_m.as_slice()) {
                dot.add(xv * dv);
            }
            for (g, (m, d)) in grad
                .iter_mut()
                .zip(model_m.as_slice().iter().zip(data_m.as_slice()))
            {
                *g = m - d;
            }
            Ok(log_z - dot.value() + neg_entropy)
        },
        |iter, cost, delta| {
            trace.push(BmTracePoint {
                iter,
                cost,
                delta,
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
        },
    )?;
    Ok(BmFit {
        params: BmParams::from_values(n, outcome.x),
        trace,
        status: if outcome.converged {
            FitStatus::Converged
        } else {
            FitStatus::IterCapped
        },
        final_cost: outcome.f,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PcdConfig {
    pub learning_rate: f64,
    pub chains: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for PcdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            chains: 100,
            steps: 10_000,
            seed: 0,
        }
    }
}

/// One systematic-scan Gibbs sweep (sites 0..n-1 in order) over a packed
/// binary state.
fn gibbs_sweep(params: &BmParams, state: &mut u32, rng: &mut ChaCha8Rng) {
    let n = params.n;
    for i in 0..n {
        let mut field = params.values[i];
        let mut rest = *state & !(1u32 << i);
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            field += params.values[n + pair_index(n, lo, hi)];
            rest &= rest - 1;
        }
        let p_one = 1.0 / (1.0 + (-field).exp());
        if rng.gen::<f64>() < p_one {
            *state |= 1u32 << i;
        } else {
            *state &= !(1u32 << i);
        }
    }
}

/// Moment estimates from the current chain states only.
fn chain_moments(n: usize, states: &[u32]) -> Moments {
    let mut values = vec![0.0f64; n + pair_count(n)];
    for &state in states {
        let mut rest = state;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            values[i] += 1.0;
            let mut others = rest;
            while others != 0 {
                let j = others.trailing_zeros() as usize;
                others &= others - 1;
                values[n + pair_index(n, i, j)] += 1.0;
            }
        }
    }
    let scale = 1.0 / states.len() as f64;
    for v in values.iter_mut() {
        *v *= scale;
    }
    Moments { n, values }
}

/// Persistent contrastive divergence: `chains` Gibbs chains persist across
/// updates; each step sweeps every chain once and moves the parameters along
/// (data moments - chain moments) scaled by the learning rate.
pub fn fit_pcd(data: &Dataset, config: &PcdConfig) -> Result<BmFit> {
    let n = check_binary_spec(data.spec())?;
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Domain(format!(
            "learning rate must be finite and non-negative, got {}",
            config.learning_rate
        )));
    }
    if config.chains == 0 || config.steps == 0 {
        return Err(Error::Domain("chain and step counts must be positive".into()));
    }
    let p_d = data.empirical_distribution();
    let data_m = Moments::of_distribution(&p_d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mask = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut states: Vec<u32> = (0..config.chains).map(|_| rng.gen::<u32>() & mask).collect();
    let mut params = BmParams::zeros(n)?;

    let start = Instant::now();
    let mut trace = Vec::new();
    let trace_stride = (config.steps / 20).max(1);
    let mut last_cost = kl_divergence(&p_d, &params.density()?);
    trace.push(BmTracePoint {
        iter: 0,
        cost: last_cost,
        delta: 0.0,
        elapsed_ms: start.elapsed().as_millis() as u64,
    });
    for step in 1..=config.steps {
        for state in states.iter_mut() {
            gibbs_sweep(&params, state, &mut rng);
        }
        let model_m = chain_moments(n, &states);
        for (p, (d, m)) in params
            .values
            .iter_mut()
            .zip(data_m.as_slice().iter().zip(model_m.as_slice()))
        {
            *p += config.learning_rate * (d - m);
        }
        if step % trace_stride == 0 || step == config.steps {
            let cost = kl_divergence(&p_d, &params.density()?);
            trace.push(BmTracePoint {
                iter: step,
                cost,
                delta: cost - last_cost,
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
            last_cost = cost;
        }
    }
    Ok(BmFit {
        final_cost: last_cost,
        params,
        trace,
        // The stopping rule is the step budget itself, so completing it is
        // this trainer's normal termination.
        status: FitStatus::Converged,
    })
}
