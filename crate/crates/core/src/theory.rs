//! Finite-state checks of the Markov chain results the corrector relies on:
//! Metropolis–Hastings kernel construction, detailed balance, stationarity,
//! the total-variation bound on conditional distribution shift, and the
//! stationary bias of the acceptance rule without a proposal-ratio term.

use serde::{Deserialize, Serialize};

use crate::corrector::mh_acceptance;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

const PROB_TOL: f64 = 1e-12;
pub const POWER_TOL: f64 = 1e-14;
pub const POWER_MAX_ITER: usize = 1_000_000;

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {total}")));
    }
    Ok(())
}

fn check_stochastic(m: &[Vec<f64>], cols: usize, what: &str) -> Result<()> {
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: row.len(),
            });
        }
        check_distribution(row, &format!("{what} row {i}"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteChain {
    pub pi: Vec<f64>,
    /// Row-stochastic transition matrix, `p[i][j] = P(i -> j)`.
    pub p: Vec<Vec<f64>>,
}

impl DiscreteChain {
    pub fn new(pi: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self> {
        check_distribution(&pi, "pi")?;
        if p.len() != pi.len() {
            return Err(Error::DimensionMismatch {
                expected: pi.len(),
                actual: p.len(),
            });
        }
        check_stochastic(&p, pi.len(), "P")?;
        Ok(Self { pi, p })
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    /// Joint flow `F[i][j] = π_i P_ij`.
    pub fn flow_matrix(&self) -> Vec<Vec<f64>> {
        self.p
            .iter()
            .zip(&self.pi)
            .map(|(row, w)| row.iter().map(|v| w * v).collect())
            .collect()
    }

    /// Whether the flow matrix is symmetric within `tol`.
    pub fn is_reversible(&self, tol: f64) -> bool {
        check_detailed_balance(self) <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModel {
    /// `p_cond[x][y] = p(y | x)`.
    pub p_cond: Vec<Vec<f64>>,
    pub p_x: Vec<f64>,
    pub q_x: Vec<f64>,
}

impl ConditionalModel {
    pub fn new(p_cond: Vec<Vec<f64>>, p_x: Vec<f64>, q_x: Vec<f64>) -> Result<Self> {
        check_distribution(&p_x, "p_x")?;
        check_distribution(&q_x, "q_x")?;
        if p_cond.len() != p_x.len() || q_x.len() != p_x.len() {
            return Err(Error::DimensionMismatch {
                expected: p_x.len(),
                actual: p_cond.len().max(q_x.len()),
            });
        }
        let ny = p_cond.first().map_or(0, Vec::len);
        check_stochastic(&p_cond, ny, "p_cond")?;
        Ok(Self { p_cond, p_x, q_x })
    }

    pub fn nx(&self) -> usize {
        self.p_x.len()
    }

    pub fn ny(&self) -> usize {
        self.p_cond[0].len()
    }
}

fn check_square(q: &[Vec<f64>], n: usize) -> Result<()> {
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: q.len(),
        });
    }
    check_stochastic(q, n, "Q")
}

fn check_positive(pi: &[f64]) -> Result<()> {
    check_distribution(pi, "pi")?;
    if pi.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidDistribution("pi must be strictly positive".into()));
    }
    Ok(())
}

/// Fills the diagonal of `p` with the rejected mass of each row.
fn absorb_rejections(mut p: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for (i, row) in p.iter_mut().enumerate() {
        let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
        row[i] = (1.0 - off).max(0.0);
    }
    p
}

/// Standard Metropolis–Hastings kernel with acceptance
/// `min(1, π_j Q_ji / (π_i Q_ij))`.
pub fn build_mh_kernel(pi: &[f64], q: &[Vec<f64>]) -> Result<DiscreteChain> {
    check_positive(pi)?;
    let n = pi.len();
    check_square(q, n)?;
    let p = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j || q[i][j] == 0.0 {
                        0.0
                    } else {
                        let alpha = (pi[j] * q[j][i] / (pi[i] * q[i][j])).min(1.0);
                        q[i][j] * alpha
                    }
                })
                .collect()
        })
        .collect();
    Ok(DiscreteChain {
        pi: pi.to_vec(),
        p: absorb_rejections(p),
    })
}

/// Kernel of the corrector's acceptance rule `min(π_j / (π_i + ε), 1)`,
/// which ignores the proposal ratio.
pub fn build_modified_kernel(pi: &[f64], q: &[Vec<f64>], epsilon: f64) -> Result<DiscreteChain> {
    check_positive(pi)?;
    let n = pi.len();
    check_square(q, n)?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
    }
    let p = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { q[i][j] * mh_acceptance(pi[j], pi[i], epsilon) })
                .collect()
        })
        .collect();
    Ok(DiscreteChain {
        pi: pi.to_vec(),
        p: absorb_rejections(p),
    })
}

/// `max_{i,j} |π_i P_ij - π_j P_ji|`.
pub fn check_detailed_balance(c: &DiscreteChain) -> f64 {
    let f = c.flow_matrix();
    let mut worst = 0.0f64;
    for i in 0..c.n() {
        for j in (i + 1)..c.n() {
            worst = worst.max((f[i][j] - f[j][i]).abs());
        }
    }
    worst
}

fn step(dist: &[f64], p: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; dist.len()];
    for (w, row) in dist.iter().zip(p) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `||πP - π||₁`.
pub fn check_stationarity(c: &DiscreteChain) -> f64 {
    l1(&step(&c.pi, &c.p), &c.pi)
}

/// Stationary vector of `p` by power iteration on the lazy chain
/// `(I + P) / 2`, which shares its stationary law and is aperiodic.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    check_stochastic(p, n, "P")?;
    let mut dist = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITER {
        let moved = step(&dist, p);
        let next: Vec<f64> = dist.iter().zip(&moved).map(|(a, b)| 0.5 * (a + b)).collect();
        let change = l1(&next, &dist);
        dist = next;
        if change < POWER_TOL {
            let total: f64 = dist.iter().sum();
            return Ok(dist.into_iter().map(|v| v / total).collect());
        }
    }
    Err(Error::InvalidDistribution(format!(
        "power iteration did not converge in {POWER_MAX_ITER} iterations"
    )))
}

/// L1 distance between the stationary law of the modified-acceptance chain
/// and `pi_target`.
pub fn measure_modified_mh_bias(pi_target: &[f64], q: &[Vec<f64>], epsilon: f64) -> Result<f64> {
    let chain = build_modified_kernel(pi_target, q, epsilon)?;
    let stationary = stationary_distribution(&chain.p)?;
    Ok(l1(&stationary, pi_target))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftBound {
    pub tv: f64,
    pub bound: f64,
}

/// Total variation between output marginals under shifted and true
/// conditioning laws, with the lower bound given by the test function
/// `g_B(x) = p(B | x)`.
pub fn cgan_shift_bound(m: &ConditionalModel, subset: &[usize]) -> Result<ShiftBound> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let ny = m.ny();
    if let Some(&bad) = subset.iter().find(|&&y| y >= ny) {
        return Err(Error::InvalidDistribution(format!("output state {bad} out of range 0..{ny}")));
    }
    let marginal = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; ny];
        for (wx, row) in w.iter().zip(&m.p_cond) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += wx * v;
            }
        }
        out
    };
    let q_y = marginal(&m.q_x);
    let p_y = marginal(&m.p_x);
    let tv = 0.5 * l1(&q_y, &p_y);
    let mut in_b = vec![false; ny];
    subset.iter().for_each(|&y| in_b[y] = true);
    let g: Vec<f64> = m
        .p_cond
        .iter()
        .map(|row| row.iter().zip(&in_b).filter(|(_, b)| **b).map(|(v, _)| v).sum())
        .collect();
    let eq: f64 = g.iter().zip(&m.q_x).map(|(a, b)| a * b).sum();
    let ep: f64 = g.iter().zip(&m.p_x).map(|(a, b)| a * b).sum();
    Ok(ShiftBound {
        tv,
        bound: (eq - ep).abs(),
    })
}

/// Random strictly positive probability vector.
pub fn random_distribution(rng: &mut RandomStream, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Random row-stochastic matrix with rows drawn like [`random_distribution`].
pub fn random_stochastic(rng: &mut RandomStream, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| random_distribution(rng, cols)).collect()
}

/// Random symmetric row-stochastic matrix: a symmetric weight matrix scaled
/// by its largest row sum, with the remainder on the diagonal.
pub fn random_symmetric_proposal(rng: &mut RandomStream, n: usize) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.uniform();
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    let max_row = w.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max).max(1.0);
    w.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v /= max_row));
    absorb_rejections(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Modified-rule bias for asymmetric proposals, reported only.
    pub asymmetric_bias: Vec<f64>,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, value: f64, threshold: f64, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        value,
        threshold,
        detail,
    }
}

/// Randomized and worked-example checks used by the `verify-theory` command.
pub fn run_checks(seed: u64) -> Result<TheoryReport> {
    let mut rng = RandomStream::new(seed);
    let mut checks = Vec::new();

    let mut worst_db = 0.0f64;
    let mut worst_stat = 0.0f64;
    for _ in 0..100 {
        let n = 2 + rng.index(19);
        let pi = random_distribution(&mut rng, n);
        let q = random_symmetric_proposal(&mut rng, n);
        let chain = build_mh_kernel(&pi, &q)?;
        worst_db = worst_db.max(check_detailed_balance(&chain));
        worst_stat = worst_stat.max(check_stationarity(&chain));
    }
    checks.push(check(
        "detailed_balance",
        worst_db,
        1e-12,
        worst_db <= 1e-12,
        "max violation over 100 random MH kernels, n <= 20".into(),
    ));
    checks.push(check(
        "stationarity",
        worst_stat,
        1e-10,
        worst_stat <= 1e-10,
        "max ||piP - pi||_1 over the same kernels".into(),
    ));

    let third = 1.0 / 3.0;
    let cycle = DiscreteChain::new(
        vec![third; 3],
        vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
    )?;
    let cyc_db = check_detailed_balance(&cycle);
    let cyc_stat = check_stationarity(&cycle);
    checks.push(check(
        "three_cycle",
        cyc_stat,
        1e-12,
        cyc_stat <= 1e-12 && (cyc_db - third).abs() < 1e-12,
        format!("stationary without detailed balance, violation {cyc_db}"),
    ));

    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let nx = 2 + rng.index(5);
        let ny = 2 + rng.index(5);
        let m = ConditionalModel::new(
            random_stochastic(&mut rng, nx, ny),
            random_distribution(&mut rng, nx),
            random_distribution(&mut rng, nx),
        )?;
        let mut subset: Vec<usize> = (0..ny).filter(|_| rng.uniform() < 0.5).collect();
        if subset.is_empty() {
            subset.push(rng.index(ny));
        }
        let b = cgan_shift_bound(&m, &subset)?;
        worst_gap = worst_gap.max(b.bound - b.tv);
    }
    checks.push(check(
        "tv_bound",
        worst_gap,
        1e-12,
        worst_gap <= 1e-12,
        "max (bound - tv) over 1000 random conditional models".into(),
    ));

    let worked = ConditionalModel::new(
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        vec![0.5, 0.5],
        vec![0.9, 0.1],
    )?;
    let wb = cgan_shift_bound(&worked, &[1])?;
    let worked_err = (wb.tv - 0.24).abs().max((wb.bound - 0.24).abs());
    checks.push(check(
        "tv_bound_worked_case",
        worked_err,
        1e-12,
        worked_err <= 1e-12,
        format!("tv {} bound {}", wb.tv, wb.bound),
    ));

    let mut worst_sym = 0.0f64;
    for _ in 0..20 {
        let n = 2 + rng.index(7);
        let pi = random_distribution(&mut rng, n);
        let q = random_symmetric_proposal(&mut rng, n);
        worst_sym = worst_sym.max(measure_modified_mh_bias(&pi, &q, 0.0)?);
    }
    checks.push(check(
        "modified_rule_symmetric_bias",
        worst_sym,
        1e-9,
        worst_sym <= 1e-9,
        "stationary L1 distance with symmetric proposals and epsilon 0".into(),
    ));

    let mut asymmetric_bias = Vec::new();
    for _ in 0..5 {
        let n = 3 + rng.index(5);
        let pi = random_distribution(&mut rng, n);
        let q = random_stochastic(&mut rng, n, n);
        asymmetric_bias.push(measure_modified_mh_bias(&pi, &q, 1e-8)?);
    }

    Ok(TheoryReport {
        seed,
        checks,
        asymmetric_bias,
    })
}
