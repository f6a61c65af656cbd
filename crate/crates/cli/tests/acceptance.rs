//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use tscorrect::corrector::{mh_acceptance, ACCEPT_STREAM};
use tscorrect::datasets::{simulate_lorenz, LorenzConfig};
use tscorrect::generators::{Context, Proposal};
use tscorrect::metrics::{
    acf, evaluate, kurtosis, skewness_error, MetricsConfig,
};
use tscorrect::theory::{
    build_mh_kernel, cgan_shift_bound, check_detailed_balance, check_stationarity,
    measure_modified_mh_bias, random_distribution, random_stochastic, random_symmetric_proposal,
    ConditionalModel, DiscreteChain,
};
use tscorrect::{
    correct_series, CorrectionConfig, Normalizer, ProposalSource, RandomStream, TimeSeries,
};
use tscorrect_cli::cmd_compare;
use tscorrect_cli::config::{DatasetSpec, Drift, RunConfig, SourceSpec};
use tscorrect_cli::pipeline::{median, prepare, run_seed};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (mut ok, mut detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed > budget {
            ok = false;
            detail.push_str(&format!("; over time budget {:.0?}", budget));
        }
        if !ok {
            self.failures += 1;
        }
        println!(
            "{} {name}: {detail} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn detailed_balance() -> Check {
    let mut rng = RandomStream::new(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = 2 + rng.index(19);
        let pi = random_distribution(&mut rng, n);
        let q = random_symmetric_proposal(&mut rng, n);
        let chain = build_mh_kernel(&pi, &q).map_err(|e| e.to_string())?;
        worst = worst.max(check_detailed_balance(&chain));
    }
    ensure(worst <= 1e-12, format!("max violation {worst:.2e} over 100 kernels (limit 1e-12)"))
}

fn stationarity() -> Check {
    let mut rng = RandomStream::new(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = 2 + rng.index(19);
        let chain = build_mh_kernel(
            &random_distribution(&mut rng, n),
            &random_symmetric_proposal(&mut rng, n),
        )
        .map_err(|e| e.to_string())?;
        if check_detailed_balance(&chain) <= 1e-12 {
            worst = worst.max(check_stationarity(&chain));
        }
    }
    let third = 1.0 / 3.0;
    let cycle = DiscreteChain::new(
        vec![third; 3],
        vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
    )
    .map_err(|e| e.to_string())?;
    let (cyc_db, cyc_st) = (check_detailed_balance(&cycle), check_stationarity(&cycle));
    ensure(
        worst <= 1e-10 && cyc_st <= 1e-12 && (cyc_db - third).abs() < 1e-12,
        format!(
            "balanced chains residual {worst:.2e} (limit 1e-10); 3-cycle residual {cyc_st:.1e}, violation {cyc_db:.6}"
        ),
    )
}

fn tv_bound() -> Check {
    let mut rng = RandomStream::new(11);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let nx = 2 + rng.index(6);
        let ny = 2 + rng.index(6);
        let m = ConditionalModel::new(
            random_stochastic(&mut rng, nx, ny),
            random_distribution(&mut rng, nx),
            random_distribution(&mut rng, nx),
        )
        .map_err(|e| e.to_string())?;
        let mut subset: Vec<usize> = (0..ny).filter(|_| rng.uniform() < 0.5).collect();
        if subset.is_empty() {
            subset.push(rng.index(ny));
        }
        let b = cgan_shift_bound(&m, &subset).map_err(|e| e.to_string())?;
        worst = worst.max(b.bound - b.tv);
    }
    let worked = ConditionalModel::new(
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        vec![0.5, 0.5],
        vec![0.9, 0.1],
    )
    .map_err(|e| e.to_string())?;
    let b = cgan_shift_bound(&worked, &[1]).map_err(|e| e.to_string())?;
    let exact = (b.tv - 0.24).abs() <= 1e-15 && (b.bound - 0.24).abs() <= 1e-15;
    ensure(
        worst <= 1e-12 && exact,
        format!(
            "max(bound - tv) {worst:.2e} over 1000 models; worked case tv {} bound {}",
            b.tv, b.bound
        ),
    )
}

fn acceptance_calibration() -> Check {
    let draws = 100_000;
    let cases = [(0.05, 0.5, 1e-8), (0.3, 0.6, 1e-8), (0.9, 1.0, 1e-3), (2.0, 1.0, 1e-8)];
    let mut details = Vec::new();
    let mut ok = true;
    for (i, &(pi_new, pi_cur, eps)) in cases.iter().enumerate() {
        let gamma = mh_acceptance(pi_new, pi_cur, eps);
        let mut rng = RandomStream::new(i as u64).derive(ACCEPT_STREAM);
        let hits = (0..draws).filter(|_| rng.uniform() <= gamma).count();
        let freq = hits as f64 / draws as f64;
        let sigma = (gamma * (1.0 - gamma) / draws as f64).sqrt();
        let within = (freq - gamma).abs() <= 3.0 * sigma + 1e-12;
        ok &= within;
        details.push(format!("γ={gamma:.4} freq={freq:.4}"));
    }
    ensure(ok, format!("{} (3σ binomial bounds, 1e5 draws)", details.join(", ")))
}

/// Returns the real successor of the most recent context row.
struct PerfectSource {
    next: HashMap<Vec<u64>, Vec<f64>>,
    dims: usize,
}

impl PerfectSource {
    fn new(s: &TimeSeries) -> Self {
        let bits = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        let next = (0..s.len() - 1).map(|t| (bits(s.row(t)), s.row(t + 1).to_vec())).collect();
        Self { next, dims: s.dims() }
    }
}

impl ProposalSource for PerfectSource {
    fn dims(&self) -> usize {
        self.dims
    }
    fn context_len(&self) -> usize {
        1
    }
    fn propose_parts(
        &mut self,
        c: Context<'_>,
        _rng: &mut RandomStream,
    ) -> tscorrect::Result<Proposal> {
        let key: Vec<u64> = c.last_row().iter().map(|v| v.to_bits()).collect();
        let mean = self
            .next
            .get(&key)
            .cloned()
            .ok_or_else(|| tscorrect::Error::Protocol("context row not in the real series".into()))?;
        Ok(Proposal { mean, innovation: None })
    }
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "perfect" })
    }
}

fn lorenz_z(steps: usize) -> Result<TimeSeries, String> {
    let cfg = LorenzConfig {
        steps,
        ..LorenzConfig::default()
    };
    let s = simulate_lorenz(&cfg, None).map_err(|e| e.to_string())?;
    Normalizer::fit(&s).and_then(|n| n.apply(&s)).map_err(|e| e.to_string())
}

fn identity_limit() -> Check {
    let s = lorenz_z(2000)?;
    let p = 16;
    let cfg = RunConfig::default();
    let prep = tscorrect_cli::pipeline::prepare_series(&cfg, s.clone()).map_err(|e| e.to_string())?;
    let mut source = PerfectSource::new(&s);
    let corr = CorrectionConfig {
        beta: 1.0,
        ..CorrectionConfig::default()
    };
    let run = correct_series(&prep.target, &prep.warm_start, &mut source, &prep.density, &corr)
        .map_err(|e| e.to_string())?;
    let same = run
        .corrected
        .values()
        .iter()
        .zip(&s.values()[p * 3..])
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(
        same && run.corrected.len() == s.len() - p,
        format!(
            "{} rows bit-identical: {same}; acceptance rate {:.3}, forced {}",
            run.corrected.len(),
            run.acceptance_rate,
            run.forced_accepts
        ),
    )
}

fn efficacy_config() -> RunConfig {
    RunConfig {
        source: SourceSpec::Biased {
            inner: Box::new(SourceSpec::Var { order: Some(1) }),
            drift: Drift::DiffStd(0.1),
            noise_scale: 1.5,
        },
        seeds: (0..20).collect(),
        ..RunConfig::default()
    }
}

fn efficacy() -> Check {
    let cfg = efficacy_config();
    let prep = prepare(&cfg).map_err(|e| e.to_string())?;
    let mut cols: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut acf_improved = 0;
    let mut acf_reduction = Vec::new();
    for &seed in &cfg.seeds {
        let out = run_seed(&cfg, &prep, seed).map_err(|e| e.to_string())?;
        let (r, c) = (&out.raw_eval.report, &out.corrected_eval.report);
        if c.acf_error < r.acf_error {
            acf_improved += 1;
        }
        acf_reduction.push((r.acf_error - c.acf_error) / r.acf_error);
        for (name, a, b) in [
            ("acf", r.acf_error, c.acf_error),
            ("skew", r.skew_error, c.skew_error),
            ("kurt", r.kurt_error, c.kurt_error),
            ("r2", r.r2, c.r2),
            ("ds", r.discriminative, c.discriminative),
        ] {
            let e = cols.entry(name).or_default();
            e.0.push(a);
            e.1.push(b);
        }
    }
    let n = cfg.seeds.len();
    let med = |name: &str| (median(&cols[name].0), median(&cols[name].1));
    let (acf_r, acf_c) = med("acf");
    let (skew_r, skew_c) = med("skew");
    let (kurt_r, kurt_c) = med("kurt");
    let (r2_r, r2_c) = med("r2");
    let (ds_r, ds_c) = med("ds");
    let reduction = median(&acf_reduction);
    let ok = acf_improved * 10 >= n * 9
        && reduction >= 0.2
        && skew_c < skew_r
        && kurt_c < kurt_r
        && r2_c > r2_r
        && ds_c < ds_r;
    ensure(
        ok,
        format!(
            "ACF improved {acf_improved}/{n}, median reduction {:.1}% (acf {acf_r:.4} -> {acf_c:.4}); \
             median skew {skew_r:.4} -> {skew_c:.4}, kurt {kurt_r:.4} -> {kurt_c:.4}, \
             R² {r2_r:.3} -> {r2_c:.3}, DS {ds_r:.3} -> {ds_c:.3}",
            100.0 * reduction
        ),
    )
}

fn metric_identity() -> Check {
    let s = lorenz_z(2000)?;
    let ev = evaluate(&s, &s, &MetricsConfig::default()).map_err(|e| e.to_string())?;
    let r = &ev.report;
    ensure(
        r.acf_error == 0.0
            && r.skew_error == 0.0
            && r.kurt_error == 0.0
            && r.r2 == 1.0
            && r.discriminative <= 0.1
            && r.predictive == r.predictive_baseline,
        format!(
            "acf {} skew {} kurt {} R² {} DS {} PS {} (baseline {})",
            r.acf_error, r.skew_error, r.kurt_error, r.r2, r.discriminative, r.predictive,
            r.predictive_baseline
        ),
    )
}

fn metric_oracles() -> Check {
    let mut rng = RandomStream::new(31);
    let mut x = 0.0;
    let ar: Vec<f64> = (0..100_000)
        .map(|_| {
            x = 0.5 * x + rng.standard_normal();
            x
        })
        .collect();
    let r = acf(&ar, 5).map_err(|e| e.to_string())?;
    let acf_gap = r
        .iter()
        .enumerate()
        .map(|(k, v)| (v - 0.5f64.powi(k as i32 + 1)).abs())
        .fold(0.0, f64::max);

    let exp: Vec<f64> = (0..1_000_000).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let normal: Vec<f64> = (0..1_000_000).map(|_| rng.standard_normal()).collect();
    let col = |v: &[f64]| TimeSeries::from_column(v).map_err(|e| e.to_string());
    let skew = skewness_error(&col(&exp)?, &col(&normal)?).map_err(|e| e.to_string())?;
    let kurt = kurtosis(&normal).map_err(|e| e.to_string())?;
    ensure(
        acf_gap <= 0.02 && (skew - 2.0).abs() <= 0.05 && (kurt - 3.0).abs() <= 0.05,
        format!("AR(1) max ACF gap {acf_gap:.4}; exponential skew {skew:.4}; Gaussian kurtosis {kurt:.4}"),
    )
}

/// Double-double arithmetic for the integrator oracle.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }
    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        Dd::fast(s, err + self.1 + o.1)
    }
    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }
    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let err = self.0.mul_add(o.0, -p);
        Dd::fast(p, err + self.0 * o.1 + self.1 * o.0)
    }
    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.0 / o.0;
        Dd::fast(q1, q2)
    }
    fn fast(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd(s, b - (s - a))
    }
    fn value(self) -> f64 {
        self.0 + self.1
    }
}

fn lorenz_oracle_step(s: [f64; 3], dt: f64, c: &LorenzConfig) -> [f64; 3] {
    let (sigma, rho, beta) = (Dd::from(c.sigma), Dd::from(c.rho), Dd::from(c.beta));
    let f = |v: [Dd; 3]| -> [Dd; 3] {
        [
            sigma.mul(v[1].sub(v[0])),
            v[0].mul(rho.sub(v[2])).sub(v[1]),
            v[0].mul(v[1]).sub(beta.mul(v[2])),
        ]
    };
    let h = Dd::from(dt);
    let half = h.div(Dd::from(2.0));
    let axpy = |a: [Dd; 3], k: [Dd; 3], w: Dd| [a[0].add(w.mul(k[0])), a[1].add(w.mul(k[1])), a[2].add(w.mul(k[2]))];
    let y = [Dd::from(s[0]), Dd::from(s[1]), Dd::from(s[2])];
    let k1 = f(y);
    let k2 = f(axpy(y, k1, half));
    let k3 = f(axpy(y, k2, half));
    let k4 = f(axpy(y, k3, h));
    let sixth = h.div(Dd::from(6.0));
    let two = Dd::from(2.0);
    let mut out = [0.0; 3];
    for i in 0..3 {
        let sum = k1[i].add(two.mul(k2[i])).add(two.mul(k3[i])).add(k4[i]);
        out[i] = y[i].add(sixth.mul(sum)).value();
    }
    out
}

fn lorenz_integrator() -> Check {
    let cfg = LorenzConfig::default();
    let mut worst = 0.0f64;
    for s in [[1.0, 1.0, 1.0], [-8.5, 3.25, 30.0], [15.0, 20.0, 40.0], [0.1, -0.2, 0.3]] {
        let got = cfg.rk4_step(s, cfg.dt);
        let want = lorenz_oracle_step(s, cfg.dt, &cfg);
        for i in 0..3 {
            worst = worst.max((got[i] - want[i]).abs());
        }
    }
    let long = simulate_lorenz(
        &LorenzConfig {
            steps: 100_000,
            ..cfg.clone()
        },
        None,
    )
    .map_err(|e| e.to_string())?;
    let max_abs = long.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(
        worst <= 1e-9 && max_abs < 100.0,
        format!("single-step max error {worst:.2e} (limit 1e-9); 1e5-step max |state| {max_abs:.2}"),
    )
}

fn modified_bias() -> Check {
    let mut rng = RandomStream::new(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 2 + rng.index(9);
        let pi = random_distribution(&mut rng, n);
        let q = random_symmetric_proposal(&mut rng, n);
        worst = worst.max(measure_modified_mh_bias(&pi, &q, 1e-15).map_err(|e| e.to_string())?);
    }
    let mut asym = Vec::new();
    for _ in 0..5 {
        let n = 3 + rng.index(6);
        let pi = random_distribution(&mut rng, n);
        let q = random_stochastic(&mut rng, n, n);
        asym.push(format!("{:.4}", measure_modified_mh_bias(&pi, &q, 1e-8).map_err(|e| e.to_string())?));
    }
    ensure(
        worst <= 1e-9,
        format!(
            "symmetric max L1 {worst:.2e} (limit 1e-9); asymmetric L1 distances [{}] (reported)",
            asym.join(", ")
        ),
    )
}

fn read_tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn reproducibility() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = efficacy_config();
    cfg.seeds = vec![0, 1, 2];
    if let DatasetSpec::Lorenz { params, .. } = &mut cfg.dataset {
        params.steps = 600;
    }
    cfg.output_dir = dir.path().to_path_buf();
    cmd_compare(&cfg).map_err(|e| e.to_string())?;
    let first = read_tree(dir.path())?;
    cmd_compare(&cfg).map_err(|e| e.to_string())?;
    let second = read_tree(dir.path())?;
    let identical = first == second;
    ensure(
        identical && first.contains_key("summary.json") && first.contains_key("report_2.json"),
        format!("{} output files byte-identical across reruns: {identical}", first.len()),
    )
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    let s = Duration::from_secs;
    suite.run("detailed balance", s(1), detailed_balance);
    suite.run("stationarity implication", s(1), stationarity);
    suite.run("TV bound", s(5), tv_bound);
    suite.run("acceptance-rule calibration", s(1), acceptance_calibration);
    suite.run("identity limit", s(60), identity_limit);
    suite.run("correction efficacy", s(180), efficacy);
    suite.run("metric identity axiom", s(60), metric_identity);
    suite.run("metric oracles", s(10), metric_oracles);
    suite.run("Lorenz integrator", s(60), lorenz_integrator);
    suite.run("modified-vs-standard MH bias", s(60), modified_bias);
    suite.run("reproducibility", s(120), reproducibility);
    println!("{} criteria failed", suite.failures);
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
