use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::result::Result;

use ndarray::Array2;
use qmc_core::percolation::enumerate_operators;
use qmc_core::report::{fmt_float, matrix_csv, SCHEMA_VERSION};
use qmc_core::spectral::block_structure_residual;
use qmc_core::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModeKind};
use crate::{CliError, Command};

#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub exit_code: u8,
    pub files: Vec<PathBuf>,
    /// Human-readable summary for stdout.
    pub message: String,
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a ExperimentConfig,
    result: R,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn json<R: Serialize>(
        &mut self,
        name: &str,
        command: &str,
        config: &ExperimentConfig,
        result: R,
    ) -> Result<(), CliError> {
        let env = Envelope { schema_version: SCHEMA_VERSION, command, config, result };
        let mut body = serde_json::to_string_pretty(&env).expect("results serialize");
        body.push('\n');
        self.text(name, &body)
    }

    fn finish(self, exit_code: u8, message: String) -> CommandOutput {
        CommandOutput { exit_code, files: self.files, message }
    }
}

pub fn run_command(command: &Command) -> Result<CommandOutput, CliError> {
    match command {
        Command::Qht(a) => cmd_qht(&a.resolve()?),
        Command::Dqht(a) => cmd_dqht(&a.resolve()?),
        Command::Detect(a) => cmd_detect(&a.resolve()?),
        Command::Bounds(a) => cmd_bounds(&a.resolve()?),
        Command::Verify(a) => cmd_verify(&a.common.resolve()?, a.matrix.as_deref()),
    }
}

struct Setup {
    graph: Graph,
    marked: MarkedSet,
    base: TransitionMatrixF64,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, CliError> {
    let graph = generate_graph(&cfg.graph)?;
    graph.validate_base().map_err(|e| CliError::Config(format!("graph {}: {e}", cfg.graph)))?;
    let marked = cfg.marked.resolve(graph.n())?;
    let base = build_transition_matrix(&graph);
    Ok(Setup { graph, marked, base })
}

fn slot_count(graph: &Graph, variant: Variant) -> usize {
    match variant {
        Variant::BondFlip => graph.n() * (graph.n() - 1) / 2,
        Variant::RemovalOnly => graph.edge_count(),
    }
}

/// Percolation probabilities requested by the config, in order.
fn p_values(cfg: &ExperimentConfig, s: &Setup) -> Result<Vec<f64>, CliError> {
    let perc = &cfg.percolation;
    let mut out = Vec::new();
    if let Some(p) = perc.p {
        out.push(p);
    }
    if let Some(grid) = perc.p_grid {
        out.extend(grid.values());
    }
    if let Some(fracs) = &perc.p_threshold_fractions {
        let sd = spectral_data(&s.base, &s.marked)
            .map_err(|e| CliError::Config(format!("threshold fractions need the spectral threshold: {e}")))?;
        let p_th = sd.p_threshold(slot_count(&s.graph, perc.variant))?;
        for f in fracs {
            let p = f * p_th;
            if p > 1.0 {
                return Err(CliError::Config(format!("{f} x p_th = {p} exceeds 1")));
            }
            out.push(p);
        }
    }
    if out.is_empty() {
        out.push(0.0);
    }
    Ok(out)
}

fn cap_hint(e: qmc_core::Error) -> CliError {
    match e {
        qmc_core::Error::EnumerationCap { required, cap } => CliError::Config(format!(
            "exact mode needs {required} candidate graphs but --enum-cap is {cap}; use --mode mc or raise the cap"
        )),
        other => other.into(),
    }
}

fn averaged_operator(
    cfg: &ExperimentConfig,
    model: &PercolationModelF64,
    marked: &MarkedSet,
) -> Result<AveragedOperatorF64, CliError> {
    match cfg.mode {
        ModeKind::Exact => build_averaged_operator_exact(model, marked, cfg.caps.enumeration_cap).map_err(cap_hint),
        ModeKind::Mc => Ok(build_averaged_operator_mc(model, marked, cfg.samples, cfg.seed)?),
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn t_star_text(t: TStar) -> String {
    match t {
        TStar::Reached(t) => t.to_string(),
        TStar::NotReached { .. } => "not reached".into(),
    }
}

#[derive(Serialize)]
struct QhtResult {
    n: usize,
    m: usize,
    summary: HittingSummary,
    szegedy_bound: Option<f64>,
    classical_hitting_time: Option<f64>,
}

pub fn cmd_qht(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let s = setup(cfg)?;
    let report = coherent_qht(&s.base, &s.marked, cfg.caps.t_cap)?;
    let result = QhtResult {
        n: s.graph.n(),
        m: s.marked.m(),
        summary: report.summary(),
        szegedy_bound: report.bound,
        classical_hitting_time: classical_hitting_time(&s.base, &s.marked).ok(),
    };
    let mut w = Writer::new(&cfg.out)?;
    w.text("qht_curve.csv", &report.to_csv())?;
    w.json("qht_summary.json", "qht", cfg, &result)?;
    let violated = report.within_bound() == Some(false);
    let message = format!(
        "qht: T_star = {}, szegedy_bound = {}{}\n",
        t_star_text(report.t_star),
        opt_float(report.bound),
        if violated { " (BOUND VIOLATED)" } else { "" }
    );
    Ok(w.finish(u8::from(violated), message))
}

#[derive(Serialize)]
struct DqhtRow {
    p: f64,
    summary: HittingSummary,
    bounds: Option<BoundReportF64>,
    distinct_graphs: usize,
    operator_norm: f64,
}

#[derive(Serialize)]
struct DqhtResult {
    n: usize,
    m: usize,
    a_c: usize,
    rows: Vec<DqhtRow>,
}

pub fn cmd_dqht(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let s = setup(cfg)?;
    let ps = p_values(cfg, &s)?;
    let mut w = Writer::new(&cfg.out)?;
    let mut rows = Vec::new();
    let mut csv = String::from("p,T_star,dqht_bound,within_threshold,within_bound\n");
    let mut failed = false;
    for &p in &ps {
        let model = PercolationModel::new(s.graph.clone(), p, cfg.percolation.variant)?;
        let ubar = averaged_operator(cfg, &model, &s.marked)?;
        let report = decoherent_qht_with(&ubar, &model, cfg.caps.t_cap)?;
        let within_bound = report.within_bound();
        failed |= report.within_threshold == Some(true) && within_bound == Some(false);
        let opt_bool = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_float(p),
            t_star_text(report.t_star),
            opt_float(report.bound),
            opt_bool(report.within_threshold),
            opt_bool(within_bound)
        );
        if ps.len() == 1 {
            w.text("dqht_curve.csv", &report.to_csv())?;
            if cfg.dump_operator {
                w.text("ubar.csv", &matrix_csv(ubar.matrix()))?;
                let mut prov = serde_json::to_string_pretty(&ubar.provenance()).expect("provenance serializes");
                prov.push('\n');
                w.text("ubar.json", &prov)?;
            }
        }
        rows.push(DqhtRow {
            p,
            summary: report.summary(),
            bounds: report.bound_report.clone(),
            distinct_graphs: ubar.distinct_graphs(),
            operator_norm: ubar.operator_norm()?,
        });
    }
    w.text("dqht_sweep.csv", &csv)?;
    let a_c = slot_count(&s.graph, cfg.percolation.variant);
    w.json("dqht_summary.json", "dqht", cfg, DqhtResult { n: s.graph.n(), m: s.marked.m(), a_c, rows })?;
    let mut message = String::from("dqht:\n");
    message.push_str(&csv);
    Ok(w.finish(u8::from(failed), message))
}

#[derive(Serialize)]
struct DetectResult {
    report: DetectionReport,
    /// Exact double average of `p1`, when enumerable.
    exact_mean_p1: Option<f64>,
    /// The constant success floor claimed for marked inputs.
    success_floor: Option<f64>,
    invariance_probe: Option<InvarianceProbe>,
}

pub fn cmd_detect(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let s = setup(cfg)?;
    let ps = p_values(cfg, &s)?;
    let [p] = ps[..] else {
        return Err(CliError::Config("detect takes a single percolation probability".into()));
    };
    let model = PercolationModel::new(s.graph.clone(), p, cfg.percolation.variant)?;
    let horizon = match cfg.horizon {
        Some(h) => h,
        None => {
            // With no marked vertices the horizon is still the one the
            // algorithm would pick for a single-vertex candidate.
            let reference = if s.marked.is_empty() { MarkedSet::new(s.graph.n(), [0])? } else { s.marked.clone() };
            let sd = spectral_data(&s.base, &reference)?;
            sd.detection_bound(model.a_c(), p)?.ceil() as usize
        }
    };
    let report = run_detection_campaign(&model, &s.marked, horizon, cfg.trials, cfg.seed, cfg.check_reference)?;
    let exact = exact_mean_p1(&model, &s.marked, horizon, cfg.caps.sequence_budget).ok();
    let probe = (s.marked.is_empty() && model.variant() == Variant::RemovalOnly)
        .then(|| removal_invariance_probe::<f64>(&s.graph, cfg.caps.enumeration_cap).ok())
        .flatten();
    let pass = report.pass;
    let message = format!(
        "detect: T = {horizon}, frac_outcome1 = {}, mean_p1 = {}, guarantee = {}, pass = {pass}\n",
        report.frac_outcome1,
        fmt_float(report.mean_p1),
        fmt_float(report.guarantee)
    );
    let result = DetectResult {
        success_floor: (!s.marked.is_empty()).then_some(0.125),
        report,
        exact_mean_p1: exact,
        invariance_probe: probe,
    };
    let mut w = Writer::new(&cfg.out)?;
    w.json("detect_report.json", "detect", cfg, result)?;
    Ok(w.finish(u8::from(!pass), message))
}

#[derive(Serialize)]
struct BoundsAtP {
    p: f64,
    within_threshold: bool,
    bounds: BoundReportF64,
}

#[derive(Serialize)]
struct BoundsResult {
    n: usize,
    m: usize,
    epsilon: f64,
    groups: Vec<EigenGroup<f64>>,
    lambda_max_abs: f64,
    corollary_scaling: Option<f64>,
    reports: Vec<BoundsAtP>,
}

pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let s = setup(cfg)?;
    let sd = spectral_data(&s.base, &s.marked)?;
    let a_c = slot_count(&s.graph, cfg.percolation.variant);
    let mut reports = Vec::new();
    for p in p_values(cfg, &s)? {
        let bounds = BoundReport::new(&sd, a_c, p)?;
        reports.push(BoundsAtP { p, within_threshold: p <= bounds.p_threshold, bounds });
    }
    let first = &reports[0].bounds;
    let message = format!(
        "bounds: szegedy = {}, E = {}, p_threshold = {}, dqht(p = {}) = {}\n",
        first.szegedy_bound, first.e, first.p_threshold, reports[0].p, first.dqht_bound
    );
    let result = BoundsResult {
        n: s.graph.n(),
        m: s.marked.m(),
        epsilon: sd.epsilon,
        groups: sd.groups.clone(),
        lambda_max_abs: sd.lambda_max_abs,
        corollary_scaling: sd.corollary_scaling().ok(),
        reports,
    };
    let mut w = Writer::new(&cfg.out)?;
    w.json("bounds.json", "bounds", cfg, result)?;
    Ok(w.finish(0, message))
}

/// One invariant evaluated on one fixture.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub fixture: String,
    pub invariant: String,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub detail: Option<String>,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn within(&mut self, fixture: &str, invariant: &str, value: f64, tolerance: f64) {
        self.0.push(Check {
            fixture: fixture.into(),
            invariant: invariant.into(),
            value: Some(value),
            tolerance: Some(tolerance),
            pass: value <= tolerance,
            detail: None,
        });
    }

    fn holds(&mut self, fixture: &str, invariant: &str, pass: bool, detail: Option<String>) {
        self.0.push(Check {
            fixture: fixture.into(),
            invariant: invariant.into(),
            value: None,
            tolerance: None,
            pass,
            detail,
        });
    }

    fn error(&mut self, fixture: &str, invariant: &str, e: impl ToString) {
        self.holds(fixture, invariant, false, Some(e.to_string()));
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Bare(Vec<Vec<f64>>),
    Wrapped { matrix: Vec<Vec<f64>> },
}

fn load_matrix(path: &Path) -> Result<Array2<f64>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let rows = match serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))? {
        MatrixFile::Bare(r) | MatrixFile::Wrapped { matrix: r } => r,
    };
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{}: expected a non-empty square matrix", path.display())));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

/// Checks that need only a transition matrix.
fn check_chain(checks: &mut Checks, name: &str, p: &TransitionMatrixF64, marked: &MarkedSet) {
    let tol = 1e-10;
    let marked_chain = match apply_marking(p, marked) {
        Ok(c) => c,
        Err(e) => return checks.error(name, "marking", e),
    };
    for (label, chain) in [("unmarked", p), ("marked", &marked_chain)] {
        let r = build_walk_operator(chain).residuals();
        checks.within(name, &format!("{label}: U orthogonal"), r.orthogonality, tol);
        checks.within(name, &format!("{label}: R_A involution"), r.reflection_a, tol);
        checks.within(name, &format!("{label}: R_B involution"), r.reflection_b, tol);
        checks.within(name, &format!("{label}: A isometry"), r.isometry_a, tol);
        checks.within(name, &format!("{label}: B isometry"), r.isometry_b, tol);
        checks.within(name, &format!("{label}: U = R_B R_A"), r.factorization, 1e-12);
    }
    if !p.is_symmetric() {
        checks.holds(name, "symmetric chain", false, Some("spectral checks need a symmetric P".into()));
        return;
    }
    let psi0 = initial_state(p);
    let moved = evolve(&build_walk_operator(p), &psi0, 1);
    let dev = (&moved.into_amplitudes() - &psi0.into_amplitudes()).fold(0.0f64, |a, d| a.max(d.abs()));
    checks.within(name, "psi(0) fixed by unmarked U", dev, tol);
    match block_structure_residual(p, marked) {
        Ok(r) => checks.within(name, "C block structure", r, 1e-12),
        Err(e) => checks.error(name, "C block structure", e),
    }
    match spectral_data(p, marked) {
        Ok(sd) => checks.within(name, "sum nu^2 = 1 - m/n", (sd.total_mass() - (1.0 - sd.epsilon)).abs(), tol),
        Err(e) => checks.error(name, "sum nu^2 = 1 - m/n", e),
    }
}

fn check_graph(checks: &mut Checks, name: &str, g: &Graph, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let p = build_transition_matrix::<f64>(g);
    let marked = MarkedSet::new(g.n(), [0])?;
    check_chain(checks, name, &p, &marked);

    let noisy = PercolationModel::new(g.clone(), 0.3, Variant::BondFlip)?;
    let ubar = build_averaged_operator_exact(&noisy, &marked, cfg.caps.enumeration_cap).map_err(cap_hint)?;
    checks.within(name, "|U_dec| <= 1", ubar.operator_norm()? - 1.0, 1e-10);
    let (mut identity, mut g_m) = (0.0f64, f64::NEG_INFINITY);
    for t in 0..=6 {
        let r = g_term_decomposition(&ubar, &p, t);
        identity = identity.max(r.identity_residual());
        g_m = g_m.max(r.g_m - r.epsilon);
    }
    checks.within(name, "F_dec = 2 - 2 sum G", identity, 1e-10);
    checks.within(name, "G_M <= epsilon", g_m.max(0.0), 1e-10);

    // Sequence-level checks enumerate K^T step sequences; fall back to the
    // removal-only variant when bond-flip has too many candidates K.
    let mut seq_model = noisy.clone();
    if enumerate_operators(&seq_model, &marked, cfg.caps.enumeration_cap)?.len() > 64 {
        seq_model = PercolationModel::new(g.clone(), 0.3, Variant::RemovalOnly)?;
    }
    let k = enumerate_operators(&seq_model, &marked, cfg.caps.enumeration_cap)?.len();
    let horizon = if k <= 8 { 3 } else { 2 };
    let seq_ubar = build_averaged_operator_exact(&seq_model, &marked, cfg.caps.enumeration_cap)?;
    let mut worst = 0.0f64;
    for t in 0..=horizon {
        match verify_ensemble_average(&seq_model, &marked, t, horizon, cfg.caps.sequence_budget) {
            Ok(d) => worst = worst.max(d),
            Err(e) => {
                checks.error(name, "ensemble average = U_dec^t", e);
                return Ok(());
            }
        }
    }
    checks.within(name, "ensemble average = U_dec^t", worst, 1e-12);

    let curve = decoherent_f_curve(&seq_ubar, &p, horizon);
    let mut worst = 0.0f64;
    for (t, f) in curve.iter().enumerate() {
        let direct = 4.0 * exact_mean_p1_enumerated(&seq_model, &marked, t, cfg.caps.sequence_budget)?;
        worst = worst.max((f - direct).abs());
    }
    checks.within(name, "F_dec inner-product form = ensemble form", worst, 1e-10);

    let clean = noisy.with_p(0.0)?;
    let cap = Some(60);
    let d = decoherent_qht(&clean, &marked, OperatorMode::Exact, cap, cfg.caps.enumeration_cap)?;
    let c = coherent_qht(&p, &marked, cap)?;
    checks.holds(
        name,
        "p = 0 hitting time equals coherent",
        d.t_star == c.t_star,
        Some(format!("{} vs {}", t_star_text(d.t_star), t_star_text(c.t_star))),
    );
    Ok(())
}

#[derive(Serialize)]
struct VerifyResult {
    checks: Vec<Check>,
    failed: usize,
}

pub fn cmd_verify(cfg: &ExperimentConfig, matrix: Option<&Path>) -> Result<CommandOutput, CliError> {
    let mut checks = Checks::default();
    match matrix {
        Some(path) => {
            let name = path.display().to_string();
            match TransitionMatrix::new(load_matrix(path)?) {
                Ok(p) => {
                    let marked = MarkedSet::new(p.n(), [0])?;
                    check_chain(&mut checks, &name, &p, &marked);
                }
                Err(e) => checks.error(&name, "row-stochastic transition matrix", e),
            }
        }
        None => {
            for (name, g) in
                [("K3", Graph::complete(3)?), ("K4", Graph::complete(4)?), ("odd_cycle(5)", Graph::cycle(5)?)]
            {
                check_graph(&mut checks, name, &g, cfg)?;
            }
        }
    }
    let failed: Vec<&Check> = checks.0.iter().filter(|c| !c.pass).collect();
    let mut message = format!("verify: {} checks, {} failed\n", checks.0.len(), failed.len());
    for c in &failed {
        let _ = writeln!(
            message,
            "FAILED {}: {}{}",
            c.fixture,
            c.invariant,
            c.detail.as_ref().map(|d| format!(" ({d})")).unwrap_or_default()
        );
    }
    let n_failed = failed.len();
    let mut w = Writer::new(&cfg.out)?;
    w.json("verify_report.json", "verify", cfg, VerifyResult { checks: checks.0, failed: n_failed })?;
    Ok(w.finish(u8::from(n_failed > 0), message))
}
