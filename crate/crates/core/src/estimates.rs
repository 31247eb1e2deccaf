//! Hypothesis checks and explicit a-priori estimates for concrete problem
//! instances: growth and sign conditions, coefficient integrability, the
//! coercivity chain, the dual bound, weak residuals and membership
//! diagnostics.
//!
//! Growth and sign conditions quantify over every `τ ∈ ℝ`; they are checked
//! by sampling and the report says so.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discrete::nodal_residual;
use crate::error::{Error, Result};
use crate::exponent::{
    beta_fields, critical_exponents, mu_fields, partition, DomainPartition, Exponent,
    ExponentField, Region,
};
use crate::grid::GridFunction;
use crate::modular::{luxemburg_values, modular_values, nodal_weights};
use crate::pn::{pn_energy, PnIndex};
use crate::problem::{ProblemKind, ProblemSpec};
use crate::scalar::Scalar;
use crate::transform::{log_inequality_constants, log_moment_sides, main_partition, reduce_problem};

/// Relative margin below which a sampled inequality counts as violated.
pub const MARGIN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skipped => "skipped",
        }
    }
}

/// Node and sample at which a condition was worst.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness<T> {
    pub node: usize,
    pub tau: Option<T>,
}

/// One verified condition.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisEntry<T> {
    pub condition_id: String,
    /// The inequality, written out.
    pub paper_eq: String,
    pub status: CheckStatus,
    /// Worst relative margin `(rhs - lhs)/(1 + |rhs| + |lhs|)`; negative means violated.
    pub margin: Option<T>,
    pub witness: Option<Witness<T>>,
    /// Computed quantity (modular, bound) where one applies.
    pub value: Option<T>,
    pub note: Option<String>,
}

impl<T: Scalar> HypothesisEntry<T> {
    fn new(id: &str, eq: &str, status: CheckStatus) -> Self {
        Self {
            condition_id: id.to_string(),
            paper_eq: eq.to_string(),
            status,
            margin: None,
            witness: None,
            value: None,
            note: None,
        }
    }

    fn skipped(id: &str, eq: &str, why: &str) -> Self {
        Self::new(id, eq, CheckStatus::Skipped).with_note(why)
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn pass(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

/// All checked conditions of one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport<T> {
    pub kind: ProblemKind,
    pub entries: Vec<HypothesisEntry<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> HypothesisReport<T> {
    /// Overall verdict: no entry failed.
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass())
    }

    pub fn entry(&self, id: &str) -> Option<&HypothesisEntry<T>> {
        self.entries.iter().find(|e| e.condition_id == id)
    }

    pub fn skipped(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.status == CheckStatus::Skipped)
            .map(|e| e.condition_id.as_str())
            .collect()
    }

    pub fn failed(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.status == CheckStatus::Fail)
            .map(|e| e.condition_id.as_str())
            .collect()
    }
}

/// Sampling parameters of the condition checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckConfig {
    /// Random `(node, τ)` pairs per condition, on top of the probes `τ ∈ {0, ±1}` at every node.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
        }
    }
}

fn relative_margin<T: Scalar>(lhs: T, rhs: T) -> T {
    let m = (rhs - lhs) / (T::one() + rhs.abs() + lhs.abs());
    if m.is_finite() {
        m
    } else {
        -T::one()
    }
}

/// `τ = ±10^s` with `s` uniform in `[-6, 6]`.
fn sample_tau<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let s: f64 = rng.gen_range(-6.0..=6.0);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    T::lit(sign * 10f64.powf(s))
}

/// Checks `lhs(node, τ) <= rhs(node, τ)` on probes and random samples.
fn sampled_inequality<T: Scalar>(
    id: &str,
    eq: &str,
    nodes: &[usize],
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
    sides: impl Fn(usize, T) -> (T, T),
) -> HypothesisEntry<T> {
    if nodes.is_empty() {
        return HypothesisEntry::skipped(id, eq, "subdomain is empty");
    }
    let mut worst: Option<(T, usize, T)> = None;
    let mut visit = |node: usize, tau: T| {
        let (l, r) = sides(node, tau);
        let m = relative_margin(l, r);
        if worst.is_none_or(|(w, _, _)| m < w) {
            worst = Some((m, node, tau));
        }
    };
    for &node in nodes {
        for tau in [T::zero(), T::one(), -T::one()] {
            visit(node, tau);
        }
    }
    for _ in 0..cfg.samples {
        let node = nodes[rng.gen_range(0..nodes.len())];
        visit(node, sample_tau(rng));
    }
    let (m, node, tau) = worst.expect("at least one probe");
    let status = if m >= -T::lit(MARGIN_TOLERANCE) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    let mut e = HypothesisEntry::new(id, eq, status);
    e.margin = Some(m);
    e.witness = Some(Witness {
        node,
        tau: Some(tau),
    });
    e.note = Some(format!(
        "sampled: {} probes and {} random pairs, |tau| in [1e-6, 1e6]",
        3 * nodes.len(),
        cfg.samples
    ));
    e
}

/// Checks a nodal predicate `lo <= value` with witness at the worst node.
fn nodal_bound<T: Scalar>(
    id: &str,
    eq: &str,
    nodes: &[usize],
    gap: impl Fn(usize) -> (T, T),
) -> HypothesisEntry<T> {
    if nodes.is_empty() {
        return HypothesisEntry::skipped(id, eq, "subdomain is empty");
    }
    let (m, node) = nodes
        .iter()
        .map(|&k| {
            let (l, r) = gap(k);
            (relative_margin(l, r), k)
        })
        .fold(None::<(T, usize)>, |acc, (m, k)| match acc {
            Some((w, _)) if w <= m => acc,
            _ => Some((m, k)),
        })
        .expect("nonempty");
    let status = if m >= T::zero() {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    let mut e = HypothesisEntry::new(id, eq, status);
    e.margin = Some(m);
    e.witness = Some(Witness { node, tau: None });
    e
}

/// Strict nodal predicate `value < upper`.
fn nodal_strict<T: Scalar>(
    id: &str,
    eq: &str,
    nodes: &[usize],
    gap: impl Fn(usize) -> (T, T),
) -> HypothesisEntry<T> {
    let mut e = nodal_bound(id, eq, nodes, &gap);
    if e.status == CheckStatus::Pass {
        if let Some(node) = nodes.iter().copied().find(|&k| {
            let (l, r) = gap(k);
            l >= r
        }) {
            e.status = CheckStatus::Fail;
            e.witness = Some(Witness { node, tau: None });
            e.margin = Some(T::zero());
        }
    }
    e
}

/// Integrability entry: the modular of `coef` with exponent `e` on `mask`.
fn integrability<T: Scalar>(
    id: &str,
    eq: &str,
    weights: &[T],
    coef: &[T],
    e: Result<ExponentField<T>>,
    mask: &[bool],
) -> HypothesisEntry<T> {
    if !mask.iter().any(|m| *m) {
        return HypothesisEntry::skipped(id, eq, "subdomain is empty");
    }
    match e {
        Err(err) => HypothesisEntry::new(id, eq, CheckStatus::Fail).with_note(err.to_string()),
        Ok(field) => {
            let field = field.restricted(mask);
            let v = modular_values(weights, coef, field.values());
            let status = if v.is_finite() {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            let mut entry = HypothesisEntry::new(id, eq, status);
            entry.value = Some(v);
            entry.note = Some("modular over the subdomain".into());
            entry
        }
    }
}

fn nodes_where(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(k, m)| m.then_some(k))
        .collect()
}

/// Partition of a reduced problem: `α` against `[1, p0-η)`, `[p0-η, p̃)`, `[p̃, ∞)`.
pub fn reduced_partition<T: Scalar>(spec: &ProblemSpec<T>) -> Result<DomainPartition<T>> {
    let p0 = spec.p0()?;
    let crit = critical_exponents(p0, spec.analysis_dim())?;
    partition(
        &spec.alpha,
        &ExponentField::constant(&spec.grid, p0),
        spec.eta,
        &ExponentField::constant(&spec.grid, crit.p_tilde),
    )
}

/// Runs every hypothesis check for the problem's form.
pub fn check_hypotheses<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &CheckConfig,
) -> Result<HypothesisReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match spec.kind {
        ProblemKind::Reduced => check_reduced(spec, cfg, &mut rng),
        ProblemKind::Main => check_main(spec, cfg, &mut rng),
    }
}

fn check_reduced<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>> {
    if !spec.p.is_constant() {
        return Err(Error::Config("reduced problem needs a constant p0".into()));
    }
    let mut report = HypothesisReport {
        kind: ProblemKind::Reduced,
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    let n = spec.grid.len();
    let all: Vec<usize> = (0..n).collect();
    let p0 = spec.p.finite_at(0)?;
    let two = T::lit(2.0);
    let one = T::one();
    let alpha = spec.alpha.finite_values()?;
    let alpha1 = spec.alpha1.finite_values()?;
    let c = &spec.nonlinearity;
    let k = spec.coefficients.all();

    report
        .entries
        .push(nodal_bound("p0_bound", "2 <= p0", &[0], |_| (two, p0)));
    report
        .entries
        .push(nodal_bound("alpha_range", "1 <= alpha(x)", &all, |j| (one, alpha[j])));

    let crit = match critical_exponents(p0, spec.analysis_dim()) {
        Ok(c) => {
            let mut e = HypothesisEntry::new("analysis_dim", "q0 < n", CheckStatus::Pass);
            e.value = Some(c.p_tilde);
            e.note = Some("value is the critical exponent p0~".into());
            report.entries.push(e);
            c
        }
        Err(err) => {
            report.entries.push(
                HypothesisEntry::new("analysis_dim", "q0 < n", CheckStatus::Fail)
                    .with_note(err.to_string()),
            );
            return Ok(report);
        }
    };
    let part = match reduced_partition(spec) {
        Ok(p) => p,
        Err(err) => {
            report.entries.push(
                HypothesisEntry::new("partition", "omega = omega1 + omega2 + omega3", CheckStatus::Fail)
                    .with_note(err.to_string()),
            );
            return Ok(report);
        }
    };
    let omega2 = nodes_where(&part.mask(Region::Omega2));
    let omega3 = nodes_where(&part.mask(Region::Omega3));

    report.entries.push(sampled_inequality(
        "growth",
        "|c(x,t)| <= c0(x)|t|^(alpha(x)-1) + c1(x)",
        &all,
        cfg,
        rng,
        |j, t: T| {
            let lhs = c.eval(j, t).abs();
            (lhs, k[0][j] * t.abs().powf(alpha[j] - one) + k[1][j])
        },
    ));
    report.entries.push(nodal_strict(
        "alpha1_range",
        "1 <= alpha1(x) < p0 on omega2",
        &omega2,
        |j| (alpha1[j], p0),
    ));
    if let Some(e) = report.entries.last_mut() {
        if e.status == CheckStatus::Pass && omega2.iter().any(|&j| alpha1[j] < one) {
            e.status = CheckStatus::Fail;
        }
    }
    report.entries.push(sampled_inequality(
        "sign_omega2",
        "c(x,t) t >= -c2(x)|t|^alpha1(x) - c3(x) on omega2",
        &omega2,
        cfg,
        rng,
        |j, t: T| {
            let lower = -k[2][j] * t.abs().powf(alpha1[j]) - k[3][j];
            (lower, c.eval(j, t) * t)
        },
    ));
    report.entries.push(sampled_inequality(
        "sign_omega3",
        "c(x,t) t >= c4(x)|t|^alpha(x) - c5(x) on omega3",
        &omega3,
        cfg,
        rng,
        |j, t: T| {
            let lower = k[4][j] * t.abs().powf(alpha[j]) - k[5][j];
            (lower, c.eval(j, t) * t)
        },
    ));
    let floor = spec.floor;
    report.entries.push(nodal_bound(
        "floor_omega3",
        "c4(x) >= C0 > 0 on omega3",
        &omega3,
        |j| (floor, k[4][j]),
    ));

    let w = nodal_weights(&spec.grid);
    let everywhere = vec![true; n];
    let m2 = part.mask(Region::Omega2);
    let m3 = part.mask(Region::Omega3);
    let betas = beta_fields(&part, &spec.alpha, p0, crit.p_tilde);
    let (beta, beta1) = match betas {
        Ok(b) => (Ok(b.beta), Ok(b.beta1)),
        Err(e) => {
            let msg = e.to_string();
            (Err(Error::Config(msg.clone())), Err(Error::Config(msg)))
        }
    };
    report.entries.push(integrability(
        "integrability_c0",
        "c0 in L^beta(x)(omega)",
        &w,
        &k[0],
        beta,
        &everywhere,
    ));
    report.entries.push(integrability(
        "integrability_c1",
        "c1 in L^beta1(x)(omega)",
        &w,
        &k[1],
        beta1,
        &everywhere,
    ));
    let c2_exp = (0..n)
        .map(|j| {
            if m2[j] {
                if alpha1[j] >= p0 {
                    return Err(Error::domain(j, "alpha1 reaches p0 on omega2"));
                }
                Ok(Exponent::Finite(p0 / (p0 - alpha1[j])))
            } else {
                Ok(Exponent::Undefined)
            }
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|v| ExponentField::from_exponents(spec.grid.clone(), v));
    report.entries.push(integrability(
        "integrability_c2",
        "c2 in L^(p0/(p0-alpha1(x)))(omega2)",
        &w,
        &k[2],
        c2_exp,
        &m2,
    ));
    report.entries.push(integrability(
        "integrability_c3",
        "c3 in L^1(omega2)",
        &w,
        &k[3],
        Ok(ExponentField::constant(&spec.grid, one)),
        &m2,
    ));
    report.entries.push(integrability(
        "integrability_c4",
        "c4 in L^inf(omega3)",
        &w,
        &k[4],
        ExponentField::from_exponents(spec.grid.clone(), vec![Exponent::Infinite; n]),
        &m3,
    ));
    report.entries.push(integrability(
        "integrability_c5",
        "c5 in L^1(omega3)",
        &w,
        &k[5],
        Ok(ExponentField::constant(&spec.grid, one)),
        &m3,
    ));
    Ok(report)
}

fn check_main<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>> {
    let mut report = HypothesisReport {
        kind: ProblemKind::Main,
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    let n = spec.grid.len();
    let all: Vec<usize> = (0..n).collect();
    let one = T::one();
    let two = T::lit(2.0);
    let p = spec.p.finite_values()?;
    let xi = spec.alpha.finite_values()?;
    let xi1 = spec.alpha1.finite_values()?;
    let p1 = spec.p1();
    let a = &spec.nonlinearity;
    let k = spec.coefficients.all();

    if spec.analysis_dim() < 3 {
        report.warnings.push(format!(
            "analysis dimension {} is below 3; the exponent formulas are evaluated anyway",
            spec.analysis_dim()
        ));
    }
    report
        .entries
        .push(nodal_bound("p_bound", "2 <= p(x) < inf", &all, |j| (two, p[j])));
    let p_min = spec.p_min();
    report
        .entries
        .push(nodal_bound("p1_lower", "2 <= p1", &[0], |_| (two, p1)));
    report
        .entries
        .push(nodal_bound("p1_upper", "p1 <= p(x)", &all, |j| (p1, p[j])));
    report
        .entries
        .push(nodal_strict("xi_range", "1 < xi(x)", &all, |j| (one, xi[j])));

    match critical_exponents(p1, spec.analysis_dim()) {
        Ok(c) => {
            let mut e = HypothesisEntry::new("analysis_dim", "q1 < n", CheckStatus::Pass);
            e.value = Some(c.p_tilde);
            e.note = Some("value is the critical exponent p1~".into());
            report.entries.push(e);
        }
        Err(err) => {
            report.entries.push(
                HypothesisEntry::new("analysis_dim", "q1 < n", CheckStatus::Fail)
                    .with_note(err.to_string()),
            );
            return Ok(report);
        }
    }
    if !report.pass() || p1 > p_min {
        return Ok(report);
    }
    let (derived, part) = match main_partition(spec) {
        Ok(v) => v,
        Err(err) => {
            report.entries.push(
                HypothesisEntry::new("partition", "omega = omega1 + omega2 + omega3", CheckStatus::Fail)
                    .with_note(err.to_string()),
            );
            return Ok(report);
        }
    };
    let omega2 = nodes_where(&part.mask(Region::Omega2));
    let omega3 = nodes_where(&part.mask(Region::Omega3));

    report.entries.push(sampled_inequality(
        "growth",
        "|a(x,t)| <= a0(x)|t|^(xi(x)-1) + a1(x)",
        &all,
        cfg,
        rng,
        |j, t: T| (a.eval(j, t).abs(), k[0][j] * t.abs().powf(xi[j] - one) + k[1][j]),
    ));
    let mut xi1_entry = nodal_strict("xi1_range", "2 <= xi1(x) < p(x) on omega2", &omega2, |j| {
        (xi1[j], p[j])
    });
    if xi1_entry.status == CheckStatus::Pass {
        if let Some(&j) = omega2.iter().find(|&&j| xi1[j] < two) {
            xi1_entry.status = CheckStatus::Fail;
            xi1_entry.witness = Some(Witness { node: j, tau: None });
        }
    }
    report.entries.push(xi1_entry);
    report.entries.push(sampled_inequality(
        "sign_omega2",
        "a(x,t) t >= -a2(x)|t|^xi1(x) - a3(x) on omega2",
        &omega2,
        cfg,
        rng,
        |j, t: T| (-k[2][j] * t.abs().powf(xi1[j]) - k[3][j], a.eval(j, t) * t),
    ));
    report.entries.push(sampled_inequality(
        "sign_omega3",
        "a(x,t) t >= a4(x)|t|^xi(x) - a5(x) on omega3",
        &omega3,
        cfg,
        rng,
        |j, t: T| (k[4][j] * t.abs().powf(xi[j]) - k[5][j], a.eval(j, t) * t),
    ));
    let floor = spec.floor;
    report.entries.push(nodal_bound(
        "floor_omega3",
        "a4(x) >= A0 > 0 on omega3",
        &omega3,
        |j| (floor, k[4][j]),
    ));

    let w = nodal_weights(&spec.grid);
    let everywhere = vec![true; n];
    let m2 = part.mask(Region::Omega2);
    let m3 = part.mask(Region::Omega3);
    match mu_fields(&part, &spec.p, &spec.alpha, &spec.alpha1, &derived, p1) {
        Ok(mu) => {
            let specs: [(&str, &str, usize, ExponentField<T>, &[bool]); 6] = [
                ("integrability_a0", "a0 in L^mu(x)(omega)", 0, mu.mu, &everywhere),
                ("integrability_a1", "a1 in L^mu4(x)(omega)", 1, mu.mu4, &everywhere),
                ("integrability_a2", "a2 in L^mu1(x)(omega2)", 2, mu.mu1, &m2),
                ("integrability_a3", "a3 in L^mu2(x)(omega2)", 3, mu.mu2, &m2),
                (
                    "integrability_a4",
                    "a4 in L^inf(omega3)",
                    4,
                    ExponentField::from_exponents(spec.grid.clone(), vec![Exponent::Infinite; n])?,
                    &m3,
                ),
                ("integrability_a5", "a5 in L^mu3(x)(omega3)", 5, mu.mu3, &m3),
            ];
            for (id, eq, i, field, mask) in specs {
                report
                    .entries
                    .push(integrability(id, eq, &w, &k[i], Ok(field), mask));
            }
        }
        Err(err) => report.entries.push(
            HypothesisEntry::new("integrability", "mu exponents defined", CheckStatus::Fail)
                .with_note(err.to_string()),
        ),
    }

    let reduction = match reduce_problem(spec) {
        Ok(r) => r,
        Err(err) => {
            report.entries.push(
                HypothesisEntry::new("reduction", "v = |u|^gamma u", CheckStatus::Fail)
                    .with_note(err.to_string()),
            );
            return Ok(report);
        }
    };
    let mut e = HypothesisEntry::new(
        "partition_preserved",
        "xi <= p - eta0 <=> theta <= p1 - eta0~, xi >= p~ <=> theta >= p1~",
        if reduction.partition_preserved {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
    );
    e.value = Some(reduction.eta_tilde);
    e.note = Some(format!(
        "value is eta0~; thresholds in [{}, {}) keep the partition",
        reduction.feasible.0, reduction.feasible.1
    ));
    report.entries.push(e);
    let inner = check_reduced(&reduction.spec, cfg, rng)?;
    for mut e in inner.entries {
        e.condition_id = format!("reduced:{}", e.condition_id);
        report.entries.push(e);
    }
    report.warnings.extend(inner.warnings);
    Ok(report)
}

/// Pieces of the explicit coercivity chain for a reduced problem.
#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityReport<T> {
    /// `<f(u), u> = k Σ_i ∫|u|^{p0-2}|D_i u|² + ∫ c(x,u) u`.
    pub lhs: T,
    /// Explicit lower bound built from Young's inequality.
    pub bound: T,
    /// `lhs >= bound` up to rounding (`1e-12` relative).
    pub holds: bool,
    /// `k Σ_i ∫|u|^{p0-2}|D_i u|²`.
    pub energy: T,
    /// `(ε1+ε3) ∫_{Ω1}|u|^{p0} + ε2 ∫_{Ω2}|u|^{p0}`, each `ε` only where its coefficient is nonzero.
    pub absorbed: T,
    /// `ε1^{-p0/η} ∫_{Ω1} c0^{p0/(p0-α)}`.
    pub c0_term: T,
    /// `ε3^{-p0 q0} ∫_{Ω1} c1^{q0}`.
    pub c1_term: T,
    /// `ε2^{-α1⁺/(p0-α1⁺)} ∫_{Ω2} c2^{p0/(p0-α1)}`.
    pub c2_term: T,
    pub c3_norm: T,
    pub c5_norm: T,
    /// `C̄0 ∫_{Ω3}|u|^α`.
    pub omega3_term: T,
    /// Sum of the constant terms.
    pub k: T,
    /// `energy - absorbed`.
    pub energy_margin: T,
    pub coefficient_positive: bool,
    /// `[u]^{p0}` in the pn-space with index `((p0-2) q0, q0)`.
    pub seminorm_power: T,
    /// `energy_margin / seminorm_power`, the measured leading constant.
    pub c5_measured: Option<T>,
}

/// Evaluates both sides of the coercivity chain at `u`; `eps[i] ∈ (0, 1]`.
pub fn coercivity_report<T: Scalar>(
    u: &GridFunction<T>,
    spec: &ProblemSpec<T>,
    eps: [T; 3],
) -> Result<CoercivityReport<T>> {
    spec.grid.ensure_same(u.grid(), "u")?;
    if eps.iter().any(|e| !(*e > T::zero() && *e <= T::one())) {
        return Err(Error::Config("Young parameters must lie in (0, 1]".into()));
    }
    if !u.vanishes_on_boundary() {
        return Err(Error::Config("coercivity needs u = 0 on the boundary".into()));
    }
    let p0 = spec.p0()?;
    let part = reduced_partition(spec)?;
    let one = T::one();
    let q0 = p0 / (p0 - one);
    let w = nodal_weights(&spec.grid);
    let alpha = spec.alpha.finite_values()?;
    let alpha1 = spec.alpha1.finite_values()?;
    let k = spec.coefficients.all();
    let [e1, e2, e3] = eps;
    let eta = spec.eta;

    let grad = u.gradient();
    let mut energy = T::zero();
    let mut nonlinear = T::zero();
    for j in 0..u.len() {
        let a = u[j].abs();
        let g2 = grad.iter().fold(T::zero(), |s, d| s + d[j] * d[j]);
        if g2 != T::zero() {
            energy += w[j] * a.powf(p0 - T::lit(2.0)) * g2;
        }
        nonlinear += w[j] * spec.nonlinearity.eval(j, u[j]) * u[j];
    }
    let energy = spec.leading_factor * energy;
    let lhs = energy + nonlinear;

    let alpha1_sup = (0..u.len())
        .filter(|&j| part.region(j) == Region::Omega2)
        .map(|j| alpha1[j])
        .reduce(T::max);
    let mut absorbed = T::zero();
    let mut i0 = T::zero();
    let mut i1 = T::zero();
    let mut i2 = T::zero();
    let mut c3 = T::zero();
    let mut c5 = T::zero();
    let mut om3 = T::zero();
    for j in 0..u.len() {
        let a = u[j].abs();
        let up = if a == T::zero() { T::zero() } else { a.powf(p0) };
        match part.region(j) {
            Region::Omega1 => {
                let e = if k[0][j] > T::zero() { e1 } else { T::zero() }
                    + if k[1][j] > T::zero() { e3 } else { T::zero() };
                absorbed += e * w[j] * up;
                i0 += w[j] * k[0][j].powf(p0 / (p0 - alpha[j]));
                i1 += w[j] * k[1][j].powf(q0);
            }
            Region::Omega2 => {
                if k[2][j] > T::zero() {
                    absorbed += e2 * w[j] * up;
                }
                i2 += w[j] * k[2][j].powf(p0 / (p0 - alpha1[j]));
                c3 += w[j] * k[3][j];
            }
            Region::Omega3 => {
                om3 += w[j] * if a == T::zero() { T::zero() } else { a.powf(alpha[j]) };
                c5 += w[j] * k[5][j];
            }
        }
    }
    let c0_term = e1.powf(-p0 / eta) * i0;
    let c1_term = e3.powf(-p0 * q0) * i1;
    let c2_term = match alpha1_sup {
        Some(s) => e2.powf(-s / (p0 - s)) * i2,
        None => T::zero(),
    };
    let omega3_term = spec.floor * om3;
    let kconst = c0_term + c1_term + c2_term + c3 + c5;
    let bound = energy - absorbed + omega3_term - kconst;
    let slack = T::lit(MARGIN_TOLERANCE) * (one + lhs.abs() + bound.abs());
    let energy_margin = energy - absorbed;
    let seminorm_power = pn_energy(u, PnIndex::new((p0 - T::lit(2.0)) * q0, q0)?);
    Ok(CoercivityReport {
        lhs,
        bound,
        holds: lhs >= bound - slack,
        energy,
        absorbed,
        c0_term,
        c1_term,
        c2_term,
        c3_norm: c3,
        c5_norm: c5,
        omega3_term,
        k: kconst,
        energy_margin,
        coefficient_positive: energy_margin > T::zero() || u.is_zero(),
        seminorm_power,
        c5_measured: (seminorm_power > T::zero()).then(|| energy_margin / seminorm_power),
    })
}

/// Both sides of `|Σ_i ∫|u|^{p0-2} D_i u D_i v| <= [u]^{p0-1} (Σ_i ∫|D_i v|^{p0})^{1/p0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualBound<T> {
    pub lhs: T,
    pub rhs: T,
    /// `lhs <= rhs` exactly.
    pub holds: bool,
}

/// Dual bound with the exponent `p0` of a reduced problem.
pub fn dual_bound_check<T: Scalar>(
    u: &GridFunction<T>,
    v: &GridFunction<T>,
    spec: &ProblemSpec<T>,
) -> Result<DualBound<T>> {
    dual_bound(u, v, spec.p0()?)
}

/// Dual bound for an explicit exponent `p0 >= 2`.
pub fn dual_bound<T: Scalar>(u: &GridFunction<T>, v: &GridFunction<T>, p0: T) -> Result<DualBound<T>> {
    u.grid().ensure_same(v.grid(), "v")?;
    if !v.vanishes_on_boundary() {
        return Err(Error::Config("test function must vanish on the boundary".into()));
    }
    if !(p0 >= T::lit(2.0)) {
        return Err(Error::Config(format!("p0 = {p0} must be at least 2")));
    }
    let w = nodal_weights(u.grid());
    let du = u.gradient();
    let dv = v.gradient();
    let mut pairing = T::zero();
    let mut v_energy = T::zero();
    for (gu, gv) in du.iter().zip(&dv) {
        for j in 0..u.len() {
            let a = u[j].abs();
            let flux = if a == T::zero() && p0 > T::lit(2.0) {
                T::zero()
            } else {
                a.powf(p0 - T::lit(2.0)) * gu[j]
            };
            pairing += w[j] * flux * gv[j];
            if gv[j] != T::zero() {
                v_energy += w[j] * gv[j].abs().powf(p0);
            }
        }
    }
    let q0 = p0 / (p0 - T::one());
    let u_energy = pn_energy(u, PnIndex::new((p0 - T::lit(2.0)) * q0, q0)?);
    let lhs = pairing.abs();
    let rhs = u_energy.powf(T::one() / q0) * v_energy.powf(T::one() / p0);
    Ok(DualBound {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Weak residuals per test function and their maximum modulus.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakResidual<T> {
    pub values: Vec<T>,
    pub max: T,
}

/// `r(w) = Σ_i ∫ flux · D_i w + ∫ c(x,u) w - ∫ h w`, by default over all
/// interior hat functions.
pub fn weak_residual<T: Scalar>(
    u: &GridFunction<T>,
    spec: &ProblemSpec<T>,
    tests: Option<&[GridFunction<T>]>,
) -> Result<WeakResidual<T>> {
    let r = nodal_residual(spec, u)?;
    let values: Vec<T> = match tests {
        None => spec
            .grid
            .interior_nodes()
            .into_iter()
            .map(|k| r[k])
            .collect(),
        Some(ts) => ts
            .iter()
            .map(|t| {
                spec.grid.ensure_same(t.grid(), "test function")?;
                if !t.vanishes_on_boundary() {
                    return Err(Error::Config("test functions must vanish on the boundary".into()));
                }
                Ok(r.iter().zip(t.values()).fold(T::zero(), |s, (a, b)| s + *a * *b))
            })
            .collect::<Result<_>>()?,
    };
    let max = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    Ok(WeakResidual { values, max })
}

/// Named quantity of the membership diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic<T> {
    pub name: String,
    pub value: T,
}

/// Both sides of the log-moment bound applied to the log term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogBoundCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub epsilon: T,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipReport<T> {
    pub diagnostics: Vec<Diagnostic<T>>,
    pub log_bound: Option<LogBoundCheck<T>>,
}

impl<T: Scalar> MembershipReport<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        self.diagnostics
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.value)
    }

    /// Every diagnostic is finite.
    pub fn finite(&self) -> bool {
        self.diagnostics.iter().all(|d| d.value.is_finite())
    }
}

/// Norms certifying that `u` lies in the solution class of its problem.
pub fn membership_report<T: Scalar>(
    u: &GridFunction<T>,
    spec: &ProblemSpec<T>,
) -> Result<MembershipReport<T>> {
    spec.grid.ensure_same(u.grid(), "u")?;
    let w = nodal_weights(&spec.grid);
    let n = spec.analysis_dim();
    let mut out = Vec::new();
    let push = |out: &mut Vec<Diagnostic<T>>, name: String, value: T| {
        out.push(Diagnostic { name, value })
    };
    match spec.kind {
        ProblemKind::Reduced => {
            let p0 = spec.p0()?;
            let q0 = p0 / (p0 - T::one());
            let idx = PnIndex::new((p0 - T::lit(2.0)) * q0, q0)?;
            push(&mut out, "pn_seminorm".into(), crate::pn::pn_seminorm(u, idx));
            push(
                &mut out,
                "lebesgue_alpha".into(),
                luxemburg_values(&w, u.values(), spec.alpha.values())?,
            );
            Ok(MembershipReport {
                diagnostics: out,
                log_bound: None,
            })
        }
        ProblemKind::Main => {
            let p = spec.p.finite_values()?;
            let p1 = spec.p1();
            let crit = critical_exponents(p1, n)?;
            let q1 = crit.q0;
            let nt = T::from_count(n);
            let two = T::lit(2.0);
            let q1_field: Vec<Exponent<T>> = vec![Exponent::Finite(q1); u.len()];
            for (i, d) in u.gradient().iter().enumerate() {
                let flux: Vec<T> = (0..u.len())
                    .map(|j| {
                        let a = u[j].abs();
                        if a == T::zero() && p[j] > two {
                            T::zero()
                        } else {
                            a.powf(p[j] - two) * d[j]
                        }
                    })
                    .collect();
                push(
                    &mut out,
                    format!("flux_gradient_{i}"),
                    luxemburg_values(&w, &flux, &q1_field)?,
                );
            }
            let crit_field: Vec<Exponent<T>> = p
                .iter()
                .map(|pj| Exponent::Finite(nt * q1 * (*pj - T::one()) / (nt - q1)))
                .collect();
            push(
                &mut out,
                "lebesgue_critical".into(),
                luxemburg_values(&w, u.values(), &crit_field)?,
            );
            let derived = crate::exponent::derived_fields(&spec.p, p1, &spec.alpha, n)?;
            let g = derived.gamma.finite_values()?;
            let xi = spec.alpha.finite_values()?;
            let xg: Vec<Exponent<T>> = (0..u.len()).map(|j| Exponent::Finite(xi[j] + g[j])).collect();
            push(
                &mut out,
                "lebesgue_xi_gamma".into(),
                luxemburg_values(&w, u.values(), &xg)?,
            );
            let log_term: Vec<T> = (0..u.len())
                .map(|j| {
                    let t = u[j];
                    if t == T::zero() {
                        T::zero()
                    } else {
                        t.signed_pow(p[j] - two) * t.abs().ln()
                    }
                })
                .collect();
            push(
                &mut out,
                "log_term".into(),
                luxemburg_values(&w, &log_term, &q1_field)?,
            );

            let zeta = spec.p.map_finite(|pj| q1 * (pj - T::one()));
            let epsilon = p
                .iter()
                .map(|pj| {
                    let z = q1 * (*pj - T::one());
                    nt * z / (nt - q1) - z
                })
                .fold(T::infinity(), T::min);
            let consts = log_inequality_constants(&zeta, q1, epsilon, spec.grid.measure())?;
            let (lhs, rhs_int) = log_moment_sides(u, &zeta, q1, epsilon)?;
            let rhs = consts.m1 * rhs_int + consts.m2;
            Ok(MembershipReport {
                diagnostics: out,
                log_bound: Some(LogBoundCheck {
                    lhs,
                    rhs,
                    epsilon,
                    holds: lhs <= rhs,
                }),
            })
        }
    }
}
