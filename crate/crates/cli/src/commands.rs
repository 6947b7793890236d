//! One function per subcommand: config in, report out.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dolbeault_core::analysis::{
    named_witness_pairs, norm_sweep, operator_norm_sample, witness_suite, OperatorChoice, TestFamily, TestFunction,
    WITNESS_RESOLUTIONS,
};
use dolbeault_core::cauchy::{dyadic_targets, interior_targets, kernel_bound_check, weighted_cauchy_area_at, ClosedForm, ScalarField};
use dolbeault_core::domain::{FactorGrid, PlanarDomain, ProductDomain};
use dolbeault_core::error::Error;
use dolbeault_core::forms::{test_form, Form0q};
use dolbeault_core::homotopy::{homotopy_sweep, strictly_decreasing, vanishing_clause, AxisOperators, ROUNDOFF_FLOOR, NAMED_FORMS};
use dolbeault_core::solver::{solve, verify_solution, SolveConfig, SolveTrace, Verification, WeightMode};
use dolbeault_core::weights::{oracle_exponents, oracle_row, oracle_weights, LebesgueExponent};
use num_complex::Complex64;
use num_rational::Rational64;

use crate::config::*;
use crate::report::{norm, num, opt, Report};

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Numeric(Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(e) => write!(f, "invalid config: {e}"),
            RunError::Numeric(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numeric(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub type Run<T> = std::result::Result<T, RunError>;

fn usage(path: &str, e: Error) -> RunError {
    RunError::Usage(UsageError::new(path, e.to_string()))
}

/// Convergence order between two levels with errors `e0`, `e1` at sizes `n0 < n1`.
pub fn pair_order(n0: usize, e0: f64, n1: usize, e1: f64) -> f64 {
    (e0 / e1).ln() / (n1 as f64 / n0 as f64).ln()
}

/// Least-squares order of `errors` against the level sizes.
pub fn fitted_order(sizes: &[usize], errors: &[f64]) -> f64 {
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    -sxy / sxx
}

/// Order check with the rounding floor: a sweep whose errors all sit at or
/// below [`ROUNDOFF_FLOOR`] is converged.
pub fn order_ok(sizes: &[usize], errors: &[f64], min_order: f64) -> bool {
    errors.iter().all(|&e| e <= ROUNDOFF_FLOOR) || (errors.len() >= 2 && fitted_order(sizes, errors) >= min_order)
}

pub fn weights(cfg: &WeightsConfig) -> Run<Report> {
    let ps = match &cfg.p {
        Some(p) => nonempty("p", &exponents("p", p)?)?,
        None => oracle_exponents(),
    };
    let ss = match &cfg.s {
        Some(s) => nonempty("s", &rationals("s", s)?)?,
        None => oracle_weights(),
    };
    let mut r = Report::new(&["p", "s", "k", "k_modified", "k0", "k1", "gap", "k_brute", "k_modified_brute", "passed"]);
    for &p in &ps {
        for &s in &ss {
            let row = oracle_row(p, s);
            let w = &row.summary;
            r.push(vec![
                p.to_string(),
                w.s_string(),
                w.k.to_string(),
                w.k_modified.to_string(),
                w.k0.to_string(),
                w.k1.to_string(),
                w.gap.to_string(),
                row.k_brute.to_string(),
                row.k_modified_brute.to_string(),
                row.passed().to_string(),
            ]);
            r.check(row.passed(), || format!("p={p} s={}: {row:?}", w.s_string()));
        }
    }
    Ok(r)
}

fn closed_form(path: &str, name: &str) -> Run<ClosedForm> {
    match name {
        "one" | "1" => Ok(ClosedForm::One),
        "conjugate" | "conj(z)" => Ok(ClosedForm::Conjugate),
        other => Err(UsageError::new(path, format!("unknown closed form {other:?}; expected \"one\" or \"conjugate\"")).into()),
    }
}

pub fn cauchy(cfg: &CauchyConfig, seed: u64) -> Run<Report> {
    let levels = sweep("resolutions", &cfg.resolutions.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>())?;
    let forms = nonempty("forms", &cfg.forms)?
        .iter()
        .enumerate()
        .map(|(i, f)| closed_form(&format!("forms[{i}]"), f))
        .collect::<Run<Vec<_>>>()?;
    let ks = nonempty("k", &cfg.k)?;
    if let Some((i, k)) = ks.iter().enumerate().find(|(_, k)| !(0..=1).contains(*k)) {
        return Err(UsageError::new(format!("k[{i}]"), format!("closed forms hold for k in {{0, 1}}, got {k}")).into());
    }
    if cfg.targets == 0 {
        return Err(UsageError::new("targets", "must be positive").into());
    }
    if !(cfg.reach > 0.0 && cfg.reach < 1.0) {
        return Err(UsageError::new("reach", "must lie in (0, 1)").into());
    }
    let targets = interior_targets(cfg.targets, cfg.reach, seed);
    let mut r = if cfg.pointwise {
        Report::new(&[
            "form", "k", "nr", "nt", "z_re", "z_im", "value_re", "value_im", "exact_re", "exact_im", "error",
        ])
    } else {
        Report::new(&["form", "k", "nr", "nt", "targets", "max_error", "order"])
    };
    for &form in &forms {
        for &k in &ks {
            let mut errors = Vec::with_capacity(levels.len());
            for (li, &(nr, nt)) in levels.iter().enumerate() {
                let grid = FactorGrid::polar(Complex64::new(0.0, 0.0), 1.0, nr, nt).map_err(|e| usage("resolutions", e))?;
                let field = ScalarField::sample(&grid, |z| form.input(z));
                let values = weighted_cauchy_area_at(&field, k, &targets)?;
                let mut worst = 0.0f64;
                for (&z, v) in targets.iter().zip(&values) {
                    let exact = form.exact(z);
                    let err = (v - exact).norm();
                    worst = worst.max(err);
                    if cfg.pointwise {
                        r.push(vec![
                            form.label().into(),
                            k.to_string(),
                            nr.to_string(),
                            nt.to_string(),
                            num(z.re),
                            num(z.im),
                            num(v.re),
                            num(v.im),
                            num(exact.re),
                            num(exact.im),
                            num(err),
                        ]);
                    }
                }
                if !cfg.pointwise {
                    let order = if li == 0 { None } else { Some(pair_order(levels[li - 1].0, errors[li - 1], nr, worst)) };
                    r.push(vec![
                        form.label().into(),
                        k.to_string(),
                        nr.to_string(),
                        nt.to_string(),
                        targets.len().to_string(),
                        num(worst),
                        opt(order),
                    ]);
                }
                errors.push(worst);
            }
            let last = *errors.last().expect("nonempty sweep");
            let (nr, nt) = *levels.last().expect("nonempty sweep");
            r.check(last <= cfg.tolerance, || {
                format!("form={} k={k} nr={nr} nt={nt}: max error {last:e} > {:e}", form.label(), cfg.tolerance)
            });
            let sizes: Vec<usize> = levels.iter().map(|l| l.0).collect();
            if levels.len() >= 2 {
                r.check(order_ok(&sizes, &errors, cfg.min_order), || {
                    format!(
                        "form={} k={k}: fitted order {:.3} < {} (errors {errors:?})",
                        form.label(),
                        fitted_order(&sizes, &errors),
                        cfg.min_order
                    )
                });
            }
        }
    }
    Ok(r)
}

pub fn kernel(cfg: &KernelConfig) -> Run<Report> {
    let pairs = nonempty("pairs", &cfg.pairs)?;
    positive("radius", cfg.radius)?;
    if cfg.targets < 2 {
        return Err(UsageError::new("targets", "need at least two dyadic targets").into());
    }
    let fit = cfg.fit.unwrap_or(1);
    if fit == 0 || fit > cfg.targets {
        return Err(UsageError::new("fit", format!("must lie in 1..={}", cfg.targets)).into());
    }
    let targets: Vec<Complex64> = dyadic_targets(cfg.targets).into_iter().map(|z| z * cfg.radius).collect();
    let mut r = Report::new(&["alpha", "beta", "z", "value", "shape", "ratio", "excess", "role"]);
    for (i, &[alpha, beta]) in pairs.iter().enumerate() {
        let check = kernel_bound_check(cfg.radius, alpha, beta, &targets, fit - 1, cfg.slack)
            .map_err(|e| match e {
                Error::InvalidParameter(_) => usage(&format!("pairs[{i}]"), e),
                other => RunError::Numeric(other),
            })?;
        for (j, s) in check.samples.iter().enumerate() {
            let role = if j == check.fit_index { "fit" } else { "verify" };
            r.push(vec![
                num(alpha),
                num(beta),
                num(s.z.re),
                num(s.value),
                num(s.shape),
                num(s.ratio),
                num(s.ratio / check.fitted_constant),
                role.into(),
            ]);
        }
        r.check(check.passed, || {
            format!(
                "alpha={alpha} beta={beta}: worst excess {:.4} > slack {}",
                check.worst_excess, cfg.slack
            )
        });
    }
    Ok(r)
}

pub fn homotopy(cfg: &HomotopyConfig) -> Run<Report> {
    let resolutions = sweep("resolutions", &cfg.resolutions)?;
    let domain = product("domain", &cfg.domain, cfg.n, 1.0)?;
    let names: Vec<String> = match &cfg.forms {
        Some(f) => nonempty("forms", f)?,
        None => NAMED_FORMS.iter().map(|s| s.to_string()).collect(),
    };
    let forms = names
        .iter()
        .enumerate()
        .map(|(i, name)| test_form(name, cfg.n).map_err(|e| usage(&format!("forms[{i}]"), e)))
        .collect::<Run<Vec<_>>>()?;
    let mut r = Report::new(&[
        "form",
        "resolution",
        "residual",
        "residual_chain_form",
        "substitution_residual",
        "single_axis_residual",
        "scale",
        "degrees_ok",
        "descents_ok",
        "vanishing",
    ]);
    for form in &forms {
        let levels = homotopy_sweep(&domain, form, &resolutions)?;
        for l in &levels {
            let h = &l.homotopy;
            let vanishing = vanishing_for(&domain, form, l.resolution)?;
            r.push(vec![
                form.name.into(),
                l.resolution.to_string(),
                num(h.residual),
                num(h.residual_chain_form),
                num(h.substitution_residual),
                num(l.lemma35.residual),
                num(h.scale),
                h.degrees_ok.to_string(),
                h.descents_passed().to_string(),
                opt(vanishing),
            ]);
            let at = || format!("form={} resolution={}", form.name, l.resolution);
            r.check(h.degrees_ok, || format!("{}: degree bookkeeping failed", at()));
            r.check(h.descents_passed(), || format!("{}: descent check failed {:?}", at(), h.descents));
            let gap = (h.residual - h.residual_chain_form).abs();
            r.check(gap <= cfg.chain_tolerance, || format!("{}: chain form differs by {gap:e}", at()));
            r.check(vanishing.is_none_or(|v| v == 0.0), || format!("{}: boundary term {vanishing:?} is not zero", at()));
        }
        let scale = levels[0].homotopy.scale;
        let full: Vec<f64> = levels.iter().map(|l| l.homotopy.residual).collect();
        let single: Vec<f64> = levels.iter().map(|l| l.lemma35.residual).collect();
        let last = levels.last().expect("nonempty sweep");
        for (what, res) in [("residual", &full), ("single_axis_residual", &single)] {
            r.check(strictly_decreasing(res, scale), || format!("form={}: {what} not decreasing {res:?}", form.name));
            let top = *res.last().expect("nonempty sweep");
            r.check(top <= cfg.tolerance, || {
                format!("form={} resolution={}: {what} {top:e} > {:e}", form.name, last.resolution, cfg.tolerance)
            });
        }
    }
    Ok(r)
}

/// The boundary term for forms in `dz̄_1 … dz̄_q`, `None` otherwise.
fn vanishing_for(domain: &ProductDomain, form: &dolbeault_core::forms::TestForm, res: usize) -> Run<Option<f64>> {
    let r: Vec<_> = domain
        .factors()
        .iter()
        .map(|d| dolbeault_core::domain::FactorResolution::from_scalar(d, res))
        .collect();
    let grid = std::sync::Arc::new(dolbeault_core::domain::build_grid(domain, &r)?);
    let ops = AxisOperators::new(&grid);
    let omega = form.sample(&grid)?;
    match vanishing_clause(&ops, &omega) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Parsed `solve`/`sweep` config.
#[derive(Debug, Clone)]
pub struct SolvePlan {
    pub base: SolveConfig,
    pub omega: String,
    pub resolutions: Vec<usize>,
    pub drift_tolerance: f64,
    pub mode_gap_tolerance: Option<f64>,
    pub epsilons: Vec<Rational64>,
}

impl SolvePlan {
    pub fn parse(f: &SolveFile) -> Run<Self> {
        let resolutions = sweep("resolutions", &f.resolutions)?;
        let n = f.n;
        let p = f.p.exponent("p")?;
        let s = f.s.weight_vector("s", n)?;
        let mode = weight_mode("mode", &f.mode)?;
        let outer = product("outer", &f.outer, n, 1.0)?;
        let inner = product("inner", &f.inner, n, 0.5)?;
        let mut base = SolveConfig::new(outer, inner, p, s, mode, resolutions[0]).map_err(|e| usage("", e))?;
        base.epsilon = f.epsilon.rational("epsilon")?;
        base.validate().map_err(|e| usage("epsilon", e))?;
        let form = test_form(&f.omega, n).map_err(|e| usage("omega", e))?;
        if form.q == 0 {
            return Err(UsageError::new("omega", "needs a (0,q)-form with q >= 1").into());
        }
        let epsilons = match &f.epsilons {
            Some(e) => sweep("epsilons", &rationals("epsilons", e)?)?,
            None => vec![base.epsilon],
        };
        Ok(SolvePlan {
            base,
            omega: f.omega.clone(),
            resolutions,
            drift_tolerance: f.drift_tolerance,
            mode_gap_tolerance: f.mode_gap_tolerance,
            epsilons,
        })
    }

    fn run_level(&self, cfg: &SolveConfig) -> Run<(Form0q, Form0q, SolveTrace)> {
        let grid = cfg.grid()?;
        let ops = AxisOperators::new(&grid);
        let omega = test_form(&self.omega, cfg.outer.dim())?.sample(&grid)?;
        let (eta, trace) = solve(&ops, &omega, cfg)?;
        Ok((omega, eta, trace))
    }
}

/// Where `solve` writes the field dump and the stage trace.
#[derive(Debug, Clone, Default)]
pub struct Dumps {
    pub field: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

fn verification_cells(v: &Verification) -> Vec<String> {
    vec![
        num(v.residual_on_q),
        num(v.scale_on_q),
        norm(v.eta_norm),
        norm(v.omega_norm),
        opt(v.ratio),
        num(v.stage_residual),
        num(v.support_leak),
        num(v.theta_on_q),
        num(v.mode_gap),
        v.gamma_ok.to_string(),
    ]
}

const VERIFICATION_COLUMNS: [&str; 10] = [
    "residual_on_q",
    "scale_on_q",
    "eta_norm",
    "omega_norm",
    "ratio",
    "stage_residual",
    "support_leak",
    "theta_on_q",
    "mode_gap",
    "gamma_ok",
];

fn check_verification(r: &mut Report, v: &Verification, at: &str) {
    r.check(v.residual_passed(), || format!("{at}: residual {:e} on Q too large", v.residual_on_q));
    r.check(v.trace_passed(), || format!("{at}: stage checks failed {v:?}"));
}

pub fn solve_cmd(plan: &SolvePlan, dumps: &Dumps) -> Run<Report> {
    let mut columns = vec!["resolution"];
    columns.extend(VERIFICATION_COLUMNS);
    let mut r = Report::new(&columns);
    let mut norms = Vec::new();
    let finest = *plan.resolutions.last().expect("nonempty sweep");
    for &res in &plan.resolutions {
        let cfg = plan.base.with_resolution(res);
        let (omega, eta, trace) = plan.run_level(&cfg)?;
        let v = verify_solution(&eta, &omega, &trace, &cfg)?;
        let mut row = vec![res.to_string()];
        row.extend(verification_cells(&v));
        r.push(row);
        check_verification(&mut r, &v, &format!("resolution={res}"));
        norms.push(v.eta_norm.value());
        if res == finest {
            if let Some(tol) = plan.mode_gap_tolerance {
                r.check(v.mode_gap <= tol, || format!("resolution={res}: mode gap {:e} > {tol:e}", v.mode_gap));
            }
            write_dumps(dumps, &eta, &trace)?;
        }
    }
    if norms.len() >= 2 {
        let (a, b) = (norms[norms.len() - 2], norms[norms.len() - 1]);
        let drift = if a == b { 0.0 } else { (a - b).abs() / b.abs() };
        r.check(drift <= plan.drift_tolerance, || {
            format!("resolution={finest}: eta norm drift {drift:.4} > {}", plan.drift_tolerance)
        });
    }
    Ok(r)
}

fn write_form(path: &Path, form: &Form0q) -> Run<()> {
    let mut w = BufWriter::new(File::create(path)?);
    form.write_csv(&mut w)?;
    Ok(())
}

fn write_dumps(dumps: &Dumps, eta: &Form0q, trace: &SolveTrace) -> Run<()> {
    if let Some(path) = &dumps.field {
        write_form(path, eta)?;
    }
    if let Some(dir) = &dumps.trace {
        fs::create_dir_all(dir)?;
        for stage in &trace.stages {
            let j = stage.j;
            write_form(&dir.join(format!("omega_{j}.csv")), &stage.omega)?;
            write_form(&dir.join(format!("eta_{j}.csv")), &stage.eta)?;
            write_form(&dir.join(format!("theta_{j}.csv")), &stage.theta)?;
        }
    }
    Ok(())
}

fn inside_unit_polydisc(domain: &ProductDomain) -> bool {
    domain.factors().iter().all(|d| match *d {
        PlanarDomain::Disc { center, radius } => center.norm() + radius <= 1.0,
        PlanarDomain::Rect { lo, hi } => [lo, hi, Complex64::new(lo.re, hi.im), Complex64::new(hi.re, lo.im)]
            .iter()
            .all(|z| z.norm() <= 1.0),
    })
}

/// The ε-sweep: one solve per resolution, target norms for every ε.
pub fn sweep_cmd(plan: &SolvePlan) -> Run<Report> {
    if plan.base.mode != WeightMode::Full {
        return Err(UsageError::new("mode", "the epsilon sweep needs mode = \"full\"").into());
    }
    let mut columns = vec!["epsilon", "resolution", "target_weight"];
    columns.extend(VERIFICATION_COLUMNS);
    let mut r = Report::new(&columns);
    let monotone = inside_unit_polydisc(&plan.base.outer);
    for &res in &plan.resolutions {
        let (omega, eta, trace) = plan.run_level(&plan.base.with_resolution(res))?;
        let mut ratios = Vec::new();
        for &eps in &plan.epsilons {
            let mut cfg = plan.base.with_resolution(res);
            cfg.epsilon = eps;
            cfg.validate().map_err(|e| usage("epsilons", e))?;
            let v = verify_solution(&eta, &omega, &trace, &cfg)?;
            let target = cfg
                .target_weight()
                .components()
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let mut row = vec![eps.to_string(), res.to_string(), target];
            row.extend(verification_cells(&v));
            r.push(row);
            let at = format!("epsilon={eps} resolution={res}");
            check_verification(&mut r, &v, &at);
            r.check(v.ratio.is_none_or(f64::is_finite), || format!("{at}: norm ratio is infinite"));
            ratios.push(v.ratio);
        }
        if monotone {
            let ok = ratios.windows(2).all(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => b <= a * (1.0 + 1e-12),
                _ => true,
            });
            r.check(ok, || format!("resolution={res}: ratios not nonincreasing in epsilon {ratios:?}"));
        }
    }
    Ok(r)
}

fn test_function(spec: &FunctionSpec) -> (TestFunction, Option<Expect>) {
    match *spec {
        FunctionSpec::Monomial { a, b, expect } => (TestFunction::Monomial { a, b }, expect),
        FunctionSpec::Power { l, expect } => (TestFunction::Power { l }, expect),
        FunctionSpec::LogModified { e, expect } => (TestFunction::LogModified { e }, expect),
        FunctionSpec::Holomorphic { m, expect } => (TestFunction::Holomorphic { m }, expect),
    }
}

pub fn norms(cfg: &NormsConfig) -> Run<Report> {
    let p = cfg.p.exponent("p")?;
    let s = cfg.s.rational("s")?;
    let sf = *s.numer() as f64 / *s.denom() as f64;
    let domain = PlanarDomain::disc(Complex64::new(0.0, 0.0), positive("radius", cfg.radius)?).map_err(|e| usage("radius", e))?;
    let resolutions = match &cfg.resolutions {
        Some(r) => sweep("resolutions", r)?,
        None => WITNESS_RESOLUTIONS.to_vec(),
    };
    let functions = nonempty("functions", &cfg.functions)?;
    let mut r = Report::new(&["function", "p", "s", "resolution", "norm", "diverging"]);
    for spec in &functions {
        let (f, expect) = test_function(spec);
        let sw = norm_sweep(|z| f.eval(z), &domain, &resolutions, p, sf, f.profile())?;
        for (res, v) in sw.resolutions.iter().zip(&sw.values) {
            r.push(vec![
                f.label(),
                p.to_string(),
                s.to_string(),
                res.to_string(),
                norm(*v),
                sw.diverging.to_string(),
            ]);
        }
        if let Some(e) = expect {
            r.check(sw.diverging == (e == Expect::Diverges), || {
                format!("function={}: expected {e:?}, diverging={}", f.label(), sw.diverging)
            });
        }
    }
    Ok(r)
}

pub fn opnorm(cfg: &OpnormConfig, seed: u64) -> Run<Report> {
    let p: LebesgueExponent = cfg.p.exponent("p")?;
    let s = cfg.s.rational("s")?;
    let choice = match weight_mode("mode", &cfg.mode)? {
        WeightMode::Full => OperatorChoice::Full {
            epsilon: cfg.epsilon.rational("epsilon")?,
        },
        WeightMode::Modified => OperatorChoice::Modified,
    };
    let resolutions = sweep("resolutions", &cfg.resolutions)?;
    let domain = PlanarDomain::disc(Complex64::new(0.0, 0.0), positive("radius", cfg.radius)?).map_err(|e| usage("radius", e))?;
    let family = TestFamily::standard(&domain, cfg.bumps, seed);
    let mut r = Report::new(&["resolution", "weight", "member", "source", "target", "ratio"]);
    let mut maxima = Vec::new();
    for &res in &resolutions {
        let t = operator_norm_sample(&domain, res, &family, p, s, choice).map_err(|e| match e {
            Error::InvalidParameter(_) => usage("epsilon", e),
            other => RunError::Numeric(other),
        })?;
        for row in &t.rows {
            r.push(vec![
                res.to_string(),
                t.weight.to_string(),
                row.member.clone(),
                norm(row.source),
                norm(row.target),
                opt(row.ratio),
            ]);
        }
        r.push(vec![res.to_string(), t.weight.to_string(), "max".into(), String::new(), String::new(), num(t.max_ratio)]);
        r.check(!t.diverging && t.max_ratio.is_finite(), || format!("resolution={res}: image norm diverges"));
        maxima.push(t.max_ratio);
    }
    if maxima.len() >= 2 {
        let (a, b) = (maxima[maxima.len() - 2], maxima[maxima.len() - 1]);
        let drift = (a - b).abs() / a.max(b);
        r.check(drift <= cfg.drift_tolerance, || {
            format!("resolution={}: max ratio drift {drift:.4} > {}", resolutions.last().unwrap(), cfg.drift_tolerance)
        });
    }
    Ok(r)
}

pub fn witness(cfg: &WitnessConfig) -> Run<Report> {
    let pairs = match &cfg.pairs {
        Some(list) => nonempty("pairs", list)?
            .iter()
            .enumerate()
            .map(|(i, [p, s])| Ok((p.exponent(&format!("pairs[{i}][0]"))?, s.rational(&format!("pairs[{i}][1]"))?)))
            .collect::<Run<Vec<_>>>()?,
        None => named_witness_pairs(),
    };
    let mut r = Report::new(&[
        "p",
        "s",
        "k",
        "k_modified",
        "boundary_case",
        "function",
        "space",
        "expect_member",
        "diverging",
        "finest_norm",
        "passed",
    ]);
    for (p, s) in pairs {
        let w = witness_suite(p, s)?;
        for c in &w.checks {
            r.push(vec![
                p.to_string(),
                s.to_string(),
                w.k.to_string(),
                w.k_modified.to_string(),
                w.boundary_case.to_string(),
                c.function.clone(),
                c.space.clone(),
                c.expect_member.to_string(),
                c.sweep.diverging.to_string(),
                norm(*c.sweep.values.last().expect("nonempty sweep")),
                c.passed.to_string(),
            ]);
            r.check(c.passed, || {
                format!(
                    "p={p} s={s} function={} space={}: expected member={}, diverging={}",
                    c.function, c.space, c.expect_member, c.sweep.diverging
                )
            });
        }
    }
    Ok(r)
}
