use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use seqlocal_core::corr::{ConstraintReport, Scenario, SequentialCorrelation, ValidationReport, DEFAULT_TOL};
use seqlocal_core::optimize::{
    default_mixing, hidden_nonlocality_demo, membership_tol_with, seesaw_chsh, TolOracle, GILBERT_TOL, SEESAW_TOL,
};
use seqlocal_core::polytope::{
    compose_extreme_point, count_extreme_points, is_extreme_in_p, membership_p, membership_q, sample_q, sample_tol,
    ExtremalityCertificate, ExtremePointSpec, MembershipVerdict, DETERMINISTIC_EXTREME_POINTS,
    SINGLE_STEP_VERTEX_COUNT,
};
use seqlocal_core::quantum::{simulate as run_strategy, DensityMatrix, SequentialStrategy};
use seqlocal_core::witness::{canonical_strategy, concatenated_chsh_l, WitnessReport};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// What a subcommand produced: its JSON line, a human summary and whether
/// the verdict was positive.
pub struct Output {
    pub json: String,
    pub summary: String,
    pub verdict: bool,
}

impl Output {
    fn new<T: Serialize>(value: &T, summary: String, verdict: bool) -> Result<Self, String> {
        Ok(Self {
            json: serde_json::to_string(value).map_err(|e| e.to_string())?,
            summary,
            verdict,
        })
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let mut text = String::new();
    let read = if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|s| text = s)
    };
    read.map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn core<T>(r: seqlocal_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

#[derive(Serialize)]
struct ValidateOutput {
    ok: bool,
    tol: f64,
    scenario: Scenario,
    validation: ValidationReport,
    same_step_no_signaling: ConstraintReport,
    arrow_of_time: ConstraintReport,
}

pub fn validate(file: &Path, tol: Option<f64>) -> Result<Output, String> {
    let corr: SequentialCorrelation = read_json(file)?;
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let validation = corr.validate(tol);
    let out = ValidateOutput {
        ok: validation.ok,
        tol,
        scenario: corr.scenario(),
        validation,
        same_step_no_signaling: corr.check_same_step_no_signaling(tol),
        arrow_of_time: corr.check_arrow_of_time(tol),
    };
    let mut s = String::new();
    let _ = writeln!(s, "valid: {}", yes_no(out.ok));
    let _ = writeln!(s, "  negativity:              {:e}", out.validation.max_negativity);
    let _ = writeln!(
        s,
        "  normalization residual:  {:e}",
        out.validation.max_normalization_residual
    );
    let _ = writeln!(
        s,
        "  same-step no-signaling:  {:e}",
        out.same_step_no_signaling.max_residual
    );
    let _ = writeln!(s, "  arrow of time:           {:e}", out.arrow_of_time.max_residual);
    Output::new(&out, s, out.ok)
}

#[derive(Serialize)]
struct MemberOutput {
    polytope: &'static str,
    tol: f64,
    #[serde(flatten)]
    verdict: MembershipVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    gilbert: Option<GilbertSummary>,
}

#[derive(Serialize)]
struct GilbertSummary {
    distance_upper_bound: f64,
    iterations: usize,
    separating_direction: Option<Vec<f64>>,
}

fn member_output(
    polytope: &'static str,
    tol: f64,
    verdict: MembershipVerdict,
    gilbert: Option<GilbertSummary>,
) -> Result<Output, String> {
    let mut s = String::new();
    let _ = writeln!(s, "{polytope} member: {}", yes_no(verdict.member));
    let _ = writeln!(s, "  margin: {:e}", verdict.margin);
    if let Some(v) = &verdict.violated {
        let _ = writeln!(s, "  violated: {v}");
    }
    if let Some(g) = &gilbert {
        let _ = writeln!(
            s,
            "  distance bound {:e} after {} iterations",
            g.distance_upper_bound, g.iterations
        );
    }
    let member = verdict.member;
    Output::new(
        &MemberOutput {
            polytope,
            tol,
            verdict,
            gilbert,
        },
        s,
        member,
    )
}

pub fn member_p(file: &Path, tol: Option<f64>) -> Result<Output, String> {
    let corr: SequentialCorrelation = read_json(file)?;
    let tol = tol.unwrap_or(DEFAULT_TOL);
    member_output("P", tol, membership_p(&corr, tol), None)
}

pub fn member_q(file: &Path, tol: Option<f64>) -> Result<Output, String> {
    let corr: SequentialCorrelation = read_json(file)?;
    let tol = tol.unwrap_or(DEFAULT_TOL);
    member_output("Q", tol, membership_q(&corr, tol), None)
}

pub fn member_tol(file: &Path, tol: Option<f64>, iters: usize) -> Result<Output, String> {
    let corr: SequentialCorrelation = read_json(file)?;
    let tol = tol.unwrap_or(GILBERT_TOL);
    let (verdict, run) = core(membership_tol_with(&corr, &TolOracle::new(), tol, iters))?;
    let gilbert = GilbertSummary {
        distance_upper_bound: run.distance_upper_bound,
        iterations: run.iterations,
        separating_direction: run.separating_direction,
    };
    member_output("TOL", tol, verdict, Some(gilbert))
}

#[derive(Serialize)]
struct ExtremalOutput {
    extreme: bool,
    agree: bool,
    certificate: ExtremalityCertificate,
    q: MembershipVerdict,
    tensor: SequentialCorrelation,
}

pub fn extremal(spec_file: &Path, tol: Option<f64>) -> Result<Output, String> {
    let spec: ExtremePointSpec = read_json(spec_file)?;
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let tensor = core(compose_extreme_point(&spec))?;
    let certificate = core(is_extreme_in_p(&tensor, tol))?;
    let out = ExtremalOutput {
        extreme: certificate.is_extreme(),
        agree: certificate.agree(),
        q: membership_q(&tensor, tol),
        certificate,
        tensor,
    };
    let mut s = String::new();
    let _ = writeln!(s, "extreme in P: {}", yes_no(out.extreme));
    let _ = writeln!(s, "  structural: {}", yes_no(out.certificate.structural));
    let _ = writeln!(
        s,
        "  tight rank: {} of {}",
        out.certificate.rank, out.certificate.ambient
    );
    let _ = writeln!(s, "  in Q: {}", yes_no(out.q.member));
    if let Some(v) = &out.q.violated {
        let _ = writeln!(s, "  Q violation: {v}");
    }
    Output::new(&out, s, out.extreme)
}

pub fn witness(file: &Path, steps: Option<usize>, tol: Option<f64>) -> Result<Output, String> {
    let corr: SequentialCorrelation = read_json(file)?;
    let l = steps.unwrap_or(corr.scenario().steps());
    let value = core(concatenated_chsh_l(&corr, l, tol.unwrap_or(DEFAULT_TOL)))?;
    let report = core(WitnessReport::from_value(value, l))?;
    let mut s = String::new();
    let _ = writeln!(s, "concatenated CHSH (L={l}): {:.10}", report.value);
    let _ = writeln!(s, "  local bound:            {:.10}", report.bounds.local);
    let _ = writeln!(s, "  qubit projective bound: {:.10}", report.bounds.qubit_projective);
    let _ = writeln!(s, "  quantum bound:          {:.10}", report.bounds.quantum);
    let _ = writeln!(s, "  class: {}", report.class);
    Output::new(&report, s, true)
}

pub fn simulate(file: Option<&Path>, canonical: Option<usize>, emit_strategy: bool) -> Result<Output, String> {
    let strategy: SequentialStrategy = match (file, canonical) {
        (_, Some(l)) => core(canonical_strategy(l))?,
        (Some(f), None) => read_json(f)?,
        (None, None) => return Err("either a strategy file or --canonical is required".into()),
    };
    let [da, db] = strategy.local_dims();
    if emit_strategy {
        let s = format!("strategy: {} steps, local dimensions {da}x{db}\n", strategy.steps());
        return Output::new(&strategy, s, true);
    }
    let corr = core(run_strategy(&strategy))?;
    let s = format!(
        "simulated {} steps on local dimensions {da}x{db}: {} probabilities\n",
        strategy.steps(),
        corr.probabilities().len()
    );
    Output::new(&corr, s, true)
}

pub fn seesaw(
    state: &Path,
    seed: u64,
    iters: usize,
    dims: Option<&[usize]>,
    tol: Option<f64>,
) -> Result<Output, String> {
    let rho: DensityMatrix = read_json(state)?;
    let dims = match dims {
        Some(&[a, b]) => [a, b],
        Some(other) => return Err(format!("--dims needs two values, got {}", other.len())),
        None => {
            let d = (rho.dim() as f64).sqrt().round() as usize;
            if d * d != rho.dim() {
                return Err(format!("state dimension {} is not a square; pass --dims", rho.dim()));
            }
            [d, d]
        }
    };
    let r = core(seesaw_chsh(&rho, dims, seed, iters, tol.unwrap_or(SEESAW_TOL)))?;
    let s = format!(
        "seesaw CHSH: {:.10} after {} iterations (seed {seed})\n",
        r.value, r.iterations
    );
    Output::new(&r, s, true)
}

pub enum Sampled {
    Q,
    Tol,
}

pub fn sample(which: Sampled, n: usize, seed: u64) -> Result<Output, String> {
    let (name, corr) = match which {
        Sampled::Q => ("Q", core(sample_q(seed, n))?),
        Sampled::Tol => ("TOL", core(sample_tol(seed, n))?),
    };
    let s = format!("mixture of {n} {name} vertices (seed {seed})\n");
    Output::new(&corr, s, true)
}

#[derive(Serialize)]
struct CountOutput {
    scenario: Scenario,
    count: u64,
    deterministic_first: u64,
    pr_first: u64,
    single_step_vertices: u64,
}

pub fn count_extremal() -> Result<Output, String> {
    let scenario = Scenario::binary(2);
    let count = core(count_extreme_points(scenario))?;
    let out = CountOutput {
        scenario,
        count,
        deterministic_first: DETERMINISTIC_EXTREME_POINTS,
        pr_first: count - DETERMINISTIC_EXTREME_POINTS,
        single_step_vertices: SINGLE_STEP_VERTEX_COUNT,
    };
    let s = format!(
        "extreme points: {count}\n  deterministic first step: {}\n  PR first step: {}\n",
        out.deterministic_first, out.pr_first
    );
    Output::new(&out, s, true)
}

pub fn hidden_nonlocality(d: usize, seed: u64, mixing: Option<f64>) -> Result<Output, String> {
    let mixing = mixing.unwrap_or_else(|| default_mixing(d));
    let r = core(hidden_nonlocality_demo(d, mixing, seed))?;
    let mut s = String::new();
    let _ = writeln!(s, "Werner state d={d}, mixing {mixing}");
    let _ = writeln!(
        s,
        "  first step: max CHSH {:.10}, local: {}",
        r.first_step_max_chsh,
        yes_no(r.first_step_local.member)
    );
    let _ = writeln!(s, "  both filters pass with probability {:.10}", r.pass_probability);
    let _ = writeln!(
        s,
        "  after filtering: CHSH {:.10}, local: {}",
        r.post_filter_chsh,
        yes_no(r.post_filter_local.member)
    );
    let _ = writeln!(s, "  sequential tensor in Q: {}", yes_no(r.sequential_local.member));
    Output::new(&r, s, true)
}
