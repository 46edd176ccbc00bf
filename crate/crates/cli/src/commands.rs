//! One function per subcommand. Each validates its whole config before
//! computing and returns both output forms.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use molcav::dressed::{adiabaticity_margin, dressed_energies, mixing_angle};
use molcav::hamiltonians::{DriveSpec, FamilyKind, SweepProfile};
use molcav::hilbert::basis_state;
use molcav::metrics::{feasibility, FeasibilityInput, FeasibilityReport};
use molcav::num::wrap_phase;
use molcav::optimizer::{
    branch_index, grid_scan, parameter_names, profile_from, propagated_phases, solve,
    target_phases, GridAxis, PhaseConditions, SolveOptions,
};
use molcav::protocols::{
    Device, GateSweeps, Layout, ProtocolOptions, ProtocolStep, PRINTED_CUBIC, PRINTED_QUADRATIC,
};
use molcav::register::{commutator_expectation, exact_vs_bosonic_gap};

use crate::emit::{Cell, Table};
use crate::error::{CliError, Result};

/// Result of a subcommand. `failure` is set when the computation finished
/// but missed a fidelity floor or did not converge.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub table: Table,
    pub record: Value,
    pub failure: Option<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn one() -> f64 {
    1.0
}

// dressed-scan

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub sweep: SweepProfile<f64>,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    1001
}

pub fn dressed_scan(cfg: &ScanConfig) -> Result<Output> {
    if cfg.points == 0 {
        return Err(invalid("points must be at least 1"));
    }
    if !(cfg.coupling > 0.0 && cfg.coupling.is_finite()) {
        return Err(invalid("coupling must be positive"));
    }
    let g = cfg.coupling;
    let dur = cfg.sweep.duration();
    let mut table = Table::new(&[
        "t",
        "delta",
        "theta",
        "e_plus_n0",
        "e_minus_n0",
        "e_plus_n1",
    ]);
    for k in 0..cfg.points {
        let t = if cfg.points == 1 {
            0.0
        } else {
            dur * k as f64 / (cfg.points - 1) as f64
        };
        let delta = cfg.sweep.value(t)?;
        let theta = mixing_angle(g, delta, 0)?;
        let (p0, m0) = dressed_energies(g, delta, 0);
        let (p1, _) = dressed_energies(g, delta, 1);
        table.push(vec![
            t.into(),
            delta.into(),
            theta.into(),
            p0.into(),
            m0.into(),
            p1.into(),
        ]);
    }
    let record = json!({
        "command": "dressed-scan",
        "coupling": g,
        "sweep": cfg.sweep,
        "adiabaticity_margin": {
            "n0": adiabaticity_margin(&cfg.sweep, g, 0),
            "n1": adiabaticity_margin(&cfg.sweep, g, 1),
        },
        "columns": table.columns,
        "rows": table_values(&table),
    });
    Ok(Output {
        table,
        record,
        failure: None,
    })
}

fn table_values(table: &Table) -> Value {
    Value::Array(
        table
            .rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|c| match c {
                            Cell::Num(x) => json!(x),
                            Cell::Int(i) => json!(i),
                            Cell::Text(s) => json!(s),
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

// run

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cutoffs {
    pub molecule: usize,
    pub cavity: usize,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Self {
            molecule: 3,
            cavity: 4,
        }
    }
}

/// Gate constructions expanded into protocol steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Macro {
    SingleQubit {
        qubit: usize,
        angle: f64,
        #[serde(default)]
        phase: f64,
    },
    Cz {
        control: usize,
        target: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub qubits: usize,
    #[serde(default)]
    pub cutoffs: Cutoffs,
    /// Logical bits of the input, most significant (qubit 0) first.
    #[serde(default)]
    pub input: Option<Vec<u8>>,
    #[serde(default)]
    pub options: ProtocolOptions<f64>,
    /// Sweeps used by macros; the reference set when absent.
    #[serde(default)]
    pub sweeps: Option<GateSweeps<f64>>,
    /// Protocol steps or macros, tagged by `kind`.
    #[serde(default)]
    pub sequence: Vec<Value>,
    #[serde(default = "default_floor")]
    pub min_fidelity: f64,
}

fn default_floor() -> f64 {
    0.99
}

const MACRO_KINDS: [&str; 2] = ["single_qubit", "cz"];

/// Expands macros and validates every step.
pub fn expand(cfg: &RunConfig) -> Result<Vec<ProtocolStep<f64>>> {
    let sweeps = match &cfg.sweeps {
        Some(s) => s.clone(),
        None => GateSweeps::reference()?,
    };
    let mut steps = Vec::new();
    for (i, item) in cfg.sequence.iter().enumerate() {
        let kind = item.get("kind").and_then(Value::as_str).unwrap_or_default();
        let ctx = |e: serde_json::Error| invalid(format!("sequence[{i}]: {e}"));
        if MACRO_KINDS.contains(&kind) {
            let m: Macro = serde_json::from_value(item.clone()).map_err(ctx)?;
            let expanded = match m {
                Macro::SingleQubit {
                    qubit,
                    angle,
                    phase,
                } => {
                    check_qubit(i, qubit, cfg.qubits)?;
                    sweeps.single_qubit(qubit, DriveSpec::rotation(angle, phase)?)
                }
                Macro::Cz { control, target } => {
                    check_qubit(i, control, cfg.qubits)?;
                    check_qubit(i, target, cfg.qubits)?;
                    if control == target {
                        return Err(invalid(format!(
                            "sequence[{i}]: control and target coincide"
                        )));
                    }
                    sweeps.controlled_z(control, target)
                }
            };
            steps.extend(expanded);
        } else {
            let step: ProtocolStep<f64> = serde_json::from_value(item.clone()).map_err(ctx)?;
            if let ProtocolStep::MolCavSwap { qubit, .. } = step {
                check_qubit(i, qubit, cfg.qubits)?;
            }
            steps.push(step);
        }
    }
    for (i, s) in steps.iter().enumerate() {
        s.validate()
            .map_err(|e| invalid(format!("expanded step {i}: {e}")))?;
    }
    Ok(steps)
}

fn check_qubit(item: usize, q: usize, k: usize) -> Result<()> {
    if q >= k {
        return Err(invalid(format!(
            "sequence[{item}]: qubit {q} out of range for {k} qubits"
        )));
    }
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<Output> {
    if cfg.qubits == 0 {
        return Err(invalid("need at least one qubit"));
    }
    if !(0.0..=1.0).contains(&cfg.min_fidelity) {
        return Err(invalid("min_fidelity must lie in [0, 1]"));
    }
    let input = cfg.input.clone().unwrap_or_else(|| vec![0; cfg.qubits]);
    if input.len() != cfg.qubits || input.iter().any(|&b| b > 1) {
        return Err(invalid(format!(
            "input must be {} bits of 0 or 1",
            cfg.qubits
        )));
    }
    let steps = expand(cfg)?;
    let layout = Layout::with_cutoffs(cfg.qubits, cfg.cutoffs.molecule, cfg.cutoffs.cavity)?;
    let device = Device::new(layout.clone(), cfg.options);
    let state = layout.encode::<f64>(&input)?;
    let (out, report) = device.run_sequence(&state, &steps)?;

    let achieved = report.achieved.entries();
    let target = report.target.entries();
    let dim = achieved.nrows();
    let mut table = Table::new(&[
        "row",
        "col",
        "achieved_re",
        "achieved_im",
        "target_re",
        "target_im",
    ]);
    for r in 0..dim {
        for c in 0..dim {
            let (a, t) = (achieved[[r, c]], target[[r, c]]);
            table.push(vec![
                r.into(),
                c.into(),
                a.re.into(),
                a.im.into(),
                t.re.into(),
                t.im.into(),
            ]);
        }
    }
    let matrix = |m: &molcav::Operator| -> Value {
        let e = m.entries();
        Value::Array(
            (0..e.nrows())
                .map(|r| {
                    Value::Array(
                        (0..e.ncols())
                            .map(|c| json!([e[[r, c]].re, e[[r, c]].im]))
                            .collect(),
                    )
                })
                .collect(),
        )
    };
    let space = layout.space();
    let populated: Vec<Value> = out
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm_sqr() > 1e-12)
        .map(|(i, z)| json!({"occupations": space.occupations(i), "probability": z.norm_sqr(), "phase": z.arg()}))
        .collect();
    let passed = report.process_fidelity >= cfg.min_fidelity;
    let record = json!({
        "command": "run",
        "qubits": cfg.qubits,
        "input": input,
        "steps": steps.len(),
        "process_fidelity": report.process_fidelity,
        "leakage": report.leakage,
        "phase_ledger": report.phase_ledger,
        "min_fidelity": cfg.min_fidelity,
        "passed": passed,
        "achieved": matrix(&report.achieved),
        "target": matrix(&report.target),
        "final_state": populated,
    });
    Ok(Output {
        table,
        record,
        failure: (!passed).then(|| {
            format!(
                "process fidelity {:.6} below floor {}",
                report.process_fidelity, cfg.min_fidelity
            )
        }),
    })
}

// optimize

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ControlledPhase,
    CubicPair,
}

impl Preset {
    /// Printed constants for the preset's family.
    pub fn reference(self) -> Vec<f64> {
        match self {
            Preset::ControlledPhase => {
                vec![
                    PRINTED_QUADRATIC.0,
                    PRINTED_QUADRATIC.1,
                    PRINTED_QUADRATIC.2,
                ]
            }
            Preset::CubicPair => vec![PRINTED_CUBIC.0, PRINTED_CUBIC.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub conditions: Option<PhaseConditions<f64>>,
    #[serde(default)]
    pub guess: Option<Vec<f64>>,
    /// Grid whose best cell seeds the solve when no guess is given.
    #[serde(default)]
    pub scan: Option<Vec<GridAxis<f64>>>,
    #[serde(default)]
    pub solve: SolveOptions<f64>,
    #[serde(default)]
    pub options: ProtocolOptions<f64>,
    #[serde(default = "yes")]
    pub verify: bool,
}

fn yes() -> bool {
    true
}

impl OptimizeConfig {
    pub fn conditions(&self) -> Result<PhaseConditions<f64>> {
        let c = match (&self.preset, &self.conditions) {
            (Some(Preset::ControlledPhase), None) => PhaseConditions::controlled_phase(),
            (Some(Preset::CubicPair), None) => PhaseConditions::cubic_pair(),
            (None, Some(c)) => c.clone(),
            _ => return Err(invalid("give exactly one of `preset` and `conditions`")),
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn optimize(cfg: &OptimizeConfig) -> Result<Output> {
    let conditions = cfg.conditions()?;
    let names = parameter_names(conditions.family)?;
    if let Some(g) = &cfg.guess {
        if !conditions.contains(g) {
            return Err(invalid(
                "guess must have one value per parameter, inside the bounds",
            ));
        }
    }
    if let Some(axes) = &cfg.scan {
        if axes.len() != names.len() || axes.iter().any(|a| a.points == 0) {
            return Err(invalid("scan needs one non-empty axis per parameter"));
        }
    }
    let mut scan_rows = Vec::new();
    let guess = match (&cfg.guess, &cfg.scan) {
        (Some(g), _) => g.clone(),
        (None, Some(axes)) => {
            scan_rows = grid_scan(axes, &conditions)?;
            scan_rows
                .iter()
                .filter(|r| conditions.contains(&r.params))
                .min_by(|a, b| a.objective.total_cmp(&b.objective))
                .map(|r| r.params.clone())
                .ok_or_else(|| invalid("no scan cell lies inside the bounds"))?
        }
        (None, None) => return Err(invalid("give a `guess` or a `scan`")),
    };
    let s = solve(&conditions, &guess, &cfg.solve)?;

    let mut columns: Vec<&str> = names.to_vec();
    columns.extend(["objective", "converged"]);
    let phase_cols: Vec<String> = (0..s.phases.len()).map(|k| format!("phase_{k}")).collect();
    let branch_cols: Vec<String> = (0..s.phases.len()).map(|k| format!("branch_{k}")).collect();
    columns.extend(phase_cols.iter().map(String::as_str));
    columns.extend(branch_cols.iter().map(String::as_str));
    let mut table = Table::new(&columns);
    let mut row: Vec<Cell> = s.params.iter().map(|&x| x.into()).collect();
    row.push(s.objective.into());
    row.push(usize::from(s.converged).into());
    row.extend(s.phases.iter().map(|&p| Cell::from(p)));
    row.extend(s.branches.iter().map(|&b| Cell::from(b)));
    table.push(row);

    let mut record = json!({
        "command": "optimize",
        "family": conditions.family,
        "parameters": names,
        "guess": guess,
        "params": s.params,
        "phases": s.phases,
        "residuals": s.residuals,
        "branches": s.branches,
        "objective": s.objective,
        "converged": s.converged,
        "start": s.start,
        "evaluations": s.evaluations,
        "seed": cfg.solve.seed,
    });
    if !scan_rows.is_empty() {
        record["scan"] = Value::Array(
            scan_rows
                .iter()
                .map(|r| json!({"params": r.params, "objective": r.objective}))
                .collect(),
        );
    }
    if let Some(preset) = cfg.preset {
        let reference = preset.reference();
        let reference_branches: Vec<usize> = target_phases(&reference, &conditions)?
            .into_iter()
            .map(branch_index)
            .collect();
        let within = s
            .params
            .iter()
            .zip(&reference)
            .all(|(x, r)| (x - r).abs() <= 0.05 * r.abs());
        record["reference"] = json!({
            "params": reference,
            "branches": reference_branches,
            "within_5_percent": within,
            "alternate_branch": s.branches != reference_branches,
        });
    }
    if cfg.verify && !s.phases.is_empty() {
        record["check"] = verify(&s.params, &s.phases, &conditions, &cfg.options)?;
    }
    Ok(Output {
        table,
        record,
        failure: (!s.converged).then(|| {
            format!(
                "no restart reached the tolerance; best objective {:e}",
                s.objective
            )
        }),
    })
}

/// Propagated phases next to the quadrature ones, and for the quadratic
/// family the controlled-phase gate fidelity.
fn verify(
    params: &[f64],
    fast: &[f64],
    c: &PhaseConditions<f64>,
    options: &ProtocolOptions<f64>,
) -> Result<Value> {
    let slow = propagated_phases(params, c, options)?;
    let profile = profile_from(c.family, params)?;
    let mut agree = true;
    let mut rows = Vec::new();
    for ((t, &f), &p) in c.targets.iter().zip(fast).zip(&slow) {
        let margin = adiabaticity_margin(&profile, c.coupling, t.n);
        let gap = wrap_phase(f - p).abs();
        agree &= gap <= margin;
        rows.push(json!({"quadrature": f, "propagated": p, "gap": gap, "margin": margin}));
    }
    let mut check = json!({"phases": rows, "agree_within_margin": agree});
    if c.family == FamilyKind::QuadraticOffset {
        let layout = Layout::register(0)?;
        let device = Device::new(layout.clone(), *options);
        let vac = basis_state::<f64>(layout.space(), &[0, 0])?;
        match device.conditional_phase(&vac, &profile, c.coupling) {
            Ok((_, report)) => {
                check["cz_fidelity"] = json!(report.process_fidelity);
                check["cz_leakage"] = json!(report.leakage);
            }
            Err(e) => check["cz_error"] = json!(e.to_string()),
        }
    }
    Ok(check)
}

// feasibility

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityConfig {
    pub input: FeasibilityInput<f64>,
}

pub fn feasibility_budget(cfg: &FeasibilityConfig) -> Result<Output> {
    let cpb = feasibility(&cfg.input)?;
    let transmon = feasibility(&cfg.input.transmon())?;
    let mut table = Table::new(&[
        "preset",
        "swap_ops_before_decoherence",
        "gate_to_t2_ratio",
        "photon_gates",
    ]);
    let row = |name: &str, r: &FeasibilityReport<f64>| {
        vec![
            Cell::from(name),
            r.swap_ops_before_decoherence.into(),
            r.gate_to_t2_ratio.into(),
            r.photon_gates.into(),
        ]
    };
    table.push(row("cpb", &cpb));
    table.push(row("transmon", &transmon));
    let record = json!({
        "command": "feasibility",
        "input": cfg.input,
        "cpb": cpb,
        "transmon": transmon,
    });
    Ok(Output {
        table,
        record,
        failure: None,
    })
}

// oracle-compare

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_molecules")]
    pub molecules: Vec<usize>,
    #[serde(default = "one")]
    pub coupling: f64,
    /// Store sweep; the reference molecular sweep when absent.
    #[serde(default)]
    pub sweep: Option<SweepProfile<f64>>,
    #[serde(default)]
    pub options: ProtocolOptions<f64>,
}

fn default_molecules() -> Vec<usize> {
    vec![4, 6, 8]
}

pub fn oracle_compare(cfg: &OracleConfig) -> Result<Output> {
    if cfg.molecules.is_empty() {
        return Err(invalid("molecules must list at least one ensemble size"));
    }
    if let Some(&n) = cfg
        .molecules
        .iter()
        .find(|&&n| !(3..=molcav::register::MAX_DICKE_MOLECULES).contains(&n))
    {
        return Err(invalid(format!(
            "ensemble size {n} outside 3..={}",
            molcav::register::MAX_DICKE_MOLECULES
        )));
    }
    if !(cfg.coupling > 0.0 && cfg.coupling.is_finite()) {
        return Err(invalid("coupling must be positive"));
    }
    let sweep = match &cfg.sweep {
        Some(s) => s.clone(),
        None => GateSweeps::<f64>::reference()?.molecular,
    };
    let mut table = Table::new(&["molecules", "commutator", "one_minus_two_over_n", "gap"]);
    let mut gaps = Vec::new();
    for &n in &cfg.molecules {
        let comm = commutator_expectation::<f64>(n)?;
        let gap = exact_vs_bosonic_gap(n, &sweep, cfg.coupling, &cfg.options)?;
        gaps.push(gap);
        table.push(vec![
            n.into(),
            comm.into(),
            (1.0 - 2.0 / n as f64).into(),
            gap.into(),
        ]);
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let record = json!({
        "command": "oracle-compare",
        "coupling": cfg.coupling,
        "sweep": sweep,
        "columns": table.columns,
        "rows": table_values(&table),
        "gap_decreasing": monotone,
    });
    Ok(Output {
        table,
        record,
        failure: None,
    })
}
