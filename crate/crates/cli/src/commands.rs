//! constraints, brackets, evolve and gen.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use teleham_core::bundle::FieldBundle;
use teleham_core::dynamics::{self, Battery, Multipliers, PhaseState, VectorForm};
use teleham_core::fields::{self, FormField, PeriodicGrid, VectorFieldOnGrid};
use teleham_core::smearing::{ScalarSpec, VectorSpec};

use crate::error::{CliError, CliResult};
use crate::report::{grid_label, Report, ReportRow};
use crate::variational::order_row;

/// `N` or `N1xN2xN3` on the unit torus.
pub fn parse_grid(s: &str) -> CliResult<PeriodicGrid> {
    let parts: Vec<&str> = s.split('x').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad grid `{s}`"))))
        .collect::<CliResult<_>>()?;
    let n = match nums.as_slice() {
        [n] => [*n; 3],
        [a, b, c] => [*a, *b, *c],
        _ => return Err(CliError::Usage(format!("grid must be N or N1xN2xN3, got `{s}`"))),
    };
    PeriodicGrid::unit(n).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_bundle(path: &Path) -> CliResult<FieldBundle> {
    Ok(FieldBundle::read(path)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn max_density(state: &PhaseState) -> CliResult<f64> {
    Ok(dynamics::constraint_densities(state)?
        .iter()
        .flat_map(|x| x.iter())
        .fold(0.0f64, |m, v| m.max(v.abs())))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub const SECOND_ROUTE_TOL: f64 = 1e-12;

/// `S(M)` and `V(M⃗)` on a bundle, each cross-checked by a second
/// quadrature; optionally dumps the densities as a bundle.
pub fn constraints(bundle: &Path, scalar: &ScalarSpec, vector: &VectorSpec, out: Option<&Path>, tol: f64) -> CliResult<Report> {
    let b = read_bundle(bundle)?;
    let state = b.state()?;
    let grid = b.grid;
    let g = grid_label(&grid);
    let m = scalar.field(grid);
    let mv = vector.field(grid);
    let sc = dynamics::scalar_constraint(&state, &m)?;
    let vc = dynamics::vector_constraint(&state, &mv)?;
    let carrier = Multipliers {
        lapse: m.clone(),
        shift: VectorFieldOnGrid::zero(grid),
    };
    let s_direct = dynamics::hamiltonian_direct(&state, &carrier)?;
    let v_lie = dynamics::vector_constraint_form(&state, &mv, VectorForm::LieTheta)?;

    let mut r = Report::new("constraints");
    let (ss, vs) = (scalar.to_string(), vector.to_string());
    r.push(ReportRow::new("constraints", format!("S({ss})"), b.seed, &g, sc.value, tol).with_value(sc.value));
    r.push(ReportRow::new("constraints", format!("V({vs})"), b.seed, &g, vc.value, tol).with_value(vc.value));
    r.push(ReportRow::new("constraints", format!("S({ss}) second route"), b.seed, &g, rel(sc.value, s_direct), SECOND_ROUTE_TOL).with_value(s_direct));
    r.push(ReportRow::new("constraints", format!("V({vs}) second route"), b.seed, &g, rel(vc.value, v_lie), SECOND_ROUTE_TOL).with_value(v_lie));

    if let Some(path) = out {
        let lapse = FormField::from_data(grid, 0, sc.density.clone())?;
        let shift = VectorFieldOnGrid::from_data(grid, vc.density.iter().flat_map(|v| *v).collect())?;
        let desc = format!("constraint densities (scalar in lapse, vector in shift) of: {}", b.description);
        let dump = FieldBundle::from_parts(b.theta.clone(), b.p.clone(), lapse, shift, b.seed, &desc)?;
        write_file(path, &dump.to_bytes())?;
    }
    Ok(r)
}

/// Default smearings of the closure study.
pub const CLOSURE_SCALAR: &str = "const:1+cos:1:1:0.5";
pub const CLOSURE_SCALAR2: &str = "cos:2:1:1+cos:3:1:0.5";
pub const CLOSURE_VECTOR: &str = "cos:1:1:1:1+e2:0.3+cos:2:1:1:3";
pub const CLOSURE_VECTOR2: &str = "cos:3:1:0.2:1+cos:1:1:1:2";
pub const CLOSURE_ORDER: f64 = 1.8;
/// The frozen-metric control counts as non-convergent below this order.
pub const FROZEN_ORDER_CEILING: f64 = 1.0;

pub struct ClosureSetup {
    pub amplitude: f64,
    pub scalars: [ScalarSpec; 2],
    pub vectors: [VectorSpec; 2],
}

impl Default for ClosureSetup {
    fn default() -> Self {
        Self {
            amplitude: 0.3,
            scalars: [CLOSURE_SCALAR.parse().unwrap(), CLOSURE_SCALAR2.parse().unwrap()],
            vectors: [CLOSURE_VECTOR.parse().unwrap(), CLOSURE_VECTOR2.parse().unwrap()],
        }
    }
}

pub fn closure_at(n: usize, seed: u64, setup: &ClosureSetup) -> CliResult<dynamics::ClosureResiduals> {
    let grid = PeriodicGrid::cube(n);
    let s = PhaseState::random(grid, setup.amplitude, 1, seed)?;
    let [m, m2] = [0, 1].map(|i| setup.scalars[i].field(grid));
    let [v, v2] = [0, 1].map(|i| setup.vectors[i].field(grid));
    Ok(dynamics::bracket_closure(&s, &m, &m2, &v, &v2)?)
}

/// Closure residuals on each grid and the orders between successive grids.
pub fn brackets(grids: &[usize], seed: u64, setup: &ClosureSetup) -> CliResult<Report> {
    if grids.len() < 2 {
        return Err(CliError::Usage("brackets needs at least two grids".into()));
    }
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("grids must be strictly increasing".into()));
    }
    let res: Vec<_> = grids.iter().map(|&n| closure_at(n, seed, setup)).collect::<CliResult<_>>()?;
    let mut r = Report::new("brackets");
    let pick = |c: &dynamics::ClosureResiduals| [("r1", c.r1), ("r2", c.r2), ("r3", c.r3), ("r2-frozen", c.r2_frozen)];
    for (n, c) in grids.iter().zip(&res) {
        let g = format!("{n}x{n}x{n}");
        for (name, v) in pick(c) {
            r.push(ReportRow::new("brackets", format!("{name}/value"), seed, &g, v, f64::INFINITY).with_value(v));
        }
    }
    for (w, cw) in grids.windows(2).zip(res.windows(2)) {
        let pair = format!("{}/{}", w[0], w[1]);
        let ratio = w[1] as f64 / w[0] as f64;
        for ((name, a), (_, b)) in pick(&cw[0]).into_iter().zip(pick(&cw[1])).take(3) {
            r.push(order_row("brackets", format!("{name}/order"), seed, &pair, a, b, ratio, CLOSURE_ORDER));
        }
        let frozen = fields::convergence_order(cw[0].r2_frozen.abs(), cw[1].r2_frozen.abs(), ratio);
        r.push(
            ReportRow::new("brackets", "r2-frozen/non-convergence", seed, &pair, frozen.max(0.0), FROZEN_ORDER_CEILING)
                .with_order(frozen),
        );
    }
    // {S(M), S(M)} and its structure vector vanish identically
    let grid = PeriodicGrid::cube(grids[0]);
    let s = PhaseState::random(grid, setup.amplitude, 1, seed)?;
    let m = setup.scalars[0].field(grid);
    let v = setup.vectors[0].field(grid);
    let same = dynamics::bracket_closure(&s, &m, &m, &v, &v)?;
    r.push(ReportRow::new("brackets", "exact/r2 with equal smearings", seed, &grid_label(&grid), same.r2, 0.0).with_value(same.r2));
    r.push(ReportRow::new("brackets", "exact/r1 with equal smearings", seed, &grid_label(&grid), same.r1, 0.0).with_value(same.r1));
    Ok(r)
}

pub struct EvolveOptions {
    pub dt: Option<f64>,
    pub steps: usize,
    pub snapshot_every: usize,
    pub halving: bool,
    pub tol: Option<f64>,
}

/// Lower bound of the RK4 self-convergence ratio under dt halving.
pub const RK4_RATIO_MIN: f64 = 12.0;

fn drift_table(report: &dynamics::ConstraintReport) -> String {
    let mut s = String::from("step,time");
    for l in &report.labels {
        let _ = write!(s, ",{l}");
    }
    s.push_str(",step_change\n");
    for row in &report.rows {
        let _ = write!(s, "{},{:e}", row.step, row.time);
        for v in &row.values {
            let _ = write!(s, ",{v:e}");
        }
        let _ = writeln!(s, ",{:e}", row.step_change);
    }
    s
}

/// RK4 with the bundle's lapse and shift. Drift of each monitored
/// functional is judged against `tol`, by default ten times the initial
/// max constraint density (at least 1e-12).
pub fn evolve(bundle: &Path, opts: &EvolveOptions, out: Option<&Path>) -> CliResult<Report> {
    let b = read_bundle(bundle)?;
    let state = b.state()?;
    let mult = b.multipliers()?;
    let grid = b.grid;
    let g = grid_label(&grid);
    let dt = opts.dt.unwrap_or_else(|| 0.5 * dynamics::cfl_limit(&grid, &mult));
    let initial = max_density(&state)?;
    let tol = opts.tol.unwrap_or((10.0 * initial).max(1e-12));
    let battery = Battery::standard(grid);
    let tr = dynamics::evolve(&state, &mult, dt, opts.steps, opts.snapshot_every, &battery)?;

    let mut r = Report::new("evolve");
    let finals = &tr.report.rows.last().expect("initial row").values;
    for ((label, d), v) in tr.report.labels.iter().zip(tr.report.drift()).zip(finals) {
        r.push(ReportRow::new("evolve", format!("drift/{label}"), b.seed, &g, d, tol).with_value(*v));
    }
    r.push(ReportRow::new("evolve", "initial max density", b.seed, &g, initial, f64::INFINITY).with_value(initial));
    let last = max_density(&tr.state)?;
    r.push(ReportRow::new("evolve", "final max density", b.seed, &g, last, f64::INFINITY).with_value(last));

    if opts.halving {
        let run = |h: f64, n: usize| -> CliResult<PhaseState> {
            let mut s = state.clone();
            for _ in 0..n {
                s = dynamics::step_rk4(&s, &mult, h)?;
            }
            Ok(s)
        };
        let y1 = run(dt, opts.steps)?;
        let y2 = run(dt / 2.0, 2 * opts.steps)?;
        let y4 = run(dt / 4.0, 4 * opts.steps)?;
        let (coarse, fine) = (y1.max_diff(&y2), y2.max_diff(&y4));
        let ratio = coarse / fine;
        r.push(
            ReportRow::new("evolve", "rk4 endpoint ratio", b.seed, &g, fine, coarse / RK4_RATIO_MIN)
                .with_order(ratio.log2())
                .with_value(ratio),
        );
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        write_file(&dir.join("drift.csv"), drift_table(&tr.report).as_bytes())?;
        for (step, s) in &tr.snapshots {
            let desc = format!("step {step} dt {dt:e} from: {}", b.description);
            let snap = FieldBundle::new(s, &mult, b.seed, &desc)?;
            write_file(&snapshot_path(dir, *step), &snap.to_bytes())?;
        }
    }
    Ok(r)
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step_{step:06}.bundle"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Flat,
    Random,
    Constrained,
}

impl std::str::FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flat" => Ok(Kind::Flat),
            "random" => Ok(Kind::Random),
            "constrained" => Ok(Kind::Constrained),
            _ => Err(format!("unknown kind `{s}` (flat, random or constrained)")),
        }
    }
}

pub struct GenOptions {
    pub kind: Kind,
    pub amplitude: f64,
    pub modes: usize,
    pub max_iter: usize,
}

pub const GEN_PROJECTION_TOL: f64 = 1e-8;
pub const FLAT_TOL: f64 = 1e-12;

/// Generate a state with unit lapse and zero shift and write it to `out`.
pub fn gen(grid: PeriodicGrid, seed: u64, opts: &GenOptions, tol: Option<f64>, out: &Path) -> CliResult<Report> {
    if !(opts.amplitude >= 0.0) {
        return Err(CliError::Usage("amplitude must be non-negative".into()));
    }
    let g = grid_label(&grid);
    let mut r = Report::new("gen");
    let (state, desc, limit) = match opts.kind {
        Kind::Flat => (PhaseState::flat(grid), "flat".to_string(), tol.unwrap_or(FLAT_TOL)),
        Kind::Random => (
            PhaseState::random(grid, opts.amplitude, opts.modes, seed)?,
            format!("random amplitude {} modes {}", opts.amplitude, opts.modes),
            f64::INFINITY,
        ),
        Kind::Constrained => {
            let raw = PhaseState::random(grid, opts.amplitude, opts.modes, seed)?;
            let t = tol.unwrap_or(GEN_PROJECTION_TOL);
            let (s, rep) = dynamics::project_constraints(&raw, t, opts.max_iter)?;
            r.push(ReportRow::new("gen", "projection iterations", seed, &g, 0.0, 0.0).with_value(rep.iterations as f64));
            r.push(ReportRow::new("gen", "density before projection", seed, &g, rep.initial_residual, f64::INFINITY).with_value(rep.initial_residual));
            (s, format!("constrained amplitude {} modes {}", opts.amplitude, opts.modes), t)
        }
    };
    // geometry() fails unless q is positive definite everywhere
    state.geometry()?;
    r.push(ReportRow::new("gen", "induced metric positive definite", seed, &g, 0.0, 0.0));
    let dens = max_density(&state)?;
    r.push(ReportRow::new("gen", "max constraint density", seed, &g, dens, limit).with_value(dens));
    let bundle = FieldBundle::new(&state, &Multipliers::unit(grid), seed, &desc)?;
    write_file(out, &bundle.to_bytes())?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flags() {
        assert_eq!(parse_grid("8").unwrap().points(), [8, 8, 8]);
        assert_eq!(parse_grid("8x10x12").unwrap().points(), [8, 10, 12]);
        assert!(matches!(parse_grid("8x9"), Err(CliError::Usage(_))));
        assert!(matches!(parse_grid("3"), Err(CliError::Usage(_))));
        assert!(matches!(parse_grid("ax8x8"), Err(CliError::Usage(_))));
    }

    #[test]
    fn brackets_need_two_grids() {
        assert!(matches!(brackets(&[8], 1, &ClosureSetup::default()), Err(CliError::Usage(_))));
    }
}
