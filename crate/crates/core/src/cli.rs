//! Experiment configuration and runner behind the `tropot` binary.
//!
//! A config is a TOML document:
//!
//! ```toml
//! [problem]
//! kind = "w1"                 # or "w2"
//!
//! [grid]
//! nx = 64
//! ny = 64
//! # dx = 0.015625           # default 1 / max(nx, ny)
//!
//! [source]
//! squares = [{ center = [0.3333, 0.3333], width = 0.2 }]
//!
//! [target]
//! file = "target.csv"        # field CSV of cell masses, instead of squares
//! # total_mass = 1.0
//!
//! [solver]                   # any SolverConfig field
//! tolerance = 1e-6
//!
//! [output]
//! dir = "out/experiment1_w1"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};
use crate::io::{read_field_csv, write_field_csv, write_pgm};
use crate::solver::{ConvergenceReport, SolverConfig};
use crate::trop::trop_norm;
use crate::w1::{eikonal_residual, solve_w1, W1Problem};
use crate::w2::{continuity_residual, hj_inequality_check, solve_w2, SNAPSHOT_TIMES};

/// Exit status of a run, mapped onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    Infeasible,
    NotConverged,
    ConfigError,
    Failure,
}

impl RunStatus {
    pub fn code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::Failure => 1,
            RunStatus::Infeasible => 2,
            RunStatus::NotConverged => 3,
            RunStatus::ConfigError => 4,
        }
    }

    /// Status for an error returned before or during a run.
    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Infeasible { .. } | Error::Unreachable { .. } => RunStatus::Infeasible,
            Error::Config(_) | Error::Format(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => {
                RunStatus::ConfigError
            }
            _ => RunStatus::Failure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    W1,
    W2,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquareSpec {
    pub center: [f64; 2],
    pub width: f64,
    /// Relative weight of this square.
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    #[serde(default)]
    pub squares: Vec<SquareSpec>,
    pub file: Option<PathBuf>,
    /// Mass after normalization.
    #[serde(default = "one")]
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub pgm: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ProblemKind,
    pub grid: GridConfig,
    pub source: DensitySpec,
    pub target: DensitySpec,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Directory that relative `file` and `dir` paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    grid: GridConfig,
    source: DensitySpec,
    target: DensitySpec,
    #[serde(default)]
    solver: toml::Table,
    output: OutputConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: ProblemKind,
}

fn config_err(msg: impl std::fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

impl ExperimentConfig {
    /// Parses a config. Solver fields left out take the defaults of the
    /// problem kind.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(config_err)?;
        let base = match raw.problem.kind {
            ProblemKind::W1 => SolverConfig::w1_default(),
            ProblemKind::W2 => SolverConfig::w2_default(),
        };
        let mut merged = toml::Table::try_from(&base).map_err(config_err)?;
        for (k, v) in raw.solver {
            merged.insert(k, v);
        }
        let solver: SolverConfig =
            merged.try_into().map_err(|e: toml::de::Error| config_err(format!("[solver]: {e}")))?;
        solver.validate().map_err(|e| config_err(format!("[solver]: {e}")))?;
        let cfg = ExperimentConfig {
            kind: raw.problem.kind,
            grid: raw.grid,
            source: raw.source,
            target: raw.target,
            solver,
            output: raw.output,
            base_dir: base_dir.to_path_buf(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        if self.grid.nx < 2 || self.grid.ny < 2 {
            return Err(config_err("[grid]: nx and ny must be at least 2"));
        }
        if let Some(dx) = self.grid.dx {
            if !(dx > 0.0 && dx.is_finite()) {
                return Err(config_err(format!("[grid].dx: must be positive, got {dx}")));
            }
        }
        for (name, d) in [("source", &self.source), ("target", &self.target)] {
            match (d.squares.is_empty(), &d.file) {
                (true, None) => return Err(config_err(format!("[{name}]: give `squares` or `file`"))),
                (false, Some(_)) => return Err(config_err(format!("[{name}]: `squares` and `file` are exclusive"))),
                _ => {}
            }
            if !(d.total_mass > 0.0 && d.total_mass.is_finite()) {
                return Err(config_err(format!("[{name}].total_mass: must be positive")));
            }
            for (k, s) in d.squares.iter().enumerate() {
                if !(s.width > 0.0 && s.mass > 0.0 && s.mass.is_finite()) {
                    return Err(config_err(format!("[{name}].squares[{k}]: width and mass must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Switches to a 128 x 128 grid on the unit square.
    pub fn full_scale(&mut self) {
        self.grid = GridConfig { nx: 128, ny: 128, dx: None };
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let dx = self.grid.dx.unwrap_or(1.0 / self.grid.nx.max(self.grid.ny) as f64);
        GridSpec::new(vec![self.grid.nx, self.grid.ny], dx)
    }

    /// Output directory, relative paths resolved against the config location.
    pub fn output_dir(&self) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            self.base_dir.join(&self.output.dir)
        }
    }

    fn density(&self, name: &str, spec: &DensitySpec, grid: &GridSpec) -> Result<DensityField> {
        let field = if let Some(file) = &spec.file {
            let path = if file.is_absolute() { file.clone() } else { self.base_dir.join(file) };
            let (g, v) = read_field_csv(&path).map_err(|e| config_err(format!("[{name}].file: {e}")))?;
            if g.shape() != grid.shape() {
                return Err(config_err(format!(
                    "[{name}].file: grid {:?} does not match [grid] {:?}",
                    g.shape(),
                    grid.shape()
                )));
            }
            DensityField::normalized(grid.clone(), v)
        } else {
            let mut acc = vec![0.0; grid.num_cells()];
            for (k, s) in spec.squares.iter().enumerate() {
                let sq = generate_square_density(grid, s.center, s.width)
                    .map_err(|e| config_err(format!("[{name}].squares[{k}]: {e}")))?;
                acc.iter_mut().zip(sq.values()).for_each(|(a, v)| *a += s.mass * v);
            }
            DensityField::normalized(grid.clone(), acc)
        }
        .map_err(|e| config_err(format!("[{name}]: {e}")))?;
        let scaled = field.values().iter().map(|v| v * spec.total_mass).collect();
        DensityField::new(grid.clone(), scaled)
    }

    /// Source and target densities.
    pub fn densities(&self) -> Result<(DensityField, DensityField)> {
        let grid = self.grid_spec()?;
        Ok((self.density("source", &self.source, &grid)?, self.density("target", &self.target, &grid)?))
    }
}

/// Unit mass spread uniformly over the cells whose centers lie in the
/// axis-aligned square (boundary included).
pub fn generate_square_density(grid: &GridSpec, center: [f64; 2], width: f64) -> Result<DensityField> {
    if grid.ndim() != 2 {
        return Err(Error::invalid("square densities need a 2-D grid"));
    }
    if !(width > 0.0 && width.is_finite()) || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("square needs a finite center and positive width"));
    }
    let (lo, hi) = (grid.origin(), grid.extent());
    let slack = 1e-12;
    for v in 0..2 {
        if center[v] - width / 2.0 < lo[v] - slack || center[v] + width / 2.0 > hi[v] + slack {
            return Err(Error::invalid(format!("square at {center:?} with width {width} leaves the domain")));
        }
    }
    let half = width / 2.0 + 1e-12;
    let values: Vec<f64> = (0..grid.num_cells())
        .map(|i| {
            let x = grid.cell_center(i);
            if (x[0] - center[0]).abs() <= half && (x[1] - center[1]).abs() <= half {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateInput("square contains no cell center"));
    }
    DensityField::normalized(grid.clone(), values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub distance: f64,
    pub iterations: usize,
    pub output_dir: PathBuf,
    /// Files written, relative to `output_dir`.
    pub files: Vec<String>,
}

struct Artifacts {
    dir: PathBuf,
    pgm: bool,
    files: Vec<String>,
}

impl Artifacts {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn field(&mut self, stem: &str, grid: &GridSpec, values: &[f64]) -> Result<()> {
        let csv = format!("{stem}.csv");
        write_field_csv(&self.dir.join(&csv), grid, values)?;
        self.files.push(csv);
        if self.pgm {
            let pgm = format!("{stem}.pgm");
            write_pgm(&self.dir.join(&pgm), grid, values)?;
            self.files.push(pgm);
        }
        Ok(())
    }
}

fn summary(kind: &str, distance: f64, report: &ConvergenceReport, extra: &[(&str, f64)]) -> String {
    let mut s = format!(
        "kind = \"{kind}\"\ndistance = {distance:.16e}\nconverged = {}\niterations = {}\nfinal_residual = {:.6e}\nprimal_step = {:.6e}\ndual_step = {:.6e}\noperator_norm_sq = {:.6e}\n",
        report.converged,
        report.iterations,
        report.final_residual,
        report.primal_step,
        report.dual_step,
        report.operator_norm_sq
    );
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v:.6e}\n"));
    }
    s
}

/// Runs one experiment and writes its artifacts. An infeasible pair is
/// reported before any file is created.
pub fn run_experiment(cfg: &ExperimentConfig, output_override: Option<&Path>) -> Result<RunOutcome> {
    let (q0, q1) = cfg.densities()?;
    crate::w1::check_pair(&q0, &q1)?;
    let dir = output_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir());
    let grid = q0.grid().clone();
    let (distance, report, mut art) = match cfg.kind {
        ProblemKind::W1 => {
            let problem = W1Problem::new(q0, q1)?;
            let sol = solve_w1(&problem, &cfg.solver)?;
            std::fs::create_dir_all(&dir)?;
            let mut art = Artifacts { dir: dir.clone(), pgm: cfg.output.pgm, files: Vec::new() };
            art.field("flux_x", &grid, sol.m.component(0))?;
            art.field("flux_y", &grid, sol.m.component(1))?;
            let norms: Vec<f64> = (0..grid.num_cells()).map(|i| trop_norm(&sol.m.cell_vector(i))).collect();
            art.field("flux_norm", &grid, &norms)?;
            art.field("potential", &grid, sol.phi.values())?;
            let extra = [("feasibility", sol.feasibility(&problem)), ("eikonal_residual", eikonal_residual(&sol))];
            art.text("summary.toml", &summary("w1", sol.distance, &sol.report, &extra))?;
            (sol.distance, sol.report, art)
        }
        ProblemKind::W2 => {
            let sol = solve_w2(&q0, &q1, &cfg.solver)?;
            std::fs::create_dir_all(&dir)?;
            let mut art = Artifacts { dir: dir.clone(), pgm: cfg.output.pgm, files: Vec::new() };
            for t in SNAPSHOT_TIMES {
                let n = sol.path.nearest_slice(t);
                art.field(&format!("rho_t{t:.2}"), &grid, &sol.path.slice_masses(n))?;
            }
            let mass_err = (0..sol.path.nt())
                .map(|n| (sol.path.slice_mass(n) - q0.mass()).abs())
                .fold(0.0, f64::max);
            let extra = [
                ("slice_mass_error", mass_err),
                ("continuity_residual", continuity_residual(&sol.path)),
                ("hj_inequality", hj_inequality_check(&sol.path)),
            ];
            art.text("summary.toml", &summary("w2", sol.distance, &sol.report, &extra))?;
            (sol.distance, sol.report, art)
        }
    };
    art.text("history.csv", &report.history_csv())?;
    art.text("distance.txt", &format!("{distance:.16e}\n"))?;
    Ok(RunOutcome {
        status: if report.converged { RunStatus::Converged } else { RunStatus::NotConverged },
        distance,
        iterations: report.iterations,
        output_dir: dir,
        files: art.files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[problem]
kind = "w2"
[grid]
nx = 8
ny = 8
[source]
squares = [{ center = [0.25, 0.25], width = 0.25 }]
[target]
squares = [{ center = [0.75, 0.75], width = 0.25, mass = 2.0 }, { center = [0.25, 0.75], width = 0.25 }]
[solver]
tolerance = 1e-4
[output]
dir = "out"
"#;

    #[test]
    fn parses_and_merges_defaults() {
        let cfg = ExperimentConfig::from_toml_str(BASIC, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.kind, ProblemKind::W2);
        assert_eq!(cfg.solver.tolerance, 1e-4);
        assert_eq!(cfg.solver.max_iter, SolverConfig::w2_default().max_iter);
        assert_eq!(cfg.output_dir(), PathBuf::from("/tmp/x/out"));
        let (q0, q1) = cfg.densities().unwrap();
        assert!((q0.mass() - 1.0).abs() < 1e-12 && (q1.mass() - 1.0).abs() < 1e-12);
        let g = cfg.grid_spec().unwrap();
        let big = q1.values()[g.index(&[6, 6]).unwrap()];
        let small = q1.values()[g.index(&[2, 6]).unwrap()];
        assert!((big - 2.0 * small).abs() < 1e-12);
    }

    #[test]
    fn reports_bad_fields() {
        let bad = BASIC.replace("tolerance = 1e-4", "tolerence = 1e-4");
        let e = ExperimentConfig::from_toml_str(&bad, Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("tolerence")), "{e}");
        let bad = BASIC.replace("nx = 8", "nx = \"eight\"");
        let e = ExperimentConfig::from_toml_str(&bad, Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("line")), "{e}");
        let bad = BASIC.replace("kind = \"w2\"", "kind = \"w3\"");
        assert!(ExperimentConfig::from_toml_str(&bad, Path::new(".")).is_err());
        let bad = BASIC.replace("tolerance = 1e-4", "time_slices = 2");
        assert!(ExperimentConfig::from_toml_str(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn square_generator() {
        let g = GridSpec::unit(128, 2).unwrap();
        let q = generate_square_density(&g, [1.0 / 3.0, 1.0 / 3.0], 0.2).unwrap();
        assert!((q.mass() - 1.0).abs() < 1e-12);
        let support: Vec<Vec<usize>> =
            (0..g.num_cells()).filter(|&i| q.values()[i] > 0.0).map(|i| g.unravel(i)).collect();
        let (lo, hi) = (support.first().unwrap().clone(), support.last().unwrap().clone());
        let side = hi[0] - lo[0] + 1;
        assert_eq!(support.len(), side * (hi[1] - lo[1] + 1));
        // a width below dx centered on a cell center picks that cell alone
        let c = g.cell_center(g.index(&[5, 9]).unwrap());
        let d = generate_square_density(&g, [c[0], c[1]], 0.5 / 128.0).unwrap();
        assert_eq!(d.values()[g.index(&[5, 9]).unwrap()], 1.0);
        assert!(generate_square_density(&g, [0.05, 0.5], 0.2).is_err());
        assert!(generate_square_density(&GridSpec::unit(4, 2).unwrap(), [0.5, 0.5], 0.1).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunStatus::Converged.code(), 0);
        assert_eq!(RunStatus::of_error(&Error::Infeasible { source_mass: 1.0, target_mass: 0.5 }).code(), 2);
        assert_eq!(RunStatus::NotConverged.code(), 3);
        assert_eq!(RunStatus::of_error(&Error::Config("x".into())).code(), 4);
    }
}
