//! CSV and JSON output of a grid, with a metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Axes, Cell, CellError, CellOutcome, CellRecord, DiagnosticsRecord, GridResult, LindbladCheck, Metadata, Mode, Quantity, SweepConfig, SweepError};
use crate::phase_space::{TemperatureMinimum, CSV_HEADER};
use crate::quadratic_dynamics::{ConvergenceReport, ConvergenceStatus, QuadraticClosureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    Csv,
    Json,
}

impl EmitFormat {
    pub fn extension(self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
        }
    }
}

impl FromStr for EmitFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitPaths {
    pub data: PathBuf,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Diagnostics,
    Convergence,
    Minimum,
    Oracle,
    Lindblad,
}

const CONVERGENCE_HEADER: &str = "g,status,terminal_dx2,terminal_dp2,terminal_c,window_variation,t_reached,tau,lam,error";
const MINIMUM_HEADER: &str = "g,lam,min_value,tau_at_min,error";
const ORACLE_HEADER: &str =
    "tau,lam,g,dim,trace_err,hermiticity_err,min_eig,trunc_pop,stationary_rel_err,trajectory_rel_err,hup_product,pass,error";
const LINDBLAD_HEADER: &str = "tau,lam,g,kossakowski_min_eigenvalue,identity_residual,psd,error";

fn layout(cfg: &SweepConfig) -> Layout {
    match (cfg.mode, cfg.quantity) {
        (Mode::Oracle, _) => Layout::Oracle,
        (Mode::CheckLindblad, _) => Layout::Lindblad,
        (_, Quantity::Convergence) => Layout::Convergence,
        (_, q) if q.is_minimum() => Layout::Minimum,
        _ => Layout::Diagnostics,
    }
}

impl Layout {
    fn header(self) -> String {
        match self {
            Layout::Diagnostics => format!("{CSV_HEADER},error"),
            Layout::Convergence => CONVERGENCE_HEADER.into(),
            Layout::Minimum => MINIMUM_HEADER.into(),
            Layout::Oracle => ORACLE_HEADER.into(),
            Layout::Lindblad => LINDBLAD_HEADER.into(),
        }
    }

    fn columns(self) -> usize {
        self.header().split(',').count()
    }

    fn from_header(h: &str) -> Option<Self> {
        [Layout::Diagnostics, Layout::Convergence, Layout::Minimum, Layout::Oracle, Layout::Lindblad]
            .into_iter()
            .find(|l| l.header() == h)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn row(layout: Layout, cell: &Cell) -> String {
    let tau = opt(cell.tau);
    let (g, lam) = (cell.g, cell.lam);
    let blanks = |n: usize| ",".repeat(n);
    match (&cell.outcome, layout) {
        (CellOutcome::Record(CellRecord::Diagnostics(d)), _) => format!(
            "{tau},{lam},{g},{},{},{},{},{},{},{},{},{},{},{},",
            d.dx2,
            d.dp2,
            d.rho,
            d.dl2,
            d.dL2,
            d.eta,
            d.theta_over_pi.map_or_else(|| "iso".to_string(), |t| t.to_string()),
            d.chi,
            d.hup_product,
            d.genuine_squeezing,
            d.cooled
        ),
        (CellOutcome::Record(CellRecord::Convergence(r)), _) => {
            let t = r.terminal;
            format!(
                "{g},{},{},{},{},{},{},{tau},{lam},",
                r.status.as_str(),
                opt(t.map(|s| s.dx2)),
                opt(t.map(|s| s.dp2)),
                opt(t.map(|s| s.c)),
                r.window_variation,
                r.t_reached
            )
        }
        (CellOutcome::Record(CellRecord::Minimum(m)), _) => format!("{g},{lam},{},{},", m.value, m.tau),
        (CellOutcome::Record(CellRecord::Oracle(o)), _) => format!(
            "{tau},{lam},{g},{},{},{},{},{},{},{},{},{},",
            o.dim,
            o.trace_err,
            o.hermiticity_err,
            o.min_eig,
            o.trunc_pop,
            o.stationary_rel_err,
            o.trajectory_rel_err,
            o.hup_product,
            o.pass_flags.all()
        ),
        (CellOutcome::Record(CellRecord::Lindblad(l)), _) => {
            format!("{tau},{lam},{g},{},{},{},", l.kossakowski_min_eigenvalue, l.identity_residual, l.psd)
        }
        (CellOutcome::Error(e), Layout::Convergence) => format!("{g}{}{tau},{lam},{}", blanks(7), e.reason),
        (CellOutcome::Error(e), Layout::Minimum) => format!("{g},{lam},,,{}", e.reason),
        (CellOutcome::Error(e), l) => format!("{tau},{lam},{g}{}{}", blanks(l.columns() - 3), e.reason),
    }
}

/// Header line plus one line per cell, in grid order.
pub fn to_csv(grid: &GridResult) -> String {
    let layout = layout(&grid.config);
    let mut out = layout.header();
    out.push('\n');
    for cell in &grid.cells {
        out.push_str(&row(layout, cell));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonBody<'a> {
    config: &'a SweepConfig,
    axes: &'a Axes,
    cells: &'a [Cell],
}

/// Full records; timing lives only in the sidecar so the body is
/// reproducible.
pub fn to_json(grid: &GridResult) -> String {
    let body = JsonBody { config: &grid.config, axes: &grid.axes, cells: &grid.cells };
    serde_json::to_string_pretty(&body).expect("grid serializes")
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    metadata: &'a Metadata,
    format: EmitFormat,
    data_file: String,
    config: &'a SweepConfig,
}

fn write(path: &Path, text: &str) -> Result<(), SweepError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| SweepError::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| SweepError::Io { path: path.display().to_string(), source })
}

/// Writes `path` and `<stem>.meta.json` next to it.
pub fn emit(grid: &GridResult, path: &Path, format: EmitFormat) -> Result<EmitPaths, SweepError> {
    let text = match format {
        EmitFormat::Csv => to_csv(grid),
        EmitFormat::Json => to_json(grid),
    };
    write(path, &text)?;
    let meta = path.with_extension("meta.json");
    let sidecar = Sidecar {
        metadata: &grid.metadata,
        format,
        data_file: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        config: &grid.config,
    };
    write(&meta, &serde_json::to_string_pretty(&sidecar).expect("metadata serializes"))?;
    Ok(EmitPaths { data: path.to_path_buf(), meta })
}

struct Fields<'a> {
    line: usize,
    items: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn err(&self, reason: impl Into<String>) -> SweepError {
        SweepError::Parse { line: self.line, reason: reason.into() }
    }

    fn num(&self, k: usize) -> Result<f64, SweepError> {
        self.items[k].parse().map_err(|_| self.err(format!("column {k}: `{}` is not a number", self.items[k])))
    }

    fn opt_num(&self, k: usize) -> Result<Option<f64>, SweepError> {
        if self.items[k].is_empty() {
            Ok(None)
        } else {
            self.num(k).map(Some)
        }
    }

    fn flag(&self, k: usize) -> Result<bool, SweepError> {
        self.items[k].parse().map_err(|_| self.err(format!("column {k}: `{}` is not a boolean", self.items[k])))
    }

    fn error(&self) -> Option<CellError> {
        let e = *self.items.last()?;
        (!e.is_empty()).then(|| CellError::new(e, ""))
    }
}

fn parse_status(s: &str) -> Option<ConvergenceStatus> {
    [ConvergenceStatus::Converged, ConvergenceStatus::Oscillatory, ConvergenceStatus::Diverged]
        .into_iter()
        .find(|st| st.as_str() == s)
}

fn parse_row(layout: Layout, f: &Fields) -> Result<Cell, SweepError> {
    let error = f.error();
    let wrap = |rec: CellRecord| match &error {
        Some(e) => CellOutcome::Error(e.clone()),
        None => CellOutcome::Record(rec),
    };
    match layout {
        Layout::Diagnostics => {
            let (tau, lam, g) = (f.opt_num(0)?, f.num(1)?, f.num(2)?);
            if let Some(e) = error {
                return Ok(Cell { g, tau, lam, outcome: CellOutcome::Error(e) });
            }
            let theta = match f.items[9] {
                "iso" => None,
                _ => Some(f.num(9)?),
            };
            let d = DiagnosticsRecord {
                dx2: f.num(3)?,
                dp2: f.num(4)?,
                rho: f.num(5)?,
                dl2: f.num(6)?,
                dL2: f.num(7)?,
                eta: f.num(8)?,
                theta_over_pi: theta,
                chi: f.num(10)?,
                hup_product: f.num(11)?,
                genuine_squeezing: f.flag(12)?,
                cooled: f.flag(13)?,
            };
            Ok(Cell { g, tau, lam, outcome: wrap(CellRecord::Diagnostics(d)) })
        }
        Layout::Convergence => {
            let (g, tau, lam) = (f.num(0)?, f.opt_num(7)?, f.num(8)?);
            if let Some(e) = error {
                return Ok(Cell { g, tau, lam, outcome: CellOutcome::Error(e) });
            }
            let status = parse_status(f.items[1]).ok_or_else(|| f.err(format!("unknown status `{}`", f.items[1])))?;
            let terminal = match (f.opt_num(2)?, f.opt_num(3)?, f.opt_num(4)?) {
                (Some(dx2), Some(dp2), Some(c)) => Some(QuadraticClosureState { dx2, dp2, c }),
                (None, None, None) => None,
                _ => return Err(f.err("partial terminal state")),
            };
            let r = ConvergenceReport { status, terminal, window_variation: f.num(5)?, t_reached: f.num(6)? };
            Ok(Cell { g, tau, lam, outcome: wrap(CellRecord::Convergence(r)) })
        }
        Layout::Minimum => {
            let (g, lam) = (f.num(0)?, f.num(1)?);
            if let Some(e) = error {
                return Ok(Cell { g, tau: None, lam, outcome: CellOutcome::Error(e) });
            }
            let m = TemperatureMinimum { value: f.num(2)?, tau: f.num(3)? };
            Ok(Cell { g, tau: None, lam, outcome: wrap(CellRecord::Minimum(m)) })
        }
        Layout::Lindblad => {
            let (tau, lam, g) = (f.opt_num(0)?, f.num(1)?, f.num(2)?);
            if let Some(e) = error {
                return Ok(Cell { g, tau, lam, outcome: CellOutcome::Error(e) });
            }
            let l = LindbladCheck { kossakowski_min_eigenvalue: f.num(3)?, identity_residual: f.num(4)?, psd: f.flag(5)? };
            Ok(Cell { g, tau, lam, outcome: wrap(CellRecord::Lindblad(l)) })
        }
        Layout::Oracle => Err(f.err("oracle CSV rows are a summary; read the JSON output for full records")),
    }
}

/// Parses CSV written by [`to_csv`]. Error cells come back with their
/// reason code and an empty message.
pub fn parse_csv(text: &str) -> Result<Vec<Cell>, SweepError> {
    let parse_err = |e: csv::Error| SweepError::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        reason: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(parse_err)?.iter().collect::<Vec<_>>().join(",");
    let layout = Layout::from_header(&header).ok_or(SweepError::Parse { line: 1, reason: format!("unknown header `{header}`") })?;
    let mut cells = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(parse_err)?;
        let f = Fields { line: k + 2, items: record.iter().collect() };
        cells.push(parse_row(layout, &f)?);
    }
    Ok(cells)
}

/// Short human-readable summary used by the command-line tool.
pub fn summary(grid: &GridResult) -> String {
    format!("{} cells, {} errors, config hash {}", grid.cells.len(), grid.error_count(), grid.metadata.config_hash)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{run_sweep, AxisRange};

    fn one_cell() -> GridResult {
        let cfg = SweepConfig::new(Mode::Linear, Quantity::Theta, 0.8, AxisRange::single(0.5), AxisRange::single(10.0));
        run_sweep(&cfg).unwrap()
    }

    #[test]
    fn single_cell_round_trip() {
        let grid = one_cell();
        let text = to_csv(&grid);
        assert_eq!(text.lines().count(), 2);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, grid.cells);
    }

    #[test]
    fn error_rows_keep_column_count() {
        let mut grid = one_cell();
        grid.cells[0].outcome = CellOutcome::Error(CellError::new(CellError::BRANCH_LOSS, "x"));
        let text = to_csv(&grid);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back[0].outcome, CellOutcome::Error(CellError::new(CellError::BRANCH_LOSS, "")));
        let short = text.replace(",branch-loss", "");
        assert!(matches!(parse_csv(&short), Err(SweepError::Parse { .. })));
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn convergence_rows_round_trip() {
        let cfg = SweepConfig::new(Mode::Quadratic, Quantity::Convergence, 0.1, AxisRange::single(4.0), AxisRange::single(16.0));
        let mut grid = one_cell();
        grid.config = cfg;
        grid.cells = vec![
            Cell {
                g: 0.1,
                tau: Some(4.0),
                lam: 16.0,
                outcome: CellOutcome::Record(CellRecord::Convergence(ConvergenceReport {
                    status: ConvergenceStatus::Converged,
                    terminal: Some(QuadraticClosureState { dx2: 1.25, dp2: 3.5, c: -0.125 }),
                    window_variation: 1e-9,
                    t_reached: 600.0,
                })),
            },
            Cell {
                g: 2.0,
                tau: Some(4.0),
                lam: 16.0,
                outcome: CellOutcome::Record(CellRecord::Convergence(ConvergenceReport {
                    status: ConvergenceStatus::Diverged,
                    terminal: None,
                    window_variation: f64::INFINITY,
                    t_reached: 12.5,
                })),
            },
        ];
        assert_eq!(parse_csv(&to_csv(&grid)).unwrap(), grid.cells);
    }

    #[test]
    fn emit_writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let grid = one_cell();
        let paths = emit(&grid, &dir.path().join("out.csv"), EmitFormat::Csv).unwrap();
        assert!(paths.meta.ends_with("out.meta.json"));
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths.meta).unwrap()).unwrap();
        assert_eq!(meta["config_hash"], grid.metadata.config_hash.as_str());
        let err = emit(&grid, Path::new("/proc/definitely/not/here.csv"), EmitFormat::Csv).unwrap_err();
        assert!(matches!(err, SweepError::Io { .. }));
    }
}
