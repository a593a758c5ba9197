//! Reference tables of the convergent bounds against plain composition.
//!
//! Each table fixes the effective sensitivity and varies the contraction
//! (strongly convex) or the sensitivity and step size (constrained).

use crate::accountant::{
    bound_cgd_composition, bound_cgd_proj, bound_cgd_sc, bound_gd_composition, bound_gd_proj,
    bound_gd_sc, crossover_step, gd_proj_threshold, AlgoParams, Kind,
};
use crate::error::{domain, Error, Result};
use crate::io::fmt_sig17;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Table {
    /// Full batch, strongly convex: steps × contraction at `L/(nσ) = 0.1`.
    GdSc,
    /// Cyclic, strongly convex: epochs × batches × contraction at
    /// `L/(bσ) = 0.2`.
    CgdSc,
    /// Full batch, constrained: `L/n × η` at `D = 1`, `σ = 8`.
    GdProj,
    /// Cyclic, constrained: batches × `L/b × η` at `D = 1`, `σ = 3`.
    CgdProj,
}

impl Table {
    pub const ALL: [Table; 4] = [Table::GdSc, Table::CgdSc, Table::GdProj, Table::CgdProj];

    pub fn name(self) -> &'static str {
        match self {
            Table::GdSc => "gd-sc",
            Table::CgdSc => "cgd-sc",
            Table::GdProj => "gd-proj",
            Table::CgdProj => "cgd-proj",
        }
    }
}

impl std::str::FromStr for Table {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Table::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown table `{s}` (expected gd-sc, cgd-sc, gd-proj or cgd-proj)"
                ))
            })
    }
}

/// One cell. Fields that do not apply to the table are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableCell {
    pub table: Table,
    pub steps: Option<u64>,
    pub epochs: Option<u64>,
    pub batches: Option<u64>,
    pub c: Option<f64>,
    /// `L/n` (full batch) or `L/b` (cyclic).
    pub sensitivity: Option<f64>,
    pub eta: Option<f64>,
    pub mu: f64,
    pub composition: Option<f64>,
    /// Steps (full batch) or epochs (cyclic) at which plain composition
    /// reaches `mu`.
    pub crossover: Option<u64>,
}

pub const GD_SC_STEPS: [u64; 3] = [10, 100, 1000];
pub const GD_SC_CONTRACTIONS: [f64; 5] = [0.92, 0.96, 0.98, 0.99, 0.995];
pub const CGD_SC_EPOCHS: [u64; 3] = [5, 50, 500];
pub const CGD_BATCHES: [u64; 3] = [10, 20, 40];
pub const CGD_SC_CONTRACTIONS: [f64; 3] = [0.98, 0.99, 0.995];
pub const GD_PROJ_SENSITIVITIES: [f64; 3] = [0.25, 0.5, 1.0];
pub const GD_PROJ_STEP_SIZES: [f64; 3] = [0.2, 0.1, 0.05];
pub const CGD_PROJ_SENSITIVITIES: [f64; 3] = [0.25, 0.5, 1.0];
pub const CGD_PROJ_STEP_SIZES: [f64; 3] = [0.04, 0.02, 0.01];

/// Strongly convex parameters with `m = M = 1`, so the contraction is
/// `1 − η`.
fn contracting(kind: Kind, c: f64) -> AlgoParams {
    AlgoParams {
        kind: Some(kind),
        eta: Some(1.0 - c),
        m: Some(1.0),
        smooth: Some(1.0),
        ..Default::default()
    }
}

pub fn table(which: Table) -> Result<Vec<TableCell>> {
    let mut cells = Vec::new();
    match which {
        Table::GdSc => {
            for t in GD_SC_STEPS {
                for c in GD_SC_CONTRACTIONS {
                    let p = AlgoParams {
                        sigma: Some(1.0),
                        n: Some(1),
                        steps: Some(t),
                        l_sens: Some(0.1),
                        ..contracting(Kind::Gd, c)
                    };
                    cells.push(TableCell {
                        table: which,
                        steps: Some(t),
                        epochs: None,
                        batches: None,
                        c: Some(c),
                        sensitivity: Some(0.1),
                        eta: None,
                        mu: bound_gd_sc(&p)?.mu(),
                        composition: Some(bound_gd_composition(&p)?.mu()),
                        crossover: None,
                    });
                }
            }
        }
        Table::CgdSc => {
            for e in CGD_SC_EPOCHS {
                for l in CGD_BATCHES {
                    for c in CGD_SC_CONTRACTIONS {
                        let p = AlgoParams {
                            sigma: Some(1.0),
                            n: Some(l),
                            b: Some(1),
                            epochs: Some(e),
                            l_sens: Some(0.2),
                            ..contracting(Kind::Cgd, c)
                        };
                        cells.push(TableCell {
                            table: which,
                            steps: None,
                            epochs: Some(e),
                            batches: Some(l),
                            c: Some(c),
                            sensitivity: Some(0.2),
                            eta: None,
                            mu: bound_cgd_sc(&p)?.mu(),
                            composition: Some(bound_cgd_composition(&p)?.mu()),
                            crossover: None,
                        });
                    }
                }
            }
        }
        Table::GdProj => {
            let sigma = 8.0;
            for s in GD_PROJ_SENSITIVITIES {
                for eta in GD_PROJ_STEP_SIZES {
                    let mut p = AlgoParams {
                        kind: Some(Kind::Gd),
                        eta: Some(eta),
                        sigma: Some(sigma),
                        n: Some(1),
                        l_sens: Some(s),
                        diameter: Some(1.0),
                        ..Default::default()
                    };
                    p.steps = Some(gd_proj_threshold(&p)? as u64);
                    let mu = bound_gd_proj(&p, None)?.mu();
                    cells.push(TableCell {
                        table: which,
                        steps: None,
                        epochs: None,
                        batches: None,
                        c: None,
                        sensitivity: Some(s),
                        eta: Some(eta),
                        mu,
                        composition: None,
                        crossover: Some(crossover_step(mu, s / sigma)?),
                    });
                }
            }
        }
        Table::CgdProj => {
            let sigma = 3.0;
            for l in CGD_BATCHES {
                for s in CGD_PROJ_SENSITIVITIES {
                    for eta in CGD_PROJ_STEP_SIZES {
                        let mut p = AlgoParams {
                            kind: Some(Kind::Cgd),
                            eta: Some(eta),
                            sigma: Some(sigma),
                            n: Some(l),
                            b: Some(1),
                            l_sens: Some(s),
                            diameter: Some(1.0),
                            ..Default::default()
                        };
                        p.epochs = Some(crate::accountant::cgd_proj_threshold(&p)?.max(1.0) as u64);
                        let mu = bound_cgd_proj(&p, None)?.mu();
                        cells.push(TableCell {
                            table: which,
                            steps: None,
                            epochs: None,
                            batches: Some(l),
                            c: None,
                            sensitivity: Some(s),
                            eta: Some(eta),
                            mu,
                            composition: None,
                            crossover: Some(crossover_step(mu, s / sigma)?),
                        });
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return domain("empty table");
    }
    Ok(cells)
}

/// Writes `table,steps,epochs,batches,c,sensitivity,eta,mu,composition,crossover`
/// rows; fields that do not apply are left empty.
pub fn write_table_csv<W: Write>(cells: &[TableCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "table",
        "steps",
        "epochs",
        "batches",
        "c",
        "sensitivity",
        "eta",
        "mu",
        "composition",
        "crossover",
    ])?;
    let int = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    let real = |v: Option<f64>| v.map(fmt_sig17).unwrap_or_default();
    for cell in cells {
        w.write_record([
            cell.table.name().to_string(),
            int(cell.steps),
            int(cell.epochs),
            int(cell.batches),
            real(cell.c),
            real(cell.sensitivity),
            real(cell.eta),
            fmt_sig17(cell.mu),
            real(cell.composition),
            int(cell.crossover),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(table(Table::GdSc).unwrap().len(), 15);
        assert_eq!(table(Table::CgdSc).unwrap().len(), 27);
        assert_eq!(table(Table::GdProj).unwrap().len(), 9);
        assert_eq!(table(Table::CgdProj).unwrap().len(), 27);
    }

    #[test]
    fn names_round_trip() {
        for t in Table::ALL {
            assert_eq!(t.name().parse::<Table>().unwrap(), t);
        }
        assert!("gd".parse::<Table>().is_err());
    }

    #[test]
    fn csv_has_blank_cells() {
        let mut buf = Vec::new();
        write_table_csv(&table(Table::GdProj).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let second = text.lines().nth(1).unwrap();
        assert!(second.starts_with("gd-proj,,,,,"));
        assert_eq!(text.lines().count(), 10);
    }
}
