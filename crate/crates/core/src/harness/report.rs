//! Report files: CSVs with fixed six-decimal formatting (so replayed runs
//! are byte-identical) and a JSON metrics summary.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::experiment::{DetectionRow, SweepGrid};
use super::metrics::MetricsReport;
use super::{io_err, AdaptiveStudy, Result};
use crate::attack::EpochStats;

pub fn write_detection_csv(path: &Path, rows: &[DetectionRow]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(f, "id,distance,verdict,label").map_err(|e| io_err(path, e))?;
    for r in rows {
        writeln!(
            f,
            "{},{:.6},{},{}",
            r.id,
            r.distance,
            u8::from(r.verdict),
            u8::from(r.label)
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn write_metrics_json(path: &Path, sections: &[(&str, &MetricsReport)]) -> Result<()> {
    let map: serde_json::Map<String, serde_json::Value> = sections
        .iter()
        .map(|(name, m)| {
            (
                name.to_string(),
                serde_json::to_value(m).expect("metrics serialize"),
            )
        })
        .collect();
    let body = serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("json");
    std::fs::write(path, body + "\n").map_err(|e| io_err(path, e))
}

pub fn write_roc_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(f, "fpr,tpr").map_err(|e| io_err(path, e))?;
    for (fpr, tpr) in points {
        writeln!(f, "{fpr:.6},{tpr:.6}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Bounds-sweep grid in the rows-are-beta, columns-are-alpha layout.
pub fn write_sweep_csv(path: &Path, grid: &SweepGrid) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = grid.alphas.iter().map(|a| format!("alpha={a:.1}")).collect();
    writeln!(f, "beta,{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for (bi, beta) in grid.betas.iter().enumerate() {
        let cells: Vec<String> = grid.accuracy[bi]
            .iter()
            .map(|acc| match acc {
                Some(v) => format!("{v:.6}"),
                None => "undefined".to_string(),
            })
            .collect();
        writeln!(f, "{beta:.1},{}", cells.join(",")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn write_epoch_log_csv(path: &Path, stats: &[EpochStats]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(f, "epoch,train_loss,val_accuracy").map_err(|e| io_err(path, e))?;
    for s in stats {
        writeln!(f, "{},{:.6},{:.6}", s.epoch, s.train_loss, s.val_accuracy)
            .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Per-restart trace of the adaptive attack study.
pub fn write_rho_trace_csv(path: &Path, study: &AdaptiveStudy) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(f, "restart,mean_rho,evasions").map_err(|e| io_err(path, e))?;
    for (r, (rho, ev)) in study.mean_rho.iter().zip(&study.evasions_at).enumerate() {
        writeln!(f, "{r},{rho:.6},{ev}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_csv_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        let rows = vec![
            DetectionRow {
                id: 0,
                distance: 0.125,
                verdict: true,
                label: true,
            },
            DetectionRow {
                id: 1,
                distance: 0.0,
                verdict: false,
                label: false,
            },
        ];
        write_detection_csv(&path, &rows).unwrap();
        let a = std::fs::read(&path).unwrap();
        write_detection_csv(&path, &rows).unwrap();
        assert_eq!(a, std::fs::read(&path).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("id,distance,verdict,label\n"));
        assert!(text.contains("0,0.125000,1,1"));
    }

    #[test]
    fn sweep_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let grid = SweepGrid {
            alphas: vec![0.0, 0.1, 0.2],
            betas: vec![0.6, 0.7, 0.8],
            accuracy: vec![
                vec![Some(0.5), Some(0.6), None],
                vec![Some(0.7), Some(0.8), Some(0.9)],
                vec![None, None, None],
            ],
        };
        write_sweep_csv(&path, &grid).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("beta,alpha=0.0,alpha=0.1,alpha=0.2\n"));
        assert!(text.contains("0.6,0.500000,0.600000,undefined"));
    }
}
