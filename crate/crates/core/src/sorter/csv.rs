//! Plain CSV output for sort runs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::{PulseEvent, RunReport, SortDecision, StageLatency, StorageLine, SweepRow};

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_decision_log(path: &Path, decisions: &[SortDecision]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "id,t_trigger_ms,class,confidence,accepted,latency_ms,timed_out,true_label"
    )?;
    for d in decisions {
        let class = d.predicted_class.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            d.id, d.t_trigger_ms, class, d.confidence, d.accepted as u8, d.latency_ms, d.timed_out as u8, d.true_label
        )?;
    }
    w.flush()
}

pub fn write_report(path: &Path, report: &RunReport) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "key,value")?;
    for (k, v) in report.to_key_values() {
        writeln!(w, "{k},{v}")?;
    }
    w.flush()
}

pub fn write_pulses(path: &Path, pulses: &[PulseEvent]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "id,t_start_ms,duration_ms,freq_hz")?;
    for p in pulses {
        writeln!(w, "{},{},{},{}", p.id, p.t_start_ms, p.duration_ms, p.freq_hz)?;
    }
    w.flush()
}

/// Storage contents, oldest first.
pub fn write_storage(path: &Path, line: &StorageLine) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "position,id")?;
    for (i, id) in line.contents().enumerate() {
        writeln!(w, "{i},{id}")?;
    }
    w.flush()
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "theta,sorted_count,fp_count,fn_count,fp_of_sorted,fn_of_screened,recall"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.theta, r.sorted_count, r.fp_count, r.fn_count, r.fp_of_sorted, r.fn_of_screened, r.recall
        )?;
    }
    w.flush()
}

pub fn write_latencies(path: &Path, rows: &[StageLatency]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "image_px,stage,n,mean_ms,p50_ms,p99_ms")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.image_px,
            r.stage.name(),
            r.stats.n,
            r.stats.mean_ms,
            r.stats.p50_ms,
            r.stats.p99_ms
        )?;
    }
    w.flush()
}
