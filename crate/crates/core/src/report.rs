//! CSV and summary output for one run.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::metrics::MetricSeries;
use crate::sim::{DropReason, KernelStats};
use crate::types::Protocol;

pub const CSV_HEADER: &str =
    "time_s,dropped_pkts,convergence_active,mean_delay_us,mean_hops,control_overhead_bits";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub scenario: String,
    pub protocol: Protocol,
    pub duration_s: u64,
    pub seed: u64,
    pub series: MetricSeries,
    pub stats: KernelStats,
}

fn mean(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

impl Report {
    pub fn csv_name(&self) -> String {
        format!("{}.{}.csv", self.scenario, self.protocol)
    }

    pub fn summary_name(&self) -> String {
        format!("{}.{}.summary.txt", self.scenario, self.protocol)
    }

    pub fn mean_delay_us(&self) -> Option<f64> {
        self.series.total().mean_delay_us()
    }

    pub fn mean_hops(&self) -> Option<f64> {
        self.series.total().mean_hops()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (i, b) in self.series.buckets.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.series.bucket_start_s(i),
                b.dropped,
                u8::from(b.convergence_active),
                mean(b.mean_delay_us()),
                mean(b.mean_hops()),
                b.control_bits
            );
        }
        out
    }

    /// `(key, value)` pairs in output order.
    pub fn summary_pairs(&self) -> Vec<(String, String)> {
        let total = self.series.total();
        let s = &self.stats;
        let mut v: Vec<(String, String)> = vec![
            ("scenario".into(), self.scenario.clone()),
            ("protocol".into(), self.protocol.to_string()),
            ("duration_s".into(), self.duration_s.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("bucket_s".into(), self.series.bucket_s.to_string()),
            ("generated".into(), s.generated.to_string()),
            ("delivered".into(), total.delivered.to_string()),
            ("dropped".into(), total.dropped.to_string()),
        ];
        for r in DropReason::ALL {
            v.push((
                format!("dropped_{}", r.as_str()),
                s.dropped.get(&r).copied().unwrap_or(0).to_string(),
            ));
        }
        v.extend([
            ("in_flight".into(), s.in_flight.to_string()),
            ("mean_delay_us".into(), mean(total.mean_delay_us())),
            ("mean_hops".into(), mean(total.mean_hops())),
            (
                "convergence_active_s".into(),
                self.series.convergence_active_s().to_string(),
            ),
            ("control_overhead_bits".into(), total.control_bits.to_string()),
            ("control_messages".into(), s.control_messages.to_string()),
            ("table_changes".into(), s.table_changes.to_string()),
            ("link_status_warnings".into(), s.status_warnings.to_string()),
        ]);
        v
    }

    pub fn summary(&self) -> String {
        self.summary_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Writes the CSV and summary into `dir`, returning their paths.
    pub fn write(&self, dir: &Path) -> io::Result<(PathBuf, PathBuf)> {
        let csv = dir.join(self.csv_name());
        let summary = dir.join(self.summary_name());
        std::fs::write(&csv, self.csv())?;
        std::fs::write(&summary, self.summary())?;
        Ok((csv, summary))
    }
}

/// Side-by-side table of summary values, one column per report.
pub fn comparison_table(reports: &[Report]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let columns: Vec<Vec<(String, String)>> = reports.iter().map(Report::summary_pairs).collect();
    let mut out = String::new();
    let _ = write!(out, "metric");
    for r in reports {
        let _ = write!(out, ",{}", r.protocol);
    }
    out.push('\n');
    for (row, (key, _)) in first.summary_pairs().iter().enumerate() {
        if key == "protocol" {
            continue;
        }
        let _ = write!(out, "{key}");
        for col in &columns {
            let _ = write!(out, ",{}", col[row].1);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricEvent;
    use crate::types::SimTime;

    fn report(series: MetricSeries) -> Report {
        Report {
            scenario: "hand".into(),
            protocol: Protocol::Rip,
            duration_s: series.len() as u64,
            seed: 0,
            series,
            stats: KernelStats::default(),
        }
    }

    #[test]
    fn zero_duration_is_header_only() {
        let r = report(MetricSeries::new(1, 0));
        assert_eq!(r.csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn hand_built_rows() {
        let mut m = MetricSeries::new(1, 3);
        let at = |s: u64, us: u64| SimTime::from_secs(s) + us;
        m.record(MetricEvent::Delivery { delay_us: 100, hops: 1 }, at(0, 10));
        m.record(MetricEvent::Delivery { delay_us: 300, hops: 2 }, at(0, 20));
        m.record(MetricEvent::ControlBits(480), at(0, 0));
        m.record(MetricEvent::Drop, at(1, 5));
        m.record(MetricEvent::TableChange, at(1, 6));
        m.record(MetricEvent::Delivery { delay_us: 125, hops: 1 }, at(2, 0));
        let r = report(m);
        let csv = r.csv();
        let expected = format!(
            "{CSV_HEADER}\n0,0,0,200.000,1.500,480\n1,1,1,,,0\n2,0,0,125.000,1.000,0\n"
        );
        assert_eq!(csv, expected);
        let summary = r.summary();
        assert!(summary.contains("mean_hops=1.333\n"), "{summary}");
        assert!(summary.contains("dropped=1\n"));
        assert!(summary.contains("convergence_active_s=1\n"));
    }

    #[test]
    fn writes_named_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(MetricSeries::new(1, 2));
        let (c, s) = r.write(dir.path()).unwrap();
        assert!(c.ends_with("hand.rip.csv"));
        assert!(s.ends_with("hand.rip.summary.txt"));
        assert_eq!(std::fs::read_to_string(c).unwrap(), r.csv());
        assert!(r.write(&dir.path().join("missing")).is_err());
    }
}
