//! CSV traces.
//!
//! ```text
//! # hedzoc trace, unix time 1760000000
//! k,grad_norm_sq,consensus_err,opt_gap,bits_cum,fn_evals_cum[,e1,e2,e3,e4,e5]
//! 0,...
//! # summary iterations=... status=ok
//! ```
//!
//! Only the first line depends on the wall clock. Floats carry 17
//! significant digits so they parse back to the same `f64`.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::algorithm::{Record, RunTrace};

pub const HEADER: &str = "k,grad_norm_sq,consensus_err,opt_gap,bits_cum,fn_evals_cum";
pub const LYAPUNOV_COLUMNS: &str = ",e1,e2,e3,e4,e5";

/// `f64` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn header(lyapunov: bool) -> String {
    if lyapunov {
        format!("{HEADER}{LYAPUNOV_COLUMNS}")
    } else {
        HEADER.to_string()
    }
}

pub fn record_line(rec: &Record, lyapunov: bool) -> String {
    let mut line = format!(
        "{},{},{},{},{},{}",
        rec.k,
        fmt_f64(rec.grad_norm_sq),
        fmt_f64(rec.consensus_err),
        fmt_f64(rec.opt_gap),
        rec.bits_cum,
        rec.fn_evals_cum
    );
    if lyapunov {
        match &rec.lyapunov {
            Some(l) => {
                for v in [l.e1, l.e2, l.e3, l.e4, l.e5] {
                    line.push(',');
                    line.push_str(&fmt_f64(v));
                }
            }
            None => line.push_str(",,,,,"),
        }
    }
    line
}

/// `# summary key=value ...` closing a trace.
pub fn summary_line(trace: &RunTrace, extra: &[(&str, String)]) -> String {
    let mut line = format!(
        "# summary iterations={} avg_grad_norm_sq={} final_opt_gap={} total_bits={}",
        trace.iterations,
        fmt_f64(trace.avg_grad_norm_sq),
        fmt_f64(trace.final_opt_gap),
        trace.total_bits
    );
    for (k, v) in extra {
        line.push_str(&format!(" {k}={v}"));
    }
    match &trace.diverged {
        None => line.push_str(" status=ok"),
        Some(why) => line.push_str(&format!(" status=diverged reason=\"{}\"", why.replace('"', "'"))),
    }
    line
}

/// Streams records to `out` line by line; nothing written is ever revisited.
pub struct TraceWriter<W: Write> {
    out: W,
    lyapunov: bool,
}

impl<W: Write> TraceWriter<W> {
    /// Writes the timestamp comment and the header.
    pub fn new(mut out: W, lyapunov: bool) -> io::Result<Self> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        writeln!(out, "# hedzoc trace, unix time {secs}")?;
        writeln!(out, "{}", header(lyapunov))?;
        Ok(TraceWriter { out, lyapunov })
    }

    pub fn record(&mut self, rec: &Record) -> io::Result<()> {
        writeln!(self.out, "{}", record_line(rec, self.lyapunov))?;
        self.out.flush()
    }

    pub fn finish(mut self, trace: &RunTrace, extra: &[(&str, String)]) -> io::Result<W> {
        writeln!(self.out, "{}", summary_line(trace, extra))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Drops the timestamp line so two traces can be compared byte for byte.
pub fn without_timestamp(csv: &str) -> &str {
    match csv.split_once('\n') {
        Some((first, rest)) if first.starts_with("# hedzoc trace") => rest,
        _ => csv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn timestamp_stripped() {
        let csv = "# hedzoc trace, unix time 5\nk\n1\n";
        assert_eq!(without_timestamp(csv), "k\n1\n");
        assert_eq!(without_timestamp("k\n"), "k\n");
    }
}
