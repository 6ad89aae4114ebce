//! Gnuplot scripts over the logs of a batch.
//!
//! Scripts reference files relative to the output directory and are meant
//! to be run from there: `cd <out> && gnuplot plots/tracking.gp`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use super::batch::RunRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// `r` and `x1` over time.
    Tracking,
    /// `e1` over the whole run and zoomed on the metrics window.
    TrackingError,
    /// `x̃2` over time.
    ObserverError,
    /// `θ̃1`, `θ̃2` for every gain.
    ParameterErrors,
    /// `u` and `u − u*`.
    Control,
    /// Sliding-window `λ_min` from the excitation analysis.
    Pe,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Tracking,
        Figure::TrackingError,
        Figure::ObserverError,
        Figure::ParameterErrors,
        Figure::Control,
        Figure::Pe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Tracking => "tracking",
            Figure::TrackingError => "tracking_error",
            Figure::ObserverError => "observer_error",
            Figure::ParameterErrors => "parameter_errors",
            Figure::Control => "control",
            Figure::Pe => "pe",
        }
    }

    fn columns(self) -> &'static [&'static str] {
        match self {
            Figure::Tracking => &["t", "r", "x1"],
            Figure::TrackingError => &["t", "e1"],
            Figure::ObserverError => &["t", "tilde_x2"],
            Figure::ParameterErrors => &["t", "tilde_theta1", "tilde_theta2"],
            Figure::Control => &["t", "u", "u_star"],
            Figure::Pe => &[],
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Figure::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown figure `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Column names from the first non-comment line of a CSV file.
fn header(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        if !line.starts_with('#') {
            return Ok(line.split(',').map(|s| s.trim().to_string()).collect());
        }
    }
    Ok(Vec::new())
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn series(runs: &[&RunRecord], file: impl Fn(&RunRecord) -> String, using: &str, title: impl Fn(&RunRecord) -> String) -> String {
    runs.iter()
        .map(|r| format!("{} using {using} with lines title {}", quote(&file(r)), quote(&title(r))))
        .collect::<Vec<_>>()
        .join(", \\\n     ")
}

/// Builds the gnuplot script for `figure`. Fails with
/// [`Error::MissingColumn`] when a log lacks a needed column, and with
/// [`Error::Excitation`] for the `pe` figure without excitation output.
pub fn emit_plot_script(out_dir: &Path, runs: &[RunRecord], figure: Figure) -> Result<String> {
    let runs: Vec<&RunRecord> = runs.iter().collect();
    if runs.is_empty() {
        return Err(Error::Config("no runs to plot".into()));
    }
    for r in &runs {
        let cols = header(&out_dir.join(&r.log))?;
        for need in figure.columns() {
            if !cols.iter().any(|c| c == need) {
                return Err(Error::MissingColumn((*need).to_string()));
            }
        }
    }
    let label = |r: &RunRecord| format!("k1={}", r.k1);
    let log = |r: &RunRecord| r.log.clone();

    let mut s = String::new();
    s.push_str(&format!("# fricobs figure: {}\n", figure.name()));
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 1200,800\n");
    s.push_str(&format!("set output 'plots/{}.png'\n", figure.name()));
    s.push_str("set xlabel 't [s]'\nset grid\n");

    match figure {
        Figure::Tracking => {
            s.push_str("set ylabel 'position'\n");
            let mut plot = format!(
                "plot {} using 't':'r' with lines dt 2 lw 2 title 'r'",
                quote(&runs[0].log)
            );
            plot.push_str(", \\\n     ");
            plot.push_str(&series(&runs, log, "'t':'x1'", |r| format!("x1 ({})", label(r))));
            s.push_str(&plot);
            s.push('\n');
        }
        Figure::TrackingError => {
            let [w0, w1] = runs[0].metrics_window;
            s.push_str("set multiplot layout 2,1\nset ylabel 'e1'\n");
            s.push_str(&format!("plot {}\n", series(&runs, log, "'t':'e1'", label)));
            s.push_str(&format!("set xrange [{w0}:{w1}]\nset title 'metrics window'\n"));
            s.push_str(&format!("plot {}\n", series(&runs, log, "'t':'e1'", label)));
            s.push_str("unset multiplot\n");
        }
        Figure::ObserverError => {
            s.push_str("set ylabel 'velocity estimation error'\n");
            s.push_str(&format!("plot {}\n", series(&runs, log, "'t':'tilde_x2'", label)));
        }
        Figure::ParameterErrors => {
            s.push_str("set multiplot layout 2,1\n");
            s.push_str("set ylabel 'theta1 error'\n");
            s.push_str(&format!("plot {}\n", series(&runs, log, "'t':'tilde_theta1'", label)));
            s.push_str("set ylabel 'theta2 error'\n");
            s.push_str(&format!("plot {}\n", series(&runs, log, "'t':'tilde_theta2'", label)));
            s.push_str("unset multiplot\n");
        }
        Figure::Control => {
            s.push_str("set multiplot layout 2,1\n");
            s.push_str("set ylabel 'u'\n");
            s.push_str(&format!("plot {}\n", series(&runs, log, "'t':'u'", label)));
            s.push_str("set ylabel 'u - u*'\n");
            s.push_str(&format!(
                "plot {}\n",
                series(&runs, log, "'t':(column('u')-column('u_star'))", label)
            ));
            s.push_str("unset multiplot\n");
        }
        Figure::Pe => {
            let with: Vec<&RunRecord> = runs.iter().copied().filter(|r| r.excitation.is_some()).collect();
            if with.is_empty() {
                return Err(Error::Excitation("no excitation output in this batch".into()));
            }
            for r in &with {
                let path = out_dir.join(r.excitation.as_ref().expect("filtered"));
                if !header(&path)?.iter().any(|c| c == "lambda_min") {
                    return Err(Error::MissingColumn("lambda_min".into()));
                }
            }
            s.push_str("set xlabel 'window start [s]'\nset ylabel 'lambda_min'\nset logscale y\n");
            s.push_str(&format!(
                "plot {}\n",
                series(
                    &with,
                    |r| r.excitation.clone().expect("filtered"),
                    "'t_start':'lambda_min'",
                    label
                )
            ));
        }
    }
    Ok(s)
}
