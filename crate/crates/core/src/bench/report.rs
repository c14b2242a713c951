//! Report files: one table per metric (rows = structures, columns = loss
//! configurations) as CSV and aligned text, plus long-form data.

use std::fmt::Write as _;
use std::path::Path;

use super::run::RunReport;
use super::split::val_overlap;
use crate::error::Result;
use crate::metrics::MeanStd;

/// Metrics reported per structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Dice,
    Hausdorff,
    CcMae,
    SizeError,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Dice,
        Metric::Hausdorff,
        Metric::CcMae,
        Metric::SizeError,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Dice => "dsc",
            Metric::Hausdorff => "hd",
            Metric::CcMae => "cc_mae",
            Metric::SizeError => "size_err",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Metric::Dice => "Dice score (mean ± std over runs)",
            Metric::Hausdorff => "Hausdorff distance in pixels (mean ± std over runs)",
            Metric::CcMae => "Connected-component count MAE (mean ± std over runs)",
            Metric::SizeError => "Relative size error (mean ± std over runs)",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::Dice
    }
}

/// Cell of a metric table, with the number of excluded records for HD.
fn cell(
    report: &RunReport,
    metric: Metric,
    config: usize,
    class: usize,
) -> Option<(MeanStd, usize)> {
    match metric {
        Metric::SizeError => report.size_error(config, class).map(|m| (m, 0)),
        _ => {
            let agg = report.aggregate(config, class)?;
            match metric {
                Metric::Dice => Some((agg.dsc, 0)),
                Metric::Hausdorff => agg.hd.map(|m| (m, agg.hd_excluded)),
                _ => Some((agg.cc_error, 0)),
            }
        }
    }
}

impl RunReport {
    /// Mean of one metric cell, `None` when undefined.
    pub fn metric_mean(&self, metric: Metric, config: usize, class: usize) -> Option<f64> {
        cell(self, metric, config, class).map(|(m, _)| m.mean)
    }

    fn annotation(&self, metric: Metric, config: usize, class: usize) -> &'static str {
        let Some(base) = self.baseline() else {
            return "";
        };
        if base == config {
            return "";
        }
        match (
            self.metric_mean(metric, config, class),
            self.metric_mean(metric, base, class),
        ) {
            (Some(v), Some(b)) if v != b => {
                if (v > b) == metric.higher_is_better() {
                    " (+)"
                } else {
                    " (-)"
                }
            }
            _ => "",
        }
    }

    fn cell_text(&self, metric: Metric, config: usize, class: usize) -> String {
        match cell(self, metric, config, class) {
            Some((m, _)) => format!(
                "{:.4} ± {:.4}{}",
                m.mean,
                m.std,
                self.annotation(metric, config, class)
            ),
            None => "n/a".to_owned(),
        }
    }

    fn table_rows(&self, metric: Metric) -> Vec<Vec<String>> {
        let mut rows = vec![std::iter::once("structure".to_owned())
            .chain(self.configs.iter().cloned())
            .collect::<Vec<_>>()];
        for (class, name) in self.structures.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend((0..self.configs.len()).map(|c| self.cell_text(metric, c, class)));
            rows.push(row);
        }
        rows
    }

    /// CSV table of one metric.
    pub fn metric_csv(&self, metric: Metric) -> String {
        let mut out = String::new();
        for row in self.table_rows(metric) {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// All metric tables as aligned text.
    pub fn tables_text(&self) -> String {
        let mut out = String::new();
        for metric in Metric::ALL {
            let rows = self.table_rows(metric);
            let widths: Vec<usize> = (0..rows[0].len())
                .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
                .collect();
            let _ = writeln!(out, "{}", metric.title());
            for row in &rows {
                let cells: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                    .collect();
                let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            }
            out.push('\n');
        }
        if !self.failures.is_empty() {
            let _ = writeln!(
                out,
                "{} refinements failed; see failures.csv",
                self.failures.len()
            );
        }
        out
    }

    /// Long form: metric, structure, config, mean, std, runs, excluded.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("metric,structure,config,mean,std,runs,excluded\n");
        for metric in Metric::ALL {
            for (class, name) in self.structures.iter().enumerate() {
                for (c, config) in self.configs.iter().enumerate() {
                    let runs = self.aggregate(c, class).map_or(0, |a| a.runs);
                    match cell(self, metric, c, class) {
                        Some((m, ex)) => {
                            let _ = writeln!(
                                out,
                                "{},{name},{config},{:.6},{:.6},{runs},{ex}",
                                metric.key(),
                                m.mean,
                                m.std
                            );
                        }
                        None => {
                            let _ = writeln!(out, "{},{name},{config},,,{runs},", metric.key());
                        }
                    }
                }
            }
        }
        out
    }

    /// Per-run means of every metric.
    pub fn per_run_csv(&self) -> String {
        let mut out =
            String::from("run,config,structure,items,dsc,hd,hd_excluded,cc_mae,size_err\n");
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        for run in 0..self.runs {
            for (c, config) in self.configs.iter().enumerate() {
                for (class, name) in self.structures.iter().enumerate() {
                    let items: Vec<_> = self
                        .outcomes
                        .iter()
                        .filter(|o| o.run == run && o.config == c)
                        .collect();
                    let n = items.len();
                    let mean = |f: &dyn Fn(&super::ItemOutcome) -> Option<f64>| {
                        let v: Vec<f64> = items.iter().filter_map(|o| f(o)).collect();
                        MeanStd::of(&v).map(|m| m.mean)
                    };
                    let dsc = mean(&|o| Some(o.records[class].dsc));
                    let hd = mean(&|o| o.records[class].hd);
                    let excluded = items
                        .iter()
                        .filter(|o| o.records[class].hd.is_none())
                        .count();
                    let cc = mean(&|o| Some(o.records[class].cc_error));
                    let size = mean(&|o| Some(o.size_error[class]));
                    let _ = writeln!(
                        out,
                        "{run},{config},{name},{n},{},{},{excluded},{},{}",
                        fmt(dsc),
                        fmt(hd),
                        fmt(cc),
                        fmt(size)
                    );
                }
            }
        }
        out
    }

    /// Structure size against Dice for every validation item.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("run,config,item,structure,size_pct,dsc\n");
        for o in &self.outcomes {
            for (class, name) in self.structures.iter().enumerate() {
                let pct = 100.0 * o.true_size[class] as f64 / self.pixels as f64;
                let _ = writeln!(
                    out,
                    "{},{},{},{name},{pct:.6},{:.6}",
                    o.run, self.configs[o.config], o.item, o.records[class].dsc
                );
            }
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from("run,config,item,message\n");
        for f in &self.failures {
            let _ = writeln!(
                out,
                "{},{},{},\"{}\"",
                f.run,
                self.configs[f.config],
                f.item,
                f.message.replace('"', "\"\"")
            );
        }
        out
    }

    pub fn splits_csv(&self) -> String {
        let mut out = String::from("run,item,role\n");
        for (run, s) in self.splits.iter().enumerate() {
            let mut all: Vec<(usize, &str)> = s
                .train
                .iter()
                .map(|&i| (i, "train"))
                .chain(s.val.iter().map(|&i| (i, "val")))
                .collect();
            all.sort_unstable();
            for (i, role) in all {
                let _ = writeln!(out, "{run},{i},{role}");
            }
        }
        out
    }

    /// Pairwise overlap of the validation sets of different runs.
    pub fn split_overlap_csv(&self) -> String {
        let mut out = String::from("run_a,run_b,shared_val,jaccard\n");
        for a in 0..self.splits.len() {
            for b in a + 1..self.splits.len() {
                let (shared, j) = val_overlap(&self.splits[a], &self.splits[b]);
                let _ = writeln!(out, "{a},{b},{shared},{j:.6}");
            }
        }
        out
    }

    /// Writes every report file into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for metric in Metric::ALL {
            std::fs::write(
                dir.join(format!("{}.csv", metric.key())),
                self.metric_csv(metric),
            )?;
        }
        std::fs::write(dir.join("tables.txt"), self.tables_text())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(dir.join("per_run.csv"), self.per_run_csv())?;
        std::fs::write(dir.join("scatter_size_dice.csv"), self.scatter_csv())?;
        std::fs::write(dir.join("failures.csv"), self.failures_csv())?;
        std::fs::write(dir.join("splits.csv"), self.splits_csv())?;
        std::fs::write(dir.join("split_overlap.csv"), self.split_overlap_csv())?;
        Ok(())
    }
}
