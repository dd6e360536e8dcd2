//! Per-window summaries and their table exports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{CorrectionSource, WindowOutcome};
use crate::error::{Error, Result};
use crate::network::{
    assortativity, hypothesis_partition, network_stats, significant_link_counts, Hypothesis, LinkCounts, NetworkStats,
};
use crate::vocab::{Country, Sector};

/// Below this many links a window's fractions are flagged as noisy.
pub const NOISY_LINKS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub index: usize,
    pub start: usize,
    pub len: usize,
    pub label: NaiveDate,
    /// Reason when the window could not be estimated.
    pub skipped: Option<String>,
    pub correction: Option<CorrectionSource>,
    pub n_assets: usize,
    pub stats: NetworkStats,
    pub counts: LinkCounts,
    pub country_fractions: Vec<f64>,
    pub sector_fractions: Vec<f64>,
    pub noisy: bool,
    /// Keyed by hypothesis name; `None` when undefined for the window's network.
    pub assortativity: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub windows: Vec<WindowRow>,
}

fn empty_counts() -> LinkCounts {
    let ns = Sector::ALL.len();
    LinkCounts {
        links: 0,
        by_country: vec![0; Country::ALL.len()],
        by_sector: vec![0; ns],
        sector_matrix: ndarray::Array2::zeros((ns, ns)),
    }
}

/// Summarises window outcomes, sorted by window index.
pub fn rolling_report(outcomes: &[WindowOutcome]) -> Result<RollingReport> {
    if !outcomes.iter().any(|o| matches!(o, WindowOutcome::Done(_))) {
        return Err(Error::InsufficientData("no window was estimated".into()));
    }
    let mut windows: Vec<WindowRow> = outcomes
        .iter()
        .map(|o| match o {
            WindowOutcome::Done(r) => {
                let counts = significant_link_counts(&r.network);
                let assort = Hypothesis::ALL
                    .iter()
                    .map(|&h| {
                        let v = hypothesis_partition(&r.network.nodes, h)
                            .and_then(|p| assortativity(&r.network, &p))
                            .ok();
                        (h.name().to_string(), v)
                    })
                    .collect();
                WindowRow {
                    index: r.window.index,
                    start: r.window.start,
                    len: r.window.len,
                    label: r.label,
                    skipped: None,
                    correction: Some(r.correction_source),
                    n_assets: r.assets.len(),
                    stats: network_stats(&r.network),
                    country_fractions: counts.country_fractions(),
                    sector_fractions: counts.sector_fractions(),
                    noisy: counts.links < NOISY_LINKS,
                    counts,
                    assortativity: assort,
                }
            }
            WindowOutcome::Skipped { window, label, reason } => WindowRow {
                index: window.index,
                start: window.start,
                len: window.len,
                label: *label,
                skipped: Some(reason.clone()),
                correction: None,
                n_assets: 0,
                stats: NetworkStats {
                    empty: true,
                    ..NetworkStats::default()
                },
                counts: empty_counts(),
                country_fractions: vec![0.0; Country::ALL.len()],
                sector_fractions: vec![0.0; Sector::ALL.len()],
                noisy: true,
                assortativity: Hypothesis::ALL.iter().map(|h| (h.name().to_string(), None)).collect(),
            },
        })
        .collect();
    windows.sort_by_key(|w| w.index);
    Ok(RollingReport { windows })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Table {
    w: std::io::BufWriter<std::fs::File>,
    path: std::path::PathBuf,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Table> {
        let path = dir.join(name);
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut t = Table {
            w: std::io::BufWriter::new(f),
            path,
        };
        let analogue = name.trim_end_matches(".csv");
        t.line(&format!("# {analogue}"))?;
        t.line(header)?;
        Ok(t)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.w, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl RollingReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<RollingReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes the five per-window tables into `dir`.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        let countries: Vec<&str> = Country::ALL.iter().map(|c| c.code()).collect();
        let sectors: Vec<&str> = Sector::ALL.iter().map(|s| s.short()).collect();
        let lead = "window,label";
        let key = |w: &WindowRow| format!("{},{}", w.index, w.label);

        let mut t = Table::create(
            dir,
            "fig5_counts.csv",
            &format!("{lead},links,{},{}", countries.join(","), sectors.join(",")),
        )?;
        for w in &self.windows {
            let cs: Vec<String> = w.counts.by_country.iter().map(|v| v.to_string()).collect();
            let ss: Vec<String> = w.counts.by_sector.iter().map(|v| v.to_string()).collect();
            t.line(&format!(
                "{},{},{},{}",
                key(w),
                w.counts.links,
                cs.join(","),
                ss.join(",")
            ))?;
        }
        t.finish()?;

        let mut t = Table::create(
            dir,
            "fig5_fractions.csv",
            &format!("{lead},noisy,{},{}", countries.join(","), sectors.join(",")),
        )?;
        for w in &self.windows {
            let cs: Vec<String> = w.country_fractions.iter().map(|v| v.to_string()).collect();
            let ss: Vec<String> = w.sector_fractions.iter().map(|v| v.to_string()).collect();
            t.line(&format!("{},{},{},{}", key(w), w.noisy, cs.join(","), ss.join(",")))?;
        }
        t.finish()?;

        let mut t = Table::create(
            dir,
            "table4_stats.csv",
            &format!(
                "{lead},n,edges,avg_degree,avg_clustering,avg_path_length,density,transitivity,giant_size,avg_strength,weighted_clustering,weighted_path_length,empty,skipped"
            ),
        )?;
        for w in &self.windows {
            let s = &w.stats;
            t.line(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                key(w),
                s.n,
                s.edges,
                s.avg_degree,
                s.avg_clustering,
                s.avg_path_length,
                s.density,
                s.transitivity,
                s.giant_size,
                s.avg_strength,
                s.weighted_clustering,
                s.weighted_path_length,
                s.empty,
                w.skipped.is_some()
            ))?;
        }
        t.finish()?;

        let names: Vec<&str> = Hypothesis::ALL.iter().map(|h| h.name()).collect();
        let mut t = Table::create(dir, "table5_assortativity.csv", &format!("{lead},{}", names.join(",")))?;
        for w in &self.windows {
            let vals: Vec<String> = names
                .iter()
                .map(|n| opt(w.assortativity.get(*n).copied().flatten()))
                .collect();
            t.line(&format!("{},{}", key(w), vals.join(",")))?;
        }
        t.finish()?;

        let mut t = Table::create(
            dir,
            "fig6_sector_matrix.csv",
            &format!("{lead},sector,{}", sectors.join(",")),
        )?;
        for w in &self.windows {
            for s in w.counts.sector_order() {
                let row: Vec<String> = Sector::ALL
                    .iter()
                    .map(|o| w.counts.sector_matrix[[s.index(), o.index()]].to_string())
                    .collect();
                t.line(&format!("{},{},{}", key(w), s.short(), row.join(",")))?;
            }
        }
        t.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{AdjacencyOptions, DependencyNetwork};
    use crate::pairwise::{CorrectionFactors, Level, Node, PValueMatrix};
    use crate::rolling::{WindowResult, WindowSpec};
    use ndarray::Array2;

    fn done(index: usize, nodes: Vec<Node>, edges: &[(usize, usize)]) -> WindowOutcome {
        let n = nodes.len();
        let mut w = Array2::zeros((n, n));
        for &(a, b) in edges {
            w[[a, b]] = 0.5;
            w[[b, a]] = 0.5;
        }
        let net = DependencyNetwork {
            nodes: nodes.clone(),
            weights: w,
            gamma: AdjacencyOptions::default().gamma,
            level: Level::Sector,
        };
        let pm = PValueMatrix {
            nodes,
            p: Array2::from_elem((n, n), f64::NAN),
            sign: Array2::zeros((n, n)),
            frequency: crate::market::Frequency::Daily,
            level: Level::Sector,
        };
        let d = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        WindowOutcome::Done(Box::new(WindowResult {
            window: WindowSpec {
                index,
                start: index * 95,
                len: 190,
            },
            label: d,
            first_date: d,
            last_date: d,
            assets: vec![],
            excluded: vec![],
            correction_source: CorrectionSource::Window,
            correction: CorrectionFactors::identity(),
            corrected: pm.clone(),
            sector: pm,
            network: net,
        }))
    }

    fn node(c: Country, s: Sector) -> Node {
        Node {
            label: format!("{}_{}", c.code(), s.short()),
            country: c,
            sector: Some(s),
        }
    }

    #[test]
    fn two_country_split() {
        let nodes = vec![
            node(Country::Usa, Sector::Energy),
            node(Country::Ger, Sector::Energy),
            node(Country::Usa, Sector::Financials),
            node(Country::Ger, Sector::Financials),
        ];
        let rep = rolling_report(&[done(0, nodes, &[(0, 1), (2, 3)])]).unwrap();
        let w = &rep.windows[0];
        assert_eq!(w.country_fractions[Country::Usa.index()], 0.5);
        assert_eq!(w.country_fractions[Country::Ger.index()], 0.5);
        assert!((w.sector_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w.noisy);
    }

    #[test]
    fn empty_windows_give_zeros() {
        let nodes = vec![node(Country::Usa, Sector::Energy), node(Country::Ger, Sector::Energy)];
        let rep = rolling_report(&[done(1, nodes.clone(), &[]), done(0, nodes, &[])]).unwrap();
        assert_eq!(rep.windows[0].index, 0);
        for w in &rep.windows {
            assert!(w.stats.empty);
            assert_eq!(w.counts.links, 0);
            assert!(w.country_fractions.iter().all(|&f| f == 0.0));
            assert!(w.assortativity.values().all(Option::is_none));
        }
    }

    #[test]
    fn requires_one_estimated_window() {
        let skipped = WindowOutcome::Skipped {
            window: WindowSpec {
                index: 0,
                start: 0,
                len: 10,
            },
            label: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            reason: "short".into(),
        };
        assert!(rolling_report(&[skipped]).is_err());
    }

    #[test]
    fn tables_and_json_roundtrip() {
        let nodes = vec![
            node(Country::Usa, Sector::Energy),
            node(Country::Ger, Sector::Energy),
            node(Country::Jpn, Sector::Utilities),
        ];
        let skipped = WindowOutcome::Skipped {
            window: WindowSpec {
                index: 1,
                start: 95,
                len: 190,
            },
            label: NaiveDate::from_ymd_opt(2010, 6, 1).unwrap(),
            reason: "short".into(),
        };
        let rep = rolling_report(&[done(0, nodes, &[(0, 1), (1, 2)]), skipped]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        rep.write_tables(dir.path()).unwrap();
        for name in [
            "fig5_counts",
            "fig5_fractions",
            "table4_stats",
            "table5_assortativity",
            "fig6_sector_matrix",
        ] {
            let text = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
            assert!(text.starts_with(&format!("# {name}\n")), "{name}");
        }
        let path = dir.path().join("r.json");
        rep.write_json(&path).unwrap();
        assert_eq!(RollingReport::read_json(&path).unwrap(), rep);
    }
}
