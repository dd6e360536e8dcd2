//! Network files for external graph viewers: GEXF 1.2, GraphML, edge CSV.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::DependencyNetwork;
use crate::error::{Error, Result};
use crate::pairwise::{Level, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Gexf,
    Graphml,
    EdgeCsv,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gexf" => Ok(ExportFormat::Gexf),
            "graphml" => Ok(ExportFormat::Graphml),
            "edge_csv" | "csv" => Ok(ExportFormat::EdgeCsv),
            _ => Err(Error::Config(format!("unknown export format '{s}'"))),
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn sector_name(n: &Node) -> &'static str {
    n.sector.map(|s| s.name()).unwrap_or("")
}

fn gexf(net: &DependencyNetwork, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<gexf xmlns="http://gexf.net/1.2" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xsi:schemaLocation="http://gexf.net/1.2 http://gexf.net/1.2/gexf.xsd" version="1.2">"#
    )?;
    writeln!(
        w,
        r#"  <meta><creator>comove</creator><description>{} level, gamma {}</description></meta>"#,
        net.level.as_str(),
        net.gamma
    )?;
    writeln!(w, r#"  <graph mode="static" defaultedgetype="undirected">"#)?;
    writeln!(w, r#"    <attributes class="node">"#)?;
    writeln!(w, r#"      <attribute id="0" title="country" type="string"/>"#)?;
    writeln!(w, r#"      <attribute id="1" title="sector" type="string"/>"#)?;
    writeln!(w, r#"      <attribute id="2" title="degree" type="integer"/>"#)?;
    writeln!(w, r#"    </attributes>"#)?;
    writeln!(w, r#"    <nodes>"#)?;
    for (i, n) in net.nodes.iter().enumerate() {
        writeln!(w, r#"      <node id="{i}" label="{}">"#, escape(&n.label))?;
        writeln!(
            w,
            r#"        <attvalues><attvalue for="0" value="{}"/><attvalue for="1" value="{}"/><attvalue for="2" value="{}"/></attvalues>"#,
            n.country.code(),
            escape(sector_name(n)),
            net.degree(i)
        )?;
        writeln!(w, r#"      </node>"#)?;
    }
    writeln!(w, r#"    </nodes>"#)?;
    writeln!(w, r#"    <edges>"#)?;
    for (k, (i, j, wt)) in net.edges().into_iter().enumerate() {
        writeln!(w, r#"      <edge id="{k}" source="{i}" target="{j}" weight="{wt}"/>"#)?;
    }
    writeln!(w, r#"    </edges>"#)?;
    writeln!(w, r#"  </graph>"#)?;
    writeln!(w, r#"</gexf>"#)
}

fn graphml(net: &DependencyNetwork, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    writeln!(
        w,
        r#"  <key id="label" for="node" attr.name="label" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="country" for="node" attr.name="country" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="sector" for="node" attr.name="sector" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="degree" for="node" attr.name="degree" attr.type="int"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#
    )?;
    writeln!(w, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for (i, n) in net.nodes.iter().enumerate() {
        writeln!(
            w,
            r#"    <node id="n{i}"><data key="label">{}</data><data key="country">{}</data><data key="sector">{}</data><data key="degree">{}</data></node>"#,
            escape(&n.label),
            n.country.code(),
            escape(sector_name(n)),
            net.degree(i)
        )?;
    }
    for (k, (i, j, wt)) in net.edges().into_iter().enumerate() {
        writeln!(
            w,
            r#"    <edge id="e{k}" source="n{i}" target="n{j}"><data key="weight">{wt}</data></edge>"#
        )?;
    }
    writeln!(w, r#"  </graph>"#)?;
    writeln!(w, r#"</graphml>"#)
}

fn edge_csv(net: &DependencyNetwork, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "source,target,weight")?;
    for (i, j, wt) in net.edges() {
        writeln!(w, "{},{},{wt}", net.nodes[i].label, net.nodes[j].label)?;
    }
    Ok(())
}

pub fn export_network(net: &DependencyNetwork, format: ExportFormat, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    match format {
        ExportFormat::Gexf => gexf(net, &mut w),
        ExportFormat::Graphml => graphml(net, &mut w),
        ExportFormat::EdgeCsv => edge_csv(net, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

/// Rebuilds a network from an edge CSV over a known node list.
pub fn read_edge_csv(path: &Path, nodes: &[Node], gamma: f64, level: Level) -> Result<DependencyNetwork> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let index: std::collections::HashMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.label.as_str(), i)).collect();
    let n = nodes.len();
    let mut weights = Array2::zeros((n, n));
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let perr = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: k + 2,
            message,
        };
        if rec.len() != 3 {
            return Err(perr(format!("expected 3 fields, got {}", rec.len())));
        }
        let find = |s: &str| index.get(s).copied().ok_or_else(|| perr(format!("unknown node '{s}'")));
        let (i, j) = (find(&rec[0])?, find(&rec[1])?);
        let wt: f64 = rec[2]
            .parse()
            .map_err(|_| perr(format!("invalid weight '{}'", &rec[2])))?;
        if i == j || !(wt > 0.0 && wt <= 1.0) {
            return Err(perr("self-loop or weight outside (0, 1]".into()));
        }
        weights[[i, j]] = wt;
        weights[[j, i]] = wt;
    }
    Ok(DependencyNetwork {
        nodes: nodes.to_vec(),
        weights,
        gamma,
        level,
    })
}
