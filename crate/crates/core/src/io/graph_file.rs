use crate::covariance::AdjacencyGraph;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub augmented: bool,
}

/// Graph over the data's strata, with connectivity before and after the
/// augmentation edges.
#[derive(Debug, Clone, Serialize)]
pub struct GraphReport {
    #[serde(skip)]
    pub graph: AdjacencyGraph,
    pub base_components: Vec<Vec<String>>,
    pub components: Vec<Vec<String>>,
    pub augmented_edges: Vec<(String, String)>,
}

impl GraphReport {
    pub fn is_connected(&self) -> bool {
        self.components.len() == 1
    }
}

fn named(graph: &AdjacencyGraph, names: &[String]) -> Vec<Vec<String>> {
    let mut comps: Vec<Vec<String>> =
        graph.components().into_iter().map(|c| c.into_iter().map(|k| names[k].clone()).collect()).collect();
    for c in &mut comps {
        c.sort();
    }
    comps.sort();
    comps
}

/// Build the graph from edge rows. Edge order does not matter.
pub fn graph_from_rows(rows: &[EdgeRow], names: &[String]) -> Result<GraphReport> {
    let id = |s: &str| -> Result<usize> {
        names.iter().position(|n| n == s).ok_or_else(|| Error::Data(format!("graph refers to unknown stratum '{s}'")))
    };
    let mut base = BTreeSet::new();
    let mut extra = BTreeSet::new();
    for r in rows {
        if r.from == r.to {
            return Err(Error::Data(format!("graph has a self-loop at '{}'", r.from)));
        }
        let (a, b) = (id(&r.from)?, id(&r.to)?);
        let e = (a.min(b), a.max(b));
        if r.augmented {
            extra.insert(e);
        } else {
            base.insert(e);
        }
    }
    let before = AdjacencyGraph::new(names.len(), base.iter().copied())?;
    let extra: Vec<_> = extra.difference(&base).copied().collect();
    let graph = before.with_edges(extra.iter().copied())?;
    Ok(GraphReport {
        base_components: named(&before, names),
        components: named(&graph, names),
        augmented_edges: extra.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect(),
        graph,
    })
}

/// Read a headered `from,to,augmented` edge list.
pub fn load_graph<R: Read>(reader: R, names: &[String]) -> Result<GraphReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let rows = rdr
        .deserialize()
        .enumerate()
        .map(|(n, r)| r.map_err(|e| Error::Data(format!("graph row {}: {e}", n + 1))))
        .collect::<Result<Vec<EdgeRow>>>()?;
    graph_from_rows(&rows, names)
}

pub fn write_graph<W: Write>(rows: &[EdgeRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_components() {
        let csv = "from,to,augmented\n1,2,false\n3,4,false\n";
        let r = load_graph(csv.as_bytes(), &names(&["1", "2", "3", "4"])).unwrap();
        assert_eq!(r.components.len(), 2);
    }

    #[test]
    fn islands_joined_by_augmentation() {
        let n = names(&["DE", "FR", "PL", "UK", "IE", "SE", "FI", "GR", "BG"]);
        let mut rows: Vec<EdgeRow> = [("DE", "FR"), ("DE", "PL"), ("UK", "IE"), ("SE", "FI"), ("GR", "BG")]
            .iter()
            .map(|(a, b)| EdgeRow { from: a.to_string(), to: b.to_string(), augmented: false })
            .collect();
        let r = graph_from_rows(&rows, &n).unwrap();
        assert_eq!(r.components.len(), 4);
        for (a, b) in [("UK", "FR"), ("SE", "DE"), ("GR", "PL")] {
            rows.push(EdgeRow { from: a.into(), to: b.into(), augmented: true });
        }
        let r = graph_from_rows(&rows, &n).unwrap();
        assert_eq!(r.base_components.len(), 4);
        assert!(r.is_connected());
        assert_eq!(r.augmented_edges.len(), 3);
        rows.reverse();
        let again = graph_from_rows(&rows, &n).unwrap();
        assert_eq!(again.graph.edges().collect::<Vec<_>>(), r.graph.edges().collect::<Vec<_>>());
    }

    #[test]
    fn bad_edges() {
        let n = names(&["a", "b"]);
        assert!(load_graph("from,to,augmented\na,a,false\n".as_bytes(), &n).is_err());
        assert!(load_graph("from,to,augmented\na,c,false\n".as_bytes(), &n).is_err());
    }
}
