//! Intersection-graph dumps for debugging.

use super::index::ClusterIndex;
use std::io::Write;

/// Graphviz rendering: one node per participating ball, labelled by class.
pub fn write_dot<W: Write>(idx: &ClusterIndex<'_>, mut w: W) -> std::io::Result<()> {
    let cfg = idx.config();
    writeln!(w, "graph balls {{")?;
    for i in 0..cfg.len() {
        if let Some(l) = idx.label(i) {
            writeln!(w, "  b{i} [label=\"{i} r={:.3}\" cluster={l}];", cfg.radius(i))?;
        }
    }
    for (a, b) in idx.edges() {
        writeln!(w, "  b{a} -- b{b};")?;
    }
    writeln!(w, "}}")
}

/// CSV edge list `i,j`.
pub fn write_edges_csv<W: Write>(idx: &ClusterIndex<'_>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "i,j")?;
    for (a, b) in idx.edges() {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}
