//! Graphviz DOT rendering of representatives and orbit templates.

use std::fmt::Write as _;

use crate::graph::Graph;
use crate::grounding::OrbitDecomposition;

const PALETTE: [&str; 10] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
    "#66c2a5", "#ffd92f",
];
const EDGE_STYLES: [&str; 3] = ["bold", "dashed", "dotted"];

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Undirected DOT graph with node symbols as labels; `anchor` is drawn with
/// a double circle.
pub fn graph_to_dot(g: &Graph, name: &str, anchor: Option<usize>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph {} {{", quote(name));
    let _ = writeln!(s, "  node [shape=circle];");
    for v in 0..g.num_nodes() {
        let label = g
            .node_label(v)
            .map_or_else(|| v.to_string(), |l| l.to_string());
        let shape = if Some(v) == anchor {
            ", shape=doublecircle"
        } else {
            ""
        };
        let _ = writeln!(s, "  n{v} [label={}{shape}];", quote(&label));
    }
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        match g.edge_label(e) {
            Some(l) => {
                let _ = writeln!(s, "  n{a} -- n{b} [label={}];", quote(l));
            }
            None => {
                let _ = writeln!(s, "  n{a} -- n{b};");
            }
        }
    }
    s.push_str("}\n");
    s
}

/// Template with nodes filled by orbit color and edges styled by edge orbit.
pub fn orbits_to_dot(g: &Graph, dec: &OrbitDecomposition, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph {} {{", quote(name));
    let _ = writeln!(s, "  node [shape=circle, style=filled];");
    let orbit_of = dec.orbit_of(g.num_nodes());
    for (v, &o) in orbit_of.iter().enumerate() {
        let shape = if v == dec.anchor {
            ", shape=doublecircle"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "  n{v} [label=\"{v}\\no{o}\", fillcolor={}{shape}];",
            quote(PALETTE[o % PALETTE.len()])
        );
    }
    let base = dec.orbits.len();
    let mut edge_orbit = vec![0; g.num_edges()];
    for (j, orbit) in dec.edge_orbits.iter().enumerate() {
        for &e in orbit {
            edge_orbit[e] = j;
        }
    }
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        let j = edge_orbit[e];
        let _ = writeln!(
            s,
            "  n{a} -- n{b} [style={}, label=\"o{}\"];",
            EDGE_STYLES[j % EDGE_STYLES.len()],
            base + j
        );
    }
    s.push_str("}\n");
    s
}
