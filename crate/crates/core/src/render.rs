//! SVG figures: force-directed network drawings, consensus threshold panels
//! and a labeled Hamming-distance heatmap.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consensus::{threshold_network, WeightedConsensus};
use crate::error::{Error, Result};
use crate::export::{xml_escape, ExportGraph};

pub const LAYOUT_ITERATIONS: usize = 500;
pub const EMPTY_CAPTION: &str = "no edges above threshold";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub iterations: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            width: 800,
            height: 800,
            iterations: LAYOUT_ITERATIONS,
        }
    }
}

/// Fruchterman–Reingold in the unit square with linear cooling. Positions are
/// a pure function of the inputs and the seed.
pub fn fr_layout(n: usize, edges: &[(usize, usize)], iterations: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    if n < 2 {
        return pos;
    }
    let k = (1.0 / n as f64).sqrt();
    let t0 = 0.1;
    for it in 0..iterations {
        let temp = t0 * (1.0 - it as f64 / iterations as f64);
        let mut disp = vec![(0.0, 0.0); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                let d = (dx * dx + dy * dy).sqrt().max(1e-9);
                let f = k * k / d;
                disp[i].0 += dx / d * f;
                disp[i].1 += dy / d * f;
                disp[j].0 -= dx / d * f;
                disp[j].1 -= dy / d * f;
            }
        }
        for &(a, b) in edges {
            let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let f = d * d / k;
            disp[a].0 -= dx / d * f;
            disp[a].1 -= dy / d * f;
            disp[b].0 += dx / d * f;
            disp[b].1 += dy / d * f;
        }
        for (p, (dx, dy)) in pos.iter_mut().zip(disp) {
            let len = (dx * dx + dy * dy).sqrt();
            if len > 0.0 {
                let step = len.min(temp);
                p.0 += dx / len * step;
                p.1 += dy / len * step;
            }
        }
    }
    pos
}

fn fit_to_box(pos: &[(f64, f64)], w: f64, h: f64, margin: f64) -> Vec<(f64, f64)> {
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = pos.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pos.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (x0, x1) = span(|p| p.0);
    let (y0, y1) = span(|p| p.1);
    let scale = |v: f64, lo: f64, hi: f64, size: f64| {
        if hi - lo < 1e-12 {
            size / 2.0
        } else {
            margin + (v - lo) / (hi - lo) * (size - 2.0 * margin)
        }
    };
    pos.iter()
        .map(|&(x, y)| (scale(x, x0, x1, w), scale(y, y0, y1, h)))
        .collect()
}

fn svg_open(s: &mut String, w: u32, h: u32) {
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
}

/// Draw the connected part of `g`; isolated taxa are omitted. `annotation`
/// goes under the title.
pub fn render_network_svg(g: &ExportGraph, title: &str, annotation: Option<&str>, opts: &RenderOptions) -> String {
    let (w, h) = (opts.width, opts.height);
    let mut s = String::new();
    svg_open(&mut s, w, h);
    let _ = writeln!(
        s,
        "<text class=\"title\" x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"18\">{}</text>",
        w / 2,
        xml_escape(title)
    );
    if let Some(a) = annotation {
        let _ = writeln!(
            s,
            "<text class=\"annotation\" x=\"{}\" y=\"46\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            w / 2,
            xml_escape(a)
        );
    }
    let nodes = g.connected_nodes();
    if nodes.is_empty() {
        let _ = writeln!(
            s,
            "<text class=\"caption\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"16\" fill=\"#666\">{EMPTY_CAPTION}</text>",
            w / 2,
            h / 2
        );
        s.push_str("</svg>\n");
        return s;
    }
    let mut local = vec![usize::MAX; g.taxa.len()];
    for (k, &i) in nodes.iter().enumerate() {
        local[i] = k;
    }
    let edges: Vec<(usize, usize)> = g.edges.iter().map(|e| (local[e.a], local[e.b])).collect();
    let raw = fr_layout(nodes.len(), &edges, opts.iterations, opts.seed);
    let pos = fit_to_box(&raw, w as f64, h as f64, 70.0);
    let max_w = g.edges.iter().map(|e| e.weight).max().unwrap_or(1).max(1) as f64;
    s.push_str("<g class=\"edges\" stroke=\"#4a6fa5\" stroke-linecap=\"round\">\n");
    for (e, &(a, b)) in g.edges.iter().zip(&edges) {
        let _ = writeln!(
            s,
            "<path class=\"edge\" d=\"M{:.2} {:.2} L{:.2} {:.2}\" stroke-width=\"{:.2}\"><title>{} - {} ({})</title></path>",
            pos[a].0,
            pos[a].1,
            pos[b].0,
            pos[b].1,
            1.0 + 5.0 * (e.weight as f64 / max_w),
            xml_escape(&g.taxa[e.a]),
            xml_escape(&g.taxa[e.b]),
            e.weight
        );
    }
    s.push_str("</g>\n<g class=\"nodes\">\n");
    for (k, &i) in nodes.iter().enumerate() {
        let _ = writeln!(
            s,
            "<circle class=\"node\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"7\" fill=\"#f2a541\" stroke=\"#333\"/>",
            pos[k].0, pos[k].1
        );
        let _ = writeln!(
            s,
            "<text class=\"label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
            pos[k].0 + 9.0,
            pos[k].1 - 9.0,
            xml_escape(&g.taxa[i])
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// The consensus thresholded at `t`, annotated with its node and edge counts.
pub fn render_threshold_panel(c: &WeightedConsensus, t: usize, opts: &RenderOptions) -> Result<String> {
    let net = threshold_network(c, t)?;
    let g = ExportGraph::from_consensus(c, Some(t))?;
    let note = format!(
        "t = {t}: {} nodes, {} edges",
        net.connected_node_count(),
        net.edge_count()
    );
    Ok(render_network_svg(
        &g,
        &format!("Consensus, weight > {t} of {}", c.m()),
        Some(&note),
        opts,
    ))
}

/// Heatmap of a pairwise distance matrix with the value printed in each cell.
pub fn render_hamming_svg(labels: &[String], d: &Array2<usize>) -> Result<String> {
    let m = labels.len();
    if d.dim() != (m, m) {
        return Err(Error::Render(format!(
            "distance matrix shape {:?} does not match {m} labels",
            d.dim()
        )));
    }
    for i in 0..m {
        if d[[i, i]] != 0 {
            return Err(Error::Render(format!("nonzero diagonal at {}", labels[i])));
        }
        for j in (i + 1)..m {
            if d[[i, j]] != d[[j, i]] {
                return Err(Error::Render(format!(
                    "distance matrix is not symmetric at ({}, {})",
                    labels[i], labels[j]
                )));
            }
        }
    }
    let cell = 48u32;
    let left = 110u32;
    let top = 120u32;
    let w = left + cell * m as u32 + 20;
    let h = top + cell * m as u32 + 20;
    let max = d.iter().copied().max().unwrap_or(0);
    let mut s = String::new();
    svg_open(&mut s, w, h);
    let _ = writeln!(
        s,
        "<text class=\"title\" x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">Pairwise Hamming distance</text>",
        w / 2
    );
    for (k, l) in labels.iter().enumerate() {
        let c = left + cell * k as u32 + cell / 2;
        let _ = writeln!(
            s,
            "<text class=\"col-label\" x=\"{c}\" y=\"{}\" font-size=\"11\" transform=\"rotate(-45 {c} {})\">{}</text>",
            top - 6,
            top - 6,
            xml_escape(l)
        );
        let r = top + cell * k as u32 + cell / 2 + 4;
        let _ = writeln!(
            s,
            "<text class=\"row-label\" x=\"{}\" y=\"{r}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
            left - 6,
            xml_escape(l)
        );
    }
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    for i in 0..m {
        for j in 0..m {
            let v = d[[i, j]];
            let t = if max == 0 { 0.0 } else { v as f64 / max as f64 };
            let fill = format!(
                "#{:02x}{:02x}{:02x}",
                lerp(247.0, 8.0, t),
                lerp(251.0, 48.0, t),
                lerp(255.0, 107.0, t)
            );
            let (x, y) = (left + cell * j as u32, top + cell * i as u32);
            let _ = writeln!(
                s,
                "<rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"white\"/>"
            );
            let _ = writeln!(
                s,
                "<text class=\"cell-value\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" fill=\"{}\">{v}</text>",
                x + cell / 2,
                y + cell / 2 + 4,
                if t > 0.5 { "white" } else { "black" }
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
