//! Static SVG 1.1 renderers: sunburst charts for per-kernel resource
//! significance and bar charts for comparative runs.
//!
//! The renderers are pure string builders over report data; every drawn
//! number appears in a `<title>` so it can be checked against
//! `report.json`. Output is deterministic: fixed float formatting, ordered
//! traversal, no timestamps.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::report::ComparisonReport;
use crate::sunburst::{Level, SunburstNode};

const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1b9e77", "#7570b3",
];
const FLAGGED_FILL: &str = "#bdbdbd";

pub fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn polar(cx: f64, cy: f64, r: f64, angle: f64) -> (f64, f64) {
    (cx + r * angle.cos(), cy + r * angle.sin())
}

/// Path data for an annular sector between `a0` and `a1` (radians).
fn annular_sector(cx: f64, cy: f64, r_in: f64, r_out: f64, a0: f64, a1: f64) -> String {
    let span = a1 - a0;
    if span >= 2.0 * PI - 1e-9 {
        // Full ring: two concentric circles with even-odd fill.
        let ring = |r: f64| {
            format!(
                "M {} {} A {r} {r} 0 1 1 {} {} A {r} {r} 0 1 1 {} {} Z",
                fmt(cx + r),
                fmt(cy),
                fmt(cx - r),
                fmt(cy),
                fmt(cx + r),
                fmt(cy)
            )
        };
        if r_in <= 0.0 {
            return ring(r_out);
        }
        return format!("{} {}", ring(r_out), ring(r_in));
    }
    let large = i32::from(span > PI);
    let (x0, y0) = polar(cx, cy, r_out, a0);
    let (x1, y1) = polar(cx, cy, r_out, a1);
    let (x2, y2) = polar(cx, cy, r_in, a1);
    let (x3, y3) = polar(cx, cy, r_in, a0);
    format!(
        "M {} {} A {} {} 0 {large} 1 {} {} L {} {} A {} {} 0 {large} 0 {} {} Z",
        fmt(x0),
        fmt(y0),
        fmt(r_out),
        fmt(r_out),
        fmt(x1),
        fmt(y1),
        fmt(x2),
        fmt(y2),
        fmt(r_in),
        fmt(r_in),
        fmt(x3),
        fmt(y3)
    )
}

fn blend_toward_white(hex: &str, amount: f64) -> String {
    let parse = |s: &str| u8::from_str_radix(s, 16).unwrap_or(0) as f64;
    let (r, g, b) = (parse(&hex[1..3]), parse(&hex[3..5]), parse(&hex[5..7]));
    let mix = |c: f64| (c + (255.0 - c) * amount).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

fn collect_resource_names(node: &SunburstNode, into: &mut Vec<String>) {
    if node.level == Level::Resource && !into.contains(&node.label) {
        into.push(node.label.clone());
    }
    for child in &node.children {
        collect_resource_names(child, into);
    }
}

/// Renders the four-ring sunburst. Sector angles are proportional to node
/// values; the innermost disc is the application.
pub fn render_sunburst(tree: &SunburstNode) -> String {
    let size = 760.0;
    let (cx, cy) = (size / 2.0, size / 2.0);
    let radii = |level: Level| -> (f64, f64) {
        match level {
            Level::Application => (0.0, 70.0),
            Level::Kernel => (74.0, 160.0),
            Level::Resource => (164.0, 250.0),
            Level::Event => (254.0, 340.0),
        }
    };

    let mut resource_names = Vec::new();
    collect_resource_names(tree, &mut resource_names);
    resource_names.sort();
    let resource_color = |name: &str| -> String {
        match resource_names.iter().position(|n| n == name) {
            Some(i) => PALETTE[i % PALETTE.len()].to_string(),
            None => "#888888".to_string(),
        }
    };

    let mut body = String::new();
    // Stack: (node, start_angle, end_angle, fill)
    let full_circle = (-PI / 2.0, 1.5 * PI);
    let mut stack: Vec<(&SunburstNode, f64, f64, String)> =
        vec![(tree, full_circle.0, full_circle.1, "#eeeeee".to_string())];
    let mut kernel_index = 0usize;
    while let Some((node, a0, a1, fill)) = stack.pop() {
        let (r_in, r_out) = radii(node.level);
        let title = format!("{}: {}", xml_escape(&node.label), fmt(node.value));
        let fill = if node.flagged {
            FLAGGED_FILL.to_string()
        } else {
            fill
        };
        let dash = if node.flagged {
            " stroke-dasharray=\"4 2\""
        } else {
            ""
        };
        if node.level == Level::Application {
            body.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" stroke=\"#ffffff\"><title>{title}</title></circle>\n",
                fmt(cx),
                fmt(cy),
                fmt(r_out)
            ));
            body.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
                fmt(cx),
                fmt(cy + 5.0),
                xml_escape(&node.label)
            ));
        } else {
            let d = annular_sector(cx, cy, r_in, r_out, a0, a1);
            body.push_str(&format!(
                "  <path d=\"{d}\" fill=\"{fill}\" fill-rule=\"evenodd\" stroke=\"#ffffff\" stroke-width=\"1\"{dash}><title>{title}</title></path>\n"
            ));
            // Label sectors wide enough to hold text.
            if a1 - a0 > 0.35 && node.level != Level::Event {
                let mid = (a0 + a1) / 2.0;
                let (tx, ty) = polar(cx, cy, (r_in + r_out) / 2.0, mid);
                body.push_str(&format!(
                    "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                    fmt(tx),
                    fmt(ty + 4.0),
                    xml_escape(&node.label)
                ));
            }
        }

        // Children subdivide the parent's span proportionally to value.
        if node.value > 0.0 && !node.children.is_empty() {
            let mut cursor = a0;
            let span = a1 - a0;
            for child in &node.children {
                let child_span = span * child.value / node.value;
                let fill = match child.level {
                    Level::Kernel => {
                        kernel_index += 1;
                        if kernel_index.is_multiple_of(2) {
                            "#d9d9d9"
                        } else {
                            "#c6c6c6"
                        }
                        .to_string()
                    }
                    Level::Resource => resource_color(&child.label),
                    Level::Event => blend_toward_white(&resource_color(&node.label), 0.45),
                    Level::Application => "#eeeeee".to_string(),
                };
                stack.push((child, cursor, cursor + child_span, fill));
                cursor += child_span;
            }
        }
    }

    // Legend for the resource ring.
    let mut legend = String::new();
    for (i, name) in resource_names.iter().enumerate() {
        let y = 24.0 + i as f64 * 20.0;
        legend.push_str(&format!(
            "  <rect x=\"16\" y=\"{}\" width=\"13\" height=\"13\" fill=\"{}\"/>\n  <text x=\"34\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            fmt(y),
            if name == crate::rsm::UNCATEGORIZED_GROUP { FLAGGED_FILL.to_string() } else { resource_color(name) },
            fmt(y + 11.0),
            xml_escape(name)
        ));
    }

    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n\
         {legend}{body}</svg>\n"
    )
}

/// Renders the comparative bar chart: one signed bar per resource group in
/// [-1, 1] around a zero baseline. Undefined usage changes draw as hollow
/// markers instead of bars.
pub fn render_compare(comparison: &ComparisonReport) -> String {
    let groups: &BTreeMap<String, _> = &comparison.resources;
    let slot = 80.0;
    let left = 70.0;
    let width = (left + groups.len() as f64 * slot + 30.0).max(420.0);
    let (top, bottom) = (48.0, 400.0);
    let y_zero = (top + bottom) / 2.0;
    let y_scale = (bottom - top) / 2.0;
    let height = bottom + 56.0;

    let mut body = String::new();
    body.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{} vs {}</text>\n",
        fmt(width / 2.0),
        xml_escape(&comparison.pair[0]),
        xml_escape(&comparison.pair[1])
    ));

    for tick in [-1.0f64, -0.5, 0.0, 0.5, 1.0] {
        let y = y_zero - tick * y_scale;
        let stroke = if tick == 0.0 { "#333333" } else { "#dddddd" };
        body.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\"/>\n",
            fmt(left - 8.0),
            fmt(y),
            fmt(width - 20.0),
            fmt(y)
        ));
        body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt(left - 12.0),
            fmt(y + 4.0),
            fmt(tick)
        ));
    }

    for (i, (group, entry)) in groups.iter().enumerate() {
        let x_mid = left + (i as f64 + 0.5) * slot;
        let bar_width = 42.0;
        let title = format!(
            "{}: bar={} neg_rsm={} pos_rsm={} rel_change={}",
            xml_escape(group),
            fmt(entry.bar_value),
            fmt(entry.neg_rsm),
            fmt(entry.pos_rsm),
            entry
                .rel_change
                .map(fmt)
                .unwrap_or_else(|| "undefined".to_string())
        );
        if entry.rel_change.is_none() {
            body.push_str(&format!(
                "  <rect x=\"{}\" y=\"{}\" width=\"{bar_width}\" height=\"10\" fill=\"none\" stroke=\"#999999\" stroke-dasharray=\"3 2\"><title>{title}</title></rect>\n",
                fmt(x_mid - bar_width / 2.0),
                fmt(y_zero - 5.0)
            ));
        } else {
            let value = entry.bar_value.clamp(-1.0, 1.0);
            let bar_height = value.abs() * y_scale;
            let y = if value >= 0.0 {
                y_zero - bar_height
            } else {
                y_zero
            };
            let fill = if value >= 0.0 { "#2c7fb8" } else { "#d95f02" };
            body.push_str(&format!(
                "  <rect x=\"{}\" y=\"{}\" width=\"{bar_width}\" height=\"{}\" fill=\"{fill}\"><title>{title}</title></rect>\n",
                fmt(x_mid - bar_width / 2.0),
                fmt(y),
                fmt(bar_height)
            ));
        }
        body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            fmt(x_mid),
            fmt(bottom + 24.0),
            xml_escape(group)
        ));
    }

    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{body}</svg>\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    )
}
