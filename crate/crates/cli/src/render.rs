//! CSV and SVG writers.

use std::fmt::Write;

use quadomain::checks::CheckRecord;
use quadomain::flow::EvolutionState;
use quadomain::Result;

/// One row per state: `t, a0, re_a1, im_a1, ..., M0, re_M1, im_M1, ...`,
/// padded with zeros up to the largest order on the trajectory.
pub fn trajectory_csv(states: &[EvolutionState]) -> String {
    let n = states.iter().map(|s| s.domain.order()).max().unwrap_or(0);
    let mut out = String::from("t,a0");
    for k in 1..=n {
        write!(out, ",re_a{k},im_a{k}").unwrap();
    }
    out.push_str(",M0");
    for k in 1..=n {
        write!(out, ",re_M{k},im_M{k}").unwrap();
    }
    out.push_str(",iterations,residual,halvings\n");
    for s in states {
        let a = s.domain.coeffs();
        write!(out, "{},{}", num(s.t), num(a[0].re)).unwrap();
        for k in 1..=n {
            let c = a.get(k).copied().unwrap_or_default();
            write!(out, ",{},{}", num(c.re), num(c.im)).unwrap();
        }
        write!(out, ",{}", num(s.moments.m0)).unwrap();
        for k in 1..=n {
            let m = s.moments.get(k);
            write!(out, ",{},{}", num(m.re), num(m.im)).unwrap();
        }
        writeln!(out, ",{},{},{}", s.stats.iterations, num(s.stats.residual), s.stats.halvings).unwrap();
    }
    out
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

const SIZE: f64 = 512.0;

/// Boundary polylines for every `stride`-th state (and the last), all in
/// one viewport fitted to the whole trajectory.
pub fn svg_frames(states: &[EvolutionState], samples: usize, stride: usize) -> Result<Vec<(usize, String)>> {
    let mut picked: Vec<usize> = (0..states.len()).step_by(stride).collect();
    if let Some(last) = states.len().checked_sub(1) {
        if picked.last() != Some(&last) {
            picked.push(last);
        }
    }
    let curves = picked
        .iter()
        .map(|&i| states[i].domain.sample_boundary(samples).map(|s| s.z))
        .collect::<Result<Vec<_>>>()?;
    let extent = curves.iter().flatten().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    let half = 1.05 * extent.max(f64::MIN_POSITIVE);
    let scale = SIZE / (2.0 * half);
    let mut frames = Vec::new();
    for (&i, zs) in picked.iter().zip(&curves) {
        let mut pts = String::new();
        for z in zs.iter().chain(zs.first()) {
            if !pts.is_empty() {
                pts.push(' ');
            }
            write!(pts, "{:.3},{:.3}", (z.re + half) * scale, (half - z.im) * scale).unwrap();
        }
        let mut svg = String::new();
        writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        )
        .unwrap();
        writeln!(svg, r#"<title>t = {}</title>"#, states[i].t).unwrap();
        writeln!(svg, r#"<polyline fill="none" stroke="black" stroke-width="1" points="{pts}"/>"#).unwrap();
        svg.push_str("</svg>\n");
        frames.push((i, svg));
    }
    Ok(frames)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn checks_csv(records: &[CheckRecord]) -> String {
    let mut out = String::from("name,residual,tolerance,pass,detail,error\n");
    for r in records {
        let residual = r.residual.map(num).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.name),
            residual,
            num(r.tolerance),
            r.pass,
            csv_field(r.detail.as_deref().unwrap_or("")),
            csv_field(r.error.as_deref().unwrap_or(""))
        )
        .unwrap();
    }
    out
}
