use std::fmt::Write;

use hea_dvae::design::LatentMap;

const SIZE: f64 = 560.0;
const MARGIN: f64 = 40.0;

/// Density shading under the encoded points, coloured by label.
pub fn latent_map_svg(map: &LatentMap) -> String {
    let d = &map.density;
    let (x0, x1) = (d.x[0], *d.x.last().unwrap());
    let (y0, y1) = (d.y[0], *d.y.last().unwrap());
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * SIZE;
    let sy = |y: f64| MARGIN + SIZE - (y - y0) / (y1 - y0) * SIZE;
    let peak = d
        .density
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (cw, ch) = (SIZE / d.x.len() as f64, SIZE / d.y.len() as f64);

    let total = SIZE + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (j, row) in d.density.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let a = v / peak;
            if a < 0.01 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="black" fill-opacity="{:.3}"/>"#,
                sx(d.x[i]) - cw / 2.0,
                sy(d.y[j]) - ch / 2.0,
                cw,
                ch,
                0.45 * a
            );
        }
    }
    for p in &map.points {
        let c = p.z.coords();
        let colour = match p.label {
            Some(l) if l.is_single_phase() => "#1f77b4",
            Some(_) => "#d62728",
            None => "#7f7f7f",
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{colour}" fill-opacity="0.8"><title>{} p={:.3}</title></circle>"#,
            sx(c[0]),
            sy(c[1]),
            p.formula,
            p.probability
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">z1 [{x0:.2}, {x1:.2}]</text>"#,
        MARGIN + SIZE / 2.0,
        total - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">z2 [{y0:.2}, {y1:.2}]</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    out.push_str("</svg>\n");
    out
}
