use std::fmt::Write;

use super::{Frame, Rect};

/// How a frame should be turned into an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SvgView {
    /// Outline drawn on top of the frame (the overview's close-up marker).
    pub highlight: Option<Rect>,
    /// Region to crop to. `None` shows the full screen.
    pub crop: Option<Rect>,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
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

/// Renders a frame as a standalone SVG document. Output depends only on the
/// inputs, so re-rendering is byte-identical.
pub fn render_svg(frame: &Frame, screen_size: [i32; 2], view: SvgView) -> String {
    let [w, h] = screen_size;
    let vb = view.crop.unwrap_or(Rect::new(0, 0, w, h));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="{} {} {} {}" data-screen="{}" data-offset="{}">"#,
        vb.w,
        vb.h,
        vb.x,
        vb.y,
        vb.w,
        vb.h,
        escape(&frame.screen_id),
        frame.scroll_offset
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#fafafa"/>"##);
    for el in &frame.drawn {
        let b = el.bounds;
        let _ = writeln!(
            svg,
            r##"<g data-id="{}"><rect x="{}" y="{}" width="{}" height="{}" fill="#ffffff" stroke="#dddddd"/>"##,
            escape(&el.id),
            b.x,
            b.y,
            b.w,
            b.h
        );
        if !el.text.is_empty() {
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" font-family="sans-serif" font-size="24" fill="#202124">{}</text>"##,
                b.x + 24,
                b.y + b.h / 2 + 8,
                escape(&el.text)
            );
        }
        if let Some(checked) = el.checked {
            let (fill, knob) = if checked {
                ("#1a73e8", b.right() - 36)
            } else {
                ("#bdc1c6", b.right() - 68)
            };
            let _ = writeln!(
                svg,
                r##"<rect x="{}" y="{}" width="56" height="28" rx="14" fill="{fill}"/><circle cx="{}" cy="{}" r="12" fill="#ffffff"/>"##,
                b.right() - 80,
                b.y + b.h / 2 - 14,
                knob + 12,
                b.y + b.h / 2
            );
        }
        svg.push_str("</g>\n");
    }
    if let Some(hl) = view.highlight {
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#ff6d00" stroke-width="6"/>"##,
            hl.x, hl.y, hl.w, hl.h
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DrawnElement;

    fn frame() -> Frame {
        Frame {
            screen_id: "apps".into(),
            scroll_offset: 0,
            drawn: vec![DrawnElement {
                id: "row".into(),
                bounds: Rect::new(0, 100, 400, 80),
                text: "Apps & notifications".into(),
                checked: Some(true),
            }],
            tick: 3,
        }
    }

    #[test]
    fn escapes_and_draws() {
        let svg = render_svg(&frame(), [400, 800], SvgView::default());
        assert!(svg.contains("Apps &amp; notifications"));
        assert!(svg.contains(r#"viewBox="0 0 400 800""#));
        assert!(svg.contains("#1a73e8"));
    }

    #[test]
    fn crop_and_highlight() {
        let crop = Rect::new(0, 60, 400, 160);
        let svg = render_svg(
            &frame(),
            [400, 800],
            SvgView {
                highlight: Some(crop),
                crop: Some(crop),
            },
        );
        assert!(svg.contains(r#"viewBox="0 60 400 160""#));
        assert!(svg.contains("#ff6d00"));
    }
}
