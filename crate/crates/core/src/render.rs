//! Gantt charts of timed schedules: one row per machine, one box per slot.

use std::fmt::Write;

use crate::schedule::{Slot, TimedSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanttOptions {
    /// SVG: pixels per time unit. Text: time units per character.
    pub scale: f64,
    /// Draw setup changes and maintenance right before the batch they
    /// precede instead of as early as possible.
    pub late_changeovers: bool,
}

impl Default for GanttOptions {
    fn default() -> Self {
        GanttOptions {
            scale: 1.0,
            late_changeovers: true,
        }
    }
}

fn kind(slot: &Slot) -> &'static str {
    match slot {
        Slot::Batch(_) => "batch",
        Slot::SetupChange(_) => "setup",
        Slot::Maint(_) => "maint",
    }
}

fn prepared(ts: &TimedSchedule, opts: &GanttOptions) -> TimedSchedule {
    if opts.late_changeovers {
        ts.with_late_changeovers()
    } else {
        ts.clone()
    }
}

/// A character bar per machine (`#` batch, `s` setup, `m` maintenance,
/// `.` idle) followed by the slot list with start and end times.
pub fn gantt_text(ts: &TimedSchedule, opts: &GanttOptions) -> String {
    let ts = prepared(ts, opts);
    let scale = if opts.scale > 0.0 { opts.scale } else { 1.0 };
    let makespan = ts.makespan();
    let width = (makespan as f64 / scale).ceil() as usize;
    let names: Vec<String> = ts.schedule.machines.iter().map(|m| m.machine.to_string()).collect();
    let pad = names.iter().map(String::len).max().unwrap_or(0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:pad$} |0{:>w$}",
        "",
        makespan,
        w = width.saturating_sub(1).max(1)
    );
    for (m, ms) in ts.schedule.machines.iter().enumerate() {
        let mut bar = vec!['.'; width];
        for (j, slot) in ms.slots.iter().enumerate() {
            let c = match slot {
                Slot::Batch(_) => '#',
                Slot::SetupChange(_) => 's',
                Slot::Maint(_) => 'm',
            };
            let from = (ts.start[m][j] as f64 / scale).floor() as usize;
            let to = (ts.completion(m, j) as f64 / scale).ceil() as usize;
            for cell in bar.iter_mut().take(to.min(width)).skip(from) {
                *cell = c;
            }
        }
        let _ = writeln!(out, "{:pad$} |{}", names[m], bar.into_iter().collect::<String>());
    }
    for (m, ms) in ts.schedule.machines.iter().enumerate() {
        let _ = writeln!(out, "{}:", names[m]);
        for (j, slot) in ms.slots.iter().enumerate() {
            let _ = writeln!(out, "  {:>5} {:>5}  {}", ts.start[m][j], ts.completion(m, j), slot);
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const ROW: f64 = 28.0;
const LABEL: f64 = 180.0;

/// Standalone SVG document. Slot boxes carry the classes `batch`, `setup`
/// or `maint`; every machine row is a `<g class="machine">`.
pub fn gantt_svg(ts: &TimedSchedule, opts: &GanttOptions) -> String {
    let ts = prepared(ts, opts);
    let scale = if opts.scale > 0.0 { opts.scale } else { 1.0 };
    let makespan = ts.makespan();
    let width = LABEL + makespan as f64 * scale + 20.0;
    let height = ROW * (ts.schedule.machines.len() as f64 + 1.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="10">"#
    );
    out.push_str(
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="#555" stroke-width="2"/></pattern><pattern id="cross" width="6" height="6" patternUnits="userSpaceOnUse"><path d="M0,0 L6,6 M6,0 L0,6" stroke="#933" stroke-width="1"/></pattern></defs>
<style>.batch{fill:#9cc3e6;stroke:#234}.setup{fill:url(#hatch);stroke:#333}.maint{fill:url(#cross);stroke:#933}</style>
"##,
    );
    for (m, ms) in ts.schedule.machines.iter().enumerate() {
        let y = ROW * m as f64 + 4.0;
        let _ = writeln!(
            out,
            r#"<g class="machine" data-machine="{}">"#,
            escape(&ms.machine.to_string())
        );
        let _ = writeln!(
            out,
            r#"<text x="4" y="{}">{}</text>"#,
            y + ROW / 2.0,
            escape(&ms.machine.to_string())
        );
        for (j, slot) in ms.slots.iter().enumerate() {
            let x = LABEL + ts.start[m][j] as f64 * scale;
            let w = ts.duration[m][j] as f64 * scale;
            let label = escape(&slot.to_string());
            let _ = writeln!(
                out,
                r#"<rect class="{}" x="{x}" y="{y}" width="{w}" height="{}"><title>{label} [{}, {})</title></rect>"#,
                kind(slot),
                ROW - 8.0,
                ts.start[m][j],
                ts.completion(m, j)
            );
            if let Slot::Batch(_) = slot {
                let _ = writeln!(out, r#"<text x="{}" y="{}">{label}</text>"#, x + 2.0, y + ROW / 2.0);
            }
        }
        out.push_str("</g>\n");
    }
    let axis_y = ROW * ts.schedule.machines.len() as f64 + 12.0;
    let _ = writeln!(
        out,
        r#"<line x1="{LABEL}" y1="{}" x2="{}" y2="{}" stroke="black"/><text x="{}" y="{}">{makespan}</text>"#,
        axis_y - 8.0,
        LABEL + makespan as f64 * scale,
        axis_y - 8.0,
        LABEL + makespan as f64 * scale,
        axis_y + 4.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{reference_instance, reference_schedule};
    use crate::schedule::compute_start_times;

    fn reference() -> TimedSchedule {
        compute_start_times(&reference_schedule(), &reference_instance()).unwrap()
    }

    #[test]
    fn svg_has_a_row_per_machine() {
        let svg = gantt_svg(&reference(), &GanttOptions::default());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"<g class="machine""#).count(), 3);
        assert_eq!(svg.matches(r#"<rect class="batch""#).count(), 9);
        assert_eq!(svg.matches(r#"<rect class="setup""#).count(), 3);
        assert_eq!(svg.matches(r#"<rect class="maint""#).count(), 2);
        assert_eq!(svg.matches("<g").count(), svg.matches("</g>").count());
    }

    #[test]
    fn late_changeover_is_drawn_before_its_batch() {
        let text = gantt_text(&reference(), &GanttOptions::default());
        // the first implant setup ends when the batch at 28 starts
        assert!(text.contains("      8    28  setup su128_1"), "{text}");
        let early = gantt_text(
            &reference(),
            &GanttOptions {
                late_changeovers: false,
                ..GanttOptions::default()
            },
        );
        assert!(early.contains("      0    20  setup su128_1"), "{early}");
    }

    #[test]
    fn text_bars_span_the_makespan() {
        let text = gantt_text(&reference(), &GanttOptions::default());
        let bars: Vec<&str> = text.lines().skip(1).take(3).collect();
        for bar in bars {
            assert_eq!(bar.split('|').nth(1).unwrap().chars().count(), 89);
        }
        let half = gantt_text(
            &reference(),
            &GanttOptions {
                scale: 2.0,
                ..GanttOptions::default()
            },
        );
        assert_eq!(
            half.lines().nth(1).unwrap().split('|').nth(1).unwrap().chars().count(),
            45
        );
    }
}
