//! Static plot documents: per-channel line charts with event markers and,
//! for landmark or rectangle overlays, a per-frame scatter view.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use behavio_core::fsutil::write_atomic;
use behavio_core::model::{LandmarkTrack, RectTrack, Signal};
use serde_json::json;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 160.0;
const PAD: f64 = 24.0;

/// An event drawn on top of a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMark {
    pub channel: usize,
    pub frame: usize,
    pub scale_s: f64,
}

#[derive(Debug, Clone)]
pub enum Overlay {
    Peaks(Vec<PeakMark>),
    Landmarks(LandmarkTrack),
    Rects(RectTrack),
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (-1.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

struct Frame {
    frames: usize,
    lo: f64,
    hi: f64,
}

impl Frame {
    fn x(&self, f: usize) -> f64 {
        let span = (self.frames.max(2) - 1) as f64;
        PAD + (WIDTH - 2.0 * PAD) * f as f64 / span
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - PAD - (HEIGHT - 2.0 * PAD) * (v - self.lo) / (self.hi - self.lo)
    }
}

fn peaks_of(overlays: &[Overlay]) -> Vec<PeakMark> {
    overlays
        .iter()
        .filter_map(|o| match o {
            Overlay::Peaks(p) => Some(p.clone()),
            _ => None,
        })
        .flatten()
        .collect()
}

/// One chart per channel as `<g>` content at vertical offset `top`.
fn channel_chart(s: &Signal, c: usize, peaks: &[PeakMark], top: f64) -> String {
    let values = s.channel(c);
    let frame = {
        let (lo, hi) = bounds(values.iter().copied());
        Frame {
            frames: s.frames(),
            lo,
            hi,
        }
    };
    let mut path = String::new();
    let mut pen_down = false;
    for (f, v) in values.iter().enumerate() {
        if v.is_finite() {
            let cmd = if pen_down { 'L' } else { 'M' };
            let _ = write!(path, "{cmd}{:.2},{:.2} ", frame.x(f), frame.y(*v));
            pen_down = true;
        } else {
            pen_down = false;
        }
    }
    let mut g = format!(
        "<g transform=\"translate(0,{top})\"><rect class=\"frame\" x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\"/>\
<text x=\"{PAD}\" y=\"{}\">{}</text><text class=\"tick\" x=\"2\" y=\"{}\">{:.3}</text><text class=\"tick\" x=\"2\" y=\"{}\">{:.3}</text>\
<path class=\"line\" d=\"{}\"/>",
        WIDTH - 2.0 * PAD,
        HEIGHT - 2.0 * PAD,
        PAD - 6.0,
        escape(&s.labels()[c]),
        PAD + 4.0,
        frame.hi,
        HEIGHT - PAD,
        frame.lo,
        path.trim_end()
    );
    for p in peaks.iter().filter(|p| p.channel == c && p.frame < s.frames()) {
        let v = values[p.frame];
        if v.is_finite() {
            let _ = write!(
                g,
                "<circle class=\"peak\" data-frame=\"{}\" data-scale=\"{}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\"/>",
                p.frame,
                p.scale_s,
                frame.x(p.frame),
                frame.y(v)
            );
        }
    }
    g.push_str("</g>");
    g
}

fn charts(s: &Signal, peaks: &[PeakMark]) -> (String, f64) {
    let body: String = (0..s.channels())
        .map(|c| channel_chart(s, c, peaks, c as f64 * HEIGHT))
        .collect();
    (body, s.channels() as f64 * HEIGHT)
}

const STYLE: &str = "body{font-family:sans-serif;margin:16px}\
svg text{font-size:11px;fill:#333}.tick{fill:#888}\
.frame{fill:none;stroke:#ddd}.line{fill:none;stroke:#1f5fa8;stroke-width:1.2}\
.peak{fill:#d1495b}.pt{fill:#2a9d8f}.box{fill:none;stroke:#e76f51;stroke-width:1.5}";

/// Standalone vector graphic of the channel charts.
pub fn render_svg(s: &Signal, overlays: &[Overlay]) -> String {
    let (body, height) = charts(s, &peaks_of(overlays));
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\
<style>{STYLE}</style>{body}</svg>\n"
    )
}

fn scatter_data(overlays: &[Overlay]) -> Option<serde_json::Value> {
    let mut frames: Option<usize> = None;
    let mut data = serde_json::Map::new();
    for o in overlays {
        match o {
            Overlay::Landmarks(l) => {
                let rows: Vec<Vec<serde_json::Value>> = (0..l.frames())
                    .map(|f| {
                        let pts = l.frame_points(f);
                        pts.rows()
                            .into_iter()
                            .flat_map(|r| [finite_or_null(r[0]), finite_or_null(r[1])])
                            .collect()
                    })
                    .collect();
                frames = Some(frames.map_or(l.frames(), |n| n.min(l.frames())));
                data.insert("landmarks".into(), json!(rows));
            }
            Overlay::Rects(r) => {
                let s = r.signal();
                let rows: Vec<Vec<serde_json::Value>> = (0..s.frames())
                    .map(|f| s.frame(f)[..4].iter().map(|v| finite_or_null(*v)).collect())
                    .collect();
                frames = Some(frames.map_or(s.frames(), |n| n.min(s.frames())));
                data.insert("rects".into(), json!(rows));
            }
            Overlay::Peaks(_) => {}
        }
    }
    let frames = frames?;
    data.insert("frames".into(), json!(frames));
    Some(serde_json::Value::Object(data))
}

/// Embeds JSON inside a `<script>` element.
fn script_json(v: &serde_json::Value) -> String {
    serde_json::to_string(v)
        .expect("plot data serializes")
        .replace("</", "<\\/")
}

const SCATTER_JS: &str = r#"(function(){
var d=JSON.parse(document.getElementById('overlay-data').textContent);
var svg=document.getElementById('scatter'),slider=document.getElementById('frame'),label=document.getElementById('frame-label');
var xs=[],ys=[];
(d.landmarks||[]).forEach(function(r){for(var i=0;i+1<r.length;i+=2){if(r[i]!==null&&r[i+1]!==null){xs.push(r[i]);ys.push(r[i+1]);}}});
(d.rects||[]).forEach(function(r){if(r.indexOf(null)<0){xs.push(r[0],r[0]+r[2]);ys.push(r[1],r[1]+r[3]);}});
if(!xs.length){xs=[0,1];ys=[0,1];}
var x0=Math.min.apply(null,xs),x1=Math.max.apply(null,xs),y0=Math.min.apply(null,ys),y1=Math.max.apply(null,ys);
var m=0.05*Math.max(x1-x0,y1-y0,1e-9);
svg.setAttribute('viewBox',(x0-m)+' '+(y0-m)+' '+(x1-x0+2*m)+' '+(y1-y0+2*m));
var r=0.006*Math.max(x1-x0,y1-y0,1e-9);
function draw(f){
var out='';
var L=(d.landmarks||[])[f]||[];
for(var i=0;i+1<L.length;i+=2){if(L[i]!==null&&L[i+1]!==null){out+='<circle class="pt" cx="'+L[i]+'" cy="'+L[i+1]+'" r="'+r+'"/>';}}
var B=(d.rects||[])[f];
if(B&&B.indexOf(null)<0){out+='<rect class="box" x="'+B[0]+'" y="'+B[1]+'" width="'+B[2]+'" height="'+B[3]+'" vector-effect="non-scaling-stroke"/>';}
svg.innerHTML=out;label.textContent='frame '+f;
}
slider.addEventListener('input',function(){draw(+slider.value);});
draw(0);
})();"#;

/// Self-contained HTML document: charts, embedded data and, with landmark
/// or rectangle overlays, a frame slider driving a scatter view.
pub fn render_html(s: &Signal, overlays: &[Overlay]) -> String {
    let peaks = peaks_of(overlays);
    let (body, height) = charts(s, &peaks);
    let channels: Vec<Vec<serde_json::Value>> = (0..s.channels())
        .map(|c| s.channel(c).iter().map(|v| finite_or_null(*v)).collect())
        .collect();
    let data = json!({
        "fps": s.fps(),
        "frames": s.frames(),
        "modality": s.modality().as_str(),
        "labels": s.labels(),
        "channels": channels,
        "peaks": peaks.iter().map(|p| json!({"channel": p.channel, "frame": p.frame, "scale_s": p.scale_s})).collect::<Vec<_>>(),
    });
    let title = format!("{} signal, {} channels", s.modality(), s.channels());
    let mut html = format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{}</title><style>{STYLE}</style></head><body>\n\
<h3>{}</h3>\n<svg class=\"charts\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">{body}</svg>\n\
<script type=\"application/json\" id=\"plot-data\">{}</script>\n",
        escape(&title),
        escape(&title),
        script_json(&data)
    );
    if let Some(scatter) = scatter_data(overlays) {
        let last = scatter["frames"].as_u64().unwrap_or(1).saturating_sub(1);
        let _ = write!(
            html,
            "<div><input type=\"range\" id=\"frame\" min=\"0\" max=\"{last}\" value=\"0\"> <span id=\"frame-label\">frame 0</span></div>\n\
<svg id=\"scatter\" width=\"480\" height=\"480\" preserveAspectRatio=\"xMidYMid meet\"></svg>\n\
<script type=\"application/json\" id=\"overlay-data\">{}</script>\n<script>{SCATTER_JS}</script>\n",
            script_json(&scatter)
        );
    }
    html.push_str("</body></html>\n");
    html
}

/// Writes an SVG file when `out_path` ends in `.svg`, HTML otherwise.
pub fn emit_plot(s: &Signal, overlays: &[Overlay], out_path: &Path) -> io::Result<()> {
    if s.frames() == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "cannot plot an empty signal"));
    }
    let svg = out_path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    let text = if svg {
        render_svg(s, overlays)
    } else {
        render_html(s, overlays)
    };
    write_atomic(out_path, text.as_bytes())
}
