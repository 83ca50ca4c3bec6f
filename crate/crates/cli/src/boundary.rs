//! Posterior grids, 0.5 iso-contours and the SVG overlay.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use sdgm_core::{Dataset, ModelFile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl Bounds {
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad bound `{p}`"))
            })
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            bail!("--bounds needs x1min,x1max,x2min,x2max");
        }
        let b = Self {
            x1: (v[0], v[1]),
            x2: (v[2], v[3]),
        };
        if !(b.x1.0 < b.x1.1 && b.x2.0 < b.x2.1) || v.iter().any(|x| !x.is_finite()) {
            bail!("--bounds must be finite with min < max");
        }
        Ok(b)
    }

    /// Range of the data padded by 5% on each side.
    pub fn around(ds: &Dataset) -> Self {
        let range = |d: usize| {
            let (lo, hi) = ds
                .rows()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[d]), hi.max(r[d]))
                });
            let pad = ((hi - lo) * 0.05).max(1e-3);
            (lo - pad, hi + pad)
        };
        Self {
            x1: range(0),
            x2: range(1),
        }
    }
}

pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let parse = |p: &str| {
        p.trim()
            .parse::<usize>()
            .with_context(|| format!("bad grid size `{p}`"))
    };
    let (nx, ny) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if nx < 2 || ny < 2 {
        bail!("grid needs at least 2 points per axis");
    }
    Ok((nx, ny))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Class posteriors at every grid point; `probs[j * nx + i]` is the point
/// `(x1[i], x2[j])`.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    pub bounds: Bounds,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

impl BoundaryGrid {
    pub fn compute(model: &ModelFile, bounds: Bounds, nx: usize, ny: usize) -> Result<Self> {
        if model.model.input_dim() != 2 {
            bail!(
                "boundary export needs a 2-D model (this one has D = {})",
                model.model.input_dim()
            );
        }
        let x1 = linspace(bounds.x1.0, bounds.x1.1, nx);
        let x2 = linspace(bounds.x2.0, bounds.x2.1, ny);
        let mut probs = Vec::with_capacity(nx * ny);
        for &b in &x2 {
            for &a in &x1 {
                probs.push(model.posterior(&[a, b])?.class_posteriors);
            }
        }
        Ok(Self {
            bounds,
            x1,
            x2,
            probs,
        })
    }

    pub fn to_csv(&self, label_names: &[String]) -> String {
        let mut out = String::from("x1,x2");
        for name in label_names {
            let _ = write!(out, ",p_{name}");
        }
        out.push('\n');
        for (j, b) in self.x2.iter().enumerate() {
            for (i, a) in self.x1.iter().enumerate() {
                let _ = write!(out, "{a:?},{b:?}");
                for p in &self.probs[j * self.x1.len() + i] {
                    let _ = write!(out, ",{p:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Field of one class's posterior, row-major over `x2`.
    pub fn field(&self, class: usize) -> Vec<f64> {
        self.probs.iter().map(|p| p[class]).collect()
    }
}

pub type Segment = ((f64, f64), (f64, f64));

/// Marching squares on a row-major `nx × ny` field sampled at `xs × ys`.
/// Saddle cells are resolved with the cell-centre average.
pub fn contour(xs: &[f64], ys: &[f64], field: &[f64], level: f64) -> Vec<Segment> {
    let nx = xs.len();
    let at = |i: usize, j: usize| field[j * nx + i];
    let lerp = |p: (f64, f64), q: (f64, f64), fp: f64, fq: f64| {
        let t = if fq == fp {
            0.5
        } else {
            (level - fp) / (fq - fp)
        };
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    let mut out = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            // corners counter-clockwise from bottom-left
            let pts = [
                (xs[i], ys[j]),
                (xs[i + 1], ys[j]),
                (xs[i + 1], ys[j + 1]),
                (xs[i], ys[j + 1]),
            ];
            let f = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let above: Vec<bool> = f.iter().map(|&v| v >= level).collect();
            let edge = |e: usize| lerp(pts[e], pts[(e + 1) % 4], f[e], f[(e + 1) % 4]);
            let crossed: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match crossed.len() {
                2 => out.push((edge(crossed[0]), edge(crossed[1]))),
                4 => {
                    let centre = f.iter().sum::<f64>() / 4.0 >= level;
                    // join each crossing to the neighbour that keeps the
                    // centre's side connected
                    if centre == above[0] {
                        out.push((edge(0), edge(1)));
                        out.push((edge(2), edge(3)));
                    } else {
                        out.push((edge(3), edge(0)));
                        out.push((edge(1), edge(2)));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
];

pub struct SvgScene<'a> {
    pub grid: &'a BoundaryGrid,
    pub contours: Vec<Segment>,
    pub samples: Option<&'a Dataset>,
    pub relevance: Vec<Vec<f64>>,
}

impl SvgScene<'_> {
    pub fn render(&self) -> String {
        let size = 600.0;
        let b = self.grid.bounds;
        let px = |x: f64| (x - b.x1.0) / (b.x1.1 - b.x1.0) * size;
        let py = |y: f64| size - (y - b.x2.0) / (b.x2.1 - b.x2.0) * size;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
        if let Some(ds) = self.samples {
            for (row, &l) in ds.rows().zip(ds.labels()) {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                    px(row[0]),
                    py(row[1]),
                    PALETTE[l % PALETTE.len()]
                );
            }
        }
        for x in &self.relevance {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="red" stroke-width="1.5"/>"#,
                px(x[0]),
                py(x[1])
            );
        }
        let mut path = String::new();
        for ((a, b2), (c, d)) in &self.contours {
            let _ = write!(
                path,
                "M{:.2} {:.2}L{:.2} {:.2}",
                px(*a),
                py(*b2),
                px(*c),
                py(*d)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{path}" stroke="black" stroke-width="1.5" fill="none"/>"#
        );
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdgm_core::{Component, ModelForm, SdgmModel};

    /// Two classes mirrored about `x1 = 0`: scores `±x1`.
    fn symmetric() -> ModelFile {
        let comp = |class: usize, s: f64| Component {
            class,
            pi: 0.5,
            weights: vec![0.0, s, 0.0, 0.0, 0.0, 0.0],
        };
        let model = SdgmModel::new(
            2,
            ModelForm::Original { input_dim: 2 },
            vec![comp(0, -1.0), comp(1, 1.0)],
        )
        .unwrap();
        ModelFile::new(model)
    }

    #[test]
    fn parses_grid_and_bounds() {
        assert_eq!(parse_grid("10").unwrap(), (10, 10));
        assert_eq!(parse_grid("4x7").unwrap(), (4, 7));
        assert!(parse_grid("1").is_err());
        assert!(parse_grid("ax3").is_err());
        let b = Bounds::parse("-1,1,0,2").unwrap();
        assert_eq!(b.x2, (0.0, 2.0));
        assert!(Bounds::parse("1,0,0,1").is_err());
        assert!(Bounds::parse("0,1,0").is_err());
    }

    #[test]
    fn grid_rows_and_normalisation() {
        let m = symmetric();
        let g = BoundaryGrid::compute(&m, Bounds::parse("-1,1,-1,1").unwrap(), 10, 10).unwrap();
        let csv = g.to_csv(&m.label_names);
        assert_eq!(csv.lines().count(), 101);
        assert_eq!(csv.lines().next().unwrap(), "x1,x2,p_0,p_1");
        for p in &g.probs {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_model_contour_lies_on_axis() {
        let m = symmetric();
        let g = BoundaryGrid::compute(&m, Bounds::parse("-1,1,-1,1").unwrap(), 11, 9).unwrap();
        let segs = contour(&g.x1, &g.x2, &g.field(0), 0.5);
        assert!(!segs.is_empty());
        for ((a, _), (c, _)) in segs {
            assert!(a.abs() < 1e-9 && c.abs() < 1e-9);
        }
    }

    #[test]
    fn circle_contour_is_closed_ring() {
        let xs = linspace(-2.0, 2.0, 41);
        let field: Vec<f64> = xs
            .iter()
            .flat_map(|y| xs.iter().map(move |x| x * x + y * y))
            .collect();
        let segs = contour(&xs, &xs, &field, 1.0);
        for ((a, b), (c, d)) in &segs {
            assert!(((a * a + b * b).sqrt() - 1.0).abs() < 0.02);
            assert!(((c * c + d * d).sqrt() - 1.0).abs() < 0.02);
        }
        let length: f64 = segs
            .iter()
            .map(|((a, b), (c, d))| ((a - c).powi(2) + (b - d).powi(2)).sqrt())
            .sum();
        assert!((length - 2.0 * std::f64::consts::PI).abs() < 0.05);
    }

    #[test]
    fn rejects_non_planar_models() {
        let comp = Component {
            class: 0,
            pi: 1.0,
            weights: vec![0.0; 3],
        };
        let m = ModelFile::new(
            SdgmModel::new(1, ModelForm::Original { input_dim: 1 }, vec![comp]).unwrap(),
        );
        assert!(BoundaryGrid::compute(&m, Bounds::parse("0,1,0,1").unwrap(), 3, 3).is_err());
    }

    #[test]
    fn svg_has_markers_and_path() {
        let m = symmetric();
        let g = BoundaryGrid::compute(&m, Bounds::parse("-1,1,-1,1").unwrap(), 5, 5).unwrap();
        let scene = SvgScene {
            contours: contour(&g.x1, &g.x2, &g.field(0), 0.5),
            grid: &g,
            samples: None,
            relevance: vec![vec![0.2, 0.3]],
        };
        let svg = scene.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"stroke="red""#));
        assert!(svg.contains("<path d=\"M"));
    }
}
