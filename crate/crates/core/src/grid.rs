//! Uniform lattice over a bounding box with interior/boundary/exterior node
//! classification against a domain, plus grid-sampled scalar fields.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::Domain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }

    fn parse(s: &str) -> Result<NodeClass> {
        match s {
            "interior" => Ok(NodeClass::Interior),
            "boundary" => Ok(NodeClass::Boundary),
            "exterior" => Ok(NodeClass::Exterior),
            other => Err(Error::Data(format!("unknown node class `{other}`"))),
        }
    }
}

/// Uniform grid. Nodes sit at `lo + idx * h` per axis; the first axis is the
/// fastest-varying index.
#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    strides: Vec<usize>,
    pub class: Vec<NodeClass>,
    /// Interior node indices in ascending flat order; the fixed sweep and
    /// reduction order used everywhere.
    pub interior: Vec<usize>,
    pub domain: Domain,
}

impl Grid {
    /// Build a grid over `[lo, hi]` (snapped to whole steps of `h`) and
    /// classify nodes against `domain`. Boundary nodes are the non-interior
    /// nodes touching an interior node within the full `{-1,0,1}^d` stencil
    /// neighborhood.
    pub fn new(domain: Domain, lo: &[f64], hi: &[f64], h: f64) -> Result<Grid> {
        if h <= 0.0 {
            return Err(Error::Argument("grid spacing must be positive".into()));
        }
        let dim = lo.len();
        if hi.len() != dim || dim == 0 {
            return Err(Error::Argument("grid box dimensions mismatch".into()));
        }
        let mut shape = Vec::with_capacity(dim);
        for i in 0..dim {
            if hi[i] <= lo[i] {
                return Err(Error::Argument("grid box must have lo < hi".into()));
            }
            let n = ((hi[i] - lo[i]) / h).round() as usize + 1;
            if n < 2 {
                return Err(Error::Argument("grid needs at least 2 nodes per axis".into()));
            }
            shape.push(n);
        }
        let mut strides = vec![1usize; dim];
        for i in 1..dim {
            strides[i] = strides[i - 1] * shape[i - 1];
        }
        let total: usize = shape.iter().product();
        let mut class = vec![NodeClass::Exterior; total];
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut idx = flat;
            for i in 0..dim {
                let k = idx % shape[i];
                idx /= shape[i];
                x[i] = lo[i] + k as f64 * h;
            }
            if domain.signed_distance(&x) < 0.0 {
                class[flat] = NodeClass::Interior;
            }
        }
        // mark the boundary ring (bounded domains only; on the whole space
        // every node is interior and the lateral closure is the solver's job)
        if domain.is_bounded() {
            let offsets = neighborhood_offsets(dim);
            let mut boundary = Vec::new();
            for flat in 0..total {
                if class[flat] != NodeClass::Interior {
                    continue;
                }
                let idx = unflatten(flat, &shape);
                for off in &offsets {
                    let mut nb = idx.clone();
                    let mut ok = true;
                    for i in 0..dim {
                        let v = nb[i] as isize + off[i];
                        if v < 0 || v >= shape[i] as isize {
                            ok = false;
                            break;
                        }
                        nb[i] = v as usize;
                    }
                    if !ok {
                        return Err(Error::Argument(
                            "grid box too tight: an interior node touches the box edge; enlarge the box by at least one h".into(),
                        ));
                    }
                    let nb_flat = flatten(&nb, &strides);
                    if class[nb_flat] == NodeClass::Exterior {
                        boundary.push(nb_flat);
                    }
                }
            }
            for flat in boundary {
                class[flat] = NodeClass::Boundary;
            }
        }
        let interior: Vec<usize> = (0..total)
            .filter(|&f| class[f] == NodeClass::Interior)
            .collect();
        Ok(Grid {
            dim,
            lo: lo.to_vec(),
            h,
            shape,
            strides,
            class,
            interior,
            domain,
        })
    }

    /// Grid over the domain's bounding box inflated by `pad` layers of `h`.
    pub fn covering(domain: &Domain, h: f64, pad: usize) -> Result<Grid> {
        let (lo, hi) = domain
            .bounding_box()
            .ok_or_else(|| Error::Argument("whole-space domains need an explicit grid box".into()))?;
        let lo: Vec<f64> = lo.iter().map(|v| v - pad as f64 * h).collect();
        let hi: Vec<f64> = hi.iter().map(|v| v + pad as f64 * h).collect();
        Grid::new(domain.clone(), &lo, &hi, h)
    }

    /// Rebuild from persisted parts (classes as stored).
    pub fn from_parts(
        domain: Domain,
        lo: Vec<f64>,
        h: f64,
        shape: Vec<usize>,
        class: Vec<NodeClass>,
    ) -> Result<Grid> {
        let dim = lo.len();
        let mut strides = vec![1usize; dim];
        for i in 1..dim {
            strides[i] = strides[i - 1] * shape[i - 1];
        }
        let total: usize = shape.iter().product();
        if class.len() != total {
            return Err(Error::Data("class table does not match grid shape".into()));
        }
        let interior = (0..total)
            .filter(|&f| class[f] == NodeClass::Interior)
            .collect();
        Ok(Grid { dim, lo, h, shape, strides, class, interior, domain })
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let mut idx = flat;
        for i in 0..self.dim {
            let k = idx % self.shape[i];
            idx /= self.shape[i];
            out[i] = self.lo[i] + k as f64 * self.h;
        }
    }

    pub fn coords_vec(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.node_coords(flat, &mut x);
        x
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        unflatten(flat, &self.shape)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        flatten(idx, &self.strides)
    }

    /// Flat index of the neighbor at `idx + step` along `axis`, if on-grid.
    pub fn neighbor(&self, flat: usize, axis: usize, step: isize) -> Option<usize> {
        let k = (flat / self.strides[axis]) % self.shape[axis];
        let v = k as isize + step;
        if v < 0 || v >= self.shape[axis] as isize {
            None
        } else {
            Some((flat as isize + step * self.strides[axis] as isize) as usize)
        }
    }

    /// Offset by a full multi-step, if on-grid.
    pub fn offset(&self, flat: usize, steps: &[isize]) -> Option<usize> {
        let mut out = flat as isize;
        for (axis, &s) in steps.iter().enumerate() {
            let k = (flat / self.strides[axis]) % self.shape[axis];
            let v = k as isize + s;
            if v < 0 || v >= self.shape[axis] as isize {
                return None;
            }
            out += s * self.strides[axis] as isize;
        }
        Some(out as usize)
    }

    /// Nearest grid node to `x` (clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let t = ((x[i] - self.lo[i]) / self.h).round();
            let k = t.clamp(0.0, (self.shape[i] - 1) as f64) as usize;
            idx.push(k);
        }
        self.flat_index(&idx)
    }
}

fn unflatten(flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(shape.len());
    let mut rest = flat;
    for &n in shape {
        idx.push(rest % n);
        rest /= n;
    }
    idx
}

fn flatten(idx: &[usize], strides: &[usize]) -> usize {
    idx.iter().zip(strides).map(|(i, s)| i * s).sum()
}

fn neighborhood_offsets(dim: usize) -> Vec<Vec<isize>> {
    let mut out = Vec::new();
    let total = 3usize.pow(dim as u32);
    for flat in 0..total {
        let mut idx = flat;
        let mut off = Vec::with_capacity(dim);
        let mut all_zero = true;
        for _ in 0..dim {
            let v = (idx % 3) as isize - 1;
            idx /= 3;
            if v != 0 {
                all_zero = false;
            }
            off.push(v);
        }
        if !all_zero {
            out.push(off);
        }
    }
    out
}

/// Metadata carried with every grid function.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GridFunctionMeta {
    pub problem_hash: String,
    pub created_by: String,
}

/// A scalar field sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub meta: GridFunctionMeta,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>) -> GridFunction {
        let n = grid.len();
        GridFunction { grid, values: vec![0.0; n], meta: GridFunctionMeta::default() }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> GridFunction {
        let n = grid.len();
        GridFunction { grid, values: vec![c; n], meta: GridFunctionMeta::default() }
    }

    pub fn sample(grid: Arc<Grid>, f: &dyn Fn(&[f64]) -> f64) -> GridFunction {
        let mut values = vec![0.0; grid.len()];
        let mut x = vec![0.0; grid.dim];
        for (flat, v) in values.iter_mut().enumerate() {
            grid.node_coords(flat, &mut x);
            *v = f(&x);
        }
        GridFunction { grid, values, meta: GridFunctionMeta::default() }
    }

    /// Multilinear interpolation; the query is clamped into the grid box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let d = g.dim;
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for i in 0..d {
            let t = (x[i] - g.lo[i]) / g.h;
            let t = t.clamp(0.0, (g.shape[i] - 1) as f64);
            let mut k = t.floor() as usize;
            if k >= g.shape[i] - 1 {
                k = g.shape[i] - 2;
            }
            base.push(k);
            frac.push(t - k as f64);
        }
        let corners = 1usize << d;
        let mut acc = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = Vec::with_capacity(d);
            for i in 0..d {
                if (c >> i) & 1 == 1 {
                    w *= frac[i];
                    idx.push(base[i] + 1);
                } else {
                    w *= 1.0 - frac[i];
                    idx.push(base[i]);
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.flat_index(&idx)];
            }
        }
        acc
    }

    /// Sup-norm difference over a node subset.
    pub fn sup_diff_on(&self, other: &GridFunction, nodes: &[usize]) -> f64 {
        let mut m = 0.0f64;
        for &n in nodes {
            m = m.max((self.values[n] - other.values[n]).abs());
        }
        m
    }

    /// Write `x1..xd,value,class` rows plus a JSON sidecar (`<path>.meta.json`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let d = self.grid.dim;
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},value,class", header.join(","))?;
        let mut x = vec![0.0; d];
        for flat in 0..self.grid.len() {
            self.grid.node_coords(flat, &mut x);
            for xi in &x {
                write!(w, "{xi},")?;
            }
            writeln!(w, "{},{}", self.values[flat], self.grid.class[flat].as_str())?;
        }
        w.flush()?;
        let sidecar = Sidecar {
            h: self.grid.h,
            box_lo: self.grid.lo.clone(),
            shape: self.grid.shape.clone(),
            meta: self.meta.clone(),
        };
        let meta_path = sidecar_path(path);
        std::fs::write(meta_path, serde_json::to_string_pretty(&sidecar).unwrap())?;
        Ok(())
    }

    /// Read a grid function written by [`GridFunction::write_csv`].
    pub fn read_csv(path: &Path) -> Result<GridFunction> {
        let sidecar: Sidecar = serde_json::from_str(
            &std::fs::read_to_string(sidecar_path(path))
                .map_err(|e| Error::Data(format!("missing sidecar for {}: {e}", path.display())))?,
        )
        .map_err(|e| Error::Data(format!("bad sidecar: {e}")))?;
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines();
        let _header = lines
            .next()
            .ok_or_else(|| Error::Data("empty grid csv".into()))??;
        let total: usize = sidecar.shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut class = Vec::with_capacity(total);
        let d = sidecar.box_lo.len();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != d + 2 {
                return Err(Error::Data(format!("bad grid csv row `{line}`")));
            }
            let v: f64 = parts[d]
                .parse()
                .map_err(|_| Error::Data(format!("bad value `{}`", parts[d])))?;
            values.push(v);
            class.push(NodeClass::parse(parts[d + 1])?);
        }
        if values.len() != total {
            return Err(Error::Data(format!(
                "grid csv has {} rows, expected {total}",
                values.len()
            )));
        }
        let dim = sidecar.box_lo.len();
        let grid = Grid::from_parts(
            Domain::WholeSpace { dim },
            sidecar.box_lo,
            sidecar.h,
            sidecar.shape,
            class,
        )?;
        Ok(GridFunction { grid: Arc::new(grid), values, meta: sidecar.meta })
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    h: f64,
    box_lo: Vec<f64>,
    shape: Vec<usize>,
    meta: GridFunctionMeta,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_grid(h: f64) -> Grid {
        let domain = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        Grid::covering(&domain, h, 2).unwrap()
    }

    #[test]
    fn classification_counts_are_sane() {
        let g = disk_grid(1.0 / 16.0);
        let n_int = g.interior.len();
        // area pi vs count * h^2
        let approx = n_int as f64 * g.h * g.h;
        assert!((approx - std::f64::consts::PI).abs() < 0.1, "{approx}");
        // every interior node has all 3^d - 1 neighbors classified as non-exterior-or-grid-valid
        for &flat in &g.interior {
            for axis in 0..2 {
                for step in [-1isize, 1] {
                    let nb = g.neighbor(flat, axis, step).expect("neighbor on grid");
                    assert_ne!(
                        g.class[nb],
                        NodeClass::Exterior,
                        "axis neighbor of interior must be interior or boundary"
                    );
                }
            }
        }
    }

    #[test]
    fn node_on_circle_is_not_interior() {
        let g = disk_grid(1.0 / 16.0);
        let flat = g.nearest_node(&[1.0, 0.0]);
        let x = g.coords_vec(flat);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert_ne!(g.class[flat], NodeClass::Interior);
    }

    #[test]
    fn interpolation_is_exact_on_multilinear_functions() {
        let domain = Domain::bounded_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = Arc::new(Grid::covering(&domain, 0.25, 1).unwrap());
        let f = GridFunction::sample(g, &|x| 2.0 + 3.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        for p in [[0.3, 0.7], [0.11, 0.52], [0.99, 0.01]] {
            let want = 2.0 + 3.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
            assert!((f.interpolate(&p) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let domain = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let g = Arc::new(Grid::covering(&domain, 0.25, 2).unwrap());
        let mut f = GridFunction::sample(g, &|x| (x[0] * 17.3).sin() * x[1].exp());
        f.meta.created_by = "test".into();
        f.write_csv(&path).unwrap();
        let back = GridFunction::read_csv(&path).unwrap();
        assert_eq!(back.values.len(), f.values.len());
        for (a, b) in f.values.iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits(), "round trip must be bit-exact");
        }
        assert_eq!(back.meta.created_by, "test");
        assert_eq!(back.grid.interior.len(), f.grid.interior.len());
    }

    #[test]
    fn whole_space_grid_is_all_interior() {
        let g = Grid::new(
            Domain::WholeSpace { dim: 2 },
            &[-1.0, -1.0],
            &[1.0, 1.0],
            0.5,
        )
        .unwrap();
        assert_eq!(g.interior.len(), g.len());
    }
}
