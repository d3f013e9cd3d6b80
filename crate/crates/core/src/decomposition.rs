//! Overlapping subdomains, nonoverlapping zones and boundary-node
//! classification.
//!
//! Every boundary node of a subdomain box is either on the physical boundary
//! (`G_i0`) or lies in exactly one foreign zone `Z_j` (`G_ij`), from which it
//! receives interpolated values. Physical boundary wins over interface
//! membership; ties between zones go to the lowest zone index.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chebyshev::TensorGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::InvalidArgument(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn unit_square() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment with tolerance.
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        x >= self.x0 - tol && x <= self.x1 + tol && y >= self.y0 - tol && y <= self.y1 + tol
    }

    /// Containment at least `tol` away from every edge.
    pub fn strictly_contains(&self, x: f64, y: f64, tol: f64) -> bool {
        x > self.x0 + tol && x < self.x1 - tol && y > self.y0 + tol && y < self.y1 - tol
    }

    pub fn on_boundary(&self, x: f64, y: f64, tol: f64) -> bool {
        self.contains(x, y, tol)
            && ((x - self.x0).abs() <= tol
                || (x - self.x1).abs() <= tol
                || (y - self.y0).abs() <= tol
                || (y - self.y1).abs() <= tol)
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol
            && other.x1 <= self.x1 + tol
            && other.y0 >= self.y0 - tol
            && other.y1 <= self.y1 + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Collocation node where the PDE operator is enforced (`X_i`).
    Interior,
    /// Boundary node on the physical boundary (`G_i0`).
    Physical,
    /// Boundary node receiving values from subdomain `j` (`G_ij`).
    Interface(usize),
}

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub id: usize,
    pub rect: Rect,
    pub zone: Rect,
    pub grid: TensorGrid,
    kinds: Vec<NodeKind>,
    interior_nodes: Vec<usize>,
    boundary_nodes: Vec<usize>,
    physical_boundary: Vec<usize>,
    interface_groups: BTreeMap<usize, Vec<usize>>,
}

impl Subdomain {
    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn physical_boundary(&self) -> &[usize] {
        &self.physical_boundary
    }

    /// `G_ij` for every `j` with a nonempty set, keyed by `j`.
    pub fn interface_groups(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.interface_groups
    }

    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.interface_groups.keys().copied()
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    domain: Rect,
    subdomains: Vec<Subdomain>,
    layout: (usize, usize),
    overlap: f64,
}

impl Decomposition {
    /// Uniform `mx` by `my` array of zones, each box widened by
    /// `overlap * zone size` on its interior sides, with an `nx` by `ny`
    /// Chebyshev grid per box.
    pub fn build_uniform(
        domain: Rect,
        mx: usize,
        my: usize,
        overlap: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if mx == 0 || my == 0 {
            return Err(Error::InvalidArgument(format!(
                "subdomain counts must be positive, got {mx}x{my}"
            )));
        }
        if !(overlap > 0.0 && overlap < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "overlap fraction must lie in (0, 1), got {overlap}"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidArgument(format!(
                "subdomain grids need at least 3 nodes per side, got {nx}x{ny}"
            )));
        }
        let hx = domain.width() / mx as f64;
        let hy = domain.height() / my as f64;
        let xs = |k: usize| if k == mx { domain.x1 } else { domain.x0 + k as f64 * hx };
        let ys = |k: usize| if k == my { domain.y1 } else { domain.y0 + k as f64 * hy };
        let mut zones = Vec::with_capacity(mx * my);
        let mut boxes = Vec::with_capacity(mx * my);
        for iy in 0..my {
            for ix in 0..mx {
                let zone = Rect::new(xs(ix), xs(ix + 1), ys(iy), ys(iy + 1))?;
                let ex = overlap * zone.width();
                let ey = overlap * zone.height();
                let rect = Rect::new(
                    if ix == 0 { domain.x0 } else { (zone.x0 - ex).max(domain.x0) },
                    if ix + 1 == mx { domain.x1 } else { (zone.x1 + ex).min(domain.x1) },
                    if iy == 0 { domain.y0 } else { (zone.y0 - ey).max(domain.y0) },
                    if iy + 1 == my { domain.y1 } else { (zone.y1 + ey).min(domain.y1) },
                )?;
                zones.push(zone);
                boxes.push(rect);
            }
        }
        let mut dec = Self::from_rects(domain, boxes, zones, nx, ny)?;
        dec.layout = (mx, my);
        dec.overlap = overlap;
        Ok(dec)
    }

    /// Generic construction from explicit boxes and zones.
    pub fn from_rects(
        domain: Rect,
        boxes: Vec<Rect>,
        zones: Vec<Rect>,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if boxes.len() != zones.len() || boxes.is_empty() {
            return Err(Error::InvalidArgument(
                "boxes and zones must be nonempty and of equal count".into(),
            ));
        }
        let tol = geometric_tolerance(&domain);
        let mut subdomains = Vec::with_capacity(boxes.len());
        for (id, (rect, zone)) in boxes.iter().zip(&zones).enumerate() {
            if !rect.contains_rect(zone, tol) || !domain.contains_rect(rect, tol) {
                return Err(Error::Construction(format!(
                    "subdomain {id}: zone must lie in its box and the box in the domain"
                )));
            }
            let grid = TensorGrid::on_rect(nx, ny, (rect.x0, rect.x1), (rect.y0, rect.y1))?;
            let kinds = classify_nodes(id, &grid, &domain, &boxes, &zones)?;
            subdomains.push(Subdomain::from_kinds(id, *rect, *zone, grid, kinds));
        }
        Ok(Self {
            domain,
            subdomains,
            layout: (boxes.len(), 1),
            overlap: f64::NAN,
        })
    }

    /// Same boxes and zones with a different grid size per subdomain.
    pub fn with_grid_size(&self, nx: usize, ny: usize) -> Result<Self> {
        let boxes = self.subdomains.iter().map(|s| s.rect).collect();
        let zones = self.subdomains.iter().map(|s| s.zone).collect();
        let mut dec = Self::from_rects(self.domain, boxes, zones, nx, ny)?;
        dec.layout = self.layout;
        dec.overlap = self.overlap;
        Ok(dec)
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn subdomain(&self, i: usize) -> &Subdomain {
        &self.subdomains[i]
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.subdomains[i].neighbors().collect()
    }

    pub fn tolerance(&self) -> f64 {
        geometric_tolerance(&self.domain)
    }

    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            domain: self.domain,
            layout: [self.layout.0, self.layout.1],
            overlap: self.overlap,
            subdomains: self
                .subdomains
                .iter()
                .map(|s| SubdomainSummary {
                    id: s.id,
                    rect: s.rect,
                    zone: s.zone,
                    nx: s.grid.nx(),
                    ny: s.grid.ny(),
                    interior_nodes: s.interior_nodes.len(),
                    physical_boundary_nodes: s.physical_boundary.len(),
                    interfaces: s
                        .interface_groups
                        .iter()
                        .map(|(j, g)| (j.to_string(), g.len()))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl Subdomain {
    fn from_kinds(id: usize, rect: Rect, zone: Rect, grid: TensorGrid, kinds: Vec<NodeKind>) -> Self {
        let mut interior_nodes = Vec::new();
        let mut boundary_nodes = Vec::new();
        let mut physical_boundary = Vec::new();
        let mut interface_groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, kind) in kinds.iter().enumerate() {
            match *kind {
                NodeKind::Interior => interior_nodes.push(k),
                NodeKind::Physical => {
                    boundary_nodes.push(k);
                    physical_boundary.push(k);
                }
                NodeKind::Interface(j) => {
                    boundary_nodes.push(k);
                    interface_groups.entry(j).or_default().push(k);
                }
            }
        }
        Self {
            id,
            rect,
            zone,
            grid,
            kinds,
            interior_nodes,
            boundary_nodes,
            physical_boundary,
            interface_groups,
        }
    }
}

fn geometric_tolerance(domain: &Rect) -> f64 {
    1e-12 * domain.width().max(domain.height())
}

/// Assigns every node of subdomain `id` to `X_i`, `G_i0`, or one `G_ij`.
pub fn classify_nodes(
    id: usize,
    grid: &TensorGrid,
    domain: &Rect,
    boxes: &[Rect],
    zones: &[Rect],
) -> Result<Vec<NodeKind>> {
    let tol = geometric_tolerance(domain);
    (0..grid.len())
        .map(|k| {
            if !grid.is_boundary(k) {
                return Ok(NodeKind::Interior);
            }
            let (x, y) = grid.point(k);
            if domain.on_boundary(x, y, tol) {
                return Ok(NodeKind::Physical);
            }
            let owner = zones
                .iter()
                .enumerate()
                .find(|&(j, z)| j != id && z.contains(x, y, tol))
                .map(|(j, _)| j)
                .ok_or_else(|| {
                    Error::Construction(format!(
                        "subdomain {id}: boundary node ({x}, {y}) lies in no foreign zone \
                         (insufficient overlap?)"
                    ))
                })?;
            if !boxes[owner].strictly_contains(x, y, tol) {
                return Err(Error::Construction(format!(
                    "subdomain {id}: interface node ({x}, {y}) is not strictly inside \
                     source subdomain {owner}"
                )));
            }
            Ok(NodeKind::Interface(owner))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub domain: Rect,
    pub layout: [usize; 2],
    pub overlap: f64,
    pub subdomains: Vec<SubdomainSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubdomainSummary {
    pub id: usize,
    pub rect: Rect,
    pub zone: Rect,
    pub nx: usize,
    pub ny: usize,
    pub interior_nodes: usize,
    pub physical_boundary_nodes: usize,
    pub interfaces: BTreeMap<String, usize>,
}
