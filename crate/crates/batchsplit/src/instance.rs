//! Problem instances, cost matrices, and giant tours.
//!
//! Node indexing is fixed throughout the crate: node `0` is the depot,
//! nodes `1..=n` are customers, and node `n + 1` is a synthetic return
//! depot located at the depot's coordinates. Cost matrices are therefore
//! `(n + 2) x (n + 2)`; a route that starts with arc `c(0, j)` and ends with
//! arc `c(k, n + 1)` leaves and re-enters the same physical depot.
//!
//! Instances come from TSPLIB-style CVRP files ([`InstanceFile::parse`]),
//! from raw coordinates, or from an explicit cost matrix (useful for
//! asymmetric test fixtures). A [`GiantTour`] is a permutation of the
//! customers together with the prefix sums of intra-tour arc costs that the
//! split kernels consume.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::Cost;

/// Index of the depot node.
pub const DEPOT: usize = 0;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("capacity must be positive")]
    NonPositiveCapacity,
    #[error("non-finite coordinate for node {0}")]
    NonFiniteCoordinate(usize),
    #[error("instance needs at least one customer")]
    NoCustomers,
    #[error("cost matrix is {got}x{got} but {expected}x{expected} is required for {n} customers")]
    MatrixDimension { got: usize, expected: usize, n: usize },
}

#[derive(Debug, Error)]
pub enum TourError {
    #[error("tour has {got} customers but the instance has {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("duplicate customer {0} in tour")]
    DuplicateCustomer(u32),
    #[error("customer {0} outside 1..={1}")]
    OutOfRange(u32, usize),
}

fn parse_err(line: usize, msg: impl Into<String>) -> InstanceError {
    InstanceError::Parse { line, msg: msg.into() }
}

/// Contents of a TSPLIB-style CVRP file, in file node order.
///
/// `coords[k]` and `demands[k]` describe file node `k + 1`; `depot_id` is
/// the 1-based id from `DEPOT_SECTION`. Customer-order accessors
/// ([`InstanceFile::customer_coords`], [`InstanceFile::nominal_demands`])
/// skip the depot entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub name: String,
    pub comment: Option<String>,
    pub dimension: usize,
    pub capacity: u64,
    pub coords: Vec<[f64; 2]>,
    pub demands: Vec<u16>,
    pub depot_id: usize,
}

impl InstanceFile {
    /// Parses a TSPLIB-style CVRP file.
    ///
    /// Required: `DIMENSION`, `CAPACITY`, `NODE_COORD_SECTION`,
    /// `DEMAND_SECTION`, `DEPOT_SECTION`. `EDGE_WEIGHT_TYPE` defaults to
    /// `EUC_2D` and no other value is supported. Node ids must cover
    /// `1..=DIMENSION` exactly; the depot's demand must be zero. Errors name
    /// the offending line.
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let mut name = None;
        let mut comment = None;
        let mut dimension: Option<usize> = None;
        let mut capacity: Option<(u64, usize)> = None;
        let mut coords: Vec<Option<[f64; 2]>> = Vec::new();
        let mut demands: Vec<Option<(u16, usize)>> = Vec::new();
        let mut depot_id: Option<usize> = None;

        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        while let Some((line_no, line)) = lines.next() {
            let keyword = line.split([':', ' ', '\t']).next().unwrap_or("");
            match keyword {
                "NAME" => name = Some(header_value(line).to_string()),
                "COMMENT" => comment = Some(header_value(line).to_string()),
                "TYPE" => {
                    let v = header_value(line);
                    if v != "CVRP" {
                        return Err(parse_err(line_no, format!("unsupported TYPE {v}")));
                    }
                }
                "EDGE_WEIGHT_TYPE" => {
                    let v = header_value(line);
                    if v != "EUC_2D" {
                        return Err(parse_err(line_no, format!("unsupported EDGE_WEIGHT_TYPE {v}")));
                    }
                }
                "DIMENSION" => {
                    let v = header_value(line);
                    let d: usize = v
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid DIMENSION {v}")))?;
                    if d < 2 {
                        return Err(parse_err(line_no, "DIMENSION must be at least 2"));
                    }
                    dimension = Some(d);
                }
                "CAPACITY" => {
                    let v = header_value(line);
                    let q: i64 = v
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid CAPACITY {v}")))?;
                    if q <= 0 {
                        return Err(parse_err(line_no, "capacity must be positive"));
                    }
                    capacity = Some((q as u64, line_no));
                }
                "NODE_COORD_SECTION" => {
                    let dim = dimension
                        .ok_or_else(|| parse_err(line_no, "NODE_COORD_SECTION before DIMENSION"))?;
                    coords = vec![None; dim];
                    for _ in 0..dim {
                        let (no, l) = lines
                            .next()
                            .ok_or_else(|| parse_err(line_no, "NODE_COORD_SECTION truncated"))?;
                        let mut it = l.split_whitespace();
                        let id = section_node_id(it.next(), no, dim)?;
                        let x = coord_field(it.next(), no, "x")?;
                        let y = coord_field(it.next(), no, "y")?;
                        if it.next().is_some() {
                            return Err(parse_err(no, "trailing fields in coordinate line"));
                        }
                        if coords[id - 1].replace([x, y]).is_some() {
                            return Err(parse_err(no, format!("duplicate node id {id}")));
                        }
                    }
                }
                "DEMAND_SECTION" => {
                    let dim = dimension
                        .ok_or_else(|| parse_err(line_no, "DEMAND_SECTION before DIMENSION"))?;
                    demands = vec![None; dim];
                    for _ in 0..dim {
                        let (no, l) = lines
                            .next()
                            .ok_or_else(|| parse_err(line_no, "DEMAND_SECTION truncated"))?;
                        let mut it = l.split_whitespace();
                        let id = section_node_id(it.next(), no, dim)?;
                        let raw = it
                            .next()
                            .ok_or_else(|| parse_err(no, "missing demand value"))?;
                        let d: i64 = raw
                            .parse()
                            .map_err(|_| parse_err(no, format!("invalid demand {raw}")))?;
                        if d < 0 {
                            return Err(parse_err(no, format!("negative demand {d}")));
                        }
                        if d > u16::MAX as i64 {
                            return Err(parse_err(no, format!("demand {d} exceeds {}", u16::MAX)));
                        }
                        if demands[id - 1].replace((d as u16, no)).is_some() {
                            return Err(parse_err(no, format!("duplicate node id {id}")));
                        }
                    }
                }
                "DEPOT_SECTION" => {
                    let dim = dimension
                        .ok_or_else(|| parse_err(line_no, "DEPOT_SECTION before DIMENSION"))?;
                    loop {
                        let (no, l) = lines
                            .next()
                            .ok_or_else(|| parse_err(line_no, "DEPOT_SECTION missing -1 terminator"))?;
                        if l == "-1" {
                            break;
                        }
                        let id: usize = l
                            .parse()
                            .map_err(|_| parse_err(no, format!("invalid depot id {l}")))?;
                        if id < 1 || id > dim {
                            return Err(parse_err(no, format!("depot id {id} outside 1..={dim}")));
                        }
                        if depot_id.replace(id).is_some() {
                            return Err(parse_err(no, "more than one depot"));
                        }
                    }
                }
                "EOF" => break,
                other => {
                    if line.contains(':') {
                        continue;
                    }
                    return Err(parse_err(line_no, format!("unrecognized section {other}")));
                }
            }
        }

        let dimension = dimension.ok_or(InstanceError::Missing("DIMENSION"))?;
        let (capacity, _) = capacity.ok_or(InstanceError::Missing("CAPACITY"))?;
        if coords.is_empty() {
            return Err(InstanceError::Missing("NODE_COORD_SECTION"));
        }
        if demands.is_empty() {
            return Err(InstanceError::Missing("DEMAND_SECTION"));
        }
        let depot_id = depot_id.ok_or(InstanceError::Missing("DEPOT_SECTION"))?;

        let coords: Vec<[f64; 2]> = coords
            .into_iter()
            .map(|c| c.ok_or(InstanceError::Missing("NODE_COORD_SECTION")))
            .collect::<Result<_, _>>()?;
        let demands: Vec<(u16, usize)> = demands
            .into_iter()
            .map(|d| d.ok_or(InstanceError::Missing("DEMAND_SECTION")))
            .collect::<Result<_, _>>()?;

        let (depot_demand, depot_demand_line) = demands[depot_id - 1];
        if depot_demand != 0 {
            return Err(parse_err(depot_demand_line, "depot demand must be zero"));
        }

        Ok(InstanceFile {
            name: name.unwrap_or_default(),
            comment,
            dimension,
            capacity,
            coords,
            demands: demands.into_iter().map(|(d, _)| d).collect(),
            depot_id,
        })
    }

    /// Renders the instance back to TSPLIB-style text. `parse` of the result
    /// reproduces `self` exactly; coordinates print with round-trip
    /// precision.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME : {}", self.name);
        if let Some(c) = &self.comment {
            let _ = writeln!(out, "COMMENT : {c}");
        }
        let _ = writeln!(out, "TYPE : CVRP");
        let _ = writeln!(out, "DIMENSION : {}", self.dimension);
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE : EUC_2D");
        let _ = writeln!(out, "CAPACITY : {}", self.capacity);
        let _ = writeln!(out, "NODE_COORD_SECTION");
        for (i, [x, y]) in self.coords.iter().enumerate() {
            let _ = writeln!(out, "{} {x} {y}", i + 1);
        }
        let _ = writeln!(out, "DEMAND_SECTION");
        for (i, d) in self.demands.iter().enumerate() {
            let _ = writeln!(out, "{} {d}", i + 1);
        }
        let _ = writeln!(out, "DEPOT_SECTION");
        let _ = writeln!(out, "{}", self.depot_id);
        let _ = writeln!(out, "-1");
        let _ = writeln!(out, "EOF");
        out
    }

    pub fn n_customers(&self) -> usize {
        self.dimension - 1
    }

    /// Depot coordinates followed by customer coordinates in file id order.
    pub fn depot_first_coords(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.dimension);
        out.push(self.coords[self.depot_id - 1]);
        out.extend(
            self.coords
                .iter()
                .enumerate()
                .filter(|(i, _)| i + 1 != self.depot_id)
                .map(|(_, c)| *c),
        );
        out
    }

    /// Customer demands in file id order (depot entry skipped). Customer
    /// `j` of the instance is the `j`-th non-depot file node.
    pub fn nominal_demands(&self) -> Vec<u16> {
        self.demands
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 != self.depot_id)
            .map(|(_, d)| *d)
            .collect()
    }
}

fn header_value(line: &str) -> &str {
    match line.split_once(':') {
        Some((_, v)) => v.trim(),
        None => line.split_whitespace().nth(1).unwrap_or(""),
    }
}

fn section_node_id(
    field: Option<&str>,
    line: usize,
    dim: usize,
) -> Result<usize, InstanceError> {
    let raw = field.ok_or_else(|| parse_err(line, "missing node id"))?;
    let id: usize = raw
        .parse()
        .map_err(|_| parse_err(line, format!("invalid node id {raw}")))?;
    if id < 1 || id > dim {
        return Err(parse_err(line, format!("node id {id} outside 1..={dim}")));
    }
    Ok(id)
}

fn coord_field(field: Option<&str>, line: usize, axis: &str) -> Result<f64, InstanceError> {
    let raw = field.ok_or_else(|| parse_err(line, format!("missing {axis} coordinate")))?;
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {axis} coordinate {raw}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite {axis} coordinate {raw}")));
    }
    Ok(v)
}

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<C> {
    dim: usize,
    data: Vec<C>,
}

impl<C: Copy> SquareMatrix<C> {
    pub fn from_vec(dim: usize, data: Vec<C>) -> Self {
        assert_eq!(data.len(), dim * dim, "matrix data length");
        SquareMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> C {
        self.data[a * self.dim + b]
    }

    pub fn row(&self, a: usize) -> &[C] {
        &self.data[a * self.dim..(a + 1) * self.dim]
    }
}

/// Builds the `(n + 2) x (n + 2)` Euclidean cost matrix from depot-first
/// coordinates (`coords[0]` is the depot, the rest are customers). Row and
/// column `n + 1` duplicate the depot's. The scalar type's
/// [`Cost::from_distance`] fixes the rounding convention.
pub fn build_cost_matrix<C: Cost>(coords: &[[f64; 2]]) -> Result<SquareMatrix<C>, InstanceError> {
    if coords.len() < 2 {
        return Err(InstanceError::NoCustomers);
    }
    for (i, c) in coords.iter().enumerate() {
        if !c[0].is_finite() || !c[1].is_finite() {
            return Err(InstanceError::NonFiniteCoordinate(i));
        }
    }
    let n = coords.len() - 1;
    let dim = n + 2;
    let node = |a: usize| coords[if a == n + 1 { 0 } else { a }];
    let mut data = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        let [ax, ay] = node(a);
        for b in 0..dim {
            let [bx, by] = node(b);
            let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            data.push(C::from_distance(d));
        }
    }
    Ok(SquareMatrix::from_vec(dim, data))
}

/// A routing instance: customer count, capacity, and the full cost matrix
/// over depot, customers, and return depot.
#[derive(Clone, Debug)]
pub struct CvrpInstance<C> {
    name: String,
    n: usize,
    capacity: u64,
    cost: SquareMatrix<C>,
    coords: Option<Vec<[f64; 2]>>,
}

impl<C: Cost> CvrpInstance<C> {
    /// Builds an instance from a parsed file, applying the scalar type's
    /// rounding convention to Euclidean distances.
    pub fn from_file(file: &InstanceFile) -> Result<Self, InstanceError> {
        Self::from_coords(&file.name, &file.depot_first_coords(), file.capacity)
    }

    /// Builds a Euclidean instance from depot-first coordinates.
    pub fn from_coords(
        name: &str,
        coords: &[[f64; 2]],
        capacity: u64,
    ) -> Result<Self, InstanceError> {
        if capacity == 0 {
            return Err(InstanceError::NonPositiveCapacity);
        }
        let cost = build_cost_matrix(coords)?;
        Ok(CvrpInstance {
            name: name.to_string(),
            n: coords.len() - 1,
            capacity,
            cost,
            coords: Some(coords.to_vec()),
        })
    }

    /// Builds an instance from an explicit `(n + 2) x (n + 2)` cost matrix.
    pub fn from_cost_matrix(
        name: &str,
        n: usize,
        capacity: u64,
        cost: SquareMatrix<C>,
    ) -> Result<Self, InstanceError> {
        if capacity == 0 {
            return Err(InstanceError::NonPositiveCapacity);
        }
        if n == 0 {
            return Err(InstanceError::NoCustomers);
        }
        if cost.dim() != n + 2 {
            return Err(InstanceError::MatrixDimension { got: cost.dim(), expected: n + 2, n });
        }
        Ok(CvrpInstance { name: name.to_string(), n, capacity, cost, coords: None })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of customers.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Index of the synthetic return depot.
    pub fn return_depot(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn cost(&self, a: usize, b: usize) -> C {
        self.cost.at(a, b)
    }

    pub fn cost_matrix(&self) -> &SquareMatrix<C> {
        &self.cost
    }

    /// Depot-first coordinates, when the instance was built from geometry.
    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }
}

/// A permutation of all customers plus prefix sums of intra-tour arc costs.
///
/// `dist_prefix()[k]` is the cost of traveling the first `k` arcs of the
/// tour, so the open-path cost from tour position `i` to position `j`
/// (1-based, `i <= j`) is `dist_prefix()[j - 1] - dist_prefix()[i - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GiantTour<C> {
    order: Vec<u32>,
    dist_prefix: Vec<C>,
}

impl<C: Cost> GiantTour<C> {
    /// Validates `order` as a permutation of `1..=n` and precomputes the
    /// arc-cost prefix sums.
    pub fn new(instance: &CvrpInstance<C>, order: &[u32]) -> Result<Self, TourError> {
        let n = instance.n();
        if order.len() != n {
            return Err(TourError::WrongLength { got: order.len(), expected: n });
        }
        let mut seen = vec![false; n + 1];
        for &c in order {
            if c < 1 || c as usize > n {
                return Err(TourError::OutOfRange(c, n));
            }
            if std::mem::replace(&mut seen[c as usize], true) {
                return Err(TourError::DuplicateCustomer(c));
            }
        }
        let mut dist_prefix = Vec::with_capacity(n);
        let mut acc = C::ZERO;
        dist_prefix.push(acc);
        for w in order.windows(2) {
            acc = acc.add(instance.cost(w[0] as usize, w[1] as usize));
            dist_prefix.push(acc);
        }
        Ok(GiantTour { order: order.to_vec(), dist_prefix })
    }

    /// The tour `1, 2, ..., n`.
    pub fn identity(instance: &CvrpInstance<C>) -> Self {
        let order: Vec<u32> = (1..=instance.n() as u32).collect();
        Self::new(instance, &order).expect("identity order is a permutation")
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn dist_prefix(&self) -> &[C] {
        &self.dist_prefix
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }
}

/// Parses a tour file: whitespace- or comma-separated customer ids, with
/// `#` starting a comment that runs to end of line. Validation against an
/// instance happens in [`GiantTour::new`].
pub fn parse_tour(text: &str) -> Result<Vec<u32>, InstanceError> {
    let mut order = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            let id: u32 = tok
                .parse()
                .map_err(|_| parse_err(i + 1, format!("invalid customer id {tok}")))?;
            if id == 0 {
                return Err(parse_err(i + 1, "customer ids start at 1"));
            }
            order.push(id);
        }
    }
    if order.is_empty() {
        return Err(InstanceError::Missing("tour customers"));
    }
    Ok(order)
}
