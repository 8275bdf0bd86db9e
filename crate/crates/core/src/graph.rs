//! Reviewer-item bipartite graphs.
//!
//! A [`BipartiteGraph`] records which reviewers can review which items. It
//! is a simple graph: each (reviewer, item) pair appears at most once. Edges
//! are kept sorted so two graphs with the same edge set compare (and
//! serialize) identically regardless of insertion order.
//!
//! Three generators are provided, see [`GraphModel`].

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{parse_err, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReviewerId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub usize);

/// How edges are drawn when generating a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphModel {
    /// Reviewer and item both uniform.
    Random,
    /// Reviewer uniform, item with probability proportional to degree + 1.
    ItemPA,
    /// Reviewer and item both with probability proportional to degree + 1.
    ReviewerItemPA,
}

impl GraphModel {
    pub const ALL: [GraphModel; 3] = [
        GraphModel::Random,
        GraphModel::ItemPA,
        GraphModel::ReviewerItemPA,
    ];

    /// Short tag used on the command line and in CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            GraphModel::Random => "rnd",
            GraphModel::ItemPA => "ipa",
            GraphModel::ReviewerItemPA => "ripa",
        }
    }

    /// Stable numeric code used in seed derivation.
    pub fn code(self) -> u64 {
        match self {
            GraphModel::Random => 0,
            GraphModel::ItemPA => 1,
            GraphModel::ReviewerItemPA => 2,
        }
    }
}

impl fmt::Display for GraphModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for GraphModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rnd" | "random" => Ok(GraphModel::Random),
            "ipa" => Ok(GraphModel::ItemPA),
            "ripa" => Ok(GraphModel::ReviewerItemPA),
            other => Err(Error::Parameter(format!(
                "unknown graph model {other:?} (expected rnd, ipa or ripa)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    num_reviewers: usize,
    num_items: usize,
    edges: Vec<(ReviewerId, ItemId)>,
    reviewer_items: Vec<Vec<ItemId>>,
    item_reviewers: Vec<Vec<ReviewerId>>,
}

impl BipartiteGraph {
    /// Build a graph from an edge list. Fails on out-of-range endpoints or
    /// repeated pairs.
    pub fn new<I>(num_reviewers: usize, num_items: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut list = Vec::new();
        for (u, i) in edges {
            if u >= num_reviewers || i >= num_items {
                return Err(Error::Validation(format!(
                    "edge ({u},{i}) out of range for {num_reviewers} reviewers and {num_items} items"
                )));
            }
            list.push((ReviewerId(u), ItemId(i)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!(
                "duplicate edge ({},{})",
                w[0].0 .0, w[0].1 .0
            )));
        }
        Ok(Self::from_sorted(num_reviewers, num_items, list))
    }

    /// The complete bipartite graph.
    pub fn complete(num_reviewers: usize, num_items: usize) -> Self {
        let edges = (0..num_reviewers)
            .flat_map(|u| (0..num_items).map(move |i| (ReviewerId(u), ItemId(i))))
            .collect();
        Self::from_sorted(num_reviewers, num_items, edges)
    }

    fn from_sorted(num_reviewers: usize, num_items: usize, edges: Vec<(ReviewerId, ItemId)>) -> Self {
        let mut reviewer_items = vec![Vec::new(); num_reviewers];
        let mut item_reviewers = vec![Vec::new(); num_items];
        for &(u, i) in &edges {
            reviewer_items[u.0].push(i);
            item_reviewers[i.0].push(u);
        }
        // Edges are sorted by (u, i) so reviewer_items is already ordered;
        // item_reviewers receives reviewers in increasing u for each item too.
        Self {
            num_reviewers,
            num_items,
            edges,
            reviewer_items,
            item_reviewers,
        }
    }

    pub fn num_reviewers(&self) -> usize {
        self.num_reviewers
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in (reviewer, item) lexicographic order.
    pub fn edges(&self) -> &[(ReviewerId, ItemId)] {
        &self.edges
    }

    /// `I_u`: the items reviewer `u` can review.
    pub fn items_of(&self, u: ReviewerId) -> &[ItemId] {
        &self.reviewer_items[u.0]
    }

    /// `V_i`: the reviewers who can review item `i`.
    pub fn reviewers_of(&self, i: ItemId) -> &[ReviewerId] {
        &self.item_reviewers[i.0]
    }

    pub fn contains_edge(&self, u: ReviewerId, i: ItemId) -> bool {
        u.0 < self.num_reviewers && self.reviewer_items[u.0].binary_search(&i).is_ok()
    }

    /// Reviewer degrees and item degrees.
    pub fn degree_sequences(&self) -> (Vec<usize>, Vec<usize>) {
        (
            self.reviewer_items.iter().map(Vec::len).collect(),
            self.item_reviewers.iter().map(Vec::len).collect(),
        )
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "reviewers {} items {} edges {}",
            self.num_reviewers,
            self.num_items,
            self.edges.len()
        )?;
        for (u, i) in &self.edges {
            writeln!(w, "{} {}", u.0, i.0)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (header_line, header) = loop {
            match lines.next() {
                Some((k, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break (k, l);
                    }
                }
                None => return Err(parse_err(1, "missing header")),
            }
        };
        let [nr, ni, ne] = parse_header(header_line, &header)?;

        let mut edges = Vec::with_capacity(ne);
        for (k, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(u), Some(i), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(k, format!("expected `u i`, got {line:?}")));
            };
            let u: usize = u
                .parse()
                .map_err(|_| parse_err(k, format!("bad reviewer index {u:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(k, format!("bad item index {i:?}")))?;
            edges.push((u, i));
        }
        if edges.len() != ne {
            return Err(Error::Validation(format!(
                "header declares {ne} edges but file lists {}",
                edges.len()
            )));
        }
        Self::new(nr, ni, edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<[usize; 3]> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 6 || f[0] != "reviewers" || f[2] != "items" || f[4] != "edges" {
        return Err(parse_err(
            line_no,
            "expected header `reviewers <n> items <m> edges <k>`",
        ));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("bad count {s:?}")))
    };
    Ok([num(f[1])?, num(f[3])?, num(f[5])?])
}

/// Draws an index with probability proportional to (degree + 1).
///
/// The urn holds every node once plus one entry per incident edge, so a
/// uniform pick from it has exactly the add-one preferential weights.
struct DegreeUrn(Vec<usize>);

impl DegreeUrn {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        self.0[rng.random_range(0..self.0.len())]
    }

    fn record(&mut self, node: usize) {
        self.0.push(node);
    }
}

/// Generate a simple bipartite graph with exactly `num_edges` edges.
///
/// Each attempt draws a reviewer and an item according to `model`; if the
/// pair is already an edge, both endpoints are redrawn. Degrees used for
/// preferential weighting are those of the graph under construction.
pub fn generate_graph(
    model: GraphModel,
    num_reviewers: usize,
    num_items: usize,
    num_edges: usize,
    seed: u64,
) -> Result<BipartiteGraph> {
    if num_reviewers == 0 || num_items == 0 {
        return Err(Error::Parameter(
            "graph needs at least one reviewer and one item".into(),
        ));
    }
    if num_edges == 0 {
        return Err(Error::Parameter("num_edges must be positive".into()));
    }
    let capacity = num_reviewers
        .checked_mul(num_items)
        .ok_or_else(|| Error::Parameter("graph size overflows".into()))?;
    if num_edges > capacity {
        return Err(Error::Parameter(format!(
            "{num_edges} edges requested but only {capacity} distinct pairs exist"
        )));
    }

    let mut rng = seed::rng(seed);
    let mut reviewer_urn = DegreeUrn::new(num_reviewers);
    let mut item_urn = DegreeUrn::new(num_items);
    let mut present = HashSet::with_capacity(num_edges);
    let mut edges = Vec::with_capacity(num_edges);

    while edges.len() < num_edges {
        let u = match model {
            GraphModel::Random | GraphModel::ItemPA => rng.random_range(0..num_reviewers),
            GraphModel::ReviewerItemPA => reviewer_urn.draw(&mut rng),
        };
        let i = match model {
            GraphModel::Random => rng.random_range(0..num_items),
            GraphModel::ItemPA | GraphModel::ReviewerItemPA => item_urn.draw(&mut rng),
        };
        if present.insert((u, i)) {
            edges.push((ReviewerId(u), ItemId(i)));
            reviewer_urn.record(u);
            item_urn.record(i);
        }
    }
    edges.sort_unstable();
    Ok(BipartiteGraph::from_sorted(num_reviewers, num_items, edges))
}
