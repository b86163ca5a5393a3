//! Connected-component area statistics for label masks.
//!
//! Components are maximal 8-connected regions of one class within one mask.
//! [`IGNORE`] pixels belong to no component. Reports from disjoint corpora
//! merge with [`AreaAccumulator::merge`] in any order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{LabelMask, IGNORE};

pub const DEFAULT_TINY_THRESHOLD: u64 = 10;
pub const DEFAULT_BIN_EDGES: [u64; 5] = [0, 10, 100, 1000, 10000];
pub const CONNECTIVITY: u8 = 8;

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let next = self.parent[x as usize];
            self.parent[x as usize] = self.parent[next as usize];
            x = next;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

const UNLABELED: u32 = u32::MAX;

/// Areas of the 8-connected regions of `class_index`, ascending.
pub fn connected_components(mask: &LabelMask, class_index: u8) -> Vec<u64> {
    let (w, h) = (mask.width(), mask.height());
    if class_index == IGNORE || w == 0 || h == 0 {
        return Vec::new();
    }
    let values = mask.values();
    let mut labels = vec![UNLABELED; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if values[i] != class_index {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut label = UNLABELED;
            let mut join = |j: usize, label: &mut u32| {
                let l = labels[j];
                if l != UNLABELED {
                    *label = if *label == UNLABELED { l } else { sets.union(*label, l) };
                }
            };
            if x > 0 {
                join(i - 1, &mut label);
            }
            if y > 0 {
                let up = i - w;
                if x > 0 {
                    join(up - 1, &mut label);
                }
                join(up, &mut label);
                if x + 1 < w {
                    join(up + 1, &mut label);
                }
            }
            labels[i] = if label == UNLABELED { sets.make() } else { label };
        }
    }

    let mut sizes: BTreeMap<u32, u64> = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l != UNLABELED) {
        *sizes.entry(sets.find(l)).or_default() += 1;
    }
    let mut areas: Vec<u64> = sizes.into_values().collect();
    areas.sort_unstable();
    areas
}

/// Per-class component areas of one mask, for every class present.
pub fn mask_components(mask: &LabelMask) -> BTreeMap<u8, Vec<u64>> {
    mask.class_set()
        .into_iter()
        .filter(|&c| c != IGNORE)
        .map(|c| (c, connected_components(mask, c)))
        .collect()
}

fn check_edges(edges: &[u64]) -> Result<Vec<u64>> {
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "area bins must be strictly increasing, got {edges:?}"
        )));
    }
    let mut out = Vec::with_capacity(edges.len() + 1);
    if edges.first() != Some(&0) {
        out.push(0);
    }
    out.extend_from_slice(edges);
    Ok(out)
}

fn bin_of(edges: &[u64], area: u64) -> usize {
    edges.partition_point(|&e| e <= area) - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAreas {
    /// Sorted ascending.
    pub areas: Vec<u64>,
    pub histogram: Vec<u64>,
    pub components: u64,
    pub tiny_components: u64,
    pub tiny_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub masks: u64,
    pub connectivity: u8,
    pub tiny_threshold: u64,
    /// Lower edges; bin `i` is `[edges[i], edges[i + 1])`, the last is open.
    pub bin_edges: Vec<u64>,
    pub histogram: Vec<u64>,
    pub total_components: u64,
    pub tiny_components: u64,
    pub tiny_fraction: f64,
    pub classes: BTreeMap<u8, ClassAreas>,
}

impl AreaReport {
    pub fn bin_label(&self, i: usize) -> String {
        match self.bin_edges.get(i + 1) {
            Some(hi) => format!("[{},{})", self.bin_edges[i], hi),
            None => format!("[{},inf)", self.bin_edges[i]),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per class per bin, then the all-class rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "bin", "lower", "upper", "count", "proportion"])?;
        let mut rows: Vec<(String, &[u64], u64)> = self
            .classes
            .iter()
            .map(|(c, a)| (c.to_string(), a.histogram.as_slice(), a.components))
            .collect();
        rows.push(("all".into(), &self.histogram, self.total_components));
        for (class, hist, total) in rows {
            for (i, &count) in hist.iter().enumerate() {
                let upper = self.bin_edges.get(i + 1).map(|v| v.to_string()).unwrap_or_default();
                let prop = if total == 0 { 0.0 } else { count as f64 / total as f64 };
                w.write_record([
                    class.clone(),
                    self.bin_label(i),
                    self.bin_edges[i].to_string(),
                    upper,
                    count.to_string(),
                    format!("{prop:.6}"),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Mergeable partial statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaAccumulator {
    edges: Vec<u64>,
    tiny_threshold: u64,
    masks: u64,
    areas: BTreeMap<u8, Vec<u64>>,
}

impl AreaAccumulator {
    pub fn new(bin_edges: &[u64], tiny_threshold: u64) -> Result<Self> {
        Ok(Self {
            edges: check_edges(bin_edges)?,
            tiny_threshold,
            masks: 0,
            areas: BTreeMap::new(),
        })
    }

    pub fn add_mask(&mut self, mask: &LabelMask) {
        self.add_components(mask_components(mask));
    }

    pub fn add_components(&mut self, per_class: BTreeMap<u8, Vec<u64>>) {
        self.masks += 1;
        for (class, areas) in per_class {
            self.areas.entry(class).or_default().extend(areas);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        debug_assert_eq!(self.edges, other.edges);
        self.masks += other.masks;
        for (class, areas) in other.areas {
            self.areas.entry(class).or_default().extend(areas);
        }
        self
    }

    pub fn finish(self) -> AreaReport {
        let nbins = self.edges.len();
        let tiny = self.tiny_threshold;
        let fraction = |t: u64, n: u64| if n == 0 { 0.0 } else { t as f64 / n as f64 };
        let mut histogram = vec![0u64; nbins];
        let (mut total, mut total_tiny) = (0u64, 0u64);
        let mut classes = BTreeMap::new();
        for (class, mut areas) in self.areas {
            areas.sort_unstable();
            let mut hist = vec![0u64; nbins];
            for &a in &areas {
                hist[bin_of(&self.edges, a)] += 1;
            }
            let n = areas.len() as u64;
            let t = areas.partition_point(|&a| a < tiny) as u64;
            histogram.iter_mut().zip(&hist).for_each(|(h, c)| *h += c);
            total += n;
            total_tiny += t;
            classes.insert(
                class,
                ClassAreas {
                    areas,
                    histogram: hist,
                    components: n,
                    tiny_components: t,
                    tiny_fraction: fraction(t, n),
                },
            );
        }
        AreaReport {
            masks: self.masks,
            connectivity: CONNECTIVITY,
            tiny_threshold: tiny,
            bin_edges: self.edges,
            histogram,
            total_components: total,
            tiny_components: total_tiny,
            tiny_fraction: fraction(total_tiny, total),
            classes,
        }
    }
}

/// Aggregates components of every class in every mask.
pub fn area_report<'a>(
    masks: impl IntoIterator<Item = &'a LabelMask>,
    bin_edges: &[u64],
    tiny_threshold: u64,
) -> Result<AreaReport> {
    let mut acc = AreaAccumulator::new(bin_edges, tiny_threshold)?;
    for m in masks {
        acc.add_mask(m);
    }
    Ok(acc.finish())
}
