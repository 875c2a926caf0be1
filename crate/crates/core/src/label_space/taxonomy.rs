use std::collections::{BTreeSet, HashMap};

use super::LabelError;

pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelNode {
    pub id: usize,
    /// Last path segment, e.g. `Traditional Pop`.
    pub name: String,
    /// Normalized full path, e.g. `Pop/Oldies/Traditional Pop`.
    pub path: String,
    pub parent: Option<usize>,
    pub depth: usize,
}

/// Genre tree built from branch paths. Node ids are assigned in order of
/// first appearance, parents always before children.
#[derive(Debug, Clone, Default)]
pub struct LabelTaxonomy {
    nodes: Vec<LabelNode>,
    path_index: HashMap<String, usize>,
}

fn split_path(path: &str) -> Result<Vec<&str>, LabelError> {
    let segments: Vec<&str> = path.split('/').map(str::trim).collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(LabelError::EmptyPath(path.to_string()));
    }
    if segments.len() > MAX_DEPTH {
        return Err(LabelError::DepthExceeded {
            path: path.to_string(),
            depth: segments.len(),
            max: MAX_DEPTH,
        });
    }
    Ok(segments)
}

/// Normalizes a branch path: trims every segment and joins with `/`.
pub(crate) fn normalize_path(path: &str) -> Result<String, LabelError> {
    Ok(split_path(path)?.join("/"))
}

pub fn parse_taxonomy<I, S>(branch_paths: I) -> Result<LabelTaxonomy, LabelError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut tax = LabelTaxonomy::default();
    for raw in branch_paths {
        tax.insert_path(raw.as_ref())?;
    }
    Ok(tax)
}

impl LabelTaxonomy {
    /// Adds every prefix of `path` that is not yet present and returns the
    /// id of the full path.
    pub fn insert_path(&mut self, path: &str) -> Result<usize, LabelError> {
        let segments = split_path(path)?;
        let mut parent = None;
        let mut prefix = String::new();
        for (depth, seg) in segments.iter().enumerate() {
            if depth > 0 {
                prefix.push('/');
            }
            prefix.push_str(seg);
            let id = match self.path_index.get(&prefix) {
                Some(&id) => id,
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(LabelNode {
                        id,
                        name: seg.to_string(),
                        path: prefix.clone(),
                        parent,
                        depth: depth + 1,
                    });
                    self.path_index.insert(prefix.clone(), id);
                    id
                }
            };
            parent = Some(id);
        }
        Ok(parent.expect("split_path yields at least one segment"))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[LabelNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &LabelNode {
        &self.nodes[id]
    }

    pub fn lookup(&self, path: &str) -> Result<usize, LabelError> {
        let norm = normalize_path(path)?;
        self.path_index
            .get(&norm)
            .copied()
            .ok_or(LabelError::UnknownPath(norm))
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = &LabelNode> {
        self.nodes.iter().filter(move |n| n.parent == Some(id))
    }

    /// `id` followed by its ancestors up to the root.
    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(id), move |&cur| self.nodes[cur].parent)
    }

    /// Writes one full path per line, in node order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&n.path);
            out.push('\n');
        }
        out
    }

    /// Parses the taxonomy file format: one branch path per line, blank
    /// lines ignored.
    pub fn from_text(text: &str) -> Result<Self, LabelError> {
        parse_taxonomy(text.lines().filter(|l| !l.trim().is_empty()))
    }
}

/// Ancestor closure of the labels named by `item_paths`.
pub fn close_labels<S: AsRef<str>>(
    item_paths: &[S],
    tax: &LabelTaxonomy,
) -> Result<BTreeSet<usize>, LabelError> {
    let mut out = BTreeSet::new();
    for p in item_paths {
        let id = tax.lookup(p.as_ref())?;
        out.extend(tax.ancestors(id));
    }
    Ok(out)
}

/// Sparse binary item x label matrix, one sorted label list per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemLabelMatrix {
    n_labels: usize,
    rows: Vec<Vec<usize>>,
}

impl ItemLabelMatrix {
    pub fn new(n_labels: usize, rows: Vec<Vec<usize>>) -> Result<Self, LabelError> {
        let mut clean = Vec::with_capacity(rows.len());
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            row.dedup();
            if row.is_empty() {
                return Err(LabelError::EmptyItem(i));
            }
            if let Some(&label) = row.iter().find(|&&l| l >= n_labels) {
                return Err(LabelError::LabelOutOfRange { label, n_labels });
            }
            clean.push(row);
        }
        Ok(Self {
            n_labels,
            rows: clean,
        })
    }

    pub fn from_sets(n_labels: usize, sets: &[BTreeSet<usize>]) -> Result<Self, LabelError> {
        Self::new(n_labels, sets.iter().map(|s| s.iter().copied().collect()).collect())
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn row(&self, item: usize) -> &[usize] {
        &self.rows[item]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn contains(&self, item: usize, label: usize) -> bool {
        self.rows[item].binary_search(&label).is_ok()
    }

    /// Number of items carrying each label.
    pub fn supports(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_labels];
        for row in &self.rows {
            for &l in row {
                s[l] += 1;
            }
        }
        s
    }

    /// Restriction to a subset of items, keeping all label columns.
    pub fn select_items(&self, items: &[usize]) -> Self {
        Self {
            n_labels: self.n_labels,
            rows: items.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Dense 0/1 matrix.
    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut out = ndarray::Array2::zeros((self.rows.len(), self.n_labels));
        for (i, row) in self.rows.iter().enumerate() {
            for &l in row {
                out[[i, l]] = 1.0;
            }
        }
        out
    }
}

/// Result of pruning: the re-indexed matrix plus new-to-old index maps.
#[derive(Debug, Clone)]
pub struct Pruned {
    pub matrix: ItemLabelMatrix,
    /// `label_map[new] = old` label column.
    pub label_map: Vec<usize>,
    /// `item_map[new] = old` item row.
    pub item_map: Vec<usize>,
}

pub fn prune_rare_labels(m: &ItemLabelMatrix, min_support: usize) -> Result<Pruned, LabelError> {
    if min_support == 0 {
        return Err(LabelError::InvalidSupport);
    }
    let supports = m.supports();
    let label_map: Vec<usize> = (0..m.n_labels)
        .filter(|&l| supports[l] >= min_support)
        .collect();
    if label_map.is_empty() {
        return Err(LabelError::AllLabelsPruned);
    }
    let mut remap = vec![usize::MAX; m.n_labels];
    for (new, &old) in label_map.iter().enumerate() {
        remap[old] = new;
    }
    let mut rows = Vec::new();
    let mut item_map = Vec::new();
    for (i, row) in m.rows.iter().enumerate() {
        let kept: Vec<usize> = row
            .iter()
            .map(|&l| remap[l])
            .filter(|&l| l != usize::MAX)
            .collect();
        if !kept.is_empty() {
            rows.push(kept);
            item_map.push(i);
        }
    }
    Ok(Pruned {
        matrix: ItemLabelMatrix {
            n_labels: label_map.len(),
            rows,
        },
        label_map,
        item_map,
    })
}
