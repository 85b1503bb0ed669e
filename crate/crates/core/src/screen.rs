//! Static kd-tree over screening keys.
//!
//! A [`Proximity`](crate::packing::Proximity) may expose keys with the
//! contract `d(i, j) <= r  =>  |key_i[k] - key_j[k]| <= r` for every key
//! dimension `k` (gaps measured periodically when the dimension has a
//! period). Box queries then return a superset of the `r`-neighbourhood.

#[derive(Debug, Clone)]
pub struct Screen {
    pub dims: usize,
    /// Row-major keys, `dims` values per point.
    pub keys: Vec<f64>,
    /// Period of each key dimension, if it wraps around.
    pub periods: Vec<Option<f64>>,
}

impl Screen {
    pub fn len(&self) -> usize {
        self.keys.len().checked_div(self.dims).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn key(&self, i: usize) -> &[f64] {
        &self.keys[i * self.dims..(i + 1) * self.dims]
    }

    /// Keeps only the dimensions whose spread exceeds `2 r`; the others cannot prune.
    pub fn informative(self, r: f64, max_dims: usize) -> Screen {
        let m = self.len();
        let mut spread: Vec<(usize, f64)> = (0..self.dims)
            .map(|k| {
                let (lo, hi) = (0..m).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = self.keys[i * self.dims + k];
                    (lo.min(v), hi.max(v))
                });
                let s = match self.periods[k] {
                    Some(p) => (hi - lo).min(p),
                    None => hi - lo,
                };
                (k, s)
            })
            .filter(|&(_, s)| s > 2.0 * r)
            .collect();
        spread.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        spread.truncate(max_dims);
        spread.sort_by_key(|&(k, _)| k);
        let dims: Vec<usize> = spread.iter().map(|&(k, _)| k).collect();
        let mut keys = Vec::with_capacity(m * dims.len());
        for i in 0..m {
            keys.extend(dims.iter().map(|&k| self.keys[i * self.dims + k]));
        }
        Screen {
            dims: dims.len(),
            periods: dims.iter().map(|&k| self.periods[k]).collect(),
            keys,
        }
    }
}

const LEAF: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        left: Box<Node>,
        right: Box<Node>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

/// Immutable kd-tree answering axis-aligned (possibly wrapping) box queries.
pub struct KdTree {
    screen: Screen,
    order: Vec<u32>,
    root: Node,
}

impl KdTree {
    pub fn build(screen: Screen) -> KdTree {
        let m = screen.len();
        let mut order: Vec<u32> = (0..m as u32).collect();
        let root = if screen.dims == 0 {
            Node::Leaf { start: 0, end: m }
        } else {
            Self::build_node(&screen, &mut order, 0, m)
        };
        KdTree {
            screen,
            order,
            root,
        }
    }

    fn bounds(screen: &Screen, order: &[u32]) -> (Vec<f64>, Vec<f64>) {
        let d = screen.dims;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in order {
            for (k, &v) in screen.key(i as usize).iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }

    fn build_node(screen: &Screen, order: &mut [u32], start: usize, end: usize) -> Node {
        if end - start <= LEAF {
            return Node::Leaf { start, end };
        }
        let slice = &mut order[start..end];
        let (lo, hi) = Self::bounds(screen, slice);
        let dim = (0..screen.dims)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[dim] - lo[dim] <= 0.0 {
            return Node::Leaf { start, end };
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            screen.key(a as usize)[dim]
                .total_cmp(&screen.key(b as usize)[dim])
                .then(a.cmp(&b))
        });
        let left = Self::build_node(screen, order, start, start + mid);
        let right = Self::build_node(screen, order, start + mid, end);
        Node::Split {
            left: Box::new(left),
            right: Box::new(right),
            lo,
            hi,
        }
    }

    pub fn screen(&self) -> &Screen {
        &self.screen
    }

    /// Calls `visit` for every point whose key lies within `r` of the key of
    /// point `i` in every dimension (including `i` itself).
    pub fn for_each_near<F: FnMut(usize)>(&self, i: usize, r: f64, mut visit: F) {
        let center = self.screen.key(i).to_vec();
        self.visit_node(&self.root, &center, r, &mut visit);
    }

    fn dim_gap(&self, k: usize, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.screen.periods[k] {
            Some(p) => {
                let m = d % p;
                m.min(p - m)
            }
            None => d,
        }
    }

    fn box_hits(&self, k: usize, c: f64, r: f64, lo: f64, hi: f64) -> bool {
        let direct = c + r >= lo && c - r <= hi;
        match self.screen.periods[k] {
            Some(p) if !direct => {
                (c + p + r >= lo && c + p - r <= hi) || (c - p + r >= lo && c - p - r <= hi)
            }
            _ => direct,
        }
    }

    fn visit_node<F: FnMut(usize)>(&self, node: &Node, c: &[f64], r: f64, visit: &mut F) {
        match node {
            Node::Leaf { start, end } => {
                for &j in &self.order[*start..*end] {
                    let key = self.screen.key(j as usize);
                    if (0..self.screen.dims)
                        .all(|k| self.dim_gap(k, c[k], key[k]) <= r * (1.0 + 1e-12) + 1e-15)
                    {
                        visit(j as usize);
                    }
                }
            }
            Node::Split {
                left,
                right,
                lo,
                hi,
                ..
            } => {
                if (0..self.screen.dims)
                    .all(|k| self.box_hits(k, c[k], r * (1.0 + 1e-12) + 1e-15, lo[k], hi[k]))
                {
                    self.visit_node(left, c, r, visit);
                    self.visit_node(right, c, r, visit);
                }
            }
        }
    }
}
