//! Bounding-volume hierarchy for exact nearest-primitive queries.

use super::{add, dot, scale, sub, P3};

const LEAF: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: P3,
    hi: P3,
    /// Leaf: first primitive slot; inner: index of the left child (right is `+1`).
    start: u32,
    /// Zero for inner nodes.
    count: u32,
}

/// Hierarchy over primitive bounding boxes. Distances are supplied by the
/// caller, so the same tree serves triangles and segments.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

fn box_dist2(p: P3, lo: P3, hi: P3) -> f64 {
    let mut d = 0.0;
    for i in 0..3 {
        let e = (lo[i] - p[i]).max(p[i] - hi[i]).max(0.0);
        d += e * e;
    }
    d
}

impl Bvh {
    /// `boxes[i]` is the `(lo, hi)` box of primitive `i`.
    pub fn build(boxes: &[(P3, P3)]) -> Bvh {
        let cent: Vec<P3> = boxes.iter().map(|(l, h)| scale(add(*l, *h), 0.5)).collect();
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let mut nodes = vec![Node { lo: [0.0; 3], hi: [0.0; 3], start: 0, count: 0 }];
        let mut stack = vec![(0usize, 0usize, boxes.len())];
        while let Some((node, a, b)) = stack.pop() {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            let mut clo = [f64::INFINITY; 3];
            let mut chi = [f64::NEG_INFINITY; 3];
            for &i in &order[a..b] {
                let (l, h) = boxes[i as usize];
                let c = cent[i as usize];
                for k in 0..3 {
                    lo[k] = lo[k].min(l[k]);
                    hi[k] = hi[k].max(h[k]);
                    clo[k] = clo[k].min(c[k]);
                    chi[k] = chi[k].max(c[k]);
                }
            }
            nodes[node].lo = lo;
            nodes[node].hi = hi;
            if b - a <= LEAF {
                nodes[node].start = a as u32;
                nodes[node].count = (b - a) as u32;
                continue;
            }
            let axis = (0..3).max_by(|&x, &y| (chi[x] - clo[x]).total_cmp(&(chi[y] - clo[y]))).unwrap();
            let mid = (a + b) / 2;
            order[a..b].select_nth_unstable_by(mid - a, |&x, &y| {
                cent[x as usize][axis].total_cmp(&cent[y as usize][axis])
            });
            let left = nodes.len();
            let empty = Node { lo: [0.0; 3], hi: [0.0; 3], start: 0, count: 0 };
            nodes.push(empty);
            nodes.push(empty);
            nodes[node].start = left as u32;
            stack.push((left, a, mid));
            stack.push((left + 1, mid, b));
        }
        Bvh { nodes, order }
    }

    /// Nearest primitive to `p` among those with squared distance below
    /// `cap2`. `dist2(i)` returns the squared distance to primitive `i`, or
    /// `None` to exclude it.
    pub fn nearest(&self, p: P3, cap2: f64, mut dist2: impl FnMut(usize) -> Option<f64>) -> Option<(usize, f64)> {
        let mut best = cap2;
        let mut hit = None;
        let mut stack: [u32; 64] = [0; 64];
        let mut sp = 0;
        if box_dist2(p, self.nodes[0].lo, self.nodes[0].hi) >= best {
            return None;
        }
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let n = self.nodes[stack[sp] as usize];
            if box_dist2(p, n.lo, n.hi) >= best {
                continue;
            }
            if n.count > 0 {
                for &i in &self.order[n.start as usize..(n.start + n.count) as usize] {
                    if let Some(d) = dist2(i as usize) {
                        if d < best {
                            best = d;
                            hit = Some((i as usize, d));
                        }
                    }
                }
                continue;
            }
            let (l, r) = (n.start as usize, n.start as usize + 1);
            let dl = box_dist2(p, self.nodes[l].lo, self.nodes[l].hi);
            let dr = box_dist2(p, self.nodes[r].lo, self.nodes[r].hi);
            // push the farther child first so the nearer one is explored first
            let (first, df, second, ds) = if dl <= dr { (l, dl, r, dr) } else { (r, dr, l, dl) };
            if ds < best {
                stack[sp] = second as u32;
                sp += 1;
            }
            if df < best {
                stack[sp] = first as u32;
                sp += 1;
            }
        }
        hit
    }

    /// True when some primitive has squared distance `<= r2`; stops at the
    /// first such primitive.
    pub fn any_within(&self, p: P3, r2: f64, dist2: impl Fn(usize) -> f64) -> bool {
        let mut stack: [u32; 64] = [0; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let n = self.nodes[stack[sp] as usize];
            if box_dist2(p, n.lo, n.hi) > r2 {
                continue;
            }
            if n.count > 0 {
                if self.order[n.start as usize..(n.start + n.count) as usize].iter().any(|&i| dist2(i as usize) <= r2) {
                    return true;
                }
                continue;
            }
            stack[sp] = n.start;
            stack[sp + 1] = n.start + 1;
            sp += 2;
        }
        false
    }

    pub fn bounds(&self) -> (P3, P3) {
        (self.nodes[0].lo, self.nodes[0].hi)
    }
}

/// Closest point to `p` on the segment `ab`.
pub fn closest_on_segment(p: P3, a: P3, b: P3) -> P3 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = if l2 > 0.0 { (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    add(a, scale(ab, t))
}

pub fn point_segment_dist2(p: P3, a: P3, b: P3) -> f64 {
    let d = sub(p, closest_on_segment(p, a, b));
    dot(d, d)
}

/// Closest point to `p` on the triangle `abc`, by classifying `p` into the
/// Voronoi regions of the vertices, edges and face.
pub fn closest_on_triangle(p: P3, a: P3, b: P3, c: P3) -> P3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add(a, scale(ab, d1 / (d1 - d3)));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add(a, scale(ac, d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return add(b, scale(sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6))));
    }
    let denom = 1.0 / (va + vb + vc);
    add(a, add(scale(ab, vb * denom), scale(ac, vc * denom)))
}

pub fn point_triangle_dist2(p: P3, a: P3, b: P3, c: P3) -> f64 {
    let d = sub(p, closest_on_triangle(p, a, b, c));
    dot(d, d)
}
