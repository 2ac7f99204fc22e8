//! Exact convex hulls of integer points.
//!
//! Coordinates are `i64`; every orientation predicate is evaluated in `i128`,
//! which is exact as long as coordinate differences stay below `2^40` in the
//! plane directions and `2^50` overall (the envelope code scales heights to
//! at most `2^48`).

use std::collections::HashMap;

pub type P2 = [i64; 2];
pub type P3 = [i64; 3];

#[inline]
pub fn cross2(o: P2, a: P2, b: P2) -> i128 {
    let (ax, ay) = ((a[0] - o[0]) as i128, (a[1] - o[1]) as i128);
    let (bx, by) = ((b[0] - o[0]) as i128, (b[1] - o[1]) as i128);
    ax * by - ay * bx
}

/// Vertices of the convex hull in counter-clockwise order, without collinear
/// points. Degenerate inputs return one or two points.
pub fn hull2d(points: &[P2]) -> Vec<P2> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<P2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Closed-polygon membership for a counter-clockwise hull from [`hull2d`];
/// degenerate hulls (points or segments) are handled as such.
pub fn polygon_contains(hull: &[P2], p: P2) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => on_segment(hull[0], hull[1], p),
        n => (0..n).all(|i| cross2(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    cross2(a, b, p) == 0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

#[inline]
fn sub3(a: P3, b: P3) -> [i128; 3] {
    [(a[0] - b[0]) as i128, (a[1] - b[1]) as i128, (a[2] - b[2]) as i128]
}

#[inline]
fn cross3(u: [i128; 3], v: [i128; 3]) -> [i128; 3] {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

#[inline]
fn dot3(u: [i128; 3], v: [i128; 3]) -> i128 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// Sign of the volume of `(a, b, c, p)`: positive when `p` is on the side of
/// the plane `abc` that `(b - a) × (c - a)` points to.
#[inline]
pub fn orient3(a: P3, b: P3, c: P3, p: P3) -> i128 {
    dot3(cross3(sub3(b, a), sub3(c, a)), sub3(p, a))
}

/// A triangular facet with an outward normal `n` and offset `d`: interior
/// points satisfy `n · x ≤ d`.
#[derive(Clone, Debug)]
pub struct Facet {
    pub vertices: [usize; 3],
    pub normal: [i128; 3],
    pub offset: i128,
}

#[derive(Clone, Debug)]
pub struct Hull3 {
    pub points: Vec<P3>,
    pub facets: Vec<Facet>,
}

impl Hull3 {
    pub fn contains(&self, p: P3) -> bool {
        let q = [p[0] as i128, p[1] as i128, p[2] as i128];
        self.facets.iter().all(|f| dot3(f.normal, q) <= f.offset)
    }
}

struct Face {
    v: [usize; 3],
    alive: bool,
    outside: Vec<usize>,
}

/// Convex hull of a point set that spans three dimensions; `None` when all
/// points are coplanar.
///
/// Incremental construction: every unassigned point waits on one visible
/// face; the farthest waiting point of a face is inserted by deleting its
/// visible region and coning the horizon to it.
pub fn hull3d(input: &[P3]) -> Option<Hull3> {
    let mut pts = input.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let n = pts.len();
    if n < 4 {
        return None;
    }
    // Initial simplex.
    let i0 = 0;
    let i1 = (1..n).find(|&i| pts[i] != pts[i0])?;
    let d01 = sub3(pts[i1], pts[i0]);
    let i2 = (1..n).find(|&i| cross3(d01, sub3(pts[i], pts[i0])) != [0, 0, 0])?;
    let i3 = (1..n).find(|&i| orient3(pts[i0], pts[i1], pts[i2], pts[i]) != 0)?;

    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let orient = |v: [usize; 3], p: usize, pts: &[P3]| orient3(pts[v[0]], pts[v[1]], pts[v[2]], pts[p]);

    let push_face = |faces: &mut Vec<Face>, edges: &mut HashMap<(usize, usize), usize>, v: [usize; 3]| {
        let id = faces.len();
        faces.push(Face { v, alive: true, outside: Vec::new() });
        edges.insert((v[0], v[1]), id);
        edges.insert((v[1], v[2]), id);
        edges.insert((v[2], v[0]), id);
        id
    };

    // Orient the four faces outward (the opposite vertex must be below).
    let simplex = [i0, i1, i2, i3];
    for skip in 0..4 {
        let others: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| simplex[k]).collect();
        let mut v = [others[0], others[1], others[2]];
        if orient(v, simplex[skip], &pts) > 0 {
            v.swap(1, 2);
        }
        push_face(&mut faces, &mut edges, v);
    }

    let assign = |faces: &mut Vec<Face>, candidates: &[usize], p: usize, pts: &[P3]| {
        for &fid in candidates {
            if faces[fid].alive && orient(faces[fid].v, p, pts) > 0 {
                faces[fid].outside.push(p);
                return;
            }
        }
    };

    let initial: Vec<usize> = (0..4).collect();
    for p in 0..n {
        if simplex.contains(&p) {
            continue;
        }
        assign(&mut faces, &initial, p, &pts);
    }

    let mut stack: Vec<usize> = (0..4).collect();
    while let Some(fid) = stack.pop() {
        if !faces[fid].alive || faces[fid].outside.is_empty() {
            continue;
        }
        // Farthest waiting point (exact comparison of signed volumes suffices
        // because all volumes share the face's normal).
        let eye = *faces[fid]
            .outside
            .iter()
            .max_by_key(|&&p| orient(faces[fid].v, p, &pts))
            .expect("nonempty");

        // Visible region by flood fill from fid.
        let mut visible = vec![fid];
        let mut seen = std::collections::HashSet::from([fid]);
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            let v = faces[f].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                let nb = edges[&(b, a)];
                if seen.contains(&nb) {
                    if !visible.contains(&nb) {
                        horizon.push((a, b));
                    }
                    continue;
                }
                if orient(faces[nb].v, eye, &pts) > 0 {
                    seen.insert(nb);
                    visible.push(nb);
                } else {
                    seen.insert(nb);
                    horizon.push((a, b));
                }
            }
        }
        // Faces judged not visible may be reached again from another visible
        // face; their shared edges are horizon edges too, which the loop above
        // already records because `seen` holds them but `visible` does not.

        let mut orphans = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            orphans.append(&mut faces[f].outside);
            let v = faces[f].v;
            for e in 0..3 {
                edges.remove(&(v[e], v[(e + 1) % 3]));
            }
        }
        let mut created = Vec::with_capacity(horizon.len());
        for &(a, b) in &horizon {
            created.push(push_face(&mut faces, &mut edges, [a, b, eye]));
        }
        for p in orphans {
            if p != eye {
                assign(&mut faces, &created, p, &pts);
            }
        }
        stack.extend(created);
    }

    let facets = faces
        .iter()
        .filter(|f| f.alive)
        .map(|f| {
            let [a, b, c] = f.v;
            let normal = cross3(sub3(pts[b], pts[a]), sub3(pts[c], pts[a]));
            let pa = [pts[a][0] as i128, pts[a][1] as i128, pts[a][2] as i128];
            Facet { vertices: f.v, normal, offset: dot3(normal, pa) }
        })
        .collect();
    Some(Hull3 { points: pts, facets })
}
