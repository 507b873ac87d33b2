//! Boundary treatment applied between streaming and the buffer swap.
//!
//! * periodic: nothing to do, streaming already wraps;
//! * non-equilibrium extrapolation: all 9 populations of an edge node are
//!   rebuilt from the Dirichlet value and the inward neighbour's
//!   non-equilibrium part; corner nodes use the diagonal neighbour;
//! * halfway anti-bounce-back: links crossing a wall located half a spacing
//!   beyond the edge node return `-g~_i + 2 w_i phi_wall`.

use crate::collision::{equilibrium, Populations};
use crate::error::{LbmError, Result};
use crate::fields::Grid;
use crate::lattice::{LatticeD2Q9, OFFSETS, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Periodic,
    NonEqExtrapolation,
    /// Anti-bounce-back: Dirichlet value on a wall between nodes.
    HalfwayBounceBack,
    /// Plain bounce-back (zero flux), kept for comparison runs.
    HalfwayPlainBounceBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Edges {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl Edges {
    pub const NONE: Edges = Edges {
        left: false,
        right: false,
        bottom: false,
        top: false,
    };
    pub const ALL: Edges = Edges {
        left: true,
        right: true,
        bottom: true,
        top: true,
    };
    pub const BOTTOM_TOP: Edges = Edges {
        left: false,
        right: false,
        bottom: true,
        top: true,
    };

    pub fn contains(&self, edge: Edge) -> bool {
        match edge {
            Edge::Left => self.left,
            Edge::Right => self.right,
            Edge::Bottom => self.bottom,
            Edge::Top => self.top,
        }
    }

    /// Axes left periodic by this edge set.
    pub fn periodic_axes(&self) -> [bool; 2] {
        [!(self.left || self.right), !(self.bottom || self.top)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub edges: Edges,
}

impl BoundarySpec {
    pub fn periodic() -> Self {
        Self {
            kind: BoundaryKind::Periodic,
            edges: Edges::NONE,
        }
    }

    pub fn periodic_axes(&self) -> [bool; 2] {
        match self.kind {
            BoundaryKind::Periodic => [true, true],
            _ => self.edges.periodic_axes(),
        }
    }
}

/// Dirichlet data supplied by the case: `phi_wall` at a physical point.
pub trait WallData {
    fn wall_phi(&self, x: [f64; 2]) -> f64;
    fn wall_velocity(&self, x: [f64; 2]) -> [f64; 2];
}

/// Populations of a boundary node by non-equilibrium extrapolation.
pub fn noneq_extrapolation(
    lat: &LatticeD2Q9,
    neighbor: &Populations,
    neighbor_phi: f64,
    neighbor_u: [f64; 2],
    phi_wall: f64,
    u_wall: [f64; 2],
) -> Populations {
    let eq_wall = equilibrium(lat, phi_wall, u_wall);
    let eq_nb = equilibrium(lat, neighbor_phi, neighbor_u);
    let mut g = [0.0; Q];
    for i in 0..Q {
        g[i] = eq_wall[i] + (neighbor[i] - eq_nb[i]);
    }
    g
}

fn read_node(buf: &[f64], n: usize, node: usize) -> Populations {
    let mut g = [0.0; Q];
    for (i, v) in g.iter_mut().enumerate() {
        *v = buf[i * n + node];
    }
    g
}

/// Non-equilibrium extrapolation on the selected edges of the streamed buffer.
///
/// `u` is the node velocity field used for the neighbour's equilibrium.
pub fn apply_noneq_extrapolation(
    lat: &LatticeD2Q9,
    grid: &Grid,
    edges: Edges,
    streamed: &mut [f64],
    u: &[[f64; 2]],
    wall: &dyn WallData,
) -> Result<()> {
    let (nx, ny) = (grid.nx, grid.ny);
    if ((edges.left || edges.right) && nx < 3) || ((edges.bottom || edges.top) && ny < 3) {
        return Err(LbmError::Configuration(
            "non-equilibrium extrapolation needs at least 3 nodes across each walled axis".into(),
        ));
    }
    let n = grid.len();
    let mut updates: Vec<(usize, Populations)> = Vec::new();
    let mut visit = |j: usize, k: usize| {
        let on_left = edges.left && j == 0;
        let on_right = edges.right && j == nx - 1;
        let on_bottom = edges.bottom && k == 0;
        let on_top = edges.top && k == ny - 1;
        if !(on_left || on_right || on_bottom || on_top) {
            return;
        }
        let jn = if on_left { 1 } else if on_right { nx - 2 } else { j };
        let kn = if on_bottom { 1 } else if on_top { ny - 2 } else { k };
        let node = grid.index(j, k);
        let nb = grid.index(jn, kn);
        let g_nb = read_node(streamed, n, nb);
        let phi_nb: f64 = g_nb.iter().sum();
        let x = grid.position(j, k);
        let g = noneq_extrapolation(
            lat,
            &g_nb,
            phi_nb,
            u[nb],
            wall.wall_phi(x),
            wall.wall_velocity(x),
        );
        updates.push((node, g));
    };
    for k in 0..ny {
        for j in 0..nx {
            let edge_node = j == 0 || j == nx - 1 || k == 0 || k == ny - 1;
            if edge_node {
                visit(j, k);
            }
        }
    }
    for (node, g) in updates {
        for (i, v) in g.iter().enumerate() {
            streamed[i * n + node] = *v;
        }
    }
    Ok(())
}

/// Incoming population across a resting Dirichlet wall,
/// `g_opp = -g~_i + 2 w_i phi_wall`.
pub fn halfway_antibounceback(
    weight: f64,
    outgoing: f64,
    phi_wall: f64,
    u_wall: [f64; 2],
) -> Result<f64> {
    if u_wall != [0.0, 0.0] {
        return Err(LbmError::Unsupported(
            "halfway bounce-back supports resting walls only".into(),
        ));
    }
    Ok(-outgoing + 2.0 * weight * phi_wall)
}

/// Directions whose link leaves the domain through `edge`.
fn outgoing_directions(edge: Edge) -> impl Iterator<Item = usize> {
    (0..Q).filter(move |&i| {
        let o = OFFSETS[i];
        match edge {
            Edge::Left => o[0] < 0,
            Edge::Right => o[0] > 0,
            Edge::Bottom => o[1] < 0,
            Edge::Top => o[1] > 0,
        }
    })
}

/// Physical location of the wall point facing an edge node.
pub fn halfway_wall_point(grid: &Grid, edge: Edge, j: usize, k: usize) -> [f64; 2] {
    let p = grid.position(j, k);
    let h = 0.5 * grid.dx;
    match edge {
        Edge::Left => [p[0] - h, p[1]],
        Edge::Right => [p[0] + h, p[1]],
        Edge::Bottom => [p[0], p[1] - h],
        Edge::Top => [p[0], p[1] + h],
    }
}

/// Halfway bounce-back on the selected edges. `post` holds the post-collision
/// populations that were streamed into `streamed`.
pub fn apply_halfway_bounceback(
    lat: &LatticeD2Q9,
    grid: &Grid,
    edges: Edges,
    post: &[f64],
    streamed: &mut [f64],
    wall: &dyn WallData,
    anti: bool,
) -> Result<()> {
    let n = grid.len();
    let (nx, ny) = (grid.nx, grid.ny);
    for edge in [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top] {
        if !edges.contains(edge) {
            continue;
        }
        let nodes: Vec<(usize, usize)> = match edge {
            Edge::Left => (0..ny).map(|k| (0, k)).collect(),
            Edge::Right => (0..ny).map(|k| (nx - 1, k)).collect(),
            Edge::Bottom => (0..nx).map(|j| (j, 0)).collect(),
            Edge::Top => (0..nx).map(|j| (j, ny - 1)).collect(),
        };
        for (j, k) in nodes {
            let node = grid.index(j, k);
            let xw = halfway_wall_point(grid, edge, j, k);
            let u_wall = wall.wall_velocity(xw);
            let phi_wall = wall.wall_phi(xw);
            for i in outgoing_directions(edge) {
                let out = post[i * n + node];
                let inc = lat.opposite[i];
                streamed[inc * n + node] = if anti {
                    halfway_antibounceback(lat.w[i], out, phi_wall, u_wall)?
                } else {
                    if u_wall != [0.0, 0.0] {
                        return Err(LbmError::Unsupported(
                            "halfway bounce-back supports resting walls only".into(),
                        ));
                    }
                    out
                };
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::DistributionField;

    struct Const(f64, [f64; 2]);
    impl WallData for Const {
        fn wall_phi(&self, _x: [f64; 2]) -> f64 {
            self.0
        }
        fn wall_velocity(&self, _x: [f64; 2]) -> [f64; 2] {
            self.1
        }
    }

    #[test]
    fn extrapolation_of_equilibrium_is_identity() {
        let lat = LatticeD2Q9::new(1.0, 1.0).unwrap();
        let u = [0.05, -0.02];
        let geq = equilibrium(&lat, 0.8, u);
        let out = noneq_extrapolation(&lat, &geq, 0.8, u, 0.8, u);
        for i in 0..Q {
            assert!((out[i] - geq[i]).abs() < 1e-15);
        }
        let out = noneq_extrapolation(&lat, &geq, 0.8, u, 1.3, [0.0, 0.1]);
        let want = equilibrium(&lat, 1.3, [0.0, 0.1]);
        for i in 0..Q {
            assert!((out[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn extrapolation_requires_interior_neighbour() {
        let lat = LatticeD2Q9::new(1.0, 1.0).unwrap();
        let grid = Grid::new(2, 5, 1.0, [0.0, 0.0]).unwrap();
        let mut buf = vec![0.0; grid.len() * Q];
        let u = vec![[0.0; 2]; grid.len()];
        let err = apply_noneq_extrapolation(&lat, &grid, Edges::ALL, &mut buf, &u, &Const(0.0, [0.0; 2]));
        assert!(matches!(err, Err(LbmError::Configuration(_))));
    }

    #[test]
    fn extrapolation_corner_uses_diagonal() {
        let lat = LatticeD2Q9::new(1.0, 1.0).unwrap();
        let grid = Grid::new(4, 4, 1.0, [0.0, 0.0]).unwrap();
        let mut f = DistributionField::zeros(grid.len());
        let mut marker = equilibrium(&lat, 1.0, [0.0; 2]);
        marker[1] += 0.01;
        f.set(grid.index(1, 1), &marker);
        // Move the populations into the shadow buffer, which plays the
        // streamed role below.
        f.swap();
        let u = vec![[0.0; 2]; grid.len()];
        let (_, streamed) = f.split_mut();
        apply_noneq_extrapolation(&lat, &grid, Edges::ALL, streamed, &u, &Const(2.0, [0.0; 2])).unwrap();
        f.swap();
        let g00 = f.get(grid.index(0, 0));
        let wall = equilibrium(&lat, 2.0, [0.0; 2]);
        let nb = equilibrium(&lat, marker.iter().sum(), [0.0; 2]);
        for i in 0..Q {
            assert!((g00[i] - (wall[i] + marker[i] - nb[i])).abs() < 1e-15);
        }
        // The far corner extrapolates from (2, 2), which carries no marker.
        let g33 = f.get(grid.index(3, 3));
        let rest = equilibrium(&lat, 0.0, [0.0; 2]);
        for i in 0..Q {
            assert!((g33[i] - (wall[i] - rest[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn antibounceback_values() {
        let w = 1.0 / 9.0;
        assert!((halfway_antibounceback(w, w * 0.6, 0.6, [0.0; 2]).unwrap() - w * 0.6).abs() < 1e-16);
        assert_eq!(halfway_antibounceback(w, 0.3, 0.0, [0.0; 2]).unwrap(), -0.3);
        assert!(matches!(
            halfway_antibounceback(w, 0.3, 0.0, [0.1, 0.0]),
            Err(LbmError::Unsupported(_))
        ));
    }

    #[test]
    fn halfway_wall_equilibrium_fixed_point() {
        let lat = LatticeD2Q9::new(1.0, 1.0).unwrap();
        let grid = Grid::new(3, 4, 1.0, [0.0, 0.0]).unwrap();
        let mut f = DistributionField::zeros(grid.len());
        let geq = equilibrium(&lat, 0.4, [0.0; 2]);
        for n in 0..grid.len() {
            f.set(n, &geq);
        }
        f.stream_to_shadow(&grid);
        let (post, streamed) = f.split_mut();
        apply_halfway_bounceback(&lat, &grid, Edges::BOTTOM_TOP, post, streamed, &Const(0.4, [0.0; 2]), true)
            .unwrap();
        f.swap();
        for n in 0..grid.len() {
            let g = f.get(n);
            for i in 0..Q {
                assert!((g[i] - geq[i]).abs() < 1e-16);
            }
        }
    }
}
