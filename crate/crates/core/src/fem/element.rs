//! Bilinear quadrilateral (Q4) plane-stress element.

pub type Matrix8 = [[f64; 8]; 8];
pub type StrainDisplacement = [[f64; 8]; 3];

const GAUSS: f64 = 0.577_350_269_189_625_8;
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Plane-stress constitutive matrix at unit modulus.
pub fn plane_stress_matrix(nu: f64) -> [[f64; 3]; 3] {
    let c = 1.0 / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * 0.5 * (1.0 - nu)],
    ]
}

/// Strain-displacement matrix and Jacobian determinant at natural coordinates
/// `(xi, eta)` for an element with counter-clockwise corner coordinates.
pub fn strain_displacement(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> (StrainDisplacement, f64) {
    let mut dn_dxi = [0.0; 4];
    let mut dn_deta = [0.0; 4];
    for (a, [xa, ya]) in CORNERS.iter().enumerate() {
        dn_dxi[a] = 0.25 * xa * (1.0 + ya * eta);
        dn_deta[a] = 0.25 * ya * (1.0 + xa * xi);
    }
    let mut jac = [[0.0; 2]; 2];
    for a in 0..4 {
        jac[0][0] += dn_dxi[a] * coords[a][0];
        jac[0][1] += dn_dxi[a] * coords[a][1];
        jac[1][0] += dn_deta[a] * coords[a][0];
        jac[1][1] += dn_deta[a] * coords[a][1];
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let inv = [
        [jac[1][1] / det, -jac[0][1] / det],
        [-jac[1][0] / det, jac[0][0] / det],
    ];
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        let dx = inv[0][0] * dn_dxi[a] + inv[0][1] * dn_deta[a];
        let dy = inv[1][0] * dn_dxi[a] + inv[1][1] * dn_deta[a];
        b[0][2 * a] = dx;
        b[1][2 * a + 1] = dy;
        b[2][2 * a] = dy;
        b[2][2 * a + 1] = dx;
    }
    (b, det)
}

/// Jacobian determinants at the four 2x2 Gauss points.
pub fn gauss_jacobians(coords: &[[f64; 2]; 4]) -> [f64; 4] {
    let mut dets = [0.0; 4];
    for (k, [gx, gy]) in CORNERS.iter().enumerate() {
        dets[k] = strain_displacement(coords, gx * GAUSS, gy * GAUSS).1;
    }
    dets
}

/// Element stiffness at unit Young's modulus, 2x2 Gauss quadrature.
pub fn element_stiffness(coords: &[[f64; 2]; 4], nu: f64, thickness: f64) -> Matrix8 {
    let d = plane_stress_matrix(nu);
    let mut ke = [[0.0; 8]; 8];
    for [gx, gy] in CORNERS {
        let (b, det) = strain_displacement(coords, gx * GAUSS, gy * GAUSS);
        let scale = det * thickness;
        // db = D * B
        let mut db = [[0.0; 8]; 3];
        for r in 0..3 {
            for c in 0..8 {
                db[r][c] = d[r][0] * b[0][c] + d[r][1] * b[1][c] + d[r][2] * b[2][c];
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                ke[i][j] += scale * (b[0][i] * db[0][j] + b[1][i] * db[1][j] + b[2][i] * db[2][j]);
            }
        }
    }
    ke
}

/// Stiffness of an axis-aligned square element of side `size`.
pub fn square_element_stiffness(size: f64, nu: f64, thickness: f64) -> Matrix8 {
    element_stiffness(&square(size), nu, thickness)
}

pub(crate) fn square(size: f64) -> [[f64; 2]; 4] {
    [[0.0, 0.0], [size, 0.0], [size, size], [0.0, size]]
}

pub fn quad_form(ke: &Matrix8, a: &[f64; 8], b: &[f64; 8]) -> f64 {
    let mut acc = 0.0;
    for i in 0..8 {
        let mut row = 0.0;
        for j in 0..8 {
            row += ke[i][j] * b[j];
        }
        acc += a[i] * row;
    }
    acc
}
