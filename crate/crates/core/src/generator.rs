//! Real 3x3 generator `M` of the Poincare equation `dn/dt = M n`, and the
//! Lindblad right-hand side in density-matrix form.
//!
//! Layout shared by every mode:
//!
//! ```text
//!     [ -2 G23   -2 B-    2 D+  ]
//! M = [  2 B+   -2 G13   -2 C-  ]      G_ij = c_ii + c_jj
//!     [ -2 D-    2 C+   -2 G12  ]
//! ```
//!
//! with `B+ = b + c12`, `B- = b - c21`, `C+ = c + c23`, `C- = c - c32`,
//! `D+ = d + c31`, `D- = d - c13` and `(c, d, b)` the precession field.

use nalgebra::Matrix3;

use crate::error::Result;
use crate::hamiltonian::{field_of, flavor_hamiltonian, from_field, mass_frame_hamiltonian};
use crate::params::OscillationParams;
use crate::state::{bloch_components, c, pauli, CMatrix2, DensityMatrix2};

/// How the precession part of the generator is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorMode {
    /// Printed coefficients: `b = V0/2 cos2t - omega/2`, `c = V0/2 sin2t cos phi`,
    /// `d = V0/2 sin2t sin phi`.
    PaperLiteral,
    /// `2 h x n` with `h` the Pauli decomposition of the mass-frame Hamiltonian
    /// (the frame in which the initial flavor states are written), plus the
    /// Pauli expansion of the dissipator. Numerically equal to `PaperLiteral`
    /// but assembled along an independent route.
    DerivedFromH,
    /// `2 h x n` with `h` read off the flavor-basis matrix of the amplitude
    /// equation. Mixes frames with the initial states; kept for comparison.
    FlavorFrame,
}

impl GeneratorMode {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorMode::PaperLiteral => "paper",
            GeneratorMode::DerivedFromH => "derived",
            GeneratorMode::FlavorFrame => "flavor",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(GeneratorMode::PaperLiteral),
            "derived" => Some(GeneratorMode::DerivedFromH),
            "flavor" => Some(GeneratorMode::FlavorFrame),
            _ => None,
        }
    }
}

/// Named coefficients of the generator (eV).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coefficients {
    pub b_plus: f64,
    pub b_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub gamma12: f64,
    pub gamma13: f64,
    pub gamma23: f64,
}

impl Coefficients {
    /// `c11 + c22 + c33`, half the sum of the three `G_ij`.
    pub fn gamma(&self) -> f64 {
        0.5 * (self.gamma12 + self.gamma13 + self.gamma23)
    }

    fn to_matrix(self) -> Matrix3<f64> {
        let k = self;
        Matrix3::new(
            -2.0 * k.gamma23, -2.0 * k.b_minus, 2.0 * k.d_plus,
            2.0 * k.b_plus, -2.0 * k.gamma13, -2.0 * k.c_minus,
            -2.0 * k.d_minus, 2.0 * k.c_plus, -2.0 * k.gamma12,
        )
    }

    fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self {
            b_plus: 0.5 * m[(1, 0)],
            b_minus: -0.5 * m[(0, 1)],
            c_plus: 0.5 * m[(2, 1)],
            c_minus: -0.5 * m[(1, 2)],
            d_plus: 0.5 * m[(0, 2)],
            d_minus: -0.5 * m[(2, 0)],
            gamma12: -0.5 * m[(2, 2)],
            gamma13: -0.5 * m[(1, 1)],
            gamma23: -0.5 * m[(0, 0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochGenerator {
    matrix: Matrix3<f64>,
    mode: GeneratorMode,
    coeffs: Coefficients,
}

impl BlochGenerator {
    /// Wraps an arbitrary real generator; coefficients are read back off the layout.
    pub fn from_matrix(matrix: Matrix3<f64>, mode: GeneratorMode) -> Self {
        Self { matrix, mode, coeffs: Coefficients::from_matrix(&matrix) }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn mode(&self) -> GeneratorMode {
        self.mode
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Frobenius norm (eV).
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }
}

pub fn build_generator(params: &OscillationParams, mode: GeneratorMode) -> BlochGenerator {
    match mode {
        GeneratorMode::PaperLiteral => literal(params),
        GeneratorMode::DerivedFromH => derived(&mass_frame_hamiltonian(params), params, mode),
        GeneratorMode::FlavorFrame => derived(&flavor_hamiltonian(params), params, mode),
    }
}

fn literal(params: &OscillationParams) -> BlochGenerator {
    let (s2, c2) = params.sin_cos_2theta();
    let (sp, cp) = params.phi_cp.sin_cos();
    let v0 = params.v0;
    let dm = params.delta_m2 / (4.0 * params.energy_ev);
    let cij = |i: usize, j: usize| params.decay.get(i - 1, j - 1);
    let coeffs = Coefficients {
        b_plus: 0.5 * v0 * c2 - dm + cij(1, 2),
        b_minus: 0.5 * v0 * c2 - dm - cij(2, 1),
        c_plus: 0.5 * v0 * s2 * cp + cij(2, 3),
        c_minus: 0.5 * v0 * s2 * cp - cij(3, 2),
        d_plus: 0.5 * v0 * s2 * sp + cij(3, 1),
        d_minus: 0.5 * v0 * s2 * sp - cij(1, 3),
        gamma12: cij(1, 1) + cij(2, 2),
        gamma13: cij(1, 1) + cij(3, 3),
        gamma23: cij(2, 2) + cij(3, 3),
    };
    BlochGenerator { matrix: coeffs.to_matrix(), mode: GeneratorMode::PaperLiteral, coeffs }
}

fn derived(h: &CMatrix2, params: &OscillationParams, mode: GeneratorMode) -> BlochGenerator {
    let [hx, hy, hz] = field_of(h);
    // 2 h x n
    let precession = Matrix3::new(
        0.0, -2.0 * hz, 2.0 * hy,
        2.0 * hz, 0.0, -2.0 * hx,
        -2.0 * hy, 2.0 * hx, 0.0,
    );
    BlochGenerator::from_matrix(precession + dissipator_matrix(params), mode)
}

/// Bloch form of the dissipator: entry `(m, k) = 2 c_km - 2 tr(c) delta_km`.
pub fn dissipator_matrix(params: &OscillationParams) -> Matrix3<f64> {
    let tr = params.decay.trace();
    Matrix3::from_fn(|m, k| 2.0 * params.decay.get(k, m) - if m == k { 2.0 * tr } else { 0.0 })
}

/// Hamiltonian whose commutator produces the precession part of `mode`.
pub fn precession_hamiltonian(params: &OscillationParams, mode: GeneratorMode) -> CMatrix2 {
    match mode {
        GeneratorMode::DerivedFromH => mass_frame_hamiltonian(params),
        GeneratorMode::FlavorFrame => flavor_hamiltonian(params),
        GeneratorMode::PaperLiteral => {
            let (s2, c2) = params.sin_cos_2theta();
            let (sp, cp) = params.phi_cp.sin_cos();
            let v = 0.5 * params.v0;
            from_field([v * s2 * cp, v * s2 * sp, v * c2 - 0.5 * params.omega()])
        }
    }
}

/// `L rho = 1/2 sum_ij c_ij ([s_i rho, s_j] + [s_i, rho s_j])`.
pub fn dissipator(params: &OscillationParams, rho: &CMatrix2) -> CMatrix2 {
    let s = pauli();
    let mut out = CMatrix2::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let cij = params.decay.get(i, j);
            if cij == 0.0 {
                continue;
            }
            let a = s[i] * rho;
            let b = rho * s[j];
            let term = (a * s[j] - s[j] * a) + (s[i] * b - b * s[i]);
            out += term * c(0.5 * cij, 0.0);
        }
    }
    out
}

/// `-i [H, rho] + L rho` on an arbitrary 2x2 matrix (no validation).
pub fn master_rhs_matrix(params: &OscillationParams, rho: &CMatrix2, mode: GeneratorMode) -> CMatrix2 {
    let h = precession_hamiltonian(params, mode);
    (h * rho - rho * h) * c(0.0, -1.0) + dissipator(params, rho)
}

/// Master-equation derivative (eV) of a validated density matrix.
pub fn master_rhs(params: &OscillationParams, rho: &DensityMatrix2, mode: GeneratorMode) -> Result<CMatrix2> {
    bloch_components(rho.matrix())?;
    Ok(master_rhs_matrix(params, rho.matrix(), mode))
}
