//! Single-qubit process tomography of the transfer channel.
//!
//! Process matrices are expressed in the operator basis
//! `E = {1, X, −iY, Z}` (in this order): `ε(ρ) = Σ_mn χ_mn E_m ρ E_n†`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::CouplingPattern;
use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::noise::{EngineMode, EvolutionPlan, KrausSet, NoiseConfig};
use crate::qstate::{DensityMatrix, Pauli, StateVector};
use crate::transfer::{probe_outputs, Dynamics};

/// Tag written next to every serialized χ.
pub const BASIS_TAG: &str = "I,X,-iY,Z";

const PHYSICAL_TOL: f64 = 1e-6;

/// `E_0..E_3 = 1, X, −iY, Z`.
pub fn basis_operators() -> [CMatrix; 4] {
    [
        Pauli::I.matrix(),
        Pauli::X.matrix(),
        Pauli::Y.matrix() * Complex64::new(0.0, -1.0),
        Pauli::Z.matrix(),
    ]
}

/// `|0⟩, |1⟩, |+⟩, |+y⟩`.
pub fn probe_states() -> [StateVector; 4] {
    let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    [
        StateVector::basis(1, 0).expect("basis"),
        StateVector::basis(1, 1).expect("basis"),
        StateVector::plus(),
        StateVector::qubit(h, Complex64::new(0.0, h.re)).expect("normalized"),
    ]
}

/// Channel outputs for the four probes, in [`probe_states`] order.
#[derive(Clone, Debug)]
pub struct ChannelSample {
    pub outputs: [DensityMatrix; 4],
}

impl ChannelSample {
    pub fn from_matrices(outputs: [CMatrix; 4]) -> Result<Self> {
        let [a, b, c, d] = outputs.map(|mut m| {
            linalg::hermitize(&mut m);
            DensityMatrix::new(1, m)
        });
        Ok(Self {
            outputs: [a?, b?, c?, d?],
        })
    }

    /// Feed each probe through an arbitrary single-qubit black box.
    pub fn from_map(map: impl Fn(&DensityMatrix) -> Result<CMatrix>) -> Result<Self> {
        let [a, b, c, d] = probe_states().map(|p| map(&p.to_density()));
        Self::from_matrices([a?, b?, c?, d?])
    }
}

/// The transfer protocol viewed as a single-qubit channel read out at a
/// fixed time.
#[derive(Clone, Debug)]
pub struct TransferPipeline {
    pub pattern: CouplingPattern,
    pub noise: Option<NoiseConfig>,
    pub readout_time: f64,
    /// Steps from `t = 0` to the readout for open evolution.
    pub n_steps: usize,
}

/// Run every probe through the pipeline and collect the last-qubit states.
pub fn sample_channel(pipeline: &TransferPipeline) -> Result<ChannelSample> {
    let (_, mut outputs) = match &pipeline.noise {
        None => probe_outputs(&pipeline.pattern, &Dynamics::Unitary(&[pipeline.readout_time]))?,
        Some(noise) => {
            let plan = EvolutionPlan::new(pipeline.readout_time, pipeline.n_steps, EngineMode::Deterministic)?;
            probe_outputs(&pipeline.pattern, &Dynamics::Open { noise, plan: &plan })?
        }
    };
    let last = outputs.pop().ok_or(Error::Empty("probe outputs"))?;
    ChannelSample::from_matrices(last)
}

/// 4×4 process matrix in the basis [`BASIS_TAG`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    pub chi: CMatrix,
}

impl ProcessMatrix {
    pub fn new(chi: CMatrix) -> Result<Self> {
        if chi.shape() != (4, 4) {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: chi.nrows(),
            });
        }
        let dev = linalg::hermiticity_error(&chi);
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self { chi })
    }

    /// `diag(1, 0, 0, 0)`.
    pub fn identity() -> Self {
        let mut chi = CMatrix::zeros(4, 4);
        chi[(0, 0)] = ONE;
        Self { chi }
    }

    pub fn from_real_diagonal(d: [f64; 4]) -> Self {
        let mut chi = CMatrix::zeros(4, 4);
        for (k, v) in d.into_iter().enumerate() {
            chi[(k, k)] = Complex64::from(v);
        }
        Self { chi }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let e = basis_operators();
        let mut out = CMatrix::zeros(2, 2);
        for m in 0..4 {
            for n in 0..4 {
                let c = self.chi[(m, n)];
                if c != ZERO {
                    out += &e[m] * rho * e[n].adjoint() * c;
                }
            }
        }
        out
    }

    /// Max-norm distance of `Σ χ_mn E_n† E_m` from the identity.
    pub fn trace_preservation_error(&self) -> f64 {
        let e = basis_operators();
        let mut sum = CMatrix::zeros(2, 2);
        for m in 0..4 {
            for n in 0..4 {
                sum += e[n].adjoint() * &e[m] * self.chi[(m, n)];
            }
        }
        linalg::max_abs_diff(&sum, &linalg::identity(2))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.chi.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(f64::NAN)
    }

    pub fn check_physical(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -PHYSICAL_TOL {
            return Err(Error::Unphysical { min_eigenvalue: min });
        }
        Ok(())
    }

    pub fn to_json(&self) -> ProcessMatrixJson {
        let grab = |f: fn(&Complex64) -> f64| std::array::from_fn(|r| std::array::from_fn(|c| f(&self.chi[(r, c)])));
        ProcessMatrixJson {
            basis: BASIS_TAG.to_string(),
            re: grab(|z| z.re),
            im: grab(|z| z.im),
        }
    }

    pub fn from_json(j: &ProcessMatrixJson) -> Result<Self> {
        if j.basis != BASIS_TAG {
            return Err(crate::error::invalid("basis", format!("expected {BASIS_TAG}, got {}", j.basis)));
        }
        Self::new(CMatrix::from_fn(4, 4, |r, c| Complex64::new(j.re[r][c], j.im[r][c])))
    }
}

/// Serialized χ: row-major real and imaginary parts plus the basis tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrixJson {
    pub basis: String,
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

/// Linear-inversion tomography.
///
/// Builds `ε(|i⟩⟨j|)` from the probes (using
/// `ε(|0⟩⟨1|) = ε(ρ+) + iε(ρ+y) − (1+i)(ε(ρ0)+ε(ρ1))/2`), stacks them into
/// `R = [[ε(|0⟩⟨0|), ε(|0⟩⟨1|)], [ε(|1⟩⟨0|), ε(|1⟩⟨1|)]]` and returns
/// `χ = Λ R Λ` with `Λ = ½[[1, X], [X, −1]]`.
pub fn reconstruct_chi(sample: &ChannelSample) -> Result<ProcessMatrix> {
    let [r0, r1, rp, ry] = sample.outputs.each_ref().map(|d| d.matrix().clone());
    let i = Complex64::i();
    let r01 = &rp + &ry * i - (&r0 + &r1) * ((ONE + i) * 0.5);
    let r10 = r01.adjoint();
    let mut big = CMatrix::zeros(4, 4);
    big.view_mut((0, 0), (2, 2)).copy_from(&r0);
    big.view_mut((0, 2), (2, 2)).copy_from(&r01);
    big.view_mut((2, 0), (2, 2)).copy_from(&r10);
    big.view_mut((2, 2), (2, 2)).copy_from(&r1);
    let x = Pauli::X.matrix();
    let mut lambda = CMatrix::zeros(4, 4);
    lambda.view_mut((0, 0), (2, 2)).copy_from(&(linalg::identity(2) * Complex64::from(0.5)));
    lambda.view_mut((0, 2), (2, 2)).copy_from(&(&x * Complex64::from(0.5)));
    lambda.view_mut((2, 0), (2, 2)).copy_from(&(&x * Complex64::from(0.5)));
    lambda.view_mut((2, 2), (2, 2)).copy_from(&(linalg::identity(2) * Complex64::from(-0.5)));
    let mut chi = &lambda * big * &lambda;
    linalg::hermitize(&mut chi);
    ProcessMatrix::new(chi)
}

/// `F_p = Tr(χ_ref χ)`.
pub fn process_fidelity(reference: &ProcessMatrix, chi: &ProcessMatrix) -> f64 {
    (&reference.chi * &chi.chi).trace().re
}

/// Qubit relation `F_avg = (2F_p + 1)/3`.
pub fn average_fidelity_from_process(fp: f64) -> f64 {
    (2.0 * fp + 1.0) / 3.0
}

/// Haar-averaged output fidelity of a physical channel.
pub fn average_state_fidelity(chi: &ProcessMatrix) -> Result<f64> {
    chi.check_physical()?;
    Ok(average_fidelity_from_process(process_fidelity(&ProcessMatrix::identity(), chi)))
}

/// Randomized quasi-Monte Carlo estimate of the same average.
///
/// The inputs are a `samples`-point spherical Fibonacci lattice on the Bloch
/// sphere under one Haar-random rotation, so each input is marginally Haar
/// distributed and the estimator is unbiased. Its spread is far below that of
/// i.i.d. draws.
pub fn average_state_fidelity_sampled<R: Rng + ?Sized>(chi: &ProcessMatrix, samples: usize, rng: &mut R) -> f64 {
    let rot = random_rotation(rng);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let vals: Vec<f64> = (0..samples)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / samples as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let r = rot * Vector3::new(rho * phi.cos(), rho * phi.sin(), z);
            let psi = bloch_state(r);
            psi.amplitudes().dotc(&(chi.apply(psi.to_density().matrix()) * psi.amplitudes())).re
        })
        .collect();
    linalg::mean_and_stderr(&vals).0
}

/// Uniform rotation from a normalized Gaussian quaternion.
fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q = loop {
        let v: nalgebra::Vector4<f64> = nalgebra::Vector4::from_fn(|_, _| rng.sample(rand_distr::StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            break nalgebra::Quaternion::from(v / n);
        }
    };
    *nalgebra::UnitQuaternion::new_unchecked(q).to_rotation_matrix().matrix()
}

/// Pure state with unit Bloch vector `r`.
fn bloch_state(r: Vector3<f64>) -> StateVector {
    let theta = r.z.clamp(-1.0, 1.0).acos();
    let phi = r.y.atan2(r.x);
    StateVector::qubit(
        Complex64::from((theta / 2.0).cos()),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    )
    .expect("normalized")
}

/// Bloch-space form of a qubit channel: `r ↦ A r + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub a: Matrix3<f64>,
    pub c: Vector3<f64>,
}

impl AffineMap {
    pub fn of(chi: &ProcessMatrix) -> Self {
        let bloch = |r: [f64; 3]| -> Vector3<f64> {
            let out = chi.apply(DensityMatrix::from_bloch(r).matrix());
            let b = DensityMatrix::from_raw(1, out).bloch().expect("single qubit");
            Vector3::new(b[0], b[1], b[2])
        };
        let c = bloch([0.0; 3]);
        let mut a = Matrix3::zeros();
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            a.set_column(j, &(bloch(e) - c));
        }
        Self { a, c }
    }

    pub fn apply(&self, r: [f64; 3]) -> [f64; 3] {
        let v = self.a * Vector3::new(r[0], r[1], r[2]) + self.c;
        [v[0], v[1], v[2]]
    }

    /// Singular values of `A`, descending: the sphere's semi-axes.
    pub fn semi_axes(&self) -> [f64; 3] {
        let mut s: Vec<f64> = self.a.svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        [s[0], s[1], s[2]]
    }

    /// Angle and unit axis of the rotation closest to `A` (polar factor).
    pub fn rotation(&self) -> (f64, [f64; 3]) {
        let svd = self.a.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            r = -r;
        }
        let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let angle = cos.acos();
        let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
        let norm = axis.norm();
        let axis = if norm > 1e-15 { axis / norm } else { Vector3::new(1.0, 0.0, 0.0) };
        (angle, [axis[0], axis[1], axis[2]])
    }
}

/// Images of Bloch vectors under the channel.
pub fn bloch_image(chi: &ProcessMatrix, inputs: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    for r in inputs {
        if r.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12 {
            return Err(crate::error::invalid("bloch", format!("{r:?} lies outside the unit ball")));
        }
    }
    let map = AffineMap::of(chi);
    Ok(inputs.iter().map(|&r| map.apply(r)).collect())
}

/// A latitude/longitude grid on the unit sphere.
pub fn sphere_grid(n_theta: usize, n_phi: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / n_theta as f64;
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            out.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    out
}

/// `rx,ry,rz,rx',ry',rz'` rows.
pub fn bloch_image_csv(inputs: &[[f64; 3]], outputs: &[[f64; 3]]) -> String {
    let mut s = String::from("rx,ry,rz,rx_out,ry_out,rz_out\n");
    for (i, o) in inputs.iter().zip(outputs) {
        s.push_str(&format!("{},{},{},{},{},{}\n", i[0], i[1], i[2], o[0], o[1], o[2]));
    }
    s
}

/// Kraus operators from the eigensystem of χ, with the negative eigenvalue
/// mass that was clipped to zero.
pub fn kraus_from_chi(chi: &ProcessMatrix) -> Result<(KrausSet, f64)> {
    chi.check_physical()?;
    let eig = SymmetricEigen::new(chi.chi.clone());
    let e = basis_operators();
    let mut clipped = 0.0;
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut ops = Vec::new();
    for k in order {
        let lam = eig.eigenvalues[k];
        if lam < 0.0 {
            clipped += -lam;
            continue;
        }
        if lam < 1e-14 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        // fix the global phase: largest component real and positive
        let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ONE);
        let phase = big.conj() / big.norm();
        let mut op = CMatrix::zeros(2, 2);
        for m in 0..4 {
            op += &e[m] * (v[m] * phase);
        }
        ops.push(op * Complex64::from(lam.sqrt()));
    }
    Ok((KrausSet::with_tolerance(ops, PHYSICAL_TOL)?, clipped))
}
