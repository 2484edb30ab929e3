//! Persistence of reduction artifacts: basis, singular values, RID, and
//! provenance, in the checksummed binary container.

use std::path::Path;

use nalgebra::DMatrix;

use super::ecsw::ReducedIntegrationDomain;
use super::pod::ReducedBasis;
use super::reduced::PartReduction;
use super::MorError;
use crate::util::binio::{read_file, write_file, Payload, Reader};

const KIND: &str = "part-reduction";

/// Saves a part reduction with free-form provenance (config digest, snapshot
/// design list, code version).
pub fn save_reduction(
    path: &Path,
    reduction: &PartReduction,
    provenance: &str,
) -> Result<(), MorError> {
    let mut p = Payload::new();
    p.put_str(KIND);
    p.put_str(provenance);
    let phi = &reduction.basis.phi;
    p.put_u64(phi.nrows() as u64);
    p.put_u64(phi.ncols() as u64);
    p.put_f64_slice(phi.as_slice());
    p.put_f64(reduction.basis.mode_tol);
    p.put_f64(reduction.basis.energy_fraction);
    p.put_f64_slice(&reduction.basis.singular_values);
    p.put_u32_slice(&reduction.rid.elements);
    p.put_f64_slice(&reduction.rid.weights);
    p.put_f64(reduction.rid.training_residual);
    p.put_f64(reduction.rid.residual_target);
    p.put_f64(reduction.rid.hr_tol);
    write_file(path, &p).map_err(MorError::Io)
}

/// Loads a reduction, validating the checksum and container kind. Returns the
/// reduction and its provenance string.
pub fn load_reduction(path: &Path) -> Result<(PartReduction, String), MorError> {
    let bytes = read_file(path).map_err(MorError::Io)?;
    let mut r = Reader::new(&bytes);
    let kind = r.str().map_err(MorError::Io)?;
    if kind != KIND {
        return Err(MorError::Io(crate::util::binio::BinError::Kind {
            expected: KIND.into(),
            found: kind,
        }));
    }
    let provenance = r.str().map_err(MorError::Io)?;
    let rows = r.u64().map_err(MorError::Io)? as usize;
    let cols = r.u64().map_err(MorError::Io)? as usize;
    let data = r.f64_vec().map_err(MorError::Io)?;
    let phi = DMatrix::from_column_slice(rows, cols, &data);
    let mode_tol = r.f64().map_err(MorError::Io)?;
    let energy_fraction = r.f64().map_err(MorError::Io)?;
    let singular_values = r.f64_vec().map_err(MorError::Io)?;
    let elements = r.u32_vec().map_err(MorError::Io)?;
    let weights = r.f64_vec().map_err(MorError::Io)?;
    let training_residual = r.f64().map_err(MorError::Io)?;
    let residual_target = r.f64().map_err(MorError::Io)?;
    let hr_tol = r.f64().map_err(MorError::Io)?;
    Ok((
        PartReduction {
            basis: ReducedBasis { phi, mode_tol, energy_fraction, singular_values },
            rid: ReducedIntegrationDomain {
                elements,
                weights,
                training_residual,
                residual_target,
                hr_tol,
            },
        },
        provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_roundtrip_bit_exact() {
        let dir = std::env::temp_dir().join(format!("mor-artifact-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("leg.reduction");
        let reduction = PartReduction {
            basis: ReducedBasis {
                phi: DMatrix::from_fn(9, 2, |i, j| (i as f64 + 0.37) * (j as f64 - 1.5)),
                mode_tol: 0.0032,
                energy_fraction: 0.99997,
                singular_values: vec![5.0, 0.1, 1e-9],
            },
            rid: ReducedIntegrationDomain {
                elements: vec![2, 7, 11],
                weights: vec![3.5, 1.0, 0.25],
                training_residual: 1.25e-4,
                residual_target: 2.0e-4,
                hr_tol: 0.001,
            },
        };
        save_reduction(&path, &reduction, "unit-test").unwrap();
        let (loaded, prov) = load_reduction(&path).unwrap();
        assert_eq!(loaded, reduction);
        assert_eq!(prov, "unit-test");

        // Corruption is caught by the checksum.
        let mut raw = std::fs::read(&path).unwrap();
        let mid = raw.len() / 2;
        raw[mid] ^= 0x40;
        std::fs::write(&path, &raw).unwrap();
        assert!(load_reduction(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
