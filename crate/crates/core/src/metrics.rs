//! Error metrics comparing full-order and reduced fields, in percent.

use crate::error::{Error, Result};
use crate::grid::{l2_norm, ScalarField};

/// E = 100 ‖fom - rom‖ / ‖fom‖.
pub fn error_relative(fom: &ScalarField, rom: &ScalarField) -> Result<f64> {
    fom.grid().check_same(rom.grid())?;
    let reference = l2_norm(fom);
    if reference == 0.0 {
        return Err(Error::UndefinedMetric("reference field has zero norm"));
    }
    let mut diff = fom.clone();
    diff.axpy(-1.0, rom)?;
    Ok(100.0 * l2_norm(&diff) / reference)
}

/// Signed enstrophy error E_e = 100 (e_fom - e_rom) / e_fom.
pub fn error_enstrophy(e_fom: f64, e_rom: f64) -> Result<f64> {
    if e_fom == 0.0 {
        return Err(Error::UndefinedMetric("reference enstrophy is zero"));
    }
    Ok(100.0 * (e_fom - e_rom) / e_fom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldKind, StructuredGrid};
    use alloc::vec;

    #[test]
    fn relative_error_examples() {
        let g = StructuredGrid::new(2, 1, 2.0, 1.0).unwrap();
        let fom = ScalarField::from_values(g, FieldKind::Generic, vec![3.0, 4.0]).unwrap();
        let rom = ScalarField::from_values(g, FieldKind::Generic, vec![3.0, 0.0]).unwrap();
        assert!((error_relative(&fom, &rom).unwrap() - 80.0).abs() < 1e-12);
        assert_eq!(error_relative(&fom, &fom).unwrap(), 0.0);
        let zero = ScalarField::zeros(g, FieldKind::Generic);
        assert_eq!(error_relative(&fom, &zero).unwrap(), 100.0);
        assert!(matches!(error_relative(&zero, &fom), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn enstrophy_error_examples() {
        assert_eq!(error_enstrophy(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(error_enstrophy(2.0, 0.0).unwrap(), 100.0);
        assert!((error_enstrophy(2.0, 2.1).unwrap() + 5.0).abs() < 1e-12);
        assert!(error_enstrophy(0.0, 1.0).is_err());
    }
}
