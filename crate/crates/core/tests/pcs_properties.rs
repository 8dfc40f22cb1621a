use pcsmpc::pcs::{
    density_from_pressure, latent_energy, stored_energy_sh, PcsProperties, TankGeometry,
    TankMeasurement,
};
use pcsmpc::GRAVITY;
use proptest::prelude::*;

proptest! {
    #[test]
    fn density_is_homogeneous(dp in 1.0f64..1e5, dz in 0.01f64..5.0, k in 0.01f64..100.0) {
        let a = density_from_pressure(dp, dz).unwrap();
        let b = density_from_pressure(k * dp, k * dz).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs());
    }

    #[test]
    fn latent_energy_monotone_and_clamped(r1 in 900.0f64..1000.0, r2 in 900.0f64..1000.0, m in 1.0f64..1000.0) {
        let p = PcsProperties::default();
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        // density falls as paraffin melts, so lower density means more latent heat
        let e_hi_rho = latent_energy(hi, m, &p).unwrap();
        let e_lo_rho = latent_energy(lo, m, &p).unwrap();
        prop_assert!(e_lo_rho >= e_hi_rho);
        let max = m * p.latent_heat() / 3600.0;
        prop_assert!(e_lo_rho <= max + 1e-12 && e_hi_rho >= 0.0);
        if lo <= p.rho_liq { prop_assert_eq!(e_lo_rho, max); }
        if hi >= p.rho_sol { prop_assert_eq!(e_hi_rho, 0.0); }
    }

    #[test]
    fn water_reduces_to_sensible_formula(t in 19.0f64..90.0, rho in 900.0f64..1000.0, m in 10.0f64..1000.0) {
        let water = PcsProperties::default().with_mass_fraction(0.0).unwrap();
        let geom = TankGeometry { m_sh: m, ..TankGeometry::default() };
        let dz = 0.5;
        let meas = TankMeasurement {
            t_top: 55.0,
            t_center: t,
            t_bottom: t,
            p_center: 1000.0,
            p_bottom: 1000.0 + rho * GRAVITY * dz,
            z_center: 0.6,
            z_bottom: 0.1,
        };
        let e = stored_energy_sh(&meas, &geom, &water).unwrap();
        let expected = (m * 4.18 * (t - geom.t_sh_ref) / 3600.0).max(0.0);
        prop_assert_eq!(e, expected);
    }
}
