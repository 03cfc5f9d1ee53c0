//! How the near-diagonal rate `c1` decays with the dissipativity radius for heavy and light tails.

use kantorovich::noise::NoiseSpec;
use kantorovich::rates::{noise_rate_comparison, ComparisonSetup, CouplingKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let radii: Vec<f64> = (0..10).map(|i| 5.0 * 10f64.powf(i as f64 / 9.0)).collect();
    let setup =
        |sigma| ComparisonSetup { lipschitz: 0.1, dissipativity: 0.1, sigma, coupling: CouplingKind::RefinedBasic };

    let stable: Vec<NoiseSpec> = [1.2, 1.5, 1.8].iter().map(|&a| NoiseSpec::stable(a, 1)).collect::<Result<_, _>>()?;
    let mut table = noise_rate_comparison(&setup(0.5), &stable, &radii, &[1.0])?;
    let gaussian = noise_rate_comparison(&setup(1.0), &[NoiseSpec::gaussian(1)?], &radii, &[1.0])?;
    table.rows.extend(gaussian.rows);
    table.slopes.extend(gaussian.slopes);

    print!("{}", table.to_csv());
    for s in &table.slopes {
        println!("{:<12} slope of log c1 against {}: {:.3}", s.noise, s.regressor, s.slope);
    }
    Ok(())
}
