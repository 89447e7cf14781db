//! Three-channel projection, the best approximation a camera can give, and
//! a spectral change it cannot see.

use spectral_recovery::camera::CameraModel;
use spectral_recovery::spectral::{inner_product, SpectralGrid, Spectrum};

fn main() -> spectral_recovery::Result<()> {
    let grid = SpectralGrid::visible();
    let cam = CameraModel::gaussian_rgb(grid);
    println!("gram condition number: {:.3}", cam.condition_number());

    let f = Spectrum::piecewise_linear(grid, &[(400.0, 0.2), (520.0, 0.7), (700.0, 0.4)])?;
    let p = cam.project(&f)?;
    println!("P = {:?}", p.values());

    let approx = cam.reconstruct(&cam.best_approx(&p)?)?;
    let residual = f.add_scaled(-1.0, &approx)?;
    println!("|F - approx| = {:.6}", residual.norm());
    for (j, s) in cam.sensitivities().iter().enumerate() {
        println!("  <residual, S{j}> = {:.2e}", inner_product(&residual, s)?);
    }

    let null = cam.null_perturbation(7)?.scaled(0.3);
    let g = f.add_scaled(1.0, &null)?;
    let q = cam.project(&g)?;
    println!("|dF| = {:.4}, P(F + dF) = {:?}", null.norm(), q.values());
    Ok(())
}
